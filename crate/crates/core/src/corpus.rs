//! Document ingestion, tokenization and the term → document index.
//!
//! Terms live in one string universe with three disjoint namespaces:
//! unigrams are runs of alphanumeric characters, bigrams join two unigrams
//! with [`BIGRAM_SEP`], and curated tags carry the [`TAG_PREFIX`]. Neither the
//! separator nor `:` can occur inside a unigram, so the namespaces never
//! collide.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::stopwords::is_stopword;
use crate::{Error, Result};

/// Joins the two halves of a bigram term.
pub const BIGRAM_SEP: char = '\u{2581}';
/// Prefix marking a curated-vocabulary tag term.
pub const TAG_PREFIX: &str = "tag:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            title: title.into(),
            abstract_text: String::new(),
            tags: Vec::new(),
        }
    }

    pub fn with_abstract(mut self, text: impl Into<String>) -> Self {
        self.abstract_text = text.into();
        self
    }

    pub fn with_tags<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.tags = tags.into_iter().map(Into::into).collect();
        self
    }
}

/// What kind of term a term string is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    Unigram,
    Bigram,
    Tag,
}

pub fn term_kind(term: &str) -> TermKind {
    if term.starts_with(TAG_PREFIX) {
        TermKind::Tag
    } else if term.contains(BIGRAM_SEP) {
        TermKind::Bigram
    } else {
        TermKind::Unigram
    }
}

/// Human-readable form of a term: tag prefix stripped, bigram separators and
/// tag hyphens shown as spaces.
pub fn display_term(term: &str) -> String {
    match term.strip_prefix(TAG_PREFIX) {
        Some(tag) => tag.replace('-', " "),
        None => term.replace(BIGRAM_SEP, " "),
    }
}

fn normalize_tag(tag: &str) -> String {
    tag.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// The set of terms present in a document.
///
/// Unigrams are lowercased alphanumeric runs of title then abstract, minus
/// single characters and stopwords. A bigram is formed from two kept tokens
/// that are adjacent in the raw token stream; a dropped token breaks adjacency.
pub fn tokenize(doc: &Document) -> BTreeSet<String> {
    let mut terms = BTreeSet::new();
    let mut prev: Option<String> = None;
    let raw_tokens = doc
        .title
        .split(|c: char| !c.is_alphanumeric())
        .chain(doc.abstract_text.split(|c: char| !c.is_alphanumeric()))
        .filter(|s| !s.is_empty());
    for raw in raw_tokens {
        let token = raw.to_lowercase();
        if token.chars().count() < 2 || is_stopword(&token) {
            prev = None;
            continue;
        }
        if let Some(p) = prev.take() {
            terms.insert(format!("{p}{BIGRAM_SEP}{token}"));
        }
        terms.insert(token.clone());
        prev = Some(token);
    }
    for tag in &doc.tags {
        let tag = normalize_tag(tag);
        if !tag.is_empty() {
            terms.insert(format!("{TAG_PREFIX}{tag}"));
        }
    }
    terms
}

/// Document counts for a pair of terms within one collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermStats {
    /// Documents in the collection.
    pub n_docs: u64,
    /// Documents containing s.
    pub n_s: u64,
    /// Documents containing t.
    pub n_t: u64,
    /// Documents containing both.
    pub n_st: u64,
}

impl TermStats {
    pub fn new(n_docs: u64, n_s: u64, n_t: u64, n_st: u64) -> Result<Self> {
        let stats = TermStats {
            n_docs,
            n_s,
            n_t,
            n_st,
        };
        if stats.is_valid() {
            Ok(stats)
        } else {
            Err(Error::Domain(format!("inconsistent pair counts {stats:?}")))
        }
    }

    pub fn is_valid(&self) -> bool {
        self.n_st <= self.n_s.min(self.n_t)
            && self.n_s.max(self.n_t) <= self.n_docs
            && self.n_s + self.n_t <= self.n_docs + self.n_st
    }

    pub fn swapped(self) -> Self {
        TermStats {
            n_s: self.n_t,
            n_t: self.n_s,
            ..self
        }
    }

    /// Cell counts in the order (s∧t, s∧¬t, ¬s∧t, ¬s∧¬t).
    pub fn cells(&self) -> [u64; 4] {
        [
            self.n_st,
            self.n_s - self.n_st,
            self.n_t - self.n_st,
            self.n_docs + self.n_st - self.n_s - self.n_t,
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    docs: Vec<Document>,
    term_index: BTreeMap<String, Vec<usize>>,
}

impl Corpus {
    /// Builds a corpus from documents in order. Ids must be nonempty and unique.
    pub fn ingest<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = Document>,
    {
        let mut corpus = Corpus::default();
        let mut seen = HashSet::new();
        for doc in records {
            if doc.id.is_empty() {
                return Err(Error::MalformedRecord {
                    line: corpus.docs.len() + 1,
                    message: "empty id".into(),
                });
            }
            if !seen.insert(doc.id.clone()) {
                return Err(Error::DuplicateId(doc.id));
            }
            corpus.push(doc);
        }
        Ok(corpus)
    }

    fn push(&mut self, doc: Document) {
        let pos = self.docs.len();
        for term in tokenize(&doc) {
            self.term_index.entry(term).or_default().push(pos);
        }
        self.docs.push(doc);
    }

    /// Reads one JSON object per line. Blank lines are skipped.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut corpus = Corpus::default();
        let mut seen = HashSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document =
                serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if doc.id.is_empty() {
                return Err(Error::MalformedRecord {
                    line: line_no,
                    message: "empty id".into(),
                });
            }
            if !seen.insert(doc.id.clone()) {
                return Err(Error::DuplicateId(doc.id));
            }
            corpus.push(doc);
        }
        Ok(corpus)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(Error::at(path))?;
        Corpus::read_jsonl(BufReader::new(file))
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for doc in &self.docs {
            serde_json::to_writer(&mut writer, doc).map_err(std::io::Error::from)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(Error::at(path))?;
        let mut w = BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn term_index(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.term_index
    }

    /// Sorted positions of the documents containing `term`; empty if unknown.
    pub fn postings(&self, term: &str) -> &[usize] {
        self.term_index.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn contains_term(&self, term: &str) -> bool {
        self.term_index.contains_key(term)
    }

    /// Pair counts by intersecting postings. Unknown terms count as zero.
    pub fn pair_stats(&self, s: &str, t: &str) -> TermStats {
        let ps = self.postings(s);
        let pt = self.postings(t);
        TermStats {
            n_docs: self.docs.len() as u64,
            n_s: ps.len() as u64,
            n_t: pt.len() as u64,
            n_st: intersection_size(ps, pt) as u64,
        }
    }
}

/// Size of the intersection of two ascending slices.
pub(crate) fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Document frequencies of a collection, either computed from a corpus or
/// read from a precomputed statistics file (`N=<n>` then `<term>\t<count>`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocFrequencies {
    pub n_docs: u64,
    pub counts: BTreeMap<String, u64>,
}

impl DocFrequencies {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        DocFrequencies {
            n_docs: corpus.doc_count() as u64,
            counts: corpus
                .term_index()
                .iter()
                .map(|(t, docs)| (t.clone(), docs.len() as u64))
                .collect(),
        }
    }

    pub fn count(&self, term: &str) -> u64 {
        self.counts.get(term).copied().unwrap_or(0)
    }

    pub fn read_stats<R: BufRead>(reader: R) -> Result<Self> {
        const WHAT: &str = "statistics file";
        let mut lines = reader.lines().enumerate();
        let n_docs = loop {
            match lines.next() {
                None => return Err(Error::parse(WHAT, 1, "missing N=<integer> header")),
                Some((idx, line)) => {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let value = line
                        .trim()
                        .strip_prefix("N=")
                        .ok_or_else(|| Error::parse(WHAT, idx + 1, "expected N=<integer>"))?;
                    break value
                        .parse::<u64>()
                        .map_err(|e| Error::parse(WHAT, idx + 1, e.to_string()))?;
                }
            }
        };
        let mut counts = BTreeMap::new();
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (term, count) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::parse(WHAT, idx + 1, "expected <term>\\t<count>"))?;
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|e: std::num::ParseIntError| Error::parse(WHAT, idx + 1, e.to_string()))?;
            if count > n_docs {
                return Err(Error::parse(
                    WHAT,
                    idx + 1,
                    format!("count {count} exceeds N={n_docs}"),
                ));
            }
            counts.insert(term.to_string(), count);
        }
        Ok(DocFrequencies { n_docs, counts })
    }

    pub fn write_stats<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "N={}", self.n_docs)?;
        for (term, count) in &self.counts {
            writeln!(w, "{term}\t{count}")?;
        }
        Ok(())
    }

    /// Loads a background collection: a statistics file when the first
    /// nonblank line starts with `N=`, otherwise a JSONL corpus.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(Error::at(path))?;
        let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        if first.trim_start().starts_with("N=") {
            DocFrequencies::read_stats(text.as_bytes())
        } else {
            Ok(DocFrequencies::from_corpus(&Corpus::read_jsonl(text.as_bytes())?))
        }
    }
}
