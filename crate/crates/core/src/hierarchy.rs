//! Clusters collected across level snapshots, their parent map, and the
//! ranked terms, documents and names that turn them into topics.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::SigmaMatrix;
use crate::corpus::{display_term, term_kind, Corpus, TermKind};
use crate::engine::LevelSnapshot;
use crate::textfmt::FORMAT_VERSION;
use crate::{Error, Result};

/// Ranked terms considered when naming a topic.
pub const NAME_WINDOW: usize = 20;

/// One cluster of C̄.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRecord {
    /// 1-based, in scan order (level, then smallest member).
    pub id: usize,
    pub level: usize,
    /// Factor of the level the cluster first appeared at.
    pub factor: f64,
    /// Sorted term indices.
    pub members: Vec<usize>,
    /// Within-cluster pair sum at its level.
    pub score: f64,
    /// Nearest kept ancestor; `id` itself for roots.
    pub parent_id: usize,
}

impl ClusterRecord {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn is_root(&self) -> bool {
        self.parent_id == self.id
    }
}

/// The collected clusters of a multi-level run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterHierarchy {
    pub records: Vec<ClusterRecord>,
    /// Number of levels K.
    pub levels: usize,
    /// Number of clustered terms N.
    pub order: usize,
    pub dropped_singletons: usize,
    /// Clusters dropped for a score ≤ 0.
    pub dropped_nonpositive: usize,
    /// Of those, clusters with a score of exactly 0.
    pub zero_score: usize,
}

impl ClusterHierarchy {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record by 1-based id.
    pub fn get(&self, id: usize) -> Option<&ClusterRecord> {
        id.checked_sub(1).and_then(|i| self.records.get(i))
    }

    pub fn children(&self, id: usize) -> impl Iterator<Item = &ClusterRecord> {
        self.records.iter().filter(move |r| r.parent_id == id && r.id != id)
    }

    /// Checks ids, nesting, parent levels and member-set uniqueness.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, r) in self.records.iter().enumerate() {
            if r.id != i + 1 {
                return Err(Error::Inconsistent(format!("cluster at position {i} has id {}", r.id)));
            }
            if r.members.len() < 2 {
                return Err(Error::Inconsistent(format!("cluster {} has fewer than 2 members", r.id)));
            }
            if r.members.windows(2).any(|w| w[0] >= w[1]) || r.members.last().is_some_and(|&m| m >= self.order) {
                return Err(Error::Inconsistent(format!("cluster {} has unsorted or out-of-range members", r.id)));
            }
            if r.level >= self.levels.max(1) {
                return Err(Error::Inconsistent(format!("cluster {} level {} ≥ K", r.id, r.level)));
            }
            if !seen.insert(r.members.as_slice()) {
                return Err(Error::Inconsistent(format!("cluster {} repeats a member set", r.id)));
            }
            if !r.is_root() {
                let p = self
                    .get(r.parent_id)
                    .ok_or_else(|| Error::Inconsistent(format!("cluster {} has unknown parent {}", r.id, r.parent_id)))?;
                if p.level >= r.level || !is_subset(&r.members, &p.members) {
                    return Err(Error::Inconsistent(format!("cluster {} is not nested in parent {}", r.id, p.id)));
                }
            }
        }
        Ok(())
    }
}

fn is_subset(small: &[usize], big: &[usize]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.any(|y| y == x))
}

/// Σ_{i<j in members} (σ₀(i,j) + factor).
pub fn cluster_sum(matrix: &SigmaMatrix, members: &[usize], factor: f64) -> f64 {
    let mut sum = 0.0;
    for (x, &i) in members.iter().enumerate() {
        for &j in &members[x + 1..] {
            sum += matrix.base(i, j) + factor;
        }
    }
    sum
}

/// Builds C̄ and L from level snapshots ordered by level.
///
/// Levels are scanned low to high and clusters within a level by smallest
/// member. A member set is kept the first time it appears, unless it is a
/// singleton or its score is ≤ 0. L(x) is the kept cluster from the highest
/// lower level that contains x; a cluster with no kept ancestor is a root.
pub fn collect_clusters(snapshots: &[LevelSnapshot], matrix: &SigmaMatrix) -> Result<ClusterHierarchy> {
    let n = matrix.order();
    let mut h = ClusterHierarchy {
        levels: snapshots.len(),
        order: n,
        ..Default::default()
    };
    for (k, snap) in snapshots.iter().enumerate() {
        if snap.level != k {
            return Err(Error::Inconsistent(format!("snapshot {k} is labeled level {}", snap.level)));
        }
        if snap.labels.len() != n {
            return Err(Error::Inconsistent(format!(
                "level {k} snapshot has {} points, matrix has {n}",
                snap.labels.len()
            )));
        }
        if k > 0 {
            let prev = &snapshots[k - 1].labels;
            for cluster in snap.clusters() {
                let first = prev[cluster[0]];
                if cluster.iter().any(|&p| prev[p] != first) {
                    return Err(Error::Inconsistent(format!(
                        "level {k} cluster containing point {} is not nested in a level {} cluster",
                        cluster[0],
                        k - 1
                    )));
                }
            }
        }
    }

    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    // kept[k][p]: id of the cluster born at level k containing point p, or 0.
    let mut kept: Vec<Vec<usize>> = Vec::with_capacity(snapshots.len());
    for (k, snap) in snapshots.iter().enumerate() {
        let mut born = vec![0usize; n];
        for members in snap.clusters() {
            if seen.contains(&members) {
                continue;
            }
            seen.insert(members.clone());
            if members.len() < 2 {
                h.dropped_singletons += 1;
                continue;
            }
            let score = cluster_sum(matrix, &members, snap.factor);
            if score <= 0.0 {
                h.dropped_nonpositive += 1;
                if score == 0.0 {
                    h.zero_score += 1;
                }
                continue;
            }
            let id = h.records.len() + 1;
            let parent_id = (0..k)
                .rev()
                .map(|lower| kept[lower][members[0]])
                .find(|&pid| pid != 0)
                .unwrap_or(id);
            for &p in &members {
                born[p] = id;
            }
            h.records.push(ClusterRecord {
                id,
                level: k,
                factor: snap.factor,
                members,
                score,
                parent_id,
            });
        }
        kept.push(born);
    }
    if h.dropped_nonpositive > 0 {
        log::info!(
            "dropped {} clusters with score <= 0 ({} exactly 0)",
            h.dropped_nonpositive,
            h.zero_score
        );
    }
    Ok(h)
}

/// Per-member score Σ_{j≠i} σ(i,j; birth factor), sorted descending with
/// ties broken by term string. Returns (member index, score).
pub fn term_scores(record: &ClusterRecord, matrix: &SigmaMatrix, terms: &[String]) -> Vec<(usize, f64)> {
    if record.members.len() < 2 {
        return Vec::new();
    }
    let mut scored: Vec<(usize, f64)> = record
        .members
        .iter()
        .map(|&i| {
            let s = record
                .members
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| matrix.base(i, j) + record.factor)
                .sum();
            (i, s)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| terms[a.0].cmp(&terms[b.0])));
    scored
}

/// Picks the raw term naming a topic: within the top [`NAME_WINDOW`] ranked
/// terms, the best tag, else the best bigram, else the best term.
pub fn topic_name_term<S: AsRef<str>>(ranked: &[S]) -> Option<&str> {
    let window = &ranked[..ranked.len().min(NAME_WINDOW)];
    let best = |kind| window.iter().map(AsRef::as_ref).find(|t| term_kind(t) == kind);
    best(TermKind::Tag)
        .or_else(|| best(TermKind::Bigram))
        .or_else(|| window.first().map(AsRef::as_ref))
}

/// Display name of a topic; see [`topic_name_term`].
pub fn topic_name<S: AsRef<str>>(ranked: &[S]) -> Option<String> {
    topic_name_term(ranked).map(display_term)
}

/// Documents scored by Σ max(term score, 0) over the cluster terms they
/// contain. Zero scores are omitted; order is descending, ties by document id;
/// at most `top` are returned.
pub fn score_documents<'c>(corpus: &'c Corpus, ranked_terms: &[(String, f64)], top: usize) -> Vec<(&'c str, f64)> {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for (term, score) in ranked_terms {
        if *score <= 0.0 {
            continue;
        }
        for &d in corpus.postings(term) {
            *acc.entry(d).or_insert(0.0) += score;
        }
    }
    let docs = corpus.docs();
    let mut ranked: Vec<(&str, f64)> = acc
        .into_iter()
        .filter(|&(_, s)| s > 0.0)
        .map(|(d, s)| (docs[d].id.as_str(), s))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(top);
    ranked
}

/// A named cluster with ranked terms and documents.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicSummary {
    pub cluster_id: usize,
    pub name: String,
    /// The member term the name was taken from.
    pub name_term: String,
    pub ranked_terms: Vec<(String, f64)>,
    pub ranked_docs: Vec<(String, f64)>,
}

impl TopicSummary {
    pub fn top_terms(&self, n: usize) -> impl Iterator<Item = &str> {
        self.ranked_terms.iter().take(n).map(|(t, _)| t.as_str())
    }
}

/// Ranks terms and documents and names every cluster, in id order.
pub fn summarize(
    hierarchy: &ClusterHierarchy,
    matrix: &SigmaMatrix,
    terms: &[String],
    corpus: &Corpus,
    top_docs: usize,
) -> Vec<TopicSummary> {
    hierarchy
        .records
        .par_iter()
        .map(|r| {
            let ranked_terms: Vec<(String, f64)> = term_scores(r, matrix, terms)
                .into_iter()
                .map(|(i, s)| (terms[i].clone(), s))
                .collect();
            let names: Vec<&str> = ranked_terms.iter().map(|(t, _)| t.as_str()).collect();
            let name_term = topic_name_term(&names).unwrap_or_default().to_string();
            let ranked_docs = score_documents(corpus, &ranked_terms, top_docs)
                .into_iter()
                .map(|(d, s)| (d.to_string(), s))
                .collect();
            TopicSummary {
                cluster_id: r.id,
                name: display_term(&name_term),
                name_term,
                ranked_terms,
                ranked_docs,
            }
        })
        .collect()
}

/// Header object on the first line of a topics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicsHeader {
    pub kind: String,
    pub version: u32,
    pub levels: usize,
    pub order: usize,
    pub seed: u64,
}

pub const TOPICS_KIND: &str = "pdc-topics";

/// One line of a topics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRecord {
    pub id: usize,
    pub level: usize,
    pub factor: f64,
    pub parent_id: usize,
    pub members: Vec<usize>,
    pub size: usize,
    pub score: f64,
    pub name: String,
    pub name_term: String,
    pub terms: Vec<(String, f64)>,
    pub docs: Vec<(String, f64)>,
}

/// Contents of a topics file: the hierarchy plus each cluster's summary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopicsFile {
    pub levels: usize,
    pub order: usize,
    pub seed: u64,
    pub topics: Vec<TopicRecord>,
}

impl TopicsFile {
    pub fn new(hierarchy: &ClusterHierarchy, summaries: &[TopicSummary], seed: u64) -> Result<Self> {
        if hierarchy.len() != summaries.len() {
            return Err(Error::Inconsistent(format!(
                "{} clusters but {} summaries",
                hierarchy.len(),
                summaries.len()
            )));
        }
        let topics = hierarchy
            .records
            .iter()
            .zip(summaries)
            .map(|(r, s)| {
                if r.id != s.cluster_id {
                    return Err(Error::Inconsistent(format!("summary {} paired with cluster {}", s.cluster_id, r.id)));
                }
                Ok(TopicRecord {
                    id: r.id,
                    level: r.level,
                    factor: r.factor,
                    parent_id: r.parent_id,
                    members: r.members.clone(),
                    size: r.size(),
                    score: r.score,
                    name: s.name.clone(),
                    name_term: s.name_term.clone(),
                    terms: s.ranked_terms.clone(),
                    docs: s.ranked_docs.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(TopicsFile {
            levels: hierarchy.levels,
            order: hierarchy.order,
            seed,
            topics,
        })
    }

    pub fn hierarchy(&self) -> ClusterHierarchy {
        ClusterHierarchy {
            records: self
                .topics
                .iter()
                .map(|t| ClusterRecord {
                    id: t.id,
                    level: t.level,
                    factor: t.factor,
                    members: t.members.clone(),
                    score: t.score,
                    parent_id: t.parent_id,
                })
                .collect(),
            levels: self.levels,
            order: self.order,
            ..Default::default()
        }
    }

    pub fn summaries(&self) -> Vec<TopicSummary> {
        self.topics
            .iter()
            .map(|t| TopicSummary {
                cluster_id: t.id,
                name: t.name.clone(),
                name_term: t.name_term.clone(),
                ranked_terms: t.terms.clone(),
                ranked_docs: t.docs.clone(),
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = TopicsHeader {
            kind: TOPICS_KIND.to_string(),
            version: FORMAT_VERSION,
            levels: self.levels,
            order: self.order,
            seed: self.seed,
        };
        serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
        writeln!(w)?;
        for t in &self.topics {
            serde_json::to_writer(&mut w, t).map_err(std::io::Error::from)?;
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads a topics file. An empty file is a valid file with no topics.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        const WHAT: &str = "topics file";
        let mut lines = reader.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
        let Some((_, first)) = lines.next() else {
            return Ok(TopicsFile::default());
        };
        let header: TopicsHeader =
            serde_json::from_str(&first?).map_err(|e| Error::parse(WHAT, 1, format!("bad header: {e}")))?;
        if header.kind != TOPICS_KIND {
            return Err(Error::Incompatible {
                what: WHAT.into(),
                message: format!("kind {:?}, expected {TOPICS_KIND:?}", header.kind),
            });
        }
        if header.version != FORMAT_VERSION {
            return Err(Error::Incompatible {
                what: WHAT.into(),
                message: format!("version {}, expected {FORMAT_VERSION}", header.version),
            });
        }
        let mut topics = Vec::new();
        for (idx, line) in lines {
            let t: TopicRecord =
                serde_json::from_str(&line?).map_err(|e| Error::parse(WHAT, idx + 1, e.to_string()))?;
            topics.push(t);
        }
        let file = TopicsFile {
            levels: header.levels,
            order: header.order,
            seed: header.seed,
            topics,
        };
        file.hierarchy().validate()?;
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(Error::at(path))?);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        TopicsFile::read_jsonl(BufReader::new(File::open(path).map_err(Error::at(path))?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn snap(level: usize, factor: f64, labels: &[usize]) -> LevelSnapshot {
        LevelSnapshot {
            level,
            factor,
            objective: 0.0,
            labels: labels.to_vec(),
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i:02}")).collect()
    }

    #[test]
    fn single_snapshot_roots() {
        let m = SigmaMatrix::from_fn(5, |i, j| if (i < 3) == (j < 3) { 1.0 } else { -1.0 });
        let h = collect_clusters(&[snap(0, 0.0, &[0, 0, 0, 3, 3])], &m).unwrap();
        assert_eq!(h.len(), 2);
        assert!(h.records.iter().all(ClusterRecord::is_root));
        assert_eq!(h.records[0].members, vec![0, 1, 2]);
        assert_eq!(h.records[0].score, 3.0);
        h.validate().unwrap();
    }

    #[test]
    fn repeated_cluster_recorded_once() {
        let m = SigmaMatrix::from_fn(4, |_, _| 2.0);
        let snaps = [snap(0, 0.0, &[0, 0, 0, 0]), snap(1, -0.5, &[0, 0, 0, 0])];
        let h = collect_clusters(&snaps, &m).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.records[0].level, 0);
    }

    #[test]
    fn two_level_parent_map() {
        let m = SigmaMatrix::from_fn(4, |i, j| if i / 2 == j / 2 { 3.0 } else { 1.0 });
        let snaps = [snap(0, 0.0, &[0, 0, 0, 0]), snap(1, -2.0, &[0, 0, 2, 2])];
        let h = collect_clusters(&snaps, &m).unwrap();
        assert_eq!(h.len(), 3);
        assert_eq!(h.records[1].parent_id, 1);
        assert_eq!(h.records[2].parent_id, 1);
        assert_eq!(h.records[1].score, 1.0);
        assert_eq!(h.levels, 2);
        h.validate().unwrap();
    }

    #[test]
    fn drops_singletons_and_nonpositive() {
        let m = SigmaMatrix::from_fn(4, |i, j| if i + j == 1 { -1.0 } else { 1.0 });
        let h = collect_clusters(&[snap(0, 0.0, &[0, 0, 2, 3])], &m).unwrap();
        assert!(h.is_empty());
        assert_eq!(h.dropped_singletons, 2);
        assert_eq!(h.dropped_nonpositive, 1);
    }

    #[test]
    fn refinement_violation_is_an_error() {
        let m = SigmaMatrix::from_fn(4, |_, _| 1.0);
        let snaps = [snap(0, 0.0, &[0, 0, 2, 2]), snap(1, -0.5, &[0, 1, 1, 3])];
        assert!(matches!(collect_clusters(&snaps, &m), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn term_score_examples() {
        let m = SigmaMatrix::from_fn(3, |_, _| 1.0);
        let t = names(3);
        let r = ClusterRecord { id: 1, level: 0, factor: 0.0, members: vec![0, 1, 2], score: 3.0, parent_id: 1 };
        let scores = term_scores(&r, &m, &t);
        assert!(scores.iter().all(|&(_, s)| s == 2.0));
        assert_eq!(scores.iter().map(|s| s.0).collect::<Vec<_>>(), vec![0, 1, 2]);
        let total: f64 = scores.iter().map(|s| s.1).sum();
        assert!((total - 2.0 * r.score).abs() < 1e-9);

        let pair = ClusterRecord { members: vec![0, 2], ..r.clone() };
        let s = term_scores(&pair, &m, &t);
        assert_eq!(s[0].1, s[1].1);
        let single = ClusterRecord { members: vec![1], ..r };
        assert!(term_scores(&single, &m, &t).is_empty());
    }

    #[test]
    fn naming_rules() {
        assert_eq!(
            topic_name(&["suicide", "physician", "tag:euthanasia", "tag:assisted-suicide"]).unwrap(),
            "euthanasia"
        );
        assert_eq!(topic_name(&["tag:assisted-suicide", "tag:euthanasia"]).unwrap(), "assisted suicide");
        assert_eq!(topic_name(&["media", "mass\u{2581}media", "news"]).unwrap(), "mass media");
        assert_eq!(topic_name(&["media", "news"]).unwrap(), "media");
        let mut long: Vec<String> = (0..25).map(|i| format!("w{i}")).collect();
        long.push("tag:late".into());
        assert_eq!(topic_name(&long).unwrap(), "w0");
        assert!(topic_name::<&str>(&[]).is_none());
    }

    #[test]
    fn document_scoring() {
        let c = Corpus::ingest(vec![
            Document::new("d1", "alpha beta"),
            Document::new("d2", "alpha"),
            Document::new("d3", "gamma"),
        ])
        .unwrap();
        let ranked = vec![("alpha".to_string(), 2.0), ("beta".to_string(), 1.0), ("gamma".to_string(), -1.0)];
        let docs = score_documents(&c, &ranked, 100);
        assert_eq!(docs, vec![("d1", 3.0), ("d2", 2.0)]);
        assert_eq!(score_documents(&c, &ranked, 1), vec![("d1", 3.0)]);
    }

    #[test]
    fn topics_file_round_trip() {
        let m = SigmaMatrix::from_fn(4, |i, j| if i / 2 == j / 2 { 3.0 } else { 1.0 });
        let snaps = [snap(0, 0.0, &[0, 0, 0, 0]), snap(1, -2.0, &[0, 0, 2, 2])];
        let h = collect_clusters(&snaps, &m).unwrap();
        let c = Corpus::default();
        let s = summarize(&h, &m, &names(4), &c, 10);
        let f = TopicsFile::new(&h, &s, 9).unwrap();
        let mut buf = Vec::new();
        f.write_jsonl(&mut buf).unwrap();
        assert!(buf.starts_with(br#"{"kind":"pdc-topics","version":1,"levels":2,"order":4,"seed":9}"#));
        let back = TopicsFile::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.hierarchy().records, h.records);

        assert_eq!(TopicsFile::read_jsonl(&b""[..]).unwrap(), TopicsFile::default());
        let bad = String::from_utf8(buf).unwrap().replace("\"version\":1", "\"version\":7");
        assert!(matches!(TopicsFile::read_jsonl(bad.as_bytes()), Err(Error::Incompatible { .. })));
    }
}
