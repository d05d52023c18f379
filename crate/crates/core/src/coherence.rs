//! UMass and NPMI topic coherence over a reference corpus.
//!
//! Both measures are sums over pairs of a topic's top-n terms, using document
//! frequencies D(w) and co-document frequencies D(w, v) in the reference:
//!
//! ```text
//! umass = Σ_{m=2..n} Σ_{l<m} ln((D(w_m, w_l) + 1) / D(w_l))
//! npmi  = Σ_{i<j} ln(p_ij / (p_i p_j)) / −ln p_ij,   p = D / |ref|
//! ```

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;

use crate::corpus::{intersection_size, Corpus};
use crate::hierarchy::TopicSummary;
use crate::textfmt;
use crate::{Error, Result};

/// Added inside the NPMI logarithms when a pair never co-occurs.
pub const NPMI_EPSILON: f64 = 1e-12;
/// Top terms per topic used for the document-frequency statistics.
pub const DF_TOP: usize = 20;

/// NPMI of one pair from reference counts. A pair present in every document
/// scores 1. Returns `None` when either term is absent from the reference.
pub fn npmi_pair(n_docs: usize, d_i: usize, d_j: usize, d_ij: usize) -> Option<f64> {
    if d_i == 0 || d_j == 0 || n_docs == 0 {
        return None;
    }
    let n = n_docs as f64;
    let (p_i, p_j) = (d_i as f64 / n, d_j as f64 / n);
    let mut p_ij = d_ij as f64 / n;
    if d_ij == 0 {
        p_ij += NPMI_EPSILON;
    }
    if d_ij == n_docs {
        return Some(1.0);
    }
    let v = (p_ij.ln() - p_i.ln() - p_j.ln()) / -p_ij.ln();
    Some(v.clamp(-1.0, 1.0))
}

/// Sum and pair count of a coherence measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSum {
    pub sum: f64,
    pub pairs: usize,
    pub skipped: usize,
}

impl PairSum {
    pub fn mean(&self) -> Option<f64> {
        (self.pairs > 0).then(|| self.sum / self.pairs as f64)
    }
}

struct TermCounts<'c> {
    postings: Vec<&'c [usize]>,
}

impl<'c> TermCounts<'c> {
    fn new<S: AsRef<str>>(terms: &[S], reference: &'c Corpus, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("coherence needs n ≥ 2, got {n}")));
        }
        if n > terms.len() {
            return Err(Error::Domain(format!("n = {n} exceeds the {} ranked terms", terms.len())));
        }
        Ok(TermCounts {
            postings: terms[..n].iter().map(|t| reference.postings(t.as_ref())).collect(),
        })
    }

    fn d(&self, i: usize) -> usize {
        self.postings[i].len()
    }

    fn d2(&self, i: usize, j: usize) -> usize {
        intersection_size(self.postings[i], self.postings[j])
    }
}

/// UMass over the first `n` of `top_terms`, later terms conditioned on
/// earlier ones. Pairs whose conditioning term is absent are skipped.
pub fn umass_detail<S: AsRef<str>>(top_terms: &[S], reference: &Corpus, n: usize) -> Result<PairSum> {
    let c = TermCounts::new(top_terms, reference, n)?;
    let mut out = PairSum { sum: 0.0, pairs: 0, skipped: 0 };
    for m in 1..n {
        for l in 0..m {
            let d_l = c.d(l);
            if d_l == 0 {
                out.skipped += 1;
                continue;
            }
            out.sum += ((c.d2(m, l) + 1) as f64 / d_l as f64).ln();
            out.pairs += 1;
        }
    }
    if out.skipped > 0 {
        log::warn!("umass: skipped {} pairs with an absent conditioning term", out.skipped);
    }
    Ok(out)
}

pub fn umass<S: AsRef<str>>(top_terms: &[S], reference: &Corpus, n: usize) -> Result<f64> {
    umass_detail(top_terms, reference, n).map(|p| p.sum)
}

/// NPMI over unordered pairs of the first `n` of `top_terms`. Pairs with a
/// term absent from the reference are skipped.
pub fn npmi_detail<S: AsRef<str>>(top_terms: &[S], reference: &Corpus, n: usize) -> Result<PairSum> {
    let c = TermCounts::new(top_terms, reference, n)?;
    let docs = reference.doc_count();
    let mut out = PairSum { sum: 0.0, pairs: 0, skipped: 0 };
    for i in 0..n {
        for j in i + 1..n {
            match npmi_pair(docs, c.d(i), c.d(j), c.d2(i, j)) {
                Some(v) => {
                    out.sum += v;
                    out.pairs += 1;
                }
                None => out.skipped += 1,
            }
        }
    }
    if out.skipped > 0 {
        log::warn!("npmi: skipped {} pairs with a term absent from the reference", out.skipped);
    }
    Ok(out)
}

pub fn npmi<S: AsRef<str>>(top_terms: &[S], reference: &Corpus, n: usize) -> Result<f64> {
    npmi_detail(top_terms, reference, n).map(|p| p.sum)
}

/// Scores of one topic at one requested n.
#[derive(Debug, Clone, PartialEq)]
pub struct NScore {
    pub n: usize,
    /// n actually used: min(n, ranked terms).
    pub n_used: usize,
    pub umass: PairSum,
    pub npmi: PairSum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicCoherence {
    pub cluster_id: usize,
    pub name: String,
    pub n_terms: usize,
    /// Fewer ranked terms than the largest requested n.
    pub short: bool,
    pub scores: Vec<NScore>,
}

/// Mean and sum over topics for one n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub n: usize,
    pub topics: usize,
    pub umass_mean: f64,
    pub npmi_mean: f64,
    pub umass_sum: f64,
    pub npmi_sum: f64,
}

/// Document frequencies of the top terms across all topics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfStats {
    pub unique_tokens: usize,
    /// Mean reference document frequency over the unique tokens.
    pub mean_df: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    pub n_values: Vec<usize>,
    pub reference_docs: usize,
    pub per_topic: Vec<TopicCoherence>,
    /// One entry per n; `None` when no topic could be scored at that n.
    pub aggregate: Vec<Option<Aggregate>>,
    pub df: Option<DfStats>,
}

/// Scores every topic at each n in `n_values`. Topics with fewer ranked terms
/// than some n are scored on all their terms and flagged short.
pub fn evaluate(topics: &[TopicSummary], reference: &Corpus, n_values: &[usize]) -> Result<CoherenceReport> {
    let n_values: Vec<usize> = n_values.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if let Some(&bad) = n_values.iter().find(|&&n| n < 2) {
        return Err(Error::Domain(format!("coherence needs n ≥ 2, got {bad}")));
    }
    let max_n = n_values.last().copied().unwrap_or(0);
    let per_topic: Vec<TopicCoherence> = topics
        .par_iter()
        .map(|t| {
            let terms: Vec<&str> = t.ranked_terms.iter().map(|(s, _)| s.as_str()).collect();
            let mut scores = Vec::new();
            for &n in &n_values {
                let n_used = n.min(terms.len());
                if n_used < 2 {
                    continue;
                }
                scores.push(NScore {
                    n,
                    n_used,
                    umass: umass_detail(&terms, reference, n_used)?,
                    npmi: npmi_detail(&terms, reference, n_used)?,
                });
            }
            Ok(TopicCoherence {
                cluster_id: t.cluster_id,
                name: t.name.clone(),
                n_terms: terms.len(),
                short: terms.len() < max_n,
                scores,
            })
        })
        .collect::<Result<_>>()?;

    let aggregate = n_values
        .iter()
        .map(|&n| {
            let rows: Vec<&NScore> = per_topic.iter().flat_map(|t| t.scores.iter().filter(move |s| s.n == n)).collect();
            if rows.is_empty() {
                return None;
            }
            let k = rows.len() as f64;
            let umass_sum: f64 = rows.iter().map(|s| s.umass.sum).sum();
            let npmi_sum: f64 = rows.iter().map(|s| s.npmi.sum).sum();
            Some(Aggregate {
                n,
                topics: rows.len(),
                umass_mean: umass_sum / k,
                npmi_mean: npmi_sum / k,
                umass_sum,
                npmi_sum,
            })
        })
        .collect();

    let unique: BTreeSet<&str> = topics.iter().flat_map(|t| t.top_terms(DF_TOP)).collect();
    let df = (!unique.is_empty()).then(|| DfStats {
        unique_tokens: unique.len(),
        mean_df: unique.iter().map(|t| reference.doc_freq(t) as f64).sum::<f64>() / unique.len() as f64,
    });

    Ok(CoherenceReport {
        n_values,
        reference_docs: reference.doc_count(),
        per_topic,
        aggregate,
        df,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl CoherenceReport {
    /// Tab-separated table: one row per topic, columns per measure and n, then
    /// `mean` and `sum` aggregate rows. Missing values are `NA`.
    pub fn write_tsv<W: Write>(&self, mut w: W, seed: u64) -> Result<()> {
        let mut fields = vec![
            ("topics", self.per_topic.len().to_string()),
            ("reference_docs", self.reference_docs.to_string()),
            ("seed", seed.to_string()),
        ];
        if let Some(df) = self.df {
            fields.push(("unique_tokens", df.unique_tokens.to_string()));
            fields.push(("mean_df", df.mean_df.to_string()));
        }
        writeln!(w, "{}", textfmt::header_line("coherence", &fields))?;

        let mut cols = vec!["id".to_string(), "name".into(), "terms".into(), "short".into()];
        for n in &self.n_values {
            for c in ["umass", "npmi", "umass_mean", "npmi_mean"] {
                cols.push(format!("{c}@{n}"));
            }
        }
        writeln!(w, "{}", cols.join("\t"))?;

        for t in &self.per_topic {
            let mut row = vec![
                t.cluster_id.to_string(),
                t.name.replace(['\t', '\n'], " "),
                t.n_terms.to_string(),
                u8::from(t.short).to_string(),
            ];
            for &n in &self.n_values {
                match t.scores.iter().find(|s| s.n == n) {
                    Some(s) => row.extend([
                        s.umass.sum.to_string(),
                        s.npmi.sum.to_string(),
                        opt(s.umass.mean()),
                        opt(s.npmi.mean()),
                    ]),
                    None => row.extend(std::iter::repeat_n("NA".to_string(), 4)),
                }
            }
            writeln!(w, "{}", row.join("\t"))?;
        }

        for (label, pick) in [("mean", true), ("sum", false)] {
            let mut row = vec![label.to_string(), String::new(), String::new(), String::new()];
            for a in &self.aggregate {
                match a {
                    Some(a) if pick => {
                        row.extend([a.umass_mean.to_string(), a.npmi_mean.to_string(), "NA".into(), "NA".into()])
                    }
                    Some(a) => row.extend([a.umass_sum.to_string(), a.npmi_sum.to_string(), "NA".into(), "NA".into()]),
                    None => row.extend(std::iter::repeat_n("NA".to_string(), 4)),
                }
            }
            writeln!(w, "{}", row.join("\t"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn corpus(docs: &[&str]) -> Corpus {
        Corpus::ingest(docs.iter().enumerate().map(|(i, t)| Document::new(format!("d{i}"), *t))).unwrap()
    }

    fn topic(id: usize, terms: &[&str]) -> TopicSummary {
        TopicSummary {
            cluster_id: id,
            name: terms[0].to_string(),
            name_term: terms[0].to_string(),
            ranked_terms: terms.iter().map(|t| (t.to_string(), 1.0)).collect(),
            ranked_docs: Vec::new(),
        }
    }

    #[test]
    fn umass_hand_values() {
        let c = corpus(&["aa bb", "aa bb", "aa", "cc"]);
        assert_eq!(umass(&["aa", "bb"], &c, 2).unwrap(), 0.0);
        let c = corpus(&["aa bb", "aa", "aa", "bb"]);
        assert!((umass(&["aa", "bb"], &c, 2).unwrap() - (2.0f64 / 3.0).ln()).abs() < 1e-12);
        let c = corpus(&["aa", "bb", "cc"]);
        assert_eq!(umass(&["aa", "bb"], &c, 2).unwrap(), 0.0);
    }

    #[test]
    fn npmi_hand_values() {
        let c = corpus(&["aa bb", "aa bb", "cc", "dd"]);
        assert_eq!(npmi(&["aa", "bb"], &c, 2).unwrap(), 1.0);
        let c = corpus(&["aa bb", "aa", "bb", "cc"]);
        assert_eq!(npmi(&["aa", "bb"], &c, 2).unwrap(), 0.0);
        assert_eq!(npmi_pair(4, 4, 4, 4), Some(1.0));
        assert!(npmi_pair(10, 3, 3, 0).unwrap() >= -1.0);
    }

    #[test]
    fn n_below_two_is_a_domain_error() {
        let c = corpus(&["aa"]);
        assert!(matches!(umass(&["aa"], &c, 1), Err(Error::Domain(_))));
        assert!(matches!(npmi(&["aa", "bb"], &c, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn absent_conditioning_term_is_skipped() {
        let c = corpus(&["bb"]);
        let d = umass_detail(&["zz", "bb"], &c, 2).unwrap();
        assert_eq!((d.pairs, d.skipped, d.sum), (0, 1, 0.0));
    }

    #[test]
    fn evaluate_examples() {
        let c = corpus(&["aa bb", "aa bb", "cc", "dd"]);
        let empty = evaluate(&[], &c, &[2]).unwrap();
        assert!(empty.per_topic.is_empty() && empty.aggregate == vec![None] && empty.df.is_none());

        let r = evaluate(&[topic(1, &["aa", "bb"])], &c, &[2]).unwrap();
        assert_eq!(r.aggregate[0].unwrap().npmi_mean, 1.0);

        let twins = [topic(1, &["aa", "bb", "cc"]), topic(2, &["aa", "bb", "cc"])];
        let r = evaluate(&twins, &c, &[2, 3, 5]).unwrap();
        let one = evaluate(&twins[..1], &c, &[2, 3, 5]).unwrap();
        assert_eq!(r.aggregate[1].unwrap().umass_mean, one.aggregate[1].unwrap().umass_mean);
        assert!(r.per_topic[0].short);
        assert_eq!(r.per_topic[0].scores[2].n_used, 3);
        assert_eq!(r.df.unwrap().unique_tokens, 3);
        assert!((r.df.unwrap().mean_df - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn table_layout() {
        let c = corpus(&["aa bb", "aa bb", "cc", "dd"]);
        let r = evaluate(&[topic(7, &["aa", "bb"])], &c, &[2]).unwrap();
        let mut buf = Vec::new();
        r.write_tsv(&mut buf, 0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# pdc-coherence version=1 topics=1"));
        assert_eq!(lines[1], "id\tname\tterms\tshort\tumass@2\tnpmi@2\tumass_mean@2\tnpmi_mean@2");
        assert!(lines[2].starts_with("7\taa\t2\t0\t"));
        assert!(lines[3].starts_with("mean\t"));
        assert!(lines[4].starts_with("sum\t"));
    }
}
