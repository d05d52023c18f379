//! Selection of the analysis vocabulary: terms over-represented in the
//! foreground collection relative to its background, by a one-sided
//! hypergeometric test with Benjamini–Hochberg control, then capped by
//! foreground frequency.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::corpus::{Corpus, DocFrequencies};
use crate::textfmt;
use crate::{Error, Result};

/// Populations up to this size are evaluated with exact integer binomials.
pub const EXACT_POP_LIMIT: u64 = 60;

/// P(X ≥ observed) for X ~ Hypergeometric(pop, successes, draws).
pub fn hypergeom_tail(pop: u64, successes: u64, draws: u64, observed: u64) -> Result<f64> {
    if successes > pop || draws > pop {
        return Err(Error::Domain(format!(
            "hypergeometric arguments out of range: pop={pop} successes={successes} draws={draws}"
        )));
    }
    let lo = (draws + successes).saturating_sub(pop);
    let hi = draws.min(successes);
    if observed > hi || observed < lo {
        return Err(Error::Domain(format!(
            "observed {observed} outside support [{lo}, {hi}]"
        )));
    }
    if observed == lo {
        return Ok(1.0);
    }
    if pop <= EXACT_POP_LIMIT {
        return Ok(exact_tail(pop, successes, draws, observed));
    }
    Ok(log_space_tail(pop, successes, draws, observed, lo, hi))
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn exact_tail(pop: u64, successes: u64, draws: u64, observed: u64) -> f64 {
    let hi = draws.min(successes);
    let numerator: u128 = (observed..=hi)
        .map(|x| binomial(successes, x) * binomial(pop - successes, draws - x))
        .sum();
    numerator as f64 / binomial(pop, draws) as f64
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn log_space_tail(pop: u64, successes: u64, draws: u64, observed: u64, lo: u64, hi: u64) -> f64 {
    let ln_pmf = |x: u64| {
        ln_choose(successes, x) + ln_choose(pop - successes, draws - x) - ln_choose(pop, draws)
    };
    // pmf(x + 1) / pmf(x)
    let ratio = |x: u64| {
        ((successes - x) as f64 * (draws - x) as f64)
            / ((x + 1) as f64 * (pop - successes - draws + x + 1) as f64)
    };
    let mean = draws as f64 * successes as f64 / pop as f64;
    if observed as f64 > mean {
        let mut term = ln_pmf(observed).exp();
        let mut sum = term;
        for x in observed..hi {
            term *= ratio(x);
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
        }
        sum.min(1.0)
    } else {
        // Upper tail holds most of the mass here; sum the short lower tail instead.
        let mut x = observed - 1;
        let mut term = ln_pmf(x).exp();
        let mut sum = term;
        while x > lo {
            term /= ratio(x - 1);
            x -= 1;
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
        }
        (1.0 - sum).clamp(0.0, 1.0)
    }
}

/// Step-up Benjamini–Hochberg. Returns the selected indices in ascending order.
///
/// Finds the largest rank k with p₍ₖ₎ ≤ k·fdr/m and selects every item whose
/// p-value is at most p₍ₖ₎, so ties at the threshold are all kept.
pub fn benjamini_hochberg(p_values: &[f64], fdr: f64) -> Vec<usize> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let cutoff_rank = (1..=m)
        .rev()
        .find(|&k| p_values[order[k - 1]] <= k as f64 * fdr / m as f64);
    let Some(k) = cutoff_rank else {
        return Vec::new();
    };
    let threshold = p_values[order[k - 1]];
    (0..m).filter(|&i| p_values[i] <= threshold).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrichmentRecord {
    pub term: String,
    pub k_fg: u64,
    pub n_bg: u64,
    pub p_value: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermEntry {
    pub term: String,
    pub fg_count: u64,
    pub p_value: f64,
}

/// The ordered analysis vocabulary. Position in the list is the matrix index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermSet {
    entries: Vec<TermEntry>,
}

impl TermSet {
    pub fn new(entries: Vec<TermEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.term.as_str()) {
                return Err(Error::Inconsistent(format!("duplicate term {:?}", e.term)));
            }
            if e.term.contains(['\t', '\n']) {
                return Err(Error::Inconsistent(format!(
                    "term {:?} contains a tab or newline",
                    e.term
                )));
            }
        }
        Ok(TermSet { entries })
    }

    /// A term set with placeholder counts, for tests and hand-built inputs.
    pub fn from_terms<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TermSet::new(
            terms
                .into_iter()
                .map(|t| TermEntry {
                    term: t.into(),
                    fg_count: 0,
                    p_value: 1.0,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TermEntry] {
        &self.entries
    }

    pub fn term(&self, index: usize) -> &str {
        &self.entries[index].term
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.term.as_str())
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "{}",
            textfmt::header_line("terms", &[("count", self.len().to_string())])
        )?;
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(w, "{i}\t{}\t{}\t{:e}", e.term, e.fg_count, e.p_value)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        const WHAT: &str = "term-set file";
        let mut entries = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if idx == 0 && textfmt::parse_header(&line, "terms")?.is_some() {
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::parse(WHAT, idx + 1, "expected 4 tab-separated fields"));
            }
            let index: usize = fields[0]
                .parse()
                .map_err(|_| Error::parse(WHAT, idx + 1, "bad index"))?;
            if index != entries.len() {
                return Err(Error::parse(
                    WHAT,
                    idx + 1,
                    format!("index {index} out of sequence, expected {}", entries.len()),
                ));
            }
            entries.push(TermEntry {
                term: fields[1].to_string(),
                fg_count: fields[2]
                    .parse()
                    .map_err(|_| Error::parse(WHAT, idx + 1, "bad foreground count"))?,
                p_value: fields[3]
                    .parse()
                    .map_err(|_| Error::parse(WHAT, idx + 1, "bad p-value"))?,
            });
        }
        TermSet::new(entries)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(Error::at(path))?);
        self.write_tsv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        TermSet::read_tsv(BufReader::new(File::open(path).map_err(Error::at(path))?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionParams {
    pub fdr: f64,
    /// Minimum foreground document frequency for a term to be tested at all.
    pub min_df: u64,
    pub freq_cap: usize,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            fdr: 0.01,
            min_df: 3,
            freq_cap: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub terms: TermSet,
    /// One record per tested candidate, in term order.
    pub records: Vec<EnrichmentRecord>,
}

/// Tests every foreground term with at least `min_df` documents for
/// over-representation against the background and keeps the BH survivors,
/// most frequent first, up to `freq_cap`.
pub fn select_terms(fg: &Corpus, bg: &DocFrequencies, params: &SelectionParams) -> Result<Selection> {
    if !(params.fdr > 0.0 && params.fdr < 1.0) {
        return Err(Error::Config(format!("fdr must lie in (0, 1), got {}", params.fdr)));
    }
    let fg_docs = fg.doc_count() as u64;
    if fg_docs > bg.n_docs {
        return Err(Error::Inconsistent(format!(
            "foreground has {fg_docs} documents but background only {}",
            bg.n_docs
        )));
    }
    let candidates: Vec<(&str, u64, u64)> = fg
        .term_index()
        .iter()
        .filter(|(_, docs)| docs.len() as u64 >= params.min_df.max(1))
        .map(|(term, docs)| (term.as_str(), docs.len() as u64, bg.count(term)))
        .collect();
    if let Some((term, k, n)) = candidates.iter().find(|(_, k, n)| k > n) {
        return Err(Error::Inconsistent(format!(
            "term {term:?} occurs in {k} foreground documents but only {n} background documents"
        )));
    }

    let p_values: Vec<f64> = candidates
        .par_iter()
        .map(|&(_, k_fg, n_bg)| hypergeom_tail(bg.n_docs, n_bg, fg_docs, k_fg))
        .collect::<Result<_>>()?;
    let selected: BTreeSet<usize> = benjamini_hochberg(&p_values, params.fdr).into_iter().collect();

    let mut survivors: Vec<usize> = selected.iter().copied().collect();
    survivors.sort_by(|&a, &b| {
        candidates[b]
            .1
            .cmp(&candidates[a].1)
            .then_with(|| candidates[a].0.cmp(candidates[b].0))
    });
    survivors.truncate(params.freq_cap);
    let kept: BTreeSet<usize> = survivors.iter().copied().collect();

    let terms = TermSet::new(
        survivors
            .iter()
            .map(|&i| TermEntry {
                term: candidates[i].0.to_string(),
                fg_count: candidates[i].1,
                p_value: p_values[i],
            })
            .collect(),
    )?;
    let records = candidates
        .iter()
        .zip(&p_values)
        .enumerate()
        .map(|(i, (&(term, k_fg, n_bg), &p_value))| EnrichmentRecord {
            term: term.to_string(),
            k_fg,
            n_bg,
            p_value,
            selected: kept.contains(&i),
        })
        .collect();
    Ok(Selection { terms, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    #[test]
    fn tail_at_zero_is_one() {
        assert_eq!(hypergeom_tail(10, 4, 5, 0).unwrap(), 1.0);
        assert_eq!(hypergeom_tail(1000, 40, 50, 0).unwrap(), 1.0);
    }

    #[test]
    fn tail_small_exact() {
        // C(4,4)C(6,1)/C(10,5) = 6/252
        let p = hypergeom_tail(10, 4, 5, 4).unwrap();
        assert!((p - 6.0 / 252.0).abs() < 1e-15);
    }

    #[test]
    fn certain_event() {
        assert_eq!(hypergeom_tail(7, 7, 3, 3).unwrap(), 1.0);
    }

    #[test]
    fn term_only_in_foreground() {
        // C(3,3)C(97,2)/C(100,5)
        let expected = 4656.0 / 75_287_520.0;
        let p = hypergeom_tail(100, 3, 5, 3).unwrap();
        assert!(((p - expected) / expected).abs() < 1e-10, "{p} vs {expected}");
    }

    #[test]
    fn tail_domain_errors() {
        assert!(hypergeom_tail(10, 11, 5, 1).is_err());
        assert!(hypergeom_tail(10, 4, 5, 5).is_err());
        // lower bound of support: 8 + 8 - 10 = 6
        assert!(hypergeom_tail(10, 8, 8, 5).is_err());
        assert_eq!(hypergeom_tail(10, 8, 8, 6).unwrap(), 1.0);
    }

    #[test]
    fn log_path_matches_both_sides() {
        // Lower-tail branch and upper-tail branch agree on complementary events.
        let (pop, k, n) = (500, 120, 80);
        let below = hypergeom_tail(pop, k, n, 15).unwrap();
        let above = hypergeom_tail(pop, k, n, 25).unwrap();
        assert!(below > 0.9 && above < 0.1);
        let total: f64 = (19..=20).map(|x| hypergeom_tail(pop, k, n, x).unwrap()).sum();
        assert!(total.is_finite());
    }

    #[test]
    fn bh_examples() {
        assert!(benjamini_hochberg(&[1.0; 6], 0.01).is_empty());
        assert_eq!(benjamini_hochberg(&[0.001, 0.008, 0.039, 0.041, 0.9], 0.05), vec![0, 1]);
        assert_eq!(benjamini_hochberg(&[0.005], 0.01), vec![0]);
        assert!(benjamini_hochberg(&[], 0.05).is_empty());
    }

    #[test]
    fn bh_keeps_ties_at_threshold() {
        let p = [0.01, 0.01, 0.01, 0.5];
        assert_eq!(benjamini_hochberg(&p, 0.05), vec![0, 1, 2]);
    }

    fn planted() -> (Corpus, DocFrequencies) {
        // "kappa" lives only in V; "common" is everywhere.
        let docs = (0..5).map(|i| {
            let title = if i < 3 { "kappa the common" } else { "common" };
            Document::new(format!("d{i}"), title)
        });
        let fg = Corpus::ingest(docs).unwrap();
        let mut bg = DocFrequencies {
            n_docs: 100,
            ..Default::default()
        };
        bg.counts.insert("kappa".into(), 3);
        bg.counts.insert("common".into(), 100);
        (fg, bg)
    }

    #[test]
    fn selects_enriched_term() {
        let (fg, bg) = planted();
        let sel = select_terms(&fg, &bg, &SelectionParams::default()).unwrap();
        assert_eq!(sel.terms.terms().collect::<Vec<_>>(), vec!["kappa"]);
        let kappa = sel.records.iter().find(|r| r.term == "kappa").unwrap();
        assert!((kappa.p_value - 4656.0 / 75_287_520.0).abs() < 1e-15);
        let common = sel.records.iter().find(|r| r.term == "common").unwrap();
        assert_eq!(common.p_value, 1.0);
        assert!(!common.selected);
    }

    #[test]
    fn inconsistent_background_names_term() {
        let (fg, mut bg) = planted();
        bg.counts.insert("kappa".into(), 2);
        let err = select_terms(&fg, &bg, &SelectionParams::default()).unwrap_err();
        assert!(err.to_string().contains("kappa"));
    }

    #[test]
    fn frequency_cap_keeps_most_frequent() {
        // Five enriched terms with foreground frequencies 7, 6, 5, 4, 3.
        let words = ["aa", "bb", "cc", "dd", "ee"];
        let docs = (0..8).map(|d| {
            let present: Vec<&str> = words
                .iter()
                .enumerate()
                .filter(|(w, _)| d < 7 - *w)
                .map(|(_, s)| *s)
                .collect();
            Document::new(format!("d{d}"), present.join(" of "))
        });
        let fg = Corpus::ingest(docs).unwrap();
        let mut bg = DocFrequencies::from_corpus(&fg);
        bg.n_docs = 10_000;
        let params = SelectionParams {
            freq_cap: 2,
            ..Default::default()
        };
        let sel = select_terms(&fg, &bg, &params).unwrap();
        assert_eq!(sel.terms.terms().collect::<Vec<_>>(), vec!["aa", "bb"]);
        assert_eq!(sel.records.iter().filter(|r| r.selected).count(), 2);
    }

    #[test]
    fn term_file_round_trip() {
        let set = TermSet::new(vec![
            TermEntry { term: "kappa".into(), fg_count: 3, p_value: 6.184e-5 },
            TermEntry { term: "tag:mass media".into(), fg_count: 2, p_value: 1e-300 },
        ])
        .unwrap();
        let mut buf = Vec::new();
        set.write_tsv(&mut buf).unwrap();
        assert_eq!(TermSet::read_tsv(buf.as_slice()).unwrap(), set);
    }

    #[test]
    fn term_file_version_mismatch() {
        let text = "# pdc-terms version=9\n0\tx\t1\t1e0\n";
        assert!(matches!(
            TermSet::read_tsv(text.as_bytes()),
            Err(Error::Incompatible { .. })
        ));
    }
}
