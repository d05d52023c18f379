//! Pairwise relatedness of terms as signed log-odds, and the symmetric matrix
//! that stores them.
//!
//! For a pair (s, t) the log-likelihood ratio of the unconstrained four-cell
//! multinomial against the binary independence model is N times the KL
//! divergence between the two cell distributions. It is reported positive when
//! the pair co-occurs at least as often as independence predicts and negative
//! otherwise. Cell probabilities are maximum-likelihood (count / N).
//!
//! The matrix stores σ₀ without the prior offset; the offset ("factor") is
//! added at read time through [`SigmaMatrix::sigma_at`].

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use memmap2::Mmap;
use rayon::prelude::*;

use crate::corpus::{intersection_size, Corpus, TermStats};
use crate::termselect::TermSet;
use crate::textfmt::FORMAT_VERSION;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PDC1";
pub const HEADER_LEN: usize = 16;

/// Signed N·KL log-odds in nats for a pair of terms.
///
/// Degenerate marginals (a term in no document or in every document) give 0.
pub fn log_odds(stats: &TermStats) -> f64 {
    debug_assert!(stats.is_valid(), "invalid stats {stats:?}");
    let TermStats {
        n_docs,
        n_s,
        n_t,
        n_st,
    } = *stats;
    if n_docs == 0 || n_s == 0 || n_t == 0 || n_s == n_docs || n_t == n_docs {
        return 0.0;
    }
    let observed = n_st as u128 * n_docs as u128;
    let expected = n_s as u128 * n_t as u128;
    if observed == expected {
        return 0.0;
    }

    // N·KL = Σ c·ln(c/e) = Σ e·φ(c/e) with φ(r) = r·ln r − r + 1 ≥ 0, which
    // holds because Σ c = Σ e. Every term is nonnegative, so no cancellation.
    let n = n_docs as f64;
    let (s, t) = (n_s as f64, n_t as f64);
    let margins = [(s, t), (s, n - t), (n - s, t), (n - s, n - t)];
    let cells = stats.cells();
    let terms: [f64; 4] = std::array::from_fn(|k| {
        let (c, (row, col)) = (cells[k], margins[k]);
        let e = row * col / n;
        if c == 0 {
            e
        } else {
            let c = c as f64;
            let x = (c - e) / e;
            (e * ((1.0 + x) * x.ln_1p() - x)).max(0.0)
        }
    });
    // The off-diagonal cells trade places when s and t swap; pairing them
    // keeps σ₀(s,t) and σ₀(t,s) bit-identical.
    let kl_n = (terms[0] + terms[3]) + (terms[1] + terms[2]);
    if observed > expected {
        kl_n
    } else {
        -kl_n
    }
}

enum Storage {
    Owned(Vec<f64>),
    Mapped(Mmap),
}

/// Symmetric matrix of factor-free log-odds with a zero diagonal.
///
/// Stored as the strict lower triangle, row-major: entry (i, j) with i > j
/// lives at index i·(i−1)/2 + j. The file form prefixes a 16-byte header:
/// `PDC1`, a little-endian u32 format version, and the order as a
/// little-endian u64.
pub struct SigmaMatrix {
    order: usize,
    storage: Storage,
}

impl std::fmt::Debug for SigmaMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SigmaMatrix")
            .field("order", &self.order)
            .field("mapped", &matches!(self.storage, Storage::Mapped(_)))
            .finish()
    }
}

fn tri_len(order: usize) -> usize {
    order * order.saturating_sub(1) / 2
}

#[inline]
fn tri_index(i: usize, j: usize) -> usize {
    let (hi, lo) = if i > j { (i, j) } else { (j, i) };
    hi * (hi - 1) / 2 + lo
}

impl SigmaMatrix {
    /// Builds an in-memory matrix from `f(i, j)`, called once per pair with i > j.
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(tri_len(order));
        for i in 1..order {
            for j in 0..i {
                values.push(f(i, j));
            }
        }
        SigmaMatrix {
            order,
            storage: Storage::Owned(values),
        }
    }

    /// Builds from a full square matrix, reading only the lower triangle.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        SigmaMatrix::from_fn(rows.len(), |i, j| rows[i][j])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// σ₀(i, j). Panics if an index is out of range.
    #[inline]
    pub fn base(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.order && j < self.order, "index ({i}, {j}) out of range");
        if i == j {
            return 0.0;
        }
        let idx = tri_index(i, j);
        match &self.storage {
            Storage::Owned(v) => v[idx],
            Storage::Mapped(m) => {
                let at = HEADER_LEN + 8 * idx;
                f64::from_le_bytes(m[at..at + 8].try_into().expect("8-byte slice"))
            }
        }
    }

    /// σ(i, j; factor): σ₀ plus the prior offset off the diagonal, 0 on it.
    pub fn sigma_at(&self, i: usize, j: usize, factor: f64) -> Result<f64> {
        if i >= self.order || j >= self.order {
            return Err(Error::Domain(format!(
                "index ({i}, {j}) out of range for order {}",
                self.order
            )));
        }
        Ok(if i == j { 0.0 } else { self.base(i, j) + factor })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        write_header(&mut w, self.order)?;
        for i in 1..self.order {
            for j in 0..i {
                w.write_all(&self.base(i, j).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(Error::at(path))?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads a whole matrix file into memory.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        let order = parse_header(&header)?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        check_len(order, bytes.len())?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(SigmaMatrix {
            order,
            storage: Storage::Owned(values),
        })
    }

    /// Memory-maps a matrix file for random access without loading it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(Error::at(path))?;
        // SAFETY: matrix files are written once and never modified afterwards.
        let map = unsafe { Mmap::map(&file) }.map_err(Error::at(path))?;
        if map.len() < HEADER_LEN {
            return Err(Error::Incompatible {
                what: path.display().to_string(),
                message: "file shorter than the matrix header".into(),
            });
        }
        let order = parse_header(&map[..HEADER_LEN])?;
        check_len(order, map.len() - HEADER_LEN)?;
        Ok(SigmaMatrix {
            order,
            storage: Storage::Mapped(map),
        })
    }

    /// Parses a whitespace-separated square matrix, one row per line. Blank
    /// lines and `#` comments are ignored; the matrix must be symmetric.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        const WHAT: &str = "matrix text file";
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let row = body
                .split_whitespace()
                .map(|tok| tok.parse::<f64>().map_err(|_| Error::parse(WHAT, idx + 1, format!("bad number {tok:?}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::parse(WHAT, i + 1, format!("row has {} entries, expected {n}", row.len())));
            }
            for j in 0..i {
                if row[j] != rows[j][i] || !row[j].is_finite() {
                    return Err(Error::Inconsistent(format!("matrix entry ({i}, {j}) is not symmetric and finite")));
                }
            }
        }
        Ok(SigmaMatrix::from_dense(&rows))
    }

    /// Opens a binary matrix file (memory-mapped) or parses a text one.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut magic = [0u8; 4];
        let mut file = File::open(path).map_err(Error::at(path))?;
        let got = file.read(&mut magic).map_err(Error::at(path))?;
        if got == 4 && &magic == MAGIC {
            SigmaMatrix::open(path)
        } else {
            SigmaMatrix::read_text(BufReader::new(File::open(path).map_err(Error::at(path))?))
        }
    }

    /// Copies a mapped matrix into memory; a no-op for owned ones.
    pub fn into_owned(self) -> Self {
        match self.storage {
            Storage::Owned(_) => self,
            Storage::Mapped(_) => {
                let order = self.order;
                SigmaMatrix::from_fn(order, |i, j| self.base(i, j))
            }
        }
    }
}

fn write_header<W: Write>(w: &mut W, order: usize) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(order as u64).to_le_bytes())?;
    Ok(())
}

fn parse_header(header: &[u8]) -> Result<usize> {
    let incompatible = |message: String| Error::Incompatible {
        what: "matrix file".into(),
        message,
    };
    if &header[..4] != MAGIC {
        return Err(incompatible(format!("bad magic {:?}", &header[..4])));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(incompatible(format!(
            "schema version {version}, this build reads version {FORMAT_VERSION}"
        )));
    }
    let order = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes"));
    usize::try_from(order).map_err(|_| incompatible(format!("order {order} too large")))
}

fn check_len(order: usize, payload: usize) -> Result<()> {
    let expected = tri_len(order) * 8;
    if payload != expected {
        return Err(Error::Incompatible {
            what: "matrix file".into(),
            message: format!("payload is {payload} bytes, order {order} needs {expected}"),
        });
    }
    Ok(())
}

fn postings_for<'c>(terms: &TermSet, corpus: &'c Corpus) -> Result<Vec<&'c [usize]>> {
    terms
        .terms()
        .map(|t| {
            if corpus.contains_term(t) {
                Ok(corpus.postings(t))
            } else {
                Err(Error::Inconsistent(format!("term {t:?} does not occur in the corpus")))
            }
        })
        .collect()
}

fn compute_row(i: usize, postings: &[&[usize]], n_docs: u64) -> Vec<f64> {
    (0..i)
        .map(|j| {
            log_odds(&TermStats {
                n_docs,
                n_s: postings[i].len() as u64,
                n_t: postings[j].len() as u64,
                n_st: intersection_size(postings[i], postings[j]) as u64,
            })
        })
        .collect()
}

/// Computes σ₀ for every pair of terms in memory.
pub fn build_matrix(terms: &TermSet, corpus: &Corpus) -> Result<SigmaMatrix> {
    let postings = postings_for(terms, corpus)?;
    let n_docs = corpus.doc_count() as u64;
    let rows: Vec<Vec<f64>> = (0..terms.len())
        .into_par_iter()
        .map(|i| compute_row(i, &postings, n_docs))
        .collect();
    Ok(SigmaMatrix {
        order: terms.len(),
        storage: Storage::Owned(rows.into_iter().flatten().collect()),
    })
}

/// Computes σ₀ row block by row block and streams it to `path`, so the matrix
/// never has to fit in memory. `max_order` bounds the term count.
pub fn build_matrix_file(
    terms: &TermSet,
    corpus: &Corpus,
    path: impl AsRef<Path>,
    max_order: usize,
) -> Result<()> {
    const BLOCK: usize = 256;
    if terms.len() > max_order {
        return Err(Error::Config(format!(
            "{} terms exceed the matrix order limit {max_order}",
            terms.len()
        )));
    }
    let postings = postings_for(terms, corpus)?;
    let n_docs = corpus.doc_count() as u64;
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(Error::at(path))?);
    write_header(&mut w, terms.len())?;
    for start in (0..terms.len()).step_by(BLOCK) {
        let end = (start + BLOCK).min(terms.len());
        let rows: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|i| compute_row(i, &postings, n_docs))
            .collect();
        for v in rows.iter().flatten() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    const LN2_10: f64 = 6.931_471_805_599_453;

    #[test]
    fn independence_is_zero() {
        assert_eq!(log_odds(&TermStats { n_docs: 100, n_s: 10, n_t: 10, n_st: 1 }), 0.0);
    }

    #[test]
    fn perfect_and_disjoint_halves() {
        let pos = log_odds(&TermStats { n_docs: 10, n_s: 5, n_t: 5, n_st: 5 });
        let neg = log_odds(&TermStats { n_docs: 10, n_s: 5, n_t: 5, n_st: 0 });
        assert!((pos - LN2_10).abs() < 1e-12, "{pos}");
        assert!((neg + LN2_10).abs() < 1e-12, "{neg}");
    }

    #[test]
    fn degenerate_marginals() {
        assert_eq!(log_odds(&TermStats { n_docs: 10, n_s: 10, n_t: 3, n_st: 3 }), 0.0);
        assert_eq!(log_odds(&TermStats { n_docs: 10, n_s: 0, n_t: 3, n_st: 0 }), 0.0);
        assert_eq!(log_odds(&TermStats { n_docs: 0, n_s: 0, n_t: 0, n_st: 0 }), 0.0);
    }

    #[test]
    fn sigma_at_examples() {
        let m = SigmaMatrix::from_dense(&[vec![0.0, LN2_10], vec![LN2_10, 0.0]]);
        assert_eq!(m.sigma_at(0, 0, -5.0).unwrap(), 0.0);
        assert!((m.sigma_at(0, 1, -0.5).unwrap() - 6.431_471_805_599_453).abs() < 1e-12);
        assert!(m.sigma_at(0, 2, 0.0).is_err());
        let zero = SigmaMatrix::from_fn(2, |_, _| 0.0);
        assert_eq!(zero.sigma_at(1, 0, -1.0).unwrap(), -1.0);
    }

    #[test]
    fn build_small_corpora() {
        // Two terms, each in a disjoint half of ten documents.
        let docs = (0..10).map(|i| Document::new(i.to_string(), if i < 5 { "left" } else { "right" }));
        let corpus = Corpus::ingest(docs).unwrap();
        let terms = TermSet::from_terms(["left", "right"]).unwrap();
        let m = build_matrix(&terms, &corpus).unwrap();
        assert!((m.base(0, 1) + LN2_10).abs() < 1e-12);
        assert_eq!(m.base(1, 0), m.base(0, 1));

        let single = build_matrix(&TermSet::from_terms(["left"]).unwrap(), &corpus).unwrap();
        assert_eq!(single.order(), 1);
        assert_eq!(single.base(0, 0), 0.0);

        let missing = TermSet::from_terms(["left", "nowhere"]).unwrap();
        assert!(matches!(build_matrix(&missing, &corpus), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let m = SigmaMatrix::from_fn(7, |i, j| (i as f64).sin() * (j as f64 + 0.3).ln());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sigma.bin");
        m.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"PDC1");
        assert_eq!(bytes.len(), HEADER_LEN + 21 * 8);
        let mapped = SigmaMatrix::open(&path).unwrap();
        let read = SigmaMatrix::read_from(bytes.as_slice()).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(mapped.base(i, j).to_bits(), m.base(i, j).to_bits());
                assert_eq!(read.base(i, j).to_bits(), m.base(i, j).to_bits());
            }
        }
    }

    #[test]
    fn streamed_file_equals_in_memory_build() {
        let docs = (0..30).map(|i| {
            let mut words = vec!["base"];
            if i % 2 == 0 { words.push("even"); }
            if i % 3 == 0 { words.push("triple"); }
            if i < 12 { words.push("early"); }
            Document::new(i.to_string(), words.join(" the "))
        });
        let corpus = Corpus::ingest(docs).unwrap();
        let terms = TermSet::from_terms(["even", "triple", "early", "base"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        build_matrix_file(&terms, &corpus, &path, 10).unwrap();
        let mem = build_matrix(&terms, &corpus).unwrap();
        let mut expected = Vec::new();
        mem.write_to(&mut expected).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), expected);
        assert!(matches!(build_matrix_file(&terms, &corpus, &path, 3), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_wrong_version() {
        let mut bytes = Vec::new();
        SigmaMatrix::from_fn(2, |_, _| 1.0).write_to(&mut bytes).unwrap();
        bytes[4] = 7;
        assert!(matches!(SigmaMatrix::read_from(bytes.as_slice()), Err(Error::Incompatible { .. })));
        bytes[4] = 1;
        bytes.pop();
        assert!(matches!(SigmaMatrix::read_from(bytes.as_slice()), Err(Error::Incompatible { .. })));
    }

    #[test]
    fn text_matrix() {
        let text = "# three points\n0 2 -3\n2 0 -3\n-3 -3 0\n";
        let m = SigmaMatrix::read_text(text.as_bytes()).unwrap();
        assert_eq!((m.order(), m.base(1, 0), m.base(2, 1)), (3, 2.0, -3.0));
        assert!(SigmaMatrix::read_text("0 1\n2 0\n".as_bytes()).is_err());
        assert!(SigmaMatrix::read_text("0 1\n".as_bytes()).is_err());

        let dir = tempfile::tempdir().unwrap();
        let (txt, bin) = (dir.path().join("m.txt"), dir.path().join("m.bin"));
        std::fs::write(&txt, text).unwrap();
        m.save(&bin).unwrap();
        assert_eq!(SigmaMatrix::load(&txt).unwrap().base(2, 0), -3.0);
        assert_eq!(SigmaMatrix::load(&bin).unwrap().base(1, 0), 2.0);
    }
}
