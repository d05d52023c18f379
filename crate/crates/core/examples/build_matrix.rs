//! Builds the pairwise log-odds matrix, writes it to disk and maps it back.
//!
//! ```text
//! cargo run --example build_matrix
//! ```

use pdc::affinity::build_matrix;
use pdc::synthetic::{TOPIC_A, TOPIC_B};
use pdc::{Corpus, SigmaMatrix, TermSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (fg, _) = pdc::synthetic::planted_corpus(8, 0, 2);
    let corpus = Corpus::ingest(fg)?;
    let terms = TermSet::from_terms(TOPIC_A.iter().chain(&TOPIC_B).copied())?;
    let m = build_matrix(&terms, &corpus)?;

    print!("{:>12}", "");
    for j in 0..terms.len() {
        print!("{:>8.8}", terms.term(j));
    }
    println!();
    for i in 0..terms.len() {
        print!("{:>12}", terms.term(i));
        for j in 0..terms.len() {
            print!("{:>8.2}", m.base(i, j));
        }
        println!();
    }

    let path = std::env::temp_dir().join("pdc-example-sigma.bin");
    m.save(&path)?;
    let mapped = SigmaMatrix::open(&path)?;
    assert_eq!(mapped.base(0, 1), m.base(0, 1));
    println!("\nwrote {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
    Ok(())
}
