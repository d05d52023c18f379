//! Picks the terms over-represented in a foreground relative to its
//! background with a hypergeometric test and BH control.
//!
//! ```text
//! cargo run --example select_terms
//! ```

use pdc::corpus::DocFrequencies;
use pdc::synthetic::planted_corpus;
use pdc::termselect::{benjamini_hochberg, select_terms, SelectionParams};
use pdc::Corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (fg, bg) = planted_corpus(10, 200, 1);
    let fg = Corpus::ingest(fg)?;
    let bg = DocFrequencies::from_corpus(&Corpus::ingest(bg)?);

    let params = SelectionParams {
        fdr: 0.01,
        ..SelectionParams::default()
    };
    let sel = select_terms(&fg, &bg, &params)?;
    println!("{} of {} candidates kept at fdr {}", sel.terms.len(), sel.records.len(), params.fdr);
    for e in sel.terms.entries() {
        println!("{:<24} fg={:<3} p={:.3e}", e.term, e.fg_count, e.p_value);
    }

    let p = [0.001, 0.008, 0.039, 0.041, 0.9];
    println!("\nBH at 0.05 over {p:?} keeps indices {:?}", benjamini_hochberg(&p, 0.05));
    Ok(())
}
