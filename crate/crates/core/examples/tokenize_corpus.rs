//! Tokenizes a few records and queries document frequencies and pair counts.
//!
//! ```text
//! cargo run --example tokenize_corpus
//! ```

use pdc::corpus::{display_term, tokenize};
use pdc::{log_odds, Corpus, Document};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let docs = vec![
        Document::new("1", "Lithium dosage and plasma levels")
            .with_abstract("Plasma lithium was measured in the first week.")
            .with_tags(["Lithium Compounds", "assisted-suicide"]),
        Document::new("2", "Serum lithium in older adults").with_abstract("Plasma levels rose with dosage."),
        Document::new("3", "Firearm storage in rural homes"),
    ];
    for term in tokenize(&docs[0]) {
        println!("{:<28} {}", term, display_term(&term));
    }

    let corpus = Corpus::ingest(docs)?;
    println!("\n{} documents, {} distinct terms", corpus.doc_count(), corpus.term_index().len());
    for t in ["lithium", "plasma", "firearm"] {
        println!("df({t}) = {}", corpus.doc_freq(t));
    }
    let stats = corpus.pair_stats("lithium", "plasma");
    println!("lithium/plasma: {stats:?}, log-odds {:.4}", log_odds(&stats));
    let stats = corpus.pair_stats("lithium", "firearm");
    println!("lithium/firearm: {stats:?}, log-odds {:.4}", log_odds(&stats));
    Ok(())
}
