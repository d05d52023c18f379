//! Scores topics with UMass and NPMI against a reference corpus.
//!
//! ```text
//! cargo run --example coherence
//! ```

use pdc::coherence::{evaluate, npmi, umass};
use pdc::hierarchy::TopicSummary;
use pdc::{Corpus, Document};

fn topic(id: usize, name: &str, terms: &[&str]) -> TopicSummary {
    TopicSummary {
        cluster_id: id,
        name: name.into(),
        name_term: String::new(),
        ranked_terms: terms.iter().map(|t| (t.to_string(), 1.0)).collect(),
        ranked_docs: Vec::new(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference = Corpus::ingest(
        [
            "lithium plasma dosage",
            "lithium plasma",
            "lithium dosage receptor",
            "firearm storage rural",
            "firearm homicide",
            "storage rural homicide",
        ]
        .iter()
        .enumerate()
        .map(|(i, t)| Document::new(i.to_string(), *t)),
    )?;

    let pair = ["lithium", "plasma"];
    println!(
        "pair {pair:?}: umass {:.4}, npmi {:.4}",
        umass(&pair, &reference, 2)?,
        npmi(&pair, &reference, 2)?
    );

    let topics = vec![
        topic(1, "pharmacology", &["lithium", "plasma", "dosage", "receptor"]),
        topic(2, "firearms", &["firearm", "storage", "rural", "homicide"]),
        topic(3, "mixed", &["lithium", "firearm", "plasma", "rural"]),
    ];
    let report = evaluate(&topics, &reference, &[2, 4])?;
    for t in &report.per_topic {
        for s in &t.scores {
            println!(
                "{:<13} n={} umass={:>8.4} npmi={:>8.4}",
                t.name,
                s.n,
                s.umass.mean().unwrap_or(f64::NAN),
                s.npmi.mean().unwrap_or(f64::NAN)
            );
        }
    }
    report.write_tsv(std::io::stdout().lock(), 0)?;
    Ok(())
}
