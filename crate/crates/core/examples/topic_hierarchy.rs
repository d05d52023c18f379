//! Collects nested clusters from level snapshots, names them and ranks their
//! terms and documents.
//!
//! ```text
//! cargo run --example topic_hierarchy
//! ```

use pdc::affinity::build_matrix;
use pdc::corpus::DocFrequencies;
use pdc::engine::{super_split, EngineParams};
use pdc::hierarchy::{collect_clusters, summarize};
use pdc::synthetic::planted_corpus;
use pdc::termselect::{select_terms, SelectionParams};
use pdc::Corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (fg, bg) = planted_corpus(12, 300, 4);
    let fg = Corpus::ingest(fg)?;
    let bg = DocFrequencies::from_corpus(&Corpus::ingest(bg)?);
    let terms = select_terms(&fg, &bg, &SelectionParams::default())?.terms;
    let m = build_matrix(&terms, &fg)?;
    let run = super_split(&m, 6, 0.5, &EngineParams::default())?;

    let h = collect_clusters(&run.snapshots, &m)?;
    println!(
        "{} clusters over {} levels ({} singletons and {} non-positive dropped)",
        h.len(),
        h.levels,
        h.dropped_singletons,
        h.dropped_nonpositive
    );
    let names: Vec<String> = terms.terms().map(str::to_string).collect();
    for s in summarize(&h, &m, &names, &fg, 3) {
        let r = h.get(s.cluster_id).unwrap();
        let parent = if r.is_root() { "root".to_string() } else { format!("in {}", r.parent_id) };
        let top: Vec<&str> = s.top_terms(5).collect();
        println!(
            "#{:<2} level {} size {:<2} {:<8} {:<14} {}",
            r.id,
            r.level,
            r.size(),
            parent,
            s.name,
            top.join(", ")
        );
        for (doc, score) in &s.ranked_docs {
            println!("      doc {doc} {score:.1}");
        }
    }
    Ok(())
}
