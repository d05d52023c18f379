//! Runs every stage on a planted two-topic corpus and lists the artifacts.
//!
//! ```text
//! cargo run --example full_pipeline [-- <out-dir>]
//! ```

use std::path::PathBuf;

use pdc::corpus::Corpus;
use pdc::hierarchy::TopicsFile;
use pdc::pipeline::{self, PipelineConfig};
use pdc::synthetic::planted_corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("pdc-full-pipeline"));
    std::fs::create_dir_all(&out)?;

    let (fg, bg) = planted_corpus(10, 200, 7);
    let fg_path = out.join("foreground.jsonl");
    let bg_path = out.join("background.jsonl");
    Corpus::ingest(fg)?.save(&fg_path)?;
    Corpus::ingest(bg)?.save(&bg_path)?;

    let cfg = PipelineConfig {
        rng_seed: 42,
        ..PipelineConfig::default()
    };
    let summary = pipeline::run(&cfg, &fg_path, &bg_path, &out)?;
    println!(
        "{} terms, {} levels, {} topics, {} bars",
        summary.terms, summary.levels, summary.topics, summary.bars
    );

    let topics = TopicsFile::load(out.join(pipeline::TOPICS_FILE))?;
    for t in &topics.topics {
        let terms: Vec<&str> = t.terms.iter().map(|(s, _)| s.as_str()).collect();
        println!("topic {} {:?} ({} terms): {}", t.id, t.name, t.size, terms.join(", "));
    }
    for a in &summary.manifest.artifacts {
        println!("{:<24} {}", a.name, &a.sha256[..16]);
    }
    println!("report: {}", out.join(pipeline::REPORT_FILE).display());
    Ok(())
}
