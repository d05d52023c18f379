use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdc::pipeline::{self, PipelineConfig, COHERENCE_FILE, MATRIX_FILE, SNAPSHOT_DIR, TERMS_FILE, TOPICS_FILE};

#[derive(Parser)]
#[command(name = "pdc", version, about = "Cluster a collection's vocabulary into topics and map them")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides rng_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; staged commands also read earlier artifacts from it.
    #[arg(long, global = true, default_value = "pdc-out")]
    out: PathBuf,
    /// Overrides one config key, e.g. --set thr=50. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_kv)]
    set: Vec<(String, String)>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write a manifest.
    Run {
        #[arg(long)]
        fg: PathBuf,
        /// Background JSONL corpus or `N=` document-frequency file.
        #[arg(long)]
        bg: PathBuf,
    },
    /// Select enriched terms (terms.tsv).
    ExtractTerms {
        #[arg(long)]
        fg: PathBuf,
        #[arg(long)]
        bg: PathBuf,
    },
    /// Build the log-odds matrix (sigma.bin).
    BuildMatrix {
        #[arg(long)]
        fg: PathBuf,
        #[arg(long)]
        terms: Option<PathBuf>,
    },
    /// Split into level snapshots (snapshots/level_NNN.tsv).
    Cluster {
        /// Binary matrix file or whitespace-separated square matrix.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Collect, rank and name clusters (topics.jsonl).
    Topics {
        #[arg(long)]
        fg: PathBuf,
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        terms: Option<PathBuf>,
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Render the landscape (report.svg, grid.tsv).
    Layout {
        #[arg(long)]
        topics: Option<PathBuf>,
    },
    /// Score topic coherence (coherence.tsv).
    Coherence {
        #[arg(long)]
        topics: Option<PathBuf>,
        /// Reference JSONL corpus, usually the foreground.
        #[arg(long)]
        reference: PathBuf,
    },
}

fn or_out(p: Option<PathBuf>, out: &Path, name: &str) -> PathBuf {
    p.unwrap_or_else(|| out.join(name))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = cli.global;
    env_logger::Builder::new()
        .filter_level(match g.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        })
        .parse_env("PDC_LOG")
        .init();

    let mut overrides = g.set.clone();
    if let Some(seed) = g.seed {
        overrides.push(("rng_seed".into(), seed.to_string()));
    }
    let cfg = match PipelineConfig::resolve(g.config.as_deref(), std::env::vars(), &overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = g.out.as_path();

    let result = match cli.command {
        Command::Run { fg, bg } => pipeline::run(&cfg, &fg, &bg, out).map(|s| {
            println!(
                "{} terms, {} levels, {} topics, {} bars -> {}",
                s.terms,
                s.levels,
                s.topics,
                s.bars,
                out.display()
            );
        }),
        Command::ExtractTerms { fg, bg } => {
            pipeline::extract_terms(&cfg, &fg, &bg, out).map(|t| println!("{} terms -> {TERMS_FILE}", t.len()))
        }
        Command::BuildMatrix { fg, terms } => pipeline::build_matrix(&cfg, &fg, &or_out(terms, out, TERMS_FILE), out)
            .map(|n| println!("order {n} -> {MATRIX_FILE}")),
        Command::Cluster { matrix } => pipeline::cluster(&cfg, &or_out(matrix, out, MATRIX_FILE), out).map(|snaps| {
            for s in &snaps {
                println!(
                    "level {} factor {} objective {} clusters {}",
                    s.level,
                    s.factor,
                    s.objective,
                    s.clusters().len()
                );
            }
        }),
        Command::Topics {
            fg,
            matrix,
            terms,
            snapshots,
        } => pipeline::topics(
            &cfg,
            &or_out(matrix, out, MATRIX_FILE),
            &or_out(terms, out, TERMS_FILE),
            &or_out(snapshots, out, SNAPSHOT_DIR),
            &fg,
            out,
        )
        .map(|f| println!("{} topics -> {TOPICS_FILE}", f.topics.len())),
        Command::Layout { topics } => pipeline::layout(&cfg, &or_out(topics, out, TOPICS_FILE), out)
            .map(|bars| println!("{} bars -> report.svg", bars.len())),
        Command::Coherence { topics, reference } => {
            pipeline::coherence(&cfg, &or_out(topics, out, TOPICS_FILE), &reference, out).map(|r| {
                for a in r.aggregate.iter().flatten() {
                    println!("n={} umass={} npmi={} ({} topics)", a.n, a.umass_mean, a.npmi_mean, a.topics);
                }
                println!("-> {COHERENCE_FILE}");
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
