//! Runs the level schedule on a planted block matrix and prints each level.
//!
//! ```text
//! cargo run --example cluster_planted [-- <thr>]
//! ```

use pdc::engine::{super_split, EngineParams};
use pdc::synthetic::planted_blocks;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let thr: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4);
    // Three blocks of six; every block is then too large for thr = 4 and has
    // to be broken up as the factor falls.
    let m = planted_blocks(3, 6, 1.0, -1.0);
    let params = EngineParams {
        rng_seed: 1,
        ..EngineParams::default()
    };
    let run = super_split(&m, thr, 0.5, &params)?;
    for s in &run.snapshots {
        let sizes: Vec<usize> = s.clusters().iter().map(Vec::len).collect();
        println!(
            "level {} factor {:>5} objective {:>7.2} sizes {:?}",
            s.level, s.factor, s.objective, sizes
        );
    }
    println!(
        "{} commits, {} basic splits, {} pass-cap hits",
        run.stats.commits, run.stats.basic_splits, run.stats.cap_hits
    );
    Ok(())
}
