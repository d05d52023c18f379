//! Lays a cluster hierarchy out on the grid, colors the skyline and writes
//! the SVG report.
//!
//! ```text
//! cargo run --example render_report [-- <out.svg>]
//! ```

use pdc::hierarchy::{collect_clusters, TopicSummary};
use pdc::layout::{color_bars, render_svg, Grid, ReportStyle};
use pdc::{LevelSnapshot, SigmaMatrix};

fn snapshot(level: usize, bounds: &[usize]) -> LevelSnapshot {
    let mut labels = Vec::new();
    for w in bounds.windows(2) {
        labels.extend(std::iter::repeat_n(w[0], w[1] - w[0]));
    }
    LevelSnapshot {
        level,
        factor: -(level as f64) * 0.5,
        objective: 0.0,
        labels,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "report.svg".into());
    // 73 points. The first block splits twice; part of it breaks into
    // singletons, which are dropped, so its parent stays partly visible. The
    // block at 40..65 never splits and stays fully visible.
    let mut last = vec![0, 10];
    last.extend(11..=25);
    last.extend([30, 40, 65, 73]);
    let snaps = vec![
        snapshot(0, &[0, 40, 65, 73]),
        snapshot(1, &[0, 25, 40, 65, 73]),
        snapshot(2, &last),
    ];
    let m = SigmaMatrix::from_fn(73, |_, _| 5.0);
    let h = collect_clusters(&snaps, &m)?;
    let grid = Grid::fill(&h)?;
    for row in (0..grid.levels).rev() {
        let line: String = grid
            .row(row)
            .iter()
            .map(|&id| if id == 0 { '.' } else { char::from_digit(id as u32 % 36, 36).unwrap() })
            .collect();
        println!("{line}");
    }
    let bars = color_bars(&grid, &h)?;
    for b in &bars {
        println!("cluster {} {} x={} len={}", b.cluster_id, b.color.name(), b.x_start, b.length);
    }

    let topics: Vec<TopicSummary> = h
        .records
        .iter()
        .map(|r| TopicSummary {
            cluster_id: r.id,
            name: format!("cluster {}", r.id),
            name_term: String::new(),
            ranked_terms: r.members.iter().map(|&p| (format!("term{p}"), 1.0)).collect(),
            ranked_docs: vec![(format!("{}", 30000000 + r.id), 1.0)],
        })
        .collect();
    std::fs::write(&out, render_svg(&grid, &bars, &topics, &ReportStyle::default()))?;
    println!("wrote {out}");
    Ok(())
}
