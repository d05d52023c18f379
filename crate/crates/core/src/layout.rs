//! The number grid, its skyline, and the SVG landscape report.
//!
//! Row 0 of the grid is the bottom (level 0). Every kept cluster writes its id
//! over a contiguous run of `size` cells in the row of its level; children sit
//! inside the span of their parent. Looking down each column from the top, the
//! first nonzero id forms the skyline, whose runs become colored bars.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;

use crate::hierarchy::{ClusterHierarchy, TopicSummary};
use crate::textfmt;
use crate::{Error, Result};

/// Clusters at least this large are drawn red or green rather than blue.
pub const LARGE_CLUSTER: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub width: usize,
    /// Number of level rows K.
    pub levels: usize,
    /// Row-major, row 0 first; 0 marks an empty cell.
    cells: Vec<usize>,
    /// First column of each placed cluster.
    spans: BTreeMap<usize, (usize, usize)>,
}

impl Grid {
    pub fn empty(width: usize, levels: usize) -> Self {
        Grid {
            width,
            levels,
            cells: vec![0; width * levels],
            spans: BTreeMap::new(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> usize {
        self.cells[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[usize] {
        &self.cells[row * self.width..(row + 1) * self.width]
    }

    /// (first column, length) of a placed cluster.
    pub fn span(&self, id: usize) -> Option<(usize, usize)> {
        self.spans.get(&id).copied()
    }

    /// Places every cluster of `hierarchy`.
    ///
    /// Roots go left to right in id order, each in the row of its level.
    /// Other clusters are placed row by row at the first run of empty cells
    /// above their parent's span that is long enough, children of
    /// higher-level parents first.
    pub fn fill(hierarchy: &ClusterHierarchy) -> Result<Grid> {
        let levels = hierarchy
            .records
            .iter()
            .map(|r| r.level + 1)
            .max()
            .unwrap_or(0)
            .max(hierarchy.levels);
        let mut grid = Grid::empty(hierarchy.order, levels);
        let mut cursor = 0;
        for r in hierarchy.records.iter().filter(|r| r.is_root()) {
            if cursor + r.size() > grid.width {
                return Err(Error::Inconsistent(format!("root cluster {} overflows the grid width", r.id)));
            }
            grid.write(r.level, cursor, r.size(), r.id);
            cursor += r.size();
        }
        for level in 1..levels {
            let mut row: Vec<_> = hierarchy
                .records
                .iter()
                .filter(|r| r.level == level && !r.is_root())
                .collect();
            let parent_level = |id| hierarchy.get(id).map_or(0, |p| p.level);
            row.sort_by_key(|r| (std::cmp::Reverse(parent_level(r.parent_id)), r.id));
            for r in row {
                let (px, plen) = grid.span(r.parent_id).ok_or_else(|| {
                    Error::Inconsistent(format!("cluster {} placed before its parent {}", r.id, r.parent_id))
                })?;
                let x = grid.first_fit(level, px, plen, r.size()).ok_or_else(|| {
                    Error::Inconsistent(format!("cluster {} does not fit above parent {}", r.id, r.parent_id))
                })?;
                grid.write(level, x, r.size(), r.id);
            }
        }
        Ok(grid)
    }

    fn write(&mut self, row: usize, x: usize, len: usize, id: usize) {
        let start = row * self.width + x;
        self.cells[start..start + len].fill(id);
        self.spans.insert(id, (x, len));
    }

    fn first_fit(&self, row: usize, x: usize, span: usize, len: usize) -> Option<usize> {
        let cells = &self.row(row)[x..x + span];
        let mut run = 0;
        for (i, &c) in cells.iter().enumerate() {
            run = if c == 0 { run + 1 } else { 0 };
            if run == len {
                return Some(x + i + 1 - len);
            }
        }
        None
    }

    /// Topmost nonzero id of each column, up to the first all-zero column.
    pub fn skyline(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for col in 0..self.width {
            match (0..self.levels).rev().map(|r| self.get(r, col)).find(|&id| id != 0) {
                Some(id) => out.push(id),
                None => break,
            }
        }
        out
    }

    /// Tab-separated dump, top row first, after a header line.
    pub fn write_tsv<W: Write>(&self, mut w: W, bars: &[ColoredBar], seed: u64) -> Result<()> {
        let header = textfmt::header_line(
            "grid",
            &[
                ("width", self.width.to_string()),
                ("levels", self.levels.to_string()),
                ("red_collisions", red_collisions(bars).to_string()),
                ("seed", seed.to_string()),
            ],
        );
        writeln!(w, "{header}")?;
        for r in (0..self.levels).rev() {
            let line: Vec<String> = self.row(r).iter().map(usize::to_string).collect();
            writeln!(w, "{}", line.join("\t"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BarColor {
    Blue,
    Green,
    Red,
}

impl BarColor {
    pub fn name(self) -> &'static str {
        match self {
            BarColor::Blue => "blue",
            BarColor::Green => "green",
            BarColor::Red => "red",
        }
    }
}

/// One run of equal ids in the skyline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoredBar {
    pub cluster_id: usize,
    pub color: BarColor,
    pub x_start: usize,
    pub length: usize,
    pub level_row: usize,
    /// Upward offset in rows; the cluster size for red bars, else 0.
    pub shift: usize,
}

impl ColoredBar {
    /// Row of the bar's top cell once shifted.
    pub fn top_row(&self) -> usize {
        self.level_row + self.shift
    }
}

/// Splits the skyline into runs and colors them: blue below
/// [`LARGE_CLUSTER`], red when the whole cluster is visible, green otherwise.
pub fn color_bars(grid: &Grid, hierarchy: &ClusterHierarchy) -> Result<Vec<ColoredBar>> {
    let sky = grid.skyline();
    let mut visible: BTreeMap<usize, usize> = BTreeMap::new();
    for &id in &sky {
        *visible.entry(id).or_default() += 1;
    }
    let mut bars = Vec::new();
    let mut x = 0;
    while x < sky.len() {
        let id = sky[x];
        let len = sky[x..].iter().take_while(|&&s| s == id).count();
        let r = hierarchy
            .get(id)
            .ok_or_else(|| Error::Inconsistent(format!("grid holds unknown cluster id {id}")))?;
        let color = if r.size() < LARGE_CLUSTER {
            BarColor::Blue
        } else if visible[&id] == r.size() {
            BarColor::Red
        } else {
            BarColor::Green
        };
        bars.push(ColoredBar {
            cluster_id: id,
            color,
            x_start: x,
            length: len,
            level_row: r.level,
            shift: if color == BarColor::Red { r.size() } else { 0 },
        });
        x += len;
    }
    Ok(bars)
}

/// Pairs of red bars whose shifted cells overlap. Skyline runs never share a
/// column, so this is 0 for bars from [`color_bars`].
pub fn red_collisions(bars: &[ColoredBar]) -> usize {
    let red: Vec<_> = bars.iter().filter(|b| b.color == BarColor::Red).collect();
    let mut n = 0;
    for (i, a) in red.iter().enumerate() {
        for b in &red[i + 1..] {
            if a.x_start < b.x_start + b.length && b.x_start < a.x_start + a.length {
                n += 1;
            }
        }
    }
    n
}

/// Rendering parameters of the SVG report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportStyle {
    pub cell_width: usize,
    pub cell_height: usize,
    pub background: String,
    pub blue: String,
    pub green: String,
    pub red: String,
    /// Document link; `{id}` is replaced by the document id.
    pub url_template: String,
    pub popup_width: usize,
    pub popup_height: usize,
    /// Ranked terms listed in a popup.
    pub popup_terms: usize,
}

impl Default for ReportStyle {
    fn default() -> Self {
        ReportStyle {
            cell_width: 4,
            cell_height: 4,
            background: "#ffffff".into(),
            blue: "#1f5fbf".into(),
            green: "#2e9e44".into(),
            red: "#d0312d".into(),
            url_template: "https://pubmed.ncbi.nlm.nih.gov/{id}/".into(),
            popup_width: 640,
            popup_height: 400,
            popup_terms: 30,
        }
    }
}

impl ReportStyle {
    pub fn fill(&self, color: BarColor) -> &str {
        match color {
            BarColor::Blue => &self.blue,
            BarColor::Green => &self.green,
            BarColor::Red => &self.red,
        }
    }

    pub fn doc_url(&self, id: &str) -> String {
        self.url_template.replace("{id}", &percent_encode(id))
    }
}

fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || b"-._~".contains(&b) {
            out.push(b as char);
        } else {
            write!(out, "%{b:02X}").expect("string write");
        }
    }
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Canvas rows: K plus headroom for the tallest red shift.
pub fn canvas_rows(grid: &Grid, bars: &[ColoredBar]) -> usize {
    grid.levels + bars.iter().filter(|b| b.color == BarColor::Red).map(|b| b.shift).max().unwrap_or(0)
}

/// Renders the report. Each bar is one `<rect>` drawn from its (shifted) top
/// cell down to the baseline and linked to a popup listing the cluster's
/// ranked terms and documents. Output depends only on the inputs.
pub fn render_svg(grid: &Grid, bars: &[ColoredBar], topics: &[TopicSummary], style: &ReportStyle) -> String {
    let (cw, ch) = (style.cell_width, style.cell_height);
    let rows = canvas_rows(grid, bars);
    let has_popups = !bars.is_empty();
    let mut width = grid.width * cw;
    let mut height = rows * ch;
    if has_popups {
        width = width.max(style.popup_width);
        height = height.max(style.popup_height);
    }
    let y_base = height - rows * ch;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" style="background:{}">"#,
        escape(&style.background)
    );
    if has_popups {
        s.push_str(
            "<style>\n\
             .popup{display:none}\n\
             .popup:target{display:inline}\n\
             .panel{font:11px sans-serif;background:#fff;border:1px solid #444;height:100%;box-sizing:border-box;display:flex;overflow:hidden}\n\
             .panel h3{margin:0 0 4px;font-size:13px}\n\
             .panel ol{margin:0;padding-left:22px;overflow:auto}\n\
             .panel .col{flex:1;padding:6px;overflow:auto}\n\
             .bar:hover{opacity:0.7}\n\
             </style>\n",
        );
    }
    s.push_str("<g class=\"bars\">\n");
    let names: BTreeMap<usize, &TopicSummary> = topics.iter().map(|t| (t.cluster_id, t)).collect();
    for b in bars {
        let top = b.top_row();
        let x = b.x_start * cw;
        let y = y_base + (rows - 1 - top) * ch;
        let title = names
            .get(&b.cluster_id)
            .map_or_else(|| format!("cluster {}", b.cluster_id), |t| t.name.clone());
        let _ = writeln!(
            s,
            r##"<a href="#popup-{id}"><rect class="bar" data-cluster="{id}" data-color="{color}" x="{x}" y="{y}" width="{w}" height="{h}" fill="{fill}"><title>{title}</title></rect></a>"##,
            id = b.cluster_id,
            color = b.color.name(),
            w = b.length * cw,
            h = (top + 1) * ch,
            fill = escape(style.fill(b.color)),
            title = escape(&title),
        );
    }
    s.push_str("</g>\n");

    let shown: BTreeSet<usize> = bars.iter().map(|b| b.cluster_id).collect();
    for id in shown {
        let Some(t) = names.get(&id) else { continue };
        let _ = write!(
            s,
            r#"<foreignObject id="popup-{id}" class="popup" x="0" y="0" width="{}" height="{}"><div xmlns="http://www.w3.org/1999/xhtml" class="panel">"#,
            style.popup_width, style.popup_height
        );
        let _ = write!(s, "<div class=\"col\"><h3>{} <a href=\"#\">×</a></h3><ol>", escape(&t.name));
        for (term, score) in t.ranked_terms.iter().take(style.popup_terms) {
            let _ = write!(s, "<li>{} <small>{score:.3}</small></li>", escape(&crate::corpus::display_term(term)));
        }
        s.push_str("</ol></div><div class=\"col\"><h3>Documents</h3><ol>");
        for (doc, score) in &t.ranked_docs {
            let _ = write!(
                s,
                "<li><a href=\"{}\" target=\"_blank\">{}</a> <small>{score:.3}</small></li>",
                escape(&style.doc_url(doc)),
                escape(doc)
            );
        }
        s.push_str("</ol></div></div></foreignObject>\n");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::ClusterRecord;

    fn rec(id: usize, level: usize, members: std::ops::Range<usize>, parent_id: usize) -> ClusterRecord {
        ClusterRecord {
            id,
            level,
            factor: -(level as f64) * 0.5,
            members: members.collect(),
            score: 1.0,
            parent_id,
        }
    }

    fn hier(order: usize, levels: usize, records: Vec<ClusterRecord>) -> ClusterHierarchy {
        ClusterHierarchy {
            records,
            levels,
            order,
            ..Default::default()
        }
    }

    #[test]
    fn single_root() {
        let h = hier(4, 1, vec![rec(1, 0, 0..4, 1)]);
        let g = Grid::fill(&h).unwrap();
        assert_eq!(g.row(0), &[1, 1, 1, 1]);
        let bars = color_bars(&g, &h).unwrap();
        assert_eq!(bars.len(), 1);
        assert_eq!(bars[0].color, BarColor::Blue);
        assert_eq!(bars[0].shift, 0);
    }

    #[test]
    fn children_fill_parent_span() {
        let h = hier(6, 2, vec![rec(1, 0, 0..2, 1), rec(2, 0, 2..6, 2), rec(3, 1, 2..4, 2), rec(4, 1, 4..6, 2)]);
        let g = Grid::fill(&h).unwrap();
        assert_eq!(g.row(0), &[1, 1, 2, 2, 2, 2]);
        assert_eq!(g.row(1), &[0, 0, 3, 3, 4, 4]);
        assert_eq!(g.skyline(), vec![1, 1, 3, 3, 4, 4]);
    }

    #[test]
    fn empty_hierarchy() {
        let h = hier(5, 1, Vec::new());
        let g = Grid::fill(&h).unwrap();
        assert!(g.row(0).iter().all(|&c| c == 0));
        assert!(g.skyline().is_empty());
        let svg = render_svg(&g, &[], &[], &ReportStyle::default());
        assert!(!svg.contains("<rect"));
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn large_cluster_colors() {
        let h = hier(25, 1, vec![rec(1, 0, 0..25, 1)]);
        let g = Grid::fill(&h).unwrap();
        let bars = color_bars(&g, &h).unwrap();
        assert_eq!((bars[0].color, bars[0].shift), (BarColor::Red, 25));
        assert_eq!(canvas_rows(&g, &bars), 26);

        let h = hier(25, 2, vec![rec(1, 0, 0..25, 1), rec(2, 1, 0..10, 1)]);
        let g = Grid::fill(&h).unwrap();
        let bars = color_bars(&g, &h).unwrap();
        assert_eq!(bars.len(), 2);
        assert_eq!((bars[0].cluster_id, bars[0].color), (2, BarColor::Blue));
        assert_eq!((bars[1].cluster_id, bars[1].color, bars[1].length), (1, BarColor::Green, 15));
        assert_eq!(red_collisions(&bars), 0);
    }

    #[test]
    fn one_blue_bar_renders_one_rect() {
        let h = hier(4, 1, vec![rec(1, 0, 0..3, 1)]);
        let g = Grid::fill(&h).unwrap();
        let bars = color_bars(&g, &h).unwrap();
        let style = ReportStyle::default();
        let topic = TopicSummary {
            cluster_id: 1,
            name: "mass media".into(),
            name_term: "mass\u{2581}media".into(),
            ranked_terms: vec![("mass\u{2581}media".into(), 2.0)],
            ranked_docs: vec![("123 45".into(), 2.0)],
        };
        let svg = render_svg(&g, &bars, std::slice::from_ref(&topic), &style);
        assert_eq!(svg.matches("<rect").count(), 1);
        assert!(svg.contains(&format!("fill=\"{}\"", style.blue)));
        assert!(svg.contains("https://pubmed.ncbi.nlm.nih.gov/123%2045/"));
        assert_eq!(svg, render_svg(&g, &bars, &[topic], &style));
    }

    #[test]
    fn unplaceable_child_is_an_error() {
        let mut child = rec(2, 1, 0..3, 1);
        child.members = vec![0, 1, 2];
        let h = hier(4, 2, vec![rec(1, 0, 0..2, 1), child]);
        assert!(matches!(Grid::fill(&h), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn grid_dump_is_top_down() {
        let h = hier(4, 2, vec![rec(1, 0, 0..4, 1), rec(2, 1, 0..2, 1)]);
        let g = Grid::fill(&h).unwrap();
        let bars = color_bars(&g, &h).unwrap();
        let mut buf = Vec::new();
        g.write_tsv(&mut buf, &bars, 3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# pdc-grid version=1 width=4 levels=2 red_collisions=0 seed=3");
        assert_eq!(&lines[1..], &["2\t2\t0\t0", "1\t1\t1\t1"]);
    }
}
