//! End-to-end runs and the individually runnable stages behind them.
//!
//! Every stage reads its inputs from files and writes its artifacts into an
//! output directory, so a monolithic [`run`] and a sequence of stage calls
//! produce the same bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::affinity::{build_matrix_file, SigmaMatrix};
use crate::coherence::{self, CoherenceReport};
use crate::corpus::{Corpus, DocFrequencies};
use crate::engine::{snapshot_file_name, super_split, EngineParams, LevelSnapshot};
use crate::hierarchy::{collect_clusters, summarize, TopicsFile};
use crate::layout::{color_bars, render_svg, ColoredBar, Grid, ReportStyle};
use crate::termselect::{select_terms, SelectionParams, TermSet};
use crate::textfmt::FORMAT_VERSION;
use crate::{Error, Result};

pub const TERMS_FILE: &str = "terms.tsv";
pub const MATRIX_FILE: &str = "sigma.bin";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const TOPICS_FILE: &str = "topics.jsonl";
pub const REPORT_FILE: &str = "report.svg";
pub const GRID_FILE: &str = "grid.tsv";
pub const COHERENCE_FILE: &str = "coherence.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Prefix of environment variables overriding config keys.
pub const ENV_PREFIX: &str = "PDC_";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub fdr: f64,
    pub min_df: u64,
    pub freq_cap: usize,
    pub thr: usize,
    pub del: f64,
    pub k_seeds: usize,
    pub max_passes: usize,
    pub rng_seed: u64,
    pub top_docs: usize,
    pub n_values: Vec<usize>,
    pub url_template: String,
    /// Largest term count the matrix builder accepts.
    pub max_order: usize,
    pub factor_floor: f64,
    pub polish: bool,
    pub cell_width: usize,
    pub cell_height: usize,
    pub color_background: String,
    pub color_blue: String,
    pub color_green: String,
    pub color_red: String,
    pub popup_terms: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let style = ReportStyle::default();
        let engine = EngineParams::default();
        let select = SelectionParams::default();
        PipelineConfig {
            fdr: select.fdr,
            min_df: select.min_df,
            freq_cap: select.freq_cap,
            thr: 100,
            del: 0.5,
            k_seeds: engine.k_seeds,
            max_passes: engine.max_passes,
            rng_seed: engine.rng_seed,
            top_docs: 100,
            n_values: vec![5, 10, 20],
            url_template: style.url_template,
            max_order: 20_000,
            factor_floor: engine.factor_floor,
            polish: engine.polish,
            cell_width: style.cell_width,
            cell_height: style.cell_height,
            color_background: style.background,
            color_blue: style.blue,
            color_green: style.green,
            color_red: style.red,
            popup_terms: style.popup_terms,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl PipelineConfig {
    pub const KEYS: &'static [&'static str] = &[
        "fdr",
        "min_df",
        "freq_cap",
        "thr",
        "del",
        "k_seeds",
        "max_passes",
        "rng_seed",
        "top_docs",
        "n_values",
        "url_template",
        "max_order",
        "factor_floor",
        "polish",
        "cell_width",
        "cell_height",
        "color_background",
        "color_blue",
        "color_green",
        "color_red",
        "popup_terms",
    ];

    /// Sets one key from its text form. `seed` is accepted for `rng_seed`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "fdr" => self.fdr = parse_value(key, v)?,
            "min_df" => self.min_df = parse_value(key, v)?,
            "freq_cap" => self.freq_cap = parse_value(key, v)?,
            "thr" => self.thr = parse_value(key, v)?,
            "del" => self.del = parse_value(key, v)?,
            "k_seeds" => self.k_seeds = parse_value(key, v)?,
            "max_passes" => self.max_passes = parse_value(key, v)?,
            "rng_seed" | "seed" => self.rng_seed = parse_value(key, v)?,
            "top_docs" => self.top_docs = parse_value(key, v)?,
            "n_values" => {
                self.n_values = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_value(key, s))
                    .collect::<Result<_>>()?
            }
            "url_template" => self.url_template = v.to_string(),
            "max_order" => self.max_order = parse_value(key, v)?,
            "factor_floor" => self.factor_floor = parse_value(key, v)?,
            "polish" => self.polish = parse_value(key, v)?,
            "cell_width" => self.cell_width = parse_value(key, v)?,
            "cell_height" => self.cell_height = parse_value(key, v)?,
            "color_background" => self.color_background = v.to_string(),
            "color_blue" => self.color_blue = v.to_string(),
            "color_green" => self.color_green = v.to_string(),
            "color_red" => self.color_red = v.to_string(),
            "popup_terms" => self.popup_terms = parse_value(key, v)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", idx + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("config line {}: {e}", idx + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(Error::at(path))?;
        self.apply_text(&text)
    }

    /// Applies `PDC_<KEY>` variables from `vars`, e.g. `PDC_THR=50`.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<()> {
        for (name, value) in vars {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else { continue };
            let key = key.to_ascii_lowercase();
            if Self::KEYS.contains(&key.as_str()) || key == "seed" {
                self.set(&key, &value)
                    .map_err(|e| Error::Config(format!("{name}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Defaults, then the file, then the environment, then `overrides`.
    pub fn resolve<I>(file: Option<&Path>, env: I, overrides: &[(String, String)]) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        cfg.apply_env(env)?;
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.fdr > 0.0 && self.fdr < 1.0) {
            return bad("fdr must lie in (0, 1)");
        }
        if self.thr < 1 {
            return bad("thr must be at least 1");
        }
        if !(self.del > 0.0 && self.del.is_finite()) {
            return bad("del must be positive");
        }
        if self.k_seeds < 1 || self.max_passes < 1 {
            return bad("k_seeds and max_passes must be at least 1");
        }
        if self.n_values.is_empty() || self.n_values.iter().any(|&n| n < 2) {
            return bad("n_values must be a nonempty list of integers ≥ 2");
        }
        if !self.factor_floor.is_finite() || self.factor_floor >= 0.0 {
            return bad("factor_floor must be negative");
        }
        if self.cell_width < 1 || self.cell_height < 1 {
            return bad("cell sizes must be at least 1");
        }
        Ok(())
    }

    pub fn selection(&self) -> SelectionParams {
        SelectionParams {
            fdr: self.fdr,
            min_df: self.min_df,
            freq_cap: self.freq_cap,
        }
    }

    pub fn engine(&self) -> EngineParams {
        EngineParams {
            k_seeds: self.k_seeds,
            max_passes: self.max_passes,
            rng_seed: self.rng_seed,
            factor_floor: self.factor_floor,
            polish: self.polish,
        }
    }

    pub fn style(&self) -> ReportStyle {
        ReportStyle {
            cell_width: self.cell_width,
            cell_height: self.cell_height,
            background: self.color_background.clone(),
            blue: self.color_blue.clone(),
            green: self.color_green.clone(),
            red: self.color_red.clone(),
            url_template: self.url_template.clone(),
            popup_terms: self.popup_terms,
            ..ReportStyle::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Corpus,
    Termselect,
    Affinity,
    Engine,
    Hierarchy,
    Layout,
    Coherence,
    Manifest,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Corpus => "corpus",
            Stage::Termselect => "termselect",
            Stage::Affinity => "affinity",
            Stage::Engine => "engine",
            Stage::Hierarchy => "hierarchy",
            Stage::Layout => "layout",
            Stage::Coherence => "coherence",
            Stage::Manifest => "manifest",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// An error tagged with the stage it came from.
#[derive(Debug, thiserror::Error)]
#[error("stage={stage}: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

pub type StageResult<T> = std::result::Result<T, PipelineError>;

trait AtStage<T> {
    fn at(self, stage: Stage) -> StageResult<T>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> StageResult<T> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(Error::at(path))?))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::at(dir))
}

/// Selects enriched terms of `fg` against `bg` and writes `terms.tsv`.
pub fn extract_terms(cfg: &PipelineConfig, fg: &Path, bg: &Path, out: &Path) -> StageResult<TermSet> {
    let corpus = Corpus::from_path(fg).at(Stage::Corpus)?;
    let background = DocFrequencies::from_path(bg).at(Stage::Termselect)?;
    ensure_dir(out).at(Stage::Termselect)?;
    let selection = select_terms(&corpus, &background, &cfg.selection()).at(Stage::Termselect)?;
    log::info!(
        "termselect: {} candidates, {} terms kept",
        selection.records.len(),
        selection.terms.len()
    );
    selection.terms.save(out.join(TERMS_FILE)).at(Stage::Termselect)?;
    Ok(selection.terms)
}

/// Writes the log-odds matrix of `terms` over `fg` to `sigma.bin`.
pub fn build_matrix(cfg: &PipelineConfig, fg: &Path, terms: &Path, out: &Path) -> StageResult<usize> {
    let corpus = Corpus::from_path(fg).at(Stage::Corpus)?;
    let terms = TermSet::load(terms).at(Stage::Affinity)?;
    ensure_dir(out).at(Stage::Affinity)?;
    build_matrix_file(&terms, &corpus, out.join(MATRIX_FILE), cfg.max_order).at(Stage::Affinity)?;
    Ok(terms.len())
}

/// Runs the multi-level splitting on a matrix file (binary or text) and
/// writes one snapshot per level.
pub fn cluster(cfg: &PipelineConfig, matrix: &Path, out: &Path) -> StageResult<Vec<LevelSnapshot>> {
    let m = SigmaMatrix::load(matrix).at(Stage::Engine)?;
    let run = super_split(&m, cfg.thr, cfg.del, &cfg.engine()).at(Stage::Engine)?;
    let dir = out.join(SNAPSHOT_DIR);
    ensure_dir(&dir).at(Stage::Engine)?;
    for stale in snapshot_files(&dir).at(Stage::Engine)? {
        fs::remove_file(&stale).map_err(Error::at(&stale)).at(Stage::Engine)?;
    }
    for s in &run.snapshots {
        s.save(dir.join(snapshot_file_name(s.level)), cfg.rng_seed)
            .at(Stage::Engine)?;
    }
    log::info!(
        "engine: {} levels, {} capped optimizations",
        run.snapshots.len(),
        run.stats.cap_hits
    );
    Ok(run.snapshots)
}

fn snapshot_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(Error::at(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("level_") && n.ends_with(".tsv"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Reads `level_NNN.tsv` snapshots from `dir`; levels must run 0..K.
pub fn load_snapshots(dir: &Path) -> Result<Vec<LevelSnapshot>> {
    let snaps = snapshot_files(dir)?
        .iter()
        .map(LevelSnapshot::load)
        .collect::<Result<Vec<_>>>()?;
    for (k, s) in snaps.iter().enumerate() {
        if s.level != k {
            return Err(Error::Inconsistent(format!(
                "snapshot levels are not contiguous from 0 (found level {} at position {k})",
                s.level
            )));
        }
    }
    Ok(snaps)
}

/// Collects clusters, ranks their terms and documents, and writes
/// `topics.jsonl`.
pub fn topics(
    cfg: &PipelineConfig,
    matrix: &Path,
    terms: &Path,
    snapshots: &Path,
    fg: &Path,
    out: &Path,
) -> StageResult<TopicsFile> {
    let corpus = Corpus::from_path(fg).at(Stage::Corpus)?;
    let m = SigmaMatrix::load(matrix).at(Stage::Hierarchy)?;
    let terms = TermSet::load(terms).at(Stage::Hierarchy)?;
    if terms.len() != m.order() {
        return Err(Error::Incompatible {
            what: "matrix file".into(),
            message: format!("order {} but {} terms", m.order(), terms.len()),
        })
        .at(Stage::Hierarchy);
    }
    let snaps = load_snapshots(snapshots).at(Stage::Hierarchy)?;
    let hierarchy = collect_clusters(&snaps, &m).at(Stage::Hierarchy)?;
    let names: Vec<String> = terms.terms().map(str::to_string).collect();
    let summaries = summarize(&hierarchy, &m, &names, &corpus, cfg.top_docs);
    let file = TopicsFile::new(&hierarchy, &summaries, cfg.rng_seed).at(Stage::Hierarchy)?;
    ensure_dir(out).at(Stage::Hierarchy)?;
    file.save(out.join(TOPICS_FILE)).at(Stage::Hierarchy)?;
    log::info!("hierarchy: {} topics over {} levels", file.topics.len(), file.levels);
    Ok(file)
}

/// Builds the grid and skyline from a topics file and writes `report.svg`
/// and `grid.tsv`.
pub fn layout(cfg: &PipelineConfig, topics: &Path, out: &Path) -> StageResult<Vec<ColoredBar>> {
    let file = TopicsFile::load(topics).at(Stage::Layout)?;
    let hierarchy = file.hierarchy();
    let grid = Grid::fill(&hierarchy).at(Stage::Layout)?;
    let bars = color_bars(&grid, &hierarchy).at(Stage::Layout)?;
    let svg = render_svg(&grid, &bars, &file.summaries(), &cfg.style());
    ensure_dir(out).at(Stage::Layout)?;
    let report = out.join(REPORT_FILE);
    fs::write(&report, svg).map_err(Error::at(&report)).at(Stage::Layout)?;
    let grid_path = out.join(GRID_FILE);
    let write_grid = || -> Result<()> {
        let mut w = create(&grid_path)?;
        grid.write_tsv(&mut w, &bars, file.seed)?;
        w.flush()?;
        Ok(())
    };
    write_grid().at(Stage::Layout)?;
    Ok(bars)
}

/// Scores the topics of a topics file against `reference` and writes
/// `coherence.tsv`.
pub fn coherence(cfg: &PipelineConfig, topics: &Path, reference: &Path, out: &Path) -> StageResult<CoherenceReport> {
    let file = TopicsFile::load(topics).at(Stage::Coherence)?;
    let corpus = Corpus::from_path(reference).at(Stage::Corpus)?;
    let report = coherence::evaluate(&file.summaries(), &corpus, &cfg.n_values).at(Stage::Coherence)?;
    ensure_dir(out).at(Stage::Coherence)?;
    let path = out.join(COHERENCE_FILE);
    let write = || -> Result<()> {
        let mut w = create(&path)?;
        report.write_tsv(&mut w, file.seed)?;
        w.flush()?;
        Ok(())
    };
    write().at(Stage::Coherence)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    /// Absent when the file could not be read.
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactDigest {
    pub name: String,
    pub sha256: String,
}

/// Provenance record written next to the artifacts of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub kind: &'static str,
    pub version: u32,
    /// `ok` or `failed`.
    pub status: &'static str,
    pub failed_stage: Option<Stage>,
    pub error: Option<String>,
    pub seed: u64,
    pub config: PipelineConfig,
    pub inputs: Vec<InputDigest>,
    pub terms: Option<usize>,
    pub levels: Option<usize>,
    pub topics: Option<usize>,
    /// Artifacts present when the run ended; partial if the run failed.
    pub artifacts: Vec<ArtifactDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(Error::at(path))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(Error::at(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn artifact_digests(out: &Path) -> Vec<ArtifactDigest> {
    let mut names: Vec<String> = [TERMS_FILE, MATRIX_FILE, TOPICS_FILE, REPORT_FILE, GRID_FILE, COHERENCE_FILE]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if let Ok(files) = snapshot_files(&out.join(SNAPSHOT_DIR)) {
        for f in files {
            if let Some(name) = f.file_name().and_then(|n| n.to_str()) {
                names.push(format!("{SNAPSHOT_DIR}/{name}"));
            }
        }
    }
    names.sort();
    names
        .into_iter()
        .filter_map(|name| {
            sha256_file(&out.join(&name))
                .ok()
                .map(|sha256| ArtifactDigest { name, sha256 })
        })
        .collect()
}

/// What a successful [`run`] produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub terms: usize,
    pub levels: usize,
    pub topics: usize,
    pub bars: usize,
    pub manifest: Manifest,
}

/// Runs every stage in order and writes `manifest.json`, also on failure.
pub fn run(cfg: &PipelineConfig, fg: &Path, bg: &Path, out: &Path) -> StageResult<RunSummary> {
    let start = Instant::now();
    let inputs = [("foreground", fg), ("background", bg)]
        .iter()
        .map(|(role, p)| InputDigest {
            role: role.to_string(),
            path: p.display().to_string(),
            sha256: sha256_file(p).ok(),
        })
        .collect();
    let mut manifest = Manifest {
        kind: "pdc-manifest",
        version: FORMAT_VERSION,
        status: "failed",
        failed_stage: None,
        error: None,
        seed: cfg.rng_seed,
        config: cfg.clone(),
        inputs,
        terms: None,
        levels: None,
        topics: None,
        artifacts: Vec::new(),
    };
    // Clear artifacts of an earlier run so a failure cannot leave stale files
    // looking current.
    for name in [TERMS_FILE, MATRIX_FILE, TOPICS_FILE, REPORT_FILE, GRID_FILE, COHERENCE_FILE, MANIFEST_FILE] {
        let _ = fs::remove_file(out.join(name));
    }
    let result = run_stages(cfg, fg, bg, out, &mut manifest);
    if let Err(e) = &result {
        manifest.failed_stage = Some(e.stage);
        manifest.error = Some(e.source.to_string());
    } else {
        manifest.status = "ok";
    }
    manifest.artifacts = artifact_digests(out);
    let write = || -> Result<()> {
        ensure_dir(out)?;
        let path = out.join(MANIFEST_FILE);
        let mut w = create(&path)?;
        serde_json::to_writer_pretty(&mut w, &manifest).map_err(std::io::Error::from)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    };
    let written = write().at(Stage::Manifest);
    log::info!("run finished in {:.2?}", start.elapsed());
    let (terms, levels, topics, bars) = result?;
    written?;
    Ok(RunSummary {
        terms,
        levels,
        topics,
        bars,
        manifest,
    })
}

fn run_stages(
    cfg: &PipelineConfig,
    fg: &Path,
    bg: &Path,
    out: &Path,
    manifest: &mut Manifest,
) -> StageResult<(usize, usize, usize, usize)> {
    let terms = extract_terms(cfg, fg, bg, out)?;
    manifest.terms = Some(terms.len());
    let terms_path = out.join(TERMS_FILE);
    build_matrix(cfg, fg, &terms_path, out)?;
    let matrix = out.join(MATRIX_FILE);
    let snaps = cluster(cfg, &matrix, out)?;
    manifest.levels = Some(snaps.len());
    let file = topics(cfg, &matrix, &terms_path, &out.join(SNAPSHOT_DIR), fg, out)?;
    manifest.topics = Some(file.topics.len());
    let topics_path = out.join(TOPICS_FILE);
    let bars = layout(cfg, &topics_path, out)?;
    coherence(cfg, &topics_path, fg, out)?;
    Ok((terms.len(), snaps.len(), file.topics.len(), bars.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.thr, cfg.del, cfg.fdr, cfg.k_seeds, cfg.max_passes), (100, 0.5, 0.01, 10, 30));
        assert_eq!(cfg.n_values, vec![5, 10, 20]);
    }

    #[test]
    fn precedence_cli_env_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pdc.conf");
        fs::write(&path, "# run\nthr = 50\ndel=0.25\nn_values = 2, 3\nfdr=0.05\n").unwrap();
        let env = vec![("PDC_DEL".to_string(), "0.75".to_string()), ("HOME".into(), "/x".into())];
        let cfg = PipelineConfig::resolve(Some(&path), env, &[("fdr".into(), "0.02".into())]).unwrap();
        assert_eq!(cfg.thr, 50);
        assert_eq!(cfg.del, 0.75);
        assert_eq!(cfg.fdr, 0.02);
        assert_eq!(cfg.n_values, vec![2, 3]);
    }

    #[test]
    fn invalid_config() {
        let mut cfg = PipelineConfig::default();
        assert!(cfg.set("nope", "1").is_err());
        assert!(cfg.set("thr", "x").is_err());
        cfg.thr = 0;
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig { fdr: 1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig { del: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
