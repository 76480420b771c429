//! Parameter sweeps over `(m, r, q, n)`, their CSV and SVG output, and
//! threshold extraction from the resulting error curves.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{
    decode, exact_error_rate, for_each_subset, binomial_count, Observation, DEFAULT_ENUMERATION_BUDGET, DEFAULT_LOCATION_BUDGET,
};
use crate::error::{Error, Result};
use crate::model::{generate_source, product, ModelParams, SeedSpec, Semiring};
use crate::sampling::{coverage_check, normal_ci, sample_locations, samples_for_alpha, LocationSequence, Z95};

pub const CSV_HEADER: &str = "m,r,q,semiring,n,alpha,trials,failures,pe_hat,ci95_lo,ci95_hi,coverage_fail_hat,seed,mode,runtime_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    pub m: usize,
    pub r: usize,
    pub q: u64,
    #[serde(default)]
    pub semiring: Semiring,
}

impl SweepPoint {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.m, self.r, self.q, self.semiring)
    }
}

/// Sample counts to evaluate at every point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NGrid {
    /// The listed `n` values.
    Explicit(Vec<usize>),
    /// `n = ceil(alpha m ln m)` clamped to `m^2`, per listed alpha.
    Alpha(Vec<f64>),
    /// Every `n` from 0 to `m^2`.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Exact,
    Mc,
}

fn default_trials() -> u64 {
    100
}
fn default_enumeration_budget() -> u128 {
    DEFAULT_ENUMERATION_BUDGET
}
fn default_location_budget() -> u128 {
    DEFAULT_LOCATION_BUDGET
}
fn default_target_pe() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputNames {
    #[serde(default = "OutputNames::default_csv")]
    pub csv: String,
    #[serde(default = "OutputNames::default_svg")]
    pub svg: String,
    #[serde(default = "OutputNames::default_thresholds")]
    pub thresholds: String,
}

impl OutputNames {
    fn default_csv() -> String {
        "results.csv".into()
    }
    fn default_svg() -> String {
        "pe_curve.svg".into()
    }
    fn default_thresholds() -> String {
        "thresholds.csv".into()
    }
}

impl Default for OutputNames {
    fn default() -> Self {
        OutputNames { csv: Self::default_csv(), svg: Self::default_svg(), thresholds: Self::default_thresholds() }
    }
}

/// Sweep configuration, read from JSON. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub points: Vec<SweepPoint>,
    pub n_grid: NGrid,
    pub mode: SweepMode,
    #[serde(default = "default_trials")]
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default = "default_enumeration_budget")]
    pub enumeration_budget: u128,
    #[serde(default = "default_location_budget")]
    pub location_budget: u128,
    #[serde(default = "default_target_pe")]
    pub target_pe: f64,
    /// Wall-clock timings make output nondeterministic, so they are opt-in.
    #[serde(default)]
    pub record_runtime: bool,
    #[serde(default)]
    pub log_y: bool,
    #[serde(default)]
    pub outputs: OutputNames,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: SweepConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidParams("sweep needs at least one point".into()));
        }
        for p in &self.points {
            p.params()?;
        }
        if self.trials == 0 {
            return Err(Error::InvalidParams("trials must be at least 1".into()));
        }
        if let NGrid::Alpha(alphas) = &self.n_grid {
            if let Some(a) = alphas.iter().find(|a| !a.is_finite() || **a < 0.0) {
                return Err(Error::InvalidParams(format!("alpha must be finite and non-negative, got {a}")));
            }
        }
        if !(0.0..=1.0).contains(&self.target_pe) {
            return Err(Error::InvalidParams(format!("target_pe must lie in [0, 1], got {}", self.target_pe)));
        }
        Ok(())
    }

    fn grid_for(&self, m: usize) -> Vec<(usize, Option<f64>)> {
        match &self.n_grid {
            NGrid::Explicit(ns) => ns.iter().map(|&n| (n, None)).collect(),
            NGrid::Alpha(alphas) => alphas.iter().map(|&a| (samples_for_alpha(m, a), Some(a))).collect(),
            NGrid::All => (0..=m * m).map(|n| (n, None)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowMode {
    Exact,
    Mc,
    /// The point could not be evaluated within its budgets.
    Skipped,
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub m: usize,
    pub r: usize,
    pub q: u64,
    pub semiring: Semiring,
    pub n: usize,
    pub alpha: Option<f64>,
    pub trials: Option<u128>,
    pub failures: Option<u128>,
    pub pe_hat: Option<f64>,
    pub ci95_lo: Option<f64>,
    pub ci95_hi: Option<f64>,
    pub coverage_fail_hat: Option<f64>,
    pub seed: u64,
    pub mode: RowMode,
    pub runtime_ms: Option<u64>,
}

impl ResultRow {
    fn skipped(point: &SweepPoint, n: usize, alpha: Option<f64>, seed: u64) -> Self {
        ResultRow {
            m: point.m,
            r: point.r,
            q: point.q,
            semiring: point.semiring,
            n,
            alpha,
            trials: None,
            failures: None,
            pe_hat: None,
            ci95_lo: None,
            ci95_hi: None,
            coverage_fail_hat: None,
            seed,
            mode: RowMode::Skipped,
            runtime_ms: None,
        }
    }

    /// Numeric column by CSV name.
    pub fn field(&self, name: &str) -> Option<f64> {
        match name {
            "m" => Some(self.m as f64),
            "r" => Some(self.r as f64),
            "q" => Some(self.q as f64),
            "n" => Some(self.n as f64),
            "alpha" => self.alpha,
            "trials" => self.trials.map(|t| t as f64),
            "failures" => self.failures.map(|f| f as f64),
            "pe_hat" => self.pe_hat,
            "ci95_lo" => self.ci95_lo,
            "ci95_hi" => self.ci95_hi,
            "coverage_fail_hat" => self.coverage_fail_hat,
            "seed" => Some(self.seed as f64),
            "runtime_ms" => self.runtime_ms.map(|t| t as f64),
            _ => None,
        }
    }

    fn series_key(&self) -> SeriesKey {
        (self.m, self.r, self.q, self.semiring)
    }
}

/// `(m, r, q, semiring)`.
type SeriesKey = (usize, usize, u64, Semiring);

fn elapsed_ms(start: Instant, record: bool) -> Option<u64> {
    record.then(|| start.elapsed().as_millis() as u64)
}

/// Runs every `(point, n)` pair. Output order is `(point, grid position)`
/// and does not depend on the thread pool.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for (index, point) in config.points.iter().enumerate() {
        let params = point.params()?;
        let grid = config.grid_for(point.m);
        let point_rows = match config.mode {
            SweepMode::Exact => exact_point(config, point, &params, &grid),
            SweepMode::Mc => mc_point(config, index as u64, point, &params, &grid),
        }?;
        rows.extend(point_rows);
    }
    Ok(rows)
}

fn exact_point(config: &SweepConfig, point: &SweepPoint, params: &ModelParams, grid: &[(usize, Option<f64>)]) -> Result<Vec<ResultRow>> {
    let m = point.m;
    grid.iter()
        .map(|&(n, alpha)| {
            let start = Instant::now();
            let report = match exact_error_rate(params, n, config.enumeration_budget, config.location_budget) {
                Ok(rep) => rep,
                Err(Error::BudgetExceeded { .. } | Error::TooManySamples { .. }) => {
                    return Ok(ResultRow::skipped(point, n, alpha, config.master_seed));
                }
                Err(e) => return Err(e),
            };
            let subsets = binomial_count((m * m) as u64, n as u64);
            let mut uncovered = 0u64;
            for_each_subset(m * m, n, |cells| {
                let locs = LocationSequence::from_cell_indices(m, cells).expect("distinct cells");
                uncovered += u64::from(!coverage_check(&locs, point.r).in_g);
            });
            Ok(ResultRow {
                m,
                r: point.r,
                q: point.q,
                semiring: point.semiring,
                n,
                alpha,
                trials: Some(report.trials),
                failures: Some(report.failures),
                pe_hat: Some(report.pe),
                ci95_lo: Some(report.pe),
                ci95_hi: Some(report.pe),
                coverage_fail_hat: Some(uncovered as f64 / subsets as f64),
                seed: config.master_seed,
                mode: RowMode::Exact,
                runtime_ms: elapsed_ms(start, config.record_runtime),
            })
        })
        .collect()
}

/// Per-trial outcome at each grid position: (decode failed, coverage failed).
type TrialOutcome = Vec<(bool, bool)>;

fn mc_point(config: &SweepConfig, index: u64, point: &SweepPoint, params: &ModelParams, grid: &[(usize, Option<f64>)]) -> Result<Vec<ResultRow>> {
    let m = point.m;
    let cells = m * m;
    let over_budget = params.num_factor_pairs() > config.enumeration_budget;
    let evaluable: Vec<bool> = grid.iter().map(|&(n, _)| !over_budget && n <= cells).collect();
    let n_max = grid.iter().zip(&evaluable).filter(|(_, &ok)| ok).map(|(&(n, _), _)| n).max();
    let Some(n_max) = n_max else {
        return Ok(grid.iter().map(|&(n, a)| ResultRow::skipped(point, n, a, config.master_seed)).collect());
    };

    // Ascending positions so a unique decode can be carried forward: a
    // longer prefix only shrinks the consistent set.
    let mut ascending: Vec<usize> = (0..grid.len()).filter(|&i| evaluable[i]).collect();
    ascending.sort_by_key(|&i| grid[i].0);

    let point_seed = SeedSpec::new(config.master_seed, 0).child(index);
    let start = Instant::now();
    let outcomes: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .map(|t| -> Result<TrialOutcome> {
            let trial = point_seed.child(t);
            let s = product(&generate_source(params, trial.child(0)), params)?;
            let full = sample_locations(m, n_max, trial.child(1))?;
            let mut out = vec![(false, false); grid.len()];
            let mut solved = false;
            for &i in &ascending {
                let locs = full.prefix(grid[i].0);
                let covered = coverage_check(&locs, point.r).in_g;
                if !solved {
                    let outcome = decode(&Observation::reveal(&s, &locs), params, config.enumeration_budget)?;
                    solved = outcome.is_unique() && outcome.reconstruction == s;
                }
                out[i] = (!solved, !covered);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let runtime = elapsed_ms(start, config.record_runtime);

    let trials = config.trials;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &(n, alpha))| {
            if !evaluable[i] {
                return ResultRow::skipped(point, n, alpha, config.master_seed);
            }
            let failures = outcomes.iter().filter(|o| o[i].0).count() as u64;
            let uncovered = outcomes.iter().filter(|o| o[i].1).count() as u64;
            let (lo, hi) = normal_ci(failures, trials, Z95);
            ResultRow {
                m,
                r: point.r,
                q: point.q,
                semiring: point.semiring,
                n,
                alpha,
                trials: Some(trials as u128),
                failures: Some(failures as u128),
                pe_hat: Some(failures as f64 / trials as f64),
                ci95_lo: Some(lo),
                ci95_hi: Some(hi),
                coverage_fail_hat: Some(uncovered as f64 / trials as f64),
                seed: config.master_seed,
                mode: RowMode::Mc,
                runtime_ms: runtime,
            }
        })
        .collect())
}

/// Writes the results table with the fixed header, header-only when empty.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_csv(rows, BufWriter::new(File::create(path)?))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::InvalidInput(format!("unexpected CSV header {:?}", header.join(","))));
    }
    Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn load_csv(path: &Path) -> Result<Vec<ResultRow>> {
    read_csv(File::open(path)?)
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Renders `y_field` against `x_field` as a self-contained SVG line chart,
/// one series per `(m, r, q, semiring)`. With `log_y`, non-positive values
/// are omitted.
pub fn render_svg_curve(rows: &[ResultRow], x_field: &str, y_field: &str, log_y: bool) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("cannot plot an empty table".into()));
    }
    if rows[0].field(x_field).is_none() && !is_numeric_field(x_field) {
        return Err(Error::InvalidInput(format!("unknown numeric column {x_field:?}")));
    }
    if !is_numeric_field(y_field) {
        return Err(Error::InvalidInput(format!("unknown numeric column {y_field:?}")));
    }

    let mut series: Vec<(SeriesKey, Vec<(f64, f64)>)> = Vec::new();
    for row in rows {
        let (Some(x), Some(y)) = (row.field(x_field), row.field(y_field)) else { continue };
        if log_y && y <= 0.0 {
            continue;
        }
        let y = if log_y { y.log10() } else { y };
        match series.iter_mut().find(|(k, _)| *k == row.series_key()) {
            Some((_, pts)) => pts.push((x, y)),
            None => series.push((row.series_key(), vec![(x, y)])),
        }
    }
    for (_, pts) in &mut series {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let (mut x0, mut x1) = bounds_of(all.iter().map(|p| p.0));
    let (mut y0, mut y1) = bounds_of(all.iter().map(|p| p.1));
    if !log_y && matches!(y_field, "pe_hat" | "ci95_lo" | "ci95_hi" | "coverage_fail_hat") {
        y0 = y0.min(0.0);
        y1 = y1.max(1.0);
    }
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 <= y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }

    let (width, height) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 30.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<line x1="{left}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#, top + plot_h, left + plot_w, top + plot_h);
    let _ = writeln!(svg, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.2}" stroke="black"/>"#, top + plot_h);
    for k in 0..=5 {
        let fx = x0 + (x1 - x0) * k as f64 / 5.0;
        let fy = y0 + (y1 - y0) * k as f64 / 5.0;
        let (px, py) = (sx(fx), sy(fy));
        let _ = writeln!(svg, r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, top + plot_h, top + plot_h + 5.0);
        let _ = writeln!(svg, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, top + plot_h + 18.0, tick_label(fx));
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{py:.2}" x2="{left}" y2="{py:.2}" stroke="black"/>"#, left - 5.0);
        let label = if log_y { format!("1e{}", tick_label(fy)) } else { tick_label(fy) };
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, left - 8.0, py + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_field}</text>"#, left + plot_w / 2.0, height - 10.0);
    let y_label = if log_y { format!("{y_field} (log10)") } else { y_field.to_string() };
    let _ = writeln!(svg, r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">{y_label}</text>"#, top + plot_h / 2.0, top + plot_h / 2.0);

    for (i, ((m, r, q, semiring), pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        }
        for &(x, y) in pts {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let ly = top + 15.0 + 18.0 * i as f64;
        let lx = left + plot_w + 15.0;
        let _ = writeln!(svg, r#"<rect x="{lx:.2}" y="{:.2}" width="10" height="10" fill="{color}"/>"#, ly - 9.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{ly:.2}">m={m} r={r} q={q} {semiring}</text>"#, lx + 15.0);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn is_numeric_field(name: &str) -> bool {
    CSV_HEADER.split(',').any(|h| h == name) && !matches!(name, "semiring" | "mode")
}

fn bounds_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

pub fn emit_svg_curve(rows: &[ResultRow], x_field: &str, y_field: &str, path: &Path, log_y: bool) -> Result<()> {
    fs::write(path, render_svg_curve(rows, x_field, y_field, log_y)?)?;
    Ok(())
}

/// Smallest `n` per series at which `pe_hat <= target_pe`, if any.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdEntry {
    pub m: usize,
    pub r: usize,
    pub q: u64,
    pub semiring: Semiring,
    pub n_star: Option<usize>,
    /// `c m` through the first series' threshold.
    pub ref_linear: Option<f64>,
    /// `c m ln m` through the first series' threshold.
    pub ref_m_log_m: Option<f64>,
}

pub fn threshold_table(rows: &[ResultRow], target_pe: f64) -> Vec<ThresholdEntry> {
    let mut order: Vec<SeriesKey> = Vec::new();
    let mut best: BTreeMap<usize, Option<usize>> = BTreeMap::new();
    for row in rows {
        let key = row.series_key();
        let idx = order.iter().position(|k| *k == key).unwrap_or_else(|| {
            order.push(key);
            order.len() - 1
        });
        let slot = best.entry(idx).or_insert(None);
        if let Some(pe) = row.pe_hat {
            if pe <= target_pe {
                *slot = Some(slot.map_or(row.n, |n: usize| n.min(row.n)));
            }
        }
    }

    let first = order.first().and_then(|k| best[&0].map(|n| (k.0 as f64, n as f64)));
    let linear = first.map(|(m, n)| n / m);
    let m_log_m = first.and_then(|(m, n)| (m > 1.0).then(|| n / (m * m.ln())));
    order
        .iter()
        .enumerate()
        .map(|(i, &(m, r, q, semiring))| ThresholdEntry {
            m,
            r,
            q,
            semiring,
            n_star: best[&i],
            ref_linear: linear.map(|c| c * m as f64),
            ref_m_log_m: m_log_m.map(|c| c * m as f64 * (m as f64).ln()),
        })
        .collect()
}

/// Like [`threshold_table`] but fails when some series never reaches the target.
pub fn threshold_estimate(rows: &[ResultRow], target_pe: f64) -> Result<Vec<ThresholdEntry>> {
    let table = threshold_table(rows, target_pe);
    if let Some(e) = table.iter().find(|e| e.n_star.is_none()) {
        return Err(Error::NoCrossing(format!("m={} r={} q={} {} at target {target_pe}", e.m, e.r, e.q, e.semiring)));
    }
    Ok(table)
}

pub fn write_thresholds_csv<W: Write>(entries: &[ThresholdEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in entries {
        w.serialize(e)?;
    }
    if entries.is_empty() {
        w.write_record(["m", "r", "q", "semiring", "n_star", "ref_linear", "ref_m_log_m"])?;
    }
    w.flush()?;
    Ok(())
}

/// Paths written by [`run_sweep_to_dir`].
#[derive(Debug, Clone)]
pub struct SweepOutputs {
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
    pub thresholds: PathBuf,
    pub rows: Vec<ResultRow>,
}

/// Runs the sweep and writes the results table, the `pe_hat` curve, and
/// the threshold table into `dir`.
pub fn run_sweep_to_dir(config: &SweepConfig, dir: &Path) -> Result<SweepOutputs> {
    let rows = run_sweep(config)?;
    fs::create_dir_all(dir)?;
    let csv = dir.join(&config.outputs.csv);
    emit_csv(&rows, &csv)?;
    let plottable = rows.iter().any(|r| r.pe_hat.is_some());
    let svg = if plottable {
        let path = dir.join(&config.outputs.svg);
        emit_svg_curve(&rows, "n", "pe_hat", &path, config.log_y)?;
        Some(path)
    } else {
        None
    };
    let thresholds = dir.join(&config.outputs.thresholds);
    write_thresholds_csv(&threshold_table(&rows, config.target_pe), BufWriter::new(File::create(&thresholds)?))?;
    Ok(SweepOutputs { csv, svg, thresholds, rows })
}
