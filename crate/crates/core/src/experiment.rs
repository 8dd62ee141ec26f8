//! Batch experiments: configuration files, single solves, parameter sweeps
//! and aggregation of sweep CSVs.
//!
//! A configuration is a TOML document with the node geometry, the budgets
//! and the problem size:
//!
//! ```toml
//! n_subcarriers = 64
//! n_antennas = 4
//! lambda_grid = 50
//!
//! [geometry]
//! s_et = { x = 0.0, y = 0.0 }
//! s_er = { x = 0.0, y = 5.0 }
//! p_it = { x = 0.0, y = 2.5 }
//! p_ir = { x = 5.0, y = 0.0 }
//! chi = 1e-3
//! d0 = 1.0
//! kappa = 3.0
//!
//! [budgets]
//! sigma2 = 1e-9
//! p_sum = 3.2
//! q_sum = 6.4
//! q_peak = 0.1
//! gamma = 1.28e-6
//! ```
//!
//! Every field of a file is required. Dotted-key overrides such as
//! `budgets.q_sum=0.4` or `geometry.s_et.x=-2` are applied on top.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::beamopt::{p1_solve_seeded, BeamformingSolution, P3Options, DEFAULT_GRID_POINTS};
use crate::benchmarks::{conventional_solve, mrt_solve, zf_solve};
use crate::error::{Error, Result};
use crate::linalg::{zeros, CVector};
use crate::scenario::{generate_scenario, Budgets, Geometry, Scenario};
use crate::waterfill::primary_sum_rate;

/// Version of the sweep CSV layout, see [`SweepRow`].
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_subcarriers: usize,
    pub n_antennas: usize,
    /// Levels in the proposed design's search, also used by MRT.
    pub lambda_grid: usize,
    pub geometry: Geometry,
    pub budgets: Budgets,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 64,
            n_antennas: 4,
            lambda_grid: DEFAULT_GRID_POINTS,
            geometry: Geometry::default(),
            budgets: Budgets::default(),
        }
    }
}

fn config_error(e: impl fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Parse `raw` as a TOML value, falling back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let (last, parents) = path.split_last().expect("split yields at least one piece");
    let mut table = root;
    for (depth, part) in parents.iter().enumerate() {
        table = match table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        {
            toml::Value::Table(t) => t,
            _ => {
                return Err(Error::Config(format!(
                    "override `{key}`: `{}` is not a table",
                    path[..=depth].join(".")
                )))
            }
        };
    }
    let mut value = override_value(raw.trim());
    // `budgets.q_sum=1` should not turn a float field into an integer.
    if let (Some(toml::Value::Float(_)), toml::Value::Integer(i)) = (table.get(*last), &value) {
        value = toml::Value::Float(*i as f64);
    }
    table.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Parse a complete configuration document.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(config_error)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    /// Load `path`, or start from the defaults when there is no file.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::from_toml(&text, overrides)
            }
            None => {
                let mut table = toml::Table::try_from(Self::default()).map_err(config_error)?;
                for o in overrides {
                    apply_override(&mut table, o)?;
                }
                Self::from_table(table)
            }
        }
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: Self = toml::Value::Table(table).try_into().map_err(config_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers == 0 {
            return Err(Error::Config("n_subcarriers must be positive".into()));
        }
        if self.n_antennas == 0 {
            return Err(Error::Config("n_antennas must be positive".into()));
        }
        if self.lambda_grid < 2 {
            return Err(Error::Config("lambda_grid must be at least 2".into()));
        }
        self.geometry.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn scenario(&self, seed: u64) -> Result<Scenario> {
        generate_scenario(&self.geometry, &self.budgets, self.n_subcarriers, self.n_antennas, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Proposed,
    Zf,
    Mrt,
    Conventional,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::Zf, Scheme::Mrt, Scheme::Conventional];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Zf => "zf",
            Scheme::Mrt => "mrt",
            Scheme::Conventional => "conventional",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}` (expected proposed, zf, mrt or conventional)")))
    }
}

/// Run one scheme. `warm` holds warm-start beamformers for the proposed design
/// and is ignored by the benchmarks.
pub fn solve_scheme(s: &Scenario, scheme: Scheme, lambda_grid: usize, warm: &[Vec<CVector>]) -> Result<BeamformingSolution> {
    match scheme {
        Scheme::Proposed => p1_solve_seeded(s, lambda_grid, &P3Options::default(), warm),
        Scheme::Zf => zf_solve(s),
        Scheme::Mrt => mrt_solve(s, lambda_grid),
        Scheme::Conventional => conventional_solve(s),
    }
}

/// Full result of one solve, as written by `solve`.
pub fn solve_record(s: &Scenario, scheme: Scheme, lambda_grid: usize) -> Result<Value> {
    let start = Instant::now();
    let sol = solve_scheme(s, scheme, lambda_grid, &[])?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let rate = primary_sum_rate(s, &sol.omegas)?;
    let powers: Vec<f64> = sol.omegas.iter().map(|w| w.norm_squared()).collect();
    Ok(json!({
        "scheme": scheme.name(),
        "total_W": sol.breakdown.total,
        "direct_W": sol.breakdown.direct,
        "reactive_W": sol.breakdown.reactive,
        "lambda": sol.lambda,
        "sum_rate_bpshz": rate,
        "feasible": sol.is_feasible(s),
        "primary_power_W": sol.primary_power,
        "interference_W": sol.interference,
        "secondary_power_W": powers,
        "residuals": sol.residuals,
        "diagnostics": sol.diagnostics,
        "wall_ms": wall_ms,
        "omegas": sol.omegas.iter()
            .map(|w| w.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "q_sum")]
    QSum,
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "etx_x")]
    EtxX,
    #[serde(rename = "antennas")]
    Antennas,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::QSum => "q_sum",
            Axis::Gamma => "gamma",
            Axis::EtxX => "etx_x",
            Axis::Antennas => "antennas",
        }
    }

    /// Values swept when none are given.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            Axis::QSum => vec![0.4, 0.8, 1.6, 3.2, 6.4],
            Axis::Gamma => vec![1.28e-6, 3.84e-6, 6.4e-6, 11.52e-6, 16.64e-6],
            Axis::EtxX => (-4..=4).map(f64::from).collect(),
            Axis::Antennas => vec![2.0, 4.0, 6.0, 8.0],
        }
    }

    /// Whether changing the value leaves the channel draws untouched.
    pub fn keeps_channels(self) -> bool {
        matches!(self, Axis::QSum | Axis::Gamma)
    }

    fn check(self, v: f64) -> Result<()> {
        let ok = match self {
            Axis::QSum | Axis::Gamma => v >= 0.0 && v.is_finite(),
            Axis::EtxX => v.is_finite(),
            Axis::Antennas => v >= 1.0 && v.fract() == 0.0 && v <= 4096.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid {} value {v}", self.name())))
        }
    }

    /// The configuration at one value of this axis.
    pub fn apply(self, cfg: &ExperimentConfig, v: f64) -> Result<ExperimentConfig> {
        self.check(v)?;
        let mut c = cfg.clone();
        match self {
            Axis::QSum => c.budgets.q_sum = v,
            Axis::Gamma => c.budgets.gamma = v,
            Axis::EtxX => c.geometry.s_et.x = v,
            Axis::Antennas => c.n_antennas = v as usize,
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "q_sum" => Ok(Axis::QSum),
            "gamma" => Ok(Axis::Gamma),
            "etx_x" => Ok(Axis::EtxX),
            "antennas" => Ok(Axis::Antennas),
            other => Err(Error::Config(format!(
                "unknown axis `{other}` (expected q_sum, gamma, etx_x or antennas)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub schemes: Vec<Scheme>,
    /// Seed each proposed solve with the solution at the previous axis value.
    /// Only used on axes that enlarge the feasible set as the value grows.
    pub warm_start: bool,
}

impl SweepSpec {
    pub fn new(axis: Axis, seeds: Vec<u64>) -> Self {
        Self {
            axis,
            values: axis.default_values(),
            seeds,
            schemes: Scheme::ALL.to_vec(),
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    /// The scheme does not apply, e.g. zero-forcing with one antenna.
    Infeasible,
    Failed,
}

/// One CSV row; field names are the column headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: Axis,
    pub axis_value: f64,
    pub seed: u64,
    pub scheme: Scheme,
    #[serde(rename = "total_W")]
    pub total_w: f64,
    #[serde(rename = "direct_W")]
    pub direct_w: f64,
    #[serde(rename = "reactive_W")]
    pub reactive_w: f64,
    pub lambda: f64,
    pub sum_rate_bpshz: f64,
    pub iterations: usize,
    pub wall_ms: f64,
    pub status: Status,
}

/// A row plus the beamformers behind it.
struct Cell {
    row: SweepRow,
    omegas: Option<Vec<CVector>>,
}

fn run_cell(s: &Scenario, axis: Axis, value: f64, seed: u64, scheme: Scheme, grid: usize, warm: &[Vec<CVector>]) -> Cell {
    let start = Instant::now();
    let outcome = solve_scheme(s, scheme, grid, warm).and_then(|sol| Ok((primary_sum_rate(s, &sol.omegas)?, sol)));
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut row = SweepRow {
        axis,
        axis_value: value,
        seed,
        scheme,
        total_w: f64::NAN,
        direct_w: f64::NAN,
        reactive_w: f64::NAN,
        lambda: f64::NAN,
        sum_rate_bpshz: f64::NAN,
        iterations: 0,
        wall_ms,
        status: Status::Failed,
    };
    match outcome {
        Ok((rate, sol)) => {
            row.total_w = sol.breakdown.total;
            row.direct_w = sol.breakdown.direct;
            row.reactive_w = sol.breakdown.reactive;
            row.lambda = sol.lambda;
            row.sum_rate_bpshz = rate;
            row.iterations = sol.diagnostics.iterations;
            row.status = if sol.is_feasible(s) { Status::Ok } else { Status::Failed };
            Cell { row, omegas: Some(sol.omegas) }
        }
        Err(e) => {
            if matches!(e, Error::ZeroForcingInfeasible(_)) {
                row.status = Status::Infeasible;
            } else {
                log::warn!("{axis}={value} seed {seed} {scheme}: {e}");
            }
            Cell { row, omegas: None }
        }
    }
}

/// Pad beamformers with zero entries for extra antennas.
fn pad(omegas: &[CVector], m: usize) -> Vec<CVector> {
    omegas
        .iter()
        .map(|w| {
            let mut v = zeros(m);
            v.rows_mut(0, w.len().min(m)).copy_from(&w.rows(0, w.len().min(m)));
            v
        })
        .collect()
}

/// Run every (value, seed, scheme) cell on `jobs` worker threads. Rows come
/// back sorted by value position, seed position and scheme position in
/// `spec`, whatever the completion order.
pub fn run_sweep(cfg: &ExperimentConfig, spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>> {
    check_spec(spec)?;
    let configs: Vec<ExperimentConfig> = spec.values.iter().map(|&v| spec.axis.apply(cfg, v)).collect::<Result<_>>()?;
    // channel draws per (value, seed); shared across values when the axis allows it
    let scenarios: Vec<Vec<Scenario>> = if spec.axis.keeps_channels() {
        let base: Vec<Scenario> = spec.seeds.iter().map(|&seed| cfg.scenario(seed)).collect::<Result<_>>()?;
        configs
            .iter()
            .map(|c| base.iter().map(|s| s.with_budgets(&c.budgets)).collect())
            .collect()
    } else {
        configs
            .iter()
            .map(|c| spec.seeds.iter().map(|&seed| c.scenario(seed)).collect::<Result<_>>())
            .collect::<Result<_>>()?
    };
    run_cells(&scenarios, spec, cfg.lambda_grid, jobs)
}

/// Sweep a budget of one stored scenario. Only `q_sum` and `gamma` apply, and
/// `spec.seeds` must hold a single label that is copied into the rows.
pub fn run_sweep_fixed(s: &Scenario, spec: &SweepSpec, lambda_grid: usize, jobs: usize) -> Result<Vec<SweepRow>> {
    check_spec(spec)?;
    if !spec.axis.keeps_channels() {
        return Err(Error::Config(format!(
            "axis {} changes the channels and needs a config, not a scenario file",
            spec.axis
        )));
    }
    if spec.seeds.len() != 1 {
        return Err(Error::Config("a stored scenario has a single realization; pass one seed label".into()));
    }
    let mut base = ExperimentConfig::default();
    base.budgets = s.budgets();
    let scenarios: Vec<Vec<Scenario>> = spec
        .values
        .iter()
        .map(|&v| Ok(vec![s.with_budgets(&spec.axis.apply(&base, v)?.budgets)]))
        .collect::<Result<_>>()?;
    run_cells(&scenarios, spec, lambda_grid, jobs)
}

fn check_spec(spec: &SweepSpec) -> Result<()> {
    if spec.values.is_empty() || spec.seeds.is_empty() || spec.schemes.is_empty() {
        return Err(Error::Config("a sweep needs at least one value, seed and scheme".into()));
    }
    Ok(())
}

fn run_cells(scenarios: &[Vec<Scenario>], spec: &SweepSpec, grid: usize, jobs: usize) -> Result<Vec<SweepRow>> {
    // Warm starts need the value order to grow the feasible set.
    let growing = matches!(spec.axis, Axis::QSum | Axis::Gamma | Axis::Antennas);
    let chained = spec.warm_start && growing;
    let mut order: Vec<usize> = (0..spec.values.len()).collect();
    order.sort_by(|&a, &b| spec.values[a].total_cmp(&spec.values[b]));

    type Key = (usize, usize, usize);
    let mut tasks: Vec<Vec<Key>> = Vec::new();
    for (si, _) in spec.seeds.iter().enumerate() {
        for (ki, &scheme) in spec.schemes.iter().enumerate() {
            if chained && scheme == Scheme::Proposed {
                tasks.push(order.iter().map(|&vi| (vi, si, ki)).collect());
            } else {
                tasks.extend((0..spec.values.len()).map(|vi| vec![(vi, si, ki)]));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut rows: Vec<(Key, SweepRow)> = pool.install(|| {
        tasks
            .par_iter()
            .flat_map_iter(|chain| {
                let mut previous: Option<Vec<CVector>> = None;
                chain
                    .iter()
                    .map(|&(vi, si, ki)| {
                        let s = &scenarios[vi][si];
                        let warm: Vec<Vec<CVector>> = previous.iter().map(|w| pad(w, s.n_antennas)).collect();
                        let cell = run_cell(s, spec.axis, spec.values[vi], spec.seeds[si], spec.schemes[ki], grid, &warm);
                        if cell.omegas.is_some() {
                            previous = cell.omegas;
                        }
                        ((vi, si, ki), cell.row)
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    });
    rows.sort_by_key(|(k, _)| *k);
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Mean and sample standard deviation of one quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub axis: Axis,
    pub axis_value: f64,
    pub scheme: Scheme,
    /// Rows with status `ok` that entered the statistics.
    pub count: usize,
    pub total: Stat,
    pub direct: Stat,
    pub reactive: Stat,
}

/// Group rows with status `ok` by (axis, value, scheme).
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Axis, u64, Scheme), Vec<&SweepRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.status == Status::Ok) {
        // total order on the value; all values here are finite
        let key = (r.axis, order_key(r.axis_value), r.scheme);
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let pick = |f: fn(&SweepRow) -> f64| Stat::of(&g.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                axis: g[0].axis,
                axis_value: g[0].axis_value,
                scheme: g[0].scheme,
                count: g.len(),
                total: pick(|r| r.total_w),
                direct: pick(|r| r.direct_w),
                reactive: pick(|r| r.reactive_w),
            }
        })
        .collect()
}

fn order_key(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

/// Files written by [`compare_dir`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompareOutput {
    pub summary: Vec<SummaryRow>,
    pub summary_path: PathBuf,
    pub plot_files: Vec<PathBuf>,
}

/// Aggregate every `*.csv` sweep file in `dir` (except earlier summaries) into
/// `summary.csv` and one `<axis>_<scheme>.dat` file of `value mean_total`
/// pairs per curve, all written to `out`.
pub fn compare_dir(dir: &Path, out: &Path) -> Result<CompareOutput> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && p.file_name().is_some_and(|n| n != "summary.csv"))
        .collect();
    files.sort();
    let mut rows = Vec::new();
    for f in &files {
        rows.extend(read_rows(f)?);
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("no sweep rows found in {}", dir.display())));
    }
    let summary = summarize(&rows);
    fs::create_dir_all(out)?;
    let summary_path = out.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary_path)?;
    w.write_record([
        "axis", "axis_value", "scheme", "count", "total_mean_W", "total_std_W", "direct_mean_W", "direct_std_W",
        "reactive_mean_W", "reactive_std_W",
    ])?;
    for r in &summary {
        w.write_record([
            r.axis.name().to_string(),
            r.axis_value.to_string(),
            r.scheme.name().to_string(),
            r.count.to_string(),
            r.total.mean.to_string(),
            r.total.std.to_string(),
            r.direct.mean.to_string(),
            r.direct.std.to_string(),
            r.reactive.mean.to_string(),
            r.reactive.std.to_string(),
        ])?;
    }
    w.flush()?;
    let mut curves: BTreeMap<(Axis, Scheme), String> = BTreeMap::new();
    for r in &summary {
        let text = curves.entry((r.axis, r.scheme)).or_default();
        text.push_str(&format!("{} {}\n", r.axis_value, r.total.mean));
    }
    let mut plot_files = Vec::new();
    for ((axis, scheme), text) in curves {
        let p = out.join(format!("{axis}_{scheme}.dat"));
        fs::write(&p, format!("# {axis} total_W\n{text}"))?;
        plot_files.push(p);
    }
    Ok(CompareOutput {
        summary,
        summary_path,
        plot_files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_follow_dotted_paths() {
        let cfg = ExperimentConfig::load(None, &["budgets.q_sum=1".into(), "geometry.s_et.x=-2".into(), "n_subcarriers=8".into()])
            .unwrap();
        assert_eq!(cfg.budgets.q_sum, 1.0);
        assert_eq!(cfg.geometry.s_et.x, -2.0);
        assert_eq!(cfg.n_subcarriers, 8);
    }

    #[test]
    fn unknown_or_malformed_overrides_fail() {
        assert!(ExperimentConfig::load(None, &["budgets.bogus=1".into()]).is_err());
        assert!(ExperimentConfig::load(None, &["budgets".into()]).is_err());
        assert!(ExperimentConfig::load(None, &["n_antennas.x=1".into()]).is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml(), &[]).unwrap(), cfg);
    }

    #[test]
    fn names_parse_back() {
        for k in Scheme::ALL {
            assert_eq!(k.name().parse::<Scheme>().unwrap(), k);
        }
        for a in [Axis::QSum, Axis::Gamma, Axis::EtxX, Axis::Antennas] {
            assert_eq!(a.name().parse::<Axis>().unwrap(), a);
        }
    }

    #[test]
    fn value_order_key_is_monotone() {
        let vs = [-3.0, -0.5, 0.0, 1e-9, 2.0, 7.5];
        assert!(vs.windows(2).all(|w| order_key(w[0]) < order_key(w[1])));
    }

    #[test]
    fn padding_extends_with_zeros() {
        let w = vec![CVector::from_element(2, num_complex::Complex64::new(1.0, 0.5))];
        let p = pad(&w, 3);
        assert_eq!(p[0].len(), 3);
        assert_eq!(p[0][2], num_complex::Complex64::new(0.0, 0.0));
        assert_eq!(p[0][1], w[0][1]);
    }

    #[test]
    fn stats_use_the_sample_deviation() {
        let s = Stat::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[4.0]).std, 0.0);
    }
}
