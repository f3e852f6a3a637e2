//! Benchmark sweeps: grid expansion, per-cell execution and record I/O.
//!
//! A sweep expands a [`SweepConfig`] into cells indexed by manifold,
//! estimator, distortion, sample size, neighborhood size and seed. Cells that
//! share a cloud are evaluated together so that every estimator sees the same
//! points. Records come back in grid order whatever the thread count.

pub mod cli;
mod records;

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{covariance_stats, log_grid, relative_error, CovStats};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::estimators::{run_estimator_with_table, Estimator, LidResult};
use crate::linalg::derive_stream;
use crate::manifolds::{intrinsic_dim, sample, ManifoldSpec};
use crate::neighbors::knn;
use crate::perturb::{add_noise, squeeze, NoiseKind, NoiseSpec};

pub use records::{read_records, records_to_string, write_records, BenchmarkRecord, RecordFormat, CSV_HEADER, SCHEMA_VERSION};

/// How the neighborhood size relates to the sample size across a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepKind {
    /// Each estimator keeps its configured `k`; `N` varies.
    #[serde(rename = "FixK_SweepN")]
    FixKSweepN,
    /// Every `N` is crossed with every `k` of the grid.
    #[serde(rename = "FixN_SweepK")]
    FixNSweepK,
    /// `k = round(r N)` for each ratio `r`; `N` varies.
    #[serde(rename = "FixRatio_SweepN")]
    FixRatioSweepN,
}

/// One distortion setting of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistortionCell {
    None,
    Squeeze { epsilon: f64 },
    Noise { noise_kind: NoiseKind, sigma2: f64 },
}

impl DistortionCell {
    /// Value of the `distortion` record column.
    pub fn label(&self) -> String {
        match *self {
            DistortionCell::None => "none".into(),
            DistortionCell::Squeeze { epsilon } => format!("squeeze:{epsilon}"),
            DistortionCell::Noise { .. } => "noise".into(),
        }
    }

    /// Inverse of [`label`](Self::label) given the noise columns.
    pub fn from_columns(label: &str, sigma2: Option<f64>, kind: Option<NoiseKind>) -> Result<Self> {
        if label == "none" {
            return Ok(DistortionCell::None);
        }
        if let Some(eps) = label.strip_prefix("squeeze:") {
            let epsilon = eps.parse().map_err(|_| Error::Format(format!("bad squeeze label {label:?}")))?;
            return Ok(DistortionCell::Squeeze { epsilon });
        }
        match (label, sigma2, kind) {
            ("noise", Some(sigma2), Some(noise_kind)) => Ok(DistortionCell::Noise { noise_kind, sigma2 }),
            _ => Err(Error::Format(format!("bad distortion columns {label:?}"))),
        }
    }

    fn apply(&self, cloud: &PointCloud, seed: u64, tag: &str) -> Result<PointCloud> {
        match *self {
            DistortionCell::None => Ok(cloud.clone()),
            DistortionCell::Squeeze { epsilon } => {
                squeeze(cloud, epsilon, &derive_stream(seed, &format!("squeeze/{tag}/{epsilon}")))
            }
            DistortionCell::Noise { noise_kind, sigma2 } => add_noise(
                cloud,
                NoiseSpec { kind: noise_kind, sigma2 },
                &derive_stream(seed, &format!("noise/{tag}/{noise_kind}/{sigma2}")),
            ),
        }
    }
}

pub const DEFAULT_SEEDS: [u64; 3] = [0, 1, 2];
pub const DEFAULT_RATIOS: [f64; 6] = [0.08, 0.1, 0.15, 0.2, 0.5, 0.99];
/// DANCo cells above this sample size are skipped unless overridden.
pub const DANCO_MAX_N: usize = 2000;

fn default_n_grid() -> Vec<usize> {
    log_grid(100.0, 10_000.0, 7)
}
fn default_k_grid() -> Vec<usize> {
    log_grid(10.0, 1000.0, 7)
}
fn default_ratios() -> Vec<f64> {
    DEFAULT_RATIOS.to_vec()
}
fn default_distortions() -> Vec<DistortionCell> {
    vec![DistortionCell::None]
}
fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}
fn default_danco_max_n() -> usize {
    DANCO_MAX_N
}
fn default_danco_k_grid() -> Vec<usize> {
    vec![10, 20]
}

/// A benchmark sweep, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub specs: Vec<ManifoldSpec>,
    pub estimators: Vec<Estimator>,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_k_grid")]
    pub k_grid: Vec<usize>,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    #[serde(default = "default_distortions")]
    pub distortions: Vec<DistortionCell>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_danco_max_n")]
    pub danco_max_n: usize,
    /// Neighborhood sizes DANCo uses in `FixN_SweepK` sweeps.
    #[serde(default = "default_danco_k_grid")]
    pub danco_k_grid: Vec<usize>,
    /// Record per-cell wall time.
    #[serde(default)]
    pub timing: bool,
}

impl SweepConfig {
    /// A sweep with default grids.
    pub fn new(kind: SweepKind, specs: Vec<ManifoldSpec>, estimators: Vec<Estimator>) -> Self {
        SweepConfig {
            kind,
            specs,
            estimators,
            n_grid: default_n_grid(),
            k_grid: default_k_grid(),
            ratios: default_ratios(),
            distortions: default_distortions(),
            seeds: default_seeds(),
            danco_max_n: DANCO_MAX_N,
            danco_k_grid: default_danco_k_grid(),
            timing: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = |ok: bool, what: &str| {
            if ok { Ok(()) } else { Err(Error::invalid(format!("sweep needs at least one {what}"))) }
        };
        nonempty(!self.specs.is_empty(), "manifold")?;
        nonempty(!self.estimators.is_empty(), "estimator")?;
        nonempty(!self.n_grid.is_empty(), "sample size")?;
        nonempty(!self.seeds.is_empty(), "seed")?;
        nonempty(!self.distortions.is_empty(), "distortion")?;
        match self.kind {
            SweepKind::FixNSweepK => nonempty(!self.k_grid.is_empty(), "k")?,
            SweepKind::FixRatioSweepN => {
                nonempty(!self.ratios.is_empty(), "ratio")?;
                if self.ratios.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
                    return Err(Error::invalid("ratios must lie in (0, 1]"));
                }
            }
            SweepKind::FixKSweepN => {}
        }
        if self.n_grid.iter().any(|&n| n < 3) {
            return Err(Error::invalid("sample sizes must be at least 3"));
        }
        Ok(())
    }
}

/// Position of a cell in the sweep grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub spec_index: usize,
    pub estimator_index: usize,
    pub distortion_index: usize,
    pub spec: ManifoldSpec,
    /// Estimator with its neighborhood size set for this cell.
    pub estimator: Estimator,
    pub distortion: DistortionCell,
    pub n_points: usize,
    pub k: usize,
    pub seed: u64,
    order: (usize, usize, usize, usize),
}

/// Neighborhood size `k` clamped to `N - 2`, applied to `est`.
pub fn clamp_k(est: Estimator, k: usize, n_points: usize) -> (Estimator, usize) {
    let k = k.min(n_points.saturating_sub(2)).max(1);
    match est {
        Estimator::TwoNn { .. } => (est, k),
        Estimator::CorrInt { k1, k2 } if k2 <= n_points.saturating_sub(2) && k == k2 => {
            (Estimator::CorrInt { k1, k2 }, k)
        }
        e => (e.with_k(k), k),
    }
}

/// Expand a configuration into cells in canonical order.
pub fn expand_cells(cfg: &SweepConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for (si, spec) in cfg.specs.iter().enumerate() {
        for (ei, est) in cfg.estimators.iter().enumerate() {
            let is_danco = matches!(est, Estimator::Danco { .. });
            let mut cell_no = 0;
            for (di, dist) in cfg.distortions.iter().enumerate() {
                for &n in &cfg.n_grid {
                    if is_danco && n > cfg.danco_max_n {
                        continue;
                    }
                    let ks: Vec<usize> = match cfg.kind {
                        SweepKind::FixKSweepN => vec![est.k().unwrap_or(2)],
                        SweepKind::FixNSweepK if is_danco => cfg.danco_k_grid.clone(),
                        SweepKind::FixNSweepK => cfg.k_grid.clone(),
                        SweepKind::FixRatioSweepN => {
                            cfg.ratios.iter().map(|r| ((r * n as f64).round() as usize).max(2)).collect()
                        }
                    };
                    for k in ks {
                        let (estimator, k) = clamp_k(*est, k, n);
                        for (seed_no, &seed) in cfg.seeds.iter().enumerate() {
                            out.push(Cell {
                                spec_index: si,
                                estimator_index: ei,
                                distortion_index: di,
                                spec: spec.clone(),
                                estimator,
                                distortion: *dist,
                                n_points: n,
                                k,
                                seed,
                                order: (si, ei, cell_no, seed_no),
                            });
                        }
                        cell_no += 1;
                    }
                }
            }
        }
    }
    out
}

impl Cell {
    /// Record with the coordinate columns filled and no results.
    pub fn blank_record(&self) -> BenchmarkRecord {
        let d_i = intrinsic_dim(&self.spec).map(|d| d as f64).unwrap_or(f64::NAN);
        let d_a = self.spec.ambient_dim().unwrap_or(0);
        let (sigma2, noise_kind) = match self.distortion {
            DistortionCell::Noise { noise_kind, sigma2 } => (Some(sigma2), Some(noise_kind)),
            _ => (None, None),
        };
        BenchmarkRecord {
            schema_version: SCHEMA_VERSION,
            family: self.spec.family.as_str().to_owned(),
            n: self.spec.n,
            k_param: self.spec.k,
            k1: self.spec.k1,
            k2: self.spec.k2,
            d_i: if d_i.is_finite() { Some(d_i) } else { None },
            d_a,
            n_points: self.n_points,
            k: self.k,
            method: self.estimator.name().to_owned(),
            alpha: self.estimator.alpha(),
            epsilon_lpca: self.estimator.epsilon(),
            distortion: self.distortion.label(),
            sigma2,
            noise_kind,
            seed: self.seed,
            agg_mean: None,
            agg_median: None,
            agg_mode: None,
            agg_mom: None,
            agg_mem: None,
            delta_mean: None,
            defined_count: 0,
            trace: None,
            vdi: None,
            r2: None,
            wall_ms: None,
            error: None,
        }
    }
}

/// Fill a record with an estimator result and covariance statistics.
pub fn fill_record(rec: &mut BenchmarkRecord, res: &LidResult, stats: Option<&CovStats>) {
    let finite = |x: f64| if x.is_finite() { Some(x) } else { None };
    let a = &res.aggregates;
    rec.agg_mean = finite(a.mean);
    rec.agg_median = finite(a.median);
    rec.agg_mode = finite(a.mode);
    rec.agg_mom = finite(a.median_of_means);
    rec.agg_mem = finite(a.mean_of_medians);
    rec.defined_count = res.defined_count;
    rec.delta_mean = match (rec.agg_mean, rec.d_i) {
        (Some(m), Some(d_i)) => relative_error(m, d_i, rec.d_a).ok().and_then(|e| finite(e.delta)),
        _ => None,
    };
    if let Some(s) = stats {
        rec.trace = finite(s.trace);
        rec.vdi = finite(s.vdi);
        rec.r2 = finite(s.r2_mean);
    }
}

struct CloudJob<'a> {
    spec: &'a ManifoldSpec,
    distortion: DistortionCell,
    n_points: usize,
    seed: u64,
    cells: Vec<&'a Cell>,
}

fn sample_cloud(spec: &ManifoldSpec, dist: &DistortionCell, n: usize, seed: u64) -> Result<PointCloud> {
    let tag = format!("{}/{n}", spec.key());
    let clean = sample(spec, n, &derive_stream(seed, &format!("cloud/{tag}")))?;
    dist.apply(&clean, seed, &tag)
}

fn run_job(job: &CloudJob<'_>, timing: bool) -> Vec<BenchmarkRecord> {
    let fail = |msg: String| -> Vec<BenchmarkRecord> {
        job.cells
            .iter()
            .map(|c| {
                let mut r = c.blank_record();
                r.error = Some(msg.clone());
                r
            })
            .collect()
    };
    let cloud = match sample_cloud(job.spec, &job.distortion, job.n_points, job.seed) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    let stats = covariance_stats(&cloud).ok();
    let valid_k = job
        .cells
        .iter()
        .filter(|c| c.estimator.validate(cloud.len()).is_ok())
        .map(|c| c.estimator.table_k())
        .max();
    let table = match valid_k.map(|k| knn(&cloud, k)) {
        Some(Ok(t)) => Some(t),
        Some(Err(e)) => return fail(e.to_string()),
        None => None,
    };
    job.cells
        .iter()
        .map(|c| {
            let mut rec = c.blank_record();
            rec.d_a = cloud.dim();
            let start = Instant::now();
            let res = c.estimator.validate(cloud.len()).and_then(|_| {
                let t = table.as_ref().expect("table exists when a cell validates");
                let t = t.truncate(c.estimator.table_k())?;
                run_estimator_with_table(&cloud, &t, &c.estimator, c.seed)
            });
            match res {
                Ok(r) => fill_record(&mut rec, &r, stats.as_ref()),
                Err(e) => rec.error = Some(e.to_string()),
            }
            if timing {
                rec.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            }
            rec
        })
        .collect()
}

/// Run the given cells, grouping those that share a cloud. Output follows
/// the cells' canonical order.
pub fn run_cells(cells: &[Cell], timing: bool) -> Vec<BenchmarkRecord> {
    type Key = (usize, usize, usize, u64);
    let mut groups: BTreeMap<Key, CloudJob<'_>> = BTreeMap::new();
    for c in cells {
        groups
            .entry((c.spec_index, c.distortion_index, c.n_points, c.seed))
            .or_insert_with(|| CloudJob {
                spec: &c.spec,
                distortion: c.distortion,
                n_points: c.n_points,
                seed: c.seed,
                cells: Vec::new(),
            })
            .cells
            .push(c);
    }
    let jobs: Vec<CloudJob<'_>> = groups.into_values().collect();
    let mut tagged: Vec<_> = jobs
        .par_iter()
        .flat_map_iter(|job| {
            let recs = run_job(job, timing);
            job.cells.iter().map(|c| c.order).zip(recs).collect::<Vec<_>>()
        })
        .collect();
    tagged.sort_by_key(|a| a.0);
    tagged.into_iter().map(|(_, r)| r).collect()
}

/// Run a whole sweep in memory.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<BenchmarkRecord>> {
    cfg.validate()?;
    Ok(run_cells(&expand_cells(cfg), cfg.timing))
}

/// Run a sweep writing records to `path`. With `resume`, cells whose
/// coordinate digest already appears in an existing file are skipped and new
/// records are appended. Returns the number of records written.
pub fn run_sweep_to_file(cfg: &SweepConfig, path: &Path, format: RecordFormat, resume: bool) -> Result<usize> {
    cfg.validate()?;
    let cells = expand_cells(cfg);
    let done: HashSet<String> = if resume && path.exists() {
        read_records(path, format)?.iter().map(BenchmarkRecord::coordinate_digest).collect()
    } else {
        HashSet::new()
    };
    let todo: Vec<Cell> =
        cells.into_iter().filter(|c| !done.contains(&c.blank_record().coordinate_digest())).collect();
    let records = run_cells(&todo, cfg.timing);
    write_records(path, format, &records, resume && path.exists())?;
    Ok(records.len())
}
