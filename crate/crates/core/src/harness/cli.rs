//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime
//! error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use super::records::records_to_string;
use super::{fill_record, run_sweep_to_file, BenchmarkRecord, RecordFormat, SweepConfig, SCHEMA_VERSION};
use crate::analysis::{covariance_stats, local_density};
use crate::cloud::{Distortion, PointCloud};
use crate::error::{Error, Result};
use crate::estimators::{run_estimator, AbidPairs, Estimator};
use crate::fractal::{box_count_dimension, fractal_lid_suite, hofstadter_cloud};
use crate::linalg::derive_stream;
use crate::manifolds::{sample, Family, ManifoldSpec};
use crate::neighbors::knn;
use crate::perturb::{add_noise, squeeze, NoiseKind, NoiseSpec};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "IDBENCH_THREADS";

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for RecordFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => RecordFormat::Csv,
            FormatArg::Jsonl => RecordFormat::Jsonl,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "idbench", version, about = "Point clouds on homogeneous spaces and intrinsic-dimension benchmarks")]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (capped by IDBENCH_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path; stdout when absent for text outputs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Record format.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: FormatArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a point cloud and save it with its metadata sidecar.
    Generate(GenerateArgs),
    /// Squeeze a saved cloud or add Gaussian noise to it.
    Perturb(PerturbArgs),
    /// Run one estimator on a saved cloud and emit a record.
    Estimate(EstimateArgs),
    /// Run a sweep described by a JSON configuration.
    Sweep(SweepArgs),
    /// Build the Hofstadter butterfly and estimate its dimension.
    Fractal(FractalArgs),
    /// Covariance statistics and kNN density of a saved cloud.
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    family: Family,
    #[arg(long, default_value_t = 0)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    k1: usize,
    #[arg(long, default_value_t = 0)]
    k2: usize,
    /// Intrinsic dimension of a baseline family.
    #[arg(long = "d-i")]
    d_i: Option<usize>,
    /// Ambient dimension to pad into.
    #[arg(long)]
    ambient: Option<usize>,
    /// Number of points.
    #[arg(long = "N")]
    n_points: usize,
    /// Also write the points as CSV to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PerturbArgs {
    #[arg(long)]
    input: PathBuf,
    /// Squeeze parameter ε in [0, 1).
    #[arg(long, conflicts_with_all = ["noise", "sigma2"])]
    squeeze: Option<f64>,
    /// Noise kind.
    #[arg(long, requires = "sigma2")]
    noise: Option<NoiseKind>,
    /// Noise scale σ².
    #[arg(long, requires = "noise")]
    sigma2: Option<f64>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    method: String,
    /// Neighborhood size; per-method default when absent.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    k1: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    calib_sets: Option<usize>,
    /// ABID pair set.
    #[arg(long, value_parser = ["distinct", "with_self"])]
    pairs: Option<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// JSON sweep configuration.
    #[arg(long)]
    config: PathBuf,
    /// Skip cells already present in the output file and append.
    #[arg(long)]
    resume: bool,
}

#[derive(Args, Debug)]
struct FractalArgs {
    #[arg(long, default_value_t = 50)]
    q_max: usize,
    #[arg(long, default_value_t = 8)]
    k_grid: usize,
    #[arg(long, default_value_t = 3)]
    j_min: u32,
    #[arg(long, default_value_t = 8)]
    j_max: u32,
    /// Also run the estimator suite at these neighborhood sizes.
    #[arg(long, value_delimiter = ',')]
    ks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "mle,abid,corrint")]
    methods: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    n_sub: usize,
    /// Save the cloud to this path.
    #[arg(long)]
    cloud_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
    /// Also report kNN density statistics at this `k`, using the stored d_i.
    #[arg(long)]
    density_k: Option<usize>,
}

/// Default neighborhood size per method.
pub fn default_k(method: &str) -> usize {
    match method {
        "danco" => 10,
        "corrint" => 20,
        _ => 100,
    }
}

fn configure_threads(requested: Option<usize>) {
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0);
    let n = match (requested, cap) {
        (Some(r), Some(c)) => Some(r.min(c)),
        (r, c) => r.or(c),
    };
    if let Some(n) = n {
        // The global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn require_out(out: Option<&Path>, cmd: &str) -> Result<PathBuf> {
    out.map(Path::to_path_buf).ok_or_else(|| Error::invalid(format!("{cmd} needs --out")))
}

/// Record for one estimator run on a saved cloud.
pub fn record_for_cloud(cloud: &PointCloud, est: &Estimator, k: usize, seed: u64) -> Result<BenchmarkRecord> {
    let meta = cloud.meta();
    let last = cloud.distortions().iter().rev().find(|d| !matches!(d, Distortion::Isometry { .. }));
    let (distortion, sigma2, noise_kind) = match last {
        Some(Distortion::Squeeze { epsilon, .. }) => (format!("squeeze:{epsilon}"), None, None),
        Some(Distortion::Noise { noise_kind, sigma2, .. }) => ("noise".into(), Some(*sigma2), Some(*noise_kind)),
        _ => ("none".into(), None, None),
    };
    let mut rec = BenchmarkRecord {
        schema_version: SCHEMA_VERSION,
        family: meta.family.map(|f| f.as_str().to_owned()).unwrap_or(meta.provenance.clone()),
        n: meta.n,
        k_param: meta.k,
        k1: meta.k1,
        k2: meta.k2,
        d_i: if meta.d_i.is_finite() { Some(meta.d_i) } else { None },
        d_a: meta.d_a,
        n_points: meta.n_points,
        k,
        method: est.name().to_owned(),
        alpha: est.alpha(),
        epsilon_lpca: est.epsilon(),
        distortion,
        sigma2,
        noise_kind,
        seed,
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
    };
    let res = run_estimator(cloud, est, seed)?;
    let stats = covariance_stats(cloud).ok();
    fill_record(&mut rec, &res, stats.as_ref());
    Ok(rec)
}

fn build_estimator(a: &EstimateArgs) -> Result<(Estimator, usize)> {
    let k = a.k.unwrap_or_else(|| default_k(&a.method));
    let mut est = Estimator::with_defaults(&a.method, k)?;
    match &mut est {
        Estimator::CorrInt { k1, .. } => {
            if let Some(v) = a.k1 {
                *k1 = v;
            }
        }
        Estimator::TwoNn { alpha } => {
            if let Some(v) = a.alpha {
                *alpha = v;
            }
        }
        Estimator::LpcaRatio { epsilon, .. } | Estimator::LpcaFo { epsilon, .. } => {
            if let Some(v) = a.epsilon {
                *epsilon = v;
            }
        }
        Estimator::Danco { calib_sets, .. } => {
            if let Some(v) = a.calib_sets {
                *calib_sets = v;
            }
        }
        Estimator::Abid { pairs, .. }
            if a.pairs.as_deref() == Some("with_self") => {
                *pairs = AbidPairs::WithSelf;
            }
        _ => {}
    }
    let k = if matches!(est, Estimator::TwoNn { .. }) { 2 } else { k };
    Ok((est, k))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads);
    let out = cli.out.as_deref();
    let format: RecordFormat = cli.format.into();
    match cli.command {
        Command::Generate(a) => {
            let spec = ManifoldSpec {
                family: a.family,
                n: a.n,
                k: a.k,
                k1: a.k1,
                k2: a.k2,
                d_i: a.d_i,
                ambient: a.ambient,
            };
            let path = require_out(out, "generate")?;
            let cloud = sample(&spec, a.n_points, &derive_stream(cli.seed, &format!("cloud/{}/{}", spec.key(), a.n_points)))?;
            cloud.save(&path)?;
            if let Some(csv) = &a.csv {
                cloud.write_csv(csv)?;
            }
            eprintln!("wrote {} x {} cloud ({}, d_i = {}) to {}", cloud.len(), cloud.dim(), spec.key(), cloud.intrinsic_dim(), path.display());
        }
        Command::Perturb(a) => {
            let path = require_out(out, "perturb")?;
            let cloud = PointCloud::load(&a.input)?;
            let next = match (a.squeeze, a.noise, a.sigma2) {
                (Some(eps), None, None) => squeeze(&cloud, eps, &derive_stream(cli.seed, &format!("cli/squeeze/{eps}")))?,
                (None, Some(kind), Some(sigma2)) => add_noise(
                    &cloud,
                    NoiseSpec { kind, sigma2 },
                    &derive_stream(cli.seed, &format!("cli/noise/{kind}/{sigma2}")),
                )?,
                _ => return Err(Error::invalid("perturb needs --squeeze or --noise with --sigma2")),
            };
            next.save(&path)?;
            eprintln!("wrote perturbed cloud to {}", path.display());
        }
        Command::Estimate(a) => {
            let cloud = PointCloud::load(&a.input)?;
            let (est, k) = build_estimator(&a)?;
            let rec = record_for_cloud(&cloud, &est, k, cli.seed)?;
            emit(out, &records_to_string(format, &[rec])?)?;
        }
        Command::Sweep(a) => {
            let path = require_out(out, "sweep")?;
            let cfg = SweepConfig::from_json(&fs::read_to_string(&a.config)?)?;
            let written = run_sweep_to_file(&cfg, &path, format, a.resume)?;
            eprintln!("wrote {written} records to {}", path.display());
        }
        Command::Fractal(a) => {
            let fc = hofstadter_cloud(a.q_max, a.k_grid)?;
            let bc = box_count_dimension(&fc.unit_square_points(), a.j_min, a.j_max)?;
            let mut text = serde_json::to_string(&json!({
                "points": fc.points.len(),
                "q_max": fc.q_max,
                "k_grid": fc.k_grid,
                "box_count": bc,
            }))? + "\n";
            let cloud = fc.to_point_cloud(bc.dimension)?;
            if let Some(p) = &a.cloud_out {
                cloud.save(p)?;
            }
            if !a.ks.is_empty() {
                let templates =
                    a.methods.iter().map(|m| Estimator::with_defaults(m, 10)).collect::<Result<Vec<_>>>()?;
                let rows =
                    fractal_lid_suite(&cloud, &a.ks, a.n_sub, &templates, &derive_stream(cli.seed, "fractal/subsample"))?;
                for r in rows {
                    text += &serde_json::to_string(&r)?;
                    text.push('\n');
                }
            }
            emit(out, &text)?;
        }
        Command::Stats(a) => {
            let cloud = PointCloud::load(&a.input)?;
            let s = covariance_stats(&cloud)?;
            let mut v = json!({
                "N": cloud.len(),
                "d_a": cloud.dim(),
                "d_i": cloud.intrinsic_dim(),
                "trace": s.trace,
                "vdi": s.vdi,
                "r2_mean": s.r2_mean,
            });
            if let Some(k) = a.density_k {
                let table = knn(&cloud, k)?;
                let rho = local_density(&cloud, &table, cloud.intrinsic_dim())?;
                let mean = rho.iter().sum::<f64>() / rho.len() as f64;
                let mut sorted = rho.clone();
                sorted.sort_by(f64::total_cmp);
                v["density_k"] = json!(k);
                v["density_mean"] = json!(mean);
                v["density_median"] = json!(sorted[sorted.len() / 2]);
            }
            emit(out, &(serde_json::to_string(&v)? + "\n"))?;
        }
    }
    Ok(())
}

/// Parse `args` (program name first) and run. Returns the exit code.
pub fn cli_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(Error::InvalidParameter(msg)) if msg.ends_with("needs --out") => {
            eprintln!("error: {msg}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_and_usage_codes() {
        assert_eq!(cli_entry(["idbench", "--help"]), 0);
        assert_eq!(cli_entry(["idbench", "frobnicate"]), 1);
        assert_eq!(cli_entry(["idbench", "generate", "--family", "nope", "--N", "10"]), 1);
    }

    #[test]
    fn generate_estimate_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cloud = dir.path().join("c.bin");
        let rec = dir.path().join("r.jsonl");
        let c = cloud.to_str().unwrap();
        assert_eq!(
            cli_entry(["idbench", "generate", "--family", "sphere", "--d-i", "2", "--ambient", "4", "--N", "300", "--out", c]),
            0
        );
        assert_eq!(
            cli_entry([
                "idbench", "estimate", "--input", c, "--method", "mle", "--k", "20", "--format", "jsonl", "--out",
                rec.to_str().unwrap()
            ]),
            0
        );
        let recs = super::super::read_records(&rec, RecordFormat::Jsonl).unwrap();
        assert_eq!(recs[0].d_a, 4);
        assert_eq!(recs[0].k, 20);
        assert!((recs[0].agg_mean.unwrap() - 2.0).abs() < 0.3);
    }

    #[test]
    fn runtime_errors_exit_two() {
        assert_eq!(cli_entry(["idbench", "stats", "--input", "/nonexistent/cloud.bin"]), 2);
        assert_eq!(cli_entry(["idbench", "generate", "--family", "sphere", "--N", "10"]), 1);
    }
}
