//! Benchmark metrics: relative error, covariance statistics, the
//! manifold-ness ratio and kNN density.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::estimators::LidResult;
use crate::linalg::RealMatrix;
use crate::neighbors::NeighborTable;

/// `δ = d̂ / d_i - 1` with its inputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeError {
    pub delta: f64,
    pub d_hat: f64,
    pub d_i: f64,
    pub d_a: usize,
}

/// Relative error of an estimate. An undefined `d_hat` (`NaN`) gives an
/// undefined `delta`.
pub fn relative_error(d_hat: f64, d_i: f64, d_a: usize) -> Result<RelativeError> {
    if !(d_i > 0.0) || (d_a as f64) < d_i {
        return Err(Error::invalid(format!("relative error needs 0 < d_i <= d_a, got {d_i}, {d_a}")));
    }
    Ok(RelativeError { delta: d_hat / d_i - 1.0, d_hat, d_i, d_a })
}

/// Spectrum summaries of the sample covariance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovStats {
    pub trace: f64,
    /// Variance dispersion index `Var(λ) / Mean(λ)²`.
    pub vdi: f64,
    /// Mean squared correlation over all coordinate pairs, diagonal included.
    pub r2_mean: f64,
}

/// Sample covariance `X_c^T X_c / (N - 1)`.
pub fn covariance_matrix(cloud: &PointCloud) -> RealMatrix {
    let n = cloud.len();
    let mut x = cloud.to_matrix();
    for mut col in x.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    let denom = (n.max(2) - 1) as f64;
    x.tr_mul(&x) / denom
}

/// Trace, VDI and mean `R²` of the sample covariance.
///
/// The spectrum enters the VDI only through `Σλ = Tr Σ` and
/// `Σλ² = ‖Σ‖_F²`, so no eigen-decomposition is needed.
pub fn covariance_stats(cloud: &PointCloud) -> Result<CovStats> {
    if cloud.len() < 2 {
        return Err(Error::invalid("covariance needs at least two points"));
    }
    Ok(stats_of_covariance(&covariance_matrix(cloud)))
}

pub fn stats_of_covariance(cov: &RealMatrix) -> CovStats {
    let d = cov.nrows();
    let trace = cov.trace();
    let mean = trace / d as f64;
    let mean_sq = cov.norm_squared() / d as f64;
    let vdi = if mean > 0.0 { ((mean_sq - mean * mean) / (mean * mean)).max(0.0) } else { 0.0 };
    let mut r2 = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i == j {
                r2 += 1.0;
                continue;
            }
            let denom = cov[(i, i)] * cov[(j, j)];
            if denom > 0.0 {
                r2 += cov[(i, j)] * cov[(i, j)] / denom;
            }
        }
    }
    CovStats { trace, vdi, r2_mean: r2 / (d * d) as f64 }
}

/// Sample standard deviation over mean of the defined local estimates.
/// `None` with fewer than two defined values or a zero mean.
pub fn manifoldness_ratio(result: &LidResult) -> Option<f64> {
    ratio_of(&result.defined())
}

/// [`manifoldness_ratio`] on raw values; non-finite entries are skipped.
pub fn ratio_of(values: &[f64]) -> Option<f64> {
    let (mean, std) = mean_std(values)?;
    (mean != 0.0).then(|| std / mean)
}

/// Mean and sample standard deviation of the finite entries.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.len() < 2 {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

/// Volume of the unit `d`-ball, `π^{d/2} / Γ(d/2 + 1)`.
pub fn unit_ball_volume(d: f64) -> f64 {
    (0.5 * d * std::f64::consts::PI.ln() - ln_gamma(0.5 * d + 1.0)).exp()
}

/// Per-point density `k / (N Ω_d T_k^d)`; `NaN` where `T_k = 0`.
pub fn local_density(cloud: &PointCloud, table: &NeighborTable, d: f64) -> Result<Vec<f64>> {
    if !(d > 0.0) {
        return Err(Error::invalid(format!("density needs d > 0, got {d}")));
    }
    if table.len() != cloud.len() {
        return Err(Error::invalid("neighbor table does not match the cloud"));
    }
    let k = table.k() as f64;
    let n = cloud.len() as f64;
    let omega = unit_ball_volume(d);
    Ok((0..table.len())
        .into_par_iter()
        .map(|i| {
            let t = table.distances(i)[table.k() - 1];
            if t > 0.0 {
                k / (n * omega * t.powf(d))
            } else {
                f64::NAN
            }
        })
        .collect())
}

/// Sample size at which `k` neighbors fall within radius `t_k` of a point
/// with density `rho`: `N = k / (Ω_d ρ T_k^d)`.
pub fn samples_for_radius(k: usize, d_i: f64, rho: f64, t_k: f64) -> f64 {
    k as f64 / (unit_ball_volume(d_i) * rho * t_k.powf(d_i))
}

/// `count` sample sizes log-spaced so that `N / d_i` runs from 2 to 300.
pub fn sample_size_grid(d_i: usize, count: usize) -> Vec<usize> {
    log_grid(2.0 * d_i as f64, 300.0 * d_i as f64, count)
}

/// `count` rounded log-spaced values from `lo` to `hi` inclusive, deduplicated.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..count)
        .map(|i| {
            let t = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
            (lo.ln() + t * (hi.ln() - lo.ln())).exp().round() as usize
        })
        .collect();
    out.dedup();
    out
}
