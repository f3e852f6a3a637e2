//! Hofstadter butterfly point cloud and box-counting dimension.

use std::collections::HashSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::mean_std;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::estimators::{run_estimator, Estimator};
use crate::linalg::RandomStream;

/// Largest supported flux denominator.
pub const MAX_Q: usize = 200;

/// Residual above which the two extreme scales are dropped from the fit.
pub const RESIDUAL_LIMIT: f64 = 0.05;

/// Spectrum points `(α, E/4)` of the Harper model over rational fluxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractalCloud {
    pub points: Vec<[f64; 2]>,
    pub q_max: usize,
    pub k_grid: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Bloch Hamiltonian at flux `p/q` and quasi-momentum `(k1, k2)`.
pub fn bloch_hamiltonian(p: usize, q: usize, k1: f64, k2: f64) -> DMatrix<Complex64> {
    let mut h = DMatrix::from_element(q, q, Complex64::new(0.0, 0.0));
    let phase = Complex64::from_polar(1.0, -(q as f64) * k1);
    for m in 0..q {
        let theta = 2.0 * std::f64::consts::PI * (p * m) as f64 / q as f64 + k2;
        h[(m, m)] += 2.0 * theta.cos();
        if m + 1 < q {
            h[(m, m + 1)] += 1.0;
            h[(m + 1, m)] += 1.0;
        }
    }
    // Periodic closure; for q = 1 both corners land on the diagonal.
    h[(0, q - 1)] += phase;
    h[(q - 1, 0)] += phase.conj();
    h
}

/// Energies at flux `p/q` over a `k_grid x k_grid` grid on `[0, 2π/q)²`,
/// in row-major `(k1, k2)` order, each k-point sorted ascending.
pub fn flux_energies(p: usize, q: usize, k_grid: usize) -> Vec<f64> {
    let step = 2.0 * std::f64::consts::PI / (q * k_grid) as f64;
    let mut out = Vec::with_capacity(k_grid * k_grid * q);
    for a in 0..k_grid {
        for b in 0..k_grid {
            let h = bloch_hamiltonian(p, q, a as f64 * step, b as f64 * step);
            let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            out.extend(ev);
        }
    }
    out
}

/// The butterfly for all reduced fractions `p/q`, `1 <= q <= q_max`,
/// `0 <= p <= q`. Points are ordered by `(q, p, k-point)` and deduplicated
/// on `(α, round(E/4 · 10⁶))`.
pub fn hofstadter_cloud(q_max: usize, k_grid: usize) -> Result<FractalCloud> {
    if !(2..=MAX_Q).contains(&q_max) {
        return Err(Error::invalid(format!("q_max must lie in [2, {MAX_Q}], got {q_max}")));
    }
    if k_grid == 0 {
        return Err(Error::invalid("k_grid must be positive"));
    }
    let fluxes: Vec<(usize, usize)> = (1..=q_max)
        .flat_map(|q| (0..=q).filter(move |&p| gcd(p, q) == 1).map(move |p| (p, q)))
        .collect();
    let spectra: Vec<Vec<f64>> = fluxes.par_iter().map(|&(p, q)| flux_energies(p, q, k_grid)).collect();
    let mut seen = HashSet::new();
    let mut points = Vec::new();
    for (&(p, q), energies) in fluxes.iter().zip(&spectra) {
        for &e in energies {
            let y = e / 4.0;
            if seen.insert((p, q, (y * 1e6).round() as i64)) {
                points.push([p as f64 / q as f64, y]);
            }
        }
    }
    Ok(FractalCloud { points, q_max, k_grid })
}

impl FractalCloud {
    /// Points mapped into the unit square, `y -> (y + 1) / 2`.
    pub fn unit_square_points(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| [p[0], ((p[1] + 1.0) / 2.0).clamp(0.0, 1.0)]).collect()
    }

    /// The cloud as a flagged non-manifold [`PointCloud`] with `d_i` set to
    /// the given fractal dimension.
    pub fn to_point_cloud(&self, d_i: f64) -> Result<PointCloud> {
        let data = self.points.iter().flat_map(|p| p.iter().copied()).collect();
        Ok(PointCloud::from_rows(
            data,
            self.points.len(),
            2,
            d_i,
            "hofstadter",
            format!("q_max={}/k_grid={}", self.q_max, self.k_grid),
        )?
        .mark_non_manifold())
    }
}

/// Box counts and the fitted slope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCountResult {
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    pub dimension: f64,
    /// Root-mean-square residual of the log-log fit that was kept.
    pub fit_residual: f64,
    /// Whether the smallest and largest scales were left out of the fit.
    pub extremes_excluded: bool,
}

fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum::<f64>() / n).sqrt();
    (slope, rms)
}

/// Box-counting dimension over `ε = 2^{-j}`, `j = j_min..=j_max`, for
/// points in the unit square.
pub fn box_count_dimension(points: &[[f64; 2]], j_min: u32, j_max: u32) -> Result<BoxCountResult> {
    if j_min < 2 || j_max > 12 || j_min >= j_max {
        return Err(Error::invalid(format!("need 2 <= j_min < j_max <= 12, got {j_min}, {j_max}")));
    }
    if j_max - j_min + 1 < 3 {
        return Err(Error::invalid("box counting needs at least three scales"));
    }
    if points.is_empty() {
        return Err(Error::invalid("box counting needs at least one point"));
    }
    if points.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::invalid("box counting expects points in the unit square"));
    }
    let mut scales = Vec::new();
    let mut counts = Vec::new();
    for j in j_min..=j_max {
        let cells = 1u64 << j;
        let idx = |c: f64| ((c * cells as f64) as u64).min(cells - 1);
        let occupied: HashSet<(u64, u64)> = points.iter().map(|p| (idx(p[0]), idx(p[1]))).collect();
        scales.push(1.0 / cells as f64);
        counts.push(occupied.len());
    }
    let x: Vec<f64> = scales.iter().map(|e| (1.0 / e).ln()).collect();
    let y: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (mut dimension, mut fit_residual) = fit_line(&x, &y);
    let mut extremes_excluded = false;
    if fit_residual > RESIDUAL_LIMIT && x.len() >= 5 {
        let m = x.len();
        (dimension, fit_residual) = fit_line(&x[1..m - 1], &y[1..m - 1]);
        extremes_excluded = true;
    }
    Ok(BoxCountResult { scales, counts, dimension, fit_residual, extremes_excluded })
}

/// Mean and spread of one estimator at one `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractalRow {
    pub method: String,
    pub k: usize,
    pub mean: f64,
    /// Sample standard deviation of local estimates; `NaN` for CorrInt.
    pub std: f64,
    pub defined_count: usize,
}

/// Run MLE, ABID or CorrInt at each `k` on a uniform subsample of `cloud`.
/// Each estimator is used as a template whose neighborhood size is replaced
/// by the entries of `ks`.
pub fn fractal_lid_suite(
    cloud: &PointCloud,
    ks: &[usize],
    n_subsample: usize,
    estimators: &[Estimator],
    s: &RandomStream,
) -> Result<Vec<FractalRow>> {
    if n_subsample > cloud.len() || n_subsample < 2 {
        return Err(Error::invalid(format!(
            "subsample size {n_subsample} must lie in [2, {}]",
            cloud.len()
        )));
    }
    let mut rng = s.clone();
    let mut idx = rand::seq::index::sample(&mut rng, cloud.len(), n_subsample).into_vec();
    idx.sort_unstable();
    let sub = cloud.select_rows(&idx)?;
    let mut rows = Vec::new();
    for template in estimators {
        if !matches!(template, Estimator::Mle { .. } | Estimator::Abid { .. } | Estimator::CorrInt { .. }) {
            return Err(Error::invalid(format!("{template} does not give fractional estimates")));
        }
        for &k in ks {
            let est = template.with_k(k);
            let r = run_estimator(&sub, &est, s.master_seed())?;
            let (mean, std) = match r.global {
                Some(g) => (g, f64::NAN),
                None if est.is_global() => (f64::NAN, f64::NAN),
                None => mean_std(&r.defined()).unwrap_or((f64::NAN, f64::NAN)),
            };
            rows.push(FractalRow { method: est.name().to_owned(), k, mean, std, defined_count: r.defined_count });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::derive_stream;

    #[test]
    fn zero_flux_band() {
        let e = flux_energies(0, 1, 32);
        let lo = e.iter().copied().fold(f64::INFINITY, f64::min) / 4.0;
        let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max) / 4.0;
        assert!((lo + 1.0).abs() < 0.02 && (hi - 1.0).abs() < 1e-12, "{lo} {hi}");
    }

    #[test]
    fn q_one_closed_form() {
        let h = bloch_hamiltonian(0, 1, 0.3, 1.1);
        assert!((h[(0, 0)].re - (2.0 * 0.3f64.cos() + 2.0 * 1.1f64.cos())).abs() < 1e-14);
        let h = bloch_hamiltonian(1, 2, 0.4, 0.0);
        let off = Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, -0.8);
        assert!((h[(0, 1)] - off).norm() < 1e-14);
        assert!((h[(1, 0)] - off.conj()).norm() < 1e-14);
    }

    #[test]
    fn bandwidth_and_symmetry() {
        let c = hofstadter_cloud(6, 6).unwrap();
        assert!(c.points.iter().all(|p| p[1].abs() <= 1.0 + 1e-12 && (0.0..=1.0).contains(&p[0])));
        for q in [2usize, 4] {
            let e = flux_energies(1, q, 8);
            for &x in &e {
                assert!(e.iter().any(|&y| (x + y).abs() < 1e-6), "q={q}: {x}");
            }
        }
    }

    #[test]
    fn deterministic_and_deduplicated() {
        let a = hofstadter_cloud(5, 4).unwrap();
        let b = hofstadter_cloud(5, 4).unwrap();
        assert_eq!(a, b);
        let keys: HashSet<(u64, i64)> =
            a.points.iter().map(|p| (p[0].to_bits(), (p[1] * 1e6).round() as i64)).collect();
        assert_eq!(keys.len(), a.points.len());
        assert!(hofstadter_cloud(1, 4).is_err());
        assert!(hofstadter_cloud(201, 4).is_err());
    }

    #[test]
    fn box_count_line_and_square() {
        let line: Vec<[f64; 2]> = (0..100_000).map(|i| {
            let t = i as f64 / 99_999.0;
            [t, t]
        }).collect();
        let r = box_count_dimension(&line, 3, 10).unwrap();
        assert!((r.dimension - 1.0).abs() < 0.05, "{r:?}");
        assert!(r.counts.windows(2).all(|w| w[0] <= w[1]));
        let mut s = derive_stream(1, "sq");
        let square: Vec<[f64; 2]> = (0..1_000_000).map(|_| [s.uniform(), s.uniform()]).collect();
        let r = box_count_dimension(&square, 3, 8).unwrap();
        assert!((r.dimension - 2.0).abs() < 0.1, "{r:?}");
    }

    #[test]
    fn box_count_rejects_bad_scales() {
        let p = [[0.5, 0.5]];
        assert!(box_count_dimension(&p, 3, 4).is_err());
        assert!(box_count_dimension(&p, 1, 5).is_err());
        assert!(box_count_dimension(&p, 3, 13).is_err());
        assert!(box_count_dimension(&[[1.5, 0.0]], 3, 6).is_err());
    }
}
