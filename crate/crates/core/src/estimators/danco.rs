//! DANCo: pick the dimension whose uniform-ball calibration best matches the
//! observed neighbor-distance and neighbor-angle statistics.
//!
//! Two statistics are extracted from a cloud:
//!
//! * the maximum-likelihood dimension of the normalized distances
//!   `r = T_1 / T_k`, whose density for a uniform `d`-ball is
//!   `g(r; k', d) = k' d r^{d-1} (1 - r^d)^{k'-1}` with `k' = k - 1`;
//! * a von Mises fit `(ν, τ)` of the pairwise angles between neighbor
//!   offsets, averaged over points.
//!
//! The same statistics are computed on synthetic uniform `d`-balls of equal
//! `(N, k)` for each candidate `d`. The estimate minimizes the sum of the
//! closed-form KL divergences between the fitted distributions.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::linalg::{derive_stream, RandomStream};
use crate::neighbors::{squared_distance, NeighborTable};

/// Largest candidate dimension.
pub const D_CAP: usize = 100;

/// Query points per calibration cloud.
pub const CALIB_QUERIES: usize = 256;

/// Ceiling on calibration work, in coordinate differences evaluated.
pub const CALIB_BUDGET: f64 = 2e11;

/// Fitted statistics of one cloud.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DancoStats {
    pub d_ml: f64,
    pub nu: f64,
    pub tau: f64,
}

type CalibKey = (u64, usize, usize, usize, usize);

fn calib_cache() -> &'static Mutex<HashMap<CalibKey, Option<DancoStats>>> {
    static CACHE: OnceLock<Mutex<HashMap<CalibKey, Option<DancoStats>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Largest mean resultant length fed to [`inverse_bessel_ratio`]; caps the
/// concentration near `5000`.
pub const MAX_RESULTANT: f64 = 1.0 - 1e-4;

/// Best–Fisher approximation to the inverse of `A(τ) = I_1(τ) / I_0(τ)`.
pub fn inverse_bessel_ratio(r: f64) -> f64 {
    let r = r.clamp(0.0, MAX_RESULTANT);
    if r < 0.53 {
        2.0 * r + r.powi(3) + 5.0 * r.powi(5) / 6.0
    } else if r < 0.85 {
        -0.4 + 1.39 * r + 0.43 / (1.0 - r)
    } else {
        1.0 / (r.powi(3) - 4.0 * r * r + 3.0 * r)
    }
}

/// `I_n(x) e^{-x}` for `n ∈ {0, 1}` and `x >= 0`.
pub fn bessel_i_scaled(n: u32, x: f64) -> f64 {
    if x > 1e4 {
        let t = 1.0 / (8.0 * x);
        let series = match n {
            0 => 1.0 + t + 4.5 * t * t,
            _ => 1.0 - 3.0 * t - 7.5 * t * t,
        };
        return series / (2.0 * PI * x).sqrt();
    }
    const M: usize = 4096;
    let h = PI / M as f64;
    let f = |t: f64| (x * (t.cos() - 1.0)).exp() * (n as f64 * t).cos();
    let mut sum = 0.5 * (f(0.0) + f(PI));
    for j in 1..M {
        sum += f(j as f64 * h);
    }
    sum * h / PI
}

fn ln_i0(x: f64) -> f64 {
    x + bessel_i_scaled(0, x).ln()
}

fn bessel_ratio(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    bessel_i_scaled(1, x) / bessel_i_scaled(0, x)
}

/// KL divergence between von Mises laws `(ν1, τ1)` and `(ν2, τ2)`.
pub fn kl_von_mises(nu1: f64, tau1: f64, nu2: f64, tau2: f64) -> f64 {
    ln_i0(tau2) - ln_i0(tau1) + bessel_ratio(tau1) * (tau1 - tau2 * (nu1 - nu2).cos())
}

/// `E[ln(1 - u^c)]` for `u ~ Beta(1, k')`.
fn expected_ln_one_minus_pow(kp: usize, c: f64) -> f64 {
    let mut sum = 0.0;
    for m in 1..=1_000_000usize {
        let s = c * m as f64;
        let ln_moment: f64 = (1..=kp).map(|j| -(s / j as f64).ln_1p()).sum();
        let term = ln_moment.exp() / m as f64;
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    -sum
}

/// KL divergence between `g(·; k', a)` and `g(·; k', b)`.
pub fn kl_distance_law(kp: usize, a: f64, b: f64) -> f64 {
    let harmonic: f64 = (1..=kp).map(|j| 1.0 / j as f64).sum();
    let kpf = kp as f64;
    (a / b).ln() - (a - b) * harmonic / a
        + (kpf - 1.0) * (-1.0 / kpf - expected_ln_one_minus_pow(kp, b / a))
}

/// Maximum-likelihood `d` for ratios `r ∈ (0, 1)` under `g(r; k', d)`.
pub fn ml_dimension(ratios: &[f64], kp: usize) -> Option<f64> {
    let logs: Vec<f64> = ratios.iter().filter(|&&r| r > 0.0 && r < 1.0).map(|r| r.ln()).collect();
    if logs.is_empty() {
        return None;
    }
    let n = logs.len() as f64;
    let sum_log: f64 = logs.iter().sum();
    let km1 = kp as f64 - 1.0;
    // The log-likelihood is concave in d, so its derivative has one root.
    let slope = |d: f64| {
        let tail: f64 = logs
            .iter()
            .map(|&l| {
                let rd = (d * l).exp();
                rd * l / -(d * l).exp_m1()
            })
            .sum();
        n / d + sum_log - km1 * tail
    };
    let (mut lo, mut hi) = (1e-6f64, 1e4f64);
    if slope(hi) > 0.0 {
        return Some(hi);
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-13 {
            break;
        }
    }
    Some((lo * hi).sqrt())
}

/// Per-point summary: distance ratio `T_1/T_k` and, for the pairwise offset
/// angles, the cosine sum, sine sum and pair count.
type PointStats = (f64, Option<(f64, f64, f64)>);

fn point_stats(query: &[f64], neighbors: &[&[f64]], dists: &[f64]) -> PointStats {
    let ratio = dists[0] / dists[dists.len() - 1];
    let units: Vec<Vec<f64>> = neighbors
        .iter()
        .filter_map(|nb| {
            let v: Vec<f64> = nb.iter().zip(query).map(|(a, b)| a - b).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            (norm > 0.0).then(|| v.iter().map(|x| x / norm).collect())
        })
        .collect();
    let m = units.len();
    if m < 2 {
        return (ratio, None);
    }
    let (mut c, mut s) = (0.0, 0.0);
    for i in 0..m {
        for j in i + 1..m {
            let cos: f64 = units[i].iter().zip(&units[j]).map(|(a, b)| a * b).sum();
            let theta = cos.clamp(-1.0, 1.0).acos();
            c += theta.cos();
            s += theta.sin();
        }
    }
    (ratio, Some((c, s, (m * (m - 1) / 2) as f64)))
}

/// Direction and concentration are fitted per point, then averaged.
fn summarize(points: &[PointStats], kp: usize) -> Option<DancoStats> {
    let ratios: Vec<f64> = points.iter().map(|p| p.0).collect();
    let d_ml = ml_dimension(&ratios, kp)?;
    let fits: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.1)
        .map(|(c, s, pairs)| (s.atan2(c), inverse_bessel_ratio((c * c + s * s).sqrt() / pairs)))
        .collect();
    if fits.is_empty() {
        return None;
    }
    let m = fits.len() as f64;
    Some(DancoStats {
        d_ml,
        nu: fits.iter().map(|f| f.0).sum::<f64>() / m,
        tau: fits.iter().map(|f| f.1).sum::<f64>() / m,
    })
}

/// Statistics of an observed cloud from its first `k` neighbors.
pub fn observed_stats(cloud: &PointCloud, table: &NeighborTable, k: usize) -> Option<DancoStats> {
    let points: Vec<_> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let nb: Vec<&[f64]> = table.indices(i)[..k].iter().map(|&j| cloud.row(j)).collect();
            point_stats(cloud.row(i), &nb, &table.distances(i)[..k])
        })
        .collect();
    summarize(&points, k - 1)
}

fn ball_cloud(n: usize, d: usize, s: &mut RandomStream) -> Vec<f64> {
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let z: Vec<f64> = (0..d).map(|_| s.normal()).collect();
        let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        let radius = s.uniform().powf(1.0 / d as f64);
        data.extend(z.iter().map(|x| x / norm * radius));
    }
    data
}

fn calibration_set(n: usize, k: usize, d: usize, s: &mut RandomStream) -> Vec<PointStats> {
    let data = ball_cloud(n, d, s);
    let row = |i: usize| &data[i * d..(i + 1) * d];
    (0..n.min(CALIB_QUERIES))
        .into_par_iter()
        .map(|q| {
            let mut cand: Vec<(f64, usize)> =
                (0..n).filter(|&j| j != q).map(|j| (squared_distance(row(q), row(j)), j)).collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, cmp);
                cand.truncate(k);
            }
            cand.sort_unstable_by(cmp);
            let nb: Vec<&[f64]> = cand.iter().map(|c| row(c.1)).collect();
            let dists: Vec<f64> = cand.iter().map(|c| c.0.sqrt()).collect();
            point_stats(row(q), &nb, &dists)
        })
        .collect()
}

/// Calibration statistics for candidate `d`, pooled over `calib_sets` balls.
pub fn calibration_stats(seed: u64, n: usize, k: usize, d: usize, calib_sets: usize) -> Option<DancoStats> {
    let key = (seed, n, k, d, calib_sets);
    if let Some(hit) = calib_cache().lock().expect("calibration cache poisoned").get(&key) {
        return *hit;
    }
    let base = derive_stream(seed, &format!("danco/calib/{d}"));
    let mut points = Vec::new();
    for c in 0..calib_sets {
        points.extend(calibration_set(n, k, d, &mut base.child(c)));
    }
    let stats = summarize(&points, k - 1);
    calib_cache().lock().expect("calibration cache poisoned").insert(key, stats);
    stats
}

/// DANCo estimate, or `Ok(None)` when the observed statistics are undefined.
pub fn danco(
    cloud: &PointCloud,
    table: &NeighborTable,
    k: usize,
    calib_sets: usize,
    seed: u64,
) -> Result<Option<f64>> {
    let n = cloud.len();
    if k < 5 || n <= k {
        return Err(Error::invalid(format!("danco needs k >= 5 and N > k, got k={k}, N={n}")));
    }
    if calib_sets == 0 {
        return Err(Error::invalid("danco needs at least one calibration set"));
    }
    if table.k() < k || table.len() != n {
        return Err(Error::invalid("neighbor table does not cover k"));
    }
    let d_cap = cloud.dim().min(D_CAP);
    let work = calib_sets as f64 * n.min(CALIB_QUERIES) as f64 * n as f64 * (d_cap * (d_cap + 1) / 2) as f64;
    if work > CALIB_BUDGET {
        return Err(Error::ResourceLimit(format!(
            "danco calibration needs {work:.2e} operations, budget is {CALIB_BUDGET:.0e}"
        )));
    }
    let Some(obs) = observed_stats(cloud, table, k) else {
        return Ok(None);
    };
    let kp = k - 1;
    let calib: Vec<Option<DancoStats>> =
        (1..=d_cap).into_par_iter().map(|d| calibration_stats(seed, n, k, d, calib_sets)).collect();
    let mut best: Option<(usize, f64)> = None;
    for (d, cal) in (1..=d_cap).zip(calib) {
        let Some(cal) = cal else { continue };
        let kl = kl_distance_law(kp, obs.d_ml, cal.d_ml) + kl_von_mises(obs.nu, obs.tau, cal.nu, cal.tau);
        if kl.is_finite() && best.is_none_or(|(_, b)| kl < b) {
            best = Some((d, kl));
        }
    }
    Ok(best.map(|(d, _)| d as f64))
}
