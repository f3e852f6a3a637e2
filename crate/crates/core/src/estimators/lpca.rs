//! Local PCA: dimension read off the spectrum of a neighborhood covariance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Eigenvalues below this are treated as this value when forming ratios.
pub const EIGEN_FLOOR: f64 = 1e-30;

/// Where neighbor offsets are measured from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalCenter {
    /// Offsets from the query point itself.
    #[default]
    QueryPoint,
    /// Offsets from the neighborhood mean.
    NeighborhoodMean,
}

/// Descending eigenvalues of `(1/k) Σ v v^T` over the `k` neighbor offsets.
///
/// Computed from the singular values of the `k x d_a` offset matrix, which
/// keeps null directions at the level of rounding error squared.
pub fn local_spectrum(query: &[f64], neighbors: &[&[f64]], center: LocalCenter) -> Vec<f64> {
    let k = neighbors.len();
    let d = query.len();
    let origin: Vec<f64> = match center {
        LocalCenter::QueryPoint => query.to_vec(),
        LocalCenter::NeighborhoodMean => {
            let mut m = vec![0.0; d];
            for nb in neighbors {
                for (acc, x) in m.iter_mut().zip(nb.iter()) {
                    *acc += x / k as f64;
                }
            }
            m
        }
    };
    let offsets = DMatrix::from_fn(k, d, |i, j| neighbors[i][j] - origin[j]);
    let sv = offsets.svd(false, false).singular_values;
    let mut ev: Vec<f64> = sv.iter().map(|s| s * s / k as f64).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Index `j` (1-based) maximizing `λ_j / λ_{j+1}`; ties go to the smaller `j`.
///
/// `None` when every eigenvalue is below the floor or fewer than two are
/// given.
pub fn maxgap_dimension(spectrum: &[f64]) -> Option<f64> {
    if spectrum.len() < 2 || spectrum.iter().all(|&l| l < EIGEN_FLOOR) {
        return None;
    }
    let fl: Vec<f64> = spectrum.iter().map(|&l| l.max(EIGEN_FLOOR)).collect();
    let mut best = 1;
    let mut best_ratio = f64::NEG_INFINITY;
    for j in 1..fl.len() {
        let r = fl[j - 1] / fl[j];
        if r > best_ratio {
            best_ratio = r;
            best = j;
        }
    }
    Some(best as f64)
}

/// Smallest `j` whose cumulative variance fraction reaches `1 - ε`.
pub fn ratio_dimension(spectrum: &[f64], epsilon: f64) -> Option<f64> {
    let pos: Vec<f64> = spectrum.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = pos.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut acc = 0.0;
    for (j, l) in pos.iter().enumerate() {
        acc += l;
        if acc / total >= 1.0 - epsilon {
            return Some((j + 1) as f64);
        }
    }
    Some(pos.len() as f64)
}

/// Number of eigenvalues at or above `(1 - ε) λ_1`.
pub fn fo_dimension(spectrum: &[f64], epsilon: f64) -> Option<f64> {
    let top = *spectrum.first()?;
    if !(top > 0.0) {
        return None;
    }
    let threshold = (1.0 - epsilon) * top;
    Some(spectrum.iter().filter(|&&l| l >= threshold).count() as f64)
}
