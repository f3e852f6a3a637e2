//! Squeezing and additive Gaussian noise.
//!
//! Both act on the final (padded) coordinates. One random diagonal or
//! covariance factor is drawn per cloud; per-row noise draws come from
//! row-labelled child streams.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{Distortion, PointCloud};
use crate::error::{Error, Result};
use crate::linalg::{RandomStream, RealMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Isotropic,
    Uncorrelated,
    Anisotropic,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Isotropic => "isotropic",
            NoiseKind::Uncorrelated => "uncorrelated",
            NoiseKind::Anisotropic => "anisotropic",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isotropic" => Ok(NoiseKind::Isotropic),
            "uncorrelated" => Ok(NoiseKind::Uncorrelated),
            "anisotropic" => Ok(NoiseKind::Anisotropic),
            _ => Err(Error::invalid(format!("unknown noise kind {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Noise scale σ²; the expected squared displacement per point.
    pub sigma2: f64,
}

/// Multiply every row by one diagonal matrix with entries drawn uniformly
/// from `[1 - ε/2, 1 + ε/2]`.
pub fn squeeze(cloud: &PointCloud, epsilon: f64, s: &RandomStream) -> Result<PointCloud> {
    let diag = squeeze_diagonal(cloud.dim(), epsilon, s)?;
    let Some(diag) = diag else {
        return Ok(cloud.clone());
    };
    let d = cloud.dim();
    let mut data = cloud.as_slice().to_vec();
    for row in data.chunks_exact_mut(d) {
        for (x, f) in row.iter_mut().zip(&diag) {
            *x *= f;
        }
    }
    cloud.derived(data, d, Distortion::Squeeze { epsilon, stream: s.label().to_owned() })
}

/// The squeezing diagonal, or `None` when `ε = 0`.
pub fn squeeze_diagonal(dim: usize, epsilon: f64, s: &RandomStream) -> Result<Option<Vec<f64>>> {
    if !(0.0..=2.0).contains(&epsilon) {
        return Err(Error::invalid(format!("squeeze epsilon must lie in [0, 2], got {epsilon}")));
    }
    if epsilon == 0.0 {
        return Ok(None);
    }
    let mut rs = s.clone();
    Ok(Some(
        (0..dim)
            .map(|_| rs.uniform_in(1.0 - epsilon / 2.0, 1.0 + epsilon / 2.0))
            .collect(),
    ))
}

/// Factor `A` of the unit-trace noise covariance, `A A^T = Σ'`.
pub fn noise_factor(kind: NoiseKind, dim: usize, s: &RandomStream) -> RealMatrix {
    let mut rs = s.clone();
    match kind {
        NoiseKind::Isotropic => RealMatrix::identity(dim, dim) / (dim as f64).sqrt(),
        NoiseKind::Uncorrelated => {
            let lambda: Vec<f64> =
                (0..dim).map(|_| rs.uniform_in(0.0, 2.0 / dim as f64)).collect();
            let trace: f64 = lambda.iter().sum();
            let mut a = RealMatrix::zeros(dim, dim);
            for (i, l) in lambda.iter().enumerate() {
                a[(i, i)] = (l / trace).sqrt();
            }
            a
        }
        NoiseKind::Anisotropic => {
            let u = rs.normal_matrix(dim, dim);
            // Tr(u u^T) is the squared Frobenius norm of u.
            let trace = u.norm_squared();
            u / trace.sqrt()
        }
    }
}

/// `x -> x + σ A z` with `z` standard normal per row.
pub fn add_noise(cloud: &PointCloud, noise: NoiseSpec, s: &RandomStream) -> Result<PointCloud> {
    if !(noise.sigma2 >= 0.0) || !noise.sigma2.is_finite() {
        return Err(Error::invalid(format!("sigma2 must be non-negative, got {}", noise.sigma2)));
    }
    if noise.sigma2 == 0.0 {
        return Ok(cloud.clone());
    }
    let d = cloud.dim();
    let a = noise_factor(noise.kind, d, &s.child("factor"));
    let sigma = noise.sigma2.sqrt();
    let diagonal = noise.kind != NoiseKind::Anisotropic;
    let rows: Vec<Vec<f64>> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let mut rs = s.child(format_args!("row/{i}"));
            let z: Vec<f64> = (0..d).map(|_| rs.normal()).collect();
            cloud
                .row(i)
                .iter()
                .enumerate()
                .map(|(r, x)| {
                    let e = if diagonal {
                        a[(r, r)] * z[r]
                    } else {
                        (0..d).map(|c| a[(r, c)] * z[c]).sum()
                    };
                    x + sigma * e
                })
                .collect()
        })
        .collect();
    let data = rows.concat();
    cloud.derived(
        data,
        d,
        Distortion::Noise { noise_kind: noise.kind, sigma2: noise.sigma2, stream: s.label().to_owned() },
    )
}
