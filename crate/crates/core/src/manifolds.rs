//! Samplers for the homogeneous-space embeddings and the baseline families.
//!
//! Every sampler is a pure function of `(spec, N, stream)`. Row `i` draws
//! its group element from the child stream `row/{i}`, so rows can be
//! generated in parallel without changing the output.
//!
//! | family      | manifold                            | `d_i`                          | minimal `d_a`          |
//! |-------------|-------------------------------------|--------------------------------|------------------------|
//! | `StMatrix`  | Stiefel `St(k, R^n)`                | `nk - k(k+1)/2`                | `nk`                   |
//! | `StVec`     | Stiefel, minors plus `SO(k)` frame  | `nk - k(k+1)/2`                | `C(n,k) + k^2`         |
//! | `GrProj`    | Grassmannian as projectors          | `k(n-k)`                       | `n^2`                  |
//! | `GrVec`     | Grassmannian via `k x k` minors     | `k(n-k)`                       | `C(n,k)`               |
//! | `FlagVec`   | two-step flag via products of minors| `(k1+k2)n - k1^2 - k2^2 - k1k2`| `C(n,k1) C(n,k2)`      |
//! | `Pauli`     | `U(n)` modulo a Pauli-type group    | `n^2`                          | `2n^4`                 |

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{Distortion, PointCloud};
use crate::error::{Error, Result};
use crate::linalg::{
    binomial, haar_special_orthogonal, haar_stiefel, haar_unitary, lex_subsets,
    minor_det_unchecked, ComplexMatrix, ComplexVector, RandomStream, RealMatrix,
};

/// Largest coordinate count the minor-based embeddings will build.
pub const MAX_COORDINATES: u128 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    StMatrix,
    StVec,
    GrProj,
    GrVec,
    FlagVec,
    Pauli,
    Sphere,
    Gaussian,
    Affine,
    #[serde(rename = "m-beta")]
    MBeta,
}

impl Family {
    pub const ALL: [Family; 10] = [
        Family::StMatrix,
        Family::StVec,
        Family::GrProj,
        Family::GrVec,
        Family::FlagVec,
        Family::Pauli,
        Family::Sphere,
        Family::Gaussian,
        Family::Affine,
        Family::MBeta,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::StMatrix => "st-matrix",
            Family::StVec => "st-vec",
            Family::GrProj => "gr-proj",
            Family::GrVec => "gr-vec",
            Family::FlagVec => "flag-vec",
            Family::Pauli => "pauli",
            Family::Sphere => "sphere",
            Family::Gaussian => "gaussian",
            Family::Affine => "affine",
            Family::MBeta => "m-beta",
        }
    }

    /// Baselines are parameterized directly by `d_i` instead of `(n, k)`.
    pub fn is_baseline(self) -> bool {
        matches!(self, Family::Sphere | Family::Gaussian | Family::Affine | Family::MBeta)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown family {s:?}")))
    }
}

/// A manifold family with its integer parameters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub family: Family,
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub k: usize,
    #[serde(default)]
    pub k1: usize,
    #[serde(default)]
    pub k2: usize,
    /// Intrinsic dimension of a baseline family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_i: Option<usize>,
    /// Ambient dimension to pad into; the minimum when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<usize>,
}

impl ManifoldSpec {
    fn base(family: Family) -> Self {
        ManifoldSpec { family, n: 0, k: 0, k1: 0, k2: 0, d_i: None, ambient: None }
    }

    pub fn st_matrix(n: usize, k: usize) -> Self {
        ManifoldSpec { n, k, ..Self::base(Family::StMatrix) }
    }

    pub fn st_vec(n: usize, k: usize) -> Self {
        ManifoldSpec { n, k, ..Self::base(Family::StVec) }
    }

    pub fn gr_proj(n: usize, k: usize) -> Self {
        ManifoldSpec { n, k, ..Self::base(Family::GrProj) }
    }

    pub fn gr_vec(n: usize, k: usize) -> Self {
        ManifoldSpec { n, k, ..Self::base(Family::GrVec) }
    }

    pub fn flag_vec(n: usize, k1: usize, k2: usize) -> Self {
        ManifoldSpec { n, k1, k2, ..Self::base(Family::FlagVec) }
    }

    pub fn pauli(n: usize) -> Self {
        ManifoldSpec { n, ..Self::base(Family::Pauli) }
    }

    pub fn sphere(d_i: usize) -> Self {
        ManifoldSpec { d_i: Some(d_i), ..Self::base(Family::Sphere) }
    }

    pub fn gaussian(d_i: usize) -> Self {
        ManifoldSpec { d_i: Some(d_i), ..Self::base(Family::Gaussian) }
    }

    pub fn affine(d_i: usize) -> Self {
        ManifoldSpec { d_i: Some(d_i), ..Self::base(Family::Affine) }
    }

    pub fn m_beta(d_i: usize) -> Self {
        ManifoldSpec { d_i: Some(d_i), ..Self::base(Family::MBeta) }
    }

    pub fn with_ambient(mut self, d_a: usize) -> Self {
        self.ambient = Some(d_a);
        self
    }

    /// Check the parameter constraints of the family.
    pub fn validate(&self) -> Result<()> {
        let (n, k) = (self.n, self.k);
        match self.family {
            Family::StMatrix | Family::StVec | Family::GrProj | Family::GrVec => {
                if n == 0 || k == 0 || k > n {
                    return Err(Error::invalid(format!(
                        "{} needs 1 <= k <= n, got n={n}, k={k}",
                        self.family
                    )));
                }
            }
            Family::FlagVec => {
                if n == 0 || self.k1 == 0 || self.k2 == 0 || self.k1 + self.k2 > n {
                    return Err(Error::invalid(format!(
                        "flag-vec needs k1, k2 >= 1 and k1 + k2 <= n, got n={n}, k1={}, k2={}",
                        self.k1, self.k2
                    )));
                }
            }
            Family::Pauli => {
                if !is_prime(n) {
                    return Err(Error::invalid(format!("pauli needs prime n, got {n}")));
                }
            }
            Family::Sphere | Family::Gaussian | Family::Affine | Family::MBeta => {
                if self.d_i.unwrap_or(0) == 0 {
                    return Err(Error::invalid(format!(
                        "{} needs a positive d_i",
                        self.family
                    )));
                }
            }
        }
        let min = min_ambient_dim_unchecked(self)?;
        if let Some(a) = self.ambient {
            if a < min {
                return Err(Error::invalid(format!(
                    "ambient dimension {a} below the minimum {min} for {}",
                    self.family
                )));
            }
        }
        Ok(())
    }

    /// Ambient dimension of sampled clouds.
    pub fn ambient_dim(&self) -> Result<usize> {
        let min = min_ambient_dim(self)?;
        Ok(self.ambient.unwrap_or(min))
    }

    /// Short human-readable key, also used in stream labels.
    pub fn key(&self) -> String {
        let mut s = match self.family {
            Family::FlagVec => format!("{}:{}:{}:{}", self.family, self.n, self.k1, self.k2),
            Family::Pauli => format!("{}:{}", self.family, self.n),
            f if f.is_baseline() => format!("{}:{}", f, self.d_i.unwrap_or(0)),
            f => format!("{}:{}:{}", f, self.n, self.k),
        };
        if let Some(a) = self.ambient {
            s.push_str(&format!("@{a}"));
        }
        s
    }
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Ground-truth intrinsic dimension.
pub fn intrinsic_dim(spec: &ManifoldSpec) -> Result<usize> {
    spec.validate()?;
    let (n, k) = (spec.n, spec.k);
    Ok(match spec.family {
        Family::StMatrix | Family::StVec => n * k - k * (k + 1) / 2,
        Family::GrProj | Family::GrVec => k * (n - k),
        Family::FlagVec => {
            let (k1, k2) = (spec.k1, spec.k2);
            (k1 + k2) * n - k1 * k1 - k2 * k2 - k1 * k2
        }
        Family::Pauli => n * n,
        _ => spec.d_i.expect("validated baseline"),
    })
}

fn checked_usize(x: Option<u128>, what: &str) -> Result<usize> {
    x.and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| Error::ResourceLimit(format!("{what} overflows")))
}

fn min_ambient_dim_unchecked(spec: &ManifoldSpec) -> Result<usize> {
    let (n, k) = (spec.n, spec.k);
    Ok(match spec.family {
        Family::StMatrix => n * k,
        Family::StVec => checked_usize(binomial(n, k), "C(n,k)")? + k * k,
        Family::GrProj => n * n,
        Family::GrVec => checked_usize(binomial(n, k), "C(n,k)")?,
        Family::FlagVec => checked_usize(
            binomial(n, spec.k1).zip(binomial(n, spec.k2)).and_then(|(a, b)| a.checked_mul(b)),
            "C(n,k1) C(n,k2)",
        )?,
        Family::Pauli => 2 * n.pow(4),
        Family::Sphere => spec.d_i.unwrap_or(0) + 1,
        Family::Gaussian | Family::Affine | Family::MBeta => spec.d_i.unwrap_or(0),
    })
}

/// Smallest ambient dimension of the family's embedding.
pub fn min_ambient_dim(spec: &ManifoldSpec) -> Result<usize> {
    spec.validate()?;
    min_ambient_dim_unchecked(spec)
}

fn check_points(n_points: usize) -> Result<()> {
    if n_points == 0 {
        return Err(Error::invalid("sample size N must be positive"));
    }
    Ok(())
}

fn check_coordinates(count: usize) -> Result<()> {
    if count as u128 > MAX_COORDINATES {
        return Err(Error::ResourceLimit(format!(
            "{count} coordinates exceed the limit of {MAX_COORDINATES}"
        )));
    }
    Ok(())
}

/// Generate `n_points` rows in parallel, row `i` from child stream `row/{i}`.
fn par_rows<F>(n_points: usize, dim: usize, s: &RandomStream, f: F) -> Result<Vec<f64>>
where
    F: Fn(&mut RandomStream) -> Result<Vec<f64>> + Sync,
{
    let rows: Vec<Vec<f64>> = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let mut rs = s.child(format_args!("row/{i}"));
            f(&mut rs)
        })
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(n_points * dim);
    for r in rows {
        debug_assert_eq!(r.len(), dim);
        data.extend_from_slice(&r);
    }
    Ok(data)
}

fn require(spec: &ManifoldSpec, family: Family) -> Result<()> {
    if spec.family != family {
        return Err(Error::invalid(format!(
            "expected a {family} spec, got {}",
            spec.family
        )));
    }
    spec.validate()
}

/// Column-stacked vectorization of a matrix.
pub fn st_matrix_embedding(frame: &RealMatrix) -> Vec<f64> {
    frame.as_slice().to_vec()
}

/// Vectorized projector `X X^T`.
pub fn gr_proj_embedding(frame: &RealMatrix) -> Vec<f64> {
    let p = frame * frame.transpose();
    p.as_slice().to_vec()
}

/// Minors of the column block `cols` over all row subsets, lexicographic.
fn minors(frame: &RealMatrix, subsets: &[Vec<usize>], cols: &[usize]) -> Vec<f64> {
    subsets.iter().map(|q| minor_det_unchecked(frame, q, cols)).collect()
}

/// `C(n,k)` coordinates: one `k x k` minor of the frame per row subset.
pub fn gr_vec_embedding(frame: &RealMatrix) -> Vec<f64> {
    let k = frame.ncols();
    let subsets = lex_subsets(frame.nrows(), k);
    let cols: Vec<usize> = (0..k).collect();
    minors(frame, &subsets, &cols)
}

/// Products of minors of the first `k1` and the next `k2` columns,
/// indexed by `(Q, P)` with `Q` the outer (slower) index.
pub fn flag_vec_embedding(frame: &RealMatrix, k1: usize, k2: usize) -> Vec<f64> {
    let n = frame.nrows();
    let first: Vec<usize> = (0..k1).collect();
    let second: Vec<usize> = (k1..k1 + k2).collect();
    let a = minors(frame, &lex_subsets(n, k1), &first);
    let b = minors(frame, &lex_subsets(n, k2), &second);
    outer(&a, &b)
}

fn outer(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        out.extend(b.iter().map(|y| x * y));
    }
    out
}

/// Stiefel points as vectorized `n x k` orthonormal frames.
pub fn sample_st_matrix(spec: &ManifoldSpec, n_points: usize, s: &RandomStream) -> Result<PointCloud> {
    require(spec, Family::StMatrix)?;
    check_points(n_points)?;
    let (n, k) = (spec.n, spec.k);
    let data = par_rows(n_points, n * k, s, |rs| Ok(st_matrix_embedding(&haar_stiefel(n, k, rs)?)))?;
    finish(spec, data, n_points, n * k, s)
}

/// Grassmannian points as vectorized projectors.
pub fn sample_gr_proj(spec: &ManifoldSpec, n_points: usize, s: &RandomStream) -> Result<PointCloud> {
    require(spec, Family::GrProj)?;
    check_points(n_points)?;
    let (n, k) = (spec.n, spec.k);
    let data = par_rows(n_points, n * n, s, |rs| Ok(gr_proj_embedding(&haar_stiefel(n, k, rs)?)))?;
    finish(spec, data, n_points, n * n, s)
}

/// Grassmannian points via the `k x k` minors of a random frame.
pub fn sample_gr_vec(spec: &ManifoldSpec, n_points: usize, s: &RandomStream) -> Result<PointCloud> {
    require(spec, Family::GrVec)?;
    check_points(n_points)?;
    let (n, k) = (spec.n, spec.k);
    let dim = min_ambient_dim(spec)?;
    check_coordinates(dim)?;
    let subsets = lex_subsets(n, k);
    let cols: Vec<usize> = (0..k).collect();
    let data = par_rows(n_points, dim, s, |rs| {
        let frame = haar_stiefel(n, k, rs)?;
        Ok(minors(&frame, &subsets, &cols))
    })?;
    finish(spec, data, n_points, dim, s)
}

/// Stiefel points as Grassmannian minors followed by a vectorized `SO(k)`
/// element, both drawn independently per row.
pub fn sample_st_vec(spec: &ManifoldSpec, n_points: usize, s: &RandomStream) -> Result<PointCloud> {
    require(spec, Family::StVec)?;
    check_points(n_points)?;
    let (n, k) = (spec.n, spec.k);
    let dim = min_ambient_dim(spec)?;
    check_coordinates(dim)?;
    let subsets = lex_subsets(n, k);
    let cols: Vec<usize> = (0..k).collect();
    let data = par_rows(n_points, dim, s, |rs| {
        let frame = haar_stiefel(n, k, &mut rs.child("frame"))?;
        let rot = haar_special_orthogonal(k, &mut rs.child("rotation"))?;
        let mut row = minors(&frame, &subsets, &cols);
        row.extend_from_slice(rot.as_slice());
        Ok(row)
    })?;
    finish(spec, data, n_points, dim, s)
}

/// Two-step flag points via products of minors of a random `n x (k1+k2)` frame.
pub fn sample_flag_vec(spec: &ManifoldSpec, n_points: usize, s: &RandomStream) -> Result<PointCloud> {
    require(spec, Family::FlagVec)?;
    check_points(n_points)?;
    let (n, k1, k2) = (spec.n, spec.k1, spec.k2);
    let dim = min_ambient_dim(spec)?;
    check_coordinates(dim)?;
    let first: Vec<usize> = (0..k1).collect();
    let second: Vec<usize> = (k1..k1 + k2).collect();
    let sub1 = lex_subsets(n, k1);
    let sub2 = lex_subsets(n, k2);
    let data = par_rows(n_points, dim, s, |rs| {
        let frame = haar_stiefel(n, k1 + k2, rs)?;
        Ok(outer(&minors(&frame, &sub1, &first), &minors(&frame, &sub2, &second)))
    })?;
    finish(spec, data, n_points, dim, s)
}

/// Orthonormal basis `|a, b̄> = n^{-1/2} sum_c |c, c+a, c+b, c+a+b>` of the
/// `n^2`-dimensional subspace, as index lists into `C^{n^4}`.
///
/// Returns, for each `(a, b)` in row-major order, the `n` flat indices
/// carrying amplitude `n^{-1/2}`.
pub fn pauli_subspace_supports(n: usize) -> Vec<Vec<usize>> {
    let flat = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            out.push(
                (0..n)
                    .map(|c| flat(c, (c + a) % n, (c + b) % n, (c + a + b) % n))
                    .collect(),
            );
        }
    }
    out
}

/// Random unit fiducial vector inside the Pauli-invariant subspace.
pub fn pauli_fiducial(n: usize, s: &mut RandomStream) -> ComplexVector {
    let supports = pauli_subspace_supports(n);
    let coeffs: Vec<Complex64> = (0..n * n).map(|_| s.complex_normal()).collect();
    let norm = coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let amp = 1.0 / (n as f64).sqrt();
    let mut v = ComplexVector::zeros(n.pow(4));
    for (support, c) in supports.iter().zip(&coeffs) {
        for &idx in support {
            v[idx] += c * (amp / norm);
        }
    }
    v
}

/// Apply `m` to tensor mode `mode` (0..4) of a vector in `C^{n^4}`.
fn apply_mode(v: &ComplexVector, m: &ComplexMatrix, mode: usize, n: usize) -> ComplexVector {
    let stride = n.pow(3 - mode as u32);
    let block = stride * n;
    let mut out = ComplexVector::zeros(v.len());
    for base in (0..v.len()).step_by(block) {
        for inner in 0..stride {
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    acc += m[(i, j)] * v[base + j * stride + inner];
                }
                out[base + i * stride + inner] = acc;
            }
        }
    }
    out
}

/// `(U ⊗ Ū ⊗ U ⊗ Ū) v`, applied one tensor mode at a time.
pub fn pauli_representation(u: &ComplexMatrix, v: &ComplexVector) -> ComplexVector {
    let n = u.nrows();
    let ubar = u.map(|z| z.conj());
    let mut w = apply_mode(v, u, 0, n);
    w = apply_mode(&w, &ubar, 1, n);
    w = apply_mode(&w, u, 2, n);
    apply_mode(&w, &ubar, 3, n)
}

/// Real parts followed by imaginary parts.
pub fn realify(v: &ComplexVector) -> Vec<f64> {
    v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
}

/// Points `Π(U)|H>` for Haar-random `U`, one shared fiducial `|H>` per cloud.
pub fn sample_pauli(spec: &ManifoldSpec, n_points: usize, s: &RandomStream) -> Result<PointCloud> {
    require(spec, Family::Pauli)?;
    check_points(n_points)?;
    let n = spec.n;
    let dim = 2 * n.pow(4);
    let fiducial = pauli_fiducial(n, &mut s.child("fiducial"));
    let data = par_rows(n_points, dim, s, |rs| {
        let u = haar_unitary(n, rs)?;
        Ok(realify(&pauli_representation(&u, &fiducial)))
    })?;
    finish(spec, data, n_points, dim, s)
}

/// Qudit shift `X|j> = |j+1>` and clock `Z|j> = ω^j |j>`.
pub fn qudit_paulis(n: usize) -> (ComplexMatrix, ComplexMatrix) {
    let mut x = ComplexMatrix::zeros(n, n);
    let mut z = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        x[((j + 1) % n, j)] = Complex64::new(1.0, 0.0);
        z[(j, j)] = Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 / n as f64);
    }
    (x, z)
}

/// `‖Π(g)|H> - |H>‖` for the shift and clock generators `g`.
///
/// The subspace is mapped into itself by both generators, but the clock acts
/// with a relative phase, so individual fiducials need not be fixed.
pub fn pauli_invariance_defect(fiducial: &ComplexVector) -> (f64, f64) {
    let n = (fiducial.len() as f64).powf(0.25).round() as usize;
    let (x, z) = qudit_paulis(n);
    let dx = (pauli_representation(&x, fiducial) - fiducial).norm();
    let dz = (pauli_representation(&z, fiducial) - fiducial).norm();
    (dx, dz)
}

/// Uniform points on the unit sphere `S^{d_i}`, padded to `d_a`.
pub fn sample_sphere(d_i: usize, d_a: usize, n_points: usize, s: &RandomStream) -> Result<PointCloud> {
    if d_i == 0 || d_a < d_i + 1 {
        return Err(Error::invalid(format!("sphere S^{d_i} needs d_a >= {}, got {d_a}", d_i + 1)));
    }
    check_points(n_points)?;
    let dim = d_i + 1;
    let data = par_rows(n_points, dim, s, |rs| {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rs.normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-300 {
                return Ok(v.into_iter().map(|x| x / norm).collect());
            }
        }
    })?;
    let spec = ManifoldSpec::sphere(d_i).with_ambient(d_a);
    let cloud = PointCloud::from_rows(data, n_points, dim, d_i as f64, "sphere", s.label())?
        .with_spec(spec);
    embed_pad(&cloud, d_a, &s.child("embed"))
}

/// Standard-normal `d_i`-vectors, isometrically padded to `d_a`.
pub fn sample_gaussian(d_i: usize, d_a: usize, n_points: usize, s: &RandomStream) -> Result<PointCloud> {
    if d_i == 0 || d_a < d_i {
        return Err(Error::invalid(format!("gaussian needs 1 <= d_i <= d_a, got {d_i}, {d_a}")));
    }
    check_points(n_points)?;
    let data = par_rows(n_points, d_i, s, |rs| Ok((0..d_i).map(|_| rs.normal()).collect()))?;
    let spec = ManifoldSpec::gaussian(d_i).with_ambient(d_a);
    let cloud = PointCloud::from_rows(data, n_points, d_i, d_i as f64, "gaussian", s.label())?
        .with_spec(spec);
    embed_pad(&cloud, d_a, &s.child("embed"))
}

/// Gaussian combinations of a nullspace basis of a random rank
/// `d_a - d_i` matrix `A`. Returns the cloud together with `A`.
pub fn sample_affine_with_matrix(
    d_i: usize,
    d_a: usize,
    n_points: usize,
    s: &RandomStream,
) -> Result<(PointCloud, RealMatrix)> {
    if d_i == 0 || d_a < d_i {
        return Err(Error::invalid(format!("affine needs 1 <= d_i <= d_a, got {d_i}, {d_a}")));
    }
    check_points(n_points)?;
    let rank = d_a - d_i;
    let mut ms = s.child("matrix");
    let a = if rank == 0 {
        RealMatrix::zeros(d_a, d_a)
    } else {
        ms.normal_matrix(d_a, rank) * ms.normal_matrix(rank, d_a)
    };
    // Right singular vectors of the d_i smallest singular values span the
    // nullspace.
    let basis = if rank == 0 {
        RealMatrix::identity(d_a, d_a)
    } else {
        let svd = a.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..d_a).collect();
        order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
        let mut b = RealMatrix::zeros(d_a, d_i);
        for (j, &idx) in order.iter().take(d_i).enumerate() {
            b.set_column(j, &v_t.row(idx).transpose());
        }
        b
    };
    let data = par_rows(n_points, d_a, s, |rs| {
        let z: Vec<f64> = (0..d_i).map(|_| rs.normal()).collect();
        Ok((0..d_a)
            .map(|r| (0..d_i).map(|j| basis[(r, j)] * z[j]).sum())
            .collect())
    })?;
    let spec = ManifoldSpec::affine(d_i).with_ambient(d_a);
    let cloud = PointCloud::from_rows(data, n_points, d_a, d_i as f64, "affine", s.label())?
        .with_spec(spec);
    Ok((cloud, a))
}

pub fn sample_affine(d_i: usize, d_a: usize, n_points: usize, s: &RandomStream) -> Result<PointCloud> {
    Ok(sample_affine_with_matrix(d_i, d_a, n_points, s)?.0)
}

/// `sin(cos(2πX))` of uniform `X` in `[0,1)^{d_i}`, padded to `d_a`.
/// Returns the cloud and the isometry used (`d_i x d_a`, or `None` when
/// no padding was needed).
pub fn sample_mbeta_with_isometry(
    d_i: usize,
    d_a: usize,
    n_points: usize,
    s: &RandomStream,
) -> Result<(PointCloud, Option<RealMatrix>)> {
    if d_i == 0 || d_a < d_i {
        return Err(Error::invalid(format!("m-beta needs 1 <= d_i <= d_a, got {d_i}, {d_a}")));
    }
    check_points(n_points)?;
    let data = par_rows(n_points, d_i, s, |rs| {
        Ok((0..d_i)
            .map(|_| (std::f64::consts::TAU * rs.uniform()).cos().sin())
            .collect())
    })?;
    let spec = ManifoldSpec::m_beta(d_i).with_ambient(d_a);
    let cloud = PointCloud::from_rows(data, n_points, d_i, d_i as f64, "m-beta", s.label())?
        .with_spec(spec);
    embed_pad_with_isometry(&cloud, d_a, &s.child("embed"))
}

pub fn sample_mbeta(d_i: usize, d_a: usize, n_points: usize, s: &RandomStream) -> Result<PointCloud> {
    Ok(sample_mbeta_with_isometry(d_i, d_a, n_points, s)?.0)
}

/// Re-embed a cloud isometrically into `target` dimensions. Also returns
/// the `d_a x target` isometry, or `None` when the dimension is unchanged.
pub fn embed_pad_with_isometry(
    cloud: &PointCloud,
    target: usize,
    s: &RandomStream,
) -> Result<(PointCloud, Option<RealMatrix>)> {
    let d = cloud.dim();
    if target < d {
        return Err(Error::invalid(format!(
            "cannot pad a {d}-dimensional cloud into {target} dimensions"
        )));
    }
    if target == d {
        return Ok((cloud.clone(), None));
    }
    // The first d rows of a Haar O(target) matrix: transpose of a Haar frame.
    let w = haar_stiefel(target, d, &mut s.clone())?.transpose();
    let moved = cloud.transformed(&w)?;
    let out = cloud.derived(
        moved.as_slice().to_vec(),
        target,
        Distortion::Isometry { from: d, to: target, stream: s.label().to_owned() },
    )?;
    Ok((out, Some(w)))
}

pub fn embed_pad(cloud: &PointCloud, target: usize, s: &RandomStream) -> Result<PointCloud> {
    Ok(embed_pad_with_isometry(cloud, target, s)?.0)
}

fn finish(
    spec: &ManifoldSpec,
    data: Vec<f64>,
    n_points: usize,
    dim: usize,
    s: &RandomStream,
) -> Result<PointCloud> {
    let d_i = intrinsic_dim(spec)?;
    let cloud = PointCloud::from_rows(data, n_points, dim, d_i as f64, spec.family.as_str(), s.label())?
        .with_spec(spec.clone());
    match spec.ambient {
        Some(a) if a > dim => embed_pad(&cloud, a, &s.child("embed")),
        _ => Ok(cloud),
    }
}

/// Sample any family, padding to `spec.ambient` when requested.
pub fn sample(spec: &ManifoldSpec, n_points: usize, s: &RandomStream) -> Result<PointCloud> {
    spec.validate()?;
    let d_a = spec.ambient_dim()?;
    match spec.family {
        Family::StMatrix => sample_st_matrix(spec, n_points, s),
        Family::StVec => sample_st_vec(spec, n_points, s),
        Family::GrProj => sample_gr_proj(spec, n_points, s),
        Family::GrVec => sample_gr_vec(spec, n_points, s),
        Family::FlagVec => sample_flag_vec(spec, n_points, s),
        Family::Pauli => sample_pauli(spec, n_points, s),
        Family::Sphere => sample_sphere(spec.d_i.unwrap_or(0), d_a, n_points, s),
        Family::Gaussian => sample_gaussian(spec.d_i.unwrap_or(0), d_a, n_points, s),
        Family::Affine => sample_affine(spec.d_i.unwrap_or(0), d_a, n_points, s),
        Family::MBeta => sample_mbeta(spec.d_i.unwrap_or(0), d_a, n_points, s),
    }
}
