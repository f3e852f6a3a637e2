//! Deterministic random streams, Haar sampling on the classical groups,
//! minors and symmetric eigendecomposition.
//!
//! Every random quantity in the crate is drawn from a [`RandomStream`]
//! keyed by a master seed and a textual label. Streams are counter-based
//! (ChaCha8 seeded by a SHA-256 digest of the key), so two streams never
//! share state and parallel consumers can derive per-row children without
//! coordinating.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// A reproducible random stream identified by `(master_seed, label)`.
#[derive(Clone, Debug)]
pub struct RandomStream {
    master_seed: u64,
    label: String,
    rng: ChaCha8Rng,
}

impl RandomStream {
    /// Derive the stream for `(master_seed, label)`.
    pub fn derive(master_seed: u64, label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(master_seed.to_le_bytes());
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        RandomStream {
            master_seed,
            label: label.to_owned(),
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// Child stream whose label is this label extended by `/part`.
    ///
    /// The child depends only on the key, never on how much of the parent
    /// has been consumed.
    pub fn child(&self, part: impl std::fmt::Display) -> Self {
        RandomStream::derive(self.master_seed, &format!("{}/{}", self.label, part))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire-style rejection keeps the draw unbiased.
        let n64 = n as u64;
        let zone = u64::MAX - (u64::MAX % n64);
        loop {
            let v = self.rng.next_u64();
            if v < zone {
                return (v % n64) as usize;
            }
        }
    }

    /// Complex normal with `E|z|^2 = 1`.
    pub fn complex_normal(&mut self) -> Complex64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Complex64::new(s * self.normal(), s * self.normal())
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> RealMatrix {
        // Fill in row-major logical order so the stream layout does not
        // depend on the storage order of the matrix type.
        let mut m = RealMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self.normal();
            }
        }
        m
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Free-function alias of [`RandomStream::derive`].
pub fn derive_stream(master_seed: u64, label: &str) -> RandomStream {
    RandomStream::derive(master_seed, label)
}

fn sign_or_one(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Haar-distributed `n x k` matrix with orthonormal columns.
///
/// Thin QR of an `n x k` standard-normal matrix with the sign of each
/// diagonal entry of R moved onto Q. The result is distributed as the
/// first `k` columns of a Haar O(n) draw.
pub fn haar_stiefel(n: usize, k: usize, s: &mut RandomStream) -> Result<RealMatrix> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::invalid(format!(
            "Stiefel frame needs 1 <= k <= n, got n={n}, k={k}"
        )));
    }
    let g = s.normal_matrix(n, k);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..k {
        let sg = sign_or_one(r[(j, j)]);
        if sg < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Haar-distributed orthogonal `n x n` matrix.
pub fn haar_orthogonal(n: usize, s: &mut RandomStream) -> Result<RealMatrix> {
    if n == 0 {
        return Err(Error::invalid("haar_orthogonal: n must be positive"));
    }
    haar_stiefel(n, n, s)
}

/// Haar-distributed special orthogonal `k x k` matrix.
pub fn haar_special_orthogonal(k: usize, s: &mut RandomStream) -> Result<RealMatrix> {
    if k == 0 {
        return Err(Error::invalid("haar_special_orthogonal: k must be positive"));
    }
    let mut o = haar_orthogonal(k, s)?;
    if det(&o) < 0.0 {
        o.column_mut(0).neg_mut();
    }
    Ok(o)
}

/// Haar-distributed unitary `n x n` matrix.
pub fn haar_unitary(n: usize, s: &mut RandomStream) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::invalid("haar_unitary: n must be positive"));
    }
    let mut g = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = s.complex_normal();
        }
    }
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let norm = d.norm();
        let phase = if norm > 0.0 { d / norm } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

const PIVOT_FLOOR: f64 = 1e-12;

/// Determinant of a square matrix by LU with partial pivoting.
///
/// A pivot below `1e-12` in magnitude marks the matrix singular and the
/// determinant is reported as exactly zero.
pub fn det(m: &RealMatrix) -> f64 {
    assert_eq!(m.nrows(), m.ncols(), "det of non-square matrix");
    let n = m.nrows();
    let mut a = m.clone();
    det_in_place(&mut a, n)
}

fn det_in_place(a: &mut RealMatrix, n: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..n {
        let mut p = c;
        let mut best = a[(c, c)].abs();
        for r in c + 1..n {
            let v = a[(r, c)].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best < PIVOT_FLOOR {
            return 0.0;
        }
        if p != c {
            a.swap_rows(p, c);
            det = -det;
        }
        let pivot = a[(c, c)];
        det *= pivot;
        for r in c + 1..n {
            let f = a[(r, c)] / pivot;
            if f != 0.0 {
                for j in c + 1..n {
                    let upd = a[(c, j)];
                    a[(r, j)] -= f * upd;
                }
            }
        }
    }
    det
}

fn check_indices(set: &[usize], bound: usize, what: &str) -> Result<()> {
    for (i, &x) in set.iter().enumerate() {
        if x >= bound {
            return Err(Error::invalid(format!("{what} index {x} out of range {bound}")));
        }
        if set[..i].contains(&x) {
            return Err(Error::invalid(format!("duplicate {what} index {x}")));
        }
    }
    Ok(())
}

/// Determinant of the submatrix selected by `rows` and `cols`, in the
/// given order (so permuting `rows` flips the sign accordingly).
pub fn minor_det(m: &RealMatrix, rows: &[usize], cols: &[usize]) -> Result<f64> {
    if rows.len() != cols.len() {
        return Err(Error::invalid("minor_det: row and column sets differ in size"));
    }
    if rows.len() > m.nrows().min(m.ncols()) {
        return Err(Error::invalid("minor_det: selection larger than matrix"));
    }
    check_indices(rows, m.nrows(), "row")?;
    check_indices(cols, m.ncols(), "column")?;
    Ok(minor_det_unchecked(m, rows, cols))
}

/// [`minor_det`] without index validation, for hot loops over
/// pre-validated subsets.
pub(crate) fn minor_det_unchecked(m: &RealMatrix, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    match k {
        0 => 1.0,
        1 => m[(rows[0], cols[0])],
        2 => {
            m[(rows[0], cols[0])] * m[(rows[1], cols[1])]
                - m[(rows[0], cols[1])] * m[(rows[1], cols[0])]
        }
        _ => {
            let mut sub = RealMatrix::from_fn(k, k, |i, j| m[(rows[i], cols[j])]);
            det_in_place(&mut sub, k)
        }
    }
}

/// Eigenvalues of a symmetric matrix in descending order, with the
/// matching eigenvectors as columns.
pub fn sym_eig_desc(s: &RealMatrix) -> Result<(DVector<f64>, RealMatrix)> {
    let n = s.nrows();
    if n != s.ncols() {
        return Err(Error::invalid("sym_eig_desc: matrix is not square"));
    }
    let scale = s.amax().max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            if (s[(i, j)] - s[(j, i)]).abs() > 1e-8 * scale {
                return Err(Error::invalid(format!(
                    "sym_eig_desc: asymmetric entry at ({i},{j})"
                )));
            }
        }
    }
    let eig = SymmetricEigen::new(s.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = RealMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues_desc(s: &RealMatrix) -> Result<Vec<f64>> {
    let (values, _) = sym_eig_desc(s)?;
    Ok(values.iter().copied().collect())
}

/// Binomial coefficient, `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn lex_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // Rightmost position that can still advance.
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_orthogonality_defect(o: &RealMatrix) -> f64 {
        let g = o.transpose() * o;
        (g - RealMatrix::identity(o.ncols(), o.ncols())).amax()
    }

    #[test]
    fn same_key_same_sequence() {
        let mut a = derive_stream(42, "a");
        let mut b = derive_stream(42, "a");
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn labels_separate_streams() {
        let mut a = derive_stream(42, "a");
        let mut b = derive_stream(42, "b");
        let xa: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn interleaved_consumption_matches_solo_replay() {
        let solo_a: Vec<f64> = {
            let mut s = derive_stream(42, "a");
            (0..50).map(|_| s.normal()).collect()
        };
        let solo_b: Vec<f64> = {
            let mut s = derive_stream(42, "b");
            (0..50).map(|_| s.normal()).collect()
        };
        let mut a = derive_stream(42, "a");
        let mut b = derive_stream(42, "b");
        let mut ia = Vec::new();
        let mut ib = Vec::new();
        for i in 0..50 {
            ia.push(a.normal());
            if i % 3 == 0 {
                ib.push(b.normal());
                ib.push(b.normal());
            }
        }
        while ib.len() < 50 {
            ib.push(b.normal());
        }
        ib.truncate(50);
        assert_eq!(ia, solo_a);
        assert_eq!(ib, solo_b);
    }

    #[test]
    fn child_independent_of_parent_consumption() {
        let p = derive_stream(7, "root");
        let mut consumed = p.clone();
        for _ in 0..10 {
            consumed.next_u64();
        }
        let mut c1 = p.child("row/3");
        let mut c2 = consumed.child("row/3");
        assert_eq!(c1.next_u64(), c2.next_u64());
        assert_eq!(c1.label(), "root/row/3");
    }

    #[test]
    fn haar_o1_is_plus_or_minus_one() {
        let mut plus = 0;
        for i in 0..400 {
            let mut s = derive_stream(1, &format!("o1/{i}"));
            let o = haar_orthogonal(1, &mut s).unwrap();
            assert_eq!(o[(0, 0)].abs(), 1.0);
            if o[(0, 0)] > 0.0 {
                plus += 1;
            }
        }
        // Binomial(400, 1/2): 5 sigma is 50.
        assert!((plus as i32 - 200).abs() < 50, "plus count {plus}");
    }

    #[test]
    fn haar_orthogonal_is_orthogonal() {
        let mut s = derive_stream(3, "o5");
        for _ in 0..20 {
            let o = haar_orthogonal(5, &mut s).unwrap();
            assert!(max_orthogonality_defect(&o) < 1e-10);
            assert!((det(&o).abs() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn haar_first_column_uniform_on_sphere() {
        let mut s = derive_stream(11, "o3");
        let mut mean = [0.0; 3];
        let trials = 10_000;
        for _ in 0..trials {
            let o = haar_orthogonal(3, &mut s).unwrap();
            for i in 0..3 {
                mean[i] += o[(i, 0)] / trials as f64;
            }
        }
        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm < 0.05, "mean norm {norm}");
    }

    #[test]
    fn zero_size_rejected() {
        let mut s = derive_stream(0, "z");
        assert!(matches!(haar_orthogonal(0, &mut s), Err(Error::InvalidParameter(_))));
        assert!(matches!(
            haar_special_orthogonal(0, &mut s),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(haar_unitary(0, &mut s), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn special_orthogonal_has_unit_determinant() {
        let mut s = derive_stream(5, "so");
        let one = haar_special_orthogonal(1, &mut s).unwrap();
        assert_eq!(one[(0, 0)], 1.0);
        for _ in 0..20 {
            let v = haar_special_orthogonal(4, &mut s).unwrap();
            assert!(max_orthogonality_defect(&v) < 1e-10);
            assert!((det(&v) - 1.0).abs() < 1e-8);
        }
        let r = haar_special_orthogonal(2, &mut s).unwrap();
        assert!((r[(0, 0)] - r[(1, 1)]).abs() < 1e-12);
        assert!((r[(0, 1)] + r[(1, 0)]).abs() < 1e-12);
    }

    #[test]
    fn unitary_properties() {
        let mut s = derive_stream(9, "u");
        let u1 = haar_unitary(1, &mut s).unwrap();
        assert!((u1[(0, 0)].norm() - 1.0).abs() < 1e-12);
        let u = haar_unitary(3, &mut s).unwrap();
        let g = u.adjoint() * &u;
        let defect = (g - ComplexMatrix::identity(3, 3)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(defect < 1e-10);
        let d = u.clone().determinant();
        assert!((d.norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn unitary_entry_modulus_is_uniform() {
        // For Haar U(2), |U_11|^2 ~ Uniform(0,1).
        let mut s = derive_stream(13, "u2");
        let trials = 10_000;
        let mut xs: Vec<f64> = (0..trials)
            .map(|_| haar_unitary(2, &mut s).unwrap()[(0, 0)].norm_sqr())
            .collect();
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let lo = (x - i as f64 / trials as f64).abs();
                let hi = ((i + 1) as f64 / trials as f64 - x).abs();
                lo.max(hi)
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS statistic {ks}");
    }

    #[test]
    fn minor_basics() {
        let id = RealMatrix::identity(3, 3);
        assert_eq!(minor_det(&id, &[0, 1], &[0, 1]).unwrap(), 1.0);
        let mut s = derive_stream(2, "m");
        let m = s.normal_matrix(4, 4);
        let a = minor_det(&m, &[0, 1, 2], &[0, 1, 3]).unwrap();
        let b = minor_det(&m, &[1, 0, 2], &[0, 1, 3]).unwrap();
        assert!((a + b).abs() < 1e-12);
        assert!(minor_det(&m, &[0, 0], &[0, 1]).is_err());
        assert!(minor_det(&m, &[0, 4], &[0, 1]).is_err());
    }

    #[test]
    fn minor_of_singular_is_zero() {
        let m = RealMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        assert_eq!(minor_det(&m, &[0, 1, 2], &[0, 1, 2]).unwrap(), 0.0);
    }

    #[test]
    fn cauchy_binet_on_orthonormal_columns() {
        let mut s = derive_stream(4, "cb");
        let x = haar_stiefel(6, 3, &mut s).unwrap();
        let total: f64 = lex_subsets(6, 3)
            .iter()
            .map(|q| minor_det(&x, q, &[0, 1, 2]).unwrap().powi(2))
            .sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eig_examples() {
        let d = RealMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let vals = sym_eigenvalues_desc(&d).unwrap();
        assert_eq!(vals, vec![3.0, 2.0, 1.0]);

        let v = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let r1 = &v * v.transpose();
        let vals = sym_eigenvalues_desc(&r1).unwrap();
        assert!((vals[0] - v.norm_squared()).abs() < 1e-10);
        for x in &vals[1..] {
            assert!(x.abs() < 1e-10);
        }
    }

    #[test]
    fn eig_trace_identities_and_reconstruction() {
        let mut s = derive_stream(8, "eig");
        let g = s.normal_matrix(10, 10);
        let sym = &g + g.transpose();
        let (vals, vecs) = sym_eig_desc(&sym).unwrap();
        let sum: f64 = vals.iter().sum();
        let sum2: f64 = vals.iter().map(|x| x * x).sum();
        assert!((sum - sym.trace()).abs() < 1e-8);
        assert!((sum2 - (&sym * &sym).trace()).abs() < 1e-8);
        for w in vals.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
        let recon = &vecs * RealMatrix::from_diagonal(&vals) * vecs.transpose();
        assert!((recon - &sym).amax() < 1e-8 * sym.amax());
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let m = RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eig_desc(&m), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn subsets_are_lexicographic() {
        let s = lex_subsets(4, 2);
        assert_eq!(
            s,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(lex_subsets(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(binomial(12, 6), Some(924));
    }
}
