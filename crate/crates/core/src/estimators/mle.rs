//! Levina–Bickel maximum-likelihood estimate from kNN distances.

/// `[ (1/m) Σ_j log(T_k / T_j) ]^{-1}` over the `m` neighbors `j < k` with
/// `T_j > 0`.
///
/// `distances` must be ascending; its last entry is `T_k`. Returns `None`
/// when `T_k` is zero or every `T_j` equals `T_k`.
pub fn mle_local(distances: &[f64]) -> Option<f64> {
    let (&t_k, rest) = distances.split_last()?;
    if !(t_k > 0.0) {
        return None;
    }
    let mut sum = 0.0;
    let mut m = 0usize;
    for &t in rest {
        if t > 0.0 {
            sum += (t_k / t).ln();
            m += 1;
        }
    }
    if m == 0 || !(sum > 0.0) {
        return None;
    }
    Some(m as f64 / sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn analytic_example() {
        let r = 3.0;
        let d = mle_local(&[r / E, r / E, r]).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_distances_are_excluded() {
        let r = 2.0;
        let d = mle_local(&[0.0, r / E, r / E, r]).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cases() {
        assert_eq!(mle_local(&[1.0, 1.0, 1.0]), None);
        assert_eq!(mle_local(&[0.0, 0.0, 0.0]), None);
        assert_eq!(mle_local(&[]), None);
    }
}
