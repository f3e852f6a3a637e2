//! Correlation-integral (Grassberger–Procaccia) dimension.

use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::neighbors::{squared_distance, NeighborTable};

use super::median;

/// Fraction of unordered pairs within distance `r`, for each radius.
pub fn correlation_integral(cloud: &PointCloud, radii: &[f64]) -> Vec<f64> {
    let n = cloud.len();
    let r2: Vec<f64> = radii.iter().map(|r| r * r).collect();
    let counts = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut c = vec![0u64; r2.len()];
            let xi = cloud.row(i);
            for j in i + 1..n {
                let d = squared_distance(xi, cloud.row(j));
                for (cnt, &t) in c.iter_mut().zip(&r2) {
                    if d <= t {
                        *cnt += 1;
                    }
                }
            }
            c
        })
        .reduce(
            || vec![0u64; r2.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let pairs = (n as f64) * (n as f64 - 1.0) / 2.0;
    counts.into_iter().map(|c| c as f64 / pairs).collect()
}

/// Global correlation dimension between the median `k1`-th and `k2`-th
/// neighbor radii. `None` when the radii coincide or `C(r1) = 0`.
pub fn corrint_global(cloud: &PointCloud, table: &NeighborTable, k1: usize, k2: usize) -> Option<f64> {
    let r1 = median((0..table.len()).map(|i| table.distances(i)[k1 - 1]).collect())?;
    let r2 = median((0..table.len()).map(|i| table.distances(i)[k2 - 1]).collect())?;
    if !(r2 > r1) || !(r1 > 0.0) {
        return None;
    }
    let c = correlation_integral(cloud, &[r1, r2]);
    corrint_slope(c[0], c[1], r1, r2)
}

/// `log(C(r2)/C(r1)) / log(r2/r1)`.
pub fn corrint_slope(c1: f64, c2: f64, r1: f64, r2: f64) -> Option<f64> {
    if !(c1 > 0.0) || !(r1 > 0.0) || !(r2 > r1) {
        return None;
    }
    Some((c2 / c1).ln() / (r2 / r1).ln())
}
