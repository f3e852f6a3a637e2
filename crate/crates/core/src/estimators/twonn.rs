//! Pointwise TwoNN from the ratio of the second to first neighbor distance.

use crate::neighbors::NeighborTable;

/// Minimum number of retained ratios for the empirical CDF to be used.
pub const MIN_RETAINED: usize = 10;

/// `-log(1 - F) / log(μ)`, or `None` when `μ <= 1` or `F` is outside `[0, 1)`.
pub fn twonn_point(mu: f64, f: f64) -> Option<f64> {
    if !(mu > 1.0) || !(0.0..1.0).contains(&f) {
        return None;
    }
    let d = -(1.0 - f).ln() / mu.ln();
    (d > 0.0 && d.is_finite()).then_some(d)
}

/// Per-point TwoNN estimates; `NaN` marks undefined points.
///
/// The largest `⌈αN⌉` ratios are discarded. Retained ratios get plotting
/// position `rank / (N + 1)`, ranked in ascending order over the full sample.
pub fn twonn_local(table: &NeighborTable, alpha: f64) -> Vec<f64> {
    let n = table.len();
    let mu: Vec<f64> = (0..n)
        .map(|i| {
            let t = table.distances(i);
            if t[0] > 0.0 {
                t[1] / t[0]
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| mu[a].total_cmp(&mu[b]).then(a.cmp(&b)));
    let discard = (alpha * n as f64).ceil() as usize;
    let retained = n.saturating_sub(discard);
    let mut out = vec![f64::NAN; n];
    if retained < MIN_RETAINED {
        return out;
    }
    for (rank, &i) in order[..retained].iter().enumerate() {
        let f = (rank + 1) as f64 / (n + 1) as f64;
        if let Some(d) = twonn_point(mu[i], f) {
            out[i] = d;
        }
    }
    out
}
