//! Angle-based ID: reciprocal mean squared cosine between neighbor offsets.

use serde::{Deserialize, Serialize};

/// Which offset pairs enter the mean squared cosine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbidPairs {
    /// The `m(m-1)/2` unordered pairs of distinct offsets.
    #[default]
    Distinct,
    /// All `m²` ordered pairs, including each offset with itself.
    WithSelf,
}

/// `1 / mean cos²(v_i, v_j)` over pairs of nonzero offsets.
///
/// `None` with fewer than two nonzero offsets or when every distinct pair
/// is orthogonal.
pub fn abid_local(query: &[f64], neighbors: &[&[f64]], pairs: AbidPairs) -> Option<f64> {
    let units: Vec<Vec<f64>> = neighbors
        .iter()
        .filter_map(|nb| {
            let v: Vec<f64> = nb.iter().zip(query).map(|(a, b)| a - b).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            (norm > 0.0).then(|| v.iter().map(|x| x / norm).collect())
        })
        .collect();
    abid_from_units(&units, pairs)
}

/// Same as [`abid_local`] for offsets that are already unit vectors.
pub fn abid_from_units(units: &[Vec<f64>], pairs: AbidPairs) -> Option<f64> {
    let m = units.len();
    if m < 2 {
        return None;
    }
    let mut sum = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let c: f64 = units[i].iter().zip(&units[j]).map(|(a, b)| a * b).sum();
            sum += c * c;
        }
    }
    let mf = m as f64;
    match pairs {
        AbidPairs::Distinct => (sum > 0.0).then(|| mf * (mf - 1.0) / 2.0 / sum),
        AbidPairs::WithSelf => Some(mf * mf / (mf + 2.0 * sum)),
    }
}
