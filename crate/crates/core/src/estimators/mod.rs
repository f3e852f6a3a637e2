//! Intrinsic-dimension estimators and aggregation of local estimates.
//!
//! Local estimators return one value per point, with `NaN` marking points
//! where the estimate is undefined. Global estimators (CorrInt, DANCo)
//! return a single value that stands in for every aggregate.

pub mod abid;
pub mod corrint;
pub mod danco;
pub mod lpca;
pub mod mle;
pub mod twonn;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::neighbors::{knn, NeighborTable};

pub use abid::AbidPairs;
pub use lpca::LocalCenter;

/// Default TwoNN discard fraction.
pub const DEFAULT_ALPHA: f64 = 0.1;

/// Default lPCA threshold for the ratio and FO variants.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Default number of DANCo calibration sets per candidate dimension.
pub const DEFAULT_CALIB_SETS: usize = 1;

/// An estimator with its hyper-parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Estimator {
    #[serde(rename = "lpca_maxgap")]
    LpcaMaxGap {
        k: usize,
        #[serde(default)]
        center: LocalCenter,
    },
    #[serde(rename = "lpca_ratio")]
    LpcaRatio {
        k: usize,
        epsilon: f64,
        #[serde(default)]
        center: LocalCenter,
    },
    #[serde(rename = "lpca_fo")]
    LpcaFo {
        k: usize,
        epsilon: f64,
        #[serde(default)]
        center: LocalCenter,
    },
    Mle { k: usize },
    #[serde(rename = "corrint")]
    CorrInt { k1: usize, k2: usize },
    #[serde(rename = "twonn")]
    TwoNn { alpha: f64 },
    Danco { k: usize, calib_sets: usize },
    Abid {
        k: usize,
        #[serde(default)]
        pairs: AbidPairs,
    },
}

/// Method names accepted by [`Estimator::with_defaults`].
pub const METHODS: [&str; 8] =
    ["lpca_maxgap", "lpca_ratio", "lpca_fo", "mle", "corrint", "twonn", "danco", "abid"];

impl Estimator {
    /// Estimator `method` at neighborhood size `k` with default settings for
    /// the remaining parameters. CorrInt uses `k2 = k`, `k1 = k / 2`.
    pub fn with_defaults(method: &str, k: usize) -> Result<Self> {
        let center = LocalCenter::QueryPoint;
        Ok(match method {
            "lpca_maxgap" => Estimator::LpcaMaxGap { k, center },
            "lpca_ratio" => Estimator::LpcaRatio { k, epsilon: DEFAULT_EPSILON, center },
            "lpca_fo" => Estimator::LpcaFo { k, epsilon: DEFAULT_EPSILON, center },
            "mle" => Estimator::Mle { k },
            "corrint" => Estimator::CorrInt { k1: k / 2, k2: k },
            "twonn" => Estimator::TwoNn { alpha: DEFAULT_ALPHA },
            "danco" => Estimator::Danco { k, calib_sets: DEFAULT_CALIB_SETS },
            "abid" => Estimator::Abid { k, pairs: AbidPairs::Distinct },
            _ => return Err(Error::invalid(format!("unknown method {method:?}"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::LpcaMaxGap { .. } => "lpca_maxgap",
            Estimator::LpcaRatio { .. } => "lpca_ratio",
            Estimator::LpcaFo { .. } => "lpca_fo",
            Estimator::Mle { .. } => "mle",
            Estimator::CorrInt { .. } => "corrint",
            Estimator::TwoNn { .. } => "twonn",
            Estimator::Danco { .. } => "danco",
            Estimator::Abid { .. } => "abid",
        }
    }

    /// Neighborhood size the method's own parameters refer to, if any.
    pub fn k(&self) -> Option<usize> {
        match *self {
            Estimator::LpcaMaxGap { k, .. }
            | Estimator::LpcaRatio { k, .. }
            | Estimator::LpcaFo { k, .. }
            | Estimator::Mle { k }
            | Estimator::Danco { k, .. }
            | Estimator::Abid { k, .. } => Some(k),
            Estimator::CorrInt { k2, .. } => Some(k2),
            Estimator::TwoNn { .. } => None,
        }
    }

    /// Same estimator with its neighborhood size replaced. CorrInt keeps the
    /// `k1 = k2 / 2` convention; TwoNN is unchanged.
    pub fn with_k(self, k: usize) -> Self {
        match self {
            Estimator::LpcaMaxGap { center, .. } => Estimator::LpcaMaxGap { k, center },
            Estimator::LpcaRatio { epsilon, center, .. } => Estimator::LpcaRatio { k, epsilon, center },
            Estimator::LpcaFo { epsilon, center, .. } => Estimator::LpcaFo { k, epsilon, center },
            Estimator::Mle { .. } => Estimator::Mle { k },
            Estimator::CorrInt { .. } => Estimator::CorrInt { k1: k / 2, k2: k },
            Estimator::TwoNn { alpha } => Estimator::TwoNn { alpha },
            Estimator::Danco { calib_sets, .. } => Estimator::Danco { k, calib_sets },
            Estimator::Abid { pairs, .. } => Estimator::Abid { k, pairs },
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            Estimator::TwoNn { alpha } => Some(alpha),
            _ => None,
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match *self {
            Estimator::LpcaRatio { epsilon, .. } | Estimator::LpcaFo { epsilon, .. } => Some(epsilon),
            _ => None,
        }
    }

    /// `(k1, k2)` for CorrInt.
    pub fn radii_ranks(&self) -> Option<(usize, usize)> {
        match *self {
            Estimator::CorrInt { k1, k2 } => Some((k1, k2)),
            _ => None,
        }
    }

    /// Whether the method produces a single value for the whole cloud.
    pub fn is_global(&self) -> bool {
        matches!(self, Estimator::CorrInt { .. } | Estimator::Danco { .. })
    }

    /// Columns of the neighbor table the method reads.
    pub fn table_k(&self) -> usize {
        match *self {
            Estimator::TwoNn { .. } => 2,
            _ => self.k().unwrap_or(2),
        }
    }

    /// Check the parameters against a cloud of `n` points.
    pub fn validate(&self, n: usize) -> Result<()> {
        let need = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::invalid(msg)) };
        match *self {
            Estimator::LpcaMaxGap { k, .. } => need(k >= 2, format!("lpca needs k >= 2, got {k}"))?,
            Estimator::LpcaRatio { k, epsilon, .. } | Estimator::LpcaFo { k, epsilon, .. } => {
                need(k >= 2, format!("lpca needs k >= 2, got {k}"))?;
                need(epsilon > 0.0 && epsilon < 1.0, format!("epsilon must lie in (0, 1), got {epsilon}"))?
            }
            Estimator::Mle { k } => need(k >= 3, format!("mle needs k >= 3, got {k}"))?,
            Estimator::CorrInt { k1, k2 } => {
                need(k1 >= 2 && k1 < k2, format!("corrint needs 2 <= k1 < k2, got k1={k1}, k2={k2}"))?
            }
            Estimator::TwoNn { alpha } => {
                need((0.0..1.0).contains(&alpha), format!("alpha must lie in [0, 1), got {alpha}"))?
            }
            Estimator::Danco { k, calib_sets } => {
                need(k >= 5, format!("danco needs k >= 5, got {k}"))?;
                need(calib_sets >= 1, "danco needs calib_sets >= 1".into())?
            }
            Estimator::Abid { k, .. } => need(k >= 2, format!("abid needs k >= 2, got {k}"))?,
        }
        let k = self.table_k();
        need(k < n, format!("{} needs k < N, got k={k}, N={n}", self.name()))
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The five aggregate statistics of a set of estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    #[serde(with = "nan_null")]
    pub mean: f64,
    #[serde(with = "nan_null")]
    pub median: f64,
    #[serde(with = "nan_null")]
    pub mode: f64,
    #[serde(with = "nan_null")]
    pub median_of_means: f64,
    #[serde(with = "nan_null")]
    pub mean_of_medians: f64,
}

impl Aggregates {
    pub const UNDEFINED: Aggregates = Aggregates {
        mean: f64::NAN,
        median: f64::NAN,
        mode: f64::NAN,
        median_of_means: f64::NAN,
        mean_of_medians: f64::NAN,
    };

    /// Every aggregate equal to `v`.
    pub fn constant(v: f64) -> Self {
        Aggregates { mean: v, median: v, mode: v.round(), median_of_means: v, mean_of_medians: v }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.mean, self.median, self.mode, self.median_of_means, self.mean_of_medians]
    }
}

/// Aggregation rule over defined per-point estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Mean,
    Median,
    Mode,
    MedianOfMeans,
    MeanOfMedians,
}

/// Number of contiguous blocks used by the block aggregates.
pub const BLOCKS: usize = 10;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

fn blocks(v: &[f64]) -> Vec<&[f64]> {
    let nb = BLOCKS.min(v.len());
    let size = v.len() / nb;
    (0..nb).map(|b| if b + 1 == nb { &v[b * size..] } else { &v[b * size..(b + 1) * size] }).collect()
}

/// Aggregate the defined (finite) entries of `per_point`; `None` if there
/// are none.
pub fn aggregate(per_point: &[f64], how: Aggregation) -> Option<f64> {
    let v: Vec<f64> = per_point.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    Some(match how {
        Aggregation::Mean => mean(&v),
        Aggregation::Median => median(v)?,
        Aggregation::Mode => {
            let mut rounded: Vec<f64> = v.iter().map(|x| x.round()).collect();
            rounded.sort_by(f64::total_cmp);
            let (mut best, mut best_n) = (rounded[0], 0);
            let mut i = 0;
            while i < rounded.len() {
                let j = rounded[i..].iter().take_while(|&&x| x == rounded[i]).count();
                if j > best_n {
                    best = rounded[i];
                    best_n = j;
                }
                i += j;
            }
            best
        }
        Aggregation::MedianOfMeans => median(blocks(&v).into_iter().map(mean).collect())?,
        Aggregation::MeanOfMedians => {
            let meds: Vec<f64> = blocks(&v).into_iter().filter_map(|b| median(b.to_vec())).collect();
            mean(&meds)
        }
    })
}

/// All five aggregates of `per_point`.
pub fn aggregate_all(per_point: &[f64]) -> Aggregates {
    let get = |how| aggregate(per_point, how).unwrap_or(f64::NAN);
    Aggregates {
        mean: get(Aggregation::Mean),
        median: get(Aggregation::Median),
        mode: get(Aggregation::Mode),
        median_of_means: get(Aggregation::MedianOfMeans),
        mean_of_medians: get(Aggregation::MeanOfMedians),
    }
}

/// Outcome of running one estimator on one cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LidResult {
    pub config: Estimator,
    pub provenance: String,
    pub n_points: usize,
    /// Local estimates; `None` for global methods.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "nan_null_vec")]
    pub per_point: Option<Vec<f64>>,
    /// The global value for CorrInt and DANCo.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global: Option<f64>,
    pub aggregates: Aggregates,
    /// Defined local estimates; for global methods `N` when the value is
    /// defined and `0` otherwise.
    pub defined_count: usize,
}

impl LidResult {
    fn local(cloud: &PointCloud, config: Estimator, per_point: Vec<f64>) -> Self {
        let defined_count = per_point.iter().filter(|x| x.is_finite()).count();
        LidResult {
            config,
            provenance: cloud.provenance().to_owned(),
            n_points: cloud.len(),
            aggregates: aggregate_all(&per_point),
            per_point: Some(per_point),
            global: None,
            defined_count,
        }
    }

    fn global(cloud: &PointCloud, config: Estimator, value: Option<f64>) -> Self {
        let value = value.filter(|v| v.is_finite());
        LidResult {
            config,
            provenance: cloud.provenance().to_owned(),
            n_points: cloud.len(),
            per_point: None,
            global: value,
            aggregates: value.map(Aggregates::constant).unwrap_or(Aggregates::UNDEFINED),
            defined_count: if value.is_some() { cloud.len() } else { 0 },
        }
    }

    /// Defined local estimates (empty for global methods).
    pub fn defined(&self) -> Vec<f64> {
        self.per_point.iter().flatten().copied().filter(|x| x.is_finite()).collect()
    }
}

/// Neighbor table then [`run_estimator_with_table`].
pub fn run_estimator(cloud: &PointCloud, est: &Estimator, seed: u64) -> Result<LidResult> {
    est.validate(cloud.len())?;
    let table = knn(cloud, est.table_k())?;
    run_estimator_with_table(cloud, &table, est, seed)
}

/// Run `est` using a precomputed table with at least the needed columns.
/// `seed` drives DANCo calibration only.
pub fn run_estimator_with_table(
    cloud: &PointCloud,
    table: &NeighborTable,
    est: &Estimator,
    seed: u64,
) -> Result<LidResult> {
    est.validate(cloud.len())?;
    let need = est.table_k();
    if table.k() < need || table.len() != cloud.len() {
        return Err(Error::invalid(format!("{} needs a table with {need} neighbors", est.name())));
    }
    let n = cloud.len();
    let neighbors = |i: usize, k: usize| -> Vec<&[f64]> {
        table.indices(i)[..k].iter().map(|&j| cloud.row(j)).collect()
    };
    let local = |f: &(dyn Fn(usize) -> Option<f64> + Sync)| -> Vec<f64> {
        (0..n).into_par_iter().map(|i| f(i).unwrap_or(f64::NAN)).collect()
    };
    Ok(match *est {
        Estimator::LpcaMaxGap { k, center } => LidResult::local(
            cloud,
            *est,
            local(&|i| lpca::maxgap_dimension(&lpca::local_spectrum(cloud.row(i), &neighbors(i, k), center))),
        ),
        Estimator::LpcaRatio { k, epsilon, center } => LidResult::local(
            cloud,
            *est,
            local(&|i| {
                lpca::ratio_dimension(&lpca::local_spectrum(cloud.row(i), &neighbors(i, k), center), epsilon)
            }),
        ),
        Estimator::LpcaFo { k, epsilon, center } => LidResult::local(
            cloud,
            *est,
            local(&|i| lpca::fo_dimension(&lpca::local_spectrum(cloud.row(i), &neighbors(i, k), center), epsilon)),
        ),
        Estimator::Mle { k } => LidResult::local(cloud, *est, local(&|i| mle::mle_local(&table.distances(i)[..k]))),
        Estimator::Abid { k, pairs } => {
            LidResult::local(cloud, *est, local(&|i| abid::abid_local(cloud.row(i), &neighbors(i, k), pairs)))
        }
        Estimator::TwoNn { alpha } => LidResult::local(cloud, *est, twonn::twonn_local(table, alpha)),
        Estimator::CorrInt { k1, k2 } => {
            LidResult::global(cloud, *est, corrint::corrint_global(cloud, table, k1, k2))
        }
        Estimator::Danco { k, calib_sets } => {
            LidResult::global(cloud, *est, danco::danco(cloud, table, k, calib_sets, seed)?)
        }
    })
}

mod nan_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

mod nan_null_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref()
            .map(|v| v.iter().map(|x| x.is_finite().then_some(*x)).collect::<Vec<_>>())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        let v = Option::<Vec<Option<f64>>>::deserialize(d)?;
        Ok(v.map(|v| v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect()))
    }
}
