//! The five ways of turning local estimates into one number, and the
//! manifold-ness ratio, on a manifold and on a union of two flats.
//!
//! Run with `cargo run --release --example aggregation`.

use idbench::analysis::manifoldness_ratio;
use idbench::estimators::{run_estimator, Estimator};
use idbench::linalg::derive_stream;
use idbench::manifolds::{sample, sample_affine, ManifoldSpec};
use idbench::PointCloud;

fn main() -> idbench::Result<()> {
    let gr = sample(&ManifoldSpec::gr_vec(4, 2), 1000, &derive_stream(2, "example/gr"))?;
    // A 2-flat and a 6-flat in the same 6-dimensional space.
    let a = sample_affine(2, 6, 500, &derive_stream(2, "example/flat2"))?;
    let b = sample_affine(6, 6, 500, &derive_stream(2, "example/flat6"))?;
    let mut data = a.as_slice().to_vec();
    data.extend_from_slice(b.as_slice());
    let mixed = PointCloud::from_rows(data, 1000, 6, 4.0, "two_flats", "example")?;

    for (name, cloud) in [("gr-vec:4:2", &gr), ("two flats", &mixed)] {
        for est in [Estimator::Mle { k: 10 }, Estimator::Abid { k: 10, pairs: Default::default() }] {
            let r = run_estimator(cloud, &est, 2)?;
            let g = &r.aggregates;
            println!(
                "{name:<11} {:<5} mean {:.3} median {:.3} mode {:.0} MoM {:.3} MeM {:.3} std/mean {:.3}",
                est.name(),
                g.mean,
                g.median,
                g.mode,
                g.median_of_means,
                g.mean_of_medians,
                manifoldness_ratio(&r).unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
