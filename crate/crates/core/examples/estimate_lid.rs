//! Every estimator on a Grassmannian cloud and on a sphere of the same
//! intrinsic dimension.
//!
//! Run with `cargo run --release --example estimate_lid`.

use idbench::estimators::{run_estimator, Estimator, METHODS};
use idbench::linalg::derive_stream;
use idbench::manifolds::{sample, ManifoldSpec};

fn main() -> idbench::Result<()> {
    let specs = [ManifoldSpec::gr_vec(4, 2), ManifoldSpec::sphere(4).with_ambient(6)];
    for spec in &specs {
        let cloud = sample(spec, 2000, &derive_stream(0, &format!("example/{}", spec.key())))?;
        println!("{} (d_i = {}, d_a = {}, N = {})", spec.key(), cloud.intrinsic_dim(), cloud.dim(), cloud.len());
        println!("  {:<12} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "method", "mean", "median", "mode", "MoM", "MeM", "defined");
        for method in METHODS {
            let k = match method {
                "danco" => 10,
                "corrint" => 20,
                _ => 50,
            };
            let est = Estimator::with_defaults(method, k)?;
            let r = run_estimator(&cloud, &est, 0)?;
            let a = r.aggregates.as_array();
            println!(
                "  {:<12} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8}",
                method, a[0], a[1], a[2], a[3], a[4], r.defined_count
            );
        }
    }
    Ok(())
}
