//! The qudit Pauli quotient: fiducial invariance and estimates on the
//! four-fold tensor embedding.
//!
//! Run with `cargo run --release --example pauli_quotient`.

use idbench::estimators::{run_estimator, Estimator};
use idbench::linalg::derive_stream;
use idbench::manifolds::{pauli_fiducial, pauli_invariance_defect, sample, ManifoldSpec};

fn main() -> idbench::Result<()> {
    for n in [2, 3] {
        let mut s = derive_stream(3, &format!("example/pauli/fiducial/{n}"));
        let h = pauli_fiducial(n, &mut s);
        let (shift, clock) = pauli_invariance_defect(&h);
        println!("n = {n}: fiducial in C^{}, |X h - h| = {shift:.3e}, |Z h - h| = {clock:.3e}", h.len());

        let spec = ManifoldSpec::pauli(n);
        let cloud = sample(&spec, 2000, &derive_stream(3, &format!("example/pauli/{n}")))?;
        let max_dev = cloud
            .rows()
            .map(|r| (r.iter().map(|x| x * x).sum::<f64>() - 1.0).abs())
            .fold(0.0f64, f64::max);
        println!("  N = {}, d_i = {}, d_a = {}, max | |x|^2 - 1 | = {max_dev:.1e}", cloud.len(), cloud.intrinsic_dim(), cloud.dim());
        for est in [Estimator::Mle { k: 20 }, Estimator::TwoNn { alpha: 0.1 }, Estimator::Abid { k: 20, pairs: Default::default() }] {
            let r = run_estimator(&cloud, &est, 3)?;
            println!("  {:<8} mean {:.3}", est.name(), r.aggregates.mean);
        }
    }
    Ok(())
}
