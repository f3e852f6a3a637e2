//! Squeezing and additive noise on Gr(Vec) and a sphere: how MLE and TwoNN
//! respond, alongside the covariance anisotropy (VDI).
//!
//! Run with `cargo run --release --example distortions`.

use idbench::analysis::covariance_stats;
use idbench::estimators::{run_estimator, Estimator};
use idbench::linalg::derive_stream;
use idbench::manifolds::{sample, ManifoldSpec};
use idbench::perturb::{add_noise, squeeze, NoiseKind, NoiseSpec};

fn main() -> idbench::Result<()> {
    let ests = [Estimator::Mle { k: 20 }, Estimator::TwoNn { alpha: 0.1 }];
    for spec in [ManifoldSpec::gr_vec(4, 2), ManifoldSpec::sphere(4)] {
        let clean = sample(&spec, 2000, &derive_stream(1, &format!("example/{}", spec.key())))?;
        println!("{} (d_i = {})", spec.key(), clean.intrinsic_dim());
        println!("  {:<28} {:>8} {:>8} {:>8}", "distortion", "VDI", "MLE", "TwoNN");
        let mut rows = vec![("none".to_string(), clean.clone())];
        for eps in [0.25, 0.5, 0.75, 1.0] {
            let c = squeeze(&clean, eps, &derive_stream(1, &format!("example/squeeze/{eps}")))?;
            rows.push((format!("squeeze eps={eps}"), c));
        }
        for kind in [NoiseKind::Isotropic, NoiseKind::Uncorrelated, NoiseKind::Anisotropic] {
            for sigma2 in [1e-3, 1e-1, 10.0] {
                let c = add_noise(
                    &clean,
                    NoiseSpec { kind, sigma2 },
                    &derive_stream(1, &format!("example/noise/{kind}/{sigma2}")),
                )?;
                rows.push((format!("{kind} sigma2={sigma2}"), c));
            }
        }
        for (label, cloud) in rows {
            let vdi = covariance_stats(&cloud)?.vdi;
            let d: Vec<f64> =
                ests.iter().map(|e| run_estimator(&cloud, e, 1).map(|r| r.aggregates.mean)).collect::<Result<_, _>>()?;
            println!("  {:<28} {:>8.3} {:>8.3} {:>8.3}", label, vdi, d[0], d[1]);
        }
    }
    Ok(())
}
