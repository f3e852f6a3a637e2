//! Covariance trace, VDI and mean squared correlation per family, with the
//! kNN density at the true intrinsic dimension.
//!
//! Run with `cargo run --release --example covariance_stats`.

use idbench::analysis::{covariance_stats, local_density, samples_for_radius};
use idbench::linalg::derive_stream;
use idbench::manifolds::{sample, ManifoldSpec};
use idbench::neighbors::knn;

fn main() -> idbench::Result<()> {
    let specs = [
        ManifoldSpec::st_matrix(4, 2),
        ManifoldSpec::st_vec(4, 2),
        ManifoldSpec::gr_proj(4, 2),
        ManifoldSpec::gr_vec(4, 2),
        ManifoldSpec::flag_vec(3, 1, 1),
        ManifoldSpec::pauli(2),
        ManifoldSpec::sphere(4),
        ManifoldSpec::gaussian(4).with_ambient(8),
    ];
    println!("{:<16} {:>8} {:>8} {:>8} {:>10} {:>14}", "spec", "trace", "VDI", "<R^2>", "rho med", "N for T_k=0.5");
    for spec in &specs {
        let cloud = sample(spec, 2000, &derive_stream(5, &format!("example/{}", spec.key())))?;
        let s = covariance_stats(&cloud)?;
        let table = knn(&cloud, 20)?;
        let mut rho = local_density(&cloud, &table, cloud.intrinsic_dim())?;
        rho.sort_by(f64::total_cmp);
        let med = rho[rho.len() / 2];
        let n_needed = samples_for_radius(20, cloud.intrinsic_dim(), med, 0.5);
        println!(
            "{:<16} {:>8.4} {:>8.4} {:>8.4} {:>10.3} {:>14.0}",
            spec.key(),
            s.trace,
            s.vdi,
            s.r2_mean,
            med,
            n_needed
        );
    }
    Ok(())
}
