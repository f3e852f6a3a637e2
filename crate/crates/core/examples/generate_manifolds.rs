//! Sample every embedding family once and check its defining identities.
//!
//! Run with `cargo run --release --example generate_manifolds`.

use idbench::linalg::derive_stream;
use idbench::manifolds::{intrinsic_dim, sample, ManifoldSpec};

fn main() -> idbench::Result<()> {
    let specs = [
        ManifoldSpec::st_matrix(5, 2),
        ManifoldSpec::st_vec(5, 2),
        ManifoldSpec::gr_proj(5, 2),
        ManifoldSpec::gr_vec(5, 2),
        ManifoldSpec::flag_vec(4, 1, 2),
        ManifoldSpec::pauli(2),
        ManifoldSpec::sphere(3).with_ambient(10),
        ManifoldSpec::gaussian(3).with_ambient(10),
        ManifoldSpec::affine(3).with_ambient(10),
        ManifoldSpec::m_beta(3).with_ambient(10),
    ];
    println!("{:<18} {:>4} {:>4} {:>12} {:>12}", "spec", "d_i", "d_a", "min |x|^2", "max |x|^2");
    for spec in &specs {
        let cloud = sample(spec, 500, &derive_stream(7, &format!("example/{}", spec.key())))?;
        let norms: Vec<f64> = cloud.rows().map(|r| r.iter().map(|x| x * x).sum()).collect();
        let lo = norms.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!("{:<18} {:>4} {:>4} {:>12.6} {:>12.6}", spec.key(), intrinsic_dim(spec)?, cloud.dim(), lo, hi);
    }

    let spec = ManifoldSpec::gr_vec(4, 2);
    let cloud = sample(&spec, 1000, &derive_stream(7, "example/save"))?;
    let path = std::env::temp_dir().join("idbench_gr_vec_4_2.bin");
    cloud.save(&path)?;
    println!("saved {} points of {} to {}", cloud.len(), spec.key(), path.display());
    Ok(())
}
