//! Box-counting dimension of the Hofstadter butterfly and local estimates
//! on a subsample of it.

use idbench::estimators::{AbidPairs, Estimator};
use idbench::fractal::{box_count_dimension, fractal_lid_suite, hofstadter_cloud};
use idbench::linalg::derive_stream;

fn main() -> idbench::Result<()> {
    let butterfly = hofstadter_cloud(50, 8)?;
    println!("{} spectrum points", butterfly.points.len());

    let boxes = box_count_dimension(&butterfly.unit_square_points(), 3, 8)?;
    for (eps, n) in boxes.scales.iter().zip(&boxes.counts) {
        println!("  eps = {eps:<10} boxes = {n}");
    }
    println!(
        "box-counting dimension {:.3} (rms residual {:.4}{})",
        boxes.dimension,
        boxes.fit_residual,
        if boxes.extremes_excluded { ", extreme scales dropped" } else { "" }
    );

    let cloud = butterfly.to_point_cloud(boxes.dimension)?;
    let rows = fractal_lid_suite(
        &cloud,
        &[5, 10, 20, 50, 100],
        1000,
        &[
            Estimator::Mle { k: 0 },
            Estimator::Abid { k: 0, pairs: AbidPairs::Distinct },
            Estimator::Abid { k: 0, pairs: AbidPairs::WithSelf },
            Estimator::CorrInt { k1: 0, k2: 0 },
        ],
        &derive_stream(0, "butterfly/subsample"),
    )?;
    println!("{:<10} {:>4} {:>8} {:>8} {:>9}", "method", "k", "mean", "std", "std/mean");
    for r in rows {
        println!("{:<10} {:>4} {:>8.3} {:>8.3} {:>9.3}", r.method, r.k, r.mean, r.std, r.std / r.mean);
    }
    Ok(())
}
