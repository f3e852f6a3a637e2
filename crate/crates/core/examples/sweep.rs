//! A small sample-size sweep written as CSV, then summarized per method.
//!
//! Run with `cargo run --release --example sweep [-- out.csv]`.

use std::collections::BTreeMap;

use idbench::estimators::Estimator;
use idbench::harness::{read_records, run_sweep_to_file, RecordFormat, SweepConfig, SweepKind};
use idbench::manifolds::ManifoldSpec;

fn main() -> idbench::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("idbench_sweep.csv"));
    let mut cfg = SweepConfig::new(
        SweepKind::FixKSweepN,
        vec![ManifoldSpec::gr_vec(4, 2), ManifoldSpec::flag_vec(3, 1, 1), ManifoldSpec::st_vec(4, 2)],
        vec![
            Estimator::Mle { k: 20 },
            Estimator::TwoNn { alpha: 0.1 },
            Estimator::CorrInt { k1: 10, k2: 20 },
            Estimator::Abid { k: 20, pairs: Default::default() },
        ],
    );
    cfg.n_grid = vec![250, 500, 1000, 2000];
    println!("{}", serde_json::to_string(&cfg)?);
    let written = run_sweep_to_file(&cfg, &out, RecordFormat::Csv, false)?;
    println!("wrote {written} records to {}", out.display());

    let mut by: BTreeMap<(String, String, usize), Vec<f64>> = BTreeMap::new();
    for r in read_records(&out, RecordFormat::Csv)? {
        if let Some(d) = r.delta_mean {
            by.entry((r.family.clone(), r.method.clone(), r.n_points)).or_default().push(d.abs());
        }
    }
    println!("{:<10} {:<8} {:>6} {:>8}", "family", "method", "N", "<|delta|>");
    for ((family, method, n), v) in by {
        println!("{family:<10} {method:<8} {n:>6} {:>8.3}", v.iter().sum::<f64>() / v.len() as f64);
    }
    Ok(())
}
