//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::time::Instant;

use nalgebra::DMatrix;

use idbench::analysis::ratio_of;
use idbench::estimators::abid::abid_local;
use idbench::estimators::{run_estimator, AbidPairs, Estimator};
use idbench::fractal::{box_count_dimension, fractal_lid_suite, hofstadter_cloud};
use idbench::harness::{records_to_string, run_sweep, BenchmarkRecord, DistortionCell, RecordFormat, SweepConfig, SweepKind};
use idbench::linalg::{derive_stream, haar_special_orthogonal, haar_stiefel};
use idbench::manifolds::{
    gr_vec_embedding, intrinsic_dim, min_ambient_dim, sample, sample_affine, sample_sphere, Family, ManifoldSpec,
};
use idbench::perturb::NoiseKind;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

// dim O(n) = dim SO(n)
fn dim_o(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn structure_specs() -> Vec<ManifoldSpec> {
    let mut out = Vec::new();
    for n in 2..=12 {
        for k in 1..=n {
            out.push(ManifoldSpec::st_matrix(n, k));
            out.push(ManifoldSpec::st_vec(n, k));
            if k < n {
                out.push(ManifoldSpec::gr_proj(n, k));
                out.push(ManifoldSpec::gr_vec(n, k));
            }
            for k2 in 1..=n - k {
                out.push(ManifoldSpec::flag_vec(n, k, k2));
            }
        }
    }
    out.push(ManifoldSpec::pauli(2));
    out.push(ManifoldSpec::pauli(3));
    out.retain(|s| min_ambient_dim(s).map(|d| d <= 1000).unwrap_or(false));
    out
}

fn criterion_1() -> Outcome {
    const DRAWS: usize = 50;
    let specs = structure_specs();
    let mut worst = [0.0f64; 5];
    for spec in &specs {
        let (n, k) = (spec.n, spec.k);
        let cloud = sample(spec, DRAWS, &derive_stream(1, &format!("acceptance/structure/{}", spec.key()))).unwrap();
        for row in cloud.rows() {
            match spec.family {
                Family::StMatrix => {
                    let x = DMatrix::from_column_slice(n, k, row);
                    let e = max_abs(&(x.transpose() * &x - DMatrix::identity(k, k)));
                    worst[0] = worst[0].max(e);
                }
                Family::GrProj => {
                    let p = DMatrix::from_column_slice(n, n, row);
                    let e = max_abs(&(&p * &p - &p)).max((p.trace() - k as f64).abs());
                    worst[1] = worst[1].max(e);
                }
                Family::GrVec | Family::FlagVec | Family::Pauli => {
                    worst[2] = worst[2].max((norm2(row) - 1.0).abs());
                }
                Family::StVec => {
                    worst[3] = worst[3].max((norm2(row) - (1.0 + k as f64)).abs());
                }
                _ => unreachable!(),
            }
        }
    }
    let mut s = derive_stream(1, "acceptance/right-invariance");
    for spec in specs.iter().filter(|s| s.family == Family::GrVec) {
        for _ in 0..DRAWS {
            let frame = haar_stiefel(spec.n, spec.k, &mut s).unwrap();
            let r = haar_special_orthogonal(spec.k, &mut s).unwrap();
            let a = gr_vec_embedding(&frame);
            let b = gr_vec_embedding(&(&frame * r));
            let e = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            worst[4] = worst[4].max(e);
        }
    }
    let pass = worst[0] < 1e-9 && worst[1] < 1e-9 && worst[2] < 1e-8 && worst[3] < 1e-8 && worst[4] < 1e-9;
    outcome(
        pass,
        format!(
            "{} specs x {DRAWS} draws; St {:.1e}, GrProj {:.1e}, unit norms {:.1e}, StVec {:.1e}, SO(k) {:.1e}",
            specs.len(),
            worst[0],
            worst[1],
            worst[2],
            worst[3],
            worst[4]
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut bad = Vec::new();
    let mut cells = 0;
    let mut check = |spec: ManifoldSpec, d_i: usize, d_a: u128| {
        cells += 1;
        let got = (intrinsic_dim(&spec).unwrap(), min_ambient_dim(&spec).unwrap() as u128);
        if got != (d_i, d_a) {
            bad.push(format!("{} -> {got:?}, expected ({d_i}, {d_a})", spec.key()));
        }
    };
    for n in 1..=40 {
        for k in 1..=n {
            check(ManifoldSpec::st_matrix(n, k), dim_o(n) - dim_o(n - k), (n * k) as u128);
            if binom(n, k) < 1_000_000 {
                check(ManifoldSpec::st_vec(n, k), dim_o(n) - dim_o(n - k), binom(n, k) + (k * k) as u128);
            }
            if k < n {
                check(ManifoldSpec::gr_proj(n, k), dim_o(n) - dim_o(n - k) - dim_o(k), (n * n) as u128);
                if binom(n, k) < 1_000_000 {
                    check(ManifoldSpec::gr_vec(n, k), dim_o(n) - dim_o(n - k) - dim_o(k), binom(n, k));
                }
            }
        }
    }
    for n in 2..=14 {
        for k1 in 1..n {
            for k2 in 1..=n - k1 {
                check(
                    ManifoldSpec::flag_vec(n, k1, k2),
                    dim_o(n) - dim_o(k1) - dim_o(k2) - dim_o(n - k1 - k2),
                    binom(n, k1) * binom(n, k2),
                );
            }
        }
    }
    for n in [2usize, 3, 5, 7] {
        check(ManifoldSpec::pauli(n), n * n, 2 * (n as u128).pow(4));
    }
    // Smallest and largest instances used per family.
    let endpoints: [(ManifoldSpec, usize, usize); 12] = [
        (ManifoldSpec::gr_proj(5, 2), 6, 25),
        (ManifoldSpec::gr_proj(30, 1), 29, 900),
        (ManifoldSpec::gr_vec(3, 1), 2, 3),
        (ManifoldSpec::gr_vec(12, 6), 36, 924),
        (ManifoldSpec::st_matrix(10, 1), 9, 10),
        (ManifoldSpec::st_matrix(66, 7), 434, 462),
        (ManifoldSpec::st_vec(3, 1), 2, 4),
        (ManifoldSpec::flag_vec(3, 1, 1), 3, 9),
        (ManifoldSpec::flag_vec(6, 2, 2), 12, 225),
        (ManifoldSpec::pauli(2), 4, 32),
        (ManifoldSpec::pauli(3), 9, 162),
        (ManifoldSpec::pauli(5), 25, 1250),
    ];
    for (spec, d_i, d_a) in endpoints {
        check(spec, d_i, d_a as u128);
    }
    outcome(bad.is_empty(), format!("{cells} cells checked, {} mismatches {:?}", bad.len(), &bad[..bad.len().min(3)]))
}

fn criterion_3() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for d_i in [2, 5, 10] {
        for d_a in [20, 50] {
            let cloud = sample_affine(d_i, d_a, 2000, &derive_stream(3, &format!("acceptance/affine/{d_i}/{d_a}"))).unwrap();
            let r = run_estimator(&cloud, &Estimator::LpcaMaxGap { k: 100, center: Default::default() }, 3).unwrap();
            let hits = r.per_point.as_ref().unwrap().iter().filter(|&&x| x == d_i as f64).count();
            pass &= hits == 2000;
            if hits != 2000 {
                notes.push(format!("affine {d_i}/{d_a}: {hits}/2000"));
            }
        }
    }
    let mut worst = 0.0f64;
    for d in 2..=8 {
        let cloud = sample_sphere(d, d + 1, 5000, &derive_stream(3, &format!("acceptance/sphere/{d}"))).unwrap();
        for est in [Estimator::Mle { k: 50 }, Estimator::TwoNn { alpha: 0.1 }] {
            let r = run_estimator(&cloud, &est, 3).unwrap();
            let delta = (r.aggregates.mean / d as f64 - 1.0).abs();
            worst = worst.max(delta);
            if delta > 0.15 {
                pass = false;
                notes.push(format!("{est} on S^{d}: |delta| {delta:.3}"));
            }
        }
    }
    let mut s = derive_stream(3, "acceptance/abid-identity");
    let mut abid_worst = 0.0f64;
    for d in [2, 3, 5, 10, 20] {
        for _ in 0..20 {
            let m = 60;
            let offsets: Vec<Vec<f64>> = (0..m)
                .map(|_| {
                    let v: Vec<f64> = (0..d).map(|_| s.normal()).collect();
                    let r = s.uniform_in(0.1, 2.0) / norm2(&v).sqrt();
                    v.iter().map(|x| x * r).collect()
                })
                .collect();
            let query = vec![0.0; d];
            let nb: Vec<&[f64]> = offsets.iter().map(|v| v.as_slice()).collect();
            let d_hat = abid_local(&query, &nb, AbidPairs::Distinct).unwrap();
            let mut sum = 0.0;
            for i in 0..m {
                for j in i + 1..m {
                    let dot: f64 = offsets[i].iter().zip(&offsets[j]).map(|(a, b)| a * b).sum();
                    sum += dot * dot / (norm2(&offsets[i]) * norm2(&offsets[j]));
                }
            }
            let pairs = (m * (m - 1) / 2) as f64;
            let mean_cos2 = sum / pairs;
            let ident = (1.0 / d_hat - mean_cos2).abs();
            let dev = (mean_cos2 - 1.0 / d as f64).abs() * pairs.sqrt();
            abid_worst = abid_worst.max(dev);
            if ident > 1e-12 || dev > 2.0 {
                pass = false;
                notes.push(format!("abid d={d}: identity {ident:.1e}, scaled deviation {dev:.2}"));
            }
        }
    }
    outcome(
        pass,
        format!(
            "maxgap exact on 6 affine clouds; sphere worst |delta| {worst:.3}; ABID worst sqrt(pairs)|mean cos^2 - 1/d| {abid_worst:.2} {notes:?}"
        ),
    )
}

fn mean_abs_delta<'a>(recs: impl Iterator<Item = &'a BenchmarkRecord>) -> f64 {
    let v: Vec<f64> = recs.map(|r| r.delta_mean.expect("defined estimate").abs()).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_estimate<'a>(recs: impl Iterator<Item = &'a BenchmarkRecord>) -> f64 {
    let v: Vec<f64> = recs.map(|r| r.agg_mean.expect("defined estimate")).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn no_errors(recs: &[BenchmarkRecord]) -> Option<String> {
    recs.iter().find_map(|r| r.error.clone())
}

fn criterion_4() -> Outcome {
    let mut cfg = SweepConfig::new(
        SweepKind::FixKSweepN,
        vec![
            ManifoldSpec::gr_vec(4, 2),
            ManifoldSpec::gr_vec(5, 2),
            ManifoldSpec::flag_vec(3, 1, 1),
            ManifoldSpec::st_vec(4, 2),
        ],
        vec![Estimator::TwoNn { alpha: 0.1 }],
    );
    cfg.n_grid = vec![5000];
    let recs = run_sweep(&cfg).unwrap();
    if let Some(e) = no_errors(&recs) {
        return outcome(false, format!("sweep error: {e}"));
    }
    let by = |f: &str| mean_abs_delta(recs.iter().filter(|r| r.family == f));
    let gr4 = mean_abs_delta(recs.iter().filter(|r| r.family == Family::GrVec.as_str() && r.n == 4));
    let (gr, flag, st) = (by(Family::GrVec.as_str()), by(Family::FlagVec.as_str()), by(Family::StVec.as_str()));
    outcome(
        gr < flag && gr4 < flag,
        format!("TwoNN <|delta|>: Gr(Vec) {gr:.3} (d_i=4: {gr4:.3}), Flag(Vec) {flag:.3}, St(Vec) {st:.3}"),
    )
}

fn criterion_5() -> Outcome {
    let mut cfg = SweepConfig::new(
        SweepKind::FixKSweepN,
        vec![ManifoldSpec::gr_vec(4, 2), ManifoldSpec::sphere(4)],
        vec![Estimator::Mle { k: 20 }, Estimator::TwoNn { alpha: 0.1 }],
    );
    cfg.n_grid = vec![2000];
    cfg.distortions = vec![DistortionCell::None, DistortionCell::Squeeze { epsilon: 1.0 }];
    let recs = run_sweep(&cfg).unwrap();
    if let Some(e) = no_errors(&recs) {
        return outcome(false, format!("sweep error: {e}"));
    }
    let mut pass = true;
    let mut notes = Vec::new();
    for method in ["mle", "twonn"] {
        let change = |family: &str| {
            let sel = |dist: &'static str| {
                mean_abs_delta(recs.iter().filter(move |r| r.family == family && r.method == method && r.distortion == dist))
            };
            sel("squeeze:1") - sel("none")
        };
        let (gr, sphere) = (change(Family::GrVec.as_str()), change(Family::Sphere.as_str()));
        pass &= gr.abs() <= 0.2 && sphere > gr;
        notes.push(format!("{method}: Gr(Vec) change {gr:+.3}, S^4 change {sphere:+.3}"));
    }
    outcome(pass, format!("N=2000, MLE k=20; {}", notes.join("; ")))
}

fn criterion_6() -> Outcome {
    let mut cfg = SweepConfig::new(
        SweepKind::FixKSweepN,
        vec![ManifoldSpec::gr_vec(4, 2)],
        vec![Estimator::Mle { k: 20 }, Estimator::TwoNn { alpha: 0.1 }],
    );
    cfg.n_grid = vec![2000];
    cfg.distortions = [1e-3, 10.0]
        .map(|sigma2| DistortionCell::Noise { noise_kind: NoiseKind::Isotropic, sigma2 })
        .to_vec();
    let recs = run_sweep(&cfg).unwrap();
    if let Some(e) = no_errors(&recs) {
        return outcome(false, format!("sweep error: {e}"));
    }
    let mut pass = true;
    let mut notes = Vec::new();
    for method in ["mle", "twonn"] {
        let at = |s2: f64| mean_estimate(recs.iter().filter(|r| r.method == method && r.sigma2 == Some(s2)));
        let (lo, hi) = (at(1e-3), at(10.0));
        pass &= hi > lo;
        notes.push(format!("{method}: {lo:.3} -> {hi:.3}"));
    }
    outcome(pass, format!("mean estimate at sigma2 = 1e-3 -> 10: {}", notes.join("; ")))
}

fn criterion_7_and_8() -> (Outcome, Outcome, String) {
    let fc = hofstadter_cloud(50, 8).unwrap();
    let bc = box_count_dimension(&fc.unit_square_points(), 3, 8).unwrap();
    let cloud = fc.to_point_cloud(bc.dimension).unwrap();
    let ks = [5, 10, 20, 50, 100];
    let sub = derive_stream(0, "fractal/subsample");
    let suite = |pairs| fractal_lid_suite(&cloud, &ks, 1000, &[Estimator::Abid { k: 5, pairs }], &sub).unwrap();
    let rows = suite(AbidPairs::Distinct);
    let box_ok = (bc.dimension - 1.445).abs() <= 0.15;
    let mean_ok = (rows[0].mean - 1.485).abs() <= 0.2;
    let std_ok = (rows[0].std - 0.323).abs() <= 0.15;
    let decreasing = rows.windows(2).all(|w| w[1].std < w[0].std);
    let table: Vec<String> = rows.iter().map(|r| format!("k={} {:.3}±{:.3}", r.k, r.mean, r.std)).collect();
    let c7 = outcome(
        box_ok && mean_ok && std_ok && decreasing,
        format!(
            "box dimension {:.3} [{}]; ABID {}; mean ok {mean_ok}, std ok {std_ok}, std decreasing {decreasing}",
            bc.dimension,
            if box_ok { "ok" } else { "out of range" },
            table.join(", ")
        ),
    );
    let alt = suite(AbidPairs::WithSelf);
    let alt_table: Vec<String> = alt.iter().map(|r| format!("k={} {:.3}±{:.3}", r.k, r.mean, r.std)).collect();
    let info = format!(
        "ABID with self-pairs included in the pair average: {}; k=5 mean ok {}, std ok {}",
        alt_table.join(", "),
        (alt[0].mean - 1.485).abs() <= 0.2,
        (alt[0].std - 0.323).abs() <= 0.15
    );

    let mut idx = rand::seq::index::sample(&mut sub.clone(), cloud.len(), 1000).into_vec();
    idx.sort_unstable();
    let sub_cloud = cloud.select_rows(&idx).unwrap();
    let abid10 = Estimator::Abid { k: 10, pairs: AbidPairs::Distinct };
    let rb = ratio_of(&run_estimator(&sub_cloud, &abid10, 0).unwrap().defined()).unwrap();
    let gr = sample(&ManifoldSpec::gr_vec(4, 2), 1000, &derive_stream(0, "acceptance/manifoldness")).unwrap();
    let rg = ratio_of(&run_estimator(&gr, &abid10, 0).unwrap().defined()).unwrap();
    let c8 = outcome(rb > rg, format!("ABID std/mean at N=1000, k=10: butterfly {rb:.3}, Gr(Vec) d_i=4 {rg:.3}"));
    (c7, c8, info)
}

fn criterion_9() -> Outcome {
    let mut cfg = SweepConfig::new(
        SweepKind::FixRatioSweepN,
        vec![ManifoldSpec::gr_vec(4, 2), ManifoldSpec::flag_vec(3, 1, 1), ManifoldSpec::sphere(3).with_ambient(6)],
        vec![
            Estimator::LpcaMaxGap { k: 0, center: Default::default() },
            Estimator::LpcaFo { k: 0, epsilon: 0.05, center: Default::default() },
            Estimator::Mle { k: 0 },
            Estimator::CorrInt { k1: 10, k2: 20 },
            Estimator::TwoNn { alpha: 0.1 },
            Estimator::Danco { k: 10, calib_sets: 1 },
            Estimator::Abid { k: 0, pairs: AbidPairs::Distinct },
        ],
    );
    cfg.n_grid = vec![150, 400];
    cfg.ratios = vec![0.08, 0.2];
    cfg.seeds = vec![0, 1];
    cfg.distortions = vec![
        DistortionCell::None,
        DistortionCell::Squeeze { epsilon: 0.5 },
        DistortionCell::Noise { noise_kind: NoiseKind::Anisotropic, sigma2: 0.01 },
    ];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let recs = run_sweep(&cfg).unwrap();
            (
                records_to_string(RecordFormat::Csv, &recs).unwrap(),
                records_to_string(RecordFormat::Jsonl, &recs).unwrap(),
                recs.len(),
                recs.iter().filter(|r| r.error.is_some()).count(),
            )
        })
    };
    let a = run(1);
    let b = run(4);
    let c = run(7);
    let same = a == b && b == c;
    outcome(
        same,
        format!("{} records ({} error records) identical in CSV and JSONL across 1, 4 and 7 threads: {same}", a.2, a.3),
    )
}

fn timed(id: &'static str, f: &dyn Fn() -> Outcome) -> (&'static str, Outcome) {
    let t = Instant::now();
    let o = f();
    print_line(id, &o, Some(t.elapsed().as_secs_f64()));
    (id, o)
}

fn print_line(id: &str, o: &Outcome, secs: Option<f64>) {
    let time = secs.map(|s| format!(" ({s:.1} s)")).unwrap_or_default();
    println!("{} criterion {id}: {}{time}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn main() {
    let start = Instant::now();
    let mut results = vec![
        timed("1 structure invariants", &criterion_1),
        timed("2 dimension formulas", &criterion_2),
        timed("3 oracle recovery", &criterion_3),
        timed("4 Gr(Vec) vs Flag(Vec) error ordering", &criterion_4),
        timed("5 squeezing robustness", &criterion_5),
        timed("6 noise monotonicity", &criterion_6),
    ];
    let t = Instant::now();
    let (c7, c8, info) = criterion_7_and_8();
    print_line("7 fractal pipeline", &c7, Some(t.elapsed().as_secs_f64()));
    println!("INFO criterion 7: {info}");
    print_line("8 manifold-ness diagnostic", &c8, None);
    results.push(("7 fractal pipeline", c7));
    results.push(("8 manifold-ness diagnostic", c8));
    results.push(timed("9 determinism", &criterion_9));
    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(id, _)| *id).collect();
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s",
        results.len() - failed.len(),
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
