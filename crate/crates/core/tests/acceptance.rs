//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the lines always reach the terminal. Criterion
//! 10 needs the public dataset; point `GCS_FULL_DATASET` at its manifest to
//! run it.

// finite differences mutate the buffer being indexed
#![allow(clippy::needless_range_loop)]

use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gcs_core::applications::{make_target_curve, optimize_impact, ImpactSpec};
use gcs_core::curve::{
    energy_before_threshold, resample, stiffness, work, ResampledCurve, GRID_POINTS,
};
use gcs_core::dataset::Dataset;
use gcs_core::design::{DensityTable, GcsDesign, Material};
use gcs_core::evaluation::{
    curve_metric_errors_against, mae_r2, repeated_runs, EvalConfig, Metric,
};
use gcs_core::geometry::{build_mesh, check_printability, solve_r0, PrintabilityReport};
use gcs_core::inference::Tandem;
use gcs_core::knn::KnnIndex;
use gcs_core::nn::{
    forward_loss_gradient, initial_inverse, inverse_loss_gradient, loss_forward, loss_inverse,
    parameter_count, Head, LossMode, LossWeights, Mlp, TrainConfig, FORWARD_DIMS, INVERSE_DIMS,
    INVERSE_HEAD,
};
use gcs_core::nn::{train_forward, train_inverse};
use gcs_core::parallel::Execution;
use gcs_core::pca::PcaModel;
use gcs_core::pipeline::{prepare, Prepared, Sample};
use gcs_core::split::split;
use gcs_core::synthetic::{generate, ground_truth_curve, SyntheticConfig};
use gcs_core::vectorize::{
    DesignVector, PerformanceVector, DESIGN_DIM, MATERIAL_OFFSET, PERFORMANCE_DIM,
};

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    check(
        elapsed <= Duration::from_secs(limit_s),
        format!("took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64()),
    )
}

fn random_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

// ---------------------------------------------------------------- 1

const FD_STEP: f64 = 1e-5;
// relative errors are taken against max(|analytic|, |numeric|, this floor);
// below it central differences are dominated by roundoff
const FD_FLOOR: f64 = 1e-6;

fn central_difference(params: &mut [f64], i: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = params[i];
    params[i] = orig + FD_STEP;
    let up = f(params);
    params[i] = orig - FD_STEP;
    let down = f(params);
    params[i] = orig;
    (up - down) / (2.0 * FD_STEP)
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FD_FLOOR)
}

/// ReLU on/off flags over a batch; a finite difference that flips one
/// straddles a kink, where the derivative does not exist.
fn pattern(net: &Mlp, inputs: &[Vec<f64>]) -> Vec<bool> {
    inputs
        .iter()
        .flat_map(|x| net.trace(x).unwrap().relu_pattern())
        .collect()
}

fn tally(
    worst: &mut f64,
    checked: &mut usize,
    skipped: &mut usize,
    crossed: bool,
    analytic: f64,
    numeric: f64,
) {
    if crossed {
        *skipped += 1;
    } else {
        *checked += 1;
        *worst = worst.max(rel_err(analytic, numeric));
    }
}

fn small_dims(rng: &mut impl Rng, input: usize, output: usize) -> Vec<usize> {
    vec![
        input,
        rng.random_range(3..9),
        rng.random_range(3..9),
        output,
    ]
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (mut worst, mut checked, mut skipped) = (0.0f64, 0usize, 0usize);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = LossWeights::from_eigenvalues(&random_vec(&mut rng, 10, 0.1, 4.0))
            .map_err(|e| e.to_string())?;
        let designs: Vec<Vec<f64>> = (0..4)
            .map(|_| random_vec(&mut rng, DESIGN_DIM, 0.0, 1.0))
            .collect();
        let perfs: Vec<Vec<f64>> = (0..4)
            .map(|_| random_vec(&mut rng, PERFORMANCE_DIM, -1.0, 1.0))
            .collect();
        let batch: Vec<(&[f64], &[f64])> = designs
            .iter()
            .zip(&perfs)
            .map(|(d, p)| (&d[..], &p[..]))
            .collect();
        let fdims = small_dims(&mut rng, DESIGN_DIM, PERFORMANCE_DIM);
        let idims = small_dims(&mut rng, PERFORMANCE_DIM, DESIGN_DIM);
        let forward = Mlp::random(&fdims, Head::Linear, &mut rng).unwrap();
        let inverse = Mlp::random(&idims, INVERSE_HEAD, &mut rng).unwrap();
        let alpha = rng.random_range(0.0..1.0);

        for mode in [LossMode::Elementwise, LossMode::DotProduct] {
            let (_, grads) = forward_loss_gradient(&forward, &batch, &w, mode).unwrap();
            let base = pattern(&forward, &designs);
            let mut params = forward.params().to_vec();
            for i in 0..params.len() {
                let mut crossed = false;
                let numeric = central_difference(&mut params, i, |p| {
                    let net = Mlp::from_parts(&fdims, Head::Linear, p.to_vec()).unwrap();
                    crossed |= pattern(&net, &designs) != base;
                    let preds: Vec<Vec<f64>> =
                        designs.iter().map(|d| net.forward(d).unwrap()).collect();
                    loss_forward(&preds, &perfs, &w, mode).unwrap()
                });
                tally(
                    &mut worst,
                    &mut checked,
                    &mut skipped,
                    crossed,
                    grads[i],
                    numeric,
                );
            }

            let g = inverse_loss_gradient(&forward, &inverse, &batch, &w, alpha, mode).unwrap();
            let tandem_pattern = |inv: &Mlp| {
                let generated: Vec<Vec<f64>> =
                    perfs.iter().map(|p| inv.forward(p).unwrap()).collect();
                let mut pat = pattern(inv, &perfs);
                pat.extend(pattern(&forward, &generated));
                pat
            };
            let base = tandem_pattern(&inverse);
            let mut params = inverse.params().to_vec();
            for i in 0..params.len() {
                let mut crossed = false;
                let numeric = central_difference(&mut params, i, |p| {
                    let inv = Mlp::from_parts(&idims, INVERSE_HEAD, p.to_vec()).unwrap();
                    crossed |= tandem_pattern(&inv) != base;
                    loss_inverse(&designs, &perfs, &forward, &inv, &w, alpha, mode)
                        .unwrap()
                        .total()
                });
                tally(
                    &mut worst,
                    &mut checked,
                    &mut skipped,
                    crossed,
                    g.inverse[i],
                    numeric,
                );
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-5,
        format!("max relative error {worst:.2e} >= 1e-5"),
    )?;
    check(
        skipped * 100 < checked,
        format!(
            "{skipped} of {} parameters straddle a ReLU kink",
            checked + skipped
        ),
    )?;
    within(elapsed, 30)?;
    Ok(format!(
        "20 network pairs, both loss modes, {checked} parameters, max rel error {worst:.2e} \
         ({skipped} kink-straddling differences excluded), {:.1} s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // Gram-Schmidt on random vectors gives 10 orthonormal basis curves.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < 10 {
        let mut v = random_vec(&mut rng, GRID_POINTS, -1.0, 1.0);
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        basis.push(v.iter().map(|x| x / norm).collect());
    }
    let mean: Vec<f64> = (0..GRID_POINTS)
        .map(|i| 50.0 + 10.0 * (i as f64 / 20.0).sin())
        .collect();
    let forces: Vec<Vec<f64>> = (0..500)
        .map(|_| {
            let mut f = mean.clone();
            for (k, b) in basis.iter().enumerate() {
                let a = rng.random_range(-1.0..1.0) * 40.0 / (k + 1) as f64;
                f.iter_mut().zip(b).for_each(|(x, y)| *x += a * y);
            }
            f
        })
        .collect();
    let model = PcaModel::fit(&forces, (5.0, 15.0))
        .map_err(|e| e.to_string())?
        .model;
    let recon = forces
        .iter()
        .map(|f| {
            let r = model.reconstruct(&model.project(f));
            r.iter()
                .zip(f)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    let mut ortho: f64 = 0.0;
    for (i, a) in model.components.iter().enumerate() {
        for (j, b) in model.components.iter().enumerate() {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            ortho = ortho.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    let w = LossWeights::from_pca(&model).map_err(|e| e.to_string())?;
    let wsum_err = (w.0[..10].iter().sum::<f64>() - 1.0).abs();
    let elapsed = start.elapsed();
    check(recon < 1e-8, format!("reconstruction error {recon:.2e}"))?;
    check(ortho < 1e-9, format!("orthonormality error {ortho:.2e}"))?;
    check(
        wsum_err <= 1e-12,
        format!("weights sum off by {wsum_err:.2e}"),
    )?;
    within(elapsed, 10)?;
    Ok(format!(
        "reconstruction {recon:.1e}, orthonormality {ortho:.1e}, weight sum error {wsum_err:.1e}, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 3

/// Networks trained on the synthetic ground truth, reused by criteria 4 and 9.
struct Synthetic {
    samples: Vec<Sample>,
    prepared: Prepared,
    config: TrainConfig,
    forward: Mlp,
    inverse: Mlp,
}

fn synthetic_samples(n: usize, seed: u64) -> Vec<Sample> {
    let config = SyntheticConfig {
        samples: n,
        seed,
        ..SyntheticConfig::default()
    };
    generate(&config, &DensityTable::default(), Execution::Parallel)
        .unwrap()
        .into_iter()
        .map(|s| Sample {
            curve: s.resampled(),
            id: s.id,
            design: s.design,
        })
        .collect()
}

fn training_config() -> TrainConfig {
    TrainConfig {
        // weight decay 1 underfits at this scale, see the project notes
        weight_decay: 0.01,
        max_epochs: 200,
        seed: 1,
        ..TrainConfig::default()
    }
}

fn criterion_3(store: &mut Option<Synthetic>) -> Outcome {
    let start = Instant::now();
    let samples = synthetic_samples(2000, 1);
    let config = training_config();
    let prepared = prepare(
        &samples,
        split(samples.len(), &config.split_spec()).unwrap(),
    )
    .map_err(|e| e.to_string())?;
    let (set, sp, w) = (&prepared.set, &prepared.split, &prepared.weights);
    let forward = train_forward(set, sp, w, &config).map_err(|e| e.to_string())?;

    let test = &sp.test;
    let preds: Vec<PerformanceVector> = test
        .iter()
        .map(|&i| {
            PerformanceVector::from_slice(&forward.net.forward(&set.designs[i]).unwrap()).unwrap()
        })
        .collect();
    let truth: Vec<ResampledCurve> = test.iter().map(|&i| samples[i].curve.clone()).collect();
    let pairs =
        curve_metric_errors_against(&preds, &truth, &prepared.pca).map_err(|e| e.to_string())?;
    let r2 = |m: Metric| {
        mae_r2(pairs.get(m))
            .ok()
            .and_then(|s| s.r2)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let (r2_work, r2_disp) = (r2(Metric::Work), r2(Metric::MaxDisplacement));

    let inv_config = TrainConfig {
        alpha: 1.0,
        ..config.clone()
    };
    let inverse =
        train_inverse(set, sp, &forward.net, w, &inv_config).map_err(|e| e.to_string())?;
    let (designs, perfs) = set.rows(test);
    let lp = |inv: &Mlp| {
        loss_inverse(
            &designs,
            &perfs,
            &forward.net,
            inv,
            w,
            1.0,
            inv_config.loss_mode,
        )
        .unwrap()
        .performance
    };
    let (lp0, lp1) = (lp(&initial_inverse(inv_config.seed)), lp(&inverse.net));
    let generated: Vec<DesignVector> = perfs
        .iter()
        .map(|p| DesignVector::from_slice(&inverse.net.forward(p).unwrap()).unwrap())
        .collect();
    let heads_ok = generated.iter().all(|g| {
        let open = g.0[..MATERIAL_OFFSET].iter().all(|&v| v > 0.0 && v < 1.0);
        let sum: f64 = g.material_block().iter().sum();
        open && (sum - 1.0).abs() <= 1e-6
    });
    let elapsed = start.elapsed();
    *store = Some(Synthetic {
        samples,
        prepared,
        config,
        forward: forward.net,
        inverse: inverse.net,
    });

    let detail = format!(
        "R2 work {r2_work:.4}, R2 max displacement {r2_disp:.4} ({} epochs); L_p {lp0:.4} -> {lp1:.4} ({:.0}x); \
         {}/{} heads valid; {:.0} s",
        forward.history.epochs_run,
        lp0 / lp1,
        generated.iter().filter(|_| heads_ok).count(),
        generated.len(),
        elapsed.as_secs_f64()
    );
    check(
        r2_work >= 0.9 && r2_disp >= 0.9,
        format!("R2 below 0.9: {detail}"),
    )?;
    check(
        lp0 >= 10.0 * lp1,
        format!("L_p dropped less than 10x: {detail}"),
    )?;
    check(heads_ok, format!("head constraint violated: {detail}"))?;
    within(elapsed, 600)?;
    Ok(detail)
}

// ---------------------------------------------------------------- 4

fn criterion_4(store: &Option<Synthetic>) -> Outcome {
    let s = store
        .as_ref()
        .ok_or("criterion 3 did not produce networks")?;
    let (set, sp, w) = (&s.prepared.set, &s.prepared.split, &s.prepared.weights);
    let before = s.forward.fingerprint();
    let _ = train_inverse(
        set,
        sp,
        &s.forward,
        w,
        &TrainConfig {
            alpha: 0.1,
            max_epochs: 5,
            ..s.config.clone()
        },
    )
    .map_err(|e| e.to_string())?;
    check(
        s.forward.fingerprint() == before,
        "forward parameters changed during stage two",
    )?;

    // retrain on a subset from scratch, twice
    let sub = &s.samples[..400];
    let cfg = TrainConfig {
        max_epochs: 15,
        seed: 9,
        ..s.config.clone()
    };
    let run = || {
        let p = prepare(sub, split(sub.len(), &cfg.split_spec()).unwrap()).unwrap();
        let f = train_forward(&p.set, &p.split, &p.weights, &cfg)
            .unwrap()
            .net;
        let i = train_inverse(
            &p.set,
            &p.split,
            &f,
            &p.weights,
            &TrainConfig {
                alpha: 1.0,
                ..cfg.clone()
            },
        )
        .unwrap()
        .net;
        (f, i)
    };
    let (f1, i1) = run();
    let (f2, i2) = run();
    check(
        f1.params() == f2.params(),
        "forward retraining is not bit-identical",
    )?;
    check(
        i1.params() == i2.params(),
        "inverse retraining is not bit-identical",
    )?;
    Ok(format!(
        "F hash {} unchanged by stage two; retraining reproduces F {} and I {}",
        &before[..12],
        &f1.fingerprint()[..12],
        &i1.fingerprint()[..12]
    ))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let designs: Vec<Vec<f64>> = (0..100)
        .map(|_| random_vec(&mut rng, DESIGN_DIM, 0.0, 1.0))
        .collect();
    let perfs: Vec<Vec<f64>> = (0..100)
        .map(|_| random_vec(&mut rng, PERFORMANCE_DIM, -2.0, 2.0))
        .collect();
    let index = KnnIndex::new(&designs, &perfs, None).map_err(|e| e.to_string())?;
    let scan = |stored: &[Vec<f64>], q: &[f64]| {
        let mut best = (f64::INFINITY, 0);
        for (i, s) in stored.iter().enumerate() {
            let d: f64 = s.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    };
    for _ in 0..50 {
        let qd = random_vec(&mut rng, DESIGN_DIM, 0.0, 1.0);
        let got = index
            .knn_forward(&DesignVector::from_slice(&qd).unwrap())
            .map_err(|e| e.to_string())?;
        check(
            got.0[..] == perfs[scan(&designs, &qd)][..],
            "knn_forward differs from linear scan",
        )?;
        let qp = random_vec(&mut rng, PERFORMANCE_DIM, -2.0, 2.0);
        let got = index
            .knn_inverse(&PerformanceVector::from_slice(&qp).unwrap())
            .map_err(|e| e.to_string())?;
        check(
            got.0[..] == designs[scan(&perfs, &qp)][..],
            "knn_inverse differs from linear scan",
        )?;
    }
    for i in 0..100 {
        let f = index
            .knn_forward(&DesignVector::from_slice(&designs[i]).unwrap())
            .unwrap();
        let b = index
            .knn_inverse(&PerformanceVector::from_slice(&perfs[i]).unwrap())
            .unwrap();
        check(
            f.0[..] == perfs[i][..] && b.0[..] == designs[i][..],
            format!("self-query {i} failed"),
        )?;
    }
    Ok("50 queries each way match the exhaustive scan; 100 self-queries exact".into())
}

// ---------------------------------------------------------------- 6

/// ∫ min(kx, p) dx up to the first force above `threshold`, in J.
fn plateau_energy(k: f64, p: f64, d: f64, threshold: f64) -> f64 {
    if threshold < p {
        return threshold * threshold / (2.0 * k) * 1e-3;
    }
    let kink = (p / k).min(d);
    (0.5 * k * kink * kink + p * (d - kink)) * 1e-3
}

fn criterion_6() -> Outcome {
    let ramp = make_target_curve(100.0, f64::MAX, 20.0).map_err(|e| e.to_string())?;
    let (k, e) = (stiffness(&ramp), work(&ramp));
    check((k - 100.0).abs() <= 1e-6, format!("ramp stiffness {k}"))?;
    check((e - 20.0).abs() <= 1e-9, format!("ramp work {e}"))?;

    // kinks land on grid points: 2.0 = 20·(9.9/99) and 2.0 = 10·(19.8/99)
    let mut worst: f64 = 0.0;
    for (k, p, d) in [(4.0, 8.0, 9.9), (5.0, 10.0, 19.8), (2.0, 4.0, 9.9)] {
        let c = make_target_curve(k, p, d).map_err(|e| e.to_string())?;
        for t in [0.5 * p, p, 1.25 * p, 1e9] {
            worst = worst.max((energy_before_threshold(&c, t) - plateau_energy(k, p, d, t)).abs());
        }
    }
    check(worst <= 1e-9, format!("plateau E_F error {worst:.2e}"))?;

    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (
        proptest::collection::vec(0.0..200.0f64, GRID_POINTS),
        0.5..30.0f64,
        0.0..250.0f64,
        0.0..250.0f64,
    );
    runner
        .run(&strategy, |(forces, d, a, b)| {
            let c = ResampledCurve::new(forces, d).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(energy_before_threshold(&c, lo) <= energy_before_threshold(&c, hi));
            Ok(())
        })
        .map_err(|e| format!("monotonicity: {e}"))?;
    Ok(format!(
        "ramp k {k:.9} N/mm, work {e:.12} J; plateau max error {worst:.1e}; monotone on 1000 random curves"
    ))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let densities = DensityTable::default();
    let cylinder = GcsDesign::cylinder(2.0, 20.0, 0.5, Material::Pla);
    let density = densities.get(Material::Pla).unwrap();
    let closed = 2.0 / (TAU * 20.0 * 0.5 * density * 1e-3);
    let r0 = solve_r0(&cylinder, &densities)
        .map_err(|e| e.to_string())?
        .r0_base;
    let rel = (r0 - closed).abs() / closed;
    check(rel < 1e-3, format!("r0 {r0} vs closed form {closed}"))?;
    check(
        (closed - 25.67).abs() < 0.01,
        format!("closed form {closed} is not 25.67"),
    )?;

    let mut lobed = GcsDesign::cylinder(3.0, 20.0, 0.5, Material::Pla);
    lobed.c4_base = 0.3;
    lobed.c4_top = 0.3;
    lobed.c8_base = 0.1;
    lobed.c8_top = 0.1;
    let mut mass_err: f64 = 0.0;
    for d in [&cylinder, &lobed] {
        let mesh = build_mesh(d, &densities, 128, 256).map_err(|e| e.to_string())?;
        let mass = mesh.surface_area() * d.thickness * density * 1e-3;
        mass_err = mass_err.max((mass - d.mass).abs() / d.mass);
    }
    check(
        mass_err < 0.01,
        format!("mesh mass error {:.3}%", 100.0 * mass_err),
    )?;

    let mut crossing = cylinder.clone();
    crossing.c4_base = 1.2;
    let report = check_printability(&crossing, &densities);
    check(
        !report.passes_axis && !report.printable,
        "c4 = 1.2 design passes the axis check",
    )?;

    let at = PrintabilityReport::from_measurements(30.0, 0.01);
    let below = PrintabilityReport::from_measurements(30.0_f64.next_down(), 0.01_f64.next_down());
    check(
        at.passes_perimeter && at.passes_axis,
        "boundary values rejected",
    )?;
    check(
        !below.passes_perimeter && !below.passes_axis,
        "values below the boundary accepted",
    )?;
    Ok(format!(
        "r0 {r0:.4} mm vs {closed:.4} ({:.1e} rel); mesh mass error {:.3}%; axis crossing rejected; 30 mm / 0.01 mm inclusive",
        rel,
        100.0 * mass_err
    ))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let (f, i) = (
        parameter_count(&FORWARD_DIMS),
        parameter_count(&INVERSE_DIMS),
    );
    check(f == 10_187, format!("forward count {f}"))?;
    check(i == 10_193, format!("inverse count {i}"))?;
    let reported: i64 = 10_190;
    let (df, di) = (f as i64 - reported, i as i64 - reported);
    check(
        df.abs() <= 6 && di.abs() <= 6,
        "counts differ from 10,190 by more than 6",
    )?;
    Ok(format!(
        "F {f}, I {i}; the published 10,190 is off by {df:+} (F) and {di:+} (I)"
    ))
}

// ---------------------------------------------------------------- 9

fn criterion_9(store: &Option<Synthetic>) -> Outcome {
    let s = store
        .as_ref()
        .ok_or("criterion 3 did not produce networks")?;
    let densities = DensityTable::default();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/egg_drop.json");
    let spec = ImpactSpec::load(&fixture).map_err(|e| e.to_string())?;
    check(
        spec.force_threshold == 10.0 && spec.target_energy == 0.0735,
        "fixture constants differ",
    )?;

    // the ground truth admits a printable design meeting the spec
    let witness = GcsDesign::cylinder(4.0, 25.0, 0.8, Material::TpuArmadillo75D);
    let c = resample(&ground_truth_curve(&witness, 400).unwrap());
    check(
        c.peak_force() <= spec.force_threshold
            && energy_before_threshold(&c, spec.force_threshold) >= spec.target_energy
            && check_printability(&witness, &densities).printable,
        "ground-truth witness does not meet the spec",
    )?;

    let tandem = Tandem::new(&s.prepared.pca, &s.forward, &s.inverse).map_err(|e| e.to_string())?;
    let r = optimize_impact(&spec, &tandem, &densities, Execution::Parallel)
        .map_err(|e| e.to_string())?;
    let detail = format!(
        "egg drop: feasible {}, peak {:.3} N, energy {:.4} J, deficit {}, {:?}",
        r.feasible, r.predicted_peak_force, r.achieved_energy, r.deficit, r.best_design.material
    );
    check(
        r.feasible && r.predicted_peak_force <= spec.force_threshold && r.deficit == 0.0,
        format!("no feasible design: {detail}"),
    )?;

    let zero = ImpactSpec {
        target_energy: 0.0,
        ..spec.clone()
    };
    let z = optimize_impact(&zero, &tandem, &densities, Execution::Parallel)
        .map_err(|e| e.to_string())?;
    check(z.feasible && z.deficit == 0.0, "E = 0 spec not met")?;

    let impossible = ImpactSpec {
        force_threshold: 1e-3,
        ..spec
    };
    let n = optimize_impact(&impossible, &tandem, &densities, Execution::Parallel)
        .map_err(|e| e.to_string())?;
    check(
        !n.feasible && !n.candidate_log.is_empty(),
        "1 mN spec reported feasible",
    )?;
    Ok(format!(
        "{detail}; infeasible spec flagged with {} candidates logged",
        n.candidate_log.len()
    ))
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Option<Outcome> {
    let manifest = std::env::var_os("GCS_FULL_DATASET")?;
    Some((|| {
        let (data, report) = Dataset::ingest(Path::new(&manifest)).map_err(|e| e.to_string())?;
        let data = data.filter_materials(gcs_core::dataset::MIN_MATERIAL_COUNT);
        let samples = data.samples();
        let r = repeated_runs(&samples, &EvalConfig::default(), Execution::Parallel)
            .map_err(|e| e.to_string())?;
        let work = r.forward.get(Metric::Work).mae_mean;
        let disp = r.forward.get(Metric::MaxDisplacement).mae_mean;
        let detail = format!(
            "{} accepted, {} after filtering; work MAE {work:.3} J (published 1.3), max displacement MAE {disp:.3} mm (published 0.50)",
            report.accepted,
            samples.len()
        );
        check(work <= 2.0 * 1.3 && disp <= 2.0 * 0.50, detail.clone())?;
        Ok(detail)
    })())
}

// ----------------------------------------------------------------

fn run(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(detail) => {
            println!("criterion {n:>2} PASS  {name}: {detail}");
            true
        }
        Err(why) => {
            println!("criterion {n:>2} FAIL  {name}: {why}");
            false
        }
    }
}

fn main() {
    // `cargo test -- --list` and friends pass flags; only run when asked to test
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut store = None;
    let results = [
        run(1, "gradient correctness", criterion_1),
        run(2, "PCA fidelity", criterion_2),
        run(3, "synthetic end-to-end learning", || {
            criterion_3(&mut store)
        }),
        run(4, "two-stage protocol", || criterion_4(&store)),
        run(5, "kNN oracle equivalence", criterion_5),
        run(6, "curve metrics", criterion_6),
        run(7, "geometry", criterion_7),
        run(8, "architecture", criterion_8),
        run(9, "impact optimizer", || criterion_9(&store)),
    ];
    let mut ok = results.iter().all(|&r| r);
    match criterion_10() {
        None => println!(
            "criterion 10 SKIP  full-dataset reproduction: set GCS_FULL_DATASET to a manifest"
        ),
        Some(outcome) => ok &= run(10, "full-dataset reproduction", || outcome),
    }
    if !ok {
        std::process::exit(1);
    }
}
