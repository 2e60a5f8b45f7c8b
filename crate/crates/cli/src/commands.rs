use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use gcs_core::applications::{emulate_material, optimize_impact, ImpactSpec};
use gcs_core::bundle::{Bundle, ForwardStage};
use gcs_core::curve::{resample, RawCurve};
use gcs_core::dataset::{Dataset, MANIFEST_FILE};
use gcs_core::design::{DensityTable, GcsDesign};
use gcs_core::evaluation::{
    printability_sweep, repeated_runs, Comparison, EvalConfig, SWEEP_ALPHAS,
};
use gcs_core::geometry::{build_mesh, check_printability, export_stl};
use gcs_core::inference::{predict_design, Tandem};
use gcs_core::nn::{train_forward, train_inverse, History, TrainConfig};
use gcs_core::parallel::Execution;
use gcs_core::pca::PcaModel;
use gcs_core::pipeline::{prepare, Sample};
use gcs_core::split::split;
use gcs_core::synthetic::{generate, SyntheticConfig};
use gcs_core::GcsError;
use gcs_service::{AppState, Cors, ModelSnapshot};

use crate::{Cli, Command, Failure, TrainArgs};

type Outcome = Result<(), Failure>;

fn runtime(msg: impl std::fmt::Display) -> Failure {
    Failure::Runtime(msg.to_string())
}

fn emit<T: Serialize>(cli: &Cli, value: &T, human: impl FnOnce() -> String) -> Outcome {
    if cli.json {
        println!("{}", serde_json::to_string_pretty(value).map_err(runtime)?);
    } else {
        println!("{}", human());
    }
    Ok(())
}

/// Parses a user-supplied JSON file; syntax errors count as invalid input.
fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn exec(cli: &Cli) -> Execution {
    if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn densities(cli: &Cli) -> Result<DensityTable, Failure> {
    Ok(match &cli.densities {
        Some(path) => DensityTable::load(path)?,
        None => DensityTable::default(),
    })
}

fn train_config(cli: &Cli, args: &TrainArgs) -> Result<TrainConfig, Failure> {
    let mut config: TrainConfig = match &cli.config {
        Some(path) => read_json(path)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(v) = args.epochs {
        config.max_epochs = v;
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = args.weight_decay {
        config.weight_decay = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.patience {
        config.patience = v;
    }
    config.validate()?;
    Ok(config)
}

fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    let manifest = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let (data, report) = Dataset::ingest(&manifest)?;
    if !report.rejected.is_empty() {
        log::warn!(
            "{} records rejected while loading {}",
            report.rejected.len(),
            manifest.display()
        );
    }
    if data.is_empty() {
        return Err(GcsError::Empty("dataset").into());
    }
    Ok(data)
}

fn load_samples(path: &Path) -> Result<Vec<Sample>, Failure> {
    Ok(load_dataset(path)?.samples())
}

fn load_bundle(cli: &Cli) -> Result<Bundle, Failure> {
    Bundle::load(&cli.bundle).map_err(|e| match e {
        GcsError::Io { .. } => runtime(format!(
            "cannot load model bundle from {}: {e} (set --bundle or {})",
            cli.bundle.display(),
            crate::BUNDLE_ENV
        )),
        other => other.into(),
    })
}

fn tandem<'a>(bundle: &'a Bundle, alpha: f64) -> Result<Tandem<'a>, Failure> {
    bundle.tandem(alpha).ok_or_else(|| {
        Failure::Validation(format!(
            "no inverse network for alpha {alpha}; available: {:?}",
            bundle.alphas()
        ))
    })
}

fn counts_json(counts: &BTreeMap<gcs_core::design::Material, usize>) -> Value {
    json!(counts
        .iter()
        .map(|(m, n)| (m.name(), n))
        .collect::<BTreeMap<_, _>>())
}

fn history_json(h: &History) -> Value {
    json!({
        "initial_val_loss": h.initial_val_loss,
        "best_val_loss": h.best_val_loss,
        "best_epoch": h.best_epoch,
        "epochs_run": h.epochs_run,
        "stopped_early": h.stopped_early,
    })
}

fn read_design(path: &Path) -> Result<GcsDesign, Failure> {
    let design: GcsDesign = read_json(path)?;
    design.validate()?;
    Ok(design)
}

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Synth {
            out,
            samples,
            raw_points,
            noise,
        } => {
            let config = SyntheticConfig {
                samples: *samples,
                seed: cli.seed.unwrap_or(0),
                raw_points: *raw_points,
                noise: *noise,
                ..SyntheticConfig::default()
            };
            let data: Dataset = generate(&config, &densities(cli)?, exec(cli))?.into();
            data.save(out)?;
            let value = json!({ "records": data.len(), "material_counts": counts_json(&data.material_counts()), "out": out });
            emit(cli, &value, || {
                format!(
                    "wrote {} synthetic records to {}",
                    data.len(),
                    out.display()
                )
            })
        }
        Command::Ingest {
            manifest,
            out,
            min_count,
        } => {
            let (data, report) = Dataset::ingest(manifest)?;
            data.save(out)?;
            let filtered = data.filter_materials(*min_count);
            let value = json!({
                "accepted": report.accepted,
                "rejected": report.rejected,
                "material_counts": counts_json(&report.material_counts),
                "min_count": min_count,
                "after_filter": { "records": filtered.len(), "material_counts": counts_json(&filtered.material_counts()) },
            });
            emit(cli, &value, || {
                let mut s = format!(
                    "accepted {} records, rejected {}; {} remain with at least {min_count} per material",
                    report.accepted,
                    report.rejected.len(),
                    filtered.len()
                );
                for r in &report.rejected {
                    s.push_str(&format!("\n  {}: {}", r.id, r.reason));
                }
                s
            })
        }
        Command::Filter {
            data,
            out,
            min_count,
        } => {
            let data = load_dataset(data)?;
            let kept = data.filter_materials(*min_count);
            kept.save(out)?;
            let value = json!({
                "before": data.len(),
                "after": kept.len(),
                "material_counts": counts_json(&kept.material_counts()),
            });
            emit(cli, &value, || {
                format!("kept {} of {} records", kept.len(), data.len())
            })
        }
        Command::PcaFit { data, out } => {
            let samples = load_samples(data)?;
            let config = train_config(cli, &TrainArgs::default())?;
            let prepared = prepare(&samples, split(samples.len(), &config.split_spec())?)?;
            let pca: &PcaModel = &prepared.pca;
            std::fs::write(out, pca.to_json()?)
                .map_err(|e| runtime(format!("{}: {e}", out.display())))?;
            let ratios = pca.explained_variance_ratio();
            let value = json!({
                "train_rows": prepared.split.train.len(),
                "eigenvalues": pca.eigenvalues,
                "explained_variance_ratio": ratios,
                "displacement_range": pca.displacement_range,
                "warnings": prepared.warnings,
            });
            emit(cli, &value, || {
                format!(
                    "fitted {} components on {} curves; explained variance {:.4}",
                    ratios.len(),
                    prepared.split.train.len(),
                    ratios.iter().sum::<f64>()
                )
            })
        }
        Command::TrainForward { data, train } => {
            let samples = load_samples(data)?;
            let config = train_config(cli, train)?;
            let prepared = prepare(&samples, split(samples.len(), &config.split_spec())?)?;
            for w in &prepared.warnings {
                log::warn!("{w}");
            }
            let trained =
                train_forward(&prepared.set, &prepared.split, &prepared.weights, &config)?;
            ForwardStage {
                pca: prepared.pca,
                forward: trained.net,
                config,
            }
            .save(&cli.bundle)?;
            let value = json!({ "bundle": cli.bundle, "history": history_json(&trained.history) });
            emit(cli, &value, || {
                format!(
                    "forward network: best validation loss {:.6} at epoch {}; saved to {}",
                    trained.history.best_val_loss,
                    trained.history.best_epoch,
                    cli.bundle.display()
                )
            })
        }
        Command::TrainInverse { data, alpha, train } => {
            let samples = load_samples(data)?;
            let stage = ForwardStage::load(&cli.bundle)?;
            // Same split and basis as the forward network unless overridden.
            let mut config = train_config(cli, train)?;
            if cli.seed.is_none() {
                config.seed = stage.config.seed;
            }
            config.split = stage.config.split;
            let prepared = prepare(&samples, split(samples.len(), &config.split_spec())?)?;
            if prepared.pca != stage.pca {
                return Err(Failure::Validation(
                    "dataset or seed differs from the one the forward network was trained on"
                        .into(),
                ));
            }
            let mut inverse: Vec<(f64, _)> = match Bundle::load(&cli.bundle) {
                Ok(b) if b.forward == stage.forward => b.inverse,
                _ => Vec::new(),
            };
            let mut histories = Vec::new();
            for &a in alpha {
                let cfg = TrainConfig {
                    alpha: a,
                    ..config.clone()
                };
                let trained = train_inverse(
                    &prepared.set,
                    &prepared.split,
                    &stage.forward,
                    &prepared.weights,
                    &cfg,
                )?;
                inverse.retain(|(x, _)| *x != a);
                inverse.push((a, trained.net));
                histories.push(json!({ "alpha": a, "history": history_json(&trained.history) }));
            }
            let bundle = Bundle::new(stage.pca, stage.forward, inverse, stage.config)?;
            bundle.save(&cli.bundle)?;
            let value =
                json!({ "bundle": cli.bundle, "alphas": bundle.alphas(), "trained": histories });
            emit(cli, &value, || {
                format!(
                    "bundle {} now holds alphas {:?}",
                    cli.bundle.display(),
                    bundle.alphas()
                )
            })
        }
        Command::Eval {
            data,
            runs,
            alpha,
            no_knn,
            raw,
            csv,
            train,
        } => {
            let samples = load_samples(data)?;
            let config = EvalConfig {
                train: train_config(cli, train)?,
                runs: *runs,
                inverse_alpha: *alpha,
                knn_baseline: !no_knn,
                comparison: if *raw {
                    Comparison::Raw
                } else {
                    Comparison::Decoded
                },
            };
            let report = repeated_runs(&samples, &config, exec(cli))?;
            let table = report.to_csv()?;
            if let Some(path) = csv {
                std::fs::write(path, &table)
                    .map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            }
            emit(cli, &report, || table.trim_end().to_string())
        }
        Command::SweepAlpha {
            data,
            runs,
            alphas,
            csv,
            train,
        } => {
            let samples = load_samples(data)?;
            let alphas = alphas.clone().unwrap_or_else(|| SWEEP_ALPHAS.to_vec());
            let config = train_config(cli, train)?;
            let report = printability_sweep(
                &samples,
                &config,
                &alphas,
                *runs,
                &densities(cli)?,
                exec(cli),
            )?;
            let table = report.to_csv()?;
            if let Some(path) = csv {
                std::fs::write(path, &table)
                    .map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            }
            emit(cli, &report, || {
                format!("{}monotone in alpha: {}", table, report.monotone)
            })
        }
        Command::Predict { design } => {
            let design = read_design(design)?;
            let bundle = load_bundle(cli)?;
            let p = predict_design(&bundle.forward, &bundle.pca, &design)?;
            let value = json!({
                "performance": p.performance,
                "curve": { "displacements": p.curve.displacements(), "forces": p.curve.forces },
                "metrics": p.metrics,
            });
            emit(cli, &value, || {
                format!(
                    "stiffness {:.4} N/mm, work {:.6} J, max displacement {:.4} mm",
                    p.metrics.stiffness, p.metrics.work, p.metrics.max_displacement
                )
            })
        }
        Command::Invert { curve, alpha } => {
            let raw = RawCurve::load(curve)?;
            let bundle = load_bundle(cli)?;
            let r = tandem(&bundle, *alpha)?.invert(&resample(&raw), &densities(cli)?)?;
            emit(cli, &r, || {
                format!(
                    "{}\nprintable: {}\npredicted work {:.6} J (target {:.6} J)",
                    serde_json::to_string_pretty(&r.design).unwrap_or_default(),
                    r.printability.printable,
                    r.predicted.metrics.work,
                    r.target_metrics.work
                )
            })
        }
        Command::Mesh {
            design,
            stl,
            z_slices,
            phi_samples,
        } => {
            let design = read_design(design)?;
            let mesh = build_mesh(&design, &densities(cli)?, *z_slices, *phi_samples)?;
            let bytes = export_stl(&mesh)?;
            std::fs::write(stl, &bytes).map_err(|e| runtime(format!("{}: {e}", stl.display())))?;
            let value = json!({
                "stl": stl,
                "triangles": mesh.faces.len(),
                "vertices": mesh.vertices.len(),
                "bytes": bytes.len(),
            });
            emit(cli, &value, || {
                format!("wrote {} triangles to {}", mesh.faces.len(), stl.display())
            })
        }
        Command::Printability { design } => {
            let design = read_design(design)?;
            let report = check_printability(&design, &densities(cli)?);
            emit(cli, &report, || {
                format!(
                    "printable: {}\nbase perimeter {:.3} mm (pass: {})\nmin axis distance {:.4} mm (pass: {})",
                    report.printable,
                    report.base_perimeter,
                    report.passes_perimeter,
                    report.min_axis_distance,
                    report.passes_axis
                )
            })
        }
        Command::OptimizeImpact {
            spec,
            alpha,
            candidates,
        } => {
            let spec = match spec {
                Some(path) => ImpactSpec::load(path)?,
                None => ImpactSpec::egg_drop(),
            };
            let bundle = load_bundle(cli)?;
            let mut result = optimize_impact(
                &spec,
                &tandem(&bundle, *alpha)?,
                &densities(cli)?,
                exec(cli),
            )?;
            if !candidates {
                result.candidate_log.clear();
            }
            emit(cli, &result, || {
                format!(
                    "feasible: {}\nabsorbed {:.6} J of {:.6} J, predicted peak {:.3} N (limit {} N)\n{}",
                    result.feasible,
                    result.achieved_energy,
                    spec.target_energy,
                    result.predicted_peak_force,
                    spec.force_threshold,
                    serde_json::to_string_pretty(&result.best_design).unwrap_or_default()
                )
            })
        }
        Command::Emulate { curve, alpha } => {
            let raw = RawCurve::load(curve)?;
            let bundle = load_bundle(cli)?;
            let report = emulate_material(&raw, &tandem(&bundle, *alpha)?, &densities(cli)?)?;
            for w in &report.warnings {
                log::warn!("{w}");
            }
            emit(cli, &report, || {
                format!(
                    "{}\nwork delta {:.6} J, printable: {}",
                    serde_json::to_string_pretty(&report.design).unwrap_or_default(),
                    report.metrics_delta.work,
                    report.printability.printable
                )
            })
        }
        Command::Serve {
            port,
            host,
            cors_origins,
        } => {
            let bundle = load_bundle(cli)?;
            let state = Arc::new(AppState::with_snapshot(ModelSnapshot {
                bundle,
                densities: densities(cli)?,
            }));
            let cors = if cors_origins.is_empty() {
                Cors::Off
            } else if cors_origins.iter().any(|o| o == "*") {
                Cors::AnyOrigin
            } else {
                Cors::Origins(cors_origins.clone())
            };
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| Failure::Validation(format!("bad address {host}:{port}: {e}")))?;
            let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
            rt.block_on(gcs_service::serve(addr, state, cors))
                .map_err(runtime)
        }
    }
}
