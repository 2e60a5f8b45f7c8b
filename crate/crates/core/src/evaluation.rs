//! Accuracy statistics over repeated random splits.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::curve::{CurveMetrics, ResampledCurve};
use crate::design::DensityTable;
use crate::error::{GcsError, Result};
use crate::geometry::check_printability;
use crate::knn::KnnIndex;
use crate::nn::{train_forward, train_inverse, Mlp, TrainConfig};
use crate::parallel::{self, Execution};
use crate::pca::PcaModel;
use crate::pipeline::{prepare, Sample};
use crate::split::{split, SplitSpec};
use crate::vectorize::{decode_design, decode_performance, DesignVector, PerformanceVector};

/// Curve metrics compared between prediction and truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Stiffness,
    Work,
    MaxDisplacement,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Stiffness, Metric::Work, Metric::MaxDisplacement];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Stiffness => "stiffness",
            Metric::Work => "work",
            Metric::MaxDisplacement => "max_displacement",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Metric::Stiffness => "N/mm",
            Metric::Work => "J",
            Metric::MaxDisplacement => "mm",
        }
    }

    pub fn of(self, m: &CurveMetrics) -> f64 {
        match self {
            Metric::Stiffness => m.stiffness,
            Metric::Work => m.work,
            Metric::MaxDisplacement => m.max_displacement,
        }
    }
}

/// (truth, prediction) pairs per metric.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricPairs {
    pub stiffness: Vec<(f64, f64)>,
    pub work: Vec<(f64, f64)>,
    pub max_displacement: Vec<(f64, f64)>,
}

impl MetricPairs {
    pub fn get(&self, metric: Metric) -> &[(f64, f64)] {
        match metric {
            Metric::Stiffness => &self.stiffness,
            Metric::Work => &self.work,
            Metric::MaxDisplacement => &self.max_displacement,
        }
    }

    pub fn push(&mut self, truth: &CurveMetrics, predicted: &CurveMetrics) {
        self.stiffness.push((truth.stiffness, predicted.stiffness));
        self.work.push((truth.work, predicted.work));
        self.max_displacement
            .push((truth.max_displacement, predicted.max_displacement));
    }

    pub fn len(&self) -> usize {
        self.work.len()
    }

    pub fn is_empty(&self) -> bool {
        self.work.is_empty()
    }
}

/// Decodes both vectors of every pair and compares the curve metrics.
pub fn curve_metric_errors(
    predicted: &[PerformanceVector],
    truth: &[PerformanceVector],
    pca: &PcaModel,
) -> Result<MetricPairs> {
    if predicted.len() != truth.len() {
        return Err(GcsError::DimensionMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    let truth_curves: Vec<ResampledCurve> =
        truth.iter().map(|t| decode_performance(t, pca)).collect();
    curve_metric_errors_against(predicted, &truth_curves, pca)
}

/// Compares decoded predictions against given true curves, e.g. the
/// measured curves rather than their PCA reconstructions.
pub fn curve_metric_errors_against(
    predicted: &[PerformanceVector],
    truth: &[ResampledCurve],
    pca: &PcaModel,
) -> Result<MetricPairs> {
    if predicted.len() != truth.len() {
        return Err(GcsError::DimensionMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    let mut pairs = MetricPairs::default();
    for (p, t) in predicted.iter().zip(truth) {
        pairs.push(
            &CurveMetrics::of(t),
            &CurveMetrics::of(&decode_performance(p, pca)),
        );
    }
    Ok(pairs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaeR2 {
    pub mae: f64,
    /// Absent when the truth has zero variance.
    pub r2: Option<f64>,
}

/// Mean absolute error and coefficient of determination of
/// (truth, prediction) pairs.
pub fn mae_r2(pairs: &[(f64, f64)]) -> Result<MaeR2> {
    if pairs.is_empty() {
        return Err(GcsError::Empty("metric pairs"));
    }
    let n = pairs.len() as f64;
    let mae = pairs.iter().map(|(y, p)| (p - y).abs()).sum::<f64>() / n;
    let mean = pairs.iter().map(|(y, _)| y).sum::<f64>() / n;
    let ss_tot: f64 = pairs.iter().map(|(y, _)| (y - mean).powi(2)).sum();
    let ss_res: f64 = pairs.iter().map(|(y, p)| (p - y).powi(2)).sum();
    let r2 = (pairs.len() >= 2 && ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);
    Ok(MaeR2 { mae, r2 })
}

/// Mean and 95% Student-t half-width `t(0.975, n−1)·s/√n`.
pub fn ci95(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(GcsError::TooFewPoints {
            needed: 2,
            found: n,
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| GcsError::InvalidInput(e.to_string()))?
        .inverse_cdf(0.975);
    Ok((mean, t * var.sqrt() / (n as f64).sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mae_mean: f64,
    pub mae_ci95: f64,
    /// Absent if any run had an undefined R².
    pub r2_mean: Option<f64>,
    pub r2_ci95: Option<f64>,
    pub mae_runs: Vec<f64>,
    pub r2_runs: Vec<Option<f64>>,
}

impl MetricSummary {
    pub fn from_runs(runs: &[MaeR2]) -> Result<Self> {
        let mae_runs: Vec<f64> = runs.iter().map(|r| r.mae).collect();
        let r2_runs: Vec<Option<f64>> = runs.iter().map(|r| r.r2).collect();
        let (mae_mean, mae_ci95) = ci95(&mae_runs)?;
        let r2: Option<Vec<f64>> = r2_runs.iter().copied().collect();
        let (r2_mean, r2_ci95) = match r2 {
            Some(v) => {
                let (m, c) = ci95(&v)?;
                (Some(m), Some(c))
            }
            None => (None, None),
        };
        Ok(MetricSummary {
            mae_mean,
            mae_ci95,
            r2_mean,
            r2_ci95,
            mae_runs,
            r2_runs,
        })
    }
}

/// Per-metric summaries for one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub stiffness: MetricSummary,
    pub work: MetricSummary,
    pub max_displacement: MetricSummary,
}

impl ModelSummary {
    fn from_runs(runs: &[MetricPairs]) -> Result<Self> {
        let summarize = |m: Metric| -> Result<MetricSummary> {
            let per_run = runs
                .iter()
                .map(|r| mae_r2(r.get(m)))
                .collect::<Result<Vec<_>>>()?;
            MetricSummary::from_runs(&per_run)
        };
        Ok(ModelSummary {
            stiffness: summarize(Metric::Stiffness)?,
            work: summarize(Metric::Work)?,
            max_displacement: summarize(Metric::MaxDisplacement)?,
        })
    }

    pub fn get(&self, metric: Metric) -> &MetricSummary {
        match metric {
            Metric::Stiffness => &self.stiffness,
            Metric::Work => &self.work,
            Metric::MaxDisplacement => &self.max_displacement,
        }
    }
}

/// What the predicted curves are compared against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// PCA reconstructions of the true performance vectors.
    #[default]
    Decoded,
    /// The resampled measured curves.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub train: TrainConfig,
    pub runs: usize,
    /// Also train an inverse net at this α and score F(I(p)) against p.
    pub inverse_alpha: Option<f64>,
    pub knn_baseline: bool,
    pub comparison: Comparison,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            train: TrainConfig::default(),
            runs: 10,
            inverse_alpha: None,
            knn_baseline: true,
            comparison: Comparison::Decoded,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub forward: ModelSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knn_forward: Option<ModelSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<ModelSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knn_inverse: Option<ModelSummary>,
}

impl MetricReport {
    /// One row per (model, metric).
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "model", "metric", "unit", "mae_mean", "mae_ci95", "r2_mean", "r2_ci95", "runs",
        ])?;
        let models = [
            ("tnn_forward", Some(&self.forward)),
            ("knn_forward", self.knn_forward.as_ref()),
            ("tnn_inverse", self.inverse.as_ref()),
            ("knn_inverse", self.knn_inverse.as_ref()),
        ];
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (name, summary) in models {
            let Some(summary) = summary else { continue };
            for m in Metric::ALL {
                let s = summary.get(m);
                w.write_record([
                    name.to_string(),
                    m.name().to_string(),
                    m.unit().to_string(),
                    s.mae_mean.to_string(),
                    s.mae_ci95.to_string(),
                    opt(s.r2_mean),
                    opt(s.r2_ci95),
                    self.runs.to_string(),
                ])?;
            }
        }
        String::from_utf8(
            w.into_inner()
                .map_err(|e| GcsError::Malformed(e.to_string()))?,
        )
        .map_err(|e| GcsError::Malformed(e.to_string()))
    }
}

#[derive(Default)]
struct RunPairs {
    forward: MetricPairs,
    knn_forward: Option<MetricPairs>,
    inverse: Option<MetricPairs>,
    knn_inverse: Option<MetricPairs>,
}

fn perf_rows(rows: &[Vec<f64>]) -> Result<Vec<PerformanceVector>> {
    rows.iter()
        .map(|r| PerformanceVector::from_slice(r))
        .collect()
}

fn single_run(samples: &[Sample], config: &EvalConfig, seed: u64) -> Result<RunPairs> {
    let train_config = TrainConfig {
        seed,
        ..config.train.clone()
    };
    let indices = split(
        samples.len(),
        &SplitSpec {
            seed,
            percents: train_config.split,
        },
    )?;
    let prepared = prepare(samples, indices)?;
    let (set, pca, s) = (&prepared.set, &prepared.pca, &prepared.split);
    if s.test.is_empty() {
        return Err(GcsError::Empty("test split"));
    }
    let forward = train_forward(set, s, &prepared.weights, &train_config)?.net;
    let (test_d, test_p) = set.rows(&s.test);
    let truth = perf_rows(&test_p)?;
    let raw_truth: Vec<ResampledCurve> = s.test.iter().map(|&i| samples[i].curve.clone()).collect();
    let score = |pred: &[PerformanceVector]| match config.comparison {
        Comparison::Decoded => curve_metric_errors(pred, &truth, pca),
        Comparison::Raw => curve_metric_errors_against(pred, &raw_truth, pca),
    };

    let predict = |net: &Mlp, d: &[f64]| -> Result<PerformanceVector> {
        PerformanceVector::from_slice(&net.forward(d)?)
    };
    let fwd_pred = test_d
        .iter()
        .map(|d| predict(&forward, d))
        .collect::<Result<Vec<_>>>()?;
    let mut out = RunPairs {
        forward: score(&fwd_pred)?,
        ..RunPairs::default()
    };

    let index = if config.knn_baseline {
        let (train_d, train_p) = set.rows(&s.train);
        let ids = s.train.iter().map(|&i| samples[i].id.clone()).collect();
        Some(KnnIndex::new(&train_d, &train_p, Some(ids))?)
    } else {
        None
    };
    if let Some(index) = &index {
        let pred = test_d
            .iter()
            .map(|d| index.knn_forward(&DesignVector::from_slice(d)?))
            .collect::<Result<Vec<_>>>()?;
        out.knn_forward = Some(score(&pred)?);
    }

    if let Some(alpha) = config.inverse_alpha {
        let cfg = TrainConfig {
            alpha,
            ..train_config
        };
        let inverse = train_inverse(set, s, &forward, &prepared.weights, &cfg)?.net;
        let pred = test_p
            .iter()
            .map(|p| predict(&forward, &inverse.forward(p)?))
            .collect::<Result<Vec<_>>>()?;
        out.inverse = Some(score(&pred)?);
        if let Some(index) = &index {
            // a kNN-retrieved design is judged by the same forward model
            let pred = test_p
                .iter()
                .map(|p| {
                    predict(
                        &forward,
                        &index.knn_inverse(&PerformanceVector::from_slice(p)?)?.0,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            out.knn_inverse = Some(score(&pred)?);
        }
    }
    Ok(out)
}

/// Trains and scores `config.runs` independent runs with seeds
/// `seed, seed + 1, ...`, each with its own split and PCA fit.
pub fn repeated_runs(
    samples: &[Sample],
    config: &EvalConfig,
    exec: Execution,
) -> Result<MetricReport> {
    if config.runs < 2 {
        return Err(GcsError::InvalidInput(format!(
            "need at least 2 runs, got {}",
            config.runs
        )));
    }
    config.train.validate()?;
    let seeds: Vec<u64> = (0..config.runs as u64)
        .map(|r| config.train.seed.wrapping_add(r))
        .collect();
    let runs = parallel::map(exec, &seeds, |&seed| single_run(samples, config, seed))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let collect = |f: fn(&RunPairs) -> Option<&MetricPairs>| -> Result<Option<ModelSummary>> {
        let per_run: Option<Vec<MetricPairs>> = runs.iter().map(|r| f(r).cloned()).collect();
        per_run.map(|v| ModelSummary::from_runs(&v)).transpose()
    };
    Ok(MetricReport {
        runs: config.runs,
        forward: ModelSummary::from_runs(
            &runs.iter().map(|r| r.forward.clone()).collect::<Vec<_>>(),
        )?,
        knn_forward: collect(|r| r.knn_forward.as_ref())?,
        inverse: collect(|r| r.inverse.as_ref())?,
        knn_inverse: collect(|r| r.knn_inverse.as_ref())?,
        seeds,
    })
}

/// Share of generated designs that pass the printability checks.
pub fn printable_fraction(
    designs: &[DesignVector],
    densities: &DensityTable,
    exec: Execution,
) -> f64 {
    if designs.is_empty() {
        return 0.0;
    }
    let ok = parallel::map(exec, designs, |d| {
        check_printability(&decode_design(d), densities).printable
    });
    ok.iter().filter(|&&b| b).count() as f64 / designs.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    /// Percent of test-set generated designs that are printable.
    pub rate_mean: f64,
    pub rate_ci95: f64,
    pub rate_runs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    /// Printable percentage of the test-set designs themselves, per run.
    pub dataset_rate_runs: Vec<f64>,
    /// Mean rate never decreases as α grows. Reported, not enforced.
    pub monotone: bool,
}

impl SweepReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["alpha", "printable_pct_mean", "printable_pct_ci95", "runs"])?;
        for p in &self.points {
            w.write_record([
                p.alpha.to_string(),
                p.rate_mean.to_string(),
                p.rate_ci95.to_string(),
                p.rate_runs.len().to_string(),
            ])?;
        }
        String::from_utf8(
            w.into_inner()
                .map_err(|e| GcsError::Malformed(e.to_string()))?,
        )
        .map_err(|e| GcsError::Malformed(e.to_string()))
    }
}

pub const SWEEP_ALPHAS: [f64; 4] = [0.0, 0.01, 0.1, 1.0];

/// Printability rate of inverse-generated test designs for each α.
pub fn printability_sweep(
    samples: &[Sample],
    train: &TrainConfig,
    alphas: &[f64],
    runs: usize,
    densities: &DensityTable,
    exec: Execution,
) -> Result<SweepReport> {
    if runs < 2 {
        return Err(GcsError::InvalidInput(format!(
            "need at least 2 runs, got {runs}"
        )));
    }
    if alphas.is_empty() {
        return Err(GcsError::Empty("alpha list"));
    }
    train.validate()?;
    let seeds: Vec<u64> = (0..runs as u64)
        .map(|r| train.seed.wrapping_add(r))
        .collect();
    let per_run = parallel::map(exec, &seeds, |&seed| -> Result<(Vec<f64>, f64)> {
        let cfg = TrainConfig {
            seed,
            ..train.clone()
        };
        let prepared = prepare(
            samples,
            split(
                samples.len(),
                &SplitSpec {
                    seed,
                    percents: cfg.split,
                },
            )?,
        )?;
        let (set, s) = (&prepared.set, &prepared.split);
        let forward = train_forward(set, s, &prepared.weights, &cfg)?.net;
        let (test_d, test_p) = set.rows(&s.test);
        let dataset_rate = 100.0
            * printable_fraction(
                &test_d
                    .iter()
                    .map(|d| DesignVector::from_slice(d))
                    .collect::<Result<Vec<_>>>()?,
                densities,
                Execution::Sequential,
            );
        let mut rates = Vec::with_capacity(alphas.len());
        for &alpha in alphas {
            let inverse = train_inverse(
                set,
                s,
                &forward,
                &prepared.weights,
                &TrainConfig {
                    alpha,
                    ..cfg.clone()
                },
            )?
            .net;
            let generated = test_p
                .iter()
                .map(|p| DesignVector::from_slice(&inverse.forward(p)?))
                .collect::<Result<Vec<_>>>()?;
            rates.push(100.0 * printable_fraction(&generated, densities, Execution::Sequential));
        }
        Ok((rates, dataset_rate))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut points = Vec::with_capacity(alphas.len());
    for (k, &alpha) in alphas.iter().enumerate() {
        let rate_runs: Vec<f64> = per_run.iter().map(|(r, _)| r[k]).collect();
        let (rate_mean, rate_ci95) = ci95(&rate_runs)?;
        points.push(SweepPoint {
            alpha,
            rate_mean,
            rate_ci95,
            rate_runs,
        });
    }
    let mut order: Vec<&SweepPoint> = points.iter().collect();
    order.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let monotone = order.windows(2).all(|w| w[1].rate_mean >= w[0].rate_mean);
    Ok(SweepReport {
        points,
        dataset_rate_runs: per_run.iter().map(|(_, d)| *d).collect(),
        monotone,
    })
}
