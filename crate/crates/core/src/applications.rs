//! Impact-absorber search and material emulation on top of trained models.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curve::{
    energy_before_threshold, grid_displacement, resample, CurveMetrics, RawCurve, ResampledCurve,
    GRID_POINTS,
};
use crate::design::{DensityTable, GcsDesign};
use crate::error::{GcsError, Result};
use crate::geometry::PrintabilityReport;
use crate::inference::{invert_curve, MetricDelta, Tandem};
use crate::parallel::{self, Execution};

/// Target curve: linear ramp at `ramp_k` up to `plateau_f`, then flat to
/// `d_max`, sampled on the canonical grid.
pub fn make_target_curve(ramp_k: f64, plateau_f: f64, d_max: f64) -> Result<ResampledCurve> {
    if !(ramp_k.is_finite() && ramp_k > 0.0) {
        return Err(GcsError::InvalidInput(format!(
            "ramp stiffness {ramp_k} must be positive"
        )));
    }
    if !(plateau_f.is_finite() && plateau_f >= 0.0) {
        return Err(GcsError::InvalidInput(format!(
            "plateau force {plateau_f} must be non-negative"
        )));
    }
    if !(d_max.is_finite() && d_max > 0.0) {
        return Err(GcsError::InvalidInput(format!(
            "max displacement {d_max} must be positive"
        )));
    }
    let forces = (0..GRID_POINTS)
        .map(|i| (ramp_k * grid_displacement(d_max, i)).min(plateau_f))
        .collect();
    ResampledCurve::new(forces, d_max)
}

/// Energy-absorption requirement and the family of plateau curves searched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpactSpec {
    /// Largest force the protected object tolerates (N).
    pub force_threshold: f64,
    /// Energy to absorb before that force is reached (J).
    pub target_energy: f64,
    /// Ramp stiffnesses to try (N/mm).
    pub ramp_stiffness: Vec<f64>,
    /// Plateau forces as fractions of `safety_margin · force_threshold`.
    pub plateau_fraction: Vec<f64>,
    /// Max displacements to try (mm); when absent, six values spanning the
    /// PCA displacement range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_displacement: Option<Vec<f64>>,
    pub safety_margin: f64,
}

const DEFAULT_DISPLACEMENT_STEPS: usize = 6;

impl ImpactSpec {
    /// Egg drop: 10 N and 0.0735 J.
    pub fn egg_drop() -> Self {
        ImpactSpec {
            force_threshold: 10.0,
            target_energy: 0.0735,
            ramp_stiffness: vec![2.0, 5.0, 10.0, 20.0, 50.0],
            plateau_fraction: vec![0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            max_displacement: None,
            safety_margin: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.force_threshold)
            || !(self.target_energy.is_finite() && self.target_energy >= 0.0)
        {
            return Err(GcsError::InvalidInput(
                "force threshold must be positive and target energy non-negative".into(),
            ));
        }
        if !(positive(self.safety_margin) && self.safety_margin <= 1.0) {
            return Err(GcsError::InvalidInput(format!(
                "safety margin {} must lie in (0, 1]",
                self.safety_margin
            )));
        }
        if self.ramp_stiffness.is_empty() || self.plateau_fraction.is_empty() {
            return Err(GcsError::Empty("impact search grid"));
        }
        if self.ramp_stiffness.iter().any(|&k| !positive(k))
            || self
                .plateau_fraction
                .iter()
                .any(|&f| !(f.is_finite() && (0.0..=1.0).contains(&f)))
        {
            return Err(GcsError::InvalidInput(
                "ramp stiffnesses must be positive and plateau fractions in [0, 1]".into(),
            ));
        }
        if let Some(d) = &self.max_displacement {
            if d.is_empty() || d.iter().any(|&x| !positive(x)) {
                return Err(GcsError::InvalidInput(
                    "max displacements must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GcsError::io(path, e))?;
        let spec: ImpactSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    fn displacements(&self, range: (f64, f64)) -> Vec<f64> {
        match &self.max_displacement {
            Some(d) => d.clone(),
            None => {
                let (lo, hi) = range;
                (0..DEFAULT_DISPLACEMENT_STEPS)
                    .map(|i| lo + (hi - lo) * i as f64 / (DEFAULT_DISPLACEMENT_STEPS - 1) as f64)
                    .filter(|&d| d > 0.0)
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Position in the (ramp, plateau, displacement) grid, row-major.
    pub index: usize,
    pub ramp_stiffness: f64,
    pub plateau_force: f64,
    pub max_displacement: f64,
    pub design: GcsDesign,
    pub predicted_peak_force: f64,
    /// Energy before the threshold on the predicted curve (J).
    pub energy: f64,
    /// target_energy − energy; negative means the target is exceeded.
    pub score: f64,
    pub printable: bool,
    pub feasible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpactResult {
    /// A candidate met both the peak-force and printability constraints.
    pub feasible: bool,
    pub best_index: usize,
    pub best_design: GcsDesign,
    pub achieved_energy: f64,
    pub predicted_peak_force: f64,
    pub score: f64,
    /// max(0, target − achieved).
    pub deficit: f64,
    pub printable: bool,
    pub candidate_log: Vec<Candidate>,
}

/// Grid search over plateau-shaped targets; every candidate is inverted,
/// decoded, and judged by the forward model's prediction.
///
/// Returns the feasible candidate with the lowest score (ties to the lower
/// grid index); without one, the lowest-score candidate flagged infeasible.
pub fn optimize_impact(
    spec: &ImpactSpec,
    models: &Tandem,
    densities: &DensityTable,
    exec: Execution,
) -> Result<ImpactResult> {
    spec.validate()?;
    let cap = spec.safety_margin * spec.force_threshold;
    let displacements = spec.displacements(models.pca.displacement_range);
    if displacements.is_empty() {
        return Err(GcsError::Empty("max displacement grid"));
    }
    let mut grid = Vec::new();
    for &k in &spec.ramp_stiffness {
        for &f in &spec.plateau_fraction {
            for &d in &displacements {
                grid.push((k, f * cap, d));
            }
        }
    }
    let candidates = parallel::map_range(exec, grid.len(), |index| -> Result<Candidate> {
        let (k, plateau, d) = grid[index];
        let target = make_target_curve(k, plateau, d)?;
        let inv = invert_curve(
            models.inverse,
            models.forward,
            models.pca,
            &target,
            densities,
        )?;
        let curve = &inv.predicted.curve;
        let peak = curve.peak_force();
        let energy = energy_before_threshold(curve, spec.force_threshold);
        let printable = inv.printability.printable;
        Ok(Candidate {
            index,
            ramp_stiffness: k,
            plateau_force: plateau,
            max_displacement: d,
            design: inv.design,
            predicted_peak_force: peak,
            energy,
            score: spec.target_energy - energy,
            printable,
            feasible: printable && peak <= spec.force_threshold,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let pick = |feasible_only: bool| {
        candidates
            .iter()
            .filter(|c| !feasible_only || c.feasible)
            .min_by(|a, b| a.score.total_cmp(&b.score).then(a.index.cmp(&b.index)))
    };
    let (best, feasible) = match pick(true) {
        Some(c) => (c, true),
        None => (
            pick(false).ok_or(GcsError::Empty("impact search grid"))?,
            false,
        ),
    };
    Ok(ImpactResult {
        feasible,
        best_index: best.index,
        best_design: best.design.clone(),
        achieved_energy: best.energy,
        predicted_peak_force: best.predicted_peak_force,
        score: best.score,
        deficit: best.score.max(0.0),
        printable: best.printable,
        candidate_log: candidates.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmulationReport {
    pub design: GcsDesign,
    pub target_curve: ResampledCurve,
    pub predicted_curve: ResampledCurve,
    pub target_metrics: CurveMetrics,
    pub predicted_metrics: CurveMetrics,
    /// Predicted minus target.
    pub metrics_delta: MetricDelta,
    pub printability: PrintabilityReport,
    pub warnings: Vec<String>,
}

/// Finds a shell whose predicted response mimics a measured curve.
pub fn emulate_material(
    measured: &RawCurve,
    models: &Tandem,
    densities: &DensityTable,
) -> Result<EmulationReport> {
    let target = resample(measured);
    let inv = models.invert(&target, densities)?;
    let mut warnings = Vec::new();
    if inv.displacement_clamped {
        let (lo, hi) = models.pca.displacement_range;
        warnings.push(format!(
            "target max displacement {} mm lies outside the trained range [{lo}, {hi}] mm and was clamped",
            target.max_displacement
        ));
    }
    if inv.target_metrics.work == 0.0 {
        warnings.push("degenerate target: the curve absorbs no work".into());
    }
    if !inv.printability.printable {
        warnings.push("generated design fails the printability checks".into());
    }
    Ok(EmulationReport {
        design: inv.design,
        target_curve: target,
        predicted_curve: inv.predicted.curve,
        target_metrics: inv.target_metrics,
        predicted_metrics: inv.predicted.metrics,
        metrics_delta: inv.metrics_delta,
        printability: inv.printability,
        warnings,
    })
}
