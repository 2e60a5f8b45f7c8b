//! Ten-component PCA of resampled force vectors.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::curve::{ResampledCurve, GRID_POINTS};
use crate::error::{GcsError, Result};

pub const COMPONENTS: usize = 10;
pub const PCA_FORMAT_VERSION: u32 = 1;

/// Eigenvalues below this fraction of the largest are treated as zero when
/// reporting rank deficiency.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub version: u32,
    /// Column means of the training forces (N).
    pub mean: Vec<f64>,
    /// `COMPONENTS` orthonormal rows of length `GRID_POINTS`.
    pub components: Vec<Vec<f64>>,
    /// Coefficient variances, nonincreasing (N²).
    pub eigenvalues: Vec<f64>,
    /// (min, max) training max displacement in mm.
    pub displacement_range: (f64, f64),
}

/// Result of [`PcaModel::fit`].
#[derive(Clone, Debug)]
pub struct PcaFit {
    pub model: PcaModel,
    pub warnings: Vec<String>,
    /// Largest per-curve L2 reconstruction error over the training rows (N).
    pub max_reconstruction_error: f64,
}

impl PcaModel {
    /// Fits on an `n × 100` force matrix (`n ≥ 11`).
    ///
    /// Components are the leading right singular vectors of the centered
    /// matrix, each oriented so that its largest-magnitude entry is positive.
    pub fn fit(forces: &[Vec<f64>], displacement_range: (f64, f64)) -> Result<PcaFit> {
        let n = forces.len();
        if n < COMPONENTS + 1 {
            return Err(GcsError::TooFewPoints {
                needed: COMPONENTS + 1,
                found: n,
            });
        }
        for row in forces {
            if row.len() != GRID_POINTS {
                return Err(GcsError::DimensionMismatch {
                    expected: GRID_POINTS,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(GcsError::InvalidInput(
                    "force matrix has non-finite entries".into(),
                ));
            }
        }
        let (lo, hi) = displacement_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(GcsError::InvalidInput(format!(
                "bad displacement range ({lo}, {hi})"
            )));
        }

        let mean: Vec<f64> = (0..GRID_POINTS)
            .map(|j| forces.iter().map(|r| r[j]).sum::<f64>() / n as f64)
            .collect();
        let centered = DMatrix::from_fn(n, GRID_POINTS, |i, j| forces[i][j] - mean[j]);

        // For tall matrices the SVD of R from a QR factorization has the same
        // singular values and right singular vectors, at a fraction of the cost.
        let reduced = if n > GRID_POINTS {
            centered.qr().r()
        } else {
            centered
        };
        let svd = reduced.svd(false, true);
        let v_t = svd.v_t.ok_or_else(|| {
            GcsError::Malformed("SVD did not return right singular vectors".into())
        })?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

        let mut components: Vec<Vec<f64>> = order
            .iter()
            .take(COMPONENTS)
            .map(|&k| v_t.row(k).iter().copied().collect())
            .collect();
        let mut singular: Vec<f64> = order
            .iter()
            .take(COMPONENTS)
            .map(|&k| svd.singular_values[k])
            .collect();
        singular.resize(COMPONENTS, 0.0);
        orthonormalize(&mut components);
        for c in components.iter_mut() {
            orient(c);
        }

        let eigenvalues: Vec<f64> = singular.iter().map(|s| s * s / (n - 1) as f64).collect();
        let mut warnings = Vec::new();
        let top = eigenvalues[0];
        let rank = eigenvalues
            .iter()
            .filter(|&&l| top > 0.0 && l > RANK_TOLERANCE * top)
            .count();
        if rank < COMPONENTS {
            warnings.push(format!(
                "force matrix has rank {rank} < {COMPONENTS}; trailing components carry no variance"
            ));
        }

        let model = PcaModel {
            version: PCA_FORMAT_VERSION,
            mean,
            components,
            eigenvalues,
            displacement_range,
        };
        let max_reconstruction_error = forces
            .iter()
            .map(|row| {
                let back = model.reconstruct(&model.project(row));
                row.iter()
                    .zip(&back)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        Ok(PcaFit {
            model,
            warnings,
            max_reconstruction_error,
        })
    }

    /// Fits on resampled curves; the displacement range spans their max
    /// displacements.
    pub fn fit_curves(curves: &[ResampledCurve]) -> Result<PcaFit> {
        let forces: Vec<Vec<f64>> = curves.iter().map(|c| c.forces.clone()).collect();
        let (lo, hi) = curves
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                (lo.min(c.max_displacement), hi.max(c.max_displacement))
            });
        Self::fit(&forces, (lo, hi))
    }

    /// Coefficients `components · (forces − mean)`.
    pub fn project(&self, forces: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(forces.iter().zip(&self.mean))
                    .map(|(ci, (f, m))| ci * (f - m))
                    .sum()
            })
            .collect()
    }

    /// Forces `mean + Σ coefficient_j · component_j`. Negative forces are
    /// left as-is.
    pub fn reconstruct(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, row) in coefficients.iter().zip(&self.components) {
            for (o, r) in out.iter_mut().zip(row) {
                *o += c * r;
            }
        }
        out
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        if total > 0.0 {
            self.eigenvalues.iter().map(|l| l / total).collect()
        } else {
            vec![1.0 / COMPONENTS as f64; COMPONENTS]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != PCA_FORMAT_VERSION {
            return Err(GcsError::VersionMismatch {
                expected: PCA_FORMAT_VERSION,
                found: self.version,
            });
        }
        let dims_ok = self.mean.len() == GRID_POINTS
            && self.components.len() == COMPONENTS
            && self.components.iter().all(|c| c.len() == GRID_POINTS)
            && self.eigenvalues.len() == COMPONENTS;
        if !dims_ok {
            return Err(GcsError::Malformed("PCA model has wrong dimensions".into()));
        }
        let finite = self
            .mean
            .iter()
            .chain(self.components.iter().flatten())
            .chain(&self.eigenvalues)
            .all(|v| v.is_finite());
        if !finite || self.eigenvalues.iter().any(|&l| l < 0.0) {
            return Err(GcsError::Malformed("PCA model has invalid values".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates a serialized model.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| GcsError::Malformed("PCA model has no version".into()))?
            as u32;
        if found != PCA_FORMAT_VERSION {
            return Err(GcsError::VersionMismatch {
                expected: PCA_FORMAT_VERSION,
                found,
            });
        }
        let model: PcaModel = serde_json::from_value(value)?;
        model.validate()?;
        Ok(model)
    }
}

/// Modified Gram-Schmidt, run twice. Rows that vanish (rank-deficient input)
/// are replaced by the first standard basis vector that survives.
fn orthonormalize(rows: &mut Vec<Vec<f64>>) {
    let dim = GRID_POINTS;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(COMPONENTS);
    let mut fallback = 0usize;
    let mut candidates = std::mem::take(rows).into_iter();
    while out.len() < COMPONENTS {
        let mut v = match candidates.next() {
            Some(v) => v,
            None => {
                let mut e = vec![0.0; dim];
                e[fallback % dim] = 1.0;
                fallback += 1;
                e
            }
        };
        let mut accepted = false;
        for _ in 0..2 {
            for u in &out {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= dot * ui;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-8 {
                accepted = false;
                break;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            accepted = true;
        }
        if accepted {
            out.push(v);
        }
    }
    *rows = out;
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
