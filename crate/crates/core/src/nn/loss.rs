//! Weighted performance loss and the tandem inverse loss.

use serde::{Deserialize, Serialize};

use crate::error::{GcsError, Result};
use crate::pca::{PcaModel, COMPONENTS};
use crate::vectorize::{DESIGN_DIM, PERFORMANCE_DIM};

use super::mlp::Mlp;

/// Per-entry weights of the performance loss: explained-variance fractions
/// for the PCA coefficients and 1 for the displacement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights(pub [f64; PERFORMANCE_DIM]);

impl LossWeights {
    pub fn from_eigenvalues(eigenvalues: &[f64]) -> Result<Self> {
        if eigenvalues.len() != COMPONENTS {
            return Err(GcsError::DimensionMismatch {
                expected: COMPONENTS,
                found: eigenvalues.len(),
            });
        }
        if eigenvalues.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(GcsError::InvalidInput(
                "eigenvalues must be finite and non-negative".into(),
            ));
        }
        let total: f64 = eigenvalues.iter().sum();
        let mut w = [1.0; PERFORMANCE_DIM];
        for (wj, l) in w.iter_mut().zip(eigenvalues) {
            // all-zero variance: no coefficient is more informative than another
            *wj = if total > 0.0 {
                l / total
            } else {
                1.0 / COMPONENTS as f64
            };
        }
        Ok(LossWeights(w))
    }

    pub fn from_pca(model: &PcaModel) -> Result<Self> {
        Self::from_eigenvalues(&model.eigenvalues)
    }

    pub fn uniform() -> Self {
        Self::from_eigenvalues(&[1.0; COMPONENTS]).expect("valid eigenvalues")
    }
}

/// How the weight vector combines with the per-entry error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Σ_j (w_j Δ_j)²
    #[default]
    Elementwise,
    /// (Σ_j w_j Δ_j)²
    DotProduct,
}

/// Weighted squared error of one sample and its gradient with respect to
/// `pred`.
pub fn weighted_error(
    pred: &[f64],
    target: &[f64],
    w: &LossWeights,
    mode: LossMode,
) -> (f64, Vec<f64>) {
    match mode {
        LossMode::Elementwise => {
            let mut loss = 0.0;
            let grad = pred
                .iter()
                .zip(target)
                .zip(&w.0)
                .map(|((p, t), wj)| {
                    let r = wj * (t - p);
                    loss += r * r;
                    -2.0 * wj * r
                })
                .collect();
            (loss, grad)
        }
        LossMode::DotProduct => {
            let s: f64 = pred
                .iter()
                .zip(target)
                .zip(&w.0)
                .map(|((p, t), wj)| wj * (t - p))
                .sum();
            (s * s, w.0.iter().map(|wj| -2.0 * s * wj).collect())
        }
    }
}

/// Batch-mean forward loss L_F over precomputed predictions.
pub fn loss_forward(
    preds: &[Vec<f64>],
    targets: &[Vec<f64>],
    w: &LossWeights,
    mode: LossMode,
) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(GcsError::DimensionMismatch {
            expected: targets.len(),
            found: preds.len(),
        });
    }
    if preds.is_empty() {
        return Err(GcsError::Empty("batch"));
    }
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        if p.len() != PERFORMANCE_DIM || t.len() != PERFORMANCE_DIM {
            return Err(GcsError::DimensionMismatch {
                expected: PERFORMANCE_DIM,
                found: p.len().min(t.len()),
            });
        }
        total += weighted_error(p, t, w, mode).0;
    }
    Ok(total / preds.len() as f64)
}

/// Components of the inverse loss over a batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseLoss {
    /// Weighted error between targets and F(I(p)).
    pub performance: f64,
    /// Mean squared error between dataset designs and I(p).
    pub design: f64,
    pub alpha: f64,
}

impl InverseLoss {
    pub fn total(&self) -> f64 {
        self.performance + self.alpha * self.design
    }
}

/// Mean over the 17 entries of (d − d̂)² and its gradient with respect to d̂.
pub fn design_error(generated: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = DESIGN_DIM as f64;
    let mut loss = 0.0;
    let grad = generated
        .iter()
        .zip(target)
        .map(|(g, t)| {
            let r = t - g;
            loss += r * r;
            -2.0 * r / n
        })
        .collect();
    (loss / n, grad)
}

/// L_I = L_p + α L_d over a batch of (design, performance) pairs.
pub fn loss_inverse(
    designs: &[Vec<f64>],
    performances: &[Vec<f64>],
    forward: &Mlp,
    inverse: &Mlp,
    w: &LossWeights,
    alpha: f64,
    mode: LossMode,
) -> Result<InverseLoss> {
    if designs.len() != performances.len() {
        return Err(GcsError::DimensionMismatch {
            expected: performances.len(),
            found: designs.len(),
        });
    }
    if designs.is_empty() {
        return Err(GcsError::Empty("batch"));
    }
    let (mut lp, mut ld) = (0.0, 0.0);
    for (d, p) in designs.iter().zip(performances) {
        let generated = inverse.forward(p)?;
        let predicted = forward.forward(&generated)?;
        lp += weighted_error(&predicted, p, w, mode).0;
        ld += design_error(&generated, d).0;
    }
    let n = designs.len() as f64;
    Ok(InverseLoss {
        performance: lp / n,
        design: ld / n,
        alpha,
    })
}
