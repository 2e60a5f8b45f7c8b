//! Forward and inverse prediction with trained networks, shared by the
//! applications, the CLI and the HTTP service.

use serde::{Deserialize, Serialize};

use crate::curve::{CurveMetrics, ResampledCurve};
use crate::design::{DensityTable, GcsDesign};
use crate::error::{GcsError, Result};
use crate::geometry::{check_printability, PrintabilityReport};
use crate::nn::{Head, Mlp, FORWARD_DIMS, INVERSE_DIMS, INVERSE_HEAD};
use crate::pca::PcaModel;
use crate::vectorize::{
    decode_design, decode_performance, encode_design, encode_performance, DesignVector,
    PerformanceVector,
};

/// Trained networks plus the PCA basis their performance space refers to.
#[derive(Clone, Copy, Debug)]
pub struct Tandem<'a> {
    pub pca: &'a PcaModel,
    pub forward: &'a Mlp,
    pub inverse: &'a Mlp,
}

impl<'a> Tandem<'a> {
    pub fn new(pca: &'a PcaModel, forward: &'a Mlp, inverse: &'a Mlp) -> Result<Self> {
        check_forward(forward)?;
        if inverse.dims() != INVERSE_DIMS || inverse.head() != INVERSE_HEAD {
            return Err(GcsError::InvalidInput(format!(
                "inverse network has architecture {:?}, expected {:?}",
                inverse.dims(),
                INVERSE_DIMS
            )));
        }
        Ok(Tandem {
            pca,
            forward,
            inverse,
        })
    }

    pub fn invert(
        &self,
        target: &ResampledCurve,
        densities: &DensityTable,
    ) -> Result<InversePrediction> {
        invert_curve(self.inverse, self.forward, self.pca, target, densities)
    }
}

fn check_forward(forward: &Mlp) -> Result<()> {
    if forward.dims() != FORWARD_DIMS || forward.head() != Head::Linear {
        return Err(GcsError::InvalidInput(format!(
            "forward network has architecture {:?}, expected {:?}",
            forward.dims(),
            FORWARD_DIMS
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardPrediction {
    pub performance: PerformanceVector,
    /// Decoded curve with forces clamped at 0 N.
    pub curve: ResampledCurve,
    pub metrics: CurveMetrics,
}

/// Predicted response of an encoded design vector.
pub fn predict_vector(
    forward: &Mlp,
    pca: &PcaModel,
    design: &DesignVector,
) -> Result<ForwardPrediction> {
    let performance = PerformanceVector::from_slice(&forward.forward(&design.0)?)?;
    let curve = decode_performance(&performance, pca);
    Ok(ForwardPrediction {
        performance,
        metrics: CurveMetrics::of(&curve),
        curve,
    })
}

/// Predicted response of a design; the design must lie within its ranges.
pub fn predict_design(
    forward: &Mlp,
    pca: &PcaModel,
    design: &GcsDesign,
) -> Result<ForwardPrediction> {
    check_forward(forward)?;
    predict_vector(forward, pca, &encode_design(design)?)
}

/// Predicted minus target metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub stiffness: f64,
    pub work: f64,
    pub max_displacement: f64,
}

impl MetricDelta {
    pub fn between(target: &CurveMetrics, predicted: &CurveMetrics) -> Self {
        MetricDelta {
            stiffness: predicted.stiffness - target.stiffness,
            work: predicted.work - target.work,
            max_displacement: predicted.max_displacement - target.max_displacement,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversePrediction {
    pub target_performance: PerformanceVector,
    /// The target's max displacement lay outside the PCA range.
    pub displacement_clamped: bool,
    /// Raw inverse-network output.
    pub generated: DesignVector,
    /// `generated` decoded: clamped scalars, argmax material.
    pub design: GcsDesign,
    /// Forward prediction for `design` as it would be printed.
    pub predicted: ForwardPrediction,
    pub target_metrics: CurveMetrics,
    pub metrics_delta: MetricDelta,
    pub printability: PrintabilityReport,
}

/// Generates a design for a target curve and predicts how it behaves.
pub fn invert_curve(
    inverse: &Mlp,
    forward: &Mlp,
    pca: &PcaModel,
    target: &ResampledCurve,
    densities: &DensityTable,
) -> Result<InversePrediction> {
    let encoded = encode_performance(target, pca);
    let generated = DesignVector::from_slice(&inverse.forward(&encoded.vector.0)?)?;
    let design = decode_design(&generated);
    let predicted = predict_vector(forward, pca, &encode_design(&design)?)?;
    let target_metrics = CurveMetrics::of(target);
    Ok(InversePrediction {
        target_performance: encoded.vector,
        displacement_clamped: encoded.displacement_clamped,
        generated,
        metrics_delta: MetricDelta::between(&target_metrics, &predicted.metrics),
        printability: check_printability(&design, densities),
        design,
        predicted,
        target_metrics,
    })
}
