//! Learning-space encodings of designs (17 values) and performances
//! (11 values).
//!
//! Design scalars are min-max normalized with the fixed parameter ranges, so
//! identical designs always encode identically regardless of the dataset.
//! The material becomes a one-hot block in [`Material::ALL`] order.
//! Performances are the ten PCA coefficients in natural scale followed by
//! the max displacement, normalized by the PCA model's training range.

use serde::{Deserialize, Serialize};

use crate::curve::ResampledCurve;
use crate::design::{GcsDesign, Material, PARAMETER_BOUNDS, SCALAR_COUNT};
use crate::error::{GcsError, Result};
use crate::pca::{PcaModel, COMPONENTS};

pub const DESIGN_DIM: usize = SCALAR_COUNT + Material::COUNT;
pub const PERFORMANCE_DIM: usize = COMPONENTS + 1;
/// Index of the first material entry in a design vector.
pub const MATERIAL_OFFSET: usize = SCALAR_COUNT;
/// Index of the displacement entry in a performance vector.
pub const DISPLACEMENT_INDEX: usize = COMPONENTS;

/// Tolerance on the material block sum of generated design vectors.
pub const MATERIAL_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignVector(pub [f64; DESIGN_DIM]);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceVector(pub [f64; PERFORMANCE_DIM]);

impl DesignVector {
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; DESIGN_DIM] =
            values.try_into().map_err(|_| GcsError::DimensionMismatch {
                expected: DESIGN_DIM,
                found: values.len(),
            })?;
        Ok(DesignVector(arr))
    }

    pub fn material_block(&self) -> &[f64] {
        &self.0[MATERIAL_OFFSET..]
    }

    /// Dataset invariant: entries in [0, 1] and an exact one-hot material.
    pub fn is_encoded(&self) -> bool {
        let in_unit = self.0.iter().all(|v| (0.0..=1.0).contains(v));
        let ones = self.material_block().iter().filter(|&&v| v == 1.0).count();
        let zeros = self.material_block().iter().filter(|&&v| v == 0.0).count();
        in_unit && ones == 1 && zeros == Material::COUNT - 1
    }

    /// Generated-vector invariant: entries in [0, 1] and a material block
    /// summing to 1.
    pub fn is_valid_generated(&self) -> bool {
        let in_unit = self.0.iter().all(|v| (0.0..=1.0).contains(v));
        let sum: f64 = self.material_block().iter().sum();
        in_unit && (sum - 1.0).abs() <= MATERIAL_SUM_TOLERANCE
    }
}

impl PerformanceVector {
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; PERFORMANCE_DIM] =
            values.try_into().map_err(|_| GcsError::DimensionMismatch {
                expected: PERFORMANCE_DIM,
                found: values.len(),
            })?;
        Ok(PerformanceVector(arr))
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0[..COMPONENTS]
    }
}

/// Validates `design` and encodes it.
pub fn encode_design(design: &GcsDesign) -> Result<DesignVector> {
    design.validate()?;
    let mut out = [0.0; DESIGN_DIM];
    for (i, (v, b)) in design
        .scalars()
        .iter()
        .zip(PARAMETER_BOUNDS.iter())
        .enumerate()
    {
        out[i] = (v - b.lo) / b.span();
    }
    out[MATERIAL_OFFSET + design.material.index()] = 1.0;
    Ok(DesignVector(out))
}

/// Inverse of [`encode_design`] on clamped entries; the material is the
/// argmax of the block, lowest index on ties.
pub fn decode_design(vector: &DesignVector) -> GcsDesign {
    let mut scalars = [0.0; SCALAR_COUNT];
    for (i, b) in PARAMETER_BOUNDS.iter().enumerate() {
        let x = vector.0[i];
        let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
        scalars[i] = if x == 1.0 { b.hi } else { b.lo + x * b.span() };
    }
    let block = vector.material_block();
    let mut best = 0;
    for (k, v) in block.iter().enumerate() {
        if *v > block[best] {
            best = k;
        }
    }
    GcsDesign::from_scalars(scalars, Material::ALL[best])
}

/// How the displacement entry of a performance vector is scaled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplacementScaling {
    /// Min-max over the PCA model's training range.
    #[default]
    Normalized,
    /// Millimetres, unscaled.
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EncodedPerformance {
    pub vector: PerformanceVector,
    /// The max displacement fell outside the training range and was clamped.
    pub displacement_clamped: bool,
}

pub fn encode_performance(curve: &ResampledCurve, model: &PcaModel) -> EncodedPerformance {
    encode_performance_with(curve, model, DisplacementScaling::Normalized)
}

pub fn encode_performance_with(
    curve: &ResampledCurve,
    model: &PcaModel,
    scaling: DisplacementScaling,
) -> EncodedPerformance {
    let mut out = [0.0; PERFORMANCE_DIM];
    out[..COMPONENTS].copy_from_slice(&model.project(&curve.forces));
    let (displacement, clamped) = match scaling {
        DisplacementScaling::Raw => (curve.max_displacement, false),
        DisplacementScaling::Normalized => {
            let (lo, hi) = model.displacement_range;
            let x = if hi > lo {
                (curve.max_displacement - lo) / (hi - lo)
            } else {
                0.0
            };
            let clamped = x.clamp(0.0, 1.0);
            (clamped, clamped != x)
        }
    };
    out[DISPLACEMENT_INDEX] = displacement;
    EncodedPerformance {
        vector: PerformanceVector(out),
        displacement_clamped: clamped,
    }
}

/// Curve from a performance vector without force clamping.
pub fn decode_performance_unclamped_with(
    vector: &PerformanceVector,
    model: &PcaModel,
    scaling: DisplacementScaling,
) -> ResampledCurve {
    let forces = model.reconstruct(vector.coefficients());
    let raw = vector.0[DISPLACEMENT_INDEX];
    let max_displacement = match scaling {
        DisplacementScaling::Raw => raw,
        DisplacementScaling::Normalized => {
            let (lo, hi) = model.displacement_range;
            let x = if raw.is_nan() {
                0.0
            } else {
                raw.clamp(0.0, 1.0)
            };
            if x == 1.0 {
                hi
            } else {
                lo + x * (hi - lo)
            }
        }
    };
    ResampledCurve {
        forces,
        max_displacement: if max_displacement > 0.0 {
            max_displacement
        } else {
            f64::EPSILON
        },
    }
}

/// Curve for metric reporting: forces clamped at 0 N.
pub fn decode_performance(vector: &PerformanceVector, model: &PcaModel) -> ResampledCurve {
    decode_performance_with(vector, model, DisplacementScaling::Normalized)
}

pub fn decode_performance_with(
    vector: &PerformanceVector,
    model: &PcaModel,
    scaling: DisplacementScaling,
) -> ResampledCurve {
    decode_performance_unclamped_with(vector, model, scaling).clamped_non_negative()
}
