//! Turns design/curve records into network-ready vectors for one split.

use serde::{Deserialize, Serialize};

use crate::curve::ResampledCurve;
use crate::design::GcsDesign;
use crate::error::{GcsError, Result};
use crate::nn::{LearningSet, LossWeights};
use crate::pca::PcaModel;
use crate::split::SplitIndices;
use crate::vectorize::{encode_design, encode_performance};

/// One design with its resampled response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub design: GcsDesign,
    pub curve: ResampledCurve,
}

#[derive(Clone, Debug)]
pub struct Prepared {
    /// Fitted on the training rows only.
    pub pca: PcaModel,
    pub weights: LossWeights,
    /// Encoded vectors for every sample, in input order.
    pub set: LearningSet,
    pub split: SplitIndices,
    pub warnings: Vec<String>,
}

/// Fits PCA on the training rows and encodes every sample.
pub fn prepare(samples: &[Sample], split: SplitIndices) -> Result<Prepared> {
    if samples.is_empty() {
        return Err(GcsError::Empty("dataset"));
    }
    if split
        .train
        .iter()
        .chain(&split.val)
        .chain(&split.test)
        .any(|&i| i >= samples.len())
    {
        return Err(GcsError::InvalidInput("split index out of range".into()));
    }
    let train: Vec<ResampledCurve> = split
        .train
        .iter()
        .map(|&i| samples[i].curve.clone())
        .collect();
    let fit = PcaModel::fit_curves(&train)?;
    let pca = fit.model;
    let mut warnings = fit.warnings;
    let mut set = LearningSet::default();
    let mut clamped = 0;
    for s in samples {
        set.designs.push(encode_design(&s.design)?.0.to_vec());
        let p = encode_performance(&s.curve, &pca);
        clamped += p.displacement_clamped as usize;
        set.performances.push(p.vector.0.to_vec());
    }
    if clamped > 0 {
        warnings.push(format!(
            "{clamped} max displacements fell outside the training range and were clamped"
        ));
    }
    Ok(Prepared {
        weights: LossWeights::from_pca(&pca)?,
        pca,
        set,
        split,
        warnings,
    })
}
