//! Exact 1-nearest-neighbour predictors in both directions.
//!
//! Only stored rows are ever returned, so inverse predictions always carry a
//! valid one-hot material block.

use serde::{Deserialize, Serialize};

use crate::error::{GcsError, Result};
use crate::nn::LossWeights;
use crate::parallel::{self, Execution};
use crate::vectorize::{DesignVector, PerformanceVector, DESIGN_DIM, PERFORMANCE_DIM};

/// Distance used in performance space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PerformanceMetric {
    #[default]
    Euclidean,
    /// Entries scaled by the loss weights before the Euclidean distance.
    Weighted { weights: LossWeights },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnIndex {
    design_vectors: Vec<[f64; DESIGN_DIM]>,
    performance_vectors: Vec<[f64; PERFORMANCE_DIM]>,
    sample_ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    /// Row in the index.
    pub row: usize,
    pub sample_id: String,
    /// Squared distance to the query.
    pub distance_sq: f64,
}

fn squared_distance(a: &[f64], b: &[f64], scale: Option<&[f64]>) -> f64 {
    match scale {
        None => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
        Some(w) => a
            .iter()
            .zip(b)
            .zip(w)
            .map(|((x, y), w)| {
                let d = w * (x - y);
                d * d
            })
            .sum(),
    }
}

fn to_array<const N: usize>(row: &[f64]) -> Result<[f64; N]> {
    if row.iter().any(|v| !v.is_finite()) {
        return Err(GcsError::InvalidInput("kNN rows must be finite".into()));
    }
    row.try_into().map_err(|_| GcsError::DimensionMismatch {
        expected: N,
        found: row.len(),
    })
}

impl KnnIndex {
    /// Builds an index; `sample_ids` default to the zero-padded row number.
    pub fn new(
        designs: &[Vec<f64>],
        performances: &[Vec<f64>],
        sample_ids: Option<Vec<String>>,
    ) -> Result<Self> {
        if designs.len() != performances.len() {
            return Err(GcsError::DimensionMismatch {
                expected: designs.len(),
                found: performances.len(),
            });
        }
        let ids =
            sample_ids.unwrap_or_else(|| (0..designs.len()).map(|i| format!("{i:08}")).collect());
        if ids.len() != designs.len() {
            return Err(GcsError::DimensionMismatch {
                expected: designs.len(),
                found: ids.len(),
            });
        }
        Ok(KnnIndex {
            design_vectors: designs.iter().map(|r| to_array(r)).collect::<Result<_>>()?,
            performance_vectors: performances
                .iter()
                .map(|r| to_array(r))
                .collect::<Result<_>>()?,
            sample_ids: ids,
        })
    }

    pub fn len(&self) -> usize {
        self.design_vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.design_vectors.is_empty()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    /// Linear scan. Exact ties go to the smallest sample id, which keeps the
    /// answer independent of insertion order.
    fn nearest<const N: usize>(
        &self,
        rows: &[[f64; N]],
        query: &[f64],
        scale: Option<&[f64]>,
    ) -> Result<Neighbor> {
        if query.len() != N {
            return Err(GcsError::DimensionMismatch {
                expected: N,
                found: query.len(),
            });
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in rows.iter().enumerate() {
            let d = squared_distance(row, query, scale);
            let better = match best {
                None => true,
                Some((j, bd)) => d < bd || (d == bd && self.sample_ids[i] < self.sample_ids[j]),
            };
            if better {
                best = Some((i, d));
            }
        }
        let (row, distance_sq) = best.ok_or(GcsError::Empty("kNN index"))?;
        Ok(Neighbor {
            row,
            sample_id: self.sample_ids[row].clone(),
            distance_sq,
        })
    }

    pub fn nearest_design(&self, design: &[f64]) -> Result<Neighbor> {
        self.nearest(&self.design_vectors, design, None)
    }

    pub fn nearest_performance(
        &self,
        performance: &[f64],
        metric: &PerformanceMetric,
    ) -> Result<Neighbor> {
        match metric {
            PerformanceMetric::Euclidean => {
                self.nearest(&self.performance_vectors, performance, None)
            }
            PerformanceMetric::Weighted { weights } => {
                self.nearest(&self.performance_vectors, performance, Some(&weights.0))
            }
        }
    }

    /// Stored performance of the nearest stored design.
    pub fn knn_forward(&self, design: &DesignVector) -> Result<PerformanceVector> {
        let n = self.nearest_design(&design.0)?;
        Ok(PerformanceVector(self.performance_vectors[n.row]))
    }

    /// Stored design of the nearest stored performance.
    pub fn knn_inverse(&self, performance: &PerformanceVector) -> Result<DesignVector> {
        self.knn_inverse_with(performance, &PerformanceMetric::Euclidean)
    }

    pub fn knn_inverse_with(
        &self,
        performance: &PerformanceVector,
        metric: &PerformanceMetric,
    ) -> Result<DesignVector> {
        let n = self.nearest_performance(&performance.0, metric)?;
        Ok(DesignVector(self.design_vectors[n.row]))
    }

    pub fn knn_forward_batch(
        &self,
        designs: &[DesignVector],
        exec: Execution,
    ) -> Result<Vec<PerformanceVector>> {
        parallel::map(exec, designs, |d| self.knn_forward(d))
            .into_iter()
            .collect()
    }

    pub fn knn_inverse_batch(
        &self,
        performances: &[PerformanceVector],
        metric: &PerformanceMetric,
        exec: Execution,
    ) -> Result<Vec<DesignVector>> {
        parallel::map(exec, performances, |p| self.knn_inverse_with(p, metric))
            .into_iter()
            .collect()
    }
}
