use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GcsError, Result};
use crate::parallel::{self, Execution};
use crate::vectorize::{DESIGN_DIM, PERFORMANCE_DIM};

/// Output nonlinearity of the last layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Head {
    Linear,
    /// Sigmoid on the first `sigmoid` outputs, softmax over the next `softmax`.
    SoftmaxSigmoid {
        sigmoid: usize,
        softmax: usize,
    },
}

impl Head {
    fn width(self) -> Option<usize> {
        match self {
            Head::Linear => None,
            Head::SoftmaxSigmoid { sigmoid, softmax } => Some(sigmoid + softmax),
        }
    }
}

pub const HIDDEN_WIDTH: usize = 64;
pub const FORWARD_DIMS: [usize; 5] = [
    DESIGN_DIM,
    HIDDEN_WIDTH,
    HIDDEN_WIDTH,
    HIDDEN_WIDTH,
    PERFORMANCE_DIM,
];
pub const INVERSE_DIMS: [usize; 5] = [
    PERFORMANCE_DIM,
    HIDDEN_WIDTH,
    HIDDEN_WIDTH,
    HIDDEN_WIDTH,
    DESIGN_DIM,
];
pub const INVERSE_HEAD: Head = Head::SoftmaxSigmoid {
    sigmoid: DESIGN_DIM - crate::design::Material::COUNT,
    softmax: crate::design::Material::COUNT,
};

/// Trainable parameter count of a dense stack: Σ (n_in + 1) · n_out.
pub fn parameter_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

/// Dense ReLU network with all parameters in one flat buffer.
///
/// Layer `l` occupies `weights (out × in, row-major)` followed by
/// `biases (out)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    head: Head,
    params: Vec<f64>,
}

/// Per-sample values kept for backpropagation.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl Trace {
    /// Which hidden units were active. Gradients are exact only while this
    /// pattern stays fixed.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let hidden = &self.pre[..self.pre.len() - 1];
        hidden.iter().flatten().map(|&z| z > 0.0).collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    /// Zero-initialized network.
    pub fn zeros(dims: &[usize], head: Head) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(GcsError::InvalidInput(format!("bad layer dims {dims:?}")));
        }
        if let Some(w) = head.width() {
            if w != dims[dims.len() - 1] {
                return Err(GcsError::DimensionMismatch {
                    expected: dims[dims.len() - 1],
                    found: w,
                });
            }
        }
        Ok(Mlp {
            dims: dims.to_vec(),
            head,
            params: vec![0.0; parameter_count(dims)],
        })
    }

    /// He-uniform weights `U(±√(6 / fan_in))`, zero biases.
    pub fn random<R: Rng>(dims: &[usize], head: Head, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(dims, head)?;
        for l in 0..net.layer_count() {
            let (w, _) = net.layer_ranges(l);
            let bound = (6.0 / net.dims[l] as f64).sqrt();
            for p in &mut net.params[w] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn forward_network<R: Rng>(rng: &mut R) -> Self {
        Self::random(&FORWARD_DIMS, Head::Linear, rng).expect("static architecture")
    }

    pub fn inverse_network<R: Rng>(rng: &mut R) -> Self {
        Self::random(&INVERSE_DIMS, INVERSE_HEAD, rng).expect("static architecture")
    }

    pub fn from_parts(dims: &[usize], head: Head, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(dims, head)?;
        if params.len() != net.params.len() {
            return Err(GcsError::DimensionMismatch {
                expected: net.params.len(),
                found: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// (weight range, bias range) of layer `l` in the flat buffer.
    pub fn layer_ranges(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let offset: usize = self.dims[..l + 1]
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum();
        let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
        let w_end = offset + n_in * n_out;
        (offset..w_end, w_end..w_end + n_out)
    }

    /// Mask of parameters subject to weight decay (weights, not biases).
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.params.len()];
        for l in 0..self.layer_count() {
            let (w, _) = self.layer_ranges(l);
            mask[w].iter_mut().for_each(|m| *m = true);
        }
        mask
    }

    /// SHA-256 of architecture and parameter bits, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for d in &self.dims {
            hasher.update((*d as u64).to_le_bytes());
        }
        for p in &self.params {
            hasher.update(p.to_bits().to_le_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(input)?.output)
    }

    /// Forward pass over many inputs, results in input order.
    pub fn forward_batch(&self, inputs: &[Vec<f64>], exec: Execution) -> Result<Vec<Vec<f64>>> {
        parallel::map(exec, inputs, |x| self.forward(x))
            .into_iter()
            .collect()
    }

    pub fn trace(&self, input: &[f64]) -> Result<Trace> {
        if input.len() != self.input_dim() {
            return Err(GcsError::DimensionMismatch {
                expected: self.input_dim(),
                found: input.len(),
            });
        }
        let layers = self.layer_count();
        let mut inputs = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers);
        let mut a = input.to_vec();
        for l in 0..layers {
            let (w, b) = self.layer_ranges(l);
            let (weights, biases) = (&self.params[w], &self.params[b]);
            let n_in = self.dims[l];
            let z: Vec<f64> = biases
                .iter()
                .enumerate()
                .map(|(o, bias)| {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    bias + row.iter().zip(&a).map(|(wi, ai)| wi * ai).sum::<f64>()
                })
                .collect();
            let next = if l + 1 < layers {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                self.apply_head(&z)
            };
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok(Trace {
            inputs,
            pre,
            output: a,
        })
    }

    fn apply_head(&self, z: &[f64]) -> Vec<f64> {
        match self.head {
            Head::Linear => z.to_vec(),
            Head::SoftmaxSigmoid { sigmoid: ns, .. } => {
                let mut out: Vec<f64> = z[..ns].iter().map(|&v| sigmoid(v)).collect();
                let block = &z[ns..];
                let max = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = block.iter().map(|v| (v - max).exp()).collect();
                let sum: f64 = exps.iter().sum();
                out.extend(exps.iter().map(|e| e / sum));
                out
            }
        }
    }

    /// Backpropagates `grad_output` (∂loss/∂output) through one traced sample.
    ///
    /// Parameter gradients are added into `grads` unless it is `None` (frozen
    /// network). Returns ∂loss/∂input.
    pub fn backward(
        &self,
        trace: &Trace,
        grad_output: &[f64],
        mut grads: Option<&mut [f64]>,
    ) -> Vec<f64> {
        let layers = self.layer_count();
        let mut delta: Vec<f64> = match self.head {
            Head::Linear => grad_output.to_vec(),
            Head::SoftmaxSigmoid { sigmoid: ns, .. } => {
                let y = &trace.output;
                let mut d: Vec<f64> = (0..ns)
                    .map(|i| grad_output[i] * y[i] * (1.0 - y[i]))
                    .collect();
                let dot: f64 = (ns..y.len()).map(|i| grad_output[i] * y[i]).sum();
                d.extend((ns..y.len()).map(|i| y[i] * (grad_output[i] - dot)));
                d
            }
        };
        for l in (0..layers).rev() {
            let (w, b) = self.layer_ranges(l);
            let n_in = self.dims[l];
            let a = &trace.inputs[l];
            if let Some(g) = grads.as_deref_mut() {
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let row = &mut g[w.start + o * n_in..w.start + (o + 1) * n_in];
                    for (gi, ai) in row.iter_mut().zip(a) {
                        *gi += d * ai;
                    }
                    g[b.start + o] += d;
                }
            }
            let weights = &self.params[w];
            let mut grad_in = vec![0.0; n_in];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &weights[o * n_in..(o + 1) * n_in];
                for (gi, wi) in grad_in.iter_mut().zip(row) {
                    *gi += d * wi;
                }
            }
            if l > 0 {
                for (gi, z) in grad_in.iter_mut().zip(&trace.pre[l - 1]) {
                    if *z <= 0.0 {
                        *gi = 0.0;
                    }
                }
            }
            delta = grad_in;
        }
        delta
    }
}

/// Serialized network document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub version: u32,
    pub architecture: Vec<usize>,
    pub head: Head,
    pub layers: Vec<LayerDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerDocument {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

pub const NETWORK_FORMAT_VERSION: u32 = 1;

impl Mlp {
    pub fn to_document(&self, metadata: Option<serde_json::Value>) -> NetworkDocument {
        let layers = (0..self.layer_count())
            .map(|l| {
                let (w, b) = self.layer_ranges(l);
                LayerDocument {
                    weights: self.params[w].to_vec(),
                    biases: self.params[b].to_vec(),
                }
            })
            .collect();
        NetworkDocument {
            version: NETWORK_FORMAT_VERSION,
            architecture: self.dims.clone(),
            head: self.head,
            layers,
            metadata,
        }
    }

    pub fn from_document(doc: &NetworkDocument) -> Result<Self> {
        if doc.version != NETWORK_FORMAT_VERSION {
            return Err(GcsError::VersionMismatch {
                expected: NETWORK_FORMAT_VERSION,
                found: doc.version,
            });
        }
        let mut net = Self::zeros(&doc.architecture, doc.head)?;
        if doc.layers.len() != net.layer_count() {
            return Err(GcsError::Malformed(format!(
                "network has {} layers, architecture needs {}",
                doc.layers.len(),
                net.layer_count()
            )));
        }
        for (l, layer) in doc.layers.iter().enumerate() {
            let (w, b) = net.layer_ranges(l);
            if layer.weights.len() != w.len() || layer.biases.len() != b.len() {
                return Err(GcsError::Malformed(format!(
                    "layer {l} has wrong parameter count"
                )));
            }
            net.params[w].copy_from_slice(&layer.weights);
            net.params[b].copy_from_slice(&layer.biases);
        }
        if net.params.iter().any(|p| !p.is_finite()) {
            return Err(GcsError::Malformed(
                "network has non-finite parameters".into(),
            ));
        }
        Ok(net)
    }

    pub fn to_json(&self, metadata: Option<serde_json::Value>) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document(metadata))?)
    }

    /// Parses a network document, checking the version before the body.
    pub fn from_json(text: &str) -> Result<(Self, Option<serde_json::Value>)> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| GcsError::Malformed("network has no version".into()))?
            as u32;
        if found != NETWORK_FORMAT_VERSION {
            return Err(GcsError::VersionMismatch {
                expected: NETWORK_FORMAT_VERSION,
                found,
            });
        }
        let doc: NetworkDocument = serde_json::from_value(value)?;
        let net = Self::from_document(&doc)?;
        Ok((net, doc.metadata))
    }
}
