//! A smooth, closed-form stand-in for measured compression curves.
//!
//! Used for tests, benchmarks and desk-scale runs when no measured dataset
//! is available. The map is invented; only its qualitative shape follows
//! compression tests of thin shells: a stiff initial rise that saturates at
//! a yield plateau, optional post-yield softening for rigid filaments, and
//! densification near full compression.
//!
//! For a design with material modulus factor `E` and softening `s`:
//!
//! ```text
//! L = (c4_base + c4_top) / 2.4                       lobing, 0..1
//! Q = (c8_base² + c8_top²) / 2                       secondary lobing, 0..1
//! T = linear_twist / 2π + osc_twist_amplitude / 2π   twist, 0..1.5
//! P = 9 E (mass/3) √(thickness/0.7) √(20/height) (1 − 0.35 L)(1 + 0.15 T)(1 − 0.1 Q)
//! k = P (2.5 + 1.5 (1 − L)) / (0.1 height)
//! d_max = height (0.5 + 0.1 (1 − L) + 0.05 T)
//! f(x) = P tanh(k x / P)(1 − s u) + P (0.6 + 0.9 L) u⁵,  u = x / d_max
//! ```
//!
//! `perimeter_ratio` and `osc_twist_cycles` are deliberately absent so that
//! several designs share one response.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{resample, RawCurve, ResampledCurve};
use crate::design::{DensityTable, GcsDesign, Material, PARAMETER_BOUNDS, SCALAR_COUNT};
use crate::error::{GcsError, Result};
use crate::geometry::check_printability;
use crate::parallel::{self, Execution};

/// Relative stiffness of each filament in the ground truth.
pub fn modulus_factor(material: Material) -> f64 {
    match material {
        Material::Petg => 1.0,
        Material::Pla => 1.15,
        Material::TpeChinchilla75A => 0.06,
        Material::TpuCheetah95A => 0.30,
        Material::TpuNinjaFlex85A => 0.14,
        Material::TpuArmadillo75D => 0.55,
    }
}

/// Fractional force drop from yield to full compression.
pub fn softening(material: Material) -> f64 {
    match material {
        Material::Pla => 0.35,
        Material::Petg => 0.30,
        Material::TpuArmadillo75D => 0.15,
        Material::TpuCheetah95A => 0.05,
        Material::TpeChinchilla75A | Material::TpuNinjaFlex85A => 0.0,
    }
}

/// Closed-form response parameters of one design.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    /// Plateau force (N).
    pub plateau: f64,
    /// Initial stiffness (N/mm).
    pub stiffness: f64,
    /// Compression at the end of the test (mm).
    pub max_displacement: f64,
    pub softening: f64,
    /// Densification force at full compression, as a multiple of `plateau`.
    pub densification: f64,
}

impl Response {
    pub fn of(design: &GcsDesign) -> Self {
        let lobing = (design.c4_base + design.c4_top) / 2.4;
        let secondary = (design.c8_base.powi(2) + design.c8_top.powi(2)) / 2.0;
        let twist = (design.linear_twist + design.osc_twist_amplitude) / std::f64::consts::TAU;
        let plateau = 9.0
            * modulus_factor(design.material)
            * (design.mass / 3.0)
            * (design.thickness / 0.7).sqrt()
            * (20.0 / design.height).sqrt()
            * (1.0 - 0.35 * lobing)
            * (1.0 + 0.15 * twist)
            * (1.0 - 0.1 * secondary);
        Response {
            plateau,
            stiffness: plateau * (2.5 + 1.5 * (1.0 - lobing)) / (0.1 * design.height),
            max_displacement: design.height * (0.5 + 0.1 * (1.0 - lobing) + 0.05 * twist),
            softening: softening(design.material),
            densification: 0.6 + 0.9 * lobing,
        }
    }

    /// Force (N) at compression `x` (mm).
    pub fn force(&self, x: f64) -> f64 {
        let u = x / self.max_displacement;
        self.plateau * (self.stiffness * x / self.plateau).tanh() * (1.0 - self.softening * u)
            + self.plateau * self.densification * u.powi(5)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub samples: usize,
    pub seed: u64,
    /// Uniformly spaced raw samples per curve, including both ends.
    pub raw_points: usize,
    /// Relative force noise amplitude; each sample is scaled by 1 + noise·U(−1, 1).
    pub noise: f64,
    /// Materials drawn uniformly; empty means all six.
    pub materials: Vec<Material>,
    /// Keep only designs that pass the printability checks.
    pub printable_only: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            samples: 2000,
            seed: 0,
            raw_points: 160,
            noise: 0.0,
            materials: Vec::new(),
            printable_only: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSample {
    pub id: String,
    pub design: GcsDesign,
    pub curve: RawCurve,
}

impl SyntheticSample {
    pub fn resampled(&self) -> ResampledCurve {
        resample(&self.curve)
    }
}

/// Design drawn uniformly from the parameter box.
pub fn random_design(rng: &mut impl Rng, materials: &[Material]) -> GcsDesign {
    let mut scalars = [0.0; SCALAR_COUNT];
    for (v, b) in scalars.iter_mut().zip(PARAMETER_BOUNDS.iter()) {
        *v = rng.random_range(b.lo..=b.hi);
    }
    let pool = if materials.is_empty() {
        &Material::ALL[..]
    } else {
        materials
    };
    GcsDesign::from_scalars(scalars, pool[rng.random_range(0..pool.len())])
}

/// Noise-free ground-truth curve on `points` uniform samples.
pub fn ground_truth_curve(design: &GcsDesign, points: usize) -> Result<RawCurve> {
    noisy_curve(design, points, 0.0, &mut ChaCha8Rng::seed_from_u64(0))
}

fn noisy_curve(
    design: &GcsDesign,
    points: usize,
    noise: f64,
    rng: &mut impl Rng,
) -> Result<RawCurve> {
    if points < 2 {
        return Err(GcsError::TooFewPoints {
            needed: 2,
            found: points,
        });
    }
    let response = Response::of(design);
    let samples = (0..points)
        .map(|i| {
            let x = response.max_displacement * i as f64 / (points - 1) as f64;
            let scale = if noise > 0.0 {
                1.0 + noise * rng.random_range(-1.0..=1.0)
            } else {
                1.0
            };
            (x, response.force(x) * scale)
        })
        .collect();
    RawCurve::new(samples)
}

/// Generates a dataset from the ground truth.
///
/// Candidates are drawn in deterministic batches; the printability checks
/// run under `exec`, so the result is the same for every execution mode.
pub fn generate(
    config: &SyntheticConfig,
    densities: &DensityTable,
    exec: Execution,
) -> Result<Vec<SyntheticSample>> {
    if config.raw_points < 2 {
        return Err(GcsError::TooFewPoints {
            needed: 2,
            found: config.raw_points,
        });
    }
    if !(config.noise >= 0.0 && config.noise < 1.0) {
        return Err(GcsError::InvalidInput(format!(
            "noise {} must lie in [0, 1)",
            config.noise
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut designs = Vec::with_capacity(config.samples);
    let mut drawn = 0usize;
    while designs.len() < config.samples {
        let want = config.samples - designs.len();
        let batch: Vec<GcsDesign> = (0..want + want / 2 + 8)
            .map(|_| random_design(&mut rng, &config.materials))
            .collect();
        drawn += batch.len();
        let keep = if config.printable_only {
            parallel::map(exec, &batch, |d| check_printability(d, densities).printable)
        } else {
            vec![true; batch.len()]
        };
        designs.extend(
            batch
                .into_iter()
                .zip(keep)
                .filter(|(_, k)| *k)
                .map(|(d, _)| d)
                .take(want),
        );
        if drawn > 100 * config.samples.max(1) {
            return Err(GcsError::NonConvergence {
                iterations: drawn,
                reason: "too few printable designs in the sampled box".into(),
            });
        }
    }
    // curve noise uses its own stream so it does not shift the design draws
    let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
    noise_rng.set_stream(2);
    designs
        .into_iter()
        .enumerate()
        .map(|(i, design)| {
            let curve = noisy_curve(&design, config.raw_points, config.noise, &mut noise_rng)?;
            Ok(SyntheticSample {
                id: format!("syn-{i:06}"),
                design,
                curve,
            })
        })
        .collect()
}
