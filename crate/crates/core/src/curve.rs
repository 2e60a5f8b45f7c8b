//! Force-displacement curves: validation, resampling onto the canonical grid,
//! and the derived metrics (stiffness, work, max displacement, energy before
//! a force threshold).
//!
//! Units are fixed: displacement in mm, force in N, energy in J.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GcsError, Result};

/// Number of samples on the canonical displacement grid.
pub const GRID_POINTS: usize = 100;

/// N·mm to J.
pub const NMM_TO_J: f64 = 1e-3;

pub const DISPLACEMENT_COLUMN: &str = "displacement_mm";
pub const FORCE_COLUMN: &str = "force_n";

/// Measured compression curve with strictly increasing displacement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct RawCurve {
    samples: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for RawCurve {
    type Error = GcsError;

    fn try_from(samples: Vec<(f64, f64)>) -> Result<Self> {
        RawCurve::new(samples)
    }
}

impl From<RawCurve> for Vec<(f64, f64)> {
    fn from(curve: RawCurve) -> Self {
        curve.samples
    }
}

impl RawCurve {
    /// Validates `(displacement, force)` samples. Error rows are 0-based
    /// sample indices.
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(GcsError::TooFewPoints {
                needed: 2,
                found: samples.len(),
            });
        }
        for (row, &(d, f)) in samples.iter().enumerate() {
            if !d.is_finite() || !f.is_finite() {
                return Err(GcsError::InvalidCurve {
                    row,
                    reason: "non-finite value".into(),
                });
            }
            if row == 0 && d < 0.0 {
                return Err(GcsError::InvalidCurve {
                    row,
                    reason: format!("first displacement {d} is negative"),
                });
            }
            if row > 0 && d <= samples[row - 1].0 {
                return Err(GcsError::InvalidCurve {
                    row,
                    reason: format!(
                        "displacement {d} does not increase past {}",
                        samples[row - 1].0
                    ),
                });
            }
        }
        Ok(RawCurve { samples })
    }

    pub fn from_columns(displacements: &[f64], forces: &[f64]) -> Result<Self> {
        if displacements.len() != forces.len() {
            return Err(GcsError::DimensionMismatch {
                expected: displacements.len(),
                found: forces.len(),
            });
        }
        Self::new(
            displacements
                .iter()
                .copied()
                .zip(forces.iter().copied())
                .collect(),
        )
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn max_displacement(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    /// Reads a curve CSV with the given column names.
    pub fn read_csv_with<R: Read>(
        reader: R,
        displacement_column: &str,
        force_column: &str,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| GcsError::MissingColumn(name.to_string()))
        };
        let (di, fi) = (column(displacement_column)?, column(force_column)?);
        let mut samples = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let parse = |i: usize| -> Result<f64> {
                let field = record.get(i).unwrap_or("");
                field.parse().map_err(|_| GcsError::InvalidCurve {
                    row,
                    reason: format!("cannot parse `{field}` as a number"),
                })
            };
            samples.push((parse(di)?, parse(fi)?));
        }
        Self::new(samples)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        Self::read_csv_with(reader, DISPLACEMENT_COLUMN, FORCE_COLUMN)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| GcsError::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        wtr.write_record([DISPLACEMENT_COLUMN, FORCE_COLUMN])?;
        for (d, f) in &self.samples {
            wtr.write_record([d.to_string(), f.to_string()])?;
        }
        wtr.flush().map_err(|e| GcsError::io("<curve csv>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| GcsError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Forces on the grid `d_i = max_displacement · i / 99`, both ends included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampledCurve {
    pub forces: Vec<f64>,
    pub max_displacement: f64,
}

/// Grid displacement `i` of a curve ending at `max_displacement`.
pub fn grid_displacement(max_displacement: f64, i: usize) -> f64 {
    if i == GRID_POINTS - 1 {
        max_displacement
    } else {
        max_displacement * i as f64 / (GRID_POINTS - 1) as f64
    }
}

impl ResampledCurve {
    pub fn new(forces: Vec<f64>, max_displacement: f64) -> Result<Self> {
        if forces.len() != GRID_POINTS {
            return Err(GcsError::DimensionMismatch {
                expected: GRID_POINTS,
                found: forces.len(),
            });
        }
        if !(max_displacement.is_finite() && max_displacement > 0.0) {
            return Err(GcsError::InvalidInput(format!(
                "max displacement must be positive, got {max_displacement}"
            )));
        }
        Ok(ResampledCurve {
            forces,
            max_displacement,
        })
    }

    pub fn displacements(&self) -> Vec<f64> {
        (0..GRID_POINTS)
            .map(|i| grid_displacement(self.max_displacement, i))
            .collect()
    }

    pub fn step(&self) -> f64 {
        self.max_displacement / (GRID_POINTS - 1) as f64
    }

    pub fn peak_force(&self) -> f64 {
        self.forces
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Copy with every force clamped at zero.
    pub fn clamped_non_negative(&self) -> Self {
        ResampledCurve {
            forces: self.forces.iter().map(|f| f.max(0.0)).collect(),
            max_displacement: self.max_displacement,
        }
    }
}

/// Linear interpolation of `raw` onto the canonical grid over
/// `[0, last displacement]`.
///
/// Grid points before the first sample are extrapolated from the first two
/// samples and clamped at 0 N.
pub fn resample(raw: &RawCurve) -> ResampledCurve {
    let samples = raw.samples();
    let max_displacement = raw.max_displacement();
    let mut forces = Vec::with_capacity(GRID_POINTS);
    let mut seg = 0;
    for i in 0..GRID_POINTS {
        let d = grid_displacement(max_displacement, i);
        if i == GRID_POINTS - 1 {
            forces.push(samples[samples.len() - 1].1);
            continue;
        }
        if d < samples[0].0 {
            let (d0, f0) = samples[0];
            let (d1, f1) = samples[1];
            forces.push((f0 + (f1 - f0) * (d - d0) / (d1 - d0)).max(0.0));
            continue;
        }
        while seg + 2 < samples.len() && samples[seg + 1].0 <= d {
            seg += 1;
        }
        let (da, fa) = samples[seg];
        let (db, fb) = samples[seg + 1];
        forces.push(fa + (fb - fa) * (d - da) / (db - da));
    }
    ResampledCurve {
        forces,
        max_displacement,
    }
}

/// Area under the curve in J (trapezoidal rule).
pub fn work(curve: &ResampledCurve) -> f64 {
    energy_before_threshold(curve, f64::INFINITY)
}

/// Work accumulated until the force first exceeds `f_threshold`, with the
/// crossing located by linear interpolation inside its segment.
pub fn energy_before_threshold(curve: &ResampledCurve, f_threshold: f64) -> f64 {
    let h = curve.step();
    let forces = &curve.forces;
    if forces[0] > f_threshold {
        return 0.0;
    }
    let mut area = 0.0;
    for pair in forces.windows(2) {
        let (fa, fb) = (pair[0], pair[1]);
        if fb > f_threshold {
            let s = (f_threshold - fa) / (fb - fa);
            area += 0.5 * (fa + f_threshold) * s * h;
            break;
        }
        area += 0.5 * (fa + fb) * h;
    }
    area * NMM_TO_J
}

/// R² values closer than this count as a tie (two exactly linear windows
/// differ only by rounding).
const R2_TIE_TOLERANCE: f64 = 1e-12;

/// Where to look for the linear elastic zone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StiffnessConfig {
    /// Points per least-squares window.
    pub window: usize,
    /// Largest window start index searched.
    pub max_start: usize,
}

impl Default for StiffnessConfig {
    fn default() -> Self {
        StiffnessConfig {
            window: 10,
            max_start: 30,
        }
    }
}

/// Slope of the best-fitting early window, in N/mm.
///
/// Every window of `window` consecutive grid points starting at
/// `0..=max_start` is fitted by least squares; the slope of the window with
/// the highest R² wins, earliest on ties. Windows with constant force are
/// skipped, and if every window is constant the stiffness is 0.
pub fn stiffness_with(curve: &ResampledCurve, config: &StiffnessConfig) -> f64 {
    let d = curve.displacements();
    let f = &curve.forces;
    let window = config.window.max(2);
    let last_start = config.max_start.min(GRID_POINTS - window);
    let mut best: Option<(f64, f64)> = None;
    for start in 0..=last_start {
        let xs = &d[start..start + window];
        let ys = &f[start..start + window];
        let n = window as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(ys) {
            let (dx, dy) = (x - mx, y - my);
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        if syy == 0.0 || sxx == 0.0 {
            continue;
        }
        let r2 = sxy * sxy / (sxx * syy);
        let slope = sxy / sxx;
        if best.is_none_or(|(b, _)| r2 > b + R2_TIE_TOLERANCE) {
            best = Some((r2, slope));
        }
    }
    best.map_or(0.0, |(_, slope)| slope)
}

pub fn stiffness(curve: &ResampledCurve) -> f64 {
    stiffness_with(curve, &StiffnessConfig::default())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveMetrics {
    /// N/mm
    pub stiffness: f64,
    /// J
    pub work: f64,
    /// mm
    pub max_displacement: f64,
}

impl CurveMetrics {
    pub fn of(curve: &ResampledCurve) -> Self {
        Self::with(curve, &StiffnessConfig::default())
    }

    pub fn with(curve: &ResampledCurve, config: &StiffnessConfig) -> Self {
        CurveMetrics {
            stiffness: stiffness_with(curve, config),
            work: work(curve),
            max_displacement: curve.max_displacement,
        }
    }
}
