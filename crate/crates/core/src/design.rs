//! The twelve-parameter shell design and its fixed parameter ranges.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GcsError, Result};

/// Printing material. Declaration order is the one-hot order used everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Material {
    #[serde(rename = "PETG")]
    Petg,
    #[serde(rename = "PLA")]
    Pla,
    #[serde(rename = "TPE_Chinchilla75A")]
    TpeChinchilla75A,
    #[serde(rename = "TPU_Cheetah95A")]
    TpuCheetah95A,
    #[serde(rename = "TPU_NinjaFlex85A")]
    TpuNinjaFlex85A,
    #[serde(rename = "TPU_Armadillo75D")]
    TpuArmadillo75D,
}

impl Material {
    pub const COUNT: usize = 6;

    pub const ALL: [Material; Material::COUNT] = [
        Material::Petg,
        Material::Pla,
        Material::TpeChinchilla75A,
        Material::TpuCheetah95A,
        Material::TpuNinjaFlex85A,
        Material::TpuArmadillo75D,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Material> {
        Material::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Material::Petg => "PETG",
            Material::Pla => "PLA",
            Material::TpeChinchilla75A => "TPE_Chinchilla75A",
            Material::TpuCheetah95A => "TPU_Cheetah95A",
            Material::TpuNinjaFlex85A => "TPU_NinjaFlex85A",
            Material::TpuArmadillo75D => "TPU_Armadillo75D",
        }
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Material {
    type Err = GcsError;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        Material::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(trimmed))
            .ok_or_else(|| GcsError::InvalidInput(format!("unknown material `{trimmed}`")))
    }
}

/// Name and closed range of one scalar design parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParameterBounds {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
}

impl ParameterBounds {
    pub fn contains(&self, value: f64) -> bool {
        value.is_finite() && value >= self.lo && value <= self.hi
    }

    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }
}

pub const SCALAR_COUNT: usize = 11;

/// Ranges of the eleven scalar parameters, in canonical order.
pub const PARAMETER_BOUNDS: [ParameterBounds; SCALAR_COUNT] = [
    ParameterBounds {
        name: "c4_base",
        lo: 0.0,
        hi: 1.2,
    },
    ParameterBounds {
        name: "c4_top",
        lo: 0.0,
        hi: 1.2,
    },
    ParameterBounds {
        name: "c8_base",
        lo: -1.0,
        hi: 1.0,
    },
    ParameterBounds {
        name: "c8_top",
        lo: -1.0,
        hi: 1.0,
    },
    ParameterBounds {
        name: "linear_twist",
        lo: 0.0,
        hi: TAU,
    },
    ParameterBounds {
        name: "osc_twist_amplitude",
        lo: 0.0,
        hi: PI,
    },
    ParameterBounds {
        name: "osc_twist_cycles",
        lo: 0.0,
        hi: 3.0,
    },
    ParameterBounds {
        name: "perimeter_ratio",
        lo: 1.0,
        hi: 3.0,
    },
    ParameterBounds {
        name: "mass",
        lo: 1.0,
        hi: 5.0,
    },
    ParameterBounds {
        name: "height",
        lo: 10.0,
        hi: 30.0,
    },
    ParameterBounds {
        name: "thickness",
        lo: 0.4,
        hi: 1.0,
    },
];

/// A generalized cylindrical shell.
///
/// Angles are radians, mass grams, lengths millimetres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcsDesign {
    pub c4_base: f64,
    pub c4_top: f64,
    pub c8_base: f64,
    pub c8_top: f64,
    pub linear_twist: f64,
    pub osc_twist_amplitude: f64,
    pub osc_twist_cycles: f64,
    pub perimeter_ratio: f64,
    pub mass: f64,
    pub height: f64,
    pub thickness: f64,
    pub material: Material,
}

impl GcsDesign {
    /// Plain cylinder: no lobes, no twist, equal top and base perimeters.
    pub fn cylinder(mass: f64, height: f64, thickness: f64, material: Material) -> Self {
        GcsDesign {
            c4_base: 0.0,
            c4_top: 0.0,
            c8_base: 0.0,
            c8_top: 0.0,
            linear_twist: 0.0,
            osc_twist_amplitude: 0.0,
            osc_twist_cycles: 0.0,
            perimeter_ratio: 1.0,
            mass,
            height,
            thickness,
            material,
        }
    }

    pub fn scalars(&self) -> [f64; SCALAR_COUNT] {
        [
            self.c4_base,
            self.c4_top,
            self.c8_base,
            self.c8_top,
            self.linear_twist,
            self.osc_twist_amplitude,
            self.osc_twist_cycles,
            self.perimeter_ratio,
            self.mass,
            self.height,
            self.thickness,
        ]
    }

    pub fn from_scalars(values: [f64; SCALAR_COUNT], material: Material) -> Self {
        GcsDesign {
            c4_base: values[0],
            c4_top: values[1],
            c8_base: values[2],
            c8_top: values[3],
            linear_twist: values[4],
            osc_twist_amplitude: values[5],
            osc_twist_cycles: values[6],
            perimeter_ratio: values[7],
            mass: values[8],
            height: values[9],
            thickness: values[10],
            material,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.scalars().iter().all(|v| v.is_finite())
    }

    /// Every parameter outside its range, in canonical order.
    pub fn violations(&self) -> Vec<GcsError> {
        self.scalars()
            .iter()
            .zip(PARAMETER_BOUNDS.iter())
            .filter(|(v, b)| !b.contains(**v))
            .map(|(v, b)| GcsError::OutOfRange {
                parameter: b.name.to_string(),
                value: *v,
                lo: b.lo,
                hi: b.hi,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(err) => Err(err),
            None => Ok(()),
        }
    }
}

/// Material densities in g/cm³.
///
/// These are configuration defaults for common filament grades, not measured
/// values for the printed shells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityTable(BTreeMap<Material, f64>);

impl Default for DensityTable {
    fn default() -> Self {
        DensityTable(BTreeMap::from([
            (Material::Petg, 1.27),
            (Material::Pla, 1.24),
            (Material::TpeChinchilla75A, 1.22),
            (Material::TpuCheetah95A, 1.22),
            (Material::TpuNinjaFlex85A, 1.21),
            (Material::TpuArmadillo75D, 1.20),
        ]))
    }
}

impl DensityTable {
    pub fn empty() -> Self {
        DensityTable(BTreeMap::new())
    }

    pub fn with(mut self, material: Material, density: f64) -> Self {
        self.0.insert(material, density);
        self
    }

    /// Density in g/cm³.
    pub fn get(&self, material: Material) -> Result<f64> {
        self.0
            .get(&material)
            .copied()
            .ok_or(GcsError::MissingDensity(material))
    }

    /// Parses `MATERIAL = density` lines; `#` starts a comment.
    ///
    /// Materials missing from the text keep their default density.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = DensityTable::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                GcsError::InvalidInput(format!(
                    "density table line {}: expected `key = value`",
                    lineno + 1
                ))
            })?;
            let material: Material = key.parse()?;
            let density: f64 = value.trim().parse().map_err(|_| {
                GcsError::InvalidInput(format!(
                    "density table line {}: bad number `{}`",
                    lineno + 1,
                    value.trim()
                ))
            })?;
            if !(density.is_finite() && density > 0.0) {
                return Err(GcsError::InvalidInput(format!(
                    "density table line {}: density must be positive",
                    lineno + 1
                )));
            }
            table.0.insert(material, density);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GcsError::io(path, e))?;
        Self::parse(&text)
    }
}
