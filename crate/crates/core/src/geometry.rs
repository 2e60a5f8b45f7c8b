//! Shell surface construction, mass-constrained sizing, printability checks
//! and binary STL export.
//!
//! A shell is built from two lobed radius profiles (base and top) that are
//! linearly interpolated along the height while the whole section rotates by
//! a twist angle made of a linear and an oscillating part. The absolute size
//! is not a design parameter: the base scale `r0` is solved so that a thin
//! wall of the given thickness and material density weighs `mass` grams.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::design::{DensityTable, GcsDesign};
use crate::error::{GcsError, Result};

pub type Point2 = [f64; 2];
pub type Point3 = [f64; 3];

/// Minimum base perimeter for reliable bed adhesion.
pub const MIN_BASE_PERIMETER_MM: f64 = 30.0;
/// Minimum distance the wall must keep from the centre axis.
pub const MIN_AXIS_DISTANCE_MM: f64 = 0.01;

/// Azimuthal samples used for perimeters and the axis-distance scan.
pub const PRINTABILITY_PHI_SAMPLES: usize = 2048;
/// z-levels scanned for the axis distance: 0, h/8, ..., h.
pub const PRINTABILITY_Z_LEVELS: usize = 9;

pub const MIN_SECTION_SAMPLES: usize = 16;

const AREA_SLICES: usize = 64;
const AREA_PHI_SAMPLES: usize = 512;
const R0_BRACKET_MM: (f64, f64) = (0.1, 500.0);
const MAX_BISECTION_ITERATIONS: usize = 100;
const MASS_RELATIVE_TOLERANCE: f64 = 1e-7;

/// g/cm³ to g/mm³.
const CM3_PER_MM3: f64 = 1e-3;

/// Lobed radius profile `r0 (1 + c4 cos 4φ + c8 cos 8φ)`.
///
/// Negative values are returned as-is; they mean the wall crosses the axis.
pub fn radius_profile(c4: f64, c8: f64, r0: f64, phi: f64) -> f64 {
    r0 * (1.0 + c4 * (4.0 * phi).cos() + c8 * (8.0 * phi).cos())
}

/// Section rotation at normalized height `t ∈ [0, 1]`.
pub fn twist_angle(design: &GcsDesign, t: f64) -> f64 {
    design.linear_twist * t + design.osc_twist_amplitude * (TAU * design.osc_twist_cycles * t).sin()
}

/// Signed wall radius at normalized height `t` and azimuth `phi`.
pub fn section_radius(design: &GcsDesign, t: f64, r0_base: f64, r0_top: f64, phi: f64) -> f64 {
    let local = phi - twist_angle(design, t);
    (1.0 - t) * radius_profile(design.c4_base, design.c8_base, r0_base, local)
        + t * radius_profile(design.c4_top, design.c8_top, r0_top, local)
}

/// Closed polyline of the wall at height `z`, sampled uniformly in azimuth.
pub fn cross_section(
    design: &GcsDesign,
    z: f64,
    r0_base: f64,
    r0_top: f64,
    samples: usize,
) -> Result<Vec<Point2>> {
    if samples < MIN_SECTION_SAMPLES {
        return Err(GcsError::TooFewPoints {
            needed: MIN_SECTION_SAMPLES,
            found: samples,
        });
    }
    if !(z >= 0.0 && z <= design.height) {
        return Err(GcsError::InvalidInput(format!(
            "z = {z} outside [0, {}]",
            design.height
        )));
    }
    let t = z / design.height;
    Ok((0..samples)
        .map(|k| {
            let phi = TAU * k as f64 / samples as f64;
            let r = section_radius(design, t, r0_base, r0_top, phi);
            [r * phi.cos(), r * phi.sin()]
        })
        .collect())
}

/// Length of a closed polyline.
pub fn perimeter(points: &[Point2]) -> Result<f64> {
    if points.len() < 3 {
        return Err(GcsError::TooFewPoints {
            needed: 3,
            found: points.len(),
        });
    }
    let n = points.len();
    Ok((0..n)
        .map(|i| {
            let a = points[i];
            let b = points[(i + 1) % n];
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .sum())
}

fn profile_perimeter(c4: f64, c8: f64, r0: f64, samples: usize) -> f64 {
    let points: Vec<Point2> = (0..samples)
        .map(|k| {
            let phi = TAU * k as f64 / samples as f64;
            let r = radius_profile(c4, c8, r0, phi);
            [r * phi.cos(), r * phi.sin()]
        })
        .collect();
    perimeter(&points).unwrap_or(0.0)
}

/// Solved scale of a shell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellScale {
    pub r0_base: f64,
    pub r0_top: f64,
    /// Mass of the solved shell under the thin-wall model (g).
    pub mass: f64,
    pub iterations: usize,
}

/// Precomputed unit-scale samples of every area slice.
///
/// Profiles are stored per slice at `r0 = 1` so that evaluating the lateral
/// area for a new pair of scales costs no trigonometry.
struct AreaSampler {
    cos_phi: Vec<f64>,
    sin_phi: Vec<f64>,
    /// (t, base unit radius, top unit radius) per slice
    slices: Vec<(f64, Vec<f64>, Vec<f64>)>,
    height: f64,
}

impl AreaSampler {
    fn new(design: &GcsDesign, slices: usize, phi_samples: usize) -> Self {
        let phis: Vec<f64> = (0..phi_samples)
            .map(|k| TAU * k as f64 / phi_samples as f64)
            .collect();
        let slices = (0..=slices)
            .map(|i| {
                let t = i as f64 / slices as f64;
                let theta = twist_angle(design, t);
                let base = phis
                    .iter()
                    .map(|&p| radius_profile(design.c4_base, design.c8_base, 1.0, p - theta))
                    .collect();
                let top = phis
                    .iter()
                    .map(|&p| radius_profile(design.c4_top, design.c8_top, 1.0, p - theta))
                    .collect();
                (t, base, top)
            })
            .collect();
        AreaSampler {
            cos_phi: phis.iter().map(|p| p.cos()).collect(),
            sin_phi: phis.iter().map(|p| p.sin()).collect(),
            slices,
            height: design.height,
        }
    }

    fn slice_perimeter(&self, index: usize, r0_base: f64, r0_top: f64) -> f64 {
        let (t, base, top) = &self.slices[index];
        let n = self.cos_phi.len();
        let point = |k: usize| {
            let r = (1.0 - t) * r0_base * base[k] + t * r0_top * top[k];
            (r * self.cos_phi[k], r * self.sin_phi[k])
        };
        let mut total = 0.0;
        let mut prev = point(n - 1);
        for k in 0..n {
            let cur = point(k);
            total += (cur.0 - prev.0).hypot(cur.1 - prev.1);
            prev = cur;
        }
        total
    }

    /// Trapezoidal integral of perimeter over height (mm²).
    fn lateral_area(&self, r0_base: f64, r0_top: f64) -> f64 {
        let last = self.slices.len() - 1;
        let dz = self.height / last as f64;
        (0..=last)
            .map(|i| {
                let weight = if i == 0 || i == last { 0.5 } else { 1.0 };
                weight * self.slice_perimeter(i, r0_base, r0_top)
            })
            .sum::<f64>()
            * dz
    }
}

/// Ratio `r0_top / r0_base` that makes the top perimeter `perimeter_ratio`
/// times the base perimeter.
pub fn top_scale_ratio(design: &GcsDesign) -> Result<f64> {
    let base = profile_perimeter(
        design.c4_base,
        design.c8_base,
        1.0,
        PRINTABILITY_PHI_SAMPLES,
    );
    let top = profile_perimeter(design.c4_top, design.c8_top, 1.0, PRINTABILITY_PHI_SAMPLES);
    if !(base > 0.0 && top > 0.0) {
        return Err(GcsError::NonConvergence {
            iterations: 0,
            reason: "profile has zero perimeter".into(),
        });
    }
    Ok(design.perimeter_ratio * base / top)
}

/// Thin-wall mass model: density × thickness × mid-surface area, with the
/// area approximated by integrating section perimeters over height.
pub fn shell_mass(
    design: &GcsDesign,
    densities: &DensityTable,
    r0_base: f64,
    r0_top: f64,
) -> Result<f64> {
    let density = densities.get(design.material)? * CM3_PER_MM3;
    let sampler = AreaSampler::new(design, AREA_SLICES, AREA_PHI_SAMPLES);
    Ok(density * design.thickness * sampler.lateral_area(r0_base, r0_top))
}

/// Finds the base and top scales that satisfy the perimeter-ratio and mass
/// constraints.
pub fn solve_r0(design: &GcsDesign, densities: &DensityTable) -> Result<ShellScale> {
    let density = densities.get(design.material)? * CM3_PER_MM3;
    if !design.is_finite() || design.mass <= 0.0 || design.height <= 0.0 || design.thickness <= 0.0
    {
        return Err(GcsError::InvalidInput(
            "mass, height and thickness must be positive and finite".into(),
        ));
    }
    let ratio = top_scale_ratio(design)?;
    // Scaling both radii scales every section, so the area is r0 times the
    // unit-scale area and only needs integrating once.
    let unit_area =
        AreaSampler::new(design, AREA_SLICES, AREA_PHI_SAMPLES).lateral_area(1.0, ratio);
    let mass_at = |r0: f64| density * design.thickness * unit_area * r0;

    let (mut lo, mut hi) = R0_BRACKET_MM;
    if mass_at(lo) > design.mass || mass_at(hi) < design.mass {
        return Err(GcsError::NonConvergence {
            iterations: 0,
            reason: format!(
                "target mass {} g is not bracketed by r0 in [{lo}, {hi}] mm",
                design.mass
            ),
        });
    }
    for iteration in 1..=MAX_BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let mass = mass_at(mid);
        if ((mass - design.mass) / design.mass).abs() <= MASS_RELATIVE_TOLERANCE {
            return Ok(ShellScale {
                r0_base: mid,
                r0_top: ratio * mid,
                mass,
                iterations: iteration,
            });
        }
        if mass < design.mass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(GcsError::NonConvergence {
        iterations: MAX_BISECTION_ITERATIONS,
        reason: "mass residual did not shrink below tolerance".into(),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[u32; 3]>,
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Point3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

impl TriangleMesh {
    /// Unnormalized right-hand normal of a face; its length is twice the area.
    pub fn face_normal(&self, face: usize) -> Point3 {
        let [a, b, c] = self.faces[face].map(|i| self.vertices[i as usize]);
        cross(sub(b, a), sub(c, a))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| 0.5 * norm(self.face_normal(f)))
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.faces.is_empty() {
            return Err(GcsError::Empty("mesh"));
        }
        let n = self.vertices.len();
        for (f, face) in self.faces.iter().enumerate() {
            if face.iter().any(|&i| i as usize >= n) {
                return Err(GcsError::Malformed(format!(
                    "face {f} references a missing vertex"
                )));
            }
            if norm(self.face_normal(f)) <= 1e-12 {
                return Err(GcsError::Malformed(format!("face {f} is degenerate")));
            }
        }
        Ok(())
    }
}

/// Open-ended side surface of the shell: `z_slices` rings of `phi_samples`
/// vertices, consecutive rings joined by triangle strips.
pub fn build_mesh(
    design: &GcsDesign,
    densities: &DensityTable,
    z_slices: usize,
    phi_samples: usize,
) -> Result<TriangleMesh> {
    if z_slices < 2 {
        return Err(GcsError::TooFewPoints {
            needed: 2,
            found: z_slices,
        });
    }
    if phi_samples < MIN_SECTION_SAMPLES {
        return Err(GcsError::TooFewPoints {
            needed: MIN_SECTION_SAMPLES,
            found: phi_samples,
        });
    }
    let scale = solve_r0(design, densities)?;
    let mut vertices = Vec::with_capacity(z_slices * phi_samples);
    for i in 0..z_slices {
        let z = design.height * i as f64 / (z_slices - 1) as f64;
        let ring = cross_section(design, z, scale.r0_base, scale.r0_top, phi_samples)?;
        vertices.extend(ring.into_iter().map(|[x, y]| [x, y, z]));
    }
    let mut faces = Vec::with_capacity(2 * (z_slices - 1) * phi_samples);
    let index = |ring: usize, k: usize| (ring * phi_samples + k % phi_samples) as u32;
    for ring in 0..z_slices - 1 {
        for k in 0..phi_samples {
            let a = index(ring, k);
            let b = index(ring, k + 1);
            let c = index(ring + 1, k + 1);
            let d = index(ring + 1, k);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    Ok(TriangleMesh { vertices, faces })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrintabilityReport {
    pub base_perimeter: f64,
    pub min_axis_distance: f64,
    pub passes_perimeter: bool,
    pub passes_axis: bool,
    pub printable: bool,
    /// Set when the shell could not be sized; both checks then fail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PrintabilityReport {
    pub fn from_measurements(base_perimeter: f64, min_axis_distance: f64) -> Self {
        let passes_perimeter = base_perimeter >= MIN_BASE_PERIMETER_MM;
        let passes_axis = min_axis_distance >= MIN_AXIS_DISTANCE_MM;
        PrintabilityReport {
            base_perimeter,
            min_axis_distance,
            passes_perimeter,
            passes_axis,
            printable: passes_perimeter && passes_axis,
            error: None,
        }
    }

    fn failed(reason: String) -> Self {
        PrintabilityReport {
            base_perimeter: 0.0,
            min_axis_distance: 0.0,
            passes_perimeter: false,
            passes_axis: false,
            printable: false,
            error: Some(reason),
        }
    }
}

/// Smallest signed wall radius over the scanned z-levels and azimuths.
pub fn min_axis_distance(design: &GcsDesign, r0_base: f64, r0_top: f64) -> f64 {
    let mut min = f64::INFINITY;
    for level in 0..PRINTABILITY_Z_LEVELS {
        let t = level as f64 / (PRINTABILITY_Z_LEVELS - 1) as f64;
        for k in 0..PRINTABILITY_PHI_SAMPLES {
            let phi = TAU * k as f64 / PRINTABILITY_PHI_SAMPLES as f64;
            min = min.min(section_radius(design, t, r0_base, r0_top, phi));
        }
    }
    min
}

/// Runs both fabrication checks. Ranges are not enforced so that raw network
/// outputs can be probed; a design that cannot be sized fails both checks.
pub fn check_printability(design: &GcsDesign, densities: &DensityTable) -> PrintabilityReport {
    if !design.is_finite() {
        return PrintabilityReport::failed("design has non-finite fields".into());
    }
    let scale = match solve_r0(design, densities) {
        Ok(scale) => scale,
        Err(e) => return PrintabilityReport::failed(e.to_string()),
    };
    let base = cross_section(
        design,
        0.0,
        scale.r0_base,
        scale.r0_top,
        PRINTABILITY_PHI_SAMPLES,
    )
    .and_then(|ring| perimeter(&ring));
    match base {
        Ok(base_perimeter) => PrintabilityReport::from_measurements(
            base_perimeter,
            min_axis_distance(design, scale.r0_base, scale.r0_top),
        ),
        Err(e) => PrintabilityReport::failed(e.to_string()),
    }
}

const STL_HEADER: &[u8] = b"gcs-tnn binary STL";

/// Little-endian binary STL with per-face right-hand normals.
pub fn export_stl(mesh: &TriangleMesh) -> Result<Vec<u8>> {
    mesh.validate()?;
    let mut out = Vec::with_capacity(84 + 50 * mesh.faces.len());
    let mut header = [0u8; 80];
    header[..STL_HEADER.len()].copy_from_slice(STL_HEADER);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.faces.len() as u32).to_le_bytes());
    for (f, face) in mesh.faces.iter().enumerate() {
        let n = mesh.face_normal(f);
        let len = norm(n);
        for c in n {
            out.extend_from_slice(&((c / len) as f32).to_le_bytes());
        }
        for &v in face {
            for c in mesh.vertices[v as usize] {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    Ok(out)
}

/// Mesh resolution used by [`design_stl`].
pub const MESH_Z_SLICES: usize = 64;
pub const MESH_PHI_SAMPLES: usize = 256;

/// Binary STL of a design at the standard resolution.
pub fn design_stl(design: &GcsDesign, densities: &DensityTable) -> Result<Vec<u8>> {
    design.validate()?;
    export_stl(&build_mesh(
        design,
        densities,
        MESH_Z_SLICES,
        MESH_PHI_SAMPLES,
    )?)
}

/// One facet of a parsed binary STL.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StlFacet {
    pub normal: [f32; 3],
    pub vertices: [[f32; 3]; 3],
}

pub fn parse_stl(bytes: &[u8]) -> Result<Vec<StlFacet>> {
    if bytes.len() < 84 {
        return Err(GcsError::Malformed("STL shorter than its header".into()));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    if bytes.len() != 84 + 50 * count {
        return Err(GcsError::Malformed(format!(
            "STL declares {count} facets but has {} bytes",
            bytes.len()
        )));
    }
    let read = |offset: usize| f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap());
    Ok((0..count)
        .map(|i| {
            let base = 84 + 50 * i;
            let vec3 = |o: usize| [read(o), read(o + 4), read(o + 8)];
            StlFacet {
                normal: vec3(base),
                vertices: [vec3(base + 12), vec3(base + 24), vec3(base + 36)],
            }
        })
        .collect())
}
