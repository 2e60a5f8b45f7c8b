//! On-disk datasets: a manifest, one designs table and one CSV per curve.
//!
//! ```text
//! manifest.json  {"designs": "designs.csv",
//!                 "records": [{"id", "design_row", "curve_path"}],
//!                 "notes": [...], "column_map": {...}}
//! designs.csv    id,c4_base,...,thickness_mm,material
//! curves/*.csv   displacement_mm,force_n
//! ```
//!
//! `design_row` is the 0-based data row in the designs table. Paths are
//! relative to the manifest. `column_map` renames canonical columns to the
//! headers of a foreign layout.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curve::{resample, RawCurve, DISPLACEMENT_COLUMN, FORCE_COLUMN};
use crate::design::{GcsDesign, Material, SCALAR_COUNT};
use crate::error::{GcsError, Result};
use crate::pipeline::Sample;
use crate::synthetic::SyntheticSample;

/// Canonical designs-table columns after `id`, in design-vector order.
pub const DESIGN_COLUMNS: [&str; SCALAR_COUNT] = [
    "c4_base",
    "c4_top",
    "c8_base",
    "c8_top",
    "linear_twist",
    "osc_twist_amplitude",
    "osc_twist_cycles",
    "perimeter_ratio",
    "mass_g",
    "height_mm",
    "thickness_mm",
];

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DESIGNS_FILE: &str = "designs.csv";
pub const CURVES_DIR: &str = "curves";

/// Minimum records per material kept by [`Dataset::filter_materials`].
pub const MIN_MATERIAL_COUNT: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub design_row: usize,
    pub curve_path: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_designs_path")]
    pub designs: PathBuf,
    pub records: Vec<ManifestRecord>,
    #[serde(default)]
    pub notes: Vec<String>,
    /// Canonical column name → header used in the input files.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub column_map: BTreeMap<String, String>,
}

fn default_designs_path() -> PathBuf {
    PathBuf::from(DESIGNS_FILE)
}

impl Manifest {
    fn column<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.column_map
            .get(canonical)
            .map(String::as_str)
            .unwrap_or(canonical)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub id: String,
    pub design: GcsDesign,
    pub curve: RawCurve,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
    pub material_counts: BTreeMap<Material, usize>,
}

fn parse_design(
    row: &csv::StringRecord,
    columns: &[usize],
    material_col: usize,
) -> Result<GcsDesign> {
    let mut scalars = [0.0; SCALAR_COUNT];
    for (k, (&col, name)) in columns.iter().zip(DESIGN_COLUMNS).enumerate() {
        let field = row.get(col).unwrap_or("").trim();
        scalars[k] = field.parse().map_err(|_| {
            GcsError::InvalidInput(format!("column `{name}`: cannot parse `{field}`"))
        })?;
    }
    let material: Material = row.get(material_col).unwrap_or("").trim().parse()?;
    let design = GcsDesign::from_scalars(scalars, material);
    design.validate()?;
    Ok(design)
}

impl From<Vec<SyntheticSample>> for Dataset {
    fn from(samples: Vec<SyntheticSample>) -> Self {
        Dataset {
            records: samples
                .into_iter()
                .map(|s| Record {
                    id: s.id,
                    design: s.design,
                    curve: s.curve,
                })
                .collect(),
            notes: vec!["synthetic ground-truth responses".into()],
        }
    }
}

impl Dataset {
    /// Reads a manifest and sorts every record into accepted or rejected.
    ///
    /// Unreadable manifests or design tables and missing columns are errors;
    /// problems with individual records land in the report.
    pub fn ingest(manifest_path: &Path) -> Result<(Dataset, IngestReport)> {
        let text =
            std::fs::read_to_string(manifest_path).map_err(|e| GcsError::io(manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));

        let designs_path = base.join(&manifest.designs);
        let file =
            std::fs::File::open(&designs_path).map_err(|e| GcsError::io(&designs_path, e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(file);
        let headers = rdr.headers()?.clone();
        let find = |canonical: &str| {
            let name = manifest.column(canonical);
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| GcsError::MissingColumn(name.to_string()))
        };
        let id_col = find("id")?;
        let columns = DESIGN_COLUMNS
            .iter()
            .map(|c| find(c))
            .collect::<Result<Vec<_>>>()?;
        let material_col = find("material")?;
        let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
        let (dcol, fcol) = (
            manifest.column(DISPLACEMENT_COLUMN),
            manifest.column(FORCE_COLUMN),
        );

        let mut dataset = Dataset {
            records: Vec::new(),
            notes: manifest.notes.clone(),
        };
        let mut report = IngestReport::default();
        let mut seen = HashSet::new();
        for entry in &manifest.records {
            let result = (|| -> Result<Record> {
                if !seen.insert(entry.id.clone()) {
                    return Err(GcsError::InvalidInput("duplicate id".into()));
                }
                let row = rows.get(entry.design_row).ok_or_else(|| {
                    GcsError::InvalidInput(format!(
                        "design row {} does not exist",
                        entry.design_row
                    ))
                })?;
                let row_id = row.get(id_col).unwrap_or("");
                if row_id != entry.id {
                    return Err(GcsError::InvalidInput(format!(
                        "design row {} has id `{row_id}`",
                        entry.design_row
                    )));
                }
                let design = parse_design(row, &columns, material_col)?;
                let path = base.join(&entry.curve_path);
                let file = std::fs::File::open(&path).map_err(|e| GcsError::io(&path, e))?;
                let curve = RawCurve::read_csv_with(file, dcol, fcol)?;
                Ok(Record {
                    id: entry.id.clone(),
                    design,
                    curve,
                })
            })();
            match result {
                Ok(record) => {
                    *report
                        .material_counts
                        .entry(record.design.material)
                        .or_default() += 1;
                    dataset.records.push(record);
                }
                Err(e) => report.rejected.push(Rejection {
                    id: entry.id.clone(),
                    reason: e.to_string(),
                }),
            }
        }
        report.accepted = dataset.records.len();
        Ok((dataset, report))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn material_counts(&self) -> BTreeMap<Material, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.design.material).or_default() += 1;
        }
        counts
    }

    /// Drops every record whose material has fewer than `min_count` records.
    pub fn filter_materials(&self, min_count: usize) -> Dataset {
        let counts = self.material_counts();
        Dataset {
            records: self
                .records
                .iter()
                .filter(|r| counts[&r.design.material] >= min_count)
                .cloned()
                .collect(),
            notes: self.notes.clone(),
        }
    }

    pub fn samples(&self) -> Vec<Sample> {
        self.records
            .iter()
            .map(|r| Sample {
                id: r.id.clone(),
                design: r.design.clone(),
                curve: resample(&r.curve),
            })
            .collect()
    }

    /// Writes the canonical layout into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let curves = dir.join(CURVES_DIR);
        std::fs::create_dir_all(&curves).map_err(|e| GcsError::io(&curves, e))?;
        let designs_path = dir.join(DESIGNS_FILE);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&designs_path)?;
        let mut header = vec!["id"];
        header.extend(DESIGN_COLUMNS);
        header.push("material");
        w.write_record(&header)?;
        let mut manifest = Manifest {
            designs: PathBuf::from(DESIGNS_FILE),
            notes: self.notes.clone(),
            ..Manifest::default()
        };
        for (row, r) in self.records.iter().enumerate() {
            let mut fields = vec![r.id.clone()];
            fields.extend(r.design.scalars().iter().map(|v| v.to_string()));
            fields.push(r.design.material.name().to_string());
            w.write_record(&fields)?;
            let curve_path = PathBuf::from(CURVES_DIR).join(format!("{}.csv", r.id));
            r.curve.save(&dir.join(&curve_path))?;
            manifest.records.push(ManifestRecord {
                id: r.id.clone(),
                design_row: row,
                curve_path,
            });
        }
        w.flush().map_err(|e| GcsError::io(&designs_path, e))?;
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .map_err(|e| GcsError::io(&path, e))
    }
}
