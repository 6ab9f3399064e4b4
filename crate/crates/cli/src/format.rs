//! On-disk experiment and POVM setting formats.
//!
//! JSON is canonical. Each basis block carries the four wave-plate angles
//! and either coincidence counts or outcome probabilities for the HH, HV,
//! VH, VV detector pairings (or neither, for pure angle files feeding
//! `povm check`). A CSV import path covers count tables coming out of
//! spreadsheets.

use std::fs;
use std::io::Write;
use std::path::Path;

use memberscope_core::povm::{
    povm_from_settings, BasisMeasurement, BasisSetting, MeasurementRecord, OutcomeData, Povm,
};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: unsupported format version {version} (expected {FORMAT_VERSION})")]
    Version { path: String, version: u32 },
    #[error("{path}: basis {index}: {reason}")]
    BadBasis {
        path: String,
        index: usize,
        reason: String,
    },
    #[error("{path}: file contains no bases")]
    Empty { path: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleUnit {
    Radians,
    PiFractions,
}

impl AngleUnit {
    fn to_radians(self, value: f64) -> f64 {
        match self {
            AngleUnit::Radians => value,
            AngleUnit::PiFractions => value * std::f64::consts::PI,
        }
    }

    fn from_radians(self, value: f64) -> f64 {
        match self {
            AngleUnit::Radians => value,
            AngleUnit::PiFractions => value / std::f64::consts::PI,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl Metadata {
    fn is_empty(&self) -> bool {
        self.label.is_none() && self.shots.is_none() && self.timestamp.is_none()
    }
}

/// Outcome values keyed by detector pairing.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OutcomeQuad<T> {
    #[serde(rename = "HH")]
    pub hh: T,
    #[serde(rename = "HV")]
    pub hv: T,
    #[serde(rename = "VH")]
    pub vh: T,
    #[serde(rename = "VV")]
    pub vv: T,
}

impl<T: Copy> OutcomeQuad<T> {
    pub fn to_array(self) -> [T; 4] {
        [self.hh, self.hv, self.vh, self.vv]
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self {
            hh: a[0],
            hv: a[1],
            vh: a[2],
            vv: a[3],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisBlock {
    pub theta1: f64,
    pub phi1: f64,
    pub theta2: f64,
    pub phi2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<OutcomeQuad<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<OutcomeQuad<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentFile {
    pub format_version: u32,
    pub angle_unit: AngleUnit,
    #[serde(default, skip_serializing_if = "Metadata::is_empty")]
    pub metadata: Metadata,
    pub bases: Vec<BasisBlock>,
}

impl ExperimentFile {
    /// Serializes a measurement record; angles are written in the
    /// requested unit.
    pub fn from_record(record: &MeasurementRecord, unit: AngleUnit, metadata: Metadata) -> Self {
        let bases = record
            .bases()
            .iter()
            .map(|b| {
                let (counts, probabilities) = match &b.outcomes {
                    OutcomeData::Counts(c) => (Some(OutcomeQuad::from_array(*c)), None),
                    OutcomeData::Probabilities(p) => (None, Some(OutcomeQuad::from_array(*p))),
                };
                BasisBlock {
                    theta1: unit.from_radians(b.setting.theta1),
                    phi1: unit.from_radians(b.setting.phi1),
                    theta2: unit.from_radians(b.setting.theta2),
                    phi2: unit.from_radians(b.setting.phi2),
                    counts,
                    probabilities,
                }
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            angle_unit: unit,
            metadata,
            bases,
        }
    }

    pub fn settings(&self) -> Vec<BasisSetting> {
        self.bases
            .iter()
            .map(|b| BasisSetting {
                theta1: self.angle_unit.to_radians(b.theta1),
                phi1: self.angle_unit.to_radians(b.phi1),
                theta2: self.angle_unit.to_radians(b.theta2),
                phi2: self.angle_unit.to_radians(b.phi2),
            })
            .collect()
    }
}

fn read_json(path: &Path) -> Result<ExperimentFile, FormatError> {
    let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: ExperimentFile =
        serde_json::from_str(&text).map_err(|source| FormatError::Json {
            path: path.display().to_string(),
            source,
        })?;
    if file.format_version != FORMAT_VERSION {
        return Err(FormatError::Version {
            path: path.display().to_string(),
            version: file.format_version,
        });
    }
    if file.bases.is_empty() {
        return Err(FormatError::Empty {
            path: path.display().to_string(),
        });
    }
    Ok(file)
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    theta1: f64,
    phi1: f64,
    theta2: f64,
    phi2: f64,
    hh: u64,
    hv: u64,
    vh: u64,
    vv: u64,
}

/// CSV count tables: header `theta1,phi1,theta2,phi2,hh,hv,vh,vv`; an
/// optional leading comment line `# angle_unit=pi_fractions` switches the
/// unit (default radians).
fn read_csv(path: &Path) -> Result<ExperimentFile, FormatError> {
    let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut unit = AngleUnit::Radians;
    let mut body = text.as_str();
    if let Some(first) = text.lines().next() {
        if let Some(rest) = first.trim().strip_prefix('#') {
            if rest.replace(' ', "").eq_ignore_ascii_case("angle_unit=pi_fractions") {
                unit = AngleUnit::PiFractions;
            }
            body = &text[first.len()..];
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.trim_start_matches(['\n', '\r']).as_bytes());
    let mut bases = Vec::new();
    for row in reader.deserialize::<CsvRow>() {
        let row = row.map_err(|source| FormatError::Csv {
            path: path.display().to_string(),
            source,
        })?;
        bases.push(BasisBlock {
            theta1: row.theta1,
            phi1: row.phi1,
            theta2: row.theta2,
            phi2: row.phi2,
            counts: Some(OutcomeQuad {
                hh: row.hh,
                hv: row.hv,
                vh: row.vh,
                vv: row.vv,
            }),
            probabilities: None,
        });
    }
    if bases.is_empty() {
        return Err(FormatError::Empty {
            path: path.display().to_string(),
        });
    }
    Ok(ExperimentFile {
        format_version: FORMAT_VERSION,
        angle_unit: unit,
        metadata: Metadata::default(),
        bases,
    })
}

pub fn read_file(path: &Path) -> Result<ExperimentFile, FormatError> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(path)
    } else {
        read_json(path)
    }
}

/// Loads a measurement record: every basis must carry counts xor
/// probabilities; counts are normalized per block and probabilities
/// renormalized (they must sum to 1 within 1e-6 beforehand).
pub fn load_experiment(path: &Path) -> Result<MeasurementRecord, FormatError> {
    let file = read_file(path)?;
    let settings = file.settings();
    let mut bases = Vec::with_capacity(file.bases.len());
    for (index, (block, setting)) in file.bases.iter().zip(settings).enumerate() {
        let badbasis = |reason: String| FormatError::BadBasis {
            path: path.display().to_string(),
            index,
            reason,
        };
        let outcomes = match (&block.counts, &block.probabilities) {
            (Some(_), Some(_)) => {
                return Err(badbasis("both counts and probabilities present".into()))
            }
            (None, None) => {
                return Err(badbasis("neither counts nor probabilities present".into()))
            }
            (Some(c), None) => {
                let c = c.to_array();
                if c.iter().sum::<u64>() == 0 {
                    return Err(badbasis("zero total counts".into()));
                }
                OutcomeData::Counts(c)
            }
            (None, Some(p)) => {
                let p = p.to_array();
                if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                    return Err(badbasis("negative or non-finite probability".into()));
                }
                let sum: f64 = p.iter().sum();
                // 1e-6 with rounding headroom: verbatim tables sit exactly
                // at the boundary.
                if (sum - 1.0).abs() > 1e-6 + 1e-12 {
                    return Err(badbasis(format!(
                        "probabilities sum to {sum}, not 1 within 1e-6"
                    )));
                }
                OutcomeData::Probabilities([
                    p[0] / sum,
                    p[1] / sum,
                    p[2] / sum,
                    p[3] / sum,
                ])
            }
        };
        bases.push(BasisMeasurement { setting, outcomes });
    }
    MeasurementRecord::new(bases).map_err(|e| FormatError::Invalid(e.to_string()))
}

/// Loads just the wave-plate settings of a file and assembles the POVM;
/// any outcome data present is ignored.
pub fn load_povm(path: &Path) -> Result<Povm, FormatError> {
    let file = read_file(path)?;
    povm_from_settings(&file.settings()).map_err(|e| FormatError::Invalid(e.to_string()))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), FormatError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| "memberscope-out".into())
    ));
    let io_err = |source| FormatError::Io {
        path: path.display().to_string(),
        source,
    };
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(contents.as_bytes()).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}
