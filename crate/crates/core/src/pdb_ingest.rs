//! PDB ingestion: fixed-column ATOM records, van der Waals radii, stability
//! labels and class balancing.
//!
//! Only `ATOM` records are read. `HETATM` (waters, ligands), `TER` and every
//! other record type are skipped. The parser keeps every ATOM record it sees,
//! including hydrogens and alternate-location duplicates; no altLoc filtering
//! is applied.

use std::collections::HashMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("no ATOM records found")]
    NoAtoms,
    #[error("malformed ATOM record at line {0}")]
    MalformedLine(usize),
    #[error("no van der Waals radius for element {0:?}")]
    UnknownElement(String),
    #[error("class {0} is empty after thresholding")]
    EmptyClass(Label),
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("missing value at row {row}, column {col:?}")]
    MissingValue { row: usize, col: String },
    #[error("unparseable value {value:?} at row {row}, column {col:?}")]
    InvalidValue {
        row: usize,
        col: String,
        value: String,
    },
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> Self {
        IngestError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomRecord {
    pub element: String,
    /// Cartesian coordinates in ångströms.
    pub position: [f64; 3],
    pub serial: u32,
}

/// Points in R³ with one positive radius (ångströms) per point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightedPointCloud {
    pub points: Vec<[f64; 3]>,
    pub radii: Vec<f64>,
}

impl WeightedPointCloud {
    pub fn new(points: Vec<[f64; 3]>, radii: Vec<f64>) -> Self {
        assert_eq!(points.len(), radii.len(), "one radius per point");
        Self { points, radii }
    }

    /// Cloud with every radius zero (the unweighted case).
    pub fn unweighted(points: Vec<[f64; 3]>) -> Self {
        let radii = vec![0.0; points.len()];
        Self { points, radii }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Van der Waals radii (Å) used as alpha-complex weights.
pub const VDW_RADII: [(&str, f64); 5] = [
    ("H", 1.2),
    ("N", 1.55),
    ("O", 1.52),
    ("C", 1.7),
    ("S", 1.8),
];

pub fn vdw_radius(element: &str) -> Option<f64> {
    VDW_RADII
        .iter()
        .find(|(symbol, _)| *symbol == element)
        .map(|&(_, r)| r)
}

fn columns(line: &str, start: usize, end: usize) -> &str {
    // 1-based inclusive PDB columns; short lines yield the available prefix.
    let bytes = line.as_bytes();
    let lo = (start - 1).min(bytes.len());
    let hi = end.min(bytes.len());
    line.get(lo..hi).unwrap_or("")
}

fn normalize_element(raw: &str) -> Option<String> {
    let letters: Vec<char> = raw.chars().filter(|c| c.is_ascii_alphabetic()).collect();
    let first = letters.first()?;
    let mut out = first.to_ascii_uppercase().to_string();
    if let Some(second) = letters.get(1) {
        out.push(second.to_ascii_lowercase());
    }
    Some(out)
}

/// Parse the ATOM records of a PDB v3.3 file, in file order.
pub fn parse_pdb(text: &str) -> Result<Vec<AtomRecord>, IngestError> {
    let mut atoms = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if columns(line, 1, 6) != "ATOM  " && columns(line, 1, 6).trim_end() != "ATOM" {
            continue;
        }
        let coord = |start, end| -> Result<f64, IngestError> {
            let field = columns(line, start, end).trim();
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or(IngestError::MalformedLine(line_no))
        };
        let position = [coord(31, 38)?, coord(39, 46)?, coord(47, 54)?];
        let element = normalize_element(columns(line, 77, 78).trim())
            .or_else(|| {
                columns(line, 13, 16)
                    .chars()
                    .find(|c| c.is_ascii_alphabetic())
                    .map(|c| c.to_ascii_uppercase().to_string())
            })
            .ok_or(IngestError::MalformedLine(line_no))?;
        let serial = columns(line, 7, 11)
            .trim()
            .parse::<u32>()
            .ok()
            .filter(|&s| s > 0)
            .unwrap_or(atoms.len() as u32 + 1);
        atoms.push(AtomRecord {
            element,
            position,
            serial,
        });
    }
    if atoms.is_empty() {
        return Err(IngestError::NoAtoms);
    }
    Ok(atoms)
}

/// Attach the van der Waals radius of each atom's element.
pub fn assign_weights(atoms: &[AtomRecord]) -> Result<WeightedPointCloud, IngestError> {
    let mut points = Vec::with_capacity(atoms.len());
    let mut radii = Vec::with_capacity(atoms.len());
    for atom in atoms {
        let r = vdw_radius(&atom.element)
            .ok_or_else(|| IngestError::UnknownElement(atom.element.clone()))?;
        points.push(atom.position);
        radii.push(r);
    }
    Ok(WeightedPointCloud { points, radii })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Stable,
    Unstable,
    Unlabeled,
}

impl Label {
    /// Binary target used by the classifiers: stable is the positive class.
    pub fn as_target(self) -> Option<u8> {
        match self {
            Label::Stable => Some(1),
            Label::Unstable => Some(0),
            Label::Unlabeled => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Stable => "stable",
            Label::Unstable => "unstable",
            Label::Unlabeled => "unlabeled",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProteinSample {
    pub id: String,
    /// Secondary-structure topology (HHH, EHEE, HEEH, EEHEE) or a free tag.
    pub topology: String,
    pub stability_score: f64,
    pub label: Label,
}

impl ProteinSample {
    pub fn new(id: impl Into<String>, topology: impl Into<String>, score: f64) -> Self {
        Self {
            id: id.into(),
            topology: topology.into(),
            stability_score: score,
            label: Label::Unlabeled,
        }
    }
}

/// How the majority class is cut down to the minority size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DownsampleStrategy {
    /// Keep the most extreme scores: lowest unstable, highest stable.
    #[default]
    Extremes,
    Random,
}

/// Label every sample by `score > threshold` and balance the two classes.
pub fn label_and_downsample(
    samples: &[ProteinSample],
    threshold: f64,
    seed: u64,
) -> Result<Vec<ProteinSample>, IngestError> {
    label_and_downsample_with(samples, threshold, seed, DownsampleStrategy::Extremes)
}

pub fn label_and_downsample_with(
    samples: &[ProteinSample],
    threshold: f64,
    seed: u64,
    strategy: DownsampleStrategy,
) -> Result<Vec<ProteinSample>, IngestError> {
    let mut stable = Vec::new();
    let mut unstable = Vec::new();
    for s in samples {
        let mut s = s.clone();
        if s.stability_score > threshold {
            s.label = Label::Stable;
            stable.push(s);
        } else {
            s.label = Label::Unstable;
            unstable.push(s);
        }
    }
    if stable.is_empty() {
        return Err(IngestError::EmptyClass(Label::Stable));
    }
    if unstable.is_empty() {
        return Err(IngestError::EmptyClass(Label::Unstable));
    }

    let keep = stable.len().min(unstable.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_score = |a: &ProteinSample, b: &ProteinSample| {
        a.stability_score
            .total_cmp(&b.stability_score)
            .then_with(|| a.id.cmp(&b.id))
    };
    match strategy {
        DownsampleStrategy::Extremes => {
            stable.sort_by(|a, b| by_score(b, a));
            unstable.sort_by(by_score);
        }
        DownsampleStrategy::Random => {
            stable.shuffle(&mut rng);
            unstable.shuffle(&mut rng);
        }
    }
    stable.truncate(keep);
    unstable.truncate(keep);

    let mut out = stable;
    out.extend(unstable);
    out.shuffle(&mut rng);
    Ok(out)
}

/// Per-sample feature vectors keyed by sample id, column order preserved.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SmeFeatureTable {
    pub columns: Vec<String>,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl SmeFeatureTable {
    pub fn from_rows(columns: Vec<String>, ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, IngestError> {
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(IngestError::DuplicateId(id.clone()));
            }
        }
        Ok(Self {
            columns,
            ids,
            rows,
            index,
        })
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.rows[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Load a header-row CSV whose first column is the sample id.
pub fn load_sme_csv(text: &str) -> Result<SmeFeatureTable, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = r + 1;
        let id = record.get(0).unwrap_or("").to_string();
        let mut row = Vec::with_capacity(columns.len());
        for (c, col) in columns.iter().enumerate() {
            let cell = record.get(c + 1).unwrap_or("");
            if cell.is_empty() {
                return Err(IngestError::MissingValue {
                    row: row_no,
                    col: col.clone(),
                });
            }
            let value = cell.parse::<f64>().map_err(|_| IngestError::InvalidValue {
                row: row_no,
                col: col.clone(),
                value: cell.to_string(),
            })?;
            row.push(value);
        }
        ids.push(id);
        rows.push(row);
    }
    SmeFeatureTable::from_rows(columns, ids, rows)
}

/// Load the two-column `(id, score)` stability file. An optional third
/// `topology` column is accepted.
pub fn load_scores_csv(text: &str) -> Result<Vec<ProteinSample>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let score_col = headers.get(1).unwrap_or("score").to_string();
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = r + 1;
        let id = record.get(0).unwrap_or("").to_string();
        let cell = record.get(1).unwrap_or("");
        if cell.is_empty() {
            return Err(IngestError::MissingValue {
                row: row_no,
                col: score_col,
            });
        }
        let score = cell.parse::<f64>().map_err(|_| IngestError::InvalidValue {
            row: row_no,
            col: score_col.clone(),
            value: cell.to_string(),
        })?;
        if seen.insert(id.clone(), ()).is_some() {
            return Err(IngestError::DuplicateId(id));
        }
        let topology = record.get(2).unwrap_or("").to_string();
        out.push(ProteinSample::new(id, topology, score));
    }
    Ok(out)
}
