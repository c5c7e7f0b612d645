//! Filtered simplicial complexes: Vietoris–Rips in any dimension and
//! weighted alpha complexes in R³.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

mod alpha;
mod geometry;
mod regular;
mod rips;

pub use alpha::{build_weighted_alpha, build_weighted_alpha_dim};
pub use geometry::{orient3d, smallest_orthoball, OrthoBall};
pub use regular::{regular_triangulation, RegularTriangulation};
pub use rips::build_rips;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplexError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("points are affinely dependent beyond perturbation tolerance")]
    DegenerateInput,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed complex line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Sorted, strictly increasing vertex list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Simplex(Vec<u32>);

impl Simplex {
    /// Build from any vertex order; vertices are sorted. Panics on repeats.
    pub fn new(mut vertices: Vec<u32>) -> Self {
        vertices.sort_unstable();
        assert!(
            vertices.windows(2).all(|w| w[0] < w[1]),
            "simplex vertices must be distinct"
        );
        assert!(!vertices.is_empty(), "simplex needs at least one vertex");
        Simplex(vertices)
    }

    pub fn vertices(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    /// Codimension-one faces, face `i` omitting vertex `i`.
    pub fn facets(&self) -> impl Iterator<Item = Simplex> + '_ {
        let n = self.0.len();
        (0..n).filter(move |_| n > 1).map(move |skip| {
            Simplex(
                self.0
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &v)| v)
                    .collect(),
            )
        })
    }
}

impl fmt::Display for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSimplex {
    pub simplex: Simplex,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilteredComplex {
    pub simplices: Vec<FilteredSimplex>,
    pub max_dimension: usize,
}

/// First problem found by [`validate_filtration`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FiltrationViolation {
    #[error("simplex {0} listed more than once")]
    Duplicate(Simplex),
    #[error("face {face} of {coface} is missing")]
    MissingFace { face: Simplex, coface: Simplex },
    #[error("face {face} at {face_value} enters after coface {coface} at {coface_value}")]
    NotMonotone {
        face: Simplex,
        coface: Simplex,
        face_value: f64,
        coface_value: f64,
    },
    #[error("simplex {0} has a non-finite filtration value")]
    NonFinite(Simplex),
}

impl FilteredComplex {
    pub fn new(simplices: Vec<FilteredSimplex>) -> Self {
        let max_dimension = simplices.iter().map(|s| s.simplex.dim()).max().unwrap_or(0);
        Self {
            simplices,
            max_dimension,
        }
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn count_dim(&self, dim: usize) -> usize {
        self.simplices.iter().filter(|s| s.simplex.dim() == dim).count()
    }

    /// Sort into filtration order: value, then dimension, then vertices.
    pub fn sort(&mut self) {
        self.simplices.sort_by(|a, b| {
            a.value
                .total_cmp(&b.value)
                .then_with(|| a.simplex.dim().cmp(&b.simplex.dim()))
                .then_with(|| a.simplex.cmp(&b.simplex))
        });
    }

    pub fn validate(&self) -> Result<(), FiltrationViolation> {
        validate_filtration(self)
    }

    /// Line format `dim v0 v1 ... value`, in filtration order.
    pub fn to_text(&self) -> String {
        let mut sorted = self.clone();
        sorted.sort();
        let mut out = String::new();
        for s in &sorted.simplices {
            let _ = write!(out, "{}", s.simplex.dim());
            for v in s.simplex.vertices() {
                let _ = write!(out, " {v}");
            }
            let _ = writeln!(out, " {}", s.value);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ComplexError> {
        let mut simplices = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| ComplexError::Parse {
                line: idx + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let dim: usize = fields
                .first()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| err("bad dimension"))?;
            if fields.len() != dim + 3 {
                return Err(err("vertex count does not match dimension"));
            }
            let vertices = fields[1..=dim + 1]
                .iter()
                .map(|f| f.parse::<u32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| err("bad vertex index"))?;
            let value: f64 = fields[dim + 2].parse().map_err(|_| err("bad value"))?;
            let mut sorted = vertices.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != vertices.len() {
                return Err(err("repeated vertex"));
            }
            simplices.push(FilteredSimplex {
                simplex: Simplex(sorted),
                value,
            });
        }
        Ok(Self::new(simplices))
    }
}

/// Check face closure and monotonicity; report the first offending pair.
pub fn validate_filtration(fc: &FilteredComplex) -> Result<(), FiltrationViolation> {
    let mut values: HashMap<&Simplex, f64> = HashMap::with_capacity(fc.simplices.len());
    for s in &fc.simplices {
        if !s.value.is_finite() {
            return Err(FiltrationViolation::NonFinite(s.simplex.clone()));
        }
        if values.insert(&s.simplex, s.value).is_some() {
            return Err(FiltrationViolation::Duplicate(s.simplex.clone()));
        }
    }
    for s in &fc.simplices {
        for face in s.simplex.facets() {
            match values.get(&face) {
                None => {
                    return Err(FiltrationViolation::MissingFace {
                        face,
                        coface: s.simplex.clone(),
                    })
                }
                Some(&fv) if fv > s.value => {
                    return Err(FiltrationViolation::NotMonotone {
                        face,
                        coface: s.simplex.clone(),
                        face_value: fv,
                        coface_value: s.value,
                    })
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}
