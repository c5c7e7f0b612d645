//! Persistent homology over Z/2 by boundary-matrix column reduction.
//!
//! Columns are reduced dimension by dimension from the top down with the
//! clearing (twist) optimization: once column `j` is reduced with pivot `i`,
//! column `i` is known to be a birth and is zeroed without reduction.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{validate_filtration, FilteredComplex, FiltrationViolation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PersistenceError {
    #[error("invalid filtration: {0}")]
    InvalidFiltration(#[from] FiltrationViolation),
    #[error("diagram has an essential pair ({birth}, inf); drop essential pairs before transforming")]
    EssentialPair { birth: f64 },
}

/// Sparse Z/2 boundary matrix with columns in filtration order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMatrix {
    /// Row indices of each column's facets, ascending.
    pub columns: Vec<Vec<usize>>,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

impl BoundaryMatrix {
    /// Sort the complex into filtration order and index facets.
    pub fn from_complex(fc: &FilteredComplex) -> Result<Self, PersistenceError> {
        validate_filtration(fc)?;
        let mut sorted = fc.clone();
        sorted.sort();
        let index: HashMap<&crate::complex::Simplex, usize> = sorted
            .simplices
            .iter()
            .enumerate()
            .map(|(i, s)| (&s.simplex, i))
            .collect();
        let mut columns = Vec::with_capacity(sorted.len());
        let mut dims = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        for s in &sorted.simplices {
            let mut col: Vec<usize> = s.simplex.facets().map(|f| index[&f]).collect();
            col.sort_unstable();
            columns.push(col);
            dims.push(s.simplex.dim());
            values.push(s.value);
        }
        Ok(Self {
            columns,
            dims,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn max_dim(&self) -> usize {
        self.dims.iter().copied().max().unwrap_or(0)
    }
}

/// Index-level pairing produced by the reduction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndexPairing {
    /// `(birth column, death column)`.
    pub pairs: Vec<(usize, usize)>,
    /// Births that are never killed.
    pub essential: Vec<usize>,
}

/// Symmetric difference of two ascending index lists, written into `out`.
fn add_columns(a: &[usize], b: &[usize], out: &mut Vec<usize>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Standard column reduction with clearing.
pub fn reduce_matrix(matrix: &BoundaryMatrix) -> IndexPairing {
    let n = matrix.len();
    let mut cols: Vec<Vec<usize>> = matrix.columns.clone();
    let mut pivot_owner: Vec<usize> = vec![usize::MAX; n];
    let mut cleared = vec![false; n];
    let mut is_birth = vec![false; n];
    let mut scratch = Vec::new();

    let max_dim = matrix.max_dim();
    for dim in (1..=max_dim).rev() {
        for j in 0..n {
            if matrix.dims[j] != dim || cleared[j] {
                continue;
            }
            while let Some(&low) = cols[j].last() {
                let owner = pivot_owner[low];
                if owner == usize::MAX {
                    break;
                }
                add_columns(&cols[j], &cols[owner], &mut scratch);
                std::mem::swap(&mut cols[j], &mut scratch);
            }
            match cols[j].last() {
                Some(&low) => {
                    pivot_owner[low] = j;
                    cleared[low] = true;
                    cols[low].clear();
                }
                None => is_birth[j] = true,
            }
        }
    }
    for j in 0..n {
        if matrix.dims[j] == 0 {
            is_birth[j] = true;
        }
    }

    let mut pairing = IndexPairing::default();
    for (low, &owner) in pivot_owner.iter().enumerate() {
        if owner != usize::MAX {
            pairing.pairs.push((low, owner));
        }
    }
    pairing.essential = (0..n)
        .filter(|&j| is_birth[j] && pivot_owner[j] == usize::MAX)
        .collect();
    pairing
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair {
    pub dimension: usize,
    pub birth: f64,
    /// `f64::INFINITY` for essential classes.
    pub death: f64,
}

impl PersistencePair {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    pub fn is_essential(&self) -> bool {
        self.death.is_infinite()
    }
}

/// Pairs of one homological dimension.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub id: String,
    pub dimension: usize,
    pub pairs: Vec<PersistencePair>,
}

impl PersistenceDiagram {
    pub fn new(id: impl Into<String>, dimension: usize) -> Self {
        Self {
            id: id.into(),
            dimension,
            pairs: Vec::new(),
        }
    }

    pub fn push(&mut self, birth: f64, death: f64) {
        self.pairs.push(PersistencePair {
            dimension: self.dimension,
            birth,
            death,
        });
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Copy without essential pairs.
    pub fn finite(&self) -> Self {
        Self {
            id: self.id.clone(),
            dimension: self.dimension,
            pairs: self.pairs.iter().copied().filter(|p| !p.is_essential()).collect(),
        }
    }

    /// Pairs sorted by (birth, death), for comparisons.
    pub fn sorted_pairs(&self) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = self.pairs.iter().map(|p| (p.birth, p.death)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        v
    }
}

/// Persistence diagrams of dimensions `0..=fc.max_dimension`.
///
/// Zero-persistence pairs are dropped; essential classes appear with an
/// infinite death.
pub fn reduce(fc: &FilteredComplex) -> Result<Vec<PersistenceDiagram>, PersistenceError> {
    reduce_labeled(fc, "")
}

pub fn reduce_labeled(
    fc: &FilteredComplex,
    id: &str,
) -> Result<Vec<PersistenceDiagram>, PersistenceError> {
    let matrix = BoundaryMatrix::from_complex(fc)?;
    let pairing = reduce_matrix(&matrix);
    let top = fc.max_dimension.max(matrix.max_dim());
    let mut diagrams: Vec<PersistenceDiagram> =
        (0..=top).map(|d| PersistenceDiagram::new(id, d)).collect();
    for &(b, d) in &pairing.pairs {
        let (birth, death) = (matrix.values[b], matrix.values[d]);
        if birth != death {
            diagrams[matrix.dims[b]].push(birth, death);
        }
    }
    for &b in &pairing.essential {
        diagrams[matrix.dims[b]].push(matrix.values[b], f64::INFINITY);
    }
    for dgm in &mut diagrams {
        dgm.pairs
            .sort_by(|a, b| a.birth.total_cmp(&b.birth).then(a.death.total_cmp(&b.death)));
    }
    Ok(diagrams)
}

/// Betti numbers at `scale`: pairs with `birth <= scale < death`, per dimension.
pub fn betti_at(diagrams: &[PersistenceDiagram], scale: f64) -> Vec<usize> {
    diagrams
        .iter()
        .map(|d| {
            d.pairs
                .iter()
                .filter(|p| p.birth <= scale && scale < p.death)
                .count()
        })
        .collect()
}

/// Diagram in birth–persistence coordinates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransformedDiagram {
    pub id: String,
    pub dimension: usize,
    pub points: Vec<[f64; 2]>,
}

impl TransformedDiagram {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `(b, d) ↦ (d, 0)` for H₀ and `(b, d) ↦ (b, d − b)` otherwise.
pub fn transform(diagram: &PersistenceDiagram) -> Result<TransformedDiagram, PersistenceError> {
    let mut points = Vec::with_capacity(diagram.len());
    for p in &diagram.pairs {
        if p.is_essential() {
            return Err(PersistenceError::EssentialPair { birth: p.birth });
        }
        points.push(if diagram.dimension == 0 {
            [p.death, 0.0]
        } else {
            [p.birth, p.death - p.birth]
        });
    }
    Ok(TransformedDiagram {
        id: diagram.id.clone(),
        dimension: diagram.dimension,
        points,
    })
}
