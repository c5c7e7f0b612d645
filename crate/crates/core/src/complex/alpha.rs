use std::collections::{BTreeMap, HashMap};

use super::geometry::{smallest_orthoball, P3};
use super::regular::regular_triangulation;
use super::{ComplexError, FilteredComplex, FilteredSimplex, Simplex};
use crate::pdb_ingest::WeightedPointCloud;

/// Weighted alpha filtration of a cloud in R³, all dimensions up to 3.
pub fn build_weighted_alpha(cloud: &WeightedPointCloud) -> Result<FilteredComplex, ComplexError> {
    build_weighted_alpha_dim(cloud, 3)
}

/// Weighted alpha filtration truncated at `max_dim`.
///
/// Filtration values are squared radii of smallest orthogonal balls (power
/// convention, Å²). A vertex of radius `r` enters at `-r²`. A simplex whose
/// own ball contains the opposite vertex of one of its cofaces is attached
/// and enters with its earliest coface.
pub fn build_weighted_alpha_dim(
    cloud: &WeightedPointCloud,
    max_dim: usize,
) -> Result<FilteredComplex, ComplexError> {
    if cloud.is_empty() {
        return Err(ComplexError::EmptyCloud);
    }
    if cloud.radii.iter().any(|&r| r < 0.0 || !r.is_finite()) {
        return Err(ComplexError::InvalidParameter("radii must be finite and non-negative".into()));
    }
    let weights: Vec<f64> = cloud.radii.iter().map(|r| r * r).collect();
    let pts = &cloud.points;

    let top: Vec<Vec<u32>> = if pts.len() <= 4 {
        small_top_simplex(pts)?
    } else {
        regular_triangulation(pts, &weights)?
            .tetrahedra
            .into_iter()
            .map(|t| t.to_vec())
            .collect()
    };

    // Faces by dimension, each with the opposite vertices of its cofaces.
    let top_dim = top.first().map_or(0, |t| t.len() - 1);
    let mut levels: Vec<BTreeMap<Simplex, Vec<(Simplex, u32)>>> = vec![BTreeMap::new(); top_dim + 1];
    for t in &top {
        levels[top_dim].entry(Simplex::new(t.clone())).or_default();
    }
    for d in (1..=top_dim).rev() {
        let cofaces: Vec<Simplex> = levels[d].keys().cloned().collect();
        for tau in cofaces {
            for (i, face) in tau.facets().enumerate() {
                let opposite = tau.vertices()[i];
                levels[d - 1]
                    .entry(face)
                    .or_default()
                    .push((tau.clone(), opposite));
            }
        }
    }

    let mut value: HashMap<Simplex, f64> = HashMap::new();
    for d in (0..=top_dim).rev() {
        for (sigma, cofaces) in &levels[d] {
            let f = if d == 0 {
                0.0 - weights[sigma.vertices()[0] as usize]
            } else {
                let verts: Vec<P3> = sigma.vertices().iter().map(|&v| pts[v as usize]).collect();
                let ws: Vec<f64> = sigma.vertices().iter().map(|&v| weights[v as usize]).collect();
                let ball = smallest_orthoball(&verts, &ws).ok_or(ComplexError::DegenerateInput)?;
                let attached = cofaces.iter().any(|(_, opp)| {
                    let o = *opp as usize;
                    let power = ball.power(&pts[o], weights[o]);
                    power < -1e-12 * (1.0 + ball.radius2.abs())
                });
                let coface_min = cofaces
                    .iter()
                    .map(|(tau, _)| value[tau])
                    .fold(f64::INFINITY, f64::min);
                if attached {
                    coface_min
                } else {
                    ball.radius2.min(coface_min)
                }
            };
            value.insert(sigma.clone(), f);
        }
    }

    let mut simplices: Vec<FilteredSimplex> = value
        .into_iter()
        .filter(|(s, _)| s.dim() <= max_dim)
        .map(|(simplex, value)| FilteredSimplex { simplex, value })
        .collect();
    simplices.sort_by(|a, b| a.simplex.cmp(&b.simplex));
    let mut fc = FilteredComplex {
        simplices,
        max_dimension: max_dim.min(3),
    };
    fc.sort();
    Ok(fc)
}

/// Clouds of at most four points: the whole simplex, if affinely independent.
fn small_top_simplex(pts: &[P3]) -> Result<Vec<Vec<u32>>, ComplexError> {
    let n = pts.len();
    if n > 1 && smallest_orthoball(pts, &vec![0.0; n]).is_none() {
        return Err(ComplexError::DegenerateInput);
    }
    Ok(vec![(0..n as u32).collect()])
}
