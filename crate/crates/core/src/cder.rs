//! Cover-tree differencing via entropy reduction.
//!
//! Training diagrams are pooled into one weighted, labeled point set. Each
//! label carries total mass `1/L`, split evenly over that label's diagrams
//! and then over each diagram's points, so `w(x) = 1 / (L · N_l · |X_i|)`.
//! A cover tree over the pooled points is descended breadth-first; the first
//! region on each branch whose label entropy falls to the threshold emits a
//! Gaussian coordinate fitted to the dominant label's points and ends the
//! descent on that branch.
//!
//! Evaluation averages each Gaussian over a diagram's points with uniform
//! weights `1/|X|`, so empty diagrams map to the zero vector.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covertree::{dist, CoverBall, CoverTree, CoverTreeError, Point2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CderError {
    #[error("at least two labels are required, got {0}")]
    TooFewLabels(usize),
    #[error("label {0} has no diagrams")]
    EmptyClass(usize),
    #[error("label {label} is out of range for {n_labels} labels")]
    LabelOutOfRange { label: usize, n_labels: usize },
    #[error("{clouds} diagrams but {labels} labels")]
    LengthMismatch { clouds: usize, labels: usize },
    #[error("no low-entropy regions found")]
    NoRegionsFound,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model has {expected} dimensions, got {got} diagrams")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    CoverTree(#[from] CoverTreeError),
}

/// Labeled training diagrams with their per-point weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDiagramSet {
    pub clouds: Vec<Vec<Point2>>,
    /// Class index in `0..n_labels` per cloud.
    pub labels: Vec<usize>,
    pub n_labels: usize,
    /// Number of clouds per label (`N_l`).
    pub counts: Vec<usize>,
    /// Weight of every point of cloud `i`.
    pub point_weight: Vec<f64>,
}

/// Attach `w(x) = 1/(L · N_l · |X_i|)` to every point.
///
/// Empty clouds are kept: they count towards `N_l` but carry no mass.
pub fn assign_weights(
    clouds: Vec<Vec<Point2>>,
    labels: &[usize],
    n_labels: usize,
) -> Result<LabeledDiagramSet, CderError> {
    if n_labels < 2 {
        return Err(CderError::TooFewLabels(n_labels));
    }
    if clouds.len() != labels.len() {
        return Err(CderError::LengthMismatch {
            clouds: clouds.len(),
            labels: labels.len(),
        });
    }
    let mut counts = vec![0usize; n_labels];
    for &l in labels {
        if l >= n_labels {
            return Err(CderError::LabelOutOfRange { label: l, n_labels });
        }
        counts[l] += 1;
    }
    if let Some(l) = counts.iter().position(|&c| c == 0) {
        return Err(CderError::EmptyClass(l));
    }
    let point_weight = clouds
        .iter()
        .zip(labels)
        .map(|(c, &l)| {
            if c.is_empty() {
                0.0
            } else {
                1.0 / (n_labels as f64 * counts[l] as f64 * c.len() as f64)
            }
        })
        .collect();
    Ok(LabeledDiagramSet {
        clouds,
        labels: labels.to_vec(),
        n_labels,
        counts,
        point_weight,
    })
}

impl LabeledDiagramSet {
    pub fn total_weight(&self) -> f64 {
        self.clouds
            .iter()
            .zip(&self.point_weight)
            .map(|(c, w)| c.len() as f64 * w)
            .sum()
    }

    pub fn pooled(&self) -> PooledPoints {
        let mut points = Vec::new();
        for (i, cloud) in self.clouds.iter().enumerate() {
            for p in cloud {
                points.push(PooledPoint {
                    position: *p,
                    label: self.labels[i],
                    weight: self.point_weight[i],
                });
            }
        }
        PooledPoints::new(points, self.n_labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledPoint {
    pub position: Point2,
    pub label: usize,
    pub weight: f64,
}

/// All training points, indexed by their first coordinate for ball queries.
#[derive(Debug, Clone)]
pub struct PooledPoints {
    pub points: Vec<PooledPoint>,
    pub n_labels: usize,
    by_u: Vec<usize>,
}

impl PooledPoints {
    pub fn new(points: Vec<PooledPoint>, n_labels: usize) -> Self {
        let mut by_u: Vec<usize> = (0..points.len()).collect();
        by_u.sort_by(|&a, &b| points[a].position[0].total_cmp(&points[b].position[0]));
        Self {
            points,
            n_labels,
            by_u,
        }
    }

    /// Indices of points in the closed disk of `radius` about `center`.
    pub fn in_ball(&self, center: &Point2, radius: f64) -> Vec<usize> {
        let lo = self
            .by_u
            .partition_point(|&i| self.points[i].position[0] < center[0] - radius);
        let hi = self
            .by_u
            .partition_point(|&i| self.points[i].position[0] <= center[0] + radius);
        let mut out: Vec<usize> = self.by_u[lo..hi]
            .iter()
            .copied()
            .filter(|&i| dist(&self.points[i].position, center) <= radius)
            .collect();
        out.sort_unstable();
        out
    }
}

/// A closed disk in diagram space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub center: Point2,
    pub radius: f64,
}

impl Region {
    /// The region attached to a cover-tree node: radius `2^(level+1)`.
    pub fn of_node(tree: &CoverTree, node: &CoverBall) -> Self {
        Region {
            center: tree.points[node.center],
            radius: node.region_radius(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionStats {
    pub region: Region,
    /// `w_l(Ω)` per label.
    pub masses: Vec<f64>,
    /// `W(Ω)`.
    pub total: f64,
    /// Label entropy in base `L`, in `[0, 1]`.
    pub entropy: f64,
}

impl RegionStats {
    /// Dominant label, ties to the smaller index.
    pub fn dominant_label(&self) -> usize {
        let mut best = 0;
        for (l, &m) in self.masses.iter().enumerate() {
            if m > self.masses[best] {
                best = l;
            }
        }
        best
    }
}

/// `S = −Σ (w_l/W) log_L (w_l/W)`, with `0 log 0 = 0` and `S = 1` when `W = 0`.
pub fn entropy(masses: &[f64]) -> f64 {
    let l = masses.len();
    let total: f64 = masses.iter().sum();
    if total <= 0.0 || l < 2 {
        return 1.0;
    }
    let ln_l = (l as f64).ln();
    let s: f64 = masses
        .iter()
        .filter(|&&m| m > 0.0)
        .map(|&m| {
            let p = m / total;
            p * p.ln() / ln_l
        })
        .sum();
    (0.0 - s).clamp(0.0, 1.0)
}

fn stats_for(pooled: &PooledPoints, region: Region, members: &[usize]) -> RegionStats {
    let mut masses = vec![0.0; pooled.n_labels];
    for &i in members {
        let p = &pooled.points[i];
        masses[p.label] += p.weight;
    }
    let total = masses.iter().sum();
    RegionStats {
        region,
        entropy: entropy(&masses),
        masses,
        total,
    }
}

/// Label masses and entropy of the pooled training points inside `region`.
pub fn region_entropy(set: &LabeledDiagramSet, region: Region) -> RegionStats {
    let pooled = set.pooled();
    let inside = pooled.in_ball(&region.center, region.radius);
    stats_for(&pooled, region, &inside)
}

/// Unnormalized Gaussian bump `exp(−½ (x−μ)ᵀ Σ⁻¹ (x−μ))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCoordinate {
    pub label: usize,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    /// Dominant-label mass `w_l(Ω)` of the emitting region. Carried for
    /// inspection; evaluation does not scale by it.
    pub weight: f64,
}

impl GaussianCoordinate {
    pub fn eval(&self, x: &Point2) -> f64 {
        let [[a, b], [_, d]] = self.cov;
        let det = a * d - b * b;
        let dx = x[0] - self.mean[0];
        let dy = x[1] - self.mean[1];
        // Σ⁻¹ = [[d, −b], [−b, a]] / det
        let q = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
        (-0.5 * q).exp()
    }
}

/// Eigenvalues of a symmetric 2×2 matrix clamped from below; the matrix is
/// rebuilt from the clamped spectrum.
pub fn floor_eigenvalues(cov: [[f64; 2]; 2], floor: f64) -> [[f64; 2]; 2] {
    let [[a, b], [_, d]] = cov;
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (l1, l2) = (mean + rad, mean - rad);
    // Unit eigenvector for l1.
    let (vx, vy) = if b.abs() > 1e-300 {
        let (x, y) = (l1 - d, b);
        let n = (x * x + y * y).sqrt();
        (x / n, y / n)
    } else if a >= d {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let (m1, m2) = (l1.max(floor), l2.max(floor));
    // Σ = m1 v vᵀ + m2 u uᵀ with u ⟂ v.
    let (ux, uy) = (-vy, vx);
    let xy = m1 * vx * vy + m2 * ux * uy;
    [
        [m1 * vx * vx + m2 * ux * ux, xy],
        [xy, m1 * vy * vy + m2 * uy * uy],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CderParams {
    pub entropy_threshold: f64,
    pub min_mass: f64,
    /// Covariance eigenvalue floor, squared diagram units.
    pub cov_floor: f64,
}

impl Default for CderParams {
    fn default() -> Self {
        Self {
            entropy_threshold: 0.3,
            min_mass: 0.01,
            cov_floor: 1e-4,
        }
    }
}

impl CderParams {
    pub fn validate(&self) -> Result<(), CderError> {
        if !(self.entropy_threshold > 0.0 && self.entropy_threshold < 1.0) {
            return Err(CderError::InvalidParameter(format!(
                "entropy_threshold must lie in (0, 1), got {}",
                self.entropy_threshold
            )));
        }
        if !(self.min_mass > 0.0) {
            return Err(CderError::InvalidParameter(format!(
                "min_mass must be positive, got {}",
                self.min_mass
            )));
        }
        if !(self.cov_floor > 0.0) {
            return Err(CderError::InvalidParameter("cov_floor must be positive".into()));
        }
        Ok(())
    }
}

fn fit_gaussian(pooled: &PooledPoints, members: &[usize], label: usize, floor: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let pts: Vec<&PooledPoint> = members
        .iter()
        .map(|&i| &pooled.points[i])
        .filter(|p| p.label == label && p.weight > 0.0)
        .collect();
    let w: f64 = pts.iter().map(|p| p.weight).sum();
    let mut mean = [0.0; 2];
    for p in &pts {
        mean[0] += p.weight * p.position[0];
        mean[1] += p.weight * p.position[1];
    }
    mean[0] /= w;
    mean[1] /= w;
    let mut cov = [[0.0; 2]; 2];
    for p in &pts {
        let dx = p.position[0] - mean[0];
        let dy = p.position[1] - mean[1];
        cov[0][0] += p.weight * dx * dx;
        cov[0][1] += p.weight * dx * dy;
        cov[1][1] += p.weight * dy * dy;
    }
    cov[0][0] /= w;
    cov[0][1] /= w;
    cov[1][1] /= w;
    cov[1][0] = cov[0][1];
    (mean, floor_eigenvalues(cov, floor))
}

/// Learn Gaussian coordinates for one homological dimension.
pub fn fit(set: &LabeledDiagramSet, params: &CderParams) -> Result<Vec<GaussianCoordinate>, CderError> {
    fit_traced(set, params, |_| {})
}

/// [`fit`], reporting every region examined during the descent.
pub fn fit_traced(
    set: &LabeledDiagramSet,
    params: &CderParams,
    mut visit: impl FnMut(&RegionStats),
) -> Result<Vec<GaussianCoordinate>, CderError> {
    params.validate()?;
    let pooled = set.pooled();
    let positions: Vec<Point2> = pooled
        .points
        .iter()
        .filter(|p| p.weight > 0.0)
        .map(|p| p.position)
        .collect();
    if positions.is_empty() {
        return Err(CderError::NoRegionsFound);
    }
    let tree = CoverTree::build(&positions)?;

    let mut coordinates = Vec::new();
    let mut queue = VecDeque::from([tree.root()]);
    while let Some(node) = queue.pop_front() {
        let region = Region::of_node(&tree, &node);
        let inside = pooled.in_ball(&region.center, region.radius);
        let stats = stats_for(&pooled, region, &inside);
        visit(&stats);
        if stats.total < params.min_mass {
            continue;
        }
        if stats.entropy <= params.entropy_threshold {
            let label = stats.dominant_label();
            let (mean, cov) = fit_gaussian(&pooled, &inside, label, params.cov_floor);
            coordinates.push(GaussianCoordinate {
                label,
                mean,
                cov,
                weight: stats.masses[label],
            });
            continue;
        }
        queue.extend(tree.descend(&node));
    }
    if coordinates.is_empty() {
        return Err(CderError::NoRegionsFound);
    }
    Ok(coordinates)
}

/// `(1/max(|X|,1)) Σ_x g_j(x)` for every coordinate `j`.
pub fn evaluate(coordinates: &[GaussianCoordinate], cloud: &[Point2]) -> Vec<f64> {
    let norm = cloud.len().max(1) as f64;
    coordinates
        .iter()
        .map(|g| cloud.iter().map(|x| g.eval(x)).sum::<f64>() / norm)
        .collect()
}

/// Coordinates learned for one homological dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionModel {
    pub dimension: usize,
    pub coordinates: Vec<GaussianCoordinate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CderMetadata {
    pub seed: u64,
    pub params: CderParams,
    pub label_names: Vec<String>,
    pub n_train: usize,
}

/// Per-dimension Gaussian coordinates in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CderModel {
    pub dimensions: Vec<DimensionModel>,
    pub metadata: CderMetadata,
}

impl CderModel {
    pub fn num_features(&self) -> usize {
        self.dimensions.iter().map(|d| d.coordinates.len()).sum()
    }

    /// Feature names `H{dim}_g{j}_{label}` in vector order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for d in &self.dimensions {
            for (j, g) in d.coordinates.iter().enumerate() {
                let label = self
                    .metadata
                    .label_names
                    .get(g.label)
                    .cloned()
                    .unwrap_or_else(|| g.label.to_string());
                names.push(format!("H{}_g{}_{}", d.dimension, j, label));
            }
        }
        names
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Concatenate per-dimension evaluations in model order. `diagrams[k]` is
/// the transformed diagram for `models[k]`.
pub fn vectorize_sample(models: &[DimensionModel], diagrams: &[&[Point2]]) -> Result<Vec<f64>, CderError> {
    if models.len() != diagrams.len() {
        return Err(CderError::DimensionMismatch {
            expected: models.len(),
            got: diagrams.len(),
        });
    }
    Ok(models
        .iter()
        .zip(diagrams)
        .flat_map(|(m, d)| evaluate(&m.coordinates, d))
        .collect())
}
