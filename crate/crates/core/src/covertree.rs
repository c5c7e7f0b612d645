//! Leveled cover tree over points in the plane.
//!
//! Level `i` holds a point set `C_i` with
//!
//! - nesting: `C_i ⊆ C_{i-1}`,
//! - covering: every `p ∈ C_{i-1}` has a parent `q ∈ C_i` with `d(p, q) < 2^i`,
//! - separation: distinct `p, q ∈ C_i` satisfy `d(p, q) > 2^i`.
//!
//! Levels run from the root level (a single point) down to the first level
//! that contains every distinct input point. Exact duplicates are collapsed
//! onto the first occurrence, which carries their multiplicity.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverTreeError {
    #[error("cover tree needs at least one point")]
    EmptyInput,
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
}

/// Axiom violation found by [`check_axioms`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AxiomViolation {
    #[error("nesting: point {point} is in level {level} but not in level {}", level - 1)]
    Nesting { level: i32, point: usize },
    #[error("covering: point {point} at level {} has parent {parent:?} at distance {distance} (limit {limit})", level - 1)]
    Covering {
        level: i32,
        point: usize,
        parent: Option<usize>,
        distance: f64,
        limit: f64,
    },
    #[error("separation: points {a} and {b} at level {level} are {distance} apart (limit {limit})")]
    Separation {
        level: i32,
        a: usize,
        b: usize,
        distance: f64,
        limit: f64,
    },
}

pub type Point2 = [f64; 2];

#[inline]
pub fn dist(a: &Point2, b: &Point2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// One level `C_i` with parent links into level `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub index: i32,
    /// Point indices in `C_i`, in insertion order.
    pub points: Vec<usize>,
    /// Parent of `points[k]` at level `index + 1` (itself when it is there too).
    /// `None` only at the root level.
    pub parents: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverTree {
    pub points: Vec<Point2>,
    /// Multiplicity per input index; zero for collapsed duplicates.
    pub multiplicity: Vec<usize>,
    /// Input index each point was collapsed onto (itself if distinct).
    pub representative: Vec<usize>,
    /// Levels from the root (highest index) downwards.
    pub levels: Vec<Level>,
    /// `ancestors[k][p]`: ancestor of distinct point `p` at `levels[k]`.
    ancestors: Vec<Vec<usize>>,
}

/// A node's region: center point, level and the points below it.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverBall {
    pub center: usize,
    pub level: i32,
    /// Distinct input indices in the node's subtree.
    pub members: Vec<usize>,
}

impl CoverBall {
    /// Cover radius `2^level`.
    pub fn radius(&self) -> f64 {
        2f64.powi(self.level)
    }

    /// Radius of the region attached to the node: `2^(level+1)`, which
    /// contains every descendant.
    pub fn region_radius(&self) -> f64 {
        2f64.powi(self.level + 1)
    }
}

/// Uniform grid for fixed-radius neighbour checks.
struct Grid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(cell: f64) -> Self {
        Self {
            cell,
            buckets: HashMap::new(),
        }
    }

    fn key(&self, p: &Point2) -> (i64, i64) {
        ((p[0] / self.cell).floor() as i64, (p[1] / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: &Point2, id: usize) {
        let k = self.key(p);
        self.buckets.entry(k).or_default().push(id);
    }

    /// Candidates within one cell of `p`; superset of the `cell`-ball.
    fn near<'a>(&'a self, p: &Point2) -> impl Iterator<Item = usize> + 'a {
        let (x, y) = self.key(p);
        (-1..=1).flat_map(move |dx| {
            (-1..=1).flat_map(move |dy| {
                self.buckets
                    .get(&(x + dx, y + dy))
                    .into_iter()
                    .flatten()
                    .copied()
            })
        })
    }
}

impl CoverTree {
    /// Build the tree, inserting points in input order.
    pub fn build(points: &[Point2]) -> Result<Self, CoverTreeError> {
        if points.is_empty() {
            return Err(CoverTreeError::EmptyInput);
        }
        if let Some(i) = points.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(CoverTreeError::NonFinite(i));
        }
        let n = points.len();
        let mut representative = (0..n).collect::<Vec<_>>();
        let mut multiplicity = vec![1usize; n];
        let mut first_seen: HashMap<(u64, u64), usize> = HashMap::with_capacity(n);
        let mut distinct = Vec::with_capacity(n);
        for (i, p) in points.iter().enumerate() {
            // Normalize -0.0 so that equal coordinates hash equally.
            let key = ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits());
            match first_seen.get(&key) {
                Some(&r) => {
                    representative[i] = r;
                    multiplicity[r] += 1;
                    multiplicity[i] = 0;
                }
                None => {
                    first_seen.insert(key, i);
                    distinct.push(i);
                }
            }
        }

        let root = distinct[0];
        let max_d = distinct
            .iter()
            .map(|&i| dist(&points[root], &points[i]))
            .fold(0.0, f64::max);
        // Root level: smallest i with every point strictly within 2^i.
        let mut top = if max_d > 0.0 { max_d.log2().floor() as i32 } else { 0 };
        while 2f64.powi(top) <= max_d {
            top += 1;
        }
        let mut levels = vec![Level {
            index: top,
            points: vec![root],
            parents: vec![None],
        }];
        let mut in_tree = vec![false; n];
        in_tree[root] = true;
        let mut count = 1;
        let mut level = top;

        while count < distinct.len() {
            let prev = levels.last().expect("root level exists");
            let child_level = level - 1;
            let sep = 2f64.powi(child_level);
            let parent_radius = 2f64.powi(level);

            let mut grid = Grid::new(sep);
            let mut cur_points = prev.points.clone();
            for &p in &cur_points {
                grid.insert(&points[p], p);
            }
            for &x in &distinct {
                if in_tree[x] {
                    continue;
                }
                let separated = grid
                    .near(&points[x])
                    .all(|c| dist(&points[x], &points[c]) > sep);
                if separated {
                    grid.insert(&points[x], x);
                    cur_points.push(x);
                }
            }

            // Parents: nearest point of the level above.
            let mut parent_grid = Grid::new(parent_radius);
            for &q in &prev.points {
                parent_grid.insert(&points[q], q);
            }
            let prev_len = prev.points.len();
            let mut parents = Vec::with_capacity(cur_points.len());
            for (k, &p) in cur_points.iter().enumerate() {
                if k < prev_len {
                    parents.push(Some(p));
                    continue;
                }
                let mut best: Option<(f64, usize)> = None;
                for q in parent_grid.near(&points[p]) {
                    let d = dist(&points[p], &points[q]);
                    if best.is_none_or(|(bd, bq)| d < bd || (d == bd && q < bq)) {
                        best = Some((d, q));
                    }
                }
                let (_, q) = best.expect("greedy net keeps every point within 2^i of the level above");
                parents.push(Some(q));
            }
            for &p in &cur_points[prev_len..] {
                in_tree[p] = true;
            }
            count += cur_points.len() - prev_len;
            levels.push(Level {
                index: child_level,
                points: cur_points,
                parents,
            });
            level = child_level;
        }

        let ancestors = Self::compute_ancestors(&levels, n);
        Ok(Self {
            points: points.to_vec(),
            multiplicity,
            representative,
            levels,
            ancestors,
        })
    }

    /// Assemble a tree from explicit levels (root first). Used to test
    /// [`check_axioms`] on hand-built, possibly invalid, trees.
    pub fn from_levels(points: Vec<Point2>, levels: Vec<Level>) -> Self {
        let n = points.len();
        let ancestors = Self::compute_ancestors(&levels, n);
        Self {
            multiplicity: vec![1; n],
            representative: (0..n).collect(),
            points,
            levels,
            ancestors,
        }
    }

    fn compute_ancestors(levels: &[Level], n: usize) -> Vec<Vec<usize>> {
        let mut anc = vec![vec![usize::MAX; n]; levels.len()];
        if levels.is_empty() {
            return anc;
        }
        let bottom = levels.len() - 1;
        for &p in &levels[bottom].points {
            anc[bottom][p] = p;
        }
        for k in (0..bottom).rev() {
            // Parent of each point of level k+1, looked up at level k.
            let parent_of: HashMap<usize, usize> = levels[k + 1]
                .points
                .iter()
                .zip(&levels[k + 1].parents)
                .filter_map(|(&p, par)| par.map(|q| (p, q)))
                .collect();
            for x in 0..n {
                let below = anc[k + 1][x];
                if below != usize::MAX {
                    anc[k][x] = parent_of.get(&below).copied().unwrap_or(usize::MAX);
                }
            }
        }
        anc
    }

    pub fn root_level(&self) -> i32 {
        self.levels[0].index
    }

    pub fn min_level(&self) -> i32 {
        self.levels.last().map_or(self.root_level(), |l| l.index)
    }

    pub fn level(&self, index: i32) -> Option<&Level> {
        let k = self.root_level().checked_sub(index)?;
        usize::try_from(k).ok().and_then(|k| self.levels.get(k))
    }

    /// Indices of distinct points (duplicates collapsed).
    pub fn distinct_points(&self) -> Vec<usize> {
        (0..self.points.len())
            .filter(|&i| self.multiplicity[i] > 0)
            .collect()
    }

    pub fn root(&self) -> CoverBall {
        CoverBall {
            center: self.levels[0].points[0],
            level: self.root_level(),
            members: self.distinct_points(),
        }
    }

    /// Children of `node` one level down; their members partition the
    /// node's members. Leaves (single member or bottom level) have none.
    pub fn descend(&self, node: &CoverBall) -> Vec<CoverBall> {
        if node.members.len() <= 1 || node.level <= self.min_level() {
            return Vec::new();
        }
        let k = (self.root_level() - node.level + 1) as usize;
        let anc = &self.ancestors[k];
        let mut order: Vec<usize> = Vec::new();
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for &m in &node.members {
            let a = anc[m];
            groups
                .entry(a)
                .or_insert_with(|| {
                    order.push(a);
                    Vec::new()
                })
                .push(m);
        }
        // The self-child comes first, then children in point order.
        order.sort_by_key(|&c| (c != node.center, c));
        order
            .into_iter()
            .map(|c| CoverBall {
                center: c,
                level: node.level - 1,
                members: groups.remove(&c).unwrap_or_default(),
            })
            .collect()
    }

    /// Indented text dump, one line per node.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![(self.root(), 0usize)];
        while let Some((node, depth)) = stack.pop() {
            let p = self.points[node.center];
            let _ = writeln!(
                out,
                "{:indent$}{} @ {} ({}, {}) members={}",
                "",
                node.center,
                node.level,
                p[0],
                p[1],
                node.members.len(),
                indent = 2 * depth
            );
            let children = self.descend(&node);
            for c in children.into_iter().rev() {
                stack.push((c, depth + 1));
            }
        }
        out
    }
}

/// Exhaustively verify nesting, covering and separation.
pub fn check_axioms(tree: &CoverTree) -> Result<(), AxiomViolation> {
    for w in tree.levels.windows(2) {
        let (upper, lower) = (&w[0], &w[1]);
        let upper_set: HashMap<usize, ()> = upper.points.iter().map(|&p| (p, ())).collect();
        let lower_set: HashMap<usize, ()> = lower.points.iter().map(|&p| (p, ())).collect();
        if let Some(&p) = upper.points.iter().find(|p| !lower_set.contains_key(p)) {
            return Err(AxiomViolation::Nesting {
                level: upper.index,
                point: p,
            });
        }
        let limit = 2f64.powi(upper.index);
        for (&p, parent) in lower.points.iter().zip(&lower.parents) {
            let ok = parent.is_some_and(|q| {
                upper_set.contains_key(&q) && dist(&tree.points[p], &tree.points[q]) < limit
            });
            if !ok {
                let distance = parent.map_or(f64::INFINITY, |q| dist(&tree.points[p], &tree.points[q]));
                return Err(AxiomViolation::Covering {
                    level: upper.index,
                    point: p,
                    parent: *parent,
                    distance,
                    limit,
                });
            }
        }
    }
    for level in &tree.levels {
        let limit = 2f64.powi(level.index);
        for (i, &a) in level.points.iter().enumerate() {
            for &b in &level.points[i + 1..] {
                let d = dist(&tree.points[a], &tree.points[b]);
                if d <= limit {
                    return Err(AxiomViolation::Separation {
                        level: level.index,
                        a,
                        b,
                        distance: d,
                        limit,
                    });
                }
            }
        }
    }
    Ok(())
}
