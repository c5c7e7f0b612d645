//! Incremental regular (weighted Delaunay) triangulation in R³.
//!
//! Bowyer–Watson insertion with a symbolic vertex at infinity: hull facets
//! are stored as infinite cells so points outside the current hull need no
//! bounding box. Points whose power cell is empty (fully dominated by their
//! neighbours) are never inserted and are reported as hidden.
//!
//! Degenerate predicate results are resolved as "no conflict", which amounts
//! to lowering the weight of the point being inserted by an infinitesimal
//! amount. Cavities that would produce flat cells are grown until every new
//! cell is properly oriented.

use std::collections::HashMap;

use super::geometry::{collinear, orient_sign, power_test, P3};
use super::ComplexError;

const INF: u32 = u32::MAX;
const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Cell {
    v: [u32; 4],
    /// `n[i]` is the cell across the face opposite `v[i]`.
    n: [u32; 4],
    alive: bool,
}

impl Cell {
    fn is_infinite(&self) -> bool {
        self.v.contains(&INF)
    }

    fn index_of(&self, v: u32) -> Option<usize> {
        self.v.iter().position(|&x| x == v)
    }
}

/// Finite tetrahedra of a regular triangulation plus the hidden input points.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularTriangulation {
    /// Positively oriented tetrahedra (input indices).
    pub tetrahedra: Vec<[u32; 4]>,
    /// Hull triangles, oriented with the outward normal.
    pub hull: Vec<[u32; 3]>,
    /// Input indices that do not appear as vertices.
    pub hidden: Vec<u32>,
}

struct Triangulator<'a> {
    pts: &'a [P3],
    w: &'a [f64],
    cells: Vec<Cell>,
    free: Vec<u32>,
    last: u32,
    mark: Vec<u32>,
    epoch: u32,
}

fn face_key(cell: &Cell, i: usize) -> [u32; 3] {
    let mut k = [0u32; 3];
    let mut j = 0;
    for (idx, &v) in cell.v.iter().enumerate() {
        if idx != i {
            k[j] = v;
            j += 1;
        }
    }
    k.sort_unstable();
    k
}

impl<'a> Triangulator<'a> {
    fn p(&self, v: u32) -> &P3 {
        &self.pts[v as usize]
    }

    fn alloc(&mut self, cell: Cell) -> u32 {
        if let Some(id) = self.free.pop() {
            self.cells[id as usize] = cell;
            self.mark[id as usize] = 0;
            id
        } else {
            self.cells.push(cell);
            self.mark.push(0);
            (self.cells.len() - 1) as u32
        }
    }

    /// Orientation of `cell` with vertex slot `slot` replaced by `q`.
    /// For cells containing the infinite vertex this is only meaningful when
    /// `slot` holds the infinite vertex.
    fn orient_replaced(&self, cell: &Cell, slot: usize, q: &P3) -> i8 {
        let pt = |i: usize| if i == slot { q } else { self.p(cell.v[i]) };
        orient_sign(pt(0), pt(1), pt(2), pt(3))
    }

    fn finite_conflict(&self, cell: &Cell, p: u32) -> bool {
        let rows = [0, 1, 2, 3].map(|i| (self.p(cell.v[i]), self.w[cell.v[i] as usize]));
        power_test(rows, self.p(p), self.w[p as usize]) > 0
    }

    fn conflict(&self, id: u32, p: u32) -> bool {
        let cell = &self.cells[id as usize];
        match cell.index_of(INF) {
            None => self.finite_conflict(cell, p),
            Some(k) => match self.orient_replaced(cell, k, self.p(p)) {
                1 => true,
                -1 => false,
                _ => {
                    let nb = &self.cells[cell.n[k] as usize];
                    self.finite_conflict(nb, p)
                }
            },
        }
    }

    fn init(pts: &'a [P3], w: &'a [f64], first: [u32; 4]) -> Self {
        let mut t = Triangulator {
            pts,
            w,
            cells: Vec::new(),
            free: Vec::new(),
            last: 0,
            mark: Vec::new(),
            epoch: 0,
        };
        let mut v = first;
        if orient_sign(t.p(v[0]), t.p(v[1]), t.p(v[2]), t.p(v[3])) < 0 {
            v.swap(0, 1);
        }
        let c0 = t.alloc(Cell {
            v,
            n: [NONE; 4],
            alive: true,
        });
        let mut ids = vec![c0];
        for i in 0..4 {
            let mut iv = v;
            iv[i] = INF;
            let (a, b) = match i {
                0 => (1, 2),
                _ => (0, if i == 1 { 2 } else { 1 }),
            };
            iv.swap(a, b);
            let id = t.alloc(Cell {
                v: iv,
                n: [NONE; 4],
                alive: true,
            });
            ids.push(id);
        }
        t.link(&ids);
        t
    }

    /// Pair up faces among `ids` whose neighbours are unset.
    fn link(&mut self, ids: &[u32]) {
        let mut open: HashMap<[u32; 3], (u32, usize)> = HashMap::new();
        for &id in ids {
            for i in 0..4 {
                if self.cells[id as usize].n[i] != NONE {
                    continue;
                }
                let key = face_key(&self.cells[id as usize], i);
                if let Some((other, j)) = open.remove(&key) {
                    self.cells[id as usize].n[i] = other;
                    self.cells[other as usize].n[j] = id;
                } else {
                    open.insert(key, (id, i));
                }
            }
        }
        debug_assert!(open.is_empty(), "unmatched faces after linking");
    }

    /// Visibility walk towards `p`; returns a cell whose conflict status
    /// decides whether `p` is hidden.
    fn locate(&self, p: u32) -> u32 {
        let q = self.p(p);
        let mut cur = self.last;
        if !self.cells[cur as usize].alive {
            cur = self
                .cells
                .iter()
                .position(|c| c.alive)
                .expect("triangulation has live cells") as u32;
        }
        let limit = 4 * self.cells.len() + 64;
        for step in 0..limit {
            let cell = &self.cells[cur as usize];
            if cell.is_infinite() {
                return cur;
            }
            let mut moved = false;
            for k in 0..4 {
                let i = (k + step) % 4;
                if self.orient_replaced(cell, i, q) < 0 {
                    cur = cell.n[i];
                    moved = true;
                    break;
                }
            }
            if !moved {
                return cur;
            }
        }
        // Walk did not settle (degenerate cycling); fall back to a scan.
        self.cells
            .iter()
            .enumerate()
            .position(|(id, c)| c.alive && self.conflict(id as u32, p))
            .map(|id| id as u32)
            .unwrap_or(cur)
    }

    fn find_conflict_start(&self, p: u32) -> Option<u32> {
        let c = self.locate(p);
        if self.conflict(c, p) {
            return Some(c);
        }
        if self.cells[c as usize].is_infinite() {
            // Outside the hull but this facet is not visible; try the others.
            return self
                .cells
                .iter()
                .enumerate()
                .find(|(id, cell)| cell.alive && cell.is_infinite() && self.conflict(*id as u32, p))
                .map(|(id, _)| id as u32);
        }
        None
    }

    fn new_cell_ok(&self, cell: &Cell, slot: usize, p: u32) -> bool {
        let q = self.p(p);
        match cell.index_of(INF) {
            None => self.orient_replaced(cell, slot, q) > 0,
            Some(k) if k == slot => self.orient_replaced(cell, slot, q) > 0,
            Some(k) => {
                let fin: Vec<&P3> = (0..4)
                    .filter(|&i| i != k)
                    .map(|i| if i == slot { q } else { self.p(cell.v[i]) })
                    .collect();
                !collinear(fin[0], fin[1], fin[2])
            }
        }
    }

    /// Insert point `p`. Returns false when `p` is hidden.
    fn insert(&mut self, p: u32) -> bool {
        let Some(start) = self.find_conflict_start(p) else {
            return false;
        };
        self.epoch += 1;
        let epoch = self.epoch;
        let mut cavity = vec![start];
        self.mark[start as usize] = epoch;
        let mut k = 0;
        while k < cavity.len() {
            let c = cavity[k];
            k += 1;
            for i in 0..4 {
                let nb = self.cells[c as usize].n[i];
                if self.mark[nb as usize] != epoch && self.conflict(nb, p) {
                    self.mark[nb as usize] = epoch;
                    cavity.push(nb);
                }
            }
        }

        // Grow the cavity until every boundary facet sees p properly.
        let boundary = loop {
            let mut boundary = Vec::new();
            let mut grow = None;
            'scan: for &c in &cavity {
                for i in 0..4 {
                    let nb = self.cells[c as usize].n[i];
                    if self.mark[nb as usize] == epoch {
                        continue;
                    }
                    if !self.new_cell_ok(&self.cells[c as usize], i, p) {
                        grow = Some(nb);
                        break 'scan;
                    }
                    boundary.push((c, i, nb));
                }
            }
            match grow {
                Some(nb) => {
                    self.mark[nb as usize] = epoch;
                    cavity.push(nb);
                }
                None => break boundary,
            }
        };

        let mut created = Vec::with_capacity(boundary.len());
        for &(c, i, nb) in &boundary {
            let mut v = self.cells[c as usize].v;
            v[i] = p;
            let mut n = [NONE; 4];
            n[i] = nb;
            let id = self.alloc(Cell { v, n, alive: true });
            let back = self.cells[nb as usize]
                .n
                .iter()
                .position(|&x| x == c)
                .expect("neighbour links are symmetric");
            self.cells[nb as usize].n[back] = id;
            created.push(id);
        }
        for &c in &cavity {
            self.cells[c as usize].alive = false;
            self.free.push(c);
        }
        // Freed slots may be reused by `alloc` above only after this point.
        self.link(&created);
        self.last = created
            .iter()
            .copied()
            .find(|&id| !self.cells[id as usize].is_infinite())
            .unwrap_or(created[0]);
        true
    }
}

/// Find four affinely independent points, scanning in input order.
fn initial_simplex(pts: &[P3]) -> Option<[u32; 4]> {
    let a = 0usize;
    let b = (1..pts.len()).find(|&i| pts[i] != pts[a])?;
    let c = (b + 1..pts.len()).find(|&i| !collinear(&pts[a], &pts[b], &pts[i]))?;
    let d = (c + 1..pts.len()).find(|&i| orient_sign(&pts[a], &pts[b], &pts[c], &pts[i]) != 0)?;
    Some([a as u32, b as u32, c as u32, d as u32])
}

/// Regular triangulation of weighted points (weights are squared radii).
pub fn regular_triangulation(
    points: &[P3],
    weights: &[f64],
) -> Result<RegularTriangulation, ComplexError> {
    assert_eq!(points.len(), weights.len());
    if points.is_empty() {
        return Err(ComplexError::EmptyCloud);
    }
    if points.iter().flatten().any(|x| !x.is_finite()) || weights.iter().any(|w| !w.is_finite()) {
        return Err(ComplexError::InvalidParameter("non-finite coordinate or weight".into()));
    }
    let first = initial_simplex(points).ok_or(ComplexError::DegenerateInput)?;
    let mut tri = Triangulator::init(points, weights, first);
    for p in 0..points.len() as u32 {
        if !first.contains(&p) {
            tri.insert(p);
        }
    }

    let mut present = vec![false; points.len()];
    let mut tetrahedra = Vec::new();
    let mut hull = Vec::new();
    for cell in tri.cells.iter().filter(|c| c.alive) {
        match cell.index_of(INF) {
            None => {
                for &v in &cell.v {
                    present[v as usize] = true;
                }
                tetrahedra.push(cell.v);
            }
            Some(k) => {
                // Replacing INF by an outside point is positive, so the
                // remaining triple in cyclic order faces outward.
                let mut tri3 = [0u32; 3];
                let order: [usize; 3] = match k {
                    0 => [1, 3, 2],
                    1 => [0, 2, 3],
                    2 => [0, 3, 1],
                    _ => [0, 1, 2],
                };
                for (slot, &i) in tri3.iter_mut().zip(order.iter()) {
                    *slot = cell.v[i];
                }
                hull.push(tri3);
            }
        }
    }
    let hidden = (0..points.len() as u32)
        .filter(|&v| !present[v as usize])
        .collect();
    tetrahedra.sort_unstable();
    hull.sort_unstable();
    Ok(RegularTriangulation {
        tetrahedra,
        hull,
        hidden,
    })
}
