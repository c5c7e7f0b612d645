//! Floating-point predicates and orthogonal balls for weighted points.
//!
//! Weights are power weights (squared radii). Predicates treat results whose
//! magnitude is below `PREDICATE_TOL` times a Hadamard-style scale bound as
//! degenerate; callers resolve degeneracies with a fixed tie-breaking rule.

pub(crate) const PREDICATE_TOL: f64 = 1e-10;

pub(crate) type P3 = [f64; 3];

#[inline]
pub(crate) fn sub(a: &P3, b: &P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: &P3, b: &P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: &P3, b: &P3) -> P3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm(a: &P3) -> f64 {
    dot(a, a).sqrt()
}

/// `det[b - a, c - a, d - a]`; positive for a right-handed tetrahedron.
pub fn orient3d(a: &P3, b: &P3, c: &P3, d: &P3) -> f64 {
    let u = sub(b, a);
    let v = sub(c, a);
    let w = sub(d, a);
    dot(&u, &cross(&v, &w))
}

/// Sign of `orient3d` with relative tolerance: -1, 0 or 1.
pub(crate) fn orient_sign(a: &P3, b: &P3, c: &P3, d: &P3) -> i8 {
    let u = sub(b, a);
    let v = sub(c, a);
    let w = sub(d, a);
    let det = dot(&u, &cross(&v, &w));
    let scale = norm(&u) * norm(&v) * norm(&w);
    if det.abs() <= PREDICATE_TOL * scale {
        0
    } else if det > 0.0 {
        1
    } else {
        -1
    }
}

/// True when `a`, `b`, `c` are collinear within tolerance.
pub(crate) fn collinear(a: &P3, b: &P3, c: &P3) -> bool {
    let u = sub(b, a);
    let v = sub(c, a);
    norm(&cross(&u, &v)) <= PREDICATE_TOL * norm(&u) * norm(&v)
}

fn det4(m: &[[f64; 4]; 4]) -> f64 {
    let s0 = m[0][0] * m[1][1] - m[1][0] * m[0][1];
    let s1 = m[0][0] * m[1][2] - m[1][0] * m[0][2];
    let s2 = m[0][0] * m[1][3] - m[1][0] * m[0][3];
    let s3 = m[0][1] * m[1][2] - m[1][1] * m[0][2];
    let s4 = m[0][1] * m[1][3] - m[1][1] * m[0][3];
    let s5 = m[0][2] * m[1][3] - m[1][2] * m[0][3];
    let c5 = m[2][2] * m[3][3] - m[3][2] * m[2][3];
    let c4 = m[2][1] * m[3][3] - m[3][1] * m[2][3];
    let c3 = m[2][1] * m[3][2] - m[3][1] * m[2][2];
    let c2 = m[2][0] * m[3][3] - m[3][0] * m[2][3];
    let c1 = m[2][0] * m[3][2] - m[3][0] * m[2][2];
    let c0 = m[2][0] * m[3][1] - m[3][0] * m[2][1];
    s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0
}

/// Power test of weighted point `(p, wp)` against the orthogonal sphere of a
/// positively oriented weighted tetrahedron.
///
/// Returns 1 when `p` is in conflict (its power distance to the orthosphere
/// is negative), -1 when strictly outside and 0 when degenerate.
pub(crate) fn power_test(tet: [(&P3, f64); 4], p: &P3, wp: f64) -> i8 {
    let mut m = [[0.0; 4]; 4];
    let mut scale = 1.0;
    for (row, (x, w)) in m.iter_mut().zip(tet.iter()) {
        let y = sub(x, p);
        let h = dot(&y, &y) - w + wp;
        *row = [y[0], y[1], y[2], h];
        scale *= (dot(&y, &y) + h * h).sqrt();
    }
    let det = det4(&m);
    if det.abs() <= PREDICATE_TOL * scale {
        0
    } else if det < 0.0 {
        1
    } else {
        -1
    }
}

/// Smallest ball orthogonal to every weighted vertex of a simplex, centered
/// in the simplex's affine hull. `radius2` is the squared radius in the
/// power-distance convention and may be negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthoBall {
    pub center: P3,
    pub radius2: f64,
}

impl OrthoBall {
    /// Power distance of a weighted point to the ball; negative means inside.
    pub fn power(&self, p: &P3, weight: f64) -> f64 {
        let d = sub(p, &self.center);
        dot(&d, &d) - weight - self.radius2
    }
}

/// Orthoball of up to four weighted points (weights are squared radii).
///
/// Returns `None` when the vertices are affinely dependent.
pub fn smallest_orthoball(points: &[P3], weights: &[f64]) -> Option<OrthoBall> {
    let k = points.len().checked_sub(1)?;
    assert!(k <= 3 && weights.len() == points.len());
    let p0 = points[0];
    let w0 = weights[0];
    if k == 0 {
        return Some(OrthoBall {
            center: p0,
            radius2: -w0,
        });
    }
    // The center is p0 + e with 2 u_j·e = |u_j|² − w_j + w0 for u_j = p_j − p0,
    // e in the span of the u_j. Closed forms keep slivers well conditioned.
    let u: Vec<P3> = points[1..].iter().map(|p| sub(p, &p0)).collect();
    let r: Vec<f64> = (0..k)
        .map(|j| 0.5 * (dot(&u[j], &u[j]) - weights[j + 1] + w0))
        .collect();
    let e = match k {
        1 => {
            let uu = dot(&u[0], &u[0]);
            if uu == 0.0 {
                return None;
            }
            scale(&u[0], r[0] / uu)
        }
        2 => {
            // e = λ1 a + λ2 b solving the 2×2 Gram system, det = |a × b|².
            let (a, b) = (&u[0], &u[1]);
            let n = cross(a, b);
            let det = dot(&n, &n);
            if det == 0.0 {
                return None;
            }
            let (aa, ab, bb) = (dot(a, a), dot(a, b), dot(b, b));
            let l1 = (r[0] * bb - r[1] * ab) / det;
            let l2 = (r[1] * aa - r[0] * ab) / det;
            add(&scale(a, l1), &scale(b, l2))
        }
        _ => {
            let det = dot(&u[0], &cross(&u[1], &u[2]));
            if det == 0.0 {
                return None;
            }
            let sum = add(
                &add(&scale(&cross(&u[1], &u[2]), r[0]), &scale(&cross(&u[2], &u[0]), r[1])),
                &scale(&cross(&u[0], &u[1]), r[2]),
            );
            scale(&sum, 1.0 / det)
        }
    };
    if e.iter().any(|x| !x.is_finite()) {
        return None;
    }
    Some(OrthoBall {
        center: add(&p0, &e),
        radius2: dot(&e, &e) - w0,
    })
}

#[inline]
fn add(a: &P3, b: &P3) -> P3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
fn scale(a: &P3, f: f64) -> P3 {
    [a[0] * f, a[1] * f, a[2] * f]
}
