//! Evaluation metrics, significance tests, splits and hexagonal binning.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no positive examples")]
    NoPositives,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("zero variance")]
    ZeroVariance,
    #[error("paired differences have zero variance")]
    ZeroVarianceDiff,
    #[error("class {0} has no samples")]
    MissingClass(u8),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Average precision: `Σ_n (R_n − R_{n−1}) P_n` over descending score
/// thresholds. Equal scores share one threshold.
pub fn average_precision(scores: &[f64], truths: &[u8]) -> Result<f64, StatsError> {
    if scores.len() != truths.len() {
        return Err(StatsError::LengthMismatch(scores.len(), truths.len()));
    }
    let positives = truths.iter().filter(|&&t| t == 1).count();
    if positives == 0 {
        return Err(StatsError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if truths[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Sample Pearson correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: x.len() });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Upper-tail probability `P(T_{n−1} > t)`.
    pub p: f64,
    pub df: f64,
}

/// One-tailed paired t-test of `mean(a − b) > 0`.
pub fn paired_t_one_tailed(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: n });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let sd = std_dev(&d);
    let m = mean(&d);
    if sd == 0.0 || sd <= 1e-14 * m.abs() {
        return Err(StatsError::ZeroVarianceDiff);
    }
    let t = m / (sd / (n as f64).sqrt());
    let df = (n - 1) as f64;
    Ok(TTest {
        t,
        p: students_t_sf(t, df),
        df,
    })
}

/// Upper tail of Student's t with `df` degrees of freedom.
pub fn students_t_sf(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    dist.sf(t)
}

/// Per-class proportional split of sample indices. Each class contributes
/// `round(fraction · n_c)` samples to training. Both returned index lists
/// are sorted.
pub fn stratified_split(targets: &[u8], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), StatsError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(StatsError::InvalidParameter(format!("split fraction {fraction} not in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..targets.len()).filter(|&i| targets[i] == class).collect();
        if idx.is_empty() {
            return Err(StatsError::MissingClass(class));
        }
        idx.shuffle(&mut rng);
        let k = (fraction * idx.len() as f64).round() as usize;
        train.extend_from_slice(&idx[..k]);
        valid.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    Ok((train, valid))
}

/// [`stratified_split`] returning ids instead of indices.
pub fn stratified_split_ids(
    ids: &[String],
    targets: &[u8],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>), StatsError> {
    if ids.len() != targets.len() {
        return Err(StatsError::LengthMismatch(ids.len(), targets.len()));
    }
    let (t, v) = stratified_split(targets, fraction, seed)?;
    Ok((
        t.into_iter().map(|i| ids[i].clone()).collect(),
        v.into_iter().map(|i| ids[i].clone()).collect(),
    ))
}

/// Pointy-top hexagonal lattice anchored at the origin with signed counts
/// (stable minus unstable) per hex, keyed by axial coordinates `(q, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HexGrid {
    pub side: f64,
    pub counts: BTreeMap<(i64, i64), i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HexCell {
    pub q: i64,
    pub r: i64,
    pub center_u: f64,
    pub center_v: f64,
    pub signed_count: i64,
    pub log_signed_value: f64,
}

/// `sign(c) · ln(1 + |c|)`.
pub fn signed_log(c: i64) -> f64 {
    (c.signum() as f64) * (c.unsigned_abs() as f64).ln_1p()
}

impl HexGrid {
    /// Axial coordinates of the hex containing `p`.
    pub fn locate(&self, p: [f64; 2]) -> (i64, i64) {
        let s = self.side;
        let qf = (3f64.sqrt() / 3.0 * p[0] - p[1] / 3.0) / s;
        let rf = (2.0 / 3.0 * p[1]) / s;
        cube_round(qf, rf)
    }

    pub fn center(&self, q: i64, r: i64) -> [f64; 2] {
        let s = self.side;
        let (q, r) = (q as f64, r as f64);
        [s * 3f64.sqrt() * (q + r / 2.0), s * 1.5 * r]
    }

    pub fn cells(&self) -> Vec<HexCell> {
        self.counts
            .iter()
            .map(|(&(q, r), &c)| {
                let [u, v] = self.center(q, r);
                HexCell {
                    q,
                    r,
                    center_u: u,
                    center_v: v,
                    signed_count: c,
                    log_signed_value: signed_log(c),
                }
            })
            .collect()
    }
}

fn cube_round(q: f64, r: f64) -> (i64, i64) {
    let s = -q - r;
    let (mut rq, mut rr, rs) = (q.round(), r.round(), s.round());
    let (dq, dr, ds) = ((rq - q).abs(), (rr - r).abs(), (rs - s).abs());
    if dq > dr && dq > ds {
        rq = -rr - rs;
    } else if dr > ds {
        rr = -rq - rs;
    }
    (rq as i64, rr as i64)
}

/// Bin labeled points; target 1 counts +1, target 0 counts −1. Hexes whose
/// contributions cancel are kept with count 0.
pub fn hexbin(points: &[[f64; 2]], targets: &[u8], side: f64) -> Result<HexGrid, StatsError> {
    if points.len() != targets.len() {
        return Err(StatsError::LengthMismatch(points.len(), targets.len()));
    }
    if !(side > 0.0 && side.is_finite()) {
        return Err(StatsError::InvalidParameter(format!("hex side must be positive, got {side}")));
    }
    let mut grid = HexGrid {
        side,
        counts: BTreeMap::new(),
    };
    for (p, &t) in points.iter().zip(targets) {
        let key = grid.locate(*p);
        *grid.counts.entry(key).or_insert(0) += if t == 1 { 1 } else { -1 };
    }
    Ok(grid)
}

/// Default hex side: one fiftieth of the first-coordinate range, or 1 when
/// the range is empty.
pub fn default_hex_side(points: &[[f64; 2]]) -> f64 {
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[0]), hi.max(p[0])));
    let range = hi - lo;
    if range.is_finite() && range > 0.0 {
        range / 50.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn aps_examples() {
        assert_eq!(average_precision(&[0.9, 0.8, 0.1, 0.0], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_abs_diff_eq!(
            average_precision(&[0.9, 0.8, 0.7, 0.6], &[0, 0, 0, 1]).unwrap(),
            0.25,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            average_precision(&[0.9, 0.8, 0.7, 0.6], &[1, 0, 1, 0]).unwrap(),
            0.5 + 0.5 * 2.0 / 3.0,
            epsilon = 1e-12
        );
        assert_eq!(average_precision(&[0.1], &[0]), Err(StatsError::NoPositives));
    }

    #[test]
    fn aps_ties_share_a_threshold() {
        // All tied: one threshold, precision = prevalence.
        assert_abs_diff_eq!(
            average_precision(&[0.5; 4], &[1, 0, 0, 1]).unwrap(),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn aps_monotone_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = 30;
            let s: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let mut t: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            t[0] = 1;
            let g: Vec<f64> = s.iter().map(|x| (3.0 * x).exp() - 7.0).collect();
            assert_abs_diff_eq!(
                average_precision(&s, &t).unwrap(),
                average_precision(&g, &t).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn aps_of_random_scores_near_prevalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200;
        let t: Vec<u8> = (0..n).map(|i| u8::from(i % 4 == 0)).collect();
        for _ in 0..100 {
            let s: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let ap = average_precision(&s, &t).unwrap();
            assert!((ap - 0.25).abs() < 0.15, "{ap}");
        }
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(pearson_r(&x, &x).unwrap(), 1.0, epsilon = 1e-12);
        let y: Vec<f64> = x.iter().map(|v| -2.0 * v + 3.0).collect();
        assert_abs_diff_eq!(pearson_r(&x, &y).unwrap(), -1.0, epsilon = 1e-12);
        // Sxy = 5.5, Sxx = 5, Syy = 8.75, so r = 11/√175.
        assert_abs_diff_eq!(
            pearson_r(&x, &[1.0, 3.0, 2.0, 5.0]).unwrap(),
            11.0 / 175f64.sqrt(),
            epsilon = 1e-12
        );
        assert_eq!(pearson_r(&x, &[1.0; 4]), Err(StatsError::ZeroVariance));
    }

    #[test]
    fn pearson_symmetry_and_affine_invariance() {
        let x = [0.3, 1.7, 2.2, 5.0, 4.1];
        let y = [1.0, 0.5, 2.5, 3.0, 2.0];
        let r = pearson_r(&x, &y).unwrap();
        assert_abs_diff_eq!(pearson_r(&y, &x).unwrap(), r, epsilon = 1e-12);
        let ax: Vec<f64> = x.iter().map(|v| 4.0 * v - 1.0).collect();
        assert_abs_diff_eq!(pearson_r(&ax, &y).unwrap(), r, epsilon = 1e-12);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson_r(&x, &neg).unwrap(), -r, epsilon = 1e-12);
    }

    #[test]
    fn paired_t_examples() {
        let b = [1.0, 2.0, 3.0, 4.0];
        let a: Vec<f64> = b.iter().map(|v| v + 1.0).collect();
        assert_eq!(paired_t_one_tailed(&a, &b), Err(StatsError::ZeroVarianceDiff));

        let mut a2 = b.to_vec();
        a2[2] += 0.5;
        let r = paired_t_one_tailed(&a2, &b).unwrap();
        assert!(r.t.is_finite() && r.p > 0.0 && r.p < 1.0);
    }

    #[test]
    fn paired_t_matches_critical_value() {
        // Differences with mean 1 and unit-free spread tuned so t = 2.262.
        let e = [-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0];
        let sd_e = std_dev(&e);
        let scale = (10f64).sqrt() / (2.262 * sd_e);
        let a: Vec<f64> = e.iter().map(|v| 1.0 + scale * v).collect();
        let r = paired_t_one_tailed(&a, &[0.0; 10]).unwrap();
        assert_abs_diff_eq!(r.t, 2.262, epsilon = 1e-9);
        assert_abs_diff_eq!(r.p, 0.025, epsilon = 1e-3);
    }

    #[test]
    fn near_constant_differences_are_significant() {
        let b: Vec<f64> = (0..5).map(f64::from).collect();
        let a: Vec<f64> = b.iter().enumerate().map(|(i, v)| v + 1.0 + 1e-4 * i as f64).collect();
        assert!(paired_t_one_tailed(&a, &b).unwrap().p < 1e-3);
    }

    #[test]
    fn split_proportions_and_determinism() {
        let t: Vec<u8> = (0..200).map(|i| u8::from(i < 100)).collect();
        let (train, valid) = stratified_split(&t, 0.8, 9).unwrap();
        assert_eq!(train.iter().filter(|&&i| t[i] == 1).count(), 80);
        assert_eq!(train.iter().filter(|&&i| t[i] == 0).count(), 80);
        assert_eq!(valid.len(), 40);
        assert_eq!(stratified_split(&t, 0.8, 9).unwrap(), (train, valid));

        let t: Vec<u8> = (0..10).map(|i| u8::from(i < 5)).collect();
        let (train, valid) = stratified_split(&t, 0.8, 0).unwrap();
        assert_eq!((train.len(), valid.len()), (8, 2));
        assert_eq!(valid.iter().filter(|&&i| t[i] == 1).count(), 1);
        assert_eq!(stratified_split(&[1, 1], 0.8, 0), Err(StatsError::MissingClass(0)));
    }

    #[test]
    fn hexbin_examples() {
        let g = hexbin(&[[0.1, 0.1]], &[1], 1.0).unwrap();
        assert_eq!(g.counts.values().copied().collect::<Vec<_>>(), vec![1]);
        let g = hexbin(&[[0.1, 0.1], [0.12, 0.1]], &[1, 0], 1.0).unwrap();
        assert_eq!(g.counts.len(), 1);
        assert_eq!(g.cells()[0].signed_count, 0);
        let g = hexbin(&[[0.0, 0.0]; 10], &[0; 10], 1.0).unwrap();
        let c = g.cells()[0];
        assert_eq!(c.signed_count, -10);
        assert_abs_diff_eq!(c.log_signed_value, -(11f64.ln()), epsilon = 1e-12);
    }

    #[test]
    fn every_point_lands_in_its_nearest_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<[f64; 2]> = (0..2000)
            .map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
            .collect();
        let t = vec![1u8; pts.len()];
        let g = hexbin(&pts, &t, 0.7).unwrap();
        assert_eq!(g.counts.values().map(|c| c.unsigned_abs()).sum::<u64>(), 2000);
        for p in &pts {
            let (q, r) = g.locate(*p);
            let c = g.center(q, r);
            let d = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
            // Inside a pointy-top hex the distance to its center is at most the side.
            assert!(d <= 0.7 + 1e-9);
            for (dq, dr) in [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)] {
                let o = g.center(q + dq, r + dr);
                let d2 = ((p[0] - o[0]).powi(2) + (p[1] - o[1]).powi(2)).sqrt();
                assert!(d <= d2 + 1e-9);
            }
        }
    }

    #[test]
    fn default_side() {
        assert_abs_diff_eq!(default_hex_side(&[[0.0, 0.0], [5.0, 1.0]]), 0.1, epsilon = 1e-15);
        assert_eq!(default_hex_side(&[]), 1.0);
    }
}
