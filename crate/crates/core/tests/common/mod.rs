//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use topostab::complex::FilteredComplex;
use topostab::persistence::PersistenceDiagram;

/// Rank over Z/2 of a matrix given as rows of column-index sets.
pub fn rank_z2(rows: &[Vec<usize>], n_cols: usize) -> usize {
    let words = n_cols.div_ceil(64).max(1);
    let mut m: Vec<Vec<u64>> = rows
        .iter()
        .map(|r| {
            let mut bits = vec![0u64; words];
            for &c in r {
                bits[c / 64] ^= 1 << (c % 64);
            }
            bits
        })
        .collect();
    let mut rank = 0;
    for col in 0..n_cols {
        let (w, b) = (col / 64, 1u64 << (col % 64));
        let Some(p) = (rank..m.len()).find(|&r| m[r][w] & b != 0) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != rank && row[w] & b != 0 {
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x ^= y;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Pair multiplicities keyed by `(dim, birth index, death index)` into the
/// sorted distinct filtration values; `None` marks an essential class.
pub type Multiplicities = BTreeMap<(usize, usize, Option<usize>), i64>;

/// Persistent Betti numbers from ranks of restricted boundary matrices,
/// then pair multiplicities by inclusion–exclusion.
///
/// `β_k(s,t) = (n_k(s) − rank ∂_k|K_s) − (rank ∂_{k+1}|K_t − rank P_s ∂_{k+1}|K_t)`
/// where `P_s` drops the rows of k-simplices already in `K_s`.
pub fn oracle_multiplicities(fc: &FilteredComplex) -> (Vec<f64>, Multiplicities) {
    let mut values: Vec<f64> = fc.simplices.iter().map(|s| s.value).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let m = values.len();
    let idx_of = |v: f64| values.binary_search_by(|x| x.total_cmp(&v)).unwrap();

    let top = fc.max_dimension;
    // Simplices by dimension with their value index.
    let mut by_dim: Vec<Vec<(Vec<u32>, usize)>> = vec![Vec::new(); top + 2];
    for s in &fc.simplices {
        by_dim[s.simplex.dim()].push((s.simplex.vertices().to_vec(), idx_of(s.value)));
    }
    let position = |d: usize| -> BTreeMap<Vec<u32>, usize> {
        by_dim[d].iter().enumerate().map(|(i, (v, _))| (v.clone(), i)).collect()
    };

    // Rows = faces, entries = indices of cofaces containing them, restricted
    // to cofaces entering by `t` and faces entering after `s` (if given).
    let boundary_rank = |k: usize, t: usize, after: Option<usize>| -> usize {
        if k == 0 || k > top {
            return 0;
        }
        let faces = position(k - 1);
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); by_dim[k - 1].len()];
        for (c, (verts, vi)) in by_dim[k].iter().enumerate() {
            if *vi > t {
                continue;
            }
            for omit in 0..verts.len() {
                let face: Vec<u32> = verts
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != omit)
                    .map(|(_, &v)| v)
                    .collect();
                rows[faces[&face]].push(c);
            }
        }
        let kept: Vec<Vec<usize>> = rows
            .into_iter()
            .enumerate()
            .filter(|(r, _)| after.is_none_or(|s| by_dim[k - 1][*r].1 > s))
            .map(|(_, r)| r)
            .collect();
        rank_z2(&kept, by_dim[k].len())
    };

    let mut beta = vec![vec![vec![0i64; m]; m]; top + 1];
    for k in 0..=top {
        for s in 0..m {
            let n_k = by_dim[k].iter().filter(|(_, v)| *v <= s).count() as i64;
            let z = n_k - boundary_rank(k, s, None) as i64;
            for t in s..m {
                let b = boundary_rank(k + 1, t, None) as i64 - boundary_rank(k + 1, t, Some(s)) as i64;
                beta[k][s][t] = z - b;
            }
        }
    }

    let get = |k: usize, s: isize, t: usize| -> i64 {
        if s < 0 {
            0
        } else {
            beta[k][s as usize][t]
        }
    };
    let mut mult = Multiplicities::new();
    for k in 0..=top {
        for i in 0..m {
            let ii = i as isize;
            for j in i + 1..m {
                let mu = get(k, ii, j - 1) - get(k, ii - 1, j - 1) - get(k, ii, j) + get(k, ii - 1, j);
                if mu != 0 {
                    mult.insert((k, i, Some(j)), mu);
                }
            }
            let ess = get(k, ii, m - 1) - get(k, ii - 1, m - 1);
            if ess != 0 {
                mult.insert((k, i, None), ess);
            }
        }
    }
    (values, mult)
}

/// The same keying applied to diagrams from the reduction.
pub fn diagram_multiplicities(values: &[f64], diagrams: &[PersistenceDiagram]) -> Multiplicities {
    let idx_of = |v: f64| values.binary_search_by(|x| x.total_cmp(&v)).unwrap();
    let mut mult = Multiplicities::new();
    for d in diagrams {
        for p in &d.pairs {
            let death = (!p.death.is_infinite()).then(|| idx_of(p.death));
            *mult.entry((d.dimension, idx_of(p.birth), death)).or_insert(0) += 1;
        }
    }
    mult
}

/// Average precision by enumerating every threshold `τ` among the scores and
/// predicting positive when `score >= τ`.
pub fn aps_by_threshold_enumeration(scores: &[f64], truths: &[u8]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let positives = truths.iter().filter(|&&t| t == 1).count() as f64;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for tau in thresholds {
        let (mut tp, mut fp) = (0.0, 0.0);
        for (s, &t) in scores.iter().zip(truths) {
            if *s >= tau {
                if t == 1 {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
            }
        }
        let recall = tp / positives;
        ap += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
    }
    ap
}

/// Brute-force cover-tree axioms: nesting, covering by some point one level
/// up (distance `< 2^(i+1)`), separation (`> 2^i`), a single root and a
/// bottom level holding every distinct point.
pub fn cover_tree_violations(tree: &topostab::covertree::CoverTree) -> Vec<String> {
    use topostab::covertree::dist;
    let mut out = Vec::new();
    let levels = &tree.levels;
    if levels.first().map(|l| l.points.len()) != Some(1) {
        out.push("root level does not hold exactly one point".into());
    }
    let mut distinct: Vec<usize> = (0..tree.points.len()).filter(|&i| tree.multiplicity[i] > 0).collect();
    let mut bottom = levels.last().map(|l| l.points.clone()).unwrap_or_default();
    distinct.sort_unstable();
    bottom.sort_unstable();
    if distinct != bottom {
        out.push("bottom level is not the set of distinct points".into());
    }
    for w in levels.windows(2) {
        let (upper, lower) = (&w[0], &w[1]);
        if upper.index != lower.index + 1 {
            out.push(format!("levels {} and {} are not consecutive", upper.index, lower.index));
        }
        for p in &upper.points {
            if !lower.points.contains(p) {
                out.push(format!("nesting: {p} at level {} missing below", upper.index));
            }
        }
        let limit = 2f64.powi(upper.index);
        for &p in &lower.points {
            if !upper.points.iter().any(|&q| dist(&tree.points[p], &tree.points[q]) < limit) {
                out.push(format!("covering: {p} at level {} has no cover", lower.index));
            }
        }
    }
    for level in levels {
        let limit = 2f64.powi(level.index);
        for (i, &a) in level.points.iter().enumerate() {
            for &b in &level.points[i + 1..] {
                if dist(&tree.points[a], &tree.points[b]) <= limit {
                    out.push(format!("separation: {a},{b} at level {}", level.index));
                }
            }
        }
    }
    out
}

pub struct Fixture {
    pub diagrams_csv: std::path::PathBuf,
    pub scores_csv: std::path::PathBuf,
    pub ids: Vec<String>,
    pub diagrams: Vec<PersistenceDiagram>,
}

/// Noisy spheres (unstable) and figure-8s (stable) written as a diagrams CSV
/// and a scores CSV under `dir`.
pub fn synthetic_fixture(dir: &std::path::Path, n_per_class: usize, n_points: usize, seed: u64) -> Fixture {
    use topostab::pipeline::{cloud_diagrams, FiltrationConfig};
    use topostab::synth::{generate, SynthSpec};
    let samples = generate(&SynthSpec {
        n_sphere: n_per_class,
        n_figure8: n_per_class,
        n_points,
        noise: 0.05,
        seed,
    })
    .unwrap();
    let mut diagrams = Vec::new();
    let mut scores = String::from("id,score\n");
    let mut ids = Vec::new();
    for s in &samples {
        diagrams.extend(cloud_diagrams(&s.cloud, &FiltrationConfig::WeightedAlpha, &[0, 1, 2], &s.id).unwrap());
        scores.push_str(&format!("{},{}\n", s.id, s.shape.score()));
        ids.push(s.id.clone());
    }
    let diagrams_csv = dir.join("diagrams.csv");
    let scores_csv = dir.join("scores.csv");
    let mut buf = Vec::new();
    topostab::io::write_diagrams_csv(&mut buf, &diagrams).unwrap();
    std::fs::write(&diagrams_csv, buf).unwrap();
    std::fs::write(&scores_csv, scores).unwrap();
    Fixture {
        diagrams_csv,
        scores_csv,
        ids,
        diagrams,
    }
}

/// A small, fast pipeline config around `input` (JSON object).
pub fn small_config(input: serde_json::Value, seed: u64) -> topostab::pipeline::PipelineConfig {
    let v = serde_json::json!({
        "input": input,
        "n_repeats": 2,
        "seed": seed,
        "forest": {
            "n_iter": 3,
            "k_folds": 3,
            "search_space": { "n_trees": [10, 30] }
        }
    });
    topostab::pipeline::PipelineConfig::from_json(&v.to_string()).unwrap()
}
