mod common;

use proptest::prelude::*;

use common::{aps_by_threshold_enumeration, cover_tree_violations};
use topostab::cder::{self, assign_weights, CderParams, GaussianCoordinate};
use topostab::covertree::{CoverTree, Point2};
use topostab::forest::{self, Dataset, HyperParams, MaxFeatures, RandomForest};
use topostab::stats::{
    average_precision, hexbin, paired_t_one_tailed, pearson_r, stratified_split, students_t_sf,
};

fn scores_and_truths() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..6).prop_map(f64::from), n),
            prop::collection::vec(0u8..=1, n),
        )
            .prop_filter("needs a positive", |(_, t)| t.contains(&1))
    })
}

/// Upper tail of Student's t by composite Simpson integration of the density.
fn t_sf_by_quadrature(t: f64, df: f64) -> f64 {
    let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    let pdf = |x: f64| (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
    // Integrate from 0 to |t| and use symmetry.
    let n = 20_000;
    let h = t.abs() / n as f64;
    let mut s = pdf(0.0) + pdf(t.abs());
    for i in 1..n {
        s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let half = s * h / 3.0;
    if t >= 0.0 {
        0.5 - half
    } else {
        0.5 + half
    }
}

/// Lanczos approximation, accurate to ~1e-15 for positive arguments.
fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

#[test]
fn student_t_tail_matches_quadrature() {
    for &(t, df) in &[(0.0, 3.0), (1.0, 4.0), (2.5, 9.0), (-1.3, 5.0), (4.0, 2.0), (0.7, 30.0)] {
        let got = students_t_sf(t, df);
        let want = t_sf_by_quadrature(t, df);
        assert!((got - want).abs() < 1e-9, "t={t} df={df}: {got} vs {want}");
    }
}

#[test]
fn paired_t_on_hand_computed_differences() {
    // Differences 1, 2, 3, 4: mean 2.5, sd √(5/3), t = 2.5 / (√(5/3) / 2).
    let a = [2.0, 4.0, 6.0, 8.0];
    let b = [1.0, 2.0, 3.0, 4.0];
    let r = paired_t_one_tailed(&a, &b).unwrap();
    let t = 2.5 / ((5.0f64 / 3.0).sqrt() / 2.0);
    assert!((r.t - t).abs() < 1e-12);
    assert_eq!(r.df, 3.0);
    assert!((r.p - t_sf_by_quadrature(t, 3.0)).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn aps_matches_threshold_enumeration((scores, truths) in scores_and_truths()) {
        let got = average_precision(&scores, &truths).unwrap();
        let want = aps_by_threshold_enumeration(&scores, &truths);
        prop_assert!((got - want).abs() < 1e-12, "{} vs {}", got, want);
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn aps_is_invariant_under_increasing_maps((scores, truths) in scores_and_truths()) {
        let mapped: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() + 3.0).collect();
        let a = average_precision(&scores, &truths).unwrap();
        let b = average_precision(&mapped, &truths).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn pearson_is_bounded_and_affine_invariant(
        xy in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..50),
        scale in 0.1f64..5.0,
        shift in -5.0f64..5.0,
    ) {
        let x: Vec<f64> = xy.iter().map(|p| p.0).collect();
        let y: Vec<f64> = xy.iter().map(|p| p.1).collect();
        if let Ok(r) = pearson_r(&x, &y) {
            prop_assert!(r.abs() <= 1.0 + 1e-12);
            let x2: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
            let r2 = pearson_r(&x2, &y).unwrap();
            prop_assert!((r - r2).abs() < 1e-9);
        }
    }

    #[test]
    fn stratified_split_partitions_each_class(
        targets in prop::collection::vec(0u8..=1, 2..80)
            .prop_filter("both classes", |t| t.contains(&0) && t.contains(&1)),
        fraction in 0.1f64..0.9,
        seed in any::<u64>(),
    ) {
        let (train, valid) = stratified_split(&targets, fraction, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&valid).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..targets.len()).collect::<Vec<_>>());
        for class in [0u8, 1] {
            let n_c = targets.iter().filter(|&&t| t == class).count();
            let in_train = train.iter().filter(|&&i| targets[i] == class).count();
            prop_assert_eq!(in_train, (fraction * n_c as f64).round() as usize);
        }
        prop_assert_eq!(stratified_split(&targets, fraction, seed).unwrap(), (train, valid));
    }

    #[test]
    fn hexbin_conserves_signed_mass_and_locates_nearby(
        pts in prop::collection::vec((prop::array::uniform2(-5.0f64..5.0), 0u8..=1), 1..60),
        side in 0.1f64..2.0,
    ) {
        let points: Vec<[f64; 2]> = pts.iter().map(|p| p.0).collect();
        let targets: Vec<u8> = pts.iter().map(|p| p.1).collect();
        let grid = hexbin(&points, &targets, side).unwrap();
        let signed: i64 = targets.iter().map(|&t| if t == 1 { 1 } else { -1 }).sum();
        prop_assert_eq!(grid.counts.values().sum::<i64>(), signed);
        for p in &points {
            let (q, r) = grid.locate(*p);
            let c = grid.center(q, r);
            let d = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
            // Every point of a hexagon is within one side length of its center.
            prop_assert!(d <= side * (1.0 + 1e-9));
        }
    }

    #[test]
    fn cover_tree_axioms_hold(
        pts in prop::collection::vec(prop::array::uniform2(-50.0f64..50.0), 1..120),
        dup in prop::collection::vec(0usize..120, 0..10),
    ) {
        let mut points = pts.clone();
        for d in dup {
            points.push(pts[d % pts.len()]);
        }
        let tree = CoverTree::build(&points).unwrap();
        prop_assert_eq!(cover_tree_violations(&tree), Vec::<String>::new());
        prop_assert_eq!(tree.multiplicity.iter().sum::<usize>(), points.len());
    }

    #[test]
    fn cder_weights_sum_to_one(
        clouds in prop::collection::vec(
            (prop::collection::vec(prop::array::uniform2(0.0f64..3.0), 1..15), 0usize..3),
            3..20,
        ),
    ) {
        let mut labels: Vec<usize> = clouds.iter().map(|c| c.1).collect();
        let n = labels.len();
        labels[n - 3..].copy_from_slice(&[0, 1, 2]);
        let pts: Vec<Vec<Point2>> = clouds.into_iter().map(|c| c.0).collect();
        let set = assign_weights(pts, &labels, 3).unwrap();
        prop_assert!((set.total_weight() - 1.0).abs() < 1e-12);
        for l in 0..3 {
            let class: f64 = set.clouds.iter().zip(&set.labels).zip(&set.point_weight)
                .filter(|((_, &lab), _)| lab == l)
                .map(|((c, _), w)| c.len() as f64 * w)
                .sum();
            prop_assert!((class - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cder_coordinates_are_valid_and_deterministic(
        a in prop::collection::vec(prop::collection::vec(prop::array::uniform2(0.0f64..1.0), 1..20), 2..6),
        b in prop::collection::vec(prop::collection::vec(prop::array::uniform2(3.0f64..4.0), 1..20), 2..6),
    ) {
        let labels: Vec<usize> = a.iter().map(|_| 0).chain(b.iter().map(|_| 1)).collect();
        let clouds: Vec<Vec<Point2>> = a.into_iter().chain(b).collect();
        let set = assign_weights(clouds.clone(), &labels, 2).unwrap();
        let params = CderParams::default();
        let coords = cder::fit(&set, &params).unwrap();
        prop_assert!(!coords.is_empty());
        let labels_seen: std::collections::BTreeSet<usize> = coords.iter().map(|g| g.label).collect();
        prop_assert_eq!(labels_seen.len(), 2);
        for g in &coords {
            let GaussianCoordinate { cov, .. } = g;
            prop_assert!(cov[0][0] > 0.0 && cov[1][1] > 0.0);
            prop_assert!(cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0] > 0.0);
            prop_assert!((g.eval(&g.mean) - 1.0).abs() < 1e-12);
        }
        for c in &clouds {
            for v in cder::evaluate(&coords, c) {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
        prop_assert_eq!(cder::fit(&assign_weights(clouds, &labels, 2).unwrap(), &params).unwrap(), coords);
    }
}

#[test]
fn empty_clouds_count_but_carry_no_mass() {
    let clouds = vec![vec![[0.0, 0.0]], vec![], vec![[1.0, 1.0], [2.0, 2.0]]];
    let set = assign_weights(clouds, &[0, 0, 1], 2).unwrap();
    assert_eq!(set.point_weight, vec![0.25, 0.0, 0.25]);
    assert!((set.total_weight() - 0.75).abs() < 1e-15);
}

fn forest_data(seed: u64, n: usize) -> Dataset {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let c = (i % 2) as u8;
        x.push(vec![
            rng.random::<f64>() + c as f64 * 0.8,
            rng.random::<f64>(),
            rng.random::<f64>() - c as f64 * 0.3,
        ]);
        y.push(c);
    }
    Dataset::from_matrix(x, y).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forest_invariants(
        seed in any::<u64>(),
        n_trees in 1usize..12,
        depth in prop::option::of(1usize..6),
        leaf in 1usize..4,
        mf in prop::sample::select(vec![MaxFeatures::Sqrt, MaxFeatures::Log2, MaxFeatures::All]),
        bootstrap in any::<bool>(),
    ) {
        let data = forest_data(seed, 60);
        let hp = HyperParams { n_trees, max_depth: depth, min_samples_leaf: leaf, max_features: mf, bootstrap };
        let rf = forest::fit(&data, &hp, seed).unwrap();
        let p = rf.predict_proba(&data.x).unwrap();
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(&forest::fit(&data, &hp, seed).unwrap(), &rf);
        let back = RandomForest::from_json(&rf.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.predict_proba(&data.x).unwrap(), p);
        if let Some(d) = depth {
            prop_assert!(rf.trees.iter().all(|t| t.depth() <= d));
        }
        let imp = rf.mdi_importance();
        let total: f64 = imp.values.iter().sum();
        prop_assert!(imp.values.iter().all(|v| *v >= 0.0));
        prop_assert!((total - 1.0).abs() < 1e-9 || total == 0.0);
    }
}
