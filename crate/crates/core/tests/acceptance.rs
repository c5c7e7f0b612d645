//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;
use tempfile::TempDir;

use common::{
    aps_by_threshold_enumeration, cover_tree_violations, diagram_multiplicities, oracle_multiplicities,
    synthetic_fixture,
};
use topostab::cder::{assign_weights, entropy};
use topostab::complex::{build_rips, build_weighted_alpha};
use topostab::covertree::{CoverTree, Point2};
use topostab::pdb_ingest::{self, AtomRecord, WeightedPointCloud};
use topostab::persistence::{reduce, PersistenceDiagram};
use topostab::pipeline::{cder_features, fit_cder_model, load_corpus, run_pipeline, FeatureSet, PipelineConfig};
use topostab::stats::{average_precision, paired_t_one_tailed, pearson_r};
use topostab::synth::sample_sphere;

/// Result of one criterion: pass flag and a one-line detail.
type Outcome = (bool, String);

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 3]> {
    (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect()
}

fn persistences(diagrams: &[PersistenceDiagram], dim: usize) -> Vec<f64> {
    let mut p: Vec<f64> = diagrams
        .iter()
        .filter(|d| d.dimension == dim)
        .flat_map(|d| d.pairs.iter().map(|p| p.death - p.birth))
        .collect();
    p.sort_by(|a, b| b.total_cmp(a));
    p
}

fn shapes_config(seed: u64, feature_sets: &[FeatureSet], sme_csv: Option<&Path>) -> PipelineConfig {
    let mut input = json!({ "kind": "synthetic", "n_per_class": 50, "n_points": 300, "noise": 0.05 });
    if let Some(p) = sme_csv {
        input["sme_csv"] = json!(p);
    }
    let mut cfg = PipelineConfig::from_json(&json!({ "input": input, "n_repeats": 1, "seed": seed }).to_string())
        .expect("valid config");
    cfg.feature_sets = feature_sets.to_vec();
    cfg
}

/// 200 random Rips clouds of at most 8 points in R³ against the rank oracle.
fn c1_persistence_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut matched = 0;
    let mut first_failure = None;
    for trial in 0..200 {
        let n = rng.random_range(2..=8);
        let cloud = random_cloud(&mut rng, n);
        let scale = rng.random_range(0.3..2.0);
        let fc = build_rips(&cloud, scale, 3).expect("rips");
        let (values, expected) = oracle_multiplicities(&fc);
        let got = diagram_multiplicities(&values, &reduce(&fc).expect("reduce"));
        if got == expected {
            matched += 1;
        } else if first_failure.is_none() {
            first_failure = Some(trial);
        }
    }
    let elapsed = start.elapsed();
    let pass = matched == 200 && elapsed < Duration::from_secs(30);
    (
        pass,
        format!("{matched}/200 clouds match exactly, first mismatch {first_failure:?}, {}", secs(elapsed)),
    )
}

/// Circle under Rips: one long H₁ bar. Sphere under alpha: one dominant H₂ bar.
fn c2_known_topology() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let circle: Vec<[f64; 2]> = (0..100)
        .map(|_| {
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            [t.cos(), t.sin()]
        })
        .collect();
    // Scale 1.8 exceeds √3, where the inscribed triangles fill the loop.
    let rips = reduce(&build_rips(&circle, 1.8, 2).expect("rips")).expect("reduce");
    let h1 = persistences(&rips, 1);
    let long = h1.iter().filter(|&&p| p > 0.5).count();
    let rest_max = h1.iter().copied().filter(|&p| p <= 0.5).fold(0.0, f64::max);
    let circle_ok = long == 1 && h1.iter().all(|&p| p > 0.5 || p < 0.1);

    let sphere = sample_sphere(200, 0.0, &mut ChaCha8Rng::seed_from_u64(8)).expect("sphere");
    let alpha = reduce(&build_weighted_alpha(&WeightedPointCloud::unweighted(sphere)).expect("alpha")).expect("reduce");
    let h2 = persistences(&alpha, 2);
    let (first, second) = (h2.first().copied().unwrap_or(0.0), h2.get(1).copied().unwrap_or(0.0));
    let sphere_ok = first > 5.0 * second && first > 0.0;
    let elapsed = start.elapsed();
    (
        circle_ok && sphere_ok && elapsed < Duration::from_secs(60),
        format!(
            "circle: {long} H1 bar > 0.5 (max {:.3}), next largest {rest_max:.4}; \
             sphere: top H2 {first:.4} vs second {second:.2e} ({:.0}x); {}",
            h1.first().copied().unwrap_or(0.0),
            if second > 0.0 { first / second } else { f64::INFINITY },
            secs(elapsed)
        ),
    )
}

/// Fig.-1 toy pipeline, CDER features only, five seeds.
fn c3_shape_pipeline(out: &Path) -> Outcome {
    let start = Instant::now();
    let mut aps = Vec::new();
    for seed in SEEDS {
        let run = run_pipeline(&shapes_config(seed, &[FeatureSet::Cder], None), out).expect("pipeline");
        aps.push(run.report.summary(FeatureSet::Cder).expect("cder").aps[0]);
    }
    let elapsed = start.elapsed();
    let min = aps.iter().copied().fold(f64::INFINITY, f64::min);
    (
        min >= 0.95 && elapsed < Duration::from_secs(600),
        format!("validation APS per seed {aps:.3?}, min {min:.3} (need >= 0.95), {}", secs(elapsed)),
    )
}

/// Entropy values and total training weight.
fn c4_entropy() -> Outcome {
    let oracle = |p: &[f64]| -> f64 {
        let l = p.len() as f64;
        -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln() / l.ln()).sum::<f64>()
    };
    let balanced = [entropy(&[0.5, 0.5]), entropy(&[2.0, 2.0, 2.0]), entropy(&[0.1; 5])];
    let pure = [entropy(&[1.0, 0.0]), entropy(&[0.0, 0.0, 3.0])];
    let skew = entropy(&[0.75, 0.25]);
    let mut worst_weight = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let n_labels = rng.random_range(2..=4);
        let n = rng.random_range(n_labels..40);
        let labels: Vec<usize> = (0..n).map(|i| if i < n_labels { i } else { rng.random_range(0..n_labels) }).collect();
        let clouds: Vec<Vec<Point2>> = (0..n)
            .map(|_| (0..rng.random_range(1..30)).map(|_| [rng.random(), rng.random()]).collect())
            .collect();
        let set = assign_weights(clouds, &labels, n_labels).expect("weights");
        worst_weight = worst_weight.max((set.total_weight() - 1.0).abs());
    }
    let pass = balanced.iter().all(|s| (s - 1.0).abs() < 1e-12)
        && pure.iter().all(|&s| s == 0.0)
        && (skew - 0.811278).abs() < 1e-6
        && (skew - oracle(&[0.75, 0.25])).abs() < 1e-12
        && worst_weight <= 1e-12;
    (
        pass,
        format!(
            "balanced {balanced:?}, pure {pure:?}, S(0.75,0.25) = {skew:.9}, \
             max |total weight - 1| = {worst_weight:.1e} over 50 sets"
        ),
    )
}

/// Cover-tree axioms checked exhaustively.
fn c5_cover_tree() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = 0;
    let mut largest = 0;
    for k in 0..50 {
        let n = 20 * (k + 1);
        let spread = 10f64.powi(rng.random_range(-2..3));
        let points: Vec<Point2> = (0..n).map(|_| [rng.random::<f64>() * spread, rng.random::<f64>() * spread]).collect();
        let tree = CoverTree::build(&points).expect("tree");
        violations += cover_tree_violations(&tree).len();
        largest = largest.max(n);
    }
    (
        violations == 0,
        format!("{violations} violations over 50 sets of up to {largest} points, {}", secs(start.elapsed())),
    )
}

/// APS, paired t and Pearson examples.
fn c6_statistics() -> Outcome {
    let aps_cases: [(&[f64], &[u8], f64); 3] = [
        (&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0], 1.0),
        (&[0.9, 0.8, 0.7, 0.1], &[0, 0, 0, 1], 0.25),
        (&[0.9, 0.8, 0.7, 0.6], &[1, 0, 1, 0], 0.8333),
    ];
    let mut aps_ok = true;
    let mut aps_vals = Vec::new();
    for (s, t, want) in aps_cases {
        let got = average_precision(s, t).expect("aps");
        aps_ok &= (got - aps_by_threshold_enumeration(s, t)).abs() < 1e-4 && (got - want).abs() < 1e-4;
        aps_vals.push(got);
    }

    // Differences with mean m and sample sd s give t = m / (s / √10) = 2.262.
    let e: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let sd = (10.0f64 / 9.0).sqrt();
    let m = 2.262 * sd / 10f64.sqrt();
    let b = vec![0.0; 10];
    let a: Vec<f64> = e.iter().map(|x| x + m).collect();
    let tt = paired_t_one_tailed(&a, &b).expect("t-test");
    let t_ok = (tt.t - 2.262).abs() < 1e-9 && (tt.p - 0.025).abs() <= 0.001;

    let x = [1.0, 2.0, 3.0, 4.0];
    let exact = 11.0 / 175f64.sqrt();
    let r_id = pearson_r(&x, &x).expect("r");
    let r_neg = pearson_r(&x, &x.map(|v| -2.0 * v + 3.0)).expect("r");
    let r_ex = pearson_r(&x, &[1.0, 3.0, 2.0, 5.0]).expect("r");
    let r_ok = (r_id - 1.0).abs() < 5e-3 && (r_neg + 1.0).abs() < 5e-3 && (r_ex - exact).abs() < 5e-3;
    (
        aps_ok && t_ok && r_ok,
        format!(
            "APS {aps_vals:.4?}; paired t = {:.3}, p = {:.4} (expected 0.025); \
             r = {r_id:.3}, {r_neg:.3}, {r_ex:.4} vs exact 11/sqrt(175) = {exact:.4} \
             (0.80 differs by {:.3}; exact value used)",
            tt.t,
            tt.p,
            exact - 0.80
        ),
    )
}

/// SME proxy: 3 noisy copies of full-data CDER features plus 7 noise columns.
fn c7_sme_proxy(work: &Path) -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in SEEDS {
        let base = shapes_config(seed, &[FeatureSet::Cder], None);
        let corpus = load_corpus(&base).expect("corpus");
        let all: Vec<usize> = (0..corpus.len()).collect();
        let model = fit_cder_model(&corpus, &all, &base.cder, base.seed).expect("cder");
        let names = model.feature_names();
        let rows = cder_features(&model, &corpus).expect("features");
        let sd = |k: usize| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            topostab::stats::std_dev(&col)
        };
        let planted: Vec<usize> = (0..names.len()).filter(|&k| sd(k) > 1e-6).take(3).collect();
        assert_eq!(planted.len(), 3, "need three non-constant CDER features");

        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let unit = Normal::new(0.0, 1.0).expect("normal");
        let mut csv = String::from("id");
        for j in 0..3 {
            csv.push_str(&format!(",copy{j}"));
        }
        for j in 0..7 {
            csv.push_str(&format!(",noise{j}"));
        }
        csv.push('\n');
        for (id, row) in corpus.ids.iter().zip(&rows) {
            csv.push_str(id);
            for &k in &planted {
                csv.push_str(&format!(",{}", row[k] + 0.25 * sd(k) * unit.sample(&mut rng)));
            }
            for _ in 0..7 {
                csv.push_str(&format!(",{}", unit.sample(&mut rng)));
            }
            csv.push('\n');
        }
        let sme_path = work.join(format!("sme_seed{seed}.csv"));
        fs::write(&sme_path, csv).expect("write sme");

        let cfg = shapes_config(seed, &[FeatureSet::Sme, FeatureSet::Cder, FeatureSet::CderSme], Some(&sme_path));
        let run = run_pipeline(&cfg, &work.join("runs")).expect("pipeline");
        let cder = run.report.summary(FeatureSet::Cder).expect("cder").mean_aps;
        let both = run.report.summary(FeatureSet::CderSme).expect("both").mean_aps;
        let sme = run.report.summary(FeatureSet::Sme).expect("sme").mean_aps;

        let corr = fs::read_to_string(run.run_dir.join("correlation.csv")).expect("correlation.csv");
        let mut rs = Vec::new();
        for (j, &k) in planted.iter().enumerate() {
            let r = corr
                .lines()
                .skip(1)
                .map(|l| l.split(',').collect::<Vec<_>>())
                .find(|f| f[0] == names[k] && f[1] == format!("copy{j}"))
                .and_then(|f| f[2].parse::<f64>().ok())
                .unwrap_or(f64::NAN);
            rs.push(r);
        }
        let ok = both >= cder - 0.02 && rs.iter().all(|&r| r > 0.9);
        pass &= ok;
        lines.push(format!("seed {seed}: CDER {cder:.3} CDER+SME {both:.3} SME {sme:.3} r {rs:.3?}"));
    }
    (pass, format!("{}; {}", lines.join("; "), secs(start.elapsed())))
}

/// Two runs with one config give byte-identical report JSON.
fn c8_determinism(first_out: &Path, second_out: &Path) -> Outcome {
    let cfg = shapes_config(SEEDS[0], &[FeatureSet::Cder], None);
    let a = first_out.join("run_seed0/report.json");
    if !a.exists() {
        run_pipeline(&cfg, first_out).expect("pipeline");
    }
    let b = run_pipeline(&cfg, second_out).expect("pipeline").run_dir.join("report.json");
    let (a, b) = (fs::read(a).expect("report"), fs::read(b).expect("report"));
    (a == b, format!("report.json {} bytes, identical: {}", a.len(), a == b))
}

/// The five van der Waals radii.
fn c9_vdw() -> Outcome {
    let table = [("H", 1.2), ("N", 1.55), ("O", 1.52), ("C", 1.7), ("S", 1.8)];
    let atoms: Vec<AtomRecord> = table
        .iter()
        .enumerate()
        .map(|(i, (e, _))| AtomRecord {
            element: e.to_string(),
            position: [i as f64, 0.0, 0.0],
            serial: i as u32 + 1,
        })
        .collect();
    let cloud = pdb_ingest::assign_weights(&atoms).expect("weights");
    let want: Vec<f64> = table.iter().map(|t| t.1).collect();
    let unknown = pdb_ingest::vdw_radius("Fe").is_none();
    (cloud.radii == want && unknown, format!("radii {:?} (exact), Fe unmapped: {unknown}", cloud.radii))
}

/// Held-out diagrams cannot reach the CDER model.
fn c10_leakage(work: &Path) -> Outcome {
    let fx = synthetic_fixture(work, 50, 300, 10);
    let cfg_json = json!({
        "input": { "kind": "diagrams", "diagrams_csv": fx.diagrams_csv, "scores_csv": fx.scores_csv },
        "n_repeats": 1,
        "seed": 3,
        "forest": { "n_iter": 2, "k_folds": 3, "search_space": { "n_trees": [10, 20] } }
    });
    let cfg = PipelineConfig::from_json(&cfg_json.to_string()).expect("config");
    let run = |tag: &str| {
        let r = run_pipeline(&cfg, &work.join(tag)).expect("pipeline");
        let model = fs::read(r.run_dir.join("repeat_0/cder_model.json")).expect("model");
        (model, r.report.repeats[0].validation_ids.clone())
    };
    let (original, validation) = run("base");
    let rewrite = |ids: &[String]| {
        let changed: Vec<PersistenceDiagram> = fx
            .diagrams
            .iter()
            .map(|d| {
                let mut d = d.clone();
                if ids.contains(&d.id) {
                    for p in &mut d.pairs {
                        p.birth = p.birth * 1.9 + 0.01;
                        p.death = p.death * 1.9 + 0.02;
                    }
                }
                d
            })
            .collect();
        let mut buf = Vec::new();
        topostab::io::write_diagrams_csv(&mut buf, &changed).expect("csv");
        fs::write(&fx.diagrams_csv, buf).expect("write");
    };
    rewrite(&validation);
    let (held_out, validation_after) = run("held_out");
    let train_id = fx.ids.iter().find(|id| !validation.contains(id)).expect("train id").clone();
    rewrite(std::slice::from_ref(&train_id));
    let (trained, _) = run("trained");
    let unchanged = held_out == original && validation_after == validation;
    let sensitive = trained != original;
    (
        unchanged && sensitive,
        format!(
            "{} validation diagrams mutated: model identical = {unchanged}; \
             one training diagram mutated: model changed = {sensitive}",
            validation.len()
        ),
    )
}

fn main() -> ExitCode {
    let work = TempDir::new().expect("tempdir");
    let w = work.path();
    for d in ["c3", "c7", "c8", "c10"] {
        fs::create_dir_all(w.join(d)).expect("mkdir");
    }
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("persistence oracle equivalence", Box::new(c1_persistence_oracle)),
        ("known-topology checks", Box::new(c2_known_topology)),
        ("sphere vs figure-8 separation", Box::new(|| c3_shape_pipeline(&w.join("c3")))),
        ("entropy formula suite", Box::new(c4_entropy)),
        ("cover-tree axioms", Box::new(c5_cover_tree)),
        ("statistics oracles", Box::new(c6_statistics)),
        ("SME proxy correlation and combined features", Box::new(|| c7_sme_proxy(&w.join("c7")))),
        ("determinism", Box::new(|| c8_determinism(&w.join("c3"), &w.join("c8")))),
        ("vdW weight map", Box::new(c9_vdw)),
        ("leakage guard", Box::new(|| c10_leakage(&w.join("c10")))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(outcome) => outcome,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failed += 1;
        }
        println!("{} [{:>2}] {name}: {detail}", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
