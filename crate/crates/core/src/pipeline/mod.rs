//! Configured end-to-end runs.
//!
//! A run loads and labels samples, computes diagrams once, then for each
//! repeat draws a stratified split (seed `seed + repeat`), fits CDER on the
//! training diagrams only, vectorizes every sample, tunes and fits a forest
//! per feature set on the training rows and scores the held-out rows by APS.
//! Repeats run concurrently; everything is gathered by repeat index before
//! writing, so artifacts are byte-identical for a given config and seed.

mod config;
mod correlate;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{FeatureSet, FiltrationConfig, ForestConfig, HexbinConfig, InputConfig, PipelineConfig};
pub use correlate::correlate;

use crate::cder::{self, assign_weights, CderError, CderMetadata, CderModel, CderParams, DimensionModel};
use crate::complex::{build_rips, build_weighted_alpha_dim};
use crate::error::{Error, Result, ResultExt};
use crate::forest::{self, random_search_cv, Dataset, FeatureImportance, HyperParams, RandomForest};
use crate::io;
use crate::pdb_ingest::{
    self, label_and_downsample_with, load_scores_csv, load_sme_csv, parse_pdb, ProteinSample, SmeFeatureTable,
    WeightedPointCloud,
};
use crate::persistence::{reduce_labeled, transform, PersistenceDiagram, TransformedDiagram};
use crate::stats::{self, average_precision, paired_t_one_tailed, stratified_split, StatsError, TTest};
use crate::synth::{self, SynthSpec};

pub const LABEL_NAMES: [&str; 2] = ["unstable", "stable"];

/// Labeled samples with their diagrams, in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub ids: Vec<String>,
    /// 1 = stable.
    pub targets: Vec<u8>,
    /// `raw[i][k]` is sample `i`'s diagram in `dimensions[k]`.
    pub raw: Vec<Vec<PersistenceDiagram>>,
    /// Finite pairs of `raw`, birth–persistence transformed.
    pub transformed: Vec<Vec<TransformedDiagram>>,
    pub dimensions: Vec<usize>,
    /// SME rows aligned with `ids`.
    pub sme: Option<SmeFeatureTable>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Diagrams of `dims` for one cloud under the configured filtration.
pub fn cloud_diagrams(
    cloud: &WeightedPointCloud,
    filtration: &FiltrationConfig,
    dims: &[usize],
    id: &str,
) -> Result<Vec<PersistenceDiagram>> {
    let top = (dims.iter().copied().max().unwrap_or(0) + 1).min(3);
    let fc = match filtration {
        FiltrationConfig::WeightedAlpha => build_weighted_alpha_dim(cloud, top)?,
        FiltrationConfig::Rips { max_scale } => build_rips(&cloud.points, *max_scale, top)?,
    };
    let all = reduce_labeled(&fc, id)?;
    Ok(dims
        .iter()
        .map(|&d| all.get(d).cloned().unwrap_or_else(|| PersistenceDiagram::new(id, d)))
        .collect())
}

fn transform_all(raw: &[PersistenceDiagram]) -> Result<Vec<TransformedDiagram>> {
    raw.iter().map(|d| Ok(transform(&d.finite())?)).collect()
}

/// Read, label, balance and compute diagrams for the configured input.
pub fn load_corpus(cfg: &PipelineConfig) -> Result<Corpus> {
    let mut synthetic: HashMap<String, WeightedPointCloud> = HashMap::new();
    let mut samples: Vec<ProteinSample> = match &cfg.input {
        InputConfig::Synthetic {
            n_per_class,
            n_points,
            noise,
            ..
        } => {
            let corpus = synth::generate(&SynthSpec {
                n_sphere: *n_per_class,
                n_figure8: *n_per_class,
                n_points: *n_points,
                noise: *noise,
                seed: cfg.seed,
            })?;
            corpus
                .into_iter()
                .map(|s| {
                    let sample = ProteinSample::new(s.id.clone(), s.shape.name(), s.shape.score());
                    synthetic.insert(s.id, s.cloud);
                    sample
                })
                .collect()
        }
        InputConfig::Pdb { scores_csv, .. }
        | InputConfig::Clouds { scores_csv, .. }
        | InputConfig::Diagrams { scores_csv, .. } => {
            load_scores_csv(&io::read_to_string(scores_csv)?).context(scores_csv.display().to_string())?
        }
    };
    if let Some(t) = &cfg.topology {
        samples.retain(|s| &s.topology == t);
    }
    let mut samples = label_and_downsample_with(&samples, cfg.threshold, cfg.seed, cfg.downsample)?;
    samples.sort_by(|a, b| a.id.cmp(&b.id));

    let dims = &cfg.dimensions;
    let precomputed: Option<HashMap<(String, usize), PersistenceDiagram>> = match &cfg.input {
        InputConfig::Diagrams { diagrams_csv, .. } => Some(
            io::read_diagrams_csv(&io::read_to_string(diagrams_csv)?)
                .context(diagrams_csv.display().to_string())?
                .into_iter()
                .map(|d| ((d.id.clone(), d.dimension), d))
                .collect(),
        ),
        _ => None,
    };

    let raw: Vec<Vec<PersistenceDiagram>> = samples
        .par_iter()
        .map(|s| -> Result<Vec<PersistenceDiagram>> {
            let id = s.id.as_str();
            let cloud = match &cfg.input {
                InputConfig::Diagrams { .. } => {
                    let map = precomputed.as_ref().expect("loaded above");
                    return Ok(dims
                        .iter()
                        .map(|&d| {
                            map.get(&(id.to_string(), d))
                                .cloned()
                                .unwrap_or_else(|| PersistenceDiagram::new(id, d))
                        })
                        .collect());
                }
                InputConfig::Synthetic { .. } => synthetic[id].clone(),
                InputConfig::Pdb { pdb_dir, .. } => {
                    let path = pdb_dir.join(format!("{id}.pdb"));
                    let atoms = parse_pdb(&io::read_to_string(&path)?).context(path.display().to_string())?;
                    pdb_ingest::assign_weights(&atoms).context(path.display().to_string())?
                }
                InputConfig::Clouds { cloud_dir, .. } => {
                    let path = cloud_dir.join(format!("{id}.csv"));
                    io::read_cloud_csv(&io::read_to_string(&path)?).context(path.display().to_string())?
                }
            };
            cloud_diagrams(&cloud, &cfg.filtration, dims, id).with_context(|| format!("sample {id}"))
        })
        .collect::<Result<_>>()?;
    let transformed = raw
        .iter()
        .zip(&samples)
        .map(|(r, s)| transform_all(r).with_context(|| format!("sample {}", s.id)))
        .collect::<Result<Vec<_>>>()?;

    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let sme = match cfg.input.sme_csv() {
        Some(path) => {
            let table = load_sme_csv(&io::read_to_string(path)?).context(path.display().to_string())?;
            let rows = ids
                .iter()
                .map(|id| {
                    table
                        .get(id)
                        .map(<[f64]>::to_vec)
                        .ok_or_else(|| Error::Data(format!("sample {id} is missing from {}", path.display())))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(SmeFeatureTable::from_rows(table.columns.clone(), ids.clone(), rows)?)
        }
        None => None,
    };
    Ok(Corpus {
        targets: samples
            .iter()
            .map(|s| s.label.as_target().expect("labeled above"))
            .collect(),
        ids,
        raw,
        transformed,
        dimensions: dims.clone(),
        sme,
    })
}

/// Fit one CDER model per configured dimension on the `train` samples.
/// A dimension with no low-entropy region contributes no coordinates.
pub fn fit_cder_model(corpus: &Corpus, train: &[usize], params: &CderParams, seed: u64) -> Result<CderModel> {
    let labels: Vec<usize> = train.iter().map(|&i| corpus.targets[i] as usize).collect();
    let mut dimensions = Vec::with_capacity(corpus.dimensions.len());
    for (k, &dim) in corpus.dimensions.iter().enumerate() {
        let clouds = train.iter().map(|&i| corpus.transformed[i][k].points.clone()).collect();
        let set = assign_weights(clouds, &labels, LABEL_NAMES.len())?;
        let coordinates = match cder::fit(&set, params) {
            Ok(c) => c,
            Err(CderError::NoRegionsFound) => Vec::new(),
            Err(e) => return Err(Error::from(e).context(format!("CDER fit, dimension {dim}"))),
        };
        dimensions.push(DimensionModel { dimension: dim, coordinates });
    }
    Ok(CderModel {
        dimensions,
        metadata: CderMetadata {
            seed,
            params: *params,
            label_names: LABEL_NAMES.iter().map(|s| s.to_string()).collect(),
            n_train: train.len(),
        },
    })
}

/// CDER feature rows for every sample in the corpus.
pub fn cder_features(model: &CderModel, corpus: &Corpus) -> Result<Vec<Vec<f64>>> {
    corpus
        .transformed
        .par_iter()
        .map(|dgms| {
            let views: Vec<&[[f64; 2]]> = dgms.iter().map(|d| d.points.as_slice()).collect();
            Ok(cder::vectorize_sample(&model.dimensions, &views)?)
        })
        .collect()
}

fn feature_matrix(
    set: FeatureSet,
    corpus: &Corpus,
    cder: Option<(&[String], &[Vec<f64>])>,
) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut names = Vec::new();
    let mut rows = vec![Vec::new(); corpus.len()];
    if set.needs_cder() {
        let (n, r) = cder.expect("CDER features computed");
        names.extend_from_slice(n);
        for (row, c) in rows.iter_mut().zip(r) {
            row.extend_from_slice(c);
        }
    }
    if set.needs_sme() {
        let sme = corpus.sme.as_ref().expect("validated");
        names.extend(sme.columns.iter().cloned());
        for (row, s) in rows.iter_mut().zip(&sme.rows) {
            row.extend_from_slice(s);
        }
    }
    (names, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSetResult {
    pub feature_set: FeatureSet,
    pub n_features: usize,
    pub best_hyperparams: HyperParams,
    pub cv_aps: f64,
    pub validation_aps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatReport {
    pub repeat: usize,
    pub seed: u64,
    pub n_train: usize,
    pub validation_ids: Vec<String>,
    pub results: Vec<FeatureSetResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSetSummary {
    pub feature_set: FeatureSet,
    /// Per repeat; CDER counts can change between repeats.
    pub n_features: Vec<usize>,
    pub aps: Vec<f64>,
    pub mean_aps: f64,
    pub std_aps: f64,
}

/// Table-1 shaped summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub topology: Option<String>,
    pub n_samples: usize,
    pub n_stable: usize,
    pub n_repeats: usize,
    pub split_fraction: f64,
    pub feature_sets: Vec<FeatureSetSummary>,
    /// One-tailed paired t-test of CDER+SME over SME across repeats. Present
    /// when both sets ran, there are at least two repeats and the
    /// differences are not constant.
    pub paired_t: Option<TTest>,
    pub repeats: Vec<RepeatReport>,
}

impl RunReport {
    pub fn summary(&self, set: FeatureSet) -> Option<&FeatureSetSummary> {
        self.feature_sets.iter().find(|s| s.feature_set == set)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct RepeatOutput {
    report: RepeatReport,
    cder: Option<(CderModel, Vec<String>, Vec<Vec<f64>>)>,
    forests: Vec<(FeatureSet, RandomForest, FeatureImportance)>,
}

fn tune_and_fit(data: &Dataset, forest_cfg: &ForestConfig, seed: u64) -> Result<(RandomForest, f64)> {
    let cv = random_search_cv(data, &forest_cfg.search_space, forest_cfg.n_iter, forest_cfg.k_folds, seed)?;
    Ok((forest::fit(data, &cv.best, seed)?, cv.best_score))
}

fn run_repeat(cfg: &PipelineConfig, corpus: &Corpus, repeat: usize) -> Result<RepeatOutput> {
    let seed = cfg.seed.wrapping_add(repeat as u64);
    let (train, valid) = stratified_split(&corpus.targets, cfg.split_fraction, seed)?;

    let cder = if cfg.feature_sets.iter().any(|f| f.needs_cder()) {
        let model = fit_cder_model(corpus, &train, &cfg.cder, seed)?;
        let rows = cder_features(&model, corpus)?;
        let names = model.feature_names();
        Some((model, names, rows))
    } else {
        None
    };

    let mut results = Vec::new();
    let mut forests = Vec::new();
    for &set in &cfg.feature_sets {
        let (names, rows) = feature_matrix(set, corpus, cder.as_ref().map(|(_, n, r)| (n.as_slice(), r.as_slice())));
        let data = Dataset::new(rows, corpus.targets.clone(), names, corpus.ids.clone())?;
        let train_set = data.subset(&train);
        let (forest, cv_aps) =
            tune_and_fit(&train_set, &cfg.forest, seed).with_context(|| format!("repeat {repeat}, {set} forest"))?;
        let valid_rows: Vec<Vec<f64>> = valid.iter().map(|&i| data.x[i].clone()).collect();
        let valid_y: Vec<u8> = valid.iter().map(|&i| data.y[i]).collect();
        let proba = forest.predict_proba(&valid_rows)?;
        let validation_aps = average_precision(&proba, &valid_y)?;
        results.push(FeatureSetResult {
            feature_set: set,
            n_features: data.n_features(),
            best_hyperparams: forest.hyperparams,
            cv_aps,
            validation_aps,
        });
        let importance = forest.mdi_importance();
        forests.push((set, forest, importance));
    }
    Ok(RepeatOutput {
        report: RepeatReport {
            repeat,
            seed,
            n_train: train.len(),
            validation_ids: valid.iter().map(|&i| corpus.ids[i].clone()).collect(),
            results,
        },
        cder,
        forests,
    })
}

fn summarize(cfg: &PipelineConfig, corpus: &Corpus, repeats: Vec<RepeatReport>) -> RunReport {
    let feature_sets: Vec<FeatureSetSummary> = cfg
        .feature_sets
        .iter()
        .enumerate()
        .map(|(k, &set)| {
            let aps: Vec<f64> = repeats.iter().map(|r| r.results[k].validation_aps).collect();
            FeatureSetSummary {
                feature_set: set,
                n_features: repeats.iter().map(|r| r.results[k].n_features).collect(),
                mean_aps: stats::mean(&aps),
                std_aps: stats::std_dev(&aps),
                aps,
            }
        })
        .collect();
    let aps_of = |set| feature_sets.iter().find(|s| s.feature_set == set).map(|s| s.aps.clone());
    let paired_t = match (aps_of(FeatureSet::CderSme), aps_of(FeatureSet::Sme)) {
        (Some(a), Some(b)) if a.len() >= 2 => match paired_t_one_tailed(&a, &b) {
            Ok(t) => Some(t),
            Err(StatsError::ZeroVarianceDiff) => None,
            Err(_) => None,
        },
        _ => None,
    };
    RunReport {
        seed: cfg.seed,
        topology: cfg.topology.clone(),
        n_samples: corpus.len(),
        n_stable: corpus.targets.iter().filter(|&&t| t == 1).count(),
        n_repeats: cfg.n_repeats,
        split_fraction: cfg.split_fraction,
        feature_sets,
        paired_t,
        repeats,
    }
}

fn to_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Directory holding a run's artifacts.
pub fn run_dir(out_root: &Path, seed: u64) -> PathBuf {
    out_root.join(format!("run_seed{seed}"))
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub run_dir: PathBuf,
}

/// Full pipeline. Writes under `run_dir(out_root, cfg.seed)`:
/// `report.json`, `diagrams.csv`, `transformed.csv`, `hexbin.csv`,
/// `repeat_<k>/{cder_model.json, cder_features.csv, forest_<set>.json,
/// importance_<set>.csv}` and, with SME features, `correlation.csv`.
pub fn run_pipeline(cfg: &PipelineConfig, out_root: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let dir = run_dir(out_root, cfg.seed);

    io::write_file(
        &dir.join("diagrams.csv"),
        &to_bytes(|b| io::write_diagrams_csv(b, corpus.raw.iter().flatten()))?,
    )?;
    io::write_file(
        &dir.join("transformed.csv"),
        &to_bytes(|b| io::write_transformed_csv(b, corpus.transformed.iter().flatten()))?,
    )?;
    write_hexbin(cfg, &corpus, &dir)?;

    let outputs: Vec<RepeatOutput> = (0..cfg.n_repeats)
        .into_par_iter()
        .map(|k| run_repeat(cfg, &corpus, k))
        .collect::<Result<_>>()?;

    let mut reports = Vec::with_capacity(outputs.len());
    for out in outputs {
        let rdir = dir.join(format!("repeat_{}", out.report.repeat));
        if let Some((model, names, rows)) = &out.cder {
            io::write_file(&rdir.join("cder_model.json"), model.to_json()?.as_bytes())?;
            io::write_file(
                &rdir.join("cder_features.csv"),
                &to_bytes(|b| io::write_features_csv(b, names, &corpus.ids, rows))?,
            )?;
        }
        for (set, forest, imp) in &out.forests {
            io::write_file(&rdir.join(format!("forest_{}.json", set.slug())), forest.to_json()?.as_bytes())?;
            io::write_file(
                &rdir.join(format!("importance_{}.csv", set.slug())),
                &to_bytes(|b| io::write_importance_csv(b, &imp.names, &imp.values))?,
            )?;
        }
        reports.push(out.report);
    }

    if cfg.correlate && corpus.sme.is_some() {
        write_full_data_correlation(cfg, &corpus, &dir)?;
    }

    let report = summarize(cfg, &corpus, reports);
    io::write_file(&dir.join("report.json"), report.to_json()?.as_bytes())?;
    Ok(RunOutput { report, run_dir: dir })
}

fn write_hexbin(cfg: &PipelineConfig, corpus: &Corpus, dir: &Path) -> Result<()> {
    let Some(k) = corpus.dimensions.iter().position(|&d| d == cfg.hexbin.dimension) else {
        return Ok(());
    };
    let mut points = Vec::new();
    let mut targets = Vec::new();
    for (dgms, &t) in corpus.transformed.iter().zip(&corpus.targets) {
        for p in &dgms[k].points {
            points.push(*p);
            targets.push(t);
        }
    }
    let side = cfg.hexbin.side.unwrap_or_else(|| stats::default_hex_side(&points));
    let grid = stats::hexbin(&points, &targets, side)?;
    io::write_file(&dir.join("hexbin.csv"), &to_bytes(|b| io::write_hexbin_csv(b, &grid.cells()))?)
}

/// Correlations on all labeled samples at once (no split), with importances
/// from forests tuned on the same data.
fn write_full_data_correlation(cfg: &PipelineConfig, corpus: &Corpus, dir: &Path) -> Result<()> {
    let sme = corpus.sme.as_ref().expect("checked by caller");
    let all: Vec<usize> = (0..corpus.len()).collect();
    let model = fit_cder_model(corpus, &all, &cfg.cder, cfg.seed)?;
    let names = model.feature_names();
    if names.is_empty() {
        return Ok(());
    }
    let rows = cder_features(&model, corpus)?;
    let cder_table = SmeFeatureTable::from_rows(names.clone(), corpus.ids.clone(), rows.clone())?;

    let importance = |names: Vec<String>, rows: Vec<Vec<f64>>| -> Result<Vec<(String, f64)>> {
        let data = Dataset::new(rows, corpus.targets.clone(), names, corpus.ids.clone())?;
        let (forest, _) = tune_and_fit(&data, &cfg.forest, cfg.seed)?;
        let imp = forest.mdi_importance();
        Ok(imp.names.into_iter().zip(imp.values).collect())
    };
    let cder_imp = importance(names, rows)?;
    let sme_imp = importance(sme.columns.clone(), sme.rows.clone())?;
    let table = correlate(&cder_table, sme, Some(&cder_imp), Some(&sme_imp))?;
    io::write_file(&dir.join("correlation.csv"), &to_bytes(|b| io::write_correlation_csv(b, &table))?)
}
