use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use topostab::cder::{self, CderModel, CderParams};
use topostab::error::{Error, Result, ResultExt};
use topostab::forest::{self, random_search_cv, Dataset, RandomForest};
use topostab::io;
use topostab::pdb_ingest::{self, load_scores_csv, load_sme_csv, parse_pdb, SmeFeatureTable};
use topostab::persistence::{transform, PersistenceDiagram, TransformedDiagram};
use topostab::pipeline::{self, correlate, run_pipeline, FiltrationConfig, ForestConfig, PipelineConfig, LABEL_NAMES};
use topostab::stats;
use topostab::synth::{self, Shape, SynthSpec};

#[derive(Parser)]
#[command(name = "topostab", version, about = "Topological features and random-forest stability classifiers")]
struct Cli {
    /// JSON pipeline config; other subcommands take their defaults from it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FiltrationArg {
    Alpha,
    Rips,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Sphere,
    Figure8,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Convert PDB files into weighted cloud CSVs (`<out>/clouds/<name>.csv`).
    Ingest {
        /// PDB files or directories containing `*.pdb`.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Persistence diagrams for cloud CSVs (`diagrams.csv`, `transformed.csv`).
    Ph {
        /// Cloud CSV files or directories containing `*.csv`.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum)]
        filtration: Option<FiltrationArg>,
        /// Rips scale cutoff.
        #[arg(long)]
        max_scale: Option<f64>,
        /// Homology dimensions, e.g. `0,1,2`.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
    },
    /// Sample noisy spheres and figure-8s (`clouds/`, `scores.csv`).
    Synth {
        #[arg(long, value_enum, default_value = "both")]
        shape: ShapeArg,
        /// Samples per shape.
        #[arg(long, default_value_t = 50)]
        n_samples: usize,
        #[arg(long, default_value_t = 300)]
        n_points: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
    },
    /// Fit a CDER model on labeled diagrams (`cder_model.json`).
    CderFit {
        #[arg(long)]
        diagrams: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        entropy_threshold: Option<f64>,
        #[arg(long)]
        min_mass: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
    },
    /// Vectorize diagrams against a CDER model (`cder_features.csv`).
    Featurize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        diagrams: PathBuf,
    },
    /// Tune and fit a random forest (`forest.json`, `importance.csv`, `cv.json`).
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        n_iter: Option<usize>,
        #[arg(long)]
        k_folds: Option<usize>,
    },
    /// Score a fitted forest by average precision (`metrics.json`).
    Eval {
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Pearson r for every CDER × SME feature pair (`correlation.csv`).
    Correlate {
        #[arg(long)]
        cder: PathBuf,
        #[arg(long)]
        sme: PathBuf,
        #[arg(long)]
        cder_importance: Option<PathBuf>,
        #[arg(long)]
        sme_importance: Option<PathBuf>,
    },
    /// Signed hexbin counts of transformed diagram points (`hexbin.csv`).
    Hexbin {
        #[arg(long)]
        diagrams: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long)]
        side: Option<f64>,
    },
    /// Run the configured end-to-end experiment (requires `--config`).
    Pipeline,
}

/// Settings shared by the single-step subcommands, taken from `--config`
/// when given.
struct Defaults {
    threshold: f64,
    cder: CderParams,
    forest: ForestConfig,
    filtration: FiltrationConfig,
    dims: Vec<usize>,
    seed: u64,
}

impl Defaults {
    fn new(cfg: Option<&PipelineConfig>, seed: Option<u64>) -> Self {
        match cfg {
            Some(c) => Defaults {
                threshold: c.threshold,
                cder: c.cder,
                forest: c.forest.clone(),
                filtration: c.filtration,
                dims: c.dimensions.clone(),
                seed: seed.unwrap_or(c.seed),
            },
            None => Defaults {
                threshold: 1.0,
                cder: CderParams::default(),
                forest: ForestConfig::default(),
                filtration: FiltrationConfig::WeightedAlpha,
                dims: vec![0, 1, 2],
                seed: seed.unwrap_or(0),
            },
        }
    }
}

fn files_with_ext(inputs: &[PathBuf], ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| p.display().to_string())?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == ext))
                .collect();
            found.sort();
            out.extend(found);
        } else if p.exists() {
            out.push(p.clone());
        } else {
            return Err(Error::Config(format!("{} does not exist", p.display())));
        }
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Binary targets by id: score strictly above `threshold` is stable.
fn targets_by_id(scores: &Path, threshold: f64) -> Result<HashMap<String, u8>> {
    let samples = load_scores_csv(&io::read_to_string(scores)?).context(scores.display().to_string())?;
    Ok(samples
        .into_iter()
        .map(|s| (s.id, u8::from(s.stability_score > threshold)))
        .collect())
}

/// Transformed diagrams per id (first-appearance order), one per dimension.
fn transformed_by_id(path: &Path, dims: &[usize]) -> Result<(Vec<String>, Vec<Vec<TransformedDiagram>>)> {
    let raw = io::read_diagrams_csv(&io::read_to_string(path)?).context(path.display().to_string())?;
    let mut ids: Vec<String> = Vec::new();
    let mut map: HashMap<(String, usize), PersistenceDiagram> = HashMap::new();
    for d in raw {
        if !ids.contains(&d.id) {
            ids.push(d.id.clone());
        }
        map.insert((d.id.clone(), d.dimension), d);
    }
    let mut out = Vec::with_capacity(ids.len());
    for id in &ids {
        let mut per_dim = Vec::with_capacity(dims.len());
        for &dim in dims {
            let d = map
                .remove(&(id.clone(), dim))
                .unwrap_or_else(|| PersistenceDiagram::new(id.as_str(), dim));
            per_dim.push(transform(&d.finite())?);
        }
        out.push(per_dim);
    }
    Ok((ids, out))
}

/// Rows of `features` that have a score, with their targets.
fn labeled_dataset(features: &SmeFeatureTable, targets: &HashMap<String, u8>) -> Result<Dataset> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut ids = Vec::new();
    for (id, row) in features.ids.iter().zip(&features.rows) {
        if let Some(&t) = targets.get(id) {
            x.push(row.clone());
            y.push(t);
            ids.push(id.clone());
        }
    }
    if ids.is_empty() {
        return Err(Error::Data("no feature rows have a matching score".into()));
    }
    Ok(Dataset::new(x, y, features.columns.clone(), ids)?)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    io::write_file(path, serde_json::to_string_pretty(value)?.as_bytes())
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => {
            let mut c = PipelineConfig::load(path)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            Some(c)
        }
        None => None,
    };
    let defaults = Defaults::new(cfg.as_ref(), cli.seed);
    let out = &cli.out;

    match cli.command {
        Command::Ingest { inputs } => {
            let files = files_with_ext(&inputs, "pdb")?;
            for f in &files {
                let atoms = parse_pdb(&io::read_to_string(f)?).context(f.display().to_string())?;
                let cloud = pdb_ingest::assign_weights(&atoms).context(f.display().to_string())?;
                let dest = out.join("clouds").join(format!("{}.csv", stem(f)));
                io::write_file(&dest, &csv_bytes(|b| io::write_cloud_csv(b, &cloud))?)?;
            }
            eprintln!("wrote {} clouds to {}", files.len(), out.join("clouds").display());
        }
        Command::Ph {
            inputs,
            filtration,
            max_scale,
            dims,
        } => {
            let filtration = match (filtration, max_scale) {
                (Some(FiltrationArg::Rips), Some(s)) => FiltrationConfig::Rips { max_scale: s },
                (Some(FiltrationArg::Rips), None) => match defaults.filtration {
                    f @ FiltrationConfig::Rips { .. } => f,
                    _ => return Err(Error::Config("rips needs --max-scale".into())),
                },
                (Some(FiltrationArg::Alpha), _) => FiltrationConfig::WeightedAlpha,
                (None, _) => defaults.filtration,
            };
            let dims = dims.unwrap_or(defaults.dims);
            let files = files_with_ext(&inputs, "csv")?;
            let mut raw = Vec::new();
            let mut transformed = Vec::new();
            for f in &files {
                let id = stem(f);
                let cloud = io::read_cloud_csv(&io::read_to_string(f)?).context(f.display().to_string())?;
                let dgms = pipeline::cloud_diagrams(&cloud, &filtration, &dims, &id)
                    .with_context(|| f.display().to_string())?;
                for d in &dgms {
                    transformed.push(transform(&d.finite())?);
                }
                raw.extend(dgms);
            }
            io::write_file(&out.join("diagrams.csv"), &csv_bytes(|b| io::write_diagrams_csv(b, &raw))?)?;
            io::write_file(
                &out.join("transformed.csv"),
                &csv_bytes(|b| io::write_transformed_csv(b, &transformed))?,
            )?;
            eprintln!("wrote diagrams for {} clouds to {}", files.len(), out.display());
        }
        Command::Synth {
            shape,
            n_samples,
            n_points,
            noise,
        } => {
            let (n_sphere, n_figure8) = match shape {
                ShapeArg::Sphere => (n_samples, 0),
                ShapeArg::Figure8 => (0, n_samples),
                ShapeArg::Both => (n_samples, n_samples),
            };
            let corpus = synth::generate(&SynthSpec {
                n_sphere,
                n_figure8,
                n_points,
                noise,
                seed: defaults.seed,
            })?;
            let mut scores = csv::Writer::from_writer(Vec::new());
            scores.write_record(["id", "score", "topology"])?;
            for s in &corpus {
                let dest = out.join("clouds").join(format!("{}.csv", s.id));
                io::write_file(&dest, &csv_bytes(|b| io::write_cloud_csv(b, &s.cloud))?)?;
                let shape: Shape = s.shape;
                scores.write_record([s.id.clone(), shape.score().to_string(), shape.name().to_string()])?;
            }
            let bytes = scores.into_inner().map_err(|e| Error::Data(e.to_string()))?;
            io::write_file(&out.join("scores.csv"), &bytes)?;
            eprintln!("wrote {} clouds to {}", corpus.len(), out.display());
        }
        Command::CderFit {
            diagrams,
            scores,
            threshold,
            entropy_threshold,
            min_mass,
            dims,
        } => {
            let dims = dims.unwrap_or(defaults.dims);
            let mut params = defaults.cder;
            if let Some(t) = entropy_threshold {
                params.entropy_threshold = t;
            }
            if let Some(m) = min_mass {
                params.min_mass = m;
            }
            let targets = targets_by_id(&scores, threshold.unwrap_or(defaults.threshold))?;
            let (ids, transformed) = transformed_by_id(&diagrams, &dims)?;
            let keep: Vec<usize> = (0..ids.len()).filter(|&i| targets.contains_key(&ids[i])).collect();
            let labels: Vec<usize> = keep.iter().map(|&i| targets[&ids[i]] as usize).collect();
            let mut dimensions = Vec::new();
            for (k, &dim) in dims.iter().enumerate() {
                let clouds = keep.iter().map(|&i| transformed[i][k].points.clone()).collect();
                let set = cder::assign_weights(clouds, &labels, 2)?;
                let coordinates = match cder::fit(&set, &params) {
                    Err(cder::CderError::NoRegionsFound) => Vec::new(),
                    r => r.with_context(|| format!("dimension {dim}"))?,
                };
                dimensions.push(cder::DimensionModel { dimension: dim, coordinates });
            }
            let model = CderModel {
                dimensions,
                metadata: cder::CderMetadata {
                    seed: defaults.seed,
                    params,
                    label_names: LABEL_NAMES.iter().map(|s| s.to_string()).collect(),
                    n_train: keep.len(),
                },
            };
            if model.num_features() == 0 {
                return Err(Error::from(cder::CderError::NoRegionsFound));
            }
            io::write_file(&out.join("cder_model.json"), model.to_json()?.as_bytes())?;
            eprintln!("{} coordinates", model.num_features());
        }
        Command::Featurize { model, diagrams } => {
            let model = CderModel::from_json(&io::read_to_string(&model)?)?;
            let dims: Vec<usize> = model.dimensions.iter().map(|d| d.dimension).collect();
            let (ids, transformed) = transformed_by_id(&diagrams, &dims)?;
            let rows = transformed
                .iter()
                .map(|t| {
                    let views: Vec<&[[f64; 2]]> = t.iter().map(|d| d.points.as_slice()).collect();
                    cder::vectorize_sample(&model.dimensions, &views)
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let names = model.feature_names();
            io::write_file(
                &out.join("cder_features.csv"),
                &csv_bytes(|b| io::write_features_csv(b, &names, &ids, &rows))?,
            )?;
        }
        Command::Train {
            features,
            scores,
            threshold,
            n_iter,
            k_folds,
        } => {
            let table = load_sme_csv(&io::read_to_string(&features)?).context(features.display().to_string())?;
            let targets = targets_by_id(&scores, threshold.unwrap_or(defaults.threshold))?;
            let data = labeled_dataset(&table, &targets)?;
            let fc = &defaults.forest;
            let cv = random_search_cv(
                &data,
                &fc.search_space,
                n_iter.unwrap_or(fc.n_iter),
                k_folds.unwrap_or(fc.k_folds),
                defaults.seed,
            )?;
            let forest = forest::fit(&data, &cv.best, defaults.seed)?;
            let imp = forest.mdi_importance();
            io::write_file(&out.join("forest.json"), forest.to_json()?.as_bytes())?;
            io::write_file(
                &out.join("importance.csv"),
                &csv_bytes(|b| io::write_importance_csv(b, &imp.names, &imp.values))?,
            )?;
            write_json(&out.join("cv.json"), &cv)?;
            println!("cv_aps {}", cv.best_score);
        }
        Command::Eval {
            forest,
            features,
            scores,
            threshold,
        } => {
            let forest = RandomForest::from_json(&io::read_to_string(&forest)?)?;
            let table = load_sme_csv(&io::read_to_string(&features)?).context(features.display().to_string())?;
            let targets = targets_by_id(&scores, threshold.unwrap_or(defaults.threshold))?;
            let data = labeled_dataset(&table, &targets)?;
            let p = forest.predict_proba(&data.x)?;
            let aps = stats::average_precision(&p, &data.y)?;
            #[derive(Serialize)]
            struct Metrics {
                aps: f64,
                n_samples: usize,
                n_positive: usize,
            }
            write_json(
                &out.join("metrics.json"),
                &Metrics {
                    aps,
                    n_samples: data.len(),
                    n_positive: data.y.iter().filter(|&&t| t == 1).count(),
                },
            )?;
            println!("aps {aps}");
        }
        Command::Correlate {
            cder,
            sme,
            cder_importance,
            sme_importance,
        } => {
            let a = load_sme_csv(&io::read_to_string(&cder)?).context(cder.display().to_string())?;
            let b = load_sme_csv(&io::read_to_string(&sme)?).context(sme.display().to_string())?;
            let load_imp = |p: &Option<PathBuf>| -> Result<Option<Vec<(String, f64)>>> {
                p.as_ref()
                    .map(|p| io::read_importance_csv(&io::read_to_string(p)?).context(p.display().to_string()))
                    .transpose()
            };
            let (ci, si) = (load_imp(&cder_importance)?, load_imp(&sme_importance)?);
            let rows = correlate(&a, &b, ci.as_deref(), si.as_deref())?;
            io::write_file(&out.join("correlation.csv"), &csv_bytes(|b| io::write_correlation_csv(b, &rows))?)?;
        }
        Command::Hexbin {
            diagrams,
            scores,
            threshold,
            dim,
            side,
        } => {
            let targets = targets_by_id(&scores, threshold.unwrap_or(defaults.threshold))?;
            let (ids, transformed) = transformed_by_id(&diagrams, &[dim])?;
            let mut points = Vec::new();
            let mut labels = Vec::new();
            for (id, t) in ids.iter().zip(&transformed) {
                if let Some(&y) = targets.get(id) {
                    points.extend_from_slice(&t[0].points);
                    labels.extend(std::iter::repeat_n(y, t[0].points.len()));
                }
            }
            let side = side.unwrap_or_else(|| stats::default_hex_side(&points));
            let grid = stats::hexbin(&points, &labels, side)?;
            io::write_file(&out.join("hexbin.csv"), &csv_bytes(|b| io::write_hexbin_csv(b, &grid.cells()))?)?;
        }
        Command::Pipeline => {
            let cfg = cfg.ok_or_else(|| Error::Config("pipeline needs --config".into()))?;
            let result = run_pipeline(&cfg, out)?;
            for s in &result.report.feature_sets {
                let n = s.n_features.first().copied().unwrap_or(0);
                println!("{:<9} APS {:.3} ± {:.3}  ({} features)", s.feature_set.to_string(), s.mean_aps, s.std_aps, n);
            }
            if let Some(t) = result.report.paired_t {
                println!("paired t (CDER+SME > SME): t = {:.3}, p = {:.4}", t.t, t.p);
            }
            eprintln!("artifacts in {}", result.run_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
