use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cder::CderParams;
use crate::error::{Error, Result};
use crate::forest::SearchSpace;
use crate::pdb_ingest::DownsampleStrategy;

/// Where samples come from. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputConfig {
    /// `<pdb_dir>/<id>.pdb` for every id in the scores file.
    Pdb {
        pdb_dir: PathBuf,
        scores_csv: PathBuf,
        #[serde(default)]
        sme_csv: Option<PathBuf>,
    },
    /// `<cloud_dir>/<id>.csv` with columns `x,y,z[,r]`.
    Clouds {
        cloud_dir: PathBuf,
        scores_csv: PathBuf,
        #[serde(default)]
        sme_csv: Option<PathBuf>,
    },
    /// Precomputed diagrams, `id,dim,birth,death`.
    Diagrams {
        diagrams_csv: PathBuf,
        scores_csv: PathBuf,
        #[serde(default)]
        sme_csv: Option<PathBuf>,
    },
    /// Sphere/figure-8 corpus generated in memory from the run seed.
    Synthetic {
        n_per_class: usize,
        n_points: usize,
        noise: f64,
        #[serde(default)]
        sme_csv: Option<PathBuf>,
    },
}

impl InputConfig {
    pub fn sme_csv(&self) -> Option<&Path> {
        match self {
            InputConfig::Pdb { sme_csv, .. }
            | InputConfig::Clouds { sme_csv, .. }
            | InputConfig::Diagrams { sme_csv, .. }
            | InputConfig::Synthetic { sme_csv, .. } => sme_csv.as_deref(),
        }
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            InputConfig::Pdb {
                pdb_dir,
                scores_csv,
                sme_csv,
            } => [Some(pdb_dir), Some(scores_csv), sme_csv.as_mut()].into_iter().flatten().collect(),
            InputConfig::Clouds {
                cloud_dir,
                scores_csv,
                sme_csv,
            } => [Some(cloud_dir), Some(scores_csv), sme_csv.as_mut()].into_iter().flatten().collect(),
            InputConfig::Diagrams {
                diagrams_csv,
                scores_csv,
                sme_csv,
            } => [Some(diagrams_csv), Some(scores_csv), sme_csv.as_mut()].into_iter().flatten().collect(),
            InputConfig::Synthetic { sme_csv, .. } => sme_csv.as_mut().into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FiltrationConfig {
    /// Weighted alpha filtration with van der Waals (or cloud-file) radii.
    #[default]
    WeightedAlpha,
    Rips {
        max_scale: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSet {
    #[serde(rename = "SME")]
    Sme,
    #[serde(rename = "CDER")]
    Cder,
    #[serde(rename = "CDER+SME")]
    CderSme,
}

impl FeatureSet {
    pub fn needs_sme(self) -> bool {
        matches!(self, FeatureSet::Sme | FeatureSet::CderSme)
    }

    pub fn needs_cder(self) -> bool {
        matches!(self, FeatureSet::Cder | FeatureSet::CderSme)
    }

    /// File-name friendly tag.
    pub fn slug(self) -> &'static str {
        match self {
            FeatureSet::Sme => "sme",
            FeatureSet::Cder => "cder",
            FeatureSet::CderSme => "cder_sme",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::Sme => "SME",
            FeatureSet::Cder => "CDER",
            FeatureSet::CderSme => "CDER+SME",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub search_space: SearchSpace,
    pub n_iter: usize,
    pub k_folds: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            search_space: SearchSpace::default(),
            n_iter: 20,
            k_folds: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HexbinConfig {
    pub dimension: usize,
    /// Defaults to a fiftieth of the birth-axis range.
    pub side: Option<f64>,
}

impl Default for HexbinConfig {
    fn default() -> Self {
        Self {
            dimension: 1,
            side: None,
        }
    }
}

fn default_threshold() -> f64 {
    1.0
}
fn default_dimensions() -> Vec<usize> {
    vec![0, 1, 2]
}
fn default_feature_sets() -> Vec<FeatureSet> {
    vec![FeatureSet::Cder]
}
fn default_repeats() -> usize {
    10
}
fn default_fraction() -> f64 {
    0.8
}
fn default_true() -> bool {
    true
}

/// JSON run configuration. See the README for the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    /// Samples scoring strictly above this are stable.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub downsample: DownsampleStrategy,
    /// Keep only samples whose topology column equals this tag.
    #[serde(default)]
    pub topology: Option<String>,
    #[serde(default)]
    pub filtration: FiltrationConfig,
    /// Homological dimensions vectorized by CDER, in feature order.
    #[serde(default = "default_dimensions")]
    pub dimensions: Vec<usize>,
    #[serde(default)]
    pub cder: CderParams,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default = "default_feature_sets")]
    pub feature_sets: Vec<FeatureSet>,
    #[serde(default = "default_repeats")]
    pub n_repeats: usize,
    #[serde(default = "default_fraction")]
    pub split_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub hexbin: HexbinConfig,
    /// Full-data CDER/SME correlation table (needs SME features).
    #[serde(default = "default_true")]
    pub correlate: bool,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse a config file, resolving relative input paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in self.input.paths_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    /// Checks that need no compute: parameter ranges, feature-set
    /// prerequisites and input paths.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.feature_sets.is_empty() {
            return bad("feature_sets is empty".into());
        }
        if self.feature_sets.iter().any(|f| f.needs_sme()) && self.input.sme_csv().is_none() {
            return bad("feature set SME requested but no sme_csv is configured".into());
        }
        if self.n_repeats == 0 {
            return bad("n_repeats must be at least 1".into());
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!("split_fraction {} not in (0, 1)", self.split_fraction));
        }
        if !self.threshold.is_finite() {
            return bad("threshold must be finite".into());
        }
        if self.dimensions.is_empty() || self.dimensions.iter().any(|&d| d > 2) {
            return bad("dimensions must be a non-empty subset of {0, 1, 2}".into());
        }
        let mut dims = self.dimensions.clone();
        dims.sort_unstable();
        dims.dedup();
        if dims.len() != self.dimensions.len() {
            return bad("dimensions contains duplicates".into());
        }
        if let FiltrationConfig::Rips { max_scale } = self.filtration {
            if !(max_scale > 0.0) {
                return bad("rips max_scale must be positive".into());
            }
        }
        self.cder.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.forest
            .search_space
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.forest.n_iter == 0 || self.forest.k_folds < 2 {
            return bad("forest.n_iter must be ≥ 1 and forest.k_folds ≥ 2".into());
        }
        match &self.input {
            InputConfig::Synthetic {
                n_per_class,
                n_points,
                noise,
                ..
            } => {
                if *n_per_class < 2 || *n_points < 4 || !(*noise >= 0.0) {
                    return bad("synthetic input needs n_per_class ≥ 2, n_points ≥ 4, noise ≥ 0".into());
                }
            }
            _ => {}
        }
        let mut inputs = self.input.clone();
        for p in inputs.paths_mut() {
            if !p.exists() {
                return bad(format!("input path {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    /// Highest simplex dimension needed to compute the configured homology.
    pub fn complex_dim(&self) -> usize {
        (self.dimensions.iter().copied().max().unwrap_or(0) + 1).min(3)
    }
}
