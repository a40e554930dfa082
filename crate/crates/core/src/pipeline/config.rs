use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::{Algorithm, ClusteringParams};
use crate::distance::{Aggregation, DistanceMatrix, DistanceParams};
use crate::ensemble::EnsembleParams;
use crate::error::{Error, Result};
use crate::evaluate::Averaging;
use crate::ingest::{AttackKind, Format, InjectionSpec, SplitSpec};
use crate::recommend::SimilaritySource;
use crate::seed::derive_seed;

/// Everything a run needs. Read from TOML; unknown keys are rejected.
///
/// ```
/// use cfoutlier::pipeline::PipelineConfig;
///
/// let cfg = PipelineConfig::from_toml_str(r#"
///     seed = 7
///     out_dir = "out"
///
///     [dataset]
///     path = "data/ml-100k/u.data"
///     format = "ml100k"
///
///     [recommend]
///     neighbors = [20, 40]
///     top_n = [10]
/// "#).unwrap();
/// assert_eq!(cfg.split.train_fraction, 0.8);
/// assert!(PipelineConfig::from_toml_str("seed = 1\nbogus = 2").is_err());
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed. Every random stage derives its own seed from it.
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; `None` uses the rayon default.
    #[serde(default)]
    pub threads: Option<usize>,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub inject: Option<InjectConfig>,
    #[serde(default)]
    pub distance: DistanceConfig,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub ensemble: EnsembleParams,
    #[serde(default)]
    pub recommend: RecommendConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: Format,
}

fn default_format() -> Format {
    Format::Ml100kTab
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_train_fraction() -> f64 {
    0.8
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: default_train_fraction(),
            seed: None,
        }
    }
}

/// Attack profiles added to the training half. Give either `n_profiles` or
/// `profile_fraction` (a share of the genuine user count, rounded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectConfig {
    pub kind: AttackKind,
    #[serde(default)]
    pub n_profiles: Option<usize>,
    #[serde(default)]
    pub profile_fraction: Option<f64>,
    #[serde(default = "default_filler")]
    pub filler_fraction: f64,
    #[serde(default)]
    pub target_item: Option<u32>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_filler() -> f64 {
    0.05
}

impl InjectConfig {
    pub fn profile_count(&self, n_genuine_users: usize) -> Result<usize> {
        match (self.n_profiles, self.profile_fraction) {
            (Some(n), None) => Ok(n),
            (None, Some(f)) if (0.0..=1.0).contains(&f) => Ok((f * n_genuine_users as f64).round() as usize),
            (None, Some(f)) => Err(Error::config(format!("profile_fraction {f} outside [0, 1]"))),
            _ => Err(Error::config(
                "inject needs exactly one of n_profiles and profile_fraction",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceConfig {
    #[serde(default = "one")]
    pub min_overlap: usize,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default = "one_f")]
    pub penalty: f64,
    /// Write `distances.csv`. Stage-by-stage runs need it.
    #[serde(default = "yes")]
    pub dump: bool,
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig {
            min_overlap: 1,
            aggregation: Aggregation::default(),
            penalty: 1.0,
            dump: true,
        }
    }
}

impl DistanceConfig {
    pub fn params(&self) -> DistanceParams {
        DistanceParams {
            min_overlap: self.min_overlap,
            aggregation: self.aggregation,
            penalty: self.penalty,
        }
    }
}

/// Optional clustering parameters. Unset values fall back to the shared
/// `[clustering]` value and then to the data-driven defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub min_pts: Option<usize>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ParamOverrides {
    fn apply(&self, p: &mut ClusteringParams) {
        if let Some(k) = self.k {
            p.k = k;
        }
        if let Some(eps) = self.eps {
            p.eps = eps;
        }
        if let Some(m) = self.min_pts {
            p.min_pts = m;
        }
        if let Some(m) = self.max_iters {
            p.max_iters = m;
        }
        if let Some(s) = self.seed {
            p.seed = s;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringConfig {
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<Algorithm>,
    /// Take partitions from this `user,algorithm,label` CSV instead of
    /// clustering.
    #[serde(default)]
    pub partitions: Option<PathBuf>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub min_pts: Option<usize>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub kmeans: ParamOverrides,
    #[serde(default)]
    pub kmedoids: ParamOverrides,
    #[serde(default)]
    pub dbscan: ParamOverrides,
    #[serde(default)]
    pub divisive: ParamOverrides,
}

fn all_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            algorithms: all_algorithms(),
            partitions: None,
            k: None,
            eps: None,
            min_pts: None,
            max_iters: None,
            kmeans: ParamOverrides::default(),
            kmedoids: ParamOverrides::default(),
            dbscan: ParamOverrides::default(),
            divisive: ParamOverrides::default(),
        }
    }
}

impl ClusteringConfig {
    /// The values set directly under `[clustering]`.
    pub fn shared(&self) -> ParamOverrides {
        ParamOverrides {
            k: self.k,
            eps: self.eps,
            min_pts: self.min_pts,
            max_iters: self.max_iters,
            seed: None,
        }
    }

    pub fn overrides(&self, algorithm: Algorithm) -> &ParamOverrides {
        match algorithm {
            Algorithm::KMeans => &self.kmeans,
            Algorithm::KMedoids => &self.kmedoids,
            Algorithm::Dbscan => &self.dbscan,
            Algorithm::Divisive => &self.divisive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendConfig {
    /// Neighborhood sizes to sweep.
    #[serde(default = "default_neighbors")]
    pub neighbors: Vec<usize>,
    /// List lengths to sweep.
    #[serde(default = "default_top_n")]
    pub top_n: Vec<usize>,
    #[serde(default = "yes")]
    pub filter_outliers: bool,
    #[serde(default = "default_like")]
    pub like_threshold: u8,
    #[serde(default)]
    pub mae_averaging: Averaging,
    #[serde(default = "macro_avg")]
    pub pr_averaging: Averaging,
    /// Similarity sources to run, each written to its own subdirectory.
    #[serde(default = "default_methods")]
    pub methods: Vec<SimilaritySource>,
}

fn default_neighbors() -> Vec<usize> {
    vec![10, 20, 40]
}

fn default_top_n() -> Vec<usize> {
    vec![5, 10, 20]
}

fn default_like() -> u8 {
    4
}

fn macro_avg() -> Averaging {
    Averaging::Macro
}

fn default_methods() -> Vec<SimilaritySource> {
    let mut m: Vec<SimilaritySource> = Algorithm::ALL.into_iter().map(SimilaritySource::SingleAlgorithm).collect();
    m.push(SimilaritySource::Ensemble);
    m
}

impl Default for RecommendConfig {
    fn default() -> Self {
        RecommendConfig {
            neighbors: default_neighbors(),
            top_n: default_top_n(),
            filter_outliers: true,
            like_threshold: default_like(),
            mae_averaging: Averaging::Micro,
            pr_averaging: Averaging::Macro,
            methods: default_methods(),
        }
    }
}

impl PipelineConfig {
    /// A config with every section at its default.
    pub fn new(dataset: impl Into<PathBuf>, format: Format, out_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            seed: 0,
            out_dir: out_dir.into(),
            threads: None,
            dataset: DatasetConfig {
                path: dataset.into(),
                format,
            },
            split: SplitConfig::default(),
            inject: None,
            distance: DistanceConfig::default(),
            clustering: ClusteringConfig::default(),
            ensemble: EnsembleParams::default(),
            recommend: RecommendConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        fix(&mut self.dataset.path);
        if let Some(p) = self.clustering.partitions.as_mut() {
            fix(p);
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(Error::config("split.train_fraction must lie in (0, 1)"));
        }
        if let Some(inj) = &self.inject {
            inj.profile_count(0)?;
            if !(inj.filler_fraction > 0.0 && inj.filler_fraction <= 1.0) {
                return Err(Error::config("inject.filler_fraction must lie in (0, 1]"));
            }
        }
        self.distance.params().validate()?;
        if self.clustering.algorithms.is_empty() {
            return Err(Error::config("clustering.algorithms is empty"));
        }
        let mut seen = self.clustering.algorithms.clone();
        seen.sort_by_key(|a| a.name());
        seen.dedup();
        if seen.len() != self.clustering.algorithms.len() {
            return Err(Error::config("clustering.algorithms lists an algorithm twice"));
        }
        self.ensemble.thresholds(self.clustering.algorithms.len())?;
        let r = &self.recommend;
        if r.neighbors.is_empty() || r.neighbors.contains(&0) {
            return Err(Error::config("recommend.neighbors needs positive values"));
        }
        if r.top_n.is_empty() || r.top_n.contains(&0) {
            return Err(Error::config("recommend.top_n needs positive values"));
        }
        if !(1..=5).contains(&r.like_threshold) {
            return Err(Error::config("recommend.like_threshold must lie in 1..=5"));
        }
        if r.methods.is_empty() {
            return Err(Error::config("recommend.methods is empty"));
        }
        for m in &r.methods {
            if let SimilaritySource::SingleAlgorithm(a) = m {
                if !self.clustering.algorithms.contains(a) {
                    return Err(Error::config(format!("method `{m}` needs algorithm `{a}` in clustering.algorithms")));
                }
            }
        }
        Ok(())
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.split.train_fraction,
            seed: self.split.seed.unwrap_or_else(|| derive_seed(self.seed, "split")),
        }
    }

    pub fn injection_spec(&self, n_genuine_users: usize) -> Result<Option<InjectionSpec>> {
        let Some(inj) = &self.inject else {
            return Ok(None);
        };
        Ok(Some(InjectionSpec {
            kind: inj.kind,
            n_profiles: inj.profile_count(n_genuine_users)?,
            filler_fraction: inj.filler_fraction,
            target_item: inj.target_item,
            seed: inj.seed.unwrap_or_else(|| derive_seed(self.seed, "inject")),
        }))
    }

    /// Defaults from the data, then shared overrides, then per-algorithm.
    pub fn clustering_params(&self, algorithm: Algorithm, dm: &DistanceMatrix) -> ClusteringParams {
        let seed = derive_seed(self.seed, &format!("cluster/{}", algorithm.name()));
        let mut p = ClusteringParams::defaults_for(dm, seed);
        self.clustering.shared().apply(&mut p);
        self.clustering.overrides(algorithm).apply(&mut p);
        p
    }
}
