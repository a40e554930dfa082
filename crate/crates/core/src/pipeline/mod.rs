//! End-to-end runs and the per-stage entry points behind the CLI.
//!
//! A run moves through seven stages, each reading the files written by the
//! ones before it in the output directory:
//!
//! | stage       | reads                                   | writes |
//! |-------------|-----------------------------------------|--------|
//! | `ingest`    | the dataset                             | `train.data`, `test.data`, `injected.json` |
//! | `distances` | `train.data`                            | `distances.csv` |
//! | `cluster`   | `train.data`, `distances.csv`           | `partitions.csv`, `clustering.json` |
//! | `ensemble`  | `partitions.csv`                        | `coassociation.csv` |
//! | `detect`    | `partitions.csv`, `injected.json`       | `outliers.json`, `detection.json` |
//! | `recommend` | the above                               | `<method>/predictions-k*.csv`, `<method>/recommendations-k*-n*.csv` |
//! | `evaluate`  | `test.data`, the `recommend` output     | `<method>/metrics.{csv,json}`, `metrics.csv` |
//!
//! [`run_pipeline`] runs all of them through one [`Run`], which keeps each
//! stage's result in memory for the next; a fresh [`Run`] per stage reads
//! everything back from disk and produces the same files.

mod artifacts;
mod config;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use artifacts::{
    predictions_file, recommendations_file, read_partitions, write_partitions, CLUSTER_PARAMS, COASSOCIATION,
    DETECTION, DISTANCES, INCOMPLETE, INJECTED, MANIFEST, METRICS, OUTLIERS, PARTITIONS, TEST, TRAIN,
};
pub use config::*;

use crate::clustering::{self, Algorithm, ClusteringParams, Partition};
use crate::distance::{build_distance_matrix, build_vectors, DistanceMatrix};
use crate::ensemble::{accumulate, detect_outliers, CoAssociationMatrix, EnsembleParams, OutlierReport};
use crate::error::{Error, Result};
use crate::evaluate::{f_measure, mae_with, precision_recall, MetricsPoint, MetricsReport, ScoredPair};
use crate::ingest::{inject_profiles, normalize, parse_movielens, split, RatingsDataset};
use crate::recommend::{build_neighbor_model, DistanceSimilarity, Predictor, SimilaritySource, UserSimilarity};
use artifacts::PredictionRow;

/// The stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Distances,
    Cluster,
    Ensemble,
    Detect,
    Recommend,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Distances,
        Stage::Cluster,
        Stage::Ensemble,
        Stage::Detect,
        Stage::Recommend,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Distances => "distances",
            Stage::Cluster => "cluster",
            Stage::Ensemble => "ensemble",
            Stage::Detect => "detect",
            Stage::Recommend => "recommend",
            Stage::Evaluate => "evaluate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub n_users: usize,
    pub n_items: usize,
    pub n_ratings: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub injected: BTreeSet<u32>,
}

/// How well the outlier report isolates injected profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub n_injected: usize,
    pub injected_flagged: usize,
    /// Share of injected users flagged LOCAL or GLOBAL.
    pub detection_recall: f64,
    pub n_genuine: usize,
    pub genuine_flagged: usize,
    /// Share of genuine users flagged.
    pub genuine_flag_rate: f64,
}

impl DetectionSummary {
    pub fn new(report: &OutlierReport, injected: &BTreeSet<u32>) -> Self {
        let (mut n_injected, mut injected_flagged, mut n_genuine, mut genuine_flagged) = (0, 0, 0, 0);
        for u in &report.users {
            let flagged = u.status.is_outlier() as usize;
            if injected.contains(&u.user) {
                n_injected += 1;
                injected_flagged += flagged;
            } else {
                n_genuine += 1;
                genuine_flagged += flagged;
            }
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        DetectionSummary {
            n_injected,
            injected_flagged,
            detection_recall: ratio(injected_flagged, n_injected),
            n_genuine,
            genuine_flagged,
            genuine_flag_rate: ratio(genuine_flagged, n_genuine),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringRecord {
    pub algorithm: Algorithm,
    /// `None` when the partition was loaded from a file.
    pub params: Option<ClusteringParams>,
    pub n_clusters: usize,
    pub n_unassigned: usize,
}

#[derive(Serialize)]
struct Manifest {
    version: &'static str,
    seed: u64,
    config_sha256: String,
    artifacts: Vec<ManifestEntry>,
}

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
}

/// Outcome of a complete run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub ingest: IngestSummary,
    pub outliers: OutlierReport,
    pub detection: DetectionSummary,
    pub metrics: Vec<MetricsReport>,
}

/// Stage runner over one output directory. Results are cached, so running
/// stages in order on one `Run` avoids re-reading files.
pub struct Run<'a> {
    cfg: &'a PipelineConfig,
    train: Option<RatingsDataset>,
    test: Option<RatingsDataset>,
    injected: Option<BTreeSet<u32>>,
    distances: Option<DistanceMatrix>,
    partitions: Option<Vec<Partition>>,
    report: Option<OutlierReport>,
}

impl<'a> Run<'a> {
    pub fn new(cfg: &'a PipelineConfig) -> Self {
        Run {
            cfg,
            train: None,
            test: None,
            injected: None,
            distances: None,
            partitions: None,
            report: None,
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    /// Run one stage by name.
    pub fn stage(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Ingest => self.ingest().map(drop),
            Stage::Distances => self.distances(),
            Stage::Cluster => self.cluster().map(drop),
            Stage::Ensemble => self.ensemble().map(drop),
            Stage::Detect => self.detect().map(drop),
            Stage::Recommend => self.recommend(),
            Stage::Evaluate => self.evaluate().map(drop),
        }
    }

    /// Parse, split, then inject attack profiles into the training half.
    pub fn ingest(&mut self) -> Result<IngestSummary> {
        self.ingest_inner().map_err(|e| e.in_stage("ingest"))
    }

    fn ingest_inner(&mut self) -> Result<IngestSummary> {
        let cfg = self.cfg;
        let data = parse_movielens(&cfg.dataset.path, cfg.dataset.format)?;
        let (train, test) = split(&data, &cfg.split_spec())?;
        let (train, injected) = match cfg.injection_spec(data.n_users())? {
            Some(spec) => inject_profiles(&train, &spec)?,
            None => (train, BTreeSet::new()),
        };
        // Injected users exist in train only; give test the same universe.
        let test = RatingsDataset::with_universe(
            train.user_ids().iter().copied(),
            train.item_ids().iter().copied(),
            test.records(),
        )?;
        artifacts::write_file(&self.out(TRAIN), |w| {
            train.write_movielens(w).map_err(|e| Error::io(self.out(TRAIN), e))
        })?;
        artifacts::write_file(&self.out(TEST), |w| {
            test.write_movielens(w).map_err(|e| Error::io(self.out(TEST), e))
        })?;
        artifacts::write_string(&self.out(INJECTED), &to_json(&injected))?;
        let summary = IngestSummary {
            n_users: data.n_users(),
            n_items: data.n_items(),
            n_ratings: data.n_ratings(),
            n_train: train.n_ratings(),
            n_test: test.n_ratings(),
            injected: injected.clone(),
        };
        self.train = Some(train);
        self.test = Some(test);
        self.injected = Some(injected);
        Ok(summary)
    }

    fn load_train(&mut self) -> Result<&RatingsDataset> {
        if self.train.is_none() {
            self.train = Some(artifacts::read_dataset(&self.out(TRAIN), "ingest")?);
        }
        Ok(self.train.as_ref().expect("loaded"))
    }

    fn load_test(&mut self) -> Result<&RatingsDataset> {
        if self.test.is_none() {
            self.test = Some(artifacts::read_dataset(&self.out(TEST), "ingest")?);
        }
        Ok(self.test.as_ref().expect("loaded"))
    }

    fn load_injected(&mut self) -> Result<&BTreeSet<u32>> {
        if self.injected.is_none() {
            let path = self.out(INJECTED);
            let text = artifacts::read_upstream_string(&path, "ingest")?;
            self.injected = Some(serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?);
        }
        Ok(self.injected.as_ref().expect("loaded"))
    }

    /// Pairwise user distances over the training half.
    pub fn distances(&mut self) -> Result<()> {
        self.distances_inner().map_err(|e| e.in_stage("distances"))
    }

    fn distances_inner(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let params = cfg.distance.params();
        params.validate()?;
        let path = self.out(DISTANCES);
        let train = self.load_train()?;
        let vectors = build_vectors(&normalize(train));
        let dm = build_distance_matrix(&vectors, &params);
        if cfg.distance.dump {
            let ids = train.user_ids();
            artifacts::write_file(&path, |w| dm.write_csv(ids, w))?;
        }
        self.distances = Some(dm);
        Ok(())
    }

    fn load_distances(&mut self) -> Result<&DistanceMatrix> {
        if self.distances.is_none() {
            let path = self.out(DISTANCES);
            let reader = artifacts::open_upstream(&path, "distances")?;
            let penalty = self.cfg.distance.penalty;
            let train = self.load_train()?;
            let vectors = build_vectors(&normalize(train));
            let dm = DistanceMatrix::read_csv(&vectors, penalty, reader)
                .map_err(|e| Error::format(&path, e.to_string()))?;
            self.distances = Some(dm);
        }
        Ok(self.distances.as_ref().expect("loaded"))
    }

    /// Run the configured clusterings, or load them from
    /// `clustering.partitions`.
    pub fn cluster(&mut self) -> Result<Vec<ClusteringRecord>> {
        self.cluster_inner().map_err(|e| e.in_stage("cluster"))
    }

    fn cluster_inner(&mut self) -> Result<Vec<ClusteringRecord>> {
        let cfg = self.cfg;
        let algorithms = &cfg.clustering.algorithms;
        let user_ids = self.load_train()?.user_ids().to_vec();
        let (partitions, params): (Vec<Partition>, Vec<Option<ClusteringParams>>) =
            if let Some(path) = &cfg.clustering.partitions {
                let loaded = read_partitions(path, "cluster", &user_ids)?;
                let picked = algorithms
                    .iter()
                    .map(|a| {
                        loaded
                            .iter()
                            .find(|p| p.algorithm() == *a)
                            .cloned()
                            .ok_or_else(|| Error::format(path, format!("no partition for {a}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let n = picked.len();
                (picked, vec![None; n])
            } else {
                self.load_distances()?;
                let train = self.train.as_ref().expect("loaded");
                let dm = self.distances.as_ref().expect("loaded");
                let vectors = build_vectors(&normalize(train));
                algorithms
                    .iter()
                    .map(|&a| {
                        let p = cfg.clustering_params(a, dm);
                        let partition = match a {
                            Algorithm::KMeans => clustering::kmeans(&vectors, train.n_items(), &p),
                            Algorithm::KMedoids => clustering::kmedoids(dm, &p),
                            Algorithm::Dbscan => {
                                p.validate().map(|()| clustering::dbscan(dm, &p))
                            }
                            Algorithm::Divisive => clustering::divisive(dm, &p),
                        }
                        .map_err(|e| Error::config(format!("{a}: {e}")))?;
                        Ok((partition, Some(p)))
                    })
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .unzip()
            };
        write_partitions(&self.out(PARTITIONS), &partitions, &user_ids)?;
        let records: Vec<ClusteringRecord> = partitions
            .iter()
            .zip(params)
            .map(|(p, params)| ClusteringRecord {
                algorithm: p.algorithm(),
                params,
                n_clusters: p.n_clusters(),
                n_unassigned: p.unassigned().len(),
            })
            .collect();
        artifacts::write_string(&self.out(CLUSTER_PARAMS), &to_json(&records))?;
        self.partitions = Some(partitions);
        Ok(records)
    }

    fn load_partitions(&mut self) -> Result<&[Partition]> {
        if self.partitions.is_none() {
            let user_ids = self.load_train()?.user_ids().to_vec();
            self.partitions = Some(read_partitions(&self.out(PARTITIONS), "cluster", &user_ids)?);
        }
        Ok(self.partitions.as_deref().expect("loaded"))
    }

    /// Accumulate the partitions into the co-association matrix.
    pub fn ensemble(&mut self) -> Result<CoAssociationMatrix> {
        self.ensemble_inner().map_err(|e| e.in_stage("ensemble"))
    }

    fn ensemble_inner(&mut self) -> Result<CoAssociationMatrix> {
        self.load_partitions()?;
        let s = accumulate(self.partitions.as_deref().expect("loaded"))?;
        let ids = self.train.as_ref().expect("loaded").user_ids();
        let path = self.out(COASSOCIATION);
        artifacts::write_file(&path, |w| s.write_csv(ids, w).map_err(|e| Error::io(&path, e)))?;
        Ok(s)
    }

    /// Classify users and score the classification against the injected
    /// profiles.
    pub fn detect(&mut self) -> Result<OutlierReport> {
        self.detect_inner().map_err(|e| e.in_stage("detect"))
    }

    fn detect_inner(&mut self) -> Result<OutlierReport> {
        self.load_partitions()?;
        self.load_injected()?;
        let partitions = self.partitions.as_deref().expect("loaded");
        let ids = self.train.as_ref().expect("loaded").user_ids();
        let report = detect_outliers(partitions, ids, &self.cfg.ensemble)?;
        artifacts::write_string(&self.out(OUTLIERS), &report.to_json())?;
        let summary = DetectionSummary::new(&report, self.injected.as_ref().expect("loaded"));
        artifacts::write_string(&self.out(DETECTION), &to_json(&summary))?;
        self.report = Some(report.clone());
        Ok(report)
    }

    fn load_report(&mut self) -> Result<&OutlierReport> {
        if self.report.is_none() {
            let text = artifacts::read_upstream_string(&self.out(OUTLIERS), "detect")?;
            self.report = Some(OutlierReport::from_json(&text)?);
        }
        Ok(self.report.as_ref().expect("loaded"))
    }

    /// Predictions for every test rating and top-N lists, for every method
    /// and neighborhood size.
    pub fn recommend(&mut self) -> Result<()> {
        self.recommend_inner().map_err(|e| e.in_stage("recommend"))
    }

    fn recommend_inner(&mut self) -> Result<()> {
        let cfg = self.cfg;
        self.load_train()?;
        self.load_test()?;
        self.load_partitions()?;
        self.load_report()?;
        if cfg.recommend.methods.contains(&SimilaritySource::RawDistance) {
            self.load_distances()?;
        }
        let train = self.train.as_ref().expect("loaded");
        let test = self.test.as_ref().expect("loaded");
        let partitions = self.partitions.as_deref().expect("loaded");
        let report = self.report.as_ref().expect("loaded");
        if report.users.len() != train.n_users() {
            return Err(Error::config("outlier report does not cover the training users"));
        }
        let test_users: Vec<usize> = (0..test.n_users())
            .filter(|&u| !test.user_ratings(u).is_empty())
            .collect();
        let max_n = *cfg.recommend.top_n.iter().max().expect("validated");

        for &method in &cfg.recommend.methods {
            let dir = cfg.out_dir.join(method.to_string());
            let (similarity, own_report): (Box<dyn UserSimilarity + '_>, Option<OutlierReport>) = match method {
                SimilaritySource::Ensemble => (Box::new(accumulate(partitions)?), None),
                SimilaritySource::SingleAlgorithm(a) => {
                    let p = partitions
                        .iter()
                        .find(|p| p.algorithm() == a)
                        .ok_or_else(|| Error::config(format!("no {a} partition")))?;
                    let single = std::slice::from_ref(p);
                    let params = EnsembleParams {
                        tiny_cluster_max_size: cfg.ensemble.tiny_cluster_max_size,
                        local_vote_threshold: None,
                        global_vote_threshold: None,
                    };
                    let r = detect_outliers(single, train.user_ids(), &params)?;
                    (Box::new(accumulate(single)?), Some(r))
                }
                SimilaritySource::RawDistance => (
                    Box::new(DistanceSimilarity(self.distances.as_ref().expect("loaded"))),
                    None,
                ),
            };
            let method_report = own_report.as_ref().unwrap_or(report);
            for &k in &cfg.recommend.neighbors {
                let model = build_neighbor_model(
                    similarity.as_ref(),
                    method,
                    Some(method_report),
                    k,
                    cfg.recommend.filter_outliers,
                )?;
                let predictor = Predictor::new(&model, train)?;
                let rows: Vec<PredictionRow> = (0..test.n_users())
                    .into_par_iter()
                    .flat_map_iter(|u| {
                        let predictor = &predictor;
                        test.user_ratings(u).iter().map(move |r| {
                            PredictionRow::new(test.user_id(u), test.item_id(r.item), r.value, predictor.predict(u, r.item))
                        })
                    })
                    .collect();
                artifacts::write_predictions(&dir.join(predictions_file(k)), &rows)?;
                let ranked: Vec<Vec<(usize, f64)>> = test_users
                    .par_iter()
                    .map(|&u| {
                        let mut r = predictor.ranked_candidates(u);
                        r.truncate(max_n);
                        r
                    })
                    .collect();
                for &n in &cfg.recommend.top_n {
                    let lists: Vec<_> = test_users
                        .iter()
                        .zip(&ranked)
                        .map(|(&u, r)| predictor.list(u, n, r))
                        .collect();
                    artifacts::write_recommendations(&dir.join(recommendations_file(k, n)), &lists)?;
                }
            }
        }
        Ok(())
    }

    /// Score the dumped predictions and lists.
    pub fn evaluate(&mut self) -> Result<Vec<MetricsReport>> {
        self.evaluate_inner().map_err(|e| e.in_stage("evaluate"))
    }

    fn evaluate_inner(&mut self) -> Result<Vec<MetricsReport>> {
        let cfg = self.cfg;
        let test = self.load_test()?;
        let r = &cfg.recommend;
        let mut reports = Vec::new();
        for &method in &r.methods {
            let dir = cfg.out_dir.join(method.to_string());
            let mut points = Vec::new();
            for &k in &r.neighbors {
                let path = dir.join(predictions_file(k));
                let rows = artifacts::read_predictions(&path)?;
                let pairs = scored_pairs(test, &rows).map_err(|e| Error::format(&path, e.to_string()))?;
                let mae = mae_with(&pairs, r.mae_averaging)?;
                for &n in &r.top_n {
                    let lists = artifacts::read_recommendations(&dir.join(recommendations_file(k, n)), n)?;
                    let pr = precision_recall(&lists, test, r.like_threshold, n, r.pr_averaging)?;
                    points.push(MetricsPoint {
                        neighbors: k,
                        top_n: n,
                        mae,
                        precision: pr.precision,
                        recall: pr.recall,
                        f_measure: f_measure(pr.precision, pr.recall),
                        n_evaluated_users: pr.n_users,
                        n_test_ratings: pairs.len(),
                    });
                }
            }
            let report = MetricsReport {
                method: method.to_string(),
                points,
            };
            let path = dir.join(METRICS);
            artifacts::write_file(&path, |w| report.write_csv(w).map_err(|e| Error::io(&path, e)))?;
            artifacts::write_string(&dir.join("metrics.json"), &report.to_json())?;
            reports.push(report);
        }
        let path = self.out(METRICS);
        artifacts::write_file(&path, |w| {
            for (i, report) in reports.iter().enumerate() {
                let mut buf = Vec::new();
                report.write_csv(&mut buf).map_err(|e| Error::io(&path, e))?;
                let body = if i == 0 { &buf[..] } else { skip_line(&buf) };
                w.write_all(body).map_err(|e| Error::io(&path, e))?;
            }
            Ok(())
        })?;
        Ok(reports)
    }
}

fn skip_line(buf: &[u8]) -> &[u8] {
    buf.iter().position(|&b| b == b'\n').map_or(&[], |i| &buf[i + 1..])
}

/// Pair each test rating with its dumped prediction. Every test rating must
/// have exactly one prediction.
fn scored_pairs(test: &RatingsDataset, rows: &[PredictionRow]) -> Result<Vec<ScoredPair>> {
    if rows.len() != test.n_ratings() {
        return Err(Error::config(format!(
            "{} predictions for {} test ratings",
            rows.len(),
            test.n_ratings()
        )));
    }
    rows.iter()
        .map(|row| {
            row.provenance()?;
            let actual = test
                .user_index(row.user)
                .zip(test.item_index(row.item))
                .and_then(|(u, i)| test.rating(u, i))
                .ok_or_else(|| Error::config(format!("prediction for ({}, {}) has no test rating", row.user, row.item)))?;
            Ok(ScoredPair {
                user: row.user,
                actual: f64::from(actual),
                predicted: row.predicted,
            })
        })
        .collect()
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Record an error in the output directory.
pub fn mark_incomplete(out_dir: &Path, error: &Error) {
    let _ = std::fs::create_dir_all(out_dir);
    let _ = std::fs::write(out_dir.join(INCOMPLETE), format!("{error}\n"));
}

/// Write `manifest.json`: crate version, master seed, a hash of the config
/// (output directory and thread count excluded) and a hash of every
/// artifact.
pub fn write_manifest(cfg: &PipelineConfig) -> Result<()> {
    let mut hashed = cfg.clone();
    hashed.out_dir = PathBuf::new();
    hashed.threads = None;
    let artifacts = artifacts::list_files(&cfg.out_dir)?
        .into_iter()
        .filter(|p| p != Path::new(MANIFEST) && p != Path::new(INCOMPLETE))
        .map(|p| {
            Ok(ManifestEntry {
                sha256: artifacts::file_sha256(&cfg.out_dir.join(&p))?,
                path: p.to_string_lossy().replace('\\', "/"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config_sha256: artifacts::sha256_hex(hashed.to_toml_string().as_bytes()),
        artifacts,
    };
    artifacts::write_string(&cfg.out_dir.join(MANIFEST), &to_json(&manifest))
}

/// Run every stage. On failure the output directory receives an
/// `INCOMPLETE` marker holding the stage-tagged error and no manifest.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary> {
    let result = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?
            .install(|| run_stages(cfg)),
        None => run_stages(cfg),
    };
    if let Err(e) = &result {
        mark_incomplete(&cfg.out_dir, e);
    }
    result
}

fn run_stages(cfg: &PipelineConfig) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    for stale in [MANIFEST, INCOMPLETE] {
        let p = cfg.out_dir.join(stale);
        if p.exists() {
            std::fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    let mut run = Run::new(cfg);
    let ingest = run.ingest()?;
    run.distances()?;
    run.cluster()?;
    run.ensemble()?;
    let outliers = run.detect()?;
    run.recommend()?;
    let metrics = run.evaluate()?;
    write_manifest(cfg).map_err(|e| e.in_stage("manifest"))?;
    let detection = DetectionSummary::new(&outliers, &ingest.injected);
    Ok(RunSummary {
        ingest,
        outliers,
        detection,
        metrics,
    })
}
