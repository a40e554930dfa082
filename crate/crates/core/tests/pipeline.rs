mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cfoutlier::ensemble::OutlierStatus;
use cfoutlier::fixtures;
use cfoutlier::ingest::{AttackKind, Format};
use cfoutlier::pipeline::{self, InjectConfig, PipelineConfig, Run, Stage};
use cfoutlier::Error;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Every file under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// A small random ratings file plus a config over it with 4 attack profiles.
fn synthetic(dir: &Path, seed: u64) -> PipelineConfig {
    let mut rng = common::rng(seed);
    let ds = common::random_dataset(&mut rng, 40, 30, 0.35);
    let data = dir.join("ratings.data");
    std::fs::write(&data, ds.to_movielens_string()).unwrap();
    let mut cfg = PipelineConfig::new(&data, Format::Ml100kTab, dir.join("out"));
    cfg.seed = seed;
    cfg.inject = Some(InjectConfig {
        kind: AttackKind::Random,
        n_profiles: Some(4),
        profile_fraction: None,
        filler_fraction: 0.3,
        target_item: None,
        seed: None,
    });
    cfg.clustering.k = Some(3);
    cfg.recommend.neighbors = vec![5, 10];
    cfg.recommend.top_n = vec![2, 4];
    cfg
}

#[test]
fn toy_run_reproduces_the_final_table() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::from_file(configs_dir().join("toy.toml")).unwrap();
    cfg.out_dir = tmp.path().to_path_buf();
    let summary = pipeline::run_pipeline(&cfg).unwrap();

    let text = std::fs::read_to_string(tmp.path().join(pipeline::COASSOCIATION)).unwrap();
    let rows: Vec<Vec<usize>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|c| c.parse().unwrap_or(0)).collect())
        .collect();
    let want: Vec<Vec<usize>> = fixtures::TABLE_DIVISIVE.iter().map(|r| r.to_vec()).collect();
    assert_eq!(rows, want);

    let statuses: Vec<OutlierStatus> = summary.outliers.users.iter().map(|u| u.status).collect();
    use OutlierStatus::*;
    assert_eq!(
        statuses,
        [Normal, Normal, Normal, Normal, LocalOutlier, Normal, GlobalOutlier, GlobalOutlier]
    );
    assert!(tmp.path().join(pipeline::MANIFEST).exists());
    assert!(!tmp.path().join(pipeline::INCOMPLETE).exists());
}

#[test]
fn stage_by_stage_matches_a_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = synthetic(tmp.path(), 7);
    pipeline::run_pipeline(&cfg).unwrap();
    let full = snapshot(&cfg.out_dir);

    cfg.out_dir = tmp.path().join("staged");
    for stage in Stage::ALL {
        // A fresh runner per stage reads everything back from disk.
        Run::new(&cfg).stage(stage).unwrap();
    }
    pipeline::write_manifest(&cfg).unwrap();
    assert_eq!(full, snapshot(&cfg.out_dir));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = synthetic(tmp.path(), 11);
    cfg.threads = Some(1);
    pipeline::run_pipeline(&cfg).unwrap();
    let first = snapshot(&cfg.out_dir);

    cfg.out_dir = tmp.path().join("again");
    cfg.threads = Some(4);
    pipeline::run_pipeline(&cfg).unwrap();
    assert_eq!(first, snapshot(&cfg.out_dir));
}

#[test]
fn a_stage_without_its_inputs_names_the_missing_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synthetic(tmp.path(), 3);
    std::fs::create_dir_all(&cfg.out_dir).unwrap();
    let err = Run::new(&cfg).stage(Stage::Detect).unwrap_err();
    match &err {
        Error::Stage { stage, source } => {
            assert_eq!(*stage, "detect");
            assert!(matches!(**source, Error::MissingStage { stage: "ingest", .. }), "{source}");
        }
        other => panic!("unexpected {other}"),
    }
    assert!(err.to_string().contains("run the `ingest` stage first"));
}

#[test]
fn failures_leave_an_incomplete_marker_and_no_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = synthetic(tmp.path(), 5);
    pipeline::run_pipeline(&cfg).unwrap();
    cfg.dataset.path = tmp.path().join("missing.data");
    let err = pipeline::run_pipeline(&cfg).unwrap_err();
    assert!(err.to_string().starts_with("[ingest]"));
    let marker = std::fs::read_to_string(cfg.out_dir.join(pipeline::INCOMPLETE)).unwrap();
    assert!(marker.starts_with("[ingest]"));
    assert!(!cfg.out_dir.join(pipeline::MANIFEST).exists());
}

#[test]
fn zero_profiles_is_the_same_as_no_injection() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = synthetic(tmp.path(), 9);
    cfg.inject.as_mut().unwrap().n_profiles = Some(0);
    pipeline::run_pipeline(&cfg).unwrap();
    let with_zero = snapshot(&cfg.out_dir);

    cfg.inject = None;
    cfg.out_dir = tmp.path().join("plain");
    pipeline::run_pipeline(&cfg).unwrap();
    let plain = snapshot(&cfg.out_dir);
    // Only the config hash in the manifest differs.
    let strip = |mut m: BTreeMap<String, Vec<u8>>| {
        m.remove(pipeline::MANIFEST);
        m
    };
    assert_eq!(strip(with_zero), strip(plain));
}

#[test]
fn the_injection_seed_does_not_move_the_split() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = synthetic(tmp.path(), 13);
    Run::new(&cfg).ingest().unwrap();
    let test_a = std::fs::read(cfg.out_dir.join(pipeline::TEST)).unwrap();
    let train_a = std::fs::read(cfg.out_dir.join(pipeline::TRAIN)).unwrap();

    cfg.inject.as_mut().unwrap().seed = Some(999);
    cfg.out_dir = tmp.path().join("reseeded");
    let summary = Run::new(&cfg).ingest().unwrap();
    let test_b = std::fs::read(cfg.out_dir.join(pipeline::TEST)).unwrap();
    let train_b = std::fs::read(cfg.out_dir.join(pipeline::TRAIN)).unwrap();
    assert_eq!(test_a, test_b);
    assert_ne!(train_a, train_b);
    assert_eq!(summary.injected.len(), 4);
    assert_eq!(summary.n_train + summary.n_test, summary.n_ratings + 4 * 9);
}

#[test]
fn injected_profiles_are_scored_in_the_detection_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synthetic(tmp.path(), 17);
    let summary = pipeline::run_pipeline(&cfg).unwrap();
    assert_eq!(summary.detection.n_injected, 4);
    assert_eq!(summary.detection.n_genuine, 40);
    let text = std::fs::read_to_string(cfg.out_dir.join(pipeline::DETECTION)).unwrap();
    let parsed: pipeline::DetectionSummary = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed, summary.detection);
}
