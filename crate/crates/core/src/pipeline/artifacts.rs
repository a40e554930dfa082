//! Stage file formats.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::{Algorithm, Partition};
use crate::error::{Error, Result};
use crate::ingest::RatingsDataset;
use crate::recommend::{Prediction, Provenance, RecommendationList};

pub const TRAIN: &str = "train.data";
pub const TEST: &str = "test.data";
pub const INJECTED: &str = "injected.json";
pub const DISTANCES: &str = "distances.csv";
pub const PARTITIONS: &str = "partitions.csv";
pub const CLUSTER_PARAMS: &str = "clustering.json";
pub const COASSOCIATION: &str = "coassociation.csv";
pub const OUTLIERS: &str = "outliers.json";
pub const DETECTION: &str = "detection.json";
pub const METRICS: &str = "metrics.csv";
pub const MANIFEST: &str = "manifest.json";
pub const INCOMPLETE: &str = "INCOMPLETE";

pub fn predictions_file(neighbors: usize) -> String {
    format!("predictions-k{neighbors}.csv")
}

pub fn recommendations_file(neighbors: usize, top_n: usize) -> String {
    format!("recommendations-k{neighbors}-n{top_n}.csv")
}

/// Open a file written by `stage`, reporting a stage dependency error when
/// it does not exist.
pub fn open_upstream(path: &Path, stage: &'static str) -> Result<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingStage {
            stage,
            path: path.to_path_buf(),
        }),
        Err(e) => Err(Error::io(path, e)),
    }
}

pub fn read_upstream_string(path: &Path, stage: &'static str) -> Result<String> {
    let mut s = String::new();
    open_upstream(path, stage)?
        .read_to_string(&mut s)
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

/// Write through a buffered file, mapping I/O failures to the path.
pub fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_string(path: &Path, text: &str) -> Result<()> {
    write_file(path, |w| w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e)))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e.to_string())
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    write_file(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        for row in rows {
            out.serialize(row).map_err(|e| csv_error(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    })
}

fn read_rows<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(open_upstream(path, stage)?);
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| csv_error(path, e))
}

pub fn read_dataset(path: &Path, stage: &'static str) -> Result<RatingsDataset> {
    crate::ingest::parse_reader(open_upstream(path, stage)?, crate::ingest::Format::Ml100kTab)
        .map_err(|e| Error::format(path, e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct PartitionRow {
    user: u32,
    algorithm: Algorithm,
    label: Option<usize>,
}

/// `user,algorithm,label` rows; unassigned users have an empty label.
pub fn write_partitions(path: &Path, partitions: &[Partition], user_ids: &[u32]) -> Result<()> {
    write_rows(
        path,
        partitions.iter().flat_map(|p| {
            p.labels().iter().enumerate().map(|(u, &label)| PartitionRow {
                user: user_ids[u],
                algorithm: p.algorithm(),
                label,
            })
        }),
    )
}

/// Read partitions over `user_ids`, in the order algorithms first appear.
/// Every user must be listed exactly once per algorithm.
pub fn read_partitions(path: &Path, stage: &'static str, user_ids: &[u32]) -> Result<Vec<Partition>> {
    let rows: Vec<PartitionRow> = read_rows(path, stage)?;
    let mut order: Vec<Algorithm> = Vec::new();
    let mut labels: BTreeMap<Algorithm, Vec<Option<Option<usize>>>> = BTreeMap::new();
    for row in rows {
        let u = user_ids
            .binary_search(&row.user)
            .map_err(|_| Error::format(path, format!("unknown user {}", row.user)))?;
        let slot = labels.entry(row.algorithm).or_insert_with(|| {
            order.push(row.algorithm);
            vec![None; user_ids.len()]
        });
        if slot[u].replace(row.label).is_some() {
            return Err(Error::format(
                path,
                format!("user {} listed twice for {}", row.user, row.algorithm),
            ));
        }
    }
    order
        .into_iter()
        .map(|alg| {
            let labels = labels.remove(&alg).expect("collected above");
            let labels = labels
                .into_iter()
                .enumerate()
                .map(|(u, l)| {
                    l.ok_or_else(|| {
                        Error::format(path, format!("user {} missing for {alg}", user_ids[u]))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Partition::from_labels(alg, labels))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRow {
    pub user: u32,
    pub item: u32,
    pub rating: u8,
    pub predicted: f64,
    pub provenance: String,
}

impl PredictionRow {
    pub fn new(user: u32, item: u32, rating: u8, p: Prediction) -> Self {
        PredictionRow {
            user,
            item,
            rating,
            predicted: p.value,
            provenance: p.provenance.as_str().to_string(),
        }
    }

    pub fn provenance(&self) -> Result<Provenance> {
        self.provenance.parse()
    }
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    read_rows(path, "recommend")
}

#[derive(Serialize, Deserialize)]
struct RecommendationRow {
    user: u32,
    rank: usize,
    item: u32,
    predicted_rating: f64,
}

/// `user,rank,item,predicted_rating`, ranks starting at 1.
pub fn write_recommendations(path: &Path, lists: &[RecommendationList]) -> Result<()> {
    write_rows(
        path,
        lists.iter().flat_map(|l| {
            l.items.iter().enumerate().map(|(r, &(item, p))| RecommendationRow {
                user: l.user,
                rank: r + 1,
                item,
                predicted_rating: p,
            })
        }),
    )
}

pub fn read_recommendations(path: &Path, top_n: usize) -> Result<Vec<RecommendationList>> {
    let rows: Vec<RecommendationRow> = read_rows(path, "recommend")?;
    let mut lists: Vec<RecommendationList> = Vec::new();
    for row in rows {
        match lists.last_mut() {
            Some(l) if l.user == row.user => {
                if row.rank != l.items.len() + 1 {
                    return Err(Error::format(path, format!("user {} ranks out of order", row.user)));
                }
                l.items.push((row.item, row.predicted_rating));
            }
            _ => {
                if row.rank != 1 {
                    return Err(Error::format(path, format!("user {} ranks out of order", row.user)));
                }
                lists.push(RecommendationList {
                    user: row.user,
                    top_n,
                    items: vec![(row.item, row.predicted_rating)],
                });
            }
        }
    }
    Ok(lists)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut f = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Every regular file under `dir`, relative to it, sorted.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let path = entry.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                out.push(path.strip_prefix(root).expect("under root").to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}
