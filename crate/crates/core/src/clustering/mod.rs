//! The four base clusterings: Lloyd k-means, PAM k-medoids, DBSCAN and
//! DIANA-style divisive splitting.
//!
//! Each algorithm returns a [`Partition`] over the full user universe. Users
//! without ratings are never clustered. Labels are canonical: clusters are
//! numbered in order of their lowest-indexed member, so two partitions with
//! the same groups compare equal regardless of how an algorithm numbered
//! them internally.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};

mod dbscan;
mod divisive;
mod kmeans;
mod kmedoids;

pub use dbscan::dbscan;
pub use divisive::divisive;
pub use kmeans::{kmeans, kmeans_traced, KMeansTrace};
pub use kmedoids::{kmedoids, kmedoids_traced, KMedoidsTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    KMeans,
    KMedoids,
    Dbscan,
    Divisive,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::KMeans,
        Algorithm::KMedoids,
        Algorithm::Dbscan,
        Algorithm::Divisive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::KMedoids => "kmedoids",
            Algorithm::Dbscan => "dbscan",
            Algorithm::Divisive => "divisive",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config(format!("unknown algorithm `{s}`")))
    }
}

/// One algorithm's cluster assignment. `None` means unassigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    algorithm: Algorithm,
    labels: Vec<Option<usize>>,
    sizes: Vec<usize>,
}

impl Partition {
    /// Build a partition from arbitrary labels; labels are renumbered
    /// canonically.
    pub fn from_labels(algorithm: Algorithm, labels: Vec<Option<usize>>) -> Self {
        let mut remap: Vec<Option<usize>> = Vec::new();
        let mut sizes = Vec::new();
        let labels = labels
            .into_iter()
            .map(|l| {
                l.map(|l| {
                    if l >= remap.len() {
                        remap.resize(l + 1, None);
                    }
                    let c = *remap[l].get_or_insert_with(|| {
                        sizes.push(0);
                        sizes.len() - 1
                    });
                    sizes[c] += 1;
                    c
                })
            })
            .collect();
        Partition {
            algorithm,
            labels,
            sizes,
        }
    }

    /// Convenience constructor from member lists of user indices.
    pub fn from_clusters(algorithm: Algorithm, n_users: usize, clusters: &[&[usize]]) -> Self {
        let mut labels = vec![None; n_users];
        for (c, members) in clusters.iter().enumerate() {
            for &u in members.iter() {
                labels[u] = Some(c);
            }
        }
        Partition::from_labels(algorithm, labels)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn n_users(&self) -> usize {
        self.labels.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn label(&self, user: usize) -> Option<usize> {
        self.labels[user]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn cluster_size_of(&self, user: usize) -> Option<usize> {
        self.labels[user].map(|c| self.sizes[c])
    }

    /// Members of each cluster, ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.sizes.len()];
        for (u, l) in self.labels.iter().enumerate() {
            if let Some(c) = l {
                out[*c].push(u);
            }
        }
        out
    }

    pub fn unassigned(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&u| self.labels[u].is_none()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringParams {
    pub k: usize,
    pub eps: f64,
    pub min_pts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl ClusteringParams {
    /// Heuristic defaults for a real dataset: `k = round(sqrt(n_rated / 2))`,
    /// `eps` = 25th percentile of defined distances, `min_pts = 4`,
    /// `max_iters = 100`.
    pub fn defaults_for(dm: &DistanceMatrix, seed: u64) -> Self {
        let n_rated = dm.rated_users().len();
        ClusteringParams {
            k: default_k(n_rated),
            eps: dm.quantile(0.25).filter(|&e| e > 0.0).unwrap_or(f64::MIN_POSITIVE),
            min_pts: 4,
            max_iters: 100,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be >= 1"));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::config("eps must be > 0"));
        }
        if self.min_pts == 0 {
            return Err(Error::config("min_pts must be >= 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be >= 1"));
        }
        Ok(())
    }
}

pub fn default_k(n_rated: usize) -> usize {
    ((n_rated as f64 / 2.0).sqrt().round() as usize).max(1)
}

fn require_k(k: usize, n_eligible: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::config("k must be >= 1"));
    }
    if n_eligible < k {
        return Err(Error::config(format!(
            "k = {k} exceeds the {n_eligible} users with at least one rating"
        )));
    }
    Ok(())
}

/// Dense distances among rated users, undefined pairs set to the penalty.
pub(crate) struct EligibleDistances {
    pub users: Vec<usize>,
    data: Vec<f64>,
}

impl EligibleDistances {
    pub fn new(dm: &DistanceMatrix) -> Self {
        let users = dm.rated_users();
        let m = users.len();
        let mut data = vec![0.0; m * m];
        for i in 0..m {
            for j in i + 1..m {
                let d = dm.get_or_penalty(users[i], users[j]);
                data[i * m + j] = d;
                data[j * m + i] = d;
            }
        }
        EligibleDistances { users, data }
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.users.len() + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.users.len();
        &self.data[i * m..(i + 1) * m]
    }

    /// Lift local cluster labels back to the full user universe.
    pub fn partition(&self, algorithm: Algorithm, n_users: usize, local: &[usize]) -> Partition {
        let mut labels = vec![None; n_users];
        for (i, &u) in self.users.iter().enumerate() {
            labels[u] = Some(local[i]);
        }
        Partition::from_labels(algorithm, labels)
    }
}
