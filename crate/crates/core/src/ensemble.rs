//! Co-association accumulation and local/global outlier voting.
//!
//! `S(u, v)` counts the partitions that put `u` and `v` in the same cluster;
//! the diagonal `S(u, u)` counts the partitions that assign `u` at all. A
//! user left unassigned by at least `G` partitions is a global outlier. A
//! user placed in a cluster of at most `tiny_cluster_max_size` members by at
//! least `V` partitions is a local outlier, unless it is already global.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::clustering::{Algorithm, Partition};
use crate::error::{Error, Result};

/// Symmetric integer co-association counts over `n_users`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoAssociationMatrix {
    n: usize,
    n_algorithms: usize,
    counts: Vec<u16>,
}

impl CoAssociationMatrix {
    pub fn n_users(&self) -> usize {
        self.n
    }

    pub fn n_algorithms(&self) -> usize {
        self.n_algorithms
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> usize {
        self.counts[u * self.n + v] as usize
    }

    pub fn row(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.counts[u * self.n..(u + 1) * self.n].iter().map(|&c| c as usize)
    }

    /// `S(u, v) / A`, in [0, 1].
    pub fn consensus(&self, u: usize, v: usize) -> f64 {
        self.get(u, v) as f64 / self.n_algorithms as f64
    }

    /// Dump in table layout: a header row of user ids, then one row per
    /// user. Zero counts are left blank.
    pub fn write_csv<W: Write>(&self, user_ids: &[u32], mut out: W) -> std::io::Result<()> {
        write!(out, "user")?;
        for id in user_ids {
            write!(out, ",{id}")?;
        }
        writeln!(out)?;
        for u in 0..self.n {
            write!(out, "{}", user_ids[u])?;
            for c in self.row(u) {
                if c == 0 {
                    write!(out, ",")?;
                } else {
                    write!(out, ",{c}")?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn check_universe(partitions: &[Partition]) -> Result<usize> {
    let first = partitions
        .first()
        .ok_or_else(|| Error::config("at least one partition is required"))?;
    let n = first.n_users();
    if let Some(p) = partitions.iter().find(|p| p.n_users() != n) {
        return Err(Error::config(format!(
            "partition `{}` covers {} users, expected {n}",
            p.algorithm(),
            p.n_users()
        )));
    }
    if partitions.len() > u16::MAX as usize {
        return Err(Error::config("too many partitions"));
    }
    Ok(n)
}

/// Accumulate partitions into a co-association matrix.
pub fn accumulate(partitions: &[Partition]) -> Result<CoAssociationMatrix> {
    let n = check_universe(partitions)?;
    let mut counts = vec![0u16; n * n];
    for p in partitions {
        for members in p.clusters() {
            for &u in &members {
                let row = &mut counts[u * n..(u + 1) * n];
                for &v in &members {
                    row[v] += 1;
                }
            }
        }
    }
    Ok(CoAssociationMatrix {
        n,
        n_algorithms: partitions.len(),
        counts,
    })
}

/// Normalized consensus similarity `S / A` as a dense row-major matrix.
pub fn consensus_similarity(s: &CoAssociationMatrix) -> Vec<f64> {
    (0..s.n * s.n)
        .map(|i| s.counts[i] as f64 / s.n_algorithms as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleParams {
    #[serde(default = "default_tiny")]
    pub tiny_cluster_max_size: usize,
    /// Local-outlier vote threshold; `None` means a majority, `ceil(A / 2)`.
    #[serde(default)]
    pub local_vote_threshold: Option<usize>,
    /// Global-outlier vote threshold; `None` means every partition.
    #[serde(default)]
    pub global_vote_threshold: Option<usize>,
}

fn default_tiny() -> usize {
    2
}

impl Default for EnsembleParams {
    fn default() -> Self {
        EnsembleParams {
            tiny_cluster_max_size: default_tiny(),
            local_vote_threshold: None,
            global_vote_threshold: None,
        }
    }
}

impl EnsembleParams {
    /// Resolved (V, G) for `a` partitions.
    pub fn thresholds(&self, a: usize) -> Result<(usize, usize)> {
        let v = self.local_vote_threshold.unwrap_or(a.div_ceil(2));
        let g = self.global_vote_threshold.unwrap_or(a);
        if !(1..=a).contains(&v) {
            return Err(Error::config(format!("local vote threshold {v} outside [1, {a}]")));
        }
        if !(1..=a).contains(&g) {
            return Err(Error::config(format!("global vote threshold {g} outside [1, {a}]")));
        }
        Ok((v, g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OutlierStatus {
    Normal,
    LocalOutlier,
    GlobalOutlier,
}

impl OutlierStatus {
    pub fn is_outlier(self) -> bool {
        self != OutlierStatus::Normal
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub algorithm: Algorithm,
    pub label: Option<usize>,
    pub cluster_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserOutlier {
    pub user: u32,
    pub status: OutlierStatus,
    pub local_votes: usize,
    pub unassigned_votes: usize,
    pub evidence: Vec<Evidence>,
}

/// Per-user classification, in user-index order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutlierReport {
    pub users: Vec<UserOutlier>,
}

impl OutlierReport {
    pub fn status(&self, user: usize) -> OutlierStatus {
        self.users[user].status
    }

    pub fn is_outlier(&self, user: usize) -> bool {
        self.users[user].status.is_outlier()
    }

    pub fn count(&self, status: OutlierStatus) -> usize {
        self.users.iter().filter(|u| u.status == status).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("outlier report: {e}")))
    }
}

/// Classify every user. `user_ids` maps user indices to raw ids.
pub fn detect_outliers(
    partitions: &[Partition],
    user_ids: &[u32],
    params: &EnsembleParams,
) -> Result<OutlierReport> {
    let n = check_universe(partitions)?;
    if user_ids.len() != n {
        return Err(Error::config("user id list does not match the partitions"));
    }
    let (v_threshold, g_threshold) = params.thresholds(partitions.len())?;
    let users = (0..n)
        .map(|u| {
            let evidence: Vec<Evidence> = partitions
                .iter()
                .map(|p| Evidence {
                    algorithm: p.algorithm(),
                    label: p.label(u),
                    cluster_size: p.cluster_size_of(u),
                })
                .collect();
            let unassigned_votes = evidence.iter().filter(|e| e.label.is_none()).count();
            let local_votes = evidence
                .iter()
                .filter(|e| e.cluster_size.is_some_and(|s| s <= params.tiny_cluster_max_size))
                .count();
            let status = if unassigned_votes >= g_threshold {
                OutlierStatus::GlobalOutlier
            } else if local_votes >= v_threshold {
                OutlierStatus::LocalOutlier
            } else {
                OutlierStatus::Normal
            };
            UserOutlier {
                user: user_ids[u],
                status,
                local_votes,
                unassigned_votes,
                evidence,
            }
        })
        .collect();
    Ok(OutlierReport { users })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn single_big_cluster_is_all_normal() {
        let p = Partition::from_clusters(Algorithm::KMeans, 5, &[&[0, 1, 2, 3, 4]]);
        let r = detect_outliers(&[p], &[1, 2, 3, 4, 5], &EnsembleParams::default()).unwrap();
        assert!(r.users.iter().all(|u| u.status == OutlierStatus::Normal));
    }

    #[test]
    fn mismatched_universe_is_config_error() {
        let a = Partition::from_clusters(Algorithm::KMeans, 3, &[&[0, 1, 2]]);
        let b = Partition::from_clusters(Algorithm::Dbscan, 4, &[&[0, 1, 2]]);
        assert!(matches!(accumulate(&[a, b]), Err(Error::Config(_))));
        assert!(matches!(accumulate(&[]), Err(Error::Config(_))));
    }

    #[test]
    fn consensus_values() {
        let s = accumulate(&fixtures::published_partitions()).unwrap();
        assert_eq!(s.consensus(0, 1), 0.75);
        assert_eq!(s.consensus(5, 5), 1.0);
        assert_eq!(s.consensus(0, 6), 0.0);
        let dense = consensus_similarity(&s);
        assert_eq!(dense[1], 0.75);
    }

    #[test]
    fn threshold_bounds() {
        let p = EnsembleParams {
            local_vote_threshold: Some(5),
            ..Default::default()
        };
        assert!(p.thresholds(4).is_err());
        assert_eq!(EnsembleParams::default().thresholds(4).unwrap(), (2, 4));
        assert_eq!(EnsembleParams::default().thresholds(1).unwrap(), (1, 1));
        assert_eq!(EnsembleParams::default().thresholds(3).unwrap(), (2, 3));
    }

    #[test]
    fn report_json_shape() {
        let parts = fixtures::published_partitions();
        let r = detect_outliers(&parts, &fixtures::TOY_USER_IDS, &EnsembleParams::default()).unwrap();
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json[6]["status"], "GLOBAL_OUTLIER");
        assert_eq!(json[6]["user"], 7);
        assert_eq!(json[4]["local_votes"], 2);
        assert_eq!(OutlierReport::from_json(&r.to_json()).unwrap(), r);
    }
}
