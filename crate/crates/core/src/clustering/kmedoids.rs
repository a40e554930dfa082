//! Partitioning Around Medoids: greedy BUILD followed by best-improvement
//! SWAP.
//!
//! Each SWAP round evaluates every (medoid, non-medoid) exchange and applies
//! the single best one. All k removal deltas for a candidate are computed in
//! one pass over the points using cached nearest and second-nearest medoid
//! distances, so a round costs O(n^2) rather than O(k n^2); the exchange it
//! picks is the same one a naive PAM would pick.

use super::{require_k, Algorithm, ClusteringParams, EligibleDistances, Partition};
use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct KMedoidsTrace {
    pub partition: Partition,
    /// Medoid user indices in cluster-slot order.
    pub medoids: Vec<usize>,
    pub cost: f64,
    pub swaps: usize,
    /// Whether SWAP stopped because no exchange improved the cost.
    pub converged: bool,
}

pub fn kmedoids(dm: &DistanceMatrix, params: &ClusteringParams) -> Result<Partition> {
    kmedoids_traced(dm, params).map(|t| t.partition)
}

struct Nearest {
    slot: Vec<usize>,
    near: Vec<f64>,
    second: Vec<f64>,
}

fn nearest(ed: &EligibleDistances, medoids: &[usize]) -> Nearest {
    let m = ed.len();
    let mut out = Nearest {
        slot: vec![0; m],
        near: vec![f64::INFINITY; m],
        second: vec![f64::INFINITY; m],
    };
    for i in 0..m {
        let row = ed.row(i);
        for (s, &med) in medoids.iter().enumerate() {
            let d = row[med];
            if d < out.near[i] {
                out.second[i] = out.near[i];
                out.near[i] = d;
                out.slot[i] = s;
            } else if d < out.second[i] {
                out.second[i] = d;
            }
        }
    }
    out
}

fn build(ed: &EligibleDistances, k: usize) -> Vec<usize> {
    let m = ed.len();
    let mut first = (0, f64::INFINITY);
    for j in 0..m {
        let td: f64 = ed.row(j).iter().sum();
        if td < first.1 {
            first = (j, td);
        }
    }
    let mut medoids = vec![first.0];
    let mut is_medoid = vec![false; m];
    is_medoid[first.0] = true;
    let mut near: Vec<f64> = (0..m).map(|i| ed.get(i, first.0)).collect();
    while medoids.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..m {
            if is_medoid[c] {
                continue;
            }
            let row = ed.row(c);
            let gain: f64 = near.iter().zip(row).map(|(&n, &d)| (n - d).max(0.0)).sum();
            if best.map_or(true, |(_, g)| gain > g) {
                best = Some((c, gain));
            }
        }
        let (c, _) = best.expect("k <= number of points");
        medoids.push(c);
        is_medoid[c] = true;
        for (n, &d) in near.iter_mut().zip(ed.row(c)) {
            *n = n.min(d);
        }
    }
    medoids
}

pub fn kmedoids_traced(dm: &DistanceMatrix, params: &ClusteringParams) -> Result<KMedoidsTrace> {
    if params.max_iters == 0 {
        return Err(Error::config("max_iters must be >= 1"));
    }
    let ed = EligibleDistances::new(dm);
    let m = ed.len();
    let k = params.k;
    require_k(k, m)?;

    let mut medoids = build(&ed, k);
    let mut is_medoid = vec![false; m];
    for &c in &medoids {
        is_medoid[c] = true;
    }
    let mut nn = nearest(&ed, &medoids);
    let mut cost: f64 = nn.near.iter().sum();
    let mut swaps = 0;
    let mut converged = false;
    let mut delta = vec![0.0; k];

    for _ in 0..params.max_iters {
        let mut best: Option<(f64, usize, usize)> = None;
        for c in 0..m {
            if is_medoid[c] {
                continue;
            }
            delta.fill(0.0);
            let mut shared = 0.0;
            let row = ed.row(c);
            for o in 0..m {
                let doc = row[o];
                let s = nn.slot[o];
                let dn = nn.near[o];
                delta[s] += doc.min(nn.second[o]) - dn;
                if doc < dn {
                    shared += doc - dn;
                    delta[s] -= doc - dn;
                }
            }
            for (s, d) in delta.iter().enumerate() {
                let total = d + shared;
                if best.map_or(true, |(b, _, _)| total < b) {
                    best = Some((total, s, c));
                }
            }
        }
        let Some((gain, slot, c)) = best else {
            converged = true;
            break;
        };
        if gain >= -1e-12 * (1.0 + cost) {
            converged = true;
            break;
        }
        is_medoid[medoids[slot]] = false;
        is_medoid[c] = true;
        medoids[slot] = c;
        nn = nearest(&ed, &medoids);
        cost = nn.near.iter().sum();
        swaps += 1;
    }

    let mut local = nn.slot.clone();
    for (s, &med) in medoids.iter().enumerate() {
        local[med] = s;
    }
    Ok(KMedoidsTrace {
        partition: ed.partition(Algorithm::KMedoids, dm.n_users(), &local),
        medoids: medoids.iter().map(|&i| ed.users[i]).collect(),
        cost,
        swaps,
        converged,
    })
}
