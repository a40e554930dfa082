//! Lloyd's k-means over mean-imputed rating vectors.
//!
//! A user's dense vector holds their normalized rating where present and
//! their own mean normalized rating everywhere else. The dense vectors are
//! never materialized: with `x = m*1 + delta` and `delta` supported on the
//! rated items, squared distances to a centroid cost O(ratings) each.

use rand::Rng;
use rayon::prelude::*;

use super::{require_k, Algorithm, ClusteringParams, Partition};
use crate::distance::UserVector;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone)]
pub struct KMeansTrace {
    pub partition: Partition,
    /// Objective after each assignment step.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

struct Point<'a> {
    mean: f64,
    entries: &'a [(usize, f64)],
}

struct Centroids {
    dims: usize,
    data: Vec<f64>,
    // Per centroid: sum of coordinates and sum of squares.
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl Centroids {
    fn new(k: usize, dims: usize) -> Self {
        Centroids {
            dims,
            data: vec![0.0; k * dims],
            s1: vec![0.0; k],
            s2: vec![0.0; k],
        }
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.dims..(j + 1) * self.dims]
    }

    fn refresh(&mut self, j: usize) {
        let row = &self.data[j * self.dims..(j + 1) * self.dims];
        self.s1[j] = row.iter().sum();
        self.s2[j] = row.iter().map(|c| c * c).sum();
    }

    fn set_to_point(&mut self, j: usize, p: &Point<'_>) {
        let dims = self.dims;
        let row = &mut self.data[j * dims..(j + 1) * dims];
        row.fill(p.mean);
        for &(i, v) in p.entries {
            row[i] = v;
        }
        self.refresh(j);
    }

    fn dist2(&self, j: usize, p: &Point<'_>) -> f64 {
        let c = self.row(j);
        let m = p.mean;
        let mut d = self.dims as f64 * m * m - 2.0 * m * self.s1[j] + self.s2[j];
        for &(i, v) in p.entries {
            let a = v - c[i];
            let b = m - c[i];
            d += a * a - b * b;
        }
        d.max(0.0)
    }

    fn nearest(&self, p: &Point<'_>) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for j in 0..self.s1.len() {
            let d = self.dist2(j, p);
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }
}

fn plus_plus_init(points: &[Point<'_>], k: usize, dims: usize, seed: u64) -> Centroids {
    let mut rng = seed::rng(seed);
    let mut centroids = Centroids::new(k, dims);
    let mut chosen = vec![false; points.len()];
    let first = rng.gen_range(0..points.len());
    chosen[first] = true;
    centroids.set_to_point(0, &points[first]);
    let mut d2: Vec<f64> = points.iter().map(|p| centroids.dist2(0, p)).collect();
    for j in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total weight")
        } else {
            (0..points.len()).find(|&i| !chosen[i]).expect("k <= number of points")
        };
        chosen[pick] = true;
        centroids.set_to_point(j, &points[pick]);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(centroids.dist2(j, p));
        }
    }
    centroids
}

/// Cluster users with at least one rating into `params.k` groups.
///
/// `n_items` is the dimensionality of the dense vectors (the dataset's item
/// count). Initialization is seeded k-means++; iterations stop at an
/// assignment fixpoint or after `params.max_iters` assignment steps.
pub fn kmeans(vectors: &[UserVector], n_items: usize, params: &ClusteringParams) -> Result<Partition> {
    kmeans_traced(vectors, n_items, params).map(|t| t.partition)
}

pub fn kmeans_traced(
    vectors: &[UserVector],
    n_items: usize,
    params: &ClusteringParams,
) -> Result<KMeansTrace> {
    if params.max_iters == 0 {
        return Err(Error::config("max_iters must be >= 1"));
    }
    let eligible: Vec<usize> = (0..vectors.len())
        .filter(|&u| vectors[u].rating_count() > 0)
        .collect();
    let k = params.k;
    require_k(k, eligible.len())?;
    let dims = vectors
        .iter()
        .filter_map(|v| v.entries.last().map(|&(i, _)| i + 1))
        .max()
        .unwrap_or(0)
        .max(n_items);
    let points: Vec<Point<'_>> = eligible
        .iter()
        .map(|&u| Point {
            mean: vectors[u].mean().expect("eligible users have ratings"),
            entries: &vectors[u].entries,
        })
        .collect();

    let mut centroids = plus_plus_init(&points, k, dims, params.seed);
    let mut objective = Vec::new();
    let mut assignment: Vec<usize> = Vec::new();
    let mut previous_raw: Vec<usize> = Vec::new();
    let mut iterations = 0;

    for iter in 0..params.max_iters {
        iterations = iter + 1;
        let nearest: Vec<(usize, f64)> = points.par_iter().map(|p| centroids.nearest(p)).collect();
        objective.push(nearest.iter().map(|&(_, d)| d).sum());
        let raw: Vec<usize> = nearest.iter().map(|&(j, _)| j).collect();
        if raw == assignment || raw == previous_raw {
            assignment = raw;
            break;
        }
        previous_raw = raw.clone();
        assignment = raw;
        if iter + 1 == params.max_iters {
            break;
        }

        // Update step.
        let mut counts = vec![0usize; k];
        let mut mean_sums = vec![0.0; k];
        for (p, &j) in points.iter().zip(&assignment) {
            counts[j] += 1;
            mean_sums[j] += p.mean;
        }
        for j in 0..k {
            if counts[j] > 0 {
                let base = mean_sums[j] / counts[j] as f64;
                centroids.data[j * dims..(j + 1) * dims].fill(base);
            }
        }
        for (p, &j) in points.iter().zip(&assignment) {
            let inv = 1.0 / counts[j] as f64;
            let row = &mut centroids.data[j * dims..(j + 1) * dims];
            for &(i, v) in p.entries {
                row[i] += (v - p.mean) * inv;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids.refresh(j);
            }
        }

        // Re-seed empty clusters at the worst-served point of a cluster that
        // can spare it.
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for (i, &(_, d)) in nearest.iter().enumerate() {
                if counts[assignment[i]] > 1 && best.map_or(true, |(_, bd)| d > bd) {
                    best = Some((i, d));
                }
            }
            if let Some((i, _)) = best {
                counts[assignment[i]] -= 1;
                counts[j] = 1;
                assignment[i] = j;
                centroids.set_to_point(j, &points[i]);
            }
        }
    }

    let mut labels = vec![None; vectors.len()];
    for (i, &u) in eligible.iter().enumerate() {
        labels[u] = Some(assignment[i]);
    }
    Ok(KMeansTrace {
        partition: Partition::from_labels(Algorithm::KMeans, labels),
        objective,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::build_vectors;
    use crate::fixtures;
    use crate::ingest::normalize;

    fn params(k: usize, seed: u64) -> ClusteringParams {
        ClusteringParams {
            k,
            eps: 0.1,
            min_pts: 2,
            max_iters: 100,
            seed,
        }
    }

    fn toy() -> Vec<UserVector> {
        build_vectors(&normalize(&fixtures::toy_dataset()))
    }

    #[test]
    fn sparse_distance_matches_dense() {
        let vectors = toy();
        let points: Vec<Point<'_>> = vectors[..6]
            .iter()
            .map(|v| Point { mean: v.mean().unwrap(), entries: &v.entries })
            .collect();
        let dense = |p: &Point<'_>| {
            let mut x = vec![p.mean; 4];
            for &(i, v) in p.entries {
                x[i] = v;
            }
            x
        };
        let mut c = Centroids::new(1, 4);
        c.data.copy_from_slice(&[0.3, 0.9, 0.1, 0.55]);
        c.refresh(0);
        for p in &points {
            let want: f64 = dense(p).iter().zip(c.row(0)).map(|(a, b)| (a - b).powi(2)).sum();
            assert!((c.dist2(0, p) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn k1_single_cluster() {
        let p = kmeans(&toy(), 4, &params(1, 0)).unwrap();
        assert_eq!(p.clusters(), vec![vec![0, 1, 2, 3, 4, 5]]);
        assert_eq!(p.unassigned(), vec![6, 7]);
    }

    #[test]
    fn k_equal_to_n_gives_singletons() {
        let vectors: Vec<UserVector> = (0..5)
            .map(|u| UserVector { user_id: u + 1, entries: vec![(0, u as f64 / 4.0), (1, 0.5)] })
            .collect();
        let t = kmeans_traced(&vectors, 2, &params(5, 3)).unwrap();
        assert_eq!(t.partition.n_clusters(), 5);
        assert_eq!(*t.objective.last().unwrap(), 0.0);
    }

    #[test]
    fn too_few_users_is_error() {
        assert!(matches!(kmeans(&toy(), 4, &params(7, 0)), Err(Error::Config(_))));
    }

    #[test]
    fn identical_users_share_a_label() {
        // u2/u5 and u3/u6 have identical rows in the toy table.
        for seed in 0..50 {
            let p = kmeans(&toy(), 4, &params(2, seed)).unwrap();
            assert_eq!(p.label(1), p.label(4));
            assert_eq!(p.label(2), p.label(5));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = kmeans_traced(&toy(), 4, &params(3, 17)).unwrap();
        let b = kmeans_traced(&toy(), 4, &params(3, 17)).unwrap();
        assert_eq!(a.partition, b.partition);
        assert_eq!(a.objective, b.objective);
    }
}
