//! Density-based clustering on the user distance matrix.
//!
//! A user's neighborhood is every rated user within `eps`, itself included;
//! undefined distances never count as within `eps`. Points are visited in
//! ascending user index, so a border point reachable from several clusters
//! joins the one discovered first.

use std::collections::VecDeque;

use super::{Algorithm, ClusteringParams, Partition};
use crate::distance::DistanceMatrix;

fn neighbors(dm: &DistanceMatrix, rated: &[usize], p: usize, eps: f64) -> Vec<usize> {
    rated
        .iter()
        .copied()
        .filter(|&q| dm.get(p, q).is_some_and(|d| d <= eps))
        .collect()
}

/// Users with no ratings, and rated users that are neither core points nor
/// within `eps` of one, are left unassigned.
pub fn dbscan(dm: &DistanceMatrix, params: &ClusteringParams) -> Partition {
    let n = dm.n_users();
    let rated = dm.rated_users();
    let eps = params.eps;
    let min_pts = params.min_pts;
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut cluster = 0;

    for &p in &rated {
        if visited[p] {
            continue;
        }
        visited[p] = true;
        let seeds = neighbors(dm, &rated, p, eps);
        if seeds.len() < min_pts {
            continue;
        }
        labels[p] = Some(cluster);
        let mut queue: VecDeque<usize> = seeds.into_iter().collect();
        while let Some(q) = queue.pop_front() {
            if labels[q].is_none() {
                labels[q] = Some(cluster);
            }
            if visited[q] {
                continue;
            }
            visited[q] = true;
            let reach = neighbors(dm, &rated, q, eps);
            if reach.len() >= min_pts {
                queue.extend(reach.into_iter().filter(|&r| !visited[r] || labels[r].is_none()));
            }
        }
        cluster += 1;
    }
    Partition::from_labels(Algorithm::Dbscan, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{build_distance_matrix, build_vectors, DistanceParams, UserVector};
    use crate::fixtures;
    use crate::ingest::normalize;

    fn params(eps: f64, min_pts: usize) -> ClusteringParams {
        ClusteringParams {
            k: 1,
            eps,
            min_pts,
            max_iters: 1,
            seed: 0,
        }
    }

    #[test]
    fn eps_below_every_distance_leaves_all_unassigned() {
        let v: Vec<UserVector> = (0..5)
            .map(|u| UserVector { user_id: u + 1, entries: vec![(0, u as f64 / 4.0)] })
            .collect();
        let dm = build_distance_matrix(&v, &DistanceParams::default());
        let p = dbscan(&dm, &params(0.2, 2));
        assert_eq!(p.n_clusters(), 0);
        assert_eq!(p.unassigned().len(), 5);
    }

    #[test]
    fn zero_rating_users_stay_unassigned_even_with_min_pts_one() {
        let ds = fixtures::toy_dataset();
        let dm = build_distance_matrix(&build_vectors(&normalize(&ds)), &DistanceParams::default());
        let p = dbscan(&dm, &params(1.0, 1));
        assert_eq!(p.unassigned(), vec![6, 7]);
    }

    #[test]
    fn chain_and_noise() {
        // 0-1-2 chained at 0.25 spacing, 3 far away.
        let v: Vec<UserVector> = [0.0, 0.25, 0.5, 1.0]
            .iter()
            .enumerate()
            .map(|(u, &x)| UserVector { user_id: u as u32 + 1, entries: vec![(0, x)] })
            .collect();
        let dm = build_distance_matrix(&v, &DistanceParams::default());
        let p = dbscan(&dm, &params(0.3, 2));
        assert_eq!(p.clusters(), vec![vec![0, 1, 2]]);
        assert_eq!(p.unassigned(), vec![3]);
    }
}
