//! Random instances and brute-force reference implementations shared by the
//! integration tests and the acceptance suite.
#![allow(dead_code)]

use cfoutlier::clustering::{Algorithm, Partition};
use cfoutlier::distance::{build_distance_matrix, build_vectors, Aggregation, DistanceMatrix, DistanceParams, UserVector};
use cfoutlier::ingest::{normalize, RatingRecord, RatingsDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n_users` x `n_items` ratings, each cell present with probability
/// `density`. Some users may end up with no ratings.
pub fn random_dataset(rng: &mut ChaCha8Rng, n_users: usize, n_items: usize, density: f64) -> RatingsDataset {
    let mut records = Vec::new();
    for u in 1..=n_users as u32 {
        for i in 1..=n_items as u32 {
            if rng.gen_bool(density) {
                records.push(RatingRecord {
                    user_id: u,
                    item_id: i,
                    rating: rng.gen_range(1..=5),
                    timestamp: 0,
                });
            }
        }
    }
    RatingsDataset::with_universe(1..=n_users as u32, 1..=n_items as u32, records).unwrap()
}

pub struct Instance {
    pub dataset: RatingsDataset,
    pub vectors: Vec<UserVector>,
    pub dm: DistanceMatrix,
}

pub fn random_instance(seed: u64, max_users: usize) -> Instance {
    let mut rng = rng(seed);
    let n_users = rng.gen_range(2..=max_users);
    let n_items = rng.gen_range(2..=12);
    let density = rng.gen_range(0.15..0.9);
    let dataset = random_dataset(&mut rng, n_users, n_items, density);
    let params = DistanceParams {
        min_overlap: rng.gen_range(1..=2),
        aggregation: Aggregation::Mean,
        penalty: 1.0,
    };
    let vectors = build_vectors(&normalize(&dataset));
    let dm = build_distance_matrix(&vectors, &params);
    Instance { dataset, vectors, dm }
}

/// DBSCAN by definition: core points are rated users with at least
/// `min_pts` rated users (themselves included) within `eps`; clusters are
/// connected components of cores, numbered by their lowest core; a border
/// point joins the earliest such cluster it touches.
pub fn naive_dbscan(dm: &DistanceMatrix, eps: f64, min_pts: usize) -> Partition {
    let n = dm.n_users();
    let within = |p: usize, q: usize| dm.is_rated(p) && dm.is_rated(q) && dm.get(p, q).is_some_and(|d| d <= eps);
    let core: Vec<bool> = (0..n)
        .map(|p| dm.is_rated(p) && (0..n).filter(|&q| within(p, q)).count() >= min_pts)
        .collect();

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        parent[x] = r;
        r
    }
    for p in 0..n {
        for q in p + 1..n {
            if core[p] && core[q] && within(p, q) {
                let (a, b) = (find(&mut parent, p), find(&mut parent, q));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut rank = vec![None; n];
    let mut next = 0;
    for p in 0..n {
        if core[p] {
            let r = find(&mut parent, p);
            if rank[r].is_none() {
                rank[r] = Some(next);
                next += 1;
            }
        }
    }
    let labels = (0..n)
        .map(|p| {
            if core[p] {
                rank[find(&mut parent, p)]
            } else {
                (0..n)
                    .filter(|&q| core[q] && within(p, q))
                    .map(|q| rank[find(&mut parent, q)].unwrap())
                    .min()
            }
        })
        .collect();
    Partition::from_labels(Algorithm::Dbscan, labels)
}

/// Sum over rated users of the distance to the nearest medoid, undefined
/// distances counting as the penalty.
pub fn medoid_cost(dm: &DistanceMatrix, medoids: &[usize]) -> f64 {
    (0..dm.n_users())
        .filter(|&u| dm.is_rated(u))
        .map(|u| {
            medoids
                .iter()
                .map(|&m| dm.get_or_penalty(u, m))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// The best objective reachable by replacing one medoid with one
/// non-medoid, by trying every such exchange.
pub fn best_single_swap(dm: &DistanceMatrix, medoids: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for slot in 0..medoids.len() {
        for h in (0..dm.n_users()).filter(|&h| dm.is_rated(h) && !medoids.contains(&h)) {
            let mut trial = medoids.to_vec();
            trial[slot] = h;
            best = best.min(medoid_cost(dm, &trial));
        }
    }
    best
}

/// Partitions of the same users into the same groups, ignoring label names.
pub fn same_grouping(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|u| {
            (0..a.len()).all(|v| {
                (a[u].is_some() == b[u].is_some())
                    && (a[u].is_some() && a[u] == a[v]) == (b[u].is_some() && b[u] == b[v])
            })
        })
}
