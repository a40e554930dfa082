//! DIANA-style top-down clustering.
//!
//! Starting from one cluster of all rated users, the cluster with the
//! largest diameter is split until `k` clusters exist. A split seeds a
//! splinter group with the member of largest mean dissimilarity to the rest,
//! then repeatedly moves over the remaining member whose mean distance to
//! the remainder exceeds its mean distance to the splinter group by the
//! largest positive margin. Ties go to the lowest user index.

use super::{require_k, Algorithm, ClusteringParams, EligibleDistances, Partition};
use crate::distance::DistanceMatrix;
use crate::error::Result;

fn diameter(ed: &EligibleDistances, members: &[usize]) -> f64 {
    let mut best = 0.0f64;
    for (a, &i) in members.iter().enumerate() {
        let row = ed.row(i);
        for &j in &members[a + 1..] {
            best = best.max(row[j]);
        }
    }
    best
}

// Split `members` (ascending local indices) into (remainder, splinter).
fn split(ed: &EligibleDistances, members: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let m = members.len();
    debug_assert!(m >= 2);
    // to_rest[a]: summed distance from member a to the remainder group;
    // to_splinter[a]: summed distance to the splinter group.
    let mut to_rest: Vec<f64> = members
        .iter()
        .map(|&i| {
            let row = ed.row(i);
            members.iter().map(|&j| row[j]).sum()
        })
        .collect();
    let mut to_splinter = vec![0.0; m];
    let mut in_splinter = vec![false; m];
    let mut rest_len = m;
    let mut splinter_len = 0;

    let move_member = |a: usize,
                           in_splinter: &mut Vec<bool>,
                           to_rest: &mut Vec<f64>,
                           to_splinter: &mut Vec<f64>| {
        in_splinter[a] = true;
        let row = ed.row(members[a]);
        for (b, &j) in members.iter().enumerate() {
            to_rest[b] -= row[j];
            to_splinter[b] += row[j];
        }
    };

    // Seed: largest mean dissimilarity to all other members.
    let mut seed = 0;
    for a in 1..m {
        if to_rest[a] > to_rest[seed] {
            seed = a;
        }
    }
    move_member(seed, &mut in_splinter, &mut to_rest, &mut to_splinter);
    rest_len -= 1;
    splinter_len += 1;

    while rest_len > 1 {
        let mut best: Option<(usize, f64)> = None;
        for a in 0..m {
            if in_splinter[a] {
                continue;
            }
            let margin = to_rest[a] / (rest_len - 1) as f64 - to_splinter[a] / splinter_len as f64;
            if best.map_or(true, |(_, b)| margin > b) {
                best = Some((a, margin));
            }
        }
        match best {
            Some((a, margin)) if margin > 0.0 => {
                move_member(a, &mut in_splinter, &mut to_rest, &mut to_splinter);
                rest_len -= 1;
                splinter_len += 1;
            }
            _ => break,
        }
    }

    let (splinter, rest): (Vec<usize>, Vec<usize>) =
        (0..m).partition(|&a| in_splinter[a]);
    (
        rest.into_iter().map(|a| members[a]).collect(),
        splinter.into_iter().map(|a| members[a]).collect(),
    )
}

/// Split rated users top-down into `params.k` clusters.
pub fn divisive(dm: &DistanceMatrix, params: &ClusteringParams) -> Result<Partition> {
    let ed = EligibleDistances::new(dm);
    require_k(params.k, ed.len())?;
    let mut clusters: Vec<(Vec<usize>, f64)> = vec![{
        let all: Vec<usize> = (0..ed.len()).collect();
        let d = diameter(&ed, &all);
        (all, d)
    }];
    while clusters.len() < params.k {
        // Largest diameter among splittable clusters; ties to the cluster
        // holding the lowest user index.
        let target = clusters
            .iter()
            .enumerate()
            .filter(|(_, (members, _))| members.len() > 1)
            .max_by(|(_, (a, da)), (_, (b, db))| da.total_cmp(db).then(b[0].cmp(&a[0])))
            .map(|(i, _)| i)
            .expect("k <= rated users leaves a splittable cluster");
        let (members, _) = clusters.swap_remove(target);
        let (rest, splinter) = split(&ed, &members);
        for part in [rest, splinter] {
            let d = diameter(&ed, &part);
            clusters.push((part, d));
        }
    }
    let mut local = vec![0; ed.len()];
    for (c, (members, _)) in clusters.iter().enumerate() {
        for &i in members {
            local[i] = c;
        }
    }
    Ok(ed.partition(Algorithm::Divisive, dm.n_users(), &local))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{build_distance_matrix, build_vectors, DistanceParams, UserVector};
    use crate::error::Error;
    use crate::fixtures;
    use crate::ingest::normalize;

    fn params(k: usize) -> ClusteringParams {
        ClusteringParams {
            k,
            eps: 0.1,
            min_pts: 2,
            max_iters: 1,
            seed: 0,
        }
    }

    fn line(xs: &[f64]) -> DistanceMatrix {
        let v: Vec<UserVector> = xs
            .iter()
            .enumerate()
            .map(|(u, &x)| UserVector { user_id: u as u32 + 1, entries: vec![(0, x)] })
            .collect();
        build_distance_matrix(&v, &DistanceParams::default())
    }

    #[test]
    fn k1_single_cluster() {
        let ds = fixtures::toy_dataset();
        let dm = build_distance_matrix(&build_vectors(&normalize(&ds)), &DistanceParams::default());
        let p = divisive(&dm, &params(1)).unwrap();
        assert_eq!(p.clusters(), vec![vec![0, 1, 2, 3, 4, 5]]);
        assert_eq!(p.unassigned(), vec![6, 7]);
    }

    #[test]
    fn two_users_two_singletons() {
        let p = divisive(&line(&[0.0, 0.5]), &params(2)).unwrap();
        assert_eq!(p.clusters(), vec![vec![0], vec![1]]);
    }

    #[test]
    fn separates_two_groups() {
        let p = divisive(&line(&[0.0, 0.05, 0.1, 0.9, 0.95, 1.0]), &params(2)).unwrap();
        assert_eq!(p.clusters(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        let p = divisive(&line(&[0.0, 0.05, 0.1, 0.9, 0.95, 1.0]), &params(3)).unwrap();
        assert_eq!(p.n_clusters(), 3);
    }

    #[test]
    fn too_few_users_is_error() {
        assert!(matches!(divisive(&line(&[0.0, 1.0]), &params(3)), Err(Error::Config(_))));
    }
}
