mod common;

use cfoutlier::clustering::{Algorithm, Partition};
use cfoutlier::ensemble::{accumulate, detect_outliers, EnsembleParams, OutlierStatus};
use proptest::prelude::*;

fn partition_strategy(n: usize) -> impl Strategy<Value = Partition> {
    (
        prop::sample::select(Algorithm::ALL.to_vec()),
        prop::collection::vec(prop::option::weighted(0.85, 0usize..4), n),
    )
        .prop_map(|(alg, labels)| Partition::from_labels(alg, labels))
}

fn partitions_strategy() -> impl Strategy<Value = Vec<Partition>> {
    (2usize..14).prop_flat_map(|n| prop::collection::vec(partition_strategy(n), 1..6))
}

proptest! {
    #[test]
    fn accumulate_invariants(parts in partitions_strategy()) {
        let s = accumulate(&parts).unwrap();
        let n = s.n_users();
        let a = parts.len();
        for u in 0..n {
            let assigned = parts.iter().filter(|p| p.label(u).is_some()).count();
            prop_assert_eq!(s.get(u, u), assigned);
            for v in 0..n {
                prop_assert_eq!(s.get(u, v), s.get(v, u));
                prop_assert!(s.get(u, v) <= a);
                prop_assert!(s.get(u, v) <= s.get(u, u).min(s.get(v, v)));
                let together = parts.iter().filter(|p| p.label(u).is_some() && p.label(u) == p.label(v)).count();
                prop_assert_eq!(s.get(u, v), together);
            }
        }
    }

    #[test]
    fn accumulate_ignores_partition_order(parts in partitions_strategy(), rot in 0usize..6) {
        let mut shuffled = parts.clone();
        shuffled.reverse();
        let len = shuffled.len();
        shuffled.rotate_left(rot % len);
        prop_assert_eq!(accumulate(&parts).unwrap(), accumulate(&shuffled).unwrap());
    }

    #[test]
    fn adding_a_partition_never_lowers_counts(parts in partitions_strategy()) {
        prop_assume!(parts.len() >= 2);
        let fewer = accumulate(&parts[..parts.len() - 1]).unwrap();
        let more = accumulate(&parts).unwrap();
        for u in 0..more.n_users() {
            for v in 0..more.n_users() {
                prop_assert!(more.get(u, v) >= fewer.get(u, v));
            }
        }
    }

    #[test]
    fn raising_thresholds_never_flags_more(parts in partitions_strategy(), tiny in 1usize..4) {
        let a = parts.len();
        let ids: Vec<u32> = (1..=parts[0].n_users() as u32).collect();
        let flagged = |v: usize, g: usize| {
            let params = EnsembleParams { tiny_cluster_max_size: tiny, local_vote_threshold: Some(v), global_vote_threshold: Some(g) };
            detect_outliers(&parts, &ids, &params).unwrap().users.iter().filter(|u| u.status.is_outlier()).count()
        };
        for v in 1..=a {
            for g in 1..=a {
                if v < a {
                    prop_assert!(flagged(v + 1, g) <= flagged(v, g));
                }
                if g < a {
                    prop_assert!(flagged(v, g + 1) <= flagged(v, g));
                }
            }
        }
    }

    #[test]
    fn status_follows_vote_counts(parts in partitions_strategy()) {
        let ids: Vec<u32> = (1..=parts[0].n_users() as u32).collect();
        let params = EnsembleParams::default();
        let (v, g) = params.thresholds(parts.len()).unwrap();
        let report = detect_outliers(&parts, &ids, &params).unwrap();
        for u in &report.users {
            let want = if u.unassigned_votes >= g {
                OutlierStatus::GlobalOutlier
            } else if u.local_votes >= v {
                OutlierStatus::LocalOutlier
            } else {
                OutlierStatus::Normal
            };
            prop_assert_eq!(u.status, want);
            prop_assert_eq!(u.evidence.len(), parts.len());
        }
    }
}

#[test]
fn users_unassigned_everywhere_are_global() {
    let parts: Vec<Partition> = Algorithm::ALL
        .into_iter()
        .map(|a| Partition::from_labels(a, vec![Some(0), Some(0), Some(0), None]))
        .collect();
    let report = detect_outliers(&parts, &[1, 2, 3, 4], &EnsembleParams::default()).unwrap();
    assert_eq!(report.status(3), OutlierStatus::GlobalOutlier);
    assert_eq!(report.count(OutlierStatus::Normal), 3);
}
