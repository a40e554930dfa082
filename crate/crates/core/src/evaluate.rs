//! MAE, precision, recall and F-measure for top-N recommendation runs.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RatingsDataset;
use crate::recommend::RecommendationList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Pool every test pair (or every hit) into one average.
    #[default]
    Micro,
    /// Average per-user values.
    Macro,
}

/// A test rating with its prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub user: u32,
    pub actual: f64,
    pub predicted: f64,
}

/// Mean absolute error over all pairs.
pub fn mae(pairs: &[ScoredPair]) -> Result<f64> {
    mae_with(pairs, Averaging::Micro)
}

pub fn mae_with(pairs: &[ScoredPair], averaging: Averaging) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyTest);
    }
    match averaging {
        Averaging::Micro => {
            Ok(pairs.iter().map(|p| (p.actual - p.predicted).abs()).sum::<f64>() / pairs.len() as f64)
        }
        Averaging::Macro => {
            let mut per_user: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
            for p in pairs {
                let e = per_user.entry(p.user).or_default();
                e.0 += (p.actual - p.predicted).abs();
                e.1 += 1;
            }
            Ok(per_user.values().map(|&(s, c)| s / c as f64).sum::<f64>() / per_user.len() as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub n_users: usize,
}

/// Liked test items per user: raw rating at or above `like_threshold`.
pub fn liked_items(test: &RatingsDataset, like_threshold: u8) -> BTreeMap<u32, BTreeSet<u32>> {
    let mut out: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for r in test.records() {
        if r.rating >= like_threshold {
            out.entry(r.user_id).or_default().insert(r.item_id);
        }
    }
    out
}

/// Precision `n / topN` and recall `n / M_T`, where `n` counts recommended
/// items the user liked in test and `M_T` counts liked test items. Only
/// users with `M_T > 0` are evaluated; a user without a list scores no hits.
pub fn precision_recall(
    recommendations: &[RecommendationList],
    test: &RatingsDataset,
    like_threshold: u8,
    top_n: usize,
    averaging: Averaging,
) -> Result<PrecisionRecall> {
    if top_n == 0 {
        return Err(Error::config("topN must be >= 1"));
    }
    let liked = liked_items(test, like_threshold);
    let by_user: BTreeMap<u32, &RecommendationList> =
        recommendations.iter().map(|r| (r.user, r)).collect();
    let mut hits_total = 0usize;
    let mut liked_total = 0usize;
    let (mut p_sum, mut r_sum) = (0.0, 0.0);
    for (user, items) in &liked {
        let hits = by_user.get(user).map_or(0, |list| {
            list.items
                .iter()
                .take(top_n)
                .filter(|(item, _)| items.contains(item))
                .count()
        });
        hits_total += hits;
        liked_total += items.len();
        p_sum += hits as f64 / top_n as f64;
        r_sum += hits as f64 / items.len() as f64;
    }
    let n_users = liked.len();
    if n_users == 0 {
        return Ok(PrecisionRecall { precision: 0.0, recall: 0.0, n_users });
    }
    Ok(match averaging {
        Averaging::Macro => PrecisionRecall {
            precision: p_sum / n_users as f64,
            recall: r_sum / n_users as f64,
            n_users,
        },
        Averaging::Micro => PrecisionRecall {
            precision: hits_total as f64 / (top_n * n_users) as f64,
            recall: hits_total as f64 / liked_total as f64,
            n_users,
        },
    })
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsPoint {
    pub neighbors: usize,
    pub top_n: usize,
    pub mae: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub n_evaluated_users: usize,
    pub n_test_ratings: usize,
}

impl MetricsPoint {
    pub fn sweep_label(&self) -> String {
        format!("neighbors={};topn={}", self.neighbors, self.top_n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub points: Vec<MetricsPoint>,
}

impl MetricsReport {
    /// `method,sweep,mae,precision,recall,f` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "method,sweep,mae,precision,recall,f")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.method,
                p.sweep_label(),
                p.mae,
                p.precision,
                p.recall,
                p.f_measure
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_str, Format};
    use proptest::prelude::*;

    fn pair(actual: f64, predicted: f64) -> ScoredPair {
        ScoredPair { user: 1, actual, predicted }
    }

    #[test]
    fn mae_cases() {
        assert_eq!(mae(&[pair(4.0, 4.0), pair(2.0, 2.0)]).unwrap(), 0.0);
        assert_eq!(mae(&[pair(5.0, 3.0)]).unwrap(), 2.0);
        let m = mae(&[pair(5.0, 4.0), pair(3.0, 3.0), pair(2.0, 2.5)]).unwrap();
        assert!((m - 0.5).abs() < 1e-12);
        assert!(matches!(mae(&[]), Err(Error::EmptyTest)));
    }

    #[test]
    fn macro_mae_weights_users_equally() {
        let pairs = [
            ScoredPair { user: 1, actual: 5.0, predicted: 4.0 },
            ScoredPair { user: 1, actual: 5.0, predicted: 4.0 },
            ScoredPair { user: 1, actual: 5.0, predicted: 4.0 },
            ScoredPair { user: 2, actual: 1.0, predicted: 4.0 },
        ];
        assert!((mae_with(&pairs, Averaging::Micro).unwrap() - 1.5).abs() < 1e-12);
        assert!((mae_with(&pairs, Averaging::Macro).unwrap() - 2.0).abs() < 1e-12);
    }

    fn test_set() -> RatingsDataset {
        // User 1 likes items 10, 11, 12, 13; item 14 is rated 2.
        parse_str(
            "1\t10\t5\t0\n1\t11\t4\t0\n1\t12\t4\t0\n1\t13\t5\t0\n1\t14\t2\t0\n2\t10\t3\t0\n",
            Format::Ml100kTab,
        )
        .unwrap()
    }

    fn list(user: u32, items: &[u32]) -> RecommendationList {
        RecommendationList {
            user,
            top_n: items.len(),
            items: items.iter().map(|&i| (i, 4.0)).collect(),
        }
    }

    #[test]
    fn precision_recall_substitution() {
        let recs = [list(1, &[10, 20, 13, 21, 14])];
        let pr = precision_recall(&recs, &test_set(), 4, 5, Averaging::Macro).unwrap();
        assert!((pr.precision - 0.4).abs() < 1e-12);
        assert!((pr.recall - 0.5).abs() < 1e-12);
        // User 2 liked nothing and is not evaluated.
        assert_eq!(pr.n_users, 1);
        assert!((f_measure(pr.precision, pr.recall) - 4.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn full_and_empty_overlap() {
        let pr = precision_recall(&[list(1, &[13, 12, 11, 10])], &test_set(), 4, 4, Averaging::Macro).unwrap();
        assert_eq!((pr.precision, pr.recall), (1.0, 1.0));
        let pr = precision_recall(&[list(1, &[1, 2, 3])], &test_set(), 4, 3, Averaging::Macro).unwrap();
        assert_eq!((pr.precision, pr.recall), (0.0, 0.0));
        let pr = precision_recall(&[], &test_set(), 4, 3, Averaging::Micro).unwrap();
        assert_eq!((pr.precision, pr.recall), (0.0, 0.0));
    }

    #[test]
    fn f_measure_cases() {
        assert_eq!(f_measure(1.0, 1.0), 1.0);
        assert_eq!(f_measure(0.0, 0.0), 0.0);
        assert!((f_measure(0.4, 0.5) - 4.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_csv_layout() {
        let r = MetricsReport {
            method: "ensemble".into(),
            points: vec![MetricsPoint {
                neighbors: 20,
                top_n: 10,
                mae: 0.75,
                precision: 0.1,
                recall: 0.05,
                f_measure: f_measure(0.1, 0.05),
                n_evaluated_users: 3,
                n_test_ratings: 9,
            }],
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("method,sweep,mae,precision,recall,f\nensemble,neighbors=20;topn=10,0.75,0.1,0.05,"));
    }

    proptest! {
        #[test]
        fn f_between_min_and_max(p in 0.0f64..=1.0, r in 0.0f64..=1.0) {
            let f = f_measure(p, r);
            prop_assert!((0.0..=1.0).contains(&f));
            if p + r > 0.0 {
                prop_assert!(f <= p.max(r) + 1e-15);
                if p > 0.0 && r > 0.0 {
                    prop_assert!(f >= p.min(r) - 1e-15);
                }
            }
        }
    }
}
