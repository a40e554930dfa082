//! User-based k-NN prediction and top-N recommendation.
//!
//! Neighborhoods come from a user-user similarity: the normalized
//! co-association matrix, a single partition, or raw distances. With
//! filtering on, users flagged by an [`OutlierReport`] never act as
//! neighbors.
//!
//! The predictor is the mean-centered weighted average
//!
//! ```text
//! p(u, i) = mean(u) + sum_v w(u, v) * (r(v, i) - mean(v)) / sum_v w(u, v)
//! ```
//!
//! over neighbors `v` that rated `i`, clamped to the rating scale. Without
//! such neighbors the user's mean is used, and without any training ratings
//! for the user, the global training mean.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::Algorithm;
use crate::distance::DistanceMatrix;
use crate::ensemble::{CoAssociationMatrix, OutlierReport};
use crate::error::{Error, Result};
use crate::ingest::{RatingsDataset, SCALE_MAX, SCALE_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SimilaritySource {
    Ensemble,
    SingleAlgorithm(Algorithm),
    RawDistance,
}

impl fmt::Display for SimilaritySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimilaritySource::Ensemble => f.write_str("ensemble"),
            SimilaritySource::SingleAlgorithm(a) => write!(f, "{a}"),
            SimilaritySource::RawDistance => f.write_str("raw-distance"),
        }
    }
}

impl std::str::FromStr for SimilaritySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ensemble" => Ok(SimilaritySource::Ensemble),
            "raw-distance" => Ok(SimilaritySource::RawDistance),
            other => other.parse().map(SimilaritySource::SingleAlgorithm),
        }
    }
}

impl TryFrom<String> for SimilaritySource {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SimilaritySource> for String {
    fn from(s: SimilaritySource) -> String {
        s.to_string()
    }
}

/// Pairwise user weights in [0, 1].
pub trait UserSimilarity: Sync {
    fn n_users(&self) -> usize;
    fn weight(&self, u: usize, v: usize) -> f64;
}

impl UserSimilarity for CoAssociationMatrix {
    fn n_users(&self) -> usize {
        CoAssociationMatrix::n_users(self)
    }

    fn weight(&self, u: usize, v: usize) -> f64 {
        self.consensus(u, v)
    }
}

/// `1 - d / penalty`, with undefined distances weighted 0.
pub struct DistanceSimilarity<'a>(pub &'a DistanceMatrix);

impl UserSimilarity for DistanceSimilarity<'_> {
    fn n_users(&self) -> usize {
        self.0.n_users()
    }

    fn weight(&self, u: usize, v: usize) -> f64 {
        self.0
            .get(u, v)
            .map_or(0.0, |d| (1.0 - d / self.0.penalty()).clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub user: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborModel {
    pub source: SimilaritySource,
    neighbors: Vec<Vec<Neighbor>>,
}

impl NeighborModel {
    pub fn n_users(&self) -> usize {
        self.neighbors.len()
    }

    /// Neighbors of `user`, by weight descending then user index ascending.
    pub fn neighbors(&self, user: usize) -> &[Neighbor] {
        &self.neighbors[user]
    }

    /// Same neighborhoods with every weight multiplied by `factor`.
    pub fn with_scaled_weights(&self, factor: f64) -> Self {
        NeighborModel {
            source: self.source,
            neighbors: self
                .neighbors
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|n| Neighbor { user: n.user, weight: n.weight * factor })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Keep up to `top_k` positively weighted neighbors per user. With
/// `filter_outliers`, users flagged in `report` are excluded as neighbors.
pub fn build_neighbor_model(
    similarity: &dyn UserSimilarity,
    source: SimilaritySource,
    report: Option<&OutlierReport>,
    top_k: usize,
    filter_outliers: bool,
) -> Result<NeighborModel> {
    let n = similarity.n_users();
    let excluded: Vec<bool> = match (filter_outliers, report) {
        (false, _) => vec![false; n],
        (true, Some(r)) if r.users.len() == n => (0..n).map(|u| r.is_outlier(u)).collect(),
        (true, Some(_)) => return Err(Error::config("outlier report does not match the similarity")),
        (true, None) => return Err(Error::config("outlier filtering needs an outlier report")),
    };
    let neighbors = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut row: Vec<Neighbor> = (0..n)
                .filter(|&v| v != u && !excluded[v])
                .filter_map(|v| {
                    let w = similarity.weight(u, v);
                    (w > 0.0).then_some(Neighbor { user: v, weight: w })
                })
                .collect();
            let order = |a: &Neighbor, b: &Neighbor| b.weight.total_cmp(&a.weight).then(a.user.cmp(&b.user));
            if row.len() > top_k && top_k > 0 {
                row.select_nth_unstable_by(top_k - 1, order);
            }
            row.truncate(top_k);
            row.sort_by(order);
            row
        })
        .collect();
    Ok(NeighborModel { source, neighbors })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    Neighbors,
    UserMeanFallback,
    GlobalMeanFallback,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Neighbors => "NEIGHBORS",
            Provenance::UserMeanFallback => "USER_MEAN_FALLBACK",
            Provenance::GlobalMeanFallback => "GLOBAL_MEAN_FALLBACK",
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NEIGHBORS" => Ok(Provenance::Neighbors),
            "USER_MEAN_FALLBACK" => Ok(Provenance::UserMeanFallback),
            "GLOBAL_MEAN_FALLBACK" => Ok(Provenance::GlobalMeanFallback),
            other => Err(Error::config(format!("unknown provenance `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationList {
    pub user: u32,
    pub top_n: usize,
    /// (item id, predicted rating), best first.
    pub items: Vec<(u32, f64)>,
}

fn clamp(value: f64) -> f64 {
    value.clamp(f64::from(SCALE_MIN), f64::from(SCALE_MAX))
}

/// Predictions against one training set, with user means cached.
pub struct Predictor<'a> {
    model: &'a NeighborModel,
    train: &'a RatingsDataset,
    means: Vec<Option<f64>>,
    global_mean: f64,
}

impl<'a> Predictor<'a> {
    pub fn new(model: &'a NeighborModel, train: &'a RatingsDataset) -> Result<Self> {
        if model.n_users() != train.n_users() {
            return Err(Error::config(format!(
                "neighbor model covers {} users, training set has {}",
                model.n_users(),
                train.n_users()
            )));
        }
        let global_mean = train
            .global_mean()
            .ok_or_else(|| Error::config("training set has no ratings"))?;
        Ok(Predictor {
            model,
            train,
            means: (0..train.n_users()).map(|u| train.user_mean(u)).collect(),
            global_mean,
        })
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    pub fn predict(&self, user: usize, item: usize) -> Prediction {
        let Some(mean_u) = self.means[user] else {
            return Prediction {
                value: clamp(self.global_mean),
                provenance: Provenance::GlobalMeanFallback,
            };
        };
        let (mut num, mut den) = (0.0, 0.0);
        for n in self.model.neighbors(user) {
            if let (Some(r), Some(mean_v)) = (self.train.rating(n.user, item), self.means[n.user]) {
                num += n.weight * (f64::from(r) - mean_v);
                den += n.weight;
            }
        }
        if den > 0.0 {
            Prediction {
                value: clamp(mean_u + num / den),
                provenance: Provenance::Neighbors,
            }
        } else {
            Prediction {
                value: clamp(mean_u),
                provenance: Provenance::UserMeanFallback,
            }
        }
    }

    /// Predict by raw ids. Unknown users fall back to the global mean and
    /// unknown items to the user mean.
    pub fn predict_ids(&self, user_id: u32, item_id: u32) -> Prediction {
        let Some(user) = self.train.user_index(user_id) else {
            return Prediction {
                value: clamp(self.global_mean),
                provenance: Provenance::GlobalMeanFallback,
            };
        };
        match self.train.item_index(item_id) {
            Some(item) => self.predict(user, item),
            None => match self.means[user] {
                Some(m) => Prediction { value: clamp(m), provenance: Provenance::UserMeanFallback },
                None => Prediction {
                    value: clamp(self.global_mean),
                    provenance: Provenance::GlobalMeanFallback,
                },
            },
        }
    }

    /// Predictions for every item in the training universe. Agrees exactly
    /// with [`predict`](Self::predict) item by item.
    pub fn predict_all(&self, user: usize) -> Vec<Prediction> {
        let n_items = self.train.n_items();
        let Some(mean_u) = self.means[user] else {
            let p = Prediction {
                value: clamp(self.global_mean),
                provenance: Provenance::GlobalMeanFallback,
            };
            return vec![p; n_items];
        };
        let mut num = vec![0.0; n_items];
        let mut den = vec![0.0; n_items];
        for n in self.model.neighbors(user) {
            let Some(mean_v) = self.means[n.user] else { continue };
            for r in self.train.user_ratings(n.user) {
                num[r.item] += n.weight * (f64::from(r.value) - mean_v);
                den[r.item] += n.weight;
            }
        }
        num.iter()
            .zip(&den)
            .map(|(&a, &b)| {
                if b > 0.0 {
                    Prediction { value: clamp(mean_u + a / b), provenance: Provenance::Neighbors }
                } else {
                    Prediction { value: clamp(mean_u), provenance: Provenance::UserMeanFallback }
                }
            })
            .collect()
    }

    /// Unrated items ranked by prediction (descending, then item index).
    pub fn ranked_candidates(&self, user: usize) -> Vec<(usize, f64)> {
        let preds = self.predict_all(user);
        let mut rated = vec![false; preds.len()];
        for r in self.train.user_ratings(user) {
            rated[r.item] = true;
        }
        let mut ranked: Vec<(usize, f64)> = preds
            .iter()
            .enumerate()
            .filter(|(i, _)| !rated[*i])
            .map(|(i, p)| (i, p.value))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked
    }

    pub fn recommend_top_n(&self, user: usize, top_n: usize) -> Result<RecommendationList> {
        if top_n == 0 {
            return Err(Error::config("topN must be >= 1"));
        }
        let mut ranked = self.ranked_candidates(user);
        ranked.truncate(top_n);
        Ok(self.list(user, top_n, &ranked))
    }

    pub(crate) fn list(&self, user: usize, top_n: usize, ranked: &[(usize, f64)]) -> RecommendationList {
        RecommendationList {
            user: self.train.user_id(user),
            top_n,
            items: ranked
                .iter()
                .take(top_n)
                .map(|&(i, p)| (self.train.item_id(i), p))
                .collect(),
        }
    }
}

pub fn predict(model: &NeighborModel, train: &RatingsDataset, user: usize, item: usize) -> Result<Prediction> {
    Ok(Predictor::new(model, train)?.predict(user, item))
}

pub fn recommend_top_n(
    model: &NeighborModel,
    train: &RatingsDataset,
    user: usize,
    top_n: usize,
) -> Result<RecommendationList> {
    Predictor::new(model, train)?.recommend_top_n(user, top_n)
}
