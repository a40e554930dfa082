//! User-user rating-difference distances over co-rated items.
//!
//! For two users with common items `C`, the distance is the mean of
//! `|a_i - b_i|` over `C` on normalized ratings (or the plain sum, when
//! [`Aggregation::Sum`] is selected). Pairs with fewer than `min_overlap`
//! common items have no distance at all. Callers decide what an undefined
//! distance means; [`DistanceMatrix::get_or_penalty`] substitutes the
//! configured penalty.
//!
//! These distances are not a metric: averaging over pair-specific supports
//! breaks the triangle inequality, and nothing downstream assumes it.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::NormalizedRatings;

/// A user's normalized ratings, sorted by item index.
#[derive(Debug, Clone, PartialEq)]
pub struct UserVector {
    pub user_id: u32,
    pub entries: Vec<(usize, f64)>,
}

impl UserVector {
    pub fn rating_count(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, item: usize) -> Option<f64> {
        self.entries
            .binary_search_by_key(&item, |&(i, _)| i)
            .ok()
            .map(|pos| self.entries[pos].1)
    }

    pub fn mean(&self) -> Option<f64> {
        if self.entries.is_empty() {
            None
        } else {
            Some(self.entries.iter().map(|&(_, v)| v).sum::<f64>() / self.entries.len() as f64)
        }
    }
}

/// One vector per indexed user, including users with no ratings.
pub fn build_vectors(ratings: &NormalizedRatings<'_>) -> Vec<UserVector> {
    let ds = ratings.dataset();
    (0..ds.n_users())
        .map(|u| UserVector {
            user_id: ds.user_id(u),
            entries: ratings.user_values(u).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Mean absolute difference; values stay in [0, 1].
    #[default]
    Mean,
    /// Summed absolute difference.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistanceParams {
    pub min_overlap: usize,
    pub aggregation: Aggregation,
    /// Stand-in for undefined distances in algorithms that need a complete
    /// matrix.
    pub penalty: f64,
}

impl Default for DistanceParams {
    fn default() -> Self {
        DistanceParams {
            min_overlap: 1,
            aggregation: Aggregation::Mean,
            penalty: 1.0,
        }
    }
}

impl DistanceParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_overlap == 0 {
            return Err(Error::config("min_overlap must be >= 1"));
        }
        if !(self.penalty.is_finite() && self.penalty > 0.0) {
            return Err(Error::config("penalty distance must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDistance {
    pub value: Option<f64>,
    pub overlap: usize,
}

fn finish(sum: f64, overlap: usize, min_overlap: usize, aggregation: Aggregation) -> Option<f64> {
    if overlap < min_overlap || overlap == 0 {
        return None;
    }
    Some(match aggregation {
        Aggregation::Mean => sum / overlap as f64,
        Aggregation::Sum => sum,
    })
}

/// Distance between two users by merging their sorted rating lists.
pub fn pairwise_distance(
    a: &UserVector,
    b: &UserVector,
    min_overlap: usize,
    aggregation: Aggregation,
) -> PairDistance {
    let (mut i, mut j) = (0, 0);
    let (mut sum, mut overlap) = (0.0, 0);
    while i < a.entries.len() && j < b.entries.len() {
        let (ia, va) = a.entries[i];
        let (ib, vb) = b.entries[j];
        match ia.cmp(&ib) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum += (va - vb).abs();
                overlap += 1;
                i += 1;
                j += 1;
            }
        }
    }
    PairDistance {
        value: finish(sum, overlap, min_overlap, aggregation),
        overlap,
    }
}

/// Symmetric user-user distances in condensed upper-triangular storage.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    // NaN marks an undefined pair.
    dist: Vec<f64>,
    overlap: Vec<u32>,
    rated: Vec<bool>,
    penalty: f64,
}

fn condensed_len(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn row_start(n: usize, u: usize) -> usize {
    u * n - u * (u + 1) / 2
}

impl DistanceMatrix {
    pub fn n_users(&self) -> usize {
        self.n
    }

    pub fn n_pairs(&self) -> usize {
        self.dist.len()
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    /// Whether the user has at least one rating.
    pub fn is_rated(&self, u: usize) -> bool {
        self.rated[u]
    }

    pub fn rated_users(&self) -> Vec<usize> {
        (0..self.n).filter(|&u| self.rated[u]).collect()
    }

    #[inline]
    fn index(&self, u: usize, v: usize) -> usize {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        row_start(self.n, a) + (b - a - 1)
    }

    /// Distance between `u` and `v`, `None` when undefined.
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        if u == v {
            return self.rated[u].then_some(0.0);
        }
        let d = self.dist[self.index(u, v)];
        (!d.is_nan()).then_some(d)
    }

    #[inline]
    pub fn get_or_penalty(&self, u: usize, v: usize) -> f64 {
        self.get(u, v).unwrap_or(self.penalty)
    }

    pub fn overlap(&self, u: usize, v: usize) -> usize {
        if u == v {
            return 0;
        }
        self.overlap[self.index(u, v)] as usize
    }

    /// All defined off-diagonal distances, in (u, v) order with u < v.
    pub fn defined_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.dist.iter().copied().filter(|d| !d.is_nan())
    }

    /// Nearest-rank quantile of the defined off-diagonal distances among
    /// rated users.
    pub fn quantile(&self, q: f64) -> Option<f64> {
        let mut values: Vec<f64> = self.defined_values().collect();
        if values.is_empty() {
            return None;
        }
        let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len()) - 1;
        let (_, v, _) = values.select_nth_unstable_by(rank, |a, b| a.total_cmp(b));
        Some(*v)
    }

    /// Write `u,v,distance,overlap` rows (raw user ids) for every pair with
    /// at least one co-rated item. Undefined distances are left blank.
    pub fn write_csv<W: Write>(&self, user_ids: &[u32], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["u", "v", "distance", "overlap"]).map_err(csv_err)?;
        for u in 0..self.n {
            for v in u + 1..self.n {
                let idx = self.index(u, v);
                let ov = self.overlap[idx];
                if ov == 0 {
                    continue;
                }
                let d = self.dist[idx];
                let d = if d.is_nan() { String::new() } else { d.to_string() };
                w.write_record([
                    user_ids[u].to_string(),
                    user_ids[v].to_string(),
                    d,
                    ov.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }

    /// Inverse of [`write_csv`](Self::write_csv). `vectors` supplies the user
    /// universe and which users have ratings.
    pub fn read_csv<R: BufRead>(vectors: &[UserVector], penalty: f64, input: R) -> Result<Self> {
        let n = vectors.len();
        let ids: Vec<u32> = vectors.iter().map(|v| v.user_id).collect();
        let lookup = |id: u32| {
            ids.binary_search(&id)
                .map_err(|_| Error::config(format!("distance file names unknown user {id}")))
        };
        let mut m = DistanceMatrix {
            n,
            dist: vec![f64::NAN; condensed_len(n)],
            overlap: vec![0; condensed_len(n)],
            rated: vectors.iter().map(|v| v.rating_count() > 0).collect(),
            penalty,
        };
        let mut r = csv::Reader::from_reader(input);
        for row in r.records() {
            let row = row.map_err(csv_err)?;
            if row.len() != 4 {
                return Err(Error::config("distance rows need 4 fields"));
            }
            let num = |i: usize| -> Result<u32> {
                row[i]
                    .parse()
                    .map_err(|_| Error::config(format!("bad integer `{}`", &row[i])))
            };
            let (u, v) = (lookup(num(0)?)?, lookup(num(1)?)?);
            if u == v {
                return Err(Error::config("distance file contains a self pair"));
            }
            let idx = m.index(u, v);
            m.overlap[idx] = num(3)?;
            if !row[2].is_empty() {
                m.dist[idx] = row[2]
                    .parse()
                    .map_err(|_| Error::config(format!("bad distance `{}`", &row[2])))?;
            }
        }
        Ok(m)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::config(format!("csv: {e}"))
}

// Item -> raters, each list sorted by user index.
fn inverted_index(vectors: &[UserVector]) -> Vec<Vec<(u32, f64)>> {
    let n_items = vectors
        .iter()
        .filter_map(|v| v.entries.last().map(|&(i, _)| i + 1))
        .max()
        .unwrap_or(0);
    let mut raters = vec![Vec::new(); n_items];
    for (u, vec) in vectors.iter().enumerate() {
        for &(item, value) in &vec.entries {
            raters[item].push((u as u32, value));
        }
    }
    raters
}

struct RowScratch {
    sum: Vec<f64>,
    count: Vec<u32>,
}

// Fill the condensed row of `u` (pairs u < v). Items are visited in ascending
// order, so each pair's sum accumulates in the same order as
// `pairwise_distance` and results are bit-identical to it.
fn fill_row(
    u: usize,
    vectors: &[UserVector],
    raters: &[Vec<(u32, f64)>],
    params: &DistanceParams,
    scratch: &mut RowScratch,
    dist: &mut [f64],
    overlap: &mut [u32],
) {
    let n = vectors.len();
    for &(item, a) in &vectors[u].entries {
        let list = &raters[item];
        let start = list.partition_point(|&(v, _)| (v as usize) <= u);
        for &(v, b) in &list[start..] {
            let v = v as usize;
            scratch.sum[v] += (a - b).abs();
            scratch.count[v] += 1;
        }
    }
    for v in u + 1..n {
        let c = scratch.count[v];
        let slot = v - u - 1;
        overlap[slot] = c;
        dist[slot] = finish(scratch.sum[v], c as usize, params.min_overlap, params.aggregation)
            .unwrap_or(f64::NAN);
        scratch.sum[v] = 0.0;
        scratch.count[v] = 0;
    }
}

fn empty_matrix(vectors: &[UserVector], params: &DistanceParams) -> DistanceMatrix {
    let n = vectors.len();
    DistanceMatrix {
        n,
        dist: vec![f64::NAN; condensed_len(n)],
        overlap: vec![0; condensed_len(n)],
        rated: vectors.iter().map(|v| v.rating_count() > 0).collect(),
        penalty: params.penalty,
    }
}

fn split_rows<T>(mut buf: &mut [T], n: usize) -> Vec<&mut [T]> {
    let mut rows = Vec::with_capacity(n);
    for u in 0..n {
        let (row, rest) = buf.split_at_mut(n - u - 1);
        rows.push(row);
        buf = rest;
    }
    rows
}

/// Compute all pairwise distances, evaluating rows in parallel.
pub fn build_distance_matrix(vectors: &[UserVector], params: &DistanceParams) -> DistanceMatrix {
    let n = vectors.len();
    let mut m = empty_matrix(vectors, params);
    let raters = inverted_index(vectors);
    let dist_rows = split_rows(&mut m.dist, n);
    let overlap_rows = split_rows(&mut m.overlap, n);
    dist_rows
        .into_par_iter()
        .zip(overlap_rows)
        .enumerate()
        .for_each_init(
            || RowScratch {
                sum: vec![0.0; n],
                count: vec![0; n],
            },
            |scratch, (u, (d, o))| fill_row(u, vectors, &raters, params, scratch, d, o),
        );
    m
}

/// Single-threaded pairwise build, one merge per pair.
pub fn build_distance_matrix_sequential(
    vectors: &[UserVector],
    params: &DistanceParams,
) -> DistanceMatrix {
    let n = vectors.len();
    let mut m = empty_matrix(vectors, params);
    let mut idx = 0;
    for u in 0..n {
        for v in u + 1..n {
            let pd = pairwise_distance(&vectors[u], &vectors[v], params.min_overlap, params.aggregation);
            m.dist[idx] = pd.value.unwrap_or(f64::NAN);
            m.overlap[idx] = pd.overlap as u32;
            idx += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::ingest::normalize;
    use proptest::prelude::*;

    fn toy_vectors() -> Vec<UserVector> {
        let ds = fixtures::toy_dataset();
        build_vectors(&normalize(&ds))
    }

    #[test]
    fn toy_vectors_match_table() {
        let v = toy_vectors();
        assert_eq!(v.len(), 8);
        assert_eq!(v[0].entries, vec![(0, 1.0), (1, 0.5), (3, 0.75)]);
        assert!(v[6].entries.is_empty());
        assert!(v[7].entries.is_empty());
    }

    #[test]
    fn single_rating_dataset() {
        let ds = crate::ingest::parse_str("4\t2\t3\t0\n", crate::ingest::Format::Ml100kTab).unwrap();
        let v = build_vectors(&normalize(&ds));
        assert_eq!(v, vec![UserVector { user_id: 4, entries: vec![(0, 0.5)] }]);
    }

    #[test]
    fn toy_pairs() {
        let v = toy_vectors();
        let d12 = pairwise_distance(&v[0], &v[1], 1, Aggregation::Mean);
        assert_eq!(d12.overlap, 3);
        assert!((d12.value.unwrap() - 0.25).abs() < 1e-15);
        let d25 = pairwise_distance(&v[1], &v[4], 1, Aggregation::Mean);
        assert_eq!((d25.value, d25.overlap), (Some(0.0), 4));
        let d17 = pairwise_distance(&v[0], &v[6], 1, Aggregation::Mean);
        assert_eq!((d17.value, d17.overlap), (None, 0));
        let raw = pairwise_distance(&v[0], &v[1], 1, Aggregation::Sum);
        assert!((raw.value.unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn min_overlap_makes_pairs_undefined() {
        let v = toy_vectors();
        // u1 and u3 share M2 and M4 only.
        let d = pairwise_distance(&v[0], &v[2], 3, Aggregation::Mean);
        assert_eq!((d.value, d.overlap), (None, 2));
    }

    #[test]
    fn toy_matrix_undefined_pairs() {
        let m = build_distance_matrix(&toy_vectors(), &DistanceParams::default());
        assert_eq!(m.n_pairs(), 28);
        let undefined = (0..8)
            .flat_map(|u| (u + 1..8).map(move |v| (u, v)))
            .filter(|&(u, v)| m.get(u, v).is_none())
            .count();
        assert_eq!(undefined, 13);
        assert_eq!(m.get(1, 4), Some(0.0));
        assert_eq!(m.get(6, 6), None);
        assert_eq!(m.get(0, 0), Some(0.0));
        assert_eq!(m.get_or_penalty(0, 7), 1.0);
    }

    #[test]
    fn single_user_has_no_pairs() {
        let v = vec![UserVector { user_id: 1, entries: vec![(0, 1.0)] }];
        let m = build_distance_matrix(&v, &DistanceParams::default());
        assert_eq!(m.n_pairs(), 0);
        assert_eq!(m.get(0, 0), Some(0.0));
    }

    #[test]
    fn quantile_nearest_rank() {
        let m = build_distance_matrix(&toy_vectors(), &DistanceParams::default());
        let mut values: Vec<f64> = m.defined_values().collect();
        values.sort_by(f64::total_cmp);
        assert_eq!(values.len(), 15);
        assert_eq!(m.quantile(0.25), Some(values[3]));
        assert_eq!(m.quantile(1.0), Some(values[14]));
    }

    #[test]
    fn csv_round_trip() {
        let vectors = toy_vectors();
        let m = build_distance_matrix(&vectors, &DistanceParams::default());
        let ids: Vec<u32> = vectors.iter().map(|v| v.user_id).collect();
        let mut buf = Vec::new();
        m.write_csv(&ids, &mut buf).unwrap();
        let back = DistanceMatrix::read_csv(&vectors, 1.0, buf.as_slice()).unwrap();
        assert_eq!(format!("{back:?}"), format!("{m:?}"));
    }

    fn arb_vectors() -> impl Strategy<Value = Vec<UserVector>> {
        prop::collection::vec(prop::collection::btree_map(0usize..12, 1u8..=5, 0..8), 1..25).prop_map(
            |rows| {
                rows.into_iter()
                    .enumerate()
                    .map(|(u, row)| UserVector {
                        user_id: u as u32 + 1,
                        entries: row
                            .into_iter()
                            .map(|(i, r)| (i, crate::ingest::normalize_rating(r)))
                            .collect(),
                    })
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn symmetric_bounded_and_order_independent(vectors in arb_vectors(), min_overlap in 1usize..3) {
            let params = DistanceParams { min_overlap, ..Default::default() };
            let par = build_distance_matrix(&vectors, &params);
            let seq = build_distance_matrix_sequential(&vectors, &params);
            prop_assert_eq!(format!("{par:?}"), format!("{seq:?}"));
            for u in 0..vectors.len() {
                if vectors[u].rating_count() > 0 {
                    prop_assert_eq!(par.get(u, u), Some(0.0));
                }
                for v in 0..vectors.len() {
                    prop_assert_eq!(par.get(u, v).map(f64::to_bits), par.get(v, u).map(f64::to_bits));
                    if u != v {
                        prop_assert_eq!(par.get(u, v).is_none(), par.overlap(u, v) < min_overlap);
                    }
                    if let Some(d) = par.get(u, v) {
                        prop_assert!((0.0..=1.0).contains(&d));
                    }
                }
            }
        }
    }
}
