//! MovieLens ingestion: parsing, normalization, train/test splitting and
//! synthetic attack-profile injection.
//!
//! A [`RatingsDataset`] keeps two contiguous index spaces, one for users and
//! one for items. Raw ids are sorted ascending before indexing, so the
//! indices never depend on the order lines appeared in a file. Users with no
//! ratings are kept: they are exactly the users every clustering algorithm
//! leaves unassigned.
//!
//! Both MovieLens layouts are read: `user\titem\trating\ttimestamp` (ML-100K)
//! and `user::item::rating::timestamp` (ML-1M). The writer always emits the
//! tab layout. Because neither layout can express a user or item without
//! ratings, the reader also accepts `#user <id>` and `#item <id>` directive
//! lines declaring them; any other line starting with `#` is a comment and blank lines are
//! skipped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const SCALE_MIN: u8 = 1;
pub const SCALE_MAX: u8 = 5;

/// One raw rating as it appears in a MovieLens file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RatingRecord {
    pub user_id: u32,
    pub item_id: u32,
    pub rating: u8,
    pub timestamp: i64,
}

/// A rating stored under a user, addressed by item index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rating {
    pub item: usize,
    pub value: u8,
    pub timestamp: i64,
}

/// Input file layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    /// Tab-separated, as in ML-100K `u.data`.
    #[serde(rename = "ml100k")]
    Ml100kTab,
    /// `::`-separated, as in ML-1M `ratings.dat`.
    #[serde(rename = "ml1m")]
    Ml1mDoubleColon,
}

impl Format {
    fn separator(self) -> &'static str {
        match self {
            Format::Ml100kTab => "\t",
            Format::Ml1mDoubleColon => "::",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Ml100kTab => "ml100k",
            Format::Ml1mDoubleColon => "ml1m",
        })
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml100k" | "ml-100k" | "tab" => Ok(Format::Ml100kTab),
            "ml1m" | "ml-1m" | "doublecolon" => Ok(Format::Ml1mDoubleColon),
            other => Err(Error::config(format!("unknown dataset format `{other}`"))),
        }
    }
}

/// Sparse user x item ratings on the 1..=5 scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingsDataset {
    user_ids: Vec<u32>,
    item_ids: Vec<u32>,
    // CSR by user index; each row sorted by item index.
    offsets: Vec<usize>,
    ratings: Vec<Rating>,
}

impl Default for RatingsDataset {
    fn default() -> Self {
        RatingsDataset {
            user_ids: Vec::new(),
            item_ids: Vec::new(),
            offsets: vec![0],
            ratings: Vec::new(),
        }
    }
}

impl RatingsDataset {
    /// Build a dataset whose universe is exactly the users and items that
    /// appear in `records`.
    pub fn from_records(records: impl IntoIterator<Item = RatingRecord>) -> Result<Self> {
        Self::with_universe(std::iter::empty(), std::iter::empty(), records)
    }

    /// Build a dataset over the union of the given user and item ids and
    /// those appearing in `records`. Users without records are retained.
    pub fn with_universe(
        users: impl IntoIterator<Item = u32>,
        items: impl IntoIterator<Item = u32>,
        records: impl IntoIterator<Item = RatingRecord>,
    ) -> Result<Self> {
        let mut user_set: BTreeSet<u32> = users.into_iter().collect();
        let mut item_set: BTreeSet<u32> = items.into_iter().collect();
        let mut by_pair: BTreeMap<(u32, u32), (u8, i64)> = BTreeMap::new();
        for r in records {
            validate_record(&r, None)?;
            if by_pair
                .insert((r.user_id, r.item_id), (r.rating, r.timestamp))
                .is_some()
            {
                return Err(Error::DuplicateRating {
                    user: r.user_id,
                    item: r.item_id,
                });
            }
            user_set.insert(r.user_id);
            item_set.insert(r.item_id);
        }
        if let Some(&bad) = user_set.iter().find(|&&u| u == 0) {
            return Err(Error::validation(None, format!("user id {bad} must be >= 1")));
        }
        if let Some(&bad) = item_set.iter().find(|&&i| i == 0) {
            return Err(Error::validation(None, format!("item id {bad} must be >= 1")));
        }

        let user_ids: Vec<u32> = user_set.into_iter().collect();
        let item_ids: Vec<u32> = item_set.into_iter().collect();
        let item_pos: BTreeMap<u32, usize> =
            item_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

        let mut offsets = Vec::with_capacity(user_ids.len() + 1);
        let mut ratings = Vec::with_capacity(by_pair.len());
        let mut pairs = by_pair.into_iter().peekable();
        offsets.push(0);
        for &user in &user_ids {
            while let Some(&((u, item), (value, timestamp))) = pairs.peek() {
                if u != user {
                    break;
                }
                ratings.push(Rating {
                    item: item_pos[&item],
                    value,
                    timestamp,
                });
                pairs.next();
            }
            offsets.push(ratings.len());
        }

        Ok(RatingsDataset {
            user_ids,
            item_ids,
            offsets,
            ratings,
        })
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn n_ratings(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    /// Raw user ids in index order.
    pub fn user_ids(&self) -> &[u32] {
        &self.user_ids
    }

    /// Raw item ids in index order.
    pub fn item_ids(&self) -> &[u32] {
        &self.item_ids
    }

    pub fn user_id(&self, user: usize) -> u32 {
        self.user_ids[user]
    }

    pub fn item_id(&self, item: usize) -> u32 {
        self.item_ids[item]
    }

    pub fn user_index(&self, user_id: u32) -> Option<usize> {
        self.user_ids.binary_search(&user_id).ok()
    }

    pub fn item_index(&self, item_id: u32) -> Option<usize> {
        self.item_ids.binary_search(&item_id).ok()
    }

    /// Ratings of one user, sorted by item index.
    pub fn user_ratings(&self, user: usize) -> &[Rating] {
        &self.ratings[self.offsets[user]..self.offsets[user + 1]]
    }

    pub fn rating(&self, user: usize, item: usize) -> Option<u8> {
        let row = self.user_ratings(user);
        row.binary_search_by_key(&item, |r| r.item)
            .ok()
            .map(|pos| row[pos].value)
    }

    /// Mean raw rating of a user, `None` when the user rated nothing.
    pub fn user_mean(&self, user: usize) -> Option<f64> {
        let row = self.user_ratings(user);
        if row.is_empty() {
            return None;
        }
        Some(row.iter().map(|r| f64::from(r.value)).sum::<f64>() / row.len() as f64)
    }

    pub fn global_mean(&self) -> Option<f64> {
        if self.ratings.is_empty() {
            return None;
        }
        Some(self.ratings.iter().map(|r| f64::from(r.value)).sum::<f64>() / self.ratings.len() as f64)
    }

    /// All records in (user id, item id) order.
    pub fn records(&self) -> impl Iterator<Item = RatingRecord> + '_ {
        (0..self.n_users()).flat_map(move |u| {
            self.user_ratings(u).iter().map(move |r| RatingRecord {
                user_id: self.user_ids[u],
                item_id: self.item_ids[r.item],
                rating: r.value,
                timestamp: r.timestamp,
            })
        })
    }

    /// Serialize in the tab-separated ML-100K layout. Users and items
    /// without ratings are written as `#user <id>` and `#item <id>`
    /// directives so they survive a round trip.
    pub fn write_movielens<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for u in 0..self.n_users() {
            if self.user_ratings(u).is_empty() {
                writeln!(out, "#user {}", self.user_ids[u])?;
            }
        }
        let mut rated = vec![false; self.n_items()];
        for r in &self.ratings {
            rated[r.item] = true;
        }
        for (i, _) in rated.iter().enumerate().filter(|(_, &r)| !r) {
            writeln!(out, "#item {}", self.item_ids[i])?;
        }
        for r in self.records() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                r.user_id, r.item_id, r.rating, r.timestamp
            )?;
        }
        Ok(())
    }

    pub fn to_movielens_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_movielens(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("output is ASCII")
    }
}

fn validate_record(r: &RatingRecord, line: Option<usize>) -> Result<()> {
    if r.user_id == 0 {
        return Err(Error::validation(line, "user id must be >= 1"));
    }
    if r.item_id == 0 {
        return Err(Error::validation(line, "item id must be >= 1"));
    }
    if !(SCALE_MIN..=SCALE_MAX).contains(&r.rating) {
        return Err(Error::validation(
            line,
            format!(
                "rating {} outside [{SCALE_MIN}, {SCALE_MAX}]",
                r.rating
            ),
        ));
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(field: &str, what: &str, line: usize) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} `{field}`"),
    })
}

/// Parse MovieLens ratings from any buffered reader.
pub fn parse_reader<R: BufRead>(reader: R, format: Format) -> Result<RatingsDataset> {
    let sep = format.separator();
    let mut declared = Vec::new();
    let mut declared_items = Vec::new();
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(id) = rest.strip_prefix("user") {
                let id: u32 = parse_field(id, "user id", lineno)?;
                if id == 0 {
                    return Err(Error::validation(Some(lineno), "user id must be >= 1"));
                }
                declared.push(id);
            } else if let Some(id) = rest.strip_prefix("item") {
                let id: u32 = parse_field(id, "item id", lineno)?;
                if id == 0 {
                    return Err(Error::validation(Some(lineno), "item id must be >= 1"));
                }
                declared_items.push(id);
            }
            continue;
        }
        let fields: Vec<&str> = line.split(sep).collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 4 fields separated by {sep:?}, found {}", fields.len()),
            });
        }
        let rating: i64 = parse_field(fields[2], "rating", lineno)?;
        if !(i64::from(SCALE_MIN)..=i64::from(SCALE_MAX)).contains(&rating) {
            return Err(Error::validation(
                Some(lineno),
                format!("rating {rating} outside [{SCALE_MIN}, {SCALE_MAX}]"),
            ));
        }
        let record = RatingRecord {
            user_id: parse_field(fields[0], "user id", lineno)?,
            item_id: parse_field(fields[1], "item id", lineno)?,
            rating: rating as u8,
            timestamp: parse_field(fields[3], "timestamp", lineno)?,
        };
        validate_record(&record, Some(lineno))?;
        if !seen.insert((record.user_id, record.item_id)) {
            return Err(Error::DuplicateRating {
                user: record.user_id,
                item: record.item_id,
            });
        }
        records.push(record);
    }
    RatingsDataset::with_universe(declared, declared_items, records)
}

pub fn parse_str(text: &str, format: Format) -> Result<RatingsDataset> {
    parse_reader(text.as_bytes(), format)
}

/// Parse a MovieLens ratings file.
pub fn parse_movielens(path: impl AsRef<Path>, format: Format) -> Result<RatingsDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_reader(BufReader::new(file), format)
}

/// Map a raw rating onto [0, 1].
pub fn normalize_rating(raw: u8) -> f64 {
    f64::from(raw - SCALE_MIN) / f64::from(SCALE_MAX - SCALE_MIN)
}

/// Read-only [0, 1] view of a dataset. Missing cells stay missing.
#[derive(Debug, Clone, Copy)]
pub struct NormalizedRatings<'a> {
    dataset: &'a RatingsDataset,
}

pub fn normalize(dataset: &RatingsDataset) -> NormalizedRatings<'_> {
    NormalizedRatings { dataset }
}

impl<'a> NormalizedRatings<'a> {
    pub fn dataset(&self) -> &'a RatingsDataset {
        self.dataset
    }

    pub fn value(&self, user: usize, item: usize) -> Option<f64> {
        self.dataset.rating(user, item).map(normalize_rating)
    }

    /// (item index, normalized value) pairs of a user, ascending by item.
    pub fn user_values(&self, user: usize) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.dataset
            .user_ratings(user)
            .iter()
            .map(|r| (r.item, normalize_rating(r.value)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Record-level random split. Both halves keep the full user and item
/// universe of `dataset`, so indices line up between train and test.
///
/// The train half receives `floor(train_fraction * n)` records, except that
/// at least one record goes to test whenever `n >= 2`.
pub fn split(dataset: &RatingsDataset, spec: &SplitSpec) -> Result<(RatingsDataset, RatingsDataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::config(format!(
            "train_fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let n = dataset.n_ratings();
    if n == 0 {
        return Err(Error::config("cannot split an empty dataset"));
    }
    let mut n_train = (spec.train_fraction * n as f64).floor() as usize;
    if n >= 2 && n_train == n {
        n_train = n - 1;
    }

    let records: Vec<RatingRecord> = dataset.records().collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(spec.seed));
    let mut in_train = vec![false; n];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }

    let (train, test): (Vec<_>, Vec<_>) = records
        .into_iter()
        .zip(in_train)
        .partition(|(_, train)| *train);
    let universe = |part: Vec<(RatingRecord, bool)>| {
        RatingsDataset::with_universe(
            dataset.user_ids().iter().copied(),
            dataset.item_ids().iter().copied(),
            part.into_iter().map(|(r, _)| r),
        )
    };
    Ok((universe(train)?, universe(test)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    /// Fake profiles rate a target item at the scale maximum.
    Push,
    /// Fake profiles rate a target item at the scale minimum.
    Nuke,
    /// Profiles rate random items with uniformly random ratings.
    Random,
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "push" => Ok(AttackKind::Push),
            "nuke" => Ok(AttackKind::Nuke),
            "random" => Ok(AttackKind::Random),
            other => Err(Error::config(format!("unknown attack kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionSpec {
    pub kind: AttackKind,
    pub n_profiles: usize,
    pub filler_fraction: f64,
    #[serde(default)]
    pub target_item: Option<u32>,
    pub seed: u64,
}

/// Append `n_profiles` synthetic users to `dataset`.
///
/// Injected ids start right after the largest existing user id. PUSH and NUKE
/// profiles rate the target item at 5 and 1 and rate
/// `round(filler_fraction * (n_items - 1))` other items; RANDOM profiles rate
/// `max(1, round(filler_fraction * n_items))` items. Filler ratings are drawn
/// uniformly from 1..=5. Returns the new dataset and the injected ids.
pub fn inject_profiles(
    dataset: &RatingsDataset,
    spec: &InjectionSpec,
) -> Result<(RatingsDataset, BTreeSet<u32>)> {
    if !(spec.filler_fraction > 0.0 && spec.filler_fraction <= 1.0) {
        return Err(Error::config(format!(
            "filler_fraction must lie in (0, 1], got {}",
            spec.filler_fraction
        )));
    }
    let target = match spec.kind {
        AttackKind::Push | AttackKind::Nuke => {
            let id = spec
                .target_item
                .ok_or_else(|| Error::config("push/nuke injection needs a target_item"))?;
            Some(dataset.item_index(id).ok_or_else(|| {
                Error::config(format!("target item {id} is not in the dataset"))
            })?)
        }
        AttackKind::Random => None,
    };
    if spec.n_profiles == 0 {
        return Ok((dataset.clone(), BTreeSet::new()));
    }
    if dataset.n_items() == 0 {
        return Err(Error::config("cannot inject profiles into a dataset without items"));
    }

    let mut rng = seed::rng(spec.seed);
    let first_id = dataset.user_ids().last().copied().unwrap_or(0) + 1;
    let candidates: Vec<usize> = (0..dataset.n_items())
        .filter(|&i| Some(i) != target)
        .collect();
    let n_filler = match spec.kind {
        AttackKind::Random => ((spec.filler_fraction * candidates.len() as f64).round() as usize).max(1),
        _ => (spec.filler_fraction * candidates.len() as f64).round() as usize,
    }
    .min(candidates.len());

    let mut records: Vec<RatingRecord> = dataset.records().collect();
    let mut injected = BTreeSet::new();
    for p in 0..spec.n_profiles {
        let user_id = first_id + p as u32;
        injected.insert(user_id);
        if let Some(t) = target {
            records.push(RatingRecord {
                user_id,
                item_id: dataset.item_id(t),
                rating: if spec.kind == AttackKind::Push { SCALE_MAX } else { SCALE_MIN },
                timestamp: 0,
            });
        }
        let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, candidates.len(), n_filler)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        chosen.sort_unstable();
        for item in chosen {
            records.push(RatingRecord {
                user_id,
                item_id: dataset.item_id(item),
                rating: rng.gen_range(SCALE_MIN..=SCALE_MAX),
                timestamp: 0,
            });
        }
    }
    let out = RatingsDataset::with_universe(
        dataset.user_ids().iter().copied().chain(injected.iter().copied()),
        dataset.item_ids().iter().copied(),
        records,
    )?;
    Ok((out, injected))
}
