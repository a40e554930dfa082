//! The eight-user, four-movie worked example and the partitions and
//! co-association tables published for it.
//!
//! Users 2 and 5 rate identically, as do users 3 and 6. Any clustering that
//! is a function of the ratings must therefore keep each of those pairs
//! together, while every published partition separates at least one of
//! them. The partitions below are consequently hand-entered rather than
//! computed; they drive the ensemble and outlier stages directly.

use crate::clustering::{Algorithm, Partition};
use crate::ingest::{parse_str, Format, RatingsDataset};

/// The example rating table in ML-100K layout. Users 7 and 8 rated
/// nothing and are declared with `#user` directives.
pub const TOY_DATA: &str = "\
1\t1\t5\t0
1\t2\t3\t0
1\t4\t4\t0
2\t1\t4\t0
2\t2\t2\t0
2\t3\t5\t0
2\t4\t3\t0
3\t2\t4\t0
3\t3\t5\t0
3\t4\t2\t0
4\t1\t4\t0
4\t2\t3\t0
4\t4\t4\t0
5\t1\t4\t0
5\t2\t2\t0
5\t3\t5\t0
5\t4\t3\t0
6\t2\t4\t0
6\t3\t5\t0
6\t4\t2\t0
#user 7
#user 8
";

pub const TOY_USER_IDS: [u32; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

pub fn toy_dataset() -> RatingsDataset {
    parse_str(TOY_DATA, Format::Ml100kTab).expect("fixture parses")
}

// Member lists use zero-based user indices (user id - 1).
pub const KMEANS_CLUSTERS: [&[usize]; 2] = [&[0, 1, 2, 3], &[4, 5]];
pub const KMEDOIDS_CLUSTERS: [&[usize]; 2] = [&[0, 1, 2], &[3, 4, 5]];
pub const DBSCAN_CLUSTERS: [&[usize]; 2] = [&[0, 3, 4, 5], &[1, 2]];
pub const DIVISIVE_CLUSTERS: [&[usize]; 2] = [&[0, 1, 2, 5], &[3, 4]];

pub fn published_partition(algorithm: Algorithm) -> Partition {
    let clusters = match algorithm {
        Algorithm::KMeans => &KMEANS_CLUSTERS,
        Algorithm::KMedoids => &KMEDOIDS_CLUSTERS,
        Algorithm::Dbscan => &DBSCAN_CLUSTERS,
        Algorithm::Divisive => &DIVISIVE_CLUSTERS,
    };
    Partition::from_clusters(algorithm, 8, clusters)
}

/// The published partitions in publication order: k-means, k-medoids,
/// DBSCAN, divisive.
pub fn published_partitions() -> Vec<Partition> {
    Algorithm::ALL.into_iter().map(published_partition).collect()
}

/// Co-association after k-means alone, as printed (`-` read as 0).
pub const TABLE_KMEANS: [[usize; 8]; 8] = [
    [1, 1, 1, 1, 0, 0, 0, 0],
    [1, 1, 1, 1, 0, 0, 0, 0],
    [1, 1, 1, 1, 0, 0, 0, 0],
    [1, 1, 1, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 1, 0, 0],
    [0, 0, 0, 0, 1, 1, 0, 0],
    [0; 8],
    [0; 8],
];

/// After k-means and k-medoids.
pub const TABLE_KMEDOIDS: [[usize; 8]; 8] = [
    [2, 2, 2, 1, 0, 0, 0, 0],
    [2, 2, 2, 1, 0, 0, 0, 0],
    [2, 2, 2, 1, 0, 0, 0, 0],
    [1, 1, 1, 2, 1, 1, 0, 0],
    [0, 0, 0, 1, 2, 2, 0, 0],
    [0, 0, 0, 1, 2, 2, 0, 0],
    [0; 8],
    [0; 8],
];

/// After k-means, k-medoids and DBSCAN, as printed. Row 6 is inconsistent
/// with column 6 and with its own diagonal; see [`TABLE_DBSCAN_ERRATUM_ROW`].
pub const TABLE_DBSCAN: [[usize; 8]; 8] = [
    [3, 2, 2, 2, 1, 1, 0, 0],
    [2, 3, 3, 1, 0, 0, 0, 0],
    [2, 3, 3, 1, 0, 0, 0, 0],
    [2, 1, 1, 3, 2, 2, 0, 0],
    [1, 0, 0, 2, 3, 3, 0, 0],
    [0, 1, 1, 1, 2, 2, 0, 0],
    [0; 8],
    [0; 8],
];

/// Zero-based index of the misprinted row in [`TABLE_DBSCAN`].
pub const TABLE_DBSCAN_ERRATUM_ROW: usize = 5;

/// After all four algorithms.
pub const TABLE_DIVISIVE: [[usize; 8]; 8] = [
    [4, 3, 3, 2, 1, 2, 0, 0],
    [3, 4, 4, 1, 0, 1, 0, 0],
    [3, 4, 4, 1, 0, 1, 0, 0],
    [2, 1, 1, 4, 3, 2, 0, 0],
    [1, 0, 0, 3, 4, 3, 0, 0],
    [2, 1, 1, 2, 3, 4, 0, 0],
    [0; 8],
    [0; 8],
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shape() {
        let ds = toy_dataset();
        assert_eq!(ds.user_ids(), &TOY_USER_IDS);
        assert_eq!(ds.n_ratings(), 20);
    }

    #[test]
    fn printed_tables_other_than_erratum_are_symmetric() {
        for t in [TABLE_KMEANS, TABLE_KMEDOIDS, TABLE_DIVISIVE] {
            for u in 0..8 {
                for v in 0..8 {
                    assert_eq!(t[u][v], t[v][u]);
                }
            }
        }
        let asym = (0..8)
            .filter(|&v| TABLE_DBSCAN[TABLE_DBSCAN_ERRATUM_ROW][v] != TABLE_DBSCAN[v][TABLE_DBSCAN_ERRATUM_ROW])
            .count();
        assert!(asym > 0);
    }
}
