//! Outlier-aware user-based collaborative filtering.
//!
//! Four clusterings of the user population (k-means, k-medoids, DBSCAN and
//! divisive splitting) are fused into an integer co-association matrix. Users
//! that no clustering assigns are global outliers; users that keep landing
//! in tiny clusters are local outliers. The normalized matrix then serves as
//! the neighbor weighting of a user-based k-NN recommender from which the
//! outliers are excluded, and the result is scored with MAE, precision,
//! recall and F-measure.
//!
//! ```
//! use cfoutlier::{ensemble, fixtures};
//!
//! let partitions = fixtures::published_partitions();
//! let s = ensemble::accumulate(&partitions).unwrap();
//! assert_eq!(s.get(0, 1), 3);
//!
//! let report = ensemble::detect_outliers(
//!     &partitions,
//!     &fixtures::TOY_USER_IDS,
//!     &ensemble::EnsembleParams::default(),
//! )
//! .unwrap();
//! assert_eq!(report.status(6), ensemble::OutlierStatus::GlobalOutlier);
//! ```

pub mod clustering;
pub mod distance;
pub mod ensemble;
mod error;
pub mod evaluate;
pub mod fixtures;
pub mod ingest;
pub mod pipeline;
pub mod recommend;
pub mod seed;

pub use error::{Error, Result};

// The book's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/distance.md")]
    mod distance {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/ensemble.md")]
    mod ensemble {}
    #[doc = include_str!("../../../book/src/recommend.md")]
    mod recommend {}
    #[doc = include_str!("../../../book/src/evaluate.md")]
    mod evaluate {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/toy.md")]
    mod toy {}
    #[doc = include_str!("../../../book/src/attacks.md")]
    mod attacks {}
}
