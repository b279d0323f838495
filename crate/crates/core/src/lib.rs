//! Random Ball Cover (RBC) nearest-neighbor search.
//!
//! Everything heavy flows through a single data-parallel primitive,
//! [`brute_force::bf_search`] and its subset form. The RBC index is built
//! with one brute-force call and each query is answered with two more:
//!
//! * **one-shot** search scans the list of the nearest representative only
//!   and is correct with high probability;
//! * **exact** search prunes representatives with the triangle inequality
//!   and always returns the true k nearest neighbors.
//!
//! ```
//! use rbc_core::{dataset::{gen_synthetic, SyntheticSpec}, metric::{MetricKind, MetricSpec}};
//! use rbc_core::rbc::{build_exact, BuildParams};
//! use rbc_core::search::exact_query;
//!
//! let data = gen_synthetic(SyntheticSpec::UniformCube, 2000, 4, 7).unwrap();
//! let metric = MetricSpec::new(MetricKind::Euclidean, 4).unwrap();
//! let index = build_exact(data.clone(), metric, &BuildParams::new(45, 1)).unwrap();
//! let (hits, _stats) = exact_query(&index, data.row(10), 1).unwrap();
//! assert_eq!(hits.ids, vec![10]);
//! ```

pub mod brute_force;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod metric;
pub mod rbc;
pub mod search;

pub use brute_force::{bf_search, bf_search_subset, merge_neighbor_lists, BfOutput, NeighborList};
pub use dataset::{DataMatrix, MatrixFormat, SyntheticSpec};
pub use error::{RbcError, Result};
pub use metric::{MetricKind, MetricSpec};
pub use rbc::{
    BuildParams, RbcExactIndex, RbcIndex, RbcOneShotIndex, RepSet, SamplingMode,
};
pub use search::{OneShotStats, SearchStats};

/// Runs `f` inside a dedicated rayon pool with `workers` threads.
///
/// `None` or `Some(0)` uses the global pool (all cores).
pub fn with_workers<T, F>(workers: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match workers {
        None | Some(0) => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| RbcError::Invariant(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
