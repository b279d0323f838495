//! Shared workloads for the criterion benchmarks.

use rbc_core::dataset::gen_synthetic;
use rbc_core::{DataMatrix, SyntheticSpec};

/// `n` database points and `nq` held-out queries drawn from one
/// Gaussian-cluster sample in `d` dimensions.
pub fn workload(n: usize, nq: usize, d: usize, seed: u64) -> (DataMatrix, DataMatrix) {
    let spec = SyntheticSpec::GaussianClusters { clusters: 10, sigma: 0.05 };
    let all = gen_synthetic(spec, n + nq, d, seed).expect("synthetic workload");
    all.split_tail(nq).expect("split")
}
