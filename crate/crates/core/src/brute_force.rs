//! The brute-force primitive BF(Q, X) and its subset form BF(q, X[L]).
//!
//! A call has two phases. The distance phase fills a block of the |Q|×|X|
//! distance matrix one tile at a time; the comparison phase reduces each
//! query row to its k smallest `(distance, id)` pairs. Per-tile partial
//! results are combined with [`merge_neighbor_lists`] in a parallel tree
//! reduction. Because candidates are totally ordered by distance and then
//! id, the result does not depend on tiling, worker count or reduction
//! order.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::dataset::DataMatrix;
use crate::error::{RbcError, Result};
use crate::metric::MetricSpec;

/// Default tile: 256 queries × 1024 database points.
pub const DEFAULT_TILE: TileShape = TileShape {
    queries: 256,
    points: 1024,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileShape {
    pub queries: usize,
    pub points: usize,
}

/// k nearest neighbors of one query, ascending by distance then id.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub query: usize,
    pub ids: Vec<u32>,
    pub dists: Vec<f32>,
}

impl NeighborList {
    pub fn k(&self) -> usize {
        self.ids.len()
    }

    pub(crate) fn from_pairs(query: usize, pairs: Vec<(f32, u32)>) -> Self {
        let (dists, ids) = pairs.into_iter().unzip();
        Self { query, ids, dists }
    }

    fn pairs(&self) -> impl Iterator<Item = (f32, u32)> + '_ {
        self.dists.iter().copied().zip(self.ids.iter().copied())
    }

    /// Same neighbors, truncated to the first `k`.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.k());
        Self {
            query: self.query,
            ids: self.ids[..k].to_vec(),
            dists: self.dists[..k].to_vec(),
        }
    }
}

/// Result of a batched brute-force call with its work count.
#[derive(Debug, Clone, PartialEq)]
pub struct BfOutput {
    pub lists: Vec<NeighborList>,
    pub evals: u64,
}

#[inline]
pub(crate) fn cmp_pair(a: &(f32, u32), b: &(f32, u32)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Keeps the `k` smallest pairs of `v`, sorted.
pub(crate) fn top_k(mut v: Vec<(f32, u32)>, k: usize) -> Vec<(f32, u32)> {
    if v.len() > k {
        v.select_nth_unstable_by(k - 1, cmp_pair);
        v.truncate(k);
    }
    v.sort_unstable_by(cmp_pair);
    v
}

fn merge_pairs(a: &[(f32, u32)], b: &[(f32, u32)], k: usize) -> Vec<(f32, u32)> {
    let mut out = Vec::with_capacity(k.min(a.len() + b.len()));
    let (mut i, mut j) = (0, 0);
    while out.len() < k && (i < a.len() || j < b.len()) {
        let next = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => match cmp_pair(x, y) {
                Ordering::Less => {
                    i += 1;
                    *x
                }
                Ordering::Greater => {
                    j += 1;
                    *y
                }
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                    *x
                }
            },
            (Some(x), None) => {
                i += 1;
                *x
            }
            (None, Some(y)) => {
                j += 1;
                *y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

/// Merges two sorted neighbor lists of the same query, keeping the `k`
/// best. Entries present in both (same id and distance) are kept once.
pub fn merge_neighbor_lists(a: &NeighborList, b: &NeighborList, k: usize) -> NeighborList {
    let a_pairs: Vec<_> = a.pairs().collect();
    let b_pairs: Vec<_> = b.pairs().collect();
    NeighborList::from_pairs(a.query, merge_pairs(&a_pairs, &b_pairs, k))
}

fn check_dims(q: &DataMatrix, x: &DataMatrix, m: &MetricSpec) -> Result<()> {
    if q.d() != m.dim || x.d() != m.dim {
        return Err(RbcError::invalid(format!(
            "dimension mismatch: metric d={}, queries d={}, database d={}",
            m.dim,
            q.d(),
            x.d()
        )));
    }
    Ok(())
}

/// Exact k-NN of every row of `queries` over all of `data`.
pub fn bf_search(queries: &DataMatrix, data: &DataMatrix, m: &MetricSpec, k: usize) -> Result<BfOutput> {
    bf_search_tiled(queries, data, m, k, DEFAULT_TILE)
}

/// [`bf_search`] with an explicit tile shape.
pub fn bf_search_tiled(
    queries: &DataMatrix,
    data: &DataMatrix,
    m: &MetricSpec,
    k: usize,
    tile: TileShape,
) -> Result<BfOutput> {
    check_dims(queries, data, m)?;
    if k == 0 || k > data.n() {
        return Err(RbcError::invalid(format!("k must be in 1..={}, got {k}", data.n())));
    }
    if tile.queries == 0 || tile.points == 0 {
        return Err(RbcError::invalid("tile dimensions must be positive"));
    }
    let nq = queries.n();
    let n = data.n();
    let q_tiles: Vec<usize> = (0..nq).step_by(tile.queries).collect();
    let x_tiles: Vec<usize> = (0..n).step_by(tile.points).collect();

    let lists: Vec<NeighborList> = q_tiles
        .par_iter()
        .flat_map_iter(|&q0| {
            let q1 = (q0 + tile.queries).min(nq);
            let partial = x_tiles
                .par_iter()
                .map(|&x0| {
                    let x1 = (x0 + tile.points).min(n);
                    reduce_tile(queries, data, m, k, q0..q1, x0..x1)
                })
                .reduce_with(|a, b| {
                    a.iter()
                        .zip(&b)
                        .map(|(pa, pb)| merge_pairs(pa, pb, k))
                        .collect()
                })
                .unwrap_or_default();
            partial
                .into_iter()
                .enumerate()
                .map(move |(i, pairs)| NeighborList::from_pairs(q0 + i, pairs))
        })
        .collect();

    Ok(BfOutput {
        lists,
        evals: (nq as u64) * (n as u64),
    })
}

/// Distance block for one tile, then per-row top-k.
fn reduce_tile(
    queries: &DataMatrix,
    data: &DataMatrix,
    m: &MetricSpec,
    k: usize,
    qs: std::ops::Range<usize>,
    xs: std::ops::Range<usize>,
) -> Vec<Vec<(f32, u32)>> {
    let width = xs.len();
    let mut block = vec![0.0f32; qs.len() * width];
    for (qi, row) in qs.clone().zip(block.chunks_exact_mut(width)) {
        let q = queries.row(qi);
        for (xi, slot) in xs.clone().zip(row.iter_mut()) {
            *slot = m.dist(q, data.row(xi));
        }
    }
    block
        .chunks_exact(width)
        .map(|row| {
            let pairs = row.iter().zip(xs.clone()).map(|(&dist, id)| (dist, id as u32));
            if k <= SMALL_K {
                small_top_k(pairs, k)
            } else {
                top_k(pairs.collect(), k)
            }
        })
        .collect()
}

const SMALL_K: usize = 16;

/// Insertion-based top-k for small `k`; same result as [`top_k`].
fn small_top_k(pairs: impl Iterator<Item = (f32, u32)>, k: usize) -> Vec<(f32, u32)> {
    let mut best: Vec<(f32, u32)> = Vec::with_capacity(k + 1);
    for p in pairs {
        if best.len() == k && cmp_pair(&p, &best[k - 1]) != Ordering::Less {
            continue;
        }
        let pos = best.partition_point(|b| cmp_pair(b, &p) == Ordering::Less);
        best.insert(pos, p);
        best.truncate(k);
    }
    best
}

/// Exact k-NN of `q` restricted to the points listed in `ids`. Reported ids
/// are global row ids of `data`.
pub fn bf_search_subset(
    q: &[f32],
    data: &DataMatrix,
    ids: &[u32],
    m: &MetricSpec,
    k: usize,
) -> Result<(NeighborList, u64)> {
    if q.len() != m.dim || data.d() != m.dim {
        return Err(RbcError::invalid(format!(
            "dimension mismatch: metric d={}, query d={}, database d={}",
            m.dim,
            q.len(),
            data.d()
        )));
    }
    if ids.is_empty() {
        return Err(RbcError::invalid("empty id list"));
    }
    if k == 0 || k > ids.len() {
        return Err(RbcError::invalid(format!("k must be in 1..={}, got {k}", ids.len())));
    }
    let mut seen = vec![false; data.n()];
    for &id in ids {
        let slot = seen
            .get_mut(id as usize)
            .ok_or_else(|| RbcError::invalid(format!("id {id} out of range (n={})", data.n())))?;
        if std::mem::replace(slot, true) {
            return Err(RbcError::invalid(format!("duplicate id {id} in list")));
        }
    }
    let pairs = scan_ids(q, data, ids.iter().copied(), m, k);
    Ok((NeighborList::from_pairs(0, pairs), ids.len() as u64))
}

/// Unchecked subset scan used on validated hot paths.
pub(crate) fn scan_ids(
    q: &[f32],
    data: &DataMatrix,
    ids: impl Iterator<Item = u32>,
    m: &MetricSpec,
    k: usize,
) -> Vec<(f32, u32)> {
    let pairs = ids.map(|id| (m.dist(q, data.row(id as usize)), id));
    if k <= SMALL_K {
        small_top_k(pairs, k)
    } else {
        top_k(pairs.collect(), k)
    }
}

/// Unchecked scan over `(coordinates, id)` pairs.
pub(crate) fn scan_rows<'a>(
    q: &[f32],
    rows: impl Iterator<Item = (&'a [f32], u32)>,
    m: &MetricSpec,
    k: usize,
) -> Vec<(f32, u32)> {
    let pairs = rows.map(|(x, id)| (m.dist(q, x), id));
    if k <= SMALL_K {
        small_top_k(pairs, k)
    } else {
        top_k(pairs.collect(), k)
    }
}

/// Distances from `q` to every row of `data`, in row order.
pub fn distance_row(q: &[f32], data: &DataMatrix, m: &MetricSpec) -> Vec<f32> {
    data.rows().map(|x| m.dist(q, x)).collect()
}
