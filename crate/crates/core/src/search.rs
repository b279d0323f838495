//! Query algorithms over a built RBC index.
//!
//! Both algorithms are two brute-force calls. The first computes distances
//! from the query to every representative. One-shot search then scans the
//! list of the nearest representative. Exact search keeps every
//! representative that can still own one of the k nearest neighbors and
//! scans the surviving lists up to the `4·γ_k` cutoff.
//!
//! With `γ_k` the k-th smallest query-to-representative distance
//! (an upper bound on the k-th neighbor distance, since representatives are
//! database points), representative `r` with radius `ψ_r` is pruned when
//!
//! 1. `ρ(q,r) > γ_k + ψ_r`, or
//! 2. `ρ(q,r) > 3·γ_k`.
//!
//! Every bound is widened by [`PRUNE_SLACK`] (relative) so that rounding of
//! the stored `f32` distances can never discard a true neighbor.

use rayon::prelude::*;

use crate::brute_force::{cmp_pair, distance_row, scan_ids, scan_rows, NeighborList};
use crate::dataset::DataMatrix;
use crate::error::{RbcError, Result};
use crate::rbc::{RbcExactIndex, RbcOneShotIndex};

/// Relative widening applied to every pruning bound. Distances carry one
/// `f32` rounding (relative error 2^-24) each, far below this.
pub const PRUNE_SLACK: f64 = 1e-6;

#[inline]
fn widen(bound: f64) -> f64 {
    bound * (1.0 + PRUNE_SLACK)
}

/// Per-query instrumentation of [`exact_query`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SearchStats {
    /// `γ_k`: k-th smallest distance to a representative.
    pub gamma: f32,
    pub reps_total: usize,
    /// Representatives failing inequality (1). Counted independently of (2).
    pub reps_pruned_radius: usize,
    /// Representatives failing inequality (2). Counted independently of (1).
    pub reps_pruned_3gamma: usize,
    pub reps_scanned: usize,
    /// Entries of scanned lists skipped by the `4·γ_k` cutoff.
    pub entries_cut: usize,
    pub candidates_examined: usize,
    pub dists_step1: usize,
}

impl SearchStats {
    pub fn total_evals(&self) -> u64 {
        (self.dists_step1 + self.candidates_examined) as u64
    }
}

/// Per-query instrumentation of [`one_shot_query`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneShotStats {
    /// Global id of the nearest representative.
    pub rep: u32,
    /// Local index of the nearest representative.
    pub rep_index: usize,
    pub gamma: f32,
    /// Radius of the scanned list.
    pub radius: f32,
    pub dists_step1: usize,
    pub candidates_examined: usize,
}

impl OneShotStats {
    pub fn total_evals(&self) -> u64 {
        (self.dists_step1 + self.candidates_examined) as u64
    }
}

/// Outcome of both pruning tests for one representative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PruneDecision {
    pub fails_radius: bool,
    pub fails_3gamma: bool,
}

impl PruneDecision {
    pub fn survives(&self) -> bool {
        !self.fails_radius && !self.fails_3gamma
    }
}

/// Evaluates inequalities (1) and (2) for a representative at distance
/// `rep_dist` with radius `radius`.
#[inline]
pub fn prune_decision(rep_dist: f32, radius: f32, gamma_k: f32) -> PruneDecision {
    let (d, psi, g) = (f64::from(rep_dist), f64::from(radius), f64::from(gamma_k));
    PruneDecision {
        fails_radius: d > widen(g + psi),
        fails_3gamma: d > widen(3.0 * g),
    }
}

/// Local indices of the representatives that survive both tests.
pub fn prune_representatives(rep_dists: &[f32], radii: &[f32], gamma_k: f32) -> Vec<usize> {
    rep_dists
        .iter()
        .zip(radii)
        .enumerate()
        .filter(|(_, (&d, &psi))| prune_decision(d, psi, gamma_k).survives())
        .map(|(j, _)| j)
        .collect()
}

/// Number of leading entries of an ascending list that are `<= threshold`.
pub fn list_cutoff(sorted_rep_dists: &[f32], threshold: f64) -> usize {
    sorted_rep_dists.partition_point(|&d| f64::from(d) <= threshold)
}

/// The `4·γ_k` list cutoff, widened like the pruning bounds.
#[inline]
pub fn cutoff_threshold(gamma_k: f32) -> f64 {
    widen(4.0 * f64::from(gamma_k))
}

fn check_query(q: &[f32], dim: usize) -> Result<()> {
    if q.len() != dim {
        return Err(RbcError::invalid(format!("query has d={}, index has d={dim}", q.len())));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(RbcError::invalid("query has a non-finite coordinate"));
    }
    Ok(())
}

/// k-th smallest `(distance, local index)` among the representatives.
fn kth_rep(rep_dists: &[f32], k: usize) -> (f32, u32) {
    let mut pairs: Vec<(f32, u32)> = rep_dists.iter().copied().zip(0u32..).collect();
    let (_, kth, _) = pairs.select_nth_unstable_by(k - 1, cmp_pair);
    *kth
}

/// Exact k nearest neighbors of `q`.
pub fn exact_query(index: &RbcExactIndex, q: &[f32], k: usize) -> Result<(NeighborList, SearchStats)> {
    check_query(q, index.metric().dim)?;
    let nr = index.num_reps();
    if k == 0 || k > nr {
        return Err(RbcError::invalid(format!(
            "k must be in 1..={nr} (the number of representatives), got {k}"
        )));
    }
    let rep_dists = distance_row(q, index.rep_points(), index.metric());
    let (gamma, _) = kth_rep(&rep_dists, k);
    let threshold = cutoff_threshold(gamma);

    let mut stats = SearchStats {
        gamma,
        reps_total: nr,
        dists_step1: nr,
        ..SearchStats::default()
    };
    let mut scan: Vec<(usize, usize)> = Vec::new();
    for (j, (&d, &psi)) in rep_dists.iter().zip(index.radii()).enumerate() {
        let decision = prune_decision(d, psi, gamma);
        stats.reps_pruned_radius += decision.fails_radius as usize;
        stats.reps_pruned_3gamma += decision.fails_3gamma as usize;
        if !decision.survives() {
            continue;
        }
        stats.reps_scanned += 1;
        let (ids, dists) = index.list(j);
        let keep = list_cutoff(dists, threshold);
        stats.entries_cut += ids.len() - keep;
        stats.candidates_examined += keep;
        scan.push((j, keep));
    }
    if stats.candidates_examined < k {
        return Err(RbcError::Invariant(format!(
            "only {} candidates survived pruning for k={k}",
            stats.candidates_examined
        )));
    }
    // one brute-force call over the union of the surviving list prefixes
    let rows = scan.iter().flat_map(|&(j, keep)| {
        index.list_rows(j).zip(index.list(j).0.iter().copied()).take(keep)
    });
    let pairs = scan_rows(q, rows, index.metric(), k);
    Ok((NeighborList::from_pairs(0, pairs), stats))
}

/// [`exact_query`] for every row of `queries`, in parallel.
pub fn exact_query_batch(
    index: &RbcExactIndex,
    queries: &DataMatrix,
    k: usize,
) -> Result<Vec<(NeighborList, SearchStats)>> {
    (0..queries.n())
        .into_par_iter()
        .map(|i| {
            exact_query(index, queries.row(i), k).map(|(mut nl, st)| {
                nl.query = i;
                (nl, st)
            })
        })
        .collect()
}

/// k nearest neighbors of `q` within the list of its nearest
/// representative. Correct with high probability only.
pub fn one_shot_query(index: &RbcOneShotIndex, q: &[f32], k: usize) -> Result<(NeighborList, OneShotStats)> {
    check_query(q, index.metric().dim)?;
    if k == 0 || k > index.s() {
        return Err(RbcError::invalid(format!(
            "k must be in 1..={} (the list size s), got {k}",
            index.s()
        )));
    }
    let rep_dists = distance_row(q, index.rep_points(), index.metric());
    let (gamma, j) = kth_rep(&rep_dists, 1);
    let j = j as usize;
    let list = index.list(j);
    let pairs = scan_ids(q, index.data(), list.iter().copied(), index.metric(), k);
    let stats = OneShotStats {
        rep: index.reps().ids[j],
        rep_index: j,
        gamma,
        radius: index.radii()[j],
        dists_step1: index.num_reps(),
        candidates_examined: list.len(),
    };
    Ok((NeighborList::from_pairs(0, pairs), stats))
}

pub fn one_shot_query_batch(
    index: &RbcOneShotIndex,
    queries: &DataMatrix,
    k: usize,
) -> Result<Vec<(NeighborList, OneShotStats)>> {
    (0..queries.n())
        .into_par_iter()
        .map(|i| {
            one_shot_query(index, queries.row(i), k).map(|(mut nl, st)| {
                nl.query = i;
                (nl, st)
            })
        })
        .collect()
}

/// All points within `eps` of `q`, ascending by distance then id.
pub fn range_query(index: &RbcExactIndex, q: &[f32], eps: f32) -> Result<Vec<(u32, f32)>> {
    check_query(q, index.metric().dim)?;
    if !eps.is_finite() || eps < 0.0 {
        return Err(RbcError::invalid(format!("radius must be finite and >= 0, got {eps}")));
    }
    let metric = index.metric();
    let e = f64::from(eps);
    let mut hits = Vec::new();
    for (j, (rep, &psi)) in index.rep_points().rows().zip(index.radii()).enumerate() {
        let d_r = metric.dist(q, rep);
        if f64::from(d_r) > widen(e + f64::from(psi)) {
            continue;
        }
        let (ids, dists) = index.list(j);
        let keep = list_cutoff(dists, widen(e + f64::from(d_r)));
        for (&id, row) in ids[..keep].iter().zip(index.list_rows(j)) {
            let d = metric.dist(q, row);
            if d <= eps {
                hits.push((d, id));
            }
        }
    }
    hits.sort_unstable_by(cmp_pair);
    Ok(hits.into_iter().map(|(d, id)| (id, d)).collect())
}

/// Counts of true neighbors that a pruning rule would have excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PruneAudit {
    pub by_radius: usize,
    pub by_3gamma: usize,
    pub by_cutoff: usize,
}

impl PruneAudit {
    pub fn total(&self) -> usize {
        self.by_radius + self.by_3gamma + self.by_cutoff
    }

    pub fn add(&mut self, other: PruneAudit) {
        self.by_radius += other.by_radius;
        self.by_3gamma += other.by_3gamma;
        self.by_cutoff += other.by_cutoff;
    }
}

/// Checks each rule separately against the known true neighbors of `q`:
/// is the owner of a true neighbor rejected by inequality (1), by
/// inequality (2), or does the `4·γ_k` cutoff skip the neighbor's entry?
///
/// `owner` is [`RbcExactIndex::owner_map`].
pub fn audit_exact_query(
    index: &RbcExactIndex,
    owner: &[u32],
    q: &[f32],
    truth: &NeighborList,
) -> Result<PruneAudit> {
    check_query(q, index.metric().dim)?;
    let k = truth.k();
    if k == 0 || k > index.num_reps() {
        return Err(RbcError::invalid("truth list size must be in 1..=|R|"));
    }
    let rep_dists = distance_row(q, index.rep_points(), index.metric());
    let (gamma, _) = kth_rep(&rep_dists, k);
    let threshold = cutoff_threshold(gamma);
    let mut audit = PruneAudit::default();
    for &id in &truth.ids {
        let j = owner[id as usize] as usize;
        let decision = prune_decision(rep_dists[j], index.radii()[j], gamma);
        audit.by_radius += decision.fails_radius as usize;
        audit.by_3gamma += decision.fails_3gamma as usize;
        let (ids, dists) = index.list(j);
        let keep = list_cutoff(dists, threshold);
        audit.by_cutoff += (!ids[..keep].contains(&id)) as usize;
    }
    Ok(audit)
}
