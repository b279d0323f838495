//! The Random Ball Cover index in its two variants.
//!
//! Both variants pick a random subset `R` of the database as
//! representatives. The exact variant assigns every point to its nearest
//! representative (a disjoint partition, one `BF(X, R)` call); the one-shot
//! variant gives each representative the `s` points nearest to it (lists
//! overlap, one `BF(R, X)` call).

mod io;
mod params;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brute_force::bf_search;
use crate::dataset::DataMatrix;
use crate::error::{RbcError, Result};
use crate::metric::MetricSpec;

pub use io::{load_index, read_index, save_index, write_index, INDEX_MAGIC, INDEX_VERSION};
pub use params::{one_shot_params, standard_params_exact};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingMode {
    /// Each point joins `R` independently with probability `n_r / n`.
    Bernoulli,
    /// Exactly `n_r` points, uniformly without replacement.
    FixedCount,
}

impl SamplingMode {
    pub fn code(self) -> u32 {
        match self {
            SamplingMode::Bernoulli => 0,
            SamplingMode::FixedCount => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(SamplingMode::Bernoulli),
            1 => Some(SamplingMode::FixedCount),
            _ => None,
        }
    }
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingMode::Bernoulli => "bernoulli",
            SamplingMode::FixedCount => "fixed",
        })
    }
}

impl FromStr for SamplingMode {
    type Err = RbcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bernoulli" => Ok(SamplingMode::Bernoulli),
            "fixed" | "fixed-count" => Ok(SamplingMode::FixedCount),
            other => Err(RbcError::invalid(format!("unknown sampling mode '{other}'"))),
        }
    }
}

/// The representative set `R`, sorted ascending by point id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepSet {
    pub ids: Vec<u32>,
    pub mode: SamplingMode,
    pub seed: u64,
    /// Requested (expected, for Bernoulli) size.
    pub n_r: usize,
}

impl RepSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Wraps an explicit id list, e.g. to pin `R` in tests.
    pub fn from_ids(mut ids: Vec<u32>, n: usize) -> Result<Self> {
        ids.sort_unstable();
        ids.dedup();
        if ids.is_empty() || ids.last().is_some_and(|&l| l as usize >= n) {
            return Err(RbcError::invalid(format!(
                "representative ids must be non-empty and below n={n}"
            )));
        }
        let n_r = ids.len();
        Ok(Self {
            ids,
            mode: SamplingMode::FixedCount,
            seed: 0,
            n_r,
        })
    }
}

/// Draws the representative set. A Bernoulli draw that comes out empty is
/// retried once with `seed + 1`.
pub fn sample_representatives(n: usize, n_r: usize, seed: u64, mode: SamplingMode) -> Result<RepSet> {
    if n_r == 0 || n_r > n {
        return Err(RbcError::invalid(format!("n_r must be in 1..={n}, got {n_r}")));
    }
    let ids = match mode {
        SamplingMode::Bernoulli => {
            let p = n_r as f64 / n as f64;
            let draw = |seed: u64| -> Vec<u32> {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n as u32).filter(|_| rng.random::<f64>() < p).collect()
            };
            let ids = draw(seed);
            if !ids.is_empty() {
                ids
            } else {
                let retry = draw(seed.wrapping_add(1));
                if retry.is_empty() {
                    return Err(RbcError::invalid(format!(
                        "bernoulli sampling with p={p} produced no representatives twice"
                    )));
                }
                retry
            }
        }
        SamplingMode::FixedCount => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ids: Vec<u32> = index::sample(&mut rng, n, n_r).into_iter().map(|i| i as u32).collect();
            ids.sort_unstable();
            ids
        }
    };
    Ok(RepSet { ids, mode, seed, n_r })
}

/// How to draw `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildParams {
    pub n_r: usize,
    pub seed: u64,
    pub mode: SamplingMode,
}

impl BuildParams {
    /// Bernoulli sampling with the given expected size.
    pub fn new(n_r: usize, seed: u64) -> Self {
        Self {
            n_r,
            seed,
            mode: SamplingMode::Bernoulli,
        }
    }

    pub fn with_mode(mut self, mode: SamplingMode) -> Self {
        self.mode = mode;
        self
    }
}

fn check_metric(data: &DataMatrix, metric: &MetricSpec) -> Result<()> {
    if data.d() != metric.dim {
        return Err(RbcError::invalid(format!(
            "metric dimension {} does not match data dimension {}",
            metric.dim,
            data.d()
        )));
    }
    Ok(())
}

/// Exact-search index: a disjoint partition of `X` into ownership lists.
///
/// Lists are stored back to back. List `j` belongs to representative
/// `reps.ids[j]` and holds `(point id, distance to representative)` sorted
/// ascending by distance, then id.
#[derive(Debug, Clone, PartialEq)]
pub struct RbcExactIndex {
    pub(crate) data: Arc<DataMatrix>,
    pub(crate) metric: MetricSpec,
    pub(crate) reps: RepSet,
    pub(crate) rep_points: DataMatrix,
    /// Rows of `data` laid out in list order, so list scans are contiguous.
    pub(crate) list_points: DataMatrix,
    pub(crate) offsets: Vec<u32>,
    pub(crate) members: Vec<u32>,
    pub(crate) member_dists: Vec<f32>,
    pub(crate) radii: Vec<f32>,
}

/// One-shot index: each representative owns its `s` nearest points.
#[derive(Debug, Clone, PartialEq)]
pub struct RbcOneShotIndex {
    pub(crate) data: Arc<DataMatrix>,
    pub(crate) metric: MetricSpec,
    pub(crate) reps: RepSet,
    pub(crate) rep_points: DataMatrix,
    pub(crate) s: usize,
    pub(crate) members: Vec<u32>,
    /// Distance to the farthest list member. Diagnostic only.
    pub(crate) radii: Vec<f32>,
}

pub fn build_exact(data: impl Into<Arc<DataMatrix>>, metric: MetricSpec, params: &BuildParams) -> Result<RbcExactIndex> {
    let data = data.into();
    check_metric(&data, &metric)?;
    let reps = sample_representatives(data.n(), params.n_r, params.seed, params.mode)?;
    build_exact_with_reps(data, metric, reps)
}

/// Builds the exact index around a given representative set.
pub fn build_exact_with_reps(
    data: impl Into<Arc<DataMatrix>>,
    metric: MetricSpec,
    reps: RepSet,
) -> Result<RbcExactIndex> {
    let data = data.into();
    check_metric(&data, &metric)?;
    let rep_points = data.select_rows(&reps.ids)?;
    // nearest representative of every point; R is sorted so the lowest
    // local index is also the lowest global id on ties
    let nearest = bf_search(&data, &rep_points, &metric, 1)?;
    let mut owners: Vec<(u32, f32)> = nearest.lists.iter().map(|nl| (nl.ids[0], nl.dists[0])).collect();
    // a representative owns itself even when a duplicate point with a
    // lower id is also a representative
    for (j, &rep) in reps.ids.iter().enumerate() {
        owners[rep as usize] = (j as u32, 0.0);
    }

    let nr = reps.len();
    let mut counts = vec![0u32; nr + 1];
    for &(j, _) in &owners {
        counts[j as usize + 1] += 1;
    }
    for j in 0..nr {
        counts[j + 1] += counts[j];
    }
    let offsets = counts;
    let mut cursor = offsets.clone();
    let mut pairs = vec![(0.0f32, 0u32); data.n()];
    for (point, &(j, dist)) in owners.iter().enumerate() {
        let j = j as usize;
        pairs[cursor[j] as usize] = (dist, point as u32);
        cursor[j] += 1;
    }
    let mut radii = Vec::with_capacity(nr);
    for j in 0..nr {
        let list = &mut pairs[offsets[j] as usize..offsets[j + 1] as usize];
        list.sort_unstable_by(crate::brute_force::cmp_pair);
        radii.push(list.last().map_or(0.0, |p| p.0));
    }
    let (member_dists, members): (Vec<f32>, Vec<u32>) = pairs.into_iter().unzip();
    let list_points = data.select_rows(&members)?;
    let index = RbcExactIndex {
        data,
        metric,
        reps,
        rep_points,
        list_points,
        offsets,
        members,
        member_dists,
        radii,
    };
    Ok(index)
}

pub fn build_one_shot(
    data: impl Into<Arc<DataMatrix>>,
    metric: MetricSpec,
    params: &BuildParams,
    s: usize,
) -> Result<RbcOneShotIndex> {
    let data = data.into();
    check_metric(&data, &metric)?;
    check_s(s, data.n())?;
    let reps = sample_representatives(data.n(), params.n_r, params.seed, params.mode)?;
    build_one_shot_with_reps(data, metric, reps, s)
}

fn check_s(s: usize, n: usize) -> Result<()> {
    if s == 0 || s > n {
        return Err(RbcError::invalid(format!("list size s must be in 1..={n}, got {s}")));
    }
    Ok(())
}

pub fn build_one_shot_with_reps(
    data: impl Into<Arc<DataMatrix>>,
    metric: MetricSpec,
    reps: RepSet,
    s: usize,
) -> Result<RbcOneShotIndex> {
    let data = data.into();
    check_metric(&data, &metric)?;
    check_s(s, data.n())?;
    let rep_points = data.select_rows(&reps.ids)?;
    let lists = bf_search(&rep_points, &data, &metric, s)?;
    let mut members = Vec::with_capacity(reps.len() * s);
    let mut radii = Vec::with_capacity(reps.len());
    for nl in lists.lists {
        radii.push(*nl.dists.last().expect("s >= 1"));
        members.extend(nl.ids);
    }
    Ok(RbcOneShotIndex {
        data,
        metric,
        reps,
        rep_points,
        s,
        members,
        radii,
    })
}

impl RbcExactIndex {
    pub fn data(&self) -> &DataMatrix {
        &self.data
    }

    pub fn data_arc(&self) -> &Arc<DataMatrix> {
        &self.data
    }

    pub fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    pub fn reps(&self) -> &RepSet {
        &self.reps
    }

    pub fn rep_points(&self) -> &DataMatrix {
        &self.rep_points
    }

    pub fn num_reps(&self) -> usize {
        self.reps.len()
    }

    /// Ownership list `j` as parallel slices of ids and distances to the
    /// representative.
    pub fn list(&self, j: usize) -> (&[u32], &[f32]) {
        let (a, b) = (self.offsets[j] as usize, self.offsets[j + 1] as usize);
        (&self.members[a..b], &self.member_dists[a..b])
    }

    /// Coordinates of the members of list `j`, in list order.
    pub(crate) fn list_rows(&self, j: usize) -> impl Iterator<Item = &[f32]> + '_ {
        let (a, b) = (self.offsets[j] as usize, self.offsets[j + 1] as usize);
        self.list_points.values()[a * self.data.d()..b * self.data.d()].chunks_exact(self.data.d())
    }

    pub fn radii(&self) -> &[f32] {
        &self.radii
    }

    pub fn list_lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.offsets.windows(2).map(|w| (w[1] - w[0]) as usize)
    }

    /// Distance evaluations spent building: one per (point, representative).
    pub fn build_evals(&self) -> u64 {
        self.data.n() as u64 * self.reps.len() as u64
    }

    /// Local representative index owning each point.
    pub fn owner_map(&self) -> Vec<u32> {
        let mut owner = vec![0u32; self.data.n()];
        for j in 0..self.num_reps() {
            for &id in self.list(j).0 {
                owner[id as usize] = j as u32;
            }
        }
        owner
    }

    /// Structural and metric checks of every stored invariant. The
    /// nearest-representative property is checked on `sample` points only
    /// (it costs |R| distances per point).
    pub fn check_invariants(&self, sample: &[u32]) -> Result<()> {
        let bad = |msg: String| Err(RbcError::Invariant(msg));
        let n = self.data.n();
        let nr = self.num_reps();
        if self.offsets.len() != nr + 1 || self.offsets[nr] as usize != n || self.radii.len() != nr {
            return bad("list table shape".into());
        }
        let mut seen = vec![false; n];
        for j in 0..nr {
            let (ids, dists) = self.list(j);
            let rep = self.reps.ids[j];
            if !ids.iter().zip(dists).any(|(&id, &d)| id == rep && d == 0.0) {
                return bad(format!("representative {rep} is missing from its own list"));
            }
            for (w, iw) in dists.windows(2).zip(ids.windows(2)) {
                if w[0] > w[1] || (w[0] == w[1] && iw[0] > iw[1]) {
                    return bad(format!("list {j} not sorted"));
                }
            }
            if self.radii[j] != *dists.last().unwrap() {
                return bad(format!("radius of list {j} is not its maximum"));
            }
            for (&id, &dist) in ids.iter().zip(dists) {
                let slot = seen
                    .get_mut(id as usize)
                    .ok_or_else(|| RbcError::Invariant(format!("id {id} out of range")))?;
                if std::mem::replace(slot, true) {
                    return bad(format!("point {id} owned twice"));
                }
                if self.metric.dist(self.data.row(id as usize), self.rep_points.row(j)) != dist {
                    return bad(format!("stored distance of point {id} is stale"));
                }
            }
        }
        if !seen.iter().all(|&s| s) {
            return bad("lists do not cover every point".into());
        }
        let owner = self.owner_map();
        for &id in sample {
            let x = self.data.row(id as usize);
            let own = owner[id as usize] as usize;
            let own_d = self.metric.dist(x, self.rep_points.row(own));
            for j in 0..nr {
                let d = self.metric.dist(x, self.rep_points.row(j));
                if d < own_d || (d == own_d && j < own) {
                    return bad(format!("point {id} is not owned by its nearest representative"));
                }
            }
        }
        Ok(())
    }
}

impl RbcOneShotIndex {
    pub fn data(&self) -> &DataMatrix {
        &self.data
    }

    pub fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    pub fn reps(&self) -> &RepSet {
        &self.reps
    }

    pub fn rep_points(&self) -> &DataMatrix {
        &self.rep_points
    }

    pub fn num_reps(&self) -> usize {
        self.reps.len()
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// The `s` ids nearest to representative `j`, ascending by distance.
    pub fn list(&self, j: usize) -> &[u32] {
        &self.members[j * self.s..(j + 1) * self.s]
    }

    pub fn radii(&self) -> &[f32] {
        &self.radii
    }

    pub fn build_evals(&self) -> u64 {
        self.data.n() as u64 * self.reps.len() as u64
    }
}

/// Either index variant, as stored in an index file.
#[derive(Debug, Clone, PartialEq)]
pub enum RbcIndex {
    Exact(RbcExactIndex),
    OneShot(RbcOneShotIndex),
}

impl RbcIndex {
    pub fn data(&self) -> &DataMatrix {
        match self {
            RbcIndex::Exact(i) => i.data(),
            RbcIndex::OneShot(i) => i.data(),
        }
    }

    pub fn metric(&self) -> &MetricSpec {
        match self {
            RbcIndex::Exact(i) => i.metric(),
            RbcIndex::OneShot(i) => i.metric(),
        }
    }

    pub fn reps(&self) -> &RepSet {
        match self {
            RbcIndex::Exact(i) => i.reps(),
            RbcIndex::OneShot(i) => i.reps(),
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            RbcIndex::Exact(_) => "exact",
            RbcIndex::OneShot(_) => "oneshot",
        }
    }
}
