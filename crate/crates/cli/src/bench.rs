//! Parameter sweeps against a brute-force baseline.

use std::time::Instant;

use serde::Serialize;

use rbc_core::eval::rank_error;
use rbc_core::rbc::{build_exact, build_one_shot, one_shot_params, standard_params_exact};
use rbc_core::search::{exact_query_batch, one_shot_query_batch};
use rbc_core::{bf_search, BuildParams, DataMatrix, MetricSpec, NeighborList, RbcError, SamplingMode};

use crate::commands::{csv_err, csv_writer, load, metric_for, print_config};
use crate::{BenchArgs, Variant};

type Result<T> = std::result::Result<T, RbcError>;

/// One cell of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub queries: usize,
    pub variant: &'static str,
    pub nr: Option<usize>,
    pub s: Option<usize>,
    pub k: usize,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub build_evals: Option<u64>,
    pub build_secs: Option<f64>,
    pub query_secs: Option<f64>,
    pub evals_mean: Option<f64>,
    pub evals_median: Option<f64>,
    /// Brute-force distance evaluations over this cell's.
    pub speedup_evals: Option<f64>,
    /// Brute-force query wall time over this cell's.
    pub speedup_wall: Option<f64>,
    pub mean_rank: Option<f64>,
    /// Fraction of queries whose first result is not a true nearest neighbor.
    pub failure_rate: Option<f64>,
    pub error: String,
}

/// Resolves a grid entry against `n`: a plain count, or `<f>x` for
/// `⌈f·⌈√n⌉⌉`.
pub fn parse_grid(spec: &str, n: usize) -> Result<usize> {
    let spec = spec.trim();
    let bad = || RbcError::InvalidArgument(format!("bad grid value `{spec}`"));
    let v = match spec.strip_suffix('x') {
        Some(f) => {
            let f: f64 = f.parse().map_err(|_| bad())?;
            if !(f.is_finite() && f > 0.0) {
                return Err(bad());
            }
            let root = (n as f64).sqrt().ceil();
            (f * root).ceil() as usize
        }
        None => spec.parse().map_err(|_| bad())?,
    };
    if v == 0 {
        return Err(bad());
    }
    Ok(v)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

struct Baseline {
    lists: Vec<NeighborList>,
    evals_mean: f64,
    secs: f64,
}

struct Cell {
    variant: Variant,
    nr: usize,
    s: Option<usize>,
    seed: u64,
}

struct Outcome {
    reps: usize,
    build_evals: u64,
    build_secs: f64,
    query_secs: f64,
    results: Vec<NeighborList>,
    evals: Vec<f64>,
}

fn run_cell(x: &DataMatrix, q: &DataMatrix, m: MetricSpec, k: usize, mode: SamplingMode, cell: &Cell) -> Result<Outcome> {
    let params = BuildParams::new(cell.nr, cell.seed).with_mode(mode);
    let t = Instant::now();
    match cell.s {
        None => {
            let idx = build_exact(x.clone(), m, &params)?;
            let build_secs = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let out = exact_query_batch(&idx, q, k)?;
            let query_secs = t.elapsed().as_secs_f64();
            let evals = out.iter().map(|(_, st)| st.total_evals() as f64).collect();
            Ok(Outcome {
                reps: idx.num_reps(),
                build_evals: idx.build_evals(),
                build_secs,
                query_secs,
                results: out.into_iter().map(|(nl, _)| nl).collect(),
                evals,
            })
        }
        Some(s) => {
            let idx = build_one_shot(x.clone(), m, &params, s)?;
            let build_secs = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let out = one_shot_query_batch(&idx, q, k)?;
            let query_secs = t.elapsed().as_secs_f64();
            let evals = out.iter().map(|(_, st)| st.total_evals() as f64).collect();
            Ok(Outcome {
                reps: idx.num_reps(),
                build_evals: idx.build_evals(),
                build_secs,
                query_secs,
                results: out.into_iter().map(|(nl, _)| nl).collect(),
                evals,
            })
        }
    }
}

/// Rank error of every first result; a full scan is needed only when the
/// returned distance differs from the true nearest-neighbor distance.
fn ranks(x: &DataMatrix, q: &DataMatrix, m: &MetricSpec, base: &Baseline, results: &[NeighborList]) -> Result<Vec<usize>> {
    results
        .iter()
        .zip(&base.lists)
        .enumerate()
        .map(|(i, (got, truth))| {
            if got.dists[0] == truth.dists[0] {
                Ok(0)
            } else {
                rank_error(x, q.row(i), got.ids[0], m)
            }
        })
        .collect()
}

pub fn run(a: BenchArgs) -> Result<()> {
    let x = load(&a.data)?;
    let q = load(&a.queries)?;
    let n = x.n();
    if q.d() != x.d() {
        return Err(RbcError::Data(format!("queries have d={}, data has d={}", q.d(), x.d())));
    }
    let m = metric_for(a.metric.into(), &x)?;
    let mode: SamplingMode = a.mode.into();
    if a.k == 0 || a.k > n {
        return Err(RbcError::InvalidArgument(format!("k must be in 1..={n}, got {}", a.k)));
    }
    if a.seed.is_empty() {
        return Err(RbcError::InvalidArgument("at least one seed is required".into()));
    }

    let nr_grid = a.nr.iter().map(|v| parse_grid(v, n)).collect::<Result<Vec<_>>>()?;
    let s_grid = a.s.iter().map(|v| parse_grid(v, n)).collect::<Result<Vec<_>>>()?;
    let mut variants = a.variant.clone();
    variants.sort_unstable();
    variants.dedup();
    variants.retain(|&v| v != Variant::Brute);

    let mut cells = Vec::new();
    for &v in &variants {
        match v {
            Variant::Exact => {
                let nrs = if nr_grid.is_empty() { vec![standard_params_exact(n, 1.0)?] } else { nr_grid.clone() };
                for &nr in &nrs {
                    for &seed in &a.seed {
                        cells.push(Cell { variant: v, nr, s: None, seed });
                    }
                }
            }
            Variant::Oneshot => {
                let ss = if s_grid.is_empty() { vec![one_shot_params(n, 1.0, a.delta)?.1] } else { s_grid.clone() };
                for &s in &ss {
                    let nrs = if nr_grid.is_empty() { vec![s] } else { nr_grid.clone() };
                    for &nr in &nrs {
                        for &seed in &a.seed {
                            cells.push(Cell { variant: v, nr, s: Some(s), seed });
                        }
                    }
                }
            }
            Variant::Brute => unreachable!(),
        }
    }

    let join = |v: &[String]| if v.is_empty() { "default".to_string() } else { v.join(",") };
    print_config(
        "bench",
        &[
            ("data", a.data.display().to_string()),
            ("n", n.to_string()),
            ("d", x.d().to_string()),
            ("queries", a.queries.display().to_string()),
            ("num_queries", q.n().to_string()),
            ("variant", variants.iter().map(|v| crate::variant_name(*v)).collect::<Vec<_>>().join(",")),
            ("nr", join(&a.nr)),
            ("s", join(&a.s)),
            ("k", a.k.to_string()),
            ("seed", a.seed.iter().map(u64::to_string).collect::<Vec<_>>().join(",")),
            ("metric", m.kind.to_string()),
            ("mode", mode.to_string()),
            ("delta", a.delta.to_string()),
            ("cells", cells.len().to_string()),
            ("out", a.out.as_ref().map_or_else(|| "-".to_string(), |p| p.display().to_string())),
        ],
    );

    let t = Instant::now();
    let bf = bf_search(&q, &x, &m, a.k)?;
    let base = Baseline {
        evals_mean: bf.evals as f64 / q.n() as f64,
        secs: t.elapsed().as_secs_f64(),
        lists: bf.lists,
    };

    let dataset = a.data.display().to_string();
    let blank = |variant: &'static str| BenchRow {
        dataset: dataset.clone(),
        n,
        d: x.d(),
        queries: q.n(),
        variant,
        nr: None,
        s: None,
        k: a.k,
        seed: None,
        reps: None,
        build_evals: None,
        build_secs: None,
        query_secs: None,
        evals_mean: None,
        evals_median: None,
        speedup_evals: None,
        speedup_wall: None,
        mean_rank: None,
        failure_rate: None,
        error: String::new(),
    };

    let mut w = csv_writer(a.out.as_deref())?;
    w.serialize(BenchRow {
        build_evals: Some(0),
        build_secs: Some(0.0),
        query_secs: Some(base.secs),
        evals_mean: Some(base.evals_mean),
        evals_median: Some(base.evals_mean),
        speedup_evals: Some(1.0),
        speedup_wall: Some(1.0),
        mean_rank: Some(0.0),
        failure_rate: Some(0.0),
        ..blank("brute")
    })
    .map_err(csv_err)?;

    for cell in &cells {
        let mut row = BenchRow {
            nr: Some(cell.nr),
            s: cell.s,
            seed: Some(cell.seed),
            ..blank(crate::variant_name(cell.variant))
        };
        let outcome = run_cell(&x, &q, m, a.k, mode, cell)
            .and_then(|o| ranks(&x, &q, &m, &base, &o.results).map(|r| (o, r)));
        match outcome {
            Ok((mut o, r)) => {
                let evals_mean = o.evals.iter().sum::<f64>() / o.evals.len() as f64;
                row.reps = Some(o.reps);
                row.build_evals = Some(o.build_evals);
                row.build_secs = Some(o.build_secs);
                row.query_secs = Some(o.query_secs);
                row.evals_mean = Some(evals_mean);
                row.evals_median = Some(median(&mut o.evals));
                row.speedup_evals = Some(base.evals_mean / evals_mean);
                row.speedup_wall = Some(base.secs / o.query_secs.max(1e-9));
                row.mean_rank = Some(r.iter().sum::<usize>() as f64 / r.len() as f64);
                row.failure_rate = Some(r.iter().filter(|&&v| v > 0).count() as f64 / r.len() as f64);
            }
            Err(e) => {
                eprintln!("# cell {} nr={} s={:?} seed={} failed: {e}", row.variant, cell.nr, cell.s, cell.seed);
                row.error = e.to_string();
            }
        }
        w.serialize(row).map_err(csv_err)?;
        w.flush()?;
    }
    w.flush()?;
    Ok(())
}
