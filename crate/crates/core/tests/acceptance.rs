//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! `RBC_ACCEPT_ONLY=1,4,9` runs a subset.

use std::process::ExitCode;
use std::time::Instant;

use rbc_core::brute_force::{bf_search, NeighborList};
use rbc_core::dataset::{gen_synthetic, DataMatrix, SyntheticSpec};
use rbc_core::eval::{closer_than_rep_counts, estimate_expansion_rate, rank_error};
use rbc_core::metric::{MetricKind, MetricSpec};
use rbc_core::rbc::{build_exact, build_one_shot, one_shot_params, BuildParams};
use rbc_core::search::{audit_exact_query, exact_query_batch, one_shot_query_batch, PruneAudit};
use rbc_core::with_workers;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn sqrt_ceil(n: usize) -> usize {
    (n as f64).sqrt().ceil() as usize
}

/// `n` database points and `nq` held-out queries from the same generator.
fn split(spec: SyntheticSpec, n: usize, nq: usize, d: usize, seed: u64) -> (DataMatrix, DataMatrix) {
    gen_synthetic(spec, n + nq, d, seed).unwrap().split_tail(nq).unwrap()
}

fn l2(d: usize) -> MetricSpec {
    MetricSpec::new(MetricKind::Euclidean, d).unwrap()
}

fn median(mut v: Vec<u64>) -> u64 {
    v.sort_unstable();
    v[v.len() / 2]
}

fn exactness_grid() -> Vec<(&'static str, SyntheticSpec, usize)> {
    let gauss = |clusters, sigma| SyntheticSpec::GaussianClusters { clusters, sigma };
    vec![
        ("uniform d=8", SyntheticSpec::UniformCube, 8),
        ("uniform d=32", SyntheticSpec::UniformCube, 32),
        ("gaussian(10,0.05) d=8", gauss(10, 0.05), 8),
        ("gaussian(10,0.05) d=32", gauss(10, 0.05), 32),
        ("gaussian(50,0.02) d=8", gauss(50, 0.02), 8),
    ]
}

/// Criteria 1 and 2 share one pass over the grid.
fn exactness_and_audit() -> (Outcome, Outcome) {
    let n = 50_000;
    let nq = 2000;
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    let mut audit = PruneAudit::default();
    let start = Instant::now();
    for (di, (name, spec, d)) in exactness_grid().into_iter().enumerate() {
        let (x, q) = split(spec, n, nq, d, 100 + di as u64);
        let m = l2(d);
        let truth5 = bf_search(&q, &x, &m, 5).unwrap();
        let truth1 = bf_search(&q, &x, &m, 1).unwrap();
        for seed in 1..=3u64 {
            let index = build_exact(x.clone(), m, &BuildParams::new(sqrt_ceil(n), seed)).unwrap();
            let owner = index.owner_map();
            for (k, truth) in [(1, &truth1), (5, &truth5)] {
                let got = exact_query_batch(&index, &q, k).unwrap();
                let mut local = 0;
                for ((nl, _), t) in got.iter().zip(&truth.lists) {
                    checked += 1;
                    if nl != t {
                        local += 1;
                    }
                    audit.add(audit_exact_query(&index, &owner, q.row(t.query), t).unwrap());
                }
                mismatches += local;
                if local > 0 {
                    eprintln!("  criterion 1: {name} seed {seed} k={k}: {local} mismatches");
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        outcome(
            mismatches == 0,
            format!("{checked} (dataset, seed, k, query) cases, {mismatches} differ from brute force, {secs:.0}s"),
        ),
        outcome(
            audit.total() == 0,
            format!(
                "true neighbors excluded: by (1) {}, by (2) {}, by 4γ cutoff {}",
                audit.by_radius, audit.by_3gamma, audit.by_cutoff
            ),
        ),
    )
}

fn sublinear_scaling() -> Outcome {
    let d = 8;
    let nq = 1000;
    let mut medians = Vec::new();
    for (i, n) in [16_384usize, 65_536, 262_144].into_iter().enumerate() {
        let (x, q) = split(SyntheticSpec::UniformCube, n, nq, d, 300 + i as u64);
        let index = build_exact(x, l2(d), &BuildParams::new(sqrt_ceil(n), 7)).unwrap();
        let work = exact_query_batch(&index, &q, 1)
            .unwrap()
            .iter()
            .map(|(_, st)| st.total_evals())
            .collect();
        medians.push((n, median(work)));
    }
    let factors: Vec<f64> = medians.windows(2).map(|w| w[1].1 as f64 / w[0].1 as f64).collect();
    let pass = factors.iter().all(|f| (1.4..=3.0).contains(f));
    let fmt: Vec<String> = medians
        .iter()
        .map(|(n, w)| format!("n={n}: {w} ({:.0}%)", 100.0 * *w as f64 / *n as f64))
        .collect();
    outcome(
        pass,
        format!("median evals {}; growth per 4x n: {factors:.2?} (need each in [1.4, 3.0])", fmt.join(", ")),
    )
}

fn closer_count_monte_carlo() -> Outcome {
    let (n, n_r, d) = (10_000, 100, 8);
    let (x, q) = split(SyntheticSpec::UniformCube, n, 2000, d, 400);
    let counts = closer_than_rep_counts(&x, &q, n_r, &l2(d), 41).unwrap();
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    let target = n as f64 / n_r as f64 - 1.0;
    outcome(
        (mean - target).abs() <= 0.15 * target,
        format!("mean strictly-closer count {mean:.2} over 2000 trials, target {target} ± 15%"),
    )
}

fn one_shot_success() -> Outcome {
    let (n, d, nq, delta) = (65_536, 4, 2000, 0.1);
    let (x, q) = split(SyntheticSpec::UniformCube, n, nq, d, 500);
    let m = l2(d);
    let est = estimate_expansion_rate(&x, &m, 200, 16, 5).unwrap();
    let (n_r, s) = one_shot_params(n, est.c_median, delta).unwrap();
    let index = build_one_shot(x.clone(), m, &BuildParams::new(n_r, 51), s).unwrap();
    let truth = bf_search(&q, &x, &m, 1).unwrap();
    let got = one_shot_query_batch(&index, &q, 1).unwrap();
    let (mut fails, mut cond, mut cond_fails) = (0, 0, 0);
    for ((nl, st), t) in got.iter().zip(&truth.lists) {
        let failed = nl.dists[0] != t.dists[0];
        fails += failed as usize;
        if f64::from(st.gamma) <= f64::from(st.radius) / 2.0 {
            cond += 1;
            cond_fails += failed as usize;
        }
    }
    let rate = fails as f64 / nq as f64;
    outcome(
        rate <= 2.0 * delta && cond_fails == 0,
        format!(
            "c_median={:.2} -> n_r=s={s}; failure rate {rate:.4} (limit {}); conditional subset {cond} queries, {cond_fails} failures",
            est.c_median,
            2.0 * delta
        ),
    )
}

fn expansion_sanity() -> Outcome {
    let g1 = gen_synthetic(SyntheticSpec::IntegerGrid, 2500, 1, 0).unwrap();
    let g2 = gen_synthetic(SyntheticSpec::IntegerGrid, 2500, 2, 0).unwrap();
    let e1 = estimate_expansion_rate(&g1, &MetricSpec::new(MetricKind::Manhattan, 1).unwrap(), 200, 16, 1).unwrap();
    let e2 = estimate_expansion_rate(&g2, &MetricSpec::new(MetricKind::Manhattan, 2).unwrap(), 200, 16, 1).unwrap();
    outcome(
        (1.8..=2.2).contains(&e1.c_max) && (3.0..=5.0).contains(&e2.c_max),
        format!("1-d grid c_max={:.3} (need [1.8,2.2]); 50x50 grid c_max={:.3} (need [3,5])", e1.c_max, e2.c_max),
    )
}

fn tradeoff_monotonicity() -> Outcome {
    let (n, d, nq) = (100_000, 16, 1000);
    let (x, q) = split(SyntheticSpec::UniformCube, n, nq, d, 700);
    let m = l2(d);
    let root = sqrt_ceil(n);
    let mut rows = Vec::new();
    for mult in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let s = ((mult * root as f64).ceil() as usize).max(1);
        let index = build_one_shot(x.clone(), m, &BuildParams::new(s, 71), s).unwrap();
        let got = one_shot_query_batch(&index, &q, 1).unwrap();
        let evals: u64 = got.iter().map(|(_, st)| st.total_evals()).sum();
        let rank: f64 = got
            .iter()
            .map(|(nl, _)| rank_error(&x, q.row(nl.query), nl.ids[0], &m).unwrap() as f64)
            .sum::<f64>()
            / nq as f64;
        let speedup = (nq as u64 * n as u64) as f64 / evals as f64;
        rows.push((s, rank, evals, speedup));
    }
    let rank_ok = rows.windows(2).all(|w| w[1].1 <= w[0].1);
    let evals_ok = rows.windows(2).all(|w| w[1].2 > w[0].2);
    let speedup_ok = rows[2].3 >= 10.0;
    let fmt: Vec<String> = rows
        .iter()
        .map(|(s, r, e, sp)| format!("s={s}: rank {r:.1}, evals {e}, {sp:.0}x"))
        .collect();
    outcome(rank_ok && evals_ok && speedup_ok, fmt.join("; "))
}

fn work_reduction_at_scale() -> Outcome {
    let (n, d, nq) = (1_000_000, 16, 200);
    let (x, q) = split(SyntheticSpec::UniformCube, n, nq, d, 800);
    let m = l2(d);
    let index = build_exact(x.clone(), m, &BuildParams::new(sqrt_ceil(n), 81)).unwrap();
    let got = exact_query_batch(&index, &q, 1).unwrap();
    let truth = bf_search(&q, &x, &m, 1).unwrap();
    let exact = got.iter().zip(&truth.lists).all(|((nl, _), t)| nl == t);
    let rbc_evals: u64 = got.iter().map(|(_, st)| st.total_evals()).sum();
    let ratio = truth.evals as f64 / rbc_evals as f64;
    let scanned: f64 = got.iter().map(|(_, st)| st.reps_scanned as f64).sum::<f64>() / nq as f64;
    outcome(
        ratio >= 5.0 && exact,
        format!(
            "brute {} vs exact {} evals: {ratio:.2}x (need >= 5x); {scanned:.0}/{} reps scanned on average; exact={exact}",
            truth.evals,
            rbc_evals,
            index.num_reps()
        ),
    )
}

fn parallel_determinism() -> Outcome {
    let (n, d, nq, k) = (20_000, 8, 500, 5);
    let (x, q) = split(SyntheticSpec::UniformCube, n, nq, d, 900);
    let m = l2(d);
    let max = std::thread::available_parallelism().map_or(1, |p| p.get());
    let run = |w: usize| {
        with_workers(Some(w), || {
            let bf = bf_search(&q, &x, &m, k).unwrap();
            let index = build_exact(x.clone(), m, &BuildParams::new(sqrt_ceil(n), 91)).unwrap();
            let ex: Vec<NeighborList> = exact_query_batch(&index, &q, k).unwrap().into_iter().map(|r| r.0).collect();
            (bf, ex)
        })
        .unwrap()
    };
    let base = run(1);
    let same = |a: &[NeighborList], b: &[NeighborList]| {
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| {
                x.ids == y.ids && x.dists.iter().zip(&y.dists).all(|(p, q)| p.to_bits() == q.to_bits())
            })
    };
    let mut ok = true;
    for w in [2, max] {
        let other = run(w);
        ok &= same(&base.0.lists, &other.0.lists) && same(&base.1, &other.1);
    }
    outcome(ok, format!("workers {{1, 2, {max}}}: bf_search and exact_query batches bit-identical = {ok}"))
}

fn sweep_stability() -> Outcome {
    let (n, d, nq) = (50_000, 8, 1000);
    let (x, q) = split(SyntheticSpec::UniformCube, n, nq, d, 1000);
    let m = l2(d);
    let truth = bf_search(&q, &x, &m, 1).unwrap();
    let root = sqrt_ceil(n);
    let mut totals = Vec::new();
    let mut exact_everywhere = true;
    for mult in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let n_r = ((mult * root as f64).ceil() as usize).max(1);
        let index = build_exact(x.clone(), m, &BuildParams::new(n_r, 101)).unwrap();
        let got = exact_query_batch(&index, &q, 1).unwrap();
        exact_everywhere &= got.iter().zip(&truth.lists).all(|((nl, _), t)| nl == t);
        totals.push((n_r, got.iter().map(|(_, st)| st.total_evals()).sum::<u64>()));
    }
    let lo = totals.iter().map(|t| t.1).min().unwrap() as f64;
    let hi = totals.iter().map(|t| t.1).max().unwrap() as f64;
    outcome(
        exact_everywhere && hi / lo < 10.0,
        format!("total evals per n_r {totals:?}; spread {:.2}x (need < 10x); exact at every point = {exact_everywhere}", hi / lo),
    )
}

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("RBC_ACCEPT_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |c: u32| only.as_ref().is_none_or(|o| o.contains(&c));

    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    if wanted(1) || wanted(2) {
        let (c1, c2) = exactness_and_audit();
        results.push((1, "exactness vs brute force", c1));
        results.push((2, "never prune the owner", c2));
    }
    let rest: [(u32, &str, fn() -> Outcome); 8] = [
        (3, "sublinear work scaling", sublinear_scaling),
        (4, "strictly-closer count Monte Carlo", closer_count_monte_carlo),
        (5, "one-shot success probability", one_shot_success),
        (6, "expansion-rate sanity", expansion_sanity),
        (7, "one-shot tradeoff monotonicity", tradeoff_monotonicity),
        (8, "exact work reduction at n=1e6", work_reduction_at_scale),
        (9, "parallel determinism", parallel_determinism),
        (10, "n_r sweep stability", sweep_stability),
    ];
    for (id, name, f) in rest {
        if wanted(id) {
            let t = Instant::now();
            let mut o = f();
            o.detail = format!("{} [{:.1}s]", o.detail, t.elapsed().as_secs_f64());
            results.push((id, name, o));
        }
    }
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (id, name, o) in &results {
        println!("[{}] criterion {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
