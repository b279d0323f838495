use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rbc_core::dataset::{gen_synthetic, load_matrix, random_project, save_matrix};
use rbc_core::eval::{estimate_expansion_rate, rank_error};
use rbc_core::rbc::{
    build_exact, build_one_shot, load_index, one_shot_params, save_index, standard_params_exact,
};
use rbc_core::search::{exact_query_batch, one_shot_query_batch};
use rbc_core::{
    BuildParams, DataMatrix, MatrixFormat, MetricKind, MetricSpec, RbcError, RbcIndex, SamplingMode,
    SyntheticSpec,
};

use crate::{
    BuildArgs, EstimateArgs, EvalRankArgs, Format, GenArgs, ProjectArgs, QueryArgs, Variant,
};

type Result<T> = std::result::Result<T, RbcError>;

/// Prints the resolved configuration of a command to stderr.
pub(crate) fn print_config(command: &str, items: &[(&str, String)]) {
    eprintln!("# command = {command}");
    for (k, v) in items {
        eprintln!("# {k} = {v}");
    }
}

pub(crate) fn csv_err(e: csv::Error) -> RbcError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => RbcError::Io(io),
            _ => unreachable!(),
        }
    } else {
        RbcError::Format(format!("csv: {e}"))
    }
}

/// CSV writer to `out`, or stdout when no path is given.
pub(crate) fn csv_writer(out: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    Ok(csv::WriterBuilder::new().has_headers(true).from_writer(sink))
}

fn display_out(out: Option<&Path>) -> String {
    out.map_or_else(|| "-".to_string(), |p| p.display().to_string())
}

pub(crate) fn load(path: &Path) -> Result<DataMatrix> {
    load_matrix(path, MatrixFormat::from_path(path))
}

fn out_format(flag: Option<Format>, out: &Path) -> MatrixFormat {
    flag.map_or_else(|| MatrixFormat::from_path(out), MatrixFormat::from)
}

pub(crate) fn metric_for(kind: MetricKind, x: &DataMatrix) -> Result<MetricSpec> {
    MetricSpec::new(kind, x.d())
}

pub fn gen(a: GenArgs) -> Result<()> {
    let spec: SyntheticSpec = a.kind.parse()?;
    let format = out_format(a.format, &a.out);
    print_config(
        "gen",
        &[
            ("kind", spec.to_string()),
            ("n", a.n.to_string()),
            ("d", a.d.to_string()),
            ("seed", a.seed.to_string()),
            ("out", a.out.display().to_string()),
            ("format", format.to_string()),
        ],
    );
    let x = gen_synthetic(spec, a.n, a.d, a.seed)?;
    save_matrix(&x, &a.out, format)?;
    println!("wrote {} points in {} dimensions", x.n(), x.d());
    Ok(())
}

pub fn project(a: ProjectArgs) -> Result<()> {
    let format = out_format(a.format, &a.out);
    print_config(
        "project",
        &[
            ("data", a.data.display().to_string()),
            ("k", a.target_dim.to_string()),
            ("seed", a.seed.to_string()),
            ("out", a.out.display().to_string()),
            ("format", format.to_string()),
        ],
    );
    let x = load(&a.data)?;
    let y = random_project(&x, a.target_dim, a.seed)?;
    save_matrix(&y, &a.out, format)?;
    println!("projected {} points from {} to {} dimensions", y.n(), x.d(), y.d());
    Ok(())
}

/// Evenly spaced point ids used for the build-time invariant check.
fn check_sample(n: usize, count: usize) -> Vec<u32> {
    let count = count.min(n);
    (0..count).map(|i| (i * n / count) as u32).collect()
}

pub fn build(a: BuildArgs) -> Result<()> {
    let x = load(&a.data)?;
    let n = x.n();
    let metric = metric_for(a.metric.into(), &x)?;
    let mode: SamplingMode = a.mode.into();
    let (n_r, s) = match a.variant {
        Variant::Brute => return Err(RbcError::InvalidArgument("brute force has no index to build".into())),
        Variant::Exact => {
            if a.s.is_some() {
                return Err(RbcError::InvalidArgument("--s applies to the one-shot variant only".into()));
            }
            let n_r = match a.nr {
                Some(v) => v,
                None => standard_params_exact(n, a.c)?,
            };
            (n_r, None)
        }
        Variant::Oneshot => {
            let (dn, ds) = if a.nr.is_none() || a.s.is_none() {
                one_shot_params(n, a.c, a.delta)?
            } else {
                (0, 0)
            };
            (a.nr.unwrap_or(dn), Some(a.s.unwrap_or(ds)))
        }
    };
    print_config(
        "build",
        &[
            ("data", a.data.display().to_string()),
            ("n", n.to_string()),
            ("d", x.d().to_string()),
            ("variant", crate::variant_name(a.variant).to_string()),
            ("metric", metric.kind.to_string()),
            ("nr", n_r.to_string()),
            ("s", s.map_or_else(|| "-".to_string(), |s| s.to_string())),
            ("c", a.c.to_string()),
            ("delta", a.delta.to_string()),
            ("mode", mode.to_string()),
            ("seed", a.seed.to_string()),
            ("out", a.out.display().to_string()),
        ],
    );
    let params = BuildParams::new(n_r, a.seed).with_mode(mode);
    let index = match s {
        None => {
            let idx = build_exact(x, metric, &params)?;
            idx.check_invariants(&check_sample(n, 1000))?;
            let lens: Vec<usize> = idx.list_lengths().collect();
            println!("variant = exact");
            println!("reps = {}", idx.num_reps());
            println!("max_list = {}", lens.iter().max().copied().unwrap_or(0));
            println!("mean_list = {:.3}", n as f64 / lens.len() as f64);
            println!("build_evals = {}", idx.build_evals());
            RbcIndex::Exact(idx)
        }
        Some(s) => {
            let idx = build_one_shot(x, metric, &params, s)?;
            println!("variant = oneshot");
            println!("reps = {}", idx.num_reps());
            println!("max_list = {}", idx.s());
            println!("mean_list = {}", idx.s());
            println!("build_evals = {}", idx.build_evals());
            RbcIndex::OneShot(idx)
        }
    };
    save_index(&index, &a.out)?;
    Ok(())
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn query(a: QueryArgs) -> Result<()> {
    let index = load_index(&a.index)?;
    let queries = load(&a.queries)?;
    let reps = index.reps();
    print_config(
        "query",
        &[
            ("index", a.index.display().to_string()),
            ("variant", index.variant_name().to_string()),
            ("metric", index.metric().kind.to_string()),
            ("n", index.data().n().to_string()),
            ("reps", reps.len().to_string()),
            ("mode", reps.mode.to_string()),
            ("seed", reps.seed.to_string()),
            ("queries", a.queries.display().to_string()),
            ("k", a.k.to_string()),
            ("out", display_out(a.out.as_deref())),
        ],
    );
    if queries.d() != index.metric().dim {
        return Err(RbcError::Data(format!(
            "queries have d={}, index has d={}",
            queries.d(),
            index.metric().dim
        )));
    }

    // (ids, dists, gamma, reps_total, pruned_radius, pruned_3gamma, reps_scanned, candidates, evals)
    type Row = (Vec<u32>, Vec<f32>, f32, usize, Option<usize>, Option<usize>, usize, usize, u64);
    let rows: Vec<Row> = match &index {
        RbcIndex::Exact(idx) => exact_query_batch(idx, &queries, a.k)?
            .into_iter()
            .map(|(nl, st)| {
                (
                    nl.ids,
                    nl.dists,
                    st.gamma,
                    st.reps_total,
                    Some(st.reps_pruned_radius),
                    Some(st.reps_pruned_3gamma),
                    st.reps_scanned,
                    st.candidates_examined,
                    st.total_evals(),
                )
            })
            .collect(),
        RbcIndex::OneShot(idx) => one_shot_query_batch(idx, &queries, a.k)?
            .into_iter()
            .map(|(nl, st)| {
                (
                    nl.ids,
                    nl.dists,
                    st.gamma,
                    st.dists_step1,
                    None,
                    None,
                    1,
                    st.candidates_examined,
                    st.total_evals(),
                )
            })
            .collect(),
    };

    let mut w = csv_writer(a.out.as_deref())?;
    let mut header = vec!["query".to_string()];
    header.extend((0..a.k).map(|i| format!("id_{i}")));
    header.extend((0..a.k).map(|i| format!("dist_{i}")));
    header.extend(
        ["gamma", "reps_total", "pruned_radius", "pruned_3gamma", "reps_scanned", "candidates", "evals"]
            .map(String::from),
    );
    w.write_record(&header).map_err(csv_err)?;
    let mut total_evals = 0u64;
    for (qi, (ids, dists, gamma, total, pr, p3, scanned, cand, evals)) in rows.into_iter().enumerate() {
        let mut rec = vec![qi.to_string()];
        rec.extend(ids.iter().map(|v| v.to_string()));
        rec.extend(dists.iter().map(|v| v.to_string()));
        rec.extend([
            gamma.to_string(),
            total.to_string(),
            fmt_opt(pr),
            fmt_opt(p3),
            scanned.to_string(),
            cand.to_string(),
            evals.to_string(),
        ]);
        w.write_record(&rec).map_err(csv_err)?;
        total_evals += evals;
    }
    w.flush()?;
    eprintln!(
        "# mean_evals = {:.3}",
        total_evals as f64 / queries.n() as f64
    );
    Ok(())
}

pub fn eval_rank(a: EvalRankArgs) -> Result<()> {
    let x = load(&a.data)?;
    let queries = load(&a.queries)?;
    let metric = metric_for(a.metric.into(), &x)?;
    print_config(
        "eval-rank",
        &[
            ("data", a.data.display().to_string()),
            ("queries", a.queries.display().to_string()),
            ("results", a.results.display().to_string()),
            ("metric", metric.kind.to_string()),
            ("out", display_out(a.out.as_deref())),
        ],
    );
    if queries.d() != x.d() {
        return Err(RbcError::Data(format!("queries have d={}, data has d={}", queries.d(), x.d())));
    }
    let mut r = csv::Reader::from_path(&a.results).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| RbcError::Format(format!("results file has no `{name}` column")))
    };
    let (qcol, idcol) = (col("query")?, col("id_0")?);

    let mut pairs = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let parse = |c: usize| -> Result<usize> {
            rec.get(c)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| RbcError::Format(format!("bad value in row {:?}", rec.position())))
        };
        let (q, id) = (parse(qcol)?, parse(idcol)?);
        if q >= queries.n() {
            return Err(RbcError::Data(format!("query id {q} out of range")));
        }
        pairs.push((q, id as u32));
    }
    pairs.sort_unstable();

    let mut w = csv_writer(a.out.as_deref())?;
    w.write_record(["query", "id", "rank"]).map_err(csv_err)?;
    let mut sum = 0usize;
    for &(q, id) in &pairs {
        let rank = rank_error(&x, queries.row(q), id, &metric)?;
        sum += rank;
        w.write_record([q.to_string(), id.to_string(), rank.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    let mean = if pairs.is_empty() { 0.0 } else { sum as f64 / pairs.len() as f64 };
    eprintln!("# mean_rank = {mean}");
    Ok(())
}

pub fn estimate_c(a: EstimateArgs) -> Result<()> {
    let x = load(&a.data)?;
    let n = x.n();
    let pool = match &a.queries {
        Some(p) => x.concat(&load(p)?)?,
        None => x,
    };
    let metric = metric_for(a.metric.into(), &pool)?;
    print_config(
        "estimate-c",
        &[
            ("data", a.data.display().to_string()),
            ("queries", a.queries.as_ref().map_or_else(|| "-".to_string(), |p| p.display().to_string())),
            ("points", pool.n().to_string()),
            ("metric", metric.kind.to_string()),
            ("samples", a.samples.to_string()),
            ("radii", a.radii.to_string()),
            ("delta", a.delta.to_string()),
            ("seed", a.seed.to_string()),
        ],
    );
    let est = estimate_expansion_rate(&pool, &metric, a.samples, a.radii, a.seed)?;
    println!("c_max = {:.4}", est.c_max);
    println!("c_median = {:.4}", est.c_median);
    println!("ratios_used = {}", est.ratios_used);
    for (name, c) in [("c_max", est.c_max), ("c_median", est.c_median)] {
        let nr = standard_params_exact(n, c)?;
        let (os_nr, os_s) = one_shot_params(n, c, a.delta)?;
        println!("exact_nr[{name}] = {nr}");
        println!("oneshot_nr[{name}] = {os_nr}");
        println!("oneshot_s[{name}] = {os_s}");
    }
    Ok(())
}
