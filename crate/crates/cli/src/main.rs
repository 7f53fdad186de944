//! `knnrgg`: seeded Monte Carlo experiments on k-nearest-neighbour graphs.

mod output;
mod params;
mod plot;

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use knnrgg::configuration::{
    is_type_a_default, is_type_b, optimize_theta, small_component_certificate, ConfigurationFile, SearchParams,
};
use knnrgg::events::{components, event_regions, EventKind, EventSpec};
use knnrgg::experiment::{connectivity_curve, estimate_events, estimate_f, with_workers, RateEstimate};
use knnrgg::geometry::sample_poisson;
use knnrgg::knn::build_knn_graph;
use knnrgg::bounds::disc_construction_bound;

use output::{num, write_file, Report, VERSION};
use params::Params;

/// Bad flags, config file or parameters; exits with code 2.
#[derive(Debug)]
pub struct InvalidConfig(pub String);

impl fmt::Display for InvalidConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvalidConfig {}

#[derive(Parser)]
#[command(name = "knnrgg", version = VERSION, about = "Experiments on k-nearest-neighbour random geometric graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the outer region of an event and list points with components.
    Sample(Run),
    /// Estimate event probabilities with Wilson intervals.
    EstimateEvent(Run),
    /// Estimate p1, p2 and the decay rates f = -ln(p)/k.
    EstimateF(Run),
    /// P(connected) for k = floor(c ln n).
    ConnectivityCurve(Run),
    /// The three-disc lower bound on p1.
    DiscBound(Run),
    /// Anneal a certified configuration towards minimal theta.
    ThetaSearch(Run),
    /// Render SVG plots and CSV mirrors from a results file.
    Plot(Run),
}

#[derive(clap::Args)]
struct Run {
    /// JSON file with defaults for any flag.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: Params,
}

enum Outcome {
    Done,
    Unmeasurable,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Unmeasurable) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            let invalid = e.downcast_ref::<InvalidConfig>().is_some()
                || e.downcast_ref::<knnrgg::Error>().is_some_and(|k| {
                    !matches!(k, knnrgg::Error::InfiniteLabel(_))
                });
            ExitCode::from(if invalid { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> anyhow::Result<Outcome> {
    let (name, run): (&'static str, Run) = match command {
        Command::Sample(r) => ("sample", r),
        Command::EstimateEvent(r) => ("estimate-event", r),
        Command::EstimateF(r) => ("estimate-f", r),
        Command::ConnectivityCurve(r) => ("connectivity-curve", r),
        Command::DiscBound(r) => ("disc-bound", r),
        Command::ThetaSearch(r) => ("theta-search", r),
        Command::Plot(r) => ("plot", r),
    };
    let p = run.params.resolve(run.config.as_deref())?;
    if p.trials == Some(0) {
        return Err(InvalidConfig("trials must be at least 1".into()).into());
    }
    let start = Instant::now();
    let outcome = match name {
        "sample" => sample(&p),
        "estimate-event" => estimate_event_cmd(&p),
        "estimate-f" => estimate_f_cmd(&p),
        "connectivity-curve" => connectivity_cmd(&p),
        "disc-bound" => disc_bound_cmd(&p),
        "theta-search" => theta_search_cmd(&p),
        _ => plot_cmd(&p),
    }?;
    eprintln!("{name}: {} ms with {} workers", start.elapsed().as_millis(), p.workers());
    Ok(outcome)
}

fn kinds(p: &Params) -> anyhow::Result<Vec<EventKind>> {
    let names = p.kind.clone().unwrap_or_else(|| vec!["A".into()]);
    if names.iter().any(|n| n.eq_ignore_ascii_case("all")) {
        return Ok(EventKind::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| n.parse::<EventKind>().map_err(|e| InvalidConfig(e.to_string()).into()))
        .collect()
}

fn kind_names(kinds: &[EventKind]) -> Vec<String> {
    kinds.iter().map(ToString::to_string).collect()
}

fn sample(p: &Params) -> anyhow::Result<Outcome> {
    let k = p.single_k(2)?;
    let m = p.m_param.unwrap_or(8);
    let kind = match kinds(p)?.as_slice() {
        [kind] => *kind,
        other => return Err(InvalidConfig(format!("sample takes one kind, got {}", other.len())).into()),
    };
    let spec = EventSpec::new(kind, m, k)?;
    let (outer, inner) = event_regions(&spec);
    let seed = p.seed();
    let ps = sample_poisson(outer, 1.0, seed)?;
    let graph = build_knn_graph(&ps, k as usize);
    let mut component = vec![0usize; ps.len()];
    let comps = components(&graph);
    for c in &comps {
        for &v in &c.vertex_ids {
            component[v as usize] = c.id;
        }
    }
    let within: BTreeSet<usize> =
        comps.iter().filter(|c| inner.contains_rect(&c.bbox)).map(|c| c.id).collect();
    let rows: Vec<Vec<String>> = ps
        .points
        .iter()
        .enumerate()
        .map(|(i, pt)| {
            vec![
                i.to_string(),
                num(pt.x),
                num(pt.y),
                component[i].to_string(),
                within.contains(&component[i]).to_string(),
            ]
        })
        .collect();
    let results = json!({
        "points": ps.points.iter().map(|q| [q.x, q.y]).collect::<Vec<_>>(),
        "component": component,
        "components_within_inner": within,
        "event": !within.is_empty(),
    });
    Report {
        command: "sample",
        seed,
        params: json!({"k": k, "m-param": m, "kind": kind.to_string()}),
        columns: vec!["id", "x", "y", "component", "component_within_inner"],
        rows,
        results,
    }
    .write(p.out.as_deref())?;
    Ok(Outcome::Done)
}

fn estimate_event_cmd(p: &Params) -> anyhow::Result<Outcome> {
    let kinds = kinds(p)?;
    let ks = p.k_list(&[2]);
    let m = p.m_param.unwrap_or(8);
    let trials = p.trials(1000);
    let seed = p.seed();
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for &k in &ks {
        let est = estimate_events(&kinds, m, k, trials, seed, p.workers())?;
        for (kind, e) in kinds.iter().zip(est) {
            rows.push(vec![
                kind.to_string(),
                k.to_string(),
                m.to_string(),
                e.trials.to_string(),
                e.successes.to_string(),
                num(e.p_hat),
                num(e.ci_low),
                num(e.ci_high),
            ]);
            results.push(json!({"kind": kind.to_string(), "k": k, "m": m, "estimate": e}));
        }
    }
    Report {
        command: "estimate-event",
        seed,
        params: json!({"kind": kind_names(&kinds), "k": ks, "m-param": m, "trials": trials}),
        columns: vec!["kind", "k", "m", "trials", "successes", "p_hat", "ci_low", "ci_high"],
        rows,
        results: Value::Array(results),
    }
    .write(p.out.as_deref())?;
    Ok(Outcome::Done)
}

fn rate_cells(r: &RateEstimate) -> [String; 3] {
    match r {
        RateEstimate::Measured { f_hat, ci_low, ci_high } => [num(*f_hat), num(*ci_low), num(*ci_high)],
        RateEstimate::Unmeasurable => ["unmeasurable".into(), String::new(), String::new()],
    }
}

fn estimate_f_cmd(p: &Params) -> anyhow::Result<Outcome> {
    let ks = p.k_list(&[1, 2, 3]);
    let m = p.m_param.unwrap_or(8);
    let trials = p.trials(1000);
    let seed = p.seed();
    let table = estimate_f(&ks, m, trials, seed, p.workers())?;
    let rows = table
        .iter()
        .map(|r| {
            let mut row = vec![r.k.to_string()];
            for e in [&r.p1, &r.p2] {
                row.extend([e.successes.to_string(), num(e.p_hat), num(e.ci_low), num(e.ci_high)]);
            }
            row.extend(rate_cells(&r.f1));
            row.extend(rate_cells(&r.f2));
            row
        })
        .collect();
    Report {
        command: "estimate-f",
        seed,
        params: json!({"k": ks, "m-param": m, "trials": trials}),
        columns: vec![
            "k", "p1_successes", "p1_hat", "p1_ci_low", "p1_ci_high", "p2_successes", "p2_hat", "p2_ci_low",
            "p2_ci_high", "f1_hat", "f1_ci_low", "f1_ci_high", "f2_hat", "f2_ci_low", "f2_ci_high",
        ],
        rows,
        results: serde_json::to_value(&table)?,
    }
    .write(p.out.as_deref())?;
    if table.iter().all(|r| r.is_measurable()) {
        Ok(Outcome::Done)
    } else {
        eprintln!("some rates are unmeasurable: no successes in {trials} trials");
        Ok(Outcome::Unmeasurable)
    }
}

fn connectivity_cmd(p: &Params) -> anyhow::Result<Outcome> {
    let ns = p.n.clone().unwrap_or_else(|| vec![1e4]);
    let cs = p.c.clone().unwrap_or_else(|| vec![0.2, 0.5, 0.8]);
    let trials = p.trials(100);
    let seed = p.seed();
    let table = connectivity_curve(&ns, &cs, trials, seed, p.workers())?;
    let rows = table
        .iter()
        .map(|r| {
            let e = &r.estimate;
            vec![
                num(r.n),
                num(r.c),
                r.k.to_string(),
                e.trials.to_string(),
                e.successes.to_string(),
                num(e.p_hat),
                num(e.ci_low),
                num(e.ci_high),
            ]
        })
        .collect();
    Report {
        command: "connectivity-curve",
        seed,
        params: json!({"n": ns, "c": cs, "trials": trials}),
        columns: vec!["n", "c", "k", "trials", "successes", "p_hat", "ci_low", "ci_high"],
        rows,
        results: serde_json::to_value(&table)?,
    }
    .write(p.out.as_deref())?;
    Ok(Outcome::Done)
}

fn disc_bound_cmd(p: &Params) -> anyhow::Result<Outcome> {
    let ks = p.k_list(&[1, 2, 3]);
    let m = p.m_param.unwrap_or(8);
    let trials = p.trials(1000);
    let seed = p.seed();
    let table = with_workers(p.workers(), || {
        ks.iter().map(|&k| disc_construction_bound(k, m, trials, seed)).collect::<knnrgg::Result<Vec<_>>>()
    })??;
    let rows = table
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                r.m.to_string(),
                r.trials.to_string(),
                num(r.p_i),
                num(r.ln_p_ii),
                num(r.p_ii),
                r.p_iii_successes.to_string(),
                num(r.p_iii_hat),
                num(r.p_iii_ci_low),
                num(r.p_iii_ci_high),
                num(r.ln_p1_lower),
                num(r.p1_lower),
                num(r.f1_upper),
            ]
        })
        .collect();
    Report {
        command: "disc-bound",
        seed,
        params: json!({"k": ks, "m-param": m, "trials": trials}),
        columns: vec![
            "k", "m", "trials", "p_i", "ln_p_ii", "p_ii", "p_iii_successes", "p_iii_hat", "p_iii_ci_low",
            "p_iii_ci_high", "ln_p1_lower", "p1_lower", "f1_upper",
        ],
        rows,
        results: serde_json::to_value(&table)?,
    }
    .write(p.out.as_deref())?;
    Ok(Outcome::Done)
}

fn theta_search_cmd(p: &Params) -> anyhow::Result<Outcome> {
    let m = p.m_param.unwrap_or(10);
    let n = p.n_param.unwrap_or(8);
    let k = p.single_k(4096)?;
    let eps = p.eps.unwrap_or(0.4);
    if !(eps > 0.0 && eps < 0.5) {
        return Err(InvalidConfig(format!("eps must lie in (0, 1/2), got {eps}")).into());
    }
    let defaults = SearchParams::default();
    let search = SearchParams {
        iterations: p.iterations.unwrap_or(defaults.iterations),
        restarts: p.restarts.unwrap_or(defaults.restarts),
        ..defaults
    };
    let seed = p.seed();
    let res = with_workers(p.workers(), || optimize_theta(m, n, k, eps, &search, seed))??;
    let file = ConfigurationFile::new(&res.configuration, &res.t_cells);
    let params = json!({
        "m-param": m, "n-param": n, "k": k, "eps": eps,
        "iterations": search.iterations, "restarts": search.restarts, "search": search,
    });
    let certified = small_component_certificate(&res.configuration, &res.t_cells);
    let type_a = is_type_a_default(&res.configuration);
    let doc = json!({
        "version": VERSION,
        "command": "theta-search",
        "seed": seed,
        "params": params,
        "results": {
            "theta": res.theta,
            "seed_theta": res.seed_theta,
            "accepted": res.accepted,
            "certified": certified,
            "type_a": type_a,
            "configuration": file,
        },
    });
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    let mut log = Report::header_lines("theta-search", seed, &params);
    log += &format!(
        "seed theta {}\nbest theta {}\naccepted moves {}\ncertified {certified}\ntype A {type_a}\n",
        res.seed_theta, res.theta, res.accepted
    );
    // the full Type B scan is quartic in MN
    if search.enforce_type_b || res.configuration.tiling.cell_count() <= 6400 {
        log += &format!("type B at eps {eps} {}\n", is_type_b(&res.configuration, eps));
    } else {
        log += "type B not checked\n";
    }
    match p.out.as_deref() {
        Some(path) => {
            write_file(path, &text)?;
            write_file(&path.with_extension("log"), &log)?;
        }
        None => print!("{text}"),
    }
    eprint!("{log}");
    Ok(Outcome::Done)
}

fn plot_cmd(p: &Params) -> anyhow::Result<Outcome> {
    let input = p.input.as_deref().ok_or_else(|| InvalidConfig("plot needs --input".into()))?;
    let text = fs::read_to_string(input).with_context(|| format!("missing results file {}", input.display()))?;
    let table = plot::ResultsTable::parse(&text)?;
    let dir: &Path = p.out.as_deref().unwrap_or(Path::new("."));
    for chart in table.charts()? {
        write_file(&dir.join(format!("{}.svg", chart.name)), &plot::render_svg(&chart))?;
        write_file(&dir.join(format!("{}.csv", chart.name)), &plot::mirror_csv(&chart)?)?;
    }
    Ok(Outcome::Done)
}
