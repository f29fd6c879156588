//! One function per subcommand. Each returns the paths it wrote.

use crate::config::{Chain, ExperimentConfig, Instance, Mode, ModelConfig};
use crate::output::Output;
use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;
use spinscape::annealing::{exceedance_curve, horizon_constants, success_probability, Schedule};
use spinscape::bounds::log_tunneling_lower;
use spinscape::critical::classical_m;
use spinscape::dynamics::{empirical_laws, simulate, tunneling_experiment};
use spinscape::exact::{ExactChain, DENSE_LIMIT};
use spinscape::experiments::{analyze, rem_study, sweep};
use spinscape::landscape::ModificationParams;
use spinscape::model::ENUMERATION_LIMIT;
use spinscape::spin::bitstring;
use spinscape::{rng, SpinConfig};
use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::path::PathBuf;

pub fn run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let mode = cfg.mode.expect("resolved config has a mode");
    if mode == Mode::RemStudy {
        return run_rem_study(cfg);
    }
    let inst = Instance::build(cfg)?;
    for w in &inst.warnings {
        eprintln!("warning: {w}");
    }
    let mut out = Output::new(cfg.out_dir(), mode.name(), cfg, &inst.resolved())?;
    match mode {
        Mode::Analyze => run_analyze(cfg, &inst, &mut out)?,
        Mode::Sweep => run_sweep(cfg, &inst, &mut out)?,
        Mode::Sample => run_sample(cfg, &inst, &mut out)?,
        Mode::Tunnel => run_tunnel(cfg, &inst, &mut out)?,
        Mode::Anneal => run_anneal(cfg, &inst, &mut out)?,
        Mode::RemStudy => unreachable!(),
    }
    Ok(out.written().to_vec())
}

fn eps(cfg: &ExperimentConfig) -> f64 {
    cfg.run.eps.unwrap_or(0.1)
}

fn run_analyze(cfg: &ExperimentConfig, inst: &Instance, out: &mut Output) -> Result<()> {
    let land = inst.land("analyze")?;
    ensure!(land.n <= DENSE_LIMIT, "analyze needs N <= {DENSE_LIMIT}, got {}", land.n);
    let params = inst.params(cfg, cfg.beta()?)?;
    let report = analyze(land, &params, eps(cfg)).context("exact analysis failed; reduce N or check c")?;
    for f in &report.flags {
        say!("{} {}: {} vs {}", if f.pass { "PASS" } else { "FAIL" }, f.name, f.lhs, f.rhs);
    }
    for s in &report.skipped {
        say!("SKIP {}: {}", s.name, s.reason);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    out.csv("flags.csv", &report.flags)?;
    out.json("analyze.json", &report)
}

fn run_sweep(cfg: &ExperimentConfig, inst: &Instance, out: &mut Output) -> Result<()> {
    let land = inst.land("sweep")?;
    let betas = cfg.run.betas.as_deref().context("run.betas is required")?;
    let md = &cfg.modification;
    let report = sweep(land, betas, |b| {
        let alpha = match &md.alpha {
            crate::config::AlphaRule::Fixed(a) => *a,
            crate::config::AlphaRule::Named(_) => b,
        };
        ModificationParams::new(md.f.clone(), alpha, inst.c, b, inst.h_star)
    })?;
    say!(
        "slope original {:.6} (m = {:.6}), slope modified {:.6}",
        report.fit_original.slope, report.m, report.fit_modified.slope
    );
    out.csv("sweep.csv", &report.rows)?;
    out.json("sweep.json", &report)
}

fn chain_params(inst: &Instance, cfg: &ExperimentConfig, chain: Chain, beta: f64) -> Result<ModificationParams> {
    match chain {
        Chain::Original => inst.unmodified(beta),
        Chain::Modified => inst.params(cfg, beta),
    }
}

#[derive(Serialize)]
struct Occupancy {
    state: String,
    fraction: f64,
    /// Exact stationary probability, for small instances.
    stationary: Option<f64>,
}

#[derive(Serialize)]
struct LawRow {
    time: f64,
    state: String,
    probability: f64,
}

#[derive(Serialize)]
struct SampleSummary {
    chain: Chain,
    beta: f64,
    start: String,
    horizon: f64,
    seed: u64,
    jumps: usize,
    occupancy: Vec<Occupancy>,
    law_runs: Option<u64>,
}

fn run_sample(cfg: &ExperimentConfig, inst: &Instance, out: &mut Output) -> Result<()> {
    let n = inst.model.n();
    let beta = cfg.beta()?;
    let chain = cfg.run.chains.as_ref().and_then(|c| c.first().copied()).unwrap_or(Chain::Modified);
    let params = chain_params(inst, cfg, chain, beta)?;
    let horizon = cfg.run.horizon.context("run.horizon is required")?;
    let start = SpinConfig::new(cfg.starts().and_then(|s| s.first().copied()).unwrap_or(0), n)?;
    let seed = cfg.seed();
    let traj = simulate(&inst.model, &params, start, horizon, seed)?;

    let mut body = Vec::new();
    traj.write_csv(&mut body)?;
    out.csv_body("trajectory.csv", &body)?;

    let mut held: HashMap<u32, f64> = HashMap::new();
    let mut prev = (0.0, start.bits());
    for &(t, s) in &traj.events {
        *held.entry(prev.1).or_default() += t - prev.0;
        prev = (t, s.bits());
    }
    *held.entry(prev.1).or_default() += horizon - prev.0;
    let pi = match &inst.land {
        Some(l) if n <= DENSE_LIMIT => Some(ExactChain::build(l, &params)?.pi),
        _ => None,
    };
    let mut occupancy: Vec<Occupancy> = held
        .into_iter()
        .map(|(s, t)| Occupancy {
            state: bitstring(s, n),
            fraction: if horizon > 0.0 { t / horizon } else { 1.0 },
            stationary: pi.as_ref().map(|p| p[s as usize]),
        })
        .collect();
    occupancy.sort_by(|a, b| b.fraction.total_cmp(&a.fraction).then(a.state.cmp(&b.state)));

    let law_runs = match (&cfg.run.horizons, cfg.run.runs) {
        (Some(times), Some(runs)) => {
            ensure!(n <= ENUMERATION_LIMIT, "empirical laws need N <= {ENUMERATION_LIMIT}");
            let laws = empirical_laws(&inst.model, &params, start, times, runs, rng::derive(seed, 1))?;
            let mut rows = Vec::new();
            for (t, law) in times.iter().zip(&laws) {
                for (s, &p) in law.iter().enumerate() {
                    if p > 0.0 {
                        rows.push(LawRow {
                            time: *t,
                            state: bitstring(s as u32, n),
                            probability: p,
                        });
                    }
                }
            }
            out.csv("law.csv", &rows)?;
            Some(runs)
        }
        _ => None,
    };
    say!("{} jumps on [0, {horizon}]", traj.events.len());
    out.json(
        "sample.json",
        &SampleSummary {
            chain,
            beta,
            start: start.to_string(),
            horizon,
            seed,
            jumps: traj.events.len(),
            occupancy,
            law_runs,
        },
    )
}

#[derive(Serialize)]
struct TunnelCsvRow {
    beta: f64,
    chain: Chain,
    start: String,
    runs: u64,
    censored: u64,
    uncensored_mean: f64,
    uncensored_se: f64,
    lower_bound: f64,
    estimate: f64,
    /// Exact mean hitting time, for small instances.
    exact: Option<f64>,
    /// `β m - N ln 2`, the torpid lower bound on the log mean for the original chain.
    log_bound: Option<f64>,
    seed: u64,
}

#[derive(Serialize)]
struct RunCsvRow {
    beta: f64,
    chain: Chain,
    start: String,
    run: u64,
    time: f64,
    censored: bool,
    seed: u64,
}

#[derive(Serialize)]
struct TunnelPoint {
    beta: f64,
    chain: Chain,
    seed: u64,
    target: Vec<String>,
    sup: f64,
    sup_is_lower_bound: bool,
    warnings: Vec<String>,
}

fn run_tunnel(cfg: &ExperimentConfig, inst: &Instance, out: &mut Output) -> Result<()> {
    let land = inst.land("tunnel")?;
    let betas = match (&cfg.run.betas, cfg.run.beta) {
        (Some(b), _) => b.clone(),
        (None, Some(b)) => vec![b],
        (None, None) => bail!("run.betas or run.beta is required"),
    };
    let chains = cfg.run.chains.clone().unwrap_or(vec![Chain::Original, Chain::Modified]);
    ensure!(!chains.is_empty(), "run.chains is empty");
    let runs = cfg.run.runs.context("run.runs is required")?;
    let horizon = cfg.run.horizon.context("run.horizon is required")?;
    let starts = cfg.starts();
    let m = classical_m(land)?.m;
    let ground = land.stats.global_minima.clone();

    let mut rows = Vec::new();
    let mut per_run = Vec::new();
    let mut points = Vec::new();
    for (i, &beta) in betas.iter().enumerate() {
        for (j, &chain) in chains.iter().enumerate() {
            let params = chain_params(inst, cfg, chain, beta)?;
            let seed = rng::derive(cfg.seed(), (i * chains.len() + j) as u64);
            let rep = tunneling_experiment(&inst.model, land, &params, starts.as_deref(), runs, horizon, seed)?;
            let exact = if land.n <= DENSE_LIMIT {
                Some(ExactChain::build(land, &params)?.mean_hitting_times(&ground)?)
            } else {
                None
            };
            for r in &rep.rows {
                rows.push(TunnelCsvRow {
                    beta,
                    chain,
                    start: r.start.clone(),
                    runs: r.runs,
                    censored: r.censored,
                    uncensored_mean: r.uncensored.mean,
                    uncensored_se: r.uncensored.se,
                    lower_bound: r.lower_bound,
                    estimate: r.estimate(),
                    exact: exact.as_ref().map(|e| e[r.start_bits as usize]),
                    log_bound: (chain == Chain::Original).then(|| log_tunneling_lower(land.n, beta, m)),
                    seed,
                });
            }
            per_run.extend(rep.samples.iter().map(|s| RunCsvRow {
                beta,
                chain,
                start: s.start.clone(),
                run: s.run,
                time: s.time,
                censored: s.censored,
                seed,
            }));
            say!("beta {beta} {chain:?}: sup estimate {} ({} censored)", rep.sup, rep.rows.iter().map(|r| r.censored).sum::<u64>());
            points.push(TunnelPoint {
                beta,
                chain,
                seed,
                target: rep.target,
                sup: rep.sup,
                sup_is_lower_bound: rep.sup_is_lower_bound,
                warnings: rep.warnings,
            });
        }
    }
    out.csv("tunnel.csv", &rows)?;
    out.csv("tunnel_runs.csv", &per_run)?;
    out.json("tunnel.json", &points)
}

#[derive(Serialize)]
struct AnnealSummary {
    schedule: Schedule,
    delta: f64,
    level: f64,
    checked_delta: bool,
    gamma_crossover: f64,
    /// `None` with a reason when the constants are undefined for these inputs.
    constants: Option<spinscape::annealing::HorizonConstants>,
    constants_error: Option<String>,
    rows: Vec<spinscape::annealing::ExceedanceRow>,
}

fn run_anneal(cfg: &ExperimentConfig, inst: &Instance, out: &mut Output) -> Result<()> {
    let n = inst.model.n();
    let r = &cfg.run;
    let a = r.a.context("run.a is required")?;
    let oscillation = match (r.oscillation, &inst.land) {
        (Some(o), _) => o,
        (None, Some(l)) => l.stats.h_max - l.stats.h_star,
        (None, None) => bail!("run.oscillation is required past the enumeration limit"),
    };
    let schedule = Schedule::power_law(a, oscillation)?;
    let delta = r.delta.context("run.delta is required")?;
    let horizons = r.horizons.as_deref().context("run.horizons is required")?;
    let runs = r.runs.context("run.runs is required")?;
    let starts = match (cfg.starts(), &inst.land) {
        (Some(s), _) => s,
        (None, Some(l)) => {
            let s = l.stats.non_global_minima();
            if s.is_empty() {
                vec![0]
            } else {
                s
            }
        }
        (None, None) => bail!("run.starts is required past the enumeration limit"),
    };
    let go = if r.unchecked_delta { exceedance_curve } else { success_probability };
    let rows = go(&inst.model, inst.c, inst.h_star, &schedule, delta, horizons, runs, &starts, cfg.seed())?;
    let (constants, constants_error) = match horizon_constants(n, a, eps(cfg), delta, oscillation) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    for row in &rows {
        say!("t = {} from {}: exceedance {} [{}, {}]", row.horizon, row.start, row.exceedance, row.ci_low, row.ci_high);
    }
    out.csv("anneal.csv", &rows)?;
    out.json(
        "anneal.json",
        &AnnealSummary {
            schedule,
            delta,
            level: inst.h_star + delta,
            checked_delta: !r.unchecked_delta,
            gamma_crossover: schedule.gamma_crossover(n),
            constants,
            constants_error,
            rows,
        },
    )
}

fn run_rem_study(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let ModelConfig::Rem { n, .. } = &cfg.model else {
        bail!("rem-study needs a rem model");
    };
    let draws = cfg.run.draws.context("run.draws is required")?;
    let s = (2.0 * LN_2).sqrt();
    let band = cfg.run.band.unwrap_or((s - 0.3, s));
    let study = rem_study(*n, draws, cfg.seed(), band)?;
    #[derive(Serialize)]
    struct Resolved {
        n: usize,
        band: (f64, f64),
        note: &'static str,
    }
    let resolved = Resolved {
        n: *n,
        band,
        note: "draw k uses disorder seed derive(seed, k); the model's own seed is unused",
    };
    let mut out = Output::new(cfg.out_dir(), Mode::RemStudy.name(), cfg, &resolved)?;
    say!(
        "min H in window {:.3}, max X/sqrt(N) in band {:.3}, c above ground {:.3}, gap event {:.3}",
        study.frac_min_h_in_window, study.frac_max_x_in_band, study.frac_c_above_ground, study.frac_gap_event
    );
    out.csv("rem_draws.csv", &study.draws)?;
    out.json("rem_study.json", &study)?;
    Ok(out.written().to_vec())
}
