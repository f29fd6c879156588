//! Trajectory simulation of the continuous-time chain at fixed temperature.
//!
//! Every state has total proposal rate 1 (a uniform coordinate at rate
//! `1/N` each), so the chain is simulated exactly by a rate-1 Poisson clock:
//! at each tick a coordinate is proposed and accepted with probability
//! `exp(-(H^f(σ^{(i)}) - H^f(σ))_+)`.

use crate::error::{arg, Result};
use crate::landscape::ModificationParams;
use crate::model::{EnergyModel, Landscape};
use crate::rng::{self, Rng};
use crate::spin::{bitstring, SpinConfig};
use crate::stats::{mean_se, wilson_interval, MeanSe, Z95};
use rand::Rng as _;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Accepted moves between exact recomputations of the energy.
const RESYNC_EVERY: u32 = 4096;

/// Current state of a simulated chain.
#[derive(Clone, Debug)]
pub(crate) struct Walker {
    pub bits: u32,
    pub h: f64,
    accepted: u32,
}

impl Walker {
    pub(crate) fn new(model: &EnergyModel, bits: u32) -> Self {
        Self {
            bits,
            h: model.energy_bits(bits),
            accepted: 0,
        }
    }

    /// One clock tick; `hf` maps energies to modified energies at the
    /// tick's time. Returns whether the proposal was accepted.
    #[inline]
    pub(crate) fn tick(&mut self, model: &EnergyModel, rng: &mut Rng, hf: impl Fn(f64) -> f64) -> bool {
        let i = rng.random_range(0..model.n());
        let h_new = self.h + model.flip_delta(self.bits, i);
        let d = hf(h_new) - hf(self.h);
        if d > 0.0 {
            let p = (-d).exp();
            debug_assert!((0.0..=1.0).contains(&p));
            if rng.random::<f64>() >= p {
                return false;
            }
        }
        self.bits ^= 1 << i;
        self.h = h_new;
        self.accepted += 1;
        if self.accepted % RESYNC_EVERY == 0 {
            self.h = model.energy_bits(self.bits);
        }
        true
    }
}

#[inline]
pub(crate) fn next_tick(rng: &mut Rng) -> f64 {
    rng.sample::<f64, _>(Exp1)
}

/// A sampled path: the initial state and every accepted jump.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub initial: SpinConfig,
    pub events: Vec<(f64, SpinConfig)>,
    pub horizon: f64,
    pub seed: u64,
}

impl Trajectory {
    /// State occupied at time `t`.
    pub fn state_at(&self, t: f64) -> SpinConfig {
        let k = self.events.partition_point(|(s, _)| *s <= t);
        if k == 0 {
            self.initial
        } else {
            self.events[k - 1].1
        }
    }

    /// CSV rows `time,state`, starting with the initial state at time 0.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,state")?;
        writeln!(w, "0,{}", self.initial)?;
        for (t, s) in &self.events {
            writeln!(w, "{t},{s}")?;
        }
        Ok(())
    }
}

fn check_init(model: &EnergyModel, s: SpinConfig) -> Result<()> {
    if s.n() != model.n() {
        return arg(format!("start has {} spins, model has {}", s.n(), model.n()));
    }
    Ok(())
}

fn check_horizon(h: f64) -> Result<()> {
    if !(h >= 0.0) || h.is_nan() {
        return arg(format!("horizon {h} must be nonnegative"));
    }
    Ok(())
}

/// Samples the chain on `[0, horizon]`, recording every jump.
pub fn simulate(
    model: &EnergyModel,
    params: &ModificationParams,
    init: SpinConfig,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    check_init(model, init)?;
    check_horizon(horizon)?;
    let mut rng = rng::stream(seed, 0);
    let mut w = Walker::new(model, init.bits());
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        t += next_tick(&mut rng);
        if t > horizon {
            break;
        }
        if w.tick(model, &mut rng, |h| params.modified_unchecked(h)) {
            events.push((t, SpinConfig::new(w.bits, model.n())?));
        }
    }
    Ok(Trajectory {
        initial: init,
        events,
        horizon,
        seed,
    })
}

/// States at the ascending `times`, from one run on stream `(seed, run)`.
pub(crate) fn states_at(
    model: &EnergyModel,
    hf: impl Fn(f64) -> f64,
    init: u32,
    times: &[f64],
    rng: &mut Rng,
) -> Vec<u32> {
    let mut w = Walker::new(model, init);
    let mut out = Vec::with_capacity(times.len());
    let mut t = next_tick(rng);
    for &target in times {
        while t <= target {
            w.tick(model, rng, &hf);
            t += next_tick(rng);
        }
        out.push(w.bits);
    }
    out
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return arg("time grid is empty");
    }
    if times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
        return arg("times must be nonnegative and strictly increasing");
    }
    Ok(())
}

/// Empirical law of `X(t)` at each of the ascending `times` over `runs`
/// independent runs started at `init`. Indexed by state bits; needs
/// `N ≤ 24`.
pub fn empirical_laws(
    model: &EnergyModel,
    params: &ModificationParams,
    init: SpinConfig,
    times: &[f64],
    runs: u64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_init(model, init)?;
    check_times(times)?;
    crate::error::check_capacity("empirical law", model.n(), crate::model::ENUMERATION_LIMIT, "")?;
    if runs == 0 {
        return arg("need at least one run");
    }
    let finals: Vec<Vec<u32>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, r);
            states_at(model, |h| params.modified_unchecked(h), init.bits(), times, &mut rng)
        })
        .collect();
    let size = 1usize << model.n();
    let mut laws = vec![vec![0.0; size]; times.len()];
    for row in &finals {
        for (k, &s) in row.iter().enumerate() {
            laws[k][s as usize] += 1.0;
        }
    }
    for law in &mut laws {
        law.iter_mut().for_each(|x| *x /= runs as f64);
    }
    Ok(laws)
}

/// First entrance time into a target set, or censoring at the horizon.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HittingSample {
    pub start: SpinConfig,
    pub target: Vec<u32>,
    /// Entrance time, or the horizon when censored.
    pub time: f64,
    pub censored: bool,
    pub seed: u64,
    pub run: u64,
}

/// Sorted, deduplicated set of states.
#[derive(Clone, Debug)]
struct TargetSet(Vec<u32>);

impl TargetSet {
    fn new(model: &EnergyModel, states: &[u32]) -> Result<Self> {
        if states.is_empty() {
            return arg("target set is empty");
        }
        if let Some(s) = states.iter().find(|&&s| (s as u64) >> model.n() != 0) {
            return arg(format!("target state {s} out of range"));
        }
        let mut v = states.to_vec();
        v.sort_unstable();
        v.dedup();
        Ok(Self(v))
    }

    #[inline]
    fn contains(&self, s: u32) -> bool {
        self.0.binary_search(&s).is_ok()
    }
}

/// `(time, censored)` for one run.
fn hit(
    model: &EnergyModel,
    params: &ModificationParams,
    start: u32,
    target: &TargetSet,
    horizon: f64,
    rng: &mut Rng,
) -> (f64, bool) {
    if target.contains(start) {
        return (0.0, false);
    }
    let mut w = Walker::new(model, start);
    let mut t = 0.0;
    loop {
        t += next_tick(rng);
        if t > horizon {
            return (horizon, true);
        }
        if w.tick(model, rng, |h| params.modified_unchecked(h)) && target.contains(w.bits) {
            return (t, false);
        }
    }
}

/// `τ_A` from `start`, on stream `(seed, 0)`.
pub fn hitting_time(
    model: &EnergyModel,
    params: &ModificationParams,
    start: SpinConfig,
    target: &[u32],
    max_horizon: f64,
    seed: u64,
) -> Result<HittingSample> {
    hitting_time_run(model, params, start, target, max_horizon, seed, 0)
}

/// `τ_A` from `start`, on stream `(seed, run)`.
pub fn hitting_time_run(
    model: &EnergyModel,
    params: &ModificationParams,
    start: SpinConfig,
    target: &[u32],
    max_horizon: f64,
    seed: u64,
    run: u64,
) -> Result<HittingSample> {
    check_init(model, start)?;
    check_horizon(max_horizon)?;
    let set = TargetSet::new(model, target)?;
    let mut rng = rng::stream(seed, run);
    let (time, censored) = hit(model, params, start.bits(), &set, max_horizon, &mut rng);
    Ok(HittingSample {
        start,
        target: set.0,
        time,
        censored,
        seed,
        run,
    })
}

/// One run of a tunneling experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub start: String,
    pub run: u64,
    pub time: f64,
    pub censored: bool,
}

/// Hitting statistics from one starting state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TunnelRow {
    pub start: String,
    pub start_bits: u32,
    pub runs: u64,
    pub censored: u64,
    /// Mean and standard error over uncensored runs only.
    pub uncensored: MeanSe,
    /// Mean of `min(τ, horizon)` over all runs: a lower bound on `E τ`.
    pub lower_bound: f64,
}

impl TunnelRow {
    /// The estimate of `E τ`: the uncensored mean when nothing was
    /// censored, otherwise the lower bound.
    pub fn estimate(&self) -> f64 {
        if self.censored == 0 {
            self.uncensored.mean
        } else {
            self.lower_bound
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TunnelingReport {
    pub target: Vec<String>,
    pub horizon: f64,
    pub seed: u64,
    pub rows: Vec<TunnelRow>,
    /// Largest row estimate; 0 when there is no non-global local minimum.
    pub sup: f64,
    /// Set when the largest row contains censored runs.
    pub sup_is_lower_bound: bool,
    pub samples: Vec<RunRecord>,
    pub warnings: Vec<String>,
}

/// Mean hitting times of the ground set from each start (default: every
/// non-global local minimum). Run `r` from the `k`-th start uses stream
/// `(seed, k·runs + r)`.
pub fn tunneling_experiment(
    model: &EnergyModel,
    land: &Landscape,
    params: &ModificationParams,
    starts: Option<&[u32]>,
    runs: u64,
    max_horizon: f64,
    seed: u64,
) -> Result<TunnelingReport> {
    check_horizon(max_horizon)?;
    if runs == 0 {
        return arg("need at least one run");
    }
    if land.n != model.n() {
        return arg("landscape and model sizes differ");
    }
    let mut warnings = Vec::new();
    let ground: Vec<u32> = land.stats.global_minima.clone();
    if !land.stats.unique_global_min {
        warnings.push(format!("{} global minima; targeting the whole set", ground.len()));
    }
    let target = TargetSet::new(model, &ground)?;
    let starts: Vec<u32> = match starts {
        Some(s) => s.to_vec(),
        None => land.stats.non_global_minima(),
    };
    let n = model.n();
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for (k, &s) in starts.iter().enumerate() {
        SpinConfig::new(s, n)?;
        let runs_out: Vec<(f64, bool)> = (0..runs)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng::stream(seed, k as u64 * runs + r);
                hit(model, params, s, &target, max_horizon, &mut rng)
            })
            .collect();
        let done: Vec<f64> = runs_out.iter().filter(|x| !x.1).map(|x| x.0).collect();
        let censored = runs - done.len() as u64;
        rows.push(TunnelRow {
            start: bitstring(s, n),
            start_bits: s,
            runs,
            censored,
            uncensored: mean_se(&done),
            lower_bound: runs_out.iter().map(|x| x.0).sum::<f64>() / runs as f64,
        });
        samples.extend(runs_out.iter().enumerate().map(|(r, &(time, censored))| RunRecord {
            start: bitstring(s, n),
            run: k as u64 * runs + r as u64,
            time,
            censored,
        }));
    }
    let best = rows
        .iter()
        .max_by(|a, b| a.estimate().total_cmp(&b.estimate()));
    let (sup, sup_is_lower_bound) = match best {
        Some(r) => (r.estimate(), r.censored > 0),
        None => {
            warnings.push("no non-global local minimum; sup is 0".into());
            (0.0, false)
        }
    };
    Ok(TunnelingReport {
        target: ground.iter().map(|&g| bitstring(g, n)).collect(),
        horizon: max_horizon,
        seed,
        rows,
        sup,
        sup_is_lower_bound,
        samples,
        warnings,
    })
}

/// Estimated ground-state occupation at one grid time from one start.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroundPoint {
    pub time: f64,
    pub start: String,
    pub successes: u64,
    pub runs: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeToGround {
    /// Smallest grid time at which every start has Wilson lower bound
    /// `≥ 1 - ε` for `P(H(X_t) = H*)`; `None` when the grid is exhausted.
    pub time: Option<f64>,
    pub censored: bool,
    pub eps: f64,
    pub curves: Vec<GroundPoint>,
}

/// Empirical `inf{t : min_σ P_σ(H(X_t) = H*) ≥ 1 - ε}` over the grid, with
/// the minimum taken over `starts` (default: all local minima).
pub fn time_to_ground(
    model: &EnergyModel,
    land: &Landscape,
    params: &ModificationParams,
    eps: f64,
    runs: u64,
    grid: &[f64],
    starts: Option<&[u32]>,
    seed: u64,
) -> Result<TimeToGround> {
    if !(eps > 0.0 && eps < 1.0) {
        return arg(format!("epsilon {eps} must lie in (0,1)"));
    }
    check_times(grid)?;
    if runs == 0 {
        return arg("need at least one run");
    }
    let ground = land.ground_mask();
    let starts: Vec<u32> = match starts {
        Some(s) => s.to_vec(),
        None => land.stats.local_minima.clone(),
    };
    let n = model.n();
    let mut curves = Vec::new();
    let mut ok = vec![true; grid.len()];
    for (k, &s) in starts.iter().enumerate() {
        SpinConfig::new(s, n)?;
        let paths: Vec<Vec<u32>> = (0..runs)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng::stream(seed, k as u64 * runs + r);
                states_at(model, |h| params.modified_unchecked(h), s, grid, &mut rng)
            })
            .collect();
        for (g, &t) in grid.iter().enumerate() {
            let hits = paths.iter().filter(|p| ground[p[g] as usize]).count() as u64;
            let (lo, hi) = wilson_interval(hits, runs, Z95);
            ok[g] &= lo >= 1.0 - eps;
            curves.push(GroundPoint {
                time: t,
                start: bitstring(s, n),
                successes: hits,
                runs,
                p_hat: hits as f64 / runs as f64,
                ci_low: lo,
                ci_high: hi,
            });
        }
    }
    let time = grid.iter().zip(&ok).find(|(_, &k)| k).map(|(t, _)| *t);
    Ok(TimeToGround {
        time,
        censored: time.is_none(),
        eps,
        curves,
    })
}
