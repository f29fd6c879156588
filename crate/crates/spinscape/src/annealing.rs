//! Simulated annealing on the modified landscape with a power-law schedule.
//!
//! At time `s` the chain uses the quadratic modification with
//! `α_s = β_s = s^a`:
//!
//! ```text
//! H^f_s(σ) = β_s (c ∧ H(σ) - H*) + arctan(β_s (H(σ) - c)_+),
//! ```
//!
//! which is identically zero at `β_0 = 0`. Rates never exceed `1/N` per
//! coordinate, so a rate-1 Poisson clock with acceptance evaluated at the
//! tick time samples the inhomogeneous chain exactly (thinning).

use crate::dynamics::{next_tick, Trajectory, Walker};
use crate::error::{arg, Result};
use crate::model::EnergyModel;
use crate::rng;
use crate::spin::{bitstring, SpinConfig};
use crate::stats::{wilson_interval, Z95};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, LN_2};

/// Inverse-temperature trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `β_t = t^a`, `a ∈ (0,1)`.
    PowerLaw { a: f64 },
    /// `β_t ≡ β`; the fixed-temperature chain.
    Constant { beta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    /// `H_max - H*`.
    pub oscillation: f64,
}

impl Schedule {
    pub fn power_law(a: f64, oscillation: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return arg(format!("exponent a = {a} must lie in (0,1)"));
        }
        Self::checked(ScheduleKind::PowerLaw { a }, oscillation)
    }

    pub fn constant(beta: f64, oscillation: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return arg(format!("beta = {beta} must be finite and >= 0"));
        }
        Self::checked(ScheduleKind::Constant { beta }, oscillation)
    }

    fn checked(kind: ScheduleKind, oscillation: f64) -> Result<Self> {
        if !(oscillation >= 0.0 && oscillation.is_finite()) {
            return arg(format!("oscillation {oscillation} must be finite and >= 0"));
        }
        Ok(Self { kind, oscillation })
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ScheduleKind::PowerLaw { a } => Self::power_law(a, self.oscillation).map(|_| ()),
            ScheduleKind::Constant { beta } => Self::constant(beta, self.oscillation).map(|_| ()),
        }
    }

    pub fn beta_at(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::PowerLaw { a } => {
                if t <= 0.0 {
                    0.0
                } else {
                    t.powf(a)
                }
            }
            ScheduleKind::Constant { beta } => beta,
        }
    }

    /// `γ_t = (dβ_t/dt)(H_max - H*)`.
    pub fn gamma_at(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::PowerLaw { a } => a * t.powf(a - 1.0) * self.oscillation,
            ScheduleKind::Constant { .. } => 0.0,
        }
    }

    /// Time after which `γ_t < 2 (2/N³) e^{-π/2}`, twice the spectral gap
    /// floor of the capped chain.
    pub fn gamma_crossover(&self, n: usize) -> f64 {
        match self.kind {
            ScheduleKind::PowerLaw { a } => {
                let floor = 4.0 / (n as f64).powi(3) * (-FRAC_PI_2).exp();
                (a * self.oscillation / floor).powf(1.0 / (1.0 - a))
            }
            ScheduleKind::Constant { .. } => 0.0,
        }
    }
}

/// `β(c ∧ H - H*) + arctan(β (H - c)_+)`.
#[inline]
pub fn annealed_energy(h: f64, beta: f64, c: f64, h_star: f64) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    beta * (h.min(c) - h_star) + (beta * (h - c).max(0.0)).atan()
}

/// Horizon constants of the convergence guarantee. `t0` overflows to
/// infinity quickly, so its logarithm is reported as well.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HorizonConstants {
    pub n: usize,
    pub a: f64,
    pub eps: f64,
    pub delta: f64,
    pub oscillation: f64,
    pub log_t0: f64,
    pub t0: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
}

impl HorizonConstants {
    /// `max{t0, τ1, τ2, τ3}`.
    pub fn horizon(&self) -> f64 {
        self.t0.max(self.tau1).max(self.tau2).max(self.tau3)
    }
}

pub fn horizon_constants(n: usize, a: f64, eps: f64, delta: f64, oscillation: f64) -> Result<HorizonConstants> {
    if !(a > 0.0 && a < 1.0) {
        return arg(format!("exponent a = {a} must lie in (0,1)"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return arg(format!("epsilon {eps} must be positive"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return arg(format!("delta {delta} must be positive"));
    }
    if !(oscillation > 0.0 && oscillation.is_finite()) {
        return arg(format!("oscillation {oscillation} must be positive"));
    }
    if n == 0 {
        return arg("need at least one spin");
    }
    let nf = n as f64;
    let poly = nf.powi(3) * FRAC_PI_2.exp();
    let e2 = eps * eps;
    let log_t0 = ((a * oscillation * (1.0 + e2 / 3.0) * 3.0 * poly) / (4.0 * e2)).ln() / (1.0 - a);
    let t0 = log_t0.exp();
    let tau1 = (((nf + 1.0) * LN_2 + (1.0 / eps).ln()) / delta).powf(1.0 / a);
    let half = poly / 2.0;
    let tau2 = (half * oscillation)
        .powf(1.0 / (1.0 - a))
        .max(half * (3.0 * (2f64.powi(n as i32) + 1.0) / e2).ln());
    let tau3 = half * ((3.0 / e2).ln() + 4.0 * t0 + a * log_t0 + oscillation.ln());
    Ok(HorizonConstants {
        n,
        a,
        eps,
        delta,
        oscillation,
        log_t0,
        t0,
        tau1,
        tau2,
        tau3,
    })
}

fn check_c(c: f64, h_star: f64) -> Result<()> {
    if !(c >= h_star && c.is_finite() && h_star.is_finite()) {
        return arg(format!("threshold c = {c} must be finite and at least H* = {h_star}"));
    }
    Ok(())
}

/// Samples the annealing chain on `[0, horizon]`, recording every jump.
pub fn simulate_annealing(
    model: &EnergyModel,
    c: f64,
    h_star: f64,
    schedule: &Schedule,
    init: SpinConfig,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    schedule.validate()?;
    check_c(c, h_star)?;
    if init.n() != model.n() {
        return arg("start and model sizes differ");
    }
    if !(horizon >= 0.0) {
        return arg(format!("horizon {horizon} must be nonnegative"));
    }
    let mut rng = rng::stream(seed, 0);
    let mut w = Walker::new(model, init.bits());
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        t += next_tick(&mut rng);
        if t > horizon {
            break;
        }
        let beta = schedule.beta_at(t);
        if w.tick(model, &mut rng, |h| annealed_energy(h, beta, c, h_star)) {
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

/// `(state, energy)` at each ascending time from one annealing run.
fn anneal_states_at(
    model: &EnergyModel,
    c: f64,
    h_star: f64,
    schedule: &Schedule,
    init: u32,
    times: &[f64],
    rng: &mut rng::Rng,
) -> Vec<(u32, f64)> {
    let mut w = Walker::new(model, init);
    let mut out = Vec::with_capacity(times.len());
    let mut t = next_tick(rng);
    for &target in times {
        while t <= target {
            let beta = schedule.beta_at(t);
            w.tick(model, rng, |h| annealed_energy(h, beta, c, h_star));
            t += next_tick(rng);
        }
        out.push((w.bits, model.energy_bits(w.bits)));
    }
    out
}

/// One row of an exceedance curve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExceedanceRow {
    pub horizon: f64,
    pub start: String,
    /// Empirical `P(H(X_t) ≥ H* + δ)`.
    pub exceedance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub exceed_count: u64,
    pub runs: u64,
}

/// Empirical exceedance probabilities at each horizon, per start, without
/// the `δ < c - H*` check. Each run is observed at every horizon, so rows of
/// one start come from the same paths. Run `r` from the `k`-th start uses
/// stream `(seed, k·runs + r)`.
pub fn exceedance_curve(
    model: &EnergyModel,
    c: f64,
    h_star: f64,
    schedule: &Schedule,
    delta: f64,
    horizons: &[f64],
    runs: u64,
    starts: &[u32],
    seed: u64,
) -> Result<Vec<ExceedanceRow>> {
    schedule.validate()?;
    check_c(c, h_star)?;
    if horizons.is_empty() || horizons.iter().any(|t| !(*t >= 0.0)) || horizons.windows(2).any(|w| w[1] <= w[0]) {
        return arg("horizons must be nonempty, nonnegative and strictly increasing");
    }
    if runs == 0 {
        return arg("need at least one run");
    }
    if starts.is_empty() {
        return arg("start set is empty");
    }
    let n = model.n();
    let level = h_star + delta;
    let mut rows = Vec::new();
    for (k, &s) in starts.iter().enumerate() {
        SpinConfig::new(s, n)?;
        let paths: Vec<Vec<(u32, f64)>> = (0..runs)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng::stream(seed, k as u64 * runs + r);
                anneal_states_at(model, c, h_star, schedule, s, horizons, &mut rng)
            })
            .collect();
        for (g, &t) in horizons.iter().enumerate() {
            let count = paths.iter().filter(|p| p[g].1 >= level).count() as u64;
            let (lo, hi) = wilson_interval(count, runs, Z95);
            rows.push(ExceedanceRow {
                horizon: t,
                start: bitstring(s, n),
                exceedance: count as f64 / runs as f64,
                ci_low: lo,
                ci_high: hi,
                exceed_count: count,
                runs,
            });
        }
    }
    Ok(rows)
}

/// [`exceedance_curve`] under the requirement `0 < δ < c - H*`.
pub fn success_probability(
    model: &EnergyModel,
    c: f64,
    h_star: f64,
    schedule: &Schedule,
    delta: f64,
    horizons: &[f64],
    runs: u64,
    starts: &[u32],
    seed: u64,
) -> Result<Vec<ExceedanceRow>> {
    if !(delta > 0.0 && delta < c - h_star) {
        return arg(format!("delta {delta} must lie in (0, c - H*) = (0, {})", c - h_star));
    }
    exceedance_curve(model, c, h_star, schedule, delta, horizons, runs, starts, seed)
}
