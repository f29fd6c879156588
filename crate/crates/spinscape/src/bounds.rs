//! Explicit inequalities relating landscape quantities to the dynamics.
//!
//! Large quantities are returned as natural logarithms so that they stay
//! finite at low temperature.

use crate::error::{arg, Result};
use std::f64::consts::{FRAC_PI_2, LN_2};

/// `(2/N³) e^{-m^f}`, a lower bound on `λ₂(-L^f)`.
pub fn gap_lower_bound(n: usize, m_f: f64) -> f64 {
    2.0 / (n as f64).powi(3) * (-m_f).exp()
}

/// `(N³/2) e^{π/2}`: relaxation time bound for the capped modification.
pub fn rapid_relaxation_bound(n: usize) -> f64 {
    (n as f64).powi(3) / 2.0 * FRAC_PI_2.exp()
}

/// `ln(4^{-N} e^{βm})`, a lower bound on `ln t_rel` of the unmodified chain.
pub fn log_torpid_relaxation_lower(n: usize, beta: f64, m: f64) -> f64 {
    beta * m - n as f64 * 4f64.ln()
}

/// `ln(e^{βm} / (N 2^{N-1}))`, a lower bound on the log mean tunneling time
/// from the deepest non-global local minimum.
pub fn log_tunneling_lower(n: usize, beta: f64, m: f64) -> f64 {
    beta * m - (n as f64).ln() - (n as f64 - 1.0) * LN_2
}

/// `t_rel log(1/(2ε))`, a lower bound on the mixing time to the chain's own
/// stationary law.
pub fn mixing_lower_from_relaxation(t_rel: f64, eps: f64) -> f64 {
    t_rel * (1.0 / (2.0 * eps)).ln()
}

/// `(2^N - 1)(e^{-βΔ} + e^{-β min(c - H*, Δ)})`: bound on
/// `‖π^f - π_β‖_TV` for a unique ground state.
pub fn tv_proximity_bound(n: usize, beta: f64, delta: f64, c_gap: f64) -> f64 {
    let states = (2f64).powi(n as i32) - 1.0;
    states * ((-beta * delta).exp() + (-beta * c_gap.min(delta)).exp())
}

/// Smallest `β` above which the landscape conditions give both
/// `‖π^f - π_β‖_TV ≤ ε/2` and rapid mixing:
/// `(N ln 2 + ln(4/ε)) / min(c - H*, Δ, m/4)`.
///
/// Pass `m = None` when the critical height is unknown; that conjunct is
/// then dropped.
pub fn beta_threshold(n: usize, eps: f64, c_gap: f64, delta: f64, m: Option<f64>) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return arg(format!("epsilon {eps} must lie in (0,1)"));
    }
    let mut scale = c_gap.min(delta);
    if let Some(m) = m {
        scale = scale.min(m / 4.0);
    }
    if !(scale > 0.0) {
        return arg("threshold needs c - H*, Δ and m positive");
    }
    Ok((n as f64 * LN_2 + (4.0 / eps).ln()) / scale)
}
