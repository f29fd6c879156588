//! The landscape-modified Hamiltonian
//!
//! ```text
//! H^f(σ) = ∫_{H*}^{H(σ)} du / (α f((u - c)_+) + 1/β)
//! ```
//!
//! and tuning of the threshold `c`.
//!
//! `H^f` depends on `σ` only through `H(σ)`, so everything here is a map on
//! energies. Below `c` the integrand is the constant `β`; above `c` the
//! zero, linear and quadratic kinds have closed forms and the rest go through
//! adaptive Simpson quadrature.

use crate::error::{arg, Error, Result};
use crate::model::{EnergyModel, Landscape};
use crate::spin::SpinConfig;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Relative tolerance of the quadrature path.
pub const QUADRATURE_TOL: f64 = 1e-10;
/// Maximum bisection depth of the quadrature path.
pub const QUADRATURE_MAX_DEPTH: u32 = 60;

/// Piecewise-linear `f` through `(x_k, y_k)`, constant past the last knot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTabulated")]
pub struct Tabulated {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTabulated {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl TryFrom<RawTabulated> for Tabulated {
    type Error = crate::Error;

    fn try_from(r: RawTabulated) -> Result<Self> {
        Tabulated::new(r.xs, r.ys)
    }
}

impl Tabulated {
    /// Knots must start at `(0, 0)`, with `x` increasing and `y` non-decreasing.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.is_empty() {
            return arg("tabulated f needs equal, nonempty knot lists");
        }
        if xs[0] != 0.0 || ys[0] != 0.0 {
            return arg("tabulated f must satisfy f(0) = 0");
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().any(|x| !x.is_finite()) {
            return arg("tabulated f knots must be finite and strictly increasing");
        }
        if ys.windows(2).any(|w| w[1] < w[0]) || ys.iter().any(|y| !y.is_finite()) {
            return arg("tabulated f must be finite and non-decreasing");
        }
        Ok(Self { xs, ys })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let k = self.xs.partition_point(|&k| k <= x);
        if k == self.xs.len() {
            return *self.ys.last().unwrap();
        }
        let (x0, x1, y0, y1) = (self.xs[k - 1], self.xs[k], self.ys[k - 1], self.ys[k]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Choice of `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FKind {
    Zero,
    /// `f(x) = x`
    Linear,
    /// `f(x) = x²`
    Quadratic,
    /// `f(x) = √x`
    Sqrt,
    Custom(Tabulated),
}

impl FKind {
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            FKind::Zero => 0.0,
            FKind::Linear => x,
            FKind::Quadratic => x * x,
            FKind::Sqrt => x.sqrt(),
            FKind::Custom(t) => t.eval(x),
        }
    }
}

/// Parameters `(f, α, c, β)` and the lower integration limit `H*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModificationParams {
    pub f: FKind,
    pub alpha: f64,
    pub c: f64,
    pub beta: f64,
    pub h_star_ref: f64,
}

impl ModificationParams {
    pub fn new(f: FKind, alpha: f64, c: f64, beta: f64, h_star_ref: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return arg(format!("alpha = {alpha} must be finite and >= 0"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return arg(format!("beta = {beta} must be finite and > 0"));
        }
        if !c.is_finite() || !h_star_ref.is_finite() {
            return arg("c and H* reference must be finite");
        }
        if c < h_star_ref {
            return arg(format!("threshold c = {c} lies below H* reference {h_star_ref}"));
        }
        Ok(Self {
            f,
            alpha,
            c,
            beta,
            h_star_ref,
        })
    }

    /// Plain Metropolis at inverse temperature `β`: `H^f = β(H - H*)`.
    pub fn unmodified(beta: f64, h_star_ref: f64) -> Result<Self> {
        Self::new(FKind::Zero, 0.0, h_star_ref, beta, h_star_ref)
    }

    /// Quadratic `f` with `α = β`.
    pub fn quadratic(beta: f64, c: f64, h_star_ref: f64) -> Result<Self> {
        Self::new(FKind::Quadratic, beta, c, beta, h_star_ref)
    }

    /// Checks `c ≤ H_max` for an attached landscape.
    pub fn check_against(&self, land: &Landscape) -> Result<()> {
        if self.c > land.stats.h_max {
            return arg(format!("c = {} exceeds H_max = {}", self.c, land.stats.h_max));
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        matches!(self.f, FKind::Zero) || self.alpha == 0.0
    }

    /// `H^f` as a function of the energy `h`.
    pub fn modified(&self, h: f64) -> Result<f64> {
        if h < self.h_star_ref {
            return Err(Error::Domain(format!(
                "energy {h} below H* reference {}",
                self.h_star_ref
            )));
        }
        Ok(self.modified_unchecked(h))
    }

    #[inline]
    pub(crate) fn modified_unchecked(&self, h: f64) -> f64 {
        let (beta, alpha, c) = (self.beta, self.alpha, self.c);
        if self.is_identity() {
            return beta * (h - self.h_star_ref);
        }
        let below = beta * (h.min(c) - self.h_star_ref);
        if h <= c {
            return below;
        }
        let x = h - c;
        below
            + match &self.f {
                FKind::Quadratic => (beta / alpha).sqrt() * ((alpha * beta).sqrt() * x).atan(),
                FKind::Linear => (alpha * beta * x).ln_1p() / alpha,
                _ => self.above_c_quadrature(h),
            }
    }

    /// `∫_c^h du / (α f(u - c) + 1/β)` by adaptive Simpson.
    fn above_c_quadrature(&self, h: f64) -> f64 {
        let g = |u: f64| 1.0 / (self.alpha * self.f.eval(u - self.c) + 1.0 / self.beta);
        adaptive_simpson(&g, self.c, h, QUADRATURE_TOL, QUADRATURE_MAX_DEPTH)
    }

    /// The defining integral by quadrature only, split at `u = c`.
    pub fn modified_by_quadrature(&self, h: f64) -> Result<f64> {
        if h < self.h_star_ref {
            return Err(Error::Domain(format!("energy {h} below H* reference")));
        }
        let g = |u: f64| 1.0 / (self.alpha * self.f.eval(u - self.c) + 1.0 / self.beta);
        let lo = self.h_star_ref;
        let mid = self.c.clamp(lo, h);
        Ok(adaptive_simpson(&g, lo, mid, QUADRATURE_TOL, QUADRATURE_MAX_DEPTH)
            + adaptive_simpson(&g, mid, h, QUADRATURE_TOL, QUADRATURE_MAX_DEPTH))
    }
}

/// Adaptive Simpson with relative tolerance and a depth cap.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, max_depth: u32) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = (rel_tol * whole.abs()).max(f64::MIN_POSITIVE);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= 15.0 * tol {
        return left + right + err / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// `H^f(σ)` for a single configuration.
pub fn modified_energy(model: &EnergyModel, params: &ModificationParams, s: SpinConfig) -> Result<f64> {
    params.modified(model.energy(s)?)
}

/// `H^f` over all states, indexed by bits.
pub fn modified_energy_table(land: &Landscape, params: &ModificationParams) -> Result<Vec<f64>> {
    if land.stats.h_star < params.h_star_ref {
        return Err(Error::Domain(format!(
            "H* = {} lies below the reference {}",
            land.stats.h_star, params.h_star_ref
        )));
    }
    Ok(land
        .energies
        .par_iter()
        .map(|&h| params.modified_unchecked(h))
        .collect())
}

/// Outcome of setting `c = H* + offset`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CTuning {
    pub c: f64,
    pub offset: f64,
    /// True when the offset is below every conjunct that could be evaluated.
    pub valid: bool,
    /// `min_{LM \ GM} H - H*`, if a non-global local minimum exists.
    pub lm_gap: Option<f64>,
    /// `Δ`.
    pub delta: Option<f64>,
    /// `m / 4`, if the critical height was supplied.
    pub quarter_m: Option<f64>,
    pub warnings: Vec<String>,
}

/// Sets `c = H* + offset` and reports whether
/// `offset < (min_{LM\GM} H - H*) ∧ Δ ∧ (m/4)`.
///
/// Non-global local minima stand in for the unnamed set in the threshold
/// interval. The `m/4` conjunct is evaluated only when `m` is given.
pub fn tune_c(land: &Landscape, offset: f64, m: Option<f64>) -> Result<CTuning> {
    if !(offset > 0.0 && offset.is_finite()) {
        return arg(format!("offset {offset} must be positive and finite"));
    }
    let st = &land.stats;
    let lm_gap = land.min_non_global_energy().map(|e| e - st.h_star);
    let mut warnings = Vec::new();
    if lm_gap.is_none() {
        warnings.push("no non-global local minimum; validity rests on Δ (and m) only".into());
    }
    if st.delta.is_none() {
        warnings.push("flat landscape: Δ undefined, no offset is valid".into());
    }
    let quarter_m = m.map(|m| m / 4.0);
    if m.is_none() {
        warnings.push("critical height not supplied; m/4 conjunct skipped".into());
    }
    let valid = st.delta.is_some_and(|d| offset < d)
        && lm_gap.is_none_or(|g| offset < g)
        && quarter_m.is_none_or(|q| offset < q);
    Ok(CTuning {
        c: st.h_star + offset,
        offset,
        valid,
        lm_gap,
        delta: st.delta,
        quarter_m,
        warnings,
    })
}

/// Half the smallest available conjunct; a valid offset whenever one exists.
/// A non-positive `m` is skipped with a warning.
pub fn auto_offset(land: &Landscape, m: Option<f64>) -> Result<(f64, Vec<String>)> {
    let mut warnings = Vec::new();
    let Some(delta) = land.stats.delta else {
        return arg("flat landscape: no threshold offset exists");
    };
    let mut bound = delta;
    if let Some(g) = land.min_non_global_energy().map(|e| e - land.stats.h_star) {
        bound = bound.min(g);
    }
    match m {
        Some(m) if m > 0.0 => bound = bound.min(m / 4.0),
        Some(_) => warnings.push("critical height is zero; m/4 conjunct skipped".into()),
        None => warnings.push("critical height not supplied; m/4 conjunct skipped".into()),
    }
    Ok((bound / 2.0, warnings))
}
