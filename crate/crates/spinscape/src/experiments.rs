//! Instance-level reports: inequality checks at one temperature, β-sweeps
//! for slope extraction, and disorder-ensemble statistics for the REM.

use crate::bounds::{
    beta_threshold, gap_lower_bound, log_torpid_relaxation_lower, log_tunneling_lower,
    mixing_lower_from_relaxation, rapid_relaxation_bound, tv_proximity_bound,
};
use crate::critical::{
    classical_m, deepest_local_min, modified_m, modified_m_upper_bound, path_height, DeepestMinimum,
    ModifiedHeight, SaddleReport, PAIRWISE_LIMIT,
};
use crate::error::{arg, Result};
use crate::exact::{tv_distance, ExactChain};
use crate::landscape::{tune_c, CTuning, FKind, ModificationParams};
use crate::model::{Landscape, LandscapeStats};
use crate::rem::{preset_threshold, RemDisorder};
use crate::rng;
use crate::spin::bitstring;
use crate::stats::{least_squares, LineFit};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, LN_2};

/// Mixing times are computed only up to this size.
pub const MIXING_LIMIT: usize = 8;

/// One evaluated inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Flag {
    pub name: &'static str,
    pub statement: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl Flag {
    fn le(name: &'static str, statement: &'static str, lhs: f64, rhs: f64) -> Self {
        Self {
            name,
            statement,
            lhs,
            rhs,
            pass: lhs <= rhs,
        }
    }

    fn ge(name: &'static str, statement: &'static str, lhs: f64, rhs: f64) -> Self {
        Self {
            name,
            statement,
            lhs,
            rhs,
            pass: lhs >= rhs,
        }
    }
}

/// An inequality whose hypotheses do not hold at the instance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Skipped {
    pub name: &'static str,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainSummary {
    pub lambda2: f64,
    pub t_rel: f64,
    /// Low eigenvalues recomputed by inverse iteration.
    pub refined: usize,
}

impl ChainSummary {
    fn of(c: &ExactChain) -> Self {
        Self {
            lambda2: c.spectral_gap(),
            t_rel: c.relaxation_time(),
            refined: c.refined,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TunnelingSummary {
    pub start: String,
    pub target: String,
    pub original: f64,
    pub modified: f64,
    pub log_original_lower: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingSummary {
    pub eps: f64,
    /// Unmodified chain to its own stationary law.
    pub original: Option<f64>,
    pub original_lower: f64,
    /// Modified chain to the unmodified Gibbs law.
    pub modified_to_gibbs: Option<f64>,
    pub modified_floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub n: usize,
    pub beta: f64,
    pub eps: f64,
    pub c: f64,
    pub f: FKind,
    pub alpha: f64,
    pub landscape: LandscapeStats,
    pub tuning: Option<CTuning>,
    pub saddle: SaddleReport,
    pub deepest_minimum: String,
    pub path_height: Option<f64>,
    pub m_f_second_level: f64,
    pub original: ChainSummary,
    pub modified: ChainSummary,
    pub tv_floor: f64,
    pub tv_bound: Option<f64>,
    pub beta_threshold: Option<f64>,
    pub tunneling: Option<TunnelingSummary>,
    pub mixing: Option<MixingSummary>,
    pub flags: Vec<Flag>,
    pub skipped: Vec<Skipped>,
    pub warnings: Vec<String>,
}

impl AnalyzeReport {
    pub fn all_pass(&self) -> bool {
        self.flags.iter().all(|f| f.pass)
    }
}

/// Exact analysis of both chains at the temperature of `modified`, with
/// every applicable inequality evaluated.
pub fn analyze(land: &Landscape, modified: &ModificationParams, eps: f64) -> Result<AnalyzeReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return arg(format!("epsilon {eps} must lie in (0,1)"));
    }
    let n = land.n;
    let st = &land.stats;
    let beta = modified.beta;
    let mut warnings = Vec::new();
    let mut flags = Vec::new();
    let mut skipped = Vec::new();
    if (modified.h_star_ref - st.h_star).abs() > 0.0 {
        warnings.push(format!(
            "H* reference {} differs from the enumerated H* {}",
            modified.h_star_ref, st.h_star
        ));
    }
    modified.check_against(land)?;

    let classical = classical_m(land)?;
    let m = classical.m;
    let deepest: DeepestMinimum = deepest_local_min(land)?;
    let plain = ModificationParams::unmodified(beta, st.h_star)?;
    let chain0 = ExactChain::build(land, &plain)?;
    let chainf = ExactChain::build(land, modified)?;
    let mod_height: Option<ModifiedHeight> = if n <= PAIRWISE_LIMIT {
        Some(modified_m(n, &chainf.hf)?)
    } else {
        warnings.push(format!("N > {PAIRWISE_LIMIT}: m^f not computed"));
        None
    };
    let ph = if n <= PAIRWISE_LIMIT {
        Some(path_height(n, &chainf.hf)?.m_f)
    } else {
        None
    };
    let bound = modified_m_upper_bound(land, &chainf.hf);
    if let Some(w) = &bound.warning {
        warnings.push(w.clone());
    }
    let saddle = SaddleReport::new(n, &classical, mod_height.as_ref(), Some(&bound));

    let c_gap = modified.c - st.h_star;
    let tuning = if c_gap > 0.0 {
        let t = tune_c(land, c_gap, Some(m))?;
        if !t.valid {
            warnings.push(format!("c - H* = {c_gap} violates the threshold conditions"));
        }
        warnings.extend(t.warnings.iter().cloned());
        Some(t)
    } else {
        warnings.push("c equals H*: threshold conditions cannot hold".into());
        None
    };
    let c_valid = tuning.as_ref().is_some_and(|t| t.valid);
    let capped = modified.f == FKind::Quadratic && modified.alpha == modified.beta;

    // Relaxation.
    flags.push(Flag::ge(
        "torpid_relaxation",
        "ln t_rel(original) >= beta*m - N ln 4",
        chain0.relaxation_time().ln(),
        log_torpid_relaxation_lower(n, beta, m),
    ));
    match &mod_height {
        Some(h) => flags.push(Flag::ge(
            "gap_bound",
            "lambda2(modified) >= (2/N^3) exp(-m^f)",
            chainf.spectral_gap(),
            gap_lower_bound(n, h.m_f),
        )),
        None => skipped.push(Skipped {
            name: "gap_bound",
            reason: "m^f not computed".into(),
        }),
    }
    if let Some(ph) = ph {
        flags.push(Flag::ge(
            "gap_bound_path_height",
            "lambda2(modified) >= (2/N^3) exp(-max(Elev^f - H^f(start)))",
            chainf.spectral_gap(),
            gap_lower_bound(n, ph),
        ));
    }
    if capped && c_valid && st.unique_global_min {
        if let Some(h) = &mod_height {
            flags.push(Flag::le("m_f_cap", "m^f <= pi/2", h.m_f, FRAC_PI_2));
        }
        flags.push(Flag::ge(
            "capped_gap_bound",
            "lambda2(modified) >= (2/N^3) exp(-pi/2)",
            chainf.spectral_gap(),
            gap_lower_bound(n, FRAC_PI_2),
        ));
        flags.push(Flag::le(
            "rapid_relaxation",
            "t_rel(modified) <= (N^3/2) exp(pi/2)",
            chainf.relaxation_time(),
            rapid_relaxation_bound(n),
        ));
    } else {
        skipped.push(Skipped {
            name: "rapid_relaxation",
            reason: "needs quadratic f with alpha = beta, valid c and a unique ground state".into(),
        });
    }

    // Stationary proximity.
    let tv_floor = tv_distance(&chainf.pi, &chain0.pi)?;
    let mut tv_bound = None;
    let mut threshold = None;
    match (st.unique_global_min, st.delta) {
        (true, Some(delta)) if c_gap > 0.0 => {
            let b = tv_proximity_bound(n, beta, delta, c_gap);
            tv_bound = Some(b);
            flags.push(Flag::le(
                "tv_proximity",
                "TV(pi^f, pi) <= (2^N-1)(exp(-beta*Delta) + exp(-beta*min(c-H*, Delta)))",
                tv_floor,
                b,
            ));
            let thr = beta_threshold(n, eps, c_gap, delta, (m > 0.0).then_some(m))?;
            threshold = Some(thr);
            if beta >= thr {
                flags.push(Flag::le("tv_half_eps", "TV(pi^f, pi) <= eps/2", tv_floor, eps / 2.0));
            } else {
                skipped.push(Skipped {
                    name: "tv_half_eps",
                    reason: format!("beta = {beta} below the threshold {thr}"),
                });
            }
        }
        _ => skipped.push(Skipped {
            name: "tv_proximity",
            reason: "needs a unique ground state, Delta defined and c > H*".into(),
        }),
    }

    // Tunneling from the deepest non-global local minimum.
    let ground = st.ground();
    let tunneling = if st.unique_global_min && deepest.state != ground {
        let e0 = chain0.mean_hitting_time(deepest.state, &[ground])?;
        let ef = chainf.mean_hitting_time(deepest.state, &[ground])?;
        let lower = log_tunneling_lower(n, beta, m);
        flags.push(Flag::ge(
            "torpid_tunneling",
            "ln E[tau] (original, deepest minimum) >= beta*m - ln(N 2^(N-1))",
            e0.value.ln(),
            lower,
        ));
        Some(TunnelingSummary {
            start: bitstring(deepest.state, n),
            target: bitstring(ground, n),
            original: e0.value,
            modified: ef.value,
            log_original_lower: lower,
        })
    } else {
        skipped.push(Skipped {
            name: "torpid_tunneling",
            reason: "needs a unique ground state and a non-global local minimum".into(),
        });
        None
    };

    let mixing = if n <= MIXING_LIMIT {
        let mt0 = chain0.mixing_time(&chain0.pi, eps)?;
        let lower = mixing_lower_from_relaxation(chain0.relaxation_time(), eps);
        if let Some(t) = mt0.time {
            flags.push(Flag::ge(
                "torpid_mixing",
                "t_mix(original) >= t_rel(original) ln(1/(2 eps))",
                t,
                lower,
            ));
        }
        let mtf = chainf.mixing_time(&chain0.pi, eps)?;
        Some(MixingSummary {
            eps,
            original: mt0.time,
            original_lower: lower,
            modified_to_gibbs: mtf.time,
            modified_floor: mtf.floor,
        })
    } else {
        skipped.push(Skipped {
            name: "torpid_mixing",
            reason: format!("mixing times computed only for N <= {MIXING_LIMIT}"),
        });
        None
    };

    Ok(AnalyzeReport {
        n,
        beta,
        eps,
        c: modified.c,
        f: modified.f.clone(),
        alpha: modified.alpha,
        landscape: st.clone(),
        tuning,
        saddle,
        deepest_minimum: bitstring(deepest.state, n),
        path_height: ph,
        m_f_second_level: bound.second_level,
        original: ChainSummary::of(&chain0),
        modified: ChainSummary::of(&chainf),
        tv_floor,
        tv_bound,
        beta_threshold: threshold,
        tunneling,
        mixing,
        flags,
        skipped,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub t_rel_original: f64,
    pub lambda2_original: f64,
    pub t_rel_modified: f64,
    pub lambda2_modified: f64,
    /// `(2/N³) e^{-m^f}` when `m^f` is available.
    pub gap_bound: Option<f64>,
    pub m: f64,
    pub m_f: Option<f64>,
    pub tv_floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub c: f64,
    pub rows: Vec<SweepRow>,
    /// Least-squares fit of `ln t_rel` against `β` for each chain.
    pub fit_original: LineFit,
    pub fit_modified: LineFit,
    pub m: f64,
}

/// Exact relaxation times over a β-grid; `make(β)` builds the modified
/// parameters at each point. Points run in parallel and are reported in
/// grid order.
pub fn sweep(
    land: &Landscape,
    betas: &[f64],
    make: impl Fn(f64) -> Result<ModificationParams> + Sync,
) -> Result<SweepReport> {
    if betas.len() < 5 {
        return arg(format!("a sweep needs at least 5 grid points, got {}", betas.len()));
    }
    if betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        return arg("grid values must be positive and finite");
    }
    let m = classical_m(land)?.m;
    let rows: Vec<Result<SweepRow>> = betas
        .par_iter()
        .map(|&beta| {
            let p = make(beta)?;
            let c0 = ExactChain::build(land, &ModificationParams::unmodified(beta, land.stats.h_star)?)?;
            let cf = ExactChain::build(land, &p)?;
            let m_f = if land.n <= PAIRWISE_LIMIT {
                Some(modified_m(land.n, &cf.hf)?.m_f)
            } else {
                None
            };
            Ok(SweepRow {
                beta,
                t_rel_original: c0.relaxation_time(),
                lambda2_original: c0.spectral_gap(),
                t_rel_modified: cf.relaxation_time(),
                lambda2_modified: cf.spectral_gap(),
                gap_bound: m_f.map(|x| gap_lower_bound(land.n, x)),
                m,
                m_f,
                tv_floor: tv_distance(&cf.pi, &c0.pi)?,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let fit = |f: &dyn Fn(&SweepRow) -> f64| {
        let ys: Vec<f64> = rows.iter().map(|r| f(r).ln()).collect();
        least_squares(betas, &ys)
    };
    let fit_original = fit(&|r| r.t_rel_original).ok_or_else(|| crate::Error::Argument("degenerate grid".into()))?;
    let fit_modified = fit(&|r| r.t_rel_modified).ok_or_else(|| crate::Error::Argument("degenerate grid".into()))?;
    let c = make(betas[0])?.c;
    Ok(SweepReport {
        c,
        rows,
        fit_original,
        fit_modified,
        m,
    })
}

/// Statistics of one REM disorder draw.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemDraw {
    pub draw: u64,
    pub seed: u64,
    pub min_h: f64,
    pub max_x_over_sqrt_n: f64,
    /// Smallest `|H(σ) - H(σ')|` over all pairs `σ ≠ σ'`.
    pub min_gap: f64,
    pub preset_c: f64,
    /// `c > min H`.
    pub c_above_ground: bool,
    /// `c ≤ min_{LM\GM} H` as well.
    pub c_in_interval: bool,
    /// `min H ∈ [-N√(2 ln 2) - ln N, -N√(2 ln 2) + 2 ln N]`.
    pub min_h_in_window: bool,
    pub gap_event: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemStudy {
    pub n: usize,
    pub draws: Vec<RemDraw>,
    pub seed: u64,
    pub sqrt_2ln2: f64,
    pub frac_min_h_in_window: f64,
    pub frac_max_x_in_band: f64,
    pub band: (f64, f64),
    pub frac_c_above_ground: f64,
    pub frac_c_in_interval: f64,
    pub frac_gap_event: f64,
}

/// Disorder seed of draw `k` for master seed `seed`.
pub fn rem_draw_seed(seed: u64, k: u64) -> u64 {
    rng::derive(seed, k)
}

/// Smallest gap between any two entries.
pub fn min_pairwise_gap(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Ensemble statistics over `draws` independent disorders. `band` is the
/// interval tested for `max X/√N`.
pub fn rem_study(n: usize, draws: u64, seed: u64, band: (f64, f64)) -> Result<RemStudy> {
    crate::error::check_capacity("REM study", n, crate::model::ENUMERATION_LIMIT, "")?;
    if n < 2 {
        return arg("REM study needs N >= 2");
    }
    if draws < 30 {
        return arg(format!("a REM study needs at least 30 draws, got {draws}"));
    }
    let nf = n as f64;
    let s2 = (2.0 * LN_2).sqrt();
    let centre = -nf * s2;
    let c = preset_threshold(n);
    let rows: Vec<Result<RemDraw>> = (0..draws)
        .into_par_iter()
        .map(|k| {
            let ds = rem_draw_seed(seed, k);
            let d = RemDisorder::generate(n, ds)?;
            let energies: Vec<f64> = d.values.iter().map(|x| -nf.sqrt() * x).collect();
            let stats = LandscapeStats::compute(n, &energies, 0.0);
            let min_h = stats.h_star;
            let max_x = d.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min_gap = min_pairwise_gap(&energies);
            let lowest_other = stats
                .non_global_minima()
                .iter()
                .map(|&s| energies[s as usize])
                .fold(f64::INFINITY, f64::min);
            Ok(RemDraw {
                draw: k,
                seed: ds,
                min_h,
                max_x_over_sqrt_n: max_x / nf.sqrt(),
                min_gap,
                preset_c: c,
                c_above_ground: c > min_h,
                c_in_interval: c > min_h && c <= lowest_other,
                min_h_in_window: min_h >= centre - nf.ln() && min_h <= centre + 2.0 * nf.ln(),
                gap_event: min_gap >= nf.powf(0.25),
            })
        })
        .collect();
    let draws_v = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let frac = |f: &dyn Fn(&RemDraw) -> bool| draws_v.iter().filter(|d| f(d)).count() as f64 / draws as f64;
    Ok(RemStudy {
        n,
        seed,
        sqrt_2ln2: s2,
        frac_min_h_in_window: frac(&|d| d.min_h_in_window),
        frac_max_x_in_band: frac(&|d| d.max_x_over_sqrt_n >= band.0 && d.max_x_over_sqrt_n <= band.1),
        band,
        frac_c_above_ground: frac(&|d| d.c_above_ground),
        frac_c_in_interval: frac(&|d| d.c_in_interval),
        frac_gap_event: frac(&|d| d.gap_event),
        draws: draws_v,
    })
}
