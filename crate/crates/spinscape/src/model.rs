//! Energy models and exhaustive landscape statistics.

use crate::error::{arg, check_capacity, Result};
use crate::graph::GraphSpec;
use crate::rem::RemDisorder;
use crate::spin::{SpinConfig, MAX_SPINS};
use rayon::prelude::*;
use serde::Serialize;

/// Default limit for exhaustive enumeration (`2^24` states).
pub const ENUMERATION_LIMIT: usize = 24;

/// Default tie tolerance for computed Ising energies.
pub const ISING_TIE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    /// Explicit energy per state, indexed by bits.
    Table(Vec<f64>),
    Ising(GraphSpec),
    Rem(RemDisorder),
}

/// A Hamiltonian on `{-1,+1}^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyModel {
    pub kind: ModelKind,
    n: usize,
    tie_tol: f64,
}

impl EnergyModel {
    pub fn table(energies: Vec<f64>) -> Result<Self> {
        let len = energies.len();
        if len < 2 || !len.is_power_of_two() {
            return arg(format!("table length {len} is not 2^N with N >= 1"));
        }
        let n = len.trailing_zeros() as usize;
        if n > MAX_SPINS {
            return arg("table too large");
        }
        if let Some(i) = energies.iter().position(|e| !e.is_finite()) {
            return arg(format!("energy at state {i} is not finite"));
        }
        Ok(Self {
            kind: ModelKind::Table(energies),
            n,
            tie_tol: 0.0,
        })
    }

    pub fn ising(graph: GraphSpec) -> Result<Self> {
        let n = graph.n;
        if n > MAX_SPINS {
            return arg(format!("Ising model on {n} spins exceeds {MAX_SPINS}"));
        }
        Ok(Self {
            kind: ModelKind::Ising(graph),
            n,
            tie_tol: ISING_TIE_TOL,
        })
    }

    pub fn rem(disorder: RemDisorder) -> Self {
        let n = disorder.n;
        Self {
            kind: ModelKind::Rem(disorder),
            n,
            tie_tol: 0.0,
        }
    }

    /// Overrides the tolerance used to detect energy ties.
    pub fn with_tie_tolerance(mut self, tol: f64) -> Result<Self> {
        if !(tol >= 0.0 && tol.is_finite()) {
            return arg(format!("tie tolerance {tol} must be finite and nonnegative"));
        }
        self.tie_tol = tol;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tie_tolerance(&self) -> f64 {
        self.tie_tol
    }

    pub fn energy(&self, s: SpinConfig) -> Result<f64> {
        if s.n() != self.n {
            return arg(format!("config has {} spins, model has {}", s.n(), self.n));
        }
        Ok(self.energy_bits(s.bits()))
    }

    #[inline]
    pub fn energy_bits(&self, bits: u32) -> f64 {
        match &self.kind {
            ModelKind::Table(t) => t[bits as usize],
            ModelKind::Ising(g) => g.energy_bits(bits),
            ModelKind::Rem(d) => d.energy_bits(bits),
        }
    }

    /// `H(σ^{(i)}) - H(σ)`; O(deg) for Ising models.
    #[inline]
    pub fn flip_delta(&self, bits: u32, i: usize) -> f64 {
        match &self.kind {
            ModelKind::Ising(g) => g.flip_delta(bits, i),
            _ => self.energy_bits(bits ^ (1 << i)) - self.energy_bits(bits),
        }
    }

    /// Energy of every state, indexed by bits.
    pub fn energies(&self) -> Result<Vec<f64>> {
        self.energies_with_limit(ENUMERATION_LIMIT)
    }

    pub fn energies_with_limit(&self, limit: usize) -> Result<Vec<f64>> {
        check_capacity(
            "exhaustive enumeration",
            self.n,
            limit,
            "supply H* externally for larger systems",
        )?;
        if let ModelKind::Table(t) = &self.kind {
            return Ok(t.clone());
        }
        Ok((0..1u32 << self.n)
            .into_par_iter()
            .map(|b| self.energy_bits(b))
            .collect())
    }

    /// Enumerates every state and computes the landscape statistics.
    pub fn landscape(&self) -> Result<Landscape> {
        self.landscape_with_limit(ENUMERATION_LIMIT)
    }

    pub fn landscape_with_limit(&self, limit: usize) -> Result<Landscape> {
        let energies = self.energies_with_limit(limit)?;
        let stats = LandscapeStats::compute(self.n, &energies, self.tie_tol);
        Ok(Landscape {
            n: self.n,
            energies,
            stats,
        })
    }
}

/// Summary of an enumerated landscape.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LandscapeStats {
    pub h_star: f64,
    pub h_max: f64,
    /// `min{H - H* : H > H*}`; `None` when every state is a global minimum.
    pub delta: Option<f64>,
    /// Smallest uphill step out of a local minimum; `None` when it is not positive.
    pub min_uphill: Option<f64>,
    pub local_minima: Vec<u32>,
    pub global_minima: Vec<u32>,
    pub unique_global_min: bool,
    pub tie_tol: f64,
}

impl LandscapeStats {
    pub fn compute(n: usize, energies: &[f64], tie_tol: f64) -> Self {
        let (h_star, h_max) = energies
            .par_iter()
            .fold(
                || (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), &e| (lo.min(e), hi.max(e)),
            )
            .reduce(
                || (f64::INFINITY, f64::NEG_INFINITY),
                |a, b| (a.0.min(b.0), a.1.max(b.1)),
            );
        let delta = energies
            .par_iter()
            .filter(|&&e| e > h_star + tie_tol)
            .map(|&e| e - h_star)
            .reduce(|| f64::INFINITY, f64::min);
        let delta = delta.is_finite().then_some(delta);

        // Per-state minimum uphill step; NaN marks "not a local minimum".
        let uphill: Vec<f64> = (0..energies.len())
            .into_par_iter()
            .map(|s| {
                let e = energies[s];
                let mut best = f64::INFINITY;
                for i in 0..n {
                    let d = energies[s ^ (1 << i)] - e;
                    if d < -tie_tol {
                        return f64::NAN;
                    }
                    best = best.min(d);
                }
                best
            })
            .collect();
        let local_minima: Vec<u32> = (0..energies.len() as u32)
            .filter(|&s| !uphill[s as usize].is_nan())
            .collect();
        let global_minima: Vec<u32> = local_minima
            .iter()
            .copied()
            .filter(|&s| energies[s as usize] <= h_star + tie_tol)
            .collect();
        let min_uphill = local_minima
            .iter()
            .map(|&s| uphill[s as usize])
            .fold(f64::INFINITY, f64::min);
        let min_uphill = (min_uphill > tie_tol && min_uphill.is_finite()).then_some(min_uphill);
        Self {
            h_star,
            h_max,
            delta,
            min_uphill,
            unique_global_min: global_minima.len() == 1,
            local_minima,
            global_minima,
            tie_tol,
        }
    }

    pub fn is_global(&self, energy: f64) -> bool {
        energy <= self.h_star + self.tie_tol
    }

    /// Lowest-index global minimum, written `σ*`.
    pub fn ground(&self) -> u32 {
        self.global_minima[0]
    }

    /// Local minima that are not global.
    pub fn non_global_minima(&self) -> Vec<u32> {
        self.local_minima
            .iter()
            .copied()
            .filter(|s| self.global_minima.binary_search(s).is_err())
            .collect()
    }
}

/// A model's full energy table plus its statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Landscape {
    pub n: usize,
    pub energies: Vec<f64>,
    pub stats: LandscapeStats,
}

impl Landscape {
    pub fn from_table(energies: Vec<f64>) -> Result<Self> {
        EnergyModel::table(energies)?.landscape()
    }

    pub fn size(&self) -> usize {
        self.energies.len()
    }

    pub fn energy(&self, bits: u32) -> f64 {
        self.energies[bits as usize]
    }

    /// Lowest energy among non-global local minima.
    pub fn min_non_global_energy(&self) -> Option<f64> {
        self.stats
            .non_global_minima()
            .iter()
            .map(|&s| self.energy(s))
            .reduce(f64::min)
    }

    /// Membership mask of the global minima.
    pub fn ground_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.size()];
        for &g in &self.stats.global_minima {
            m[g as usize] = true;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn naive(n: usize, e: &[f64]) -> (f64, f64, Option<f64>, Vec<u32>, Vec<u32>) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &x in e {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        let mut delta: Option<f64> = None;
        for &x in e {
            if x > lo {
                delta = Some(delta.map_or(x - lo, |d: f64| d.min(x - lo)));
            }
        }
        let mut lm = Vec::new();
        for s in 0..e.len() {
            let mut ok = true;
            for i in 0..n {
                if e[s ^ (1 << i)] < e[s] {
                    ok = false;
                }
            }
            if ok {
                lm.push(s as u32);
            }
        }
        let gm = (0..e.len() as u32).filter(|&s| e[s as usize] == lo).collect();
        (lo, hi, delta, lm, gm)
    }

    #[test]
    fn four_state_table() {
        let l = Landscape::from_table(vec![0.0, 2.0, 3.0, 1.0]).unwrap();
        assert_eq!(l.stats.h_star, 0.0);
        assert_eq!(l.stats.h_max, 3.0);
        assert_eq!(l.stats.delta, Some(1.0));
        assert_eq!(l.stats.global_minima, vec![0]);
        assert_eq!(l.stats.local_minima, vec![0, 3]);
        assert_eq!(l.stats.non_global_minima(), vec![3]);
        assert_eq!(l.min_non_global_energy(), Some(1.0));
        assert_eq!(l.stats.min_uphill, Some(1.0));
        assert!(l.stats.unique_global_min);
    }

    #[test]
    fn k4_unique_ground() {
        let m = EnergyModel::ising(GraphSpec::complete(4, 1.0, 0.5).unwrap()).unwrap();
        let l = m.landscape().unwrap();
        assert_eq!(l.stats.global_minima, vec![0b1111]);
        assert!(l.stats.unique_global_min);
        // oracle: exhaustive scan of the 16 energies
        let best = (0..16u32)
            .min_by(|&a, &b| m.energy_bits(a).total_cmp(&m.energy_bits(b)))
            .unwrap();
        assert_eq!(best, 0b1111);
    }

    #[test]
    fn flat_landscape() {
        let l = Landscape::from_table(vec![5.0; 8]).unwrap();
        assert_eq!(l.stats.delta, None);
        assert_eq!(l.stats.min_uphill, None);
        assert_eq!(l.stats.local_minima.len(), 8);
        assert!(!l.stats.unique_global_min);
    }

    #[test]
    fn capacity_error() {
        let m = EnergyModel::ising(GraphSpec::complete(6, 1.0, 0.5).unwrap()).unwrap();
        assert!(matches!(
            m.landscape_with_limit(5),
            Err(crate::Error::Capacity { .. })
        ));
    }

    #[test]
    fn table_validation() {
        assert!(EnergyModel::table(vec![0.0; 3]).is_err());
        assert!(EnergyModel::table(vec![0.0]).is_err());
        assert!(EnergyModel::table(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn agrees_with_naive_reference() {
        for seed in 0..100u64 {
            let mut rng = rng::seeded(seed);
            let n = rng.random_range(1..=6);
            // Coarse integer energies so that ties actually occur.
            let e: Vec<f64> = (0..1 << n).map(|_| rng.random_range(0..6) as f64).collect();
            let l = Landscape::from_table(e.clone()).unwrap();
            let (lo, hi, delta, lm, gm) = naive(n, &e);
            assert_eq!(l.stats.h_star, lo);
            assert_eq!(l.stats.h_max, hi);
            assert_eq!(l.stats.delta, delta);
            assert_eq!(l.stats.local_minima, lm);
            assert_eq!(l.stats.global_minima, gm);
        }
    }

    proptest! {
        #[test]
        fn bounds_and_minima(n in 1usize..=6, seed in any::<u64>()) {
            let mut rng = rng::seeded(seed);
            let e: Vec<f64> = (0..1 << n).map(|_| rng.random::<f64>()).collect();
            let l = Landscape::from_table(e.clone()).unwrap();
            for &x in &e {
                prop_assert!(l.stats.h_star <= x && x <= l.stats.h_max);
            }
            for &s in &l.stats.local_minima {
                for i in 0..n {
                    prop_assert!(e[s as usize ^ (1 << i)] >= e[s as usize]);
                }
            }
            for g in &l.stats.global_minima {
                prop_assert!(l.stats.local_minima.contains(g));
            }
            prop_assert_eq!(l.stats.unique_global_min, l.stats.global_minima.len() == 1);
            if let Some(d) = l.stats.delta { prop_assert!(d > 0.0); }
        }
    }
}
