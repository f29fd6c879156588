//! Interaction graphs for the Ising models.

use crate::error::{arg, Result};
use crate::rng;
use crate::spin::SpinConfig;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Ising couplings on a simple graph: `H = -(J/2) Σ_{edges} σ_v σ_w - (h/2) Σ_v σ_v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub j: f64,
    pub h: f64,
    #[serde(skip)]
    adjacency: Vec<Vec<usize>>,
}

impl GraphSpec {
    /// Validates and normalises the edge list (each pair stored as `(min, max)`).
    pub fn new(n: usize, edges: Vec<(usize, usize)>, j: f64, h: f64) -> Result<Self> {
        if n == 0 {
            return arg("graph needs at least one vertex");
        }
        if !(j > 0.0 && j.is_finite()) {
            return arg(format!("coupling J must be positive and finite, got {j}"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return arg(format!("field h must be positive and finite, got {h}"));
        }
        let mut seen = HashSet::new();
        let mut norm = Vec::with_capacity(edges.len());
        for (v, w) in edges {
            if v == w {
                return arg(format!("self-loop at vertex {v}"));
            }
            if v >= n || w >= n {
                return arg(format!("edge ({v},{w}) out of range for N = {n}"));
            }
            let e = (v.min(w), v.max(w));
            if !seen.insert(e) {
                return arg(format!("duplicate edge ({},{})", e.0, e.1));
            }
            norm.push(e);
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(v, w) in &norm {
            adjacency[v].push(w);
            adjacency[w].push(v);
        }
        Ok(Self {
            n,
            edges: norm,
            j,
            h,
            adjacency,
        })
    }

    /// Complete graph `K_N`.
    pub fn complete(n: usize, j: f64, h: f64) -> Result<Self> {
        let mut edges = Vec::new();
        for v in 0..n {
            for w in v + 1..n {
                edges.push((v, w));
            }
        }
        Self::new(n, edges, j, h)
    }

    /// Uniform simple `r`-regular graph by the pairing model with rejection.
    pub fn random_regular(n: usize, r: usize, j: f64, h: f64, seed: u64) -> Result<Self> {
        if r < 3 {
            return arg(format!("degree r = {r} must be at least 3"));
        }
        if n <= r {
            return arg(format!("need N > r, got N = {n}, r = {r}"));
        }
        if (n * r) % 2 == 1 {
            return arg(format!("N·r = {} is odd", n * r));
        }
        let mut rng = rng::seeded(seed);
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, r)).collect();
        const MAX_ATTEMPTS: usize = 1_000_000;
        for _ in 0..MAX_ATTEMPTS {
            stubs.shuffle(&mut rng);
            let mut seen = HashSet::with_capacity(stubs.len() / 2);
            let mut ok = true;
            for pair in stubs.chunks_exact(2) {
                let (v, w) = (pair[0], pair[1]);
                if v == w || !seen.insert((v.min(w), v.max(w))) {
                    ok = false;
                    break;
                }
            }
            if ok {
                let mut edges: Vec<_> = seen.into_iter().collect();
                edges.sort_unstable();
                return Self::new(n, edges, j, h);
            }
        }
        arg(format!("no simple {r}-regular pairing found for N = {n}"))
    }

    /// Erdős–Rényi graph: each pair present independently with probability `p`.
    pub fn erdos_renyi(n: usize, p: f64, j: f64, h: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return arg(format!("edge probability {p} outside [0,1]"));
        }
        let mut rng = rng::seeded(seed);
        let mut edges = Vec::new();
        for v in 0..n {
            for w in v + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((v, w));
                }
            }
        }
        Self::new(n, edges, j, h)
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Full evaluation of the Hamiltonian.
    pub fn energy(&self, s: SpinConfig) -> Result<f64> {
        if s.n() != self.n {
            return arg(format!("config has {} spins, graph has {}", s.n(), self.n));
        }
        Ok(self.energy_bits(s.bits()))
    }

    pub(crate) fn energy_bits(&self, bits: u32) -> f64 {
        let spin = |i: usize| if bits >> i & 1 == 1 { 1.0 } else { -1.0 };
        let pair: f64 = self.edges.iter().map(|&(v, w)| spin(v) * spin(w)).sum();
        let field: f64 = (0..self.n).map(spin).sum();
        -0.5 * self.j * pair - 0.5 * self.h * field
    }

    /// `H(σ^{(i)}) - H(σ) = J σ_i Σ_{w~i} σ_w + h σ_i`, in O(deg i).
    pub fn flip_delta(&self, bits: u32, i: usize) -> f64 {
        let spin = |k: usize| if bits >> k & 1 == 1 { 1.0 } else { -1.0 };
        let local: f64 = self.adjacency[i].iter().map(|&w| spin(w)).sum();
        spin(i) * (self.j * local + self.h)
    }

    /// Rebuilds the adjacency lists after deserialisation.
    pub fn rebuilt(self) -> Result<Self> {
        Self::new(self.n, self.edges, self.j, self.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn k4() -> GraphSpec {
        GraphSpec::complete(4, 1.0, 0.5).unwrap()
    }

    #[test]
    fn k4_energies() {
        let g = k4();
        assert_eq!(g.energy(SpinConfig::all_up(4).unwrap()).unwrap(), -4.0);
        assert_eq!(g.energy(SpinConfig::all_down(4).unwrap()).unwrap(), -2.0);
        // one spin down: 3 edges disagree, 3 agree; field sum 2
        let one = SpinConfig::new(0b1110, 4).unwrap();
        let direct = {
            let mut pair = 0.0;
            for v in 0..4 {
                for w in v + 1..4 {
                    pair += (one.spin(v) * one.spin(w)) as f64;
                }
            }
            -0.5 * pair - 0.25 * one.magnetization() as f64
        };
        assert_eq!(direct, -0.5);
        assert_eq!(g.energy(one).unwrap(), -0.5);
    }

    #[test]
    fn size_mismatch() {
        assert!(k4().energy(SpinConfig::all_up(3).unwrap()).is_err());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(GraphSpec::new(3, vec![(0, 0)], 1.0, 0.5).is_err());
        assert!(GraphSpec::new(3, vec![(0, 1), (1, 0)], 1.0, 0.5).is_err());
        assert!(GraphSpec::new(3, vec![(0, 3)], 1.0, 0.5).is_err());
        assert!(GraphSpec::new(3, vec![], 0.0, 0.5).is_err());
        assert!(GraphSpec::new(3, vec![], 1.0, 0.0).is_err());
    }

    #[test]
    fn regular_on_four_vertices_is_k4() {
        for seed in 0..10 {
            let g = GraphSpec::random_regular(4, 3, 1.0, 0.5, seed).unwrap();
            assert_eq!(g.edges, k4().edges);
        }
    }

    #[test]
    fn regular_degrees() {
        let g = GraphSpec::random_regular(6, 3, 1.0, 0.5, 42).unwrap();
        assert_eq!(g.degrees(), vec![3; 6]);
        assert_eq!(g.edges.len(), 9);
        let g2 = GraphSpec::random_regular(6, 3, 1.0, 0.5, 42).unwrap();
        assert_eq!(g, g2);
    }

    #[test]
    fn regular_preconditions() {
        assert!(GraphSpec::random_regular(5, 3, 1.0, 0.5, 0).is_err());
        assert!(GraphSpec::random_regular(3, 3, 1.0, 0.5, 0).is_err());
        assert!(GraphSpec::random_regular(6, 2, 1.0, 0.5, 0).is_err());
    }

    #[test]
    fn erdos_renyi_extremes() {
        assert!(GraphSpec::erdos_renyi(5, 0.0, 1.0, 0.5, 1).unwrap().edges.is_empty());
        assert_eq!(
            GraphSpec::erdos_renyi(5, 1.0, 1.0, 0.5, 1).unwrap().edges,
            GraphSpec::complete(5, 1.0, 0.5).unwrap().edges
        );
        assert!(GraphSpec::erdos_renyi(5, 1.5, 1.0, 0.5, 1).is_err());
        assert!(GraphSpec::erdos_renyi(5, -0.1, 1.0, 0.5, 1).is_err());
    }

    #[test]
    fn erdos_renyi_edge_count_moment() {
        // Binomial(1225, 0.2) per draw; the mean over 200 seeds has sd sqrt(196/200).
        let seeds = 200;
        let total: usize = (0..seeds)
            .map(|s| GraphSpec::erdos_renyi(50, 0.2, 1.0, 0.5, s).unwrap().edges.len())
            .sum();
        let mean = total as f64 / seeds as f64;
        let sd = (1225.0f64 * 0.2 * 0.8 / seeds as f64).sqrt();
        assert!((mean - 245.0).abs() < 3.0 * sd, "mean {mean}");
    }

    #[test]
    fn flip_identity_on_regular() {
        let g = GraphSpec::random_regular(10, 3, 1.3, 0.7, 5).unwrap();
        for s in SpinConfig::all(10) {
            for i in 0..10 {
                let full = g.energy(s.flip(i).unwrap()).unwrap() - g.energy(s).unwrap();
                assert_relative_eq!(g.flip_delta(s.bits(), i), full, epsilon = 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn flip_identity_random_graphs(n in 2usize..=8, p in 0.0f64..=1.0, seed in any::<u64>(),
                                       j in 0.1f64..3.0, h in 0.1f64..3.0) {
            let g = GraphSpec::erdos_renyi(n, p, j, h, seed).unwrap();
            for s in SpinConfig::all(n) {
                for i in 0..n {
                    let full = g.energy(s.flip(i).unwrap()).unwrap() - g.energy(s).unwrap();
                    prop_assert!((g.flip_delta(s.bits(), i) - full).abs() < 1e-12);
                }
            }
        }
    }
}
