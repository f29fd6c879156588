//! Critical heights.
//!
//! The classical height uses minimax paths over the whole hypercube and is
//! computed with one Kruskal-style sweep; the modified height uses the
//! canonical flip paths (differing coordinates flipped in ascending index
//! order) and is a direct all-pairs loop.

use crate::error::{check_capacity, Result};
use crate::model::{Landscape, ENUMERATION_LIMIT};
use crate::spin::bitstring;
use rayon::prelude::*;
use serde::Serialize;

/// Default size limit of the all-pairs modified height.
pub const PAIRWISE_LIMIT: usize = 10;

/// Disjoint sets with union by rank and path halving.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns the new root, or `None` if
    /// they were already joined.
    pub fn union(&mut self, a: u32, b: u32) -> Option<u32> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        let (hi, lo) = if self.rank[ra as usize] >= self.rank[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[lo as usize] = hi;
        if self.rank[hi as usize] == self.rank[lo as usize] {
            self.rank[hi as usize] += 1;
        }
        Some(hi)
    }
}

/// States in ascending energy order, ties by index.
fn activation_order(energies: &[f64]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..energies.len() as u32).collect();
    order.par_sort_unstable_by(|&a, &b| {
        energies[a as usize]
            .total_cmp(&energies[b as usize])
            .then(a.cmp(&b))
    });
    order
}

fn check(land: &Landscape) -> Result<()> {
    check_capacity(
        "minimax sweep",
        land.n,
        ENUMERATION_LIMIT,
        "saddle heights need exhaustive enumeration",
    )
}

/// `H(η,σ)`: the least possible maximum energy along a path from `η` to `σ`.
pub fn minimax_elevation(land: &Landscape, eta: u32, sigma: u32) -> Result<f64> {
    check(land)?;
    let e = &land.energies;
    let mut uf = UnionFind::new(e.len());
    let mut active = vec![false; e.len()];
    for v in activation_order(e) {
        active[v as usize] = true;
        for i in 0..land.n {
            let w = v ^ (1 << i);
            if active[w as usize] {
                uf.union(v, w);
            }
        }
        if active[eta as usize] && active[sigma as usize] && uf.find(eta) == uf.find(sigma) {
            return Ok(e[v as usize]);
        }
    }
    unreachable!("hypercube is connected")
}

/// `H(x, target)` for every state `x`.
pub fn elevations_to(land: &Landscape, target: u32) -> Result<Vec<f64>> {
    check(land)?;
    let e = &land.energies;
    let size = e.len();
    let mut uf = UnionFind::new(size);
    let mut active = vec![false; size];
    let mut members: Vec<Vec<u32>> = (0..size as u32).map(|v| vec![v]).collect();
    let mut elev = vec![f64::NAN; size];
    for v in activation_order(e) {
        let level = e[v as usize];
        active[v as usize] = true;
        if v == target {
            elev[v as usize] = level;
        }
        for i in 0..land.n {
            let w = v ^ (1 << i);
            if !active[w as usize] {
                continue;
            }
            let (ra, rb) = (uf.find(v), uf.find(w));
            if ra == rb {
                continue;
            }
            let tr = active[target as usize].then(|| uf.find(target));
            if let Some(tr) = tr {
                let other = if ra == tr {
                    Some(rb)
                } else if rb == tr {
                    Some(ra)
                } else {
                    None
                };
                if let Some(o) = other {
                    for &x in &members[o as usize] {
                        elev[x as usize] = level;
                    }
                }
            }
            let root = uf.union(ra, rb).unwrap();
            let gone = if root == ra { rb } else { ra };
            let mut moved = std::mem::take(&mut members[gone as usize]);
            let keep = &mut members[root as usize];
            if moved.len() > keep.len() {
                std::mem::swap(&mut moved, keep);
            }
            keep.extend(moved);
        }
    }
    Ok(elev)
}

/// `m = max_{η,σ} {H(η,σ) - H(η) - H(σ)} + H*` with an attaining pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalHeight {
    pub m: f64,
    pub pair: (u32, u32),
    pub saddle_energy: f64,
}

/// Classical critical height from the merge events of the ascending sweep.
pub fn classical_m(land: &Landscape) -> Result<ClassicalHeight> {
    check(land)?;
    let e = &land.energies;
    let h_star = land.stats.h_star;
    let size = e.len();
    let mut uf = UnionFind::new(size);
    let mut active = vec![false; size];
    // Per root: lowest energy in the component and where it sits.
    let mut low: Vec<(f64, u32)> = (0..size as u32).map(|v| (e[v as usize], v)).collect();
    let g = land.stats.ground();
    let mut best = ClassicalHeight {
        m: 0.0,
        pair: (g, g),
        saddle_energy: h_star,
    };
    for v in activation_order(e) {
        let level = e[v as usize];
        active[v as usize] = true;
        for i in 0..land.n {
            let w = v ^ (1 << i);
            if !active[w as usize] {
                continue;
            }
            let (ra, rb) = (uf.find(v), uf.find(w));
            if ra == rb {
                continue;
            }
            let (la, lb) = (low[ra as usize], low[rb as usize]);
            let cand = level - la.0 - lb.0 + h_star;
            if cand > best.m {
                best = ClassicalHeight {
                    m: cand,
                    pair: (la.1, lb.1),
                    saddle_energy: level,
                };
            }
            let root = uf.union(ra, rb).unwrap();
            low[root as usize] = if la.0 <= lb.0 { la } else { lb };
        }
    }
    Ok(best)
}

/// The local minimum with the highest barrier to the ground state `σ*`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeepestMinimum {
    pub state: u32,
    /// `H(x, σ*) - H(x)`.
    pub depth: f64,
    pub saddle_energy: f64,
}

/// `argmax_x H(x, σ*) - H(x)`; its depth equals `m`.
pub fn deepest_local_min(land: &Landscape) -> Result<DeepestMinimum> {
    let elev = elevations_to(land, land.stats.ground())?;
    let mut best = DeepestMinimum {
        state: land.stats.ground(),
        depth: 0.0,
        saddle_energy: land.stats.h_star,
    };
    for (x, &el) in elev.iter().enumerate() {
        let d = el - land.energies[x];
        if d > best.depth {
            best = DeepestMinimum {
                state: x as u32,
                depth: d,
                saddle_energy: el,
            };
        }
    }
    Ok(best)
}

/// Modified height over canonical flip paths.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModifiedHeight {
    pub m_f: f64,
    pub pair: (u32, u32),
    /// Highest `H^f` along the canonical path of `pair`.
    pub elevation: f64,
}

/// Highest value of `hf` along the path from `eta` to `sigma` that flips the
/// differing coordinates in ascending index order, endpoints included.
pub fn canonical_path_elevation(n: usize, hf: &[f64], eta: u32, sigma: u32) -> f64 {
    let diff = eta ^ sigma;
    let mut cur = eta;
    let mut top = hf[eta as usize];
    for i in 0..n {
        if diff >> i & 1 == 1 {
            cur ^= 1 << i;
            top = top.max(hf[cur as usize]);
        }
    }
    top
}

/// `m^f = max_{η,σ} {Elev^f(η,σ) - H^f(η) - H^f(σ)}` over ordered pairs.
pub fn modified_m(n: usize, hf: &[f64]) -> Result<ModifiedHeight> {
    modified_m_with_limit(n, hf, PAIRWISE_LIMIT)
}

pub fn modified_m_with_limit(n: usize, hf: &[f64], limit: usize) -> Result<ModifiedHeight> {
    pairwise_max(n, hf, limit, |top, a, b| top - a - b)
}

/// `max_{η,σ} {Elev^f(η,σ) - H^f(η)}`.
///
/// This is the exponent the canonical-path comparison actually controls:
/// `λ₂ ≥ (2/N³) e^{-path_height}` holds for every landscape, whereas the
/// same bound with `m^f` can fail (see the tests). Since `H^f ≥ 0` it is
/// never below `m^f`.
pub fn path_height(n: usize, hf: &[f64]) -> Result<ModifiedHeight> {
    pairwise_max(n, hf, PAIRWISE_LIMIT, |top, a, _| top - a)
}

fn pairwise_max(n: usize, hf: &[f64], limit: usize, score: impl Fn(f64, f64, f64) -> f64 + Sync) -> Result<ModifiedHeight> {
    check_capacity(
        "all-pairs modified critical height",
        n,
        limit,
        "raise the pairwise limit or use the upper bound",
    )?;
    let size = 1u32 << n;
    let better = |a: &ModifiedHeight, b: &ModifiedHeight| {
        a.m_f > b.m_f || (a.m_f == b.m_f && a.pair < b.pair)
    };
    let best = (0..size)
        .into_par_iter()
        .map(|eta| {
            let mut best = ModifiedHeight {
                m_f: f64::NEG_INFINITY,
                pair: (eta, eta),
                elevation: f64::NAN,
            };
            for sigma in 0..size {
                let top = canonical_path_elevation(n, hf, eta, sigma);
                let cand = ModifiedHeight {
                    m_f: score(top, hf[eta as usize], hf[sigma as usize]),
                    pair: (eta, sigma),
                    elevation: top,
                };
                if better(&cand, &best) {
                    best = cand;
                }
            }
            best
        })
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
        .unwrap();
    Ok(best)
}

/// A-priori bounds on `m^f`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModifiedBound {
    /// `max H^f - min_{LM\GM} H^f` (second-lowest level if `LM = GM`).
    pub value: f64,
    /// `max H^f - min_{σ ∉ GM} H^f`. Always dominates `m^f` when the ground
    /// state is unique; `value` can fall below `m^f` when a state outside
    /// `LM` sits lower than every non-global local minimum.
    pub second_level: f64,
    pub warning: Option<String>,
}

pub fn modified_m_upper_bound(land: &Landscape, hf: &[f64]) -> ModifiedBound {
    let top = hf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ground = land.ground_mask();
    let second = (0..hf.len())
        .filter(|&s| !ground[s])
        .map(|s| hf[s])
        .reduce(f64::min)
        .unwrap_or(top);
    let ng = land.stats.non_global_minima();
    match ng.iter().map(|&s| hf[s as usize]).reduce(f64::min) {
        Some(low) => ModifiedBound {
            value: top - low,
            second_level: top - second,
            warning: None,
        },
        None => ModifiedBound {
            value: top - second,
            second_level: top - second,
            warning: Some("no non-global local minimum; bound uses the second-lowest level".into()),
        },
    }
}

/// Serialisable summary of both critical heights.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SaddleReport {
    pub m: f64,
    pub arg_pair: (String, String),
    pub saddle_energy: f64,
    pub m_modified: Option<f64>,
    pub mod_arg_pair: Option<(String, String)>,
    pub mod_elevation: Option<f64>,
    pub m_modified_bound: Option<f64>,
}

impl SaddleReport {
    pub fn new(
        n: usize,
        classical: &ClassicalHeight,
        modified: Option<&ModifiedHeight>,
        bound: Option<&ModifiedBound>,
    ) -> Self {
        let pair = |p: (u32, u32)| (bitstring(p.0, n), bitstring(p.1, n));
        Self {
            m: classical.m,
            arg_pair: pair(classical.pair),
            saddle_energy: classical.saddle_energy,
            m_modified: modified.map(|x| x.m_f),
            mod_arg_pair: modified.map(|x| pair(x.pair)),
            mod_elevation: modified.map(|x| x.elevation),
            m_modified_bound: bound.map(|b| b.value),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{modified_energy_table, ModificationParams};
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn four() -> Landscape {
        Landscape::from_table(vec![0.0, 2.0, 3.0, 1.0]).unwrap()
    }

    /// Smallest threshold at which the sublevel set joins the two states.
    fn threshold_oracle(l: &Landscape, a: u32, b: u32) -> f64 {
        let mut levels = l.energies.clone();
        levels.sort_by(f64::total_cmp);
        for t in levels {
            if l.energy(a) > t || l.energy(b) > t {
                continue;
            }
            let mut seen = vec![false; l.size()];
            let mut stack = vec![a];
            seen[a as usize] = true;
            while let Some(v) = stack.pop() {
                for i in 0..l.n {
                    let w = v ^ (1 << i);
                    if !seen[w as usize] && l.energy(w) <= t {
                        seen[w as usize] = true;
                        stack.push(w);
                    }
                }
            }
            if seen[b as usize] {
                return t;
            }
        }
        unreachable!()
    }

    /// Minimum over all simple paths of the path maximum, by DFS.
    fn simple_path_oracle(l: &Landscape, a: u32, b: u32) -> f64 {
        fn dfs(l: &Landscape, v: u32, b: u32, seen: &mut Vec<bool>, top: f64, best: &mut f64) {
            if top >= *best {
                return;
            }
            if v == b {
                *best = top;
                return;
            }
            for i in 0..l.n {
                let w = v ^ (1 << i);
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    dfs(l, w, b, seen, top.max(l.energy(w)), best);
                    seen[w as usize] = false;
                }
            }
        }
        let mut seen = vec![false; l.size()];
        seen[a as usize] = true;
        let mut best = f64::INFINITY;
        dfs(l, a, b, &mut seen, l.energy(a), &mut best);
        best
    }

    fn brute_m(l: &Landscape) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for a in 0..l.size() as u32 {
            for b in 0..l.size() as u32 {
                let v = threshold_oracle(l, a, b) - l.energy(a) - l.energy(b);
                best = best.max(v);
            }
        }
        best + l.stats.h_star
    }

    fn random_table(seed: u64, n: usize, levels: i32) -> Landscape {
        let mut r = rng::seeded(seed);
        Landscape::from_table((0..1 << n).map(|_| r.random_range(0..levels) as f64).collect()).unwrap()
    }

    #[test]
    fn union_find_basics() {
        let mut uf = UnionFind::new(4);
        assert!(uf.union(0, 1).is_some());
        assert!(uf.union(1, 0).is_none());
        assert!(uf.union(2, 3).is_some());
        assert_ne!(uf.find(0), uf.find(2));
        uf.union(1, 3);
        assert_eq!(uf.find(0), uf.find(2));
    }

    #[test]
    fn four_state_examples() {
        let l = four();
        assert_eq!(minimax_elevation(&l, 0, 3).unwrap(), 2.0);
        for s in 0..4 {
            assert_eq!(minimax_elevation(&l, s, s).unwrap(), l.energy(s));
        }
        let c = classical_m(&l).unwrap();
        assert_eq!(c.m, 1.0);
        assert_eq!(c.saddle_energy, 2.0);
        let d = deepest_local_min(&l).unwrap();
        assert_eq!(d.state, 3);
        assert_eq!(d.depth, 1.0);
    }

    #[test]
    fn two_state_m_is_zero() {
        let l = Landscape::from_table(vec![0.0, 1.0]).unwrap();
        assert_eq!(classical_m(&l).unwrap().m, 0.0);
    }

    #[test]
    fn staircase_minimax_is_endpoint_max() {
        let n = 4;
        let l = Landscape::from_table((0..16u32).map(|b| b.count_ones() as f64).collect()).unwrap();
        for a in 0..16 {
            for b in 0..16 {
                assert_eq!(minimax_elevation(&l, a, b).unwrap(), l.energy(a).max(l.energy(b)), "{a} {b} n={n}");
            }
        }
        assert_eq!(classical_m(&l).unwrap().m, 0.0);
    }

    #[test]
    fn complete_graph_closed_form() {
        use crate::graph::GraphSpec;
        use crate::model::EnergyModel;
        let n = 6;
        let l = EnergyModel::ising(GraphSpec::complete(n, 1.0, 0.5).unwrap()).unwrap().landscape().unwrap();
        let ns = ((n as f64 - 1.0 - 0.5) / 2.0).ceil();
        let closed = ns * ((n as f64 - ns) - 0.5);
        assert_eq!(closed, 7.5);
        assert!((classical_m(&l).unwrap().m - closed).abs() < 1e-12);
        assert!((brute_m(&l) - closed).abs() < 1e-12);
    }

    #[test]
    fn sweep_matches_oracles_small() {
        for seed in 0..100u64 {
            let n = 1 + (seed as usize % 4);
            let l = random_table(seed, n, 5);
            for a in 0..l.size() as u32 {
                for b in 0..l.size() as u32 {
                    let s = minimax_elevation(&l, a, b).unwrap();
                    assert_eq!(s, threshold_oracle(&l, a, b));
                    if n <= 3 {
                        assert_eq!(s, simple_path_oracle(&l, a, b));
                    }
                }
            }
        }
    }

    #[test]
    fn merge_tree_m_matches_pairwise_reference() {
        for seed in 0..60u64 {
            let n = 1 + (seed as usize % 6);
            let l = random_table(seed + 1000, n, 7);
            let c = classical_m(&l).unwrap();
            let brute = brute_m(&l);
            assert!((c.m - brute).abs() < 1e-12, "seed {seed}: {} vs {brute}", c.m);
            let (a, b) = c.pair;
            let check = minimax_elevation(&l, a, b).unwrap() - l.energy(a) - l.energy(b) + l.stats.h_star;
            assert!((check - c.m).abs() < 1e-12);
            assert!((deepest_local_min(&l).unwrap().depth - c.m).abs() < 1e-12);
            assert!(l.stats.local_minima.contains(&deepest_local_min(&l).unwrap().state));
        }
    }

    #[test]
    fn elevations_to_match_pairwise() {
        for seed in 0..20u64 {
            let l = random_table(seed + 77, 5, 9);
            for t in [0u32, 7, 31] {
                let el = elevations_to(&l, t).unwrap();
                for x in 0..32u32 {
                    assert_eq!(el[x as usize], minimax_elevation(&l, x, t).unwrap());
                }
            }
        }
    }

    #[test]
    fn canonical_paths_four_state() {
        let l = four();
        let p = ModificationParams::unmodified(1.0, 0.0).unwrap();
        let hf = modified_energy_table(&l, &p).unwrap();
        // 00 -> 01 -> 11 flips coordinate 0 first
        assert_eq!(canonical_path_elevation(2, &hf, 0, 3), 2.0);
        // 11 -> 10 -> 00
        assert_eq!(canonical_path_elevation(2, &hf, 3, 0), 3.0);
        let mf = modified_m(2, &hf).unwrap();
        assert_eq!(mf.m_f, 2.0);
        assert_eq!(mf.pair, (3, 0));
        let b = modified_m_upper_bound(&l, &hf);
        assert_eq!(b.value, 2.0);
        assert!(b.warning.is_none());
    }

    #[test]
    fn single_spin_modified_height() {
        let hf = [0.3, 1.7];
        let mf = modified_m(1, &hf).unwrap();
        // max over (η,σ) of max(hf) - hf(η) - hf(σ); the pair (0,0) gives -0.6
        let expect = [(0, 0), (0, 1), (1, 0), (1, 1)]
            .iter()
            .map(|&(a, b): &(usize, usize)| {
                let top = if a == b { hf[a] } else { 1.7 };
                top - hf[a] - hf[b]
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(mf.m_f, expect);
        assert_eq!(mf.m_f, -0.3);
    }

    #[test]
    fn local_minimum_bound_can_fail() {
        // State 3 is not a local minimum yet sits below the non-global minimum 5.
        let e = vec![
            -0.195_477_670_218_646_26,
            -0.600_105_423_645_935_3,
            -1.629_499_615_734_190_8,
            -1.002_867_106_089_628,
            0.317_228_605_987_429_2,
            -0.724_895_985_916_428_6,
            -1.938_854_618_795_897_3,
            -0.260_965_437_093_142_7,
        ];
        let l = Landscape::from_table(e).unwrap();
        assert_eq!(l.stats.non_global_minima(), vec![5]);
        let c = l.stats.h_star + 0.5 * (l.min_non_global_energy().unwrap() - l.stats.h_star);
        let p = ModificationParams::quadratic(2.395_253_981_972_994_3, c, l.stats.h_star).unwrap();
        let hf = modified_energy_table(&l, &p).unwrap();
        let mf = modified_m(3, &hf).unwrap();
        let b = modified_m_upper_bound(&l, &hf);
        assert_eq!(mf.pair, (6, 3));
        assert!(mf.m_f > b.value + 0.1);
        assert!(mf.m_f <= b.second_level);
    }

    #[test]
    fn pairwise_limit_enforced() {
        let hf = vec![0.0; 1 << 11];
        assert!(modified_m(11, &hf).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn elevation_properties(n in 1usize..=5, seed in any::<u64>()) {
            let l = random_table(seed, n, 6);
            for a in 0..l.size() as u32 {
                for b in 0..l.size() as u32 {
                    let ab = minimax_elevation(&l, a, b).unwrap();
                    prop_assert_eq!(ab, minimax_elevation(&l, b, a).unwrap());
                    prop_assert!(ab >= l.energy(a).max(l.energy(b)));
                }
            }
            prop_assert!(classical_m(&l).unwrap().m >= 0.0);
        }

        #[test]
        fn second_level_bound_dominates(n in 2usize..=6, seed in any::<u64>(), beta in 0.2f64..4.0) {
            let mut r = rng::seeded(seed);
            let l = Landscape::from_table((0..1 << n).map(|_| r.random_range(-2.0..2.0)).collect()).unwrap();
            if l.stats.non_global_minima().is_empty() { return Ok(()); }
            let c = l.stats.h_star + 0.5 * (l.min_non_global_energy().unwrap() - l.stats.h_star);
            let p = ModificationParams::quadratic(beta, c, l.stats.h_star).unwrap();
            let hf = modified_energy_table(&l, &p).unwrap();
            let mf = modified_m(n, &hf).unwrap();
            let b = modified_m_upper_bound(&l, &hf);
            prop_assert!(mf.m_f <= b.second_level + 1e-12);
            prop_assert!(b.value <= b.second_level + 1e-12);
        }

        #[test]
        fn local_minimum_bound_holds_when_minima_are_lowest(n in 2usize..=6, seed in any::<u64>(), beta in 0.2f64..4.0) {
            // When no state outside LM lies below the lowest non-global
            // minimum, the two bounds coincide.
            let mut r = rng::seeded(seed);
            let l = Landscape::from_table((0..1 << n).map(|_| r.random_range(-2.0..2.0)).collect()).unwrap();
            let Some(low) = l.min_non_global_energy() else { return Ok(()) };
            let ground = l.ground_mask();
            if (0..l.size()).any(|s| !ground[s] && l.energies[s] < low) { return Ok(()); }
            let c = l.stats.h_star + 0.5 * (low - l.stats.h_star);
            let p = ModificationParams::quadratic(beta, c, l.stats.h_star).unwrap();
            let hf = modified_energy_table(&l, &p).unwrap();
            prop_assert!(modified_m(n, &hf).unwrap().m_f <= modified_m_upper_bound(&l, &hf).value + 1e-12);
        }

        #[test]
        fn m_zero_iff_funnel(n in 1usize..=4, seed in any::<u64>()) {
            // m = 0 exactly when every state reaches a ground state without
            // climbing above its own level.
            let l = random_table(seed, n, 4);
            let g = l.stats.ground();
            let funnel = (0..l.size() as u32).all(|x| minimax_elevation(&l, x, g).unwrap() <= l.energy(x));
            prop_assert_eq!(classical_m(&l).unwrap().m == 0.0, funnel);
        }
    }
}
