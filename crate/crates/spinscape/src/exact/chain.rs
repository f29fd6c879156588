use super::reduction::Reduction;
use crate::error::{arg, check_capacity, Result};
use crate::landscape::{modified_energy_table, ModificationParams};
use crate::model::Landscape;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

/// Default size limit for dense analysis (`2^12` states).
pub const DENSE_LIMIT: usize = 12;
/// Hard ceiling for dense analysis regardless of the configured limit.
const DENSE_CEILING: usize = 14;

/// Eigenvalues below this fraction of the largest are recomputed by
/// subspace iteration instead of trusting the dense solver.
const REFINE_REL: f64 = 1e-6;
const REFINE_MAX_ITERS: usize = 500;
/// Largest state space for which the semigroup is built by squaring.
const SQUARING_LIMIT: usize = 256;

/// Generator, stationary law and spectral decomposition for one landscape.
#[derive(Clone, Debug)]
pub struct ExactChain {
    pub n_spins: usize,
    pub hf: Vec<f64>,
    /// `L^f`, dense, rows indexed by state bits.
    pub generator: DMatrix<f64>,
    pub pi: Vec<f64>,
    pub log_pi: Vec<f64>,
    /// Eigenvalues of `-L^f`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors of the symmetrised generator, as columns.
    pub eigenvectors: DMatrix<f64>,
    /// Number of low eigenpairs recomputed by subspace iteration.
    pub refined: usize,
    pub params: Option<ModificationParams>,
}

/// `t_mix`, or `None` when the limiting distance exceeds the target.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingTime {
    pub time: Option<f64>,
    /// `lim_{t→∞} sup_σ TV = ‖π^f - target‖_TV`.
    pub floor: f64,
}

/// Capacity and equilibrium potential of a pair of sets.
#[derive(Clone, Debug, PartialEq)]
pub struct Capacity {
    pub value: f64,
    /// `h_{A,B}`: probability of reaching `A` before `B`.
    pub potential: Vec<f64>,
}

/// `E_x[τ_B]` by two routes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HittingTime {
    pub value: f64,
    /// `(1/cap(x,B)) Σ_y π(y) h_{x,B}(y)`.
    pub via_capacity: f64,
    /// Solution of `-L u = 1` off `B`, `u = 0` on `B`.
    pub via_solve: f64,
    pub rel_diff: f64,
    /// Set when `x ∈ B`.
    pub trivial: bool,
}

/// `½ Σ |μ - ν|`.
pub fn tv_distance(mu: &[f64], nu: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() {
        return arg(format!("length mismatch: {} vs {}", mu.len(), nu.len()));
    }
    Ok(0.5 * mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Normalised `exp(-energies)` and its logarithm, by log-sum-exp.
pub(crate) fn gibbs(energies: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let z: f64 = energies.iter().map(|e| (lo - e).exp()).sum();
    let lz = z.ln() - lo;
    let log_pi: Vec<f64> = energies.iter().map(|e| -e - lz).collect();
    (log_pi.iter().map(|l| l.exp()).collect(), log_pi)
}

impl ExactChain {
    pub fn build(land: &Landscape, params: &ModificationParams) -> Result<Self> {
        Self::build_with_limit(land, params, DENSE_LIMIT)
    }

    pub fn build_with_limit(land: &Landscape, params: &ModificationParams, limit: usize) -> Result<Self> {
        check_capacity("dense chain", land.n, limit, "use Monte Carlo for larger systems")?;
        let hf = modified_energy_table(land, params)?;
        let mut chain = Self::from_modified(land.n, hf)?;
        chain.params = Some(params.clone());
        Ok(chain)
    }

    /// Chain for an arbitrary table of modified energies.
    pub fn from_modified(n_spins: usize, hf: Vec<f64>) -> Result<Self> {
        check_capacity("dense chain", n_spins, DENSE_CEILING, "dense matrices grow as 4^N")?;
        if n_spins == 0 {
            return arg("need at least one spin");
        }
        let size = 1usize << n_spins;
        if hf.len() != size {
            return arg(format!("table has {} entries, expected {size}", hf.len()));
        }
        if hf.iter().any(|x| !x.is_finite()) {
            return arg("modified energies must be finite");
        }
        let inv_n = 1.0 / n_spins as f64;
        let mut generator = DMatrix::zeros(size, size);
        let mut sym = DMatrix::zeros(size, size);
        for s in 0..size {
            let mut out = 0.0;
            for i in 0..n_spins {
                let t = s ^ (1 << i);
                let d = hf[t] - hf[s];
                let r = inv_n * (-d.max(0.0)).exp();
                generator[(s, t)] = r;
                sym[(s, t)] = -inv_n * (-0.5 * d.abs()).exp();
                out += r;
            }
            generator[(s, s)] = -out;
            sym[(s, s)] = out;
        }
        let (pi, log_pi) = gibbs(&hf);
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut eigenvectors = DMatrix::zeros(size, size);
        for (c, &k) in order.iter().enumerate() {
            eigenvectors.set_column(c, &eig.eigenvectors.column(k));
        }
        // The bottom pair is known in closed form.
        eigenvalues[0] = 0.0;
        for s in 0..size {
            eigenvectors[(s, 0)] = pi[s].sqrt();
        }
        let mut chain = Self {
            n_spins,
            hf,
            generator,
            pi,
            log_pi,
            eigenvalues,
            eigenvectors,
            refined: 0,
            params: None,
        };
        chain.refine_low_spectrum()?;
        Ok(chain)
    }

    pub fn size(&self) -> usize {
        self.pi.len()
    }

    #[inline]
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        if from == to {
            0.0
        } else {
            self.generator[(from, to)]
        }
    }

    /// `λ₂(-L^f)`.
    pub fn spectral_gap(&self) -> f64 {
        if self.size() < 2 {
            return f64::INFINITY;
        }
        self.eigenvalues[1]
    }

    /// `t_rel = 1/λ₂`.
    pub fn relaxation_time(&self) -> f64 {
        1.0 / self.spectral_gap()
    }

    /// `⟨-L g, g⟩_π = ½ Σ π(η) L(η,σ) (g(η) - g(σ))²`.
    pub fn dirichlet_form(&self, g: &[f64]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.size() {
            for i in 0..self.n_spins {
                let b = a ^ (1 << i);
                s += self.pi[a] * self.rate(a, b) * (g[a] - g[b]).powi(2);
            }
        }
        0.5 * s
    }

    fn row_major_rates(&self) -> Vec<f64> {
        let n = self.size();
        let mut v = vec![0.0; n * n];
        for a in 0..n {
            for i in 0..self.n_spins {
                let b = a ^ (1 << i);
                v[a * n + b] = self.generator[(a, b)];
            }
        }
        v
    }

    fn reduction(&self, interior: Vec<usize>) -> Result<Reduction> {
        Reduction::from_dense(self.size(), &self.row_major_rates(), interior)
    }

    /// Dense eigenvalues near zero carry absolute error ~1e-16 and are
    /// meaningless once the gap is exponentially small. Those are recomputed
    /// by block inverse iteration with `(-L)^+` applied through a grounded
    /// state reduction, which is accurate in relative terms.
    fn refine_low_spectrum(&mut self) -> Result<()> {
        let size = self.size();
        if size < 3 {
            return Ok(());
        }
        let top = self.eigenvalues[size - 1];
        let k = (1..size).take_while(|&j| self.eigenvalues[j] < REFINE_REL * top).count();
        if k == 0 {
            return Ok(());
        }
        let p = (k + 1).min(size - 1);
        let ground = (0..size).max_by(|&a, &b| self.pi[a].total_cmp(&self.pi[b])).unwrap();
        let interior: Vec<usize> = (0..size).filter(|&s| s != ground).collect();
        let red = self.reduction(interior.clone())?;
        let pi = self.pi.clone();

        let project = |f: &mut Vec<f64>| {
            let mean: f64 = f.iter().zip(&pi).map(|(x, w)| x * w).sum();
            f.iter_mut().for_each(|x| *x -= mean);
        };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(&pi).map(|((x, y), w)| x * y * w).sum::<f64>();
        let orthonormalise = |cols: &mut Vec<Vec<f64>>| {
            for _ in 0..2 {
                for j in 0..cols.len() {
                    for i in 0..j {
                        let c = dot(&cols[i], &cols[j]);
                        let ci = cols[i].clone();
                        cols[j].iter_mut().zip(&ci).for_each(|(x, y)| *x -= c * y);
                    }
                    let nrm = dot(&cols[j], &cols[j]).sqrt();
                    cols[j].iter_mut().for_each(|x| *x /= nrm);
                }
            }
        };
        // T f = (-L)^+ f on π-mean-zero functions.
        let apply = |f: &[f64]| {
            let rhs: Vec<f64> = interior.iter().map(|&s| f[s]).collect();
            let x = red.solve(&rhs);
            let mut out = vec![0.0; size];
            for (p, &s) in interior.iter().enumerate() {
                out[s] = x[p];
            }
            project(&mut out);
            out
        };

        let mut q: Vec<Vec<f64>> = (1..=p)
            .map(|j| {
                let mut f: Vec<f64> = (0..size)
                    .map(|s| self.eigenvectors[(s, j)] / pi[s].sqrt())
                    .collect();
                project(&mut f);
                f
            })
            .collect();
        orthonormalise(&mut q);
        let mut last = f64::NAN;
        let mut ritz: Vec<f64> = Vec::new();
        for _ in 0..REFINE_MAX_ITERS {
            let y: Vec<Vec<f64>> = q.iter().map(|f| apply(f)).collect();
            let mut b = DMatrix::zeros(p, p);
            for i in 0..p {
                for j in 0..p {
                    b[(i, j)] = 0.5 * (dot(&q[i], &y[j]) + dot(&q[j], &y[i]));
                }
            }
            let e = SymmetricEigen::new(b);
            let mut idx: Vec<usize> = (0..p).collect();
            idx.sort_by(|&a, &c| e.eigenvalues[c].total_cmp(&e.eigenvalues[a]));
            ritz = idx.iter().map(|&c| e.eigenvalues[c]).collect();
            let mut next: Vec<Vec<f64>> = idx
                .iter()
                .map(|&c| {
                    let mut v = vec![0.0; size];
                    for (j, yj) in y.iter().enumerate() {
                        let w = e.eigenvectors[(j, c)];
                        v.iter_mut().zip(yj).for_each(|(a, b)| *a += w * b);
                    }
                    v
                })
                .collect();
            orthonormalise(&mut next);
            q = next;
            let lam = 1.0 / ritz[0];
            if (lam - last).abs() <= 1e-14 * lam {
                break;
            }
            last = lam;
        }
        for j in 0..k {
            self.eigenvalues[1 + j] = 1.0 / ritz[j];
            for s in 0..size {
                self.eigenvectors[(s, 1 + j)] = q[j][s] * pi[s].sqrt();
            }
        }
        self.refined = k;
        Ok(())
    }

    fn spectral_row(&self, s: usize, t: f64) -> Vec<f64> {
        let size = self.size();
        let w: Vec<f64> = (0..size)
            .map(|k| self.eigenvectors[(s, k)] * (-self.eigenvalues[k].max(0.0) * t).exp())
            .collect();
        let scale = 1.0 / self.pi[s].sqrt();
        (0..size)
            .map(|u| {
                let v: f64 = (0..size).map(|k| self.eigenvectors[(u, k)] * w[k]).sum();
                v * self.pi[u].sqrt() * scale
            })
            .collect()
    }

    fn spectral_semigroup(&self, t: f64) -> DMatrix<f64> {
        let size = self.size();
        let mut left = self.eigenvectors.clone();
        for k in 0..size {
            let e = (-self.eigenvalues[k].max(0.0) * t).exp();
            left.column_mut(k).scale_mut(e);
        }
        let mut p = left * self.eigenvectors.transpose();
        for a in 0..size {
            let sa = 1.0 / self.pi[a].sqrt();
            for b in 0..size {
                p[(a, b)] *= sa * self.pi[b].sqrt();
            }
        }
        p
    }

    /// `e^{tL}` by uniformisation over a step `δ ≤ 1` followed by repeated
    /// squaring. Every operation combines nonnegative numbers, so small
    /// entries keep relative accuracy; rows are renormalised after each
    /// squaring.
    fn squared_semigroup(&self, t: f64) -> DMatrix<f64> {
        let size = self.size();
        let k = if t > 1.0 { t.log2().ceil() as i32 } else { 0 };
        let dt = t / 2f64.powi(k);
        let mut u = self.generator.clone();
        for a in 0..size {
            u[(a, a)] += 1.0;
            u[(a, a)] = u[(a, a)].max(0.0);
        }
        let mut weight = (-dt).exp();
        let mut power = DMatrix::<f64>::identity(size, size);
        let mut p = power.scale(weight);
        let mut mass = weight;
        let mut j = 0;
        while 1.0 - mass > 1e-17 && j < 200 {
            j += 1;
            power = &power * &u;
            weight *= dt / j as f64;
            mass += weight;
            p += power.scale(weight);
        }
        let renormalise = |p: &mut DMatrix<f64>| {
            for a in 0..size {
                let s: f64 = p.row(a).iter().sum();
                p.row_mut(a).scale_mut(1.0 / s);
            }
        };
        renormalise(&mut p);
        for _ in 0..k {
            p = &p * &p;
            renormalise(&mut p);
        }
        p
    }

    /// `e^{tL}(σ, ·)`. See [`ExactChain::semigroup`] for the method.
    pub fn semigroup_row(&self, s: u32, t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return arg(format!("time {t} must be nonnegative"));
        }
        let s = s as usize;
        if s >= self.size() {
            return arg(format!("state {s} out of range"));
        }
        if self.size() <= SQUARING_LIMIT {
            let p = self.squared_semigroup(t);
            return Ok(p.row(s).iter().copied().collect());
        }
        Ok(self.spectral_row(s, t))
    }

    /// `e^{tL}`.
    ///
    /// Up to `2^8` states this uses uniformisation and squaring, which keeps
    /// every entry accurate in relative terms. Larger chains use the
    /// spectral decomposition, whose entries carry absolute error of order
    /// `1e-16 / sqrt(π(σ))` in row `σ`.
    pub fn semigroup(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(t >= 0.0) {
            return arg(format!("time {t} must be nonnegative"));
        }
        if self.size() <= SQUARING_LIMIT {
            Ok(self.squared_semigroup(t))
        } else {
            Ok(self.spectral_semigroup(t))
        }
    }

    /// `e^{tL}(σ, ·)` from the spectral decomposition alone.
    pub fn semigroup_row_spectral(&self, s: u32, t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return arg(format!("time {t} must be nonnegative"));
        }
        if s as usize >= self.size() {
            return arg(format!("state {s} out of range"));
        }
        Ok(self.spectral_row(s as usize, t))
    }

    /// `e^{tL}(σ, ·)` by uniformisation at rate 1: a Poisson mixture of
    /// powers of `I + L`, using only nonnegative arithmetic. Truncation error
    /// per unit-time chunk is below `tol`.
    pub fn semigroup_row_uniformized(&self, s: u32, t: f64, tol: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return arg(format!("time {t} must be nonnegative"));
        }
        let size = self.size();
        let mut v = vec![0.0; size];
        v[s as usize] = 1.0;
        let chunks = (t / 32.0).ceil().max(1.0) as usize;
        let dt = t / chunks as f64;
        for _ in 0..chunks {
            let mut term = v.clone();
            let mut weight = (-dt).exp();
            let mut acc: Vec<f64> = term.iter().map(|x| x * weight).collect();
            let mut mass = weight;
            let mut k = 0usize;
            while 1.0 - mass > tol && k < 100_000 {
                k += 1;
                let mut next = vec![0.0; size];
                for a in 0..size {
                    let x = term[a];
                    if x == 0.0 {
                        continue;
                    }
                    let mut stay = 1.0;
                    for i in 0..self.n_spins {
                        let b = a ^ (1 << i);
                        let r = self.generator[(a, b)];
                        next[b] += x * r;
                        stay -= r;
                    }
                    next[a] += x * stay;
                }
                term = next;
                weight *= dt / k as f64;
                mass += weight;
                acc.iter_mut().zip(&term).for_each(|(a, x)| *a += weight * x);
            }
            v = acc;
        }
        Ok(v)
    }

    fn sup_tv(&self, t: f64, target: &[f64]) -> Result<f64> {
        let p = self.semigroup(t)?;
        let mut worst: f64 = 0.0;
        for a in 0..self.size() {
            let d: f64 = 0.5 * (0..self.size()).map(|b| (p[(a, b)] - target[b]).abs()).sum::<f64>();
            worst = worst.max(d);
        }
        Ok(worst)
    }

    /// `inf{t ≥ 0 : sup_σ ‖e^{tL}(σ,·) - target‖_TV ≤ ε}` by bisection.
    pub fn mixing_time(&self, target: &[f64], eps: f64) -> Result<MixingTime> {
        if target.len() != self.size() {
            return arg("target distribution has the wrong length");
        }
        if !(eps > 0.0) {
            return arg(format!("epsilon {eps} must be positive"));
        }
        let floor = tv_distance(&self.pi, target)?;
        if eps >= 1.0 {
            return Ok(MixingTime { time: Some(0.0), floor });
        }
        if floor >= eps {
            return Ok(MixingTime { time: None, floor });
        }
        if self.sup_tv(0.0, target)? <= eps {
            return Ok(MixingTime { time: Some(0.0), floor });
        }
        let mut hi = 200.0 * self.relaxation_time();
        let mut expansions = 0;
        while self.sup_tv(hi, target)? > eps {
            hi *= 2.0;
            expansions += 1;
            if expansions > 64 {
                return Ok(MixingTime { time: None, floor });
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-3 * hi {
            let mid = 0.5 * (lo + hi);
            if self.sup_tv(mid, target)? <= eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(MixingTime { time: Some(hi), floor })
    }

    fn check_set(&self, set: &[u32], name: &str) -> Result<Vec<bool>> {
        if set.is_empty() {
            return arg(format!("set {name} is empty"));
        }
        let mut mask = vec![false; self.size()];
        for &s in set {
            if s as usize >= self.size() {
                return arg(format!("state {s} in {name} out of range"));
            }
            mask[s as usize] = true;
        }
        Ok(mask)
    }

    /// `cap(A,B)` and `h_{A,B}`.
    ///
    /// The value is evaluated as the boundary flux
    /// `Σ_{a∈A} π(a) Σ_σ L(a,σ) (1 - h_{A,B}(σ))`, which equals `⟨-Lh, h⟩_π`
    /// and avoids the cancellation in `1 - h` by solving for `1 - h` directly.
    pub fn capacity(&self, a: &[u32], b: &[u32]) -> Result<Capacity> {
        let ma = self.check_set(a, "A")?;
        let mb = self.check_set(b, "B")?;
        if ma.iter().zip(&mb).any(|(x, y)| *x && *y) {
            return arg("sets A and B overlap");
        }
        let size = self.size();
        let interior: Vec<usize> = (0..size).filter(|&s| !ma[s] && !mb[s]).collect();
        let mut h: Vec<f64> = ma.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
        let mut g: Vec<f64> = mb.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
        if !interior.is_empty() {
            let red = self.reduction(interior.clone())?;
            let boundary = |mask: &Vec<bool>| -> Vec<f64> {
                interior
                    .iter()
                    .map(|&s| {
                        (0..self.n_spins)
                            .map(|i| s ^ (1 << i))
                            .filter(|&t| mask[t])
                            .map(|t| self.rate(s, t))
                            .sum()
                    })
                    .collect()
            };
            let hi = red.solve(&boundary(&ma));
            let gi = red.solve(&boundary(&mb));
            for (p, &s) in interior.iter().enumerate() {
                h[s] = hi[p];
                g[s] = gi[p];
            }
        }
        let mut value = 0.0;
        for s in (0..size).filter(|&s| ma[s]) {
            for i in 0..self.n_spins {
                let t = s ^ (1 << i);
                value += self.pi[s] * self.rate(s, t) * g[t];
            }
        }
        Ok(Capacity { value, potential: h })
    }

    /// `E_x[τ_B]` for every start `x`, by one solve of `-L u = 1` off `B`.
    pub fn mean_hitting_times(&self, b: &[u32]) -> Result<Vec<f64>> {
        let mb = self.check_set(b, "B")?;
        let interior: Vec<usize> = (0..self.size()).filter(|&s| !mb[s]).collect();
        let mut u = vec![0.0; self.size()];
        if interior.is_empty() {
            return Ok(u);
        }
        let red = self.reduction(interior.clone())?;
        let x = red.solve(&vec![1.0; interior.len()]);
        for (p, &s) in interior.iter().enumerate() {
            u[s] = x[p];
        }
        Ok(u)
    }

    /// `E_x[τ_B]` by the capacity formula and by direct solve.
    pub fn mean_hitting_time(&self, x: u32, b: &[u32]) -> Result<HittingTime> {
        let mb = self.check_set(b, "B")?;
        if x as usize >= self.size() {
            return arg(format!("start {x} out of range"));
        }
        if mb[x as usize] {
            return Ok(HittingTime {
                value: 0.0,
                via_capacity: 0.0,
                via_solve: 0.0,
                rel_diff: 0.0,
                trivial: true,
            });
        }
        let cap = self.capacity(&[x], b)?;
        let mass: f64 = cap.potential.iter().zip(&self.pi).map(|(h, p)| h * p).sum();
        let via_capacity = mass / cap.value;
        let via_solve = self.mean_hitting_times(b)?[x as usize];
        Ok(HittingTime {
            value: via_solve,
            via_capacity,
            via_solve,
            rel_diff: (via_capacity - via_solve).abs() / via_solve.abs(),
            trivial: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{gap_lower_bound, log_torpid_relaxation_lower};
    use crate::critical::{classical_m, modified_m, path_height};
    use crate::graph::GraphSpec;
    use crate::landscape::tune_c;
    use crate::model::EnergyModel;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn two_state() -> ExactChain {
        let land = Landscape::from_table(vec![0.0, 1.0]).unwrap();
        ExactChain::build(&land, &ModificationParams::unmodified(1.0, 0.0).unwrap()).unwrap()
    }

    fn plain(energies: Vec<f64>, beta: f64) -> ExactChain {
        let land = Landscape::from_table(energies).unwrap();
        let p = ModificationParams::unmodified(beta, land.stats.h_star).unwrap();
        ExactChain::build(&land, &p).unwrap()
    }

    fn residual(chain: &ExactChain, k: usize) -> f64 {
        let size = chain.size();
        let f: Vec<f64> = (0..size)
            .map(|s| chain.eigenvectors[(s, k)] / chain.pi[s].sqrt())
            .collect();
        let mut worst: f64 = 0.0;
        for s in 0..size {
            let lf: f64 = (0..size).map(|t| -chain.generator[(s, t)] * f[t]).sum();
            let r = (lf - chain.eigenvalues[k] * f[s]) * chain.pi[s].sqrt();
            worst = worst.max(r.abs());
        }
        worst
    }

    #[test]
    fn two_state_chain() {
        let c = two_state();
        assert_relative_eq!(c.rate(0, 1), (-1f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(c.rate(1, 0), 1.0);
        assert!((c.pi[0] - 0.7311).abs() < 1e-4);
        assert_relative_eq!(c.spectral_gap(), 1.0 + (-1f64).exp(), max_relative = 1e-12);
        assert!((c.spectral_gap() - 1.3679).abs() < 1e-4);
    }

    #[test]
    fn flat_landscapes() {
        assert_relative_eq!(plain(vec![0.0; 2], 1.0).spectral_gap(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(plain(vec![0.0; 4], 1.0).spectral_gap(), 1.0, max_relative = 1e-12);
        let c = plain(vec![0.0; 8], 1.0);
        // Normalised hypercube walk: gap 2/N.
        assert_relative_eq!(c.spectral_gap(), 2.0 / 3.0, max_relative = 1e-12);
        assert!(c.pi.iter().all(|p| (p - 0.125).abs() < 1e-15));
    }

    #[test]
    fn infinite_temperature_limit() {
        let c = plain(vec![0.0, 3.0, -1.0, 2.0, 5.0, 1.0, 0.5, -2.0], 1e-12);
        assert!(c.pi.iter().all(|p| (p - 0.125).abs() < 1e-10));
    }

    #[test]
    fn refined_gap_in_the_torpid_regime() {
        // Symmetric double well on the square: λ₂ = e^{-βB} exactly, with
        // eigenfunction (1, 0, 0, -1).
        for beta in [5.0, 40.0, 100.0, 300.0] {
            let c = plain(vec![0.0, 1.0, 1.0, 0.0], beta);
            assert_relative_eq!(c.spectral_gap(), (-beta).exp(), max_relative = 1e-9);
            if beta > 20.0 {
                assert!(c.refined >= 1);
            }
        }
    }

    #[test]
    fn refined_gap_matches_rayleigh_quotient() {
        let g = GraphSpec::complete(6, 1.0, 0.5).unwrap();
        let land = EnergyModel::ising(g).unwrap().landscape().unwrap();
        for beta in [2.0, 8.0, 20.0] {
            let p = ModificationParams::unmodified(beta, land.stats.h_star).unwrap();
            let c = ExactChain::build(&land, &p).unwrap();
            let f: Vec<f64> = (0..c.size())
                .map(|s| c.eigenvectors[(s, 1)] / c.pi[s].sqrt())
                .collect();
            let mean: f64 = f.iter().zip(&c.pi).map(|(x, p)| x * p).sum();
            let var: f64 = f.iter().zip(&c.pi).map(|(x, p)| (x - mean).powi(2) * p).sum();
            assert_relative_eq!(c.dirichlet_form(&f) / var, c.spectral_gap(), max_relative = 1e-7);
            // Torpid side: the gap lies below e^{-βm} times a polynomial.
            let m = classical_m(&land).unwrap().m;
            assert!(c.relaxation_time().ln() >= log_torpid_relaxation_lower(6, beta, m));
        }
    }

    #[test]
    fn semigroup_rows() {
        let c = two_state();
        let r0 = c.semigroup_row(0, 0.0).unwrap();
        assert!((r0[0] - 1.0).abs() < 1e-12 && r0[1].abs() < 1e-12);
        let r1 = c.semigroup_row(0, 1.0).unwrap();
        let expect = c.pi[0] + c.pi[1] * (-c.spectral_gap()).exp();
        assert_relative_eq!(r1[0], expect, max_relative = 1e-12);
        let big = c.semigroup_row(1, 50.0 * c.relaxation_time()).unwrap();
        assert!(tv_distance(&big, &c.pi).unwrap() < 1e-8);
        assert!(c.semigroup_row(0, -1.0).is_err());
        let u = c.semigroup_row_uniformized(0, 1.0, 1e-15).unwrap();
        assert_relative_eq!(u[0], expect, max_relative = 1e-12);
    }

    #[test]
    fn uniformized_rows_agree_with_spectral_rows() {
        let g = GraphSpec::complete(4, 1.0, 0.5).unwrap();
        let land = EnergyModel::ising(g).unwrap().landscape().unwrap();
        let p = ModificationParams::unmodified(1.5, land.stats.h_star).unwrap();
        let c = ExactChain::build(&land, &p).unwrap();
        for t in [0.3, 2.0, 40.0, 100.0] {
            for s in [0u32, 5, 15] {
                let a = c.semigroup_row(s, t).unwrap();
                let b = c.semigroup_row_uniformized(s, t, 1e-14).unwrap();
                assert!(tv_distance(&a, &b).unwrap() < 1e-10, "t={t} s={s}");
            }
        }
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tv_distance(&[0.7311, 0.2689], &[0.5, 0.5]).unwrap() - 0.2311).abs() < 1e-12);
        assert!(tv_distance(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn mixing_times() {
        let g = GraphSpec::complete(4, 1.0, 0.5).unwrap();
        let land = EnergyModel::ising(g).unwrap().landscape().unwrap();
        let p = ModificationParams::unmodified(1.0, land.stats.h_star).unwrap();
        let c = ExactChain::build(&land, &p).unwrap();
        let mt = c.mixing_time(&c.pi, 0.25).unwrap();
        let t = mt.time.unwrap();
        assert!(t >= c.relaxation_time() * 2f64.ln());
        assert!(mt.floor < 1e-15);
        assert_eq!(c.mixing_time(&c.pi, 1.0).unwrap().time, Some(0.0));
        assert!(c.mixing_time(&c.pi, 0.0).is_err());

        // Modified chain against the Gibbs law at small β: the floor wins.
        let beta = 0.2;
        let plain = ExactChain::build(&land, &ModificationParams::unmodified(beta, land.stats.h_star).unwrap()).unwrap();
        let q = ModificationParams::quadratic(beta, land.stats.h_star + 1.0, land.stats.h_star).unwrap();
        let m = ExactChain::build(&land, &q).unwrap();
        let floor = tv_distance(&m.pi, &plain.pi).unwrap();
        let r = m.mixing_time(&plain.pi, floor / 2.0).unwrap();
        assert_eq!(r.time, None);
        assert_relative_eq!(r.floor, floor, max_relative = 1e-12);
    }

    #[test]
    fn capacities() {
        let c = two_state();
        let cap = c.capacity(&[0], &[1]).unwrap();
        assert_relative_eq!(cap.value, c.pi[0] * (-1f64).exp(), max_relative = 1e-14);
        assert!((cap.value - 0.2689).abs() < 1e-4);
        assert_eq!(cap.potential, vec![1.0, 0.0]);
        assert!(c.capacity(&[0], &[0]).is_err());
        assert!(c.capacity(&[], &[1]).is_err());

        let d = plain(vec![0.0, 2.0, 3.0, 1.0], 1.0);
        let whole = d.capacity(&[0, 3], &[1, 2]).unwrap();
        let direct: f64 = [0usize, 3]
            .iter()
            .flat_map(|&a| [1usize, 2].map(|b| d.pi[a] * d.rate(a, b)))
            .sum();
        assert_relative_eq!(whole.value, direct, max_relative = 1e-14);
    }

    #[test]
    fn hitting_times() {
        let c = two_state();
        let h = c.mean_hitting_time(0, &[1]).unwrap();
        let e = std::f64::consts::E;
        assert!((h.via_capacity - e).abs() < 1e-10);
        assert!((h.via_solve - e).abs() < 1e-10);
        let t = c.mean_hitting_time(1, &[1]).unwrap();
        assert!(t.trivial && t.value == 0.0);
    }

    #[test]
    fn hitting_times_match_lu() {
        let g = GraphSpec::complete(5, 1.0, 0.5).unwrap();
        let land = EnergyModel::ising(g).unwrap().landscape().unwrap();
        let p = ModificationParams::unmodified(1.0, land.stats.h_star).unwrap();
        let c = ExactChain::build(&land, &p).unwrap();
        let target = land.stats.ground() as usize;
        let interior: Vec<usize> = (0..c.size()).filter(|&s| s != target).collect();
        let k = interior.len();
        let a = DMatrix::from_fn(k, k, |i, j| -c.generator[(interior[i], interior[j])]);
        let u = a.lu().solve(&nalgebra::DVector::from_element(k, 1.0)).unwrap();
        let ours = c.mean_hitting_times(&[target as u32]).unwrap();
        for (p, &s) in interior.iter().enumerate() {
            assert_relative_eq!(ours[s], u[p], max_relative = 1e-10);
        }
    }

    #[test]
    fn torpid_hitting_time_keeps_precision() {
        // Across a barrier of height 1 at β = 200 the escape rate is e^{-200}.
        let c = plain(vec![0.0, 1.0, 1.0, 0.5], 200.0);
        let h = c.mean_hitting_time(3, &[0]).unwrap();
        assert!(h.rel_diff < 1e-8, "{h:?}");
        assert!(h.value.ln() > 0.5 * 200.0 - 5.0);
    }

    #[test]
    fn two_sided_height_bound_can_fail() {
        // H^f = (0, 0.1191...): m^f = 0 so the bound reads λ₂ ≥ 2, but
        // λ₂ = 1 + e^{-0.119} ≈ 1.888.
        let c = plain(vec![0.0, 1.191664321838517], 0.1);
        let mf = modified_m(1, &c.hf).unwrap().m_f;
        assert_eq!(mf, 0.0);
        assert!(c.spectral_gap() < gap_lower_bound(1, mf));
        let ph = path_height(1, &c.hf).unwrap().m_f;
        assert!(c.spectral_gap() >= gap_lower_bound(1, ph));
    }

    #[test]
    fn squared_semigroup_matches_spectral_rows() {
        let g = GraphSpec::complete(5, 1.0, 0.5).unwrap();
        let land = EnergyModel::ising(g).unwrap().landscape().unwrap();
        let p = ModificationParams::unmodified(0.8, land.stats.h_star).unwrap();
        let c = ExactChain::build(&land, &p).unwrap();
        for t in [0.0, 0.4, 3.0, 17.0, 250.0] {
            for s in [0u32, 9, 31] {
                let a = c.semigroup_row(s, t).unwrap();
                let b = c.semigroup_row_spectral(s, t).unwrap();
                assert!(tv_distance(&a, &b).unwrap() < 1e-11, "t={t} s={s}");
            }
        }
    }

    #[test]
    fn modified_gap_respects_bound() {
        let g = GraphSpec::complete(6, 1.0, 0.5).unwrap();
        let land = EnergyModel::ising(g).unwrap().landscape().unwrap();
        let m = classical_m(&land).unwrap().m;
        let tuning = tune_c(&land, 0.5, Some(m)).unwrap();
        for beta in [1.0, 5.0, 20.0] {
            let p = ModificationParams::quadratic(beta, tuning.c, land.stats.h_star).unwrap();
            let c = ExactChain::build(&land, &p).unwrap();
            let mf = modified_m(6, &c.hf).unwrap().m_f;
            assert!(mf <= std::f64::consts::FRAC_PI_2 + 1e-12);
            assert!(c.spectral_gap() >= gap_lower_bound(6, mf));
        }
    }

    #[test]
    fn capacity_errors() {
        let c = plain(vec![0.0; 4], 1.0);
        assert!(c.capacity(&[0], &[7]).is_err());
        assert!(c.mean_hitting_time(9, &[0]).is_err());
        assert!(ExactChain::build_with_limit(
            &Landscape::from_table(vec![0.0; 16]).unwrap(),
            &ModificationParams::unmodified(1.0, 0.0).unwrap(),
            3
        )
        .is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, f64, bool, f64)> {
        (1usize..=5)
            .prop_flat_map(|n| {
                (
                    prop::collection::vec(-3.0f64..3.0, 1 << n),
                    0.1f64..6.0,
                    any::<bool>(),
                    0.0f64..1.0,
                )
            })
    }

    fn build((e, beta, quad, frac): &(Vec<f64>, f64, bool, f64)) -> ExactChain {
        let land = Landscape::from_table(e.clone()).unwrap();
        let hs = land.stats.h_star;
        let p = if *quad {
            let c = hs + frac * (land.stats.h_max - hs);
            ModificationParams::quadratic(*beta, c, hs).unwrap()
        } else {
            ModificationParams::unmodified(*beta, hs).unwrap()
        };
        ExactChain::build(&land, &p).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn detailed_balance(inst in instance()) {
            let c = build(&inst);
            for a in 0..c.size() {
                for i in 0..c.n_spins {
                    let b = a ^ (1 << i);
                    let l = c.pi[a] * c.rate(a, b);
                    let r = c.pi[b] * c.rate(b, a);
                    prop_assert!((l - r).abs() <= 1e-12 * l.max(r));
                }
            }
            let total: f64 = c.pi.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn eigenpairs_and_semigroup(inst in instance()) {
            let c = build(&inst);
            for k in 0..c.size() {
                prop_assert!(residual(&c, k) <= 1e-9, "k={} r={}", k, residual(&c, k));
            }
            if c.size() > 1 {
                let tr = c.relaxation_time();
                for t in [0.1 * tr, tr, 10.0 * tr] {
                    let p = c.semigroup(t).unwrap();
                    for a in 0..c.size() {
                        let s: f64 = p.row(a).iter().sum();
                        prop_assert!((s - 1.0).abs() < 1e-10);
                        prop_assert!(p.row(a).iter().all(|&x| x > -1e-12));
                    }
                }
            }
        }

        #[test]
        fn gap_dominates_path_height_bound(inst in instance()) {
            let c = build(&inst);
            if c.size() > 1 {
                let ph = path_height(c.n_spins, &c.hf).unwrap().m_f;
                prop_assert!(c.spectral_gap() >= gap_lower_bound(c.n_spins, ph) * (1.0 - 1e-12));
            }
        }

        #[test]
        fn capacity_is_symmetric_and_routes_agree(inst in instance(), a in 0u32..32, b in 0u32..32) {
            let c = build(&inst);
            let size = c.size() as u32;
            let (a, b) = (a % size, b % size);
            prop_assume!(a != b);
            let ab = c.capacity(&[a], &[b]).unwrap().value;
            let ba = c.capacity(&[b], &[a]).unwrap().value;
            prop_assert!((ab - ba).abs() <= 1e-10 * ab.max(ba));
            let h = c.mean_hitting_time(a, &[b]).unwrap();
            prop_assert!(h.rel_diff <= 1e-8, "{:?}", h);
        }

        #[test]
        fn torpid_relaxation_bound(e in prop::collection::vec(-2.0f64..2.0, 8), beta in prop::sample::select(vec![5.0, 10.0, 20.0])) {
            let land = Landscape::from_table(e).unwrap();
            let m = classical_m(&land).unwrap().m;
            let c = ExactChain::build(&land, &ModificationParams::unmodified(beta, land.stats.h_star).unwrap()).unwrap();
            prop_assert!(c.relaxation_time().ln() >= log_torpid_relaxation_lower(3, beta, m));
        }
    }
}
