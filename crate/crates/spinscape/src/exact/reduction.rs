//! Dirichlet problems for a generator by state reduction.
//!
//! Solves, for the interior set `I`,
//!
//! ```text
//! Σ_{j≠i} q(i,j) (u_i - u_j) = b_i   for i ∈ I,    u_j = 0 off I,
//! ```
//!
//! by Gaussian elimination in which every pivot is recomputed as the sum of
//! the current off-diagonal rates of the eliminated state (the
//! Grassmann–Taksar–Heyman device). Only additions of nonnegative numbers
//! occur in the factorisation, so exit rates as small as `e^{-200}` keep full
//! relative precision; with a nonnegative right-hand side the solution does
//! too. Boundary values are folded into `b` by the caller.

use crate::error::{Error, Result};

pub struct Reduction {
    interior: Vec<usize>,
    m: usize,
    /// Row-major `m × m`: strictly lower part holds multipliers, strictly
    /// upper part holds reduced rates.
    a: Vec<f64>,
    d: Vec<f64>,
}

impl Reduction {
    /// `rate(i, j)` is the off-diagonal rate between global states; states
    /// outside `interior` are absorbing.
    pub fn new(n_states: usize, interior: Vec<usize>, rate: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let m = interior.len();
        // Position of each state in the interior list.
        let mut slot = vec![None; n_states];
        for (p, &i) in interior.iter().enumerate() {
            slot[i] = Some(p);
        }
        let mut a = vec![0.0; m * m];
        let mut exit = vec![0.0; m];
        for (p, &i) in interior.iter().enumerate() {
            for (j, s) in slot.iter().enumerate() {
                if j == i {
                    continue;
                }
                let r = rate(i, j);
                if r == 0.0 {
                    continue;
                }
                match s {
                    Some(q) => a[p * m + q] = r,
                    None => exit[p] += r,
                }
            }
        }
        Self::factor(interior, a, exit)
    }

    /// Same as [`Reduction::new`] with the interior rates taken from a dense
    /// row-major matrix (entries on the diagonal are ignored).
    pub fn from_dense(n_states: usize, rates: &[f64], interior: Vec<usize>) -> Result<Self> {
        let m = interior.len();
        let mut inside = vec![false; n_states];
        for &i in &interior {
            inside[i] = true;
        }
        let mut a = vec![0.0; m * m];
        let mut exit = vec![0.0; m];
        for (p, &i) in interior.iter().enumerate() {
            let row = &rates[i * n_states..(i + 1) * n_states];
            for (q, &j) in interior.iter().enumerate() {
                if j != i {
                    a[p * m + q] = row[j];
                }
            }
            exit[p] = (0..n_states)
                .filter(|&j| j != i && !inside[j])
                .map(|j| row[j])
                .sum();
        }
        Self::factor(interior, a, exit)
    }

    fn factor(interior: Vec<usize>, mut a: Vec<f64>, mut exit: Vec<f64>) -> Result<Self> {
        let m = interior.len();
        let mut d = vec![0.0; m];
        for k in 0..m {
            let dk = exit[k] + a[k * m + k + 1..(k + 1) * m].iter().sum::<f64>();
            if !(dk > 0.0) {
                return Err(Error::Singular(format!(
                    "state {} has no escape route to the boundary",
                    interior[k]
                )));
            }
            d[k] = dk;
            let (head, tail) = a.split_at_mut((k + 1) * m);
            let row_k = &head[k * m..];
            for (off, row_i) in tail.chunks_exact_mut(m).enumerate() {
                let i = k + 1 + off;
                let aik = row_i[k];
                if aik == 0.0 {
                    continue;
                }
                let l = aik / dk;
                row_i[k] = l;
                for j in k + 1..m {
                    row_i[j] += l * row_k[j];
                }
                // The self-loop i→k→i accumulates on the unused diagonal.
                row_i[i] = 0.0;
                exit[i] += l * exit[k];
            }
        }
        Ok(Self { interior, m, a, d })
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Solves in place; `rhs` is indexed like `interior()`.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let m = self.m;
        assert_eq!(rhs.len(), m);
        for i in 1..m {
            let row = &self.a[i * m..i * m + i];
            let s: f64 = row.iter().zip(&rhs[..i]).map(|(l, b)| l * b).sum();
            rhs[i] += s;
        }
        for k in (0..m).rev() {
            let row = &self.a[k * m + k + 1..(k + 1) * m];
            let s: f64 = row.iter().zip(&rhs[k + 1..]).map(|(u, x)| u * x).sum();
            rhs[k] = (rhs[k] + s) / self.d[k];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
