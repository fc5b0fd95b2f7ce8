//! Symmetric banded matrices and their Cholesky factorisation.

use crate::error::{Error, Result};

/// Symmetric matrix stored by its upper band: `band[i][k] = A(i, i + k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBanded {
    n: usize,
    kd: usize,
    band: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, kd: usize) -> Self {
        Self {
            n,
            kd,
            band: vec![0.0; n * (kd + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.kd
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        debug_assert!(j - i <= self.kd, "entry ({i},{j}) outside band {}", self.kd);
        i * (self.kd + 1) + (j - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        if b - a > self.kd {
            0.0
        } else {
            self.band[self.slot(a, b)]
        }
    }

    /// Adds `v` to `A(i,j)` (and so to `A(j,i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.band[s] += v;
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.n {
            self.band[i * (self.kd + 1)] += v;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.band[i * (self.kd + 1)..(i + 1) * (self.kd + 1)];
            y[i] += row[0] * x[i];
            for k in 1..=self.kd.min(self.n - 1 - i) {
                let a = row[k];
                y[i] += a * x[i + k];
                y[i + k] += a * x[i];
            }
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn cholesky(&self, context: &'static str) -> Result<BandCholesky> {
        let (n, kd) = (self.n, self.kd);
        let w = kd + 1;
        let mut u = vec![0.0; n * w];
        let (mut dmax, mut dmin) = (0.0f64, f64::INFINITY);
        for i in 0..n {
            let mut s = self.band[i * w];
            for l in i.saturating_sub(kd)..i {
                let x = u[l * w + (i - l)];
                s -= x * x;
            }
            let scale = self.band[i * w].abs().max(f64::MIN_POSITIVE);
            if !(s > 1e-300) || !s.is_finite() || s < 1e-15 * scale {
                return Err(Error::Singular {
                    context,
                    row: i,
                    pivot: s,
                    condition: if dmin.is_finite() { dmax / dmin.max(f64::MIN_POSITIVE) } else { f64::INFINITY },
                });
            }
            let d = s.sqrt();
            dmax = dmax.max(s);
            dmin = dmin.min(s);
            u[i * w] = d;
            for j in i + 1..(i + w).min(n) {
                let mut s = self.band[i * w + (j - i)];
                for l in j.saturating_sub(kd)..i {
                    s -= u[l * w + (i - l)] * u[l * w + (j - l)];
                }
                u[i * w + (j - i)] = s / d;
            }
        }
        Ok(BandCholesky {
            n,
            kd,
            u,
            pivot_ratio: dmax / dmin,
        })
    }

    /// Solves `A x = b` with one step of iterative refinement.
    pub fn solve(&self, b: &[f64], context: &'static str) -> Result<Vec<f64>> {
        let chol = self.cholesky(context)?;
        let mut x = chol.solve(b);
        let ax = self.matvec(&x);
        let resid: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = chol.solve(&resid);
        for (x, d) in x.iter_mut().zip(dx) {
            *x += d;
        }
        Ok(x)
    }
}

/// Upper factor `U` with `A = UᵀU`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    kd: usize,
    u: Vec<f64>,
    pivot_ratio: f64,
}

impl BandCholesky {
    /// Ratio of largest to smallest squared pivot, a cheap conditioning hint.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kd) = (self.n, self.kd);
        let w = kd + 1;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for l in i.saturating_sub(kd)..i {
                s -= self.u[l * w + (i - l)] * y[l];
            }
            y[i] = s / self.u[i * w];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..(i + w).min(n) {
                s -= self.u[i * w + (j - i)] * y[j];
            }
            y[i] = s / self.u[i * w];
        }
        y
    }
}
