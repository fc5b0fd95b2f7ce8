//! Difference matrices and the second-order operator `T = D2 + diag(p) D1 + diag(q)`.

use crate::error::{Error, Result};

use super::banded::SymBanded;
use super::Variant;

/// First- and second-order difference matrices of size M, applied matrix-free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DifferencePair {
    m: usize,
}

impl DifferencePair {
    pub fn new(m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::param(format!("difference matrices need M >= 3, got {m}")));
        }
        Ok(Self { m })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `D1(i, i) = -1`, `D1(i, i+1) = 1`.
    pub fn d1_entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            -1.0
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    }

    /// Symmetric tridiagonal with reflecting ends.
    pub fn d2_entry(&self, i: usize, j: usize) -> f64 {
        let m = self.m;
        if i == j {
            if i == 0 || i == m - 1 {
                -1.0
            } else {
                -2.0
            }
        } else if i.abs_diff(j) == 1 {
            1.0
        } else {
            0.0
        }
    }

    pub fn d1(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m;
        assert_eq!(x.len(), m);
        let mut y: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        y.push(-x[m - 1]);
        y
    }

    pub fn d2(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m;
        assert_eq!(x.len(), m);
        let mut y = Vec::with_capacity(m);
        y.push(x[1] - x[0]);
        for i in 1..m - 1 {
            y.push(x[i - 1] - 2.0 * x[i] + x[i + 1]);
        }
        y.push(x[m - 2] - x[m - 1]);
        y
    }

    pub fn dense_d1(&self) -> Vec<Vec<f64>> {
        (0..self.m).map(|i| (0..self.m).map(|j| self.d1_entry(i, j)).collect()).collect()
    }

    pub fn dense_d2(&self) -> Vec<Vec<f64>> {
        (0..self.m).map(|i| (0..self.m).map(|j| self.d2_entry(i, j)).collect()).collect()
    }

    /// `D2ᵀD2` scattered into `out` with scale `w`, using the index map `idx`.
    pub(crate) fn add_d2td2(&self, out: &mut SymBanded, w: f64, idx: impl Fn(usize) -> usize) {
        let m = self.m;
        for r in 0..m {
            let lo = r.saturating_sub(1);
            let hi = (r + 1).min(m - 1);
            for a in lo..=hi {
                for b in a..=hi {
                    let v = self.d2_entry(r, a) * self.d2_entry(r, b);
                    if v != 0.0 {
                        out.add(idx(a), idx(b), w * v);
                    }
                }
            }
        }
    }
}

pub fn difference_matrices(m: usize) -> Result<DifferencePair> {
    DifferencePair::new(m)
}

/// Operator parameters; `p` is identically zero for the plain NSP variant.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorParams {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub variant: Variant,
}

impl OperatorParams {
    pub fn zeros(m: usize, variant: Variant) -> Self {
        Self {
            p: vec![0.0; m],
            q: vec![0.0; m],
            variant,
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// `θ = [p; q]`.
    pub fn stacked(&self) -> Vec<f64> {
        self.p.iter().chain(&self.q).copied().collect()
    }
}

fn central_diff(x: &[f64]) -> Vec<f64> {
    let m = x.len();
    (0..m)
        .map(|i| {
            if i == 0 {
                x[1] - x[0]
            } else if i == m - 1 {
                x[m - 1] - x[m - 2]
            } else {
                0.5 * (x[i + 1] - x[i - 1])
            }
        })
        .collect()
}

/// Operator parameters annihilating `a(m) cos(φ₁(m) + φ₂(m))`, derivatives in
/// sample units.
pub fn closed_form_params(a: &[f64], phi1: &[f64], phi2: &[f64]) -> Result<OperatorParams> {
    let m = a.len();
    if phi1.len() != m || phi2.len() != m {
        return Err(Error::param("amplitude and phase vectors differ in length"));
    }
    if m < 3 {
        return Err(Error::param("need at least 3 samples"));
    }
    if let Some(i) = a.iter().position(|&v| v == 0.0) {
        return Err(Error::param(format!("zero amplitude at sample {i}")));
    }
    let da = central_diff(a);
    let d1 = central_diff(phi1);
    let d2 = central_diff(phi2);
    let dd1 = {
        let mut v = vec![0.0; m];
        for i in 1..m - 1 {
            v[i] = phi1[i + 1] - 2.0 * phi1[i] + phi1[i - 1];
        }
        v[0] = v[1];
        v[m - 1] = v[m - 2];
        v
    };
    let mut p = Vec::with_capacity(m);
    let mut q = Vec::with_capacity(m);
    for i in 0..m {
        let phibar = d1[i] + d2[i];
        if phibar == 0.0 {
            return Err(Error::param(format!("zero instantaneous frequency at sample {i}")));
        }
        let rho = da[i] / a[i];
        let chirp = dd1[i] / phibar;
        p.push(-2.0 * rho - chirp);
        q.push(phibar * phibar + 2.0 * rho * rho + rho * chirp);
    }
    Ok(OperatorParams {
        p,
        q,
        variant: Variant::RmdNsp,
    })
}

/// `T x = D2 x + p ∘ D1 x + q ∘ x`.
pub fn apply_operator(x: &[f64], params: &OperatorParams) -> Result<Vec<f64>> {
    let m = x.len();
    if params.p.len() != m || params.q.len() != m {
        return Err(Error::param(format!(
            "signal length {m} but operator length {}",
            params.q.len()
        )));
    }
    let d = DifferencePair::new(m)?;
    let d1 = d.d1(x);
    let mut y = d.d2(x);
    for i in 0..m {
        y[i] += params.p[i] * d1[i] + params.q[i] * x[i];
    }
    Ok(y)
}

/// `T` as three diagonals (sub, main, super).
pub(crate) fn operator_diagonals(params: &OperatorParams) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = params.len();
    let d = DifferencePair { m };
    let sub: Vec<f64> = (1..m).map(|i| d.d2_entry(i, i - 1)).collect();
    let main: Vec<f64> = (0..m).map(|i| d.d2_entry(i, i) - params.p[i] + params.q[i]).collect();
    let sup: Vec<f64> = (0..m - 1).map(|i| d.d2_entry(i, i + 1) + params.p[i]).collect();
    (sub, main, sup)
}

/// `TᵀT` in pentadiagonal band form.
pub(crate) fn gram(params: &OperatorParams) -> SymBanded {
    let m = params.len();
    let (sub, main, sup) = operator_diagonals(params);
    let entry = |i: usize, j: usize| -> f64 {
        if j + 1 == i {
            sub[j]
        } else if i == j {
            main[i]
        } else if j == i + 1 {
            sup[i]
        } else {
            0.0
        }
    };
    let mut g = SymBanded::zeros(m, 2);
    for i in 0..m {
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(m - 1);
        for a in lo..=hi {
            for b in a..=hi {
                let v = entry(i, a) * entry(i, b);
                if v != 0.0 {
                    g.add(a, b, v);
                }
            }
        }
    }
    g
}
