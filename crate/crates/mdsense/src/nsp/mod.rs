//! Null-space-pursuit decomposition with the rmD-NSP, AM-FM NSP and NSP operators.

mod banded;
mod operator;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub use banded::{BandCholesky, SymBanded};
pub use operator::{apply_operator, closed_form_params, difference_matrices, DifferencePair, OperatorParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    RmdNsp,
    AmfmNsp,
    Nsp,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::RmdNsp, Variant::AmfmNsp, Variant::Nsp];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::RmdNsp => "rmd-nsp",
            Variant::AmfmNsp => "amfm-nsp",
            Variant::Nsp => "nsp",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rmd-nsp" | "rmd" => Ok(Variant::RmdNsp),
            "amfm-nsp" | "amfm" => Ok(Variant::AmfmNsp),
            "nsp" => Ok(Variant::Nsp),
            other => Err(Error::Config(format!(
                "unknown variant `{other}` (expected rmd-nsp, amfm-nsp or nsp)"
            ))),
        }
    }
}

/// Solver settings. The signal is scaled to unit RMS before iterating, so
/// `lambda1`, `lambda2` act on normalised data.
#[derive(Debug, Clone, PartialEq)]
pub struct NspConfig {
    pub epsilon: f64,
    pub max_iter: usize,
    pub lambda2: f64,
    pub lambda1: f64,
    pub gamma: f64,
    /// Weight of `‖p + D2 q‖²` in the rmD-NSP penalty, relative to `lambda2`.
    pub coupling: f64,
    /// Weight of the `‖D2 p‖² + ‖D2 q‖²` smoothness terms in the rmD-NSP penalty.
    pub rmd_smoothness: f64,
}

impl Default for NspConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_iter: 30,
            lambda2: 1e4,
            lambda1: 1e-2,
            gamma: 0.0,
            coupling: 1e-6,
            rmd_smoothness: 1.0,
        }
    }
}

impl NspConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("solver epsilon must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("solver max_iter must be at least 1".into()));
        }
        if !(self.lambda2 > 0.0) || !(self.lambda1 > 0.0) {
            return Err(Error::Config("lambda1 and lambda2 must be positive".into()));
        }
        if !(self.coupling >= 0.0) || !(self.rmd_smoothness >= 0.0) {
            return Err(Error::Config("penalty weights must be non-negative".into()));
        }
        if !(self.gamma > -1.0) {
            return Err(Error::Config("initial leakage must exceed -1".into()));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Normal equations `N θ = b` of the θ sub-problem, unknowns interleaved as
/// `(p_0, q_0, p_1, q_1, …)` except for [`Variant::Nsp`], which solves for `q` only.
pub fn theta_system(s: &[f64], r: &[f64], cfg: &NspConfig, variant: Variant) -> Result<(SymBanded, Vec<f64>)> {
    let m = s.len();
    if r.len() != m {
        return Err(Error::param("signal and residual lengths differ"));
    }
    let d = DifferencePair::new(m)?;
    let x = sub(s, r);
    let dx = d.d1(&x);
    let d2x = d.d2(&x);
    let l2 = cfg.lambda2;
    match variant {
        Variant::Nsp => {
            let mut n = SymBanded::zeros(m, 2);
            for i in 0..m {
                n.add(i, i, x[i] * x[i]);
            }
            d.add_d2td2(&mut n, l2, |i| i);
            let rhs = (0..m).map(|i| -x[i] * d2x[i]).collect();
            Ok((n, rhs))
        }
        Variant::AmfmNsp | Variant::RmdNsp => {
            let mut n = SymBanded::zeros(2 * m, 4);
            let (pi, qi) = (|i: usize| 2 * i, |i: usize| 2 * i + 1);
            for i in 0..m {
                n.add(pi(i), pi(i), dx[i] * dx[i]);
                n.add(pi(i), qi(i), dx[i] * x[i]);
                n.add(qi(i), qi(i), x[i] * x[i]);
            }
            let smooth = if variant == Variant::RmdNsp { cfg.rmd_smoothness } else { 1.0 };
            if smooth > 0.0 {
                d.add_d2td2(&mut n, l2 * smooth, pi);
                d.add_d2td2(&mut n, l2 * smooth, qi);
            }
            if variant == Variant::RmdNsp && cfg.coupling > 0.0 {
                // ‖p + D2 q‖² = pᵀp + 2 pᵀD2 q + qᵀD2ᵀD2 q
                let w = l2 * cfg.coupling;
                for i in 0..m {
                    n.add(pi(i), pi(i), w);
                    for j in i.saturating_sub(1)..=(i + 1).min(m - 1) {
                        let v = d.d2_entry(i, j);
                        if v != 0.0 {
                            n.add(pi(i), qi(j), w * v);
                        }
                    }
                }
                d.add_d2td2(&mut n, w, qi);
            }
            let mut rhs = vec![0.0; 2 * m];
            for i in 0..m {
                rhs[pi(i)] = -dx[i] * d2x[i];
                rhs[qi(i)] = -x[i] * d2x[i];
            }
            Ok((n, rhs))
        }
    }
}

/// Regularised least-squares fit of the operator parameters to `s - r`.
pub fn solve_theta(s: &[f64], r: &[f64], cfg: &NspConfig, variant: Variant) -> Result<OperatorParams> {
    let m = s.len();
    let (n, rhs) = theta_system(s, r, cfg, variant)?;
    let sol = n.solve(&rhs, "operator parameters")?;
    Ok(match variant {
        Variant::Nsp => OperatorParams {
            p: vec![0.0; m],
            q: sol,
            variant,
        },
        _ => OperatorParams {
            p: sol.iter().step_by(2).copied().collect(),
            q: sol.iter().skip(1).step_by(2).copied().collect(),
            variant,
        },
    })
}

/// Relative residual of the θ normal equations at `params`.
pub fn theta_residual(s: &[f64], r: &[f64], cfg: &NspConfig, params: &OperatorParams) -> Result<f64> {
    let (n, rhs) = theta_system(s, r, cfg, params.variant)?;
    let theta: Vec<f64> = match params.variant {
        Variant::Nsp => params.q.clone(),
        _ => params.p.iter().zip(&params.q).flat_map(|(p, q)| [*p, *q]).collect(),
    };
    let res = sub(&n.matvec(&theta), &rhs);
    let scale = norm2(&rhs).sqrt();
    Ok(if scale == 0.0 { norm2(&res).sqrt() } else { norm2(&res).sqrt() / scale })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NspState {
    pub r: Vec<f64>,
    pub params: OperatorParams,
    pub lambda1: f64,
    pub gamma: f64,
    pub lambda2: f64,
    pub iteration: usize,
}

impl NspState {
    pub fn initial(m: usize, cfg: &NspConfig, variant: Variant) -> Self {
        Self {
            r: vec![0.0; m],
            params: OperatorParams::zeros(m, variant),
            lambda1: cfg.lambda1,
            gamma: cfg.gamma,
            lambda2: cfg.lambda2,
            iteration: 0,
        }
    }

    /// `(1 + γ)(s − r)`.
    pub fn component(&self, s: &[f64]) -> Vec<f64> {
        s.iter().zip(&self.r).map(|(s, r)| (1.0 + self.gamma) * (s - r)).collect()
    }
}

/// Checks recorded for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// `‖r_new − r_old‖²`.
    pub change: f64,
    /// Relative residual of the r normal equations.
    pub r_residual: f64,
    /// `|(s−r)ᵀ(s − (1+γ)(s−r))|`.
    pub orthogonality: f64,
    /// Objective before and after the r-update at fixed θ, λ₁, γ.
    pub objective_before: f64,
    pub objective_after: f64,
}

/// `‖T(s−r)‖² + λ₁(‖r‖² + γ‖s−r‖²) + λ₂·penalty(θ)`.
pub fn objective(s: &[f64], r: &[f64], params: &OperatorParams, lambda1: f64, gamma: f64) -> Result<f64> {
    let x = sub(s, r);
    let tx = apply_operator(&x, params)?;
    Ok(norm2(&tx) + lambda1 * (norm2(r) + gamma * norm2(&x)))
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// One pass of the θ, λ₁, r, γ updates.
pub fn nsp_iterate(state: &NspState, s: &[f64], cfg: &NspConfig) -> Result<(NspState, StepReport)> {
    let m = s.len();
    let j = state.iteration + 1;
    let diverged = |what: &str| Error::Divergence {
        iteration: j,
        what: what.to_string(),
    };
    let params = solve_theta(s, &state.r, cfg, state.params.variant)?;
    if !finite(&params.p) || !finite(&params.q) {
        return Err(diverged("operator parameters"));
    }
    let tt = gram(&params);
    let lead = 1.0 + state.gamma;
    if !(lead > 0.0) {
        return Err(diverged("leakage 1 + γ is not positive"));
    }

    let mut k1 = tt.clone();
    k1.add_diagonal(lead * state.lambda1);
    let chi_s = k1.solve(s, "multiplier update")?;
    let lambda1 = (1.0 / lead) * dot(s, &chi_s) / norm2(&chi_s);
    if !(lambda1 > 0.0) || !lambda1.is_finite() {
        return Err(diverged("λ₁ update"));
    }

    let tts = tt.matvec(s);
    let rhs: Vec<f64> = tts.iter().zip(s).map(|(a, b)| a + lambda1 * state.gamma * b).collect();
    let mut k2 = tt;
    k2.add_diagonal(lead * lambda1);
    let r = k2.solve(&rhs, "residual update")?;
    if !finite(&r) {
        return Err(diverged("residual"));
    }
    let r_res = sub(&k2.matvec(&r), &rhs);
    let r_residual = norm2(&r_res).sqrt() / norm2(&rhs).sqrt().max(f64::MIN_POSITIVE);

    let objective_before = objective(s, &state.r, &params, lambda1, state.gamma)?;
    let objective_after = objective(s, &r, &params, lambda1, state.gamma)?;

    let u = sub(s, &r);
    let uu = norm2(&u);
    let gamma = if uu > 0.0 { dot(&u, s) / uu - 1.0 } else { 0.0 };
    if !gamma.is_finite() {
        return Err(diverged("leakage"));
    }
    let leftover: Vec<f64> = s.iter().zip(&u).map(|(s, u)| s - (1.0 + gamma) * u).collect();
    let orthogonality = dot(&u, &leftover).abs();
    let change = norm2(&sub(&r, &state.r));
    debug_assert_eq!(r.len(), m);
    Ok((
        NspState {
            r,
            params,
            lambda1,
            gamma,
            lambda2: state.lambda2,
            iteration: j,
        },
        StepReport {
            change,
            r_residual,
            orthogonality,
            objective_before,
            objective_after,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub gamma: f64,
    pub lambda1: f64,
    /// Normalisation applied before iterating.
    pub scale: f64,
}

/// Runs the iteration until `‖Δr‖² ≤ ε‖s‖²` or `max_iter`, returning
/// `û = (1+γ)(s − r)` and, when requested, every per-step report.
pub fn nsp_extract_traced(
    s: &[f64],
    cfg: &NspConfig,
    variant: Variant,
    mut trace: Option<&mut Vec<StepReport>>,
) -> Result<(Vec<f64>, ExtractDiagnostics)> {
    cfg.validate()?;
    let m = s.len();
    DifferencePair::new(m)?;
    let scale = (norm2(s) / m as f64).sqrt();
    if !scale.is_finite() {
        return Err(Error::param("signal contains non-finite samples"));
    }
    if scale == 0.0 {
        return Ok((
            vec![0.0; m],
            ExtractDiagnostics {
                iterations: 1,
                converged: true,
                gamma: cfg.gamma,
                lambda1: cfg.lambda1,
                scale,
            },
        ));
    }
    let sn: Vec<f64> = s.iter().map(|v| v / scale).collect();
    let threshold = cfg.epsilon * norm2(&sn);
    let mut state = NspState::initial(m, cfg, variant);
    let mut converged = false;
    while state.iteration < cfg.max_iter {
        let (next, report) = nsp_iterate(&state, &sn, cfg)?;
        state = next;
        let done = report.change <= threshold;
        if let Some(t) = trace.as_deref_mut() {
            t.push(report);
        }
        if done {
            converged = true;
            break;
        }
    }
    let u = state.component(&sn).into_iter().map(|v| v * scale).collect();
    Ok((
        u,
        ExtractDiagnostics {
            iterations: state.iteration,
            converged,
            gamma: state.gamma,
            lambda1: state.lambda1,
            scale,
        },
    ))
}

pub fn nsp_extract(s: &[f64], cfg: &NspConfig, variant: Variant) -> Result<(Vec<f64>, ExtractDiagnostics)> {
    nsp_extract_traced(s, cfg, variant, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassDiagnostics {
    pub real: ExtractDiagnostics,
    pub imag: ExtractDiagnostics,
    /// `‖Σ components + residual − input‖ / ‖input‖` after this pass.
    pub reconstruction_error: f64,
}

impl PassDiagnostics {
    pub fn converged(&self) -> bool {
        self.real.converged && self.imag.converged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionOutput {
    pub variant: Variant,
    pub components: Vec<Vec<Complex64>>,
    pub residual: Vec<Complex64>,
    pub passes: Vec<PassDiagnostics>,
}

impl DecompositionOutput {
    pub fn converged(&self) -> bool {
        self.passes.iter().all(|p| p.converged())
    }

    /// `Σ components + residual`.
    pub fn reconstruct(&self) -> Vec<Complex64> {
        let mut out = self.residual.clone();
        for c in &self.components {
            for (o, v) in out.iter_mut().zip(c) {
                *o += v;
            }
        }
        out
    }
}

/// Pass error tagged with its index.
fn in_pass(k: usize, e: Error) -> Error {
    match e {
        Error::Divergence { iteration, what } => Error::Divergence {
            iteration,
            what: format!("pass {}: {what}", k + 1),
        },
        Error::Singular {
            context,
            row,
            pivot,
            condition,
        } => Error::Singular {
            context,
            row,
            pivot,
            condition,
        },
        other => other,
    }
}

fn relative_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Multi-pass complex decomposition: each pass extracts a component from the
/// running residual, real and imaginary parts separately.
pub fn decompose(s_mix: &[Complex64], passes: usize, variant: Variant, cfg: &NspConfig) -> Result<DecompositionOutput> {
    decompose_with(s_mix, passes, variant, cfg, Execution::default())
}

pub fn decompose_with(
    s_mix: &[Complex64],
    passes: usize,
    variant: Variant,
    cfg: &NspConfig,
    exec: Execution,
) -> Result<DecompositionOutput> {
    if passes == 0 {
        return Err(Error::param("at least one pass is required"));
    }
    let mut residual = s_mix.to_vec();
    let mut components = Vec::with_capacity(passes);
    let mut diags = Vec::with_capacity(passes);
    for k in 0..passes {
        let parts: [Vec<f64>; 2] = [
            residual.iter().map(|z| z.re).collect(),
            residual.iter().map(|z| z.im).collect(),
        ];
        let mut results = par::map_indexed(exec, 2, |i| nsp_extract(&parts[i], cfg, variant));
        let (ui, di) = results.pop().unwrap().map_err(|e| in_pass(k, e))?;
        let (ur, dr) = results.pop().unwrap().map_err(|e| in_pass(k, e))?;
        let u: Vec<Complex64> = ur.iter().zip(&ui).map(|(a, b)| Complex64::new(*a, *b)).collect();
        for (r, v) in residual.iter_mut().zip(&u) {
            *r -= v;
        }
        components.push(u);
        let out = DecompositionOutput {
            variant,
            components: components.clone(),
            residual: residual.clone(),
            passes: Vec::new(),
        };
        diags.push(PassDiagnostics {
            real: dr,
            imag: di,
            reconstruction_error: relative_error(&out.reconstruct(), s_mix),
        });
    }
    Ok(DecompositionOutput {
        variant,
        components,
        residual,
        passes: diags,
    })
}

pub(crate) use operator::gram;
