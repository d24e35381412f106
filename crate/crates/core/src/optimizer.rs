//! e-projection of the empirical distribution onto the log-linear model.
//!
//! Each iteration evaluates `p(θ)`, the residual `η − η̂` (the gradient of
//! `D_KL(p̂, p)`), and steps either along the residual (plain gradient) or
//! along `G⁻¹(η − η̂)` (natural gradient). With backtracking enabled the step
//! is halved until the KL divergence does not increase.
//!
//! The change in KL for a candidate step is computed from
//! `ΔKL = log Σ_ω p(ω) e^{ΔE(ω)} − Δθ·η̂` with the first-order terms cancelled
//! analytically, so acceptance decisions stay reliable when the decrease is far
//! below the rounding error of the KL value itself.

use std::time::{Duration, Instant};

use nalgebra::{Cholesky, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::empirical::Distribution;
use crate::error::{Error, Result};
use crate::model::{self, energies, ParamVector};
use crate::poset::{ParamDomain, PosetState, SampleSpace};

/// Smallest step tried by the line search.
pub const STEP_FLOOR: f64 = 1e-8;

/// Relative jitter levels tried when the Fisher matrix fails to factorize.
const JITTER_LADDER: [f64; 7] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    NaturalGradient,
    GradientDescent,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::NaturalGradient => "natural_gradient",
            Method::GradientDescent => "gradient_descent",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "natural" | "natural_gradient" => Ok(Method::NaturalGradient),
            "gradient" | "gradient_descent" | "plain" => Ok(Method::GradientDescent),
            _ => Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    Zeros,
    /// Uniform draws in `[-0.5, 0.5]` from the configured seed.
    Random,
}

#[derive(Clone, Debug)]
pub struct FitConfig {
    pub method: Method,
    pub max_iters: usize,
    /// Stop once `max_s |η(s) − η̂(s)| < tol`.
    pub tol: f64,
    pub step: f64,
    pub backtracking: bool,
    pub init: Init,
    pub seed: u64,
}

impl FitConfig {
    pub fn natural() -> Self {
        FitConfig {
            method: Method::NaturalGradient,
            max_iters: 1000,
            tol: 1e-6,
            step: 1.0,
            backtracking: true,
            init: Init::Zeros,
            seed: 0,
        }
    }

    pub fn gradient() -> Self {
        FitConfig {
            method: Method::GradientDescent,
            step: 0.1,
            ..Self::natural()
        }
    }

    pub fn for_method(method: Method) -> Self {
        match method {
            Method::NaturalGradient => Self::natural(),
            Method::GradientDescent => Self::gradient(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {}", self.step)));
        }
        Ok(())
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        Self::natural()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    /// KL divergence at the iterate entering this iteration.
    pub kl: f64,
    /// `max_s |η(s) − η̂(s)|` at that iterate.
    pub residual: f64,
    /// Step length taken.
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    pub pruned: Vec<PosetState>,
    pub converged: bool,
    pub final_theta: ParamVector,
    /// Domain the parameters refer to (after pruning).
    pub domain: ParamDomain,
    pub final_kl: f64,
    pub final_residual: f64,
    /// Largest diagonal jitter needed by a natural-gradient step.
    pub max_jitter: f64,
    pub wall_time: Duration,
}

impl FitReport {
    pub fn distribution(&self, space: &SampleSpace) -> Distribution {
        model::model_distribution(&self.final_theta, space, &self.domain)
            .expect("report parameters match their own domain")
    }
}

/// Drops parameters whose empirical expectation is zero.
pub fn prune_domain(space: &SampleSpace, domain: &ParamDomain, eta_hat: &[f64]) -> Result<ParamDomain> {
    if eta_hat.len() != domain.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} expectations for {} parameters",
            eta_hat.len(),
            domain.len()
        )));
    }
    let keep: Vec<bool> = eta_hat.iter().map(|e| *e > 0.0).collect();
    let out = domain.restrict(space, &keep)?;
    if out.is_empty() {
        return Err(Error::EmptyDomain);
    }
    Ok(out)
}

/// Minimizes `D_KL(p̂, p_θ)` over `θ` on `domain`.
pub fn fit(phat: &Distribution, domain: &ParamDomain, space: &SampleSpace, cfg: &FitConfig) -> Result<FitReport> {
    cfg.validate()?;
    if phat.len() != space.len() {
        return Err(Error::DimensionMismatch("empirical distribution does not match the space".into()));
    }
    let start = Instant::now();
    let eta_hat_all = model::expectation_params(phat, domain, space);
    let domain = prune_domain(space, domain, &eta_hat_all)?;
    let eta_hat: Vec<f64> = model::expectation_params(phat, &domain, space);

    let theta0 = match cfg.init {
        Init::Zeros => vec![0.0; domain.len()],
        Init::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..domain.len()).map(|_| rng.random_range(-0.5..=0.5)).collect()
        }
    };
    let mut current = ParamVector::new(theta0, space, &domain)?;
    let mut p = model::model_distribution(&current, space, &domain)?;
    let mut kl_path = model::kl_from_log(phat, current.log_probs());

    let mut trace = Vec::new();
    let mut converged = false;
    let mut max_jitter: f64 = 0.0;
    let mut iterations = 0;
    let residual;

    loop {
        let eta_full = model::eta_all(&p, space);
        let eta: Vec<f64> = domain.space_indices().iter().map(|&i| eta_full[i]).collect();
        let resid: Vec<f64> = eta.iter().zip(&eta_hat).map(|(a, b)| a - b).collect();
        let r = resid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if r < cfg.tol {
            converged = true;
            residual = r;
            break;
        }
        if iterations == cfg.max_iters {
            residual = r;
            break;
        }

        let direction = match cfg.method {
            Method::GradientDescent => resid.clone(),
            Method::NaturalGradient => {
                let g = model::fisher_from_eta(&eta_full, &domain, space, 0.0);
                let (d, jitter) = solve_spd(g, &resid)?;
                max_jitter = max_jitter.max(jitter);
                d
            }
        };

        let mut alpha = cfg.step;
        let accepted = loop {
            let delta: Vec<f64> = direction.iter().map(|d| -alpha * d).collect();
            let de = energies(&delta, space, &domain);
            let (dpsi, dkl) = step_change(&p, current.log_probs(), &de, &delta, &resid);
            let cand: Vec<f64> = current.theta().iter().zip(&delta).map(|(t, d)| t + d).collect();
            let next = current.stepped(cand, &de, dpsi).filter(|_| dkl.is_finite());
            match next {
                Some(next) if !cfg.backtracking || dkl <= 0.0 => break Some((next, dkl)),
                _ if !cfg.backtracking => break None,
                _ => {
                    alpha *= 0.5;
                    if alpha < STEP_FLOOR {
                        break None;
                    }
                }
            }
        };
        let Some((next, dkl)) = accepted else {
            residual = r;
            break;
        };
        trace.push(TraceEntry {
            kl: kl_path,
            residual: r,
            step: alpha,
        });
        kl_path += dkl;
        current = next;
        p = Distribution::from_normalized_unchecked(current.log_probs().iter().map(|l| l.exp()).collect());
        iterations += 1;
    }

    // recompute from θ so the reported state carries no accumulated rounding
    let current = ParamVector::new(current.theta().to_vec(), space, &domain)?;
    let final_kl = model::kl_from_log(phat, current.log_probs());
    Ok(FitReport {
        iterations,
        trace,
        pruned: domain.pruned().to_vec(),
        converged,
        final_theta: current,
        domain,
        final_kl,
        final_residual: residual,
        max_jitter,
        wall_time: start.elapsed(),
    })
}

/// Solves `G d = r`, adding relative jitter to the diagonal only when the
/// plain factorization fails. Returns the direction and the jitter used.
fn solve_spd(g: model::FisherMatrix, r: &[f64]) -> Result<(Vec<f64>, f64)> {
    let rhs = DVector::from_column_slice(r);
    let mean_diag = g.mean_diagonal();
    let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
    if let Some(ch) = Cholesky::new(g.entries().clone()) {
        return Ok((ch.solve(&rhs).iter().copied().collect(), 0.0));
    }
    let mut last = 0.0;
    for rel in JITTER_LADDER {
        let jit = rel * scale;
        let m = g.with_extra_jitter(jit);
        last = m.jitter_applied();
        if let Some(ch) = Cholesky::new(m.into_entries()) {
            let d: Vec<f64> = ch.solve(&rhs).iter().copied().collect();
            if d.iter().all(|v| v.is_finite()) {
                return Ok((d, last));
            }
        }
    }
    Err(Error::SingularFisher(last))
}

/// `(Δψ, ΔKL)` for a step with parameter change `delta` and energy change `de`.
///
/// With `S = Σ p (e^{ΔE} − 1)`, `Δψ = log(1 + S)` and `ΔKL = Δψ − Δθ·η̂`. For
/// small `S` the first-order parts cancel analytically, which keeps the sign of
/// tiny decrements reliable; otherwise `Δψ` is a log-sum-exp over `log p + ΔE`.
fn step_change(p: &Distribution, log_p: &[f64], de: &[f64], delta: &[f64], resid: &[f64]) -> (f64, f64) {
    let mut s_lin = 0.0; // Σ p (e^x − 1 − x)
    let mut s_first = 0.0; // Σ p x = Δθ·η
    for (&pw, &x) in p.mass().iter().zip(de) {
        s_lin += pw * expm1_minus_x(x);
        s_first += pw * x;
    }
    let s = s_lin + s_first;
    let linear: f64 = delta.iter().zip(resid).map(|(d, r)| d * r).sum();
    if s.abs() < 0.5 {
        return (s.ln_1p(), log1p_minus_x(s) + s_lin + linear);
    }
    let shifted: Vec<f64> = log_p.iter().zip(de).map(|(l, x)| l + x).collect();
    let dpsi = model::log_sum_exp(&shifted);
    (dpsi, dpsi - s_first + linear)
}

/// `e^x − 1 − x`, accurate for small `x`.
fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        x2 * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
    } else {
        x.exp_m1() - x
    }
}

/// `ln(1 + s) − s`, accurate for small `s`.
fn log1p_minus_x(s: f64) -> f64 {
    if s.abs() < 1e-3 {
        let s2 = s * s;
        -s2 * (0.5 - s * (1.0 / 3.0 - s * (0.25 - s / 5.0)))
    } else {
        s.ln_1p() - s
    }
}
