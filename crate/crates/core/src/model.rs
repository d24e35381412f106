//! The log-linear model on the sample space.
//!
//! `log p(ω; θ) = Σ_{s ∈ S, s ≤ ω} θ(s) − ψ(θ)`, with expectation parameters
//! `η(s) = Σ_{ω ≥ s} p(ω)` and Fisher information
//! `g_ij = η(s_i ∨ s_j) − η(s_i) η(s_j)`.
//!
//! Down-set sums (energies) and up-set sums (η) are evaluated with grid zeta
//! transforms, so one pass costs `O(|Ω|·D)`.

use nalgebra::DMatrix;

use crate::empirical::Distribution;
use crate::error::{Error, Result};
use crate::poset::{join, ParamDomain, SampleSpace, Subset};

/// Parameters `θ` over a [`ParamDomain`] together with the partition function.
#[derive(Clone, Debug)]
pub struct ParamVector {
    theta: Vec<f64>,
    psi: f64,
    log_prob: Vec<f64>,
}

impl ParamVector {
    pub fn new(theta: Vec<f64>, space: &SampleSpace, domain: &ParamDomain) -> Result<Self> {
        if theta.len() != domain.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters for a domain of {}",
                theta.len(),
                domain.len()
            )));
        }
        if let Some(t) = theta.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(format!("parameter {t} is not finite")));
        }
        let mut log_prob = energies(&theta, space, domain);
        let psi = log_sum_exp(&log_prob);
        for e in &mut log_prob {
            *e -= psi;
        }
        Ok(ParamVector { theta, psi, log_prob })
    }

    /// Parameters `θ + Δθ` given the energy change `ΔE` of the step and the
    /// resulting change `Δψ` of the partition function.
    pub(crate) fn stepped(&self, theta: Vec<f64>, delta_energy: &[f64], delta_psi: f64) -> Option<Self> {
        if !delta_psi.is_finite() || theta.iter().any(|t| !t.is_finite()) {
            return None;
        }
        let log_prob: Vec<f64> = self
            .log_prob
            .iter()
            .zip(delta_energy)
            .map(|(l, e)| l + e - delta_psi)
            .collect();
        if log_prob.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return None;
        }
        Some(ParamVector {
            theta,
            psi: self.psi + delta_psi,
            log_prob,
        })
    }

    pub fn zeros(space: &SampleSpace, domain: &ParamDomain) -> Self {
        Self::new(vec![0.0; domain.len()], space, domain).expect("zero parameters are valid")
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// `θ(⊥) = −ψ`.
    pub fn theta_bottom(&self) -> f64 {
        -self.psi
    }

    /// `log p(ω)` for every state, in space order.
    pub fn log_probs(&self) -> &[f64] {
        &self.log_prob
    }
}

/// `Σ_{s ∈ S, s ≤ ω} θ(s)` for every state `ω`.
pub fn energies(theta: &[f64], space: &SampleSpace, domain: &ParamDomain) -> Vec<f64> {
    let mut grid = vec![0.0; space.grid_len()];
    for (s, t) in domain.members().iter().zip(theta) {
        grid[space.grid_index(s)] = *t;
    }
    space.downset_transform(&mut grid);
    space.gather(&grid)
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `p(ω; θ)` over the whole space.
pub fn model_distribution(theta: &ParamVector, space: &SampleSpace, domain: &ParamDomain) -> Result<Distribution> {
    if theta.log_prob.len() != space.len() || theta.theta.len() != domain.len() {
        return Err(Error::DimensionMismatch(
            "parameter vector was built for a different space or domain".into(),
        ));
    }
    Ok(Distribution::from_normalized_unchecked(
        theta.log_prob.iter().map(|l| l.exp()).collect(),
    ))
}

/// `η(ω) = Σ_{ω' ≥ ω} p(ω')` for every state of the space (`η(⊥) = 1`).
pub fn eta_all(p: &Distribution, space: &SampleSpace) -> Vec<f64> {
    let mut grid = space.scatter(p.mass());
    space.upset_transform(&mut grid);
    space.gather(&grid)
}

/// `η(s)` for the members of `domain`, in domain order.
pub fn expectation_params(p: &Distribution, domain: &ParamDomain, space: &SampleSpace) -> Vec<f64> {
    let all = eta_all(p, space);
    domain.space_indices().iter().map(|&i| all[i]).collect()
}

/// `D_KL(p̂, p) = Σ p̂ log(p̂/p)` with `0·log 0 = 0`.
pub fn kl_divergence(phat: &Distribution, p: &Distribution) -> Result<f64> {
    if phat.len() != p.len() {
        return Err(Error::DimensionMismatch(format!(
            "distributions have {} and {} states",
            phat.len(),
            p.len()
        )));
    }
    let mut kl = 0.0;
    for (i, (&a, &b)) in phat.mass().iter().zip(p.mass()).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::SupportMismatch(i));
            }
            kl += a * (a.ln() - b.ln());
        }
    }
    Ok(kl.max(0.0))
}

/// KL against a model given in log space, which avoids underflow in `p`.
pub(crate) fn kl_from_log(phat: &Distribution, log_p: &[f64]) -> f64 {
    phat.mass()
        .iter()
        .zip(log_p)
        .filter(|(a, _)| **a > 0.0)
        .map(|(&a, &l)| a * (a.ln() - l))
        .sum::<f64>()
        .max(0.0)
}

/// Symmetric Fisher information over the parameter domain.
#[derive(Clone, Debug)]
pub struct FisherMatrix {
    entries: DMatrix<f64>,
    jitter: f64,
}

impl FisherMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn jitter_applied(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn mean_diagonal(&self) -> f64 {
        let n = self.dim().max(1) as f64;
        self.entries.diagonal().sum() / n
    }

    pub(crate) fn with_extra_jitter(&self, extra: f64) -> FisherMatrix {
        let mut entries = self.entries.clone();
        for i in 0..entries.nrows() {
            entries[(i, i)] += extra;
        }
        FisherMatrix {
            entries,
            jitter: self.jitter + extra,
        }
    }

    pub(crate) fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }
}

/// Fisher information of `p` over `domain`, plus `jitter` on the diagonal.
pub fn fisher_matrix(p: &Distribution, domain: &ParamDomain, space: &SampleSpace, jitter: f64) -> Result<FisherMatrix> {
    if p.len() != space.len() {
        return Err(Error::DimensionMismatch("distribution does not match the space".into()));
    }
    if !(jitter >= 0.0) {
        return Err(Error::InvalidArgument(format!("jitter must be non-negative, got {jitter}")));
    }
    Ok(fisher_from_eta(&eta_all(p, space), domain, space, jitter))
}

pub(crate) fn fisher_from_eta(eta: &[f64], domain: &ParamDomain, space: &SampleSpace, jitter: f64) -> FisherMatrix {
    let members = domain.members();
    let n = members.len();
    let idx = domain.space_indices();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        let ei = eta[idx[i]];
        for j in i..n {
            let top = join(&members[i], &members[j]).expect("domain members are never bottom");
            let v = eta[space.index_unchecked(&top)] - ei * eta[idx[j]];
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
        g[(i, i)] += jitter;
    }
    FisherMatrix { entries: g, jitter }
}

/// Per-bin intensity (events per second) recovered for one subset.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityEstimate {
    pub subset: Subset,
    pub values: Vec<f64>,
    /// Set when the subset had no events, in which case `values` is all zero.
    pub empty: bool,
}

/// Intensity of subset `J` from a distribution over the space.
///
/// The per-bin profile is the mass of states whose subset contains `J`,
/// `Σ_{J' ⊇ J} p((J', τ)) = η((J, τ)) − η((J, τ+1))`, normalized over bins and
/// scaled so that `Σ_τ λ(τ)·T/M = count`.
pub fn intensity_estimate(p: &Distribution, subset: Subset, count: usize, space: &SampleSpace) -> Result<IntensityEstimate> {
    let profile = subset_marginal(p, subset, space)?;
    let m = space.bins();
    if count == 0 {
        return Ok(IntensityEstimate {
            subset,
            values: vec![0.0; m],
            empty: true,
        });
    }
    let total: f64 = profile.iter().sum();
    if !(total > 0.0) {
        return Err(Error::SupportMismatch(0));
    }
    let scale = count as f64 / (total * space.bin_width());
    Ok(IntensityEstimate {
        subset,
        values: profile.iter().map(|v| v * scale).collect(),
        empty: false,
    })
}

/// `Σ_{J' ⊇ J} p((J', τ))` for `τ = 1..M`.
pub fn subset_marginal(p: &Distribution, subset: Subset, space: &SampleSpace) -> Result<Vec<f64>> {
    if subset.is_empty() || subset.max_index() > space.dims() {
        return Err(Error::InvalidArgument(format!(
            "subset {subset} is not a nonempty subset of 1..={}",
            space.dims()
        )));
    }
    if p.len() != space.len() {
        return Err(Error::DimensionMismatch("distribution does not match the space".into()));
    }
    let m = space.bins();
    let mut out = vec![0.0; m];
    for (s, &v) in space.states().iter().zip(p.mass()) {
        if !s.is_bottom() && subset.is_subset_of(s.subset()) {
            out[s.bin() - 1] += v;
        }
    }
    Ok(out)
}
