//! End-to-end estimation: smooth the events, build `p̂`, fit a `k`-th order
//! model, and read intensities back out.

use std::collections::BTreeMap;

use crate::empirical::{empirical_distribution, Distribution, EventData, SmootherConfig};
use crate::error::{Error, Result};
use crate::model::{self, IntensityEstimate, ParamVector};
use crate::optimizer::{self, FitConfig, FitReport, Method};
use crate::poset::{ParamDomain, PosetState, SampleSpace, Subset};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    /// The same `h` for every subset.
    Fixed(f64),
    /// Scott's rule per subset.
    Scott,
}

#[derive(Clone, Debug)]
pub struct EstimatorConfig {
    pub order: usize,
    pub bins: usize,
    pub bandwidth: Bandwidth,
    pub fit: FitConfig,
}

impl EstimatorConfig {
    pub fn new(order: usize, bins: usize, bandwidth: Bandwidth) -> Self {
        EstimatorConfig {
            order,
            bins,
            bandwidth,
            fit: FitConfig::natural(),
        }
    }

    pub fn smoother(&self, data: &EventData) -> Result<SmootherConfig> {
        match self.bandwidth {
            Bandwidth::Fixed(h) => SmootherConfig::uniform(data, h, self.bins),
            Bandwidth::Scott => SmootherConfig::scott(data, self.bins),
        }
    }
}

/// Outcome of the optimizer, kept with the model.
#[derive(Clone, Debug, PartialEq)]
pub struct FitSummary {
    pub method: Method,
    pub iterations: usize,
    pub final_residual: f64,
    pub final_kl: f64,
    pub converged: bool,
}

impl FitSummary {
    pub fn from_report(report: &FitReport, method: Method) -> Self {
        FitSummary {
            method,
            iterations: report.iterations,
            final_residual: report.final_residual,
            final_kl: report.final_kl,
            converged: report.converged,
        }
    }
}

/// A fitted model with everything needed to evaluate it without the data.
#[derive(Clone, Debug)]
pub struct FittedModel {
    space: SampleSpace,
    order: usize,
    window: f64,
    bandwidths: BTreeMap<Subset, f64>,
    domain: ParamDomain,
    theta: ParamVector,
    counts: BTreeMap<Subset, usize>,
    summary: FitSummary,
}

impl FittedModel {
    /// Fits a model to `data`, which should carry joint events for every
    /// subset (those without count as empty).
    pub fn fit(data: &EventData, cfg: &EstimatorConfig) -> Result<(Self, FitReport, Distribution)> {
        let d = data.dims();
        if cfg.order == 0 || cfg.order > d {
            return Err(Error::InvalidArgument(format!("order must be in 1..={d}, got {}", cfg.order)));
        }
        let space = SampleSpace::new(d, cfg.bins, data.duration())?;
        let smoother = cfg.smoother(data)?;
        let phat = empirical_distribution(data, &smoother, &space)?;
        let domain = ParamDomain::new(&space, cfg.order)?;
        let report = optimizer::fit(&phat, &domain, &space, &cfg.fit)?;
        let counts = space.subsets().iter().map(|&s| (s, data.count(s))).collect();
        let model = FittedModel {
            order: cfg.order,
            window: data.window(),
            bandwidths: smoother.bandwidths().clone(),
            domain: report.domain.clone(),
            theta: report.final_theta.clone(),
            counts,
            summary: FitSummary::from_report(&report, cfg.fit.method),
            space,
        };
        Ok((model, report, phat))
    }

    /// Rebuilds a model from stored parameters. `pruned` lists the members of
    /// the order-`k` domain that carry no parameter.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        space: SampleSpace,
        order: usize,
        window: f64,
        bandwidths: BTreeMap<Subset, f64>,
        pruned: &[PosetState],
        theta: &BTreeMap<PosetState, f64>,
        counts: BTreeMap<Subset, usize>,
        summary: FitSummary,
    ) -> Result<Self> {
        let full = ParamDomain::new(&space, order)?;
        let keep: Vec<bool> = full.members().iter().map(|s| !pruned.contains(s)).collect();
        if let Some(s) = pruned.iter().find(|s| full.index_of(&space, s).is_none()) {
            return Err(Error::Format(format!("pruned state {s} is not in the order-{order} domain")));
        }
        let domain = full.restrict(&space, &keep)?;
        if theta.len() != domain.len() {
            return Err(Error::Format(format!(
                "{} parameters for a domain of {}",
                theta.len(),
                domain.len()
            )));
        }
        let values = domain
            .members()
            .iter()
            .map(|s| {
                theta
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::Format(format!("missing parameter for {s}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let theta = ParamVector::new(values, &space, &domain)?;
        Ok(FittedModel {
            space,
            order,
            window,
            bandwidths,
            domain,
            theta,
            counts,
            summary,
        })
    }

    pub fn space(&self) -> &SampleSpace {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn bandwidths(&self) -> &BTreeMap<Subset, f64> {
        &self.bandwidths
    }

    pub fn domain(&self) -> &ParamDomain {
        &self.domain
    }

    pub fn params(&self) -> &ParamVector {
        &self.theta
    }

    pub fn counts(&self) -> &BTreeMap<Subset, usize> {
        &self.counts
    }

    pub fn summary(&self) -> &FitSummary {
        &self.summary
    }

    /// Number of (joint) events seen for `subset` at fit time.
    pub fn count(&self, subset: Subset) -> usize {
        self.counts.get(&subset).copied().unwrap_or(0)
    }

    pub fn distribution(&self) -> Distribution {
        model::model_distribution(&self.theta, &self.space, &self.domain)
            .expect("parameters were validated against this domain")
    }

    /// `θ` keyed by state.
    pub fn theta_map(&self) -> BTreeMap<PosetState, f64> {
        self.domain
            .members()
            .iter()
            .copied()
            .zip(self.theta.theta().iter().copied())
            .collect()
    }

    pub fn intensity(&self, subset: Subset) -> Result<IntensityEstimate> {
        model::intensity_estimate(&self.distribution(), subset, self.count(subset), &self.space)
    }
}
