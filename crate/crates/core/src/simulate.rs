//! Ground-truth intensities and event samplers.
//!
//! One-dimensional processes are drawn by thinning a homogeneous process at a
//! dominating rate. Multi-process data comes from a Gaussian mixture on
//! `[0, T]^D`: each draw is one `D`-vector whose coordinates become one event
//! per process, and whose coordinate subsets that fall within the coincidence
//! window become joint events.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution as _, Exp1, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::empirical::{subsets_between, EventData};
use crate::error::{Error, Result};
use crate::poset::Subset;

/// Number of points checked against the bound before thinning.
const PROBE_POINTS: usize = 10_000;
/// Lattice size for multivariate normal box probabilities.
const LATTICE_POINTS: usize = 4096;
const MAX_COV_RETRIES: usize = 100;

/// One-dimensional intensity with a closed-form bin integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateFunction {
    Constant { level: f64 },
    /// `λ(t) = (A/2)(1 + sin(ω₀ t))`: troughs at 0, peaks at `A`.
    Sinusoidal { amplitude: f64, frequency: f64 },
}

impl RateFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RateFunction::Constant { level } if !(level >= 0.0 && level.is_finite()) => Err(
                Error::InvalidArgument(format!("level must be non-negative, got {level}")),
            ),
            RateFunction::Sinusoidal { amplitude, frequency }
                if !(amplitude >= 0.0 && amplitude.is_finite() && frequency.is_finite()) =>
            {
                Err(Error::InvalidArgument(format!(
                    "need amplitude >= 0 and finite frequency, got {amplitude}, {frequency}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            RateFunction::Constant { level } => level,
            RateFunction::Sinusoidal { amplitude, frequency } => 0.5 * amplitude * (1.0 + (frequency * t).sin()),
        }
    }

    /// Smallest valid thinning bound.
    pub fn bound(&self) -> f64 {
        match *self {
            RateFunction::Constant { level } => level,
            RateFunction::Sinusoidal { amplitude, .. } => amplitude,
        }
    }

    /// `∫_a^b λ(t) dt`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match *self {
            RateFunction::Constant { level } => level * (b - a),
            RateFunction::Sinusoidal { amplitude, frequency } => {
                let osc = if frequency == 0.0 {
                    0.0
                } else {
                    ((frequency * a).cos() - (frequency * b).cos()) / frequency
                };
                0.5 * amplitude * ((b - a) + osc)
            }
        }
    }
}

/// Gaussian mixture on `[0, T]^D` scaled to an expected event count.
#[derive(Clone, Debug)]
pub struct GaussianMixture {
    dims: usize,
    duration: f64,
    count: usize,
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
    chols: Vec<DMatrix<f64>>,
    box_mass: f64,
}

/// Parameters of the random mixture generator.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureConfig {
    pub dims: usize,
    pub components: usize,
    pub count: usize,
    pub duration: f64,
    /// Coincidence window for deriving joint events from the draws.
    pub window: f64,
    /// Largest subset size for which joint events and truths are produced.
    pub max_order: usize,
    /// Bins of the discretized ground truth.
    pub bins: usize,
    /// Inverse-Wishart degrees of freedom; `None` uses `D + 3`.
    pub wishart_dof: Option<f64>,
    /// Inverse-Wishart scale `s` in `Ψ = s·I`; `None` uses `2 (T/20)^2`,
    /// which puts the mean covariance at `(T/20)^2 I` for the default dof.
    pub cov_scale: Option<f64>,
}

impl MixtureConfig {
    pub fn new(dims: usize, components: usize, count: usize, duration: f64) -> Self {
        MixtureConfig {
            dims,
            components,
            count,
            duration,
            window: 0.1,
            max_order: dims,
            bins: 100,
            wishart_dof: None,
            cov_scale: None,
        }
    }

    pub fn dof(&self) -> f64 {
        self.wishart_dof.unwrap_or(self.dims as f64 + 3.0)
    }

    pub fn scale(&self) -> f64 {
        self.cov_scale.unwrap_or(2.0 * (self.duration / 20.0).powi(2))
    }
}

impl GaussianMixture {
    pub fn new(
        duration: f64,
        count: usize,
        weights: Vec<f64>,
        means: Vec<DVector<f64>>,
        covs: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != covs.len() {
            return Err(Error::DimensionMismatch("mixture needs matching weights, means and covariances".into()));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
        }
        let dims = means[0].len();
        if dims == 0 || dims > crate::poset::MAX_DIMS {
            return Err(Error::InvalidArgument(format!("unsupported dimension {dims}")));
        }
        let wsum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (wsum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("mixture weights must be non-negative and sum to 1".into()));
        }
        let mut chols = Vec::with_capacity(covs.len());
        for (m, c) in means.iter().zip(&covs) {
            if m.len() != dims || c.nrows() != dims || c.ncols() != dims {
                return Err(Error::DimensionMismatch("component shapes differ".into()));
            }
            if (c - c.transpose()).amax() > 1e-12 * c.amax().max(1.0) {
                return Err(Error::InvalidArgument("covariance is not symmetric".into()));
            }
            let ch = Cholesky::new(c.clone())
                .ok_or_else(|| Error::InvalidArgument("covariance is not positive definite".into()))?;
            chols.push(ch.l());
        }
        let mut mix = GaussianMixture {
            dims,
            duration,
            count,
            weights,
            means,
            covs,
            chols,
            box_mass: 1.0,
        };
        let lo = vec![0.0; dims];
        let hi = vec![duration; dims];
        mix.box_mass = (0..mix.weights.len())
            .map(|k| mix.weights[k] * box_probability(&mix.means[k], &mix.covs[k], &lo, &hi))
            .sum();
        if !(mix.box_mass > 0.0) {
            return Err(Error::Sampling("mixture has no mass inside the observation box".into()));
        }
        Ok(mix)
    }

    /// Flat-Dirichlet weights, uniform means, inverse-Wishart covariances.
    pub fn random<R: Rng + ?Sized>(cfg: &MixtureConfig, rng: &mut R) -> Result<Self> {
        let d = cfg.dims;
        if d == 0 || d > crate::poset::MAX_DIMS {
            return Err(Error::InvalidArgument(format!("dims must be in 1..={}", crate::poset::MAX_DIMS)));
        }
        if cfg.components == 0 {
            return Err(Error::InvalidArgument("components must be at least 1".into()));
        }
        let dof = cfg.dof();
        let scale = cfg.scale();
        if !(dof > d as f64 - 1.0) {
            return Err(Error::InvalidArgument(format!("wishart dof must exceed {}, got {dof}", d - 1)));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("covariance scale must be positive, got {scale}")));
        }
        let raw: Vec<f64> = (0..cfg.components).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mut means = Vec::with_capacity(cfg.components);
        let mut covs = Vec::with_capacity(cfg.components);
        for _ in 0..cfg.components {
            means.push(DVector::from_fn(d, |_, _| rng.random_range(0.0..cfg.duration)));
            covs.push(inverse_wishart(d, dof, scale, rng)?);
        }
        Self::new(cfg.duration, cfg.count, weights, means, covs)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covs
    }

    /// Probability that an untruncated draw lands in `[0, T]^D`.
    pub fn box_mass(&self) -> f64 {
        self.box_mass
    }

    /// Draws `count` points inside the box; row-major, `D` coordinates each.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let d = self.dims;
        let mut out = Vec::with_capacity(self.count * d);
        let max_attempts = 1000 * self.count + 1000;
        let mut attempts = 0;
        let mut z = DVector::zeros(d);
        while out.len() < self.count * d {
            attempts += 1;
            if attempts > max_attempts {
                return Err(Error::Sampling("rejection sampling exceeded its attempt budget".into()));
            }
            let k = pick(&self.weights, rng.random::<f64>());
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let x = &self.means[k] + &self.chols[k] * &z;
            if x.iter().all(|v| *v >= 0.0 && *v <= self.duration) {
                out.extend(x.iter());
            }
        }
        Ok(out)
    }

    /// Intensity of subset `J` on the diagonal `t·1`, at each bin center.
    ///
    /// This is `N` times the `J`-marginal density of the box-truncated
    /// mixture. For a singleton it is the process intensity in events per
    /// second; for larger subsets it is the shape of the coincidence intensity.
    pub fn diagonal_intensity(&self, subset: Subset, bins: usize) -> Result<Vec<f64>> {
        if subset.is_empty() || subset.max_index() > self.dims {
            return Err(Error::InvalidArgument(format!("subset {subset} outside 1..={}", self.dims)));
        }
        if bins == 0 {
            return Err(Error::InvalidArgument("bins must be at least 1".into()));
        }
        let width = self.duration / bins as f64;
        let centers: Vec<f64> = (1..=bins).map(|b| (b as f64 - 0.5) * width).collect();
        let inner: Vec<usize> = subset.indices().iter().map(|j| j - 1).collect();
        let rest: Vec<usize> = (0..self.dims).filter(|j| !inner.contains(j)).collect();
        let mut out = vec![0.0; bins];
        for k in 0..self.weights.len() {
            if self.weights[k] == 0.0 {
                continue;
            }
            let parts = Conditional::new(&self.means[k], &self.covs[k], &inner, &rest)?;
            for (o, &c) in out.iter_mut().zip(&centers) {
                let x = DVector::from_element(inner.len(), c);
                let dens = parts.marginal_density(&x);
                if dens == 0.0 {
                    continue;
                }
                let cond = parts.rest_in_box(&x, self.duration);
                *o += self.weights[k] * dens * cond;
            }
        }
        let scale = self.count as f64 / self.box_mass;
        Ok(out.into_iter().map(|v| v * scale).collect())
    }
}

/// Gaussian split into an inner block (evaluated) and the remaining block.
struct Conditional {
    inner_mean: DVector<f64>,
    inner_chol: DMatrix<f64>,
    inner_log_norm: f64,
    rest_mean: DVector<f64>,
    /// `Σ_rJ Σ_JJ^{-1}`.
    gain: DMatrix<f64>,
    rest_cov: DMatrix<f64>,
}

impl Conditional {
    fn new(mean: &DVector<f64>, cov: &DMatrix<f64>, inner: &[usize], rest: &[usize]) -> Result<Self> {
        let sub = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| cov[(rows[i], cols[j])]);
        let sjj = sub(inner, inner);
        let ch = Cholesky::new(sjj.clone())
            .ok_or_else(|| Error::InvalidArgument("covariance block is not positive definite".into()))?;
        let l = ch.l();
        let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let inner_log_norm = -0.5 * (inner.len() as f64 * (2.0 * PI).ln() + log_det);
        let srj = sub(rest, inner);
        let gain = if rest.is_empty() {
            DMatrix::zeros(0, inner.len())
        } else {
            ch.solve(&srj.transpose()).transpose()
        };
        let rest_cov = if rest.is_empty() {
            DMatrix::zeros(0, 0)
        } else {
            let c = sub(rest, rest) - &gain * srj.transpose();
            (&c + c.transpose()) * 0.5
        };
        Ok(Conditional {
            inner_mean: DVector::from_fn(inner.len(), |i, _| mean[inner[i]]),
            inner_chol: l,
            inner_log_norm,
            rest_mean: DVector::from_fn(rest.len(), |i, _| mean[rest[i]]),
            gain,
            rest_cov,
        })
    }

    fn marginal_density(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.inner_mean;
        let z = self
            .inner_chol
            .solve_lower_triangular(&diff)
            .expect("cholesky factor has a positive diagonal");
        (self.inner_log_norm - 0.5 * z.norm_squared()).exp()
    }

    fn rest_in_box(&self, x: &DVector<f64>, duration: f64) -> f64 {
        let r = self.rest_mean.len();
        if r == 0 {
            return 1.0;
        }
        let mu = &self.rest_mean + &self.gain * (x - &self.inner_mean);
        box_probability(&mu, &self.rest_cov, &vec![0.0; r], &vec![duration; r])
    }
}

/// `P(lo ≤ X ≤ hi)` for `X ~ N(mean, cov)`.
///
/// Exact for one dimension; otherwise a separation-of-variables integral over
/// a fixed rank-1 lattice, so repeated calls give identical values.
pub fn box_probability(mean: &DVector<f64>, cov: &DMatrix<f64>, lo: &[f64], hi: &[f64]) -> f64 {
    let n = mean.len();
    let std = Normal::standard();
    if n == 0 {
        return 1.0;
    }
    if n == 1 {
        let s = cov[(0, 0)].sqrt();
        return (std.cdf((hi[0] - mean[0]) / s) - std.cdf((lo[0] - mean[0]) / s)).max(0.0);
    }
    let Some(ch) = Cholesky::<f64, Dyn>::new(cov.clone()) else {
        return f64::NAN;
    };
    let c = ch.l();
    let a: Vec<f64> = (0..n).map(|i| lo[i] - mean[i]).collect();
    let b: Vec<f64> = (0..n).map(|i| hi[i] - mean[i]).collect();
    let gens: Vec<f64> = PRIMES[..n - 1].iter().map(|p| (*p as f64).sqrt().fract()).collect();
    let mut total = 0.0;
    let mut y = vec![0.0; n];
    for m in 1..=LATTICE_POINTS {
        let mut d = std.cdf(a[0] / c[(0, 0)]);
        let mut e = std.cdf(b[0] / c[(0, 0)]);
        let mut f = e - d;
        for i in 1..n {
            if f <= 0.0 {
                break;
            }
            let w = (m as f64 * gens[i - 1] + 0.5).fract();
            let u = (d + w * (e - d)).clamp(1e-300, 1.0 - 1e-16);
            y[i - 1] = std.inverse_cdf(u);
            let s: f64 = (0..i).map(|j| c[(i, j)] * y[j]).sum();
            d = std.cdf((a[i] - s) / c[(i, i)]);
            e = std.cdf((b[i] - s) / c[(i, i)]);
            f *= e - d;
        }
        total += f.max(0.0);
    }
    total / LATTICE_POINTS as f64
}

const PRIMES: [u32; 20] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71];

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.len() - 1
}

/// Inverse-Wishart draw with scale `s·I` via the Bartlett decomposition of
/// the Wishart precision. Non-SPD results are redrawn.
fn inverse_wishart<R: Rng + ?Sized>(d: usize, dof: f64, scale: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    for _ in 0..MAX_COV_RETRIES {
        let mut a = DMatrix::zeros(d, d);
        for i in 0..d {
            let chi = ChiSquared::new(dof - i as f64).map_err(|e| Error::Sampling(e.to_string()))?;
            a[(i, i)] = chi.sample(rng).sqrt();
            for j in 0..i {
                a[(i, j)] = rng.sample(StandardNormal);
            }
        }
        // precision W = (A Aᵀ) / s, so Σ = s (A Aᵀ)⁻¹
        let w = &a * a.transpose();
        if let Some(inv) = w.try_inverse() {
            let sigma = (&inv + inv.transpose()) * (0.5 * scale);
            if sigma.iter().all(|v| v.is_finite()) && Cholesky::new(sigma.clone()).is_some() {
                return Ok(sigma);
            }
        }
    }
    Err(Error::Sampling("could not draw a positive-definite covariance".into()))
}

/// What generated a sample.
#[derive(Clone, Debug)]
pub enum IntensitySpec {
    Rate(RateFunction),
    GaussianMixture(GaussianMixture),
}

/// A drawn sample with its per-bin true intensity for each evaluated subset.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub spec: IntensitySpec,
    pub bins: usize,
    /// Per-bin intensity at bin midpoints, keyed by subset.
    pub truth: BTreeMap<Subset, Vec<f64>>,
    pub data: EventData,
    /// Row-major draws, `D` coordinates each (one coordinate per event for
    /// one-dimensional kinds).
    pub points: Vec<f64>,
}

/// Ogata–Lewis thinning of a rate-`λ̄` homogeneous process on `[0, T]`.
pub fn thinning_sample<F: Fn(f64) -> f64>(lambda: F, lambda_bar: f64, duration: f64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    thinning_sample_with(&lambda, lambda_bar, duration, &mut rng)
}

pub fn thinning_sample_with<F: Fn(f64) -> f64, R: Rng + ?Sized>(
    lambda: &F,
    lambda_bar: f64,
    duration: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(lambda_bar > 0.0 && lambda_bar.is_finite()) {
        return Err(Error::InvalidArgument(format!("bound must be positive, got {lambda_bar}")));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
    }
    let tol = lambda_bar * 1e-12;
    for i in 0..=PROBE_POINTS {
        let t = duration * i as f64 / PROBE_POINTS as f64;
        let v = lambda(t);
        if !(v >= 0.0) || v > lambda_bar + tol {
            return Err(Error::BoundViolated { t, value: v, bound: lambda_bar });
        }
    }
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        let u = 1.0 - rng.random::<f64>();
        t += -u.ln() / lambda_bar;
        if t > duration {
            break;
        }
        let v = lambda(t);
        if v > lambda_bar + tol {
            return Err(Error::BoundViolated { t, value: v, bound: lambda_bar });
        }
        if rng.random::<f64>() * lambda_bar < v {
            out.push(t);
        }
    }
    Ok(out)
}

/// One process drawn by thinning, with its true intensity at bin midpoints.
pub fn simulate_rate(rate: RateFunction, duration: f64, bins: usize, seed: u64) -> Result<GroundTruth> {
    rate.validate()?;
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    let bound = rate.bound();
    let events = if bound == 0.0 {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
        }
        Vec::new()
    } else {
        thinning_sample(|t| rate.rate(t), bound, duration, seed)?
    };
    let width = duration / bins as f64;
    let truth: Vec<f64> = (1..=bins).map(|b| rate.rate((b as f64 - 0.5) * width)).collect();
    Ok(GroundTruth {
        spec: IntensitySpec::Rate(rate),
        bins,
        truth: BTreeMap::from([(Subset::singleton(1), truth)]),
        data: EventData::from_streams(vec![events.clone()], duration)?,
        points: events,
    })
}

/// Random mixture intensity, a sample of `count` points, and the truth for
/// every subset up to `max_order`.
pub fn mixture_generator(cfg: &MixtureConfig, seed: u64) -> Result<GroundTruth> {
    if cfg.bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    if cfg.max_order == 0 || cfg.max_order > cfg.dims {
        return Err(Error::InvalidArgument(format!(
            "max order must be in 1..={}, got {}",
            cfg.dims, cfg.max_order
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mix = GaussianMixture::random(cfg, &mut rng)?;
    let points = mix.sample(&mut rng)?;
    let data = EventData::from_points(&points, cfg.dims, cfg.duration, cfg.window, cfg.max_order)?;
    let mut truth = BTreeMap::new();
    for s in subsets_between(cfg.dims, 1, cfg.max_order) {
        truth.insert(s, mix.diagonal_intensity(s, cfg.bins)?);
    }
    Ok(GroundTruth {
        spec: IntensitySpec::GaussianMixture(mix),
        bins: cfg.bins,
        truth,
        data,
        points,
    })
}

/// Bernoulli toy stream: a candidate at `k·step` for `k = 1..⌊T/step⌋`, each
/// kept with probability `p`.
pub fn bernoulli_toy(p: f64, step: f64, duration: f64, seed: u64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("probability must be in [0, 1], got {p}")));
    }
    if !(step > 0.0 && step.is_finite()) || !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidArgument("step and duration must be positive".into()));
    }
    let n = (duration / step + 1e-9).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((1..=n)
        .filter(|_| rng.random::<f64>() < p)
        .map(|k| (k as f64 * step).min(duration))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_integral_matches_quadrature() {
        let r = RateFunction::Sinusoidal {
            amplitude: 201.0,
            frequency: 20.0 * PI,
        };
        let (a, b) = (0.13, 0.71);
        let n = 200_000;
        let h = (b - a) / n as f64;
        let quad: f64 = (0..n).map(|i| r.rate(a + (i as f64 + 0.5) * h) * h).sum();
        assert!((quad - r.integral(a, b)).abs() < 1e-6);
        assert!(r.rate(-0.025).abs() < 1e-9);
    }

    #[test]
    fn zero_rate_and_bounds() {
        assert!(thinning_sample(|_| 0.0, 1.0, 10.0, 1).unwrap().is_empty());
        assert!(matches!(thinning_sample(|_| 1.0, 0.0, 10.0, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            thinning_sample(|t| t, 1.0, 2.0, 1),
            Err(Error::BoundViolated { .. })
        ));
    }

    #[test]
    fn thinning_is_deterministic_and_sorted() {
        let a = thinning_sample(|t| 5.0 + t.sin(), 6.0, 20.0, 3).unwrap();
        let b = thinning_sample(|t| 5.0 + t.sin(), 6.0, 20.0, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] <= w[1]));
        assert!(a.iter().all(|t| (0.0..=20.0).contains(t)));
    }

    #[test]
    fn bernoulli_extremes() {
        assert_eq!(bernoulli_toy(1.0, 1.0, 100.0, 0).unwrap().len(), 100);
        assert!(bernoulli_toy(0.0, 1.0, 100.0, 0).unwrap().is_empty());
        assert!(bernoulli_toy(1.5, 1.0, 100.0, 0).is_err());
        assert_eq!(bernoulli_toy(1.0, 0.5, 2.0, 0).unwrap(), vec![0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn box_probability_one_and_two_dims() {
        let m = DVector::from_vec(vec![0.0]);
        let c = DMatrix::from_vec(1, 1, vec![1.0]);
        let p = box_probability(&m, &c, &[-1.96], &[1.96]);
        assert!((p - 0.950004209703559).abs() < 1e-9);
        // independent 2-D box factorizes
        let m2 = DVector::from_vec(vec![0.5, -0.2]);
        let c2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        let p2 = box_probability(&m2, &c2, &[0.0, -1.0], &[2.0, 3.0]);
        let std = Normal::standard();
        let e = (std.cdf(1.5) - std.cdf(-0.5)) * (std.cdf(1.6) - std.cdf(-0.4));
        assert!((p2 - e).abs() < 1e-4, "{p2} vs {e}");
    }

    #[test]
    fn inverse_wishart_is_spd_and_reproducible() {
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let a = inverse_wishart(3, 6.0, 2.0, &mut r1).unwrap();
        let b = inverse_wishart(3, 6.0, 2.0, &mut r2).unwrap();
        assert_eq!(a, b);
        assert!(Cholesky::new(a).is_some());
    }

    #[test]
    fn empty_mixture_sample_still_has_truth() {
        let cfg = MixtureConfig {
            bins: 10,
            ..MixtureConfig::new(2, 3, 0, 10.0)
        };
        let g = mixture_generator(&cfg, 9).unwrap();
        assert_eq!(g.data.count(Subset::singleton(1)), 0);
        assert_eq!(g.truth.len(), 3);
        assert!(g.truth.values().all(|v| v.len() == 10 && v.iter().all(|x| x.is_finite())));
    }
}
