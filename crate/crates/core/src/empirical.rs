//! Event streams, coincidence extraction and the kernel-smoothed empirical
//! distribution over the sample space.
//!
//! For a subset `I` with joint events `t_1 .. t_N` (each a vector with one
//! coordinate per member of `I`), the smoother at bin `τ` is
//!
//! ```text
//! σ_I(τ) = 1/(N h^|I|) Σ_i Π_{j∈I} φ((c(τ) - t_i^(j)) / h),   c(τ) = (τ - 0.5)·T/M
//! ```
//!
//! and the empirical probability of `(J, τ)` is proportional to the sum of
//! `σ_I(τ)` over nonempty `I ⊆ J`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::poset::{ParamDomain, SampleSpace, Subset};

/// Unnormalized mass given to `⊥`, relative to the largest cell.
pub const BOTTOM_MASS_RATIO: f64 = 1e-9;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Joint events for one subset, stored row-major with `arity` coordinates per event.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct JointEvents {
    arity: usize,
    coords: Vec<f64>,
}

impl JointEvents {
    pub fn new(arity: usize, coords: Vec<f64>) -> Result<Self> {
        if arity == 0 || !coords.len().is_multiple_of(arity) {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates do not split into vectors of length {arity}",
                coords.len()
            )));
        }
        Ok(JointEvents { arity, coords })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.arity
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.arity)
    }

    /// Coordinate mean of each event, used to place a joint event in a bin.
    pub fn representative_times(&self) -> Vec<f64> {
        self.iter()
            .map(|v| v.iter().sum::<f64>() / self.arity as f64)
            .collect()
    }
}

/// Per-process event streams plus derived joint events for every subset.
#[derive(Clone, Debug)]
pub struct EventData {
    dims: usize,
    duration: f64,
    window: f64,
    /// Keyed by subset; singletons hold the sorted process streams.
    joint: BTreeMap<Subset, JointEvents>,
}

impl EventData {
    /// Wraps raw streams (one per process) without deriving any joint events.
    pub fn from_streams(mut streams: Vec<Vec<f64>>, duration: f64) -> Result<Self> {
        if streams.is_empty() || streams.len() > crate::poset::MAX_DIMS {
            return Err(Error::InvalidArgument(format!(
                "need between 1 and {} processes, got {}",
                crate::poset::MAX_DIMS,
                streams.len()
            )));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
        }
        let mut joint = BTreeMap::new();
        for (j, s) in streams.iter_mut().enumerate() {
            if let Some(t) = s.iter().find(|t| !(t.is_finite() && **t >= 0.0 && **t <= duration)) {
                return Err(Error::InvalidArgument(format!(
                    "process {} has timestamp {t} outside [0, {duration}]",
                    j + 1
                )));
            }
            s.sort_by(f64::total_cmp);
            joint.insert(Subset::singleton(j + 1), JointEvents::new(1, std::mem::take(s))?);
        }
        Ok(EventData {
            dims: streams.len(),
            duration,
            window: 0.0,
            joint,
        })
    }

    /// Builds data from `D`-dimensional event vectors: each point contributes
    /// one timestamp per process, and a joint event for every subset
    /// `2 ≤ |I| ≤ max_order` whose coordinates span at most `window`.
    pub fn from_points(
        points: &[f64],
        dims: usize,
        duration: f64,
        window: f64,
        max_order: usize,
    ) -> Result<Self> {
        check_window(window)?;
        if dims == 0 || !points.len().is_multiple_of(dims) {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates do not split into {dims}-vectors",
                points.len()
            )));
        }
        check_order(max_order, dims)?;
        let streams: Vec<Vec<f64>> = (0..dims)
            .map(|j| points.chunks_exact(dims).map(|p| p[j]).collect())
            .collect();
        let mut data = Self::from_streams(streams, duration)?;
        data.window = window;
        for subset in subsets_between(dims, 2, max_order) {
            let idx: Vec<usize> = subset.indices().iter().map(|j| j - 1).collect();
            let mut rows: Vec<Vec<f64>> = points
                .chunks_exact(dims)
                .filter_map(|p| {
                    let v: Vec<f64> = idx.iter().map(|&j| p[j]).collect();
                    (span(&v) <= window).then_some(v)
                })
                .collect();
            rows.sort_by(|a, b| {
                let ma: f64 = a.iter().sum();
                let mb: f64 = b.iter().sum();
                ma.total_cmp(&mb)
            });
            data.joint.insert(subset, JointEvents::new(idx.len(), rows.concat())?);
        }
        Ok(data)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Coincidence window used to derive joint events.
    pub fn window(&self) -> f64 {
        self.window
    }

    /// Sorted timestamps of process `j` (1-based).
    pub fn process(&self, j: usize) -> &[f64] {
        self.joint
            .get(&Subset::singleton(j))
            .map(|e| e.coords())
            .unwrap_or(&[])
    }

    /// Joint events for `subset`, if they were derived.
    pub fn events(&self, subset: Subset) -> Option<&JointEvents> {
        self.joint.get(&subset)
    }

    /// Number of (joint) events for `subset`; zero when none were derived.
    pub fn count(&self, subset: Subset) -> usize {
        self.joint.get(&subset).map_or(0, JointEvents::len)
    }

    /// Subsets with derived event lists.
    pub fn subsets(&self) -> impl Iterator<Item = Subset> + '_ {
        self.joint.keys().copied()
    }

    pub fn streams(&self) -> Vec<Vec<f64>> {
        (1..=self.dims).map(|j| self.process(j).to_vec()).collect()
    }
}

fn check_window(window: f64) -> Result<()> {
    if !(window >= 0.0 && window.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "coincidence window must be non-negative, got {window}"
        )));
    }
    Ok(())
}

fn check_order(max_order: usize, dims: usize) -> Result<()> {
    if max_order == 0 || max_order > dims {
        return Err(Error::InvalidArgument(format!(
            "max order must be in 1..={dims}, got {max_order}"
        )));
    }
    Ok(())
}

fn span(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)));
    hi - lo
}

/// Subsets of `{1..dims}` with size in `lo..=hi`, in canonical order.
pub fn subsets_between(dims: usize, lo: usize, hi: usize) -> Vec<Subset> {
    let mut out: Vec<Subset> = (1..(1u32 << dims))
        .map(Subset::from_mask)
        .filter(|s| s.len() >= lo && s.len() <= hi)
        .collect();
    out.sort_by_cached_key(|s| (s.len(), s.indices()));
    out
}

/// Derives joint events from separate process streams.
///
/// For each subset with `2 ≤ |I| ≤ max_order` the streams of `I` are scanned
/// left to right: when the current heads span at most `window` they form one
/// joint event and all heads advance, otherwise the earliest head is dropped
/// (it cannot be part of any later group). Each event joins at most one joint
/// vector per subset.
pub fn extract_joint_events(
    streams: Vec<Vec<f64>>,
    duration: f64,
    window: f64,
    max_order: usize,
) -> Result<EventData> {
    check_window(window)?;
    let mut data = EventData::from_streams(streams, duration)?;
    check_order(max_order, data.dims)?;
    data.window = window;
    for subset in subsets_between(data.dims, 2, max_order) {
        let members = subset.indices();
        let lists: Vec<&[f64]> = members.iter().map(|&j| data.process(j)).collect();
        let coords = greedy_coincidences(&lists, window);
        data.joint.insert(subset, JointEvents::new(members.len(), coords)?);
    }
    Ok(data)
}

fn greedy_coincidences(lists: &[&[f64]], window: f64) -> Vec<f64> {
    let mut heads = vec![0usize; lists.len()];
    let mut out = Vec::new();
    while heads.iter().zip(lists).all(|(&h, l)| h < l.len()) {
        let mut lo = (0, f64::INFINITY);
        let mut hi = f64::NEG_INFINITY;
        for (i, (&h, l)) in heads.iter().zip(lists).enumerate() {
            let t = l[h];
            if t < lo.1 {
                lo = (i, t);
            }
            hi = hi.max(t);
        }
        if hi - lo.1 <= window {
            for (h, l) in heads.iter_mut().zip(lists) {
                out.push(l[*h]);
                *h += 1;
            }
        } else {
            heads[lo.0] += 1;
        }
    }
    out
}

/// Bandwidths per subset for the kernel smoother.
#[derive(Clone, Debug, PartialEq)]
pub struct SmootherConfig {
    bandwidths: BTreeMap<Subset, f64>,
    bins: usize,
    duration: f64,
}

impl SmootherConfig {
    pub fn new(bandwidths: BTreeMap<Subset, f64>, bins: usize, duration: f64) -> Result<Self> {
        if let Some((s, h)) = bandwidths.iter().find(|(_, h)| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth for {s} must be positive, got {h}"
            )));
        }
        if bins == 0 || !(duration > 0.0) {
            return Err(Error::InvalidArgument("bins and duration must be positive".into()));
        }
        Ok(SmootherConfig {
            bandwidths,
            bins,
            duration,
        })
    }

    /// The same bandwidth for every subset present in `data`.
    pub fn uniform(data: &EventData, bandwidth: f64, bins: usize) -> Result<Self> {
        let map = data.subsets().map(|s| (s, bandwidth)).collect();
        Self::new(map, bins, data.duration())
    }

    /// Scott's rule per subset: `h_I = N_I^(-1/(|I|+4)) · s_I`, where `s_I` is
    /// the mean per-coordinate sample standard deviation. Subsets with fewer
    /// than two events, or no spread, fall back to the bin width.
    pub fn scott(data: &EventData, bins: usize) -> Result<Self> {
        let fallback = data.duration() / bins as f64;
        let map = data
            .subsets()
            .map(|s| {
                let h = data
                    .events(s)
                    .and_then(scott_bandwidth)
                    .filter(|h| *h > 0.0)
                    .unwrap_or(fallback);
                (s, h)
            })
            .collect();
        Self::new(map, bins, data.duration())
    }

    pub fn bandwidth(&self, subset: Subset) -> Result<f64> {
        self.bandwidths
            .get(&subset)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("no bandwidth configured for {subset}")))
    }

    pub fn bandwidths(&self) -> &BTreeMap<Subset, f64> {
        &self.bandwidths
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        (bin as f64 - 0.5) * self.duration / self.bins as f64
    }
}

fn scott_bandwidth(events: &JointEvents) -> Option<f64> {
    let n = events.len();
    if n < 2 {
        return None;
    }
    let d = events.arity();
    let mut sd_sum = 0.0;
    for j in 0..d {
        let mean = events.iter().map(|v| v[j]).sum::<f64>() / n as f64;
        let var = events.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        sd_sum += var.sqrt();
    }
    Some((n as f64).powf(-1.0 / (d as f64 + 4.0)) * sd_sum / d as f64)
}

/// Product-Gaussian kernel average of `events` at every bin center.
pub(crate) fn smoother_row(events: &JointEvents, bandwidth: f64, bins: usize, duration: f64) -> Vec<f64> {
    let n = events.len();
    if n == 0 {
        return vec![0.0; bins];
    }
    let d = events.arity() as i32;
    let norm = INV_SQRT_2PI.powi(d) / (n as f64 * bandwidth.powi(d));
    let width = duration / bins as f64;
    (1..=bins)
        .map(|tau| {
            let c = (tau as f64 - 0.5) * width;
            let s: f64 = events
                .iter()
                .map(|v| {
                    let q: f64 = v.iter().map(|t| ((c - t) / bandwidth).powi(2)).sum();
                    (-0.5 * q).exp()
                })
                .sum();
            s * norm
        })
        .collect()
}

/// `σ_I(τ)`; zero when `I` has no joint events.
pub fn smoother_value(subset: Subset, bin: usize, data: &EventData, cfg: &SmootherConfig) -> Result<f64> {
    if bin == 0 || bin > cfg.bins() {
        return Err(Error::InvalidArgument(format!("bin {bin} outside 1..={}", cfg.bins())));
    }
    let Some(events) = data.events(subset).filter(|e| !e.is_empty()) else {
        return Ok(0.0);
    };
    let h = cfg.bandwidth(subset)?;
    let n = events.len() as f64;
    let d = events.arity() as i32;
    let c = cfg.bin_center(bin);
    let s: f64 = events
        .iter()
        .map(|v| v.iter().map(|t| INV_SQRT_2PI * (-0.5 * ((c - t) / h).powi(2)).exp()).product::<f64>())
        .sum();
    Ok(s / (n * h.powi(d)))
}

/// A probability vector over the states of a [`SampleSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    mass: Vec<f64>,
    total: f64,
}

impl Distribution {
    /// Normalizes non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidArgument(format!("weight {w} is not a finite non-negative value")));
        }
        let z: f64 = weights.iter().sum();
        if !(z > 0.0) {
            return Err(Error::InvalidArgument("weights sum to zero".into()));
        }
        let mass: Vec<f64> = weights.into_iter().map(|w| w / z).collect();
        let total = mass.iter().sum();
        Ok(Distribution { mass, total })
    }

    pub(crate) fn from_normalized_unchecked(mass: Vec<f64>) -> Self {
        let total = mass.iter().sum();
        Distribution { mass, total }
    }

    pub fn uniform(len: usize) -> Self {
        Self::from_normalized_unchecked(vec![1.0 / len as f64; len])
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.mass[index]
    }
}

/// The kernel-smoothed empirical distribution `p̂` over `space`.
///
/// `⊥` receives `BOTTOM_MASS_RATIO` times the largest unnormalized cell so it
/// stays in the support.
pub fn empirical_distribution(data: &EventData, cfg: &SmootherConfig, space: &SampleSpace) -> Result<Distribution> {
    if data.dims() != space.dims() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} processes, space has {}",
            data.dims(),
            space.dims()
        )));
    }
    if cfg.bins() != space.bins() || (cfg.duration() - space.duration()).abs() > 1e-12 * space.duration() {
        return Err(Error::DimensionMismatch(
            "smoother bins/duration differ from the sample space".into(),
        ));
    }
    let m = space.bins();
    let rows: Vec<(Subset, Vec<f64>)> = space
        .subsets()
        .par_iter()
        .filter_map(|&s| data.events(s).filter(|e| !e.is_empty()).map(|e| (s, e)))
        .map(|(s, e)| Ok((s, smoother_row(e, cfg.bandwidth(s)?, m, space.duration()))))
        .collect::<Result<_>>()?;
    let mut grid = vec![0.0; space.grid_len()];
    for (s, row) in rows {
        let off = s.mask() as usize * m;
        grid[off..off + m].copy_from_slice(&row);
    }
    space.subset_sum_masks(&mut grid);
    let mut weights = space.gather(&grid);
    let peak = weights.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::NoEvents);
    }
    weights[0] = BOTTOM_MASS_RATIO * peak;
    Distribution::from_weights(weights)
}

/// `η̂(s) = Σ_{ω ≥ s} p̂(ω)` for every member of `domain`.
pub fn empirical_eta(phat: &Distribution, domain: &ParamDomain, space: &SampleSpace) -> Vec<f64> {
    crate::model::expectation_params(phat, domain, space)
}
