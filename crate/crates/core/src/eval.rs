//! Metrics and `(h, M)` model selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::empirical::{extract_joint_events, EventData};
use crate::error::{Error, Result};
use crate::estimator::{Bandwidth, EstimatorConfig, FittedModel};
use crate::optimizer::FitConfig;
use crate::poset::Subset;

/// Floor applied to the estimated intensity inside the log.
pub const NLL_FLOOR: f64 = 1e-12;

/// `D_KL(truth ‖ estimate)` after normalizing both to unit sum; `0 log 0 = 0`.
pub fn kl_to_truth(estimated: &[f64], truth: &[f64]) -> Result<f64> {
    if estimated.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "estimate has {} bins, truth has {}",
            estimated.len(),
            truth.len()
        )));
    }
    if estimated.iter().chain(truth).any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("intensities must be finite and non-negative".into()));
    }
    let se: f64 = estimated.iter().sum();
    let st: f64 = truth.iter().sum();
    if !(se > 0.0 && st > 0.0) {
        return Err(Error::InvalidArgument("both intensities need a positive total".into()));
    }
    let mut kl = 0.0;
    for (i, (&e, &t)) in estimated.iter().zip(truth).enumerate() {
        if t == 0.0 {
            continue;
        }
        if e == 0.0 {
            return Err(Error::SupportMismatch(i));
        }
        let (q, p) = (e / se, t / st);
        kl += p * (p / q).ln();
    }
    Ok(kl.max(0.0))
}

/// `Σ_τ λ̂(τ)·T/M − Σ_i log λ̂(bin(t_i))`, with `λ̂` floored at [`NLL_FLOOR`].
pub fn negative_test_loglik(intensity: &[f64], test_times: &[f64], duration: f64) -> Result<f64> {
    let m = intensity.len();
    if m == 0 {
        return Err(Error::InvalidArgument("intensity has no bins".into()));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
    }
    if intensity.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("intensity must be finite and non-negative".into()));
    }
    let width = duration / m as f64;
    let integral: f64 = intensity.iter().sum::<f64>() * width;
    let mut loglik = 0.0;
    for &t in test_times {
        if !(t >= 0.0 && t <= duration) {
            return Err(Error::InvalidArgument(format!("test time {t} outside [0, {duration}]")));
        }
        let b = ((t / width) as usize).min(m - 1);
        loglik += intensity[b].max(NLL_FLOOR).ln();
    }
    Ok(integral - loglik)
}

/// `(train, validation)` streams.
pub type StreamSplit = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Splits every stream independently: each event goes to validation with
/// probability `fraction`.
pub fn split_streams(streams: &[Vec<f64>], fraction: f64, seed: u64) -> Result<StreamSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("holdout fraction must be in (0, 1), got {fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(streams.len());
    let mut val = Vec::with_capacity(streams.len());
    for s in streams {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for &t in s {
            if rng.random::<f64>() < fraction {
                b.push(t);
            } else {
                a.push(t);
            }
        }
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        train.push(a);
        val.push(b);
    }
    Ok((train, val))
}

/// Assigns each event of each stream to one of `folds` folds; returns one
/// `(train, validation)` pair per fold.
pub fn fold_streams(streams: &[Vec<f64>], folds: usize, seed: u64) -> Result<Vec<StreamSplit>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<Vec<usize>> = streams
        .iter()
        .map(|s| s.iter().map(|_| rng.random_range(0..folds)).collect())
        .collect();
    Ok((0..folds)
        .map(|f| {
            let mut train = Vec::with_capacity(streams.len());
            let mut val = Vec::with_capacity(streams.len());
            for (s, l) in streams.iter().zip(&labels) {
                train.push(s.iter().zip(l).filter(|(_, k)| **k != f).map(|(t, _)| *t).collect());
                val.push(s.iter().zip(l).filter(|(_, k)| **k == f).map(|(t, _)| *t).collect());
            }
            (train, val)
        })
        .collect())
}

/// Splits `D`-vector points (row-major) into train and validation sets.
pub fn split_points(points: &[f64], dims: usize, fraction: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("holdout fraction must be in (0, 1), got {fraction}")));
    }
    if dims == 0 || !points.len().is_multiple_of(dims) {
        return Err(Error::DimensionMismatch("points do not split into rows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for row in points.chunks_exact(dims) {
        if rng.random::<f64>() < fraction {
            b.extend_from_slice(row);
        } else {
            a.extend_from_slice(row);
        }
    }
    Ok((a, b))
}

/// Derives joint events for every subset from raw streams.
pub fn streams_to_data(streams: Vec<Vec<f64>>, duration: f64, window: f64) -> Result<EventData> {
    let d = streams.len();
    extract_joint_events(streams, duration, window, d)
}

#[derive(Clone, Debug)]
pub struct GridSearchConfig {
    pub h_grid: Vec<f64>,
    pub m_grid: Vec<usize>,
    pub order: usize,
    pub fit: FitConfig,
    /// Subsets whose validation NLL is summed; `None` scores every subset of
    /// size at most `order`.
    pub subsets: Option<Vec<Subset>>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl GridSearchConfig {
    pub fn new(h_grid: Vec<f64>, m_grid: Vec<usize>, order: usize) -> Self {
        GridSearchConfig {
            h_grid,
            m_grid,
            order,
            fit: FitConfig::natural(),
            subsets: None,
            threads: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridCell {
    pub h: f64,
    pub bins: usize,
    /// Validation NLL; infinite when the fit failed.
    pub score: f64,
}

#[derive(Clone, Debug)]
pub struct GridSearchResult {
    pub best: GridCell,
    /// One row per `(h, M)` in grid order (`h` outer).
    pub table: Vec<GridCell>,
}

/// Fits every `(h, M)` cell on `train` and scores the validation NLL.
///
/// Each subset's intensity is rescaled to the validation event count before
/// scoring, so cells are compared on shape. Ties go to the smaller `h`, then
/// the smaller `M`.
pub fn grid_search(train: &EventData, validation: &EventData, cfg: &GridSearchConfig) -> Result<GridSearchResult> {
    grid_search_folds(&[(train.clone(), validation.clone())], cfg)
}

/// Like [`grid_search`], summing each cell's score over several splits.
pub fn grid_search_folds(splits: &[(EventData, EventData)], cfg: &GridSearchConfig) -> Result<GridSearchResult> {
    if cfg.h_grid.is_empty() || cfg.m_grid.is_empty() {
        return Err(Error::InvalidArgument("h and M grids must be nonempty".into()));
    }
    if splits.is_empty() {
        return Err(Error::InvalidArgument("no train/validation split given".into()));
    }
    let dims = splits[0].0.dims();
    if splits.iter().any(|(a, b)| a.dims() != dims || b.dims() != dims) {
        return Err(Error::DimensionMismatch("splits disagree on the number of processes".into()));
    }
    if cfg.order == 0 || cfg.order > dims {
        return Err(Error::InvalidArgument(format!("order must be in 1..={dims}, got {}", cfg.order)));
    }
    let subsets: Vec<Subset> = match &cfg.subsets {
        Some(s) => s.clone(),
        None => crate::empirical::subsets_between(dims, 1, cfg.order),
    };
    let cells: Vec<(f64, usize)> = cfg
        .h_grid
        .iter()
        .flat_map(|&h| cfg.m_grid.iter().map(move |&m| (h, m)))
        .collect();
    let run = || -> Vec<GridCell> {
        cells
            .par_iter()
            .map(|&(h, m)| {
                let score = splits
                    .iter()
                    .map(|(tr, va)| score_cell(tr, va, h, m, cfg, &subsets))
                    .sum::<Result<f64>>()
                    .unwrap_or(f64::INFINITY);
                GridCell { h, bins: m, score }
            })
            .collect()
    };
    let table = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(run),
        None => run(),
    };
    let best = best_cell(&table).ok_or(Error::AllCellsFailed)?;
    Ok(GridSearchResult { best, table })
}

/// Lowest finite score; ties to smaller `h`, then smaller `M`.
pub fn best_cell(table: &[GridCell]) -> Option<GridCell> {
    table
        .iter()
        .filter(|c| c.score.is_finite())
        .min_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then(a.h.total_cmp(&b.h))
                .then(a.bins.cmp(&b.bins))
        })
        .copied()
}

fn score_cell(
    train: &EventData,
    validation: &EventData,
    h: f64,
    bins: usize,
    cfg: &GridSearchConfig,
    subsets: &[Subset],
) -> Result<f64> {
    let est = EstimatorConfig {
        order: cfg.order,
        bins,
        bandwidth: Bandwidth::Fixed(h),
        fit: cfg.fit.clone(),
    };
    let (model, _, _) = FittedModel::fit(train, &est)?;
    let mut total = 0.0;
    for &s in subsets {
        let Some(events) = validation.events(s).filter(|e| !e.is_empty()) else {
            continue;
        };
        let lam = model.intensity(s)?;
        if lam.empty {
            // no training events for this subset in any cell
            continue;
        }
        let n_train = model.count(s) as f64;
        let ratio = events.len() as f64 / n_train;
        let scaled: Vec<f64> = lam.values.iter().map(|v| v * ratio).collect();
        total += negative_test_loglik(&scaled, &events.representative_times(), train.duration())?;
    }
    Ok(total)
}
