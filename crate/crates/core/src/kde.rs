//! Kernel density baseline evaluated on the same diagonal bin grid as the
//! log-linear model.

use crate::empirical::JointEvents;
use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Clone, Debug)]
pub struct KdeModel {
    points: JointEvents,
    bandwidth: f64,
    bins: usize,
    duration: f64,
}

/// Per-bin KDE output.
#[derive(Clone, Debug, PartialEq)]
pub struct KdeEstimate {
    /// Normalized over bins; all zero when `empty`.
    pub probabilities: Vec<f64>,
    /// `probabilities · N·M/T`, events per second.
    pub intensity: Vec<f64>,
    /// No points, or every bin evaluated to zero.
    pub empty: bool,
}

impl KdeModel {
    pub fn new(points: JointEvents, bandwidth: f64, bins: usize, duration: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if bins == 0 {
            return Err(Error::InvalidArgument("bins must be at least 1".into()));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
        }
        if let Some(t) = points.coords().iter().find(|t| !(**t >= 0.0 && **t <= duration)) {
            return Err(Error::InvalidArgument(format!("point coordinate {t} outside [0, {duration}]")));
        }
        Ok(KdeModel {
            points,
            bandwidth,
            bins,
            duration,
        })
    }

    pub fn dims(&self) -> usize {
        self.points.arity()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Product-Gaussian density at `(c, …, c)`.
    pub fn density_on_diagonal(&self, c: f64) -> f64 {
        let n = self.points.len();
        if n == 0 {
            return 0.0;
        }
        let h = self.bandwidth;
        let mut sum = 0.0;
        for p in self.points.iter() {
            let mut prod = 1.0;
            for &t in p {
                let z = (c - t) / h;
                prod *= INV_SQRT_2PI * (-0.5 * z * z).exp();
            }
            sum += prod;
        }
        sum / (n as f64 * h.powi(self.dims() as i32))
    }

    pub fn estimate(&self) -> KdeEstimate {
        let width = self.duration / self.bins as f64;
        let raw: Vec<f64> = (1..=self.bins)
            .map(|b| self.density_on_diagonal((b as f64 - 0.5) * width))
            .collect();
        let total: f64 = raw.iter().sum();
        if self.points.is_empty() || !(total > 0.0) {
            return KdeEstimate {
                probabilities: vec![0.0; self.bins],
                intensity: vec![0.0; self.bins],
                empty: true,
            };
        }
        let probabilities: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let scale = self.points.len() as f64 / width;
        KdeEstimate {
            intensity: probabilities.iter().map(|p| p * scale).collect(),
            probabilities,
            empty: false,
        }
    }
}

/// Normalized per-bin KDE distribution and matching intensity.
pub fn kde_distribution(model: &KdeModel) -> KdeEstimate {
    model.estimate()
}
