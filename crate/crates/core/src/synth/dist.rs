use alloc::format;

use rand::Rng;

use crate::error::{Error, Result};

/// Scalar sampling distributions for generator profiles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Distribution {
    Constant(f64),
    /// Uniform on `[min, max)`.
    Uniform { min: f64, max: f64 },
    /// `min + Exp(mean)` conditioned on landing in `[min, max]`.
    TruncatedExponential { mean: f64, min: f64, max: f64 },
}

impl Distribution {
    pub fn validate(&self, what: &str) -> Result<()> {
        let ok = match *self {
            Distribution::Constant(v) => v.is_finite(),
            Distribution::Uniform { min, max } => min.is_finite() && max.is_finite() && min <= max,
            Distribution::TruncatedExponential { mean, min, max } => {
                mean.is_finite() && mean > 0.0 && min.is_finite() && !max.is_nan() && min < max
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("{what}: invalid distribution {self:?}")))
        }
    }

    /// Closed bounds of the support.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Distribution::Constant(v) => (v, v),
            Distribution::Uniform { min, max } | Distribution::TruncatedExponential { min, max, .. } => (min, max),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Constant(v) => v,
            Distribution::Uniform { min, max } => (min + max) / 2.0,
            Distribution::TruncatedExponential { mean, min, max } => {
                let w = max - min;
                if w.is_infinite() {
                    return min + mean;
                }
                let tail = libm::exp(-w / mean);
                min + mean - w * tail / (1.0 - tail)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Constant(v) => v,
            Distribution::Uniform { min, max } => min + rng.gen::<f64>() * (max - min),
            Distribution::TruncatedExponential { mean, min, max } => {
                let mass = 1.0 - libm::exp(-(max - min) / mean);
                let u: f64 = rng.gen();
                (min - mean * libm::log1p(-u * mass)).min(max)
            }
        }
    }

    /// Sample rounded to a count of at least one.
    pub fn sample_count<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let v = libm::round(self.sample(rng));
        if v < 1.0 {
            1
        } else {
            v as usize
        }
    }
}
