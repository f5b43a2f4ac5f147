//! RBF-kernel SVM trained with simplified SMO.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::logistic::standardize;
use crate::rng::child_rng;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SvmModel {
    /// Standardized support vectors.
    pub support: Vec<[f64; 3]>,
    /// `αᵢ·yᵢ` per support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub feature_mean: [f64; 3],
    pub feature_std: [f64; 3],
}

fn rbf(a: &[f64; 3], b: &[f64; 3], gamma: f64) -> f64 {
    let d: f64 = (0..3).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum();
    libm::exp(-gamma * d)
}

#[derive(Clone, Copy, Debug)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    pub max_samples: usize,
    pub tolerance: f64,
    pub max_passes: usize,
}

impl SvmModel {
    pub fn fit(features: &[[f64; 3]], labels: &[bool], params: SvmParams, seed: u64) -> Self {
        let mut rng = child_rng(seed, 0x73766d);
        let mut order: Vec<usize> = (0..features.len()).collect();
        order.shuffle(&mut rng);
        order.truncate(params.max_samples.max(2));

        let n = order.len() as f64;
        let mut mean = [0.0; 3];
        for &i in &order {
            for k in 0..3 {
                mean[k] += features[i][k] / n;
            }
        }
        let mut std = [0.0; 3];
        for &i in &order {
            for k in 0..3 {
                std[k] += (features[i][k] - mean[k]) * (features[i][k] - mean[k]) / n;
            }
        }
        std.iter_mut().for_each(|s| *s = libm::sqrt(*s));

        let xs: Vec<[f64; 3]> = order.iter().map(|&i| standardize(&features[i], &mean, &std)).collect();
        let ys: Vec<f64> = order.iter().map(|&i| if labels[i] { 1.0 } else { -1.0 }).collect();
        let m = xs.len();
        let mut kernel = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = rbf(&xs[i], &xs[j], params.gamma);
                kernel[i * m + j] = v;
                kernel[j * m + i] = v;
            }
        }
        let k = |i: usize, j: usize| kernel[i * m + j];

        let mut alpha = vec![0.0; m];
        let mut bias = 0.0;
        // cached decision values f(x_i) - b
        let mut fx = vec![0.0; m];
        let mut passes = 0;
        let mut sweeps = 0;
        while passes < params.max_passes && sweeps < 200 {
            sweeps += 1;
            let mut changed = 0;
            for i in 0..m {
                let ei = fx[i] + bias - ys[i];
                let violates = (ys[i] * ei < -params.tolerance && alpha[i] < params.c)
                    || (ys[i] * ei > params.tolerance && alpha[i] > 0.0);
                if !violates {
                    continue;
                }
                let mut j = rng.gen_range(0..m - 1);
                if j >= i {
                    j += 1;
                }
                let ej = fx[j] + bias - ys[j];
                let (ai_old, aj_old) = (alpha[i], alpha[j]);
                let (lo, hi) = if ys[i] != ys[j] {
                    ((aj_old - ai_old).max(0.0), (params.c + aj_old - ai_old).min(params.c))
                } else {
                    ((ai_old + aj_old - params.c).max(0.0), (ai_old + aj_old).min(params.c))
                };
                if lo >= hi {
                    continue;
                }
                let eta = 2.0 * k(i, j) - k(i, i) - k(j, j);
                if eta >= 0.0 {
                    continue;
                }
                let aj = (aj_old - ys[j] * (ei - ej) / eta).clamp(lo, hi);
                if libm::fabs(aj - aj_old) < 1e-7 {
                    continue;
                }
                let ai = ai_old + ys[i] * ys[j] * (aj_old - aj);
                let b1 = bias - ei - ys[i] * (ai - ai_old) * k(i, i) - ys[j] * (aj - aj_old) * k(i, j);
                let b2 = bias - ej - ys[i] * (ai - ai_old) * k(i, j) - ys[j] * (aj - aj_old) * k(j, j);
                let new_bias = if ai > 0.0 && ai < params.c {
                    b1
                } else if aj > 0.0 && aj < params.c {
                    b2
                } else {
                    (b1 + b2) / 2.0
                };
                let (di, dj) = (ys[i] * (ai - ai_old), ys[j] * (aj - aj_old));
                for t in 0..m {
                    fx[t] += di * k(i, t) + dj * k(j, t);
                }
                alpha[i] = ai;
                alpha[j] = aj;
                bias = new_bias;
                changed += 1;
            }
            passes = if changed == 0 { passes + 1 } else { 0 };
        }

        let mut support = Vec::new();
        let mut coefficients = Vec::new();
        for i in 0..m {
            if alpha[i] > 0.0 {
                support.push(xs[i]);
                coefficients.push(alpha[i] * ys[i]);
            }
        }
        SvmModel { support, coefficients, bias, gamma: params.gamma, feature_mean: mean, feature_std: std }
    }

    pub fn decision(&self, x: &[f64; 3]) -> f64 {
        let s = standardize(x, &self.feature_mean, &self.feature_std);
        self.support.iter().zip(&self.coefficients).map(|(sv, c)| c * rbf(sv, &s, self.gamma)).sum::<f64>() + self.bias
    }

    /// Logistic squashing of the decision value.
    pub fn predict_proba(&self, x: &[f64; 3]) -> f64 {
        let z = self.decision(x);
        1.0 / (1.0 + libm::exp(-2.0 * z))
    }
}
