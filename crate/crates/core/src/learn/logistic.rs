use alloc::vec::Vec;

/// Number of parameters: three weights and a bias (last).
pub const LR_PARAMS: usize = 4;

/// Logistic regression over standardized pair features.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogisticRegression {
    pub weights: [f64; 3],
    pub bias: f64,
    pub feature_mean: [f64; 3],
    pub feature_std: [f64; 3],
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-libm::fabs(z)))
}

fn linear(params: &[f64; LR_PARAMS], x: &[f64; 3]) -> f64 {
    params[0] * x[0] + params[1] * x[1] + params[2] * x[2] + params[3]
}

/// Mean log-loss plus `l2/2 · ‖w‖²` (bias unpenalized).
pub fn log_loss(params: &[f64; LR_PARAMS], xs: &[[f64; 3]], ys: &[f64], l2: f64) -> f64 {
    let n = xs.len() as f64;
    let data: f64 = xs.iter().zip(ys).map(|(x, &y)| {
        let z = linear(params, x);
        softplus(z) - y * z
    }).sum::<f64>()
        / n;
    data + 0.5 * l2 * (params[0] * params[0] + params[1] * params[1] + params[2] * params[2])
}

/// Analytic gradient of [`log_loss`].
pub fn log_loss_gradient(params: &[f64; LR_PARAMS], xs: &[[f64; 3]], ys: &[f64], l2: f64) -> [f64; LR_PARAMS] {
    let n = xs.len() as f64;
    let mut g = [0.0; LR_PARAMS];
    for (x, &y) in xs.iter().zip(ys) {
        let r = sigmoid(linear(params, x)) - y;
        g[0] += r * x[0];
        g[1] += r * x[1];
        g[2] += r * x[2];
        g[3] += r;
    }
    for (k, gk) in g.iter_mut().enumerate() {
        *gk /= n;
        if k < 3 {
            *gk += l2 * params[k];
        }
    }
    g
}

impl LogisticRegression {
    /// Full-batch gradient descent from zero weights.
    pub fn fit(features: &[[f64; 3]], labels: &[bool], learning_rate: f64, epochs: usize, l2: f64) -> Self {
        let n = features.len() as f64;
        let mut mean = [0.0; 3];
        for x in features {
            for k in 0..3 {
                mean[k] += x[k] / n;
            }
        }
        let mut std = [0.0; 3];
        for x in features {
            for k in 0..3 {
                std[k] += (x[k] - mean[k]) * (x[k] - mean[k]) / n;
            }
        }
        for s in std.iter_mut() {
            *s = libm::sqrt(*s);
        }
        let standardized: Vec<[f64; 3]> = features.iter().map(|x| standardize(x, &mean, &std)).collect();
        let ys: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        let mut params = [0.0; LR_PARAMS];
        for _ in 0..epochs {
            let g = log_loss_gradient(&params, &standardized, &ys, l2);
            for k in 0..LR_PARAMS {
                params[k] -= learning_rate * g[k];
            }
        }
        LogisticRegression {
            weights: [params[0], params[1], params[2]],
            bias: params[3],
            feature_mean: mean,
            feature_std: std,
        }
    }

    pub fn predict_proba(&self, x: &[f64; 3]) -> f64 {
        let s = standardize(x, &self.feature_mean, &self.feature_std);
        let params = [self.weights[0], self.weights[1], self.weights[2], self.bias];
        sigmoid(linear(&params, &s))
    }
}

pub(crate) fn standardize(x: &[f64; 3], mean: &[f64; 3], std: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = if std[k] > 0.0 { (x[k] - mean[k]) / std[k] } else { 0.0 };
    }
    out
}
