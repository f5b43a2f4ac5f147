//! Same-device pair classification on the three-distance pair feature.

mod forest;
mod logistic;
mod pairs;
#[cfg(feature = "svm")]
mod svm;

use alloc::collections::BTreeSet;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

pub use forest::{DecisionTree, Node, RandomForest, TreeParams};
pub use logistic::{log_loss, log_loss_gradient, LogisticRegression, LR_PARAMS};
pub use pairs::{build_pairs, pair_features, split_by_device, PairPolicy, PairSample};
#[cfg(feature = "svm")]
pub use svm::{SvmModel, SvmParams};

use crate::burst::DeviceId;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModelKind {
    LogisticRegression,
    RandomForest,
    SvmRbf,
}

impl ModelKind {
    pub const fn name(self) -> &'static str {
        match self {
            ModelKind::LogisticRegression => "lr",
            ModelKind::RandomForest => "rf",
            ModelKind::SvmRbf => "svm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr" | "logistic_regression" => Ok(ModelKind::LogisticRegression),
            "rf" | "random_forest" => Ok(ModelKind::RandomForest),
            "svm" | "svm_rbf" => Ok(ModelKind::SvmRbf),
            other => Err(Error::UnsupportedKind(other.into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hyperparameters {
    pub rf_trees: usize,
    pub rf_max_depth: usize,
    pub rf_min_samples_split: usize,
    pub rf_features_per_split: usize,
    pub lr_learning_rate: f64,
    pub lr_epochs: usize,
    pub lr_l2: f64,
    pub svm_c: f64,
    pub svm_gamma: f64,
    /// Training pairs are subsampled to this many for the kernel SVM.
    pub svm_max_samples: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            rf_trees: 100,
            rf_max_depth: 12,
            rf_min_samples_split: 2,
            // √3 rounded down
            rf_features_per_split: 1,
            lr_learning_rate: 0.1,
            lr_epochs: 500,
            lr_l2: 1e-4,
            svm_c: 1.0,
            svm_gamma: 1.0 / 3.0,
            svm_max_samples: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum ModelParams {
    Logistic(LogisticRegression),
    Forest(RandomForest),
    #[cfg(feature = "svm")]
    Svm(SvmModel),
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingMeta {
    pub seed: u64,
    pub train_pairs: usize,
    /// Devices seen during training; evaluation refuses pairs touching them.
    pub train_devices: BTreeSet<DeviceId>,
    pub split: String,
}

/// A trained same-device classifier.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassifierModel {
    pub kind: ModelKind,
    pub hyperparameters: Hyperparameters,
    pub params: ModelParams,
    pub meta: TrainingMeta,
}

impl ClassifierModel {
    /// Probability that the pair comes from one device.
    pub fn predict_proba(&self, features: &[f64; 3]) -> f64 {
        match &self.params {
            ModelParams::Logistic(m) => m.predict_proba(features),
            ModelParams::Forest(m) => m.predict_proba(features),
            #[cfg(feature = "svm")]
            ModelParams::Svm(m) => m.predict_proba(features),
        }
    }

    pub fn predict(&self, features: &[f64; 3]) -> bool {
        self.predict_proba(features) >= 0.5
    }
}

/// Trains a classifier; deterministic for a fixed seed.
pub fn train(kind: ModelKind, pairs: &[PairSample], hyperparameters: &Hyperparameters, seed: u64) -> Result<ClassifierModel> {
    let positives = pairs.iter().filter(|p| p.label).count();
    if positives == 0 || positives == pairs.len() {
        return Err(Error::Training("training pairs must contain both classes".into()));
    }
    let xs: alloc::vec::Vec<[f64; 3]> = pairs.iter().map(|p| p.features).collect();
    let ys: alloc::vec::Vec<bool> = pairs.iter().map(|p| p.label).collect();
    let hp = hyperparameters;
    let params = match kind {
        ModelKind::LogisticRegression => {
            ModelParams::Logistic(LogisticRegression::fit(&xs, &ys, hp.lr_learning_rate, hp.lr_epochs, hp.lr_l2))
        }
        ModelKind::RandomForest => {
            let tree = TreeParams {
                max_depth: hp.rf_max_depth,
                min_samples_split: hp.rf_min_samples_split,
                features_per_split: hp.rf_features_per_split.max(1),
            };
            ModelParams::Forest(RandomForest::fit(&xs, &ys, hp.rf_trees, tree, seed))
        }
        #[cfg(feature = "svm")]
        ModelKind::SvmRbf => {
            let p = SvmParams {
                c: hp.svm_c,
                gamma: hp.svm_gamma,
                max_samples: hp.svm_max_samples,
                tolerance: 1e-3,
                max_passes: 5,
            };
            ModelParams::Svm(SvmModel::fit(&xs, &ys, p, seed))
        }
        #[cfg(not(feature = "svm"))]
        ModelKind::SvmRbf => return Err(Error::UnsupportedKind("svm (built without the `svm` feature)".into())),
    };
    let train_devices = pairs.iter().flat_map(|p| [p.device_i.clone(), p.device_j.clone()]).collect();
    Ok(ClassifierModel {
        kind,
        hyperparameters: hp.clone(),
        params,
        meta: TrainingMeta { seed, train_pairs: pairs.len(), train_devices, split: String::new() },
    })
}

/// Threshold-0.5 accuracy and confusion counts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

pub fn evaluate_classifier(model: &ClassifierModel, test_pairs: &[PairSample]) -> Result<Evaluation> {
    if test_pairs.is_empty() {
        return Err(Error::config("evaluation needs at least one test pair"));
    }
    if let Some(p) = test_pairs
        .iter()
        .find(|p| model.meta.train_devices.contains(&p.device_i) || model.meta.train_devices.contains(&p.device_j))
    {
        return Err(Error::evaluation(alloc::format!(
            "test pair ({}, {}) shares a device with the training split",
            p.i,
            p.j
        )));
    }
    let mut e = Evaluation { accuracy: 0.0, tp: 0, fp: 0, tn: 0, fn_: 0 };
    for p in test_pairs {
        match (model.predict(&p.features), p.label) {
            (true, true) => e.tp += 1,
            (true, false) => e.fp += 1,
            (false, false) => e.tn += 1,
            (false, true) => e.fn_ += 1,
        }
    }
    e.accuracy = (e.tp + e.tn) as f64 / test_pairs.len() as f64;
    Ok(e)
}
