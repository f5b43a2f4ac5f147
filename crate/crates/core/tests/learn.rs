mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use wifsm_core::features::normalize_features;
use wifsm_core::learn::{
    build_pairs, evaluate_classifier, log_loss, log_loss_gradient, split_by_device, train, ClassifierModel,
    Hyperparameters, LogisticRegression, ModelKind, ModelParams, PairPolicy, TrainingMeta, LR_PARAMS,
};
use wifsm_core::pipeline::build_fingerprints;
use wifsm_core::synth::{generate_trace, VendorProfile};
use wifsm_core::FeatureVector;

fn generator_vectors(profiles: &[(VendorProfile, usize)], seed: u64, p: usize) -> Vec<FeatureVector> {
    let (frames, truth) = generate_trace(profiles, 1500.0, seed).unwrap();
    let fps = build_fingerprints(&frames, &truth.device_map(), p, false, seed).unwrap();
    normalize_features(&fps.features()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lr_gradient_matches_central_differences(
        params in prop::array::uniform4(-2.0..2.0f64),
        xs in prop::collection::vec(prop::array::uniform3(-3.0..3.0f64), 1..30),
        l2 in 0.0..0.1f64,
        seed in any::<u64>(),
    ) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(k, _)| ((seed >> (k % 64)) & 1) as f64).collect();
        let g = log_loss_gradient(&params, &xs, &ys, l2);
        let h = 1e-5;
        for k in 0..LR_PARAMS {
            let (mut up, mut down) = (params, params);
            up[k] += h;
            down[k] -= h;
            let fd = (log_loss(&up, &xs, &ys, l2) - log_loss(&down, &xs, &ys, l2)) / (2.0 * h);
            prop_assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1e-3), "param {}: fd {} vs {}", k, fd, g[k]);
        }
    }
}

#[test]
fn exhaustive_pairs_match_counting_oracle() {
    for seed in 0..4 {
        let v = generator_vectors(&common::mixed_profiles(3), seed, 2);
        let pairs = build_pairs(&v, PairPolicy::Exhaustive, seed).unwrap();
        let mut per_device: BTreeMap<_, u64> = BTreeMap::new();
        for d in v.iter().filter_map(|x| x.device_id.as_ref()) {
            *per_device.entry(d).or_default() += 1;
        }
        let n: u64 = per_device.values().sum();
        let same: u64 = per_device.values().map(|c| c * (c - 1) / 2).sum();
        assert_eq!(pairs.iter().filter(|p| p.label).count() as u64, same);
        assert_eq!(pairs.len() as u64, n * (n - 1) / 2);
        for p in &pairs {
            assert_eq!(p.label, p.device_i == p.device_j);
            assert_ne!(p.i, p.j);
        }
        let balanced = build_pairs(&v, PairPolicy::Balanced, seed).unwrap();
        let pos = balanced.iter().filter(|p| p.label).count();
        assert_eq!(pos as u64, same);
        assert_eq!(balanced.len() - pos, pos);
    }
}

fn constant_model(bias: f64) -> ClassifierModel {
    ClassifierModel {
        kind: ModelKind::LogisticRegression,
        hyperparameters: Hyperparameters::default(),
        params: ModelParams::Logistic(LogisticRegression {
            weights: [0.0; 3],
            bias,
            feature_mean: [0.0; 3],
            feature_std: [1.0; 3],
        }),
        meta: TrainingMeta { seed: 0, train_pairs: 0, train_devices: Default::default(), split: String::new() },
    }
}

#[test]
fn accuracy_equals_recount_and_constant_model_scores_half() {
    let v = generator_vectors(&common::mixed_profiles(4), 2, 2);
    let (tr, te) = split_by_device(&v, 0.75, 2).unwrap();
    let pick = |idx: &[usize]| idx.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
    let train_pairs = build_pairs(&pick(&tr), PairPolicy::Balanced, 1).unwrap();
    let test_pairs = build_pairs(&pick(&te), PairPolicy::Balanced, 2).unwrap();
    for kind in [ModelKind::LogisticRegression, ModelKind::RandomForest] {
        let model = train(kind, &train_pairs, &Hyperparameters::default(), 5).unwrap();
        let ev = evaluate_classifier(&model, &test_pairs).unwrap();
        let hits = test_pairs.iter().filter(|p| (model.predict_proba(&p.features) >= 0.5) == p.label).count();
        assert_eq!(ev.accuracy, hits as f64 / test_pairs.len() as f64);
        assert_eq!(ev.tp + ev.fp + ev.tn + ev.fn_, test_pairs.len());
        let again = train(kind, &train_pairs, &Hyperparameters::default(), 5).unwrap();
        assert_eq!(again, model);
    }
    let always_yes = evaluate_classifier(&constant_model(5.0), &test_pairs).unwrap();
    assert_eq!(always_yes.accuracy, 0.5);
    assert_eq!(always_yes.tn + always_yes.fn_, 0);
}

#[test]
fn splits_are_device_disjoint() {
    let v = generator_vectors(&common::mixed_profiles(5), 7, 1);
    for seed in 0..10 {
        let (tr, te) = split_by_device(&v, 0.8, seed).unwrap();
        let devices = |idx: &[usize]| idx.iter().map(|&i| v[i].device_id.clone().unwrap()).collect::<std::collections::BTreeSet<_>>();
        assert!(devices(&tr).is_disjoint(&devices(&te)));
        assert_eq!(tr.len() + te.len(), v.len());
    }
}

#[test]
fn single_class_training_is_rejected() {
    let v = generator_vectors(&common::mixed_profiles(2), 1, 1);
    let positives: Vec<_> = build_pairs(&v, PairPolicy::Exhaustive, 0).unwrap().into_iter().filter(|p| p.label).collect();
    let err = train(ModelKind::LogisticRegression, &positives, &Hyperparameters::default(), 0).unwrap_err();
    assert!(matches!(err, wifsm_core::Error::Training(_)));
}

/// Two vendors whose transition rows are `overlap` of a shared row and
/// `1 - overlap` of their own.
fn vendor_pair(overlap: f64) -> Vec<(VendorProfile, usize)> {
    let states = ["ProbeRequest/B", "ProbeRequest/U", "Action/U"];
    let shared = [1.0 / 3.0; 3];
    let own = [[0.8, 0.1, 0.1], [0.1, 0.1, 0.8]];
    own.iter()
        .enumerate()
        .map(|(k, row)| {
            let mix: Vec<f64> = (0..3).map(|c| overlap * shared[c] + (1.0 - overlap) * row[c]).collect();
            let probs = vec![mix.clone(), mix.clone(), mix];
            let mut p = common::profile(["near", "far"][k], &states, probs, (6.0, 8.0));
            p.intra_gap = wifsm_core::synth::Distribution::Uniform { min: 0.05, max: 0.1 };
            (p, 6)
        })
        .collect()
}

#[test]
fn accuracy_rises_with_profile_separation() {
    let mean_accuracy = |overlap: f64| {
        let mut total = 0.0;
        for seed in 0..3 {
            let v = generator_vectors(&vendor_pair(overlap), seed, 4);
            let (tr, te) = split_by_device(&v, 0.7, seed).unwrap();
            let pick = |idx: &[usize]| idx.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
            let train_pairs = build_pairs(&pick(&tr), PairPolicy::Balanced, seed).unwrap();
            let test_pairs = build_pairs(&pick(&te), PairPolicy::Balanced, seed + 100).unwrap();
            let model = train(ModelKind::RandomForest, &train_pairs, &Hyperparameters::default(), seed).unwrap();
            total += evaluate_classifier(&model, &test_pairs).unwrap().accuracy;
        }
        total / 3.0
    };
    let close = mean_accuracy(0.95);
    let far = mean_accuracy(0.0);
    assert!(far >= close, "far {far} < close {close}");
}
