//! Experiment sweeps over grouping size, method and seed.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;
use wifsm_core::baselines::{discrimination_accuracy, probe_events, Method};
use wifsm_core::features::{normalize_features, FeatureVector, Scaler};
use wifsm_core::ingest::{is_randomized_mac, parse_capture, OuiTable};
use wifsm_core::learn::{
    build_pairs, evaluate_classifier, pair_features, split_by_device, train, ClassifierModel, Hyperparameters, ModelKind,
    PairPolicy,
};
use wifsm_core::pipeline::{build_fingerprints, Fingerprints};
use wifsm_core::similarity::{embed_all, score_predictions, MatchResult};
use wifsm_core::synth::generate_trace;
use wifsm_core::{DeviceId, MacAddress, ManagementFrame, Metric};

use crate::error::{Error, Result, StageExt};
use crate::par;
use crate::profiles::{load_profiles, ProfileSet};
use crate::store;

pub const EXPERIMENT_SCHEMA: &str = "experiment.v1";

/// Above this many fingerprints the combined metric is matched without a
/// materialized matrix.
pub const BLOCKED_THRESHOLD: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SweepMethod {
    CombinedDistance,
    Euclidean,
    Manhattan,
    Cosine,
    Rf,
    Lr,
    Svm,
    IeBaseline,
    SeqBaseline,
    /// Probe association by combined FSM distance, scored like the baselines.
    FsmAssociation,
}

impl SweepMethod {
    pub const ALL: [SweepMethod; 10] = [
        SweepMethod::CombinedDistance,
        SweepMethod::Euclidean,
        SweepMethod::Manhattan,
        SweepMethod::Cosine,
        SweepMethod::Rf,
        SweepMethod::Lr,
        SweepMethod::Svm,
        SweepMethod::IeBaseline,
        SweepMethod::SeqBaseline,
        SweepMethod::FsmAssociation,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            SweepMethod::CombinedDistance => "combined_distance",
            SweepMethod::Euclidean => "euclidean",
            SweepMethod::Manhattan => "manhattan",
            SweepMethod::Cosine => "cosine",
            SweepMethod::Rf => "rf",
            SweepMethod::Lr => "lr",
            SweepMethod::Svm => "svm",
            SweepMethod::IeBaseline => "ie_baseline",
            SweepMethod::SeqBaseline => "seq_baseline",
            SweepMethod::FsmAssociation => "fsm_association",
        }
    }
}

impl fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InputSource {
    /// A capture; devices come from `truth` (frame ordinal → device CSV) or,
    /// without it, from globally administered MACs.
    Pcap { path: PathBuf, truth: Option<PathBuf>, oui: OuiTable },
    Generator(ProfileSet),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub source: InputSource,
    pub p_values: Vec<usize>,
    pub methods: Vec<SweepMethod>,
    pub tau: f64,
    pub samples: usize,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    pub include_partial: bool,
    pub train_fraction: f64,
    pub hyperparameters: Hyperparameters,
}

impl ExperimentConfig {
    pub fn new(source: InputSource, p_values: Vec<usize>, methods: Vec<SweepMethod>, seeds: Vec<u64>) -> Self {
        ExperimentConfig {
            source,
            p_values,
            methods,
            tau: wifsm_core::baselines::DEFAULT_TAU,
            samples: wifsm_core::baselines::DEFAULT_SAMPLES,
            seeds,
            output_dir: None,
            include_partial: false,
            train_fraction: 0.8,
            hyperparameters: Hyperparameters::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Core(wifsm_core::Error::Config(m.into())));
        if self.p_values.is_empty() || self.p_values.contains(&0) {
            return bad("P values must be a non-empty list of integers >= 1");
        }
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.tau >= 0.0) || self.samples == 0 {
            return bad("tau must be >= 0 and samples > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema: String,
    profiles: Option<PathBuf>,
    pcap: Option<PathBuf>,
    truth: Option<PathBuf>,
    oui: Option<PathBuf>,
    p_values: Vec<usize>,
    methods: Vec<String>,
    tau: Option<f64>,
    samples: Option<usize>,
    seeds: Vec<u64>,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    include_partial: bool,
    train_fraction: Option<f64>,
}

/// Loads an `experiment.v1` TOML file; relative paths inside it resolve
/// against the file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ConfigFile = toml::from_str(&text)
        .map_err(|e| Error::Core(wifsm_core::Error::Config(format!("{}: {e}", path.display()))))?;
    if file.schema != EXPERIMENT_SCHEMA {
        return Err(Error::Schema { path: path.into(), expected: EXPERIMENT_SCHEMA.into(), found: file.schema });
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
    let source = match (file.profiles, file.pcap) {
        (Some(profiles), None) => InputSource::Generator(load_profiles(&resolve(profiles))?),
        (None, Some(pcap)) => InputSource::Pcap {
            path: resolve(pcap),
            truth: file.truth.map(resolve),
            oui: match file.oui {
                Some(p) => load_oui(&resolve(p))?,
                None => OuiTable::default(),
            },
        },
        _ => return Err(Error::Usage("config needs exactly one of `profiles` or `pcap`".into())),
    };
    let methods = file.methods.iter().map(|m| m.parse()).collect::<Result<Vec<_>>>()?;
    let mut cfg = ExperimentConfig::new(source, file.p_values, methods, file.seeds);
    cfg.tau = file.tau.unwrap_or(cfg.tau);
    cfg.samples = file.samples.unwrap_or(cfg.samples);
    cfg.output_dir = file.output_dir.map(resolve);
    cfg.include_partial = file.include_partial;
    cfg.train_fraction = file.train_fraction.unwrap_or(cfg.train_fraction);
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_oui(path: &Path) -> Result<OuiTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(OuiTable::parse(&text)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub p: usize,
    pub environment: String,
    pub accuracy: f64,
    pub n_fingerprints: usize,
    pub seed: u64,
    /// Seconds spent in the method (excluding the shared pipeline).
    pub wall_time: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

/// Labels for a capture without ground truth: globally administered MACs
/// stand in for devices, randomized ones stay unlabeled.
pub fn persistent_mac_labels(frames: &[ManagementFrame], oui: &OuiTable) -> BTreeMap<MacAddress, Option<DeviceId>> {
    frames
        .iter()
        .map(|f| f.src)
        .filter(|m| !is_randomized_mac(*m, oui))
        .map(|m| (m, Some(DeviceId::new(m.to_string()))))
        .collect()
}

struct Trace {
    frames: Vec<ManagementFrame>,
    devices: BTreeMap<MacAddress, Option<DeviceId>>,
    environment: String,
}

fn load_trace(source: &InputSource, seed: u64) -> Result<Trace> {
    match source {
        InputSource::Generator(set) => {
            let (frames, truth) = generate_trace(&set.profiles, set.duration, seed).stage("generate")?;
            Ok(Trace { devices: truth.device_map(), frames, environment: set.environment.clone() })
        }
        InputSource::Pcap { path, truth, oui } => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let id = path.file_name().and_then(|s| s.to_str()).unwrap_or("capture").to_string();
            let frames = parse_capture(&bytes, &id).stage("ingest")?.frames;
            let devices = match truth {
                Some(t) => store::device_map_from_truth(&frames, &store::read_truth(t)?),
                None => persistent_mac_labels(&frames, oui),
            };
            Ok(Trace { frames, devices, environment: id })
        }
    }
}

fn stage_of(method: SweepMethod) -> &'static str {
    method.name()
}

fn classifier_accuracy(kind: ModelKind, raw: &[FeatureVector], cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    let (train_idx, test_idx) = split_by_device(raw, cfg.train_fraction, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| raw[i].clone()).collect::<Vec<_>>();
    let (train_raw, test_raw) = (pick(&train_idx), pick(&test_idx));
    let scaler = Scaler::fit(&train_raw)?;
    let train_v: Vec<_> = train_raw.iter().map(|v| scaler.transform(v)).collect();
    let test_v: Vec<_> = test_raw.iter().map(|v| scaler.transform(v)).collect();
    let train_pairs = build_pairs(&train_v, PairPolicy::Balanced, seed)?;
    let test_pairs = build_pairs(&test_v, PairPolicy::Balanced, seed ^ 0x5eed)?;
    let model = train(kind, &train_pairs, &cfg.hyperparameters, seed)?;
    Ok(evaluate_classifier(&model, &test_pairs)?.accuracy)
}

fn distance_accuracy(normalized: &[FeatureVector], metric: Metric) -> Result<f64> {
    if metric == Metric::Combined && normalized.len() > BLOCKED_THRESHOLD {
        return Ok(par::blocked_combined_match(normalized)?.accuracy);
    }
    let labels: Vec<_> = normalized.iter().map(|v| v.device_id.clone()).collect();
    let matrix = par::metric_matrix(normalized, metric)?;
    Ok(par::nearest_neighbor_match(&matrix, &labels)?.accuracy)
}

fn run_method(method: SweepMethod, fps: &Fingerprints, cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    let raw = fps.features();
    let normalized = || normalize_features(&raw);
    let association = |m: Method| -> Result<f64> {
        let events = probe_events(&fps.groups());
        let matrix = match m {
            Method::Fsm => Some(par::metric_matrix(&normalized()?, Metric::Combined)?),
            _ => None,
        };
        Ok(discrimination_accuracy(&events, m, cfg.samples, cfg.tau, seed, matrix.as_ref())?)
    };
    match method {
        SweepMethod::CombinedDistance => distance_accuracy(&normalized()?, Metric::Combined),
        SweepMethod::Euclidean => distance_accuracy(&normalized()?, Metric::Euclidean),
        SweepMethod::Manhattan => distance_accuracy(&normalized()?, Metric::Manhattan),
        SweepMethod::Cosine => distance_accuracy(&normalized()?, Metric::Cosine),
        SweepMethod::Rf => classifier_accuracy(ModelKind::RandomForest, &raw, cfg, seed),
        SweepMethod::Lr => classifier_accuracy(ModelKind::LogisticRegression, &raw, cfg, seed),
        SweepMethod::Svm => classifier_accuracy(ModelKind::SvmRbf, &raw, cfg, seed),
        SweepMethod::IeBaseline => association(Method::Ie),
        SweepMethod::SeqBaseline => association(Method::Seq),
        SweepMethod::FsmAssociation => association(Method::Fsm),
    }
}

/// Matches each fingerprint to the other one the classifier scores as most
/// likely the same device (ties to the lowest index). `scaled` must be
/// transformed the way the training vectors were.
pub fn model_match(model: &ClassifierModel, scaled: &[FeatureVector]) -> Result<MatchResult> {
    if scaled.len() < 2 {
        return Err(Error::Core(wifsm_core::Error::Contract("matching needs at least two fingerprints".into())));
    }
    let emb = embed_all(scaled);
    let predictions = (0..emb.len())
        .into_par_iter()
        .map(|i| {
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            for j in (0..emb.len()).filter(|&j| j != i) {
                let s = model.predict_proba(&pair_features(&emb[i], &emb[j]));
                if s > best.1 {
                    best = (j, s);
                }
            }
            best.0
        })
        .collect();
    let labels: Vec<_> = scaled.iter().map(|v| v.device_id.clone()).collect();
    Ok(score_predictions(predictions, &labels)?)
}

/// Runs every (P, method, seed) cell. Cells run in parallel; rows come back
/// ordered by method (as listed in the config), P, then seed.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let traces =
        cfg.seeds.par_iter().map(|&seed| load_trace(&cfg.source, seed).map(|t| (seed, t))).collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, &(u64, Trace))> =
        traces.iter().flat_map(|t| cfg.p_values.iter().map(move |&p| (p, t))).collect();
    let mut rows: Vec<(usize, ReportRow)> = cells
        .par_iter()
        .map(|&(p, (seed, trace))| {
            let fps = build_fingerprints(&trace.frames, &trace.devices, p, cfg.include_partial, *seed)
                .stage("fingerprint")?;
            cfg.methods
                .iter()
                .enumerate()
                .map(|(order, &method)| {
                    let start = Instant::now();
                    let accuracy = run_method(method, &fps, cfg, *seed).stage(stage_of(method))?;
                    Ok((
                        order,
                        ReportRow {
                            method: method.name().to_string(),
                            p,
                            environment: trace.environment.clone(),
                            accuracy,
                            n_fingerprints: fps.fingerprints.len(),
                            seed: *seed,
                            wall_time: start.elapsed().as_secs_f64(),
                        },
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|(oa, a), (ob, b)| oa.cmp(ob).then(a.p.cmp(&b.p)).then(a.seed.cmp(&b.seed)));
    Ok(ExperimentReport { rows: rows.into_iter().map(|(_, r)| r).collect() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Table,
    PlotData,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            "plotdata" => Ok(ReportFormat::PlotData),
            other => Err(Error::Usage(format!("unknown report format {other:?}"))),
        }
    }
}

pub const REPORT_HEADER: [&str; 7] = ["method", "P", "environment", "accuracy", "n_fingerprints", "seed", "wall_time"];

/// One series point of the plot data: mean and population standard
/// deviation of accuracy over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesPoint {
    pub method: String,
    pub environment: String,
    pub p: usize,
    pub mean: f64,
    pub stdev: f64,
    pub n: usize,
}

type SeriesKey<'a> = (&'a str, &'a str, usize);

pub fn series(report: &ExperimentReport) -> Vec<SeriesPoint> {
    let mut groups: Vec<(SeriesKey, Vec<f64>)> = Vec::new();
    for r in &report.rows {
        let key = (r.method.as_str(), r.environment.as_str(), r.p);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r.accuracy),
            None => groups.push((key, vec![r.accuracy])),
        }
    }
    groups
        .into_iter()
        .map(|((method, environment, p), acc)| {
            let n = acc.len() as f64;
            let mean = acc.iter().sum::<f64>() / n;
            let var = acc.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
            SeriesPoint { method: method.into(), environment: environment.into(), p, mean, stdev: var.sqrt(), n: acc.len() }
        })
        .collect()
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat) -> Result<Vec<u8>> {
    if report.rows.is_empty() {
        return Err(Error::Core(wifsm_core::Error::Config("empty report".into())));
    }
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(REPORT_HEADER).map_err(store::csv_err)?;
            for r in &report.rows {
                w.write_record([
                    r.method.clone(),
                    r.p.to_string(),
                    r.environment.clone(),
                    r.accuracy.to_string(),
                    r.n_fingerprints.to_string(),
                    r.seed.to_string(),
                    format!("{:.6}", r.wall_time),
                ])
                .map_err(store::csv_err)?;
            }
            w.into_inner().map_err(|e| Error::Usage(e.to_string()))
        }
        ReportFormat::Table => Ok(table(report).into_bytes()),
        ReportFormat::PlotData => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["method", "environment", "P", "mean_accuracy", "stdev", "n_seeds"]).map_err(store::csv_err)?;
            for s in series(report) {
                w.write_record([
                    s.method,
                    s.environment,
                    s.p.to_string(),
                    s.mean.to_string(),
                    s.stdev.to_string(),
                    s.n.to_string(),
                ])
                .map_err(store::csv_err)?;
            }
            w.into_inner().map_err(|e| Error::Usage(e.to_string()))
        }
    }
}

fn table(report: &ExperimentReport) -> String {
    let mut methods: Vec<&str> = Vec::new();
    for r in &report.rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let env_w = report.rows.iter().map(|r| r.environment.len()).max().unwrap_or(0).max("environment".len());
    let mut out = String::new();
    for m in methods {
        out.push_str(&format!("{m}\n"));
        out.push_str(&format!("  {:>4}  {:<env_w$}  {:>6}  {:>8}  {:>7}\n", "P", "environment", "seed", "accuracy", "n"));
        for r in report.rows.iter().filter(|r| r.method == m) {
            out.push_str(&format!(
                "  {:>4}  {:<env_w$}  {:>6}  {:>8.4}  {:>7}\n",
                r.p, r.environment, r.seed, r.accuracy, r.n_fingerprints
            ));
        }
    }
    out
}

/// Reads a CSV written by [`emit_report`] with [`ReportFormat::Csv`].
pub fn read_report_csv(path: &Path) -> Result<ExperimentReport> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, 0, e))?;
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e))?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::parse(path, line, "missing column"));
        let num = |i: usize| -> Result<f64> { field(i)?.parse().map_err(|e| Error::parse(path, line, e)) };
        rows.push(ReportRow {
            method: field(0)?.to_string(),
            p: field(1)?.parse().map_err(|e| Error::parse(path, line, e))?,
            environment: field(2)?.to_string(),
            accuracy: num(3)?,
            n_fingerprints: field(4)?.parse().map_err(|e| Error::parse(path, line, e))?,
            seed: field(5)?.parse().map_err(|e| Error::parse(path, line, e))?,
            wall_time: num(6)?,
        });
    }
    Ok(ExperimentReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, p: usize, seed: u64, accuracy: f64) -> ReportRow {
        ReportRow { method: method.into(), p, environment: "env".into(), accuracy, n_fingerprints: 10, seed, wall_time: 0.5 }
    }

    #[test]
    fn csv_single_row() {
        let rep = ExperimentReport { rows: vec![row("lr", 2, 7, 0.75)] };
        let text = String::from_utf8(emit_report(&rep, ReportFormat::Csv).unwrap()).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], REPORT_HEADER.join(","));
        assert_eq!(lines[1], "lr,2,env,0.75,10,7,0.500000");
    }

    #[test]
    fn plotdata_stdev_matches_recount() {
        let acc = [0.5, 0.7, 0.9];
        let rep = ExperimentReport { rows: acc.iter().enumerate().map(|(s, &a)| row("rf", 4, s as u64, a)).collect() };
        let s = &series(&rep)[0];
        let mean = 0.7;
        let stdev = ((0.04 + 0.0 + 0.04) / 3.0f64).sqrt();
        assert!((s.mean - mean).abs() < 1e-12);
        assert!((s.stdev - stdev).abs() < 1e-12);
        assert_eq!(s.n, 3);
    }

    #[test]
    fn table_keeps_every_row() {
        let rows = vec![row("a", 1, 0, 0.1), row("b", 1, 0, 0.2), row("a", 2, 0, 0.3), row("b", 2, 1, 0.4)];
        let rep = ExperimentReport { rows };
        let text = String::from_utf8(emit_report(&rep, ReportFormat::Table).unwrap()).unwrap();
        let data_lines = text.lines().filter(|l| l.starts_with("  ") && !l.contains("accuracy")).count();
        assert_eq!(data_lines, 4);
        let grouped: usize = series(&rep).iter().map(|s| s.n).sum();
        assert_eq!(grouped, 4);
    }

    #[test]
    fn empty_report_is_config_error() {
        let err = emit_report(&ExperimentReport::default(), ReportFormat::Csv).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn report_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rep = ExperimentReport { rows: vec![row("lr", 2, 7, 0.75), row("rf", 3, 1, 1.0 / 3.0)] };
        store::write_atomic(&path, &emit_report(&rep, ReportFormat::Csv).unwrap()).unwrap();
        assert_eq!(read_report_csv(&path).unwrap(), rep);
    }
}
