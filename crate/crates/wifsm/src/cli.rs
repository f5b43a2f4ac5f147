//! The `wifsm` command line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use wifsm_core::baselines::{discrimination_accuracy, probe_events, Method};
use wifsm_core::burst::{filter_clients, segment_bursts, DEFAULT_BURST_GAP};
use wifsm_core::features::{normalize_features, FeatureVector, Scaler};
use wifsm_core::ingest::{parse_capture, sanitize, OuiTable};
use wifsm_core::learn::{build_pairs, evaluate_classifier, split_by_device, train, Hyperparameters, ModelKind, PairPolicy};
use wifsm_core::pipeline::{build_fingerprints, fingerprint_groups};
use wifsm_core::synth::{generate_trace, write_capture};
use wifsm_core::{DeviceId, MacAddress, ManagementFrame, Metric};

use crate::error::{Error, Result, StageExt};
use crate::harness::{self, load_oui, persistent_mac_labels, ReportFormat};
use crate::store::{self, FeatureRecord, FrameIndex, FsmRecord, GroupRecord, ModelRecord};
use crate::{matrix, par, profiles};

#[derive(Debug, Parser)]
#[command(name = "wifsm", version, about = "Wi-Fi device fingerprinting from management-frame state machines")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Vendor OUI list, one `AA:BB:CC` prefix per line.
    #[arg(long, global = true)]
    pub oui: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic capture (`trace.pcap`) and its ground truth (`truth.csv`).
    Synth {
        #[arg(long)]
        profiles: PathBuf,
        /// Overrides the duration in the profile file (seconds).
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Parse a pcap into `frames.ndjson`.
    Ingest { pcap: PathBuf },
    /// Pseudonymize addresses and blank SSIDs into `frames.sanitized.ndjson`.
    Sanitize {
        frames: PathBuf,
        #[arg(long)]
        salt: String,
    },
    /// Drop access points and split client streams into `bursts.ndjson`.
    Segment {
        frames: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BURST_GAP)]
        gap: f64,
    },
    /// Group bursts by P and write `groups.ndjson`, `fsm.ndjson`, `features.ndjson`, `features.csv`.
    Fingerprint {
        frames: PathBuf,
        #[arg(long)]
        p: usize,
        /// Ground-truth CSV; without it globally administered MACs label devices.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        include_partial: bool,
    },
    /// Nearest-neighbor matching into `matches.csv`.
    Match {
        features: PathBuf,
        #[arg(long, default_value = "combined")]
        metric: String,
        /// Combined matching without a materialized matrix.
        #[arg(long)]
        block: bool,
        /// Also write the matrix to `matrix.bin`.
        #[arg(long)]
        dump_matrix: bool,
    },
    /// Train a pair classifier into `model.ndjson` and evaluate it into `eval.csv`.
    Train {
        features: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        /// Also match held-out fingerprints by classifier score (`model_matches.csv`).
        #[arg(long)]
        match_with_model: bool,
    },
    /// Run an experiment config and write `report.csv`.
    Eval {
        #[arg(long)]
        config: PathBuf,
    },
    /// Probe-association accuracy of a baseline into `baseline.csv`.
    Baseline {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        groups: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = wifsm_core::baselines::DEFAULT_TAU)]
        tau: f64,
        #[arg(long, default_value_t = wifsm_core::baselines::DEFAULT_SAMPLES)]
        samples: usize,
    },
    /// Render a `report.csv` to stdout.
    Report {
        report: PathBuf,
        #[arg(long, default_value = "table")]
        format: String,
    },
}

fn out_path(g: &Global, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&g.out).map_err(|e| Error::io(&g.out, e))?;
    Ok(g.out.join(name))
}

fn oui_table(g: &Global) -> Result<OuiTable> {
    g.oui.as_deref().map_or_else(|| Ok(OuiTable::default()), load_oui)
}

fn read_features(path: &Path) -> Result<Vec<(FeatureVector, usize)>> {
    let (_, records) = store::read_records::<FeatureRecord>(path)?;
    records.iter().map(|r| Ok((r.to_vector()?, r.group_size))).collect()
}

fn labels_for(frames: &[ManagementFrame], truth: Option<&Path>, oui: &OuiTable) -> Result<BTreeMap<MacAddress, Option<DeviceId>>> {
    Ok(match truth {
        Some(t) => store::device_map_from_truth(frames, &store::read_truth(t)?),
        None => persistent_mac_labels(frames, oui),
    })
}

/// Runs one command and returns what it printed.
pub fn run(cli: &Cli) -> Result<String> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth { profiles, duration } => {
            let set = profiles::load_profiles(profiles)?;
            let duration = duration.unwrap_or(set.duration);
            let (frames, truth) = generate_trace(&set.profiles, duration, g.seed).stage("synth")?;
            store::write_atomic(&out_path(g, "trace.pcap")?, &write_capture(&frames))?;
            store::write_csv(&out_path(g, "truth.csv")?, &store::TRUTH_HEADER, &store::truth_csv(&truth))?;
            Ok(format!("{} frames from {} devices\n", frames.len(), truth.device_profiles.len()))
        }
        Command::Ingest { pcap } => {
            let bytes = fs::read(pcap).map_err(|e| Error::io(pcap, e))?;
            let id = pcap.file_stem().and_then(|s| s.to_str()).unwrap_or("capture");
            let parsed = parse_capture(&bytes, id).stage("ingest")?;
            store::write_frames(&out_path(g, "frames.ndjson")?, Some(g.seed), &parsed.frames)?;
            let s = parsed.stats;
            Ok(format!(
                "{} records, {} frames, {} skipped{}\n",
                s.records,
                s.frames,
                s.skipped(),
                if s.truncated_tail { ", truncated tail" } else { "" }
            ))
        }
        Command::Sanitize { frames, salt } => {
            let frames = store::read_frames(frames)?;
            let clean = sanitize(&frames, salt.as_bytes()).stage("sanitize")?;
            store::write_frames(&out_path(g, "frames.sanitized.ndjson")?, Some(g.seed), &clean)?;
            Ok(format!("{} frames sanitized\n", clean.len()))
        }
        Command::Segment { frames, gap } => {
            let frames = store::read_frames(frames)?;
            let (clients, excluded) = filter_clients(&frames);
            let bursts = segment_bursts(&clients, *gap).stage("segment")?;
            let records: Vec<_> = bursts.iter().map(store::BurstRecord::from).collect();
            store::write_records(&out_path(g, "bursts.ndjson")?, Some(g.seed), &records)?;
            Ok(format!("{} bursts, {} access points excluded\n", bursts.len(), excluded.len()))
        }
        Command::Fingerprint { frames, p, truth, include_partial } => {
            let frames = store::read_frames(frames)?;
            let devices = labels_for(&frames, truth.as_deref(), &oui_table(g)?)?;
            let fps = build_fingerprints(&frames, &devices, *p, *include_partial, g.seed).stage("fingerprint")?;
            let groups: Vec<_> = fps.fingerprints.iter().map(|f| GroupRecord::from(&f.group)).collect();
            let fsms: Vec<_> = fps.fingerprints.iter().map(|f| FsmRecord::new(&f.group, &f.fsm)).collect();
            let features: Vec<_> = fps.fingerprints.iter().map(|f| FeatureRecord::new(&f.features, *p)).collect();
            store::write_records(&out_path(g, "groups.ndjson")?, Some(g.seed), &groups)?;
            store::write_records(&out_path(g, "fsm.ndjson")?, Some(g.seed), &fsms)?;
            store::write_records(&out_path(g, "features.ndjson")?, Some(g.seed), &features)?;
            store::write_atomic(&out_path(g, "features.csv")?, &store::features_csv(&fps.features())?)?;
            Ok(format!("{} fingerprints at P={p}\n", fps.fingerprints.len()))
        }
        Command::Match { features, metric, block, dump_matrix } => {
            let metric: Metric = metric.parse()?;
            let raw: Vec<_> = read_features(features)?.into_iter().map(|(v, _)| v).collect();
            let normalized = normalize_features(&raw).stage("match")?;
            let labels: Vec<_> = normalized.iter().map(|v| v.device_id.clone()).collect();
            let result = if *block {
                if metric != Metric::Combined {
                    return Err(Error::Usage("--block only applies to --metric combined".into()));
                }
                par::blocked_combined_match(&normalized).stage("match")?
            } else {
                let m = par::metric_matrix(&normalized, metric).stage("match")?;
                if *dump_matrix {
                    matrix::write_matrix(&out_path(g, "matrix.bin")?, &m)?;
                }
                par::nearest_neighbor_match(&m, &labels).stage("match")?
            };
            let rows: Vec<Vec<String>> = result
                .predictions
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    let correct = result.correct[i].map(|c| c.to_string()).unwrap_or_default();
                    vec![raw[i].fingerprint_id.0.to_string(), raw[p].fingerprint_id.0.to_string(), correct]
                })
                .collect();
            store::write_csv(&out_path(g, "matches.csv")?, &["fingerprint_id", "predicted_id", "correct"], &rows)?;
            Ok(format!("{metric} accuracy {:.4} over {} fingerprints\n", result.accuracy, result.eligible))
        }
        Command::Train { features, model, train_fraction, match_with_model } => {
            let kind: ModelKind = model.parse()?;
            let loaded = read_features(features)?;
            let p = loaded.first().map_or(0, |(_, p)| *p);
            let raw: Vec<_> = loaded.into_iter().map(|(v, _)| v).collect();
            let (train_idx, test_idx) = split_by_device(&raw, *train_fraction, g.seed).stage("train")?;
            let pick = |idx: &[usize]| idx.iter().map(|&i| raw[i].clone()).collect::<Vec<_>>();
            let scaler = Scaler::fit(&pick(&train_idx)).stage("train")?;
            let train_v: Vec<_> = pick(&train_idx).iter().map(|v| scaler.transform(v)).collect();
            let test_v: Vec<_> = pick(&test_idx).iter().map(|v| scaler.transform(v)).collect();
            let train_pairs = build_pairs(&train_v, PairPolicy::Balanced, g.seed).stage("train")?;
            let test_pairs = build_pairs(&test_v, PairPolicy::Balanced, g.seed ^ 0x5eed).stage("eval")?;
            let mut trained = train(kind, &train_pairs, &Hyperparameters::default(), g.seed).stage("train")?;
            trained.meta.split = format!("device-disjoint {train_fraction} train");
            let ev = evaluate_classifier(&trained, &test_pairs).stage("eval")?;
            store::write_records(&out_path(g, "model.ndjson")?, Some(g.seed), &[ModelRecord(trained.clone())])?;
            let row = vec![
                p.to_string(),
                kind.name().to_string(),
                ev.accuracy.to_string(),
                ev.tp.to_string(),
                ev.fp.to_string(),
                ev.tn.to_string(),
                ev.fn_.to_string(),
            ];
            store::write_csv(&out_path(g, "eval.csv")?, &["P", "model", "accuracy", "tp", "fp", "tn", "fn"], &[row])?;
            let mut msg = format!("{kind} pair accuracy {:.4} on {} test pairs\n", ev.accuracy, test_pairs.len());
            if *match_with_model {
                let result = harness::model_match(&trained, &test_v).stage("match")?;
                let rows: Vec<Vec<String>> = result
                    .predictions
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| {
                        let correct = result.correct[i].map(|c| c.to_string()).unwrap_or_default();
                        vec![test_v[i].fingerprint_id.0.to_string(), test_v[p].fingerprint_id.0.to_string(), correct]
                    })
                    .collect();
                store::write_csv(&out_path(g, "model_matches.csv")?, &["fingerprint_id", "predicted_id", "correct"], &rows)?;
                msg.push_str(&format!("{kind} matching accuracy {:.4}\n", result.accuracy));
            }
            Ok(msg)
        }
        Command::Eval { config } => {
            let cfg = harness::load_config(config)?;
            let report = harness::run_sweep(&cfg)?;
            let dir = if g.out != Path::new(".") { g.out.clone() } else { cfg.output_dir.clone().unwrap_or_else(|| g.out.clone()) };
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            store::write_atomic(&dir.join("report.csv"), &harness::emit_report(&report, ReportFormat::Csv)?)?;
            Ok(String::from_utf8_lossy(&harness::emit_report(&report, ReportFormat::Table)?).into_owned())
        }
        Command::Baseline { frames, groups, method, tau, samples } => {
            let method: Method = method.parse()?;
            let frames = store::read_frames(frames)?;
            let index = FrameIndex::new(&frames);
            let (_, records) = store::read_records::<GroupRecord>(groups)?;
            let groups = records.iter().map(|r| r.resolve(&index)).collect::<Result<Vec<_>>>()?;
            let events = probe_events(&groups);
            let matrix = match method {
                Method::Fsm => {
                    let fps = fingerprint_groups(groups.clone(), g.seed).stage("baseline")?;
                    let raw: Vec<_> = fps.into_iter().map(|f| f.features).collect();
                    let normalized = normalize_features(&raw).stage("baseline")?;
                    Some(par::metric_matrix(&normalized, Metric::Combined).stage("baseline")?)
                }
                _ => None,
            };
            let acc = discrimination_accuracy(&events, method, *samples, *tau, g.seed, matrix.as_ref()).stage("baseline")?;
            let row = vec![method.to_string(), tau.to_string(), samples.to_string(), acc.to_string()];
            store::write_csv(&out_path(g, "baseline.csv")?, &["method", "tau", "samples", "accuracy"], &[row])?;
            Ok(format!("{method} discrimination accuracy {acc:.4}\n"))
        }
        Command::Report { report, format } => {
            let format: ReportFormat = format.parse()?;
            let rep = harness::read_report_csv(report)?;
            Ok(String::from_utf8_lossy(&harness::emit_report(&rep, format)?).into_owned())
        }
    }
}
