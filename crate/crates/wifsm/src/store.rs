//! Versioned newline-delimited record files.
//!
//! Line 1 is a header naming the schema, the producer and the seed that
//! produced the file; every further line is one JSON record. Writes go
//! through a temporary file in the target directory and a rename.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wifsm_core::burst::{Burst, BurstGroup};
use wifsm_core::features::FeatureVector;
use wifsm_core::learn::ClassifierModel;
use wifsm_core::{DeviceId, Fsm, FsmState, InformationElement, MacAddress, ManagementFrame, PseudoId};

use crate::error::{Error, Result};

pub const PRODUCER: &str = concat!("wifsm ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub schema: String,
    pub producer: String,
    pub seed: Option<u64>,
}

/// A record type bound to one schema tag.
pub trait Record: Serialize + DeserializeOwned {
    const SCHEMA: &'static str;
}

/// Writes `records` atomically, header first.
pub fn write_records<R: Record>(path: &Path, seed: Option<u64>, records: &[R]) -> Result<()> {
    let header = Header { schema: R::SCHEMA.to_string(), producer: PRODUCER.to_string(), seed };
    let mut buf = serde_json::to_vec(&header).expect("header serializes");
    buf.push(b'\n');
    for r in records {
        serde_json::to_writer(&mut buf, r).map_err(|e| Error::Usage(format!("cannot serialize record: {e}")))?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        // temp files start out owner-only
        tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644)).map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Reads and validates a record file written under `R::SCHEMA`.
pub fn read_records<R: Record>(path: &Path) -> Result<(Header, Vec<R>)> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_records(path, &text)
}

/// [`read_records`] on in-memory bytes; `path` only labels errors.
pub fn parse_records<R: Record>(path: &Path, bytes: &[u8]) -> Result<(Header, Vec<R>)> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::parse(path, 0, format!("not UTF-8: {e}")))?;
    let mut lines = text.split_terminator('\n');
    let first = lines.next().ok_or_else(|| Error::parse(path, 1, "missing header line"))?;
    let header: Header = serde_json::from_str(first).map_err(|e| Error::parse(path, 1, format!("bad header: {e}")))?;
    if header.schema != R::SCHEMA {
        return Err(Error::Schema { path: path.to_path_buf(), expected: R::SCHEMA.into(), found: header.schema });
    }
    let records = lines
        .enumerate()
        .map(|(k, line)| serde_json::from_str(line).map_err(|e| Error::parse(path, k + 2, e)))
        .collect::<Result<Vec<R>>>()?;
    Ok((header, records))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IeRecord {
    pub tag: u8,
    /// Hex-encoded body.
    pub body: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub capture_id: String,
    pub ordinal: u64,
    pub timestamp: f64,
    pub src: String,
    pub dst: String,
    pub subtype: String,
    pub seq_num: u16,
    pub ies: Vec<IeRecord>,
    pub pseudonymized: bool,
}

impl Record for FrameRecord {
    const SCHEMA: &'static str = "frames.v1";
}

impl From<&ManagementFrame> for FrameRecord {
    fn from(f: &ManagementFrame) -> Self {
        FrameRecord {
            capture_id: f.capture_id.clone(),
            ordinal: f.ordinal,
            timestamp: f.timestamp,
            src: f.src.to_string(),
            dst: f.dst.to_string(),
            subtype: f.subtype.name().to_string(),
            seq_num: f.seq_num,
            ies: f.ies.iter().map(|ie| IeRecord { tag: ie.tag, body: hex::encode(&ie.body) }).collect(),
            pseudonymized: f.pseudonymized,
        }
    }
}

fn format_err(msg: impl std::fmt::Display) -> Error {
    Error::Core(wifsm_core::Error::Format(msg.to_string()))
}

impl TryFrom<FrameRecord> for ManagementFrame {
    type Error = Error;

    fn try_from(r: FrameRecord) -> Result<Self> {
        if r.seq_num >= wifsm_core::frame::SEQ_MODULUS {
            return Err(format_err(format!("sequence number {} out of range", r.seq_num)));
        }
        let mac = |s: &str| s.parse::<MacAddress>().map_err(|_| format_err(format!("bad MAC {s:?}")));
        Ok(ManagementFrame {
            timestamp: r.timestamp,
            src: mac(&r.src)?,
            dst: mac(&r.dst)?,
            subtype: r.subtype.parse().map_err(|_| format_err(format!("unknown subtype {:?}", r.subtype)))?,
            seq_num: r.seq_num,
            ies: r
                .ies
                .into_iter()
                .map(|ie| {
                    let body = hex::decode(&ie.body).map_err(|e| format_err(format!("bad IE body: {e}")))?;
                    Ok(InformationElement { tag: ie.tag, body })
                })
                .collect::<Result<_>>()?,
            capture_id: r.capture_id,
            ordinal: r.ordinal,
            pseudonymized: r.pseudonymized,
        })
    }
}

pub fn write_frames(path: &Path, seed: Option<u64>, frames: &[ManagementFrame]) -> Result<()> {
    let records: Vec<FrameRecord> = frames.iter().map(FrameRecord::from).collect();
    write_records(path, seed, &records)
}

pub fn read_frames(path: &Path) -> Result<Vec<ManagementFrame>> {
    let (_, records) = read_records::<FrameRecord>(path)?;
    records.into_iter().map(ManagementFrame::try_from).collect()
}

/// A burst, referencing its frames by ordinal within `capture_id`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurstRecord {
    pub capture_id: String,
    pub mac: String,
    pub index_within_mac: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub frames: Vec<u64>,
}

impl Record for BurstRecord {
    const SCHEMA: &'static str = "bursts.v1";
}

impl From<&Burst> for BurstRecord {
    fn from(b: &Burst) -> Self {
        BurstRecord {
            capture_id: b.capture_id.clone(),
            mac: b.mac.to_string(),
            index_within_mac: b.index_within_mac,
            start_time: b.start_time,
            end_time: b.end_time,
            frames: b.frames.iter().map(|f| f.ordinal).collect(),
        }
    }
}

/// Frames keyed by `(capture_id, ordinal)` for resolving references.
pub struct FrameIndex<'a> {
    by_key: BTreeMap<(&'a str, u64), &'a ManagementFrame>,
}

impl<'a> FrameIndex<'a> {
    pub fn new(frames: &'a [ManagementFrame]) -> Self {
        FrameIndex { by_key: frames.iter().map(|f| ((f.capture_id.as_str(), f.ordinal), f)).collect() }
    }

    pub fn burst(&self, r: &BurstRecord) -> Result<Burst> {
        let frames = r
            .frames
            .iter()
            .map(|&o| {
                self.by_key
                    .get(&(r.capture_id.as_str(), o))
                    .map(|f| (*f).clone())
                    .ok_or_else(|| format_err(format!("burst references missing frame {}#{o}", r.capture_id)))
            })
            .collect::<Result<Vec<_>>>()?;
        if frames.is_empty() {
            return Err(format_err("empty burst"));
        }
        Ok(Burst {
            capture_id: r.capture_id.clone(),
            mac: r.mac.parse().map_err(|_| format_err(format!("bad MAC {:?}", r.mac)))?,
            frames,
            start_time: r.start_time,
            end_time: r.end_time,
            index_within_mac: r.index_within_mac,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupRecord {
    pub pseudo_id: u64,
    pub device_id: Option<DeviceId>,
    pub partial: bool,
    pub bursts: Vec<BurstRecord>,
}

impl Record for GroupRecord {
    const SCHEMA: &'static str = "groups.v1";
}

impl From<&BurstGroup> for GroupRecord {
    fn from(g: &BurstGroup) -> Self {
        GroupRecord {
            pseudo_id: g.pseudo_id.0,
            device_id: g.device_id.clone(),
            partial: g.partial,
            bursts: g.bursts.iter().map(BurstRecord::from).collect(),
        }
    }
}

impl GroupRecord {
    pub fn resolve(&self, index: &FrameIndex<'_>) -> Result<BurstGroup> {
        Ok(BurstGroup {
            pseudo_id: PseudoId(self.pseudo_id),
            device_id: self.device_id.clone(),
            bursts: self.bursts.iter().map(|b| index.burst(b)).collect::<Result<_>>()?,
            partial: self.partial,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsmRecord {
    pub pseudo_id: u64,
    pub device_id: Option<DeviceId>,
    pub states: Vec<String>,
    pub transitions: Vec<(String, String, u32)>,
    pub initial: String,
    pub start_time: f64,
    pub duration: f64,
    pub frame_count: usize,
    pub burst_count: usize,
    pub inter_burst_gaps: Vec<f64>,
    pub seq_span: u16,
}

impl Record for FsmRecord {
    const SCHEMA: &'static str = "fsm.v1";
}

impl FsmRecord {
    pub fn new(group: &BurstGroup, fsm: &Fsm) -> Self {
        FsmRecord {
            pseudo_id: group.pseudo_id.0,
            device_id: group.device_id.clone(),
            states: fsm.states.iter().map(|s| s.to_string()).collect(),
            transitions: fsm.transitions.iter().map(|((a, b), &c)| (a.to_string(), b.to_string(), c)).collect(),
            initial: fsm.initial.to_string(),
            start_time: fsm.start_time,
            duration: fsm.duration,
            frame_count: fsm.frame_count,
            burst_count: fsm.burst_count,
            inter_burst_gaps: fsm.inter_burst_gaps.clone(),
            seq_span: fsm.seq_span,
        }
    }

    pub fn to_fsm(&self) -> Result<Fsm> {
        let state = |s: &str| s.parse::<FsmState>().map_err(|_| format_err(format!("bad state {s:?}")));
        Ok(Fsm {
            states: self.states.iter().map(|s| state(s)).collect::<Result<_>>()?,
            transitions: self
                .transitions
                .iter()
                .map(|(a, b, c)| Ok(((state(a)?, state(b)?), *c)))
                .collect::<Result<_>>()?,
            initial: state(&self.initial)?,
            start_time: self.start_time,
            duration: self.duration,
            frame_count: self.frame_count,
            burst_count: self.burst_count,
            inter_burst_gaps: self.inter_burst_gaps.clone(),
            seq_span: self.seq_span,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRecord {
    pub fingerprint_id: u64,
    pub device_id: Option<DeviceId>,
    /// Bursts per group the fingerprint was built with.
    pub group_size: usize,
    pub scalars: [f64; 7],
    /// 256-bit tag bitmap as 64 hex characters.
    pub ie_bitmap: String,
    pub normalized: bool,
}

impl Record for FeatureRecord {
    const SCHEMA: &'static str = "features.v1";
}

impl FeatureRecord {
    pub fn new(v: &FeatureVector, group_size: usize) -> Self {
        FeatureRecord {
            fingerprint_id: v.fingerprint_id.0,
            device_id: v.device_id.clone(),
            group_size,
            scalars: v.scalars,
            ie_bitmap: v.ie_bitmap.to_hex(),
            normalized: v.normalized,
        }
    }

    pub fn to_vector(&self) -> Result<FeatureVector> {
        Ok(FeatureVector {
            scalars: self.scalars,
            ie_bitmap: wifsm_core::IeBitmap::from_hex(&self.ie_bitmap)?,
            normalized: self.normalized,
            fingerprint_id: PseudoId(self.fingerprint_id),
            device_id: self.device_id.clone(),
        })
    }
}

/// Trained classifier, one line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelRecord(pub ClassifierModel);

impl Record for ModelRecord {
    const SCHEMA: &'static str = "model.v1";
}

/// Flat feature table: pseudo_id, device_id, x1..x7, ie_bitmap.
pub fn features_csv(vectors: &[FeatureVector]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["pseudo_id".to_string(), "device_id".to_string()];
    header.extend((1..=7).map(|k| format!("x{k}")));
    header.push("ie_bitmap".into());
    w.write_record(&header).map_err(csv_err)?;
    for v in vectors {
        let mut row = vec![v.fingerprint_id.0.to_string(), device_str(&v.device_id)];
        row.extend(v.scalars.iter().map(|x| x.to_string()));
        row.push(v.ie_bitmap.to_hex());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Usage(e.to_string()))
}

pub(crate) fn device_str(d: &Option<DeviceId>) -> String {
    d.as_ref().map(|d| d.to_string()).unwrap_or_default()
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Usage(format!("csv: {e}"))
}

/// Writes CSV rows (header first) atomically.
pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref())).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Usage(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Ground-truth table: frame ordinal, device_id, profile.
pub fn truth_csv(truth: &wifsm_core::synth::GroundTruth) -> Vec<Vec<String>> {
    truth
        .frame_devices
        .iter()
        .enumerate()
        .map(|(ordinal, d)| vec![ordinal.to_string(), d.to_string(), truth.device_profiles[d].clone()])
        .collect()
}

pub const TRUTH_HEADER: [&str; 3] = ["frame_ordinal", "device_id", "profile"];

/// Reads a ground-truth CSV into ordinal → device.
pub fn read_truth(path: &Path) -> Result<BTreeMap<u64, DeviceId>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, 0, e))?;
    let mut out = BTreeMap::new();
    for (k, row) in r.records().enumerate() {
        let row = row.map_err(|e| Error::parse(path, k + 2, e))?;
        let ordinal: u64 = row
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, k + 2, "bad frame ordinal"))?;
        let device = row.get(1).ok_or_else(|| Error::parse(path, k + 2, "missing device_id"))?;
        out.insert(ordinal, DeviceId::new(device));
    }
    Ok(out)
}

/// MAC → device labels derived from per-frame truth.
pub fn device_map_from_truth(
    frames: &[ManagementFrame],
    truth: &BTreeMap<u64, DeviceId>,
) -> BTreeMap<MacAddress, Option<DeviceId>> {
    frames.iter().filter_map(|f| truth.get(&f.ordinal).map(|d| (f.src, Some(d.clone())))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use wifsm_core::FrameSubtype;

    fn frame(ordinal: u64) -> ManagementFrame {
        ManagementFrame {
            timestamp: 1.25 + ordinal as f64 * 0.1,
            src: "02:00:00:00:00:01".parse().unwrap(),
            dst: MacAddress::BROADCAST,
            subtype: FrameSubtype::ProbeRequest,
            seq_num: 7,
            ies: vec![InformationElement { tag: 1, body: vec![2, 4] }],
            capture_id: "cap".into(),
            ordinal,
            pseudonymized: false,
        }
    }

    #[test]
    fn frames_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ndjson");
        let frames: Vec<_> = (0..3).map(frame).collect();
        write_frames(&path, Some(3), &frames).unwrap();
        assert_eq!(read_frames(&path).unwrap(), frames);
        let first = fs::read(&path).unwrap();
        write_frames(&path, Some(3), &frames).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn empty_file_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.ndjson");
        write_frames(&path, None, &[]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(read_frames(&path).unwrap().is_empty());
    }

    #[test]
    fn wrong_schema_names_both_tags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ndjson");
        write_frames(&path, None, &[frame(0)]).unwrap();
        let err = read_records::<BurstRecord>(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bursts.v1") && msg.contains("frames.v1"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn truncated_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ndjson");
        write_frames(&path, None, &[frame(0), frame(1)]).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 10);
        match parse_records::<FrameRecord>(&path, &bytes) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = format!(
            "{{\"schema\":\"fsm.v1\",\"producer\":\"{PRODUCER}\",\"seed\":null}}\n{{\"pseudo_id\":1,\"extra\":2}}\n"
        );
        assert!(parse_records::<FsmRecord>(Path::new("x"), text.as_bytes()).is_err());
    }
}
