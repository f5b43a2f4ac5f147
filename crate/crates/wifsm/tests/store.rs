use std::path::Path;

use proptest::prelude::*;
use wifsm::store::{parse_records, write_records, BurstRecord, FeatureRecord, FrameRecord, GroupRecord};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fuzzed_bodies_never_crash_the_reader(body in prop::collection::vec(any::<u8>(), 0..400), line in "[ -~]{0,80}") {
        let header = b"{\"schema\":\"frames.v1\",\"producer\":\"t\",\"seed\":1}\n";
        let mut bytes = header.to_vec();
        bytes.extend_from_slice(&body);
        let _ = parse_records::<FrameRecord>(Path::new("f"), &bytes);
        let mut text = header.to_vec();
        text.extend_from_slice(line.as_bytes());
        let _ = parse_records::<FrameRecord>(Path::new("f"), &text);
        let _ = parse_records::<GroupRecord>(Path::new("f"), &body);
    }

    #[test]
    fn feature_records_round_trip(rows in prop::collection::vec((any::<u64>(), prop::array::uniform7(-1e6..1e6f64), any::<[u8; 32]>(), any::<bool>()), 0..20)) {
        let records: Vec<FeatureRecord> = rows
            .into_iter()
            .map(|(id, scalars, bits, normalized)| FeatureRecord {
                fingerprint_id: id,
                device_id: (id % 3 != 0).then(|| wifsm_core::DeviceId::new(format!("dev-{}", id % 7))),
                group_size: (id % 10) as usize + 1,
                scalars,
                ie_bitmap: hex::encode(bits),
                normalized,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ndjson");
        write_records(&path, Some(4), &records).unwrap();
        let first = std::fs::read(&path).unwrap();
        let (header, back) = wifsm::store::read_records::<FeatureRecord>(&path).unwrap();
        prop_assert_eq!(header.seed, Some(4));
        prop_assert_eq!(&back, &records);
        write_records(&path, Some(4), &back).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), first);
    }
}

#[test]
fn burst_records_need_their_frames() {
    let frames: Vec<wifsm_core::ManagementFrame> = Vec::new();
    let index = wifsm::store::FrameIndex::new(&frames);
    let r = BurstRecord { capture_id: "c".into(), mac: "02:00:00:00:00:01".into(), index_within_mac: 0, start_time: 0.0, end_time: 0.0, frames: vec![3] };
    let err = index.burst(&r).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
