//! Multi-threaded distance matrices and nearest-neighbor matching.
//!
//! Results are identical to the sequential routines in
//! `wifsm_core::similarity`; only the work is spread over threads.

use rayon::prelude::*;
use wifsm_core::features::FeatureVector;
use wifsm_core::similarity::{
    combined_matrix, combined_nearest, embed_all, fill_row, metric_maxima, nearest_in_row, score_predictions,
    Embedding, MatchResult, MetricMaxima,
};
use wifsm_core::{DeviceId, DistanceMatrix, Metric, Result};

/// Rows handed to one task when computing maxima.
const ROW_BLOCK: usize = 64;

pub fn distance_matrix(embeddings: &[Embedding], metric: Metric) -> DistanceMatrix {
    let mut m = DistanceMatrix::zeros(embeddings.len(), metric);
    m.row_segments_mut().into_par_iter().enumerate().for_each(|(i, row)| fill_row(embeddings, i, metric, row));
    m
}

/// Any metric over already-normalized vectors, combined included.
pub fn metric_matrix(normalized: &[FeatureVector], metric: Metric) -> Result<DistanceMatrix> {
    let embeddings = embed_all(normalized);
    if metric != Metric::Combined {
        return Ok(distance_matrix(&embeddings, metric));
    }
    let [e, m, c] = Metric::BASE.map(|metric| distance_matrix(&embeddings, metric));
    combined_matrix([&e, &m, &c])
}

pub fn nearest_neighbor_match(matrix: &DistanceMatrix, labels: &[Option<DeviceId>]) -> Result<MatchResult> {
    if matrix.n() < 2 || labels.len() != matrix.n() {
        // let the sequential routine produce the error
        return wifsm_core::similarity::nearest_neighbor_match(matrix, labels);
    }
    let predictions = (0..matrix.n()).into_par_iter().map(|i| nearest_in_row(matrix, i).expect("n >= 2")).collect();
    score_predictions(predictions, labels)
}

/// Combined-distance matching without materializing any matrix: one pass
/// for the per-metric maxima, one for the row minima. Memory is linear in
/// the number of fingerprints.
pub fn blocked_combined_match(normalized: &[FeatureVector]) -> Result<MatchResult> {
    let labels: Vec<Option<DeviceId>> = normalized.iter().map(|v| v.device_id.clone()).collect();
    if normalized.len() < 2 {
        return wifsm_core::similarity::nearest_neighbor_match(&DistanceMatrix::zeros(normalized.len(), Metric::Combined), &labels);
    }
    let embeddings = embed_all(normalized);
    let n = embeddings.len();
    let maxima = (0..n.div_ceil(ROW_BLOCK))
        .into_par_iter()
        .map(|b| metric_maxima(&embeddings, b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n)))
        .reduce(MetricMaxima::default, MetricMaxima::merge);
    let predictions =
        (0..n).into_par_iter().map(|i| combined_nearest(&embeddings, i, &maxima).expect("n >= 2")).collect();
    score_predictions(predictions, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use wifsm_core::features::normalize_features;
    use wifsm_core::{IeBitmap, PseudoId};

    fn vectors(n: usize) -> Vec<FeatureVector> {
        let v: Vec<FeatureVector> = (0..n)
            .map(|i| {
                let d = i % 7;
                let mut s = [0.0; 7];
                for (k, x) in s.iter_mut().enumerate() {
                    *x = (d * (k + 1)) as f64 + ((i * 31 + k * 17) % 11) as f64 * 0.05;
                }
                FeatureVector {
                    scalars: s,
                    ie_bitmap: [(d * 3) as u8, 200].into_iter().collect::<IeBitmap>(),
                    normalized: false,
                    fingerprint_id: PseudoId(i as u64),
                    device_id: Some(DeviceId::new(format!("d{d}"))),
                }
            })
            .collect();
        normalize_features(&v).unwrap()
    }

    #[test]
    fn parallel_equals_sequential() {
        let v = vectors(150);
        for metric in [Metric::Euclidean, Metric::Manhattan, Metric::Cosine] {
            assert_eq!(metric_matrix(&v, metric).unwrap(), wifsm_core::similarity::distance_matrix(&v, metric));
        }
        let comb = metric_matrix(&v, Metric::Combined).unwrap();
        let labels: Vec<_> = v.iter().map(|x| x.device_id.clone()).collect();
        let seq = wifsm_core::similarity::nearest_neighbor_match(&comb, &labels).unwrap();
        assert_eq!(nearest_neighbor_match(&comb, &labels).unwrap(), seq);
        assert_eq!(blocked_combined_match(&v).unwrap(), seq);
    }
}
