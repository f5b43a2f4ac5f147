//! Pairwise distances, combined distance matrices and nearest-neighbor
//! fingerprint matching.
//!
//! Distances are taken over the full embedding (seven scalars followed by
//! 256 binary IE flags). Because the flags are 0/1, their contribution to
//! every metric reduces to popcounts, which is what [`Embedding`] exploits.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use core::str::FromStr;

use crate::burst::DeviceId;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, SCALAR_FEATURES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Euclidean,
    Manhattan,
    Cosine,
    Combined,
}

impl Metric {
    pub const BASE: [Metric; 3] = [Metric::Euclidean, Metric::Manhattan, Metric::Cosine];

    pub const fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::Cosine => "cosine",
            Metric::Combined => "combined",
        }
    }

    /// Numeric tag used by the binary matrix dump.
    pub const fn code(self) -> u32 {
        match self {
            Metric::Euclidean => 0,
            Metric::Manhattan => 1,
            Metric::Cosine => 2,
            Metric::Combined => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        [Metric::Euclidean, Metric::Manhattan, Metric::Cosine, Metric::Combined].into_iter().find(|m| m.code() == code)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            "cosine" => Ok(Metric::Cosine),
            "combined" => Ok(Metric::Combined),
            _ => Err(Error::config(alloc::format!("unknown metric {s:?}"))),
        }
    }
}

/// Packed form of a feature vector for fast distance evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Embedding {
    scalars: [f64; SCALAR_FEATURES],
    bits: [u64; 4],
    norm: f64,
}

impl Embedding {
    pub fn new(v: &FeatureVector) -> Self {
        let sq: f64 = v.scalars.iter().map(|x| x * x).sum();
        Embedding { scalars: v.scalars, bits: v.ie_bitmap.0, norm: libm::sqrt(sq + v.ie_bitmap.count_ones() as f64) }
    }

    fn hamming(&self, other: &Embedding) -> f64 {
        let mut n = 0;
        for k in 0..4 {
            n += (self.bits[k] ^ other.bits[k]).count_ones();
        }
        n as f64
    }

    pub fn euclidean(&self, other: &Embedding) -> f64 {
        let mut sum = 0.0;
        for k in 0..SCALAR_FEATURES {
            let d = self.scalars[k] - other.scalars[k];
            sum += d * d;
        }
        libm::sqrt(sum + self.hamming(other))
    }

    pub fn manhattan(&self, other: &Embedding) -> f64 {
        let mut sum = 0.0;
        for k in 0..SCALAR_FEATURES {
            sum += libm::fabs(self.scalars[k] - other.scalars[k]);
        }
        sum + self.hamming(other)
    }

    /// `1 − cos θ`; 1 if exactly one vector is zero, 0 if both are.
    pub fn cosine(&self, other: &Embedding) -> f64 {
        match (self.norm == 0.0, other.norm == 0.0) {
            (true, true) => return 0.0,
            (true, false) | (false, true) => return 1.0,
            _ => {}
        }
        let mut dot = 0.0;
        for k in 0..SCALAR_FEATURES {
            dot += self.scalars[k] * other.scalars[k];
        }
        let mut common = 0;
        for k in 0..4 {
            common += (self.bits[k] & other.bits[k]).count_ones();
        }
        dot += common as f64;
        (1.0 - dot / (self.norm * other.norm)).max(0.0)
    }

    pub fn distance(&self, other: &Embedding, metric: Metric) -> f64 {
        match metric {
            Metric::Euclidean => self.euclidean(other),
            Metric::Manhattan => self.manhattan(other),
            Metric::Cosine => self.cosine(other),
            Metric::Combined => panic!("combined distance needs dataset-wide maxima; use combined_matrix"),
        }
    }
}

pub fn embed_all(vectors: &[FeatureVector]) -> Vec<Embedding> {
    vectors.iter().map(Embedding::new).collect()
}

pub fn euclidean(x: &FeatureVector, y: &FeatureVector) -> f64 {
    debug_assert_eq!(x.normalized, y.normalized, "comparing normalized with raw features");
    Embedding::new(x).euclidean(&Embedding::new(y))
}

pub fn manhattan(x: &FeatureVector, y: &FeatureVector) -> f64 {
    debug_assert_eq!(x.normalized, y.normalized, "comparing normalized with raw features");
    Embedding::new(x).manhattan(&Embedding::new(y))
}

pub fn cosine(x: &FeatureVector, y: &FeatureVector) -> f64 {
    debug_assert_eq!(x.normalized, y.normalized, "comparing normalized with raw features");
    Embedding::new(x).cosine(&Embedding::new(y))
}

/// Symmetric zero-diagonal distance matrix, stored as its strict upper
/// triangle in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    metric: Metric,
    upper: Vec<f64>,
}

fn row_offset(n: usize, i: usize) -> usize {
    i * (2 * n - i - 1) / 2
}

impl DistanceMatrix {
    pub fn zeros(n: usize, metric: Metric) -> Self {
        DistanceMatrix { n, metric, upper: vec![0.0; n * n.saturating_sub(1) / 2] }
    }

    /// Builds from the strict upper triangle (`n(n−1)/2` row-major values).
    pub fn from_upper(n: usize, metric: Metric, upper: Vec<f64>) -> Result<Self> {
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::contract("upper-triangle length does not match n"));
        }
        if upper.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::contract("distances must be finite and non-negative"));
        }
        Ok(DistanceMatrix { n, metric, upper })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "index out of range");
        match i.cmp(&j) {
            core::cmp::Ordering::Equal => 0.0,
            core::cmp::Ordering::Less => self.upper[row_offset(self.n, i) + (j - i - 1)],
            core::cmp::Ordering::Greater => self.upper[row_offset(self.n, j) + (i - j - 1)],
        }
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Disjoint mutable views of each row's entries right of the diagonal.
    pub fn row_segments_mut(&mut self) -> Vec<&mut [f64]> {
        let mut rest: &mut [f64] = &mut self.upper;
        let mut rows = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let (head, tail) = rest.split_at_mut(self.n - i - 1);
            rows.push(head);
            rest = tail;
        }
        rows
    }

    pub fn max(&self) -> f64 {
        self.upper.iter().copied().fold(0.0, f64::max)
    }

    /// Every entry multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Self {
        DistanceMatrix { n: self.n, metric: self.metric, upper: self.upper.iter().map(|v| v * factor).collect() }
    }

    /// Row-major `n × n` values.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                out[i * self.n + j] = self.get(i, j);
            }
        }
        out
    }
}

/// Distances from row `i` to every `j > i`, written into `out`.
pub fn fill_row(embeddings: &[Embedding], i: usize, metric: Metric, out: &mut [f64]) {
    let a = &embeddings[i];
    for (slot, b) in out.iter_mut().zip(&embeddings[i + 1..]) {
        *slot = a.distance(b, metric);
    }
}

/// Full pairwise matrix for one base metric.
pub fn distance_matrix(vectors: &[FeatureVector], metric: Metric) -> DistanceMatrix {
    let embeddings = embed_all(vectors);
    let mut m = DistanceMatrix::zeros(vectors.len(), metric);
    for (i, row) in m.row_segments_mut().into_iter().enumerate() {
        fill_row(&embeddings, i, metric, row);
    }
    m
}

/// Per-metric maxima used to rescale before averaging.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricMaxima {
    pub euclidean: f64,
    pub manhattan: f64,
    pub cosine: f64,
}

impl MetricMaxima {
    pub fn merge(self, other: MetricMaxima) -> MetricMaxima {
        MetricMaxima {
            euclidean: self.euclidean.max(other.euclidean),
            manhattan: self.manhattan.max(other.manhattan),
            cosine: self.cosine.max(other.cosine),
        }
    }

    /// Average of the three max-rescaled distances.
    pub fn combine(&self, euclidean: f64, manhattan: f64, cosine: f64) -> f64 {
        (rescale(euclidean, self.euclidean) + rescale(manhattan, self.manhattan) + rescale(cosine, self.cosine)) / 3.0
    }
}

fn rescale(value: f64, max: f64) -> f64 {
    if max > 0.0 {
        value / max
    } else {
        value
    }
}

/// Averages the three base matrices after dividing each by its own maximum.
pub fn combined_matrix(matrices: [&DistanceMatrix; 3]) -> Result<DistanceMatrix> {
    let find = |metric: Metric| -> Result<&DistanceMatrix> {
        let mut found = matrices.iter().filter(|m| m.metric == metric);
        match (found.next(), found.next()) {
            (Some(m), None) => Ok(m),
            _ => Err(Error::contract("combined_matrix needs exactly one euclidean, manhattan and cosine matrix")),
        }
    };
    let (e, m, c) = (find(Metric::Euclidean)?, find(Metric::Manhattan)?, find(Metric::Cosine)?);
    if e.n != m.n || e.n != c.n {
        return Err(Error::contract("combined_matrix inputs differ in size"));
    }
    let maxima = MetricMaxima { euclidean: e.max(), manhattan: m.max(), cosine: c.max() };
    let upper = (0..e.upper.len()).map(|k| maxima.combine(e.upper[k], m.upper[k], c.upper[k])).collect();
    Ok(DistanceMatrix { n: e.n, metric: Metric::Combined, upper })
}

/// Maxima of the three base metrics over pairs `(i, j)` with `i` in
/// `rows` and `j > i`.
pub fn metric_maxima(embeddings: &[Embedding], rows: Range<usize>) -> MetricMaxima {
    let mut acc = MetricMaxima::default();
    for i in rows {
        let a = &embeddings[i];
        for b in &embeddings[i + 1..] {
            acc.euclidean = acc.euclidean.max(a.euclidean(b));
            acc.manhattan = acc.manhattan.max(a.manhattan(b));
            acc.cosine = acc.cosine.max(a.cosine(b));
        }
    }
    acc
}

/// Combined-distance nearest neighbor of `i` computed on the fly; returns
/// the same index as matching on the materialized combined matrix.
pub fn combined_nearest(embeddings: &[Embedding], i: usize, maxima: &MetricMaxima) -> Option<usize> {
    let a = &embeddings[i];
    let mut best: Option<(usize, f64)> = None;
    for (j, b) in embeddings.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = maxima.combine(a.euclidean(b), a.manhattan(b), a.cosine(b));
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((j, d));
        }
    }
    best.map(|(j, _)| j)
}

/// Outcome of nearest-neighbor matching.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    /// Index of the nearest other fingerprint, per fingerprint.
    pub predictions: Vec<usize>,
    /// `None` for fingerprints excluded from scoring (unlabeled or the only
    /// fingerprint of their device).
    pub correct: Vec<Option<bool>>,
    pub eligible: usize,
    pub accuracy: f64,
}

/// Nearest neighbor of fingerprint `i` in a materialized matrix; ties go to
/// the lowest index.
pub fn nearest_in_row(matrix: &DistanceMatrix, i: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in 0..matrix.n {
        if j == i {
            continue;
        }
        let d = matrix.get(i, j);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((j, d));
        }
    }
    best.map(|(j, _)| j)
}

/// Scores predictions against device labels. Fingerprints of unlabeled or
/// singleton devices are left out of the denominator.
pub fn score_predictions(predictions: Vec<usize>, labels: &[Option<DeviceId>]) -> Result<MatchResult> {
    let mut counts: alloc::collections::BTreeMap<&DeviceId, usize> = alloc::collections::BTreeMap::new();
    for d in labels.iter().flatten() {
        *counts.entry(d).or_insert(0) += 1;
    }
    let correct: Vec<Option<bool>> = predictions
        .iter()
        .enumerate()
        .map(|(i, &p)| match &labels[i] {
            Some(d) if counts[d] >= 2 => Some(labels[p].as_ref() == Some(d)),
            _ => None,
        })
        .collect();
    let eligible = correct.iter().filter(|c| c.is_some()).count();
    if eligible == 0 {
        return Err(Error::evaluation("no device has two or more labeled fingerprints"));
    }
    let hits = correct.iter().filter(|c| **c == Some(true)).count();
    Ok(MatchResult { predictions, correct, eligible, accuracy: hits as f64 / eligible as f64 })
}

/// Matches every fingerprint to its nearest other fingerprint.
pub fn nearest_neighbor_match(matrix: &DistanceMatrix, labels: &[Option<DeviceId>]) -> Result<MatchResult> {
    if matrix.n < 2 {
        return Err(Error::contract("matching needs at least two fingerprints"));
    }
    if labels.len() != matrix.n {
        return Err(Error::contract("label count differs from matrix size"));
    }
    let predictions = (0..matrix.n).map(|i| nearest_in_row(matrix, i).expect("n >= 2")).collect();
    score_predictions(predictions, labels)
}
