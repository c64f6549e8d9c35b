//! Compression-based estimates of information content.
//!
//! `C(x)` is the size in bits of the raw DEFLATE stream of `x` produced by
//! zlib at level 9. It is an upper-bound proxy for Kolmogorov
//! complexity; everything else in this module is built on it.

use std::cmp::Ordering;
use std::io::Write;

use flate2::write::DeflateEncoder;
use flate2::Compression;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{DistanceMatrix, MetricTag};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplexityError {
    #[error("input is empty")]
    EmptyInput,
    #[error("uncompressed length is zero")]
    ZeroLength,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("input series has zero variance")]
    ConstantInput,
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Compressed length in bits.
pub fn compress_len(bytes: &[u8]) -> Result<u64, ComplexityError> {
    if bytes.is_empty() {
        return Err(ComplexityError::EmptyInput);
    }
    Ok(deflate(bytes).len() as u64 * 8)
}

fn deflate(bytes: &[u8]) -> Vec<u8> {
    let mut enc = DeflateEncoder::new(Vec::with_capacity(bytes.len() / 4 + 64), Compression::best());
    enc.write_all(bytes).expect("in-memory write");
    enc.finish().expect("in-memory write")
}

/// Compressed bytes over raw bytes.
pub fn compression_ratio(compressed_bits: u64, raw_len: usize) -> Result<f64, ComplexityError> {
    if raw_len == 0 {
        return Err(ComplexityError::ZeroLength);
    }
    Ok(compressed_bits as f64 / 8.0 / raw_len as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionRecord {
    pub run_id: String,
    pub raw_len: usize,
    pub compressed_bits: u64,
    pub ratio: f64,
}

impl CompressionRecord {
    pub fn measure(run_id: impl Into<String>, bytes: &[u8]) -> Result<Self, ComplexityError> {
        let compressed_bits = compress_len(bytes)?;
        Ok(CompressionRecord {
            run_id: run_id.into(),
            raw_len: bytes.len(),
            compressed_bits,
            ratio: compression_ratio(compressed_bits, bytes.len())?,
        })
    }
}

/// Normalized compression distance over byte concatenation.
pub fn ncd(a: &[u8], b: &[u8]) -> Result<f64, ComplexityError> {
    let (ca, cb) = (compress_len(a)?, compress_len(b)?);
    Ok(ncd_with(a, b, ca, cb))
}

fn ncd_with(a: &[u8], b: &[u8], ca: u64, cb: u64) -> f64 {
    let mut ab = Vec::with_capacity(a.len() + b.len());
    ab.extend_from_slice(a);
    ab.extend_from_slice(b);
    let cab = deflate(&ab).len() as u64 * 8;
    (cab as f64 - ca.min(cb) as f64) / ca.max(cb) as f64
}

/// Pairwise NCD matrix. Off-diagonal entries average both concatenation
/// orders; the diagonal keeps the measured `ncd(x, x)`.
pub fn ncd_matrix(items: &[Vec<u8>]) -> Result<DistanceMatrix, ComplexityError> {
    if items.iter().any(Vec::is_empty) {
        return Err(ComplexityError::EmptyInput);
    }
    let n = items.len();
    let sizes: Vec<u64> = items.par_iter().map(|x| deflate(x).len() as u64 * 8).collect();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let d = ncd_with(&items[i], &items[j], sizes[i], sizes[j]);
            if i == j {
                d
            } else {
                0.5 * (d + ncd_with(&items[j], &items[i], sizes[j], sizes[i]))
            }
        })
        .collect();
    let mut m = vec![0.0; n * n];
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        m[i * n + j] = v;
        m[j * n + i] = v;
    }
    Ok(DistanceMatrix::from_dense(n, m, MetricTag::Ncd).expect("constructed symmetric"))
}

/// A point of the swept binding-energy space, all in eV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    #[serde(rename = "E_s")]
    pub substrate: f64,
    #[serde(rename = "E_11")]
    pub e11: f64,
    #[serde(rename = "E_22")]
    pub e22: f64,
    #[serde(rename = "E_12")]
    pub e12: f64,
}

impl ParamPoint {
    pub const ORIGIN: ParamPoint = ParamPoint {
        substrate: 0.0,
        e11: 0.0,
        e22: 0.0,
        e12: 0.0,
    };

    pub fn new(substrate: f64, e11: f64, e22: f64, e12: f64) -> Self {
        ParamPoint {
            substrate,
            e11,
            e22,
            e12,
        }
    }

    /// Euclidean distance to the all-zero origin.
    pub fn distance(&self) -> f64 {
        (self.substrate.powi(2) + self.e11.powi(2) + self.e22.powi(2) + self.e12.powi(2)).sqrt()
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Substrate => self.substrate,
            Param::E11 => self.e11,
            Param::E22 => self.e22,
            Param::E12 => self.e12,
        }
    }
}

pub fn param_distance(p: &ParamPoint) -> f64 {
    p.distance()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    #[serde(rename = "E_s")]
    Substrate,
    #[serde(rename = "E_11")]
    E11,
    #[serde(rename = "E_22")]
    E22,
    #[serde(rename = "E_12")]
    E12,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::Substrate, Param::E11, Param::E22, Param::E12];

    pub fn name(self) -> &'static str {
        match self {
            Param::Substrate => "E_s",
            Param::E11 => "E_11",
            Param::E22 => "E_22",
            Param::E12 => "E_12",
        }
    }

    pub fn parse(s: &str) -> Option<Param> {
        match s.to_ascii_lowercase().as_str() {
            "e_s" | "es" | "substrate" => Some(Param::Substrate),
            "e_11" | "e11" => Some(Param::E11),
            "e_22" | "e22" => Some(Param::E22),
            "e_12" | "e12" => Some(Param::E12),
            _ => None,
        }
    }
}

/// Anything that carries a compression ratio and a run id.
pub trait Ranked {
    fn ratio(&self) -> f64;
    fn run_id(&self) -> &str;
}

impl Ranked for CompressionRecord {
    fn ratio(&self) -> f64 {
        self.ratio
    }
    fn run_id(&self) -> &str {
        &self.run_id
    }
}

/// Ascending by ratio; equal ratios fall back to run id.
pub fn sort_by_ratio<T: Ranked + Clone>(records: &[T]) -> Vec<T> {
    let mut out = records.to_vec();
    out.sort_by(|a, b| {
        a.ratio()
            .partial_cmp(&b.ratio())
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.run_id().cmp(b.run_id()))
    });
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Half-open index range into the sorted series.
    pub start: usize,
    pub end: usize,
    pub first: f64,
    pub last: f64,
    /// Mean first difference inside the segment (0 for a single point).
    pub mean_step: f64,
}

impl Segment {
    fn of(xs: &[f64], start: usize, end: usize) -> Self {
        let steps = end - start - 1;
        Segment {
            start,
            end,
            first: xs[start],
            last: xs[end - 1],
            mean_step: if steps == 0 { 0.0 } else { (xs[end - 1] - xs[start]) / steps as f64 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TransitionReport {
    NoTransition,
    Boundary {
        /// First index of the upper segment.
        index: usize,
        /// Detector-specific strength, in `[0, 1]` for [`MaxJump`].
        score: f64,
        segments: [Segment; 2],
    },
}

impl TransitionReport {
    pub fn boundary(&self) -> Option<usize> {
        match self {
            TransitionReport::Boundary { index, .. } => Some(*index),
            TransitionReport::NoTransition => None,
        }
    }
}

/// Change-point rule over a sorted series.
pub trait ChangePointDetector {
    /// `(boundary index, score)` or `None` when the series shows no change.
    fn locate(&self, xs: &[f64]) -> Option<(usize, f64)>;
}

/// Largest first difference after scaling the series to unit range.
/// Perfectly even spacing counts as no transition.
#[derive(Clone, Copy, Debug, Default)]
pub struct MaxJump;

impl ChangePointDetector for MaxJump {
    fn locate(&self, xs: &[f64]) -> Option<(usize, f64)> {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        if !(range > 0.0) {
            return None;
        }
        let diffs: Vec<f64> = xs.windows(2).map(|w| (w[1] - w[0]) / range).collect();
        let (mut best, mut at) = (f64::NEG_INFINITY, 0);
        for (i, &d) in diffs.iter().enumerate() {
            if d > best {
                best = d;
                at = i;
            }
        }
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        if (best - mean).abs() <= 1e-12 {
            return None;
        }
        Some((at + 1, best))
    }
}

/// Split minimising the summed squared residuals of two least-squares lines.
/// Score is the absolute slope change.
#[derive(Clone, Copy, Debug, Default)]
pub struct TwoSegmentFit;

fn line_fit(xs: &[f64], offset: usize) -> (f64, f64) {
    let n = xs.len() as f64;
    let ts: Vec<f64> = (0..xs.len()).map(|i| (i + offset) as f64).collect();
    let mt = ts.iter().sum::<f64>() / n;
    let my = xs.iter().sum::<f64>() / n;
    let sxx: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(xs).map(|(t, y)| (t - mt) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let sse = ts
        .iter()
        .zip(xs)
        .map(|(t, y)| (y - (my + slope * (t - mt))).powi(2))
        .sum();
    (slope, sse)
}

impl ChangePointDetector for TwoSegmentFit {
    fn locate(&self, xs: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for b in 2..=xs.len() - 2 {
            let (s1, e1) = line_fit(&xs[..b], 0);
            let (s2, e2) = line_fit(&xs[b..], b);
            let sse = e1 + e2;
            if best.is_none_or(|(_, s, _)| sse < s) {
                best = Some((b, sse, (s2 - s1).abs()));
            }
        }
        let (_, total) = line_fit(xs, 0);
        match best {
            Some((b, sse, change)) if sse < total && change > 0.0 => Some((b, change)),
            _ => None,
        }
    }
}

pub fn detect_transition(sorted: &[f64]) -> Result<TransitionReport, ComplexityError> {
    detect_transition_with(sorted, &MaxJump)
}

pub fn detect_transition_with(sorted: &[f64], detector: &dyn ChangePointDetector) -> Result<TransitionReport, ComplexityError> {
    if sorted.len() < 4 {
        return Err(ComplexityError::TooFewPoints {
            needed: 4,
            got: sorted.len(),
        });
    }
    Ok(match detector.locate(sorted) {
        None => TransitionReport::NoTransition,
        Some((index, score)) => TransitionReport::Boundary {
            index,
            score,
            segments: [Segment::of(sorted, 0, index), Segment::of(sorted, index, sorted.len())],
        },
    })
}

/// Ranks starting at 1, ties share their mean rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, ComplexityError> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(ComplexityError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, ComplexityError> {
    if xs.len() != ys.len() {
        return Err(ComplexityError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(ComplexityError::TooFewPoints { needed: 3, got: xs.len() });
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Spearman correlation between distance to the origin and compressed length.
pub fn param_output_correlation(records: &[(ParamPoint, u64)]) -> Result<f64, ComplexityError> {
    let d: Vec<f64> = records.iter().map(|(p, _)| p.distance()).collect();
    let c: Vec<f64> = records.iter().map(|&(_, c)| c as f64).collect();
    spearman(&d, &c)
}
