//! Turning raw perception logs and road-segment counts into evidence.

use std::io::Read;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::intervals::{BinomialEvidence, PoissonEvidence};
use crate::odd::DetectionLadder;

pub const FRAME_HEADER: [&str; 2] = ["true_distance_m", "estimated_distance_m"];
pub const SEGMENT_HEADER: [&str; 2] = ["length_km", "obstacle_count"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub true_distance: f64,
    pub estimated_distance: f64,
}

impl FrameRecord {
    /// Estimation error; positive means the obstacle looked farther away.
    pub fn error(&self) -> f64 {
        self.estimated_distance - self.true_distance
    }
}

/// Frames bucketed by ladder interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedFrames {
    brake_threshold: f64,
    /// `intervals[j]` holds frames with true distance in `[l_{j+1}, l_j)`, `j = 0..=N`.
    intervals: Vec<Vec<FrameRecord>>,
    out_of_ladder: Vec<FrameRecord>,
}

impl GroupedFrames {
    pub fn group(records: impl IntoIterator<Item = FrameRecord>, ladder: &DetectionLadder) -> Self {
        let mut intervals = vec![Vec::new(); ladder.updates_in_buffer() + 1];
        let mut out_of_ladder = Vec::new();
        for r in records {
            match ladder.interval_of(r.true_distance) {
                Some(j) => intervals[j].push(r),
                None => out_of_ladder.push(r),
            }
        }
        Self {
            brake_threshold: ladder.brake_threshold(),
            intervals,
            out_of_ladder,
        }
    }

    pub fn updates_in_buffer(&self) -> usize {
        self.intervals.len() - 1
    }

    /// Frames of interval `j` (`0..=N`).
    pub fn interval(&self, j: usize) -> &[FrameRecord] {
        &self.intervals[j]
    }

    pub fn out_of_ladder(&self) -> &[FrameRecord] {
        &self.out_of_ladder
    }

    pub fn total(&self) -> usize {
        self.intervals.iter().map(Vec::len).sum::<usize>() + self.out_of_ladder.len()
    }

    /// Frame counts for the guaranteed intervals `1..=N`. Carries no estimates,
    /// so a design built from it cannot depend on them.
    pub fn counts(&self) -> IntervalCounts {
        IntervalCounts(self.intervals[1..].iter().map(Vec::len).collect())
    }

    /// Per-interval `(frames, misses)` for `j = 1..=N`, where a miss is an
    /// estimate above the brake threshold.
    pub fn histogram(&self) -> Vec<(usize, usize)> {
        self.intervals[1..]
            .iter()
            .map(|v| {
                let misses = v
                    .iter()
                    .filter(|r| r.estimated_distance > self.brake_threshold)
                    .count();
                (v.len(), misses)
            })
            .collect()
    }

    /// All frames of interval `j` treated as Bernoulli trials of a miss.
    pub fn interval_evidence(&self, j: usize) -> Result<BinomialEvidence> {
        let (frames, misses) = self
            .histogram()
            .get(j.wrapping_sub(1))
            .copied()
            .ok_or_else(|| invalid("interval", format!("{j} is outside 1..=N")))?;
        BinomialEvidence::new(misses as u64, frames as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalCounts(pub Vec<usize>);

/// Probabilities of drawing from each guaranteed interval `1..=N`.
///
/// Built only from interval indices and counts: estimate-dependent sampling
/// cannot be expressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingDesign {
    weights: Vec<f64>,
}

impl SamplingDesign {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("weights", "design needs at least one interval"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(invalid("weights", "weights must be nonnegative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(invalid("weights", format!("weights sum to {sum}, not 1")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n]).or_else(|_| {
            // 1/n may not sum to 1 within tolerance for awkward n; renormalise the last entry
            let mut w = vec![1.0 / n as f64; n];
            let head: f64 = w[..n - 1].iter().sum();
            w[n - 1] = 1.0 - head;
            Self::new(w)
        })
    }

    /// All mass on the innermost interval N.
    pub fn innermost(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("weights", "design needs at least one interval"));
        }
        let mut w = vec![0.0; n];
        w[n - 1] = 1.0;
        Self::new(w)
    }

    /// Weights proportional to how many frames each interval holds.
    pub fn proportional(counts: &IntervalCounts) -> Result<Self> {
        let total: usize = counts.0.iter().sum();
        if total == 0 {
            return Err(invalid("weights", "no frames to be proportional to"));
        }
        Self::new(counts.0.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Estimates `P(estimate > c)` for a frame drawn at a random ladder interval
/// `J ~ design`, which upper-bounds the smallest per-interval miss probability.
///
/// Draws `draws` frames with replacement: an interval from the design, then a
/// uniform frame within it.
pub fn miss_probability_evidence(
    frames: &GroupedFrames,
    design: &SamplingDesign,
    draws: u64,
    seed: u64,
) -> Result<BinomialEvidence> {
    if design.weights.len() != frames.updates_in_buffer() {
        return Err(invalid(
            "weights",
            format!(
                "design covers {} intervals but the ladder has {}",
                design.weights.len(),
                frames.updates_in_buffer()
            ),
        ));
    }
    for (i, &w) in design.weights.iter().enumerate() {
        if w > 0.0 && frames.intervals[i + 1].is_empty() {
            return Err(Error::InvalidEvidence(format!(
                "design samples interval {} but it holds no frames",
                i + 1
            )));
        }
    }
    if draws == 0 {
        return Err(invalid("draws", "must be positive"));
    }
    let pick =
        WeightedIndex::new(&design.weights).map_err(|e| invalid("weights", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = frames.brake_threshold;
    let mut failures = 0;
    for _ in 0..draws {
        let bucket = &frames.intervals[pick.sample(&mut rng) + 1];
        let frame = &bucket[rng.random_range(0..bucket.len())];
        if frame.estimated_distance > c {
            failures += 1;
        }
    }
    BinomialEvidence::new(failures, draws)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentObservation {
    pub length_km: f64,
    pub obstacle_count: u64,
}

/// Pools segments: counts over total length. This is the maximum-likelihood
/// fit of an intercept-only Poisson model with log-length offsets.
pub fn obstacle_rate_evidence(segments: &[SegmentObservation]) -> Result<PoissonEvidence> {
    if segments.is_empty() {
        return Err(Error::InvalidEvidence("no road segments".into()));
    }
    let mut count = 0u64;
    let mut km = 0.0;
    for s in segments {
        if !(s.length_km > 0.0 && s.length_km.is_finite()) {
            return Err(invalid(
                "length_km",
                format!("{} is not positive", s.length_km),
            ));
        }
        count += s.obstacle_count;
        km += s.length_km;
    }
    PoissonEvidence::new(count, km)
}

fn read_csv<T: for<'de> Deserialize<'de>>(
    source: impl Read,
    name: &str,
    header: [&str; 2],
) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let found = rdr.headers().map_err(|e| Error::MalformedRecord {
        path: name.to_string(),
        row: 1,
        reason: e.to_string(),
    })?;
    if found.is_empty() {
        return Err(Error::NoRecords(name.to_string()));
    }
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::MalformedRecord {
            path: name.to_string(),
            row: 1,
            reason: format!("expected header `{}`", header.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize::<T>() {
        let row = match &rec {
            Err(e) => e.position().map_or(0, |p| p.line()),
            Ok(_) => 0,
        };
        out.push(rec.map_err(|e| Error::MalformedRecord {
            path: name.to_string(),
            row,
            reason: e.to_string(),
        })?);
    }
    if out.is_empty() {
        return Err(Error::NoRecords(name.to_string()));
    }
    Ok(out)
}

#[derive(Deserialize)]
struct FrameRow {
    true_distance_m: f64,
    estimated_distance_m: f64,
}

/// Parses a frame log (`true_distance_m,estimated_distance_m`). Rows are
/// numbered from 1 at the header.
pub fn read_frame_log(source: impl Read, name: &str) -> Result<Vec<FrameRecord>> {
    let rows: Vec<FrameRow> = read_csv(source, name, FRAME_HEADER)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let ok = r.true_distance_m.is_finite()
                && r.true_distance_m > 0.0
                && r.estimated_distance_m.is_finite()
                && r.estimated_distance_m >= 0.0;
            if ok {
                Ok(FrameRecord {
                    true_distance: r.true_distance_m,
                    estimated_distance: r.estimated_distance_m,
                })
            } else {
                Err(Error::MalformedRecord {
                    path: name.to_string(),
                    row: i as u64 + 2,
                    reason: "distances must be finite, true distance positive".into(),
                })
            }
        })
        .collect()
}

#[derive(Deserialize)]
struct SegmentRow {
    length_km: f64,
    obstacle_count: u64,
}

/// Parses segment data (`length_km,obstacle_count`).
pub fn read_segments(source: impl Read, name: &str) -> Result<Vec<SegmentObservation>> {
    let rows: Vec<SegmentRow> = read_csv(source, name, SEGMENT_HEADER)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            if r.length_km > 0.0 && r.length_km.is_finite() {
                Ok(SegmentObservation {
                    length_km: r.length_km,
                    obstacle_count: r.obstacle_count,
                })
            } else {
                Err(Error::MalformedRecord {
                    path: name.to_string(),
                    row: i as u64 + 2,
                    reason: "segment length must be positive".into(),
                })
            }
        })
        .collect()
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Reads and groups a frame log file.
pub fn ingest_frame_log(path: &Path, ladder: &DetectionLadder) -> Result<GroupedFrames> {
    let records = read_frame_log(open(path)?, &path.display().to_string())?;
    Ok(GroupedFrames::group(records, ladder))
}

pub fn ingest_segments(path: &Path) -> Result<Vec<SegmentObservation>> {
    read_segments(open(path)?, &path.display().to_string())
}
