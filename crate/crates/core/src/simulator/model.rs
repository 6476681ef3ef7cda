//! Joint laws for the per-frame miss indicators.
//!
//! A frame "misses" when its distance estimate stays above the brake
//! threshold. Every model reproduces the requested per-frame marginals
//! exactly and differs only in how misses co-occur, which is the one thing
//! the vehicle-level bounds are sensitive to.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};

pub type SimRng = rand_chacha::ChaCha8Rng;

pub trait DependenceModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Fills `out` with one miss indicator per entry of `q`.
    fn sample_misses(&self, q: &[f64], rng: &mut SimRng, out: &mut Vec<bool>);

    /// Exact `P(all frames miss)` for these marginals, when available.
    fn all_miss_probability(&self, q: &[f64]) -> Option<f64>;

    /// Whether indicators are mutually independent.
    fn independent(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Independent;

impl DependenceModel for Independent {
    fn name(&self) -> &'static str {
        "independent"
    }

    fn sample_misses(&self, q: &[f64], rng: &mut SimRng, out: &mut Vec<bool>) {
        out.clear();
        out.extend(q.iter().map(|&qj| rng.random::<f64>() < qj));
    }

    fn all_miss_probability(&self, q: &[f64]) -> Option<f64> {
        Some(q.iter().product())
    }

    fn independent(&self) -> bool {
        true
    }
}

/// All-or-nothing: one shared uniform, so whenever the least likely frame
/// misses, every frame misses.
#[derive(Debug, Clone, Copy, Default)]
pub struct Comonotone;

impl DependenceModel for Comonotone {
    fn name(&self) -> &'static str {
        "comonotone"
    }

    fn sample_misses(&self, q: &[f64], rng: &mut SimRng, out: &mut Vec<bool>) {
        let u: f64 = rng.random();
        out.clear();
        out.extend(q.iter().map(|&qj| u < qj));
    }

    fn all_miss_probability(&self, q: &[f64]) -> Option<f64> {
        Some(q.iter().copied().fold(1.0, f64::min))
    }
}

/// Gaussian copula with AR(1) correlation `rho^|i-j|` between frames.
#[derive(Debug, Clone, Copy)]
pub struct Ar1 {
    rho: f64,
}

impl Ar1 {
    pub fn new(rho: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(invalid("rho", format!("{rho} is outside [-1, 1]")));
        }
        Ok(Self { rho })
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

impl DependenceModel for Ar1 {
    fn name(&self) -> &'static str {
        "ar1"
    }

    fn sample_misses(&self, q: &[f64], rng: &mut SimRng, out: &mut Vec<bool>) {
        let innovation = (1.0 - self.rho * self.rho).max(0.0).sqrt();
        let mut x: f64 = rng.sample(StandardNormal);
        out.clear();
        for (i, &qj) in q.iter().enumerate() {
            if i > 0 {
                let e: f64 = rng.sample(StandardNormal);
                x = self.rho * x + innovation * e;
            }
            out.push(std_normal_cdf(x) < qj);
        }
    }

    fn all_miss_probability(&self, q: &[f64]) -> Option<f64> {
        if self.rho == 0.0 {
            Independent.all_miss_probability(q)
        } else if self.rho == 1.0 {
            Comonotone.all_miss_probability(q)
        } else {
            None
        }
    }

    fn independent(&self) -> bool {
        self.rho == 0.0
    }
}

/// Detections packed so they overlap as little as possible: the detection
/// sets are consecutive arcs of lengths `1 - q_j` on a unit circle. When the
/// arcs fit (`sum(1 - q_j) <= 1`) at most one frame detects per approach;
/// otherwise they wrap and every approach gets a detection.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactlyOneOrNone;

impl ExactlyOneOrNone {
    pub fn feasible(q: &[f64]) -> bool {
        q.iter().map(|qj| 1.0 - qj).sum::<f64>() <= 1.0
    }
}

impl DependenceModel for ExactlyOneOrNone {
    fn name(&self) -> &'static str {
        "exactly_one_or_none"
    }

    fn sample_misses(&self, q: &[f64], rng: &mut SimRng, out: &mut Vec<bool>) {
        let u: f64 = rng.random();
        out.clear();
        let mut start = 0.0f64;
        for &qj in q {
            let len = 1.0 - qj;
            let end = start + len;
            let hit = if end <= 1.0 {
                u >= start && u < end
            } else {
                u >= start || u < end - 1.0
            };
            out.push(!hit);
            start = if end >= 1.0 { end - 1.0 } else { end };
        }
    }

    fn all_miss_probability(&self, q: &[f64]) -> Option<f64> {
        Some((1.0 - q.iter().map(|qj| 1.0 - qj).sum::<f64>()).max(0.0))
    }
}

/// How per-interval marginals shrink towards the obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum ScaleLaw {
    /// `q_j = base * ratio^(j-1)`.
    Geometric { ratio: f64 },
    /// `q_j = base * (1 - slope (j-1)/N)`.
    Linear { slope: f64 },
}

/// Parameters from which a registered model is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// One value (constant), N values (intervals 1..N) or N+1 values
    /// (lead-in interval first).
    pub q: Vec<f64>,
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub scale: Option<ScaleLaw>,
    /// Miss probability for updates after the buffer (only shapes hit speed);
    /// defaults to the innermost interval's value.
    #[serde(default)]
    pub late_q: Option<f64>,
}

impl ModelParams {
    pub fn constant(q: f64) -> Self {
        Self {
            q: vec![q],
            rho: 0.0,
            scale: None,
            late_q: None,
        }
    }
}

/// Marginal miss probabilities for ladder intervals `0..=N` plus a dependence law.
#[derive(Debug, Clone)]
pub struct ErrorModel {
    pub name: String,
    /// `by_interval[0]` is the lead-in slice, `by_interval[j]` interval `j`.
    pub by_interval: Vec<f64>,
    pub late_q: f64,
    pub dependence: Arc<dyn DependenceModel>,
}

impl ErrorModel {
    pub fn new(
        name: impl Into<String>,
        by_interval: Vec<f64>,
        late_q: f64,
        dependence: Arc<dyn DependenceModel>,
    ) -> Result<Self> {
        if by_interval.len() < 2 {
            return Err(invalid("q", "need the lead-in and at least one interval"));
        }
        for &q in by_interval.iter().chain(std::iter::once(&late_q)) {
            if !(0.0..=1.0).contains(&q) {
                return Err(invalid("q", format!("{q} is not a probability")));
            }
        }
        Ok(Self {
            name: name.into(),
            by_interval,
            late_q,
            dependence,
        })
    }

    pub fn updates_in_buffer(&self) -> usize {
        self.by_interval.len() - 1
    }

    /// Marginals of the guaranteed intervals `1..=N`.
    pub fn guaranteed(&self) -> &[f64] {
        &self.by_interval[1..]
    }
}

fn expand_marginals(params: &ModelParams, n: usize) -> Result<Vec<f64>> {
    match params.q.len() {
        1 => Ok(vec![params.q[0]; n + 1]),
        len if len == n => {
            let mut v = Vec::with_capacity(n + 1);
            v.push(params.q[0]);
            v.extend_from_slice(&params.q);
            Ok(v)
        }
        len if len == n + 1 => Ok(params.q.clone()),
        len => Err(invalid(
            "q",
            format!("got {len} marginals; expected 1, {n} or {}", n + 1),
        )),
    }
}

fn scaled_marginals(params: &ModelParams, n: usize) -> Result<Vec<f64>> {
    let [base] = params.q[..] else {
        return Err(invalid("q", "distance_scaled takes a single base marginal"));
    };
    let law = params.scale.unwrap_or(ScaleLaw::Geometric { ratio: 0.9 });
    let factor = |j: usize| -> Result<f64> {
        let step = (j - 1) as f64;
        match law {
            ScaleLaw::Geometric { ratio } if (0.0..=1.0).contains(&ratio) && ratio > 0.0 => {
                Ok(ratio.powf(step))
            }
            ScaleLaw::Linear { slope } if (0.0..=1.0).contains(&slope) => {
                Ok(1.0 - slope * step / n as f64)
            }
            _ => Err(invalid("scale", "ratio must be in (0, 1], slope in [0, 1]")),
        }
    };
    let mut v = Vec::with_capacity(n + 1);
    v.push(base);
    for j in 1..=n {
        v.push(base * factor(j)?);
    }
    Ok(v)
}

type Builder = fn(&ModelParams, usize) -> Result<ErrorModel>;

fn late(params: &ModelParams, by_interval: &[f64]) -> f64 {
    params
        .late_q
        .unwrap_or(*by_interval.last().expect("nonempty"))
}

fn build_independent(p: &ModelParams, n: usize) -> Result<ErrorModel> {
    let q = expand_marginals(p, n)?;
    ErrorModel::new("independent", q.clone(), late(p, &q), Arc::new(Independent))
}

fn build_comonotone(p: &ModelParams, n: usize) -> Result<ErrorModel> {
    let q = expand_marginals(p, n)?;
    ErrorModel::new("comonotone", q.clone(), late(p, &q), Arc::new(Comonotone))
}

fn build_ar1(p: &ModelParams, n: usize) -> Result<ErrorModel> {
    let q = expand_marginals(p, n)?;
    ErrorModel::new("ar1", q.clone(), late(p, &q), Arc::new(Ar1::new(p.rho)?))
}

fn build_distance_scaled(p: &ModelParams, n: usize) -> Result<ErrorModel> {
    let q = scaled_marginals(p, n)?;
    ErrorModel::new(
        "distance_scaled",
        q.clone(),
        late(p, &q),
        Arc::new(Independent),
    )
}

fn build_exactly_one(p: &ModelParams, n: usize) -> Result<ErrorModel> {
    let q = expand_marginals(p, n)?;
    ErrorModel::new(
        "exactly_one_or_none",
        q.clone(),
        late(p, &q),
        Arc::new(ExactlyOneOrNone),
    )
}

/// Error models by name.
#[derive(Clone)]
pub struct ModelRegistry {
    builders: BTreeMap<&'static str, Builder>,
}

impl fmt::Debug for ModelRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.builders.keys()).finish()
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut r = Self {
            builders: BTreeMap::new(),
        };
        r.register("independent", build_independent);
        r.register("comonotone", build_comonotone);
        r.register("ar1", build_ar1);
        r.register("distance_scaled", build_distance_scaled);
        r.register("exactly_one_or_none", build_exactly_one);
        r
    }
}

impl ModelRegistry {
    pub fn register(&mut self, name: &'static str, builder: Builder) {
        self.builders.insert(name, builder);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.builders.keys().copied().collect()
    }

    /// Builds `name` for a ladder with `updates_in_buffer` guaranteed updates.
    pub fn build(
        &self,
        name: &str,
        params: &ModelParams,
        updates_in_buffer: usize,
    ) -> Result<ErrorModel> {
        let builder = self
            .builders
            .get(name)
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "error model",
                name: name.to_string(),
                known: self.names().join(", "),
            })?;
        builder(params, updates_in_buffer)
    }
}
