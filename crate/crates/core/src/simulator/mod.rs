//! Monte Carlo replay of the braking scenario.
//!
//! Each session drives `K` km past a Poisson number of stationary obstacles.
//! Every obstacle is approached at speed `v` from a headway of at least `c`;
//! perception updates arrive every `v/f` metres and braking starts at the first
//! update whose estimate drops below `c`. Only the joint law of per-update
//! miss indicators matters, so errors are drawn as indicators directly.

mod model;

pub use model::{
    Ar1, Comonotone, DependenceModel, ErrorModel, ExactlyOneOrNone, Independent, ModelParams,
    ModelRegistry, ScaleLaw, SimRng,
};

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::RiskBound;
use crate::error::{invalid, Error, Result};
use crate::intervals::Direction;
use crate::odd::{build_ladder, hit_velocity, BrakeStart, DetectionLadder, OddSpec};

pub const DEFAULT_MAX_APPROACHES: u64 = 100_000_000;
const MAX_RESTARTS: u32 = 1_000_000;

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub spec: OddSpec,
    pub model: ErrorModel,
    pub sessions: u64,
    pub seed: u64,
    /// Random phase of the update grid, which sometimes adds an update in
    /// the lead-in slice `[l_1, l_0)`. Off: exactly one update per interval.
    pub include_phase_offset: bool,
    /// Probability that the update just before the buffer fires anyway.
    pub false_trigger_prob: f64,
    pub max_approaches: u64,
}

impl SimulationConfig {
    pub fn new(spec: OddSpec, model: ErrorModel, sessions: u64, seed: u64) -> Self {
        Self {
            spec,
            model,
            sessions,
            seed,
            include_phase_offset: false,
            false_trigger_prob: 0.0,
            max_approaches: DEFAULT_MAX_APPROACHES,
        }
    }

    fn intensity(&self) -> Result<f64> {
        self.spec.obstacle_intensity_prior.ok_or_else(|| {
            invalid(
                "obstacle_intensity_prior",
                "the simulator needs an obstacle intensity",
            )
        })
    }

    pub fn validate(&self) -> Result<DetectionLadder> {
        self.spec.validate()?;
        let lambda = self.intensity()?;
        if self.sessions == 0 {
            return Err(invalid("sessions", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.false_trigger_prob) {
            return Err(invalid("false_trigger_prob", "must lie in [0, 1)"));
        }
        let ladder = build_ladder(&self.spec)?;
        if self.model.updates_in_buffer() != ladder.updates_in_buffer() {
            return Err(invalid(
                "q",
                format!(
                    "error model has {} intervals but the ladder has {}",
                    self.model.updates_in_buffer(),
                    ladder.updates_in_buffer()
                ),
            ));
        }
        let expected = lambda * self.spec.route_length_km * self.sessions as f64;
        if expected > self.max_approaches as f64 {
            return Err(Error::ResourceCap(format!(
                "about {expected:.0} approaches expected, cap is {}",
                self.max_approaches
            )));
        }
        Ok(ladder)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproachOutcome {
    pub brake_start: BrakeStart,
    pub hit_velocity: f64,
    pub false_triggers: u32,
    /// Updates that fell inside `[b, c)`.
    pub buffer_updates: usize,
}

/// Reusable buffers for [`simulate_approach`].
#[derive(Debug, Default)]
pub struct ApproachScratch {
    distances: Vec<f64>,
    marginals: Vec<f64>,
    misses: Vec<bool>,
}

/// Plays out one approach to a single obstacle.
pub fn simulate_approach(
    config: &SimulationConfig,
    ladder: &DetectionLadder,
    rng: &mut SimRng,
    scratch: &mut ApproachScratch,
) -> Result<ApproachOutcome> {
    let spec = &config.spec;
    let model = &config.model;
    let c = ladder.brake_threshold();
    let b = ladder.braking_distance();
    let step = ladder.step();
    let n = ladder.updates_in_buffer();
    let lead_in = ladder.buffer() - n as f64 * step;

    let mut false_triggers = 0u32;
    while config.false_trigger_prob > 0.0 && rng.random::<f64>() < config.false_trigger_prob {
        // fired before the buffer: stop, restart, approach again from headway c
        false_triggers += 1;
        if false_triggers >= MAX_RESTARTS {
            return Err(Error::ResourceCap("approach restarted too often".into()));
        }
    }

    let phase = if config.include_phase_offset {
        rng.random::<f64>() * step
    } else {
        (lead_in + 0.5 * step).max(0.0)
    };

    let ApproachScratch {
        distances,
        marginals,
        misses,
    } = scratch;
    distances.clear();
    marginals.clear();
    let mut d = c - phase;
    debug_assert!(d <= c, "approach must begin at headway c");
    while d >= b {
        if let Some(j) = ladder.interval_of(d) {
            distances.push(d);
            marginals.push(model.by_interval[j]);
        }
        d -= step;
    }
    model.dependence.sample_misses(marginals, rng, misses);

    let brake_start = match misses.iter().position(|&m| !m) {
        Some(i) => BrakeStart::At(distances[i]),
        None => {
            // too late to stop; a later detection still sheds speed
            let mut late = BrakeStart::Never;
            while d >= 0.0 {
                if rng.random::<f64>() >= model.late_q {
                    late = BrakeStart::At(d);
                    break;
                }
                d -= step;
            }
            late
        }
    };
    Ok(ApproachOutcome {
        brake_start,
        hit_velocity: hit_velocity(brake_start, spec)?,
        false_triggers,
        buffer_updates: distances.len(),
    })
}

/// Per-session counts; merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SessionTally {
    pub approaches: u64,
    pub collisions: u64,
    pub false_triggers: u64,
    pub hit_velocity_sum: f64,
    pub km: f64,
}

impl SessionTally {
    pub fn merge(mut self, other: &SessionTally) -> Self {
        self.approaches += other.approaches;
        self.collisions += other.collisions;
        self.false_triggers += other.false_triggers;
        self.hit_velocity_sum += other.hit_velocity_sum;
        self.km += other.km;
        self
    }
}

/// Random stream for session `index`, independent of scheduling.
pub fn session_rng(seed: u64, index: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn simulate_session(
    config: &SimulationConfig,
    ladder: &DetectionLadder,
    index: u64,
) -> Result<SessionTally> {
    let lambda = config.intensity()?;
    let mut rng = session_rng(config.seed, index);
    let mean = lambda * config.spec.route_length_km;
    let obstacles = if mean > 0.0 {
        let p =
            Poisson::new(mean).map_err(|e| invalid("obstacle_intensity_prior", e.to_string()))?;
        p.sample(&mut rng) as u64
    } else {
        0
    };
    let mut tally = SessionTally {
        km: config.spec.route_length_km,
        ..SessionTally::default()
    };
    let mut scratch = ApproachScratch::default();
    for _ in 0..obstacles {
        let out = simulate_approach(config, ladder, &mut rng, &mut scratch)?;
        tally.approaches += 1;
        tally.false_triggers += u64::from(out.false_triggers);
        if out.hit_velocity > 0.0 {
            tally.collisions += 1;
            tally.hit_velocity_sum += out.hit_velocity;
        }
    }
    Ok(tally)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub model: String,
    pub seed: u64,
    pub sessions: u64,
    pub total_km: f64,
    pub approaches: u64,
    pub collisions: u64,
    pub false_triggers: u64,
    /// `None` when there were no approaches.
    pub per_approach_collision_prob: Option<Estimate>,
    pub collisions_per_km: Estimate,
    pub mean_hit_velocity_given_hit: Option<f64>,
}

impl SimulationReport {
    fn from_tally(config: &SimulationConfig, t: &SessionTally) -> Self {
        let per_approach = (t.approaches > 0).then(|| {
            let p = t.collisions as f64 / t.approaches as f64;
            Estimate {
                value: p,
                std_error: (p * (1.0 - p) / t.approaches as f64).sqrt(),
            }
        });
        Self {
            model: config.model.name.clone(),
            seed: config.seed,
            sessions: config.sessions,
            total_km: t.km,
            approaches: t.approaches,
            collisions: t.collisions,
            false_triggers: t.false_triggers,
            per_approach_collision_prob: per_approach,
            collisions_per_km: Estimate {
                value: t.collisions as f64 / t.km,
                std_error: (t.collisions as f64).sqrt() / t.km,
            },
            mean_hit_velocity_given_hit: (t.collisions > 0)
                .then(|| t.hit_velocity_sum / t.collisions as f64),
        }
    }

    /// `metric,value` rows; empty values mark undefined estimates.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let pa = self.per_approach_collision_prob;
        let rows: [(&str, String); 13] = [
            ("model", self.model.clone()),
            ("seed", self.seed.to_string()),
            ("sessions", self.sessions.to_string()),
            ("total_km", self.total_km.to_string()),
            ("approaches", self.approaches.to_string()),
            ("collisions", self.collisions.to_string()),
            ("false_triggers", self.false_triggers.to_string()),
            ("per_approach_collision_prob", opt(pa.map(|e| e.value))),
            (
                "per_approach_collision_prob_se",
                opt(pa.map(|e| e.std_error)),
            ),
            (
                "collisions_per_km",
                self.collisions_per_km.value.to_string(),
            ),
            (
                "collisions_per_km_se",
                self.collisions_per_km.std_error.to_string(),
            ),
            (
                "mean_hit_velocity_given_hit",
                opt(self.mean_hit_velocity_given_hit),
            ),
            ("empty", (self.approaches == 0).to_string()),
        ];
        let mut out = String::from("metric,value\n");
        for (k, v) in rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "model {}: {} sessions, {} km, {} approaches, {} collisions, {} false triggers",
            self.model,
            self.sessions,
            self.total_km,
            self.approaches,
            self.collisions,
            self.false_triggers
        );
        match self.per_approach_collision_prob {
            Some(e) => {
                let _ = writeln!(
                    s,
                    "P(collision per approach) = {:.6e} +/- {:.2e}",
                    e.value, e.std_error
                );
            }
            None => {
                let _ = writeln!(s, "P(collision per approach) = n/a (no approaches)");
            }
        }
        let _ = writeln!(
            s,
            "collisions per km = {:.6e} +/- {:.2e}",
            self.collisions_per_km.value, self.collisions_per_km.std_error
        );
        if let Some(v) = self.mean_hit_velocity_given_hit {
            let _ = writeln!(s, "mean hit speed given collision = {v:.3} m/s");
        }
        s
    }
}

/// Runs all sessions. `threads = None` uses the global pool; results do not
/// depend on the thread count.
pub fn run(config: &SimulationConfig, threads: Option<usize>) -> Result<SimulationReport> {
    let ladder = config.validate()?;
    let work = || -> Result<Vec<SessionTally>> {
        (0..config.sessions)
            .into_par_iter()
            .map(|i| simulate_session(config, &ladder, i))
            .collect()
    };
    let tallies = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::ResourceCap(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    // fixed merge order keeps floating-point sums reproducible
    let total = tallies
        .iter()
        .fold(SessionTally::default(), |acc, t| acc.merge(t));
    if total.approaches > config.max_approaches {
        return Err(Error::ResourceCap(format!(
            "{} approaches exceed the cap of {}",
            total.approaches, config.max_approaches
        )));
    }
    Ok(SimulationReport::from_tally(config, &total))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    CollisionProbability,
    CollisionsPerKm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Equals,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::AtMost => "at_most",
            Relation::AtLeast => "at_least",
            Relation::Equals => "equals",
        }
    }
}

/// A claim about a simulated quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub label: String,
    pub metric: Metric,
    pub relation: Relation,
    pub value: f64,
}

impl From<&RiskBound> for BoundCheck {
    fn from(b: &RiskBound) -> Self {
        Self {
            label: format!("{} risk bound ({})", b.direction, b.combination),
            metric: Metric::CollisionsPerKm,
            relation: match b.direction {
                Direction::Upper => Relation::AtMost,
                Direction::Lower => Relation::AtLeast,
            },
            value: b.value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundComparison {
    pub check: BoundCheck,
    pub empirical: f64,
    pub std_error: f64,
    pub z: f64,
    pub pass: bool,
    /// Empirical value within 3 standard errors of the bound.
    pub tight: bool,
}

/// Whether claimed probabilities hold for the simulated run: pass when the
/// empirical value sits on the claimed side, allowing 3 standard errors.
/// The standard error is the larger of the plug-in one and the one implied
/// by the claimed value, so an empirical zero is not over-trusted.
pub fn validate_bounds(report: &SimulationReport, checks: &[BoundCheck]) -> Vec<BoundComparison> {
    checks
        .iter()
        .filter_map(|check| {
            let (empirical, hat_se, null_se) = match check.metric {
                Metric::CollisionProbability => {
                    let e = report.per_approach_collision_prob?;
                    let n = report.approaches as f64;
                    let v = check.value.clamp(0.0, 1.0);
                    (e.value, e.std_error, (v * (1.0 - v) / n).sqrt())
                }
                Metric::CollisionsPerKm => {
                    let km = report.total_km;
                    let e = report.collisions_per_km;
                    (
                        e.value,
                        e.std_error,
                        (check.value.max(0.0) * km).sqrt() / km,
                    )
                }
            };
            let se = match check.relation {
                Relation::Equals => null_se,
                _ => null_se.max(hat_se),
            };
            let diff = empirical - check.value;
            let z = if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            };
            let pass = match check.relation {
                Relation::AtMost => z <= 3.0,
                Relation::AtLeast => z >= -3.0,
                Relation::Equals => z.abs() <= 3.0,
            };
            Some(BoundComparison {
                check: check.clone(),
                empirical,
                std_error: se,
                z,
                pass,
                tight: z.abs() <= 3.0,
            })
        })
        .collect()
}

/// Share of approaches that see an extra update in the lead-in slice.
pub fn lead_in_share(ladder: &DetectionLadder, include_phase_offset: bool) -> f64 {
    if !include_phase_offset {
        return 0.0;
    }
    let n = ladder.updates_in_buffer() as f64;
    ((ladder.buffer() - n * ladder.step()) / ladder.step()).clamp(0.0, 1.0)
}

/// Per-approach collision probability claims implied by the model's own
/// marginals: the dependence-free upper bound `min_j q_j`, the model's exact
/// value when it has one, and the independence product when applicable.
pub fn analytic_checks(
    model: &ErrorModel,
    ladder: &DetectionLadder,
    include_phase_offset: bool,
) -> Vec<BoundCheck> {
    let guaranteed = model.guaranteed();
    let upper = guaranteed.iter().copied().fold(1.0, f64::min);
    let mut checks = vec![BoundCheck {
        label: "min_j q_j (any dependence)".into(),
        metric: Metric::CollisionProbability,
        relation: Relation::AtMost,
        value: upper,
    }];
    let share = lead_in_share(ladder, include_phase_offset);
    let without = model.dependence.all_miss_probability(guaranteed);
    let with = model.dependence.all_miss_probability(&model.by_interval);
    if let (Some(a), Some(b)) = (without, with) {
        checks.push(BoundCheck {
            label: format!("{} closed form", model.dependence.name()),
            metric: Metric::CollisionProbability,
            relation: Relation::Equals,
            value: (1.0 - share) * a + share * b,
        });
    }
    if model.dependence.independent() {
        checks.push(BoundCheck {
            label: "prod_j q_j over N+1 updates (independence)".into(),
            metric: Metric::CollisionProbability,
            relation: Relation::AtLeast,
            value: model.by_interval.iter().product(),
        });
    }
    checks
}

/// CSV of comparisons: `label,metric,relation,bound,empirical,std_error,z,pass,tight`.
pub fn comparisons_csv(rows: &[BoundComparison]) -> String {
    let mut out = String::from("label,metric,relation,bound,empirical,std_error,z,pass,tight\n");
    for r in rows {
        let metric = match r.check.metric {
            Metric::CollisionProbability => "collision_probability",
            Metric::CollisionsPerKm => "collisions_per_km",
        };
        let _ = writeln!(
            out,
            "\"{}\",{},{},{},{},{},{},{},{}",
            r.check.label.replace('"', "'"),
            metric,
            r.check.relation.as_str(),
            r.check.value,
            r.empirical,
            r.std_error,
            r.z,
            r.pass,
            r.tight
        );
    }
    out
}
