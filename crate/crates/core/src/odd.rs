//! Operational design domain: straight road, stationary obstacles, a
//! perception system running at a fixed rate and a constant-deceleration brake.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Standard gravity, m/s^2.
pub const GRAVITY: f64 = 9.80665;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddSpec {
    /// Length of one driving session (K), km.
    pub route_length_km: f64,
    /// Cruise speed (v), m/s.
    pub speed: f64,
    /// Perception update rate (f), Hz.
    pub perception_frequency: f64,
    /// Distance estimate below which braking starts (c), m.
    pub brake_threshold: f64,
    /// Usable friction coefficient (mu).
    pub surface_friction: f64,
    /// Stationary obstacles per km; only the simulator needs it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacle_intensity_prior: Option<f64>,
}

impl OddSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("route_length_km", self.route_length_km),
            ("speed", self.speed),
            ("perception_frequency", self.perception_frequency),
            ("brake_threshold", self.brake_threshold),
            ("surface_friction", self.surface_friction),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} is not positive")));
            }
        }
        if let Some(l) = self.obstacle_intensity_prior {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(invalid(
                    "obstacle_intensity_prior",
                    format!("{l} is negative"),
                ));
            }
        }
        build_ladder(self).map(|_| ())
    }

    pub fn braking_distance(&self) -> Result<f64> {
        braking_distance(self.speed, self.surface_friction)
    }

    /// Distance covered between perception updates (v/f), m.
    pub fn step(&self) -> f64 {
        self.speed / self.perception_frequency
    }
}

/// Stopping distance under constant deceleration `mu g`.
pub fn braking_distance(speed: f64, friction: f64) -> Result<f64> {
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(invalid("speed", format!("{speed} is not positive")));
    }
    if !(friction > 0.0 && friction.is_finite()) {
        return Err(invalid(
            "surface_friction",
            format!("{friction} is not positive"),
        ));
    }
    Ok(speed * speed / (2.0 * friction * GRAVITY))
}

/// Distances at which the guaranteed perception updates fall while the
/// vehicle crosses the buffer `[b, c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionLadder {
    braking_distance: f64,
    step: f64,
    updates_in_buffer: usize,
    /// `l_0 > l_1 > ... > l_{N+1}`; `l_0 = c`, `l_{N+1} = b`.
    levels: Vec<f64>,
}

// absorbs representation error when (c - b) is an exact multiple of v/f
const FLOOR_SLACK: f64 = 1e-9;

pub fn build_ladder(spec: &OddSpec) -> Result<DetectionLadder> {
    let b = spec.braking_distance()?;
    if !(spec.perception_frequency > 0.0) {
        return Err(invalid("perception_frequency", "must be positive"));
    }
    DetectionLadder::from_distances(spec.brake_threshold, b, spec.step())
}

impl DetectionLadder {
    /// Ladder for threshold `c`, braking distance `b` and update spacing `step`.
    pub fn from_distances(c: f64, b: f64, step: f64) -> Result<Self> {
        if !(b < c) {
            return Err(invalid(
                "brake_threshold",
                format!("braking distance {b:.3} m leaves no buffer below threshold {c} m"),
            ));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid("step", "update spacing must be positive"));
        }
        let n = ((c - b) / step + FLOOR_SLACK).floor();
        if n < 1.0 {
            return Err(invalid(
                "perception_frequency",
                format!(
                    "only {n} updates fit in the {:.3} m buffer; at least one is required",
                    c - b
                ),
            ));
        }
        let n = n as usize;
        let mut levels = Vec::with_capacity(n + 2);
        levels.push(c);
        for j in 1..=n {
            levels.push(b + (n + 1 - j) as f64 * step);
        }
        levels.push(b);
        // exact divisibility can land l_1 a hair above c
        if levels[1] > c {
            levels[1] = c;
        }
        Ok(Self {
            braking_distance: b,
            step,
            updates_in_buffer: n,
            levels,
        })
    }

    pub fn braking_distance(&self) -> f64 {
        self.braking_distance
    }

    pub fn brake_threshold(&self) -> f64 {
        self.levels[0]
    }

    pub fn buffer(&self) -> f64 {
        self.brake_threshold() - self.braking_distance
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// N, the number of updates guaranteed inside the buffer.
    pub fn updates_in_buffer(&self) -> usize {
        self.updates_in_buffer
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Interval index `j` with `d in [l_{j+1}, l_j)`, for `j = 0..=N`.
    /// Index 0 is the lead-in slice `[l_1, l_0)` that may or may not receive
    /// an update. `None` outside `[b, c)`.
    pub fn interval_of(&self, true_distance: f64) -> Option<usize> {
        let c = self.brake_threshold();
        let b = self.braking_distance;
        if !(true_distance >= b && true_distance < c) {
            return None;
        }
        if true_distance >= self.levels[1] {
            return Some(0);
        }
        // levels[j] = b + (N + 1 - j) step for 1 <= j <= N
        let from_bottom = ((true_distance - b) / self.step).floor() as usize;
        let j = self.updates_in_buffer.saturating_sub(from_bottom).max(1);
        // guard against rounding at the interval edges
        let j = if true_distance >= self.levels[j] {
            j - 1
        } else if true_distance < self.levels[j + 1] {
            j + 1
        } else {
            j
        };
        Some(j.clamp(1, self.updates_in_buffer))
    }
}

/// Where braking started, if it did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrakeStart {
    At(f64),
    Never,
}

/// Speed at which the obstacle is hit; zero when the car stops in time.
pub fn hit_velocity(brake_start: BrakeStart, spec: &OddSpec) -> Result<f64> {
    let v = spec.speed;
    let d = match brake_start {
        BrakeStart::Never => return Ok(v),
        BrakeStart::At(d) => d,
    };
    if !(d >= 0.0) {
        return Err(invalid("brake_start_distance", format!("{d} is negative")));
    }
    let b = spec.braking_distance()?;
    if d >= b {
        return Ok(0.0);
    }
    // v_h^2 = v^2 - 2 mu g d = v^2 (1 - d / b)
    Ok(v * (1.0 - d / b).max(0.0).sqrt())
}

/// Vehicle-level acceptance target: collisions per km at most `epsilon`
/// with confidence at least `1 - alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyTarget {
    pub epsilon: f64,
    pub alpha: f64,
}

impl SafetyTarget {
    pub fn new(epsilon: f64, alpha: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid("epsilon", format!("{epsilon} is not positive")));
        }
        crate::error::check_alpha(alpha)?;
        Ok(Self { epsilon, alpha })
    }

    pub fn confidence(&self) -> f64 {
        1.0 - self.alpha
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(speed: f64, c: f64, mu: f64, f: f64) -> OddSpec {
        OddSpec {
            route_length_km: 100.0,
            speed,
            perception_frequency: f,
            brake_threshold: c,
            surface_friction: mu,
            obstacle_intensity_prior: Some(0.01),
        }
    }

    #[test]
    fn braking_distance_examples() {
        let b = braking_distance(15.0, 0.8).unwrap();
        assert!((b - 225.0 / (1.6 * GRAVITY)).abs() < 1e-12);
        assert!((b - 14.340).abs() < 1e-3);
        let b2 = braking_distance(15.0, 0.4).unwrap();
        assert!((b2 - 2.0 * b).abs() < 1e-12);
        assert!(braking_distance(1e-6, 0.8).unwrap() < 1e-12);
        assert!(braking_distance(0.0, 0.8).is_err());
        assert!(braking_distance(10.0, -1.0).is_err());
    }

    #[test]
    fn ladder_from_distances() {
        let l = DetectionLadder::from_distances(60.0, 40.0, 1.5).unwrap();
        assert_eq!(l.updates_in_buffer(), 13);
        assert_eq!(l.step(), 1.5);
        assert_eq!(l.levels().len(), 15);
        assert_eq!(l.levels()[0], 60.0);
        assert!((l.levels()[1] - 59.5).abs() < 1e-12);
        assert_eq!(*l.levels().last().unwrap(), 40.0);
    }

    #[test]
    fn ladder_exact_divisibility() {
        let l = DetectionLadder::from_distances(60.0, 40.0, 2.0).unwrap();
        assert_eq!(l.updates_in_buffer(), 10);
        assert_eq!(l.levels()[0], l.levels()[1]);
    }

    #[test]
    fn ladder_rejects_degenerate_buffers() {
        assert!(DetectionLadder::from_distances(60.0, 59.9, 1.5).is_err());
        assert!(DetectionLadder::from_distances(60.0, 61.0, 1.5).is_err());
        // mu so low that b exceeds c
        assert!(build_ladder(&spec(15.0, 10.0, 0.8, 10.0)).is_err());
        let l = build_ladder(&spec(15.0, 34.0, 0.8, 10.0)).unwrap();
        assert_eq!(l.updates_in_buffer(), 13);
    }

    #[test]
    fn interval_assignment() {
        let l = DetectionLadder::from_distances(60.0, 40.0, 1.5).unwrap();
        assert_eq!(l.interval_of(41.0), Some(13));
        assert_eq!(l.interval_of(40.0), Some(13));
        assert_eq!(l.interval_of(41.5), Some(12));
        assert_eq!(l.interval_of(59.4), Some(1));
        assert_eq!(l.interval_of(59.7), Some(0));
        assert_eq!(l.interval_of(60.0), None);
        assert_eq!(l.interval_of(100.0), None);
        assert_eq!(l.interval_of(39.99), None);
    }

    #[test]
    fn hit_velocity_examples() {
        let s = spec(15.0, 34.0, 0.8, 10.0);
        let b = s.braking_distance().unwrap();
        assert_eq!(hit_velocity(BrakeStart::At(b), &s).unwrap(), 0.0);
        assert_eq!(hit_velocity(BrakeStart::At(0.0), &s).unwrap(), 15.0);
        let h = hit_velocity(BrakeStart::At(b / 2.0), &s).unwrap();
        assert!((h - 15.0 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(hit_velocity(BrakeStart::Never, &s).unwrap(), 15.0);
        assert!(hit_velocity(BrakeStart::At(-1.0), &s).is_err());
    }

    #[test]
    fn safety_target_validation() {
        assert!(SafetyTarget::new(1e-5, 0.1).is_ok());
        assert!(SafetyTarget::new(0.0, 0.1).is_err());
        assert!(SafetyTarget::new(1e-5, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn ladder_reproduces_buffer(c in 5.0f64..200.0, frac in 0.05f64..0.95, step in 0.05f64..3.0) {
            let b = c * frac;
            prop_assume!((c - b) / step >= 1.0);
            let l = DetectionLadder::from_distances(c, b, step).unwrap();
            let lv = l.levels();
            let n = l.updates_in_buffer();
            for w in lv[1..].windows(2) {
                prop_assert!(w[0] > w[1]);
            }
            prop_assert!(lv[0] >= lv[1]);
            prop_assert!((lv[1] - lv[n + 1] - n as f64 * step).abs() < 1e-9);
            let lead = lv[0] - lv[1];
            prop_assert!((-1e-9..step).contains(&lead));
            prop_assert!((l.buffer() - (c - b)).abs() < 1e-9);
            // partition: every point of [b, c) lands in the interval that contains it
            for i in 0..50 {
                let d = b + (c - b) * i as f64 / 50.0;
                let j = l.interval_of(d).unwrap();
                prop_assert!(d < lv[j] || (j == 0 && d < lv[0]));
                prop_assert!(d >= lv[j + 1]);
            }
        }

        #[test]
        fn hit_velocity_monotone(d1 in 0.0f64..40.0, d2 in 0.0f64..40.0) {
            let s = spec(15.0, 34.0, 0.8, 10.0);
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            let vlo = hit_velocity(BrakeStart::At(lo), &s).unwrap();
            let vhi = hit_velocity(BrakeStart::At(hi), &s).unwrap();
            prop_assert!(vhi <= vlo);
            if hi >= s.braking_distance().unwrap() {
                prop_assert_eq!(vhi, 0.0);
            }
        }
    }
}
