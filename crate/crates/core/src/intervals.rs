//! Exact one-sided binomial and Poisson confidence bounds.
//!
//! Every bound is obtained by inverting an exact tail probability with
//! bisection, then rounded outward at the 12th decimal so that floating-point
//! error can only make the statement more conservative.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{check_alpha, invalid, Error, Result};
use crate::tails;

/// Failures observed in a number of Bernoulli trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinomialEvidence {
    failures: u64,
    trials: u64,
}

impl BinomialEvidence {
    pub fn new(failures: u64, trials: u64) -> Result<Self> {
        if trials == 0 {
            return Err(invalid("trials", "must be positive"));
        }
        if failures > trials {
            return Err(invalid(
                "failures",
                format!("{failures} failures exceed {trials} trials"),
            ));
        }
        Ok(Self { failures, trials })
    }

    pub fn failures(&self) -> u64 {
        self.failures
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn fraction(&self) -> f64 {
        self.failures as f64 / self.trials as f64
    }
}

/// Event count over an exposure measured in kilometres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonEvidence {
    count: u64,
    exposure_km: f64,
}

impl PoissonEvidence {
    pub fn new(count: u64, exposure_km: f64) -> Result<Self> {
        if !(exposure_km > 0.0 && exposure_km.is_finite()) {
            return Err(invalid(
                "exposure",
                format!("{exposure_km} km is not a positive finite length"),
            ));
        }
        Ok(Self { count, exposure_km })
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn exposure_km(&self) -> f64 {
        self.exposure_km
    }

    /// Point estimate of the rate, events per km.
    pub fn rate(&self) -> f64 {
        self.count as f64 / self.exposure_km
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Upper,
    Lower,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Upper => "upper",
            Direction::Lower => "lower",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What kind of quantity a statement bounds; fixes the natural range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterKind {
    /// A probability, bounded to [0, 1].
    Probability,
    /// A nonnegative rate (per km).
    Rate,
}

/// "parameter <= bound" (or ">=") holding with probability at least `1 - alpha`.
///
/// `alpha = 0` is accepted and denotes a parameter known with certainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceStatement {
    parameter: String,
    kind: ParameterKind,
    bound: f64,
    direction: Direction,
    alpha: f64,
}

impl ConfidenceStatement {
    pub fn new(
        parameter: impl Into<String>,
        kind: ParameterKind,
        bound: f64,
        direction: Direction,
        alpha: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(invalid("alpha", format!("{alpha} is outside [0, 1)")));
        }
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(invalid(
                "bound",
                format!("{bound} is not a nonnegative finite value"),
            ));
        }
        if kind == ParameterKind::Probability && bound > 1.0 {
            return Err(invalid(
                "bound",
                format!("probability bound {bound} exceeds 1"),
            ));
        }
        Ok(Self {
            parameter: parameter.into(),
            kind,
            bound,
            direction,
            alpha,
        })
    }

    /// Upper bound on a probability.
    pub fn probability_upper(parameter: impl Into<String>, bound: f64, alpha: f64) -> Result<Self> {
        Self::new(
            parameter,
            ParameterKind::Probability,
            bound,
            Direction::Upper,
            alpha,
        )
    }

    pub fn probability_lower(parameter: impl Into<String>, bound: f64, alpha: f64) -> Result<Self> {
        Self::new(
            parameter,
            ParameterKind::Probability,
            bound,
            Direction::Lower,
            alpha,
        )
    }

    pub fn rate_upper(parameter: impl Into<String>, bound: f64, alpha: f64) -> Result<Self> {
        Self::new(
            parameter,
            ParameterKind::Rate,
            bound,
            Direction::Upper,
            alpha,
        )
    }

    pub fn rate_lower(parameter: impl Into<String>, bound: f64, alpha: f64) -> Result<Self> {
        Self::new(
            parameter,
            ParameterKind::Rate,
            bound,
            Direction::Lower,
            alpha,
        )
    }

    /// Same statement, relabelled.
    pub fn with_parameter(mut self, parameter: impl Into<String>) -> Self {
        self.parameter = parameter.into();
        self
    }

    pub fn parameter(&self) -> &str {
        &self.parameter
    }

    pub fn kind(&self) -> ParameterKind {
        self.kind
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn confidence(&self) -> f64 {
        1.0 - self.alpha
    }

    pub(crate) fn expect(&self, direction: Direction) -> Result<()> {
        if self.direction == direction {
            Ok(())
        } else {
            Err(Error::DirectionMismatch {
                parameter: self.parameter.clone(),
                expected: direction.as_str(),
            })
        }
    }
}

impl fmt::Display for ConfidenceStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.direction {
            Direction::Upper => "<=",
            Direction::Lower => ">=",
        };
        write!(
            f,
            "{} {} {} with confidence {}",
            self.parameter,
            op,
            self.bound,
            1.0 - self.alpha
        )
    }
}

const DECIMALS: f64 = 1e12;

fn round_up(x: f64) -> f64 {
    (x * DECIMALS).ceil() / DECIMALS
}

fn round_down(x: f64) -> f64 {
    (x * DECIMALS).floor() / DECIMALS
}

/// Bisects a monotone predicate on `[lo, hi]` where `pred(lo)` is false and
/// `pred(hi)` is true, returning the bracket once it can shrink no further.
fn bisect(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> (f64, f64) {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Clopper-Pearson one-sided upper bound: the `p` at which observing at most
/// `failures` has probability exactly `alpha`.
pub fn binomial_upper_bound(ev: BinomialEvidence, alpha: f64) -> Result<ConfidenceStatement> {
    check_alpha(alpha)?;
    let (k, n) = (ev.failures, ev.trials);
    let bound = if k == n {
        1.0
    } else {
        let (_, hi) = bisect(0.0, 1.0, |p| tails::binom_cdf(k, n, p) <= alpha);
        round_up(hi).min(1.0)
    };
    ConfidenceStatement::probability_upper("miss probability", bound, alpha)
}

/// One-sided lower bound: the `p` at which observing at least `failures` has
/// probability exactly `alpha`; zero when nothing failed.
pub fn binomial_lower_bound(ev: BinomialEvidence, alpha: f64) -> Result<ConfidenceStatement> {
    check_alpha(alpha)?;
    let (k, n) = (ev.failures, ev.trials);
    let bound = if k == 0 {
        0.0
    } else {
        let (lo, _) = bisect(0.0, 1.0, |p| tails::binom_sf(k, n, p) > alpha);
        round_down(lo).max(0.0)
    };
    ConfidenceStatement::probability_lower("miss probability", bound, alpha)
}

/// Grows `hi` until `pred(hi)` holds.
fn bracket_mean(count: u64, pred: impl Fn(f64) -> bool) -> f64 {
    let mut hi = 2.0 * (count as f64 + 1.0);
    while !pred(hi) {
        hi *= 2.0;
    }
    hi
}

/// Exact one-sided upper bound on a Poisson rate per km.
pub fn poisson_rate_upper_bound(ev: PoissonEvidence, alpha: f64) -> Result<ConfidenceStatement> {
    check_alpha(alpha)?;
    let k = ev.count;
    let pred = |mu: f64| tails::pois_cdf(k, mu) <= alpha;
    let hi = bracket_mean(k, pred);
    let (_, mu) = bisect(0.0, hi, pred);
    ConfidenceStatement::rate_upper("obstacle rate", round_up(mu / ev.exposure_km), alpha)
}

/// Exact one-sided lower bound on a Poisson rate per km; zero when nothing
/// was observed.
pub fn poisson_rate_lower_bound(ev: PoissonEvidence, alpha: f64) -> Result<ConfidenceStatement> {
    check_alpha(alpha)?;
    let k = ev.count;
    let bound = if k == 0 {
        0.0
    } else {
        let pred = |mu: f64| tails::pois_sf(k, mu) > alpha;
        let hi = bracket_mean(k, pred);
        let (mu, _) = bisect(0.0, hi, pred);
        round_down(mu / ev.exposure_km).max(0.0)
    };
    ConfidenceStatement::rate_lower("obstacle rate", bound, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(k: u64, n: u64) -> BinomialEvidence {
        BinomialEvidence::new(k, n).unwrap()
    }

    fn pois(k: u64, m: f64) -> PoissonEvidence {
        PoissonEvidence::new(k, m).unwrap()
    }

    #[test]
    fn zero_failure_upper_bound_closed_form() {
        let s = binomial_upper_bound(binom(0, 59), 0.05).unwrap();
        let expect = 1.0 - 0.05f64.powf(1.0 / 59.0);
        assert!(
            (s.bound() - expect).abs() < 2e-12,
            "{} vs {expect}",
            s.bound()
        );
        assert!(s.bound() >= expect);
        assert!((s.bound() - 0.049508).abs() < 1e-6);
    }

    #[test]
    fn all_failures_give_trivial_upper_bound() {
        for a in [0.01, 0.5, 0.99] {
            assert_eq!(binomial_upper_bound(binom(7, 7), a).unwrap().bound(), 1.0);
        }
    }

    #[test]
    fn lower_bound_edges() {
        assert_eq!(
            binomial_lower_bound(binom(0, 100), 0.05).unwrap().bound(),
            0.0
        );
        let s = binomial_lower_bound(binom(100, 100), 0.05).unwrap();
        let expect = 0.05f64.powf(0.01);
        assert!(s.bound() <= expect && expect - s.bound() < 2e-12);
        assert!((s.bound() - 0.970487).abs() < 1e-6);
    }

    #[test]
    fn poisson_closed_forms() {
        let s = poisson_rate_upper_bound(pois(0, 100.0), 0.05).unwrap();
        let expect = -(0.05f64.ln()) / 100.0;
        assert!(s.bound() >= expect && s.bound() - expect < 2e-12);
        assert_eq!(
            poisson_rate_lower_bound(pois(0, 50.0), 0.05)
                .unwrap()
                .bound(),
            0.0
        );
        let s = poisson_rate_lower_bound(pois(1, 1.0), 0.5).unwrap();
        assert!((s.bound() - 2f64.ln()).abs() < 2e-12 && s.bound() <= 2f64.ln());
    }

    #[test]
    fn poisson_upper_vanishes_as_alpha_grows() {
        let mut prev = f64::INFINITY;
        for a in [0.5, 0.9, 0.99, 0.999999] {
            let b = poisson_rate_upper_bound(pois(0, 100.0), a).unwrap().bound();
            assert!(b < prev);
            prev = b;
        }
        assert!(prev < 1e-7);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(BinomialEvidence::new(0, 0).is_err());
        assert!(BinomialEvidence::new(5, 4).is_err());
        assert!(PoissonEvidence::new(1, 0.0).is_err());
        assert!(PoissonEvidence::new(1, -3.0).is_err());
        for a in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(binomial_upper_bound(binom(1, 10), a).is_err());
            assert!(poisson_rate_lower_bound(pois(1, 10.0), a).is_err());
        }
        assert!(ConfidenceStatement::probability_upper("p", 1.5, 0.1).is_err());
        assert!(ConfidenceStatement::rate_upper("l", 1.5, 0.1).is_ok());
    }

    #[test]
    fn direction_check() {
        let s = ConfidenceStatement::rate_upper("rate", 0.01, 0.05).unwrap();
        assert!(s.expect(Direction::Upper).is_ok());
        assert!(matches!(
            s.expect(Direction::Lower),
            Err(Error::DirectionMismatch { .. })
        ));
    }
}
