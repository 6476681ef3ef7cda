//! Vehicle-level collision-risk bounds composed from component statements.
//!
//! Per approached obstacle, a collision happens only if no perception update
//! inside the buffer triggers braking, so
//!
//! * upper: `E[C]/K <= min_j P(miss_j) * lambda`, under any dependence between
//!   frame errors;
//! * lower: `E[C]/K >= prod_j P(miss_j) * lambda` when frame errors are
//!   independent, or `P(miss_N)^(N+1) * lambda` when overestimation shrinks
//!   with distance.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::combine::{ConfidenceCombiner, JointConfidence, UnionRule};
use crate::error::{Error, Result};
use crate::intervals::{ConfidenceStatement, Direction};
use crate::odd::SafetyTarget;

/// Modelling assumption a bound depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    /// Holds whatever the joint law of the frame errors.
    WorstCaseDependence,
    IndependentErrors,
    /// Overestimation probabilities do not grow as the obstacle gets closer.
    MonotoneErrors,
    /// An update in the lead-in slice `[l_1, l_0)` is charged at the smallest
    /// supplied per-frame bound.
    ExtraOpportunity,
}

impl Assumption {
    pub fn as_str(self) -> &'static str {
        match self {
            Assumption::WorstCaseDependence => "worst_case_dependence",
            Assumption::IndependentErrors => "independent_errors",
            Assumption::MonotoneErrors => "monotone_errors",
            Assumption::ExtraOpportunity => "extra_opportunity",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Assumption::WorstCaseDependence => {
                "frame errors may be arbitrarily dependent (all-or-nothing worst case)"
            }
            Assumption::IndependentErrors => "distance-estimation errors are independent across frames",
            Assumption::MonotoneErrors => {
                "overestimation errors decrease with distance, so the innermost frame is the most reliable"
            }
            Assumption::ExtraOpportunity => {
                "one extra update before the first guaranteed one, charged at the smallest per-frame bound"
            }
        }
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The component statements a bound was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub rate: Vec<ConfidenceStatement>,
    pub miss: Vec<ConfidenceStatement>,
}

impl Provenance {
    fn alphas(&self) -> Vec<f64> {
        self.rate
            .iter()
            .chain(&self.miss)
            .map(|s| s.alpha())
            .collect()
    }
}

/// Bound on expected collisions per km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskBound {
    pub value: f64,
    pub direction: Direction,
    pub confidence: f64,
    pub vacuous: bool,
    pub combination: String,
    pub assumptions: Vec<Assumption>,
    pub provenance: Provenance,
}

impl RiskBound {
    fn compose(
        value: f64,
        direction: Direction,
        joint: JointConfidence,
        combination: &str,
        assumptions: Vec<Assumption>,
        provenance: Provenance,
    ) -> Self {
        Self {
            value,
            direction,
            confidence: joint.confidence,
            vacuous: joint.vacuous,
            combination: combination.to_string(),
            assumptions,
            provenance,
        }
    }

    fn qualifies(&self, target: &SafetyTarget) -> bool {
        // tolerate representation error in 1 - sum(alpha)
        !self.vacuous && self.confidence >= target.confidence() - 1e-12
    }
}

/// Sufficient-condition bound: miss-probability upper bound times rate upper bound.
pub fn upper_risk_bound(
    miss: &ConfidenceStatement,
    rate: &ConfidenceStatement,
    combiner: &dyn ConfidenceCombiner,
) -> Result<RiskBound> {
    miss.expect(Direction::Upper)?;
    rate.expect(Direction::Upper)?;
    let joint = combiner.joint(&[rate.alpha(), miss.alpha()]);
    Ok(RiskBound::compose(
        miss.bound() * rate.bound(),
        Direction::Upper,
        joint,
        combiner.name(),
        vec![Assumption::WorstCaseDependence],
        Provenance {
            rate: vec![rate.clone()],
            miss: vec![miss.clone()],
        },
    ))
}

fn lower_inputs(per_frame: &[ConfidenceStatement], rate: &ConfidenceStatement) -> Result<()> {
    if per_frame.is_empty() {
        return Err(Error::InvalidEvidence("no per-frame statements".into()));
    }
    for s in per_frame {
        s.expect(Direction::Lower)?;
    }
    rate.expect(Direction::Lower)
}

/// Necessary-condition bound under independent frame errors: product of the
/// per-frame miss lower bounds times the rate lower bound. Confidence follows
/// the union rule over all constituents.
pub fn lower_risk_bound_independent(
    per_frame: &[ConfidenceStatement],
    rate: &ConfidenceStatement,
    include_extra_frame: bool,
) -> Result<RiskBound> {
    lower_inputs(per_frame, rate)?;
    let mut miss: f64 = per_frame.iter().map(|s| s.bound()).product();
    let mut assumptions = vec![Assumption::IndependentErrors];
    if include_extra_frame {
        // the lead-in update has the smallest overestimation margin, so its
        // miss probability is no smaller than the least likely guaranteed miss
        let least = per_frame
            .iter()
            .map(|s| s.bound())
            .fold(f64::INFINITY, f64::min);
        miss *= least;
        assumptions.push(Assumption::ExtraOpportunity);
    }
    let provenance = Provenance {
        rate: vec![rate.clone()],
        miss: per_frame.to_vec(),
    };
    let joint = UnionRule.joint(&provenance.alphas());
    Ok(RiskBound::compose(
        miss * rate.bound(),
        Direction::Lower,
        joint,
        UnionRule.name(),
        assumptions,
        provenance,
    ))
}

/// Independent-errors bound when only the smallest per-frame lower bound is
/// known: `min^(N+1) * rate`.
pub fn lower_risk_bound_min_marginal(
    min_frame: &ConfidenceStatement,
    updates_in_buffer: usize,
    rate: &ConfidenceStatement,
) -> Result<RiskBound> {
    lower_power_form(
        min_frame,
        updates_in_buffer,
        rate,
        Assumption::IndependentErrors,
    )
}

/// Bound under monotone errors: `P(miss_N)^(N+1) * rate`.
pub fn lower_risk_bound_monotone(
    last_frame: &ConfidenceStatement,
    updates_in_buffer: usize,
    rate: &ConfidenceStatement,
) -> Result<RiskBound> {
    lower_power_form(
        last_frame,
        updates_in_buffer,
        rate,
        Assumption::MonotoneErrors,
    )
}

fn lower_power_form(
    frame: &ConfidenceStatement,
    updates_in_buffer: usize,
    rate: &ConfidenceStatement,
    assumption: Assumption,
) -> Result<RiskBound> {
    lower_inputs(std::slice::from_ref(frame), rate)?;
    if updates_in_buffer == 0 {
        return Err(crate::error::invalid(
            "updates_in_buffer",
            "must be at least 1",
        ));
    }
    let exponent = i32::try_from(updates_in_buffer + 1)
        .map_err(|_| crate::error::invalid("updates_in_buffer", "too large"))?;
    let provenance = Provenance {
        rate: vec![rate.clone()],
        miss: vec![frame.clone()],
    };
    let mut assumptions = vec![Assumption::IndependentErrors];
    if assumption == Assumption::MonotoneErrors {
        assumptions.push(Assumption::MonotoneErrors);
    }
    let joint = UnionRule.joint(&provenance.alphas());
    Ok(RiskBound::compose(
        frame.bound().powi(exponent) * rate.bound(),
        Direction::Lower,
        joint,
        UnionRule.name(),
        assumptions,
        provenance,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Safe,
    Unsafe,
    Inconclusive,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Safe => "safe",
            Outcome::Unsafe => "unsafe",
            Outcome::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub target: SafetyTarget,
    /// The bound the outcome rests on; for an inconclusive verdict, the best
    /// qualifying bound if there is one.
    pub binding_bound: Option<RiskBound>,
}

/// Safe when a qualifying upper bound is at most `epsilon` (inclusive),
/// unsafe when a qualifying lower bound exceeds it, inconclusive otherwise.
pub fn decide(target: &SafetyTarget, bounds: &[RiskBound]) -> Result<Verdict> {
    let qualifying = |dir: Direction| {
        bounds
            .iter()
            .filter(move |b| b.direction == dir && b.qualifies(target))
    };
    let tightest_upper = qualifying(Direction::Upper).min_by(|a, b| a.value.total_cmp(&b.value));
    let tightest_lower = qualifying(Direction::Lower).max_by(|a, b| a.value.total_cmp(&b.value));

    if let (Some(u), Some(l)) = (tightest_upper, tightest_lower) {
        if u.value < l.value {
            return Err(Error::ContradictoryBounds {
                upper: u.value,
                lower: l.value,
            });
        }
    }

    let (outcome, binding) = match (tightest_upper, tightest_lower) {
        (Some(u), _) if u.value <= target.epsilon => (Outcome::Safe, Some(u)),
        (_, Some(l)) if l.value > target.epsilon => (Outcome::Unsafe, Some(l)),
        (u, l) => (Outcome::Inconclusive, u.or(l)),
    };
    Ok(Verdict {
        outcome,
        target: *target,
        binding_bound: binding.cloned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combine::IndependentRule;
    use proptest::prelude::*;

    fn p_up(b: f64, a: f64) -> ConfidenceStatement {
        ConfidenceStatement::probability_upper("miss probability", b, a).unwrap()
    }
    fn r_up(b: f64, a: f64) -> ConfidenceStatement {
        ConfidenceStatement::rate_upper("obstacle rate", b, a).unwrap()
    }
    fn p_lo(b: f64, a: f64) -> ConfidenceStatement {
        ConfidenceStatement::probability_lower("miss probability", b, a).unwrap()
    }
    fn r_lo(b: f64, a: f64) -> ConfidenceStatement {
        ConfidenceStatement::rate_lower("obstacle rate", b, a).unwrap()
    }

    #[test]
    fn worked_example_upper_bound() {
        let b = upper_risk_bound(&p_up(0.001, 0.02), &r_up(0.01, 0.08), &UnionRule).unwrap();
        assert_eq!(b.value, 1e-5);
        assert!((b.confidence - 0.9).abs() < 1e-15);
        assert_eq!(b.assumptions, vec![Assumption::WorstCaseDependence]);
        let t = SafetyTarget::new(1e-5, 0.1).unwrap();
        assert_eq!(decide(&t, &[b]).unwrap().outcome, Outcome::Safe);
    }

    #[test]
    fn zero_miss_bound_absorbs() {
        let b = upper_risk_bound(&p_up(0.0, 0.05), &r_up(123.0, 0.05), &UnionRule).unwrap();
        assert_eq!(b.value, 0.0);
    }

    #[test]
    fn independent_rule_confidence() {
        let b = upper_risk_bound(&p_up(0.001, 0.05), &r_up(0.01, 0.05), &IndependentRule).unwrap();
        assert_eq!(b.value, 1e-5);
        assert!((b.confidence - 0.9025).abs() < 1e-15);
        assert_eq!(b.combination, "independent");
    }

    #[test]
    fn direction_mismatch_is_rejected() {
        assert!(upper_risk_bound(&p_lo(0.001, 0.05), &r_up(0.01, 0.05), &UnionRule).is_err());
        assert!(
            lower_risk_bound_independent(&[p_up(0.5, 0.01)], &r_lo(0.01, 0.01), false).is_err()
        );
        assert!(lower_risk_bound_independent(&[], &r_lo(0.01, 0.01), false).is_err());
        assert!(lower_risk_bound_monotone(&p_lo(0.5, 0.01), 3, &r_up(0.01, 0.01)).is_err());
    }

    #[test]
    fn independent_lower_examples() {
        let b = lower_risk_bound_independent(&[p_lo(0.5, 0.01)], &r_lo(0.01, 0.01), true).unwrap();
        assert!((b.value - 2.5e-3).abs() < 1e-18);
        assert!((b.confidence - 0.98).abs() < 1e-15);
        let b = lower_risk_bound_independent(
            &[p_lo(0.9, 0.01), p_lo(0.0, 0.01)],
            &r_lo(1.0, 0.01),
            true,
        )
        .unwrap();
        assert_eq!(b.value, 0.0);
        let b = lower_risk_bound_independent(
            &[p_lo(0.9, 0.01), p_lo(0.8, 0.01)],
            &r_lo(0.1, 0.01),
            false,
        )
        .unwrap();
        assert!((b.value - 0.072).abs() < 1e-15);
        let m = lower_risk_bound_min_marginal(&p_lo(0.5, 0.01), 1, &r_lo(0.01, 0.01)).unwrap();
        assert!((m.value - 2.5e-3).abs() < 1e-18);
    }

    #[test]
    fn monotone_lower_examples() {
        let b = lower_risk_bound_monotone(&p_lo(0.9, 0.01), 3, &r_lo(0.05, 0.01)).unwrap();
        assert!((b.value - 0.9f64.powi(4) * 0.05).abs() < 1e-15);
        assert!((b.value - 0.0328).abs() < 1e-4);
        assert!(b.assumptions.contains(&Assumption::MonotoneErrors));
        let b = lower_risk_bound_monotone(&p_lo(1.0, 0.01), 7, &r_lo(0.05, 0.01)).unwrap();
        assert_eq!(b.value, 0.05);
        let b = lower_risk_bound_monotone(&p_lo(0.5, 0.01), 13, &r_lo(0.01, 0.01)).unwrap();
        assert!((b.value - 0.5f64.powi(14) * 0.01).abs() < 1e-20);
    }

    #[test]
    fn decide_cases() {
        let t = SafetyTarget::new(1e-5, 0.1).unwrap();
        assert_eq!(decide(&t, &[]).unwrap().outcome, Outcome::Inconclusive);
        assert!(decide(&t, &[]).unwrap().binding_bound.is_none());

        let lower =
            lower_risk_bound_independent(&[p_lo(0.5, 0.025)], &r_lo(0.01, 0.025), true).unwrap();
        let v = decide(&t, std::slice::from_ref(&lower)).unwrap();
        assert_eq!(v.outcome, Outcome::Unsafe);

        // upper bound with too little confidence does not count
        let weak = upper_risk_bound(&p_up(0.0001, 0.1), &r_up(0.01, 0.1), &UnionRule).unwrap();
        assert_eq!(decide(&t, &[weak]).unwrap().outcome, Outcome::Inconclusive);

        let loose = upper_risk_bound(&p_up(0.5, 0.05), &r_up(0.01, 0.05), &UnionRule).unwrap();
        let v = decide(&t, std::slice::from_ref(&loose)).unwrap();
        assert_eq!(v.outcome, Outcome::Inconclusive);
        assert_eq!(v.binding_bound, Some(loose));
    }

    #[test]
    fn contradictory_bounds_error() {
        let t = SafetyTarget::new(1e-3, 0.1).unwrap();
        let up = upper_risk_bound(&p_up(0.001, 0.05), &r_up(0.01, 0.05), &UnionRule).unwrap();
        let lo =
            lower_risk_bound_independent(&[p_lo(0.5, 0.025)], &r_lo(0.01, 0.025), false).unwrap();
        assert!(matches!(
            decide(&t, &[up, lo]),
            Err(Error::ContradictoryBounds { .. })
        ));
    }

    #[test]
    fn vacuous_bounds_never_qualify() {
        let t = SafetyTarget::new(1.0, 0.5).unwrap();
        let b = upper_risk_bound(&p_up(0.001, 0.6), &r_up(0.01, 0.6), &UnionRule).unwrap();
        assert!(b.vacuous);
        assert_eq!(decide(&t, &[b]).unwrap().outcome, Outcome::Inconclusive);
    }

    proptest! {
        #[test]
        fn union_confidence_bookkeeping(a1 in 0.0f64..0.4, a2 in 0.0f64..0.4, p in 0.0f64..1.0, l in 0.0f64..10.0) {
            let b = upper_risk_bound(&p_up(p, a1), &r_up(l, a2), &UnionRule).unwrap();
            prop_assert!((b.confidence - (1.0 - a1 - a2)).abs() < 1e-12);
            prop_assert!(b.confidence <= (1.0 - a1).min(1.0 - a2) + 1e-15);
        }

        #[test]
        fn upper_monotone_in_constituents(p in 0.0f64..0.5, dp in 0.0f64..0.5, l in 0.0f64..1.0, dl in 0.0f64..1.0) {
            let a = upper_risk_bound(&p_up(p, 0.05), &r_up(l, 0.05), &UnionRule).unwrap();
            let b = upper_risk_bound(&p_up(p + dp, 0.05), &r_up(l + dl, 0.05), &UnionRule).unwrap();
            prop_assert!(b.value >= a.value);
        }

        #[test]
        fn lower_nonincreasing_in_updates(q in 0.0f64..1.0, n in 1usize..40) {
            let a = lower_risk_bound_monotone(&p_lo(q, 0.01), n, &r_lo(0.1, 0.01)).unwrap();
            let b = lower_risk_bound_monotone(&p_lo(q, 0.01), n + 1, &r_lo(0.1, 0.01)).unwrap();
            prop_assert!(b.value <= a.value);
        }

        #[test]
        fn consistent_evidence_never_contradicts(q in 0.0f64..1.0, n in 1usize..15, lam in 0.001f64..1.0) {
            // same true marginals on both sides: prod q <= min q
            let up = upper_risk_bound(&p_up(q, 0.0), &r_up(lam, 0.0), &UnionRule).unwrap();
            let lo = lower_risk_bound_min_marginal(&p_lo(q, 0.0), n, &r_lo(lam, 0.0)).unwrap();
            prop_assert!(up.value >= lo.value);
        }
    }
}
