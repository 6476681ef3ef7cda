//! Power of the exact one-sided tests and minimal data requirements.
//!
//! A test "succeeds" when the exact upper confidence bound falls strictly
//! below the threshold. For a fixed amount of data that happens exactly when
//! the observed count is at most the critical count `k*`, so the power at an
//! alternative is a lower-tail probability evaluated at `k*`.
//!
//! Power is a sawtooth in the amount of data: it drops while `k*` stays put
//! and jumps up when `k*` increments. The searches below therefore walk the
//! plateaus of `k*` in order. Each plateau starts where the tail probability
//! at the threshold (which *is* monotone in the data size) first dips below
//! alpha, and power is largest at the start of a plateau, so the first
//! plateau whose start clears the power goal yields the minimum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combine::ConfidenceCombiner;
use crate::error::{check_alpha, invalid, Error, Result};
use crate::tails;

pub const DEFAULT_POWER_GOAL: f64 = 0.8;
pub const DEFAULT_SEARCH_CAP: f64 = 1e8;
/// Exposures are reported on this grid (km).
pub const EXPOSURE_RESOLUTION: f64 = 0.01;

/// Which exact test a plan refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// Miss probability from Bernoulli trials.
    Binomial,
    /// Obstacle rate from kilometres of exposure.
    Poisson,
}

impl TestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::Binomial => "binomial",
            TestKind::Poisson => "poisson",
        }
    }
}

/// Threshold to certify, alternative at which power is evaluated, and the
/// test's significance level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanTarget {
    pub threshold: f64,
    pub alpha: f64,
    pub alternative: f64,
    pub power_goal: f64,
}

impl PlanTarget {
    pub fn new(threshold: f64, alpha: f64, alternative: f64) -> Result<Self> {
        Self::with_goal(threshold, alpha, alternative, DEFAULT_POWER_GOAL)
    }

    pub fn with_goal(
        threshold: f64,
        alpha: f64,
        alternative: f64,
        power_goal: f64,
    ) -> Result<Self> {
        let t = Self {
            threshold,
            alpha,
            alternative,
            power_goal,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(invalid("threshold", "must be positive"));
        }
        if !(self.alternative > 0.0 && self.alternative < self.threshold) {
            return Err(invalid(
                "alternative",
                format!(
                    "{} must lie strictly between 0 and the threshold {}",
                    self.alternative, self.threshold
                ),
            ));
        }
        if !(self.power_goal > 0.0 && self.power_goal < 1.0) {
            return Err(invalid("power_goal", "must lie in (0, 1)"));
        }
        Ok(())
    }

    fn validate_binomial(&self) -> Result<()> {
        self.validate()?;
        if self.threshold >= 1.0 {
            return Err(invalid(
                "threshold",
                "a probability threshold must be below 1",
            ));
        }
        Ok(())
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeResult {
    /// Trials (integral) or kilometres.
    pub size: f64,
    pub achieved_power: f64,
    /// Largest observed count that still certifies the threshold.
    pub critical_count: u64,
}

impl SampleSizeResult {
    /// The size as a trial count; exposures are truncated.
    pub fn trials(&self) -> u64 {
        self.size as u64
    }
}

/// Largest `k` with `P(Bin(n, threshold) <= k) < alpha`, i.e. the largest
/// count whose exact upper bound is strictly below the threshold.
pub fn binomial_critical_count(n: u64, threshold: f64, alpha: f64) -> Option<u64> {
    if tails::binom_cdf(0, n, threshold) >= alpha {
        return None;
    }
    let mut k = 0;
    while k < n && tails::binom_cdf(k + 1, n, threshold) < alpha {
        k += 1;
    }
    Some(k)
}

/// Poisson analogue of [`binomial_critical_count`] for exposure `m` km.
pub fn poisson_critical_count(m: f64, threshold: f64, alpha: f64) -> Option<u64> {
    let mu = threshold * m;
    if tails::pois_cdf(0, mu) >= alpha {
        return None;
    }
    let mut k = 0;
    while tails::pois_cdf(k + 1, mu) < alpha {
        k += 1;
    }
    Some(k)
}

/// Probability that `n` trials certify `p < threshold` when the true miss
/// probability is `target.alternative`.
pub fn binomial_power(n: u64, target: &PlanTarget) -> Result<f64> {
    target.validate_binomial()?;
    Ok(binomial_critical_count(n, target.threshold, target.alpha)
        .map_or(0.0, |k| tails::binom_cdf(k, n, target.alternative)))
}

/// Probability that `m` km of exposure certify `lambda < threshold` when the
/// true rate is `target.alternative`.
pub fn poisson_power(m: f64, target: &PlanTarget) -> Result<f64> {
    target.validate()?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(invalid("exposure", format!("{m} km is not positive")));
    }
    Ok(poisson_critical_count(m, target.threshold, target.alpha)
        .map_or(0.0, |k| tails::pois_cdf(k, target.alternative * m)))
}

/// Smallest `n >= from` with `P(Bin(n, threshold) <= k) < alpha`.
fn plateau_start(k: u64, from: u64, target: &PlanTarget, cap: u64) -> Option<u64> {
    let below = |n: u64| tails::binom_cdf(k, n, target.threshold) < target.alpha;
    let mut lo = from.max(k + 1);
    if below(lo) {
        return Some(lo);
    }
    let mut hi = lo;
    loop {
        if hi >= cap {
            return None;
        }
        hi = hi.saturating_mul(2).min(cap);
        if below(hi) {
            break;
        }
        lo = hi;
    }
    // below(lo) false, below(hi) true
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Smallest number of trials whose test reaches the power goal.
pub fn min_trials(target: &PlanTarget) -> Result<SampleSizeResult> {
    min_trials_capped(target, DEFAULT_SEARCH_CAP as u64)
}

pub fn min_trials_capped(target: &PlanTarget, cap: u64) -> Result<SampleSizeResult> {
    target.validate_binomial()?;
    let mut k = 0u64;
    let mut from = 1u64;
    loop {
        let Some(n) = plateau_start(k, from, target, cap) else {
            return Err(Error::Infeasible(format!(
                "no trial count up to {cap} reaches power {} at {}",
                target.power_goal, target.alternative
            )));
        };
        let mut kstar = k;
        while tails::binom_cdf(kstar + 1, n, target.threshold) < target.alpha {
            kstar += 1;
        }
        let power = tails::binom_cdf(kstar, n, target.alternative);
        if power >= target.power_goal {
            return Ok(SampleSizeResult {
                size: n as f64,
                achieved_power: power,
                critical_count: kstar,
            });
        }
        k = kstar + 1;
        from = n + 1;
    }
}

/// Reference search: evaluates the power at every `n` from 1 upward.
/// Quadratic-ish and only suited to modest sizes; kept as a cross-check
/// for [`min_trials`].
pub fn min_trials_by_scan(target: &PlanTarget, cap: u64) -> Result<SampleSizeResult> {
    target.validate_binomial()?;
    let mut kstar: Option<u64> = None;
    for n in 1..=cap {
        // k* never decreases as n grows
        let mut next = kstar.map_or(0, |k| k + 1);
        while next <= n && tails::binom_cdf(next, n, target.threshold) < target.alpha {
            kstar = Some(next);
            next += 1;
        }
        if let Some(k) = kstar {
            let power = tails::binom_cdf(k, n, target.alternative);
            if power >= target.power_goal {
                return Ok(SampleSizeResult {
                    size: n as f64,
                    achieved_power: power,
                    critical_count: k,
                });
            }
        }
    }
    Err(Error::Infeasible(format!("scan exhausted at {cap} trials")))
}

/// Poisson mean at which `P(X <= k) = alpha`.
fn critical_mean(k: u64, alpha: f64) -> f64 {
    let below = |mu: f64| tails::pois_cdf(k, mu) < alpha;
    let mut hi = 2.0 * (k as f64 + 1.0);
    while !below(hi) {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Smallest exposure, on the 0.01 km grid, whose test reaches the power goal.
pub fn min_exposure(target: &PlanTarget) -> Result<SampleSizeResult> {
    min_exposure_capped(target, DEFAULT_SEARCH_CAP)
}

pub fn min_exposure_capped(target: &PlanTarget, cap_km: f64) -> Result<SampleSizeResult> {
    target.validate()?;
    let mut k = 0u64;
    loop {
        // k* >= k exactly when m exceeds this infimum
        let infimum = critical_mean(k, target.alpha) / target.threshold;
        if infimum > cap_km {
            return Err(Error::Infeasible(format!(
                "no exposure up to {cap_km} km reaches power {} at {}",
                target.power_goal, target.alternative
            )));
        }
        let mut m = (infimum / EXPOSURE_RESOLUTION).ceil() * EXPOSURE_RESOLUTION;
        if m <= infimum {
            m += EXPOSURE_RESOLUTION;
        }
        let kstar = poisson_critical_count(m, target.threshold, target.alpha)
            .expect("exposure above the plateau start certifies some count");
        let power = tails::pois_cdf(kstar, target.alternative * m);
        if power >= target.power_goal {
            return Ok(SampleSizeResult {
                size: m,
                achieved_power: power,
                critical_count: kstar,
            });
        }
        k = kstar + 1;
    }
}

/// Plan for one test family with alpha left open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyTarget {
    pub threshold: f64,
    pub alternative: f64,
    pub power_goal: f64,
}

impl FamilyTarget {
    pub fn at(&self, alpha: f64) -> Result<PlanTarget> {
        PlanTarget::with_goal(self.threshold, alpha, self.alternative, self.power_goal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub trials: f64,
    pub km: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            trials: 1.0,
            km: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSplit {
    pub alpha_binomial: f64,
    pub alpha_poisson: f64,
    pub trials: SampleSizeResult,
    pub exposure: SampleSizeResult,
    pub cost: f64,
}

/// Sample sizes for a fixed split.
pub fn plan_split(
    alpha_binomial: f64,
    alpha_poisson: f64,
    binomial: &FamilyTarget,
    poisson: &FamilyTarget,
    weights: CostWeights,
) -> Result<AlphaSplit> {
    let trials = min_trials(&binomial.at(alpha_binomial)?)?;
    let exposure = min_exposure(&poisson.at(alpha_poisson)?)?;
    Ok(AlphaSplit {
        alpha_binomial,
        alpha_poisson,
        trials,
        exposure,
        cost: weights.trials * trials.size + weights.km * exposure.size,
    })
}

/// Grid search over the binomial share of the confidence budget minimising
/// `w_n n + w_m m`. The Poisson share is whatever the combination rule leaves.
pub fn optimize_alpha_split(
    total_alpha: f64,
    binomial: &FamilyTarget,
    poisson: &FamilyTarget,
    combiner: &dyn ConfidenceCombiner,
    weights: CostWeights,
    resolution: f64,
) -> Result<AlphaSplit> {
    check_alpha(total_alpha)?;
    if !(weights.trials >= 0.0 && weights.km >= 0.0) || weights.trials + weights.km == 0.0 {
        return Err(invalid("weights", "must be nonnegative and not both zero"));
    }
    if !(resolution > 0.0 && resolution < total_alpha) {
        return Err(invalid("resolution", "must lie in (0, total alpha)"));
    }
    let steps = (total_alpha / resolution).ceil() as u64;
    let grid: Vec<(f64, f64)> = (1..steps)
        .map(|i| i as f64 * resolution)
        .filter(|&a1| a1 < total_alpha)
        .map(|a1| (a1, combiner.complement(total_alpha, a1)))
        .filter(|&(_, a2)| a2 > 0.0)
        .collect();

    let results: Vec<Result<AlphaSplit>> = grid
        .par_iter()
        .map(|&(a1, a2)| plan_split(a1, a2, binomial, poisson, weights))
        .collect();

    let mut best: Option<AlphaSplit> = None;
    for split in results.into_iter().flatten() {
        if best.is_none_or(|b| split.cost < b.cost) {
            best = Some(split);
        }
    }
    best.ok_or_else(|| Error::Infeasible(format!("no feasible split of alpha = {total_alpha}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub alternative: f64,
    pub size: f64,
    pub achieved_power: f64,
    pub critical_count: u64,
}

/// Minimal sizes across a grid of alternatives; rows follow the grid order.
pub fn sample_size_curve(
    kind: TestKind,
    threshold: f64,
    alpha: f64,
    power_goal: f64,
    grid: &[f64],
) -> Result<Vec<CurveRow>> {
    grid.par_iter()
        .map(|&alternative| {
            let target = PlanTarget::with_goal(threshold, alpha, alternative, power_goal)?;
            let r = match kind {
                TestKind::Binomial => min_trials(&target)?,
                TestKind::Poisson => min_exposure(&target)?,
            };
            Ok(CurveRow {
                alternative,
                size: r.size,
                achieved_power: r.achieved_power,
                critical_count: r.critical_count,
            })
        })
        .collect()
}

/// `count` evenly spaced alternatives from `lo_frac` to `hi_frac` of the threshold.
pub fn alternative_grid(threshold: f64, lo_frac: f64, hi_frac: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo_frac * threshold],
        _ => (0..count)
            .map(|i| {
                let f = lo_frac + (hi_frac - lo_frac) * i as f64 / (count - 1) as f64;
                // keep grid values tidy for CSV output
                (f * threshold * 1e12).round() / 1e12
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intervals::{binomial_upper_bound, BinomialEvidence};

    fn table_target(alpha: f64) -> PlanTarget {
        PlanTarget::new(0.001, alpha, 0.0005).unwrap()
    }

    #[test]
    fn single_trial_cannot_certify() {
        let t = table_target(0.08);
        assert_eq!(binomial_critical_count(1, 0.001, 0.08), None);
        assert_eq!(binomial_power(1, &t).unwrap(), 0.0);
    }

    #[test]
    fn critical_count_agrees_with_bound_route() {
        for &n in &[2600u64, 15922, 19439, 26493] {
            for &alpha in &[0.08, 0.02, 0.005] {
                let k = binomial_critical_count(n, 0.001, alpha);
                // via the exact upper bound: largest k with p_u(k) < threshold
                let mut via_bound = None;
                for k2 in 0..40 {
                    let ev = BinomialEvidence::new(k2, n).unwrap();
                    if binomial_upper_bound(ev, alpha).unwrap().bound() < 0.001 {
                        via_bound = Some(k2);
                    }
                }
                assert_eq!(k, via_bound, "n={n} alpha={alpha}");
            }
        }
    }

    #[test]
    fn table_row_is_minimal_for_trials() {
        let t = table_target(0.08);
        assert!(binomial_power(15922, &t).unwrap() >= 0.8);
        assert!(binomial_power(15921, &t).unwrap() < 0.8);
        let r = min_trials(&t).unwrap();
        assert_eq!(r.trials(), 15922);
        assert_eq!(r.critical_count, 10);
    }

    #[test]
    fn scan_and_plateau_search_agree() {
        let t = table_target(0.08);
        assert_eq!(
            min_trials_by_scan(&t, 20_000).unwrap(),
            min_trials(&t).unwrap()
        );
        // brute force over n = 1..200 for a coarse target
        let t = PlanTarget::new(0.5, 0.05, 0.01).unwrap();
        let brute = (1..=200u64)
            .find(|&n| binomial_power(n, &t).unwrap() >= 0.8)
            .unwrap();
        assert_eq!(min_trials(&t).unwrap().trials(), brute);
    }

    #[test]
    fn exposure_infimum_properties() {
        let t = table_target(0.02);
        assert!(poisson_power(26497.63, &t).unwrap() >= 0.8);
        assert!(poisson_power(26490.0, &t).unwrap() < 0.8);
        assert!(poisson_power(26497.62, &t).unwrap() < 0.8);
        let r = min_exposure(&t).unwrap();
        assert!((r.size - 26497.63).abs() < 1e-6);
        assert_eq!(r.critical_count, 16);
    }

    #[test]
    fn exposure_matches_dense_grid() {
        let t = PlanTarget::new(1.0, 0.05, 0.1).unwrap();
        let r = min_exposure(&t).unwrap();
        let steps = (r.size / EXPOSURE_RESOLUTION).round() as u64;
        let first = (1..=steps + 5)
            .map(|i| i as f64 * EXPOSURE_RESOLUTION)
            .find(|&m| poisson_power(m, &t).unwrap() >= 0.8)
            .unwrap();
        assert!((first - r.size).abs() < 1e-9, "{first} vs {}", r.size);
    }

    #[test]
    fn tiny_exposure_has_no_power() {
        let t = table_target(0.02);
        assert_eq!(poisson_power(1e-9, &t).unwrap(), 0.0);
        assert!(poisson_power(0.0, &t).is_err());
    }

    #[test]
    fn search_cap_reports_infeasible() {
        let t = table_target(0.08);
        assert!(matches!(
            min_trials_capped(&t, 1000),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            min_exposure_capped(&t, 1000.0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn invalid_targets() {
        assert!(PlanTarget::new(0.001, 0.08, 0.002).is_err());
        assert!(PlanTarget::new(0.001, 1.2, 0.0005).is_err());
        assert!(PlanTarget::with_goal(0.001, 0.08, 0.0005, 1.0).is_err());
        let t = PlanTarget::new(2.0, 0.05, 1.0).unwrap();
        assert!(binomial_power(10, &t).is_err());
    }

    #[test]
    fn curve_edge_cases() {
        assert!(sample_size_curve(TestKind::Binomial, 0.001, 0.08, 0.8, &[])
            .unwrap()
            .is_empty());
        let rows = sample_size_curve(TestKind::Binomial, 0.001, 0.08, 0.8, &[0.0005]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].size, 15922.0);
        let g = alternative_grid(0.001, 0.1, 0.9, 17);
        assert_eq!(g.first(), Some(&0.0001));
        assert_eq!(g.last(), Some(&0.0009));
    }

    #[test]
    fn size_of_test_is_at_most_alpha() {
        for n in [50u64, 500, 5000, 15922] {
            let t = PlanTarget::new(0.001, 0.08, 0.0005).unwrap();
            let at_threshold = binomial_critical_count(n, t.threshold, t.alpha)
                .map_or(0.0, |k| tails::binom_cdf(k, n, t.threshold));
            assert!(at_threshold <= t.alpha);
        }
        for m in [100.0, 5000.0, 26497.63] {
            let at_threshold = poisson_critical_count(m, 0.001, 0.02)
                .map_or(0.0, |k| tails::pois_cdf(k, 0.001 * m));
            assert!(at_threshold <= 0.02);
        }
    }
}
