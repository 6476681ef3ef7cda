//! Exact binomial and Poisson probabilities.
//!
//! Point masses use Loader's saddle-point form (Stirling remainder plus the
//! deviance term `bd0`), which keeps full relative precision far into the
//! tails. Cumulative probabilities are summed from the boundary term outward
//! in whichever tail is smaller, so no special-function inversion is needed.

use std::f64::consts::PI;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

// ln(n!) - ln(sqrt(2 pi n) (n/e)^n) for n = 0..=15.
#[allow(clippy::excessive_precision)]
const STIRLERR_SMALL: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258,
    0.041_340_695_955_409_294,
    0.027_677_925_684_998_339,
    0.020_790_672_103_765_093,
    0.016_644_691_189_821_192,
    0.013_876_128_823_070_748,
    0.011_896_709_945_891_770,
    0.010_411_265_261_972_096,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_871,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_530,
    0.006_408_994_188_004_207,
    0.005_951_370_112_758_848,
    0.005_554_733_551_962_801,
];

fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 && n.fract() == 0.0 {
        return STIRLERR_SMALL[n as usize];
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / np) + np - x`, evaluated without cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// P(X = k) for X ~ Binomial(n, p).
pub(crate) fn binom_pmf(k: u64, n: u64, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let q = 1.0 - p;
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let (x, nf) = (k as f64, n as f64);
    if k == 0 {
        if n == 0 {
            return 1.0;
        }
        let lc = if p < 0.1 {
            -bd0(nf, nf * q) - nf * p
        } else {
            nf * q.ln()
        };
        return lc.exp();
    }
    if k == n {
        let lc = if q < 0.1 {
            -bd0(nf, nf * p) - nf * q
        } else {
            nf * p.ln()
        };
        return lc.exp();
    }
    let lc = stirlerr(nf) - stirlerr(x) - stirlerr(nf - x) - bd0(x, nf * p) - bd0(nf - x, nf * q);
    let lf = LN_2PI + x.ln() + (-x / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// P(X = k) for X ~ Poisson(mu).
pub(crate) fn pois_pmf(k: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k == 0 {
        return (-mu).exp();
    }
    let x = k as f64;
    (-stirlerr(x) - bd0(x, mu)).exp() / (2.0 * PI * x).sqrt()
}

const NEGLIGIBLE: f64 = 1e-18;

/// Sums `start, start * r(start), ...` where `next(i, term)` yields the term
/// after index `i`, stopping once terms stop contributing.
fn sum_terms(
    start_index: u64,
    start: f64,
    mut next: impl FnMut(u64, f64) -> Option<(u64, f64)>,
) -> f64 {
    let mut total = start;
    let mut term = start;
    let mut i = start_index;
    while let Some((j, t)) = next(i, term) {
        total += t;
        if t <= NEGLIGIBLE * total || t == 0.0 {
            break;
        }
        term = t;
        i = j;
    }
    total
}

/// Sum of masses k, k-1, ..., 0 for Binomial(n, p).
fn binom_sum_down(k: u64, n: u64, p: f64) -> f64 {
    let ratio = (1.0 - p) / p;
    let nf = n as f64;
    sum_terms(k, binom_pmf(k, n, p), |i, t| {
        (i > 0).then(|| (i - 1, t * (i as f64) / (nf - i as f64 + 1.0) * ratio))
    })
}

/// Sum of masses k, k+1, ..., n for Binomial(n, p).
fn binom_sum_up(k: u64, n: u64, p: f64) -> f64 {
    let ratio = p / (1.0 - p);
    let nf = n as f64;
    sum_terms(k, binom_pmf(k, n, p), |i, t| {
        (i < n).then(|| (i + 1, t * (nf - i as f64) / (i as f64 + 1.0) * ratio))
    })
}

/// P(X <= k) for X ~ Binomial(n, p).
pub fn binom_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    if (k as f64) < n as f64 * p {
        binom_sum_down(k, n, p).min(1.0)
    } else {
        (1.0 - binom_sum_up(k + 1, n, p)).clamp(0.0, 1.0)
    }
}

/// P(X >= k) for X ~ Binomial(n, p).
pub fn binom_sf(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    if (k as f64) > n as f64 * p {
        binom_sum_up(k, n, p).min(1.0)
    } else {
        (1.0 - binom_sum_down(k - 1, n, p)).clamp(0.0, 1.0)
    }
}

fn pois_sum_down(k: u64, mu: f64) -> f64 {
    sum_terms(k, pois_pmf(k, mu), |i, t| {
        (i > 0).then(|| (i - 1, t * (i as f64) / mu))
    })
}

fn pois_sum_up(k: u64, mu: f64) -> f64 {
    sum_terms(k, pois_pmf(k, mu), |i, t| {
        Some((i + 1, t * mu / (i as f64 + 1.0)))
    })
}

/// P(X <= k) for X ~ Poisson(mu).
pub fn pois_cdf(k: u64, mu: f64) -> f64 {
    if mu <= 0.0 {
        return 1.0;
    }
    if (k as f64) < mu {
        pois_sum_down(k, mu).min(1.0)
    } else {
        (1.0 - pois_sum_up(k + 1, mu)).clamp(0.0, 1.0)
    }
}

/// P(X >= k) for X ~ Poisson(mu).
pub fn pois_sf(k: u64, mu: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if mu <= 0.0 {
        return 0.0;
    }
    if (k as f64) > mu {
        pois_sum_up(k, mu).min(1.0)
    } else {
        (1.0 - pois_sum_down(k - 1, mu)).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_binom_pmf(k: u64, n: u64, p: f64) -> f64 {
        // product form, fine for small n
        let mut c = 1.0;
        for i in 0..k {
            c *= (n - i) as f64 / (i + 1) as f64;
        }
        c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
    }

    #[test]
    fn pmf_matches_product_form() {
        for n in [1u64, 2, 7, 20, 60] {
            for &p in &[0.01, 0.3, 0.5, 0.93] {
                for k in 0..=n {
                    let a = binom_pmf(k, n, p);
                    let b = naive_binom_pmf(k, n, p);
                    assert!(
                        (a - b).abs() <= 1e-13 * b.max(1e-300),
                        "n={n} k={k} p={p}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn cdf_and_sf_are_complementary() {
        for &(n, p) in &[(100u64, 0.05), (15922, 0.001), (40, 0.5), (3, 0.9)] {
            for k in 0..=n.min(60) {
                let lo = binom_cdf(k, n, p);
                let hi = binom_sf(k + 1, n, p);
                assert!((lo + hi - 1.0).abs() < 1e-13, "n={n} p={p} k={k}");
            }
        }
        for &mu in &[0.01, 1.0, 7.9, 120.0] {
            for k in 0..200 {
                assert!((pois_cdf(k, mu) + pois_sf(k + 1, mu) - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn poisson_pmf_small_cases() {
        assert!((pois_pmf(0, 2.0) - (-2.0f64).exp()).abs() < 1e-16);
        let expect = 2.0f64.powi(3) * (-2.0f64).exp() / 6.0;
        assert!((pois_pmf(3, 2.0) - expect).abs() < 1e-15);
        // deep tail still positive and finite
        let t = pois_pmf(2000, 10.0);
        assert!(t >= 0.0 && t.is_finite());
        assert!(pois_cdf(5, 2000.0) < 1e-300);
    }

    #[test]
    fn zero_failure_closed_forms() {
        let n = 59;
        let p = 0.0493;
        assert!((binom_cdf(0, n, p) - (1.0 - p).powi(59)).abs() < 1e-15);
        assert!((pois_cdf(0, 2.5) - (-2.5f64).exp()).abs() < 1e-16);
    }
}
