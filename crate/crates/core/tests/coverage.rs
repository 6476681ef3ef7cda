use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use safety_bounds::intervals::{
    binomial_lower_bound, binomial_upper_bound, poisson_rate_lower_bound, poisson_rate_upper_bound,
    BinomialEvidence, PoissonEvidence,
};

const RUNS: usize = 2000;

fn floor_with_slack(nominal: f64) -> f64 {
    nominal - 3.0 * (nominal * (1.0 - nominal) / RUNS as f64).sqrt()
}

#[test]
fn binomial_upper_bound_covers() {
    let (p, n, alpha) = (0.0008, 15922u64, 0.08);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let dist = Binomial::new(n, p).unwrap();
    let covered = (0..RUNS)
        .filter(|_| {
            let k = dist.sample(&mut rng);
            binomial_upper_bound(BinomialEvidence::new(k, n).unwrap(), alpha)
                .unwrap()
                .bound()
                > p
        })
        .count();
    let rate = covered as f64 / RUNS as f64;
    assert!(rate >= floor_with_slack(1.0 - alpha), "coverage {rate}");
}

#[test]
fn poisson_upper_bound_covers() {
    let (lambda, km, alpha) = (0.0008, 15924.71, 0.08);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let dist = Poisson::new(lambda * km).unwrap();
    let covered = (0..RUNS)
        .filter(|_| {
            let k = dist.sample(&mut rng) as u64;
            poisson_rate_upper_bound(PoissonEvidence::new(k, km).unwrap(), alpha)
                .unwrap()
                .bound()
                > lambda
        })
        .count();
    let rate = covered as f64 / RUNS as f64;
    assert!(rate >= floor_with_slack(1.0 - alpha), "coverage {rate}");
}

#[test]
fn lower_bounds_cover() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (p, n, alpha) = (0.3, 200u64, 0.05);
    let dist = Binomial::new(n, p).unwrap();
    let covered = (0..RUNS)
        .filter(|_| {
            let k = dist.sample(&mut rng);
            binomial_lower_bound(BinomialEvidence::new(k, n).unwrap(), alpha)
                .unwrap()
                .bound()
                < p
        })
        .count();
    assert!(covered as f64 / RUNS as f64 >= floor_with_slack(1.0 - alpha));

    let (lambda, km) = (0.02, 500.0);
    let dist = Poisson::new(lambda * km).unwrap();
    let covered = (0..RUNS)
        .filter(|_| {
            let k = dist.sample(&mut rng) as u64;
            poisson_rate_lower_bound(PoissonEvidence::new(k, km).unwrap(), alpha)
                .unwrap()
                .bound()
                < lambda
        })
        .count();
    assert!(covered as f64 / RUNS as f64 >= floor_with_slack(1.0 - alpha));
}
