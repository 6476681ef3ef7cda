use safety_bounds::odd::OddSpec;
use safety_bounds::simulator::{
    analytic_checks, run, validate_bounds, ModelParams, ModelRegistry, Relation, SimulationConfig,
};

fn spec() -> OddSpec {
    OddSpec {
        route_length_km: 1000.0,
        speed: 15.0,
        perception_frequency: 10.0,
        brake_threshold: 34.0,
        surface_friction: 0.8,
        obstacle_intensity_prior: Some(1.0),
    }
}

fn config(model: &str, params: &ModelParams, sessions: u64, seed: u64) -> SimulationConfig {
    let m = ModelRegistry::default().build(model, params, 13).unwrap();
    SimulationConfig::new(spec(), m, sessions, seed)
}

#[test]
fn sandwich_holds_for_every_model() {
    let reg = ModelRegistry::default();
    for name in reg.names() {
        let mut params = ModelParams::constant(0.3);
        if name == "ar1" {
            params.rho = 0.8;
        }
        let cfg = config(name, &params, 20, 3);
        let report = run(&cfg, None).unwrap();
        let ladder = cfg.validate().unwrap();
        let rows = validate_bounds(&report, &analytic_checks(&cfg.model, &ladder, false));
        assert!(!rows.is_empty());
        for r in &rows {
            assert!(r.pass, "{name}: {:?}", r);
        }
        let up = rows
            .iter()
            .find(|r| r.check.relation == Relation::AtMost)
            .unwrap();
        let min_q = cfg.model.guaranteed().iter().copied().fold(1.0, f64::min);
        assert_eq!(up.check.value, min_q);
    }
}

#[test]
fn phase_offset_mixture_matches() {
    let mut cfg = config("independent", &ModelParams::constant(0.7), 20, 8);
    cfg.include_phase_offset = true;
    let report = run(&cfg, None).unwrap();
    let ladder = cfg.validate().unwrap();
    let checks = analytic_checks(&cfg.model, &ladder, true);
    let exact = checks
        .iter()
        .find(|c| c.relation == Relation::Equals)
        .unwrap();
    assert!(exact.value < 0.7f64.powi(13) && exact.value > 0.7f64.powi(14));
    for r in validate_bounds(&report, &checks) {
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn monotone_scaling_lower_bound() {
    let params = ModelParams {
        scale: Some(safety_bounds::simulator::ScaleLaw::Geometric { ratio: 0.97 }),
        ..ModelParams::constant(0.9)
    };
    let cfg = config("distance_scaled", &params, 20, 4);
    let report = run(&cfg, None).unwrap();
    let q_last = *cfg.model.guaranteed().last().unwrap();
    let p = report.per_approach_collision_prob.unwrap();
    // monotone errors: every update misses at least as often as the last one
    assert!(p.value >= q_last.powi(14) - 3.0 * p.std_error);
}

#[test]
fn same_seed_same_report_any_threads() {
    let cfg = config("comonotone", &ModelParams::constant(0.3), 12, 42);
    let a = run(&cfg, Some(1)).unwrap();
    let b = run(&cfg, Some(3)).unwrap();
    let c = run(&cfg, Some(8)).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(b.to_csv(), c.to_csv());
    let other = run(
        &config("comonotone", &ModelParams::constant(0.3), 12, 43),
        Some(2),
    )
    .unwrap();
    assert_ne!(a.to_csv(), other.to_csv());
}
