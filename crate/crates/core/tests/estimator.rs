use safety_bounds::evidence::{
    miss_probability_evidence, FrameRecord, GroupedFrames, SamplingDesign,
};
use safety_bounds::odd::DetectionLadder;

const C: f64 = 10.5;

// intervals [9,10), [8,9), [7,8) with exactly the given share of misses
fn population(rates: &[f64], per_interval: usize) -> (DetectionLadder, GroupedFrames) {
    let ladder = DetectionLadder::from_distances(C, 7.0, 1.0).unwrap();
    assert_eq!(ladder.updates_in_buffer(), rates.len());
    let mut frames = Vec::new();
    for (i, &rate) in rates.iter().enumerate() {
        let top = 10.0 - i as f64;
        let misses = (rate * per_interval as f64).round() as usize;
        for f in 0..per_interval {
            let d = top - (f as f64 + 0.5) / per_interval as f64;
            let est = if f < misses { C + 1.0 } else { d };
            frames.push(FrameRecord {
                true_distance: d,
                estimated_distance: est,
            });
        }
    }
    let grouped = GroupedFrames::group(frames, &ladder);
    (ladder, grouped)
}

fn within_3se(k: u64, n: u64, p: f64) -> bool {
    let se = (p * (1.0 - p) / n as f64).sqrt();
    (k as f64 / n as f64 - p).abs() <= 3.0 * se
}

#[test]
fn histogram_matches_population() {
    let (_, frames) = population(&[0.1, 0.2, 0.4], 1000);
    assert_eq!(
        frames.histogram(),
        vec![(1000, 100), (1000, 200), (1000, 400)]
    );
    assert_eq!(frames.out_of_ladder().len(), 0);
}

#[test]
fn uniform_design_averages_the_rates() {
    let (_, frames) = population(&[0.1, 0.2, 0.4], 1000);
    let design = SamplingDesign::uniform(3).unwrap();
    let ev = miss_probability_evidence(&frames, &design, 100_000, 9).unwrap();
    let mean = 0.7 / 3.0;
    assert!(
        within_3se(ev.failures(), ev.trials(), mean),
        "{}",
        ev.fraction()
    );
    assert!(ev.fraction() >= 0.1);
}

#[test]
fn innermost_design_targets_last_interval() {
    let (_, frames) = population(&[0.1, 0.2, 0.4], 1000);
    let design = SamplingDesign::innermost(3).unwrap();
    let ev = miss_probability_evidence(&frames, &design, 100_000, 10).unwrap();
    assert!(
        within_3se(ev.failures(), ev.trials(), 0.4),
        "{}",
        ev.fraction()
    );
}

#[test]
fn estimator_is_seed_deterministic() {
    let (_, frames) = population(&[0.1, 0.2, 0.4], 100);
    let design = SamplingDesign::uniform(3).unwrap();
    let a = miss_probability_evidence(&frames, &design, 5000, 1).unwrap();
    let b = miss_probability_evidence(&frames, &design, 5000, 1).unwrap();
    assert_eq!(a, b);
}

#[test]
fn design_over_empty_interval_is_rejected() {
    let ladder = DetectionLadder::from_distances(C, 7.0, 1.0).unwrap();
    let frames = GroupedFrames::group(
        [FrameRecord {
            true_distance: 9.5,
            estimated_distance: 9.5,
        }],
        &ladder,
    );
    let design = SamplingDesign::uniform(3).unwrap();
    assert!(miss_probability_evidence(&frames, &design, 10, 0).is_err());
}
