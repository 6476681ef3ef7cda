use proptest::prelude::*;
use safety_bounds::evidence::{obstacle_rate_evidence, read_segments, SegmentObservation};
use safety_bounds::intervals::poisson_rate_upper_bound;

fn seg(length_km: f64, obstacle_count: u64) -> SegmentObservation {
    SegmentObservation {
        length_km,
        obstacle_count,
    }
}

#[test]
fn pooled_rate() {
    let ev = obstacle_rate_evidence(&[seg(100.0, 2), seg(300.0, 1), seg(600.0, 0)]).unwrap();
    assert_eq!(ev.count(), 3);
    assert!((ev.exposure_km() - 1000.0).abs() < 1e-9);
    assert!((ev.rate() - 0.003).abs() < 1e-15);
}

#[test]
fn csv_round() {
    let text = "length_km,obstacle_count\n12.5,1\n7.5,0\n";
    let segs = read_segments(text.as_bytes(), "mem").unwrap();
    assert_eq!(segs, vec![seg(12.5, 1), seg(7.5, 0)]);
    let bad = "length_km,obstacle_count\n12.5,1\n-3,0\n";
    let err = read_segments(bad.as_bytes(), "mem")
        .unwrap_err()
        .to_string();
    assert!(err.contains('3'), "{err}");
    assert!(read_segments("km,count\n1,0\n".as_bytes(), "mem").is_err());
}

proptest! {
    // splitting a road into more segments changes nothing
    #[test]
    fn split_invariance(lengths in prop::collection::vec(0.5f64..50.0, 1..8), counts in prop::collection::vec(0u64..4, 8)) {
        let segs: Vec<_> = lengths.iter().zip(&counts).map(|(&l, &c)| seg(l, c)).collect();
        let mut split = Vec::new();
        for s in &segs {
            split.push(seg(s.length_km / 2.0, s.obstacle_count));
            split.push(seg(s.length_km / 2.0, 0));
        }
        let a = obstacle_rate_evidence(&segs).unwrap();
        let b = obstacle_rate_evidence(&split).unwrap();
        prop_assert_eq!(a.count(), b.count());
        let ua = poisson_rate_upper_bound(a, 0.05).unwrap().bound();
        let ub = poisson_rate_upper_bound(b, 0.05).unwrap().bound();
        prop_assert!((ua - ub).abs() <= 1e-9 * ua.max(1e-12));
    }
}
