use cutlab_core::combinatorics::{separated_matching, PointSet};
use cutlab_core::cutpoints::{apply_surgery, event_a, force_cutpoint, origin_ball, EventSpec};
use cutlab_core::estimators::{wilson, DistanceTally, EventTally};
use cutlab_core::harness::config::{parse_point_list, Config};
use cutlab_core::harness::manifest::Manifest;
use cutlab_core::harness::parallel::{run_parallel, Tally};
use cutlab_core::lattice::{sample_configuration, BoxSpec, PercolationSample};
use cutlab_core::metric::{chemical_distance, grow_ball};
use proptest::prelude::*;

fn sample_strategy() -> impl Strategy<Value = PercolationSample> {
    (2usize..=3, 1u32..=6, 0.0f64..=1.0, any::<u64>()).prop_map(|(d, l, p, seed)| {
        sample_configuration(&BoxSpec::new(d, l).unwrap(), p, seed).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sample_bytes_round_trip(sample in sample_strategy()) {
        let bytes = sample.to_bytes();
        prop_assert_eq!(PercolationSample::from_bytes(&bytes).unwrap(), sample);
    }

    #[test]
    fn corrupted_samples_are_rejected_or_consistent(sample in sample_strategy(), pos in any::<prop::sample::Index>(), flip in 1u8..=255) {
        let mut bytes = sample.to_bytes();
        let i = pos.index(bytes.len());
        bytes[i] ^= flip;
        if let Ok(other) = PercolationSample::from_bytes(&bytes) {
            prop_assert_eq!(other.to_bytes(), bytes);
        }
    }

    #[test]
    fn decoders_survive_arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = PercolationSample::from_bytes(&bytes);
        let _ = Config::from_bytes(&bytes);
        let _ = Manifest::from_bytes(&bytes);
        if let Ok(text) = std::str::from_utf8(&bytes) {
            let _ = parse_point_list::<i64>(text);
        }
    }

    #[test]
    fn point_lists_round_trip(points in prop::collection::vec(prop::collection::vec(-1000i64..1000, 3), 1..6)) {
        let text: Vec<String> =
            points.iter().map(|p| p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")).collect();
        prop_assert_eq!(parse_point_list::<i64>(&text.join(" ; ")).unwrap(), points);
    }

    #[test]
    fn chemical_distance_dominates_l1(sample in sample_strategy(), a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
        let spec = sample.spec();
        let (x, y) = (a.index(spec.vertex_count()), b.index(spec.vertex_count()));
        let dist = chemical_distance(&sample, x, y).unwrap();
        let l1: i64 = spec.coords_of(x).iter().zip(spec.coords_of(y)).map(|(p, q)| (p - q).abs()).sum();
        if let Some(v) = dist.value {
            prop_assert!(v as i64 >= l1);
        }
        prop_assert_eq!(dist.value, chemical_distance(&sample, y, x).unwrap().value);
    }

    #[test]
    fn later_cutpoint_events_imply_earlier_ones(seed in any::<u64>(), p in 0.5f64..0.9, s in 0.0f64..1.0, ds in 0.0f64..1.0) {
        let sample = sample_configuration(&BoxSpec::new(2, 8).unwrap(), p, seed).unwrap();
        let x = vec![0.25, 0.0];
        let early = event_a(&sample, &EventSpec::new(s, x.clone(), 8)).unwrap();
        let late = event_a(&sample, &EventSpec::new(s + ds, x, 8)).unwrap();
        if late.is_hit() {
            prop_assert!(early.is_hit());
        }
    }

    #[test]
    fn surgery_never_shortens_distances(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let spec = BoxSpec::new(2, 10).unwrap();
        let sample = sample_configuration(&spec, 0.7, seed).unwrap();
        let (ball, cap) = origin_ball(&sample, None).unwrap();
        let t = (pick.index(cap as usize) as u32 + 1).min(ball.max_time());
        let layer = ball.layer(t);
        prop_assume!(!layer.is_empty());
        let w = layer[pick.index(layer.len())];
        if let Ok(plan) = force_cutpoint(&sample, &ball, t, w, 400) {
            let after = apply_surgery(&sample, &plan).unwrap();
            let fresh = grow_ball(&after, ball.source(), None).unwrap();
            let before = grow_ball(&sample, ball.source(), None).unwrap();
            for v in 0..spec.vertex_count() {
                if let (Some(a), Some(b)) = (fresh.dist(v), before.dist(v)) {
                    prop_assert!(a >= b);
                }
            }
        }
    }

    #[test]
    fn optimal_matchings_never_intersect(
        k in 1i64..8,
        pairs in prop::collection::btree_set((0i64..8, 0i64..8), 1..12),
        targets in prop::collection::btree_set((0i64..8, 0i64..8), 1..12),
    ) {
        let m = pairs.len().min(targets.len());
        let clamp = |v: i64| v % (k + 1);
        let s1: std::collections::BTreeSet<Vec<i64>> = pairs.iter().map(|&(a, b)| vec![0, clamp(a), clamp(b)]).collect();
        let s2: std::collections::BTreeSet<Vec<i64>> = targets.iter().map(|&(a, b)| vec![k, clamp(a), clamp(b)]).collect();
        let m = m.min(s1.len()).min(s2.len());
        let s1 = PointSet::new(3, s1.into_iter().take(m)).unwrap();
        let s2 = PointSet::new(3, s2.into_iter().take(m)).unwrap();
        let matching = separated_matching(&s1, &s2, 0, k, k).unwrap();
        prop_assert!(matching.min_distance > 0.0);
    }

    #[test]
    fn wilson_interval_brackets_the_frequency(hits in 0u64..1000, extra in 0u64..1000, z in 0.5f64..4.0) {
        let trials = hits + extra;
        prop_assume!(trials > 0);
        let (lo, hi) = wilson(hits, trials, z);
        let p = hits as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn tally_merge_is_order_free(outcomes in prop::collection::vec(0u8..3, 0..200), split in any::<prop::sample::Index>()) {
        let one = |o: u8| EventTally { hits: (o == 0) as u64, misses: (o == 1) as u64, unknown: (o == 2) as u64 };
        let mut forward = EventTally::default();
        outcomes.iter().for_each(|&o| forward.merge(&one(o)));
        let cut = split.index(outcomes.len() + 1);
        let (mut left, mut right) = (EventTally::default(), EventTally::default());
        outcomes[..cut].iter().rev().for_each(|&o| left.merge(&one(o)));
        outcomes[cut..].iter().for_each(|&o| right.merge(&one(o)));
        right.merge(&left);
        prop_assert_eq!(forward, right);
    }

    #[test]
    fn worker_count_does_not_change_merged_tallies(replicates in 0u64..300, workers in 1usize..5) {
        let task = |r: u64| -> Result<DistanceTally, String> {
            let mut t = DistanceTally::default();
            t.connected = 1;
            t.sum = r * r % 17;
            t.sum_sq = (t.sum * t.sum) as u128;
            Ok(t)
        };
        let a = run_parallel(replicates, 1, task).merged(|t| *t);
        let b = run_parallel(replicates, workers, task).merged(|t| *t);
        prop_assert_eq!(a, b);
    }
}
