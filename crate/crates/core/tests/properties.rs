use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tamplus::estimator::{estimate_l1, PaddedDomain};
use tamplus::graph::{brute_force_matching, maximum_matching, TypeProfile, VertexType};
use tamplus::harness::{generate_instance, random_small_profile, Family};
use tamplus::predictions::{l1_counts, perturb};

fn small_profile() -> impl Strategy<Value = TypeProfile> {
    (1usize..=7, 0.05f64..0.8, any::<u64>()).prop_map(|(n, p, seed)| {
        random_small_profile(n, p, &mut ChaCha8Rng::seed_from_u64(seed))
    })
}

fn profile_triple() -> impl Strategy<Value = (TypeProfile, TypeProfile, TypeProfile)> {
    (1usize..=9, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (
            random_small_profile(n, 0.4, &mut rng),
            random_small_profile(n, 0.4, &mut rng),
            random_small_profile(n, 0.4, &mut rng),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matching_agrees_with_oracle(p in small_profile()) {
        let n = p.n();
        let plan = maximum_matching(&p, n).unwrap();
        plan.validate(&p, n).unwrap();
        prop_assert_eq!(plan.size(), brute_force_matching(&p, n).unwrap());
    }

    #[test]
    fn matching_size_bounded_by_neighbourhoods(p in small_profile()) {
        let n = p.n();
        let size = maximum_matching(&p, n).unwrap().size();
        let non_isolated: usize = p.iter().filter(|(t, _)| !t.is_empty()).map(|(_, c)| c).sum();
        prop_assert!(size <= non_isolated);
        let covered: std::collections::BTreeSet<u32> =
            p.types().flat_map(|t| t.neighbors().iter().copied()).collect();
        prop_assert!(size <= covered.len());
    }

    #[test]
    fn replacing_a_vertex_by_a_superset_never_shrinks(p in small_profile(), extra in any::<u32>()) {
        let n = p.n();
        let before = maximum_matching(&p, n).unwrap().size();
        let (t, _) = p.iter().next().unwrap();
        let mut grown = t.neighbors().to_vec();
        grown.push(extra % n as u32);
        let bigger = VertexType::from_unsorted(grown, n).unwrap();
        let mut entries: Vec<(VertexType, usize)> = p.iter().map(|(t, c)| (t.clone(), c)).collect();
        entries[0].1 -= 1;
        entries.push((bigger, 1));
        let q = TypeProfile::new(n, entries).unwrap();
        prop_assert!(maximum_matching(&q, n).unwrap().size() >= before);
    }

    #[test]
    fn l1_is_a_metric((a, b, c) in profile_triple()) {
        let d = |x: &TypeProfile, y: &TypeProfile| l1_counts(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &b) == 0, a == b);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        prop_assert!(d(&a, &b) <= 2 * a.n());
        prop_assert_eq!(d(&a, &b) % 2, 0);
    }

    #[test]
    fn perturb_hits_target(n in 1usize..60, frac in 0.0f64..=1.0, seed in any::<u64>(), family in 0usize..3) {
        let family = [Family::perfect(), Family::isolated(0.5), Family::Triangular][family].clone();
        let truth = generate_instance(&family, n, seed).unwrap().truth().clone();
        let target = 2 * ((frac * n as f64).round() as usize);
        let advice = perturb(&truth, target, seed ^ 1).unwrap();
        prop_assert_eq!(advice.n(), n);
        prop_assert_eq!(l1_counts(&truth, &advice).unwrap(), target);
    }

    #[test]
    fn estimate_is_order_free_and_in_range(p in small_profile(), seed in any::<u64>(), len in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_small_profile(p.n(), 0.4, &mut rng);
        let domain = PaddedDomain::<f64>::new(&q);
        let pool = p.expand();
        let mut sample: Vec<VertexType> = (0..len)
            .map(|i| pool[(seed as usize).wrapping_add(i * 7) % pool.len()].clone())
            .collect();
        let a = estimate_l1(&domain, &sample).unwrap();
        sample.reverse();
        let b = estimate_l1(&domain, &sample).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!((0.0..=2.0).contains(&a));
    }
}
