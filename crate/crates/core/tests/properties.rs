use invlab_core::conditional::{
    check_subadditive, delta_r, k_p, property_an, series_triple, v_exact, VSequence,
};
use invlab_core::counterexample::{RenewalChain, RenewalTables};
use invlab_core::inequalities::{dedecker_rio_pathwise, prop21_bound, window_property_violations, MaxStats};
use invlab_core::martingale::block_sums;
use invlab_core::output::to_json_string;
use invlab_core::processes::{partial_sums_of, simulate_path, ProcessSpec};
use proptest::prelude::*;

fn spec_strategy() -> impl Strategy<Value = ProcessSpec> {
    prop_oneof![
        (0.1f64..3.0).prop_map(ProcessSpec::iid),
        (prop::collection::vec(-2.0f64..2.0, 1..5), 0.2f64..2.0)
            .prop_map(|(c, sd)| ProcessSpec::linear(&c, sd)),
        (-0.95f64..0.95, 0.2f64..2.0).prop_map(|(r, sd)| ProcessSpec::ar1(r, sd)),
    ]
}

fn chain_strategy() -> impl Strategy<Value = RenewalChain> {
    // aperiodic supports always contain 1 and 2
    prop::collection::btree_set(3u64..200, 0..5).prop_map(|set| {
        let support: Vec<u64> = [1, 2].into_iter().chain(set).collect();
        RenewalChain::inverse_square(&support).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pathwise_inequalities_hold(values in prop::collection::vec(-10.0f64..10.0, 1..200)) {
        let c = dedecker_rio_pathwise(&values);
        prop_assert!(c.holds(), "{c:?}");
    }

    #[test]
    fn window_property_holds(values in prop::collection::vec(-5.0f64..5.0, 1..60)) {
        let sums = partial_sums_of(&values).sums;
        prop_assert!(window_property_violations(&sums).is_empty());
    }

    #[test]
    fn increments_telescope(values in prop::collection::vec(-5.0f64..5.0, 1..100)) {
        let s = MaxStats::from_values(&values);
        let total: f64 = s.d.iter().sum();
        prop_assert!((total - (s.m_plus - s.m_minus)).abs() < 1e-9 * (1.0 + s.m));
        prop_assert!((s.m - s.m_plus.max(s.m_minus)).abs() < 1e-12);
    }

    #[test]
    fn blocks_reproduce_the_sum(values in prop::collection::vec(-5.0f64..5.0, 1..300), m in 1usize..20) {
        prop_assume!(m <= values.len());
        let b = block_sums(&values, m).unwrap();
        prop_assert_eq!(b.k, values.len() / m);
        let blocked: f64 = b.block_values.iter().sum::<f64>() * (m as f64).sqrt();
        let direct: f64 = values[..b.k * m].iter().sum();
        prop_assert!((blocked - direct).abs() < 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn exact_v_is_subadditive(spec in spec_strategy()) {
        let v = v_exact(&spec, 128).unwrap();
        prop_assert!(check_subadditive(&v).unwrap().is_empty());
    }

    #[test]
    fn renewal_v_is_subadditive(chain in chain_strategy()) {
        let v = v_exact(&ProcessSpec::renewal(chain), 200).unwrap();
        prop_assert!(check_subadditive(&v).unwrap().is_empty());
    }

    #[test]
    fn half_level_set_is_large(spec in spec_strategy(), n in 1usize..256) {
        let v = v_exact(&spec, 256).unwrap();
        let (card, verdict) = property_an(&v, n).unwrap();
        prop_assert!(2 * card >= n && verdict.is_pass());
    }

    #[test]
    fn series_ordering(alpha in 0.0f64..1.0, p in 1.1f64..2.5) {
        let v = VSequence::from_fn(1 << 12, |n| (n as f64).powf(alpha), "power");
        let t = series_triple(&v, p, 12).unwrap();
        prop_assert!(t.j <= t.w * (1.0 + 1e-12));
        // at a finite level only the even-truncated lower sum is guaranteed
        prop_assert!(t.w <= k_p(p) * t.i * (1.0 + 1e-12));
    }

    #[test]
    fn dyadic_partials_increase(spec in spec_strategy()) {
        let v = v_exact(&spec, 1 << 10).unwrap();
        let d = delta_r(&v, 11).unwrap();
        for r in 1..=11 {
            prop_assert!(d.delta(r) >= d.delta(r - 1));
        }
    }

    #[test]
    fn second_moment_bound_holds(spec in spec_strategy(), n in 1usize..512) {
        prop_assert!(prop21_bound(&spec, n).unwrap().verdict.is_pass());
    }

    #[test]
    fn renewal_equation(chain in chain_strategy()) {
        let t = RenewalTables::build(&chain, 600).unwrap();
        prop_assert!(t.identity_holds(), "{}", t.identity_residual);
        prop_assert!((t.mass.iter().skip(1).take(t.n_max).sum::<f64>() - t.h[t.n_max]).abs() < 1e-9);
    }

    #[test]
    fn stationary_law_is_a_distribution(chain in chain_strategy()) {
        let mut total = chain.pi0();
        for k in 1..=chain.max_support() {
            total += chain.pi(k);
        }
        prop_assert!((total - 1.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn simulation_is_reproducible(spec in spec_strategy(), seed in any::<u64>()) {
        let a = simulate_path(&spec, 64, seed).unwrap();
        let b = simulate_path(&spec, 64, seed).unwrap();
        prop_assert_eq!(a.values, b.values);
    }

    #[test]
    fn json_floats_round_trip(x in prop::num::f64::NORMAL | prop::num::f64::ZERO) {
        let text = to_json_string(&vec![x]).unwrap();
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back[0].to_bits(), x.to_bits());
    }
}
