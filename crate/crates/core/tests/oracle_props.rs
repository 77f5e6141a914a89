use arb_core::oracle::{check_case, dp_schedule, DpConfig};
use arb_core::synth::random_small_problem;
use arb_milp::SolverOptions;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn enumeration_bnb_and_dp_agree(seed in 1_000u64..1_000_000) {
        let case = check_case(0, seed, &SolverOptions::default());
        prop_assert!(case.error.is_none(), "{:?}", case.error);
        prop_assert!(case.matches(), "bnb {} enum {}", case.milp_profit, case.enum_profit);
        prop_assert!(case.dp_below(), "{:?} vs {}", case.dp_profit, case.milp_profit);
        prop_assert!(case.dp_monotone(), "{:?}", case.dp_profit);
    }

    #[test]
    fn dp_grows_on_nested_grids(seed in 0u64..1_000_000, base in 3usize..30) {
        let p = random_small_problem(seed).unwrap().problem;
        // Grids with (g - 1) dividing (2g - 2) nest.
        let coarse = dp_schedule(&p, &DpConfig::new(base, p.hours())).unwrap().1;
        let fine = dp_schedule(&p, &DpConfig::new(2 * base - 1, p.hours())).unwrap().1;
        prop_assert!(fine >= coarse - 1e-9, "{fine} < {coarse}");
    }
}
