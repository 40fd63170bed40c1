use proptest::prelude::*;
use proptest::strategy::Strategy as Gen;

use pavlov_cycle::dynamics::{extract_runs, Action, CycleState, InitConfig, Outcome, Strategy, StrategyKind};
use pavlov_cycle::experiments::{derive_seed, parse_csv, write_csv, SweepRecord};
use pavlov_cycle::weights::{build_weights, check_constraints, exact_one_step_drift, potential};

fn actions(n: std::ops::Range<usize>) -> impl Gen<Value = Vec<Action>> {
    prop::collection::vec(any::<bool>().prop_map(|b| if b { Action::Cooperate } else { Action::Defect }), n)
}

fn kind() -> impl Gen<Value = StrategyKind> {
    prop_oneof![Just(StrategyKind::Pavlov), Just(StrategyKind::Rp), Just(StrategyKind::Srp)]
}

proptest! {
    #[test]
    fn runs_partition_the_cycle(s in actions(3..60)) {
        let runs = extract_runs(&s);
        let total: usize = runs.plus_runs.iter().chain(&runs.minus_runs).map(|r| r.len).sum();
        prop_assert_eq!(total, s.len());
        let minus: usize = runs.minus_runs.iter().map(|r| r.len).sum();
        prop_assert_eq!(minus, s.iter().filter(|a| a.is_defect()).count());
        for r in &runs.minus_runs {
            prop_assert!((0..r.len).all(|k| s[(r.start + k) % s.len()].is_defect()));
        }
        // Runs are maximal: a mixed cycle has as many plus-runs as minus-runs.
        if !runs.is_all_minus && !runs.is_all_plus {
            prop_assert_eq!(runs.plus_runs.len(), runs.minus_runs.len());
        }
    }

    #[test]
    fn a_step_touches_only_its_edge(s in actions(3..40), seed in any::<u64>(), k in kind(), p in 0.0..=1.0f64) {
        let strategy = Strategy::new(k, p).unwrap();
        let mut state = CycleState::new(s.len(), &InitConfig::Explicit(s.clone()), seed).unwrap();
        let out = state.step(&strategy);
        let n = s.len();
        for (i, (a, b)) in s.iter().zip(state.states()).enumerate() {
            if i != out.edge && i != (out.edge + 1) % n {
                prop_assert_eq!(a, b);
            }
        }
        prop_assert_eq!(state.minus_count(), state.states().iter().filter(|a| a.is_defect()).count());
        // A ++ edge never changes and a mixed edge always becomes --.
        match out.old {
            (Action::Cooperate, Action::Cooperate) => prop_assert_eq!(out.new, out.old),
            (x, y) if x != y => prop_assert_eq!(out.new, (Action::Defect, Action::Defect)),
            _ => {}
        }
    }

    #[test]
    fn all_cooperate_is_absorbing(n in 3..50usize, seed in any::<u64>(), k in kind(), p in 0.0..=1.0f64) {
        let strategy = Strategy::new(k, p).unwrap();
        let mut state = CycleState::new(n, &InitConfig::AllCooperate, seed).unwrap();
        for _ in 0..20 {
            state.step(&strategy);
        }
        prop_assert!(state.is_all_plus());
    }

    #[test]
    fn weight_table_shape(p in 0.87..=1.0f64, n in 3..80usize) {
        let t = build_weights(&Strategy::rp(p).unwrap(), 1e-4, n).unwrap();
        prop_assert!(t.l0 <= 8);
        let w = t.weights();
        prop_assert_eq!(w[1], 1.0);
        // w_2 = 1 - omega / 2 sits just below w_1.
        for l in 1..n {
            prop_assert!(w[l + 1] >= w[l] - 1e-4);
            prop_assert!(w[l + 1] / (l + 1) as f64 <= w[l] / l as f64 + 1e-12);
        }
        for (l, &wl) in w.iter().enumerate().skip(1) {
            prop_assert!(t.alpha * l as f64 <= wl + 1e-12 && wl <= l as f64 + 1e-12);
        }
    }

    #[test]
    fn constraints_hold_above_threshold(p in 0.8705..=1.0f64, n in 3..80usize) {
        let r = check_constraints(&build_weights(&Strategy::rp(p).unwrap(), 1e-4, n).unwrap());
        prop_assert!(r.feasible, "{:?}", r);
    }

    #[test]
    fn potential_is_bounded(s in actions(3..60), p in 0.87..=1.0f64) {
        let t = build_weights(&Strategy::rp(p).unwrap(), 1e-4, s.len()).unwrap();
        let w = potential(&s, &t);
        let defectors = s.iter().filter(|a| a.is_defect()).count();
        prop_assert!(w <= s.len() as f64 + 1e-12);
        prop_assert!(w <= defectors as f64 + 1e-12);
        prop_assert_eq!(w == 0.0, defectors == 0);
        if defectors > 0 {
            prop_assert!(w >= t.alpha * defectors as f64 - 1e-12);
        }
    }

    #[test]
    fn drift_contracts_above_threshold(s in actions(3..30), p in 0.8705..=1.0f64) {
        let t = build_weights(&Strategy::rp(p).unwrap(), 1e-4, s.len()).unwrap();
        let d = exact_one_step_drift(&s, &t);
        prop_assert!(d.satisfied, "{:?}", d);
    }

    #[test]
    fn srp_drift_contracts_when_feasible(s in actions(3..24), p in 0.70..=1.0f64) {
        let t = build_weights(&Strategy::srp(p).unwrap(), 1e-4, s.len()).unwrap();
        if check_constraints(&t).feasible {
            let d = exact_one_step_drift(&s, &t);
            prop_assert!(d.satisfied, "{:?}", d);
        }
    }

    #[test]
    fn seeds_are_pure(m in any::<u64>(), a in 0..100usize, b in 0..100usize, c in 0..1000usize) {
        prop_assert_eq!(derive_seed(m, a, b, c), derive_seed(m, a, b, c));
        prop_assert_ne!(derive_seed(m, a, b, c), derive_seed(m, a, b, c + 1));
    }

    #[test]
    fn csv_round_trip(
        rows in prop::collection::vec(
            (kind(), 3..10_000usize, 0..=1_000_000u32, 0..500usize, any::<u64>(), any::<u64>(), 0..3u8, 0..=10_000u32),
            0..20,
        )
    ) {
        let records: Vec<SweepRecord> = rows
            .into_iter()
            .map(|(strategy, n, pm, rep, seed, steps, o, c)| SweepRecord {
                strategy,
                n,
                p: pm as f64 / 1e6,
                rep,
                seed,
                steps,
                outcome: [Outcome::AllPlus, Outcome::AllMinus, Outcome::Capped][o as usize],
                coop_fraction: c as f64 / 10_000.0,
            })
            .collect();
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
        prop_assert_eq!(parse_csv(buf.as_slice()).unwrap(), records);
    }
}
