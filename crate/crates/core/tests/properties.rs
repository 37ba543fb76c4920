//! Property tests over models, search, MDP builders, the solver and
//! policy analysis.

use aa_core::analysis::{count_strategies, extract_strategy};
use aa_core::eu::{eu_closed_form, eu_of_strategy, optimize_timings, TwoEntityParams, ClosedFormKind};
use aa_core::mdp::*;
use aa_core::model::*;
use aa_core::search::*;
use aa_core::solver::*;
use aa_core::strategy::*;
use aa_core::synthetic::{random_constraints, random_mdp};
use proptest::prelude::*;
use std::collections::BTreeSet;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn two_entity(alpha: f64, beta: f64, rho: f64, omega: f64) -> ProblemInstance {
    ProblemInstance::new(
        vec![Entity::agent("A", alpha), Entity::markovian("e", beta, rho).unwrap()],
        WaitCostModel::exponential(omega, 10.0).unwrap(),
        CoordChangeModel::constant(1.0, 0.5, Some(2)),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn wait_cost_nondecreasing_and_flat_after_deadline(omega in 0.01f64..3.0, dl in 0.5f64..20.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (t1, t2) = (a.min(b) * dl, a.max(b) * dl);
        for m in [WaitCostModel::exponential(omega, dl).unwrap(), WaitCostModel::linear(omega, dl).unwrap()] {
            prop_assert!(wait_cost(&m, t1).unwrap() <= wait_cost(&m, t2).unwrap());
            prop_assert_eq!(wait_cost(&m, dl + 1.0 + a).unwrap(), wait_cost(&m, dl).unwrap());
        }
    }

    #[test]
    fn response_probability_is_additive(rate in 0.01f64..5.0, a in 0.0f64..5.0, b in 0.0f64..5.0, c in 0.0f64..5.0) {
        let mut v = [a, b, c];
        v.sort_by(f64::total_cmp);
        let tab = ResponseModel::tabulated(Table::new(vec![0.0, 2.0, 4.0, 6.0], vec![0.3, 0.1, 0.05, 0.0]).unwrap()).unwrap();
        for m in [ResponseModel::markovian(rate).unwrap(), tab] {
            let whole = response_prob(&m, v[0], v[2]).unwrap();
            let parts = response_prob(&m, v[0], v[1]).unwrap() + response_prob(&m, v[1], v[2]).unwrap();
            prop_assert!((whole - parts).abs() < 1e-9);
        }
        let m = ResponseModel::markovian(rate).unwrap();
        prop_assert!((response_prob(&m, 0.0, c).unwrap() - (1.0 - (-rate * c).exp())).abs() < 1e-9);
    }

    #[test]
    fn grammar_matches_enumeration(symbols in proptest::collection::vec(0usize..3, 1..6)) {
        let ids = ["A", "e"];
        let all: BTreeSet<StrategySkeleton> = enumerate_skeletons(&ids, 5, 5).unwrap().into_iter().collect();
        let steps: Vec<Step> = symbols.iter().map(|&i| if i == 2 { Step::D } else { Step::Entity(ids[i].into()) }).collect();
        let sk = StrategySkeleton::new(steps);
        prop_assert_eq!(sk.is_grammatical(), all.contains(&sk));
    }

    #[test]
    fn closed_forms_match_quadrature(rho in 0.01f64..5.0, omega in 0.01f64..5.0, alpha in 0.0f64..5.0, gap in 0.1f64..5.0, tf in 0.05f64..0.95, df in 0.0f64..1.0) {
        prop_assume!((rho - omega).abs() > 1e-3);
        let p = TwoEntityParams { rho, omega, alpha, beta: alpha + gap, deadline: 4.0, d_value: 0.5, d_cost: 0.2 };
        let inst = p.instance().unwrap();
        let (t, dt) = (tf * p.deadline, df * tf * p.deadline);
        let cases = [
            (ClosedFormKind::A, "A".to_string()),
            (ClosedFormKind::E, "e".to_string()),
            (ClosedFormKind::EA, format!("e({t})A")),
            (ClosedFormKind::EDeA, format!("e({dt})D({dt})e({t})A")),
        ];
        for (kind, s) in cases {
            let cf = eu_closed_form(&p, kind, t, dt).unwrap().value;
            let q = eu_of_strategy(&inst, &TimedStrategy::parse(&s, &["A", "e"]).unwrap()).unwrap().total;
            prop_assert!((cf - q).abs() <= 1e-6 * (1.0 + q.abs()), "{:?}: {} vs {}", kind, cf, q);
        }
    }

    #[test]
    fn change_cost_only_hurts_strategies_with_changes(c1 in 0.0f64..3.0, extra in 0.0f64..3.0, t in 0.5f64..5.0) {
        let base = two_entity(1.0, 4.0, 0.4, 0.3);
        let mut pricier = base.clone();
        pricier.coord = CoordChangeModel::constant(1.0, c1 + extra, Some(2));
        let mut cheap = base;
        cheap.coord = CoordChangeModel::constant(1.0, c1, Some(2));
        let with_d = TimedStrategy::parse(&format!("e({})D({})e({t})A", t / 2.0, t / 2.0), &["A", "e"]).unwrap();
        let without = TimedStrategy::parse(&format!("e({t})A"), &["A", "e"]).unwrap();
        prop_assert!(eu_of_strategy(&pricier, &with_d).unwrap().total <= eu_of_strategy(&cheap, &with_d).unwrap().total);
        prop_assert_eq!(eu_of_strategy(&pricier, &without).unwrap().total, eu_of_strategy(&cheap, &without).unwrap().total);
    }

    #[test]
    fn agent_first_ignores_responses(rho in 0.01f64..5.0, beta in 0.0f64..10.0) {
        let a = TimedStrategy::parse("A", &["A", "e"]).unwrap();
        let x = eu_of_strategy(&two_entity(2.0, beta, rho, 0.3), &a).unwrap().total;
        prop_assert_eq!(x, eu_of_strategy(&two_entity(2.0, 1.0, 1.0, 0.3), &a).unwrap().total);
    }
}

proptest! {
    #![proptest_config(cfg(16))]

    #[test]
    fn optimized_timings_are_local_maxima(alpha in 0.0f64..3.0, gap in 0.5f64..5.0, rho in 0.05f64..2.0, omega in 0.05f64..1.0) {
        let inst = two_entity(alpha, alpha + gap, rho, omega);
        let sk = StrategySkeleton::parse("eDeA", &["A", "e"]).unwrap();
        let r = optimize_timings(&inst, &sk).unwrap();
        let eu = r.breakdown.total;
        let ends: Vec<f64> = r.strategy.actions.iter().map(|a| a.time()).collect();
        for i in 0..ends.len() {
            for h in [-0.3, -0.05, 0.05, 0.3] {
                let mut acts = r.strategy.actions.clone();
                let nt = ends[i] + h;
                if !nt.is_finite() || nt < 0.0 {
                    continue;
                }
                match &mut acts[i] {
                    StrategyAction::Transfer { end, .. } => *end = nt,
                    StrategyAction::CoordChange { at } => *at = nt,
                }
                let s = TimedStrategy::new(acts);
                if !validate_strategy(&s, &inst).is_empty() {
                    continue;
                }
                let v = eu_of_strategy(&inst, &s).unwrap().total;
                prop_assert!(v <= eu + 1e-7 * (1.0 + eu.abs()), "{} beats {} at {}", v, eu, s);
            }
        }
    }

    #[test]
    fn pruning_never_changes_the_optimum(qs in proptest::collection::vec(0.0f64..10.0, 2..4), rates in proptest::collection::vec(0.05f64..2.0, 3), omega in 0.01f64..2.0, dv in 0.0f64..3.0, dc in 0.0f64..3.0) {
        let mut es = vec![Entity::agent("A", qs[0])];
        for i in 1..qs.len() {
            es.push(Entity::markovian(&format!("e{i}"), qs[i], rates[i]).unwrap());
        }
        let inst = ProblemInstance::new(es, WaitCostModel::exponential(omega, 5.0).unwrap(), CoordChangeModel::constant(dv, dc, Some(1))).unwrap();
        let on = best_strategy_with(&inst, 3, SearchOptions { prune: true }).unwrap();
        let off = best_strategy_with(&inst, 3, SearchOptions { prune: false }).unwrap();
        prop_assert!((on.best_eu - off.best_eu).abs() <= 1e-9, "{} vs {}", on.best_eu, off.best_eu);
    }

    #[test]
    fn skeleton_prefixes_stay_in_the_grammar(n in 1usize..4, k in 1usize..6, max_d in 0usize..3) {
        let ids: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let ids: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
        let all = enumerate_skeletons(&ids, k, max_d).unwrap();
        let set: BTreeSet<_> = all.iter().cloned().collect();
        prop_assert_eq!(set.len(), all.len());
        for s in &all {
            prop_assert!(s.is_grammatical());
            for i in 1..=s.len() {
                if matches!(s.steps[i - 1], Step::Entity(_)) {
                    prop_assert!(set.contains(&StrategySkeleton::new(s.steps[..i].to_vec())));
                }
            }
        }
    }

    #[test]
    fn abstract_mdp_matches_single_handback(alpha in 0.0f64..5.0, beta in 0.0f64..8.0, rho in 0.05f64..2.0, omega in 0.01f64..0.5) {
        let mut inst = two_entity(alpha, beta, rho, omega);
        inst.coord = CoordChangeModel::constant(1.0, 0.0, Some(0));
        let grid = 0.5;
        let m = build_abstract_mdp(&inst, grid).unwrap();
        let v = value_iteration(&m).unwrap().utility[m.initial] - inst.wait.at(0.0);
        let mut best = eu_of_strategy(&inst, &TimedStrategy::parse("A", &["A", "e"]).unwrap()).unwrap().total;
        // The MDP times out at the deadline, so the last hand-back is one step before.
        for k in 0..20 {
            let s = TimedStrategy::parse(&format!("e({})A", k as f64 * grid), &["A", "e"]).unwrap();
            best = best.max(eu_of_strategy(&inst, &s).unwrap().total);
        }
        let dl = inst.wait.deadline();
        // Holding through the deadline ends in a timeout worth 0, which is
        // a hand-back at the deadline to an agent of quality 0.
        let mut timeout = inst.clone();
        timeout.entities[0].quality = QualityModel::Constant(0.0);
        let s = TimedStrategy::parse(&format!("e({dl})A"), &["A", "e"]).unwrap();
        best = best.max(eu_of_strategy(&timeout, &s).unwrap().total);
        let step_cost = inst.wait.at(dl) - inst.wait.at(dl - grid);
        prop_assert!((v - best).abs() <= step_cost, "{} vs {} (step {})", v, best, step_cost);
    }

    #[test]
    fn experiment_is_reproducible(seed in 0u64..1000) {
        let c = ExperimentConfig { configs: 4, entities: (2, 4), steps: 100, seed, ..ExperimentConfig::default() };
        prop_assert_eq!(random_config_experiment(&c).unwrap(), random_config_experiment(&c).unwrap());
    }
}

fn delay_strategy() -> impl Strategy<Value = DelayScenario> {
    (0.0f64..0.2, 0.0f64..0.5, 0.01f64..0.2, 0.0f64..2.0, 0.0f64..1.0, 1.0f64..3.0).prop_map(|(rb, lr, rate, ac, stay, esc)| {
        let mut sc = DelayScenario::reference();
        sc.repair_base = rb;
        sc.late_rate = lr;
        sc.user_rate = vec![rate, rate / 2.0, rate / 4.0];
        sc.ask_cost = vec![ac, 2.0 * ac, 3.0 * ac];
        sc.escalation = esc;
        let s = 0.5 + 0.45 * stay;
        sc.transition[0] = vec![s, 0.05, 0.95 - s];
        sc
    })
}

fn auction_strategy() -> impl Strategy<Value = AuctionScenario> {
    (2usize..12, 1usize..5, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(steps, bidders, bp, lr, pc)| AuctionScenario {
        steps,
        bidders,
        bid_prob: bp,
        leader_rate: lr,
        prep_cost: 5.0 * pc,
        ..AuctionScenario::reference()
    })
}

fn check_structure(m: &AaMdp) -> Result<(), TestCaseError> {
    m.validate().map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(m.topological_order().is_some());
    let (ti, di) = (m.schema.index("time").unwrap(), m.schema.index("d_count"));
    for s in 0..m.len() {
        for t in &m.transitions[s] {
            let sum: f64 = t.next.iter().map(|x| x.1).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9 && t.next.iter().all(|x| (0.0..=1.0).contains(&x.1)));
            for &(j, _) in &t.next {
                if m.is_terminal(j) && m.states[j].values[ti] <= m.states[s].values[ti] {
                    continue;
                }
                if t.action == AaAction::CoordChange {
                    let d = di.unwrap();
                    prop_assert_eq!(m.states[j].values[d], m.states[s].values[d] + 1.0);
                } else {
                    prop_assert!(m.states[j].values[ti] > m.states[s].values[ti]);
                }
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(cfg(24))]

    #[test]
    fn delay_mdps_are_well_formed(sc in delay_strategy()) {
        let m = build_delay_mdp(&sc).unwrap();
        check_structure(&m)?;
        let d = m.schema.index("d_count").unwrap();
        for s in 0..m.len() {
            if m.states[s].values[d] == MAX_DELAYS as f64 {
                prop_assert!(m.transitions[s].iter().all(|t| t.action != AaAction::CoordChange));
            }
        }
        let r = value_iteration(&m).unwrap();
        let e = extract_strategy(&m, &r.policy, &["location"], "A").unwrap();
        prop_assert!(e.skeleton.is_empty() || e.skeleton.is_grammatical());
    }

    #[test]
    fn auction_mdps_are_well_formed(sc in auction_strategy()) {
        check_structure(&build_auction_mdp(&sc).unwrap())?;
    }

    #[test]
    fn abstract_mdps_are_well_formed(alpha in 0.0f64..5.0, beta in 0.0f64..8.0, rho in 0.05f64..2.0, cap in 0usize..3) {
        let mut inst = two_entity(alpha, beta, rho, 0.2);
        inst.coord.max_changes = Some(cap);
        check_structure(&build_abstract_mdp(&inst, 1.0).unwrap())?;
    }
}

proptest! {
    #![proptest_config(cfg(128))]

    #[test]
    fn two_phase_equals_restricted_iteration(seed in 0u64..1_000_000, n in 2usize..40, k in 0usize..8) {
        let m = random_mdp(seed, n);
        let cs = random_constraints(seed, k, false);
        let two = solve_constrained(&m, &cs).unwrap();
        let one = constrained_value_iteration(&m, &cs).unwrap();
        let prop = propagate_constraints(&m, &cs).unwrap();
        let plain = value_iteration_restricted(&m, &prop.admissible).unwrap();
        for s in 0..m.len() {
            if prop.acceptable(&m, s) {
                prop_assert_eq!(two.utility[s], plain.utility[s]);
                prop_assert_eq!(one.utility[s], plain.utility[s]);
            }
        }
    }

    #[test]
    fn solver_flags_agree_with_reachability(seed in 0u64..1_000_000, n in 2usize..50, k in 1usize..6) {
        let m = random_mdp(seed, n);
        let cs = random_constraints(seed ^ 0xabc, k, false);
        let r = solve_constrained(&m, &cs).unwrap();
        let v = &r.values.as_ref().unwrap()[m.initial];
        let rep = verify_policy(&m, &r.policy, &cs).unwrap();
        let forbidding_ok = rep.iter().filter(|c| c.kind.is_forbidding()).all(|c| c.satisfied());
        prop_assert_eq!(!v.forbidden, forbidding_ok);
        if !v.forbidden {
            let mut bit = 0;
            for c in &rep {
                if !c.kind.is_forbidding() {
                    prop_assert_eq!(v.satisfied >> bit & 1 == 1, c.satisfied(), "constraint {}", c.id);
                    bit += 1;
                }
            }
        }
    }

    #[test]
    fn forbidding_constraints_only_prune(seed in 0u64..1_000_000, n in 2usize..40, k in 1usize..8) {
        let m = random_mdp(seed, n);
        let cs = random_constraints(seed, k, true);
        let mut last = usize::MAX;
        for i in 0..=cs.len() {
            let p = propagate_constraints(&m, &cs[..i]).unwrap();
            let pairs = p.admissible_pairs();
            prop_assert!(pairs <= last);
            last = pairs;
        }
    }

    #[test]
    fn unconstrained_count_is_sum_of_logs(seed in 0u64..1_000_000, n in 2usize..40) {
        let m = random_mdp(seed, n);
        let p = propagate_constraints(&m, &[]).unwrap();
        let direct: f64 = (0..m.len()).filter(|&s| !m.is_terminal(s)).map(|s| (m.transitions[s].len() as f64).log10()).sum();
        prop_assert_eq!(count_strategies(&m, &p), direct);
    }
}
