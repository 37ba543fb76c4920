//! Fixtures and one-shot reproduction bundles shared by the CLI and the
//! acceptance suite.

use crate::output::{num, CliResult, Table};
use aa_core::analysis::{action_census, auction_replay, count_strategies, ea_rule, reachable_census, set_parameter, AuctionOutcome, Census};
use aa_core::eu::optimize_timings;
use aa_core::mdp::{build_auction_mdp, build_delay_mdp, AaMdp, AuctionScenario, DelayScenario};
use aa_core::model::{CoordChangeModel, Entity, ProblemInstance, WaitCostModel};
use aa_core::search::{random_config_experiment, BucketHistogram, ExperimentConfig};
use aa_core::solver::{
    propagate_constraints, solve_constrained, value_iteration, ActionPredicate, CmpOp, Constraint, ConstraintKind, FeatureTest,
    FeatureValue,
};
use aa_core::strategy::StrategySkeleton;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::time::Instant;

/// Team-repair cost values swept for the ask-count hump.
pub const REPAIR_BASE_GRID: [f64; 11] = [0.0, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0];
/// Mean user response times (minutes) swept at fixed ask cost.
pub const MEAN_RESPONSE_GRID: [f64; 7] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
pub const AUCTION_SEEDS: u64 = 50;

// ---------------------------------------------------------------- meeting-delay strategy table

/// Meeting-delay regime in minutes: the agent's guess is worth much less
/// than the user's, and waiting costs grow quickly past a one-hour horizon.
pub const T5_AGENT_QUALITY: f64 = 15.0;
pub const T5_USER_QUALITY: f64 = 45.0;
pub const T5_DEADLINE: f64 = 60.0;
/// Wait-cost rate for a small (active) and a large (passive) meeting.
pub const T5_MEETINGS: [(&str, f64); 2] = [("small", 0.4), ("large", 0.8)];
/// User response rate per minute at each location.
pub const T5_LOCATIONS: [(&str, f64); 3] = [("office", 1.0 / 5.0), ("not_at_dept", 1.0 / 60.0), ("at_meeting_loc", 1.0 / 15.0)];
pub const T5_STRATEGIES: [&str; 4] = ["A", "e", "eA", "eDA"];

pub fn table5_instance(omega: f64, rate: f64) -> CliResult<ProblemInstance> {
    Ok(ProblemInstance::new(
        vec![Entity::agent("A", T5_AGENT_QUALITY), Entity::markovian("e", T5_USER_QUALITY, rate)?],
        WaitCostModel::exponential(omega, T5_DEADLINE)?,
        CoordChangeModel::constant(5.0, 1.0, Some(4)),
    )?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table5Row {
    pub meeting: &'static str,
    pub location: &'static str,
    /// EU of each of [`T5_STRATEGIES`] with optimized timings.
    pub eu: [f64; 4],
    pub strategies: [String; 4],
}

pub fn table5() -> CliResult<Vec<Table5Row>> {
    let mut rows = Vec::new();
    for (meeting, omega) in T5_MEETINGS {
        for (location, rate) in T5_LOCATIONS {
            let inst = table5_instance(omega, rate)?;
            let ids = inst.ids();
            let mut eu = [0.0; 4];
            let mut strategies: [String; 4] = Default::default();
            for (i, s) in T5_STRATEGIES.iter().enumerate() {
                let r = optimize_timings(&inst, &StrategySkeleton::parse(s, &ids)?)?;
                eu[i] = r.breakdown.total;
                strategies[i] = r.strategy.to_string();
            }
            rows.push(Table5Row { meeting, location, eu, strategies });
        }
    }
    Ok(rows)
}

pub fn table5_table(rows: &[Table5Row]) -> Table {
    let mut t = Table::new(&["meeting", "location", "A", "e", "eA", "eDA", "eA_timed", "eDA_timed"]);
    for r in rows {
        let mut row = vec![r.meeting.to_string(), r.location.to_string()];
        row.extend(r.eu.iter().map(|x| num(*x)));
        row.push(r.strategies[2].clone());
        row.push(r.strategies[3].clone());
        t.push(row);
    }
    t
}

// ---------------------------------------------------------------- optimal lengths

pub fn fig10_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig { seed, ..ExperimentConfig::default() }
}

pub fn fig10(seed: u64) -> CliResult<Vec<BucketHistogram>> {
    Ok(random_config_experiment(&fig10_config(seed))?)
}

pub fn fig10_table(hs: &[BucketHistogram]) -> Table {
    let mut t = Table::new(&["wait_rate_bucket", "length", "percentage"]);
    for h in hs {
        for &len in h.counts.keys() {
            t.push(vec![num(h.wait_rate), len.to_string(), num(h.percentage(len))]);
        }
    }
    t
}

// ---------------------------------------------------------------- censuses and sweeps

#[derive(Debug, Clone, PartialEq)]
pub struct CensusPoint {
    pub value: Option<f64>,
    pub all: Census,
    pub reachable: Census,
}

pub fn census_point(mdp: &AaMdp, policy: &[Option<usize>], value: Option<f64>) -> CliResult<CensusPoint> {
    Ok(CensusPoint { value, all: action_census(mdp, policy)?, reachable: reachable_census(mdp, policy)? })
}

/// Re-solves the delay MDP at each value of `param`, in parallel.
pub fn sweep(sc: &DelayScenario, param: &str, values: &[f64]) -> CliResult<Vec<CensusPoint>> {
    values
        .par_iter()
        .map(|&v| {
            let mut s = sc.clone();
            set_parameter(&mut s, param, v)?;
            let mdp = build_delay_mdp(&s)?;
            let r = value_iteration(&mdp)?;
            census_point(&mdp, &r.policy, Some(v))
        })
        .collect()
}

fn strata(c: &Census) -> String {
    c.coord_change.iter().map(|(d, n)| format!("{d}:{n}")).collect::<Vec<_>>().join(";")
}

/// One row per point; a `decide_<label>` column for every decision seen.
pub fn census_table(points: &[CensusPoint]) -> Table {
    let labels: BTreeSet<&String> = points.iter().flat_map(|p| p.all.decide.keys()).collect();
    let mut header = vec!["parameter_value".to_string(), "ask".into(), "wait".into(), "delay_by_stratum".into()];
    header.extend(labels.iter().map(|l| format!("decide_{l}")));
    header.extend(["total", "reachable_ask", "reachable_wait", "reachable_delay_by_stratum", "reachable_total"].map(String::from));
    let mut t = Table { header, rows: Vec::new() };
    for p in points {
        let c = &p.all;
        let mut row = vec![p.value.map(num).unwrap_or_default(), c.transfers().to_string(), c.wait.to_string(), strata(c)];
        row.extend(labels.iter().map(|l| c.decide.get(*l).copied().unwrap_or(0).to_string()));
        let r = &p.reachable;
        row.extend([c.total.to_string(), r.transfers().to_string(), r.wait.to_string(), strata(r), r.total.to_string()]);
        t.rows.push(row);
    }
    t
}

pub fn fig11() -> CliResult<Vec<CensusPoint>> {
    sweep(&DelayScenario::reference(), "repair_base", &REPAIR_BASE_GRID)
}

pub fn fig14() -> CliResult<Vec<CensusPoint>> {
    sweep(&DelayScenario::reference(), "mean_response", &MEAN_RESPONSE_GRID)
}

// ---------------------------------------------------------------- constraint pruning

fn forbid_action(id: &str, kind: &str, target: Option<&str>, tests: Vec<(&str, CmpOp, FeatureValue)>) -> Constraint {
    Constraint {
        id: id.into(),
        kind: ConstraintKind::ForbiddenAction,
        state_predicate: tests.into_iter().map(|(f, op, value)| FeatureTest { feature: f.into(), op, value }).collect(),
        action_predicate: Some(ActionPredicate { negate: false, kind: kind.into(), target: target.map(String::from) }),
    }
}

/// Ten forbidding rules over the reference delay MDP, in the order they
/// are added.
pub fn reference_constraints() -> Vec<Constraint> {
    use FeatureValue::{Label, Number};
    let l = |s: &str| Label(s.into());
    vec![
        forbid_action("no_third_delay", "coord_change", None, vec![("d_count", CmpOp::Ge, Number(2.0))]),
        Constraint {
            id: "meeting_before_30".into(),
            kind: ConstraintKind::ForbiddenState,
            state_predicate: vec![FeatureTest { feature: "meeting_time".into(), op: CmpOp::Ge, value: Number(30.0) }],
            action_predicate: None,
        },
        forbid_action("never_cancel", "decide", Some("cancel"), vec![]),
        forbid_action("present_means_attending", "decide", Some("not_attending"), vec![("location", CmpOp::Eq, l("meeting"))]),
        forbid_action("no_ask_at_home", "transfer", None, vec![("location", CmpOp::Eq, l("home"))]),
        forbid_action("user_never_delays", "coord_change", None, vec![("controller", CmpOp::Eq, l("user"))]),
        forbid_action("no_late_ask", "transfer", None, vec![("time", CmpOp::Ge, Number(25.0))]),
        forbid_action("no_delay_once_there", "coord_change", None, vec![("location", CmpOp::Eq, l("meeting"))]),
        forbid_action(
            "no_early_attend_from_home",
            "decide",
            Some("attending"),
            vec![("location", CmpOp::Eq, l("home")), ("time", CmpOp::Lt, Number(10.0))],
        ),
        forbid_action("agent_decides_late", "wait", None, vec![("time", CmpOp::Ge, Number(25.0)), ("controller", CmpOp::Eq, l("agent"))]),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig15Row {
    pub constraints: usize,
    pub log10_strategies: f64,
    pub admissible_pairs: usize,
    /// Median wall time of the constrained solve, microseconds.
    pub solve_us: f64,
    /// Median wall time of unconstrained value iteration on the same MDP.
    pub baseline_us: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

/// Adds the reference constraints one at a time. Each timing is the median
/// of `runs` solves interleaved with baseline runs.
pub fn fig15(runs: usize) -> CliResult<Vec<Fig15Row>> {
    let mdp = build_delay_mdp(&DelayScenario::reference())?;
    let cs = reference_constraints();
    let mut rows = Vec::new();
    for k in 0..=cs.len() {
        let prop = propagate_constraints(&mdp, &cs[..k])?;
        let (mut a, mut b) = (Vec::with_capacity(runs), Vec::with_capacity(runs));
        for _ in 0..runs.max(1) {
            let t = Instant::now();
            std::hint::black_box(solve_constrained(&mdp, &cs[..k])?);
            a.push(t.elapsed().as_secs_f64() * 1e6);
            let t = Instant::now();
            std::hint::black_box(value_iteration(&mdp)?);
            b.push(t.elapsed().as_secs_f64() * 1e6);
        }
        rows.push(Fig15Row {
            constraints: k,
            log10_strategies: count_strategies(&mdp, &prop),
            admissible_pairs: prop.admissible_pairs(),
            solve_us: median(a),
            baseline_us: median(b),
        });
    }
    Ok(rows)
}

pub fn fig15_table(rows: &[Fig15Row]) -> Table {
    let mut t = Table::new(&["constraints", "log10_strategies", "admissible_pairs", "solve_us", "baseline_us"]);
    for r in rows {
        t.push(vec![
            r.constraints.to_string(),
            num(r.log10_strategies),
            r.admissible_pairs.to_string(),
            num(r.solve_us),
            num(r.baseline_us),
        ]);
    }
    t
}

// ---------------------------------------------------------------- auction replay

/// Replays `count` bid streams, seeded `seed, seed + 1, ...`.
pub fn auction(sc: &AuctionScenario, seed: u64, count: u64) -> CliResult<Vec<AuctionOutcome>> {
    let mdp = build_auction_mdp(sc)?;
    let r = value_iteration(&mdp)?;
    let rule = ea_rule(sc)?;
    (0..count)
        .into_par_iter()
        .map(|i| Ok(auction_replay(sc, &mdp, &r.policy, &rule, seed.wrapping_add(i))?))
        .collect()
}

pub fn table6(seed: u64) -> CliResult<Vec<AuctionOutcome>> {
    auction(&AuctionScenario::reference(), seed, AUCTION_SEEDS)
}

pub fn auction_table(outs: &[AuctionOutcome]) -> Table {
    let mut t = Table::new(&["seed", "mdp_pct", "ea_pct"]);
    for o in outs {
        t.push(vec![o.seed.to_string(), num(o.mdp_pct), num(o.ea_pct)]);
    }
    t
}

/// Mean absolute gap in closure percentage.
pub fn mean_gap(outs: &[AuctionOutcome]) -> f64 {
    outs.iter().map(|o| (o.mdp_pct - o.ea_pct).abs()).sum::<f64>() / outs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use aa_core::analysis::parameter_sweep;

    #[test]
    fn parallel_sweep_matches_serial() {
        let sc = DelayScenario::reference();
        let vals = [0.01, 0.5];
        let par = sweep(&sc, "repair_base", &vals).unwrap();
        let ser = parameter_sweep(&sc, "repair_base", &vals).unwrap();
        for (p, (v, c)) in par.iter().zip(&ser) {
            assert_eq!(p.value, Some(*v));
            assert_eq!(&p.all, c);
        }
    }

    #[test]
    fn census_columns_follow_decisions() {
        let t = census_table(&fig14().unwrap()[..1]);
        assert_eq!(&t.header[..4], ["parameter_value", "ask", "wait", "delay_by_stratum"]);
        assert!(t.header.iter().any(|h| h == "decide_attending"));
        assert!(t.rows.iter().all(|r| r.len() == t.header.len()));
    }

    #[test]
    fn reference_constraints_compile() {
        let mdp = build_delay_mdp(&DelayScenario::reference()).unwrap();
        let r = solve_constrained(&mdp, &reference_constraints()).unwrap();
        assert!(r.diagnostics.iter().all(|d| !d.conflict));
    }
}
