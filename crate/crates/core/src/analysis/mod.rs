//! Reading solved policies: action censuses, strategy extraction, counting
//! admissible policies, parameter sweeps, Monte-Carlo execution and auction
//! replays.

mod auction;
mod simulate;

pub use auction::{auction_replay, bid_stream, ea_close_time, ea_rule, mdp_close_time, AuctionOutcome, EaRule};
pub use simulate::{run_trial, simulate_policy, summarize, ExecutionTrace, SimulationSummary, MAX_TRACE_STEPS};

use crate::error::{Error, Result};
use crate::mdp::{build_delay_mdp, AaAction, AaMdp, DelayScenario, FeatureKind};
use crate::math::log10;
use crate::solver::{value_iteration, Propagation};
use crate::strategy::{Step, StrategySkeleton};
use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Number of states in which a policy prescribes each kind of action.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Census {
    pub transfer: BTreeMap<String, usize>,
    pub wait: usize,
    /// Coordination changes keyed by changes already taken.
    pub coord_change: BTreeMap<usize, usize>,
    pub decide: BTreeMap<String, usize>,
    /// States with a prescribed action.
    pub total: usize,
}

impl Census {
    pub fn transfers(&self) -> usize {
        self.transfer.values().sum()
    }

    pub fn coord_changes(&self) -> usize {
        self.coord_change.values().sum()
    }

    fn add(&mut self, mdp: &AaMdp, s: usize, a: &AaAction) {
        self.total += 1;
        match a {
            AaAction::Transfer(e) => *self.transfer.entry(e.clone()).or_insert(0) += 1,
            AaAction::Wait => self.wait += 1,
            AaAction::CoordChange => {
                let d = mdp.feature(s, "d_count").unwrap_or(0.0) as usize;
                *self.coord_change.entry(d).or_insert(0) += 1;
            }
            AaAction::Decide(o) => *self.decide.entry(o.clone()).or_insert(0) += 1,
        }
    }
}

fn check_policy(mdp: &AaMdp, policy: &[Option<usize>]) -> Result<()> {
    if policy.len() != mdp.len() {
        return Err(Error::invalid("policy must have one entry per state"));
    }
    for (s, a) in policy.iter().enumerate() {
        if let (false, Some(a)) = (mdp.is_terminal(s), a) {
            if *a >= mdp.transitions[s].len() {
                return Err(Error::invalid(alloc::format!("policy names a missing action at state {s}")));
            }
        }
    }
    Ok(())
}

/// Census over every nonterminal state.
pub fn action_census(mdp: &AaMdp, policy: &[Option<usize>]) -> Result<Census> {
    check_policy(mdp, policy)?;
    let mut c = Census::default();
    for (s, a) in policy.iter().enumerate() {
        if let (false, Some(a)) = (mdp.is_terminal(s), a) {
            c.add(mdp, s, &mdp.transitions[s][*a].action);
        }
    }
    Ok(c)
}

/// Census over the states the policy can reach from the initial state.
pub fn reachable_census(mdp: &AaMdp, policy: &[Option<usize>]) -> Result<Census> {
    check_policy(mdp, policy)?;
    let mut seen = vec![false; mdp.len()];
    let mut queue = VecDeque::from([mdp.initial]);
    seen[mdp.initial] = true;
    let mut c = Census::default();
    while let Some(s) = queue.pop_front() {
        if mdp.is_terminal(s) {
            continue;
        }
        let Some(a) = policy[s] else { continue };
        let t = &mdp.transitions[s][a];
        c.add(mdp, s, &t.action);
        for &(j, p) in &t.next {
            if p > 0.0 && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    Ok(c)
}

/// A policy read as a strategy along the path where nobody responds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedStrategy {
    /// Changes made before control was first given away.
    pub leading_changes: usize,
    pub skeleton: StrategySkeleton,
}

impl ExtractedStrategy {
    pub fn len(&self) -> usize {
        self.leading_changes + self.skeleton.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for ExtractedStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let spaced = self.skeleton.steps.iter().any(|s| matches!(s, Step::Entity(e) if e.chars().count() > 1));
        for i in 0..self.leading_changes {
            f.write_str("D")?;
            if spaced && (i + 1 < self.leading_changes || !self.skeleton.is_empty()) {
                f.write_str(" ")?;
            }
        }
        write!(f, "{}", self.skeleton)
    }
}

/// Follows the policy from the initial state along successors where no
/// one responds and the `pinned` features keep their values. Waits are
/// dropped, a decision by the agent reads as `agent`, and an entity that
/// keeps control after a change is written again once time passes.
pub fn extract_strategy(mdp: &AaMdp, policy: &[Option<usize>], pinned: &[&str], agent: &str) -> Result<ExtractedStrategy> {
    check_policy(mdp, policy)?;
    let mut pins = Vec::with_capacity(pinned.len());
    for p in pinned {
        pins.push(mdp.schema.index(p).ok_or_else(|| Error::invalid(alloc::format!("unknown feature \"{p}\"")))?);
    }
    let ctrl = mdp.schema.index("controller");
    let controller = |s: usize| -> Option<String> {
        let i = ctrl?;
        match &mdp.schema.features[i].kind {
            FeatureKind::Categorical(ls) => ls.get(mdp.states[s].values[i] as usize).cloned(),
            FeatureKind::Numeric => None,
        }
    };
    let is_agent = |c: &Option<String>| c.as_deref().is_none_or(|c| c == agent || c == "agent");
    let mut out = ExtractedStrategy { leading_changes: 0, skeleton: StrategySkeleton::new(Vec::new()) };
    let mut s = mdp.initial;
    let mut guard = 0usize;
    loop {
        guard += 1;
        if guard > mdp.len() + 1 {
            return Err(Error::invalid("policy loops along the no-response path"));
        }
        if mdp.is_terminal(s) {
            break;
        }
        let Some(a) = policy[s] else { break };
        let t = &mdp.transitions[s][a];
        let steps = &mut out.skeleton.steps;
        match &t.action {
            AaAction::Transfer(e) => {
                if steps.last() != Some(&Step::Entity(e.clone())) {
                    steps.push(Step::Entity(e.clone()));
                }
            }
            AaAction::CoordChange => {
                if steps.is_empty() {
                    out.leading_changes += 1;
                } else {
                    steps.push(Step::D);
                }
            }
            AaAction::Decide(_) => {
                steps.push(Step::Entity(agent.to_string()));
                break;
            }
            AaAction::Wait => {
                let c = controller(s);
                if steps.last() == Some(&Step::D) && !is_agent(&c) {
                    steps.push(Step::Entity(c.unwrap_or_default()));
                }
            }
        }
        let here = &mdp.states[s].values;
        let next = t.next.iter().find(|(j, p)| {
            *p > 0.0 && !mdp.is_terminal(*j) && pins.iter().all(|&i| mdp.states[*j].values[i] == here[i])
        });
        match next {
            Some(&(j, _)) => s = j,
            None => break,
        }
    }
    Ok(out)
}

/// log10 of the number of distinct policies choosing only admissible
/// actions in acceptable states.
pub fn count_strategies(mdp: &AaMdp, prop: &Propagation) -> f64 {
    (0..mdp.len())
        .filter(|&s| prop.acceptable(mdp, s))
        .map(|s| log10(prop.admissible[s].len() as f64))
        .sum()
}

/// Knobs of the delay scenario a sweep may vary. `mean_response` sets every
/// location's response rate to `1 / value`.
pub const SWEEP_PARAMETERS: [&str; 12] = [
    "l1", "l2", "l3", "l4", "repair_base", "escalation", "late_rate", "late_growth", "attendees", "user_quality", "ask_cost", "mean_response",
];

pub fn set_parameter(sc: &mut DelayScenario, name: &str, v: f64) -> Result<()> {
    match name {
        "l1" => sc.weights.l1 = v,
        "l2" => sc.weights.l2 = v,
        "l3" => sc.weights.l3 = v,
        "l4" => sc.weights.l4 = v,
        "repair_base" => sc.repair_base = v,
        "escalation" => sc.escalation = v,
        "late_rate" => sc.late_rate = v,
        "late_growth" => sc.late_growth = v,
        "attendees" => sc.attendees = v,
        "user_quality" => sc.user_quality = v,
        "ask_cost" => sc.ask_cost.iter_mut().for_each(|c| *c = v),
        "mean_response" => {
            if !(v > 0.0) {
                return Err(Error::invalid("mean response time must be positive"));
            }
            sc.user_rate.iter_mut().for_each(|r| *r = 1.0 / v);
        }
        _ => return Err(Error::invalid(alloc::format!("unknown sweep parameter \"{name}\""))),
    }
    Ok(())
}

/// Re-solves the delay MDP for each value and records the census.
pub fn parameter_sweep(sc: &DelayScenario, name: &str, values: &[f64]) -> Result<Vec<(f64, Census)>> {
    values
        .iter()
        .map(|&v| {
            let mut s = sc.clone();
            set_parameter(&mut s, name, v)?;
            let mdp = build_delay_mdp(&s)?;
            let r = value_iteration(&mdp)?;
            Ok((v, action_census(&mdp, &r.policy)?))
        })
        .collect()
}
