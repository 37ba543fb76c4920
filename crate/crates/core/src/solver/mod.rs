//! Policy computation: plain value iteration, constraint propagation and
//! constrained value iteration, and a reachability check of policies
//! against constraints.

mod constrained;
mod constraint;
mod verify;

pub use constrained::{
    compare_values, constrained_value_iteration, propagate_constraints, solve_constrained, ConstrainedValue, Propagation,
};
pub use constraint::{
    compile, ActionPredicate, CmpOp, Compiled, Constraint, ConstraintKind, ConstraintSet, FeatureTest, FeatureValue, MAX_REQUIRED,
};
pub use verify::{verify_policy, ConstraintReport, Status};

use crate::error::{Error, Result};
use crate::mdp::{AaMdp, Transition};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Convergence threshold and sweep cap for MDPs with cycles.
pub const SWEEP_TOL: f64 = 1e-9;
pub const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintDiagnostic {
    pub id: String,
    pub satisfied_at_initial: bool,
    /// A requiring constraint that only the forbidding ones make unattainable.
    pub conflict: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Index into the state's transitions; `None` on terminals.
    pub policy: Vec<Option<usize>>,
    pub utility: Vec<f64>,
    /// Constrained triples, when constraints were involved.
    pub values: Option<Vec<ConstrainedValue>>,
    /// Backward passes or sweeps performed.
    pub sweeps: usize,
    pub diagnostics: Vec<ConstraintDiagnostic>,
}

impl SolveResult {
    pub fn initial_utility(&self, mdp: &AaMdp) -> f64 {
        self.utility[mdp.initial]
    }
}

/// Expected value of one action given successor utilities.
#[inline]
pub(crate) fn q_value(t: &Transition, u: &[f64]) -> f64 {
    let mut v = t.reward;
    for &(j, p) in &t.next {
        v += p * u[j];
    }
    v
}

/// Optimal utilities and policy.
pub fn value_iteration(mdp: &AaMdp) -> Result<SolveResult> {
    mdp.validate()?;
    solve_over(mdp, |s| 0..mdp.transitions[s].len())
}

/// Value iteration using only the listed actions in each state. A
/// nonterminal state with no listed action is an error.
pub fn value_iteration_restricted(mdp: &AaMdp, allowed: &[Vec<usize>]) -> Result<SolveResult> {
    mdp.validate()?;
    let n = mdp.len();
    if allowed.len() != n {
        return Err(Error::invalid("action lists must cover every state"));
    }
    for s in 0..n {
        if !mdp.is_terminal(s) && allowed[s].is_empty() {
            return Err(Error::invalid(alloc::format!("state {s} has no allowed action")));
        }
        if let Some(&a) = allowed[s].iter().find(|&&a| a >= mdp.transitions[s].len()) {
            return Err(Error::invalid(alloc::format!("state {s} has no action {a}")));
        }
    }
    solve_over(mdp, |s| allowed[s].iter().copied())
}

fn solve_over<F, I>(mdp: &AaMdp, actions: F) -> Result<SolveResult>
where
    F: Fn(usize) -> I,
    I: Iterator<Item = usize>,
{
    let n = mdp.len();
    let mut u = mdp.terminal_reward.clone();
    let mut policy = vec![None; n];
    let backup = |s: usize, u: &[f64]| -> (f64, Option<usize>) {
        let mut best: Option<(f64, usize)> = None;
        for a in actions(s) {
            let v = q_value(&mdp.transitions[s][a], u);
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, a));
            }
        }
        best.map_or((mdp.terminal_reward[s], None), |(v, a)| (v, Some(a)))
    };
    if let Some(order) = mdp.topological_order() {
        for &s in order.iter().rev() {
            if !mdp.is_terminal(s) {
                let (v, a) = backup(s, &u);
                u[s] = v;
                policy[s] = a;
            }
        }
        return Ok(SolveResult { policy, utility: u, values: None, sweeps: 1, diagnostics: Vec::new() });
    }
    for sweep in 1..=MAX_SWEEPS {
        let mut delta: f64 = 0.0;
        for s in 0..n {
            if !mdp.is_terminal(s) {
                let (v, a) = backup(s, &u);
                delta = delta.max((v - u[s]).abs());
                u[s] = v;
                policy[s] = a;
            }
        }
        if delta <= SWEEP_TOL {
            return Ok(SolveResult { policy, utility: u, values: None, sweeps: sweep, diagnostics: Vec::new() });
        }
    }
    Err(Error::numeric("value iteration did not converge within the sweep cap"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{AaAction, AaState, FeatureSchema};

    pub(crate) fn tiny(rewards: &[f64]) -> AaMdp {
        // State 0 chooses among terminals 1.. with the given rewards.
        let n = rewards.len() + 1;
        let schema = FeatureSchema::default().numeric("id");
        let states = (0..n).map(|i| AaState { values: vec![i as f64], terminal: i > 0 }).collect();
        let mut transitions = vec![Vec::new(); n];
        transitions[0] = (1..n)
            .map(|j| Transition { action: AaAction::Decide(alloc::format!("{j}")), reward: 0.0, next: vec![(j, 1.0)] })
            .collect();
        let mut terminal_reward = vec![0.0];
        terminal_reward.extend_from_slice(rewards);
        AaMdp { schema, states, transitions, terminal_reward, initial: 0 }
    }

    #[test]
    fn one_step_argmax() {
        let m = tiny(&[1.0, 2.0]);
        let r = value_iteration(&m).unwrap();
        assert_eq!(r.policy[0], Some(1));
        assert_eq!(r.utility[0], 2.0);
    }

    #[test]
    fn cyclic_fallback_converges() {
        // 0 --wait(0.5)--> 0 or 1; 1 terminal with reward 4; each wait costs 1.
        let schema = FeatureSchema::default().numeric("id");
        let states = vec![AaState { values: vec![0.0], terminal: false }, AaState { values: vec![1.0], terminal: true }];
        let transitions = vec![vec![Transition { action: AaAction::Wait, reward: -1.0, next: vec![(0, 0.5), (1, 0.5)] }], vec![]];
        let m = AaMdp { schema, states, transitions, terminal_reward: vec![0.0, 4.0], initial: 0 };
        assert!(m.topological_order().is_none());
        let r = value_iteration(&m).unwrap();
        // u = -1 + 0.5 u + 2 → u = 2.
        assert!((r.utility[0] - 2.0).abs() < 1e-8);
        assert!(r.sweeps > 1);
    }
}
