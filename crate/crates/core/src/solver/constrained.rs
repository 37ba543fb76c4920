//! Constraint propagation and value iteration over (forbidden, satisfied,
//! utility) triples.
//!
//! Preference: not forbidden beats forbidden; then the satisfied set of
//! requiring constraints, compared by priority in declaration order (so a
//! strict superset always wins); then utility.

use super::constraint::{Constraint, ConstraintSet};
use super::{q_value, value_iteration_restricted, ConstraintDiagnostic, SolveResult, MAX_SWEEPS};
use crate::error::{Error, Result};
use crate::mdp::AaMdp;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrainedValue {
    pub forbidden: bool,
    /// Bit `i` set when the `i`-th requiring constraint is met on every path.
    pub satisfied: u64,
    pub utility: f64,
}

/// Rank of (forbidden, satisfied) alone; larger is better.
#[inline]
fn rank(forbidden: bool, satisfied: u64) -> (bool, u64) {
    (!forbidden, satisfied.reverse_bits())
}

/// `Greater` when `a` is preferred to `b`.
pub fn compare_values(a: &ConstrainedValue, b: &ConstrainedValue) -> Ordering {
    rank(a.forbidden, a.satisfied)
        .cmp(&rank(b.forbidden, b.satisfied))
        .then_with(|| a.utility.partial_cmp(&b.utility).unwrap_or(Ordering::Equal))
}

/// Forbidden flags and satisfied sets per state, and the actions that
/// attain the best (forbidden, satisfied) rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub forbidden: Vec<bool>,
    pub satisfied: Vec<u64>,
    pub admissible: Vec<Vec<usize>>,
    pub required_mask: u64,
}

impl Propagation {
    /// Nonterminal and not forbidden.
    pub fn acceptable(&self, mdp: &AaMdp, s: usize) -> bool {
        !mdp.is_terminal(s) && !self.forbidden[s]
    }

    /// Admissible (state, action) pairs over states that are not forbidden.
    pub fn admissible_pairs(&self) -> usize {
        self.admissible.iter().zip(&self.forbidden).filter(|(_, f)| !**f).map(|(a, _)| a.len()).sum()
    }
}

struct Backup {
    forbidden: bool,
    satisfied: u64,
    admissible: Vec<usize>,
}

fn backup_state(mdp: &AaMdp, set: &ConstraintSet, s: usize, f: &[bool], n: &[u64]) -> Backup {
    let values = &mdp.states[s].values;
    let direct_f = set.forbidden_state(values);
    let direct_n = set.required_state(values);
    if mdp.is_terminal(s) {
        return Backup { forbidden: direct_f, satisfied: direct_n, admissible: Vec::new() };
    }
    let need_n = set.has_required();
    if direct_f && !need_n {
        // Nothing to rank: the state is forbidden whatever it does.
        return Backup { forbidden: true, satisfied: 0, admissible: (0..mdp.transitions[s].len()).collect() };
    }
    let mut best = (false, 0u64);
    let mut adm: Vec<usize> = Vec::new();
    for (a, t) in mdp.transitions[s].iter().enumerate() {
        let mut fa = set.forbidden_action(values, &t.action);
        let mut na = if need_n { set.required_action(values, &t.action) } else { 0 };
        let mut meet = u64::MAX;
        for &(j, _) in t.next.iter().filter(|x| x.1 > 0.0) {
            fa |= f[j];
            if need_n {
                meet &= n[j];
            } else if fa {
                break;
            }
        }
        if need_n {
            na |= meet;
        }
        let r = rank(fa, na);
        if adm.is_empty() || r > best {
            best = r;
            adm.clear();
            adm.push(a);
        } else if r == best {
            adm.push(a);
        }
    }
    let (ok, bits) = best;
    Backup { forbidden: direct_f || !ok, satisfied: direct_n | bits.reverse_bits(), admissible: adm }
}

fn propagate_set(mdp: &AaMdp, set: &ConstraintSet) -> Result<(Propagation, usize)> {
    let len = mdp.len();
    let mut f = vec![false; len];
    let mut n = vec![0u64; len];
    let mut adm = vec![Vec::new(); len];
    if let Some(order) = mdp.topological_order() {
        for &s in order.iter().rev() {
            let b = backup_state(mdp, set, s, &f, &n);
            f[s] = b.forbidden;
            n[s] = b.satisfied;
            adm[s] = b.admissible;
        }
        return Ok((Propagation { forbidden: f, satisfied: n, admissible: adm, required_mask: set.required_mask }, 1));
    }
    // With cycles, sweep until nothing changes; a requirement must be met
    // within the sweeps performed.
    for sweep in 1..=MAX_SWEEPS {
        let mut changed = false;
        for s in 0..len {
            let b = backup_state(mdp, set, s, &f, &n);
            changed |= b.forbidden != f[s] || b.satisfied != n[s] || b.admissible != adm[s];
            f[s] = b.forbidden;
            n[s] = b.satisfied;
            adm[s] = b.admissible;
        }
        if !changed {
            return Ok((Propagation { forbidden: f, satisfied: n, admissible: adm, required_mask: set.required_mask }, sweep));
        }
    }
    Err(Error::numeric("constraint propagation did not settle within the sweep cap"))
}

/// Forbidden flags and satisfied sets without utilities. Successors with
/// probability 0 are ignored.
pub fn propagate_constraints(mdp: &AaMdp, cs: &[Constraint]) -> Result<Propagation> {
    mdp.validate()?;
    let set = ConstraintSet::new(cs, mdp)?;
    Ok(propagate_set(mdp, &set)?.0)
}

/// Single pass over full triples: every action's (forbidden, satisfied,
/// utility) is formed and the best under the preference order kept.
pub fn constrained_value_iteration(mdp: &AaMdp, cs: &[Constraint]) -> Result<SolveResult> {
    mdp.validate()?;
    let set = ConstraintSet::new(cs, mdp)?;
    let len = mdp.len();
    let mut vals: Vec<ConstrainedValue> = (0..len)
        .map(|s| ConstrainedValue { forbidden: false, satisfied: 0, utility: mdp.terminal_reward[s] })
        .collect();
    let mut policy = vec![None; len];
    let order = mdp.topological_order();
    let sweep_order: Vec<usize> = match &order {
        Some(o) => o.iter().rev().copied().collect(),
        None => (0..len).collect(),
    };
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut delta: f64 = 0.0;
        let mut changed = false;
        for &s in &sweep_order {
            let values = &mdp.states[s].values;
            let direct_f = set.forbidden_state(values);
            let direct_n = set.required_state(values);
            let mut best: Option<(ConstrainedValue, usize)> = None;
            for (a, t) in mdp.transitions[s].iter().enumerate() {
                let mut fa = set.forbidden_action(values, &t.action);
                let mut meet = u64::MAX;
                for &(j, _) in t.next.iter().filter(|x| x.1 > 0.0) {
                    fa |= vals[j].forbidden;
                    meet &= vals[j].satisfied;
                }
                let cand = ConstrainedValue {
                    forbidden: fa,
                    satisfied: set.required_action(values, &t.action) | meet,
                    utility: q_value_of(t, &vals),
                };
                if best.is_none_or(|(b, _)| compare_values(&cand, &b) == Ordering::Greater) {
                    best = Some((cand, a));
                }
            }
            let new = match best {
                None => ConstrainedValue { forbidden: direct_f, satisfied: direct_n, utility: mdp.terminal_reward[s] },
                Some((b, a)) => {
                    policy[s] = Some(a);
                    ConstrainedValue { forbidden: direct_f || b.forbidden, satisfied: direct_n | b.satisfied, utility: b.utility }
                }
            };
            changed |= new.forbidden != vals[s].forbidden || new.satisfied != vals[s].satisfied;
            delta = delta.max((new.utility - vals[s].utility).abs());
            vals[s] = new;
        }
        if order.is_some() || (!changed && delta <= super::SWEEP_TOL) {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(Error::numeric("constrained value iteration did not converge within the sweep cap"));
        }
    }
    let utility = vals.iter().map(|v| v.utility).collect();
    let diagnostics = diagnose(mdp, &set, cs, vals[mdp.initial].forbidden, vals[mdp.initial].satisfied)?;
    Ok(SolveResult { policy, utility, values: Some(vals), sweeps, diagnostics })
}

/// Same arithmetic as `q_value`, reading utilities from triples.
fn q_value_of(t: &crate::mdp::Transition, vals: &[ConstrainedValue]) -> f64 {
    let mut v = t.reward;
    for &(j, p) in &t.next {
        v += p * vals[j].utility;
    }
    v
}

fn diagnose(mdp: &AaMdp, set: &ConstraintSet, cs: &[Constraint], f0: bool, n0: u64) -> Result<Vec<ConstraintDiagnostic>> {
    let mut out = Vec::with_capacity(cs.len());
    let mut relaxed: Option<u64> = None;
    for (i, c) in cs.iter().enumerate() {
        let (ok, conflict) = match set.bit[i] {
            None => (!f0, false),
            Some(b) => {
                let ok = n0 >> b & 1 == 1;
                let conflict = !ok && {
                    if relaxed.is_none() {
                        let req: Vec<Constraint> = cs.iter().filter(|c| !c.kind.is_forbidding()).cloned().collect();
                        let p = propagate_constraints(mdp, &req)?;
                        relaxed = Some(p.satisfied[mdp.initial]);
                    }
                    relaxed.unwrap_or(0) >> b & 1 == 1
                };
                (ok, conflict)
            }
        };
        out.push(ConstraintDiagnostic { id: c.id.clone(), satisfied_at_initial: ok, conflict });
    }
    Ok(out)
}

/// Two phases: propagate constraints without utilities, then run value
/// iteration over the admissible actions of states that are not forbidden.
/// Forbidden states keep their first admissible action and utility −∞.
pub fn solve_constrained(mdp: &AaMdp, cs: &[Constraint]) -> Result<SolveResult> {
    mdp.validate()?;
    let set = ConstraintSet::new(cs, mdp)?;
    let len = mdp.len();
    let (policy, utility, forbidden, satisfied, sweeps) = match mdp.topological_order() {
        Some(order) => {
            let (p, u, f, n) = solve_acyclic(mdp, &set, &order);
            (p, u, f, n, 2)
        }
        None => {
            let (prop, sweeps) = propagate_set(mdp, &set)?;
            let mut r = value_iteration_restricted(mdp, &prop.admissible)?;
            for s in 0..len {
                if prop.forbidden[s] && !mdp.is_terminal(s) {
                    r.utility[s] = f64::NEG_INFINITY;
                }
            }
            (r.policy, r.utility, prop.forbidden, prop.satisfied, sweeps + r.sweeps)
        }
    };
    let values = (0..len)
        .map(|s| ConstrainedValue { forbidden: forbidden[s], satisfied: satisfied[s], utility: utility[s] })
        .collect();
    let diagnostics = diagnose(mdp, &set, cs, forbidden[mdp.initial], satisfied[mdp.initial])?;
    Ok(SolveResult { policy, utility, values: Some(values), sweeps, diagnostics })
}

type Solved = (Vec<Option<usize>>, Vec<f64>, Vec<bool>, Vec<u64>);

/// Both phases in one backward pass: each state's rank is settled before
/// its utility, and utilities are computed only for actions holding the
/// best rank seen so far. Results equal propagating first and then running
/// value iteration over the admissible actions.
fn solve_acyclic(mdp: &AaMdp, set: &ConstraintSet, order: &[usize]) -> Solved {
    let len = mdp.len();
    let mut f = vec![false; len];
    let mut n = vec![0u64; len];
    let mut u = mdp.terminal_reward.clone();
    let mut policy = vec![None; len];
    let need_n = set.has_required();
    let mut matching = Vec::new();
    if !need_n {
        forbidding_pass(mdp, set, order, &mut f, &mut u, &mut policy);
        return (policy, u, f, n);
    }
    for &s in order.iter().rev() {
        let values = &mdp.states[s].values;
        let direct_f = set.forbidden_state(values);
        let direct_n = if need_n { set.required_state(values) } else { 0 };
        if mdp.is_terminal(s) {
            f[s] = direct_f;
            n[s] = direct_n;
            continue;
        }
        set.matching_action_constraints(values, &mut matching);
        let mut best: Option<((bool, u64), usize, f64)> = None;
        for (a, t) in mdp.transitions[s].iter().enumerate() {
            let (mut fa, mut na) = set.action_flags(&matching, &t.action);
            if !fa || need_n {
                let mut meet = u64::MAX;
                for &(j, _) in t.next.iter().filter(|x| x.1 > 0.0) {
                    fa |= f[j];
                    meet &= n[j];
                }
                if need_n {
                    na |= meet;
                }
            }
            let r = rank(fa, na);
            let keep = match best {
                None => true,
                Some((b, _, _)) => r >= b,
            };
            if !keep {
                continue;
            }
            // Forbidden states get utility −∞, so their actions need no value.
            let q = if fa || direct_f { f64::NEG_INFINITY } else { q_value(t, &u) };
            match best {
                Some((b, _, bq)) if r == b && !(q > bq) => {}
                _ => best = Some((r, a, q)),
            }
        }
        let ((ok, bits), a, q) = best.expect("nonterminal states have actions");
        f[s] = direct_f || !ok;
        n[s] = direct_n | bits.reverse_bits();
        policy[s] = Some(a);
        u[s] = if f[s] { f64::NEG_INFINITY } else { q };
    }
    (policy, u, f, n)
}

/// [`solve_acyclic`] when every constraint is forbidding: the rank is a
/// single flag, so one loop over successors settles both the flag and the
/// value of an action.
fn forbidding_pass(mdp: &AaMdp, set: &ConstraintSet, order: &[usize], f: &mut [bool], u: &mut [f64], policy: &mut [Option<usize>]) {
    let mut matching = Vec::new();
    for &s in order.iter().rev() {
        let values = &mdp.states[s].values;
        let direct_f = set.forbidden_state(values);
        if direct_f || mdp.is_terminal(s) {
            // A directly forbidden state is forbidden whatever it does.
            f[s] = direct_f;
            if direct_f && !mdp.is_terminal(s) {
                policy[s] = Some(0);
                u[s] = f64::NEG_INFINITY;
            }
            continue;
        }
        set.matching_action_constraints(values, &mut matching);
        let mut first_ok = None;
        let mut best: Option<(usize, f64)> = None;
        for (a, t) in mdp.transitions[s].iter().enumerate() {
            if !matching.is_empty() && set.action_flags(&matching, &t.action).0 {
                continue;
            }
            let mut q = t.reward;
            let mut bad = false;
            for &(j, p) in &t.next {
                bad |= f[j] && p > 0.0;
                q += p * u[j];
            }
            if bad {
                continue;
            }
            first_ok.get_or_insert(a);
            if best.is_none_or(|(_, b)| q > b) {
                best = Some((a, q));
            }
        }
        match best {
            Some((a, q)) => {
                policy[s] = Some(a);
                u[s] = q;
            }
            _ => {
                f[s] = true;
                policy[s] = Some(first_ok.unwrap_or(0));
                u[s] = f64::NEG_INFINITY;
            }
        }
    }
}
