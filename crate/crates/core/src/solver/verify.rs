//! Exact check of a policy against constraints by graph search over the
//! transitions it can take with positive probability.

use super::constraint::{Compiled, Constraint, ConstraintKind, ConstraintSet};
use crate::error::{Error, Result};
use crate::mdp::AaMdp;
use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Satisfied,
    /// States along a path that breaks the constraint, from the initial one.
    Violated { witness: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintReport {
    pub id: String,
    pub kind: ConstraintKind,
    pub status: Status,
}

impl ConstraintReport {
    pub fn satisfied(&self) -> bool {
        self.status == Status::Satisfied
    }
}

fn successors<'a>(mdp: &'a AaMdp, policy: &[Option<usize>], s: usize) -> Result<impl Iterator<Item = usize> + 'a> {
    let a = if mdp.is_terminal(s) {
        None
    } else {
        Some(policy.get(s).copied().flatten().ok_or_else(|| Error::invalid(alloc::format!("policy undefined at reachable state {s}")))?)
    };
    let next = a.map(|a| mdp.transitions[s][a].next.as_slice()).unwrap_or(&[]);
    Ok(next.iter().filter(|(_, p)| *p > 0.0).map(|(j, _)| *j))
}

/// Whether the constraint's target is hit at `s` under the policy.
fn hits(mdp: &AaMdp, policy: &[Option<usize>], c: &Compiled, s: usize) -> bool {
    let values = &mdp.states[s].values;
    match c.kind {
        ConstraintKind::ForbiddenState | ConstraintKind::RequiredState => c.state_matches(values),
        ConstraintKind::ForbiddenAction | ConstraintKind::RequiredAction => {
            !mdp.is_terminal(s) && policy[s].is_some_and(|a| c.action_matches(values, &mdp.transitions[s][a].action))
        }
    }
}

fn path(parent: &[usize], mut s: usize) -> Vec<usize> {
    let mut out = vec![s];
    while parent[s] != usize::MAX {
        s = parent[s];
        out.push(s);
    }
    out.reverse();
    out
}

/// Breadth-first search for a reachable hit.
fn reach_hit(mdp: &AaMdp, policy: &[Option<usize>], c: &Compiled) -> Result<Option<Vec<usize>>> {
    let mut parent = vec![usize::MAX; mdp.len()];
    let mut seen = vec![false; mdp.len()];
    let mut queue = VecDeque::from([mdp.initial]);
    seen[mdp.initial] = true;
    while let Some(s) = queue.pop_front() {
        if hits(mdp, policy, c, s) {
            return Ok(Some(path(&parent, s)));
        }
        for j in successors(mdp, policy, s)? {
            if !seen[j] {
                seen[j] = true;
                parent[j] = s;
                queue.push_back(j);
            }
        }
    }
    Ok(None)
}

/// Depth-first search for a path that never hits: it either ends in a
/// terminal or loops.
fn avoiding_path(mdp: &AaMdp, policy: &[Option<usize>], c: &Compiled) -> Result<Option<Vec<usize>>> {
    // 0 unseen, 1 on the stack, 2 finished without finding an avoiding path.
    let mut color = vec![0u8; mdp.len()];
    let mut stack: Vec<(usize, Vec<usize>, usize)> = Vec::new();
    let start = mdp.initial;
    if hits(mdp, policy, c, start) {
        return Ok(None);
    }
    color[start] = 1;
    stack.push((start, successors(mdp, policy, start)?.collect(), 0));
    while let Some(top) = stack.last_mut() {
        let s = top.0;
        if mdp.is_terminal(s) {
            return Ok(Some(stack.iter().map(|e| e.0).collect()));
        }
        if top.2 == top.1.len() {
            color[s] = 2;
            stack.pop();
            continue;
        }
        let j = top.1[top.2];
        top.2 += 1;
        if hits(mdp, policy, c, j) || color[j] == 2 {
            continue;
        }
        if color[j] == 1 {
            let mut w: Vec<usize> = stack.iter().map(|e| e.0).collect();
            w.push(j);
            return Ok(Some(w));
        }
        color[j] = 1;
        let next = successors(mdp, policy, j)?.collect();
        stack.push((j, next, 0));
    }
    Ok(None)
}

/// Per-constraint outcome of following `policy` from the initial state.
pub fn verify_policy(mdp: &AaMdp, policy: &[Option<usize>], cs: &[Constraint]) -> Result<Vec<ConstraintReport>> {
    mdp.validate()?;
    if policy.len() != mdp.len() {
        return Err(Error::invalid("policy must have one entry per state"));
    }
    let set = ConstraintSet::new(cs, mdp)?;
    let mut out = Vec::with_capacity(cs.len());
    for (c, comp) in cs.iter().zip(&set.compiled) {
        let found = if c.kind.is_forbidding() { reach_hit(mdp, policy, comp)? } else { avoiding_path(mdp, policy, comp)? };
        let status = match found {
            None => Status::Satisfied,
            Some(witness) => Status::Violated { witness },
        };
        out.push(ConstraintReport { id: c.id.clone(), kind: c.kind, status });
    }
    Ok(out)
}
