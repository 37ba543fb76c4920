//! Backward induction over the wait clock for instances whose entities
//! respond at constant rates with constant quality.
//!
//! With memoryless responses the only state that matters before a decision
//! is the wait clock and the number of changes taken, so the optimal
//! strategy over a time grid follows from one backward pass per change
//! count.

use crate::error::{Error, Result};
use crate::math::{exp, round};
use crate::model::{ProblemInstance, QualityModel, ResponseModel};
use crate::strategy::{Step, StrategySkeleton};
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovOptimum {
    /// Steps after the first transfer.
    pub skeleton: StrategySkeleton,
    /// Changes made before control is first given away.
    pub leading_changes: usize,
    pub eu: f64,
}

impl MarkovOptimum {
    /// Transfers plus changes. An entity that keeps control across a change
    /// is not counted again.
    pub fn len(&self) -> usize {
        let mut n = self.leading_changes;
        let mut holder: Option<&str> = None;
        let mut after_change = false;
        for s in &self.skeleton.steps {
            match s {
                Step::D => {
                    n += 1;
                    after_change = true;
                }
                Step::Entity(e) => {
                    if !(after_change && holder == Some(e.as_str())) {
                        n += 1;
                    }
                    holder = Some(e);
                    after_change = false;
                }
            }
        }
        n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Choice {
    Agent,
    Give(usize),
    Change,
}

/// Optimal skeleton and EU with the clock discretized into `steps` cells
/// up to the deadline. Changes move the clock back by a whole number of
/// cells.
pub fn markov_optimum(inst: &ProblemInstance, steps: usize, max_d: usize) -> Result<MarkovOptimum> {
    inst.validate()?;
    if steps == 0 {
        return Err(Error::invalid("need at least one time step"));
    }
    let a = inst.agent();
    let mut q = Vec::with_capacity(inst.entities.len());
    let mut rate = Vec::with_capacity(inst.entities.len());
    for e in &inst.entities {
        let QualityModel::Constant(qe) = e.quality else {
            return Err(Error::invalid("clock induction needs constant quality"));
        };
        q.push(qe);
        rate.push(match e.response {
            ResponseModel::Instant => 0.0,
            ResponseModel::Markovian { rate } => rate,
            ResponseModel::Tabulated { .. } => return Err(Error::invalid("clock induction needs constant response rates")),
        });
    }
    let max_d = inst.coord.max_changes.map_or(max_d, |m| m.min(max_d));
    let dl = inst.wait.deadline();
    let h = dl / steps as f64;
    let back = round(inst.coord.value / h) as usize;
    let w: Vec<f64> = (0..=steps).map(|i| inst.wait.at(i as f64 * h)).collect();
    let terminal = q.iter().enumerate().filter(|(i, _)| *i == a || rate[*i] > 0.0).map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    let stay: Vec<f64> = rate.iter().map(|r| exp(-r * h)).collect();

    let mut value = vec![vec![0.0; steps + 1]; max_d + 1];
    let mut choice = vec![vec![Choice::Agent; steps + 1]; max_d + 1];
    for d in (0..=max_d).rev() {
        value[d][steps] = terminal;
        for i in (0..steps).rev() {
            let inc = w[i + 1] - w[i];
            let mut best = q[a];
            let mut pick = Choice::Agent;
            for (e, &s) in stay.iter().enumerate() {
                if e == a || rate[e] <= 0.0 {
                    continue;
                }
                let v = (1.0 - s) * (q[e] - 0.5 * inc) + s * (value[d][i + 1] - inc);
                if v > best {
                    best = v;
                    pick = Choice::Give(e);
                }
            }
            if d < max_d {
                let v = value[d + 1][i.saturating_sub(back)] - inst.coord.cost(d + 1);
                if v > best {
                    best = v;
                    pick = Choice::Change;
                }
            }
            value[d][i] = best;
            choice[d][i] = pick;
        }
    }

    let id = |e: usize| Step::Entity(inst.entities[e].id.clone());
    let mut out: Vec<Step> = Vec::new();
    let push = |out: &mut Vec<Step>, s: Step| {
        if out.last() != Some(&s) || s == Step::D {
            out.push(s);
        }
    };
    let (mut d, mut i, mut leading) = (0usize, 0usize, 0usize);
    loop {
        if i == steps {
            let best = (0..q.len())
                .filter(|&e| e == a || rate[e] > 0.0)
                .fold(a, |b, e| if q[e] > q[b] { e } else { b });
            push(&mut out, id(best));
            break;
        }
        match choice[d][i] {
            Choice::Agent => {
                push(&mut out, id(a));
                break;
            }
            Choice::Give(e) => {
                push(&mut out, id(e));
                i += 1;
            }
            Choice::Change => {
                if out.is_empty() {
                    leading += 1;
                } else {
                    push(&mut out, Step::D);
                }
                d += 1;
                i = i.saturating_sub(back);
            }
        }
    }
    Ok(MarkovOptimum { skeleton: StrategySkeleton::new(out), leading_changes: leading, eu: value[0][0] - w[0] })
}
