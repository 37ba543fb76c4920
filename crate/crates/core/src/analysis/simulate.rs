//! Seeded Monte-Carlo execution of a policy.

use crate::error::{Error, Result};
use crate::mdp::{AaAction, AaMdp};
use crate::math::sqrt;
use crate::rng::{stream, weighted_index};
use alloc::collections::BTreeMap;
use alloc::vec::Vec;

/// Step budget for one trial; reaching it means the policy cycles.
pub const MAX_TRACE_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    pub seed: u64,
    pub trial: u64,
    /// (state, action index, sampled successor).
    pub steps: Vec<(usize, usize, usize)>,
    pub utility: f64,
    /// Actions other than waiting.
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub trials: usize,
    pub mean: f64,
    pub std_err: f64,
    pub lengths: BTreeMap<usize, usize>,
    /// Kept only on request.
    pub traces: Vec<ExecutionTrace>,
}

/// Runs trial `trial` with its own random stream, so trials can be run in
/// any order or in parallel with identical results.
pub fn run_trial(mdp: &AaMdp, policy: &[Option<usize>], seed: u64, trial: u64) -> Result<ExecutionTrace> {
    let mut rng = stream(seed, trial);
    let mut s = mdp.initial;
    let mut tr = ExecutionTrace { seed, trial, steps: Vec::new(), utility: 0.0, length: 0 };
    let mut weights = Vec::new();
    loop {
        let a = match (mdp.is_terminal(s), policy.get(s).copied().flatten()) {
            (false, Some(a)) => a,
            _ => {
                tr.utility += mdp.terminal_reward[s];
                return Ok(tr);
            }
        };
        if tr.steps.len() == MAX_TRACE_STEPS {
            return Err(Error::numeric("trial exceeded the step budget"));
        }
        let t = mdp.transitions[s].get(a).ok_or_else(|| Error::invalid("policy names a missing action"))?;
        weights.clear();
        weights.extend(t.next.iter().map(|&(_, p)| p));
        let j = t.next[weighted_index(&mut rng, &weights)].0;
        tr.utility += t.reward;
        if t.action != AaAction::Wait {
            tr.length += 1;
        }
        tr.steps.push((s, a, j));
        s = j;
    }
}

/// Mean realized utility over `trials` runs and the histogram of
/// trace lengths.
pub fn simulate_policy(mdp: &AaMdp, policy: &[Option<usize>], seed: u64, trials: usize, keep_traces: bool) -> Result<SimulationSummary> {
    let traces = (0..trials as u64).map(|i| run_trial(mdp, policy, seed, i)).collect::<Result<Vec<_>>>()?;
    summarize(traces, keep_traces)
}

/// Aggregates traces in trial order.
pub fn summarize(traces: Vec<ExecutionTrace>, keep_traces: bool) -> Result<SimulationSummary> {
    let n = traces.len();
    if n == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let mean = traces.iter().map(|t| t.utility).sum::<f64>() / n as f64;
    let var = if n > 1 { traces.iter().map(|t| (t.utility - mean) * (t.utility - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    let mut lengths = BTreeMap::new();
    for t in &traces {
        *lengths.entry(t.length).or_insert(0) += 1;
    }
    Ok(SimulationSummary { trials: n, mean, std_err: sqrt(var / n as f64), lengths, traces: if keep_traces { traces } else { Vec::new() } })
}
