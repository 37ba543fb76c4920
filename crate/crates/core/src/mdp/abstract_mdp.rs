//! Transfer-of-control MDP built directly from a problem instance.

use super::{compact, AaAction, AaMdp, FeatureSchema, StateTable, Transition};
use crate::error::{Error, Result};
use crate::math::{exp, round};
use crate::model::{ProblemInstance, ResponseModel};
use alloc::vec;
use alloc::vec::Vec;

/// Chance that `resp` answers during `[t0, t1)` given no answer before `t0`.
pub(crate) fn step_hazard(resp: &ResponseModel, t0: f64, t1: f64) -> f64 {
    match resp {
        ResponseModel::Instant => 1.0,
        ResponseModel::Markovian { rate } => 1.0 - exp(-rate * (t1 - t0)),
        ResponseModel::Tabulated { .. } => {
            let s = 1.0 - resp.cdf(t0);
            if s <= 0.0 {
                0.0
            } else {
                (resp.prob(t0, t1) / s).clamp(0.0, 1.0)
            }
        }
    }
}

fn grid_count(span: f64, step: f64, what: &str) -> Result<usize> {
    let n = round(span / step);
    if (n * step - span).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::invalid(alloc::format!("{what} must be a whole number of grid steps")));
    }
    Ok(n as usize)
}

/// States are (controller, response, time index, changes taken). Time is
/// the wait clock, so a coordination change moves it back. A decision at the
/// deadline without a response is worth 0.
pub fn build_abstract_mdp(inst: &ProblemInstance, grid: f64) -> Result<AaMdp> {
    inst.validate()?;
    if !(grid > 0.0 && grid.is_finite()) {
        return Err(Error::invalid("grid step must be positive"));
    }
    let n = grid_count(inst.wait.deadline(), grid, "deadline")?;
    if n == 0 {
        return Err(Error::invalid("deadline must span at least one grid step"));
    }
    let max_d = inst
        .coord
        .max_changes
        .ok_or_else(|| Error::invalid("coordination changes need a finite cap to build an MDP"))?;
    let back = if max_d > 0 { grid_count(inst.coord.value, grid, "coordination-change value")? } else { 0 };

    let ids = inst.ids();
    let mut resp_labels = vec!["none"];
    resp_labels.extend(ids.iter().copied());
    let schema = FeatureSchema::default()
        .categorical("controller", &ids)
        .categorical("response", &resp_labels)
        .numeric("time")
        .numeric("d_count");
    let a = inst.agent();
    let t = |k: usize| k as f64 * grid;
    let w: Vec<f64> = (0..=n).map(|k| inst.wait.at(t(k))).collect();
    let controllers: Vec<usize> =
        (0..inst.entities.len()).filter(|&i| i == a || !inst.entities[i].response.is_instant()).collect();

    let mut tab = StateTable::new();
    let open = |tab: &mut StateTable, c: usize, k: usize, d: usize| {
        if k == n {
            tab.intern(vec![c as f64, 0.0, k as f64, d as f64], true, 0.0)
        } else {
            tab.intern(vec![c as f64, 0.0, k as f64, d as f64], false, 0.0)
        }
    };
    let initial = open(&mut tab, a, 0, 0);
    for d in 0..=max_d {
        for k in 0..n {
            for &c in &controllers {
                let s = open(&mut tab, c, k, d);
                let step_cost = -(w[k + 1] - w[k]);
                let mut ts = Vec::new();
                // Holding `e` in control for one step.
                let hold = |tab: &mut StateTable, e: usize| -> Vec<(usize, f64)> {
                    let ent = &inst.entities[e];
                    let p = step_hazard(&ent.response, t(k), t(k + 1));
                    let answered = tab.intern(
                        vec![e as f64, (e + 1) as f64, (k + 1) as f64, d as f64],
                        true,
                        ent.quality.at(t(k + 1)),
                    );
                    let next = open(tab, e, k + 1, d);
                    compact(vec![(answered, p), (next, 1.0 - p)])
                };
                for (e, ent) in inst.entities.iter().enumerate() {
                    if ent.response.is_instant() {
                        let done = tab.intern(vec![e as f64, (e + 1) as f64, k as f64, d as f64], true, ent.quality.at(t(k)));
                        ts.push(Transition { action: AaAction::Transfer(ent.id.clone()), reward: 0.0, next: vec![(done, 1.0)] });
                    } else if e != c {
                        let next = hold(&mut tab, e);
                        ts.push(Transition { action: AaAction::Transfer(ent.id.clone()), reward: step_cost, next });
                    }
                }
                let wait_next = if c == a { vec![(open(&mut tab, c, k + 1, d), 1.0)] } else { hold(&mut tab, c) };
                ts.push(Transition { action: AaAction::Wait, reward: step_cost, next: wait_next });
                if d < max_d {
                    let next = open(&mut tab, c, k.saturating_sub(back), d + 1);
                    ts.push(Transition { action: AaAction::CoordChange, reward: -inst.coord.cost(d + 1), next: vec![(next, 1.0)] });
                }
                tab.transitions[s] = ts;
            }
        }
    }
    tab.finish(schema, initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    fn inst(dv: f64, cap: usize) -> ProblemInstance {
        let es = vec![Entity::agent("A", 1.0), Entity::markovian("e", 3.0, 0.1).unwrap()];
        ProblemInstance::new(es, WaitCostModel::exponential(0.05, 20.0).unwrap(), CoordChangeModel::constant(dv, 0.5, Some(cap)))
            .unwrap()
    }

    #[test]
    fn markovian_branch_probability() {
        let m = build_abstract_mdp(&inst(15.0, 1), 1.0).unwrap();
        let s0 = m.initial;
        let tr = m.transitions[s0].iter().find(|t| t.action == AaAction::Transfer("e".into())).unwrap();
        let p = tr.next.iter().find(|(j, _)| m.is_terminal(*j)).unwrap().1;
        assert!((p - (1.0 - (-0.1f64).exp())).abs() < 1e-12);
        assert!((p - 0.09516).abs() < 1e-5);
    }

    #[test]
    fn change_moves_clock_back_clamped() {
        let m = build_abstract_mdp(&inst(15.0, 1), 1.0).unwrap();
        let s = (0..m.len())
            .find(|&s| !m.is_terminal(s) && m.feature(s, "time") == Some(10.0) && m.feature(s, "d_count") == Some(0.0))
            .unwrap();
        let tr = m.transitions[s].iter().find(|t| t.action == AaAction::CoordChange).unwrap();
        assert_eq!(tr.next.len(), 1);
        assert_eq!(tr.next[0].1, 1.0);
        assert_eq!(m.feature(tr.next[0].0, "time"), Some(0.0));
        assert_eq!(m.feature(tr.next[0].0, "d_count"), Some(1.0));
        assert!((tr.reward + 0.5).abs() < 1e-15);
    }

    #[test]
    fn deadline_terminals_are_worth_nothing() {
        let m = build_abstract_mdp(&inst(15.0, 1), 1.0).unwrap();
        for s in 0..m.len() {
            if m.feature(s, "time") == Some(20.0) && m.feature(s, "response") == Some(0.0) {
                assert!(m.is_terminal(s));
                assert_eq!(m.terminal_reward[s], 0.0);
            }
        }
        assert!(m.topological_order().is_some());
    }

    #[test]
    fn off_grid_change_rejected() {
        assert!(build_abstract_mdp(&inst(1.5, 1), 1.0).is_err());
        let mut i = inst(1.0, 1);
        i.coord.max_changes = None;
        assert!(build_abstract_mdp(&i, 1.0).is_err());
    }
}
