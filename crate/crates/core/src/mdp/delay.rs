//! Meeting-attendance MDP: the agent may ask the user, wait, delay the
//! meeting or announce a decision itself.
//!
//! Time is measured relative to the currently scheduled meeting, so a delay
//! moves the clock back by its magnitude. The user's location evolves one
//! grid step at a time.

use super::{compact, AaAction, AaMdp, FeatureSchema, StateTable, Transition};
use crate::error::{Error, Result};
use crate::math::{exp, powf, round};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// At most this many delays per meeting.
pub const MAX_DELAYS: usize = 3;
pub const DECISIONS: [&str; 3] = ["attending", "not_attending", "cancel"];
const STATUS: [&str; 6] = ["open", "user_decided", "attending", "not_attending", "cancel", "timeout"];

/// Weights of the team reward: coordination-change cost, lateness cost,
/// joint-activity value and transfer cost. All enter as magnitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeamWeights {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayScenario {
    /// Minutes per grid step.
    pub step: f64,
    /// First and last clock values, in minutes relative to the meeting.
    pub start: f64,
    pub end: f64,
    pub locations: Vec<String>,
    /// Per-step location transition matrix.
    pub transition: Vec<Vec<f64>>,
    pub initial_location: usize,
    pub meeting_location: usize,
    /// User response rate per minute, by location.
    pub user_rate: Vec<f64>,
    /// Cost of reaching the user, by location.
    pub ask_cost: Vec<f64>,
    /// Minutes added by one delay.
    pub delay: f64,
    pub weights: TeamWeights,
    pub attendees: f64,
    /// Delay cost: `repair_base * attendees * delay * escalation^N`.
    pub repair_base: f64,
    pub escalation: f64,
    /// Lateness cost: `attendees * late_rate * (exp(late * late_growth) - 1)`.
    pub late_rate: f64,
    pub late_growth: f64,
    pub r_activity: f64,
    pub r_user: f64,
    /// Value of the user's own decision.
    pub user_quality: f64,
    /// Latest arrival considered when scoring an announcement, minutes
    /// after the meeting.
    pub max_wait: f64,
}

impl DelayScenario {
    /// Three-location reference scenario used by the sweeps and experiments:
    /// the user starts in the office, a delay buys ten minutes, and reaching
    /// the user costs more the further away they are.
    pub fn reference() -> Self {
        DelayScenario {
            step: 5.0,
            start: 0.0,
            end: 30.0,
            locations: vec!["office".into(), "home".into(), "meeting".into()],
            transition: vec![vec![0.7, 0.05, 0.25], vec![0.05, 0.85, 0.1], vec![0.0, 0.0, 1.0]],
            initial_location: 0,
            meeting_location: 2,
            user_rate: vec![0.05, 0.025, 0.01],
            ask_cost: vec![0.6, 1.5, 3.0],
            delay: 10.0,
            weights: TeamWeights { l1: 1.0, l2: 1.0, l3: 1.0, l4: 1.0 },
            attendees: 5.0,
            repair_base: 0.05,
            escalation: 2.0,
            late_rate: 0.1,
            late_growth: 0.05,
            r_activity: 10.0,
            r_user: 5.0,
            user_quality: 15.0,
            max_wait: 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.locations.len();
        let finite = |x: f64| x.is_finite();
        if l == 0 || self.initial_location >= l || self.meeting_location >= l {
            return Err(Error::invalid("locations must be nonempty and indices in range"));
        }
        if self.transition.len() != l || self.user_rate.len() != l || self.ask_cost.len() != l {
            return Err(Error::invalid("per-location tables must have one entry per location"));
        }
        for row in &self.transition {
            if row.len() != l || row.iter().any(|p| !(*p >= 0.0 && *p <= 1.0)) {
                return Err(Error::invalid("location matrix entries must be probabilities"));
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("location matrix rows must sum to 1"));
            }
        }
        if !(self.step > 0.0 && finite(self.step) && finite(self.start) && self.end > self.start && finite(self.end)) {
            return Err(Error::invalid("time grid must be positive and ordered"));
        }
        let w = self.weights;
        if [w.l1, w.l2, w.l3, w.l4].iter().any(|x| !(*x >= 0.0 && finite(*x))) {
            return Err(Error::invalid("weights must be finite and ≥ 0"));
        }
        let nonneg = [self.delay, self.attendees, self.repair_base, self.escalation, self.late_rate, self.late_growth];
        if nonneg.iter().any(|x| !(*x >= 0.0 && finite(*x)))
            || self.user_rate.iter().chain(&self.ask_cost).any(|x| !(*x >= 0.0 && finite(*x)))
        {
            return Err(Error::invalid("rates, costs and shape parameters must be finite and ≥ 0"));
        }
        if ![self.r_activity, self.r_user, self.user_quality].iter().all(|x| finite(*x)) || !(self.max_wait >= 0.0 && finite(self.max_wait)) {
            return Err(Error::invalid("rewards and the arrival horizon must be finite"));
        }
        self.steps()?;
        self.delay_steps()?;
        Ok(())
    }

    fn steps(&self) -> Result<usize> {
        whole(self.end - self.start, self.step, "time span")
    }

    fn delay_steps(&self) -> Result<usize> {
        whole(self.delay, self.step, "delay")
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    /// Cost of the next delay after `n` earlier ones; `None` once the cap
    /// is reached.
    pub fn repair_cost(&self, n: usize) -> Option<f64> {
        (n < MAX_DELAYS).then(|| self.repair_base * self.attendees * self.delay * powf(self.escalation, n as f64))
    }

    /// Cost of the team waiting `late` minutes past the meeting time.
    pub fn lateness_cost(&self, late: f64) -> f64 {
        if late <= 0.0 {
            0.0
        } else {
            self.attendees * self.late_rate * (exp(late * self.late_growth) - 1.0)
        }
    }

    /// Weighted team reward of one transition from its parts: response
    /// quality, delay cost, lateness cost, joint-activity value and
    /// transfer cost.
    pub fn team_reward(&self, quality: f64, f1: f64, f2: f64, f3: f64, f4: f64) -> f64 {
        let w = self.weights;
        quality - w.l1 * f1 - w.l2 * f2 + w.l3 * f3 - w.l4 * f4
    }
}

fn whole(span: f64, step: f64, what: &str) -> Result<usize> {
    let n = round(span / step);
    if (n * step - span).abs() > 1e-9 * span.abs().max(1.0) || n < 0.0 {
        return Err(Error::invalid(alloc::format!("{what} must be a whole number of grid steps")));
    }
    Ok(n as usize)
}

/// Expected reward of the agent announcing `decision` at clock `tau` with
/// the user at `location`. Attending pays the joint-activity value plus the
/// user's contribution on arrival, less the extra lateness the team sits
/// through; if the user has not arrived by `max_wait` the meeting runs
/// without them.
pub fn agent_decision_quality(sc: &DelayScenario, tau: f64, location: usize, decision: &str) -> Result<f64> {
    if location >= sc.locations.len() {
        return Err(Error::invalid("location out of range"));
    }
    let w = sc.weights;
    let sunk = sc.lateness_cost(tau);
    match decision {
        "attending" => {
            let full = w.l3 * (sc.r_activity + sc.r_user);
            let mut here = vec![0.0; sc.locations.len()];
            here[location] = 1.0;
            let mut value = 0.0;
            let mut t = tau;
            loop {
                // Arrivals at this step stop the walk.
                let arrive = here[sc.meeting_location];
                value += arrive * (full - w.l2 * (sc.lateness_cost(t) - sunk));
                here[sc.meeting_location] = 0.0;
                if t + sc.step > sc.max_wait.max(tau) + 1e-12 {
                    let missing: f64 = here.iter().sum();
                    value += missing * (w.l3 * sc.r_activity - w.l2 * (sc.lateness_cost(sc.max_wait.max(t)) - sunk));
                    return Ok(value);
                }
                let mut next = vec![0.0; here.len()];
                for (i, pi) in here.iter().enumerate() {
                    for (j, p) in sc.transition[i].iter().enumerate() {
                        next[j] += pi * p;
                    }
                }
                here = next;
                t += sc.step;
            }
        }
        "not_attending" => Ok(w.l3 * sc.r_activity),
        "cancel" => Ok(0.0),
        _ => Err(Error::invalid(alloc::format!("unknown decision \"{decision}\""))),
    }
}

/// Full product of controller, clock, delays taken and location, plus
/// terminals for each outcome.
pub fn build_delay_mdp(sc: &DelayScenario) -> Result<AaMdp> {
    sc.validate()?;
    let n = sc.steps()?;
    let back = sc.delay_steps()?;
    let locs: Vec<&str> = sc.locations.iter().map(|s| s.as_str()).collect();
    let schema = FeatureSchema::default()
        .categorical("controller", &["agent", "user"])
        .categorical("status", &STATUS)
        .numeric("time")
        .numeric("d_count")
        .categorical("location", &locs)
        .numeric("meeting_time");
    let state = |c: usize, status: usize, k: usize, d: usize, loc: usize| -> Vec<f64> {
        vec![c as f64, status as f64, sc.time_at(k), d as f64, loc as f64, d as f64 * sc.delay]
    };
    let mut tab = StateTable::new();
    let open = |tab: &mut StateTable, c: usize, k: usize, d: usize, loc: usize| {
        if k == n {
            tab.intern(state(c, 5, k, d, loc), true, 0.0)
        } else {
            tab.intern(state(c, 0, k, d, loc), false, 0.0)
        }
    };
    let initial = open(&mut tab, 0, 0, 0, sc.initial_location);
    let l = sc.locations.len();
    for d in 0..=MAX_DELAYS {
        for k in 0..n {
            for loc in 0..l {
                for c in 0..2 {
                    let s = open(&mut tab, c, k, d, loc);
                    let (t0, t1) = (sc.time_at(k), sc.time_at(k + 1));
                    let wait_cost = sc.lateness_cost(t1) - sc.lateness_cost(t0);
                    // One step with the user in control, possibly answering.
                    let user_step = |tab: &mut StateTable| -> Vec<(usize, f64)> {
                        let p = 1.0 - exp(-sc.user_rate[loc] * sc.step);
                        let mut next = vec![(tab.intern(state(1, 1, k + 1, d, loc), true, sc.user_quality), p)];
                        for (j, q) in sc.transition[loc].iter().enumerate() {
                            next.push((open(tab, 1, k + 1, d, j), (1.0 - p) * q));
                        }
                        compact(next)
                    };
                    let mut ts = Vec::new();
                    if c == 0 {
                        let next = user_step(&mut tab);
                        let reward = sc.team_reward(0.0, 0.0, wait_cost, 0.0, sc.ask_cost[loc]);
                        ts.push(Transition { action: AaAction::Transfer("user".into()), reward, next });
                    }
                    let next = if c == 0 {
                        compact(sc.transition[loc].iter().enumerate().map(|(j, q)| (open(&mut tab, 0, k + 1, d, j), *q)).collect())
                    } else {
                        user_step(&mut tab)
                    };
                    ts.push(Transition { action: AaAction::Wait, reward: sc.team_reward(0.0, 0.0, wait_cost, 0.0, 0.0), next });
                    if let Some(g) = sc.repair_cost(d) {
                        let next = open(&mut tab, c, k.saturating_sub(back), d + 1, loc);
                        ts.push(Transition {
                            action: AaAction::CoordChange,
                            reward: sc.team_reward(0.0, g, 0.0, 0.0, 0.0),
                            next: vec![(next, 1.0)],
                        });
                    }
                    for (i, dec) in DECISIONS.iter().enumerate() {
                        let q = agent_decision_quality(sc, t0, loc, dec)?;
                        let done = tab.intern(state(c, 2 + i, k, d, loc), true, q);
                        ts.push(Transition { action: AaAction::Decide((*dec).into()), reward: 0.0, next: vec![(done, 1.0)] });
                    }
                    tab.transitions[s] = ts;
                }
            }
        }
    }
    tab.finish(schema, initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    pub(crate) fn two_location() -> DelayScenario {
        DelayScenario {
            step: 5.0,
            start: -10.0,
            end: 20.0,
            locations: vec!["office".to_string(), "meeting".to_string()],
            transition: vec![vec![0.6, 0.4], vec![0.0, 1.0]],
            initial_location: 0,
            meeting_location: 1,
            user_rate: vec![0.2, 0.05],
            ask_cost: vec![0.1, 0.3],
            delay: 5.0,
            weights: TeamWeights { l1: 1.0, l2: 1.0, l3: 1.0, l4: 1.0 },
            attendees: 4.0,
            repair_base: 0.05,
            escalation: 2.0,
            late_rate: 0.1,
            late_growth: 0.1,
            r_activity: 10.0,
            r_user: 5.0,
            user_quality: 15.0,
            max_wait: 15.0,
        }
    }

    #[test]
    fn present_user_attends_at_full_value() {
        let sc = two_location();
        assert_eq!(agent_decision_quality(&sc, 0.0, 1, "attending").unwrap(), 15.0);
        assert_eq!(agent_decision_quality(&sc, 0.0, 1, "cancel").unwrap(), 0.0);
        assert!(agent_decision_quality(&sc, 0.0, 1, "lunch").is_err());
    }

    #[test]
    fn attending_matches_path_enumeration() {
        let sc = two_location();
        // Oracle: enumerate every location path of up to 6 steps.
        let tau = -5.0;
        let steps = ((sc.max_wait - tau) / sc.step) as usize;
        assert!(steps <= 6);
        let mut oracle = 0.0;
        for mask in 0..(1u32 << steps) {
            let mut p = 1.0;
            let mut loc = 0usize;
            let mut arrived = None;
            for j in 0..steps {
                let nxt = ((mask >> j) & 1) as usize;
                p *= sc.transition[loc][nxt];
                loc = nxt;
                if loc == 1 && arrived.is_none() {
                    arrived = Some(j + 1);
                }
            }
            let v = match arrived {
                Some(j) => 15.0 - sc.lateness_cost(tau + j as f64 * sc.step),
                None => 10.0 - sc.lateness_cost(sc.max_wait),
            };
            oracle += p * v;
        }
        let got = agent_decision_quality(&sc, tau, 0, "attending").unwrap();
        assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
    }

    #[test]
    fn delay_cap_and_costs() {
        let sc = two_location();
        assert!(sc.repair_cost(3).is_none());
        assert!((sc.repair_cost(2).unwrap() - 0.05 * 4.0 * 5.0 * 4.0).abs() < 1e-12);
        assert_eq!(sc.lateness_cost(-3.0), 0.0);
        let m = build_delay_mdp(&sc).unwrap();
        for s in 0..m.len() {
            if m.feature(s, "d_count") == Some(3.0) {
                assert!(m.transitions[s].iter().all(|t| t.action != AaAction::CoordChange));
            }
        }
        assert!(m.topological_order().is_some());
    }

    #[test]
    fn bad_matrix_rejected() {
        let mut sc = two_location();
        sc.transition[0] = vec![0.5, 0.4];
        assert!(build_delay_mdp(&sc).is_err());
    }
}
