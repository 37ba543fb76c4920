//! Deciding when to close a role-allocation auction. Bids arrive over time;
//! closing later sees more bids but leaves less preparation time.

use super::{compact, AaAction, AaMdp, FeatureSchema, StateTable, Transition};
use crate::error::{Error, Result};
use crate::math::powf;
use alloc::vec;
use alloc::vec::Vec;

const STATUS: [&str; 4] = ["open", "closed", "leader_decided", "deadline"];

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionScenario {
    /// Grid steps until the preparation deadline.
    pub steps: usize,
    /// Team members able to bid.
    pub bidders: usize,
    /// Chance that a new bid arrives in one step while someone has yet to bid.
    pub bid_prob: f64,
    /// Distribution of a bid's quality level (higher index is better).
    pub level_probs: Vec<f64>,
    /// Value of allocating to a bid of each level.
    pub level_value: Vec<f64>,
    /// Extra value per fraction of the team that has bid.
    pub count_weight: f64,
    /// Value of closing with no bids at all.
    pub no_bid_value: f64,
    /// Lost preparation time: `prep_cost * (elapsed fraction)^prep_exponent`.
    pub prep_cost: f64,
    pub prep_exponent: f64,
    /// Per-step chance that the team leader answers once asked.
    pub leader_rate: f64,
    pub leader_bonus: f64,
    pub leader_ask_cost: f64,
}

impl AuctionScenario {
    /// Reference scenario: four bidders over twenty steps, quadratic loss
    /// of preparation time.
    pub fn reference() -> Self {
        AuctionScenario {
            steps: 20,
            bidders: 4,
            bid_prob: 0.3,
            level_probs: vec![0.5, 0.3, 0.2],
            level_value: vec![2.0, 4.0, 6.0],
            count_weight: 1.0,
            no_bid_value: -20.0,
            prep_cost: 3.0,
            prep_exponent: 2.0,
            leader_rate: 0.1,
            leader_bonus: 0.5,
            leader_ask_cost: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.level_probs.len();
        if self.steps == 0 || self.bidders == 0 || l == 0 || self.level_value.len() != l {
            return Err(Error::invalid("auction needs steps, bidders and matching level tables"));
        }
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.bid_prob) || !prob(self.leader_rate) || !self.level_probs.iter().all(|p| prob(*p)) {
            return Err(Error::invalid("probabilities must lie in [0, 1]"));
        }
        if (self.level_probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("level probabilities must sum to 1"));
        }
        let vals = [self.count_weight, self.no_bid_value, self.prep_cost, self.prep_exponent, self.leader_bonus, self.leader_ask_cost];
        if !vals.iter().chain(&self.level_value).all(|x| x.is_finite()) || self.prep_cost < 0.0 || self.prep_exponent < 0.0 {
            return Err(Error::invalid("values must be finite and preparation terms ≥ 0"));
        }
        Ok(())
    }

    pub fn top_level(&self) -> usize {
        self.level_value.len() - 1
    }

    /// Value of allocating now, before the preparation penalty.
    pub fn close_value(&self, bids: usize, best: Option<usize>) -> f64 {
        match best {
            None => self.no_bid_value,
            Some(b) => self.level_value[b] + self.count_weight * bids as f64 / self.bidders as f64,
        }
    }

    pub fn prep_penalty(&self, k: usize) -> f64 {
        self.prep_cost * powf(k as f64 / self.steps as f64, self.prep_exponent)
    }

    /// Best and second-best levels after a bid of `level`.
    pub fn with_bid(best: Option<usize>, second: Option<usize>, level: usize) -> (Option<usize>, Option<usize>) {
        match best {
            Some(b) if b >= level => (Some(b), second.max(Some(level))),
            _ => (Some(level), best),
        }
    }
}

fn code(x: Option<usize>) -> f64 {
    x.map_or(-1.0, |v| v as f64)
}

/// States are (controller, status, time, bids, best level, second level);
/// levels are -1 before any bid. No coordination change is offered.
pub fn build_auction_mdp(sc: &AuctionScenario) -> Result<AaMdp> {
    sc.validate()?;
    let n = sc.steps;
    let levels = sc.level_value.len();
    let schema = FeatureSchema::default()
        .categorical("controller", &["agent", "leader"])
        .categorical("status", &STATUS)
        .numeric("time")
        .numeric("bids")
        .numeric("best")
        .numeric("second");
    let vals = |c: usize, st: usize, k: usize, b: usize, best: Option<usize>, second: Option<usize>| {
        vec![c as f64, st as f64, k as f64, b as f64, code(best), code(second)]
    };
    let mut tab = StateTable::new();
    let open = |tab: &mut StateTable, c: usize, k: usize, b: usize, best: Option<usize>, second: Option<usize>| {
        if k == n {
            tab.intern(vals(c, 3, k, b, best, second), true, sc.close_value(b, best) - sc.prep_penalty(n))
        } else {
            tab.intern(vals(c, 0, k, b, best, second), false, 0.0)
        }
    };
    let initial = open(&mut tab, 0, 0, 0, None, None);
    let none_or = |v: usize| if v == levels { None } else { Some(v) };
    for k in 0..n {
        for b in 0..=sc.bidders {
            for bi in 0..=levels {
                for si in 0..=levels {
                    let (best, second) = (none_or(bi), none_or(si));
                    // Only orderings a bid sequence can produce.
                    let consistent = match (b, best, second) {
                        (0, None, None) => true,
                        (1, Some(_), None) => true,
                        (x, Some(p), Some(q)) if x >= 2 => q <= p,
                        _ => false,
                    };
                    if !consistent {
                        continue;
                    }
                    for c in 0..2 {
                        let s = open(&mut tab, c, k, b, best, second);
                        let step = |tab: &mut StateTable, c: usize| -> Vec<(usize, f64)> {
                            let mut next = Vec::new();
                            let mut stay = 1.0;
                            if c == 1 {
                                let v = sc.close_value(b, best) + sc.leader_bonus - sc.prep_penalty(k + 1);
                                next.push((tab.intern(vals(c, 2, k + 1, b, best, second), true, v), sc.leader_rate));
                                stay = 1.0 - sc.leader_rate;
                            }
                            let arrive = if b < sc.bidders { sc.bid_prob } else { 0.0 };
                            for (lv, p) in sc.level_probs.iter().enumerate() {
                                if arrive * p > 0.0 {
                                    let (nb, ns) = AuctionScenario::with_bid(best, second, lv);
                                    next.push((open(tab, c, k + 1, b + 1, nb, ns), stay * arrive * p));
                                }
                            }
                            next.push((open(tab, c, k + 1, b, best, second), stay * (1.0 - arrive)));
                            compact(next)
                        };
                        let mut ts = Vec::new();
                        if c == 0 {
                            let next = step(&mut tab, 1);
                            ts.push(Transition { action: AaAction::Transfer("leader".into()), reward: -sc.leader_ask_cost, next });
                        }
                        let next = step(&mut tab, c);
                        ts.push(Transition { action: AaAction::Wait, reward: 0.0, next });
                        let done = tab.intern(vals(c, 1, k, b, best, second), true, sc.close_value(b, best) - sc.prep_penalty(k));
                        ts.push(Transition { action: AaAction::Decide("close".into()), reward: 0.0, next: vec![(done, 1.0)] });
                        tab.transitions[s] = ts;
                    }
                }
            }
        }
    }
    tab.finish(schema, initial)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn scenario() -> AuctionScenario {
        AuctionScenario {
            steps: 10,
            bidders: 3,
            bid_prob: 0.5,
            level_probs: vec![0.5, 0.3, 0.2],
            level_value: vec![2.0, 4.0, 6.0],
            count_weight: 1.0,
            no_bid_value: -20.0,
            prep_cost: 3.0,
            prep_exponent: 2.0,
            leader_rate: 0.3,
            leader_bonus: 0.5,
            leader_ask_cost: 0.2,
        }
    }

    #[test]
    fn bid_ordering() {
        assert_eq!(AuctionScenario::with_bid(None, None, 1), (Some(1), None));
        assert_eq!(AuctionScenario::with_bid(Some(1), None, 2), (Some(2), Some(1)));
        assert_eq!(AuctionScenario::with_bid(Some(2), Some(0), 1), (Some(2), Some(1)));
    }

    #[test]
    fn builds_acyclic_without_changes() {
        let m = build_auction_mdp(&scenario()).unwrap();
        assert!(m.topological_order().is_some());
        assert!(m.transitions.iter().flatten().all(|t| t.action != AaAction::CoordChange));
        // Closing with no bids is the worst outcome available.
        let s0 = m.initial;
        let close = m.transitions[s0].iter().find(|t| matches!(t.action, AaAction::Decide(_))).unwrap();
        assert_eq!(m.terminal_reward[close.next[0].0], -20.0);
    }
}
