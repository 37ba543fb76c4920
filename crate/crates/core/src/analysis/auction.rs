//! Replaying bid streams against an auction policy and against the
//! wait-then-close rule read off a two-entity strategy.

use crate::error::{Error, Result};
use crate::eu::optimize_timings;
use crate::mdp::{AaAction, AaMdp, AuctionScenario};
use crate::model::{CoordChangeModel, Entity, ProblemInstance, QualityModel, ResponseModel, Table, WaitCostModel};
use crate::rng::{stream, weighted_index};
use crate::strategy::{StrategyAction, StrategySkeleton};
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

/// Closes once the decisive event has happened (every bidder has bid or a
/// top-level bid is in), or at `threshold` if some bid is in.
#[derive(Debug, Clone, PartialEq)]
pub struct EaRule {
    pub threshold: f64,
    pub instance: ProblemInstance,
}

impl EaRule {
    fn closes(&self, sc: &AuctionScenario, k: usize, bids: usize, best: Option<usize>) -> bool {
        bids == sc.bidders || best == Some(sc.top_level()) || (bids > 0 && k as f64 >= self.threshold)
    }
}

/// Builds the rule. The bidders together act as one entity that "decides"
/// at the decisive event; the agent's quality at time `t` is the expected
/// value of closing then; waiting costs the preparation penalty.
pub fn ea_rule(sc: &AuctionScenario) -> Result<EaRule> {
    sc.validate()?;
    let n = sc.steps;
    let top = sc.top_level();
    // Mass over (bids, best) among streams without the decisive event.
    let mut dist: BTreeMap<(usize, Option<usize>), f64> = BTreeMap::new();
    dist.insert((0, None), 1.0);
    let mut agent_q = vec![sc.no_bid_value];
    let mut decisive = Vec::with_capacity(n);
    let (mut decided_mass, mut decided_value) = (0.0, 0.0);
    for _ in 0..n {
        let mut next = BTreeMap::new();
        let mut hit = 0.0;
        for (&(b, best), &p) in &dist {
            let arrive = if b < sc.bidders { sc.bid_prob } else { 0.0 };
            *next.entry((b, best)).or_insert(0.0) += p * (1.0 - arrive);
            for (lv, q) in sc.level_probs.iter().enumerate() {
                let m = p * arrive * q;
                if m <= 0.0 {
                    continue;
                }
                let nb = best.max(Some(lv));
                if b + 1 == sc.bidders || nb == Some(top) {
                    hit += m;
                    decided_value += m * sc.close_value(b + 1, nb);
                } else {
                    *next.entry((b + 1, nb)).or_insert(0.0) += m;
                }
            }
        }
        decided_mass += hit;
        decisive.push(hit);
        let mass: f64 = next.values().sum();
        let q = if mass > 0.0 { next.iter().map(|(&(b, best), &p)| p * sc.close_value(b, best)).sum::<f64>() / mass } else { sc.no_bid_value };
        agent_q.push(q);
        dist = next;
    }
    let bidders_q = if decided_mass > 0.0 { decided_value / decided_mass } else { sc.no_bid_value };
    // Step masses spread evenly over each step.
    const EDGE: f64 = 1e-4;
    let mut pairs = Vec::with_capacity(2 * n);
    for (k, m) in decisive.iter().enumerate() {
        pairs.push((k as f64 + EDGE, *m / (1.0 - 2.0 * EDGE)));
        pairs.push((k as f64 + 1.0 - EDGE, *m / (1.0 - 2.0 * EDGE)));
    }
    let times: Vec<f64> = (0..=n).map(|k| k as f64).collect();
    let wait: Vec<f64> = (0..=n).map(|k| sc.prep_penalty(k)).collect();
    let entities = vec![
        Entity { id: "A".into(), is_agent: true, quality: QualityModel::Tabulated(Table::new(times.clone(), agent_q)?), response: ResponseModel::Instant },
        Entity { id: "e".into(), is_agent: false, quality: QualityModel::Constant(bidders_q), response: ResponseModel::tabulated(Table::from_pairs(&pairs)?)? },
    ];
    let inst = ProblemInstance::new(entities, WaitCostModel::tabulated(Table::new(times, wait)?, n as f64)?, CoordChangeModel::none())?;
    let best = optimize_timings(&inst, &StrategySkeleton::parse("eA", &["A", "e"])?)?;
    let threshold = match best.strategy.actions.first() {
        Some(StrategyAction::Transfer { end, .. }) => *end,
        _ => return Err(Error::numeric("timing search returned no transfer")),
    };
    Ok(EaRule { threshold, instance: inst })
}

/// Bid level (if any) arriving at each time `0..=steps`, drawn from the
/// scenario's arrival model; no bid arrives at time 0.
pub fn bid_stream(sc: &AuctionScenario, seed: u64) -> Vec<Option<usize>> {
    let mut r = stream(seed, 0);
    let mut out = vec![None];
    let mut b = 0;
    for _ in 0..sc.steps {
        if b < sc.bidders && r.gen::<f64>() < sc.bid_prob {
            out.push(Some(weighted_index(&mut r, &sc.level_probs)));
            b += 1;
        } else {
            out.push(None);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionOutcome {
    pub seed: u64,
    pub mdp_close: usize,
    pub ea_close: usize,
    pub mdp_pct: f64,
    pub ea_pct: f64,
}

fn pct(sc: &AuctionScenario, k: usize) -> f64 {
    (sc.steps - k) as f64 / sc.steps as f64 * 100.0
}

/// Time at which the policy closes on `bids`. The leader never answers
/// during a replay.
pub fn mdp_close_time(sc: &AuctionScenario, mdp: &AaMdp, policy: &[Option<usize>], bids: &[Option<usize>]) -> Result<usize> {
    if bids.len() != sc.steps + 1 {
        return Err(Error::invalid("bid stream must cover every time step"));
    }
    let want = |c: usize, k: usize, b: usize, best: Option<usize>, second: Option<usize>| {
        let code = |x: Option<usize>| x.map_or(-1.0, |v| v as f64);
        vec![c as f64, if k == sc.steps { 3.0 } else { 0.0 }, k as f64, b as f64, code(best), code(second)]
    };
    let (mut c, mut b, mut best, mut second) = (0, 0, None, None);
    if let Some(lv) = bids[0] {
        (best, second) = AuctionScenario::with_bid(best, second, lv);
        b = 1;
    }
    let target = want(0, 0, b, best, second);
    let mut s = (0..mdp.len())
        .find(|&s| mdp.states[s].values == target)
        .ok_or_else(|| Error::invalid("bid stream leaves the auction state space"))?;
    for k in 0..sc.steps {
        let a = policy[s].ok_or_else(|| Error::invalid("policy undefined on the replay path"))?;
        let t = &mdp.transitions[s][a];
        match t.action {
            AaAction::Decide(_) => return Ok(k),
            AaAction::Transfer(_) => c = 1,
            _ => {}
        }
        if let Some(lv) = bids[k + 1] {
            (best, second) = AuctionScenario::with_bid(best, second, lv);
            b += 1;
        }
        let target = want(c, k + 1, b, best, second);
        s = t
            .next
            .iter()
            .map(|&(j, _)| j)
            .find(|&j| mdp.states[j].values == target)
            .ok_or_else(|| Error::invalid("bid stream leaves the auction state space"))?;
    }
    Ok(sc.steps)
}

pub fn ea_close_time(sc: &AuctionScenario, rule: &EaRule, bids: &[Option<usize>]) -> usize {
    let (mut b, mut best) = (0, None);
    for (k, bid) in bids.iter().enumerate().take(sc.steps) {
        if let Some(lv) = bid {
            b += 1;
            best = best.max(Some(*lv));
        }
        if rule.closes(sc, k, b, best) {
            return k;
        }
    }
    sc.steps
}

/// Closure times of both policies on the bid stream drawn from `seed`.
pub fn auction_replay(sc: &AuctionScenario, mdp: &AaMdp, policy: &[Option<usize>], rule: &EaRule, seed: u64) -> Result<AuctionOutcome> {
    let bids = bid_stream(sc, seed);
    let mdp_close = mdp_close_time(sc, mdp, policy, &bids)?;
    let ea_close = ea_close_time(sc, rule, &bids);
    Ok(AuctionOutcome { seed, mdp_close, ea_close, mdp_pct: pct(sc, mdp_close), ea_pct: pct(sc, ea_close) })
}
