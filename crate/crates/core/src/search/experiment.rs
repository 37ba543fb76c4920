//! Optimal strategy lengths over randomly drawn instances.

use super::markov::markov_optimum;
use crate::error::{Error, Result};
use crate::model::{CoordChangeModel, Entity, ProblemInstance, WaitCostModel};
use crate::rng::{stream, uniform};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use rand::Rng;

/// Ranges are inclusive and sampled uniformly. Every instance is solved
/// once per wait rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub configs: usize,
    /// Entity count including the agent.
    pub entities: (usize, usize),
    pub rate: (f64, f64),
    pub quality: (f64, f64),
    pub d_value: (f64, f64),
    pub d_cost: (f64, f64),
    pub max_changes: usize,
    pub wait_rates: Vec<f64>,
    pub deadline: f64,
    /// Clock cells per instance.
    pub steps: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            configs: 1000,
            entities: (3, 25),
            rate: (0.01, 2.0),
            quality: (0.0, 10.0),
            d_value: (0.0, 5.0),
            d_cost: (0.0, 5.0),
            max_changes: 4,
            wait_rates: alloc::vec![0.01, 0.03, 0.06, 0.12, 0.25, 0.5, 1.0, 2.0, 3.0],
            deadline: 10.0,
            steps: 1000,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        if self.configs == 0 || self.steps == 0 || self.wait_rates.is_empty() {
            return Err(Error::invalid("configs, steps and wait rates must be nonempty"));
        }
        if self.entities.0 < 2 || self.entities.0 > self.entities.1 {
            return Err(Error::invalid("entity range must be ordered and include the agent and one other"));
        }
        if !(ordered(self.rate) && self.rate.0 > 0.0) {
            return Err(Error::invalid("rate range must be positive and ordered"));
        }
        if !(ordered(self.quality) && ordered(self.d_value) && ordered(self.d_cost)) || self.d_value.0 < 0.0 || self.d_cost.0 < 0.0 {
            return Err(Error::invalid("ranges must be ordered and change draws ≥ 0"));
        }
        if self.wait_rates.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || !(self.deadline > 0.0 && self.deadline.is_finite()) {
            return Err(Error::invalid("wait rates must be ≥ 0 and the deadline positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketHistogram {
    pub wait_rate: f64,
    /// Optimal strategy length → number of instances.
    pub counts: BTreeMap<usize, usize>,
    pub total: usize,
}

impl BucketHistogram {
    pub fn percentage(&self, len: usize) -> f64 {
        100.0 * self.counts.get(&len).copied().unwrap_or(0) as f64 / self.total as f64
    }

    /// Most frequent length; the shorter wins a tie.
    pub fn modal(&self) -> usize {
        let mut best = (0, 0);
        for (&l, &c) in &self.counts {
            if c > best.1 {
                best = (l, c);
            }
        }
        best.0
    }
}

fn draw(cfg: &ExperimentConfig, index: usize) -> Result<(Vec<Entity>, CoordChangeModel)> {
    let mut r = stream(cfg.seed, index as u64);
    let n = r.gen_range(cfg.entities.0..=cfg.entities.1);
    let mut es = Vec::with_capacity(n);
    let mut lowest = f64::INFINITY;
    for j in 1..n {
        let rate = uniform(&mut r, cfg.rate.0, cfg.rate.1);
        let q = uniform(&mut r, cfg.quality.0, cfg.quality.1);
        lowest = lowest.min(q);
        es.push(Entity::markovian(&format!("e{j}"), q, rate)?);
    }
    // The agent decides at once but worse than anyone else.
    let qa = uniform(&mut r, cfg.quality.0.min(lowest), lowest);
    es.insert(0, Entity::agent("A", qa));
    let dv = uniform(&mut r, cfg.d_value.0, cfg.d_value.1);
    let dc = uniform(&mut r, cfg.d_cost.0, cfg.d_cost.1);
    Ok((es, CoordChangeModel::constant(dv, dc, Some(cfg.max_changes))))
}

/// Length distribution of optimal strategies per wait rate. Deterministic
/// in the seed: instance `i` draws from its own stream.
pub fn random_config_experiment(cfg: &ExperimentConfig) -> Result<Vec<BucketHistogram>> {
    cfg.validate()?;
    let mut out: Vec<BucketHistogram> = cfg
        .wait_rates
        .iter()
        .map(|&w| BucketHistogram { wait_rate: w, counts: BTreeMap::new(), total: 0 })
        .collect();
    for i in 0..cfg.configs {
        let (es, coord) = draw(cfg, i)?;
        for b in out.iter_mut() {
            let wait = WaitCostModel::exponential(b.wait_rate, cfg.deadline)?;
            let inst = ProblemInstance::new(es.clone(), wait, coord.clone())?;
            let opt = markov_optimum(&inst, cfg.steps, cfg.max_changes)?;
            *b.counts.entry(opt.len()).or_insert(0) += 1;
            b.total += 1;
        }
    }
    Ok(out)
}
