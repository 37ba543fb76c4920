//! Strategy enumeration, pruning and optimal-strategy search.

mod experiment;
mod dominance;
mod markov;

pub use experiment::{random_config_experiment, BucketHistogram, ExperimentConfig};
pub use dominance::{kth_change_test, last_change_never_pays, takeback_test, takeback_never_helps, DOMINANCE_GRID};
pub use markov::{markov_optimum, MarkovOptimum};

use crate::error::{Error, Result};
use crate::eu::{optimize_timings, EuBreakdown};
use crate::model::ProblemInstance;
use crate::strategy::{Step, StrategySkeleton, TimedStrategy};
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

/// EU differences at or below this are ties.
pub const TIE_TOL: f64 = 1e-9;

/// All grammatical skeletons of length ≤ `k` with at most `max_d`
/// coordination changes, ordered by length and then by symbol position
/// (entities in the given order, then D).
pub fn enumerate_skeletons(ids: &[&str], k: usize, max_d: usize) -> Result<Vec<StrategySkeleton>> {
    if ids.is_empty() {
        return Err(Error::invalid("entity set is empty"));
    }
    if k == 0 {
        return Err(Error::invalid("maximum length must be ≥ 1"));
    }
    let mut out = Vec::new();
    let mut layer: Vec<Vec<Step>> = ids.iter().map(|e| vec![Step::Entity(e.to_string())]).collect();
    for len in 1..=k {
        out.extend(layer.iter().cloned().map(StrategySkeleton::new));
        if len == k {
            break;
        }
        let mut next = Vec::with_capacity(layer.len() * (ids.len() + 1));
        for s in &layer {
            let d = s.iter().filter(|x| matches!(x, Step::D)).count();
            for e in ids {
                let mut t = s.clone();
                t.push(Step::Entity(e.to_string()));
                next.push(t);
            }
            if d < max_d {
                let mut t = s.clone();
                t.push(Step::D);
                next.push(t);
            }
        }
        layer = next;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonEntry {
    pub skeleton: StrategySkeleton,
    pub strategy: TimedStrategy,
    pub eu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub best: TimedStrategy,
    pub best_eu: f64,
    pub breakdown: EuBreakdown,
    /// Skeletons whose timings were optimized.
    pub examined: usize,
    pub pruned_by_takeback: usize,
    pub pruned_by_change_bound: usize,
    /// Skeletons equivalent to a shorter one or dominated by dropping a
    /// trailing change.
    pub pruned_structural: usize,
    pub table: Vec<SkeletonEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    pub prune: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { prune: true }
    }
}

enum Fate {
    Keep,
    Structural,
    Takeback,
    ChangeBound,
}

struct Pruner<'a> {
    inst: &'a ProblemInstance,
    nonneg_quality: bool,
    takeback_useless: BTreeMap<String, bool>,
}

impl<'a> Pruner<'a> {
    fn new(inst: &'a ProblemInstance) -> Result<Self> {
        let mut takeback_useless = BTreeMap::new();
        for e in &inst.entities {
            if !e.is_agent {
                takeback_useless.insert(e.id.clone(), takeback_never_helps(inst, &e.id)?);
            }
        }
        let nonneg_quality = inst.entities.iter().all(|e| e.quality.min_value() >= 0.0);
        Ok(Pruner { inst, nonneg_quality, takeback_useless })
    }

    fn is_instant(&self, id: &str) -> bool {
        self.inst.index_of(id).is_some_and(|i| self.inst.entities[i].response.is_instant())
    }

    fn fate(&self, sk: &StrategySkeleton) -> Fate {
        let st = &sk.steps;
        let n = st.len();
        let mut prev: Option<&str> = None;
        for (i, s) in st.iter().enumerate() {
            match s {
                Step::Entity(e) => {
                    if self.is_instant(e) && i + 1 < n {
                        return Fate::Structural;
                    }
                    if prev == Some(e.as_str()) {
                        return Fate::Structural;
                    }
                    prev = Some(e);
                }
                Step::D => prev = None,
            }
        }
        if matches!(st.last(), Some(Step::D)) && self.nonneg_quality {
            return Fate::Structural;
        }
        let m = sk.d_count();
        if last_change_never_pays(self.inst, m) {
            return Fate::ChangeBound;
        }
        if m == 0 && n >= 2 {
            if let (Step::Entity(e), Step::Entity(a)) = (&st[n - 2], &st[n - 1]) {
                let agent = &self.inst.entities[self.inst.agent()].id;
                if a == agent && self.takeback_useless.get(e).copied().unwrap_or(false) {
                    return Fate::Takeback;
                }
            }
        }
        Fate::Keep
    }
}

/// Strict preference between two evaluated skeletons: higher EU beyond the
/// tie tolerance, then fewer steps, then symbol order.
fn better(a: &SkeletonEntry, b: &SkeletonEntry, order: &BTreeMap<String, usize>) -> bool {
    if a.eu > b.eu + TIE_TOL {
        return true;
    }
    if b.eu > a.eu + TIE_TOL {
        return false;
    }
    match a.skeleton.len().cmp(&b.skeleton.len()) {
        Ordering::Less => return true,
        Ordering::Greater => return false,
        Ordering::Equal => {}
    }
    let key = |s: &Step| match s {
        Step::Entity(e) => order.get(e).copied().unwrap_or(usize::MAX - 1),
        Step::D => usize::MAX,
    };
    let ka: Vec<usize> = a.skeleton.steps.iter().map(key).collect();
    let kb: Vec<usize> = b.skeleton.steps.iter().map(key).collect();
    ka < kb
}

pub fn best_strategy(inst: &ProblemInstance, k: usize) -> Result<SearchReport> {
    best_strategy_with(inst, k, SearchOptions::default())
}

/// Optimal timed strategy over every skeleton of length ≤ `k`.
pub fn best_strategy_with(inst: &ProblemInstance, k: usize, opts: SearchOptions) -> Result<SearchReport> {
    inst.validate()?;
    let ids = inst.ids();
    let max_d = inst.coord.max_changes.unwrap_or(k).min(k.saturating_sub(1));
    let skeletons = enumerate_skeletons(&ids, k, max_d)?;
    let order: BTreeMap<String, usize> = ids.iter().enumerate().map(|(i, e)| (e.to_string(), i)).collect();
    let pruner = if opts.prune { Some(Pruner::new(inst)?) } else { None };
    let mut rep = SearchReport {
        best: TimedStrategy::new(Vec::new()),
        best_eu: f64::NEG_INFINITY,
        breakdown: EuBreakdown::default(),
        examined: 0,
        pruned_by_takeback: 0,
        pruned_by_change_bound: 0,
        pruned_structural: 0,
        table: Vec::new(),
    };
    let mut best: Option<(SkeletonEntry, EuBreakdown)> = None;
    for sk in skeletons {
        if let Some(p) = &pruner {
            match p.fate(&sk) {
                Fate::Keep => {}
                Fate::Structural => {
                    rep.pruned_structural += 1;
                    continue;
                }
                Fate::Takeback => {
                    rep.pruned_by_takeback += 1;
                    continue;
                }
                Fate::ChangeBound => {
                    rep.pruned_by_change_bound += 1;
                    continue;
                }
            }
        }
        let r = optimize_timings(inst, &sk)?;
        rep.examined += 1;
        let entry = SkeletonEntry { skeleton: sk, strategy: r.strategy, eu: r.breakdown.total };
        let replace = match &best {
            None => true,
            Some((b, _)) => better(&entry, b, &order),
        };
        if replace {
            best = Some((entry.clone(), r.breakdown));
        }
        rep.table.push(entry);
    }
    let (b, bd) = best.ok_or_else(|| Error::numeric("no strategy could be evaluated"))?;
    rep.best = b.strategy;
    rep.best_eu = b.eu;
    rep.breakdown = bd;
    Ok(rep)
}
