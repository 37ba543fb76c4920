//! Timing optimization for skeletons and the marginal value of a
//! coordination change.

use super::{eu_of_strategy, eu_total, EuBreakdown};
use crate::error::{Error, Result};
use crate::math::golden_max;
use crate::model::ProblemInstance;
use crate::strategy::{validate_strategy, Step, StrategyAction, StrategySkeleton, TimedStrategy};
use alloc::vec;
use alloc::vec::Vec;

/// Grid points per timing coordinate.
pub const TIMING_GRID: usize = 33;
/// Coordinate ascent stops once a sweep gains no more than this.
pub const ASCENT_TOL: f64 = 1e-9;
/// Times the search window may double.
pub const MAX_WIDENINGS: usize = 8;
const MAX_SWEEPS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingResult {
    pub strategy: TimedStrategy,
    pub breakdown: EuBreakdown,
    pub evaluations: usize,
}

struct Template<'a> {
    steps: &'a [Step],
    /// For each step that is a transfer with a free end time, its coordinate.
    coord_of: Vec<Option<usize>>,
    dims: usize,
}

impl<'a> Template<'a> {
    fn new(inst: &ProblemInstance, sk: &'a StrategySkeleton) -> Self {
        let n = sk.steps.len();
        let mut coord_of = vec![None; n];
        let mut dims = 0;
        for (i, st) in sk.steps.iter().enumerate() {
            if let Step::Entity(id) = st {
                let instant = inst.index_of(id).is_some_and(|k| inst.entities[k].response.is_instant());
                if instant {
                    // Nothing after an instant decision is reachable.
                    break;
                }
                if i + 1 < n {
                    coord_of[i] = Some(dims);
                    dims += 1;
                }
            }
        }
        Template { steps: &sk.steps, coord_of, dims }
    }

    fn build(&self, x: &[f64]) -> Vec<StrategyAction> {
        let n = self.steps.len();
        let mut t = 0.0;
        let mut out = Vec::with_capacity(n);
        for (i, st) in self.steps.iter().enumerate() {
            match st {
                Step::Entity(id) => {
                    let end = match self.coord_of[i] {
                        Some(c) => t + x[c],
                        None if i + 1 == n => f64::INFINITY,
                        None => t,
                    };
                    out.push(StrategyAction::Transfer { entity: id.clone(), end });
                    t = end;
                }
                Step::D => out.push(StrategyAction::CoordChange { at: t }),
            }
        }
        out
    }
}

/// Length of the time window worth searching for one duration.
fn horizon(inst: &ProblemInstance, sk: &StrategySkeleton) -> f64 {
    let mut h = inst.wait.deadline();
    for e in &inst.entities {
        let s = e.response.support_end();
        if s.is_finite() {
            h = h.max(s);
        }
        h = h.max(e.quality.settles_at());
    }
    h + sk.d_count() as f64 * inst.coord.value
}

fn check_skeleton(inst: &ProblemInstance, sk: &StrategySkeleton) -> Result<()> {
    if !sk.is_grammatical() {
        return Err(Error::invalid("skeleton must start with an entity"));
    }
    for st in &sk.steps {
        if let Step::Entity(id) = st {
            if inst.index_of(id).is_none() {
                return Err(Error::invalid(alloc::format!("unknown entity \"{id}\"")));
            }
        }
    }
    if !inst.coord.allows(sk.d_count()) {
        return Err(Error::invalid("skeleton has more coordination changes than allowed"));
    }
    Ok(())
}

/// Chooses transfer end times maximizing expected utility: a grid over each
/// duration refined by golden section, iterated as coordinate ascent. A
/// duration that ends on the edge of the window doubles the window.
pub fn optimize_timings(inst: &ProblemInstance, sk: &StrategySkeleton) -> Result<TimingResult> {
    check_skeleton(inst, sk)?;
    let tpl = Template::new(inst, sk);
    let mut h = horizon(inst, sk);
    let mut evals = 0usize;
    let mut x = vec![0.0; tpl.dims];
    let mut best = eu_total(inst, &tpl.build(&x))?;
    evals += 1;
    for _ in 0..=MAX_WIDENINGS {
        ascend(inst, &tpl, h, &mut x, &mut best, &mut evals)?;
        let step = h / (TIMING_GRID - 1) as f64;
        if !x.iter().any(|&v| v >= h - 0.5 * step) {
            break;
        }
        h *= 2.0;
    }
    let strategy = TimedStrategy::new(tpl.build(&x));
    let breakdown = eu_of_strategy(inst, &strategy)?;
    Ok(TimingResult { strategy, breakdown, evaluations: evals })
}

/// Coordinate ascent within `[0, h]` starting from `x`.
fn ascend(inst: &ProblemInstance, tpl: &Template<'_>, h: f64, x: &mut Vec<f64>, best: &mut f64, evals: &mut usize) -> Result<()> {
    let step = h / (TIMING_GRID - 1) as f64;
    let mut eval = |x: &[f64]| -> Result<f64> {
        *evals += 1;
        eu_total(inst, &tpl.build(x))
    };
    let mut sweeps = 0;
    loop {
        let before = *best;
        for c in 0..tpl.dims {
            let mut y = x.clone();
            let mut arg = x[c];
            for g in 0..TIMING_GRID {
                y[c] = g as f64 * step;
                let v = eval(&y)?;
                if v > *best {
                    *best = v;
                    arg = y[c];
                }
            }
            let lo = (arg - step).max(0.0);
            let hi = (arg + step).min(h);
            let mut err = None;
            let (ga, gv) = golden_max(
                |t| {
                    y[c] = t;
                    match eval(&y) {
                        Ok(v) => v,
                        Err(e) => {
                            err = Some(e);
                            f64::NEG_INFINITY
                        }
                    }
                },
                lo,
                hi,
                1e-10 * h.max(1.0),
            );
            if let Some(e) = err {
                return Err(e);
            }
            if gv > *best {
                *best = gv;
                arg = ga;
            }
            x[c] = arg;
        }
        sweeps += 1;
        let mut gained = *best - before > ASCENT_TOL;
        if !gained {
            // Fixed-point check: no single ±step move may improve.
            'outer: for c in 0..tpl.dims {
                for dir in [-1.0, 1.0] {
                    let mut y = x.clone();
                    y[c] = (x[c] + dir * step).clamp(0.0, h);
                    let v = eval(&y)?;
                    if v > *best + 1e-12 {
                        *best = v;
                        *x = y;
                        gained = true;
                        break 'outer;
                    }
                }
            }
        }
        if !gained || sweeps >= MAX_SWEEPS {
            return Ok(());
        }
    }
}

/// Inserts a coordination change at `at`, splitting the transfer segment
/// that contains it.
pub fn insert_coord_change(s: &TimedStrategy, at: f64) -> Result<TimedStrategy> {
    if !(at >= 0.0 && at.is_finite()) {
        return Err(Error::invalid("insertion time must be finite and ≥ 0"));
    }
    if s.actions.iter().any(|a| matches!(a, StrategyAction::CoordChange { at: x } if *x == at)) {
        return Err(Error::invalid("strategy already changes coordination at that time"));
    }
    let mut out = Vec::with_capacity(s.actions.len() + 2);
    let mut start = 0.0;
    let mut done = false;
    for a in &s.actions {
        if !done {
            if let StrategyAction::Transfer { entity, end } = a {
                if start <= at && at < *end {
                    out.push(StrategyAction::Transfer { entity: entity.clone(), end: at });
                    out.push(StrategyAction::CoordChange { at });
                    out.push(a.clone());
                    done = true;
                    start = *end;
                    continue;
                }
            }
        }
        if !done && a.time() > at {
            // Falls in a gap before this action.
            out.push(StrategyAction::CoordChange { at });
            done = true;
        }
        start = a.time();
        out.push(a.clone());
    }
    if !done {
        out.push(StrategyAction::CoordChange { at });
    }
    Ok(TimedStrategy::new(out))
}

/// EU gain from inserting a coordination change at `at`, gross of its cost.
pub fn d_marginal_value(inst: &ProblemInstance, s: &TimedStrategy, at: f64) -> Result<f64> {
    let with = insert_coord_change(s, at)?;
    let mut free = inst.clone();
    for c in free.coord.costs.iter_mut() {
        *c = 0.0;
    }
    if free.coord.costs.is_empty() {
        free.coord.costs.push(0.0);
    }
    let v = validate_strategy(&with, &free);
    if !v.is_empty() {
        return Err(Error::invalid("inserting the change makes the strategy invalid"));
    }
    Ok(eu_of_strategy(&free, &with)?.total - eu_of_strategy(&free, s)?.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eu::{eu_closed_form, TwoEntityParams, ClosedFormKind};

    fn params(alpha: f64, beta: f64) -> TwoEntityParams {
        TwoEntityParams { rho: 0.3, omega: 0.05, alpha, beta, deadline: 40.0, d_value: 2.0, d_cost: 0.0 }
    }

    #[test]
    fn single_transfer_has_no_free_timing() {
        let p = params(1.0, 3.0);
        let inst = p.instance().unwrap();
        let sk = StrategySkeleton::parse("e", &["A", "e"]).unwrap();
        let r = optimize_timings(&inst, &sk).unwrap();
        assert_eq!(r.strategy.actions, vec![TimedStrategy::transfer("e", f64::INFINITY)]);
        let cf = eu_closed_form(&p, ClosedFormKind::E, 0.0, 0.0).unwrap().value;
        assert!((r.breakdown.total - cf).abs() < 1e-6);
    }

    #[test]
    fn better_agent_takes_back_at_once() {
        let p = params(3.0, 2.0);
        let inst = p.instance().unwrap();
        let sk = StrategySkeleton::parse("eA", &["A", "e"]).unwrap();
        let r = optimize_timings(&inst, &sk).unwrap();
        assert_eq!(r.strategy.actions[0].time(), 0.0);
        assert!((r.breakdown.total - (3.0 - 0.05)).abs() < 1e-12);
    }

    #[test]
    fn hand_back_time_matches_dense_grid() {
        // Steep enough that holding on to the deadline never pays.
        let p = TwoEntityParams { rho: 0.2, omega: 0.5, alpha: 1.0, beta: 10.0, deadline: 20.0, d_value: 0.0, d_cost: 0.0 };
        let inst = p.instance().unwrap();
        let sk = StrategySkeleton::parse("eA", &["A", "e"]).unwrap();
        let r = optimize_timings(&inst, &sk).unwrap();
        // Oracle: dense grid over the closed form.
        let n = 10_000;
        let mut arg = 0.0;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=n {
            let t = 20.0 * i as f64 / n as f64;
            let v = eu_closed_form(&p, ClosedFormKind::EA, t, 0.0).unwrap().value;
            if v > best {
                best = v;
                arg = t;
            }
        }
        let t = r.strategy.actions[0].time();
        assert!(arg > 0.0 && arg < 20.0);
        assert!((t - arg).abs() <= 20.0 / n as f64 + 1e-6, "{t} vs {arg}");
        assert!(r.breakdown.total >= best - 1e-8);
    }

    #[test]
    fn too_many_changes_rejected() {
        let mut inst = params(1.0, 2.0).instance().unwrap();
        inst.coord.max_changes = Some(1);
        let sk = StrategySkeleton::parse("eDeDA", &["A", "e"]).unwrap();
        assert!(optimize_timings(&inst, &sk).is_err());
    }

    #[test]
    fn insertion_splits_segment() {
        let s = TimedStrategy::parse("e(3)A", &["A", "e"]).unwrap();
        let t = insert_coord_change(&s, 1.0).unwrap();
        assert_eq!(t.to_string(), "e(1)De(3)A");
        let u = insert_coord_change(&s, 3.0).unwrap();
        assert_eq!(u.to_string(), "e(3)A(3)DA");
    }

    #[test]
    fn zero_value_change_is_worthless() {
        let mut p = params(1.0, 5.0);
        p.d_value = 0.0;
        let inst = p.instance().unwrap();
        let s = TimedStrategy::parse("e(3)A", &["A", "e"]).unwrap();
        let v = d_marginal_value(&inst, &s, 1.0).unwrap();
        // Only quadrature error separates the two evaluations.
        assert!(v.abs() < 1e-10, "{v}");
    }

    #[test]
    fn marginal_value_matches_two_quadratures() {
        let p = TwoEntityParams { rho: 0.5, omega: 0.2, alpha: 1.0, beta: 2.0, deadline: 20.0, d_value: 2.0, d_cost: 0.7 };
        let inst = p.instance().unwrap();
        let s = TimedStrategy::parse("e(3)A", &["A", "e"]).unwrap();
        let v = d_marginal_value(&inst, &s, 1.0).unwrap();
        let mut free = inst.clone();
        free.coord.costs = alloc::vec![0.0];
        let with = TimedStrategy::parse("e(1)De(3)A", &["A", "e"]).unwrap();
        let oracle = eu_of_strategy(&free, &with).unwrap().total - eu_of_strategy(&free, &s).unwrap().total;
        assert!((v - oracle).abs() < 1e-8);
        assert!(v > 0.0);
    }

    #[test]
    fn change_value_peaks_at_moderate_response_rate() {
        // With the hand-back time optimized per rate, a very slow entity is
        // dropped early and a very fast one answers before a change matters.
        let v = |rho: f64| {
            let p = TwoEntityParams { rho, omega: 0.3, alpha: 1.0, beta: 10.0, deadline: 20.0, d_value: 1.5, d_cost: 0.0 };
            let inst = p.instance().unwrap();
            let s = optimize_timings(&inst, &StrategySkeleton::parse("eA", &["A", "e"]).unwrap()).unwrap().strategy;
            d_marginal_value(&inst, &s, s.actions[0].time() / 2.0).unwrap()
        };
        let (slow, mid, fast) = (v(0.01), v(0.5), v(10.0));
        assert!(mid > slow && mid > fast, "{slow} {mid} {fast}");
    }
}
