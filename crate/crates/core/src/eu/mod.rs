//! Expected utility of timed strategies.
//!
//! Each transfer segment contributes the probability-weighted value of a
//! response inside it (decision quality minus the wait cost accumulated so
//! far). Response hazards use absolute time and are conditioned on no
//! earlier response. A coordination change moves the wait clock back by
//! its value (never below 0) and is paid only if no one has decided yet.
//! Mass that never responds scores quality 0 and the final accumulated cost.

mod closed_form;
mod timing;

pub use closed_form::{eu_closed_form, TwoEntityParams, ClosedForm, ClosedFormKind, EPSILON_DELTA};
pub(crate) use closed_form::phi;
pub use timing::{d_marginal_value, insert_coord_change, optimize_timings, TimingResult};

use crate::error::{Error, Result};
use crate::math::{exp, integrate_pieces, SEGMENT_TOL};
use crate::model::{ProblemInstance, ResponseModel, WaitCostModel};
use crate::strategy::{validate_strategy, StrategyAction, TimedStrategy};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Decomposition of a strategy's expected utility.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EuBreakdown {
    pub total: f64,
    pub per_segment: Vec<(String, f64)>,
    /// Expected accumulated wait cost (a magnitude).
    pub accumulated_wait: f64,
    /// Expected coordination-change cost (a magnitude).
    pub coord_costs: f64,
    /// Probability that nobody ever decides.
    pub residual_mass: f64,
}

/// Expected utility of `s` on `inst`.
pub fn eu_of_strategy(inst: &ProblemInstance, s: &TimedStrategy) -> Result<EuBreakdown> {
    let v = validate_strategy(s, inst);
    if !v.is_empty() {
        let msgs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        return Err(Error::invalid(msgs.join("; ")));
    }
    evaluate(inst, &s.actions, true)
}

/// Total only, skipping validation; callers guarantee validity.
pub(crate) fn eu_total(inst: &ProblemInstance, actions: &[StrategyAction]) -> Result<f64> {
    evaluate(inst, actions, false).map(|b| b.total)
}

/// Wait-clock epoch: between coordination changes the accumulated cost is
/// `acc + W(base + t - start) - W(base)`.
#[derive(Clone, Copy)]
struct Epoch {
    start: f64,
    base: f64,
    acc: f64,
}

impl Epoch {
    fn cost(&self, w: &WaitCostModel, t: f64) -> f64 {
        self.acc + w.at(self.base + (t - self.start)) - w.at(self.base)
    }

    fn final_cost(&self, w: &WaitCostModel) -> f64 {
        self.acc + w.at(w.deadline()) - w.at(self.base)
    }

    /// True time at which the clock reaches the deadline.
    fn cap_time(&self, w: &WaitCostModel) -> f64 {
        self.start + (w.deadline() - self.base).max(0.0)
    }
}

/// Response density and mass for an entity that takes control at `start`,
/// conditioned on no response before `start`.
struct Conditional<'a> {
    model: &'a ResponseModel,
    start: f64,
    norm: f64,
}

impl<'a> Conditional<'a> {
    fn new(model: &'a ResponseModel, start: f64) -> Self {
        let norm = match model {
            ResponseModel::Tabulated { .. } => 1.0 - model.cdf(start),
            _ => 1.0,
        };
        Conditional { model, start, norm }
    }

    fn dead(&self) -> bool {
        matches!(self.model, ResponseModel::Tabulated { .. }) && self.norm <= 1e-15
    }

    fn density(&self, t: f64) -> f64 {
        match self.model {
            ResponseModel::Markovian { rate } => rate * exp(-rate * (t - self.start)),
            ResponseModel::Tabulated { .. } => self.model.density(t) / self.norm,
            ResponseModel::Instant => 0.0,
        }
    }

    fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self.model {
            ResponseModel::Markovian { rate } => {
                let head = exp(-rate * (a - self.start));
                if b == f64::INFINITY {
                    head
                } else {
                    head * -crate::math::expm1(-rate * (b - a))
                }
            }
            ResponseModel::Tabulated { .. } => self.model.prob(a, b) / self.norm,
            ResponseModel::Instant => 0.0,
        }
    }
}

fn evaluate(inst: &ProblemInstance, actions: &[StrategyAction], detail: bool) -> Result<EuBreakdown> {
    let w = &inst.wait;
    let mut surv = 1.0_f64;
    let mut time = 0.0_f64;
    let mut epoch = Epoch { start: 0.0, base: 0.0, acc: w.at(0.0) };
    let mut changes = 0usize;
    let mut total = 0.0;
    let mut wait_total = 0.0;
    let mut coord_total = 0.0;
    let mut parts: Vec<(String, f64)> = Vec::new();

    for action in actions {
        match action {
            StrategyAction::Transfer { entity, end } => {
                let idx = inst
                    .index_of(entity)
                    .ok_or_else(|| Error::invalid(format!("unknown entity \"{entity}\"")))?;
                let ent = &inst.entities[idx];
                let start = time;
                let end = end.max(start);
                let mut contrib = 0.0;
                if surv > 0.0 {
                    if ent.response.is_instant() {
                        let c = epoch.cost(w, start);
                        contrib = surv * (ent.quality.at(start) - c);
                        wait_total += surv * c;
                        surv = 0.0;
                    } else {
                        let cond = Conditional::new(&ent.response, start);
                        if !cond.dead() {
                            let (value, waited, stay) = segment(inst, idx, &cond, &epoch, start, end, detail)?;
                            contrib = surv * value;
                            wait_total += surv * waited;
                            surv *= stay;
                        }
                    }
                }
                total += contrib;
                if detail {
                    parts.push((format!("{}[{}, {})", entity, fmt_t(start), fmt_t(end)), contrib));
                }
                time = end;
            }
            StrategyAction::CoordChange { at } => {
                let at = at.max(time);
                changes += 1;
                let mut contrib = 0.0;
                if surv > 0.0 {
                    let cost = inst.coord.cost(changes);
                    if !cost.is_finite() {
                        return Err(Error::invalid("coordination-change cap exceeded"));
                    }
                    contrib = -surv * cost;
                    coord_total += surv * cost;
                }
                let clock = epoch.base + (at - epoch.start);
                let acc = epoch.cost(w, at);
                epoch = Epoch { start: at, base: (clock - inst.coord.value).max(0.0), acc };
                total += contrib;
                if detail {
                    parts.push((format!("D@{}", fmt_t(at)), contrib));
                }
                time = at;
            }
        }
    }
    if surv > 0.0 {
        let c = epoch.final_cost(w);
        let contrib = -surv * c;
        wait_total += surv * c;
        total += contrib;
        if detail {
            parts.push(("no response".to_string(), contrib));
        }
    }
    if !total.is_finite() {
        return Err(Error::numeric("expected utility is not finite"));
    }
    Ok(EuBreakdown {
        total,
        per_segment: parts,
        accumulated_wait: wait_total,
        coord_costs: coord_total,
        residual_mass: surv.max(0.0),
    })
}

fn fmt_t(t: f64) -> String {
    if t == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{t}")
    }
}

/// Returns (conditional value, conditional expected wait cost, conditional
/// probability of no response in the segment).
fn segment(
    inst: &ProblemInstance,
    idx: usize,
    cond: &Conditional<'_>,
    epoch: &Epoch,
    start: f64,
    end: f64,
    detail: bool,
) -> Result<(f64, f64, f64)> {
    let ent = &inst.entities[idx];
    let w = &inst.wait;
    let stay = 1.0 - cond.mass(start, end);
    let hi = end.min(ent.response.support_end());
    if hi <= start {
        return Ok((0.0, 0.0, stay.clamp(0.0, 1.0)));
    }
    // After `flat` the integrand's non-density factor is constant.
    let cap = epoch.cap_time(w);
    let mut flat = cap.max(ent.quality.settles_at()).max(start);
    for &b in w.breakpoints() {
        flat = flat.max(epoch.start + (b - epoch.base));
    }
    let markov = matches!(ent.response, ResponseModel::Markovian { .. });
    let num_hi = if markov { hi.min(flat) } else { hi };

    let mut breaks: Vec<f64> = Vec::new();
    breaks.extend_from_slice(ent.quality.breakpoints());
    breaks.extend_from_slice(ent.response.breakpoints());
    breaks.extend(w.breakpoints().iter().map(|b| epoch.start + (b - epoch.base)));
    breaks.push(cap);

    let f = |t: f64| cond.density(t) * (ent.quality.at(t) - epoch.cost(w, t));
    let mut value = integrate_pieces(&f, start, num_hi, &breaks, SEGMENT_TOL)?;
    let mut waited = 0.0;
    if detail {
        let g = |t: f64| cond.density(t) * epoch.cost(w, t);
        waited = integrate_pieces(&g, start, num_hi, &breaks, SEGMENT_TOL)?;
    }
    if markov && hi > num_hi {
        let m = cond.mass(num_hi, hi);
        let c = epoch.final_cost(w);
        value += m * (ent.quality.at(num_hi) - c);
        waited += m * c;
    }
    Ok((value, waited, stay.clamp(0.0, 1.0)))
}
