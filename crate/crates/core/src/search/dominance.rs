//! Dominance tests used to discard strategies without timing them.

use crate::error::{Error, Result};
use crate::eu::{phi, TwoEntityParams};
use crate::math::{exp, integrate, integrate_pieces, SEGMENT_TOL};
use crate::model::{Entity, ProblemInstance, ResponseModel};
use alloc::vec::Vec;

/// Points sampled when a test must hold for every time.
pub const DOMINANCE_GRID: usize = 64;

fn entity<'a>(inst: &'a ProblemInstance, e: &str) -> Result<&'a Entity> {
    inst.index_of(e)
        .map(|i| &inst.entities[i])
        .ok_or_else(|| Error::invalid(alloc::format!("unknown entity \"{e}\"")))
}

/// Take-back test for an entity holding control at `t`: is the
/// density-weighted wait cost over `[t, ◁]`, less the cost at `t`, larger
/// than the quality advantage of `e` over the agent? Evaluated exactly as
/// stated, with the absolute response density.
pub fn takeback_test(inst: &ProblemInstance, e: &str, t: f64) -> Result<bool> {
    let ent = entity(inst, e)?;
    let dl = inst.wait.deadline();
    if !(t >= 0.0 && t < dl) {
        return Err(Error::invalid("take-back time must lie in [0, deadline)"));
    }
    let resp = &ent.response;
    let integral = integrate(&|x: f64| resp.density(x) * inst.wait.at(x), t, dl, SEGMENT_TOL)?;
    let lhs = integral - inst.wait.at(t);
    let agent = &inst.entities[inst.agent()];
    let rhs = ent.quality.at(t) - agent.quality.at(t);
    Ok(lhs > rhs)
}

/// Density of a response at `x ≥ t` given none by `t`.
fn conditional_density(resp: &ResponseModel, t: f64, x: f64) -> f64 {
    match resp {
        ResponseModel::Instant => 0.0,
        ResponseModel::Markovian { rate } => rate * exp(-rate * (x - t)),
        ResponseModel::Tabulated { .. } => {
            let s = 1.0 - resp.cdf(t);
            if s <= 0.0 {
                0.0
            } else {
                resp.density(x) / s
            }
        }
    }
}

/// Time after which nothing about the instance changes.
pub(crate) fn stationary_after(inst: &ProblemInstance) -> f64 {
    let mut h = inst.wait.deadline();
    for e in &inst.entities {
        let s = e.response.support_end();
        if s.is_finite() {
            h = h.max(s);
        }
        h = h.max(e.quality.settles_at());
    }
    h
}

/// Value of leaving `e` in control from `t` on, given no response yet and an
/// unmodified wait clock.
fn continuation(inst: &ProblemInstance, ent: &Entity, t: f64, h: f64) -> Result<f64> {
    let resp = &ent.response;
    let w = &inst.wait;
    let mut breaks: Vec<f64> = resp.breakpoints().to_vec();
    breaks.extend_from_slice(ent.quality.breakpoints());
    breaks.extend_from_slice(w.breakpoints());
    breaks.push(w.deadline());
    let f = |x: f64| conditional_density(resp, t, x) * (ent.quality.at(x) - w.at(x));
    let g = |x: f64| conditional_density(resp, t, x);
    let body = integrate_pieces(&f, t, h, &breaks, SEGMENT_TOL)?;
    let tail = match resp {
        ResponseModel::Markovian { rate } => exp(-rate * (h - t)) * (ent.quality.at(h) - w.at(h)),
        _ => {
            let mass = integrate_pieces(&g, t, h, &breaks, SEGMENT_TOL)?;
            -(1.0 - mass).max(0.0) * w.at(h)
        }
    };
    Ok(body + tail)
}

/// Whether handing control back to the agent after `e` never beats leaving
/// `e` in control, on a grid covering every time at which the comparison
/// can change. Assumes the wait clock was never moved back.
pub fn takeback_never_helps(inst: &ProblemInstance, e: &str) -> Result<bool> {
    let ent = entity(inst, e)?;
    if ent.response.is_instant() {
        return Ok(false);
    }
    let agent = &inst.entities[inst.agent()];
    let h = stationary_after(inst);
    for i in 0..DOMINANCE_GRID {
        let t = h * i as f64 / (DOMINANCE_GRID - 1) as f64;
        let back = agent.quality.at(t) - inst.wait.at(t);
        if continuation(inst, ent, t, h)? < back {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Usefulness test for the K-th coordination change with cost `f_k`, at
/// hand-back time `t` and change time `delta_t`.
pub fn kth_change_test(p: &TwoEntityParams, f_k: f64, t: f64, delta_t: f64) -> Result<bool> {
    p.validate()?;
    if !(delta_t >= 0.0 && delta_t < t) {
        return Err(Error::invalid("need 0 ≤ delta_t < t"));
    }
    if f_k.is_nan() || f_k < 0.0 {
        return Err(Error::invalid("cost must be ≥ 0"));
    }
    if f_k.is_infinite() {
        return Ok(false);
    }
    let (rho, omega) = (p.rho, p.omega);
    let dl = p.delta();
    // (ρ/δ)e^{-δT} − (ω/δ)e^{-δΔ} rewritten to stay finite as δ → 0.
    let bracket = exp(-dl * t) - omega * exp(-dl * delta_t) * phi(dl, t - delta_t) - exp(omega * delta_t - rho * t);
    let rhs = omega * (exp(-p.d_value * omega) - 1.0) * bracket;
    Ok(f_k < rhs)
}

/// Whether a strategy whose last coordination change is the `m`-th can be
/// dropped: that change costs at least the most wait cost it could save.
pub fn last_change_never_pays(inst: &ProblemInstance, m: usize) -> bool {
    if m == 0 {
        return false;
    }
    let w = &inst.wait;
    inst.coord.cost(m) >= w.at(w.deadline()) - w.at(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use alloc::vec;

    fn inst(wait: WaitCostModel, rate: f64, qe: f64, qa: f64) -> ProblemInstance {
        let es = vec![Entity::agent("A", qa), Entity::markovian("e", qe, rate).unwrap()];
        ProblemInstance::new(es, wait, CoordChangeModel::none()).unwrap()
    }

    #[test]
    fn flat_wait_never_takes_back() {
        let w = WaitCostModel::tabulated(Table::from_pairs(&[(0.0, 3.0), (10.0, 3.0)]).unwrap(), 10.0).unwrap();
        let i = inst(w, 0.4, 2.0, 1.0);
        for k in 0..20 {
            assert!(!takeback_test(&i, "e", k as f64 * 0.5).unwrap());
        }
    }

    #[test]
    fn steep_wait_with_slow_response_takes_back() {
        let i = inst(WaitCostModel::exponential(0.5, 10.0).unwrap(), 0.05, 1.1, 1.0);
        let any = (0..20).any(|k| takeback_test(&i, "e", k as f64 * 0.5).unwrap());
        assert!(any);
    }

    #[test]
    fn huge_quality_gap_never_takes_back() {
        let i = inst(WaitCostModel::exponential(0.5, 10.0).unwrap(), 0.05, 1e6 + 1.0, 1.0);
        assert!((0..20).all(|k| !takeback_test(&i, "e", k as f64 * 0.5).unwrap()));
    }

    #[test]
    fn kth_d_literal_oracle() {
        let p = TwoEntityParams { rho: 0.5, omega: 0.1, alpha: 1.0, beta: 2.0, deadline: 20.0, d_value: 5.0, d_cost: 0.0 };
        let (rho, omega, dv, big_t, dt) = (0.5f64, 0.1f64, 5.0f64, 8.0f64, 2.0f64);
        let delta = rho - omega;
        let lit = omega
            * ((-dv * omega).exp() - 1.0)
            * ((rho / delta) * (-delta * big_t).exp() - (omega / delta) * (-delta * dt).exp() - (omega * dt - rho * big_t).exp());
        assert_eq!(kth_change_test(&p, 0.0, big_t, dt).unwrap(), 0.0 < lit);
        // The rewrite switches exactly where the literal right side does.
        assert!(lit > 0.0);
        assert!(kth_change_test(&p, lit * (1.0 - 1e-9), big_t, dt).unwrap());
        assert!(!kth_change_test(&p, lit * (1.0 + 1e-9), big_t, dt).unwrap());
        assert!(!kth_change_test(&p, f64::INFINITY, big_t, dt).unwrap());
    }

    #[test]
    fn kth_d_monotone_in_cost() {
        let p = TwoEntityParams { rho: 0.05, omega: 0.3, alpha: 1.0, beta: 2.0, deadline: 20.0, d_value: 5.0, d_cost: 0.0 };
        let mut last = true;
        for k in 0..200 {
            let c = k as f64 * 0.05;
            let now = kth_change_test(&p, c, 8.0, 2.0).unwrap();
            assert!(last || !now);
            last = now;
        }
    }

    #[test]
    fn conditional_takeback_matches_direction() {
        // Fast, much better entity with mild wait: never hand back.
        let i = inst(WaitCostModel::exponential(0.05, 10.0).unwrap(), 2.0, 10.0, 1.0);
        assert!(takeback_never_helps(&i, "e").unwrap());
        // Slow, barely better entity with steep wait: hand back.
        let j = inst(WaitCostModel::exponential(0.5, 10.0).unwrap(), 0.05, 1.1, 1.0);
        assert!(!takeback_never_helps(&j, "e").unwrap());
    }
}
