//! Analytic expected utilities for Markovian response, constant qualities
//! and exponential wait cost.

use crate::error::{Error, Result};
use crate::math::{exp, expm1};
use crate::model::{CoordChangeModel, Entity, ProblemInstance, WaitCostModel};
use alloc::vec;

/// Below this |δ| the forms switch to a series expansion.
pub const EPSILON_DELTA: f64 = 1e-6;

/// Parameters of the two-entity exponential instantiation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoEntityParams {
    /// Response rate of the non-agent entity.
    pub rho: f64,
    /// Wait-cost rate.
    pub omega: f64,
    /// Agent decision quality.
    pub alpha: f64,
    /// Non-agent decision quality.
    pub beta: f64,
    pub deadline: f64,
    pub d_value: f64,
    pub d_cost: f64,
}

impl TwoEntityParams {
    pub fn delta(&self) -> f64 {
        self.rho - self.omega
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.omega > 0.0 && self.deadline > 0.0) {
            return Err(Error::invalid("rho, omega and deadline must be positive"));
        }
        Ok(())
    }

    /// Agent `A` plus Markovian entity `e`, unbounded coordination changes.
    pub fn instance(&self) -> Result<ProblemInstance> {
        self.validate()?;
        ProblemInstance::new(
            vec![Entity::agent("A", self.alpha), Entity::markovian("e", self.beta, self.rho)?],
            WaitCostModel::exponential(self.omega, self.deadline)?,
            CoordChangeModel::constant(self.d_value, self.d_cost, None),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedFormKind {
    /// Agent decides at once.
    A,
    /// Entity keeps control forever.
    E,
    /// Entity until `t`, then the agent.
    EA,
    /// Entity until `delta_t`, a coordination change, entity until `t`, agent.
    EDeA,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub value: f64,
    /// True when |δ| was below [`EPSILON_DELTA`] and the series was used.
    pub series: bool,
}

/// `(1 - exp(-δx)) / δ`, with a four-term series near δ = 0.
pub(crate) fn phi(delta: f64, x: f64) -> f64 {
    if delta.abs() < EPSILON_DELTA {
        let dx = delta * x;
        x * (1.0 - dx / 2.0 + dx * dx / 6.0 - dx * dx * dx / 24.0)
    } else {
        -expm1(-delta * x) / delta
    }
}

/// Closed-form expected utility. `t` is the hand-back time and `delta_t`
/// the coordination-change time where the kind needs them. The forms assume
/// the wait clock stays below the deadline (`t ≤ deadline`).
pub fn eu_closed_form(p: &TwoEntityParams, kind: ClosedFormKind, t: f64, delta_t: f64) -> Result<ClosedForm> {
    p.validate()?;
    let (rho, omega, alpha, beta) = (p.rho, p.omega, p.alpha, p.beta);
    let d = p.delta();
    let series = d.abs() < EPSILON_DELTA;
    let value = match kind {
        ClosedFormKind::A => alpha - omega,
        ClosedFormKind::E => {
            let dl = p.deadline;
            -omega * exp(-dl * d) - rho * omega * phi(d, dl) + beta
        }
        ClosedFormKind::EA => {
            check_time(t, p.deadline)?;
            -omega * exp(-t * d) - rho * omega * phi(d, t) + exp(-rho * t) * (alpha - beta) + beta
        }
        ClosedFormKind::EDeA => {
            check_time(t, p.deadline)?;
            if !(delta_t >= 0.0 && delta_t <= t) {
                return Err(Error::invalid("need 0 ≤ Δ ≤ T"));
            }
            let dl = delta_t;
            // Clock cannot go below 0: the effective shift is at most Δ.
            let dv = p.d_value.min(dl);
            let dc = p.d_cost;
            let e_rho_t = exp(-rho * t);
            let e_rho_d = exp(-rho * dl);
            let w_d = exp(omega * dl);
            let w_shift = exp(-omega * dv);
            let first = -rho * omega * phi(d, dl) + beta * (1.0 - e_rho_d);
            let second = -rho * omega * w_shift * exp(-d * dl) * phi(d, t - dl);
            let third = (dc - beta) * (e_rho_t - e_rho_d);
            let fourth = omega * w_d * (w_shift - 1.0) * (e_rho_d - e_rho_t);
            let last = -e_rho_t * (dc - alpha + omega * (w_d - w_d * w_shift + exp(omega * (t - dv))));
            first + second + third + fourth + last
        }
    };
    if !value.is_finite() {
        return Err(Error::numeric("closed form overflowed"));
    }
    Ok(ClosedForm { value, series })
}

fn check_time(t: f64, deadline: f64) -> Result<()> {
    if !(t >= 0.0 && t <= deadline) {
        return Err(Error::invalid("closed forms need 0 ≤ T ≤ deadline"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> TwoEntityParams {
        TwoEntityParams { rho: 1.0, omega: 0.2, alpha: 0.5, beta: 1.0, deadline: 50.0, d_value: 2.0, d_cost: 0.1 }
    }

    /// Direct algebraic eA form without the stabilized rewrite.
    fn plain_ea(p: &TwoEntityParams, t: f64) -> f64 {
        let d = p.rho - p.omega;
        p.omega * (-t * d).exp() * (p.rho / d - 1.0) + (-p.rho * t).exp() * (p.alpha - p.beta) - p.rho * p.omega / d + p.beta
    }

    /// Direct algebraic eDeA form.
    fn plain_edea(p: &TwoEntityParams, t: f64, dl: f64) -> f64 {
        let (r, w, a, b, dv, dc) = (p.rho, p.omega, p.alpha, p.beta, p.d_value, p.d_cost);
        let d = r - w;
        r * w / d * ((-dl * d).exp() - 1.0) + b * (1.0 - (-dl * r).exp())
            + r * w * (-w * dv).exp() / d * ((-t * d).exp() - (-dl * d).exp())
            + (dc - b) * ((-r * t).exp() - (-r * dl).exp())
            + w * (dl * w).exp() * ((-w * dv).exp() - 1.0) * ((-r * dl).exp() - (-r * t).exp())
            - (-r * t).exp() * (dc - a + w * ((w * dl).exp() - (w * (dl - dv)).exp() + (w * (t - dv)).exp()))
    }

    #[test]
    fn agent_form_is_quality_minus_rate() {
        let v = eu_closed_form(&params(), ClosedFormKind::A, 0.0, 0.0).unwrap();
        assert_eq!(v.value, 0.5 - 0.2);
    }

    #[test]
    fn stabilized_forms_match_plain_algebra() {
        let p = params();
        let ea = eu_closed_form(&p, ClosedFormKind::EA, 1.0, 0.0).unwrap().value;
        assert!((ea - plain_ea(&p, 1.0)).abs() < 1e-12);
        let edea = eu_closed_form(&p, ClosedFormKind::EDeA, 3.0, 2.0).unwrap().value;
        assert!((edea - plain_edea(&p, 3.0, 2.0)).abs() < 1e-12);
    }

    #[test]
    fn series_flag_at_zero_delta() {
        let p = TwoEntityParams { rho: 0.3, omega: 0.3, ..params() };
        let v = eu_closed_form(&p, ClosedFormKind::EA, 2.0, 0.0).unwrap();
        assert!(v.series);
        let near = TwoEntityParams { rho: 0.3 + 1e-4, ..p };
        let w = eu_closed_form(&near, ClosedFormKind::EA, 2.0, 0.0).unwrap();
        assert!((v.value - w.value).abs() < 1e-4);
    }

    #[test]
    fn time_beyond_deadline_rejected() {
        assert!(eu_closed_form(&params(), ClosedFormKind::EA, 60.0, 0.0).is_err());
    }
}
