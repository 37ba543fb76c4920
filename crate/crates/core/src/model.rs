//! Problem-instance types: entities and the four model elements
//! (decision quality, response probability, wait cost, coordination change).

use crate::error::{Error, Result};
use crate::math::{exp, expm1};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Piecewise-linear table with hold-first/hold-last extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Table {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::invalid("table needs matching, nonempty time and value lists"));
        }
        if times.iter().chain(values.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("table entries must be finite"));
        }
        if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("table times must be nonnegative and strictly increasing"));
        }
        Ok(Table { times, values })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Table::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    /// Linear interpolation; clamps outside the grid.
    pub fn at(&self, t: f64) -> f64 {
        let ts = &self.times;
        let n = ts.len();
        if t <= ts[0] {
            return self.values[0];
        }
        if t >= ts[n - 1] {
            return self.values[n - 1];
        }
        let i = ts.partition_point(|&x| x <= t) - 1;
        let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    fn last_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }
}

/// When (if ever) an entity responds once it holds control.
#[derive(Debug, Clone, PartialEq)]
pub enum ResponseModel {
    /// Decides at once with probability 1 (the agent).
    Instant,
    /// Exponential response time with the given rate.
    Markovian { rate: f64 },
    /// Density samples, linearly interpolated, zero outside the grid.
    /// Precomputed cumulative mass at each grid point.
    Tabulated { density: Table, cumulative: Vec<f64> },
}

impl ResponseModel {
    pub fn markovian(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid("Markovian rate must be positive and finite"));
        }
        Ok(ResponseModel::Markovian { rate })
    }

    pub fn tabulated(density: Table) -> Result<Self> {
        if density.values.iter().any(|&d| d < 0.0) {
            return Err(Error::invalid("response density must be nonnegative"));
        }
        let mut cumulative = Vec::with_capacity(density.times.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 1..density.times.len() {
            let h = density.times[i] - density.times[i - 1];
            acc += 0.5 * h * (density.values[i] + density.values[i - 1]);
            cumulative.push(acc);
        }
        if acc > 1.0 + 1e-9 {
            return Err(Error::invalid("response density integrates to more than 1"));
        }
        Ok(ResponseModel::Tabulated { density, cumulative })
    }

    pub fn is_instant(&self) -> bool {
        matches!(self, ResponseModel::Instant)
    }

    /// Density at time `t` (zero for the instant model).
    pub fn density(&self, t: f64) -> f64 {
        match self {
            ResponseModel::Instant => 0.0,
            ResponseModel::Markovian { rate } => rate * exp(-rate * t),
            ResponseModel::Tabulated { density, .. } => {
                if t < density.times[0] || t > density.last_time() {
                    0.0
                } else {
                    density.at(t)
                }
            }
        }
    }

    /// Probability of a response in `[0, t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            ResponseModel::Instant => {
                if t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ResponseModel::Markovian { rate } => {
                if t == f64::INFINITY {
                    1.0
                } else {
                    -expm1(-rate * t)
                }
            }
            ResponseModel::Tabulated { density, cumulative } => {
                let ts = &density.times;
                if t <= ts[0] {
                    return 0.0;
                }
                let n = ts.len();
                if t >= ts[n - 1] {
                    return cumulative[n - 1];
                }
                let i = ts.partition_point(|&x| x <= t) - 1;
                let d = density.at(t);
                cumulative[i] + 0.5 * (t - ts[i]) * (density.values[i] + d)
            }
        }
    }

    /// Probability of a response in `[t0, t1)`.
    pub fn prob(&self, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        match self {
            ResponseModel::Markovian { rate } => {
                let head = exp(-rate * t0);
                if t1 == f64::INFINITY {
                    head
                } else {
                    head * -expm1(-rate * (t1 - t0))
                }
            }
            _ => self.cdf(t1) - self.cdf(t0),
        }
    }

    /// Total response mass over `[0, ∞)`.
    pub fn total_mass(&self) -> f64 {
        self.cdf(f64::INFINITY)
    }

    /// Time after which the density is identically zero (∞ if none).
    pub fn support_end(&self) -> f64 {
        match self {
            ResponseModel::Instant => 0.0,
            ResponseModel::Markovian { .. } => f64::INFINITY,
            ResponseModel::Tabulated { density, .. } => density.last_time(),
        }
    }

    pub(crate) fn breakpoints(&self) -> &[f64] {
        match self {
            ResponseModel::Tabulated { density, .. } => &density.times,
            _ => &[],
        }
    }
}

/// Expected quality of an entity's decision as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum QualityModel {
    Constant(f64),
    Tabulated(Table),
}

impl QualityModel {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            QualityModel::Constant(q) => *q,
            QualityModel::Tabulated(tab) => tab.at(t),
        }
    }

    /// Time after which quality no longer changes.
    pub fn min_value(&self) -> f64 {
        match self {
            QualityModel::Constant(q) => *q,
            QualityModel::Tabulated(tab) => tab.values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn settles_at(&self) -> f64 {
        match self {
            QualityModel::Constant(_) => 0.0,
            QualityModel::Tabulated(tab) => tab.last_time(),
        }
    }

    pub(crate) fn breakpoints(&self) -> &[f64] {
        match self {
            QualityModel::Tabulated(tab) => &tab.times,
            QualityModel::Constant(_) => &[],
        }
    }
}

/// Cost of the decision still being open at time `t`; flat after the deadline.
#[derive(Debug, Clone, PartialEq)]
pub enum WaitCostModel {
    /// `omega * exp(omega * min(t, deadline))`.
    Exponential { omega: f64, deadline: f64 },
    /// Nondecreasing table evaluated at `min(t, deadline)`.
    Tabulated { table: Table, deadline: f64 },
}

impl WaitCostModel {
    pub fn exponential(omega: f64, deadline: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::invalid("omega must be positive and finite"));
        }
        if !(deadline > 0.0 && deadline.is_finite()) {
            return Err(Error::invalid("deadline must be positive and finite"));
        }
        Ok(WaitCostModel::Exponential { omega, deadline })
    }

    pub fn tabulated(table: Table, deadline: f64) -> Result<Self> {
        if !(deadline > 0.0 && deadline.is_finite()) {
            return Err(Error::invalid("deadline must be positive and finite"));
        }
        if table.values.windows(2).any(|w| w[1] < w[0]) || table.values[0] < 0.0 {
            return Err(Error::invalid("tabulated wait cost must be nonnegative and nondecreasing"));
        }
        Ok(WaitCostModel::Tabulated { table, deadline })
    }

    /// Cost growing linearly at `rate` per time unit until the deadline.
    pub fn linear(rate: f64, deadline: f64) -> Result<Self> {
        WaitCostModel::tabulated(Table::new(alloc::vec![0.0, deadline], alloc::vec![0.0, rate * deadline])?, deadline)
    }

    pub fn deadline(&self) -> f64 {
        match self {
            WaitCostModel::Exponential { deadline, .. } | WaitCostModel::Tabulated { deadline, .. } => *deadline,
        }
    }

    /// Unchecked evaluation; negative times are treated as 0.
    pub fn at(&self, t: f64) -> f64 {
        let t = t.max(0.0).min(self.deadline());
        match self {
            WaitCostModel::Exponential { omega, .. } => omega * exp(omega * t),
            WaitCostModel::Tabulated { table, .. } => table.at(t),
        }
    }

    pub(crate) fn breakpoints(&self) -> &[f64] {
        match self {
            WaitCostModel::Tabulated { table, .. } => &table.times,
            WaitCostModel::Exponential { .. } => &[],
        }
    }
}

/// Coordination change ("D"): buys `value` time units at a scheduled cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordChangeModel {
    pub value: f64,
    /// Cost of the K-th change is `costs[K-1]`; the last entry repeats.
    pub costs: Vec<f64>,
    /// `None` means unbounded.
    pub max_changes: Option<usize>,
}

impl CoordChangeModel {
    pub fn none() -> Self {
        CoordChangeModel { value: 0.0, costs: Vec::new(), max_changes: Some(0) }
    }

    pub fn constant(value: f64, cost: f64, max_changes: Option<usize>) -> Self {
        CoordChangeModel { value, costs: alloc::vec![cost], max_changes }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.value >= 0.0 && self.value.is_finite()) {
            return Err(Error::invalid("coordination-change value must be finite and ≥ 0"));
        }
        if self.costs.iter().any(|c| !(*c >= 0.0) || c.is_nan()) {
            return Err(Error::invalid("coordination-change costs must be ≥ 0"));
        }
        if self.max_changes != Some(0) && self.costs.is_empty() {
            return Err(Error::invalid("cost schedule must cover every allowed change"));
        }
        Ok(())
    }

    pub fn allows(&self, k: usize) -> bool {
        self.max_changes.is_none_or(|m| k <= m)
    }

    /// Cost of the K-th change (1-based); ∞ once the cap is exceeded.
    pub fn cost(&self, k: usize) -> f64 {
        if k == 0 || !self.allows(k) || self.costs.is_empty() {
            return f64::INFINITY;
        }
        self.costs[(k - 1).min(self.costs.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: String,
    pub is_agent: bool,
    pub quality: QualityModel,
    pub response: ResponseModel,
}

impl Entity {
    pub fn agent(id: &str, quality: f64) -> Self {
        Entity { id: id.to_string(), is_agent: true, quality: QualityModel::Constant(quality), response: ResponseModel::Instant }
    }

    pub fn markovian(id: &str, quality: f64, rate: f64) -> Result<Self> {
        Ok(Entity {
            id: id.to_string(),
            is_agent: false,
            quality: QualityModel::Constant(quality),
            response: ResponseModel::markovian(rate)?,
        })
    }
}

/// Free-form names for the joint activity, the role and the decision.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Labels {
    pub activity: String,
    pub role: String,
    pub decision: String,
    pub extra: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub entities: Vec<Entity>,
    pub wait: WaitCostModel,
    pub coord: CoordChangeModel,
    pub labels: Labels,
}

impl ProblemInstance {
    pub fn new(entities: Vec<Entity>, wait: WaitCostModel, coord: CoordChangeModel) -> Result<Self> {
        let inst = ProblemInstance { entities, wait, coord, labels: Labels::default() };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entities.is_empty() {
            return Err(Error::invalid("instance needs at least one entity"));
        }
        let agents = self.entities.iter().filter(|e| e.is_agent).count();
        if agents != 1 {
            return Err(Error::invalid("exactly one entity must be the agent"));
        }
        for (i, e) in self.entities.iter().enumerate() {
            if e.id.is_empty() || e.id == "D" {
                return Err(Error::invalid("entity ids must be nonempty and not \"D\""));
            }
            if self.entities[..i].iter().any(|o| o.id == e.id) {
                return Err(Error::invalid("entity ids must be unique"));
            }
            if e.is_agent && !e.response.is_instant() {
                return Err(Error::invalid("the agent responds instantly"));
            }
        }
        self.coord.validate()
    }

    pub fn agent(&self) -> usize {
        self.entities.iter().position(|e| e.is_agent).expect("validated instance has an agent")
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.entities.iter().position(|e| e.id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entities.iter().map(|e| e.id.as_str()).collect()
    }
}

/// Checked wait cost.
pub fn wait_cost(model: &WaitCostModel, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid("time must be nonnegative"));
    }
    Ok(model.at(t))
}

/// Checked response probability over `[t0, t1)`.
pub fn response_prob(model: &ResponseModel, t0: f64, t1: f64) -> Result<f64> {
    if !(t0 >= 0.0) || t1 < t0 || t1.is_nan() {
        return Err(Error::invalid("need 0 ≤ t0 ≤ t1"));
    }
    Ok(model.prob(t0, t1))
}

/// Checked decision quality.
pub fn quality(model: &QualityModel, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid("time must be nonnegative"));
    }
    Ok(model.at(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn wait_cost_examples() {
        let w = WaitCostModel::exponential(0.1, 100.0).unwrap();
        assert_eq!(wait_cost(&w, 0.0).unwrap(), 0.1);
        let w = WaitCostModel::exponential(0.01, 100.0).unwrap();
        assert!((wait_cost(&w, 150.0).unwrap() - 0.01 * core::f64::consts::E).abs() < 1e-12);
        let w = WaitCostModel::tabulated(Table::from_pairs(&[(0.0, 0.0), (10.0, 5.0)]).unwrap(), 10.0).unwrap();
        assert_eq!(wait_cost(&w, 10.0).unwrap(), 5.0);
        assert!(wait_cost(&w, -1.0).is_err());
    }

    #[test]
    fn response_examples() {
        let m = ResponseModel::markovian(0.2).unwrap();
        assert_eq!(response_prob(&m, 0.0, f64::INFINITY).unwrap(), 1.0);
        assert_eq!(response_prob(&m, 3.0, 3.0).unwrap(), 0.0);
        assert!(response_prob(&m, 2.0, 1.0).is_err());
    }

    #[test]
    fn markovian_half_rate_over_two_matches_trapezoid() {
        // Oracle: trapezoidal quadrature of the density at step 1e-4.
        let rate: f64 = 0.5;
        let h = 1e-4;
        let n = (2.0 / h) as usize;
        let mut acc = 0.0;
        for i in 0..n {
            let a = i as f64 * h;
            acc += 0.5 * h * (rate * (-rate * a).exp() + rate * (-rate * (a + h)).exp());
        }
        let m = ResponseModel::markovian(rate).unwrap();
        let p = response_prob(&m, 0.0, 2.0).unwrap();
        assert!((p - acc).abs() < 1e-6);
        assert!((p - 0.632_12).abs() < 1e-5);
    }

    #[test]
    fn quality_examples() {
        assert_eq!(quality(&QualityModel::Constant(1.0), 37.0).unwrap(), 1.0);
        let q = QualityModel::Tabulated(Table::from_pairs(&[(0.0, 0.0), (10.0, 2.0)]).unwrap());
        assert_eq!(quality(&q, 5.0).unwrap(), 1.0);
        assert_eq!(quality(&q, 20.0).unwrap(), 2.0);
    }

    #[test]
    fn tabulated_response_mass_and_rejection() {
        let d = Table::from_pairs(&[(0.0, 0.2), (2.0, 0.2), (4.0, 0.0)]).unwrap();
        let m = ResponseModel::tabulated(d).unwrap();
        assert!((m.total_mass() - 0.6).abs() < 1e-12);
        assert!((m.prob(0.0, 1.0) - 0.2).abs() < 1e-12);
        assert!((m.prob(3.0, 10.0) - 0.05).abs() < 1e-12);
        let too_much = Table::from_pairs(&[(0.0, 1.0), (2.0, 1.0)]).unwrap();
        assert!(ResponseModel::tabulated(too_much).is_err());
    }

    #[test]
    fn instance_requires_single_agent() {
        let w = WaitCostModel::exponential(0.1, 10.0).unwrap();
        let es = vec![Entity::markovian("H", 1.0, 0.5).unwrap()];
        assert!(ProblemInstance::new(es, w.clone(), CoordChangeModel::none()).is_err());
        let es = vec![Entity::agent("A", 1.0), Entity::agent("B", 1.0)];
        assert!(ProblemInstance::new(es, w, CoordChangeModel::none()).is_err());
    }

    #[test]
    fn cost_schedule_caps() {
        let c = CoordChangeModel { value: 1.0, costs: vec![1.0, 2.0], max_changes: Some(3) };
        assert_eq!(c.cost(1), 1.0);
        assert_eq!(c.cost(3), 2.0);
        assert_eq!(c.cost(4), f64::INFINITY);
    }
}
