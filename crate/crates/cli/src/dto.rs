//! JSON input formats.

use aa_core::mdp::{AuctionScenario, DelayScenario, TeamWeights};
use aa_core::model::{CoordChangeModel, Entity, ProblemInstance, QualityModel, ResponseModel, Table, WaitCostModel};
use aa_core::solver::{ActionPredicate, CmpOp, Constraint, ConstraintKind, FeatureTest, FeatureValue};
use serde::{Deserialize, Serialize};

/// A scenario file: a bare problem instance or one of the two concrete
/// MDP scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioDto {
    Instance(InstanceDto),
    Delay(DelayDto),
    Auction(AuctionDto),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDto {
    pub entities: Vec<EntityDto>,
    pub wait: WaitDto,
    #[serde(default)]
    pub coord: Option<CoordDto>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityDto {
    pub id: String,
    #[serde(default)]
    pub agent: bool,
    pub quality: QualityDto,
    /// Omitted for the agent, which answers at once.
    #[serde(default)]
    pub response: Option<ResponseDto>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QualityDto {
    Constant(f64),
    Table(TableDto),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableDto {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResponseDto {
    Instant,
    Markovian { rate: f64 },
    /// Piecewise-linear density.
    Tabulated { times: Vec<f64>, density: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum WaitDto {
    Exponential { omega: f64, deadline: f64 },
    Tabulated { times: Vec<f64>, values: Vec<f64>, deadline: f64 },
    Linear { rate: f64, deadline: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordDto {
    pub value: f64,
    /// Cost of the k-th change; the last entry repeats.
    pub costs: Vec<f64>,
    #[serde(default)]
    pub max_changes: Option<usize>,
}

/// Delay scenario; omitted fields take the reference values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayDto {
    pub step: f64,
    pub start: f64,
    pub end: f64,
    pub locations: Vec<String>,
    pub transition: Vec<Vec<f64>>,
    pub initial_location: usize,
    pub meeting_location: usize,
    pub user_rate: Vec<f64>,
    pub ask_cost: Vec<f64>,
    pub delay: f64,
    pub weights: WeightsDto,
    pub attendees: f64,
    pub repair_base: f64,
    pub escalation: f64,
    pub late_rate: f64,
    pub late_growth: f64,
    pub r_activity: f64,
    pub r_user: f64,
    pub user_quality: f64,
    pub max_wait: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDto {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
}

impl Default for DelayDto {
    fn default() -> Self {
        DelayDto::from(&DelayScenario::reference())
    }
}

impl From<&DelayScenario> for DelayDto {
    fn from(s: &DelayScenario) -> Self {
        let w = s.weights;
        DelayDto {
            step: s.step,
            start: s.start,
            end: s.end,
            locations: s.locations.clone(),
            transition: s.transition.clone(),
            initial_location: s.initial_location,
            meeting_location: s.meeting_location,
            user_rate: s.user_rate.clone(),
            ask_cost: s.ask_cost.clone(),
            delay: s.delay,
            weights: WeightsDto { l1: w.l1, l2: w.l2, l3: w.l3, l4: w.l4 },
            attendees: s.attendees,
            repair_base: s.repair_base,
            escalation: s.escalation,
            late_rate: s.late_rate,
            late_growth: s.late_growth,
            r_activity: s.r_activity,
            r_user: s.r_user,
            user_quality: s.user_quality,
            max_wait: s.max_wait,
        }
    }
}

impl DelayDto {
    pub fn to_scenario(&self) -> aa_core::Result<DelayScenario> {
        let w = self.weights;
        let s = DelayScenario {
            step: self.step,
            start: self.start,
            end: self.end,
            locations: self.locations.clone(),
            transition: self.transition.clone(),
            initial_location: self.initial_location,
            meeting_location: self.meeting_location,
            user_rate: self.user_rate.clone(),
            ask_cost: self.ask_cost.clone(),
            delay: self.delay,
            weights: TeamWeights { l1: w.l1, l2: w.l2, l3: w.l3, l4: w.l4 },
            attendees: self.attendees,
            repair_base: self.repair_base,
            escalation: self.escalation,
            late_rate: self.late_rate,
            late_growth: self.late_growth,
            r_activity: self.r_activity,
            r_user: self.r_user,
            user_quality: self.user_quality,
            max_wait: self.max_wait,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Auction scenario; omitted fields take the reference values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuctionDto {
    pub steps: usize,
    pub bidders: usize,
    pub bid_prob: f64,
    pub level_probs: Vec<f64>,
    pub level_value: Vec<f64>,
    pub count_weight: f64,
    pub no_bid_value: f64,
    pub prep_cost: f64,
    pub prep_exponent: f64,
    pub leader_rate: f64,
    pub leader_bonus: f64,
    pub leader_ask_cost: f64,
}

impl Default for AuctionDto {
    fn default() -> Self {
        let s = AuctionScenario::reference();
        AuctionDto {
            steps: s.steps,
            bidders: s.bidders,
            bid_prob: s.bid_prob,
            level_probs: s.level_probs,
            level_value: s.level_value,
            count_weight: s.count_weight,
            no_bid_value: s.no_bid_value,
            prep_cost: s.prep_cost,
            prep_exponent: s.prep_exponent,
            leader_rate: s.leader_rate,
            leader_bonus: s.leader_bonus,
            leader_ask_cost: s.leader_ask_cost,
        }
    }
}

impl AuctionDto {
    pub fn to_scenario(&self) -> aa_core::Result<AuctionScenario> {
        let s = AuctionScenario {
            steps: self.steps,
            bidders: self.bidders,
            bid_prob: self.bid_prob,
            level_probs: self.level_probs.clone(),
            level_value: self.level_value.clone(),
            count_weight: self.count_weight,
            no_bid_value: self.no_bid_value,
            prep_cost: self.prep_cost,
            prep_exponent: self.prep_exponent,
            leader_rate: self.leader_rate,
            leader_bonus: self.leader_bonus,
            leader_ask_cost: self.leader_ask_cost,
        };
        s.validate()?;
        Ok(s)
    }
}

impl InstanceDto {
    pub fn to_instance(&self) -> aa_core::Result<ProblemInstance> {
        let mut es = Vec::with_capacity(self.entities.len());
        for e in &self.entities {
            let quality = match &e.quality {
                QualityDto::Constant(q) => QualityModel::Constant(*q),
                QualityDto::Table(t) => QualityModel::Tabulated(Table::new(t.times.clone(), t.values.clone())?),
            };
            let response = match &e.response {
                None | Some(ResponseDto::Instant) => ResponseModel::Instant,
                Some(ResponseDto::Markovian { rate }) => ResponseModel::markovian(*rate)?,
                Some(ResponseDto::Tabulated { times, density }) => {
                    ResponseModel::tabulated(Table::new(times.clone(), density.clone())?)?
                }
            };
            es.push(Entity { id: e.id.clone(), is_agent: e.agent, quality, response });
        }
        let wait = match &self.wait {
            WaitDto::Exponential { omega, deadline } => WaitCostModel::exponential(*omega, *deadline)?,
            WaitDto::Tabulated { times, values, deadline } => {
                WaitCostModel::tabulated(Table::new(times.clone(), values.clone())?, *deadline)?
            }
            WaitDto::Linear { rate, deadline } => WaitCostModel::linear(*rate, *deadline)?,
        };
        let coord = match &self.coord {
            None => CoordChangeModel::none(),
            Some(c) => CoordChangeModel { value: c.value, costs: c.costs.clone(), max_changes: c.max_changes },
        };
        ProblemInstance::new(es, wait, coord)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindDto {
    ForbiddenState,
    ForbiddenAction,
    RequiredState,
    RequiredAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDto {
    pub id: String,
    pub kind: KindDto,
    #[serde(default)]
    pub state_predicate: Vec<TestDto>,
    #[serde(default)]
    pub action_predicate: Option<ActionDto>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestDto {
    pub feature: String,
    pub op: String,
    pub value: ValueDto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueDto {
    Number(f64),
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDto {
    pub kind: String,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub negate: bool,
}

impl ConstraintDto {
    pub fn to_constraint(&self) -> aa_core::Result<Constraint> {
        let kind = match self.kind {
            KindDto::ForbiddenState => ConstraintKind::ForbiddenState,
            KindDto::ForbiddenAction => ConstraintKind::ForbiddenAction,
            KindDto::RequiredState => ConstraintKind::RequiredState,
            KindDto::RequiredAction => ConstraintKind::RequiredAction,
        };
        let mut tests = Vec::with_capacity(self.state_predicate.len());
        for t in &self.state_predicate {
            let value = match &t.value {
                ValueDto::Number(x) => FeatureValue::Number(*x),
                ValueDto::Label(l) => FeatureValue::Label(l.clone()),
            };
            tests.push(FeatureTest { feature: t.feature.clone(), op: CmpOp::parse(&t.op)?, value });
        }
        let action_predicate = self
            .action_predicate
            .as_ref()
            .map(|a| ActionPredicate { negate: a.negate, kind: a.kind.clone(), target: a.target.clone() });
        Ok(Constraint { id: self.id.clone(), kind, state_predicate: tests, action_predicate })
    }
}

impl From<&Constraint> for ConstraintDto {
    fn from(c: &Constraint) -> Self {
        let kind = match c.kind {
            ConstraintKind::ForbiddenState => KindDto::ForbiddenState,
            ConstraintKind::ForbiddenAction => KindDto::ForbiddenAction,
            ConstraintKind::RequiredState => KindDto::RequiredState,
            ConstraintKind::RequiredAction => KindDto::RequiredAction,
        };
        let op = |o: CmpOp| match o {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        };
        ConstraintDto {
            id: c.id.clone(),
            kind,
            state_predicate: c
                .state_predicate
                .iter()
                .map(|t| TestDto {
                    feature: t.feature.clone(),
                    op: op(t.op).to_string(),
                    value: match &t.value {
                        FeatureValue::Number(x) => ValueDto::Number(*x),
                        FeatureValue::Label(l) => ValueDto::Label(l.clone()),
                    },
                })
                .collect(),
            action_predicate: c
                .action_predicate
                .as_ref()
                .map(|a| ActionDto { kind: a.kind.clone(), target: a.target.clone(), negate: a.negate }),
        }
    }
}
