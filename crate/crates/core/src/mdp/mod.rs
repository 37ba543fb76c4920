//! Explicit finite MDPs over transfer-of-control decisions.

mod abstract_mdp;
mod auction;
mod delay;

pub use abstract_mdp::build_abstract_mdp;
pub use auction::{build_auction_mdp, AuctionScenario};
pub use delay::{agent_decision_quality, build_delay_mdp, DelayScenario, TeamWeights, DECISIONS, MAX_DELAYS};

use crate::error::{Error, Result};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Probability sums must match 1 this closely.
pub const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    Numeric,
    Categorical(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSchema {
    pub features: Vec<Feature>,
}

impl FeatureSchema {
    pub fn numeric(mut self, name: &str) -> Self {
        self.features.push(Feature { name: name.to_string(), kind: FeatureKind::Numeric });
        self
    }

    pub fn categorical(mut self, name: &str, labels: &[&str]) -> Self {
        let labels = labels.iter().map(|s| s.to_string()).collect();
        self.features.push(Feature { name: name.to_string(), kind: FeatureKind::Categorical(labels) });
        self
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Code of a categorical label.
    pub fn code(&self, feature: usize, label: &str) -> Option<f64> {
        match &self.features.get(feature)?.kind {
            FeatureKind::Categorical(ls) => ls.iter().position(|l| l == label).map(|i| i as f64),
            FeatureKind::Numeric => None,
        }
    }

    /// Text form of a feature value.
    pub fn render(&self, feature: usize, v: f64) -> String {
        match &self.features[feature].kind {
            FeatureKind::Categorical(ls) => ls.get(v as usize).cloned().unwrap_or_else(|| format!("#{v}")),
            FeatureKind::Numeric => format!("{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum AaAction {
    Transfer(String),
    Wait,
    CoordChange,
    Decide(String),
}

impl AaAction {
    pub fn kind(&self) -> &'static str {
        match self {
            AaAction::Transfer(_) => "transfer",
            AaAction::Wait => "wait",
            AaAction::CoordChange => "coord_change",
            AaAction::Decide(_) => "decide",
        }
    }

    pub fn target(&self) -> Option<&str> {
        match self {
            AaAction::Transfer(t) | AaAction::Decide(t) => Some(t),
            _ => None,
        }
    }
}

impl fmt::Display for AaAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AaAction::Transfer(e) => write!(f, "transfer:{e}"),
            AaAction::Wait => f.write_str("wait"),
            AaAction::CoordChange => f.write_str("coord_change"),
            AaAction::Decide(d) => write!(f, "decide:{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AaState {
    /// One value per schema feature; categorical values are label codes.
    pub values: Vec<f64>,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub action: AaAction,
    pub reward: f64,
    pub next: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AaMdp {
    pub schema: FeatureSchema,
    pub states: Vec<AaState>,
    /// Actions available in each state; empty for terminals.
    pub transitions: Vec<Vec<Transition>>,
    /// Value collected on reaching a terminal state (0 elsewhere).
    pub terminal_reward: Vec<f64>,
    pub initial: usize,
}

impl AaMdp {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.states[s].terminal
    }

    pub fn feature(&self, s: usize, name: &str) -> Option<f64> {
        self.schema.index(name).map(|i| self.states[s].values[i])
    }

    pub fn label(&self, s: usize) -> String {
        let parts: Vec<String> = (0..self.schema.features.len())
            .map(|i| format!("{}={}", self.schema.features[i].name, self.schema.render(i, self.states[s].values[i])))
            .collect();
        parts.join(",")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.states.len();
        if self.transitions.len() != n || self.terminal_reward.len() != n || self.initial >= n {
            return Err(Error::invalid("state, transition and reward tables disagree in size"));
        }
        for (s, st) in self.states.iter().enumerate() {
            if st.values.len() != self.schema.features.len() {
                return Err(Error::invalid(format!("state {s} has the wrong number of features")));
            }
            if st.terminal != self.transitions[s].is_empty() {
                return Err(Error::invalid(format!("state {s} ({}): terminal states and only they have no actions", self.label(s))));
            }
            for t in &self.transitions[s] {
                if !t.reward.is_finite() {
                    return Err(Error::invalid(format!("state {s} action {}: reward is not finite", t.action)));
                }
                let mut sum = 0.0;
                for &(j, p) in &t.next {
                    if j >= n || !(0.0..=1.0 + PROB_TOL).contains(&p) {
                        return Err(Error::invalid(format!("state {s} action {}: bad successor", t.action)));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(Error::invalid(format!("state {s} action {}: probabilities sum to {sum}", t.action)));
                }
            }
        }
        Ok(())
    }

    /// States ordered so every positive-probability successor comes later;
    /// `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.states.len();
        let mut indeg = vec![0usize; n];
        for ts in &self.transitions {
            for t in ts {
                for &(j, p) in &t.next {
                    if p > 0.0 {
                        indeg[j] += 1;
                    }
                }
            }
        }
        let mut stack: Vec<usize> = (0..n).rev().filter(|&s| indeg[s] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(s) = stack.pop() {
            order.push(s);
            for t in &self.transitions[s] {
                for &(j, p) in &t.next {
                    if p > 0.0 {
                        indeg[j] -= 1;
                        if indeg[j] == 0 {
                            stack.push(j);
                        }
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// One line per transition: `state action successor probability reward`,
    /// then one `state terminal - - reward` line per terminal.
    pub fn dump(&self) -> String {
        let mut out = String::from("# state\taction\tsuccessor\tprobability\treward\n");
        for (s, ts) in self.transitions.iter().enumerate() {
            for t in ts {
                for &(j, p) in &t.next {
                    out.push_str(&format!("{s}\t{}\t{j}\t{p}\t{}\n", t.action, t.reward));
                }
            }
        }
        for s in 0..self.states.len() {
            if self.states[s].terminal {
                out.push_str(&format!("{s}\tterminal\t-\t-\t{}\n", self.terminal_reward[s]));
            }
        }
        out
    }
}

/// Assigns state indices by feature values while a builder runs.
pub(crate) struct StateTable {
    index: BTreeMap<Vec<u64>, usize>,
    pub states: Vec<AaState>,
    pub transitions: Vec<Vec<Transition>>,
    pub terminal_reward: Vec<f64>,
}

impl StateTable {
    pub fn new() -> Self {
        StateTable { index: BTreeMap::new(), states: Vec::new(), transitions: Vec::new(), terminal_reward: Vec::new() }
    }

    /// Index of the state with `values`, creating it if new.
    pub fn intern(&mut self, values: Vec<f64>, terminal: bool, reward: f64) -> usize {
        let key: Vec<u64> = values.iter().map(|v| v.to_bits()).chain([terminal as u64]).collect();
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.states.len();
        self.index.insert(key, i);
        self.states.push(AaState { values, terminal });
        self.transitions.push(Vec::new());
        self.terminal_reward.push(if terminal { reward } else { 0.0 });
        i
    }

    pub fn finish(self, schema: FeatureSchema, initial: usize) -> Result<AaMdp> {
        let m = AaMdp { schema, states: self.states, transitions: self.transitions, terminal_reward: self.terminal_reward, initial };
        m.validate()?;
        Ok(m)
    }
}

/// Merges duplicate successors and drops zero-probability ones.
pub(crate) fn compact(next: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut m: BTreeMap<usize, f64> = BTreeMap::new();
    for (j, p) in next {
        *m.entry(j).or_insert(0.0) += p;
    }
    m.into_iter().filter(|&(_, p)| p > 0.0).collect()
}
