//! User constraints over MDP states and actions.

use crate::error::{Error, Result};
use crate::mdp::{AaAction, AaMdp, FeatureKind, FeatureSchema};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    ForbiddenState,
    ForbiddenAction,
    RequiredState,
    RequiredAction,
}

impl ConstraintKind {
    pub fn is_forbidding(self) -> bool {
        matches!(self, ConstraintKind::ForbiddenState | ConstraintKind::ForbiddenAction)
    }

    pub fn is_action(self) -> bool {
        matches!(self, ConstraintKind::ForbiddenAction | ConstraintKind::RequiredAction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "=" | "==" => CmpOp::Eq,
            "!=" | "≠" => CmpOp::Ne,
            "<" => CmpOp::Lt,
            ">" => CmpOp::Gt,
            "<=" | "≤" => CmpOp::Le,
            ">=" | "≥" => CmpOp::Ge,
            _ => return Err(Error::invalid(format!("unknown comparison \"{s}\""))),
        })
    }

    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Gt => a > b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue {
    Number(f64),
    Label(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTest {
    pub feature: String,
    pub op: CmpOp,
    pub value: FeatureValue,
}

/// Matches actions of a kind (`transfer`, `wait`, `coord_change`,
/// `decide`), optionally with a given target; `negate` inverts the match.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionPredicate {
    pub negate: bool,
    pub kind: String,
    pub target: Option<String>,
}

impl ActionPredicate {
    pub fn matches(&self, a: &AaAction) -> bool {
        let hit = a.kind() == self.kind && self.target.as_deref().is_none_or(|t| a.target() == Some(t));
        hit != self.negate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub id: String,
    pub kind: ConstraintKind,
    /// Conjunction; empty matches every state.
    pub state_predicate: Vec<FeatureTest>,
    pub action_predicate: Option<ActionPredicate>,
}

const KINDS: [&str; 4] = ["transfer", "wait", "coord_change", "decide"];

/// An action predicate with its kind resolved to a position in `KINDS`.
#[derive(Debug, Clone, PartialEq)]
struct ActionMatcher {
    kind: usize,
    target: Option<String>,
    negate: bool,
}

impl ActionMatcher {
    fn matches(&self, a: &AaAction) -> bool {
        let kind = match a {
            AaAction::Transfer(_) => 0,
            AaAction::Wait => 1,
            AaAction::CoordChange => 2,
            AaAction::Decide(_) => 3,
        };
        let hit = kind == self.kind && self.target.as_deref().is_none_or(|t| a.target() == Some(t));
        hit != self.negate
    }
}

/// A constraint resolved against a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    pub kind: ConstraintKind,
    tests: Vec<(usize, CmpOp, f64)>,
    action: Option<ActionMatcher>,
}

impl Compiled {
    pub fn state_matches(&self, values: &[f64]) -> bool {
        self.tests.iter().all(|&(i, op, v)| op.holds(values[i], v))
    }

    /// Whether taking `a` in a state with `values` matches.
    pub fn action_matches(&self, values: &[f64], a: &AaAction) -> bool {
        self.action_only(a) && self.state_matches(values)
    }

    fn action_only(&self, a: &AaAction) -> bool {
        self.action.as_ref().is_some_and(|p| p.matches(a))
    }
}

pub fn compile(c: &Constraint, schema: &FeatureSchema) -> Result<Compiled> {
    let mut tests = Vec::with_capacity(c.state_predicate.len());
    for t in &c.state_predicate {
        let i = schema
            .index(&t.feature)
            .ok_or_else(|| Error::invalid(format!("constraint {}: unknown feature \"{}\"", c.id, t.feature)))?;
        let v = match (&schema.features[i].kind, &t.value) {
            (FeatureKind::Numeric, FeatureValue::Number(x)) => *x,
            (FeatureKind::Numeric, FeatureValue::Label(l)) => {
                return Err(Error::invalid(format!("constraint {}: feature \"{}\" is numeric, got \"{l}\"", c.id, t.feature)))
            }
            (FeatureKind::Categorical(_), v) => {
                if !matches!(t.op, CmpOp::Eq | CmpOp::Ne) {
                    return Err(Error::invalid(format!("constraint {}: categorical \"{}\" allows only = and ≠", c.id, t.feature)));
                }
                let label = match v {
                    FeatureValue::Label(l) => l.clone(),
                    FeatureValue::Number(x) => format!("{x}"),
                };
                schema
                    .code(i, &label)
                    .ok_or_else(|| Error::invalid(format!("constraint {}: \"{label}\" is not a value of \"{}\"", c.id, t.feature)))?
            }
        };
        tests.push((i, t.op, v));
    }
    let action = match (&c.action_predicate, c.kind.is_action()) {
        (None, true) => return Err(Error::invalid(format!("constraint {}: action constraints need an action predicate", c.id))),
        (Some(_), false) => return Err(Error::invalid(format!("constraint {}: state constraints take no action predicate", c.id))),
        (Some(p), true) => {
            let kind = KINDS
                .iter()
                .position(|k| *k == p.kind)
                .ok_or_else(|| Error::invalid(format!("constraint {}: unknown action kind \"{}\"", c.id, p.kind)))?;
            Some(ActionMatcher { kind, target: p.target.clone(), negate: p.negate })
        }
        (None, false) => None,
    };
    Ok(Compiled { kind: c.kind, tests, action })
}

/// Compiled constraints with requiring ones numbered in declaration order.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub ids: Vec<String>,
    pub compiled: Vec<Compiled>,
    /// Bit position of each requiring constraint, by declaration index.
    pub bit: Vec<Option<u32>>,
    pub required_mask: u64,
    /// Declaration indices grouped by kind.
    forbidden_states: Vec<usize>,
    required_states: Vec<usize>,
    actions: Vec<usize>,
}

/// Most requiring constraints a set may hold.
pub const MAX_REQUIRED: usize = 64;

impl ConstraintSet {
    pub fn new(cs: &[Constraint], mdp: &AaMdp) -> Result<Self> {
        let mut ids: Vec<String> = Vec::with_capacity(cs.len());
        let mut compiled = Vec::with_capacity(cs.len());
        let mut bit = Vec::with_capacity(cs.len());
        let mut next = 0u32;
        for c in cs {
            if ids.contains(&c.id) {
                return Err(Error::invalid(format!("duplicate constraint id \"{}\"", c.id)));
            }
            ids.push(c.id.clone());
            compiled.push(compile(c, &mdp.schema)?);
            if c.kind.is_forbidding() {
                bit.push(None);
            } else {
                if next as usize == MAX_REQUIRED {
                    return Err(Error::invalid("too many requiring constraints"));
                }
                bit.push(Some(next));
                next += 1;
            }
        }
        let required_mask = if next == 64 { u64::MAX } else { (1u64 << next) - 1 };
        let of = |k: &dyn Fn(ConstraintKind) -> bool| (0..compiled.len()).filter(|&i| k(compiled[i].kind)).collect::<Vec<_>>();
        let forbidden_states = of(&|k| k == ConstraintKind::ForbiddenState);
        let required_states = of(&|k| k == ConstraintKind::RequiredState);
        let actions = of(&|k| k.is_action());
        Ok(ConstraintSet { ids, compiled, bit, required_mask, forbidden_states, required_states, actions })
    }

    pub fn forbidden_state(&self, values: &[f64]) -> bool {
        self.forbidden_states.iter().any(|&i| self.compiled[i].state_matches(values))
    }

    pub fn forbidden_action(&self, values: &[f64], a: &AaAction) -> bool {
        self.compiled.iter().any(|c| c.kind == ConstraintKind::ForbiddenAction && c.action_matches(values, a))
    }

    pub fn required_state(&self, values: &[f64]) -> u64 {
        let mut m = 0;
        for &i in &self.required_states {
            if self.compiled[i].state_matches(values) {
                m |= 1u64 << self.bit[i].unwrap_or(0);
            }
        }
        m
    }

    pub fn required_action(&self, values: &[f64], a: &AaAction) -> u64 {
        let mut m = 0;
        for (c, b) in self.compiled.iter().zip(&self.bit) {
            if c.kind == ConstraintKind::RequiredAction && c.action_matches(values, a) {
                m |= 1u64 << b.unwrap_or(0);
            }
        }
        m
    }

    /// Indices of action constraints whose state test holds at `values`.
    pub fn matching_action_constraints(&self, values: &[f64], out: &mut Vec<usize>) {
        out.clear();
        for &i in &self.actions {
            if self.compiled[i].state_matches(values) {
                out.push(i);
            }
        }
    }

    /// Forbidden flag and required bits of taking `a`, given the output of
    /// [`Self::matching_action_constraints`] for the state.
    pub fn action_flags(&self, matching: &[usize], a: &AaAction) -> (bool, u64) {
        let mut f = false;
        let mut n = 0;
        for &i in matching {
            if self.compiled[i].action_only(a) {
                match self.bit[i] {
                    None => f = true,
                    Some(b) => n |= 1u64 << b,
                }
            }
        }
        (f, n)
    }

    pub fn has_required(&self) -> bool {
        self.required_mask != 0
    }
}
