//! Transfer-of-control strategies: skeletons, timed strategies, the
//! strategy-string syntax (`H(5)D(8)A`) and grammar validation.

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// One untimed element of a strategy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Step {
    Entity(String),
    D,
}

/// An untimed strategy: entities and coordination changes in order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StrategySkeleton {
    pub steps: Vec<Step>,
}

impl StrategySkeleton {
    pub fn new(steps: Vec<Step>) -> Self {
        StrategySkeleton { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn d_count(&self) -> usize {
        self.steps.iter().filter(|s| **s == Step::D).count()
    }

    /// True iff the skeleton is a string of the grammar `(E)(E | D)*`.
    pub fn is_grammatical(&self) -> bool {
        matches!(self.steps.first(), Some(Step::Entity(_)))
    }

    pub fn parse(text: &str, ids: &[&str]) -> Result<Self> {
        let items = tokenize(text, ids)?;
        Ok(StrategySkeleton { steps: items.into_iter().map(|(s, _)| s).collect() })
    }
}

impl fmt::Display for StrategySkeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let spaced = self.steps.iter().any(|s| matches!(s, Step::Entity(e) if e.chars().count() > 1));
        for (i, s) in self.steps.iter().enumerate() {
            if spaced && i > 0 {
                f.write_str(" ")?;
            }
            match s {
                Step::Entity(e) => f.write_str(e)?,
                Step::D => f.write_str("D")?,
            }
        }
        Ok(())
    }
}

/// A timed action.
#[derive(Debug, Clone, PartialEq)]
pub enum StrategyAction {
    /// Control passes to `entity` and is taken away at `end` (may be ∞).
    Transfer { entity: String, end: f64 },
    /// Coordination change performed at `at`.
    CoordChange { at: f64 },
}

impl StrategyAction {
    pub fn time(&self) -> f64 {
        match self {
            StrategyAction::Transfer { end, .. } => *end,
            StrategyAction::CoordChange { at } => *at,
        }
    }
}

/// A strategy with timings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimedStrategy {
    pub actions: Vec<StrategyAction>,
}

impl TimedStrategy {
    pub fn new(actions: Vec<StrategyAction>) -> Self {
        TimedStrategy { actions }
    }

    pub fn transfer(entity: &str, end: f64) -> StrategyAction {
        StrategyAction::Transfer { entity: entity.to_string(), end }
    }

    pub fn skeleton(&self) -> StrategySkeleton {
        StrategySkeleton {
            steps: self
                .actions
                .iter()
                .map(|a| match a {
                    StrategyAction::Transfer { entity, .. } => Step::Entity(entity.clone()),
                    StrategyAction::CoordChange { .. } => Step::D,
                })
                .collect(),
        }
    }

    pub fn d_count(&self) -> usize {
        self.actions.iter().filter(|a| matches!(a, StrategyAction::CoordChange { .. })).count()
    }

    /// Parses `H(5)D(8)A`. Every transfer but the last needs a time; a
    /// `D` without a time happens when the preceding action ends.
    pub fn parse(text: &str, ids: &[&str]) -> Result<Self> {
        let items = tokenize(text, ids)?;
        let n = items.len();
        let mut actions = Vec::with_capacity(n);
        let mut prev = 0.0;
        for (i, (step, time)) in items.into_iter().enumerate() {
            match step {
                Step::Entity(entity) => {
                    let end = match time {
                        Some(t) => t,
                        None if i + 1 == n => f64::INFINITY,
                        None => return Err(Error::invalid("every transfer except the last needs an end time")),
                    };
                    prev = end;
                    actions.push(StrategyAction::Transfer { entity, end });
                }
                Step::D => {
                    let at = time.unwrap_or(prev);
                    prev = at;
                    actions.push(StrategyAction::CoordChange { at });
                }
            }
        }
        Ok(TimedStrategy { actions })
    }
}

impl fmt::Display for TimedStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let spaced = self
            .actions
            .iter()
            .any(|a| matches!(a, StrategyAction::Transfer { entity, .. } if entity.chars().count() > 1));
        let mut prev = 0.0;
        for (i, a) in self.actions.iter().enumerate() {
            if spaced && i > 0 {
                f.write_str(" ")?;
            }
            match a {
                StrategyAction::Transfer { entity, end } => {
                    f.write_str(entity)?;
                    let last = i + 1 == self.actions.len();
                    if !(last && *end == f64::INFINITY) {
                        write_time(f, *end)?;
                    }
                    prev = *end;
                }
                StrategyAction::CoordChange { at } => {
                    f.write_str("D")?;
                    if *at != prev {
                        write_time(f, *at)?;
                    }
                    prev = *at;
                }
            }
        }
        Ok(())
    }
}

fn write_time(f: &mut fmt::Formatter<'_>, t: f64) -> fmt::Result {
    if t == f64::INFINITY {
        f.write_str("(inf)")
    } else {
        write!(f, "({t})")
    }
}

fn tokenize(text: &str, ids: &[&str]) -> Result<Vec<(Step, Option<f64>)>> {
    let mut out = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        rest = rest.trim_start_matches(|c: char| c.is_whitespace() || c == ',');
        if rest.is_empty() {
            break;
        }
        // Longest match among known ids and "D".
        let mut best: Option<(&str, Step)> = None;
        for id in ids {
            if rest.starts_with(id) && best.as_ref().is_none_or(|(b, _)| id.len() > b.len()) {
                best = Some((id, Step::Entity(id.to_string())));
            }
        }
        if rest.starts_with('D') && best.as_ref().is_none_or(|(b, _)| b.is_empty()) {
            best = Some(("D", Step::D));
        }
        let (tok, step) = best.ok_or_else(|| {
            let shown: String = rest.chars().take(12).collect();
            Error::invalid(alloc::format!("unknown strategy element at \"{shown}\""))
        })?;
        rest = &rest[tok.len()..];
        let mut time = None;
        if let Some(r) = rest.strip_prefix('(') {
            let close = r.find(')').ok_or_else(|| Error::invalid("unclosed time parenthesis"))?;
            let body = r[..close].trim();
            let t = match body {
                "inf" | "∞" => f64::INFINITY,
                _ => body.parse::<f64>().map_err(|_| Error::invalid(alloc::format!("bad time \"{body}\"")))?,
            };
            time = Some(t);
            rest = &r[close + 1..];
        }
        out.push((step, time));
    }
    if out.is_empty() {
        return Err(Error::invalid("empty strategy"));
    }
    Ok(out)
}

/// A reason a timed strategy is not admissible for an instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    LeadingNotTransfer,
    TimesDecreasing { index: usize },
    BadTime { index: usize },
    UnknownEntity(String),
    TooManyChanges { count: usize, max: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => f.write_str("strategy is empty"),
            Violation::LeadingNotTransfer => f.write_str("leading action must be a transfer"),
            Violation::TimesDecreasing { index } => write!(f, "times must be nondecreasing (action {index})"),
            Violation::BadTime { index } => {
                write!(f, "action {index} has a negative, NaN or non-final infinite time")
            }
            Violation::UnknownEntity(id) => write!(f, "unknown entity \"{id}\""),
            Violation::TooManyChanges { count, max } => {
                write!(f, "{count} coordination changes exceed the cap of {max}")
            }
        }
    }
}

/// Checks a timed strategy against the grammar and the instance.
/// An empty list means the strategy is valid.
pub fn validate_strategy(s: &TimedStrategy, inst: &ProblemInstance) -> Vec<Violation> {
    let mut v = Vec::new();
    if s.actions.is_empty() {
        v.push(Violation::Empty);
        return v;
    }
    if !matches!(s.actions[0], StrategyAction::Transfer { .. }) {
        v.push(Violation::LeadingNotTransfer);
    }
    let n = s.actions.len();
    let mut prev = 0.0;
    for (i, a) in s.actions.iter().enumerate() {
        let t = a.time();
        let final_transfer = i + 1 == n && matches!(a, StrategyAction::Transfer { .. });
        if t.is_nan() || t < 0.0 || (t == f64::INFINITY && !final_transfer) {
            v.push(Violation::BadTime { index: i });
            continue;
        }
        if t < prev {
            v.push(Violation::TimesDecreasing { index: i });
        }
        prev = prev.max(t);
        if let StrategyAction::Transfer { entity, .. } = a {
            if inst.index_of(entity).is_none() {
                v.push(Violation::UnknownEntity(entity.clone()));
            }
        }
    }
    let count = s.d_count();
    if let Some(max) = inst.coord.max_changes {
        if count > max {
            v.push(Violation::TooManyChanges { count, max });
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use alloc::vec;

    fn inst() -> ProblemInstance {
        ProblemInstance::new(
            vec![Entity::agent("A", 1.0), Entity::markovian("H", 2.0, 0.5).unwrap()],
            WaitCostModel::exponential(0.1, 10.0).unwrap(),
            CoordChangeModel::constant(1.0, 0.1, Some(2)),
        )
        .unwrap()
    }

    #[test]
    fn validation_examples() {
        let i = inst();
        let s = TimedStrategy::new(vec![StrategyAction::CoordChange { at: 0.0 }, TimedStrategy::transfer("H", f64::INFINITY)]);
        assert!(validate_strategy(&s, &i).contains(&Violation::LeadingNotTransfer));
        let s = TimedStrategy::new(vec![TimedStrategy::transfer("H", 5.0), TimedStrategy::transfer("A", f64::INFINITY)]);
        assert!(validate_strategy(&s, &i).is_empty());
        let s = TimedStrategy::new(vec![TimedStrategy::transfer("H", 5.0), TimedStrategy::transfer("A", 3.0)]);
        let v = validate_strategy(&s, &i);
        assert_eq!(v, vec![Violation::TimesDecreasing { index: 1 }]);
        assert!(v[0].to_string().contains("times must be nondecreasing"));
    }

    #[test]
    fn change_cap_and_unknown_entities() {
        let i = inst();
        let s = TimedStrategy::parse("H(1)D H(2)D H(3)D A", &["A", "H"]).unwrap();
        assert_eq!(
            validate_strategy(&s, &i),
            vec![Violation::TooManyChanges { count: 3, max: 2 }]
        );
        let s = TimedStrategy::new(vec![TimedStrategy::transfer("Z", 1.0)]);
        assert_eq!(validate_strategy(&s, &i), vec![Violation::UnknownEntity("Z".into())]);
    }

    #[test]
    fn parse_and_print_round_trip() {
        let ids = ["A", "H"];
        let s = TimedStrategy::parse("H(5)D(8)A", &ids).unwrap();
        assert_eq!(
            s.actions,
            vec![
                TimedStrategy::transfer("H", 5.0),
                StrategyAction::CoordChange { at: 8.0 },
                TimedStrategy::transfer("A", f64::INFINITY)
            ]
        );
        assert_eq!(s.to_string(), "H(5)D(8)A");
        let t = TimedStrategy::parse("H(2.5)DH(7)A", &ids).unwrap();
        assert_eq!(t.to_string(), "H(2.5)DH(7)A");
        assert_eq!(TimedStrategy::parse(&t.to_string(), &ids).unwrap(), t);
    }

    #[test]
    fn multi_char_ids_are_spaced() {
        let ids = ["agent", "user"];
        let s = TimedStrategy::parse("user(3) D agent", &ids).unwrap();
        assert_eq!(s.to_string(), "user(3) D agent");
        let k = StrategySkeleton::parse("user,D,user,agent", &ids).unwrap();
        assert_eq!(k.len(), 4);
        assert_eq!(k.to_string(), "user D user agent");
    }

    #[test]
    fn missing_interior_time_is_rejected() {
        assert!(TimedStrategy::parse("HA", &["A", "H"]).is_err());
        assert!(TimedStrategy::parse("HX", &["A", "H"]).is_err());
    }
}
