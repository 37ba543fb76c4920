//! Seeded random MDPs and constraint sets for benchmarks and tests.

use crate::mdp::{AaAction, AaMdp, AaState, FeatureSchema, Transition};
use crate::rng::{stream, uniform};
use crate::solver::{ActionPredicate, CmpOp, Constraint, ConstraintKind, FeatureTest, FeatureValue};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

pub const TAGS: [&str; 3] = ["red", "green", "blue"];

/// Acyclic MDP over `states` states: arcs only go to higher-numbered
/// states and the last state is terminal. Features are `id`, `depth`
/// (longest distance from state 0) and a categorical `tag`.
pub fn random_mdp(seed: u64, states: usize) -> AaMdp {
    let n = states.max(2);
    let mut r = stream(seed, 0);
    let terminal: Vec<bool> = (0..n).map(|s| s == n - 1 || (s > 0 && r.gen::<f64>() < 0.25)).collect();
    let mut transitions = vec![Vec::new(); n];
    let mut depth = vec![0usize; n];
    for s in 0..n {
        if terminal[s] {
            continue;
        }
        let arity = r.gen_range(1..=3);
        for _ in 0..arity {
            let action = match r.gen_range(0..4) {
                0 => AaAction::Wait,
                1 => AaAction::Transfer("user".into()),
                2 => AaAction::CoordChange,
                _ => AaAction::Decide(format!("{}", r.gen_range(0..2))),
            };
            let fan = r.gen_range(1..=3);
            let mut next: Vec<(usize, f64)> = Vec::new();
            for _ in 0..fan {
                let j = r.gen_range(s + 1..n);
                let w = uniform(&mut r, 0.05, 1.0);
                match next.iter_mut().find(|(k, _)| *k == j) {
                    Some(e) => e.1 += w,
                    None => next.push((j, w)),
                }
            }
            let total: f64 = next.iter().map(|x| x.1).sum();
            next.iter_mut().for_each(|x| x.1 /= total);
            for &(j, _) in &next {
                depth[j] = depth[j].max(depth[s] + 1);
            }
            transitions[s].push(Transition { action, reward: uniform(&mut r, -1.0, 1.0), next });
        }
    }
    let tags: Vec<usize> = (0..n).map(|_| r.gen_range(0..TAGS.len())).collect();
    let states = (0..n)
        .map(|s| AaState { values: vec![s as f64, depth[s] as f64, tags[s] as f64], terminal: terminal[s] })
        .collect();
    let terminal_reward = (0..n).map(|s| if terminal[s] { uniform(&mut r, -5.0, 5.0) } else { 0.0 }).collect();
    AaMdp {
        schema: FeatureSchema::default().numeric("id").numeric("depth").categorical("tag", &TAGS),
        states,
        transitions,
        terminal_reward,
        initial: 0,
    }
}

/// `count` constraints over the features of [`random_mdp`]. With
/// `forbidding_only` every constraint is of a forbidding kind.
pub fn random_constraints(seed: u64, count: usize, forbidding_only: bool) -> Vec<Constraint> {
    let mut r = stream(seed, 1);
    (0..count)
        .map(|i| {
            let kind = match r.gen_range(0..if forbidding_only { 2 } else { 4 }) {
                0 => ConstraintKind::ForbiddenState,
                1 => ConstraintKind::ForbiddenAction,
                2 => ConstraintKind::RequiredState,
                _ => ConstraintKind::RequiredAction,
            };
            let mut tests = vec![FeatureTest {
                feature: "tag".into(),
                op: if r.gen::<bool>() { CmpOp::Eq } else { CmpOp::Ne },
                value: FeatureValue::Label(TAGS[r.gen_range(0..TAGS.len())].into()),
            }];
            if r.gen::<bool>() {
                let op = [CmpOp::Lt, CmpOp::Gt, CmpOp::Le, CmpOp::Ge][r.gen_range(0..4)];
                tests.push(FeatureTest { feature: "depth".into(), op, value: FeatureValue::Number(r.gen_range(0..6) as f64) });
            }
            let action_predicate = kind.is_action().then(|| ActionPredicate {
                negate: r.gen::<f64>() < 0.2,
                kind: ["transfer", "wait", "coord_change", "decide"][r.gen_range(0..4)].into(),
                target: None,
            });
            Constraint { id: format!("c{i}"), kind, state_predicate: tests, action_predicate }
        })
        .collect()
}
