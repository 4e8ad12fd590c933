//! Plan checking and a breadth-first reference planner. Neither shares
//! state representation or successor generation with the search.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{GroundedTask, Plan, PlanError, PlanStep};
use crate::logic::Atom;

pub const DEFAULT_ORACLE_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    Invalid { step: usize, missing: String },
    GoalUnmet { atoms: Vec<String> },
}

fn lookup(task: &GroundedTask) -> HashMap<(&str, &[String]), usize> {
    task.actions
        .iter()
        .enumerate()
        .map(|(i, a)| ((a.schema.as_str(), a.args.as_slice()), i))
        .collect()
}

fn atoms_of(task: &GroundedTask, idx: &[usize]) -> Vec<Atom> {
    idx.iter().map(|&i| task.atoms[i].clone()).collect()
}

/// States visited by `plan`, starting with init. Stops at the first step
/// whose preconditions fail.
pub fn trajectory(task: &GroundedTask, plan: &Plan) -> Result<(Vec<HashSet<Atom>>, Verdict), PlanError> {
    let table = lookup(task);
    let mut state: HashSet<Atom> = task.init.iter().map(|i| task.atoms[i].clone()).collect();
    let mut states = vec![state.clone()];
    for (k, step) in plan.steps.iter().enumerate() {
        let &ai = table
            .get(&(step.action.as_str(), step.args.as_slice()))
            .ok_or_else(|| PlanError::UnknownAction { step: k, action: step.to_string() })?;
        let a = &task.actions[ai];
        if a.agent != step.agent {
            return Err(PlanError::UnknownAction { step: k, action: format!("{step} by {}", step.agent) });
        }
        if let Some(m) = atoms_of(task, &a.pre_pos).into_iter().find(|p| !state.contains(p)) {
            return Ok((states, Verdict::Invalid { step: k, missing: m.to_string() }));
        }
        if let Some(m) = atoms_of(task, &a.pre_neg).into_iter().find(|p| state.contains(p)) {
            return Ok((states, Verdict::Invalid { step: k, missing: format!("(not {m})") }));
        }
        for d in atoms_of(task, &a.del) {
            state.remove(&d);
        }
        state.extend(atoms_of(task, &a.add));
        states.push(state.clone());
    }
    let mut unmet: Vec<String> = atoms_of(task, &task.goal_pos)
        .into_iter()
        .filter(|g| !state.contains(g))
        .map(|g| g.to_string())
        .chain(
            atoms_of(task, &task.goal_neg)
                .into_iter()
                .filter(|g| state.contains(g))
                .map(|g| format!("(not {g})")),
        )
        .chain(task.unreachable_goals.iter().map(|l| l.to_string()))
        .collect();
    unmet.sort();
    let verdict = if unmet.is_empty() { Verdict::Valid } else { Verdict::GoalUnmet { atoms: unmet } };
    Ok((states, verdict))
}

pub fn validate_plan(task: &GroundedTask, plan: &Plan) -> Result<Verdict, PlanError> {
    trajectory(task, plan).map(|(_, v)| v)
}

/// Indices of trajectory states where `robot` is in a room marked
/// `(human-active-in r)`.
pub fn occupancy_conflicts(states: &[HashSet<Atom>], robot: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for (k, s) in states.iter().enumerate() {
        for a in s {
            if a.predicate == "at-agent" && a.args.len() == 2 && a.args[0] == robot {
                let active = Atom::new("human-active-in", [&a.args[1]]);
                if s.contains(&active) {
                    out.push((k, a.args[1].clone()));
                }
            }
        }
    }
    out
}

/// Minimum-length plan by exhaustive breadth-first search over at most
/// `cap` distinct states.
pub fn optimal_plan_bfs(task: &GroundedTask, cap: usize) -> Result<Plan, PlanError> {
    type S = BTreeSet<usize>;
    let init: S = task.init.iter().collect();
    let goal_pos: Vec<usize> = task.goal_pos.clone();
    let goal_neg: Vec<usize> = task.goal_neg.clone();
    let is_goal = |s: &S| goal_pos.iter().all(|g| s.contains(g)) && goal_neg.iter().all(|g| !s.contains(g));
    if !task.unreachable_goals.is_empty() {
        return Err(PlanError::Unsolvable("goal unreachable".into()));
    }
    let mut parent: HashMap<S, Option<(S, usize)>> = HashMap::new();
    parent.insert(init.clone(), None);
    let mut queue = VecDeque::from([init]);
    while let Some(s) = queue.pop_front() {
        if is_goal(&s) {
            let mut steps = Vec::new();
            let mut cur = s;
            while let Some(Some((prev, a))) = parent.get(&cur).cloned() {
                let ga = &task.actions[a];
                steps.push(PlanStep {
                    agent: ga.agent.clone(),
                    action: ga.schema.clone(),
                    args: ga.args.clone(),
                });
                cur = prev;
            }
            steps.reverse();
            return Ok(Plan { steps });
        }
        for (ai, a) in task.actions.iter().enumerate() {
            if a.pre_pos.iter().all(|p| s.contains(p)) && a.pre_neg.iter().all(|p| !s.contains(p)) {
                let mut next = s.clone();
                for d in &a.del {
                    next.remove(d);
                }
                next.extend(a.add.iter().copied());
                if !parent.contains_key(&next) {
                    if parent.len() >= cap {
                        return Err(PlanError::OracleCapExceeded { cap });
                    }
                    parent.insert(next.clone(), Some((s.clone(), ai)));
                    queue.push_back(next);
                }
            }
        }
    }
    Err(PlanError::Unsolvable("state space exhausted".into()))
}
