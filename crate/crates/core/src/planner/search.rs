use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GroundedTask, Plan, PlanError, PlanStep, State};

/// Assigns a priority to each generated node; lowest is expanded first.
/// `None` marks a dead end.
pub trait SearchStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn aliases(&self) -> &'static [&'static str] {
        &[]
    }
    fn evaluate(&self, task: &GroundedTask, state: &State, g: u64) -> Option<u64>;
}

pub struct UniformCost;

impl SearchStrategy for UniformCost {
    fn name(&self) -> &'static str {
        "uniform_cost"
    }
    fn aliases(&self) -> &'static [&'static str] {
        &["ucs"]
    }
    fn evaluate(&self, _: &GroundedTask, _: &State, g: u64) -> Option<u64> {
        Some(g)
    }
}

pub struct AstarGoalCount;

impl SearchStrategy for AstarGoalCount {
    fn name(&self) -> &'static str {
        "astar_goalcount"
    }
    fn aliases(&self) -> &'static [&'static str] {
        &["astar"]
    }
    fn evaluate(&self, task: &GroundedTask, state: &State, g: u64) -> Option<u64> {
        Some(g + goal_count(task, state))
    }
}

pub struct GbfsAdditive;

impl SearchStrategy for GbfsAdditive {
    fn name(&self) -> &'static str {
        "gbfs_hadd"
    }
    fn aliases(&self) -> &'static [&'static str] {
        &["gbfs"]
    }
    fn evaluate(&self, task: &GroundedTask, state: &State, _: u64) -> Option<u64> {
        h_add(task, state)
    }
}

/// Unsatisfied goal literals.
pub fn goal_count(task: &GroundedTask, s: &State) -> u64 {
    let pos = task.goal_pos.iter().filter(|&&i| !s.contains(i)).count();
    let neg = task.goal_neg.iter().filter(|&&i| s.contains(i)).count();
    (pos + neg) as u64
}

/// Additive delete-relaxation estimate; `None` when some positive goal is
/// relaxed-unreachable.
pub fn h_add(task: &GroundedTask, s: &State) -> Option<u64> {
    const INF: u64 = u64::MAX;
    let mut cost = vec![INF; task.atoms.len()];
    for i in s.iter() {
        cost[i] = 0;
    }
    loop {
        let mut changed = false;
        for a in &task.actions {
            let mut c = 1u64;
            for &p in &a.pre_pos {
                if cost[p] == INF {
                    c = INF;
                    break;
                }
                c += cost[p];
            }
            if c == INF {
                continue;
            }
            for &e in &a.add {
                if c < cost[e] {
                    cost[e] = c;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut h = 0u64;
    for &g in &task.goal_pos {
        if cost[g] == INF {
            return None;
        }
        h += cost[g];
    }
    h += task.goal_neg.iter().filter(|&&i| s.contains(i)).count() as u64;
    Some(h)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub strategy: String,
    pub max_expansions: u64,
    /// 0 keeps the natural successor order; other values shuffle it
    /// reproducibly.
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            strategy: "uniform_cost".into(),
            max_expansions: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    pub plan: Plan,
    pub expansions: u64,
    pub strategy: &'static str,
}

#[derive(Default)]
pub struct StrategyRegistry {
    entries: BTreeMap<&'static str, Box<dyn SearchStrategy>>,
}

impl StrategyRegistry {
    pub fn with_defaults() -> Self {
        let mut r = StrategyRegistry::default();
        r.register(Box::new(UniformCost));
        r.register(Box::new(AstarGoalCount));
        r.register(Box::new(GbfsAdditive));
        r
    }

    pub fn register(&mut self, s: Box<dyn SearchStrategy>) {
        self.entries.insert(s.name(), s);
    }

    pub fn get(&self, name: &str) -> Result<&dyn SearchStrategy, PlanError> {
        self.entries
            .values()
            .find(|s| s.name() == name || s.aliases().contains(&name))
            .map(|s| s.as_ref())
            .ok_or_else(|| PlanError::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

struct Node {
    state: State,
    parent: Option<(usize, usize)>,
    g: u64,
}

fn extract_plan(task: &GroundedTask, nodes: &[Node], mut at: usize) -> Plan {
    let mut steps = Vec::new();
    while let Some((parent, action)) = nodes[at].parent {
        let a = &task.actions[action];
        steps.push(PlanStep {
            agent: a.agent.clone(),
            action: a.schema.clone(),
            args: a.args.clone(),
        });
        at = parent;
    }
    steps.reverse();
    Plan { steps }
}

/// Best-first search ordered by (priority, insertion order); the goal test
/// happens when a node is popped.
pub fn plan(task: &GroundedTask, strategy: &dyn SearchStrategy, cfg: &SearchConfig) -> Result<SearchOutcome, PlanError> {
    if cfg.max_expansions == 0 {
        return Err(PlanError::InvalidConfig("max_expansions must be positive".into()));
    }
    if let Some(lit) = task.unreachable_goals.first() {
        return Err(PlanError::Unsolvable(format!("goal {lit} is unreachable")));
    }
    let mut rng = (cfg.seed != 0).then(|| ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut nodes = vec![Node {
        state: task.init.clone(),
        parent: None,
        g: 0,
    }];
    let mut best_g: HashMap<State, u64> = HashMap::new();
    best_g.insert(task.init.clone(), 0);
    let mut open = BinaryHeap::new();
    let mut counter = 0u64;
    if let Some(f) = strategy.evaluate(task, &task.init, 0) {
        open.push(Reverse((f, counter, 0usize)));
    }
    let mut expansions = 0u64;
    let mut order: Vec<usize> = Vec::new();
    while let Some(Reverse((_, _, id))) = open.pop() {
        let (g, state) = (nodes[id].g, nodes[id].state.clone());
        if best_g.get(&state).is_some_and(|&b| b < g) {
            continue;
        }
        if task.is_goal(&state) {
            return Ok(SearchOutcome {
                plan: extract_plan(task, &nodes, id),
                expansions,
                strategy: strategy.name(),
            });
        }
        if expansions >= cfg.max_expansions {
            return Err(PlanError::ResourceLimit { expansions });
        }
        expansions += 1;
        order.clear();
        order.extend((0..task.actions.len()).filter(|&a| task.actions[a].applicable(&state)));
        if let Some(r) = rng.as_mut() {
            order.shuffle(r);
        }
        for &a in &order {
            let next = task.actions[a].apply(&state);
            let ng = g + 1;
            if best_g.get(&next).is_some_and(|&b| b <= ng) {
                continue;
            }
            let Some(f) = strategy.evaluate(task, &next, ng) else { continue };
            best_g.insert(next.clone(), ng);
            nodes.push(Node {
                state: next,
                parent: Some((id, a)),
                g: ng,
            });
            counter += 1;
            open.push(Reverse((f, counter, nodes.len() - 1)));
        }
    }
    Err(PlanError::Unsolvable("search space exhausted".into()))
}
