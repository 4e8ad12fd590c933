//! Discrete-step household world: scripted humans, a robot executing a
//! plan, and disturbance metrics over the resulting trace.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grounding::{activity_literals, held_items, item_object_type, DomainSpec, GroundingError, ProblemBuilder};
use crate::knowledge::KnowledgeBase;
use crate::logic::{Atom, Literal};
use crate::planner::{Plan, PlanStep};
use crate::scene_graph::{AgentKind, SceneError, SceneGraph, SemanticEdge, SnapshotSequence};

pub const IDLE: &str = "idle";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("agenda: {0}")]
    Schema(String),
    #[error("agenda for `{0}`, which is not a human of the scene")]
    UnknownHuman(String),
    #[error("agenda of `{human}`: timesteps must start at 1 and strictly increase (found {t} after {previous})")]
    BadTimestep { human: String, t: u32, previous: u32 },
    #[error("agenda of `{human}` targets unknown item `{target}`")]
    UnknownTarget { human: String, target: String },
    #[error("agenda of `{human}` uses activity `{activity}`, which is neither `idle` nor an action of the domain")]
    UnknownActivity { human: String, activity: String },
    #[error("agenda of `{human}` at t={t}: `{activity}` cannot be bound to `{target}`")]
    UnboundActivity {
        human: String,
        t: u32,
        activity: String,
        target: String,
    },
    #[error("two agendas for `{0}`")]
    DuplicateAgenda(String),
    #[error("trace has no steps")]
    EmptyTrace,
    #[error(transparent)]
    Grounding(#[from] GroundingError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub t: u32,
    pub activity: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Agenda {
    pub human_id: String,
    pub script: Vec<ScriptEntry>,
}

impl Agenda {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Schema(e.to_string()))
    }

    pub fn entry_at(&self, t: u32) -> Option<&ScriptEntry> {
        self.script.iter().find(|e| e.t == t)
    }

    /// First entry strictly after `t`.
    pub fn next_after(&self, t: u32) -> Option<&ScriptEntry> {
        self.script.iter().find(|e| e.t > t)
    }

    pub fn last_t(&self) -> u32 {
        self.script.last().map_or(0, |e| e.t)
    }

    pub fn validate(&self, scene: &SceneGraph, domain: &DomainSpec) -> Result<(), SimError> {
        let human = scene
            .agent(&self.human_id)
            .filter(|a| a.kind == AgentKind::Human)
            .ok_or_else(|| SimError::UnknownHuman(self.human_id.clone()))?;
        let mut previous = 0;
        for e in &self.script {
            if e.t <= previous {
                return Err(SimError::BadTimestep {
                    human: human.id.clone(),
                    t: e.t,
                    previous,
                });
            }
            previous = e.t;
            let item = scene.item(&e.target).ok_or_else(|| SimError::UnknownTarget {
                human: human.id.clone(),
                target: e.target.clone(),
            })?;
            if e.activity == IDLE {
                continue;
            }
            if !domain.elements.actions.contains_key(&e.activity) {
                return Err(SimError::UnknownActivity {
                    human: human.id.clone(),
                    activity: e.activity.clone(),
                });
            }
            let ty = item_object_type(&domain.elements, &item.category);
            if activity_literals(&domain.elements, &e.activity, &human.id, &item.id, &ty, &item.parent_room).is_none() {
                return Err(SimError::UnboundActivity {
                    human: human.id.clone(),
                    t: e.t,
                    activity: e.activity.clone(),
                    target: e.target.clone(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveActivity {
    pub activity: String,
    pub target: String,
    pub effects: BTreeSet<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub timestep: u32,
    pub atoms: BTreeSet<Atom>,
    pub activities: BTreeMap<String, ActiveActivity>,
}

impl WorldState {
    pub fn location_of_agent(&self, agent: &str) -> Option<&str> {
        self.atoms
            .iter()
            .find(|a| a.predicate == "at-agent" && a.args.len() == 2 && a.args[0] == agent)
            .map(|a| a.args[1].as_str())
    }

    pub fn holder_of(&self, item: &str) -> Option<&str> {
        self.atoms
            .iter()
            .find(|a| a.predicate == "holding" && a.args.len() == 2 && a.args[1] == item)
            .map(|a| a.args[0].as_str())
    }

    pub fn location_of_item(&self, item: &str) -> Option<&str> {
        self.atoms
            .iter()
            .find(|a| a.predicate == "at" && a.args.len() == 2 && a.args[0] == item)
            .map(|a| a.args[1].as_str())
            .or_else(|| self.holder_of(item).and_then(|h| self.location_of_agent(h)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointAction {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<PlanStep>,
    /// Script entry executed by each human at this step; absent humans idle.
    #[serde(default)]
    pub humans: BTreeMap<String, ScriptEntry>,
    /// Robot precondition that failed; the robot did nothing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub action: JointAction,
    pub state: WorldState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub robot_id: String,
    pub agendas: Vec<Agenda>,
    pub initial: WorldState,
    pub steps: Vec<TraceStep>,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    t: u32,
    action: Option<&'a JointAction>,
    state: &'a WorldState,
}

impl Trace {
    /// One JSON record per line; line 0 is the initial state.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let line = |t, action, state| serde_json::to_string(&TraceLine { t, action, state }).expect("trace serializes");
        out.push_str(&line(0, None, &self.initial));
        out.push('\n');
        for s in &self.steps {
            out.push_str(&line(s.state.timestep, Some(&s.action), &s.state));
            out.push('\n');
        }
        out
    }

    pub fn faults(&self) -> usize {
        self.steps.iter().filter(|s| s.action.fault.is_some()).count()
    }

    pub fn final_state(&self) -> &WorldState {
        self.steps.last().map_or(&self.initial, |s| &s.state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisturbanceReport {
    pub co_occupancy_steps: usize,
    pub item_conflicts: usize,
    pub faulted_steps: usize,
    pub steps: usize,
}

pub struct Simulator<'a> {
    domain: &'a DomainSpec,
    scene: &'a SceneGraph,
    robot: String,
}

impl<'a> Simulator<'a> {
    pub fn new(domain: &'a DomainSpec, scene: &'a SceneGraph) -> Result<Self, SimError> {
        let robot = scene.get_robot_node()?.id.clone();
        Ok(Simulator { domain, scene, robot })
    }

    pub fn robot(&self) -> &str {
        &self.robot
    }

    /// World state of the scene: the same atoms the problem's init gets,
    /// with already-running activities recorded.
    pub fn initial_state(&self) -> Result<WorldState, SimError> {
        let sg = self.scene;
        let mut b = ProblemBuilder::new(self.domain.clone(), "sim");
        b.add_rooms(&sg.rooms)?;
        for a in &sg.agents {
            b.add_agent(a)?;
        }
        let held = held_items(sg);
        for item in &sg.items {
            b.set_init_state(item, held.contains_key(item.id.as_str()))?;
        }
        let mut activities = BTreeMap::new();
        for h in sg.humans() {
            if let Some((target, effects)) = b.apply_current_activity(h, sg)? {
                let activity = h.current_action.clone().expect("bound activity has a label");
                activities.insert(h.id.clone(), ActiveActivity { activity, target, effects });
            }
        }
        Ok(WorldState {
            timestep: 0,
            atoms: b.problem().init.clone(),
            activities,
        })
    }

    fn robot_fault(&self, w: &WorldState, step: &PlanStep) -> Option<String> {
        let Some(schema) = self.domain.elements.actions.get(&step.action) else {
            return Some(format!("unknown action {step}"));
        };
        let Some(inst) = schema.instantiate(&step.args) else {
            return Some(format!("wrong arity in {step}"));
        };
        inst.pre
            .iter()
            .find(|l: &&Literal| w.atoms.contains(&l.atom) == l.negated)
            .map(|l| l.to_string())
    }

    /// Applies the humans' entries, then the robot action if its
    /// preconditions held in `w`.
    pub fn step(&self, w: &WorldState, robot: Option<&PlanStep>, humans: &BTreeMap<String, ScriptEntry>) -> (WorldState, Option<String>) {
        let fault = robot.and_then(|s| self.robot_fault(w, s));
        let mut next = w.clone();
        next.timestep = w.timestep + 1;

        let human_ids: Vec<String> = self.scene.humans().iter().map(|h| h.id.clone()).collect();
        for h in &human_ids {
            if let Some(old) = next.activities.remove(h) {
                let still: BTreeSet<&Atom> = next.activities.values().flat_map(|a| a.effects.iter()).collect();
                for atom in &old.effects {
                    if !still.contains(atom) {
                        next.atoms.remove(atom);
                    }
                }
            }
        }
        for h in &human_ids {
            let Some(entry) = humans.get(h) else { continue };
            let Some(room) = next.location_of_item(&entry.target).map(str::to_string) else { continue };
            if let Some(cur) = next.location_of_agent(h).map(str::to_string) {
                next.atoms.remove(&Atom::new("at-agent", [h, &cur]));
            }
            next.atoms.insert(Atom::new("at-agent", [h, &room]));
            if entry.activity == IDLE {
                continue;
            }
            let category = self.scene.item(&entry.target).map(|i| i.category.as_str()).unwrap_or("");
            let ty = item_object_type(&self.domain.elements, category);
            if let Some(effects) = activity_literals(&self.domain.elements, &entry.activity, h, &entry.target, &ty, &room) {
                next.atoms.extend(effects.iter().cloned());
                next.activities.insert(
                    h.clone(),
                    ActiveActivity {
                        activity: entry.activity.clone(),
                        target: entry.target.clone(),
                        effects,
                    },
                );
            }
        }

        if let (Some(step), None) = (robot, &fault) {
            let inst = self.domain.elements.actions[&step.action]
                .instantiate(&step.args)
                .expect("checked above");
            for d in &inst.del {
                next.atoms.remove(d);
            }
            next.atoms.extend(inst.add.iter().cloned());
        }
        (next, fault)
    }

    /// Runs the robot's steps of `plan`, one per world step, alongside the
    /// agendas. Steps of other agents are left to the humans' scripts.
    pub fn run(&self, plan: &Plan, agendas: &[Agenda]) -> Result<Trace, SimError> {
        let mut seen = BTreeSet::new();
        for a in agendas {
            a.validate(self.scene, self.domain)?;
            if !seen.insert(&a.human_id) {
                return Err(SimError::DuplicateAgenda(a.human_id.clone()));
            }
        }
        let robot_steps: Vec<&PlanStep> = plan.steps.iter().filter(|s| s.agent == self.robot).collect();
        let horizon = agendas.iter().map(Agenda::last_t).max().unwrap_or(0).max(robot_steps.len() as u32);
        let initial = self.initial_state()?;
        let mut state = initial.clone();
        let mut steps = Vec::new();
        for k in 1..=horizon {
            let humans: BTreeMap<String, ScriptEntry> = agendas
                .iter()
                .filter_map(|a| a.entry_at(k).map(|e| (a.human_id.clone(), e.clone())))
                .collect();
            let robot = robot_steps.get(k as usize - 1).copied();
            let (next, fault) = self.step(&state, robot, &humans);
            steps.push(TraceStep {
                action: JointAction {
                    robot: robot.cloned(),
                    humans,
                    fault,
                },
                state: next.clone(),
            });
            state = next;
        }
        let mut agendas = agendas.to_vec();
        agendas.sort_by(|a, b| a.human_id.cmp(&b.human_id));
        Ok(Trace {
            robot_id: self.robot.clone(),
            agendas,
            initial,
            steps,
        })
    }
}

/// Co-occupancy: steps ending with the robot in the room of a human whose
/// activity is not idle. Item conflicts: steps where the robot holds or
/// acts on an item targeted by a human's current or next script entry.
pub fn disturbance_metrics(trace: &Trace) -> DisturbanceReport {
    let mut co = 0;
    let mut conflicts = 0;
    for (k, s) in trace.steps.iter().enumerate() {
        let t = k as u32 + 1;
        let robot_room = s.state.location_of_agent(&trace.robot_id);
        let shared = s.state.activities.keys().any(|h| {
            robot_room.is_some() && s.state.location_of_agent(h) == robot_room
        });
        if shared {
            co += 1;
        }
        let mut used: BTreeSet<&str> = s
            .state
            .atoms
            .iter()
            .filter(|a| a.predicate == "holding" && a.args.len() == 2 && a.args[0] == trace.robot_id)
            .map(|a| a.args[1].as_str())
            .collect();
        if let (Some(step), None) = (&s.action.robot, &s.action.fault) {
            used.extend(step.args.iter().map(String::as_str));
        }
        let needed = trace.agendas.iter().any(|a| {
            let current = a.entry_at(t).filter(|e| e.activity != IDLE);
            let next = a.next_after(t).filter(|e| e.activity != IDLE);
            [current, next].into_iter().flatten().any(|e| used.contains(e.target.as_str()))
        });
        if needed {
            conflicts += 1;
        }
    }
    DisturbanceReport {
        co_occupancy_steps: co,
        item_conflicts: conflicts,
        faulted_steps: trace.faults(),
        steps: trace.steps.len(),
    }
}

/// One snapshot per trace step, with agent and item placement read back
/// from the state and one edge per active human activity.
pub fn generate_snapshots(trace: &Trace, initial: &SceneGraph, kb: &KnowledgeBase) -> Result<SnapshotSequence, SimError> {
    if trace.steps.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    let mut out = Vec::with_capacity(trace.steps.len());
    for (k, step) in trace.steps.iter().enumerate() {
        let t = k as u32 + 1;
        let w = &step.state;
        let mut sg = initial.clone();
        sg.timestep = t;
        sg.edges.clear();
        for a in &mut sg.agents {
            if let Some(r) = w.location_of_agent(&a.id) {
                a.parent_room = r.to_string();
            }
            a.holding = w
                .atoms
                .iter()
                .filter(|x| x.predicate == "holding" && x.args.len() == 2 && x.args[0] == a.id)
                .map(|x| x.args[1].clone())
                .collect();
            a.current_action = w.activities.get(&a.id).map(|act| act.activity.clone());
        }
        for item in &mut sg.items {
            if let Some(r) = w.location_of_item(&item.id) {
                item.parent_room = r.to_string();
            }
            let keys: Vec<String> = item.states.keys().cloned().collect();
            for key in keys {
                let prefix = format!("{key}-");
                if let Some(atom) = w
                    .atoms
                    .iter()
                    .find(|x| x.args.len() == 1 && x.args[0] == item.id && x.predicate.starts_with(&prefix))
                {
                    item.states.insert(key, atom.predicate[prefix.len()..].to_string());
                }
            }
        }
        for (h, act) in &w.activities {
            sg.edges.push(SemanticEdge::new(h, &act.target, &kb.relation_for(&act.activity), t));
        }
        out.push(sg);
    }
    Ok(SnapshotSequence::new(out)?)
}
