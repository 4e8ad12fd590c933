use std::collections::{BTreeMap, BTreeSet};

use super::{is_identifier, DomainSpec, GroundingError, ProblemSpec};
use crate::logic::{Atom, DomainElements, Literal, AGENT, ITEM, ROOM};
use crate::predictor::{GoalCandidate, Synthesis};
use crate::scene_graph::{AgentKind, AgentNode, ItemNode, RoomNode, SceneGraph};

/// Object type of an item: its category when the domain declares it as a
/// subtype of `item`, otherwise `item`.
pub fn item_object_type(domain: &DomainElements, category: &str) -> String {
    if domain.types.contains(category) && domain.types.is_subtype(category, ITEM) {
        category.to_string()
    } else {
        ITEM.to_string()
    }
}

/// Add effects of schema `action` performed by `human` on `item` in `room`.
/// The agent parameter takes the human, the first item-typed parameter the
/// item, the first room-typed parameter the room. `None` unless every
/// parameter is bound and the item type fits.
pub fn activity_literals(
    domain: &DomainElements,
    action: &str,
    human: &str,
    item: &str,
    item_type: &str,
    room: &str,
) -> Option<BTreeSet<Atom>> {
    let schema = domain.actions.get(action)?;
    let types = &domain.types;
    let agent_idx = schema.agent_param_index(types)?;
    let mut args: Vec<Option<&str>> = vec![None; schema.params.len()];
    args[agent_idx] = Some(human);
    if let Some(i) = schema.params.iter().position(|p| types.is_subtype(&p.ty, ITEM)) {
        if !types.is_subtype(item_type, &schema.params[i].ty) {
            return None;
        }
        args[i] = Some(item);
    }
    if let Some(i) = schema.params.iter().position(|p| p.ty == ROOM) {
        args[i] = Some(room);
    }
    let args: Option<Vec<String>> = args.into_iter().map(|a| a.map(str::to_string)).collect();
    let inst = schema.instantiate(&args?)?;
    Some(inst.add.into_iter().collect())
}

/// Incrementally assembles a problem against a domain that may be extended
/// along the way.
pub struct ProblemBuilder {
    domain: DomainSpec,
    problem: ProblemSpec,
    rooms: BTreeSet<String>,
}

impl ProblemBuilder {
    pub fn new(domain: DomainSpec, name: &str) -> Self {
        let problem = ProblemSpec {
            name: name.to_string(),
            domain_name: domain.name.clone(),
            ..Default::default()
        };
        ProblemBuilder {
            domain,
            problem,
            rooms: BTreeSet::new(),
        }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    fn declared(&self, predicate: &str, arity: usize) -> bool {
        self.domain
            .elements
            .predicates
            .get(predicate)
            .is_some_and(|p| p.params.len() == arity)
    }

    fn add_object(&mut self, id: &str, ty: &str) -> Result<(), GroundingError> {
        if !is_identifier(id) {
            return Err(GroundingError::InvalidIdentifier(id.to_string()));
        }
        if self.problem.objects.contains_key(id) {
            return Err(GroundingError::DuplicateObject(id.to_string()));
        }
        self.problem.objects.insert(id.to_string(), ty.to_string());
        Ok(())
    }

    /// Room objects plus `(connected a b)` in both directions per adjacency.
    pub fn add_rooms(&mut self, rooms: &[RoomNode]) -> Result<(), GroundingError> {
        for r in rooms {
            self.add_object(&r.id, ROOM)?;
            self.rooms.insert(r.id.clone());
        }
        if self.declared("connected", 2) {
            for r in rooms {
                for n in &r.neighbors {
                    self.problem.init.insert(Atom::new("connected", [&r.id, n]));
                    self.problem.init.insert(Atom::new("connected", [n, &r.id]));
                }
            }
        }
        Ok(())
    }

    /// Agent object with location, held items and role literals.
    pub fn add_agent(&mut self, agent: &AgentNode) -> Result<(), GroundingError> {
        self.add_object(&agent.id, AGENT)?;
        let init = &mut self.problem.init;
        init.insert(Atom::new("at-agent", [&agent.id, &agent.parent_room]));
        for item in &agent.holding {
            init.insert(Atom::new("holding", [&agent.id, item]));
        }
        let role = match agent.kind {
            AgentKind::Robot => "is-robot",
            AgentKind::Human => "is-human",
        };
        if self.declared(role, 1) {
            self.problem.init.insert(Atom::new(role, [&agent.id]));
        }
        if agent.kind == AgentKind::Robot && self.declared("robot-at", 1) {
            self.problem.init.insert(Atom::new("robot-at", [&agent.parent_room]));
        }
        Ok(())
    }

    /// For a human whose current action names a schema, adds the effects of
    /// that activity already under way and returns the bound item with the
    /// effects. Other labels add nothing.
    pub fn apply_current_activity(
        &mut self,
        human: &AgentNode,
        scene: &SceneGraph,
    ) -> Result<Option<(String, BTreeSet<Atom>)>, GroundingError> {
        let Some(action) = &human.current_action else { return Ok(None) };
        if !self.domain.elements.actions.contains_key(action) {
            return Ok(None);
        }
        let (_, items) = scene
            .get_edges_and_neighbors(&human.id)
            .map_err(|_| GroundingError::InvalidProblem(format!("`{}` is not a human of the scene", human.id)))?;
        let bound = items.iter().find_map(|id| {
            let item = scene.item(id)?;
            let ty = item_object_type(&self.domain.elements, &item.category);
            activity_literals(&self.domain.elements, action, &human.id, id, &ty, &human.parent_room)
                .map(|atoms| (id.clone(), atoms))
        });
        match bound {
            Some((item, atoms)) => {
                self.problem.init.extend(atoms.iter().cloned());
                Ok(Some((item, atoms)))
            }
            None => Err(GroundingError::UnboundActivity {
                human: human.id.clone(),
                action: action.clone(),
            }),
        }
    }

    /// Item object with `(at i r)` unless held, `(accessible i)` when
    /// accessible, and `(key-value i)` per state entry.
    pub fn set_init_state(&mut self, item: &ItemNode, held: bool) -> Result<(), GroundingError> {
        if !self.rooms.contains(&item.parent_room) {
            return Err(GroundingError::UnknownRoom {
                item: item.id.clone(),
                room: item.parent_room.clone(),
            });
        }
        let mut atoms = Vec::new();
        for (key, value) in &item.states {
            let predicate = format!("{key}-{value}");
            if !self.declared(&predicate, 1) {
                return Err(GroundingError::UndeclaredStatePredicate {
                    item: item.id.clone(),
                    key: key.clone(),
                    value: value.clone(),
                    predicate,
                });
            }
            atoms.push(Atom::new(predicate, [&item.id]));
        }
        let ty = item_object_type(&self.domain.elements, &item.category);
        self.add_object(&item.id, &ty)?;
        if !held {
            atoms.push(Atom::new("at", [&item.id, &item.parent_room]));
        }
        if item.accessible && self.declared("accessible", 1) {
            atoms.push(Atom::new("accessible", [&item.id]));
        }
        self.problem.init.extend(atoms);
        Ok(())
    }

    fn check_goal(&self, agent: &str, goal: &BTreeSet<Literal>) -> Result<(), GroundingError> {
        for lit in goal {
            self.domain
                .elements
                .check_ground_atom("goal", &lit.atom, &self.problem.objects)
                .map_err(|e| GroundingError::IllTypedGoal {
                    agent: agent.to_string(),
                    reason: e.to_string(),
                })?;
        }
        Ok(())
    }

    /// Sets (or replaces) the goal partition of `human_id`.
    pub fn add_goal(&mut self, human_id: &str, goal: &GoalCandidate) -> Result<(), GroundingError> {
        self.check_goal(human_id, &goal.goal)?;
        self.problem.goal.humans.insert(human_id.to_string(), goal.goal.clone());
        Ok(())
    }

    pub fn set_robot_goal(&mut self, robot_id: &str, goal: BTreeSet<Literal>) -> Result<(), GroundingError> {
        self.check_goal(robot_id, &goal)?;
        self.problem.goal.robot = robot_id.to_string();
        self.problem.goal.robot_goal = goal;
        Ok(())
    }

    pub fn extend_domain(&mut self, synthesis: &Synthesis) -> Result<(), GroundingError> {
        self.domain.elements.extend(&synthesis.predicates, &synthesis.actions)?;
        Ok(())
    }

    /// Validates and returns the final pair.
    pub fn finish(self) -> Result<(DomainSpec, ProblemSpec), GroundingError> {
        self.problem.validate(&self.domain)?;
        Ok((self.domain, self.problem))
    }
}

/// Items held by any agent of the scene.
pub fn held_items(scene: &SceneGraph) -> BTreeMap<&str, &str> {
    scene
        .agents
        .iter()
        .flat_map(|a| a.holding.iter().map(move |i| (i.as_str(), a.id.as_str())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::KnowledgeBase;

    const KB: &str = r#"{
        "domain": "household",
        "types": {"agent":"object","room":"object","item":"object","stove":"item","portable":"item","mug":"portable"},
        "predicates": [
            {"name":"at-agent","params":["?a - agent","?r - room"]},
            {"name":"at","params":["?i - item","?r - room"]},
            {"name":"holding","params":["?a - agent","?i - portable"]},
            {"name":"connected","params":["?a - room","?b - room"]},
            {"name":"accessible","params":["?i - item"]},
            {"name":"powered-off","params":["?i - item"]},
            {"name":"is-robot","params":["?a - agent"]},
            {"name":"is-human","params":["?a - agent"]},
            {"name":"robot-at","params":["?r - room"]},
            {"name":"human-active-in","params":["?r - room"]},
            {"name":"cooking","params":["?a - agent","?s - stove"]}
        ],
        "actions": [
            {"name":"cook","params":["?a - agent","?s - stove","?r - room"],
             "pre":["(is-human ?a)","(at-agent ?a ?r)","(at ?s ?r)"],
             "add":["(cooking ?a ?s)","(human-active-in ?r)"],"del":[]}
        ]
    }"#;

    fn domain() -> DomainSpec {
        DomainSpec::new("household", KnowledgeBase::from_json(KB).unwrap().structured.unwrap())
    }

    fn scene() -> SceneGraph {
        SceneGraph::from_json(
            r#"{"graph_id":"g","timestep":1,
            "floors":[{"id":"f"}],
            "rooms":[{"id":"kitchen","parent_floor":"f","neighbors":["hall"]},
                     {"id":"hall","parent_floor":"f","neighbors":["kitchen"]}],
            "items":[{"id":"stove","parent_room":"kitchen","category":"stove","states":{"powered":"off"}},
                     {"id":"mug","parent_room":"kitchen","category":"mug"},
                     {"id":"safe","parent_room":"hall","category":"safe","accessible":false}],
            "agents":[{"id":"r1","kind":"robot","parent_room":"hall"},
                      {"id":"h1","kind":"human","parent_room":"kitchen","holding":["mug"],"current_action":"cook"}],
            "edges":[{"source":"h1","target":"stove","relation":"using"}]}"#,
        )
        .unwrap()
    }

    fn atom(s: &str) -> Atom {
        s.parse().unwrap()
    }

    #[test]
    fn agents_rooms_and_items() {
        let sg = scene();
        let mut b = ProblemBuilder::new(domain(), "p");
        b.add_rooms(&sg.rooms).unwrap();
        b.add_agent(sg.agent("r1").unwrap()).unwrap();
        assert!(matches!(b.add_agent(sg.agent("r1").unwrap()), Err(GroundingError::DuplicateObject(id)) if id == "r1"));
        b.add_agent(sg.agent("h1").unwrap()).unwrap();
        let held = held_items(&sg);
        for item in &sg.items {
            b.set_init_state(item, held.contains_key(item.id.as_str())).unwrap();
        }
        let p = b.problem();
        assert_eq!(p.objects["r1"], "agent");
        assert_eq!(p.objects["stove"], "stove");
        assert_eq!(p.objects["mug"], "mug");
        assert_eq!(p.objects["safe"], "item");
        for a in [
            "(at-agent r1 hall)",
            "(is-robot r1)",
            "(robot-at hall)",
            "(is-human h1)",
            "(holding h1 mug)",
            "(at stove kitchen)",
            "(accessible stove)",
            "(powered-off stove)",
            "(connected kitchen hall)",
            "(connected hall kitchen)",
        ] {
            assert!(p.init.contains(&atom(a)), "missing {a}");
        }
        assert!(!p.init.contains(&atom("(accessible safe)")));
        assert!(!p.init.contains(&atom("(at mug kitchen)")));
        for c in p.init.iter().filter(|a| a.predicate == "connected") {
            assert!(p.init.contains(&Atom::new("connected", [&c.args[1], &c.args[0]])));
        }
    }

    #[test]
    fn current_activity_effects() {
        let sg = scene();
        let mut b = ProblemBuilder::new(domain(), "p");
        b.add_rooms(&sg.rooms).unwrap();
        let h1 = sg.agent("h1").unwrap();
        b.add_agent(h1).unwrap();
        b.apply_current_activity(h1, &sg).unwrap();
        assert!(b.problem().init.contains(&atom("(cooking h1 stove)")));
        assert!(b.problem().init.contains(&atom("(human-active-in kitchen)")));
    }

    #[test]
    fn unbound_activity() {
        let mut sg = scene();
        sg.edges.clear();
        let mut b = ProblemBuilder::new(domain(), "p");
        b.add_rooms(&sg.rooms).unwrap();
        let h1 = sg.agent("h1").unwrap().clone();
        b.add_agent(&h1).unwrap();
        assert!(matches!(b.apply_current_activity(&h1, &sg), Err(GroundingError::UnboundActivity { .. })));
    }

    #[test]
    fn item_errors() {
        let sg = scene();
        let mut b = ProblemBuilder::new(domain(), "p");
        assert!(matches!(b.set_init_state(&sg.items[1], false), Err(GroundingError::UnknownRoom { .. })));
        b.add_rooms(&sg.rooms).unwrap();
        let mut stove = sg.items[0].clone();
        stove.states.insert("door".into(), "open".into());
        match b.set_init_state(&stove, false) {
            Err(GroundingError::UndeclaredStatePredicate { predicate, .. }) => assert_eq!(predicate, "door-open"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(!b.problem().objects.contains_key("stove"));
    }

    #[test]
    fn goals_replace_and_type_check() {
        let sg = scene();
        let mut b = ProblemBuilder::new(domain(), "p");
        b.add_rooms(&sg.rooms).unwrap();
        for a in &sg.agents {
            b.add_agent(a).unwrap();
        }
        for i in &sg.items {
            b.set_init_state(i, false).unwrap();
        }
        let cand = |g: &str| GoalCandidate {
            human_id: "h1".into(),
            goal: [g.parse().unwrap()].into(),
            probability: 1.0,
            rationale: None,
            uncovered: false,
        };
        b.add_goal("h1", &cand("(cooking h1 stove)")).unwrap();
        b.add_goal("h1", &cand("(at-agent h1 hall)")).unwrap();
        assert_eq!(b.problem().goal.humans["h1"].len(), 1);
        assert!(matches!(b.add_goal("h1", &cand("(cooking h1)")), Err(GroundingError::IllTypedGoal { .. })));
        assert!(matches!(b.add_goal("h1", &cand("(cooking h1 mug)")), Err(GroundingError::IllTypedGoal { .. })));
        b.set_robot_goal("r1", ["(at mug hall)".parse().unwrap()].into()).unwrap();
        let (_, p) = b.finish().unwrap();
        assert_eq!(p.goal.partition_count(), 2);
    }

    #[test]
    fn rejects_non_pddl_identifiers() {
        let mut sg = scene();
        sg.rooms[0].id = "Kitchen".into();
        let mut b = ProblemBuilder::new(domain(), "p");
        assert!(matches!(b.add_rooms(&sg.rooms), Err(GroundingError::InvalidIdentifier(_))));
    }
}
