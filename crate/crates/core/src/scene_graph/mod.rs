//! Layered scene graphs: floors contain rooms, rooms contain items and
//! agents, and semantic edges record relations observed at one timestep.

mod history;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use history::{build_history, InteractionHistory};

pub type NodeId = String;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("hierarchy error: {0}")]
    Hierarchy(Violation),
    #[error("scene graph has no robot agent")]
    MissingRobot,
    #[error("unknown human agent `{0}`")]
    UnknownAgent(String),
    #[error("empty snapshot sequence")]
    EmptySequence,
    #[error("inconsistent snapshot sequence: {0}")]
    Sequence(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorNode {
    pub id: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomNode {
    pub id: NodeId,
    pub parent_floor: NodeId,
    #[serde(default)]
    pub neighbors: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemNode {
    pub id: NodeId,
    pub parent_room: NodeId,
    pub category: String,
    #[serde(default = "default_true")]
    pub accessible: bool,
    #[serde(default)]
    pub states: BTreeMap<String, String>,
    #[serde(default)]
    pub affordable_actions: Vec<String>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Robot,
    Human,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentNode {
    pub id: NodeId,
    pub kind: AgentKind,
    pub parent_room: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_action: Option<String>,
    #[serde(default)]
    pub holding: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub relation: String,
    /// Filled from the enclosing snapshot when the document omits it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestep: Option<u32>,
}

impl SemanticEdge {
    pub fn new(source: &str, target: &str, relation: &str, timestep: u32) -> Self {
        SemanticEdge {
            source: source.into(),
            target: target.into(),
            relation: relation.into(),
            timestep: Some(timestep),
        }
    }

    pub fn other_end(&self, id: &str) -> Option<&str> {
        if self.source == id {
            Some(&self.target)
        } else if self.target == id {
            Some(&self.source)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneGraph {
    pub graph_id: String,
    pub timestep: u32,
    #[serde(default)]
    pub floors: Vec<FloorNode>,
    #[serde(default)]
    pub rooms: Vec<RoomNode>,
    #[serde(default)]
    pub items: Vec<ItemNode>,
    #[serde(default)]
    pub agents: Vec<AgentNode>,
    #[serde(default)]
    pub edges: Vec<SemanticEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rule {
    DuplicateId,
    DanglingFloor,
    DanglingRoom,
    SelfNeighbor,
    UnknownNeighbor,
    AsymmetricNeighbors,
    MissingRobot,
    MultipleRobots,
    UnknownHeldItem,
    HeldItemElsewhere,
    HeldTwice,
    DanglingEdge,
    EmptyRelation,
    EdgeTimestep,
    DuplicateState,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::DuplicateId => "duplicate id",
            Rule::DanglingFloor => "dangling parent floor",
            Rule::DanglingRoom => "dangling parent room",
            Rule::SelfNeighbor => "room lists itself as neighbor",
            Rule::UnknownNeighbor => "unknown neighbor",
            Rule::AsymmetricNeighbors => "asymmetric neighbors",
            Rule::MissingRobot => "missing robot",
            Rule::MultipleRobots => "multiple robots",
            Rule::UnknownHeldItem => "unknown held item",
            Rule::HeldItemElsewhere => "held item not in holder's room",
            Rule::HeldTwice => "item held by several agents",
            Rule::DanglingEdge => "dangling edge endpoint",
            Rule::EmptyRelation => "empty relation label",
            Rule::EdgeTimestep => "edge timestep differs from snapshot",
            Rule::DuplicateState => "duplicate state key",
        };
        f.write_str(s)
    }
}

/// One broken invariant, naming the rule and the offending ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    pub ids: Vec<String>,
}

impl Violation {
    fn new(rule: Rule, ids: &[&str]) -> Self {
        Violation {
            rule,
            ids: ids.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.ids.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Floor,
    Room,
    Item,
    Agent,
}

impl SceneGraph {
    /// Parses and validates a scene-graph document.
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let mut sg: SceneGraph =
            serde_json::from_str(text).map_err(|e| SceneError::Schema(e.to_string()))?;
        sg.normalize_edges();
        sg.validate()?;
        Ok(sg)
    }

    /// Validates an in-memory graph the same way the loader does.
    pub fn validate(&self) -> Result<(), SceneError> {
        let violations = validate_hierarchy(self);
        match violations.into_iter().next() {
            None => Ok(()),
            Some(v) if v.rule == Rule::MissingRobot => Err(SceneError::MissingRobot),
            Some(v) => Err(SceneError::Hierarchy(v)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene graph serializes")
    }

    fn normalize_edges(&mut self) {
        let t = self.timestep;
        for e in &mut self.edges {
            e.timestep.get_or_insert(t);
        }
    }

    pub fn node_kind(&self, id: &str) -> Option<NodeKind> {
        if self.floors.iter().any(|n| n.id == id) {
            Some(NodeKind::Floor)
        } else if self.rooms.iter().any(|n| n.id == id) {
            Some(NodeKind::Room)
        } else if self.items.iter().any(|n| n.id == id) {
            Some(NodeKind::Item)
        } else if self.agents.iter().any(|n| n.id == id) {
            Some(NodeKind::Agent)
        } else {
            None
        }
    }

    pub fn room(&self, id: &str) -> Option<&RoomNode> {
        self.rooms.iter().find(|r| r.id == id)
    }

    pub fn item(&self, id: &str) -> Option<&ItemNode> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn agent(&self, id: &str) -> Option<&AgentNode> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn get_robot_node(&self) -> Result<&AgentNode, SceneError> {
        self.agents
            .iter()
            .find(|a| a.kind == AgentKind::Robot)
            .ok_or(SceneError::MissingRobot)
    }

    /// Humans in id order.
    pub fn humans(&self) -> Vec<&AgentNode> {
        let mut hs: Vec<&AgentNode> = self
            .agents
            .iter()
            .filter(|a| a.kind == AgentKind::Human)
            .collect();
        hs.sort_by(|a, b| a.id.cmp(&b.id));
        hs
    }

    /// Edges incident to a human at this timestep and the item endpoints
    /// of those edges.
    pub fn get_edges_and_neighbors(
        &self,
        human_id: &str,
    ) -> Result<(Vec<SemanticEdge>, BTreeSet<NodeId>), SceneError> {
        match self.agent(human_id) {
            Some(a) if a.kind == AgentKind::Human => {}
            _ => return Err(SceneError::UnknownAgent(human_id.to_string())),
        }
        let mut edges = Vec::new();
        let mut items = BTreeSet::new();
        for e in &self.edges {
            if let Some(other) = e.other_end(human_id) {
                if self.item(other).is_some() {
                    items.insert(other.to_string());
                }
                edges.push(e.clone());
            }
        }
        Ok((edges, items))
    }

    /// The room an agent or item currently occupies.
    pub fn location_of(&self, id: &str) -> Option<&str> {
        if let Some(i) = self.item(id) {
            return Some(&i.parent_room);
        }
        self.agent(id).map(|a| a.parent_room.as_str())
    }

    fn node_ids(&self) -> BTreeMap<NodeKind, BTreeSet<&str>> {
        let mut m: BTreeMap<NodeKind, BTreeSet<&str>> = BTreeMap::new();
        m.entry(NodeKind::Floor)
            .or_default()
            .extend(self.floors.iter().map(|n| n.id.as_str()));
        m.entry(NodeKind::Room)
            .or_default()
            .extend(self.rooms.iter().map(|n| n.id.as_str()));
        m.entry(NodeKind::Item)
            .or_default()
            .extend(self.items.iter().map(|n| n.id.as_str()));
        m.entry(NodeKind::Agent)
            .or_default()
            .extend(self.agents.iter().map(|n| n.id.as_str()));
        m
    }
}

impl PartialOrd for NodeKind {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for NodeKind {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (*self as u8).cmp(&(*other as u8))
    }
}

/// Lists every broken scene-graph invariant. Empty iff the graph is valid.
pub fn validate_hierarchy(sg: &SceneGraph) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = BTreeSet::new();
    let ids = sg
        .floors
        .iter()
        .map(|n| &n.id)
        .chain(sg.rooms.iter().map(|n| &n.id))
        .chain(sg.items.iter().map(|n| &n.id))
        .chain(sg.agents.iter().map(|n| &n.id));
    for id in ids {
        if !seen.insert(id.as_str()) {
            out.push(Violation::new(Rule::DuplicateId, &[id]));
        }
    }

    let floors: BTreeSet<&str> = sg.floors.iter().map(|f| f.id.as_str()).collect();
    let rooms: BTreeMap<&str, &RoomNode> = sg.rooms.iter().map(|r| (r.id.as_str(), r)).collect();

    for r in &sg.rooms {
        if !floors.contains(r.parent_floor.as_str()) {
            out.push(Violation::new(Rule::DanglingFloor, &[&r.id, &r.parent_floor]));
        }
        for n in &r.neighbors {
            if n == &r.id {
                out.push(Violation::new(Rule::SelfNeighbor, &[&r.id]));
                continue;
            }
            match rooms.get(n.as_str()) {
                None => out.push(Violation::new(Rule::UnknownNeighbor, &[&r.id, n])),
                Some(other) if !other.neighbors.contains(&r.id) => {
                    out.push(Violation::new(Rule::AsymmetricNeighbors, &[&r.id, n]))
                }
                Some(_) => {}
            }
        }
    }

    for i in &sg.items {
        if !rooms.contains_key(i.parent_room.as_str()) {
            out.push(Violation::new(Rule::DanglingRoom, &[&i.id, &i.parent_room]));
        }
    }

    let robots: Vec<&AgentNode> = sg.agents.iter().filter(|a| a.kind == AgentKind::Robot).collect();
    match robots.len() {
        0 => out.push(Violation::new(Rule::MissingRobot, &[&sg.graph_id])),
        1 => {}
        _ => {
            let ids: Vec<&str> = robots.iter().map(|a| a.id.as_str()).collect();
            out.push(Violation::new(Rule::MultipleRobots, &ids));
        }
    }

    let mut holders: BTreeMap<&str, &str> = BTreeMap::new();
    for a in &sg.agents {
        if !rooms.contains_key(a.parent_room.as_str()) {
            out.push(Violation::new(Rule::DanglingRoom, &[&a.id, &a.parent_room]));
        }
        for held in &a.holding {
            match sg.item(held) {
                None => out.push(Violation::new(Rule::UnknownHeldItem, &[&a.id, held])),
                Some(item) if item.parent_room != a.parent_room => {
                    out.push(Violation::new(Rule::HeldItemElsewhere, &[&a.id, held]))
                }
                Some(_) => {}
            }
            if let Some(prev) = holders.insert(held, &a.id) {
                out.push(Violation::new(Rule::HeldTwice, &[held, prev, &a.id]));
            }
        }
    }

    for e in &sg.edges {
        for end in [&e.source, &e.target] {
            if !seen.contains(end.as_str()) {
                out.push(Violation::new(Rule::DanglingEdge, &[end, &e.relation]));
            }
        }
        if e.relation.trim().is_empty() {
            out.push(Violation::new(Rule::EmptyRelation, &[&e.source, &e.target]));
        }
        if e.timestep.is_some_and(|t| t != sg.timestep) {
            out.push(Violation::new(Rule::EdgeTimestep, &[&e.source, &e.target]));
        }
    }

    out
}

/// Time-indexed snapshots for t = 1..t_n.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SnapshotSequence {
    snapshots: Vec<SceneGraph>,
}

impl SnapshotSequence {
    pub fn new(snapshots: Vec<SceneGraph>) -> Result<Self, SceneError> {
        for sg in &snapshots {
            sg.validate()?;
        }
        if let Some(first) = snapshots.first() {
            let ids = first.node_ids();
            let robot = &first.get_robot_node()?.id;
            for (k, sg) in snapshots.iter().enumerate() {
                let expected = k as u32 + 1;
                if sg.timestep != expected {
                    return Err(SceneError::Sequence(format!(
                        "snapshot {k} has timestep {}, expected {expected}",
                        sg.timestep
                    )));
                }
                if sg.node_ids() != ids {
                    return Err(SceneError::Sequence(format!(
                        "node identifiers at t={} differ from t=1",
                        sg.timestep
                    )));
                }
                if &sg.get_robot_node()?.id != robot {
                    return Err(SceneError::Sequence(format!(
                        "robot id changes at t={}",
                        sg.timestep
                    )));
                }
                for a in &sg.agents {
                    if first.agent(&a.id).map(|f| f.kind) != Some(a.kind) {
                        return Err(SceneError::Sequence(format!(
                            "agent `{}` changes kind at t={}",
                            a.id, sg.timestep
                        )));
                    }
                }
            }
        }
        Ok(SnapshotSequence { snapshots })
    }

    /// Accepts either a single scene-graph document or an array of them.
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| SceneError::Schema(e.to_string()))?;
        let docs = match value {
            serde_json::Value::Array(items) => items,
            other => vec![other],
        };
        let mut snapshots = Vec::with_capacity(docs.len());
        for d in docs {
            let mut sg: SceneGraph =
                serde_json::from_value(d).map_err(|e| SceneError::Schema(e.to_string()))?;
            sg.normalize_edges();
            snapshots.push(sg);
        }
        SnapshotSequence::new(snapshots)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.snapshots).expect("snapshots serialize")
    }

    pub fn snapshots(&self) -> &[SceneGraph] {
        &self.snapshots
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    /// The planning frame, snapshot t_n.
    pub fn latest(&self) -> Result<&SceneGraph, SceneError> {
        self.snapshots.last().ok_or(SceneError::EmptySequence)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{"graph_id":"m","timestep":1,
            "floors":[{"id":"f1"}],
            "rooms":[{"id":"kitchen","parent_floor":"f1"}],
            "agents":[{"id":"r1","kind":"robot","parent_room":"kitchen"}]}"#
    }

    fn two_humans() -> SceneGraph {
        SceneGraph::from_json(
            r#"{"graph_id":"g","timestep":1,
            "floors":[{"id":"f1"}],
            "rooms":[{"id":"kitchen","parent_floor":"f1","neighbors":["hall"]},
                     {"id":"hall","parent_floor":"f1","neighbors":["kitchen"]}],
            "items":[{"id":"stove","parent_room":"kitchen","category":"stove"},
                     {"id":"pan","parent_room":"kitchen","category":"pan"}],
            "agents":[{"id":"r1","kind":"robot","parent_room":"kitchen"},
                      {"id":"h1","kind":"human","parent_room":"kitchen","holding":["pan"]},
                      {"id":"h2","kind":"human","parent_room":"hall"}],
            "edges":[{"source":"h1","target":"stove","relation":"using"},
                     {"source":"h1","target":"pan","relation":"holding"}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn minimal_document_loads() {
        let sg = SceneGraph::from_json(minimal()).unwrap();
        assert!(sg.items.is_empty() && sg.edges.is_empty());
        assert_eq!(sg.get_robot_node().unwrap().parent_room, "kitchen");
    }

    #[test]
    fn unknown_top_level_key_rejected() {
        let doc = minimal().replacen("\"graph_id\"", "\"cameras\":[],\"graph_id\"", 1);
        assert!(matches!(SceneGraph::from_json(&doc), Err(SceneError::Schema(_))));
    }

    #[test]
    fn dangling_floor_names_offending_id() {
        let doc = minimal().replace("\"parent_floor\":\"f1\"", "\"parent_floor\":\"f9\"");
        match SceneGraph::from_json(&doc) {
            Err(SceneError::Hierarchy(v)) => {
                assert_eq!(v.rule, Rule::DanglingFloor);
                assert_eq!(v.ids, vec!["kitchen", "f9"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_robot() {
        let doc = minimal().replace("robot", "human");
        assert!(matches!(SceneGraph::from_json(&doc), Err(SceneError::MissingRobot)));
        let mut sg = SceneGraph::from_json(minimal()).unwrap();
        sg.agents.clear();
        assert!(matches!(sg.get_robot_node(), Err(SceneError::MissingRobot)));
    }

    #[test]
    fn robot_lookup_filters_kind() {
        let sg = two_humans();
        assert_eq!(sg.get_robot_node().unwrap().id, "r1");
    }

    #[test]
    fn asymmetric_adjacency_reported() {
        let mut sg = two_humans();
        sg.rooms[1].neighbors.clear();
        let v = validate_hierarchy(&sg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "asymmetric neighbors: kitchen, hall");
    }

    #[test]
    fn duplicate_item_id_is_one_violation() {
        let mut sg = two_humans();
        let dup = sg.items[0].clone();
        sg.items.push(dup);
        let v = validate_hierarchy(&sg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::DuplicateId);
    }

    #[test]
    fn edges_and_neighbors() {
        let sg = two_humans();
        let (edges, items) = sg.get_edges_and_neighbors("h1").unwrap();
        assert_eq!(edges.len(), 2);
        assert_eq!(items, ["pan", "stove"].map(String::from).into());
        let (edges, items) = sg.get_edges_and_neighbors("h2").unwrap();
        assert!(edges.is_empty() && items.is_empty());
        assert!(matches!(sg.get_edges_and_neighbors("r1"), Err(SceneError::UnknownAgent(_))));
    }

    #[test]
    fn edge_timestep_filled_from_snapshot() {
        let sg = two_humans();
        assert!(sg.edges.iter().all(|e| e.timestep == Some(1)));
    }

    #[test]
    fn held_item_must_share_room() {
        let mut sg = two_humans();
        sg.agents[1].parent_room = "hall".into();
        let rules: Vec<Rule> = validate_hierarchy(&sg).into_iter().map(|v| v.rule).collect();
        assert_eq!(rules, vec![Rule::HeldItemElsewhere]);
    }

    #[test]
    fn sequence_requires_consecutive_timesteps() {
        let a = two_humans();
        let mut b = a.clone();
        b.timestep = 3;
        for e in &mut b.edges {
            e.timestep = Some(3);
        }
        assert!(matches!(SnapshotSequence::new(vec![a.clone(), b]), Err(SceneError::Sequence(_))));
        let mut c = a.clone();
        c.timestep = 2;
        c.edges.clear();
        c.agents.pop();
        assert!(matches!(SnapshotSequence::new(vec![a, c]), Err(SceneError::Sequence(_))));
    }

    #[test]
    fn round_trip() {
        let sg = two_humans();
        assert_eq!(SceneGraph::from_json(&sg.to_json()).unwrap(), sg);
    }
}
