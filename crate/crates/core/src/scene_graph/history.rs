use serde::{Deserialize, Serialize};

use super::{NodeId, SceneError, SemanticEdge, SnapshotSequence};

/// Everything a human was observed doing over t = 1..t_n: the incident
/// edges and the items at their other ends, per timestep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionHistory {
    pub human_id: NodeId,
    /// Timestep of the latest snapshot, t_n.
    pub horizon: u32,
    pub edge_events: Vec<(u32, SemanticEdge)>,
    pub item_events: Vec<(u32, NodeId)>,
}

impl InteractionHistory {
    pub fn is_empty(&self) -> bool {
        self.edge_events.is_empty() && self.item_events.is_empty()
    }
}

pub fn build_history(seq: &SnapshotSequence, human_id: &str) -> Result<InteractionHistory, SceneError> {
    let latest = seq.latest()?;
    let mut history = InteractionHistory {
        human_id: human_id.to_string(),
        horizon: latest.timestep,
        edge_events: Vec::new(),
        item_events: Vec::new(),
    };
    for sg in seq.snapshots() {
        let (edges, items) = sg.get_edges_and_neighbors(human_id)?;
        history
            .edge_events
            .extend(edges.into_iter().map(|e| (sg.timestep, e)));
        history
            .item_events
            .extend(items.into_iter().map(|i| (sg.timestep, i)));
    }
    Ok(history)
}
