//! Node layouts: random-waypoint swarms and hand-placed test topologies.

use crate::phys::Position;
use crate::wire::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedNode {
    pub position: Position,
    pub energy: f64,
    /// Straight-line leg (waypoint, speed in m/s); `None` keeps the node static.
    pub leg: Option<(Position, f64)>,
}

impl ScriptedNode {
    pub fn fixed(x: f64, y: f64, energy: f64) -> Self {
        Self { position: Position::new(x, y), energy, leg: None }
    }

    pub fn moving(x: f64, y: f64, energy: f64, to: (f64, f64), speed: f64) -> Self {
        Self { position: Position::new(x, y), energy, leg: Some((Position::new(to.0, to.1), speed)) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedLayout {
    pub nodes: Vec<ScriptedNode>,
    pub destination: NodeId,
    pub sources: Vec<NodeId>,
    /// Hard failures: (node, time) at which the battery is emptied.
    pub failures: Vec<(NodeId, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Layout {
    /// Node 0 is the static destination at the configured position; nodes
    /// 1..node_count fly random waypoints and nodes 1..=source_count send.
    #[default]
    Random,
    Scripted(ScriptedLayout),
}
