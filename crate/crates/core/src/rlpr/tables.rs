//! Per-node RLPR state tables.

use crate::phys::Position;
use crate::wire::{DiscoveryKey, NodeId, RlrqMessage};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborRecord {
    pub id: NodeId,
    pub position: Position,
    pub speed: f64,
    pub energy: f64,
    pub last_heard: f64,
}

#[derive(Debug, Clone, Default)]
pub struct NeighborTable {
    entries: BTreeMap<NodeId, NeighborRecord>,
}

impl NeighborTable {
    pub fn upsert(&mut self, rec: NeighborRecord) {
        self.entries.insert(rec.id, rec);
    }

    pub fn get(&self, id: NodeId) -> Option<&NeighborRecord> {
        self.entries.get(&id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.keys().copied()
    }

    /// Drops entries not heard from within `horizon` seconds of `now` and
    /// returns their ids in ascending order.
    pub fn purge_stale(&mut self, now: f64, horizon: f64) -> Vec<NodeId> {
        let stale: Vec<NodeId> = self
            .entries
            .values()
            .filter(|r| now - r.last_heard > horizon)
            .map(|r| r.id)
            .collect();
        for id in &stale {
            self.entries.remove(id);
        }
        stale
    }

    pub fn remove(&mut self, id: NodeId) -> Option<NeighborRecord> {
        self.entries.remove(&id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrontRelativeTable {
    members: BTreeSet<NodeId>,
}

impl FrontRelativeTable {
    pub fn set(&mut self, id: NodeId, member: bool) {
        if member {
            self.members.insert(id);
        } else {
            self.members.remove(&id);
        }
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.members.contains(&id)
    }

    pub fn snapshot(&self) -> Vec<NodeId> {
        self.members.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_subset_of(&self, neighbors: &NeighborTable) -> bool {
        self.members.iter().all(|id| neighbors.contains(*id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardEntry {
    pub next_hop: NodeId,
    /// Discovery that installed this entry; its reverse entry leads back to the source.
    pub key: DiscoveryKey,
}

#[derive(Debug, Clone, Default)]
pub struct RouteTables {
    /// Per discovery: the hop the request arrived from.
    pub reverse: BTreeMap<DiscoveryKey, NodeId>,
    /// Per destination: where to send data next.
    pub forward: BTreeMap<NodeId, ForwardEntry>,
}

impl RouteTables {
    pub fn next_hop(&self, dest: NodeId) -> Option<NodeId> {
        self.forward.get(&dest).map(|e| e.next_hop)
    }

    /// Removes every forward entry whose next hop is `via`; returns the
    /// affected (destination, entry) pairs.
    pub fn invalidate_via(&mut self, via: NodeId) -> Vec<(NodeId, ForwardEntry)> {
        let hit: Vec<(NodeId, ForwardEntry)> =
            self.forward.iter().filter(|(_, e)| e.next_hop == via).map(|(d, e)| (*d, *e)).collect();
        for (d, _) in &hit {
            self.forward.remove(d);
        }
        hit
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContentionTimer {
    pub fire_time: f64,
    pub key: DiscoveryKey,
    pub cached: RlrqMessage,
    pub token: u64,
}
