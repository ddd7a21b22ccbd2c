//! Node discovery and heartbeat bookkeeping for one manager.
//!
//! Nodes announce themselves by heartbeating; the manager keeps one
//! [`NodeRecord`] per node as soft state. A periodic sweep marks nodes whose
//! last heartbeat is older than the failure timeout as failed. Each failure
//! episode is reported exactly once; a heartbeat from a failed node brings it
//! back and reports a recovery.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fabric::{ActorId, SimTime};
use crate::protocol::Capacity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeStatus {
    Available,
    /// Reserved; the detector currently moves nodes straight to `Failed`.
    Suspected,
    Failed,
}

impl NodeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeStatus::Available => "available",
            NodeStatus::Suspected => "suspected",
            NodeStatus::Failed => "failed",
        }
    }
}

/// Per-node soft state held by a manager.
#[derive(Debug, Clone)]
pub struct NodeRecord {
    pub node: ActorId,
    pub last_heartbeat: SimTime,
    pub status: NodeStatus,
    /// Total capacity as piggybacked on the node's heartbeats.
    pub capacity: Capacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeartbeatConfig {
    pub period_ms: u64,
    pub failure_timeout_ms: u64,
    pub sweep_interval_ms: u64,
}

impl Default for HeartbeatConfig {
    fn default() -> Self {
        // Timeout at 3x the period tolerates two consecutive lost beats.
        HeartbeatConfig {
            period_ms: 1000,
            failure_timeout_ms: 3000,
            sweep_interval_ms: 1000,
        }
    }
}

impl HeartbeatConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.period_ms == 0 {
            return Err("heartbeat period must be positive".into());
        }
        if self.failure_timeout_ms <= self.period_ms {
            return Err(format!(
                "failure_timeout ({}) must exceed heartbeat period ({})",
                self.failure_timeout_ms, self.period_ms
            ));
        }
        if self.sweep_interval_ms == 0 || self.sweep_interval_ms > self.failure_timeout_ms {
            return Err(format!(
                "sweep_interval ({}) must be in 1..=failure_timeout ({})",
                self.sweep_interval_ms, self.failure_timeout_ms
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LifecycleEvent {
    Available(ActorId),
    Failed(ActorId),
    Recovered(ActorId),
}

impl LifecycleEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            LifecycleEvent::Available(_) => "node-available",
            LifecycleEvent::Failed(_) => "node-failed",
            LifecycleEvent::Recovered(_) => "node-recovered",
        }
    }

    pub fn node(&self) -> &ActorId {
        match self {
            LifecycleEvent::Available(n)
            | LifecycleEvent::Failed(n)
            | LifecycleEvent::Recovered(n) => n,
        }
    }
}

/// The dynamic list of nodes known to one manager.
#[derive(Debug, Default)]
pub struct MembershipTable {
    records: BTreeMap<ActorId, NodeRecord>,
}

impl MembershipTable {
    pub fn new() -> MembershipTable {
        MembershipTable::default()
    }

    /// Apply one heartbeat delivered at `at`. Any heartbeat resets the
    /// failure clock to its delivery time.
    pub fn record_heartbeat(
        &mut self,
        node: &ActorId,
        at: SimTime,
        capacity: &Capacity,
    ) -> Option<LifecycleEvent> {
        match self.records.get_mut(node) {
            None => {
                self.records.insert(
                    node.clone(),
                    NodeRecord {
                        node: node.clone(),
                        last_heartbeat: at,
                        status: NodeStatus::Available,
                        capacity: capacity.clone(),
                    },
                );
                Some(LifecycleEvent::Available(node.clone()))
            }
            Some(rec) => {
                rec.last_heartbeat = at;
                rec.capacity = capacity.clone();
                match rec.status {
                    NodeStatus::Available => None,
                    NodeStatus::Suspected | NodeStatus::Failed => {
                        rec.status = NodeStatus::Available;
                        Some(LifecycleEvent::Recovered(node.clone()))
                    }
                }
            }
        }
    }

    /// Mark overdue nodes failed; returns the newly failed nodes only.
    pub fn sweep(&mut self, now: SimTime, timeout_ms: u64) -> Vec<ActorId> {
        let mut newly_failed = Vec::new();
        for rec in self.records.values_mut() {
            if rec.status == NodeStatus::Available
                && now.saturating_sub(rec.last_heartbeat) > timeout_ms
            {
                rec.status = NodeStatus::Failed;
                newly_failed.push(rec.node.clone());
            }
        }
        newly_failed
    }

    pub fn status(&self, node: &ActorId) -> Option<NodeStatus> {
        self.records.get(node).map(|r| r.status)
    }

    pub fn record(&self, node: &ActorId) -> Option<&NodeRecord> {
        self.records.get(node)
    }

    pub fn available_nodes(&self) -> impl Iterator<Item = &NodeRecord> {
        self.records
            .values()
            .filter(|r| r.status == NodeStatus::Available)
    }

    pub fn all(&self) -> impl Iterator<Item = &NodeRecord> {
        self.records.values()
    }

    /// Drop a node from the table entirely (administrative stop).
    pub fn forget(&mut self, node: &ActorId) -> bool {
        self.records.remove(node).is_some()
    }
}
