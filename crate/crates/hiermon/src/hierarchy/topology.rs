//! The boot/mirror/node tree and its static wiring queries.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fabric::ActorId;
use crate::protocol::Capacity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Boot,
    Mirror,
    Node,
}

impl NodeRole {
    pub fn is_manager(self) -> bool {
        matches!(self, NodeRole::Boot | NodeRole::Mirror)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeRole::Boot => "boot",
            NodeRole::Mirror => "mirror",
            NodeRole::Node => "node",
        }
    }
}

#[derive(Debug, Clone)]
pub struct NodeSpec {
    pub id: ActorId,
    pub role: NodeRole,
    pub parent: Option<ActorId>,
    pub capacity: Capacity,
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("duplicate node id {0}")]
    DuplicateId(ActorId),
    #[error("expected exactly one boot, found {0}")]
    BootCount(usize),
    #[error("boot {0} must not have a parent")]
    BootWithParent(ActorId),
    #[error("node {0} has no parent")]
    MissingParent(ActorId),
    #[error("node {0} references unknown parent {1}")]
    UnknownParent(ActorId, ActorId),
    #[error("node {0} has leaf-role parent {1}")]
    LeafParent(ActorId, ActorId),
    #[error("cycle detected at {0}")]
    Cycle(ActorId),
    #[error("node id {0} contains whitespace or '/'")]
    BadId(ActorId),
}

/// Validated management tree: one boot root, mirrors under it to any depth,
/// leaves at the bottom.
#[derive(Debug, Clone)]
pub struct HierarchyTopology {
    nodes: Vec<NodeSpec>,
    index: BTreeMap<ActorId, usize>,
}

impl HierarchyTopology {
    pub fn new(nodes: Vec<NodeSpec>) -> Result<HierarchyTopology, TopologyError> {
        let mut index = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if n.id.as_str().contains(char::is_whitespace) || n.id.as_str().contains('/') {
                return Err(TopologyError::BadId(n.id.clone()));
            }
            if index.insert(n.id.clone(), i).is_some() {
                return Err(TopologyError::DuplicateId(n.id.clone()));
            }
        }
        let topo = HierarchyTopology { nodes, index };

        let boots: Vec<&NodeSpec> = topo
            .nodes
            .iter()
            .filter(|n| n.role == NodeRole::Boot)
            .collect();
        if boots.len() != 1 {
            return Err(TopologyError::BootCount(boots.len()));
        }
        let boot = boots[0];
        if boot.parent.is_some() {
            return Err(TopologyError::BootWithParent(boot.id.clone()));
        }

        for n in &topo.nodes {
            if n.role == NodeRole::Boot {
                continue;
            }
            let parent = n
                .parent
                .as_ref()
                .ok_or_else(|| TopologyError::MissingParent(n.id.clone()))?;
            let p = topo
                .spec(parent)
                .ok_or_else(|| TopologyError::UnknownParent(n.id.clone(), parent.clone()))?;
            if !p.role.is_manager() {
                return Err(TopologyError::LeafParent(n.id.clone(), parent.clone()));
            }
        }

        // Walking parents must reach the boot without revisiting anyone;
        // with a unique parentless root this also proves connectivity.
        for n in &topo.nodes {
            let mut seen = BTreeSet::new();
            let mut cur = n;
            while let Some(parent) = &cur.parent {
                if !seen.insert(cur.id.clone()) {
                    return Err(TopologyError::Cycle(cur.id.clone()));
                }
                cur = topo.spec(parent).expect("validated above");
            }
            if cur.role != NodeRole::Boot {
                return Err(TopologyError::Cycle(n.id.clone()));
            }
        }
        Ok(topo)
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn spec(&self, id: &ActorId) -> Option<&NodeSpec> {
        self.index.get(id).map(|i| &self.nodes[*i])
    }

    pub fn boot(&self) -> &NodeSpec {
        self.nodes
            .iter()
            .find(|n| n.role == NodeRole::Boot)
            .expect("validated")
    }

    /// Direct children in ascending id order.
    pub fn children(&self, id: &ActorId) -> Vec<&NodeSpec> {
        let mut out: Vec<&NodeSpec> = self
            .nodes
            .iter()
            .filter(|n| n.parent.as_ref() == Some(id))
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    /// Every node in the subtree rooted at `id`, including `id`.
    pub fn subtree(&self, id: &ActorId) -> BTreeSet<ActorId> {
        let mut out = BTreeSet::new();
        let mut stack = vec![id.clone()];
        while let Some(cur) = stack.pop() {
            if out.insert(cur.clone()) {
                for c in self.children(&cur) {
                    stack.push(c.id.clone());
                }
            }
        }
        out
    }

    /// Next hop from `manager` toward `target`, when target lies strictly
    /// below it.
    pub fn route(&self, manager: &ActorId, target: &ActorId) -> Option<ActorId> {
        for child in self.children(manager) {
            if self.subtree(&child.id).contains(target) {
                return Some(child.id.clone());
            }
        }
        None
    }

    /// Edges from the root down to the deepest node.
    pub fn depth(&self) -> u32 {
        self.nodes
            .iter()
            .map(|n| {
                let mut d = 0;
                let mut cur = n;
                while let Some(p) = &cur.parent {
                    d += 1;
                    cur = self.spec(p).expect("validated");
                }
                d
            })
            .max()
            .unwrap_or(0)
    }

    /// Longest downward path to a leaf; the level its summaries carry.
    pub fn leaf_height(&self, id: &ActorId) -> u32 {
        self.children(id)
            .iter()
            .map(|c| self.leaf_height(&c.id) + 1)
            .max()
            .unwrap_or(0)
    }
}
