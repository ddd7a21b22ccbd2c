//! Instantiate a topology on the fabric.
//!
//! Managers get a directory actor (`<id>/dir`) plus the manager actor;
//! leaves get a node actor. Spawn order is breadth-first from the boot with
//! children in ascending id order, so startup traffic is deterministic.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::allocation::{AllocationPolicy, MostFree};
use crate::control::{ReactorRule, SensorSpec};
use crate::fabric::{ActorId, Fabric, FabricError};
use crate::gma::{AggregationSpec, DirectoryActor};
use crate::hierarchy::manager::{ManagerActor, ManagerConfig};
use crate::hierarchy::node::{NodeActor, NodeConfig};
use crate::hierarchy::topology::{HierarchyTopology, NodeRole, TopologyError};
use crate::membership::HeartbeatConfig;
use crate::protocol::Msg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyChoice {
    MostFree,
}

impl PolicyChoice {
    pub fn build(self) -> Box<dyn AllocationPolicy> {
        match self {
            PolicyChoice::MostFree => Box::new(MostFree),
        }
    }
}

/// Deployment-wide settings applied to every role.
#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub heartbeat: HeartbeatConfig,
    pub aggregation: AggregationSpec,
    pub sensor: SensorSpec,
    pub refresh_ms: u64,
    pub ttl_ms: u64,
    pub install_timeout_ms: u64,
    pub policy: PolicyChoice,
    pub rules: Vec<ReactorRule>,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            heartbeat: HeartbeatConfig::default(),
            aggregation: AggregationSpec::default(),
            sensor: SensorSpec::default(),
            // Registrations refresh every second and survive two lost ones.
            refresh_ms: 1000,
            ttl_ms: 3000,
            install_timeout_ms: 5000,
            policy: PolicyChoice::MostFree,
            rules: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error("invalid config: {0}")]
    Config(String),
}

/// Ids of everything spawned for one deployment.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub boot: ActorId,
    pub managers: Vec<ActorId>,
    pub leaves: Vec<ActorId>,
    pub directories: Vec<ActorId>,
}

pub fn dir_id(manager: &ActorId) -> ActorId {
    ActorId::new(format!("{manager}/dir"))
}

pub fn build(
    fabric: &mut Fabric<Msg>,
    topo: &HierarchyTopology,
    cfg: &BuildConfig,
) -> Result<Deployment, BuildError> {
    cfg.heartbeat.validate().map_err(BuildError::Config)?;
    cfg.aggregation.validate().map_err(BuildError::Config)?;
    cfg.sensor.validate().map_err(BuildError::Config)?;

    let depth = topo.depth();
    let mut deployment = Deployment {
        boot: topo.boot().id.clone(),
        managers: Vec::new(),
        leaves: Vec::new(),
        directories: Vec::new(),
    };

    // Breadth-first spawn from the root; children ascend by id.
    let mut frontier = vec![topo.boot().id.clone()];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for id in frontier {
            let spec = topo.spec(&id).expect("validated topology");
            let parent = spec.parent.clone();
            match spec.role {
                NodeRole::Boot | NodeRole::Mirror => {
                    let own_dir = dir_id(&id);
                    let parent_dir = parent.as_ref().map(dir_id);
                    fabric.spawn(
                        own_dir.clone(),
                        Box::new(DirectoryActor::new(parent_dir.clone())),
                    )?;
                    deployment.directories.push(own_dir.clone());

                    let children = topo.children(&id);
                    let leaf_children: Vec<ActorId> = children
                        .iter()
                        .filter(|c| c.role == NodeRole::Node)
                        .map(|c| c.id.clone())
                        .collect();
                    let manager_children: Vec<ActorId> = children
                        .iter()
                        .filter(|c| c.role.is_manager())
                        .map(|c| c.id.clone())
                        .collect();
                    let mut route = BTreeMap::new();
                    for child in &children {
                        for desc in topo.subtree(&child.id) {
                            route.insert(desc, child.id.clone());
                        }
                    }

                    let node_side = if spec.role == NodeRole::Mirror {
                        Some(NodeConfig {
                            id: id.clone(),
                            manager: parent.clone(),
                            registry: Some(own_dir.clone()),
                            capacity: spec.capacity.clone(),
                            heartbeat: cfg.heartbeat,
                            sensor: cfg.sensor.clone(),
                            refresh_ms: cfg.refresh_ms,
                            ttl_ms: cfg.ttl_ms,
                        })
                    } else {
                        None
                    };

                    let mcfg = ManagerConfig {
                        id: id.clone(),
                        role: spec.role,
                        parent: parent.clone(),
                        own_dir,
                        parent_dir,
                        leaf_children,
                        manager_children,
                        route,
                        heartbeat: cfg.heartbeat,
                        aggregation: cfg.aggregation.clone(),
                        metric: cfg.sensor.metric.clone(),
                        refresh_ms: cfg.refresh_ms,
                        ttl_ms: cfg.ttl_ms,
                        install_timeout_ms: cfg.install_timeout_ms,
                        max_hops: depth,
                        rules: cfg.rules.clone(),
                        emitted_level: topo.leaf_height(&id),
                        node_side,
                    };
                    fabric.spawn(
                        id.clone(),
                        Box::new(ManagerActor::new(mcfg, cfg.policy.build())),
                    )?;
                    deployment.managers.push(id.clone());
                }
                NodeRole::Node => {
                    let ncfg = NodeConfig {
                        id: id.clone(),
                        manager: parent.clone(),
                        registry: parent.as_ref().map(dir_id),
                        capacity: spec.capacity.clone(),
                        heartbeat: cfg.heartbeat,
                        sensor: cfg.sensor.clone(),
                        refresh_ms: cfg.refresh_ms,
                        ttl_ms: cfg.ttl_ms,
                    };
                    fabric.spawn(id.clone(), Box::new(NodeActor::new(ncfg)))?;
                    deployment.leaves.push(id.clone());
                }
            }
            for child in topo.children(&id) {
                next.push(child.id.clone());
            }
        }
        frontier = next;
    }
    Ok(deployment)
}
