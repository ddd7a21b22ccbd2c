//! Boot/mirror/node role composition over the fabric.

mod build;
pub mod manager;
pub mod node;
mod system_rep;
mod topology;

pub use build::{build, dir_id, BuildConfig, BuildError, Deployment, PolicyChoice};
pub use manager::{ManagerActor, ManagerConfig};
pub use node::{NodeActor, NodeConfig, NodeRuntime};
pub use system_rep::{PlacementEntry, SystemRepresentation};
pub use topology::{HierarchyTopology, NodeRole, NodeSpec, TopologyError};

use crate::fabric::{ActorId, Fabric};
use crate::protocol::Msg;

/// Current view of a manager's deployed components; a mirror's snapshot
/// covers only its own subtree.
pub fn snapshot(fabric: &Fabric<Msg>, manager: &ActorId) -> Option<SystemRepresentation> {
    fabric
        .actor_state::<ManagerActor>(manager)
        .map(|m| m.sysrep.snapshot())
}
