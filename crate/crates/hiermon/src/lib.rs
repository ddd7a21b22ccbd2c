//! Hierarchical autonomic management over a deterministic simulated network.
//!
//! The crate builds a boot/mirror/node management tree on top of a
//! discrete-event fabric: leaf nodes emit heartbeats and CPU readings,
//! managers detect failures, summarize monitoring data upward one window at
//! a time, allocate and deploy application components (escalating requests
//! when a subtree is full), and run repair/optimization control loops.
//! Scenario files drive whole experiments; every run is reproducible from
//! its seed and exports a structured trace that independent oracles can
//! re-check.

pub mod allocation;
pub mod control;
pub mod descriptor;
pub mod fabric;
pub mod gma;
pub mod hierarchy;
pub mod membership;
pub mod protocol;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod sweep;
pub mod verify;

pub use fabric::{ActorId, DeterministicRng, EventTrace, Fabric, FaultSpec, SimTime};
pub use protocol::{AppId, Capacity, Domain, EndpointId, Msg};
