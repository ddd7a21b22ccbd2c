//! Message vocabulary shared by all management actors.
//!
//! Payload summaries double as the trace wire text: they are stable
//! `verb key=value ...` lines that the `verify` oracles re-parse, so the
//! formats here are part of the exported trace contract (see
//! `docs/formats.md`).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::allocation::{AllocationOutcome, AllocationRequest, RecordState};
use crate::fabric::{ActorId, Payload};
use crate::gma::{MetricEvent, RegKind, Registration};

/// Application component identifier.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct AppId(String);

impl AppId {
    pub fn new(s: impl Into<String>) -> AppId {
        AppId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Producer/consumer endpoint: `<actor>/<tag>`, e.g. `n1/sensor`, `m1/rep`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EndpointId(String);

impl EndpointId {
    pub fn new(actor: &ActorId, tag: &str) -> EndpointId {
        EndpointId(format!("{actor}/{tag}"))
    }

    pub fn parse(s: &str) -> EndpointId {
        EndpointId(s.to_string())
    }

    /// The actor messages for this endpoint are routed to.
    pub fn actor(&self) -> ActorId {
        match self.0.split_once('/') {
            Some((actor, _)) => ActorId::new(actor),
            None => ActorId::new(self.0.clone()),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EndpointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Monitoring/control domain a message or action belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Workload-driven deployment traffic.
    Deploy,
    Repair,
    Optimization,
    /// State maintenance (placement sync); belongs to no control loop.
    System,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Deploy => "deploy",
            Domain::Repair => "repair",
            Domain::Optimization => "optimization",
            Domain::System => "system",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Resource units per named dimension (`cpu` by default).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Capacity(BTreeMap<String, u64>);

impl Capacity {
    pub fn new() -> Capacity {
        Capacity::default()
    }

    pub fn of(dim: &str, units: u64) -> Capacity {
        let mut m = BTreeMap::new();
        m.insert(dim.to_string(), units);
        Capacity(m)
    }

    pub fn get(&self, dim: &str) -> u64 {
        self.0.get(dim).copied().unwrap_or(0)
    }

    pub fn set(&mut self, dim: &str, units: u64) {
        self.0.insert(dim.to_string(), units);
    }

    pub fn dims(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty() || self.0.values().all(|v| *v == 0)
    }

    /// True when every demanded dimension fits within `self`.
    pub fn fits(&self, demand: &Capacity) -> bool {
        demand.dims().all(|(dim, units)| self.get(dim) >= units)
    }

    pub fn add(&mut self, other: &Capacity) {
        for (dim, units) in other.dims() {
            let e = self.0.entry(dim.to_string()).or_insert(0);
            *e += units;
        }
    }

    pub fn sub_saturating(&mut self, other: &Capacity) {
        for (dim, units) in other.dims() {
            let e = self.0.entry(dim.to_string()).or_insert(0);
            *e = e.saturating_sub(units);
        }
        // Zero entries and absent entries are the same capacity.
        self.0.retain(|_, v| *v > 0);
    }

    /// Remaining units per dimension after subtracting `used`.
    pub fn minus(&self, used: &Capacity) -> Capacity {
        let mut out = self.clone();
        out.sub_saturating(used);
        out
    }

    /// Total units across the given dimensions; the most-free policy score.
    pub fn units_over(&self, dims: &Capacity) -> u64 {
        dims.dims().map(|(dim, _)| self.get(dim)).sum()
    }

    /// Render as `[cpu=4,mem=8]`, dimensions sorted by name.
    pub fn render(&self) -> String {
        let inner: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("[{}]", inner.join(","))
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Everything that flows between management actors.
#[derive(Debug, Clone)]
pub enum Msg {
    // -- membership --
    Heartbeat { node: ActorId, capacity: Capacity },
    SetManager { manager: ActorId },
    StopNode,

    // -- self timers --
    HeartbeatTick,
    SweepTick,
    SensorTick,
    WindowTick,
    DiscoveryTick,
    InstallTimeout { app: AppId },

    // -- monitoring (directory / producers / consumers) --
    Register(Registration),
    Lookup { wanted: Vec<String>, reply_to: ActorId },
    LookupReply { endpoints: Vec<EndpointId> },
    Subscribe { producer: EndpointId, subscriber: ActorId },
    Publish { producer: EndpointId, event: MetricEvent },
    QueryLatest { producer: EndpointId, reply_to: ActorId },
    QueryReply {
        producer: EndpointId,
        event: Option<MetricEvent>,
    },

    // -- allocation / deployment --
    AllocRequest(AllocationRequest),
    AllocOutcome {
        app: AppId,
        outcome: AllocationOutcome,
        domain: Domain,
    },
    Consult(AllocationRequest),
    ConsultReply {
        app: AppId,
        granted: Option<ActorId>,
        domain: Domain,
    },
    Install {
        app: AppId,
        demand: Capacity,
        params: Vec<(String, String)>,
        domain: Domain,
    },
    InstallAck { app: AppId },
    Uninstall { app: AppId, domain: Domain },
    RepairFailed { app: AppId, reason: String },

    // -- control --
    TuneParam {
        name: String,
        value: f64,
        domain: Domain,
    },
    TuneAck { name: String, value: f64 },
    PlacementSync {
        app: AppId,
        node: ActorId,
        state: RecordState,
    },

    // -- workload commands injected by the scenario runner --
    DeployCmd {
        app: AppId,
        demand: Capacity,
        params: Vec<(String, String)>,
        via_domain: Domain,
    },
    ReleaseCmd { app: AppId },
}

fn join_names(names: &[String]) -> String {
    names.join(",")
}

impl Payload for Msg {
    fn summary(&self) -> String {
        match self {
            Msg::Heartbeat { node, capacity } => {
                format!("hb node={node} cap={capacity}")
            }
            Msg::SetManager { manager } => format!("set-manager manager={manager}"),
            Msg::StopNode => "stop-node".into(),
            Msg::HeartbeatTick => "hb-tick".into(),
            Msg::SweepTick => "sweep-tick".into(),
            Msg::SensorTick => "sensor-tick".into(),
            Msg::WindowTick => "window-tick".into(),
            Msg::DiscoveryTick => "discovery-tick".into(),
            Msg::InstallTimeout { app } => format!("install-timeout app={app}"),
            Msg::Register(reg) => format!(
                "register subject={} kind={} names={} ttl={}",
                reg.subject,
                match reg.kind {
                    RegKind::Producer => "producer",
                    RegKind::Consumer => "consumer",
                },
                join_names(&reg.names),
                reg.ttl_ms,
            ),
            Msg::Lookup { wanted, reply_to } => {
                format!("lookup wanted={} reply={reply_to}", join_names(wanted))
            }
            Msg::LookupReply { endpoints } => {
                let eps: Vec<String> = endpoints.iter().map(|e| e.to_string()).collect();
                format!("lookup-reply endpoints={}", eps.join(","))
            }
            Msg::Subscribe {
                producer,
                subscriber,
            } => format!("subscribe producer={producer} subscriber={subscriber}"),
            Msg::Publish { producer, event } => {
                format!("publish producer={producer} {}", event.render())
            }
            Msg::QueryLatest { producer, reply_to } => {
                format!("query producer={producer} reply={reply_to}")
            }
            Msg::QueryReply { producer, event } => match event {
                Some(ev) => format!("query-reply producer={producer} {}", ev.render()),
                None => format!("query-reply producer={producer} none"),
            },
            Msg::AllocRequest(req) => format!("alloc-request {}", req.render()),
            Msg::AllocOutcome {
                app,
                outcome,
                domain,
            } => format!("alloc-outcome app={app} outcome={outcome} domain={domain}"),
            Msg::Consult(req) => format!("consult {}", req.render()),
            Msg::ConsultReply {
                app,
                granted,
                domain,
            } => {
                let node = granted
                    .as_ref()
                    .map(|n| n.to_string())
                    .unwrap_or_else(|| "-".into());
                format!("consult-reply app={app} node={node} domain={domain}")
            }
            Msg::Install {
                app,
                demand,
                domain,
                ..
            } => format!("install app={app} demand={demand} domain={domain}"),
            Msg::InstallAck { app } => format!("install-ack app={app}"),
            Msg::Uninstall { app, domain } => {
                format!("uninstall app={app} domain={domain}")
            }
            Msg::RepairFailed { app, reason } => {
                format!("repair-failed app={app} reason={reason} domain=repair")
            }
            Msg::TuneParam {
                name,
                value,
                domain,
            } => format!("tune name={name} value={value} domain={domain}"),
            Msg::TuneAck { name, value } => format!("tune-ack name={name} value={value}"),
            Msg::PlacementSync { app, node, state } => {
                format!("placement-sync app={app} node={node} state={state} domain=system")
            }
            Msg::DeployCmd {
                app,
                demand,
                via_domain,
                ..
            } => format!("deploy-cmd app={app} demand={demand} domain={via_domain}"),
            Msg::ReleaseCmd { app } => format!("release-cmd app={app}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_fits_and_arithmetic() {
        let total = Capacity::of("cpu", 4);
        let demand = Capacity::of("cpu", 3);
        assert!(total.fits(&demand));
        assert!(!Capacity::of("cpu", 2).fits(&demand));
        let free = total.minus(&demand);
        assert_eq!(free.get("cpu"), 1);
        let mut back = free;
        back.add(&demand);
        assert_eq!(back, total);
    }

    #[test]
    fn capacity_multi_dimensional() {
        let mut total = Capacity::of("cpu", 4);
        total.set("mem", 8);
        let mut demand = Capacity::of("cpu", 2);
        demand.set("mem", 9);
        assert!(!total.fits(&demand));
        demand.set("mem", 8);
        assert!(total.fits(&demand));
        assert_eq!(total.render(), "[cpu=4,mem=8]");
    }

    #[test]
    fn endpoint_routing() {
        let ep = EndpointId::new(&ActorId::new("m1"), "rep");
        assert_eq!(ep.as_str(), "m1/rep");
        assert_eq!(ep.actor(), ActorId::new("m1"));
    }
}
