//! Scenario files: topology, configs, faults, rules, workload, assertions.
//!
//! One TOML document describes one experiment. Missing sections fall back
//! to defaults (10 ms links, 1000/3000/1000 heartbeating, 5000 ms windows).
//! Validation collects every violation instead of stopping at the first.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ReactorRule, SensorSpec};
use crate::descriptor::{self, DeploymentDescriptor};
use crate::fabric::{ActorId, DeterministicRng, FaultSpec, SimTime};
use crate::gma::{AggFunction, AggregationSpec, GroupBy};
use crate::hierarchy::{BuildConfig, HierarchyTopology, NodeRole, NodeSpec, PolicyChoice};
use crate::membership::HeartbeatConfig;
use crate::protocol::{AppId, Capacity, Domain};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("cannot parse {0}: {1}")]
    Toml(PathBuf, Box<toml::de::Error>),
    #[error("invalid scenario:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    scenario: MetaSection,
    #[serde(default)]
    fabric: FabricSection,
    #[serde(default)]
    heartbeat: HeartbeatSection,
    #[serde(default)]
    monitoring: MonitoringSection,
    #[serde(default)]
    allocation: AllocationSection,
    #[serde(default)]
    descriptor: Option<DescriptorSection>,
    #[serde(default)]
    topology: Vec<TopologyEntry>,
    #[serde(default)]
    rules: Vec<ReactorRule>,
    #[serde(default)]
    workload: Vec<WorkloadCommand>,
    #[serde(default)]
    workload_random: Option<RandomWorkload>,
    #[serde(default)]
    faults: Vec<FaultEntry>,
    #[serde(default)]
    assertions: Vec<AssertionSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaSection {
    name: String,
    duration_ms: u64,
    #[serde(default = "default_seed")]
    seed: u64,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FabricSection {
    #[serde(default = "default_latency")]
    pub default_latency_ms: u64,
    #[serde(default)]
    pub default_drop_rate: f64,
    #[serde(default)]
    pub links: Vec<LinkOverride>,
}

fn default_latency() -> u64 {
    10
}

impl Default for FabricSection {
    fn default() -> Self {
        FabricSection {
            default_latency_ms: 10,
            default_drop_rate: 0.0,
            links: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LinkOverride {
    pub from: ActorId,
    pub to: ActorId,
    #[serde(default = "default_latency")]
    pub latency_ms: u64,
    #[serde(default)]
    pub drop_rate: f64,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct HeartbeatSection {
    period_ms: Option<u64>,
    failure_timeout_ms: Option<u64>,
    sweep_interval_ms: Option<u64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MonitoringSection {
    window_ms: Option<u64>,
    functions: Option<Vec<AggFunction>>,
    group_by: Option<GroupBy>,
    metric: Option<String>,
    sensor_period_ms: Option<u64>,
    noise_amplitude: Option<f64>,
    refresh_ms: Option<u64>,
    ttl_ms: Option<u64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct AllocationSection {
    install_timeout_ms: Option<u64>,
    policy: Option<PolicyChoice>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DescriptorSection {
    path: String,
    #[serde(default = "default_command")]
    command: String,
    #[serde(default)]
    bindings: BTreeMap<String, String>,
}

fn default_command() -> String {
    "jadeNode".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyEntry {
    id: ActorId,
    role: NodeRole,
    #[serde(default)]
    parent: Option<ActorId>,
    #[serde(default)]
    capacity: Capacity,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadCommand {
    pub at_ms: u64,
    pub op: WorkloadOp,
    pub app: AppId,
    #[serde(default)]
    pub demand: Capacity,
    pub via: ActorId,
    #[serde(default)]
    pub params: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadOp {
    Deploy,
    Release,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomWorkload {
    pub count: usize,
    pub start_ms: u64,
    pub end_ms: u64,
    pub via: Vec<ActorId>,
    #[serde(default = "default_demand_min")]
    pub demand_min: u64,
    #[serde(default = "default_demand_max")]
    pub demand_max: u64,
}

fn default_demand_min() -> u64 {
    1
}

fn default_demand_max() -> u64 {
    2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FaultEntry {
    Crash { actor: ActorId, at_ms: u64 },
    Restart { actor: ActorId, at_ms: u64 },
    DropRate { from: ActorId, to: ActorId, rate: f64 },
    Partition {
        group_a: Vec<ActorId>,
        group_b: Vec<ActorId>,
        from_ms: u64,
        until_ms: u64,
    },
}

impl FaultEntry {
    pub fn to_fault(&self) -> FaultSpec {
        match self {
            FaultEntry::Crash { actor, at_ms } => FaultSpec::Crash {
                actor: actor.clone(),
                at: SimTime::from_millis(*at_ms),
            },
            FaultEntry::Restart { actor, at_ms } => FaultSpec::Restart {
                actor: actor.clone(),
                at: SimTime::from_millis(*at_ms),
            },
            FaultEntry::DropRate { from, to, rate } => FaultSpec::DropRate {
                from: from.clone(),
                to: to.clone(),
                rate: *rate,
            },
            FaultEntry::Partition {
                group_a,
                group_b,
                from_ms,
                until_ms,
            } => FaultSpec::Partition {
                group_a: group_a.clone(),
                group_b: group_b.clone(),
                from: SimTime::from_millis(*from_ms),
                until: SimTime::from_millis(*until_ms),
            },
        }
    }
}

/// Post-run checks embedded in the scenario; the process exit code reflects
/// their outcome.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AssertionSpec {
    /// Compare a report counter against a constant.
    Counter { name: String, op: CmpOp, value: u64 },
    /// Every complete (non-bootstrap) window delivers exactly `expect`
    /// summaries to the manager.
    AggregatesPerWindow { manager: ActorId, expect: usize },
    /// No non-note traffic tagged with the domain touches the actor.
    NoDomainAt { actor: ActorId, domain: Domain },
    /// The app ends running on an available node, placed exactly once.
    AppRunning { app: AppId },
    /// The app's terminal outcome was a denial with this reason.
    AppDenied { app: AppId, reason: String },
    /// The node-failed event lands in `(after_ms, after_ms + within_ms]`.
    NodeFailedWithin {
        node: ActorId,
        after_ms: u64,
        within_ms: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CmpOp {
    Eq,
    Le,
    Ge,
}

/// A parsed, validated scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub duration_ms: u64,
    pub seed: u64,
    pub fabric: FabricSection,
    pub build: BuildConfig,
    pub topology: HierarchyTopology,
    pub descriptor: Option<(DeploymentDescriptor, String, BTreeMap<String, String>)>,
    pub workload: Vec<WorkloadCommand>,
    pub workload_random: Option<RandomWorkload>,
    pub faults: Vec<FaultEntry>,
    pub assertions: Vec<AssertionSpec>,
}

impl Scenario {
    /// Load from a file; `extra_bindings` (CLI `-D`) override the
    /// scenario's own descriptor bindings.
    pub fn load(
        path: &Path,
        extra_bindings: &BTreeMap<String, String>,
    ) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io(path.to_path_buf(), e))?;
        let raw: RawScenario = toml::from_str(&text)
            .map_err(|e| ScenarioError::Toml(path.to_path_buf(), Box::new(e)))?;
        let base_dir = path.parent().unwrap_or(Path::new("."));
        Scenario::from_raw(raw, base_dir, extra_bindings)
    }

    pub fn parse_str(
        text: &str,
        base_dir: &Path,
        extra_bindings: &BTreeMap<String, String>,
    ) -> Result<Scenario, ScenarioError> {
        let raw: RawScenario = toml::from_str(text)
            .map_err(|e| ScenarioError::Toml(base_dir.to_path_buf(), Box::new(e)))?;
        Scenario::from_raw(raw, base_dir, extra_bindings)
    }

    fn from_raw(
        raw: RawScenario,
        base_dir: &Path,
        extra_bindings: &BTreeMap<String, String>,
    ) -> Result<Scenario, ScenarioError> {
        let mut errors = Vec::new();

        let hb_default = HeartbeatConfig::default();
        let heartbeat = HeartbeatConfig {
            period_ms: raw.heartbeat.period_ms.unwrap_or(hb_default.period_ms),
            failure_timeout_ms: raw
                .heartbeat
                .failure_timeout_ms
                .unwrap_or(hb_default.failure_timeout_ms),
            sweep_interval_ms: raw
                .heartbeat
                .sweep_interval_ms
                .unwrap_or(hb_default.sweep_interval_ms),
        };
        if let Err(e) = heartbeat.validate() {
            errors.push(format!("heartbeat: {e}"));
        }

        let agg_default = AggregationSpec::default();
        let aggregation = AggregationSpec {
            window_ms: raw.monitoring.window_ms.unwrap_or(agg_default.window_ms),
            functions: raw
                .monitoring
                .functions
                .map(|v| v.into_iter().collect())
                .unwrap_or(agg_default.functions),
            group_by: raw.monitoring.group_by.unwrap_or(agg_default.group_by),
        };
        if let Err(e) = aggregation.validate() {
            errors.push(format!("monitoring: {e}"));
        }

        let sensor = SensorSpec {
            metric: raw.monitoring.metric.unwrap_or_else(|| "cpu".to_string()),
            period_ms: raw.monitoring.sensor_period_ms.unwrap_or(1000),
            noise_amplitude: raw.monitoring.noise_amplitude.unwrap_or(0.0),
        };
        if let Err(e) = sensor.validate() {
            errors.push(format!("monitoring: {e}"));
        }

        let build = BuildConfig {
            heartbeat,
            aggregation,
            sensor,
            refresh_ms: raw.monitoring.refresh_ms.unwrap_or(1000),
            ttl_ms: raw.monitoring.ttl_ms.unwrap_or(3000),
            install_timeout_ms: raw.allocation.install_timeout_ms.unwrap_or(5000),
            policy: raw.allocation.policy.unwrap_or(PolicyChoice::MostFree),
            rules: raw.rules,
        };
        if build.refresh_ms == 0 || build.ttl_ms == 0 {
            errors.push("monitoring: refresh_ms and ttl_ms must be positive".into());
        }

        let specs: Vec<NodeSpec> = raw
            .topology
            .iter()
            .map(|e| NodeSpec {
                id: e.id.clone(),
                role: e.role,
                parent: e.parent.clone(),
                capacity: e.capacity.clone(),
            })
            .collect();
        let topology = match HierarchyTopology::new(specs) {
            Ok(t) => Some(t),
            Err(e) => {
                errors.push(format!("topology: {e}"));
                None
            }
        };

        let duration = raw.scenario.duration_ms;
        if duration == 0 {
            errors.push("scenario: duration_ms must be positive".into());
        }

        let known = |id: &ActorId| -> bool {
            topology
                .as_ref()
                .map(|t| t.spec(id).is_some())
                .unwrap_or(true)
        };
        let manager = |id: &ActorId| -> bool {
            topology
                .as_ref()
                .and_then(|t| t.spec(id))
                .map(|s| s.role.is_manager())
                .unwrap_or(false)
        };

        for (i, f) in raw.faults.iter().enumerate() {
            match f {
                FaultEntry::Crash { actor, at_ms } | FaultEntry::Restart { actor, at_ms } => {
                    if !known(actor) {
                        errors.push(format!("faults[{i}]: unknown actor {actor}"));
                    }
                    if *at_ms > duration {
                        errors.push(format!("faults[{i}]: at_ms {at_ms} past duration"));
                    }
                }
                FaultEntry::DropRate { from, to, rate } => {
                    if !known(from) || !known(to) {
                        errors.push(format!("faults[{i}]: unknown link {from}->{to}"));
                    }
                    if !(0.0..=1.0).contains(rate) {
                        errors.push(format!("faults[{i}]: rate {rate} outside [0,1]"));
                    }
                }
                FaultEntry::Partition {
                    group_a,
                    group_b,
                    from_ms,
                    until_ms,
                } => {
                    if group_a.is_empty() || group_b.is_empty() {
                        errors.push(format!("faults[{i}]: empty partition group"));
                    }
                    if from_ms >= until_ms {
                        errors.push(format!("faults[{i}]: from_ms must precede until_ms"));
                    }
                    if *from_ms > duration {
                        errors.push(format!("faults[{i}]: from_ms {from_ms} past duration"));
                    }
                }
            }
        }

        if !(0.0..=1.0).contains(&raw.fabric.default_drop_rate) {
            errors.push("fabric: default_drop_rate outside [0,1]".into());
        }
        for (i, l) in raw.fabric.links.iter().enumerate() {
            if !(0.0..=1.0).contains(&l.drop_rate) {
                errors.push(format!("fabric.links[{i}]: drop_rate outside [0,1]"));
            }
        }

        for (i, w) in raw.workload.iter().enumerate() {
            if w.at_ms > duration {
                errors.push(format!("workload[{i}]: at_ms {} past duration", w.at_ms));
            }
            if !manager(&w.via) {
                errors.push(format!("workload[{i}]: via {} is not a manager", w.via));
            }
            if w.op == WorkloadOp::Deploy && w.demand.is_empty() {
                errors.push(format!("workload[{i}]: deploy needs a demand"));
            }
        }

        if let Some(rw) = &raw.workload_random {
            if rw.count == 0 {
                errors.push("workload_random: count must be positive".into());
            }
            if rw.start_ms >= rw.end_ms || rw.end_ms > duration {
                errors.push("workload_random: need start_ms < end_ms <= duration".into());
            }
            if rw.demand_min == 0 || rw.demand_min > rw.demand_max {
                errors.push("workload_random: need 0 < demand_min <= demand_max".into());
            }
            if rw.via.is_empty() {
                errors.push("workload_random: via list is empty".into());
            }
            for v in &rw.via {
                if !manager(v) {
                    errors.push(format!("workload_random: via {v} is not a manager"));
                }
            }
        }

        for (i, a) in raw.assertions.iter().enumerate() {
            match a {
                AssertionSpec::AggregatesPerWindow { manager: m, .. } => {
                    if !manager(m) {
                        errors.push(format!("assertions[{i}]: {m} is not a manager"));
                    }
                }
                AssertionSpec::NoDomainAt { actor, .. } => {
                    if !known(actor) {
                        errors.push(format!("assertions[{i}]: unknown actor {actor}"));
                    }
                }
                AssertionSpec::NodeFailedWithin { node, .. }
                    if !known(node) => {
                        errors.push(format!("assertions[{i}]: unknown node {node}"));
                    }
                _ => {}
            }
        }

        // The descriptor, when present, must acquire exactly the topology's
        // hosts.
        let descriptor = match raw.descriptor {
            None => None,
            Some(d) => {
                let dpath = base_dir.join(&d.path);
                match std::fs::read_to_string(&dpath) {
                    Err(e) => {
                        errors.push(format!("descriptor: cannot read {}: {e}", dpath.display()));
                        None
                    }
                    Ok(text) => match descriptor::parse(&text) {
                        Err(e) => {
                            errors.push(format!("descriptor: {e}"));
                            None
                        }
                        Ok(desc) => {
                            let mut bindings = d.bindings.clone();
                            for (k, v) in extra_bindings {
                                bindings.insert(k.clone(), v.clone());
                            }
                            match descriptor::resolve(&desc, &bindings, &d.command) {
                                Err(e) => {
                                    errors.push(format!("descriptor: {e}"));
                                    None
                                }
                                Ok(plan) => {
                                    if let Some(t) = &topology {
                                        let mut targets: Vec<String> =
                                            plan.all_targets().cloned().collect();
                                        targets.sort();
                                        let mut ids: Vec<String> = t
                                            .nodes()
                                            .iter()
                                            .map(|n| n.id.as_str().to_string())
                                            .collect();
                                        ids.sort();
                                        if targets != ids {
                                            errors.push(format!(
                                                "descriptor: resolved targets [{}] do not match topology nodes [{}]",
                                                targets.join(" "),
                                                ids.join(" ")
                                            ));
                                        }
                                    }
                                    Some((desc, d.command.clone(), bindings))
                                }
                            }
                        }
                    },
                }
            }
        };

        if !errors.is_empty() {
            return Err(ScenarioError::Invalid(errors));
        }
        Ok(Scenario {
            name: raw.scenario.name,
            duration_ms: duration,
            seed: raw.scenario.seed,
            fabric: raw.fabric,
            build,
            topology: topology.expect("no errors"),
            descriptor,
            workload: raw.workload,
            workload_random: raw.workload_random,
            faults: raw.faults,
            assertions: raw.assertions,
        })
    }

    /// Explicit workload plus the seed-expanded random workload, ordered by
    /// time (stable for equal times).
    pub fn expand_workload(&self, seed: u64) -> Vec<WorkloadCommand> {
        let mut commands = self.workload.clone();
        if let Some(rw) = &self.workload_random {
            let mut rng = DeterministicRng::new(seed).fork(0x776f_726b);
            let span = rw.end_ms - rw.start_ms;
            let mut times: Vec<u64> = (0..rw.count)
                .map(|_| rw.start_ms + rng.next_below(span))
                .collect();
            times.sort_unstable();
            let mut live: Vec<(AppId, u64)> = Vec::new(); // app, last touch
            let mut next_app = 0u32;
            for at in times {
                let release_eligible: Vec<usize> = live
                    .iter()
                    .enumerate()
                    .filter(|(_, (_, touched))| touched + 500 <= at)
                    .map(|(i, _)| i)
                    .collect();
                let do_release = !release_eligible.is_empty() && rng.next_below(5) < 2;
                if do_release {
                    let pick = release_eligible
                        [rng.next_below(release_eligible.len() as u64) as usize];
                    let (app, _) = live.remove(pick);
                    let via = rw.via[rng.next_below(rw.via.len() as u64) as usize].clone();
                    commands.push(WorkloadCommand {
                        at_ms: at,
                        op: WorkloadOp::Release,
                        app,
                        demand: Capacity::new(),
                        via,
                        params: Vec::new(),
                    });
                } else {
                    let app = AppId::new(format!("rw-{next_app}"));
                    next_app += 1;
                    let units =
                        rw.demand_min + rng.next_below(rw.demand_max - rw.demand_min + 1);
                    let via = rw.via[rng.next_below(rw.via.len() as u64) as usize].clone();
                    live.push((app.clone(), at));
                    commands.push(WorkloadCommand {
                        at_ms: at,
                        op: WorkloadOp::Deploy,
                        app,
                        demand: Capacity::of("cpu", units),
                        via,
                        params: Vec::new(),
                    });
                }
            }
        }
        commands.sort_by_key(|c| c.at_ms);
        commands
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Trigger;

    fn minimal_toml() -> String {
        r#"
[scenario]
name = "mini"
duration_ms = 10000

[[topology]]
id = "boot"
role = "boot"

[[topology]]
id = "n1"
role = "node"
parent = "boot"
capacity = { cpu = 4 }
"#
        .to_string()
    }

    fn parse_ok(text: &str) -> Scenario {
        Scenario::parse_str(text, Path::new("."), &BTreeMap::new()).unwrap()
    }

    #[test]
    fn minimal_scenario_defaults() {
        let sc = parse_ok(&minimal_toml());
        assert_eq!(sc.name, "mini");
        assert_eq!(sc.seed, 42);
        assert_eq!(sc.build.heartbeat.period_ms, 1000);
        assert_eq!(sc.build.aggregation.window_ms, 5000);
        assert_eq!(sc.fabric.default_latency_ms, 10);
    }

    #[test]
    fn all_violations_reported_at_once() {
        let text = r#"
[scenario]
name = "bad"
duration_ms = 10000

[heartbeat]
period_ms = 1000
failure_timeout_ms = 500

[[topology]]
id = "boot"
role = "boot"

[[faults]]
kind = "crash"
actor = "ghost"
at_ms = 99999

[[workload]]
at_ms = 50
op = "deploy"
app = "a"
via = "nobody"
demand = { cpu = 1 }
"#;
        let err = Scenario::parse_str(text, Path::new("."), &BTreeMap::new()).unwrap_err();
        match err {
            ScenarioError::Invalid(list) => {
                assert!(list.len() >= 4, "{list:?}");
                assert!(list.iter().any(|e| e.contains("failure_timeout")));
                assert!(list.iter().any(|e| e.contains("unknown actor ghost")));
                assert!(list.iter().any(|e| e.contains("past duration")));
                assert!(list.iter().any(|e| e.contains("not a manager")));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rules_and_faults_parse() {
        let text = r#"
[scenario]
name = "rules"
duration_ms = 30000

[[topology]]
id = "boot"
role = "boot"

[[topology]]
id = "n1"
role = "node"
parent = "boot"
capacity = { cpu = 4 }

[[rules]]
domain = "repair"
trigger = { kind = "node-failure" }
response = { kind = "replace-node" }

[[rules]]
domain = "optimization"
trigger = { kind = "metric-above", property = "cpu_mean", threshold = 0.9, consecutive = 2 }
response = { kind = "rebalance-smallest" }

[[faults]]
kind = "crash"
actor = "n1"
at_ms = 5000

[[faults]]
kind = "partition"
group_a = ["n1"]
group_b = ["boot"]
from_ms = 1000
until_ms = 2000
"#;
        let sc = parse_ok(text);
        assert_eq!(sc.build.rules.len(), 2);
        assert!(matches!(sc.build.rules[0].trigger, Trigger::NodeFailure));
        assert_eq!(sc.faults.len(), 2);
    }

    #[test]
    fn random_workload_expansion_is_deterministic_per_seed() {
        let text = r#"
[scenario]
name = "rand"
duration_ms = 60000

[[topology]]
id = "boot"
role = "boot"

[[topology]]
id = "n1"
role = "node"
parent = "boot"
capacity = { cpu = 8 }

[workload_random]
count = 50
start_ms = 1000
end_ms = 50000
via = ["boot"]
demand_min = 1
demand_max = 2
"#;
        let sc = parse_ok(text);
        let a = sc.expand_workload(7);
        let b = sc.expand_workload(7);
        let c = sc.expand_workload(8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 50);
        assert!(a.windows(2).all(|w| w[0].at_ms <= w[1].at_ms));
        assert!(a.iter().all(|w| w.at_ms >= 1000 && w.at_ms < 50000));
        // Releases only target apps deployed earlier.
        let mut seen = std::collections::BTreeSet::new();
        for cmd in &a {
            match cmd.op {
                WorkloadOp::Deploy => {
                    seen.insert(cmd.app.clone());
                }
                WorkloadOp::Release => assert!(seen.contains(&cmd.app)),
            }
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut text = minimal_toml();
        text.push_str("\n[scenario2]\nx = 1\n");
        assert!(Scenario::parse_str(&text, Path::new("."), &BTreeMap::new()).is_err());
    }
}
