//! Scenario execution: build the deployment, inject faults and workload,
//! run to the horizon, and distill the trace into a report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fabric::{ActorId, Fabric, LinkConfig, SimTime, TraceKind, TraceRecord};
use crate::hierarchy::{build, BuildError, ManagerActor};
use crate::membership::NodeStatus;
use crate::protocol::Msg;
use crate::report::{AssertionResult, ManagerReport, RecordReport, RunReport, WindowReport};
use crate::scenario::{AssertionSpec, CmpOp, Scenario, ScenarioError, WorkloadOp};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Fabric(#[from] crate::fabric::FabricError),
    #[error("cannot write {0}: {1}")]
    Output(PathBuf, std::io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub duration_ms: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub bindings: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub trace_text: String,
    pub report: RunReport,
}

/// Load a scenario file and run it, optionally writing the output tree
/// `out/<scenario>/<seed>/{trace.log,report.json,metrics.log}`.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunOutcome, RunnerError> {
    let scenario = Scenario::load(path, &opts.bindings)?;
    let outcome = run_scenario(&scenario, opts)?;
    if let Some(out_dir) = &opts.out_dir {
        write_outputs(out_dir, &scenario.name, &outcome)?;
    }
    Ok(outcome)
}

pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutcome, RunnerError> {
    let seed = opts.seed.unwrap_or(scenario.seed);
    let duration = opts.duration_ms.unwrap_or(scenario.duration_ms);
    let mut fabric: Fabric<Msg> = Fabric::with_link(
        seed,
        LinkConfig {
            latency_ms: scenario.fabric.default_latency_ms,
            drop_rate: scenario.fabric.default_drop_rate,
        },
    );
    for link in &scenario.fabric.links {
        fabric.set_link(
            &link.from,
            &link.to,
            LinkConfig {
                latency_ms: link.latency_ms,
                drop_rate: link.drop_rate,
            },
        );
    }

    emit_config_notes(&mut fabric, scenario, seed, duration);
    build(&mut fabric, &scenario.topology, &scenario.build)?;
    for fault in &scenario.faults {
        fabric.inject_fault(fault.to_fault())?;
    }
    for cmd in scenario.expand_workload(seed) {
        let msg = match cmd.op {
            WorkloadOp::Deploy => Msg::DeployCmd {
                app: cmd.app.clone(),
                demand: cmd.demand.clone(),
                params: cmd.params.clone(),
                via_domain: crate::protocol::Domain::Deploy,
            },
            WorkloadOp::Release => Msg::ReleaseCmd {
                app: cmd.app.clone(),
            },
        };
        fabric.inject(SimTime::from_millis(cmd.at_ms), "cli", &cmd.via, msg);
    }

    fabric.run_until(SimTime::from_millis(duration));

    let trace_text = fabric.trace().to_text();
    let mut report = build_report(&fabric, scenario, seed, duration);
    report.assertions = scenario
        .assertions
        .iter()
        .map(|spec| eval_assertion(spec, scenario, duration, &fabric, &report))
        .collect();
    Ok(RunOutcome {
        seed,
        trace_text,
        report,
    })
}

fn emit_config_notes(fabric: &mut Fabric<Msg>, scenario: &Scenario, seed: u64, duration: u64) {
    fabric.note(
        "run",
        format!(
            "config-run scenario={} seed={seed} duration={duration} latency={} drop={}",
            scenario.name, scenario.fabric.default_latency_ms, scenario.fabric.default_drop_rate
        ),
    );
    let hb = &scenario.build.heartbeat;
    fabric.note(
        "run",
        format!(
            "config-hb period={} timeout={} sweep={}",
            hb.period_ms, hb.failure_timeout_ms, hb.sweep_interval_ms
        ),
    );
    let domains: Vec<&str> = {
        let mut set: Vec<&str> = scenario
            .build
            .rules
            .iter()
            .map(|r| r.domain.as_str())
            .collect();
        set.sort_unstable();
        set.dedup();
        set
    };
    fabric.note(
        "run",
        format!(
            "config-rules domains={}",
            if domains.is_empty() {
                "-".to_string()
            } else {
                domains.join(",")
            }
        ),
    );
    fabric.note(
        "run",
        format!(
            "config-alloc install_timeout={} policy=most-free",
            scenario.build.install_timeout_ms
        ),
    );
    let agg = &scenario.build.aggregation;
    let functions: Vec<&str> = agg.functions.iter().map(|f| f.name()).collect();
    let group_by = match agg.group_by {
        crate::gma::GroupBy::Source => "source",
        crate::gma::GroupBy::Property => "property",
    };
    for node in scenario.topology.nodes() {
        if node.role.is_manager() {
            fabric.note(
                "run",
                format!(
                    "config-monitor manager={} window={} functions={} group_by={group_by} metric={}",
                    node.id,
                    agg.window_ms,
                    functions.join(","),
                    scenario.build.sensor.metric
                ),
            );
        }
    }
}

pub(crate) fn payload_field<'a>(payload: &'a str, key: &str) -> Option<&'a str> {
    payload
        .split(' ')
        .filter_map(|tok| tok.split_once('='))
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v)
}

fn build_report(fabric: &Fabric<Msg>, scenario: &Scenario, seed: u64, duration: u64) -> RunReport {
    let mut counters: BTreeMap<String, u64> = BTreeMap::new();
    let mut deploy_outcomes: BTreeMap<String, String> = BTreeMap::new();
    let bump = |counters: &mut BTreeMap<String, u64>, key: String| {
        *counters.entry(key).or_insert(0) += 1;
    };

    let managers: Vec<&ActorId> = scenario
        .topology
        .nodes()
        .iter()
        .filter(|n| n.role.is_manager())
        .map(|n| &n.id)
        .collect();

    for r in fabric.trace().records() {
        match r.kind {
            TraceKind::Deliver => {
                bump(&mut counters, "deliver.total".into());
                if r.payload.starts_with("publish ")
                    && managers.iter().any(|m| m.as_str() == r.to) {
                        let level = payload_field(&r.payload, "level").unwrap_or("?");
                        bump(&mut counters, format!("publish.deliver.{}", r.to));
                        bump(
                            &mut counters,
                            format!("publish.deliver.{}.level{level}", r.to),
                        );
                    }
            }
            TraceKind::Timer => bump(&mut counters, "timer.total".into()),
            TraceKind::Drop => {
                bump(&mut counters, format!("drop.{}", r.reason));
            }
            TraceKind::Crash => bump(&mut counters, "fault.crash".into()),
            TraceKind::Restart => bump(&mut counters, "fault.restart".into()),
            TraceKind::Note => {
                if let Some(event) = r.payload.strip_prefix("lifecycle event=") {
                    let kind = event.split(' ').next().unwrap_or("?");
                    bump(&mut counters, format!("lifecycle.{kind}"));
                } else if r.payload.starts_with("alloc event=") {
                    let ev = payload_field(&r.payload, "event").unwrap_or("?");
                    bump(&mut counters, format!("alloc.{ev}"));
                } else if r.payload.starts_with("record ") {
                    let state = payload_field(&r.payload, "state").unwrap_or("?");
                    bump(&mut counters, format!("record.{state}"));
                } else if r.payload.starts_with("action kind=") {
                    let kind = payload_field(&r.payload, "kind").unwrap_or("?");
                    bump(&mut counters, format!("action.{kind}"));
                } else if r.payload.starts_with("deploy-outcome ") {
                    if payload_field(&r.payload, "domain") == Some("deploy") {
                        if let (Some(app), Some(outcome)) = (
                            payload_field(&r.payload, "app"),
                            payload_field(&r.payload, "outcome"),
                        ) {
                            deploy_outcomes.insert(app.to_string(), outcome.to_string());
                        }
                    }
                } else if r.payload.starts_with("install-timeout ") {
                    bump(&mut counters, "install.timeout".into());
                } else if r.payload.starts_with("repair-exhausted ") {
                    bump(&mut counters, "repair.exhausted".into());
                }
            }
        }
    }

    let mut manager_reports = BTreeMap::new();
    for id in managers {
        let Some(state) = fabric.actor_state::<ManagerActor>(id) else {
            continue;
        };
        let windows = state
            .monitor
            .history
            .iter()
            .map(|w| {
                let mut properties = BTreeMap::new();
                for ev in &w.emitted {
                    for (name, value) in ev.properties() {
                        let key = match state.cfg.aggregation.group_by {
                            crate::gma::GroupBy::Property => name.clone(),
                            crate::gma::GroupBy::Source => format!("{}:{name}", ev.source),
                        };
                        properties.insert(key, *value);
                    }
                }
                WindowReport {
                    close_ms: w.close.millis(),
                    inputs: w.inputs,
                    properties,
                }
            })
            .collect();
        let records = state
            .alloc
            .records()
            .map(|rec| {
                (
                    rec.app.to_string(),
                    RecordReport {
                        node: rec.node.to_string(),
                        state: rec.state.to_string(),
                        demand: rec.demand.dims().map(|(d, u)| (d.to_string(), u)).collect(),
                    },
                )
            })
            .collect();
        let placements = state
            .sysrep
            .placements()
            .iter()
            .map(|(app, entry)| (app.to_string(), entry.node.to_string()))
            .collect();
        let nodes = state
            .membership
            .all()
            .map(|r| (r.node.to_string(), r.status.as_str().to_string()))
            .collect();
        manager_reports.insert(
            id.to_string(),
            ManagerReport {
                windows,
                records,
                placements,
                nodes,
            },
        );
    }

    RunReport {
        scenario: scenario.name.clone(),
        seed,
        duration_ms: duration,
        counters,
        managers: manager_reports,
        deploy_outcomes,
        assertions: Vec::new(),
    }
}

fn eval_assertion(
    spec: &AssertionSpec,
    scenario: &Scenario,
    duration: u64,
    fabric: &Fabric<Msg>,
    report: &RunReport,
) -> AssertionResult {
    let records = fabric.trace().records();
    match spec {
        AssertionSpec::Counter { name, op, value } => {
            let actual = report.counter(name);
            let passed = match op {
                CmpOp::Eq => actual == *value,
                CmpOp::Le => actual <= *value,
                CmpOp::Ge => actual >= *value,
            };
            AssertionResult {
                description: format!("counter {name} {op:?} {value}"),
                passed,
                detail: format!("actual {actual}"),
            }
        }
        AssertionSpec::AggregatesPerWindow { manager, expect } => {
            let window = scenario.build.aggregation.window_ms;
            let latency = scenario.fabric.default_latency_ms;
            let mut observed: BTreeMap<u64, usize> = BTreeMap::new();
            for r in records {
                if r.kind == TraceKind::Deliver
                    && r.to == manager.as_str()
                    && r.payload.starts_with("publish ")
                {
                    *observed.entry(r.time.millis() / window).or_insert(0) += 1;
                }
            }
            let last_complete = duration.saturating_sub(latency) / window;
            let expected: BTreeMap<u64, usize> =
                (1..=last_complete).map(|w| (w, *expect)).collect();
            let passed = observed == expected;
            AssertionResult {
                description: format!("{manager} receives {expect} summaries per window"),
                passed,
                detail: format!("windows 1..={last_complete}, observed {observed:?}"),
            }
        }
        AssertionSpec::NoDomainAt { actor, domain } => {
            let tag = format!("domain={domain}");
            let hit = records.iter().find(|r| {
                r.kind != TraceKind::Note
                    && (r.from == actor.as_str() || r.to == actor.as_str())
                    && r.payload.contains(&tag)
            });
            AssertionResult {
                description: format!("no {domain}-domain traffic at {actor}"),
                passed: hit.is_none(),
                detail: hit.map(|r| r.render()).unwrap_or_else(|| "clean".into()),
            }
        }
        AssertionSpec::AppRunning { app } => {
            let mut placements = Vec::new();
            for node in scenario.topology.nodes() {
                if !node.role.is_manager() {
                    continue;
                }
                let Some(state) = fabric.actor_state::<ManagerActor>(&node.id) else {
                    continue;
                };
                if let Some(rec) = state.alloc.record(app) {
                    if rec.state.is_live() {
                        let available =
                            state.membership.status(&rec.node) == Some(NodeStatus::Available);
                        placements.push((node.id.clone(), rec.node.clone(), rec.state, available));
                    }
                }
            }
            let passed = placements.len() == 1
                && placements[0].2 == crate::allocation::RecordState::Running
                && placements[0].3;
            AssertionResult {
                description: format!("app {app} running on an available node, placed once"),
                passed,
                detail: format!("{placements:?}"),
            }
        }
        AssertionSpec::AppDenied { app, reason } => {
            let expected = format!("denied:{reason}");
            let actual = report.deploy_outcomes.get(app.as_str());
            AssertionResult {
                description: format!("app {app} denied with {reason}"),
                passed: actual == Some(&expected),
                detail: format!("actual {actual:?}"),
            }
        }
        AssertionSpec::NodeFailedWithin {
            node,
            after_ms,
            within_ms,
        } => {
            let needle = format!("lifecycle event=node-failed node={node}");
            let at = records
                .iter()
                .find(|r| r.kind == TraceKind::Note && r.payload == needle)
                .map(|r| r.time.millis());
            let passed =
                at.map(|ms| ms > *after_ms && ms <= after_ms + within_ms).unwrap_or(false);
            AssertionResult {
                description: format!(
                    "node {node} reported failed in ({after_ms}, {}]",
                    after_ms + within_ms
                ),
                passed,
                detail: format!("reported at {at:?}"),
            }
        }
    }
}

fn write_outputs(out_dir: &Path, name: &str, outcome: &RunOutcome) -> Result<(), RunnerError> {
    let dir = out_dir.join(name).join(outcome.seed.to_string());
    let io = |e| RunnerError::Output(dir.clone(), e);
    std::fs::create_dir_all(&dir).map_err(io)?;
    std::fs::write(dir.join("trace.log"), &outcome.trace_text).map_err(io)?;
    std::fs::write(dir.join("report.json"), outcome.report.to_json()).map_err(io)?;
    let mut metrics = String::new();
    for (manager, mr) in &outcome.report.managers {
        for w in &mr.windows {
            let props: Vec<String> = w
                .properties
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            metrics.push_str(&format!(
                "{}\t{manager}\t{}\n",
                w.close_ms,
                props.join(",")
            ));
        }
    }
    std::fs::write(dir.join("metrics.log"), metrics).map_err(io)?;
    Ok(())
}

/// Trace records parsed back from exported text; used by tests and tools.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, usize> {
    crate::fabric::EventTrace::parse_text(text).map(|t| t.records().to_vec())
}
