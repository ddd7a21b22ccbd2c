//! Trace oracles: independent recomputation of system-reported values.
//!
//! Each oracle re-reads the exported trace text and re-derives a property
//! from raw records, without touching the runtime code paths that produced
//! the values under check:
//!
//! * `aggregation` — recompute every emitted window summary from the publish
//!   events delivered to its manager within the window; compare at relative
//!   tolerance 1e-9.
//! * `conservation` — fold deployment-record transitions into per-node
//!   reserved capacity and compare against every emitted capacity note.
//! * `repair` — for each failure episode, check exactly one replace action,
//!   at most one repair install per lost app, and a final live placement
//!   (or an explicit exhaustion result).

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::fabric::{EventTrace, TraceKind, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oracle {
    Aggregation,
    Conservation,
    Repair,
}

impl Oracle {
    pub fn parse(s: &str) -> Option<Oracle> {
        Some(match s {
            "aggregation" => Oracle::Aggregation,
            "conservation" => Oracle::Conservation,
            "repair" => Oracle::Repair,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Oracle::Aggregation => "aggregation",
            Oracle::Conservation => "conservation",
            Oracle::Repair => "repair",
        }
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("cannot read {0}: {1}")]
    Io(std::path::PathBuf, std::io::Error),
    #[error("trace line {0} is malformed")]
    Malformed(usize),
}

#[derive(Debug)]
pub struct VerifyReport {
    pub oracle: &'static str,
    pub checked: usize,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "oracle {}: {} checks, {}\n",
            self.oracle,
            self.checked,
            if self.passed() { "pass" } else { "FAIL" }
        );
        for f in &self.failures {
            out.push_str(f);
            out.push('\n');
        }
        out
    }
}

pub fn verify_file(path: &Path, oracle: Oracle) -> Result<VerifyReport, VerifyError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| VerifyError::Io(path.to_path_buf(), e))?;
    verify_text(&text, oracle)
}

pub fn verify_text(text: &str, oracle: Oracle) -> Result<VerifyReport, VerifyError> {
    let trace = EventTrace::parse_text(text).map_err(VerifyError::Malformed)?;
    let records: Vec<(usize, &TraceRecord)> = trace.records().iter().enumerate().collect();
    Ok(match oracle {
        Oracle::Aggregation => check_aggregation(&records),
        Oracle::Conservation => check_conservation(&records),
        Oracle::Repair => check_repair(&records),
    })
}

fn field<'a>(payload: &'a str, key: &str) -> Option<&'a str> {
    payload
        .split(' ')
        .filter_map(|tok| tok.split_once('='))
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v)
}

fn num(payload: &str, key: &str) -> Option<u64> {
    field(payload, key)?.parse().ok()
}

/// Parse `props=[a=1,b=2]` into ordered pairs.
fn props(payload: &str) -> Vec<(String, f64)> {
    let Some(raw) = field(payload, "props") else {
        return Vec::new();
    };
    let inner = raw.trim_start_matches('[').trim_end_matches(']');
    inner
        .split(',')
        .filter(|s| !s.is_empty())
        .filter_map(|kv| {
            let (k, v) = kv.split_once('=')?;
            Some((k.to_string(), v.parse::<f64>().ok()?))
        })
        .collect()
}

/// Parse `[cpu=2,mem=1]` into per-dimension units.
fn capacity(raw: &str) -> BTreeMap<String, u64> {
    raw.trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .filter(|s| !s.is_empty())
        .filter_map(|kv| {
            let (k, v) = kv.split_once('=')?;
            Some((k.to_string(), v.parse::<u64>().ok()?))
        })
        .collect()
}

fn close_enough(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= 1e-9 * scale.max(1e-300) || a == b
}

struct MonitorConfig {
    window: u64,
    functions: Vec<String>,
    group_by: String,
}

/// One parsed publish input: arrival time, source, level, properties.
struct Input {
    arrival: u64,
    source: String,
    timestamp: u64,
    properties: Vec<(String, f64)>,
}

const VALUE_FUNCTIONS: [&str; 4] = ["mean", "max", "min", "last"];

fn covers(input: &Input, base: &str) -> bool {
    input.properties.iter().any(|(n, v)| {
        n == base
            || VALUE_FUNCTIONS
                .iter()
                .any(|f| n.as_str() == format!("{base}_{f}"))
            || (n.as_str() == format!("{base}_count") && *v > 0.0)
    })
}

fn value_for(input: &Input, base: &str, func: &str) -> Option<f64> {
    let agg = format!("{base}_{func}");
    input
        .properties
        .iter()
        .find(|(n, _)| n == base)
        .or_else(|| input.properties.iter().find(|(n, _)| *n == agg))
        .map(|(_, v)| *v)
}

/// Recompute one aggregate property over a window's inputs.
fn recompute(inputs: &[&Input], base: &str, func: &str) -> Option<f64> {
    let covering: Vec<&&Input> = inputs.iter().filter(|i| covers(i, base)).collect();
    if covering.is_empty() {
        return if func == "count" { Some(0.0) } else { None };
    }
    match func {
        "count" => Some(covering.len() as f64),
        "mean" => {
            let vals: Vec<f64> = covering
                .iter()
                .filter_map(|i| value_for(i, base, "mean"))
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        }
        "max" => covering
            .iter()
            .filter_map(|i| value_for(i, base, "max"))
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v)))),
        "min" => covering
            .iter()
            .filter_map(|i| value_for(i, base, "min"))
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v)))),
        "last" => {
            let mut best: Option<(u64, f64)> = None;
            for i in &covering {
                if let Some(v) = value_for(i, base, "last") {
                    if best.is_none_or(|(t, _)| i.timestamp >= t) {
                        best = Some((i.timestamp, v));
                    }
                }
            }
            best.map(|(_, v)| v)
        }
        _ => None,
    }
}

fn check_aggregation(records: &[(usize, &TraceRecord)]) -> VerifyReport {
    let mut configs: BTreeMap<String, MonitorConfig> = BTreeMap::new();
    let mut inputs: BTreeMap<String, Vec<Input>> = BTreeMap::new();
    let mut checked = 0;
    let mut failures = Vec::new();

    for (line, r) in records {
        if r.kind == TraceKind::Note && r.payload.starts_with("config-monitor ") {
            let Some(manager) = field(&r.payload, "manager") else {
                continue;
            };
            configs.insert(
                manager.to_string(),
                MonitorConfig {
                    window: num(&r.payload, "window").unwrap_or(0),
                    functions: field(&r.payload, "functions")
                        .unwrap_or("")
                        .split(',')
                        .map(str::to_string)
                        .collect(),
                    group_by: field(&r.payload, "group_by").unwrap_or("property").to_string(),
                },
            );
        }
        if r.kind == TraceKind::Deliver && r.payload.starts_with("publish ") {
            inputs.entry(r.to.clone()).or_default().push(Input {
                arrival: r.time.millis(),
                source: field(&r.payload, "src").unwrap_or("?").to_string(),
                timestamp: num(&r.payload, "t").unwrap_or(0),
                properties: props(&r.payload),
            });
        }
        if r.kind == TraceKind::Note && r.payload.starts_with("window-agg ") {
            let manager = r.from.clone();
            let Some(cfg) = configs.get(&manager) else {
                failures.push(format!("line {}: no config-monitor for {manager}", line + 1));
                continue;
            };
            let close = num(&r.payload, "close").unwrap_or(0);
            let window = num(&r.payload, "window").unwrap_or(cfg.window);
            let open = close.saturating_sub(window);
            let empty = Vec::new();
            let all = inputs.get(&manager).unwrap_or(&empty);
            let in_window: Vec<&Input> = all
                .iter()
                .filter(|i| i.arrival >= open && i.arrival < close)
                .collect();
            let group: Vec<&Input> = if cfg.group_by == "source" && !in_window.is_empty() {
                let src = field(&r.payload, "src").unwrap_or("?");
                in_window
                    .iter()
                    .copied()
                    .filter(|i| i.source == src)
                    .collect()
            } else {
                in_window
            };

            for (name, emitted) in props(&r.payload) {
                checked += 1;
                let Some((base, func)) = name.rsplit_once('_') else {
                    failures.push(format!(
                        "line {}: aggregate property {name} has no function suffix",
                        line + 1
                    ));
                    continue;
                };
                // Empty-window markers always carry a count; anything else
                // must be a configured function.
                if func != "count" && !cfg.functions.iter().any(|f| f == func) {
                    failures.push(format!(
                        "line {}: {manager} emitted unconfigured aggregate {name}",
                        line + 1
                    ));
                    continue;
                }
                match recompute(&group, base, func) {
                    Some(expected) if close_enough(expected, emitted) => {}
                    Some(expected) => failures.push(format!(
                        "line {}: {manager} window {close} {name}: emitted {emitted}, recomputed {expected}",
                        line + 1
                    )),
                    None => failures.push(format!(
                        "line {}: {manager} window {close} {name}: emitted {emitted}, no input supports it",
                        line + 1
                    )),
                }
            }
        }
    }
    VerifyReport {
        oracle: Oracle::Aggregation.name(),
        checked,
        failures,
    }
}

fn check_conservation(records: &[(usize, &TraceRecord)]) -> VerifyReport {
    // app -> (node, demand) while live.
    let mut live: BTreeMap<String, (String, BTreeMap<String, u64>)> = BTreeMap::new();
    // node -> folded reserved units per dimension.
    let mut reserved: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    let mut checked = 0;
    let mut failures = Vec::new();

    for (line, r) in records {
        if r.kind != TraceKind::Note {
            continue;
        }
        if r.payload.starts_with("record ") {
            let (Some(app), Some(node), Some(state)) = (
                field(&r.payload, "app"),
                field(&r.payload, "node"),
                field(&r.payload, "state"),
            ) else {
                failures.push(format!("line {}: malformed record note", line + 1));
                continue;
            };
            let demand = capacity(field(&r.payload, "demand").unwrap_or("[]"));
            match state {
                "deploying" => {
                    if live.contains_key(app) {
                        failures.push(format!(
                            "line {}: app {app} deploying while already live",
                            line + 1
                        ));
                    }
                    let slot = reserved.entry(node.to_string()).or_default();
                    for (dim, units) in &demand {
                        *slot.entry(dim.clone()).or_insert(0) += units;
                    }
                    live.insert(app.to_string(), (node.to_string(), demand));
                }
                "running" => {}
                "stopped" | "lost" => {
                    if let Some((node_was, demand_was)) = live.remove(app) {
                        if node_was != node {
                            failures.push(format!(
                                "line {}: app {app} left {node} but was live on {node_was}",
                                line + 1
                            ));
                        }
                        let slot = reserved.entry(node_was).or_default();
                        for (dim, units) in &demand_was {
                            let e = slot.entry(dim.clone()).or_insert(0);
                            *e = e.saturating_sub(*units);
                        }
                    }
                }
                _ => failures.push(format!("line {}: unknown record state {state}", line + 1)),
            }
        }
        if r.payload.starts_with("capacity ") {
            let Some(node) = field(&r.payload, "node") else {
                continue;
            };
            checked += 1;
            let emitted = capacity(field(&r.payload, "reserved").unwrap_or("[]"));
            let empty = BTreeMap::new();
            let folded = reserved.get(node).unwrap_or(&empty);
            let dims: std::collections::BTreeSet<&String> =
                emitted.keys().chain(folded.keys()).collect();
            for dim in dims {
                let e = emitted.get(dim).copied().unwrap_or(0);
                let f = folded.get(dim).copied().unwrap_or(0);
                if e != f {
                    failures.push(format!(
                        "line {}: node {node} {dim}: emitted reserved {e}, live demand sum {f}",
                        line + 1
                    ));
                }
            }
        }
    }
    VerifyReport {
        oracle: Oracle::Conservation.name(),
        checked,
        failures,
    }
}

fn check_repair(records: &[(usize, &TraceRecord)]) -> VerifyReport {
    let mut repair_active = false;
    for (_, r) in records {
        if r.kind == TraceKind::Note && r.payload.starts_with("config-rules ") {
            if let Some(domains) = field(&r.payload, "domains") {
                repair_active = domains.split(',').any(|d| d == "repair");
            }
        }
    }
    let mut checked = 0;
    let mut failures = Vec::new();
    if !repair_active {
        return VerifyReport {
            oracle: Oracle::Repair.name(),
            checked,
            failures,
        };
    }

    // Fold placements over time to know what each node held when it failed.
    #[derive(Clone)]
    struct Live {
        node: String,
    }
    let mut live: BTreeMap<String, Live> = BTreeMap::new();
    struct Episode {
        line: usize,
        manager: String,
        node: String,
        apps: Vec<String>,
    }
    let mut episodes: Vec<Episode> = Vec::new();
    let mut replace_actions: Vec<(String, String)> = Vec::new(); // manager, node
    let mut repair_installs: BTreeMap<String, usize> = BTreeMap::new();
    let mut final_state: BTreeMap<String, (String, String)> = BTreeMap::new(); // app -> (state, node)
    let mut exhausted: Vec<String> = Vec::new();

    for (line, r) in records {
        match r.kind {
            TraceKind::Note => {
                if r.payload.starts_with("record ") {
                    let (Some(app), Some(node), Some(state)) = (
                        field(&r.payload, "app"),
                        field(&r.payload, "node"),
                        field(&r.payload, "state"),
                    ) else {
                        continue;
                    };
                    match state {
                        "deploying" => {
                            live.insert(app.to_string(), Live { node: node.to_string() });
                        }
                        "stopped" | "lost" => {
                            live.remove(app);
                        }
                        _ => {}
                    }
                    final_state.insert(app.to_string(), (state.to_string(), node.to_string()));
                } else if r.payload.starts_with("lifecycle event=node-failed") {
                    let node = field(&r.payload, "node").unwrap_or("?").to_string();
                    let apps: Vec<String> = live
                        .iter()
                        .filter(|(_, l)| l.node == node)
                        .map(|(a, _)| a.clone())
                        .collect();
                    episodes.push(Episode {
                        line: line + 1,
                        manager: r.from.clone(),
                        node,
                        apps,
                    });
                } else if r.payload.starts_with("action kind=replace-node") {
                    replace_actions.push((
                        r.from.clone(),
                        field(&r.payload, "node").unwrap_or("?").to_string(),
                    ));
                } else if r.payload.contains("status=failed reason=exhausted") {
                    if let Some(app) = field(&r.payload, "app") {
                        exhausted.push(app.to_string());
                    }
                }
            }
            TraceKind::Deliver
                if r.payload.starts_with("install ")
                    && field(&r.payload, "domain") == Some("repair")
                => {
                    if let Some(app) = field(&r.payload, "app") {
                        *repair_installs.entry(app.to_string()).or_insert(0) += 1;
                    }
                }
            _ => {}
        }
    }

    for ep in &episodes {
        checked += 1;
        let actions = replace_actions
            .iter()
            .filter(|(m, n)| *m == ep.manager && *n == ep.node)
            .count();
        if actions != 1 {
            failures.push(format!(
                "line {}: failure of {} at {} produced {actions} replace actions, want 1",
                ep.line, ep.node, ep.manager
            ));
        }
        for app in &ep.apps {
            let installs = repair_installs.get(app).copied().unwrap_or(0);
            if installs > 1 {
                failures.push(format!(
                    "line {}: app {app} repaired {installs} times",
                    ep.line
                ));
            }
            let ok_final = match final_state.get(app) {
                Some((state, node)) => {
                    (state == "running" || state == "deploying") && *node != ep.node
                }
                None => false,
            };
            if !ok_final && !exhausted.contains(app) {
                failures.push(format!(
                    "line {}: app {app} neither re-placed nor reported exhausted after {} failed ({:?})",
                    ep.line,
                    ep.node,
                    final_state.get(app)
                ));
            }
        }
    }
    VerifyReport {
        oracle: Oracle::Repair.name(),
        checked,
        failures,
    }
}
