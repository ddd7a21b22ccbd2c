//! Machine-readable run report.

use std::collections::BTreeMap;

use serde::Serialize;

/// Everything a run leaves behind besides the raw trace. Deterministic for
/// a fixed scenario and seed: all maps are ordered and all values derive
/// from the simulation.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub duration_ms: u64,
    /// Event tallies scanned from the trace (lifecycle, allocation,
    /// deliveries per level, drops by reason, actions).
    pub counters: BTreeMap<String, u64>,
    pub managers: BTreeMap<String, ManagerReport>,
    /// Terminal outcome per workload app, e.g. `granted:n3`.
    pub deploy_outcomes: BTreeMap<String, String>,
    pub assertions: Vec<AssertionResult>,
}

impl RunReport {
    pub fn counter(&self, name: &str) -> u64 {
        self.counters.get(name).copied().unwrap_or(0)
    }

    pub fn assertions_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ManagerReport {
    /// Per-window summaries this manager emitted, oldest first.
    pub windows: Vec<WindowReport>,
    /// Final deployment records owned by this manager.
    pub records: BTreeMap<String, RecordReport>,
    /// Final system representation: app -> node over the manager's subtree
    /// (ancestors see descendants' placements through sync).
    pub placements: BTreeMap<String, String>,
    /// Final membership view: node -> status.
    pub nodes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowReport {
    pub close_ms: u64,
    pub inputs: usize,
    pub properties: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecordReport {
    pub node: String,
    pub state: String,
    pub demand: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssertionResult {
    pub description: String,
    pub passed: bool,
    pub detail: String,
}
