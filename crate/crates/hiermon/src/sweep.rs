//! Multi-seed experiment sweeps.
//!
//! One simulation is a single logical thread, but independent runs share
//! nothing: each seed builds its own fabric. With the default `parallel`
//! feature the sweep fans out over a rayon pool; without it (or via the
//! explicitly sequential entry point) runs execute in order. Results are
//! identical either way and always returned in seed order.

use crate::runner::{run_scenario, RunOptions, RunOutcome, RunnerError};
use crate::scenario::Scenario;

fn run_one(scenario: &Scenario, seed: u64, duration_ms: Option<u64>) -> Result<RunOutcome, RunnerError> {
    let opts = RunOptions {
        seed: Some(seed),
        duration_ms,
        out_dir: None,
        bindings: Default::default(),
    };
    run_scenario(scenario, &opts)
}

/// Run the scenario once per seed, in parallel when the `parallel` feature
/// is enabled.
#[cfg(feature = "parallel")]
pub fn run_seeds(
    scenario: &Scenario,
    seeds: &[u64],
    duration_ms: Option<u64>,
) -> Result<Vec<RunOutcome>, RunnerError> {
    use rayon::prelude::*;
    seeds
        .par_iter()
        .map(|&seed| run_one(scenario, seed, duration_ms))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_seeds(
    scenario: &Scenario,
    seeds: &[u64],
    duration_ms: Option<u64>,
) -> Result<Vec<RunOutcome>, RunnerError> {
    run_seeds_sequential(scenario, seeds, duration_ms)
}

/// Sequential reference path, always available; the criterion bench compares
/// it against `run_seeds`.
pub fn run_seeds_sequential(
    scenario: &Scenario,
    seeds: &[u64],
    duration_ms: Option<u64>,
) -> Result<Vec<RunOutcome>, RunnerError> {
    seeds
        .iter()
        .map(|&seed| run_one(scenario, seed, duration_ms))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use std::path::Path;

    fn scenario() -> Scenario {
        let text = r#"
[scenario]
name = "sweep-test"
duration_ms = 20000

[monitoring]
noise_amplitude = 0.1

[[topology]]
id = "boot"
role = "boot"

[[topology]]
id = "n1"
role = "node"
parent = "boot"
capacity = { cpu = 4 }

[[topology]]
id = "n2"
role = "node"
parent = "boot"
capacity = { cpu = 4 }
"#;
        Scenario::parse_str(text, Path::new("."), &BTreeMap::new()).unwrap()
    }

    #[test]
    fn parallel_and_sequential_agree_bytewise() {
        let sc = scenario();
        let seeds: Vec<u64> = (1..=8).collect();
        let par = run_seeds(&sc, &seeds, None).unwrap();
        let seq = run_seeds_sequential(&sc, &seeds, None).unwrap();
        assert_eq!(par.len(), seq.len());
        for (a, b) in par.iter().zip(&seq) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.trace_text, b.trace_text);
            assert_eq!(a.report.to_json(), b.report.to_json());
        }
        // Different seeds give different noisy traces.
        assert_ne!(par[0].trace_text, par[1].trace_text);
    }
}
