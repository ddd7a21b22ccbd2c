//! Sensor/reactor/actuator control loops.
//!
//! Reactors hold declarative rules loaded from the scenario: a trigger
//! predicate over lifecycle and metric events, and a response template that
//! the owning manager instantiates into concrete actions. Rules are
//! evaluated in declaration order; several domains (repair, optimization)
//! coexist on the same reactor and stay isolated from each other.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::fabric::ActorId;
use crate::gma::MetricEvent;
use crate::membership::LifecycleEvent;
use crate::protocol::{AppId, Domain};

/// Periodic local measurement emitted by a node's sensor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorSpec {
    pub metric: String,
    pub period_ms: u64,
    /// Uniform noise half-width added to the reading; 0 disables the draw.
    pub noise_amplitude: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec {
            metric: "cpu".into(),
            period_ms: 1000,
            noise_amplitude: 0.0,
        }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.period_ms == 0 {
            return Err("sensor period must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.noise_amplitude) {
            return Err("noise amplitude must be in [0, 1]".into());
        }
        Ok(())
    }
}

/// Rule trigger predicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Trigger {
    NodeFailure,
    NodeRecovered,
    /// Fires when the property exceeds the threshold for `consecutive`
    /// metric events in a row; an event without the property resets the run.
    MetricAbove {
        property: String,
        threshold: f64,
        #[serde(default = "one")]
        consecutive: u32,
    },
}

fn one() -> u32 {
    1
}

/// Selects the node an action applies to.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetSel {
    Node { node: ActorId },
    /// The available child with the highest reserved share.
    MostLoaded,
}

/// What a matched rule does, before the manager fills in state-dependent
/// parts (the failed node's apps, the smallest app, the least-loaded node).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResponseTemplate {
    ReplaceNode,
    /// Redeploy the smallest live app to the least-loaded available child.
    RebalanceSmallest,
    TuneParameter {
        name: String,
        value: f64,
        target: TargetSel,
    },
    StopNode { target: TargetSel },
    Rebind { component: AppId, target: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReactorRule {
    pub domain: Domain,
    pub trigger: Trigger,
    pub response: ResponseTemplate,
}

/// Instantiated action ready for the actuator.
#[derive(Debug, Clone)]
pub struct Action {
    pub domain: Domain,
    pub kind: ActionKind,
}

#[derive(Debug, Clone)]
pub enum ActionKind {
    ReplaceNode { failed: ActorId, apps: Vec<AppId> },
    TuneParameter { node: ActorId, name: String, value: f64 },
    Rebind { component: AppId, target: String },
    StopNode { node: ActorId },
    /// Rebalance step: move one app to a specific node.
    Redeploy { app: AppId, to: ActorId },
}

/// Where an action executes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Executor {
    Manager,
    /// Delegated to the node-local actuator.
    LocalActuator(ActorId),
}

impl Action {
    pub fn executor(&self) -> Executor {
        match &self.kind {
            ActionKind::TuneParameter { node, .. } => Executor::LocalActuator(node.clone()),
            _ => Executor::Manager,
        }
    }

    pub fn render(&self) -> String {
        match &self.kind {
            ActionKind::ReplaceNode { failed, apps } => {
                let list: Vec<String> = apps.iter().map(|a| a.to_string()).collect();
                format!(
                    "action kind=replace-node node={failed} apps={} domain={}",
                    list.join(","),
                    self.domain
                )
            }
            ActionKind::TuneParameter { node, name, value } => format!(
                "action kind=tune-parameter node={node} name={name} value={value} domain={}",
                self.domain
            ),
            ActionKind::Rebind { component, target } => format!(
                "action kind=rebind component={component} target={target} domain={}",
                self.domain
            ),
            ActionKind::StopNode { node } => {
                format!("action kind=stop-node node={node} domain={}", self.domain)
            }
            ActionKind::Redeploy { app, to } => {
                format!("action kind=redeploy app={app} to={to} domain={}", self.domain)
            }
        }
    }
}

/// Input fed to the reactor by its manager.
#[derive(Debug)]
pub enum ReactorInput<'a> {
    Lifecycle(&'a LifecycleEvent),
    Metric(&'a MetricEvent),
}

/// Decision mechanism: declarative rule matching with per-rule streak
/// state for consecutive-window triggers.
pub struct Reactor {
    rules: Vec<ReactorRule>,
    streaks: Vec<u32>,
}

impl Reactor {
    pub fn new(rules: Vec<ReactorRule>) -> Reactor {
        let streaks = vec![0; rules.len()];
        Reactor { rules, streaks }
    }

    pub fn rules(&self) -> &[ReactorRule] {
        &self.rules
    }

    pub fn domains(&self) -> BTreeSet<Domain> {
        self.rules.iter().map(|r| r.domain).collect()
    }

    /// Indices of rules matching this input, in declaration order.
    pub fn matching(&mut self, input: &ReactorInput<'_>) -> Vec<usize> {
        let mut hits = Vec::new();
        for (i, rule) in self.rules.iter().enumerate() {
            match (&rule.trigger, input) {
                (Trigger::NodeFailure, ReactorInput::Lifecycle(LifecycleEvent::Failed(_))) => {
                    hits.push(i);
                }
                (
                    Trigger::NodeRecovered,
                    ReactorInput::Lifecycle(LifecycleEvent::Recovered(_)),
                ) => {
                    hits.push(i);
                }
                (
                    Trigger::MetricAbove {
                        property,
                        threshold,
                        consecutive,
                    },
                    ReactorInput::Metric(event),
                ) => match event.get(property) {
                    Some(v) if v > *threshold => {
                        self.streaks[i] += 1;
                        if self.streaks[i] >= *consecutive {
                            self.streaks[i] = 0;
                            hits.push(i);
                        }
                    }
                    _ => self.streaks[i] = 0,
                },
                _ => {}
            }
        }
        hits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::SimTime;

    fn metric(prop: &str, v: f64) -> MetricEvent {
        MetricEvent::new(ActorId::new("m1"), SimTime::ZERO, 1).with(prop, v)
    }

    fn above_rule(threshold: f64, consecutive: u32) -> ReactorRule {
        ReactorRule {
            domain: Domain::Optimization,
            trigger: Trigger::MetricAbove {
                property: "cpu_mean".into(),
                threshold,
                consecutive,
            },
            response: ResponseTemplate::RebalanceSmallest,
        }
    }

    #[test]
    fn node_failure_matches_repair_rule() {
        let mut reactor = Reactor::new(vec![ReactorRule {
            domain: Domain::Repair,
            trigger: Trigger::NodeFailure,
            response: ResponseTemplate::ReplaceNode,
        }]);
        let failed = LifecycleEvent::Failed(ActorId::new("n3"));
        assert_eq!(reactor.matching(&ReactorInput::Lifecycle(&failed)), vec![0]);
        let avail = LifecycleEvent::Available(ActorId::new("n3"));
        assert!(reactor.matching(&ReactorInput::Lifecycle(&avail)).is_empty());
    }

    #[test]
    fn threshold_is_strict() {
        let mut reactor = Reactor::new(vec![above_rule(0.9, 1)]);
        let ev = metric("cpu_mean", 0.95);
        assert_eq!(reactor.matching(&ReactorInput::Metric(&ev)), vec![0]);
        let at = metric("cpu_mean", 0.9);
        assert!(reactor.matching(&ReactorInput::Metric(&at)).is_empty());
        let below = metric("cpu_mean", 0.5);
        assert!(reactor.matching(&ReactorInput::Metric(&below)).is_empty());
    }

    #[test]
    fn consecutive_windows_required() {
        let mut reactor = Reactor::new(vec![above_rule(0.9, 2)]);
        let hot = metric("cpu_mean", 0.95);
        let cold = metric("cpu_mean", 0.2);
        assert!(reactor.matching(&ReactorInput::Metric(&hot)).is_empty());
        assert_eq!(reactor.matching(&ReactorInput::Metric(&hot)), vec![0]);
        // Streak resets after firing and after a cold window.
        assert!(reactor.matching(&ReactorInput::Metric(&hot)).is_empty());
        assert!(reactor.matching(&ReactorInput::Metric(&cold)).is_empty());
        assert!(reactor.matching(&ReactorInput::Metric(&hot)).is_empty());
        assert_eq!(reactor.matching(&ReactorInput::Metric(&hot)), vec![0]);
    }

    #[test]
    fn missing_property_resets_streak() {
        let mut reactor = Reactor::new(vec![above_rule(0.9, 2)]);
        let hot = metric("cpu_mean", 0.95);
        let unrelated = metric("mem_mean", 0.99);
        assert!(reactor.matching(&ReactorInput::Metric(&hot)).is_empty());
        assert!(reactor.matching(&ReactorInput::Metric(&unrelated)).is_empty());
        assert!(reactor.matching(&ReactorInput::Metric(&hot)).is_empty());
    }

    #[test]
    fn rules_evaluated_in_declaration_order() {
        let mut reactor = Reactor::new(vec![above_rule(0.5, 1), above_rule(0.1, 1)]);
        let ev = metric("cpu_mean", 0.8);
        assert_eq!(reactor.matching(&ReactorInput::Metric(&ev)), vec![0, 1]);
    }

    #[test]
    fn tune_parameter_delegates_to_local_actuator() {
        let action = Action {
            domain: Domain::Optimization,
            kind: ActionKind::TuneParameter {
                node: ActorId::new("n4"),
                name: "pool_size".into(),
                value: 8.0,
            },
        };
        assert_eq!(action.executor(), Executor::LocalActuator(ActorId::new("n4")));
        let stop = Action {
            domain: Domain::Repair,
            kind: ActionKind::StopNode {
                node: ActorId::new("n4"),
            },
        };
        assert_eq!(stop.executor(), Executor::Manager);
    }
}
