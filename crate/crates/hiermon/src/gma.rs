//! Monitoring pipeline: property-list events, soft-state registry,
//! producers, and summarizing republishers.
//!
//! Producers and consumers register with a directory under a TTL; lookups
//! return unexpired producer endpoints only, never event data. Event traffic
//! flows peer to peer between producer and subscriber actors. A republisher
//! consumes events, buffers them by arrival time, and emits one summarized
//! event per group when an aligned window closes; aggregate properties are
//! named `<property>_<function>`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::fabric::{Actor, ActorId, Context, SimTime};
use crate::protocol::{EndpointId, Msg};

/// Timestamped property list flowing from sensors to consumers.
/// Level 0 is a raw sensor reading; each republisher hop adds one.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricEvent {
    pub source: ActorId,
    pub timestamp: SimTime,
    pub level: u32,
    properties: Vec<(String, f64)>,
}

impl MetricEvent {
    pub fn new(source: ActorId, timestamp: SimTime, level: u32) -> MetricEvent {
        MetricEvent {
            source,
            timestamp,
            level,
            properties: Vec::new(),
        }
    }

    /// Append a property; names are unique within one event.
    pub fn push(&mut self, name: &str, value: f64) -> Result<(), String> {
        if self.properties.iter().any(|(n, _)| n == name) {
            return Err(format!("duplicate property {name}"));
        }
        self.properties.push((name.to_string(), value));
        Ok(())
    }

    pub fn with(mut self, name: &str, value: f64) -> MetricEvent {
        self.push(name, value)
            .expect("property names must be unique");
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.properties
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    pub fn properties(&self) -> &[(String, f64)] {
        &self.properties
    }

    /// Stable trace form: `src=<actor> t=<ms> level=<k> props=[k=v,...]`.
    pub fn render(&self) -> String {
        let props: Vec<String> = self
            .properties
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect();
        format!(
            "src={} t={} level={} props=[{}]",
            self.source,
            self.timestamp.millis(),
            self.level,
            props.join(",")
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegKind {
    Producer,
    Consumer,
}

/// Announcement sent to a directory; the directory stamps the arrival time.
#[derive(Debug, Clone)]
pub struct Registration {
    pub subject: EndpointId,
    pub kind: RegKind,
    /// Offered property names for producers, wanted names for consumers.
    pub names: Vec<String>,
    pub ttl_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RegistrationId(pub u64);

#[derive(Debug)]
struct RegEntry {
    id: RegistrationId,
    reg: Registration,
    registered_at: SimTime,
}

/// Soft-state registry of producers and consumers. Expiry is evaluated
/// lazily: an entry is visible at `t` iff a refresh happened in
/// `(t - ttl, t]`, i.e. strictly less than one TTL ago.
#[derive(Debug, Default)]
pub struct Directory {
    entries: Vec<RegEntry>,
    next_id: u64,
}

impl Directory {
    pub fn new() -> Directory {
        Directory::default()
    }

    /// Insert or refresh. Re-registering the same subject and kind resets the
    /// clock and updates names/ttl, keeping the original registration order.
    pub fn register(&mut self, reg: Registration, now: SimTime) -> RegistrationId {
        if let Some(entry) = self
            .entries
            .iter_mut()
            .find(|e| e.reg.subject == reg.subject && e.reg.kind == reg.kind)
        {
            entry.reg = reg;
            entry.registered_at = now;
            return entry.id;
        }
        let id = RegistrationId(self.next_id);
        self.next_id += 1;
        self.entries.push(RegEntry {
            id,
            reg,
            registered_at: now,
        });
        id
    }

    fn entry_visible(entry: &RegEntry, now: SimTime) -> bool {
        now.saturating_sub(entry.registered_at) < entry.reg.ttl_ms
    }

    /// All unexpired producers whose offered names intersect `wanted`,
    /// in registration order. Returns endpoints only.
    pub fn lookup(&self, wanted: &[String], now: SimTime) -> Vec<EndpointId> {
        self.entries
            .iter()
            .filter(|e| e.reg.kind == RegKind::Producer && Self::entry_visible(e, now))
            .filter(|e| e.reg.names.iter().any(|n| wanted.contains(n)))
            .map(|e| e.reg.subject.clone())
            .collect()
    }

    pub fn visible(&self, subject: &EndpointId, kind: RegKind, now: SimTime) -> bool {
        self.entries
            .iter()
            .any(|e| e.reg.subject == *subject && e.reg.kind == kind && Self::entry_visible(e, now))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Directory service as a fabric actor. Lookups that miss locally are
/// forwarded to the parent directory, which answers the consumer directly;
/// the root replies with the empty result. Event data never transits this
/// actor.
pub struct DirectoryActor {
    directory: Directory,
    parent: Option<ActorId>,
}

impl DirectoryActor {
    pub fn new(parent: Option<ActorId>) -> DirectoryActor {
        DirectoryActor {
            directory: Directory::new(),
            parent,
        }
    }

    pub fn directory(&self) -> &Directory {
        &self.directory
    }
}

impl Actor<Msg> for DirectoryActor {
    fn on_message(&mut self, ctx: &mut Context<'_, Msg>, _from: &ActorId, msg: Msg) {
        match msg {
            Msg::Register(reg) => {
                self.directory.register(reg, ctx.now());
            }
            Msg::Lookup { wanted, reply_to } => {
                let endpoints = self.directory.lookup(&wanted, ctx.now());
                if endpoints.is_empty() {
                    if let Some(parent) = self.parent.clone() {
                        ctx.send(&parent, Msg::Lookup { wanted, reply_to });
                        return;
                    }
                }
                ctx.send(&reply_to, Msg::LookupReply { endpoints });
            }
            _ => {}
        }
    }

    fn on_timer(&mut self, _ctx: &mut Context<'_, Msg>, _msg: Msg) {}

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}

/// Producer side of an endpoint: subscriber list plus the latest event for
/// query/response pulls. Publication is acknowledgment-free.
#[derive(Debug)]
pub struct ProducerState {
    pub endpoint: EndpointId,
    pub offered: Vec<String>,
    pub ttl_ms: u64,
    subscribers: Vec<ActorId>,
    pub last_event: Option<MetricEvent>,
}

impl ProducerState {
    pub fn new(endpoint: EndpointId, offered: Vec<String>, ttl_ms: u64) -> ProducerState {
        ProducerState {
            endpoint,
            offered,
            ttl_ms,
            subscribers: Vec::new(),
            last_event: None,
        }
    }

    pub fn registration(&self) -> Msg {
        Msg::Register(Registration {
            subject: self.endpoint.clone(),
            kind: RegKind::Producer,
            names: self.offered.clone(),
            ttl_ms: self.ttl_ms,
        })
    }

    /// Idempotent; subscription order is preserved.
    pub fn subscribe(&mut self, subscriber: ActorId) {
        if !self.subscribers.contains(&subscriber) {
            self.subscribers.push(subscriber);
        }
    }

    pub fn subscribers(&self) -> &[ActorId] {
        &self.subscribers
    }

    /// Cache the event and send it to every current subscriber.
    pub fn publish(&mut self, ctx: &mut Context<'_, Msg>, event: MetricEvent) {
        self.last_event = Some(event.clone());
        for sub in self.subscribers.clone() {
            ctx.send(
                &sub,
                Msg::Publish {
                    producer: self.endpoint.clone(),
                    event: event.clone(),
                },
            );
        }
    }

    pub fn answer_query(&self, ctx: &mut Context<'_, Msg>, reply_to: &ActorId) {
        ctx.send(
            reply_to,
            Msg::QueryReply {
                producer: self.endpoint.clone(),
                event: self.last_event.clone(),
            },
        );
    }

    pub fn reset(&mut self) {
        self.subscribers.clear();
        self.last_event = None;
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash,
)]
#[serde(rename_all = "lowercase")]
pub enum AggFunction {
    Mean,
    Max,
    Min,
    Count,
    Last,
}

impl AggFunction {
    pub fn name(self) -> &'static str {
        match self {
            AggFunction::Mean => "mean",
            AggFunction::Max => "max",
            AggFunction::Min => "min",
            AggFunction::Count => "count",
            AggFunction::Last => "last",
        }
    }

    pub fn all() -> [AggFunction; 5] {
        [
            AggFunction::Mean,
            AggFunction::Max,
            AggFunction::Min,
            AggFunction::Count,
            AggFunction::Last,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Source,
    Property,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregationSpec {
    pub window_ms: u64,
    pub functions: BTreeSet<AggFunction>,
    pub group_by: GroupBy,
}

impl AggregationSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.window_ms == 0 {
            return Err("aggregation window must be positive".into());
        }
        if self.functions.is_empty() {
            return Err("aggregation needs at least one function".into());
        }
        Ok(())
    }
}

impl Default for AggregationSpec {
    fn default() -> Self {
        let mut functions = BTreeSet::new();
        functions.insert(AggFunction::Mean);
        functions.insert(AggFunction::Count);
        AggregationSpec {
            window_ms: 5000,
            functions,
            group_by: GroupBy::Property,
        }
    }
}

/// One closed window: the inputs that fell in it and the emitted summaries.
#[derive(Debug, Clone)]
pub struct WindowAggregate {
    pub close: SimTime,
    pub inputs: usize,
    pub emitted: Vec<MetricEvent>,
}

/// An event covers base property `p` when it carries `p` itself, any value
/// aggregate `p_<function>` of it, or a nonzero `p_count`. A bare
/// `p_count=0` marker summarizes nothing and does not cover.
fn covers(event: &MetricEvent, base: &str) -> bool {
    if event.get(base).is_some() {
        return true;
    }
    let valued = [
        AggFunction::Mean,
        AggFunction::Max,
        AggFunction::Min,
        AggFunction::Last,
    ];
    if valued
        .iter()
        .any(|f| event.get(&format!("{base}_{}", f.name())).is_some())
    {
        return true;
    }
    event
        .get(&format!("{base}_count"))
        .map(|c| c > 0.0)
        .unwrap_or(false)
}

/// Contributing value of an event toward function `f` over `base`: the raw
/// property when present, otherwise the same-function aggregate from the
/// level below (mean of means, max of maxes, ...).
fn value_for(event: &MetricEvent, base: &str, f: AggFunction) -> Option<f64> {
    event
        .get(base)
        .or_else(|| event.get(&format!("{base}_{}", f.name())))
}

/// Consumer+producer summarizer. Windows are aligned, non-overlapping,
/// closed-open intervals over event *arrival* times.
#[derive(Debug)]
pub struct Republisher {
    pub spec: AggregationSpec,
    /// Base property names to summarize.
    pub wanted: Vec<String>,
    /// Level stamped on empty-window markers.
    pub default_level: u32,
    buffer: Vec<(SimTime, MetricEvent)>,
    pub history: Vec<WindowAggregate>,
}

impl Republisher {
    pub fn new(spec: AggregationSpec, wanted: Vec<String>, default_level: u32) -> Republisher {
        Republisher {
            spec,
            wanted,
            default_level,
            buffer: Vec::new(),
            history: Vec::new(),
        }
    }

    pub fn ingest(&mut self, arrival: SimTime, event: MetricEvent) {
        self.buffer.push((arrival, event));
    }

    pub fn reset(&mut self) {
        self.buffer.clear();
        self.history.clear();
    }

    /// Close the window ending at `close`, emitting one summary event per
    /// group. An empty window emits a single `<p>_count=0` marker.
    pub fn close_window(&mut self, close: SimTime, self_id: &ActorId) -> Vec<MetricEvent> {
        let open = SimTime::from_millis(close.millis().saturating_sub(self.spec.window_ms));
        let mut in_window = Vec::new();
        let mut rest = Vec::new();
        for (arrival, ev) in self.buffer.drain(..) {
            if arrival >= open && arrival < close {
                in_window.push(ev);
            } else if arrival >= close {
                rest.push((arrival, ev));
            }
            // Older events belong to already-closed windows: discard.
        }
        self.buffer = rest;

        let mut emitted = Vec::new();
        if in_window.is_empty() {
            let mut ev = MetricEvent::new(self_id.clone(), close, self.default_level);
            for base in &self.wanted {
                ev.push(&format!("{base}_count"), 0.0).ok();
            }
            emitted.push(ev);
        } else {
            match self.spec.group_by {
                GroupBy::Property => {
                    let refs: Vec<&MetricEvent> = in_window.iter().collect();
                    emitted.push(self.summarize(&refs, self_id.clone(), close));
                }
                GroupBy::Source => {
                    let mut sources: Vec<ActorId> =
                        in_window.iter().map(|e| e.source.clone()).collect();
                    sources.sort();
                    sources.dedup();
                    for src in sources {
                        let refs: Vec<&MetricEvent> =
                            in_window.iter().filter(|e| e.source == src).collect();
                        emitted.push(self.summarize(&refs, src, close));
                    }
                }
            }
        }
        self.history.push(WindowAggregate {
            close,
            inputs: in_window.len(),
            emitted: emitted.clone(),
        });
        if !emitted.is_empty() {
            self.default_level = emitted[0].level;
        }
        emitted
    }

    fn summarize(&self, events: &[&MetricEvent], source: ActorId, close: SimTime) -> MetricEvent {
        let level = events.iter().map(|e| e.level).max().unwrap_or(0) + 1;
        let mut out = MetricEvent::new(source, close, level);
        for base in &self.wanted {
            let covering: Vec<&&MetricEvent> =
                events.iter().filter(|e| covers(e, base)).collect();
            if covering.is_empty() {
                out.push(&format!("{base}_count"), 0.0).ok();
                continue;
            }
            for f in &self.spec.functions {
                let name = format!("{base}_{}", f.name());
                match f {
                    AggFunction::Count => {
                        out.push(&name, covering.len() as f64).ok();
                    }
                    AggFunction::Mean => {
                        let vals: Vec<f64> = covering
                            .iter()
                            .filter_map(|e| value_for(e, base, AggFunction::Mean))
                            .collect();
                        if !vals.is_empty() {
                            out.push(&name, vals.iter().sum::<f64>() / vals.len() as f64)
                                .ok();
                        }
                    }
                    AggFunction::Max => {
                        if let Some(v) = covering
                            .iter()
                            .filter_map(|e| value_for(e, base, AggFunction::Max))
                            .fold(None::<f64>, |acc, v| {
                                Some(acc.map_or(v, |a| a.max(v)))
                            })
                        {
                            out.push(&name, v).ok();
                        }
                    }
                    AggFunction::Min => {
                        if let Some(v) = covering
                            .iter()
                            .filter_map(|e| value_for(e, base, AggFunction::Min))
                            .fold(None::<f64>, |acc, v| {
                                Some(acc.map_or(v, |a| a.min(v)))
                            })
                        {
                            out.push(&name, v).ok();
                        }
                    }
                    AggFunction::Last => {
                        let mut best: Option<(SimTime, f64)> = None;
                        for e in &covering {
                            if let Some(v) = value_for(e, base, AggFunction::Last) {
                                // Later timestamp wins; ties take the later arrival.
                                if best.is_none_or(|(t, _)| e.timestamp >= t) {
                                    best = Some((e.timestamp, v));
                                }
                            }
                        }
                        if let Some((_, v)) = best {
                            out.push(&name, v).ok();
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(ms: u64) -> SimTime {
        SimTime::from_millis(ms)
    }

    fn ep(s: &str) -> EndpointId {
        EndpointId::parse(s)
    }

    fn producer_reg(subject: &str, names: &[&str], ttl: u64) -> Registration {
        Registration {
            subject: ep(subject),
            kind: RegKind::Producer,
            names: names.iter().map(|s| s.to_string()).collect(),
            ttl_ms: ttl,
        }
    }

    #[test]
    fn lookup_within_ttl_and_expiry() {
        let mut dir = Directory::new();
        dir.register(producer_reg("p1/sensor", &["cpu"], 5000), t(0));
        let wanted = vec!["cpu".to_string()];
        assert_eq!(dir.lookup(&wanted, t(4000)).len(), 1);
        assert_eq!(dir.lookup(&wanted, t(6000)).len(), 0);
    }

    #[test]
    fn ttl_boundary_is_exclusive() {
        let mut dir = Directory::new();
        dir.register(producer_reg("p1/sensor", &["cpu"], 5000), t(0));
        let wanted = vec!["cpu".to_string()];
        assert_eq!(dir.lookup(&wanted, t(4999)).len(), 1);
        assert_eq!(dir.lookup(&wanted, t(5000)).len(), 0);
    }

    #[test]
    fn refresh_resets_clock() {
        let mut dir = Directory::new();
        let id1 = dir.register(producer_reg("p1/sensor", &["cpu"], 5000), t(0));
        let id2 = dir.register(producer_reg("p1/sensor", &["cpu"], 5000), t(4000));
        assert_eq!(id1, id2);
        let wanted = vec!["cpu".to_string()];
        assert_eq!(dir.lookup(&wanted, t(8000)).len(), 1);
        assert_eq!(dir.lookup(&wanted, t(9000)).len(), 0);
    }

    #[test]
    fn lookup_intersects_offered_sets() {
        let mut dir = Directory::new();
        dir.register(producer_reg("p1/sensor", &["cpu"], 5000), t(0));
        dir.register(producer_reg("p2/sensor", &["mem"], 5000), t(0));
        let cpu = dir.lookup(&["cpu".to_string()], t(100));
        assert_eq!(cpu, vec![ep("p1/sensor")]);
        assert!(dir.lookup(&["disk".to_string()], t(100)).is_empty());
    }

    // Brute-force oracle: expected result is an independent scan of the
    // registration table in insertion order.
    #[test]
    fn lookup_returns_all_matches_in_registration_order() {
        let mut dir = Directory::new();
        let subjects = ["p3/sensor", "p1/sensor", "p2/sensor"];
        for s in subjects {
            dir.register(producer_reg(s, &["cpu"], 5000), t(0));
        }
        let expected: Vec<EndpointId> = subjects.iter().map(|s| ep(s)).collect();
        assert_eq!(dir.lookup(&["cpu".to_string()], t(10)), expected);
    }

    #[test]
    fn consumers_not_returned_by_lookup() {
        let mut dir = Directory::new();
        dir.register(
            Registration {
                subject: ep("c1/mon"),
                kind: RegKind::Consumer,
                names: vec!["cpu".to_string()],
                ttl_ms: 5000,
            },
            t(0),
        );
        assert!(dir.lookup(&["cpu".to_string()], t(10)).is_empty());
    }

    fn mean_count_spec(window: u64) -> AggregationSpec {
        AggregationSpec {
            window_ms: window,
            ..AggregationSpec::default()
        }
    }

    fn raw(src: &str, ts: u64, cpu: f64) -> MetricEvent {
        MetricEvent::new(ActorId::new(src), t(ts), 0).with("cpu", cpu)
    }

    #[test]
    fn mean_over_window() {
        let mut rep = Republisher::new(mean_count_spec(5000), vec!["cpu".into()], 1);
        rep.ingest(t(1000), raw("n1", 1000, 0.2));
        rep.ingest(t(2000), raw("n2", 2000, 0.4));
        let out = rep.close_window(t(5000), &ActorId::new("m1"));
        assert_eq!(out.len(), 1);
        assert!((out[0].get("cpu_mean").unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(out[0].get("cpu_count"), Some(2.0));
        assert_eq!(out[0].level, 1);
    }

    #[test]
    fn empty_window_emits_count_zero_only() {
        let mut rep = Republisher::new(mean_count_spec(5000), vec!["cpu".into()], 1);
        let out = rep.close_window(t(5000), &ActorId::new("m1"));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].get("cpu_count"), Some(0.0));
        assert_eq!(out[0].get("cpu_mean"), None);
        assert_eq!(out[0].level, 1);
    }

    #[test]
    fn window_is_closed_open_on_arrival() {
        let mut rep = Republisher::new(mean_count_spec(5000), vec!["cpu".into()], 1);
        rep.ingest(t(0), raw("n1", 0, 1.0));
        rep.ingest(t(4999), raw("n1", 4999, 1.0));
        rep.ingest(t(5000), raw("n1", 5000, 7.0)); // next window
        let out = rep.close_window(t(5000), &ActorId::new("m1"));
        assert_eq!(out[0].get("cpu_count"), Some(2.0));
        let out2 = rep.close_window(t(10_000), &ActorId::new("m1"));
        assert_eq!(out2[0].get("cpu_count"), Some(1.0));
        assert_eq!(out2[0].get("cpu_mean"), Some(7.0));
    }

    #[test]
    fn level_is_max_input_plus_one() {
        let mut rep = Republisher::new(mean_count_spec(5000), vec!["cpu".into()], 1);
        rep.ingest(t(100), raw("n1", 100, 0.5));
        let agg = MetricEvent::new(ActorId::new("sub"), t(200), 1).with("cpu_mean", 0.25);
        rep.ingest(t(200), agg);
        let out = rep.close_window(t(5000), &ActorId::new("m1"));
        assert_eq!(out[0].level, 2);
        // Mean of means: raw 0.5 and sub-aggregate 0.25.
        assert!((out[0].get("cpu_mean").unwrap() - 0.375).abs() < 1e-12);
        assert_eq!(out[0].get("cpu_count"), Some(2.0));
    }

    #[test]
    fn group_by_source_emits_one_event_per_source() {
        let spec = AggregationSpec {
            group_by: GroupBy::Source,
            ..mean_count_spec(5000)
        };
        let mut rep = Republisher::new(spec, vec!["cpu".into()], 1);
        rep.ingest(t(100), raw("n2", 100, 0.4));
        rep.ingest(t(200), raw("n1", 200, 0.2));
        rep.ingest(t(300), raw("n1", 300, 0.6));
        let out = rep.close_window(t(5000), &ActorId::new("m1"));
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].source, ActorId::new("n1"));
        assert!((out[0].get("cpu_mean").unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(out[1].source, ActorId::new("n2"));
        assert_eq!(out[1].get("cpu_count"), Some(1.0));
    }

    #[test]
    fn max_min_last_functions() {
        let mut functions = BTreeSet::new();
        functions.insert(AggFunction::Max);
        functions.insert(AggFunction::Min);
        functions.insert(AggFunction::Last);
        let spec = AggregationSpec {
            window_ms: 5000,
            functions,
            group_by: GroupBy::Property,
        };
        let mut rep = Republisher::new(spec, vec!["cpu".into()], 1);
        rep.ingest(t(100), raw("n1", 100, 0.9));
        rep.ingest(t(200), raw("n2", 200, 0.1));
        rep.ingest(t(300), raw("n1", 300, 0.5));
        let out = rep.close_window(t(5000), &ActorId::new("m1"));
        assert_eq!(out[0].get("cpu_max"), Some(0.9));
        assert_eq!(out[0].get("cpu_min"), Some(0.1));
        assert_eq!(out[0].get("cpu_last"), Some(0.5));
    }

    #[test]
    fn duplicate_property_rejected() {
        let mut ev = MetricEvent::new(ActorId::new("n1"), t(0), 0);
        ev.push("cpu", 0.5).unwrap();
        assert!(ev.push("cpu", 0.7).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(AggregationSpec::default().validate().is_ok());
        let bad = AggregationSpec {
            window_ms: 0,
            ..AggregationSpec::default()
        };
        assert!(bad.validate().is_err());
        let empty = AggregationSpec {
            functions: BTreeSet::new(),
            ..AggregationSpec::default()
        };
        assert!(empty.validate().is_err());
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        // Soft-state equivalence: a subject is visible at t iff some refresh
        // happened in (t - ttl, t], checked against an independent scan of
        // the refresh history.
        #[test]
        fn visibility_matches_refresh_window(
            ttl in 1u64..10_000,
            refreshes in proptest::collection::btree_set(0u64..50_000, 1..20),
            queries in proptest::collection::vec(0u64..60_000, 1..40),
        ) {
            let subject = EndpointId::parse("p/sensor");
            let reg = |_at: u64| Registration {
                subject: subject.clone(),
                kind: RegKind::Producer,
                names: vec!["cpu".to_string()],
                ttl_ms: ttl,
            };
            let refreshes: Vec<u64> = refreshes.into_iter().collect();
            let wanted = vec!["cpu".to_string()];
            for &t in &queries {
                // Replay refreshes up to the query instant.
                let mut dir = Directory::new();
                for &r in refreshes.iter().filter(|&&r| r <= t) {
                    dir.register(reg(r), SimTime::from_millis(r));
                }
                let visible = !dir.lookup(&wanted, SimTime::from_millis(t)).is_empty();
                let expected = refreshes.iter().any(|&r| r <= t && t - r < ttl);
                prop_assert_eq!(visible, expected, "t={} ttl={} refreshes={:?}", t, ttl, refreshes);
            }
        }
    }
}
