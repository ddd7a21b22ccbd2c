//! Deterministic discrete-event simulation substrate.
//!
//! The fabric owns a virtual clock, a single event queue, the registered
//! actors, the link table and fault state, one seeded random source, and the
//! event trace. A run is driven by [`Fabric::run_until`], which pops events
//! in `(deliver_time, sequence)` order and invokes exactly one actor handler
//! at a time. For a fixed topology, scenario, and seed, two runs produce
//! identical traces.
//!
//! Ordering rules:
//! * events at equal time are processed in ascending global sequence number
//!   (assignment order), so zero-delay messages and timers land after
//!   everything already queued for that instant;
//! * injected fault events (crash/restart) at time `t` apply after all
//!   message and timer traffic at `t`.
//!
//! Loss and partition drops are decided and recorded at send time; drops for
//! crashed, stale, or unknown targets are recorded at delivery time. A send
//! over a link with a nonzero drop rate consumes exactly one draw from the
//! fabric generator, which is what lets tests replay loss decisions.

mod rng;
mod trace;

pub use rng::DeterministicRng;
pub use trace::{EventTrace, TraceKind, TraceRecord};

use std::any::Any;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Virtual time in whole milliseconds.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_millis(ms: u64) -> SimTime {
        SimTime(ms)
    }

    pub fn millis(self) -> u64 {
        self.0
    }

    pub fn saturating_sub(self, other: SimTime) -> u64 {
        self.0.saturating_sub(other.0)
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;
    fn add(self, ms: u64) -> SimTime {
        SimTime(self.0 + ms)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Name of an actor on the fabric.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ActorId(String);

impl ActorId {
    pub fn new(name: impl Into<String>) -> ActorId {
        ActorId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ActorId {
    fn from(s: &str) -> ActorId {
        ActorId(s.to_string())
    }
}

/// Messages carried by the fabric must summarize themselves for the trace.
pub trait Payload: Clone + fmt::Debug + 'static {
    /// One-line summary; must not contain tabs or newlines.
    fn summary(&self) -> String;
}

/// Handle for a scheduled timer, usable for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimerId(u64);

/// An in-flight message.
#[derive(Debug, Clone)]
pub struct Envelope<M> {
    pub from: ActorId,
    pub to: ActorId,
    pub payload: M,
    pub send_time: SimTime,
    pub deliver_time: SimTime,
}

/// Fault injection directives.
#[derive(Debug, Clone)]
pub enum FaultSpec {
    /// Actor stops processing events after (not at) `at`. Permanent unless a
    /// `Restart` follows.
    Crash { actor: ActorId, at: SimTime },
    /// Actor resumes with volatile state cleared; pre-crash timers stay dead.
    Restart { actor: ActorId, at: SimTime },
    /// Directed per-link loss probability in `[0, 1]`.
    DropRate { from: ActorId, to: ActorId, rate: f64 },
    /// Messages between the two groups are dropped while `from <= now < until`.
    Partition {
        group_a: Vec<ActorId>,
        group_b: Vec<ActorId>,
        from: SimTime,
        until: SimTime,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct LinkConfig {
    pub latency_ms: u64,
    pub drop_rate: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            latency_ms: 10,
            drop_rate: 0.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum FabricError {
    #[error("unknown actor {0}")]
    UnknownActor(ActorId),
    #[error("duplicate actor {0}")]
    DuplicateActor(ActorId),
    #[error("drop rate {0} outside [0, 1]")]
    BadDropRate(f64),
}

/// An actor's event handlers. Handlers must not block; all interaction with
/// the rest of the system goes through the [`Context`].
pub trait Actor<M: Payload>: Any {
    /// Invoked once when the actor is spawned, at the current virtual time.
    fn on_start(&mut self, _ctx: &mut Context<'_, M>) {}

    /// Invoked after a restart fault. Implementations reset volatile state
    /// here; the default re-runs `on_start`.
    fn on_restart(&mut self, ctx: &mut Context<'_, M>) {
        self.on_start(ctx);
    }

    fn on_message(&mut self, ctx: &mut Context<'_, M>, from: &ActorId, msg: M);

    fn on_timer(&mut self, ctx: &mut Context<'_, M>, msg: M);

    fn as_any(&self) -> &dyn Any;
}

#[derive(Debug)]
enum EventItem<M> {
    Deliver(Envelope<M>),
    Timer {
        actor: ActorId,
        incarnation: u32,
        timer: TimerId,
        msg: M,
    },
    Crash(ActorId),
    Restart(ActorId),
}

struct QueuedEvent<M> {
    time: SimTime,
    // 0 = regular traffic, 1 = injected fault; faults apply after traffic
    // at the same instant.
    class: u8,
    seq: u64,
    item: EventItem<M>,
}

impl<M> PartialEq for QueuedEvent<M> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl<M> Eq for QueuedEvent<M> {}
impl<M> PartialOrd for QueuedEvent<M> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<M> Ord for QueuedEvent<M> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.class, self.seq).cmp(&(other.time, other.class, other.seq))
    }
}

struct ActorSlot<M: Payload> {
    actor: Option<Box<dyn Actor<M>>>,
    alive: bool,
    incarnation: u32,
}

struct Partition {
    group_a: BTreeSet<ActorId>,
    group_b: BTreeSet<ActorId>,
    from: SimTime,
    until: SimTime,
}

impl Partition {
    fn blocks(&self, now: SimTime, from: &ActorId, to: &ActorId) -> bool {
        if now < self.from || now >= self.until {
            return false;
        }
        (self.group_a.contains(from) && self.group_b.contains(to))
            || (self.group_b.contains(from) && self.group_a.contains(to))
    }
}

/// Everything an actor handler may touch while running. Splitting this off
/// from the actor map lets the fabric hand out `&mut` access to queue, rng,
/// and trace while one actor is borrowed.
struct Core<M: Payload> {
    now: SimTime,
    seq: u64,
    next_timer: u64,
    queue: BinaryHeap<Reverse<QueuedEvent<M>>>,
    default_link: LinkConfig,
    links: BTreeMap<(ActorId, ActorId), LinkConfig>,
    partitions: Vec<Partition>,
    rng: DeterministicRng,
    trace: EventTrace,
    cancelled: HashSet<u64>,
}

impl<M: Payload> Core<M> {
    fn push(&mut self, time: SimTime, class: u8, item: EventItem<M>) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(Reverse(QueuedEvent {
            time,
            class,
            seq,
            item,
        }));
    }

    fn record(
        &mut self,
        kind: TraceKind,
        from: impl Into<String>,
        to: impl Into<String>,
        payload: impl Into<String>,
        reason: impl Into<String>,
    ) {
        self.trace.push(TraceRecord {
            time: self.now,
            kind,
            from: from.into(),
            to: to.into(),
            payload: payload.into(),
            reason: reason.into(),
        });
    }

    fn link(&self, from: &ActorId, to: &ActorId) -> LinkConfig {
        self.links
            .get(&(from.clone(), to.clone()))
            .copied()
            .unwrap_or(self.default_link)
    }

    /// Queue a send, deciding loss and partitions now. Returns the envelope's
    /// deliver time when it was actually queued.
    fn send(&mut self, from: &ActorId, to: &ActorId, msg: M) -> Option<SimTime> {
        let link = self.link(from, to);
        let summary = msg.summary();
        for p in &self.partitions {
            if p.blocks(self.now, from, to) {
                self.record(
                    TraceKind::Drop,
                    from.as_str(),
                    to.as_str(),
                    summary,
                    "partition",
                );
                return None;
            }
        }
        if link.drop_rate > 0.0 && self.rng.next_f64() < link.drop_rate {
            self.record(TraceKind::Drop, from.as_str(), to.as_str(), summary, "loss");
            return None;
        }
        let deliver = self.now + link.latency_ms;
        self.push(
            deliver,
            0,
            EventItem::Deliver(Envelope {
                from: from.clone(),
                to: to.clone(),
                payload: msg,
                send_time: self.now,
                deliver_time: deliver,
            }),
        );
        Some(deliver)
    }

    fn schedule(&mut self, actor: &ActorId, incarnation: u32, delay: u64, msg: M) -> TimerId {
        let timer = TimerId(self.next_timer);
        self.next_timer += 1;
        let at = self.now + delay;
        self.push(
            at,
            0,
            EventItem::Timer {
                actor: actor.clone(),
                incarnation,
                timer,
                msg,
            },
        );
        timer
    }
}

/// Handler-side view of the fabric.
pub struct Context<'a, M: Payload> {
    id: ActorId,
    incarnation: u32,
    core: &'a mut Core<M>,
}

impl<'a, M: Payload> Context<'a, M> {
    pub fn now(&self) -> SimTime {
        self.core.now
    }

    pub fn self_id(&self) -> &ActorId {
        &self.id
    }

    /// One-way send; loss and partition faults may drop it (recorded in the
    /// trace), never an error for the sender.
    pub fn send(&mut self, to: &ActorId, msg: M) {
        let from = self.id.clone();
        self.core.send(&from, to, msg);
    }

    /// Schedule a timer for this actor. Timers die with the incarnation that
    /// created them.
    pub fn schedule(&mut self, delay_ms: u64, msg: M) -> TimerId {
        let id = self.id.clone();
        self.core.schedule(&id, self.incarnation, delay_ms, msg)
    }

    pub fn cancel(&mut self, timer: TimerId) {
        self.core.cancelled.insert(timer.0);
    }

    pub fn rng(&mut self) -> &mut DeterministicRng {
        &mut self.core.rng
    }

    /// Append a `note` record attributed to this actor.
    pub fn note(&mut self, payload: impl Into<String>) {
        let id = self.id.as_str().to_string();
        self.core.record(TraceKind::Note, id, "-", payload, "");
    }
}

/// The simulation fabric. See module docs for the semantics.
pub struct Fabric<M: Payload> {
    core: Core<M>,
    actors: BTreeMap<ActorId, ActorSlot<M>>,
}

impl<M: Payload> Fabric<M> {
    pub fn new(seed: u64) -> Fabric<M> {
        Fabric::with_link(seed, LinkConfig::default())
    }

    pub fn with_link(seed: u64, default_link: LinkConfig) -> Fabric<M> {
        Fabric {
            core: Core {
                now: SimTime::ZERO,
                seq: 0,
                next_timer: 0,
                queue: BinaryHeap::new(),
                default_link,
                links: BTreeMap::new(),
                partitions: Vec::new(),
                rng: DeterministicRng::new(seed),
                trace: EventTrace::new(),
                cancelled: HashSet::new(),
            },
            actors: BTreeMap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.core.now
    }

    pub fn trace(&self) -> &EventTrace {
        &self.core.trace
    }

    pub fn set_link(&mut self, from: &ActorId, to: &ActorId, link: LinkConfig) {
        self.core.links.insert((from.clone(), to.clone()), link);
    }

    /// Register an actor and run its `on_start` at the current time.
    pub fn spawn(
        &mut self,
        id: ActorId,
        actor: Box<dyn Actor<M>>,
    ) -> Result<(), FabricError> {
        if self.actors.contains_key(&id) {
            return Err(FabricError::DuplicateActor(id));
        }
        self.actors.insert(
            id.clone(),
            ActorSlot {
                actor: Some(actor),
                alive: true,
                incarnation: 0,
            },
        );
        self.dispatch(&id, Dispatch::Start);
        Ok(())
    }

    pub fn has_actor(&self, id: &ActorId) -> bool {
        self.actors.contains_key(id)
    }

    /// Borrow an actor's state, downcast to its concrete type. Used by the
    /// report builder and tests after (or between) runs.
    pub fn actor_state<T: 'static>(&self, id: &ActorId) -> Option<&T> {
        self.actors
            .get(id)?
            .actor
            .as_ref()?
            .as_any()
            .downcast_ref::<T>()
    }

    pub fn actor_alive(&self, id: &ActorId) -> bool {
        self.actors.get(id).map(|s| s.alive).unwrap_or(false)
    }

    pub fn cancel(&mut self, timer: TimerId) {
        self.core.cancelled.insert(timer.0);
    }

    /// Schedule a timer-style delivery for any registered actor.
    pub fn schedule(
        &mut self,
        actor: &ActorId,
        delay_ms: u64,
        msg: M,
    ) -> Result<TimerId, FabricError> {
        let slot = self
            .actors
            .get(actor)
            .ok_or_else(|| FabricError::UnknownActor(actor.clone()))?;
        let inc = slot.incarnation;
        Ok(self.core.schedule(actor, inc, delay_ms, msg))
    }

    /// Queue a message from outside the actor system (e.g. the scenario
    /// runner), delivered exactly at `at` with no link effects.
    pub fn inject(&mut self, at: SimTime, from_label: &str, to: &ActorId, msg: M) {
        debug_assert!(at >= self.core.now);
        self.core.push(
            at,
            0,
            EventItem::Deliver(Envelope {
                from: ActorId::new(from_label),
                to: to.clone(),
                payload: msg,
                send_time: self.core.now,
                deliver_time: at,
            }),
        );
    }

    /// Send between registered actors at the current time, applying link
    /// latency and the fault model. Unknown destinations are recorded as
    /// undeliverable at delivery time.
    pub fn send(&mut self, from: &ActorId, to: &ActorId, msg: M) {
        self.core.send(from, to, msg);
    }

    pub fn inject_fault(&mut self, fault: FaultSpec) -> Result<(), FabricError> {
        match fault {
            FaultSpec::Crash { actor, at } => {
                self.core.push(at, 1, EventItem::Crash(actor));
            }
            FaultSpec::Restart { actor, at } => {
                self.core.push(at, 1, EventItem::Restart(actor));
            }
            FaultSpec::DropRate { from, to, rate } => {
                if !(0.0..=1.0).contains(&rate) {
                    return Err(FabricError::BadDropRate(rate));
                }
                let mut link = self.core.link(&from, &to);
                link.drop_rate = rate;
                self.core.links.insert((from, to), link);
            }
            FaultSpec::Partition {
                group_a,
                group_b,
                from,
                until,
            } => {
                self.core.partitions.push(Partition {
                    group_a: group_a.into_iter().collect(),
                    group_b: group_b.into_iter().collect(),
                    from,
                    until,
                });
            }
        }
        Ok(())
    }

    /// Append a note attributed to the harness rather than an actor.
    pub fn note(&mut self, from_label: &str, payload: impl Into<String>) {
        self.core
            .record(TraceKind::Note, from_label, "-", payload, "");
    }

    /// Process all events with `deliver_time <= t`, advance the clock to `t`,
    /// and return the trace so far. Calls with `t` in the past are no-ops.
    pub fn run_until(&mut self, t: SimTime) -> &EventTrace {
        while let Some(Reverse(head)) = self.core.queue.peek() {
            if head.time > t {
                break;
            }
            let Reverse(ev) = self.core.queue.pop().expect("peeked");
            debug_assert!(ev.time >= self.core.now);
            self.core.now = ev.time;
            self.process(ev);
        }
        if t > self.core.now {
            self.core.now = t;
        }
        &self.core.trace
    }

    fn process(&mut self, ev: QueuedEvent<M>) {
        match ev.item {
            EventItem::Deliver(env) => {
                let summary = env.payload.summary();
                match self.actors.get(&env.to) {
                    None => {
                        self.core.record(
                            TraceKind::Drop,
                            env.from.as_str(),
                            env.to.as_str(),
                            summary,
                            "undeliverable",
                        );
                    }
                    Some(slot) if !slot.alive => {
                        self.core.record(
                            TraceKind::Drop,
                            env.from.as_str(),
                            env.to.as_str(),
                            summary,
                            "crashed",
                        );
                    }
                    Some(_) => {
                        self.core.record(
                            TraceKind::Deliver,
                            env.from.as_str(),
                            env.to.as_str(),
                            summary,
                            "",
                        );
                        self.dispatch(&env.to.clone(), Dispatch::Message(env.from, env.payload));
                    }
                }
            }
            EventItem::Timer {
                actor,
                incarnation,
                timer,
                msg,
            } => {
                if self.core.cancelled.remove(&timer.0) {
                    return;
                }
                let summary = msg.summary();
                match self.actors.get(&actor) {
                    None => {
                        self.core.record(
                            TraceKind::Drop,
                            actor.as_str(),
                            actor.as_str(),
                            summary,
                            "undeliverable",
                        );
                    }
                    Some(slot) if !slot.alive => {
                        self.core.record(
                            TraceKind::Drop,
                            actor.as_str(),
                            actor.as_str(),
                            summary,
                            "crashed",
                        );
                    }
                    Some(slot) if slot.incarnation != incarnation => {
                        self.core.record(
                            TraceKind::Drop,
                            actor.as_str(),
                            actor.as_str(),
                            summary,
                            "stale",
                        );
                    }
                    Some(_) => {
                        self.core.record(
                            TraceKind::Timer,
                            actor.as_str(),
                            actor.as_str(),
                            summary,
                            "",
                        );
                        self.dispatch(&actor, Dispatch::Timer(msg));
                    }
                }
            }
            EventItem::Crash(actor) => {
                if let Some(slot) = self.actors.get_mut(&actor) {
                    if slot.alive {
                        slot.alive = false;
                        self.core
                            .record(TraceKind::Crash, "-", actor.as_str(), "crash", "fault");
                    }
                }
            }
            EventItem::Restart(actor) => {
                let revived = match self.actors.get_mut(&actor) {
                    Some(slot) if !slot.alive => {
                        slot.alive = true;
                        slot.incarnation += 1;
                        true
                    }
                    _ => false,
                };
                if revived {
                    self.core.record(
                        TraceKind::Restart,
                        "-",
                        actor.as_str(),
                        "restart",
                        "fault",
                    );
                    self.dispatch(&actor, Dispatch::Restart);
                }
            }
        }
    }

    fn dispatch(&mut self, id: &ActorId, what: Dispatch<M>) {
        let (mut actor, incarnation) = match self.actors.get_mut(id) {
            Some(slot) => match slot.actor.take() {
                Some(a) => (a, slot.incarnation),
                None => return,
            },
            None => return,
        };
        {
            let mut ctx = Context {
                id: id.clone(),
                incarnation,
                core: &mut self.core,
            };
            match what {
                Dispatch::Start => actor.on_start(&mut ctx),
                Dispatch::Restart => actor.on_restart(&mut ctx),
                Dispatch::Message(from, msg) => actor.on_message(&mut ctx, &from, msg),
                Dispatch::Timer(msg) => actor.on_timer(&mut ctx, msg),
            }
        }
        if let Some(slot) = self.actors.get_mut(id) {
            slot.actor = Some(actor);
        }
    }
}

enum Dispatch<M> {
    Start,
    Restart,
    Message(ActorId, M),
    Timer(M),
}
