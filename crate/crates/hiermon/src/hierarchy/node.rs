//! Leaf node runtime: heartbeat emitter, factory, local sensor, local
//! actuator. The same runtime is embedded in mirrors for their
//! managed-node side.

use std::collections::BTreeMap;

use crate::control::SensorSpec;
use crate::fabric::{Actor, ActorId, Context};
use crate::gma::{MetricEvent, ProducerState};
use crate::membership::HeartbeatConfig;
use crate::protocol::{AppId, Capacity, EndpointId, Msg};

#[derive(Debug, Clone)]
pub struct NodeConfig {
    pub id: ActorId,
    /// Heartbeat target; heartbeats follow reattachment.
    pub manager: Option<ActorId>,
    /// Directory the local sensor producer registers with.
    pub registry: Option<ActorId>,
    pub capacity: Capacity,
    pub heartbeat: HeartbeatConfig,
    pub sensor: SensorSpec,
    pub refresh_ms: u64,
    pub ttl_ms: u64,
}

/// Node-side services, embeddable in a leaf actor or a mirror.
#[derive(Debug)]
pub struct NodeRuntime {
    pub cfg: NodeConfig,
    pub producer: ProducerState,
    pub installed: BTreeMap<AppId, (Capacity, Vec<(String, String)>)>,
    /// Tunable node properties applied by the local actuator.
    pub properties: BTreeMap<String, f64>,
    pub stopped: bool,
}

impl NodeRuntime {
    pub fn new(cfg: NodeConfig) -> NodeRuntime {
        let endpoint = EndpointId::new(&cfg.id, "sensor");
        let producer = ProducerState::new(endpoint, vec![cfg.sensor.metric.clone()], cfg.ttl_ms);
        NodeRuntime {
            cfg,
            producer,
            installed: BTreeMap::new(),
            properties: BTreeMap::new(),
            stopped: false,
        }
    }

    pub fn start(&mut self, ctx: &mut Context<'_, Msg>) {
        self.emit_heartbeat(ctx);
        ctx.schedule(self.cfg.heartbeat.period_ms, Msg::HeartbeatTick);
        self.sense(ctx);
        ctx.schedule(self.cfg.sensor.period_ms, Msg::SensorTick);
        self.register(ctx);
        ctx.schedule(self.cfg.refresh_ms, Msg::DiscoveryTick);
    }

    /// Restart semantics: volatile state is gone, configuration survives.
    pub fn reset(&mut self) {
        self.installed.clear();
        self.properties.clear();
        self.producer.reset();
        self.stopped = false;
    }

    pub fn register(&mut self, ctx: &mut Context<'_, Msg>) {
        if self.stopped {
            return;
        }
        if let Some(registry) = self.cfg.registry.clone() {
            ctx.send(&registry, self.producer.registration());
        }
    }

    pub fn emit_heartbeat(&mut self, ctx: &mut Context<'_, Msg>) {
        if self.stopped {
            return;
        }
        if let Some(manager) = self.cfg.manager.clone() {
            ctx.send(
                &manager,
                Msg::Heartbeat {
                    node: self.cfg.id.clone(),
                    capacity: self.cfg.capacity.clone(),
                },
            );
        }
    }

    /// Synthetic CPU reading: installed demand over total capacity, plus
    /// optional seeded noise, clamped to [0, 1].
    pub fn reading(&self, ctx: &mut Context<'_, Msg>) -> f64 {
        let dim = &self.cfg.sensor.metric;
        let total = self.cfg.capacity.get(dim);
        let used: u64 = self.installed.values().map(|(d, _)| d.get(dim)).sum();
        let mut value = if total == 0 {
            0.0
        } else {
            used as f64 / total as f64
        };
        let amp = self.cfg.sensor.noise_amplitude;
        if amp > 0.0 {
            value += amp * (2.0 * ctx.rng().next_f64() - 1.0);
        }
        value.clamp(0.0, 1.0)
    }

    /// Emit one level-0 metric event through the producer.
    pub fn sense(&mut self, ctx: &mut Context<'_, Msg>) {
        if self.stopped {
            return;
        }
        let value = self.reading(ctx);
        let event = MetricEvent::new(self.cfg.id.clone(), ctx.now(), 0)
            .with(&self.cfg.sensor.metric, value);
        self.producer.publish(ctx, event);
    }

    /// Handle node-side messages; returns false when the message is not a
    /// node-side concern.
    pub fn handle(&mut self, ctx: &mut Context<'_, Msg>, from: &ActorId, msg: &Msg) -> bool {
        match msg {
            Msg::Install {
                app,
                demand,
                params,
                ..
            } => {
                if !self.stopped {
                    self.installed
                        .insert(app.clone(), (demand.clone(), params.clone()));
                    ctx.send(from, Msg::InstallAck { app: app.clone() });
                }
                true
            }
            Msg::Uninstall { app, .. } => {
                self.installed.remove(app);
                true
            }
            Msg::TuneParam { name, value, .. } => {
                self.properties.insert(name.clone(), *value);
                ctx.send(
                    from,
                    Msg::TuneAck {
                        name: name.clone(),
                        value: *value,
                    },
                );
                true
            }
            Msg::SetManager { manager } => {
                self.cfg.manager = Some(manager.clone());
                true
            }
            Msg::StopNode => {
                self.stopped = true;
                true
            }
            Msg::Subscribe {
                producer,
                subscriber,
            } => {
                if *producer == self.producer.endpoint {
                    self.producer.subscribe(subscriber.clone());
                    true
                } else {
                    false
                }
            }
            Msg::QueryLatest { producer, reply_to }
                if *producer == self.producer.endpoint => {
                    self.producer.answer_query(ctx, reply_to);
                    true
                }
            _ => false,
        }
    }

    /// Handle node-side timers; returns false for foreign timers.
    pub fn handle_timer(&mut self, ctx: &mut Context<'_, Msg>, msg: &Msg) -> bool {
        match msg {
            Msg::HeartbeatTick => {
                self.emit_heartbeat(ctx);
                if !self.stopped {
                    ctx.schedule(self.cfg.heartbeat.period_ms, Msg::HeartbeatTick);
                }
                true
            }
            Msg::SensorTick => {
                self.sense(ctx);
                if !self.stopped {
                    ctx.schedule(self.cfg.sensor.period_ms, Msg::SensorTick);
                }
                true
            }
            Msg::DiscoveryTick => {
                self.register(ctx);
                if !self.stopped {
                    ctx.schedule(self.cfg.refresh_ms, Msg::DiscoveryTick);
                }
                true
            }
            _ => false,
        }
    }

}

/// A leaf node as a fabric actor.
pub struct NodeActor {
    pub rt: NodeRuntime,
}

impl NodeActor {
    pub fn new(cfg: NodeConfig) -> NodeActor {
        NodeActor {
            rt: NodeRuntime::new(cfg),
        }
    }
}

impl Actor<Msg> for NodeActor {
    fn on_start(&mut self, ctx: &mut Context<'_, Msg>) {
        self.rt.start(ctx);
    }

    fn on_restart(&mut self, ctx: &mut Context<'_, Msg>) {
        self.rt.reset();
        self.rt.start(ctx);
    }

    fn on_message(&mut self, ctx: &mut Context<'_, Msg>, from: &ActorId, msg: Msg) {
        self.rt.handle(ctx, from, &msg);
    }

    fn on_timer(&mut self, ctx: &mut Context<'_, Msg>, msg: Msg) {
        self.rt.handle_timer(ctx, &msg);
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}
