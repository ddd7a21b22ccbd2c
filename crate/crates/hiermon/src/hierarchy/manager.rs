//! Boot and mirror managers.
//!
//! A manager hosts discovery (heartbeat table and sweep), the allocator and
//! deployer, the system representation, and a monitor (republisher, reactor,
//! actuator). Mirrors additionally embed the node-side runtime and behave as
//! a managed node toward their parent.
//!
//! Allocation requests resolve local-first: pick among available leaf
//! children; otherwise consult child managers (ascending id, skipping the
//! subtree the request came from); otherwise escalate to the parent; the
//! root denies with `exhausted`. The manager that received the original
//! escalation answers the origin directly with the terminal outcome, at
//! grant/deny time. Deployment records live at the granting manager, and
//! placements propagate to ancestors as system-domain sync messages.

use std::collections::BTreeMap;

use crate::allocation::{
    AllocEngine, AllocationPolicy, AllocationRequest, AllocationOutcome, RecordState,
};
use crate::control::{
    Action, ActionKind, Reactor, ReactorInput, ReactorRule, ResponseTemplate, TargetSel,
};
use crate::fabric::{Actor, ActorId, Context, TimerId};
use crate::gma::{AggregationSpec, ProducerState, RegKind, Registration, Republisher};
use crate::hierarchy::node::{NodeConfig, NodeRuntime};
use crate::hierarchy::system_rep::SystemRepresentation;
use crate::hierarchy::topology::NodeRole;
use crate::membership::{HeartbeatConfig, LifecycleEvent, MembershipTable, NodeStatus};
use crate::protocol::{AppId, Capacity, Domain, EndpointId, Msg};

pub struct ManagerConfig {
    pub id: ActorId,
    pub role: NodeRole,
    pub parent: Option<ActorId>,
    pub own_dir: ActorId,
    pub parent_dir: Option<ActorId>,
    /// Direct children that can host applications.
    pub leaf_children: Vec<ActorId>,
    /// Direct children that are managers, ascending id.
    pub manager_children: Vec<ActorId>,
    /// Descendant -> direct child hop, for routing commands downward.
    pub route: BTreeMap<ActorId, ActorId>,
    pub heartbeat: HeartbeatConfig,
    pub aggregation: AggregationSpec,
    pub metric: String,
    pub refresh_ms: u64,
    pub ttl_ms: u64,
    pub install_timeout_ms: u64,
    /// Upward forwarding cap; the hierarchy depth.
    pub max_hops: u32,
    pub rules: Vec<ReactorRule>,
    /// Level stamped on this manager's summaries (its leaf height).
    pub emitted_level: u32,
    /// Node-side runtime configuration; mirrors only.
    pub node_side: Option<NodeConfig>,
}

struct PendingInstall {
    node: ActorId,
    timer: TimerId,
    domain: Domain,
}

enum ConsultRespond {
    /// We received the escalated request: answer the origin when resolved.
    AsInitiator,
    /// We were consulted from above: answer the consulter.
    To(ActorId),
}

struct ConsultState {
    req: AllocationRequest,
    remaining: Vec<ActorId>,
    respond: ConsultRespond,
}

pub struct ManagerActor {
    pub cfg: ManagerConfig,
    pub membership: MembershipTable,
    pub alloc: AllocEngine,
    pub sysrep: SystemRepresentation,
    pub monitor: Republisher,
    pub rep_producer: ProducerState,
    reactor: Reactor,
    pub node_side: Option<NodeRuntime>,
    pending_installs: BTreeMap<AppId, PendingInstall>,
    consults: BTreeMap<AppId, ConsultState>,
}

impl ManagerActor {
    pub fn new(cfg: ManagerConfig, policy: Box<dyn AllocationPolicy>) -> ManagerActor {
        let monitor = Republisher::new(
            cfg.aggregation.clone(),
            vec![cfg.metric.clone()],
            cfg.emitted_level,
        );
        let rep_producer = ProducerState::new(
            EndpointId::new(&cfg.id, "rep"),
            vec![cfg.metric.clone()],
            cfg.ttl_ms,
        );
        let reactor = Reactor::new(cfg.rules.clone());
        let node_side = cfg.node_side.clone().map(NodeRuntime::new);
        ManagerActor {
            cfg,
            membership: MembershipTable::new(),
            alloc: AllocEngine::new(policy),
            sysrep: SystemRepresentation::new(),
            monitor,
            rep_producer,
            reactor,
            node_side,
            pending_installs: BTreeMap::new(),
            consults: BTreeMap::new(),
        }
    }

    // ---- monitoring plumbing ----

    fn register_all(&mut self, ctx: &mut Context<'_, Msg>) {
        // Consumer interest in the base metric, in the local directory.
        let own_dir = self.cfg.own_dir.clone();
        ctx.send(
            &own_dir,
            Msg::Register(Registration {
                subject: EndpointId::new(&self.cfg.id, "mon"),
                kind: RegKind::Consumer,
                names: vec![self.cfg.metric.clone()],
                ttl_ms: self.cfg.ttl_ms,
            }),
        );
        // Summaries offered to the parent's directory.
        if let Some(parent_dir) = self.cfg.parent_dir.clone() {
            ctx.send(&parent_dir, self.rep_producer.registration());
        }
        if let Some(ns) = &mut self.node_side {
            ns.register(ctx);
        }
    }

    fn discover(&mut self, ctx: &mut Context<'_, Msg>) {
        let own_dir = self.cfg.own_dir.clone();
        ctx.send(
            &own_dir,
            Msg::Lookup {
                wanted: vec![self.cfg.metric.clone()],
                reply_to: self.cfg.id.clone(),
            },
        );
    }

    // ---- audit helpers ----

    fn note_capacity(&self, ctx: &mut Context<'_, Msg>, node: &ActorId) {
        let total = self
            .membership
            .record(node)
            .map(|r| r.capacity.clone())
            .unwrap_or_default();
        let reserved = self.alloc.reserved_on(node);
        ctx.note(format!("capacity node={node} total={total} reserved={reserved}"));
    }

    fn note_record(&self, ctx: &mut Context<'_, Msg>, app: &AppId) {
        if let Some(rec) = self.alloc.record(app) {
            ctx.note(format!(
                "record app={} node={} state={} demand={}",
                rec.app, rec.node, rec.state, rec.demand
            ));
        }
    }

    // ---- record transitions (keep sysrep and ancestors in step) ----

    fn apply_transition(&mut self, ctx: &mut Context<'_, Msg>, app: &AppId, to: RecordState) {
        // A record leaving Deploying otherwise than through its ack kills
        // the pending install round-trip.
        if to != RecordState::Running {
            if let Some(p) = self.pending_installs.remove(app) {
                ctx.cancel(p.timer);
            }
        }
        if let Some(rec) = self.alloc.transition(app, to) {
            self.sysrep
                .apply(&rec.app, &rec.node, rec.state, &rec.params, ctx.now());
            self.note_record(ctx, app);
            self.note_capacity(ctx, &rec.node.clone());
            self.sync_up(ctx, app, &rec.node, rec.state);
        }
    }

    fn sync_up(&mut self, ctx: &mut Context<'_, Msg>, app: &AppId, node: &ActorId, state: RecordState) {
        if let Some(parent) = self.cfg.parent.clone() {
            ctx.send(
                &parent,
                Msg::PlacementSync {
                    app: app.clone(),
                    node: node.clone(),
                    state,
                },
            );
        }
    }

    // ---- allocation protocol ----

    fn available_leaf_children(&self) -> Vec<(ActorId, Capacity)> {
        self.membership
            .available_nodes()
            .filter(|r| self.cfg.leaf_children.contains(&r.node))
            .map(|r| (r.node.clone(), r.capacity.clone()))
            .collect()
    }

    /// Try to place the request on a direct leaf child. On success the
    /// record is created here and the install round-trip begins.
    fn try_local_grant(
        &mut self,
        ctx: &mut Context<'_, Msg>,
        req: &AllocationRequest,
    ) -> Option<ActorId> {
        let children = self.available_leaf_children();
        let node = self.alloc.try_grant(&children, req, ctx.now())?;
        self.begin_install(ctx, req, node.clone());
        Some(node)
    }

    /// Reservation taken: record the grant, update the representation, and
    /// start the install round-trip with its timeout.
    fn begin_install(&mut self, ctx: &mut Context<'_, Msg>, req: &AllocationRequest, node: ActorId) {
        ctx.note(format!(
            "alloc event=grant app={} node={node} demand={} domain={}",
            req.app, req.demand, req.domain
        ));
        self.note_record(ctx, &req.app);
        self.note_capacity(ctx, &node);
        self.sysrep
            .apply(&req.app, &node, RecordState::Deploying, &req.params, ctx.now());
        self.sync_up(ctx, &req.app, &node, RecordState::Deploying);
        ctx.send(
            &node,
            Msg::Install {
                app: req.app.clone(),
                demand: req.demand.clone(),
                params: req.params.clone(),
                domain: req.domain,
            },
        );
        let timer = ctx.schedule(
            self.cfg.install_timeout_ms,
            Msg::InstallTimeout {
                app: req.app.clone(),
            },
        );
        if let Some(old) = self.pending_installs.insert(
            req.app.clone(),
            PendingInstall {
                node,
                timer,
                domain: req.domain,
            },
        ) {
            ctx.cancel(old.timer);
        }
    }

    fn send_terminal(
        &mut self,
        ctx: &mut Context<'_, Msg>,
        req: &AllocationRequest,
        outcome: AllocationOutcome,
    ) {
        if req.origin == self.cfg.id {
            self.finish_request(ctx, &req.app, &outcome, req.domain);
        } else {
            let origin = req.origin.clone();
            ctx.send(
                &origin,
                Msg::AllocOutcome {
                    app: req.app.clone(),
                    outcome,
                    domain: req.domain,
                },
            );
        }
    }

    /// Terminal outcome arrived at the origin manager.
    fn finish_request(
        &mut self,
        ctx: &mut Context<'_, Msg>,
        app: &AppId,
        outcome: &AllocationOutcome,
        domain: Domain,
    ) {
        ctx.note(format!(
            "deploy-outcome app={app} outcome={outcome} domain={domain}"
        ));
        if domain == Domain::Repair {
            if let AllocationOutcome::Denied(reason) = outcome {
                ctx.note(format!(
                    "action-result kind=replace-node app={app} status=failed reason={reason}"
                ));
                if let Some(parent) = self.cfg.parent.clone() {
                    ctx.send(
                        &parent,
                        Msg::RepairFailed {
                            app: app.clone(),
                            reason: reason.clone(),
                        },
                    );
                }
            }
        }
    }

    /// Resolve a request at this manager: local grant, then downward
    /// consultation, then upward escalation, then denial.
    /// `exclude` is the child subtree the request arrived from.
    fn handle_request(
        &mut self,
        ctx: &mut Context<'_, Msg>,
        req: AllocationRequest,
        exclude: Option<&ActorId>,
        respond: ConsultRespond,
    ) {
        if self.consults.contains_key(&req.app) {
            ctx.note(format!(
                "alloc event=deny app={} reason=duplicate-in-flight domain={}",
                req.app, req.domain
            ));
            match respond {
                ConsultRespond::AsInitiator => {
                    self.send_terminal(
                        ctx,
                        &req,
                        AllocationOutcome::Denied("duplicate-in-flight".into()),
                    );
                }
                ConsultRespond::To(consulter) => {
                    ctx.send(
                        &consulter,
                        Msg::ConsultReply {
                            app: req.app.clone(),
                            granted: None,
                            domain: req.domain,
                        },
                    );
                }
            }
            return;
        }
        if let Some(node) = self.try_local_grant(ctx, &req) {
            match respond {
                ConsultRespond::AsInitiator => {
                    self.send_terminal(ctx, &req, AllocationOutcome::Granted(node));
                }
                ConsultRespond::To(consulter) => {
                    ctx.send(
                        &consulter,
                        Msg::ConsultReply {
                            app: req.app.clone(),
                            granted: Some(node),
                            domain: req.domain,
                        },
                    );
                }
            }
            return;
        }

        let candidates: Vec<ActorId> = self
            .cfg
            .manager_children
            .iter()
            .filter(|c| Some(*c) != exclude)
            .cloned()
            .collect();
        if let Some(first) = candidates.first().cloned() {
            ctx.note(format!(
                "alloc event=consult app={} child={first} domain={}",
                req.app, req.domain
            ));
            ctx.send(&first, Msg::Consult(req.clone()));
            self.consults.insert(
                req.app.clone(),
                ConsultState {
                    req,
                    remaining: candidates[1..].to_vec(),
                    respond,
                },
            );
            return;
        }

        self.after_consults(ctx, req, respond);
    }

    /// Consultation exhausted (or never possible): escalate up or deny.
    fn after_consults(
        &mut self,
        ctx: &mut Context<'_, Msg>,
        req: AllocationRequest,
        respond: ConsultRespond,
    ) {
        match respond {
            ConsultRespond::AsInitiator => {
                if let Some(parent) = self.cfg.parent.clone() {
                    if req.hop_count < self.cfg.max_hops {
                        let mut up = req.clone();
                        up.hop_count += 1;
                        ctx.note(format!(
                            "alloc event=escalate app={} to={parent} hops={} domain={}",
                            up.app, up.hop_count, up.domain
                        ));
                        ctx.send(&parent, Msg::AllocRequest(up));
                        return;
                    }
                }
                ctx.note(format!(
                    "alloc event=deny app={} reason=exhausted domain={}",
                    req.app, req.domain
                ));
                self.send_terminal(ctx, &req, AllocationOutcome::Denied("exhausted".into()));
            }
            ConsultRespond::To(consulter) => {
                ctx.send(
                    &consulter,
                    Msg::ConsultReply {
                        app: req.app.clone(),
                        granted: None,
                        domain: req.domain,
                    },
                );
            }
        }
    }

    fn on_consult_reply(
        &mut self,
        ctx: &mut Context<'_, Msg>,
        app: AppId,
        granted: Option<ActorId>,
    ) {
        let Some(mut state) = self.consults.remove(&app) else {
            return;
        };
        match granted {
            Some(node) => match state.respond {
                ConsultRespond::AsInitiator => {
                    let req = state.req.clone();
                    self.send_terminal(ctx, &req, AllocationOutcome::Granted(node));
                }
                ConsultRespond::To(consulter) => {
                    ctx.send(
                        &consulter,
                        Msg::ConsultReply {
                            app,
                            granted: Some(node),
                            domain: state.req.domain,
                        },
                    );
                }
            },
            None => {
                if let Some(next) = if state.remaining.is_empty() {
                    None
                } else {
                    Some(state.remaining.remove(0))
                } {
                    ctx.note(format!(
                        "alloc event=consult app={} child={next} domain={}",
                        state.req.app, state.req.domain
                    ));
                    ctx.send(&next, Msg::Consult(state.req.clone()));
                    self.consults.insert(app, state);
                } else {
                    self.after_consults(ctx, state.req, state.respond);
                }
            }
        }
    }

    /// Entry point for workload deploys at this manager.
    fn deploy(
        &mut self,
        ctx: &mut Context<'_, Msg>,
        app: AppId,
        demand: Capacity,
        params: Vec<(String, String)>,
        domain: Domain,
    ) {
        let live_here = self
            .alloc
            .record(&app)
            .map(|r| r.state.is_live())
            .unwrap_or(false);
        if live_here || self.sysrep.get(&app).is_some() || self.consults.contains_key(&app) {
            ctx.note(format!("warn msg=duplicate-deploy app={app}"));
            return;
        }
        let req = AllocationRequest {
            app,
            demand,
            params,
            origin: self.cfg.id.clone(),
            hop_count: 0,
            domain,
        };
        self.handle_request(ctx, req, None, ConsultRespond::AsInitiator);
    }

    /// Workload release. Releases the local record when we own it, otherwise
    /// routes toward the manager that does.
    fn release(&mut self, ctx: &mut Context<'_, Msg>, app: &AppId) {
        if let Some(rec) = self.alloc.record(app).cloned() {
            if rec.state.is_live() {
                self.apply_transition(ctx, app, RecordState::Stopped);
                if self.membership.status(&rec.node) == Some(NodeStatus::Available) {
                    ctx.send(
                        &rec.node,
                        Msg::Uninstall {
                            app: app.clone(),
                            domain: Domain::Deploy,
                        },
                    );
                }
            } else {
                ctx.note(format!("warn msg=release-not-live app={app}"));
            }
            return;
        }
        if let Some(entry) = self.sysrep.get(app) {
            if let Some(hop) = self.cfg.route.get(&entry.node).cloned() {
                ctx.send(&hop, Msg::ReleaseCmd { app: app.clone() });
                return;
            }
        }
        if let Some(parent) = self.cfg.parent.clone() {
            ctx.send(&parent, Msg::ReleaseCmd { app: app.clone() });
        } else {
            ctx.note(format!("warn msg=release-unknown app={app}"));
        }
    }

    // ---- control loops ----

    fn react_and_actuate(&mut self, ctx: &mut Context<'_, Msg>, input: ReactorInput<'_>) {
        let hits = self.reactor.matching(&input);
        if hits.is_empty() {
            return;
        }
        let mut actions = Vec::new();
        for i in hits {
            let rule = &self.reactor.rules()[i];
            if let Some(action) = self.instantiate(&input, rule.domain, &rule.response.clone()) {
                actions.push(action);
            }
        }
        for action in actions {
            self.actuate(ctx, action);
        }
    }

    /// Fill a response template with current state.
    fn instantiate(
        &self,
        input: &ReactorInput<'_>,
        domain: Domain,
        response: &ResponseTemplate,
    ) -> Option<Action> {
        let kind = match response {
            ResponseTemplate::ReplaceNode => {
                let failed = match input {
                    ReactorInput::Lifecycle(LifecycleEvent::Failed(n)) => n.clone(),
                    _ => return None,
                };
                // The failed node's apps, from the system representation.
                let apps = self.sysrep.apps_on(&failed);
                ActionKind::ReplaceNode { failed, apps }
            }
            ResponseTemplate::RebalanceSmallest => {
                let (app, from_node) = self
                    .alloc
                    .records()
                    .filter(|r| r.state == RecordState::Running)
                    .map(|r| {
                        let units = r.demand.units_over(&r.demand);
                        (units, r.app.clone(), r.node.clone())
                    })
                    .min_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)))
                    .map(|(_, app, node)| (app, node))?;
                let demand = self.alloc.record(&app)?.demand.clone();
                let to = self
                    .available_leaf_children()
                    .into_iter()
                    .filter(|(node, _)| *node != from_node)
                    .filter(|(node, total)| self.alloc.free_on(node, total).fits(&demand))
                    .max_by(|(an, at), (bn, bt)| {
                        let a = self.alloc.free_on(an, at).units_over(&demand);
                        let b = self.alloc.free_on(bn, bt).units_over(&demand);
                        // Most free wins; ties to the lowest id.
                        a.cmp(&b).then_with(|| bn.cmp(an))
                    })
                    .map(|(node, _)| node)?;
                ActionKind::Redeploy { app, to }
            }
            ResponseTemplate::TuneParameter {
                name,
                value,
                target,
            } => ActionKind::TuneParameter {
                node: self.resolve_target(target)?,
                name: name.clone(),
                value: *value,
            },
            ResponseTemplate::StopNode { target } => ActionKind::StopNode {
                node: self.resolve_target(target)?,
            },
            ResponseTemplate::Rebind { component, target } => ActionKind::Rebind {
                component: component.clone(),
                target: target.clone(),
            },
        };
        Some(Action { domain, kind })
    }

    fn resolve_target(&self, target: &TargetSel) -> Option<ActorId> {
        match target {
            TargetSel::Node { node } => Some(node.clone()),
            TargetSel::MostLoaded => self
                .available_leaf_children()
                .into_iter()
                .max_by(|(an, _), (bn, _)| {
                    let a = self.alloc.reserved_on(an).units_over(&self.alloc.reserved_on(an));
                    let b = self.alloc.reserved_on(bn).units_over(&self.alloc.reserved_on(bn));
                    a.cmp(&b).then_with(|| bn.cmp(an))
                })
                .map(|(node, _)| node),
        }
    }

    fn actuate(&mut self, ctx: &mut Context<'_, Msg>, action: Action) {
        ctx.note(action.render());
        let domain = action.domain;
        match action.kind {
            ActionKind::ReplaceNode { failed, apps } => {
                for app in apps {
                    let Some(rec) = self.alloc.record(&app).cloned() else {
                        continue;
                    };
                    if !rec.state.is_live() || rec.node != failed {
                        continue;
                    }
                    self.apply_transition(ctx, &app, RecordState::Lost);
                    let req = AllocationRequest {
                        app: app.clone(),
                        demand: rec.demand.clone(),
                        params: rec.params.clone(),
                        origin: self.cfg.id.clone(),
                        hop_count: 0,
                        domain,
                    };
                    self.handle_request(ctx, req, None, ConsultRespond::AsInitiator);
                }
            }
            ActionKind::Redeploy { app, to } => {
                let Some(rec) = self.alloc.record(&app).cloned() else {
                    return;
                };
                if rec.state != RecordState::Running {
                    return;
                }
                self.apply_transition(ctx, &app, RecordState::Stopped);
                if self.membership.status(&rec.node) == Some(NodeStatus::Available) {
                    ctx.send(
                        &rec.node,
                        Msg::Uninstall {
                            app: app.clone(),
                            domain,
                        },
                    );
                }
                let req = AllocationRequest {
                    app: app.clone(),
                    demand: rec.demand,
                    params: rec.params,
                    origin: self.cfg.id.clone(),
                    hop_count: 0,
                    domain,
                };
                // Targeted local grant; the target was chosen at react time.
                let children: Vec<(ActorId, Capacity)> = self
                    .available_leaf_children()
                    .into_iter()
                    .filter(|(node, _)| *node == to)
                    .collect();
                if self.alloc.try_grant(&children, &req, ctx.now()).is_some() {
                    self.begin_install(ctx, &req, to);
                } else {
                    ctx.note(format!(
                        "action-result kind=redeploy app={app} status=failed reason=target-full"
                    ));
                }
            }
            ActionKind::TuneParameter { node, name, value } => {
                ctx.send(&node, Msg::TuneParam { name, value, domain });
            }
            ActionKind::StopNode { node } => {
                ctx.send(&node, Msg::StopNode);
                for app in self.alloc.live_apps_on(&node) {
                    self.apply_transition(ctx, &app, RecordState::Stopped);
                }
                self.membership.forget(&node);
                ctx.note(format!("action-result kind=stop-node node={node} status=ok"));
            }
            ActionKind::Rebind { component, target } => {
                let ok = self
                    .sysrep
                    .rebind(&component, "binding", &target, ctx.now());
                ctx.note(format!(
                    "action-result kind=rebind component={component} status={}",
                    if ok { "ok" } else { "failed" }
                ));
            }
        }
    }

    fn lifecycle(&mut self, ctx: &mut Context<'_, Msg>, event: LifecycleEvent) {
        ctx.note(format!(
            "lifecycle event={} node={}",
            event.kind(),
            event.node()
        ));
        self.react_and_actuate(ctx, ReactorInput::Lifecycle(&event));
    }
}

impl Actor<Msg> for ManagerActor {
    fn on_start(&mut self, ctx: &mut Context<'_, Msg>) {
        ctx.schedule(self.cfg.heartbeat.sweep_interval_ms, Msg::SweepTick);
        ctx.schedule(self.cfg.aggregation.window_ms, Msg::WindowTick);
        self.register_all(ctx);
        self.discover(ctx);
        ctx.schedule(self.cfg.refresh_ms, Msg::DiscoveryTick);
        if let Some(ns) = &mut self.node_side {
            ns.emit_heartbeat(ctx);
            ctx.schedule(ns.cfg.heartbeat.period_ms, Msg::HeartbeatTick);
            ns.sense(ctx);
            ctx.schedule(ns.cfg.sensor.period_ms, Msg::SensorTick);
        }
    }

    fn on_restart(&mut self, ctx: &mut Context<'_, Msg>) {
        self.membership = MembershipTable::new();
        self.sysrep = SystemRepresentation::new();
        self.monitor.reset();
        self.rep_producer.reset();
        self.pending_installs.clear();
        self.consults.clear();
        if let Some(ns) = &mut self.node_side {
            ns.reset();
        }
        self.on_start(ctx);
    }

    fn on_message(&mut self, ctx: &mut Context<'_, Msg>, from: &ActorId, msg: Msg) {
        match msg {
            Msg::Heartbeat { node, capacity } => {
                if let Some(event) = self.membership.record_heartbeat(&node, ctx.now(), &capacity)
                {
                    self.lifecycle(ctx, event);
                }
            }
            Msg::Publish { event, .. } => {
                self.monitor.ingest(ctx.now(), event);
            }
            Msg::LookupReply { endpoints } => {
                for ep in endpoints {
                    // Summaries cover the children; the manager's own
                    // node-side sensor stays out of its own aggregate
                    // (pull-accessible via query only).
                    if ep.actor() == self.cfg.id {
                        continue;
                    }
                    let target = ep.actor();
                    ctx.send(
                        &target,
                        Msg::Subscribe {
                            producer: ep,
                            subscriber: self.cfg.id.clone(),
                        },
                    );
                }
            }
            Msg::Subscribe {
                producer,
                subscriber,
            } => {
                if producer == self.rep_producer.endpoint {
                    self.rep_producer.subscribe(subscriber);
                } else if let Some(ns) = &mut self.node_side {
                    ns.handle(
                        ctx,
                        from,
                        &Msg::Subscribe {
                            producer,
                            subscriber,
                        },
                    );
                }
            }
            Msg::QueryLatest { producer, reply_to } => {
                if producer == self.rep_producer.endpoint {
                    self.rep_producer.answer_query(ctx, &reply_to);
                } else if let Some(ns) = &mut self.node_side {
                    ns.handle(ctx, from, &Msg::QueryLatest { producer, reply_to });
                }
            }
            Msg::AllocRequest(req) => {
                // Exclude the child subtree the escalation came from.
                let exclude = if self.cfg.manager_children.contains(from) {
                    Some(from.clone())
                } else {
                    None
                };
                self.handle_request(ctx, req, exclude.as_ref(), ConsultRespond::AsInitiator);
            }
            Msg::Consult(req) => {
                self.handle_request(ctx, req, None, ConsultRespond::To(from.clone()));
            }
            Msg::ConsultReply { app, granted, .. } => {
                self.on_consult_reply(ctx, app, granted);
            }
            Msg::AllocOutcome {
                app,
                outcome,
                domain,
            } => {
                self.finish_request(ctx, &app, &outcome, domain);
            }
            Msg::InstallAck { app } => {
                if let Some(pending) = self.pending_installs.remove(&app) {
                    ctx.cancel(pending.timer);
                    self.apply_transition(ctx, &app, RecordState::Running);
                }
            }
            Msg::DeployCmd {
                app,
                demand,
                params,
                via_domain,
            } => {
                self.deploy(ctx, app, demand, params, via_domain);
            }
            Msg::ReleaseCmd { app } => {
                self.release(ctx, &app);
            }
            Msg::PlacementSync { app, node, state } => {
                self.sysrep.apply(&app, &node, state, &[], ctx.now());
                if let Some(parent) = self.cfg.parent.clone() {
                    ctx.send(&parent, Msg::PlacementSync { app, node, state });
                }
            }
            Msg::RepairFailed { app, reason } => {
                ctx.note(format!(
                    "repair-exhausted app={app} reason={reason} origin={from}"
                ));
                if let Some(parent) = self.cfg.parent.clone() {
                    ctx.send(&parent, Msg::RepairFailed { app, reason });
                }
            }
            Msg::TuneAck { name, value } => {
                ctx.note(format!(
                    "action-result kind=tune-parameter node={from} name={name} value={value} status=ok"
                ));
            }
            other => {
                // Mirror node-side traffic (installs never land on managers;
                // tune/stop/set-manager do).
                if let Some(ns) = &mut self.node_side {
                    ns.handle(ctx, from, &other);
                }
            }
        }
    }

    fn on_timer(&mut self, ctx: &mut Context<'_, Msg>, msg: Msg) {
        match msg {
            Msg::SweepTick => {
                let failed = self
                    .membership
                    .sweep(ctx.now(), self.cfg.heartbeat.failure_timeout_ms);
                for node in failed {
                    self.lifecycle(ctx, LifecycleEvent::Failed(node));
                }
                ctx.schedule(self.cfg.heartbeat.sweep_interval_ms, Msg::SweepTick);
            }
            Msg::WindowTick => {
                let close = ctx.now();
                let outs = self.monitor.close_window(close, &self.cfg.id.clone());
                for out in outs {
                    ctx.note(format!(
                        "window-agg close={} window={} {}",
                        close.millis(),
                        self.cfg.aggregation.window_ms,
                        out.render()
                    ));
                    self.rep_producer.publish(ctx, out.clone());
                    self.react_and_actuate(ctx, ReactorInput::Metric(&out));
                }
                ctx.schedule(self.cfg.aggregation.window_ms, Msg::WindowTick);
            }
            Msg::DiscoveryTick => {
                self.register_all(ctx);
                self.discover(ctx);
                ctx.schedule(self.cfg.refresh_ms, Msg::DiscoveryTick);
            }
            Msg::InstallTimeout { app } => {
                if let Some(pending) = self.pending_installs.remove(&app) {
                    ctx.note(format!(
                        "install-timeout app={app} node={} domain={}",
                        pending.node, pending.domain
                    ));
                    self.apply_transition(ctx, &app, RecordState::Lost);
                }
            }
            Msg::HeartbeatTick => {
                if let Some(ns) = &mut self.node_side {
                    ns.emit_heartbeat(ctx);
                    if !ns.stopped {
                        ctx.schedule(ns.cfg.heartbeat.period_ms, Msg::HeartbeatTick);
                    }
                }
            }
            Msg::SensorTick => {
                if let Some(ns) = &mut self.node_side {
                    ns.sense(ctx);
                    if !ns.stopped {
                        ctx.schedule(ns.cfg.sensor.period_ms, Msg::SensorTick);
                    }
                }
            }
            _ => {}
        }
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}
