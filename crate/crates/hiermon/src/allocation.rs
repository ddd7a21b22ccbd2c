//! Node selection, reservation bookkeeping, and deployment records.
//!
//! Each manager owns one [`AllocEngine`] covering its direct leaf children.
//! Reservations are taken when a request is granted (record `Deploying`) and
//! returned when the record leaves the live set (`Stopped` or `Lost`), so at
//! every instant a node's reserved capacity equals the sum of demands of its
//! live records. The escalation/consultation protocol between managers lives
//! in the hierarchy module; this one is purely local state.

use std::fmt;

use std::collections::BTreeMap;

use crate::fabric::{ActorId, SimTime};
use crate::protocol::{AppId, Capacity, Domain};

/// A request as it travels between managers. `hop_count` counts upward
/// forwards; `origin` is the manager that first received the request and the
/// place the terminal outcome is reported.
#[derive(Debug, Clone)]
pub struct AllocationRequest {
    pub app: AppId,
    pub demand: Capacity,
    pub params: Vec<(String, String)>,
    pub origin: ActorId,
    pub hop_count: u32,
    pub domain: Domain,
}

impl AllocationRequest {
    pub fn render(&self) -> String {
        format!(
            "app={} demand={} origin={} hops={} domain={}",
            self.app, self.demand, self.origin, self.hop_count, self.domain
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AllocationOutcome {
    Granted(ActorId),
    Escalated(ActorId),
    Denied(String),
}

impl fmt::Display for AllocationOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AllocationOutcome::Granted(node) => write!(f, "granted:{node}"),
            AllocationOutcome::Escalated(to) => write!(f, "escalated:{to}"),
            AllocationOutcome::Denied(reason) => write!(f, "denied:{reason}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordState {
    Deploying,
    Running,
    Stopped,
    Lost,
}

impl RecordState {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordState::Deploying => "deploying",
            RecordState::Running => "running",
            RecordState::Stopped => "stopped",
            RecordState::Lost => "lost",
        }
    }

    pub fn is_live(self) -> bool {
        matches!(self, RecordState::Deploying | RecordState::Running)
    }
}

impl fmt::Display for RecordState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct DeploymentRecord {
    pub app: AppId,
    pub node: ActorId,
    pub state: RecordState,
    pub deployed_at: SimTime,
    pub demand: Capacity,
    pub params: Vec<(String, String)>,
}

/// A feasible-node candidate as seen by a policy: identity plus free capacity.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub node: ActorId,
    pub free: Capacity,
}

/// Node selection strategy. Implementations must be deterministic.
pub trait AllocationPolicy {
    fn name(&self) -> &'static str;

    /// Pick among candidates with `free >= demand`; `None` when none fit.
    fn pick(&self, candidates: &[Candidate], demand: &Capacity) -> Option<ActorId>;
}

/// Default policy: the feasible node with the most free units summed over
/// the demanded dimensions; ties go to the lowest node id.
pub struct MostFree;

impl AllocationPolicy for MostFree {
    fn name(&self) -> &'static str {
        "most-free"
    }

    fn pick(&self, candidates: &[Candidate], demand: &Capacity) -> Option<ActorId> {
        let mut sorted: Vec<&Candidate> = candidates.iter().collect();
        sorted.sort_by(|a, b| a.node.cmp(&b.node));
        let mut best: Option<(u64, &Candidate)> = None;
        for c in sorted {
            if !c.free.fits(demand) {
                continue;
            }
            let score = c.free.units_over(demand);
            match best {
                Some((s, _)) if s >= score => {}
                _ => best = Some((score, c)),
            }
        }
        best.map(|(_, c)| c.node.clone())
    }
}

/// Allocator state local to one manager.
pub struct AllocEngine {
    policy: Box<dyn AllocationPolicy>,
    reserved: BTreeMap<ActorId, Capacity>,
    records: BTreeMap<AppId, DeploymentRecord>,
}

impl AllocEngine {
    pub fn new(policy: Box<dyn AllocationPolicy>) -> AllocEngine {
        AllocEngine {
            policy,
            reserved: BTreeMap::new(),
            records: BTreeMap::new(),
        }
    }

    pub fn policy_name(&self) -> &'static str {
        self.policy.name()
    }

    pub fn reserved_on(&self, node: &ActorId) -> Capacity {
        self.reserved.get(node).cloned().unwrap_or_default()
    }

    pub fn free_on(&self, node: &ActorId, total: &Capacity) -> Capacity {
        total.minus(&self.reserved_on(node))
    }

    /// Select a node among the given `(node, total capacity)` children and
    /// reserve the demand, creating a `Deploying` record. Returns `None`
    /// when no child fits or the app already has a live record here.
    pub fn try_grant(
        &mut self,
        children: &[(ActorId, Capacity)],
        req: &AllocationRequest,
        now: SimTime,
    ) -> Option<ActorId> {
        if self
            .records
            .get(&req.app)
            .map(|r| r.state.is_live())
            .unwrap_or(false)
        {
            return None;
        }
        let candidates: Vec<Candidate> = children
            .iter()
            .map(|(node, total)| Candidate {
                node: node.clone(),
                free: self.free_on(node, total),
            })
            .collect();
        let node = self.policy.pick(&candidates, &req.demand)?;
        self.reserved
            .entry(node.clone())
            .or_default()
            .add(&req.demand);
        self.records.insert(
            req.app.clone(),
            DeploymentRecord {
                app: req.app.clone(),
                node: node.clone(),
                state: RecordState::Deploying,
                deployed_at: now,
                demand: req.demand.clone(),
                params: req.params.clone(),
            },
        );
        Some(node)
    }

    pub fn record(&self, app: &AppId) -> Option<&DeploymentRecord> {
        self.records.get(app)
    }

    pub fn records(&self) -> impl Iterator<Item = &DeploymentRecord> {
        self.records.values()
    }

    /// Live (Deploying/Running) apps currently placed on `node`.
    pub fn live_apps_on(&self, node: &ActorId) -> Vec<AppId> {
        self.records
            .values()
            .filter(|r| r.node == *node && r.state.is_live())
            .map(|r| r.app.clone())
            .collect()
    }

    /// Sum of live demands on `node`; equals the reservation at all times.
    pub fn live_demand_on(&self, node: &ActorId) -> Capacity {
        let mut sum = Capacity::new();
        for r in self.records.values() {
            if r.node == *node && r.state.is_live() {
                sum.add(&r.demand);
            }
        }
        sum
    }

    /// Transition a record. Leaving the live set releases its reservation.
    /// Returns the updated record when the transition applied.
    pub fn transition(&mut self, app: &AppId, to: RecordState) -> Option<DeploymentRecord> {
        let rec = self.records.get_mut(app)?;
        let allowed = matches!(
            (rec.state, to),
            (RecordState::Deploying, RecordState::Running)
                | (RecordState::Deploying, RecordState::Lost)
                | (RecordState::Deploying, RecordState::Stopped)
                | (RecordState::Running, RecordState::Stopped)
                | (RecordState::Running, RecordState::Lost)
        );
        if !allowed {
            return None;
        }
        let was_live = rec.state.is_live();
        rec.state = to;
        if was_live && !to.is_live() {
            let node = rec.node.clone();
            let demand = rec.demand.clone();
            self.reserved
                .entry(node.clone())
                .or_default()
                .sub_saturating(&demand);
            debug_assert_eq!(self.reserved_on(&node), self.live_demand_on(&node));
        }
        self.records.get(app).cloned()
    }
}
