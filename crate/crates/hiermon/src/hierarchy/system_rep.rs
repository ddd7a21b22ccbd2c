//! A manager's mirror of the deployed application architecture.

use std::collections::BTreeMap;

use crate::allocation::RecordState;
use crate::fabric::{ActorId, SimTime};
use crate::protocol::AppId;

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementEntry {
    pub node: ActorId,
    pub state: RecordState,
    pub params: Vec<(String, String)>,
    /// Component bindings adjusted by rebind actions.
    pub bindings: BTreeMap<String, String>,
}

/// Live placements within this manager's subtree, kept in step with
/// deploy/undeploy/repair actions. Stopped and lost components leave the
/// representation; an app is mapped to at most one node.
#[derive(Debug, Clone, Default)]
pub struct SystemRepresentation {
    placements: BTreeMap<AppId, PlacementEntry>,
    pub last_updated: SimTime,
}

impl SystemRepresentation {
    pub fn new() -> SystemRepresentation {
        SystemRepresentation::default()
    }

    /// Apply a record transition: live states upsert the placement, dead
    /// states remove it.
    pub fn apply(
        &mut self,
        app: &AppId,
        node: &ActorId,
        state: RecordState,
        params: &[(String, String)],
        now: SimTime,
    ) {
        self.last_updated = now;
        if state.is_live() {
            let entry = self.placements.entry(app.clone()).or_insert(PlacementEntry {
                node: node.clone(),
                state,
                params: params.to_vec(),
                bindings: BTreeMap::new(),
            });
            entry.node = node.clone();
            entry.state = state;
            entry.params = params.to_vec();
        } else {
            // Only clear when the dead record matches the mapped node;
            // a repair may already have re-placed the app elsewhere.
            if self.placements.get(app).map(|e| &e.node) == Some(node) {
                self.placements.remove(app);
            }
        }
    }

    pub fn rebind(&mut self, component: &AppId, name: &str, target: &str, now: SimTime) -> bool {
        self.last_updated = now;
        match self.placements.get_mut(component) {
            Some(entry) => {
                entry
                    .bindings
                    .insert(name.to_string(), target.to_string());
                true
            }
            None => false,
        }
    }

    pub fn get(&self, app: &AppId) -> Option<&PlacementEntry> {
        self.placements.get(app)
    }

    pub fn placements(&self) -> &BTreeMap<AppId, PlacementEntry> {
        &self.placements
    }

    pub fn apps_on(&self, node: &ActorId) -> Vec<AppId> {
        self.placements
            .iter()
            .filter(|(_, e)| e.node == *node)
            .map(|(a, _)| a.clone())
            .collect()
    }

    pub fn snapshot(&self) -> SystemRepresentation {
        self.clone()
    }
}
