//! Deployment descriptors: virtual nodes mapped to processes over host
//! lists with variable substitution, plus the command launcher that turns
//! resolved targets into node actors.
//!
//! The textual format is line-based; `#` starts a comment. Statements:
//!
//! ```text
//! variable NODES
//! variable TIMEOUT = 30000
//! virtualnode grid multiple timeout=30000
//! map grid -> g5k
//! process g5k ssh hostlist="${NODES}"
//! ```
//!
//! `virtualnode` declares a name with multiplicity `single` or `multiple`
//! and an optional activation timeout (ms). `map` binds a virtual node to a
//! process definition. `process` names an opaque launcher kind (`ssh`,
//! `oar`, ...) — recorded, never interpreted — and a host list expression
//! whose `${VAR}` placeholders must all be declared variables. Bindings are
//! supplied `-DNAME=value` style at resolve time; the expanded host list
//! splits on whitespace into targets, order preserved.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::fabric::{ActorId, Fabric};
use crate::hierarchy::{dir_id, NodeActor, NodeConfig};
use crate::protocol::Msg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Multiplicity {
    Single,
    Multiple,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualNode {
    pub name: String,
    pub multiplicity: Multiplicity,
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessDefinition {
    pub name: String,
    /// Opaque job-submission tag; swapping `ssh` for `oar` is data, not code.
    pub launcher_kind: String,
    pub hostlist_expr: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DeploymentDescriptor {
    /// Declaration order preserved; value is the optional default.
    pub variables: Vec<(String, Option<String>)>,
    pub virtual_nodes: Vec<VirtualNode>,
    /// Virtual node name -> process definition name.
    pub mappings: Vec<(String, String)>,
    pub process_definitions: Vec<ProcessDefinition>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DescriptorError {
    #[error("line {line}: unknown statement: {text}")]
    UnknownStatement { line: usize, text: String },
    #[error("line {line}: malformed {what}")]
    Malformed { line: usize, what: &'static str },
    #[error("line {line}: duplicate variable {name}")]
    DuplicateVariable { line: usize, name: String },
    #[error("line {line}: duplicate virtual node {name}")]
    DuplicateVirtualNode { line: usize, name: String },
    #[error("line {line}: duplicate process definition {name}")]
    DuplicateProcess { line: usize, name: String },
    #[error("line {line}: duplicate mapping for virtual node {name}")]
    DuplicateMapping { line: usize, name: String },
    #[error("mapping references unknown virtual node {0}")]
    UnknownVirtualNode(String),
    #[error("unknown process definition {0}")]
    UnknownProcess(String),
    #[error("undeclared variable {0} in hostlist of process {1}")]
    UndeclaredVariable(String, String),
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("virtual node {0} has no mapping")]
    UnmappedVirtualNode(String),
    #[error("empty host list for multiple virtual node {0}")]
    EmptyExpansion(String),
    #[error("virtual node {0} is single but resolved to {1} targets")]
    SingleCardinality(String, usize),
    #[error("unresolved placeholder in {0}")]
    Residue(String),
}

fn placeholders(expr: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = expr;
    while let Some(start) = rest.find("${") {
        let tail = &rest[start + 2..];
        match tail.find('}') {
            Some(end) => {
                out.push(tail[..end].to_string());
                rest = &tail[end + 1..];
            }
            None => break,
        }
    }
    out
}

impl DeploymentDescriptor {
    pub fn variable(&self, name: &str) -> Option<&Option<String>> {
        self.variables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d)
    }

    pub fn virtual_node(&self, name: &str) -> Option<&VirtualNode> {
        self.virtual_nodes.iter().find(|v| v.name == name)
    }

    pub fn process(&self, name: &str) -> Option<&ProcessDefinition> {
        self.process_definitions.iter().find(|p| p.name == name)
    }

    pub fn mapping_for(&self, vnode: &str) -> Option<&str> {
        self.mappings
            .iter()
            .find(|(v, _)| v == vnode)
            .map(|(_, p)| p.as_str())
    }

    /// Canonical text form; `parse(render(d))` is structurally `d`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, default) in &self.variables {
            match default {
                Some(d) => out.push_str(&format!("variable {name} = {d}\n")),
                None => out.push_str(&format!("variable {name}\n")),
            }
        }
        for v in &self.virtual_nodes {
            let mult = match v.multiplicity {
                Multiplicity::Single => "single",
                Multiplicity::Multiple => "multiple",
            };
            out.push_str(&format!(
                "virtualnode {} {mult} timeout={}\n",
                v.name, v.timeout_ms
            ));
        }
        for (vnode, process) in &self.mappings {
            out.push_str(&format!("map {vnode} -> {process}\n"));
        }
        for p in &self.process_definitions {
            out.push_str(&format!(
                "process {} {} hostlist=\"{}\"\n",
                p.name, p.launcher_kind, p.hostlist_expr
            ));
        }
        out
    }
}

/// Parse and cross-validate a descriptor document.
pub fn parse(text: &str) -> Result<DeploymentDescriptor, DescriptorError> {
    let mut desc = DeploymentDescriptor::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (verb, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match verb {
            "variable" => {
                let (name, default) = match rest.split_once('=') {
                    Some((n, d)) => (n.trim().to_string(), Some(d.trim().to_string())),
                    None => (rest.to_string(), None),
                };
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(DescriptorError::Malformed {
                        line: line_no,
                        what: "variable declaration",
                    });
                }
                if desc.variable(&name).is_some() {
                    return Err(DescriptorError::DuplicateVariable { line: line_no, name });
                }
                desc.variables.push((name, default));
            }
            "virtualnode" => {
                let mut parts = rest.split_whitespace();
                let name = parts
                    .next()
                    .ok_or(DescriptorError::Malformed {
                        line: line_no,
                        what: "virtualnode declaration",
                    })?
                    .to_string();
                let multiplicity = match parts.next() {
                    Some("single") => Multiplicity::Single,
                    Some("multiple") => Multiplicity::Multiple,
                    _ => {
                        return Err(DescriptorError::Malformed {
                            line: line_no,
                            what: "virtualnode multiplicity",
                        })
                    }
                };
                let mut timeout_ms = 30_000;
                for opt in parts {
                    match opt.split_once('=') {
                        Some(("timeout", v)) => {
                            timeout_ms = v.parse().map_err(|_| DescriptorError::Malformed {
                                line: line_no,
                                what: "virtualnode timeout",
                            })?;
                        }
                        _ => {
                            return Err(DescriptorError::Malformed {
                                line: line_no,
                                what: "virtualnode option",
                            })
                        }
                    }
                }
                if desc.virtual_node(&name).is_some() {
                    return Err(DescriptorError::DuplicateVirtualNode { line: line_no, name });
                }
                desc.virtual_nodes.push(VirtualNode {
                    name,
                    multiplicity,
                    timeout_ms,
                });
            }
            "map" => {
                let (vnode, process) =
                    rest.split_once("->").ok_or(DescriptorError::Malformed {
                        line: line_no,
                        what: "mapping",
                    })?;
                let vnode = vnode.trim().to_string();
                let process = process.trim().to_string();
                if vnode.is_empty() || process.is_empty() {
                    return Err(DescriptorError::Malformed {
                        line: line_no,
                        what: "mapping",
                    });
                }
                if desc.mapping_for(&vnode).is_some() {
                    return Err(DescriptorError::DuplicateMapping {
                        line: line_no,
                        name: vnode,
                    });
                }
                desc.mappings.push((vnode, process));
            }
            "process" => {
                let mut parts = rest.splitn(3, char::is_whitespace);
                let name = parts.next().unwrap_or("").to_string();
                let kind = parts.next().unwrap_or("").to_string();
                let tail = parts.next().unwrap_or("").trim();
                let expr = tail
                    .strip_prefix("hostlist=\"")
                    .and_then(|s| s.strip_suffix('"'))
                    .ok_or(DescriptorError::Malformed {
                        line: line_no,
                        what: "process hostlist",
                    })?;
                if name.is_empty() || kind.is_empty() {
                    return Err(DescriptorError::Malformed {
                        line: line_no,
                        what: "process definition",
                    });
                }
                if desc.process(&name).is_some() {
                    return Err(DescriptorError::DuplicateProcess { line: line_no, name });
                }
                desc.process_definitions.push(ProcessDefinition {
                    name,
                    launcher_kind: kind,
                    hostlist_expr: expr.to_string(),
                });
            }
            _ => {
                return Err(DescriptorError::UnknownStatement {
                    line: line_no,
                    text: line.to_string(),
                })
            }
        }
    }

    // Cross-references.
    for (vnode, process) in &desc.mappings {
        if desc.virtual_node(vnode).is_none() {
            return Err(DescriptorError::UnknownVirtualNode(vnode.clone()));
        }
        if desc.process(process).is_none() {
            return Err(DescriptorError::UnknownProcess(process.clone()));
        }
    }
    for p in &desc.process_definitions {
        for var in placeholders(&p.hostlist_expr) {
            if desc.variable(&var).is_none() {
                return Err(DescriptorError::UndeclaredVariable(var, p.name.clone()));
            }
        }
    }
    Ok(desc)
}

/// Concrete targets per virtual node plus the command to run on them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaunchPlan {
    pub targets: Vec<(String, Vec<String>)>,
    pub command: String,
}

impl LaunchPlan {
    pub fn all_targets(&self) -> impl Iterator<Item = &String> {
        self.targets.iter().flat_map(|(_, hosts)| hosts.iter())
    }
}

/// Expand host lists with `-DNAME=value` bindings (falling back to declared
/// defaults) and produce the launch plan for `command`.
pub fn resolve(
    desc: &DeploymentDescriptor,
    bindings: &BTreeMap<String, String>,
    command: &str,
) -> Result<LaunchPlan, DescriptorError> {
    let mut targets = Vec::new();
    for vnode in &desc.virtual_nodes {
        let process_name = desc
            .mapping_for(&vnode.name)
            .ok_or_else(|| DescriptorError::UnmappedVirtualNode(vnode.name.clone()))?;
        let process = desc.process(process_name).expect("validated at parse");
        let mut expr = process.hostlist_expr.clone();
        for var in placeholders(&process.hostlist_expr) {
            let value = bindings
                .get(&var)
                .cloned()
                .or_else(|| desc.variable(&var).cloned().flatten())
                .ok_or_else(|| DescriptorError::UnboundVariable(var.clone()))?;
            expr = expr.replace(&format!("${{{var}}}"), &value);
        }
        if expr.contains("${") {
            return Err(DescriptorError::Residue(expr));
        }
        let hosts: Vec<String> = expr.split_whitespace().map(str::to_string).collect();
        match vnode.multiplicity {
            Multiplicity::Multiple if hosts.is_empty() => {
                return Err(DescriptorError::EmptyExpansion(vnode.name.clone()));
            }
            Multiplicity::Single if hosts.len() != 1 => {
                return Err(DescriptorError::SingleCardinality(
                    vnode.name.clone(),
                    hosts.len(),
                ));
            }
            _ => {}
        }
        targets.push((vnode.name.clone(), hosts));
    }
    Ok(LaunchPlan {
        targets,
        command: command.to_string(),
    })
}

#[derive(Debug, Error)]
pub enum LaunchError {
    #[error("unknown command template {0}")]
    UnknownTemplate(String),
    #[error("plan has no targets")]
    NoTargets,
    #[error("duplicate target {0}")]
    DuplicateTarget(String),
    #[error("target {0} is already an actor")]
    TargetExists(String),
    #[error("invalid target name {0}")]
    BadTarget(String),
}

/// Role settings applied to every launched target.
#[derive(Debug, Clone)]
pub struct NodeTemplate {
    pub manager: ActorId,
    pub base: NodeConfig,
}

/// Instantiate one node actor per target, named by host token, heartbeating
/// the template's manager. On any error nothing is created.
pub fn launch(
    fabric: &mut Fabric<Msg>,
    plan: &LaunchPlan,
    template: &NodeTemplate,
) -> Result<Vec<ActorId>, LaunchError> {
    if plan.command != "jadeNode" {
        return Err(LaunchError::UnknownTemplate(plan.command.clone()));
    }
    let hosts: Vec<&String> = plan.all_targets().collect();
    if hosts.is_empty() {
        return Err(LaunchError::NoTargets);
    }
    let mut seen = std::collections::BTreeSet::new();
    for host in &hosts {
        if host.contains('/') || host.contains(char::is_whitespace) {
            return Err(LaunchError::BadTarget((*host).clone()));
        }
        if !seen.insert((*host).clone()) {
            return Err(LaunchError::DuplicateTarget((*host).clone()));
        }
        if fabric.has_actor(&ActorId::new(host.as_str())) {
            return Err(LaunchError::TargetExists((*host).clone()));
        }
    }
    let mut created = Vec::new();
    for host in hosts {
        let id = ActorId::new(host.as_str());
        let cfg = NodeConfig {
            id: id.clone(),
            manager: Some(template.manager.clone()),
            registry: Some(dir_id(&template.manager)),
            ..template.base.clone()
        };
        fabric
            .spawn(id.clone(), Box::new(NodeActor::new(cfg)))
            .expect("validated unique");
        created.push(id);
    }
    Ok(created)
}

#[cfg(test)]
mod tests;
