use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::control::SensorSpec;
use crate::fabric::{SimTime, TraceKind};
use crate::hierarchy::{build, BuildConfig, HierarchyTopology, NodeRole, NodeSpec};
use crate::membership::HeartbeatConfig;
use crate::protocol::Capacity;

const BUNDLED: &str = include_str!("../../../../scenarios/deploy.desc");

fn bindings(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[test]
fn bundled_descriptor_structure() {
    let desc = parse(BUNDLED).unwrap();
    assert_eq!(desc.variables.len(), 1);
    assert_eq!(desc.variables[0], ("NODES".to_string(), None));
    assert_eq!(desc.virtual_nodes.len(), 1);
    let vnode = &desc.virtual_nodes[0];
    assert_eq!(vnode.name, "grid");
    assert_eq!(vnode.multiplicity, Multiplicity::Multiple);
    assert_eq!(vnode.timeout_ms, 30_000);
    assert_eq!(desc.mappings, vec![("grid".to_string(), "g5k".to_string())]);
    let process = &desc.process_definitions[0];
    assert_eq!(process.launcher_kind, "ssh");
    assert_eq!(process.hostlist_expr, "${NODES}");
}

#[test]
fn resolve_preserves_host_order() {
    let desc = parse(BUNDLED).unwrap();
    let plan = resolve(
        &desc,
        &bindings(&[(
            "NODES",
            "sidonie.inria.fr meije.inria.fr naruto.inria.fr",
        )]),
        "jadeNode",
    )
    .unwrap();
    assert_eq!(plan.targets.len(), 1);
    assert_eq!(
        plan.targets[0].1,
        vec![
            "sidonie.inria.fr".to_string(),
            "meije.inria.fr".to_string(),
            "naruto.inria.fr".to_string(),
        ]
    );
    assert_eq!(plan.command, "jadeNode");
    // Substitution totality: no placeholder residue anywhere.
    for host in plan.all_targets() {
        assert!(!host.contains("${"));
    }
}

#[test]
fn single_host_satisfies_multiple() {
    let desc = parse(BUNDLED).unwrap();
    let plan = resolve(&desc, &bindings(&[("NODES", "alpha")]), "jadeNode").unwrap();
    assert_eq!(plan.targets[0].1, vec!["alpha".to_string()]);
}

#[test]
fn default_values_apply_when_unbound() {
    let text = "variable NODES = h1 h2\nvirtualnode grid multiple\nmap grid -> p\nprocess p ssh hostlist=\"${NODES}\"\n";
    let desc = parse(text).unwrap();
    let plan = resolve(&desc, &BTreeMap::new(), "jadeNode").unwrap();
    assert_eq!(plan.targets[0].1, vec!["h1".to_string(), "h2".to_string()]);
    // Explicit bindings override defaults.
    let plan = resolve(&desc, &bindings(&[("NODES", "zz")]), "jadeNode").unwrap();
    assert_eq!(plan.targets[0].1, vec!["zz".to_string()]);
}

#[test]
fn empty_variables_section_without_placeholders_is_valid() {
    let text = "virtualnode grid multiple\nmap grid -> p\nprocess p local hostlist=\"localhost\"\n";
    let desc = parse(text).unwrap();
    assert!(desc.variables.is_empty());
    let plan = resolve(&desc, &BTreeMap::new(), "jadeNode").unwrap();
    assert_eq!(plan.targets[0].1, vec!["localhost".to_string()]);
}

#[test]
fn mapping_to_unknown_process_rejected() {
    let text = "virtualnode grid multiple\nmap grid -> nope\n";
    assert_eq!(
        parse(text).unwrap_err(),
        DescriptorError::UnknownProcess("nope".to_string())
    );
}

#[test]
fn mapping_from_unknown_virtual_node_rejected() {
    let text = "map ghost -> p\nprocess p ssh hostlist=\"h\"\n";
    assert_eq!(
        parse(text).unwrap_err(),
        DescriptorError::UnknownVirtualNode("ghost".to_string())
    );
}

#[test]
fn undeclared_variable_named_in_error() {
    let text = "virtualnode grid multiple\nmap grid -> p\nprocess p ssh hostlist=\"${NODES}\"\n";
    assert_eq!(
        parse(text).unwrap_err(),
        DescriptorError::UndeclaredVariable("NODES".to_string(), "p".to_string())
    );
}

#[test]
fn duplicate_virtual_node_rejected() {
    let text = "virtualnode grid multiple\nvirtualnode grid single\n";
    assert!(matches!(
        parse(text).unwrap_err(),
        DescriptorError::DuplicateVirtualNode { .. }
    ));
}

#[test]
fn unbound_variable_fails_resolve() {
    let desc = parse(BUNDLED).unwrap();
    assert_eq!(
        resolve(&desc, &BTreeMap::new(), "jadeNode").unwrap_err(),
        DescriptorError::UnboundVariable("NODES".to_string())
    );
}

#[test]
fn empty_expansion_for_multiple_fails() {
    let desc = parse(BUNDLED).unwrap();
    assert_eq!(
        resolve(&desc, &bindings(&[("NODES", "   ")]), "jadeNode").unwrap_err(),
        DescriptorError::EmptyExpansion("grid".to_string())
    );
}

#[test]
fn single_virtual_node_wants_exactly_one_host() {
    let text = "variable H\nvirtualnode ctl single\nmap ctl -> p\nprocess p ssh hostlist=\"${H}\"\n";
    let desc = parse(text).unwrap();
    assert!(resolve(&desc, &bindings(&[("H", "a b")]), "jadeNode").is_err());
    assert!(resolve(&desc, &bindings(&[("H", "a")]), "jadeNode").is_ok());
}

#[test]
fn unknown_statement_reports_line() {
    let err = parse("virtualnode grid multiple\nfrobnicate x\n").unwrap_err();
    assert!(matches!(err, DescriptorError::UnknownStatement { line: 2, .. }));
}

fn manager_only_fabric() -> (crate::fabric::Fabric<Msg>, ActorId) {
    let topo = HierarchyTopology::new(vec![NodeSpec {
        id: ActorId::new("boot"),
        role: NodeRole::Boot,
        parent: None,
        capacity: Capacity::new(),
    }])
    .unwrap();
    let mut fabric = crate::fabric::Fabric::new(1);
    build(&mut fabric, &topo, &BuildConfig::default()).unwrap();
    (fabric, ActorId::new("boot"))
}

fn template(manager: &ActorId) -> NodeTemplate {
    NodeTemplate {
        manager: manager.clone(),
        base: NodeConfig {
            id: ActorId::new("placeholder"),
            manager: None,
            registry: None,
            capacity: Capacity::of("cpu", 4),
            heartbeat: HeartbeatConfig::default(),
            sensor: SensorSpec::default(),
            refresh_ms: 1000,
            ttl_ms: 3000,
        },
    }
}

#[test]
fn launch_creates_heartbeating_nodes() {
    let (mut fabric, boot) = manager_only_fabric();
    let desc = parse(BUNDLED).unwrap();
    let plan = resolve(&desc, &bindings(&[("NODES", "h1 h2 h3")]), "jadeNode").unwrap();
    let created = launch(&mut fabric, &plan, &template(&boot)).unwrap();
    assert_eq!(
        created,
        vec![ActorId::new("h1"), ActorId::new("h2"), ActorId::new("h3")]
    );
    fabric.run_until(SimTime::from_millis(3000));
    for host in ["h1", "h2", "h3"] {
        let beats = fabric
            .trace()
            .records()
            .iter()
            .filter(|r| {
                r.kind == TraceKind::Deliver
                    && r.to == "boot"
                    && r.payload.starts_with(&format!("hb node={host}"))
            })
            .count();
        assert!(beats >= 2, "{host} heartbeats: {beats}");
    }
}

#[test]
fn launch_is_atomic_on_errors() {
    let (mut fabric, boot) = manager_only_fabric();
    let plan = LaunchPlan {
        targets: vec![("grid".to_string(), vec!["h1".into(), "h1".into()])],
        command: "jadeNode".to_string(),
    };
    assert!(matches!(
        launch(&mut fabric, &plan, &template(&boot)).unwrap_err(),
        LaunchError::DuplicateTarget(_)
    ));
    assert!(!fabric.has_actor(&ActorId::new("h1")));

    let empty = LaunchPlan {
        targets: vec![("grid".to_string(), Vec::new())],
        command: "jadeNode".to_string(),
    };
    assert!(matches!(
        launch(&mut fabric, &empty, &template(&boot)).unwrap_err(),
        LaunchError::NoTargets
    ));

    let unknown = LaunchPlan {
        targets: vec![("grid".to_string(), vec!["h1".into()])],
        command: "mystery".to_string(),
    };
    assert!(matches!(
        launch(&mut fabric, &unknown, &template(&boot)).unwrap_err(),
        LaunchError::UnknownTemplate(_)
    ));
}

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,8}".prop_map(|s| s)
}

prop_compose! {
    fn arb_descriptor()(
        vars in prop::collection::btree_set(ident(), 0..3),
        vnodes in prop::collection::btree_set(ident(), 1..4),
        kinds in prop::collection::vec("(ssh|oar|local)", 1..4),
        timeouts in prop::collection::vec(1000u64..60_000, 1..4),
    ) -> DeploymentDescriptor {
        let vars: Vec<String> = vars.into_iter().collect();
        let vnodes: Vec<String> = vnodes.into_iter().collect();
        let mut desc = DeploymentDescriptor::default();
        for (i, v) in vars.iter().enumerate() {
            let default = if i % 2 == 0 { Some(format!("host-{i}")) } else { None };
            desc.variables.push((format!("V_{v}"), default));
        }
        for (i, name) in vnodes.iter().enumerate() {
            desc.virtual_nodes.push(VirtualNode {
                name: name.clone(),
                multiplicity: if i % 2 == 0 { Multiplicity::Multiple } else { Multiplicity::Single },
                timeout_ms: timeouts[i % timeouts.len()],
            });
            let pname = format!("p_{name}");
            desc.mappings.push((name.clone(), pname.clone()));
            let expr = if vars.is_empty() {
                format!("host-{i}")
            } else {
                format!("host-{i} ${{V_{}}}", vars[i % vars.len()])
            };
            desc.process_definitions.push(ProcessDefinition {
                name: pname,
                launcher_kind: kinds[i % kinds.len()].clone(),
                hostlist_expr: expr,
            });
        }
        desc
    }
}

proptest! {
    // Round-trip: rendering then reparsing reproduces the structure.
    #[test]
    fn render_parse_round_trip(desc in arb_descriptor()) {
        let rendered = desc.render();
        let reparsed = parse(&rendered).unwrap();
        prop_assert_eq!(&reparsed, &desc);
        prop_assert_eq!(parse(&reparsed.render()).unwrap(), desc);
    }
}
