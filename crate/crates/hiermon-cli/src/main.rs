//! `hiermon` — scenario runner, trace verifier, and descriptor tool.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use hiermon::descriptor;
use hiermon::runner::{run_file, RunOptions};
use hiermon::verify::{verify_file, Oracle};

#[derive(Parser)]
#[command(name = "hiermon", version, about = "Hierarchical autonomic management simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write trace, report, and metrics.
    Run(RunArgs),
    /// Re-check a trace with an independent oracle.
    Verify(VerifyArgs),
    /// Parse a deployment descriptor; with bindings, resolve its launch plan.
    ParseDescriptor(ParseArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Override the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scenario's virtual duration (ms).
    #[arg(long)]
    duration: Option<u64>,
    /// Output directory; results land in <out>/<scenario>/<seed>/.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Descriptor variable bindings, -D NAME=VALUE (repeatable).
    #[arg(short = 'D', value_name = "NAME=VALUE")]
    defines: Vec<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Trace file produced by `run`.
    trace: PathBuf,
    /// Which property to recompute: aggregation, conservation, or repair.
    #[arg(long)]
    oracle: String,
}

#[derive(Args)]
struct ParseArgs {
    /// Descriptor file.
    file: PathBuf,
    /// Variable bindings, -D NAME=VALUE (repeatable).
    #[arg(short = 'D', value_name = "NAME=VALUE")]
    defines: Vec<String>,
    /// Command template to plan for when resolving.
    #[arg(long, default_value = "jadeNode")]
    command: String,
}

fn parse_defines(defines: &[String]) -> anyhow::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for d in defines {
        let Some((name, value)) = d.split_once('=') else {
            bail!("-D expects NAME=VALUE, got {d:?}");
        };
        out.insert(name.to_string(), value.to_string());
    }
    Ok(out)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => {
            let opts = RunOptions {
                seed: args.seed,
                duration_ms: args.duration,
                out_dir: Some(args.out.clone()),
                bindings: parse_defines(&args.defines)?,
            };
            let outcome = run_file(&args.scenario, &opts)
                .with_context(|| format!("running {}", args.scenario.display()))?;
            let report = &outcome.report;
            println!(
                "{} seed={} duration={}ms: {} trace records",
                report.scenario,
                report.seed,
                report.duration_ms,
                outcome.trace_text.lines().count()
            );
            let dir = args
                .out
                .join(&report.scenario)
                .join(report.seed.to_string());
            println!("outputs in {}", dir.display());
            let mut failed = 0;
            for a in &report.assertions {
                let status = if a.passed { "pass" } else { "FAIL" };
                println!("assert [{status}] {} ({})", a.description, a.detail);
                if !a.passed {
                    failed += 1;
                }
            }
            if failed > 0 {
                eprintln!("{failed} assertion(s) failed");
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => {
            let oracle = Oracle::parse(&args.oracle)
                .with_context(|| format!("unknown oracle {:?}", args.oracle))?;
            let report = verify_file(&args.trace, oracle)?;
            print!("{}", report.render());
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::ParseDescriptor(args) => {
            let text = std::fs::read_to_string(&args.file)
                .with_context(|| format!("reading {}", args.file.display()))?;
            let desc = descriptor::parse(&text)?;
            println!(
                "descriptor: {} variable(s), {} virtual node(s), {} mapping(s), {} process(es)",
                desc.variables.len(),
                desc.virtual_nodes.len(),
                desc.mappings.len(),
                desc.process_definitions.len()
            );
            for v in &desc.virtual_nodes {
                let process = desc.mapping_for(&v.name).unwrap_or("-");
                let kind = desc
                    .process(process)
                    .map(|p| p.launcher_kind.as_str())
                    .unwrap_or("-");
                println!(
                    "  virtualnode {} -> process {process} ({kind}), timeout {}ms",
                    v.name, v.timeout_ms
                );
            }
            let bindings = parse_defines(&args.defines)?;
            if !bindings.is_empty() {
                let plan = descriptor::resolve(&desc, &bindings, &args.command)?;
                for (vnode, hosts) in &plan.targets {
                    println!("  {vnode}: {} target(s): {}", hosts.len(), hosts.join(" "));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
