use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gwa_core::config::RunConfig;
use gwa_core::conformance::{check, ArchitectureGraph, Ruleset};
use gwa_core::probes::{ProbeId, ProbeSpec};
use gwa_core::runtime::{replay_file, Agent};
use gwa_core::trace::read_jsonl;
use tracing_subscriber::EnvFilter;

/// Deterministic global-workspace agent runtime.
#[derive(Parser)]
#[command(name = "gwa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an agent and write its trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        ticks: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Trace file; overrides the configuration. `-` writes to stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a behavioural probe and report on it.
    Probe {
        #[arg(long, value_parser = parse_probe)]
        probe: ProbeId,
        /// Probe definition; the shipped one is used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Analyse this existing trace instead of running the probe.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Where to write the JSON report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check an architecture graph against a set of workspace conditions.
    Check {
        #[arg(long)]
        arch: PathBuf,
        #[arg(long, value_parser = parse_ruleset)]
        ruleset: Ruleset,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Re-run a scripted configuration and compare against a recorded trace.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_probe(s: &str) -> Result<ProbeId, String> {
    s.parse()
}

fn parse_ruleset(s: &str) -> Result<Ruleset, String> {
    s.parse()
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("error")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            ticks,
            seed,
            trace,
        } => cmd_run(&config, ticks, seed, trace),
        Command::Probe {
            probe,
            config,
            trace,
            report,
        } => cmd_probe(probe, config.as_deref(), trace.as_deref(), report),
        Command::Check { arch, ruleset, json } => cmd_check(&arch, ruleset, json),
        Command::Replay { trace, config } => cmd_replay(&trace, &config),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn cmd_run(config: &Path, ticks: Option<u64>, seed: Option<u64>, trace: Option<PathBuf>) -> Result<bool> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(t) = ticks {
        cfg.ticks = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let target = trace.or_else(|| cfg.trace_path.as_ref().map(|p| cfg.resolve(p)));
    let mut agent = Agent::from_config(cfg)?;
    match target.as_deref() {
        Some(p) if p != Path::new("-") => {
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            agent.stream_trace_to(Box::new(BufWriter::new(file)))?;
        }
        _ => agent.stream_trace_to(Box::new(std::io::stdout()))?,
    }
    agent.run()?;
    eprintln!(
        "ran {} tick(s): {} trace events, {} stored items, workspace holds {}",
        agent.tick(),
        agent.trace().len(),
        agent.stores.belief.len() + agent.stores.desire_and_plan.len(),
        agent.workspace.len()
    );
    Ok(true)
}

fn cmd_probe(id: ProbeId, config: Option<&Path>, trace: Option<&Path>, report: Option<PathBuf>) -> Result<bool> {
    let spec = match config {
        Some(p) => ProbeSpec::load(p)?,
        None => ProbeSpec::shipped(id),
    };
    if spec.id() != id {
        bail!(
            "{} defines the {} probe, not {id}",
            config.unwrap().display(),
            spec.id()
        );
    }
    let result = match trace {
        Some(t) => spec.analyze(&read_jsonl(t)?)?,
        None => spec.execute()?,
    };
    let path = report.unwrap_or_else(|| PathBuf::from(format!("probe-{id}.json")));
    std::fs::write(&path, result.to_json() + "\n").with_context(|| format!("writing {}", path.display()))?;
    print!("{result}");
    println!("  report: {}", path.display());
    Ok(result.passed)
}

fn cmd_check(arch: &Path, ruleset: Ruleset, json: bool) -> Result<bool> {
    let graph = ArchitectureGraph::load(arch)?;
    let report = check(&graph, ruleset)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{report}");
    }
    Ok(report.passed())
}

fn cmd_replay(trace: &Path, config: &Path) -> Result<bool> {
    let cfg = RunConfig::load(config)?;
    match replay_file(trace, cfg)? {
        None => {
            println!("replay identical");
            Ok(true)
        }
        Some(d) => {
            // Sequence numbers start at zero and count lines.
            println!("replay diverges at seq {}", d.line);
            println!("  recorded: {}", d.expected.as_deref().unwrap_or("<end of trace>"));
            println!("  replayed: {}", d.actual.as_deref().unwrap_or("<end of trace>"));
            Ok(false)
        }
    }
}
