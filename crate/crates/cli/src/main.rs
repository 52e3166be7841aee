use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use noir_core::generate::{generate_preset, Preset};
use noir_core::graph::NoirGraph;
use noir_core::io::{parse_config, parse_network, serialize_network, NetworkDocument};
use noir_core::sim::{emit_report, run, RunSummary};

const EXIT_VALIDATION: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "noir", version, about = "Traffic network simulation with MPC boundary control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file against the structural stability assumptions.
    Validate { network: PathBuf },
    /// Run a closed-loop simulation and write run_summary.json and CSV series.
    Simulate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic grid network.
    Generate {
        #[arg(long)]
        preset: Preset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::new(EXIT_IO, format!("cannot read {}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<NoirGraph, Failure> {
    let invalid = |e: &dyn std::fmt::Display| Failure::new(EXIT_VALIDATION, format!("{}: {e}", path.display()));
    let doc = parse_network(&read(path)?).map_err(|e| invalid(&e))?;
    doc.to_graph().map_err(|e| invalid(&e))
}

fn validate(network: &Path) -> Result<(), Failure> {
    let graph = load_network(network)?;
    let report = graph.validate();
    print!("{report}");
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::new(EXIT_VALIDATION, "network failed validation"))
    }
}

fn simulate(network: &Path, config: &Path, out: &Path) -> Result<(), Failure> {
    let graph = load_network(network)?;
    let cfg = parse_config(&read(config)?)
        .map_err(|e| Failure::new(EXIT_VALIDATION, format!("{}: {e}", config.display())))?;
    let mpc = cfg
        .mpc_config(&graph)
        .map_err(|e| Failure::new(EXIT_VALIDATION, e.to_string()))?;
    let log = run(&graph, &cfg, &mpc).map_err(|e| {
        let code = if e.is_infeasible() { EXIT_INFEASIBLE } else { EXIT_VALIDATION };
        Failure::new(code, e.to_string())
    })?;
    let paths = emit_report(&log, out)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot write report to {}: {e}", out.display())))?;

    let summary = RunSummary::from_log(&log);
    println!(
        "{} steps: {} optimal, {} clipped, {} relaxed",
        log.records.len(),
        summary.optimal_steps,
        summary.clipped_steps,
        summary.relaxed_steps
    );
    println!(
        "mean inflow {:.3}, mean outflow {:.3}, max KKT residual {:.3e}",
        summary.mean_sum_u, summary.mean_sum_v, summary.max_kkt_residual
    );
    println!("wrote {}", paths.summary.display());
    println!("wrote {}", paths.densities.display());
    println!("wrote {}", paths.boundary_flows.display());
    Ok(())
}

fn generate(preset: Preset, seed: u64, out: &Path) -> Result<(), Failure> {
    let graph = generate_preset(preset, seed).map_err(|e| Failure::new(EXIT_VALIDATION, e.to_string()))?;
    let bytes = serialize_network(&NetworkDocument::from_graph(&graph));
    fs::write(out, bytes).map_err(|e| Failure::new(EXIT_IO, format!("cannot write {}: {e}", out.display())))?;
    println!(
        "{preset} seed {seed}: {} elements ({} inlets, {} outlets, {} interior) -> {}",
        graph.n_total(),
        graph.n_in(),
        graph.n_out(),
        graph.n_interior(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Validate { network } => validate(network),
        Command::Simulate { network, config, out } => simulate(network, config, out),
        Command::Generate { preset, seed, out } => generate(*preset, *seed, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
