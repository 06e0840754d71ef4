//! CLI: generate scenarios, solve placements, export LP files, and run the
//! exact-vs-baseline experiment sweep.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fogpon::experiment::{emit_reports, run_experiment, summary_table, ExperimentSpec, Mode};
use fogpon::model::{validate_scenario, Scenario, Topology};
use fogpon::power::total_power;
use fogpon::scenario::{baseline_place, default_topology, generate_scenario, GeneratorParams};
use fogpon::solver::{solve_exact, SolveResult, SolveStatus, SolverConfig};
use fogpon::{build_milp, write_lp};

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "fogpon", about = "Energy-aware VM placement over a WDM-PON fog fabric")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TopologyArg {
    /// JSON topology file overriding the built-in 3x2x4 fabric.
    #[arg(long, global = true)]
    topology: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random scenario and write it as JSON.
    Generate {
        #[arg(long)]
        vms: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        topology: TopologyArg,
    },
    /// Solve a scenario file exactly or with the random baseline.
    Solve {
        scenario: PathBuf,
        #[arg(long, value_parser = ["exact", "baseline"], default_value = "exact")]
        mode: String,
        /// Baseline placement seed (baseline mode only).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000_000)]
        node_limit: u64,
        #[arg(long)]
        no_symmetry: bool,
    },
    /// Run the exact-vs-baseline sweep and write CSV/JSON reports.
    Experiment {
        /// Comma-separated VM counts, e.g. 10,15,20.
        #[arg(long, default_value = "10,15,20")]
        vms: String,
        /// Seeds as a..b range or comma list, e.g. 1..20 or 1,2,5.
        #[arg(long, default_value = "1..20")]
        seeds: String,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000_000)]
        node_limit: u64,
        #[command(flatten)]
        topology: TopologyArg,
    },
    /// Export a scenario's MILP as an LP-format file.
    ExportLp {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_topology(arg: &TopologyArg) -> Result<Topology, String> {
    match &arg.topology {
        None => Ok(default_topology()),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read topology {}: {e}", path.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| format!("invalid topology {}: {e}", path.display()))
        }
    }
}

fn load_scenario(path: &PathBuf) -> Result<Scenario, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read scenario {}: {e}", path.display()))?;
    let scenario: Scenario = serde_json::from_str(&text)
        .map_err(|e| format!("invalid scenario {}: {e}", path.display()))?;
    validate_scenario(scenario).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("  {e}")).collect();
        format!("scenario {} fails validation:\n{}", path.display(), lines.join("\n"))
    })
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = text.split_once("..") {
        let lo: u64 = a.trim().parse().map_err(|_| format!("bad seed range: {text}"))?;
        let hi: u64 = b.trim().parse().map_err(|_| format!("bad seed range: {text}"))?;
        if lo > hi {
            return Err(format!("empty seed range: {text}"));
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| format!("bad seed: {s}")))
        .collect()
}

fn parse_counts(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| format!("bad vm count: {s}")))
        .collect()
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run() -> Result<u8, String> {
    match Cli::parse().command {
        Command::Generate {
            vms,
            seed,
            out,
            topology,
        } => {
            let topo = load_topology(&topology)?;
            let scenario = generate_scenario(&GeneratorParams::new(vms, seed), &topo)
                .map_err(|e| e.to_string())?;
            let mut text =
                serde_json::to_string_pretty(&scenario).map_err(|e| e.to_string())?;
            text.push('\n');
            fs::write(&out, text).map_err(|e| format!("cannot write {}: {e}", out.display()))?;
            Ok(0)
        }
        Command::Solve {
            scenario,
            mode,
            seed,
            out,
            node_limit,
            no_symmetry,
        } => {
            let sc = load_scenario(&scenario)?;
            let result = match mode.as_str() {
                "exact" => solve_exact(
                    &sc,
                    &SolverConfig {
                        node_limit,
                        symmetry_breaking: !no_symmetry,
                    },
                ),
                "baseline" => match baseline_place(&sc, seed) {
                    Ok(p) => {
                        let power = total_power(&p, &sc);
                        SolveResult {
                            status: SolveStatus::Optimal,
                            placement: Some(p),
                            power: Some(power),
                            nodes_explored: 0,
                            bound_at_root_w: 0.0,
                        }
                    }
                    Err(_) => SolveResult {
                        status: SolveStatus::Infeasible,
                        placement: None,
                        power: None,
                        nodes_explored: 0,
                        bound_at_root_w: 0.0,
                    },
                },
                _ => unreachable!("clap restricts mode values"),
            };
            let mut text = serde_json::to_string_pretty(&result).map_err(|e| e.to_string())?;
            text.push('\n');
            write_or_print(&out, &text)?;
            Ok(if result.status == SolveStatus::Infeasible {
                EXIT_INFEASIBLE
            } else {
                0
            })
        }
        Command::Experiment {
            vms,
            seeds,
            csv,
            json,
            node_limit,
            topology,
        } => {
            let spec = ExperimentSpec {
                vm_counts: parse_counts(&vms)?,
                seeds: parse_seeds(&seeds)?,
                modes: vec![Mode::Exact, Mode::Baseline],
                topology: load_topology(&topology)?,
                solver: SolverConfig {
                    node_limit,
                    symmetry_breaking: true,
                },
            };
            let started = std::time::Instant::now();
            let (rows, summary) = run_experiment(&spec).map_err(|e| e.to_string())?;
            emit_reports(&rows, &summary, csv.as_deref(), json.as_deref())
                .map_err(|e| e.to_string())?;
            print!("{}", summary_table(&summary));
            eprintln!(
                "experiment: {} rows in {:.1}s",
                rows.len(),
                started.elapsed().as_secs_f64()
            );
            Ok(0)
        }
        Command::ExportLp { scenario, out } => {
            let sc = load_scenario(&scenario)?;
            let inst = build_milp(&sc).map_err(|e| e.to_string())?;
            fs::write(&out, write_lp(&inst))
                .map_err(|e| format!("cannot write {}: {e}", out.display()))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
