use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use swarmsched::exact::{solve_exact, ExactStatus, SolveOptions};
use swarmsched::greedy::{solve_greedy, GreedyOptions};
use swarmsched::stochastic::BufferMode;
use swarmsched::validator::validate;
use swarmsched::workbench::{
    emit_plots, generate_instance, load_instance, load_schedule, median, relative_to, run_benchmark,
    save_instance, simulate_execution, write_records, GeneratorConfig, SolverKind, SuiteConfig, WorkbenchError,
};

const EXIT_INVALID: u8 = 1;
const EXIT_LIMIT: u8 = 3;

#[derive(Parser)]
#[command(name = "swarmsched", version, about = "Multi-robot coalition scheduling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Greedy,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Generate {
        #[arg(long)]
        l: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Place robot starts over a full circle.
        #[arg(long)]
        full_circle: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve an instance and print or write the result JSON.
    Solve {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "corrected")]
        buffer_mode: BufferMode,
        /// Exact solver wall-clock limit in seconds.
        #[arg(long, default_value_t = 300.0)]
        time_limit: f64,
        #[arg(long, default_value_t = 10_000_000)]
        node_limit: u64,
    },
    /// Check a schedule against every constraint.
    Validate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, default_value = "corrected")]
        buffer_mode: BufferMode,
    },
    /// Monte-Carlo replay of a schedule with sampled delays.
    Simulate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "corrected")]
        buffer_mode: BufferMode,
    },
    /// Run a benchmark suite and write the records as CSV.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render SVG box plots from a benchmark CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn emit(value: &impl Serialize, out: Option<&Path>) -> Result<(), WorkbenchError> {
    let text = serde_json::to_string_pretty(value).expect("result serializes");
    match out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| WorkbenchError::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8, WorkbenchError> {
    match cli.command {
        Command::Generate {
            l,
            m,
            n,
            seed,
            full_circle,
            out,
        } => {
            let config = GeneratorConfig {
                full_circle,
                ..GeneratorConfig::new(l, m, n, seed)
            };
            save_instance(&out, &generate_instance(&config)?)?;
            Ok(0)
        }
        Command::Solve {
            method,
            instance,
            out,
            buffer_mode,
            time_limit,
            node_limit,
        } => {
            let inst = load_instance(&instance)?;
            match method {
                Method::Greedy => {
                    let sol = solve_greedy(&inst, GreedyOptions::with_mode(buffer_mode))?;
                    let result = json!({
                        "schedule": sol.schedule,
                        "makespan": sol.makespan(),
                        "status": "heuristic",
                        "incumbents": [[0.0, sol.makespan()]],
                    });
                    emit(&result, out.as_deref())?;
                    Ok(0)
                }
                Method::Exact => {
                    let options = SolveOptions {
                        time_limit_s: time_limit,
                        node_limit,
                        mode: buffer_mode,
                        ..SolveOptions::default()
                    };
                    let res = solve_exact(&inst, &options)?;
                    let incumbents: Vec<[f64; 2]> =
                        res.incumbents.iter().map(|c| [c.elapsed_s, c.makespan]).collect();
                    let result = json!({
                        "schedule": res.schedule,
                        "makespan": res.makespan,
                        "status": res.status,
                        "incumbents": incumbents,
                    });
                    emit(&result, out.as_deref())?;
                    Ok(match res.status {
                        ExactStatus::ProvedOptimal => 0,
                        ExactStatus::IncumbentOnly => EXIT_LIMIT,
                        ExactStatus::Infeasible | ExactStatus::Unknown => EXIT_INVALID,
                    })
                }
            }
        }
        Command::Validate {
            instance,
            schedule,
            buffer_mode,
        } => {
            let inst = load_instance(&instance)?;
            let sched = load_schedule(&schedule)?;
            let report = validate(&inst, &sched, buffer_mode);
            emit(&report, None)?;
            Ok(if report.feasible { 0 } else { EXIT_INVALID })
        }
        Command::Simulate {
            instance,
            schedule,
            trials,
            seed,
            buffer_mode,
        } => {
            let inst = load_instance(&instance)?;
            let sched = load_schedule(&schedule)?;
            let report = validate(&inst, &sched, buffer_mode);
            if !report.feasible {
                emit(&report, None)?;
                return Ok(EXIT_INVALID);
            }
            emit(&simulate_execution(&inst, &sched, trials, seed, buffer_mode)?, None)?;
            Ok(0)
        }
        Command::Bench { suite, out } => {
            let text = std::fs::read_to_string(&suite).map_err(|e| WorkbenchError::Io {
                path: suite.clone(),
                source: e,
            })?;
            let config: SuiteConfig =
                serde_json::from_str(&text).map_err(|e| WorkbenchError::Config(format!("{}: {e}", suite.display())))?;
            let records = run_benchmark(&config, Some(&out))?;
            let rel: Vec<_> = relative_to(&records, SolverKind::Exact)
                .into_iter()
                .filter(|r| r.solver != SolverKind::Exact)
                .collect();
            if !rel.is_empty() {
                let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
                let rel_path = out.with_file_name(format!("{stem}_relative.csv"));
                write_records(&rel_path, &rel)?;
                let costs: Vec<f64> = rel.iter().map(|r| r.relative_cost).collect();
                eprintln!(
                    "{} records, median relative cost {:.4} ({})",
                    records.len(),
                    median(&costs).unwrap_or(f64::NAN),
                    rel_path.display()
                );
            } else {
                eprintln!("{} records", records.len());
            }
            Ok(0)
        }
        Command::Plot { csv, out_dir } => {
            for path in emit_plots(&csv, &out_dir)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
