//! `havnfp`: generate instances, solve them, run campaigns, serve the API.
//!
//! Exit codes: 0 success, 2 infeasible, 3 bad input, 1 anything else.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use havnfp::exact::ExactConfig;
use havnfp::greedy::{GreedyOptions, Policy, RequestOrder, SplitMode};
use havnfp::harness::{rows_from_csv, rows_to_csv, run_campaign, summarize, summary_to_csv, CampaignSpec};
use havnfp::instgen::{generate, GeneratorConfig};
use havnfp::model::{load_instance, save_instance, validate, Severity};
use havnfp::placement::{check_constraints, PlacementExport};
use havnfp::solve::{solve, Algorithm};
use havnfp::vns::{trace_to_json_lines, VnsConfig};
use havnfp::{Error, Placement};
use havnfp_service::session::ReportView;
use havnfp_service::ServiceConfig;
use serde_json::json;

#[derive(Parser)]
#[command(name = "havnfp", version, about = "High availability VNF placement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen {
        #[arg(long, default_value_t = 50)]
        requests: usize,
        #[arg(long, default_value_t = 1)]
        aps_per_request: usize,
        #[arg(long, default_value_t = 1.0)]
        multiplier: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON generator config; flags above are ignored when given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve one instance and print its report.
    Solve(SolveArgs),
    /// Check an instance, and optionally a placement for it.
    Check {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        placement: Option<PathBuf>,
    },
    /// Run every algorithm over a grid of generated instances.
    Campaign {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write per-group means here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Group campaign rows and average them.
    Summarize {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Directory for session snapshots.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Seconds a solve call waits before answering 202.
        #[arg(long, default_value_t = 2.0)]
        sync_window: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Greedy,
    Vns,
    Exact,
    Nextfit,
}

#[derive(clap::Args)]
struct SolveArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Algo::Vns)]
    algo: Algo,
    #[arg(long, default_value = "bestfit")]
    policy: Policy,
    #[arg(long, default_value = "fallback")]
    split: SplitMode,
    /// Place requests by decreasing demand.
    #[arg(long)]
    sort_demand_desc: bool,
    /// VNS: seconds per starting point.
    #[arg(long)]
    time_limit_per_start: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// VNS: iterations per starting point.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Exact: search nodes before giving up on proving optimality.
    #[arg(long)]
    node_budget: Option<u64>,
    /// Exact: seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Exact: fraction grid for split requests, e.g. 2 for halves.
    #[arg(long)]
    split_grid: Option<u32>,
    #[arg(long, default_value_t = 4)]
    max_servers: usize,
    #[arg(long, default_value_t = 8)]
    max_requests: usize,
    /// Write the placement here.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the VNS trace here as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_) => 2,
            Error::Input(_) | Error::Parse { .. } | Error::OverBudget(_) | Error::Csv(_) | Error::Unassigned(_) => 3,
            Error::Io(_) => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 3,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure {
            code: 1,
            message: format!("{}: {e}", p.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn seconds(value: Option<f64>, flag: &str) -> Result<Option<Duration>, Failure> {
    value
        .map(|s| Duration::try_from_secs_f64(s).map_err(|_| input_error(format!("--{flag} must be a non-negative number"))))
        .transpose()
}

fn algorithm(args: &SolveArgs) -> Result<Algorithm, Failure> {
    let order = if args.sort_demand_desc { RequestOrder::DemandDesc } else { RequestOrder::Input };
    Ok(match args.algo {
        Algo::Greedy => Algorithm::Greedy(GreedyOptions::new(args.policy).split(args.split).order(order)),
        Algo::Nextfit => Algorithm::NextFit,
        Algo::Vns => Algorithm::Vns(VnsConfig {
            per_start_time_limit: seconds(args.time_limit_per_start, "time-limit-per-start")?,
            max_iterations: args.max_iters,
            seed: args.seed,
            split: args.split,
            request_order: order,
            ..VnsConfig::default()
        }),
        Algo::Exact => Algorithm::Exact(ExactConfig {
            max_servers: args.max_servers,
            max_requests: args.max_requests,
            split_grid: args.split_grid,
            time_limit: seconds(args.time_limit, "time-limit")?,
            node_budget: args.node_budget,
        }),
    })
}

fn run_solve(args: SolveArgs) -> Result<(), Failure> {
    let instance = Arc::new(load_instance(&read(&args.input)?)?);
    let algorithm = algorithm(&args)?;
    let solution = solve(instance.clone(), &algorithm)?;
    let violations = check_constraints(&solution.placement);
    if !violations.is_empty() {
        return Err(Failure {
            code: 1,
            message: format!("solver produced an invalid placement: {}", violations[0]),
        });
    }
    if let Some(path) = &args.output {
        let text = serde_json::to_string_pretty(&solution.placement.export()).expect("placement serializes");
        write_or_print(Some(path), &text)?;
    }
    if let Some(path) = &args.trace {
        write_or_print(Some(path), &trace_to_json_lines(&solution.trace))?;
    }
    let summary = json!({
        "report": ReportView::new(&instance, &solution.report),
        "usedSplit": solution.used_split,
        "optimal": solution.optimal,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("report serializes"));
    Ok(())
}

fn run_check(input: &Path, placement: Option<&Path>) -> Result<(), Failure> {
    let instance = Arc::new(load_instance(&read(input)?)?);
    let issues = validate(&instance);
    for v in &issues {
        let tag = if v.severity == Severity::Error { "error" } else { "warning" };
        println!("{tag}: {v}");
    }
    if issues.iter().any(|v| v.severity == Severity::Error) {
        return Err(input_error("instance is invalid"));
    }
    let Some(path) = placement else {
        println!("instance ok: {} requests, {} servers", instance.requests().len(), instance.servers().len());
        return Ok(());
    };
    let export: PlacementExport = serde_json::from_str(&read(path)?).map_err(Error::from)?;
    let p = Placement::import(instance.clone(), &export)?;
    let violations = check_constraints(&p);
    for v in &violations {
        println!("violation: {v}");
    }
    if !violations.is_empty() {
        return Err(input_error(format!("{} constraint violations", violations.len())));
    }
    let report = p.evaluate()?;
    println!("{}", serde_json::to_string_pretty(&ReportView::new(&instance, &report)).expect("report serializes"));
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen {
            requests,
            aps_per_request,
            multiplier,
            seed,
            config,
            output,
        } => {
            let config = match config {
                Some(path) => serde_json::from_str(&read(&path)?).map_err(Error::from)?,
                None => GeneratorConfig::new(requests, aps_per_request, multiplier, seed),
            };
            let instance = generate(&config)?;
            write_or_print(output.as_deref(), &save_instance(&instance))
        }
        Command::Solve(args) => run_solve(args),
        Command::Check { input, placement } => run_check(&input, placement.as_deref()),
        Command::Campaign { spec, output, summary } => {
            let spec: CampaignSpec = match spec {
                Some(path) => serde_json::from_str(&read(&path)?).map_err(Error::from)?,
                None => CampaignSpec::default(),
            };
            let rows = run_campaign(&spec)?;
            write_or_print(output.as_deref(), &rows_to_csv(&rows)?)?;
            if let Some(path) = summary {
                write_or_print(Some(&path), &summary_to_csv(&summarize(&rows))?)?;
            }
            Ok(())
        }
        Command::Summarize { input, output } => {
            let rows = rows_from_csv(&read(&input)?)?;
            write_or_print(output.as_deref(), &summary_to_csv(&summarize(&rows))?)
        }
        Command::Serve {
            addr,
            data_dir,
            sync_window,
        } => {
            let addr = addr.parse().map_err(|e| input_error(format!("--addr: {e}")))?;
            let config = ServiceConfig {
                sync_window: seconds(Some(sync_window), "sync-window")?.unwrap_or_default(),
                persist_dir: data_dir,
                ..ServiceConfig::default()
            };
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure {
                code: 1,
                message: e.to_string(),
            })?;
            eprintln!("listening on http://{addr}/v1/sessions");
            runtime.block_on(havnfp_service::serve(addr, config)).map_err(|e| Failure {
                code: 1,
                message: e.to_string(),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("havnfp: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
