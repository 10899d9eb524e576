//! Command-line harness around the demix library.
//!
//! Every subcommand reads the same experiment config JSON: `gen` samples the
//! configured mixture to CSV, `run` executes the trials and emits the report,
//! `oracle` probes the frequency-domain estimate against the exact smoothed
//! density, and `budgets` prints analysis-grade next to desk-scale budgets.
//! Exit codes: 0 ok, 2 config error, 3 pipeline failure.

use clap::{Args, Parser, Subcommand};
use demix::rng::stream_id;
use demix::{
    coverage_sample_size, emit_report, probe_oracle, report_to_csv, report_to_json,
    run_experiment, sample_mixture, theory_budgets, ExperimentConfig, Mode, ReportFormat,
};
use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;

/// Probe grid size used by the `oracle` subcommand.
const ORACLE_GRID: usize = 100;

/// Center recovery for Gaussian mixtures via Fourier deconvolution.
#[derive(Parser)]
#[command(name = "demix-cli", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the configured mixture and emit the draw as CSV rows.
    Gen(CommonArgs),
    /// Execute the experiment config and emit the report.
    Run(CommonArgs),
    /// Tabulate the deconvolution estimate against the exact smoothed density.
    Oracle(CommonArgs),
    /// Print analysis-grade and desk-scale budgets side by side.
    Budgets(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: `csv` or `json`.
    #[arg(long)]
    format: Option<String>,
    /// Mode override: `theory` or `practice`.
    #[arg(long)]
    mode: Option<String>,
}

/// A failure carrying the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

type CliResult<T> = Result<T, Failure>;

fn config_err(e: impl Display) -> Failure {
    Failure {
        code: 2,
        message: e.to_string(),
    }
}

fn run_err(e: impl Display) -> Failure {
    Failure {
        code: 3,
        message: e.to_string(),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen(args) => gen(&args),
        Command::Run(args) => run(&args),
        Command::Oracle(args) => oracle(&args),
        Command::Budgets(args) => budgets(&args),
    }
}

/// Reads, overrides, and validates the config; all failures are exit 2.
fn load_config(args: &CommonArgs) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| config_err(format!("{}: {e}", args.config.display())))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text).map_err(config_err)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(ref mode) = args.mode {
        config.mode = mode.parse::<Mode>().map_err(config_err)?;
    }
    config.validate().map_err(config_err)?;
    Ok(config)
}

fn parse_format(args: &CommonArgs, default: ReportFormat) -> CliResult<ReportFormat> {
    match args.format {
        Some(ref f) => f.parse::<ReportFormat>().map_err(config_err),
        None => Ok(default),
    }
}

fn write_output(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| run_err(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn gen(args: &CommonArgs) -> CliResult<()> {
    let config = load_config(args)?;
    if parse_format(args, ReportFormat::Csv)? != ReportFormat::Csv {
        return Err(config_err("gen emits csv only"));
    }
    let params = config.mixture.instantiate(config.seed).map_err(run_err)?;
    // Same stream as trial 0 of `run`, so the draw is reproducible there.
    let samples =
        sample_mixture(&params, config.n, stream_id(&[config.seed, 0, 1])).map_err(run_err)?;
    write_output(&args.out, &samples.to_csv())
}

fn run(args: &CommonArgs) -> CliResult<()> {
    let config = load_config(args)?;
    let format = parse_format(args, ReportFormat::Json)?;
    let report = run_experiment(&config).map_err(run_err)?;
    match args.out {
        Some(ref path) => emit_report(&report, format, path).map_err(run_err),
        None => {
            let text = match format {
                ReportFormat::Csv => report_to_csv(&report),
                ReportFormat::Json => report_to_json(&report),
            };
            write_output(&None, &text)
        }
    }
}

fn oracle(args: &CommonArgs) -> CliResult<()> {
    let config = load_config(args)?;
    let format = parse_format(args, ReportFormat::Csv)?;
    let probe = probe_oracle(&config, ORACLE_GRID).map_err(run_err)?;
    let text = match format {
        ReportFormat::Json => serde_json::to_string_pretty(&probe).map_err(run_err)?,
        ReportFormat::Csv => {
            let mut out = String::from("index,estimate,exact\n");
            for (i, (e, t)) in probe.estimate.iter().zip(&probe.exact).enumerate() {
                out.push_str(&format!("{i},{e},{t}\n"));
            }
            out
        }
    };
    write_output(&args.out, &text)
}

fn budgets(args: &CommonArgs) -> CliResult<()> {
    let config = load_config(args)?;
    let params = config.mixture.instantiate(config.seed).map_err(run_err)?;
    let k = params.k0().max(2);
    let (theory_m, theory_n) = theory_budgets(k, &config.constants).map_err(run_err)?;
    let theory_boost = (100.0 * (1.0 / config.constants.eta).ln()).ceil() as u64;
    let coverage_n =
        coverage_sample_size(k, config.constants.c, config.constants.eta).map_err(run_err)?;
    let m_aug = if config.m_aug == 0 {
        config.m
    } else {
        config.m_aug
    };
    let aug_runs = if config.aug_runs == 0 {
        config.boost_runs
    } else {
        config.aug_runs
    };
    let rows = [
        ("k", k.to_string()),
        ("theory_m", theory_m.to_string()),
        ("theory_n", theory_n.to_string()),
        ("theory_boost_runs", theory_boost.to_string()),
        ("practice_n", config.n.to_string()),
        ("practice_m", config.m.to_string()),
        ("practice_m_aug", m_aug.to_string()),
        ("practice_boost_runs", config.boost_runs.to_string()),
        ("practice_aug_runs", aug_runs.to_string()),
        ("practice_refine_iters", config.refine_iters.to_string()),
        ("coverage_n", coverage_n.to_string()),
    ];
    let text = match args.format.as_deref() {
        None => rows
            .iter()
            .map(|(key, value)| format!("{key}: {value}\n"))
            .collect::<String>(),
        Some(f) => match f.parse::<ReportFormat>().map_err(config_err)? {
            ReportFormat::Csv => {
                let mut out = String::from("quantity,value\n");
                for (key, value) in &rows {
                    out.push_str(&format!("{key},{value}\n"));
                }
                out
            }
            ReportFormat::Json => {
                let doc = serde_json::json!({
                    "k": k,
                    "theory": {
                        "m": theory_m.to_string(),
                        "n": theory_n.to_string(),
                        "boost_runs": theory_boost,
                    },
                    "practice": {
                        "n": config.n,
                        "m": config.m,
                        "m_aug": m_aug,
                        "boost_runs": config.boost_runs,
                        "aug_runs": aug_runs,
                        "refine_iters": config.refine_iters,
                    },
                    "coverage_n": coverage_n,
                });
                serde_json::to_string_pretty(&doc).map_err(run_err)?
            }
        },
    };
    write_output(&args.out, &text)
}
