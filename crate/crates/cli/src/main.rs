//! `duio` — design and simulate distributed unknown-input observer networks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use duio_core::decomp::DecompositionMode;
use duio_core::sim::{NoiseSpec, SignalSpec};
use serde_json::json;

use duio_cli::builtin::BUILTIN_IDS;
use duio_cli::error::CliError;
use duio_cli::output::{gnuplot_script, summary_table, write_trace_csv};
use duio_cli::pipeline::{
    analyze_nodes, assumption_failures, check_nodes, design_network, load_scenario, simulate,
    LoadedScenario,
};

#[derive(Parser)]
#[command(
    name = "duio",
    version,
    about = "Design and simulate distributed unknown-input observer networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the per-node rank assumptions (exit 2 on any failure).
    Check(RunArgs),
    /// Print per-node decoupler and subspace-decomposition facts.
    Decompose(RunArgs),
    /// Synthesize all gains and print the design report as JSON.
    Design(RunArgs),
    /// Design, simulate, and emit the trace as CSV.
    Simulate(RunArgs),
    /// Design, simulate, and print summary statistics.
    Report(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file path or built-in id (example1-ring5, heatx-ring4,
    /// heatx-split).
    #[arg(value_name = "PATH|ID")]
    target: Option<String>,
    /// Alternative to the positional scenario argument.
    #[arg(long, value_name = "PATH|ID")]
    scenario: Option<String>,
    /// Override the decomposition mode.
    #[arg(long, value_parser = parse_mode)]
    decomposition: Option<DecompositionMode>,
    /// Override the measurement-noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the simulation horizon.
    #[arg(long)]
    horizon: Option<usize>,
    /// Zero out measurement noise.
    #[arg(long)]
    no_noise: bool,
    /// Zero out the unknown input.
    #[arg(long)]
    no_disturbance: bool,
    /// Comma-separated pole pool; forces the pole-placement fallback.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    poles: Option<Vec<f64>>,
    /// Directory for emitted files (stdout when omitted).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<DecompositionMode, String> {
    match s {
        "detectability" => Ok(DecompositionMode::Detectability),
        "observability" => Ok(DecompositionMode::Observability),
        _ => Err(format!(
            "unknown decomposition `{s}` (expected detectability or observability)"
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Check(args) => {
            let loaded = load(&args)?;
            let reports = check_nodes(&loaded.scenario)?;
            for (i, report) in reports.iter().enumerate() {
                if report.pass() {
                    println!("node {i}: PASS");
                } else {
                    println!("node {i}: FAIL — {}", report.failures().join("; "));
                }
            }
            let failures = assumption_failures(&reports);
            if failures.is_empty() {
                Ok(())
            } else {
                Err(CliError::AssumptionsFailed(failures.join("\n")))
            }
        }
        Command::Decompose(args) => {
            let loaded = load(&args)?;
            let analyses = analyze_nodes(&loaded.scenario)?;
            let rows: Vec<_> = analyses
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let dec = &a.decomposition;
                    let pa = &a.decoupler.p * &loaded.scenario.plant.a;
                    let triangular_residual =
                        (dec.d.transpose() * &pa * &dec.u).norm() / pa.norm().max(1.0);
                    let blind_residual = (&loaded.scenario.nodes[i].c * &dec.u).norm()
                        / loaded.scenario.nodes[i].c.norm().max(1.0);
                    json!({
                        "node": i,
                        "mode": dec.mode,
                        "detectable_dimension": dec.d.ncols(),
                        "undetectable_dimension": dec.nu,
                        "triangular_residual": triangular_residual,
                        "output_blindness_residual": blind_residual,
                        "boundary_ambiguous": dec.boundary_ambiguous,
                    })
                })
                .collect();
            emit_json(&args, "decompose.json", &serde_json::Value::Array(rows))
        }
        Command::Design(args) => {
            let loaded = load(&args)?;
            let options = effective_options(&loaded, &args);
            let (_, report) = design_network(&loaded, &options)?;
            emit_json(&args, "design.json", &serde_json::to_value(&report).unwrap())
        }
        Command::Simulate(args) => {
            let loaded = load(&args)?;
            let options = effective_options(&loaded, &args);
            let (design, report) = design_network(&loaded, &options)?;
            let trace = simulate(&loaded.scenario, &design)?;
            match &args.out {
                Some(dir) => {
                    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
                    let csv_path = dir.join("trace.csv");
                    let file = fs::File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
                    write_trace_csv(file, &trace)?;
                    let gp_path = dir.join("trace.gp");
                    fs::write(
                        &gp_path,
                        gnuplot_script(loaded.scenario.nodes.len(), "trace.csv"),
                    )
                    .map_err(|e| io_err(&gp_path, e))?;
                    let design_path = dir.join("design.json");
                    fs::write(
                        &design_path,
                        serde_json::to_string_pretty(&report).unwrap(),
                    )
                    .map_err(|e| io_err(&design_path, e))?;
                    eprintln!(
                        "wrote {}, {}, {}",
                        csv_path.display(),
                        gp_path.display(),
                        design_path.display()
                    );
                    print!("{}", summary_table(&trace));
                }
                None => {
                    let stdout = std::io::stdout().lock();
                    write_trace_csv(stdout, &trace)?;
                }
            }
            Ok(())
        }
        Command::Report(args) => {
            let loaded = load(&args)?;
            let options = effective_options(&loaded, &args);
            let (design, report) = design_network(&loaded, &options)?;
            let trace = simulate(&loaded.scenario, &design)?;
            print!("{}", summary_table(&trace));
            if args.out.is_some() {
                let payload = json!({
                    "design": report,
                    "summary": trace.summary,
                });
                emit_json(&args, "report.json", &payload)?;
            }
            Ok(())
        }
    }
}

/// Resolves the scenario argument and applies the command-line overrides.
fn load(args: &RunArgs) -> Result<LoadedScenario, CliError> {
    let source = args
        .target
        .as_deref()
        .or(args.scenario.as_deref())
        .ok_or_else(|| {
            CliError::Load(format!(
                "no scenario given; pass a file path or one of: {}",
                BUILTIN_IDS.join(", ")
            ))
        })?;
    let mut loaded = load_scenario(source)?;
    if let Some(mode) = args.decomposition {
        loaded.scenario.decomposition_mode = mode;
    }
    if let Some(seed) = args.seed {
        loaded.scenario.seed = seed;
    }
    if let Some(horizon) = args.horizon {
        loaded.scenario.horizon = horizon;
    }
    if args.no_noise {
        loaded.scenario.noise = NoiseSpec::Scalar { variance: 0.0 };
    }
    if args.no_disturbance {
        loaded.scenario.unknown_input = SignalSpec::Zero;
    }
    Ok(loaded)
}

/// Folds the `--poles` flag into the scenario's design options.
fn effective_options(
    loaded: &LoadedScenario,
    args: &RunArgs,
) -> duio_cli::pipeline::DesignOptions {
    let mut options = loaded.options.clone();
    if let Some(poles) = &args.poles {
        options.hinf = false;
        options.poles = Some(poles.clone());
    }
    options
}

/// Prints JSON to stdout, and also into `--out/<name>` when given.
fn emit_json(args: &RunArgs, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).unwrap();
    println!("{text}");
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source: e,
    }
}
