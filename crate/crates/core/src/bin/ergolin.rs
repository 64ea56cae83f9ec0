use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use ergolin::experiments::{self, ExperimentConfig, ExperimentError};
use ergolin::witnesses::{verify_bundle, CertificateBundle};

const EXIT_VALIDATION: u8 = 1;
const EXIT_ASSERTION: u8 = 2;

#[derive(Parser)]
#[command(name = "ergolin", version, about = "Orbit statistics and invariant-measure experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment and write its artifacts.
    Run(RunArgs),
    /// List the available experiments.
    List {
        /// Print the catalog as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Re-derive every claim of a certificate file.
    VerifyCertificate {
        file: PathBuf,
        /// Print the recomputed certificate as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment name; may also come from the config file.
    experiment: Option<String>,
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON operator spec replacing the default weighted shift.
    #[arg(long)]
    operator: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated radii.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Output directory (default `ergolin-out`).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    depth: Option<u32>,
    /// Tolerance override `name=value`; repeatable.
    #[arg(long = "tol", value_parser = parse_tol)]
    tolerances: Vec<(String, f64)>,
    /// Print the summary as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected name=value")?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((k.trim().to_string(), v))
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("ERGOLIN_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("ERGOLIN_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        return Err("ERGOLIN_THREADS must be a positive integer".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn run(args: RunArgs) -> Result<bool, ExperimentError> {
    let file = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let flags = ExperimentConfig {
        experiment: args.experiment,
        operator: args.operator,
        horizon: args.horizon,
        trials: args.trials,
        seed: args.seed,
        radii: args.radii,
        output: args.output,
        eps: args.eps,
        depth: args.depth,
        tolerances: args.tolerances.into_iter().collect::<BTreeMap<_, _>>(),
    };
    let plan = file.overlay(flags).resolve()?;
    let start = Instant::now();
    let out = experiments::run(&plan)?;
    let dir = out.write_to(&plan.output)?;
    if args.json {
        print!("{}", out.report.to_json());
    } else {
        print!("{}", out.report.render());
        for t in plan.experiment.tolerances() {
            println!("tolerance   {} = {} ({})", t.0, plan.params.tolerances[t.0], t.2);
        }
        println!("artifacts   {}", dir.display());
    }
    eprintln!("elapsed     {:.2} s", start.elapsed().as_secs_f64());
    Ok(out.report.pass)
}

fn verify(file: PathBuf, json: bool) -> Result<bool, String> {
    let text = std::fs::read_to_string(&file).map_err(|e| format!("{}: {e}", file.display()))?;
    let bundle = CertificateBundle::from_json(&text).map_err(|e| e.to_string())?;
    let report = verify_bundle(&bundle).map_err(|e| e.to_string())?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{}", experiments::render_claims(&report.recomputed.claims));
        println!("recomputed  {}", if report.agrees { "matches the stored certificate" } else { "DIFFERS from the stored certificate" });
        println!("result      {}", if report.agrees && report.recomputed.pass { "PASS" } else { "FAIL" });
    }
    Ok(report.agrees && report.recomputed.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_VALIDATION);
    }
    let outcome = match cli.command {
        Command::List { json } => {
            if json {
                print!("{}", experiments::catalog_json());
            } else {
                for e in experiments::catalog() {
                    println!("{:<18} {}", e.name, e.description);
                    println!("{:<18} anchor: {}", "", e.anchor);
                }
            }
            Ok(true)
        }
        Command::Run(args) => run(args).map_err(|e| e.to_string()),
        Command::VerifyCertificate { file, json } => verify(file, json),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_ASSERTION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
