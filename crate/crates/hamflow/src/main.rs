use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hamflow::config::{schema_json, BatchConfig};
use hamflow::{acceptance, run_batch, Error};

/// Runs hamflow experiment batches, or the acceptance suite when no config is given.
#[derive(Debug, Parser)]
#[command(name = "hamflow", version)]
struct Cli {
    /// Batch configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, env = "HAMFLOW_OUT", default_value = "hamflow-out")]
    out: PathBuf,
    /// Acceptance criteria to run, by name or number (comma separated).
    #[arg(long)]
    filter: Option<String>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Multiplies every tolerance (values above 1 loosen).
    #[arg(long, default_value_t = 1.0)]
    tolerance_scale: f64,
    /// Print the configuration JSON schema and exit.
    #[arg(long)]
    print_schema: bool,
    /// List acceptance criteria and exit.
    #[arg(long)]
    list: bool,
}

fn fail(e: &Error) -> ExitCode {
    let report = serde_json::to_string(&e.report()).unwrap_or_else(|_| format!("{{\"message\":{:?}}}", e.to_string()));
    eprintln!("{report}");
    ExitCode::from(e.exit_code() as u8)
}

fn run(cli: &Cli) -> Result<bool, Error> {
    if !(cli.tolerance_scale > 0.0) {
        return Err(Error::Config("--tolerance-scale must be positive".to_string()));
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.config {
        Some(path) => {
            if cli.filter.is_some() {
                return Err(Error::Config("--filter applies to the acceptance suite, not to batches".to_string()));
            }
            let cfg = BatchConfig::load(path)?;
            let outcomes = run_batch(&cfg, &cli.out, cli.tolerance_scale)?;
            let mut ok = true;
            for o in &outcomes {
                let status = match &o.result {
                    Ok(r) if r.passed() => "PASS".to_string(),
                    Ok(r) => {
                        let failed: Vec<_> = r.checks.iter().filter(|c| !c.pass).map(|c| c.line()).collect();
                        format!("FAIL {}", failed.join("; "))
                    }
                    Err(e) => format!("ERROR {e}"),
                };
                ok &= o.passed();
                println!("{:<24} {status}", o.name);
            }
            Ok(ok)
        }
        None => {
            let selected = acceptance::select(cli.filter.as_deref())?;
            let outcomes = acceptance::run(&selected, cli.tolerance_scale);
            for o in &outcomes {
                println!("{}", o.line());
            }
            std::fs::create_dir_all(&cli.out).map_err(|e| Error::Io { path: cli.out.clone(), source: e })?;
            let p = cli.out.join("acceptance.json");
            std::fs::write(&p, serde_json::to_string_pretty(&outcomes)? + "\n").map_err(|e| Error::Io { path: p.clone(), source: e })?;
            let passed = outcomes.iter().filter(|o| o.pass).count();
            println!("{passed}/{} criteria passed", outcomes.len());
            Ok(passed == outcomes.len())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_schema {
        print!("{}", schema_json());
        return ExitCode::SUCCESS;
    }
    if cli.list {
        for c in acceptance::CRITERIA {
            println!("{:>2} {:<18} {}", c.id, c.name, c.title);
        }
        return ExitCode::SUCCESS;
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => fail(&e),
    }
}
