use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fqfold_cli::{failure_record, run, sweep, write, Method, RunConfig, RunError};

#[derive(Parser)]
#[command(name = "fqfold", version, about = "Fold points of -Δu = λu^q + u^γ")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the method selected in the config.
    Run(Common),
    /// Run saddle, fold, branch and (interval/disk) oracle and compare.
    Crosscheck(Common),
    /// Probe a list of λ values or compute λ* over a list of γ values.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "FQ_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, kind) = match &cli.command {
        Command::Run(c) => (c, 0),
        Command::Crosscheck(c) => (c, 1),
        Command::Sweep(c) => (c, 2),
    };
    let mut cfg = match RunConfig::load(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if kind == 1 {
        cfg.method = Method::Crosscheck;
    }
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: thread pool: {e}");
        }
    }
    for w in cfg.params().map(|p| p.warnings()).unwrap_or_default() {
        eprintln!("warning: {w}");
    }
    let result = if kind == 2 { sweep(&cfg) } else { run(&cfg) };
    match result {
        Ok(outcome) => match write(&cfg, &outcome) {
            Ok(paths) => {
                println!("{}", serde_json::to_string_pretty(&outcome.record).unwrap_or_default());
                for p in paths {
                    eprintln!("wrote {}", p.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: cannot write output: {e}");
                ExitCode::from(1)
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            if let RunError::Method(_) = e {
                let rec = fqfold_cli::Outcome { record: failure_record(&cfg, &e), files: vec![] };
                let _ = write(&cfg, &rec);
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
