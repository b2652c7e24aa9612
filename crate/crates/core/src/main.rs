use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use hotspots::commands::{cmd_eig, cmd_pipeline, cmd_verify, install_workers, Outcome};
use hotspots::config::{key_help, parse_list, Config};
use hotspots::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "hotspots", version, about = "Hot spots of Neumann eigenfunctions on convex pairs, wings and barrels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ground eigenpair of a preset pair.
    Eig(Opts),
    /// Perturbation, wings, limit comparison and optional barrel sweep.
    Pipeline(Opts),
    /// Semigroup, barrier, Monte Carlo and ball checks.
    Verify(Opts),
}

#[derive(Args, Debug, Clone)]
struct Opts {
    /// Config file of `[section]` headers and `key = value` lines.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Run directory; defaults to `runs/<command>`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// rectangle, perturbed or wing.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    /// Single wing length (replaces the sweep).
    #[arg(long)]
    m: Option<f64>,
    /// Steepness for `--m`; defaults to m^2.
    #[arg(long)]
    l: Option<f64>,
    /// Comma-separated barrel dimensions.
    #[arg(long, value_name = "CSVINTS")]
    d_list: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

fn load(o: &Opts) -> Result<Config> {
    let mut c = match &o.config {
        Some(p) => Config::parse(&std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?)?,
        None => Config::default(),
    };
    if let Some(v) = &o.preset {
        c.preset = v.clone();
    }
    if let Some(v) = o.nx {
        c.nx = v;
    }
    if let Some(v) = o.ny {
        c.ny = v;
    }
    if let Some(v) = o.nt {
        c.nt = v;
    }
    if let Some(v) = o.eps {
        c.eps = v;
    }
    if let Some(m) = o.m {
        c.m = vec![m];
        c.l = o.l.map(|l| vec![l]).unwrap_or_default();
    } else if let Some(l) = o.l {
        c.l = vec![l; c.m.len()];
    }
    if let Some(v) = &o.d_list {
        c.d_list = parse_list("--d-list", v)?;
    }
    if let Some(v) = o.seed {
        c.seed = v;
    }
    if let Some(v) = o.workers {
        c.workers = v;
    }
    c.validate()?;
    Ok(c)
}

fn run(command: Command) -> Result<(Outcome, bool)> {
    let (name, opts) = match &command {
        Command::Eig(o) => ("eig", o),
        Command::Pipeline(o) => ("pipeline", o),
        Command::Verify(o) => ("verify", o),
    };
    let cfg = load(opts)?;
    install_workers(cfg.workers);
    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(name));
    let outcome = match command {
        Command::Eig(_) => cmd_eig(&cfg, &out)?,
        Command::Pipeline(_) => cmd_pipeline(&cfg, &out)?,
        Command::Verify(_) => cmd_verify(&cfg, &out)?,
    };
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for c in &outcome.checks {
        println!("{}", c.line());
    }
    println!("run directory: {}", out.display());
    // only verify treats a failed check as a numerical failure
    let hard = name == "verify";
    Ok((outcome, hard))
}

fn main() -> ExitCode {
    let matches = match Cli::command().after_help(key_help()).try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok((outcome, hard)) if hard && !outcome.passed() => ExitCode::from(2),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
