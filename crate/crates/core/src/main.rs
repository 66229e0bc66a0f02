use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use exterior_decay::config::{parse_config, RunConfig};
use exterior_decay::pipeline::{self, Command, Overrides};
use exterior_decay::{par, Error, Result};

#[derive(Parser)]
#[command(name = "exterior-decay", version, about = "Decaying radial solutions outside a ball: check, solve, lift, verify")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML run configuration (not used by `demo`)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Number of grid nodes N
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// T_max as a multiple of t0
    #[arg(long, global = true)]
    tmax_mult: Option<f64>,
    /// Fixed-point stopping tolerance
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for sampled band members
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Treat inconclusive items as failures
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Check the hypotheses only
    Check,
    /// Check and compute the fixed point and ODE solution
    Solve,
    /// Solve and lift to the radial profile
    Lift,
    /// Everything, including operator diagnostics
    Verify,
    /// Full run of the built-in canonical instance
    Demo,
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("EXTERIOR_DECAY_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config {
                path: "EXTERIOR_DECAY_THREADS".into(),
                detail: format!("`{v}` is not a positive integer"),
            }),
        },
    }
}

fn run(cli: &Cli) -> Result<i32> {
    par::init_threads(threads_from_env()?);
    let command = match cli.command {
        Cmd::Check => Command::Check,
        Cmd::Solve => Command::Solve,
        Cmd::Lift => Command::Lift,
        Cmd::Verify => Command::Verify,
        Cmd::Demo => Command::Demo,
    };
    let mut cfg = match (command, &cli.config) {
        (Command::Demo, _) => RunConfig::canonical(),
        (_, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            parse_config(&text)?
        }
        (_, None) => return Err(Error::invalid("--config is required for this subcommand")),
    };
    Overrides {
        grid_n: cli.grid_n,
        tmax_mult: cli.tmax_mult,
        tol: cli.tol,
        seed: cli.seed,
    }
    .apply(&mut cfg)?;
    let outcome = pipeline::run_pipeline(&cfg, command, cli.strict)?;
    let files = pipeline::emit_outputs(&outcome, &cli.out)?;
    for item in outcome.report.all_items() {
        println!(
            "{:<24} {:<13} margin {:>12.4e}  error {:>10.3e}",
            item.id.as_str(),
            format!("{:?}", item.verdict).to_lowercase(),
            item.margin,
            item.error_bound
        );
    }
    if let Some(sol) = &outcome.report.solution {
        println!("kappa = b0*t in [{:.10}, {:.10}]", sol.kappa_min, sol.kappa_max);
    }
    if let Some(r) = &outcome.report.radial {
        println!("decay slope {:.6} (bound {:.6})", r.measured_slope, r.decay_bound);
    }
    println!("overall: {:?}", outcome.overall());
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(outcome.exit_status())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
