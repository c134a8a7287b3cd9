//! `octabush`: batch runs of bush simulations, fits, sweeps and checks.

mod commands;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;
use config::{load_file, Comparison, ConfigError, ModelKind, RunConfig};

#[derive(Parser)]
#[command(name = "octabush", version, about = "Bushes of nonlinear normal modes in the octahedral XY6 cluster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parent directory of `run-<timestamp>/`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true, value_enum)]
    model: Option<ModelKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the breathing, tetragonal and polar patterns.
    Modes,
    /// Integrate the full cluster or a reduced bush system.
    Simulate {
        /// Initial mode amplitude, e.g. `phi1=0.1` or `b=0.3`. Repeatable.
        #[arg(long, value_parser = parse_key_value)]
        excite: Vec<(String, f64)>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Least-squares fit of the reduced potential with a forbidden-term audit.
    Fit {
        #[arg(long)]
        vars: Option<String>,
        #[arg(long)]
        degree: Option<u32>,
        #[arg(long, value_enum)]
        compare: Option<Comparison>,
    },
    /// Amplitude sweeps.
    Sweep {
        #[command(subcommand)]
        kind: SweepKind,
    },
    /// Run the acceptance criteria.
    Check {
        /// Subset of criteria, e.g. `1,3,5`.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
        /// Shift one reference coefficient: `i,j,k:delta`.
        #[arg(long, hide = true)]
        perturb: Option<String>,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// `lo:hi:n`.
    #[arg(long)]
    range: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    periods: Option<f64>,
}

#[derive(Subcommand)]
enum SweepKind {
    /// Frequency against amplitude.
    Nu(SweepArgs),
    /// Secondary-mode amplitude against root amplitude.
    Transfer(SweepArgs),
}

fn parse_key_value(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("bad number `{v}`"))?;
    Ok((k.trim().to_string(), v))
}

fn base_config(common: &Common) -> Result<RunConfig, ConfigError> {
    let mut c = match &common.config {
        Some(path) => load_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &common.output {
        c.output = o.clone();
    }
    if let Some(w) = common.workers {
        c.workers = w;
    }
    if let Some(s) = common.seed {
        c.seed = s;
    }
    if let Some(m) = common.model {
        c.model = m;
    }
    Ok(c)
}

fn apply_sweep(c: &mut RunConfig, a: &SweepArgs) {
    if let Some(r) = &a.range {
        c.sweep.range = Some(r.clone());
    }
    if let Some(m) = &a.mode {
        c.sweep.mode = m.clone();
    }
    if let Some(p) = a.periods {
        c.sweep.periods = p;
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let json = cli.common.json;
    if let Command::Modes = cli.command {
        return commands::modes(json);
    }
    let mut config = base_config(&cli.common)?;
    match &cli.command {
        Command::Modes => unreachable!(),
        Command::Simulate { excite, dt, steps, stride } => {
            for (k, v) in excite {
                config.excite.insert(k.clone(), *v);
            }
            if dt.is_some() {
                config.integrator.dt = *dt;
            }
            if let Some(n) = steps {
                config.integrator.steps = *n;
            }
            if stride.is_some() {
                config.integrator.stride = *stride;
            }
            config.validate()?;
            commands::simulate(&config, json)
        }
        Command::Fit { vars, degree, compare } => {
            if let Some(v) = vars {
                config.fit.vars = v.clone();
            }
            if let Some(d) = degree {
                config.fit.degree = *d;
            }
            if compare.is_some() {
                config.fit.compare = *compare;
            }
            config.validate()?;
            commands::fit(&config, json)
        }
        Command::Sweep { kind: SweepKind::Nu(a) } => {
            apply_sweep(&mut config, a);
            config.validate()?;
            commands::sweep_nu(&config, json)
        }
        Command::Sweep { kind: SweepKind::Transfer(a) } => {
            apply_sweep(&mut config, a);
            config.validate()?;
            commands::sweep_transfer(&config, json, a.mode.is_some())
        }
        Command::Check { criteria, perturb } => {
            config.validate()?;
            let perturb = perturb.as_deref().map(commands::parse_perturbation).transpose()?;
            let ids: Vec<u8> = if criteria.is_empty() { (1..=11).collect() } else { criteria.clone() };
            commands::check(&config, json, &ids, perturb)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
