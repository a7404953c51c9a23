use clap::{Parser, Subcommand, ValueEnum};
use log::{error, info};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use wecs::experiments::{self, RunConfig, Table};
use wecs::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "wecs", version, about = "W-type entangled coherent states of spin ensembles: sweeps and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV destination; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweep points.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[arg(long, global = true, value_enum)]
    engine: Option<EngineArg>,
    /// Override one configuration key, e.g. `--set D=10`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Fidelity of one preparation step against its coupling.
    StepFidelity {
        #[arg(long)]
        step: Option<usize>,
    },
    /// Protocol fidelity against D = δ_b/g_b in both preparation modes.
    SweepD,
    /// Step-4 fidelity, |β| and cavity photons against time.
    TimeTrace,
    /// One protocol run at the configured parameters.
    FullRun,
    /// Cavity–ensemble swap of a coherent state.
    StateTransfer,
    /// Spin micro-model against the collective bosonic mode.
    BosonizationCheck,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum EngineArg {
    Factorized,
    Brute,
    Effective,
    Lossless,
}

impl EngineArg {
    fn key(self) -> &'static str {
        match self {
            Self::Factorized => "factorized",
            Self::Brute => "brute",
            Self::Effective => "effective",
            Self::Lossless => "lossless",
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut overrides = cli.set.iter().map(|s| experiments::parse_override(s)).collect::<Result<Vec<_>>>()?;
    if let Some(e) = cli.engine {
        overrides.push(("engine".into(), e.key().into()));
    }
    if let Command::StepFidelity { step: Some(k) } = cli.command {
        overrides.push(("step".into(), k.to_string()));
    }
    RunConfig::from_text(&text, &overrides)
}

fn name(c: Command) -> &'static str {
    match c {
        Command::StepFidelity { .. } => "step-fidelity",
        Command::SweepD => "sweep-d",
        Command::TimeTrace => "time-trace",
        Command::FullRun => "full-run",
        Command::StateTransfer => "state-transfer",
        Command::BosonizationCheck => "bosonization-check",
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    let jobs = cli.jobs.max(1);
    info!("{} with {jobs} worker(s)", name(cli.command));
    let table: Table = match cli.command {
        Command::StepFidelity { .. } => experiments::cmd_step_fidelity(&cfg, jobs)?,
        Command::SweepD => experiments::cmd_sweep_d(&cfg, jobs)?,
        Command::TimeTrace => experiments::cmd_time_trace(&cfg)?,
        Command::FullRun => experiments::cmd_full_run(&cfg)?,
        Command::StateTransfer => experiments::cmd_state_transfer(&cfg)?,
        Command::BosonizationCheck => experiments::cmd_bosonization(&cfg, jobs)?,
    };
    let mut comments = format!("# command = {}\n", name(cli.command));
    if let Command::StepFidelity { .. } = cli.command {
        comments.push_str(&format!("# sweep_variable = {}\n", experiments::step_variable(cfg.step)));
    }
    comments.push_str(&cfg.echo());
    match &cli.out {
        Some(path) => {
            let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            table.write(BufWriter::new(f), &comments)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table.write(&mut lock, &comments)?;
            lock.flush().map_err(|e| Error::Io(e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
