use clap::{Parser, Subcommand, ValueEnum};
use fblmimo::analysis::{channel_seed, evaluate};
use fblmimo::channel::draw_channels;
use fblmimo::coherent_metrics::{csv_header, RowContext};
use fblmimo::config::{Mode, Scheme, SystemConfig};
use fblmimo::sweep::{run_sweep, SweepSpec};
use fblmimo::validate::{run_validate, Level};
use fblmimo::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

/// Finite-blocklength rate analysis for multi-user MIMO uplinks.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "FBLMIMO_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Mrc,
    Zf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Coherent,
    Noncoherent,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one channel realisation and print its report row.
    Rate {
        /// JSON system configuration; baseline values fill anything missing.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "mrc")]
        scheme: SchemeArg,
        #[arg(long, value_enum, default_value = "coherent")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        user: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a sweep spec and write CSV.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Output file; overrides the spec's `output`, stdout when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle suites.
    Validate {
        #[arg(long, value_enum, default_value = "quick")]
        level: LevelArg,
    },
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn with_path(path: &Path, e: Error) -> Failure {
    match e {
        Error::Config(m) => Failure::Config(format!("{}: {m}", path.display())),
        other => other.into(),
    }
}

fn rate(config: Option<PathBuf>, scheme: Scheme, mode: Mode, user: usize, seed: u64) -> Result<(), Failure> {
    let cfg = match &config {
        Some(p) => SystemConfig::from_json_str(&read(p)?).map_err(|e| with_path(p, e))?,
        None => SystemConfig::baseline(),
    };
    cfg.validate(mode, Some(scheme))?;
    if user >= cfg.n_users {
        return Err(Failure::Config(format!(
            "user {user} out of range ({} users)",
            cfg.n_users
        )));
    }
    let ch = draw_channels(&cfg, mode, channel_seed(seed, 0));
    let r = evaluate(&ch, &cfg, scheme, user, cfg.target_eps[user], cfg.mu_policy.analytic())?;
    println!("{}", csv_header(mode));
    println!("{}", r.csv_row(&RowContext::new(&cfg, scheme, mode, user)));
    Ok(())
}

fn sweep(spec_path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let spec = SweepSpec::from_json_str(&read(spec_path)?).map_err(|e| with_path(spec_path, e))?;
    let csv = run_sweep(&spec)?;
    match out.or(spec.output.clone()) {
        Some(p) => std::fs::write(&p, csv).map_err(|e| Failure::Run(format!("{}: {e}", p.display()))),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_FAILED);
        }
    }
    let result = match cli.command {
        Command::Rate {
            config,
            scheme,
            mode,
            user,
            seed,
        } => {
            let scheme = match scheme {
                SchemeArg::Mrc => Scheme::Mrc,
                SchemeArg::Zf => Scheme::Zf,
            };
            let mode = match mode {
                ModeArg::Coherent => Mode::Coherent,
                ModeArg::Noncoherent => Mode::Noncoherent,
            };
            rate(config, scheme, mode, user, seed)
        }
        Command::Sweep { spec, out } => sweep(&spec, out),
        Command::Validate { level } => {
            let level = match level {
                LevelArg::Quick => Level::Quick,
                LevelArg::Full => Level::Full,
            };
            let report = run_validate(level);
            println!("{report}");
            if report.all_passed() {
                Ok(())
            } else {
                Err(Failure::Run("validation failed".into()))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_FAILED)
        }
    }
}
