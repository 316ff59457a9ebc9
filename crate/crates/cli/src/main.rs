use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use langevin_mimo::channel::io::{format_complex, read_channel, read_vector};
use langevin_mimo::channel::{db_to_linear, sigma0_from_snr};
use langevin_mimo::constellation::embed_complex;
use langevin_mimo::harness::{run_ablation, run_sweep, to_csv_string, write_csv, AblationAxis};
use langevin_mimo::rng::{Purpose, SeedTree};
use langevin_mimo::{DetectorKind, Error, ExperimentConfig, LangevinConfig, ModulationPlan, RealSystem, Result, SweepResult};

/// Annealed Langevin MIMO detection and SER sweeps.
#[derive(Debug, Parser)]
#[command(name = "langevin-mimo", version)]
struct Cli {
    /// Root seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; overrides the config file. CSV goes to stdout without one.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the SNR sweep described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sweep one Langevin hyperparameter over several values.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        /// levels (L), trajectories (M) or tau.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. `5,10,20`.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Detect one observation over a known channel.
    Detect {
        /// Channel CSV, one receive antenna per row.
        #[arg(long)]
        channel: PathBuf,
        /// Received vector, one complex entry per line.
        #[arg(long)]
        observation: PathBuf,
        /// SNR in dB (`inf` for noiseless).
        #[arg(long)]
        snr_db: f64,
        /// zf, mmse, ml or langevin.
        #[arg(long, default_value = "langevin")]
        detector: String,
        /// QAM order of every user.
        #[arg(long, default_value_t = 16)]
        modulation: usize,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn emit(result: &SweepResult, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => write_csv(result, path),
        None => {
            print!("{}", to_csv_string(result));
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config } => {
            let cfg = load(&config, cli.seed)?;
            let result = run_sweep(&cfg)?;
            emit(&result, cli.output.as_deref().or(cfg.output.as_deref()))
        }
        Command::Ablate { config, axis, values } => {
            let cfg = load(&config, cli.seed)?;
            let axis: AblationAxis = axis.parse()?;
            let result = run_ablation(&cfg, axis, &values)?;
            emit(&result, cli.output.as_deref().or(cfg.output.as_deref()))
        }
        Command::Detect {
            channel,
            observation,
            snr_db,
            detector,
            modulation,
        } => {
            let channel = read_channel(&channel)?;
            let y = read_vector(&observation)?;
            if y.len() != channel.n_rx() {
                return Err(Error::DimensionMismatch {
                    context: "observation",
                    expected: channel.n_rx(),
                    found: y.len(),
                });
            }
            let sigma0 = sigma0_from_snr(db_to_linear(snr_db), channel.n_rx(), channel.n_users())?;
            let plan = ModulationPlan::from_orders(&vec![modulation; channel.n_users()])
                .map_err(|e| Error::Config { field: "modulation".into(), reason: e.to_string() })?;
            let detector = DetectorKind::from_name(&detector, &LangevinConfig::default())?;
            detector.check(&plan)?;
            let system = RealSystem::from_channel(&channel, embed_complex(&y), sigma0)?;
            let mut rng = SeedTree::new(cli.seed.unwrap_or(0)).stream(0, 0, Purpose::Trajectories);
            let est = detector.detect(&system, &plan, &mut rng)?;
            let text: String = est.symbols().iter().map(|z| format_complex(*z) + "\n").collect();
            match &cli.output {
                Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
                    path: path.clone(),
                    source,
                }),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
