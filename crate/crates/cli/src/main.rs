use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use tomolab::harness::{self, Mode, PriorSpec, RunConfig, RunOutput};
use tomolab::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_FAILURE: u8 = 3;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliMode {
    Sample,
    Estimate,
    Qpt,
    Track,
    Risk,
}

impl From<CliMode> for Mode {
    fn from(m: CliMode) -> Self {
        match m {
            CliMode::Sample => Mode::Sample,
            CliMode::Estimate => Mode::Estimate,
            CliMode::Qpt => Mode::Qpt,
            CliMode::Track => Mode::Track,
            CliMode::Risk => Mode::Risk,
        }
    }
}

/// Simulated Bayesian state and process tomography.
#[derive(Debug, Parser)]
#[command(name = "tomolab", version)]
struct Args {
    mode: CliMode,
    /// JSON run configuration (optional for `sample` when --prior is given).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// sample: ginibre | rebit | bures | bcsz
    #[arg(long)]
    prior: Option<String>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = harness::init_threads_from_env() {
        eprintln!("{e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match execute(&args) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(failure)) => {
            eprintln!("inference failure: {failure}");
            ExitCode::from(EXIT_FAILURE)
        }
        Err(e @ Error::Config(_)) | Err(e @ Error::InvalidParameter(_)) | Err(e @ Error::BoundaryMean { .. }) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn execute(args: &Args) -> tomolab::Result<Option<String>> {
    let mode = Mode::from(args.mode);
    let started = Instant::now();
    let (output, seed) = if mode == Mode::Sample && args.prior.is_some() {
        let name = args.prior.as_deref().expect("checked");
        let ensemble = harness::ensemble_from_name(name, args.dim, args.rank)?;
        let seed = args.seed.unwrap_or(0);
        let n = args.n.unwrap_or(1000);
        if n == 0 {
            return Err(Error::Config("--n must be positive".into()));
        }
        (RunOutput::Sample(harness::sample_prior(&PriorSpec::fiducial(ensemble), n, seed)?), seed)
    } else {
        let path = args
            .config
            .as_ref()
            .ok_or_else(|| Error::Config("--config is required (or --prior for sample)".into()))?;
        let mut config = RunConfig::from_path(path)?;
        if config.mode != mode {
            return Err(Error::Config(format!(
                "config mode {:?} does not match command {:?}",
                config.mode, mode
            )));
        }
        if let Some(n) = args.n {
            config.n_samples = n;
        }
        let seed = args.seed.unwrap_or(config.seed);
        (harness::run(&config, seed)?, seed)
    };
    let elapsed = started.elapsed().as_secs_f64();
    let files = output.write(&args.out)?;
    std::fs::write(
        args.out.join("timing.json"),
        format!("{{\n  \"seed\": {seed},\n  \"wall_seconds\": {elapsed}\n}}\n"),
    )?;
    for f in &files {
        println!("{}", f.display());
    }
    Ok(output.failure())
}
