use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use toda_gge::harness::{self, Command, Options};

#[derive(Clone, Copy, ValueEnum)]
enum Cmd {
    SimulateFlow,
    Sample,
    SpectrumHist,
    Minimize,
    LdpCheck,
    IdentitySuite,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::SimulateFlow => Command::SimulateFlow,
            Cmd::Sample => Command::Sample,
            Cmd::SpectrumHist => Command::SpectrumHist,
            Cmd::Minimize => Command::Minimize,
            Cmd::LdpCheck => Command::LdpCheck,
            Cmd::IdentitySuite => Command::IdentitySuite,
        }
    }
}

/// Periodic Toda chain: flows, GGE sampling, spectral measures and rate functionals.
///
/// Exit codes: 0 ok, 1 bad config or numerical failure, 2 integration failure,
/// 3 sampler tuning outside the acceptance band, 4 identity check failed, 5 I/O.
/// TODA_GGE_THREADS sets the worker count.
#[derive(Parser)]
#[command(name = "toda-gge", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// JSON config; omitted fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// identity-suite only: perturb λ⁻ in the Jacobian formula by this amount.
    #[arg(long)]
    fuzz: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("TODA_GGE_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config = match cli.config.as_deref().map(harness::read_config).transpose() {
        Ok(c) => c,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return ExitCode::from(f.code as u8);
        }
    };
    let opts = Options { config, seed: cli.seed, out: cli.out, fuzz: cli.fuzz };
    match harness::run(cli.command.into(), &opts) {
        Ok(r) => {
            for f in &r.files {
                println!("wrote {}", f.display());
            }
            println!("{}", r.summary);
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
