use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use otddf::harness::{self, ExperimentConfig, Method};

#[derive(Parser)]
#[command(
    name = "otddf",
    version,
    about = "Offline-trained transport-map filtering experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the training dataset (CSV plus metadata sidecar).
    Simulate(Common),
    /// Train one transport map per window size.
    Train(Common),
    /// Run the online filters over fresh truth trajectories and score them.
    Run(Common),
    /// Evaluate the max-min objective of stored maps on the dataset.
    Evaluate(Common),
    /// Time one online step of each method.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated window sizes.
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<usize>>,
    /// Comma-separated methods (kf, enkf, sir, otpf, otddf).
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
}

impl Common {
    fn load(&self) -> otddf::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(w) = &self.windows {
            cfg.online.windows = Some(w.clone());
        }
        if let Some(m) = &self.methods {
            let methods = m.iter().map(|s| Method::parse(s)).collect::<otddf::Result<Vec<_>>>()?;
            if let Some(b) = cfg.bench.as_mut() {
                b.methods = methods.clone();
            }
            cfg.online.methods = methods;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn windows(&self, cfg: &ExperimentConfig) -> Vec<usize> {
        self.windows.clone().unwrap_or_else(|| cfg.training.windows.clone())
    }
}

fn print<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn execute(command: Command) -> otddf::Result<()> {
    match command {
        Command::Simulate(c) => {
            let cfg = c.load()?;
            let (ds, path) = harness::simulate(&cfg, &c.out)?;
            eprintln!("wrote {}", path.display());
            print(&ds.meta());
        }
        Command::Train(c) => {
            let cfg = c.load()?;
            let ds = harness::dataset_for(&cfg, &c.out)?;
            print(&harness::train(&cfg, &ds, &c.windows(&cfg), &c.out)?);
        }
        Command::Run(c) => {
            let cfg = c.load()?;
            let (_, summary) = harness::run(&cfg, &c.out)?;
            print(&summary);
        }
        Command::Evaluate(c) => {
            let cfg = c.load()?;
            print(&harness::evaluate(&cfg, &c.windows(&cfg), &c.out)?);
        }
        Command::Bench(c) => {
            let mut cfg = c.load()?;
            if let (Some(b), Some(w)) = (cfg.bench.as_mut(), c.windows.as_ref().and_then(|w| w.first())) {
                b.window = *w;
            }
            print(&harness::benchmark(&cfg, &c.out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match harness::with_thread_cap(|| execute(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) | Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
