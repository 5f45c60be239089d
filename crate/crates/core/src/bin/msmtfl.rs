use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use msmtfl::experiment::{parse_config, run_experiment};

/// Run multi-task sparse feature learning experiments and write a results CSV.
///
/// Every option can also be given in the config file as `key: value`;
/// command-line values take precedence.
#[derive(Parser, Debug)]
#[command(name = "msmtfl", version, allow_negative_numbers = true)]
struct Cli {
    /// demo | stage-sweep | lambda-sweep | tau-sensitivity | realdata-sweep
    #[arg(long)]
    experiment: Option<String>,
    /// Key-value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds: comma list or half-open range `a..b`
    #[arg(long)]
    seed: Option<String>,
    /// Results CSV path
    #[arg(long)]
    out: Option<String>,
    /// Comma list of lasso, l21, msmtfl, msmtfl-at
    #[arg(long)]
    algorithms: Option<String>,
    #[arg(long)]
    stages: Option<String>,
    /// alpha values; lambda = alpha * sqrt(ln(d m) / n)
    #[arg(long = "alpha-grid")]
    alpha_grid: Option<String>,
    /// Fixed thresholds as multiples of m * lambda
    #[arg(long = "theta-presets")]
    theta_presets: Option<String>,
    #[arg(long = "tau-multipliers")]
    tau_multipliers: Option<String>,
    /// per-task | total
    #[arg(long = "tau-normalization")]
    tau_normalization: Option<String>,
    /// Training fractions for realdata-sweep
    #[arg(long = "train-ratio")]
    train_ratio: Option<String>,
    /// fig2a | fig2b | fig2c
    #[arg(long)]
    preset: Option<String>,
    /// Dataset manifest for realdata-sweep
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    tolerance: Option<String>,
    #[arg(long = "max-sweeps")]
    max_sweeps: Option<String>,
}

impl Cli {
    fn overrides(&self) -> Vec<(String, String)> {
        [
            ("experiment", &self.experiment),
            ("seed", &self.seed),
            ("out", &self.out),
            ("algorithms", &self.algorithms),
            ("stages", &self.stages),
            ("alpha-grid", &self.alpha_grid),
            ("theta-presets", &self.theta_presets),
            ("tau-multipliers", &self.tau_multipliers),
            ("tau-normalization", &self.tau_normalization),
            ("train-ratio", &self.train_ratio),
            ("preset", &self.preset),
            ("dataset", &self.dataset),
            ("m", &self.m),
            ("n", &self.n),
            ("d", &self.d),
            ("sigma", &self.sigma),
            ("tolerance", &self.tolerance),
            ("max-sweeps", &self.max_sweeps),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage problems are configuration errors; --help and --version are not
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    let config = match parse_config(cli.config.as_deref(), &cli.overrides()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("msmtfl: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run_experiment(&config) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            println!("results written to {}", config.out.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("msmtfl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
