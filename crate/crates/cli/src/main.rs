use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use deltashock_cli::commands::{self, Verdict};
use deltashock_cli::{exit, CliError, GridOverride, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "deltashock", version)]
#[command(about = "Failure-time analysis and simulation for the generalized delta-shock model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Moments from every method, inverted density and cdf on a grid
    Analyze(Common),
    /// Monte Carlo run: report JSON and empirical cdf
    Simulate(Common),
    /// Simulation against analytics: KS distances, moment deltas, verdicts
    Compare(Common),
    /// Invert the transform at a single time point and print the result
    Invert {
        #[command(flatten)]
        common: Common,
        /// Time at which to invert
        #[arg(long)]
        t: f64,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides output.directory)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Simulation seed (overrides simulation.seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Simulation runs (overrides simulation.runs)
    #[arg(long)]
    runs: Option<u64>,
    /// Analysis grid (overrides the [analysis] grid)
    #[arg(long, value_name = "MIN:MAX:POINTS")]
    grid: Option<GridOverride>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let overrides = Overrides {
            out: self.out.clone(),
            seed: self.seed,
            runs: self.runs,
            grid: self.grid,
        };
        RunConfig::load(&self.config, &overrides)
    }
}

fn list(files: &[PathBuf]) -> String {
    files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze(common) => {
            let s = commands::analyze(&common.load()?)?;
            let g = s.moments.general;
            println!("mean {} variance {}", g.mean, g.variance.unwrap_or(f64::NAN));
            println!(
                "max relative difference across methods: mean {:.3e}, variance {:.3e}",
                s.max_relative_difference.mean, s.max_relative_difference.variance
            );
            if let Some(u) = &s.uniform_variance {
                println!("{}", u.note);
            }
            if !s.inversion.failures.is_empty() {
                eprintln!("inversion failed at {} grid values (see summary)", s.inversion.failures.len());
            }
            println!("wrote {}", list(&s.files));
        }
        Command::Simulate(common) => {
            let s = commands::simulate(&common.load()?)?;
            match s.mean_interval {
                Some([lo, hi]) => println!("mean {} (3 SE interval [{lo}, {hi}]), analytic {}", s.mean, s.analytic.mean),
                None => println!("mean {} from a single run, analytic {}", s.mean, s.analytic.mean),
            }
            println!("verdict {:?}", s.verdict);
            println!("wrote {}", list(&s.files));
        }
        Command::Compare(common) => {
            let r = commands::compare(&common.load()?)?;
            for c in &r.checks {
                println!("{:<26} {:>12.6e} limit {:>12.6e} {:?}", c.name, c.statistic, c.limit, c.verdict);
            }
            println!("KS(empirical, normal approximation) {:.6e}", r.ks.empirical_vs_normal);
            if let Some(u) = &r.uniform_variance {
                println!("{}", u.note);
            }
            println!("wrote {}", list(&r.files));
            if r.verdict != Verdict::Pass {
                return Err(CliError::CompareFailed(r.failed_checks().join(", ")));
            }
        }
        Command::Invert { common, t } => {
            let r = commands::invert(&common.load()?, t)?;
            println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::VALIDATION } else { exit::SUCCESS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("deltashock: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
