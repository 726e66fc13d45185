use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynnet::commands;
use dynnet::config::{load, Overrides, Stop, SweepSpec};
use dynnet::core::SocialIndexDistribution;
use dynnet::{ExperimentConfig, Failure};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "dynnet",
    version,
    about = "Dynamic network simulator and its large-time theory",
    args_override_self = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate snapshots and report graph statistics.
    Simulate(Common),
    /// Print every analytic quantity for both versions.
    Theory(Common),
    /// Giant-component ratio, verdict and survival probability.
    Phase(Common),
    /// Solve the survival fixed point on the type grid.
    Rho {
        #[command(flatten)]
        common: Common,
        /// Also write the grid solution as CSV.
        #[arg(long)]
        f_csv: Option<PathBuf>,
    },
    /// Simulation sweep over one parameter (CSV on stdout).
    Sweep(Common),
    /// Theory against simulation with z-scores.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// U or P.
    #[arg(long)]
    version: Option<String>,
    /// Social index law, e.g. const:1, two:1,3,0.5, exp:2, pareto:3.5,1, lognormal:0,0.5.
    #[arg(long = "s", value_parser = parse_dist)]
    social_index: Option<SocialIndexDistribution>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicas: Option<u32>,
    /// Stop when the population first reaches this size.
    #[arg(long, conflicts_with = "stop_t")]
    stop_n: Option<usize>,
    /// Observe the network at this time.
    #[arg(long)]
    stop_t: Option<f64>,
    #[arg(long)]
    max_restarts: Option<u32>,
    #[arg(long)]
    panels: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    /// param:from:to:steps[:log]
    #[arg(long)]
    sweep: Option<SweepSpec>,
    /// Add simulation to `phase`.
    #[arg(long)]
    simulate: bool,
    #[arg(long)]
    kmax: Option<u64>,
}

fn parse_dist(s: &str) -> Result<SocialIndexDistribution, String> {
    s.parse().map_err(|e: dynnet::core::social::DistError| e.to_string())
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Failure> {
        let stop = match (self.stop_n, self.stop_t) {
            (Some(n), _) => Some(Stop::Population(n)),
            (None, Some(t)) => Some(Stop::Time(t)),
            _ => None,
        };
        let o = Overrides {
            lambda: self.lambda,
            mu: self.mu,
            alpha: self.alpha,
            beta: self.beta,
            version: self.version.clone(),
            social_index: self.social_index.clone(),
            seed: self.seed,
            stop,
            replicas: self.replicas,
            out: self.out.clone(),
            max_restarts: self.max_restarts,
            panels: self.panels,
            points: self.points,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            margin: self.margin,
            sweep: self.sweep,
            simulate: self.simulate.then_some(true),
            kmax: self.kmax,
        };
        load(self.config.as_deref(), &o)
    }
}

fn json<T: Serialize>(v: &T) -> Result<String, Failure> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn csv_text<T: Serialize>(rows: &[T]) -> Result<String, Failure> {
    let mut buf = Vec::new();
    commands::write_rows(csv::Writer::from_writer(&mut buf), rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn execute(cmd: &Command) -> Result<String, Failure> {
    match cmd {
        Command::Simulate(c) => json(&commands::simulate(&c.load()?)?),
        Command::Theory(c) => json(&commands::theory(&c.load()?)?),
        Command::Phase(c) => {
            let cfg = c.load()?;
            if cfg.sweep.is_some() {
                csv_text(&commands::phase_sweep(&cfg)?)
            } else {
                json(&commands::phase(&cfg)?)
            }
        }
        Command::Rho { common, f_csv } => json(&commands::rho(&common.load()?, f_csv.as_deref())?),
        Command::Sweep(c) => csv_text(&commands::sweep(&c.load()?)?),
        Command::Compare(c) => json(&commands::compare(&c.load()?)?),
    }
}

fn main() -> ExitCode {
    let mut stdout = std::io::stdout().lock();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure::InvalidConfig(e.render().to_string().trim().to_owned());
            let _ = writeln!(stdout, "{}", f.to_json());
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match execute(&cli.command) {
        Ok(text) => {
            let _ = stdout.write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = writeln!(stdout, "{}", e.to_json());
            eprintln!("dynnet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
