//! `goalflow` command-line front end.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use goalflow::Tail;

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "goalflow",
    version,
    about = "Point-process analysis of goals scored in football matches"
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report to this file instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Add a generation timestamp to the report (off by default so output is reproducible).
    #[arg(long, global = true)]
    stamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Dataset {
    /// Match dataset (CSV).
    #[arg(value_name = "DATASET", env = "GOALFLOW_DATA")]
    path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GofScope {
    /// Normal-time counts against Poisson(mean).
    Normal,
    /// Full-match counts against the exposure-weighted Poisson mixture.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DispersionScope {
    Normal,
    ExtraTime,
    #[value(name = "full-90")]
    Full90,
    #[value(name = "full-120")]
    Full120,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitScope {
    Normal,
    Full,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dataset aggregates: matches, goals, moments and exposure.
    Summary {
        #[command(flatten)]
        data: Dataset,
    },
    /// Chi-square goodness of fit of the Poisson model.
    Gof {
        #[arg(long, value_enum, default_value_t = GofScope::Normal)]
        scope: GofScope,
        /// Pool counts of at least K into one tail cell.
        #[arg(long, value_name = "K", conflicts_with = "pool_min_expected")]
        pool_start: Option<u32>,
        /// Merge cells until every expected frequency is at least X.
        #[arg(long, value_name = "X")]
        pool_min_expected: Option<f64>,
        #[command(flatten)]
        data: Dataset,
    },
    /// Variance (dispersion index) test, asymptotic or exact.
    Dispersion {
        #[arg(long, value_enum, default_value_t = DispersionScope::Normal)]
        scope: DispersionScope,
        /// Also compute the exact conditional p-value.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = Tail::Upper)]
        tail: Tail,
        #[command(flatten)]
        data: Dataset,
    },
    /// Generalized Poisson maximum-likelihood fit.
    Gpfit {
        #[arg(long, value_enum, default_value_t = FitScope::Normal)]
        scope: FitScope,
        /// Scale theta by match duration / 90 (full scope only).
        #[arg(long)]
        exposure: bool,
        #[command(flatten)]
        data: Dataset,
    },
    /// Kaplan-Meier and exponential fits to the waiting times between goals.
    Survival {
        /// Write an SVG plot of both survival curves.
        #[arg(long, value_name = "PATH")]
        plot: Option<PathBuf>,
        #[command(flatten)]
        data: Dataset,
    },
    /// Monte Carlo calibration of the tests under a homogeneous Poisson null.
    Simulate {
        /// Goals per minute; defaults to the dataset's overall rate.
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        #[arg(long, default_value_t = goalflow::sim::DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        data: Dataset,
    },
    /// Every analysis in one report.
    Report {
        /// Also run a calibration study with this many replicates.
        #[arg(long, default_value_t = 0)]
        replicates: usize,
        #[arg(long, default_value_t = goalflow::sim::DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        data: Dataset,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    use commands as c;
    let report = match &cli.command {
        Command::Summary { data } => c::summary(&c::load(&data.path)?)?,
        Command::Gof {
            scope,
            pool_start,
            pool_min_expected,
            data,
        } => {
            let rule = c::pooling(*pool_start, *pool_min_expected)?;
            c::gof(&c::load(&data.path)?, *scope, rule)?
        }
        Command::Dispersion {
            scope,
            exact,
            tail,
            data,
        } => c::dispersion(&c::load(&data.path)?, *scope, *exact, *tail)?,
        Command::Gpfit {
            scope,
            exposure,
            data,
        } => c::gpfit(&c::load(&data.path)?, *scope, *exposure)?,
        Command::Survival { plot, data } => c::survival(&c::load(&data.path)?, plot.as_deref())?,
        Command::Simulate {
            rate,
            replicates,
            seed,
            data,
        } => c::simulate(&c::load(&data.path)?, *rate, *replicates, *seed)?,
        Command::Report {
            replicates,
            seed,
            data,
        } => c::report(&c::load(&data.path)?, *replicates, *seed)?,
    };
    let text = report.render(cli.format, cli.stamp)?;
    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
