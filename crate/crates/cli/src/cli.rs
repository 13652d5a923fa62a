use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::{RunConfig, Spacing, TwoLevelSection};

#[derive(Debug, Parser)]
#[command(name = "otto", version, about = "Efficiency statistics of quantum Otto engines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact efficiency distribution as JSON
    Dist(CommonArgs),
    /// Engine quantities over a grid of stroke durations, as CSV
    SweepTau {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        start: Option<f64>,
        #[arg(long)]
        stop: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Adiabatic moments, asymptotes and covariance over a grid of cold inverse temperatures, as CSV
    SweepBeta {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        start: Option<f64>,
        #[arg(long)]
        stop: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// beta1 / beta2
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long, value_enum)]
        spacing: Option<Spacing>,
    },
    /// Monte Carlo estimate of the efficiency distribution with a goodness-of-fit report
    Sample {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        n_samples: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Distribution JSON to test the samples against
        #[arg(long)]
        exact: Option<PathBuf>,
    },
    /// Cross-check closed forms, enumeration, propagator and invariants
    Validate(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML run configuration
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output file (default: $OTTO_OUTPUT_DIR/<command file>, else stdout)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    #[arg(long, conflicts_with = "adiabatic_k")]
    pub tau: Option<f64>,
    /// Use the k-th exactly adiabatic stroke duration
    #[arg(long)]
    pub adiabatic_k: Option<u32>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub grouping_tol: Option<f64>,
}

impl CommonArgs {
    fn twolevel_overrides(&self) -> bool {
        self.gamma1.is_some()
            || self.gamma2.is_some()
            || self.tau.is_some()
            || self.adiabatic_k.is_some()
            || self.omega.is_some()
    }

    /// Loads the config file (if any) and applies flag overrides.
    pub fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.output {
            cfg.output = Some(out.clone());
        }
        if let Some(tol) = self.grouping_tol {
            cfg.tolerances.grouping = tol;
        }
        if let Some(g) = cfg.generic.as_mut() {
            if self.twolevel_overrides() {
                return crate::error::usage("two-level flags cannot be combined with a generic model");
            }
            if let Some(b) = self.beta1 {
                g.beta1 = b;
            }
            if let Some(b) = self.beta2 {
                g.beta2 = b;
            }
            return Ok(cfg);
        }
        if self.twolevel_overrides() || self.beta1.is_some() || self.beta2.is_some() {
            let s = cfg.twolevel.get_or_insert_with(TwoLevelSection::default);
            if self.tau.is_some() {
                s.adiabatic_k = None;
                s.tau = self.tau;
            }
            if self.adiabatic_k.is_some() {
                s.tau = None;
                s.adiabatic_k = self.adiabatic_k;
            }
            s.gamma1 = self.gamma1.or(s.gamma1);
            s.gamma2 = self.gamma2.or(s.gamma2);
            s.omega = self.omega.or(s.omega);
            s.beta1 = self.beta1.or(s.beta1);
            s.beta2 = self.beta2.or(s.beta2);
        }
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Dist(common) => commands::cmd_dist(&common.load()?),
        Command::SweepTau {
            common,
            start,
            stop,
            points,
        } => {
            let mut cfg = common.load()?;
            let s = &mut cfg.sweep_tau;
            s.start = start.unwrap_or(s.start);
            s.stop = stop.unwrap_or(s.stop);
            s.points = points.unwrap_or(s.points);
            commands::cmd_sweep_tau(&cfg)
        }
        Command::SweepBeta {
            common,
            start,
            stop,
            points,
            ratio,
            spacing,
        } => {
            let mut cfg = common.load()?;
            let s = &mut cfg.sweep_beta;
            s.start = start.unwrap_or(s.start);
            s.stop = stop.unwrap_or(s.stop);
            s.points = points.unwrap_or(s.points);
            s.ratio = ratio.unwrap_or(s.ratio);
            s.spacing = spacing.unwrap_or(s.spacing);
            commands::cmd_sweep_beta(&cfg)
        }
        Command::Sample {
            common,
            n_samples,
            seed,
            alpha,
            exact,
        } => {
            let mut cfg = common.load()?;
            let s = &mut cfg.sample;
            s.n_samples = n_samples.unwrap_or(s.n_samples);
            s.seed = seed.unwrap_or(s.seed);
            s.alpha = alpha.unwrap_or(s.alpha);
            if exact.is_some() {
                s.exact = exact;
            }
            commands::cmd_sample(&cfg)
        }
        Command::Validate(common) => commands::cmd_validate(&common.load()?),
    }
}
