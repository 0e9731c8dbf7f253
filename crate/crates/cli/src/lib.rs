//! `ctm` command-line front end.
//!
//! Every subcommand resolves a [`RunConfig`] (defaults, then `--config`
//! file, then flags), runs one analysis and writes its data files into
//! `--out` with the resolved config as `#` header lines.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{Profile, RunConfig};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ctm", version, about = "Continuous threshold model: simulation and cascade bifurcation analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub shared: SharedArgs,
}

/// Flags accepted by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct SharedArgs {
    /// Total number of agents.
    #[arg(long = "N", global = true)]
    pub total: Option<usize>,
    /// Size of each of the two biased clusters.
    #[arg(long = "n", global = true)]
    pub n: Option<usize>,
    /// Threshold disparity.
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true)]
    pub u0: Option<f64>,
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    #[arg(long = "kappa-s", global = true)]
    pub kappa_s: Option<f64>,
    /// Social effort gain inside the sigmoid.
    #[arg(long, global = true)]
    pub v: Option<f64>,
    /// Persistent input on one agent.
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Agent receiving the input.
    #[arg(long, global = true)]
    pub agent: Option<usize>,
    /// Fixed gain instead of the feedback controller.
    #[arg(long, global = true)]
    pub u: Option<f64>,
    /// tanh or algebraic.
    #[arg(long, global = true)]
    pub sigmoid: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long = "t-end", global = true)]
    pub t_end: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// key=value file applied before the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Full-network trajectory.
    Simulate,
    /// Three-cluster reduced trajectory.
    Reduce,
    /// Transition point and pitchfork class for (N, n, eps).
    Bifurcate,
    /// Transition points over the cluster size for fixed N.
    Sweep {
        #[arg(long = "n-min")]
        n_min: Option<usize>,
        #[arg(long = "n-max")]
        n_max: Option<usize>,
    },
    /// Equilibria of the reduced model over a gain grid.
    Branch {
        #[arg(long = "u-min")]
        u_min: Option<f64>,
        #[arg(long = "u-max")]
        u_max: Option<f64>,
        #[arg(long = "u-steps")]
        u_steps: Option<usize>,
    },
    /// CTM against the discrete linear threshold model.
    LtmCompare {
        /// Edge list: agent count, then one `i j` pair per line.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// One threshold per line.
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Comma-separated seed agents.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Canned configurations.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig3,
    Fig5,
}

impl Command {
    pub fn profile(&self) -> Profile {
        match self {
            Command::Simulate => Profile::Simulate,
            Command::Reduce => Profile::Reduce,
            Command::Bifurcate => Profile::Bifurcate,
            Command::Sweep { .. } => Profile::Sweep,
            Command::Branch { .. } => Profile::Branch,
            Command::LtmCompare { .. } => Profile::LtmCompare,
            Command::Reproduce { figure: Figure::Fig3 } => Profile::Fig3,
            Command::Reproduce { figure: Figure::Fig5 } => Profile::Fig5,
        }
    }
}

impl Cli {
    /// Defaults for the subcommand, then the config file, then flags.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::defaults(self.command.profile());
        let s = &self.shared;
        if let Some(path) = &s.config {
            cfg.apply_file(path)?;
        }
        macro_rules! take {
            ($($src:expr => $dst:ident),* $(,)?) => {
                $(if let Some(v) = $src.clone() { cfg.$dst = v; })*
            };
        }
        take!(s.total => total, s.n => n, s.eps => eps, s.u0 => u0, s.kappa => kappa, s.kappa_s => kappa_s,
              s.v => v, s.beta => beta, s.agent => agent, s.seed => seed, s.dt => dt, s.t_end => t_end,
              s.out => out);
        if let Some(u) = s.u {
            cfg.u = Some(u);
        }
        if let Some(name) = &s.sigmoid {
            cfg.sigmoid = name.parse()?;
        }
        match &self.command {
            Command::Sweep { n_min, n_max } => {
                take!(n_min => n_min);
                if n_max.is_some() {
                    cfg.n_max = *n_max;
                }
            }
            Command::Branch { u_min, u_max, u_steps } => {
                take!(u_min => u_min, u_max => u_max, u_steps => u_steps);
            }
            Command::LtmCompare { edges, thresholds, seeds } => {
                if edges.is_some() {
                    cfg.edges = edges.clone();
                }
                if thresholds.is_some() {
                    cfg.thresholds = thresholds.clone();
                }
                if let Some(list) = seeds {
                    cfg.seeds = config::parse_list(list)
                        .map_err(|e| CliError::Core(ctm_core::CtmError::Usage(e)))?;
                }
            }
            _ => {}
        }
        Ok(cfg)
    }
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run<I, A>(argv: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = cli.resolve().and_then(|cfg| commands::execute(&cli.command, &cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ctm: {e}");
            e.exit_code()
        }
    }
}
