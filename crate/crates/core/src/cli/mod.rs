//! Experiment runner: configuration, run records, subcommands and the
//! command-line front end.

pub mod config;
pub mod record;
pub mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand as ClapSubcommand};

use crate::error::Error;

pub use config::{ExperimentConfig, CONFIG_VERSION, OUTPUT_ROOT_ENV};
pub use record::{Envelope, FileDigest, RunRecord, RunWriter, Status};
pub use run::{emit_plot, oracle_report, run, OracleReport, RunOptions, Subcommand, PLOT_TAGS};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const RESOURCE: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter { .. } | Error::Config(_) | Error::TailTooHeavy { .. } => exit::CONFIG,
        Error::Resource(_) | Error::WorkCap(_) | Error::Io(_) => exit::RESOURCE,
        Error::Pole { .. } | Error::Divergent(_) | Error::Fit(_) | Error::Critical { .. } | Error::Bracket { .. } => {
            exit::NUMERICAL
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lrop", version, about = "Long-range oriented percolation laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, ClapSubcommand)]
pub enum Command {
    /// Build the step kernel and dump it as CSV with a JSON sidecar.
    Kernel(CommonArgs),
    /// Heat-kernel bound report and small-|k| asymptotics.
    Spectral(CommonArgs),
    /// Diagram integrals and the critical-point prediction.
    PcFormula(CommonArgs),
    /// Monte Carlo estimate of the two-point transform.
    Simulate(CommonArgs),
    /// Bisection for the critical point.
    PcSearch(CommonArgs),
    /// Growth, limit-shape and exponent fits.
    Analyze(CommonArgs),
    /// Expansion identity and Monte Carlo against exact enumeration.
    OracleCheck(CommonArgs),
    /// Plot-ready CSV from a completed run.
    EmitPlot(PlotArgs),
}

/// Flags shared by all run subcommands; they override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML config; defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output root.
    #[arg(long, env = OUTPUT_ROOT_ENV)]
    pub out_root: Option<PathBuf>,
    /// Run directory below the output root.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "L")]
    pub l: Option<u32>,
    #[arg(long = "R")]
    pub radius: Option<u64>,
    #[arg(long)]
    pub tail_tol: Option<f64>,
    /// Bond parameter (simulate, oracle-check).
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub replicas: Option<u64>,
    /// Torus side (spectral, pc-formula).
    #[arg(long)]
    pub m: Option<usize>,
    /// Bisection bracket `lo,hi` (pc-search).
    #[arg(long, value_delimiter = ',')]
    pub bracket: Option<Vec<f64>>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Table to analyze.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Critical point for the analyze sweep.
    #[arg(long)]
    pub p_c: Option<f64>,
    #[arg(long)]
    pub p_c_se: Option<f64>,
    /// Continue from checkpoints in the run directory.
    #[arg(long)]
    pub resume: bool,
    /// Replicas to add in this invocation (simulate).
    #[arg(long)]
    pub budget: Option<u64>,
    /// Largest kernel dump in sites.
    #[arg(long)]
    pub max_dump_sites: Option<u64>,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// Figure tag: limit-shape, growth or spectral.
    #[arg(long)]
    pub tag: String,
    /// Run directory; defaults to the producing subcommand under the root.
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long, env = OUTPUT_ROOT_ENV)]
    pub out_root: Option<PathBuf>,
}

impl CommonArgs {
    /// Loads the config file (or defaults) and applies the flags.
    pub fn config(&self, sub: Subcommand) -> crate::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if self.bracket.as_ref().is_some_and(|b| b.len() != 2) {
            return Err(Error::Config("--bracket: expected lo,hi".into()));
        }
        self.apply(sub, &mut c);
        c.validate()?;
        Ok(c)
    }

    pub fn apply(&self, sub: Subcommand, c: &mut ExperimentConfig) {
        if let Some(v) = &self.output {
            c.output = Some(v.clone());
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        let k = &mut c.kernel;
        if let Some(v) = self.d {
            k.d = v;
        }
        if let Some(v) = self.alpha {
            k.alpha = v;
        }
        if let Some(v) = self.l {
            k.l = v;
        }
        if let Some(v) = self.radius {
            k.radius = v;
        }
        if let Some(v) = self.tail_tol {
            k.tail_tol = v;
        }
        match sub {
            Subcommand::Spectral => {
                if let Some(v) = self.n_max {
                    c.spectral.n_max = v as u64;
                }
                if self.m.is_some() {
                    c.spectral.m = self.m;
                }
            }
            Subcommand::PcFormula => {
                if self.m.is_some() {
                    c.diagrams.m = self.m;
                }
            }
            Subcommand::Simulate => {
                let s = &mut c.simulate;
                if let Some(v) = self.p {
                    s.p = v;
                }
                if let Some(v) = self.n_max {
                    s.n_max = v;
                }
                if let Some(v) = self.replicas {
                    s.replicas = v;
                }
            }
            Subcommand::PcSearch => {
                let q = &mut c.pc_search;
                if let Some(v) = self.n_max {
                    q.n_max = v;
                }
                if let Some(v) = self.replicas {
                    q.replicas = v;
                }
                if let Some(b) = &self.bracket {
                    q.bracket = (b[0], b[1]);
                }
                if let Some(v) = self.tol {
                    q.tol = v;
                }
            }
            Subcommand::Analyze => {
                let a = &mut c.analyze;
                if self.input.is_some() {
                    a.input = self.input.clone();
                }
                if self.p_c.is_some() {
                    a.p_c = self.p_c;
                }
                if let Some(v) = self.p_c_se {
                    a.p_c_se = v;
                }
                if let Some(v) = self.replicas {
                    a.sweep.replicas = v;
                }
            }
            Subcommand::OracleCheck => {
                let o = &mut c.oracle;
                if let Some(v) = self.p {
                    o.p = v;
                }
                if let Some(v) = self.n_max {
                    o.n_max = v;
                }
                if let Some(v) = self.replicas {
                    o.replicas = v;
                }
            }
            Subcommand::Kernel => {}
        }
    }

    pub fn options(&self) -> RunOptions {
        RunOptions {
            root: config::output_root(self.out_root.as_deref()),
            resume: self.resume,
            budget: self.budget,
            max_dump_sites: self.max_dump_sites,
        }
    }
}

/// Default run directory holding the data behind a plot tag.
pub fn plot_source(tag: &str) -> &'static str {
    match tag {
        "spectral" => "spectral",
        _ => "analyze",
    }
}

/// Parses nothing; runs a parsed command and returns the exit code.
pub fn execute(cli: Cli) -> i32 {
    let (sub, args) = match cli.command {
        Command::Kernel(a) => (Subcommand::Kernel, a),
        Command::Spectral(a) => (Subcommand::Spectral, a),
        Command::PcFormula(a) => (Subcommand::PcFormula, a),
        Command::Simulate(a) => (Subcommand::Simulate, a),
        Command::PcSearch(a) => (Subcommand::PcSearch, a),
        Command::Analyze(a) => (Subcommand::Analyze, a),
        Command::OracleCheck(a) => (Subcommand::OracleCheck, a),
        Command::EmitPlot(a) => {
            let root = config::output_root(a.out_root.as_deref());
            let dir = a.run.clone().unwrap_or_else(|| root.join(plot_source(&a.tag)));
            return match emit_plot(&dir, &a.tag) {
                Ok(csv) => {
                    print!("{csv}");
                    exit::OK
                }
                Err(e) => fail(&e),
            };
        }
    };
    let cfg = match args.config(sub) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if args.print_config {
        return match cfg.to_toml() {
            Ok(t) => {
                print!("{t}");
                exit::OK
            }
            Err(e) => fail(&e),
        };
    }
    match run(sub, &cfg, &args.options()) {
        Ok(rec) => {
            let dir = cfg.run_dir(&args.options().root, sub.name());
            println!("{} {:?} in {:.2}s -> {}", sub.name(), rec.status, rec.wall_seconds, dir.display());
            if let Some(m) = &rec.message {
                println!("{m}");
            }
            match rec.status {
                Status::Complete => exit::OK,
                Status::Truncated => exit::RESOURCE,
                Status::Failed => exit::NUMERICAL,
            }
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), exit::CONFIG);
        assert_eq!(exit_code(&Error::Resource("x".into())), exit::RESOURCE);
        assert_eq!(exit_code(&Error::Divergent("x".into())), exit::NUMERICAL);
    }

    #[test]
    fn flags_override_file() {
        let cli = Cli::try_parse_from(["lrop", "simulate", "--p", "0.7", "--replicas", "99", "--L", "3"]).unwrap();
        let Command::Simulate(a) = cli.command else { panic!() };
        let c = a.config(Subcommand::Simulate).unwrap();
        assert_eq!((c.simulate.p, c.simulate.replicas, c.kernel.l), (0.7, 99, 3));
    }
}
