//! The `timecomp` command line: analysis, simulation and verification of
//! time-compactified systems from a TOML configuration.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

pub use commands::Outcome;
pub use config::RunConfig;
pub use output::OutputDir;

#[derive(Debug, Parser)]
#[command(name = "timecomp", version, about = "Time compactification of asymptotically autonomous ODEs")]
pub struct Cli {
    /// Configuration file; the bundled van der Pol example when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `output.directory`.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Overrides `analysis.k`.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Overrides the probe tolerance `analysis.tolerance`.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Build the extended field even when the smoothness verdict does not hold.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Decide whether the compactified field extends `C^k` to `s = ±1`.
    Check,
    /// Integrate the compactified field from every configured initial condition.
    Simulate,
    /// Locate the periodic orbit of a limit system and its multipliers.
    FindCycle,
    /// Run the full pipeline stage by stage and report the first failure.
    VerifyExample,
    /// Write trajectory CSVs and a gnuplot script.
    EmitPlots,
}

impl Cli {
    pub fn load_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::bundled(),
        };
        if let Some(k) = self.k {
            cfg.analysis.k = k;
        }
        if let Some(t) = self.tol {
            cfg.analysis.tolerance = t;
        }
        if let Some(d) = &self.output_dir {
            cfg.output.directory = d.clone();
        }
        Ok(cfg)
    }

    pub fn execute(&self) -> Result<Outcome> {
        let cfg = self.load_config()?;
        cfg.validate()?;
        let out = OutputDir::create(&cfg.output.directory)?.with_formats(&cfg.output.formats);
        match self.command {
            Command::Check => commands::cmd_check(&cfg, &out),
            Command::Simulate => commands::cmd_simulate(&cfg, &out, self.force),
            Command::FindCycle => commands::cmd_find_cycle(&cfg, &out, self.force),
            Command::VerifyExample => commands::cmd_verify_example(&cfg, &out, self.force),
            Command::EmitPlots => commands::cmd_emit_plots(&cfg, &out, self.force),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => Outcome::Usage.code(),
            };
        }
    };
    match cli.execute() {
        Ok(o) => o.code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            Outcome::Usage.code()
        }
    }
}
