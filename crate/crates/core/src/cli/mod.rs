//! The `gnnbench` command line: `gen`, `train`, `analyze`, `catalog` and
//! `replay`. Exit codes: 0 success, 2 usage or I/O, 3 data or metric.

mod analyze;
mod gen;
mod manifest;
mod train;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use manifest::{sha256_file, sha256_json, OutputEntry, RunManifest};

use crate::error::{Error, Result};
use crate::roofline::{calibrate_host, default_catalog, save_catalog};

pub const CATALOG_ENV: &str = "GNNBENCH_CATALOG";

#[derive(Debug, Parser)]
#[command(name = "gnnbench", version, about = "Track-finding GNN benchmark: generate, train with profiling, analyze")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic event dataset and its size statistics.
    Gen(gen::GenArgs),
    /// Train the network on a dataset, writing a trace, log and checkpoints.
    Train(train::TrainArgs),
    /// Rank kernels, break down time, draw rooflines and price epochs.
    Analyze(analyze::AnalyzeArgs),
    /// Write the built-in device catalog, optionally with a calibrated host entry.
    Catalog(CatalogArgs),
    /// Rerun a recorded command and compare its non-timing outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, clap::Args)]
pub struct CatalogArgs {
    #[arg(long, default_value = "catalog.json")]
    pub out: PathBuf,
    /// Measure this machine and append it as device "host" with the given TDP in watts.
    #[arg(long)]
    pub host_tdp: Option<f64>,
}

#[derive(Debug, clap::Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, S>(args: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(&args).map_err(|e| Error::Usage(e.to_string()))?;
    let rest: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    dispatch(cli.command, &rest)
}

fn dispatch(command: Command, args: &[String]) -> Result<()> {
    match command {
        Command::Gen(a) => gen::run(&a, args).map(|_| ()),
        Command::Train(a) => train::run(&a, args).map(|_| ()),
        Command::Analyze(a) => analyze::run(&a, args).map(|_| ()),
        Command::Catalog(a) => {
            let mut devices = default_catalog();
            if let Some(tdp) = a.host_tdp {
                devices.push(calibrate_host(tdp));
            }
            save_catalog(&a.out, &devices)?;
            println!("wrote {} devices to {}", devices.len(), a.out.display());
            Ok(())
        }
        Command::Replay(a) => replay(&a),
    }
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let recorded = RunManifest::load(&a.manifest)?;
    if recorded.args.first().map(String::as_str) == Some("replay") {
        return Err(Error::Usage("a replay manifest cannot itself be replayed".into()));
    }
    let mut argv = vec![recorded.tool.clone()];
    argv.extend(recorded.args.iter().cloned());
    run(argv)?;
    let mut mismatched = Vec::new();
    let mut checked = 0;
    for out in &recorded.outputs {
        if let Some(expected) = &out.sha256 {
            checked += 1;
            let actual = sha256_file(std::path::Path::new(&out.path))?;
            if &actual != expected {
                mismatched.push(out.path.clone());
            }
        }
    }
    if !mismatched.is_empty() {
        return Err(Error::Data(format!("replay changed {} output(s): {}", mismatched.len(), mismatched.join(", "))));
    }
    println!("replay: {checked} non-timing outputs identical");
    Ok(())
}

/// Runs the CLI and maps the outcome to a process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    match Cli::try_parse_from(&args) {
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
        Ok(cli) => {
            let rest: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
            match dispatch(cli.command, &rest) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    i32::from(e.exit_code())
                }
            }
        }
    }
}
