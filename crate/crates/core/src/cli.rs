//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, parse_seed};
use crate::error::{Error, Result};
use crate::experiment::{finite_m_tv, run, Mode};
use crate::grid::{grid_posterior_auto, GridSpec};
use crate::model::ObservationSet;
use crate::report::emit_report;
use crate::verify::{verify, Case, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "icm-bayes", version, about = "Causal learning under correlated priors: figures and theorem checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mechanism marginal before and after unlimited cause-only data.
    Fig1(CommonArgs),
    /// Supervised learning curves.
    Fig2(CommonArgs),
    /// Averaged posterior-mean trajectories.
    #[command(name = "fig2-traj")]
    Fig2Traj(CommonArgs),
    /// Learning curves with added cause-only data.
    Fig3(CommonArgs),
    /// Grid verification battery.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed, decimal or 0x-hex.
    #[arg(long, value_parser = seed_arg)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// key=value override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Also write grid_prior.csv and grid_posterior.csv for the first rho.
    #[arg(long)]
    pub export_grids: bool,
    /// Swap in a likelihood that leaks cause data into the mechanism
    /// parameter; the conditional checks must then fail.
    #[arg(long, hide = true)]
    pub inject_violation: bool,
}

fn seed_arg(s: &str) -> std::result::Result<u64, String> {
    parse_seed(s).map_err(|e| e.to_string())
}

fn load(common: &CommonArgs, mode: Mode) -> Result<crate::experiment::ExperimentConfig> {
    let bytes = match &common.config {
        Some(p) => Some(fs::read(p).map_err(|e| Error::io(p, e))?),
        None => None,
    };
    let mut cfg = parse_config(bytes.as_deref(), &common.overrides, mode)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

fn run_figure<W: Write>(common: &CommonArgs, mode: Mode, out: &mut W) -> Result<i32> {
    let cfg = load(common, mode)?;
    let report = run(&cfg)?;
    let paths = emit_report(&report, &common.out)?;
    if mode == Mode::Unsupervised {
        for &rho in &cfg.rho_list {
            let tv = finite_m_tv(&cfg, rho)?;
            let _ = writeln!(out, "rho={rho}: finite-M (M={}) TV to limit = {tv:.3e}", cfg.finite_m);
        }
    }
    for p in paths {
        let _ = writeln!(out, "wrote {}", p.display());
    }
    Ok(EXIT_OK)
}

fn run_verify<W: Write>(args: &VerifyArgs, out: &mut W) -> Result<i32> {
    let cfg = load(&args.common, Mode::Supervised)?;
    let report = verify(
        &cfg,
        VerifyOptions {
            inject_violation: args.inject_violation,
        },
    )?;
    let _ = writeln!(out, "{report}");
    if args.export_grids {
        let dir = &args.common.out;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let case = Case::build(cfg.master_seed, &cfg.prior, &cfg.lik, cfg.rho_list[0], 5, 10)?;
        let spec = GridSpec::default_for(&case.prior)?;
        let prior_grid = grid_posterior_auto(&case.prior, &ObservationSet::empty(), &cfg.lik, spec, 3)?;
        let post_grid = case.grid(&cfg.lik, spec)?;
        for (name, g) in [("grid_prior.csv", &prior_grid), ("grid_posterior.csv", &post_grid)] {
            let path = dir.join(name);
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            g.write_csv(std::io::BufWriter::new(file))?;
            let _ = writeln!(out, "wrote {}", path.display());
        }
    }
    Ok(if report.all_passed() { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

pub fn execute<W: Write>(cli: &Cli, out: &mut W) -> Result<i32> {
    match &cli.command {
        Command::Fig1(c) => run_figure(c, Mode::Unsupervised, out),
        Command::Fig2(c) => run_figure(c, Mode::Supervised, out),
        Command::Fig2Traj(c) => run_figure(c, Mode::Trajectory, out),
        Command::Fig3(c) => run_figure(c, Mode::SemiSupervised, out),
        Command::Verify(v) => run_verify(v, out),
    }
}

/// Parses `argv`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
