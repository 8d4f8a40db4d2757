use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sphkern::experiments::{self, ExperimentConfig};
use sphkern::{Error, Result};

#[derive(Parser)]
#[command(name = "sphkern", version, about = "Optimized kernel pairs for combined satellite and ground data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Config file with `key = value` lines.
    config: PathBuf,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; defaults to the `out` key, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Gram matrix for the first cap radius.
    Gram(Common),
    /// Optimized symbols for the first radius and weights.
    Optimize(Common),
    /// Shannon-type symbols, their functional value and the bound.
    Shannon(Common),
    /// Truncated inversion symbols for the first `tsvd_m`.
    Tsvd(Common),
    /// Pointwise approximation on a small grid in the evaluation cap.
    Approximate(Common),
    /// Error table of optimized and Shannon-type pairs.
    Table(Common),
    /// Error table of satellite-only truncated inversion.
    TsvdTable(Common),
    /// Spectra of the optimized pair.
    Spectra(Common),
}

fn open_out(cfg: &ExperimentConfig, out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    match out.as_ref().or(cfg.out.as_ref()) {
        Some(p) => Ok(Box::new(BufWriter::new(File::create(p)?))),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn run(cli: Cli) -> Result<()> {
    let (Command::Gram(c)
    | Command::Optimize(c)
    | Command::Shannon(c)
    | Command::Tsvd(c)
    | Command::Approximate(c)
    | Command::Table(c)
    | Command::TsvdTable(c)
    | Command::Spectra(c)) = &cli.command;
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let mut w = open_out(&cfg, &c.out)?;
    match &cli.command {
        Command::Gram(_) => experiments::write_gram_csv(&cfg, &mut w)?,
        Command::Optimize(_) => experiments::write_pair_csv(&experiments::optimized_pair(&cfg)?, &mut w)?,
        Command::Shannon(_) => {
            let (pair, value, bound) = experiments::shannon_summary(&cfg)?;
            eprintln!("functional {value:.17e}  bound {bound:.17e}");
            experiments::write_pair_csv(&pair, &mut w)?;
        }
        Command::Tsvd(_) => experiments::write_tsvd_csv(&cfg, &mut w)?,
        Command::Approximate(_) => {
            let run = experiments::run_approximate(&cfg)?;
            eprintln!("relative error {:.6e} (coefficient route {:.6e})", run.error, run.spectral_error);
            experiments::write_pointwise_csv(&run, &mut w)?;
        }
        Command::Table(_) => experiments::write_rows_csv(&experiments::run_table(&cfg)?, cfg.timing, &mut w)?,
        Command::TsvdTable(_) => {
            experiments::write_rows_csv(&experiments::run_tsvd_table(&cfg)?, cfg.timing, &mut w)?
        }
        Command::Spectra(_) => experiments::export_spectra(&experiments::optimized_pair(&cfg)?, &mut w)?,
    }
    w.flush().map_err(Error::from)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
