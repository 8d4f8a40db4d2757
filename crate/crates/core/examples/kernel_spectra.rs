//! Writes the per-degree symbols of an optimized pair as CSV.
//!
//! cargo run --example kernel_spectra > spectra.csv

use sphkern::experiments::{export_spectra, optimized_pair, ExperimentConfig};

fn main() -> sphkern::Result<()> {
    let cfg = ExperimentConfig::parse("rho = 0.5\nbeta = 10\nalpha_tilde = 1e4\nalpha_ratio = 0.2\n")?;
    export_spectra(&optimized_pair(&cfg)?, std::io::stdout().lock())
}
