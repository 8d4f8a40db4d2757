//! Satellite-only truncated inversion: the error grows with the cutoff once
//! noise dominates.
//!
//! cargo run --release --example tsvd_reference

use sphkern::experiments::{median_errors, run_tsvd_table, ExperimentConfig};

fn main() -> sphkern::Result<()> {
    let cfg = ExperimentConfig::parse("rho = 0.5\nepsilon1 = 0, 0.01, 0.1\nn_seeds = 5\n")?;
    for ((_, e, _, label), err) in median_errors(&run_tsvd_table(&cfg)?) {
        println!("eps1 {:5}  {label:8}  {err:.4}", f64::from_bits(e));
    }
    Ok(())
}
