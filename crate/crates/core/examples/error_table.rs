//! Reduced-size error table: best optimized weights against the best
//! Shannon-type cutoff, median over replicates.
//!
//! cargo run --release --example error_table

use sphkern::experiments::{best_by_prefix, run_table, ExperimentConfig};

fn main() -> sphkern::Result<()> {
    let cfg = ExperimentConfig::parse("rho = 0.5, 0.1\nepsilon1 = 0.01, 0.1\ngamma = 1, 5\nn_seeds = 5\n")?;
    let rows = run_table(&cfg)?;
    let opt = best_by_prefix(&rows, "optimized");
    let sh = best_by_prefix(&rows, "shannon");
    println!("  rho  eps1  gamma   optimized   Shannon   (winning settings)");
    for (k, (o, ol)) in &opt {
        let (s, sl) = &sh[k];
        let f = |b: u64| f64::from_bits(b);
        println!("{:5} {:5} {:5}   {o:9.4} {s:9.4}   {ol} / {sl}", f(k.0), f(k.1), f(k.2));
    }
    Ok(())
}
