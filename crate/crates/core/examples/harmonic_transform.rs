//! Synthesis and analysis of a bandlimited potential on a Gauss grid, and the
//! coefficient text format.
//!
//! cargo run --example harmonic_transform

use sphkern::experiments::{build_model, ModelSource};
use sphkern::harmonics::{analyze, sphere_grid, synthesize, HarmonicCoefficients};

fn main() -> sphkern::Result<()> {
    let r = 6371.2;
    let model = build_model(&ModelSource::Synthetic { degree: 20, seed: 1 }, r)?;
    let grid = sphere_grid(r, 40)?;
    let samples = synthesize(&model, &grid.nodes);
    let back = analyze(&samples, &grid, 20)?;
    let err = model.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("{} nodes, max coefficient error {err:.2e}", grid.nodes.len());

    let mut text = Vec::new();
    model.with_n_max(2).write_text(&mut text)?;
    print!("{}", String::from_utf8_lossy(&text));
    let again = HarmonicCoefficients::read_text(&text[..])?;
    assert_eq!(again, model.with_n_max(2));
    Ok(())
}
