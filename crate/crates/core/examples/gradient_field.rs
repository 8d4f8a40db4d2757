//! Reconstruction of the gradient of a potential from vector data with
//! tensor kernels.
//!
//! cargo run --release --example gradient_field

use sphkern::experiments::{build_model, ModelSource};
use sphkern::harmonics::{sphere_grid, Direction};
use sphkern::kernels::{shannon_pair, FieldKind, Geometry, PenaltyWeights};
use sphkern::transforms::RegionSpec;
use sphkern::vector_field::{
    gradient_of, vector_approximate, vector_optimize, vector_relative_error, vector_synthesize, vector_upward_continue,
};

fn main() -> sphkern::Result<()> {
    let (r, big_r, rho) = (6371.2, 7071.2, 0.3);
    let g = Geometry::with_kn(r, big_r, 12, 16, rho, FieldKind::Vector)?;
    let region = RegionSpec::with_default_data(Direction::new(0.0, 1.0, 0.0), rho)?;
    let b = gradient_of(&build_model(&ModelSource::Synthetic { degree: 16, seed: 5 }, r)?);
    let f1 = vector_upward_continue(&b, big_r)?;
    let sat = sphere_grid(big_r, g.n + f1.n_max + 2)?;
    let samples = vector_synthesize(&f1, &sat.nodes);
    let eval = region.eval_grid(r, 4)?;
    let reference = vector_synthesize(&b, &eval.nodes);

    let opt = vector_optimize(&g, &PenaltyWeights::constant(&g, 1e4, 1e4, 1e-3)?, None)?;
    for (name, pair) in [("optimized", opt), ("Shannon", shannon_pair(&g))] {
        let v = vector_approximate(&pair, &sat, &samples, f1.n_max, &b, &region, &eval.nodes)?;
        println!("{name:9}  noise-free relative error {:.3e}", vector_relative_error(&reference, &v, &eval)?);
    }
    Ok(())
}
