//! Noisy satellite data on the outer sphere plus noisy ground data in a cap,
//! combined pointwise by quadrature with an optimized pair.
//!
//! cargo run --release --example combined_approximation

use sphkern::experiments::{build_model, ModelSource};
use sphkern::harmonics::{sphere_grid, synthesize};
use sphkern::kernels::{optimize, shannon_pair, FieldKind, Geometry, PenaltyWeights};
use sphkern::transforms::{add_noise, approximate, relative_error, upward_continue, NoiseSpec, NormRegion, RegionSpec};
use sphkern::harmonics::Direction;

fn main() -> sphkern::Result<()> {
    let (r, big_r, rho) = (6371.2, 7071.2, 0.5);
    let g = Geometry::with_kn(r, big_r, 20, 26, rho, FieldKind::Scalar)?;
    let region = RegionSpec::with_default_data(Direction::z(), rho)?;
    let model = build_model(&ModelSource::Synthetic { degree: 26, seed: 3 }, r)?;
    let noise = NoiseSpec::new(0.05, 0.05, 30, 11)?;

    let f1 = add_noise(&upward_continue(&model, big_r)?, &noise, NormRegion::Sphere)?;
    let f2 = add_noise(&model, &noise, NormRegion::Cap(&region.data_grid(r, 60)?))?;
    let sat = sphere_grid(big_r, g.n + f1.n_max)?;
    let samples = synthesize(&f1, &sat.nodes);
    let eval = region.eval_grid(r, 6)?;
    let reference = synthesize(&model, &eval.nodes);

    let opt = optimize(&g, &PenaltyWeights::constant(&g, 1.0, 1.0, 1.0)?, None)?;
    for (name, pair) in [("optimized", opt), ("Shannon", shannon_pair(&g))] {
        let u = approximate(&pair, &sat, &samples, f1.n_max, &f2, &region, &eval.nodes)?;
        println!("{name:9}  relative error {:.4}", relative_error(&reference, &u, &eval)?);
    }
    Ok(())
}
