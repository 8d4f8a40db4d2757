//! Share of the wavelet kernel's energy outside the cap as the degree grows,
//! with weights growing like N^{2(1+δ)} times the Shannon bound.
//!
//! cargo run --example localization

use sphkern::kernels::{localization_ratio, optimize, shannon_pair, FieldKind, Geometry, PenaltyWeights};

fn main() -> sphkern::Result<()> {
    let rho = 0.5;
    for kind in [FieldKind::Scalar, FieldKind::Vector] {
        for n in [10, 20, 40, 60] {
            let g = Geometry::new(6371.2, 7071.2, n, 1.25, rho, kind)?;
            let pair = optimize(&g, &PenaltyWeights::localizing(&g, 1.0, 0.5)?, None)?;
            let opt = localization_ratio(&pair.psi_tilde, rho, kind)?;
            let sh = localization_ratio(&shannon_pair(&g).psi_tilde, rho, kind)?;
            println!("{:6} N={n:2} kN={:2}  optimized {opt:.4e}  Shannon {sh:.4e}", kind.as_str(), g.kn);
        }
    }
    Ok(())
}
