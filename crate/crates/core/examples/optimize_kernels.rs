//! Minimizes the functional for one weight choice and compares it with the
//! Shannon-type pair.
//!
//! cargo run --example optimize_kernels

use sphkern::kernels::{functional_value, gram, optimize_with_gram, shannon_bound, shannon_pair, FieldKind, Geometry, PenaltyWeights};

fn main() -> sphkern::Result<()> {
    let g = Geometry::with_kn(6371.2, 7071.2, 30, 40, 0.5, FieldKind::Scalar)?;
    let gm = gram(g.kind, g.kn, g.rho)?;
    let w = PenaltyWeights::constant(&g, 2e3, 1e4, 10.0)?;
    let pair = optimize_with_gram(&g, &w, None, &gm)?;
    let sh = shannon_pair(&g);
    println!("F(optimized) = {:.6e}", functional_value(&pair, &w, &gm, None)?);
    println!("F(Shannon)   = {:.6e}", functional_value(&sh, &w, &gm, None)?);
    println!("bound        = {:.6e}", shannon_bound(&g, w.beta));
    println!("  n  phi*sigma  phi_tilde  psi_tilde");
    let ps = pair.phi_sigma();
    for n in (0..=g.kn).step_by(5) {
        println!("{n:3}  {:9.5}  {:9.5}  {:9.5}", ps.get(n).copied().unwrap_or(0.0), pair.phi_tilde.value(n), pair.psi_tilde.value(n));
    }
    Ok(())
}
