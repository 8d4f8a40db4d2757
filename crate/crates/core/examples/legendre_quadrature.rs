//! Legendre values with derivatives and Gauss rules on sub-intervals.
//!
//! cargo run --example legendre_quadrature

use sphkern::legendre::{gauss_rule, legendre_all};

fn main() -> sphkern::Result<()> {
    for e in legendre_all(4, 0.3)? {
        println!("P_{}(0.3) = {:+.6}  P' = {:+.6}  P'' = {:+.6}", e.degree, e.value, e.d1, e.d2);
    }
    // ∫_{-1}^{0.5} P_0 P_1 dt = -0.375, exact for a 2-point rule
    let rule = gauss_rule(2, -1.0, 0.5)?;
    println!("int_-1^0.5 t dt = {:.15}", rule.integrate(|t| t));
    let rule = gauss_rule(20, -1.0, 1.0)?;
    println!("int_-1^1 t^38 dt = {:.15} (exact {:.15})", rule.integrate(|t| t.powi(38)), 2.0 / 39.0);
    Ok(())
}
