//! Cap Gram matrices of zonal kernels, scalar and tensor.
//!
//! cargo run --example gram_matrix

use sphkern::kernels::{gram_scalar, gram_vector};

fn main() -> sphkern::Result<()> {
    let s = gram_scalar(3, 0.5)?;
    println!("scalar, rho = 0.5:\n{:.5}", s.entries);
    let v = gram_vector(3, 0.5)?;
    println!("tensor, rho = 0.5:\n{:.5}", v.entries);
    Ok(())
}
