//! Gradient fields: vector spherical harmonics of type 1 (radial) and type 2
//! (surface gradient), tensor kernels built from them, and the vector versions
//! of continuation, transforms and errors.
//!
//! Type-3 (toroidal) fields never arise as gradients of potentials and are not
//! represented.

use nalgebra::{DMatrix, Matrix3};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harmonics::{
    eval_harmonics_with_gradient, flat_index, num_coeffs, CapGrid, CapRule, Direction, HarmonicCoefficients,
    Quadrature, SphereGrid,
};
use crate::kernels::{FieldKind, Geometry, KernelPair, PenaltyWeights, SymbolSet};
use crate::legendre::{fill_with_derivatives, gauss_rule};
use crate::transforms::{cap_multipliers, NormRegion, RegionSpec, GROUND_STREAM, SATELLITE_STREAM};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;
const CHUNK: usize = 64;

/// A kernel pair whose geometry is of the vector kind.
pub type TensorKernelPair = KernelPair;

/// `y^{(1)}_{n,k} = ξ Y_{n,k}` or `y^{(2)}_{n,k} = ∇*Y_{n,k}/√(n(n+1))`.
pub fn vsh(i: u8, n: usize, k: usize, xi: &Direction) -> Result<Direction> {
    match i {
        1 => {
            let xi = xi.normalize();
            Ok(xi * crate::harmonics::ynk(n, k, &xi)?)
        }
        2 => {
            if n == 0 {
                return Err(Error::InvalidIndex("type-2 harmonics start at degree 1".into()));
            }
            let g = crate::harmonics::ynk_gradient(n, k, xi)?;
            Ok(g / ((n * (n + 1)) as f64).sqrt())
        }
        _ => Err(Error::InvalidIndex(format!("vector harmonic type {i} (only 1 and 2)"))),
    }
}

/// Fills both families for all `n ≤ n_max` at a unit direction; the degree-0
/// slot of `y2` is zero.
pub fn eval_vsh(n_max: usize, xi: &Direction, y1: &mut [Direction], y2: &mut [Direction], scratch: &mut [f64]) {
    eval_harmonics_with_gradient(n_max, xi, scratch, y2);
    for n in 0..=n_max {
        let inv = if n == 0 { 0.0 } else { 1.0 / ((n * (n + 1)) as f64).sqrt() };
        for i in n * n..(n + 1) * (n + 1) {
            y1[i] = xi * scratch[i];
            y2[i] *= inv;
        }
    }
}

/// Coefficients of a vector field `f = Σ_i Σ f^{(i)}_{n,k} (1/r) y^{(i)}_{n,k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorCoefficients {
    pub radius: f64,
    pub n_max: usize,
    ch1: Vec<f64>,
    ch2: Vec<f64>,
}

impl VectorCoefficients {
    pub fn zeros(radius: f64, n_max: usize) -> Result<Self> {
        Self::from_channels(radius, n_max, vec![0.0; num_coeffs(n_max)], vec![0.0; num_coeffs(n_max)])
    }

    /// The type-2 channel's degree-0 entry must be zero.
    pub fn from_channels(radius: f64, n_max: usize, ch1: Vec<f64>, ch2: Vec<f64>) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::OutOfRange(format!("radius {radius} must be positive")));
        }
        if ch1.len() != num_coeffs(n_max) || ch2.len() != num_coeffs(n_max) {
            return Err(Error::DimensionMismatch(format!("channel lengths do not match degree {n_max}")));
        }
        if ch2[0] != 0.0 {
            return Err(Error::InvalidIndex("type-2 coefficient of degree 0 does not exist".into()));
        }
        Ok(VectorCoefficients { radius, n_max, ch1, ch2 })
    }

    pub fn channel(&self, i: u8) -> &[f64] {
        if i == 1 {
            &self.ch1
        } else {
            &self.ch2
        }
    }

    pub fn get(&self, i: u8, n: usize, k: usize) -> f64 {
        if n > self.n_max || k == 0 || k > 2 * n + 1 || (i == 2 && n == 0) {
            return 0.0;
        }
        self.channel(i)[flat_index(n, k)]
    }

    pub fn set(&mut self, i: u8, n: usize, k: usize, value: f64) -> Result<()> {
        if n > self.n_max || k == 0 || k > 2 * n + 1 || !(i == 1 || i == 2) || (i == 2 && n == 0) {
            return Err(Error::InvalidIndex(format!("vector coefficient ({i}, {n}, {k})")));
        }
        let idx = flat_index(n, k);
        if i == 1 {
            self.ch1[idx] = value;
        } else {
            self.ch2[idx] = value;
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> f64 {
        self.ch1.iter().chain(&self.ch2).map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Multiplies degree-`n` blocks of channel `i` by `f(i, n)`.
    pub fn scale_degrees<F: Fn(u8, usize) -> f64>(&self, f: F) -> Self {
        let mut out = self.clone();
        for n in 0..=self.n_max {
            let (a, b) = (f(1, n), if n == 0 { 0.0 } else { f(2, n) });
            for idx in n * n..(n + 1) * (n + 1) {
                out.ch1[idx] *= a;
                out.ch2[idx] *= b;
            }
        }
        out
    }

    pub fn with_n_max(&self, n_max: usize) -> Self {
        let keep = num_coeffs(n_max.min(self.n_max));
        let mut ch1 = vec![0.0; num_coeffs(n_max)];
        let mut ch2 = vec![0.0; num_coeffs(n_max)];
        ch1[..keep].copy_from_slice(&self.ch1[..keep]);
        ch2[..keep].copy_from_slice(&self.ch2[..keep]);
        VectorCoefficients { radius: self.radius, n_max, ch1, ch2 }
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    /// `a + s·b` on the larger degree range.
    pub fn axpy(&self, s: f64, b: &VectorCoefficients) -> Self {
        let mut out = self.with_n_max(self.n_max.max(b.n_max));
        for (o, v) in out.ch1.iter_mut().zip(&b.ch1) {
            *o += s * v;
        }
        for (o, v) in out.ch2.iter_mut().zip(&b.ch2) {
            *o += s * v;
        }
        out
    }

    /// Text format: header then one `i n k value` line per coefficient.
    pub fn write_text<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        use crate::harmonics::format_float;
        writeln!(w, "# radius_km={} n_max={} channels=2", format_float(self.radius), self.n_max)?;
        for i in [1u8, 2] {
            for n in usize::from(i == 2)..=self.n_max {
                for k in 1..=2 * n + 1 {
                    writeln!(w, "{i} {n} {k} {}", format_float(self.get(i, n, k)))?;
                }
            }
        }
        Ok(())
    }

    pub fn read_text<R: std::io::BufRead>(reader: R) -> Result<Self> {
        use crate::harmonics::{header_value, numbered_lines, parse_field, parse_header};
        let mut lines = numbered_lines(reader);
        let (line_no, header) = lines
            .next()
            .transpose()?
            .ok_or(Error::Parse { line: 1, message: "empty coefficient file".into() })?;
        let fields = parse_header(&header, line_no)?;
        let radius = header_value::<f64>(&fields, "radius_km", line_no)?;
        let n_max = header_value::<usize>(&fields, "n_max", line_no)?;
        let channels = header_value::<usize>(&fields, "channels", line_no)?;
        if channels != 2 {
            return Err(Error::Parse { line: line_no, message: format!("expected channels=2, got {channels}") });
        }
        let mut out = Self::zeros(radius, n_max).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        let mut seen = vec![false; 2 * num_coeffs(n_max)];
        for item in lines {
            let (line_no, line) = item?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(Error::Parse { line: line_no, message: format!("expected `i n k value`, got {line:?}") });
            }
            let i: u8 = parse_field(parts[0], line_no, "type")?;
            let n: usize = parse_field(parts[1], line_no, "degree")?;
            let k: usize = parse_field(parts[2], line_no, "order index")?;
            let v: f64 = parse_field(parts[3], line_no, "value")?;
            out.set(i, n, k, v).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
            let slot = usize::from(i - 1) * num_coeffs(n_max) + flat_index(n, k);
            if seen[slot] {
                return Err(Error::Parse { line: line_no, message: format!("duplicate coefficient ({i}, {n}, {k})") });
            }
            seen[slot] = true;
        }
        Ok(out)
    }
}

/// The gradient `∇U` on the sphere of the potential's radius, for a potential
/// harmonic outside that sphere: `f^{(1)} = −(n+1)u/r`, `f^{(2)} = √(n(n+1))·u/r`.
pub fn gradient_of(potential: &HarmonicCoefficients) -> VectorCoefficients {
    let r = potential.radius;
    let len = num_coeffs(potential.n_max);
    let mut ch1 = vec![0.0; len];
    let mut ch2 = vec![0.0; len];
    for n in 0..=potential.n_max {
        let nf = n as f64;
        for idx in n * n..(n + 1) * (n + 1) {
            let u = potential.data()[idx];
            ch1[idx] = -(nf + 1.0) * u / r;
            ch2[idx] = (nf * (nf + 1.0)).sqrt() * u / r;
        }
    }
    VectorCoefficients { radius: r, n_max: potential.n_max, ch1, ch2 }
}

/// Field values at (unit) directions.
pub fn vector_synthesize(c: &VectorCoefficients, points: &[Direction]) -> Vec<Direction> {
    let n_max = c.n_max;
    let inv_r = 1.0 / c.radius;
    points
        .par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            let len = num_coeffs(n_max);
            let (mut y1, mut y2, mut s) = (vec![Direction::zeros(); len], vec![Direction::zeros(); len], vec![0.0; len]);
            chunk
                .iter()
                .map(|p| {
                    eval_vsh(n_max, &p.normalize(), &mut y1, &mut y2, &mut s);
                    let mut v = Direction::zeros();
                    for idx in 0..len {
                        v += y1[idx] * c.ch1[idx] + y2[idx] * c.ch2[idx];
                    }
                    v * inv_r
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// `Σ_j w_j f_j·y^{(i)}(ξ_j)` for both types, summed in node order.
fn vector_projection(nodes: &[Direction], weights: &[f64], samples: &[Direction], n_max: usize) -> (Vec<f64>, Vec<f64>) {
    let len = num_coeffs(n_max);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = nodes
        .par_chunks(CHUNK)
        .zip(weights.par_chunks(CHUNK))
        .zip(samples.par_chunks(CHUNK))
        .map(|((ns, ws), fs)| {
            let (mut a1, mut a2) = (vec![0.0; len], vec![0.0; len]);
            let (mut y1, mut y2, mut s) = (vec![Direction::zeros(); len], vec![Direction::zeros(); len], vec![0.0; len]);
            for ((p, &w), f) in ns.iter().zip(ws).zip(fs) {
                eval_vsh(n_max, p, &mut y1, &mut y2, &mut s);
                let wf = f * w;
                for idx in 0..len {
                    a1[idx] += wf.dot(&y1[idx]);
                    a2[idx] += wf.dot(&y2[idx]);
                }
            }
            (a1, a2)
        })
        .collect();
    let (mut c1, mut c2) = (vec![0.0; len], vec![0.0; len]);
    for (p1, p2) in partials {
        for idx in 0..len {
            c1[idx] += p1[idx];
            c2[idx] += p2[idx];
        }
    }
    (c1, c2)
}

/// Quadrature of the vector Fourier coefficients; needs exactness `≥ 2·n_max + 2`.
pub fn vector_analyze(samples: &[Direction], grid: &SphereGrid, n_max: usize) -> Result<VectorCoefficients> {
    if grid.exact_degree < 2 * n_max + 2 {
        return Err(Error::InsufficientExactness { available: grid.exact_degree, required: 2 * n_max + 2 });
    }
    if samples.len() != grid.nodes.len() {
        return Err(Error::DimensionMismatch(format!("{} samples for {} nodes", samples.len(), grid.nodes.len())));
    }
    let (mut c1, mut c2) = vector_projection(&grid.nodes, &grid.weights, samples, n_max);
    let inv_r = 1.0 / grid.radius;
    c1.iter_mut().for_each(|v| *v *= inv_r);
    c2.iter_mut().for_each(|v| *v *= inv_r);
    c2[0] = 0.0;
    VectorCoefficients::from_channels(grid.radius, n_max, c1, c2)
}

/// Both channels times `(r/R)^{n+1}`; the result lives on radius `big_r`.
pub fn vector_upward_continue(b_plus: &VectorCoefficients, big_r: f64) -> Result<VectorCoefficients> {
    if !(b_plus.radius < big_r && big_r.is_finite()) {
        return Err(Error::OutOfRange(format!("outer radius {big_r} must exceed {}", b_plus.radius)));
    }
    let q = b_plus.radius / big_r;
    Ok(b_plus.scale_degrees(|_, n| q.powi(n as i32 + 1)).with_radius(big_r))
}

/// Minimizer of the vector functional; `geometry.kind` must be `Vector`.
pub fn vector_optimize(geometry: &Geometry, w: &PenaltyWeights, targets: Option<&SymbolSet>) -> Result<TensorKernelPair> {
    if geometry.kind != FieldKind::Vector {
        return Err(Error::DimensionMismatch("vector_optimize needs a vector geometry".into()));
    }
    crate::kernels::optimize(geometry, w, targets)
}

/// Scalar profiles of a tensor kernel at `t`: the type-1 factor
/// `a = Σ (2n+1)/(4π) ψ_n P_n` and the type-2 factors
/// `C1 = Σ c_n P_n'`, `C2 = Σ c_n P_n''` with `c_n = (2n+1)ψ_n/(4π n(n+1))`.
#[derive(Clone, Copy, Debug)]
pub struct TensorProfile {
    pub a: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Evaluates the tensor profile; buffers are resized as needed.
pub fn tensor_profile(psi: &[f64], t: f64) -> TensorProfile {
    let len = psi.len();
    let (mut p, mut d1, mut d2) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    fill_with_derivatives(t.clamp(-1.0, 1.0), &mut p, &mut d1, &mut d2);
    let mut out = TensorProfile { a: 0.0, c1: 0.0, c2: 0.0 };
    for n in 0..len {
        let c = (2 * n + 1) as f64 / FOUR_PI * psi[n];
        out.a += c * p[n];
        if n > 0 {
            let cn = c / (n * (n + 1)) as f64;
            out.c1 += cn * d1[n];
            out.c2 += cn * d2[n];
        }
    }
    out
}

/// `Σ_i Σ_{n,k} ψ_n y^{(i)}_{n,k}(ξ) (y^{(i)}_{n,k}(η)·f)` in closed form
/// (without radius factors).
pub fn tensor_apply(profile: &TensorProfile, xi: &Direction, eta: &Direction, f: &Direction) -> Direction {
    let t = xi.dot(eta);
    let u = eta - xi * t;
    let v = xi - eta * t;
    let ef = eta.dot(f);
    let tangential = f - xi * xi.dot(f) - u * ef;
    xi * (profile.a * ef) + u * (profile.c2 * v.dot(f)) + tangential * profile.c1
}

/// The 3×3 kernel matrix (without radius factors).
pub fn tensor_matrix(profile: &TensorProfile, xi: &Direction, eta: &Direction) -> Matrix3<f64> {
    let t = xi.dot(eta);
    let u = eta - xi * t;
    let v = xi - eta * t;
    let proj = Matrix3::identity() - xi * xi.transpose();
    xi * eta.transpose() * profile.a + u * v.transpose() * profile.c2 + (proj - u * eta.transpose()) * profile.c1
}

/// Squared Frobenius norm of the kernel as a function of `t` (radius factors excluded).
pub fn tensor_frobenius_sq(profile: &TensorProfile, t: f64) -> f64 {
    let q = 1.0 - t * t;
    profile.a * profile.a + profile.c2 * profile.c2 * q * q + profile.c1 * profile.c1 * (1.0 + t * t)
        - 2.0 * profile.c1 * profile.c2 * t * q
}

/// `∫_a^b |Ψ̃(t)|² dt` for the tensor kernel on a sphere of radius `r`.
pub fn tensor_norm_sq(psi: &[f64], r: f64, a: f64, b: f64) -> Result<f64> {
    let rule = gauss_rule(psi.len() + 3, a, b)?;
    Ok(rule.integrate(|t| tensor_frobenius_sq(&tensor_profile(psi, t), t)) / r.powi(4))
}

/// `∫_{−1}^{1} |Ψ̃(t)|² dt = (ψ_0² + Σ_{n≥1} 2(2n+1) ψ_n²)/(8π² r⁴)`.
pub fn tensor_parseval(psi: &[f64], r: f64) -> f64 {
    let s: f64 = psi
        .iter()
        .enumerate()
        .map(|(n, v)| crate::kernels::full_gram_diagonal(FieldKind::Vector, n) * v * v)
        .sum();
    s / (8.0 * std::f64::consts::PI.powi(2) * r.powi(4))
}

/// `∫_{−1}^{1} t |Ψ̃(t)|² dt` in closed form.
///
/// The type-1 part contributes `(2n+1)(2m+1)/(16π²) ψ_nψ_m ∫tP_nP_m` for all
/// `n, m`, the type-2 part the same times `1 − 1/max(n,m)²` on the bands
/// `|n − m| = 1`, `n, m ≥ 1`.
pub fn tensor_first_moment(psi: &[f64], r: f64) -> f64 {
    let mut s = 0.0;
    for n in 0..psi.len() {
        for m in [n.wrapping_sub(1), n + 1] {
            if m >= psi.len() {
                continue;
            }
            // ∫ t P_n P_{n+1} = 2(n+1)/((2n+1)(2n+3))
            let lo = n.min(m);
            let tpp = 2.0 * (lo + 1) as f64 / ((2 * lo + 1) as f64 * (2 * lo + 3) as f64);
            let base = (2 * n + 1) as f64 * (2 * m + 1) as f64 / (16.0 * std::f64::consts::PI.powi(2)) * psi[n] * psi[m] * tpp;
            let hi = n.max(m) as f64;
            let type2 = if lo >= 1 { 1.0 - 1.0 / (hi * hi) } else { 0.0 };
            s += base * (1.0 + type2);
        }
    }
    s / r.powi(4)
}

/// Spectral multipliers of the cap-restricted tensor wavelet transform for
/// type-1 and type-2 fields, up to degree `n_max`.
///
/// Type 1 shares the scalar multipliers. Type 2:
/// `λ_n = ψ_n − Σ_m ψ_m (2m+1)/(2m(m+1)n(n+1)) ∫_{−1}^{1−ρ} q_m q_n + P_m'P_n' dt`
/// with `q_n = n(n+1)P_n − tP_n'`.
pub fn vector_cap_multipliers(psi: &SymbolSet, rho: f64, n_max: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let lambda1 = cap_multipliers(psi, rho, n_max)?;
    let mut lambda2: Vec<f64> = (0..=n_max).map(|n| psi.value(n)).collect();
    lambda2[0] = 0.0;
    if rho < 2.0 {
        let dim = n_max.max(psi.n_max()) + 1;
        let rule = gauss_rule(dim + 1, -1.0, 1.0 - rho)?;
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        let (mut p, mut d1, mut d2) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            fill_with_derivatives(t, &mut p, &mut d1, &mut d2);
            let q: Vec<f64> = (0..dim).map(|n| (n * (n + 1)) as f64 * p[n] - t * d1[n]).collect();
            for n in 1..dim {
                for m in 1..dim {
                    h[(n, m)] += w * (q[n] * q[m] + d1[n] * d1[m]);
                }
            }
        }
        for (n, l) in lambda2.iter_mut().enumerate().skip(1) {
            let s: f64 = (1..=psi.n_max().min(dim - 1))
                .map(|m| psi.value(m) * (2 * m + 1) as f64 / (2 * m * (m + 1) * n * (n + 1)) as f64 * h[(n, m)])
                .sum();
            *l -= s;
        }
    }
    Ok((lambda1, lambda2))
}

/// `t_N[f₁]` in coefficient space.
pub fn vector_scaling_spectral(pair: &TensorKernelPair, f1: &VectorCoefficients) -> VectorCoefficients {
    let n = pair.geometry.n;
    f1.with_n_max(n.min(f1.n_max)).scale_degrees(|_, d| pair.phi.value(d)).with_radius(pair.geometry.r)
}

/// `w̃_N[f₂]` in coefficient space.
pub fn vector_wavelet_spectral(pair: &TensorKernelPair, f2: &VectorCoefficients, rho: f64) -> Result<VectorCoefficients> {
    let (l1, l2) = vector_cap_multipliers(&pair.psi_tilde, rho, f2.n_max)?;
    Ok(f2.scale_degrees(|i, n| if i == 1 { l1[n] } else { l2[n] }).with_radius(pair.geometry.r))
}

/// `b_N^ε` in coefficient space.
pub fn vector_approximate_spectral(
    pair: &TensorKernelPair,
    f1: &VectorCoefficients,
    f2: &VectorCoefficients,
    kernel_rho: f64,
) -> Result<VectorCoefficients> {
    let t = vector_scaling_spectral(pair, f1);
    let w = vector_wavelet_spectral(pair, f2, kernel_rho)?;
    Ok(t.axpy(1.0, &w))
}

/// `t_N[f₁]` at `points` by quadrature over the satellite grid.
pub fn vector_scaling_transform(
    pair: &TensorKernelPair,
    grid: &SphereGrid,
    f1_samples: &[Direction],
    data_degree: usize,
    points: &[Direction],
) -> Result<Vec<Direction>> {
    let g = &pair.geometry;
    if ((grid.radius - g.big_r) / g.big_r).abs() > 1e-12 {
        return Err(Error::DimensionMismatch(format!("satellite grid radius {}, expected {}", grid.radius, g.big_r)));
    }
    let required = g.n + data_degree + 2;
    if grid.exact_degree < required {
        return Err(Error::InsufficientExactness { available: grid.exact_degree, required });
    }
    let (mut c1, mut c2) = vector_projection(&grid.nodes, &grid.weights, f1_samples, g.n);
    for n in 0..=g.n {
        let f = pair.phi.value(n) / g.big_r;
        for idx in n * n..(n + 1) * (n + 1) {
            c1[idx] *= f;
            c2[idx] *= f;
        }
    }
    c2[0] = 0.0;
    let c = VectorCoefficients::from_channels(g.r, g.n, c1, c2)?;
    Ok(vector_synthesize(&c, points))
}

/// `w̃_N[f₂](x) = ∫_{C_r(x,ρ)} Ψ̃_N(x,y) f₂(y) dω(y)` by cap quadrature with the
/// closed-form tensor kernel.
pub fn vector_wavelet_local(
    pair: &TensorKernelPair,
    f2: &VectorCoefficients,
    points: &[Direction],
    region: &RegionSpec,
) -> Result<Vec<Direction>> {
    let g = &pair.geometry;
    if let Some(p) = points.iter().find(|p| !region.in_eval_region(p)) {
        return Err(Error::OutsideRegion(format!("{p:?} is not in the evaluation cap")));
    }
    let rule = CapRule::new(region.kernel_rho, g.kn + f2.n_max + 2)?;
    let inv_r2 = 1.0 / (g.r * g.r);
    let psi = pair.psi_tilde.values();
    points
        .par_iter()
        .map(|p| {
            let xi = p.normalize();
            let cap = rule.place(&xi, g.r)?;
            let values = vector_synthesize(f2, &cap.nodes);
            let mut acc = Direction::zeros();
            for ((eta, w), f) in cap.nodes.iter().zip(&cap.weights).zip(&values) {
                let prof = tensor_profile(psi, xi.dot(eta));
                acc += tensor_apply(&prof, &xi, eta, f) * (w * inv_r2);
            }
            Ok(acc)
        })
        .collect()
}

/// `b_N^ε = t_N[f₁] + w̃_N[f₂]` at `points` by quadrature.
pub fn vector_approximate(
    pair: &TensorKernelPair,
    grid: &SphereGrid,
    f1_samples: &[Direction],
    f1_degree: usize,
    f2: &VectorCoefficients,
    region: &RegionSpec,
    points: &[Direction],
) -> Result<Vec<Direction>> {
    let t = vector_scaling_transform(pair, grid, f1_samples, f1_degree, points)?;
    let w = vector_wavelet_local(pair, f2, points, region)?;
    Ok(t.iter().zip(&w).map(|(a, b)| a + b).collect())
}

/// `l²` norm over a grid of pointwise Euclidean lengths.
pub fn vector_l2_norm<Q: Quadrature>(grid: &Q, values: &[Direction]) -> f64 {
    grid.weights().iter().zip(values).map(|(w, v)| w * v.norm_squared()).sum::<f64>().sqrt()
}

/// `‖approx − ref‖ / ‖ref‖` over a cap grid.
pub fn vector_relative_error(reference: &[Direction], approx: &[Direction], grid: &CapGrid) -> Result<f64> {
    if reference.len() != grid.nodes.len() || approx.len() != grid.nodes.len() {
        return Err(Error::DimensionMismatch("samples do not match the grid".into()));
    }
    let den = vector_l2_norm(grid, reference);
    if !(den > 0.0) {
        return Err(Error::Degenerate("reference field vanishes on the region".into()));
    }
    let diff: Vec<Direction> = reference.iter().zip(approx).map(|(a, b)| a - b).collect();
    Ok(vector_l2_norm(grid, &diff) / den)
}

/// I.i.d. standard normal coefficients in both channels.
pub fn vector_gaussian_coefficients(radius: f64, degree: usize, seed: u64, stream: u64) -> Result<VectorCoefficients> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let len = num_coeffs(degree);
    let ch1: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut ch2: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
    ch2[0] = 0.0;
    VectorCoefficients::from_channels(radius, degree, ch1, ch2)
}

/// Vector analogue of [`crate::transforms::scaled_noise`].
pub fn vector_scaled_noise(signal: &VectorCoefficients, noise_degree: usize, seed: u64, region: NormRegion) -> Result<VectorCoefficients> {
    let stream = match region {
        NormRegion::Sphere => SATELLITE_STREAM,
        NormRegion::Cap(_) => GROUND_STREAM,
    };
    let raw = vector_gaussian_coefficients(signal.radius, noise_degree, seed, stream)?;
    let (e, f) = match region {
        NormRegion::Sphere => (raw.l2_norm(), signal.l2_norm()),
        NormRegion::Cap(grid) => {
            let need = 2 * noise_degree.max(signal.n_max) + 2;
            if grid.exact_degree < need {
                return Err(Error::InsufficientExactness { available: grid.exact_degree, required: need });
            }
            (
                vector_l2_norm(grid, &vector_synthesize(&raw, &grid.nodes)),
                vector_l2_norm(grid, &vector_synthesize(signal, &grid.nodes)),
            )
        }
    };
    if !(e > 0.0) {
        return Err(Error::Degenerate("noise realization vanishes on its region".into()));
    }
    Ok(raw.scale_degrees(|_, _| f / e))
}

/// `∫ f_a·f_b dω` over a grid for a list of vector fields.
pub fn vector_field_gram(fields: &[&VectorCoefficients], grid: &CapGrid) -> DMatrix<f64> {
    let n_max = fields.iter().map(|f| f.n_max).max().unwrap_or(0);
    let len = num_coeffs(n_max);
    let k = fields.len();
    let partials: Vec<DMatrix<f64>> = grid
        .nodes
        .par_chunks(CHUNK)
        .zip(grid.weights.par_chunks(CHUNK))
        .map(|(ns, ws)| {
            let mut acc = DMatrix::<f64>::zeros(k, k);
            let (mut y1, mut y2, mut s) = (vec![Direction::zeros(); len], vec![Direction::zeros(); len], vec![0.0; len]);
            let mut vals = vec![Direction::zeros(); k];
            for (p, &w) in ns.iter().zip(ws) {
                eval_vsh(n_max, p, &mut y1, &mut y2, &mut s);
                for (v, f) in vals.iter_mut().zip(fields) {
                    let mut sum = Direction::zeros();
                    for idx in 0..num_coeffs(f.n_max) {
                        sum += y1[idx] * f.ch1[idx] + y2[idx] * f.ch2[idx];
                    }
                    *v = sum / f.radius;
                }
                for a in 0..k {
                    for b in a..k {
                        acc[(a, b)] += w * vals[a].dot(&vals[b]);
                    }
                }
            }
            acc
        })
        .collect();
    let mut out = DMatrix::<f64>::zeros(k, k);
    for p in partials {
        out += p;
    }
    for a in 0..k {
        for b in 0..a {
            out[(a, b)] = out[(b, a)];
        }
    }
    out
}
