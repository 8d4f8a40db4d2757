//! Upward continuation, the scaling transform on the outer sphere, the
//! cap-restricted wavelet transform on the inner sphere, their sum, noise
//! injection and relative errors.
//!
//! Every transform has a quadrature path working on samples at grid nodes and a
//! spectral path working on coefficients. For bandlimited inputs and
//! sufficiently exact grids the two agree to rounding.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harmonics::{
    cap_grid, dot, eval_harmonics, num_coeffs, synthesize, weighted_projection, CapGrid, CapRule, Direction,
    HarmonicCoefficients, Quadrature, SphereGrid,
};
use crate::kernels::{scalar_gram_on, FieldKind, KernelPair, SymbolSet};
use crate::legendre::legendre_series;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Angular radius of a cap `{1 − c·ξ < a}`.
pub fn cap_angle(a: f64) -> f64 {
    (1.0 - a).clamp(-1.0, 1.0).acos()
}

/// Data cap `Γ_r`, integration cap radius and the derived evaluation cap `Γ̃_r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionSpec {
    pub center: Direction,
    /// Radius of `Γ_r` in the `1 − cos` measure; `≥ 2` means the whole sphere.
    pub data_rho: f64,
    /// Radius of the integration caps `C_r(x, ρ)`.
    pub kernel_rho: f64,
}

impl RegionSpec {
    pub fn new(center: Direction, data_rho: f64, kernel_rho: f64) -> Result<Self> {
        let norm = center.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::OutOfRange("region center has no direction".into()));
        }
        if !(kernel_rho > 0.0 && kernel_rho <= 2.0) {
            return Err(Error::OutOfRange(format!("kernel cap radius {kernel_rho} not in (0, 2]")));
        }
        if !(data_rho > 0.0) {
            return Err(Error::OutOfRange(format!("data cap radius {data_rho} must be positive")));
        }
        let spec = RegionSpec { center: center / norm, data_rho: data_rho.min(2.0), kernel_rho };
        if spec.data_rho < 2.0 && cap_angle(spec.data_rho) <= cap_angle(kernel_rho) {
            return Err(Error::OutOfRange(format!(
                "data cap {data_rho} leaves no room for integration caps of radius {kernel_rho}"
            )));
        }
        Ok(spec)
    }

    /// The default data cap `ϱ = min(ρ + 0.1, 2)`.
    pub fn with_default_data(center: Direction, kernel_rho: f64) -> Result<Self> {
        Self::new(center, (kernel_rho + 0.1).min(2.0), kernel_rho)
    }

    /// Radius of `Γ̃_r`: the data cap eroded by the angular radius of the
    /// integration caps, so every `C_r(x, ρ)` with `x ∈ Γ̃_r` lies in `Γ_r`.
    pub fn eval_rho(&self) -> f64 {
        if self.data_rho >= 2.0 {
            return 2.0;
        }
        1.0 - (cap_angle(self.data_rho) - cap_angle(self.kernel_rho)).cos()
    }

    pub fn covers_sphere(&self) -> bool {
        self.data_rho >= 2.0
    }

    pub fn in_eval_region(&self, xi: &Direction) -> bool {
        let t = self.center.dot(&xi.normalize());
        1.0 - t <= self.eval_rho() * (1.0 + 1e-12) + 1e-15
    }

    /// Cap quadrature over `Γ̃_r`.
    pub fn eval_grid(&self, radius: f64, exact_degree: usize) -> Result<CapGrid> {
        cap_grid(radius, &self.center, self.eval_rho(), exact_degree)
    }

    /// Cap quadrature over `Γ_r`.
    pub fn data_grid(&self, radius: f64, exact_degree: usize) -> Result<CapGrid> {
        cap_grid(radius, &self.center, self.data_rho, exact_degree)
    }
}

/// Noise levels, degree and seed of one realization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub noise_degree: usize,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(epsilon1: f64, epsilon2: f64, noise_degree: usize, seed: u64) -> Result<Self> {
        if !(epsilon1 >= 0.0 && epsilon2 >= 0.0 && epsilon1.is_finite() && epsilon2.is_finite()) {
            return Err(Error::OutOfRange("noise levels must be nonnegative".into()));
        }
        Ok(NoiseSpec { epsilon1, epsilon2, noise_degree, seed })
    }
}

/// Region over which a noise realization is normalized.
#[derive(Clone, Copy, Debug)]
pub enum NormRegion<'a> {
    /// Satellite data: the whole outer sphere, scaled by `epsilon1`.
    Sphere,
    /// Ground data: the data cap, scaled by `epsilon2`.
    Cap(&'a CapGrid),
}

/// Coefficient-wise `σ_n = (r/R)^n`; the result lives on radius `big_r`.
pub fn upward_continue(u_plus: &HarmonicCoefficients, big_r: f64) -> Result<HarmonicCoefficients> {
    continue_with(u_plus, big_r, FieldKind::Scalar)
}

pub(crate) fn continue_with(u: &HarmonicCoefficients, big_r: f64, kind: FieldKind) -> Result<HarmonicCoefficients> {
    if !(u.radius < big_r && big_r.is_finite()) {
        return Err(Error::OutOfRange(format!("outer radius {big_r} must exceed {}", u.radius)));
    }
    let q = u.radius / big_r;
    Ok(u.scale_degrees(|n| crate::kernels::sigma(q, n, kind)).with_radius(big_r))
}

/// Applies symbols degree-wise and moves the result to `radius`; degrees
/// above the symbol range vanish.
pub fn apply_symbols(c: &HarmonicCoefficients, symbols: &[f64], radius: f64) -> HarmonicCoefficients {
    let n_max = c.n_max.min(symbols.len().saturating_sub(1));
    let mut out = c.with_n_max(n_max).with_radius(radius);
    let data = out.data_mut();
    for n in 0..=n_max {
        for v in &mut data[n * n..(n + 1) * (n + 1)] {
            *v *= symbols[n];
        }
    }
    out
}

/// `T_N[F₁]` in coefficient space: `Φ^∧(n)·(F₁)^∧(n,k)` on the inner sphere.
pub fn scaling_transform_spectral(pair: &KernelPair, f1: &HarmonicCoefficients) -> HarmonicCoefficients {
    apply_symbols(f1, pair.phi.values(), pair.geometry.r)
}

fn check_exact(available: usize, required: usize) -> Result<()> {
    if available < required {
        return Err(Error::InsufficientExactness { available, required });
    }
    Ok(())
}

fn check_radius(expected: f64, got: f64, what: &str) -> Result<()> {
    if ((expected - got) / expected).abs() > 1e-12 {
        return Err(Error::DimensionMismatch(format!("{what} radius {got}, expected {expected}")));
    }
    Ok(())
}

/// `T_N[F₁](x) = ∫_{Ω_R} Φ_N(x,y) F₁(y) dω(y)` by quadrature over `grid`.
///
/// The kernel separates into harmonics, so the quadrature sum is evaluated as
/// a projection of the samples on degrees `≤ N` followed by synthesis at the
/// points. `data_degree` is the degree of `F₁`.
pub fn scaling_transform(
    pair: &KernelPair,
    grid: &SphereGrid,
    f1_samples: &[f64],
    data_degree: usize,
    points: &[Direction],
) -> Result<Vec<f64>> {
    let g = &pair.geometry;
    check_radius(g.big_r, grid.radius, "satellite grid")?;
    check_exact(grid.exact_degree, g.n + data_degree)?;
    if f1_samples.len() != grid.nodes.len() {
        return Err(Error::DimensionMismatch(format!("{} samples for {} nodes", f1_samples.len(), grid.nodes.len())));
    }
    let proj = weighted_projection(&grid.nodes, &grid.weights, f1_samples, g.n);
    let mut c = HarmonicCoefficients::from_vec(g.r, g.n, proj)?;
    let inv_big_r = 1.0 / g.big_r;
    for n in 0..=g.n {
        let f = pair.phi.value(n) * inv_big_r;
        for v in &mut c.data_mut()[n * n..(n + 1) * (n + 1)] {
            *v *= f;
        }
    }
    Ok(synthesize(&c, points))
}

/// Spectral multipliers of the cap-restricted wavelet transform.
///
/// Integrating `Ψ̃_N(x,·)Y_{n,k}` over `C_r(x,ρ)` only reproduces `Y_{n,k}(x)`
/// times `λ_n = Ψ̃^∧(n) − (2n+1)^{-1} Σ_m P^ρ_{nm} Ψ̃^∧(m)`. The values are
/// needed up to the degree of the data, which may exceed `kN`.
pub fn cap_multipliers(psi: &SymbolSet, rho: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(rho > 0.0 && rho <= 2.0) {
        return Err(Error::OutOfRange(format!("cap radius {rho} not in (0, 2]")));
    }
    let dim = n_max.max(psi.n_max()) + 1;
    let mut lambda: Vec<f64> = (0..=n_max).map(|n| psi.value(n)).collect();
    if rho >= 2.0 {
        return Ok(lambda);
    }
    let gram = scalar_gram_on(dim - 1, -1.0, 1.0 - rho)?;
    for (n, l) in lambda.iter_mut().enumerate() {
        let s: f64 = (0..=psi.n_max()).map(|m| gram[(n, m)] * psi.value(m)).sum();
        *l -= s / (2 * n + 1) as f64;
    }
    Ok(lambda)
}

/// `W̃_N[F₂]` in coefficient space on the inner sphere.
pub fn wavelet_transform_spectral(pair: &KernelPair, f2: &HarmonicCoefficients, rho: f64) -> Result<HarmonicCoefficients> {
    let lambda = cap_multipliers(&pair.psi_tilde, rho, f2.n_max)?;
    Ok(apply_symbols(f2, &lambda, pair.geometry.r))
}

/// The zonal profile of `Ψ̃_N` including its `1/r²` factor.
pub fn wavelet_profile(pair: &KernelPair) -> impl Fn(f64) -> f64 + Sync + '_ {
    let inv_r2 = 1.0 / (pair.geometry.r * pair.geometry.r);
    let c: Vec<f64> = pair
        .psi_tilde
        .values()
        .iter()
        .enumerate()
        .map(|(n, v)| (2 * n + 1) as f64 / FOUR_PI * v * inv_r2)
        .collect();
    move |t| legendre_series(&c, t.clamp(-1.0, 1.0))
}

/// `W̃_N[F₂](x) = ∫_{C_r(x,ρ)} Ψ̃_N(x,y) F₂(y) dω(y)` by cap quadrature, at
/// each point of `points` (all inside `Γ̃_r`).
pub fn wavelet_transform_local(
    pair: &KernelPair,
    f2: &HarmonicCoefficients,
    points: &[Direction],
    region: &RegionSpec,
) -> Result<Vec<f64>> {
    let g = &pair.geometry;
    check_radius(g.r, f2.radius, "ground data")?;
    if let Some(p) = points.iter().find(|p| !region.in_eval_region(p)) {
        return Err(Error::OutsideRegion(format!("{p:?} is not in the evaluation cap")));
    }
    let rule = CapRule::new(region.kernel_rho, g.kn + f2.n_max)?;
    let kernel = wavelet_profile(pair);
    points
        .par_iter()
        .map(|p| {
            let xi = p.normalize();
            let cap = rule.place(&xi, g.r)?;
            let values = synthesize(f2, &cap.nodes);
            Ok(cap
                .nodes
                .iter()
                .zip(&cap.weights)
                .zip(&values)
                .map(|((eta, w), f)| w * kernel(xi.dot(eta)) * f)
                .sum())
        })
        .collect()
}

/// `U_N^ε = T_N[F₁] + W̃_N[F₂]` by quadrature at `points`.
pub fn approximate(
    pair: &KernelPair,
    grid: &SphereGrid,
    f1_samples: &[f64],
    f1_degree: usize,
    f2: &HarmonicCoefficients,
    region: &RegionSpec,
    points: &[Direction],
) -> Result<Vec<f64>> {
    let t = scaling_transform(pair, grid, f1_samples, f1_degree, points)?;
    let w = wavelet_transform_local(pair, f2, points, region)?;
    Ok(t.iter().zip(&w).map(|(a, b)| a + b).collect())
}

/// `U_N^ε` in coefficient space on the inner sphere.
pub fn approximate_spectral(
    pair: &KernelPair,
    f1: &HarmonicCoefficients,
    f2: &HarmonicCoefficients,
    kernel_rho: f64,
) -> Result<HarmonicCoefficients> {
    let t = scaling_transform_spectral(pair, f1);
    let w = wavelet_transform_spectral(pair, f2, kernel_rho)?;
    Ok(add_coefficients(&t, &w))
}

/// Sum on the larger degree range; radius taken from `a`.
pub fn add_coefficients(a: &HarmonicCoefficients, b: &HarmonicCoefficients) -> HarmonicCoefficients {
    let n_max = a.n_max.max(b.n_max);
    let mut out = a.with_n_max(n_max);
    for (o, v) in out.data_mut().iter_mut().zip(b.data()) {
        *o += v;
    }
    out
}

/// `a + s·b` on the larger degree range.
pub fn axpy(a: &HarmonicCoefficients, s: f64, b: &HarmonicCoefficients) -> HarmonicCoefficients {
    let n_max = a.n_max.max(b.n_max);
    let mut out = a.with_n_max(n_max);
    for (o, v) in out.data_mut().iter_mut().zip(b.data()) {
        *o += s * v;
    }
    out
}

/// I.i.d. standard normal coefficients up to `degree`, drawn in flat order from
/// the ChaCha20 stream `stream` of `seed`.
pub fn gaussian_coefficients(radius: f64, degree: usize, seed: u64, stream: u64) -> Result<HarmonicCoefficients> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let data = (0..num_coeffs(degree)).map(|_| StandardNormal.sample(&mut rng)).collect();
    HarmonicCoefficients::from_vec(radius, degree, data)
}

/// Stream ids for the two noise fields.
pub const SATELLITE_STREAM: u64 = 1;
pub const GROUND_STREAM: u64 = 2;

/// The unit-level noise `E`, rescaled so that its norm over `region` equals
/// the norm of `signal` there.
pub fn scaled_noise(signal: &HarmonicCoefficients, noise_degree: usize, seed: u64, region: NormRegion) -> Result<HarmonicCoefficients> {
    let stream = match region {
        NormRegion::Sphere => SATELLITE_STREAM,
        NormRegion::Cap(_) => GROUND_STREAM,
    };
    let raw = gaussian_coefficients(signal.radius, noise_degree, seed, stream)?;
    let (e_norm, f_norm) = match region {
        NormRegion::Sphere => (raw.l2_norm(), signal.l2_norm()),
        NormRegion::Cap(grid) => {
            check_radius(signal.radius, grid.radius, "noise cap")?;
            check_exact(grid.exact_degree, 2 * noise_degree.max(signal.n_max))?;
            let e = synthesize(&raw, &grid.nodes);
            let f = synthesize(signal, &grid.nodes);
            (grid.l2_norm(&e), grid.l2_norm(&f))
        }
    };
    if !(e_norm > 0.0) {
        return Err(Error::Degenerate("noise realization vanishes on its region".into()));
    }
    Ok(raw.scale_degrees(|_| f_norm / e_norm))
}

/// `F + ε·E` with `ε = epsilon1` on the sphere and `epsilon2` on a cap.
pub fn add_noise(signal: &HarmonicCoefficients, spec: &NoiseSpec, region: NormRegion) -> Result<HarmonicCoefficients> {
    let eps = match region {
        NormRegion::Sphere => spec.epsilon1,
        NormRegion::Cap(_) => spec.epsilon2,
    };
    if eps == 0.0 {
        return Ok(signal.clone());
    }
    let e = scaled_noise(signal, spec.noise_degree, spec.seed, region)?;
    Ok(axpy(signal, eps, &e))
}

/// `‖approx − ref‖ / ‖ref‖` over a cap grid from samples at its nodes.
pub fn relative_error(reference: &[f64], approx: &[f64], grid: &CapGrid) -> Result<f64> {
    if reference.len() != grid.nodes.len() || approx.len() != grid.nodes.len() {
        return Err(Error::DimensionMismatch("samples do not match the grid".into()));
    }
    let den = grid.l2_norm(reference);
    if !(den > 0.0) {
        return Err(Error::Degenerate("reference field vanishes on the region".into()));
    }
    let diff: Vec<f64> = reference.iter().zip(approx).map(|(a, b)| a - b).collect();
    Ok(grid.l2_norm(&diff) / den)
}

/// [`relative_error`] for two coefficient sets evaluated on the grid.
pub fn relative_error_fields(reference: &HarmonicCoefficients, approx: &HarmonicCoefficients, grid: &CapGrid) -> Result<f64> {
    relative_error(&synthesize(reference, &grid.nodes), &synthesize(approx, &grid.nodes), grid)
}

/// `∫ f_a f_b dω` over a grid for a list of fields, as a dense matrix.
///
/// Used to evaluate many error norms of linear combinations of the same
/// fields without re-synthesizing them.
pub fn field_gram(fields: &[&HarmonicCoefficients], grid: &CapGrid) -> DMatrix<f64> {
    let n_max = fields.iter().map(|f| f.n_max).max().unwrap_or(0);
    let len = num_coeffs(n_max);
    let k = fields.len();
    let partials: Vec<DMatrix<f64>> = grid
        .nodes
        .par_chunks(64)
        .zip(grid.weights.par_chunks(64))
        .map(|(ns, ws)| {
            let mut acc = DMatrix::<f64>::zeros(k, k);
            let mut y = vec![0.0; len];
            let mut vals = vec![0.0; k];
            for (p, &w) in ns.iter().zip(ws) {
                eval_harmonics(n_max, p, &mut y);
                for (v, f) in vals.iter_mut().zip(fields) {
                    *v = dot(&y[..num_coeffs(f.n_max)], f.data()) / f.radius;
                }
                for a in 0..k {
                    for b in a..k {
                        acc[(a, b)] += w * vals[a] * vals[b];
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::sphere_grid;
    use crate::kernels::{gram_scalar, optimize, shannon_pair, Geometry, PenaltyWeights};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_coeffs(rng: &mut ChaCha8Rng, radius: f64, n_max: usize) -> HarmonicCoefficients {
        HarmonicCoefficients::from_vec(radius, n_max, (0..num_coeffs(n_max)).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn geo(n: usize, kn: usize, rho: f64) -> Geometry {
        Geometry::with_kn(1.0, 1.15, n, kn, rho, FieldKind::Scalar).unwrap()
    }

    #[test]
    fn upward_examples() {
        let mut c = HarmonicCoefficients::zeros(6371.2, 10).unwrap();
        c.set(0, 1, 2.0).unwrap();
        c.set(10, 4, 1.0).unwrap();
        let up = upward_continue(&c, 7071.2).unwrap();
        assert_eq!(up.get(0, 1), 2.0);
        assert_relative_eq!(up.get(10, 4), (6371.2f64 / 7071.2).powi(10), epsilon = 1e-15);
        assert!((up.get(10, 4) - 0.3524).abs() < 1e-3);
        assert_eq!(up.radius, 7071.2);
        let down: Vec<f64> = (0..=10).map(|n| (7071.2f64 / 6371.2).powi(n)).collect();
        let back = apply_symbols(&up, &down, 6371.2);
        for (a, b) in back.data().iter().zip(c.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(upward_continue(&c, 6000.0).is_err());
    }

    #[test]
    fn region_erosion_keeps_caps_inside() {
        let c = Direction::new(0.3, -0.1, 0.9).normalize();
        let region = RegionSpec::new(c, 0.6, 0.5).unwrap();
        let eval = region.eval_grid(1.0, 6).unwrap();
        let probe = CapRule::new(0.5, 6).unwrap();
        for x in &eval.nodes {
            assert!(region.in_eval_region(x));
            for y in probe.place(x, 1.0).unwrap().nodes {
                assert!(1.0 - c.dot(&y) < 0.6);
            }
        }
        assert!(RegionSpec::new(c, 0.4, 0.5).is_err());
        let whole = RegionSpec::new(c, 2.0, 2.0).unwrap();
        assert_eq!(whole.eval_rho(), 2.0);
    }

    #[test]
    fn scaling_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = geo(20, 26, 0.5);
        let w = PenaltyWeights::constant(&g, 1.0, 1.0, 0.1).unwrap();
        let pair = optimize(&g, &w, None).unwrap();
        let f1 = random_coeffs(&mut rng, g.big_r, 20);
        let grid = sphere_grid(g.big_r, 40).unwrap();
        let samples = synthesize(&f1, &grid.nodes);
        let pts: Vec<Direction> = (0..15).map(|i| Direction::new((i as f64).sin(), (i as f64 * 0.7).cos(), 0.3).normalize()).collect();
        let quad = scaling_transform(&pair, &grid, &samples, 20, &pts).unwrap();
        let spec = synthesize(&scaling_transform_spectral(&pair, &f1), &pts);
        for (a, b) in quad.iter().zip(&spec) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
        let zero = KernelPair::zero(g);
        assert!(scaling_transform(&zero, &grid, &samples, 20, &pts).unwrap().iter().all(|v| *v == 0.0));
        assert!(matches!(
            scaling_transform(&pair, &grid, &samples, 21, &pts),
            Err(Error::InsufficientExactness { .. })
        ));
    }

    #[test]
    fn shannon_scaling_recovers_low_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = geo(12, 16, 0.5);
        let u = random_coeffs(&mut rng, g.r, 12);
        let f1 = upward_continue(&u, g.big_r).unwrap();
        let grid = sphere_grid(g.big_r, 24).unwrap();
        let samples = synthesize(&f1, &grid.nodes);
        let region = RegionSpec::with_default_data(Direction::z(), 0.5).unwrap();
        let eval = region.eval_grid(g.r, 6).unwrap();
        let got = scaling_transform(&shannon_pair(&g), &grid, &samples, 12, &eval.nodes).unwrap();
        let want = synthesize(&u, &eval.nodes);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn wavelet_cap_quadrature_matches_multipliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = geo(8, 12, 0.4);
        let w = PenaltyWeights::constant(&g, 2.0, 5.0, 0.1).unwrap();
        let pair = optimize(&g, &w, None).unwrap();
        let f2 = random_coeffs(&mut rng, g.r, 15);
        let region = RegionSpec::new(Direction::new(1.0, 1.0, 0.0), 1.0, 0.4).unwrap();
        let pts = region.eval_grid(g.r, 2).unwrap().nodes;
        let quad = wavelet_transform_local(&pair, &f2, &pts, &region).unwrap();
        let spec = synthesize(&wavelet_transform_spectral(&pair, &f2, 0.4).unwrap(), &pts);
        for (a, b) in quad.iter().zip(&spec) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{a} {b}");
        }
    }

    #[test]
    fn wavelet_full_sphere_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = geo(6, 9, 2.0);
        let pair = KernelPair::new(
            g,
            SymbolSet::new((0..=6).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap(),
            SymbolSet::new((0..=9).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap(),
        )
        .unwrap();
        let f2 = random_coeffs(&mut rng, g.r, 10);
        let region = RegionSpec::new(Direction::z(), 2.0, 2.0).unwrap();
        let pts = vec![Direction::new(0.2, 0.5, -0.7), Direction::x()];
        let quad = wavelet_transform_local(&pair, &f2, &pts, &region).unwrap();
        let full = synthesize(&apply_symbols(&f2, pair.psi_tilde.values(), g.r), &pts);
        for (a, b) in quad.iter().zip(&full) {
            assert!((a - b).abs() < 1e-9);
        }
        let zero = KernelPair::zero(g);
        assert!(wavelet_transform_local(&zero, &f2, &pts, &region).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn wavelet_rejects_points_outside() {
        let g = geo(4, 6, 0.3);
        let region = RegionSpec::new(Direction::z(), 0.5, 0.3).unwrap();
        let f2 = HarmonicCoefficients::zeros(1.0, 2).unwrap();
        let r = wavelet_transform_local(&shannon_pair(&g), &f2, &[-Direction::z()], &region);
        assert!(matches!(r, Err(Error::OutsideRegion(_))));
    }

    #[test]
    fn leakage_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let rho = rng.gen_range(0.05..1.5);
            let g = geo(5, 8, rho);
            let pair = KernelPair::new(
                g,
                SymbolSet::new((0..=5).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap(),
                SymbolSet::new((0..=8).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap(),
            )
            .unwrap();
            let f2 = random_coeffs(&mut rng, g.r, 8);
            let x = Direction::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
            let cap = synthesize(&wavelet_transform_spectral(&pair, &f2, rho).unwrap(), &[x])[0];
            let full = synthesize(&apply_symbols(&f2, pair.psi_tilde.values(), g.r), &[x])[0];
            let gram = gram_scalar(8, rho).unwrap();
            let psi_norm = (gram.quadratic_form(pair.psi_tilde.values()) / (8.0 * std::f64::consts::PI.powi(2) * g.r.powi(4))).sqrt();
            let bound = (2.0 * std::f64::consts::PI).sqrt() * g.r * psi_norm * f2.l2_norm();
            assert!((cap - full).abs() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn noise_scaling_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_coeffs(&mut rng, 2.0, 10);
        let spec = NoiseSpec::new(0.1, 0.2, 14, 77).unwrap();
        assert_eq!(add_noise(&f, &NoiseSpec { epsilon1: 0.0, ..spec }, NormRegion::Sphere).unwrap(), f);
        let e = scaled_noise(&f, 14, 77, NormRegion::Sphere).unwrap();
        assert_relative_eq!(e.l2_norm(), f.l2_norm(), max_relative = 1e-10);
        let cap = cap_grid(2.0, &Direction::new(0.0, 1.0, 1.0), 0.6, 28).unwrap();
        let e2 = scaled_noise(&f, 14, 77, NormRegion::Cap(&cap)).unwrap();
        let n_e = cap.l2_norm(&synthesize(&e2, &cap.nodes));
        let n_f = cap.l2_norm(&synthesize(&f, &cap.nodes));
        assert_relative_eq!(n_e, n_f, max_relative = 1e-10);
        let a = add_noise(&f, &spec, NormRegion::Sphere).unwrap();
        let b = add_noise(&f, &spec, NormRegion::Sphere).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(e.data()[..4], e2.data()[..4]);
    }

    #[test]
    fn relative_error_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_coeffs(&mut rng, 1.0, 6);
        let grid = cap_grid(1.0, &Direction::z(), 0.3, 12).unwrap();
        let v = synthesize(&f, &grid.nodes);
        assert_eq!(relative_error(&v, &v, &grid).unwrap(), 0.0);
        assert_relative_eq!(relative_error(&v, &vec![0.0; v.len()], &grid).unwrap(), 1.0, epsilon = 1e-15);
        let scaled: Vec<f64> = v.iter().map(|x| 1.1 * x).collect();
        assert_relative_eq!(relative_error(&v, &scaled, &grid).unwrap(), 0.1, max_relative = 1e-12);
        assert!(relative_error(&vec![0.0; v.len()], &v, &grid).is_err());
    }

    #[test]
    fn field_gram_matches_direct_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_coeffs(&mut rng, 1.0, 5);
        let b = random_coeffs(&mut rng, 1.0, 8);
        let grid = cap_grid(1.0, &Direction::x(), 0.4, 16).unwrap();
        let gm = field_gram(&[&a, &b], &grid);
        let va = synthesize(&a, &grid.nodes);
        let vb = synthesize(&b, &grid.nodes);
        let ab: f64 = grid.weights.iter().zip(va.iter().zip(&vb)).map(|(w, (x, y))| w * x * y).sum();
        assert_relative_eq!(gm[(0, 1)], ab, max_relative = 1e-12);
        assert_relative_eq!(gm[(0, 0)].sqrt(), grid.l2_norm(&va), max_relative = 1e-12);
    }
}
