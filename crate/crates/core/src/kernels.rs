//! Kernel symbols, Gram matrices on truncated intervals, the penalty functional
//! and its minimizer, and the Shannon/TSVD/filtered references.
//!
//! A zonal kernel with symbols `K^∧(n)` has the 1-D profile
//! `K(t) = Σ (2n+1)/(4π) K^∧(n) P_n(t)`; radius factors are applied by callers.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::legendre::{fill_values, fill_with_derivatives, gauss_rule, legendre_series};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;
const EIGHT_PI2: f64 = 8.0 * std::f64::consts::PI * std::f64::consts::PI;

/// Scalar potentials or gradient (vector) fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Scalar,
    Vector,
}

impl FieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Scalar => "scalar",
            FieldKind::Vector => "vector",
        }
    }
}

impl std::str::FromStr for FieldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar" => Ok(FieldKind::Scalar),
            "vector" => Ok(FieldKind::Vector),
            other => Err(Error::Config(format!("unknown field kind {other:?}"))),
        }
    }
}

/// Radii, degrees and wavelet cap radius of one approximation problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geometry {
    /// Inner radius.
    pub r: f64,
    /// Outer radius.
    pub big_r: f64,
    pub n: usize,
    pub kappa: f64,
    pub kn: usize,
    pub rho: f64,
    pub kind: FieldKind,
}

impl Geometry {
    /// `kn = ⌊kappa·n⌋`.
    pub fn new(r: f64, big_r: f64, n: usize, kappa: f64, rho: f64, kind: FieldKind) -> Result<Self> {
        if !(kappa > 1.0 && kappa.is_finite()) {
            return Err(Error::OutOfRange(format!("kappa {kappa} must exceed 1")));
        }
        let kn = (kappa * n as f64).floor() as usize;
        Self::build(r, big_r, n, kappa, kn, rho, kind)
    }

    /// Picks `kappa = (kn + ½)/n` so that `⌊kappa·n⌋ = kn`.
    pub fn with_kn(r: f64, big_r: f64, n: usize, kn: usize, rho: f64, kind: FieldKind) -> Result<Self> {
        if n == 0 {
            return Err(Error::OutOfRange("N must be positive".into()));
        }
        let kappa = (kn as f64 + 0.5) / n as f64;
        Self::build(r, big_r, n, kappa, kn, rho, kind)
    }

    fn build(r: f64, big_r: f64, n: usize, kappa: f64, kn: usize, rho: f64, kind: FieldKind) -> Result<Self> {
        if !(r > 0.0 && r < big_r && big_r.is_finite()) {
            return Err(Error::OutOfRange(format!("need 0 < r < R, got r={r}, R={big_r}")));
        }
        if kn <= n {
            return Err(Error::OutOfRange(format!("kN={kn} must exceed N={n}")));
        }
        if !(rho > 0.0 && rho <= 2.0) {
            return Err(Error::OutOfRange(format!("cap radius {rho} not in (0, 2]")));
        }
        Ok(Geometry { r, big_r, n, kappa, kn, rho, kind })
    }

    /// Same geometry with another cap radius.
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Self::build(self.r, self.big_r, self.n, self.kappa, self.kn, rho, self.kind)
    }

    /// `(r/R)^n` for scalar fields, `(r/R)^{n+1}` for gradient fields.
    pub fn sigma(&self, n: usize) -> f64 {
        sigma(self.r / self.big_r, n, self.kind)
    }
}

pub(crate) fn sigma(ratio: f64, n: usize, kind: FieldKind) -> f64 {
    match kind {
        FieldKind::Scalar => ratio.powi(n as i32),
        FieldKind::Vector => ratio.powi(n as i32 + 1),
    }
}

/// Degree-indexed kernel symbols `value(n)`, `n = 0..=n_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolSet {
    values: Vec<f64>,
}

impl SymbolSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Degenerate("symbol set needs at least degree 0".into()));
        }
        if let Some(n) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!("symbol of degree {n} is not finite")));
        }
        Ok(SymbolSet { values })
    }

    pub fn constant(n_max: usize, value: f64) -> Self {
        SymbolSet { values: vec![value; n_max + 1] }
    }

    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    /// Zero beyond `n_max`.
    pub fn value(&self, n: usize) -> f64 {
        self.values.get(n).copied().unwrap_or(0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Coupled scaling and wavelet symbols for one geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelPair {
    pub geometry: Geometry,
    pub phi: SymbolSet,
    pub phi_tilde: SymbolSet,
    pub psi_tilde: SymbolSet,
}

impl KernelPair {
    /// Builds the pair and derives `Ψ̃^∧(n) = Φ̃^∧(n) − Φ^∧(n)σ_n`.
    pub fn new(geometry: Geometry, phi: SymbolSet, phi_tilde: SymbolSet) -> Result<Self> {
        if phi.n_max() != geometry.n || phi_tilde.n_max() != geometry.kn {
            return Err(Error::DimensionMismatch(format!(
                "phi to degree {} and phi_tilde to degree {}, geometry wants {} and {}",
                phi.n_max(),
                phi_tilde.n_max(),
                geometry.n,
                geometry.kn
            )));
        }
        let psi = (0..=geometry.kn)
            .map(|n| phi_tilde.value(n) - phi.value(n) * geometry.sigma(n))
            .collect();
        Ok(KernelPair { geometry, phi, phi_tilde, psi_tilde: SymbolSet::new(psi)? })
    }

    /// Largest deviation from the coupling identity.
    pub fn coupling_residual(&self) -> f64 {
        (0..=self.geometry.kn)
            .map(|n| {
                let expect = self.phi_tilde.value(n) - self.phi.value(n) * self.geometry.sigma(n);
                (self.psi_tilde.value(n) - expect).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `Φ^∧(n)·σ_n` for `n ≤ N`.
    pub fn phi_sigma(&self) -> Vec<f64> {
        (0..=self.geometry.n).map(|n| self.phi.value(n) * self.geometry.sigma(n)).collect()
    }

    pub fn zero(geometry: Geometry) -> Self {
        KernelPair::new(geometry, SymbolSet::constant(geometry.n, 0.0), SymbolSet::constant(geometry.kn, 0.0))
            .expect("consistent dimensions")
    }
}

/// Positive penalty weights of the functional.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyWeights {
    pub alpha: Vec<f64>,
    pub alpha_tilde: Vec<f64>,
    pub beta: f64,
}

impl PenaltyWeights {
    pub fn new(alpha: Vec<f64>, alpha_tilde: Vec<f64>, beta: f64) -> Result<Self> {
        let bad = |v: f64| !(v > 0.0 && v.is_finite());
        if bad(beta) || alpha.iter().any(|&a| bad(a)) || alpha_tilde.iter().any(|&a| bad(a)) {
            return Err(Error::OutOfRange("penalty weights must be positive and finite".into()));
        }
        Ok(PenaltyWeights { alpha, alpha_tilde, beta })
    }

    /// Degree-independent weights sized for `geometry`.
    pub fn constant(geometry: &Geometry, alpha: f64, alpha_tilde: f64, beta: f64) -> Result<Self> {
        Self::new(vec![alpha; geometry.n + 1], vec![alpha_tilde; geometry.kn + 1], beta)
    }

    /// `α = α̃ = N^{2(1+δ)}·[β·Σ_{n≤N} σ_n^{-2} + (kN+1)²]`, the growth pattern
    /// under which the optimized wavelet concentrates inside the cap as `N` grows.
    pub fn localizing(geometry: &Geometry, beta: f64, delta: f64) -> Result<Self> {
        let bound = shannon_bound(geometry, beta);
        let a = (geometry.n as f64).powf(2.0 * (1.0 + delta)) * bound;
        Self::constant(geometry, a, a, beta)
    }

    fn check(&self, geometry: &Geometry) -> Result<()> {
        if self.alpha.len() != geometry.n + 1 || self.alpha_tilde.len() != geometry.kn + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} alpha and {} alpha_tilde weights for N={}, kN={}",
                self.alpha.len(),
                self.alpha_tilde.len(),
                geometry.n,
                geometry.kn
            )));
        }
        Ok(())
    }
}

/// Symmetric Gram matrix of the wavelet energy outside the cap.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub n_max: usize,
    pub rho: f64,
    pub kind: FieldKind,
    pub entries: DMatrix<f64>,
}

impl GramMatrix {
    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.entries[(n, m)]
    }

    /// `ψᵀ G ψ`, symbols beyond `n_max` ignored.
    pub fn quadratic_form(&self, psi: &[f64]) -> f64 {
        let len = psi.len().min(self.n_max + 1);
        let mut s = 0.0;
        for n in 0..len {
            let mut row = 0.0;
            for m in 0..len {
                row += self.entries[(n, m)] * psi[m];
            }
            s += psi[n] * row;
        }
        s
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 2.0) {
        return Err(Error::OutOfRange(format!("Gram cap radius {rho} not in (0, 2)")));
    }
    Ok(())
}

/// `P^ρ_{nm} = (2n+1)(2m+1)/2 · ∫_{−1}^{1−ρ} P_n P_m dt`.
pub fn gram_scalar(n_max: usize, rho: f64) -> Result<GramMatrix> {
    check_rho(rho)?;
    Ok(GramMatrix { n_max, rho, kind: FieldKind::Scalar, entries: scalar_gram_on(n_max, -1.0, 1.0 - rho)? })
}

/// Gram of `8π²r⁴‖Ψ̃‖²_{L²([−1,1−ρ])}` for tensor kernels built from type-1 and
/// type-2 vector harmonics.
///
/// Entries carry the prefactor `(2n+1)(2m+1)/2`, the same as the scalar Gram, so
/// that `ψᵀGψ` is the functional's last term. [`gram_vector_unscaled`] gives
/// the same matrix divided by `8π²`, i.e. the form of `r⁴‖Ψ̃‖²`.
pub fn gram_vector(n_max: usize, rho: f64) -> Result<GramMatrix> {
    check_rho(rho)?;
    Ok(GramMatrix { n_max, rho, kind: FieldKind::Vector, entries: vector_gram_on(n_max, -1.0, 1.0 - rho)? })
}

/// Vector Gram with prefactor `(2n+1)(2m+1)/(16π²)`.
pub fn gram_vector_unscaled(n_max: usize, rho: f64) -> Result<GramMatrix> {
    let mut g = gram_vector(n_max, rho)?;
    g.entries /= EIGHT_PI2;
    Ok(g)
}

/// Gram for either field kind.
pub fn gram(kind: FieldKind, n_max: usize, rho: f64) -> Result<GramMatrix> {
    match kind {
        FieldKind::Scalar => gram_scalar(n_max, rho),
        FieldKind::Vector => gram_vector(n_max, rho),
    }
}

pub(crate) fn scalar_gram_on(n_max: usize, a: f64, b: f64) -> Result<DMatrix<f64>> {
    let rule = gauss_rule(n_max + 1, a, b)?;
    let dim = n_max + 1;
    let mut basis = DMatrix::<f64>::zeros(rule.len(), dim);
    let mut p = vec![0.0; dim];
    for (j, (&t, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        fill_values(t, &mut p);
        let sw = w.sqrt();
        for n in 0..dim {
            basis[(j, n)] = sw * (2 * n + 1) as f64 / std::f64::consts::SQRT_2 * p[n];
        }
    }
    Ok(symmetrize(basis.transpose() * &basis))
}

pub(crate) fn vector_gram_on(n_max: usize, a: f64, b: f64) -> Result<DMatrix<f64>> {
    let rule = gauss_rule(n_max + 3, a, b)?;
    let dim = n_max + 1;
    let mut out = DMatrix::<f64>::zeros(dim, dim);
    let (mut p, mut d1, mut d2) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut fp = vec![0.0; dim];
    let mut f1 = vec![0.0; dim];
    let mut f2 = vec![0.0; dim];
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        fill_with_derivatives(t, &mut p, &mut d1, &mut d2);
        let q = 1.0 - t * t;
        for n in 0..dim {
            let c = (2 * n + 1) as f64;
            fp[n] = c * p[n];
            let cn = if n == 0 { 0.0 } else { c / (n * (n + 1)) as f64 };
            f1[n] = cn * d1[n];
            f2[n] = cn * d2[n];
        }
        for n in 0..dim {
            for m in n..dim {
                let v = fp[n] * fp[m]
                    + (1.0 + t * t) * f1[n] * f1[m]
                    + q * q * f2[n] * f2[m]
                    - t * q * (f2[n] * f1[m] + f1[n] * f2[m]);
                out[(n, m)] += 0.5 * w * v;
            }
        }
    }
    for n in 0..dim {
        for m in 0..n {
            out[(n, m)] = out[(m, n)];
        }
    }
    Ok(out)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// The penalty functional at `pair` with optional targets replacing the ones.
pub fn functional_value(pair: &KernelPair, w: &PenaltyWeights, gram: &GramMatrix, targets: Option<&SymbolSet>) -> Result<f64> {
    let g = &pair.geometry;
    w.check(g)?;
    check_gram(g, gram)?;
    let target = |n: usize| targets.map_or(1.0, |t| t.value(n));
    let mut f = 0.0;
    for n in 0..=g.kn {
        f += w.alpha_tilde[n] * (target(n) - pair.phi_tilde.value(n)).powi(2);
    }
    for n in 0..=g.n {
        let ps = pair.phi.value(n) * g.sigma(n);
        f += w.alpha[n] * (target(n) - ps).powi(2) + w.beta * pair.phi.value(n).powi(2);
    }
    Ok(f + gram.quadratic_form(pair.psi_tilde.values()))
}

/// Gradient of the functional with respect to the unknowns
/// `(Φ^∧(n)σ_n)_{n≤N}` followed by `(Φ̃^∧(n))_{n≤kN}`.
pub fn functional_gradient(pair: &KernelPair, w: &PenaltyWeights, gram: &GramMatrix, targets: Option<&SymbolSet>) -> Result<Vec<f64>> {
    let g = &pair.geometry;
    w.check(g)?;
    check_gram(g, gram)?;
    let target = |n: usize| targets.map_or(1.0, |t| t.value(n));
    let psi = pair.psi_tilde.values();
    let gpsi: Vec<f64> = (0..=g.kn)
        .map(|n| (0..=g.kn).map(|m| gram.get(n, m) * psi[m]).sum())
        .collect();
    let mut grad = Vec::with_capacity(g.n + g.kn + 2);
    for n in 0..=g.n {
        let s = g.sigma(n);
        let x = pair.phi.value(n) * s;
        grad.push(-2.0 * w.alpha[n] * (target(n) - x) + 2.0 * w.beta * x / (s * s) - 2.0 * gpsi[n]);
    }
    for n in 0..=g.kn {
        grad.push(-2.0 * w.alpha_tilde[n] * (target(n) - pair.phi_tilde.value(n)) + 2.0 * gpsi[n]);
    }
    Ok(grad)
}

fn check_gram(g: &Geometry, gram: &GramMatrix) -> Result<()> {
    if gram.n_max < g.kn || gram.kind != g.kind {
        return Err(Error::DimensionMismatch(format!(
            "{} Gram of degree {} for a {} problem with kN={}",
            gram.kind.as_str(),
            gram.n_max,
            g.kind.as_str(),
            g.kn
        )));
    }
    Ok(())
}

/// Assembled system `M·(x, y) = rhs` of the minimization problem.
pub struct LinearSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

/// Builds `M = [[D₁+P₁, −P₂], [−P₃, D₂+P₄]]` and `(α·target, α̃·target)`.
pub fn assemble_system(g: &Geometry, w: &PenaltyWeights, gram: &GramMatrix, targets: Option<&SymbolSet>) -> Result<LinearSystem> {
    w.check(g)?;
    check_gram(g, gram)?;
    if let Some(t) = targets {
        if t.n_max() < g.kn {
            return Err(Error::DimensionMismatch(format!("targets to degree {}, need {}", t.n_max(), g.kn)));
        }
    }
    let target = |n: usize| targets.map_or(1.0, |t| t.value(n));
    let nx = g.n + 1;
    let ny = g.kn + 1;
    let mut m = DMatrix::<f64>::zeros(nx + ny, nx + ny);
    let mut rhs = DVector::<f64>::zeros(nx + ny);
    for i in 0..nx {
        let s = g.sigma(i);
        m[(i, i)] += w.beta / (s * s) + w.alpha[i];
        for j in 0..nx {
            m[(i, j)] += gram.get(i, j);
        }
        for j in 0..ny {
            m[(i, nx + j)] -= gram.get(i, j);
            m[(nx + j, i)] -= gram.get(j, i);
        }
        rhs[i] = w.alpha[i] * target(i);
    }
    for i in 0..ny {
        m[(nx + i, nx + i)] += w.alpha_tilde[i];
        for j in 0..ny {
            m[(nx + i, nx + j)] += gram.get(i, j);
        }
        rhs[nx + i] = w.alpha_tilde[i] * target(i);
    }
    Ok(LinearSystem { matrix: m, rhs })
}

/// Cholesky solve with symmetric diagonal scaling and two refinement steps.
pub fn solve_spd(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let dim = matrix.nrows();
    let mut scale = DVector::<f64>::zeros(dim);
    for i in 0..dim {
        let d = matrix[(i, i)];
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Singular(format!("non-positive diagonal entry {d} at row {i}")));
        }
        scale[i] = 1.0 / d.sqrt();
    }
    let scaled = DMatrix::from_fn(dim, dim, |i, j| matrix[(i, j)] * scale[i] * scale[j]);
    let chol = scaled
        .cholesky()
        .ok_or_else(|| Error::Singular("system matrix is not numerically positive definite".into()))?;
    let solve = |b: &DVector<f64>| -> DVector<f64> {
        let bs = b.component_mul(&scale);
        chol.solve(&bs).component_mul(&scale)
    };
    let mut x = solve(rhs);
    for _ in 0..2 {
        let residual = rhs - matrix * &x;
        x += solve(&residual);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("solution is not finite".into()));
    }
    Ok(x)
}

/// LU solve of the same system with unknowns in reversed order; used to check
/// that the minimizer does not depend on the factorization.
pub fn solve_permuted(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let dim = matrix.nrows();
    let rev = |i: usize| dim - 1 - i;
    let pm = DMatrix::from_fn(dim, dim, |i, j| matrix[(rev(i), rev(j))]);
    let pb = DVector::from_fn(dim, |i, _| rhs[rev(i)]);
    let y = pm.lu().solve(&pb).ok_or_else(|| Error::Singular("LU solve failed".into()))?;
    Ok(DVector::from_fn(dim, |i, _| y[rev(i)]))
}

fn pair_from_solution(g: &Geometry, x: &DVector<f64>) -> Result<KernelPair> {
    let nx = g.n + 1;
    let phi = (0..nx).map(|n| x[n] / g.sigma(n)).collect();
    let phi_tilde = (0..=g.kn).map(|n| x[nx + n]).collect();
    KernelPair::new(*g, SymbolSet::new(phi)?, SymbolSet::new(phi_tilde)?)
}

/// Unique minimizer of the functional for `geometry` (scalar or vector).
pub fn optimize(geometry: &Geometry, w: &PenaltyWeights, targets: Option<&SymbolSet>) -> Result<KernelPair> {
    let gram = gram(geometry.kind, geometry.kn, geometry.rho)?;
    optimize_with_gram(geometry, w, targets, &gram)
}

/// As [`optimize`] with a precomputed Gram matrix of degree `≥ kN`.
pub fn optimize_with_gram(geometry: &Geometry, w: &PenaltyWeights, targets: Option<&SymbolSet>, gram: &GramMatrix) -> Result<KernelPair> {
    let sys = assemble_system(geometry, w, gram, targets)?;
    let x = solve_spd(&sys.matrix, &sys.rhs)?;
    pair_from_solution(geometry, &x)
}

/// Minimizer computed through [`solve_permuted`].
pub fn optimize_permuted(geometry: &Geometry, w: &PenaltyWeights, targets: Option<&SymbolSet>, gram: &GramMatrix) -> Result<KernelPair> {
    let sys = assemble_system(geometry, w, gram, targets)?;
    let x = solve_permuted(&sys.matrix, &sys.rhs)?;
    pair_from_solution(geometry, &x)
}

/// `Φ^∧ = 1/σ_n` up to `N`, `Φ̃^∧ = 1` up to `kN`.
pub fn shannon_pair(geometry: &Geometry) -> KernelPair {
    shannon_pair_with_cutoff(geometry, geometry.n)
}

/// Shannon-type pair whose scaling part stops at degree `m ≤ N`; the wavelet
/// then covers `m+1..=kN`.
pub fn shannon_pair_with_cutoff(geometry: &Geometry, m: usize) -> KernelPair {
    let phi = (0..=geometry.n).map(|n| if n <= m { 1.0 / geometry.sigma(n) } else { 0.0 }).collect();
    KernelPair::new(*geometry, SymbolSet { values: phi }, SymbolSet::constant(geometry.kn, 1.0))
        .expect("consistent dimensions")
}

/// `β·Σ_{n≤N} σ_n^{-2} + (kN+1)²`; written with the scalar `σ_n` this is
/// `β(1−(R/r)^{2(N+1)})/(1−(R/r)²) + (kN+1)²`.
pub fn shannon_bound(geometry: &Geometry, beta: f64) -> f64 {
    let s: f64 = (0..=geometry.n).map(|n| geometry.sigma(n).powi(-2)).sum();
    beta * s + ((geometry.kn + 1) as f64).powi(2)
}

/// The bound in its closed geometric-series form (scalar `σ_n`).
pub fn shannon_bound_closed_form(geometry: &Geometry, beta: f64) -> f64 {
    let q = (geometry.big_r / geometry.r).powi(2);
    beta * (1.0 - q.powi(geometry.n as i32 + 1)) / (1.0 - q) + ((geometry.kn + 1) as f64).powi(2)
}

/// Satellite-only downward continuation cut at degree `m`: `1/σ_n` for `n ≤ m`.
pub fn tsvd_symbols(geometry: &Geometry, m: usize) -> SymbolSet {
    SymbolSet { values: (0..=m).map(|n| 1.0 / geometry.sigma(n)).collect() }
}

/// `K(t) = Σ (2n+1)/(4π) K^∧(n) P_n(t)`.
pub fn kernel_eval(symbols: &SymbolSet, t: f64) -> Result<f64> {
    if !(t.abs() <= 1.0 + 1e-12) {
        return Err(Error::OutOfRange(format!("kernel argument {t} not in [-1, 1]")));
    }
    let c: Vec<f64> = symbols.values.iter().enumerate().map(|(n, v)| (2 * n + 1) as f64 / FOUR_PI * v).collect();
    Ok(legendre_series(&c, t.clamp(-1.0, 1.0)))
}

/// Share of the wavelet's energy on `[−1, 1−ρ]`, i.e. outside the cap.
pub fn localization_ratio(psi_tilde: &SymbolSet, rho: f64, kind: FieldKind) -> Result<f64> {
    if psi_tilde.is_zero() {
        return Err(Error::Degenerate("localization ratio of an all-zero kernel".into()));
    }
    check_rho(rho)?;
    let n_max = psi_tilde.n_max();
    let (outside, full) = match kind {
        FieldKind::Scalar => (scalar_gram_on(n_max, -1.0, 1.0 - rho)?, scalar_gram_on(n_max, -1.0, 1.0)?),
        FieldKind::Vector => (vector_gram_on(n_max, -1.0, 1.0 - rho)?, vector_gram_on(n_max, -1.0, 1.0)?),
    };
    let v = DVector::from_column_slice(psi_tilde.values());
    let num = v.dot(&(&outside * &v));
    let den = v.dot(&(&full * &v));
    Ok((num / den).clamp(0.0, 1.0))
}

/// Diagonal of the full-interval Gram: `2n+1` for scalar kernels, and
/// `1` at degree 0 and `2(2n+1)` above for tensor kernels.
pub fn full_gram_diagonal(kind: FieldKind, n: usize) -> f64 {
    let c = (2 * n + 1) as f64;
    match (kind, n) {
        (FieldKind::Scalar, _) => c,
        (FieldKind::Vector, 0) => 1.0,
        (FieldKind::Vector, _) => 2.0 * c,
    }
}

/// Per-degree closed-form minimizer in the limit `ρ → 0`, where the Gram is
/// diagonal. Returns `(Φ^∧(n)σ_n)_{n≤N}` and `(Φ̃^∧(n))_{n≤kN}`.
pub fn decoupled_solution(g: &Geometry, w: &PenaltyWeights) -> Result<(Vec<f64>, Vec<f64>)> {
    w.check(g)?;
    let mut x = vec![0.0; g.n + 1];
    let mut y = vec![0.0; g.kn + 1];
    for n in 0..=g.kn {
        let c = full_gram_diagonal(g.kind, n);
        if n <= g.n {
            let s = g.sigma(n);
            let a11 = w.alpha[n] + w.beta / (s * s) + c;
            let a22 = w.alpha_tilde[n] + c;
            let det = a11 * a22 - c * c;
            x[n] = (w.alpha[n] * a22 + c * w.alpha_tilde[n]) / det;
            y[n] = (a11 * w.alpha_tilde[n] + c * w.alpha[n]) / det;
        } else {
            y[n] = w.alpha_tilde[n] / (w.alpha_tilde[n] + c);
        }
    }
    Ok((x, y))
}

/// Raised-cosine taper `cos²(πn/(2(kN+1)))` used as filtered targets.
pub fn raised_cosine_targets(kn: usize) -> SymbolSet {
    let h = std::f64::consts::PI / (2.0 * (kn + 1) as f64);
    SymbolSet { values: (0..=kn).map(|n| (h * n as f64).cos().powi(2)).collect() }
}

/// Writes `n,phi,phi_tilde,psi_tilde`; `phi` is zero above `N`.
pub fn write_symbols_csv<W: Write>(pair: &KernelPair, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "phi", "phi_tilde", "psi_tilde"])?;
    for n in 0..=pair.geometry.kn {
        out.write_record([
            n.to_string(),
            fmt17(pair.phi.value(n)),
            fmt17(pair.phi_tilde.value(n)),
            fmt17(pair.psi_tilde.value(n)),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geo(rho: f64, kind: FieldKind) -> Geometry {
        Geometry::with_kn(6371.2, 7071.2, 30, 40, rho, kind).unwrap()
    }

    #[test]
    fn scalar_gram_examples() {
        let g = gram_scalar(1, 0.5).unwrap();
        assert_relative_eq!(g.get(0, 0), 0.75, epsilon = 1e-13);
        assert_relative_eq!(g.get(0, 1), -0.5625, epsilon = 1e-13);
        assert!(gram_scalar(3, 0.0).is_err());
        assert!(gram_scalar(3, 2.0).is_err());
        let g = gram_scalar(20, 1e-9).unwrap();
        for n in 0..=20 {
            for m in 0..=20 {
                let expect = if n == m { (2 * n + 1) as f64 } else { 0.0 };
                assert!((g.get(n, m) - expect).abs() < 1e-6, "{n} {m}");
            }
        }
    }

    #[test]
    fn vector_gram_examples() {
        let g = gram_vector_unscaled(3, 0.5).unwrap();
        assert_relative_eq!(g.get(0, 0), 1.5 / (16.0 * std::f64::consts::PI.powi(2)), max_relative = 1e-13);
        let g = gram_vector(20, 0.3).unwrap();
        assert_eq!(g.entries, g.entries.transpose());
        assert_relative_eq!(g.get(0, 0), 0.5 * 1.7, max_relative = 1e-13);
    }

    #[test]
    fn sigma_exponents() {
        let s = geo(0.5, FieldKind::Scalar);
        let v = geo(0.5, FieldKind::Vector);
        assert_relative_eq!(s.sigma(1), 6371.2 / 7071.2, epsilon = 1e-15);
        assert!((s.sigma(1) - 0.901006).abs() < 1e-6);
        assert_eq!(s.sigma(0), 1.0);
        assert_relative_eq!(v.sigma(10), (6371.2f64 / 7071.2).powi(11), epsilon = 1e-15);
        assert!(Geometry::with_kn(2.0, 1.0, 3, 5, 0.5, FieldKind::Scalar).is_err());
        assert!(Geometry::with_kn(1.0, 2.0, 5, 5, 0.5, FieldKind::Scalar).is_err());
        let g = Geometry::new(1.0, 2.0, 80, 1.25, 0.5, FieldKind::Scalar).unwrap();
        assert_eq!(g.kn, 100);
    }

    #[test]
    fn zero_symbols_functional() {
        for kind in [FieldKind::Scalar, FieldKind::Vector] {
            let g = geo(0.5, kind);
            let w = PenaltyWeights::constant(&g, 2.0, 3.0, 0.7).unwrap();
            let gram = gram(kind, g.kn, g.rho).unwrap();
            let f = functional_value(&KernelPair::zero(g), &w, &gram, None).unwrap();
            assert_relative_eq!(f, 2.0 * 31.0 + 3.0 * 41.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn shannon_pair_shape() {
        let g = geo(0.1, FieldKind::Scalar);
        let p = shannon_pair(&g);
        for n in 0..=g.kn {
            let expect = if n <= g.n { 0.0 } else { 1.0 };
            assert!((p.psi_tilde.value(n) - expect).abs() < 1e-15);
        }
        assert!(p.coupling_residual() == 0.0 || p.coupling_residual() < 1e-15);
    }

    #[test]
    fn tsvd_examples() {
        let big = Geometry::with_kn(6371.2, 7071.2, 80, 100, 0.5, FieldKind::Scalar).unwrap();
        assert_eq!(tsvd_symbols(&big, 0).values(), &[1.0]);
        let s = tsvd_symbols(&big, 80);
        assert_relative_eq!(s.value(80), (7071.2f64 / 6371.2).powi(80), max_relative = 1e-12);
        assert!((s.value(80) - 4186.7).abs() < 2.0);
        let v = Geometry { kind: FieldKind::Vector, ..big };
        assert_relative_eq!(tsvd_symbols(&v, 50).value(50), (7071.2f64 / 6371.2).powi(51), max_relative = 1e-12);
    }

    #[test]
    fn kernel_eval_examples() {
        let one = SymbolSet::constant(0, 1.0);
        for t in [-1.0, 0.0, 0.4, 1.0] {
            assert_relative_eq!(kernel_eval(&one, t).unwrap(), 1.0 / FOUR_PI, epsilon = 1e-15);
        }
        let l = 25;
        let ones = SymbolSet::constant(l, 1.0);
        assert_relative_eq!(kernel_eval(&ones, 1.0).unwrap(), ((l + 1) * (l + 1)) as f64 / FOUR_PI, max_relative = 1e-13);
        assert!(kernel_eval(&ones, 1.5).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = SymbolSet::new((0..30).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let rule = gauss_rule(40, -1.0, 1.0).unwrap();
        let q = rule.integrate(|t| kernel_eval(&s, t).unwrap().powi(2));
        let parseval: f64 = s.values().iter().enumerate().map(|(n, v)| (2 * n + 1) as f64 / (8.0 * std::f64::consts::PI.powi(2)) * v * v).sum();
        assert_relative_eq!(q, parseval, max_relative = 1e-10);
    }

    #[test]
    fn localization_examples() {
        let one = SymbolSet::constant(0, 1.0);
        for rho in [0.1, 0.5, 1.3] {
            assert_relative_eq!(localization_ratio(&one, rho, FieldKind::Scalar).unwrap(), (2.0 - rho) / 2.0, max_relative = 1e-13);
        }
        assert!(localization_ratio(&SymbolSet::constant(4, 0.0), 0.5, FieldKind::Scalar).is_err());

        let a = shannon_pair(&Geometry::with_kn(1.0, 1.1, 80, 100, 0.1, FieldKind::Scalar).unwrap());
        let b = shannon_pair(&Geometry::with_kn(1.0, 1.1, 160, 200, 0.1, FieldKind::Scalar).unwrap());
        let ra = localization_ratio(&a.psi_tilde, 0.1, FieldKind::Scalar).unwrap();
        let rb = localization_ratio(&b.psi_tilde, 0.1, FieldKind::Scalar).unwrap();
        assert!(ra > 0.0 && ra < 1.0 && rb < ra, "{ra} {rb}");

        // near-zero cap keeps all energy outside, a near-full cap almost none
        let s = SymbolSet::new(vec![0.3, -1.0, 0.5, 2.0]).unwrap();
        assert!(localization_ratio(&s, 1e-9, FieldKind::Scalar).unwrap() > 1.0 - 1e-6);
        assert!(localization_ratio(&s, 2.0 - 1e-9, FieldKind::Scalar).unwrap() < 1e-6);
    }

    fn decoupled_error(g: &Geometry, w: &PenaltyWeights) -> f64 {
        let pair = optimize(g, w, None).unwrap();
        let (x, y) = decoupled_solution(g, w).unwrap();
        let ex = pair.phi_sigma().iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let ey = pair.phi_tilde.values().iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ex.max(ey)
    }

    #[test]
    fn decoupled_oracle() {
        for kind in [FieldKind::Scalar, FieldKind::Vector] {
            let g = geo(1e-9, kind);
            let w = PenaltyWeights::constant(&g, 1e4, 1e4, 1e-3).unwrap();
            assert!(decoupled_error(&g, &w) < 1e-8, "{kind:?}");
            // O(1) weights feel the O(ρ·n²) coupling a little more.
            let w = PenaltyWeights::constant(&g, 3.0, 7.0, 0.01).unwrap();
            assert!(decoupled_error(&g, &w) < 1e-7, "{kind:?}");
        }
        let g = geo(1e-9, FieldKind::Scalar);
        let w = PenaltyWeights::constant(&g, 3.0, 7.0, 0.01).unwrap();
        let (_, y) = decoupled_solution(&g, &w).unwrap();
        for n in g.n + 1..=g.kn {
            assert_relative_eq!(y[n], 7.0 / (7.0 + (2 * n + 1) as f64), epsilon = 1e-15);
        }
    }

    #[test]
    fn stationarity_and_minimality() {
        for kind in [FieldKind::Scalar, FieldKind::Vector] {
            for rho in [0.5, 0.1, 0.01] {
                let g = geo(rho, kind);
                let w = PenaltyWeights::constant(&g, 0.5, 2.0, 0.1).unwrap();
                let gram = gram(kind, g.kn, rho).unwrap();
                let pair = optimize_with_gram(&g, &w, None, &gram).unwrap();
                assert!(pair.coupling_residual() < 1e-12);
                let grad = functional_gradient(&pair, &w, &gram, None).unwrap();
                let alpha_norm = w.alpha.iter().chain(&w.alpha_tilde).map(|a| a * a).sum::<f64>().sqrt();
                let gmax = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(gmax < 1e-8 * (1.0 + alpha_norm), "{kind:?} {rho} {gmax}");
                let f_opt = functional_value(&pair, &w, &gram, None).unwrap();
                let f_sh = functional_value(&shannon_pair(&g), &w, &gram, None).unwrap();
                assert!(f_opt < f_sh);
            }
        }
    }

    #[test]
    fn penalty_dominated_limit() {
        let g = geo(0.5, FieldKind::Scalar);
        let w = PenaltyWeights::constant(&g, 1e10, 1e10, 1e-10).unwrap();
        let pair = optimize(&g, &w, None).unwrap();
        for (n, ps) in pair.phi_sigma().iter().enumerate() {
            assert!((ps - 1.0).abs() < 1e-4, "n={n}");
        }
        for n in 0..=g.kn {
            assert!((pair.phi_tilde.value(n) - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn filtered_targets_stationary() {
        let g = geo(0.5, FieldKind::Scalar);
        let w = PenaltyWeights::constant(&g, 1.0, 10.0, 0.01).unwrap();
        let t = raised_cosine_targets(g.kn);
        assert_eq!(t.value(0), 1.0);
        let gram = gram_scalar(g.kn, g.rho).unwrap();
        let pair = optimize_with_gram(&g, &w, Some(&t), &gram).unwrap();
        let grad = functional_gradient(&pair, &w, &gram, Some(&t)).unwrap();
        assert!(grad.iter().all(|v| v.abs() < 1e-8 * 100.0));
    }

    #[test]
    fn rejects_bad_weights() {
        let g = geo(0.5, FieldKind::Scalar);
        assert!(PenaltyWeights::constant(&g, 0.0, 1.0, 1.0).is_err());
        assert!(PenaltyWeights::constant(&g, 1.0, 1.0, -1.0).is_err());
        let w = PenaltyWeights::new(vec![1.0; 3], vec![1.0; 3], 1.0).unwrap();
        assert!(optimize(&g, &w, None).is_err());
    }

    #[test]
    fn symbols_csv_header() {
        let g = geo(0.5, FieldKind::Scalar);
        let mut buf = Vec::new();
        write_symbols_csv(&shannon_pair(&g), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,phi,phi_tilde,psi_tilde\n"));
        assert_eq!(text.lines().count(), g.kn + 2);
    }
}
