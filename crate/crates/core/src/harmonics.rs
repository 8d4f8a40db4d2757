//! Real fully normalized spherical harmonics, coefficient containers,
//! product quadrature on spheres and caps, and synthesis/analysis.
//!
//! Ordering within a degree: `k = 1` is order 0, `k = 2..=n+1` the cosine
//! terms of order `1..=n`, `k = n+2..=2n+1` the sine terms. No Condon–Shortley
//! phase. The flat index of `(n, k)` is `n² + k − 1`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::legendre::{fill_with_derivatives, gauss_rule};

pub type Direction = Vector3<f64>;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;
const CHUNK: usize = 64;

/// Flat position of `(n, k)` in a coefficient vector.
#[inline]
pub fn flat_index(n: usize, k: usize) -> usize {
    n * n + k - 1
}

/// Number of coefficients up to and including degree `n_max`.
#[inline]
pub fn num_coeffs(n_max: usize) -> usize {
    (n_max + 1) * (n_max + 1)
}

/// Degree of a flat index.
#[inline]
pub fn degree_of(index: usize) -> usize {
    (index as f64).sqrt() as usize
}

fn unit(xi: &Direction) -> Result<Direction> {
    let norm = xi.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::OutOfRange(format!("direction {xi:?} has no length")));
    }
    Ok(xi / norm)
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > 2 * n + 1 {
        return Err(Error::InvalidIndex(format!("order index k={k} for degree {n} (need 1..={})", 2 * n + 1)));
    }
    Ok(())
}

/// `Y_{n,k}(ξ)`; `ξ` is normalized before use.
pub fn ynk(n: usize, k: usize, xi: &Direction) -> Result<f64> {
    check_k(n, k)?;
    let xi = unit(xi)?;
    let mut vals = vec![0.0; num_coeffs(n)];
    eval_harmonics(n, &xi, &mut vals);
    Ok(vals[flat_index(n, k)])
}

/// Surface gradient `∇*Y_{n,k}(ξ)`.
pub fn ynk_gradient(n: usize, k: usize, xi: &Direction) -> Result<Direction> {
    check_k(n, k)?;
    let xi = unit(xi)?;
    let mut vals = vec![0.0; num_coeffs(n)];
    let mut grads = vec![Direction::zeros(); num_coeffs(n)];
    eval_harmonics_with_gradient(n, &xi, &mut vals, &mut grads);
    Ok(grads[flat_index(n, k)])
}

struct Spherical {
    t: f64,
    s: f64,
    cos_phi: f64,
    sin_phi: f64,
}

fn spherical(xi: &Direction) -> Spherical {
    let t = xi.z.clamp(-1.0, 1.0);
    let rho = (xi.x * xi.x + xi.y * xi.y).sqrt();
    let s = (1.0 - t * t).max(0.0).sqrt();
    // At the poles the azimuth is taken as zero, and gradients are the limits along φ = 0.
    let (cos_phi, sin_phi) = if rho > 0.0 { (xi.x / rho, xi.y / rho) } else { (1.0, 0.0) };
    Spherical { t, s, cos_phi, sin_phi }
}

/// Fills `out[flat_index(n,k)] = Y_{n,k}(ξ)` for all `n ≤ n_max`; `ξ` must be unit.
pub fn eval_harmonics(n_max: usize, xi: &Direction, out: &mut [f64]) {
    let sp = spherical(xi);
    let len = n_max + 1;
    let mut p = vec![0.0; len];
    crate::legendre::fill_values(sp.t, &mut p);
    for n in 0..=n_max {
        out[n * n] = ((2 * n + 1) as f64 / FOUR_PI).sqrt() * p[n];
    }
    let mut u = vec![0.0; len];
    let (mut cm, mut sm) = (1.0, 0.0);
    let mut umm = 0.0;
    for m in 1..=n_max {
        (cm, sm) = (cm * sp.cos_phi - sm * sp.sin_phi, sm * sp.cos_phi + cm * sp.sin_phi);
        umm = sectoral_next(m, umm, sp.s);
        fill_order(m, n_max, sp.t, umm, &mut u);
        for n in m..=n_max {
            let pbar = sp.s * u[n];
            out[n * n + m] = pbar * cm;
            out[n * n + n + m] = pbar * sm;
        }
    }
}

/// Values plus surface gradients; `grads[i]` is tangent at `ξ`.
pub fn eval_harmonics_with_gradient(n_max: usize, xi: &Direction, vals: &mut [f64], grads: &mut [Direction]) {
    let sp = spherical(xi);
    let len = n_max + 1;
    let e_theta = Direction::new(sp.t * sp.cos_phi, sp.t * sp.sin_phi, -sp.s);
    let e_phi = Direction::new(-sp.sin_phi, sp.cos_phi, 0.0);

    let mut p = vec![0.0; len];
    let mut d1 = vec![0.0; len];
    let mut d2 = vec![0.0; len];
    fill_with_derivatives(sp.t, &mut p, &mut d1, &mut d2);
    for n in 0..=n_max {
        let c = ((2 * n + 1) as f64 / FOUR_PI).sqrt();
        vals[n * n] = c * p[n];
        grads[n * n] = e_theta * (-sp.s * c * d1[n]);
    }

    let mut u = vec![0.0; len];
    let (mut cm, mut sm) = (1.0, 0.0);
    let mut umm = 0.0;
    for m in 1..=n_max {
        (cm, sm) = (cm * sp.cos_phi - sm * sp.sin_phi, sm * sp.cos_phi + cm * sp.sin_phi);
        umm = sectoral_next(m, umm, sp.s);
        fill_order(m, n_max, sp.t, umm, &mut u);
        let mf = m as f64;
        for n in m..=n_max {
            let nf = n as f64;
            let prev = if n > m { u[n - 1] } else { 0.0 };
            let dtheta = nf * sp.t * u[n]
                - ((2.0 * nf + 1.0) / (2.0 * nf - 1.0) * (nf * nf - mf * mf)).sqrt() * prev;
            let pbar = sp.s * u[n];
            let ic = n * n + m;
            let is = n * n + n + m;
            vals[ic] = pbar * cm;
            vals[is] = pbar * sm;
            grads[ic] = e_theta * (dtheta * cm) - e_phi * (mf * u[n] * sm);
            grads[is] = e_theta * (dtheta * sm) + e_phi * (mf * u[n] * cm);
        }
    }
}

/// `ū_m^m = P̄_m^m / sinθ` from `ū_{m-1}^{m-1}` (fully normalized over the unit sphere).
#[inline]
fn sectoral_next(m: usize, prev: f64, s: f64) -> f64 {
    if m == 1 {
        (3.0 / FOUR_PI).sqrt()
    } else {
        let mf = m as f64;
        prev * s * ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt()
    }
}

/// Fills `u[n] = P̄_n^m / sinθ` for `n = m..=n_max` given `ū_m^m`.
#[inline]
fn fill_order(m: usize, n_max: usize, t: f64, umm: f64, u: &mut [f64]) {
    u[m] = umm;
    if m < n_max {
        u[m + 1] = ((2 * m + 3) as f64).sqrt() * t * umm;
    }
    let mf = m as f64;
    for n in m + 2..=n_max {
        let nf = n as f64;
        let a = ((2.0 * nf - 1.0) * (2.0 * nf + 1.0) / ((nf - mf) * (nf + mf))).sqrt();
        let b = ((2.0 * nf + 1.0) * (nf + mf - 1.0) * (nf - mf - 1.0) / ((nf - mf) * (nf + mf) * (2.0 * nf - 3.0))).sqrt();
        u[n] = a * t * u[n - 1] - b * u[n - 2];
    }
}

/// Orthonormal frame `(e1, e2, c)` with `c` the given unit vector.
pub fn frame_around(c: &Direction) -> (Direction, Direction) {
    let helper = if c.z.abs() < 0.9 { Direction::z() } else { Direction::x() };
    let e1 = helper.cross(c).normalize();
    let e2 = c.cross(&e1);
    (e1, e2)
}

/// Product rule on a full sphere of the given radius.
#[derive(Clone, Debug)]
pub struct SphereGrid {
    pub radius: f64,
    pub nodes: Vec<Direction>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

/// Gauss latitudes times uniform longitudes, exact for spherical polynomials
/// of degree `≤ exact_degree` (rounded up to even).
pub fn sphere_grid(radius: f64, exact_degree: usize) -> Result<SphereGrid> {
    if !(radius > 0.0) {
        return Err(Error::OutOfRange(format!("radius {radius} must be positive")));
    }
    let l = exact_degree.div_ceil(2);
    let lat = gauss_rule(l + 1, -1.0, 1.0)?;
    let n_lon = 2 * l + 1;
    let dphi = 2.0 * std::f64::consts::PI / n_lon as f64;
    let r2 = radius * radius;
    let mut nodes = Vec::with_capacity(lat.len() * n_lon);
    let mut weights = Vec::with_capacity(lat.len() * n_lon);
    for (&t, &w) in lat.nodes.iter().zip(&lat.weights) {
        let s = (1.0 - t * t).sqrt();
        for j in 0..n_lon {
            let phi = j as f64 * dphi;
            nodes.push(Direction::new(s * phi.cos(), s * phi.sin(), t));
            weights.push(w * dphi * r2);
        }
    }
    Ok(SphereGrid { radius, nodes, weights, exact_degree: 2 * l })
}

/// North-pole cap rule that can be placed at any center.
#[derive(Clone, Debug)]
pub struct CapRule {
    pub cap_rho: f64,
    pub exact_degree: usize,
    pub t_nodes: Vec<f64>,
    pub t_weights: Vec<f64>,
    pub azimuths: Vec<(f64, f64)>,
}

impl CapRule {
    pub fn new(cap_rho: f64, exact_degree: usize) -> Result<Self> {
        if !(cap_rho > 0.0 && cap_rho <= 2.0) {
            return Err(Error::OutOfRange(format!("cap radius {cap_rho} not in (0, 2]")));
        }
        let rule = gauss_rule((exact_degree + 1).div_ceil(2), 1.0 - cap_rho, 1.0)?;
        let n_az = 2 * exact_degree + 1;
        let dphi = 2.0 * std::f64::consts::PI / n_az as f64;
        let azimuths = (0..n_az).map(|j| {
            let phi = j as f64 * dphi;
            (phi.cos(), phi.sin())
        }).collect();
        Ok(CapRule {
            cap_rho,
            exact_degree,
            t_nodes: rule.nodes,
            t_weights: rule.weights.iter().map(|w| w * dphi).collect(),
            azimuths,
        })
    }

    pub fn len(&self) -> usize {
        self.t_nodes.len() * self.azimuths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rotates the rule to `center` on a sphere of the given radius.
    pub fn place(&self, center: &Direction, radius: f64) -> Result<CapGrid> {
        if !(radius > 0.0) {
            return Err(Error::OutOfRange(format!("radius {radius} must be positive")));
        }
        let c = unit(center)?;
        let (e1, e2) = frame_around(&c);
        let r2 = radius * radius;
        let mut nodes = Vec::with_capacity(self.len());
        let mut weights = Vec::with_capacity(self.len());
        for (&t, &w) in self.t_nodes.iter().zip(&self.t_weights) {
            let s = (1.0 - t * t).max(0.0).sqrt();
            for &(cp, sp) in &self.azimuths {
                nodes.push((e1 * (s * cp) + e2 * (s * sp) + c * t).normalize());
                weights.push(w * r2);
            }
        }
        Ok(CapGrid { radius, center: c, cap_rho: self.cap_rho, nodes, weights, exact_degree: self.exact_degree })
    }
}

/// Product rule on the cap `{ξ : 1 − center·ξ < cap_rho}` of a sphere.
#[derive(Clone, Debug)]
pub struct CapGrid {
    pub radius: f64,
    pub center: Direction,
    pub cap_rho: f64,
    pub nodes: Vec<Direction>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

/// Gauss rule in `t ∈ [1−cap_rho, 1]` times `2·exact_degree+1` azimuths,
/// rotated to `center`. `cap_rho = 2` gives the whole sphere.
pub fn cap_grid(radius: f64, center: &Direction, cap_rho: f64, exact_degree: usize) -> Result<CapGrid> {
    CapRule::new(cap_rho, exact_degree)?.place(center, radius)
}

/// Common view of the two grid kinds.
pub trait Quadrature: Sync {
    fn radius(&self) -> f64;
    fn nodes(&self) -> &[Direction];
    fn weights(&self) -> &[f64];
    fn exact_degree(&self) -> usize;

    fn integrate(&self, values: &[f64]) -> f64 {
        self.weights().iter().zip(values).map(|(w, v)| w * v).sum()
    }

    fn area(&self) -> f64 {
        self.weights().iter().sum()
    }

    /// `(∫ f²)^{1/2}` over the grid.
    fn l2_norm(&self, values: &[f64]) -> f64 {
        self.weights().iter().zip(values).map(|(w, v)| w * v * v).sum::<f64>().sqrt()
    }
}

macro_rules! impl_quadrature {
    ($t:ty) => {
        impl Quadrature for $t {
            fn radius(&self) -> f64 {
                self.radius
            }
            fn nodes(&self) -> &[Direction] {
                &self.nodes
            }
            fn weights(&self) -> &[f64] {
                &self.weights
            }
            fn exact_degree(&self) -> usize {
                self.exact_degree
            }
        }
    };
}
impl_quadrature!(SphereGrid);
impl_quadrature!(CapGrid);

/// Triangular array of real Fourier coefficients of a field on `Ω_radius`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicCoefficients {
    pub radius: f64,
    pub n_max: usize,
    data: Vec<f64>,
}

impl HarmonicCoefficients {
    pub fn zeros(radius: f64, n_max: usize) -> Result<Self> {
        Self::from_vec(radius, n_max, vec![0.0; num_coeffs(n_max)])
    }

    pub fn from_vec(radius: f64, n_max: usize, data: Vec<f64>) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::OutOfRange(format!("radius {radius} must be positive")));
        }
        if data.len() != num_coeffs(n_max) {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for degree {n_max}, expected {}",
                data.len(),
                num_coeffs(n_max)
            )));
        }
        Ok(HarmonicCoefficients { radius, n_max, data })
    }

    pub fn get(&self, n: usize, k: usize) -> f64 {
        if n > self.n_max || k == 0 || k > 2 * n + 1 {
            return 0.0;
        }
        self.data[flat_index(n, k)]
    }

    pub fn set(&mut self, n: usize, k: usize, value: f64) -> Result<()> {
        if n > self.n_max {
            return Err(Error::InvalidIndex(format!("degree {n} above n_max {}", self.n_max)));
        }
        check_k(n, k)?;
        self.data[flat_index(n, k)] = value;
        Ok(())
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Coefficients of degree `n`, `k = 1..=2n+1`.
    pub fn degree(&self, n: usize) -> &[f64] {
        &self.data[n * n..(n + 1) * (n + 1)]
    }

    /// `ℓ²` norm; equals the `L²(Ω_radius)` norm of the field.
    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Multiplies every degree-`n` block by `f(n)`.
    pub fn scale_degrees<F: Fn(usize) -> f64>(&self, f: F) -> Self {
        let mut out = self.clone();
        for n in 0..=self.n_max {
            let g = f(n);
            for c in &mut out.data[n * n..(n + 1) * (n + 1)] {
                *c *= g;
            }
        }
        out
    }

    /// Truncates or zero-pads to `n_max`.
    pub fn with_n_max(&self, n_max: usize) -> Self {
        let mut data = vec![0.0; num_coeffs(n_max)];
        let keep = num_coeffs(n_max.min(self.n_max));
        data[..keep].copy_from_slice(&self.data[..keep]);
        HarmonicCoefficients { radius: self.radius, n_max, data }
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    /// Writes the text format: header then one `n k value` line per coefficient.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# radius_km={} n_max={}", format_float(self.radius), self.n_max)?;
        for n in 0..=self.n_max {
            for k in 1..=2 * n + 1 {
                writeln!(w, "{n} {k} {}", format_float(self.get(n, k)))?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = numbered_lines(reader);
        let (line_no, header) = lines
            .next()
            .transpose()?
            .ok_or(Error::Parse { line: 1, message: "empty coefficient file".into() })?;
        let fields = parse_header(&header, line_no)?;
        let radius = header_value::<f64>(&fields, "radius_km", line_no)?;
        let n_max = header_value::<usize>(&fields, "n_max", line_no)?;
        let mut out = Self::zeros(radius, n_max).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        let mut seen = vec![false; num_coeffs(n_max)];
        for item in lines {
            let (line_no, line) = item?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse { line: line_no, message: format!("expected `n k value`, got {line:?}") });
            }
            let n: usize = parse_field(parts[0], line_no, "degree")?;
            let k: usize = parse_field(parts[1], line_no, "order index")?;
            let v: f64 = parse_field(parts[2], line_no, "value")?;
            if n > n_max || k == 0 || k > 2 * n + 1 {
                return Err(Error::Parse { line: line_no, message: format!("index ({n}, {k}) out of range for n_max={n_max}") });
            }
            let i = flat_index(n, k);
            if seen[i] {
                return Err(Error::Parse { line: line_no, message: format!("duplicate coefficient ({n}, {k})") });
            }
            seen[i] = true;
            out.data[i] = v;
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_text(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_text(std::io::BufReader::new(file))
    }
}

/// Shortest-exact 17 significant digit representation used in text outputs.
pub fn format_float(x: f64) -> String {
    let mut s = String::new();
    write!(s, "{x:.16e}").unwrap();
    s
}

/// Non-empty, non-comment lines after the header; the first item is the header itself.
pub(crate) fn numbered_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    let mut header_done = false;
    reader.lines().enumerate().filter_map(move |(i, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(Error::Io(e))),
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            return None;
        }
        if trimmed.starts_with('#') {
            if header_done {
                return None;
            }
            header_done = true;
            return Some(Ok((i + 1, trimmed.to_string())));
        }
        if !header_done {
            return Some(Err(Error::Parse { line: i + 1, message: "missing `# radius_km=... n_max=...` header".into() }));
        }
        Some(Ok((i + 1, trimmed.to_string())))
    })
}

pub(crate) fn parse_header(line: &str, line_no: usize) -> Result<Vec<(String, String)>> {
    let body = line.trim_start_matches('#').trim();
    body.split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or(Error::Parse { line: line_no, message: format!("malformed header token {tok:?}") })
        })
        .collect()
}

pub(crate) fn header_value<T: std::str::FromStr>(fields: &[(String, String)], key: &str, line_no: usize) -> Result<T> {
    let raw = fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or(Error::Parse { line: line_no, message: format!("header lacks `{key}`") })?;
    parse_field(raw, line_no, key)
}

pub(crate) fn parse_field<T: std::str::FromStr>(raw: &str, line_no: usize, what: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse { line: line_no, message: format!("cannot parse {what} from {raw:?}") })
}

/// `F(ξ) = Σ c_{n,k} (1/radius) Y_{n,k}(ξ)` at each (unit) direction.
pub fn synthesize(coeffs: &HarmonicCoefficients, points: &[Direction]) -> Vec<f64> {
    let n_max = coeffs.n_max;
    let inv_r = 1.0 / coeffs.radius;
    points
        .par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            let mut y = vec![0.0; num_coeffs(n_max)];
            chunk
                .iter()
                .map(|p| {
                    eval_harmonics(n_max, &p.normalize(), &mut y);
                    inv_r * dot(&y, coeffs.data())
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ_j w_j f_j Y_{n,k}(ξ_j)` for every `(n, k)` up to `n_max`, summed in node order.
pub fn weighted_projection(nodes: &[Direction], weights: &[f64], samples: &[f64], n_max: usize) -> Vec<f64> {
    let len = num_coeffs(n_max);
    let partials: Vec<Vec<f64>> = nodes
        .par_chunks(CHUNK)
        .zip(weights.par_chunks(CHUNK))
        .zip(samples.par_chunks(CHUNK))
        .map(|((ns, ws), fs)| {
            let mut acc = vec![0.0; len];
            let mut y = vec![0.0; len];
            for ((p, &w), &f) in ns.iter().zip(ws).zip(fs) {
                eval_harmonics(n_max, p, &mut y);
                let wf = w * f;
                for (a, v) in acc.iter_mut().zip(&y) {
                    *a += wf * v;
                }
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; len];
    for part in partials {
        for (o, p) in out.iter_mut().zip(part) {
            *o += p;
        }
    }
    out
}

/// Quadrature of the Fourier coefficients; needs `grid.exact_degree ≥ 2·n_max`.
pub fn analyze(samples: &[f64], grid: &SphereGrid, n_max: usize) -> Result<HarmonicCoefficients> {
    if grid.exact_degree < 2 * n_max {
        return Err(Error::InsufficientExactness { available: grid.exact_degree, required: 2 * n_max });
    }
    if samples.len() != grid.nodes.len() {
        return Err(Error::DimensionMismatch(format!("{} samples for {} nodes", samples.len(), grid.nodes.len())));
    }
    let inv_r = 1.0 / grid.radius;
    let data = weighted_projection(&grid.nodes, &grid.weights, samples, n_max)
        .into_iter()
        .map(|v| v * inv_r)
        .collect();
    HarmonicCoefficients::from_vec(grid.radius, n_max, data)
}

/// `(Σ (n+½)^{2s} c_{n,k}²)^{1/2}`.
pub fn sobolev_norm(coeffs: &HarmonicCoefficients, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::OutOfRange(format!("Sobolev index {s} must be nonnegative")));
    }
    let mut acc = 0.0;
    for n in 0..=coeffs.n_max {
        let w = (n as f64 + 0.5).powf(2.0 * s);
        acc += w * coeffs.degree(n).iter().map(|c| c * c).sum::<f64>();
    }
    Ok(acc.sqrt())
}
