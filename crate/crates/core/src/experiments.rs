//! Experiment harness: configuration, synthetic models, error tables and
//! kernel spectra.
//!
//! A table cell is fixed by the cap radius, the noise levels, the replicate
//! seed and the method. All approximations are linear in the model and the two
//! noise fields, so per replicate the harness computes the Gram matrix of the
//! degree blocks of these three fields over the evaluation cap once. Every
//! cell's error is then a quadratic form in per-degree multipliers.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harmonics::{
    eval_harmonics, eval_harmonics_with_gradient, num_coeffs, sphere_grid, synthesize, CapGrid, Direction,
    HarmonicCoefficients,
};
use crate::kernels::{
    functional_value, gram, localization_ratio, optimize_with_gram, raised_cosine_targets, shannon_bound,
    shannon_pair, shannon_pair_with_cutoff, tsvd_symbols, write_symbols_csv, fmt17, FieldKind, Geometry, GramMatrix,
    KernelPair, PenaltyWeights, SymbolSet,
};
use crate::transforms::{
    approximate, approximate_spectral, cap_multipliers, continue_with, relative_error, scaled_noise, NormRegion,
    RegionSpec,
};
use crate::vector_field::{
    gradient_of, vector_approximate, vector_approximate_spectral, vector_cap_multipliers, vector_relative_error,
    vector_scaled_noise, vector_synthesize, vector_upward_continue, VectorCoefficients,
};

/// Where the potential `U⁺` comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelSource {
    /// Normal coefficients with variance `max(n,1)^{-2}` up to `degree`.
    Synthetic { degree: usize, seed: u64 },
    /// A coefficient file in the text format of [`HarmonicCoefficients`].
    File(PathBuf),
}

/// How penalty weights are formed from the sweep lists.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightScheme {
    /// `α = ratio·α̃`, both constant over degrees.
    Constant,
    /// [`PenaltyWeights::localizing`]; only `beta` is swept.
    Localizing { delta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Shannon,
    RaisedCosine,
}

/// Parameters of one experiment run; see [`ExperimentConfig::KEYS`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub case: FieldKind,
    pub r: f64,
    pub big_r: f64,
    pub n: usize,
    pub kn: usize,
    pub rho: Vec<f64>,
    /// `None` means `min(ρ + 0.1, 2)` for each `ρ`.
    pub data_rho: Option<f64>,
    pub center: Direction,
    pub model: ModelSource,
    pub noise_degree: usize,
    pub beta: Vec<f64>,
    pub alpha_tilde: Vec<f64>,
    pub alpha_ratio: Vec<f64>,
    pub weights: WeightScheme,
    pub target: Target,
    pub epsilon1: Vec<f64>,
    pub gamma: Vec<f64>,
    pub shannon_m: Vec<usize>,
    pub tsvd_m: Vec<usize>,
    pub seed: u64,
    pub n_seeds: usize,
    pub eval_points_degree: usize,
    pub timing: bool,
    pub out: Option<PathBuf>,
}

fn decades(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 10f64.powi(e)).collect()
}

impl ExperimentConfig {
    /// Accepted keys, in documentation order.
    pub const KEYS: &'static [&'static str] = &[
        "profile",
        "case",
        "r",
        "big_r",
        "n",
        "kn",
        "kappa",
        "rho",
        "data_rho",
        "center",
        "model_file",
        "model_degree",
        "model_seed",
        "noise_degree",
        "beta",
        "alpha_tilde",
        "alpha_ratio",
        "weights",
        "delta",
        "target",
        "epsilon1",
        "gamma",
        "shannon_m",
        "tsvd_m",
        "seed",
        "n_seeds",
        "eval_points_degree",
        "timing",
        "out",
    ];

    /// The full-size setting: `N = 80`, `kN = 100`, model degree 100, noise degree 110.
    pub fn full() -> Self {
        ExperimentConfig {
            case: FieldKind::Scalar,
            r: 6371.2,
            big_r: 7071.2,
            n: 80,
            kn: 100,
            rho: vec![0.5, 0.1, 0.01],
            data_rho: None,
            center: Direction::z(),
            model: ModelSource::Synthetic { degree: 100, seed: 7 },
            noise_degree: 110,
            beta: decades(-3, 2),
            alpha_tilde: decades(-3, 4),
            alpha_ratio: vec![1.0, 0.2],
            weights: WeightScheme::Constant,
            target: Target::Shannon,
            epsilon1: vec![0.001, 0.01, 0.05, 0.1],
            gamma: vec![1.0, 2.0, 5.0],
            shannon_m: vec![0, 30, 50, 80],
            tsvd_m: vec![50, 60, 70, 80, 100],
            seed: 1,
            n_seeds: 10,
            eval_points_degree: 8,
            timing: false,
            out: None,
        }
    }

    /// The reduced setting: `N = 30`, `kN = 40`, model degree 40, noise degree 44.
    pub fn reduced() -> Self {
        ExperimentConfig {
            n: 30,
            kn: 40,
            model: ModelSource::Synthetic { degree: 40, seed: 7 },
            noise_degree: 44,
            shannon_m: vec![0, 10, 20, 30],
            tsvd_m: vec![20, 25, 30, 35, 40],
            ..Self::full()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines; `#` starts a comment. The `profile` key
    /// selects the defaults, all other keys override them.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let key = k.trim().to_string();
            if !Self::KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("line {}: unknown key `{key}`", i + 1)));
            }
            if entries.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
        }
        let mut cfg = match entries.remove("profile") {
            None => Self::reduced(),
            Some((_, v)) if v == "reduced" => Self::reduced(),
            Some((_, v)) if v == "full" => Self::full(),
            Some((l, v)) => return Err(Error::Config(format!("line {l}: unknown profile `{v}`"))),
        };
        let mut model_degree = None;
        let mut model_seed = None;
        let mut kappa = None;
        let mut delta = None;
        for (key, (line, v)) in &entries {
            let err = |m: String| Error::Config(format!("line {line}: {key}: {m}"));
            match key.as_str() {
                "case" => cfg.case = v.parse().map_err(|_| err(format!("expected scalar or vector, got `{v}`")))?,
                "r" => cfg.r = scalar(v).map_err(err)?,
                "big_r" => cfg.big_r = scalar(v).map_err(err)?,
                "n" => cfg.n = scalar(v).map_err(err)?,
                "kn" => cfg.kn = scalar(v).map_err(err)?,
                "kappa" => kappa = Some(scalar::<f64>(v).map_err(err)?),
                "rho" => cfg.rho = list(v).map_err(err)?,
                "data_rho" => cfg.data_rho = Some(scalar(v).map_err(err)?),
                "center" => {
                    let c: Vec<f64> = list(v).map_err(err)?;
                    if c.len() != 3 {
                        return Err(err("expected three components".into()));
                    }
                    cfg.center = Direction::new(c[0], c[1], c[2]);
                }
                "model_file" => cfg.model = ModelSource::File(PathBuf::from(v)),
                "model_degree" => model_degree = Some(scalar(v).map_err(err)?),
                "model_seed" => model_seed = Some(scalar(v).map_err(err)?),
                "noise_degree" => cfg.noise_degree = scalar(v).map_err(err)?,
                "beta" => cfg.beta = list(v).map_err(err)?,
                "alpha_tilde" => cfg.alpha_tilde = list(v).map_err(err)?,
                "alpha_ratio" => cfg.alpha_ratio = list(v).map_err(err)?,
                "weights" => {
                    cfg.weights = match v.as_str() {
                        "constant" => WeightScheme::Constant,
                        "localizing" => WeightScheme::Localizing { delta: 0.5 },
                        _ => return Err(err(format!("expected constant or localizing, got `{v}`"))),
                    }
                }
                "delta" => delta = Some(scalar::<f64>(v).map_err(err)?),
                "target" => {
                    cfg.target = match v.as_str() {
                        "shannon" => Target::Shannon,
                        "raised_cosine" => Target::RaisedCosine,
                        _ => return Err(err(format!("expected shannon or raised_cosine, got `{v}`"))),
                    }
                }
                "epsilon1" => cfg.epsilon1 = list(v).map_err(err)?,
                "gamma" => cfg.gamma = list(v).map_err(err)?,
                "shannon_m" => cfg.shannon_m = list(v).map_err(err)?,
                "tsvd_m" => cfg.tsvd_m = list(v).map_err(err)?,
                "seed" => cfg.seed = scalar(v).map_err(err)?,
                "n_seeds" => cfg.n_seeds = scalar(v).map_err(err)?,
                "eval_points_degree" => cfg.eval_points_degree = scalar(v).map_err(err)?,
                "timing" => cfg.timing = scalar(v).map_err(err)?,
                "out" => cfg.out = Some(PathBuf::from(v)),
                _ => unreachable!("key list checked above"),
            }
        }
        if let Some(k) = kappa {
            if entries.contains_key("kn") {
                return Err(Error::Config("give either kn or kappa, not both".into()));
            }
            cfg.kn = (k * cfg.n as f64).floor() as usize;
        }
        if model_degree.is_some() || model_seed.is_some() {
            match &mut cfg.model {
                ModelSource::Synthetic { degree, seed } => {
                    *degree = model_degree.unwrap_or(*degree);
                    *seed = model_seed.unwrap_or(*seed);
                }
                ModelSource::File(_) => {
                    return Err(Error::Config("model_degree and model_seed do not apply to model_file".into()))
                }
            }
        }
        if let Some(d) = delta {
            match &mut cfg.weights {
                WeightScheme::Localizing { delta } => *delta = d,
                WeightScheme::Constant => return Err(Error::Config("delta requires weights = localizing".into())),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.r > 0.0 && self.big_r > self.r && self.big_r.is_finite()) {
            return bad("need 0 < r < big_r");
        }
        if self.n == 0 || self.kn < self.n {
            return bad("need n ≥ 1 and kn ≥ n");
        }
        if self.rho.is_empty() || self.rho.iter().any(|&p| !(p > 0.0 && p <= 2.0)) {
            return bad("rho values must lie in (0, 2]");
        }
        for (name, l) in [("beta", &self.beta), ("alpha_tilde", &self.alpha_tilde), ("alpha_ratio", &self.alpha_ratio)] {
            if l.is_empty() || l.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::Config(format!("{name} values must be positive")));
            }
        }
        if self.epsilon1.is_empty() || self.gamma.is_empty() || self.epsilon1.iter().chain(&self.gamma).any(|&v| !(v >= 0.0)) {
            return bad("epsilon1 and gamma must be non-empty and nonnegative");
        }
        if self.shannon_m.iter().any(|&m| m > self.n) {
            return bad("shannon_m values must not exceed n");
        }
        if self.n_seeds == 0 {
            return bad("n_seeds must be at least 1");
        }
        if self.center.norm() == 0.0 {
            return bad("center must be a nonzero vector");
        }
        if let ModelSource::Synthetic { degree, .. } = self.model {
            if degree > self.noise_degree.max(self.kn) + 64 {
                return bad("model_degree is unreasonably large");
            }
        }
        Ok(())
    }

    pub fn geometry(&self, rho: f64) -> Result<Geometry> {
        Geometry::with_kn(self.r, self.big_r, self.n, self.kn, rho, self.case)
    }

    pub fn region(&self, rho: f64) -> Result<RegionSpec> {
        match self.data_rho {
            Some(d) => RegionSpec::new(self.center, d, rho),
            None => RegionSpec::with_default_data(self.center, rho),
        }
    }

    pub fn target_symbols(&self) -> Option<SymbolSet> {
        match self.target {
            Target::Shannon => None,
            Target::RaisedCosine => Some(raised_cosine_targets(self.kn)),
        }
    }

    /// Replicate seeds `seed, seed+1, …`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds as u64).map(|j| self.seed.wrapping_add(j)).collect()
    }

    /// The penalty-weight sweep as `(beta, alpha_tilde, alpha_ratio)` triples.
    pub fn weight_grid(&self) -> Vec<(f64, f64, f64)> {
        match self.weights {
            WeightScheme::Constant => {
                let mut out = Vec::new();
                for &b in &self.beta {
                    for &a in &self.alpha_tilde {
                        for &q in &self.alpha_ratio {
                            out.push((b, a, q));
                        }
                    }
                }
                out
            }
            WeightScheme::Localizing { .. } => self.beta.iter().map(|&b| (b, f64::NAN, 1.0)).collect(),
        }
    }

    pub fn penalty_weights(&self, g: &Geometry, beta: f64, alpha_tilde: f64, ratio: f64) -> Result<PenaltyWeights> {
        match self.weights {
            WeightScheme::Constant => PenaltyWeights::constant(g, ratio * alpha_tilde, alpha_tilde, beta),
            WeightScheme::Localizing { delta } => PenaltyWeights::localizing(g, beta, delta),
        }
    }

    /// The first entry of each sweep list, used by single-run commands.
    pub fn first_weights(&self, g: &Geometry) -> Result<PenaltyWeights> {
        let (b, a, q) = self.weight_grid()[0];
        self.penalty_weights(g, b, a, q)
    }
}

fn scalar<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.trim().parse().map_err(|_| format!("cannot parse `{v}`"))
}

fn list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(scalar).collect()
}

/// `U⁺` on the radius `r`.
pub fn build_model(source: &ModelSource, r: f64) -> Result<HarmonicCoefficients> {
    match source {
        ModelSource::Synthetic { degree, seed } => {
            let mut rng = ChaCha20Rng::seed_from_u64(*seed);
            let mut data = Vec::with_capacity(num_coeffs(*degree));
            for n in 0..=*degree {
                let s = 1.0 / (n.max(1) as f64);
                for _ in 0..2 * n + 1 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    data.push(z * s);
                }
            }
            HarmonicCoefficients::from_vec(r, *degree, data)
        }
        ModelSource::File(path) => {
            let m = HarmonicCoefficients::load(path)?;
            if ((m.radius - r) / r).abs() > 1e-9 {
                return Err(Error::Config(format!("model radius {} does not match r = {r}", m.radius)));
            }
            Ok(m)
        }
    }
}

/// How a row's approximation was formed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Optimized { beta: f64, alpha_tilde: f64, alpha_ratio: f64 },
    Shannon(usize),
    Tsvd(usize),
}

impl Method {
    pub fn tag(&self) -> String {
        match self {
            Method::Optimized { .. } => "optimized".into(),
            Method::Shannon(m) => format!("shannon-{m}"),
            Method::Tsvd(m) => format!("tsvd-{m}"),
        }
    }

    /// Tag plus weights; unique within one noise setting.
    pub fn label(&self) -> String {
        match self {
            Method::Optimized { beta, alpha_tilde, alpha_ratio } => {
                format!("optimized beta={beta:e} alpha_tilde={alpha_tilde:e} alpha_ratio={alpha_ratio}")
            }
            _ => self.tag(),
        }
    }
}

/// One table cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub case: FieldKind,
    pub rho: f64,
    pub data_rho: f64,
    pub epsilon1: f64,
    pub gamma: f64,
    pub seed: u64,
    pub method: Method,
    pub error: f64,
    pub localization: f64,
    /// `ok` or the error message of a failed cell.
    pub status: String,
    pub wall_time: Option<f64>,
}

impl ResultRow {
    pub fn epsilon2(&self) -> f64 {
        self.gamma * self.epsilon1
    }
}

/// Per-degree multipliers of the error field: `a` on the model, `b` on the
/// satellite noise and `c` on the ground noise, each indexed by channel and degree.
struct ErrorMultipliers {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

/// Degree-block Gram matrices of (model, satellite noise, ground noise) on the
/// evaluation cap, one per channel.
struct BlockGram {
    l: usize,
    per_channel: Vec<DMatrix<f64>>,
}

impl BlockGram {
    fn error_sq(&self, m: &ErrorMultipliers) -> f64 {
        let dim = self.l + 1;
        let mut s = 0.0;
        for (ch, g) in self.per_channel.iter().enumerate() {
            let mut v = DVector::<f64>::zeros(3 * dim);
            for n in 0..dim {
                v[n] = m.a[ch][n];
                v[dim + n] = m.b[ch][n];
                v[2 * dim + n] = m.c[ch][n];
            }
            s += v.dot(&(g * &v));
        }
        s
    }

    fn reference_sq(&self, model_degree: usize) -> f64 {
        let mut s = 0.0;
        for g in &self.per_channel {
            for n in 0..=model_degree {
                for m in 0..=model_degree {
                    s += g[(n, m)];
                }
            }
        }
        s
    }
}

/// Flat coefficient arrays of the three fields in one channel, padded to degree `l`.
type ChannelFields = [Vec<f64>; 3];

fn block_gram(fields: &[ChannelFields], radius: f64, l: usize, grid: &CapGrid) -> BlockGram {
    let dim = l + 1;
    let len = num_coeffs(l);
    let nch = fields.len();
    let partial: Vec<Vec<DMatrix<f64>>> = grid
        .nodes
        .par_chunks(64)
        .zip(grid.weights.par_chunks(64))
        .map(|(ns, ws)| {
            let mut acc = vec![DMatrix::<f64>::zeros(3 * dim, 3 * dim); nch];
            let mut y = vec![0.0; len];
            let mut grad = vec![Direction::zeros(); len];
            let mut vals = vec![Direction::zeros(); 3 * dim];
            for (p, &w) in ns.iter().zip(ws) {
                if nch == 1 {
                    eval_harmonics(l, p, &mut y);
                } else {
                    eval_harmonics_with_gradient(l, p, &mut y, &mut grad);
                }
                for (ch, f) in fields.iter().enumerate() {
                    for (j, coeffs) in f.iter().enumerate() {
                        for n in 0..dim {
                            let block = n * n..(n + 1) * (n + 1);
                            let v = if ch == 0 {
                                Direction::new(block.clone().map(|i| y[i] * coeffs[i]).sum::<f64>(), 0.0, 0.0)
                            } else if n == 0 {
                                Direction::zeros()
                            } else {
                                let s = 1.0 / ((n * (n + 1)) as f64).sqrt();
                                block.clone().map(|i| grad[i] * coeffs[i]).sum::<Direction>() * s
                            };
                            vals[j * dim + n] = v / radius;
                        }
                    }
                    let a = &mut acc[ch];
                    for i in 0..3 * dim {
                        let wi = vals[i] * w;
                        for k in i..3 * dim {
                            a[(i, k)] += wi.dot(&vals[k]);
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut per_channel = vec![DMatrix::<f64>::zeros(3 * dim, 3 * dim); nch];
    for p in partial {
        for (o, m) in per_channel.iter_mut().zip(p) {
            *o += m;
        }
    }
    for g in &mut per_channel {
        for i in 0..3 * dim {
            for k in 0..i {
                g[(i, k)] = g[(k, i)];
            }
        }
    }
    BlockGram { l, per_channel }
}

fn padded(data: &[f64], l: usize) -> Vec<f64> {
    let mut v = vec![0.0; num_coeffs(l)];
    let k = data.len().min(v.len());
    v[..k].copy_from_slice(&data[..k]);
    v
}

/// Model and noise of one replicate at one cap radius, with their block Gram.
struct Replicate {
    gram: BlockGram,
    reference_sq: f64,
}

/// Shared inputs of a run: the model and its continuation.
struct Prepared {
    cfg: ExperimentConfig,
    model: HarmonicCoefficients,
    l: usize,
}

impl Prepared {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let model = build_model(&cfg.model, cfg.r)?;
        let l = model.n_max.max(cfg.noise_degree).max(cfg.kn);
        Ok(Prepared { cfg: cfg.clone(), model, l })
    }

    fn replicate(&self, region: &RegionSpec, seed: u64) -> Result<Replicate> {
        let cfg = &self.cfg;
        let l = self.l;
        let extra = if cfg.case == FieldKind::Vector { 2 } else { 0 };
        let data_grid = region.data_grid(cfg.r, 2 * l + extra)?;
        let eval_grid = region.eval_grid(cfg.r, 2 * l + extra)?;
        let fields: Vec<ChannelFields> = match cfg.case {
            FieldKind::Scalar => {
                let f1 = continue_with(&self.model, cfg.big_r, FieldKind::Scalar)?;
                let e1 = scaled_noise(&f1, cfg.noise_degree, seed, NormRegion::Sphere)?;
                let e2 = scaled_noise(&self.model, cfg.noise_degree, seed, NormRegion::Cap(&data_grid))?;
                // The satellite noise enters through Φ, whose output lives on radius r.
                vec![[padded(self.model.data(), l), padded(e1.data(), l), padded(e2.data(), l)]]
            }
            FieldKind::Vector => {
                let b = gradient_of(&self.model);
                let f1 = vector_upward_continue(&b, cfg.big_r)?;
                let e1 = vector_scaled_noise(&f1, cfg.noise_degree, seed, NormRegion::Sphere)?;
                let e2 = vector_scaled_noise(&b, cfg.noise_degree, seed, NormRegion::Cap(&data_grid))?;
                (1..=2u8)
                    .map(|i| [padded(b.channel(i), l), padded(e1.channel(i), l), padded(e2.channel(i), l)])
                    .collect()
            }
        };
        let gram = block_gram(&fields, cfg.r, l, &eval_grid);
        let reference_sq = gram.reference_sq(self.model.n_max);
        Ok(Replicate { gram, reference_sq })
    }

    fn channels(&self) -> usize {
        match self.cfg.case {
            FieldKind::Scalar => 1,
            FieldKind::Vector => 2,
        }
    }

    /// Multipliers of `T_N + W̃_N` for a pair, per channel.
    fn pair_multipliers(&self, pair: &KernelPair, rho: f64, eps1: f64, eps2: f64) -> Result<ErrorMultipliers> {
        let g = &pair.geometry;
        let l = self.l;
        let lambdas = match g.kind {
            FieldKind::Scalar => vec![cap_multipliers(&pair.psi_tilde, rho, l)?],
            FieldKind::Vector => {
                let (l1, l2) = vector_cap_multipliers(&pair.psi_tilde, rho, l)?;
                vec![l1, l2]
            }
        };
        let mut m = ErrorMultipliers { a: vec![], b: vec![], c: vec![] };
        for lam in lambdas {
            let phi: Vec<f64> = (0..=l).map(|n| pair.phi.value(n)).collect();
            m.a.push((0..=l).map(|n| phi[n] * g.sigma(n) + lam[n] - 1.0).collect());
            m.b.push(phi.iter().map(|p| eps1 * p).collect());
            m.c.push(lam.iter().map(|x| eps2 * x).collect());
        }
        Ok(m)
    }

    fn tsvd_multipliers(&self, g: &Geometry, m: usize, eps1: f64) -> ErrorMultipliers {
        let s = tsvd_symbols(g, m);
        let a: Vec<f64> = (0..=self.l).map(|n| if n <= m { 0.0 } else { -1.0 }).collect();
        let b: Vec<f64> = (0..=self.l).map(|n| eps1 * s.value(n)).collect();
        let ch = self.channels();
        let mut b_ch = vec![b; ch];
        let mut a_ch = vec![a; ch];
        if ch == 2 {
            a_ch[1][0] = 0.0;
            b_ch[1][0] = 0.0;
        }
        ErrorMultipliers { a: a_ch, b: b_ch, c: vec![vec![0.0; self.l + 1]; ch] }
    }
}

struct MethodKernel {
    method: Method,
    pair: std::result::Result<KernelPair, String>,
    localization: f64,
}

fn kernels_for(cfg: &ExperimentConfig, g: &Geometry) -> Result<Vec<MethodKernel>> {
    let gm = gram(g.kind, g.kn, g.rho.min(2.0 - 1e-15))?;
    let targets = cfg.target_symbols();
    let mut out: Vec<MethodKernel> = cfg
        .weight_grid()
        .into_par_iter()
        .map(|(beta, alpha_tilde, alpha_ratio)| {
            let method = Method::Optimized { beta, alpha_tilde, alpha_ratio };
            let pair = cfg
                .penalty_weights(g, beta, alpha_tilde, alpha_ratio)
                .and_then(|w| optimize_with_gram(g, &w, targets.as_ref(), &gm))
                .map_err(|e| e.to_string());
            MethodKernel { method, pair, localization: f64::NAN }
        })
        .collect();
    for &m in &cfg.shannon_m {
        out.push(MethodKernel { method: Method::Shannon(m), pair: Ok(shannon_pair_with_cutoff(g, m)), localization: f64::NAN });
    }
    for k in &mut out {
        if let Ok(p) = &k.pair {
            k.localization = if g.rho >= 2.0 { 1.0 } else { localization_ratio(&p.psi_tilde, g.rho, g.kind)? };
        }
    }
    Ok(out)
}

fn row_error(rep: &Replicate, m: &ErrorMultipliers) -> f64 {
    (rep.gram.error_sq(m).max(0.0) / rep.reference_sq).sqrt()
}

/// Runs the combined-data protocol: optimized and Shannon-type pairs for every
/// cap radius, noise setting and replicate. Rows come out sorted by
/// (ρ, ε₁, γ, seed, method) in the order of the config lists.
pub fn run_table(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let prep = Prepared::new(cfg)?;
    let mut rows = Vec::new();
    for &rho in &cfg.rho {
        let g = cfg.geometry(rho)?;
        let region = cfg.region(rho)?;
        let kernels = kernels_for(cfg, &g)?;
        for seed in cfg.seeds() {
            let rep = prep.replicate(&region, seed);
            for &eps1 in &cfg.epsilon1 {
                for &gamma in &cfg.gamma {
                    for k in &kernels {
                        let start = Instant::now();
                        let result = match (&rep, &k.pair) {
                            (Err(e), _) => Err(e.to_string()),
                            (_, Err(e)) => Err(e.clone()),
                            (Ok(rep), Ok(pair)) => prep
                                .pair_multipliers(pair, rho, eps1, gamma * eps1)
                                .map(|m| row_error(rep, &m))
                                .map_err(|e| e.to_string()),
                        };
                        rows.push(make_row(cfg, rho, &region, eps1, gamma, seed, k.method, k.localization, result, start));
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Satellite-only truncated inversion for every `M` in `tsvd_m`. The ground
/// data are not used, so the rows carry `γ = 0`.
pub fn run_tsvd_table(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let prep = Prepared::new(cfg)?;
    let mut rows = Vec::new();
    for &rho in &cfg.rho {
        let g = cfg.geometry(rho)?;
        let region = cfg.region(rho)?;
        for seed in cfg.seeds() {
            let rep = prep.replicate(&region, seed);
            for &eps1 in &cfg.epsilon1 {
                for &m in &cfg.tsvd_m {
                    let start = Instant::now();
                    let result = match &rep {
                        Err(e) => Err(e.to_string()),
                        Ok(rep) => Ok(row_error(rep, &prep.tsvd_multipliers(&g, m, eps1))),
                    };
                    rows.push(make_row(cfg, rho, &region, eps1, 0.0, seed, Method::Tsvd(m), f64::NAN, result, start));
                }
            }
        }
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn make_row(
    cfg: &ExperimentConfig,
    rho: f64,
    region: &RegionSpec,
    epsilon1: f64,
    gamma: f64,
    seed: u64,
    method: Method,
    localization: f64,
    result: std::result::Result<f64, String>,
    start: Instant,
) -> ResultRow {
    let (error, status) = match result {
        Ok(e) => (e, "ok".to_string()),
        Err(msg) => (f64::NAN, msg),
    };
    ResultRow {
        case: cfg.case,
        rho,
        data_rho: region.data_rho,
        epsilon1,
        gamma,
        seed,
        method,
        error,
        localization,
        status,
        wall_time: cfg.timing.then(|| start.elapsed().as_secs_f64()),
    }
}

fn opt_field(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        fmt17(x)
    }
}

/// Writes rows as CSV; the `wall_time_s` column is present only when timing is on.
pub fn write_rows_csv<W: Write>(rows: &[ResultRow], timing: bool, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec![
        "case", "rho", "data_rho", "epsilon1", "gamma", "epsilon2", "seed", "method", "m", "beta", "alpha_tilde",
        "alpha_ratio", "relative_error", "localization_ratio", "status",
    ];
    if timing {
        header.push("wall_time_s");
    }
    out.write_record(&header)?;
    for r in rows {
        let (m, beta, at, ar) = match r.method {
            Method::Optimized { beta, alpha_tilde, alpha_ratio } => {
                (String::new(), fmt17(beta), opt_field(alpha_tilde), fmt17(alpha_ratio))
            }
            Method::Shannon(m) | Method::Tsvd(m) => (m.to_string(), String::new(), String::new(), String::new()),
        };
        let mut rec = vec![
            r.case.as_str().to_string(),
            fmt17(r.rho),
            fmt17(r.data_rho),
            fmt17(r.epsilon1),
            fmt17(r.gamma),
            fmt17(r.epsilon2()),
            r.seed.to_string(),
            r.method.tag(),
            m,
            beta,
            at,
            ar,
            opt_field(r.error),
            opt_field(r.localization),
            r.status.clone(),
        ];
        if timing {
            rec.push(r.wall_time.map(fmt17).unwrap_or_default());
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Median relative error over replicates, keyed by
/// `(ρ, ε₁, γ, method label)` with floats as bit patterns. Failed cells are skipped.
pub fn median_errors(rows: &[ResultRow]) -> BTreeMap<(u64, u64, u64, String), f64> {
    let mut groups: BTreeMap<(u64, u64, u64, String), Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.error.is_finite()) {
        groups
            .entry((r.rho.to_bits(), r.epsilon1.to_bits(), r.gamma.to_bits(), r.method.label()))
            .or_default()
            .push(r.error);
    }
    groups.into_iter().map(|(k, v)| (k, median(v))).collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// The best median error among methods whose label starts with `prefix`,
/// per `(ρ, ε₁, γ)`, with the winning label.
pub fn best_by_prefix(rows: &[ResultRow], prefix: &str) -> BTreeMap<(u64, u64, u64), (f64, String)> {
    let mut out: BTreeMap<(u64, u64, u64), (f64, String)> = BTreeMap::new();
    for ((rho, e, g, label), v) in median_errors(rows) {
        if !label.starts_with(prefix) {
            continue;
        }
        let slot = out.entry((rho, e, g)).or_insert((f64::INFINITY, String::new()));
        if v < slot.0 {
            *slot = (v, label);
        }
    }
    out
}

/// Distinct `(ρ, ε₁, γ)` settings of a table, as floats.
pub fn settings(rows: &[ResultRow]) -> BTreeSet<(u64, u64, u64)> {
    rows.iter().map(|r| (r.rho.to_bits(), r.epsilon1.to_bits(), r.gamma.to_bits())).collect()
}

/// Per-degree `n, Φ^∧σ_n, Φ̃^∧, Ψ̃^∧` of a pair as CSV.
pub fn export_spectra<W: Write>(pair: &KernelPair, w: W) -> Result<()> {
    write_symbols_spectra(pair, w)
}

fn write_symbols_spectra<W: Write>(pair: &KernelPair, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "phi_sigma", "phi_tilde", "psi_tilde"])?;
    let ps = pair.phi_sigma();
    for n in 0..=pair.geometry.kn {
        out.write_record([
            n.to_string(),
            fmt17(ps.get(n).copied().unwrap_or(0.0)),
            fmt17(pair.phi_tilde.value(n)),
            fmt17(pair.psi_tilde.value(n)),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a spectra CSV back as `(n, phi_sigma, phi_tilde, psi_tilde)` rows.
pub fn read_spectra<R: std::io::Read>(r: R) -> Result<Vec<(usize, f64, f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse { line: out.len() + 2, message: format!("bad field {i}") })
        };
        let n = f(0)? as usize;
        out.push((n, f(1)?, f(2)?, f(3)?));
    }
    Ok(out)
}

/// The optimized pair for the first cap radius and the first weights.
pub fn optimized_pair(cfg: &ExperimentConfig) -> Result<KernelPair> {
    let g = cfg.geometry(cfg.rho[0])?;
    let w = cfg.first_weights(&g)?;
    let gm = gram(g.kind, g.kn, g.rho.min(2.0 - 1e-15))?;
    optimize_with_gram(&g, &w, cfg.target_symbols().as_ref(), &gm)
}

/// Writes the Gram matrix for the first cap radius as `n,m,value` rows.
pub fn write_gram_csv<W: Write>(cfg: &ExperimentConfig, w: W) -> Result<()> {
    let g = cfg.geometry(cfg.rho[0])?;
    let gm: GramMatrix = gram(g.kind, g.kn, g.rho.min(2.0 - 1e-15))?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "m", "value"])?;
    for n in 0..=gm.n_max {
        for m in 0..=gm.n_max {
            out.write_record([n.to_string(), m.to_string(), fmt17(gm.get(n, m))])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Functional value of the Shannon pair and its closed-form bound, for the
/// first cap radius and weights.
pub fn shannon_summary(cfg: &ExperimentConfig) -> Result<(KernelPair, f64, f64)> {
    let g = cfg.geometry(cfg.rho[0])?;
    let w = cfg.first_weights(&g)?;
    let gm = gram(g.kind, g.kn, g.rho.min(2.0 - 1e-15))?;
    let pair = shannon_pair(&g);
    let f = functional_value(&pair, &w, &gm, cfg.target_symbols().as_ref())?;
    Ok((pair, f, shannon_bound(&g, w.beta)))
}

/// Writes `n,phi,sigma` for the truncated inversion at `tsvd_m[0]`.
pub fn write_tsvd_csv<W: Write>(cfg: &ExperimentConfig, w: W) -> Result<()> {
    let g = cfg.geometry(cfg.rho[0])?;
    let m = *cfg.tsvd_m.first().ok_or_else(|| Error::Config("tsvd_m is empty".into()))?;
    let s = tsvd_symbols(&g, m);
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "phi", "sigma"])?;
    for n in 0..=m {
        out.write_record([n.to_string(), fmt17(s.value(n)), fmt17(g.sigma(n))])?;
    }
    out.flush()?;
    Ok(())
}

/// Result of a pointwise approximation run.
#[derive(Clone, Debug)]
pub struct PointwiseRun {
    pub points: Vec<Direction>,
    /// Reference and approximation; vector runs store field lengths.
    pub reference: Vec<f64>,
    pub approx: Vec<f64>,
    /// Relative error from the quadrature route on the point grid.
    pub error: f64,
    /// Same error for the coefficient-space route.
    pub spectral_error: f64,
}

/// Evaluates the optimized approximation by quadrature at the nodes of a small
/// evaluation-cap grid, for the first radius, weights, noise levels and seed.
pub fn run_approximate(cfg: &ExperimentConfig) -> Result<PointwiseRun> {
    let rho = cfg.rho[0];
    let pair = optimized_pair(cfg)?;
    let g = pair.geometry;
    let region = cfg.region(rho)?;
    let model = build_model(&cfg.model, cfg.r)?;
    let l = model.n_max.max(cfg.noise_degree);
    let eps1 = cfg.epsilon1[0];
    let eps2 = cfg.gamma[0] * eps1;
    let seed = cfg.seed;
    let pts_grid = region.eval_grid(cfg.r, cfg.eval_points_degree)?;
    match cfg.case {
        FieldKind::Scalar => {
            let f1_clean = continue_with(&model, cfg.big_r, FieldKind::Scalar)?;
            let data_grid = region.data_grid(cfg.r, 2 * l)?;
            let e1 = scaled_noise(&f1_clean, cfg.noise_degree, seed, NormRegion::Sphere)?;
            let e2 = scaled_noise(&model, cfg.noise_degree, seed, NormRegion::Cap(&data_grid))?;
            let f1 = crate::transforms::axpy(&f1_clean, eps1, &e1);
            let f2 = crate::transforms::axpy(&model, eps2, &e2);
            let sat = sphere_grid(cfg.big_r, g.n + f1.n_max)?;
            let samples = synthesize(&f1, &sat.nodes);
            let approx = approximate(&pair, &sat, &samples, f1.n_max, &f2, &region, &pts_grid.nodes)?;
            let reference = synthesize(&model, &pts_grid.nodes);
            let error = relative_error(&reference, &approx, &pts_grid)?;
            let spec = approximate_spectral(&pair, &f1, &f2, rho)?;
            let spectral_error = relative_error(&reference, &synthesize(&spec, &pts_grid.nodes), &pts_grid)?;
            Ok(PointwiseRun { points: pts_grid.nodes.clone(), reference, approx, error, spectral_error })
        }
        FieldKind::Vector => {
            let b = gradient_of(&model);
            let f1_clean = vector_upward_continue(&b, cfg.big_r)?;
            let data_grid = region.data_grid(cfg.r, 2 * l + 2)?;
            let e1 = vector_scaled_noise(&f1_clean, cfg.noise_degree, seed, NormRegion::Sphere)?;
            let e2 = vector_scaled_noise(&b, cfg.noise_degree, seed, NormRegion::Cap(&data_grid))?;
            let f1 = f1_clean.axpy(eps1, &e1);
            let f2 = b.axpy(eps2, &e2);
            let sat = sphere_grid(cfg.big_r, g.n + f1.n_max + 2)?;
            let samples = vector_synthesize(&f1, &sat.nodes);
            let approx = vector_approximate(&pair, &sat, &samples, f1.n_max, &f2, &region, &pts_grid.nodes)?;
            let reference = vector_synthesize(&b, &pts_grid.nodes);
            let error = vector_relative_error(&reference, &approx, &pts_grid)?;
            let spec: VectorCoefficients = vector_approximate_spectral(&pair, &f1, &f2, rho)?;
            let spectral_error = vector_relative_error(&reference, &vector_synthesize(&spec, &pts_grid.nodes), &pts_grid)?;
            Ok(PointwiseRun {
                points: pts_grid.nodes.clone(),
                reference: reference.iter().map(|v| v.norm()).collect(),
                approx: approx.iter().map(|v| v.norm()).collect(),
                error,
                spectral_error,
            })
        }
    }
}

/// Writes a pointwise run as `x,y,z,reference,approx` rows.
pub fn write_pointwise_csv<W: Write>(run: &PointwiseRun, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "y", "z", "reference", "approx"])?;
    for ((p, a), b) in run.points.iter().zip(&run.reference).zip(&run.approx) {
        out.write_record([fmt17(p.x), fmt17(p.y), fmt17(p.z), fmt17(*a), fmt17(*b)])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the symbols of a pair as `n,phi,phi_tilde,psi_tilde`.
pub fn write_pair_csv<W: Write>(pair: &KernelPair, w: W) -> Result<()> {
    write_symbols_csv(pair, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig::parse(
            "n = 8\nkn = 10\nmodel_degree = 10\nnoise_degree = 12\nrho = 0.5\n\
             beta = 1\nalpha_tilde = 1000\nalpha_ratio = 1\nepsilon1 = 0.05\ngamma = 1\n\
             shannon_m = 0, 8\ntsvd_m = 6, 8\nn_seeds = 2\n",
        )
        .unwrap()
    }

    #[test]
    fn parse_defaults_and_errors() {
        let c = ExperimentConfig::parse("# comment only\n").unwrap();
        assert_eq!(c, ExperimentConfig::reduced());
        let f = ExperimentConfig::parse("profile = full\n").unwrap();
        assert_eq!((f.n, f.kn, f.noise_degree), (80, 100, 110));
        assert_eq!(f.weight_grid().len(), 6 * 8 * 2);
        assert!(matches!(ExperimentConfig::parse("bogus = 1\n"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("n = 3\nn = 4\n"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("rho = 3\n"), Err(Error::Config(_))));
        let k = ExperimentConfig::parse("n = 80\nkappa = 1.26\n").unwrap();
        assert_eq!(k.kn, 100);
        let v = ExperimentConfig::parse("case = vector\nweights = localizing\ndelta = 0.25 # inline\n").unwrap();
        assert_eq!(v.case, FieldKind::Vector);
        assert_eq!(v.weights, WeightScheme::Localizing { delta: 0.25 });
    }

    #[test]
    fn synthetic_model() {
        let a = build_model(&ModelSource::Synthetic { degree: 0, seed: 3 }, 1.0).unwrap();
        let b = build_model(&ModelSource::Synthetic { degree: 0, seed: 3 }, 1.0).unwrap();
        assert_eq!(a.data().len(), 1);
        assert_eq!(a, b);
        let c = build_model(&ModelSource::Synthetic { degree: 100, seed: 3 }, 1.0).unwrap();
        let d = build_model(&ModelSource::Synthetic { degree: 100, seed: 4 }, 1.0).unwrap();
        assert!(c.l2_norm().is_finite() && c != d);
    }

    #[test]
    fn block_quadratic_form_matches_direct_error() {
        let cfg = tiny();
        let prep = Prepared::new(&cfg).unwrap();
        let g = cfg.geometry(0.5).unwrap();
        let region = cfg.region(0.5).unwrap();
        let pair = optimized_pair(&cfg).unwrap();
        let rep = prep.replicate(&region, cfg.seed).unwrap();
        let m = prep.pair_multipliers(&pair, 0.5, 0.05, 0.05).unwrap();
        let fast = row_error(&rep, &m);

        let l = prep.l;
        let data_grid = region.data_grid(cfg.r, 2 * l).unwrap();
        let f1c = continue_with(&prep.model, cfg.big_r, FieldKind::Scalar).unwrap();
        let e1 = scaled_noise(&f1c, cfg.noise_degree, cfg.seed, NormRegion::Sphere).unwrap();
        let e2 = scaled_noise(&prep.model, cfg.noise_degree, cfg.seed, NormRegion::Cap(&data_grid)).unwrap();
        let f1 = crate::transforms::axpy(&f1c, 0.05, &e1);
        let f2 = crate::transforms::axpy(&prep.model, 0.05, &e2);
        let approx = approximate_spectral(&pair, &f1, &f2, 0.5).unwrap();
        let eval = region.eval_grid(cfg.r, 2 * l).unwrap();
        let direct = crate::transforms::relative_error_fields(&prep.model, &approx, &eval).unwrap();
        assert!((fast - direct).abs() < 1e-10 * direct, "{fast} {direct}");
        assert_eq!(g.kn, 10);
    }

    #[test]
    fn vector_block_form_matches_direct_error() {
        let mut cfg = tiny();
        cfg.case = FieldKind::Vector;
        let prep = Prepared::new(&cfg).unwrap();
        let region = cfg.region(0.5).unwrap();
        let pair = optimized_pair(&cfg).unwrap();
        let rep = prep.replicate(&region, cfg.seed).unwrap();
        let m = prep.pair_multipliers(&pair, 0.5, 0.05, 0.1).unwrap();
        let fast = row_error(&rep, &m);

        let l = prep.l;
        let b = gradient_of(&prep.model);
        let data_grid = region.data_grid(cfg.r, 2 * l + 2).unwrap();
        let f1c = vector_upward_continue(&b, cfg.big_r).unwrap();
        let e1 = vector_scaled_noise(&f1c, cfg.noise_degree, cfg.seed, NormRegion::Sphere).unwrap();
        let e2 = vector_scaled_noise(&b, cfg.noise_degree, cfg.seed, NormRegion::Cap(&data_grid)).unwrap();
        let approx = vector_approximate_spectral(&pair, &f1c.axpy(0.05, &e1), &b.axpy(0.1, &e2), 0.5).unwrap();
        let eval = region.eval_grid(cfg.r, 2 * l + 2).unwrap();
        let direct = vector_relative_error(
            &vector_synthesize(&b, &eval.nodes),
            &vector_synthesize(&approx, &eval.nodes),
            &eval,
        )
        .unwrap();
        assert!((fast - direct).abs() < 1e-10 * direct, "{fast} {direct}");
    }

    #[test]
    fn tables_are_keyed_and_deterministic() {
        let cfg = tiny();
        let rows = run_table(&cfg).unwrap();
        assert_eq!(rows.len(), 2 * (1 + 2));
        assert!(rows.iter().all(|r| r.status == "ok" && r.error >= 0.0));
        let mut keys: Vec<String> = rows.iter().map(|r| format!("{} {}", r.seed, r.method.label())).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), rows.len());
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_rows_csv(&rows, false, &mut a).unwrap();
        write_rows_csv(&run_table(&cfg).unwrap(), false, &mut b).unwrap();
        assert_eq!(a, b);
        let t = run_tsvd_table(&cfg).unwrap();
        assert_eq!(t.len(), 2 * 2);
    }

    #[test]
    fn exact_recovery_cell() {
        let cfg = ExperimentConfig::parse(
            "n = 8\nkn = 10\nmodel_degree = 10\nnoise_degree = 10\nrho = 2\nepsilon1 = 0\ngamma = 1\n\
             beta = 1\nalpha_tilde = 1\nalpha_ratio = 1\nshannon_m = 8\ntsvd_m = 10\nn_seeds = 1\n",
        )
        .unwrap();
        let rows = run_table(&cfg).unwrap();
        let sh = rows.iter().find(|r| r.method == Method::Shannon(8)).unwrap();
        assert!(sh.error < 1e-8, "{}", sh.error);
        let t = run_tsvd_table(&cfg).unwrap();
        assert!(t[0].error < 1e-8);
    }

    #[test]
    fn spectra_round_trip() {
        let g = Geometry::with_kn(1.0, 1.1, 5, 7, 0.5, FieldKind::Scalar).unwrap();
        let pair = shannon_pair(&g);
        let mut buf = Vec::new();
        export_spectra(&pair, &mut buf).unwrap();
        let rows = read_spectra(&buf[..]).unwrap();
        assert_eq!(rows.len(), 8);
        for (n, ps, pt, psi) in rows {
            assert_eq!(pt, 1.0);
            let expect = if n <= 5 { (1.0, 0.0) } else { (0.0, 1.0) };
            assert!((ps - expect.0).abs() < 1e-15 && (psi - expect.1).abs() < 1e-15);
        }
    }
}
