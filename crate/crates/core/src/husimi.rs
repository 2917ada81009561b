//! Husimi functions on `CP^{D-1}` and the localization measures built on them:
//! `nu`-moments, Wehrl and Renyi-Wehrl entropies, hump counting and grid slices.
//!
//! Integrals are over the Fubini-Study measure normalized so that coherent
//! states resolve the identity, i.e. total volume `binom(N+D-1, D-1)`. Monte
//! Carlo estimates are `dim * E[f]` under the normalized Haar measure, or an
//! importance-weighted version of it.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::coherent::{PhasePoint, SymmetricState};
use crate::error::{Error, Result};
use crate::fock::{basis_dimension, ln_factorial, log_multinomial, FockBasis, DEFAULT_CAPACITY};
use crate::parity::{apply_parity_flip, ParityLabel};

/// `Q` is clamped to this before taking logarithms.
pub const Q_FLOOR: f64 = 1e-300;

/// Minimum number of samples an [`IntegrationSpec`] accepts.
pub const MIN_SAMPLES: usize = 1000;

/// Fraction of the importance proposal drawn from the Haar measure.
pub const DEFENSIVE_FRACTION: f64 = 0.1;

/// Maxima below this fraction of the global maximum are not counted as humps.
pub const HUMP_FLOOR: f64 = 1e-2;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Fast evaluator of `Q_psi(u) = |<u|psi>|^2` at unit homogeneous vectors `u`.
///
/// Only the nonzero coefficients of `psi` are kept, pre-multiplied by the
/// coherent-state weights `sqrt(N!/prod n_i!)`.
#[derive(Clone, Debug)]
pub struct HusimiFunction {
    levels: usize,
    particles: usize,
    occupations: Vec<u32>,
    terms: Terms,
}

#[derive(Clone, Debug)]
enum Terms {
    Direct(Vec<Complex64>),
    // (log-modulus, phase) of each weighted coefficient; used when the weights overflow
    Log(Vec<(f64, f64)>),
}

impl HusimiFunction {
    pub fn new(state: &SymmetricState) -> Self {
        let basis = state.basis();
        let mut occupations = Vec::new();
        let mut logs = Vec::new();
        for (n, &c) in basis.iter().zip(state.coeffs()) {
            if c == ZERO {
                continue;
            }
            occupations.extend_from_slice(n.entries());
            logs.push((0.5 * log_multinomial(n) + c.norm().ln(), c.arg()));
        }
        let overflow = logs.iter().any(|&(m, _)| m > 650.0);
        let terms = if overflow {
            Terms::Log(logs)
        } else {
            Terms::Direct(logs.into_iter().map(|(m, p)| Complex64::from_polar(m.exp(), p)).collect())
        };
        Self {
            levels: basis.levels(),
            particles: basis.particles() as usize,
            occupations,
            terms,
        }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// `<u|psi>` for a unit vector `u`; `powers` is caller-owned scratch.
    pub fn amplitude(&self, u: &[Complex64], powers: &mut Vec<Complex64>) -> Complex64 {
        let d = self.levels;
        let stride = self.particles + 1;
        match &self.terms {
            Terms::Direct(weighted) => {
                powers.clear();
                powers.resize(d * stride, ONE);
                for (i, ui) in u.iter().enumerate() {
                    let conj = ui.conj();
                    let row = &mut powers[i * stride..(i + 1) * stride];
                    for k in 1..stride {
                        row[k] = row[k - 1] * conj;
                    }
                }
                let mut acc = ZERO;
                for (occ, w) in self.occupations.chunks_exact(d).zip(weighted) {
                    let mut t = *w;
                    for (i, &k) in occ.iter().enumerate() {
                        if k > 0 {
                            t *= powers[i * stride + k as usize];
                        }
                    }
                    acc += t;
                }
                acc
            }
            Terms::Log(logs) => {
                let lu: Vec<(f64, f64)> = u.iter().map(|c| (c.norm().ln(), -c.arg())).collect();
                let mut acc = ZERO;
                for (occ, &(m, p)) in self.occupations.chunks_exact(d).zip(logs) {
                    let (mut lm, mut ph) = (m, p);
                    for (i, &k) in occ.iter().enumerate() {
                        if k > 0 {
                            lm += k as f64 * lu[i].0;
                            ph += k as f64 * lu[i].1;
                        }
                    }
                    acc += Complex64::from_polar(lm.exp(), ph);
                }
                acc
            }
        }
    }

    pub fn value_at_unit(&self, u: &[Complex64], powers: &mut Vec<Complex64>) -> f64 {
        self.amplitude(u, powers).norm_sqr().min(1.0)
    }

    pub fn value(&self, z: &PhasePoint) -> f64 {
        let mut scratch = Vec::new();
        self.value_at_unit(&z.unit_vector(), &mut scratch)
    }
}

/// `Q_psi(z) = |<z|psi>|^2`.
pub fn husimi_value(state: &SymmetricState, z: &PhasePoint) -> Result<f64> {
    if z.levels() != state.levels() {
        return Err(Error::DimensionMismatch {
            expected: state.levels() - 1,
            found: z.coords().len(),
        });
    }
    Ok(HusimiFunction::new(state).value(z))
}

fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random unit vector in `C^D` whose level-0 component is not negligible.
pub fn haar_unit(levels: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    loop {
        let c: Vec<Complex64> = (0..levels).map(|_| complex_gaussian(rng)).collect();
        let norm_sqr: f64 = c.iter().map(|x| x.norm_sqr()).sum();
        if c[0].norm_sqr() >= 1e-12 * norm_sqr {
            let inv = norm_sqr.sqrt().recip();
            return c.into_iter().map(|x| x * inv).collect();
        }
    }
}

/// Haar-uniform point of `CP^{D-1}` via complex-Gaussian ratios `z_j = c_j / c_0`.
pub fn haar_sample(levels: usize, rng: &mut impl Rng) -> PhasePoint {
    let u = haar_unit(levels, rng);
    PhasePoint::from_homogeneous(&u).expect("level-0 component bounded away from zero")
}

/// Draws `u` with density `dim * |<w|u>|^{2N}` relative to Haar.
fn coherent_unit(w: &[Complex64], beta: &Beta<f64>, rng: &mut impl Rng) -> Vec<Complex64> {
    let t = beta.sample(rng);
    let levels = w.len();
    let v = loop {
        let mut g: Vec<Complex64> = (0..levels).map(|_| complex_gaussian(rng)).collect();
        let proj: Complex64 = w.iter().zip(&g).map(|(a, b)| a.conj() * b).sum();
        for (gi, wi) in g.iter_mut().zip(w) {
            *gi -= proj * wi;
        }
        let norm = g.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 {
            break g.into_iter().map(|x| x / norm).collect::<Vec<_>>();
        }
    };
    let (a, b) = (t.sqrt(), (1.0 - t).max(0.0).sqrt());
    w.iter().zip(&v).map(|(wi, vi)| wi * a + vi * b).collect()
}

/// Monte Carlo scheme.
#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    /// Uniform sampling from the Fubini-Study measure.
    Haar,
    /// Mixture of coherent-state Husimi densities centred on `centers`, plus a
    /// defensive Haar component.
    Importance { centers: Vec<PhasePoint> },
}

impl Method {
    pub fn tag(&self) -> MethodTag {
        match self {
            Method::Haar => MethodTag::HaarMc,
            Method::Importance { .. } => MethodTag::ImportanceMc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodTag {
    Analytic,
    HaarMc,
    ImportanceMc,
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodTag::Analytic => "analytic",
            MethodTag::HaarMc => "haar_mc",
            MethodTag::ImportanceMc => "importance_mc",
        })
    }
}

impl FromStr for MethodTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(MethodTag::Analytic),
            "haar_mc" | "haar" => Ok(MethodTag::HaarMc),
            "importance_mc" | "importance" => Ok(MethodTag::ImportanceMc),
            other => Err(Error::InvalidParams(format!("unknown integration method `{other}`"))),
        }
    }
}

/// Sampling plan for Monte Carlo integrals.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationSpec {
    pub method: Method,
    pub samples: usize,
    pub seed: u64,
    /// Samples per independent stream; streams run in parallel.
    pub batch: usize,
}

impl IntegrationSpec {
    pub fn haar(samples: usize, seed: u64) -> Self {
        Self {
            method: Method::Haar,
            samples,
            seed,
            batch: 1 << 14,
        }
    }

    pub fn importance(centers: Vec<PhasePoint>, samples: usize, seed: u64) -> Self {
        Self {
            method: Method::Importance { centers },
            samples,
            seed,
            batch: 1 << 14,
        }
    }

    fn validate(&self, levels: usize) -> Result<()> {
        if self.samples < MIN_SAMPLES {
            return Err(Error::InvalidParams(format!(
                "at least {MIN_SAMPLES} samples required, got {}",
                self.samples
            )));
        }
        if self.batch == 0 {
            return Err(Error::InvalidParams("batch size must be positive".into()));
        }
        if let Method::Importance { centers } = &self.method {
            if centers.is_empty() {
                return Err(Error::InvalidParams("importance sampling needs at least one center".into()));
            }
            if let Some(c) = centers.iter().find(|c| c.levels() != levels || !c.is_finite()) {
                return Err(Error::InvalidParams(format!("bad importance center {c:?}")));
            }
        }
        Ok(())
    }
}

/// The distinct sign-flipped copies `z^b` of a phase point: the branch points of its cats.
pub fn branch_points(z: &PhasePoint) -> Vec<PhasePoint> {
    let mut points: Vec<PhasePoint> = Vec::new();
    for b in ParityLabel::all(z.levels() - 1) {
        let p = apply_parity_flip(&b, z);
        if !points.contains(&p) {
            points.push(p);
        }
    }
    points
}

/// Running mean and variance (Welford), mergeable across batches.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean. For a plain sample mean this coincides
    /// with the leave-one-out jackknife estimate.
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Proposal density relative to normalized Haar measure.
struct Proposal {
    centers: Vec<Vec<Complex64>>,
    dim: f64,
    particles: f64,
    beta: Beta<f64>,
}

impl Proposal {
    fn new(centers: &[PhasePoint], levels: usize, particles: u32, dim: f64) -> Self {
        Self {
            centers: centers.iter().map(|c| c.unit_vector()).collect(),
            dim,
            particles: particles as f64,
            beta: Beta::new(particles as f64 + 1.0, (levels - 1) as f64).expect("valid beta parameters"),
        }
    }

    fn sample(&self, levels: usize, rng: &mut impl Rng) -> Vec<Complex64> {
        if rng.random::<f64>() < DEFENSIVE_FRACTION {
            haar_unit(levels, rng)
        } else {
            let k = rng.random_range(0..self.centers.len());
            coherent_unit(&self.centers[k], &self.beta, rng)
        }
    }

    fn density(&self, u: &[Complex64]) -> f64 {
        let mix: f64 = self
            .centers
            .iter()
            .map(|w| {
                let t: f64 = w.iter().zip(u).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr();
                if t > 0.0 {
                    (self.particles * t.min(1.0).ln()).exp()
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            / self.centers.len() as f64;
        DEFENSIVE_FRACTION + (1.0 - DEFENSIVE_FRACTION) * self.dim * mix
    }
}

fn total_measure(levels: usize, particles: u32) -> Result<f64> {
    basis_dimension(levels, particles)
        .map(|d| d as f64)
        .ok_or_else(|| Error::Capacity {
            requested: u128::MAX,
            cap: DEFAULT_CAPACITY as u128,
        })
}

/// `dim * E[g(Q)]` estimated per the sampling plan; `g` maps `Q` to the integrand.
pub fn integrate<F>(state: &SymmetricState, spec: &IntegrationSpec, g: F) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64 + Sync,
{
    let levels = state.levels();
    spec.validate(levels)?;
    let dim = total_measure(levels, state.particles())?;
    let husimi = HusimiFunction::new(state);
    let proposal = match &spec.method {
        Method::Haar => None,
        Method::Importance { centers } => Some(Proposal::new(centers, levels, state.particles(), dim)),
    };
    let batches = spec.samples.div_ceil(spec.batch);
    let partials: Vec<Welford> = (0..batches)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(k as u64);
            let n = spec.batch.min(spec.samples - k * spec.batch);
            let mut acc = Welford::default();
            let mut scratch = Vec::new();
            for _ in 0..n {
                let x = match &proposal {
                    None => {
                        let u = haar_unit(levels, &mut rng);
                        dim * g(husimi.value_at_unit(&u, &mut scratch))
                    }
                    Some(p) => {
                        let u = p.sample(levels, &mut rng);
                        dim * g(husimi.value_at_unit(&u, &mut scratch)) / p.density(&u)
                    }
                };
                acc.push(x);
            }
            acc
        })
        .collect();
    let mut total = Welford::default();
    for p in &partials {
        total.merge(p);
    }
    if !total.mean().is_finite() {
        return Err(Error::Numerical("non-finite Monte Carlo estimate".into()));
    }
    Ok((total.mean(), total.std_error()))
}

/// A `nu`-moment `M_nu = int Q^nu dmu`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentReport {
    pub value: f64,
    /// Zero for analytic evaluations.
    pub std_error: f64,
    pub method: MethodTag,
}

/// Exact `M_nu` by expanding `P(w)^nu`, with `P` the coherent-state polynomial of `psi`.
///
/// Coefficients are carried in the normalized monomial basis
/// `w^k sqrt(|k|! / prod k_i!)`, in which the coefficients of `P` are the Fock
/// amplitudes themselves and each convolution weight is at most one.
pub fn moment_analytic(state: &SymmetricState, nu: u32) -> Result<MomentReport> {
    moment_analytic_with_capacity(state, nu, DEFAULT_CAPACITY)
}

pub fn moment_analytic_with_capacity(state: &SymmetricState, nu: u32, cap: usize) -> Result<MomentReport> {
    if nu < 1 {
        return Err(Error::InvalidParams("moment order must be at least 1".into()));
    }
    let levels = state.levels();
    let n = state.particles();
    let top = n
        .checked_mul(nu)
        .ok_or_else(|| Error::InvalidParams("N * nu overflows".into()))?;
    let top_dim = basis_dimension(levels, top).unwrap_or(u128::MAX);
    if top_dim > cap as u128 {
        return Err(Error::Capacity {
            requested: top_dim,
            cap: cap as u128,
        });
    }
    if nu == 1 {
        return Ok(MomentReport {
            value: state.norm().powi(2),
            std_error: 0.0,
            method: MethodTag::Analytic,
        });
    }

    let half_log_fact = |occ: &[u32]| 0.5 * occ.iter().map(|&k| ln_factorial(k)).sum::<f64>();
    let base = state.basis();
    let factor: Vec<(Vec<u32>, f64, Complex64)> = base
        .iter()
        .zip(state.coeffs())
        .filter(|(_, c)| **c != ZERO)
        .map(|(occ, &c)| (occ.entries().to_vec(), half_log_fact(occ.entries()), c))
        .collect();

    let mut current_basis: Arc<FockBasis> = base.clone();
    let mut current: Vec<Complex64> = state.coeffs().to_vec();
    for power in 2..=nu {
        let target = Arc::new(FockBasis::with_capacity(levels, n * power, cap)?);
        let a = n * (power - 1);
        let log_binom = ln_factorial(a + n) - ln_factorial(a) - ln_factorial(n);
        let target_half: Vec<f64> = target.iter().map(|k| half_log_fact(k.entries())).collect();
        let mut next = vec![ZERO; target.len()];
        let mut k = vec![0u32; levels];
        for (occ, &r) in current_basis.iter().zip(&current) {
            if r == ZERO {
                continue;
            }
            let h_r = half_log_fact(occ.entries());
            for (m, h_m, p) in &factor {
                for i in 0..levels {
                    k[i] = occ.entries()[i] + m[i];
                }
                let idx = target.rank_unchecked(&k);
                let w = (target_half[idx] - h_r - h_m - 0.5 * log_binom).exp();
                next[idx] += r * p * w;
            }
        }
        current_basis = target;
        current = next;
    }
    let sum: f64 = current.iter().map(|c| c.norm_sqr()).sum();
    let log_ratio = log_dimension(levels, n) - log_dimension(levels, top);
    Ok(MomentReport {
        value: log_ratio.exp() * sum,
        std_error: 0.0,
        method: MethodTag::Analytic,
    })
}

fn log_dimension(levels: usize, n: u32) -> f64 {
    let d = levels as u32 - 1;
    ln_factorial(n + d) - ln_factorial(n) - ln_factorial(d)
}

/// `M_nu` by Monte Carlo; `nu` may be any real greater than zero.
pub fn moment_mc(state: &SymmetricState, nu: f64, spec: &IntegrationSpec) -> Result<MomentReport> {
    if !(nu > 0.0) {
        return Err(Error::InvalidParams(format!("moment order {nu} must be positive")));
    }
    let (value, std_error) = integrate(state, spec, |q| q.max(0.0).powf(nu))?;
    Ok(MomentReport {
        value,
        std_error,
        method: spec.method.tag(),
    })
}

/// `S_W = -int Q ln Q dmu`, returned with its standard error.
pub fn wehrl_entropy(state: &SymmetricState, spec: &IntegrationSpec) -> Result<(f64, f64)> {
    integrate(state, spec, |q| {
        let q = q.max(Q_FLOOR);
        -q * q.ln()
    })
}

/// Moment backend for Renyi-Wehrl entropies.
#[derive(Clone, Debug, PartialEq)]
pub enum MomentBackend {
    Analytic,
    MonteCarlo(IntegrationSpec),
}

/// `S_nu = ln(M_nu) / (1 - nu)`. The analytic backend requires integer `nu`.
pub fn renyi_wehrl(state: &SymmetricState, nu: f64, backend: &MomentBackend) -> Result<f64> {
    if (nu - 1.0).abs() < f64::EPSILON {
        return Err(Error::InvalidParams("Renyi-Wehrl entropy is undefined at nu = 1".into()));
    }
    let m = match backend {
        MomentBackend::Analytic => {
            if nu.fract() != 0.0 || nu < 2.0 {
                return Err(Error::InvalidParams(format!(
                    "analytic moments need an integer order >= 2, got {nu}"
                )));
            }
            moment_analytic(state, nu as u32)?.value
        }
        MomentBackend::MonteCarlo(spec) => moment_mc(state, nu, spec)?.value,
    };
    if !(m > 0.0) {
        return Err(Error::Numerical(format!("non-positive moment {m}")));
    }
    Ok(m.ln() / (1.0 - nu))
}

/// `M_nu` of any coherent state: `(N nu)! / N! * (N+D-1)! / (N nu + D-1)!`.
pub fn dscs_moment(levels: usize, particles: u32, nu: u32) -> f64 {
    let d = levels as u32 - 1;
    let top = particles * nu;
    (ln_factorial(top) - ln_factorial(particles) + ln_factorial(particles + d) - ln_factorial(top + d)).exp()
}

/// Wehrl entropy of any coherent state: `N sum_{k=1}^{D-1} 1/(N+k)`.
pub fn dscs_wehrl(levels: usize, particles: u32) -> f64 {
    let n = particles as f64;
    (1..levels).map(|k| n / (n + k as f64)).sum()
}

/// Closed-form references.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitKind {
    /// Finite-`N` coherent-state moment; needs `particles`.
    DscsMoment,
    DscsMomentLimit,
    CatMomentLimit,
    CatMomentLimitReduced,
    /// Coherent-state Wehrl entropy; finite-`N` when `particles` is given.
    DscsWehrl,
    WehrlLimitCat,
    WehrlLimitReduced,
}

impl FromStr for LimitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "dscs_moment" => LimitKind::DscsMoment,
            "dscs_moment_limit" => LimitKind::DscsMomentLimit,
            "cat_moment_limit" => LimitKind::CatMomentLimit,
            "cat_moment_limit_reduced" => LimitKind::CatMomentLimitReduced,
            "dscs_wehrl" => LimitKind::DscsWehrl,
            "wehrl_limit_cat" => LimitKind::WehrlLimitCat,
            "wehrl_limit_reduced" => LimitKind::WehrlLimitReduced,
            other => return Err(Error::UnknownKind(other.to_string())),
        })
    }
}

/// Arguments of [`limit_reference`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitQuery {
    pub levels: usize,
    pub nu: f64,
    /// Number of nonzero cat coordinates `||z||_0`.
    pub nonzero: u32,
    /// Number of odd parities on vanishing coordinates `||c_L||_0`.
    pub odd_zero: u32,
    pub particles: Option<u32>,
}

impl LimitQuery {
    pub fn new(levels: usize, nu: f64) -> Self {
        Self {
            levels,
            nu,
            nonzero: levels as u32 - 1,
            odd_zero: 0,
            particles: None,
        }
    }
}

/// Thermodynamic-limit (and coherent-state) reference values.
pub fn limit_reference(kind: LimitKind, q: &LimitQuery) -> Result<f64> {
    if q.levels < 2 {
        return Err(Error::InvalidLevelCount(q.levels));
    }
    let d1 = (q.levels - 1) as f64;
    let area = q.nu.powf(-d1);
    let branches = |k: u32| 2f64.powi(k as i32).powf(1.0 - q.nu);
    Ok(match kind {
        LimitKind::DscsMoment => {
            let n = q
                .particles
                .ok_or_else(|| Error::InvalidParams("dscs_moment needs a particle number".into()))?;
            if q.nu.fract() != 0.0 || q.nu < 1.0 {
                return Err(Error::InvalidParams("dscs_moment needs an integer order".into()));
            }
            dscs_moment(q.levels, n, q.nu as u32)
        }
        LimitKind::DscsMomentLimit => area,
        LimitKind::CatMomentLimit => branches(q.levels as u32 - 1) * area,
        LimitKind::CatMomentLimitReduced => branches(q.nonzero + q.odd_zero) * area,
        LimitKind::DscsWehrl => match q.particles {
            Some(n) => dscs_wehrl(q.levels, n),
            None => d1,
        },
        LimitKind::WehrlLimitCat => d1 * (1.0 + std::f64::consts::LN_2),
        LimitKind::WehrlLimitReduced => d1 + (q.nonzero + q.odd_zero) as f64 * std::f64::consts::LN_2,
    })
}

/// Which real slice of phase space a grid covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slice {
    /// `z = x`, real.
    Position,
    /// `z = i p`, imaginary.
    Momentum,
}

impl FromStr for Slice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "position" | "x" => Ok(Slice::Position),
            "momentum" | "p" => Ok(Slice::Momentum),
            other => Err(Error::InvalidParams(format!("unknown slice `{other}`"))),
        }
    }
}

/// Square grid over the first two coordinates (the first only, for `D = 2`);
/// remaining coordinates are held at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub resolution: usize,
    pub slice: Slice,
}

impl GridSpec {
    pub fn new(half_width: f64, resolution: usize) -> Self {
        Self {
            min: -half_width,
            max: half_width,
            resolution,
            slice: Slice::Position,
        }
    }

    pub fn momentum(mut self) -> Self {
        self.slice = Slice::Momentum;
        self
    }

    pub fn axis(&self) -> Vec<f64> {
        let r = self.resolution;
        if r == 1 {
            return vec![0.5 * (self.min + self.max)];
        }
        (0..r)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (r - 1) as f64)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.resolution < 2 || !(self.max > self.min) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidParams(format!("bad grid {self:?}")));
        }
        Ok(())
    }

    fn point(&self, levels: usize, a: f64, b: f64) -> PhasePoint {
        let mut coords = vec![ZERO; levels - 1];
        let wrap = |v: f64| match self.slice {
            Slice::Position => Complex64::new(v, 0.0),
            Slice::Momentum => Complex64::new(0.0, v),
        };
        coords[0] = wrap(a);
        if levels > 2 {
            coords[1] = wrap(b);
        }
        PhasePoint::new(coords)
    }
}

/// One grid sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridRow {
    pub a: f64,
    pub b: f64,
    pub q: f64,
}

/// `Q` on the grid, first axis outer. For `D = 2` the second axis is degenerate (`b = 0`).
pub fn husimi_grid(state: &SymmetricState, grid: &GridSpec) -> Result<Vec<GridRow>> {
    grid.validate()?;
    let levels = state.levels();
    let husimi = HusimiFunction::new(state);
    let axis = grid.axis();
    let second = if levels > 2 { axis.clone() } else { vec![0.0] };
    let rows = axis
        .par_iter()
        .flat_map_iter(|&a| {
            let husimi = &husimi;
            let mut scratch = Vec::new();
            second
                .iter()
                .map(|&b| GridRow {
                    a,
                    b,
                    q: husimi.value_at_unit(&grid.point(levels, a, b).unit_vector(), &mut scratch),
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(rows)
}

/// Writes grid rows as CSV with header `x1,x2,Q` or `p1,p2,Q`.
pub fn write_grid_csv<W: Write>(rows: &[GridRow], slice: Slice, mut out: W) -> std::io::Result<()> {
    let (h1, h2) = match slice {
        Slice::Position => ("x1", "x2"),
        Slice::Momentum => ("p1", "p2"),
    };
    writeln!(out, "{h1},{h2},Q")?;
    for r in rows {
        writeln!(out, "{},{},{:e}", r.a, r.b, r.q)?;
    }
    Ok(())
}

/// Local maxima of `Q` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HumpReport {
    /// One `(a, b, Q)` per hump, highest first.
    pub maxima: Vec<GridRow>,
    /// Set when two nearby maxima differ by less than `1e-6` in `Q`.
    pub ambiguous: bool,
}

impl HumpReport {
    pub fn count(&self) -> usize {
        self.maxima.len()
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Locates the humps of `Q` on a grid.
///
/// Candidates are cells not exceeded by any of their (up to eight) neighbours.
/// Adjacent candidates, such as the cells of a flat top, merge into one hump,
/// and maxima below [`HUMP_FLOOR`] times the global maximum are discarded.
pub fn find_humps(state: &SymmetricState, grid: &GridSpec) -> Result<HumpReport> {
    let rows = husimi_grid(state, grid)?;
    let ra = grid.resolution;
    let rb = if state.levels() > 2 { grid.resolution } else { 1 };
    let at = |i: usize, j: usize| rows[i * rb + j].q;
    let global = rows.iter().map(|r| r.q).fold(0.0, f64::max);
    let mut candidates = Vec::new();
    for i in 0..ra {
        for j in 0..rb {
            let q = at(i, j);
            if q < HUMP_FLOOR * global {
                continue;
            }
            let mut top = true;
            'scan: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ni < 0 || nj < 0 || ni >= ra as i64 || nj >= rb as i64 {
                        continue;
                    }
                    if at(ni as usize, nj as usize) > q {
                        top = false;
                        break 'scan;
                    }
                }
            }
            if top {
                candidates.push((i, j));
            }
        }
    }
    let mut parent: Vec<usize> = (0..candidates.len()).collect();
    for x in 0..candidates.len() {
        for y in x + 1..candidates.len() {
            let (a, b) = (candidates[x], candidates[y]);
            if a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1 {
                let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
                parent[rx] = ry;
            }
        }
    }
    let mut best: Vec<Option<(usize, usize)>> = vec![None; candidates.len()];
    for x in 0..candidates.len() {
        let root = find(&mut parent, x);
        let (i, j) = candidates[x];
        match best[root] {
            Some((bi, bj)) if at(bi, bj) >= at(i, j) => {}
            _ => best[root] = Some((i, j)),
        }
    }
    let cells: Vec<(usize, usize)> = best.into_iter().flatten().collect();
    let mut ambiguous = false;
    for x in 0..cells.len() {
        for y in x + 1..cells.len() {
            let (a, b) = (cells[x], cells[y]);
            let near = a.0.abs_diff(b.0) <= 2 && a.1.abs_diff(b.1) <= 2;
            if near && (at(a.0, a.1) - at(b.0, b.1)).abs() < 1e-6 {
                ambiguous = true;
                log::warn!(
                    "hump merge ambiguity between grid cells {:?} and {:?}",
                    a,
                    b
                );
            }
        }
    }
    let mut maxima: Vec<GridRow> = cells.iter().map(|&(i, j)| rows[i * rb + j]).collect();
    maxima.sort_by(|x, y| y.q.total_cmp(&x.q).then(x.a.total_cmp(&y.a)).then(x.b.total_cmp(&y.b)));
    Ok(HumpReport { maxima, ambiguous })
}

/// Number of humps of `Q` on the grid; see [`find_humps`].
pub fn count_humps(state: &SymmetricState, grid: &GridSpec) -> Result<usize> {
    Ok(find_humps(state, grid)?.count())
}
