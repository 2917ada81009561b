//! U(D)-spin coherent states, their overlaps and U(D)-spin operator matrix elements.
//!
//! Coordinates live on the patch `z_0 = 1` of `CP^{D-1}`: a [`PhasePoint`]
//! stores only `(z_1, ..., z_{D-1})`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{log_multinomial, FockBasis};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A point of the `z_0 = 1` patch of `CP^{D-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint(Vec<Complex64>);

impl PhasePoint {
    pub fn new(z: Vec<Complex64>) -> Self {
        Self(z)
    }

    pub fn origin(levels: usize) -> Self {
        Self(vec![ZERO; levels - 1])
    }

    pub fn real(xs: &[f64]) -> Self {
        Self(xs.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.0
    }

    pub fn coords_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    /// Number of levels `D` this point addresses.
    pub fn levels(&self) -> usize {
        self.0.len() + 1
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `z^dagger z`.
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Coordinate `z_i` with the patch convention `z_0 = 1`.
    pub fn homogeneous(&self, level: usize) -> Complex64 {
        if level == 0 {
            ONE
        } else {
            self.0[level - 1]
        }
    }

    /// Unit vector `(1, z_1, ..., z_{D-1}) / sqrt(1 + z^dagger z)` in `C^D`.
    pub fn unit_vector(&self) -> Vec<Complex64> {
        let s = (1.0 + self.norm_sqr()).sqrt().recip();
        std::iter::once(Complex64::new(s, 0.0))
            .chain(self.0.iter().map(|z| z * s))
            .collect()
    }

    /// Inverse of [`unit_vector`](Self::unit_vector); `None` when the level-0 component vanishes.
    pub fn from_homogeneous(u: &[Complex64]) -> Option<Self> {
        let u0 = *u.first()?;
        if u0.norm_sqr() == 0.0 {
            return None;
        }
        Some(Self(u[1..].iter().map(|c| c / u0).collect()))
    }
}

/// `1 + z1^dagger z2`.
fn hermitian_base(z1: &PhasePoint, z2: &PhasePoint) -> Complex64 {
    ONE + z1
        .0
        .iter()
        .zip(&z2.0)
        .map(|(a, b)| a.conj() * b)
        .sum::<Complex64>()
}

/// A symmetric N-quDit state as a coefficient vector over a [`FockBasis`].
#[derive(Clone, Debug)]
pub struct SymmetricState {
    basis: Arc<FockBasis>,
    coeffs: Vec<Complex64>,
    normalized: bool,
}

impl SymmetricState {
    /// Wraps raw coefficients. The state is flagged as unnormalized unless its norm is 1 to 1e-10.
    pub fn new(basis: Arc<FockBasis>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: coeffs.len(),
            });
        }
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        Ok(Self {
            basis,
            coeffs,
            normalized: (norm - 1.0).abs() <= 1e-10,
        })
    }

    pub fn from_real(basis: Arc<FockBasis>, coeffs: &[f64]) -> Result<Self> {
        Self::new(basis, coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// Unit-norm Fock state `|n>`.
    pub fn fock(basis: Arc<FockBasis>, n: &[u32]) -> Result<Self> {
        let idx = basis.rank_entries(n)?;
        let mut coeffs = vec![ZERO; basis.len()];
        coeffs[idx] = ONE;
        Self::new(basis, coeffs)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn levels(&self) -> usize {
        self.basis.levels()
    }

    pub fn particles(&self) -> u32 {
        self.basis.particles()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Rescaled to unit norm. Fails on the zero vector.
    pub fn normalize(mut self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numerical(format!("cannot normalize a state of norm {norm}")));
        }
        let inv = norm.recip();
        self.coeffs.iter_mut().for_each(|c| *c *= inv);
        self.normalized = true;
        Ok(self)
    }

    pub fn same_basis(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis) || *self.basis == *other.basis
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if !self.same_basis(other) {
            return Err(Error::BasisMismatch);
        }
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

/// Per-basis weights `sqrt(N!/prod n_i!)` used to expand coherent states.
///
/// Evaluation goes through the unit vector of the phase point, so every power
/// `|u_i|^{n_i}` is bounded by one and nothing overflows at large `N`.
#[derive(Clone, Debug)]
pub struct CoherentKernel {
    basis: Arc<FockBasis>,
    half_log_weights: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl CoherentKernel {
    pub fn new(basis: Arc<FockBasis>) -> Self {
        let half_log_weights: Vec<f64> = basis.iter().map(|n| 0.5 * log_multinomial(n)).collect();
        let max = half_log_weights.iter().cloned().fold(0.0, f64::max);
        let weights = (max < 650.0).then(|| half_log_weights.iter().map(|w| w.exp()).collect());
        Self {
            basis,
            half_log_weights,
            weights,
        }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    /// Expansion coefficients of the coherent state with unit homogeneous vector `u`.
    pub fn coefficients_homogeneous(&self, u: &[Complex64], out: &mut Vec<Complex64>) {
        let levels = self.basis.levels();
        let n = self.basis.particles() as usize;
        out.clear();
        match &self.weights {
            Some(w) => {
                let mut powers = vec![ONE; levels * (n + 1)];
                for (i, ui) in u.iter().enumerate() {
                    let row = &mut powers[i * (n + 1)..(i + 1) * (n + 1)];
                    for k in 1..=n {
                        row[k] = row[k - 1] * ui;
                    }
                }
                for (occ, wk) in self.basis.iter().zip(w) {
                    let mut c = Complex64::new(*wk, 0.0);
                    for (i, &ni) in occ.entries().iter().enumerate() {
                        if ni > 0 {
                            c *= powers[i * (n + 1) + ni as usize];
                        }
                    }
                    out.push(c);
                }
            }
            None => {
                let logs: Vec<(f64, f64)> = u.iter().map(|c| (c.norm().ln(), c.arg())).collect();
                for (occ, hw) in self.basis.iter().zip(&self.half_log_weights) {
                    let mut log_mod = *hw;
                    let mut phase = 0.0;
                    for (i, &ni) in occ.entries().iter().enumerate() {
                        if ni > 0 {
                            log_mod += ni as f64 * logs[i].0;
                            phase += ni as f64 * logs[i].1;
                        }
                    }
                    out.push(Complex64::from_polar(log_mod.exp(), phase));
                }
            }
        }
    }

    pub fn coefficients(&self, z: &PhasePoint) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.basis.len());
        self.coefficients_homogeneous(&z.unit_vector(), &mut out);
        out
    }

    /// `<z|psi>` for the coherent state with unit homogeneous vector `u`.
    pub fn amplitude_homogeneous(
        &self,
        u: &[Complex64],
        psi: &[Complex64],
        scratch: &mut Vec<Complex64>,
    ) -> Complex64 {
        self.coefficients_homogeneous(u, scratch);
        scratch.iter().zip(psi).map(|(c, p)| c.conj() * p).sum()
    }
}

/// The coherent state `|z>` expanded in `basis`.
pub fn dscs(basis: &Arc<FockBasis>, z: &PhasePoint) -> Result<SymmetricState> {
    check_point(basis.levels(), z)?;
    let coeffs = CoherentKernel::new(basis.clone()).coefficients(z);
    SymmetricState::new(basis.clone(), coeffs)
}

fn check_point(levels: usize, z: &PhasePoint) -> Result<()> {
    if z.levels() != levels {
        return Err(Error::DimensionMismatch {
            expected: levels - 1,
            found: z.coords().len(),
        });
    }
    Ok(())
}

/// `ln <z1|z2>` as (log-modulus, phase) for `N` particles.
pub fn log_overlap(z1: &PhasePoint, z2: &PhasePoint, particles: u32) -> Result<(f64, f64)> {
    if z1.levels() != z2.levels() {
        return Err(Error::DimensionMismatch {
            expected: z1.coords().len(),
            found: z2.coords().len(),
        });
    }
    if particles == 0 {
        return Ok((0.0, 0.0));
    }
    let n = particles as f64;
    let base = hermitian_base(z1, z2);
    let log_mod = n * (base.norm().ln() - 0.5 * z1.norm_sqr().ln_1p() - 0.5 * z2.norm_sqr().ln_1p());
    Ok((log_mod, n * base.arg()))
}

/// `<z1|z2>` for `N` particles.
pub fn overlap(z1: &PhasePoint, z2: &PhasePoint, particles: u32) -> Result<Complex64> {
    let (m, p) = log_overlap(z1, z2, particles)?;
    Ok(Complex64::from_polar(m.exp(), p))
}

fn check_level(level: usize, levels: usize) -> Result<()> {
    if level >= levels {
        return Err(Error::LevelOutOfRange { level, levels });
    }
    Ok(())
}

/// `<z1|S_ij|z2>`.
pub fn cs_expectation(
    z1: &PhasePoint,
    z2: &PhasePoint,
    i: usize,
    j: usize,
    particles: u32,
) -> Result<Complex64> {
    let levels = z1.levels();
    check_level(i, levels)?;
    check_level(j, levels)?;
    if particles == 0 {
        let _ = log_overlap(z1, z2, 0)?;
        return Ok(ZERO);
    }
    let prefactor = z1.homogeneous(i).conj() * z2.homogeneous(j) * particles as f64;
    Ok(prefactor * power_ratio(z1, z2, particles, particles - 1)?)
}

/// `(1 + z1^dagger z2)^p / ((1+|z1|^2)^{N/2} (1+|z2|^2)^{N/2})`, in log form.
fn power_ratio(z1: &PhasePoint, z2: &PhasePoint, particles: u32, power: u32) -> Result<Complex64> {
    if z1.levels() != z2.levels() {
        return Err(Error::DimensionMismatch {
            expected: z1.coords().len(),
            found: z2.coords().len(),
        });
    }
    let n = particles as f64;
    let base = hermitian_base(z1, z2);
    let norms = 0.5 * n * (z1.norm_sqr().ln_1p() + z2.norm_sqr().ln_1p());
    if power == 0 {
        return Ok(Complex64::new((-norms).exp(), 0.0));
    }
    let p = power as f64;
    Ok(Complex64::from_polar(
        (p * base.norm().ln() - norms).exp(),
        p * base.arg(),
    ))
}

/// Smallest overlap modulus for which the ratio form of
/// [`cs_quadratic_expectation`] is evaluated.
pub const OVERLAP_UNDERFLOW: f64 = 1e-300;

/// `<z1|S_ij S_kl|z2>` through the ratio `<S_ij><S_kl>/<z1|z2>`.
///
/// Signals [`Error::DivisionHazard`] when the overlap underflows; use
/// [`cs_quadratic_expectation_log`] in that regime.
#[allow(clippy::too_many_arguments)]
pub fn cs_quadratic_expectation(
    z1: &PhasePoint,
    z2: &PhasePoint,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
    particles: u32,
) -> Result<Complex64> {
    let ov = overlap(z1, z2, particles)?;
    if ov.norm() < OVERLAP_UNDERFLOW {
        return Err(Error::DivisionHazard { overlap: ov.norm() });
    }
    let n = particles as f64;
    let linear = if j == k {
        cs_expectation(z1, z2, i, l, particles)?
    } else {
        ZERO
    };
    if particles == 0 {
        return Ok(linear);
    }
    let a = cs_expectation(z1, z2, i, j, particles)?;
    let b = cs_expectation(z1, z2, k, l, particles)?;
    Ok(linear + (n - 1.0) / n * a * b / ov)
}

/// `<z1|S_ij S_kl|z2>` with the overlap cancelled analytically:
/// `delta_jk <S_il> + N(N-1) conj(z1_i) z2_j conj(z1_k) z2_l (1+z1^dagger z2)^{N-2} / norms`.
#[allow(clippy::too_many_arguments)]
pub fn cs_quadratic_expectation_log(
    z1: &PhasePoint,
    z2: &PhasePoint,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
    particles: u32,
) -> Result<Complex64> {
    let levels = z1.levels();
    for lv in [i, j, k, l] {
        check_level(lv, levels)?;
    }
    let linear = if j == k {
        cs_expectation(z1, z2, i, l, particles)?
    } else {
        ZERO
    };
    if particles < 2 {
        return Ok(linear);
    }
    let n = particles as f64;
    let pre = z1.homogeneous(i).conj()
        * z2.homogeneous(j)
        * z1.homogeneous(k).conj()
        * z2.homogeneous(l)
        * (n * (n - 1.0));
    Ok(linear + pre * power_ratio(z1, z2, particles, particles - 2)?)
}

/// Sparse U(D)-spin operator `S_ij` in a Fock basis.
///
/// Each column carries at most one nonzero entry, stored as `(row, value)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinMatrix {
    columns: Vec<Option<(usize, f64)>>,
}

impl SpinMatrix {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, col: usize) -> Option<(usize, f64)> {
        self.columns[col]
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().flatten().count()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.columns
            .iter()
            .enumerate()
            .filter_map(|(c, e)| e.map(|(r, v)| (r, c, v)))
    }

    /// `self * other`; still one nonzero per column at most.
    pub fn compose(&self, other: &SpinMatrix) -> SpinMatrix {
        let columns = other
            .columns
            .iter()
            .map(|entry| {
                let (mid, v1) = (*entry)?;
                let (row, v2) = self.columns[mid]?;
                Some((row, v1 * v2))
            })
            .collect();
        SpinMatrix { columns }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.dim()];
        for (col, entry) in self.columns.iter().enumerate() {
            if let Some((row, v)) = entry {
                y[*row] += x[col] * *v;
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (r, c, v) in self.entries() {
            m[(r, c)] += v;
        }
        m
    }
}

/// `S_ij = a_i^dagger a_j` in `basis`.
pub fn spin_matrix(basis: &FockBasis, i: usize, j: usize) -> Result<SpinMatrix> {
    let levels = basis.levels();
    check_level(i, levels)?;
    check_level(j, levels)?;
    let mut scratch = vec![0u32; levels];
    let columns = basis
        .iter()
        .enumerate()
        .map(|(col, n)| {
            if i == j {
                let ni = n.get(i);
                return (ni > 0).then_some((col, ni as f64));
            }
            let nj = n.get(j);
            if nj == 0 {
                return None;
            }
            scratch.copy_from_slice(n.entries());
            let ni = scratch[i];
            scratch[i] += 1;
            scratch[j] -= 1;
            let row = basis.rank_unchecked(&scratch);
            Some((row, (((ni + 1) as f64) * nj as f64).sqrt()))
        })
        .collect();
    Ok(SpinMatrix { columns })
}

/// `<a|S|b>` for a sparse spin operator.
pub fn sandwich(a: &SymmetricState, op: &SpinMatrix, b: &SymmetricState) -> Result<Complex64> {
    if !a.same_basis(b) {
        return Err(Error::BasisMismatch);
    }
    let sb = op.apply(b.coeffs());
    Ok(a.coeffs().iter().zip(&sb).map(|(x, y)| x.conj() * y).sum())
}
