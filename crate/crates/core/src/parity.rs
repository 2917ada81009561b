//! The `Z_2^{D-1}` population-parity group: characters, sector projectors and
//! parity-adapted coherent states ("cats"), including their limits when some
//! coordinates vanish.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::coherent::{dscs, PhasePoint, SymmetricState};
use crate::error::{Error, Result};
use crate::fock::{log_multinomial, FockBasis, OccupationVector};

/// Default threshold on `|z_i|` below which a coordinate is treated as zero.
pub const DEFAULT_ZERO_TOLERANCE: f64 = 1e-9;

/// A bit string `[c_1, ..., c_{D-1}]` labelling a parity sector or group element.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParityLabel {
    len: u8,
    mask: u32,
}

impl ParityLabel {
    pub fn new(bits: &[u8]) -> Result<Self> {
        if bits.len() > 31 {
            return Err(Error::InvalidParams(format!("parity label of length {}", bits.len())));
        }
        let mut mask = 0;
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => mask |= 1 << i,
                _ => return Err(Error::InvalidParams(format!("parity bit {b} is not 0 or 1"))),
            }
        }
        Ok(Self {
            len: bits.len() as u8,
            mask,
        })
    }

    /// All-zeros label of length `len`.
    pub fn even(len: usize) -> Self {
        Self {
            len: len as u8,
            mask: 0,
        }
    }

    pub fn from_mask(len: usize, mask: u32) -> Self {
        Self {
            len: len as u8,
            mask: mask & ((1u32 << len) - 1),
        }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    /// Bit for level `i + 1`.
    pub fn bit(&self, i: usize) -> bool {
        self.mask >> i & 1 == 1
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.bit(i) as u8).collect()
    }

    /// Number of ones.
    pub fn weight(&self) -> u32 {
        self.mask.count_ones()
    }

    pub fn is_even(&self) -> bool {
        self.mask == 0
    }

    /// Group sum `c + c'` (bitwise xor).
    pub fn add(&self, other: &Self) -> Self {
        Self {
            len: self.len,
            mask: self.mask ^ other.mask,
        }
    }

    /// Every label of length `len`, in lexicographic order of the bit strings.
    pub fn all(len: usize) -> Vec<Self> {
        let mut labels: Vec<Self> = (0..1u32 << len).map(|m| Self::from_mask(len, m)).collect();
        labels.sort_by_key(|l| l.bits());
        labels
    }
}

impl fmt::Debug for ParityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for ParityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.len() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", self.bit(i) as u8)?;
        }
        write!(f, "]")
    }
}

impl FromStr for ParityLabel {
    type Err = Error;

    /// Accepts `[0,1]`, `0,1` or `01`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
        let bits: Vec<u8> = if inner.contains(',') {
            inner
                .split(',')
                .map(|t| t.trim().parse::<u8>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidParams(format!("bad parity label `{s}`: {e}")))?
        } else {
            inner
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| c.to_digit(10).map(|d| d as u8))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::InvalidParams(format!("bad parity label `{s}`")))?
        };
        Self::new(&bits)
    }
}

/// `chi_c(b) = (-1)^{c.b}`.
pub fn character(c: &ParityLabel, b: &ParityLabel) -> Result<i8> {
    if c.len != b.len {
        return Err(Error::DimensionMismatch {
            expected: c.len(),
            found: b.len(),
        });
    }
    Ok(if (c.mask & b.mask).count_ones().is_multiple_of(2) { 1 } else { -1 })
}

/// Parities of levels `1..D` (level 0 dropped), reduced mod 2.
pub fn parity_of(n: &OccupationVector) -> ParityLabel {
    parity_of_entries(n.entries())
}

pub fn parity_of_entries(n: &[u32]) -> ParityLabel {
    let mask = n[1..]
        .iter()
        .enumerate()
        .fold(0u32, |m, (i, &k)| m | ((k & 1) << i));
    ParityLabel {
        len: (n.len() - 1) as u8,
        mask,
    }
}

/// Sector label of every basis state.
pub fn sector_labels(basis: &FockBasis) -> Vec<ParityLabel> {
    basis.iter().map(parity_of).collect()
}

/// `Pi^b` acting on a state: sign `(-1)^{b.n}` on every coefficient.
pub fn apply_parity_operator(b: &ParityLabel, state: &SymmetricState) -> Result<SymmetricState> {
    check_label(b, state.levels())?;
    let coeffs = state
        .basis()
        .iter()
        .zip(state.coeffs())
        .map(|(n, &c)| {
            if character(b, &parity_of(n)).unwrap_or(1) < 0 {
                -c
            } else {
                c
            }
        })
        .collect();
    SymmetricState::new(state.basis().clone(), coeffs)
}

fn check_label(c: &ParityLabel, levels: usize) -> Result<()> {
    if c.len() + 1 != levels {
        return Err(Error::DimensionMismatch {
            expected: levels - 1,
            found: c.len(),
        });
    }
    Ok(())
}

/// Squared norm `<psi|Pi_c|psi>` of the projection onto sector `c`.
pub fn sector_weight(state: &SymmetricState, c: &ParityLabel) -> Result<f64> {
    check_label(c, state.levels())?;
    Ok(state
        .basis()
        .iter()
        .zip(state.coeffs())
        .filter(|(n, _)| parity_of(n) == *c)
        .map(|(_, a)| a.norm_sqr())
        .sum())
}

/// Projects onto sector `c` and renormalizes.
///
/// Returns the projected state together with `||Pi_c psi||`. A projection whose
/// norm does not exceed `zero_tolerance` is reported as [`Error::ZeroProjection`].
pub fn project_parity(
    state: &SymmetricState,
    c: &ParityLabel,
    zero_tolerance: f64,
) -> Result<(SymmetricState, f64)> {
    check_label(c, state.levels())?;
    let coeffs: Vec<Complex64> = state
        .basis()
        .iter()
        .zip(state.coeffs())
        .map(|(n, &a)| if parity_of(n) == *c { a } else { Complex64::new(0.0, 0.0) })
        .collect();
    let norm = coeffs.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm <= zero_tolerance {
        return Err(Error::ZeroProjection {
            norm,
            tolerance: zero_tolerance,
        });
    }
    let inv = norm.recip();
    let projected = SymmetricState::new(
        state.basis().clone(),
        coeffs.into_iter().map(|a| a * inv).collect(),
    )?;
    Ok((projected, norm))
}

/// Flips the sign of `z_i` wherever `b_i = 1`.
pub fn apply_parity_flip(b: &ParityLabel, z: &PhasePoint) -> PhasePoint {
    let coords = z
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &zi)| if b.bit(i) { -zi } else { zi })
        .collect();
    PhasePoint::new(coords)
}

/// A parity-adapted coherent state request.
#[derive(Clone, Debug, PartialEq)]
pub struct CatSpec {
    pub z: PhasePoint,
    pub c: ParityLabel,
    pub particles: u32,
    pub zero_tolerance: f64,
}

impl CatSpec {
    pub fn new(z: PhasePoint, c: ParityLabel, particles: u32) -> Self {
        Self {
            z,
            c,
            particles,
            zero_tolerance: DEFAULT_ZERO_TOLERANCE,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.zero_tolerance = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        check_label(&self.c, self.z.levels())?;
        if !(self.zero_tolerance > 0.0) {
            return Err(Error::InvalidParams(format!(
                "zero tolerance must be positive, got {}",
                self.zero_tolerance
            )));
        }
        if !self.z.is_finite() {
            return Err(Error::InvalidParams("non-finite phase point".into()));
        }
        Ok(())
    }

    /// Coordinates treated as zero (0-based within `z`, i.e. level `i + 1`).
    pub fn zero_coordinates(&self) -> Vec<usize> {
        self.z
            .coords()
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() <= self.zero_tolerance)
            .map(|(i, _)| i)
            .collect()
    }

    /// `||z||_0 + ||c_L||_0`: the exponent of the hump count `2^k`.
    pub fn branch_exponent(&self) -> u32 {
        let zeros = self.zero_coordinates();
        let nonzero = (self.z.coords().len() - zeros.len()) as u32;
        let odd_zero = zeros.iter().filter(|&&i| self.c.bit(i)).count() as u32;
        nonzero + odd_zero
    }
}

/// Compensated summation (Neumaier).
fn neumaier_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// `r^N - 1` for `r = 1 - s`, with `s` in `[0, 2]`.
fn power_minus_one(s: f64, particles: u32) -> f64 {
    let n = particles as f64;
    if s < 1.0 {
        (n * (-s).ln_1p()).exp_m1()
    } else {
        let r = 1.0 - s;
        let magnitude = (n * r.abs().ln()).exp();
        let signed = if r < 0.0 && particles % 2 == 1 { -magnitude } else { magnitude };
        signed - 1.0
    }
}

/// Normalization `N(z)_c = ||Pi_c |z>||` from the `2^{D-1}`-term alternating sum.
///
/// Each term is `chi_c(b) (<z|z^b>)`, with `<z|z^b> = (1 - s_b)^N` real and
/// `s_b = 2 sum_{b_i=1} |z_i|^2 / (1 + |z|^2)`. The constant part of every
/// term is summed exactly (it equals `2^{D-1} delta_{c,0}`) and only the
/// `expm1` remainders are accumulated, which keeps small norms accurate.
pub fn cat_norm(spec: &CatSpec) -> Result<f64> {
    spec.validate()?;
    let len = spec.c.len();
    let moduli: Vec<f64> = spec.z.coords().iter().map(|z| z.norm_sqr()).collect();
    let denom = 1.0 + moduli.iter().sum::<f64>();
    let remainders = (0..1u32 << len).map(|mask| {
        let b = ParityLabel::from_mask(len, mask);
        let flipped: f64 = (0..len).filter(|&i| b.bit(i)).map(|i| moduli[i]).sum();
        let s = 2.0 * flipped / denom;
        let chi = character(&spec.c, &b).unwrap_or(1) as f64;
        chi * power_minus_one(s, spec.particles)
    });
    let constant = if spec.c.is_even() { (1u64 << len) as f64 } else { 0.0 };
    let total = neumaier_sum(remainders) + constant;
    let squared = (total / (1u64 << len) as f64).max(0.0);
    Ok(squared.sqrt())
}

/// Parity-adapted coherent state `|z>_c`, with the reduced-cat limit on vanishing coordinates.
///
/// When no `|z_i|` falls below the tolerance this is the normalized projection
/// `Pi_c |z>`. Otherwise, with `L` the vanishing coordinates and `K` the rest,
/// the result is `prod_{i in L, c_i = 1} a_i^dagger` applied to the
/// `Z_2^{|K|}`-projected coherent state of `N - ||c_L||_0` particles at
/// `(z_K, 0_L)`, embedded in the full basis.
pub fn dcat(basis: &Arc<FockBasis>, spec: &CatSpec) -> Result<SymmetricState> {
    spec.validate()?;
    if basis.levels() != spec.z.levels() || basis.particles() != spec.particles {
        return Err(Error::BasisMismatch);
    }
    let zeros = spec.zero_coordinates();
    if zeros.is_empty() {
        let (state, _) = project_parity(&dscs(basis, &spec.z)?, &spec.c, 0.0)?;
        return Ok(state);
    }
    reduced_cat(basis, spec, &zeros)
}

fn reduced_cat(basis: &Arc<FockBasis>, spec: &CatSpec, zeros: &[usize]) -> Result<SymmetricState> {
    let levels = basis.levels();
    let is_zero: Vec<bool> = (0..levels - 1).map(|i| zeros.contains(&i)).collect();
    let added: u32 = zeros.iter().filter(|&&i| spec.c.bit(i)).count() as u32;
    if added > spec.particles {
        return Err(Error::InvalidParams(format!(
            "parity {} needs {added} excitations but only {} particles exist",
            spec.c, spec.particles
        )));
    }

    // Log-modulus and phase of the reduced coherent amplitudes. Entries on the
    // zero coordinates carry the a^dagger excitations (0 or 1 particle) and
    // contribute no z-dependence.
    let log_z: Vec<(f64, f64)> = spec
        .z
        .coords()
        .iter()
        .map(|z| (z.norm().ln(), z.arg()))
        .collect();
    let mut amplitudes: Vec<Option<(f64, f64)>> = Vec::with_capacity(basis.len());
    for n in basis.iter() {
        let entries = n.entries();
        if parity_of(n) != spec.c {
            amplitudes.push(None);
            continue;
        }
        let excited_ok = (0..levels - 1)
            .filter(|&i| is_zero[i])
            .all(|i| entries[i + 1] == spec.c.bit(i) as u32);
        if !excited_ok {
            amplitudes.push(None);
            continue;
        }
        let mut log_mod = 0.5 * log_multinomial(n);
        let mut phase = 0.0;
        for i in 0..levels - 1 {
            let k = entries[i + 1];
            if !is_zero[i] && k > 0 {
                log_mod += k as f64 * log_z[i].0;
                phase += k as f64 * log_z[i].1;
            }
        }
        amplitudes.push(Some((log_mod, phase)));
    }
    let shift = amplitudes
        .iter()
        .flatten()
        .map(|a| a.0)
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::Numerical(format!("empty reduced cat for {}", spec.c)));
    }
    let coeffs = amplitudes
        .into_iter()
        .map(|a| match a {
            Some((m, p)) => Complex64::from_polar((m - shift).exp(), p),
            None => Complex64::new(0.0, 0.0),
        })
        .collect();
    SymmetricState::new(basis.clone(), coeffs)?.normalize()
}
