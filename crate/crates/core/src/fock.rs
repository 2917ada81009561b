//! Totally symmetric Fock basis of `N` bosons distributed over `D` levels.
//!
//! States are the compositions `n = (n_0, ..., n_{D-1})` of `N` into `D`
//! non-negative parts, stored in reverse-lexicographic order so that the
//! condensate `(N, 0, ..., 0)` sits at index 0 and `(0, ..., 0, N)` last.

use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Default cap on the number of basis states a [`FockBasis`] may hold.
pub const DEFAULT_CAPACITY: usize = 10_000_000;

/// Occupation numbers of the `D` levels.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupationVector(Vec<u32>);

impl OccupationVector {
    pub fn new(entries: Vec<u32>) -> Self {
        Self(entries)
    }

    /// Condensate of `n` particles in level 0.
    pub fn condensate(levels: usize, n: u32) -> Self {
        let mut v = vec![0; levels];
        v[0] = n;
        Self(v)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn levels(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn get(&self, level: usize) -> u32 {
        self.0[level]
    }
}

impl fmt::Debug for OccupationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<u32>> for OccupationVector {
    fn from(v: Vec<u32>) -> Self {
        Self(v)
    }
}

impl<const K: usize> From<[u32; K]> for OccupationVector {
    fn from(v: [u32; K]) -> Self {
        Self(v.to_vec())
    }
}

/// Binomial coefficient in `u128`, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Number of compositions of `n` into `levels` parts, `binom(n + levels - 1, levels - 1)`.
pub fn basis_dimension(levels: usize, n: u32) -> Option<u128> {
    if levels == 0 {
        return Some(0);
    }
    binomial(n as u64 + levels as u64 - 1, levels as u64 - 1)
}

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(4097);
        let mut acc = 0.0f64;
        t.push(0.0);
        for k in 1..=4096u32 {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`. Tabulated by direct summation up to 4096, Stirling series beyond.
pub fn ln_factorial(n: u32) -> f64 {
    let table = ln_factorial_table();
    if (n as usize) < table.len() {
        return table[n as usize];
    }
    let x = n as f64 + 1.0;
    // ln Γ(x) Stirling series, ample for x > 4096
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x.powi(3))
}

/// `ln(N! / prod_i n_i!)`.
pub fn log_multinomial(n: &OccupationVector) -> f64 {
    let total = n.total();
    ln_factorial(total) - n.0.iter().map(|&k| ln_factorial(k)).sum::<f64>()
}

/// Immutable enumeration of all compositions of `N` into `D` parts.
#[derive(Clone, PartialEq, Eq)]
pub struct FockBasis {
    levels: usize,
    particles: u32,
    states: Vec<OccupationVector>,
    // binom_table[r][m] = number of compositions of r into m parts (m <= levels)
    counts: Vec<Vec<u64>>,
}

impl fmt::Debug for FockBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FockBasis")
            .field("levels", &self.levels)
            .field("particles", &self.particles)
            .field("len", &self.states.len())
            .finish()
    }
}

impl FockBasis {
    /// Enumerate the basis with the default capacity cap.
    pub fn new(levels: usize, particles: u32) -> Result<Self> {
        Self::with_capacity(levels, particles, DEFAULT_CAPACITY)
    }

    pub fn with_capacity(levels: usize, particles: u32, cap: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidLevelCount(levels));
        }
        let dim = basis_dimension(levels, particles).unwrap_or(u128::MAX);
        if dim > cap as u128 {
            return Err(Error::Capacity {
                requested: dim,
                cap: cap as u128,
            });
        }
        let dim = dim as usize;

        let n = particles as usize;
        let mut counts = vec![vec![0u64; levels + 1]; n + 1];
        for (r, row) in counts.iter_mut().enumerate() {
            row[0] = u64::from(r == 0);
            for (m, c) in row.iter_mut().enumerate().skip(1) {
                *c = basis_dimension(m, r as u32).unwrap_or(u128::MAX) as u64;
            }
        }

        let mut states = Vec::with_capacity(dim);
        let mut current = vec![0u32; levels];
        enumerate_into(&mut states, &mut current, 0, particles);
        debug_assert_eq!(states.len(), dim);

        Ok(Self {
            levels,
            particles,
            states,
            counts,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn particles(&self) -> u32 {
        self.particles
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[OccupationVector] {
        &self.states
    }

    pub fn unrank(&self, index: usize) -> Option<&OccupationVector> {
        self.states.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &OccupationVector> {
        self.states.iter()
    }

    /// Position of `n` in the enumeration order.
    pub fn rank(&self, n: &OccupationVector) -> Result<usize> {
        self.rank_entries(n.entries())
    }

    pub fn rank_entries(&self, n: &[u32]) -> Result<usize> {
        if n.len() != self.levels {
            return Err(Error::DimensionMismatch {
                expected: self.levels,
                found: n.len(),
            });
        }
        let total: u64 = n.iter().map(|&k| k as u64).sum();
        if total != self.particles as u64 {
            return Err(Error::InvalidOccupation {
                expected: self.particles,
                found: total,
            });
        }
        Ok(self.rank_unchecked(n))
    }

    /// Rank without validation; `n` must sum to `N` and have `D` entries.
    pub fn rank_unchecked(&self, n: &[u32]) -> usize {
        let mut remaining = self.particles as usize;
        let mut index = 0usize;
        for (i, &ni) in n.iter().enumerate().take(self.levels - 1) {
            let ni = ni as usize;
            // vectors sharing the prefix but with a larger entry at i come first;
            // they number binom(remaining - ni - 1 + parts, parts) by the hockey stick
            // identity, i.e. compositions of (remaining - ni - 1) into parts + 1 slots
            if remaining > ni {
                let parts = self.levels - 1 - i;
                index += self.counts[remaining - ni - 1][parts + 1] as usize;
            }
            remaining -= ni;
        }
        index
    }
}

fn enumerate_into(out: &mut Vec<OccupationVector>, current: &mut [u32], level: usize, left: u32) {
    if level + 1 == current.len() {
        current[level] = left;
        out.push(OccupationVector(current.to_vec()));
        return;
    }
    for k in (0..=left).rev() {
        current[level] = k;
        enumerate_into(out, current, level + 1, left - k);
    }
    current[level] = 0;
}
