//! The D-level Lipkin-Meshkov-Glick Hamiltonian in the symmetric Fock basis.
//!
//! The Hamiltonian conserves every level parity, so it is stored sparse and
//! diagonalized one parity sector at a time with a dense symmetric solver.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::coherent::{spin_matrix, SymmetricState};
use crate::error::{Error, Result};
use crate::fock::{FockBasis, DEFAULT_CAPACITY};
use crate::parity::{parity_of, sector_labels, ParityLabel};

/// Largest parity block handed to the dense eigensolver.
pub const DENSE_BLOCK_LIMIT: usize = 12_000;

/// States whose dominant sector weight falls below `1 - PARITY_TOLERANCE` are flagged.
pub const PARITY_TOLERANCE: f64 = 1e-8;

/// Couplings of the literal multi-gap form
/// `sum_i eps_i (S_{i+1,i+1} - S_ii) + sum_{i != j} (l1 S_ij^2 + l2 S_ij S_ji)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralCouplings {
    /// `eps_0 .. eps_{D-2}`; the gap term for `i = D-1` would reference a level
    /// that does not exist and is dropped.
    pub gaps: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Model parameters. Without `general` the Hamiltonian is the energy density
/// `(eps/N)(S_{D-1,D-1} - S_00) - lambda/(N(N-1)) sum_{i != j} S_ij^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct LMGParams {
    pub levels: usize,
    pub particles: u32,
    pub epsilon: f64,
    pub lambda: f64,
    pub general: Option<GeneralCouplings>,
}

impl LMGParams {
    pub fn new(levels: usize, particles: u32, lambda: f64) -> Self {
        Self {
            levels,
            particles,
            epsilon: 1.0,
            lambda,
            general: None,
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidLevelCount(self.levels));
        }
        if self.particles < 1 {
            return Err(Error::InvalidParams("at least one particle is required".into()));
        }
        match &self.general {
            None => {
                if self.particles < 2 {
                    return Err(Error::InvalidParams(
                        "the energy density needs N >= 2 for its two-body normalization".into(),
                    ));
                }
                if !self.epsilon.is_finite() || !self.lambda.is_finite() {
                    return Err(Error::InvalidParams("non-finite coupling".into()));
                }
            }
            Some(g) => {
                if g.gaps.len() != self.levels - 1 {
                    return Err(Error::DimensionMismatch {
                        expected: self.levels - 1,
                        found: g.gaps.len(),
                    });
                }
                if !g.gaps.iter().chain([&g.lambda1, &g.lambda2]).all(|x| x.is_finite()) {
                    return Err(Error::InvalidParams("non-finite coupling".into()));
                }
            }
        }
        Ok(())
    }
}

/// Real symmetric matrix: diagonal plus upper-triangle entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricSparse {
    diag: Vec<f64>,
    upper: Vec<(usize, usize, f64)>,
}

impl SymmetricSparse {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Strictly upper entries `(row, col, value)` with `row < col`.
    pub fn upper(&self) -> &[(usize, usize, f64)] {
        &self.upper
    }

    fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut diag = vec![0.0; dim];
        let mut off: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (r, c, v) in triplets {
            if r == c {
                diag[r] += v;
            } else {
                // each pair arrives once from each triangle; averaging removes ulp asymmetry
                *off.entry((r.min(c), r.max(c))).or_insert(0.0) += 0.5 * v;
            }
        }
        let upper = off.into_iter().filter(|&(_, v)| v != 0.0).map(|((r, c), v)| (r, c, v)).collect();
        Self { diag, upper }
    }

    /// `a * self + b * other`, entrywise.
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let diag = self.diag.iter().zip(&other.diag).map(|(x, y)| a * x + b * y).collect();
        let mut off: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(r, c, v) in &self.upper {
            *off.entry((r, c)).or_insert(0.0) += a * v;
        }
        for &(r, c, v) in &other.upper {
            *off.entry((r, c)).or_insert(0.0) += b * v;
        }
        let upper = off.into_iter().filter(|&(_, v)| v != 0.0).map(|((r, c), v)| (r, c, v)).collect();
        Self { diag, upper }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y: Vec<Complex64> = self.diag.iter().zip(x).map(|(d, v)| v * d).collect();
        for &(r, c, v) in &self.upper {
            y[r] += x[c] * v;
            y[c] += x[r] * v;
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diag));
        for &(r, c, v) in &self.upper {
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
        debug_assert_eq!(m.nrows(), n);
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        let d: f64 = self.diag.iter().map(|x| x * x).sum();
        let o: f64 = self.upper.iter().map(|e| e.2 * e.2).sum();
        (d + 2.0 * o).sqrt()
    }
}

/// A Hamiltonian matrix together with its basis.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    basis: Arc<FockBasis>,
    matrix: SymmetricSparse,
}

impl Hamiltonian {
    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &SymmetricSparse {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `<a|H|b>`.
    pub fn sandwich(&self, a: &SymmetricState, b: &SymmetricState) -> Result<Complex64> {
        if a.basis().as_ref() != self.basis.as_ref() || b.basis().as_ref() != self.basis.as_ref() {
            return Err(Error::BasisMismatch);
        }
        let hb = self.matrix.apply(b.coeffs());
        Ok(a.coeffs().iter().zip(&hb).map(|(x, y)| x.conj() * y).sum())
    }

    pub fn expectation(&self, state: &SymmetricState) -> Result<f64> {
        Ok(self.sandwich(state, state)?.re)
    }
}

/// The `lambda`-independent pieces of the density-mode Hamiltonian, reusable across a sweep.
#[derive(Clone, Debug)]
pub struct LmgOperators {
    basis: Arc<FockBasis>,
    /// `(S_{D-1,D-1} - S_00) / N`.
    one_body: SymmetricSparse,
    /// `-sum_{i != j} S_ij^2 / (N(N-1))`.
    two_body: SymmetricSparse,
}

impl LmgOperators {
    pub fn new(levels: usize, particles: u32) -> Result<Self> {
        Self::with_capacity(levels, particles, DEFAULT_CAPACITY)
    }

    pub fn with_capacity(levels: usize, particles: u32, cap: usize) -> Result<Self> {
        LMGParams::new(levels, particles, 0.0).validate()?;
        let basis = Arc::new(FockBasis::with_capacity(levels, particles, cap)?);
        Self::from_basis(basis)
    }

    pub fn from_basis(basis: Arc<FockBasis>) -> Result<Self> {
        let d = basis.levels();
        let n = basis.particles() as f64;
        if basis.particles() < 2 {
            return Err(Error::InvalidParams(
                "the energy density needs N >= 2 for its two-body normalization".into(),
            ));
        }
        let one_body = SymmetricSparse::from_triplets(
            basis.len(),
            basis
                .iter()
                .enumerate()
                .map(|(k, occ)| (k, k, (occ.get(d - 1) as f64 - occ.get(0) as f64) / n)),
        );
        let scale = -1.0 / (n * (n - 1.0));
        let two_body = SymmetricSparse::from_triplets(basis.len(), pair_terms(&basis, scale, 0.0)?);
        Ok(Self {
            basis,
            one_body,
            two_body,
        })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn hamiltonian(&self, epsilon: f64, lambda: f64) -> Hamiltonian {
        Hamiltonian {
            basis: self.basis.clone(),
            matrix: self.one_body.combine(epsilon, &self.two_body, lambda),
        }
    }
}

/// Triplets of `sum_{i != j} (l1 S_ij^2 + l2 S_ij S_ji)`.
fn pair_terms(basis: &FockBasis, l1: f64, l2: f64) -> Result<Vec<(usize, usize, f64)>> {
    let d = basis.levels();
    let mut out = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let sij = spin_matrix(basis, i, j)?;
            if l1 != 0.0 {
                out.extend(sij.compose(&sij).entries().map(|(r, c, v)| (r, c, l1 * v)));
            }
            if l2 != 0.0 {
                let sji = spin_matrix(basis, j, i)?;
                out.extend(sij.compose(&sji).entries().map(|(r, c, v)| (r, c, l2 * v)));
            }
        }
    }
    Ok(out)
}

/// Assembles the Hamiltonian for `p`.
pub fn build_hamiltonian(p: &LMGParams) -> Result<Hamiltonian> {
    p.validate()?;
    match &p.general {
        None => Ok(LmgOperators::new(p.levels, p.particles)?.hamiltonian(p.epsilon, p.lambda)),
        Some(g) => {
            let basis = Arc::new(FockBasis::new(p.levels, p.particles)?);
            let mut triplets = pair_terms(&basis, g.lambda1, g.lambda2)?;
            for (k, occ) in basis.iter().enumerate() {
                let e: f64 = g
                    .gaps
                    .iter()
                    .enumerate()
                    .map(|(i, eps)| eps * (occ.get(i + 1) as f64 - occ.get(i) as f64))
                    .sum();
                triplets.push((k, k, e));
            }
            let matrix = SymmetricSparse::from_triplets(basis.len(), triplets);
            Ok(Hamiltonian { basis, matrix })
        }
    }
}

/// Low-lying spectrum with parity labels.
#[derive(Clone, Debug)]
pub struct SpectrumResult {
    /// Every eigenvalue, ascending.
    pub eigenvalues: Vec<f64>,
    /// Sector of each eigenvalue.
    pub sectors: Vec<ParityLabel>,
    /// Eigenvectors of the lowest `keep` eigenvalues.
    pub eigenstates: Vec<SymmetricState>,
    /// `classify_parity` of each kept eigenstate.
    pub parities: Vec<(ParityLabel, f64)>,
}

impl SpectrumResult {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }
}

/// Parity-block diagonalization keeping the eigenvectors of the `keep` lowest levels.
///
/// Ties in energy are ordered by sector label so results are deterministic.
pub fn diagonalize(h: &Hamiltonian, keep: usize) -> Result<SpectrumResult> {
    let basis = h.basis();
    let labels = sector_labels(basis);
    let mut sectors: BTreeMap<ParityLabel, Vec<usize>> = BTreeMap::new();
    for (k, l) in labels.iter().enumerate() {
        sectors.entry(*l).or_default().push(k);
    }
    let mut local = vec![0usize; basis.len()];
    for members in sectors.values() {
        for (pos, &k) in members.iter().enumerate() {
            local[k] = pos;
        }
    }
    let mut blocks: BTreeMap<ParityLabel, DMatrix<f64>> = BTreeMap::new();
    for (l, members) in &sectors {
        if members.len() > DENSE_BLOCK_LIMIT {
            return Err(Error::Capacity {
                requested: members.len() as u128,
                cap: DENSE_BLOCK_LIMIT as u128,
            });
        }
        let mut m = DMatrix::zeros(members.len(), members.len());
        for (pos, &k) in members.iter().enumerate() {
            m[(pos, pos)] = h.matrix.diag[k];
        }
        blocks.insert(*l, m);
    }
    for &(r, c, v) in &h.matrix.upper {
        if labels[r] != labels[c] {
            return Err(Error::Numerical(format!(
                "Hamiltonian couples sectors {} and {}",
                labels[r], labels[c]
            )));
        }
        let m = blocks.get_mut(&labels[r]).expect("sector exists");
        m[(local[r], local[c])] = v;
        m[(local[c], local[r])] = v;
    }

    let solved: Vec<(ParityLabel, SymmetricEigen<f64, nalgebra::Dyn>)> = blocks
        .into_iter()
        .map(|(l, m)| {
            SymmetricEigen::try_new(m, f64::EPSILON, 0)
                .map(|e| (l, e))
                .ok_or_else(|| Error::Numerical(format!("eigensolver did not converge in sector {l}")))
        })
        .collect::<Result<_>>()?;

    let mut levels: Vec<(f64, ParityLabel, usize, usize)> = Vec::with_capacity(basis.len());
    for (s, (l, e)) in solved.iter().enumerate() {
        for (col, &ev) in e.eigenvalues.iter().enumerate() {
            levels.push((ev, *l, s, col));
        }
    }
    levels.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let norm = h.matrix.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut eigenstates = Vec::new();
    let mut parities = Vec::new();
    for &(ev, l, s, col) in levels.iter().take(keep) {
        let members = &sectors[&l];
        let v = solved[s].1.eigenvectors.column(col);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); basis.len()];
        for (pos, &k) in members.iter().enumerate() {
            coeffs[k] = Complex64::new(v[pos], 0.0);
        }
        let state = SymmetricState::new(basis.clone(), coeffs)?.normalize()?;
        let hv = h.matrix.apply(state.coeffs());
        let residual = hv
            .iter()
            .zip(state.coeffs())
            .map(|(a, b)| (a - b * ev).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual > 1e-10 * norm {
            return Err(Error::Numerical(format!(
                "eigenpair residual {residual:e} exceeds tolerance at E = {ev}"
            )));
        }
        parities.push(classify_parity(&state));
        eigenstates.push(state);
    }
    Ok(SpectrumResult {
        eigenvalues: levels.iter().map(|x| x.0).collect(),
        sectors: levels.iter().map(|x| x.1).collect(),
        eigenstates,
        parities,
    })
}

/// Dominant parity sector and its weight `<psi|Pi_c|psi>`; ties go to the smaller label.
pub fn classify_parity(state: &SymmetricState) -> (ParityLabel, f64) {
    let mut weights: BTreeMap<Vec<u8>, (ParityLabel, f64)> = BTreeMap::new();
    for l in ParityLabel::all(state.levels() - 1) {
        weights.insert(l.bits(), (l, 0.0));
    }
    let total: f64 = state.coeffs().iter().map(|c| c.norm_sqr()).sum();
    for (n, c) in state.basis().iter().zip(state.coeffs()) {
        weights.get_mut(&parity_of(n).bits()).expect("label").1 += c.norm_sqr();
    }
    let mut best = (ParityLabel::even(state.levels() - 1), f64::NEG_INFINITY);
    for (_, (l, w)) in weights {
        if w > best.1 + 1e-15 {
            best = (l, w);
        }
    }
    (best.0, best.1 / total)
}

/// Whether a certainty from [`classify_parity`] counts as a definite parity.
pub fn is_definite(certainty: f64) -> bool {
    certainty >= 1.0 - PARITY_TOLERANCE
}

/// One row of a spectrum sweep.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub lambda: f64,
    /// Lowest energies and their sectors, or the error of that row.
    pub result: Result<(Vec<f64>, Vec<(ParityLabel, f64)>)>,
}

/// Diagonalizes at every `lambda`, in parallel, keeping `levels_kept` levels per row.
/// A failing row records its error without aborting the others.
pub fn spectrum_sweep(template: &LMGParams, lambdas: &[f64], levels_kept: usize) -> Result<Vec<SweepRow>> {
    template.validate()?;
    let ops = match template.general {
        None => Some(LmgOperators::new(template.levels, template.particles)?),
        Some(_) => None,
    };
    Ok(lambdas
        .par_iter()
        .map(|&lambda| {
            let result = (|| {
                let h = match &ops {
                    Some(o) => o.hamiltonian(template.epsilon, lambda),
                    None => build_hamiltonian(&template.with_lambda(lambda))?,
                };
                let spec = diagonalize(&h, levels_kept)?;
                let k = levels_kept.min(spec.eigenvalues.len());
                Ok((spec.eigenvalues[..k].to_vec(), spec.parities))
            })();
            SweepRow { lambda, result }
        })
        .collect())
}
