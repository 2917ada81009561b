//! Structural invariant suite shared by the `selftest` subcommand and the
//! acceptance tests.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::coherent::{dscs, spin_matrix, CoherentKernel, SymmetricState};
use crate::fock::FockBasis;
use crate::husimi::{haar_sample, haar_unit, wehrl_entropy, IntegrationSpec, Welford};
use crate::lmg::{build_hamiltonian, GeneralCouplings, LMGParams};
use crate::parity::{apply_parity_operator, character, parity_of, project_parity, sector_labels, ParityLabel};
use crate::Result;

/// Outcome of one invariant check.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct SelftestOptions {
    pub seed: u64,
    /// Haar samples per basis in the resolution-of-identity check.
    pub identity_samples: usize,
    pub lieb_states: usize,
    pub lieb_samples: usize,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            seed: 2024,
            identity_samples: 20_000,
            lieb_states: 100,
            lieb_samples: 20_000,
        }
    }
}

/// Runs every check. An internal error inside a check is reported as a failure.
pub fn run(opts: &SelftestOptions) -> Vec<Check> {
    let checks: [(&'static str, fn(&SelftestOptions) -> Result<(bool, String)>); 7] = [
        ("character-sum", |_| character_sum()),
        ("character-product", |_| character_product()),
        ("commutation-relations", |_| commutation()),
        ("projector-algebra", projectors),
        ("hamiltonian-parity", |_| hamiltonian_parity()),
        ("resolution-of-identity", resolution_of_identity),
        ("lieb-bound", lieb_bound),
    ];
    checks
        .into_iter()
        .map(|(name, f)| match f(opts) {
            Ok((passed, detail)) => Check { name, passed, detail },
            Err(e) => Check {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        })
        .collect()
}

fn labels_up_to_six_levels() -> impl Iterator<Item = (usize, Vec<ParityLabel>)> {
    (2..=6usize).map(|d| (d, ParityLabel::all(d - 1)))
}

fn character_sum() -> Result<(bool, String)> {
    let mut cases = 0;
    for (d, labels) in labels_up_to_six_levels() {
        for b in &labels {
            let mut sum = 0i64;
            for c in &labels {
                sum += character(c, b)? as i64;
            }
            let expected = if b.is_even() { 1i64 << (d - 1) } else { 0 };
            if sum != expected {
                return Ok((false, format!("D={d} b={b}: sum {sum}, expected {expected}")));
            }
            cases += 1;
        }
    }
    Ok((true, format!("{cases} labels, D = 2..6")))
}

fn character_product() -> Result<(bool, String)> {
    let mut cases = 0;
    for (d, labels) in labels_up_to_six_levels() {
        for c in &labels {
            for c2 in &labels {
                for b in &labels {
                    if character(c, b)? * character(c2, b)? != character(&c.add(c2), b)? {
                        return Ok((false, format!("D={d} c={c} c'={c2} b={b}")));
                    }
                    cases += 1;
                }
            }
        }
    }
    Ok((true, format!("{cases} triples, D = 2..6")))
}

fn commutation() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for d in 2..=4usize {
        for n in 1..=6u32 {
            let basis = FockBasis::new(d, n)?;
            let mut s = Vec::with_capacity(d * d);
            for i in 0..d {
                for j in 0..d {
                    s.push(spin_matrix(&basis, i, j)?.to_dense());
                }
            }
            let at = |i: usize, j: usize| &s[i * d + j];
            let zero = DMatrix::<f64>::zeros(basis.len(), basis.len());
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        for l in 0..d {
                            let lhs = at(i, j) * at(k, l) - at(k, l) * at(i, j);
                            let mut rhs = zero.clone();
                            if j == k {
                                rhs += at(i, l);
                            }
                            if i == l {
                                rhs -= at(k, j);
                            }
                            worst = worst.max((lhs - rhs).amax());
                        }
                    }
                }
            }
        }
    }
    Ok((worst <= 1e-12, format!("max deviation {worst:.2e}, D <= 4, N <= 6")))
}

fn random_state(basis: &Arc<FockBasis>, rng: &mut ChaCha8Rng) -> Result<SymmetricState> {
    let coeffs = (0..basis.len())
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    SymmetricState::new(basis.clone(), coeffs)?.normalize()
}

fn projectors(opts: &SelftestOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst_split = 0.0f64;
    for d in 2..=4usize {
        for n in 1..=6u32 {
            let basis = Arc::new(FockBasis::new(d, n)?);
            let labels = ParityLabel::all(d - 1);
            let scale = 1i64 << (d - 1);
            // diagonal of P_c on each Fock state, as an exact integer sum over characters
            let mut diag = vec![vec![0i64; basis.len()]; labels.len()];
            for (k, occ) in basis.iter().enumerate() {
                let p = parity_of(occ);
                for (ci, c) in labels.iter().enumerate() {
                    let mut acc = 0i64;
                    for b in &labels {
                        acc += (character(c, b)? * character(b, &p)?) as i64;
                    }
                    if acc % scale != 0 {
                        return Ok((false, format!("D={d} N={n}: non-integral projector entry")));
                    }
                    diag[ci][k] = acc / scale;
                }
            }
            for k in 0..basis.len() {
                let column: Vec<i64> = diag.iter().map(|row| row[k]).collect();
                if column.iter().sum::<i64>() != 1 || column.iter().any(|&x| x * x != x) {
                    return Ok((false, format!("D={d} N={n} state {k}: projectors not complete/orthogonal")));
                }
            }
            // parity operators act diagonally with the matching character
            for b in &labels {
                for (k, occ) in basis.iter().enumerate() {
                    let mut unit = vec![Complex64::new(0.0, 0.0); basis.len()];
                    unit[k] = Complex64::new(1.0, 0.0);
                    let e = SymmetricState::new(basis.clone(), unit)?;
                    let image = apply_parity_operator(b, &e)?;
                    let expected = character(b, &parity_of(occ))? as f64;
                    if image.coeffs()[k] != Complex64::new(expected, 0.0) {
                        return Ok((false, format!("D={d} N={n}: parity operator {b} mismatch")));
                    }
                }
            }
            // sector projections of a random state rebuild it
            let psi = random_state(&basis, &mut rng)?;
            let mut rebuilt = vec![Complex64::new(0.0, 0.0); basis.len()];
            for c in &labels {
                if let Ok((part, norm)) = project_parity(&psi, c, 0.0) {
                    for (r, x) in rebuilt.iter_mut().zip(part.coeffs()) {
                        *r += x * norm;
                    }
                }
            }
            for (r, x) in rebuilt.iter().zip(psi.coeffs()) {
                worst_split = worst_split.max((r - x).norm());
            }
        }
    }
    Ok((
        worst_split <= 1e-12,
        format!("exact on D <= 4, N <= 6; random-state split error {worst_split:.2e}"),
    ))
}

fn hamiltonian_parity() -> Result<(bool, String)> {
    let mut entries = 0usize;
    for d in 2..=4usize {
        for n in 2..=8u32 {
            let density = LMGParams::new(d, n, 0.7 + 0.3 * d as f64);
            let mut general = density.clone();
            general.general = Some(GeneralCouplings {
                gaps: (0..d - 1).map(|k| 1.0 + 0.25 * k as f64).collect(),
                lambda1: 0.6,
                lambda2: 0.4,
            });
            for p in [density, general] {
                let h = build_hamiltonian(&p)?;
                let labels = sector_labels(h.basis());
                for &(r, c, _) in h.matrix().upper() {
                    if labels[r] != labels[c] {
                        return Ok((false, format!("D={d} N={n}: H couples {} and {}", labels[r], labels[c])));
                    }
                    entries += 1;
                }
            }
        }
    }
    Ok((true, format!("{entries} off-diagonal entries stay inside their sector")))
}

fn resolution_of_identity(opts: &SelftestOptions) -> Result<(bool, String)> {
    let mut worst_sigma = 0.0f64;
    for d in 2..=3usize {
        for n in 1..=4u32 {
            let basis = Arc::new(FockBasis::new(d, n)?);
            let dim = basis.len();
            let kernel = CoherentKernel::new(basis.clone());
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ ((d as u64) << 8 | n as u64));
            // real and imaginary parts of every entry of dim |z><z|
            let mut acc = vec![(Welford::default(), Welford::default()); dim * dim];
            let mut c = Vec::with_capacity(dim);
            for _ in 0..opts.identity_samples {
                let u = haar_unit(d, &mut rng);
                kernel.coefficients_homogeneous(&u, &mut c);
                for k in 0..dim {
                    for l in 0..dim {
                        let x = c[k] * c[l].conj() * dim as f64;
                        let slot = &mut acc[k * dim + l];
                        slot.0.push(x.re);
                        slot.1.push(x.im);
                    }
                }
            }
            for k in 0..dim {
                for l in 0..dim {
                    let target = if k == l { 1.0 } else { 0.0 };
                    let (re, im) = &acc[k * dim + l];
                    for (w, t) in [(re, target), (im, 0.0)] {
                        let dev = (w.mean() - t).abs();
                        let se = w.std_error();
                        if dev > 5.0 * se + 1e-12 {
                            return Ok((false, format!("D={d} N={n} entry ({k},{l}): {dev:.3e} > 5 x {se:.3e}")));
                        }
                        if se > 0.0 {
                            worst_sigma = worst_sigma.max(dev / se);
                        }
                    }
                }
            }
        }
    }
    Ok((true, format!("largest deviation {worst_sigma:.2} standard errors, D <= 3, N <= 4")))
}

fn lieb_bound(opts: &SelftestOptions) -> Result<(bool, String)> {
    let (d, n) = (3usize, 4u32);
    let basis = Arc::new(FockBasis::new(d, n)?);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(7));
    let coherent = dscs(&basis, &haar_sample(d, &mut rng))?;
    let (s_cs, e_cs) = wehrl_entropy(&coherent, &IntegrationSpec::haar(10 * opts.lieb_samples, opts.seed))?;
    let mut min_margin = f64::INFINITY;
    for k in 0..opts.lieb_states {
        let psi = random_state(&basis, &mut rng)?;
        let spec = IntegrationSpec::haar(opts.lieb_samples, opts.seed.wrapping_add(1 + k as u64));
        let (s, e) = wehrl_entropy(&psi, &spec)?;
        let sigma = (e * e + e_cs * e_cs).sqrt();
        let margin = (s - s_cs) / sigma;
        min_margin = min_margin.min(margin);
        if margin < -3.0 {
            return Ok((false, format!("state {k}: S_W = {s:.5} below coherent {s_cs:.5}")));
        }
    }
    Ok((
        true,
        format!(
            "{} random states, coherent S_W = {s_cs:.5}, smallest margin {min_margin:.1} sigma",
            opts.lieb_states
        ),
    ))
}
