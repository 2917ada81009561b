//! Mean-field energy surface, critical points and parity-adapted variational
//! states of the LMG model, with fidelities against exact eigenstates.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::coherent::{cs_expectation, cs_quadratic_expectation_log, PhasePoint, SymmetricState};
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::lmg::{diagonalize, Hamiltonian, LMGParams, LmgOperators, SpectrumResult};
use crate::parity::{dcat, CatSpec, ParityLabel};

/// Mean-field phases of the three-level model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    I,
    II,
    III,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::I => "I",
            Phase::II => "II",
            Phase::III => "III",
        })
    }
}

/// Minimizer `(z1, z2)` of the three-level energy surface, taken nonnegative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalPoint {
    pub z1: f64,
    pub z2: f64,
    pub phase: Phase,
    pub lambda: f64,
}

impl CriticalPoint {
    pub fn point(&self) -> PhasePoint {
        PhasePoint::real(&[self.z1, self.z2])
    }
}

fn check_couplings(epsilon: f64, lambda: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParams(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParams(format!("lambda must be nonnegative, got {lambda}")));
    }
    Ok(())
}

/// Thermodynamic-limit energy density `lim <z|H|z>`.
///
/// For three levels this is the closed form
/// `eps (|z2|^2 - 1)/(1+|z|^2) - lambda [z1^2 (conj(z2)^2 + 1) + z2^2 + c.c.]/(1+|z|^2)^2`;
/// for other `D` it is `eps (|u_{D-1}|^2 - |u_0|^2) - lambda sum_{i != j} (conj(u_i) u_j)^2`
/// with `u` the unit homogeneous vector.
pub fn energy_surface(z: &PhasePoint, epsilon: f64, lambda: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::InvalidParams("non-finite phase point".into()));
    }
    if z.levels() == 3 {
        let (z1, z2) = (z.coords()[0], z.coords()[1]);
        let denom = 1.0 + z1.norm_sqr() + z2.norm_sqr();
        let pair = z1 * z1 * (z2.conj() * z2.conj() + 1.0) + z2 * z2;
        return Ok(epsilon * (z2.norm_sqr() - 1.0) / denom - lambda * 2.0 * pair.re / (denom * denom));
    }
    let u = z.unit_vector();
    let d = u.len();
    let mut two_body = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                let t = u[i].conj() * u[j];
                two_body += (t * t).re;
            }
        }
    }
    Ok(epsilon * (u[d - 1].norm_sqr() - u[0].norm_sqr()) - lambda * two_body)
}

/// `<z|H|z>` at finite `N` from closed-form coherent-state matrix elements.
pub fn finite_n_energy(z: &PhasePoint, p: &LMGParams) -> Result<f64> {
    p.validate()?;
    if z.levels() != p.levels {
        return Err(Error::DimensionMismatch {
            expected: p.levels - 1,
            found: z.coords().len(),
        });
    }
    let n = p.particles;
    let nf = n as f64;
    let d = p.levels;
    let s = |i: usize, j: usize| cs_expectation(z, z, i, j, n);
    let s2 = |i: usize, j: usize, k: usize, l: usize| cs_quadratic_expectation_log(z, z, i, j, k, l, n);
    let mut total = Complex64::new(0.0, 0.0);
    match &p.general {
        None => {
            total += (s(d - 1, d - 1)? - s(0, 0)?) * (p.epsilon / nf);
            let scale = p.lambda / (nf * (nf - 1.0));
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        total -= s2(i, j, i, j)? * scale;
                    }
                }
            }
        }
        Some(g) => {
            for (i, eps) in g.gaps.iter().enumerate() {
                total += (s(i + 1, i + 1)? - s(i, i)?) * *eps;
            }
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        total += s2(i, j, i, j)? * g.lambda1 + s2(i, j, j, i)? * g.lambda2;
                    }
                }
            }
        }
    }
    Ok(total.re)
}

/// Piecewise critical point of the three-level energy surface.
pub fn critical_point(epsilon: f64, lambda: f64) -> Result<CriticalPoint> {
    check_couplings(epsilon, lambda)?;
    let (z1, z2, phase) = if lambda <= 0.5 * epsilon {
        (0.0, 0.0, Phase::I)
    } else if lambda <= 1.5 * epsilon {
        (((2.0 * lambda - epsilon) / (2.0 * lambda + epsilon)).sqrt(), 0.0, Phase::II)
    } else {
        let d = 2.0 * lambda + 3.0 * epsilon;
        ((2.0 * lambda / d).sqrt(), ((2.0 * lambda - 3.0 * epsilon) / d).sqrt(), Phase::III)
    };
    Ok(CriticalPoint { z1, z2, phase, lambda })
}

/// Ground-state energy density in the thermodynamic limit.
pub fn gs_energy_limit(epsilon: f64, lambda: f64) -> Result<f64> {
    check_couplings(epsilon, lambda)?;
    Ok(if lambda <= 0.5 * epsilon {
        -epsilon
    } else if lambda <= 1.5 * epsilon {
        -(2.0 * lambda + epsilon).powi(2) / (8.0 * lambda)
    } else {
        -(4.0 * lambda * lambda + 3.0 * epsilon * epsilon) / (6.0 * lambda)
    })
}

fn require_qutrit(p: &LMGParams) -> Result<()> {
    if p.levels != 3 {
        return Err(Error::InvalidParams(format!(
            "variational states are defined for D = 3, got D = {}",
            p.levels
        )));
    }
    Ok(())
}

/// Parity-`c` cat at the critical point for `p.lambda`, using the reduced-cat
/// limit on vanishing critical coordinates.
pub fn variational_cat(c: &ParityLabel, p: &LMGParams) -> Result<SymmetricState> {
    require_qutrit(p)?;
    let basis = Arc::new(FockBasis::new(p.levels, p.particles)?);
    variational_cat_in(&basis, c, p.epsilon, p.lambda)
}

pub fn variational_cat_in(basis: &Arc<FockBasis>, c: &ParityLabel, epsilon: f64, lambda: f64) -> Result<SymmetricState> {
    let cp = critical_point(epsilon, lambda)?;
    dcat(basis, &CatSpec::new(cp.point(), *c, basis.particles()))
}

/// `|<a|b>|^2`.
pub fn fidelity(a: &SymmetricState, b: &SymmetricState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// Outcome of one Nelder-Mead run.
#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0` with an initial simplex of edge `step`.
/// Stops when every vertex lies within `tol` (max-norm) of the best one.
pub fn nelder_mead<F>(f: F, x0: &[f64], step: f64, tol: f64, max_iter: usize) -> NelderMeadOutcome
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x);
        simplex.push((x, v));
    }
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread < tol {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let reflected = lerp(&centroid, &worst.0, -1.0);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = lerp(&centroid, &worst.0, -2.0);
            let fe = eval(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let (target, ft) = if fr < worst.1 { (&reflected, fr) } else { (&worst.0, worst.1) };
            let contracted = lerp(&centroid, target, 0.5);
            let fc = eval(&contracted);
            if fc < ft {
                simplex[n] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let x = lerp(&best, &v.0, 0.5);
                    let fx = eval(&x);
                    *v = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    NelderMeadOutcome {
        x,
        value,
        iterations,
        converged,
    }
}

/// Settings for [`maximize_overlap`].
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapOptions {
    /// Real starting points `(z1, z2)`.
    pub starts: Vec<(f64, f64)>,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Also optimize imaginary parts (starting from zero).
    pub complex: bool,
}

impl Default for OverlapOptions {
    fn default() -> Self {
        let axis: Vec<f64> = (0..5).map(|k| 0.3 * k as f64).collect();
        let starts = axis.iter().flat_map(|&a| axis.iter().map(move |&b| (a, b))).collect();
        Self {
            starts,
            tolerance: 1e-8,
            max_iterations: 500,
            complex: false,
        }
    }
}

impl OverlapOptions {
    pub fn with_start(mut self, z1: f64, z2: f64) -> Self {
        self.starts.push((z1, z2));
        self
    }
}

/// Per-start record of an overlap maximization.
#[derive(Clone, Debug, PartialEq)]
pub struct StartOutcome {
    pub start: (f64, f64),
    pub z: PhasePoint,
    pub fidelity: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Best overlap found.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapResult {
    /// Real parts taken nonnegative: the objective is invariant under `z_i -> -z_i`.
    pub z_max: PhasePoint,
    pub f_max: f64,
    pub starts: Vec<StartOutcome>,
}

/// Maximizes `|<z|_c psi>|^2` over `z` by multi-start Nelder-Mead.
///
/// For `psi` in sector `c` the objective equals `Q_psi(z) / N(z)_c^2`; it is
/// evaluated directly as the fidelity with the (limit-aware) cat state.
pub fn maximize_overlap(psi: &SymmetricState, c: &ParityLabel, opts: &OverlapOptions) -> Result<OverlapResult> {
    if psi.levels() != 3 {
        return Err(Error::InvalidParams("overlap maximization is defined for D = 3".into()));
    }
    if opts.starts.is_empty() {
        return Err(Error::InvalidParams("no starting points".into()));
    }
    let basis = psi.basis().clone();
    let n = basis.particles();
    let to_point = |x: &[f64]| -> PhasePoint {
        if opts.complex {
            PhasePoint::new(vec![Complex64::new(x[0], x[2]), Complex64::new(x[1], x[3])])
        } else {
            PhasePoint::real(&[x[0], x[1]])
        }
    };
    let objective = |x: &[f64]| -> Result<f64> {
        let cat = dcat(&basis, &CatSpec::new(to_point(x), *c, n))?;
        fidelity(&cat, psi)
    };
    let outcomes: Vec<Result<StartOutcome>> = opts
        .starts
        .par_iter()
        .map(|&(a, b)| {
            let x0 = if opts.complex { vec![a, b, 0.0, 0.0] } else { vec![a, b] };
            let run = nelder_mead(
                |x| objective(x).map(|f| -f).unwrap_or(f64::INFINITY),
                &x0,
                0.1,
                opts.tolerance,
                opts.max_iterations,
            );
            if !run.value.is_finite() {
                return Err(Error::Numerical(format!("overlap search from ({a}, {b}) failed")));
            }
            let z = canonical(&to_point(&run.x));
            if !run.converged {
                log::debug!("overlap search from ({a}, {b}) hit the iteration cap");
            }
            Ok(StartOutcome {
                start: (a, b),
                fidelity: -run.value,
                z,
                iterations: run.iterations,
                converged: run.converged,
            })
        })
        .collect();
    let starts: Vec<StartOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok().cloned()).collect();
    if starts.is_empty() {
        return Err(outcomes.into_iter().find_map(|o| o.err()).expect("at least one error"));
    }
    let best = starts
        .iter()
        .max_by(|a, b| {
            a.fidelity.total_cmp(&b.fidelity).then_with(|| {
                // deterministic tie-break: lexicographically smaller z wins
                let key = |s: &StartOutcome| s.z.coords().iter().map(|c| c.re).collect::<Vec<_>>();
                key(b).partial_cmp(&key(a)).unwrap_or(std::cmp::Ordering::Equal)
            })
        })
        .expect("nonempty");
    Ok(OverlapResult {
        z_max: best.z.clone(),
        f_max: best.fidelity,
        starts,
    })
}

fn canonical(z: &PhasePoint) -> PhasePoint {
    PhasePoint::new(
        z.coords()
            .iter()
            .map(|c| if c.re < 0.0 { -c } else { *c })
            .collect(),
    )
}

/// Alternative variational state: minimizes `<z|_c H |z>_c` at finite `N`
/// over real `z` instead of using the thermodynamic critical point.
pub fn minimize_cat_energy(h: &Hamiltonian, c: &ParityLabel, start: (f64, f64)) -> Result<(PhasePoint, f64)> {
    if h.basis().levels() != 3 {
        return Err(Error::InvalidParams("cat energy minimization is defined for D = 3".into()));
    }
    let basis = h.basis().clone();
    let n = basis.particles();
    let energy = |x: &[f64]| -> f64 {
        dcat(&basis, &CatSpec::new(PhasePoint::real(x), *c, n))
            .and_then(|s| h.expectation(&s))
            .unwrap_or(f64::INFINITY)
    };
    let run = nelder_mead(energy, &[start.0, start.1], 0.1, 1e-8, 500);
    if !run.value.is_finite() {
        return Err(Error::Numerical("cat energy minimization failed".into()));
    }
    Ok((canonical(&PhasePoint::real(&run.x)), run.value))
}

/// For each parity sector, the index of its lowest eigenstate within `spectrum.eigenstates`.
pub fn lowest_per_sector(spectrum: &SpectrumResult, levels: usize) -> Result<Vec<(usize, ParityLabel)>> {
    ParityLabel::all(levels - 1)
        .into_iter()
        .map(|c| {
            spectrum
                .parities
                .iter()
                .position(|(l, _)| *l == c)
                .map(|i| (i, c))
                .ok_or_else(|| Error::Numerical(format!("no eigenstate of parity {c} among the kept levels")))
        })
        .collect()
}

/// One row of a fidelity sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityRow {
    pub lambda: f64,
    /// Position of the eigenstate in the energy ordering.
    pub state: usize,
    pub parity: ParityLabel,
    pub f_critical: f64,
    /// Absent when maximization was not requested.
    pub f_max: Option<f64>,
    pub z_max: Option<(f64, f64)>,
}

/// Fidelities of the variational cats with the lowest eigenstate of every
/// parity sector, for the three-level density Hamiltonian at each `lambda`.
pub fn fidelity_curve(
    levels: usize,
    particles: u32,
    epsilon: f64,
    lambdas: &[f64],
    maximize: bool,
) -> Result<Vec<Result<Vec<FidelityRow>>>> {
    require_qutrit(&LMGParams::new(levels, particles, 0.0))?;
    let ops = LmgOperators::new(levels, particles)?;
    let keep = 4 * (1usize << (levels - 1));
    Ok(lambdas
        .par_iter()
        .map(|&lambda| {
            let h = ops.hamiltonian(epsilon, lambda);
            let spec = diagonalize(&h, keep)?;
            let cp = critical_point(epsilon, lambda)?;
            let mut rows = Vec::new();
            for (i, c) in lowest_per_sector(&spec, levels)? {
                let psi = &spec.eigenstates[i];
                let cat = variational_cat_in(ops.basis(), &c, epsilon, lambda)?;
                let f_critical = fidelity(&cat, psi)?;
                let (f_max, z_max) = if maximize {
                    let opts = OverlapOptions::default().with_start(cp.z1, cp.z2);
                    let best = maximize_overlap(psi, &c, &opts)?;
                    let z = best.z_max.coords();
                    (Some(best.f_max.max(f_critical)), Some((z[0].re, z[1].re)))
                } else {
                    (None, None)
                };
                rows.push(FidelityRow {
                    lambda,
                    state: i,
                    parity: c,
                    f_critical,
                    f_max,
                    z_max,
                });
            }
            Ok(rows)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherent::dscs;
    use crate::lmg::build_hamiltonian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn energy_surface_values() {
        assert_eq!(energy_surface(&PhasePoint::origin(3), 1.0, 0.7).unwrap(), -1.0);
        let z = PhasePoint::real(&[1.0 / 3f64.sqrt(), 0.0]);
        assert!((energy_surface(&z, 1.0, 1.0).unwrap() + 9.0 / 8.0).abs() < 1e-15);
        let cp = critical_point(1.0, 2.5).unwrap();
        assert!((energy_surface(&cp.point(), 1.0, 2.5).unwrap() + 28.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn energy_surface_parity_invariance_and_general_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let z1 = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let z2 = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let lambda = rng.random_range(0.0..4.0);
            let e = energy_surface(&PhasePoint::new(vec![z1, z2]), 1.0, lambda).unwrap();
            assert_eq!(e, energy_surface(&PhasePoint::new(vec![-z1, z2]), 1.0, lambda).unwrap());
            assert_eq!(e, energy_surface(&PhasePoint::new(vec![z1, -z2]), 1.0, lambda).unwrap());
            // general-D path on the same point
            let u = PhasePoint::new(vec![z1, z2]).unit_vector();
            let mut two = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        two += ((u[i].conj() * u[j]).powi(2)).re;
                    }
                }
            }
            let general = u[2].norm_sqr() - u[0].norm_sqr() - lambda * two;
            assert!((e - general).abs() < 1e-13);
        }
    }

    #[test]
    fn critical_points_and_limits() {
        let cp = critical_point(1.0, 0.25).unwrap();
        assert_eq!((cp.z1, cp.z2, cp.phase), (0.0, 0.0, Phase::I));
        let cp = critical_point(1.0, 1.0).unwrap();
        assert!((cp.z1 - (1.0f64 / 3.0).sqrt()).abs() < 1e-15 && cp.z2 == 0.0 && cp.phase == Phase::II);
        let cp = critical_point(1.0, 2.5).unwrap();
        assert!((cp.z1 - (5.0f64 / 8.0).sqrt()).abs() < 1e-15);
        assert!((cp.z2 - 0.5).abs() < 1e-15);
        assert_eq!(cp.phase, Phase::III);
        assert_eq!(gs_energy_limit(1.0, 0.25).unwrap(), -1.0);
        assert!((gs_energy_limit(1.0, 1.0).unwrap() + 1.125).abs() < 1e-15);
        assert!((gs_energy_limit(1.0, 2.5).unwrap() + 28.0 / 15.0).abs() < 1e-15);
        for l in [0.5, 1.5] {
            let (a, b) = (critical_point(1.0, l - 1e-12).unwrap(), critical_point(1.0, l + 1e-12).unwrap());
            assert!((a.z1 - b.z1).abs() < 1e-5 && (a.z2 - b.z2).abs() < 1e-5);
            let e = |x: f64| gs_energy_limit(1.0, x).unwrap();
            assert!((e(l - 1e-9) - e(l + 1e-9)).abs() < 1e-8);
        }
        assert!(critical_point(1.0, -0.1).is_err());
    }

    #[test]
    fn critical_point_minimizes_surface() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for lambda in [0.2, 0.8, 1.4, 2.5, 6.0] {
            let e0 = gs_energy_limit(1.0, lambda).unwrap();
            let cp = critical_point(1.0, lambda).unwrap();
            assert!((energy_surface(&cp.point(), 1.0, lambda).unwrap() - e0).abs() < 1e-13);
            for _ in 0..200 {
                let z = PhasePoint::new(vec![
                    Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0)),
                    Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0)),
                ]);
                assert!(energy_surface(&z, 1.0, lambda).unwrap() >= e0 - 1e-13);
            }
        }
    }

    #[test]
    fn finite_n_energy_matches_matrix_sandwich() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = LMGParams::new(3, 50, 1.7);
        let h = build_hamiltonian(&p).unwrap();
        for _ in 0..5 {
            let z = PhasePoint::new(vec![
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            ]);
            let s = dscs(h.basis(), &z).unwrap();
            let direct = h.expectation(&s).unwrap();
            assert!((finite_n_energy(&z, &p).unwrap() - direct).abs() < 1e-10);
        }
        assert!((finite_n_energy(&PhasePoint::origin(3), &p).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn finite_n_energy_equals_surface_at_every_n() {
        // <S_ij^2> = N(N-1) (conj(u_i) u_j)^2 for i != j, so the density is N-independent
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let z = PhasePoint::new(vec![
                Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(-0.5..0.5)),
                Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(-0.5..0.5)),
            ]);
            let lambda = rng.random_range(0.1..3.0);
            let limit = energy_surface(&z, 1.0, lambda).unwrap();
            for n in [2u32, 10, 100, 1000] {
                let e = finite_n_energy(&z, &LMGParams::new(3, n, lambda)).unwrap();
                assert!((e - limit).abs() <= 5e-3 && (e - limit).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn general_mode_finite_energy_matches_sandwich() {
        let mut p = LMGParams::new(3, 7, 0.0);
        p.general = Some(crate::lmg::GeneralCouplings {
            gaps: vec![0.4, 1.1],
            lambda1: -0.3,
            lambda2: 0.2,
        });
        let h = build_hamiltonian(&p).unwrap();
        let z = PhasePoint::new(vec![Complex64::new(0.3, -0.2), Complex64::new(-0.5, 0.4)]);
        let s = dscs(h.basis(), &z).unwrap();
        assert!((finite_n_energy(&z, &p).unwrap() - h.expectation(&s).unwrap()).abs() < 1e-11);
    }

    #[test]
    fn variational_cat_limits() {
        let n = 20;
        let b = Arc::new(FockBasis::new(3, n).unwrap());
        let even = variational_cat(&ParityLabel::even(2), &LMGParams::new(3, n, 0.0)).unwrap();
        let fock = SymmetricState::fock(b.clone(), &[n, 0, 0]).unwrap();
        assert!((fidelity(&even, &fock).unwrap() - 1.0).abs() < 1e-14);
        let odd = variational_cat(&ParityLabel::new(&[1, 1]).unwrap(), &LMGParams::new(3, n, 0.0)).unwrap();
        let fock = SymmetricState::fock(b.clone(), &[n - 2, 1, 1]).unwrap();
        assert!((fidelity(&odd, &fock).unwrap() - 1.0).abs() < 1e-14);
        // phase II [1,0] is the qubit-like odd cat along z1 only
        let cp = critical_point(1.0, 1.0).unwrap();
        let s = variational_cat(&ParityLabel::new(&[1, 0]).unwrap(), &LMGParams::new(3, n, 1.0)).unwrap();
        for (occ, c) in b.iter().zip(s.coeffs()) {
            if occ.get(2) != 0 {
                assert_eq!(c.norm(), 0.0);
            }
        }
        let exact = dcat(&b, &CatSpec::new(PhasePoint::real(&[cp.z1, 0.0]), ParityLabel::new(&[1, 0]).unwrap(), n)).unwrap();
        assert!((fidelity(&s, &exact).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fidelity_properties() {
        let b = Arc::new(FockBasis::new(3, 6).unwrap());
        let a = dcat(&b, &CatSpec::new(PhasePoint::real(&[0.4, 0.3]), ParityLabel::even(2), 6)).unwrap();
        let c = dcat(&b, &CatSpec::new(PhasePoint::real(&[0.4, 0.3]), ParityLabel::new(&[0, 1]).unwrap(), 6)).unwrap();
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(fidelity(&a, &c).unwrap(), 0.0);
        let other = Arc::new(FockBasis::new(3, 5).unwrap());
        let d = dscs(&other, &PhasePoint::origin(3)).unwrap();
        assert!(fidelity(&a, &d).is_err());
    }

    #[test]
    fn nelder_mead_minimizes_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = nelder_mead(f, &[-1.2, 1.0], 0.1, 1e-10, 5000);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn overlap_maximization_recovers_self_target() {
        let n = 20;
        let b = Arc::new(FockBasis::new(3, n).unwrap());
        for (w, c) in [([0.7, 0.4], [0u8, 0u8]), ([0.5, 0.9], [1, 0]), ([0.8, 0.3], [1, 1])] {
            let c = ParityLabel::new(&c).unwrap();
            let psi = dcat(&b, &CatSpec::new(PhasePoint::real(&w), c, n)).unwrap();
            let res = maximize_overlap(&psi, &c, &OverlapOptions::default()).unwrap();
            assert!(res.f_max >= 1.0 - 1e-8, "{}", res.f_max);
            let z = res.z_max.coords();
            assert!((z[0].re - w[0]).abs() < 1e-3 && (z[1].re - w[1]).abs() < 1e-3, "{z:?}");
            assert_eq!(res.starts.len(), 25);
        }
    }

    #[test]
    fn low_coupling_fidelity_is_near_one() {
        let p = LMGParams::new(3, 20, 1e-3);
        let h = build_hamiltonian(&p).unwrap();
        let spec = diagonalize(&h, 1).unwrap();
        let cat = variational_cat(&ParityLabel::even(2), &p).unwrap();
        assert!(fidelity(&cat, &spec.eigenstates[0]).unwrap() >= 0.999);
    }

    #[test]
    fn cat_energy_minimization_beats_critical_point() {
        let p = LMGParams::new(3, 12, 2.5);
        let h = build_hamiltonian(&p).unwrap();
        let c = ParityLabel::even(2);
        let cp = critical_point(1.0, 2.5).unwrap();
        let at_critical = h.expectation(&variational_cat(&c, &p).unwrap()).unwrap();
        let (_, best) = minimize_cat_energy(&h, &c, (cp.z1, cp.z2)).unwrap();
        let e0 = diagonalize(&h, 1).unwrap().ground_energy();
        assert!(best <= at_critical + 1e-12);
        assert!(best >= e0 - 1e-12);
    }
}
