//! C ABI for `udcat`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`-style
//! functions and released by the matching `*_free`. Every fallible call
//! returns a [`UdcatStatus`]; on failure a description is available from
//! [`udcat_last_error`] on the same thread. Panics never unwind into C.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use num_complex::Complex64;
use udcat::coherent::{dscs, PhasePoint, SymmetricState};
use udcat::fock::FockBasis;
use udcat::husimi::{count_humps, husimi_value, moment_analytic, wehrl_entropy, GridSpec, IntegrationSpec};
use udcat::lmg::{diagonalize, LMGParams, LmgOperators, SpectrumResult};
use udcat::parity::{dcat, CatSpec, ParityLabel};
use udcat::variational::{critical_point, fidelity, gs_energy_limit, variational_cat_in};
use udcat::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UdcatStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    CapacityExceeded = 3,
    NumericalFailure = 4,
    Panic = 5,
}

/// Symmetric Fock basis for `D` levels and `N` particles.
pub struct UdcatBasis(Arc<FockBasis>);

/// Normalized state in a basis.
pub struct UdcatState(SymmetricState);

/// Low-lying LMG spectrum with parity labels and eigenvectors.
pub struct UdcatSpectrum(SpectrumResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> UdcatStatus {
    match e {
        Error::Capacity { .. } => UdcatStatus::CapacityExceeded,
        Error::ZeroProjection { .. } | Error::DivisionHazard { .. } | Error::Numerical(_) => {
            UdcatStatus::NumericalFailure
        }
        _ => UdcatStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> UdcatStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UdcatStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            UdcatStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            UdcatStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

/// Reads `len` complex coordinates from split real/imaginary arrays.
unsafe fn read_point(re: *const f64, im: *const f64, len: usize) -> Result<PhasePoint, Failure> {
    if len == 0 {
        return Ok(PhasePoint::new(Vec::new()));
    }
    if re.is_null() || im.is_null() {
        return Err(Failure::Null("coordinates"));
    }
    let (re, im) = (std::slice::from_raw_parts(re, len), std::slice::from_raw_parts(im, len));
    Ok(PhasePoint::new(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect()))
}

fn check_point(basis: &FockBasis, z: &PhasePoint) -> Result<(), Failure> {
    if z.coords().len() + 1 != basis.levels() {
        return Err(Error::DimensionMismatch {
            expected: basis.levels() - 1,
            found: z.coords().len(),
        }
        .into());
    }
    Ok(())
}

fn label(levels: usize, mask: u32) -> Result<ParityLabel, Failure> {
    let len = levels - 1;
    if len > 31 {
        return Err(Error::InvalidParams(format!("parity labels support at most 32 levels, got {levels}")).into());
    }
    if mask >> len != 0 {
        return Err(Error::InvalidParams(format!("parity mask {mask:#x} has bits beyond {len} levels")).into());
    }
    Ok(ParityLabel::from_mask(len, mask))
}

/// Message of the last failure on this thread. The pointer stays valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn udcat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn udcat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[no_mangle]
pub unsafe extern "C" fn udcat_basis_new(levels: usize, particles: u32, basis: *mut *mut UdcatBasis) -> UdcatStatus {
    guard(|| {
        let slot = out(basis, "basis")?;
        let b = FockBasis::new(levels, particles)?;
        *slot = Box::into_raw(Box::new(UdcatBasis(Arc::new(b))));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn udcat_basis_len(basis: *const UdcatBasis, len: *mut usize) -> UdcatStatus {
    guard(|| {
        *out(len, "len")? = get(basis, "basis")?.0.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn udcat_basis_free(basis: *mut UdcatBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

fn emit(state: SymmetricState, slot: &mut *mut UdcatState) {
    *slot = Box::into_raw(Box::new(UdcatState(state)));
}

/// Coherent state at `z = re + i im` (`levels - 1` coordinates).
#[no_mangle]
pub unsafe extern "C" fn udcat_state_coherent(
    basis: *const UdcatBasis,
    re: *const f64,
    im: *const f64,
    len: usize,
    state: *mut *mut UdcatState,
) -> UdcatStatus {
    guard(|| {
        let slot = out(state, "state")?;
        let b = &get(basis, "basis")?.0;
        let z = read_point(re, im, len)?;
        check_point(b, &z)?;
        emit(dscs(b, &z)?, slot);
        Ok(())
    })
}

/// Parity-projected coherent state; bit `i` of `parity_mask` is the parity of level `i + 1`.
#[no_mangle]
pub unsafe extern "C" fn udcat_state_cat(
    basis: *const UdcatBasis,
    re: *const f64,
    im: *const f64,
    len: usize,
    parity_mask: u32,
    state: *mut *mut UdcatState,
) -> UdcatStatus {
    guard(|| {
        let slot = out(state, "state")?;
        let b = &get(basis, "basis")?.0;
        let z = read_point(re, im, len)?;
        check_point(b, &z)?;
        let c = label(b.levels(), parity_mask)?;
        emit(dcat(b, &CatSpec::new(z, c, b.particles()))?, slot);
        Ok(())
    })
}

/// Variational cat at the critical point of the three-level model.
#[no_mangle]
pub unsafe extern "C" fn udcat_state_variational(
    basis: *const UdcatBasis,
    parity_mask: u32,
    epsilon: f64,
    lambda: f64,
    state: *mut *mut UdcatState,
) -> UdcatStatus {
    guard(|| {
        let slot = out(state, "state")?;
        let b = &get(basis, "basis")?.0;
        let c = label(b.levels(), parity_mask)?;
        emit(variational_cat_in(b, &c, epsilon, lambda)?, slot);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn udcat_state_free(state: *mut UdcatState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Copies the coefficients into `re`/`im`, which must hold `capacity` entries.
/// `len` receives the basis size; copying happens only when it fits.
#[no_mangle]
pub unsafe extern "C" fn udcat_state_coefficients(
    state: *const UdcatState,
    re: *mut f64,
    im: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> UdcatStatus {
    guard(|| {
        let s = &get(state, "state")?.0;
        let n = s.coeffs().len();
        *out(len, "len")? = n;
        if capacity < n {
            return Err(Error::InvalidParams(format!("buffer holds {capacity} of {n} coefficients")).into());
        }
        if n > 0 && (re.is_null() || im.is_null()) {
            return Err(Failure::Null("coefficient buffers"));
        }
        for (k, c) in s.coeffs().iter().enumerate() {
            *re.add(k) = c.re;
            *im.add(k) = c.im;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn udcat_fidelity(a: *const UdcatState, b: *const UdcatState, value: *mut f64) -> UdcatStatus {
    guard(|| {
        *out(value, "value")? = fidelity(&get(a, "a")?.0, &get(b, "b")?.0)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn udcat_husimi(
    state: *const UdcatState,
    re: *const f64,
    im: *const f64,
    len: usize,
    value: *mut f64,
) -> UdcatStatus {
    guard(|| {
        let slot = out(value, "value")?;
        let s = &get(state, "state")?.0;
        *slot = husimi_value(s, &read_point(re, im, len)?)?;
        Ok(())
    })
}

/// Exact `nu`-th Husimi moment (`nu >= 2`).
#[no_mangle]
pub unsafe extern "C" fn udcat_moment(state: *const UdcatState, nu: u32, value: *mut f64) -> UdcatStatus {
    guard(|| {
        let slot = out(value, "value")?;
        *slot = moment_analytic(&get(state, "state")?.0, nu)?.value;
        Ok(())
    })
}

/// Wehrl entropy by Haar Monte Carlo, with its standard error.
#[no_mangle]
pub unsafe extern "C" fn udcat_wehrl(
    state: *const UdcatState,
    samples: usize,
    seed: u64,
    value: *mut f64,
    std_error: *mut f64,
) -> UdcatStatus {
    guard(|| {
        let v = out(value, "value")?;
        let e = out(std_error, "std_error")?;
        (*v, *e) = wehrl_entropy(&get(state, "state")?.0, &IntegrationSpec::haar(samples, seed))?;
        Ok(())
    })
}

/// Number of Husimi maxima on a square position slice `|x_i| <= half_width`.
#[no_mangle]
pub unsafe extern "C" fn udcat_count_humps(
    state: *const UdcatState,
    half_width: f64,
    resolution: usize,
    count: *mut usize,
) -> UdcatStatus {
    guard(|| {
        let slot = out(count, "count")?;
        *slot = count_humps(&get(state, "state")?.0, &GridSpec::new(half_width, resolution))?;
        Ok(())
    })
}

/// Diagonalizes the LMG energy density, keeping the lowest `keep` eigenvectors.
#[no_mangle]
pub unsafe extern "C" fn udcat_spectrum_new(
    levels: usize,
    particles: u32,
    epsilon: f64,
    lambda: f64,
    keep: usize,
    spectrum: *mut *mut UdcatSpectrum,
) -> UdcatStatus {
    guard(|| {
        let slot = out(spectrum, "spectrum")?;
        let mut p = LMGParams::new(levels, particles, lambda);
        p.epsilon = epsilon;
        p.validate()?;
        let h = LmgOperators::new(levels, particles)?.hamiltonian(epsilon, lambda);
        *slot = Box::into_raw(Box::new(UdcatSpectrum(diagonalize(&h, keep)?)));
        Ok(())
    })
}

/// Number of eigenvectors kept.
#[no_mangle]
pub unsafe extern "C" fn udcat_spectrum_len(spectrum: *const UdcatSpectrum, len: *mut usize) -> UdcatStatus {
    guard(|| {
        *out(len, "len")? = get(spectrum, "spectrum")?.0.eigenstates.len();
        Ok(())
    })
}

fn kept(s: &SpectrumResult, index: usize) -> Result<(), Failure> {
    if index >= s.eigenstates.len() {
        return Err(Error::InvalidParams(format!("index {index} beyond {} kept levels", s.eigenstates.len())).into());
    }
    Ok(())
}

/// Energy, parity mask and parity certainty of level `index`.
#[no_mangle]
pub unsafe extern "C" fn udcat_spectrum_level(
    spectrum: *const UdcatSpectrum,
    index: usize,
    energy: *mut f64,
    parity_mask: *mut u32,
    certainty: *mut f64,
) -> UdcatStatus {
    guard(|| {
        let s = &get(spectrum, "spectrum")?.0;
        kept(s, index)?;
        *out(energy, "energy")? = s.eigenvalues[index];
        let (l, c) = s.parities[index];
        *out(parity_mask, "parity_mask")? = l.mask();
        *out(certainty, "certainty")? = c;
        Ok(())
    })
}

/// Copy of eigenvector `index` as a new state handle.
#[no_mangle]
pub unsafe extern "C" fn udcat_spectrum_state(
    spectrum: *const UdcatSpectrum,
    index: usize,
    state: *mut *mut UdcatState,
) -> UdcatStatus {
    guard(|| {
        let slot = out(state, "state")?;
        let s = &get(spectrum, "spectrum")?.0;
        kept(s, index)?;
        emit(s.eigenstates[index].clone(), slot);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn udcat_spectrum_free(spectrum: *mut UdcatSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// Ground-state energy density of the three-level model as `N -> infinity`.
#[no_mangle]
pub unsafe extern "C" fn udcat_gs_energy_limit(epsilon: f64, lambda: f64, value: *mut f64) -> UdcatStatus {
    guard(|| {
        *out(value, "value")? = gs_energy_limit(epsilon, lambda)?;
        Ok(())
    })
}

/// Real critical coordinates `(z1, z2)` minimizing the energy surface.
#[no_mangle]
pub unsafe extern "C" fn udcat_critical_point(epsilon: f64, lambda: f64, z1: *mut f64, z2: *mut f64) -> UdcatStatus {
    guard(|| {
        let cp = critical_point(epsilon, lambda)?;
        *out(z1, "z1")? = cp.z1;
        *out(z2, "z2")? = cp.z2;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn null_out_pointer_is_reported() {
        let s = unsafe { udcat_basis_new(3, 4, ptr::null_mut()) };
        assert_eq!(s, UdcatStatus::NullPointer);
        let msg = unsafe { std::ffi::CStr::from_ptr(udcat_last_error()) };
        assert!(msg.to_str().unwrap().contains("null"));
    }

    #[test]
    fn mask_is_checked() {
        assert!(label(3, 0b11).is_ok());
        assert!(label(3, 0b100).is_err());
        assert!(label(40, 0).is_err());
    }
}
