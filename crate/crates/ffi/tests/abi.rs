use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use udcat_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(udcat_last_error()) }.to_str().unwrap().to_owned()
}

#[test]
fn handles_round_trip() {
    unsafe {
        let mut basis = ptr::null_mut();
        assert_eq!(udcat_basis_new(3, 4, &mut basis), UdcatStatus::Ok);
        let mut len = 0usize;
        assert_eq!(udcat_basis_len(basis, &mut len), UdcatStatus::Ok);
        assert_eq!(len, 15);

        let (re, im) = ([0.3, -0.2], [0.1, 0.0]);
        let mut coherent = ptr::null_mut();
        assert_eq!(udcat_state_coherent(basis, re.as_ptr(), im.as_ptr(), 2, &mut coherent), UdcatStatus::Ok);
        let mut q = 0.0;
        assert_eq!(udcat_husimi(coherent, re.as_ptr(), im.as_ptr(), 2, &mut q), UdcatStatus::Ok);
        assert!((q - 1.0).abs() < 1e-12);

        // coherent-state moments: prod_k (N+k)/(2N+k) for D = 3, N = 4
        let mut m2 = 0.0;
        assert_eq!(udcat_moment(coherent, 2, &mut m2), UdcatStatus::Ok);
        assert!((m2 - (5.0 * 6.0) / (9.0 * 10.0)).abs() < 1e-12);

        let mut cat = ptr::null_mut();
        assert_eq!(udcat_state_cat(basis, re.as_ptr(), im.as_ptr(), 2, 0b01, &mut cat), UdcatStatus::Ok);
        let (mut cre, mut cim) = (vec![0.0; 15], vec![0.0; 15]);
        assert_eq!(
            udcat_state_coefficients(cat, cre.as_mut_ptr(), cim.as_mut_ptr(), 15, &mut len),
            UdcatStatus::Ok
        );
        let norm: f64 = cre.iter().zip(&cim).map(|(a, b)| a * a + b * b).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert_eq!(
            udcat_state_coefficients(cat, cre.as_mut_ptr(), cim.as_mut_ptr(), 3, &mut len),
            UdcatStatus::InvalidArgument
        );
        assert_eq!(len, 15);

        let mut f = -1.0;
        assert_eq!(udcat_fidelity(cat, coherent, &mut f), UdcatStatus::Ok);
        assert!(f > 0.0 && f < 1.0);

        let (mut s, mut e) = (0.0, 0.0);
        assert_eq!(udcat_wehrl(coherent, 20_000, 1, &mut s, &mut e), UdcatStatus::Ok);
        assert!((s - (4.0 / 5.0 + 4.0 / 6.0)).abs() < 5.0 * e);

        udcat_state_free(cat);
        udcat_state_free(coherent);
        udcat_basis_free(basis);
        udcat_basis_free(ptr::null_mut());
    }
}

#[test]
fn spectrum_levels_and_bounds() {
    unsafe {
        let mut spec = ptr::null_mut();
        assert_eq!(udcat_spectrum_new(3, 20, 1.0, 0.0, 6, &mut spec), UdcatStatus::Ok);
        let mut n = 0;
        assert_eq!(udcat_spectrum_len(spec, &mut n), UdcatStatus::Ok);
        assert_eq!(n, 6);
        let (mut e, mut mask, mut c) = (0.0, 0u32, 0.0);
        assert_eq!(udcat_spectrum_level(spec, 0, &mut e, &mut mask, &mut c), UdcatStatus::Ok);
        assert_eq!((e, mask), (-1.0, 0));
        assert!(c >= 1.0 - 1e-8);
        assert_eq!(udcat_spectrum_level(spec, 6, &mut e, &mut mask, &mut c), UdcatStatus::InvalidArgument);
        assert!(last_error().contains("index 6"));
        udcat_spectrum_free(spec);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut basis = ptr::null_mut();
        assert_eq!(udcat_basis_new(1, 4, &mut basis), UdcatStatus::InvalidArgument);
        assert_eq!(udcat_basis_new(40, 100, &mut basis), UdcatStatus::CapacityExceeded);
        assert!(last_error().contains("capacity"));
        assert_eq!(udcat_basis_new(3, 4, ptr::null_mut()), UdcatStatus::NullPointer);
        let mut v = 0.0;
        assert_eq!(udcat_gs_energy_limit(1.0, -1.0, &mut v), UdcatStatus::InvalidArgument);
        let (mut z1, mut z2) = (0.0, 0.0);
        assert_eq!(udcat_critical_point(1.0, 2.5, &mut z1, &mut z2), UdcatStatus::Ok);
        assert!((z1 - (5.0f64 / 8.0).sqrt()).abs() < 1e-15 && (z2 - 0.5).abs() < 1e-15);
        assert!(!CStr::from_ptr(udcat_version()).to_str().unwrap().is_empty());
    }
}

#[test]
fn header_declares_every_export() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/udcat.h")).unwrap();
    let source = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 20);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

/// Compiles a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler found; skipping");
        return;
    }
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<this test> -> target/<profile>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libudcat_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let exe = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("udcat_smoke");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(dir.join("include"))
        .arg(dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text} {}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(text.trim(), "len=231 mask=0 fidelity_ok=1 humps=1 limit=-1.125000 rejected=1");
}
