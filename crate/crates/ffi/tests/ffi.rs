use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use latmap_ffi::*;

#[test]
fn round_trip_through_handles() {
    unsafe {
        let mut target = ptr::null_mut();
        assert_eq!(latmap_model_new_binary(3, &mut target), LatmapStatus::Ok);
        for (s, j) in [(&[0usize, 1][..], 0.8), (&[1, 2][..], -0.4), (&[2][..], 0.3)] {
            assert_eq!(latmap_model_add_parity(target, s.as_ptr(), s.len(), j), LatmapStatus::Ok);
        }
        assert_eq!(latmap_model_num_spins(target), 3);

        let mut inst = ptr::null_mut();
        assert_eq!(latmap_compile(target, LatmapBackend::Lgt4d, LatmapMode::Superclique, &mut inst), LatmapStatus::Ok);
        let betas = [0.1, 0.5, 1.0];
        let mut res = f64::NAN;
        assert_eq!(latmap_verify(target, inst, betas.as_ptr(), 3, 1e-9, &mut res), LatmapStatus::Ok);
        assert!(res < 1e-9);

        let mut json = ptr::null_mut();
        assert_eq!(latmap_instance_to_json(inst, &mut json), LatmapStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(latmap_instance_from_json(json, &mut back), LatmapStatus::Ok);
        let (mut p1, mut o1, mut p2, mut o2) = (0i64, 0f64, 1i64, 1f64);
        assert_eq!(latmap_instance_accounting(inst, &mut p1, &mut o1), LatmapStatus::Ok);
        assert_eq!(latmap_instance_accounting(back, &mut p2, &mut o2), LatmapStatus::Ok);
        assert_eq!((p1, o1), (p2, o2));

        let mut lattice = ptr::null_mut();
        assert_eq!(latmap_instance_model(back, &mut lattice), LatmapStatus::Ok);
        let (mut lz_inst, mut lz_t) = (0.0, 0.0);
        assert_eq!(latmap_log_z(lattice, 0.7, &mut lz_inst), LatmapStatus::Ok);
        assert_eq!(latmap_log_z(target, 0.7, &mut lz_t), LatmapStatus::Ok);
        let predicted = lz_t + p1 as f64 * std::f64::consts::LN_2 - 0.7 * o1;
        assert!((lz_inst - predicted).abs() < 1e-9);

        latmap_string_free(json);
        latmap_model_free(lattice);
        latmap_instance_free(back);
        latmap_instance_free(inst);
        latmap_model_free(target);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(latmap_model_new_binary(2, ptr::null_mut()), LatmapStatus::NullPointer);
        let bad = CString::new("{\"num_spins\": 2}").unwrap();
        assert_eq!(latmap_model_from_json(bad.as_ptr(), &mut m), LatmapStatus::Json);
        assert!(m.is_null());
        assert!(!CStr::from_ptr(latmap_last_error()).to_bytes().is_empty());

        assert_eq!(latmap_model_new_binary(4, &mut m), LatmapStatus::Ok);
        assert_eq!(latmap_model_add_parity(m, [0usize, 9].as_ptr(), 2, 1.0), LatmapStatus::InvalidArgument);
        for k in 1..4 {
            assert_eq!(latmap_model_add_parity(m, [0usize, k].as_ptr(), 2, 0.5), LatmapStatus::Ok);
        }
        let mut inst = ptr::null_mut();
        assert_eq!(latmap_compile(m, LatmapBackend::Lgt3d, LatmapMode::Direct, &mut inst), LatmapStatus::Unsupported);
        let msg = CStr::from_ptr(latmap_last_error()).to_str().unwrap();
        assert!(msg.contains("fanout 3"), "{msg}");

        let mut grid = ptr::null_mut();
        let mut t = ptr::null_mut();
        assert_eq!(latmap_compile_ising2d(2, 2, 0.5, 0.1, &mut grid, &mut t), LatmapStatus::Ok);
        let mut dims = [0usize; 4];
        assert_eq!(latmap_instance_dims(grid, dims.as_mut_ptr()), LatmapStatus::Ok);
        assert_eq!(dims, [4, 4, 1, 2]);
        let betas = [0.5, 1.0];
        assert_eq!(latmap_verify(m, grid, betas.as_ptr(), 2, 1e-9, ptr::null_mut()), LatmapStatus::VerificationFailed);

        latmap_instance_free(grid);
        latmap_model_free(t);
        latmap_model_free(m);
        latmap_model_free(ptr::null_mut());
    }
}

/// Builds the C smoke program against the generated header and the static
/// library next to this test binary.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("liblatmap_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let bin = profile_dir.join(format!("latmap-smoke-{}", std::process::id()));
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    let _ = std::fs::remove_file(&bin);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("dims"));
}
