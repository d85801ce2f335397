use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use amalgam_ffi::*;

fn last_error() -> String {
    let p = am_last_error();
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { am_string_free(p) };
    s
}

const CONTEXT: &str = r#"{"ambient_dim": 2, "b_blocks": [1, 1], "weights": [0.25, 0.75]}"#;

/// One variable with `κ_1 = 1` and `κ_2(b) = F(b)` over `D = ℂ`, written over `B`.
fn series_json() -> String {
    format!(
        r#"{{"kind": "cumulant", "context": {CONTEXT}, "n_vars": 1, "order_cap": 3, "entries": [
            {{"indices": [1], "basis": [], "value": [[[1,0],[0,0]],[[0,0],[1,0]]]}},
            {{"indices": [1,1], "basis": [0], "value": [[[0.25,0],[0,0]],[[0,0],[0.25,0]]]}},
            {{"indices": [1,1], "basis": [1], "value": [[[0.75,0],[0,0]],[[0,0],[0.75,0]]]}}
        ]}}"#
    )
}

#[test]
fn nc_count_and_null_handling() {
    let mut out = 0u64;
    assert_eq!(unsafe { am_nc_count(8, false, &mut out) }, AmStatus::Ok);
    assert_eq!(out, 1430);
    assert_eq!(unsafe { am_nc_count(8, true, &mut out) }, AmStatus::Ok);
    assert_eq!(out, 14);
    assert_eq!(unsafe { am_nc_count(99, false, &mut out) }, AmStatus::SizeLimit);
    assert!(last_error().contains("outside the supported range"));
    assert_eq!(unsafe { am_nc_count(3, false, ptr::null_mut()) }, AmStatus::NullPointer);
    assert_eq!(unsafe { am_nc_count(3, false, &mut out) }, AmStatus::Ok);
    assert!(am_last_error().is_null());
}

#[test]
fn context_handle() {
    let json = CString::new(CONTEXT).unwrap();
    let mut ctx = ptr::null_mut();
    assert_eq!(unsafe { am_context_from_json(json.as_ptr(), &mut ctx) }, AmStatus::Ok);
    let (mut b, mut d) = (0usize, 0usize);
    assert_eq!(unsafe { am_context_dims(ctx, &mut b, &mut d) }, AmStatus::Ok);
    assert_eq!((b, d), (2, 1));
    unsafe { am_context_free(ctx) };

    let bad = CString::new(r#"{"ambient_dim": 3, "b_blocks": [1, 1]}"#).unwrap();
    let mut ctx = ptr::null_mut();
    assert_eq!(unsafe { am_context_from_json(bad.as_ptr(), &mut ctx) }, AmStatus::InvalidArgument);
    assert!(ctx.is_null());
    assert!(last_error().contains("do not sum"));
}

#[test]
fn series_transform_and_factorization() {
    let json = CString::new(series_json()).unwrap();
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { am_series_from_json(json.as_ptr(), ptr::null(), &mut k) }, AmStatus::Ok);

    let (mut dev, mut passes) = (f64::NAN, false);
    assert_eq!(unsafe { am_factorization_check(k, 0, &mut dev, &mut passes) }, AmStatus::Ok);
    assert!(passes && dev < 1e-12);

    let mut m = ptr::null_mut();
    assert_eq!(unsafe { am_series_transform(k, 0, &mut m) }, AmStatus::Ok);
    assert_eq!(unsafe { am_factorization_check(m, 0, &mut dev, &mut passes) }, AmStatus::InvalidArgument);

    let mut back = ptr::null_mut();
    assert_eq!(unsafe { am_series_transform(m, 0, &mut back) }, AmStatus::Ok);
    let mut a = ptr::null_mut();
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { am_series_to_json(k, &mut a) }, AmStatus::Ok);
    assert_eq!(unsafe { am_series_to_json(back, &mut b) }, AmStatus::Ok);
    let parse = |p| -> serde_json::Value { serde_json::from_str(unsafe { CStr::from_ptr(p) }.to_str().unwrap()).unwrap() };
    let (va, vb) = (parse(a), parse(b));
    assert_eq!(va["kind"], "cumulant");
    assert_eq!(va["entries"].as_array().unwrap().len(), vb["entries"].as_array().unwrap().len());
    unsafe {
        am_string_free(a);
        am_string_free(b);
        am_series_free(back);
        am_series_free(m);
        am_series_free(k);
    }
}

#[test]
fn band_functions() {
    let p = CString::new("builtin:xy").unwrap();
    let mut m = [0.0; 4];
    assert_eq!(unsafe { am_band_predict(p.as_ptr(), 4, 256, m.as_mut_ptr()) }, AmStatus::Ok);
    assert!((m[1] - 1.0).abs() < 1e-4 && (m[3] - 8.0 / 3.0).abs() < 1e-4);
    let (mut holds, mut range) = (true, 0.0);
    assert_eq!(unsafe { am_band_criterion(p.as_ptr(), 64, 1e-9, &mut holds, &mut range) }, AmStatus::Ok);
    assert!(!holds && range > 1.9);
    assert_eq!(unsafe { am_band_predict(p.as_ptr(), 14, 64, m.as_mut_ptr()) }, AmStatus::SizeLimit);
}

#[test]
fn header_is_generated_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/amalgam.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["am_nc_count", "am_series_from_json", "am_band_predict", "typedef struct AmSeries AmSeries", "AM_STATUS_OK"] {
        assert!(text.contains(sym), "{sym} missing from the header");
    }
    // Syntax-check the header with a C compiler when one is installed.
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(&src, "#include \"amalgam.h\"\nint main(void) { uint64_t n; return am_nc_count(4, false, &n) == AM_STATUS_OK ? 0 : 1; }\n").unwrap();
    let inc = format!("-I{}", header.parent().unwrap().display());
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", &inc]).arg(&src).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
