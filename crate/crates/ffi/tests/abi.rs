use std::ffi::{c_char, CStr, CString};
use std::ptr;

use morse_entropy_ffi::*;

fn last_error() -> String {
    let mut len = 0usize;
    unsafe { me_last_error_message(ptr::null_mut(), 0, &mut len) };
    let mut buf = vec![0 as c_char; len + 1];
    assert_eq!(unsafe { me_last_error_message(buf.as_mut_ptr(), buf.len(), &mut len) }, ME_OK);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn builtin(name: &str, n: usize) -> *mut MeModel {
    let name = CString::new(name).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { me_model_builtin(name.as_ptr(), n, &mut m) }, ME_OK);
    assert!(!m.is_null());
    m
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(me_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_evaluation() {
    let m = builtin("double_well", 2);
    let mut n = 0;
    assert_eq!(unsafe { me_model_dim(m, &mut n) }, ME_OK);
    assert_eq!(n, 2);
    let q = [1.0, 0.0];
    let mut v = f64::NAN;
    assert_eq!(unsafe { me_model_value(m, q.as_ptr(), 2, &mut v) }, ME_OK);
    assert_eq!(v, -0.25);
    let mut g = [f64::NAN; 2];
    assert_eq!(unsafe { me_model_gradient(m, [2.0, 0.5].as_ptr(), 2, g.as_mut_ptr()) }, ME_OK);
    assert_eq!(g, [6.0, 0.125 - 0.5]);
    unsafe { me_model_free(m) };
}

#[test]
fn dsl_model_and_syntax_error() {
    let src = CString::new("q[0]^2 + 3*q[1]").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { me_model_from_dsl(src.as_ptr(), 2, &mut m) }, ME_OK);
    let mut v = 0.0;
    assert_eq!(unsafe { me_model_value(m, [2.0, 1.0].as_ptr(), 2, &mut v) }, ME_OK);
    assert_eq!(v, 7.0);
    unsafe { me_model_free(m) };

    let bad = CString::new("q[0] +* 2").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { me_model_from_dsl(bad.as_ptr(), 1, &mut m) }, ME_ERR_MODEL);
    assert!(m.is_null());
    assert!(last_error().starts_with("SyntaxError"), "{}", last_error());
}

#[test]
fn errors_are_reported() {
    let mut m = ptr::null_mut();
    let name = CString::new("no_such_model").unwrap();
    assert_eq!(unsafe { me_model_builtin(name.as_ptr(), 2, &mut m) }, ME_ERR_MODEL);
    assert!(last_error().contains("no_such_model"));
    assert_eq!(unsafe { me_model_builtin(ptr::null(), 2, &mut m) }, ME_ERR_NULL_POINTER);

    let m = builtin("harmonic", 3);
    let mut v = 0.0;
    assert_eq!(unsafe { me_model_value(m, [0.0; 2].as_ptr(), 2, &mut v) }, ME_ERR_INVALID_ARGUMENT);
    assert!(last_error().contains("DimensionMismatch"));
    unsafe { me_model_free(m) };

    let mut f = 0.0;
    assert_eq!(unsafe { me_eval_f(0.1, 0, 4, 1.0, &mut f) }, ME_ERR_COMPUTE);
    assert!(last_error().starts_with("EdgeIndex"));
}

#[test]
fn small_buffer() {
    let mut f = 0.0;
    unsafe { me_eval_f(0.1, 1, 2, 1.0, &mut f) };
    let mut buf = [0 as c_char; 4];
    let mut len = 0;
    assert_eq!(unsafe { me_last_error_message(buf.as_mut_ptr(), 4, &mut len) }, ME_ERR_BUFFER_TOO_SMALL);
    assert!(len > 4);
}

#[test]
fn catalog_round_trip() {
    let m = builtin("uncoupled_double_well", 2);
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { me_find_critical_points(m, 0.1, 7, 0, 2, &mut c) }, ME_OK);
    let mut len = 0;
    assert_eq!(unsafe { me_catalog_len(c, &mut len) }, ME_OK);
    assert_eq!(len, 9);
    let (mut coords, mut value, mut index) = ([0.0; 2], 0.0, 0usize);
    assert_eq!(unsafe { me_catalog_point(c, 0, coords.as_mut_ptr(), 2, &mut value, &mut index) }, ME_OK);
    assert_eq!((value, index), (-0.5, 0));
    assert_eq!(unsafe { me_catalog_point(c, 9, coords.as_mut_ptr(), 2, &mut value, &mut index) }, ME_ERR_INVALID_ARGUMENT);
    let mut chi = 0;
    assert_eq!(unsafe { me_catalog_euler(c, 0.05, &mut chi) }, ME_OK);
    assert_eq!(chi, 1);
    assert_eq!(unsafe { me_catalog_euler(c, -0.3, &mut chi) }, ME_OK);
    assert_eq!(chi, 4);
    assert_eq!(unsafe { me_catalog_euler(c, 0.5, &mut chi) }, ME_ERR_COMPUTE);

    let mut need = 0;
    assert_eq!(unsafe { me_catalog_to_json(c, ptr::null_mut(), 0, &mut need) }, ME_ERR_BUFFER_TOO_SMALL);
    let mut buf = vec![0 as c_char; need + 1];
    assert_eq!(unsafe { me_catalog_to_json(c, buf.as_mut_ptr(), buf.len(), &mut need) }, ME_OK);
    let json = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    let cat = morse_entropy::morse::CriticalCatalog::from_json(json).unwrap();
    assert_eq!(cat.points.len(), 9);
    unsafe {
        me_catalog_free(c);
        me_model_free(m);
    }
}

#[test]
fn perturbation_moves_minimum() {
    let m = builtin("harmonic", 2);
    assert_eq!(unsafe { me_model_perturb(m, [0.2, 0.0].as_ptr(), 2) }, ME_OK);
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { me_find_critical_points(m, 1.0, 1, 64, 1, &mut c) }, ME_OK);
    let (mut coords, mut value, mut index) = ([0.0; 2], 0.0, 0usize);
    assert_eq!(unsafe { me_catalog_point(c, 0, coords.as_mut_ptr(), 2, &mut value, &mut index) }, ME_OK);
    assert!((coords[0] + 0.1).abs() < 1e-12 && coords[1].abs() < 1e-12);
    unsafe {
        me_catalog_free(c);
        me_model_free(m);
    }
}

#[test]
fn volume_and_coefficients() {
    let m = builtin("harmonic", 2);
    let (mut mean, mut se) = (0.0, 0.0);
    assert_eq!(unsafe { me_sublevel_volume(m, 1.0, 200_000, 3, 0, &mut mean, &mut se) }, ME_OK);
    assert!((mean - std::f64::consts::PI).abs() < 4.0 * se);
    unsafe { me_model_free(m) };

    let mut a = 0.0;
    assert_eq!(unsafe { me_coefficient_a(4, 2, 0.1, 1.0, &mut a) }, ME_OK);
    assert!((a - 1.925395017095757).abs() < 1e-10);
    let mut b = 0.0;
    assert_eq!(unsafe { me_coefficient_b(4, 2, 0.1, 0.1, 1.0, 2.0, &mut b) }, ME_OK);
    assert!((b - 2.0 * a).abs() < 1e-9);
    let mut f = 0.0;
    assert_eq!(unsafe { me_eval_f(0.0, 2, 6, 1.0, &mut f) }, ME_OK);
    assert!((f - 0.25).abs() < 1e-12);
}

#[test]
fn null_handles_are_safe() {
    unsafe {
        me_model_free(ptr::null_mut());
        me_catalog_free(ptr::null_mut());
    }
    let mut n = 0;
    assert_eq!(unsafe { me_model_dim(ptr::null(), &mut n) }, ME_ERR_NULL_POINTER);
}
