//! C ABI for `morse-entropy`.
//!
//! Models and catalogs are opaque handles created and released through this
//! interface. Every fallible function returns an `int32_t` status (`ME_OK`
//! on success) and writes results through out-pointers; on failure the
//! message is kept per thread and read with `me_last_error_message`.
//! Panics are caught at the boundary and reported as `ME_ERR_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use morse_entropy::measure::{estimate_sublevel_volume, SamplerConfig};
use morse_entropy::morse::{find_critical_points, CriticalCatalog, SearchConfig};
use morse_entropy::neckgeom::{coefficient_A, coefficient_B, eval_F};
use morse_entropy::potential::BuiltinKind;
use morse_entropy::{Error, Potential, PotentialModel};

pub const ME_OK: i32 = 0;
pub const ME_ERR_NULL_POINTER: i32 = 1;
pub const ME_ERR_INVALID_ARGUMENT: i32 = 2;
pub const ME_ERR_MODEL: i32 = 3;
pub const ME_ERR_COMPUTE: i32 = 4;
pub const ME_ERR_IO: i32 = 5;
pub const ME_ERR_BUFFER_TOO_SMALL: i32 = 6;
pub const ME_ERR_PANIC: i32 = 7;

/// Opaque potential model.
pub struct MeModel {
    inner: PotentialModel,
}

/// Opaque critical-point catalog.
pub struct MeCatalog {
    inner: CriticalCatalog,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn code_for(e: &Error) -> i32 {
    match e {
        Error::Syntax { .. }
        | Error::Index { .. }
        | Error::UnknownIdentifier { .. }
        | Error::InvalidModel(_)
        | Error::Config(_) => ME_ERR_MODEL,
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::Domain { .. } => ME_ERR_INVALID_ARGUMENT,
        Error::Io(_) => ME_ERR_IO,
        _ => ME_ERR_COMPUTE,
    }
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(code_for(&e), format!("{}: {e}", e.kind()))
    }
}

fn null(what: &str) -> Fail {
    Fail(ME_ERR_NULL_POINTER, format!("null pointer: {what}"))
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ME_OK,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("panic inside morse-entropy".into());
            ME_ERR_PANIC
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(ME_ERR_INVALID_ARGUMENT, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn model_ref<'a>(m: *const MeModel) -> Result<&'a PotentialModel, Fail> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn catalog_ref<'a>(c: *const MeCatalog) -> Result<&'a CriticalCatalog, Fail> {
    c.as_ref().map(|c| &c.inner).ok_or_else(|| null("catalog"))
}

fn check_dim(model: &PotentialModel, len: usize) -> Result<(), Fail> {
    if len != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: len }.into());
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn me_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated). `*len_out` receives the full message length without the
/// terminator. Returns `ME_ERR_BUFFER_TOO_SMALL` when it does not fit.
///
/// # Safety
/// `buf` must be valid for `cap` bytes (or null with `cap == 0`);
/// `len_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn me_last_error_message(buf: *mut c_char, cap: usize, len_out: *mut usize) -> i32 {
    let msg = LAST_ERROR.with(|e| e.borrow().clone()).unwrap_or_default();
    let bytes = msg.as_bytes();
    if let Some(l) = len_out.as_mut() {
        *l = bytes.len();
    }
    if bytes.len() + 1 > cap || buf.is_null() {
        return ME_ERR_BUFFER_TOO_SMALL;
    }
    ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, bytes.len());
    *buf.add(bytes.len()) = 0;
    ME_OK
}

/// Creates a built-in model (`harmonic`, `uncoupled_double_well`,
/// `lattice_phi4_1d`, `xy_chain_1d`) with default parameters.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn me_model_builtin(name: *const c_char, n: usize, out: *mut *mut MeModel) -> i32 {
    guard(|| {
        let name = str_arg(name, "name")?;
        let out = out_arg(out, "out")?;
        let kind = BuiltinKind::from_name(name)
            .ok_or_else(|| Fail(ME_ERR_MODEL, format!("unknown built-in model `{name}`")))?;
        *out = Box::into_raw(Box::new(MeModel { inner: PotentialModel::builtin(kind, n)? }));
        Ok(())
    })
}

/// Compiles a model from expression source over `q[0] .. q[n-1]`.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn me_model_from_dsl(source: *const c_char, n: usize, out: *mut *mut MeModel) -> i32 {
    guard(|| {
        let src = str_arg(source, "source")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(MeModel { inner: PotentialModel::from_dsl(src, n)? }));
        Ok(())
    })
}

/// Replaces the model's domain box by `[lo, hi]^N`.
///
/// # Safety
/// `model` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn me_model_set_box(model: *mut MeModel, lo: f64, hi: f64) -> i32 {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Fail(ME_ERR_INVALID_ARGUMENT, format!("box [{lo}, {hi}] is empty or not finite")));
        }
        m.inner = m.inner.clone().with_box(lo, hi);
        Ok(())
    })
}

/// Adds the linear term `a·q` (length `n` must equal the dimension).
///
/// # Safety
/// `model` must be live; `a` valid for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn me_model_perturb(model: *mut MeModel, a: *const f64, n: usize) -> i32 {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        let a = slice_arg(a, n, "a")?;
        m.inner = m.inner.perturbed(a)?;
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn me_model_free(model: *mut MeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn me_model_dim(model: *const MeModel, out: *mut usize) -> i32 {
    guard(|| {
        *out_arg(out, "out")? = model_ref(model)?.dim();
        Ok(())
    })
}

/// `V(q)`.
///
/// # Safety
/// `q` valid for `n` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn me_model_value(model: *const MeModel, q: *const f64, n: usize, out: *mut f64) -> i32 {
    guard(|| {
        let m = model_ref(model)?;
        let q = slice_arg(q, n, "q")?;
        check_dim(m, n)?;
        *out_arg(out, "out")? = m.value(q);
        Ok(())
    })
}

/// `∇V(q)` written to `grad` (length `n`).
///
/// # Safety
/// `q` and `grad` valid for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn me_model_gradient(model: *const MeModel, q: *const f64, n: usize, grad: *mut f64) -> i32 {
    guard(|| {
        let m = model_ref(model)?;
        let q = slice_arg(q, n, "q")?;
        check_dim(m, n)?;
        if grad.is_null() {
            return Err(null("grad"));
        }
        m.gradient(q, std::slice::from_raw_parts_mut(grad, n));
        Ok(())
    })
}

/// Multistart search for critical points with `V <= v_max`. `starts = 0`
/// selects the default count; `workers = 0` uses all cores.
///
/// # Safety
/// `model` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn me_find_critical_points(
    model: *const MeModel,
    v_max: f64,
    seed: u64,
    starts: usize,
    workers: usize,
    out: *mut *mut MeCatalog,
) -> i32 {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_arg(out, "out")?;
        let cfg = SearchConfig { starts: (starts > 0).then_some(starts), workers, ..SearchConfig::with_seed(seed) };
        *out = Box::into_raw(Box::new(MeCatalog { inner: find_critical_points(m, v_max, &cfg)? }));
        Ok(())
    })
}

/// Releases a catalog. Null is ignored.
///
/// # Safety
/// `catalog` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn me_catalog_free(catalog: *mut MeCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// # Safety
/// `catalog` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn me_catalog_len(catalog: *const MeCatalog, out: *mut usize) -> i32 {
    guard(|| {
        *out_arg(out, "out")? = catalog_ref(catalog)?.points.len();
        Ok(())
    })
}

/// Point `i` in catalog order (by value, then coordinates). `coords` must
/// hold `n` doubles, `n` being the model dimension.
///
/// # Safety
/// All out-pointers valid; `coords` valid for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn me_catalog_point(
    catalog: *const MeCatalog,
    i: usize,
    coords: *mut f64,
    n: usize,
    value: *mut f64,
    index: *mut usize,
) -> i32 {
    guard(|| {
        let c = catalog_ref(catalog)?;
        let p = c
            .points
            .get(i)
            .ok_or_else(|| Fail(ME_ERR_INVALID_ARGUMENT, format!("point {i} out of range ({})", c.points.len())))?;
        if n != p.coords.len() {
            return Err(Error::DimensionMismatch { expected: p.coords.len(), got: n }.into());
        }
        if coords.is_null() {
            return Err(null("coords"));
        }
        std::slice::from_raw_parts_mut(coords, n).copy_from_slice(&p.coords);
        *out_arg(value, "value")? = p.value;
        *out_arg(index, "index")? = p.morse_index;
        Ok(())
    })
}

/// Euler characteristic of `M_v` from the catalog.
///
/// # Safety
/// `catalog` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn me_catalog_euler(catalog: *const MeCatalog, v: f64, out: *mut i64) -> i32 {
    guard(|| {
        *out_arg(out, "out")? = catalog_ref(catalog)?.euler_characteristic(v)?;
        Ok(())
    })
}

/// Writes the catalog as JSON into `buf`; `*len_out` receives the length
/// without the terminator.
///
/// # Safety
/// `buf` valid for `cap` bytes (or null with `cap == 0`); `len_out` valid.
#[no_mangle]
pub unsafe extern "C" fn me_catalog_to_json(
    catalog: *const MeCatalog,
    buf: *mut c_char,
    cap: usize,
    len_out: *mut usize,
) -> i32 {
    guard(|| {
        let json = catalog_ref(catalog)?.to_json()?;
        *out_arg(len_out, "len_out")? = json.len();
        if json.len() + 1 > cap || buf.is_null() {
            return Err(Fail(ME_ERR_BUFFER_TOO_SMALL, format!("need {} bytes", json.len() + 1)));
        }
        ptr::copy_nonoverlapping(json.as_ptr().cast(), buf, json.len());
        *buf.add(json.len()) = 0;
        Ok(())
    })
}

/// Hit-or-miss estimate of `vol{V <= v}` in the model's box.
///
/// # Safety
/// `model` must be live; out-pointers valid.
#[no_mangle]
pub unsafe extern "C" fn me_sublevel_volume(
    model: *const MeModel,
    v: f64,
    n_samples: u64,
    seed: u64,
    workers: usize,
    mean: *mut f64,
    stderr: *mut f64,
) -> i32 {
    guard(|| {
        let m = model_ref(model)?;
        let cfg = SamplerConfig { workers, ..SamplerConfig::new(n_samples, seed) };
        let e = estimate_sublevel_volume(m, v, &cfg)?;
        *out_arg(mean, "mean")? = e.mean;
        *out_arg(stderr, "stderr")? = e.stderr;
        Ok(())
    })
}

/// Slice integral `F(ξ, k, N)` with wall parameter `r`, `0 < k < N`, `N > 2`.
///
/// # Safety
/// `out` valid.
#[no_mangle]
pub unsafe extern "C" fn me_eval_f(xi: f64, k: usize, n: usize, r: f64, out: *mut f64) -> i32 {
    guard(|| {
        *out_arg(out, "out")? = eval_F(xi, k, n, r)?;
        Ok(())
    })
}

/// Neighborhood coefficient `A(N, k, ε₀, r)`.
///
/// # Safety
/// `out` valid.
#[no_mangle]
pub unsafe extern "C" fn me_coefficient_a(n: usize, k: usize, eps0: f64, r: f64, out: *mut f64) -> i32 {
    guard(|| {
        *out_arg(out, "out")? = coefficient_A(n, k, eps0, r)?;
        Ok(())
    })
}

/// Band coefficient `B(N, k, Δv, ε₀, r)` times the Jacobian factor `j`.
///
/// # Safety
/// `out` valid.
#[no_mangle]
pub unsafe extern "C" fn me_coefficient_b(
    n: usize,
    k: usize,
    delta_v: f64,
    eps0: f64,
    r: f64,
    j: f64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        *out_arg(out, "out")? = coefficient_B(n, k, delta_v, eps0, r, j)?;
        Ok(())
    })
}
