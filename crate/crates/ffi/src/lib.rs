//! C interface. Every function returns an [`AmStatus`]; on failure the
//! message is available from [`am_last_error`]. Handles are opaque and must
//! be released with their `_free` function. Strings returned to the caller
//! are released with [`am_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use amalgam::algebra::{AlgebraContext, ContextSpec};
use amalgam::band::{corollary_criterion, predict_moments_on_grid, VarianceProfile};
use amalgam::freeness::check_factorization;
use amalgam::io::{ContextSource, Level, SeriesDocument};
use amalgam::partition::{enumerate_nc, enumerate_nc2};
use amalgam::series::{CumulantSeries, MomentSeries};
use amalgam::transform::{cumulants_from_moments, moments_from_cumulants};
use amalgam::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SizeLimit = 3,
    NotInSpan = 4,
    Numeric = 5,
    Io = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> AmStatus {
    match e {
        Error::SizeLimit { .. } | Error::OrderCap { .. } | Error::LevelCap { .. } | Error::WordLimit { .. } => {
            AmStatus::SizeLimit
        }
        Error::NotInSpan(..) | Error::NotValuedIn(_) => AmStatus::NotInSpan,
        Error::Numeric(_) | Error::EmptySample => AmStatus::Numeric,
        Error::Io(_) => AmStatus::Io,
        _ => AmStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), (AmStatus, String)>) -> AmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AmStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AmStatus::Panic
        }
    }
}

fn lib<T>(r: amalgam::Result<T>) -> Result<T, (AmStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null() -> (AmStatus, String) {
    (AmStatus::NullPointer, "null pointer argument".into())
}

/// # Safety
/// `s` is null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, (AmStatus, String)> {
    if s.is_null() {
        return Err(null());
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (AmStatus::InvalidArgument, "string is not UTF-8".into()))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or null. Free with
/// [`am_string_free`].
#[no_mangle]
pub extern "C" fn am_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |s| s.clone().into_raw()))
}

/// # Safety
/// `s` is null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn am_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Number of non-crossing partitions (or pair partitions) of `n` points.
///
/// # Safety
/// `out` points to writable memory.
#[no_mangle]
pub unsafe extern "C" fn am_nc_count(n: usize, pairs: bool, out: *mut u64) -> AmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let list = lib(if pairs { enumerate_nc2(n) } else { enumerate_nc(n) })?;
        *out = list.len() as u64;
        Ok(())
    })
}

/// A context `M ⊃ B ⊃ D`.
pub struct AmContext {
    inner: Arc<AlgebraContext>,
    spec: ContextSpec,
}

/// Builds a context from its JSON description.
///
/// # Safety
/// `json` is a NUL-terminated string and `out` points to writable memory.
#[no_mangle]
pub unsafe extern "C" fn am_context_from_json(json: *const c_char, out: *mut *mut AmContext) -> AmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let spec: ContextSpec = lib(serde_json::from_str(read_str(json)?).map_err(Error::from))?;
        let inner = Arc::new(lib(AlgebraContext::from_spec(&spec))?);
        *out = Box::into_raw(Box::new(AmContext { inner, spec }));
        Ok(())
    })
}

/// Dimensions of `B` and `D`.
///
/// # Safety
/// `ctx` is a live handle; `b_dim` and `d_dim` point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn am_context_dims(ctx: *const AmContext, b_dim: *mut usize, d_dim: *mut usize) -> AmStatus {
    guard(|| {
        if ctx.is_null() || b_dim.is_null() || d_dim.is_null() {
            return Err(null());
        }
        let c = &(*ctx).inner;
        *b_dim = c.b.dim();
        *d_dim = c.d.dim();
        Ok(())
    })
}

/// # Safety
/// `ctx` is null or a handle from [`am_context_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn am_context_free(ctx: *mut AmContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

enum SeriesData {
    Moment(MomentSeries),
    Cumulant(CumulantSeries),
}

/// A moment or cumulant series with its context.
pub struct AmSeries {
    context: Arc<AlgebraContext>,
    spec: ContextSpec,
    level: Level,
    data: SeriesData,
}

impl AmSeries {
    fn document(&self) -> SeriesDocument {
        let src = ContextSource::Inline(self.spec.clone());
        match &self.data {
            SeriesData::Moment(s) => SeriesDocument::from_series(s, src, self.level),
            SeriesData::Cumulant(s) => SeriesDocument::from_series(s, src, self.level),
        }
    }
}

/// Reads a series document. A context given by path is resolved against the
/// working directory; `ctx`, when non-null, overrides it.
///
/// # Safety
/// `json` is a NUL-terminated string, `ctx` is null or a live handle, and
/// `out` points to writable memory.
#[no_mangle]
pub unsafe extern "C" fn am_series_from_json(
    json: *const c_char,
    ctx: *const AmContext,
    out: *mut *mut AmSeries,
) -> AmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let doc: SeriesDocument = lib(serde_json::from_str(read_str(json)?).map_err(Error::from))?;
        let (context, spec) = if ctx.is_null() {
            let spec = lib(doc.context.resolve(None))?;
            (Arc::new(lib(AlgebraContext::from_spec(&spec))?), spec)
        } else {
            ((*ctx).inner.clone(), (*ctx).spec.clone())
        };
        let data = match doc.kind.as_str() {
            "moment" => SeriesData::Moment(lib(doc.to_series(&context))?),
            "cumulant" => SeriesData::Cumulant(lib(doc.to_series(&context))?),
            other => return Err((AmStatus::InvalidArgument, format!("unknown series kind '{other}'"))),
        };
        *out = Box::into_raw(Box::new(AmSeries {
            context,
            spec,
            level: doc.algebra,
            data,
        }));
        Ok(())
    })
}

/// Writes the series as a JSON document. Free the string with [`am_string_free`].
///
/// # Safety
/// `series` is a live handle and `out` points to writable memory.
#[no_mangle]
pub unsafe extern "C" fn am_series_to_json(series: *const AmSeries, out: *mut *mut c_char) -> AmStatus {
    guard(|| {
        if series.is_null() || out.is_null() {
            return Err(null());
        }
        let text = lib(serde_json::to_string(&(*series).document()).map_err(Error::from))?;
        *out = to_c_string(text);
        Ok(())
    })
}

/// Moments become cumulants and cumulants become moments, up to `order`
/// (0 means the order cap of the input).
///
/// # Safety
/// `series` is a live handle and `out` points to writable memory.
#[no_mangle]
pub unsafe extern "C" fn am_series_transform(series: *const AmSeries, order: usize, out: *mut *mut AmSeries) -> AmStatus {
    guard(|| {
        if series.is_null() || out.is_null() {
            return Err(null());
        }
        let s = &*series;
        let data = match &s.data {
            SeriesData::Moment(m) => {
                let k = if order == 0 { m.order_cap() } else { order };
                SeriesData::Cumulant(lib(cumulants_from_moments(m, k))?)
            }
            SeriesData::Cumulant(c) => {
                let k = if order == 0 { c.order_cap() } else { order };
                SeriesData::Moment(lib(moments_from_cumulants(c, k))?)
            }
        };
        *out = Box::into_raw(Box::new(AmSeries {
            context: s.context.clone(),
            spec: s.spec.clone(),
            level: s.level,
            data,
        }));
        Ok(())
    })
}

/// Tests `κ = F∘κ∘F` for a cumulant series over `B` up to `order` (0 means
/// the order cap).
///
/// # Safety
/// `series` is a live handle; `max_deviation` and `passes` point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn am_factorization_check(
    series: *const AmSeries,
    order: usize,
    max_deviation: *mut f64,
    passes: *mut bool,
) -> AmStatus {
    guard(|| {
        if series.is_null() || max_deviation.is_null() || passes.is_null() {
            return Err(null());
        }
        let s = &*series;
        let SeriesData::Cumulant(c) = &s.data else {
            return Err((AmStatus::InvalidArgument, "factorization needs a cumulant series".into()));
        };
        if s.level != Level::B {
            return Err((AmStatus::InvalidArgument, "factorization needs a series over B".into()));
        }
        let k = if order == 0 { c.order_cap() } else { order };
        let report = lib(check_factorization(c, &s.context.f, k))?;
        *max_deviation = report.max_deviation;
        *passes = report.passes;
        Ok(())
    })
}

/// # Safety
/// `series` is null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn am_series_free(series: *mut AmSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Predicted moments `m_1..m_{k_max}` of the band ensemble with the given
/// profile (`builtin:…` or a JSON path) on a grid of `grid` points, written
/// to `out[0..k_max]`.
///
/// # Safety
/// `profile` is a NUL-terminated string and `out` has room for `k_max` values.
#[no_mangle]
pub unsafe extern "C" fn am_band_predict(profile: *const c_char, k_max: usize, grid: usize, out: *mut f64) -> AmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let p = lib(VarianceProfile::parse(read_str(profile)?))?;
        let pred = lib(predict_moments_on_grid(&p, k_max, grid))?;
        ptr::copy_nonoverlapping(pred.moments.as_ptr(), out, k_max);
        Ok(())
    })
}

/// Whether the row integrals of the profile are constant, and their range.
///
/// # Safety
/// `profile` is a NUL-terminated string; `holds` and `range` point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn am_band_criterion(
    profile: *const c_char,
    grid: usize,
    tolerance: f64,
    holds: *mut bool,
    range: *mut f64,
) -> AmStatus {
    guard(|| {
        if holds.is_null() || range.is_null() {
            return Err(null());
        }
        let p = lib(VarianceProfile::parse(read_str(profile)?))?;
        let r = lib(corollary_criterion(&p, grid, tolerance))?;
        *holds = r.holds;
        *range = r.range;
        Ok(())
    })
}
