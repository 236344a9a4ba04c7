//! C ABI over `tefield`.
//!
//! Every fallible function returns a [`TefStatus`]. On failure the message is
//! kept per thread and read with [`tef_last_error_message`]. Models are opaque
//! [`TefModel`] handles released with [`tef_model_free`]; strings returned
//! through `char**` out-parameters are released with [`tef_string_free`].
//!
//! Sites are passed as flat `int64_t` arrays of `count * dimension`
//! coordinates. Symbols are alphabet indices. A `tail` of `-1` leaves sites
//! outside the annulus undefined; any other value fixes them to that symbol.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tefield::cli::{verify_model, VerifyOptions};
use tefield::energy::assemble_delta;
use tefield::lattice::{BoundaryCondition, Configuration, Site, Symbol, Tail, Window};
use tefield::models::{load_model, model_from_toml, ModelSpec};
use tefield::sampler::run_chain;
use tefield::specification::onepoint_kernel;
use tefield::uniqueness::{coefficient, UniquenessMethod};
use tefield::{lattice::DEFAULT_ENUMERATION_BUDGET, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TefStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    /// The model or field failed a consistency requirement.
    Inconsistent = 5,
    BudgetExceeded = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TefUniquenessMethod {
    Dobrushin = 0,
    Delta = 1,
}

/// Opaque model handle.
pub struct TefModel {
    spec: ModelSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(TefStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } | Error::Json(_) => TefStatus::Parse,
            Error::Io(_) => TefStatus::Io,
            Error::BudgetExceeded { .. } => TefStatus::BudgetExceeded,
            Error::InconsistentField { .. }
            | Error::CocycleViolation(_)
            | Error::NotStrictlyPositive { .. }
            | Error::NotNormalized { .. } => TefStatus::Inconsistent,
            _ => TefStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(TefStatus::InvalidArgument, message.into())
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TefStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TefStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TefStatus::Internal
        }
    }
}

unsafe fn model_ref<'a>(model: *const TefModel) -> Result<&'a ModelSpec, Failure> {
    model
        .as_ref()
        .map(|m| &m.spec)
        .ok_or_else(|| Failure(TefStatus::NullPointer, "model is null".into()))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure(TefStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(TefStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

fn sites(coords: &[i64], count: usize, dimension: usize) -> Result<Vec<Site>, Failure> {
    if coords.len() != count * dimension {
        return Err(invalid("coordinate array length mismatch"));
    }
    Ok(coords.chunks(dimension.max(1)).take(count).map(Site::new).collect())
}

fn tail(t: i32) -> Result<Tail, Failure> {
    match t {
        -1 => Ok(Tail::Free),
        0..=255 => Ok(Tail::Fixed(t as Symbol)),
        _ => Err(invalid(format!("tail {t} is neither -1 nor a symbol"))),
    }
}

fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| invalid("output contains a nul byte"))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn check_out<T>(p: *mut T) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(TefStatus::NullPointer, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

fn put_model(out: *mut *mut TefModel, spec: ModelSpec) {
    unsafe { *out = Box::into_raw(Box::new(TefModel { spec })) };
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn tef_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a TOML (`.toml`) or JSON model file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tef_model_load(path: *const c_char, out: *mut *mut TefModel) -> TefStatus {
    guard(|| {
        check_out(out)?;
        let path = c_str(path, "path")?;
        put_model(out, load_model(Path::new(path))?);
        Ok(())
    })
}

/// Parses a model from TOML text.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tef_model_from_toml(
    text: *const c_char,
    out: *mut *mut TefModel,
) -> TefStatus {
    guard(|| {
        check_out(out)?;
        put_model(out, model_from_toml(c_str(text, "text")?)?);
        Ok(())
    })
}

fn finite(name: &str, v: f64) -> Result<f64, Failure> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be finite")))
    }
}

/// Nearest-neighbour Ising model on `Z^dimension`.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tef_model_ising(
    dimension: u32,
    beta: f64,
    h: f64,
    out: *mut *mut TefModel,
) -> TefStatus {
    guard(|| {
        check_out(out)?;
        let text = format!(
            "kind = \"ising\"\ndimension = {dimension}\n[params]\nbeta = {:?}\nh = {:?}\n",
            finite("beta", beta)?,
            finite("h", h)?
        );
        put_model(out, model_from_toml(&text)?);
        Ok(())
    })
}

/// Widom–Rowlinson one-point energy with exclusion radius `radius` in the
/// sup metric.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tef_model_widom_rowlinson(
    dimension: u32,
    radius: u32,
    alpha: f64,
    beta: f64,
    out: *mut *mut TefModel,
) -> TefStatus {
    guard(|| {
        check_out(out)?;
        let text = format!(
            "kind = \"widom_rowlinson\"\ndimension = {dimension}\nmetric = \"linf\"\n[params]\nR = {radius}\nalpha = {:?}\nbeta = {:?}\n",
            finite("alpha", alpha)?,
            finite("beta", beta)?
        );
        put_model(out, model_from_toml(&text)?);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tef_model_free(model: *mut TefModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Alphabet size and lattice dimension of a model.
///
/// # Safety
/// `model` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn tef_model_shape(
    model: *const TefModel,
    alphabet_size: *mut usize,
    dimension: *mut usize,
) -> TefStatus {
    guard(|| {
        let spec = model_ref(model)?;
        check_out(alphabet_size)?;
        check_out(dimension)?;
        *alphabet_size = spec.alphabet.size();
        *dimension = spec.dimension;
        Ok(())
    })
}

fn energy(spec: &ModelSpec) -> Result<&dyn tefield::energy::OnePointEnergyModel, Failure> {
    spec.energy_model()
        .ok_or_else(|| invalid("model has no one-point energy"))
}

unsafe fn boundary(
    spec: &ModelSpec,
    interior: Window,
    annulus_sites: *const i64,
    annulus_values: *const u8,
    annulus_count: usize,
    tail_symbol: i32,
) -> Result<BoundaryCondition, Failure> {
    let d = spec.dimension;
    let coords = slice(annulus_sites, annulus_count * d, "annulus_sites")?;
    let values = slice(annulus_values, annulus_count, "annulus_values")?;
    let w = Window::new(d, sites(coords, annulus_count, d)?)?;
    // Window::new sorts, so pair values with their sites first.
    let mut pairs: Vec<(Site, Symbol)> = sites(coords, annulus_count, d)?
        .into_iter()
        .zip(values.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    let c = Configuration::new(w, pairs.into_iter().map(|p| p.1).collect())?;
    Ok(BoundaryCondition::new(interior, c, tail(tail_symbol)?)?)
}

/// Single-site kernel `q_t(·)` at `site` given an annulus configuration.
/// Writes `alphabet_size` probabilities to `probs`.
///
/// # Safety
/// `site` holds `dimension` coordinates, the annulus arrays hold
/// `annulus_count` entries (times `dimension` for sites), and `probs` has room
/// for `probs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tef_onepoint_kernel(
    model: *const TefModel,
    site: *const i64,
    annulus_sites: *const i64,
    annulus_values: *const u8,
    annulus_count: usize,
    tail_symbol: i32,
    probs: *mut f64,
    probs_len: usize,
) -> TefStatus {
    guard(|| {
        let spec = model_ref(model)?;
        let m = energy(spec)?;
        check_out(probs)?;
        if probs_len < spec.alphabet.size() {
            return Err(invalid("probs buffer is shorter than the alphabet"));
        }
        let t = Site::new(slice(site, spec.dimension, "site")?);
        let b = boundary(
            spec,
            Window::singleton(t.clone()),
            annulus_sites,
            annulus_values,
            annulus_count,
            tail_symbol,
        )?;
        let q = onepoint_kernel(m, &t, &b)?;
        std::slice::from_raw_parts_mut(probs, probs_len)[..q.probs.len()].copy_from_slice(&q.probs);
        Ok(())
    })
}

/// Transition energy `δ_V(x, u)` assembled from single-site energies.
///
/// # Safety
/// `window_sites` holds `window_count * dimension` coordinates, `x` and `u`
/// hold `window_count` symbols listed in the same order as the sites, and the
/// annulus arrays are as for [`tef_onepoint_kernel`].
#[no_mangle]
pub unsafe extern "C" fn tef_assemble_delta(
    model: *const TefModel,
    window_sites: *const i64,
    window_count: usize,
    x: *const u8,
    u: *const u8,
    annulus_sites: *const i64,
    annulus_values: *const u8,
    annulus_count: usize,
    tail_symbol: i32,
    out: *mut f64,
) -> TefStatus {
    guard(|| {
        let spec = model_ref(model)?;
        let m = energy(spec)?;
        check_out(out)?;
        let d = spec.dimension;
        let listed = sites(slice(window_sites, window_count * d, "window_sites")?, window_count, d)?;
        let w = Window::new(d, listed.clone())?;
        let xs = slice(x, window_count, "x")?;
        let us = slice(u, window_count, "u")?;
        let config = |vals: &[u8]| {
            Configuration::from_fn(w.clone(), |s| {
                vals[listed.iter().position(|l| l == s).expect("site is listed")]
            })
        };
        let (cx, cu) = (config(xs), config(us));
        let b = boundary(spec, w.clone(), annulus_sites, annulus_values, annulus_count, tail_symbol)?;
        *out = assemble_delta(m, &w, &cx, &cu, &b)?;
        Ok(())
    })
}

/// Dobrushin or delta uniqueness coefficient with neighbourhoods cut at
/// `radius`.
///
/// # Safety
/// `model` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn tef_uniqueness(
    model: *const TefModel,
    method: TefUniquenessMethod,
    radius: u32,
    out_coefficient: *mut f64,
    out_satisfied: *mut bool,
) -> TefStatus {
    guard(|| {
        let m = energy(model_ref(model)?)?;
        check_out(out_coefficient)?;
        check_out(out_satisfied)?;
        let method = match method {
            TefUniquenessMethod::Dobrushin => UniquenessMethod::Dobrushin,
            TefUniquenessMethod::Delta => UniquenessMethod::Delta,
        };
        let r = coefficient(m, radius, method, DEFAULT_ENUMERATION_BUDGET)?;
        *out_coefficient = r.coefficient;
        *out_satisfied = r.satisfied;
        Ok(())
    })
}

/// Heat-bath chain on the box `{0..side-1}^d` with every outside site fixed
/// to `boundary_symbol`. Writes the sample statistics as JSON.
///
/// # Safety
/// `model` must be a live handle and `json_out` writable. Free the string with
/// [`tef_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tef_sample(
    model: *const TefModel,
    side: u32,
    boundary_symbol: u8,
    sweeps: u64,
    burn_in: u64,
    seed: u64,
    json_out: *mut *mut c_char,
) -> TefStatus {
    guard(|| {
        let spec = model_ref(model)?;
        let m = energy(spec)?;
        check_out(json_out)?;
        if side == 0 {
            return Err(invalid("side must be positive"));
        }
        if usize::from(boundary_symbol) >= spec.alphabet.size() {
            return Err(invalid("boundary symbol is outside the alphabet"));
        }
        let hi = vec![i64::from(side) - 1; spec.dimension];
        let w = Window::cuboid(&vec![0; spec.dimension], &hi)?;
        let b = BoundaryCondition::constant(w.clone(), boundary_symbol);
        let stats = run_chain(m, &w, &b, sweeps, burn_in, seed)?;
        put_string(json_out, serde_json::to_string(&stats).map_err(Error::from)?)
    })
}

/// Runs the consistency battery behind `tefield verify` and writes its JSON
/// report. `out_passed` receives the overall verdict.
///
/// # Safety
/// `model` must be a live handle; the outputs must be writable. Free the
/// string with [`tef_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tef_verify_json(
    model: *const TefModel,
    tol: f64,
    out_passed: *mut bool,
    json_out: *mut *mut c_char,
) -> TefStatus {
    guard(|| {
        let spec = model_ref(model)?;
        check_out(out_passed)?;
        check_out(json_out)?;
        let options = VerifyOptions {
            tol,
            ..VerifyOptions::default()
        };
        let report = verify_model(spec, &options)?;
        *out_passed = report.passed;
        put_string(json_out, serde_json::to_string(&report).map_err(Error::from)?)
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tef_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
