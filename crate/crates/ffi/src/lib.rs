//! C interface to `cacm-core`.
//!
//! Every fallible function returns a [`CacmStatus`] and writes its result
//! through an out-pointer. On failure the message is available from
//! [`cacm_last_error`] on the same thread until the next failing call.
//! Objects are opaque handles released with their matching `_free` function;
//! strings returned by the library are released with [`cacm_string_free`].
//! File and packet indices are zero-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cacm_core::bound::{optimize_p, rate_upper_bound, BoundInputs, BoundProblem, RhoMethod, Strategy};
use cacm_core::harness::{self, ResultRecord, Scenario};
use cacm_core::library::{build_synthetic_library, CorrelationModel, LibraryConfig, MatchMatrix};
use cacm_core::{Error, PacketId};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Library = 4,
    Demand = 5,
    Caching = 6,
    Coloring = 7,
    Bound = 8,
    Scenario = 9,
    Io = 10,
    Panic = 11,
}

/// Bound components at one caching distribution.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CacmBoundReport {
    pub psi: f64,
    pub delta_r: f64,
    pub m_bar: f64,
    pub bound: f64,
}

/// Opaque correlated library.
pub struct CacmModel(CorrelationModel);

/// Opaque parsed scenario.
pub struct CacmScenario(Scenario);

/// Opaque result record of a sweep.
pub struct CacmRecord(ResultRecord);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CacmStatus {
    match e {
        Error::Library(_) | Error::MatchTooDense { .. } => CacmStatus::Library,
        Error::Demand(_) | Error::TooManyReceivers(_) => CacmStatus::Demand,
        Error::Caching(_) | Error::CacheConfig(_) => CacmStatus::Caching,
        Error::InvalidColoring(_) | Error::SizeGuard(_) => CacmStatus::Coloring,
        Error::Bound(_) => CacmStatus::Bound,
        Error::Scenario { .. } => CacmStatus::Scenario,
        Error::Io { .. } => CacmStatus::Io,
    }
}

struct Failure(CacmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CacmStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(CacmStatus::InvalidArgument, message.into())
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CacmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CacmStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal error: {message}"));
            CacmStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(CacmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn matrix_from(rows: &[f64], files: usize) -> Result<MatchMatrix, Failure> {
    let rows = rows.chunks(files).map(<[f64]>::to_vec).collect();
    Ok(MatchMatrix::from_rows(rows)?)
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn cacm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn cacm_version() -> *const c_char {
    static VERSION: &[u8] = concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes();
    VERSION.as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cacm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Generates a library with `files` files of `packets` packets, uniform
/// off-diagonal match entries and threshold `delta`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cacm_model_new_uniform(
    files: usize,
    packets: usize,
    delta: f64,
    off_diagonal: f64,
    seed: u64,
    out_model: *mut *mut CacmModel,
) -> CacmStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        let config = LibraryConfig::new(files, packets, delta, MatchMatrix::uniform(files, off_diagonal))?;
        let model = build_synthetic_library(&config, seed)?;
        *slot = Box::into_raw(Box::new(CacmModel(model)));
        Ok(())
    })
}

/// Generates a library from a row-major `files × files` match matrix.
///
/// # Safety
/// `matrix` must point to `files * files` doubles; `out_model` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cacm_model_new(
    files: usize,
    packets: usize,
    delta: f64,
    matrix: *const f64,
    seed: u64,
    out_model: *mut *mut CacmModel,
) -> CacmStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        let rows = slice(matrix, files * files, "matrix")?;
        let config = LibraryConfig::new(files, packets, delta, matrix_from(rows, files)?)?;
        let model = build_synthetic_library(&config, seed)?;
        *slot = Box::into_raw(Box::new(CacmModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from a `cacm_model_new*` call and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cacm_model_free(model: *mut CacmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of correlated packet pairs.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cacm_model_pair_count(model: *const CacmModel, out_count: *mut usize) -> CacmStatus {
    guard(|| {
        *out(out_count, "out_count")? = handle(model, "model")?.0.pair_count();
        Ok(())
    })
}

/// `H(target | given)` in file units.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cacm_model_conditional_entropy(
    model: *const CacmModel,
    target_file: usize,
    target_packet: usize,
    given_file: usize,
    given_packet: usize,
    out_entropy: *mut f64,
) -> CacmStatus {
    guard(|| {
        let slot = out(out_entropy, "out_entropy")?;
        let m = &handle(model, "model")?.0;
        for (f, b) in [(target_file, target_packet), (given_file, given_packet)] {
            if f >= m.files() || b >= m.packets() {
                return Err(invalid(format!("packet ({f},{b}) outside the library")));
            }
        }
        *slot = m.conditional_entropy(PacketId::new(target_file, target_packet), PacketId::new(given_file, given_packet));
        Ok(())
    })
}

unsafe fn problem(
    receivers: usize,
    cache_size: f64,
    files: usize,
    q: *const f64,
    delta: f64,
    matrix: *const f64,
) -> Result<BoundProblem, Failure> {
    let q = slice(q, files, "q")?.to_vec();
    let matrix = match matrix.is_null() {
        true => MatchMatrix::identity(files),
        false => matrix_from(slice(matrix, files * files, "matrix")?, files)?,
    };
    Ok(BoundProblem {
        receivers,
        cache_size,
        q,
        delta,
        matrix,
        rho: RhoMethod::Auto,
    })
}

/// Evaluates the rate upper bound at caching distribution `p`. A null
/// `matrix` means no cross-file correlation.
///
/// # Safety
/// `q` and `p` must point to `files` doubles, `matrix` to `files * files`
/// doubles or be null, and `out_report` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cacm_rate_bound(
    receivers: usize,
    cache_size: f64,
    files: usize,
    q: *const f64,
    p: *const f64,
    delta: f64,
    matrix: *const f64,
    out_report: *mut CacmBoundReport,
) -> CacmStatus {
    guard(|| {
        let slot = out(out_report, "out_report")?;
        let problem = problem(receivers, cache_size, files, q, delta, matrix)?;
        let p = slice(p, files, "p")?.to_vec();
        let r = rate_upper_bound(&BoundInputs { problem, p })?;
        *slot = CacmBoundReport {
            psi: r.psi,
            delta_r: r.delta_r,
            m_bar: r.m_bar,
            bound: r.bound,
        };
        Ok(())
    })
}

/// Searches for the caching distribution minimizing the bound; writes it to
/// `out_p` (`files` doubles) and the bound to `out_bound`.
///
/// # Safety
/// As for [`cacm_rate_bound`]; `out_p` must hold `files` doubles.
#[no_mangle]
pub unsafe extern "C" fn cacm_optimize_p(
    receivers: usize,
    cache_size: f64,
    files: usize,
    q: *const f64,
    delta: f64,
    matrix: *const f64,
    out_p: *mut f64,
    out_bound: *mut f64,
) -> CacmStatus {
    guard(|| {
        if out_p.is_null() {
            return Err(null("out_p"));
        }
        let bound_slot = out(out_bound, "out_bound")?;
        let problem = problem(receivers, cache_size, files, q, delta, matrix)?;
        let r = optimize_p(&problem, Strategy::Best)?;
        std::slice::from_raw_parts_mut(out_p, files).copy_from_slice(&r.distribution.p);
        *bound_slot = r.bound;
        Ok(())
    })
}

/// Parses a TOML scenario.
///
/// # Safety
/// `toml` must be a nul-terminated string; `out_scenario` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cacm_scenario_from_toml(
    toml: *const c_char,
    out_scenario: *mut *mut CacmScenario,
) -> CacmStatus {
    guard(|| {
        let slot = out(out_scenario, "out_scenario")?;
        let s = Scenario::from_toml(text(toml, "toml")?)?;
        s.validate()?;
        *slot = Box::into_raw(Box::new(CacmScenario(s)));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from [`cacm_scenario_from_toml`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cacm_scenario_free(scenario: *mut CacmScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the scenario's sweep.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cacm_run(scenario: *const CacmScenario, out_record: *mut *mut CacmRecord) -> CacmStatus {
    guard(|| {
        let slot = out(out_record, "out_record")?;
        let record = harness::run(&handle(scenario, "scenario")?.0)?;
        *slot = Box::into_raw(Box::new(CacmRecord(record)));
        Ok(())
    })
}

/// # Safety
/// `record` must come from [`cacm_run`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cacm_record_free(record: *mut CacmRecord) {
    if !record.is_null() {
        drop(Box::from_raw(record));
    }
}

/// Number of (scheme, cache size) points in the record.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cacm_record_point_count(record: *const CacmRecord, out_count: *mut usize) -> CacmStatus {
    guard(|| {
        *out(out_count, "out_count")? = handle(record, "record")?.0.points.len();
        Ok(())
    })
}

/// Cache size, mean rate and standard error of point `index`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cacm_record_point(
    record: *const CacmRecord,
    index: usize,
    out_cache_size: *mut f64,
    out_mean_rate: *mut f64,
    out_stderr: *mut f64,
) -> CacmStatus {
    guard(|| {
        let points = &handle(record, "record")?.0.points;
        let p = points
            .get(index)
            .ok_or_else(|| invalid(format!("point {index} out of {}", points.len())))?;
        *out(out_cache_size, "out_cache_size")? = p.cache_size;
        *out(out_mean_rate, "out_mean_rate")? = p.mean_rate;
        *out(out_stderr, "out_stderr")? = p.stderr;
        Ok(())
    })
}

/// Serializes the record as JSON; free the string with [`cacm_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cacm_record_to_json(record: *const CacmRecord, out_json: *mut *mut c_char) -> CacmStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        let json = serde_json::to_string(&handle(record, "record")?.0).map_err(|e| invalid(e.to_string()))?;
        *slot = CString::new(json).map_err(|e| invalid(e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Rates of the built-in four-file example: correlation-aware and reference.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cacm_example1(out_rate: *mut f64, out_reference: *mut f64) -> CacmStatus {
    guard(|| {
        let r = harness::example1()?;
        *out(out_rate, "out_rate")? = r.rate;
        *out(out_reference, "out_reference")? = r.reference_rate;
        Ok(())
    })
}
