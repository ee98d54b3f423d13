//! C ABI for `ssalab`.
//!
//! Density matrices live behind the opaque `SsaDensity` handle. Every call
//! returns an `SsaStatus`; on failure a message for the calling thread is
//! available from `ssa_last_error_message`. Strings handed out by the library
//! are NUL-terminated UTF-8 and must be released with `ssa_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ssalab::conditions::{check_state, ssa_gap};
use ssalab::minimizer::{minimize_f, FeasibleRegionSpec, SupportPattern};
use ssalab::stategen::{generate, GeneratorSpec};
use ssalab::tensor::{density_from_json, partial_trace, spectrum_of, DensityMatrix, PartySet, TripartiteDims};
use ssalab::Error;

/// Opaque tripartite density matrix.
pub struct SsaDensity {
    inner: DensityMatrix,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidState = 3,
    Parse = 4,
    NoConvergence = 5,
    SamplerFailure = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SsaStatus {
    match e {
        Error::NotHermitian { .. } | Error::NotSquare { .. } | Error::InvalidState(_) | Error::InvalidSpectrum(_) => {
            SsaStatus::InvalidState
        }
        Error::DimensionMismatch(_) | Error::InvalidArgument(_) | Error::Io(_) => SsaStatus::InvalidArgument,
        Error::Parse(_) => SsaStatus::Parse,
        Error::NoConvergence { .. } => SsaStatus::NoConvergence,
        Error::SamplerFailure { .. } => SsaStatus::SamplerFailure,
    }
}

struct Fail(SsaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SsaStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus thread-local message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SsaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SsaStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SsaStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SsaStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a>(p: *const SsaDensity) -> Result<&'a DensityMatrix, Fail> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| null("density handle"))
}

unsafe fn give_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|_| Fail(SsaStatus::Panic, "string contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, Fail> {
    serde_json::to_string(v).map_err(|e| Fail(SsaStatus::Parse, e.to_string()))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ssa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses `{"dims":[L,M,N],"entries":[[re,im],...]}` (row-major) into a new handle.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ssa_density_from_json(json: *const c_char, out: *mut *mut SsaDensity) -> SsaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = density_from_json(read_str(json, "json")?)?;
        *out = Box::into_raw(Box::new(SsaDensity { inner }));
        Ok(())
    })
}

/// Generates a state from a generator spec such as
/// `{"dims":[2,2,2],"kind":{"type":"ginibre_full"},"seed":7}`.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ssa_density_generate(spec_json: *const c_char, out: *mut *mut SsaDensity) -> SsaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec: GeneratorSpec = serde_json::from_str(read_str(spec_json, "spec_json")?).map_err(Error::from)?;
        let inner = generate(&spec)?;
        *out = Box::into_raw(Box::new(SsaDensity { inner }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `rho` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ssa_density_free(rho: *mut SsaDensity) {
    if !rho.is_null() {
        drop(Box::from_raw(rho));
    }
}

/// Writes `L`, `M`, `N` to `out[0..3]`.
///
/// # Safety
/// `rho` must be a live handle and `out` must hold three values.
#[no_mangle]
pub unsafe extern "C" fn ssa_density_dims(rho: *const SsaDensity, out: *mut usize) -> SsaStatus {
    guard(|| {
        let d = handle(rho)?.require_tripartite()?;
        if out.is_null() {
            return Err(null("out"));
        }
        let dims = [d.l(), d.m(), d.n()];
        ptr::copy_nonoverlapping(dims.as_ptr(), out, 3);
        Ok(())
    })
}

/// Ascending spectrum of the marginal on the parties in `keep_mask`
/// (bit 0 = A, bit 1 = B, bit 2 = C). `*out_len` receives the length; if
/// `capacity` is smaller nothing is written and `BufferTooSmall` is returned.
///
/// # Safety
/// `rho` must be a live handle, `out` must hold `capacity` doubles, and
/// `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssa_density_spectrum(
    rho: *const SsaDensity,
    keep_mask: u8,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> SsaStatus {
    guard(|| {
        let rho = handle(rho)?;
        if out_len.is_null() {
            return Err(null("out_len"));
        }
        let keep = PartySet::from_bits(keep_mask)
            .filter(|k| !k.is_empty())
            .ok_or_else(|| Fail(SsaStatus::InvalidArgument, format!("bad party mask {keep_mask}")))?;
        let spectrum = spectrum_of(&partial_trace(rho, keep)?)?;
        let values = spectrum.values();
        *out_len = values.len();
        if capacity < values.len() {
            return Err(Fail(
                SsaStatus::BufferTooSmall,
                format!("spectrum has {} values, buffer holds {capacity}", values.len()),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
        Ok(())
    })
}

/// `S(AB) + S(BC) − S(B) − S(ABC)` in nats.
///
/// # Safety
/// `rho` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ssa_density_ssa_gap(rho: *const SsaDensity, out: *mut f64) -> SsaStatus {
    guard(|| {
        let gap = ssa_gap(handle(rho)?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = gap;
        Ok(())
    })
}

/// Full condition report (majorization margins, zero counts, entropy gaps) as JSON.
///
/// # Safety
/// `rho` must be a live handle and `out` writable; free the result with `ssa_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ssa_density_report_json(
    rho: *const SsaDensity,
    rank_threshold: f64,
    out: *mut *mut c_char,
) -> SsaStatus {
    guard(|| {
        let rho = handle(rho)?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !(rank_threshold > 0.0) {
            return Err(Fail(SsaStatus::InvalidArgument, "rank_threshold must be positive".into()));
        }
        give_string(out, to_json(&check_state(rho, rank_threshold)?)?)
    })
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct MinimizeRequest {
    dims: TripartiteDims,
    #[serde(default = "full")]
    pattern: SupportPattern,
    restarts: usize,
    seed: u64,
}

fn full() -> SupportPattern {
    SupportPattern::FULL
}

/// Runs the multi-start minimizer for a request such as
/// `{"dims":[2,2,2],"pattern":{"abc":0,"ab":0,"bc":0,"b":0},"restarts":8,"seed":1}`
/// and returns the result as JSON.
///
/// # Safety
/// `request_json` must be a NUL-terminated string and `out` writable; free
/// the result with `ssa_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ssa_minimize_json(request_json: *const c_char, out: *mut *mut c_char) -> SsaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let req: MinimizeRequest =
            serde_json::from_str(read_str(request_json, "request_json")?).map_err(Error::from)?;
        let spec = FeasibleRegionSpec::new(req.dims, req.pattern)?;
        give_string(out, to_json(&minimize_f(&spec, req.restarts, req.seed)?)?)
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ssa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
