//! C ABI over svykit. Frames, designs and samples are opaque heap handles
//! released with their `*_free` function. Every call returns an `SvyStatus`;
//! on failure `svy_last_error` holds a message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use svykit::estimators::ht_total;
use svykit::simulate::exact_expectation;
use svykit::{Design, Error, Frame, RngStream, Sample};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvyStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Data = 3,
    ZeroInclusion = 4,
    SupportTooLarge = 5,
    NotEnumerable = 6,
    Singular = 7,
    NoConvergence = 8,
    Numerical = 9,
    BufferTooSmall = 10,
    Panic = 99,
}

/// Opaque population frame.
pub struct SvyFrame(Frame);
/// Opaque sampling design.
pub struct SvyDesign(Design);
/// Opaque realized sample.
pub struct SvySample(Sample);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SvyStatus {
    match e {
        Error::Input(_) => SvyStatus::InvalidInput,
        Error::Data(_) => SvyStatus::Data,
        Error::ZeroInclusion(_) => SvyStatus::ZeroInclusion,
        Error::SupportTooLarge { .. } => SvyStatus::SupportTooLarge,
        Error::NotEnumerable(_) => SvyStatus::NotEnumerable,
        Error::Singular(_) => SvyStatus::Singular,
        Error::NoConvergence { .. } => SvyStatus::NoConvergence,
        Error::Numerical(_) => SvyStatus::Numerical,
    }
}

/// Run `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (SvyStatus, String)>) -> SvyStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SvyStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            SvyStatus::Panic
        }
    }
}

fn lib<T>(r: svykit::Result<T>) -> Result<T, (SvyStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (SvyStatus, String) {
    (SvyStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (SvyStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (SvyStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string(p: *const c_char, what: &str) -> Result<String, (SvyStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_string)
        .map_err(|_| (SvyStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), (SvyStatus, String)> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn svy_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn svy_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Frame of `n` units with sizes `mos`.
///
/// # Safety
/// `mos` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn svy_frame_from_mos(mos: *const f64, n: usize, out: *mut *mut SvyFrame) -> SvyStatus {
    guard(|| {
        let m = slice(mos, n, "mos")?;
        put(out, SvyFrame(lib(Frame::from_mos(m))?))
    })
}

/// Read a frame from a CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn svy_frame_from_csv(path: *const c_char, out: *mut *mut SvyFrame) -> SvyStatus {
    guard(|| {
        let p = string(path, "path")?;
        put(out, SvyFrame(lib(Frame::from_csv_path(p))?))
    })
}

/// Attach one study variable to every unit.
///
/// # Safety
/// `frame` must be a live handle and `y` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn svy_frame_set_y(frame: *mut SvyFrame, y: *const f64, n: usize) -> SvyStatus {
    guard(|| {
        let f = frame.as_mut().ok_or_else(|| null("frame"))?;
        let y = slice(y, n, "y")?;
        f.0 = lib(f.0.clone().with_y(y))?;
        Ok(())
    })
}

/// # Safety
/// `frame` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn svy_frame_len(frame: *const SvyFrame) -> usize {
    frame.as_ref().map_or(0, |f| f.0.len())
}

/// # Safety
/// `frame` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn svy_frame_free(frame: *mut SvyFrame) {
    if !frame.is_null() {
        drop(Box::from_raw(frame));
    }
}

/// Parse and validate a JSON design document such as `{"srs":{"n":2}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn svy_design_from_json(json: *const c_char, out: *mut *mut SvyDesign) -> SvyStatus {
    guard(|| {
        let text = string(json, "json")?;
        let d: Design =
            serde_json::from_str(&text).map_err(|e| (SvyStatus::InvalidInput, format!("design schema: {e}")))?;
        lib(d.validate())?;
        put(out, SvyDesign(d))
    })
}

/// # Safety
/// `design` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn svy_design_free(design: *mut SvyDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// First-order inclusion probabilities into `out`, which holds `cap`
/// doubles. `cap` must be at least the frame size.
///
/// # Safety
/// Handles must be live; `out` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn svy_inclusion_probs(
    design: *const SvyDesign,
    frame: *const SvyFrame,
    out: *mut f64,
    cap: usize,
) -> SvyStatus {
    guard(|| {
        let (d, f) = (as_ref(design, "design")?, as_ref(frame, "frame")?);
        let pi = lib(svykit::first_order_pips(&d.0, &f.0))?.first_order;
        write_buf(&pi, out, cap)
    })
}

unsafe fn write_buf<T: Copy>(v: &[T], out: *mut T, cap: usize) -> Result<(), (SvyStatus, String)> {
    if cap < v.len() {
        return Err((SvyStatus::BufferTooSmall, format!("buffer holds {cap}, need {}", v.len())));
    }
    if v.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    ptr::copy_nonoverlapping(v.as_ptr(), out, v.len());
    Ok(())
}

/// Draw one sample with the seeded stream `(seed, 0)`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn svy_draw(
    design: *const SvyDesign,
    frame: *const SvyFrame,
    seed: u64,
    out: *mut *mut SvySample,
) -> SvyStatus {
    guard(|| {
        let (d, f) = (as_ref(design, "design")?, as_ref(frame, "frame")?);
        let mut rng = RngStream::new(seed, 0).rng();
        put(out, SvySample(lib(svykit::draw(&d.0, &f.0, &mut rng))?))
    })
}

/// Number of distinct units in the sample.
///
/// # Safety
/// `sample` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn svy_sample_len(sample: *const SvySample) -> usize {
    sample.as_ref().map_or(0, |s| s.0.len())
}

/// Frame positions (0-based) of the sampled units.
///
/// # Safety
/// `sample` must be live; `out` must point to `cap` writable slots.
#[no_mangle]
pub unsafe extern "C" fn svy_sample_units(sample: *const SvySample, out: *mut usize, cap: usize) -> SvyStatus {
    guard(|| write_buf(&as_ref(sample, "sample")?.0.units(), out, cap))
}

/// Inclusion probabilities of the sampled units, in sample order.
///
/// # Safety
/// `sample` must be live; `out` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn svy_sample_pis(sample: *const SvySample, out: *mut f64, cap: usize) -> SvyStatus {
    guard(|| write_buf(&as_ref(sample, "sample")?.0.pis(), out, cap))
}

/// # Safety
/// `sample` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn svy_sample_free(sample: *mut SvySample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Horvitz-Thompson total of the frame's first study variable.
///
/// # Safety
/// Handles must be live; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn svy_ht_total(sample: *const SvySample, frame: *const SvyFrame, value: *mut f64) -> SvyStatus {
    guard(|| {
        let (s, f) = (as_ref(sample, "sample")?, as_ref(frame, "frame")?);
        let y = lib(f.0.y(0))?;
        let e = lib(ht_total(&s.0, &s.0.gather(&y)))?;
        *value.as_mut().ok_or_else(|| null("value"))? = e.value;
        Ok(())
    })
}

/// Exact design mean and variance of the HT total, by enumeration.
///
/// # Safety
/// Handles must be live; `mean` and `variance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn svy_exact_ht_moments(
    design: *const SvyDesign,
    frame: *const SvyFrame,
    mean: *mut f64,
    variance: *mut f64,
) -> SvyStatus {
    guard(|| {
        let (d, f) = (as_ref(design, "design")?, as_ref(frame, "frame")?);
        let (mean, variance) = (mean.as_mut().ok_or_else(|| null("mean"))?, variance.as_mut().ok_or_else(|| null("variance"))?);
        let y = lib(f.0.y(0))?;
        let m = lib(exact_expectation(&d.0, &f.0, |s| ht_total(s, &s.gather(&y)).map_or(f64::NAN, |e| e.value)))?;
        *mean = m.mean;
        *variance = m.variance;
        Ok(())
    })
}
