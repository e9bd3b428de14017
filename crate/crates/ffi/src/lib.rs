//! C ABI over the `dpbeam` codebook designer.
//!
//! Every function returns a [`DpbStatus`]; on failure a message is available
//! from [`dpb_last_error_message`] on the same thread. Handles are opaque and
//! must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use dpbeam::array_geometry::{ArrayConfig, RegionGrid, SpatialFrequency};
use dpbeam::codebook::{baseline_dft_codebook, Codebook};
use dpbeam::codeword_design::{DesignSettings, Designer};
use dpbeam::ideal_pattern::reference_gain;
use dpbeam::polarization_channel::PolarizationParams;
use dpbeam::runner::{read_codebook, write_codebook};
use dpbeam::Error;
use nalgebra::DVector;
use num_complex::Complex64;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidParams = 3,
    Degenerate = 4,
    LengthMismatch = 5,
    Io = 6,
    Format = 7,
    Config = 8,
    Internal = 9,
    Panic = 10,
}

/// Complex number laid out as two doubles.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpbComplex {
    pub re: f64,
    pub im: f64,
}

/// Everything needed to build a designer.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpbDesignParams {
    pub m_h: usize,
    pub m_v: usize,
    pub q_h: usize,
    pub q_v: usize,
    pub l_h: usize,
    pub l_v: usize,
    pub chi: f64,
    pub phi: f64,
    pub zeta_vv: DpbComplex,
    pub zeta_hv: DpbComplex,
    pub b_grid: usize,
    pub n_rf: usize,
    pub oversample_h: usize,
    pub oversample_v: usize,
    pub pol_phases: usize,
}

/// Opaque designer handle.
pub struct DpbDesigner {
    inner: Designer,
}

/// Opaque codebook handle.
pub struct DpbCodebook {
    inner: Codebook,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> DpbStatus {
    match e {
        Error::InvalidArgument(_) => DpbStatus::InvalidArgument,
        Error::InvalidParams(_) => DpbStatus::InvalidParams,
        Error::Degenerate(_) => DpbStatus::Degenerate,
        Error::LengthMismatch { .. } => DpbStatus::LengthMismatch,
        Error::Internal(_) => DpbStatus::Internal,
        Error::Config { .. } => DpbStatus::Config,
        Error::Format(_) => DpbStatus::Format,
        Error::Io(_) => DpbStatus::Io,
    }
}

struct Failure(DpbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DpbStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DpbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            DpbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside dpbeam".into());
            DpbStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller guarantees `p` is null or a valid pointer.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn write_out<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null and, per the caller's contract, valid for writes.
    unsafe { p.write(value) };
    Ok(())
}

fn c64(z: DpbComplex) -> Complex64 {
    Complex64::new(z.re, z.im)
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn dpb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: `buf` has room for `len >= n + 1` bytes.
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Fills `out` with the default experiment: 8x16 array, 6x6 regions of 7x7
/// sections, chi = 0.3, phi = pi/4, unit path gains, B = 3, N = 4.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dpb_design_params_default(out: *mut DpbDesignParams) -> DpbStatus {
    guard(|| {
        let s = DesignSettings::default();
        let one = DpbComplex { re: 1.0, im: 0.0 };
        let p = DpbDesignParams {
            m_h: 8,
            m_v: 16,
            q_h: 6,
            q_v: 6,
            l_h: 7,
            l_v: 7,
            chi: 0.3,
            phi: std::f64::consts::FRAC_PI_4,
            zeta_vv: one,
            zeta_hv: one,
            b_grid: s.b_grid,
            n_rf: s.n_rf,
            oversample_h: s.oversample_h,
            oversample_v: s.oversample_v,
            pol_phases: s.pol_phases,
        };
        unsafe { write_out(out, p, "out") }
    })
}

/// Builds a designer; release it with [`dpb_designer_free`].
///
/// # Safety
/// `params` must be null or point to a valid struct; `out` must be null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dpb_designer_new(params: *const DpbDesignParams, out: *mut *mut DpbDesigner) -> DpbStatus {
    guard(|| {
        let p = unsafe { deref(params, "params") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let array = ArrayConfig::new(p.m_h, p.m_v)?;
        let grid = RegionGrid::new(p.q_h, p.q_v, p.l_h, p.l_v)?;
        let pol = PolarizationParams::new(p.chi, p.phi, c64(p.zeta_vv), c64(p.zeta_hv))?;
        let settings = DesignSettings {
            b_grid: p.b_grid,
            n_rf: p.n_rf,
            oversample_h: p.oversample_h,
            oversample_v: p.oversample_v,
            pol_phases: p.pol_phases,
        };
        let designer = Designer::new(array, grid, pol, settings)?;
        let handle = Box::into_raw(Box::new(DpbDesigner { inner: designer }));
        unsafe { write_out(out, handle, "out") }
    })
}

/// Releases a designer. Null is ignored.
///
/// # Safety
/// `designer` must be null or a handle from [`dpb_designer_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dpb_designer_free(designer: *mut DpbDesigner) {
    if !designer.is_null() {
        // SAFETY: the handle came from Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(designer) });
    }
}

fn emit_codebook(cb: Codebook, out: *mut *mut DpbCodebook) -> Result<(), Failure> {
    let handle = Box::into_raw(Box::new(DpbCodebook { inner: cb }));
    if out.is_null() {
        // SAFETY: just allocated above.
        drop(unsafe { Box::from_raw(handle) });
        return Err(null("out"));
    }
    // SAFETY: checked non-null; caller guarantees validity.
    unsafe { out.write(handle) };
    Ok(())
}

/// Designs the squared-error codebook over all regions.
///
/// # Safety
/// `designer` must be a live handle; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dpb_design_codebook(designer: *const DpbDesigner, out: *mut *mut DpbCodebook) -> DpbStatus {
    guard(|| {
        let d = unsafe { deref(designer, "designer") }?;
        emit_codebook(Codebook::design(&d.inner)?, out)
    })
}

/// Builds the matched narrow-beam baseline codebook for the designer's setup.
///
/// # Safety
/// `designer` must be a live handle; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dpb_baseline_codebook(designer: *const DpbDesigner, out: *mut *mut DpbCodebook) -> DpbStatus {
    guard(|| {
        let d = &unsafe { deref(designer, "designer") }?.inner;
        emit_codebook(baseline_dft_codebook(&d.grid, &d.params, &d.array)?, out)
    })
}

/// Loads a codebook file written by [`dpb_codebook_save`] or the CLI.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` must be null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dpb_codebook_load(path: *const c_char, out: *mut *mut DpbCodebook) -> DpbStatus {
    guard(|| {
        let path = path_arg(path)?;
        emit_codebook(read_codebook(Path::new(&path))?, out)
    })
}

fn path_arg(path: *const c_char) -> Result<String, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    // SAFETY: non-null and NUL-terminated per the caller's contract.
    let s = unsafe { CStr::from_ptr(path) };
    s.to_str()
        .map(str::to_owned)
        .map_err(|_| Failure(DpbStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

/// Writes the codebook and its JSON sidecar (`<path>.json`).
///
/// # Safety
/// `codebook` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dpb_codebook_save(codebook: *const DpbCodebook, path: *const c_char) -> DpbStatus {
    guard(|| {
        let cb = unsafe { deref(codebook, "codebook") }?;
        let path = path_arg(path)?;
        write_codebook(Path::new(&path), &cb.inner)?;
        Ok(())
    })
}

/// Releases a codebook. Null is ignored.
///
/// # Safety
/// `codebook` must be null or a live handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dpb_codebook_free(codebook: *mut DpbCodebook) {
    if !codebook.is_null() {
        // SAFETY: the handle came from Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(codebook) });
    }
}

/// Number of codewords (one per region).
///
/// # Safety
/// `codebook` must be a live handle; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dpb_codebook_len(codebook: *const DpbCodebook, out: *mut usize) -> DpbStatus {
    guard(|| {
        let cb = unsafe { deref(codebook, "codebook") }?;
        unsafe { write_out(out, cb.inner.len(), "out") }
    })
}

/// Length `M = 2 m_h m_v` of every codeword.
///
/// # Safety
/// `codebook` must be a live handle; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dpb_codebook_codeword_len(codebook: *const DpbCodebook, out: *mut usize) -> DpbStatus {
    guard(|| {
        let cb = unsafe { deref(codebook, "codebook") }?;
        unsafe { write_out(out, cb.inner.array.total_elements(), "out") }
    })
}

fn entry(cb: &DpbCodebook, index: usize) -> Result<&dpbeam::codebook::CodebookEntry, Failure> {
    cb.inner.entries.get(index).ok_or_else(|| {
        Failure(
            DpbStatus::InvalidArgument,
            format!("index {index} out of range for {} codewords", cb.inner.len()),
        )
    })
}

/// Copies codeword `index` into `buf`, which must hold exactly `len`
/// elements (see [`dpb_codebook_codeword_len`]).
///
/// # Safety
/// `codebook` must be a live handle; `buf` null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dpb_codebook_copy_codeword(
    codebook: *const DpbCodebook,
    index: usize,
    buf: *mut DpbComplex,
    len: usize,
) -> DpbStatus {
    guard(|| {
        let cb = unsafe { deref(codebook, "codebook") }?;
        let e = entry(cb, index)?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != e.codeword.len() {
            return Err(Error::LengthMismatch {
                expected: e.codeword.len(),
                found: len,
            }
            .into());
        }
        // SAFETY: `buf` is valid for `len` writes per the caller's contract.
        let dst = unsafe { std::slice::from_raw_parts_mut(buf, len) };
        for (d, z) in dst.iter_mut().zip(e.codeword.iter()) {
            *d = DpbComplex { re: z.re, im: z.im };
        }
        Ok(())
    })
}

/// Region `(p, q)` (1-based) and squared error of codeword `index`.
///
/// # Safety
/// `codebook` must be a live handle; outputs null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dpb_codebook_entry_info(
    codebook: *const DpbCodebook,
    index: usize,
    p: *mut usize,
    q: *mut usize,
    se: *mut f64,
) -> DpbStatus {
    guard(|| {
        let cb = unsafe { deref(codebook, "codebook") }?;
        let e = entry(cb, index)?;
        unsafe {
            write_out(p, e.region.p, "p")?;
            write_out(q, e.region.q, "q")?;
            write_out(se, e.se, "se")
        }
    })
}

/// Reference gain of a unit-norm codeword at unpaired frequencies
/// `(psi_h, psi_v)` under the designer's array and polarization.
///
/// # Safety
/// `designer` must be a live handle; `codeword` valid for `len` reads; `out`
/// null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dpb_reference_gain(
    designer: *const DpbDesigner,
    psi_h: f64,
    psi_v: f64,
    codeword: *const DpbComplex,
    len: usize,
    out: *mut f64,
) -> DpbStatus {
    guard(|| {
        let d = &unsafe { deref(designer, "designer") }?.inner;
        if codeword.is_null() {
            return Err(null("codeword"));
        }
        // SAFETY: valid for `len` reads per the caller's contract.
        let src = unsafe { std::slice::from_raw_parts(codeword, len) };
        let c = DVector::from_iterator(len, src.iter().map(|z| c64(*z)));
        let g = reference_gain(SpatialFrequency::new(psi_h, psi_v), &c, &d.params, &d.array)?;
        unsafe { write_out(out, g, "out") }
    })
}
