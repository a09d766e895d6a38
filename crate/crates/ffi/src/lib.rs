//! C ABI over the `normalflow` library.
//!
//! Frames and trackers are opaque heap handles owned by the caller and
//! released with their `_free` function. Every fallible call returns an
//! [`NfStatus`]; on failure, [`nf_last_error_message`] describes the error
//! on the calling thread. Transforms cross the boundary as row-major 4x4
//! homogeneous matrices mapping reference coordinates to target coordinates,
//! in millimeters.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use normalflow::maps::container::load_frame;
use normalflow::maps::{poisson_integrate, Grid, GridGeometry, TactileFrame};
use normalflow::se3::RigidTransform;
use normalflow::solver::{register, RegistrationResult, SolverConfig};
use normalflow::tracker::{track_step, KeyframePolicy, TrackerState};
use normalflow::Error;

/// Result of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    InsufficientOverlap = 5,
    Degenerate = 6,
    Panic = 7,
}

/// Opaque tactile frame.
pub struct NfFrame(TactileFrame);

/// Opaque keyframe tracker.
pub struct NfTracker {
    state: TrackerState,
    policy: KeyframePolicy,
    solver: SolverConfig,
}

/// Outcome of [`nf_register`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NfRegistration {
    /// Row-major 4x4 transform, reference to target.
    pub transform: [f64; 16],
    pub iterations: u32,
    pub final_cost: f64,
    pub shared_pixels: u64,
    pub hessian_condition: f64,
    pub converged: bool,
}

/// Outcome of [`nf_tracker_push`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NfTrackStep {
    /// Row-major 4x4 transform, first frame to this frame.
    pub pose: [f64; 16],
    pub frame_index: u64,
    pub promoted_keyframe: bool,
    /// Registration failed; `pose` repeats the last good estimate.
    pub lost: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: impl Into<String>) {
    let text = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(e: &Error) -> NfStatus {
    match e {
        Error::InsufficientOverlap { .. } => NfStatus::InsufficientOverlap,
        Error::DegenerateHessian { .. } | Error::DegenerateSystem { .. } => NfStatus::Degenerate,
        Error::File { .. } | Error::Io(_) => NfStatus::Io,
        Error::Format(_) => NfStatus::Format,
        _ => NfStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into a status plus a message.
fn guard(f: impl FnOnce() -> Result<(), (NfStatus, String)>) -> NfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            NfStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            NfStatus::Panic
        }
    }
}

fn fail(e: Error) -> (NfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NfStatus, String) {
    (NfStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (NfStatus, String) {
    (NfStatus::InvalidArgument, msg.into())
}

fn registration(r: &RegistrationResult) -> NfRegistration {
    NfRegistration {
        transform: r.transform.to_homogeneous(),
        iterations: r.iterations as u32,
        final_cost: r.final_cost,
        shared_pixels: r.shared_pixels as u64,
        hessian_condition: r.hessian_condition,
        converged: r.converged,
    }
}

/// Reads an NFLW frame file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer; on
/// success `*out` owns a frame to release with [`nf_frame_free`].
#[no_mangle]
pub unsafe extern "C" fn nf_frame_load(path: *const c_char, out: *mut *mut NfFrame) -> NfStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| invalid("path is not valid UTF-8"))?;
        let frame = load_frame(path).map_err(fail)?;
        *out = Box::into_raw(Box::new(NfFrame(frame)));
        Ok(())
    })
}

/// Builds a frame from a gradient map.
///
/// `gradients` holds `height * width` interleaved `(g_u, g_v)` pairs in
/// row-major order; `mask` holds `height * width` bytes, nonzero for
/// contact. When `heights` is null the height map is integrated from the
/// gradients.
///
/// # Safety
/// Non-null array arguments must point to at least the stated number of
/// elements; `out` must be valid. On success `*out` owns a frame to release
/// with [`nf_frame_free`].
#[no_mangle]
pub unsafe extern "C" fn nf_frame_from_gradients(
    height: u32,
    width: u32,
    pixel_pitch: f64,
    gradients: *const f64,
    heights: *const f64,
    mask: *const u8,
    timestamp: f64,
    out: *mut *mut NfFrame,
) -> NfStatus {
    guard(|| {
        if gradients.is_null() {
            return Err(null("gradients"));
        }
        if mask.is_null() {
            return Err(null("mask"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let (rows, cols) = (height as usize, width as usize);
        let geom = GridGeometry::new(rows, cols, pixel_pitch).map_err(fail)?;
        let n = rows * cols;
        let g = std::slice::from_raw_parts(gradients, 2 * n);
        let g = Grid::from_vec(
            rows,
            cols,
            g.chunks_exact(2).map(|p| [p[0], p[1]]).collect(),
        )
        .map_err(fail)?;
        let m = std::slice::from_raw_parts(mask, n);
        let m = Grid::from_vec(rows, cols, m.iter().map(|&b| b != 0).collect()).map_err(fail)?;
        let h = if heights.is_null() {
            poisson_integrate(&g, &geom)
        } else {
            Grid::from_vec(rows, cols, std::slice::from_raw_parts(heights, n).to_vec())
                .map_err(fail)?
        };
        let frame = TactileFrame::new(geom, g, h, m, timestamp).map_err(fail)?;
        *out = Box::into_raw(Box::new(NfFrame(frame)));
        Ok(())
    })
}

/// Releases a frame. Null is ignored.
///
/// # Safety
/// `frame` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nf_frame_free(frame: *mut NfFrame) {
    if !frame.is_null() {
        drop(Box::from_raw(frame));
    }
}

/// Number of contact pixels in a frame, or 0 for null.
///
/// # Safety
/// `frame` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nf_frame_contact_pixels(frame: *const NfFrame) -> u64 {
    frame.as_ref().map_or(0, |f| f.0.contact_pixels() as u64)
}

/// Registers `target` against `reference` with default solver settings.
/// `init` is an optional row-major 4x4 initial guess; null means identity.
///
/// # Safety
/// Frame handles must be live, `init` null or 16 doubles, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn nf_register(
    reference: *const NfFrame,
    target: *const NfFrame,
    init: *const f64,
    out: *mut NfRegistration,
) -> NfStatus {
    guard(|| {
        let reference = reference.as_ref().ok_or_else(|| null("reference"))?;
        let target = target.as_ref().ok_or_else(|| null("target"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let init = if init.is_null() {
            RigidTransform::identity()
        } else {
            let m: [f64; 16] = std::slice::from_raw_parts(init, 16)
                .try_into()
                .expect("slice has 16 elements");
            RigidTransform::from_homogeneous(&m)
        };
        let r = register(&reference.0, &target.0, &init, &SolverConfig::default()).map_err(fail)?;
        *out = registration(&r);
        Ok(())
    })
}

/// Starts a tracker with `first` as frame 0. The frame is copied.
///
/// # Safety
/// `first` must be a live handle and `out` valid. On success `*out` owns a
/// tracker to release with [`nf_tracker_free`].
#[no_mangle]
pub unsafe extern "C" fn nf_tracker_new(
    first: *const NfFrame,
    out: *mut *mut NfTracker,
) -> NfStatus {
    guard(|| {
        let first = first.as_ref().ok_or_else(|| null("first"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let tracker = NfTracker {
            state: TrackerState::new(first.0.clone()),
            policy: KeyframePolicy::default(),
            solver: SolverConfig::default(),
        };
        *out = Box::into_raw(Box::new(tracker));
        Ok(())
    })
}

/// Tracks the next frame. A registration failure is not an error: the step
/// reports `lost` and repeats the previous pose.
///
/// # Safety
/// Handles must be live and `out` valid. The frame is copied.
#[no_mangle]
pub unsafe extern "C" fn nf_tracker_push(
    tracker: *mut NfTracker,
    frame: *const NfFrame,
    out: *mut NfTrackStep,
) -> NfStatus {
    guard(|| {
        let tracker = tracker.as_mut().ok_or_else(|| null("tracker"))?;
        let frame = frame.as_ref().ok_or_else(|| null("frame"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let step = track_step(
            &mut tracker.state,
            frame.0.clone(),
            &tracker.policy,
            &tracker.solver,
        )
        .map_err(fail)?;
        *out = NfTrackStep {
            pose: step.pose.to_homogeneous(),
            frame_index: step.index as u64,
            promoted_keyframe: step.promoted,
            lost: step.lost,
        };
        Ok(())
    })
}

/// Releases a tracker. Null is ignored.
///
/// # Safety
/// `tracker` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nf_tracker_free(tracker: *mut NfTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn nf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nf_version() -> *const c_char {
    const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}
