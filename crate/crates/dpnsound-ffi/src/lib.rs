//! C ABI for the dpnsound soundness checker.
//!
//! The interface follows the usual opaque-handle pattern: a model is loaded
//! from JSON into a [`DpnsoundModel`] handle, analysis results come back as
//! heap-allocated JSON strings, and every fallible call returns a
//! [`DpnsoundStatus`]. On failure a thread-local message is kept and can be
//! read with [`dpnsound_last_error`].
//!
//! Memory rules: every `*mut` returned by this library is owned by the
//! caller and must be released with the matching `_free` function. Pointers
//! returned by [`dpnsound_last_error`] and [`dpnsound_version`] are borrowed
//! and must not be freed.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use dpnsound::abstraction::build_representatives;
use dpnsound::cpn::translate;
use dpnsound::dpn::Dpn;
use dpnsound::model::load_model_str;
use dpnsound::report::{build_document, to_json};
use dpnsound::soundness::{analyze, DecisionSet};
use dpnsound::statespace::{explore, ExplorationConfig, ExploreError};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpnsoundStatus {
    /// The call succeeded.
    Ok = 0,
    /// A pointer argument was null or otherwise unusable.
    InvalidArgument = 1,
    /// The input text is not a valid model.
    ParseError = 2,
    /// State-space exploration exceeded a configured bound.
    BoundExceeded = 3,
    /// An internal invariant failed; the library state is unspecified.
    Internal = 4,
}

/// Opaque handle to a loaded model.
pub struct DpnsoundModel {
    net: Dpn,
    decisions: DecisionSet,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn leak_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap().into_raw()
}

/// Returns the message of the most recent failure on this thread.
///
/// The pointer stays valid until the next failing call on the same thread;
/// it must not be freed.
#[no_mangle]
pub extern "C" fn dpnsound_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Returns the library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn dpnsound_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses a model from JSON text.
///
/// `strict` rejects unknown fields. On success `*out` owns the handle and
/// must be released with [`dpnsound_model_free`].
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dpnsound_model_load_json(
    text: *const c_char,
    strict: bool,
    out: *mut *mut DpnsoundModel,
) -> DpnsoundStatus {
    if text.is_null() || out.is_null() {
        set_error("null pointer argument");
        return DpnsoundStatus::InvalidArgument;
    }
    let text = match CStr::from_ptr(text).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("model text is not valid UTF-8");
            return DpnsoundStatus::InvalidArgument;
        }
    };
    match catch_unwind(|| load_model_str(text, strict)) {
        Ok(Ok((net, decisions))) => {
            *out = Box::into_raw(Box::new(DpnsoundModel { net, decisions }));
            DpnsoundStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            DpnsoundStatus::ParseError
        }
        Err(_) => {
            set_error("internal panic while parsing");
            DpnsoundStatus::Internal
        }
    }
}

/// Releases a model handle; a null handle is ignored.
///
/// # Safety
/// `model` must come from [`dpnsound_model_load_json`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dpnsound_model_free(model: *mut DpnsoundModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Analyzes a model and writes the full JSON report to `*out_report`.
///
/// `max_tokens_per_place` and `max_states` bound the exploration; pass 0 for
/// the defaults. The returned string must be released with
/// [`dpnsound_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out_report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dpnsound_check(
    model: *const DpnsoundModel,
    max_tokens_per_place: u32,
    max_states: usize,
    out_report: *mut *mut c_char,
) -> DpnsoundStatus {
    if model.is_null() || out_report.is_null() {
        set_error("null pointer argument");
        return DpnsoundStatus::InvalidArgument;
    }
    let model = &*model;
    let defaults = ExplorationConfig::default();
    let cfg = ExplorationConfig {
        max_tokens_per_place: if max_tokens_per_place == 0 {
            defaults.max_tokens_per_place
        } else {
            max_tokens_per_place
        },
        max_nodes: if max_states == 0 { defaults.max_nodes } else { max_states },
    };
    let result = catch_unwind(AssertUnwindSafe(|| {
        let m = build_representatives(&model.net);
        let cpn = translate(&model.net, &m);
        let g = explore(&cpn, &cfg)?;
        let report = analyze(&cpn, &g, &model.decisions);
        Ok::<String, ExploreError>(to_json(&build_document(&report, &cpn, &m)))
    }));
    match result {
        Ok(Ok(json)) => {
            *out_report = leak_string(json);
            DpnsoundStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            DpnsoundStatus::BoundExceeded
        }
        Err(_) => {
            set_error("internal panic during analysis");
            DpnsoundStatus::Internal
        }
    }
}

/// Writes 1 to `*out` when the model is data-aware sound, otherwise 0.
///
/// Bounds behave as in [`dpnsound_check`].
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dpnsound_is_data_aware_sound(
    model: *const DpnsoundModel,
    max_tokens_per_place: u32,
    max_states: usize,
    out: *mut u8,
) -> DpnsoundStatus {
    if model.is_null() || out.is_null() {
        set_error("null pointer argument");
        return DpnsoundStatus::InvalidArgument;
    }
    let model = &*model;
    let defaults = ExplorationConfig::default();
    let cfg = ExplorationConfig {
        max_tokens_per_place: if max_tokens_per_place == 0 {
            defaults.max_tokens_per_place
        } else {
            max_tokens_per_place
        },
        max_nodes: if max_states == 0 { defaults.max_nodes } else { max_states },
    };
    let result = catch_unwind(AssertUnwindSafe(|| {
        let m = build_representatives(&model.net);
        let cpn = translate(&model.net, &m);
        let g = explore(&cpn, &cfg)?;
        Ok::<bool, ExploreError>(analyze(&cpn, &g, &model.decisions).data_aware_sound())
    }));
    match result {
        Ok(Ok(sound)) => {
            *out = sound as u8;
            DpnsoundStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            DpnsoundStatus::BoundExceeded
        }
        Err(_) => {
            set_error("internal panic during analysis");
            DpnsoundStatus::Internal
        }
    }
}

/// Releases a string returned by this library; a null pointer is ignored.
///
/// # Safety
/// `s` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dpnsound_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    const SOUND: &str = r#"{
        "schema": 1,
        "places": ["p0", "p1"],
        "transitions": [{"id": "t0", "guard": "defined(x')"}],
        "arcs": [["p0", "t0"], ["t0", "p1"]],
        "variables": [{"name": "x", "type": "int", "initial": null}],
        "initial_marking": {"p0": 1},
        "final_marking": {"p1": 1}
    }"#;

    fn load(text: &str, strict: bool) -> (DpnsoundStatus, *mut DpnsoundModel) {
        let c = CString::new(text).unwrap();
        let mut handle: *mut DpnsoundModel = ptr::null_mut();
        let status = unsafe { dpnsound_model_load_json(c.as_ptr(), strict, &mut handle) };
        (status, handle)
    }

    fn last_error() -> String {
        unsafe { CStr::from_ptr(dpnsound_last_error()) }.to_str().unwrap().to_string()
    }

    #[test]
    fn load_check_free_round_trip() {
        let (status, handle) = load(SOUND, true);
        assert_eq!(status, DpnsoundStatus::Ok);
        let mut report: *mut c_char = ptr::null_mut();
        let status = unsafe { dpnsound_check(handle, 0, 0, &mut report) };
        assert_eq!(status, DpnsoundStatus::Ok);
        let json = unsafe { CStr::from_ptr(report) }.to_str().unwrap().to_string();
        assert!(json.contains("\"data_aware_sound\":true") || json.contains("\"data_aware_sound\": true"), "{json}");
        unsafe {
            dpnsound_string_free(report);
            dpnsound_model_free(handle);
        }
    }

    #[test]
    fn convenience_verdict_matches() {
        let (status, handle) = load(SOUND, true);
        assert_eq!(status, DpnsoundStatus::Ok);
        let mut sound: u8 = 7;
        let status = unsafe { dpnsound_is_data_aware_sound(handle, 0, 0, &mut sound) };
        assert_eq!(status, DpnsoundStatus::Ok);
        assert_eq!(sound, 1);
        unsafe { dpnsound_model_free(handle) };
    }

    #[test]
    fn parse_error_sets_message() {
        let (status, handle) = load("{\"schema\": 99}", true);
        assert_eq!(status, DpnsoundStatus::ParseError);
        assert!(handle.is_null());
        assert!(!last_error().is_empty());
    }

    #[test]
    fn null_arguments_are_rejected() {
        let status =
            unsafe { dpnsound_model_load_json(ptr::null(), true, ptr::null_mut()) };
        assert_eq!(status, DpnsoundStatus::InvalidArgument);
        let mut out: *mut c_char = ptr::null_mut();
        let status = unsafe { dpnsound_check(ptr::null(), 0, 0, &mut out) };
        assert_eq!(status, DpnsoundStatus::InvalidArgument);
        unsafe {
            dpnsound_model_free(ptr::null_mut());
            dpnsound_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn bound_exhaustion_is_reported() {
        let unbounded = r#"{
            "schema": 1,
            "places": ["p0", "p1"],
            "transitions": [
                {"id": "t0"},
                {"id": "grow"}
            ],
            "arcs": [
                ["p0", "t0"], ["t0", "p1"],
                ["p0", "grow"], ["grow", "p0"], ["grow", "p1"]
            ],
            "variables": [],
            "initial_marking": {"p0": 1},
            "final_marking": {"p1": 1}
        }"#;
        let (status, handle) = load(unbounded, true);
        assert_eq!(status, DpnsoundStatus::Ok);
        let mut report: *mut c_char = ptr::null_mut();
        let status = unsafe { dpnsound_check(handle, 2, 0, &mut report) };
        assert_eq!(status, DpnsoundStatus::BoundExceeded);
        assert!(!last_error().is_empty());
        unsafe { dpnsound_model_free(handle) };
    }

    #[test]
    fn version_is_a_static_string() {
        let v = unsafe { CStr::from_ptr(dpnsound_version()) }.to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn generated_header_exports_the_api() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("include")
            .join("dpnsound.h");
        let text = std::fs::read_to_string(&header).expect("header generated at build time");
        for name in [
            "dpnsound_model_load_json",
            "dpnsound_model_free",
            "dpnsound_check",
            "dpnsound_is_data_aware_sound",
            "dpnsound_string_free",
            "dpnsound_last_error",
            "dpnsound_version",
            "DpnsoundStatus",
        ] {
            assert!(text.contains(name), "header misses `{name}`");
        }
    }
}
