//! C ABI over the tidewatch library.
//!
//! Every function returns a [`TwStatus`]; results come back through out
//! pointers. On failure a message for the calling thread is available from
//! [`tw_last_error`] until the next call on that thread. Handles are opaque
//! and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use tidewatch::corpus::lexicon::{read_lexicon, read_lexicon_patch};
use tidewatch::corpus::registry::{read_geo_registry, read_polygons};
use tidewatch::corpus::{Lexicon, Registry};
use tidewatch::geospatial::{credit_share, geodesic_miles, per_capita, PER_CAPITA_SCALE};
use tidewatch::sentiment::{apply_domain_customization, default_lexicon, score_text, SentimentConfig};
use tidewatch::{analytics, synthkit, LatLon};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    Io = 5,
    Domain = 6,
    Panic = 7,
}

/// Opaque sentiment lexicon.
pub struct TwLexicon(Lexicon);

/// Opaque locality registry.
pub struct TwRegistry(Registry);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl std::fmt::Display) {
    let c = CString::new(msg.to_string().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type FfiResult<T> = Result<T, (TwStatus, String)>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> TwStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TwStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TwStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err((TwStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (TwStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| (TwStatus::NullPointer, format!("`{name}` is null")))
}

fn domain(e: impl std::fmt::Display) -> (TwStatus, String) {
    (TwStatus::Domain, e.to_string())
}

fn parse(e: impl std::fmt::Display) -> (TwStatus, String) {
    (TwStatus::Parse, e.to_string())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn tw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The bundled lexicon with the bundled domain customization applied.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn tw_lexicon_default(out: *mut *mut TwLexicon) -> TwStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(TwLexicon(default_lexicon())));
        Ok(())
    })
}

/// Lexicon from CSV text (`phrase,class,weight`), optionally patched with
/// CSV text (`op,phrase,class,weight`). `patch_csv` may be null.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tw_lexicon_from_csv(
    csv: *const c_char,
    patch_csv: *const c_char,
    out: *mut *mut TwLexicon,
) -> TwStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let base = read_lexicon(str_arg(csv, "csv")?.as_bytes()).map_err(parse)?;
        let lex = if patch_csv.is_null() {
            base
        } else {
            let patch = read_lexicon_patch(str_arg(patch_csv, "patch_csv")?.as_bytes()).map_err(parse)?;
            apply_domain_customization(base, &patch)
        };
        *out = Box::into_raw(Box::new(TwLexicon(lex)));
        Ok(())
    })
}

/// # Safety
/// `lexicon` must be null or a handle from a `tw_lexicon_*` constructor that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn tw_lexicon_free(lexicon: *mut TwLexicon) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon));
    }
}

/// Sentiment score of `text` with the default constants.
///
/// # Safety
/// `lexicon` must be a live handle, `text` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tw_sentiment_score(lexicon: *const TwLexicon, text: *const c_char, out: *mut f64) -> TwStatus {
    tw_sentiment_score_ex(lexicon, text, 0.25, 0.15, out)
}

/// Sentiment score with explicit question weight and ellipsis penalty.
///
/// # Safety
/// As for [`tw_sentiment_score`].
#[no_mangle]
pub unsafe extern "C" fn tw_sentiment_score_ex(
    lexicon: *const TwLexicon,
    text: *const c_char,
    question_weight: f64,
    ellipsis_penalty: f64,
    out: *mut f64,
) -> TwStatus {
    guard(|| {
        let lex = lexicon.as_ref().ok_or((TwStatus::NullPointer, "`lexicon` is null".into()))?;
        let text = str_arg(text, "text")?;
        let out = out_arg(out, "out")?;
        if !question_weight.is_finite() || !ellipsis_penalty.is_finite() {
            return Err((TwStatus::InvalidArgument, "weights must be finite".into()));
        }
        let cfg = SentimentConfig {
            question_weight,
            ellipsis_penalty,
            ..SentimentConfig::default()
        };
        *out = score_text("", text, &lex.0, &cfg).total;
        Ok(())
    })
}

/// Great-circle distance in statute miles.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tw_geodesic_miles(lat1: f64, lon1: f64, lat2: f64, lon2: f64, out: *mut f64) -> TwStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = geodesic_miles(LatLon::new(lat1, lon1), LatLon::new(lat2, lon2))
            .map_err(|e| (TwStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Registry from CSV text; `polygons_geojson` may be null.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tw_registry_from_csv(
    csv: *const c_char,
    polygons_geojson: *const c_char,
    out: *mut *mut TwRegistry,
) -> TwStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let mut reg = read_geo_registry(str_arg(csv, "csv")?.as_bytes()).map_err(parse)?;
        if !polygons_geojson.is_null() {
            let polys = read_polygons(str_arg(polygons_geojson, "polygons_geojson")?.as_bytes()).map_err(parse)?;
            reg.attach_polygons(polys).map_err(parse)?;
        }
        *out = Box::into_raw(Box::new(TwRegistry(reg)));
        Ok(())
    })
}

/// # Safety
/// `registry` must be null or a live handle from [`tw_registry_from_csv`].
#[no_mangle]
pub unsafe extern "C" fn tw_registry_free(registry: *mut TwRegistry) {
    if !registry.is_null() {
        drop(Box::from_raw(registry));
    }
}

/// Registers a shared unit over comma-separated county ids.
///
/// # Safety
/// `registry` must be a live handle; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tw_registry_add_shared_unit(
    registry: *mut TwRegistry,
    id: *const c_char,
    name: *const c_char,
    members_csv: *const c_char,
) -> TwStatus {
    guard(|| {
        let reg = registry.as_mut().ok_or((TwStatus::NullPointer, "`registry` is null".into()))?;
        let members: Vec<String> = str_arg(members_csv, "members_csv")?
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        reg.0
            .add_shared_unit(str_arg(id, "id")?, str_arg(name, "name")?, &members)
            .map_err(|e| (TwStatus::InvalidArgument, e.to_string()))
    })
}

/// Count per 100,000 residents of `unit`.
///
/// # Safety
/// `registry` must be a live handle, `unit` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tw_per_capita(
    registry: *const TwRegistry,
    count: f64,
    unit: *const c_char,
    out: *mut f64,
) -> TwStatus {
    guard(|| {
        let reg = registry.as_ref().ok_or((TwStatus::NullPointer, "`registry` is null".into()))?;
        let out = out_arg(out, "out")?;
        *out = per_capita(count, str_arg(unit, "unit")?, &reg.0, PER_CAPITA_SCALE).map_err(domain)?;
        Ok(())
    })
}

/// Share of one tweet located at `unit` credited to `member`.
///
/// # Safety
/// `registry` must be a live handle, strings NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tw_credit_share(
    registry: *const TwRegistry,
    unit: *const c_char,
    member: *const c_char,
    out: *mut f64,
) -> TwStatus {
    guard(|| {
        let reg = registry.as_ref().ok_or((TwStatus::NullPointer, "`registry` is null".into()))?;
        let out = out_arg(out, "out")?;
        let credit = credit_share(str_arg(unit, "unit")?, &reg.0).map_err(domain)?;
        *out = credit.weight(str_arg(member, "member")?);
        Ok(())
    })
}

/// Pearson correlation of two length-`n` arrays.
///
/// # Safety
/// `x` and `y` must point to `n` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tw_pearson(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> TwStatus {
    guard(|| {
        if x.is_null() || y.is_null() {
            return Err((TwStatus::NullPointer, "`x` or `y` is null".into()));
        }
        let out = out_arg(out, "out")?;
        let xs = std::slice::from_raw_parts(x, n);
        let ys = std::slice::from_raw_parts(y, n);
        *out = analytics::pearson(xs, ys).map_err(domain)?;
        Ok(())
    })
}

/// Generates a synthetic corpus into `out_dir`. `spec_json` may be null for
/// the default spec.
///
/// # Safety
/// String arguments must be null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tw_synth_generate(spec_json: *const c_char, out_dir: *const c_char) -> TwStatus {
    guard(|| {
        let dir = str_arg(out_dir, "out_dir")?;
        let spec: synthkit::SynthSpec = if spec_json.is_null() {
            synthkit::SynthSpec::default()
        } else {
            serde_json_from(str_arg(spec_json, "spec_json")?)?
        };
        let output = synthkit::generate(&spec).map_err(|e| (TwStatus::InvalidArgument, e.to_string()))?;
        synthkit::write_output(&output, Path::new(dir)).map_err(|e| (TwStatus::Io, e.to_string()))
    })
}

fn serde_json_from(text: &str) -> FfiResult<synthkit::SynthSpec> {
    synthkit::parse_spec(text).map_err(|e| (TwStatus::Parse, e.to_string()))
}
