//! C ABI over `flexcurve`.
//!
//! Every function returns an [`FcStatus`]; results go through out-pointers.
//! Prospects and models are opaque heap handles released with
//! [`fc_prospect_free`] and [`fc_model_free`]. On failure the calling thread's
//! last error message is replaced and can be read with
//! [`fc_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use flexcurve::cli::ModelDocument;
use flexcurve::{
    certain_equivalent, compare, find_threshold, flexibility_curve, mean_variance_approximation,
    models::rollback, Classification, Error, ErrorKind, Prospect, RiskAversion, TailRelation,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcStatus {
    Ok = 0,
    Invalid = 1,
    Domain = 2,
    Range = 3,
    Unsupported = 4,
    NullPointer = 5,
    Parse = 6,
    NotFound = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcClassification {
    XStrictlyDominates = 0,
    XDominates = 1,
    YStrictlyDominates = 2,
    YDominates = 3,
    XMoreFlexible = 4,
    XStrictlyMoreFlexible = 5,
    YMoreFlexible = 6,
    YStrictlyMoreFlexible = 7,
    EquallyFlexible = 8,
    Incomparable = 9,
}

impl From<Classification> for FcClassification {
    fn from(c: Classification) -> Self {
        match c {
            Classification::XStrictlyDominates => FcClassification::XStrictlyDominates,
            Classification::XDominates => FcClassification::XDominates,
            Classification::YStrictlyDominates => FcClassification::YStrictlyDominates,
            Classification::YDominates => FcClassification::YDominates,
            Classification::XMoreFlexible => FcClassification::XMoreFlexible,
            Classification::XStrictlyMoreFlexible => FcClassification::XStrictlyMoreFlexible,
            Classification::YMoreFlexible => FcClassification::YMoreFlexible,
            Classification::YStrictlyMoreFlexible => FcClassification::YStrictlyMoreFlexible,
            Classification::EquallyFlexible => FcClassification::EquallyFlexible,
            Classification::Incomparable => FcClassification::Incomparable,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcTailRelation {
    None = 0,
    XAbove = 1,
    YAbove = 2,
    Equal = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FcStats {
    pub mean: f64,
    pub variance: f64,
    pub worst_case: f64,
}

/// Summary of a flexibility comparison.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcVerdict {
    pub classification: FcClassification,
    /// NaN when there is no threshold.
    pub threshold_k: f64,
    pub tail_relation: FcTailRelation,
    /// NaN when `tail_relation` is `FC_TAIL_RELATION_NONE`.
    pub certified_from: f64,
    /// Total crossings found, which may exceed the caller's buffer.
    pub n_crossings: usize,
}

/// Opaque prospect handle.
pub struct FcProspect(Prospect);

/// Opaque parsed model document.
pub struct FcModel(ModelDocument);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(FcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            ErrorKind::Invalid => FcStatus::Invalid,
            ErrorKind::Domain => FcStatus::Domain,
            ErrorKind::Range => FcStatus::Range,
            ErrorKind::Unsupported => FcStatus::Unsupported,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult = Result<(), Failure>;

fn null(what: &str) -> Failure {
    Failure(FcStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> FfiResult) -> FcStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(Failure(FcStatus::Panic, format!("internal panic: {msg}")))
    });
    match outcome {
        Ok(()) => FcStatus::Ok,
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn prospect_ref<'a>(p: *const FcProspect, what: &str) -> Result<&'a Prospect, Failure> {
    p.as_ref().map(|p| &p.0).ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, what: &str, value: T) -> FfiResult {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn emit_prospect(out: *mut *mut FcProspect, p: Prospect) -> FfiResult {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(Box::into_raw(Box::new(FcProspect(p))));
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(FcStatus::Invalid, format!("`{what}` is not UTF-8")))
}

fn aversion(r: f64) -> Result<RiskAversion, Failure> {
    Ok(RiskAversion::new(r)?)
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `cap`). Returns the full message length
/// excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fc_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            buf.add(n).write(0);
        }
        msg.len()
    })
}

/// Discrete prospect from `len` (value, mass) pairs.
///
/// # Safety
/// `values` and `masses` must point to `len` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn fc_prospect_discrete(
    values: *const f64,
    masses: *const f64,
    len: usize,
    out: *mut *mut FcProspect,
) -> FcStatus {
    guard(|| {
        let v = slice(values, len, "values")?;
        let m = slice(masses, len, "masses")?;
        emit_prospect(
            out,
            Prospect::discrete(v.iter().copied().zip(m.iter().copied()))?,
        )
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_prospect_gaussian(
    mean: f64,
    variance: f64,
    out: *mut *mut FcProspect,
) -> FcStatus {
    guard(|| emit_prospect(out, Prospect::gaussian(mean, variance)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_prospect_deterministic(
    value: f64,
    out: *mut *mut FcProspect,
) -> FcStatus {
    guard(|| emit_prospect(out, Prospect::deterministic(value)?))
}

/// New handle for `k·X` with `k > 0`.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_prospect_scale(
    p: *const FcProspect,
    k: f64,
    out: *mut *mut FcProspect,
) -> FcStatus {
    guard(|| emit_prospect(out, prospect_ref(p, "p")?.scale(k)?))
}

/// New handle for `X + c`.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_prospect_shift(
    p: *const FcProspect,
    c: f64,
    out: *mut *mut FcProspect,
) -> FcStatus {
    guard(|| emit_prospect(out, prospect_ref(p, "p")?.shift(c)?))
}

/// New handle for the sum of independent `a` and `b`.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_prospect_add_independent(
    a: *const FcProspect,
    b: *const FcProspect,
    out: *mut *mut FcProspect,
) -> FcStatus {
    guard(|| {
        let sum = prospect_ref(a, "a")?.add_independent(prospect_ref(b, "b")?);
        emit_prospect(out, sum)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fc_prospect_free(p: *mut FcProspect) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_prospect_stats(p: *const FcProspect, out: *mut FcStats) -> FcStatus {
    guard(|| {
        let s = prospect_ref(p, "p")?.stats();
        write(
            out,
            "out",
            FcStats {
                mean: s.mean,
                variance: s.variance,
                worst_case: s.worst_case,
            },
        )
    })
}

/// `ln E[e^{tX}]`.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_prospect_log_mgf(
    p: *const FcProspect,
    t: f64,
    out: *mut f64,
) -> FcStatus {
    guard(|| write(out, "out", prospect_ref(p, "p")?.log_mgf(t)?))
}

/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_certain_equivalent(
    p: *const FcProspect,
    r: f64,
    out: *mut f64,
) -> FcStatus {
    guard(|| {
        write(
            out,
            "out",
            certain_equivalent(prospect_ref(p, "p")?, aversion(r)?)?,
        )
    })
}

/// `E[X] - r·Var[X]/2`.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_mean_variance(p: *const FcProspect, r: f64, out: *mut f64) -> FcStatus {
    guard(|| {
        write(
            out,
            "out",
            mean_variance_approximation(prospect_ref(p, "p")?, aversion(r)?),
        )
    })
}

/// Writes `CE(X|k_i·r)` into `out_ce[i]` for each of the `n` ascending `ks`.
///
/// # Safety
/// `p` must be a live handle; `ks` and `out_ce` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn fc_flexibility_curve(
    p: *const FcProspect,
    r: f64,
    ks: *const f64,
    n: usize,
    out_ce: *mut f64,
) -> FcStatus {
    guard(|| {
        let x = prospect_ref(p, "p")?;
        let ks = slice(ks, n, "ks")?;
        if out_ce.is_null() {
            return Err(null("out_ce"));
        }
        let curve = flexibility_curve("p", x, aversion(r)?, ks)?;
        for (i, ce) in curve.values().enumerate() {
            out_ce.add(i).write(ce);
        }
        Ok(())
    })
}

/// Smallest `K ≥ 1` beyond which `CE(X|k·r) ≥ CE(Y|k·r)`. `*found` is false
/// when `X` ends up below `Y`, and `*out_k` is then NaN.
///
/// # Safety
/// `x`, `y` must be live handles; `out_k` and `found` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_find_threshold(
    x: *const FcProspect,
    y: *const FcProspect,
    r: f64,
    out_k: *mut f64,
    found: *mut bool,
) -> FcStatus {
    guard(|| {
        let k = find_threshold(prospect_ref(x, "x")?, prospect_ref(y, "y")?, aversion(r)?)?;
        write(out_k, "out_k", k.unwrap_or(f64::NAN))?;
        write(found, "found", k.is_some())
    })
}

/// Classifies `(X, Y)`. Up to `cap` crossing points go to `crossings`;
/// `out->n_crossings` reports how many exist.
///
/// # Safety
/// `x`, `y` must be live handles; `out` must be writable; `crossings` must be
/// null (with `cap == 0`) or hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn fc_compare(
    x: *const FcProspect,
    y: *const FcProspect,
    r: f64,
    out: *mut FcVerdict,
    crossings: *mut f64,
    cap: usize,
) -> FcStatus {
    guard(|| {
        let v = compare(prospect_ref(x, "x")?, prospect_ref(y, "y")?, aversion(r)?)?;
        if cap > 0 && crossings.is_null() {
            return Err(null("crossings"));
        }
        for (i, k) in v.crossings.iter().take(cap).enumerate() {
            crossings.add(i).write(*k);
        }
        let (tail_relation, certified_from) = match v.tail {
            None => (FcTailRelation::None, f64::NAN),
            Some(t) => (
                match t.relation {
                    TailRelation::XAbove => FcTailRelation::XAbove,
                    TailRelation::YAbove => FcTailRelation::YAbove,
                    TailRelation::Equal => FcTailRelation::Equal,
                },
                t.certified_from,
            ),
        };
        write(
            out,
            "out",
            FcVerdict {
                classification: v.classification.into(),
                threshold_k: v.threshold_k.unwrap_or(f64::NAN),
                tail_relation,
                certified_from,
                n_crossings: v.crossings.len(),
            },
        )
    })
}

/// Parses a NUL-terminated JSON model document.
///
/// # Safety
/// `json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_model_parse(json: *const c_char, out: *mut *mut FcModel) -> FcStatus {
    guard(|| {
        let text = c_str(json, "json")?;
        let doc =
            ModelDocument::parse(text).map_err(|e| Failure(FcStatus::Parse, e.to_string()))?;
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(Box::into_raw(Box::new(FcModel(doc))));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a model not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fc_model_free(m: *mut FcModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// New handle holding a copy of the model's prospect `id`.
///
/// # Safety
/// `m` must be a live model; `id` a valid C string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fc_model_prospect(
    m: *const FcModel,
    id: *const c_char,
    out: *mut *mut FcProspect,
) -> FcStatus {
    guard(|| {
        let doc = &m.as_ref().ok_or_else(|| null("m"))?.0;
        let id = c_str(id, "id")?;
        let p = doc
            .prospect(id)
            .ok_or_else(|| Failure(FcStatus::NotFound, format!("unknown prospect id `{id}`")))?;
        emit_prospect(out, p.clone())
    })
}

/// Root certain equivalent of the model's decision tree at aversion `r`.
///
/// # Safety
/// `m` must be a live model; `out_ce` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_model_rollback(
    m: *const FcModel,
    r: f64,
    out_ce: *mut f64,
) -> FcStatus {
    guard(|| {
        let doc = &m.as_ref().ok_or_else(|| null("m"))?.0;
        let tree = doc
            .tree()
            .ok_or_else(|| Failure(FcStatus::NotFound, "the model defines no tree".into()))?;
        write(out_ce, "out_ce", rollback(tree, aversion(r)?)?.ce)
    })
}
