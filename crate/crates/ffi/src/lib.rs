//! C ABI for calparity.
//!
//! Every fallible function returns a [`CpStatus`] and writes its result
//! through an out-pointer. On failure, [`cp_last_error_message`] describes
//! the error on the calling thread. Handles returned through `*mut *mut`
//! out-pointers are owned by the caller and released with the matching
//! `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use calparity::cost::{trivial_cost, CostPair, CostSpec};
use calparity::dataset::{load_csv, GroupData};
use calparity::eo::{solve_eo, EoStatus};
use calparity::impossibility::{approximate_bound, build_matrix};
use calparity::parity::{
    apply_monte_carlo, compute_alpha, feasibility, mixture_calibration_gap, mixture_rate_point,
    plan_withholding, ApplicationMode, FeasibilityReason, InterpolationPlan,
};
use calparity::scene::build_scene;
use calparity::{Error, RatePoint};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    AlreadyTrivial = 4,
    Io = 5,
    Parse = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpFeasibilityReason {
    Ok = 0,
    CostOrderViolated = 1,
    ExceedsTrivial = 2,
}

impl From<FeasibilityReason> for CpFeasibilityReason {
    fn from(r: FeasibilityReason) -> Self {
        match r {
            FeasibilityReason::Ok => Self::Ok,
            FeasibilityReason::CostOrderViolated => Self::CostOrderViolated,
            FeasibilityReason::ExceedsTrivial => Self::ExceedsTrivial,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CpRatePoint {
    pub c_fp: f64,
    pub c_fn: f64,
}

impl From<RatePoint> for CpRatePoint {
    fn from(r: RatePoint) -> Self {
        Self { c_fp: r.c_fp, c_fn: r.c_fn }
    }
}

/// Cost `a * c_fp + b * c_fn`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CpCostSpec {
    pub a: f64,
    pub b: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CpCostPair {
    pub group1: CpCostSpec,
    pub group2: CpCostSpec,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpFeasibility {
    pub feasible: bool,
    pub g1_cost: f64,
    pub g2_cost: f64,
    pub trivial2_cost: f64,
    pub reason: CpFeasibilityReason,
}

/// Result of [`cp_plan_withholding`]. The plan fields are meaningful only
/// when `has_plan` is true.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpWithholding {
    pub feasibility: CpFeasibility,
    pub has_plan: bool,
    pub alpha: f64,
    pub trivial_output: f64,
    pub post_rates: CpRatePoint,
    pub post_cost: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CpFlipRates {
    pub q_n2p: f64,
    pub q_p2n: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CpEoSolution {
    pub group1: CpFlipRates,
    pub group2: CpFlipRates,
    pub rates1: CpRatePoint,
    pub rates2: CpRatePoint,
    pub objective: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CpBound {
    pub m: f64,
    pub d: u64,
    pub l: f64,
    pub delta_cal: f64,
    pub delta_cost: f64,
    pub rate_bound: f64,
}

/// One group of scored, labelled samples.
pub struct CpGroup(GroupData);

/// Groups loaded from a CSV file, in order of first appearance.
pub struct CpDataset(Vec<GroupData>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure {
    status: CpStatus,
    message: String,
}

impl Failure {
    fn new(status: CpStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn null(name: &str) -> Self {
        Self::new(CpStatus::NullPointer, format!("`{name}` is null"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Infeasible(_) => CpStatus::Infeasible,
            Error::AlreadyTrivial => CpStatus::AlreadyTrivial,
            Error::Io(_) => CpStatus::Io,
            Error::Csv(_) | Error::Row { .. } => CpStatus::Parse,
            _ => CpStatus::InvalidArgument,
        };
        Self::new(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> CpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CpStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(failure.message);
            failure.status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(format!("panic: {message}"));
            CpStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(ptr: *const T, name: &str) -> FfiResult<&'a T> {
    ptr.as_ref().ok_or_else(|| Failure::null(name))
}

unsafe fn write<T>(out: *mut T, name: &str, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure::null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn c_str<'a>(ptr: *const c_char, name: &str) -> FfiResult<&'a str> {
    if ptr.is_null() {
        return Err(Failure::null(name));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure::new(CpStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, name: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure::null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

fn spec(s: CpCostSpec) -> FfiResult<CostSpec> {
    Ok(CostSpec::new(s.a, s.b)?)
}

fn pair(p: CpCostPair) -> FfiResult<CostPair> {
    Ok(CostPair::new(spec(p.group1)?, spec(p.group2)?))
}

fn deterministic_plan(g: &GroupData, alpha: f64) -> FfiResult<InterpolationPlan> {
    Ok(InterpolationPlan::for_group(g, alpha, ApplicationMode::DeterministicMixture)?)
}

fn to_c_string(s: String) -> FfiResult<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(CpStatus::InvalidArgument, "string contains a NUL byte"))
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a group from parallel score and label arrays of length `len`.
///
/// # Safety
/// `id` must be a NUL-terminated string; `scores` and `labels` must point to
/// `len` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cp_group_new(
    id: *const c_char,
    scores: *const f64,
    labels: *const u8,
    len: usize,
    out: *mut *mut CpGroup,
) -> CpStatus {
    guard(|| {
        let id = c_str(id, "id")?;
        let scores = slice(scores, len, "scores")?;
        let labels = slice(labels, len, "labels")?;
        let g = GroupData::from_parts(id, scores, labels)?;
        write(out, "out", Box::into_raw(Box::new(CpGroup(g))))
    })
}

/// # Safety
/// `group` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cp_group_free(group: *mut CpGroup) {
    if !group.is_null() {
        drop(Box::from_raw(group));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `group` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cp_group_len(group: *const CpGroup) -> usize {
    group.as_ref().map_or(0, |g| g.0.len())
}

/// # Safety
/// `group` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cp_group_base_rate(group: *const CpGroup, out: *mut f64) -> CpStatus {
    guard(|| write(out, "out", deref(group, "group")?.0.base_rate()))
}

/// # Safety
/// `group` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cp_group_rate_point(group: *const CpGroup, out: *mut CpRatePoint) -> CpStatus {
    guard(|| write(out, "out", deref(group, "group")?.0.rates().into()))
}

/// Calibration gap with one bin per distinct score.
///
/// # Safety
/// `group` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cp_group_calibration_gap(group: *const CpGroup, out: *mut f64) -> CpStatus {
    guard(|| write(out, "out", deref(group, "group")?.0.calibration_gap()))
}

/// Loads a `group,score,label` CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cp_dataset_load_csv(path: *const c_char, out: *mut *mut CpDataset) -> CpStatus {
    guard(|| {
        let groups = load_csv(c_str(path, "path")?)?;
        write(out, "out", Box::into_raw(Box::new(CpDataset(groups))))
    })
}

/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cp_dataset_free(dataset: *mut CpDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of groups, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cp_dataset_len(dataset: *const CpDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.len())
}

/// Copies group `index` into a new handle owned by the caller.
///
/// # Safety
/// `dataset` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cp_dataset_group(
    dataset: *const CpDataset,
    index: usize,
    out: *mut *mut CpGroup,
) -> CpStatus {
    guard(|| {
        let ds = deref(dataset, "dataset")?;
        let g = ds.0.get(index).ok_or_else(|| {
            Failure::new(
                CpStatus::InvalidArgument,
                format!("index {index} out of range for {} groups", ds.0.len()),
            )
        })?;
        write(out, "out", Box::into_raw(Box::new(CpGroup(g.clone()))))
    })
}

/// Cost of the constant classifier that always outputs `mu`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cp_trivial_cost(mu: f64, spec_: CpCostSpec, out: *mut f64) -> CpStatus {
    guard(|| write(out, "out", trivial_cost(mu, &spec(spec_)?)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cp_feasibility(
    g1_cost: f64,
    g2_cost: f64,
    trivial2_cost: f64,
    out: *mut CpFeasibility,
) -> CpStatus {
    guard(|| {
        let v = feasibility(g1_cost, g2_cost, trivial2_cost)?;
        write(
            out,
            "out",
            CpFeasibility {
                feasible: v.feasible,
                g1_cost: v.g1_cost,
                g2_cost: v.g2_cost,
                trivial2_cost: v.trivial2_cost,
                reason: v.reason.into(),
            },
        )
    })
}

/// Interpolation weight that raises group 2's cost to `g1_cost`.
/// Returns `Infeasible` or `AlreadyTrivial` when it does not exist.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cp_compute_alpha(g1_cost: f64, g2_cost: f64, trivial2_cost: f64, out: *mut f64) -> CpStatus {
    guard(|| write(out, "out", compute_alpha(g1_cost, g2_cost, trivial2_cost)?))
}

/// Plans withholding for group 2 so that its cost matches group 1's.
/// An infeasible instance is not an error: `has_plan` is false and the
/// verdict says why.
///
/// # Safety
/// `h1` and `h2` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cp_plan_withholding(
    h1: *const CpGroup,
    spec1: CpCostSpec,
    h2: *const CpGroup,
    spec2: CpCostSpec,
    out: *mut CpWithholding,
) -> CpStatus {
    guard(|| {
        let (h1, h2) = (&deref(h1, "h1")?.0, &deref(h2, "h2")?.0);
        let o = plan_withholding(h1, &spec(spec1)?, h2, &spec(spec2)?, ApplicationMode::DeterministicMixture)?;
        let v = o.verdict;
        write(
            out,
            "out",
            CpWithholding {
                feasibility: CpFeasibility {
                    feasible: v.feasible,
                    g1_cost: v.g1_cost,
                    g2_cost: v.g2_cost,
                    trivial2_cost: v.trivial2_cost,
                    reason: v.reason.into(),
                },
                has_plan: o.plan.is_some(),
                alpha: o.plan.map_or(0.0, |p| p.alpha()),
                trivial_output: o.plan.map_or(h2.base_rate(), |p| p.trivial_output()),
                post_rates: o.post_rates.map(Into::into).unwrap_or_default(),
                post_cost: o.post_cost.unwrap_or(v.g2_cost),
            },
        )
    })
}

/// Expected rates after withholding with probability `alpha`.
///
/// # Safety
/// `group` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cp_mixture_rate_point(group: *const CpGroup, alpha: f64, out: *mut CpRatePoint) -> CpStatus {
    guard(|| {
        let g = &deref(group, "group")?.0;
        write(out, "out", mixture_rate_point(g, &deterministic_plan(g, alpha)?).into())
    })
}

/// Calibration gap of the withholding mixture.
///
/// # Safety
/// `group` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cp_mixture_calibration_gap(group: *const CpGroup, alpha: f64, out: *mut f64) -> CpStatus {
    guard(|| {
        let g = &deref(group, "group")?.0;
        write(out, "out", mixture_calibration_gap(g, &deterministic_plan(g, alpha)?))
    })
}

/// Withholds each sample independently with probability `alpha`. Writes
/// 1 (withheld) or 0 into `mask`, which must hold `cp_group_len(group)`
/// bytes. If `out` is non-null it receives the realized group.
///
/// # Safety
/// `group` must be a live handle; `mask` must point to `mask_len` writable
/// bytes; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cp_apply_monte_carlo(
    group: *const CpGroup,
    alpha: f64,
    seed: u64,
    mask: *mut u8,
    mask_len: usize,
    out: *mut *mut CpGroup,
) -> CpStatus {
    guard(|| {
        let g = &deref(group, "group")?.0;
        if mask_len < g.len() {
            return Err(Failure::new(
                CpStatus::BufferTooSmall,
                format!("mask holds {mask_len} bytes, {} needed", g.len()),
            ));
        }
        if mask.is_null() {
            return Err(Failure::null("mask"));
        }
        let plan = InterpolationPlan::for_group(g, alpha, ApplicationMode::MonteCarlo { seed })?;
        let r = apply_monte_carlo(g, &plan)?;
        let buf = std::slice::from_raw_parts_mut(mask, g.len());
        for (b, &w) in buf.iter_mut().zip(&r.withheld) {
            *b = u8::from(w);
        }
        if !out.is_null() {
            out.write(Box::into_raw(Box::new(CpGroup(r.group))));
        }
        Ok(())
    })
}

/// Equalized Odds flip probabilities minimizing the summed thresholded loss.
/// Returns `Infeasible` if no flips equalize the rates.
///
/// # Safety
/// `g1` and `g2` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cp_solve_eo(g1: *const CpGroup, g2: *const CpGroup, out: *mut CpEoSolution) -> CpStatus {
    guard(|| {
        let s = solve_eo(&deref(g1, "g1")?.0, &deref(g2, "g2")?.0);
        let (Some(plan), Some([r1, r2]), Some(objective)) = (s.plan, s.derived_rates, s.objective) else {
            return Err(Failure::new(CpStatus::Infeasible, "no flip probabilities equalize the rates"));
        };
        debug_assert_eq!(s.status, EoStatus::Optimal);
        write(
            out,
            "out",
            CpEoSolution {
                group1: CpFlipRates { q_n2p: plan.group1.q_n2p, q_p2n: plan.group1.q_p2n },
                group2: CpFlipRates { q_n2p: plan.group2.q_n2p, q_p2n: plan.group2.q_p2n },
                rates1: r1.into(),
                rates2: r2.into(),
                objective,
            },
        )
    })
}

/// Uniform rate bound implied by approximate calibration and two
/// approximately equal costs. `m` and `d` bound the magnitude and common
/// denominator of the constraint matrix entries.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cp_approximate_bound(
    mu1: f64,
    mu2: f64,
    cost: CpCostPair,
    cost_prime: CpCostPair,
    delta_cal: f64,
    delta_cost: f64,
    m: f64,
    d: u64,
    out: *mut CpBound,
) -> CpStatus {
    guard(|| {
        let matrix = build_matrix(mu1, mu2, &pair(cost)?, &pair(cost_prime)?)?;
        let b = approximate_bound(&matrix, delta_cal, delta_cost, m, d)?;
        write(
            out,
            "out",
            CpBound {
                m: b.m,
                d: b.d,
                l: b.l,
                delta_cal: b.delta_cal,
                delta_cost: b.delta_cost,
                rate_bound: b.rate_bound,
            },
        )
    })
}

/// FP/FN-plane scene for two groups as a JSON string. Release it with
/// [`cp_string_free`].
///
/// # Safety
/// `g1` and `g2` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cp_scene_json(
    g1: *const CpGroup,
    g2: *const CpGroup,
    cost: CpCostPair,
    out: *mut *mut c_char,
) -> CpStatus {
    guard(|| {
        let (g1, g2) = (deref(g1, "g1")?.0.clone(), deref(g2, "g2")?.0.clone());
        let p = pair(cost)?;
        let scene = build_scene(&[g1, g2], &[p.group1, p.group2], &[])?;
        let text = serde_json::to_string(&scene)
            .map_err(|e| Failure::new(CpStatus::InvalidArgument, e.to_string()))?;
        write(out, "out", to_c_string(text)?)
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
