//! C ABI over `sgd_rates`.
//!
//! Every function returns an [`SgdStatus`] and writes results through out
//! pointers. Objects are opaque handles released with the matching `*_free`.
//! On failure, [`sgd_last_error_message`] describes the most recent error on
//! the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sgd_rates::bounds::{bound_for, BoundConstants, BoundSource, BoundTriple};
use sgd_rates::domain::{FeasibleSet, Vector};
use sgd_rates::error::Error;
use sgd_rates::optimizers::{run, RunOptions, RunRecord};
use sgd_rates::problems::{make_problem, ProblemSpec};
use sgd_rates::schedules::{averaged_variance, log_tilde, ScheduleConfig, ScheduleKind};
use sgd_rates::verify::{build_sequences, check_conditions, terminal_check, RecursionState, Sequence};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    DimensionMismatch = 3,
    Infeasible = 4,
    Precondition = 5,
    Unsupported = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgdScheduleKind {
    Thm1 = 0,
    PropOriginal = 1,
    PropInterior = 2,
    Thm2 = 3,
    /// `param` is the exponent `r >= 0`
    GeneralizedR = 4,
    /// `param` is the rate `alpha` in (0, 1)
    Exponential = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdSchedule {
    pub kind: SgdScheduleKind,
    pub param: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgdBoundSource {
    Thm1 = 0,
    PropOriginal = 1,
    PropInterior = 2,
    Thm2 = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgdSequence {
    PBar = 0,
    RBar = 1,
    PTildeSq = 2,
    RTildeSq = 3,
    RHat = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdBoundTriple {
    pub k_bar: f64,
    pub k_tilde: f64,
    pub k_hat: f64,
}

/// `failures[0]` counts the terminal check, `failures[i]` condition `i`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SgdCheckSummary {
    pub failures: [usize; 8],
    pub checks: usize,
}

/// Opaque problem handle.
pub struct SgdProblem(ProblemSpec);

/// Opaque run result.
pub struct SgdRunRecord(RunRecord);

/// Opaque recursion sequences.
pub struct SgdRecursion(RecursionState);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SgdStatus {
    match e {
        Error::DimensionMismatch { .. } => SgdStatus::DimensionMismatch,
        Error::InvalidParameter(_) => SgdStatus::InvalidParameter,
        Error::Infeasible(_) => SgdStatus::Infeasible,
        Error::Precondition(_) => SgdStatus::Precondition,
        Error::Unsupported(_) => SgdStatus::Unsupported,
    }
}

struct Fail(SgdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SgdStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SgdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgdStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SgdStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return if len == 0 { Ok(&[]) } else { Err(null(what)) };
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Fail> {
    if len < src.len() {
        return Err(Fail(SgdStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", src.len())));
    }
    if buf.is_null() {
        return Err(null("output buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn schedule_kind(s: SgdSchedule) -> ScheduleKind {
    match s.kind {
        SgdScheduleKind::Thm1 => ScheduleKind::Thm1,
        SgdScheduleKind::PropOriginal => ScheduleKind::PropOriginal,
        SgdScheduleKind::PropInterior => ScheduleKind::PropInterior,
        SgdScheduleKind::Thm2 => ScheduleKind::Thm2,
        SgdScheduleKind::GeneralizedR => ScheduleKind::GeneralizedR { r: s.param },
        SgdScheduleKind::Exponential => ScheduleKind::Exponential { alpha: s.param },
    }
}

fn bound_source(s: SgdBoundSource) -> BoundSource {
    match s {
        SgdBoundSource::Thm1 => BoundSource::Thm1,
        SgdBoundSource::PropOriginal => BoundSource::PropOriginal,
        SgdBoundSource::PropInterior => BoundSource::PropInterior,
        SgdBoundSource::Thm2 => BoundSource::Thm2,
    }
}

fn sequence(s: SgdSequence) -> Sequence {
    match s {
        SgdSequence::PBar => Sequence::PBar,
        SgdSequence::RBar => Sequence::RBar,
        SgdSequence::PTildeSq => Sequence::PTildeSq,
        SgdSequence::RTildeSq => Sequence::RTildeSq,
        SgdSequence::RHat => Sequence::RHat,
    }
}

fn triple(t: &SgdBoundTriple) -> BoundTriple {
    // the source only labels the triple
    BoundTriple { k_bar: t.k_bar, k_tilde: t.k_tilde, k_hat: t.k_hat, source: BoundSource::Thm1 }
}

/// Message for the last failed call on this thread, or NULL. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn sgd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Quadratic over a ball; `center` may be NULL for the origin.
///
/// # Safety
/// `center` must point to `d` doubles or be NULL; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgd_problem_new_ball(
    d: usize,
    mu: f64,
    l: f64,
    q: f64,
    rotation_seed: u64,
    interior: bool,
    center: *const f64,
    radius: f64,
    out: *mut *mut SgdProblem,
) -> SgdStatus {
    guard(|| {
        let c = if center.is_null() { Vector::zeros(d) } else { Vector::from_column_slice(slice(center, d, "center")?) };
        let spec = make_problem(d, mu, l, rotation_seed, FeasibleSet::ball(c, radius)?, q, interior)?;
        write(out, Box::into_raw(Box::new(SgdProblem(spec))), "out")
    })
}

/// Quadratic over the box `[lower, upper]`.
///
/// # Safety
/// `lower` and `upper` must point to `d` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgd_problem_new_box(
    d: usize,
    mu: f64,
    l: f64,
    q: f64,
    rotation_seed: u64,
    interior: bool,
    lower: *const f64,
    upper: *const f64,
    out: *mut *mut SgdProblem,
) -> SgdStatus {
    guard(|| {
        let lo = Vector::from_column_slice(slice(lower, d, "lower")?);
        let hi = Vector::from_column_slice(slice(upper, d, "upper")?);
        let spec = make_problem(d, mu, l, rotation_seed, FeasibleSet::boxed(lo, hi)?, q, interior)?;
        write(out, Box::into_raw(Box::new(SgdProblem(spec))), "out")
    })
}

/// # Safety
/// `p` must come from a `sgd_problem_new_*` call and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sgd_problem_free(p: *mut SgdProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgd_problem_dim(p: *const SgdProblem, out: *mut usize) -> SgdStatus {
    guard(|| write(out, handle(p, "problem")?.0.dim(), "out"))
}

/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgd_problem_kappa(p: *const SgdProblem, out: *mut f64) -> SgdStatus {
    guard(|| write(out, handle(p, "problem")?.0.kappa(), "out"))
}

/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgd_problem_diameter(p: *const SgdProblem, out: *mut f64) -> SgdStatus {
    guard(|| write(out, handle(p, "problem")?.0.diameter(), "out"))
}

/// Optimality gap `f(x) - f(x*)`.
///
/// # Safety
/// `x` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgd_problem_eval_f(p: *const SgdProblem, x: *const f64, len: usize, out: *mut f64) -> SgdStatus {
    guard(|| {
        let spec = &handle(p, "problem")?.0;
        if len != spec.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim(), got: len }.into());
        }
        let x = Vector::from_column_slice(slice(x, len, "x")?);
        write(out, spec.eval_f(&x), "out")
    })
}

/// # Safety
/// `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sgd_problem_default_start(p: *const SgdProblem, buf: *mut f64, len: usize) -> SgdStatus {
    guard(|| copy_out(handle(p, "problem")?.0.default_start().as_slice(), buf, len))
}

/// One seeded run. `x0` may be NULL for the problem's default start.
///
/// # Safety
/// `p` must be a live handle, `x0` NULL or `dim` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sgd_run(
    p: *const SgdProblem,
    schedule: SgdSchedule,
    t_max: usize,
    x0: *const f64,
    seed: u64,
    assert_lemma: bool,
    out: *mut *mut SgdRunRecord,
) -> SgdStatus {
    guard(|| {
        let spec = &handle(p, "problem")?.0;
        let cfg = ScheduleConfig::new(schedule_kind(schedule), spec.mu(), spec.kappa())?;
        let x0 = if x0.is_null() {
            spec.default_start()
        } else {
            Vector::from_column_slice(slice(x0, spec.dim(), "x0")?)
        };
        let rec = run(spec, &cfg, t_max, &x0, seed, RunOptions { assert_lemma, keep_trace: false })?;
        write(out, Box::into_raw(Box::new(SgdRunRecord(rec))), "out")
    })
}

/// # Safety
/// `r` must come from `sgd_run`. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sgd_run_free(r: *mut SgdRunRecord) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `r` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sgd_run_final_gap(r: *const SgdRunRecord, out: *mut f64) -> SgdStatus {
    guard(|| write(out, handle(r, "run record")?.0.final_gap, "out"))
}

/// # Safety
/// `r` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sgd_run_lemma_violations(r: *const SgdRunRecord, out: *mut usize) -> SgdStatus {
    guard(|| write(out, handle(r, "run record")?.0.lemma_violations, "out"))
}

/// Gap after each of the `T` iterations; `len` must be at least `T`.
///
/// # Safety
/// `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sgd_run_gaps(r: *const SgdRunRecord, buf: *mut f64, len: usize) -> SgdStatus {
    guard(|| copy_out(&handle(r, "run record")?.0.gaps, buf, len))
}

/// Returned point (average or last iterate); `len` must be at least the dimension.
///
/// # Safety
/// `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sgd_run_output(r: *const SgdRunRecord, buf: *mut f64, len: usize) -> SgdStatus {
    guard(|| copy_out(handle(r, "run record")?.0.output.as_slice(), buf, len))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgd_bound(
    source: SgdBoundSource,
    d: f64,
    l: f64,
    q: f64,
    kappa: f64,
    t_max: usize,
    out: *mut SgdBoundTriple,
) -> SgdStatus {
    guard(|| {
        let b = bound_for(bound_source(source), &BoundConstants { d, l, q, kappa }, t_max)?;
        write(out, SgdBoundTriple { k_bar: b.k_bar, k_tilde: b.k_tilde, k_hat: b.k_hat }, "out")
    })
}

/// `k_bar + sqrt(2 theta) k_tilde + theta k_hat`.
///
/// # Safety
/// `t` must point to a triple; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sgd_bound_quantile(t: *const SgdBoundTriple, theta: f64, out: *mut f64) -> SgdStatus {
    guard(|| write(out, triple(handle(t, "triple")?).quantile(theta)?, "out"))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgd_recursion_new(
    source: SgdBoundSource,
    t_max: usize,
    mu: f64,
    l: f64,
    q: f64,
    d: f64,
    out: *mut *mut SgdRecursion,
) -> SgdStatus {
    guard(|| {
        let state = build_sequences(bound_source(source), t_max, mu, l, q, d)?;
        write(out, Box::into_raw(Box::new(SgdRecursion(state))), "out")
    })
}

/// # Safety
/// `r` must come from `sgd_recursion_new`. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sgd_recursion_free(r: *mut SgdRecursion) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Scale one sequence in place.
///
/// # Safety
/// `r` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sgd_recursion_corrupt(r: *mut SgdRecursion, which: SgdSequence, factor: f64) -> SgdStatus {
    guard(|| {
        let state = &mut r.as_mut().ok_or_else(|| null("recursion"))?.0;
        state.corrupt(sequence(which), factor);
        Ok(())
    })
}

/// Run all inequality checks; failures are reported in `out`, not as an error status.
///
/// # Safety
/// `r` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sgd_recursion_check(r: *const SgdRecursion, out: *mut SgdCheckSummary) -> SgdStatus {
    guard(|| {
        let state = &handle(r, "recursion")?.0;
        let verdicts = check_conditions(state);
        let mut s = SgdCheckSummary { checks: verdicts.len() + 1, ..Default::default() };
        for v in &verdicts {
            s.failures[v.condition_id as usize] += (!v.pass) as usize;
        }
        s.failures[0] = (!terminal_check(state).pass) as usize;
        write(out, s, "out")
    })
}

/// `sum_{s=t+1}^{T} 1/s`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgd_log_tilde(t_max: usize, t: usize, out: *mut f64) -> SgdStatus {
    guard(|| write(out, log_tilde(t_max, t)?, "out"))
}

/// Sum of squared output weights of a schedule over `T` steps.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgd_averaged_variance(schedule: SgdSchedule, t_max: usize, out: *mut f64) -> SgdStatus {
    guard(|| write(out, averaged_variance(&schedule_kind(schedule), t_max)?, "out"))
}
