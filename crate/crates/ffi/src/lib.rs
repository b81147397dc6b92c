//! C ABI for the coverage engines.
//!
//! Scenarios are opaque handles created by [`udn_scenario_new`] and released
//! by [`udn_scenario_free`]. Every fallible call returns a [`UdnStatus`]; on
//! failure [`udn_last_error`] returns a message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use udn_coverage::montecarlo::estimate_coverage;
use udn_coverage::{
    Analytic, AssociationPolicy, CoverageResult, Error, FadingModel, LosModel, NetworkConfig, PathLossModel,
    Scenario, SimSpec,
};

pub const UDN_ASSOCIATION_CLOSEST: u32 = 0;
pub const UDN_ASSOCIATION_STRONGEST: u32 = 1;

pub const UDN_LOS_NONE: u32 = 0;
/// `los_a` is the constant probability.
pub const UDN_LOS_CONSTANT: u32 = 1;
/// `los_a`, `los_b` are the UMi distances `d1`, `d2`.
pub const UDN_LOS_UMI: u32 = 2;
/// `los_a` is the step distance `D`.
pub const UDN_LOS_STEP: u32 = 3;

/// General LOS/NLOS coverage.
pub const UDN_METHOD_EXACT: u32 = 0;
/// Coverage with every link NLOS.
pub const UDN_METHOD_NLOS: u32 = 1;
/// Step-model coverage (step LOS only).
pub const UDN_METHOD_STEP: u32 = 2;
/// Derivative-free upper bound (step LOS only).
pub const UDN_METHOD_UPPER_BOUND: u32 = 3;
pub const UDN_METHOD_LOW_DENSITY_LIMIT: u32 = 4;

pub const UDN_FLAG_EXCEEDS_ONE: u32 = 1;
pub const UDN_FLAG_UPPER_BOUND_UNCLAMPED: u32 = 2;
pub const UDN_FLAG_CANCELLATION_LOSS: u32 = 4;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UdnStatus {
    Ok = 0,
    InvalidParameter = 1,
    NonConvergence = 2,
    DivergentTail = 3,
    OrderTooHigh = 4,
    EmptyRealization = 5,
    Unsupported = 6,
    NullPointer = 7,
    Panic = 8,
}

/// Opaque scenario handle.
pub struct UdnScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> UdnStatus {
    match e {
        Error::InvalidParameter(_) => UdnStatus::InvalidParameter,
        Error::NonConvergence { .. } => UdnStatus::NonConvergence,
        Error::DivergentTail { .. } => UdnStatus::DivergentTail,
        Error::OrderTooHigh { .. } => UdnStatus::OrderTooHigh,
        Error::EmptyRealization => UdnStatus::EmptyRealization,
        Error::Unsupported(_) => UdnStatus::Unsupported,
    }
}

enum Failure {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> UdnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UdnStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            UdnStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            UdnStatus::Panic
        }
    }
}

fn invalid(msg: String) -> Failure {
    Failure::Core(Error::InvalidParameter(msg))
}

unsafe fn read_slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn handle<'a>(s: *const UdnScenario) -> Result<&'a Scenario, Failure> {
    s.as_ref().map(|h| &h.inner).ok_or(Failure::Null("scenario"))
}

fn write<T>(p: *mut T, v: T) {
    if !p.is_null() {
        unsafe { p.write(v) };
    }
}

/// Creates a scenario. `theta_db` is the threshold in dB, `sigma2` the noise
/// power (0 for SIR); `m` is the Nakagami shape of LOS links (1 = Rayleigh).
/// `transitions` holds `n_exponents − 1` increasing distances.
///
/// # Safety
/// `exponents` and `transitions` must point to the stated number of
/// doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn udn_scenario_new(
    lambda: f64,
    sigma2: f64,
    association: u32,
    theta_db: f64,
    exponents: *const f64,
    n_exponents: usize,
    transitions: *const f64,
    n_transitions: usize,
    los_kind: u32,
    los_a: f64,
    los_b: f64,
    m: u32,
    out: *mut *mut UdnScenario,
) -> UdnStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        let association = match association {
            UDN_ASSOCIATION_CLOSEST => AssociationPolicy::Closest,
            UDN_ASSOCIATION_STRONGEST => AssociationPolicy::Strongest,
            other => return Err(invalid(format!("unknown association {other}"))),
        };
        let los = match los_kind {
            UDN_LOS_NONE => LosModel::None,
            UDN_LOS_CONSTANT => LosModel::Constant(los_a),
            UDN_LOS_UMI => LosModel::Umi { d1: los_a, d2: los_b },
            UDN_LOS_STEP => LosModel::Step(los_a),
            other => return Err(invalid(format!("unknown LOS kind {other}"))),
        };
        let exps = read_slice(exponents, n_exponents, "exponents")?.to_vec();
        let trans = read_slice(transitions, n_transitions, "transitions")?.to_vec();
        let net = NetworkConfig::new(lambda, sigma2, association, udn_coverage::model::db_to_linear(theta_db))?;
        let pl = PathLossModel::multi(exps, trans)?;
        let scn = Scenario::new(net, pl, los, FadingModel::nakagami(m)?)?;
        *out = Box::into_raw(Box::new(UdnScenario { inner: scn }));
        Ok(())
    })
}

/// Releases a scenario; null is ignored.
///
/// # Safety
/// `scenario` must come from [`udn_scenario_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn udn_scenario_free(scenario: *mut UdnScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Interference Laplace transform at `s` for serving distance `r`.
/// `los != 0` uses the LOS/NLOS interferer mix, otherwise all-NLOS.
///
/// # Safety
/// `scenario` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn udn_laplace(
    scenario: *const UdnScenario,
    los: i32,
    s: f64,
    r: f64,
    out: *mut f64,
) -> UdnStatus {
    guard(|| {
        let scn = handle(scenario)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let a = Analytic::default();
        let v = if los != 0 { a.laplace_los(scn, s, r)? } else { a.laplace_nlos(scn, s, r)? };
        *out = v.value;
        Ok(())
    })
}

fn flag_bits(res: &CoverageResult) -> u32 {
    let mut bits = 0;
    if res.flags.exceeds_one {
        bits |= UDN_FLAG_EXCEEDS_ONE;
    }
    if res.flags.upper_bound_unclamped {
        bits |= UDN_FLAG_UPPER_BOUND_UNCLAMPED;
    }
    if res.flags.cancellation_loss {
        bits |= UDN_FLAG_CANCELLATION_LOSS;
    }
    bits
}

/// Analytic coverage by `method` (one of `UDN_METHOD_*`). `err` and `flags`
/// may be null.
///
/// # Safety
/// `scenario` must be a live handle; `pcov` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn udn_coverage(
    scenario: *const UdnScenario,
    method: u32,
    include_noise: i32,
    pcov: *mut f64,
    err: *mut f64,
    flags: *mut u32,
) -> UdnStatus {
    guard(|| {
        let scn = handle(scenario)?;
        if pcov.is_null() {
            return Err(Failure::Null("pcov"));
        }
        let a = Analytic::default().with_noise(include_noise != 0);
        let res = match method {
            UDN_METHOD_EXACT => a.coverage(scn)?,
            UDN_METHOD_NLOS => a.coverage_nlos(scn)?,
            UDN_METHOD_STEP => a.coverage_step_simplified(scn)?,
            UDN_METHOD_UPPER_BOUND => a.coverage_upper_bound(scn)?,
            UDN_METHOD_LOW_DENSITY_LIMIT => a.coverage_low_density_limit(scn)?,
            other => return Err(invalid(format!("unknown method {other}"))),
        };
        *pcov = res.pcov;
        write(err, res.quad_error);
        write(flags, flag_bits(&res));
        Ok(())
    })
}

/// Monte Carlo coverage estimate with the automatic window. `stderr_out`
/// may be null.
///
/// # Safety
/// `scenario` must be a live handle; `pcov` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn udn_montecarlo(
    scenario: *const UdnScenario,
    n_realizations: u64,
    seed: u64,
    pcov: *mut f64,
    stderr_out: *mut f64,
) -> UdnStatus {
    guard(|| {
        let scn = handle(scenario)?;
        if pcov.is_null() {
            return Err(Failure::Null("pcov"));
        }
        let est = estimate_coverage(&SimSpec::new(scn.clone(), n_realizations, seed)?)?;
        *pcov = est.pcov_hat;
        write(stderr_out, est.stderr);
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn udn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
