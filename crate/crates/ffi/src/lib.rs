//! C ABI over `hgp-core`.
//!
//! Conventions:
//!
//! * Every fallible function returns an [`HgpStatus`]; `HGP_STATUS_OK` is 0.
//!   On failure a message is stored per thread and can be read with
//!   [`hgp_last_error_message`].
//! * Objects are opaque handles created by `*_new`/`*_load` and released
//!   with the matching `*_free`. Freeing NULL is a no-op.
//! * Strings are NUL-terminated UTF-8.
//! * Panics never cross the boundary; they are reported as
//!   `HGP_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, RwLock};

use hgp_core::bank::{BankMode, KernelBank};
use hgp_core::catc::{self, Direction, Lateral, Longitudinal, TcConfig};
use hgp_core::forecast::{self, Predictor, PredictorContext, PredictorRegistry};
use hgp_core::safety::{self, BorCase, FcwConfig, Kinematics};
use hgp_core::trajectory::VehicleState;
use hgp_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HgpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Config = 4,
    Io = 5,
    Parse = 6,
    Numerical = 7,
    BufferTooSmall = 8,
    Panic = 99,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> HgpStatus {
    match err {
        Error::InvalidArgument(_)
        | Error::TooFewSamples { .. }
        | Error::NonMonotoneTime { .. }
        | Error::InvalidRate { .. } => HgpStatus::InvalidArgument,
        Error::Config(_) | Error::EmptyBank => HgpStatus::Config,
        Error::Io { .. } => HgpStatus::Io,
        Error::Json(_) | Error::CsvRow { .. } | Error::CsvFormat { .. } | Error::InvalidGeoSample { .. } => {
            HgpStatus::Parse
        }
        Error::IllConditionedKernel { .. } | Error::BankSelection => HgpStatus::Numerical,
    }
}

struct Failure(HgpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HgpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HgpStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HgpStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller promises `p` is NULL or valid for reads.
    unsafe { p.as_ref() }.ok_or_else(|| Failure(HgpStatus::NullPointer, format!("{what} is NULL")))
}

fn non_null_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller promises `p` is NULL or valid and unaliased.
    unsafe { p.as_mut() }.ok_or_else(|| Failure(HgpStatus::NullPointer, format!("{what} is NULL")))
}

fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(HgpStatus::NullPointer, format!("{what} is NULL")));
    }
    // SAFETY: non-null and NUL-terminated by contract.
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| Failure(HgpStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// Copies the calling thread's last error message into `buf` (always
/// NUL-terminated when `len > 0`) and returns the full message length
/// without the terminator, or 0 when there is no error.
#[no_mangle]
pub unsafe extern "C" fn hgp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hgp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Vehicle state at one instant: seconds, metres (ENU), m/s, radians
/// counter-clockwise from east, m/s².
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HgpState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub heading: f64,
    pub accel: f64,
}

impl From<HgpState> for VehicleState {
    fn from(s: HgpState) -> Self {
        VehicleState { t: s.t, x: s.x, y: s.y, speed: s.speed, heading: s.heading, accel: s.accel }
    }
}

/// One forecast step.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HgpForecastPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub speed_mean: f64,
    pub speed_var: f64,
    pub heading_mean: f64,
    pub heading_var: f64,
}

impl From<&forecast::ForecastPoint> for HgpForecastPoint {
    fn from(p: &forecast::ForecastPoint) -> Self {
        Self {
            t: p.t,
            x: p.x,
            y: p.y,
            speed_mean: p.speed_mean,
            speed_var: p.speed_var,
            heading_mean: p.heading_mean,
            heading_var: p.heading_var,
        }
    }
}

/// Opaque kernel bank.
pub struct HgpBank {
    bank: KernelBank,
}

/// Loads a `.bank.json` file.
#[no_mangle]
pub unsafe extern "C" fn hgp_bank_load(path: *const c_char, out: *mut *mut HgpBank) -> HgpStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        let path = string(path, "path")?;
        let bank = KernelBank::load(path)?;
        *out = Box::into_raw(Box::new(HgpBank { bank }));
        Ok(())
    })
}

/// Number of model pairs, 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn hgp_bank_len(bank: *const HgpBank) -> usize {
    bank.as_ref().map_or(0, |b| b.bank.len())
}

#[no_mangle]
pub unsafe extern "C" fn hgp_bank_free(bank: *mut HgpBank) {
    if !bank.is_null() {
        drop(Box::from_raw(bank));
    }
}

/// Opaque single-vehicle predictor.
pub struct HgpPredictor {
    inner: Box<dyn Predictor>,
}

fn context(bank: *const HgpBank) -> PredictorContext {
    // SAFETY: NULL or a handle from `hgp_bank_load`.
    let Some(b) = (unsafe { bank.as_ref() }) else {
        return PredictorContext::default();
    };
    let handle = Some(Arc::new(RwLock::new(b.bank.clone())));
    if b.bank.mode == BankMode::Direct {
        PredictorContext { direct_bank: handle, ..Default::default() }
    } else {
        PredictorContext { bank: handle, ..Default::default() }
    }
}

/// Creates a predictor by name (`bsm`, `cs`, `ca`, `kf`, `hgp`, `hgp-d`).
/// `bank` may be NULL for predictors that do not need one; the predictor
/// works on its own copy.
#[no_mangle]
pub unsafe extern "C" fn hgp_predictor_new(
    name: *const c_char,
    bank: *const HgpBank,
    out: *mut *mut HgpPredictor,
) -> HgpStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        let name = string(name, "name")?;
        let inner = PredictorRegistry::with_builtins().create(name, &context(bank))?;
        *out = Box::into_raw(Box::new(HgpPredictor { inner }));
        Ok(())
    })
}

/// Feeds one received message. Messages must arrive in time order.
#[no_mangle]
pub unsafe extern "C" fn hgp_predictor_observe(p: *mut HgpPredictor, state: *const HgpState) -> HgpStatus {
    guard(|| {
        let p = non_null_mut(p, "predictor")?;
        let s: VehicleState = (*non_null(state, "state")?).into();
        if !s.is_finite() {
            return Err(Failure(HgpStatus::InvalidArgument, "state has non-finite fields".into()));
        }
        if p.inner.last().is_some_and(|l| s.t <= l.t) {
            return Err(Failure(HgpStatus::InvalidArgument, "state is not newer than the last one".into()));
        }
        p.inner.observe(&s);
        Ok(())
    })
}

/// Writes `steps` forecast points (100 ms apart, after the last observed
/// state) into `out`, which must hold `capacity` points. `written`
/// receives the number of points, 0 before the first observation.
#[no_mangle]
pub unsafe extern "C" fn hgp_predictor_forecast(
    p: *mut HgpPredictor,
    steps: usize,
    out: *mut HgpForecastPoint,
    capacity: usize,
    written: *mut usize,
) -> HgpStatus {
    guard(|| {
        let p = non_null_mut(p, "predictor")?;
        let written = non_null_mut(written, "written")?;
        *written = 0;
        if steps > capacity {
            return Err(Failure(
                HgpStatus::BufferTooSmall,
                format!("{steps} steps need {steps} slots, have {capacity}"),
            ));
        }
        if steps > 0 && out.is_null() {
            return Err(Failure(HgpStatus::NullPointer, "out is NULL".into()));
        }
        let pts = p.inner.forecast(steps);
        for (i, pt) in pts.iter().enumerate() {
            *out.add(i) = pt.into();
        }
        *written = pts.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hgp_predictor_free(p: *mut HgpPredictor) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Lateral zone codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HgpLateral {
    FarLeft = 0,
    Left = 1,
    OnCentre = 2,
    Right = 3,
    FarRight = 4,
}

/// Direction codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HgpDirection {
    Ongoing = 0,
    Oncoming = 1,
    Unclassified = 2,
}

/// Classification of a remote vehicle around the host.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HgpClassification {
    /// 1 when ahead of the host, 0 behind.
    pub ahead: i32,
    pub lateral: HgpLateral,
    pub direction: HgpDirection,
    pub x_rel: f64,
    pub ld: f64,
    pub dphi: f64,
}

/// Classifies `rv` relative to `hv` with lane width `w_lane` and the
/// default heading thresholds.
#[no_mangle]
pub unsafe extern "C" fn hgp_classify(
    hv: *const HgpState,
    rv: *const HgpState,
    w_lane: f64,
    out: *mut HgpClassification,
) -> HgpStatus {
    guard(|| {
        let hv: VehicleState = (*non_null(hv, "hv")?).into();
        let rv: VehicleState = (*non_null(rv, "rv")?).into();
        let out = non_null_mut(out, "out")?;
        let cfg = TcConfig { w_lane, ..TcConfig::default() };
        cfg.validate()?;
        let c = catc::classify(&hv, &rv, &cfg);
        *out = HgpClassification {
            ahead: i32::from(c.zone.longitudinal == Longitudinal::Ahead),
            lateral: match c.zone.lateral {
                Lateral::FarLeft => HgpLateral::FarLeft,
                Lateral::Left => HgpLateral::Left,
                Lateral::OnCentre => HgpLateral::OnCentre,
                Lateral::Right => HgpLateral::Right,
                Lateral::FarRight => HgpLateral::FarRight,
            },
            direction: match c.direction {
                Direction::Ongoing => HgpDirection::Ongoing,
                Direction::Oncoming => HgpDirection::Oncoming,
                Direction::Unclassified => HgpDirection::Unclassified,
            },
            x_rel: c.x_rel,
            ld: c.ld,
            dphi: c.dphi,
        };
        Ok(())
    })
}

/// Brake onset range case codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HgpBorCase {
    Stationary = 0,
    MovingMoving = 1,
    MovingStopping = 2,
}

/// Forward collision warning result.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HgpFcwResult {
    pub r_w: f64,
    /// 1 when `range < r_w`.
    pub warn: i32,
    pub bor_case: HgpBorCase,
}

/// FCW for one host/remote pair at longitudinal gap `range` with reaction
/// delay `t_d` (seconds) and required deceleration `a_req` (negative).
#[no_mangle]
pub unsafe extern "C" fn hgp_fcw_evaluate(
    hv_speed: f64,
    hv_accel: f64,
    rv_speed: f64,
    rv_accel: f64,
    range: f64,
    t_d: f64,
    a_req: f64,
    out: *mut HgpFcwResult,
) -> HgpStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        let cfg = FcwConfig { t_d, a_req, ..FcwConfig::default() };
        cfg.validate()?;
        if ![hv_speed, hv_accel, rv_speed, rv_accel, range].iter().all(|v| v.is_finite()) {
            return Err(Failure(HgpStatus::InvalidArgument, "non-finite input".into()));
        }
        let (r_w, case) = safety::warning_range(
            Kinematics { speed: hv_speed, accel: hv_accel },
            Kinematics { speed: rv_speed, accel: rv_accel },
            range,
            &cfg,
        );
        *out = HgpFcwResult {
            r_w,
            warn: i32::from(range < r_w),
            bor_case: match case {
                BorCase::Stationary => HgpBorCase::Stationary,
                BorCase::MovingMoving => HgpBorCase::MovingMoving,
                BorCase::MovingStopping => HgpBorCase::MovingStopping,
            },
        };
        Ok(())
    })
}

/// `E[cos h]` for `h ~ N(mu, var)`.
#[no_mangle]
pub extern "C" fn hgp_expected_cos(mu: f64, var: f64) -> f64 {
    forecast::expected_cos(mu, var)
}
