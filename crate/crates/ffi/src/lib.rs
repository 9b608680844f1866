//! C ABI for the `wimax-qoe` simulator.
//!
//! Configurations and results live behind opaque handles owned by the
//! library; free them with the matching `*_free` call. Every fallible entry
//! point returns a [`WimaxStatus`]; on failure a description is available
//! from [`wimax_last_error`] on the same thread. Panics never cross the
//! boundary and surface as `WIMAX_STATUS_PANIC`.
//!
//! The header `include/wimax_qoe.h` is regenerated by `build.rs`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use wimax_qoe::config::{load_config, parse_config, ScenarioConfig, Scheduler};
use wimax_qoe::controller::{decide, ControllerState, EpochObservation};
use wimax_qoe::scenario::{run_scenario, run_sweep, write_outputs, RunOutput};
use wimax_qoe::traffic::emission_interval;
use wimax_qoe::{Error, SimTime};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WimaxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    IoError = 4,
    OutOfRange = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WimaxScheduler {
    Baseline = 0,
    Qoe = 1,
}

/// Whole-run statistics for one flow of one variant.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WimaxFlowSummary {
    pub flow_id: u32,
    /// 0 = baseline, 1 = qoe.
    pub scheduler: u32,
    /// Loss threshold as a fraction; negative for baseline rows.
    pub threshold: f64,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_queue: u64,
    pub bytes_delivered: u64,
    pub throughput_bps: f64,
    pub loss_rate: f64,
    pub mean_delay_s: f64,
    pub mean_jitter_s: f64,
    pub initial_rate_bps: f64,
    pub min_rate_bps: f64,
    pub final_rate_bps: f64,
}

/// Opaque scenario configuration.
pub struct WimaxConfig {
    inner: ScenarioConfig,
}

/// Opaque set of finished runs (one for a single run, one per variant for a
/// sweep).
pub struct WimaxRun {
    runs: Vec<RunOutput>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: WimaxStatus, msg: impl Into<String>) -> WimaxStatus {
    set_error(msg);
    status
}

fn status_of(err: &Error) -> WimaxStatus {
    match err {
        Error::Io { .. } => WimaxStatus::IoError,
        _ => WimaxStatus::ConfigError,
    }
}

fn guard<F: FnOnce() -> WimaxStatus>(f: F) -> WimaxStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(WimaxStatus::Panic, msg)
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, WimaxStatus> {
    if p.is_null() {
        return Err(fail(WimaxStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(WimaxStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn store<T>(out: *mut *mut T, value: T) -> WimaxStatus {
    unsafe { *out = Box::into_raw(Box::new(value)) };
    WimaxStatus::Ok
}

/// Message describing the last failure on this thread, or NULL. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn wimax_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Reference scenario with default parameters. Never NULL.
#[no_mangle]
pub extern "C" fn wimax_config_default() -> *mut WimaxConfig {
    Box::into_raw(Box::new(WimaxConfig {
        inner: ScenarioConfig::default(),
    }))
}

#[no_mangle]
pub unsafe extern "C" fn wimax_config_load(
    path: *const c_char,
    out: *mut *mut WimaxConfig,
) -> WimaxStatus {
    guard(|| {
        if out.is_null() {
            return fail(WimaxStatus::NullPointer, "out is null");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_config(Path::new(path)) {
            Ok(inner) => store(out, WimaxConfig { inner }),
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn wimax_config_parse(
    text: *const c_char,
    out: *mut *mut WimaxConfig,
) -> WimaxStatus {
    guard(|| {
        if out.is_null() {
            return fail(WimaxStatus::NullPointer, "out is null");
        }
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_config(text) {
            Ok(inner) => store(out, WimaxConfig { inner }),
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

unsafe fn with_config(
    cfg: *mut WimaxConfig,
    f: impl FnOnce(&mut ScenarioConfig) -> WimaxStatus,
) -> WimaxStatus {
    guard(|| match cfg.as_mut() {
        Some(c) => f(&mut c.inner),
        None => fail(WimaxStatus::NullPointer, "config is null"),
    })
}

/// `scheduler` takes a `WimaxScheduler` value.
#[no_mangle]
pub unsafe extern "C" fn wimax_config_set_scheduler(
    cfg: *mut WimaxConfig,
    scheduler: u32,
) -> WimaxStatus {
    with_config(cfg, |c| {
        c.scheduler = match scheduler {
            s if s == WimaxScheduler::Baseline as u32 => Scheduler::Baseline,
            s if s == WimaxScheduler::Qoe as u32 => Scheduler::Qoe,
            other => {
                return fail(
                    WimaxStatus::InvalidArgument,
                    format!("unknown scheduler {other}"),
                )
            }
        };
        WimaxStatus::Ok
    })
}

/// Sets the loss threshold (fraction in (0, 1]) of every user.
#[no_mangle]
pub unsafe extern "C" fn wimax_config_set_threshold(
    cfg: *mut WimaxConfig,
    threshold: f64,
) -> WimaxStatus {
    with_config(cfg, |c| {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return fail(
                WimaxStatus::OutOfRange,
                format!("threshold out of range: {threshold}"),
            );
        }
        c.set_threshold(threshold);
        WimaxStatus::Ok
    })
}

/// Replaces the sweep's threshold list.
#[no_mangle]
pub unsafe extern "C" fn wimax_config_set_thresholds(
    cfg: *mut WimaxConfig,
    thresholds: *const f64,
    len: usize,
) -> WimaxStatus {
    with_config(cfg, |c| {
        if thresholds.is_null() || len == 0 {
            return fail(
                WimaxStatus::InvalidArgument,
                "thresholds must be a non-empty array",
            );
        }
        let list = std::slice::from_raw_parts(thresholds, len);
        if let Some(bad) = list.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return fail(
                WimaxStatus::OutOfRange,
                format!("threshold out of range: {bad}"),
            );
        }
        c.thresholds = list.to_vec();
        WimaxStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn wimax_config_set_sim_time(
    cfg: *mut WimaxConfig,
    seconds: f64,
) -> WimaxStatus {
    with_config(cfg, |c| {
        if !(seconds.is_finite() && seconds > 0.0) {
            return fail(
                WimaxStatus::OutOfRange,
                format!("sim_time must be positive, got {seconds}"),
            );
        }
        c.sim_time = SimTime::from_secs_f64(seconds);
        WimaxStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn wimax_config_set_epoch(
    cfg: *mut WimaxConfig,
    seconds: f64,
) -> WimaxStatus {
    with_config(cfg, |c| {
        if !(seconds.is_finite() && seconds > 0.0) {
            return fail(
                WimaxStatus::OutOfRange,
                format!("epoch must be positive, got {seconds}"),
            );
        }
        c.epoch = SimTime::from_secs_f64(seconds);
        WimaxStatus::Ok
    })
}

/// Bytes per frame; `UINT64_MAX` means unlimited.
#[no_mangle]
pub unsafe extern "C" fn wimax_config_set_uplink_capacity(
    cfg: *mut WimaxConfig,
    bytes_per_frame: u64,
) -> WimaxStatus {
    with_config(cfg, |c| {
        c.frame.uplink_capacity = bytes_per_frame;
        WimaxStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn wimax_config_user_count(cfg: *const WimaxConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.inner.users.len())
}

#[no_mangle]
pub unsafe extern "C" fn wimax_config_free(cfg: *mut WimaxConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

unsafe fn start(cfg: *const WimaxConfig, out: *mut *mut WimaxRun, sweep: bool) -> WimaxStatus {
    guard(|| {
        if out.is_null() {
            return fail(WimaxStatus::NullPointer, "out is null");
        }
        let Some(cfg) = cfg.as_ref() else {
            return fail(WimaxStatus::NullPointer, "config is null");
        };
        let result = if sweep {
            run_sweep(&cfg.inner)
        } else {
            run_scenario(&cfg.inner).map(|r| vec![r])
        };
        match result {
            Ok(runs) => store(out, WimaxRun { runs }),
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Runs the configured scheduler once.
#[no_mangle]
pub unsafe extern "C" fn wimax_run(
    cfg: *const WimaxConfig,
    out: *mut *mut WimaxRun,
) -> WimaxStatus {
    start(cfg, out, false)
}

/// Runs the baseline followed by the QoE scheduler at every configured
/// threshold.
#[no_mangle]
pub unsafe extern "C" fn wimax_sweep(
    cfg: *const WimaxConfig,
    out: *mut *mut WimaxRun,
) -> WimaxStatus {
    start(cfg, out, true)
}

#[no_mangle]
pub unsafe extern "C" fn wimax_run_variant_count(run: *const WimaxRun) -> usize {
    run.as_ref().map_or(0, |r| r.runs.len())
}

#[no_mangle]
pub unsafe extern "C" fn wimax_run_flow_count(run: *const WimaxRun) -> usize {
    run.as_ref()
        .and_then(|r| r.runs.first())
        .map_or(0, |r| r.flow_ids.len())
}

#[no_mangle]
pub unsafe extern "C" fn wimax_run_flow_summary(
    run: *const WimaxRun,
    variant: usize,
    flow: usize,
    out: *mut WimaxFlowSummary,
) -> WimaxStatus {
    guard(|| {
        let (Some(run), false) = (run.as_ref(), out.is_null()) else {
            return fail(WimaxStatus::NullPointer, "run or out is null");
        };
        let Some(r) = run.runs.get(variant) else {
            return fail(
                WimaxStatus::OutOfRange,
                format!("variant {variant} out of range"),
            );
        };
        let Some(m) = r.summary.get(flow) else {
            return fail(WimaxStatus::OutOfRange, format!("flow {flow} out of range"));
        };
        *out = WimaxFlowSummary {
            flow_id: m.flow_id,
            scheduler: match r.scheduler {
                Scheduler::Baseline => 0,
                Scheduler::Qoe => 1,
            },
            threshold: r.threshold_label(flow).unwrap_or(-1.0),
            generated: m.generated,
            delivered: m.delivered,
            dropped: m.dropped,
            in_queue: r.in_queue[flow],
            bytes_delivered: m.bytes_delivered,
            throughput_bps: m.throughput,
            loss_rate: m.loss_rate,
            mean_delay_s: m.mean_delay,
            mean_jitter_s: m.mean_jitter,
            initial_rate_bps: r.initial_rates[flow],
            min_rate_bps: r.min_rates[flow],
            final_rate_bps: r.final_rates[flow],
        };
        WimaxStatus::Ok
    })
}

/// Writes `summary.csv`, `series.csv` and `rates.csv` into `dir`.
#[no_mangle]
pub unsafe extern "C" fn wimax_run_write_csv(
    run: *const WimaxRun,
    dir: *const c_char,
) -> WimaxStatus {
    guard(|| {
        let Some(run) = run.as_ref() else {
            return fail(WimaxStatus::NullPointer, "run is null");
        };
        let dir = match str_arg(dir, "dir") {
            Ok(d) => d,
            Err(s) => return s,
        };
        match write_outputs(Path::new(dir), &run.runs) {
            Ok(()) => WimaxStatus::Ok,
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn wimax_run_free(run: *mut WimaxRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// One controller decision. `increase_step` is in bytes per second.
/// Returns the new rate, or a negative value for invalid input.
#[no_mangle]
pub extern "C" fn wimax_decide(
    rate: f64,
    min_rate: f64,
    rate_ceiling: f64,
    threshold: f64,
    sent: u64,
    lost: u64,
    decrease_factor: f64,
    increase_step: f64,
) -> f64 {
    let valid = rate > 0.0
        && min_rate > 0.0
        && rate <= rate_ceiling
        && (0.0..=1.0).contains(&threshold)
        && lost <= sent
        && decrease_factor > 0.0
        && decrease_factor < 1.0
        && increase_step >= 0.0;
    if !valid {
        set_error("invalid controller input");
        return -1.0;
    }
    let state = ControllerState {
        flow_id: 0,
        current_rate: rate,
        min_subjective_rate: min_rate,
        loss_threshold: threshold,
        epoch_sent: sent,
        epoch_lost: lost,
        decrease_factor,
        increase_step,
        rate_ceiling,
    };
    decide(&state, &EpochObservation::new(sent, lost))
}

/// Packet spacing in microseconds, or -1 for a non-positive rate or size.
#[no_mangle]
pub extern "C" fn wimax_emission_interval_us(rate: f64, packet_size: u32) -> i64 {
    match emission_interval(rate, packet_size) {
        Ok(t) => t.as_micros() as i64,
        Err(e) => {
            set_error(e.to_string());
            -1
        }
    }
}
