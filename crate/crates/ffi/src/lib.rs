//! C ABI over `urc-core`.
//!
//! Every function returns a [`UrcStatus`] and writes results through out
//! pointers. On failure the message is available from
//! [`urc_last_error_message`] on the calling thread until the next call.
//! Handles returned by `*_new`/`*_generate` functions are owned by the
//! caller and released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use urc_core::budget::{self, BudgetRequest};
use urc_core::channel::{self, ChannelModel, FadingKind, Interferer, SnrTrace};
use urc_core::cli::{self, Command};
use urc_core::fbl::{self, ChannelUseMode, FblQuery};
use urc_core::link::{self, HeaderSplit};
use urc_core::report::emit_json;
use urc_core::{special, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UrcStatus {
    Ok = 0,
    InvalidArgument = 1,
    Domain = 2,
    NoSolution = 3,
    Infeasible = 4,
    Config = 5,
    UnsupportedFormat = 6,
    Io = 7,
    NullPointer = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UrcMode {
    Real = 0,
    Complex = 1,
}

impl From<UrcMode> for ChannelUseMode {
    fn from(m: UrcMode) -> Self {
        match m {
            UrcMode::Real => ChannelUseMode::Real,
            UrcMode::Complex => ChannelUseMode::Complex,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UrcFading {
    Constant = 0,
    RayleighBlock = 1,
    LognormalShadow = 2,
    RayleighPlusShadow = 3,
}

impl From<UrcFading> for FadingKind {
    fn from(k: UrcFading) -> Self {
        match k {
            UrcFading::Constant => FadingKind::Constant,
            UrcFading::RayleighBlock => FadingKind::RayleighBlock,
            UrcFading::LognormalShadow => FadingKind::LognormalShadow,
            UrcFading::RayleighPlusShadow => FadingKind::RayleighPlusShadow,
        }
    }
}

/// Channel description for trace generation. SNR and INR are linear.
/// `interferer_activity_prob = 0` disables the interferer.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UrcChannel {
    pub kind: UrcFading,
    pub mean_snr: f64,
    pub shadow_sigma_db: f64,
    pub block_length: usize,
    pub interferer_activity_prob: f64,
    pub interferer_inr: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct UrcBudgetPlan {
    pub required_cu: u64,
    pub required_bandwidth_hz: f64,
    pub effective_bandwidth_hz: f64,
    pub spatial_streams: u32,
    pub feasible: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct UrcComparison {
    pub header_cu: u64,
    pub total_cu: u64,
    pub separate_success: f64,
    pub joint_success: f64,
    pub separate_failure: f64,
    pub joint_failure: f64,
    pub joint_wins: bool,
}

/// Opaque generated SNR/SINR trace.
pub struct UrcTrace {
    inner: SnrTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
    Ok(s) => s,
    Err(_) => panic!("version string contains NUL"),
};

enum Failure {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn status_of(e: &Error) -> UrcStatus {
    match e {
        Error::InvalidArgument(_) => UrcStatus::InvalidArgument,
        Error::Domain(_) => UrcStatus::Domain,
        Error::NoSolution(_) => UrcStatus::NoSolution,
        Error::Infeasible(_) => UrcStatus::Infeasible,
        Error::Config { .. } => UrcStatus::Config,
        Error::UnsupportedFormat(_) => UrcStatus::UnsupportedFormat,
        Error::Io(_) => UrcStatus::Io,
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> UrcStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UrcStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed for `{what}`"));
            UrcStatus::NullPointer
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            UrcStatus::Panic
        }
    }
}

fn write<T>(out: *mut T, name: &'static str, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(name));
    }
    // SAFETY: non-null; the caller guarantees it points to writable storage for T.
    unsafe { out.write(value) };
    Ok(())
}

unsafe fn read_str<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    // SAFETY: non-null; the caller guarantees a NUL-terminated string.
    let s = unsafe { CStr::from_ptr(p) };
    s.to_str()
        .map_err(|e| Failure::Core(Error::InvalidArgument(format!("`{name}` is not UTF-8: {e}"))))
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next library call on the same thread.
#[no_mangle]
pub extern "C" fn urc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn urc_version() -> *const c_char {
    VERSION.as_ptr()
}

/// Gaussian tail probability `Q(x)`.
#[no_mangle]
pub extern "C" fn urc_qfunc(x: f64, out: *mut f64) -> UrcStatus {
    guard(|| write(out, "out", special::qfunc(x)?))
}

/// Inverse of `Q` on `(0, 1)`.
#[no_mangle]
pub extern "C" fn urc_qfunc_inv(p: f64, out: *mut f64) -> UrcStatus {
    guard(|| write(out, "out", special::qfunc_inv(p)?))
}

/// Capacity in bits per channel use at linear SNR `gamma`.
#[no_mangle]
pub extern "C" fn urc_capacity_per_cu(gamma: f64, mode: UrcMode, out: *mut f64) -> UrcStatus {
    guard(|| write(out, "out", fbl::capacity_per_cu(gamma, mode.into())?))
}

/// Channel dispersion in bits² per channel use.
#[no_mangle]
pub extern "C" fn urc_dispersion(gamma: f64, mode: UrcMode, out: *mut f64) -> UrcStatus {
    guard(|| write(out, "out", fbl::dispersion(gamma, mode.into())?))
}

/// Information bits carried by `n` channel uses at error probability `epsilon`.
#[no_mangle]
pub extern "C" fn urc_max_info_bits(
    n: u64,
    epsilon: f64,
    gamma: f64,
    mode: UrcMode,
    out: *mut f64,
) -> UrcStatus {
    guard(|| {
        let q = FblQuery::new(n, epsilon, gamma, mode.into())?;
        write(out, "out", fbl::max_info_bits(&q)?.k_bits)
    })
}

/// Smallest blocklength carrying `k_bits` at error probability `epsilon`.
#[no_mangle]
pub extern "C" fn urc_min_blocklength(
    k_bits: f64,
    epsilon: f64,
    gamma: f64,
    mode: UrcMode,
    out: *mut u64,
) -> UrcStatus {
    guard(|| write(out, "out", fbl::min_blocklength(k_bits, epsilon, gamma, mode.into())?))
}

/// Error probability of `k_bits` over `n` channel uses.
#[no_mangle]
pub extern "C" fn urc_achieved_error(
    n: u64,
    k_bits: f64,
    gamma: f64,
    mode: UrcMode,
    out: *mut f64,
) -> UrcStatus {
    guard(|| write(out, "out", fbl::achieved_error(n, k_bits, gamma, mode.into())?))
}

/// Linear SNR needed to carry `k_bits` over `n` channel uses.
#[no_mangle]
pub extern "C" fn urc_min_snr(
    n: u64,
    k_bits: f64,
    epsilon: f64,
    mode: UrcMode,
    out: *mut f64,
) -> UrcStatus {
    guard(|| write(out, "out", fbl::min_snr(n, k_bits, epsilon, mode.into())?))
}

/// Real degrees of freedom `2WT`.
#[no_mangle]
pub extern "C" fn urc_degrees_of_freedom(bandwidth_hz: f64, latency_s: f64, out: *mut f64) -> UrcStatus {
    guard(|| write(out, "out", budget::degrees_of_freedom(bandwidth_hz, latency_s)?))
}

/// Bandwidth `N/(2T)` for `channel_uses` within `latency_s`.
#[no_mangle]
pub extern "C" fn urc_required_bandwidth(channel_uses: f64, latency_s: f64, out: *mut f64) -> UrcStatus {
    guard(|| write(out, "out", budget::required_bandwidth(channel_uses, latency_s)?))
}

/// Resource plan for a payload. `max_bandwidth_hz <= 0` and
/// `max_streams == 0` mean unlimited.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub extern "C" fn urc_budget_plan(
    payload_bits: f64,
    epsilon: f64,
    gamma: f64,
    latency_s: f64,
    max_bandwidth_hz: f64,
    max_streams: u32,
    mode: UrcMode,
    out: *mut UrcBudgetPlan,
) -> UrcStatus {
    guard(|| {
        let plan = budget::plan(&BudgetRequest {
            payload_bits,
            epsilon,
            gamma,
            latency: latency_s,
            max_bandwidth: (max_bandwidth_hz > 0.0).then_some(max_bandwidth_hz),
            max_streams: (max_streams > 0).then_some(max_streams),
            mode: mode.into(),
        })?;
        write(
            out,
            "out",
            UrcBudgetPlan {
                required_cu: plan.required_cu,
                required_bandwidth_hz: plan.required_bandwidth,
                effective_bandwidth_hz: plan.effective_bandwidth,
                spatial_streams: plan.spatial_streams,
                feasible: plan.feasible,
            },
        )
    })
}

/// Separate vs. joint header/data encoding over `total_cu` channel uses.
/// `header_cu == 0` sizes the header adaptively for `data_epsilon`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub extern "C" fn urc_compare_encodings(
    header_bits: f64,
    data_bits: f64,
    total_cu: u64,
    symbol_duration_s: f64,
    gamma: f64,
    mode: UrcMode,
    header_cu: u64,
    data_epsilon: f64,
    out: *mut UrcComparison,
) -> UrcStatus {
    guard(|| {
        let split = if header_cu == 0 {
            HeaderSplit::Adaptive { data_epsilon }
        } else {
            HeaderSplit::Fixed(header_cu)
        };
        let c = link::compare_encodings(
            header_bits,
            data_bits,
            total_cu,
            symbol_duration_s,
            gamma,
            mode.into(),
            split,
        )?;
        write(
            out,
            "out",
            UrcComparison {
                header_cu: c.header_cu,
                total_cu: c.total_cu,
                separate_success: c.separate.success_prob,
                joint_success: c.joint.success_prob,
                separate_failure: c.separate.failure_prob,
                joint_failure: c.joint.failure_prob,
                joint_wins: c.joint_wins,
            },
        )
    })
}

/// Generate a trace of `length` samples. Free with [`urc_trace_free`].
///
/// # Safety
/// `channel` must point to a valid `UrcChannel`; `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn urc_trace_generate(
    channel: *const UrcChannel,
    length: usize,
    sample_period_s: f64,
    seed: u64,
    out: *mut *mut UrcTrace,
) -> UrcStatus {
    guard(|| {
        if channel.is_null() {
            return Err(Failure::Null("channel"));
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        // SAFETY: checked non-null above; validity is the caller's contract.
        let c = unsafe { *channel };
        let model = ChannelModel {
            kind: c.kind.into(),
            mean_snr: c.mean_snr,
            shadow_sigma_db: c.shadow_sigma_db,
            block_length: c.block_length,
            interferer: (c.interferer_activity_prob > 0.0).then_some(Interferer {
                activity_prob: c.interferer_activity_prob,
                inr: c.interferer_inr,
            }),
        };
        let trace = channel::generate_trace(&model, length, sample_period_s, seed)?;
        write(out, "out", Box::into_raw(Box::new(UrcTrace { inner: trace })))
    })
}

/// Number of samples in `trace`; 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live handle from [`urc_trace_generate`].
#[no_mangle]
pub unsafe extern "C" fn urc_trace_len(trace: *const UrcTrace) -> usize {
    // SAFETY: caller contract.
    unsafe { trace.as_ref() }.map_or(0, |t| t.inner.len())
}

/// Copy up to `capacity` samples into `buffer`; the count copied goes to
/// `written`.
///
/// # Safety
/// `trace` must be a live handle; `buffer` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn urc_trace_copy_samples(
    trace: *const UrcTrace,
    buffer: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> UrcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let t = unsafe { trace.as_ref() }.ok_or(Failure::Null("trace"))?;
        let count = capacity.min(t.inner.len());
        if count > 0 {
            if buffer.is_null() {
                return Err(Failure::Null("buffer"));
            }
            // SAFETY: buffer holds at least `capacity >= count` doubles.
            unsafe { ptr::copy_nonoverlapping(t.inner.samples.as_ptr(), buffer, count) };
        }
        write(written, "written", count)
    })
}

/// Fraction of samples at or above `threshold` (linear).
///
/// # Safety
/// `trace` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn urc_trace_availability(
    trace: *const UrcTrace,
    threshold: f64,
    out: *mut f64,
) -> UrcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let t = unsafe { trace.as_ref() }.ok_or(Failure::Null("trace"))?;
        write(out, "out", channel::availability(&t.inner, threshold))
    })
}

/// Release a trace. NULL is ignored.
///
/// # Safety
/// `trace` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn urc_trace_free(trace: *mut UrcTrace) {
    if !trace.is_null() {
        // SAFETY: produced by Box::into_raw in urc_trace_generate.
        drop(unsafe { Box::from_raw(trace) });
    }
}

/// Run a subcommand on a scenario document (TOML or JSON) and return the
/// JSON report. Free the string with [`urc_string_free`].
///
/// # Safety
/// `command` and `config_text` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn urc_run_config(
    command: *const c_char,
    config_text: *const c_char,
    threads: u32,
    out_json: *mut *mut c_char,
) -> UrcStatus {
    guard(|| {
        // SAFETY: caller contract.
        let name = unsafe { read_str(command, "command") }?;
        let text = unsafe { read_str(config_text, "config_text") }?;
        if out_json.is_null() {
            return Err(Failure::Null("out_json"));
        }
        let cmd = Command::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown command `{name}`")))?;
        let config = cli::parse_config(text.as_bytes())?;
        let report = cli::run(cmd, &config, threads.max(1) as usize)?;
        let json = emit_json(&report)?;
        let c = CString::new(json)
            .map_err(|_| Error::UnsupportedFormat("report contains NUL".into()))?;
        write(out_json, "out_json", c.into_raw())
    })
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string from [`urc_run_config`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn urc_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by CString::into_raw.
        drop(unsafe { CString::from_raw(s) });
    }
}
