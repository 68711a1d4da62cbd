//! C ABI over the `dmaq` library.
//!
//! Every fallible function returns a [`DmaqStatus`]; on failure the message
//! is available from [`dmaq_last_error`] on the same thread. Handles are
//! opaque and must be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dmaq::dma::equivalent_channel;
use dmaq::error::Error;
use dmaq::experiment::{
    design_receivers, draw_trial, emit_results, run_experiment, snr_to_noise_power, ExperimentConfig, OutputFormat,
    ReceiverId, ResultRecord,
};
use dmaq::quantization::levels_for_budget;
use dmaq::receiver::ReceiverDesign;
use dmaq::verify::run_invariant_suite;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DmaqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Numerical = 4,
    Io = 5,
    Parse = 6,
    TrialFailed = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DmaqReceiver {
    R1 = 1,
    R2 = 2,
    R3 = 3,
    R4 = 4,
    R5 = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DmaqConfigFormat {
    Json = 0,
    Toml = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DmaqFormat {
    Csv = 0,
    Json = 1,
}

/// One Monte Carlo data point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DmaqRecord {
    pub receiver: DmaqReceiver,
    pub snr_db: f64,
    pub b_overall: u32,
    pub mse: f64,
    pub ber: f64,
    pub overload: f64,
    pub e_o: f64,
    pub wall_time: f64,
    pub seed: u64,
}

/// Opaque experiment configuration.
pub struct DmaqConfig(ExperimentConfig);

/// Opaque list of result records.
pub struct DmaqResults(Vec<ResultRecord>);

/// Opaque receiver design.
pub struct DmaqDesign(ReceiverDesign);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> DmaqStatus {
    match e {
        Error::InvalidConfig(_) | Error::Dimension(_) | Error::Infeasible(_) => DmaqStatus::InvalidConfig,
        Error::Io { .. } => DmaqStatus::Io,
        Error::Parse(_) => DmaqStatus::Parse,
        Error::TrialFailed { .. } => DmaqStatus::TrialFailed,
        _ => DmaqStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (DmaqStatus, String)>) -> DmaqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DmaqStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DmaqStatus::Panic
        }
    }
}

fn lib<T>(r: dmaq::error::Result<T>) -> Result<T, (DmaqStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (DmaqStatus, String) {
    (DmaqStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (DmaqStatus, String) {
    (DmaqStatus::InvalidArgument, msg.into())
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (DmaqStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (DmaqStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (DmaqStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn as_slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (DmaqStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn receiver_code(r: ReceiverId) -> DmaqReceiver {
    match r {
        ReceiverId::R1 => DmaqReceiver::R1,
        ReceiverId::R2 => DmaqReceiver::R2,
        ReceiverId::R3 => DmaqReceiver::R3,
        ReceiverId::R4 => DmaqReceiver::R4,
        ReceiverId::R5 => DmaqReceiver::R5,
    }
}

fn receiver_from_raw(code: u32) -> Result<ReceiverId, (DmaqStatus, String)> {
    ReceiverId::ALL
        .get((code as usize).wrapping_sub(1))
        .copied()
        .ok_or_else(|| invalid(format!("receiver code {code} is not in 1..=5")))
}

fn output_format(code: u32) -> Result<OutputFormat, (DmaqStatus, String)> {
    match code {
        c if c == DmaqFormat::Csv as u32 => Ok(OutputFormat::Csv),
        c if c == DmaqFormat::Json as u32 => Ok(OutputFormat::Json),
        c => Err(invalid(format!("output format code {c} is unknown"))),
    }
}

fn put<T>(out: *mut *mut T, value: T) -> Result<(), (DmaqStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn dmaq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dmaq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn dmaq_snr_to_noise_power(snr_db: f64) -> f64 {
    snr_to_noise_power(snr_db)
}

/// Quantizer levels per real dimension for an overall budget.
///
/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dmaq_levels_for_budget(bits_overall: f64, microstrips: usize, out: *mut usize) -> DmaqStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        if microstrips == 0 {
            return Err(invalid("microstrips must be positive"));
        }
        *out = lib(levels_for_budget(bits_overall, microstrips))?;
        Ok(())
    })
}

/// Shipped default configuration.
///
/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dmaq_config_default(out: *mut *mut DmaqConfig) -> DmaqStatus {
    guard(|| put(out, DmaqConfig(ExperimentConfig::shipped())))
}

/// Loads a configuration from a `.json` or `.toml` file.
///
/// # Safety
/// `path` must be null or NUL-terminated; `out` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dmaq_config_from_file(path: *const c_char, out: *mut *mut DmaqConfig) -> DmaqStatus {
    guard(|| {
        let path = as_str(path, "path")?;
        let cfg = lib(ExperimentConfig::from_path(Path::new(path)))?;
        put(out, DmaqConfig(cfg))
    })
}

/// Parses a configuration from JSON or TOML text; `format` is a
/// [`DmaqConfigFormat`] value.
///
/// # Safety
/// `text` must be null or NUL-terminated; `out` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dmaq_config_from_str(
    text: *const c_char,
    format: u32,
    out: *mut *mut DmaqConfig,
) -> DmaqStatus {
    guard(|| {
        let text = as_str(text, "text")?;
        let cfg = match format {
            f if f == DmaqConfigFormat::Json as u32 => lib(ExperimentConfig::from_json_str(text))?,
            f if f == DmaqConfigFormat::Toml as u32 => lib(ExperimentConfig::from_toml_str(text))?,
            f => return Err(invalid(format!("config format code {f} is unknown"))),
        };
        put(out, DmaqConfig(cfg))
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dmaq_config_free(cfg: *mut DmaqConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dmaq_config_set_trials(cfg: *mut DmaqConfig, trials: usize) -> DmaqStatus {
    guard(|| {
        let cfg = as_mut(cfg, "cfg")?;
        if trials == 0 {
            return Err(invalid("trials must be positive"));
        }
        cfg.0.trials = trials;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dmaq_config_set_seed(cfg: *mut DmaqConfig, seed: u64) -> DmaqStatus {
    guard(|| {
        as_mut(cfg, "cfg")?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a live handle; `snr_db` valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn dmaq_config_set_snr(cfg: *mut DmaqConfig, snr_db: *const f64, len: usize) -> DmaqStatus {
    guard(|| {
        let cfg = as_mut(cfg, "cfg")?;
        let values = as_slice(snr_db, len, "snr_db")?;
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("SNR list must be non-empty and finite"));
        }
        cfg.0.snr_db = values.to_vec();
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a live handle; `budgets` valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn dmaq_config_set_budgets(cfg: *mut DmaqConfig, budgets: *const u32, len: usize) -> DmaqStatus {
    guard(|| {
        let cfg = as_mut(cfg, "cfg")?;
        let values = as_slice(budgets, len, "budgets")?;
        if values.is_empty() {
            return Err(invalid("budget list must be non-empty"));
        }
        cfg.0.budgets = values.to_vec();
        Ok(())
    })
}

/// Receivers given as codes 1..=5.
///
/// # Safety
/// `cfg` must be null or a live handle; `codes` valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn dmaq_config_set_receivers(cfg: *mut DmaqConfig, codes: *const u32, len: usize) -> DmaqStatus {
    guard(|| {
        let cfg = as_mut(cfg, "cfg")?;
        let values = as_slice(codes, len, "codes")?;
        if values.is_empty() {
            return Err(invalid("receiver list must be non-empty"));
        }
        cfg.0.receivers = values.iter().map(|&c| receiver_from_raw(c)).collect::<Result<_, _>>()?;
        Ok(())
    })
}

/// Checks the configuration without running it.
///
/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dmaq_config_validate(cfg: *const DmaqConfig) -> DmaqStatus {
    guard(|| lib(as_ref(cfg, "cfg")?.0.validate()))
}

/// Runs the Monte Carlo experiment described by `cfg`.
///
/// # Safety
/// `cfg` must be null or a live handle; `out` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dmaq_run_experiment(cfg: *const DmaqConfig, out: *mut *mut DmaqResults) -> DmaqStatus {
    guard(|| {
        let cfg = as_ref(cfg, "cfg")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let records = lib(run_experiment(&cfg.0))?;
        put(out, DmaqResults(records))
    })
}

/// Number of records, or 0 for a null handle.
///
/// # Safety
/// `results` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dmaq_results_len(results: *const DmaqResults) -> usize {
    results.as_ref().map_or(0, |r| r.0.len())
}

/// # Safety
/// `results` must be null or a live handle; `out` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dmaq_results_get(
    results: *const DmaqResults,
    index: usize,
    out: *mut DmaqRecord,
) -> DmaqStatus {
    guard(|| {
        let results = as_ref(results, "results")?;
        let out = as_mut(out, "out")?;
        let r = results
            .0
            .get(index)
            .ok_or_else(|| invalid(format!("index {index} out of range for {} records", results.0.len())))?;
        *out = DmaqRecord {
            receiver: receiver_code(r.receiver),
            snr_db: r.snr_db,
            b_overall: r.b_overall,
            mse: r.mse,
            ber: r.ber,
            overload: r.overload,
            e_o: r.e_o,
            wall_time: r.wall_time,
            seed: r.seed,
        };
        Ok(())
    })
}

/// Writes the records; `format` is a [`DmaqFormat`] value.
///
/// # Safety
/// `results` must be null or a live handle; `path` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dmaq_results_write(
    results: *const DmaqResults,
    path: *const c_char,
    format: u32,
) -> DmaqStatus {
    guard(|| {
        let results = as_ref(results, "results")?;
        let path = as_str(path, "path")?;
        lib(emit_results(&results.0, output_format(format)?, Path::new(path)))
    })
}

/// # Safety
/// `results` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dmaq_results_free(results: *mut DmaqResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}

/// Designs one quantized receiver for the channel of `trial`; `receiver`
/// is a [`DmaqReceiver`] value other than R5.
///
/// # Safety
/// `cfg` must be null or a live handle; `out` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dmaq_design_receiver(
    cfg: *const DmaqConfig,
    receiver: u32,
    snr_db: f64,
    b_overall: u32,
    trial: usize,
    out: *mut *mut DmaqDesign,
) -> DmaqStatus {
    guard(|| {
        let cfg = &as_ref(cfg, "cfg")?.0;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let id = receiver_from_raw(receiver)?;
        if id == ReceiverId::R5 {
            return Err(invalid("R5 has no quantized design"));
        }
        if !snr_db.is_finite() {
            return Err(invalid("SNR must be finite"));
        }
        lib(cfg.validate())?;
        let (grid, prop) = lib(cfg.front_end())?;
        let levels = lib(levels_for_budget(b_overall as f64, cfg.channel.microstrips))?;
        let draw = lib(draw_trial(cfg, trial, 0))?;
        let ch = draw.channel.with_noise_power(snr_to_noise_power(snr_db));
        let eq = lib(equivalent_channel(&ch, &prop))?;
        let mut designs = lib(design_receivers(cfg, &ch, &eq, &grid, &prop, levels, &[id]))?;
        let (_, design) = designs.pop().ok_or_else(|| invalid("no design produced"))?;
        put(out, DmaqDesign(design))
    })
}

/// ADC support and number of levels of a design.
///
/// # Safety
/// `design` must be null or a live handle; outputs null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dmaq_design_quantizer(
    design: *const DmaqDesign,
    support: *mut f64,
    levels: *mut usize,
) -> DmaqStatus {
    guard(|| {
        let d = as_ref(design, "design")?;
        *as_mut(support, "support")? = d.0.quantizer.support;
        *as_mut(levels, "levels")? = d.0.quantizer.levels;
        Ok(())
    })
}

/// Serializes a design as JSON. Release the string with [`dmaq_string_free`].
///
/// # Safety
/// `design` must be null or a live handle; `out` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dmaq_design_to_json(design: *const DmaqDesign, out: *mut *mut c_char) -> DmaqStatus {
    guard(|| {
        let d = as_ref(design, "design")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let text = serde_json::to_string(&d.0.to_record()).map_err(|e| (DmaqStatus::Parse, e.to_string()))?;
        let c = CString::new(text).map_err(|e| (DmaqStatus::Parse, e.to_string()))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// # Safety
/// `design` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dmaq_design_free(design: *mut DmaqDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dmaq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs the built-in invariant checks; `passed` and `total` receive counts.
///
/// # Safety
/// Outputs must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn dmaq_verify(seed: u64, passed: *mut usize, total: *mut usize) -> DmaqStatus {
    guard(|| {
        let passed = as_mut(passed, "passed")?;
        let total = as_mut(total, "total")?;
        let checks = run_invariant_suite(seed);
        *total = checks.len();
        *passed = checks.iter().filter(|c| c.passed).count();
        Ok(())
    })
}
