//! C ABI over `photonic_pinn`.
//!
//! Every fallible call returns a [`PpStatus`]; on failure the message is kept
//! per thread and can be read with [`pp_last_error_message`]. Objects are
//! opaque handles created by `pp_*_new`/`pp_*_load` and released with the
//! matching `pp_*_free`. Passing NULL to a free function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use photonic_pinn::config::RunConfig;
use photonic_pinn::hardware::{synth_weight_bank, NoiseSpec, Precision, QuantSpec, WeightBank};
use photonic_pinn::model::{forward, init_params, Checkpoint, NetworkTopology, ParameterVector};
use photonic_pinn::pde;
use photonic_pinn::rng::NoiseStream;
use photonic_pinn::runner::{run_training, TrainReport};
use photonic_pinn::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Domain = 4,
    Format = 5,
    Range = 6,
    OutOfRange = 7,
    Divergence = 8,
    Io = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

impl From<&Error> for PpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => PpStatus::Config,
            Error::Domain { .. } => PpStatus::Domain,
            Error::Format(_) => PpStatus::Format,
            Error::Range(_) => PpStatus::Range,
            Error::OutOfRange { .. } => PpStatus::OutOfRange,
            Error::Divergence { .. } => PpStatus::Divergence,
            Error::Io { .. } => PpStatus::Io,
        }
    }
}

/// A simulated weight bank: four ring curves plus quantization and noise.
pub struct PpBank(WeightBank);

/// Network parameters for the default topology.
pub struct PpParams(ParameterVector);

/// A completed training run.
pub struct PpReport(TrainReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(status: PpStatus, msg: impl Into<String>) -> PpStatus {
    set_error(msg.into());
    status
}

fn from_core(e: Error) -> PpStatus {
    let status = PpStatus::from(&e);
    set_error(e.to_string());
    status
}

fn guard(body: impl FnOnce() -> PpStatus) -> PpStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(_) => fail(PpStatus::Panic, "internal panic"),
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(PpStatus::NullPointer, concat!("`", stringify!($p), "` is NULL"));
        })+
    };
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, PpStatus> {
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(fail(PpStatus::InvalidArgument, "path is not valid UTF-8")),
    }
}

fn precision_arg(bits: u32) -> Result<Precision, PpStatus> {
    if bits == 0 {
        Ok(Precision::Full)
    } else {
        Precision::bits(bits).map_err(from_core)
    }
}

fn topology() -> NetworkTopology {
    NetworkTopology::default()
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn pp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Number of trainable parameters in the default network.
#[no_mangle]
pub extern "C" fn pp_param_count() -> usize {
    topology().n_params()
}

/// Tile operations per forward pass of the default network.
#[no_mangle]
pub extern "C" fn pp_tile_ops_per_forward() -> u64 {
    topology().tile_ops_per_forward()
}

/// Exact solution at `(x, t)`.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn pp_analytic_solution(x: f64, t: f64, out: *mut f64) -> PpStatus {
    guard(|| {
        non_null!(out);
        match pde::analytic_solution(x, t) {
            Ok(u) => {
                *out = u;
                PpStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Builds a bank from synthesized ring curves. `bits` = 0 means full
/// precision; otherwise it applies to inputs, voltages and detectors alike.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn pp_bank_new_synth(
    sigma_fab: f64,
    hw_seed: u64,
    bits: u32,
    sigma_read: f64,
    out: *mut *mut PpBank,
) -> PpStatus {
    guard(|| {
        non_null!(out);
        let precision = match precision_arg(bits) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let noise = NoiseSpec {
            sigma_read,
            sigma_fab,
            seed: hw_seed,
        };
        let bank = synth_weight_bank(sigma_fab, hw_seed)
            .and_then(|b| b.with_quant(QuantSpec::uniform(precision)))
            .and_then(|b| b.with_noise(noise));
        match bank {
            Ok(b) => {
                *out = Box::into_raw(Box::new(PpBank(b)));
                PpStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Builds the bank described by a run configuration file.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pp_bank_from_config(config_path: *const c_char, out: *mut *mut PpBank) -> PpStatus {
    guard(|| {
        non_null!(config_path, out);
        let path = match path_arg(config_path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match RunConfig::load(&path).and_then(|c| c.bank()) {
            Ok(b) => {
                *out = Box::into_raw(Box::new(PpBank(b)));
                PpStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Realized weight of ring `channel` (0..4) at heater voltage `v`.
///
/// # Safety
/// `bank` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pp_bank_channel_weight(
    bank: *const PpBank,
    channel: usize,
    v: f64,
    out: *mut f64,
) -> PpStatus {
    guard(|| {
        non_null!(bank, out);
        match (*bank).0.channel_weight(channel, v) {
            Ok(w) => {
                *out = w;
                PpStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `bank` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pp_bank_free(bank: *mut PpBank) {
    if !bank.is_null() {
        drop(Box::from_raw(bank));
    }
}

/// Random initial parameters for `bank`.
///
/// # Safety
/// `bank` must come from this library; `out` must be a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pp_params_init(bank: *const PpBank, seed: u64, out: *mut *mut PpParams) -> PpStatus {
    guard(|| {
        non_null!(bank, out);
        let p = init_params(&topology(), seed, &(*bank).0);
        *out = Box::into_raw(Box::new(PpParams(p)));
        PpStatus::Ok
    })
}

/// Parameters from a flat array of [`pp_param_count`] values (voltages in
/// layer order, each layer input-major, then biases).
///
/// # Safety
/// `values` must point to `len` doubles; `out` must be a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pp_params_from_values(values: *const f64, len: usize, out: *mut *mut PpParams) -> PpStatus {
    guard(|| {
        non_null!(values, out);
        let v = std::slice::from_raw_parts(values, len).to_vec();
        match ParameterVector::from_flat(topology(), v) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(PpParams(p)));
                PpStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Parameters read from a checkpoint CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pp_params_load_checkpoint(path: *const c_char, out: *mut *mut PpParams) -> PpStatus {
    guard(|| {
        non_null!(path, out);
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => return from_core(Error::Io { path, source: e }),
        };
        match Checkpoint::from_csv(&text, &topology()) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(PpParams(c.params)));
                PpStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Copies the flat parameter values into `buf`. `len` must be at least
/// [`pp_param_count`].
///
/// # Safety
/// `params` must come from this library; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pp_params_copy(params: *const PpParams, buf: *mut f64, len: usize) -> PpStatus {
    guard(|| {
        non_null!(params, buf);
        let src = (*params).0.as_slice();
        if len < src.len() {
            return fail(
                PpStatus::BufferTooSmall,
                format!("buffer holds {len} values, {} needed", src.len()),
            );
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        PpStatus::Ok
    })
}

/// # Safety
/// `params` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pp_params_free(params: *mut PpParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// One forward pass at `(x, t)`. Read noise is drawn from the stream keyed by
/// `noise_key`, starting at position 0. `tile_ops` may be NULL.
///
/// # Safety
/// Handles must come from this library; `u` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pp_forward(
    params: *const PpParams,
    bank: *const PpBank,
    x: f64,
    t: f64,
    noise_key: u64,
    u: *mut f64,
    tile_ops: *mut u64,
) -> PpStatus {
    guard(|| {
        non_null!(params, bank, u);
        let mut stream = NoiseStream::new(noise_key);
        match forward(&(*params).0, x, t, &(*bank).0, &mut stream) {
            Ok((value, ops)) => {
                *u = value;
                if !tile_ops.is_null() {
                    *tile_ops = ops;
                }
                PpStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Runs `train` for a configuration file and writes its outputs. With
/// `force` = 0 existing outputs are not overwritten. On divergence the
/// partial outputs are written and no report is returned.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pp_train(config_path: *const c_char, force: i32, out: *mut *mut PpReport) -> PpStatus {
    guard(|| {
        non_null!(config_path, out);
        let path = match path_arg(config_path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match RunConfig::load(&path).and_then(|c| run_training(&c, force != 0)) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(PpReport(r)));
                PpStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Number of iterations recorded.
///
/// # Safety
/// `report` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn pp_report_iterations(report: *const PpReport) -> usize {
    if report.is_null() {
        return 0;
    }
    (*report).0.history.records.len()
}

/// Relative L2 error of the trained model on the evaluation grid.
///
/// # Safety
/// `report` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pp_report_l2_rel(report: *const PpReport, out: *mut f64) -> PpStatus {
    guard(|| {
        non_null!(report, out);
        *out = (*report).0.grid.l2_rel;
        PpStatus::Ok
    })
}

/// Copies the trained parameters into a new handle.
///
/// # Safety
/// `report` must come from this library; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn pp_report_params(report: *const PpReport, out: *mut *mut PpParams) -> PpStatus {
    guard(|| {
        non_null!(report, out);
        *out = Box::into_raw(Box::new(PpParams((*report).0.history.params.clone())));
        PpStatus::Ok
    })
}

/// # Safety
/// `report` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pp_report_free(report: *mut PpReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
