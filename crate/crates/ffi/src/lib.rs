//! C ABI over `lrop`: opaque kernel and table handles, integer status codes
//! and a per-thread last-error message.
//!
//! Every function returns an [`LropStatus`]; results go through out
//! pointers. Handles are created by `*_new`/`*_simulate` and released by the
//! matching `*_free`. Passing a freed handle is undefined behaviour.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use lrop::cli::{exit_code, run, ExperimentConfig, RunOptions, Subcommand};
use lrop::percolation::{estimate_two_point_transform, EstimatorTable, McOptions, ProbeSet};
use lrop::spectral::{pc_prediction, DiagramOptions};
use lrop::{Error, KernelSpec, StepKernel};

/// Status codes. Values 2 to 4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LropStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Resource = 3,
    Numerical = 4,
    Panic = 5,
}

/// Opaque step kernel.
pub struct LropKernel(StepKernel);

/// Opaque two-point estimator table.
pub struct LropTable(EstimatorTable);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LropStatus {
    match exit_code(e) {
        2 => LropStatus::Config,
        3 => LropStatus::Resource,
        _ => LropStatus::Numerical,
    }
}

/// Runs `f`, mapping errors and panics to a status and the last error.
fn guard(f: impl FnOnce() -> Result<(), LropStatus>) -> LropStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LropStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            LropStatus::Panic
        }
    }
}

fn lib<T>(r: lrop::Result<T>) -> Result<T, LropStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null() -> LropStatus {
    set_error("null pointer argument".into());
    LropStatus::NullPointer
}

unsafe fn get<'a, T>(p: *const T) -> Result<&'a T, LropStatus> {
    p.as_ref().ok_or_else(null)
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), LropStatus> {
    if out.is_null() {
        return Err(null());
    }
    out.write(v);
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize) -> Result<&'a [T], LropStatus> {
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, LropStatus> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string is not UTF-8".into());
        LropStatus::Config
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lrop_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL; 0 when the last call succeeded.
#[no_mangle]
pub extern "C" fn lrop_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len - 1` bytes). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lrop_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |c| c.as_bytes());
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Builds the power-law kernel. `tail_tol <= 0` keeps the default.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn lrop_kernel_new(
    d: usize,
    alpha: f64,
    l: u32,
    radius: u64,
    tail_tol: f64,
    out: *mut *mut LropKernel,
) -> LropStatus {
    guard(|| {
        let mut spec = KernelSpec::power_law(d, alpha, l, radius);
        if tail_tol > 0.0 {
            spec = spec.with_tail_tol(tail_tol);
        }
        let k = lib(StepKernel::build(spec))?;
        put(out, Box::into_raw(Box::new(LropKernel(k))))
    })
}

/// Releases a kernel; null is ignored.
///
/// # Safety
/// `k` must come from [`lrop_kernel_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lrop_kernel_free(k: *mut LropKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Spatial dimension of the kernel.
///
/// # Safety
/// `k` must be a live kernel handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lrop_kernel_dim(k: *const LropKernel, out: *mut usize) -> LropStatus {
    guard(|| put(out, get(k)?.0.d()))
}

/// `D(x)` at the `d` coordinates `site`.
///
/// # Safety
/// `site` must hold `d` values; `k` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lrop_kernel_mass(
    k: *const LropKernel,
    site: *const i64,
    d: usize,
    out: *mut f64,
) -> LropStatus {
    guard(|| {
        let k = &get(k)?.0;
        if d != k.d() {
            set_error(format!("site has {d} coordinates, kernel has d = {}", k.d()));
            return Err(LropStatus::Config);
        }
        put(out, k.mass(slice(site, d)?))
    })
}

/// `D̂(k)` at the `d` components `kvec`.
///
/// # Safety
/// `kvec` must hold `d` values; `k` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lrop_kernel_fourier(
    k: *const LropKernel,
    kvec: *const f64,
    d: usize,
    out: *mut f64,
) -> LropStatus {
    guard(|| {
        let k = &get(k)?.0;
        if d != k.d() {
            set_error(format!("wavevector has {d} components, kernel has d = {}", k.d()));
            return Err(LropStatus::Config);
        }
        put(out, k.fourier(slice(kvec, d)?))
    })
}

/// Bound on the mass discarded by truncation.
///
/// # Safety
/// `k` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lrop_kernel_tail_mass(k: *const LropKernel, out: *mut f64) -> LropStatus {
    guard(|| put(out, get(k)?.0.tail_mass_bound()))
}

/// Critical-point prediction with default diagram settings.
///
/// # Safety
/// `k` live; both out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn lrop_pc_prediction(
    k: *const LropKernel,
    out_value: *mut f64,
    out_uncertainty: *mut f64,
) -> LropStatus {
    guard(|| {
        let pred = lib(pc_prediction(&get(k)?.0, &DiagramOptions::default()))?;
        put(out_value, pred.value)?;
        put(out_uncertainty, pred.uncertainty)
    })
}

/// Monte Carlo estimate of `Z_p(0; n)`, `n <= n_max`, from `replicas`
/// clusters. Deterministic in `seed`.
///
/// # Safety
/// `k` live; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn lrop_simulate(
    k: *const LropKernel,
    p: f64,
    n_max: usize,
    replicas: u64,
    seed: u64,
    out: *mut *mut LropTable,
) -> LropStatus {
    guard(|| {
        let k = &get(k)?.0;
        let probes = ProbeSet::Fixed {
            k: vec![vec![0.0; k.d()]],
        };
        let t = lib(estimate_two_point_transform(
            k,
            p,
            n_max,
            &probes,
            replicas,
            seed,
            &McOptions::default(),
        ))?;
        put(out, Box::into_raw(Box::new(LropTable(t))))
    })
}

/// Releases a table; null is ignored.
///
/// # Safety
/// `t` must come from [`lrop_simulate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lrop_table_free(t: *mut LropTable) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Replicas folded into the table.
///
/// # Safety
/// `t` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lrop_table_replicas(t: *const LropTable, out: *mut u64) -> LropStatus {
    guard(|| put(out, get(t)?.0.replicas()))
}

/// Largest time in the table.
///
/// # Safety
/// `t` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lrop_table_n_max(t: *const LropTable, out: *mut usize) -> LropStatus {
    guard(|| put(out, get(t)?.0.n_max))
}

/// `Ẑ(0; n)` and its standard error.
///
/// # Safety
/// `t` live; out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn lrop_table_z0(
    t: *const LropTable,
    n: usize,
    out_mean: *mut f64,
    out_stderr: *mut f64,
) -> LropStatus {
    guard(|| {
        let t = &get(t)?.0;
        if n > t.n_max {
            set_error(format!("n = {n} exceeds n_max = {}", t.n_max));
            return Err(LropStatus::Config);
        }
        let c = t.cell(t.zero_probe(), n);
        put(out_mean, c.mean_re)?;
        put(out_stderr, c.stderr)
    })
}

/// Adds the replicas of `src` into `dst`.
///
/// # Safety
/// Both handles live and distinct.
#[no_mangle]
pub unsafe extern "C" fn lrop_table_merge(dst: *mut LropTable, src: *const LropTable) -> LropStatus {
    guard(|| {
        let src = &get(src)?.0;
        let dst = &mut dst.as_mut().ok_or_else(null)?.0;
        lib(dst.merge(src))
    })
}

/// Runs one subcommand (for example `"pc-formula"`) from a TOML config,
/// writing results below `out_root`.
///
/// # Safety
/// All strings must be valid NUL-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn lrop_run(
    subcommand: *const c_char,
    config_toml: *const c_char,
    out_root: *const c_char,
) -> LropStatus {
    guard(|| {
        let sub = match text(subcommand)? {
            "kernel" => Subcommand::Kernel,
            "spectral" => Subcommand::Spectral,
            "pc-formula" => Subcommand::PcFormula,
            "simulate" => Subcommand::Simulate,
            "pc-search" => Subcommand::PcSearch,
            "analyze" => Subcommand::Analyze,
            "oracle-check" => Subcommand::OracleCheck,
            other => {
                set_error(format!("unknown subcommand `{other}`"));
                return Err(LropStatus::Config);
            }
        };
        let cfg = lib(ExperimentConfig::from_toml(text(config_toml)?))?;
        let opts = RunOptions {
            root: PathBuf::from(text(out_root)?),
            ..Default::default()
        };
        lib(run(sub, &cfg, &opts)).map(|_| ())
    })
}
