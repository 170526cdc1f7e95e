//! C ABI over the `pdebc` environments.
//!
//! Environments are opaque handles created from a JSON configuration
//! document. Every fallible call returns a [`PdebcStatus`]; the message of the
//! most recent failure on the calling thread is available through
//! [`pdebc_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use pdebc::env::{Env, EnvConfig};
use pdebc::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdebcStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Input = 3,
    State = 4,
    BlowUp = 5,
    BufferTooSmall = 6,
    Panic = 7,
    Other = 8,
}

/// Scalars produced by one step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PdebcStepResult {
    pub reward: f64,
    pub l2: f64,
    pub applied_action: f64,
    pub terminated: bool,
    pub truncated: bool,
}

/// Opaque environment handle.
pub struct PdebcEnv {
    env: Env,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> PdebcStatus {
    match e {
        Error::Config(_) | Error::Parse(_) => PdebcStatus::Config,
        Error::Input(_) => PdebcStatus::Input,
        Error::State(_) => PdebcStatus::State,
        Error::BlowUp { .. } => PdebcStatus::BlowUp,
        _ => PdebcStatus::Other,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (PdebcStatus, String)>) -> PdebcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdebcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PdebcStatus::Panic
        }
    }
}

fn lift(e: Error) -> (PdebcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PdebcStatus, String) {
    (PdebcStatus::NullPointer, format!("{what} is null"))
}

/// Copies `src` into the caller buffer, failing if it is too small.
///
/// # Safety
/// `dst` must point to `len` writable doubles.
unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> Result<(), (PdebcStatus, String)> {
    if dst.is_null() {
        return Err(null("observation buffer"));
    }
    if len < src.len() {
        return Err((PdebcStatus::BufferTooSmall, format!("buffer holds {len} values, need {}", src.len())));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Creates an environment from a NUL-terminated JSON document.
///
/// # Safety
/// `config_json` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pdebc_env_new(config_json: *const c_char, out: *mut *mut PdebcEnv) -> PdebcStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null("config"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|e| (PdebcStatus::Config, format!("config is not UTF-8: {e}")))?;
        let cfg = EnvConfig::from_json_str(text).map_err(lift)?;
        let env = Env::new(cfg).map_err(lift)?;
        *out = Box::into_raw(Box::new(PdebcEnv { env }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `env` must come from [`pdebc_env_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pdebc_env_free(env: *mut PdebcEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Number of doubles in an observation (0 for a null handle).
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdebc_env_observation_len(env: *const PdebcEnv) -> usize {
    env.as_ref().map_or(0, |h| h.env.observation_space().shape.iter().product())
}

/// Number of control steps in a full episode (0 for a null handle).
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdebc_env_episode_steps(env: *const PdebcEnv) -> usize {
    env.as_ref().map_or(0, |h| h.env.episode_steps())
}

/// # Safety
/// `env` must be a live handle; `lo` and `hi` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pdebc_env_action_bounds(env: *const PdebcEnv, lo: *mut f64, hi: *mut f64) -> PdebcStatus {
    guard(|| {
        let h = env.as_ref().ok_or_else(|| null("env"))?;
        if lo.is_null() || hi.is_null() {
            return Err(null("bound pointer"));
        }
        let s = h.env.action_space();
        *lo = s.low;
        *hi = s.high;
        Ok(())
    })
}

/// Starts an episode and writes the first observation.
///
/// # Safety
/// `env` must be a live handle and `obs` point to `obs_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pdebc_env_reset(env: *mut PdebcEnv, seed: u64, obs: *mut f64, obs_len: usize) -> PdebcStatus {
    guard(|| {
        let h = env.as_mut().ok_or_else(|| null("env"))?;
        let o = h.env.reset(seed).map_err(lift)?;
        copy_out(&o, obs, obs_len)
    })
}

/// Advances one control step, writing the next observation and the step scalars.
///
/// # Safety
/// `env` must be a live handle, `obs` point to `obs_len` writable doubles and `result` be valid.
#[no_mangle]
pub unsafe extern "C" fn pdebc_env_step(
    env: *mut PdebcEnv,
    action: f64,
    obs: *mut f64,
    obs_len: usize,
    result: *mut PdebcStepResult,
) -> PdebcStatus {
    guard(|| {
        let h = env.as_mut().ok_or_else(|| null("env"))?;
        if result.is_null() {
            return Err(null("result"));
        }
        let out = h.env.step(action).map_err(lift)?;
        copy_out(&out.observation, obs, obs_len)?;
        *result = PdebcStepResult {
            reward: out.reward,
            l2: out.info.l2,
            applied_action: out.info.applied_action,
            terminated: out.terminated,
            truncated: out.truncated,
        };
        Ok(())
    })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated, truncated to fit).
///
/// Returns the full message length excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pdebc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
