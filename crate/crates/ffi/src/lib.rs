//! C ABI over `v2v-core`.
//!
//! Every fallible function returns a [`V2vStatus`]; on failure the message is
//! available from [`v2v_last_error`] on the same thread. Objects are opaque
//! handles released with their matching `_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use v2v_core::channel::capacity;
use v2v_core::dqn::{Checkpoint, QNetwork};
use v2v_core::harness::{self, PolicySpec};
use v2v_core::mdp::{BroadcastEnv, Environment, UnicastEnv};
use v2v_core::units::dbm_to_mw;
use v2v_core::{Error, Mode, RunConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V2vStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    OutOfRange = 4,
    DimensionMismatch = 5,
    Io = 6,
    Checkpoint = 7,
    Diverged = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V2vMode {
    Unicast = 0,
    Broadcast = 1,
}

impl From<V2vMode> for Mode {
    fn from(m: V2vMode) -> Self {
        match m {
            V2vMode::Unicast => Mode::Unicast,
            V2vMode::Broadcast => Mode::Broadcast,
        }
    }
}

/// Run configuration.
pub struct V2vConfig(RunConfig);

/// Simulation environment in either mode.
pub struct V2vEnv(Box<dyn Environment + Send>);

/// Trained Q-network.
pub struct V2vQNetwork(QNetwork);

/// Chooses an action index for one decision, given its feature vector.
pub type V2vChooseFn = Option<extern "C" fn(user: *mut c_void, features: *const f64, len: usize) -> usize>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> V2vStatus {
    match e {
        Error::Config(_) | Error::TomlDe(_) | Error::TomlSer(_) | Error::LaneCapacity { .. } | Error::TooFewVehicles { .. } => {
            V2vStatus::Config
        }
        Error::ActionOutOfRange { .. } | Error::InactiveLink(_) | Error::NotHeld { .. } | Error::Unallocated(_) => {
            V2vStatus::OutOfRange
        }
        Error::DimensionMismatch { .. } => V2vStatus::DimensionMismatch,
        Error::Io { .. } | Error::Csv(_) => V2vStatus::Io,
        Error::Checkpoint(_) => V2vStatus::Checkpoint,
        Error::Diverged { .. } => V2vStatus::Diverged,
        _ => V2vStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (V2vStatus, String)>) -> V2vStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => V2vStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            V2vStatus::Panic
        }
    }
}

fn core<T>(r: v2v_core::Result<T>) -> Result<T, (V2vStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (V2vStatus, String)> {
    p.as_ref().ok_or_else(|| (V2vStatus::NullPointer, format!("{name} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (V2vStatus, String)> {
    p.as_mut().ok_or_else(|| (V2vStatus::NullPointer, format!("{name} is null")))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, (V2vStatus, String)> {
    if p.is_null() {
        return Err((V2vStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (V2vStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn v2v_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn v2v_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Shannon capacity `bandwidth * log2(1 + sinr)` in bits/s.
#[no_mangle]
pub extern "C" fn v2v_capacity(sinr: f64, bandwidth_hz: f64) -> f64 {
    capacity(sinr, bandwidth_hz)
}

#[no_mangle]
pub extern "C" fn v2v_dbm_to_mw(dbm: f64) -> f64 {
    dbm_to_mw(dbm)
}

#[no_mangle]
pub unsafe extern "C" fn v2v_config_default(mode: V2vMode, out: *mut *mut V2vConfig) -> V2vStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = Box::into_raw(Box::new(V2vConfig(RunConfig::for_mode(mode.into()))));
        Ok(())
    })
}

/// Parses a TOML configuration; missing keys take their defaults.
#[no_mangle]
pub unsafe extern "C" fn v2v_config_from_toml(text: *const c_char, out: *mut *mut V2vConfig) -> V2vStatus {
    guard(|| {
        let text = c_str(text, "text")?;
        let out = deref_mut(out, "out")?;
        *out = Box::into_raw(Box::new(V2vConfig(core(RunConfig::from_toml_str(text))?)));
        Ok(())
    })
}

/// Serializes `cfg` as TOML into a new string freed with [`v2v_string_free`].
#[no_mangle]
pub unsafe extern "C" fn v2v_config_to_toml(cfg: *const V2vConfig, out: *mut *mut c_char) -> V2vStatus {
    guard(|| {
        let cfg = deref(cfg, "cfg")?;
        let out = deref_mut(out, "out")?;
        let text = core(cfg.0.to_toml_string())?;
        *out = CString::new(text).map_err(|e| (V2vStatus::InvalidArgument, e.to_string()))?.into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn v2v_config_set_vehicles(cfg: *mut V2vConfig, n_vehicles: usize) -> V2vStatus {
    guard(|| {
        deref_mut(cfg, "cfg")?.0.n_vehicles = n_vehicles;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn v2v_config_set_train_episodes(cfg: *mut V2vConfig, episodes: usize) -> V2vStatus {
    guard(|| {
        deref_mut(cfg, "cfg")?.0.train.episodes = episodes;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn v2v_config_free(cfg: *mut V2vConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Creates an environment for `cfg`'s mode seeded with `seed`.
#[no_mangle]
pub unsafe extern "C" fn v2v_env_new(cfg: *const V2vConfig, seed: u64, out: *mut *mut V2vEnv) -> V2vStatus {
    guard(|| {
        let cfg = &deref(cfg, "cfg")?.0;
        let out = deref_mut(out, "out")?;
        let env: Box<dyn Environment + Send> = match cfg.mode {
            Mode::Unicast => Box::new(core(UnicastEnv::new(cfg, seed))?),
            Mode::Broadcast => Box::new(core(BroadcastEnv::new(cfg, seed))?),
        };
        *out = Box::into_raw(Box::new(V2vEnv(env)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn v2v_env_free(env: *mut V2vEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

#[no_mangle]
pub unsafe extern "C" fn v2v_env_observation_dim(env: *const V2vEnv, out: *mut usize) -> V2vStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(env, "env")?.0.observation_dim();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn v2v_env_action_count(env: *const V2vEnv, out: *mut usize) -> V2vStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(env, "env")?.0.action_count();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn v2v_env_is_done(env: *const V2vEnv, out: *mut bool) -> V2vStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(env, "env")?.0.is_done();
        Ok(())
    })
}

/// Starts a new episode.
#[no_mangle]
pub unsafe extern "C" fn v2v_env_reset(env: *mut V2vEnv) -> V2vStatus {
    guard(|| core(deref_mut(env, "env")?.0.reset()))
}

/// Advances one slot. `choose` is called once per decision. The sum of the
/// decisions' rewards and their count are written to the optional outputs.
#[no_mangle]
pub unsafe extern "C" fn v2v_env_step(
    env: *mut V2vEnv,
    choose: V2vChooseFn,
    user: *mut c_void,
    reward_sum: *mut f64,
    decisions: *mut usize,
) -> V2vStatus {
    guard(|| {
        let env = deref_mut(env, "env")?;
        let choose = choose.ok_or((V2vStatus::NullPointer, "choose is null".to_string()))?;
        if env.0.is_done() {
            return Err((V2vStatus::InvalidArgument, "episode is over; reset first".into()));
        }
        let exps = core(env.0.step(&mut |x: &[f64]| choose(user, x.as_ptr(), x.len())))?;
        if let Some(r) = reward_sum.as_mut() {
            *r = exps.iter().map(|e| e.reward).sum();
        }
        if let Some(d) = decisions.as_mut() {
            *d = exps.len();
        }
        Ok(())
    })
}

/// Loads the network stored in a checkpoint file.
#[no_mangle]
pub unsafe extern "C" fn v2v_qnet_load(path: *const c_char, out: *mut *mut V2vQNetwork) -> V2vStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let out = deref_mut(out, "out")?;
        let ckpt = core(Checkpoint::load(Path::new(path)))?;
        *out = Box::into_raw(Box::new(V2vQNetwork(ckpt.network)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn v2v_qnet_free(net: *mut V2vQNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

#[no_mangle]
pub unsafe extern "C" fn v2v_qnet_input_dim(net: *const V2vQNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.input_dim())
}

#[no_mangle]
pub unsafe extern "C" fn v2v_qnet_output_dim(net: *const V2vQNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.output_dim())
}

/// Q-values of `input` written to `output`, which must hold `output_len`
/// values equal to the network's output dimension.
#[no_mangle]
pub unsafe extern "C" fn v2v_qnet_forward(
    net: *const V2vQNetwork,
    input: *const f64,
    input_len: usize,
    output: *mut f64,
    output_len: usize,
) -> V2vStatus {
    guard(|| {
        let net = &deref(net, "net")?.0;
        if input.is_null() || output.is_null() {
            return Err((V2vStatus::NullPointer, "input or output is null".into()));
        }
        let x = std::slice::from_raw_parts(input, input_len);
        let q = core(net.forward(x))?;
        if output_len != q.len() {
            return Err((
                V2vStatus::DimensionMismatch,
                Error::DimensionMismatch { expected: q.len(), got: output_len }.to_string(),
            ));
        }
        std::slice::from_raw_parts_mut(output, output_len).copy_from_slice(&q);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn v2v_qnet_greedy(
    net: *const V2vQNetwork,
    input: *const f64,
    input_len: usize,
    action: *mut usize,
) -> V2vStatus {
    guard(|| {
        let net = &deref(net, "net")?.0;
        if input.is_null() {
            return Err((V2vStatus::NullPointer, "input is null".into()));
        }
        let a = core(net.greedy(std::slice::from_raw_parts(input, input_len)))?;
        *deref_mut(action, "action")? = a;
        Ok(())
    })
}

/// Trains with `cfg` and writes `checkpoint.bin` and `training_curve.csv`
/// into `out_dir`.
#[no_mangle]
pub unsafe extern "C" fn v2v_train(cfg: *const V2vConfig, out_dir: *const c_char) -> V2vStatus {
    guard(|| {
        let cfg = &deref(cfg, "cfg")?.0;
        let dir = c_str(out_dir, "out_dir")?;
        let outcome = core(harness::train(cfg))?;
        core(harness::write_outputs(Path::new(dir), &outcome))
    })
}

/// Greedy evaluation of `net` with `cfg`; writes the mean V2I sum rate
/// (bits/s) and satisfaction probability over the configured seeds.
#[no_mangle]
pub unsafe extern "C" fn v2v_evaluate(
    cfg: *const V2vConfig,
    net: *const V2vQNetwork,
    v2i_rate_bps: *mut f64,
    satisfied: *mut f64,
) -> V2vStatus {
    guard(|| {
        let cfg = &deref(cfg, "cfg")?.0;
        let net = &deref(net, "net")?.0;
        let report = core(harness::evaluate(cfg, &PolicySpec::Dqn(net.clone())))?;
        *deref_mut(v2i_rate_bps, "v2i_rate_bps")? = report.v2i_rate_bps.mean;
        *deref_mut(satisfied, "satisfied")? = report.satisfied.mean;
        Ok(())
    })
}
