use std::ffi::{c_void, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use v2v_ffi::*;

fn last_error() -> String {
    let p = v2v_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

extern "C" fn first_action(_user: *mut c_void, _features: *const f64, _len: usize) -> usize {
    0
}

extern "C" fn counting(user: *mut c_void, features: *const f64, len: usize) -> usize {
    let calls = unsafe { &mut *(user as *mut Vec<usize>) };
    assert!(!features.is_null());
    calls.push(len);
    0
}

extern "C" fn out_of_range(_user: *mut c_void, _features: *const f64, _len: usize) -> usize {
    usize::MAX
}

fn small_config(mode: V2vMode) -> *mut V2vConfig {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(v2v_config_default(mode, &mut cfg), V2vStatus::Ok);
        assert_eq!(v2v_config_set_vehicles(cfg, 6), V2vStatus::Ok);
    }
    cfg
}

#[test]
fn scalar_helpers() {
    assert_eq!(v2v_capacity(3.0, 1e6), 2e6);
    assert!((v2v_dbm_to_mw(23.0) - 199.526_231_496_887_96).abs() < 1e-9);
}

#[test]
fn unicast_episode_through_callbacks() {
    unsafe {
        let cfg = small_config(V2vMode::Unicast);
        let mut env = ptr::null_mut();
        assert_eq!(v2v_env_new(cfg, 7, &mut env), V2vStatus::Ok);
        let (mut dim, mut actions) = (0usize, 0usize);
        assert_eq!(v2v_env_observation_dim(env, &mut dim), V2vStatus::Ok);
        assert_eq!(v2v_env_action_count(env, &mut actions), V2vStatus::Ok);
        assert_eq!((dim, actions), (18, 12));

        let mut calls: Vec<usize> = Vec::new();
        let mut slots = 0;
        let mut done = false;
        while !done {
            let (mut r, mut n) = (0.0, 0usize);
            let user = &mut calls as *mut Vec<usize> as *mut c_void;
            assert_eq!(v2v_env_step(env, Some(counting), user, &mut r, &mut n), V2vStatus::Ok);
            assert!(r.is_finite());
            slots += 1;
            assert_eq!(v2v_env_is_done(env, &mut done), V2vStatus::Ok);
        }
        assert_eq!(slots, 100);
        assert!(calls.iter().all(|&l| l == 18));

        assert_eq!(v2v_env_step(env, Some(first_action), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), V2vStatus::InvalidArgument);
        assert_eq!(v2v_env_reset(env), V2vStatus::Ok);
        assert_eq!(
            v2v_env_step(env, Some(out_of_range), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()),
            V2vStatus::OutOfRange
        );
        assert!(last_error().contains("outside action space"));
        v2v_env_free(env);
        v2v_config_free(cfg);
    }
}

#[test]
fn broadcast_env_dimensions() {
    unsafe {
        let cfg = small_config(V2vMode::Broadcast);
        let mut env = ptr::null_mut();
        assert_eq!(v2v_env_new(cfg, 3, &mut env), V2vStatus::Ok);
        let mut actions = 0;
        assert_eq!(v2v_env_action_count(env, &mut actions), V2vStatus::Ok);
        assert_eq!(actions, 5);
        v2v_env_free(env);
        v2v_config_free(cfg);
    }
}

#[test]
fn errors_and_null_handles() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let bad = CString::new("n_vehicles = \"many\"").unwrap();
        assert_eq!(v2v_config_from_toml(bad.as_ptr(), &mut cfg), V2vStatus::Config);
        assert!(cfg.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(v2v_config_from_toml(ptr::null(), &mut cfg), V2vStatus::NullPointer);
        assert_eq!(v2v_env_reset(ptr::null_mut()), V2vStatus::NullPointer);

        let cfg = small_config(V2vMode::Unicast);
        assert_eq!(v2v_config_set_vehicles(cfg, 1), V2vStatus::Ok);
        let mut env = ptr::null_mut();
        assert_eq!(v2v_env_new(cfg, 1, &mut env), V2vStatus::Config);
        assert!(env.is_null());
        v2v_config_free(cfg);
        v2v_config_free(ptr::null_mut());
        v2v_env_free(ptr::null_mut());
        v2v_qnet_free(ptr::null_mut());
    }
}

#[test]
fn config_toml_round_trip() {
    unsafe {
        let cfg = small_config(V2vMode::Broadcast);
        let mut text = ptr::null_mut();
        assert_eq!(v2v_config_to_toml(cfg, &mut text), V2vStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(v2v_config_from_toml(text, &mut back), V2vStatus::Ok);
        let mut text2 = ptr::null_mut();
        assert_eq!(v2v_config_to_toml(back, &mut text2), V2vStatus::Ok);
        assert_eq!(CStr::from_ptr(text), CStr::from_ptr(text2));
        assert!(CStr::from_ptr(text).to_str().unwrap().contains("mode = \"broadcast\""));
        v2v_string_free(text);
        v2v_string_free(text2);
        v2v_config_free(cfg);
        v2v_config_free(back);
    }
}

#[test]
fn train_then_load_and_query_network() {
    let dir = tempfile::tempdir().unwrap();
    let toml = CString::new(
        "n_vehicles = 5\n[dqn]\nhidden_layers = [8]\nbatch_size = 4\n[train]\nepisodes = 1\n",
    )
    .unwrap();
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(v2v_config_from_toml(toml.as_ptr(), &mut cfg), V2vStatus::Ok);
        let out = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(v2v_train(cfg, out.as_ptr()), V2vStatus::Ok);

        let path = CString::new(dir.path().join("checkpoint.bin").to_str().unwrap()).unwrap();
        let mut net = ptr::null_mut();
        assert_eq!(v2v_qnet_load(path.as_ptr(), &mut net), V2vStatus::Ok);
        assert_eq!((v2v_qnet_input_dim(net), v2v_qnet_output_dim(net)), (18, 12));
        let x = [0.1; 18];
        let mut q = [0.0; 12];
        assert_eq!(v2v_qnet_forward(net, x.as_ptr(), 18, q.as_mut_ptr(), 12), V2vStatus::Ok);
        let mut a = 99;
        assert_eq!(v2v_qnet_greedy(net, x.as_ptr(), 18, &mut a), V2vStatus::Ok);
        let best = (0..12).fold(0, |b, i| if q[i] > q[b] { i } else { b });
        assert_eq!(a, best);
        assert_eq!(v2v_qnet_forward(net, x.as_ptr(), 17, q.as_mut_ptr(), 12), V2vStatus::DimensionMismatch);
        assert_eq!(v2v_qnet_forward(net, x.as_ptr(), 18, q.as_mut_ptr(), 11), V2vStatus::DimensionMismatch);

        let missing = CString::new(dir.path().join("nope.bin").to_str().unwrap()).unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(v2v_qnet_load(missing.as_ptr(), &mut none), V2vStatus::Io);
        v2v_qnet_free(net);
        v2v_config_free(cfg);
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/v2v.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["v2v_env_step", "v2v_qnet_forward", "V2V_STATUS_OK", "V2vChooseFn", "v2v_last_error"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).output() else {
        eprintln!("cc not available; skipping compile check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
