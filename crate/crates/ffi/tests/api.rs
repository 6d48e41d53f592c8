use std::ffi::{CStr, CString};
use std::ptr;

use rwre_ffi::*;

const SPEC: &str = r#"{"d":2,"increment_law":{"kind":"rademacher"},"delta_law":{"kind":"bernoulli","p":0.5},"seed":3}"#;

fn env() -> *mut RwreEnvironment {
    let spec = CString::new(SPEC).unwrap();
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { rwre_env_new(spec.as_ptr(), &mut env) }, RwreStatus::Ok);
    assert!(!env.is_null());
    env
}

fn last_error() -> String {
    let p = rwre_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(rwre_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn environment_queries() {
    let env = env();
    let mut d = 0u32;
    assert_eq!(unsafe { rwre_env_dim(env, &mut d) }, RwreStatus::Ok);
    assert_eq!(d, 2);

    let mut s0 = 1.0;
    assert_eq!(unsafe { rwre_env_s_value(env, 0, &mut s0) }, RwreStatus::Ok);
    assert_eq!(s0, 0.0);

    let origin = [0i32, 0];
    let mut v = f64::NAN;
    assert_eq!(
        unsafe { rwre_env_potential(env, origin.as_ptr(), 2, &mut v) },
        RwreStatus::Ok
    );
    assert!(v.is_finite());

    let mut c = 0.0;
    assert_eq!(
        unsafe { rwre_env_capacitance(env, origin.as_ptr(), 2, &mut c) },
        RwreStatus::Ok
    );
    assert!(c > 0.0);

    let mut marks = RwreLandmarks::default();
    assert_eq!(
        unsafe { rwre_env_landmarks(env, 1_000_000, &mut marks) },
        RwreStatus::Ok
    );
    if marks.found {
        assert!(marks.m_n <= marks.big_m);
    }
    unsafe { rwre_env_free(env) };
}

#[test]
fn errors_carry_status_and_message() {
    let bad =
        CString::new(r#"{"d":0,"increment_law":{"kind":"rademacher"},"delta_law":{"kind":"zero"},"seed":1}"#).unwrap();
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { rwre_env_new(bad.as_ptr(), &mut env) }, RwreStatus::InvalidSpec);
    assert!(env.is_null());
    assert!(last_error().contains("dimension"));

    let junk = CString::new("{").unwrap();
    assert_eq!(unsafe { rwre_env_new(junk.as_ptr(), &mut env) }, RwreStatus::Json);
    assert_eq!(unsafe { rwre_env_new(ptr::null(), &mut env) }, RwreStatus::NullPointer);

    let env = self::env();
    assert!(rwre_last_error().is_null());
    let x = [0i32, 0, 0];
    let mut v = 0.0;
    assert_eq!(
        unsafe { rwre_env_potential(env, x.as_ptr(), 3, &mut v) },
        RwreStatus::InvalidArgument
    );
    assert_eq!(unsafe { rwre_env_dim(env, ptr::null_mut()) }, RwreStatus::NullPointer);
    unsafe { rwre_env_free(env) };
    unsafe { rwre_env_free(ptr::null_mut()) };
}

#[test]
fn walk_shells_are_deterministic_and_sum_to_n() {
    let env = env();
    let start = [0i32, 0];
    let run = || {
        let mut counts = [0u64; 64];
        let mut reached = 0usize;
        let st = unsafe {
            rwre_walk_shells(
                env,
                start.as_ptr(),
                2,
                10_000,
                9,
                counts.as_mut_ptr(),
                counts.len(),
                &mut reached,
            )
        };
        assert_eq!(st, RwreStatus::Ok);
        (counts, reached)
    };
    let (a, reached) = run();
    let (b, _) = run();
    assert_eq!(a, b);
    assert!(reached <= 64);
    assert_eq!(a.iter().sum::<u64>(), 10_000);

    let mut only = 0usize;
    let st = unsafe { rwre_walk_shells(env, start.as_ptr(), 2, 100, 9, ptr::null_mut(), 0, &mut only) };
    assert_eq!(st, RwreStatus::Ok);
    assert!(only >= 1);
    unsafe { rwre_env_free(env) };
}

#[test]
fn chain_hitting_probabilities() {
    let env = env();
    let mut chain = ptr::null_mut();
    assert_eq!(unsafe { rwre_chain_new(env, 2, &mut chain) }, RwreStatus::Ok);
    let mut len = 0usize;
    assert_eq!(unsafe { rwre_chain_len(chain, &mut len) }, RwreStatus::Ok);
    assert_eq!(len, 25);

    let mut origin = 0usize;
    let mut corner = 0usize;
    unsafe {
        assert_eq!(
            rwre_chain_index(chain, [0i32, 0].as_ptr(), 2, &mut origin),
            RwreStatus::Ok
        );
        assert_eq!(
            rwre_chain_index(chain, [2i32, 2].as_ptr(), 2, &mut corner),
            RwreStatus::Ok
        );
    }
    let mut h = vec![0.0; len];
    let st = unsafe { rwre_chain_hitting(chain, &origin, 1, &corner, 1, h.as_mut_ptr(), h.len()) };
    assert_eq!(st, RwreStatus::Ok);
    assert_eq!(h[origin], 1.0);
    assert_eq!(h[corner], 0.0);
    assert!(h.iter().all(|p| (0.0..=1.0).contains(p)));

    let mut short = vec![0.0; 3];
    let st = unsafe { rwre_chain_hitting(chain, &origin, 1, ptr::null(), 0, short.as_mut_ptr(), 3) };
    assert_eq!(st, RwreStatus::InvalidArgument);
    let outside = [5i32, 0];
    let mut idx = 0usize;
    assert_eq!(
        unsafe { rwre_chain_index(chain, outside.as_ptr(), 2, &mut idx) },
        RwreStatus::InvalidArgument
    );

    unsafe {
        rwre_chain_free(chain);
        rwre_env_free(env);
    }
}

#[test]
fn json_commands_round_trip() {
    let cmd = CString::new("levelsets").unwrap();
    let cfg = CString::new(format!(r#"{{"environment":{SPEC},"shells":[1,2,3]}}"#)).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { rwre_run_json(cmd.as_ptr(), cfg.as_ptr(), &mut out) },
        RwreStatus::Ok,
        "{}",
        last_error_or_empty()
    );
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { rwre_string_free(out) };
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["partitions"].as_array().unwrap().len(), 3);

    let unknown = CString::new("nope").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { rwre_run_json(unknown.as_ptr(), cfg.as_ptr(), &mut out) },
        RwreStatus::InvalidArgument
    );
    assert!(out.is_null());
}

fn last_error_or_empty() -> String {
    let p = rwre_last_error();
    if p.is_null() {
        String::new()
    } else {
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }
}
