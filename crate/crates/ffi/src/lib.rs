//! C ABI over the `rwre` library.
//!
//! Every function returns an [`RwreStatus`]. On failure a message for the
//! calling thread is available from [`rwre_last_error`] until the next call.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use rwre::env::{ConductanceView, EnvironmentField, EnvironmentSpec};
use rwre::experiment;
use rwre::lattice::{Point, MAX_DIM};
use rwre::oracle::{solve_hitting, FiniteChain};
use rwre::valley::{find_landmarks, LandmarkParams};
use rwre::walk::{LocalTimeLedger, Walker};
use rwre::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RwreStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    InvalidSpec = 4,
    InvalidConfig = 5,
    InvalidInstance = 6,
    ScanBudgetExceeded = 7,
    Unreached = 8,
    RejectionBudgetExceeded = 9,
    TailNotConverged = 10,
    SingularSystem = 11,
    PathInvalid = 12,
    NumericRange = 13,
    Io = 14,
    Json = 15,
    Panic = 16,
}

/// An environment; shared by chains and walks created from it.
pub struct RwreEnvironment {
    field: Arc<EnvironmentField>,
}

/// The walk restricted to a box with reflecting walls.
pub struct RwreChain {
    chain: FiniteChain,
}

/// Valley landmarks for one horizon. `found` is false when the environment
/// has no valley; the other fields are then zero.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct RwreLandmarks {
    pub found: bool,
    pub big_m: u64,
    pub m_n: u64,
    pub delta_n: f64,
    pub c1: bool,
    pub c2: bool,
    pub c3: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(RwreStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidSpec(_) => RwreStatus::InvalidSpec,
            Error::InvalidConfig(_) => RwreStatus::InvalidConfig,
            Error::InvalidInstance(_) => RwreStatus::InvalidInstance,
            Error::ScanBudgetExceeded { .. } => RwreStatus::ScanBudgetExceeded,
            Error::Unreached { .. } => RwreStatus::Unreached,
            Error::RejectionBudgetExceeded { .. } => RwreStatus::RejectionBudgetExceeded,
            Error::TailNotConverged { .. } => RwreStatus::TailNotConverged,
            Error::SingularSystem => RwreStatus::SingularSystem,
            Error::PathInvalid(_) => RwreStatus::PathInvalid,
            Error::NumericRange { .. } => RwreStatus::NumericRange,
            Error::Io(_) | Error::Csv(_) => RwreStatus::Io,
            Error::Json(_) => RwreStatus::Json,
        };
        Fail(status, e.to_string())
    }
}

impl From<serde_json::Error> for Fail {
    fn from(e: serde_json::Error) -> Self {
        Fail(RwreStatus::Json, e.to_string())
    }
}

fn arg(msg: &str) -> Fail {
    Fail(RwreStatus::InvalidArgument, msg.into())
}

fn set_error(msg: Option<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.map(|m| CString::new(m.replace('\0', " ")).expect("no NUL")));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RwreStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(None);
            RwreStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(Some(msg));
            status
        }
        Err(_) => {
            set_error(Some("panic inside rwre".into()));
            RwreStatus::Panic
        }
    }
}

unsafe fn reference<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail(RwreStatus::NullPointer, "null handle".into()))
}

unsafe fn output<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or(Fail(RwreStatus::NullPointer, "null output pointer".into()))
}

unsafe fn string<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(RwreStatus::NullPointer, "null string".into()));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RwreStatus::InvalidUtf8, "string is not UTF-8".into()))
}

unsafe fn point(coords: *const i32, d: usize) -> Result<Point, Fail> {
    if coords.is_null() {
        return Err(Fail(RwreStatus::NullPointer, "null coordinates".into()));
    }
    if d == 0 || d > MAX_DIM {
        return Err(arg("dimension out of range"));
    }
    Ok(Point::new(std::slice::from_raw_parts(coords, d)))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rwre_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn rwre_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Build an environment from a JSON spec such as
/// `{"d":2,"increment_law":{"kind":"rademacher"},"delta_law":{"kind":"zero"},"seed":1}`.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rwre_env_new(spec_json: *const c_char, out: *mut *mut RwreEnvironment) -> RwreStatus {
    guard(|| {
        let out = output(out)?;
        let spec: EnvironmentSpec = serde_json::from_str(string(spec_json)?)?;
        let field = EnvironmentField::new(spec)?;
        *out = Box::into_raw(Box::new(RwreEnvironment { field: Arc::new(field) }));
        Ok(())
    })
}

/// # Safety
/// `env` must come from [`rwre_env_new`] and not be used afterwards. NULL is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn rwre_env_free(env: *mut RwreEnvironment) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rwre_env_dim(env: *const RwreEnvironment, out: *mut u32) -> RwreStatus {
    guard(|| {
        *output(out)? = reference(env)?.field.dim() as u32;
        Ok(())
    })
}

/// `S_k`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rwre_env_s_value(env: *const RwreEnvironment, k: i64, out: *mut f64) -> RwreStatus {
    guard(|| {
        *output(out)? = reference(env)?.field.s_value(k);
        Ok(())
    })
}

fn check_dim(env: &RwreEnvironment, d: usize) -> Result<(), Fail> {
    if env.field.dim() == d {
        Ok(())
    } else {
        Err(arg("point dimension does not match the environment"))
    }
}

/// `V(x)` at the site with `d` coordinates `coords`.
///
/// # Safety
/// `coords` must point to `d` integers; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rwre_env_potential(
    env: *const RwreEnvironment,
    coords: *const i32,
    d: usize,
    out: *mut f64,
) -> RwreStatus {
    guard(|| {
        let env = reference(env)?;
        check_dim(env, d)?;
        *output(out)? = env.field.potential(&point(coords, d)?);
        Ok(())
    })
}

/// Capacitance `pi(x)` on the full lattice.
///
/// # Safety
/// As [`rwre_env_potential`].
#[no_mangle]
pub unsafe extern "C" fn rwre_env_capacitance(
    env: *const RwreEnvironment,
    coords: *const i32,
    d: usize,
    out: *mut f64,
) -> RwreStatus {
    guard(|| {
        let env = reference(env)?;
        check_dim(env, d)?;
        let view = ConductanceView::new(env.field.as_ref());
        *output(out)? = view.capacitance(&point(coords, d)?);
        Ok(())
    })
}

/// Landmarks at horizon `n` with default parameters.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rwre_env_landmarks(
    env: *const RwreEnvironment,
    n: u64,
    out: *mut RwreLandmarks,
) -> RwreStatus {
    guard(|| {
        let env = reference(env)?;
        let out = output(out)?;
        let outcome = find_landmarks(&env.field, n, &LandmarkParams::default())?;
        *out = match outcome.landmarks() {
            Some(l) => RwreLandmarks {
                found: true,
                big_m: l.big_m,
                m_n: l.m_n,
                delta_n: l.delta_n,
                c1: l.a_n.c1,
                c2: l.a_n.c2,
                c3: l.a_n.c3,
            },
            None => RwreLandmarks::default(),
        };
        Ok(())
    })
}

/// Run `n` steps from `start` and write the local time of shells
/// `0..len` into `counts`. `shells` receives the number of shells reached,
/// which may exceed `len`.
///
/// # Safety
/// `start` must point to `d` integers and `counts` to `len` writable slots.
#[no_mangle]
pub unsafe extern "C" fn rwre_walk_shells(
    env: *const RwreEnvironment,
    start: *const i32,
    d: usize,
    n: u64,
    seed: u64,
    counts: *mut u64,
    len: usize,
    shells: *mut usize,
) -> RwreStatus {
    guard(|| {
        let env = reference(env)?;
        check_dim(env, d)?;
        let start = point(start, d)?;
        let shells = output(shells)?;
        if counts.is_null() && len > 0 {
            return Err(Fail(RwreStatus::NullPointer, "null counts buffer".into()));
        }
        let view = ConductanceView::new(env.field.as_ref());
        let mut walker = Walker::new(&view, start, seed);
        let mut ledger = LocalTimeLedger::new();
        walker.run(n, Some(&mut ledger), &mut []);
        let got = ledger.shells();
        for k in 0..len {
            *counts.add(k) = got.get(k).copied().unwrap_or(0);
        }
        *shells = got.len();
        Ok(())
    })
}

/// Reflecting restriction of the walk to `B_radius`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rwre_chain_new(
    env: *const RwreEnvironment,
    radius: u32,
    out: *mut *mut RwreChain,
) -> RwreStatus {
    guard(|| {
        let env = reference(env)?;
        let out = output(out)?;
        if radius > 16 {
            return Err(arg("chain radius above 16 is not supported"));
        }
        let chain = FiniteChain::reflecting(env.field.as_ref(), radius);
        *out = Box::into_raw(Box::new(RwreChain { chain }));
        Ok(())
    })
}

/// # Safety
/// `chain` must come from [`rwre_chain_new`]. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn rwre_chain_free(chain: *mut RwreChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rwre_chain_len(chain: *const RwreChain, out: *mut usize) -> RwreStatus {
    guard(|| {
        *output(out)? = reference(chain)?.chain.len();
        Ok(())
    })
}

/// State index of a site.
///
/// # Safety
/// `coords` must point to `d` integers; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rwre_chain_index(
    chain: *const RwreChain,
    coords: *const i32,
    d: usize,
    out: *mut usize,
) -> RwreStatus {
    guard(|| {
        let chain = &reference(chain)?.chain;
        let x = point(coords, d)?;
        *output(out)? = chain.index_of(&x).ok_or_else(|| arg("site outside the chain"))?;
        Ok(())
    })
}

/// `h(x) = P_x(hit target before avoid)` for every state, written to
/// `values` (length at least the chain length).
///
/// # Safety
/// `target` and `avoid` must point to `n_target` and `n_avoid` indices;
/// `values` to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rwre_chain_hitting(
    chain: *const RwreChain,
    target: *const usize,
    n_target: usize,
    avoid: *const usize,
    n_avoid: usize,
    values: *mut f64,
    len: usize,
) -> RwreStatus {
    guard(|| {
        let chain = &reference(chain)?.chain;
        if target.is_null() || values.is_null() || (avoid.is_null() && n_avoid > 0) {
            return Err(Fail(RwreStatus::NullPointer, "null buffer".into()));
        }
        if len < chain.len() {
            return Err(arg("values buffer shorter than the chain"));
        }
        let t = std::slice::from_raw_parts(target, n_target);
        let a = if n_avoid == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(avoid, n_avoid)
        };
        if t.iter().chain(a).any(|i| *i >= chain.len()) {
            return Err(arg("state index out of range"));
        }
        let h = solve_hitting(chain, t, a)?;
        std::slice::from_raw_parts_mut(values, len)[..h.values.len()].copy_from_slice(&h.values);
        Ok(())
    })
}

fn run_command(command: &str, config: &str) -> Result<String, Fail> {
    let json = match command {
        "env_dump" => serde_json::to_string(&experiment::env_dump(&serde_json::from_str(config)?)?)?,
        "walk_run" => serde_json::to_string(&experiment::walk_run(&serde_json::from_str(config)?)?)?,
        "levelsets" => serde_json::to_string(&experiment::levelsets(&serde_json::from_str(config)?)?)?,
        "landmarks" => serde_json::to_string(&experiment::landmarks(&serde_json::from_str(config)?)?)?,
        "quenched" => serde_json::to_string(&experiment::run_quenched(&serde_json::from_str(config)?)?)?,
        "annealed" => serde_json::to_string(&experiment::run_annealed(&serde_json::from_str(config)?)?)?,
        "oracle" => serde_json::to_string(&experiment::run_oracle(&serde_json::from_str(config)?)?)?,
        _ => return Err(arg("unknown command")),
    };
    Ok(json)
}

/// Run an experiment command (`env_dump`, `walk_run`, `levelsets`,
/// `landmarks`, `quenched`, `annealed`, `oracle`) on a JSON configuration.
/// The JSON report is returned in `out` and must be released with
/// [`rwre_string_free`].
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rwre_run_json(
    command: *const c_char,
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> RwreStatus {
    guard(|| {
        let out = output(out)?;
        let json = run_command(string(command)?, string(config_json)?)?;
        *out = CString::new(json).map_err(|_| arg("report contains NUL"))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn rwre_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
