//! C ABI over the learner and the table sounds.
//!
//! Every function returns an [`SgimStatus`]; on failure a message describing
//! the error is available from [`sgim_last_error_message`] on the same
//! thread. Learners are opaque handles created by [`sgim_learner_new`] or
//! [`sgim_learner_from_config`] and released with [`sgim_learner_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use sgim_core::config::{Config, Profile, Variant};
use sgim_core::error::Error;
use sgim_core::learner::{Environment, Learner};
use sgim_core::outcome::{Outcome, SubspaceId, SUBSPACES};
use sgim_core::table::{SoundParams, TableConfig, TableGeometry, TableState};

/// Number of outcome subspaces, the length of the per-subspace arrays.
pub const SGIM_SUBSPACES: usize = 6;
const _: () = assert!(SGIM_SUBSPACES == SUBSPACES);

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Io = 4,
    /// Nothing in memory to resolve the goal from.
    ColdStart = 5,
    /// Unexpected failure, including a caught panic.
    Internal = 6,
}

/// Opaque learner handle.
pub struct SgimLearner {
    env: Environment,
    learner: Learner,
}

/// Table geometry; pass NULL to use the default unit table.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SgimTable {
    pub origin_x: f64,
    pub origin_y: f64,
    pub width: f64,
    pub height: f64,
    pub object_radius: f64,
}

/// Normalized sound parameters; `t` is meaningful only when `has_t` is 1.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SgimSound {
    pub f: f64,
    pub l: f64,
    pub b: f64,
    pub t: f64,
    pub has_t: u8,
}

/// Evaluation of a learner's memory against its testbench.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SgimEvaluation {
    pub iteration: u64,
    pub global: f64,
    /// Mean error per outcome subspace; valid where `has_subspace` is 1.
    pub per_subspace: [f64; SGIM_SUBSPACES],
    pub has_subspace: [u8; SGIM_SUBSPACES],
    pub memory_size: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let msg = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior NUL"));
}

fn fail(status: SgimStatus, message: impl Into<String>) -> SgimStatus {
    set_error(message);
    status
}

fn from_error(e: Error) -> SgimStatus {
    let status = match &e {
        Error::Config { .. } | Error::Parse { .. } => SgimStatus::InvalidConfig,
        Error::Io { .. } | Error::Csv(_) => SgimStatus::Io,
        Error::ColdStart(_) => SgimStatus::ColdStart,
        Error::SubspaceMismatch { .. } | Error::SequenceTooLong { .. } | Error::EmptySequence => {
            SgimStatus::InvalidArgument
        }
        _ => SgimStatus::Internal,
    };
    fail(status, e.to_string())
}

/// Runs `f`, converting panics into `Internal`.
fn guard(f: impl FnOnce() -> SgimStatus) -> SgimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(SgimStatus::Internal, format!("internal error: {msg}"))
        }
    }
}

/// Reads a NUL-terminated UTF-8 argument.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, SgimStatus> {
    if p.is_null() {
        return Err(fail(SgimStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SgimStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($p:expr, $what:expr) => {
        if $p.is_null() {
            return fail(SgimStatus::NullPointer, concat!($what, " is NULL"));
        }
    };
}

fn create(config: Config, variant: &str, seed: u64, out: *mut *mut SgimLearner) -> SgimStatus {
    let variant: Variant = try_status!(variant.parse().map_err(from_error));
    let env = try_status!(Environment::prepare(&config).map_err(from_error));
    let learner = Learner::new(&env, variant, seed);
    unsafe { *out = Box::into_raw(Box::new(SgimLearner { env, learner })) };
    SgimStatus::Ok
}

/// Message of the last failed call on this thread (empty if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sgim_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sgim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a learner with the default configuration of `profile`
/// ("simulation", "physical" or "left-arm") and `testbench_per_subspace`
/// evaluation goals per subspace (0 keeps the default).
///
/// # Safety
/// `profile` and `variant` must be NUL-terminated strings; `out` must be a
/// valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn sgim_learner_new(
    profile: *const c_char,
    variant: *const c_char,
    seed: u64,
    testbench_per_subspace: u32,
    out: *mut *mut SgimLearner,
) -> SgimStatus {
    guard(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        let profile: Profile = try_status!(try_status!(text(profile, "profile")).parse().map_err(from_error));
        let variant = try_status!(text(variant, "variant"));
        let mut config = Config::for_profile(profile);
        if testbench_per_subspace > 0 {
            config.testbench_per_subspace = testbench_per_subspace as usize;
        }
        create(config, variant, seed, out)
    })
}

/// Creates a learner from a TOML configuration file.
///
/// # Safety
/// `path` and `variant` must be NUL-terminated strings; `out` must be a
/// valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn sgim_learner_from_config(
    path: *const c_char,
    variant: *const c_char,
    seed: u64,
    out: *mut *mut SgimLearner,
) -> SgimStatus {
    guard(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        let path = PathBuf::from(try_status!(text(path, "path")));
        let variant = try_status!(text(variant, "variant"));
        let config = try_status!(Config::load(&path).map_err(from_error));
        create(config, variant, seed, out)
    })
}

/// Releases a learner; NULL is ignored.
///
/// # Safety
/// `learner` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sgim_learner_free(learner: *mut SgimLearner) {
    if !learner.is_null() {
        drop(Box::from_raw(learner));
    }
}

/// Runs `iterations` learning episodes.
///
/// # Safety
/// `learner` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sgim_learner_step(learner: *mut SgimLearner, iterations: u32) -> SgimStatus {
    guard(|| {
        non_null!(learner, "learner");
        let h = &mut *learner;
        for _ in 0..iterations {
            try_status!(h.learner.step().map_err(from_error));
        }
        SgimStatus::Ok
    })
}

/// Number of episodes run so far.
///
/// # Safety
/// `learner` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgim_learner_iteration(learner: *const SgimLearner, out: *mut u64) -> SgimStatus {
    guard(|| {
        non_null!(learner, "learner");
        non_null!(out, "out");
        *out = (*learner).learner.iteration() as u64;
        SgimStatus::Ok
    })
}

/// Evaluates the learner against its testbench without changing it.
///
/// # Safety
/// `learner` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgim_learner_evaluate(learner: *const SgimLearner, out: *mut SgimEvaluation) -> SgimStatus {
    guard(|| {
        non_null!(learner, "learner");
        non_null!(out, "out");
        let h = &*learner;
        let snap = h.learner.evaluate(&h.env.testbench);
        let mut e = SgimEvaluation {
            iteration: snap.iteration as u64,
            global: snap.global,
            memory_size: snap.memory_size as u64,
            ..Default::default()
        };
        for (k, v) in snap.per_subspace.iter().enumerate() {
            if let Some(v) = v {
                e.per_subspace[k] = *v;
                e.has_subspace[k] = 1;
            }
        }
        *out = e;
        SgimStatus::Ok
    })
}

/// Resolves a goal of `subspace` (0-5) with `dim` coordinates through the
/// learner's memory, reporting the action length and its perf.
///
/// # Safety
/// `learner` must be a live handle; `coords` must point to `dim` values;
/// `out_length` and `out_perf` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgim_learner_resolve(
    learner: *const SgimLearner,
    subspace: u8,
    coords: *const f64,
    dim: usize,
    out_length: *mut usize,
    out_perf: *mut f64,
) -> SgimStatus {
    guard(|| {
        non_null!(learner, "learner");
        non_null!(coords, "coords");
        non_null!(out_length, "out_length");
        non_null!(out_perf, "out_perf");
        if subspace as usize >= SUBSPACES {
            return fail(SgimStatus::InvalidArgument, format!("no subspace {subspace}"));
        }
        let space = SubspaceId(subspace);
        if dim != space.dim() {
            return fail(
                SgimStatus::InvalidArgument,
                format!("subspace {subspace} has {} coordinates, got {dim}", space.dim()),
            );
        }
        let values = std::slice::from_raw_parts(coords, dim);
        if values.iter().any(|v| !v.is_finite()) {
            return fail(SgimStatus::InvalidArgument, "coordinates must be finite");
        }
        let goal = Outcome::new(space, values).expect("dimension checked");
        let memory = (*learner).learner.memory();
        let r = try_status!(memory.resolve(&goal, memory.params().depth).map_err(from_error));
        *out_length = r.action.len();
        *out_perf = r.perf;
        SgimStatus::Ok
    })
}

/// Writes the learner's memory as JSON lines to `path`.
///
/// # Safety
/// `learner` must be a live handle; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sgim_learner_dump_memory(learner: *const SgimLearner, path: *const c_char) -> SgimStatus {
    guard(|| {
        non_null!(learner, "learner");
        let path = PathBuf::from(try_status!(text(path, "path")));
        try_status!((*learner).learner.memory().dump(&path).map_err(from_error));
        SgimStatus::Ok
    })
}

unsafe fn geometry(table: *const SgimTable) -> Result<TableGeometry, SgimStatus> {
    if table.is_null() {
        return Ok(TableGeometry::default());
    }
    let t = &*table;
    let g = TableGeometry {
        origin: [t.origin_x, t.origin_y],
        width: t.width,
        height: t.height,
        object_radius: t.object_radius,
    };
    let finite = [g.origin[0], g.origin[1], g.width, g.height, g.object_radius]
        .iter()
        .all(|v| v.is_finite());
    if !finite || g.width <= 0.0 || g.height <= 0.0 || g.object_radius <= 0.0 {
        return Err(fail(
            SgimStatus::InvalidArgument,
            "table needs finite values, positive sides and radius",
        ));
    }
    Ok(g)
}

fn write_sound(s: SoundParams, out: &mut SgimSound) {
    *out = SgimSound {
        f: s.f,
        l: s.l,
        b: s.b,
        t: s.t.unwrap_or(0.0),
        has_t: s.t.is_some() as u8,
    };
}

fn state(g: TableGeometry, blue: [f64; 2], green: [f64; 2]) -> Result<TableState, SgimStatus> {
    if blue.iter().chain(&green).any(|v| !v.is_finite()) {
        return Err(fail(SgimStatus::InvalidArgument, "object positions must be finite"));
    }
    let mut s = TableState::reset(&TableConfig { geometry: g, blue, green });
    s.burst = Some(s.burst_sound());
    Ok(s)
}

/// Burst sound for objects at the given positions.
///
/// # Safety
/// `table` may be NULL (default table) or point to a valid table; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgim_burst_sound(
    table: *const SgimTable,
    blue_x: f64,
    blue_y: f64,
    green_x: f64,
    green_y: f64,
    out: *mut SgimSound,
) -> SgimStatus {
    guard(|| {
        non_null!(out, "out");
        let g = try_status!(geometry(table));
        let s = try_status!(state(g, [blue_x, blue_y], [green_x, green_y]));
        write_sound(s.burst_sound(), &mut *out);
        SgimStatus::Ok
    })
}

/// Maintained sound: the burst sound extended with the duration set by a
/// touch at (`touch_x`, `touch_y`).
///
/// # Safety
/// `table` may be NULL (default table) or point to a valid table; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgim_maintain_sound(
    table: *const SgimTable,
    blue_x: f64,
    blue_y: f64,
    green_x: f64,
    green_y: f64,
    touch_x: f64,
    touch_y: f64,
    out: *mut SgimSound,
) -> SgimStatus {
    guard(|| {
        non_null!(out, "out");
        if !(touch_x.is_finite() && touch_y.is_finite()) {
            return fail(SgimStatus::InvalidArgument, "touch position must be finite");
        }
        let g = try_status!(geometry(table));
        let s = try_status!(state(g, [blue_x, blue_y], [green_x, green_y]));
        write_sound(s.maintain_sound(&[touch_x, touch_y]).expect("burst set"), &mut *out);
        SgimStatus::Ok
    })
}
