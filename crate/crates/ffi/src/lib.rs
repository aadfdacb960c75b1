//! C interface to the solver.
//!
//! Meshes and simulations are opaque handles created and destroyed through
//! this API. Every fallible call returns a [`FeecStatus`]; the message of the
//! most recent failure on the calling thread is available from
//! [`feec_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use feec_sl::solver::{Scheme, SimConfig, Simulation};
use feec_sl::{Error, Mesh, Rect};
use nalgebra::{Point2, Vector2};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeecStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    MeshError = 3,
    OutsideDomain = 4,
    SolverError = 5,
    Io = 6,
    Panic = 7,
}

pub struct FeecMesh {
    mesh: Arc<Mesh>,
}

pub struct FeecSimulation {
    sim: Simulation,
}

/// Initial velocity callback: writes the velocity at `(x, y)` into `out[0..2]`.
pub type FeecVelocityFn = Option<unsafe extern "C" fn(x: f64, y: f64, out: *mut f64, user: *mut c_void)>;

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct FeecConfig {
    /// 1 or 2
    pub order: u32,
    pub tau: f64,
    pub t_final: f64,
    pub eps: f64,
    /// Non-zero enables the energy-preserving correction.
    pub conservative: u32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct FeecStepInfo {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub mu: f64,
    pub inner_iterations: usize,
    pub divergence_residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FeecStatus {
    match e {
        Error::Parse { .. } | Error::Topology(_) | Error::DegenerateTriangle { .. } | Error::DegenerateElement { .. } => {
            FeecStatus::MeshError
        }
        Error::OutsideDomain(..) => FeecStatus::OutsideDomain,
        Error::Config(_) => FeecStatus::InvalidArgument,
        Error::Io(_) => FeecStatus::Io,
        _ => FeecStatus::SolverError,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (FeecStatus, String)>) -> FeecStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FeecStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FeecStatus::Panic
        }
    }
}

fn lift(e: Error) -> (FeecStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (FeecStatus, String) {
    (FeecStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn feec_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Structured `n × n` mesh of `[x0, x1] × [y0, y1]`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn feec_mesh_structured(
    n: usize,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    out: *mut *mut FeecMesh,
) -> FeecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if n == 0 || !(x1 > x0) || !(y1 > y0) {
            return Err((FeecStatus::InvalidArgument, "need n > 0 and a non-empty rectangle".into()));
        }
        let mesh = Mesh::structured(n, n, Rect::new(x0, y0, x1, y1));
        *out = Box::into_raw(Box::new(FeecMesh { mesh: Arc::new(mesh) }));
        Ok(())
    })
}

/// Unstructured disk mesh with `rings` rings.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn feec_mesh_disk(rings: usize, radius: f64, out: *mut *mut FeecMesh) -> FeecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if rings == 0 || !(radius > 0.0) {
            return Err((FeecStatus::InvalidArgument, "need rings > 0 and radius > 0".into()));
        }
        *out = Box::into_raw(Box::new(FeecMesh { mesh: Arc::new(Mesh::disk(rings, radius)) }));
        Ok(())
    })
}

/// Reads a mesh file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn feec_mesh_load(path: *const c_char, out: *mut *mut FeecMesh) -> FeecStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (FeecStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let mesh = Mesh::load(path).map_err(lift)?;
        *out = Box::into_raw(Box::new(FeecMesh { mesh: Arc::new(mesh) }));
        Ok(())
    })
}

/// Writes vertex, edge and triangle counts; any pointer may be null.
///
/// # Safety
/// `mesh` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn feec_mesh_counts(
    mesh: *const FeecMesh,
    vertices: *mut usize,
    edges: *mut usize,
    triangles: *mut usize,
) -> FeecStatus {
    guard(|| {
        let m = &mesh.as_ref().ok_or_else(|| null("mesh"))?.mesh;
        for (p, v) in [(vertices, m.n_vertices()), (edges, m.n_edges()), (triangles, m.n_triangles())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn feec_mesh_free(mesh: *mut FeecMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Creates a simulation on `mesh`. The initial velocity is sampled through
/// `initial` and made discretely divergence free. The mesh handle may be
/// freed afterwards.
///
/// # Safety
/// `mesh` must be a live handle, `out` a valid pointer and `initial` safe to
/// call with `user` from any thread for the duration of this call.
#[no_mangle]
pub unsafe extern "C" fn feec_simulation_new(
    mesh: *const FeecMesh,
    config: FeecConfig,
    initial: FeecVelocityFn,
    user: *mut c_void,
    out: *mut *mut FeecSimulation,
) -> FeecStatus {
    guard(|| {
        let m = mesh.as_ref().ok_or_else(|| null("mesh"))?.mesh.clone();
        if out.is_null() {
            return Err(null("out"));
        }
        let cb = initial.ok_or_else(|| null("initial"))?;
        let scheme = Scheme::from_degree(config.order as usize)
            .ok_or_else(|| (FeecStatus::InvalidArgument, format!("order must be 1 or 2, got {}", config.order)))?;
        let mut cfg = SimConfig::new(scheme, config.tau, config.t_final);
        cfg.eps = config.eps;
        cfg.conservative = config.conservative != 0;
        cfg.validate().map_err(lift)?;
        let user = user as usize;
        let field = move |x: &Point2<f64>| {
            let mut v = [0.0f64; 2];
            cb(x.x, x.y, v.as_mut_ptr(), user as *mut c_void);
            Vector2::new(v[0], v[1])
        };
        let sim = Simulation::new(m, cfg, &field).map_err(lift)?;
        *out = Box::into_raw(Box::new(FeecSimulation { sim }));
        Ok(())
    })
}

/// Advances one step; `info` may be null.
///
/// # Safety
/// `sim` must be a live handle; `info`, if non-null, must be writable.
#[no_mangle]
pub unsafe extern "C" fn feec_simulation_step(sim: *mut FeecSimulation, info: *mut FeecStepInfo) -> FeecStatus {
    guard(|| {
        let s = &mut sim.as_mut().ok_or_else(|| null("sim"))?.sim;
        let r = s.step().map_err(lift)?;
        if !info.is_null() {
            *info = FeecStepInfo {
                step: r.step,
                t: r.t,
                energy: r.energy,
                mu: r.mu,
                inner_iterations: r.inner_iterations,
                divergence_residual: r.divergence_residual,
            };
        }
        Ok(())
    })
}

/// Current time and discrete energy; either pointer may be null.
///
/// # Safety
/// `sim` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn feec_simulation_state(sim: *const FeecSimulation, time: *mut f64, energy: *mut f64) -> FeecStatus {
    guard(|| {
        let s = &sim.as_ref().ok_or_else(|| null("sim"))?.sim;
        if !time.is_null() {
            *time = s.time();
        }
        if !energy.is_null() {
            *energy = s.energy();
        }
        Ok(())
    })
}

/// Velocity at `(x, y)` written into `out[0..2]`.
///
/// # Safety
/// `sim` must be a live handle and `out` point to two writable doubles.
#[no_mangle]
pub unsafe extern "C" fn feec_simulation_velocity(sim: *const FeecSimulation, x: f64, y: f64, out: *mut f64) -> FeecStatus {
    guard(|| {
        let s = &sim.as_ref().ok_or_else(|| null("sim"))?.sim;
        if out.is_null() {
            return Err(null("out"));
        }
        let u = s
            .velocity_at(&Point2::new(x, y))
            .ok_or_else(|| lift(Error::OutsideDomain(x, y)))?;
        *out = u.x;
        *out.add(1) = u.y;
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn feec_simulation_free(sim: *mut FeecSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
