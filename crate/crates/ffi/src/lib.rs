//! C ABI over the `thinfilm` solver.
//!
//! Objects are opaque heap handles created by `tf_*_new` and released by the
//! matching `tf_*_free`. Every fallible call returns a [`TfStatus`]; on
//! failure the message is kept per thread and can be fetched with
//! [`tf_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use thinfilm::fem::Polynomial;
use thinfilm::io::write_vtk;
use thinfilm::mesh::{generate_rect_mesh, Rect, SideSet, TriMesh};
use thinfilm::scenarios::{simulation_for, Scenario, ScenarioConfig, Simulation};
use thinfilm::tw::rankine_hugoniot_speed;
use thinfilm::Error;

/// Result codes. `Ok` is zero; the rest mirror the CLI exit codes where one
/// exists.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    InvalidArgument = 1,
    Config = 2,
    Nonconvergence = 3,
    Io = 4,
    NullPointer = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Bit flags for `tf_mesh_new_rect`.
pub const TF_SIDE_BOTTOM: u32 = 1;
pub const TF_SIDE_RIGHT: u32 = 2;
pub const TF_SIDE_TOP: u32 = 4;
pub const TF_SIDE_LEFT: u32 = 8;

/// Opaque triangulation of a rectangle.
pub struct TfMesh(TriMesh);

/// Opaque time-dependent run of one scenario.
pub struct TfSimulation(Simulation);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TfStatus {
    match e {
        Error::Config(_) => TfStatus::Config,
        Error::Io { .. } => TfStatus::Io,
        Error::InvalidArgument(_) => TfStatus::InvalidArgument,
        e if e.is_nonconvergence() => TfStatus::Nonconvergence,
        _ => TfStatus::InvalidArgument,
    }
}

fn fail(status: TfStatus, msg: impl Into<String>) -> TfStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), TfStatus>) -> TfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TfStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(TfStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, TfStatus>;
}

impl<T> OrStatus<T> for thinfilm::Result<T> {
    fn or_status(self) -> Result<T, TfStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, TfStatus> {
    if p.is_null() {
        return Err(fail(TfStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TfStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, TfStatus> {
    p.as_ref().ok_or_else(|| fail(TfStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, TfStatus> {
    p.as_mut().ok_or_else(|| fail(TfStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize) -> Result<&'a mut [f64], TfStatus> {
    if p.is_null() {
        return Err(fail(TfStatus::NullPointer, "output buffer is null"));
    }
    if len < need {
        return Err(fail(TfStatus::BufferTooSmall, format!("buffer holds {len} values, {need} needed")));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length without
/// the terminator, or 0 if there is none.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn tf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Structured `nx × nz` mesh of `[x0,x1]×[z0,z1]`. `dirichlet` is a mask of
/// `TF_SIDE_*` flags.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn tf_mesh_new_rect(
    nx: usize,
    nz: usize,
    x0: f64,
    x1: f64,
    z0: f64,
    z1: f64,
    dirichlet: u32,
    out: *mut *mut TfMesh,
) -> TfStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        let sides = SideSet {
            bottom: dirichlet & TF_SIDE_BOTTOM != 0,
            right: dirichlet & TF_SIDE_RIGHT != 0,
            top: dirichlet & TF_SIDE_TOP != 0,
            left: dirichlet & TF_SIDE_LEFT != 0,
        };
        let mesh = generate_rect_mesh(nx, nz, Rect::new(x0, x1, z0, z1), sides).or_status()?;
        *out = Box::into_raw(Box::new(TfMesh(mesh)));
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a handle from `tf_mesh_new_rect` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tf_mesh_free(mesh: *mut TfMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tf_mesh_num_nodes(mesh: *const TfMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.num_nodes())
}

/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tf_mesh_num_triangles(mesh: *const TfMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.num_triangles())
}

fn copy_nodes(mesh: &TriMesh, xz: &mut [f64]) {
    for (dst, p) in xz.chunks_exact_mut(2).zip(mesh.physical()) {
        dst.copy_from_slice(p);
    }
}

/// Writes node coordinates as `x0, z0, x1, z1, ...`; `len` counts doubles.
///
/// # Safety
/// `mesh` must be a live handle and `xz` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_mesh_nodes(mesh: *const TfMesh, xz: *mut f64, len: usize) -> TfStatus {
    guard(|| {
        let m = &handle(mesh, "mesh")?.0;
        copy_nodes(m, out_slice(xz, len, 2 * m.num_nodes())?);
        Ok(())
    })
}

/// Writes counter-clockwise vertex triples; `len` counts indices.
///
/// # Safety
/// `mesh` must be a live handle and `tri` valid for `len` values.
#[no_mangle]
pub unsafe extern "C" fn tf_mesh_triangles(mesh: *const TfMesh, tri: *mut usize, len: usize) -> TfStatus {
    guard(|| {
        let m = &handle(mesh, "mesh")?.0;
        let need = 3 * m.num_triangles();
        if tri.is_null() {
            return Err(fail(TfStatus::NullPointer, "output buffer is null"));
        }
        if len < need {
            return Err(fail(TfStatus::BufferTooSmall, format!("buffer holds {len} values, {need} needed")));
        }
        let out = std::slice::from_raw_parts_mut(tri, need);
        for (dst, t) in out.chunks_exact_mut(3).zip(m.triangles()) {
            dst.copy_from_slice(t);
        }
        Ok(())
    })
}

/// Rankine–Hugoniot speed of the flux `Σ coeffs[k] u^k` between two states.
///
/// # Safety
/// `coeffs` must be valid for `n` doubles and `speed` writable.
#[no_mangle]
pub unsafe extern "C" fn tf_rankine_hugoniot_speed(
    coeffs: *const f64,
    n: usize,
    u_minus: f64,
    u_plus: f64,
    speed: *mut f64,
) -> TfStatus {
    guard(|| {
        if coeffs.is_null() {
            return Err(fail(TfStatus::NullPointer, "coeffs is null"));
        }
        let speed = handle_mut(speed, "speed")?;
        let flux = Polynomial::new(std::slice::from_raw_parts(coeffs, n).to_vec());
        *speed = rankine_hugoniot_speed(&flux, u_minus, u_plus).or_status()?;
        Ok(())
    })
}

/// Sets up a run of `scenario` (`converge`, `tw1`..`tw3`, `finger`) with its
/// defaults, then applies `config`, a `key = value` text that may be null.
/// The initial mesh adaptation happens here.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_simulation_new(
    scenario: *const c_char,
    config: *const c_char,
    out: *mut *mut TfSimulation,
) -> TfStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        let scenario: Scenario = str_arg(scenario, "scenario")?.parse().or_status()?;
        let cfg = if config.is_null() {
            ScenarioConfig::defaults(scenario)
        } else {
            ScenarioConfig::parse(str_arg(config, "config")?, Some(scenario)).or_status()?
        };
        let sim = simulation_for(&cfg).or_status()?;
        *out = Box::into_raw(Box::new(TfSimulation(sim)));
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a handle from `tf_simulation_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tf_simulation_free(sim: *mut TfSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances `steps` time steps (each preceded by a mesh cycle when moving).
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tf_simulation_step(sim: *mut TfSimulation, steps: usize) -> TfStatus {
    guard(|| {
        let s = &mut handle_mut(sim, "sim")?.0;
        for _ in 0..steps {
            s.advance().or_status()?;
        }
        Ok(())
    })
}

/// Advances to `t_end`, shortening the last step to land on it.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tf_simulation_run_until(sim: *mut TfSimulation, t_end: f64) -> TfStatus {
    guard(|| {
        let s = &mut handle_mut(sim, "sim")?.0;
        s.run_until(t_end, |_, _| Ok(())).or_status()
    })
}

/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tf_simulation_time(sim: *const TfSimulation) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.0.state.t)
}

/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tf_simulation_num_nodes(sim: *const TfSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.0.mesh.num_nodes())
}

/// Copies the film thickness at the nodes.
///
/// # Safety
/// `sim` must be a live handle and `u` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_simulation_get_u(sim: *const TfSimulation, u: *mut f64, len: usize) -> TfStatus {
    guard(|| {
        let s = &handle(sim, "sim")?.0;
        out_slice(u, len, s.state.u.len())?.copy_from_slice(&s.state.u);
        Ok(())
    })
}

/// Copies the current (moved) node coordinates as `x0, z0, x1, z1, ...`.
///
/// # Safety
/// `sim` must be a live handle and `xz` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_simulation_get_nodes(sim: *const TfSimulation, xz: *mut f64, len: usize) -> TfStatus {
    guard(|| {
        let m = &handle(sim, "sim")?.0.mesh;
        copy_nodes(m, out_slice(xz, len, 2 * m.num_nodes())?);
        Ok(())
    })
}

/// Writes the current mesh with `u` and `w` as legacy VTK.
///
/// # Safety
/// `sim` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tf_simulation_write_vtk(sim: *const TfSimulation, path: *const c_char) -> TfStatus {
    guard(|| {
        let s = &handle(sim, "sim")?.0;
        let path = str_arg(path, "path")?;
        write_vtk(&s.mesh, &[("u", &s.state.u), ("w", &s.state.w)], Path::new(path)).or_status()
    })
}
