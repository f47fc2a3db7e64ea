//! C ABI over the dispatch solver, the projection layer and trained models.
//!
//! Every entry point returns an [`MpopfStatus`]; on failure a message is kept
//! per thread and read back with [`mpopf_last_error`]. Objects are opaque
//! handles released with their `_free` function. Demand arrays are
//! hour-major: `demand[t * n_d + l]` is load `l` in hour `t` (MW). Schedules
//! use the stacked layout `[gen(n_g), charge(n_e), discharge(n_e)]` per hour.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mpopf::diff_projection::{build_sensitivity, Thresholds, VjpWorkspace};
use mpopf::formulation::{cost_vector, DemandScenario, FormulationOptions, QpData};
use mpopf::grid::{resolve_case, Network};
use mpopf::solver::{ConvexProgram, InteriorPointSolver, LP_REGULARIZATION};
use mpopf::training::{Checkpoint, Model};
use mpopf::Error;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpopfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Dimension = 5,
    Infeasible = 6,
    MaxIterations = 7,
    Numerical = 8,
    Checkpoint = 9,
    Panic = 10,
}

/// A validated grid case with its shift-factor matrix.
pub struct MpopfNetwork {
    net: Network,
}

/// Feasible region of one demand scenario.
pub struct MpopfProblem {
    qp: QpData,
    cost: Vec<f64>,
}

/// A projection result together with its sensitivity.
pub struct MpopfProjection {
    x: Vec<f64>,
    workspace: VjpWorkspace,
}

/// A trained surrogate loaded from a checkpoint.
pub struct MpopfModel {
    model: Model,
    fingerprint: String,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MpopfStatus {
    match e {
        Error::Io { .. } | Error::Output(_) => MpopfStatus::Io,
        Error::Parse { .. } => MpopfStatus::Parse,
        Error::Dimension(_) => MpopfStatus::Dimension,
        Error::Infeasible(_) => MpopfStatus::Infeasible,
        Error::MaxIterations(_) => MpopfStatus::MaxIterations,
        Error::Checkpoint(_) => MpopfStatus::Checkpoint,
        Error::Numerical(_)
        | Error::DegenerateActiveSet(_)
        | Error::NonFiniteGradient(_)
        | Error::SingularSusceptance => MpopfStatus::Numerical,
        Error::Validation(_)
        | Error::Config(_)
        | Error::MissingLabels(_)
        | Error::Disconnected(_) => MpopfStatus::InvalidArgument,
    }
}

struct Fail(MpopfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MpopfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MpopfStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MpopfStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(MpopfStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(MpopfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(
    p: *mut f64,
    len: usize,
    need: usize,
    what: &str,
) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(Fail(
            MpopfStatus::Dimension,
            format!("{what} holds {len} values, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn demand_arg(
    net: &Network,
    demand: *const f64,
    horizon: usize,
) -> Result<DemandScenario, Fail> {
    let n_d = net.case.n_d();
    if horizon == 0 {
        return Err(Fail(
            MpopfStatus::InvalidArgument,
            "horizon must be positive".into(),
        ));
    }
    let d = slice_arg(demand, n_d * horizon, "demand")?;
    Ok(DemandScenario::new(DMatrix::from_column_slice(
        n_d, horizon, d,
    ))?)
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn mpopf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mpopf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load a case by built-in name (`case39`, `toy3`, `toy_storage`) or path.
///
/// # Safety
/// `reference` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mpopf_network_load(
    reference: *const c_char,
    out: *mut *mut MpopfNetwork,
) -> MpopfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let reference = str_arg(reference, "reference")?;
        let net = Network::new(resolve_case(reference)?)?;
        put(out, MpopfNetwork { net });
        Ok(())
    })
}

/// # Safety
/// `net` must come from [`mpopf_network_load`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn mpopf_network_free(net: *mut MpopfNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Device counts: generators, storage units, loads, buses. Any output
/// pointer may be NULL.
///
/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpopf_network_dims(
    net: *const MpopfNetwork,
    n_g: *mut usize,
    n_e: *mut usize,
    n_d: *mut usize,
    n_b: *mut usize,
) -> MpopfStatus {
    guard(|| {
        let case = &net.as_ref().ok_or_else(|| null("net"))?.net.case;
        for (p, v) in [
            (n_g, case.n_g()),
            (n_e, case.n_e()),
            (n_d, case.n_d()),
            (n_b, case.n_b),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Build the feasible region of one scenario (`n_d * horizon` demands).
///
/// # Safety
/// `net` must be a live handle, `demand` must hold `n_d * horizon` values.
#[no_mangle]
pub unsafe extern "C" fn mpopf_problem_new(
    net: *const MpopfNetwork,
    demand: *const f64,
    horizon: usize,
    out: *mut *mut MpopfProblem,
) -> MpopfStatus {
    guard(|| {
        let net = &net.as_ref().ok_or_else(|| null("net"))?.net;
        if out.is_null() {
            return Err(null("out"));
        }
        let scenario = demand_arg(net, demand, horizon)?;
        let qp = QpData::build(net, &scenario, FormulationOptions::default())?;
        let cost = cost_vector(&net.case, &qp.layout, 0);
        put(out, MpopfProblem { qp, cost });
        Ok(())
    })
}

/// # Safety
/// `problem` must come from [`mpopf_problem_new`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn mpopf_problem_free(problem: *mut MpopfProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Length of a stacked schedule for this problem; 0 for a NULL handle.
///
/// # Safety
/// `problem` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mpopf_problem_dim(problem: *const MpopfProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.qp.n())
}

/// Exact least-cost dispatch. Writes the schedule to `x` (capacity `len`)
/// and its generation cost to `cost` (may be NULL).
///
/// # Safety
/// `problem` must be a live handle and `x` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mpopf_dispatch(
    problem: *const MpopfProblem,
    x: *mut f64,
    len: usize,
    cost: *mut f64,
) -> MpopfStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let x = out_slice(x, len, p.qp.n(), "x")?;
        let prog = ConvexProgram::dispatch(&p.qp, &p.cost, LP_REGULARIZATION);
        let sol = InteriorPointSolver::default().solve(&prog, None)?;
        x.copy_from_slice(&sol.x_star);
        if !cost.is_null() {
            *cost = p.cost.iter().zip(&sol.x_star).map(|(c, v)| c * v).sum();
        }
        Ok(())
    })
}

/// Euclidean projection of `z` onto the feasible region, kept with its
/// sensitivity for [`mpopf_projection_vjp`].
///
/// # Safety
/// `problem` must be a live handle and `z` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mpopf_project(
    problem: *const MpopfProblem,
    z: *const f64,
    len: usize,
    out: *mut *mut MpopfProjection,
) -> MpopfStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len != p.qp.n() {
            return Err(Fail(
                MpopfStatus::Dimension,
                format!("z has {len} values, {} needed", p.qp.n()),
            ));
        }
        let z = slice_arg(z, len, "z")?;
        let sol =
            InteriorPointSolver::default().solve(&ConvexProgram::projection(&p.qp, z), None)?;
        let workspace = build_sensitivity(&sol, &p.qp, Thresholds::default())?;
        put(
            out,
            MpopfProjection {
                x: sol.x_star,
                workspace,
            },
        );
        Ok(())
    })
}

/// # Safety
/// `proj` must come from [`mpopf_project`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn mpopf_projection_free(proj: *mut MpopfProjection) {
    if !proj.is_null() {
        drop(Box::from_raw(proj));
    }
}

/// Copy the projected schedule into `x`.
///
/// # Safety
/// `proj` must be a live handle and `x` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mpopf_projection_x(
    proj: *const MpopfProjection,
    x: *mut f64,
    len: usize,
) -> MpopfStatus {
    guard(|| {
        let p = proj.as_ref().ok_or_else(|| null("proj"))?;
        out_slice(x, len, p.x.len(), "x")?.copy_from_slice(&p.x);
        Ok(())
    })
}

/// Vector-Jacobian product `grad_z = (∂x/∂z)ᵀ grad_x`.
///
/// # Safety
/// `proj` must be a live handle; both buffers must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mpopf_projection_vjp(
    proj: *const MpopfProjection,
    grad_x: *const f64,
    grad_z: *mut f64,
    len: usize,
) -> MpopfStatus {
    guard(|| {
        let p = proj.as_ref().ok_or_else(|| null("proj"))?;
        let n = p.x.len();
        if len != n {
            return Err(Fail(
                MpopfStatus::Dimension,
                format!("cotangent has {len} values, {n} needed"),
            ));
        }
        let g = slice_arg(grad_x, len, "grad_x")?;
        let v = p.workspace.vjp(g)?;
        out_slice(grad_z, len, n, "grad_z")?.copy_from_slice(&v);
        Ok(())
    })
}

/// Load a training checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mpopf_model_load(
    path: *const c_char,
    out: *mut *mut MpopfModel,
) -> MpopfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let ckpt = Checkpoint::load(Path::new(path))?;
        put(
            out,
            MpopfModel {
                model: ckpt.model,
                fingerprint: ckpt.case_fingerprint,
            },
        );
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`mpopf_model_load`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn mpopf_model_free(model: *mut MpopfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Feasible schedule predicted by `model` for one scenario; `cost` may be NULL.
///
/// # Safety
/// Handles must be live, `demand` must hold `n_d * horizon` values and `x`
/// must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mpopf_model_infer(
    model: *const MpopfModel,
    net: *const MpopfNetwork,
    demand: *const f64,
    horizon: usize,
    x: *mut f64,
    len: usize,
    cost: *mut f64,
) -> MpopfStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let net = &net.as_ref().ok_or_else(|| null("net"))?.net;
        if m.fingerprint != net.case.fingerprint() {
            return Err(Fail(
                MpopfStatus::Checkpoint,
                format!(
                    "model was trained on a different case than `{}`",
                    net.case.name
                ),
            ));
        }
        let scenario = demand_arg(net, demand, horizon)?;
        let inf = m
            .model
            .infer(net, &scenario, &mut InteriorPointSolver::default())?;
        out_slice(x, len, inf.x.len(), "x")?.copy_from_slice(&inf.x);
        if !cost.is_null() {
            *cost = inf.cost;
        }
        Ok(())
    })
}
