//! C ABI over `gridbarrier`.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `gb_*_free`. Every fallible call returns a [`GbStatus`]; the
//! message for the most recent failure on the calling thread is available
//! from [`gb_last_error_message`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use libc::{c_char, c_int, size_t};

use gridbarrier::baselines::{run_primal_dual, PrimalDualConfig};
use gridbarrier::controller::{self, BarrierConfig};
use gridbarrier::experiment::run_experiment;
use gridbarrier::netmodel::{generate_synthetic_feeder, load_network, save_network, RadialNetwork, SensitivityModel};
use gridbarrier::output::{emit_csv, write_experiment};
use gridbarrier::plant::{tune_perturbation, InverterLimits, Plant};
use gridbarrier::scenario::load_scenario;
use gridbarrier::trajectory::Trajectory;
use gridbarrier::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Validation = 4,
    Io = 5,
    NotActivated = 6,
    Singular = 7,
    Infeasible = 8,
    Numerical = 9,
    Panic = 10,
}

pub struct GbNetwork {
    inner: RadialNetwork,
}

/// Sensitivity model `x = B u + e`, optionally an estimate with its error bound.
pub struct GbModel {
    inner: SensitivityModel,
    eps_b: f64,
    relative_error: f64,
}

pub struct GbTrajectory {
    inner: Trajectory,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GbControllerOptions {
    pub beta: f64,
    pub kappa: f64,
    pub c_p: f64,
    pub c_q: f64,
    /// Voltage limit as a per-unit deviation, e.g. 0.05.
    pub x_bar: f64,
    pub reactive_fraction: f64,
    /// Nonzero pins every upper action bound at zero.
    pub upper_zero: c_int,
    pub max_iters: size_t,
    /// Fixed step size; zero or negative selects `1 / L_s`.
    pub eta: f64,
    pub tolerance: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GbPrimalDualOptions {
    pub eta_p: f64,
    pub eta_d: f64,
    pub epsilon_reg: f64,
    pub max_iters: size_t,
    pub tolerance: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> GbStatus {
    match err {
        Error::Parse { .. } => GbStatus::Parse,
        Error::Validation { .. } | Error::NotATree(_) | Error::NonPositiveImpedance { .. } => GbStatus::Validation,
        Error::Io { .. } => GbStatus::Io,
        Error::NotActivated { .. } => GbStatus::NotActivated,
        Error::SingularMatrix { .. } | Error::SingularKKT | Error::DegenerateConstraint => GbStatus::Singular,
        Error::Infeasible => GbStatus::Infeasible,
        Error::DimensionMismatch(_) => GbStatus::InvalidArgument,
        Error::EmptyActiveSet | Error::MaxPivots(_) => GbStatus::Numerical,
    }
}

struct Failure(GbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GbStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GbStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(GbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Failure(GbStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: size_t) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < src.len() {
        return Err(Failure(GbStatus::InvalidArgument, format!("buffer holds {len} values, need {}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn gb_controller_default_options() -> GbControllerOptions {
    GbControllerOptions {
        beta: controller::DEFAULT_BETA,
        kappa: controller::DEFAULT_KAPPA,
        c_p: 3.0,
        c_q: 1.0,
        x_bar: 0.05,
        reactive_fraction: 0.4,
        upper_zero: 0,
        max_iters: 50_000,
        eta: 0.0,
        tolerance: 1e-8,
    }
}

#[no_mangle]
pub extern "C" fn gb_primal_dual_default_options() -> GbPrimalDualOptions {
    let d = PrimalDualConfig::default();
    GbPrimalDualOptions {
        eta_p: d.eta_p,
        eta_d: d.eta_d,
        epsilon_reg: d.epsilon_reg,
        max_iters: d.max_iters,
        tolerance: d.tolerance,
    }
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn gb_network_generate(n: size_t, seed: u64, overload_factor: f64, out: *mut *mut GbNetwork) -> GbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if n == 0 || !(overload_factor > 0.0) {
            return Err(Failure(GbStatus::InvalidArgument, "need n >= 1 and a positive overload factor".into()));
        }
        let net = generate_synthetic_feeder(n, seed, overload_factor);
        *out = Box::into_raw(Box::new(GbNetwork { inner: net }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gb_network_load(path: *const c_char, out: *mut *mut GbNetwork) -> GbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let net = load_network(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(GbNetwork { inner: net }));
        Ok(())
    })
}

/// # Safety
/// `net` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gb_network_save(net: *const GbNetwork, path: *const c_char) -> GbStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("network"))?;
        save_network(&net.inner, &path_arg(path)?)?;
        Ok(())
    })
}

/// Number of non-slack buses, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn gb_network_bus_count(net: *const GbNetwork) -> size_t {
    net.as_ref().map_or(0, |n| n.inner.n())
}

/// # Safety
/// `net` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gb_network_free(net: *mut GbNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Exact sensitivity model of `net`.
///
/// # Safety
/// `net` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gb_model_build(net: *const GbNetwork, out: *mut *mut GbModel) -> GbStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("network"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = SensitivityModel::from_network(&net.inner)?;
        *out = Box::into_raw(Box::new(GbModel { inner: model, eps_b: 0.0, relative_error: 0.0 }));
        Ok(())
    })
}

/// Estimate of `model` with realized relative error close to `target_error`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gb_model_perturb(model: *const GbModel, target_error: f64, seed: u64, out: *mut *mut GbModel) -> GbStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !(0.0..=2.0).contains(&target_error) {
            return Err(Failure(GbStatus::InvalidArgument, format!("target error {target_error} outside [0, 2]")));
        }
        let est = tune_perturbation(&model.inner.b, target_error, seed);
        let mut inner = model.inner.clone();
        inner.b = est.b_hat;
        *out = Box::into_raw(Box::new(GbModel { inner, eps_b: est.eps_b, relative_error: est.relative_error }));
        Ok(())
    })
}

/// Number of buses `n`; `B` has `n * 2n` entries and `e` has `n`.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gb_model_bus_count(model: *const GbModel) -> size_t {
    model.as_ref().map_or(0, |m| m.inner.n())
}

/// Spectral-norm error bound of an estimate; 0 for an exact model.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gb_model_error_bound(model: *const GbModel) -> f64 {
    model.as_ref().map_or(0.0, |m| m.eps_b)
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gb_model_relative_error(model: *const GbModel) -> f64 {
    model.as_ref().map_or(0.0, |m| m.relative_error)
}

/// Copies `B` in row-major order.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gb_model_sensitivity(model: *const GbModel, out: *mut f64, len: size_t) -> GbStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        copy_out(model.inner.b.as_slice(), out, len)
    })
}

/// Copies the uncontrolled voltage deviation `e`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gb_model_drop(model: *const GbModel, out: *mut f64, len: size_t) -> GbStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        copy_out(&model.inner.e, out, len)
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gb_model_free(model: *mut GbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

fn barrier_config(n: usize, o: &GbControllerOptions) -> Result<BarrierConfig, Failure> {
    let mut cfg = BarrierConfig::new(n, o.c_p, o.c_q, o.x_bar);
    cfg.beta = vec![o.beta; n];
    cfg.kappa = o.kappa;
    cfg.max_iters = o.max_iters;
    cfg.eta_override = (o.eta > 0.0).then_some(o.eta);
    cfg.tolerance = o.tolerance;
    if !(o.x_bar > 0.0) || !(o.tolerance > 0.0) || !(0.0..=1.0).contains(&o.reactive_fraction) {
        return Err(Failure(GbStatus::InvalidArgument, "x_bar, tolerance or reactive_fraction out of range".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Inputs<'a> {
    net: &'a GbNetwork,
    plant: &'a GbModel,
    estimate: &'a GbModel,
    options: GbControllerOptions,
}

unsafe fn inputs<'a>(
    net: *const GbNetwork,
    plant: *const GbModel,
    estimate: *const GbModel,
    options: *const GbControllerOptions,
) -> Result<Inputs<'a>, Failure> {
    let net = net.as_ref().ok_or_else(|| null("network"))?;
    let plant = plant.as_ref().ok_or_else(|| null("plant model"))?;
    let estimate = estimate.as_ref().unwrap_or(plant);
    let options = options.as_ref().copied().unwrap_or_else(|| gb_controller_default_options());
    let n = net.inner.n();
    if plant.inner.n() != n || estimate.inner.n() != n {
        return Err(Failure(GbStatus::InvalidArgument, "models do not match the network".into()));
    }
    Ok(Inputs { net, plant, estimate, options })
}

/// Closed-loop barrier run of `plant` using `estimate` (or `plant` itself when
/// null). `options` may be null for defaults.
///
/// # Safety
/// Handles must be live, `options` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gb_run_barrier(
    net: *const GbNetwork,
    plant: *const GbModel,
    estimate: *const GbModel,
    options: *const GbControllerOptions,
    out: *mut *mut GbTrajectory,
) -> GbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inp = inputs(net, plant, estimate, options)?;
        let n = inp.net.inner.n();
        let cfg = barrier_config(n, &inp.options)?;
        let limits = InverterLimits::from_network(&inp.net.inner, inp.options.reactive_fraction, inp.options.upper_zero != 0);
        let run = controller::run(
            &Plant::new(inp.plant.inner.clone()),
            &inp.estimate.inner.b,
            inp.estimate.eps_b,
            &cfg,
            &limits,
            &inp.net.inner.p_av(),
        )?;
        *out = Box::into_raw(Box::new(GbTrajectory { inner: run.trajectory }));
        Ok(())
    })
}

/// Regularized primal-dual run from the same initial action as the barrier
/// controller. Null option pointers select defaults.
///
/// # Safety
/// Handles must be live, option pointers null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gb_run_primal_dual(
    net: *const GbNetwork,
    plant: *const GbModel,
    estimate: *const GbModel,
    options: *const GbControllerOptions,
    pd_options: *const GbPrimalDualOptions,
    out: *mut *mut GbTrajectory,
) -> GbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inp = inputs(net, plant, estimate, options)?;
        let n = inp.net.inner.n();
        let cfg = barrier_config(n, &inp.options)?;
        let pd = pd_options.as_ref().copied().unwrap_or_else(|| gb_primal_dual_default_options());
        let pd_cfg = PrimalDualConfig {
            eta_p: pd.eta_p,
            eta_d: pd.eta_d,
            epsilon_reg: pd.epsilon_reg,
            max_iters: pd.max_iters,
            tolerance: pd.tolerance,
        };
        let limits = InverterLimits::from_network(&inp.net.inner, inp.options.reactive_fraction, inp.options.upper_zero != 0);
        let mut u0: Vec<f64> = inp.net.inner.p_av().iter().map(|p| (cfg.kappa - 1.0) * p).collect();
        u0.resize(2 * n, 0.0);
        limits.clamp(&mut u0);
        let t = run_primal_dual(
            &Plant::new(inp.plant.inner.clone()),
            &inp.estimate.inner.b,
            &cfg.q_diag,
            &cfg.x_bar,
            &limits,
            &u0,
            &pd_cfg,
        )?;
        *out = Box::into_raw(Box::new(GbTrajectory { inner: t }));
        Ok(())
    })
}

/// Number of records (update steps plus the initial one).
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gb_trajectory_len(t: *const GbTrajectory) -> size_t {
    t.as_ref().map_or(0, |t| t.inner.records.len())
}

/// 1 if the run met its tolerance, 0 otherwise or for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gb_trajectory_converged(t: *const GbTrajectory) -> c_int {
    t.as_ref().map_or(0, |t| c_int::from(t.inner.converged()))
}

/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gb_trajectory_violation_steps(t: *const GbTrajectory) -> size_t {
    t.as_ref().map_or(0, |t| t.inner.violation_steps())
}

/// Copies the per-record maximum voltage deviation.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gb_trajectory_max_x(t: *const GbTrajectory, out: *mut f64, len: size_t) -> GbStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("trajectory"))?;
        let v: Vec<f64> = t.inner.records.iter().map(|r| r.max_x).collect();
        copy_out(&v, out, len)
    })
}

/// Copies the final action (`2n` values).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gb_trajectory_final_u(t: *const GbTrajectory, out: *mut f64, len: size_t) -> GbStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("trajectory"))?;
        copy_out(t.inner.final_u(), out, len)
    })
}

/// # Safety
/// `t` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gb_trajectory_write_csv(t: *const GbTrajectory, path: *const c_char) -> GbStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("trajectory"))?;
        emit_csv(&t.inner, &path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gb_trajectory_free(t: *mut GbTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Runs a scenario file and writes its CSVs, plots and summary into `out_dir`.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn gb_scenario_run(scenario_path: *const c_char, out_dir: *const c_char) -> GbStatus {
    guard(|| {
        let mut sc = load_scenario(&path_arg(scenario_path)?)?;
        sc.apply_seed_env()?;
        let ex = run_experiment(&sc)?;
        write_experiment(&ex, &path_arg(out_dir)?)?;
        Ok(())
    })
}
