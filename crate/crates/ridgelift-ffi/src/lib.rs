//! C ABI for the ridgelift library: opaque handles, status codes, and flat
//! buffers. Every entry point catches panics and stores a thread-local
//! error message retrievable with `rl_last_error_message`.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::{DMatrix, DVector};

use ridgelift::analysis::{compute_bounds, estimate_alpha_mc, pushforward_density, BoundsInputs};
use ridgelift::error::RidgeError;
use ridgelift::model::{LinkFunction, NoiseModel, Oracle, RidgeModel};
use ridgelift::recovery::{
    extract_subspace, recover, subspace_alignment, LowRankEstimate, RecoveryConfig, SolverKind,
};
use ridgelift::sampling::{build_plan, measure, SamplingMode, SamplingPlan};

/// Status code returned by every function in this ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DomainError = 3,
    ShapeError = 4,
    Degenerate = 5,
    NonConvergence = 6,
    BudgetExceeded = 7,
    SearchExhausted = 8,
    Infeasible = 9,
    ParseError = 10,
    IoError = 11,
    Panic = 12,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg);
}

fn status_of(err: &RidgeError) -> RlStatus {
    match err {
        RidgeError::Argument(_) => RlStatus::InvalidArgument,
        RidgeError::Domain { .. } => RlStatus::DomainError,
        RidgeError::Shape(_) => RlStatus::ShapeError,
        RidgeError::Degenerate { .. } => RlStatus::Degenerate,
        RidgeError::NonConvergence { .. } => RlStatus::NonConvergence,
        RidgeError::Budget { .. } => RlStatus::BudgetExceeded,
        RidgeError::SearchExhausted { .. } => RlStatus::SearchExhausted,
        RidgeError::Infeasible { .. } => RlStatus::Infeasible,
        RidgeError::Parse(_) => RlStatus::ParseError,
        RidgeError::Io(_) => RlStatus::IoError,
    }
}

fn guard<F: FnOnce() -> Result<(), RlStatus>>(f: F) -> RlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RlStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in ridgelift".to_string());
            set_error(msg);
            RlStatus::Panic
        }
    }
}

fn fail(err: RidgeError) -> RlStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

/// Opaque ground-truth model handle.
pub struct RlModel {
    inner: RidgeModel,
}

/// Opaque sampling plan handle.
pub struct RlPlan {
    inner: SamplingPlan,
}

/// Opaque measurement vector handle.
pub struct RlMeasurements {
    y: DVector<f64>,
    oracle_calls: u64,
}

/// Opaque recovered-estimate handle.
pub struct RlEstimate {
    inner: LowRankEstimate,
}

/// Inputs for `rl_compute_bounds`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RlBoundsInputs {
    pub d: u64,
    pub k: u64,
    pub m_x: u64,
    pub m_phi: u64,
    pub epsilon: f64,
    pub c2: f64,
    pub alpha: f64,
    pub rho: f64,
    pub kappa: f64,
    pub c0: f64,
    pub eta: f64,
    pub delta: f64,
    pub p1: f64,
    pub p2: f64,
    pub sigma: f64,
    pub gamma: f64,
}

/// Outputs of `rl_compute_bounds`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RlBoundsReport {
    pub q_kappa: f64,
    pub u_kappa: f64,
    pub noise_bound: f64,
    pub lambda_deterministic: f64,
    pub lambda_gaussian: f64,
    pub lambda: f64,
    pub tau_sq: f64,
    pub epsilon_ceiling: f64,
    pub epsilon_ceiling_eta: f64,
    pub epsilon_ceiling_delta: f64,
    pub alignment_floor: f64,
    pub m_x_min: u64,
    pub m_phi_min: u64,
    pub success_probability: f64,
    /// 1 when m_phi < m_x * d holds.
    pub lemma4_precondition_ok: u8,
}

/// Copy the last error message into `buf` (truncated, NUL-terminated);
/// returns the full message length in bytes.
#[no_mangle]
pub extern "C" fn rl_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

fn emit<T>(out: *mut *mut T, value: T) -> Result<(), RlStatus> {
    if out.is_null() {
        set_error("output pointer is null".into());
        return Err(RlStatus::NullPointer);
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn write_out<T>(out: *mut T, value: T) -> Result<(), RlStatus> {
    if out.is_null() {
        set_error("output pointer is null".into());
        return Err(RlStatus::NullPointer);
    }
    unsafe { *out = value };
    Ok(())
}

macro_rules! deref {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(v) => v,
            None => {
                set_error("handle is null".into());
                return Err(RlStatus::NullPointer);
            }
        }
    };
}

/// Logistic model f(x) = 1/(1 + exp(-a^T x)) with a Haar-random unit row.
///
/// # Safety
/// `out` must be a valid pointer; the returned handle must be released with
/// `rl_model_free`.
#[no_mangle]
pub unsafe extern "C" fn rl_model_logistic(d: u64, seed: u64, out: *mut *mut RlModel) -> RlStatus {
    guard(|| {
        let model = RidgeModel::random(d as usize, LinkFunction::logistic(), None, seed)
            .map_err(fail)?;
        emit(out, RlModel { inner: model })
    })
}

/// Quadratic-form model f(x) = ||Ax - b||^2; `offset` may be null for b = 0.
///
/// # Safety
/// `offset`, when non-null, must point to `k` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_model_quadratic(
    d: u64,
    k: u64,
    offset: *const f64,
    seed: u64,
    out: *mut *mut RlModel,
) -> RlStatus {
    guard(|| {
        let b = match slice_arg(offset, k as usize) {
            Some(s) => DVector::from_column_slice(s),
            None => DVector::zeros(k as usize),
        };
        let link = LinkFunction::quadratic_form(b).map_err(fail)?;
        let model = RidgeModel::random(d as usize, link, None, seed).map_err(fail)?;
        emit(out, RlModel { inner: model })
    })
}

/// Additive Gaussian-atom model with per-atom widths and offsets.
///
/// # Safety
/// `sigmas` and `offsets` must point to `k` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_model_sum_gaussians(
    d: u64,
    k: u64,
    sigmas: *const f64,
    offsets: *const f64,
    seed: u64,
    out: *mut *mut RlModel,
) -> RlStatus {
    guard(|| {
        let (sigmas, offsets) = match (slice_arg(sigmas, k as usize), slice_arg(offsets, k as usize))
        {
            (Some(s), Some(o)) => (s.to_vec(), o.to_vec()),
            _ => {
                set_error("sigmas/offsets must not be null".into());
                return Err(RlStatus::NullPointer);
            }
        };
        let link = LinkFunction::sum_of_gaussians(sigmas, offsets).map_err(fail)?;
        let model = RidgeModel::random(d as usize, link, None, seed).map_err(fail)?;
        emit(out, RlModel { inner: model })
    })
}

/// # Safety
/// `model` must come from a model constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rl_model_free(model: *mut RlModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// # Safety
/// `model` must be a live handle; `out_d`/`out_k` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rl_model_dims(
    model: *const RlModel,
    out_d: *mut u64,
    out_k: *mut u64,
) -> RlStatus {
    guard(|| {
        let m = deref!(model);
        write_out(out_d, m.inner.d() as u64)?;
        write_out(out_k, m.inner.k() as u64)
    })
}

/// Noise-free f(x); `x` must hold `d` doubles.
///
/// # Safety
/// `model` live; `x` points to `x_len` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_model_value(
    model: *const RlModel,
    x: *const f64,
    x_len: u64,
    out: *mut f64,
) -> RlStatus {
    guard(|| {
        let m = deref!(model);
        let Some(xs) = (unsafe { slice_arg(x, x_len as usize) }) else {
            set_error("x must not be null".into());
            return Err(RlStatus::NullPointer);
        };
        if xs.len() != m.inner.d() {
            return Err(fail(RidgeError::shape(format!(
                "x has length {}, model dimension is {}",
                xs.len(),
                m.inner.d()
            ))));
        }
        write_out(out, m.inner.value(&DVector::from_column_slice(xs)))
    })
}

/// Smoothness constant C2 recorded for the model's link.
///
/// # Safety
/// `model` live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_model_c2(model: *const RlModel, out: *mut f64) -> RlStatus {
    guard(|| {
        let m = deref!(model);
        write_out(out, m.inner.c2())
    })
}

/// Dense sampling plan: m_x centers on the sphere, m_phi Rademacher
/// directions per center.
///
/// # Safety
/// `out` must be valid; release with `rl_plan_free`.
#[no_mangle]
pub unsafe extern "C" fn rl_plan_dense(
    d: u64,
    k: u64,
    m_x: u64,
    m_phi: u64,
    epsilon: f64,
    seed: u64,
    out: *mut *mut RlPlan,
) -> RlStatus {
    guard(|| {
        let plan = build_plan(
            d as usize,
            k as usize,
            m_x as usize,
            m_phi as usize,
            epsilon,
            SamplingMode::Dense,
            seed,
        )
        .map_err(fail)?;
        emit(out, RlPlan { inner: plan })
    })
}

/// Subset-selection plan sampling `fill` of the (i, j) grid.
///
/// # Safety
/// `out` must be valid; release with `rl_plan_free`.
#[no_mangle]
pub unsafe extern "C" fn rl_plan_subset(
    d: u64,
    k: u64,
    m_x: u64,
    m_phi: u64,
    epsilon: f64,
    fill: f64,
    seed: u64,
    out: *mut *mut RlPlan,
) -> RlStatus {
    guard(|| {
        let plan = build_plan(
            d as usize,
            k as usize,
            m_x as usize,
            m_phi as usize,
            epsilon,
            SamplingMode::SubsetSelection { fill },
            seed,
        )
        .map_err(fail)?;
        emit(out, RlPlan { inner: plan })
    })
}

/// # Safety
/// `plan` must come from a plan constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rl_plan_free(plan: *mut RlPlan) {
    if !plan.is_null() {
        drop(unsafe { Box::from_raw(plan) });
    }
}

/// Number of measurements the plan produces (m_phi dense, |Omega| subset).
///
/// # Safety
/// `plan` live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_plan_measurement_len(plan: *const RlPlan, out: *mut u64) -> RlStatus {
    guard(|| {
        let p = deref!(plan);
        write_out(out, p.inner.measurement_len() as u64)
    })
}

/// eps_bar = epsilon sqrt(d/m_phi), the domain enlargement.
///
/// # Safety
/// `plan` live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_plan_enlarged_radius(plan: *const RlPlan, out: *mut f64) -> RlStatus {
    guard(|| {
        let p = deref!(plan);
        write_out(out, p.inner.enlarged_radius())
    })
}

/// Assemble finite-difference measurements of the model under the plan,
/// with optional Gaussian and sparse oracle noise.
///
/// # Safety
/// `model` and `plan` live; `out` valid; release with
/// `rl_measurements_free`.
#[no_mangle]
pub unsafe extern "C" fn rl_measure(
    model: *const RlModel,
    plan: *const RlPlan,
    gaussian_sigma: f64,
    sparse_prob: f64,
    sparse_sigma: f64,
    noise_seed: u64,
    out: *mut *mut RlMeasurements,
) -> RlStatus {
    guard(|| {
        let m = deref!(model);
        let p = deref!(plan);
        let noise =
            NoiseModel::new(gaussian_sigma, sparse_prob, sparse_sigma, noise_seed).map_err(fail)?;
        let mut oracle = Oracle::new(&m.inner, noise, 1.0 + p.inner.enlarged_radius());
        let ms = measure(&mut oracle, &p.inner).map_err(fail)?;
        emit(
            out,
            RlMeasurements {
                y: ms.y,
                oracle_calls: ms.oracle_calls,
            },
        )
    })
}

/// # Safety
/// `ms` must come from `rl_measure` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rl_measurements_free(ms: *mut RlMeasurements) {
    if !ms.is_null() {
        drop(unsafe { Box::from_raw(ms) });
    }
}

/// # Safety
/// `ms` live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_measurements_len(ms: *const RlMeasurements, out: *mut u64) -> RlStatus {
    guard(|| {
        let m = deref!(ms);
        write_out(out, m.y.len() as u64)
    })
}

/// # Safety
/// `ms` live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_measurements_oracle_calls(
    ms: *const RlMeasurements,
    out: *mut u64,
) -> RlStatus {
    guard(|| {
        let m = deref!(ms);
        write_out(out, m.oracle_calls)
    })
}

/// Copy the measurement vector into `buf` (`cap` doubles); fails on a
/// too-small buffer.
///
/// # Safety
/// `ms` live; `buf` points to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rl_measurements_copy(
    ms: *const RlMeasurements,
    buf: *mut f64,
    cap: u64,
) -> RlStatus {
    guard(|| {
        let m = deref!(ms);
        if buf.is_null() {
            set_error("buffer is null".into());
            return Err(RlStatus::NullPointer);
        }
        if (cap as usize) < m.y.len() {
            return Err(fail(RidgeError::shape(format!(
                "buffer holds {cap} doubles, need {}",
                m.y.len()
            ))));
        }
        unsafe { std::ptr::copy_nonoverlapping(m.y.as_ptr(), buf, m.y.len()) };
        Ok(())
    })
}

unsafe fn run_solver(
    plan: *const RlPlan,
    ms: *const RlMeasurements,
    config: RecoveryConfig,
    out: *mut *mut RlEstimate,
) -> Result<(), RlStatus> {
    let p = deref!(plan);
    let m = deref!(ms);
    let op = p.inner.operator();
    let est = recover(&m.y, &op, &config).map_err(fail)?;
    emit(out, RlEstimate { inner: est })
}

/// Rank-projected gradient recovery (adaptive step).
///
/// # Safety
/// `plan`, `ms` live; `out` valid; release with `rl_estimate_free`.
#[no_mangle]
pub unsafe extern "C" fn rl_recover_rank_projected(
    plan: *const RlPlan,
    ms: *const RlMeasurements,
    target_rank: u64,
    max_iter: u64,
    tol: f64,
    seed: u64,
    out: *mut *mut RlEstimate,
) -> RlStatus {
    guard(|| {
        let config = RecoveryConfig {
            lambda: f64::INFINITY,
            target_rank: target_rank as usize,
            solver: SolverKind::RankProjected {
                step: None,
                max_iter: max_iter as usize,
                tol,
            },
            seed,
        };
        unsafe { run_solver(plan, ms, config, out) }
    })
}

/// Nuclear-norm solver targeting the Dantzig feasibility radius `lambda`.
///
/// # Safety
/// `plan`, `ms` live; `out` valid; release with `rl_estimate_free`.
#[no_mangle]
pub unsafe extern "C" fn rl_recover_nuclear(
    plan: *const RlPlan,
    ms: *const RlMeasurements,
    target_rank: u64,
    lambda: f64,
    max_iter: u64,
    tol: f64,
    seed: u64,
    out: *mut *mut RlEstimate,
) -> RlStatus {
    guard(|| {
        let config = RecoveryConfig {
            lambda,
            target_rank: target_rank as usize,
            solver: SolverKind::NuclearProx {
                step: None,
                mu0: None,
                max_iter: max_iter as usize,
                tol,
            },
            seed,
        };
        unsafe { run_solver(plan, ms, config, out) }
    })
}

/// Sparse + low-rank recovery for subset measurements with up to
/// `sparsity` corrupted entries.
///
/// # Safety
/// `plan`, `ms` live; `out` valid; release with `rl_estimate_free`.
#[no_mangle]
pub unsafe extern "C" fn rl_recover_sparse_low_rank(
    plan: *const RlPlan,
    ms: *const RlMeasurements,
    target_rank: u64,
    sparsity: u64,
    max_iter: u64,
    tol: f64,
    seed: u64,
    out: *mut *mut RlEstimate,
) -> RlStatus {
    guard(|| {
        let config = RecoveryConfig {
            lambda: f64::INFINITY,
            target_rank: target_rank as usize,
            solver: SolverKind::SparseLowRank {
                sparsity: sparsity as usize,
                step: None,
                max_iter: max_iter as usize,
                tol,
            },
            seed,
        };
        unsafe { run_solver(plan, ms, config, out) }
    })
}

/// # Safety
/// `est` must come from a recovery call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rl_estimate_free(est: *mut RlEstimate) {
    if !est.is_null() {
        drop(unsafe { Box::from_raw(est) });
    }
}

/// # Safety
/// `est` live; `out_iterations`, `out_residual`, `out_feasible` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_estimate_stats(
    est: *const RlEstimate,
    out_iterations: *mut u64,
    out_residual: *mut f64,
    out_feasible: *mut u8,
) -> RlStatus {
    guard(|| {
        let e = deref!(est);
        write_out(out_iterations, e.inner.iterations as u64)?;
        write_out(out_residual, e.inner.residual_spectral)?;
        write_out(out_feasible, e.inner.dantzig_feasible as u8)
    })
}

/// Write the k x d row-orthonormal subspace estimate into `buf`
/// (row-major, k*d doubles).
///
/// # Safety
/// `est` live; `buf` points to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rl_estimate_subspace(
    est: *const RlEstimate,
    k: u64,
    buf: *mut f64,
    cap: u64,
) -> RlStatus {
    guard(|| {
        let e = deref!(est);
        let sub = extract_subspace(&e.inner, k as usize).map_err(fail)?;
        let a_hat = sub.a_hat();
        let need = a_hat.nrows() * a_hat.ncols();
        if buf.is_null() {
            set_error("buffer is null".into());
            return Err(RlStatus::NullPointer);
        }
        if (cap as usize) < need {
            return Err(fail(RidgeError::shape(format!(
                "buffer holds {cap} doubles, need {need}"
            ))));
        }
        for r in 0..a_hat.nrows() {
            for c in 0..a_hat.ncols() {
                unsafe { *buf.add(r * a_hat.ncols() + c) = a_hat[(r, c)] };
            }
        }
        Ok(())
    })
}

/// Alignment (1/k) ||A A-hat^T||_F^2 between the model's row space and the
/// estimate's leading-k subspace.
///
/// # Safety
/// `model`, `est` live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_alignment(
    model: *const RlModel,
    est: *const RlEstimate,
    k: u64,
    out: *mut f64,
) -> RlStatus {
    guard(|| {
        let m = deref!(model);
        let e = deref!(est);
        let sub = extract_subspace(&e.inner, k as usize).map_err(fail)?;
        let alignment = subspace_alignment(m.inner.a(), sub.a_hat()).map_err(fail)?;
        write_out(out, alignment)
    })
}

/// Monte Carlo estimate of the conditioning parameter alpha.
///
/// # Safety
/// `model` live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_estimate_alpha_mc(
    model: *const RlModel,
    n_samples: u64,
    seed: u64,
    out: *mut f64,
) -> RlStatus {
    guard(|| {
        let m = deref!(model);
        let est = estimate_alpha_mc(&m.inner, n_samples as usize, seed).map_err(fail)?;
        write_out(out, est.alpha_hat)
    })
}

/// Push-forward density of the sphere measure at `y` (k doubles, |y| < 1).
///
/// # Safety
/// `y` points to `k` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_pushforward_density(
    y: *const f64,
    k: u64,
    d: u64,
    out: *mut f64,
) -> RlStatus {
    guard(|| {
        let Some(ys) = (unsafe { slice_arg(y, k as usize) }) else {
            set_error("y must not be null".into());
            return Err(RlStatus::NullPointer);
        };
        let value =
            pushforward_density(&DVector::from_column_slice(ys), d as usize).map_err(fail)?;
        write_out(out, value)
    })
}

/// Evaluate every closed-form bound; pure and deterministic.
///
/// # Safety
/// `inputs` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rl_compute_bounds(
    inputs: *const RlBoundsInputs,
    out: *mut RlBoundsReport,
) -> RlStatus {
    guard(|| {
        let i = deref!(inputs);
        let mut b = BoundsInputs::new(
            i.d as usize,
            i.k as usize,
            i.m_x as usize,
            i.m_phi as usize,
            i.epsilon,
            i.c2,
            i.alpha,
        );
        b.rho = i.rho;
        b.kappa = i.kappa;
        b.c0 = i.c0;
        b.eta = i.eta;
        b.delta = i.delta;
        b.p1 = i.p1;
        b.p2 = i.p2;
        b.sigma = i.sigma;
        b.gamma = i.gamma;
        let report = compute_bounds(&b).map_err(fail)?;
        write_out(
            out,
            RlBoundsReport {
                q_kappa: report.q_kappa,
                u_kappa: report.u_kappa,
                noise_bound: report.noise_bound,
                lambda_deterministic: report.lambda_deterministic,
                lambda_gaussian: report.lambda_gaussian,
                lambda: report.lambda,
                tau_sq: report.tau_sq,
                epsilon_ceiling: report.epsilon_ceiling,
                epsilon_ceiling_eta: report.epsilon_ceiling_eta,
                epsilon_ceiling_delta: report.epsilon_ceiling_delta,
                alignment_floor: report.alignment_floor,
                m_x_min: report.m_x_min as u64,
                m_phi_min: report.m_phi_min as u64,
                success_probability: report.success_probability,
                lemma4_precondition_ok: report.lemma4_precondition_ok as u8,
            },
        )
    })
}

/// Matrix form of X = A^T G for a set of centers, for binding-side tests:
/// fills `buf` with the model's exact gradient matrix at the plan centers
/// (d x m_x, column-major).
///
/// # Safety
/// `model` and `plan` live; `buf` holds `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rl_model_exact_x(
    model: *const RlModel,
    plan: *const RlPlan,
    buf: *mut f64,
    cap: u64,
) -> RlStatus {
    guard(|| {
        let m = deref!(model);
        let p = deref!(plan);
        let x: DMatrix<f64> = m.inner.exact_x(p.inner.centers());
        let need = x.nrows() * x.ncols();
        if buf.is_null() {
            set_error("buffer is null".into());
            return Err(RlStatus::NullPointer);
        }
        if (cap as usize) < need {
            return Err(fail(RidgeError::shape(format!(
                "buffer holds {cap} doubles, need {need}"
            ))));
        }
        unsafe { std::ptr::copy_nonoverlapping(x.as_slice().as_ptr(), buf, need) };
        Ok(())
    })
}
