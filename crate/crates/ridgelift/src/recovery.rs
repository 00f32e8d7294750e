//! Low-rank recovery of X = A^T G from measurements, and extraction of the
//! estimated subspace from its SVD.
//!
//! Three solvers share one entry point:
//!
//! * `NuclearProx` targets the matrix Dantzig selector's feasibility
//!   condition ||Phi*(y - Phi(M))|| <= lambda by minimizing
//!   0.5 ||Phi(M) - y||^2 + mu ||M||_* with a monotone accelerated proximal
//!   gradient (singular-value soft thresholding) and halving mu until the
//!   constraint is met or mu underflows.
//! * `RankProjected` iterates a gradient step followed by the best rank-k
//!   projection.
//! * `SparseLowRank` alternates the rank-k projection with hard thresholding
//!   of a sparse corruption vector, for subset-selection measurements.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, RidgeError};
use crate::linalg::{singular_value_threshold, spectral_norm, thin_svd, ThinSvd};
use crate::sampling::{rip_diagnostic, MeasurementOperator};

/// Iterations without even a 0.01% best-residual improvement before a
/// solver declares a stall and returns its current iterate. Near the
/// sampling phase transition the projection solvers converge linearly with
/// rates well under 1% per iteration, so the window must outlast long
/// shallow stretches.
const STALL_WINDOW: usize = 60;
const STALL_REL_IMPROVEMENT: f64 = 1e-4;
/// Residual blow-up factor treated as divergence.
const DIVERGENCE_FACTOR: f64 = 1e8;
/// Continuation floor relative to the initial mu.
const MU_FLOOR_RATIO: f64 = 1e-12;
/// Singular values below this are treated as zero when extracting A-hat.
const DEGENERATE_SIGMA: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum SolverKind {
    NuclearProx {
        /// Gradient step; `None` estimates 1/||Phi||^2 by power iteration.
        step: Option<f64>,
        /// Initial nuclear-norm weight; `None` uses 0.25 ||Phi*(y)||.
        mu0: Option<f64>,
        max_iter: usize,
        tol: f64,
    },
    RankProjected {
        /// Gradient step; `None` measures the RIP constant and uses
        /// 1 / (1 + kappa_hat).
        step: Option<f64>,
        max_iter: usize,
        tol: f64,
    },
    SparseLowRank {
        /// Number of measurement entries the sparse term may absorb.
        sparsity: usize,
        step: Option<f64>,
        max_iter: usize,
        tol: f64,
    },
}

impl SolverKind {
    fn max_iter(&self) -> usize {
        match self {
            SolverKind::NuclearProx { max_iter, .. }
            | SolverKind::RankProjected { max_iter, .. }
            | SolverKind::SparseLowRank { max_iter, .. } => *max_iter,
        }
    }

    fn tol(&self) -> f64 {
        match self {
            SolverKind::NuclearProx { tol, .. }
            | SolverKind::RankProjected { tol, .. }
            | SolverKind::SparseLowRank { tol, .. } => *tol,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryConfig {
    /// Dantzig radius; the recovered X should satisfy
    /// ||Phi*(y - Phi(X))|| <= lambda.
    pub lambda: f64,
    pub target_rank: usize,
    pub solver: SolverKind,
    pub seed: u64,
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(RidgeError::argument("lambda must be >= 0"));
        }
        if self.target_rank == 0 {
            return Err(RidgeError::argument("target rank must be >= 1"));
        }
        if self.solver.max_iter() == 0 {
            return Err(RidgeError::argument("max_iter must be >= 1"));
        }
        if !(self.solver.tol() > 0.0) {
            return Err(RidgeError::argument("tol must be > 0"));
        }
        Ok(())
    }

    pub fn rank_projected(target_rank: usize, seed: u64) -> Self {
        RecoveryConfig {
            lambda: 0.0,
            target_rank,
            solver: SolverKind::RankProjected {
                step: None,
                max_iter: 300,
                tol: 1e-9,
            },
            seed,
        }
    }

    pub fn nuclear_prox(target_rank: usize, lambda: f64, seed: u64) -> Self {
        RecoveryConfig {
            lambda,
            target_rank,
            solver: SolverKind::NuclearProx {
                step: None,
                mu0: None,
                max_iter: 2000,
                tol: 1e-8,
            },
            seed,
        }
    }

    pub fn sparse_low_rank(target_rank: usize, sparsity: usize, seed: u64) -> Self {
        RecoveryConfig {
            lambda: 0.0,
            target_rank,
            solver: SolverKind::SparseLowRank {
                sparsity,
                step: None,
                max_iter: 400,
                tol: 1e-9,
            },
            seed,
        }
    }
}

/// One solver iteration for the trace CSV.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iteration: usize,
    /// 0.5 ||Phi(X) - y||^2 plus, for the nuclear solver, mu ||X||_*.
    pub objective: f64,
    /// l2 measurement residual ||Phi(X) - y|| at this iterate.
    pub residual: f64,
    /// Nuclear-norm weight in force (NaN for the projection solvers).
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct LowRankEstimate {
    pub x_hat: DMatrix<f64>,
    /// Descending singular values of `x_hat`.
    pub singular_values: DVector<f64>,
    pub iterations: usize,
    /// ||Phi*(y - Phi(x_hat))|| at exit.
    pub residual_spectral: f64,
    /// residual_spectral <= lambda + tol.
    pub dantzig_feasible: bool,
    pub trace: Vec<TraceRow>,
    svd: ThinSvd,
}

impl LowRankEstimate {
    pub fn svd(&self) -> &ThinSvd {
        &self.svd
    }

    /// Wrap an explicit matrix as an estimate (diagnostic/test path).
    pub fn from_matrix(x: DMatrix<f64>) -> Self {
        let svd = thin_svd(&x);
        LowRankEstimate {
            singular_values: svd.sigma.clone(),
            x_hat: x,
            iterations: 0,
            residual_spectral: 0.0,
            dantzig_feasible: true,
            trace: Vec::new(),
            svd,
        }
    }
}

/// Row-orthonormal basis of the recovered subspace: rows are the leading k
/// left singular vectors of X-hat.
#[derive(Debug, Clone)]
pub struct SubspaceEstimate {
    a_hat: DMatrix<f64>,
    sigma: DVector<f64>,
}

impl SubspaceEstimate {
    pub fn a_hat(&self) -> &DMatrix<f64> {
        &self.a_hat
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn k(&self) -> usize {
        self.a_hat.nrows()
    }

    pub fn d(&self) -> usize {
        self.a_hat.ncols()
    }
}

/// Dantzig radius from the deterministic Taylor term plus, for sigma > 0,
/// the amplified Gaussian term with m = max(m_phi, m_x).
#[allow(clippy::too_many_arguments)]
pub fn choose_lambda(
    c2: f64,
    k: usize,
    d: usize,
    m_x: usize,
    m_phi: usize,
    epsilon: f64,
    kappa1: f64,
    sigma: f64,
    gamma: f64,
) -> Result<f64> {
    if !(kappa1 > 0.0 && kappa1 < 1.0) {
        return Err(RidgeError::argument("kappa1 must lie in (0, 1)"));
    }
    let gamma_floor = 2.0 * (12.0f64).ln().sqrt();
    if sigma > 0.0 && gamma <= gamma_floor {
        return Err(RidgeError::argument(format!(
            "gamma must exceed 2 sqrt(log 12) = {gamma_floor:.6}"
        )));
    }
    let k2 = (k * k) as f64;
    let deterministic = c2 * epsilon * d as f64 * m_x as f64 * k2 * (1.0 + kappa1).sqrt()
        / (2.0 * (m_phi as f64).sqrt());
    let gaussian = if sigma > 0.0 {
        let m = m_phi.max(m_x) as f64;
        2.0 * gamma * sigma / epsilon * (2.0 * m * (1.0 + kappa1) * m_x as f64).sqrt()
    } else {
        0.0
    };
    Ok(deterministic + gaussian)
}

fn check_measurements(op: &MeasurementOperator<'_>, y: &DVector<f64>) -> Result<()> {
    if y.len() != op.output_len() {
        return Err(RidgeError::shape(format!(
            "measurement vector has length {}, operator produces {}",
            y.len(),
            op.output_len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(RidgeError::argument("measurements must be finite"));
    }
    Ok(())
}

/// ||Phi*(y - Phi(x))||, the Dantzig selector residual.
pub fn dantzig_residual(
    op: &MeasurementOperator<'_>,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
) -> Result<f64> {
    let r = y - op.apply(x)?;
    Ok(spectral_norm(&op.adjoint(&r)?))
}

/// Power-iteration estimate of ||Phi||^2 over the full matrix space, with a
/// small safety margin; the nuclear solver's Lipschitz constant.
fn operator_norm_sq(op: &MeasurementOperator<'_>, seed: u64) -> Result<f64> {
    let (d, m_x) = op.input_shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DMatrix::<f64>::from_fn(d, m_x, |_, _| StandardNormal.sample(&mut rng));
    let mut lambda = 1.0;
    for _ in 0..30 {
        let w = op.adjoint(&op.apply(&v)?)?;
        lambda = w.norm();
        if lambda <= 1e-300 {
            return Ok(1.0);
        }
        v = w / lambda;
    }
    Ok(lambda * 1.05)
}

/// Default gradient step 1 / (1 + kappa_hat) from a quick RIP measurement at
/// rank 2k (bounded by the matrix size).
pub fn default_projection_step(
    op: &MeasurementOperator<'_>,
    target_rank: usize,
    seed: u64,
) -> Result<f64> {
    let (d, m_x) = op.input_shape();
    let rank = (2 * target_rank).min(d.min(m_x));
    let diag = rip_diagnostic(op, rank.max(1), 8, seed)?;
    Ok(1.0 / (1.0 + diag.kappa_hat))
}

struct ExitState {
    iterations: usize,
    converged: bool,
    stalled: bool,
    diverged: bool,
    last_residual: f64,
}

fn finalize(
    op: &MeasurementOperator<'_>,
    y: &DVector<f64>,
    x: DMatrix<f64>,
    config: &RecoveryConfig,
    exit: ExitState,
    trace: Vec<TraceRow>,
) -> Result<LowRankEstimate> {
    if exit.diverged {
        return Err(RidgeError::NonConvergence {
            iterations: exit.iterations,
            residual: exit.last_residual,
        });
    }
    let residual_spectral = dantzig_residual(op, y, &x)?;
    let dantzig_feasible = residual_spectral <= config.lambda + config.solver.tol();
    if !exit.converged && !exit.stalled && !dantzig_feasible {
        return Err(RidgeError::NonConvergence {
            iterations: exit.iterations,
            residual: residual_spectral,
        });
    }
    let svd = thin_svd(&x);
    Ok(LowRankEstimate {
        singular_values: svd.sigma.clone(),
        x_hat: x,
        iterations: exit.iterations,
        residual_spectral,
        dantzig_feasible,
        trace,
        svd,
    })
}

/// Tracks the best residual seen and flags stalls and divergence.
struct Progress {
    best: f64,
    initial: f64,
    since_improvement: usize,
}

impl Progress {
    fn new(initial: f64) -> Self {
        Progress {
            best: initial,
            initial,
            since_improvement: 0,
        }
    }

    fn update(&mut self, residual: f64) -> (bool, bool) {
        let diverged =
            !residual.is_finite() || residual > DIVERGENCE_FACTOR * self.initial.max(1e-300);
        if residual < self.best * (1.0 - STALL_REL_IMPROVEMENT) {
            self.best = residual;
            self.since_improvement = 0;
        } else {
            self.best = self.best.min(residual);
            self.since_improvement += 1;
        }
        (self.since_improvement >= STALL_WINDOW, diverged)
    }
}

/// Recover a low-rank X from `y` with the configured solver.
pub fn recover(
    y: &DVector<f64>,
    op: &MeasurementOperator<'_>,
    config: &RecoveryConfig,
) -> Result<LowRankEstimate> {
    config.validate()?;
    check_measurements(op, y)?;
    let (d, m_x) = op.input_shape();
    if config.target_rank > d.min(m_x) {
        return Err(RidgeError::argument(format!(
            "target rank {} exceeds min(d, m_x) = {}",
            config.target_rank,
            d.min(m_x)
        )));
    }
    match &config.solver {
        SolverKind::NuclearProx {
            step,
            mu0,
            max_iter,
            tol,
        } => nuclear_prox(y, op, config, *step, *mu0, *max_iter, *tol),
        SolverKind::RankProjected {
            step,
            max_iter,
            tol,
        } => rank_projected(y, op, config, *step, *max_iter, *tol),
        SolverKind::SparseLowRank {
            sparsity,
            step,
            max_iter,
            tol,
        } => sparse_low_rank(y, op, config, *sparsity, *step, *max_iter, *tol),
    }
}

/// One descent step for the projection solvers. With a fixed step this is
/// the classic gradient step followed by rank-k truncation. Without one, the
/// step starts from the exact line search along the gradient restricted to
/// the current column span (the per-direction sharpening of 1/(1 + kappa):
/// ||Phi(g)||^2 / ||g||^2 is the measured isometry ratio of that direction)
/// and backtracks until the residual strictly decreases.
struct ProjectionStep {
    fixed: Option<f64>,
    rank: usize,
}

struct StepOutcome {
    svd: ThinSvd,
    x: DMatrix<f64>,
    residual_vec: DVector<f64>,
    res2: f64,
    accepted: bool,
}

impl ProjectionStep {
    fn descend(
        &self,
        op: &MeasurementOperator<'_>,
        target: &DVector<f64>,
        x: &DMatrix<f64>,
        basis: Option<&DMatrix<f64>>,
        grad: &DMatrix<f64>,
        res2: f64,
    ) -> Result<StepOutcome> {
        let project = |step: f64| -> Result<(ThinSvd, DMatrix<f64>, DVector<f64>, f64)> {
            let svd = thin_svd(&(x + step * grad)).truncated(self.rank);
            let cand = svd.reconstruct();
            let r = target - op.apply(&cand)?;
            let res2_new = r.norm_squared();
            Ok((svd, cand, r, res2_new))
        };
        if let Some(step) = self.fixed {
            let (svd, cand, r, res2_new) = project(step)?;
            return Ok(StepOutcome {
                svd,
                x: cand,
                residual_vec: r,
                res2: res2_new,
                accepted: true,
            });
        }
        let g_proj = match basis {
            Some(u) => u * (u.transpose() * grad),
            None => grad.clone(),
        };
        let gp2 = g_proj.norm_squared();
        let denom = op.apply(&g_proj)?.norm_squared();
        let mut step = if denom > 1e-300 { gp2 / denom } else { 1.0 };
        for _ in 0..15 {
            let (svd, cand, r, res2_new) = project(step)?;
            if res2_new <= res2 - 1e-4 * step * gp2 || res2_new < res2 * (1.0 - 1e-14) {
                return Ok(StepOutcome {
                    svd,
                    x: cand,
                    residual_vec: r,
                    res2: res2_new,
                    accepted: true,
                });
            }
            step *= 0.5;
        }
        // no descent available along this direction
        let (svd, cand, r, res2_new) = project(0.0)?;
        Ok(StepOutcome {
            svd,
            x: cand,
            residual_vec: r,
            res2: res2_new,
            accepted: false,
        })
    }
}

fn rank_projected(
    y: &DVector<f64>,
    op: &MeasurementOperator<'_>,
    config: &RecoveryConfig,
    step: Option<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<LowRankEstimate> {
    let stepper = ProjectionStep {
        fixed: step,
        rank: config.target_rank,
    };
    let (d, m_x) = op.input_shape();
    let mut x = DMatrix::<f64>::zeros(d, m_x);
    let mut basis: Option<DMatrix<f64>> = None;
    let mut r = y.clone();
    let mut res2 = r.norm_squared();
    let mut trace = Vec::new();
    let mut progress = Progress::new(y.norm());
    let mut exit = ExitState {
        iterations: 0,
        converged: false,
        stalled: false,
        diverged: false,
        last_residual: y.norm(),
    };
    for t in 1..=max_iter {
        let grad = op.adjoint(&r)?;
        let outcome = stepper.descend(op, y, &x, basis.as_ref(), &grad, res2)?;
        exit.iterations = t;
        if !outcome.accepted {
            exit.stalled = true;
            break;
        }
        let shift = (&outcome.x - &x).norm();
        let scale = outcome.x.norm().max(1.0);
        x = outcome.x;
        basis = Some(outcome.svd.u);
        r = outcome.residual_vec;
        res2 = outcome.res2;
        let residual = res2.sqrt();
        exit.last_residual = residual;
        trace.push(TraceRow {
            iteration: t,
            objective: 0.5 * res2,
            residual,
            mu: f64::NAN,
        });
        if shift <= tol * scale {
            exit.converged = true;
            break;
        }
        let (stalled, diverged) = progress.update(residual);
        if diverged {
            exit.diverged = true;
            break;
        }
        if stalled {
            exit.stalled = true;
            break;
        }
    }
    finalize(op, y, x, config, exit, trace)
}

fn nuclear_prox(
    y: &DVector<f64>,
    op: &MeasurementOperator<'_>,
    config: &RecoveryConfig,
    step: Option<f64>,
    mu0: Option<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<LowRankEstimate> {
    let (d, m_x) = op.input_shape();
    if y.norm() == 0.0 {
        // zero is feasible with minimal nuclear norm
        let exit = ExitState {
            iterations: 0,
            converged: true,
            stalled: false,
            diverged: false,
            last_residual: 0.0,
        };
        return finalize(op, y, DMatrix::zeros(d, m_x), config, exit, Vec::new());
    }
    let step = match step {
        Some(s) => s,
        None => 1.0 / operator_norm_sq(op, config.seed ^ 0xa5a5)?,
    };
    let mut mu = match mu0 {
        Some(m) => m,
        None => 0.25 * spectral_norm(&op.adjoint(y)?),
    };
    let mu_floor = mu * MU_FLOOR_RATIO;

    let mut x = DMatrix::<f64>::zeros(d, m_x);
    let mut x_nuclear = 0.0;
    let mut trace = Vec::new();
    let mut progress = Progress::new(y.norm());
    let mut exit = ExitState {
        iterations: 0,
        converged: false,
        stalled: false,
        diverged: false,
        last_residual: y.norm(),
    };

    'continuation: loop {
        // monotone accelerated proximal gradient at fixed mu
        let mut w = x.clone();
        let mut t_momentum = 1.0f64;
        let mut f_x = {
            let r = op.apply(&x)? - y;
            0.5 * r.norm_squared() + mu * x_nuclear
        };
        loop {
            if exit.iterations >= max_iter {
                break 'continuation;
            }
            exit.iterations += 1;

            let grad = op.adjoint(&(op.apply(&w)? - y))?;
            let (z, z_nuclear) = singular_value_threshold(&(&w - step * grad), step * mu);
            let rz = op.apply(&z)? - y;
            let f_z = 0.5 * rz.norm_squared() + mu * z_nuclear;

            // keep the better of candidate and incumbent: objective never rises
            let (x_next, f_next, nuc_next) = if f_z <= f_x {
                (z.clone(), f_z, z_nuclear)
            } else {
                (x.clone(), f_x, x_nuclear)
            };

            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_momentum * t_momentum).sqrt());
            w = &x_next
                + (t_momentum / t_next) * (&z - &x_next)
                + ((t_momentum - 1.0) / t_next) * (&x_next - &x);
            t_momentum = t_next;

            let rel_change = (f_x - f_next).abs() / f_x.abs().max(1e-300);
            x = x_next;
            x_nuclear = nuc_next;
            f_x = f_next;

            let residual = rz.norm();
            exit.last_residual = residual;
            trace.push(TraceRow {
                iteration: exit.iterations,
                objective: f_x,
                residual,
                mu,
            });
            let (_, diverged) = progress.update(residual);
            if diverged {
                exit.diverged = true;
                break 'continuation;
            }
            if rel_change <= tol {
                break; // inner problem solved at this mu
            }
        }

        let s = dantzig_residual(op, y, &x)?;
        if s <= config.lambda + tol {
            exit.converged = true;
            break;
        }
        mu *= 0.5;
        if mu < mu_floor {
            exit.stalled = true;
            break;
        }
    }
    finalize(op, y, x, config, exit, trace)
}

fn hard_threshold_into(residual: &DVector<f64>, sparsity: usize, out: &mut DVector<f64>) {
    out.fill(0.0);
    if sparsity == 0 {
        return;
    }
    let n = residual.len();
    if sparsity >= n {
        out.copy_from(residual);
        return;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.select_nth_unstable_by(sparsity - 1, |&a, &b| {
        residual[b]
            .abs()
            .partial_cmp(&residual[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    for &e in &idx[..sparsity] {
        out[e] = residual[e];
    }
}

fn sparse_low_rank(
    y: &DVector<f64>,
    op: &MeasurementOperator<'_>,
    config: &RecoveryConfig,
    sparsity: usize,
    step: Option<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<LowRankEstimate> {
    let stepper = ProjectionStep {
        fixed: step,
        rank: config.target_rank,
    };
    let (d, m_x) = op.input_shape();
    let mut x = DMatrix::<f64>::zeros(d, m_x);
    let mut basis: Option<DMatrix<f64>> = None;
    let mut sparse = DVector::<f64>::zeros(y.len());
    let mut trace = Vec::new();
    let mut progress = Progress::new(y.norm());
    let mut exit = ExitState {
        iterations: 0,
        converged: false,
        stalled: false,
        diverged: false,
        last_residual: y.norm(),
    };
    let mut prev_residual = f64::INFINITY;
    for t in 1..=max_iter {
        // rank-k descent against the sparse-corrected measurements
        let target = y - &sparse;
        let r = &target - op.apply(&x)?;
        let res2 = r.norm_squared();
        let grad = op.adjoint(&r)?;
        let outcome = stepper.descend(op, &target, &x, basis.as_ref(), &grad, res2)?;
        exit.iterations = t;
        let no_descent = !outcome.accepted;
        x = outcome.x;
        basis = Some(outcome.svd.u);
        // sparse term absorbs the largest remaining entries
        let clean_residual = y - op.apply(&x)?;
        hard_threshold_into(&clean_residual, sparsity, &mut sparse);
        let residual = (&clean_residual - &sparse).norm();
        exit.last_residual = residual;
        trace.push(TraceRow {
            iteration: t,
            objective: 0.5 * residual * residual,
            residual,
            mu: f64::NAN,
        });
        let rel_change = (prev_residual - residual).abs() / residual.max(1e-300);
        prev_residual = residual;
        if residual <= tol * y.norm().max(1e-300) || rel_change <= tol {
            exit.converged = true;
            break;
        }
        if no_descent {
            exit.stalled = true;
            break;
        }
        let (stalled, diverged) = progress.update(residual);
        if diverged {
            exit.diverged = true;
            break;
        }
        if stalled {
            exit.stalled = true;
            break;
        }
    }
    finalize(op, y, x, config, exit, trace)
}

/// Best rank-k truncation of a recovered estimate. The returned estimate
/// keeps the solver's iteration count and trace; the residual fields still
/// describe the solver exit point.
pub fn truncate_rank(estimate: &LowRankEstimate, k: usize) -> Result<LowRankEstimate> {
    let max_rank = estimate.x_hat.nrows().min(estimate.x_hat.ncols());
    if k == 0 || k > max_rank {
        return Err(RidgeError::argument(format!(
            "truncation rank {k} outside 1..={max_rank}"
        )));
    }
    let x_hat = estimate.svd.truncated(k).reconstruct();
    // re-derive the SVD of the truncated matrix so the stored values always
    // match a fresh decomposition
    let svd = thin_svd(&x_hat);
    Ok(LowRankEstimate {
        singular_values: svd.sigma.clone(),
        x_hat,
        iterations: estimate.iterations,
        residual_spectral: estimate.residual_spectral,
        dantzig_feasible: estimate.dantzig_feasible,
        trace: estimate.trace.clone(),
        svd,
    })
}

/// Rows of A-hat are the k leading left singular vectors of X-hat.
pub fn extract_subspace(estimate: &LowRankEstimate, k: usize) -> Result<SubspaceEstimate> {
    if k == 0 || k > estimate.singular_values.len() {
        return Err(RidgeError::argument(format!(
            "subspace rank {k} outside 1..={}",
            estimate.singular_values.len()
        )));
    }
    let sigma_k = estimate.singular_values[k - 1];
    if sigma_k < DEGENERATE_SIGMA {
        return Err(RidgeError::Degenerate {
            index: k,
            value: sigma_k,
        });
    }
    let trunc = estimate.svd.truncated(k);
    Ok(SubspaceEstimate {
        a_hat: trunc.u.transpose(),
        sigma: trunc.sigma,
    })
}

/// (1/k) ||A A-hat^T||_F^2 in [0, 1]; equals 1 iff the row spans coincide.
pub fn subspace_alignment(a: &DMatrix<f64>, a_hat: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != a_hat.shape() {
        return Err(RidgeError::shape(format!(
            "subspace shapes differ: {:?} vs {:?}",
            a.shape(),
            a_hat.shape()
        )));
    }
    for (name, m) in [("A", a), ("A_hat", a_hat)] {
        let defect = crate::linalg::row_orthonormality_defect(m);
        if defect > 1e-8 {
            return Err(RidgeError::argument(format!(
                "{name} rows are not orthonormal (defect {defect:.3e})"
            )));
        }
    }
    let k = a.nrows() as f64;
    Ok((a * a_hat.transpose()).norm_squared() / k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_row_orthonormal;
    use crate::sampling::{build_plan, SamplingMode, SamplingPlan};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, RngCore};

    fn random_mat(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng))
    }

    fn planted_rank(d: usize, m_x: usize, k: usize, seed: u64) -> DMatrix<f64> {
        let u = random_mat(d, k, seed);
        let w = random_mat(m_x, k, seed ^ 0xdead);
        u * w.transpose()
    }

    fn dense_plan(d: usize, m_x: usize, m_phi: usize, seed: u64) -> SamplingPlan {
        build_plan(d, 1, m_x, m_phi, 1e-3, SamplingMode::Dense, seed).unwrap()
    }

    /// Independent SVT oracle: eigendecomposition of M^T M gives V and
    /// sigma^2; U = M V Sigma^{-1}; then shrink.
    fn svt_oracle(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
        let gram = m.transpose() * m;
        let eig = gram.symmetric_eigen();
        let mut pairs: Vec<(f64, DVector<f64>)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &l)| (l.max(0.0).sqrt(), eig.eigenvectors.column(i).into_owned()))
            .collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for (sigma, v) in pairs {
            if sigma <= 1e-12 {
                continue;
            }
            let u = m * &v / sigma;
            let shrunk = (sigma - tau).max(0.0);
            if shrunk > 0.0 {
                out += shrunk * u * v.transpose();
            }
        }
        out
    }

    #[test]
    fn svt_matches_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in 0..50 {
            let m = random_mat(10, 8, 100 + t);
            let tau: f64 = rng.random_range(0.1..3.0);
            let (ours, _) = singular_value_threshold(&m, tau);
            let oracle = svt_oracle(&m, tau);
            assert!(
                (&ours - &oracle).norm() <= 1e-9 * (1.0 + oracle.norm()),
                "svt mismatch at trial {t}"
            );
        }
    }

    #[test]
    fn choose_lambda_matches_reference() {
        // independent evaluation of the closed form with rearranged algebra
        let lambda = choose_lambda(1.0, 1, 100, 20, 300, 1e-3, 0.2, 0.0, 3.0).unwrap();
        let reference = {
            let numer = 1.0_f64 * 1e-3 * 100.0 * 20.0; // C2 eps d m_x k^2
            let scaled = numer / 300.0_f64.sqrt() / 2.0;
            scaled * 1.2_f64.sqrt()
        };
        assert_relative_eq!(lambda, reference, epsilon = 1e-14);
    }

    #[test]
    fn lambda_scales_linearly_in_epsilon_when_noiseless() {
        let l1 = choose_lambda(1.0, 2, 50, 10, 200, 1e-3, 0.3, 0.0, 3.0).unwrap();
        let l2 = choose_lambda(1.0, 2, 50, 10, 200, 2e-3, 0.3, 0.0, 3.0).unwrap();
        assert_relative_eq!(l2, 2.0 * l1, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_term_doubles_when_epsilon_halves() {
        let det = choose_lambda(1.0, 1, 50, 10, 200, 1e-2, 0.3, 0.0, 3.2).unwrap();
        let l1 = choose_lambda(1.0, 1, 50, 10, 200, 1e-2, 0.3, 0.5, 3.2).unwrap();
        let l2 = choose_lambda(1.0, 1, 50, 10, 200, 5e-3, 0.3, 0.5, 3.2).unwrap();
        let det_half = choose_lambda(1.0, 1, 50, 10, 200, 5e-3, 0.3, 0.0, 3.2).unwrap();
        let g1 = l1 - det;
        let g2 = l2 - det_half;
        assert_relative_eq!(g2, 2.0 * g1, epsilon = 1e-10);
    }

    #[test]
    fn choose_lambda_rejects_bad_parameters() {
        assert!(choose_lambda(1.0, 1, 10, 5, 50, 1e-3, 1.5, 0.0, 3.0).is_err());
        // gamma too small with noise
        assert!(choose_lambda(1.0, 1, 10, 5, 50, 1e-3, 0.2, 0.1, 1.0).is_err());
    }

    #[test]
    fn zero_measurements_recover_zero() {
        let plan = dense_plan(12, 4, 30, 3);
        let op = plan.operator();
        let y = DVector::zeros(30);
        for config in [
            RecoveryConfig::nuclear_prox(2, 0.0, 0),
            RecoveryConfig::rank_projected(2, 0),
        ] {
            let est = recover(&y, &op, &config).unwrap();
            assert_eq!(est.x_hat, DMatrix::zeros(12, 4));
            assert!(est.dantzig_feasible);
        }
    }

    #[test]
    fn planted_noiseless_recovery_svp() {
        let d = 30;
        let m_x = 10;
        let k = 1;
        let m_phi = 6 * (d + m_x);
        let mut failures = 0;
        for trial in 0..10u64 {
            let plan = dense_plan(d, m_x, m_phi, 40 + trial);
            let op = plan.operator();
            let x = planted_rank(d, m_x, k, 1000 + trial);
            let y = op.apply(&x).unwrap();
            let est = recover(&y, &op, &RecoveryConfig::rank_projected(k, trial)).unwrap();
            let rel = (&est.x_hat - &x).norm() / x.norm();
            if rel > 1e-3 {
                failures += 1;
            }
        }
        assert_eq!(failures, 0, "planted recovery failed {failures}/10 times");
    }

    #[test]
    fn planted_noiseless_recovery_nuclear() {
        let d = 30;
        let m_x = 10;
        let k = 2;
        let m_phi = 6 * k * (d + m_x);
        let plan = dense_plan(d, m_x, m_phi, 7);
        let op = plan.operator();
        let x = planted_rank(d, m_x, k, 17);
        let y = op.apply(&x).unwrap();
        let est = recover(&y, &op, &RecoveryConfig::nuclear_prox(k, 0.0, 0)).unwrap();
        let rel = (&est.x_hat - &x).norm() / x.norm();
        assert!(rel <= 1e-3, "relative error {rel:.3e}");
    }

    #[test]
    fn nuclear_objective_is_monotone_at_fixed_mu() {
        let plan = dense_plan(20, 6, 120, 9);
        let op = plan.operator();
        let x = planted_rank(20, 6, 2, 29);
        let y = op.apply(&x).unwrap();
        let est = recover(&y, &op, &RecoveryConfig::nuclear_prox(2, 0.0, 1)).unwrap();
        assert!(est.trace.len() > 5);
        for pair in est.trace.windows(2) {
            if pair[0].mu == pair[1].mu {
                assert!(
                    pair[1].objective <= pair[0].objective + 1e-12,
                    "objective rose at fixed mu: {} -> {}",
                    pair[0].objective,
                    pair[1].objective
                );
            }
        }
    }

    #[test]
    fn estimate_singular_values_match_fresh_svd() {
        let plan = dense_plan(18, 6, 140, 11);
        let op = plan.operator();
        let x = planted_rank(18, 6, 2, 31);
        let y = op.apply(&x).unwrap();
        let est = recover(&y, &op, &RecoveryConfig::rank_projected(2, 0)).unwrap();
        let fresh = thin_svd(&est.x_hat);
        assert_relative_eq!(est.singular_values, fresh.sigma, epsilon = 1e-10);
    }

    #[test]
    fn nonconvergence_reported_when_budget_tiny() {
        let plan = dense_plan(25, 8, 40, 13);
        let op = plan.operator();
        let x = planted_rank(25, 8, 3, 37);
        let y = op.apply(&x).unwrap();
        let config = RecoveryConfig {
            lambda: 0.0,
            target_rank: 3,
            solver: SolverKind::RankProjected {
                step: Some(0.8),
                max_iter: 2,
                tol: 1e-14,
            },
            seed: 0,
        };
        match recover(&y, &op, &config) {
            Err(RidgeError::NonConvergence { iterations, .. }) => assert_eq!(iterations, 2),
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn truncation_behaves_like_best_rank_k() {
        let est = LowRankEstimate::from_matrix(random_mat(8, 6, 41));
        let t2 = truncate_rank(&est, 2).unwrap();
        let brute = crate::linalg::truncate_to_rank(&est.x_hat, 2).unwrap();
        assert_relative_eq!(t2.x_hat, brute, epsilon = 1e-10);
        // idempotent on an already rank-k estimate
        let t2b = truncate_rank(&t2, 2).unwrap();
        assert_relative_eq!(t2b.x_hat, t2.x_hat, epsilon = 1e-10);
        // Eckart-Young: dropped energy equals the tail singular values
        let tail: f64 = est.singular_values.iter().skip(2).map(|s| s * s).sum();
        assert_relative_eq!((&est.x_hat - &t2.x_hat).norm(), tail.sqrt(), epsilon = 1e-9);

        // diagonal case
        let diag = LowRankEstimate::from_matrix(DMatrix::from_diagonal(
            &DVector::from_vec(vec![3.0, 1.0]),
        ));
        let t1 = truncate_rank(&diag, 1).unwrap();
        assert_relative_eq!(
            t1.x_hat,
            DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 0.0])),
            epsilon = 1e-12
        );
    }

    #[test]
    fn extract_subspace_rank_one() {
        let a = random_row_orthonormal(12, 1, 50).unwrap();
        let g = random_mat(1, 5, 51);
        let est = LowRankEstimate::from_matrix(a.transpose() * &g);
        let sub = extract_subspace(&est, 1).unwrap();
        let inner = a.row(0).transpose().dot(&sub.a_hat().row(0).transpose()).abs();
        assert_abs_diff_eq!(inner, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            subspace_alignment(&a, sub.a_hat()).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn extract_subspace_recovers_planted_span() {
        let k = 3;
        let a = random_row_orthonormal(20, k, 52).unwrap();
        let g = random_mat(k, 9, 53); // well-conditioned factor
        let est = LowRankEstimate::from_matrix(a.transpose() * &g);
        let sub = extract_subspace(&est, k).unwrap();
        assert!(
            crate::linalg::row_orthonormality_defect(sub.a_hat()) < 1e-10,
            "A-hat rows must be orthonormal"
        );
        let alignment = subspace_alignment(&a, sub.a_hat()).unwrap();
        assert_abs_diff_eq!(alignment, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn extract_subspace_rejects_degenerate_rank() {
        let a = random_row_orthonormal(10, 1, 54).unwrap();
        let g = random_mat(1, 4, 55);
        let est = LowRankEstimate::from_matrix(a.transpose() * &g);
        assert!(matches!(
            extract_subspace(&est, 2),
            Err(RidgeError::Degenerate { .. })
        ));
    }

    #[test]
    fn weyl_inequality_on_perturbed_estimates() {
        let x = planted_rank(14, 9, 3, 60);
        let noise = random_mat(14, 9, 61);
        for &delta in &[1e-4, 1e-2, 0.1] {
            let xh = &x + delta * &noise;
            let s = thin_svd(&x).sigma;
            let sh = thin_svd(&xh).sigma;
            let gap = spectral_norm(&(delta * &noise));
            for l in 0..s.len() {
                assert!(
                    (s[l] - sh[l]).abs() <= gap + 1e-10,
                    "Weyl violated at l = {l}: |{} - {}| > {gap}",
                    s[l],
                    sh[l]
                );
            }
        }
    }

    #[test]
    fn alignment_invariants() {
        // orthogonal mixing of the rows leaves alignment at exactly 1
        let k = 2;
        let d = 6;
        let a = random_row_orthonormal(d, k, 70).unwrap();
        let q = random_row_orthonormal(k, k, 71).unwrap();
        let mixed = &q * &a;
        assert_abs_diff_eq!(subspace_alignment(&a, &mixed).unwrap(), 1.0, epsilon = 1e-12);

        // k = 1 orthogonal vectors score 0
        let e1 = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let e2 = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(subspace_alignment(&e1, &e2).unwrap(), 0.0, epsilon = 1e-15);

        // random pair matches the principal-angle formula
        let b = random_row_orthonormal(d, k, 72).unwrap();
        let alignment = subspace_alignment(&a, &b).unwrap();
        let cross = &a * b.transpose();
        let cos2: f64 = crate::linalg::symmetric_eigenvalues(&(&cross * cross.transpose()))
            .iter()
            .map(|l| l.max(0.0))
            .sum();
        assert_relative_eq!(alignment, cos2 / k as f64, epsilon = 1e-10);
    }

    #[test]
    fn alignment_identity_with_projection_residual() {
        // k - ||A B^T||_F^2 == ||A - A B^T B||_F^2
        for t in 0..100u64 {
            let a = random_row_orthonormal(9, 3, 300 + t).unwrap();
            let b = random_row_orthonormal(9, 3, 400 + t).unwrap();
            let lhs = 3.0 - (&a * b.transpose()).norm_squared();
            let rhs = (&a - &a * b.transpose() * &b).norm_squared();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
        }
    }

    #[test]
    fn alignment_rejects_mismatched_shapes() {
        let a = random_row_orthonormal(6, 2, 80).unwrap();
        let b = random_row_orthonormal(7, 2, 81).unwrap();
        assert!(matches!(
            subspace_alignment(&a, &b),
            Err(RidgeError::Shape(_))
        ));
    }

    #[test]
    fn sparse_low_rank_recovers_through_corruption() {
        let d = 30;
        let m_x = 30;
        let k = 3;
        let m_phi = 130;
        let plan = build_plan(
            d,
            k,
            m_x,
            m_phi,
            1e-1,
            SamplingMode::SubsetSelection { fill: 0.9 },
            90,
        )
        .unwrap();
        let op = plan.operator();
        let a = random_row_orthonormal(d, k, 91).unwrap();
        let g = random_mat(k, m_x, 92);
        let x = a.transpose() * &g;
        let mut y = op.apply(&x).unwrap();
        // corrupt 1% of the sampled measurements with spikes on the scale of y
        let n = y.len();
        let n_corrupt = (n as f64 * 0.01).round() as usize;
        let spike = 3.0 * y.norm() / (n as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(93);
        for t in 0..n_corrupt {
            let e = (rng.next_u64() as usize) % n;
            y[e] += if t % 2 == 0 { spike } else { -spike };
        }
        let config = RecoveryConfig::sparse_low_rank(k, 2 * n_corrupt, 94);
        let est = recover(&y, &op, &config).unwrap();
        let sub = extract_subspace(&est, k).unwrap();
        let alignment = subspace_alignment(&a, sub.a_hat()).unwrap();
        assert!(alignment >= 0.95, "alignment {alignment:.4}");
    }
}
