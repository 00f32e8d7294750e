//! Closed-form sampling and error bounds, conditioning estimates for the
//! Ansatz matrix H^f, and the push-forward density of the sphere measure.
//!
//! Everything here is a pure calculator: identical inputs produce identical
//! reports, bit for bit.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, RidgeError};
use crate::linalg::symmetric_eigenvalues;
use crate::model::{sample_sphere, RidgeModel};

/// Inputs to every bound. `kappa` plays both the generic RIP constant and
/// the rank-one constant kappa_1 of the adjoint-noise bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsInputs {
    pub d: usize,
    pub k: usize,
    pub m_x: usize,
    pub m_phi: usize,
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

impl BoundsInputs {
    /// Conventional defaults: p1 = p2 = 0.05, C0 = 16, kappa = 0.2,
    /// rho = 0.5, gamma just above its 2 sqrt(log 12) floor.
    pub fn new(d: usize, k: usize, m_x: usize, m_phi: usize, epsilon: f64, c2: f64, alpha: f64) -> Self {
        BoundsInputs {
            d,
            k,
            m_x,
            m_phi,
            epsilon,
            c2,
            alpha,
            rho: 0.5,
            kappa: 0.2,
            c0: 16.0,
            eta: 0.99,
            delta: 0.1,
            p1: 0.05,
            p2: 0.05,
            sigma: 0.0,
            gamma: 3.2,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 || self.k > self.d || self.m_x == 0 || self.m_phi == 0 {
            return Err(RidgeError::argument(
                "dimensions must satisfy 1 <= k <= d, m_x >= 1, m_phi >= 1",
            ));
        }
        if !(self.epsilon > 0.0) || !(self.c2 > 0.0) || !(self.alpha > 0.0) || !(self.c0 > 0.0) {
            return Err(RidgeError::argument(
                "epsilon, C2, alpha and C0 must be positive",
            ));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(RidgeError::argument("rho must lie in (0, 1)"));
        }
        let kappa_max = 2.0f64.sqrt() - 1.0;
        if !(self.kappa > 0.0 && self.kappa < kappa_max) {
            return Err(RidgeError::argument(format!(
                "kappa must lie in (0, sqrt(2) - 1 = {kappa_max:.6})"
            )));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(RidgeError::argument("eta must lie in (0, 1)"));
        }
        if !(self.delta > 0.0) {
            return Err(RidgeError::argument("delta must be positive"));
        }
        if !(self.p1 > 0.0 && self.p1 < 1.0 && self.p2 > 0.0 && self.p2 < 1.0) {
            return Err(RidgeError::argument("p1 and p2 must lie in (0, 1)"));
        }
        if self.sigma < 0.0 {
            return Err(RidgeError::argument("sigma must be >= 0"));
        }
        Ok(())
    }
}

/// Every derived quantity, produced by [`compute_bounds`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub inputs: BoundsInputs,
    /// q(kappa) = (1/144)(kappa^2 - kappa^3/9).
    pub q_kappa: f64,
    /// u(kappa) = log(36 sqrt(2) / kappa).
    pub u_kappa: f64,
    /// l2 bound on the Taylor noise: C2 eps k^2 m_x d / (2 sqrt(m_phi)).
    pub noise_bound: f64,
    /// Deterministic part of the Dantzig radius.
    pub lambda_deterministic: f64,
    /// Gaussian amplification term (zero when sigma = 0).
    pub lambda_gaussian: f64,
    pub lambda: f64,
    /// Rank-k recovery error bound tau^2.
    pub tau_sq: f64,
    /// Step ceiling guaranteeing a nontrivial alignment bound.
    pub epsilon_ceiling: f64,
    /// Step ceiling guaranteeing alignment at least eta.
    pub epsilon_ceiling_eta: f64,
    /// Step ceiling guaranteeing uniform error at most delta.
    pub epsilon_ceiling_delta: f64,
    /// Guaranteed (1/k)||A A-hat^T||_F^2 under the Lemma's event.
    pub alignment_floor: f64,
    pub m_x_min: usize,
    pub m_phi_min: usize,
    pub success_probability: f64,
    /// Lemma's standing requirement m_phi < m_x * d.
    pub lemma4_precondition_ok: bool,
}

/// Evaluate every closed-form bound at the given inputs.
pub fn compute_bounds(inputs: &BoundsInputs) -> Result<BoundsReport> {
    inputs.validate()?;
    let &BoundsInputs {
        d,
        k,
        m_x,
        m_phi,
        epsilon,
        c2,
        alpha,
        rho,
        kappa,
        c0,
        eta,
        delta,
        p1,
        p2,
        sigma,
        gamma,
    } = inputs;
    let (df, kf, mxf, mpf) = (d as f64, k as f64, m_x as f64, m_phi as f64);

    let q_kappa = (1.0 / 144.0) * (kappa * kappa - kappa * kappa * kappa / 9.0);
    let u_kappa = (36.0 * 2.0f64.sqrt() / kappa).ln();

    let noise_bound = c2 * epsilon * kf * kf / 2.0 * mxf * df / mpf.sqrt();
    let lambda_deterministic =
        c2 * epsilon * df * mxf * kf * kf * (1.0 + kappa).sqrt() / (2.0 * mpf.sqrt());
    let lambda_gaussian = if sigma > 0.0 {
        let m = mpf.max(mxf);
        2.0 * gamma * sigma / epsilon * (2.0 * m * (1.0 + kappa) * mxf).sqrt()
    } else {
        0.0
    };
    let lambda = lambda_deterministic + lambda_gaussian;

    let tau_sq = c0 * c2 * c2 * kf.powi(5) * epsilon * epsilon * df * df * mxf * mxf
        * (1.0 + kappa)
        / mpf;

    let ratio = ((1.0 - rho) * mpf * alpha / ((1.0 + kappa) * c0 * mxf)).sqrt();
    let epsilon_ceiling = ratio / (c2 * kf * kf * df * (kf.sqrt() + 2.0f64.sqrt()));
    let epsilon_ceiling_eta = ((1.0 - rho) * mpf * alpha * (1.0 - eta)
        / ((1.0 + kappa) * c0 * mxf))
        .sqrt()
        / (c2 * kf * kf * df * ((kf * (1.0 - eta)).sqrt() + 2.0f64.sqrt()));
    let epsilon_ceiling_delta =
        delta / (c2 * kf.powf(2.5) * df * (delta + 2.0 * c2 * (2.0 * kf).sqrt())) * ratio;

    let sigma_low = ((1.0 - rho) * mxf * alpha).sqrt();
    let tau = tau_sq.sqrt();
    let alignment_floor = if sigma_low > tau {
        let gap = sigma_low - tau;
        ((kf - 2.0 * tau_sq / (gap * gap)).max(0.0) / kf).min(1.0)
    } else {
        0.0
    };

    let m_x_min = ((2.0 * kf * c2 * c2 / (alpha * rho * rho)) * (kf / p1).ln())
        .ceil()
        .max(1.0) as usize;
    let m_phi_min = (((2.0 / p2).ln() + 4.0 * kf * (df + mxf + 1.0) * u_kappa) / q_kappa)
        .ceil()
        .max(1.0) as usize;

    let p1_emp = kf * (-mxf * alpha * rho * rho / (2.0 * kf * c2 * c2)).exp();
    let p2_emp = 2.0 * (-mpf * q_kappa + 4.0 * kf * (df + mxf + 1.0) * u_kappa).exp();
    let success_probability = (1.0 - p1_emp - p2_emp).clamp(0.0, 1.0);

    Ok(BoundsReport {
        inputs: *inputs,
        q_kappa,
        u_kappa,
        noise_bound,
        lambda_deterministic,
        lambda_gaussian,
        lambda,
        tau_sq,
        epsilon_ceiling,
        epsilon_ceiling_eta,
        epsilon_ceiling_delta,
        alignment_floor,
        m_x_min,
        m_phi_min,
        success_probability,
        lemma4_precondition_ok: m_phi < m_x * d,
    })
}

impl BoundsReport {
    /// Aligned text rendering; the `bounds` subcommand prints exactly this.
    pub fn to_text(&self) -> String {
        let i = &self.inputs;
        let mut s = String::new();
        let mut line = |name: &str, value: String| {
            s.push_str(&format!("{name:<24} {value}\n"));
        };
        line("d", i.d.to_string());
        line("k", i.k.to_string());
        line("m_x", i.m_x.to_string());
        line("m_phi", i.m_phi.to_string());
        line("epsilon", format!("{:.15e}", i.epsilon));
        line("C2", format!("{:.15e}", i.c2));
        line("alpha", format!("{:.15e}", i.alpha));
        line("rho", format!("{:.15e}", i.rho));
        line("kappa", format!("{:.15e}", i.kappa));
        line("C0", format!("{:.15e}", i.c0));
        line("eta", format!("{:.15e}", i.eta));
        line("delta", format!("{:.15e}", i.delta));
        line("p1", format!("{:.15e}", i.p1));
        line("p2", format!("{:.15e}", i.p2));
        line("sigma", format!("{:.15e}", i.sigma));
        line("gamma", format!("{:.15e}", i.gamma));
        line("q(kappa)", format!("{:.15e}", self.q_kappa));
        line("u(kappa)", format!("{:.15e}", self.u_kappa));
        line("noise_bound", format!("{:.15e}", self.noise_bound));
        line("lambda_deterministic", format!("{:.15e}", self.lambda_deterministic));
        line("lambda_gaussian", format!("{:.15e}", self.lambda_gaussian));
        line("lambda", format!("{:.15e}", self.lambda));
        line("tau_sq", format!("{:.15e}", self.tau_sq));
        line("epsilon_ceiling", format!("{:.15e}", self.epsilon_ceiling));
        line("epsilon_ceiling_eta", format!("{:.15e}", self.epsilon_ceiling_eta));
        line("epsilon_ceiling_delta", format!("{:.15e}", self.epsilon_ceiling_delta));
        line("alignment_floor", format!("{:.15e}", self.alignment_floor));
        line("m_x_min", self.m_x_min.to_string());
        line("m_phi_min", self.m_phi_min.to_string());
        line("success_probability", format!("{:.15e}", self.success_probability));
        line(
            "lemma4_precondition",
            if self.lemma4_precondition_ok {
                "ok (m_phi < m_x * d)".to_string()
            } else {
                "VIOLATED (m_phi >= m_x * d)".to_string()
            },
        );
        s
    }

    /// Same fields as one CSV row with a header line.
    pub fn to_csv(&self) -> String {
        let i = &self.inputs;
        let header = "d,k,m_x,m_phi,epsilon,c2,alpha,rho,kappa,c0,eta,delta,p1,p2,sigma,gamma,\
             q_kappa,u_kappa,noise_bound,lambda_deterministic,lambda_gaussian,lambda,tau_sq,\
             epsilon_ceiling,epsilon_ceiling_eta,epsilon_ceiling_delta,alignment_floor,\
             m_x_min,m_phi_min,success_probability,lemma4_precondition_ok";
        let row = format!(
            "{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{:e},{}",
            i.d, i.k, i.m_x, i.m_phi, i.epsilon, i.c2, i.alpha, i.rho, i.kappa, i.c0, i.eta,
            i.delta, i.p1, i.p2, i.sigma, i.gamma, self.q_kappa, self.u_kappa, self.noise_bound,
            self.lambda_deterministic, self.lambda_gaussian, self.lambda, self.tau_sq,
            self.epsilon_ceiling, self.epsilon_ceiling_eta, self.epsilon_ceiling_delta,
            self.alignment_floor, self.m_x_min, self.m_phi_min, self.success_probability,
            self.lemma4_precondition_ok
        );
        format!("{header}\n{row}\n")
    }
}

/// How alpha was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMethod {
    MonteCarloHf { n_samples: usize },
    /// Origin shortcut: |g'(0)|^2 for k = 1, lambda_min(hess^2)/d otherwise.
    /// A heuristic, not a certified bound.
    OriginApprox,
    Known,
}

#[derive(Debug, Clone)]
pub struct AlphaEstimate {
    pub alpha_hat: f64,
    pub method: AlphaMethod,
    /// The k x k reduction H^g whose smallest eigenvalue is alpha_hat
    /// (rank-one surrogate for the origin shortcut).
    pub h_hat: DMatrix<f64>,
}

/// Monte Carlo estimate of H^g = E[grad g(A xi) grad g(A xi)^T] over xi
/// uniform on the sphere; alpha-hat is its smallest eigenvalue.
pub fn estimate_alpha_mc(model: &RidgeModel, n_samples: usize, seed: u64) -> Result<AlphaEstimate> {
    let k = model.k();
    if n_samples < k {
        return Err(RidgeError::argument(format!(
            "need at least k = {k} samples, got {n_samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = DMatrix::<f64>::zeros(k, k);
    for _ in 0..n_samples {
        let xi = sample_sphere(model.d(), &mut rng);
        let mut y = model.a() * xi;
        if let Some(b) = model.offset() {
            y += b;
        }
        let g = model.link().gradient(&y);
        h.syger(1.0, &g, &g, 1.0);
    }
    // syger fills the lower triangle; mirror it
    for r in 0..k {
        for c in (r + 1)..k {
            h[(r, c)] = h[(c, r)];
        }
    }
    h /= n_samples as f64;
    let eig = symmetric_eigenvalues(&h);
    Ok(AlphaEstimate {
        alpha_hat: eig[0].max(0.0),
        method: AlphaMethod::MonteCarloHf { n_samples },
        h_hat: h,
    })
}

impl AlphaEstimate {
    /// Wrap an externally certified alpha (e.g. a hand-derived bound).
    pub fn known(alpha: f64) -> Self {
        AlphaEstimate {
            alpha_hat: alpha,
            method: AlphaMethod::Known,
            h_hat: DMatrix::from_element(1, 1, alpha),
        }
    }
}

/// Origin shortcut for alpha: |g'(0)|^2 when k = 1; otherwise the smallest
/// eigenvalue of (hess g(0))^2 scaled by 1/d, the full-rank-Hessian regime.
/// Flagged heuristic via [`AlphaMethod::OriginApprox`].
///
/// The neighborhood radius, Lipschitz constant and decay exponent that
/// justify the full-rank-Hessian regime are proof-side quantities with no
/// runtime role; only the resulting Theta(1/d) scaling enters here.
pub fn estimate_alpha_origin(model: &RidgeModel) -> AlphaEstimate {
    let k = model.k();
    let origin = DVector::zeros(k);
    if k == 1 {
        let g1 = model.link().gradient(&origin)[0];
        AlphaEstimate {
            alpha_hat: g1 * g1,
            method: AlphaMethod::OriginApprox,
            h_hat: DMatrix::from_element(1, 1, g1 * g1),
        }
    } else {
        let hess = model.link().hessian(&origin);
        let sq = &hess * hess.transpose();
        let scaled = &sq / model.d() as f64;
        let eig = symmetric_eigenvalues(&scaled);
        AlphaEstimate {
            alpha_hat: eig[0].max(0.0),
            method: AlphaMethod::OriginApprox,
            h_hat: scaled,
        }
    }
}

/// Density of the push-forward of the uniform sphere measure onto the unit
/// ball in R^k: Gamma(d/2) / (pi^{k/2} Gamma((d-k)/2)) (1 - |y|^2)^{(d-k-2)/2}.
/// Gamma ratios are taken in log space; d up to thousands stays finite.
pub fn pushforward_density(y: &DVector<f64>, d: usize) -> Result<f64> {
    let k = y.len();
    if k == 0 || d <= k {
        return Err(RidgeError::argument(format!(
            "need d > k >= 1, got d = {d}, k = {k}"
        )));
    }
    let r2 = y.norm_squared();
    if r2 >= 1.0 {
        return Err(RidgeError::Domain {
            norm: r2.sqrt(),
            radius: 1.0,
        });
    }
    let (df, kf) = (d as f64, k as f64);
    let log_density = libm::lgamma(df / 2.0) - libm::lgamma((df - kf) / 2.0)
        - (kf / 2.0) * std::f64::consts::PI.ln()
        + ((df - kf - 2.0) / 2.0) * (1.0 - r2).ln();
    Ok(log_density.exp())
}

/// Second moment C_{d,k}(theta) of the push-forward measure over the ball of
/// radius theta, by composite Simpson on the radial integral. Bounded above
/// by k/d, with equality at theta = 1.
pub fn radial_second_moment(d: usize, k: usize, theta: f64) -> Result<f64> {
    if k == 0 || d <= k {
        return Err(RidgeError::argument(format!(
            "need d > k >= 1, got d = {d}, k = {k}"
        )));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(RidgeError::argument("theta must lie in (0, 1]"));
    }
    let (df, kf) = (d as f64, k as f64);
    let log_prefactor = (2.0f64).ln() + libm::lgamma(df / 2.0)
        - libm::lgamma(kf / 2.0)
        - libm::lgamma((df - kf) / 2.0);
    let exponent = (df - kf - 2.0) / 2.0;
    let f = |r: f64| -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let log_term = (kf + 1.0) * r.ln() + exponent * (1.0 - r * r).ln();
        (log_prefactor + log_term).exp()
    };
    // composite Simpson; the integrand is smooth on (0, theta)
    let n = 16384usize;
    let hstep = theta / n as f64;
    let mut acc = f(0.0) + f(theta);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * hstep);
    }
    Ok(acc * hstep / 3.0)
}

/// Asymptotic function class of the link, for the planner's budget report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FunctionClass {
    /// k = 1, g'(0) != 0: alpha = Theta(1).
    H1,
    /// k = 1, first M derivatives vanish at 0: alpha = Theta(d^-M).
    H2 { m: u32 },
    /// k > 1 radial or full-rank-Hessian regime with arbitrary A.
    RadialArbitrary { m: u32 },
    /// Full-rank Hessian at the origin: alpha = Theta(1/d).
    Prop2,
}

impl FunctionClass {
    /// Total oracle budget m_x (m_phi + 1) scaling, arbitrary-A column.
    pub fn budget_class(&self) -> String {
        match self {
            FunctionClass::H1 => "O(d)".to_string(),
            FunctionClass::H2 { m } => format!("O(d^{})", 2 * m),
            FunctionClass::RadialArbitrary { m } => {
                format!("O(k^3 d^{} (log k)^2)", 2 * m)
            }
            FunctionClass::Prop2 => "O(k^3 d^2 (log k)^2)".to_string(),
        }
    }
}

/// What the planner should guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanTarget {
    /// Alignment (1/k)||A A-hat^T||_F^2 >= eta.
    AlignmentFloor { eta: f64 },
    /// Uniform approximation error at most delta.
    UniformError { delta: f64 },
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub m_x: usize,
    pub m_phi: usize,
    /// Largest admissible finite-difference step for the target.
    pub epsilon: f64,
    pub budget_class: String,
    /// Oracle budget m_x (m_phi + 1).
    pub budget: u128,
}

/// Smallest integer sample sizes meeting the success-probability thresholds,
/// with the largest admissible epsilon for the requested target.
pub fn plan_experiment(
    target: PlanTarget,
    class: FunctionClass,
    inputs: &BoundsInputs,
) -> Result<ExperimentPlan> {
    let mut probe = *inputs;
    match target {
        PlanTarget::AlignmentFloor { eta } => probe.eta = eta,
        PlanTarget::UniformError { delta } => probe.delta = delta,
    }
    // first pass computes m_x_min; the final report uses it as m_x
    let first = compute_bounds(&probe)?;
    probe.m_x = first.m_x_min;
    let report = compute_bounds(&probe)?;
    let m_x = report.m_x_min;
    let m_phi = report.m_phi_min;
    if m_phi >= m_x * inputs.d {
        return Err(RidgeError::Infeasible {
            m_x,
            d: inputs.d,
            m_phi_min: m_phi,
            product: m_x * inputs.d,
        });
    }
    probe.m_phi = m_phi;
    let final_report = compute_bounds(&probe)?;
    let epsilon = match target {
        PlanTarget::AlignmentFloor { .. } => final_report.epsilon_ceiling_eta,
        PlanTarget::UniformError { .. } => final_report.epsilon_ceiling_delta,
    };
    Ok(ExperimentPlan {
        m_x,
        m_phi,
        epsilon,
        budget_class: class.budget_class(),
        budget: m_x as u128 * (m_phi as u128 + 1),
    })
}

/// The Eq.-12 minimum sample sizes alone, also available when the plan is
/// infeasible at the given dimension.
pub fn sample_complexity_minimums(inputs: &BoundsInputs) -> Result<(usize, usize)> {
    let mut probe = *inputs;
    let first = compute_bounds(&probe)?;
    probe.m_x = first.m_x_min;
    let report = compute_bounds(&probe)?;
    Ok((report.m_x_min, report.m_phi_min))
}
