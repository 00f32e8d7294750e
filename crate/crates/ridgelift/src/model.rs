//! Ground-truth multi-ridge models f(x) = g(Ax + b), their derivatives, and
//! noisy point-evaluation oracles.
//!
//! Models are immutable after construction and shareable across threads. All
//! randomness (Haar matrices, noise) flows through explicitly seeded ChaCha
//! streams so that a given seed reproduces bit-identical values.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Result, RidgeError};
use crate::linalg::row_orthonormality_defect;

type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Number of random probes used to estimate C2 for custom links.
const C2_PROBES: usize = 1000;
/// Radius of the probe ball for C2 estimation; covers the enlarged domain
/// for every epsilon used in practice.
const C2_PROBE_RADIUS: f64 = 1.05;
/// Domain radius used when reporting C2 for the quadratic-form link.
const QUADRATIC_C2_RADIUS: f64 = 2.0;

#[derive(Clone)]
enum LinkKind {
    Logistic,
    SumOfGaussians {
        sigmas: Vec<f64>,
        offsets: Vec<f64>,
    },
    QuadraticForm {
        offset: DVector<f64>,
    },
    Custom {
        value: ScalarFn,
        gradient: VectorFn,
        hessian: MatrixFn,
    },
}

/// A C^2 link profile g: R^k -> R with a recorded smoothness constant
/// C2 >= sup over |beta| <= 2 of the partial derivatives' sup norm.
#[derive(Clone)]
pub struct LinkFunction {
    kind: LinkKind,
    k: usize,
    c2: f64,
    c2_is_estimate: bool,
}

impl fmt::Debug for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            LinkKind::Logistic => "Logistic",
            LinkKind::SumOfGaussians { .. } => "SumOfGaussians",
            LinkKind::QuadraticForm { .. } => "QuadraticForm",
            LinkKind::Custom { .. } => "Custom",
        };
        f.debug_struct("LinkFunction")
            .field("kind", &name)
            .field("k", &self.k)
            .field("c2", &self.c2)
            .finish()
    }
}

fn gauss_atom(y: f64, sigma: f64, b: f64) -> f64 {
    let z = (y + b) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

impl LinkFunction {
    /// g(y) = 1 / (1 + exp(-y)), k = 1. C2 = 1, attained by g itself.
    pub fn logistic() -> Self {
        LinkFunction {
            kind: LinkKind::Logistic,
            k: 1,
            c2: 1.0,
            c2_is_estimate: false,
        }
    }

    /// Additive Gaussian atoms g(y) = sum_i exp(-(y_i + b_i)^2 / (2 s_i^2)) / sqrt(2 pi s_i^2).
    pub fn sum_of_gaussians(sigmas: Vec<f64>, offsets: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() || sigmas.len() != offsets.len() {
            return Err(RidgeError::argument(
                "sum_of_gaussians needs equal, nonzero numbers of sigmas and offsets",
            ));
        }
        if sigmas.iter().any(|&s| s <= 0.0) {
            return Err(RidgeError::argument("gaussian widths must be positive"));
        }
        let root_2pi = (2.0 * std::f64::consts::PI).sqrt();
        // Separable atoms: mixed partials vanish. Peak values: |g_i| at -b_i,
        // |g_i'| at -b_i +- s_i, |g_i''| at -b_i.
        let sup_value: f64 = sigmas.iter().map(|s| 1.0 / (s * root_2pi)).sum();
        let sup_grad = sigmas
            .iter()
            .map(|s| 1.0 / (s * s * (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt()))
            .fold(0.0f64, f64::max);
        let sup_hess = sigmas
            .iter()
            .map(|s| 1.0 / (s * s * s * root_2pi))
            .fold(0.0f64, f64::max);
        let k = sigmas.len();
        Ok(LinkFunction {
            kind: LinkKind::SumOfGaussians { sigmas, offsets },
            k,
            c2: sup_value.max(sup_grad).max(sup_hess),
            c2_is_estimate: false,
        })
    }

    /// g(y) = ||y - b||^2. C2 is reported on the ball of radius 2.
    pub fn quadratic_form(offset: DVector<f64>) -> Result<Self> {
        if offset.is_empty() {
            return Err(RidgeError::argument("quadratic form needs k >= 1"));
        }
        let k = offset.len();
        let reach = QUADRATIC_C2_RADIUS + offset.norm();
        let c2 = (reach * reach).max(2.0 * reach).max(2.0);
        Ok(LinkFunction {
            kind: LinkKind::QuadraticForm { offset },
            k,
            c2,
            c2_is_estimate: false,
        })
    }

    /// User-supplied link. Analytic gradient and Hessian callbacks are
    /// required; C2 is probed on random points and flagged as an estimate.
    pub fn custom(
        k: usize,
        value: ScalarFn,
        gradient: VectorFn,
        hessian: MatrixFn,
        probe_seed: u64,
    ) -> Result<Self> {
        if k == 0 {
            return Err(RidgeError::argument("custom link needs k >= 1"));
        }
        let mut link = LinkFunction {
            kind: LinkKind::Custom {
                value,
                gradient,
                hessian,
            },
            k,
            c2: 0.0,
            c2_is_estimate: true,
        };
        link.c2 = link.probe_c2(probe_seed);
        Ok(link)
    }

    fn probe_c2(&self, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..C2_PROBES {
            let y = sample_ball(self.k, C2_PROBE_RADIUS, &mut rng);
            worst = worst.max(self.value(&y).abs());
            worst = self
                .gradient(&y)
                .iter()
                .fold(worst, |w, g| w.max(g.abs()));
            worst = self
                .hessian(&y)
                .iter()
                .fold(worst, |w, h| w.max(h.abs()));
        }
        worst
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn c2_is_estimate(&self) -> bool {
        self.c2_is_estimate
    }

    pub fn value(&self, y: &DVector<f64>) -> f64 {
        debug_assert_eq!(y.len(), self.k);
        match &self.kind {
            LinkKind::Logistic => 1.0 / (1.0 + (-y[0]).exp()),
            LinkKind::SumOfGaussians { sigmas, offsets } => y
                .iter()
                .zip(sigmas.iter().zip(offsets.iter()))
                .map(|(&yi, (&s, &b))| gauss_atom(yi, s, b))
                .sum(),
            LinkKind::QuadraticForm { offset } => (y - offset).norm_squared(),
            LinkKind::Custom { value, .. } => value(y),
        }
    }

    pub fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(y.len(), self.k);
        match &self.kind {
            LinkKind::Logistic => {
                let s = 1.0 / (1.0 + (-y[0]).exp());
                DVector::from_element(1, s * (1.0 - s))
            }
            LinkKind::SumOfGaussians { sigmas, offsets } => DVector::from_iterator(
                self.k,
                y.iter()
                    .zip(sigmas.iter().zip(offsets.iter()))
                    .map(|(&yi, (&s, &b))| -((yi + b) / (s * s)) * gauss_atom(yi, s, b)),
            ),
            LinkKind::QuadraticForm { offset } => 2.0 * (y - offset),
            LinkKind::Custom { gradient, .. } => gradient(y),
        }
    }

    pub fn hessian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        debug_assert_eq!(y.len(), self.k);
        match &self.kind {
            LinkKind::Logistic => {
                let s = 1.0 / (1.0 + (-y[0]).exp());
                DMatrix::from_element(1, 1, s * (1.0 - s) * (1.0 - 2.0 * s))
            }
            LinkKind::SumOfGaussians { sigmas, offsets } => {
                let diag = y
                    .iter()
                    .zip(sigmas.iter().zip(offsets.iter()))
                    .map(|(&yi, (&s, &b))| {
                        let u = yi + b;
                        let s2 = s * s;
                        (u * u / (s2 * s2) - 1.0 / s2) * gauss_atom(yi, s, b)
                    });
                DMatrix::from_diagonal(&DVector::from_iterator(self.k, diag))
            }
            LinkKind::QuadraticForm { .. } => 2.0 * DMatrix::identity(self.k, self.k),
            LinkKind::Custom { hessian, .. } => hessian(y),
        }
    }

    pub(crate) fn describe(&self) -> (&'static str, Vec<(String, String)>) {
        match &self.kind {
            LinkKind::Logistic => ("logistic", vec![]),
            LinkKind::SumOfGaussians { sigmas, offsets } => (
                "sum_of_gaussians",
                vec![
                    ("sigmas".into(), join_floats(sigmas)),
                    ("atom_offsets".into(), join_floats(offsets)),
                ],
            ),
            LinkKind::QuadraticForm { offset } => (
                "quadratic_form",
                vec![("link_offset".into(), join_floats(offset.as_slice()))],
            ),
            LinkKind::Custom { .. } => ("custom", vec![]),
        }
    }
}

fn join_floats(vals: &[f64]) -> String {
    vals.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Sample uniformly from the ball of radius `r` in R^k.
pub fn sample_ball(k: usize, r: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut v = DVector::from_fn(k, |_, _| StandardNormal.sample(rng));
    let norm = v.norm();
    if norm > 0.0 {
        let u: f64 = Uniform::new(0.0f64, 1.0).unwrap().sample(rng);
        v *= r * u.powf(1.0 / k as f64) / norm;
    }
    v
}

/// Sample uniformly from the unit sphere in R^d.
pub fn sample_sphere(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(rng));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// A k x d matrix with orthonormal rows drawn from the Haar measure:
/// QR of an iid Gaussian d x k matrix with the R diagonal forced positive.
pub fn random_row_orthonormal(d: usize, k: usize, seed: u64) -> Result<DMatrix<f64>> {
    if k == 0 || k > d {
        return Err(RidgeError::argument(format!(
            "need 1 <= k <= d, got k = {k}, d = {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = DMatrix::from_fn(d, k, |_, _| StandardNormal.sample(&mut rng));
    let qr = gauss.qr();
    let r = qr.r();
    let mut q = qr.q();
    for i in 0..k {
        if r[(i, i)] < 0.0 {
            let mut col = q.column_mut(i);
            col.neg_mut();
        }
    }
    Ok(q.transpose())
}

/// Ground-truth multi-ridge function f(x) = g(Ax + b).
#[derive(Debug, Clone)]
pub struct RidgeModel {
    a: DMatrix<f64>,
    link: LinkFunction,
    offset: Option<DVector<f64>>,
}

impl RidgeModel {
    pub fn new(a: DMatrix<f64>, link: LinkFunction, offset: Option<DVector<f64>>) -> Result<Self> {
        let (k, d) = (a.nrows(), a.ncols());
        if k == 0 || k > d {
            return Err(RidgeError::argument(format!(
                "need 1 <= k <= d, got k = {k}, d = {d}"
            )));
        }
        if link.dim() != k {
            return Err(RidgeError::shape(format!(
                "link dimension {} does not match k = {k}",
                link.dim()
            )));
        }
        if let Some(b) = &offset {
            if b.len() != k {
                return Err(RidgeError::shape(format!(
                    "offset length {} does not match k = {k}",
                    b.len()
                )));
            }
        }
        let defect = row_orthonormality_defect(&a);
        if defect > 1e-10 {
            return Err(RidgeError::argument(format!(
                "rows of A are not orthonormal: ||AA^T - I||_F = {defect:.3e}"
            )));
        }
        Ok(RidgeModel { a, link, offset })
    }

    /// Convenience constructor with a Haar-random A.
    pub fn random(d: usize, link: LinkFunction, offset: Option<DVector<f64>>, seed: u64) -> Result<Self> {
        let a = random_row_orthonormal(d, link.dim(), seed)?;
        RidgeModel::new(a, link, offset)
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    pub fn k(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn link(&self) -> &LinkFunction {
        &self.link
    }

    pub fn offset(&self) -> Option<&DVector<f64>> {
        self.offset.as_ref()
    }

    pub fn c2(&self) -> f64 {
        self.link.c2()
    }

    fn arg(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = &self.a * x;
        if let Some(b) = &self.offset {
            y += b;
        }
        y
    }

    /// Noise-free f(x) = g(Ax + b); defined for every x.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.link.value(&self.arg(x))
    }

    /// Exact gradient A^T grad g(Ax + b).
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a.transpose() * self.link.gradient(&self.arg(x))
    }

    /// Quadratic form v^T (hess f)(x) v = (Av)^T (hess g)(Ax + b) (Av),
    /// without materializing the d x d Hessian.
    pub fn hessian_quadratic_form(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let av = &self.a * v;
        let h = self.link.hessian(&self.arg(x));
        (av.transpose() * h * &av)[(0, 0)]
    }

    /// Gradient matrix G = [grad g(A xi_1 + b) | ... ] for the given centers
    /// (k x m), the factor behind X = A^T G. Test/diagnostic path.
    pub fn exact_g(&self, centers: &DMatrix<f64>) -> DMatrix<f64> {
        let m = centers.ncols();
        let mut g = DMatrix::zeros(self.k(), m);
        for j in 0..m {
            let y = self.arg(&centers.column(j).into_owned());
            g.set_column(j, &self.link.gradient(&y));
        }
        g
    }

    /// Exact X = A^T G for the given centers (d x m). Test/diagnostic path.
    pub fn exact_x(&self, centers: &DMatrix<f64>) -> DMatrix<f64> {
        self.a.transpose() * self.exact_g(centers)
    }
}

impl RidgeModel {
    /// Model description file: key-value header (kind, d, k, seed, link
    /// parameters) followed by the A matrix in text form. Custom links have
    /// no serializable parameters and are rejected.
    pub fn save<W: std::io::Write>(&self, out: &mut W, seed: u64) -> Result<()> {
        let (kind, params) = self.link.describe();
        if kind == "custom" {
            return Err(RidgeError::argument(
                "custom links cannot be serialized (callbacks have no parameters)",
            ));
        }
        writeln!(out, "ridgelift-model v1")?;
        writeln!(out, "kind = {kind}")?;
        writeln!(out, "d = {}", self.d())?;
        writeln!(out, "k = {}", self.k())?;
        writeln!(out, "seed = {seed}")?;
        for (key, value) in params {
            writeln!(out, "{key} = {value}")?;
        }
        if let Some(b) = &self.offset {
            writeln!(out, "offset = {}", join_floats(b.as_slice()))?;
        }
        writeln!(out, "A:")?;
        crate::textmat::write_matrix(out, &self.a)?;
        Ok(())
    }

    pub fn load<R: std::io::BufRead>(input: R) -> Result<RidgeModel> {
        let mut lines = input.lines();
        let magic = lines
            .next()
            .ok_or_else(|| RidgeError::parse("empty model file"))??;
        if magic.trim() != "ridgelift-model v1" {
            return Err(RidgeError::parse("not a ridgelift model file"));
        }
        let mut fields = std::collections::HashMap::new();
        let mut a = None;
        for line in lines.by_ref() {
            let line = line?;
            let trimmed = line.trim().to_string();
            if trimmed.is_empty() {
                continue;
            }
            if trimmed == "A:" {
                a = Some(crate::textmat::read_matrix_lines(&mut lines)?);
                break;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| RidgeError::parse(format!("unexpected line {trimmed:?}")))?;
            fields.insert(key.trim().to_string(), value.trim().to_string());
        }
        let a = a.ok_or_else(|| RidgeError::parse("missing A block"))?;
        let parse_list = |key: &str| -> Result<Vec<f64>> {
            fields
                .get(key)
                .ok_or_else(|| RidgeError::parse(format!("missing field {key}")))?
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|e| RidgeError::parse(format!("bad {key}: {e}")))
                })
                .collect()
        };
        let kind = fields
            .get("kind")
            .ok_or_else(|| RidgeError::parse("missing field kind"))?
            .clone();
        let link = match kind.as_str() {
            "logistic" => LinkFunction::logistic(),
            "sum_of_gaussians" => {
                LinkFunction::sum_of_gaussians(parse_list("sigmas")?, parse_list("atom_offsets")?)?
            }
            "quadratic_form" => {
                LinkFunction::quadratic_form(DVector::from_vec(parse_list("link_offset")?))?
            }
            other => return Err(RidgeError::parse(format!("unknown link kind {other:?}"))),
        };
        let offset = if fields.contains_key("offset") {
            Some(DVector::from_vec(parse_list("offset")?))
        } else {
            None
        };
        RidgeModel::new(a, link, offset)
    }
}

/// Oracle noise: iid Gaussian of deviation `gaussian_sigma` on every call,
/// plus with probability `sparse_prob` an extra Gaussian of deviation
/// `sparse_sigma`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub gaussian_sigma: f64,
    pub sparse_prob: f64,
    pub sparse_sigma: f64,
    pub rng_seed: u64,
}

impl NoiseModel {
    pub fn new(gaussian_sigma: f64, sparse_prob: f64, sparse_sigma: f64, rng_seed: u64) -> Result<Self> {
        if !(gaussian_sigma >= 0.0) || !(sparse_sigma >= 0.0) {
            return Err(RidgeError::argument("noise deviations must be >= 0"));
        }
        if !(0.0..1.0).contains(&sparse_prob) {
            return Err(RidgeError::argument("sparse_prob must lie in [0, 1)"));
        }
        Ok(NoiseModel {
            gaussian_sigma,
            sparse_prob,
            sparse_sigma,
            rng_seed,
        })
    }

    pub fn noiseless(rng_seed: u64) -> Self {
        NoiseModel {
            gaussian_sigma: 0.0,
            sparse_prob: 0.0,
            sparse_sigma: 0.0,
            rng_seed,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.gaussian_sigma == 0.0 && self.sparse_prob == 0.0
    }

    /// Independent stream for a concurrent worker: seed = base ^ worker_id.
    pub fn for_worker(&self, worker_id: u64) -> NoiseModel {
        NoiseModel {
            rng_seed: self.rng_seed ^ worker_id,
            ..self.clone()
        }
    }
}

/// Stateful point-evaluation oracle: domain check, noise injection, and
/// call accounting. Noise is attached here and nowhere else.
pub struct Oracle<'a> {
    model: &'a RidgeModel,
    noise: NoiseModel,
    rng: ChaCha8Rng,
    domain_radius: f64,
    calls: u64,
}

impl<'a> Oracle<'a> {
    /// `domain_radius` is 1 + eps_bar for the measurement path; estimator
    /// construction may pass a wider radius to cover its sampling grid.
    pub fn new(model: &'a RidgeModel, noise: NoiseModel, domain_radius: f64) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(noise.rng_seed);
        Oracle {
            model,
            noise,
            rng,
            domain_radius,
            calls: 0,
        }
    }

    pub fn model(&self) -> &RidgeModel {
        self.model
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    fn check_domain(&self, x: &DVector<f64>) -> Result<()> {
        let norm = x.norm();
        if norm > self.domain_radius + 1e-9 {
            return Err(RidgeError::Domain {
                norm,
                radius: self.domain_radius,
            });
        }
        Ok(())
    }

    /// One noisy evaluation f(x) + z + s.
    pub fn eval(&mut self, x: &DVector<f64>) -> Result<f64> {
        self.check_domain(x)?;
        self.calls += 1;
        let mut value = self.model.value(x);
        if self.noise.gaussian_sigma > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            value += self.noise.gaussian_sigma * z;
        }
        if self.noise.sparse_prob > 0.0 {
            let u: f64 = Uniform::new(0.0f64, 1.0).unwrap().sample(&mut self.rng);
            if u < self.noise.sparse_prob {
                let s: f64 = StandardNormal.sample(&mut self.rng);
                value += self.noise.sparse_sigma * s;
            }
        }
        Ok(value)
    }

    /// Exact, noise-free gradient; diagnostic path, never consumed by the
    /// learner.
    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_domain(x)?;
        Ok(self.model.gradient(x))
    }
}
