//! Experiment runner: seeded trials of the full learning pipeline,
//! minimal-m_phi searches, sweeps over d or k, noise studies, and CSV/plot
//! emission.

pub mod config;
pub mod svg;

use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;

use crate::analysis::{compute_bounds, estimate_alpha_origin, BoundsInputs};
use crate::error::{Result, RidgeError};
use crate::estimator::{build_estimate, grid_reach, uniform_error, DEFAULT_NODE_CAP};
use crate::model::{sample_sphere, LinkFunction, NoiseModel, Oracle, RidgeModel};
use crate::recovery::{
    choose_lambda, extract_subspace, recover, subspace_alignment, LowRankEstimate,
    RecoveryConfig, SolverKind,
};
use crate::sampling::{build_plan, measure, rip_diagnostic, SamplingMode};
use config::KvConfig;

/// The four reproduced studies plus a free-form variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Logistic link, k = 1, sweep over d.
    Logistic,
    /// Additive Gaussian atoms, sweep over k.
    SumGaussians,
    /// Quadratic form with Gaussian oracle noise sigma = coeff / d^{3/2}.
    QuadGaussNoise,
    /// Quadratic form, subset-selection sampling, sparse measurement
    /// corruption, sparse+low-rank recovery.
    QuadSparseNoise,
    Custom,
}

impl ExperimentKind {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(ExperimentKind::Logistic),
            "sum_gaussians" => Ok(ExperimentKind::SumGaussians),
            "quad_gauss_noise" => Ok(ExperimentKind::QuadGaussNoise),
            "quad_sparse_noise" => Ok(ExperimentKind::QuadSparseNoise),
            "custom" => Ok(ExperimentKind::Custom),
            other => Err(RidgeError::parse(format!("unknown experiment {other:?}"))),
        }
    }

    /// Figure index of the matching simulation study (None for custom).
    pub fn figure(&self) -> Option<usize> {
        match self {
            ExperimentKind::Logistic => Some(1),
            ExperimentKind::SumGaussians => Some(2),
            ExperimentKind::QuadGaussNoise => Some(3),
            ExperimentKind::QuadSparseNoise => Some(4),
            ExperimentKind::Custom => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepVariable {
    Dimension,
    Rank,
}

/// Success criterion applied to the trial-averaged metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    /// Mean |<a-hat, a>| >= threshold (the k = 1 reading of alignment).
    InnerProduct(f64),
    /// Mean (1/k) ||A A-hat^T||_F^2 >= threshold.
    Alignment(f64),
}

impl Criterion {
    pub fn threshold(&self) -> f64 {
        match self {
            Criterion::InnerProduct(t) | Criterion::Alignment(t) => *t,
        }
    }

    fn metric(&self, alignment: f64) -> f64 {
        match self {
            Criterion::InnerProduct(_) => alignment.max(0.0).sqrt(),
            Criterion::Alignment(_) => alignment,
        }
    }
}

/// How the finite-difference step is picked: a fixed value, or the largest
/// step admissible for the target alignment eta at each probed m_phi
/// (alpha from the origin shortcut, C2 from the model).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonPolicy {
    Fixed(f64),
    Lemma4Eta { eta: f64, c0: f64 },
}

impl EpsilonPolicy {
    pub fn describe(&self) -> String {
        match self {
            EpsilonPolicy::Fixed(e) => format!("fixed:{e}"),
            EpsilonPolicy::Lemma4Eta { eta, c0 } => format!("lemma4:eta={eta},c0={c0}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    None,
    /// Oracle Gaussian noise with a fixed deviation.
    Gaussian { sigma: f64 },
    /// Oracle Gaussian noise sigma = coeff / d^power.
    GaussianScaled { coeff: f64, power: f64 },
    /// Corrupt a fraction of the assembled measurements with Gaussian
    /// spikes of deviation sigma/epsilon (a corrupted probe query).
    SparseMeasurement { prob: f64, sigma: f64 },
}

impl NoiseSpec {
    fn oracle_noise(&self, d: usize, seed: u64) -> NoiseModel {
        match *self {
            NoiseSpec::None | NoiseSpec::SparseMeasurement { .. } => NoiseModel::noiseless(seed),
            NoiseSpec::Gaussian { sigma } => NoiseModel {
                gaussian_sigma: sigma,
                sparse_prob: 0.0,
                sparse_sigma: 0.0,
                rng_seed: seed,
            },
            NoiseSpec::GaussianScaled { coeff, power } => NoiseModel {
                gaussian_sigma: coeff / (d as f64).powf(power),
                sparse_prob: 0.0,
                sparse_sigma: 0.0,
                rng_seed: seed,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    RankProjected,
    NuclearProx,
    SparseLowRank,
}

impl SolverChoice {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "svp" | "rank_projected" => Ok(SolverChoice::RankProjected),
            "nuclear" | "nuclear_prox" => Ok(SolverChoice::NuclearProx),
            "sparcs" | "sparse_low_rank" => Ok(SolverChoice::SparseLowRank),
            other => Err(RidgeError::parse(format!("unknown solver {other:?}"))),
        }
    }
}

/// Doubling-then-bisection search on a lattice of m_phi values.
#[derive(Debug, Clone, Copy, Default)]
pub struct SearchPolicy {
    /// Lattice step; default max(8, d/50).
    pub lattice: Option<usize>,
    /// First probed m_phi; default half the rank-k degrees of freedom.
    pub start: Option<usize>,
    /// Largest m_phi probed; default min(m_x d - 1, 10 k (d + m_x)).
    pub cap: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub sweep_variable: SweepVariable,
    /// Sweep values: dimensions d, or ranks k.
    pub sweep: Vec<usize>,
    /// Rank when sweeping d.
    pub k: usize,
    /// Dimension when sweeping k.
    pub d: usize,
    pub m_x: usize,
    pub epsilon: EpsilonPolicy,
    pub noise: NoiseSpec,
    pub criterion: Criterion,
    pub trials: usize,
    pub base_seed: u64,
    pub solver: SolverChoice,
    pub solver_max_iter: usize,
    pub solver_tol: f64,
    /// Subset-selection fill fraction (QuadSparseNoise only).
    pub fill: f64,
    pub search: SearchPolicy,
    pub out_dir: Option<PathBuf>,
    pub emit_svg: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(RidgeError::argument("sweep range must be nonempty"));
        }
        if !self.sweep.windows(2).all(|w| w[0] < w[1]) {
            return Err(RidgeError::argument("sweep range must be increasing"));
        }
        if self.trials == 0 {
            return Err(RidgeError::argument("need trials >= 1"));
        }
        let t = self.criterion.threshold();
        if !(0.0..=1.0).contains(&t) {
            return Err(RidgeError::argument("threshold must lie in [0, 1]"));
        }
        if !(self.fill > 0.0 && self.fill <= 1.0) {
            return Err(RidgeError::argument("fill must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Fig. 1 study at desk scale: logistic k = 1, m_x = 20, eps = 1e-3.
    pub fn logistic_desk(d_values: Vec<usize>, trials: usize, base_seed: u64) -> Self {
        ExperimentConfig {
            kind: ExperimentKind::Logistic,
            sweep_variable: SweepVariable::Dimension,
            sweep: d_values,
            k: 1,
            d: 0,
            m_x: 20,
            epsilon: EpsilonPolicy::Fixed(1e-3),
            noise: NoiseSpec::None,
            criterion: Criterion::InnerProduct(0.99),
            trials,
            base_seed,
            solver: SolverChoice::RankProjected,
            solver_max_iter: 400,
            solver_tol: 1e-6,
            fill: 1.0,
            search: SearchPolicy::default(),
            out_dir: None,
            emit_svg: false,
        }
    }

    /// Fig. 2 study at desk scale: Gaussian atoms, d = 60, m_x = 60.
    pub fn sum_gaussians_desk(k_values: Vec<usize>, trials: usize, base_seed: u64) -> Self {
        ExperimentConfig {
            kind: ExperimentKind::SumGaussians,
            sweep_variable: SweepVariable::Rank,
            sweep: k_values,
            k: 0,
            d: 60,
            m_x: 60,
            epsilon: EpsilonPolicy::Fixed(1e-3),
            noise: NoiseSpec::None,
            criterion: Criterion::Alignment(0.99),
            trials,
            base_seed,
            solver: SolverChoice::RankProjected,
            solver_max_iter: 200,
            solver_tol: 1e-6,
            fill: 1.0,
            search: SearchPolicy::default(),
            out_dir: None,
            emit_svg: false,
        }
    }

    /// Fig. 3 study at desk scale: quadratic form, Gaussian noise
    /// 0.01/d^{3/2}, k = 3, m_x = 30, eps = 0.1.
    pub fn quad_gauss_desk(d_values: Vec<usize>, trials: usize, base_seed: u64) -> Self {
        ExperimentConfig {
            kind: ExperimentKind::QuadGaussNoise,
            sweep_variable: SweepVariable::Dimension,
            sweep: d_values,
            k: 3,
            d: 0,
            m_x: 30,
            epsilon: EpsilonPolicy::Fixed(0.1),
            noise: NoiseSpec::GaussianScaled {
                coeff: 0.01,
                power: 1.5,
            },
            criterion: Criterion::Alignment(0.99),
            trials,
            base_seed,
            solver: SolverChoice::RankProjected,
            solver_max_iter: 200,
            solver_tol: 1e-6,
            fill: 1.0,
            search: SearchPolicy::default(),
            out_dir: None,
            emit_svg: false,
        }
    }

    /// Fig. 4 study at desk scale: subset selection at fill 0.9 with 1%
    /// corrupted measurements, sparse+low-rank recovery, threshold 0.95.
    pub fn quad_sparse_desk(d_values: Vec<usize>, trials: usize, base_seed: u64) -> Self {
        ExperimentConfig {
            kind: ExperimentKind::QuadSparseNoise,
            sweep_variable: SweepVariable::Dimension,
            sweep: d_values,
            k: 3,
            d: 0,
            m_x: 30,
            epsilon: EpsilonPolicy::Fixed(0.1),
            noise: NoiseSpec::SparseMeasurement {
                prob: 0.01,
                sigma: 0.01,
            },
            criterion: Criterion::Alignment(0.95),
            trials,
            base_seed,
            solver: SolverChoice::SparseLowRank,
            solver_max_iter: 300,
            solver_tol: 1e-6,
            fill: 0.9,
            search: SearchPolicy::default(),
            out_dir: None,
            emit_svg: false,
        }
    }

    /// Read an experiment description from a key-value config.
    pub fn from_kv(cfg: &KvConfig) -> Result<Self> {
        let kind = ExperimentKind::parse(cfg.require("experiment")?)?;
        let trials = cfg.get_usize("trials", 5)?;
        let base_seed = cfg.get_u64("seed", 0)?;
        let mut out = match kind {
            ExperimentKind::Logistic => ExperimentConfig::logistic_desk(
                cfg.get_usize_list("d_values")?
                    .unwrap_or_else(|| vec![200, 400, 800]),
                trials,
                base_seed,
            ),
            ExperimentKind::SumGaussians => ExperimentConfig::sum_gaussians_desk(
                cfg.get_usize_list("k_values")?.unwrap_or_else(|| vec![4, 6, 8]),
                trials,
                base_seed,
            ),
            ExperimentKind::QuadGaussNoise => ExperimentConfig::quad_gauss_desk(
                cfg.get_usize_list("d_values")?.unwrap_or_else(|| vec![30, 60]),
                trials,
                base_seed,
            ),
            ExperimentKind::QuadSparseNoise => ExperimentConfig::quad_sparse_desk(
                cfg.get_usize_list("d_values")?.unwrap_or_else(|| vec![30, 60]),
                trials,
                base_seed,
            ),
            ExperimentKind::Custom => {
                let mut c = ExperimentConfig::logistic_desk(
                    cfg.get_usize_list("d_values")?
                        .ok_or_else(|| RidgeError::parse("custom experiment needs d_values"))?,
                    trials,
                    base_seed,
                );
                c.kind = ExperimentKind::Custom;
                c
            }
        };
        // overrides shared by every kind
        if let Some(v) = cfg.get("m_x") {
            out.m_x = v.parse().map_err(|e| RidgeError::parse(format!("m_x: {e}")))?;
        }
        if let Some(v) = cfg.get("k") {
            out.k = v.parse().map_err(|e| RidgeError::parse(format!("k: {e}")))?;
        }
        if let Some(v) = cfg.get("d") {
            out.d = v.parse().map_err(|e| RidgeError::parse(format!("d: {e}")))?;
        }
        if let Some(raw) = cfg.get("epsilon") {
            out.epsilon = parse_epsilon_policy(raw, cfg.get_f64("c0", 16.0)?)?;
        }
        if let Some(raw) = cfg.get("criterion") {
            out.criterion = parse_criterion(raw)?;
        }
        if let Some(raw) = cfg.get("solver") {
            out.solver = SolverChoice::parse(raw)?;
        }
        out.solver_max_iter = cfg.get_usize("solver.max_iter", out.solver_max_iter)?;
        out.solver_tol = cfg.get_f64("solver.tol", out.solver_tol)?;
        out.fill = cfg.get_f64("fill", out.fill)?;
        if let Some(sigma) = cfg.get("noise.sigma") {
            let sigma: f64 = sigma
                .parse()
                .map_err(|e| RidgeError::parse(format!("noise.sigma: {e}")))?;
            out.noise = NoiseSpec::Gaussian { sigma };
        }
        if let Some(coeff) = cfg.get("noise.coeff") {
            let coeff: f64 = coeff
                .parse()
                .map_err(|e| RidgeError::parse(format!("noise.coeff: {e}")))?;
            let power = cfg.get_f64("noise.power", 1.5)?;
            out.noise = NoiseSpec::GaussianScaled { coeff, power };
        }
        if let Some(prob) = cfg.get("noise.sparse_prob") {
            let prob: f64 = prob
                .parse()
                .map_err(|e| RidgeError::parse(format!("noise.sparse_prob: {e}")))?;
            let sigma = cfg.get_f64("noise.sparse_sigma", 0.01)?;
            out.noise = NoiseSpec::SparseMeasurement { prob, sigma };
        }
        if let Some(v) = cfg.get("search.lattice") {
            out.search.lattice = Some(
                v.parse()
                    .map_err(|e| RidgeError::parse(format!("search.lattice: {e}")))?,
            );
        }
        if let Some(v) = cfg.get("search.start") {
            out.search.start = Some(
                v.parse()
                    .map_err(|e| RidgeError::parse(format!("search.start: {e}")))?,
            );
        }
        if let Some(v) = cfg.get("search.cap") {
            out.search.cap = Some(
                v.parse()
                    .map_err(|e| RidgeError::parse(format!("search.cap: {e}")))?,
            );
        }
        out.trials = cfg.get_usize("trials", out.trials)?;
        out.emit_svg = cfg.get_bool("svg", false)?;
        out.validate()?;
        Ok(out)
    }
}

fn parse_epsilon_policy(raw: &str, c0: f64) -> Result<EpsilonPolicy> {
    if let Some(rest) = raw.strip_prefix("fixed:") {
        let e: f64 = rest
            .parse()
            .map_err(|e| RidgeError::parse(format!("epsilon: {e}")))?;
        return Ok(EpsilonPolicy::Fixed(e));
    }
    if let Some(rest) = raw.strip_prefix("lemma4:") {
        let eta: f64 = rest
            .parse()
            .map_err(|e| RidgeError::parse(format!("epsilon: {e}")))?;
        return Ok(EpsilonPolicy::Lemma4Eta { eta, c0 });
    }
    let e: f64 = raw
        .parse()
        .map_err(|e| RidgeError::parse(format!("epsilon: {e}")))?;
    Ok(EpsilonPolicy::Fixed(e))
}

fn parse_criterion(raw: &str) -> Result<Criterion> {
    if let Some(rest) = raw.strip_prefix("inner_product:") {
        Ok(Criterion::InnerProduct(rest.parse().map_err(|e| {
            RidgeError::parse(format!("criterion: {e}"))
        })?))
    } else if let Some(rest) = raw.strip_prefix("alignment:") {
        Ok(Criterion::Alignment(rest.parse().map_err(|e| {
            RidgeError::parse(format!("criterion: {e}"))
        })?))
    } else {
        Err(RidgeError::parse(format!(
            "criterion must be inner_product:<t> or alignment:<t>, got {raw:?}"
        )))
    }
}

/// One pipeline run inside a sweep.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub seed: u64,
    pub d: usize,
    pub k: usize,
    pub m_x: usize,
    pub m_phi: usize,
    pub epsilon: f64,
    pub alignment: f64,
    pub oracle_calls: u64,
    pub solver_iterations: usize,
    pub wall_time: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Environment variable that overrides the configured base seed.
pub const SEED_ENV_VAR: &str = "RIDGELIFT_SEED";

/// Seed precedence: explicit CLI flag, then RIDGELIFT_SEED, then config.
pub fn resolve_base_seed(
    config_seed: u64,
    env_value: Option<&str>,
    flag: Option<u64>,
) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(raw) = env_value {
        return raw
            .parse()
            .map_err(|e| RidgeError::parse(format!("{SEED_ENV_VAR} = {raw:?}: {e}")));
    }
    Ok(config_seed)
}

fn build_trial_model(
    kind: ExperimentKind,
    d: usize,
    k: usize,
    trial_seed: u64,
) -> Result<RidgeModel> {
    let model_seed = splitmix64(trial_seed ^ 0x1111);
    match kind {
        ExperimentKind::Logistic | ExperimentKind::Custom => {
            RidgeModel::random(d, LinkFunction::logistic(), None, model_seed)
        }
        ExperimentKind::SumGaussians => {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(trial_seed ^ 0x2222));
            let widths = Uniform::new(0.1f64, 0.5).unwrap();
            let sigmas: Vec<f64> = (0..k).map(|_| widths.sample(&mut rng)).collect();
            let offsets = 0.2 * sample_sphere(k, &mut rng);
            let link = LinkFunction::sum_of_gaussians(sigmas, offsets.iter().copied().collect())?;
            RidgeModel::random(d, link, None, model_seed)
        }
        ExperimentKind::QuadGaussNoise | ExperimentKind::QuadSparseNoise => {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(trial_seed ^ 0x3333));
            let b = sample_sphere(k, &mut rng);
            let link = LinkFunction::quadratic_form(b)?;
            RidgeModel::random(d, link, None, model_seed)
        }
    }
}

/// Corrupt `round(prob * len)` distinct measurements with Gaussian spikes of
/// deviation `spike_sigma`; returns how many were hit.
fn corrupt_measurements(y: &mut DVector<f64>, prob: f64, spike_sigma: f64, seed: u64) -> usize {
    let n = y.len();
    let count = ((prob * n as f64).round() as usize).min(n);
    if count == 0 {
        return 0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    for t in 0..count {
        let r = t + (rng.next_u64() as usize) % (n - t);
        pool.swap(t, r);
    }
    for &e in &pool[..count] {
        let z: f64 = StandardNormal.sample(&mut rng);
        y[e] += spike_sigma * z;
    }
    count
}

fn epsilon_for(
    cfg: &ExperimentConfig,
    model: &RidgeModel,
    d: usize,
    k: usize,
    m_phi: usize,
) -> Result<f64> {
    match cfg.epsilon {
        EpsilonPolicy::Fixed(e) => Ok(e),
        EpsilonPolicy::Lemma4Eta { eta, c0 } => {
            let alpha = estimate_alpha_origin(model).alpha_hat.max(1e-12);
            let mut inputs = BoundsInputs::new(d, k, cfg.m_x, m_phi, 1e-3, model.c2(), alpha);
            inputs.eta = eta;
            inputs.c0 = c0;
            let report = compute_bounds(&inputs)?;
            Ok(0.99 * report.epsilon_ceiling_eta)
        }
    }
}

/// Run the measurement + recovery pipeline once; the trial's alignment is 0
/// when the solver fails to converge.
pub fn run_trial(
    cfg: &ExperimentConfig,
    d: usize,
    k: usize,
    m_phi: usize,
    trial_idx: usize,
) -> Result<TrialRecord> {
    let trial_seed = cfg.base_seed ^ trial_idx as u64;
    let start = Instant::now();
    let model = build_trial_model(cfg.kind, d, k, trial_seed)?;
    let epsilon = epsilon_for(cfg, &model, d, k, m_phi)?;
    let mode = match cfg.kind {
        ExperimentKind::QuadSparseNoise => SamplingMode::SubsetSelection { fill: cfg.fill },
        _ => SamplingMode::Dense,
    };
    let plan = build_plan(
        d,
        k,
        cfg.m_x,
        m_phi,
        epsilon,
        mode,
        splitmix64(trial_seed ^ 0x4444),
    )?;
    let noise = cfg.noise.oracle_noise(d, splitmix64(trial_seed ^ 0x5555));
    let mut oracle = Oracle::new(&model, noise, 1.0 + plan.enlarged_radius());
    let mut ms = measure(&mut oracle, &plan)?;

    let mut corrupted = 0usize;
    if let NoiseSpec::SparseMeasurement { prob, sigma } = cfg.noise {
        corrupted = corrupt_measurements(
            &mut ms.y,
            prob,
            sigma / epsilon,
            splitmix64(trial_seed ^ 0x6666),
        );
    }

    let op = plan.operator();
    let solver = match cfg.solver {
        SolverChoice::RankProjected => SolverKind::RankProjected {
            step: None,
            max_iter: cfg.solver_max_iter,
            tol: cfg.solver_tol,
        },
        SolverChoice::NuclearProx => SolverKind::NuclearProx {
            step: None,
            mu0: None,
            max_iter: cfg.solver_max_iter.max(500),
            tol: cfg.solver_tol.min(1e-7),
        },
        SolverChoice::SparseLowRank => SolverKind::SparseLowRank {
            sparsity: corrupted.max(1),
            step: None,
            max_iter: cfg.solver_max_iter,
            tol: cfg.solver_tol,
        },
    };
    let lambda = match cfg.solver {
        SolverChoice::NuclearProx => {
            let sigma = cfg.noise.oracle_noise(d, 0).gaussian_sigma;
            choose_lambda(model.c2(), k, d, cfg.m_x, m_phi, epsilon, 0.25, sigma, 3.2)?
        }
        _ => f64::INFINITY,
    };
    let config = RecoveryConfig {
        lambda,
        target_rank: k,
        solver,
        seed: splitmix64(trial_seed ^ 0x7777),
    };

    let (alignment, iterations) = match recover(&ms.y, &op, &config) {
        Ok(est) => match extract_subspace(&est, k) {
            Ok(sub) => (subspace_alignment(model.a(), sub.a_hat())?, est.iterations),
            Err(RidgeError::Degenerate { .. }) => (0.0, est.iterations),
            Err(e) => return Err(e),
        },
        Err(RidgeError::NonConvergence { iterations, .. }) => (0.0, iterations),
        Err(e) => return Err(e),
    };

    Ok(TrialRecord {
        seed: trial_seed,
        d,
        k,
        m_x: cfg.m_x,
        m_phi,
        epsilon,
        alignment,
        oracle_calls: ms.oracle_calls,
        solver_iterations: iterations,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn probe(
    cfg: &ExperimentConfig,
    d: usize,
    k: usize,
    m_phi: usize,
) -> Result<(f64, Vec<TrialRecord>)> {
    let mut indexed: Vec<(usize, TrialRecord)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, d, k, m_phi, t).map(|r| (t, r)))
        .collect::<Result<Vec<_>>>()?;
    indexed.sort_by_key(|(t, _)| *t);
    let records: Vec<TrialRecord> = indexed.into_iter().map(|(_, r)| r).collect();
    let metric = records
        .iter()
        .map(|r| cfg.criterion.metric(r.alignment))
        .sum::<f64>()
        / records.len() as f64;
    Ok((metric, records))
}

#[derive(Debug, Clone)]
pub struct ProbeSummary {
    pub m_phi: usize,
    pub mean_metric: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub m_phi_star: usize,
    /// Mean alignment over the trials at m_phi_star.
    pub mean_alignment: f64,
    /// Every trial of every probe, in probe order.
    pub records: Vec<TrialRecord>,
    pub probes: Vec<ProbeSummary>,
}

/// Smallest lattice m_phi whose trial-averaged criterion passes: geometric
/// doubling to bracket the transition, then bisection on the lattice.
pub fn find_min_mphi(cfg: &ExperimentConfig, d: usize, k: usize) -> Result<SearchOutcome> {
    cfg.validate()?;
    let lattice = cfg.search.lattice.unwrap_or_else(|| (d / 50).max(8)).max(1);
    let round_up = |m: usize| m.div_ceil(lattice) * lattice;
    let dof = k * (d + cfg.m_x);
    let start = round_up(cfg.search.start.unwrap_or((dof / 2).max(lattice)).max(lattice));
    // stay under the m_x * d information ceiling, rounded down to the lattice
    let hard_cap = ((cfg.m_x * d).saturating_sub(1)) / lattice * lattice;
    let cap = cfg
        .search
        .cap
        .unwrap_or_else(|| round_up(10 * dof))
        .min(hard_cap)
        .max(start);
    let threshold = cfg.criterion.threshold();

    let mut records = Vec::new();
    let mut probes = Vec::new();
    let run = |m_phi: usize,
               records: &mut Vec<TrialRecord>,
               probes: &mut Vec<ProbeSummary>|
     -> Result<bool> {
        let (metric, trial_records) = probe(cfg, d, k, m_phi)?;
        let passed = metric >= threshold;
        records.extend(trial_records);
        probes.push(ProbeSummary {
            m_phi,
            mean_metric: metric,
            passed,
        });
        Ok(passed)
    };

    // doubling phase
    let mut lo = 0usize; // known-fail sentinel (never probed)
    let mut m = start;
    let mut hi = loop {
        if run(m, &mut records, &mut probes)? {
            break m;
        }
        lo = m;
        if m >= cap {
            return Err(RidgeError::SearchExhausted { cap });
        }
        m = round_up((2 * m).min(cap));
    };

    // bisection on the lattice
    while hi - lo > lattice {
        let mid = round_up(lo + (hi - lo) / 2)
            .min(hi - lattice)
            .max(lo + lattice);
        if run(mid, &mut records, &mut probes)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let mean_alignment = {
        let winners: Vec<&TrialRecord> = records.iter().filter(|r| r.m_phi == hi).collect();
        winners.iter().map(|r| r.alignment).sum::<f64>() / winners.len().max(1) as f64
    };
    Ok(SearchOutcome {
        m_phi_star: hi,
        mean_alignment,
        records,
        probes,
    })
}

#[derive(Debug, Clone)]
pub struct SweepPointResult {
    pub sweep_value: usize,
    pub d: usize,
    pub k: usize,
    pub outcome: SearchOutcome,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub points: Vec<SweepPointResult>,
    /// (x, y) rows written to the figure data file.
    pub figure_data: Vec<(f64, f64)>,
    pub figure: Option<usize>,
}

struct CsvSinks {
    trials: Option<csv::Writer<std::fs::File>>,
    timings: Option<csv::Writer<std::fs::File>>,
    summary: Option<csv::Writer<std::fs::File>>,
}

fn csv_err(e: csv::Error) -> RidgeError {
    RidgeError::parse(e.to_string())
}

impl CsvSinks {
    fn open(dir: Option<&Path>) -> Result<CsvSinks> {
        let Some(dir) = dir else {
            return Ok(CsvSinks {
                trials: None,
                timings: None,
                summary: None,
            });
        };
        std::fs::create_dir_all(dir)?;
        let mut trials = csv::Writer::from_path(dir.join("trials.csv")).map_err(csv_err)?;
        trials
            .write_record([
                "seed",
                "d",
                "k",
                "m_x",
                "m_phi",
                "epsilon",
                "alignment",
                "oracle_calls",
                "solver_iterations",
            ])
            .map_err(csv_err)?;
        let mut timings = csv::Writer::from_path(dir.join("timings.csv")).map_err(csv_err)?;
        timings
            .write_record(["seed", "d", "k", "m_phi", "wall_time_s"])
            .map_err(csv_err)?;
        let mut summary = csv::Writer::from_path(dir.join("summary.csv")).map_err(csv_err)?;
        summary
            .write_record(["sweep_value", "m_phi_star", "mean_alignment"])
            .map_err(csv_err)?;
        Ok(CsvSinks {
            trials: Some(trials),
            timings: Some(timings),
            summary: Some(summary),
        })
    }

    fn write_point(&mut self, point: &SweepPointResult) -> Result<()> {
        if let Some(w) = self.trials.as_mut() {
            for r in &point.outcome.records {
                w.write_record([
                    r.seed.to_string(),
                    r.d.to_string(),
                    r.k.to_string(),
                    r.m_x.to_string(),
                    r.m_phi.to_string(),
                    r.epsilon.to_string(),
                    r.alignment.to_string(),
                    r.oracle_calls.to_string(),
                    r.solver_iterations.to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush()?;
        }
        if let Some(w) = self.timings.as_mut() {
            for r in &point.outcome.records {
                w.write_record([
                    r.seed.to_string(),
                    r.d.to_string(),
                    r.k.to_string(),
                    r.m_phi.to_string(),
                    format!("{:.6}", r.wall_time),
                ])
                .map_err(csv_err)?;
            }
            w.flush()?;
        }
        if let Some(w) = self.summary.as_mut() {
            w.write_record([
                point.sweep_value.to_string(),
                point.outcome.m_phi_star.to_string(),
                point.outcome.mean_alignment.to_string(),
            ])
            .map_err(csv_err)?;
            w.flush()?;
        }
        Ok(())
    }
}

/// Run the whole sweep, flushing per-point CSV rows as they complete so a
/// failure keeps partial results on disk.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut sinks = CsvSinks::open(cfg.out_dir.as_deref())?;
    if let Some(dir) = cfg.out_dir.as_deref() {
        let mut info = std::fs::File::create(dir.join("run_info.txt"))?;
        writeln!(info, "experiment = {:?}", cfg.kind)?;
        writeln!(info, "sweep = {:?}", cfg.sweep)?;
        writeln!(info, "m_x = {}", cfg.m_x)?;
        writeln!(info, "epsilon_policy = {}", cfg.epsilon.describe())?;
        writeln!(info, "criterion = {:?}", cfg.criterion)?;
        writeln!(info, "trials = {}", cfg.trials)?;
        writeln!(info, "base_seed = {}", cfg.base_seed)?;
        writeln!(info, "solver = {:?}", cfg.solver)?;
    }

    let mut points = Vec::new();
    let mut figure_data = Vec::new();
    for &sweep_value in &cfg.sweep {
        let (d, k) = match cfg.sweep_variable {
            SweepVariable::Dimension => (sweep_value, cfg.k),
            SweepVariable::Rank => (cfg.d, sweep_value),
        };
        let outcome = find_min_mphi(cfg, d, k)?;
        let y = match cfg.kind {
            // Fig. 1 plots m_phi/d against d
            ExperimentKind::Logistic => outcome.m_phi_star as f64 / d as f64,
            _ => outcome.m_phi_star as f64,
        };
        figure_data.push((sweep_value as f64, y));
        let point = SweepPointResult {
            sweep_value,
            d,
            k,
            outcome,
        };
        sinks.write_point(&point)?;
        points.push(point);
    }

    let figure = cfg.kind.figure();
    if let (Some(dir), Some(fig)) = (cfg.out_dir.as_deref(), figure) {
        let mut w =
            csv::Writer::from_path(dir.join(format!("fig{fig}.csv"))).map_err(csv_err)?;
        w.write_record(["x", "y"]).map_err(csv_err)?;
        for &(x, y) in &figure_data {
            w.write_record([x.to_string(), y.to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        if cfg.emit_svg {
            let (x_label, y_label) = match cfg.kind {
                ExperimentKind::Logistic => ("d", "m_phi*/d"),
                ExperimentKind::SumGaussians => ("k", "m_phi*"),
                _ => ("d", "m_phi*"),
            };
            let mut f = std::fs::File::create(dir.join(format!("fig{fig}.svg")))?;
            svg::write_line_plot(
                &mut f,
                &format!("{:?}", cfg.kind),
                x_label,
                y_label,
                &figure_data,
            )?;
        }
    }

    Ok(ExperimentOutput {
        points,
        figure_data,
        figure,
    })
}

/// One full run of the learning algorithm: sample, measure, recover,
/// extract the subspace, and (optionally) build the grid estimator.
#[derive(Debug, Clone)]
pub struct SimulateConfig {
    pub kind: ExperimentKind,
    pub d: usize,
    pub k: usize,
    pub m_x: usize,
    pub m_phi: usize,
    pub epsilon: f64,
    pub fill: Option<f64>,
    pub noise: NoiseSpec,
    pub solver: SolverChoice,
    pub solver_max_iter: usize,
    pub solver_tol: f64,
    pub seed: u64,
    pub build_estimate: bool,
    pub h: f64,
    pub probes: usize,
    pub node_cap: usize,
    pub trace_out: Option<PathBuf>,
}

impl SimulateConfig {
    pub fn from_kv(cfg: &KvConfig) -> Result<Self> {
        let kind = ExperimentKind::parse(cfg.get("kind").unwrap_or("logistic"))?;
        let d = cfg.require_usize("d")?;
        let k = cfg.get_usize("k", 1)?;
        Ok(SimulateConfig {
            kind,
            d,
            k,
            m_x: cfg.get_usize("m_x", 20)?,
            m_phi: cfg.require_usize("m_phi")?,
            epsilon: cfg.get_f64("epsilon", 1e-3)?,
            fill: cfg
                .get("fill")
                .map(|v| v.parse())
                .transpose()
                .map_err(|e| RidgeError::parse(format!("fill: {e}")))?,
            noise: if let Some(sigma) = cfg.get("noise.sigma") {
                NoiseSpec::Gaussian {
                    sigma: sigma
                        .parse()
                        .map_err(|e| RidgeError::parse(format!("noise.sigma: {e}")))?,
                }
            } else {
                NoiseSpec::None
            },
            solver: SolverChoice::parse(cfg.get("solver").unwrap_or("svp"))?,
            solver_max_iter: cfg.get_usize("solver.max_iter", 300)?,
            solver_tol: cfg.get_f64("solver.tol", 1e-7)?,
            seed: cfg.get_u64("seed", 0)?,
            build_estimate: cfg.get_bool("estimate", true)?,
            h: cfg.get_f64("h", 0.05)?,
            probes: cfg.get_usize("probes", 200)?,
            node_cap: cfg.get_usize("node_cap", DEFAULT_NODE_CAP)?,
            trace_out: None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub alignment: f64,
    pub uniform_error: Option<f64>,
    pub measurement_calls: u64,
    pub grid_calls: u64,
    pub solver_iterations: usize,
    pub residual_spectral: f64,
    pub dantzig_feasible: bool,
    pub wall_time: f64,
}

pub fn simulate(cfg: &SimulateConfig) -> Result<SimulateReport> {
    let start = Instant::now();
    let model = build_trial_model(cfg.kind, cfg.d, cfg.k, cfg.seed)?;
    let mode = match (cfg.kind, cfg.fill) {
        (ExperimentKind::QuadSparseNoise, fill) => SamplingMode::SubsetSelection {
            fill: fill.unwrap_or(0.9),
        },
        (_, Some(fill)) => SamplingMode::SubsetSelection { fill },
        _ => SamplingMode::Dense,
    };
    let plan = build_plan(
        cfg.d,
        cfg.k,
        cfg.m_x,
        cfg.m_phi,
        cfg.epsilon,
        mode,
        splitmix64(cfg.seed ^ 0x4444),
    )?;
    let noise = cfg.noise.oracle_noise(cfg.d, splitmix64(cfg.seed ^ 0x5555));
    let sigma = noise.gaussian_sigma;
    let mut oracle = Oracle::new(&model, noise, 1.0 + plan.enlarged_radius());
    let ms = measure(&mut oracle, &plan)?;
    let measurement_calls = ms.oracle_calls;

    let op = plan.operator();
    let solver = match cfg.solver {
        SolverChoice::RankProjected => SolverKind::RankProjected {
            step: None,
            max_iter: cfg.solver_max_iter,
            tol: cfg.solver_tol,
        },
        SolverChoice::NuclearProx => SolverKind::NuclearProx {
            step: None,
            mu0: None,
            max_iter: cfg.solver_max_iter.max(1000),
            tol: cfg.solver_tol,
        },
        SolverChoice::SparseLowRank => SolverKind::SparseLowRank {
            sparsity: (plan.measurement_len() as f64 * 0.01).round() as usize,
            step: None,
            max_iter: cfg.solver_max_iter,
            tol: cfg.solver_tol,
        },
    };
    let lambda = match cfg.solver {
        SolverChoice::NuclearProx => choose_lambda(
            model.c2(),
            cfg.k,
            cfg.d,
            cfg.m_x,
            cfg.m_phi,
            cfg.epsilon,
            0.25,
            sigma,
            3.2,
        )?,
        _ => f64::INFINITY,
    };
    let rec_config = RecoveryConfig {
        lambda,
        target_rank: cfg.k,
        solver,
        seed: splitmix64(cfg.seed ^ 0x7777),
    };
    let est = recover(&ms.y, &op, &rec_config)?;
    if let Some(path) = &cfg.trace_out {
        write_trace_csv(path, &est)?;
    }
    let sub = extract_subspace(&est, cfg.k)?;
    let alignment = subspace_alignment(model.a(), sub.a_hat())?;

    let mut grid_calls = 0;
    let uniform = if cfg.build_estimate {
        let eps_bar = plan.enlarged_radius();
        let offset_bound = model.offset().map(|b| b.norm()).unwrap_or(0.0);
        let w = 1.0 + eps_bar + offset_bound;
        let mut grid_oracle = Oracle::new(
            &model,
            NoiseModel::noiseless(splitmix64(cfg.seed ^ 0x8888)),
            grid_reach(cfg.k, cfg.h, w) + 1e-9,
        );
        let fe = build_estimate(
            &mut grid_oracle,
            sub.a_hat(),
            cfg.h,
            eps_bar,
            offset_bound,
            cfg.node_cap,
        )?;
        grid_calls = fe.oracle_calls();
        let report = uniform_error(&fe, &model, cfg.probes, splitmix64(cfg.seed ^ 0x9999))?;
        Some(report.sup_error)
    } else {
        None
    };

    Ok(SimulateReport {
        alignment,
        uniform_error: uniform,
        measurement_calls,
        grid_calls,
        solver_iterations: est.iterations,
        residual_spectral: est.residual_spectral,
        dantzig_feasible: est.dantzig_feasible,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Solver trace to CSV with columns (iteration, objective, residual).
pub fn write_trace_csv(path: &Path, est: &LowRankEstimate) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["iteration", "objective", "residual"])
        .map_err(csv_err)?;
    for row in &est.trace {
        w.write_record([
            row.iteration.to_string(),
            row.objective.to_string(),
            row.residual.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// RIP diagnostic driver for the CLI: build a plan, run the probe, render a
/// text histogram.
pub fn rip_report(
    d: usize,
    k: usize,
    m_x: usize,
    m_phi: usize,
    rank: usize,
    trials: usize,
    seed: u64,
) -> Result<String> {
    let plan = build_plan(d, k, m_x, m_phi, 1e-3, SamplingMode::Dense, seed)?;
    let op = plan.operator();
    let diag = rip_diagnostic(&op, rank, trials, splitmix64(seed ^ 0xabcd))?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &r in &diag.ratios {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    let bins = 20usize;
    let width = ((hi - lo) / bins as f64).max(1e-12);
    let mut counts = vec![0usize; bins];
    for &r in &diag.ratios {
        let b = (((r - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let peak = counts.iter().copied().max().unwrap_or(1).max(1);
    let mut out = String::new();
    out.push_str(&format!(
        "rip diagnostic: d={d} m_x={m_x} m_phi={m_phi} rank={rank} trials={trials}\n"
    ));
    out.push_str(&format!("kappa_hat = {:.6}\n", diag.kappa_hat));
    for (b, &c) in counts.iter().enumerate() {
        let left = lo + b as f64 * width;
        let bar = "#".repeat(c * 50 / peak);
        out.push_str(&format!("{left:>8.4} | {bar} {c}\n"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_resolution_precedence() {
        assert_eq!(resolve_base_seed(7, None, None).unwrap(), 7);
        assert_eq!(resolve_base_seed(7, Some("42"), None).unwrap(), 42);
        assert_eq!(resolve_base_seed(7, Some("42"), Some(9)).unwrap(), 9);
        assert!(resolve_base_seed(7, Some("x"), None).is_err());
    }

    #[test]
    fn trial_is_deterministic_and_accounts_oracle_calls() {
        let cfg = ExperimentConfig::logistic_desk(vec![40], 2, 11);
        let r1 = run_trial(&cfg, 40, 1, 96, 0).unwrap();
        let r2 = run_trial(&cfg, 40, 1, 96, 0).unwrap();
        assert_eq!(r1.seed, r2.seed);
        assert_eq!(r1.alignment.to_bits(), r2.alignment.to_bits());
        assert_eq!(r1.oracle_calls, (20 * (96 + 1)) as u64);
        let r3 = run_trial(&cfg, 40, 1, 96, 1).unwrap();
        assert_ne!(r1.alignment.to_bits(), r3.alignment.to_bits());
    }

    #[test]
    fn zero_threshold_returns_lattice_minimum() {
        let mut cfg = ExperimentConfig::logistic_desk(vec![30], 1, 3);
        cfg.criterion = Criterion::Alignment(0.0);
        cfg.search.lattice = Some(8);
        let outcome = find_min_mphi(&cfg, 30, 1).unwrap();
        assert_eq!(outcome.m_phi_star, 8);
    }

    #[test]
    fn search_exhaustion_is_reported() {
        let mut cfg = ExperimentConfig::logistic_desk(vec![30], 1, 3);
        cfg.criterion = Criterion::Alignment(1.1);
        assert!(cfg.validate().is_err());
        cfg.criterion = Criterion::Alignment(1.0); // unreachable in practice
        cfg.search.cap = Some(64);
        cfg.search.start = Some(32);
        cfg.solver_max_iter = 20;
        match find_min_mphi(&cfg, 30, 1) {
            Err(RidgeError::SearchExhausted { cap }) => assert_eq!(cap, 64),
            other => panic!("expected SearchExhausted, got {other:?}"),
        }
    }

    #[test]
    fn planted_search_stays_below_rip_ceiling() {
        // m_phi* should sit well under the 8 k (d + m_x) RIP-scale ceiling
        let mut cfg = ExperimentConfig::logistic_desk(vec![40], 3, 21);
        cfg.kind = ExperimentKind::SumGaussians;
        cfg.k = 2;
        cfg.m_x = 20;
        cfg.criterion = Criterion::Alignment(0.99);
        cfg.solver_max_iter = 200;
        cfg.solver_tol = 1e-6;
        let outcome = find_min_mphi(&cfg, 40, 2).unwrap();
        assert!(
            outcome.m_phi_star <= 8 * 2 * (40 + 20),
            "m_phi* = {}",
            outcome.m_phi_star
        );
        assert!(outcome.mean_alignment >= 0.99);
        // every probe keeps all its trials
        assert_eq!(outcome.records.len(), outcome.probes.len() * cfg.trials);
    }

    #[test]
    fn experiment_csv_bytes_are_reproducible() {
        let tmp = std::env::temp_dir().join(format!("ridgelift-harness-{}", std::process::id()));
        let run = |dir: &Path| -> Vec<u8> {
            let mut cfg = ExperimentConfig::logistic_desk(vec![30], 1, 5);
            cfg.search.lattice = Some(8);
            cfg.search.start = Some(32);
            cfg.out_dir = Some(dir.to_path_buf());
            run_experiment(&cfg).unwrap();
            std::fs::read(dir.join("trials.csv")).unwrap()
        };
        let b1 = run(&tmp.join("a"));
        let b2 = run(&tmp.join("b"));
        assert_eq!(b1, b2, "trials.csv must be byte-identical across runs");
        let _ = std::fs::remove_dir_all(&tmp);
    }

    #[test]
    fn simulate_runs_end_to_end_on_plant() {
        let cfg = SimulateConfig {
            kind: ExperimentKind::Logistic,
            d: 40,
            k: 1,
            m_x: 10,
            m_phi: 6 * (40 + 10),
            epsilon: 1e-3,
            fill: None,
            noise: NoiseSpec::None,
            solver: SolverChoice::RankProjected,
            solver_max_iter: 300,
            solver_tol: 1e-8,
            seed: 9,
            build_estimate: true,
            h: 0.02,
            probes: 100,
            node_cap: DEFAULT_NODE_CAP,
            trace_out: None,
        };
        let report = simulate(&cfg).unwrap();
        assert!(report.alignment >= 0.999, "alignment {}", report.alignment);
        assert_eq!(report.measurement_calls, (10 * (cfg.m_phi + 1)) as u64);
        assert!(report.grid_calls > 0);
        let err = report.uniform_error.unwrap();
        assert!(err <= 1e-2, "uniform error {err}");
    }

    #[test]
    fn config_files_map_to_experiments() {
        let text = "experiment = logistic\nd_values = 100,200\ntrials = 3\nseed = 17\n\
                    criterion = inner_product:0.95\nepsilon = fixed:1e-3\n[search]\nlattice = 8\n";
        let kv = KvConfig::parse(text).unwrap();
        let cfg = ExperimentConfig::from_kv(&kv).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Logistic);
        assert_eq!(cfg.sweep, vec![100, 200]);
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.base_seed, 17);
        assert_eq!(cfg.criterion, Criterion::InnerProduct(0.95));
        assert_eq!(cfg.search.lattice, Some(8));

        let empty = KvConfig::parse("experiment = custom\nd_values =\n").unwrap();
        assert!(ExperimentConfig::from_kv(&empty).is_err());
    }

    #[test]
    fn lemma4_epsilon_policy_produces_admissible_steps() {
        let mut cfg = ExperimentConfig::logistic_desk(vec![50], 1, 2);
        cfg.epsilon = EpsilonPolicy::Lemma4Eta { eta: 0.99, c0: 1.0 };
        let model = build_trial_model(ExperimentKind::Logistic, 50, 1, 2).unwrap();
        let e1 = epsilon_for(&cfg, &model, 50, 1, 200).unwrap();
        let e2 = epsilon_for(&cfg, &model, 50, 1, 800).unwrap();
        assert!(e1 > 0.0 && e2 > 0.0);
        // ceiling grows like sqrt(m_phi)
        assert!((e2 / e1 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn sparse_corruption_hits_requested_fraction() {
        let mut y = DVector::zeros(1000);
        let hit = corrupt_measurements(&mut y, 0.01, 1.0, 3);
        assert_eq!(hit, 10);
        let nonzero = y.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 10);
    }
}
