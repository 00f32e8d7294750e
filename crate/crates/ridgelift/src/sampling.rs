//! Sampling sets and the measurement operator.
//!
//! A plan holds m_x centers drawn uniformly on the unit sphere and, for each
//! center, m_phi Rademacher directions with entries +-1/sqrt(m_phi). The
//! direction tensor is stored as a packed bit stream by default: at d = 3000
//! the dense tensor is m_phi * m_x * d floats and dominates memory, while the
//! bit form is 64x smaller and regenerates any direction on demand.
//!
//! Measurements are first-order finite differences of the oracle along the
//! directions; the same data defines the linear map Phi and its adjoint used
//! by the recovery solvers.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, RidgeError};
use crate::model::{sample_sphere, Oracle};

const DIRECTION_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const OMEGA_STREAM_SALT: u64 = 0x6a09_e667_f3bc_c909;

/// How measurements are formed from the direction tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingMode {
    /// One measurement per direction index i, summed over all centers.
    Dense,
    /// One measurement per sampled (i, j) pair; `fill` is the sampled
    /// fraction of the m_phi x m_x grid.
    SubsetSelection { fill: f64 },
}

/// Direction entries, packed (one sign bit each) or materialized as +-1.
#[derive(Debug, Clone)]
enum DirectionStorage {
    Packed(Vec<u64>),
    /// Sign values +-1.0; the 1/sqrt(m_phi) scale is applied separately.
    Materialized(Vec<f64>),
}

/// The (i, j)-indexed bundle of direction vectors phi_{i,j} in R^d with
/// entries +-1/sqrt(m_phi).
#[derive(Debug, Clone)]
pub struct DirectionTensor {
    storage: DirectionStorage,
    d: usize,
    m_x: usize,
    m_phi: usize,
    words_per_dir: usize,
    scale: f64,
}

impl DirectionTensor {
    fn generate(d: usize, m_x: usize, m_phi: usize, seed: u64, materialize: bool) -> Self {
        let words_per_dir = d.div_ceil(64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ DIRECTION_STREAM_SALT);
        let bits: Vec<u64> = (0..m_phi * m_x * words_per_dir)
            .map(|_| rng.next_u64())
            .collect();
        let scale = 1.0 / (m_phi as f64).sqrt();
        let mut tensor = DirectionTensor {
            storage: DirectionStorage::Packed(bits),
            d,
            m_x,
            m_phi,
            words_per_dir,
            scale,
        };
        if materialize {
            tensor.materialize_in_place();
        }
        tensor
    }

    /// Expand the packed bits into an explicit +-1 array (same sign stream).
    pub fn materialize_in_place(&mut self) {
        if let DirectionStorage::Packed(bits) = &self.storage {
            let mut signs = vec![0.0f64; self.m_phi * self.m_x * self.words_per_dir * 64];
            for (w, &word) in bits.iter().enumerate() {
                for b in 0..64 {
                    signs[w * 64 + b] = if (word >> b) & 1 == 1 { -1.0 } else { 1.0 };
                }
            }
            self.storage = DirectionStorage::Materialized(signs);
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    fn block_start_words(&self, i: usize, j: usize) -> usize {
        (i * self.m_x + j) * self.words_per_dir
    }

    /// Materialize phi_{i,j} as a d-vector with entries +-1/sqrt(m_phi).
    pub fn direction(&self, i: usize, j: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.d);
        self.fill_direction(i, j, out.as_mut_slice());
        out
    }

    fn fill_direction(&self, i: usize, j: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.d);
        match &self.storage {
            DirectionStorage::Packed(bits) => {
                let start = self.block_start_words(i, j);
                for (l, slot) in out.iter_mut().enumerate() {
                    let word = bits[start + l / 64];
                    *slot = if (word >> (l % 64)) & 1 == 1 {
                        -self.scale
                    } else {
                        self.scale
                    };
                }
            }
            DirectionStorage::Materialized(signs) => {
                let start = self.block_start_words(i, j) * 64;
                for (l, slot) in out.iter_mut().enumerate() {
                    *slot = signs[start + l] * self.scale;
                }
            }
        }
    }

    /// Unscaled signed dot product sum_l (+-1) x[l]; the caller applies the
    /// 1/sqrt(m_phi) scale. Summation order is fixed: 64-entry chunks with
    /// four interleaved accumulators, identical for both storage forms.
    #[inline]
    fn signed_dot(&self, i: usize, j: usize, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        match &self.storage {
            DirectionStorage::Packed(bits) => {
                let start = self.block_start_words(i, j);
                signed_dot_packed(&bits[start..start + self.words_per_dir], x)
            }
            DirectionStorage::Materialized(signs) => {
                let start = self.block_start_words(i, j) * 64;
                signed_dot_signs(&signs[start..start + self.words_per_dir * 64], x)
            }
        }
    }

    /// out[l] += (+-1) * c over the direction's sign pattern (unscaled).
    #[inline]
    fn axpy_signed(&self, i: usize, j: usize, c: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.d);
        match &self.storage {
            DirectionStorage::Packed(bits) => {
                let start = self.block_start_words(i, j);
                let c_bits = c.to_bits();
                let mut chunks = out.chunks_exact_mut(64);
                let mut wi = start;
                for chunk in chunks.by_ref() {
                    let w = bits[wi];
                    wi += 1;
                    let mut b = 0;
                    while b < 64 {
                        chunk[b] += f64::from_bits(c_bits ^ (((w >> b) & 1) << 63));
                        chunk[b + 1] += f64::from_bits(c_bits ^ (((w >> (b + 1)) & 1) << 63));
                        chunk[b + 2] += f64::from_bits(c_bits ^ (((w >> (b + 2)) & 1) << 63));
                        chunk[b + 3] += f64::from_bits(c_bits ^ (((w >> (b + 3)) & 1) << 63));
                        b += 4;
                    }
                }
                let rem = chunks.into_remainder();
                if !rem.is_empty() {
                    let w = bits[wi];
                    for (b, slot) in rem.iter_mut().enumerate() {
                        *slot += f64::from_bits(c_bits ^ (((w >> b) & 1) << 63));
                    }
                }
            }
            DirectionStorage::Materialized(signs) => {
                let start = self.block_start_words(i, j) * 64;
                for (l, slot) in out.iter_mut().enumerate() {
                    *slot += signs[start + l] * c;
                }
            }
        }
    }
}

#[inline]
fn signed_dot_packed(words: &[u64], x: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut chunks = x.chunks_exact(64);
    let mut wi = 0;
    for chunk in chunks.by_ref() {
        let w = words[wi];
        wi += 1;
        let mut b = 0;
        while b < 64 {
            acc[0] += f64::from_bits(chunk[b].to_bits() ^ (((w >> b) & 1) << 63));
            acc[1] += f64::from_bits(chunk[b + 1].to_bits() ^ (((w >> (b + 1)) & 1) << 63));
            acc[2] += f64::from_bits(chunk[b + 2].to_bits() ^ (((w >> (b + 2)) & 1) << 63));
            acc[3] += f64::from_bits(chunk[b + 3].to_bits() ^ (((w >> (b + 3)) & 1) << 63));
            b += 4;
        }
    }
    let rem = chunks.remainder();
    if !rem.is_empty() {
        let w = words[wi];
        for (b, &xv) in rem.iter().enumerate() {
            acc[b % 4] += f64::from_bits(xv.to_bits() ^ (((w >> b) & 1) << 63));
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

#[inline]
fn signed_dot_signs(signs: &[f64], x: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut chunks = x.chunks_exact(64);
    let mut base = 0;
    for chunk in chunks.by_ref() {
        let s = &signs[base..base + 64];
        base += 64;
        let mut b = 0;
        while b < 64 {
            acc[0] += s[b] * chunk[b];
            acc[1] += s[b + 1] * chunk[b + 1];
            acc[2] += s[b + 2] * chunk[b + 2];
            acc[3] += s[b + 3] * chunk[b + 3];
            b += 4;
        }
    }
    let rem = chunks.remainder();
    for (b, &xv) in rem.iter().enumerate() {
        acc[b % 4] += signs[base + b] * xv;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

/// Centers, directions and step size for one measurement campaign.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    d: usize,
    k: usize,
    m_x: usize,
    m_phi: usize,
    epsilon: f64,
    seed: u64,
    mode: SamplingMode,
    centers: DMatrix<f64>,
    directions: DirectionTensor,
    /// Sampled (i, j) pairs in measurement order; only in subset mode.
    omega: Option<Vec<(u32, u32)>>,
}

/// Build a plan: centers iid uniform on the sphere, directions iid
/// Rademacher scaled 1/sqrt(m_phi), everything deterministic in `seed`.
pub fn build_plan(
    d: usize,
    k: usize,
    m_x: usize,
    m_phi: usize,
    epsilon: f64,
    mode: SamplingMode,
    seed: u64,
) -> Result<SamplingPlan> {
    SamplingPlan::build(d, k, m_x, m_phi, epsilon, mode, seed, false)
}

impl SamplingPlan {
    #[allow(clippy::too_many_arguments)]
    fn build(
        d: usize,
        k: usize,
        m_x: usize,
        m_phi: usize,
        epsilon: f64,
        mode: SamplingMode,
        seed: u64,
        materialize: bool,
    ) -> Result<SamplingPlan> {
        if d == 0 || m_x == 0 || m_phi == 0 {
            return Err(RidgeError::argument(
                "d, m_x and m_phi must all be positive",
            ));
        }
        if k == 0 || k > d {
            return Err(RidgeError::argument(format!(
                "need 1 <= k <= d, got k = {k}, d = {d}"
            )));
        }
        if !(epsilon > 0.0) {
            return Err(RidgeError::argument("epsilon must be positive"));
        }
        if let SamplingMode::SubsetSelection { fill } = mode {
            if !(fill > 0.0 && fill <= 1.0) {
                return Err(RidgeError::argument("fill fraction must lie in (0, 1]"));
            }
        }

        let mut center_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centers = DMatrix::zeros(d, m_x);
        for j in 0..m_x {
            centers.set_column(j, &sample_sphere(d, &mut center_rng));
        }

        let directions = DirectionTensor::generate(d, m_x, m_phi, seed, materialize);

        let omega = match mode {
            SamplingMode::Dense => None,
            SamplingMode::SubsetSelection { fill } => {
                Some(sample_omega(m_phi, m_x, fill, seed)?)
            }
        };

        Ok(SamplingPlan {
            d,
            k,
            m_x,
            m_phi,
            epsilon,
            seed,
            mode,
            centers,
            directions,
            omega,
        })
    }

    /// Same plan with the direction tensor expanded to explicit floats.
    pub fn build_materialized(
        d: usize,
        k: usize,
        m_x: usize,
        m_phi: usize,
        epsilon: f64,
        mode: SamplingMode,
        seed: u64,
    ) -> Result<SamplingPlan> {
        SamplingPlan::build(d, k, m_x, m_phi, epsilon, mode, seed, true)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m_x(&self) -> usize {
        self.m_x
    }

    pub fn m_phi(&self) -> usize {
        self.m_phi
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn centers(&self) -> &DMatrix<f64> {
        &self.centers
    }

    pub fn directions(&self) -> &DirectionTensor {
        &self.directions
    }

    pub fn omega(&self) -> Option<&[(u32, u32)]> {
        self.omega.as_deref()
    }

    /// eps_bar = epsilon * sqrt(d / m_phi); queried points stay inside the
    /// ball of radius 1 + eps_bar.
    pub fn enlarged_radius(&self) -> f64 {
        self.epsilon * (self.d as f64 / self.m_phi as f64).sqrt()
    }

    /// Number of measurements this plan produces.
    pub fn measurement_len(&self) -> usize {
        match self.mode {
            SamplingMode::Dense => self.m_phi,
            SamplingMode::SubsetSelection { .. } => {
                self.omega.as_ref().map(|o| o.len()).unwrap_or(0)
            }
        }
    }

    /// The queried point xi_j + epsilon * phi_{i,j}.
    pub fn query_point(&self, i: usize, j: usize) -> DVector<f64> {
        let mut p = self.directions.direction(i, j);
        p *= self.epsilon;
        p += self.centers.column(j);
        p
    }

    pub fn operator(&self) -> MeasurementOperator<'_> {
        MeasurementOperator { plan: self }
    }

    /// Header block (d, k, m_x, m_phi, epsilon, seed, mode) followed by the
    /// centers matrix. Directions and the subset pattern regenerate from the
    /// seed on load.
    pub fn save<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "ridgelift-plan v1")?;
        writeln!(out, "d = {}", self.d)?;
        writeln!(out, "k = {}", self.k)?;
        writeln!(out, "m_x = {}", self.m_x)?;
        writeln!(out, "m_phi = {}", self.m_phi)?;
        writeln!(out, "epsilon = {}", self.epsilon)?;
        writeln!(out, "seed = {}", self.seed)?;
        match self.mode {
            SamplingMode::Dense => writeln!(out, "mode = dense")?,
            SamplingMode::SubsetSelection { fill } => writeln!(out, "mode = subset:{fill}")?,
        }
        writeln!(out, "centers:")?;
        crate::textmat::write_matrix(out, &self.centers)?;
        Ok(())
    }

    pub fn load<R: std::io::BufRead>(input: R) -> Result<SamplingPlan> {
        let mut lines = input.lines();
        let magic = lines
            .next()
            .ok_or_else(|| RidgeError::parse("empty plan file"))??;
        if magic.trim() != "ridgelift-plan v1" {
            return Err(RidgeError::parse("not a ridgelift plan file"));
        }
        let mut fields = std::collections::HashMap::new();
        let mut centers = None;
        for line in lines.by_ref() {
            let line = line?;
            let trimmed = line.trim().to_string();
            if trimmed.is_empty() {
                continue;
            }
            if trimmed == "centers:" {
                centers = Some(crate::textmat::read_matrix_lines(&mut lines)?);
                break;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| RidgeError::parse(format!("unexpected line {trimmed:?}")))?;
            fields.insert(key.trim().to_string(), value.trim().to_string());
        }
        let get = |key: &str| -> Result<&String> {
            fields
                .get(key)
                .ok_or_else(|| RidgeError::parse(format!("missing field {key}")))
        };
        let parse_num = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|e| RidgeError::parse(format!("bad {key}: {e}")))
        };
        let mode = {
            let raw = get("mode")?;
            if raw == "dense" {
                SamplingMode::Dense
            } else if let Some(fill) = raw.strip_prefix("subset:") {
                SamplingMode::SubsetSelection {
                    fill: fill
                        .parse()
                        .map_err(|e| RidgeError::parse(format!("bad mode fill: {e}")))?,
                }
            } else {
                return Err(RidgeError::parse(format!("unknown mode {raw:?}")));
            }
        };
        let seed: u64 = get("seed")?
            .parse()
            .map_err(|e| RidgeError::parse(format!("bad seed: {e}")))?;
        let epsilon: f64 = get("epsilon")?
            .parse()
            .map_err(|e| RidgeError::parse(format!("bad epsilon: {e}")))?;
        let mut plan = SamplingPlan::build(
            parse_num("d")?,
            parse_num("k")?,
            parse_num("m_x")?,
            parse_num("m_phi")?,
            epsilon,
            mode,
            seed,
            false,
        )?;
        let centers = centers.ok_or_else(|| RidgeError::parse("missing centers block"))?;
        if centers.shape() != plan.centers.shape() {
            return Err(RidgeError::parse("centers block has the wrong shape"));
        }
        // stored centers are authoritative
        plan.centers = centers;
        Ok(plan)
    }
}

/// Measurement CSV with columns (index, y).
pub fn write_measurements_csv<W: std::io::Write>(out: &mut W, ms: &MeasurementSet) -> Result<()> {
    writeln!(out, "index,y")?;
    for (i, v) in ms.y.iter().enumerate() {
        writeln!(out, "{i},{v}")?;
    }
    Ok(())
}

fn sample_omega(m_phi: usize, m_x: usize, fill: f64, seed: u64) -> Result<Vec<(u32, u32)>> {
    let total = m_phi * m_x;
    let count = ((fill * total as f64).round() as usize).clamp(1, total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ OMEGA_STREAM_SALT);
    // partial Fisher-Yates over the flattened grid
    let mut pool: Vec<u32> = (0..total as u32).collect();
    for t in 0..count {
        let r = t + (rng.next_u64() as usize) % (total - t);
        pool.swap(t, r);
    }
    let mut picked: Vec<u32> = pool[..count].to_vec();
    // measurement order: by center, then direction, so base values are reused
    picked.sort_by_key(|&e| {
        let i = e as usize / m_x;
        let j = e as usize % m_x;
        (j, i)
    });
    Ok(picked
        .into_iter()
        .map(|e| ((e as usize / m_x) as u32, (e as usize % m_x) as u32))
        .collect())
}

/// Finite-difference measurements of one plan against one oracle.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    /// m_phi entries in dense mode, |Omega| entries in subset mode.
    pub y: DVector<f64>,
    /// Distinct oracle queries spent: m_x * (m_phi + 1) in dense mode.
    pub oracle_calls: u64,
}

/// Assemble y: dense mode sums the per-center differences for each i; base
/// values f(xi_j) are evaluated once per center and reused.
pub fn measure(oracle: &mut Oracle<'_>, plan: &SamplingPlan) -> Result<MeasurementSet> {
    if oracle.model().d() != plan.d() {
        return Err(RidgeError::shape(format!(
            "model dimension {} does not match plan dimension {}",
            oracle.model().d(),
            plan.d()
        )));
    }
    let calls_before = oracle.calls();
    let eps = plan.epsilon;
    let y = match plan.mode {
        SamplingMode::Dense => {
            let mut y = DVector::zeros(plan.m_phi);
            for j in 0..plan.m_x {
                let base = oracle.eval(&plan.centers.column(j).into_owned())?;
                for i in 0..plan.m_phi {
                    let probe = oracle.eval(&plan.query_point(i, j))?;
                    y[i] += (probe - base) / eps;
                }
            }
            y
        }
        SamplingMode::SubsetSelection { .. } => {
            let omega = plan.omega.as_ref().expect("subset plan has omega");
            let mut y = DVector::zeros(omega.len());
            let mut base = f64::NAN;
            let mut base_j = usize::MAX;
            for (e, &(i, j)) in omega.iter().enumerate() {
                let (i, j) = (i as usize, j as usize);
                if j != base_j {
                    base = oracle.eval(&plan.centers.column(j).into_owned())?;
                    base_j = j;
                }
                let probe = oracle.eval(&plan.query_point(i, j))?;
                y[e] = (probe - base) / eps;
            }
            y
        }
    };
    Ok(MeasurementSet {
        y,
        oracle_calls: oracle.calls() - calls_before,
    })
}

/// The linear map Phi: R^{d x m_x} -> R^m and its adjoint. Read-only view
/// over a plan; shareable across threads.
#[derive(Debug, Clone, Copy)]
pub struct MeasurementOperator<'a> {
    plan: &'a SamplingPlan,
}

impl<'a> MeasurementOperator<'a> {
    pub fn plan(&self) -> &'a SamplingPlan {
        self.plan
    }

    pub fn output_len(&self) -> usize {
        self.plan.measurement_len()
    }

    pub fn input_shape(&self) -> (usize, usize) {
        (self.plan.d, self.plan.m_x)
    }

    fn check_input(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.nrows() != self.plan.d || x.ncols() != self.plan.m_x {
            return Err(RidgeError::shape(format!(
                "operator input must be {} x {}, got {} x {}",
                self.plan.d,
                self.plan.m_x,
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// [Phi(X)]_i = sum_j <phi_{i,j}, X_{:,j}> (dense mode) or one inner
    /// product per sampled pair (subset mode).
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        let plan = self.plan;
        let dir = &plan.directions;
        let data = x.as_slice(); // column-major
        let d = plan.d;
        match plan.mode {
            SamplingMode::Dense => {
                let mut y = DVector::zeros(plan.m_phi);
                for i in 0..plan.m_phi {
                    let mut acc = 0.0;
                    for j in 0..plan.m_x {
                        acc += dir.signed_dot(i, j, &data[j * d..(j + 1) * d]);
                    }
                    y[i] = acc * dir.scale;
                }
                Ok(y)
            }
            SamplingMode::SubsetSelection { .. } => {
                let omega = plan.omega.as_ref().expect("subset plan has omega");
                let mut y = DVector::zeros(omega.len());
                for (e, &(i, j)) in omega.iter().enumerate() {
                    let (i, j) = (i as usize, j as usize);
                    y[e] = dir.signed_dot(i, j, &data[j * d..(j + 1) * d]) * dir.scale;
                }
                Ok(y)
            }
        }
    }

    /// Phi*(v) = sum_i v_i Phi_i, a d x m_x matrix.
    pub fn adjoint(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        let expect = self.output_len();
        if v.len() != expect {
            return Err(RidgeError::shape(format!(
                "adjoint input must have length {expect}, got {}",
                v.len()
            )));
        }
        let plan = self.plan;
        let dir = &plan.directions;
        let d = plan.d;
        let mut out = DMatrix::zeros(d, plan.m_x);
        let data = out.as_mut_slice();
        match plan.mode {
            SamplingMode::Dense => {
                for j in 0..plan.m_x {
                    let col = &mut data[j * d..(j + 1) * d];
                    for i in 0..plan.m_phi {
                        let c = v[i] * dir.scale;
                        if c != 0.0 {
                            dir.axpy_signed(i, j, c, col);
                        }
                    }
                }
            }
            SamplingMode::SubsetSelection { .. } => {
                let omega = plan.omega.as_ref().expect("subset plan has omega");
                for (e, &(i, j)) in omega.iter().enumerate() {
                    let (i, j) = (i as usize, j as usize);
                    let c = v[e] * dir.scale;
                    if c != 0.0 {
                        dir.axpy_signed(i, j, c, &mut data[j * d..(j + 1) * d]);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Empirical restricted-isometry diagnostic at a given rank.
#[derive(Debug, Clone)]
pub struct RipDiagnostic {
    /// ||Phi(X_r)||^2 / ||X_r||_F^2 for each random rank-r probe.
    pub ratios: Vec<f64>,
    /// Largest observed deviation max |ratio - 1|.
    pub kappa_hat: f64,
}

/// Sample `trials` random rank-`rank` matrices (Gaussian factors) and record
/// the isometry ratios of the operator.
pub fn rip_diagnostic(
    op: &MeasurementOperator<'_>,
    rank: usize,
    trials: usize,
    seed: u64,
) -> Result<RipDiagnostic> {
    if rank == 0 {
        return Err(RidgeError::argument(
            "rip diagnostic needs rank >= 1 (rank-0 matrices are all zero)",
        ));
    }
    if trials == 0 {
        return Err(RidgeError::argument("rip diagnostic needs trials >= 1"));
    }
    let (d, m_x) = op.input_shape();
    if rank > d.min(m_x) {
        return Err(RidgeError::argument(format!(
            "rank {rank} exceeds min(d, m_x) = {}",
            d.min(m_x)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(trials);
    let mut kappa_hat = 0.0f64;
    for _ in 0..trials {
        let u = DMatrix::<f64>::from_fn(d, rank, |_, _| StandardNormal.sample(&mut rng));
        let w = DMatrix::<f64>::from_fn(m_x, rank, |_, _| StandardNormal.sample(&mut rng));
        let x = u * w.transpose();
        let fro2 = x.norm_squared();
        let ratio = op.apply(&x)?.norm_squared() / fro2;
        kappa_hat = kappa_hat.max((ratio - 1.0).abs());
        ratios.push(ratio);
    }
    Ok(RipDiagnostic { ratios, kappa_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinkFunction, NoiseModel, RidgeModel};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::sync::Arc;

    fn plan_for(d: usize, m_x: usize, m_phi: usize, seed: u64) -> SamplingPlan {
        build_plan(d, 1, m_x, m_phi, 1e-3, SamplingMode::Dense, seed).unwrap()
    }

    fn random_mat(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn direction_norms_are_exact() {
        let plan = plan_for(10, 3, 7, 1);
        let expect = (10.0f64 / 7.0).sqrt();
        for i in 0..7 {
            for j in 0..3 {
                let phi = plan.directions().direction(i, j);
                assert_relative_eq!(phi.norm_squared(), 10.0 / 7.0, epsilon = 1e-14);
                assert_abs_diff_eq!(phi.norm(), expect, epsilon = 1e-14);
                for &e in phi.iter() {
                    assert_eq!(e.abs(), plan.directions().scale());
                }
            }
        }
    }

    #[test]
    fn centers_are_unit_and_weakly_correlated() {
        for seed in [2u64, 3, 4] {
            let plan = plan_for(200, 20, 5, seed);
            let mut acc = 0.0;
            let mut count = 0;
            for a in 0..20 {
                let ca = plan.centers().column(a);
                assert_abs_diff_eq!(ca.norm(), 1.0, epsilon = 1e-12);
                for b in (a + 1)..20 {
                    acc += ca.dot(&plan.centers().column(b)).abs();
                    count += 1;
                }
            }
            let mean = acc / count as f64;
            assert!(mean <= 3.0 / (200.0f64).sqrt(), "mean |<xi,xi'>| = {mean}");
        }
    }

    #[test]
    fn plans_are_deterministic_in_seed() {
        let p1 = plan_for(31, 4, 9, 77);
        let p2 = plan_for(31, 4, 9, 77);
        assert_eq!(p1.centers(), p2.centers());
        for i in 0..9 {
            for j in 0..4 {
                assert_eq!(p1.directions().direction(i, j), p2.directions().direction(i, j));
            }
        }
        let p3 = plan_for(31, 4, 9, 78);
        assert_ne!(p1.centers(), p3.centers());
    }

    #[test]
    fn queried_points_stay_in_enlarged_ball() {
        let plan = plan_for(50, 5, 12, 5);
        let bound = 1.0 + plan.enlarged_radius() + 1e-12;
        for i in 0..12 {
            for j in 0..5 {
                assert!(plan.query_point(i, j).norm() <= bound);
            }
        }
    }

    #[test]
    fn rejects_degenerate_arguments() {
        assert!(build_plan(0, 1, 2, 3, 1e-3, SamplingMode::Dense, 0).is_err());
        assert!(build_plan(5, 1, 0, 3, 1e-3, SamplingMode::Dense, 0).is_err());
        assert!(build_plan(5, 1, 2, 0, 1e-3, SamplingMode::Dense, 0).is_err());
        assert!(build_plan(5, 1, 2, 3, 0.0, SamplingMode::Dense, 0).is_err());
        assert!(build_plan(5, 1, 2, 3, 1e-3, SamplingMode::SubsetSelection { fill: 0.0 }, 0).is_err());
    }

    #[test]
    fn apply_is_zero_on_zero() {
        let plan = plan_for(12, 3, 6, 6);
        let y = plan.operator().apply(&DMatrix::zeros(12, 3)).unwrap();
        assert_eq!(y, DVector::zeros(6));
    }

    #[test]
    fn apply_matches_brute_force_on_rank_one() {
        let plan = plan_for(17, 4, 11, 7);
        let u = random_mat(17, 1, 1).column(0).into_owned();
        let w = random_mat(4, 1, 2).column(0).into_owned();
        let x = &u * w.transpose();
        let y = plan.operator().apply(&x).unwrap();
        for i in 0..11 {
            let mut expect = 0.0;
            for j in 0..4 {
                let phi = plan.directions().direction(i, j);
                for l in 0..17 {
                    expect += phi[l] * u[l] * w[j];
                }
            }
            assert_relative_eq!(y[i], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn operator_is_linear() {
        let plan = plan_for(23, 5, 14, 8);
        let op = plan.operator();
        let x1 = random_mat(23, 5, 3);
        let x2 = random_mat(23, 5, 4);
        let lhs = op.apply(&(2.5 * &x1 - 0.75 * &x2)).unwrap();
        let rhs = 2.5 * op.apply(&x1).unwrap() - 0.75 * op.apply(&x2).unwrap();
        assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
    }

    #[test]
    fn adjoint_identity_holds() {
        // <Phi(X), v> == <<X, Phi*(v)>> for random pairs, both modes
        let modes = [
            SamplingMode::Dense,
            SamplingMode::SubsetSelection { fill: 0.7 },
        ];
        for (mi, &mode) in modes.iter().enumerate() {
            let plan = build_plan(19, 1, 6, 13, 1e-3, mode, 9 + mi as u64).unwrap();
            let op = plan.operator();
            for t in 0..50 {
                let x = random_mat(19, 6, 100 + t);
                let v = random_mat(op.output_len(), 1, 200 + t).column(0).into_owned();
                let lhs = op.apply(&x).unwrap().dot(&v);
                let rhs = (x.transpose() * op.adjoint(&v).unwrap()).trace();
                let scale = lhs.abs().max(rhs.abs()).max(1e-30);
                assert!(
                    (lhs - rhs).abs() / scale <= 1e-10,
                    "adjoint identity violated: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn adjoint_of_coordinate_is_direction_matrix() {
        let plan = plan_for(9, 3, 5, 10);
        let mut e1 = DVector::zeros(5);
        e1[0] = 1.0;
        let adj = plan.operator().adjoint(&e1).unwrap();
        for j in 0..3 {
            let phi = plan.directions().direction(0, j);
            assert_relative_eq!(adj.column(j).into_owned(), phi, epsilon = 1e-15);
        }
    }

    #[test]
    fn adjoint_substitution_recovers_energy() {
        let plan = plan_for(15, 4, 20, 11);
        let op = plan.operator();
        let u = random_mat(15, 1, 5).column(0).into_owned();
        let w = random_mat(4, 1, 6).column(0).into_owned();
        let x = &u * w.transpose();
        let v = op.apply(&x).unwrap();
        let lhs = (x.transpose() * op.adjoint(&v).unwrap()).trace();
        assert_relative_eq!(lhs, v.norm_squared(), epsilon = 1e-11);
    }

    #[test]
    fn measurement_is_exact_for_affine_links() {
        // finite differences are exact on affine f, so y = Phi(X) exactly
        let d = 21;
        let k = 2;
        let c = DVector::from_vec(vec![0.8, -0.4]);
        let cg = c.clone();
        let link = LinkFunction::custom(
            k,
            Arc::new(move |y: &DVector<f64>| c.dot(y)),
            Arc::new(move |_: &DVector<f64>| cg.clone()),
            Arc::new(move |_: &DVector<f64>| DMatrix::zeros(2, 2)),
            0,
        )
        .unwrap();
        let model = RidgeModel::random(d, link, None, 30).unwrap();
        let plan = build_plan(d, k, 6, 25, 1e-3, SamplingMode::Dense, 31).unwrap();
        let mut oracle = Oracle::new(&model, NoiseModel::noiseless(0), 1.0 + plan.enlarged_radius());
        let ms = measure(&mut oracle, &plan).unwrap();
        let x = model.exact_x(plan.centers());
        let residual = &ms.y - plan.operator().apply(&x).unwrap();
        assert!(residual.norm() <= 1e-10, "residual {:.3e}", residual.norm());
    }

    #[test]
    fn quadratic_taylor_remainder_matches_closed_form() {
        // for g = ||y - b||^2 the Hessian is constant, so the measurement
        // residual has the exact value (eps/2) sum_j phi^T (hess f) phi
        let d = 24;
        let k = 2;
        let b = DVector::from_vec(vec![0.5, -0.1]);
        let model =
            RidgeModel::random(d, LinkFunction::quadratic_form(b).unwrap(), None, 32).unwrap();
        let plan = build_plan(d, k, 5, 18, 1e-2, SamplingMode::Dense, 33).unwrap();
        let mut oracle = Oracle::new(&model, NoiseModel::noiseless(0), 1.0 + plan.enlarged_radius());
        let ms = measure(&mut oracle, &plan).unwrap();
        let x = model.exact_x(plan.centers());
        let residual = &ms.y - plan.operator().apply(&x).unwrap();
        let zero = DVector::zeros(d);
        for i in 0..18 {
            let mut expect = 0.0;
            for j in 0..5 {
                let phi = plan.directions().direction(i, j);
                expect += 0.5 * plan.epsilon() * model.hessian_quadratic_form(&zero, &phi);
            }
            assert_relative_eq!(residual[i], expect, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn noise_term_obeys_taylor_bound() {
        // Prop-1-style check on one logistic instance; the cross-model sweep
        // lives in the integration suite
        let d = 50;
        let model = RidgeModel::random(d, LinkFunction::logistic(), None, 34).unwrap();
        let plan = build_plan(d, 1, 8, 40, 1e-3, SamplingMode::Dense, 35).unwrap();
        let mut oracle = Oracle::new(&model, NoiseModel::noiseless(0), 1.0 + plan.enlarged_radius());
        let ms = measure(&mut oracle, &plan).unwrap();
        let x = model.exact_x(plan.centers());
        let residual = (&ms.y - plan.operator().apply(&x).unwrap()).norm();
        let bound = model.c2() * plan.epsilon() * 1.0 * (8 * d) as f64
            / (2.0 * (40.0f64).sqrt());
        assert!(residual <= bound, "residual {residual:.3e} > bound {bound:.3e}");
    }

    #[test]
    fn dense_oracle_call_budget() {
        let d = 14;
        let model = RidgeModel::random(d, LinkFunction::logistic(), None, 36).unwrap();
        let plan = plan_for(d, 7, 9, 37);
        let mut oracle = Oracle::new(&model, NoiseModel::noiseless(0), 1.0 + plan.enlarged_radius());
        let ms = measure(&mut oracle, &plan).unwrap();
        assert_eq!(ms.oracle_calls, 7 * (9 + 1));
        assert_eq!(oracle.calls(), 7 * (9 + 1));
    }

    #[test]
    fn subset_measurements_match_entries() {
        let d = 16;
        let model = RidgeModel::random(d, LinkFunction::logistic(), None, 40).unwrap();
        let plan = build_plan(
            d,
            1,
            5,
            8,
            1e-3,
            SamplingMode::SubsetSelection { fill: 0.5 },
            41,
        )
        .unwrap();
        let omega = plan.omega().unwrap().to_vec();
        assert_eq!(omega.len(), 20); // round(0.5 * 40)
        // all pairs distinct
        let mut sorted = omega.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), omega.len());

        let mut oracle = Oracle::new(&model, NoiseModel::noiseless(0), 1.0 + plan.enlarged_radius());
        let ms = measure(&mut oracle, &plan).unwrap();
        // one base per distinct center plus one probe per pair
        let distinct_centers: std::collections::HashSet<u32> =
            omega.iter().map(|&(_, j)| j).collect();
        assert_eq!(
            ms.oracle_calls as usize,
            omega.len() + distinct_centers.len()
        );
        // each measurement is a single finite difference
        for (e, &(i, j)) in omega.iter().enumerate() {
            let base = model.value(&plan.centers().column(j as usize).into_owned());
            let probe = model.value(&plan.query_point(i as usize, j as usize));
            assert_relative_eq!(ms.y[e], (probe - base) / plan.epsilon(), epsilon = 1e-12);
        }
    }

    #[test]
    fn measurements_are_deterministic() {
        let d = 12;
        let model = RidgeModel::random(d, LinkFunction::logistic(), None, 42).unwrap();
        let plan = plan_for(d, 4, 6, 43);
        let noise = NoiseModel::new(0.05, 0.0, 0.0, 17).unwrap();
        let run = || {
            let mut oracle = Oracle::new(&model, noise.clone(), 1.0 + plan.enlarged_radius());
            measure(&mut oracle, &plan).unwrap().y
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn materialized_directions_agree_with_packed() {
        let packed = plan_for(37, 3, 5, 55);
        let mat = SamplingPlan::build_materialized(37, 1, 3, 5, 1e-3, SamplingMode::Dense, 55)
            .unwrap();
        let x = random_mat(37, 3, 7);
        let yp = packed.operator().apply(&x).unwrap();
        let ym = mat.operator().apply(&x).unwrap();
        assert_eq!(yp, ym, "storage forms must agree bitwise");
        let v = random_mat(5, 1, 8).column(0).into_owned();
        assert_eq!(
            packed.operator().adjoint(&v).unwrap(),
            mat.operator().adjoint(&v).unwrap()
        );
    }

    #[test]
    fn rip_diagnostic_concentrates() {
        let plan = plan_for(40, 10, 10 * (40 + 10), 60);
        let op = plan.operator();
        let diag = rip_diagnostic(&op, 1, 200, 61).unwrap();
        assert!(diag.kappa_hat < 0.5, "kappa_hat = {}", diag.kappa_hat);
        let mean: f64 = diag.ratios.iter().sum::<f64>() / diag.ratios.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean ratio {mean}");
    }

    #[test]
    fn rip_mean_ratio_over_fresh_operators() {
        // fixed X, fresh operators: the ensemble is unbiased
        let x = random_mat(30, 6, 70);
        let fro2 = x.norm_squared();
        let mut acc = 0.0;
        let n = 30;
        for s in 0..n {
            let plan = plan_for(30, 6, 150, 700 + s);
            acc += plan.operator().apply(&x).unwrap().norm_squared() / fro2;
        }
        let mean = acc / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean ratio {mean}");
    }

    #[test]
    fn plan_files_round_trip() {
        let plan = build_plan(
            13,
            2,
            4,
            9,
            2e-3,
            SamplingMode::SubsetSelection { fill: 0.6 },
            123,
        )
        .unwrap();
        let mut buf = Vec::new();
        plan.save(&mut buf).unwrap();
        let back = SamplingPlan::load(&buf[..]).unwrap();
        assert_eq!(plan.centers(), back.centers());
        assert_eq!(plan.omega(), back.omega());
        assert_eq!(plan.epsilon(), back.epsilon());
        for i in 0..9 {
            for j in 0..4 {
                assert_eq!(
                    plan.directions().direction(i, j),
                    back.directions().direction(i, j)
                );
            }
        }
    }

    #[test]
    fn measurement_csv_lists_index_value_pairs() {
        let ms = MeasurementSet {
            y: DVector::from_vec(vec![0.5, -1.25]),
            oracle_calls: 4,
        };
        let mut buf = Vec::new();
        write_measurements_csv(&mut buf, &ms).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,y\n0,0.5\n1,-1.25\n");
    }

    #[test]
    fn rip_rejects_rank_zero() {
        let plan = plan_for(10, 3, 20, 80);
        let op = plan.operator();
        assert!(rip_diagnostic(&op, 0, 10, 0).is_err());
        assert!(rip_diagnostic(&op, 1, 0, 0).is_err());
    }
}
