//! Function reconstruction from a recovered subspace: sample
//! g-hat(y) = f(A-hat^T y) on the grid h Z^k intersected with (-w, w)^k and
//! interpolate multilinearly. For C^2 links the interpolant carries the
//! O(h^2) sup-norm error that the recovery analysis budgets for.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, RidgeError};
use crate::model::{sample_ball, Oracle, RidgeModel};
use crate::textmat;

/// Default cap on grid nodes; k <= 5 experiments fit easily and a blowup in
/// k surfaces as an error instead of an allocation stall.
pub const DEFAULT_NODE_CAP: usize = 10_000_000;

/// Snap tolerance for grid-aligned evaluation points.
const NODE_SNAP: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct FunctionEstimate {
    a_hat: DMatrix<f64>,
    h: f64,
    /// Grid half-width: 1 + eps_bar, plus the offset norm bound when the
    /// model carries a shift b.
    w: f64,
    /// Evaluation stays on the ball of this radius (1 + eps_bar).
    eval_radius: f64,
    offset_norm_bound: f64,
    /// T = ceil(w / h); nodes sit at t*h for t in -T..=T on each axis.
    half_nodes: usize,
    values: Vec<f64>,
    oracle_calls: u64,
}

/// Largest norm of any grid node: sqrt(k) * ceil(w/h) * h. Oracles backing
/// `build_estimate` must accept points out to this radius.
pub fn grid_reach(k: usize, h: f64, w: f64) -> f64 {
    (k as f64).sqrt() * (w / h).ceil() * h
}

/// Number of grid nodes (2 ceil(w/h) + 1)^k, or None on overflow.
pub fn grid_node_count(k: usize, h: f64, w: f64) -> Option<usize> {
    let per_axis = 2 * (w / h).ceil() as u128 + 1;
    let mut total: u128 = 1;
    for _ in 0..k {
        total = total.checked_mul(per_axis)?;
        if total > usize::MAX as u128 {
            return None;
        }
    }
    Some(total as usize)
}

/// Query the oracle at A-hat^T y over every grid node y and store the
/// samples. The oracle must cover the grid: node norms reach sqrt(k) * w.
pub fn build_estimate(
    oracle: &mut Oracle<'_>,
    a_hat: &DMatrix<f64>,
    h: f64,
    eps_bar: f64,
    offset_norm_bound: f64,
    node_cap: usize,
) -> Result<FunctionEstimate> {
    if !(h > 0.0) {
        return Err(RidgeError::argument("grid step h must be positive"));
    }
    if !(eps_bar >= 0.0) || !(offset_norm_bound >= 0.0) {
        return Err(RidgeError::argument(
            "eps_bar and offset_norm_bound must be >= 0",
        ));
    }
    let k = a_hat.nrows();
    let d = a_hat.ncols();
    if oracle.model().d() != d {
        return Err(RidgeError::shape(format!(
            "oracle dimension {} does not match A-hat columns {d}",
            oracle.model().d()
        )));
    }
    let w = 1.0 + eps_bar + offset_norm_bound;
    let total = grid_node_count(k, h, w).unwrap_or(usize::MAX);
    if total > node_cap {
        return Err(RidgeError::Budget {
            requested: total,
            cap: node_cap,
        });
    }
    let half_nodes = (w / h).ceil() as usize;
    let per_axis = 2 * half_nodes + 1;

    let calls_before = oracle.calls();
    let mut values = Vec::with_capacity(total);
    let mut idx = vec![0usize; k];
    let mut y = DVector::<f64>::zeros(k);
    let at = a_hat.transpose();
    loop {
        for a in 0..k {
            y[a] = (idx[a] as f64 - half_nodes as f64) * h;
        }
        let x = &at * &y;
        values.push(oracle.eval(&x)?);
        // odometer over the k axes, axis 0 fastest
        let mut axis = 0;
        loop {
            if axis == k {
                return Ok(FunctionEstimate {
                    a_hat: a_hat.clone(),
                    h,
                    w,
                    eval_radius: 1.0 + eps_bar,
                    offset_norm_bound,
                    half_nodes,
                    values,
                    oracle_calls: oracle.calls() - calls_before,
                });
            }
            idx[axis] += 1;
            if idx[axis] < per_axis {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

impl FunctionEstimate {
    pub fn k(&self) -> usize {
        self.a_hat.nrows()
    }

    pub fn d(&self) -> usize {
        self.a_hat.ncols()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> f64 {
        self.w
    }

    pub fn a_hat(&self) -> &DMatrix<f64> {
        &self.a_hat
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    pub fn oracle_calls(&self) -> u64 {
        self.oracle_calls
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        let per_axis = 2 * self.half_nodes + 1;
        let mut flat = 0;
        for a in (0..idx.len()).rev() {
            flat = flat * per_axis + idx[a];
        }
        flat
    }

    /// Multilinear interpolation of the stored samples at y = A-hat x.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.d() {
            return Err(RidgeError::shape(format!(
                "point has dimension {}, estimate expects {}",
                x.len(),
                self.d()
            )));
        }
        let norm = x.norm();
        if norm > self.eval_radius + 1e-9 {
            return Err(RidgeError::Domain {
                norm,
                radius: self.eval_radius,
            });
        }
        let k = self.k();
        let y = &self.a_hat * x;
        let t = self.half_nodes as f64;
        let max_cell = 2 * self.half_nodes - 1;
        let mut base = vec![0usize; k];
        let mut frac = vec![0.0f64; k];
        for a in 0..k {
            let c = (y[a] / self.h + t).clamp(0.0, 2.0 * t);
            let i0 = (c.floor() as usize).min(max_cell);
            let mut f = c - i0 as f64;
            if f < NODE_SNAP {
                f = 0.0;
            } else if f > 1.0 - NODE_SNAP {
                f = 1.0;
            }
            base[a] = i0;
            frac[a] = f;
        }
        let mut acc = 0.0;
        let mut corner = vec![0usize; k];
        for mask in 0..(1usize << k) {
            let mut weight = 1.0;
            for a in 0..k {
                if (mask >> a) & 1 == 1 {
                    weight *= frac[a];
                    corner[a] = base[a] + 1;
                } else {
                    weight *= 1.0 - frac[a];
                    corner[a] = base[a];
                }
            }
            if weight != 0.0 {
                acc += weight * self.values[self.flat_index(&corner)];
            }
        }
        Ok(acc)
    }

    pub fn save<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "ridgelift-estimate v1")?;
        writeln!(out, "k = {}", self.k())?;
        writeln!(out, "h = {}", self.h)?;
        writeln!(out, "w = {}", self.w)?;
        writeln!(out, "eval_radius = {}", self.eval_radius)?;
        writeln!(out, "offset_norm_bound = {}", self.offset_norm_bound)?;
        writeln!(out, "a_hat:")?;
        textmat::write_matrix(out, &self.a_hat)?;
        writeln!(out, "samples:")?;
        let samples = DMatrix::from_column_slice(self.values.len(), 1, &self.values);
        textmat::write_matrix(out, &samples)?;
        Ok(())
    }

    pub fn load<R: BufRead>(input: R) -> Result<FunctionEstimate> {
        let mut lines = input.lines();
        let mut header = std::collections::HashMap::new();
        let magic = lines
            .next()
            .ok_or_else(|| RidgeError::parse("empty estimate file"))??;
        if magic.trim() != "ridgelift-estimate v1" {
            return Err(RidgeError::parse("not a ridgelift estimate file"));
        }
        let mut a_hat = None;
        let mut samples = None;
        while let Some(line) = lines.next() {
            let line = line?;
            let trimmed = line.trim().to_string();
            if trimmed.is_empty() {
                continue;
            }
            if trimmed == "a_hat:" {
                a_hat = Some(textmat::read_matrix_lines(&mut lines)?);
            } else if trimmed == "samples:" {
                samples = Some(textmat::read_matrix_lines(&mut lines)?);
            } else if let Some((key, value)) = trimmed.split_once('=') {
                header.insert(key.trim().to_string(), value.trim().to_string());
            } else {
                return Err(RidgeError::parse(format!("unexpected line {trimmed:?}")));
            }
        }
        let get = |key: &str| -> Result<f64> {
            header
                .get(key)
                .ok_or_else(|| RidgeError::parse(format!("missing header field {key}")))?
                .parse()
                .map_err(|e| RidgeError::parse(format!("bad {key}: {e}")))
        };
        let a_hat = a_hat.ok_or_else(|| RidgeError::parse("missing a_hat block"))?;
        let samples = samples.ok_or_else(|| RidgeError::parse("missing samples block"))?;
        let h = get("h")?;
        let w = get("w")?;
        let eval_radius = get("eval_radius")?;
        let offset_norm_bound = get("offset_norm_bound")?;
        let k = get("k")? as usize;
        if a_hat.nrows() != k {
            return Err(RidgeError::parse("a_hat rows disagree with header k"));
        }
        let half_nodes = (w / h).ceil() as usize;
        let expect =
            grid_node_count(k, h, w).ok_or_else(|| RidgeError::parse("grid size overflow"))?;
        if samples.nrows() != expect || samples.ncols() != 1 {
            return Err(RidgeError::parse(format!(
                "sample block must be {expect} x 1, got {} x {}",
                samples.nrows(),
                samples.ncols()
            )));
        }
        Ok(FunctionEstimate {
            a_hat,
            h,
            w,
            eval_radius,
            offset_norm_bound,
            half_nodes,
            values: samples.column(0).iter().copied().collect(),
            oracle_calls: 0,
        })
    }
}

#[derive(Debug, Clone)]
pub struct UniformErrorReport {
    /// max |f(x) - f-hat(x)| over the probes; a lower bound on the true
    /// sup-norm error.
    pub sup_error: f64,
    /// The probe attaining the maximum.
    pub argmax: DVector<f64>,
}

/// Probe `n_probes` points uniform in the unit ball and report the largest
/// deviation between the model and the estimate.
pub fn uniform_error(
    estimate: &FunctionEstimate,
    model: &RidgeModel,
    n_probes: usize,
    seed: u64,
) -> Result<UniformErrorReport> {
    if n_probes == 0 {
        return Err(RidgeError::argument("need at least one probe"));
    }
    if model.d() != estimate.d() {
        return Err(RidgeError::shape(format!(
            "model dimension {} does not match estimate {}",
            model.d(),
            estimate.d()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = -1.0;
    let mut argmax = DVector::zeros(model.d());
    for _ in 0..n_probes {
        let x = sample_ball(model.d(), 1.0, &mut rng);
        let err = (model.value(&x) - estimate.evaluate(&x)?).abs();
        if err > worst {
            worst = err;
            argmax = x;
        }
    }
    Ok(UniformErrorReport {
        sup_error: worst,
        argmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_row_orthonormal, LinkFunction, NoiseModel, RidgeModel};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn grid_oracle_radius(k: usize, h: f64, w: f64) -> f64 {
        grid_reach(k, h, w) + 1e-9
    }

    fn linear_model(d: usize, seed: u64) -> RidgeModel {
        let c = 0.7;
        let link = LinkFunction::custom(
            1,
            Arc::new(move |y: &DVector<f64>| c * y[0]),
            Arc::new(move |_: &DVector<f64>| DVector::from_element(1, c)),
            Arc::new(move |_: &DVector<f64>| DMatrix::zeros(1, 1)),
            0,
        )
        .unwrap();
        RidgeModel::random(d, link, None, seed).unwrap()
    }

    fn build_exact(
        model: &RidgeModel,
        h: f64,
        eps_bar: f64,
        offset_bound: f64,
    ) -> FunctionEstimate {
        let w = 1.0 + eps_bar + offset_bound;
        let radius = grid_oracle_radius(model.k(), h, w);
        let mut oracle = Oracle::new(model, NoiseModel::noiseless(0), radius);
        build_estimate(
            &mut oracle,
            &model.a().clone(),
            h,
            eps_bar,
            offset_bound,
            DEFAULT_NODE_CAP,
        )
        .unwrap()
    }

    #[test]
    fn linear_link_is_reproduced_exactly() {
        let model = linear_model(9, 1);
        let est = build_exact(&model, 0.2, 0.01, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let x = sample_ball(9, 1.0, &mut rng);
            let err = (model.value(&x) - est.evaluate(&x).unwrap()).abs();
            assert!(err <= 1e-12, "affine reproduction error {err:.3e}");
        }
        // and the probe-based sup error agrees
        let report = uniform_error(&est, &model, 200, 3).unwrap();
        assert!(report.sup_error <= 1e-12);
    }

    #[test]
    fn quadratic_halving_gives_factor_four() {
        // g = y^2 via the quadratic form with b = 0, k = 1
        let model = RidgeModel::random(
            11,
            LinkFunction::quadratic_form(DVector::zeros(1)).unwrap(),
            None,
            4,
        )
        .unwrap();
        let eps_bar = 0.02;
        let sup_for = |h: f64| -> f64 {
            let est = build_exact(&model, h, eps_bar, 0.0);
            // probe along the ridge direction on a 10x finer grid
            let a_t = model.a().transpose();
            let mut worst = 0.0f64;
            let fine = h / 10.0;
            let mut y = -1.0;
            while y <= 1.0 {
                let x = &a_t * DVector::from_element(1, y);
                let err = (model.value(&x) - est.evaluate(&x).unwrap()).abs();
                worst = worst.max(err);
                y += fine;
            }
            worst
        };
        let e1 = sup_for(0.1);
        let e2 = sup_for(0.05);
        let ratio = e1 / e2;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "h-halving ratio {ratio:.3} outside [3.5, 4.5]"
        );
    }

    #[test]
    fn halving_ratio_holds_for_builtin_links() {
        // quadratic convergence across links, k <= 2
        let cases: Vec<RidgeModel> = vec![
            RidgeModel::random(10, LinkFunction::logistic(), None, 5).unwrap(),
            RidgeModel::random(
                10,
                LinkFunction::sum_of_gaussians(vec![0.35, 0.5], vec![0.1, -0.2]).unwrap(),
                None,
                6,
            )
            .unwrap(),
        ];
        for model in &cases {
            let k = model.k();
            let sup_for = |h: f64| -> f64 {
                let est = build_exact(model, h, 0.01, 0.0);
                let mut rng = ChaCha8Rng::seed_from_u64(7);
                let a_t = model.a().transpose();
                let mut worst = 0.0f64;
                for _ in 0..4000 {
                    let y = sample_ball(k, 1.0, &mut rng);
                    let x = &a_t * &y;
                    worst = worst.max((model.value(&x) - est.evaluate(&x).unwrap()).abs());
                }
                worst
            };
            let ratio = sup_for(0.08) / sup_for(0.04);
            assert!(
                (3.4..=4.6).contains(&ratio),
                "k = {k}: ratio {ratio:.3} outside 4 +- 15%"
            );
        }
    }

    #[test]
    fn grid_count_matches_closed_form() {
        let model = RidgeModel::random(
            8,
            LinkFunction::sum_of_gaussians(vec![0.4, 0.4], vec![0.0, 0.1]).unwrap(),
            None,
            8,
        )
        .unwrap();
        let eps_bar = 0.013;
        let h = 0.05;
        let est = build_exact(&model, h, eps_bar, 0.0);
        let per_axis = 2.0 * ((1.0 + eps_bar) / h).ceil() + 1.0;
        assert_eq!(est.node_count(), (per_axis * per_axis) as usize);
        assert_eq!(est.oracle_calls(), est.node_count() as u64);
    }

    #[test]
    fn node_points_reproduce_stored_samples() {
        let model = RidgeModel::random(7, LinkFunction::logistic(), None, 9).unwrap();
        let est = build_exact(&model, 0.25, 0.0, 0.0);
        let a_t = model.a().transpose();
        for t in -4i64..=4 {
            let y = DVector::from_element(1, t as f64 * 0.25);
            if y.norm() > 1.0 {
                continue;
            }
            let x = &a_t * &y;
            let direct = model.value(&x);
            assert_abs_diff_eq!(est.evaluate(&x).unwrap(), direct, epsilon = 1e-13);
        }
    }

    #[test]
    fn zero_function_stays_zero() {
        let link = LinkFunction::custom(
            1,
            Arc::new(|_: &DVector<f64>| 0.0),
            Arc::new(|_: &DVector<f64>| DVector::zeros(1)),
            Arc::new(|_: &DVector<f64>| DMatrix::zeros(1, 1)),
            0,
        )
        .unwrap();
        let model = RidgeModel::random(6, link, None, 10).unwrap();
        let est = build_exact(&model, 0.3, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = sample_ball(6, 1.0, &mut rng);
            assert_eq!(est.evaluate(&x).unwrap(), 0.0);
        }
    }

    #[test]
    fn fine_grid_with_exact_subspace_is_accurate() {
        let model = RidgeModel::random(30, LinkFunction::logistic(), None, 12).unwrap();
        let est = build_exact(&model, 1e-3, 0.005, 0.0);
        let report = uniform_error(&est, &model, 100, 13).unwrap();
        assert!(report.sup_error <= 1e-4, "sup error {:.3e}", report.sup_error);
        assert!(report.argmax.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn misaligned_subspace_error_obeys_projection_bound() {
        // k = 1 logistic with alignment 0.99: |f - f-hat| <=
        // C2 sqrt(k) sqrt(k - ||A A-hat^T||_F^2) (1 + eps_bar) + C h^2
        let d = 25;
        let model = RidgeModel::random(d, LinkFunction::logistic(), None, 14).unwrap();
        let a = model.a();
        // rotate a towards a unit vector orthogonal to it
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let z = sample_ball(d, 1.0, &mut rng);
        let mut perp = &z - a.transpose() * (a * &z);
        perp /= perp.norm();
        let alignment_target: f64 = 0.99;
        let (c, s) = (alignment_target.sqrt(), (1.0 - alignment_target).sqrt());
        let a_hat = DMatrix::from_rows(&[(c * a.row(0).transpose() + s * &perp).transpose()]);

        let eps_bar = 0.01;
        let h = 0.02;
        let w = 1.0 + eps_bar;
        let mut oracle = Oracle::new(&model, NoiseModel::noiseless(0), grid_oracle_radius(1, h, w));
        let est = build_estimate(&mut oracle, &a_hat, h, eps_bar, 0.0, DEFAULT_NODE_CAP).unwrap();

        let cross = (a * a_hat.transpose()).norm_squared();
        let projection_term = model.c2() * (1.0 - cross).max(0.0).sqrt() * (1.0 + eps_bar);
        let interp_term = 0.05 * h * h; // logistic |g''| <= 0.1 over the cell
        let bound = projection_term + interp_term;
        let report = uniform_error(&est, &model, 300, 16).unwrap();
        assert!(
            report.sup_error <= bound,
            "error {:.4e} above bound {bound:.4e}",
            report.sup_error
        );
    }

    #[test]
    fn grid_cost_is_dimension_free() {
        let h = 0.05;
        let counts: Vec<u64> = [50usize, 500]
            .iter()
            .map(|&d| {
                let model = RidgeModel::random(d, LinkFunction::logistic(), None, 17).unwrap();
                let est = build_exact(&model, h, 0.01, 0.0);
                est.oracle_calls()
            })
            .collect();
        assert_eq!(counts[0], counts[1]);
    }

    #[test]
    fn offset_models_match_centered_quality() {
        // same alignment (exact), same h: a shifted quadratic on the wider
        // grid meets the same h^2 budget as the centered one
        let k = 2;
        let d = 12;
        let h = 0.05;
        let bound = 1.2 * 2.0 * k as f64 * h * h / 8.0; // (1/8) h^2 sum_a sup |d^2 g|
        let b = {
            let mut v = DVector::zeros(k);
            v[0] = 1.0;
            v
        };
        for offset in [None, Some(b)] {
            let bound_norm = offset.as_ref().map(|b| b.norm()).unwrap_or(0.0);
            let a = random_row_orthonormal(d, k, 18).unwrap();
            let link = LinkFunction::quadratic_form(DVector::zeros(k)).unwrap();
            let model = RidgeModel::new(a, link, offset).unwrap();
            let est = build_exact(&model, h, 0.01, bound_norm);
            let report = uniform_error(&est, &model, 400, 19).unwrap();
            assert!(
                report.sup_error <= bound,
                "offset {bound_norm}: error {:.4e} above {bound:.4e}",
                report.sup_error
            );
        }
    }

    #[test]
    fn node_cap_is_enforced() {
        let model = RidgeModel::random(
            10,
            LinkFunction::sum_of_gaussians(vec![0.4, 0.4, 0.4], vec![0.0, 0.0, 0.0]).unwrap(),
            None,
            20,
        )
        .unwrap();
        let mut oracle = Oracle::new(&model, NoiseModel::noiseless(0), 10.0);
        let err = build_estimate(&mut oracle, &model.a().clone(), 0.01, 0.0, 0.0, 1000);
        assert!(matches!(err, Err(RidgeError::Budget { .. })));
    }

    #[test]
    fn evaluation_outside_ball_is_rejected() {
        let model = RidgeModel::random(6, LinkFunction::logistic(), None, 21).unwrap();
        let est = build_exact(&model, 0.2, 0.0, 0.0);
        let x = DVector::from_element(6, 1.0);
        assert!(matches!(est.evaluate(&x), Err(RidgeError::Domain { .. })));
    }

    #[test]
    fn save_load_round_trip() {
        let model = RidgeModel::random(8, LinkFunction::logistic(), None, 22).unwrap();
        let est = build_exact(&model, 0.1, 0.01, 0.0);
        let mut buf = Vec::new();
        est.save(&mut buf).unwrap();
        let back = FunctionEstimate::load(&buf[..]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let x = sample_ball(8, 1.0, &mut rng);
            assert_eq!(est.evaluate(&x).unwrap(), back.evaluate(&x).unwrap());
        }
    }
}
