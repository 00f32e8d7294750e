use ridgelift::linalg::thin_svd;
use ridgelift::model::{LinkFunction, NoiseModel, Oracle, RidgeModel};
use ridgelift::recovery::{recover, RecoveryConfig, SolverKind};
use ridgelift::sampling::{build_plan, measure, SamplingMode};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn main() {
    let trial_seed = 20268u64 ^ 3;
    let model = RidgeModel::random(200, LinkFunction::logistic(), None, splitmix64(trial_seed ^ 0x1111)).unwrap();
    let plan = build_plan(200, 1, 20, 2200, 1e-3, SamplingMode::Dense, splitmix64(trial_seed ^ 0x4444)).unwrap();
    let mut oracle = Oracle::new(&model, NoiseModel::noiseless(splitmix64(trial_seed ^ 0x5555)), 1.0 + plan.enlarged_radius());
    let ms = measure(&mut oracle, &plan).unwrap();
    let op = plan.operator();
    let config = RecoveryConfig {
        lambda: f64::INFINITY,
        target_rank: 1,
        solver: SolverKind::RankProjected { step: None, max_iter: 400, tol: 1e-6 },
        seed: splitmix64(trial_seed ^ 0x7777),
    };
    let est = recover(&ms.y, &op, &config).unwrap();
    let x_true = model.exact_x(plan.centers());
    println!("||x_hat - X|| / ||X|| = {:.3e}", (&est.x_hat - &x_true).norm() / x_true.norm());
    println!("||X|| = {:.6}, ||x_hat|| = {:.6}", x_true.norm(), est.x_hat.norm());

    let svd = thin_svd(&est.x_hat);
    let recon_err = (&svd.reconstruct() - &est.x_hat).norm();
    println!("thin_svd reconstruction error on x_hat: {:.3e}", recon_err);
    println!("sigma[0] = {:.6} (should be ~||X|| = {:.6})", svd.sigma[0], x_true.norm());

    // raw nalgebra svd on the same matrix
    let raw = est.x_hat.clone().svd(true, true);
    let mut s: Vec<f64> = raw.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    println!("raw nalgebra top sigma: {:.6}", s[0]);
    let recon = raw.recompose().unwrap();
    println!("raw nalgebra reconstruction error: {:.3e}", (recon - &est.x_hat).norm());
}
