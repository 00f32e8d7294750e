//! Command-line harness for the ridge-function learning pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ridgelift::analysis::{
    compute_bounds, plan_experiment, sample_complexity_minimums, BoundsInputs, FunctionClass,
    PlanTarget,
};
use ridgelift::error::RidgeError;
use ridgelift::harness::{
    config::KvConfig, resolve_base_seed, rip_report, run_experiment, simulate, ExperimentConfig,
    SimulateConfig, SEED_ENV_VAR,
};

#[derive(Parser)]
#[command(
    name = "ridgelift",
    about = "Learn multi-ridge functions f(x) = g(Ax) from point queries",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the base seed (takes precedence over RIDGELIFT_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV and plot files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for trial-level parallelism (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Minimal sample sizes and the largest admissible step for a target.
    Plan(Common),
    /// One full learning run; prints alignment and uniform error.
    Simulate(Common),
    /// Sweep experiment with minimal-m_phi searches, CSV outputs.
    Sweep(Common),
    /// Closed-form bounds report.
    Bounds(Common),
    /// Empirical restricted-isometry diagnostic.
    Rip(Common),
}

fn load_config(common: &Common) -> Result<KvConfig, RidgeError> {
    match &common.config {
        Some(path) => KvConfig::from_file(path),
        None => Ok(KvConfig::default()),
    }
}

fn base_seed(cfg: &KvConfig, common: &Common) -> Result<u64, RidgeError> {
    let env = std::env::var(SEED_ENV_VAR).ok();
    resolve_base_seed(cfg.get_u64("seed", 0)?, env.as_deref(), common.seed)
}

fn bounds_inputs(cfg: &KvConfig) -> Result<BoundsInputs, RidgeError> {
    let mut inputs = BoundsInputs::new(
        cfg.require_usize("d")?,
        cfg.get_usize("k", 1)?,
        cfg.get_usize("m_x", 20)?,
        cfg.get_usize("m_phi", 100)?,
        cfg.get_f64("epsilon", 1e-3)?,
        cfg.get_f64("c2", 1.0)?,
        cfg.require_f64("alpha")?,
    );
    inputs.rho = cfg.get_f64("rho", inputs.rho)?;
    inputs.kappa = cfg.get_f64("kappa", inputs.kappa)?;
    inputs.c0 = cfg.get_f64("c0", inputs.c0)?;
    inputs.eta = cfg.get_f64("eta", inputs.eta)?;
    inputs.delta = cfg.get_f64("delta", inputs.delta)?;
    inputs.p1 = cfg.get_f64("p1", inputs.p1)?;
    inputs.p2 = cfg.get_f64("p2", inputs.p2)?;
    inputs.sigma = cfg.get_f64("sigma", inputs.sigma)?;
    inputs.gamma = cfg.get_f64("gamma", inputs.gamma)?;
    Ok(inputs)
}

fn parse_class(raw: &str) -> Result<FunctionClass, RidgeError> {
    if raw == "h1" {
        Ok(FunctionClass::H1)
    } else if let Some(m) = raw.strip_prefix("h2:") {
        Ok(FunctionClass::H2 {
            m: m.parse()
                .map_err(|e| RidgeError::parse(format!("class: {e}")))?,
        })
    } else if let Some(m) = raw.strip_prefix("radial:") {
        Ok(FunctionClass::RadialArbitrary {
            m: m.parse()
                .map_err(|e| RidgeError::parse(format!("class: {e}")))?,
        })
    } else if raw == "prop2" {
        Ok(FunctionClass::Prop2)
    } else {
        Err(RidgeError::parse(format!(
            "class must be h1, h2:<M>, radial:<M> or prop2, got {raw:?}"
        )))
    }
}

fn cmd_plan(common: &Common) -> Result<(), RidgeError> {
    let cfg = load_config(common)?;
    let inputs = bounds_inputs(&cfg)?;
    let class = parse_class(cfg.get("class").unwrap_or("h1"))?;
    let target = match cfg.get("target") {
        Some(raw) => {
            if let Some(eta) = raw.strip_prefix("eta:") {
                PlanTarget::AlignmentFloor {
                    eta: eta
                        .parse()
                        .map_err(|e| RidgeError::parse(format!("target: {e}")))?,
                }
            } else if let Some(delta) = raw.strip_prefix("delta:") {
                PlanTarget::UniformError {
                    delta: delta
                        .parse()
                        .map_err(|e| RidgeError::parse(format!("target: {e}")))?,
                }
            } else {
                return Err(RidgeError::parse(format!(
                    "target must be eta:<v> or delta:<v>, got {raw:?}"
                )));
            }
        }
        None => PlanTarget::AlignmentFloor { eta: inputs.eta },
    };
    match plan_experiment(target, class, &inputs) {
        Ok(plan) => {
            println!("m_x                  {}", plan.m_x);
            println!("m_phi                {}", plan.m_phi);
            println!("epsilon              {:.15e}", plan.epsilon);
            println!("oracle_budget        {}", plan.budget);
            println!("budget_class         {}", plan.budget_class);
        }
        Err(RidgeError::Infeasible {
            m_x,
            d,
            m_phi_min,
            product,
        }) => {
            let (m_x_min, m_phi) = sample_complexity_minimums(&inputs)?;
            println!("plan infeasible at d = {d}:");
            println!("m_x_min              {m_x_min}");
            println!("m_phi_min            {m_phi}");
            println!(
                "requires m_phi < m_x * d = {product}, but m_phi_min = {m_phi_min} (m_x = {m_x})"
            );
            println!("budget_class         {}", class.budget_class());
        }
        Err(e) => return Err(e),
    }
    Ok(())
}

fn cmd_bounds(common: &Common) -> Result<(), RidgeError> {
    let cfg = load_config(common)?;
    let report = compute_bounds(&bounds_inputs(&cfg)?)?;
    print!("{}", report.to_text());
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("bounds.csv"), report.to_csv())?;
    }
    Ok(())
}

fn cmd_simulate(common: &Common) -> Result<(), RidgeError> {
    let cfg = load_config(common)?;
    let mut sim = SimulateConfig::from_kv(&cfg)?;
    sim.seed = base_seed(&cfg, common)?;
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        sim.trace_out = Some(dir.join("trace.csv"));
    }
    let report = simulate(&sim)?;
    println!("alignment            {:.6}", report.alignment);
    if let Some(err) = report.uniform_error {
        println!("uniform_error        {err:.6e}");
    }
    println!("measurement_calls    {}", report.measurement_calls);
    println!("grid_calls           {}", report.grid_calls);
    println!("solver_iterations    {}", report.solver_iterations);
    println!("residual_spectral    {:.6e}", report.residual_spectral);
    println!("dantzig_feasible     {}", report.dantzig_feasible);
    println!("wall_time_s          {:.3}", report.wall_time);
    Ok(())
}

fn cmd_sweep(common: &Common) -> Result<(), RidgeError> {
    let cfg = load_config(common)?;
    let mut experiment = ExperimentConfig::from_kv(&cfg)?;
    experiment.base_seed = base_seed(&cfg, common)?;
    if let Some(dir) = &common.out {
        experiment.out_dir = Some(dir.clone());
    }
    let output = run_experiment(&experiment)?;
    println!("sweep_value,m_phi_star,mean_alignment");
    for point in &output.points {
        println!(
            "{},{},{:.6}",
            point.sweep_value, point.outcome.m_phi_star, point.outcome.mean_alignment
        );
    }
    Ok(())
}

fn cmd_rip(common: &Common) -> Result<(), RidgeError> {
    let cfg = load_config(common)?;
    let report = rip_report(
        cfg.get_usize("d", 40)?,
        cfg.get_usize("k", 1)?,
        cfg.get_usize("m_x", 10)?,
        cfg.get_usize("m_phi", 500)?,
        cfg.get_usize("rank", 1)?,
        cfg.get_usize("trials", 200)?,
        base_seed(&cfg, common)?,
    )?;
    print!("{report}");
    Ok(())
}

fn install_pool(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&Common, fn(&Common) -> Result<(), RidgeError>) = match &cli.command {
        Command::Plan(c) => (c, cmd_plan),
        Command::Simulate(c) => (c, cmd_simulate),
        Command::Sweep(c) => (c, cmd_sweep),
        Command::Bounds(c) => (c, cmd_bounds),
        Command::Rip(c) => (c, cmd_rip),
    };
    install_pool(common.threads);
    match run(common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                RidgeError::Parse(_) | RidgeError::Argument(_) | RidgeError::Io(_) => {
                    ExitCode::from(2)
                }
                RidgeError::SearchExhausted { .. } => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}
