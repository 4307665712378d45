//! `hjbk`: synthesize, simulate and verify kernel-collocation value
//! functions and feedback laws for the built-in benchmark systems.

mod config;
mod output;
mod pipeline;
mod reproduce;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use hjbk_core::{Error, Result, SolverSettings};
use nalgebra::DVector;
use output::{batch_summary, resolve_out_dir, trajectories_csv, write_atomic, write_json};
use pipeline::{run_synthesis, ValueFunctionFile};
use reproduce::{GateResult, ReproduceSummary};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "hjbk", version, about = "Kernel-collocation HJB synthesis and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Suppress informational output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Output directory (overrides config and HJBK_OUT_DIR).
    #[arg(long, global = true)]
    out: Option<String>,
    /// Override the conic-solver tolerance.
    #[arg(long, global = true)]
    solver_tol: Option<f64>,
    /// Random seed recorded in outputs (the pipeline itself is deterministic).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the synthesis pipeline and write the value-function file.
    Synthesize {
        #[arg(long)]
        config: PathBuf,
        /// Also dump the assembled conic program for inspection.
        #[arg(long)]
        debug_conic: bool,
    },
    /// Simulate the closed loop under a synthesized value function.
    Simulate {
        #[arg(long)]
        vf: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Produce the full verification report for a synthesized value function.
    Verify {
        #[arg(long)]
        vf: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a built-in experiment end to end and check its acceptance gates.
    Reproduce {
        /// poly1d, radial2d or vanderpol.
        experiment: String,
    },
    /// Synthesize over a sequence of center counts and report the error trend.
    ConvergenceStudy {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated per-axis center counts, e.g. 9,15,25.
        #[arg(long, value_delimiter = ',', default_value = "9,15,25")]
        counts: Vec<usize>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Input(_) | Error::Json(_) => 2,
                _ => 1,
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Synthesize { config, debug_conic } => cmd_synthesize(cli, config, *debug_conic),
        Command::Simulate { vf, config } => cmd_simulate(cli, vf, config),
        Command::Verify { vf, config } => cmd_verify(cli, vf, config),
        Command::Reproduce { experiment } => cmd_reproduce(cli, experiment),
        Command::ConvergenceStudy { config, counts } => cmd_convergence(cli, config, counts),
    }
}

fn load_config(cli: &Cli, path: &Path) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn info(cli: &Cli, msg: &str) {
    if !cli.quiet {
        println!("{msg}");
    }
}

fn cmd_synthesize(cli: &Cli, config_path: &Path, debug_conic: bool) -> Result<i32> {
    let cfg = load_config(cli, config_path)?;
    let out_dir = resolve_out_dir(cli.out.as_deref(), cfg.output_dir.as_deref());
    let run = run_synthesis(&cfg, cli.solver_tol)?;
    let vf_file = ValueFunctionFile::from_pipeline(&run, &cfg);
    write_json(&out_dir.join("vf.json"), &vf_file)?;
    let equilibrium = hjbk_core::verify::equilibrium_check(&run.vf, &run.p_target);
    write_json(
        &out_dir.join("equilibrium.json"),
        &serde_json::json!({
            "system": cfg.system,
            "seed": cfg.seed,
            "equilibrium": equilibrium,
            "solver": run.stats,
            "solve_time_s": run.solve_time_s,
            "riccati_residual": run.riccati_residual,
        }),
    )?;
    if debug_conic {
        write_json(&out_dir.join("conic_debug.json"), &run.program.debug_json())?;
    }
    info(
        cli,
        &format!(
            "synthesized {}: |V(0)| = {:.3e}, |grad V(0)| = {:.3e}, |hess V(0) - P|_F = {:.3e}, status {}{}",
            cfg.system,
            equilibrium.value,
            equilibrium.gradient,
            equilibrium.hessian_fro,
            run.stats.status,
            match run.stats.lmi_relaxation {
                Some(t) => format!(", LMI relaxation {t:.3e}"),
                None => String::new(),
            }
        ),
    );
    info(cli, &format!("wrote {}", out_dir.join("vf.json").display()));
    Ok(0)
}

fn simulate_batch(
    vf: &hjbk_core::ValueFunction,
    model: &hjbk_core::system::SystemModel,
    cfg: &ExperimentConfig,
) -> Result<hjbk_core::SimulationResult> {
    let sim = cfg
        .simulation
        .as_ref()
        .ok_or_else(|| Error::input("config has no simulation section"))?;
    let vf = vf.clone();
    let feedback = move |x: &DVector<f64>| vf.feedback(x);
    hjbk_core::simulate::run_batch(model, &feedback, sim)
}

fn cmd_simulate(cli: &Cli, vf_path: &Path, config_path: &Path) -> Result<i32> {
    let cfg = load_config(cli, config_path)?;
    let file = ValueFunctionFile::load(vf_path)?;
    if file.system != cfg.system {
        return Err(Error::input(format!(
            "value function was synthesized for '{}' but the config targets '{}'",
            file.system, cfg.system
        )));
    }
    let (model, vf, _) = file.rebuild()?;
    let out_dir = resolve_out_dir(cli.out.as_deref(), cfg.output_dir.as_deref());
    let result = simulate_batch(&vf, &model, &cfg)?;
    write_atomic(
        &out_dir.join("trajectories.csv"),
        &trajectories_csv(&result, &vf),
    )?;
    write_json(&out_dir.join("summary.json"), &batch_summary(&result))?;
    info(
        cli,
        &format!(
            "simulated {} trajectories: max final norm {:.3e}, mean {:.3e}, decay rate {:.3}",
            result.trajectories.len(),
            result.max_final_norm,
            result.mean_final_norm,
            result.decay_beta
        ),
    );
    Ok(0)
}

/// Dense evaluation grid over the model domain: 200 points for 1D systems,
/// 50 per axis otherwise.
fn dense_grid(model: &hjbk_core::system::SystemModel) -> Result<Vec<DVector<f64>>> {
    let per_axis = if model.n == 1 { 200 } else { 50 };
    hjbk_core::verify::evaluation_grid(&model.domain, &vec![per_axis; model.n])
}

fn cmd_verify(cli: &Cli, vf_path: &Path, config_path: &Path) -> Result<i32> {
    let cfg = load_config(cli, config_path)?;
    let file = ValueFunctionFile::load(vf_path)?;
    if file.system != cfg.system {
        return Err(Error::input(format!(
            "value function was synthesized for '{}' but the config targets '{}'",
            file.system, cfg.system
        )));
    }
    let (model, vf, p_target) = file.rebuild()?;
    let out_dir = resolve_out_dir(cli.out.as_deref(), cfg.output_dir.as_deref());
    let eval_points = dense_grid(&model)?;
    let centers = cfg.centers.to_center_set(model.n)?;
    let grid = cfg.collocation.to_grid(&centers, model.n)?;
    let batch = match cfg.simulation {
        Some(_) => Some(simulate_batch(&vf, &model, &cfg)?),
        None => None,
    };
    let report = hjbk_core::verify::build_report(
        &vf,
        &model,
        &p_target,
        &eval_points,
        Some(grid.points()),
        batch.as_ref(),
    );
    write_json(&out_dir.join("report.json"), &report)?;
    info(cli, &report.summary());
    Ok(0)
}

fn cmd_reproduce(cli: &Cli, experiment: &str) -> Result<i32> {
    let mut cfg = reproduce::preset(experiment)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out_dir =
        resolve_out_dir(cli.out.as_deref(), cfg.output_dir.as_deref()).join(experiment);
    write_json(&out_dir.join("config.json"), &cfg)?;
    let run = run_synthesis(&cfg, cli.solver_tol)?;
    let vf_file = ValueFunctionFile::from_pipeline(&run, &cfg);
    write_json(&out_dir.join("vf.json"), &vf_file)?;
    let result = simulate_batch(&run.vf, &run.model, &cfg)?;
    write_atomic(
        &out_dir.join("trajectories.csv"),
        &trajectories_csv(&result, &run.vf),
    )?;
    let eval_points = dense_grid(&run.model)?;
    let report = hjbk_core::verify::build_report(
        &run.vf,
        &run.model,
        &run.p_target,
        &eval_points,
        Some(run.grid.points()),
        Some(&result),
    );
    write_json(&out_dir.join("report.json"), &report)?;

    let gates = reproduce::gates(experiment)?;
    let eq = &report.equilibrium;
    let checks = vec![
        GateResult {
            name: "value_at_origin".into(),
            value: eq.value,
            threshold: 1e-6,
            pass: eq.value < 1e-6,
            soft: false,
        },
        GateResult {
            name: "gradient_norm_at_origin".into(),
            value: eq.gradient,
            threshold: 1e-6,
            pass: eq.gradient < 1e-6,
            soft: false,
        },
        GateResult {
            name: "hessian_residual_fro".into(),
            value: eq.hessian_fro,
            threshold: gates.hessian_fro_tol,
            pass: eq.hessian_fro <= gates.hessian_fro_tol,
            soft: false,
        },
        GateResult {
            name: "max_final_norm".into(),
            value: result.max_final_norm,
            threshold: gates.max_final_norm_tol,
            pass: result.max_final_norm <= gates.max_final_norm_tol,
            soft: false,
        },
        GateResult {
            name: "decay_rate_positive".into(),
            value: result.decay_beta,
            threshold: 0.0,
            pass: result.decay_beta > 0.0,
            soft: false,
        },
        GateResult {
            name: "solve_time_s".into(),
            value: run.solve_time_s,
            threshold: gates.soft_time_limit_s,
            pass: run.solve_time_s <= gates.soft_time_limit_s,
            soft: true,
        },
    ];
    let all_pass = checks.iter().filter(|c| !c.soft).all(|c| c.pass);
    let summary = ReproduceSummary {
        experiment: experiment.into(),
        dimension: run.model.n,
        centers: run.centers.len(),
        initial_conditions: result.trajectories.len(),
        max_final_norm: result.max_final_norm,
        mean_final_norm: result.mean_final_norm,
        hessian_residual_fro: eq.hessian_fro,
        value_at_origin: eq.value,
        gradient_norm_at_origin: eq.gradient,
        lmi_relaxation: run.stats.lmi_relaxation,
        solve_time_s: run.solve_time_s,
        gates: checks,
        all_hard_gates_pass: all_pass,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    if !cli.quiet {
        println!("experiment {experiment} (n={}, M={})", run.model.n, run.centers.len());
        for c in &summary.gates {
            println!(
                "  [{}] {:<26} {:>12.4e} (threshold {:.1e}{})",
                if c.pass { "pass" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold,
                if c.soft { ", soft" } else { "" }
            );
        }
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_convergence(cli: &Cli, config_path: &Path, counts: &[usize]) -> Result<i32> {
    let cfg = load_config(cli, config_path)?;
    let model = hjbk_core::system::builtin_by_name(&cfg.system, cfg.mu)?;
    let kernel = cfg.kernel_spec(model.n)?;
    let mut lin = hjbk_core::system::linearize(&model)?;
    if cfg.riccati_q.is_some() {
        lin.q = cfg.riccati_q_matrix(model.n)?;
    }
    let riccati = hjbk_core::solve_are(&lin, &model.d)?;
    let quadrature = dense_grid(&model)?;
    let mut settings: SolverSettings = cfg.solver.clone();
    if let Some(tol) = cli.solver_tol {
        settings.tolerance = tol;
    }
    let study = hjbk_core::verify::convergence_study(
        &model,
        &kernel,
        counts,
        &riccati.p,
        cfg.hessian_relaxation,
        &quadrature,
        &settings,
    )?;
    let out_dir = resolve_out_dir(cli.out.as_deref(), cfg.output_dir.as_deref());
    write_json(&out_dir.join("convergence.json"), &study)?;
    if !cli.quiet {
        for point in &study.points {
            match (&point.gradient_l2_error, &point.failure) {
                (Some(err), _) => println!("  M = {:>5}: gradient L2 error {err:.6e}", point.centers),
                (None, Some(why)) => println!("  M = {:>5}: {why}", point.centers),
                (None, None) => {}
            }
        }
        match study.slope {
            Some(s) => println!("log-log slope: {s:.3}"),
            None => println!("log-log slope: not available"),
        }
    }
    Ok(0)
}
