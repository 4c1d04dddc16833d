//! Command-line front end: config loading, pipeline dispatch, atomic CSV
//! artifacts, and the exit-code contract.
//!
//! Exit codes: 0 success, 1 hypothesis failure, 2 configuration error,
//! 3 solver non-convergence (or a failing sweep/regularity check),
//! 4 `orbit --x0 auto` without a detected singularity.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Result, TwistError};
use crate::generating::{verify_hypotheses, CohomologyClass};
use crate::grid::GridFunction;
use crate::lax_oleinik::t_plus;
use crate::singular::{
    alpha_limit_csv, alpha_limit_set, detect_singularities, free_orbit, orbit_csv,
    propagate_singularity, pseudo_graph, regularization_check, rotation_number, sigma_csv,
    sigma_plus_lift,
};
use crate::weak_kam::{alpha_sweep, sweep_to_csv, weak_kam_backward};

#[derive(Parser)]
#[command(name = "twistkam", version, about = "Weak KAM solver for exact twist maps")]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true, default_value = "twistkam.toml")]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid size (overrides the config; power of two >= 64).
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the generating-function hypotheses on a sample lattice.
    Check,
    /// Solve the eigenproblem at one cohomology class and export artifacts.
    Solve {
        #[arg(long)]
        c: f64,
    },
    /// Sweep the effective interaction over the configured class range.
    Sweep,
    /// Iterate the optimal forward map from a point (or the first detected
    /// singularity with `--x0 auto`).
    Orbit {
        #[arg(long)]
        c: f64,
        #[arg(long, default_value = "auto")]
        x0: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Refinement study of the smoothing property of the composed operators.
    Regcheck,
}

/// Writes through a temp file and renames, so no partial artifact is ever
/// visible at the final path.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!("{name}.tmp"));
    let path = dir.join(name);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, &path)?;
    Ok(())
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_path(&cli.config)?;
    if let Some(out) = &cli.out {
        cfg.output.out_dir = out.display().to_string();
    }
    if let Some(n) = cli.grid {
        if n < 64 || !n.is_power_of_two() {
            return Err(TwistError::Config(format!(
                "--grid must be a power of two >= 64, got {n}"
            )));
        }
        cfg.solver.n = n;
    }
    Ok(cfg)
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn cmd_check(cfg: &RunConfig) -> Result<i32> {
    let gf = cfg.generating_function()?;
    let rep = verify_hypotheses(&gf, CohomologyClass::new(0.0)?, 10_000);
    println!("periodicity_defect   = {}", fmt(rep.periodicity_defect));
    println!("coercivity_margin    = {}", fmt(rep.coercivity_margin));
    println!("twist_margin         = {}", fmt(rep.twist_margin));
    println!("non_crossing_margin  = {}", fmt(rep.non_crossing_margin));
    println!(
        "h1 {} | h2 {} | h3 {}",
        if rep.h1_pass { "pass" } else { "FAIL" },
        if rep.h2_pass { "pass" } else { "FAIL" },
        if rep.h3_pass { "pass" } else { "FAIL" },
    );
    Ok(if rep.all_pass() { 0 } else { 1 })
}

fn cmd_solve(cfg: &RunConfig, c: f64) -> Result<i32> {
    let gf = cfg.generating_function()?;
    let cc = CohomologyClass::new(c)?;
    let s = &cfg.solver;
    let out = Path::new(&cfg.output.out_dir);

    let (u, report) = weak_kam_backward(&gf, cc, s.n, s.tol, s.max_iter)?;
    let lift = sigma_plus_lift(&u, &gf, cc)?;
    let gaps = t_plus(&u, &gf, cc)?.gap;
    let sing = detect_singularities(&u, &lift, cfg.delta_sing());
    let pg = pseudo_graph(&u, &gf, cc, cfg.delta_sing())?;
    let (rho, rho_err) = rotation_number(&lift, 0.0, s.n_iter_rotation);
    let limit = alpha_limit_set(&u, &gf, cc, s.n_steps_alpha_limit, 10.0 / s.n as f64)?;

    write_atomic(out, "solution.csv", &u.to_csv())?;
    write_atomic(out, "sigma.csv", &sigma_csv(&lift, &gaps))?;
    write_atomic(out, "pseudo_graph.csv", &pg.to_csv())?;
    write_atomic(out, "alpha_limit.csv", &alpha_limit_csv(&limit))?;

    let mut rep = String::new();
    if !report.converged {
        rep.push_str("FAILED: solver did not converge\n");
    }
    rep.push_str(&format!("c = {}\n", fmt(c)));
    rep.push_str(&format!("s_bar = {}\n", fmt(report.s_bar)));
    rep.push_str(&format!("alpha = {}\n", fmt(-report.s_bar)));
    rep.push_str(&format!("residual = {}\n", fmt(report.residual)));
    rep.push_str(&format!("iterations = {}\n", report.iterations));
    rep.push_str(&format!("rho_sigma = {} +/- {}\n", fmt(rho), fmt(rho_err)));
    rep.push_str(&format!(
        "singularities = [{}]\n",
        sing.points
            .iter()
            .map(|x| fmt(*x))
            .collect::<Vec<_>>()
            .join(", ")
    ));
    rep.push_str(&format!(
        "detector_disagreement = {}\n",
        fmt(sing.max_disagreement)
    ));
    write_atomic(out, "report.txt", &rep)?;
    print!("{rep}");
    Ok(if report.converged { 0 } else { 3 })
}

fn cmd_sweep(cfg: &RunConfig) -> Result<i32> {
    let gf = cfg.generating_function()?;
    let classes = cfg
        .sweep_classes()
        .ok_or_else(|| TwistError::Config("sweep section missing from config".into()))?;
    let s = &cfg.solver;
    let rows = alpha_sweep(&gf, &classes, s.n, s.tol, s.max_iter, s.n_iter_rotation);
    let out = Path::new(&cfg.output.out_dir);
    write_atomic(out, "alpha_sweep.csv", &sweep_to_csv(&rows))?;

    let converged = rows.iter().filter(|r| r.residual.is_finite()).count();
    let max_dev = rows
        .iter()
        .filter(|r| r.alpha_prime_fd.is_finite() && r.rho_sigma.is_finite())
        .map(|r| (r.alpha_prime_fd - r.rho_sigma).abs())
        .fold(0.0f64, f64::max);
    println!(
        "sweep: {}/{} classes converged, max |alpha'_fd - rho| = {}",
        converged,
        rows.len(),
        fmt(max_dev)
    );
    Ok(if 10 * converged >= 9 * rows.len() { 0 } else { 3 })
}

fn cmd_orbit(cfg: &RunConfig, c: f64, x0: &str, n_steps: usize) -> Result<i32> {
    let gf = cfg.generating_function()?;
    let cc = CohomologyClass::new(c)?;
    let s = &cfg.solver;
    let (u, report) = weak_kam_backward(&gf, cc, s.n, s.tol, s.max_iter)?;
    let lift = sigma_plus_lift(&u, &gf, cc)?;
    let delta_sing = cfg.delta_sing();

    let orbit = if x0 == "auto" {
        let sing = detect_singularities(&u, &lift, delta_sing);
        match sing.points.first() {
            Some(&x) => propagate_singularity(x, &u, &lift, n_steps, delta_sing)?,
            None => {
                eprintln!("no singularity detected at c = {c}");
                return Ok(4);
            }
        }
    } else {
        let x: f64 = x0
            .parse()
            .map_err(|_| TwistError::Config(format!("--x0 must be a real or `auto`, got {x0}")))?;
        free_orbit(x, &u, &lift, n_steps)
    };

    let out = Path::new(&cfg.output.out_dir);
    write_atomic(out, "orbit.csv", &orbit_csv(&orbit))?;
    println!(
        "rho = {} +/- {}",
        fmt(orbit.rho_estimate),
        fmt(orbit.rho_error_bound)
    );
    if let Some((p, q)) = orbit.rational {
        println!("rational lock: rho = {p}/{q}");
    }
    Ok(if report.converged { 0 } else { 3 })
}

fn cmd_regcheck(cfg: &RunConfig) -> Result<i32> {
    let gf = cfg.generating_function()?;
    let cc = CohomologyClass::new(0.0)?;
    let n = cfg.solver.n;
    let tent = |x: f64| (x - 0.5).abs().min(1.0 - (x - 0.5).abs());
    let grids = [n / 4, n / 2, n];
    let mut lines = String::from("n,input_bound,backward_one_sided,smoothed_bound\n");
    let mut smoothed = Vec::new();
    let mut inputs = Vec::new();
    for &m in &grids {
        let u0 = GridFunction::from_fn(m, tent)?;
        let rep = regularization_check(&u0, &gf, cc)?;
        lines.push_str(&format!(
            "{m},{},{},{}\n",
            fmt(rep.input_bound),
            fmt(rep.backward_one_sided),
            fmt(rep.smoothed_bound)
        ));
        smoothed.push(rep.smoothed_bound);
        inputs.push(rep.input_bound);
    }
    let out = Path::new(&cfg.output.out_dir);
    write_atomic(out, "regcheck.csv", &lines)?;
    print!("{lines}");

    let lo = smoothed.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = smoothed.iter().cloned().fold(0.0f64, f64::max);
    let stable = hi <= 2.0 * lo;
    let kink_grows = inputs[2] >= 2.0 * inputs[0];
    println!(
        "smoothed bound ratio = {:.3} ({}), kinked input growth x{:.1}",
        hi / lo,
        if stable { "stable" } else { "UNSTABLE" },
        inputs[2] / inputs[0]
    );
    Ok(if stable && kink_grows { 0 } else { 3 })
}

/// Entry point; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    let result = match &cli.command {
        Command::Check => cmd_check(&cfg),
        Command::Solve { c } => cmd_solve(&cfg, *c),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Orbit { c, x0, n } => cmd_orbit(&cfg, *c, x0, *n),
        Command::Regcheck => cmd_regcheck(&cfg),
    };
    match result {
        Ok(code) => code,
        Err(e @ TwistError::Config(_)) => {
            eprintln!("{e}");
            2
        }
        Err(e) => {
            eprintln!("{e}");
            3
        }
    }
}
