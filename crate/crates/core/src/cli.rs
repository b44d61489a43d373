//! Command-line front end: every command reads a TOML [`RunConfig`], validates
//! it, and writes one JSON document (with `schema_version`) to stdout or
//! `--out`. Exit codes: 0 success, 2 validation or domain errors, 3 numerical
//! nonconvergence, 1 I/O.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::critical::{
    analytic_index_oracle, counted_index_formula, h0_critical_manifolds, newton_solve, relative_index,
    rescale_to_dirac_solution, CriticalPoint, Extremum, RescalingConvention,
};
use crate::error::{Error, Result};
use crate::flow::{energy_identity_check, integrate_flow, integrate_homotopy, HomotopySchedule};
use crate::functional::{FunctionalContext, KERNEL_TOL};
use crate::homology::{assemble_complex, h0_gradings, homology, numeric_gradings, ChainComplexZ2, SCHEMA_VERSION};
use crate::nonlinearity::{check_h4, check_hypotheses, select_s, NonlinearitySpec};
use crate::spectral::{ExtendedPoint, PairField};

#[derive(Debug, Parser)]
#[command(
    name = "rfh",
    version,
    about = "Rabinowitz-Floer computations for coupled Dirac systems"
)]
pub struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Component index k of the quadratic problem.
    #[arg(long, global = true, allow_hyphen_values = true, value_name = "K")]
    pub k: Option<i64>,
    /// Degree window for complexes and homology.
    #[arg(long, global = true, num_args = 2, allow_hyphen_values = true, value_names = ["LO", "HI"])]
    pub window: Option<Vec<i64>>,
    /// Truncation schedule in complex D-modes, e.g. "8,12,16".
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    pub truncation: Option<Vec<usize>>,
    /// Complex JSON to read instead of assembling one (homology).
    #[arg(long, global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// CSV trajectory dump for flow commands.
    #[arg(long, global = true, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Spectrum of D and of L = [[0, D], [D, 0]].
    Spectrum,
    /// Sampled hypothesis checks for the configured nonlinearity.
    CheckH,
    /// Admissible fractional exponent for the growth exponents.
    SelectS,
    /// Action, constraint and gradient norm at the configured start point.
    Action,
    /// Gradient and Hessian against central differences at random points.
    GradCheck,
    /// Negative gradient flow from the configured start point.
    Flow,
    /// Flow along the homotopy to the rescaled Hamiltonian.
    Homotopy,
    /// Critical points (closed form for the quadratic Hamiltonian, Newton otherwise).
    Critical,
    /// Truncated relative index at a critical point.
    Index,
    /// Assembled ℤ₂ chain complex.
    Complex,
    /// Mod-2 homology of the assembled complex (or of --input).
    Homology,
    /// Power-type critical point rescaled to a Dirac-system solution.
    SolveDirac,
    /// Summary of spectrum, exponents, hypotheses, indices and homology.
    Report,
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter("RFH_LOG")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli).and_then(|v| emit(&v, cli.out.as_deref())) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(w) = &cli.window {
        cfg.window = (w[0], w[1]);
    }
    if let Some(t) = &cli.truncation {
        cfg.truncation = t.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Run one command and return its JSON document.
pub fn execute(cli: &Cli) -> Result<Value> {
    let cfg = load_config(cli)?;
    if cfg.threads > 0 {
        // the global pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    info!("running {:?}", cli.command);
    let mut out = match cli.command {
        Command::Spectrum => cmd_spectrum(&cfg)?,
        Command::CheckH => cmd_check_h(&cfg)?,
        Command::SelectS => cmd_select_s(&cfg)?,
        Command::Action => cmd_action(&cfg)?,
        Command::GradCheck => cmd_grad_check(&cfg)?,
        Command::Flow => cmd_flow(&cfg, cli.csv.as_deref())?,
        Command::Homotopy => cmd_homotopy(&cfg, cli.csv.as_deref())?,
        Command::Critical => cmd_critical(&cfg, cli.k)?,
        Command::Index => cmd_index(&cfg, cli.k)?,
        Command::Complex => build_complex(&cfg)?.to_json(),
        Command::Homology => cmd_homology(&cfg, cli.input.as_deref())?,
        Command::SolveDirac => cmd_solve_dirac(&cfg)?,
        Command::Report => cmd_report(&cfg)?,
    };
    out["schema_version"] = SCHEMA_VERSION.into();
    Ok(out)
}

fn cmd_spectrum(cfg: &RunConfig) -> Result<Value> {
    let spec = cfg.spectrum()?;
    let lspec = spec.l_spectrum();
    let levels: Vec<Value> = lspec
        .levels()
        .into_iter()
        .map(|(k, mu, m)| json!({"k": k, "eigenvalue": mu, "multiplicity": m}))
        .collect();
    Ok(json!({"spectrum": spec, "l_spectrum": levels}))
}

fn cmd_check_h(cfg: &RunConfig) -> Result<Value> {
    let spec = cfg.nonlinearity_spec()?;
    let mut report = check_hypotheses(&spec, &cfg.hypothesis_check())?;
    if cfg.hypotheses.h4 {
        let ctx = cfg.context()?;
        let grid = ctx
            .grid()
            .ok_or_else(|| Error::Domain("(H4) sampling needs the circle grid".into()))?;
        report.h4 = Some(check_h4(&spec, ctx.space(), grid, &cfg.h4_settings())?);
    }
    Ok(json!({"all_passed": report.all_passed(), "report": report}))
}

fn cmd_select_s(cfg: &RunConfig) -> Result<Value> {
    let (p, q) = cfg.nonlinearity_spec()?.exponents();
    let witness = select_s(cfg.spectrum.dimension, p, q)?;
    Ok(json!({"witness": witness}))
}

fn start_point(cfg: &RunConfig, ctx: &FunctionalContext) -> Result<ExtendedPoint> {
    let n = ctx.spectrum().num_modes();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base = match cfg.flow.start.as_str() {
        "critical" => {
            let h0 = ctx.with_nonlinearity(NonlinearitySpec::quadratic())?;
            let m = h0_critical_manifolds(&h0)?
                .into_iter()
                .find(|m| m.k == cfg.flow.k)
                .ok_or_else(|| Error::Config(format!("flow.k: no component k = {} in the window", cfg.flow.k)))?;
            m.p_plus
        }
        _ => ExtendedPoint::new(PairField::zeros(n), cfg.flow.lambda0),
    };
    if cfg.flow.noise == 0.0 {
        return Ok(base);
    }
    let noise = PairField::random(n, cfg.flow.noise, &mut rng);
    Ok(ExtendedPoint::new(base.z.add_scaled(1.0, &noise), base.lambda))
}

fn cmd_action(cfg: &RunConfig) -> Result<Value> {
    let ctx = cfg.context()?;
    let w = start_point(cfg, &ctx)?;
    Ok(json!({
        "lambda": w.lambda,
        "kinetic": ctx.kinetic(&w.z),
        "integral_h": ctx.integral_h(&w.z)?,
        "action": ctx.action(&w)?,
        "gradient_norm": ctx.gradient_norm(&w)?,
    }))
}

fn cmd_grad_check(cfg: &RunConfig) -> Result<Value> {
    let ctx = cfg.context()?;
    let sp = ctx.space();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = vec![];
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    for _ in 0..cfg.grad_check.points {
        let w = ExtendedPoint::new(
            PairField::random(sp.num_modes(), cfg.grad_check.amplitude, &mut rng),
            rng.gen_range(-2.0..2.0),
        );
        let xi = DVector::from_fn(sp.dim(), |_, _| rng.gen_range(-1.0..1.0));
        let eta = DVector::from_fn(sp.dim(), |_, _| rng.gen_range(-1.0..1.0));
        let c = ctx.derivative_check(&w, &xi, &eta, cfg.grad_check.step)?;
        worst_g = worst_g.max(c.gradient_rel_error);
        worst_h = worst_h.max(c.hessian_rel_error);
        rows.push(c);
    }
    Ok(json!({
        "points": rows.len(),
        "max_gradient_rel_error": worst_g,
        "max_hessian_rel_error": worst_h,
        "gradient_ok": worst_g < 1e-6,
        "hessian_ok": worst_h < 1e-5,
        "checks": rows,
    }))
}

fn write_csv(path: Option<&Path>, traj: &crate::flow::FlowTrajectory) -> Result<()> {
    if let Some(p) = path {
        traj.write_csv(BufWriter::new(File::create(p)?))?;
    }
    Ok(())
}

fn cmd_flow(cfg: &RunConfig, csv: Option<&Path>) -> Result<Value> {
    let ctx = cfg.context()?;
    let w0 = start_point(cfg, &ctx)?;
    let traj = integrate_flow(&ctx, None, &w0, cfg.flow.horizon, &cfg.flow.settings())?;
    write_csv(csv, &traj)?;
    let fin = traj.final_state();
    Ok(json!({
        "termination": traj.termination,
        "samples": traj.len(),
        "rejected_steps": traj.rejected,
        "final_time": traj.final_time(),
        "final_lambda": fin.lambda,
        "final_z_norm": ctx.space().es_norm(&fin.z),
        "initial_action": traj.actions[0],
        "final_action": traj.actions[traj.len() - 1],
        "final_gradient_norm": traj.grad_norms[traj.len() - 1],
        "max_action_increase": traj.max_action_increase(),
        "energy": energy_identity_check(&traj),
    }))
}

fn cmd_homotopy(cfg: &RunConfig, csv: Option<&Path>) -> Result<Value> {
    let ctx = cfg.context()?;
    let nl = ctx.nonlinearity().clone();
    let end = ctx.with_nonlinearity(nl.clone().with_scale(nl.scale * cfg.homotopy.end_scale))?;
    let schedule = HomotopySchedule::new(ctx.clone(), end)?.with_epsilon(cfg.homotopy.epsilon);
    let w0 = start_point(cfg, &ctx)?;
    let report = integrate_homotopy(&schedule, &w0, cfg.homotopy.horizon, &cfg.flow.settings())?;
    write_csv(csv, &report.trajectory)?;
    let traj = &report.trajectory;
    Ok(json!({
        "termination": traj.termination,
        "samples": traj.len(),
        "final_lambda": traj.final_state().lambda,
        "sup_z_norm": report.sup_z_norm,
        "sup_lambda": report.sup_lambda,
        "budget": report.budget,
        "epsilon": report.epsilon,
        "budget_ok": report.budget_ok,
        "boundedness_asserted": report.boundedness_asserted,
    }))
}

fn with_kernel(ctx: &FunctionalContext, mut cp: CriticalPoint) -> Result<CriticalPoint> {
    cp.kernel_dim = Some(ctx.hessian_form(&cp.w)?.inertia(KERNEL_TOL).zero);
    Ok(cp)
}

/// Newton refinement from the configured single-mode guess.
fn newton_point(cfg: &RunConfig, ctx: &FunctionalContext) -> Result<CriticalPoint> {
    let lam = ctx.spectrum().mode_eigenvalues();
    let target = cfg.critical.mode_eigenvalue;
    let idx = (0..lam.len())
        .min_by(|&a, &b| (lam[a] - target).abs().total_cmp(&(lam[b] - target).abs()))
        .expect("spectra are nonempty");
    let mut z = PairField::zeros(lam.len());
    z.u[idx] = Complex64::new(cfg.critical.amplitude, 0.0);
    z.v[idx] = Complex64::new(cfg.critical.amplitude, 0.0);
    let cp = newton_solve(ctx, &ExtendedPoint::new(z, cfg.critical.lambda), &cfg.newton.settings())?;
    with_kernel(ctx, cp)
}

fn cmd_critical(cfg: &RunConfig, k: Option<i64>) -> Result<Value> {
    let ctx = cfg.context()?;
    if !ctx.nonlinearity().is_quadratic() {
        let cp = newton_point(cfg, &ctx)?;
        return Ok(json!({"critical_points": [cp]}));
    }
    let mut comps = vec![];
    for m in h0_critical_manifolds(&ctx)? {
        if k.is_some_and(|k| k != m.k) {
            continue;
        }
        let plus = with_kernel(&ctx, CriticalPoint::at(&ctx, m.p_plus.clone())?)?;
        let minus = with_kernel(&ctx, CriticalPoint::at(&ctx, m.p_minus.clone())?)?;
        comps.push(json!({
            "k": m.k,
            "l_eigenvalue": m.l_eigenvalue,
            "multiplicity": m.multiplicity,
            "sphere_dim": m.sphere_dim,
            "lambda": m.lambda,
            "action": ctx.action(&m.p_plus)?,
            "p_plus": plus,
            "p_minus": minus,
        }));
    }
    if comps.is_empty() {
        return Err(Error::Config(format!(
            "--k: no component k = {} in the window",
            k.unwrap_or(0)
        )));
    }
    Ok(json!({"components": comps}))
}

fn cmd_index(cfg: &RunConfig, k: Option<i64>) -> Result<Value> {
    let ctx = cfg.context()?;
    if !ctx.nonlinearity().is_quadratic() {
        let cp = newton_point(cfg, &ctx)?;
        let report = relative_index(&ctx, &cp, &cfg.truncation)?;
        return Ok(json!({
            "lambda": cp.w.lambda,
            "i_rel": report.i_rel,
            "stabilized": report.stabilized,
            "kernel_dim": report.kernel_dim,
            "nu_plus": report.nu_plus,
            "nu_minus": report.nu_minus,
            "rows": report.rows,
        }));
    }
    let k = k.ok_or_else(|| Error::Config("--k is required for the quadratic Hamiltonian".into()))?;
    let m = h0_critical_manifolds(&ctx)?
        .into_iter()
        .find(|m| m.k == k)
        .ok_or_else(|| Error::Config(format!("--k: no component k = {k} in the window")))?;
    let cp = CriticalPoint::at(&ctx, m.p_plus.clone())?;
    let report = relative_index(&ctx, &cp, &cfg.truncation)?;
    let lspec = ctx.spectrum().l_spectrum();
    let (oi, onu_p) = analytic_index_oracle(&lspec, k, Extremum::Plus)?;
    let (_, onu_m) = analytic_index_oracle(&lspec, k, Extremum::Minus)?;
    let (ci, cnu_p) = counted_index_formula(&lspec, k, Extremum::Plus)?;
    Ok(json!({
        "k": k,
        "i_rel": report.i_rel,
        "stabilized": report.stabilized,
        "kernel_dim": report.kernel_dim,
        "nu_plus": report.nu_plus,
        "nu_minus": report.nu_minus,
        "rows": report.rows,
        "closed_form": {"i_rel": oi, "nu_plus": onu_p, "nu_minus": onu_m},
        "inertia_count_formula": {"i_rel": ci, "nu_plus": cnu_p, "nu_minus": ci},
        "matches_closed_form": report.i_rel == oi,
    }))
}

fn build_complex(cfg: &RunConfig) -> Result<ChainComplexZ2> {
    let ctx = cfg.context()?;
    if !ctx.nonlinearity().is_quadratic() {
        return Err(Error::Domain(
            "complexes are assembled for (rescaled) quadratic Hamiltonians".into(),
        ));
    }
    let gradings = match cfg.complex.grading.as_str() {
        "numeric" => {
            let h0 = ctx.with_nonlinearity(NonlinearitySpec::quadratic())?;
            let comps = h0_critical_manifolds(&h0)?;
            numeric_gradings(&ctx, &comps, &cfg.truncation, &cfg.newton.settings())?
        }
        _ => h0_gradings(&ctx.spectrum().l_spectrum()),
    };
    assemble_complex(&gradings, cfg.window)
}

fn cmd_homology(cfg: &RunConfig, input: Option<&Path>) -> Result<Value> {
    let cx = match input {
        Some(p) => serde_json::from_reader(File::open(p)?)?,
        None => build_complex(cfg)?,
    };
    let h = homology(&cx)?;
    Ok(json!({"window": cx.window, "generators": cx.generators.len(), "homology": h.degrees}))
}

fn cmd_solve_dirac(cfg: &RunConfig) -> Result<Value> {
    let ctx = cfg.context()?;
    let cp = newton_point(cfg, &ctx)?;
    let sol = rescale_to_dirac_solution(&ctx, &cp, RescalingConvention::Derived)?;
    let printed = rescale_to_dirac_solution(&ctx, &cp, RescalingConvention::AsPrinted)?;
    let amax = |c: &[Complex64]| c.iter().map(|x| x.norm()).fold(0.0, f64::max);
    Ok(json!({
        "lambda": cp.w.lambda,
        "newton_residual": cp.residual,
        "newton_iterations": cp.iterations,
        "a": sol.a,
        "b": sol.b,
        "max_coefficient_u0": amax(&sol.u0),
        "max_coefficient_v0": amax(&sol.v0),
        "residual_u": sol.residual_u,
        "residual_v": sol.residual_v,
        "sup_residual": sol.sup_residual,
        "alternative_sign_residual": printed.sup_residual,
        "u0": sol.u0,
        "v0": sol.v0,
    }))
}

fn cmd_report(cfg: &RunConfig) -> Result<Value> {
    let mut out = json!({"spectrum": cmd_spectrum(cfg)?, "hypotheses": cmd_check_h(cfg)?});
    let nl = cfg.nonlinearity_spec()?;
    if nl.is_quadratic() {
        let lspec = cfg.spectrum()?.l_spectrum();
        let mut indices = vec![];
        for k in [-3i64, -2, -1, 1, 2, 3] {
            if lspec.multiplicity(k).is_some() {
                indices.push(cmd_index(cfg, Some(k))?);
            }
        }
        out["indices"] = indices.into();
        out["homology"] = cmd_homology(cfg, None)?;
    } else {
        out["select_s"] = cmd_select_s(cfg).unwrap_or_else(|e| json!({"error": e.to_string()}));
        out["dirac"] = cmd_solve_dirac(cfg)?;
    }
    Ok(out)
}
