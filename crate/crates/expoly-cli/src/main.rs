//! Command-line front end: tableau export, integration runs, convergence
//! studies, stability rasters, and orthogonality checks. All output is
//! deterministic; see the canon module for the number format.

mod canon;

use canon::{fmt_f64, render, Val};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use expoly::basis::orthogonality_report;
use expoly::genmethods::{astable2_tableau, lstable2_tableau, ButcherTableau};
use expoly::integrate::{
    solve_adaptive, solve_fixed, solve_fixed_implicit, solve_fixed_irk, AdaptiveConfig,
    NewtonConfig, OdeProblem, Trajectory,
};
use expoly::problems;
use expoly::schemes::{build_explicit, build_implicit};
use expoly::stability::{
    a_stability_check, explicit_stability, irk_stability, region_raster, StabilityFunction,
};
use expoly::{Error, Result};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "expoly",
    version,
    about = "One-step ODE solvers built on orthogonal exponential functions",
    long_about = "Exports scheme coefficients, integrates catalog problems, runs step-halving \
                  convergence studies, rasterizes stability regions, and checks the discrete \
                  orthogonality of the underlying basis.\n\nStructured output is minified \
                  key-sorted JSON with every number printed to 17 significant digits; \
                  trajectories are CSV; rasters are plain PBM (P1, 1 = stable). Output is \
                  byte-identical across runs; no environment variables or config files are read."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print scheme coefficients or a published tableau as a JSON document
    Tableau(TableauArgs),
    /// Integrate a catalog problem and emit the trajectory as CSV
    Solve(SolveArgs),
    /// Step-halving study: endpoint errors and observed orders as CSV
    Convergence(ConvergenceArgs),
    /// Write a stability-region raster and print the rational function data
    Stability(StabilityArgs),
    /// Report worst-case orthogonality residuals for one basis size
    Orthocheck(OrthocheckArgs),
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum SchemeKind {
    /// Explicit scheme of degree n
    Explicit,
    /// Stiffly accurate collocation scheme of degree n
    Implicit,
    /// Published 3-stage A-stable tableau
    Astable2,
    /// Published 2-stage L-stable tableau
    Lstable2,
}

#[derive(Args)]
struct TableauArgs {
    #[arg(long, value_enum)]
    scheme: SchemeKind,
    /// Scheme degree; required for explicit/implicit, rejected otherwise
    #[arg(long)]
    n: Option<usize>,
    /// Write the document here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Catalog problem: decay, decay_gamma, harmonic, vanderpol, lorenz,
    /// prothero, riccati, constant
    #[arg(long)]
    problem: String,
    #[arg(long, value_enum)]
    scheme: SchemeKind,
    /// Scheme degree; required for explicit/implicit
    #[arg(long)]
    n: Option<usize>,
    /// Fixed step size; mutually exclusive with the adaptive flags
    #[arg(long, conflicts_with_all = ["rtol", "atol", "h0", "h_min"])]
    h: Option<f64>,
    /// Relative tolerance; turns on adaptive stepping (explicit, n >= 2)
    #[arg(long)]
    rtol: Option<f64>,
    /// Absolute tolerance for adaptive stepping
    #[arg(long, default_value_t = 1e-9)]
    atol: f64,
    /// Initial step for adaptive stepping
    #[arg(long, default_value_t = 1e-3)]
    h0: f64,
    /// Smallest step the adaptive controller may take
    #[arg(long, default_value_t = 1e-12)]
    h_min: f64,
    /// Override the catalog's final time
    #[arg(long)]
    t_end: Option<f64>,
    /// Newton tolerance (implicit scheme and published tableaux)
    #[arg(long, default_value_t = 1e-10)]
    newton_tol: f64,
    /// Newton iteration cap
    #[arg(long, default_value_t = 50)]
    newton_iters: usize,
    /// Write the trajectory here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Catalog problem with a closed-form reference
    #[arg(long)]
    problem: String,
    #[arg(long, value_enum, default_value = "explicit")]
    scheme: SchemeKind,
    /// Scheme degree; required for explicit/implicit
    #[arg(long)]
    n: Option<usize>,
    /// Largest step size of the halving sequence
    #[arg(long, default_value_t = 0.1)]
    h: f64,
    /// Number of halvings; at least 4 (so at least 5 step sizes)
    #[arg(long, default_value_t = 5)]
    halvings: usize,
    /// Newton tolerance (implicit scheme and published tableaux)
    #[arg(long, default_value_t = 1e-10)]
    newton_tol: f64,
    /// Newton iteration cap
    #[arg(long, default_value_t = 50)]
    newton_iters: usize,
    /// Write the table here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long, value_enum)]
    scheme: SchemeKind,
    /// Scheme degree; required for explicit/implicit
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = -8.0, allow_negative_numbers = true)]
    re_min: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    re_max: f64,
    #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
    im_min: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    im_max: f64,
    /// Raster width in pixels (at most 4096)
    #[arg(long, default_value_t = 200)]
    width: usize,
    /// Raster height in pixels (at most 4096)
    #[arg(long, default_value_t = 200)]
    height: usize,
    /// Raster output path (PBM, P1, 1 = stable); the coefficient document
    /// goes to standard output
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OrthocheckArgs {
    /// Basis size (1 to 32)
    #[arg(long)]
    n: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                Error::NonFiniteState { .. } | Error::FiniteTimeBlowup { .. } => 2,
                Error::NewtonDivergence { .. } => 3,
                Error::StepSizeUnderflow { .. } => 4,
                _ => 1,
            })
        }
    }
}

fn run(cmd: &Cmd) -> Result<()> {
    match cmd {
        Cmd::Tableau(a) => emit(&cmd_tableau(a)?, a.out.as_ref()),
        Cmd::Solve(a) => emit(&cmd_solve(a)?, a.out.as_ref()),
        Cmd::Convergence(a) => emit(&cmd_convergence(a)?, a.out.as_ref()),
        Cmd::Stability(a) => cmd_stability(a),
        Cmd::Orthocheck(a) => emit(&cmd_orthocheck(a)?, None),
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Degree flag validation shared by all subcommands.
fn required_n(kind: SchemeKind, n: Option<usize>) -> Result<usize> {
    match kind {
        SchemeKind::Explicit | SchemeKind::Implicit => n.ok_or_else(|| {
            Error::InvalidConfig("--n is required for the explicit and implicit schemes".into())
        }),
        SchemeKind::Astable2 | SchemeKind::Lstable2 => match n {
            None => Ok(0),
            Some(_) => Err(Error::InvalidConfig(
                "--n is not accepted for the published tableaux".into(),
            )),
        },
    }
}

fn cmd_tableau(args: &TableauArgs) -> Result<String> {
    let n = required_n(args.scheme, args.n)?;
    let doc = match args.scheme {
        SchemeKind::Explicit => {
            let s = build_explicit(n)?;
            let mut m = BTreeMap::new();
            m.insert("dense", Val::rows(s.dense()));
            m.insert("mu", Val::rows(s.mu()));
            m.insert("n", Val::Int(n));
            m.insert("nu", Val::nums(s.nu()));
            m.insert("sigma", Val::nums(s.sigma_out()));
            Val::Map(m)
        }
        SchemeKind::Implicit => {
            let s = build_implicit(n)?;
            let mut m = BTreeMap::new();
            m.insert("n", Val::Int(n));
            m.insert("nu", Val::nums(s.nu()));
            m.insert("sigma", Val::rows(s.sigma()));
            m.insert("sigma0", Val::nums(s.sigma0()));
            Val::Map(m)
        }
        SchemeKind::Astable2 => tableau_doc(&astable2_tableau()),
        SchemeKind::Lstable2 => tableau_doc(&lstable2_tableau()),
    };
    Ok(render(&doc) + "\n")
}

fn tableau_doc(t: &ButcherTableau) -> Val {
    let mut m = BTreeMap::new();
    m.insert("A", Val::rows(t.a()));
    m.insert("b", Val::nums(t.b()));
    m.insert("c", Val::nums(t.c()));
    m.insert("stages", Val::Int(t.stages()));
    Val::Map(m)
}

/// Fixed-step dispatch shared by solve and convergence.
fn integrate_fixed(
    kind: SchemeKind,
    n: usize,
    problem: &OdeProblem,
    h: f64,
    newton: &NewtonConfig,
) -> Result<Trajectory> {
    match kind {
        SchemeKind::Explicit => {
            let s = build_explicit(n)?;
            solve_fixed(problem, &s, h)
        }
        SchemeKind::Implicit => {
            let s = build_implicit(n)?;
            solve_fixed_implicit(problem, &s, h, newton)
        }
        SchemeKind::Astable2 => solve_fixed_irk(problem, &astable2_tableau(), h, newton),
        SchemeKind::Lstable2 => solve_fixed_irk(problem, &lstable2_tableau(), h, newton),
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<String> {
    let n = required_n(args.scheme, args.n)?;
    let np = problems::by_name(&args.problem)?;
    let problem = match args.t_end {
        Some(t) => np.problem().with_final_time(t)?,
        None => np.problem().clone(),
    };
    let newton = NewtonConfig {
        tol: args.newton_tol,
        max_iterations: args.newton_iters,
    };
    let tr = match (args.h, args.rtol) {
        (Some(h), None) => integrate_fixed(args.scheme, n, &problem, h, &newton)?,
        (None, Some(rtol)) => {
            if args.scheme != SchemeKind::Explicit {
                return Err(Error::InvalidConfig(
                    "adaptive stepping needs --scheme explicit (embedded pair of degrees n, n-1)"
                        .into(),
                ));
            }
            let mut cfg = AdaptiveConfig::new(rtol, args.atol, args.h0);
            cfg.h_min = args.h_min;
            solve_adaptive(&problem, n, &cfg)?
        }
        (None, None) => {
            return Err(Error::InvalidConfig(
                "choose fixed-step (--h) or adaptive (--rtol) integration".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    let stats = &tr.stats;
    eprintln!(
        "stats: accepted={} rejected={} rhs_evaluations={} newton_iterations={}",
        stats.accepted_steps, stats.rejected_steps, stats.rhs_evaluations, stats.newton_iterations
    );
    Ok(trajectory_csv(&tr))
}

fn trajectory_csv(tr: &Trajectory) -> String {
    let dim = tr.states.first().map_or(0, Vec::len);
    let mut out = String::from("T");
    for i in 0..dim {
        out.push_str(&format!(",Y{i}"));
    }
    out.push('\n');
    for (t, y) in tr.times.iter().zip(&tr.states) {
        out.push_str(&fmt_f64(*t));
        for v in y {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

fn cmd_convergence(args: &ConvergenceArgs) -> Result<String> {
    if args.halvings < 4 {
        return Err(Error::InvalidConfig(
            "--halvings must be at least 4 (five step sizes)".into(),
        ));
    }
    let n = required_n(args.scheme, args.n)?;
    let np = problems::by_name(&args.problem)?;
    let exact = np.solution_at(np.problem().t_final()).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "problem '{}' has no closed-form reference",
            args.problem
        ))
    })?;
    let newton = NewtonConfig {
        tol: args.newton_tol,
        max_iterations: args.newton_iters,
    };
    let mut out = String::from("H,ERROR,ORDER\n");
    let mut prev_err = f64::NAN;
    for k in 0..=args.halvings {
        let h = args.h / (1u64 << k) as f64;
        let tr = integrate_fixed(args.scheme, n, np.problem(), h, &newton)?;
        let err = tr
            .final_state()
            .iter()
            .zip(&exact)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let order = if k == 0 {
            String::new()
        } else if err == 0.0 || prev_err == 0.0 {
            "exact".into()
        } else {
            fmt_f64((prev_err / err).log2())
        };
        out.push_str(&format!("{},{},{order}\n", fmt_f64(h), fmt_f64(err)));
        prev_err = err;
    }
    // The endpoint error of these first-order schemes is dominated by the
    // h term, so the quadratic content is reported as the scheme's one-step
    // coefficient on y' = y rather than as a raw error/h^2 ratio.
    let r = stability_function(args.scheme, n)?;
    let c = |h: f64| (h.exp() - r.eval_real(h)) / (h * h);
    let (h1, h2) = (1e-2, 1e-3);
    let coeff = (h1 * c(h2) - h2 * c(h1)) / (h1 - h2);
    eprintln!("one-step h^2 coefficient on y' = y: {}", fmt_f64(coeff));
    Ok(out)
}

fn stability_function(kind: SchemeKind, n: usize) -> Result<StabilityFunction> {
    match kind {
        SchemeKind::Explicit => {
            let s = build_explicit(n)?;
            Ok(explicit_stability(&s))
        }
        SchemeKind::Implicit => irk_stability(&build_implicit(n)?.to_tableau()),
        SchemeKind::Astable2 => irk_stability(&astable2_tableau()),
        SchemeKind::Lstable2 => irk_stability(&lstable2_tableau()),
    }
}

fn cmd_stability(args: &StabilityArgs) -> Result<()> {
    let n = required_n(args.scheme, args.n)?;
    let r = stability_function(args.scheme, n)?;
    let raster = region_raster(
        &r,
        (args.re_min, args.re_max),
        (args.im_min, args.im_max),
        args.width,
        args.height,
    )?;
    let mut pbm = format!("P1\n{} {}\n", raster.width, raster.height);
    for row in raster.pixels.chunks(raster.width) {
        let line: Vec<&str> = row.iter().map(|&s| if s { "1" } else { "0" }).collect();
        pbm.push_str(&line.join(" "));
        pbm.push('\n');
    }
    std::fs::write(&args.out, pbm)
        .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", args.out.display())))?;

    let report = a_stability_check(&r);
    let limit = r.limit_at_minus_infinity();
    let mut m = BTreeMap::new();
    m.insert("a_stable", Val::Bool(report.a_stable));
    m.insert("l_stable", Val::Bool(report.a_stable && limit.abs() <= 1e-12));
    // The limit is infinite whenever deg P > deg Q (every explicit scheme).
    m.insert("limit", Val::num_or_null(limit));
    m.insert("p", Val::nums(r.p()));
    m.insert("q", Val::nums(r.q()));
    m.insert(
        "real_axis",
        Val::List(vec![
            Val::num_or_null(raster.real_axis.0),
            Val::num_or_null(raster.real_axis.1),
        ]),
    );
    println!("{}", render(&Val::Map(m)));
    Ok(())
}

fn cmd_orthocheck(args: &OrthocheckArgs) -> Result<String> {
    let report = orthogonality_report(args.n)?;
    let mut m = BTreeMap::new();
    m.insert("integral_max", Val::Num(report.integral_max));
    m.insert("n", Val::Int(args.n));
    m.insert("pair_max", Val::Num(report.pair_max));
    Ok(render(&Val::Map(m)) + "\n")
}
