//! Time steppers: explicit stepping with dense output, fixed and adaptive
//! drivers, and Newton-based implicit stepping for the collocation scheme
//! and for generic Butcher tableaux.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::genmethods::ButcherTableau;
use crate::schemes::{self, ExplicitScheme, ImplicitScheme};

type RhsFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Initial value problem y' = F(t, y) on [t_initial, t_final].
///
/// The right-hand side is shared behind an `Arc`, so problems are cheap to
/// clone and re-window for convergence studies.
#[derive(Clone)]
pub struct OdeProblem {
    t_initial: f64,
    t_final: f64,
    y_initial: Vec<f64>,
    rhs: Arc<RhsFn>,
}

impl std::fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OdeProblem")
            .field("dim", &self.y_initial.len())
            .field("t_initial", &self.t_initial)
            .field("t_final", &self.t_final)
            .finish()
    }
}

impl OdeProblem {
    pub fn new(
        t_initial: f64,
        t_final: f64,
        y_initial: Vec<f64>,
        rhs: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self> {
        check_window(t_initial, t_final)?;
        if y_initial.is_empty() || y_initial.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "initial state must be nonempty and finite".into(),
            ));
        }
        Ok(Self {
            t_initial,
            t_final,
            y_initial,
            rhs: Arc::new(rhs),
        })
    }

    pub fn dim(&self) -> usize {
        self.y_initial.len()
    }

    pub fn t_initial(&self) -> f64 {
        self.t_initial
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn y_initial(&self) -> &[f64] {
        &self.y_initial
    }

    /// Evaluates the right-hand side into `out`.
    pub fn eval_rhs(&self, t: f64, y: &[f64], out: &mut [f64]) {
        (self.rhs)(t, y, out);
    }

    /// Same dynamics, different integration window and start state.
    pub fn rewindowed(&self, t_initial: f64, t_final: f64, y_initial: Vec<f64>) -> Result<Self> {
        check_window(t_initial, t_final)?;
        if y_initial.len() != self.dim() || y_initial.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "start state must match the problem dimension and be finite".into(),
            ));
        }
        let mut p = self.clone();
        p.t_initial = t_initial;
        p.t_final = t_final;
        p.y_initial = y_initial;
        Ok(p)
    }

    /// Same dynamics and start, earlier or later final time.
    pub fn with_final_time(&self, t_final: f64) -> Result<Self> {
        self.rewindowed(self.t_initial, t_final, self.y_initial.clone())
    }
}

fn check_window(t_initial: f64, t_final: f64) -> Result<()> {
    if t_initial.is_finite() && t_final.is_finite() && t_initial < t_final {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "integration interval must be finite with t_initial < t_final, got [{t_initial}, {t_final}]"
        )))
    }
}

/// Output of a single step.
#[derive(Debug, Clone)]
pub struct StepResult {
    /// Step size actually taken.
    pub h: f64,
    /// Scaled stage values K_s = h * F(stage state); the explicit scheme has
    /// n+1 of them, a tableau one per stage.
    pub stages: Vec<Vec<f64>>,
    /// End state, formed as y plus the weighted stages in ascending stage
    /// order.
    pub y_end: Vec<f64>,
    /// Newton iterations spent (zero for explicit stepping).
    pub newton_iterations: usize,
    /// Right-hand-side calls made, including Jacobian differencing.
    pub rhs_evaluations: usize,
}

/// Dense-output evaluation; `extrapolated` flags theta outside [0, 1].
#[derive(Debug, Clone)]
pub struct DenseEval {
    pub y: Vec<f64>,
    pub extrapolated: bool,
}

/// Counters accumulated by the drivers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    /// Every call of the right-hand side, including Jacobian differencing.
    pub rhs_evaluations: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub newton_iterations: usize,
}

/// Accepted mesh and states of one integration run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: SolveStats,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// Index of the accepted mesh point closest to t.
    pub fn nearest_index(&self, t: f64) -> usize {
        match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(i) => {
                if i == 0 {
                    0
                } else if i >= self.times.len() {
                    self.times.len() - 1
                } else if (self.times[i] - t).abs() < (t - self.times[i - 1]).abs() {
                    i
                } else {
                    i - 1
                }
            }
        }
    }
}

/// Step-size controller settings. `new` fills the conventional defaults:
/// floor 1e-12, no ceiling, safety 0.9, exponent 1/2.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_initial: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub safety: f64,
    pub order_exponent: f64,
}

impl AdaptiveConfig {
    pub fn new(rtol: f64, atol: f64, h_initial: f64) -> Self {
        Self {
            rtol,
            atol,
            h_initial,
            h_min: 1e-12,
            h_max: f64::INFINITY,
            safety: 0.9,
            order_exponent: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.rtol > 0.0
            && self.rtol.is_finite()
            && self.atol > 0.0
            && self.atol.is_finite()
            && self.h_initial.is_finite()
            && self.h_min > 0.0
            && self.h_min <= self.h_initial
            && self.h_initial <= self.h_max
            && self.safety > 0.0
            && self.safety < 1.0
            && self.order_exponent > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// Newton iteration settings for the implicit steppers.
#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    /// Convergence threshold on the max-norm of the state update.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 50,
        }
    }
}

fn check_step_args(problem: &OdeProblem, y: &[f64], h: f64) -> Result<()> {
    if y.len() != problem.dim() {
        return Err(Error::InvalidConfig(format!(
            "state dimension {} does not match problem dimension {}",
            y.len(),
            problem.dim()
        )));
    }
    check_step_size(h)
}

fn check_step_size(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "step size must be positive and finite, got {h}"
        )))
    }
}

fn eval_checked(
    problem: &OdeProblem,
    t: f64,
    y: &[f64],
    out: &mut [f64],
    stage: usize,
) -> Result<()> {
    problem.eval_rhs(t, y, out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { stage, t });
    }
    Ok(())
}

/// One explicit step: K_0 = h F(T, Y), K_p = h F(T + nu_p h, Y + sum mu K),
/// y_end = Y + sum sigma K. Exactly n+1 rhs evaluations.
pub fn explicit_step(
    scheme: &ExplicitScheme,
    problem: &OdeProblem,
    t: f64,
    y: &[f64],
    h: f64,
) -> Result<StepResult> {
    check_step_args(problem, y, h)?;
    let n = scheme.degree();
    let dim = y.len();
    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut work = vec![0.0; dim];

    eval_checked(problem, t, y, &mut work, 0)?;
    stages.push(work.iter().map(|f| h * f).collect());

    let mut arg = vec![0.0; dim];
    for p in 1..=n {
        arg.copy_from_slice(y);
        for (s, &m) in scheme.mu()[p - 1].iter().enumerate() {
            for (a, k) in arg.iter_mut().zip(&stages[s]) {
                *a += m * k;
            }
        }
        let ts = t + scheme.nu()[p - 1] * h;
        eval_checked(problem, ts, &arg, &mut work, p)?;
        stages.push(work.iter().map(|f| h * f).collect());
    }

    let mut y_end = y.to_vec();
    for (s, &w) in scheme.sigma_out().iter().enumerate() {
        for (e, k) in y_end.iter_mut().zip(&stages[s]) {
            *e += w * k;
        }
    }
    if y_end.iter().any(|v| !v.is_finite()) {
        // Stage index n+1 denotes the output combination.
        return Err(Error::NonFiniteState { stage: n + 1, t });
    }
    Ok(StepResult {
        h,
        stages,
        y_end,
        newton_iterations: 0,
        rhs_evaluations: n + 1,
    })
}

/// Evaluates the continuous extension of a completed explicit step at the
/// fraction `theta` of the step starting from (t_start, y_start). Values of
/// theta outside [0, 1] are permitted but flagged as extrapolation.
pub fn dense_eval(
    scheme: &ExplicitScheme,
    step: &StepResult,
    _t_start: f64,
    y_start: &[f64],
    theta: f64,
) -> DenseEval {
    let lambda = scheme.lambda_nn();
    let r = scheme.dense_values(theta * lambda);
    let mut y = y_start.to_vec();
    for (s, k) in step.stages.iter().enumerate() {
        let w = r[s] / lambda;
        for (acc, ks) in y.iter_mut().zip(k) {
            *acc += w * ks;
        }
    }
    DenseEval {
        y,
        extrapolated: !(0.0..=1.0).contains(&theta),
    }
}

const MAX_STEPS: usize = 20_000_000;

struct Mesh {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl Mesh {
    fn start(problem: &OdeProblem) -> Self {
        Self {
            times: vec![problem.t_initial()],
            states: vec![problem.y_initial().to_vec()],
        }
    }

    fn push(&mut self, t: f64, y: Vec<f64>) {
        self.times.push(t);
        self.states.push(y);
    }
}

/// Fixed-step explicit integration; the final step is clamped to land
/// exactly on t_final.
pub fn solve_fixed(problem: &OdeProblem, scheme: &ExplicitScheme, h: f64) -> Result<Trajectory> {
    solve_fixed_with(problem, h, |t, y, h_step| {
        explicit_step(scheme, problem, t, y, h_step)
    })
}

/// Fixed-step integration with the implicit collocation scheme.
pub fn solve_fixed_implicit(
    problem: &OdeProblem,
    scheme: &ImplicitScheme,
    h: f64,
    newton: &NewtonConfig,
) -> Result<Trajectory> {
    solve_fixed_with(problem, h, |t, y, h_step| {
        implicit_step(scheme, problem, t, y, h_step, newton)
    })
}

/// Fixed-step integration with an arbitrary Butcher tableau.
pub fn solve_fixed_irk(
    problem: &OdeProblem,
    tableau: &ButcherTableau,
    h: f64,
    newton: &NewtonConfig,
) -> Result<Trajectory> {
    tableau.validate()?;
    solve_fixed_with(problem, h, |t, y, h_step| {
        irk_step_unchecked(tableau, problem, t, y, h_step, newton)
    })
}

fn solve_fixed_with(
    problem: &OdeProblem,
    h: f64,
    mut step: impl FnMut(f64, &[f64], f64) -> Result<StepResult>,
) -> Result<Trajectory> {
    check_step_size(h)?;
    let span = problem.t_final() - problem.t_initial();
    if span / h > MAX_STEPS as f64 {
        return Err(Error::InvalidConfig(format!(
            "step size {h} needs more than {MAX_STEPS} steps for span {span}"
        )));
    }
    let mut mesh = Mesh::start(problem);
    let mut stats = SolveStats::default();
    let mut t = problem.t_initial();
    let mut y = problem.y_initial().to_vec();
    while t < problem.t_final() {
        let remaining = problem.t_final() - t;
        let clamped = h >= remaining;
        let h_step = if clamped { remaining } else { h };
        let result = step(t, &y, h_step)?;
        stats.rhs_evaluations += result.rhs_evaluations;
        stats.newton_iterations += result.newton_iterations;
        stats.accepted_steps += 1;
        t = if clamped { problem.t_final() } else { t + h };
        y = result.y_end;
        mesh.push(t, y.clone());
    }
    Ok(Trajectory {
        times: mesh.times,
        states: mesh.states,
        stats,
    })
}

/// Adaptive explicit integration comparing degrees n and n-1.
///
/// Both schemes share K_0 = h F(T, Y); the error estimate is the max norm of
/// (y_n - y_{n-1}) / (atol + rtol |y_n|), a step is accepted when the
/// estimate is at most 1, and the next step size is
/// h * clamp(safety * est^(-order_exponent), 0.2, 5.0) within [h_min, h_max].
pub fn solve_adaptive(problem: &OdeProblem, n: usize, cfg: &AdaptiveConfig) -> Result<Trajectory> {
    if n < 2 {
        return Err(Error::InvalidConfig(
            "adaptive stepping needs degree n >= 2 for the embedded comparison".into(),
        ));
    }
    cfg.validate()?;
    let hi = schemes::build_explicit(n)?;
    let lo = schemes::build_explicit(n - 1)?;
    let dim = problem.dim();

    let mut mesh = Mesh::start(problem);
    let mut stats = SolveStats::default();
    let mut t = problem.t_initial();
    let mut y = problem.y_initial().to_vec();
    let mut h = cfg
        .h_initial
        .min(problem.t_final() - problem.t_initial())
        .max(cfg.h_min);

    let mut f0 = vec![0.0; dim];
    let mut attempts = 0usize;
    while t < problem.t_final() {
        attempts += 1;
        if attempts > MAX_STEPS {
            return Err(Error::Internal(format!(
                "adaptive controller exceeded {MAX_STEPS} step attempts"
            )));
        }
        let remaining = problem.t_final() - t;
        let clamped = h >= remaining;
        let h_try = if clamped { remaining } else { h };

        eval_checked(problem, t, &y, &mut f0, 0)?;
        let k0: Vec<f64> = f0.iter().map(|f| h_try * f).collect();
        let y_hi = finish_stages(&hi, problem, t, &y, h_try, &k0)?;
        let y_lo = finish_stages(&lo, problem, t, &y, h_try, &k0)?;
        stats.rhs_evaluations += 2 * n; // 1 shared + n + (n-1)

        let mut est = 0.0f64;
        for i in 0..dim {
            let scale = cfg.atol + cfg.rtol * y_hi[i].abs();
            est = est.max((y_hi[i] - y_lo[i]).abs() / scale);
        }

        if est <= 1.0 {
            stats.accepted_steps += 1;
            t = if clamped { problem.t_final() } else { t + h_try };
            y = y_hi;
            mesh.push(t, y.clone());
        } else {
            stats.rejected_steps += 1;
            if h_try <= cfg.h_min * (1.0 + 1e-9) {
                return Err(Error::StepSizeUnderflow { t, h: h_try, est });
            }
        }
        let factor = (cfg.safety * est.powf(-cfg.order_exponent)).clamp(0.2, 5.0);
        h = (h_try * factor).clamp(cfg.h_min, cfg.h_max);
    }
    Ok(Trajectory {
        times: mesh.times,
        states: mesh.states,
        stats,
    })
}

/// Stages 1..n of an explicit step with K_0 supplied; returns y_end.
fn finish_stages(
    scheme: &ExplicitScheme,
    problem: &OdeProblem,
    t: f64,
    y: &[f64],
    h: f64,
    k0: &[f64],
) -> Result<Vec<f64>> {
    let n = scheme.degree();
    let dim = y.len();
    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    stages.push(k0.to_vec());
    let mut work = vec![0.0; dim];
    let mut arg = vec![0.0; dim];
    for p in 1..=n {
        arg.copy_from_slice(y);
        for (s, &m) in scheme.mu()[p - 1].iter().enumerate() {
            for (a, k) in arg.iter_mut().zip(&stages[s]) {
                *a += m * k;
            }
        }
        eval_checked(problem, t + scheme.nu()[p - 1] * h, &arg, &mut work, p)?;
        stages.push(work.iter().map(|f| h * f).collect());
    }
    let mut y_end = y.to_vec();
    for (s, &w) in scheme.sigma_out().iter().enumerate() {
        for (e, k) in y_end.iter_mut().zip(&stages[s]) {
            *e += w * k;
        }
    }
    if y_end.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { stage: n + 1, t });
    }
    Ok(y_end)
}

/// One implicit collocation step: solves the n*N system
/// Y_p = Y + h sigma_p0 F(T, Y) + h sum_s sigma_ps F(T + nu_s h, Y_s)
/// by Newton iteration; the last collocation abscissa is 1, so the end state
/// is the last stage, reassembled through the end-row quadrature from the
/// final rhs values.
pub fn implicit_step(
    scheme: &ImplicitScheme,
    problem: &OdeProblem,
    t: f64,
    y: &[f64],
    h: f64,
    newton: &NewtonConfig,
) -> Result<StepResult> {
    check_step_args(problem, y, h)?;
    let n = scheme.degree();
    let dim = y.len();
    let mut f0 = vec![0.0; dim];
    eval_checked(problem, t, y, &mut f0, 0)?;

    let offsets: Vec<Vec<f64>> = (0..n)
        .map(|p| {
            let w0 = h * scheme.sigma0()[p];
            y.iter().zip(&f0).map(|(yi, fi)| yi + w0 * fi).collect()
        })
        .collect();
    let weights: Vec<&[f64]> = scheme.sigma().iter().map(|row| row.as_slice()).collect();
    let solved = newton_solve(problem, t, y, h, scheme.nu(), &weights, &offsets, newton, 1)?;

    let mut stages = Vec::with_capacity(n + 1);
    stages.push(f0.iter().map(|f| h * f).collect::<Vec<f64>>());
    for fs in &solved.stage_rhs {
        stages.push(fs.iter().map(|f| h * f).collect());
    }
    let mut y_end = y.to_vec();
    let w0 = scheme.sigma0()[n - 1];
    for (e, k) in y_end.iter_mut().zip(&stages[0]) {
        *e += w0 * k;
    }
    for (s, &w) in scheme.sigma()[n - 1].iter().enumerate() {
        for (e, k) in y_end.iter_mut().zip(&stages[s + 1]) {
            *e += w * k;
        }
    }
    Ok(StepResult {
        h,
        stages,
        y_end,
        newton_iterations: solved.iterations,
        rhs_evaluations: 1 + solved.rhs_evals,
    })
}

/// One step of a generic implicit Runge-Kutta tableau, with a forward
/// substitution fast path for explicit tableaux.
pub fn irk_step(
    tableau: &ButcherTableau,
    problem: &OdeProblem,
    t: f64,
    y: &[f64],
    h: f64,
    newton: &NewtonConfig,
) -> Result<StepResult> {
    tableau.validate()?;
    irk_step_unchecked(tableau, problem, t, y, h, newton)
}

fn irk_step_unchecked(
    tableau: &ButcherTableau,
    problem: &OdeProblem,
    t: f64,
    y: &[f64],
    h: f64,
    newton: &NewtonConfig,
) -> Result<StepResult> {
    check_step_args(problem, y, h)?;
    let s = tableau.stages();
    let dim = y.len();

    if tableau.is_explicit() {
        let mut stages: Vec<Vec<f64>> = Vec::with_capacity(s);
        let mut work = vec![0.0; dim];
        let mut arg = vec![0.0; dim];
        for i in 0..s {
            arg.copy_from_slice(y);
            for (j, k) in stages.iter().enumerate() {
                let m = tableau.a()[i][j];
                for (a, ks) in arg.iter_mut().zip(k) {
                    *a += m * ks;
                }
            }
            eval_checked(problem, t + tableau.c()[i] * h, &arg, &mut work, i)?;
            stages.push(work.iter().map(|f| h * f).collect());
        }
        let mut y_end = y.to_vec();
        for (j, k) in stages.iter().enumerate() {
            let w = tableau.b()[j];
            for (e, ks) in y_end.iter_mut().zip(k) {
                *e += w * ks;
            }
        }
        if y_end.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { stage: s, t });
        }
        return Ok(StepResult {
            h,
            stages,
            y_end,
            newton_iterations: 0,
            rhs_evaluations: s,
        });
    }

    let offsets: Vec<Vec<f64>> = (0..s).map(|_| y.to_vec()).collect();
    let weights: Vec<&[f64]> = tableau.a().iter().map(|row| row.as_slice()).collect();
    let solved = newton_solve(
        problem,
        t,
        y,
        h,
        tableau.c(),
        &weights,
        &offsets,
        newton,
        0,
    )?;
    let stages: Vec<Vec<f64>> = solved
        .stage_rhs
        .iter()
        .map(|fs| fs.iter().map(|f| h * f).collect())
        .collect();
    let mut y_end = y.to_vec();
    for (j, k) in stages.iter().enumerate() {
        let w = tableau.b()[j];
        for (e, ks) in y_end.iter_mut().zip(k) {
            *e += w * ks;
        }
    }
    Ok(StepResult {
        h,
        stages,
        y_end,
        newton_iterations: solved.iterations,
        rhs_evaluations: solved.rhs_evals,
    })
}

struct NewtonSolution {
    /// F at the converged stage states, one vector per stage.
    stage_rhs: Vec<Vec<f64>>,
    iterations: usize,
    rhs_evals: usize,
}

/// Newton iteration for stage states X_p = offset_p + h sum_s W_ps F_s.
///
/// The Jacobian is assembled per stage by forward differences with
/// perturbation sqrt(eps) * max(1, |X_i|), kept frozen across iterations,
/// and rebuilt when the residual norm fails to contract by a factor of 0.5.
/// Convergence is declared when the max-norm of the update drops to `tol`.
#[allow(clippy::too_many_arguments)]
fn newton_solve(
    problem: &OdeProblem,
    t: f64,
    y: &[f64],
    h: f64,
    fractions: &[f64],
    weights: &[&[f64]],
    offsets: &[Vec<f64>],
    newton: &NewtonConfig,
    stage_index_base: usize,
) -> Result<NewtonSolution> {
    let m = fractions.len();
    let dim = y.len();
    let size = m * dim;
    let mut rhs_evals = 0usize;

    let mut x: Vec<Vec<f64>> = (0..m).map(|_| y.to_vec()).collect();
    let mut f: Vec<Vec<f64>> = vec![vec![0.0; dim]; m];

    let eval_stages = |x: &[Vec<f64>], f: &mut [Vec<f64>], count: &mut usize| -> Result<()> {
        for p in 0..m {
            eval_checked(
                problem,
                t + fractions[p] * h,
                &x[p],
                &mut f[p],
                stage_index_base + p,
            )?;
            *count += 1;
        }
        Ok(())
    };
    let residual = |x: &[Vec<f64>], f: &[Vec<f64>]| -> DVector<f64> {
        let mut g = DVector::zeros(size);
        for p in 0..m {
            for i in 0..dim {
                let mut acc = x[p][i] - offsets[p][i];
                for (s, fs) in f.iter().enumerate() {
                    acc -= h * weights[p][s] * fs[i];
                }
                g[p * dim + i] = acc;
            }
        }
        g
    };
    let build_jacobian = |x: &[Vec<f64>],
                          f: &[Vec<f64>],
                          count: &mut usize|
     -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let mut jac = DMatrix::<f64>::identity(size, size);
        let mut pert = vec![0.0; dim];
        let mut fp = vec![0.0; dim];
        for s in 0..m {
            let ts = t + fractions[s] * h;
            for l in 0..dim {
                pert.copy_from_slice(&x[s]);
                let delta = f64::EPSILON.sqrt() * x[s][l].abs().max(1.0);
                pert[l] += delta;
                eval_checked(problem, ts, &pert, &mut fp, stage_index_base + s)?;
                *count += 1;
                for p in 0..m {
                    let w = -h * weights[p][s];
                    if w == 0.0 {
                        continue;
                    }
                    for i in 0..dim {
                        jac[(p * dim + i, s * dim + l)] += w * (fp[i] - f[s][i]) / delta;
                    }
                }
            }
        }
        Ok(jac.lu())
    };

    eval_stages(&x, &mut f, &mut rhs_evals)?;
    let mut g = residual(&x, &f);
    let mut g_norm = g.amax();
    let mut lu = build_jacobian(&x, &f, &mut rhs_evals)?;

    for iter in 1..=newton.max_iterations {
        let dx = lu.solve(&(-&g)).ok_or(Error::NewtonDivergence {
            iterations: iter,
            residual: g_norm,
        })?;
        for p in 0..m {
            for i in 0..dim {
                x[p][i] += dx[p * dim + i];
            }
        }
        let update = dx.amax();
        if !update.is_finite() {
            return Err(Error::NewtonDivergence {
                iterations: iter,
                residual: update,
            });
        }
        // Refresh f at the new states; on convergence this closing
        // evaluation feeds the stage reconstruction and end quadrature.
        eval_stages(&x, &mut f, &mut rhs_evals)?;
        if update <= newton.tol {
            return Ok(NewtonSolution {
                stage_rhs: f,
                iterations: iter,
                rhs_evals,
            });
        }
        g = residual(&x, &f);
        let new_norm = g.amax();
        if new_norm > 0.5 * g_norm {
            lu = build_jacobian(&x, &f, &mut rhs_evals)?;
        }
        g_norm = new_norm;
    }
    Err(Error::NewtonDivergence {
        iterations: newton.max_iterations,
        residual: g_norm,
    })
}

/// Richardson estimate of the one-step error coefficient on y' = y:
/// c(h) = (e^h - y_1(h)) / h^2 extrapolated linearly to h = 0 from
/// h = 1e-2 and 1e-3.
pub fn local_error_constant(scheme: &ExplicitScheme) -> Result<f64> {
    let problem = OdeProblem::new(0.0, 1.0, vec![1.0], |_, y, out| out[0] = y[0])?;
    let c = |h: f64| -> Result<f64> {
        let step = explicit_step(scheme, &problem, 0.0, &[1.0], h)?;
        Ok((h.exp() - step.y_end[0]) / (h * h))
    };
    let (h1, h2) = (1e-2, 1e-3);
    let (c1, c2) = (c(h1)?, c(h2)?);
    Ok((h1 * c2 - h2 * c1) / (h1 - h2))
}
