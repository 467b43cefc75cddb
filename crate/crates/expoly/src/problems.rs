//! Test-problem catalog with closed-form references where they exist, plus
//! the high-accuracy embedded Runge-Kutta reference solver used as the
//! in-house oracle.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrate::{OdeProblem, SolveStats, Trajectory};

type SolutionFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// Exact solution when one is known in closed form; `Numerical` marks
/// problems served only by `reference_solve`.
#[derive(Clone)]
pub enum Reference {
    ClosedForm(Arc<SolutionFn>),
    Numerical,
}

impl std::fmt::Debug for Reference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Reference::ClosedForm(_) => f.write_str("ClosedForm"),
            Reference::Numerical => f.write_str("Numerical"),
        }
    }
}

/// A catalog entry: a named initial value problem and its reference.
#[derive(Debug, Clone)]
pub struct NamedProblem {
    name: &'static str,
    description: String,
    problem: OdeProblem,
    reference: Reference,
}

impl NamedProblem {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn problem(&self) -> &OdeProblem {
        &self.problem
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    /// Closed-form solution at t, if one exists.
    pub fn solution_at(&self, t: f64) -> Option<Vec<f64>> {
        match &self.reference {
            Reference::ClosedForm(f) => Some(f(t)),
            Reference::Numerical => None,
        }
    }
}

/// y' = -y on [0, 1], y(0) = 1.
pub fn decay() -> NamedProblem {
    NamedProblem {
        name: "decay",
        description: "linear decay y' = -y".into(),
        problem: OdeProblem::new(0.0, 1.0, vec![1.0], |_, y, out| out[0] = -y[0]).unwrap(),
        reference: Reference::ClosedForm(Arc::new(|t| vec![(-t).exp()])),
    }
}

/// y' = -gamma * y on [0, 1], y(0) = 1, gamma > 0.
pub fn decay_gamma(gamma: f64) -> Result<NamedProblem> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "decay rate must be positive and finite, got {gamma}"
        )));
    }
    Ok(NamedProblem {
        name: "decay_gamma",
        description: format!("linear decay y' = -{gamma} y"),
        problem: OdeProblem::new(0.0, 1.0, vec![1.0], move |_, y, out| {
            out[0] = -gamma * y[0];
        })
        .unwrap(),
        reference: Reference::ClosedForm(Arc::new(move |t| vec![(-gamma * t).exp()])),
    })
}

/// Harmonic oscillator as a 2-system over one period: y0' = y1, y1' = -y0,
/// start (1, 0).
pub fn harmonic() -> NamedProblem {
    NamedProblem {
        name: "harmonic",
        description: "undamped oscillator y'' = -y over one period".into(),
        problem: OdeProblem::new(0.0, std::f64::consts::TAU, vec![1.0, 0.0], |_, y, out| {
            out[0] = y[1];
            out[1] = -y[0];
        })
        .unwrap(),
        reference: Reference::ClosedForm(Arc::new(|t| vec![t.cos(), -t.sin()])),
    }
}

/// Van der Pol oscillator with damping parameter mu on [0, 20], start (2, 0).
pub fn vanderpol(mu: f64) -> Result<NamedProblem> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "damping parameter must be nonnegative and finite, got {mu}"
        )));
    }
    Ok(NamedProblem {
        name: "vanderpol",
        description: format!("Van der Pol oscillator, mu = {mu}"),
        problem: OdeProblem::new(0.0, 20.0, vec![2.0, 0.0], move |_, y, out| {
            out[0] = y[1];
            out[1] = mu * (1.0 - y[0] * y[0]) * y[1] - y[0];
        })
        .unwrap(),
        reference: Reference::Numerical,
    })
}

/// Lorenz system with the standard parameters (10, 28, 8/3) on [0, 20],
/// start (1, 1, 1).
pub fn lorenz() -> NamedProblem {
    let (sigma, rho, beta) = (10.0, 28.0, 8.0 / 3.0);
    NamedProblem {
        name: "lorenz",
        description: "Lorenz system, sigma=10 rho=28 beta=8/3".into(),
        problem: OdeProblem::new(0.0, 20.0, vec![1.0, 1.0, 1.0], move |_, y, out| {
            out[0] = sigma * (y[1] - y[0]);
            out[1] = y[0] * (rho - y[2]) - y[1];
            out[2] = y[0] * y[1] - beta * y[2];
        })
        .unwrap(),
        reference: Reference::Numerical,
    }
}

/// Stiff test equation y' = L (y - cos t) - sin t on [0, 1] with L < 0;
/// starting on the particular solution y(0) = 1 gives y = cos t exactly.
pub fn prothero(stiffness: f64) -> Result<NamedProblem> {
    if !(stiffness < 0.0) || !stiffness.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "stiffness must be negative and finite, got {stiffness}"
        )));
    }
    Ok(NamedProblem {
        name: "prothero",
        description: format!("stiff relaxation to cos t, L = {stiffness}"),
        problem: OdeProblem::new(0.0, 1.0, vec![1.0], move |t, y, out| {
            out[0] = stiffness * (y[0] - t.cos()) - t.sin();
        })
        .unwrap(),
        reference: Reference::ClosedForm(Arc::new(|t| vec![t.cos()])),
    })
}

/// y' = y^2, y(0) = 1 on [0, 2]; the solution 1/(1-t) blows up at t = 1, so
/// any attempt to integrate past it must fail. Exercises the error paths.
pub fn riccati() -> NamedProblem {
    NamedProblem {
        name: "riccati",
        description: "quadratic blow-up y' = y^2, pole at t = 1".into(),
        problem: OdeProblem::new(0.0, 2.0, vec![1.0], |_, y, out| out[0] = y[0] * y[0]).unwrap(),
        reference: Reference::ClosedForm(Arc::new(|t| vec![1.0 / (1.0 - t)])),
    }
}

/// F = 0 on [0, 1]; the solution is the initial state.
pub fn constant() -> NamedProblem {
    let y0 = vec![1.5, -2.0];
    let frozen = y0.clone();
    NamedProblem {
        name: "constant",
        description: "zero right-hand side".into(),
        problem: OdeProblem::new(0.0, 1.0, y0, |_, _, out| out.fill(0.0)).unwrap(),
        reference: Reference::ClosedForm(Arc::new(move |_| frozen.clone())),
    }
}

/// All catalog problems with their default parameters: Van der Pol uses
/// mu = 5, the stiff relaxation L = -1e4, the parametric decay gamma = 2.5.
pub fn catalog() -> Vec<NamedProblem> {
    vec![
        decay(),
        decay_gamma(2.5).unwrap(),
        harmonic(),
        vanderpol(5.0).unwrap(),
        lorenz(),
        prothero(-1e4).unwrap(),
        riccati(),
        constant(),
    ]
}

/// Looks up a catalog problem by name (default parameters).
pub fn by_name(name: &str) -> Result<NamedProblem> {
    catalog()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownProblem(name.to_string()))
}

// Dormand-Prince 5(4) coefficients. The fifth-order weights equal the last
// stage row, so the final evaluation of an accepted step seeds the next one.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const REF_H_MIN: f64 = 1e-13;
const REF_MAX_ATTEMPTS: usize = 20_000_000;

/// High-accuracy oracle: adaptive embedded Runge-Kutta pair of orders 5 and
/// 4. Accepts tolerances down to rtol = 1e-13. A step-size collapse or a
/// non-finite right-hand side is reported as finite-time blow-up at the
/// reached time.
pub fn reference_solve(problem: &OdeProblem, rtol: f64, atol: f64) -> Result<Trajectory> {
    if !(rtol >= 1e-13) || !rtol.is_finite() || !(atol > 0.0) || !atol.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "reference solver needs rtol in [1e-13, inf) and atol > 0, got rtol={rtol} atol={atol}"
        )));
    }
    let dim = problem.dim();
    let t_final = problem.t_final();
    let mut t = problem.t_initial();
    let mut y = problem.y_initial().to_vec();
    let mut times = vec![t];
    let mut states = vec![y.clone()];
    let mut stats = SolveStats::default();

    let eval = |t: f64, y: &[f64], out: &mut [f64], count: &mut usize| -> Result<()> {
        problem.eval_rhs(t, y, out);
        *count += 1;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::FiniteTimeBlowup { t });
        }
        Ok(())
    };

    let mut k = vec![vec![0.0; dim]; 7];
    let mut arg = vec![0.0; dim];
    let mut h = ((t_final - t) / 100.0).min(0.1).max(REF_H_MIN);
    // The first stage sits at (t, y): valid across rejections, and replaced
    // by the reusable last stage after each accepted step.
    eval(t, &y, &mut k[0], &mut stats.rhs_evaluations)?;

    let mut attempts = 0usize;
    while t < t_final {
        attempts += 1;
        if attempts > REF_MAX_ATTEMPTS {
            return Err(Error::Internal(format!(
                "reference solver exceeded {REF_MAX_ATTEMPTS} step attempts"
            )));
        }
        let remaining = t_final - t;
        let clamped = h >= remaining;
        let h_try = if clamped { remaining } else { h };

        for i in 1..7 {
            arg.copy_from_slice(&y);
            for (j, kj) in k.iter().take(i).enumerate() {
                let a = DP_A[i - 1][j];
                if a == 0.0 {
                    continue;
                }
                for (x, v) in arg.iter_mut().zip(kj) {
                    *x += h_try * a * v;
                }
            }
            eval(
                t + DP_C[i] * h_try,
                &arg,
                &mut k[i],
                &mut stats.rhs_evaluations,
            )?;
        }

        let mut y_new = y.clone();
        let mut est = 0.0f64;
        for i in 0..dim {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for s in 0..7 {
                hi += DP_B5[s] * k[s][i];
                lo += DP_B4[s] * k[s][i];
            }
            y_new[i] += h_try * hi;
            let scale = atol + rtol * y[i].abs().max(y_new[i].abs());
            est = est.max((h_try * (hi - lo)).abs() / scale);
        }
        if y_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::FiniteTimeBlowup { t });
        }

        if est <= 1.0 {
            stats.accepted_steps += 1;
            t = if clamped { t_final } else { t + h_try };
            y = y_new;
            times.push(t);
            states.push(y.clone());
            // Last stage was evaluated at (t + h, y_new): reuse it.
            k.swap(0, 6);
        } else {
            stats.rejected_steps += 1;
            if h_try <= REF_H_MIN * (1.0 + 1e-9) {
                return Err(Error::FiniteTimeBlowup { t });
            }
        }
        let factor = (0.9 * est.powf(-0.2)).clamp(0.2, 5.0);
        h = (h_try * factor).max(REF_H_MIN);
    }
    Ok(Trajectory {
        times,
        states,
        stats,
    })
}
