//! Orthogonal exponential polynomials, their zeros, weights, and
//! antiderivatives.
//!
//! The family E_nj(t) consists of polynomials in x = exp(-t), orthogonal on
//! [0, inf) with unit weight. E_n0 has n simple zeros lambda_n1 < ... <
//! lambda_nn; together with weights rho_ns they form a quadrature rule exact
//! for the rest of the family. Everything downstream (collocation tables,
//! stability functions) is built from these objects.

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 32;
pub const MAX_GAUSS_NODES: usize = 64;

/// Gauss-Legendre quadrature rule on [-1, 1].
///
/// Nodes ascend and are symmetric about zero; weights are positive and sum
/// to 2.
///
/// ```
/// let rule = expoly::basis::GaussLegendreRule::new(2).unwrap();
/// let third = 1.0 / 3f64.sqrt();
/// assert!((rule.nodes()[1] - third).abs() < 1e-15);
/// assert!(rule.weights().iter().all(|w| (w - 1.0).abs() < 1e-15));
/// ```
#[derive(Debug, Clone)]
pub struct GaussLegendreRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendreRule {
    /// Computes the n-point rule by Newton iteration on the Legendre
    /// polynomial, starting from the Chebyshev-like asymptotic guesses.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_GAUSS_NODES {
            return Err(Error::InvalidDegree {
                n,
                max: MAX_GAUSS_NODES,
            });
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        // Roots come in +/- pairs; resolve the positive half and mirror so
        // the symmetry invariant holds bitwise.
        let half = n / 2;
        for k in 0..half + n % 2 {
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_pair(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-15 * x.abs().max(1e-300) {
                    let (p2, d2) = legendre_pair(n, x);
                    dp = d2;
                    x -= p2 / d2;
                    break;
                }
            }
            if n % 2 == 1 && k == half {
                x = 0.0;
                let (_, d) = legendre_pair(n, 0.0);
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // k counts down from the largest root.
            nodes[n - 1 - k] = x;
            weights[n - 1 - k] = w;
            nodes[k] = -x;
            weights[k] = w;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in ascending order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule to `f` on [-1, 1].
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
}

/// Legendre P_n(x) and its derivative by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let next = ((2.0 * jf - 1.0) * x * p - (jf - 1.0) * p_prev) / jf;
        p_prev = p;
        p = next;
    }
    // P'_n from the standard relation; at |x| = 1 the denominator vanishes
    // but Newton never lands there for interior roots.
    let d = if x.abs() < 1.0 {
        (n as f64) * (x * p - p_prev) / (x * x - 1.0)
    } else {
        x.signum().powi(n as i32 + 1) * (n * (n + 1)) as f64 / 2.0
    };
    (p, d)
}

/// Zeros, weights, and nodal values of the degree-n family.
///
/// `lambda[s-1]` is the s-th zero of E_n0 (ascending), `rho[s-1]` the
/// matching quadrature weight, and `nodal_values[j-1][s-1]` caches
/// E_nj(lambda_ns) for the hot collocation paths.
#[derive(Debug, Clone)]
pub struct ExpoBasis {
    n: usize,
    lambda: Vec<f64>,
    rho: Vec<f64>,
    nodal_values: Vec<Vec<f64>>,
}

impl ExpoBasis {
    /// Builds the degree-n tables.
    ///
    /// The zeros come from the Gauss-Legendre nodes through the exact change
    /// of variable z = 1 - 2 exp(-lambda); the weights through
    /// rho = w / (1 - z). The construction is rejected if the discrete
    /// orthogonality residual exceeds 1e-8 (the downward recurrence mixes
    /// coefficients growing like 8 j^3, so very large n would degrade).
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_DEGREE {
            return Err(Error::InvalidDegree { n, max: MAX_DEGREE });
        }
        let rule = GaussLegendreRule::new(n)?;
        let lambda: Vec<f64> = rule.nodes().iter().map(|&z| -((1.0 - z) / 2.0).ln()).collect();
        let rho: Vec<f64> = rule
            .nodes()
            .iter()
            .zip(rule.weights())
            .map(|(&z, &w)| w / (1.0 - z))
            .collect();
        let nodal_values: Vec<Vec<f64>> = (1..=n)
            .map(|j| lambda.iter().map(|&t| eval_e_unchecked(n, j, t)).collect())
            .collect();
        let basis = Self {
            n,
            lambda,
            rho,
            nodal_values,
        };
        let report = basis.orthogonality_report();
        let residual = report.pair_max.max(report.integral_max);
        if !residual.is_finite() || residual > 1e-8 {
            return Err(Error::IllConditioned { n, residual });
        }
        Ok(basis)
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    /// Zeros of E_n0, ascending.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Quadrature weights matching `lambda`.
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// Largest zero lambda_nn.
    pub fn lambda_max(&self) -> f64 {
        self.lambda[self.n - 1]
    }

    /// Cached E_nj(lambda_ns), 1-based in both j and s.
    pub fn nodal_value(&self, j: usize, s: usize) -> f64 {
        self.nodal_values[j - 1][s - 1]
    }

    /// Max residuals of the discrete orthogonality relation and of the
    /// integral identity, over all index pairs.
    pub fn orthogonality_report(&self) -> OrthogonalityReport {
        let n = self.n;
        let mut pair_max: f64 = 0.0;
        let mut integral_max: f64 = 0.0;
        for j in 1..=n {
            for l in 1..=n {
                let sum: f64 = (1..=n)
                    .map(|s| self.rho[s - 1] * self.nodal_value(j, s) * self.nodal_value(l, s))
                    .sum();
                let target = if j == l { 1.0 / (j + l) as f64 } else { 0.0 };
                pair_max = pair_max.max((sum - target).abs());
            }
            let sum: f64 = (1..=n).map(|s| self.rho[s - 1] * self.nodal_value(j, s)).sum();
            integral_max = integral_max.max((sum - 1.0 / j as f64).abs());
        }
        OrthogonalityReport {
            pair_max,
            integral_max,
        }
    }
}

/// Pair of worst-case residuals reported by [`ExpoBasis::orthogonality_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthogonalityReport {
    pub pair_max: f64,
    pub integral_max: f64,
}

/// Convenience wrapper: builds the basis and reports its residuals.
pub fn orthogonality_report(n: usize) -> Result<OrthogonalityReport> {
    Ok(ExpoBasis::new(n)?.orthogonality_report())
}

/// Evaluates E_nj(t).
///
/// Uses the downward recurrence from E_nn(t) = exp(-nt) and
/// E_{n,n-1}(t) = (2n-1)exp(-(n-1)t) - 2n exp(-nt); the j = 1 instance
/// extends the family to E_n0.
///
/// ```
/// // E_21(t) = 3 exp(-t) - 4 exp(-2t)
/// let v = expoly::basis::eval_e(2, 1, 0.3).unwrap();
/// assert!((v - (3.0 * (-0.3f64).exp() - 4.0 * (-0.6f64).exp())).abs() < 1e-15);
/// ```
pub fn eval_e(n: usize, j: usize, t: f64) -> Result<f64> {
    if n == 0 || n > MAX_DEGREE {
        return Err(Error::InvalidDegree { n, max: MAX_DEGREE });
    }
    if j > n {
        return Err(Error::IndexOutOfRange {
            what: "basis function",
            index: j,
            degree: n,
        });
    }
    Ok(eval_e_unchecked(n, j, t))
}

fn eval_e_unchecked(n: usize, j: usize, t: f64) -> f64 {
    eval_e_tail(n, j, t)[0]
}

/// E_nj(t), E_{n,j+1}(t), ..., E_nn(t) for the given lower index j.
fn eval_e_tail(n: usize, j: usize, t: f64) -> Vec<f64> {
    let nf = n as f64;
    let mut tail = vec![0.0; n - j + 1];
    tail[n - j] = (-nf * t).exp();
    if j == n {
        return tail;
    }
    tail[n - j - 1] = (2.0 * nf - 1.0) * (-(nf - 1.0) * t).exp() - 2.0 * nf * tail[n - j];
    if j == n - 1 {
        return tail;
    }
    let et = t.exp();
    for i in (1..n).rev() {
        // Step the lower index from i to i-1; stop once j is reached.
        if i <= j {
            break;
        }
        let jf = i as f64;
        let a = (2.0 * jf + 1.0) * (nf + jf) * (nf - jf + 1.0);
        let b = (2.0 * jf - 1.0) * 2.0 * jf * (2.0 * jf + 1.0);
        let c = 4.0 * jf * (nf * nf + jf * jf + nf);
        let d = (2.0 * jf - 1.0) * (nf - jf) * (nf + jf + 1.0);
        let cur = tail[i - j];
        let above = tail[i - j + 1];
        tail[i - j - 1] = ((b * et - c) * cur - d * above) / a;
    }
    tail
}

/// Evaluates the antiderivative S_nj(beta, t) of E_nj(beta s) ds from 0 to t.
///
/// Closed form: S_nj = (1/(beta j)) (1 - E_nj(beta t) - 2 sum_{l>j} E_nl(beta t)).
pub fn eval_s(n: usize, j: usize, beta: f64, t: f64) -> Result<f64> {
    check_s_args(n, j, beta)?;
    let tail = eval_e_tail(n, j, beta * t);
    // 1 - E_nj - 2 (E_{n,j+1} + ... + E_nn); at t = 0 the alternating signs
    // cancel to exactly zero in integer f64 arithmetic.
    let mut acc = 1.0 - tail[0];
    for &e in &tail[1..] {
        acc -= 2.0 * e;
    }
    Ok(acc / (beta * j as f64))
}

/// Derivative of [`eval_s`] in t, i.e. the integrand E_nj(beta t).
pub fn eval_s_derivative(n: usize, j: usize, beta: f64, t: f64) -> Result<f64> {
    check_s_args(n, j, beta)?;
    Ok(eval_e_unchecked(n, j, beta * t))
}

fn check_s_args(n: usize, j: usize, beta: f64) -> Result<()> {
    if n == 0 || n > MAX_DEGREE {
        return Err(Error::InvalidDegree { n, max: MAX_DEGREE });
    }
    if j == 0 || j > n {
        return Err(Error::IndexOutOfRange {
            what: "antiderivative",
            index: j,
            degree: n,
        });
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "scaling factor must be positive and finite, got {beta}"
        )));
    }
    Ok(())
}
