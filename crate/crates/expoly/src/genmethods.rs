//! Weighted generalizations of the exponential polynomial family via the
//! Rodrigues-type formula, and the two published implicit n=2 procedures
//! (one A-stable by design intent, one L-stable) as Butcher tableaux.

use crate::error::{Error, Result};

pub const MAX_RODRIGUES_DEGREE: usize = 8;
pub const MAX_WEIGHT_EXPONENT: u32 = 32;

/// Classic (A, b, c) description of a one-step Runge-Kutta-type method.
#[derive(Debug, Clone)]
pub struct ButcherTableau {
    label: String,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl ButcherTableau {
    /// Wraps raw arrays. Panics if the dimensions are inconsistent; use
    /// [`ButcherTableau::validate`] for the numeric consistency checks.
    pub fn new(label: impl Into<String>, a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> Self {
        let s = c.len();
        assert_eq!(a.len(), s, "stage matrix must be square");
        assert!(a.iter().all(|row| row.len() == s), "stage matrix must be square");
        assert_eq!(b.len(), s, "weight vector length must match stages");
        Self {
            label: label.into(),
            a,
            b,
            c,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn stages(&self) -> usize {
        self.c.len()
    }

    pub fn a(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// True when the stage matrix is strictly lower triangular, so stages
    /// can be evaluated by forward substitution.
    pub fn is_explicit(&self) -> bool {
        self.a
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().skip(i).all(|&v| v == 0.0))
    }

    /// Checks first-order consistency: the weights sum to 1 and every stage
    /// row sums to its abscissa, both within 1e-12.
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.b.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "tableau {:?}: weights sum to {sum}, expected 1",
                self.label
            )));
        }
        for (i, row) in self.a.iter().enumerate() {
            let rs: f64 = row.iter().sum();
            if (rs - self.c[i]).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "tableau {:?}: row {i} sums to {rs}, abscissa is {}",
                    self.label, self.c[i]
                )));
            }
        }
        Ok(())
    }
}

/// Polynomial in x = exp(-t) generated by the Rodrigues-type formula for the
/// weight x^alpha (1-x)^beta, with exact integer coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedExpoPoly {
    pub n: usize,
    pub k: usize,
    pub alpha: u32,
    pub beta: u32,
    /// Ascending powers of x, constant term first; length n+1, entries below
    /// x^k are zero.
    pub coef: Vec<i128>,
}

impl WeightedExpoPoly {
    /// Evaluates the polynomial at x = exp(-t).
    pub fn eval(&self, t: f64) -> f64 {
        let x = (-t).exp();
        // Horner from the top power down.
        self.coef
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * x + c as f64)
    }

    /// The weight factor x^alpha (1-x)^beta at x = exp(-t).
    pub fn weight(&self, t: f64) -> f64 {
        let x = (-t).exp();
        x.powi(self.alpha as i32) * (1.0 - x).powi(self.beta as i32)
    }
}

fn binomial(n: u64, k: u64) -> Result<i128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul((n - i) as i128)
            .ok_or_else(|| Error::Internal("binomial overflow".into()))?;
        acc /= (i + 1) as i128;
    }
    Ok(acc)
}

/// Expands E^(alpha,beta)_nk as a polynomial in x = exp(-t).
///
/// The generating expression is x^(alpha+n+k) (1-x)^(beta+n-k),
/// differentiated n-k times, divided by (n-k)!, x^(alpha+k), and
/// (1-x)^beta. All steps run in exact integer arithmetic; residues in the
/// monomial or binomial divisions would indicate a bug and raise an
/// internal-consistency error.
pub fn rodrigues_expand(n: usize, k: usize, alpha: u32, beta: u32) -> Result<WeightedExpoPoly> {
    if n == 0 || n > MAX_RODRIGUES_DEGREE {
        return Err(Error::InvalidDegree {
            n,
            max: MAX_RODRIGUES_DEGREE,
        });
    }
    if k > n {
        return Err(Error::IndexOutOfRange {
            what: "generalized basis function",
            index: k,
            degree: n,
        });
    }
    if alpha > MAX_WEIGHT_EXPONENT || beta > MAX_WEIGHT_EXPONENT {
        return Err(Error::InvalidConfig(format!(
            "weight exponents limited to {MAX_WEIGHT_EXPONENT}, got alpha={alpha} beta={beta}"
        )));
    }
    let a = alpha as usize;
    let b = beta as usize;
    let order = n - k;

    // x^(a+n+k) (1-x)^(b+n-k), exponents a+n+k .. a+b+2n.
    let top = a + b + 2 * n;
    let mut dense = vec![0i128; top + 1];
    for i in 0..=(b + order) {
        let sign = if i % 2 == 0 { 1 } else { -1 };
        dense[a + n + k + i] = sign * binomial((b + order) as u64, i as u64)?;
    }

    // Differentiate n-k times and divide by (n-k)!: x^e picks up binom(e, order).
    let mut diffed = vec![0i128; top + 1 - order];
    for (e, &c) in dense.iter().enumerate() {
        if c != 0 {
            if e < order {
                return Err(Error::Internal(
                    "derivative dropped below degree zero".into(),
                ));
            }
            let factor = binomial(e as u64, order as u64)?;
            diffed[e - order] = c
                .checked_mul(factor)
                .ok_or_else(|| Error::Internal("coefficient overflow".into()))?;
        }
    }

    // Divide by x^(a+k): every surviving exponent must clear the prefactor.
    if diffed.iter().take(a + k).any(|&c| c != 0) {
        return Err(Error::Internal(
            "negative power survived the monomial division".into(),
        ));
    }
    let mut poly: Vec<i128> = diffed[a + k..].to_vec();

    // Divide by (1-x)^beta with exact synthetic division.
    for _ in 0..b {
        let m = poly.len() - 1;
        let mut q = vec![0i128; m];
        let mut carry = 0i128;
        for j in 0..m {
            carry = poly[j]
                .checked_add(carry)
                .ok_or_else(|| Error::Internal("division overflow".into()))?;
            q[j] = carry;
        }
        if poly[m] + carry != 0 {
            return Err(Error::Internal(
                "weight factor does not divide the derivative exactly".into(),
            ));
        }
        poly = q;
    }

    if poly.len() != n + 1 || poly[n] == 0 {
        return Err(Error::Internal(format!(
            "expansion degree mismatch: got {} terms for degree {n}",
            poly.len()
        )));
    }
    Ok(WeightedExpoPoly {
        n,
        k,
        alpha,
        beta,
        coef: poly,
    })
}

/// Zeros of E^(alpha,beta)_n0 in the t variable, ascending. Only the
/// closed-form degrees n = 1, 2 are supported.
pub fn gen_zeros(n: usize, alpha: u32, beta: u32) -> Result<Vec<f64>> {
    if n == 0 || n > 2 {
        return Err(Error::InvalidDegree { n, max: 2 });
    }
    let p = rodrigues_expand(n, 0, alpha, beta)?;
    let c: Vec<f64> = p.coef.iter().map(|&v| v as f64).collect();
    let no_zero = || Error::NoValidZero { alpha, beta };
    let mut roots_x = Vec::with_capacity(n);
    if n == 1 {
        let x = -c[0] / c[1];
        roots_x.push(x);
    } else {
        let disc = c[1] * c[1] - 4.0 * c[2] * c[0];
        if disc < 0.0 {
            return Err(no_zero());
        }
        let sq = disc.sqrt();
        // Stable quadratic formula: compute the larger-magnitude root first.
        let q = -0.5 * (c[1] + c[1].signum() * sq);
        roots_x.push(q / c[2]);
        roots_x.push(c[0] / q);
    }
    if roots_x.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(no_zero());
    }
    let mut t: Vec<f64> = roots_x.iter().map(|&x| -x.ln()).collect();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(t)
}

/// Reports the maximum nontrivial zero of E^(alpha, omega*alpha)_20 for each
/// requested alpha. No optimality claim is made; callers compare the values.
pub fn scan_gamma(omega: f64, alphas: &[u32]) -> Result<Vec<(u32, f64)>> {
    let mut out = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let beta_real = omega * alpha as f64;
        let beta = beta_real.round();
        if (beta_real - beta).abs() > 1e-9 || beta < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "omega * alpha must be a nonnegative integer, got {beta_real}"
            )));
        }
        let zeros = gen_zeros(2, alpha, beta as u32)?;
        out.push((alpha, zeros[1]));
    }
    Ok(out)
}

/// Interpolating functions e_20, e_21, e_22 of the A-stable construction,
/// as coefficient triples over {1, exp(-gamma2 t), exp(-2 gamma2 t)}.
#[derive(Debug, Clone)]
pub struct AStableInterpolants {
    pub gamma2: f64,
    pub nu1: f64,
    pub coef: [[f64; 3]; 3],
}

impl AStableInterpolants {
    /// Evaluates e_2i at t, i in 0..3.
    pub fn eval(&self, i: usize, t: f64) -> f64 {
        let x = (-self.gamma2 * t).exp();
        let c = &self.coef[i];
        c[0] + c[1] * x + c[2] * x * x
    }

    /// The interpolation nodes (0, nu1, 1).
    pub fn nodes(&self) -> [f64; 3] {
        [0.0, self.nu1, 1.0]
    }
}

fn astable2_constants() -> (f64, f64, f64, f64, f64, f64, f64, f64) {
    let s15 = 15f64.sqrt();
    let gamma2 = ((15.0 + s15) / 7.0).ln();
    let mu1 = ((8.0 + s15) / 7.0).ln();
    let nu1 = 1.0 - mu1 / gamma2;
    let q = (8.0 + s15) / 14.0;
    let q_hat = (8.0 - s15) / 14.0;
    let r = s15;
    let s = 3.0 * (1.0 + s15) / 4.0;
    let s_hat = 3.0 * (1.0 - s15) / 4.0;
    (gamma2, nu1, q, q_hat, r, s, s_hat, mu1)
}

/// The printed coefficients of the interpolating functions.
pub fn interpolants_astable2() -> AStableInterpolants {
    let (gamma2, nu1, ..) = astable2_constants();
    let s15 = 15f64.sqrt();
    AStableInterpolants {
        gamma2,
        nu1,
        coef: [
            [1.0, -30.0 / 7.0, 30.0 / 7.0],
            [-s15, (15.0 + 22.0 * s15) / 7.0, -(15.0 + 15.0 * s15) / 7.0],
            [s15, (15.0 - 22.0 * s15) / 7.0, -(15.0 - 15.0 * s15) / 7.0],
        ],
    }
}

/// The published 3-stage stiffly accurate tableau built on the weighted
/// family with alpha = beta = 6.
pub fn astable2_tableau() -> ButcherTableau {
    let (gamma2, nu1, q, q_hat, r, s, s_hat, _) = astable2_constants();
    let row1 = vec![
        nu1 - q_hat / gamma2,
        -r * nu1 - s_hat / gamma2,
        r * nu1 + (q_hat + s_hat) / gamma2,
    ];
    let row2 = vec![1.0 - q / gamma2, -r + (q + s) / gamma2, r - s / gamma2];
    ButcherTableau::new(
        "astable2",
        vec![vec![0.0, 0.0, 0.0], row1, row2.clone()],
        row2,
        vec![0.0, nu1, 1.0],
    )
}

/// The published 2-stage stiffly accurate L-stable tableau (no stage at the
/// left endpoint).
pub fn lstable2_tableau() -> ButcherTableau {
    let s3 = 3f64.sqrt();
    let beta2 = (3.0 + s3).ln();
    let mu1 = (2.0 + s3).ln();
    let nu1 = 1.0 - mu1 / beta2;
    let q = (3.0 - s3) / 6.0;
    let r = s3 / 6.0;
    let s = q + 2.0 * r;
    let row2 = vec![q + r / beta2, s - r / beta2];
    ButcherTableau::new(
        "lstable2",
        vec![vec![q * nu1 + r / beta2, s * nu1 - r / beta2], row2.clone()],
        row2,
        vec![nu1, 1.0],
    )
}
