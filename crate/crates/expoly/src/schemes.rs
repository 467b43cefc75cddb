//! Coefficient tables of the collocation discretizations: the implicit
//! scheme on the zeros of E_n0 and the explicit recurrence scheme that
//! bootstraps degree k from degree k-1, including dense-output rows.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::basis::ExpoBasis;
use crate::error::Result;
use crate::genmethods::ButcherTableau;

/// Linear combination over the mixed basis {t, S_k1(beta, .), ..., S_kk(beta, .)}.
///
/// All stage functions (Q, G, R) are kept in this coefficient form so that
/// derivatives and the dense-output rows are exact linear algebra instead of
/// nested numerical differentiation.
#[derive(Debug, Clone)]
pub struct StageFunction {
    k: usize,
    beta: f64,
    coef: Vec<f64>,
}

impl StageFunction {
    fn new(k: usize, beta: f64, coef: Vec<f64>) -> Self {
        debug_assert_eq!(coef.len(), k + 1);
        Self { k, beta, coef }
    }

    /// Coefficients: index 0 multiplies t, index j multiplies S_kj.
    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    pub fn level(&self) -> usize {
        self.k
    }

    /// Evaluates the combination at t.
    pub fn value(&self, t: f64) -> f64 {
        let mut acc = self.coef[0] * t;
        if self.k > 0 {
            let s = s_values(self.k, self.beta, t);
            for j in 1..=self.k {
                acc += self.coef[j] * s[j - 1];
            }
        }
        acc
    }

    /// Evaluates d/dt of the combination at t (S'_kj(beta, t) = E_kj(beta t)).
    pub fn derivative(&self, t: f64) -> f64 {
        let mut acc = self.coef[0];
        if self.k > 0 {
            let tail = e_values(self.k, self.beta * t);
            for j in 1..=self.k {
                acc += self.coef[j] * tail[j - 1];
            }
        }
        acc
    }
}

/// S_k1(beta, t) .. S_kk(beta, t) in one recurrence pass.
fn s_values(k: usize, beta: f64, t: f64) -> Vec<f64> {
    let e = e_values(k, beta * t);
    // S_kj = (1 - E_kj - 2 sum_{l>j} E_kl) / (beta j)
    let mut out = vec![0.0; k];
    let mut tail_sum = 0.0;
    for j in (1..=k).rev() {
        out[j - 1] = (1.0 - e[j - 1] - 2.0 * tail_sum) / (beta * j as f64);
        tail_sum += e[j - 1];
    }
    out
}

/// E_k1(u) .. E_kk(u) via the downward recurrence.
fn e_values(k: usize, u: f64) -> Vec<f64> {
    let kf = k as f64;
    let mut e = vec![0.0; k];
    e[k - 1] = (-kf * u).exp();
    if k == 1 {
        return e;
    }
    e[k - 2] = (2.0 * kf - 1.0) * (-(kf - 1.0) * u).exp() - 2.0 * kf * e[k - 1];
    let eu = u.exp();
    for j in (2..k).rev() {
        let jf = j as f64;
        let a = (2.0 * jf + 1.0) * (kf + jf) * (kf - jf + 1.0);
        let b = (2.0 * jf - 1.0) * 2.0 * jf * (2.0 * jf + 1.0);
        let c = 4.0 * jf * (kf * kf + jf * jf + kf);
        let d = (2.0 * jf - 1.0) * (kf - jf) * (kf + jf + 1.0);
        e[j - 2] = ((b * eu - c) * e[j - 1] - d * e[j]) / a;
    }
    e
}

/// Entry (j, l) of the coupling matrix: 2(-1)^l off the diagonal, -1 on odd
/// and 3 on even diagonal positions.
pub(crate) fn coupling(j: usize, l: usize) -> f64 {
    if j != l {
        if l % 2 == 0 {
            2.0
        } else {
            -2.0
        }
    } else if l % 2 == 1 {
        -1.0
    } else {
        3.0
    }
}

/// Builds Q_k0, Q_k1, ..., Q_kk for the given basis, as combinations over
/// {t, S_k1(beta, .), ..., S_kk(beta, .)}.
pub fn q_functions(b: &ExpoBasis, beta: f64) -> Vec<StageFunction> {
    let k = b.degree();
    let sign_k = if k % 2 == 0 { 1.0 } else { -1.0 };
    let mut out = Vec::with_capacity(k + 1);
    let mut q0 = vec![-2.0 * sign_k; k + 1];
    q0[0] = sign_k;
    out.push(StageFunction::new(k, beta, q0));
    for s in 1..=k {
        let rho = b.rho()[s - 1];
        let mut coef = vec![0.0; k + 1];
        let mut t_sum = 0.0;
        for l in 1..=k {
            let sign_l = if l % 2 == 0 { 1.0 } else { -1.0 };
            t_sum += l as f64 * b.nodal_value(l, s) * sign_l;
        }
        coef[0] = -2.0 * rho * t_sum;
        for j in 1..=k {
            let mut sum = 0.0;
            for l in 1..=k {
                sum += l as f64 * b.nodal_value(l, s) * coupling(j, l);
            }
            coef[j] = 2.0 * rho * sum;
        }
        out.push(StageFunction::new(k, beta, coef));
    }
    out
}

/// Implicit collocation tables: stage p advances to the fraction nu_p of the
/// step using the weighted rhs values at all collocation points.
#[derive(Debug, Clone)]
pub struct ImplicitScheme {
    n: usize,
    lambda_nn: f64,
    nu: Vec<f64>,
    sigma0: Vec<f64>,
    sigma: Vec<Vec<f64>>,
}

impl ImplicitScheme {
    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn lambda_nn(&self) -> f64 {
        self.lambda_nn
    }

    /// Step fractions nu_p = lambda_np / lambda_nn, p = 1..n.
    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    /// Weights sigma_p0 of the initial-point rhs, p = 1..n.
    pub fn sigma0(&self) -> &[f64] {
        &self.sigma0
    }

    /// Weight matrix sigma_ps (row p, column s, both 1-based internally).
    pub fn sigma(&self) -> &[Vec<f64>] {
        &self.sigma
    }

    /// Recasts the scheme as an (n+1)-stage stiffly accurate tableau with
    /// c = (0, nu_1, ..., nu_n).
    pub fn to_tableau(&self) -> ButcherTableau {
        let n = self.n;
        let mut a = vec![vec![0.0; n + 1]; n + 1];
        for p in 1..=n {
            a[p][0] = self.sigma0[p - 1];
            for s in 1..=n {
                a[p][s] = self.sigma[p - 1][s - 1];
            }
        }
        let b = a[n].clone();
        let mut c = vec![0.0];
        c.extend_from_slice(&self.nu);
        ButcherTableau::new(format!("implicit{n}"), a, b, c)
    }
}

/// Explicit recurrence tables: stage p consumes only the rhs values
/// K_0..K_{p-1}, and the end row sigma_out combines all n+1 of them.
#[derive(Debug, Clone)]
pub struct ExplicitScheme {
    n: usize,
    lambda_nn: f64,
    nu: Vec<f64>,
    mu: Vec<Vec<f64>>,
    sigma_out: Vec<f64>,
    dense: Vec<Vec<f64>>,
}

impl ExplicitScheme {
    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn lambda_nn(&self) -> f64 {
        self.lambda_nn
    }

    /// Step fractions nu_p, p = 1..n.
    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    /// Stage rows: mu[p-1] has the p coefficients mu_np0 .. mu_np(p-1).
    pub fn mu(&self) -> &[Vec<f64>] {
        &self.mu
    }

    /// End-row weights sigma_nn0 .. sigma_nnn (n+1 entries).
    pub fn sigma_out(&self) -> &[f64] {
        &self.sigma_out
    }

    /// Dense-output rows: row r holds the coefficients of the final stage
    /// function R_nr over {t, S_n1(1, .), ..., S_nn(1, .)}.
    pub fn dense(&self) -> &[Vec<f64>] {
        &self.dense
    }

    /// The final stage function R_nr as an evaluable object.
    pub fn dense_row(&self, r: usize) -> StageFunction {
        StageFunction::new(self.n, 1.0, self.dense[r].clone())
    }

    /// Evaluates every dense row R_n0(tau) .. R_nn(tau) in one basis pass.
    pub fn dense_values(&self, tau: f64) -> Vec<f64> {
        let s = s_values(self.n, 1.0, tau);
        self.dense
            .iter()
            .map(|row| {
                let mut acc = row[0] * tau;
                for j in 1..=self.n {
                    acc += row[j] * s[j - 1];
                }
                acc
            })
            .collect()
    }

    /// Recasts the scheme as an (n+1)-stage explicit tableau with
    /// c = (0, nu_1, ..., nu_n) and b = sigma_out.
    pub fn to_tableau(&self) -> ButcherTableau {
        let n = self.n;
        let mut a = vec![vec![0.0; n + 1]; n + 1];
        for p in 1..=n {
            for s in 0..p {
                a[p][s] = self.mu[p - 1][s];
            }
        }
        let mut c = vec![0.0];
        c.extend_from_slice(&self.nu);
        ButcherTableau::new(format!("explicit{n}"), a, self.sigma_out.clone(), c)
    }
}

/// Builds (and caches) the implicit tables for degree n.
pub fn build_implicit(n: usize) -> Result<Arc<ImplicitScheme>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<ImplicitScheme>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&n) {
        return Ok(hit.clone());
    }
    let built = Arc::new(build_implicit_fresh(n)?);
    cache.lock().unwrap().insert(n, built.clone());
    Ok(built)
}

fn build_implicit_fresh(n: usize) -> Result<ImplicitScheme> {
    // The shared basis enforces the conditioning gate; the tables themselves
    // come from the double-double assembly so every entry is the nearest
    // double to its exact value.
    shared_basis(n)?;
    let t = crate::ddbuild::implicit_tables(n)?;
    Ok(ImplicitScheme {
        n,
        lambda_nn: t.lambda_nn,
        nu: t.nu,
        sigma0: t.sigma0,
        sigma: t.sigma,
    })
}

/// Builds (and caches) the explicit tables for degree n.
pub fn build_explicit(n: usize) -> Result<Arc<ExplicitScheme>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<ExplicitScheme>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&n) {
        return Ok(hit.clone());
    }
    let built = Arc::new(build_explicit_fresh(n)?);
    cache.lock().unwrap().insert(n, built.clone());
    Ok(built)
}

fn build_explicit_fresh(n: usize) -> Result<ExplicitScheme> {
    // Same split as the implicit builder: f64 basis as the conditioning
    // gate, double-double assembly for the stored tables.
    shared_basis(n)?;
    let t = crate::ddbuild::explicit_tables(n)?;
    Ok(ExplicitScheme {
        n,
        lambda_nn: t.lambda_nn,
        nu: t.nu,
        mu: t.mu,
        sigma_out: t.sigma_out,
        dense: t.dense,
    })
}

fn shared_basis(n: usize) -> Result<Arc<ExpoBasis>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<ExpoBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&n) {
        return Ok(hit.clone());
    }
    let built = Arc::new(ExpoBasis::new(n)?);
    cache.lock().unwrap().insert(n, built.clone());
    Ok(built)
}

impl std::fmt::Display for ImplicitScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "implicit collocation scheme, degree {}", self.n)
    }
}

impl std::fmt::Display for ExplicitScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "explicit recurrence scheme, degree {}", self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn q_level_one_matches_hand_expansion() {
        let b = ExpoBasis::new(1).unwrap();
        let q = q_functions(&b, 1.0);
        assert_eq!(q.len(), 2);
        assert!((q[0].coefficients()[0] + 1.0).abs() < 1e-14);
        assert!((q[0].coefficients()[1] - 2.0).abs() < 1e-14);
        assert!((q[1].coefficients()[0] - 2.0).abs() < 1e-14);
        assert!((q[1].coefficients()[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn q_functions_vanish_at_origin() {
        for k in 1..=6 {
            let b = ExpoBasis::new(k).unwrap();
            for q in q_functions(&b, 1.3) {
                assert_eq!(q.value(0.0), 0.0);
            }
        }
    }

    #[test]
    fn q_functions_sum_to_identity() {
        // Summing Q_k0..Q_kk must return the function t itself: the
        // t-coefficients add to 1 and every S-coefficient cancels.
        for k in 1..=8 {
            let b = ExpoBasis::new(k).unwrap();
            let q = q_functions(&b, 1.0);
            let mut total = vec![0.0; k + 1];
            for f in &q {
                for (t, c) in total.iter_mut().zip(f.coefficients()) {
                    *t += c;
                }
            }
            assert!((total[0] - 1.0).abs() < 1e-12, "k={k}: {:?}", total);
            for &c in &total[1..] {
                assert!(c.abs() < 1e-11, "k={k}: {:?}", total);
            }
        }
    }

    #[test]
    fn q_derivatives_are_cardinal_at_stage_points() {
        for k in 1..=6 {
            let b = ExpoBasis::new(k).unwrap();
            let q = q_functions(&b, 1.0);
            let mut points = vec![0.0];
            points.extend_from_slice(b.lambda());
            for (r, f) in q.iter().enumerate() {
                for (s, &t) in points.iter().enumerate() {
                    let expect = if r == s { 1.0 } else { 0.0 };
                    assert!(
                        (f.derivative(t) - expect).abs() < 1e-10,
                        "k={k} r={r} s={s}"
                    );
                }
            }
        }
    }

    #[test]
    fn implicit_n1_printed_coefficients() {
        let s = build_implicit(1).unwrap();
        assert_eq!(s.nu(), &[1.0]);
        assert!((s.sigma0()[0] - (1.0 / LN2 - 1.0)).abs() < 1e-14);
        assert!((s.sigma()[0][0] - (2.0 - 1.0 / LN2)).abs() < 1e-14);
    }

    #[test]
    fn explicit_n1_printed_coefficients() {
        let s = build_explicit(1).unwrap();
        assert_eq!(s.mu()[0], vec![1.0]);
        assert!((s.sigma_out()[0] - (1.0 / LN2 - 1.0)).abs() < 1e-14);
        assert!((s.sigma_out()[1] - (2.0 - 1.0 / LN2)).abs() < 1e-14);
        assert!((s.nu()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn explicit_and_implicit_share_nu() {
        for n in 1..=8 {
            let e = build_explicit(n).unwrap();
            let i = build_implicit(n).unwrap();
            for (a, b) in e.nu().iter().zip(i.nu()) {
                assert!((a - b).abs() < 1e-14, "n={n}");
            }
            assert!((e.nu()[n - 1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn end_row_weights_sum_to_one() {
        for n in 1..=12 {
            let e = build_explicit(n).unwrap();
            let sum: f64 = e.sigma_out().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "explicit n={n}: {sum}");
            let i = build_implicit(n).unwrap();
            let sum = i.sigma0()[n - 1] + i.sigma()[n - 1].iter().sum::<f64>();
            assert!((sum - 1.0).abs() < 1e-12, "implicit n={n}: {sum}");
        }
    }

    #[test]
    fn dense_rows_reproduce_end_weights() {
        for n in 1..=8 {
            let e = build_explicit(n).unwrap();
            let lam = e.lambda_nn();
            for (r, sigma) in e.sigma_out().iter().enumerate() {
                let v = e.dense_row(r).value(lam) / lam;
                assert!((v - sigma).abs() < 1e-12, "n={n} r={r}");
            }
        }
    }

    #[test]
    fn mu_rows_are_strictly_lower_triangular() {
        let e = build_explicit(6).unwrap();
        for (p, row) in e.mu().iter().enumerate() {
            assert_eq!(row.len(), p + 1);
        }
    }

    #[test]
    fn first_stage_predictor_is_scaled_euler() {
        for n in 2..=6 {
            let e = build_explicit(n).unwrap();
            assert!((e.mu()[0][0] - e.nu()[0]).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn builders_cache_per_degree() {
        let a = build_explicit(3).unwrap();
        let b = build_explicit(3).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }
}
