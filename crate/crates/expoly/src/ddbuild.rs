//! Double-double assembly of the collocation tables.
//!
//! The schemes store plain f64 tables, and a last-bit error in a stored
//! coefficient survives into every printed document and every step taken
//! with it. Assembling the tables in ~31-digit arithmetic and rounding
//! exactly once makes each stored entry the nearest double to its exact
//! value, instead of whatever the f64 pipeline happens to drift to.
//!
//! twofloat supplies the error-free add/mul/div kernels; exp and ln are
//! reimplemented here because the crate's own transcendentals only reach
//! f64 accuracy, which is not enough to decide the final rounding.

use twofloat::TwoFloat;

use crate::basis::GaussLegendreRule;
use crate::error::Result;

type Dd = TwoFloat;

fn dd(x: f64) -> Dd {
    TwoFloat::from(x)
}

/// Quotient via a Newton-refined reciprocal. twofloat's own division forms
/// the residual 1 - b*(1/b) without an fma, which wipes out the low word
/// (1/3 comes back with lo = 0), so only its add and fma-based multiply are
/// trusted here.
fn div_dd(a: Dd, b: Dd) -> Dd {
    let x = dd(b.hi().recip());
    let x = x + x * (dd(1.0) - b * x);
    let x = x + x * (dd(1.0) - b * x);
    let q = a * x;
    q + (a - b * q) * x
}

/// ln 2 to double-double accuracy (tail frozen from a 50-digit evaluation).
fn ln2() -> Dd {
    TwoFloat::new_add(0.6931471805599453, 2.3190468138462996e-17)
}

/// exp by range reduction x = k ln 2 + r, |r| <= (ln 2)/2, with the Taylor
/// tail summed in double-double. Relative error stays below ~1e-29 over the
/// argument range the recurrences produce (|x| < 250).
fn exp_dd(x: Dd) -> Dd {
    let k = (x.hi() / std::f64::consts::LN_2).round();
    let r = x - ln2() * dd(k);
    let mut term = dd(1.0);
    let mut acc = dd(1.0);
    for i in 1..=26 {
        term = div_dd(term * r, dd(i as f64));
        acc += term;
        if term.abs() < acc.abs() * dd(1e-35) {
            break;
        }
    }
    acc * dd(2f64.powi(k as i32))
}

/// ln by Newton iteration on exp: l <- l + y exp(-l) - 1, seeded with the
/// f64 logarithm. Two steps take the seed's 1e-16 error below the
/// double-double noise floor.
fn ln_dd(y: Dd) -> Dd {
    debug_assert!(y.hi() > 0.0);
    let mut l = dd(y.hi().ln());
    for _ in 0..2 {
        l += y * exp_dd(-l) - dd(1.0);
    }
    l
}

/// Legendre P_n(x) and its derivative, same recurrence as the f64 rule.
fn legendre_pair(n: usize, x: Dd) -> (Dd, Dd) {
    let mut p_prev = dd(1.0);
    let mut p = x;
    if n == 0 {
        return (dd(1.0), dd(0.0));
    }
    for j in 2..=n {
        let jf = dd(j as f64);
        let next = div_dd((dd(2.0) * jf - dd(1.0)) * x * p - (jf - dd(1.0)) * p_prev, jf);
        p_prev = p;
        p = next;
    }
    let d = div_dd(dd(n as f64) * (x * p - p_prev), x * x - dd(1.0));
    (p, d)
}

/// Collocation data of one degree: zeros of E_k0, quadrature weights, and
/// the nodal values E_kj(lambda_ks), all in double-double.
struct Nodes {
    lambda: Vec<Dd>,
    rho: Vec<Dd>,
    nodal: Vec<Vec<Dd>>,
}

fn nodes(k: usize) -> Result<Nodes> {
    let rule = GaussLegendreRule::new(k)?;
    let mut lambda = Vec::with_capacity(k);
    let mut rho = Vec::with_capacity(k);
    for &z0 in rule.nodes() {
        // The f64 node seeds a short Newton polish; one step already lands
        // inside double-double accuracy, the extras are insurance.
        let mut z = dd(z0);
        if z0 != 0.0 {
            for _ in 0..3 {
                let (p, d) = legendre_pair(k, z);
                z -= div_dd(p, d);
            }
        }
        let (_, d) = legendre_pair(k, z);
        let w = div_dd(dd(2.0), (dd(1.0) - z * z) * d * d);
        lambda.push(-ln_dd(div_dd(dd(1.0) - z, dd(2.0))));
        rho.push(div_dd(w, dd(1.0) - z));
    }
    let nodal = (1..=k)
        .map(|j| lambda.iter().map(|&t| e_all(k, t)[j - 1]).collect())
        .collect();
    Ok(Nodes { lambda, rho, nodal })
}

/// E_k1(u) .. E_kk(u) via the downward recurrence.
fn e_all(k: usize, u: Dd) -> Vec<Dd> {
    let kf = k as f64;
    let mut e = vec![dd(0.0); k];
    e[k - 1] = exp_dd(-dd(kf) * u);
    if k == 1 {
        return e;
    }
    e[k - 2] = dd(2.0 * kf - 1.0) * exp_dd(-dd(kf - 1.0) * u) - dd(2.0 * kf) * e[k - 1];
    let eu = exp_dd(u);
    for j in (2..k).rev() {
        let jf = j as f64;
        // The coefficients are small exact integers; f64 literals suffice.
        let a = (2.0 * jf + 1.0) * (kf + jf) * (kf - jf + 1.0);
        let b = (2.0 * jf - 1.0) * 2.0 * jf * (2.0 * jf + 1.0);
        let c = 4.0 * jf * (kf * kf + jf * jf + kf);
        let d = (2.0 * jf - 1.0) * (kf - jf) * (kf + jf + 1.0);
        e[j - 2] = div_dd((dd(b) * eu - dd(c)) * e[j - 1] - dd(d) * e[j], dd(a));
    }
    e
}

/// S_k1(beta, t) .. S_kk(beta, t).
fn s_all(k: usize, beta: Dd, t: Dd) -> Vec<Dd> {
    let e = e_all(k, beta * t);
    let mut out = vec![dd(0.0); k];
    let mut tail_sum = dd(0.0);
    for j in (1..=k).rev() {
        out[j - 1] = div_dd(dd(1.0) - e[j - 1] - dd(2.0) * tail_sum, beta * dd(j as f64));
        tail_sum += e[j - 1];
    }
    out
}

/// Combination over {t, S_k1(beta, .), ..., S_kk(beta, .)}, the
/// double-double twin of the public stage functions.
struct Stage {
    k: usize,
    beta: Dd,
    coef: Vec<Dd>,
}

impl Stage {
    fn value(&self, t: Dd) -> Dd {
        let mut acc = self.coef[0] * t;
        if self.k > 0 {
            let s = s_all(self.k, self.beta, t);
            for j in 1..=self.k {
                acc += self.coef[j] * s[j - 1];
            }
        }
        acc
    }

    fn derivative(&self, t: Dd) -> Dd {
        let mut acc = self.coef[0];
        if self.k > 0 {
            let tail = e_all(self.k, self.beta * t);
            for j in 1..=self.k {
                acc += self.coef[j] * tail[j - 1];
            }
        }
        acc
    }
}

/// Q_k0 .. Q_kk over the given collocation data.
fn q_rows(nd: &Nodes, beta: Dd) -> Vec<Stage> {
    let k = nd.lambda.len();
    let sign_k = if k % 2 == 0 { 1.0 } else { -1.0 };
    let mut out = Vec::with_capacity(k + 1);
    let mut q0 = vec![dd(-2.0 * sign_k); k + 1];
    q0[0] = dd(sign_k);
    out.push(Stage { k, beta, coef: q0 });
    for s in 1..=k {
        let rho = nd.rho[s - 1];
        let mut coef = vec![dd(0.0); k + 1];
        let mut t_sum = dd(0.0);
        for l in 1..=k {
            let sign_l = if l % 2 == 0 { 1.0 } else { -1.0 };
            t_sum += dd(l as f64 * sign_l) * nd.nodal[l - 1][s - 1];
        }
        coef[0] = dd(-2.0) * rho * t_sum;
        for (j, c) in coef.iter_mut().enumerate().skip(1) {
            let mut sum = dd(0.0);
            for l in 1..=k {
                sum += dd(l as f64 * crate::schemes::coupling(j, l)) * nd.nodal[l - 1][s - 1];
            }
            *c = dd(2.0) * rho * sum;
        }
        out.push(Stage { k, beta, coef });
    }
    out
}

pub(crate) struct ImplicitTables {
    pub lambda_nn: f64,
    pub nu: Vec<f64>,
    pub sigma0: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

pub(crate) fn implicit_tables(n: usize) -> Result<ImplicitTables> {
    let nd = nodes(n)?;
    let lam_nn = nd.lambda[n - 1];
    let q = q_rows(&nd, dd(1.0));
    let mut nu = Vec::with_capacity(n);
    let mut sigma0 = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for p in 1..=n {
        let t_p = nd.lambda[p - 1];
        nu.push(f64::from(div_dd(t_p, lam_nn)));
        sigma0.push(f64::from(div_dd(q[0].value(t_p), lam_nn)));
        sigma.push(
            (1..=n)
                .map(|s| f64::from(div_dd(q[s].value(t_p), lam_nn)))
                .collect(),
        );
    }
    Ok(ImplicitTables {
        lambda_nn: f64::from(lam_nn),
        nu,
        sigma0,
        sigma,
    })
}

pub(crate) struct ExplicitTables {
    pub lambda_nn: f64,
    pub nu: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub sigma_out: Vec<f64>,
    pub dense: Vec<Vec<f64>>,
}

pub(crate) fn explicit_tables(n: usize) -> Result<ExplicitTables> {
    let nd_n = nodes(n)?;
    let lam_nn = nd_n.lambda[n - 1];

    let mut nu = Vec::with_capacity(n);
    let mut mu = Vec::with_capacity(n);
    // Level k-1 stage functions R_{k-1,0} .. R_{k-1,k-1}; level 0 is {t}.
    let mut r_prev = vec![Stage {
        k: 0,
        beta: dd(1.0),
        coef: vec![dd(1.0)],
    }];

    for k in 1..=n {
        let nd_k = nodes(k)?;
        // Scale the level so that its last collocation point lands on the
        // zero lambda_nk of the outer basis: beta_k t_kk = lambda_kk.
        let t_kk = nd_n.lambda[k - 1];
        let beta_k = div_dd(nd_k.lambda[k - 1], t_kk);
        let q = q_rows(&nd_k, beta_k);

        nu.push(f64::from(div_dd(t_kk, lam_nn)));
        mu.push(
            r_prev
                .iter()
                .map(|f| f64::from(div_dd(f.value(t_kk), lam_nn)))
                .collect(),
        );

        let mut r_cur: Vec<Stage> = Vec::with_capacity(k + 1);
        if k == 1 {
            r_cur = q;
        } else {
            // gamma_ksr: derivative of the previous-level function r at the
            // reused stage points t_ks, s = 1..k-1.
            let t_ks: Vec<Dd> = (1..k).map(|s| div_dd(nd_k.lambda[s - 1], beta_k)).collect();
            let gamma: Vec<Vec<Dd>> = t_ks
                .iter()
                .map(|&t| r_prev.iter().map(|f| f.derivative(t)).collect())
                .collect();
            for r in 0..k {
                let mut coef = vec![dd(0.0); k + 1];
                if r == 0 {
                    coef.copy_from_slice(&q[0].coef);
                }
                for s in 1..k {
                    let g = gamma[s - 1][r];
                    for (c, qc) in coef.iter_mut().zip(&q[s].coef) {
                        *c += g * *qc;
                    }
                }
                r_cur.push(Stage {
                    k,
                    beta: beta_k,
                    coef,
                });
            }
            r_cur.push(Stage {
                k,
                beta: beta_k,
                coef: q[k].coef.clone(),
            });
        }
        r_prev = r_cur;
    }

    let sigma_out = r_prev
        .iter()
        .map(|f| f64::from(div_dd(f.value(lam_nn), lam_nn)))
        .collect();
    let dense = r_prev
        .iter()
        .map(|f| f.coef.iter().map(|&c| f64::from(c)).collect())
        .collect();
    Ok(ExplicitTables {
        lambda_nn: f64::from(lam_nn),
        nu,
        mu,
        sigma_out,
        dense,
    })
}
