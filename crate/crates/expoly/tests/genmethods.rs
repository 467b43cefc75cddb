//! The generalized weighted family: Rodrigues expansion consistency and
//! weighted orthogonality checked by direct quadrature.

use expoly::basis::{eval_e, GaussLegendreRule};
use expoly::genmethods::rodrigues_expand;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Composite 64-node Gauss rule for integrals over [0, hi] in t.
fn integrate_t(hi: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let rule = GaussLegendreRule::new(64).unwrap();
    let w = hi / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = (p as f64 + 0.5) * w;
            rule.integrate(|z| f(mid + 0.5 * w * z)) * 0.5 * w
        })
        .sum()
}

#[test]
fn weighted_family_is_orthogonal_under_its_weight() {
    // Both members of the n = 2, alpha = beta = 6 family; the weight decays
    // like exp(-6t) so [0, 40] captures the integral to machine precision.
    let p21 = rodrigues_expand(2, 1, 6, 6).unwrap();
    let p22 = rodrigues_expand(2, 2, 6, 6).unwrap();
    let cross = integrate_t(40.0, 40, |t| p21.eval(t) * p22.eval(t) * p21.weight(t));
    let norm = integrate_t(40.0, 40, |t| p21.eval(t).powi(2) * p21.weight(t));
    assert!(norm > 0.0);
    assert!(
        cross.abs() <= 1e-8 * norm,
        "cross moment {cross:.3e} vs norm {norm:.3e}"
    );
}

#[test]
fn unit_weight_expansion_reduces_to_the_plain_family() {
    let mut rng = StdRng::seed_from_u64(99);
    for _ in 0..50 {
        let n = rng.gen_range(1..=4usize);
        let k = rng.gen_range(0..=n);
        let t = rng.gen_range(0.0..5.0f64);
        let poly = rodrigues_expand(n, k, 0, 0).unwrap();
        let direct = eval_e(n, k, t).unwrap();
        assert!(
            (poly.eval(t) - direct).abs() <= 1e-10,
            "n={n} k={k} t={t}: {} vs {direct}",
            poly.eval(t)
        );
    }
}
