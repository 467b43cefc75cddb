//! Behavior of the built coefficient tables beyond the per-module unit
//! checks: quadrature exactness of the implicit rows, frozen goldens, and
//! tableau views.

use expoly::schemes::{build_explicit, build_implicit};

#[test]
fn implicit_rows_integrate_the_exponential_family() {
    // Row p is a quadrature for integrals over [0, nu_p]: exact (to roundoff)
    // for the constant and for exp(-j lambda_nn t), j = 1..n. Measured worst
    // residual over n <= 12 is 1.9e-15.
    for n in [2usize, 3, 4, 8, 12] {
        let s = build_implicit(n).unwrap();
        let lam = s.lambda_nn();
        for p in 1..=n {
            let top = s.nu()[p - 1];
            for j in 0..=n {
                let jf = j as f64;
                let g = |t: f64| if j == 0 { 1.0 } else { (-jf * lam * t).exp() };
                let exact = if j == 0 {
                    top
                } else {
                    (1.0 - (-jf * lam * top).exp()) / (jf * lam)
                };
                let mut sum = s.sigma0()[p - 1] * g(0.0);
                for q in 1..=n {
                    sum += s.sigma()[p - 1][q - 1] * g(s.nu()[q - 1]);
                }
                assert!(
                    (sum - exact).abs() <= 1e-12,
                    "n={n} row {p} integrand {j}: {:.3e}",
                    (sum - exact).abs()
                );
            }
        }
    }
}

#[test]
fn implicit_two_point_table_golden() {
    // Frozen from a 50-digit evaluation of the closed-form coefficient
    // construction.
    let s = build_implicit(2).unwrap();
    let golden = [
        [0.06653946, 0.08868473, -0.00249189],
        [-0.20051145, 0.78671372, 0.41379774],
    ];
    for p in 0..2 {
        let row = [s.sigma0()[p], s.sigma()[p][0], s.sigma()[p][1]];
        for (got, want) in row.iter().zip(&golden[p]) {
            assert!((got - want).abs() < 5e-9, "row {p}: {row:?}");
        }
    }
}

#[test]
fn two_point_first_fraction_matches_closed_form() {
    let s = build_explicit(2).unwrap();
    let expect = 1.0 - (2.0 + 3f64.sqrt()).ln() / (3.0 + 3f64.sqrt()).ln();
    assert!((s.nu()[0] - expect).abs() < 1e-14);
    assert!((s.nu()[0] - 0.15273230608635846).abs() < 1e-12);
}

#[test]
fn stage_fractions_ascend_to_one() {
    for n in 1..=12 {
        for nu in [
            build_explicit(n).unwrap().nu().to_vec(),
            build_implicit(n).unwrap().nu().to_vec(),
        ] {
            assert!(nu[0] > 0.0);
            assert!(nu.windows(2).all(|w| w[0] < w[1]), "n={n}: {nu:?}");
            assert!((nu[n - 1] - 1.0).abs() <= 1e-14, "n={n}");
        }
    }
}

#[test]
fn tableau_views_validate_and_keep_structure() {
    for n in 1..=8 {
        let e = build_explicit(n).unwrap().to_tableau();
        e.validate().unwrap();
        assert!(e.is_explicit(), "n={n}");
        assert_eq!(e.c()[0], 0.0);
        assert_eq!(e.stages(), n + 1);

        let i = build_implicit(n).unwrap().to_tableau();
        i.validate().unwrap();
        assert_eq!(i.b(), i.a().last().unwrap().as_slice(), "n={n}");
        assert!((i.c().last().unwrap() - 1.0).abs() <= 1e-14);
    }
}

#[test]
fn one_point_end_rows_coincide_across_constructions() {
    let e = build_explicit(1).unwrap();
    let i = build_implicit(1).unwrap();
    assert_eq!(e.sigma_out()[0], i.sigma0()[0]);
    assert_eq!(e.sigma_out()[1], i.sigma()[0][0]);
}
