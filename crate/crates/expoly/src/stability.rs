//! Stability functions R(z) of every scheme in the crate, A-/L-stability
//! verdicts, stability-region rasters, and the monotonicity threshold of the
//! explicit schemes on y' = -gamma y.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::genmethods::ButcherTableau;
use crate::schemes::ExplicitScheme;

/// Rational stability function P(z)/Q(z), coefficients in ascending powers.
/// Explicit schemes carry Q = [1].
#[derive(Debug, Clone)]
pub struct StabilityFunction {
    p: Vec<f64>,
    q: Vec<f64>,
}

impl StabilityFunction {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Self {
        Self {
            p: trim(p),
            q: trim(q),
        }
    }

    /// Numerator coefficients, ascending.
    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Denominator coefficients, ascending.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        horner_c(&self.p, z) / horner_c(&self.q, z)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        horner(&self.p, x) / horner(&self.q, x)
    }

    /// Limit of R(z) as z goes to minus infinity; returns a signed infinity
    /// when the numerator degree exceeds the denominator degree.
    pub fn limit_at_minus_infinity(&self) -> f64 {
        let dp = self.p.len() - 1;
        let dq = self.q.len() - 1;
        let ratio = self.p[dp] / self.q[dq];
        match dp.cmp(&dq) {
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => ratio,
            std::cmp::Ordering::Greater => {
                let sign = if (dp - dq) % 2 == 0 { 1.0 } else { -1.0 };
                f64::INFINITY * ratio.signum() * sign
            }
        }
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
}

fn horner_c(c: &[f64], z: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &v| acc * z + v)
}

/// Drops trailing coefficients that are zero relative to the largest one.
fn trim(mut c: Vec<f64>) -> Vec<f64> {
    let scale = c.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-300);
    while c.len() > 1 && c.last().unwrap().abs() <= 1e-11 * scale {
        c.pop();
    }
    c
}

/// Stability polynomial of an explicit scheme, obtained by propagating
/// coefficient vectors of K_p through the stage recurrence on y' = zy.
/// The result has degree n+1.
pub fn explicit_stability(scheme: &ExplicitScheme) -> StabilityFunction {
    let n = scheme.degree();
    // K_p as a polynomial in z; K_0 = z.
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    k.push(vec![0.0, 1.0]);
    for p in 1..=n {
        let mut inner = vec![0.0; p + 1];
        inner[0] = 1.0;
        for (s, &m) in scheme.mu()[p - 1].iter().enumerate() {
            for (i, &c) in k[s].iter().enumerate() {
                inner[i] += m * c;
            }
        }
        // K_p = z * inner
        let mut kp = vec![0.0; p + 2];
        kp[1..].copy_from_slice(&inner);
        k.push(kp);
    }
    let mut r = vec![0.0; n + 2];
    r[0] = 1.0;
    for (s, &w) in scheme.sigma_out().iter().enumerate() {
        for (i, &c) in k[s].iter().enumerate() {
            r[i] += w * c;
        }
    }
    StabilityFunction::new(r, vec![1.0])
}

pub const MAX_IRK_STAGES: usize = 8;

/// Rational stability function of an implicit Runge-Kutta tableau:
/// R(z) = det(I - zA + z 1 b^T) / det(I - zA), expanded exactly by minor
/// expansion over the (small) stage count.
pub fn irk_stability(tab: &ButcherTableau) -> Result<StabilityFunction> {
    let s = tab.stages();
    if s == 0 || s > MAX_IRK_STAGES {
        return Err(Error::InvalidDegree {
            n: s,
            max: MAX_IRK_STAGES,
        });
    }
    // Entries are degree-1 polynomials in z.
    let mut num = vec![vec![[0.0; 2]; s]; s];
    let mut den = vec![vec![[0.0; 2]; s]; s];
    for i in 0..s {
        for j in 0..s {
            let delta = if i == j { 1.0 } else { 0.0 };
            num[i][j] = [delta, tab.b()[j] - tab.a()[i][j]];
            den[i][j] = [delta, -tab.a()[i][j]];
        }
    }
    Ok(StabilityFunction::new(poly_det(&num), poly_det(&den)))
}

/// Determinant of a matrix with degree-1 polynomial entries, by Laplace
/// expansion along the first row.
fn poly_det(m: &[Vec<[f64; 2]>]) -> Vec<f64> {
    let s = m.len();
    if s == 1 {
        return vec![m[0][0][0], m[0][0][1]];
    }
    let mut acc = vec![0.0; s + 1];
    for j in 0..s {
        if m[0][j][0] == 0.0 && m[0][j][1] == 0.0 {
            continue;
        }
        let minor: Vec<Vec<[f64; 2]>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter_map(|(c, &e)| (c != j).then_some(e))
                    .collect()
            })
            .collect();
        let sub = poly_det(&minor);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        for (i, &c) in sub.iter().enumerate() {
            acc[i] += sign * m[0][j][0] * c;
            acc[i + 1] += sign * m[0][j][1] * c;
        }
    }
    acc
}

/// Outcome of the A-stability sampling check.
#[derive(Debug, Clone, Copy)]
pub struct AStabilityReport {
    pub a_stable: bool,
    /// Largest |R(iy)| found on the imaginary-axis sample.
    pub max_axis_modulus: f64,
    /// The y achieving the maximum.
    pub worst_y: f64,
    /// True when the denominator has a root with negative real part.
    pub has_left_half_plane_pole: bool,
}

const A_STABILITY_TOL: f64 = 1e-9;

/// Samples |R| on the imaginary axis (4000 logarithmic points, y from 1e-3
/// to 1e6) and on a left-half-plane grid, and locates denominator roots via
/// the companion matrix. A-stable means no sampled modulus exceeds
/// 1 + 1e-9 and no pole lies in the open left half-plane.
pub fn a_stability_check(r: &StabilityFunction) -> AStabilityReport {
    let mut max_axis = 0.0f64;
    let mut worst_y = 0.0f64;
    for i in 0..4000 {
        let y = 10f64.powf(-3.0 + 9.0 * i as f64 / 3999.0);
        let m = r.eval(Complex64::new(0.0, y)).norm();
        if m > max_axis {
            max_axis = m;
            worst_y = y;
        }
    }
    let mut interior_ok = true;
    for iu in 0..40 {
        let x = -(10f64.powf(-3.0 + 9.0 * iu as f64 / 39.0));
        for iv in 0..=40 {
            let y = if iv == 40 {
                0.0
            } else {
                10f64.powf(-3.0 + 9.0 * iv as f64 / 39.0)
            };
            for sign in [1.0, -1.0] {
                let m = r.eval(Complex64::new(x, sign * y)).norm();
                if !(m <= 1.0 + A_STABILITY_TOL) {
                    interior_ok = false;
                }
            }
        }
    }
    let has_lhp_pole = denominator_roots(r.q())
        .iter()
        .any(|z| z.re < 0.0);
    AStabilityReport {
        a_stable: max_axis <= 1.0 + A_STABILITY_TOL && interior_ok && !has_lhp_pole,
        max_axis_modulus: max_axis,
        worst_y,
        has_left_half_plane_pole: has_lhp_pole,
    }
}

/// Roots of the denominator polynomial as companion-matrix eigenvalues.
pub fn denominator_roots(q: &[f64]) -> Vec<Complex64> {
    let m = q.len() - 1;
    if m == 0 {
        return Vec::new();
    }
    let mut comp = DMatrix::<f64>::zeros(m, m);
    for i in 1..m {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..m {
        comp[(i, m - 1)] = -q[i] / q[m];
    }
    comp.complex_eigenvalues().iter().copied().collect()
}

/// Boolean raster of the stability region |R(z)| <= 1 over a rectangular
/// window, plus the real-axis stability interval.
#[derive(Debug, Clone)]
pub struct RegionRaster {
    pub width: usize,
    pub height: usize,
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    /// Row-major, top row (largest imaginary part) first; true = stable.
    /// Samples are taken at cell centers.
    pub pixels: Vec<bool>,
    /// Endpoints of the real-axis stability interval containing 0; the left
    /// endpoint is -infinity when the region is unbounded along the negative
    /// real axis (checked out to -1e6).
    pub real_axis: (f64, f64),
}

pub const MAX_RASTER_RESOLUTION: usize = 4096;

pub fn region_raster(
    r: &StabilityFunction,
    re_range: (f64, f64),
    im_range: (f64, f64),
    width: usize,
    height: usize,
) -> Result<RegionRaster> {
    if width == 0 || height == 0 || width > MAX_RASTER_RESOLUTION || height > MAX_RASTER_RESOLUTION
    {
        return Err(Error::InvalidConfig(format!(
            "raster resolution must be within 1..={MAX_RASTER_RESOLUTION} per axis, got {width}x{height}"
        )));
    }
    if !(re_range.0 < re_range.1) || !(im_range.0 < im_range.1) {
        return Err(Error::InvalidConfig(
            "raster window must have positive extent".into(),
        ));
    }
    let dx = (re_range.1 - re_range.0) / width as f64;
    let dy = (im_range.1 - im_range.0) / height as f64;
    let mut pixels = Vec::with_capacity(width * height);
    for row in 0..height {
        let y = im_range.1 - (row as f64 + 0.5) * dy;
        for col in 0..width {
            let x = re_range.0 + (col as f64 + 0.5) * dx;
            pixels.push(r.eval(Complex64::new(x, y)).norm() <= 1.0);
        }
    }
    Ok(RegionRaster {
        width,
        height,
        re_range,
        im_range,
        pixels,
        real_axis: real_axis_interval(r),
    })
}

/// Endpoints of the real-axis stability interval containing the origin,
/// located by geometric scan and bisection to 1e-10 within [-1e6, 0] on the
/// left and [0, 1e6] on the right.
pub fn real_axis_interval(r: &StabilityFunction) -> (f64, f64) {
    let g = |x: f64| r.eval_real(x).abs() - 1.0;
    let left = match scan_crossing(&g, -1.0) {
        Some((lo, hi)) => bisect(&g, lo, hi),
        None => f64::NEG_INFINITY,
    };
    let right = match scan_crossing(&g, 1.0) {
        Some((lo, hi)) => bisect(&g, lo, hi),
        None => f64::INFINITY,
    };
    (left, right)
}

/// Walks outward from the origin with geometric steps until |R| - 1 turns
/// positive; returns the bracketing pair (stable, unstable) or None when no
/// crossing exists out to 1e6. An immediate crossing pins the endpoint at 0.
fn scan_crossing(g: &impl Fn(f64) -> f64, direction: f64) -> Option<(f64, f64)> {
    let mut prev = 0.0;
    let mut x = 1e-6 * direction;
    while x.abs() <= 1e6 {
        if g(x) > 0.0 {
            return Some((prev, x));
        }
        prev = x;
        x *= 1.25;
    }
    None
}

fn bisect(g: &impl Fn(f64) -> f64, mut stable: f64, mut unstable: f64) -> f64 {
    for _ in 0..200 {
        if (unstable - stable).abs() <= 1e-10 {
            break;
        }
        let mid = 0.5 * (stable + unstable);
        if g(mid) > 0.0 {
            unstable = mid;
        } else {
            stable = mid;
        }
    }
    // The origin itself always satisfies |R| = 1; report a clean 0 when the
    // boundary collapses onto it.
    let root = 0.5 * (stable + unstable);
    if root.abs() <= 1e-9 {
        0.0
    } else {
        root
    }
}

/// Largest x such that the polynomial keeps 0 < P(-x') < 1 for all
/// 0 < x' <= x: the monotonicity threshold for y' = -gamma y with x = gamma h.
/// Bisection to 1e-6 followed by one Newton polish on the violated boundary.
pub fn monotonicity_threshold_poly(p: &[f64]) -> f64 {
    let val = |x: f64| horner(p, -x);
    let inside = |x: f64| {
        let v = val(x);
        v > 0.0 && v < 1.0
    };
    let mut prev = 0.0;
    let mut x = 1e-3;
    while x <= 1e3 && inside(x) {
        prev = x;
        x *= 1.05;
    }
    if x > 1e3 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (prev, x);
    for _ in 0..60 {
        if hi - lo <= 1e-6 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Which boundary was hit decides the function whose root we polish.
    let upper = val(hi) >= 1.0;
    let f = |x: f64| if upper { val(x) - 1.0 } else { val(x) };
    let mut root = 0.5 * (lo + hi);
    for _ in 0..8 {
        // d/dx P(-x) = -P'(-x)
        let d: f64 = -p
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| i as f64 * c * (-root).powi(i as i32 - 1))
            .sum::<f64>();
        if d == 0.0 {
            break;
        }
        let next = root - f(root) / d;
        if !next.is_finite() {
            break;
        }
        if (next - root).abs() <= f64::EPSILON * root.abs() {
            root = next;
            break;
        }
        root = next;
    }
    root
}

/// Monotonicity threshold of an explicit scheme via its stability polynomial.
pub fn monotonicity_threshold(scheme: &ExplicitScheme) -> f64 {
    monotonicity_threshold_poly(explicit_stability(scheme).p())
}
