//! Quadrature rules shared by the operator, symbol and kernel code.
//!
//! Three families are provided:
//! - Gauss–Legendre rules (Newton iteration on the Legendre recurrence),
//! - Gauss–Jacobi rules for weights `(1 - x)^a (1 + x)^b`, built with the
//!   Golub–Welsch eigenvalue method,
//! - a globally adaptive 7/15-point Gauss–Kronrod integrator for finite and
//!   semi-infinite ranges.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

/// Nodes and weights of an interpolatory rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]` with the affine image of the rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// Gauss–Legendre rule with `n` points.
pub fn gauss_legendre(n: usize) -> GaussRule {
    assert!(n > 0, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Jacobi rule for the weight `(1 - x)^alpha (1 + x)^beta` on `[-1, 1]`.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> GaussRule {
    assert!(n > 0, "rule needs at least one node");
    assert!(alpha > -1.0 && beta > -1.0, "Jacobi exponents must exceed -1");
    let (a, b) = (alpha, beta);
    let ab = a + b;
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let diag = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        jacobi[(k, k)] = diag;
        if k + 1 < n {
            let j = kf + 1.0;
            let num = 4.0 * j * (j + a) * (j + b) * (j + ab);
            let den = (2.0 * j + ab).powi(2) * (2.0 * j + ab + 1.0) * (2.0 * j + ab - 1.0);
            let off = (num / den).sqrt();
            jacobi[(k, k + 1)] = off;
            jacobi[(k + 1, k)] = off;
        }
    }
    let mu0 = ((ab + 1.0) * 2f64.ln() + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(ab + 2.0))
    .exp();
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Rule for `∫_0^L r^gamma f(r) dr`, returned as `(r_i, w_i)` pairs already
/// scaled to `[0, L]`.
#[derive(Debug, Clone)]
pub struct PowerWeightRule {
    gamma: f64,
    base: GaussRule,
}

impl PowerWeightRule {
    pub fn new(n: usize, gamma: f64) -> Self {
        Self {
            gamma,
            base: gauss_jacobi(n, 0.0, gamma),
        }
    }

    pub fn exponent(&self) -> f64 {
        self.gamma
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, length: f64, mut f: F) -> f64 {
        if length <= 0.0 {
            return 0.0;
        }
        let scale = (0.5 * length).powf(self.gamma + 1.0);
        self.base
            .nodes
            .iter()
            .zip(&self.base.weights)
            .map(|(x, w)| w * f(0.5 * length * (1.0 + x)))
            .sum::<f64>()
            * scale
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = hl * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * hl;
    let err = ((kronrod - gauss) * hl).abs();
    (value, err)
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Tolerances for [`adaptive`] and [`adaptive_semi_infinite`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_intervals: 2000,
        }
    }
}

/// Globally adaptive Gauss–Kronrod integration over `[a, b]`, refining the
/// interval with the largest error estimate first. Breakpoints split the
/// initial partition.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: AdaptiveOptions,
) -> Integral {
    if a == b {
        return Integral {
            value: 0.0,
            error: 0.0,
            converged: true,
            evaluations: 0,
        };
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|x| *x > lo && *x < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    // (a, b, value, error)
    let mut parts: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut evaluations = 0;
    for w in cuts.windows(2) {
        let (v, e) = gk15(&mut f, w[0], w[1]);
        evaluations += 15;
        parts.push((w[0], w[1], v, e));
    }
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= target || parts.len() >= opts.max_intervals {
            return Integral {
                value: sign * total,
                error: err,
                converged: err <= target,
                evaluations,
            };
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty partition");
        let (pa, pb, _, _) = parts[idx];
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            // interval exhausted at machine precision
            return Integral {
                value: sign * total,
                error: err,
                converged: false,
                evaluations,
            };
        }
        let (v1, e1) = gk15(&mut f, pa, mid);
        let (v2, e2) = gk15(&mut f, mid, pb);
        evaluations += 30;
        parts[idx] = (pa, mid, v1, e1);
        parts.push((mid, pb, v2, e2));
    }
}

/// Adaptive integration over `[a, ∞)` through the map `x = a + t / (1 - t)`.
pub fn adaptive_semi_infinite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    opts: AdaptiveOptions,
) -> Integral {
    adaptive(
        |t| {
            let one_minus = 1.0 - t;
            if one_minus <= 0.0 {
                return 0.0;
            }
            let x = a + t / one_minus;
            let v = f(x) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        &[],
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(6);
        // degree 11 is the highest exact degree
        let v = rule.integrate(-1.0, 2.0, |x| x.powi(11) + 3.0 * x.powi(4));
        let exact = (2f64.powi(12) - 1.0) / 12.0 + 3.0 * (32.0 + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-11 * exact.abs());
        let sum: f64 = rule.weights.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_moments_match_beta_integrals() {
        // ∫_0^1 r^g r^m dr = 1 / (g + m + 1)
        for &g in &[-0.6, 0.0, 0.4, 1.3] {
            let rule = PowerWeightRule::new(8, g);
            for m in 0..10 {
                let v = rule.integrate(1.0, |r| r.powi(m));
                let exact = 1.0 / (g + m as f64 + 1.0);
                assert!((v - exact).abs() < 1e-13, "g={g} m={m} v={v} exact={exact}");
            }
        }
    }

    #[test]
    fn jacobi_reduces_to_legendre() {
        let gj = gauss_jacobi(7, 0.0, 0.0);
        let gl = gauss_legendre(7);
        for (a, b) in gj.nodes.iter().zip(&gl.nodes) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = adaptive(|x| x.sqrt().recip(), 0.0, 1.0, &[], AdaptiveOptions::default());
        assert!((r.value - 2.0).abs() < 1e-9, "{r:?}");
        let r = adaptive(|x| (1.0 - x * x).max(0.0).sqrt(), -1.0, 1.0, &[], AdaptiveOptions::default());
        assert!((r.value - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn semi_infinite_exponential_and_power_tail() {
        let r = adaptive_semi_infinite(|x| (-x).exp(), 0.0, AdaptiveOptions::default());
        assert!((r.value - 1.0).abs() < 1e-11);
        let r = adaptive_semi_infinite(|x| x.powf(-1.5), 1.0, AdaptiveOptions::default());
        // algebraic decay leaves an endpoint singularity after the map
        assert!((r.value - 2.0).abs() < 1e-7, "{r:?}");
    }
}
