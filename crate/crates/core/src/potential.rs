//! Kernels of the isotropic operator `μ(-Δ)^s`: the heat kernel and the
//! fundamental solution on the line, Riesz potentials, and empirical
//! `L^p → L^q` constants of Dirichlet solves.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::domain::{Domain, DomainGrid};
use crate::error::{Error, Result};
use crate::measure::SpectralMeasure;
use crate::operator::{assemble_with, DirichletSolver, OperatorMatrices, OperatorOptions};
use crate::quadrature::{adaptive, adaptive_semi_infinite, gauss_legendre, AdaptiveOptions, PowerWeightRule};

const KERNEL_TOL: AdaptiveOptions = AdaptiveOptions {
    abs_tol: 1e-15,
    rel_tol: 1e-12,
    max_intervals: 4000,
};

/// `Γ(n/2 - s) / (4^s π^{n/2} Γ(s))`: the Riesz potential with this constant
/// inverts the symbol `|ξ|^{2s}`.
pub fn riesz_constant(n: usize, s: f64) -> Result<f64> {
    if n as f64 <= 2.0 * s {
        return Err(Error::InvalidParameter(format!("Riesz potential needs n > 2s (n = {n}, s = {s})")));
    }
    let nf = n as f64;
    Ok(gamma(nf / 2.0 - s) / (4f64.powf(s) * PI.powf(nf / 2.0) * gamma(s)))
}

/// The operator with symbol `μ|ξ|^{2s}` in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelProfile {
    pub n: usize,
    pub s: f64,
    pub mu: f64,
}

impl KernelProfile {
    pub fn new(n: usize, s: f64, mu: f64) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::Unsupported(format!("dimension {n}")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {s}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("symbol scale must be positive, got {mu}")));
        }
        Ok(Self { n, s, mu })
    }

    /// Profile of an isotropic measure; anisotropic measures are rejected.
    pub fn from_measure(measure: &SpectralMeasure) -> Result<Self> {
        let mu = measure
            .isotropic_scale()
            .ok_or_else(|| Error::Unsupported("kernels are available for isotropic measures only".into()))?;
        Self::new(measure.dim(), measure.order(), mu)
    }

    fn alpha(&self) -> f64 {
        2.0 * self.s
    }

    fn require_line(&self) -> Result<()> {
        if self.n == 1 {
            Ok(())
        } else {
            Err(Error::Unsupported("heat kernels are evaluated on the line only".into()))
        }
    }

    /// `C_{n,s} / μ`, the constant of `V(x) = c |x|^{2s-n}`.
    pub fn riesz_constant(&self) -> Result<f64> {
        Ok(riesz_constant(self.n, self.s)? / self.mu)
    }

    /// `p(x, t) = (1/π) ∫_0^∞ cos(xξ) e^{-μtξ^{2s}} dξ`.
    ///
    /// The contour is rotated to `ξ = e^{iφ}η` with `φ = π/(4 max(1, 2s))`,
    /// where both factors decay exponentially.
    pub fn heat_kernel(&self, x: f64, t: f64) -> Result<f64> {
        self.require_line()?;
        if !(t > 0.0 && t.is_finite()) || !x.is_finite() {
            return Err(Error::InvalidParameter(format!("heat kernel needs t > 0 and finite x (x = {x}, t = {t})")));
        }
        let a = self.alpha();
        let tau = self.mu * t;
        let x = x.abs();
        let phi = PI / (4.0 * a.max(1.0));
        let (c, sn) = (phi.cos(), phi.sin());
        let (ca, sa) = ((a * phi).cos(), (a * phi).sin());
        let scale = 1.0 / (x * sn + tau.powf(1.0 / a));
        let r = adaptive_semi_infinite(
            |z| {
                let eta = scale * z;
                let ea = eta.powf(a);
                let re = -x * eta * sn - tau * ea * ca;
                let im = x * eta * c - tau * ea * sa;
                re.exp() * (phi + im).cos()
            },
            0.0,
            KERNEL_TOL,
        );
        if !r.converged {
            return Err(Error::Quadrature(format!("heat kernel at x = {x}, t = {t}: error {:e}", r.error)));
        }
        Ok(scale * r.value / PI)
    }

    /// `∫_{|x|>X} p(x, t) dx` from the large-`|x|` expansion of the kernel.
    fn far_mass(&self, t: f64, big: f64) -> f64 {
        let a = self.alpha();
        let tau = self.mu * t;
        let mut sum = 0.0;
        let mut last = f64::INFINITY;
        for k in 1..=60 {
            let kf = k as f64;
            let mag = (ln_gamma(1.0 + kf * a) - ln_gamma(kf + 1.0) + kf * tau.ln() - kf * a * big.ln()).exp() / (kf * a);
            if mag > last {
                break;
            }
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * mag * (0.5 * PI * kf * a).sin();
            last = mag;
            if mag < 1e-18 * sum.abs() {
                break;
            }
        }
        2.0 * sum / PI
    }

    /// `∫ p(x, t) dx`: quadrature up to `30 (μt)^{1/2s}`, asymptotic tail beyond.
    pub fn heat_kernel_mass(&self, t: f64) -> Result<f64> {
        self.require_line()?;
        let ell = (self.mu * t).powf(1.0 / self.alpha());
        let big = 30.0 * ell;
        let breaks: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|b| b * ell).collect();
        let mut failure = None;
        let near = adaptive(
            |x| {
                self.heat_kernel(x, t).unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    0.0
                })
            },
            0.0,
            big,
            &breaks,
            AdaptiveOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 2000 },
        );
        if let Some(e) = failure {
            return Err(e);
        }
        if !near.converged {
            return Err(Error::Quadrature(format!("heat kernel mass at t = {t}")));
        }
        Ok(2.0 * near.value + self.far_mass(t, big))
    }

    /// `V(x) = ∫_0^∞ p(x, t) dt`: quadrature up to the time where
    /// `|x| (μt)^{-1/2s} = 0.005`, then the small-argument expansion of the
    /// kernel integrated in closed form.
    pub fn fundamental_solution(&self, x: f64) -> Result<f64> {
        if self.n as f64 <= self.alpha() {
            return Err(Error::InvalidParameter(format!(
                "no fundamental solution for n ≤ 2s (n = {}, s = {}); this only happens for n = 1, s ≥ 1/2, \
                 where the one-dimensional branch of the bootstrap applies instead",
                self.n, self.s
            )));
        }
        self.require_line()?;
        if x == 0.0 || !x.is_finite() {
            return Err(Error::InvalidParameter("the fundamental solution is singular at 0".into()));
        }
        let a = self.alpha();
        let x = x.abs();
        let y0 = 0.005;
        let big_t = (x / y0).powf(a) / self.mu;
        let breaks: Vec<f64> = (1..40).map(|j| big_t * 0.5f64.powi(j)).collect();
        let mut failure = None;
        let near = adaptive(
            |t| {
                if t <= 0.0 {
                    return 0.0;
                }
                self.heat_kernel(x, t).unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    0.0
                })
            },
            0.0,
            big_t,
            &breaks,
            AdaptiveOptions { abs_tol: 1e-14, rel_tol: 1e-11, max_intervals: 2000 },
        );
        if let Some(e) = failure {
            return Err(e);
        }
        if !near.converged {
            return Err(Error::Quadrature(format!("time integral of the heat kernel at x = {x}")));
        }
        let mut tail = 0.0;
        let mut last = f64::INFINITY;
        for k in 0..8 {
            let e = (2 * k + 1) as f64 / a;
            let lmag = 2.0 * k as f64 * x.ln() + ln_gamma(e) - ln_gamma(2.0 * k as f64 + 1.0) - e * self.mu.ln()
                + (1.0 - e) * big_t.ln();
            let mag = lmag.exp() / (PI * a * (e - 1.0));
            if mag > last {
                break;
            }
            tail += if k % 2 == 0 { mag } else { -mag };
            last = mag;
        }
        Ok(near.value + tail)
    }

    /// Fundamental solution on a set of radii with its homogeneity and
    /// `V(x) |x|^{n-2s}` bound.
    pub fn fundamental_audit(&self, xs: &[f64]) -> Result<FundamentalAudit> {
        if xs.is_empty() {
            return Err(Error::InvalidParameter("no sample radii".into()));
        }
        let ratio = 2f64.powf(self.alpha() - self.n as f64);
        let rows = xs
            .par_iter()
            .map(|&x| -> Result<(f64, f64)> { Ok((self.fundamental_solution(x)?, self.fundamental_solution(2.0 * x)?)) })
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let scaled: Vec<f64> = values
            .iter()
            .zip(xs)
            .map(|(v, x)| v * x.abs().powf(self.n as f64 - self.alpha()))
            .collect();
        let c2 = scaled.iter().copied().fold(0.0, f64::max);
        let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        let homogeneity_defect = rows.iter().map(|(v, v2)| (v2 / v / ratio - 1.0).abs()).fold(0.0, f64::max);
        Ok(FundamentalAudit {
            xs: xs.to_vec(),
            values,
            scaled,
            c2,
            spread: c2 / lo - 1.0,
            homogeneity_defect,
            closed_form: self.riesz_constant()?,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FundamentalAudit {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    /// `V(x) |x|^{n-2s}`.
    pub scaled: Vec<f64>,
    /// Largest scaled value.
    pub c2: f64,
    /// `max / min - 1` of the scaled values.
    pub spread: f64,
    /// `max |V(2x) / (2^{2s-n} V(x)) - 1|`.
    pub homogeneity_defect: f64,
    pub closed_form: f64,
}

/// `∫_{r_in}^{r_out} f(x + rω) r^{2s-1} dr` along the part of the ray inside
/// `support`.
fn radial_riesz<F: Fn(&[f64]) -> f64>(f: &F, support: &Domain, x: &[f64; 2], omega: [f64; 2], s: f64) -> f64 {
    let n = support.dim();
    let Some((r0, r1)) = support.ray_segment(&x[..n], &omega[..n]) else {
        return 0.0;
    };
    let at = |r: f64| {
        let y = [x[0] + r * omega[0], x[1] + r * omega[1]];
        f(&y[..n])
    };
    let gl = gauss_legendre(16);
    let gamma_exp = 2.0 * s - 1.0;
    let weighted = |r: f64| at(r) * r.powf(gamma_exp);
    if r0 == 0.0 {
        let first = 0.25 * r1;
        let mut total = PowerWeightRule::new(16, gamma_exp).integrate(first, at);
        let panels = 3;
        let w = (r1 - first) / panels as f64;
        for j in 0..panels {
            let a = first + j as f64 * w;
            total += gl.integrate(a, a + w, weighted);
        }
        total
    } else {
        let panels = 4;
        let w = (r1 - r0) / panels as f64;
        (0..panels).map(|j| gl.integrate(r0 + j as f64 * w, r0 + (j + 1) as f64 * w, weighted)).sum()
    }
}

/// `(I_{2s} f)(x) = C_{n,s} ∫ f(y) |x - y|^{2s-n} dy` for `f` supported in a
/// convex domain, in polar coordinates about `x`.
pub fn riesz_potential<F: Fn(&[f64]) -> f64 + Sync>(f: F, support: &Domain, x: &[f64], s: f64) -> Result<f64> {
    support.validate()?;
    let n = support.dim();
    let c = riesz_constant(n, s)?;
    if x.len() < n || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("evaluation point has the wrong dimension".into()));
    }
    let xp = [x[0], if n == 2 { x[1] } else { 0.0 }];
    if n == 1 {
        return Ok(c * (radial_riesz(&f, support, &xp, [1.0, 0.0], s) + radial_riesz(&f, support, &xp, [-1.0, 0.0], s)));
    }
    let mut cuts: Vec<f64> = (0..=64).map(|j| j as f64 * 2.0 * PI / 64.0).collect();
    if let Domain::Rectangle { min, max } = *support {
        for corner in [[min[0], min[1]], [max[0], min[1]], [min[0], max[1]], [max[0], max[1]]] {
            let th = (corner[1] - xp[1]).atan2(corner[0] - xp[0]).rem_euclid(2.0 * PI);
            cuts.push(th);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let gl = gauss_legendre(16);
    let total: f64 = cuts
        .par_windows(2)
        .map(|w| gl.integrate(w[0], w[1], |th| radial_riesz(&f, support, &xp, [th.cos(), th.sin()], s)))
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(c * total)
}

/// Riesz potential of the hat-function interpolant of nodal data.
pub fn riesz_potential_grid(grid: &DomainGrid, values: &[f64], x: &[f64], s: f64) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::InvalidParameter(format!("{} values for {} nodes", values.len(), grid.len())));
    }
    riesz_potential(|y| crate::boundary::fe_value(grid, values, y), grid.domain(), x, s)
}

/// Branches of the `L^p → L^q` estimate, by the sign of `p - n/(2s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpCase {
    /// `p < n/2s`, `q = np/(n - 2ps)`.
    A,
    /// `p = n/2s`, every finite `q`.
    B,
    /// `p > n/2s`, `q = ∞`.
    C,
}

impl LpCase {
    pub fn classify(n: usize, s: f64, p: f64) -> LpCase {
        let crit = n as f64 / (2.0 * s);
        if (p - crit).abs() <= 1e-12 * crit {
            LpCase::B
        } else if p < crit {
            LpCase::A
        } else {
            LpCase::C
        }
    }

    /// Target exponents; case (b) uses the ladder `{4, 8, 16}`.
    pub fn exponents(self, n: usize, s: f64, p: f64) -> Vec<f64> {
        let nf = n as f64;
        match self {
            LpCase::A => vec![nf * p / (nf - 2.0 * p * s)],
            LpCase::B => vec![4.0, 8.0, 16.0],
            LpCase::C => vec![f64::INFINITY],
        }
    }
}

/// Right-hand sides for the `L^p` checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TestFunction {
    /// `A exp(1 - 1/(1 - |x-c|²/r²))` inside the ball.
    Bump { center: [f64; 2], radius: f64, amplitude: f64 },
    Indicator { min: [f64; 2], max: [f64; 2] },
    /// `A sin(k·x + φ)`.
    Oscillatory { frequency: [f64; 2], phase: f64, amplitude: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let y = [x[0], x.get(1).copied().unwrap_or(0.0)];
        match *self {
            TestFunction::Bump { center, radius, amplitude } => {
                let r2 = ((y[0] - center[0]).powi(2) + (y[1] - center[1]).powi(2)) / (radius * radius);
                if r2 < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            }
            TestFunction::Indicator { min, max } => {
                let inside = (0..x.len()).all(|d| y[d] >= min[d] && y[d] <= max[d]);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Oscillatory { frequency, phase, amplitude } => {
                amplitude * (frequency[0] * y[0] + frequency[1] * y[1] + phase).sin()
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TestFunction::Bump { .. } => "bump",
            TestFunction::Indicator { .. } => "indicator",
            TestFunction::Oscillatory { .. } => "oscillatory",
        }
    }
}

/// Seeded family cycling through bumps, indicators and oscillatory functions.
pub fn test_family(domain: &Domain, count: usize, seed: u64) -> Vec<TestFunction> {
    let n = domain.dim();
    let (lo, hi) = domain.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point_inside = |rng: &mut ChaCha8Rng| loop {
        let mut p = [0.0; 2];
        for d in 0..n {
            p[d] = rng.gen_range(lo[d]..hi[d]);
        }
        if domain.contains(&p[..n]) {
            return p;
        }
    };
    let diam = domain.diameter();
    (0..count)
        .map(|i| match i % 3 {
            0 => TestFunction::Bump {
                center: point_inside(&mut rng),
                radius: rng.gen_range(0.1..0.4) * diam / 2.0,
                amplitude: rng.gen_range(0.5..2.0),
            },
            1 => {
                let a = point_inside(&mut rng);
                let b = point_inside(&mut rng);
                let mut min = [a[0].min(b[0]), a[1].min(b[1])];
                let mut max = [a[0].max(b[0]), a[1].max(b[1])];
                for d in 0..n {
                    if max[d] - min[d] < 0.05 * diam {
                        let mid = 0.5 * (max[d] + min[d]);
                        min[d] = mid - 0.025 * diam;
                        max[d] = mid + 0.025 * diam;
                    }
                }
                TestFunction::Indicator { min, max }
            }
            _ => {
                let mut frequency = [0.0; 2];
                for f in frequency.iter_mut().take(n) {
                    *f = rng.gen_range(PI..8.0 * PI) / diam * 2.0;
                }
                TestFunction::Oscillatory {
                    frequency,
                    phase: rng.gen_range(0.0..2.0 * PI),
                    amplitude: rng.gen_range(0.5..2.0),
                }
            }
        })
        .collect()
}

fn exponent_list<S: Serializer>(qs: &[f64], ser: S) -> std::result::Result<S::Ok, S::Error> {
    let labels: Vec<String> = qs.iter().map(|q| if q.is_infinite() { "inf".into() } else { format!("{q}") }).collect();
    labels.serialize(ser)
}

#[derive(Debug, Clone, Serialize)]
pub struct LpMember {
    pub index: usize,
    pub kind: &'static str,
    pub norm_g: f64,
    /// `‖u‖_q` for each target exponent.
    pub norms_u: Vec<f64>,
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LpReport {
    pub case: LpCase,
    pub p: f64,
    #[serde(serialize_with = "exponent_list")]
    pub qs: Vec<f64>,
    pub h: f64,
    pub members: Vec<LpMember>,
    /// Members with `g = 0` on the grid.
    pub skipped: usize,
    /// Largest ratio per exponent: the empirical constant.
    pub constants: Vec<f64>,
    /// `max |u(αf + βg) - αu(f) - βu(g)| / max |αu(f) + βu(g)|`.
    pub linearity_defect: f64,
    /// Relative change of the ratios when `g` is doubled.
    pub scaling_defect: f64,
    /// `max (|u| - v)_+ / max v`, with `v` solving for `|g|`, over
    /// sign-changing members.
    pub comparison_defect: f64,
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Solves `Lu = g` over a family and measures `‖u‖_q / ‖g‖_p`.
pub fn lp_estimate_check(
    ops: &OperatorMatrices,
    grid: &DomainGrid,
    family: &[TestFunction],
    case: LpCase,
    p: f64,
) -> Result<LpReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must be a finite exponent ≥ 1, got {p}")));
    }
    let (n, s) = (ops.n, ops.s);
    let actual = LpCase::classify(n, s, p);
    if actual != case {
        return Err(Error::InvalidParameter(format!(
            "p = {p} belongs to case {actual:?}, not {case:?} (n/2s = {})",
            n as f64 / (2.0 * s)
        )));
    }
    if family.len() < 2 {
        return Err(Error::InvalidParameter("the family needs at least two members".into()));
    }
    let qs = case.exponents(n, s, p);
    let solver = DirichletSolver::new(ops)?;
    let samples: Vec<Vec<f64>> = family.iter().map(|f| grid.sample(|x| f.eval(x))).collect();
    let solved = samples
        .par_iter()
        .enumerate()
        .map(|(i, g)| -> Result<Option<(LpMember, Vec<f64>)>> {
            let norm_g = grid.lp_norm(g, p);
            if norm_g == 0.0 {
                return Ok(None);
            }
            let u = solver.solve(g)?;
            let norms_u: Vec<f64> = qs.iter().map(|&q| grid.lp_norm(&u, q)).collect();
            let ratios = norms_u.iter().map(|v| v / norm_g).collect();
            Ok(Some((LpMember { index: i, kind: family[i].label(), norm_g, norms_u, ratios }, u)))
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped = solved.iter().filter(|m| m.is_none()).count();
    let kept: Vec<(LpMember, Vec<f64>)> = solved.into_iter().flatten().collect();
    if kept.len() < 2 {
        return Err(Error::InvalidParameter("fewer than two nonzero right-hand sides on this grid".into()));
    }
    let constants = (0..qs.len())
        .map(|j| kept.iter().map(|(m, _)| m.ratios[j]).fold(0.0, f64::max))
        .collect();

    let (i0, i1) = (kept[0].0.index, kept[1].0.index);
    let (alpha, beta) = (2.5, -1.25);
    let combo_g: Vec<f64> = samples[i0].iter().zip(&samples[i1]).map(|(a, b)| alpha * a + beta * b).collect();
    let combo_u: Vec<f64> = kept[0].1.iter().zip(&kept[1].1).map(|(a, b)| alpha * a + beta * b).collect();
    let linearity_defect = relative_gap(&solver.solve(&combo_g)?, &combo_u);

    let doubled: Vec<f64> = samples[i0].iter().map(|v| 2.0 * v).collect();
    let u2 = solver.solve(&doubled)?;
    let norm_g2 = grid.lp_norm(&doubled, p);
    let scaling_defect = qs
        .iter()
        .zip(&kept[0].0.ratios)
        .map(|(&q, r)| (grid.lp_norm(&u2, q) / norm_g2 / r - 1.0).abs())
        .fold(0.0, f64::max);

    let mut comparison_defect: f64 = 0.0;
    for (m, u) in &kept {
        let g = &samples[m.index];
        if g.iter().all(|v| *v >= 0.0) {
            continue;
        }
        let abs_g: Vec<f64> = g.iter().map(|v| v.abs()).collect();
        let v = solver.solve(&abs_g)?;
        let vmax = v.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
        let excess = u.iter().zip(&v).map(|(a, b)| (a.abs() - b).max(0.0)).fold(0.0, f64::max);
        comparison_defect = comparison_defect.max(excess / vmax);
    }

    Ok(LpReport {
        case,
        p,
        qs,
        h: grid.h(),
        members: kept.into_iter().map(|(m, _)| m).collect(),
        skipped,
        constants,
        linearity_defect,
        scaling_defect,
        comparison_defect,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LpRefinement {
    pub reports: Vec<LpReport>,
    /// `max / min - 1` of the empirical constant across grids, per exponent.
    pub spread: Vec<f64>,
}

impl LpRefinement {
    pub fn stable_within(&self, tol: f64) -> bool {
        self.spread.iter().all(|s| *s <= tol)
    }
}

/// [`lp_estimate_check`] on a sequence of grids with the same family.
pub fn lp_refinement(
    measure: &SpectralMeasure,
    domain: &Domain,
    hs: &[f64],
    family: &[TestFunction],
    case: LpCase,
    p: f64,
    options: OperatorOptions,
) -> Result<LpRefinement> {
    if hs.len() < 2 {
        return Err(Error::InvalidParameter("refinement needs at least two grids".into()));
    }
    let mut reports = Vec::with_capacity(hs.len());
    for &h in hs {
        let grid = DomainGrid::build(*domain, h)?;
        let ops = assemble_with(measure, &grid, options)?;
        reports.push(lp_estimate_check(&ops, &grid, family, case, p)?);
    }
    let spread = (0..reports[0].qs.len())
        .map(|j| {
            let cs: Vec<f64> = reports.iter().map(|r| r.constants[j]).collect();
            let hi = cs.iter().copied().fold(0.0, f64::max);
            let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
            hi / lo - 1.0
        })
        .collect();
    Ok(LpRefinement { reports, spread })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(s: f64) -> KernelProfile {
        KernelProfile::new(1, s, 1.0).unwrap()
    }

    #[test]
    fn cauchy_kernel_at_half() {
        let k = line(0.5);
        for &t in &[0.05, 0.3, 1.0, 4.0] {
            for &x in &[0.0, 0.1, 0.7, 2.0, 15.0] {
                let exact = t / (PI * (t * t + x * x));
                let got = k.heat_kernel(x, t).unwrap();
                assert!((got / exact - 1.0).abs() < 1e-8, "x={x} t={t}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn kernel_at_origin() {
        // p(0, t) = Γ(1 + 1/2s) / (π (μt)^{1/2s})
        for &s in &[0.25, 0.4, 0.75] {
            let k = KernelProfile::new(1, s, 2.0).unwrap();
            let a = 2.0 * s;
            let exact = gamma(1.0 + 1.0 / a) / (PI * (2.0 * 0.7f64).powf(1.0 / a));
            let got = k.heat_kernel(0.0, 0.7).unwrap();
            assert!((got / exact - 1.0).abs() < 1e-9, "s={s}");
        }
    }

    #[test]
    fn gaussian_limit_near_one() {
        // s close to 1 approaches the Gaussian of variance 2t.
        let k = line(0.999);
        let t = 0.5;
        let x: f64 = 0.8;
        let gauss = (-(x * x) / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
        assert!((k.heat_kernel(x, t).unwrap() / gauss - 1.0).abs() < 1e-2);
    }

    #[test]
    fn mass_is_one() {
        for &s in &[0.25, 0.5, 0.8] {
            let m = line(s).heat_kernel_mass(0.3).unwrap();
            assert!((m - 1.0).abs() < 1e-6, "s={s}: {m}");
        }
    }

    #[test]
    fn fundamental_solution_quarter() {
        let k = line(0.25);
        let target = 1.0 / (2.0 * PI).sqrt();
        for &x in &[0.1, 0.3, 1.0] {
            let v = k.fundamental_solution(x).unwrap();
            assert!((v * x.sqrt() / target - 1.0).abs() < 1e-6, "x={x}: {}", v * x.sqrt());
        }
    }

    #[test]
    fn fundamental_solution_rejects_critical() {
        assert!(line(0.5).fundamental_solution(1.0).is_err());
        assert!(line(0.7).fundamental_solution(1.0).is_err());
    }

    #[test]
    fn riesz_disk_centre() {
        let v = riesz_potential(|_| 1.0, &Domain::disk([0.0, 0.0], 1.0), &[0.0, 0.0], 0.5).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn riesz_interval_closed_form() {
        // C_{1,s} ∫_{-1}^{1} |x-y|^{2s-1} dy = C ((1+x)^{2s} + (1-x)^{2s}) / 2s
        let s = 0.3;
        let c = riesz_constant(1, s).unwrap();
        for &x in &[0.0f64, 0.4, -0.9, 1.5] {
            let exact = if x.abs() <= 1.0 {
                c * ((1.0 + x).powf(2.0 * s) + (1.0 - x).powf(2.0 * s)) / (2.0 * s)
            } else {
                c * ((x + 1.0).powf(2.0 * s) - (x - 1.0).powf(2.0 * s)) / (2.0 * s)
            };
            let got = riesz_potential(|_| 1.0, &Domain::interval(-1.0, 1.0), &[x], s).unwrap();
            assert!((got / exact - 1.0).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn riesz_zero_and_constant() {
        let sq = Domain::rectangle([-1.0, -0.5], [1.0, 0.5]);
        assert_eq!(riesz_potential(|_| 0.0, &sq, &[0.2, 0.1], 0.5).unwrap(), 0.0);
        assert!(riesz_constant(1, 0.5).is_err());
    }

    #[test]
    fn case_classification() {
        assert_eq!(LpCase::classify(1, 0.4, 2.0), LpCase::C);
        assert_eq!(LpCase::classify(1, 0.4, 1.25), LpCase::B);
        assert_eq!(LpCase::classify(2, 0.5, 1.5), LpCase::A);
        assert_eq!(LpCase::A.exponents(2, 0.5, 1.5), vec![6.0]);
    }

    #[test]
    fn family_is_seeded() {
        let d = Domain::interval(-1.0, 1.0);
        assert_eq!(test_family(&d, 9, 3), test_family(&d, 9, 3));
        assert_ne!(test_family(&d, 9, 3), test_family(&d, 9, 4));
    }

    #[test]
    fn lp_check_invariants() {
        let m = SpectralMeasure::isotropic(1, 0.4).unwrap();
        let grid = DomainGrid::build(Domain::interval(-1.0, 1.0), 2.0 / 129.0).unwrap();
        let ops = crate::operator::assemble(&m, &grid).unwrap();
        let fam = test_family(grid.domain(), 9, 1);
        assert!(lp_estimate_check(&ops, &grid, &fam, LpCase::A, 2.0).is_err());
        let r = lp_estimate_check(&ops, &grid, &fam, LpCase::C, 2.0).unwrap();
        assert_eq!(r.members.len() + r.skipped, 9);
        assert!(r.linearity_defect < 1e-8);
        assert!(r.scaling_defect < 1e-8);
        assert!(r.comparison_defect < 1e-8, "{}", r.comparison_defect);
        assert!(r.constants[0] > 0.0 && r.constants[0].is_finite());
    }
}
