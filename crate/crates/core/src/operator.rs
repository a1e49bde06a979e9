//! Discretization of stable operators with zero exterior data.
//!
//! The Galerkin space is spanned by hat functions on the uniform lattice
//! (piecewise linear in 1D, bilinear tensor hats in 2D). Because every hat is
//! a translate of one reference function and the exterior condition is simply
//! the zero extension, the energy form on two hats depends only on the
//! difference of their lattice indices:
//!
//! ```text
//! B(φ_i, φ_j) = h^{n-2s} Q(k),   k = idx_i - idx_j,
//! Q(k) = κ_s ∫_{S^{n-1}} a(θ) ∫_0^∞ (2P(k) - P(k+rθ) - P(k-rθ)) r^{-1-2s} dr dθ,
//! ```
//!
//! where `P` is the autocorrelation of the reference hat (the centred cubic
//! B-spline, or its tensor square). The radial integrand is a piecewise
//! polynomial; its pieces are integrated with a Gauss–Jacobi rule near `r = 0`,
//! Gauss–Legendre in between, and the exact tail `2P(k) R^{-2s} / 2s` beyond
//! the support.
//!
//! The energy form is `B(u, v) = ∬ (u(x)-u(y))(v(x)-v(y)) K(x-y) dx dy`, so that
//! `∫ v Lu = B(u, v)` for the operator `Lu = ∫ (2u(x) - u(x+y) - u(x-y)) K(y) dy`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, DomainGrid};
use crate::error::{Error, Result};
use crate::measure::{kernel_constant, SpectralDensity, SpectralMeasure};
use crate::quadrature::{adaptive, gauss_legendre, AdaptiveOptions, GaussRule, PowerWeightRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MassKind {
    #[default]
    Consistent,
    Lumped,
}

/// Quadrature and discretization switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorOptions {
    /// Radius of the Gauss–Jacobi near field in [`apply_pointwise`].
    pub near_field_radius: f64,
    /// Cap on the adaptive far field in [`apply_pointwise`]; beyond it the
    /// integrand is completed analytically.
    pub far_field_radius: f64,
    /// Gauss rule order for radial pieces and angular sub-arcs.
    pub quad_order: usize,
    pub mass: MassKind,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        OperatorOptions { near_field_radius: 0.05, far_field_radius: 1e3, quad_order: 10, mass: MassKind::Consistent }
    }
}

/// Centred cubic B-spline, the autocorrelation of the unit hat.
pub fn cubic_bspline(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        2.0 / 3.0 - a * a + 0.5 * a * a * a
    } else if a < 2.0 {
        let b = 2.0 - a;
        b * b * b / 6.0
    } else {
        0.0
    }
}

fn hat_correlation(n: usize, x: [f64; 2]) -> f64 {
    if n == 1 {
        cubic_bspline(x[0])
    } else {
        cubic_bspline(x[0]) * cubic_bspline(x[1])
    }
}

/// Quadrature rules shared by all lattice interactions of one order `s`.
struct InteractionRules {
    n: usize,
    s: f64,
    near: PowerWeightRule,
    piece: GaussRule,
    angular: GaussRule,
}

impl InteractionRules {
    fn new(n: usize, s: f64, order: usize) -> Self {
        InteractionRules {
            n,
            s,
            near: PowerWeightRule::new(6, 1.0 - 2.0 * s),
            piece: gauss_legendre(8),
            angular: gauss_legendre(order.max(2)),
        }
    }

    /// Largest ρ for which `k ± ρθ` still meets the open box `(-2, 2)ⁿ`.
    fn exit_radius(&self, k: [f64; 2], theta: [f64; 2]) -> f64 {
        let mut exit: f64 = 0.0;
        for sigma in [1.0, -1.0] {
            let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
            for d in 0..self.n {
                let v = sigma * theta[d];
                if v.abs() < 1e-300 {
                    if k[d].abs() >= 2.0 {
                        hi = -1.0;
                    }
                    continue;
                }
                let (t0, t1) = ((-2.0 - k[d]) / v, (2.0 - k[d]) / v);
                lo = lo.max(t0.min(t1));
                hi = hi.min(t0.max(t1));
            }
            if hi > lo {
                exit = exit.max(hi);
            }
        }
        exit
    }

    /// `∫_0^∞ (2P(k) - P(k+ρθ) - P(k-ρθ)) ρ^{-1-2s} dρ`.
    fn radial(&self, k: [f64; 2], theta: [f64; 2]) -> f64 {
        let n = self.n;
        let s2 = 2.0 * self.s;
        let p0 = hat_correlation(n, k);
        let f = |rho: f64| {
            let plus = [k[0] + rho * theta[0], k[1] + rho * theta[1]];
            let minus = [k[0] - rho * theta[0], k[1] - rho * theta[1]];
            2.0 * p0 - hat_correlation(n, plus) - hat_correlation(n, minus)
        };
        let exit = self.exit_radius(k, theta);
        if exit <= 0.0 {
            // the ray never meets the support, so P(k) = 0 as well
            return 0.0;
        }
        let mut cuts = vec![exit];
        for d in 0..n {
            if theta[d].abs() < 1e-300 {
                continue;
            }
            for m in -2..=2 {
                for sigma in [1.0, -1.0] {
                    let rho = sigma * (m as f64 - k[d]) / theta[d];
                    if rho > 0.0 && rho < exit {
                        cuts.push(rho);
                    }
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());

        let first = cuts[0];
        // f vanishes to second order at ρ = 0 and is a polynomial on [0, first]
        let mut total = self.near.integrate(first, |rho| f(rho) / (rho * rho));
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let pieces = ((4.0 * (b - a) / a).ceil() as usize).max(1);
            let step = (b - a) / pieces as f64;
            for j in 0..pieces {
                let lo = a + j as f64 * step;
                total += self.piece.integrate(lo, lo + step, |rho| f(rho) * rho.powf(-1.0 - s2));
            }
        }
        total + 2.0 * p0 * exit.powf(-s2) / s2
    }
}

/// Unscaled lattice interaction `Q(k)` for every offset in `offsets`.
///
/// `B(φ_i, φ_j) = h^{n-2s} Q(idx_i - idx_j)`.
pub fn lattice_interactions(measure: &SpectralMeasure, offsets: &[[i64; 2]], quad_order: usize) -> Vec<f64> {
    let n = measure.dim();
    let s = measure.order();
    let rules = InteractionRules::new(n, s, quad_order);
    let kappa = kernel_constant(s);
    match measure.density() {
        SpectralDensity::Atoms { plus, minus } => {
            let scale = kappa * (plus + minus);
            offsets
                .par_iter()
                .map(|k| scale * rules.radial([k[0] as f64, 0.0], [1.0, 0.0]))
                .collect()
        }
        SpectralDensity::Arcs(pieces) => {
            let arcs: Vec<(f64, f64, f64)> = half_turn_arcs(pieces);
            offsets
                .par_iter()
                .map(|k| kappa * 2.0 * planar_angular(&rules, &arcs, [k[0] as f64, k[1] as f64]))
                .collect()
        }
    }
}

/// Folds the density onto `[0, π)`; valid because `a(θ) = a(θ + π)`.
fn half_turn_arcs(pieces: &[crate::measure::ArcSegment]) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for p in pieces {
        let (a, b) = (p.from, p.to);
        if b <= PI {
            out.push((a, b, p.weight));
        } else if a >= PI {
            continue;
        } else {
            out.push((a, PI, p.weight));
        }
    }
    out
}

fn planar_angular(rules: &InteractionRules, arcs: &[(f64, f64, f64)], k: [f64; 2]) -> f64 {
    let mut critical = vec![0.0, 0.5 * PI];
    for mx in -2..=2 {
        for my in -2..=2 {
            let dx = mx as f64 - k[0];
            let dy = my as f64 - k[1];
            if dx != 0.0 || dy != 0.0 {
                critical.push(dy.atan2(dx).rem_euclid(PI));
            }
        }
    }
    let mut total = 0.0;
    for &(a, b, w) in arcs {
        let mut cuts: Vec<f64> = critical.iter().copied().filter(|&c| c > a && c < b).collect();
        cuts.push(a);
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14);
        for win in cuts.windows(2) {
            total += w * rules.angular.integrate(win[0], win[1], |t| rules.radial(k, [t.cos(), t.sin()]));
        }
    }
    total
}

/// Canonical representative of `{k, -k}`.
fn canonical(k: [i64; 2]) -> [i64; 2] {
    if k[0] > 0 || (k[0] == 0 && k[1] >= 0) {
        k
    } else {
        [-k[0], -k[1]]
    }
}

/// Stiffness and mass matrices on the interior nodes of a grid.
#[derive(Debug, Clone)]
pub struct OperatorMatrices {
    pub stiffness: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub mass_kind: MassKind,
    pub h: f64,
    pub n: usize,
    pub s: f64,
}

impl OperatorMatrices {
    pub fn len(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `vᵀ K u`, the energy form on grid functions.
    pub fn energy(&self, u: &[f64], v: &[f64]) -> f64 {
        let u = DVector::from_column_slice(u);
        let v = DVector::from_column_slice(v);
        v.dot(&(&self.stiffness * u))
    }

    /// Largest `|K_ij - K_ji| / max|K|`.
    pub fn symmetry_defect(&self) -> f64 {
        let k = &self.stiffness;
        let scale = k.amax().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..k.nrows() {
            for j in 0..i {
                worst = worst.max((k[(i, j)] - k[(j, i)]).abs());
            }
        }
        worst / scale
    }

    /// Writes `row,col,value` lines for the nonzero stiffness (`which = "K"`)
    /// or mass (`which = "M"`) entries.
    pub fn write_triplets<W: Write>(&self, which: &str, mut out: W) -> Result<()> {
        let m = match which {
            "K" => &self.stiffness,
            "M" => &self.mass,
            other => return Err(Error::InvalidParameter(format!("unknown matrix {other}"))),
        };
        writeln!(out, "row,col,value")?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    writeln!(out, "{i},{j},{v:e}")?;
                }
            }
        }
        Ok(())
    }
}

/// The energy form of a measure on a grid.
#[derive(Debug, Clone)]
pub struct EnergyForm<'a> {
    pub measure: &'a SpectralMeasure,
    pub grid: &'a DomainGrid,
    pub options: OperatorOptions,
}

impl<'a> EnergyForm<'a> {
    pub fn new(measure: &'a SpectralMeasure, grid: &'a DomainGrid, options: OperatorOptions) -> Result<Self> {
        if measure.dim() != grid.dim() {
            return Err(Error::InvalidParameter(format!(
                "measure is {}-dimensional but the domain is {}-dimensional",
                measure.dim(),
                grid.dim()
            )));
        }
        Ok(EnergyForm { measure, grid, options })
    }

    pub fn assemble(&self) -> Result<OperatorMatrices> {
        assemble_with(self.measure, self.grid, self.options)
    }
}

/// Assembles `K` and `M` with default options.
pub fn assemble(measure: &SpectralMeasure, grid: &DomainGrid) -> Result<OperatorMatrices> {
    assemble_with(measure, grid, OperatorOptions::default())
}

pub fn assemble_with(measure: &SpectralMeasure, grid: &DomainGrid, options: OperatorOptions) -> Result<OperatorMatrices> {
    EnergyForm::new(measure, grid, options)?;
    let n = grid.dim();
    let s = measure.order();
    let h = grid.h();
    let idx = grid.indices();
    let (mut lo, mut hi) = ([i64::MAX; 2], [i64::MIN; 2]);
    for k in idx {
        for d in 0..2 {
            lo[d] = lo[d].min(k[d]);
            hi[d] = hi[d].max(k[d]);
        }
    }
    let span = [hi[0] - lo[0], hi[1] - lo[1]];
    let width = (2 * span[1] + 1) as usize;
    let slot = |k: [i64; 2]| (k[0] as usize) * width + (k[1] + span[1]) as usize;
    let mut offsets = Vec::new();
    for dx in 0..=span[0] {
        for dy in -span[1]..=span[1] {
            if canonical([dx, dy]) == [dx, dy] {
                offsets.push([dx, dy]);
            }
        }
    }
    let values = lattice_interactions(measure, &offsets, options.quad_order);
    let mut table = vec![f64::NAN; (span[0] as usize + 1) * width];
    for (k, v) in offsets.iter().zip(&values) {
        table[slot(*k)] = *v;
    }
    let scale = h.powf(n as f64 - 2.0 * s);
    let len = grid.len();
    let cell = grid.cell_volume();
    let mut stiffness = DMatrix::zeros(len, len);
    let mut mass = DMatrix::zeros(len, len);
    for i in 0..len {
        for j in 0..=i {
            let d = canonical([idx[i][0] - idx[j][0], idx[i][1] - idx[j][1]]);
            let v = scale * table[slot(d)];
            stiffness[(i, j)] = v;
            stiffness[(j, i)] = v;
            let m = match options.mass {
                MassKind::Consistent => cell * hat_correlation(n, [d[0] as f64, d[1] as f64]),
                MassKind::Lumped => {
                    if i == j {
                        cell
                    } else {
                        0.0
                    }
                }
            };
            if d[0].abs() <= 1 && d[1].abs() <= 1 {
                mass[(i, j)] = m;
                mass[(j, i)] = m;
            }
        }
    }
    let ops = OperatorMatrices { stiffness, mass, mass_kind: options.mass, h, n, s };
    if !ops.stiffness.iter().all(|v| v.is_finite()) {
        return Err(Error::Assembly("non-finite stiffness entry".into()));
    }
    let defect = ops.symmetry_defect();
    if defect > 1e-10 {
        return Err(Error::Assembly(format!("symmetry defect {defect:e}")));
    }
    Ok(ops)
}

/// Cholesky-factored stiffness matrix for repeated Dirichlet solves.
pub struct DirichletSolver<'a> {
    ops: &'a OperatorMatrices,
    chol: Cholesky<f64, Dyn>,
}

impl<'a> DirichletSolver<'a> {
    pub fn new(ops: &'a OperatorMatrices) -> Result<Self> {
        let chol = Cholesky::new(ops.stiffness.clone())
            .ok_or_else(|| Error::Factorization("stiffness matrix is not positive definite".into()))?;
        Ok(DirichletSolver { ops, chol })
    }

    /// Solves `K u = M g`.
    pub fn solve(&self, g: &[f64]) -> Result<Vec<f64>> {
        let g = self.check(g)?;
        let rhs = &self.ops.mass * g;
        Ok(self.chol.solve(&rhs).as_slice().to_vec())
    }

    /// Solves `K u = b` for a precomputed load vector `b_i = ∫ g φ_i`.
    pub fn solve_load(&self, load: &[f64]) -> Result<Vec<f64>> {
        let b = self.check(load)?;
        Ok(self.chol.solve(&b).as_slice().to_vec())
    }

    fn check(&self, v: &[f64]) -> Result<DVector<f64>> {
        if v.len() != self.ops.len() {
            return Err(Error::InvalidParameter(format!(
                "grid function has {} values, expected {}",
                v.len(),
                self.ops.len()
            )));
        }
        Ok(DVector::from_column_slice(v))
    }
}

/// One-shot `K u = M g`.
pub fn solve_dirichlet(ops: &OperatorMatrices, g: &[f64]) -> Result<Vec<f64>> {
    DirichletSolver::new(ops)?.solve(g)
}

/// `Ku` as a grid function, i.e. the weak action of the operator.
pub fn apply_stiffness(ops: &OperatorMatrices, u: &[f64]) -> Vec<f64> {
    (&ops.stiffness * DVector::from_column_slice(u)).as_slice().to_vec()
}

/// Exact load vector `∫ χ_{[a,b]} φ_i` for an interval indicator on a 1D grid.
pub fn indicator_load(grid: &DomainGrid, a: f64, b: f64) -> Vec<f64> {
    let h = grid.h();
    // ∫_{-∞}^{t} hat(x) dx for the unit hat on [-1, 1]
    let cdf = |t: f64| {
        if t <= -1.0 {
            0.0
        } else if t <= 0.0 {
            0.5 * (1.0 + t) * (1.0 + t)
        } else if t <= 1.0 {
            1.0 - 0.5 * (1.0 - t) * (1.0 - t)
        } else {
            1.0
        }
    };
    grid.points()
        .iter()
        .map(|p| h * (cdf((b - p[0]) / h) - cdf((a - p[0]) / h)))
        .collect()
}

/// Result of [`apply_pointwise`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointwiseValue {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Distance along the ray `x + rθ` (r > 0) at which it crosses `∂support`.
fn ray_crossings(support: &Domain, x: &[f64], theta: [f64; 2]) -> Vec<f64> {
    let mut out = Vec::new();
    match *support {
        Domain::Interval { a, b } => {
            for e in [a, b] {
                let r = (e - x[0]) / theta[0];
                if r > 0.0 {
                    out.push(r);
                }
            }
        }
        Domain::Disk { center, radius } => {
            let px = x[0] - center[0];
            let py = x[1] - center[1];
            let bq = px * theta[0] + py * theta[1];
            let c = px * px + py * py - radius * radius;
            let disc = bq * bq - c;
            if disc > 0.0 {
                let sq = disc.sqrt();
                for r in [-bq - sq, -bq + sq] {
                    if r > 0.0 {
                        out.push(r);
                    }
                }
            }
        }
        Domain::Rectangle { min, max } => {
            for d in 0..2 {
                if theta[d] != 0.0 {
                    for e in [min[d], max[d]] {
                        let r = (e - x[d]) / theta[d];
                        if r > 0.0 {
                            out.push(r);
                        }
                    }
                }
            }
        }
    }
    out
}

/// `Lu(x)` by direct quadrature of `∫ (2u(x) - u(x+y) - u(x-y)) K(y) dy`.
///
/// `u` must vanish outside `support`. Near `y = 0` the second difference is
/// integrated with a Gauss–Jacobi rule for the weight `r^{1-2s}` at two orders
/// (their disagreement is the reported error); beyond the near field the
/// integral is adaptive with breakpoints where the rays cross `∂support`.
pub fn apply_pointwise<F>(
    measure: &SpectralMeasure,
    u: F,
    support: &Domain,
    x: &[f64],
    options: &OperatorOptions,
) -> PointwiseValue
where
    F: Fn(&[f64]) -> f64,
{
    let n = measure.dim();
    let s = measure.order();
    let s2 = 2.0 * s;
    let kappa = kernel_constant(s);
    let ux = u(x);
    let dist = support.signed_distance(x).abs();
    let r0 = if dist > 0.0 { options.near_field_radius.min(0.5 * dist) } else { options.near_field_radius };
    let coarse = PowerWeightRule::new(options.quad_order.max(4), 1.0 - s2);
    let fine = PowerWeightRule::new(2 * options.quad_order.max(4), 1.0 - s2);
    let adapt = AdaptiveOptions { abs_tol: 1e-12, rel_tol: 1e-10, max_intervals: 4000 };

    let radial = |theta: [f64; 2]| -> (f64, f64, bool) {
        let at = |r: f64, sign: f64| {
            let y = [x[0] + sign * r * theta[0], x.get(1).copied().unwrap_or(0.0) + sign * r * theta[1]];
            u(&y[..n])
        };
        let second = |r: f64| 2.0 * ux - at(r, 1.0) - at(r, -1.0);
        let near_c = coarse.integrate(r0, |r| second(r) / (r * r));
        let near_f = fine.integrate(r0, |r| second(r) / (r * r));
        let mut cuts: Vec<f64> = ray_crossings(support, x, theta);
        cuts.extend(ray_crossings(support, x, [-theta[0], -theta[1]]));
        let reach = cuts.iter().copied().fold(r0, f64::max).min(options.far_field_radius).max(r0);
        let far = adaptive(|r| second(r) * r.powf(-1.0 - s2), r0, reach, &cuts, adapt);
        // beyond `reach` both rays have left the support
        let tail = 2.0 * ux * reach.powf(-s2) / s2;
        (near_f + far.value + tail, (near_f - near_c).abs() + far.error, far.converged)
    };

    let (value, error, converged) = match measure.density() {
        SpectralDensity::Atoms { plus, minus } => {
            let (v, e, c) = radial([1.0, 0.0]);
            (kappa * (plus + minus) * v, kappa * (plus + minus) * e, c)
        }
        SpectralDensity::Arcs(pieces) => {
            let arcs = half_turn_arcs(pieces);
            let rule = gauss_legendre(4 * options.quad_order.max(4));
            let (mut v, mut e, mut c) = (0.0, 0.0, true);
            for (a, b, w) in arcs {
                let steps = ((b - a) / 0.25).ceil().max(1.0) as usize;
                let dt = (b - a) / steps as f64;
                for j in 0..steps {
                    let lo = a + j as f64 * dt;
                    for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
                        let theta = lo + 0.5 * dt * (t + 1.0);
                        let (rv, re, rc) = radial([theta.cos(), theta.sin()]);
                        let ww = 0.5 * dt * wt * w;
                        v += ww * rv;
                        e += ww * re;
                        c &= rc;
                    }
                }
            }
            (2.0 * kappa * v, 2.0 * kappa * e, c)
        }
    };
    let tol = 1e-6 * value.abs().max(1e-12);
    PointwiseValue { value, error, converged: converged && error <= tol.max(1e-8) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    fn iso1(s: f64) -> SpectralMeasure {
        SpectralMeasure::isotropic(1, s).unwrap()
    }

    /// Q(k) for A(ξ) = |ξ|^{2s} in 1D through the fourth difference of |z|³,
    /// using `(-Δ)^s |z|³ = 6 |z|^{3-2s} / (Γ(4-2s) cos πs)` (s ≠ 1/2).
    fn closed_form_q(k: f64, s: f64) -> f64 {
        let g = |z: f64| {
            if z == 0.0 {
                0.0
            } else {
                z.abs().powf(3.0 - 2.0 * s) / (2.0 * gamma(4.0 - 2.0 * s) * (PI * s).cos())
            }
        };
        let c = [1.0, -4.0, 6.0, -4.0, 1.0];
        (0..5).map(|j| c[j] * g(k + j as f64 - 2.0)).sum()
    }

    /// The s → 1/2 limit of the above.
    fn closed_form_q_half(k: f64) -> f64 {
        let g = |z: f64| if z == 0.0 { 0.0 } else { z * z * z.abs().ln() / (2.0 * PI) };
        let c = [1.0, -4.0, 6.0, -4.0, 1.0];
        (0..5).map(|j| c[j] * g(k + j as f64 - 2.0)).sum::<f64>()
    }

    #[test]
    fn bspline_partition_of_unity() {
        for &x in &[0.0, 0.13, 0.5, 0.99] {
            let total: f64 = (-3..=3).map(|j| cubic_bspline(x + j as f64)).sum();
            assert!((total - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn one_dimensional_interactions_match_sum_rule() {
        for &s in &[0.2, 0.5, 0.8] {
            let offs: Vec<[i64; 2]> = (0..400).map(|k| [k, 0]).collect();
            let q = lattice_interactions(&iso1(s), &offs, 10);
            let mut total = q[0];
            for v in &q[1..] {
                total += 2.0 * v;
            }
            // Q(k) ≈ -κ k^{-1-2s} beyond the computed range
            let kappa = kernel_constant(s);
            let tail = -2.0 * kappa * 399.5f64.powf(-2.0 * s) / (2.0 * s);
            assert!((total + tail).abs() < 1e-6 * q[0], "s={s} {total} {tail}");
            // nearest neighbours turn positive for small s, where K approaches a mass matrix
            let first = if s < 0.5 { 2 } else { 1 };
            let bad: Vec<(usize, f64)> = q.iter().copied().enumerate().skip(first).filter(|(_, v)| *v >= 0.0).collect();
            assert!(bad.is_empty(), "s={s} {:?}", &bad[..bad.len().min(5)]);
        }
    }

    #[test]
    fn one_dimensional_interactions_match_closed_form() {
        for &s in &[0.15, 0.3, 0.7, 0.9] {
            let offs: Vec<[i64; 2]> = (0..12).map(|k| [k, 0]).collect();
            let q = lattice_interactions(&iso1(s), &offs, 10);
            for (k, v) in q.iter().enumerate() {
                let exact = closed_form_q(k as f64, s);
                assert!((v - exact).abs() < 1e-10 * q[0].abs(), "s={s} k={k} {v} vs {exact}");
            }
        }
        let q = lattice_interactions(&iso1(0.5), &[[0, 0], [1, 0], [5, 0]], 10);
        for (v, k) in q.iter().zip([0.0, 1.0, 5.0]) {
            assert!((v - closed_form_q_half(k)).abs() < 1e-12, "{v} {}", closed_form_q_half(k));
        }
    }

    #[test]
    fn atoms_scale_interactions() {
        let m = SpectralMeasure::one_dimensional(0.4, 1.5, 1.5, 2.0, true).unwrap();
        let a = lattice_interactions(&m, &[[0, 0], [3, 0]], 10);
        let b = lattice_interactions(&iso1(0.4), &[[0, 0], [3, 0]], 10);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - 3.0 * y).abs() < 1e-14 * x.abs());
        }
    }

    #[test]
    fn planar_interactions_symmetry_and_far_field() {
        let m = SpectralMeasure::isotropic(2, 0.5).unwrap();
        let offs = [[1, 2], [2, 1], [0, 0], [1, 0], [0, 1], [12, 5]];
        let q = lattice_interactions(&m, &offs, 12);
        assert!((q[0] - q[1]).abs() < 1e-10 * q[2]);
        assert!((q[3] - q[4]).abs() < 1e-10 * q[2]);
        let r: f64 = (144.0f64 + 25.0).sqrt();
        let far = -2.0 * kernel_constant(0.5) / crate::measure::circle_moment(0.5) * r.powf(-3.0);
        assert!((q[5] / far - 1.0).abs() < 0.01, "{} vs {far}", q[5]);
        let finer = lattice_interactions(&m, &offs, 24);
        for (a, b) in q.iter().zip(&finer) {
            assert!((a - b).abs() < 1e-9 * q[2]);
        }
    }

    #[test]
    fn ball_solution_is_constant_under_pointwise_operator() {
        let m = iso1(0.5);
        let support = Domain::interval(-1.0, 1.0);
        let u = |x: &[f64]| (1.0 - x[0] * x[0]).max(0.0).sqrt();
        for &x in &[0.0, 0.3, -0.62, 0.9] {
            let r = apply_pointwise(&m, u, &support, &[x], &OperatorOptions::default());
            assert!((r.value - 1.0).abs() < 1e-6, "x={x} {r:?}");
        }
    }

    #[test]
    fn pointwise_on_zero_is_zero() {
        let m = SpectralMeasure::isotropic(2, 0.3).unwrap();
        let r = apply_pointwise(&m, |_| 0.0, &Domain::disk([0.0, 0.0], 1.0), &[0.2, 0.1], &OperatorOptions::default());
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn stiffness_is_toeplitz_and_positive() {
        let g = DomainGrid::build(Domain::interval(-1.0, 1.0), 0.125).unwrap();
        let ops = assemble(&iso1(0.5), &g).unwrap();
        assert_eq!(ops.symmetry_defect(), 0.0);
        assert!(Cholesky::new(ops.stiffness.clone()).is_some());
        assert!((ops.stiffness[(2, 5)] - ops.stiffness[(7, 10)]).abs() == 0.0);
        let mut buf = Vec::new();
        ops.write_triplets("M", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("row,col,value\n0,0,"));
    }

    #[test]
    fn indicator_load_integrates_hats() {
        let g = DomainGrid::build(Domain::interval(-1.0, 1.0), 0.125).unwrap();
        let full = indicator_load(&g, -2.0, 2.0);
        assert!(full.iter().all(|v| (v - 0.125).abs() < 1e-15));
        let half = indicator_load(&g, 0.0, 2.0);
        assert!((half[7] - 0.0625).abs() < 1e-15);
    }
}
