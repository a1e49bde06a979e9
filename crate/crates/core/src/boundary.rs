//! Boundary behaviour of grid functions: `u/δ^s` quotients and their traces,
//! empirical Hölder seminorms on inner regions `Ω_ρ`, and the Pohozaev
//! identity for the fractional Laplacian.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::domain::DomainGrid;
use crate::error::{Error, Result};
use crate::measure::SpectralMeasure;
use crate::spectral::fit_slope;

/// Point sets above this size are subsampled by [`holder_seminorm_points`].
pub const EXHAUSTIVE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Seminorm {
    pub value: f64,
    pub pairs: usize,
    /// Fraction of all pairs that were examined.
    pub coverage: f64,
}

/// `max |f(x) - f(y)| / |x - y|^β` over pairs of points.
///
/// Exhaustive up to [`EXHAUSTIVE_LIMIT`] points; larger sets are reduced to a
/// seeded random subset of that size.
pub fn holder_seminorm_points(points: &[[f64; 2]], values: &[f64], beta: f64, seed: u64) -> Seminorm {
    let n = points.len();
    let total = n * n.saturating_sub(1) / 2;
    let chosen: Vec<usize> = if n <= EXHAUSTIVE_LIMIT {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, n, EXHAUSTIVE_LIMIT).into_vec();
        idx.sort_unstable();
        idx
    };
    let mut best: f64 = 0.0;
    let mut pairs = 0;
    for (a, &i) in chosen.iter().enumerate() {
        let (pi, fi) = (points[i], values[i]);
        for &j in &chosen[a + 1..] {
            let d = (pi[0] - points[j][0]).hypot(pi[1] - points[j][1]);
            if d > 0.0 {
                best = best.max((fi - values[j]).abs() / d.powf(beta));
            }
            pairs += 1;
        }
    }
    Seminorm { value: best, pairs, coverage: if total == 0 { 1.0 } else { pairs as f64 / total as f64 } }
}

/// Seminorm of a grid function over a subset of its nodes.
pub fn holder_seminorm(grid: &DomainGrid, f: &[f64], region: &[usize], beta: f64) -> Result<Seminorm> {
    if region.len() < 2 {
        return Err(Error::InvalidParameter("seminorm needs at least two nodes".into()));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!("beta must lie in (0, 1], got {beta}")));
    }
    let pts: Vec<[f64; 2]> = region.iter().map(|&i| grid.point(i)).collect();
    let vals: Vec<f64> = region.iter().map(|&i| f[i]).collect();
    Ok(holder_seminorm_points(&pts, &vals, beta, 0))
}

/// `u / δ^s` at every node.
pub fn quotient_values(u: &[f64], grid: &DomainGrid, s: f64) -> Vec<f64> {
    u.iter().zip(grid.delta()).map(|(v, d)| v / d.powf(s)).collect()
}

/// Value at `x` of the hat-function interpolant of nodal data (zero outside).
pub fn fe_value(grid: &DomainGrid, u: &[f64], x: &[f64]) -> f64 {
    let h = grid.h();
    let o = grid.origin();
    let node = |i: i64, j: i64| grid.find([i, j]).map_or(0.0, |k| u[k]);
    let tx = (x[0] - o[0]) / h;
    let ix = tx.floor();
    let fx = tx - ix;
    let ix = ix as i64;
    if grid.dim() == 1 {
        return (1.0 - fx) * node(ix, 0) + fx * node(ix + 1, 0);
    }
    let ty = (x[1] - o[1]) / h;
    let iy = ty.floor();
    let fy = ty - iy;
    let iy = iy as i64;
    (1.0 - fx) * (1.0 - fy) * node(ix, iy)
        + fx * (1.0 - fy) * node(ix + 1, iy)
        + (1.0 - fx) * fy * node(ix, iy + 1)
        + fx * fy * node(ix + 1, iy + 1)
}

/// Central-difference gradient at each node (zero exterior values).
pub fn nodal_gradient(grid: &DomainGrid, u: &[f64]) -> Vec<[f64; 2]> {
    let n = grid.dim();
    grid.indices()
        .iter()
        .map(|idx| {
            let mut g = [0.0; 2];
            for d in 0..n {
                let mut up = *idx;
                let mut dn = *idx;
                up[d] += 1;
                dn[d] -= 1;
                let fu = grid.find(up).map_or(0.0, |k| u[k]);
                let fd = grid.find(dn).map_or(0.0, |k| u[k]);
                g[d] = (fu - fd) / (2.0 * grid.h());
            }
            g
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub point: [f64; 2],
    pub normal: [f64; 2],
    pub weight: f64,
    /// Extrapolated `u/δ^s` from the stencil `δ ∈ {2h, 4h}`.
    pub value: f64,
    /// Same from `δ ∈ {3h, 6h}`.
    pub alternate: f64,
    pub uncertainty: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryProfile {
    pub s: f64,
    pub quotient: Vec<f64>,
    pub trace: Vec<TracePoint>,
}

impl BoundaryProfile {
    pub fn all_converged(&self) -> bool {
        self.trace.iter().all(|t| t.converged)
    }

    /// `∫_{∂Ω} (u/δ^s)² (x-o)·ν dσ`.
    pub fn weighted_square_trace(&self, origin: [f64; 2]) -> f64 {
        self.trace
            .iter()
            .map(|t| {
                let xn = (t.point[0] - origin[0]) * t.normal[0] + (t.point[1] - origin[1]) * t.normal[1];
                t.weight * t.value * t.value * xn
            })
            .sum()
    }
}

fn signed_pow(v: f64, e: f64) -> f64 {
    v.signum() * v.abs().powf(e)
}

/// Trace of `u/δ^s` from two samples at `δ = j₁h, j₂h` along the inward normal.
///
/// Near the boundary `u ≈ T (δ - δ₀)^s`, where `δ₀ = O(h)` absorbs the
/// boundary layer of the Galerkin solution. `sign(u)|u|^{1/s}` is then affine in
/// `δ`, and its slope is `T^{1/s}`.
fn trace_from_samples(v1: f64, v2: f64, d1: f64, d2: f64, s: f64) -> f64 {
    let slope = (signed_pow(v2, 1.0 / s) - signed_pow(v1, 1.0 / s)) / (d2 - d1);
    signed_pow(slope, s)
}

/// Per-node quotient and extrapolated boundary trace.
pub fn quotient_profile(u: &[f64], grid: &DomainGrid, s: f64) -> Result<BoundaryProfile> {
    if u.len() != grid.len() {
        return Err(Error::InvalidParameter(format!("{} values for {} nodes", u.len(), grid.len())));
    }
    let h = grid.h();
    let n = grid.dim();
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let bq = grid.boundary();
    let trace = bq
        .points
        .iter()
        .zip(&bq.normals)
        .zip(&bq.weights)
        .map(|((p, nu), &w)| {
            let at = |j: f64| {
                let x = [p[0] - j * h * nu[0], p[1] - j * h * nu[1]];
                fe_value(grid, u, &x[..n])
            };
            let value = trace_from_samples(at(2.0), at(4.0), 2.0 * h, 4.0 * h, s);
            let alternate = trace_from_samples(at(3.0), at(6.0), 3.0 * h, 6.0 * h, s);
            let uncertainty = (value - alternate).abs();
            let converged = uncertainty <= 0.05 * value.abs().max(alternate.abs()) || uncertainty <= 1e-10 * scale;
            TracePoint { point: *p, normal: *nu, weight: w, value, alternate, uncertainty, converged }
        })
        .collect();
    Ok(BoundaryProfile { s, quotient: quotient_values(u, grid, s), trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanTarget {
    /// Seminorms of `u` (hypothesis (a)).
    Solution,
    /// Seminorms of `u/δ^s` (hypothesis (b)).
    Quotient,
}

/// Seminorms of one order over a ladder of inner regions.
#[derive(Debug, Clone, Serialize)]
pub struct SeminormScan {
    pub target: ScanTarget,
    pub beta: f64,
    pub rhos: Vec<f64>,
    pub seminorms: Vec<f64>,
    /// Log-log slope of seminorm against ρ.
    pub slope: f64,
    /// Growth rate allowed by the hypothesis: `s - β` or `α - β`.
    pub expected_slope: f64,
    /// `β ≥ 1` is measured on the central-difference gradient.
    pub gradient_surrogate: bool,
    pub passes: bool,
}

/// Ladder `ρ = 2h, 4h, 8h, 16h`, dropping rungs above `max δ / 4`.
pub fn default_rho_ladder(grid: &DomainGrid) -> Vec<f64> {
    let hi = grid.max_delta() / 4.0;
    [2.0, 4.0, 8.0, 16.0].iter().map(|j| j * grid.h()).filter(|&r| r <= hi).collect()
}

fn scan_one(
    grid: &DomainGrid,
    f: &[f64],
    grad: &[[f64; 2]],
    target: ScanTarget,
    beta: f64,
    expected: f64,
    rhos: &[f64],
) -> Result<SeminormScan> {
    let n = grid.dim();
    let mut seminorms = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let region = grid.inner_region(rho)?;
        if region.len() < 2 {
            return Err(Error::InvalidParameter(format!("Ω_ρ has fewer than two nodes at ρ = {rho}")));
        }
        let value = if beta < 1.0 {
            holder_seminorm(grid, f, &region, beta)?.value
        } else if beta == 1.0 {
            region
                .iter()
                .map(|&i| grad[i][..n].iter().map(|g| g * g).sum::<f64>().sqrt())
                .fold(0.0, f64::max)
        } else {
            let mut worst: f64 = 0.0;
            for d in 0..n {
                let comp: Vec<f64> = grad.iter().map(|g| g[d]).collect();
                worst = worst.max(holder_seminorm(grid, &comp, &region, beta - 1.0)?.value);
            }
            worst
        };
        seminorms.push(value);
    }
    let lx: Vec<f64> = rhos.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = seminorms.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let slope = fit_slope(&lx, &ly);
    Ok(SeminormScan {
        target,
        beta,
        rhos: rhos.to_vec(),
        seminorms,
        slope,
        expected_slope: expected,
        gradient_surrogate: beta >= 1.0,
        passes: slope >= expected - 0.15,
    })
}

/// Seminorm scans of `u` (orders `betas_a`, expected growth `ρ^{s-β}`) and of
/// `u/δ^s` (orders `betas_b`, expected growth `ρ^{α-β}`).
pub fn hypothesis_scan(
    u: &[f64],
    grid: &DomainGrid,
    s: f64,
    alpha: f64,
    betas_a: &[f64],
    betas_b: &[f64],
    rhos: &[f64],
) -> Result<(Vec<SeminormScan>, Vec<SeminormScan>)> {
    if rhos.len() < 2 {
        return Err(Error::InvalidParameter("ρ ladder needs at least two rungs".into()));
    }
    for &b in betas_a.iter().chain(betas_b) {
        if !(b > 0.0 && b <= 2.0) {
            return Err(Error::InvalidParameter(format!("beta {b} outside (0, 2]")));
        }
    }
    let grad = nodal_gradient(grid, u);
    let q = quotient_values(u, grid, s);
    let qgrad = nodal_gradient_of_values(grid, &q);
    let a = betas_a
        .iter()
        .map(|&b| scan_one(grid, u, &grad, ScanTarget::Solution, b, s - b, rhos))
        .collect::<Result<Vec<_>>>()?;
    let bq = betas_b
        .iter()
        .map(|&b| scan_one(grid, &q, &qgrad, ScanTarget::Quotient, b, alpha - b, rhos))
        .collect::<Result<Vec<_>>>()?;
    Ok((a, bq))
}

/// Gradient of a nodal field whose exterior values are unknown: one-sided
/// differences where a neighbour is missing.
fn nodal_gradient_of_values(grid: &DomainGrid, f: &[f64]) -> Vec<[f64; 2]> {
    let n = grid.dim();
    let h = grid.h();
    grid.indices()
        .iter()
        .enumerate()
        .map(|(i, idx)| {
            let mut g = [0.0; 2];
            for d in 0..n {
                let mut up = *idx;
                let mut dn = *idx;
                up[d] += 1;
                dn[d] -= 1;
                g[d] = match (grid.find(up), grid.find(dn)) {
                    (Some(a), Some(b)) => (f[a] - f[b]) / (2.0 * h),
                    (Some(a), None) => (f[a] - f[i]) / h,
                    (None, Some(b)) => (f[i] - f[b]) / h,
                    (None, None) => 0.0,
                };
            }
            g
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PohozaevReport {
    /// `∫ (x·∇u) Lu`.
    pub lhs: f64,
    /// `(2s-n)/2 ∫ u Lu - μ Γ(1+s)²/2 ∫_{∂Ω} (u/δ^s)² (x·ν)`.
    pub rhs: f64,
    pub volume_term: f64,
    pub boundary_term: f64,
    pub residual: f64,
    pub trace_converged: bool,
    pub max_trace_uncertainty: f64,
}

/// Pohozaev identity with the origin at `0`.
pub fn pohozaev_residual(measure: &SpectralMeasure, grid: &DomainGrid, u: &[f64], lu: &[f64]) -> Result<PohozaevReport> {
    pohozaev_residual_about(measure, grid, u, lu, [0.0, 0.0])
}

/// Pohozaev identity with `x` measured from `origin`.
///
/// Only operators with symbol `μ|ξ|^{2s}` are accepted; the boundary term is
/// scaled by `μ`.
pub fn pohozaev_residual_about(
    measure: &SpectralMeasure,
    grid: &DomainGrid,
    u: &[f64],
    lu: &[f64],
    origin: [f64; 2],
) -> Result<PohozaevReport> {
    let mu = measure
        .isotropic_scale()
        .ok_or_else(|| Error::Unsupported("the Pohozaev identity needs an isotropic measure".into()))?;
    if u.len() != grid.len() || lu.len() != grid.len() {
        return Err(Error::InvalidParameter("u and Lu must be nodal on the grid".into()));
    }
    let s = measure.order();
    let n = grid.dim();
    let (lhs, u_lu) = cell_integrals(grid, u, lu, origin);
    let volume_term = (2.0 * s - n as f64) / 2.0 * u_lu;
    let profile = quotient_profile(u, grid, s)?;
    let g = gamma(1.0 + s);
    let boundary_term = -mu * g * g / 2.0 * profile.weighted_square_trace(origin);
    let rhs = volume_term + boundary_term;
    let scale = lhs.abs().max(rhs.abs());
    Ok(PohozaevReport {
        lhs,
        rhs,
        volume_term,
        boundary_term,
        residual: if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale },
        trace_converged: profile.all_converged(),
        max_trace_uncertainty: profile.trace.iter().map(|t| t.uncertainty).fold(0.0, f64::max),
    })
}

/// `(∫ ((x-o)·∇u_h) Lu_h, ∫ u_h Lu_h)` integrated exactly cell by cell, with
/// `u_h` the hat-function interpolant (zero outside) and `Lu_h` the
/// interpolant of `lu`. Corners of a cell without a node take the mean of
/// the cell's available `lu` values.
pub fn cell_integrals(grid: &DomainGrid, u: &[f64], lu: &[f64], origin: [f64; 2]) -> (f64, f64) {
    let h = grid.h();
    let o = grid.origin();
    let mut cells: Vec<[i64; 2]> = Vec::new();
    let n = grid.dim();
    for idx in grid.indices() {
        if n == 1 {
            cells.push([idx[0] - 1, 0]);
            cells.push([idx[0], 0]);
        } else {
            for dx in [-1, 0] {
                for dy in [-1, 0] {
                    cells.push([idx[0] + dx, idx[1] + dy]);
                }
            }
        }
    }
    cells.sort_unstable();
    cells.dedup();
    // two-point Gauss nodes on [0, 1]
    let g = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let (mut xgrad, mut ulu) = (0.0, 0.0);
    for c in cells {
        if n == 1 {
            let ids = [grid.find([c[0], 0]), grid.find([c[0] + 1, 0])];
            let uv = ids.map(|k| k.map_or(0.0, |k| u[k]));
            let present: Vec<f64> = ids.iter().flatten().map(|&k| lu[k]).collect();
            let mean = present.iter().sum::<f64>() / present.len() as f64;
            let lv = ids.map(|k| k.map_or(mean, |k| lu[k]));
            let x0 = o[0] + c[0] as f64 * h - origin[0];
            let du = (uv[1] - uv[0]) / h;
            for t in g {
                let x = x0 + t * h;
                let uu = uv[0] + t * (uv[1] - uv[0]);
                let ll = lv[0] + t * (lv[1] - lv[0]);
                xgrad += 0.5 * h * x * du * ll;
                ulu += 0.5 * h * uu * ll;
            }
        } else {
            let corners = [[0, 0], [1, 0], [0, 1], [1, 1]];
            let ids = corners.map(|d| grid.find([c[0] + d[0], c[1] + d[1]]));
            let uv = ids.map(|k| k.map_or(0.0, |k| u[k]));
            let present: Vec<f64> = ids.iter().flatten().map(|&k| lu[k]).collect();
            let mean = present.iter().sum::<f64>() / present.len() as f64;
            let lv = ids.map(|k| k.map_or(mean, |k| lu[k]));
            let x0 = o[0] + c[0] as f64 * h - origin[0];
            let y0 = o[1] + c[1] as f64 * h - origin[1];
            for a in g {
                for b in g {
                    let bil = |v: [f64; 4]| {
                        (1.0 - a) * (1.0 - b) * v[0] + a * (1.0 - b) * v[1] + (1.0 - a) * b * v[2] + a * b * v[3]
                    };
                    let ux = ((1.0 - b) * (uv[1] - uv[0]) + b * (uv[3] - uv[2])) / h;
                    let uy = ((1.0 - a) * (uv[2] - uv[0]) + a * (uv[3] - uv[1])) / h;
                    let ll = bil(lv);
                    let wq = 0.25 * h * h;
                    xgrad += wq * ((x0 + a * h) * ux + (y0 + b * h) * uy) * ll;
                    ulu += wq * bil(uv) * ll;
                }
            }
        }
    }
    (xgrad, ulu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;

    #[test]
    fn seminorm_examples() {
        let g = DomainGrid::build(Domain::interval(0.0, 1.0), 1.0 / 16.0).unwrap();
        let all = g.inner_region(0.0).unwrap();
        let c = vec![3.0; g.len()];
        assert_eq!(holder_seminorm(&g, &c, &all, 0.5).unwrap().value, 0.0);
        let lin = g.sample(|x| x[0]);
        assert!((holder_seminorm(&g, &lin, &all, 1.0).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quotient_of_distance_power_is_one() {
        let g = DomainGrid::build(Domain::disk([0.0, 0.0], 1.0), 1.0 / 16.0).unwrap();
        let u: Vec<f64> = g.delta().iter().map(|d| d.powf(0.3)).collect();
        let p = quotient_profile(&u, &g, 0.3).unwrap();
        assert!(p.quotient.iter().all(|q| (q - 1.0).abs() < 1e-12));
    }

    #[test]
    fn trace_of_exact_profile() {
        let g = DomainGrid::build(Domain::interval(-1.0, 1.0), 1.0 / 256.0).unwrap();
        let u = g.sample(|x| (1.0 - x[0] * x[0]).sqrt());
        let p = quotient_profile(&u, &g, 0.5).unwrap();
        for t in &p.trace {
            assert!((t.value - 2f64.sqrt()).abs() < 1e-2, "{t:?}");
            assert!(t.converged);
        }
    }

    #[test]
    fn zero_function_has_zero_pohozaev_terms() {
        let m = SpectralMeasure::isotropic(1, 0.5).unwrap();
        let g = DomainGrid::build(Domain::interval(-1.0, 1.0), 1.0 / 32.0).unwrap();
        let z = vec![0.0; g.len()];
        let r = pohozaev_residual(&m, &g, &z, &z).unwrap();
        assert_eq!((r.lhs, r.rhs, r.residual), (0.0, 0.0, 0.0));
        let aniso = SpectralMeasure::one_dimensional(0.5, 0.5, 0.5, 1.0, true).unwrap();
        assert!(pohozaev_residual(&aniso, &g, &z, &z).is_ok());
        let arc = [crate::measure::ArcSegment { from: 0.0, to: 1.0, weight: 1.0 }];
        let sector = SpectralMeasure::planar(0.5, &arc, 1.0, false).unwrap();
        let d = DomainGrid::build(Domain::disk([0.0, 0.0], 1.0), 0.2).unwrap();
        let zd = vec![0.0; d.len()];
        assert!(matches!(pohozaev_residual(&sector, &d, &zd, &zd), Err(Error::Unsupported(_))));
    }

    #[test]
    fn fe_interpolant_reproduces_nodes() {
        let g = DomainGrid::build(Domain::rectangle([0.0, 0.0], [1.0, 1.0]), 0.125).unwrap();
        let u = g.sample(|x| x[0] + 2.0 * x[1]);
        for i in 0..g.len() {
            let p = g.point(i);
            assert!((fe_value(&g, &u, &p) - u[i]).abs() < 1e-14);
        }
        let mid = fe_value(&g, &u, &[0.3125, 0.4375]);
        assert!((mid - (0.3125 + 0.875)).abs() < 1e-14);
    }
}
