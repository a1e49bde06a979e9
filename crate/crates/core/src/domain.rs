//! Bounded domains on uniform lattices.
//!
//! A [`DomainGrid`] holds the lattice nodes strictly inside the domain, the
//! exact distance `δ(x)` to the boundary at each node, integer lattice indices
//! (used for translation-invariant assembly) and a boundary quadrature with
//! outward normals.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interior nodes closer than this fraction of `h` to the boundary are dropped.
const BOUNDARY_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Disk { center: [f64; 2], radius: f64 },
    Rectangle { min: [f64; 2], max: [f64; 2] },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Self {
        Domain::Interval { a, b }
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Self {
        Domain::Disk { center, radius }
    }

    pub fn rectangle(min: [f64; 2], max: [f64; 2]) -> Self {
        Domain::Rectangle { min, max }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Domain::Interval { a, b } => a.is_finite() && b.is_finite() && a < b,
            Domain::Disk { center, radius } => {
                center.iter().all(|c| c.is_finite()) && radius.is_finite() && radius > 0.0
            }
            Domain::Rectangle { min, max } => {
                min.iter().chain(&max).all(|c| c.is_finite()) && min[0] < max[0] && min[1] < max[1]
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDomain(format!("{self:?} has empty interior")))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Disk { radius, .. } => 0.5 * TAU * radius * radius,
            Domain::Rectangle { min, max } => (max[0] - min[0]) * (max[1] - min[1]),
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Disk { radius, .. } => 2.0 * radius,
            Domain::Rectangle { min, max } => (max[0] - min[0]).hypot(max[1] - min[1]),
        }
    }

    /// Exact distance to the boundary, positive inside and negative outside.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match *self {
            Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Domain::Disk { center, radius } => radius - (x[0] - center[0]).hypot(x[1] - center[1]),
            Domain::Rectangle { min, max } => {
                let dx = (x[0] - min[0]).min(max[0] - x[0]);
                let dy = (x[1] - min[1]).min(max[1] - x[1]);
                if dx >= 0.0 && dy >= 0.0 {
                    dx.min(dy)
                } else {
                    let ox = (-dx).max(0.0);
                    let oy = (-dy).max(0.0);
                    -ox.hypot(oy)
                }
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.signed_distance(x) > 0.0
    }

    /// Disks and intervals are C^{1,1}; rectangles have corners.
    pub fn is_c11(&self) -> bool {
        !matches!(self, Domain::Rectangle { .. })
    }

    /// Advisory note attached to diagnostics on non-smooth domains.
    pub fn advisory(&self) -> Option<&'static str> {
        (!self.is_c11()).then_some("corners: Lipschitz only")
    }

    /// Axis-aligned bounding box `(min, max)`; the second axis is `[0, 0]` in 1D.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            Domain::Interval { a, b } => ([a, 0.0], [b, 0.0]),
            Domain::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            Domain::Rectangle { min, max } => (min, max),
        }
    }

    /// Parameter range `[r_in, r_out]` (with `r_in ≥ 0`) of the ray `x + r ω`
    /// inside the closed domain.
    pub fn ray_segment(&self, x: &[f64], omega: &[f64]) -> Option<(f64, f64)> {
        let clip = |lo: f64, hi: f64| (hi > lo.max(0.0)).then(|| (lo.max(0.0), hi));
        match *self {
            Domain::Interval { a, b } => {
                let w = omega[0];
                if w == 0.0 {
                    return (x[0] >= a && x[0] <= b).then_some((0.0, f64::INFINITY));
                }
                let (r1, r2) = ((a - x[0]) / w, (b - x[0]) / w);
                clip(r1.min(r2), r1.max(r2))
            }
            Domain::Disk { center, radius } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let b = d[0] * omega[0] + d[1] * omega[1];
                let c = d[0] * d[0] + d[1] * d[1] - radius * radius;
                let disc = b * b - c;
                if disc <= 0.0 {
                    return None;
                }
                let q = disc.sqrt();
                clip(-b - q, -b + q)
            }
            Domain::Rectangle { min, max } => {
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for d in 0..2 {
                    if omega[d] == 0.0 {
                        if x[d] < min[d] || x[d] > max[d] {
                            return None;
                        }
                    } else {
                        let (r1, r2) = ((min[d] - x[d]) / omega[d], (max[d] - x[d]) / omega[d]);
                        lo = lo.max(r1.min(r2));
                        hi = hi.min(r1.max(r2));
                    }
                }
                clip(lo, hi)
            }
        }
    }

    fn lattice_origin(&self) -> [f64; 2] {
        match *self {
            Domain::Interval { a, .. } => [a, 0.0],
            Domain::Disk { center, .. } => center,
            Domain::Rectangle { min, .. } => min,
        }
    }
}

/// Boundary nodes with outward unit normals and arc-length weights.
/// In one dimension the weights are counting measure on the two endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryQuadrature {
    pub points: Vec<[f64; 2]>,
    pub normals: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl BoundaryQuadrature {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `∫_{∂Ω} f(x, ν) dσ`.
    pub fn integrate<F: FnMut(&[f64; 2], &[f64; 2]) -> f64>(&self, mut f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.normals)
            .zip(&self.weights)
            .map(|((p, nu), w)| w * f(p, nu))
            .sum()
    }

    fn build(domain: &Domain, h: f64) -> Self {
        let mut q = BoundaryQuadrature { points: vec![], normals: vec![], weights: vec![] };
        match *domain {
            Domain::Interval { a, b } => {
                q.points = vec![[a, 0.0], [b, 0.0]];
                q.normals = vec![[-1.0, 0.0], [1.0, 0.0]];
                q.weights = vec![1.0, 1.0];
            }
            Domain::Disk { center, radius } => {
                let m = ((TAU * radius / h).ceil() as usize).max(64);
                let w = TAU * radius / m as f64;
                for k in 0..m {
                    let t = TAU * (k as f64 + 0.5) / m as f64;
                    let nu = [t.cos(), t.sin()];
                    q.points.push([center[0] + radius * nu[0], center[1] + radius * nu[1]]);
                    q.normals.push(nu);
                    q.weights.push(w);
                }
            }
            Domain::Rectangle { min, max } => {
                let sides: [([f64; 2], [f64; 2], [f64; 2]); 4] = [
                    ([min[0], min[1]], [max[0], min[1]], [0.0, -1.0]),
                    ([max[0], min[1]], [max[0], max[1]], [1.0, 0.0]),
                    ([max[0], max[1]], [min[0], max[1]], [0.0, 1.0]),
                    ([min[0], max[1]], [min[0], min[1]], [-1.0, 0.0]),
                ];
                for (p0, p1, nu) in sides {
                    let len = (p1[0] - p0[0]).hypot(p1[1] - p0[1]);
                    let m = ((len / h).ceil() as usize).max(8);
                    for k in 0..m {
                        let t = (k as f64 + 0.5) / m as f64;
                        q.points.push([p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])]);
                        q.normals.push(nu);
                        q.weights.push(len / m as f64);
                    }
                }
            }
        }
        q
    }
}

/// Uniform lattice `origin + h·ℤⁿ` intersected with the domain interior.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainGrid {
    domain: Domain,
    h: f64,
    origin: [f64; 2],
    indices: Vec<[i64; 2]>,
    points: Vec<[f64; 2]>,
    delta: Vec<f64>,
    boundary: BoundaryQuadrature,
}

impl DomainGrid {
    /// Builds the grid; nodes are ordered lexicographically by lattice index.
    pub fn build(domain: Domain, h: f64) -> Result<Self> {
        domain.validate()?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter(format!("spacing must be positive, got {h}")));
        }
        if h >= domain.diameter() / 8.0 {
            return Err(Error::InvalidParameter(format!(
                "spacing {h} must be below diameter/8 = {}",
                domain.diameter() / 8.0
            )));
        }
        let origin = domain.lattice_origin();
        let n = domain.dim();
        let reach = (domain.diameter() / h).ceil() as i64 + 1;
        let mut indices = Vec::new();
        let mut points = Vec::new();
        let mut delta = Vec::new();
        let j_range = if n == 1 { 0..=0 } else { -reach..=reach };
        for i in -reach..=reach {
            for j in j_range.clone() {
                let x = [origin[0] + i as f64 * h, origin[1] + j as f64 * h];
                let d = domain.signed_distance(&x[..n]);
                if d > BOUNDARY_GAP * h {
                    indices.push([i, j]);
                    points.push(x);
                    delta.push(d);
                }
            }
        }
        if points.is_empty() {
            return Err(Error::EmptyGrid { h });
        }
        Ok(DomainGrid { domain, h, origin, indices, points, delta, boundary: BoundaryQuadrature::build(&domain, h) })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Coordinates of node `i` (first `dim()` entries are meaningful).
    pub fn point(&self, i: usize) -> [f64; 2] {
        self.points[i]
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn indices(&self) -> &[[i64; 2]] {
        &self.indices
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn boundary(&self) -> &BoundaryQuadrature {
        &self.boundary
    }

    /// Quadrature weight of each node, `hⁿ`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    /// Node-count estimate of `|Ω|`.
    pub fn lattice_volume(&self) -> f64 {
        self.len() as f64 * self.cell_volume()
    }

    /// Nodes with `δ ≥ ρ`.
    pub fn inner_region(&self, rho: f64) -> Result<Vec<usize>> {
        if !(rho >= 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be nonnegative, got {rho}")));
        }
        Ok((0..self.len()).filter(|&i| self.delta[i] >= rho).collect())
    }

    pub fn advisory(&self) -> Option<&'static str> {
        self.domain.advisory()
    }

    pub fn max_delta(&self) -> f64 {
        self.delta.iter().copied().fold(0.0, f64::max)
    }

    /// Samples `f` at every node.
    pub fn sample<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> Vec<f64> {
        let n = self.dim();
        self.points.iter().map(|p| f(&p[..n])).collect()
    }

    /// Node index of lattice index `idx`, if it is an interior node.
    pub fn find(&self, idx: [i64; 2]) -> Option<usize> {
        self.indices.binary_search(&idx).ok()
    }

    /// Discrete `L^p` norm with node weights `hⁿ` (`p = ∞` gives the max).
    pub fn lp_norm(&self, f: &[f64], p: f64) -> f64 {
        if p.is_infinite() {
            return f.iter().fold(0.0, |m, v| m.max(v.abs()));
        }
        let w = self.cell_volume();
        (f.iter().map(|v| v.abs().powf(p)).sum::<f64>() * w).powf(1.0 / p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_example() {
        let g = DomainGrid::build(Domain::interval(-4.0, 4.0), 0.5).unwrap();
        let xs: Vec<f64> = g.points().iter().map(|p| p[0]).collect();
        assert_eq!(xs, (0..15).map(|i| -3.5 + 0.5 * i as f64).collect::<Vec<_>>());
        assert_eq!(&g.delta()[..3], &[0.5, 1.0, 1.5]);
        assert_eq!(g.delta()[7], 4.0);
        assert_eq!(g.inner_region(3.6).unwrap(), vec![7]);
        assert_eq!(g.inner_region(0.0).unwrap().len(), 15);
    }

    #[test]
    fn interval_inner_region_quarter_spacing() {
        let g = DomainGrid::build(Domain::interval(-2.0, 2.0), 0.25).unwrap();
        let sel: Vec<f64> = g.inner_region(1.5).unwrap().iter().map(|&i| g.point(i)[0]).collect();
        assert_eq!(sel, vec![-0.5, -0.25, 0.0, 0.25, 0.5]);
    }

    #[test]
    fn disk_nodes_and_distance() {
        let g = DomainGrid::build(Domain::disk([0.0, 0.0], 1.0), 0.2).unwrap();
        for (p, d) in g.points().iter().zip(g.delta()) {
            let r = p[0].hypot(p[1]);
            assert!(r < 1.0);
            assert!((d - (1.0 - r)).abs() < 1e-15);
        }
        // 69 lattice points with |x| < 1 at h = 1/5; those on the circle are dropped
        assert_eq!(g.len(), 69);
        let centre = g.find([0, 0]).unwrap();
        assert_eq!(g.inner_region(1.0).unwrap(), vec![centre]);
        let shifted = DomainGrid::build(Domain::disk([0.25, 0.0], 1.0), 0.2).unwrap();
        assert!(shifted.find([0, 0]).is_some());
    }

    #[test]
    fn lexicographic_order_and_lookup() {
        let g = DomainGrid::build(Domain::rectangle([0.0, 0.0], [1.0, 0.5]), 0.125).unwrap();
        assert!(g.indices().windows(2).all(|w| w[0] < w[1]));
        for (i, idx) in g.indices().iter().enumerate() {
            assert_eq!(g.find(*idx), Some(i));
        }
        assert_eq!(g.advisory(), Some("corners: Lipschitz only"));
    }

    #[test]
    fn divergence_identity_on_boundary() {
        for d in [Domain::disk([0.3, -0.2], 1.0), Domain::rectangle([-1.0, 0.0], [0.5, 2.0])] {
            let g = DomainGrid::build(d, d.diameter() / 64.0).unwrap();
            let flux = g.boundary().integrate(|x, nu| x[0] * nu[0] + x[1] * nu[1]);
            assert!((flux - 2.0 * d.volume()).abs() < 0.01 * 2.0 * d.volume(), "{flux}");
        }
        let g = DomainGrid::build(Domain::interval(-1.0, 3.0), 0.1).unwrap();
        assert!((g.boundary().integrate(|x, nu| x[0] * nu[0]) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(DomainGrid::build(Domain::interval(1.0, -1.0), 0.1).is_err());
        assert!(matches!(DomainGrid::build(Domain::interval(-1.0, 1.0), 0.25), Err(Error::InvalidParameter(_))));
        assert!(DomainGrid::build(Domain::disk([0.0, 0.0], 1.0), -0.1).is_err());
    }

    #[test]
    fn json_shape() {
        let d: Domain = serde_json::from_str(r#"{"type":"interval","a":-1,"b":1}"#).unwrap();
        assert_eq!(d, Domain::interval(-1.0, 1.0));
        let d: Domain = serde_json::from_str(r#"{"type":"disk","center":[0,0],"radius":1}"#).unwrap();
        assert_eq!(d.dim(), 2);
    }
}
