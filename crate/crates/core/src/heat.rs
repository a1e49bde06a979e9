//! Heat-semigroup solutions by eigenfunction expansion.
//!
//! `u(·,t) = Σ uₖ e^{-λₖ t} φₖ` with `uₖ = φₖᵀ M u₀` (or `φₖᵀ b` for an exact
//! load vector `bᵢ = ∫ u₀ φᵢ`). Time is exact; only space is discretized.

use nalgebra::DVector;
use serde::Serialize;
use statrs::function::gamma::{gamma, gamma_ur};

use crate::boundary::{holder_seminorm_points, quotient_values};
use crate::domain::DomainGrid;
use crate::error::{Error, Result};
use crate::spectral::{fit_slope, EigenSystem};

#[derive(Debug, Clone)]
pub struct HeatSolution<'a> {
    pub eig: &'a EigenSystem,
    pub coefficients: Vec<f64>,
    /// `‖u₀‖²_{L²}`.
    pub initial_norm_sq: f64,
}

/// Projects nodal initial data `u0` (mass-matrix inner product).
pub fn project<'a>(eig: &'a EigenSystem, u0: &[f64]) -> Result<HeatSolution<'a>> {
    check_len(eig, u0)?;
    let u = DVector::from_column_slice(u0);
    let mu = &eig.mass * &u;
    let coefficients = (0..eig.len()).map(|k| eig.vectors.column(k).dot(&mu)).collect();
    Ok(HeatSolution { eig, coefficients, initial_norm_sq: u.dot(&mu) })
}

/// Projects data given by its exact load vector `bᵢ = ∫ u₀ φᵢ` and `‖u₀‖²`.
pub fn project_load<'a>(eig: &'a EigenSystem, load: &[f64], norm_sq: f64) -> Result<HeatSolution<'a>> {
    check_len(eig, load)?;
    let b = DVector::from_column_slice(load);
    let coefficients = (0..eig.len()).map(|k| eig.vectors.column(k).dot(&b)).collect();
    Ok(HeatSolution { eig, coefficients, initial_norm_sq: norm_sq })
}

fn check_len(eig: &EigenSystem, v: &[f64]) -> Result<()> {
    if v.len() != eig.nodes() {
        return Err(Error::InvalidParameter(format!(
            "initial datum has {} values, grid has {}",
            v.len(),
            eig.nodes()
        )));
    }
    Ok(())
}

impl<'a> HeatSolution<'a> {
    /// `u(·, t)` at the nodes.
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        self.time_derivative(0, t)
    }

    /// `∂ₜʲ u(·, t) = (-1)ʲ Σ λₖʲ uₖ e^{-λₖt} φₖ`, weights formed in log space.
    pub fn time_derivative(&self, j: u32, t: f64) -> Vec<f64> {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let mut out = DVector::zeros(self.eig.nodes());
        for (k, (&lam, &c)) in self.eig.values.iter().zip(&self.coefficients).enumerate() {
            if c == 0.0 {
                continue;
            }
            let w = (j as f64 * lam.ln() - lam * t).exp();
            if w == 0.0 {
                continue;
            }
            out.axpy(sign * c * w, &self.eig.vectors.column(k), 1.0);
        }
        out.as_slice().to_vec()
    }

    /// `(Σ uₖ² e^{-2λₖt})^{1/2}` for each `t`.
    pub fn l2_decay(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter()
            .map(|&t| {
                self.eig
                    .values
                    .iter()
                    .zip(&self.coefficients)
                    .map(|(l, c)| c * c * (-2.0 * l * t).exp())
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    pub fn coefficient_energy(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }

    /// Re-expands `u(·, t)` as a new solution; used for semigroup checks.
    pub fn restart(&self, t: f64) -> HeatSolution<'a> {
        let coefficients = self
            .eig
            .values
            .iter()
            .zip(&self.coefficients)
            .map(|(l, c)| c * (-l * t).exp())
            .collect::<Vec<_>>();
        let norm_sq = coefficients.iter().map(|c| c * c).sum();
        HeatSolution { eig: self.eig, coefficients, initial_norm_sq: norm_sq }
    }
}

/// Explicit bound on `Σ_{k ≥ k₀} λₖ^w e^{-λₖ t₀}` from the envelope
/// `C₀kᵞ/2 ≤ λₖ ≤ 3C₀kᵞ/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBound {
    pub t0: f64,
    pub w: u32,
    pub gamma: f64,
    pub beta: f64,
    pub k0: usize,
    pub c0: f64,
    pub value: f64,
}

/// `(3/2)^w C₀^w · 2^{β+1} / (γ C₀^{β+1} t₀^{β+1}) · Γ(β+1, C₀ t₀ k₀ᵞ / 2)`
/// with `γ = 2s/n`, `β = w + n/2s − 1` and the upper incomplete gamma function.
pub fn tail_bound(c0: f64, n: usize, s: f64, w: u32, t0: f64, k0: usize) -> Result<TailBound> {
    if !(t0 > 0.0) || !(c0 > 0.0) {
        return Err(Error::InvalidParameter("t0 and C0 must be positive".into()));
    }
    let gamma_exp = 2.0 * s / n as f64;
    let beta = w as f64 + 1.0 / gamma_exp - 1.0;
    let a = beta + 1.0;
    let z0 = c0 * t0 * (k0 as f64).powf(gamma_exp) / 2.0;
    let upper = if z0 == 0.0 { gamma(a) } else { gamma(a) * gamma_ur(a, z0) };
    let value = 1.5f64.powi(w as i32) * c0.powi(w as i32) * 2f64.powf(a) / (gamma_exp * c0.powf(a) * t0.powf(a)) * upper;
    Ok(TailBound { t0, w, gamma: gamma_exp, beta, k0, c0, value })
}

/// `Σ_{k ≥ k₀} λₖ^w e^{-λₖ t₀}` over the computed eigenvalues (k one-based).
pub fn direct_tail_sum(values: &[f64], w: u32, t0: f64, k0: usize) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|(i, _)| i + 1 >= k0.max(1))
        .map(|(_, &l)| (w as f64 * l.ln() - l * t0).exp())
        .sum()
}

/// First one-based `k` from which `λ` stays in `[C₀kᵞ/2, 3C₀kᵞ/2]` for
/// `run` consecutive indices.
pub fn select_k0(values: &[f64], c0: f64, gamma_exp: f64, run: usize) -> Option<usize> {
    let inside: Vec<bool> = values
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let env = c0 * ((i + 1) as f64).powf(gamma_exp);
            l >= 0.5 * env && l <= 1.5 * env
        })
        .collect();
    let mut streak = 0;
    for (i, &ok) in inside.iter().enumerate() {
        streak = if ok { streak + 1 } else { 0 };
        if streak == run {
            return Some(i + 2 - run);
        }
    }
    None
}

/// Envelope compliance over the computed spectrum from `k0` on.
pub fn envelope_violations(values: &[f64], c0: f64, gamma_exp: f64, k0: usize) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(i, _)| i + 1 >= k0)
        .filter(|(i, &l)| {
            let env = c0 * ((i + 1) as f64).powf(gamma_exp);
            l < 0.5 * env || l > 1.5 * env
        })
        .map(|(i, _)| i + 1)
        .collect()
}

/// One sampled time of [`uniform_bound_audit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorRow {
    pub t: f64,
    pub l2: f64,
    /// `[u(·,t)]_{C^s}` of the zero extension.
    pub holder: f64,
    /// `[u(·,t)/δ^s]_{C^{s-ε}}` over the interior nodes.
    pub quotient: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformBoundAudit {
    pub rows: Vec<MonitorRow>,
    pub maximized_at_t0: bool,
    pub nonincreasing: bool,
    /// `monitor(t₀) / ‖u₀‖_{L²}` for the two monitors.
    pub c1: f64,
    pub c2: f64,
    /// Log-log blow-up exponents of the monitors as `t₀` is halved.
    pub blowup_holder: f64,
    pub blowup_quotient: f64,
    /// `w + n/2s`, the reference order.
    pub reference_order: f64,
}

/// Monitors `[u]_{C^s}` and `[u/δ^s]_{C^{s-ε}}` on `t ∈ {t₀, 2t₀, 4t₀, …}`
/// and fits their blow-up order on `{t₀, t₀/2, t₀/4, …}`.
pub fn uniform_bound_audit(
    sol: &HeatSolution,
    grid: &DomainGrid,
    t0: f64,
    eps: f64,
    w: u32,
    levels: usize,
) -> Result<UniformBoundAudit> {
    if !(t0 > 0.0) || levels < 2 {
        return Err(Error::InvalidParameter("need t0 > 0 and at least two levels".into()));
    }
    let s = sol.eig.s;
    let (ext_points, n_interior) = zero_extension_points(grid);
    let monitor = |t: f64| -> MonitorRow {
        let u = sol.evaluate(t);
        let mut vals = u.clone();
        vals.resize(ext_points.len(), 0.0);
        let holder = holder_seminorm_points(&ext_points, &vals, s, 0).value;
        let q = quotient_values(&u, grid, s);
        let quotient = holder_seminorm_points(&ext_points[..n_interior], &q, (s - eps).max(1e-3), 0).value;
        let l2 = sol.l2_decay(&[t])[0];
        MonitorRow { t, l2, holder, quotient }
    };
    let rows: Vec<MonitorRow> = (0..levels).map(|j| monitor(t0 * 2f64.powi(j as i32))).collect();
    let tol = 1e-12;
    let maximized_at_t0 = rows
        .iter()
        .all(|r| r.holder <= rows[0].holder * (1.0 + tol) && r.quotient <= rows[0].quotient * (1.0 + tol));
    let nonincreasing = rows.windows(2).all(|p| {
        p[1].holder <= p[0].holder * (1.0 + tol) && p[1].quotient <= p[0].quotient * (1.0 + tol)
    });
    let sweep: Vec<MonitorRow> = (0..levels).map(|j| monitor(t0 * 0.5f64.powi(j as i32))).collect();
    let lx: Vec<f64> = sweep.iter().map(|r| r.t.ln()).collect();
    let hy: Vec<f64> = sweep.iter().map(|r| r.holder.ln()).collect();
    let qy: Vec<f64> = sweep.iter().map(|r| r.quotient.ln()).collect();
    let norm0 = sol.initial_norm_sq.sqrt();
    Ok(UniformBoundAudit {
        c1: rows[0].holder / norm0,
        c2: rows[0].quotient / norm0,
        rows,
        maximized_at_t0,
        nonincreasing,
        blowup_holder: -fit_slope(&lx, &hy),
        blowup_quotient: -fit_slope(&lx, &qy),
        reference_order: w as f64 + grid.dim() as f64 / (2.0 * s),
    })
}

/// Interior nodes followed by boundary quadrature points (value zero).
fn zero_extension_points(grid: &DomainGrid) -> (Vec<[f64; 2]>, usize) {
    let mut pts = grid.points().to_vec();
    let n = pts.len();
    pts.extend(grid.boundary().points.iter().copied());
    (pts, n)
}

/// Named initial data.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InitialData {
    /// The k-th discrete eigenfunction (one-based).
    Eigenmode { k: usize },
    /// Indicator of `(a, b)` (first coordinate in 2D).
    Indicator { a: f64, b: f64 },
    /// `(1 - |x|²)_+^s`.
    BallProfile,
}

impl InitialData {
    /// Projects the datum, using exact hat integrals for 1D indicators.
    pub fn project<'a>(&self, eig: &'a EigenSystem, grid: &DomainGrid) -> Result<HeatSolution<'a>> {
        match *self {
            InitialData::Eigenmode { k } => {
                if k == 0 || k > eig.len() {
                    return Err(Error::InvalidParameter(format!("eigenmode {k} not available")));
                }
                project(eig, &eig.vector(k - 1))
            }
            InitialData::Indicator { a, b } => {
                if !(a < b) {
                    return Err(Error::InvalidParameter("indicator needs a < b".into()));
                }
                if grid.dim() == 1 {
                    let load = crate::operator::indicator_load(grid, a, b);
                    let (lo, hi) = match *grid.domain() {
                        crate::domain::Domain::Interval { a: da, b: db } => (a.max(da), b.min(db)),
                        _ => (a, b),
                    };
                    project_load(eig, &load, (hi - lo).max(0.0))
                } else {
                    project(eig, &grid.sample(|x| if x[0] > a && x[0] < b { 1.0 } else { 0.0 }))
                }
            }
            InitialData::BallProfile => {
                let s = eig.s;
                project(eig, &grid.sample(|x| (1.0 - x.iter().map(|v| v * v).sum::<f64>()).max(0.0).powf(s)))
            }
        }
    }
}
