//! Spectral measures of symmetric stable operators and their Fourier symbols.
//!
//! A stable operator of order `2s` is determined by an angular density `a(θ)`
//! on the unit sphere. Its symbol is
//!
//! ```text
//! A(ξ) = ∫_{S^{n-1}} |ξ·θ|^{2s} a(θ) dθ,
//! ```
//!
//! so the density is stored in "symbol units": `a₊ = a₋ = 1/2` in one
//! dimension gives `A(ξ) = |ξ|^{2s}`. The kernel of the operator is
//! `κ_s a(y/|y|) / |y|^{n+2s}` with `κ_s` from [`kernel_constant`].
//!
//! Supported densities are two atoms on `{+1, -1}` (n = 1) and piecewise
//! constant arc densities on the circle (n = 2). For arcs the symbol is
//! evaluated through the antiderivative of `|sin t|^{2s}`, computed with a
//! Gauss–Jacobi rule that absorbs the `t^{2s}` endpoint behaviour, so the only
//! approximation is a smooth one-dimensional quadrature.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::PowerWeightRule;

/// Number of equispaced directions used to approximate the infimum defining μ₁.
pub const DIRECTION_GRID: usize = 1024;
/// Default Gauss–Jacobi order for the angular antiderivative.
pub const DEFAULT_SPHERE_ORDER: usize = 24;

const BREAK_TOL: f64 = 1e-13;

/// A constant-weight arc `[from, to)` of the circle, angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcSegment {
    pub from: f64,
    pub to: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity {
    /// n = 1: weights on the two points of S⁰.
    Atoms { plus: f64, minus: f64 },
    /// n = 2: disjoint, sorted pieces inside `[0, 2π)` with positive weight.
    Arcs(Vec<ArcSegment>),
}

/// Spectral measure `(s, a)` with its ellipticity constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    s: f64,
    density: SpectralDensity,
    lambda2: f64,
    mu1: f64,
    mu2: f64,
}

/// Kernel normalization: the operator with kernel `κ_s a(θ) |y|^{-n-2s}` acting
/// by symmetric second differences has symbol exactly `∫|ξ·θ|^{2s} a(θ) dθ`.
pub fn kernel_constant(s: f64) -> f64 {
    gamma(1.0 + 2.0 * s) * (PI * s).sin() / PI
}

/// `∫_0^{2π} |cos θ|^{2s} dθ = 2 B(1/2, s + 1/2)`.
pub fn circle_moment(s: f64) -> f64 {
    2.0 * PI.sqrt() * gamma(s + 0.5) / gamma(s + 1.0)
}

impl SpectralMeasure {
    /// Two-atom measure on S⁰. With `strict = false` an asymmetric pair is
    /// replaced by its average, which leaves the symbol unchanged.
    pub fn one_dimensional(s: f64, plus: f64, minus: f64, lambda2: f64, strict: bool) -> Result<Self> {
        check_order(s)?;
        if !(plus.is_finite() && minus.is_finite()) || plus < 0.0 || minus < 0.0 {
            return Err(Error::InvalidMeasure("atom weights must be finite and nonnegative".into()));
        }
        let (plus, minus) = if (plus - minus).abs() > 1e-12 * plus.max(minus) {
            if strict {
                return Err(Error::InvalidMeasure(format!(
                    "asymmetric atoms a+ = {plus}, a- = {minus}"
                )));
            }
            let m = 0.5 * (plus + minus);
            (m, m)
        } else {
            (plus, minus)
        };
        Self::finish(s, SpectralDensity::Atoms { plus, minus }, lambda2)
    }

    /// Piecewise-constant arc density on S¹. Overlapping segments add up;
    /// segments may wrap around `2π`.
    pub fn planar(s: f64, segments: &[ArcSegment], lambda2: f64, strict: bool) -> Result<Self> {
        check_order(s)?;
        let pieces = canonical_pieces(segments)?;
        let pieces = if is_antipodal_symmetric(&pieces) {
            pieces
        } else if strict {
            return Err(Error::InvalidMeasure(
                "arc density is not invariant under θ ↦ θ + π".into(),
            ));
        } else {
            symmetrize(&pieces)
        };
        if pieces.is_empty() {
            return Err(Error::InvalidMeasure("density vanishes identically".into()));
        }
        Self::finish(s, SpectralDensity::Arcs(pieces), lambda2)
    }

    /// The fractional Laplacian `(-Δ)^s`, i.e. the density making `A(ξ) = |ξ|^{2s}`.
    pub fn isotropic(n: usize, s: f64) -> Result<Self> {
        check_order(s)?;
        match n {
            1 => Self::one_dimensional(s, 0.5, 0.5, 0.5, true),
            2 => {
                let w = 1.0 / circle_moment(s);
                Self::planar(s, &[ArcSegment { from: 0.0, to: TAU, weight: w }], w, true)
            }
            _ => Err(Error::InvalidMeasure(format!("dimension {n} is not supported"))),
        }
    }

    fn finish(s: f64, density: SpectralDensity, lambda2: f64) -> Result<Self> {
        let max_weight = match &density {
            SpectralDensity::Atoms { plus, minus } => plus.max(*minus),
            SpectralDensity::Arcs(p) => p.iter().map(|a| a.weight).fold(0.0, f64::max),
        };
        if !(lambda2.is_finite() && lambda2 > 0.0) {
            return Err(Error::InvalidMeasure(format!("lambda2 must be positive, got {lambda2}")));
        }
        if max_weight > lambda2 * (1.0 + 1e-12) {
            return Err(Error::InvalidMeasure(format!(
                "density exceeds its declared cap: max a = {max_weight} > lambda2 = {lambda2}"
            )));
        }
        let mut m = SpectralMeasure { s, density, lambda2, mu1: 0.0, mu2: 0.0 };
        let sphere = SphereQuadrature::new(s, DEFAULT_SPHERE_ORDER);
        m.mu2 = m.mass();
        m.mu1 = match &m.density {
            SpectralDensity::Atoms { plus, minus } => plus + minus,
            SpectralDensity::Arcs(_) => {
                let step = TAU / DIRECTION_GRID as f64;
                let count = DIRECTION_GRID / 2;
                let grid: Vec<f64> = (0..count).map(|j| sphere.angular_moment(&m, step * j as f64)).collect();
                let best = grid.iter().copied().fold(f64::INFINITY, f64::min);
                let mut mu1 = best;
                for j in 0..count {
                    let (prev, next) = (grid[(j + count - 1) % count], grid[(j + 1) % count]);
                    if grid[j] <= prev && grid[j] <= next && grid[j] <= best * 1.05 {
                        let centre = step * j as f64;
                        let f = |phi: f64| sphere.angular_moment(&m, phi);
                        mu1 = mu1.min(golden_minimum(f, centre - step, centre + step));
                    }
                }
                mu1
            }
        };
        if !(m.mu1 > 1e-12 * m.mu2.max(1e-300)) {
            return Err(Error::NotElliptic { mu1: m.mu1 });
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        match self.density {
            SpectralDensity::Atoms { .. } => 1,
            SpectralDensity::Arcs(_) => 2,
        }
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    pub fn density(&self) -> &SpectralDensity {
        &self.density
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// `(μ₁, μ₂)`; μ₁ is the minimum over [`DIRECTION_GRID`] directions,
    /// refined by golden-section search around the grid's local minima.
    pub fn ellipticity(&self) -> (f64, f64) {
        (self.mu1, self.mu2)
    }

    fn mass(&self) -> f64 {
        match &self.density {
            SpectralDensity::Atoms { plus, minus } => plus + minus,
            SpectralDensity::Arcs(p) => p.iter().map(|a| a.weight * (a.to - a.from)).sum(),
        }
    }

    /// Density value at angle `theta` (n = 2) or at `sign(theta)` (n = 1).
    pub fn weight_at(&self, theta: f64) -> f64 {
        match &self.density {
            SpectralDensity::Atoms { plus, minus } => {
                if theta >= 0.0 {
                    *plus
                } else {
                    *minus
                }
            }
            SpectralDensity::Arcs(p) => arc_weight(p, theta),
        }
    }

    /// `Some(μ)` when `A(ξ) = μ |ξ|^{2s}`.
    pub fn isotropic_scale(&self) -> Option<f64> {
        match &self.density {
            SpectralDensity::Atoms { plus, minus } => Some(plus + minus),
            SpectralDensity::Arcs(p) => {
                let covers = p.len() == 1 && p[0].from <= BREAK_TOL && p[0].to >= TAU - BREAK_TOL;
                covers.then(|| p[0].weight * circle_moment(self.s))
            }
        }
    }
}

/// Golden-section minimum of `f` on `[a, b]`.
fn golden_minimum<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = fc.min(fd).min(f(a)).min(f(b));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        best = best.min(fc).min(fd);
    }
    best
}

fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidMeasure(format!("order s must lie in (0, 1), got {s}")))
    }
}

fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

fn arc_weight(pieces: &[ArcSegment], theta: f64) -> f64 {
    let t = wrap_angle(theta);
    pieces
        .iter()
        .find(|a| t >= a.from && t < a.to)
        .map_or(0.0, |a| a.weight)
}

fn canonical_pieces(segments: &[ArcSegment]) -> Result<Vec<ArcSegment>> {
    let mut raw: Vec<ArcSegment> = Vec::new();
    for seg in segments {
        if !(seg.from.is_finite() && seg.to.is_finite() && seg.weight.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite arc segment".into()));
        }
        if seg.weight < 0.0 {
            return Err(Error::InvalidMeasure(format!("negative weight {}", seg.weight)));
        }
        let len = seg.to - seg.from;
        if len <= 0.0 || len > TAU + BREAK_TOL {
            return Err(Error::InvalidMeasure(format!(
                "arc [{}, {}) must have length in (0, 2π]",
                seg.from, seg.to
            )));
        }
        if seg.weight == 0.0 {
            continue;
        }
        let shift = (seg.from / TAU).floor() * TAU;
        let a = seg.from - shift;
        let b = (seg.to - shift).min(a + TAU);
        if b > TAU + BREAK_TOL {
            raw.push(ArcSegment { from: a, to: TAU, weight: seg.weight });
            raw.push(ArcSegment { from: 0.0, to: b - TAU, weight: seg.weight });
        } else {
            raw.push(ArcSegment { from: a, to: b.min(TAU), weight: seg.weight });
        }
    }
    let mut cuts = vec![0.0, TAU];
    for r in &raw {
        cuts.push(r.from);
        cuts.push(r.to);
    }
    let elementary = elementary_intervals(cuts);
    let pieces = elementary
        .into_iter()
        .map(|(a, b)| {
            let m = 0.5 * (a + b);
            let w: f64 = raw.iter().filter(|r| m >= r.from && m < r.to).map(|r| r.weight).sum();
            ArcSegment { from: a, to: b, weight: w }
        })
        .collect();
    Ok(merge_pieces(pieces))
}

fn elementary_intervals(mut cuts: Vec<f64>) -> Vec<(f64, f64)> {
    cuts.sort_by(f64::total_cmp);
    let mut uniq: Vec<f64> = Vec::with_capacity(cuts.len());
    for c in cuts {
        if uniq.last().map_or(true, |l| c - l > BREAK_TOL) {
            uniq.push(c);
        }
    }
    uniq.windows(2).map(|w| (w[0], w[1])).collect()
}

fn merge_pieces(pieces: Vec<ArcSegment>) -> Vec<ArcSegment> {
    let mut out: Vec<ArcSegment> = Vec::new();
    for p in pieces.into_iter().filter(|p| p.weight > 0.0) {
        match out.last_mut() {
            Some(last) if (last.to - p.from).abs() <= BREAK_TOL && last.weight == p.weight => {
                last.to = p.to;
            }
            _ => out.push(p),
        }
    }
    out
}

fn antipodal_cuts(pieces: &[ArcSegment]) -> Vec<(f64, f64)> {
    let mut cuts = vec![0.0, PI, TAU];
    for p in pieces {
        for t in [p.from, p.to] {
            cuts.push(wrap_angle(t));
            cuts.push(wrap_angle(t + PI));
        }
    }
    elementary_intervals(cuts)
}

fn is_antipodal_symmetric(pieces: &[ArcSegment]) -> bool {
    let scale = pieces.iter().map(|p| p.weight).fold(0.0, f64::max).max(1e-300);
    antipodal_cuts(pieces).into_iter().all(|(a, b)| {
        let m = 0.5 * (a + b);
        (arc_weight(pieces, m) - arc_weight(pieces, m + PI)).abs() <= 1e-12 * scale
    })
}

fn symmetrize(pieces: &[ArcSegment]) -> Vec<ArcSegment> {
    let sym = antipodal_cuts(pieces)
        .into_iter()
        .map(|(a, b)| {
            let m = 0.5 * (a + b);
            ArcSegment {
                from: a,
                to: b,
                weight: 0.5 * (arc_weight(pieces, m) + arc_weight(pieces, m + PI)),
            }
        })
        .collect();
    merge_pieces(sym)
}

/// Antiderivative of `|sin t|^{2s}` evaluated by a Gauss–Jacobi rule with
/// weight `t^{2s}`, applied to the analytic factor `(sin t / t)^{2s}`.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    s: f64,
    rule: PowerWeightRule,
    half_turn: f64,
}

impl SphereQuadrature {
    pub fn new(s: f64, order: usize) -> Self {
        let rule = PowerWeightRule::new(order, 2.0 * s);
        let mut q = SphereQuadrature { s, rule, half_turn: 0.0 };
        q.half_turn = 2.0 * q.quarter(std::f64::consts::FRAC_PI_2);
        q
    }

    fn quarter(&self, x: f64) -> f64 {
        let s2 = 2.0 * self.s;
        self.rule.integrate(x, |t| (t.sin() / t).powf(s2))
    }

    /// `∫_0^x |sin t|^{2s} dt` for `x ∈ [0, π]`.
    fn hump(&self, x: f64) -> f64 {
        if x <= std::f64::consts::FRAC_PI_2 {
            self.quarter(x)
        } else {
            self.half_turn - self.quarter(PI - x)
        }
    }

    /// Global antiderivative `H(ψ) = ∫_0^ψ |sin t|^{2s} dt`.
    pub fn antiderivative(&self, psi: f64) -> f64 {
        let m = (psi / PI).floor();
        let rem = (psi - m * PI).clamp(0.0, PI);
        m * self.half_turn + self.hump(rem)
    }

    /// `∫ a(θ) |cos(θ - φ)|^{2s} dθ`, the symbol on the unit vector at angle φ.
    pub fn angular_moment(&self, measure: &SpectralMeasure, phi: f64) -> f64 {
        match &measure.density {
            SpectralDensity::Atoms { plus, minus } => plus + minus,
            SpectralDensity::Arcs(pieces) => {
                let shift = std::f64::consts::FRAC_PI_2 - phi;
                pieces
                    .iter()
                    .map(|p| {
                        p.weight * (self.antiderivative(p.to + shift) - self.antiderivative(p.from + shift))
                    })
                    .sum()
            }
        }
    }
}

/// A measure paired with the quadrature used to evaluate its symbol.
#[derive(Debug, Clone)]
pub struct SymbolProfile {
    measure: SpectralMeasure,
    sphere: SphereQuadrature,
    order: usize,
}

impl SymbolProfile {
    pub fn new(measure: SpectralMeasure) -> Self {
        Self::with_order(measure, DEFAULT_SPHERE_ORDER)
    }

    pub fn with_order(measure: SpectralMeasure, order: usize) -> Self {
        let sphere = SphereQuadrature::new(measure.s, order.max(2));
        SymbolProfile { measure, sphere, order }
    }

    pub fn measure(&self) -> &SpectralMeasure {
        &self.measure
    }

    pub fn quadrature_order(&self) -> usize {
        self.order
    }

    /// `A(ξ)`; `xi` must have `measure.dim()` components.
    pub fn symbol(&self, xi: &[f64]) -> f64 {
        let s2 = 2.0 * self.measure.s;
        match &self.measure.density {
            SpectralDensity::Atoms { plus, minus } => xi[0].abs().powf(s2) * (plus + minus),
            SpectralDensity::Arcs(_) => {
                let r = xi[0].hypot(xi[1]);
                if r == 0.0 {
                    return 0.0;
                }
                r.powf(s2) * self.sphere.angular_moment(&self.measure, xi[1].atan2(xi[0]))
            }
        }
    }

    /// Symbol restricted to the unit circle, `A(cos φ, sin φ)`.
    pub fn angular_symbol(&self, phi: f64) -> f64 {
        self.sphere.angular_moment(&self.measure, phi)
    }
}

/// Outcome of [`second_difference_certificate`].
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest `lhs - rhs` observed (negative when every trial has slack).
    pub max_excess: f64,
    /// Smallest relative slack `(rhs - lhs) / rhs` among trials with `η ≠ 0`.
    pub min_relative_slack: f64,
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
}

impl CertificateReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `A(ξ+η) + A(ξ−η) − 2A(ξ) ≤ 2|η|^{2s} μ₂` on random pairs.
///
/// Magnitudes are log-uniform in `[1e-2, 1e2]` so both the small- and
/// large-frequency regimes are exercised.
pub fn second_difference_certificate(profile: &SymbolProfile, trials: usize, seed: u64) -> CertificateReport {
    let m = profile.measure();
    let n = m.dim();
    let (_, mu2) = m.ellipticity();
    let s2 = 2.0 * m.s;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mag = 10f64.powf(rng.gen_range(-2.0..2.0));
        if n == 1 {
            vec![if rng.gen::<bool>() { mag } else { -mag }]
        } else {
            let phi = rng.gen_range(0.0..TAU);
            vec![mag * phi.cos(), mag * phi.sin()]
        }
    };
    let mut report = CertificateReport {
        trials,
        violations: 0,
        max_excess: f64::NEG_INFINITY,
        min_relative_slack: f64::INFINITY,
        worst_pair: None,
    };
    for _ in 0..trials {
        let xi = draw(&mut rng);
        let eta = draw(&mut rng);
        let plus: Vec<f64> = xi.iter().zip(&eta).map(|(a, b)| a + b).collect();
        let minus: Vec<f64> = xi.iter().zip(&eta).map(|(a, b)| a - b).collect();
        let a_plus = profile.symbol(&plus);
        let a_minus = profile.symbol(&minus);
        let a_xi = profile.symbol(&xi);
        let lhs = a_plus + a_minus - 2.0 * a_xi;
        let eta_norm = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rhs = 2.0 * eta_norm.powf(s2) * mu2;
        let excess = lhs - rhs;
        let tol = 1e-10 * (a_plus + a_minus + 2.0 * a_xi + rhs);
        if excess > report.max_excess {
            report.max_excess = excess;
            report.worst_pair = Some((xi.clone(), eta.clone()));
        }
        if rhs > 0.0 {
            report.min_relative_slack = report.min_relative_slack.min((rhs - lhs) / rhs);
        }
        if excess > tol {
            report.violations += 1;
        }
    }
    report
}

/// `2a^{2s} + 2b^{2s} − (a+b)^{2s} − (a−b)^{2s}` for `a ≥ b ≥ 0`.
pub fn concavity_gap(a: f64, b: f64, s: f64) -> f64 {
    let s2 = 2.0 * s;
    2.0 * a.powf(s2) + 2.0 * b.powf(s2) - (a + b).powf(s2) - (a - b).powf(s2)
}

/// Whether `2a^{2s} + 2b^{2s} ≥ (a+b)^{2s} + (a−b)^{2s}` holds up to a
/// relative roundoff of `1e-12`.
pub fn power_concavity(a: f64, b: f64, s: f64) -> bool {
    debug_assert!(a >= b && b >= 0.0);
    let s2 = 2.0 * s;
    let lhs = 2.0 * a.powf(s2) + 2.0 * b.powf(s2);
    let rhs = (a + b).powf(s2) + (a - b).powf(s2);
    lhs - rhs >= -1e-12 * lhs.max(rhs).max(f64::MIN_POSITIVE)
}

/// Volume of the n-ball of radius `r` (n ∈ {1, 2}).
pub fn ball_volume(n: usize, r: f64) -> f64 {
    match n {
        1 => 2.0 * r,
        2 => PI * r * r,
        _ => panic!("unsupported dimension {n}"),
    }
}

/// Weyl constant `C₀ = (2π)^{2s} |Ω|^{-2s/n} V_L^{-2s/n}` with its bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylConstant {
    pub c0: f64,
    /// One-sigma Monte Carlo error on `c0` (zero when exact).
    pub c0_sigma: f64,
    /// Volume of `{A < 1}`.
    pub sublevel_volume: f64,
    pub sublevel_sigma: f64,
    /// Constant built from the μ₁-ball; a lower bound for `c0`.
    pub lower: f64,
    /// Constant built from the μ₂-ball; an upper bound for `c0`.
    pub upper: f64,
    /// Ball volumes `V_n(μ₂^{-1/2s}) ≤ V_L ≤ V_n(μ₁^{-1/2s})`.
    pub ball_volume_mu2: f64,
    pub ball_volume_mu1: f64,
    pub samples: usize,
}

impl WeylConstant {
    /// Sandwich check with a `k`-sigma allowance on the Monte Carlo estimate.
    pub fn within_sandwich(&self, k_sigma: f64) -> bool {
        let slack = k_sigma * self.c0_sigma + 1e-8 * self.c0;
        let vslack = k_sigma * self.sublevel_sigma + 1e-8 * self.sublevel_volume;
        self.lower <= self.c0 + slack
            && self.c0 <= self.upper + slack
            && self.ball_volume_mu2 <= self.sublevel_volume + vslack
            && self.sublevel_volume <= self.ball_volume_mu1 + vslack
    }
}

fn weyl_from_volume(n: usize, s: f64, domain_volume: f64, v: f64) -> f64 {
    let e = 2.0 * s / n as f64;
    (TAU).powf(2.0 * s) * domain_volume.powf(-e) * v.powf(-e)
}

/// Weyl constant of `profile` on a domain of volume `domain_volume`.
///
/// In one dimension `V_L = 2 (a₊ + a₋)^{-1/2s}` exactly. In two dimensions
/// `V_L` is estimated by seeded Monte Carlo over the disk of radius
/// `1.01 μ₁^{-1/2s}`, which contains `{A < 1}` (the 1% margin covers the
/// direction-grid approximation of μ₁).
pub fn weyl_constant(
    profile: &SymbolProfile,
    domain_volume: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<WeylConstant> {
    if !(domain_volume > 0.0) {
        return Err(Error::InvalidParameter("domain volume must be positive".into()));
    }
    let m = profile.measure();
    let n = m.dim();
    let s = m.s;
    let (mu1, mu2) = m.ellipticity();
    let radius = |mu: f64| mu.powf(-1.0 / (2.0 * s));
    let (v, sigma, samples) = match &m.density {
        SpectralDensity::Atoms { plus, minus } => (2.0 * (plus + minus).powf(-1.0 / (2.0 * s)), 0.0, 0),
        SpectralDensity::Arcs(_) => {
            if mc_samples == 0 {
                return Err(Error::InvalidParameter("Monte Carlo needs at least one sample".into()));
            }
            let r = 1.01 * radius(mu1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut hits = 0usize;
            for _ in 0..mc_samples {
                let rho = r * rng.gen::<f64>().sqrt();
                let phi = rng.gen_range(0.0..TAU);
                if profile.symbol(&[rho * phi.cos(), rho * phi.sin()]) < 1.0 {
                    hits += 1;
                }
            }
            let p = hits as f64 / mc_samples as f64;
            let area = PI * r * r;
            (area * p, area * (p * (1.0 - p) / mc_samples as f64).sqrt(), mc_samples)
        }
    };
    let c0 = weyl_from_volume(n, s, domain_volume, v);
    let c0_sigma = c0 * (2.0 * s / n as f64) * sigma / v;
    Ok(WeylConstant {
        c0,
        c0_sigma,
        sublevel_volume: v,
        sublevel_sigma: sigma,
        lower: weyl_from_volume(n, s, domain_volume, ball_volume(n, radius(mu1))),
        upper: weyl_from_volume(n, s, domain_volume, ball_volume(n, radius(mu2))),
        ball_volume_mu2: ball_volume(n, radius(mu2)),
        ball_volume_mu1: ball_volume(n, radius(mu1)),
        samples,
    })
}

/// JSON form of a spectral measure.
///
/// ```json
/// {"n":2, "s":0.5, "segments":[{"from":0.0,"to":0.2,"weight":1.0}], "lambda2":1.0}
/// {"n":1, "s":0.5, "a_plus":0.5, "a_minus":0.5, "lambda2":0.5}
/// {"n":2, "s":0.3, "isotropic":true}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDoc {
    pub n: usize,
    pub s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<ArcSegment>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub isotropic: bool,
}

impl MeasureDoc {
    pub fn isotropic(n: usize, s: f64) -> Self {
        MeasureDoc {
            n,
            s,
            segments: None,
            a_plus: None,
            a_minus: None,
            lambda2: None,
            strict: false,
            isotropic: true,
        }
    }

    pub fn build(&self) -> Result<SpectralMeasure> {
        if self.isotropic {
            return SpectralMeasure::isotropic(self.n, self.s);
        }
        match self.n {
            1 => {
                let (p, m) = match (self.a_plus, self.a_minus) {
                    (None, None) => return SpectralMeasure::isotropic(1, self.s),
                    (Some(p), None) => (p, p),
                    (None, Some(m)) => (m, m),
                    (Some(p), Some(m)) => (p, m),
                };
                SpectralMeasure::one_dimensional(self.s, p, m, self.lambda2.unwrap_or(p.max(m)), self.strict)
            }
            2 => {
                let segs = self
                    .segments
                    .as_ref()
                    .ok_or_else(|| Error::InvalidMeasure("n = 2 requires \"segments\"".into()))?;
                let cap = segs.iter().map(|a| a.weight).fold(0.0, f64::max);
                SpectralMeasure::planar(self.s, segs, self.lambda2.unwrap_or(cap), self.strict)
            }
            n => Err(Error::InvalidMeasure(format!("dimension {n} is not supported"))),
        }
    }
}

impl SpectralMeasure {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<MeasureDoc>(text)?.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_half(s: f64) -> SpectralMeasure {
        SpectralMeasure::one_dimensional(s, 0.5, 0.5, 1.0, true).unwrap()
    }

    #[test]
    fn one_dimensional_symbol_is_two_atom_sum() {
        let p = SymbolProfile::new(half_half(0.5));
        assert!((p.symbol(&[2.0]) - 2.0).abs() < 1e-15);
        assert_eq!(p.symbol(&[0.0]), 0.0);
        assert_eq!(half_half(0.3).ellipticity(), (1.0, 1.0));
    }

    #[test]
    fn uniform_circle_symbol_and_ellipticity() {
        let m = SpectralMeasure::planar(0.5, &[ArcSegment { from: 0.0, to: TAU, weight: 1.0 }], 1.0, true).unwrap();
        let p = SymbolProfile::new(m.clone());
        assert!((p.symbol(&[1.0, 0.0]) - 4.0).abs() < 1e-12);
        assert!((p.symbol(&[0.0, 0.0])).abs() == 0.0);
        let (mu1, mu2) = m.ellipticity();
        assert!((mu1 - 4.0).abs() < 1e-12, "{mu1}");
        assert!((mu2 - TAU).abs() < 1e-12);
    }

    #[test]
    fn isotropic_measure_has_unit_scale() {
        for &s in &[0.2, 0.5, 0.85] {
            let m = SpectralMeasure::isotropic(2, s).unwrap();
            let p = SymbolProfile::new(m.clone());
            for &phi in &[0.0, 0.3, 1.9] {
                assert!((p.angular_symbol(phi) - 1.0).abs() < 1e-12);
            }
            assert!((m.isotropic_scale().unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_inputs_rejected_or_completed() {
        assert!(SpectralMeasure::one_dimensional(0.5, 1.0, 0.0, 1.0, true).is_err());
        let m = SpectralMeasure::one_dimensional(0.5, 1.0, 0.0, 1.0, false).unwrap();
        assert_eq!(m.density(), &SpectralDensity::Atoms { plus: 0.5, minus: 0.5 });

        let one_arc = [ArcSegment { from: -0.1, to: 0.1, weight: 1.0 }];
        assert!(SpectralMeasure::planar(0.5, &one_arc, 1.0, true).is_err());
        let m = SpectralMeasure::planar(0.5, &one_arc, 1.0, false).unwrap();
        assert!((m.weight_at(0.0) - 0.5).abs() < 1e-15);
        assert!((m.weight_at(PI) - 0.5).abs() < 1e-15);
        assert!((m.ellipticity().1 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn cap_and_ellipticity_failures() {
        let arcs = [
            ArcSegment { from: -0.1, to: 0.1, weight: 2.0 },
            ArcSegment { from: PI - 0.1, to: PI + 0.1, weight: 2.0 },
        ];
        assert!(matches!(
            SpectralMeasure::planar(0.5, &arcs, 1.0, true),
            Err(Error::InvalidMeasure(_))
        ));
        assert!(SpectralMeasure::planar(0.5, &arcs, 2.0, true).is_ok());
        assert!(matches!(
            SpectralMeasure::one_dimensional(0.5, 0.0, 0.0, 1.0, true),
            Err(Error::NotElliptic { .. })
        ));
        assert!(SpectralMeasure::one_dimensional(1.0, 0.5, 0.5, 1.0, true).is_err());
    }

    #[test]
    fn degenerate_two_arc_measure() {
        let arcs = [
            ArcSegment { from: -0.1, to: 0.1, weight: 1.0 },
            ArcSegment { from: PI - 0.1, to: PI + 0.1, weight: 1.0 },
        ];
        let m = SpectralMeasure::planar(0.5, &arcs, 1.0, true).unwrap();
        let (mu1, mu2) = m.ellipticity();
        assert!((mu2 - 0.4).abs() < 1e-12);
        // direction orthogonal to the arcs: ∫ |sin θ| over two arcs of width 0.2
        let exact = 4.0 * (1.0 - 0.1f64.cos());
        assert!(mu1 > 0.0 && (mu1 - exact).abs() < 1e-9, "{mu1} vs {exact}");
    }

    #[test]
    fn concavity_examples() {
        assert!(power_concavity(1.0, 0.0, 0.3));
        assert!(concavity_gap(1.0, 0.0, 0.7).abs() < 1e-15);
        assert!((concavity_gap(1.0, 1.0, 0.5) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn second_difference_one_dimensional_arithmetic() {
        let p = SymbolProfile::new(half_half(0.5));
        let lhs = p.symbol(&[4.0]) + p.symbol(&[-2.0]) - 2.0 * p.symbol(&[1.0]);
        assert!((lhs - 4.0).abs() < 1e-14);
        let r = second_difference_certificate(&p, 500, 3);
        assert!(r.holds());
    }

    #[test]
    fn weyl_constant_interval_example() {
        let p = SymbolProfile::new(half_half(0.5));
        let w = weyl_constant(&p, 2.0, 0, 0).unwrap();
        assert!((w.sublevel_volume - 2.0).abs() < 1e-15);
        assert!((w.c0 - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        assert!((w.lower - w.c0).abs() < 1e-14 && (w.upper - w.c0).abs() < 1e-14);
        assert!(w.within_sandwich(3.0));
    }

    #[test]
    fn json_round_trip() {
        let m = SpectralMeasure::from_json(
            r#"{"n":2,"s":0.5,"segments":[{"from":0.0,"to":0.2,"weight":1.0},{"from":3.141592653589793,"to":3.341592653589793,"weight":1.0}],"lambda2":1.0}"#,
        )
        .unwrap();
        assert_eq!(m.dim(), 2);
        assert!((m.ellipticity().1 - 0.4).abs() < 1e-12);
        let m = SpectralMeasure::from_json(r#"{"n":1,"s":0.25}"#).unwrap();
        assert_eq!(m.isotropic_scale(), Some(1.0));
    }
}
