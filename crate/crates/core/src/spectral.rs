//! Dirichlet eigenpairs, Weyl and sup-norm audits, and the bootstrap exponent.

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, Par, Side};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::WeylConstant;
use crate::operator::OperatorMatrices;

const RESIDUAL_TOL: f64 = 1e-8;

/// Ordered generalized eigenpairs `K φ = λ M φ` with `φᵢᵀ M φⱼ = δᵢⱼ`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    /// Column `k` holds `φ_{k+1}`.
    pub vectors: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub n: usize,
    pub s: f64,
    pub h: f64,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn nodes(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k).iter().copied().collect()
    }

    /// `max_{i,j} |φᵢᵀMφⱼ - δᵢⱼ|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.vectors.transpose() * &self.mass * &self.vectors;
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// `‖Kφₖ − λₖMφₖ‖ / ‖Kφₖ‖` for each pair.
    pub fn residuals(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let phi = self.vectors.column(k);
                let kphi = &self.stiffness * phi;
                let r = &kphi - self.values[k] * (&self.mass * phi);
                r.norm() / kphi.norm()
            })
            .collect()
    }
}

/// The `m` smallest eigenpairs of `K φ = λ M φ`.
///
/// With `M = LLᵀ`, the standard problem `L⁻¹KL⁻ᵀ y = λ y` is solved densely and
/// `φ = L⁻ᵀ y`. Each eigenvector is signed so that its first entry above
/// roundoff is positive.
pub fn eigenpairs(ops: &OperatorMatrices, m: usize) -> Result<EigenSystem> {
    let n = ops.len();
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("requested {m} eigenpairs from {n} nodes")));
    }
    let to_faer = |a: &DMatrix<f64>| Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let llt = to_faer(&ops.mass)
        .llt(Side::Lower)
        .map_err(|_| Error::Factorization("mass matrix is not positive definite".into()))?;
    let l = llt.L();
    let mut c = to_faer(&ops.stiffness);
    solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    let mut c = c.transpose().to_owned();
    solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    // symmetrize against roundoff before the symmetric solver
    let c = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let eig = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenConvergence { index: 0, residual: f64::NAN })?;
    let mut phi = eig.U().subcols(0, m).to_owned();
    solve_upper_triangular_in_place(l.transpose(), phi.as_mut(), Par::Seq);
    let values: Vec<f64> = (0..m).map(|k| eig.S()[k]).collect();
    let mut vectors = DMatrix::from_fn(n, m, |i, j| phi[(i, j)]);
    for mut v in vectors.column_iter_mut() {
        let norm = v.dot(&(&ops.mass * &v)).sqrt();
        v /= norm;
        let scale = v.amax();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * scale) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
    }
    let sys = EigenSystem {
        values,
        vectors,
        mass: ops.mass.clone(),
        stiffness: ops.stiffness.clone(),
        n: ops.n,
        s: ops.s,
        h: ops.h,
    };
    if sys.values[0] <= 0.0 {
        return Err(Error::EigenConvergence { index: 0, residual: sys.values[0] });
    }
    for (k, r) in sys.residuals().into_iter().enumerate() {
        if !(r <= RESIDUAL_TOL) {
            return Err(Error::EigenConvergence { index: k, residual: r });
        }
    }
    Ok(sys)
}

/// Outcome of [`weyl_audit`].
#[derive(Debug, Clone, Serialize)]
pub struct WeylAudit {
    pub k_lo: usize,
    pub k_hi: usize,
    /// `(k, λₖ k^{-2s/n})` over the window.
    pub ratios: Vec<(usize, f64)>,
    pub median: f64,
    /// Relative difference between the medians of the first and last thirds.
    pub drift: f64,
    pub c0: f64,
    pub lower: f64,
    pub upper: f64,
    pub relative_error: f64,
    pub sandwich_holds: bool,
    /// Set when the window is still drifting by more than 15%.
    pub discretization_warning: bool,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Default audit window `[m/3, 5m/6]`.
pub fn default_window(m: usize) -> (usize, usize) {
    ((m / 3).max(1), (5 * m / 6).max(1))
}

/// Compares `λₖ k^{-2s/n}` (k one-based) against the Weyl constant.
pub fn weyl_audit(eig: &EigenSystem, weyl: &WeylConstant, k_range: (usize, usize)) -> Result<WeylAudit> {
    let (k_lo, k_hi) = k_range;
    if k_lo == 0 || k_hi < k_lo || k_hi > eig.len() {
        return Err(Error::InvalidParameter(format!(
            "window [{k_lo}, {k_hi}] outside 1..={}",
            eig.len()
        )));
    }
    let e = 2.0 * eig.s / eig.n as f64;
    let ratios: Vec<(usize, f64)> = (k_lo..=k_hi).map(|k| (k, eig.values[k - 1] * (k as f64).powf(-e))).collect();
    let vals: Vec<f64> = ratios.iter().map(|r| r.1).collect();
    let med = median(&mut vals.clone());
    let third = (vals.len() / 3).max(1);
    let head = median(&mut vals[..third].to_vec());
    let tail = median(&mut vals[vals.len() - third..].to_vec());
    let drift = (tail - head).abs() / med;
    Ok(WeylAudit {
        k_lo,
        k_hi,
        ratios,
        median: med,
        drift,
        c0: weyl.c0,
        lower: weyl.lower,
        upper: weyl.upper,
        relative_error: (med - weyl.c0).abs() / weyl.c0,
        sandwich_holds: weyl.within_sandwich(3.0),
        discretization_warning: drift > 0.15,
    })
}

/// Outcome of [`sup_norm_audit`].
#[derive(Debug, Clone, Serialize)]
pub struct SupNormAudit {
    pub w: u32,
    /// `(k, λₖ, ‖φₖ‖_∞, ‖φₖ‖_{L²})`.
    pub table: Vec<(usize, f64, f64, f64)>,
    /// Least-squares slope of `log ‖φₖ‖_∞` against `log λₖ`.
    pub slope: f64,
    /// `max_k ‖φₖ‖_∞ / (λₖ^{w-1} ‖φₖ‖_{L²})`.
    pub implied_constant: f64,
    pub slope_within_bound: bool,
    /// `‖φ‖_∞ ≥ ‖φ‖_{L²} / |Ω|^{1/2}` for every k.
    pub lower_bound_holds: bool,
}

/// Sup-norm growth of eigenfunctions against the bound `C λ^{w-1}`.
pub fn sup_norm_audit(eig: &EigenSystem, w: u32, domain_volume: f64) -> SupNormAudit {
    let mut table = Vec::with_capacity(eig.len());
    for k in 0..eig.len() {
        let phi = eig.vectors.column(k);
        let sup = phi.amax();
        let l2 = phi.dot(&(&eig.mass * phi)).sqrt();
        table.push((k + 1, eig.values[k], sup, l2));
    }
    let xs: Vec<f64> = table.iter().map(|r| r.1.ln()).collect();
    let ys: Vec<f64> = table.iter().map(|r| r.2.ln()).collect();
    let slope = fit_slope(&xs, &ys);
    let implied_constant = table
        .iter()
        .map(|r| r.2 / (r.1.powi(w as i32 - 1) * r.3))
        .fold(0.0, f64::max);
    let lower_bound_holds = table.iter().all(|r| r.2 >= r.3 / domain_volume.sqrt() * (1.0 - 1e-12));
    SupNormAudit {
        w,
        table,
        slope,
        implied_constant,
        slope_within_bound: slope <= w as f64 - 1.0 + 0.1 && implied_constant.is_finite(),
        lower_bound_holds,
    }
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Subcritical,
    Critical,
    Supercritical,
}

/// Integrability ladder `p₀ = 2, p_{k+1} = n p_k / (n - 2 p_k s)` and the
/// resulting exponent `w` in `‖φ‖_∞ ≤ C λ^{w-1} ‖φ‖_{L²}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapPlan {
    pub n: u32,
    pub s: BigRational,
    pub branch: Branch,
    pub p: Vec<BigRational>,
    /// Number of ladder steps `N`.
    pub steps: usize,
    pub w: u32,
    /// `n ≤ 2s`, which forces `n = 1`; the `p = 2` estimate applies directly.
    pub reduction: bool,
}

impl BootstrapPlan {
    pub fn p_f64(&self) -> Vec<f64> {
        self.p.iter().map(|p| p.to_f64().unwrap_or(f64::NAN)).collect()
    }

    pub fn p_strings(&self) -> Vec<String> {
        self.p.iter().map(|p| p.to_string()).collect()
    }
}

/// Closest fraction to `x` with denominator at most `max_den` (continued fractions).
pub fn rational_approximation(x: f64, max_den: i64) -> Option<(i64, i64)> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = v - a as f64;
        if (h1 as f64 / k1 as f64 - x).abs() <= 1e-14 * x.abs().max(1.0) || frac == 0.0 {
            break;
        }
        v = 1.0 / frac;
    }
    (k1 != 0).then_some((h1, k1))
}

/// [`bootstrap_exponents_exact`] with `s` read as the simplest nearby fraction
/// (denominator ≤ 10⁶), so decimal inputs like `0.4` become `2/5`.
pub fn bootstrap_exponents(n: u32, s: f64) -> Result<BootstrapPlan> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {s}")));
    }
    let (num, den) = rational_approximation(s, 1_000_000)
        .ok_or_else(|| Error::InvalidParameter(format!("cannot represent s = {s}")))?;
    bootstrap_exponents_exact(n, BigRational::new(BigInt::from(num), BigInt::from(den)))
}

pub fn bootstrap_exponents_exact(n: u32, s: BigRational) -> Result<BootstrapPlan> {
    if n == 0 || !s.is_positive() || s >= BigRational::one() {
        return Err(Error::InvalidParameter(format!("need n ≥ 1 and s ∈ (0, 1), got n = {n}, s = {s}")));
    }
    let nn = BigRational::from_integer(BigInt::from(n));
    let two = BigRational::from_integer(BigInt::from(2));
    let critical = &nn / (&two * &s);
    let reduction = nn <= &two * &s;
    let mut p = vec![two.clone()];
    let (branch, w) = if critical < two {
        (Branch::Subcritical, 2)
    } else if critical == two {
        (Branch::Critical, 3)
    } else {
        loop {
            let last = p.last().expect("ladder starts at 2").clone();
            if last >= critical {
                break;
            }
            let denom = &nn - &two * &last * &s;
            debug_assert!(!denom.is_zero());
            p.push(&nn * &last / denom);
        }
        let steps = p.len() as u32 - 1;
        let last = p.last().expect("nonempty");
        (Branch::Supercritical, if *last > critical { steps + 2 } else { steps + 3 })
    };
    Ok(BootstrapPlan { n, s, branch, steps: p.len() - 1, p, w, reduction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, DomainGrid};
    use crate::measure::SpectralMeasure;
    use crate::operator::assemble;

    #[test]
    fn bootstrap_table() {
        let cases = [(1, 0.25, 3), (1, 0.4, 2), (2, 0.5, 3), (3, 0.5, 3), (4, 0.5, 4)];
        for (n, s, w) in cases {
            assert_eq!(bootstrap_exponents(n, s).unwrap().w, w, "n={n} s={s}");
        }
        let p = bootstrap_exponents(3, 0.5).unwrap();
        assert_eq!(p.branch, Branch::Supercritical);
        assert_eq!(p.p_f64(), vec![2.0, 6.0]);
        assert_eq!(p.steps, 1);
        let p = bootstrap_exponents(4, 0.5).unwrap();
        assert_eq!(p.p_strings(), vec!["2", "4"]);
        assert!(bootstrap_exponents(1, 0.7).unwrap().reduction);
        assert_eq!(bootstrap_exponents(1, 0.25).unwrap().branch, Branch::Critical);
    }

    #[test]
    fn continued_fractions() {
        assert_eq!(rational_approximation(0.4, 1000), Some((2, 5)));
        assert_eq!(rational_approximation(0.25, 1000), Some((1, 4)));
        assert_eq!(rational_approximation(1.0 / 3.0, 1000), Some((1, 3)));
    }

    #[test]
    fn eigenpairs_satisfy_invariants() {
        let m = SpectralMeasure::isotropic(1, 0.5).unwrap();
        let g = DomainGrid::build(Domain::interval(-1.0, 1.0), 1.0 / 32.0).unwrap();
        let ops = assemble(&m, &g).unwrap();
        let eig = eigenpairs(&ops, 20).unwrap();
        assert!(eig.orthonormality_defect() < 1e-8);
        assert!(eig.values.windows(2).all(|w| w[0] < w[1]));
        assert!(eig.values[0] > 0.0);
        // λ₁ of (-Δ)^{1/2} on (-1, 1) is 1.1577738...; Galerkin values lie above
        assert!(eig.values[0] > 1.1577 && eig.values[0] < 1.17, "{}", eig.values[0]);
        let first = eig.vector(0);
        assert!(first.iter().all(|v| *v > 0.0));
    }
}
