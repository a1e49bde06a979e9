use std::f64::consts::PI;

use fracheat::domain::{Domain, DomainGrid};
use fracheat::heat::project;
use fracheat::measure::{weyl_constant, SpectralMeasure, SymbolProfile};
use fracheat::operator::{assemble, DirichletSolver};
use fracheat::potential::{riesz_potential, KernelProfile};
use fracheat::spectral::eigenpairs;

/// `(1/π) ∫_0^X ξ^{2s} (sin(ξ/2)/(ξ/2))^4 cos(kξ) dξ`: the hat-pair energy at
/// unit spacing computed on the Fourier side, with the non-oscillating part of
/// the tail added in closed form (only used at s = 1/2).
fn fourier_q(k: usize, s: f64) -> f64 {
    let x_max = 20_000.0;
    let panels = (x_max / (PI / 8.0)) as usize;
    let width = x_max / panels as f64;
    // 10-point Gauss–Legendre on [-1, 1]
    let nodes = [
        0.1488743389816312, 0.4333953941292472, 0.6794095682990244, 0.8650633666889845, 0.9739065285171717,
    ];
    let weights = [
        0.2955242247147529, 0.2692667193099963, 0.2190863625159820, 0.1494513491505806, 0.0666713443086881,
    ];
    let f = |xi: f64| {
        let sinc = if xi == 0.0 { 1.0 } else { (xi / 2.0).sin() / (xi / 2.0) };
        xi.powf(2.0 * s) * sinc.powi(4) * (k as f64 * xi).cos()
    };
    let mut total = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * width;
        for (x, w) in nodes.iter().zip(&weights) {
            let d = 0.5 * width * x;
            total += 0.5 * width * w * (f(mid - d) + f(mid + d));
        }
    }
    let steady = match k {
        0 => 6.0,
        1 => -4.0,
        2 => 1.0,
        _ => 0.0,
    };
    (total + steady / (2.0 * x_max * x_max)) / PI
}

#[test]
fn golden_stiffness_entries_at_half() {
    let h = 2f64.powi(-6);
    let g = DomainGrid::build(Domain::interval(-1.0, 1.0), h).unwrap();
    let ops = assemble(&SpectralMeasure::isotropic(1, 0.5).unwrap(), &g).unwrap();
    for k in 0..6 {
        let oracle = fourier_q(k, 0.5);
        let entry = ops.stiffness[(10, 10 + k)];
        assert!((entry - oracle).abs() < 1e-8, "k = {k}: {entry} vs {oracle}");
    }
    // Toeplitz structure
    for k in 0..6 {
        assert!((ops.stiffness[(40, 40 + k)] - ops.stiffness[(10, 10 + k)]).abs() < 1e-13);
    }
}

#[test]
fn stiffness_scales_with_spacing() {
    let s = 0.3;
    let m = SpectralMeasure::isotropic(1, s).unwrap();
    let coarse = assemble(&m, &DomainGrid::build(Domain::interval(-1.0, 1.0), 1.0 / 16.0).unwrap()).unwrap();
    let fine = assemble(&m, &DomainGrid::build(Domain::interval(-1.0, 1.0), 1.0 / 32.0).unwrap()).unwrap();
    let ratio = 2f64.powf(1.0 - 2.0 * s);
    for k in 0..4 {
        let (c, f) = (coarse.stiffness[(5, 5 + k)], fine.stiffness[(5, 5 + k)]);
        assert!((c - ratio * f).abs() < 1e-12 * c.abs().max(1e-3), "k = {k}");
    }
}

#[test]
fn galerkin_eigenvalues_decrease_under_refinement() {
    let m = SpectralMeasure::isotropic(1, 0.6).unwrap();
    let mut previous: Option<Vec<f64>> = None;
    for k in 4..=7 {
        let g = DomainGrid::build(Domain::interval(-1.0, 1.0), 2f64.powi(-k)).unwrap();
        let eig = eigenpairs(&assemble(&m, &g).unwrap(), 10).unwrap();
        assert!(eig.values[0] > 0.0);
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        if let Some(prev) = &previous {
            for (a, b) in eig.values.iter().zip(prev) {
                assert!(*a <= b * (1.0 + 1e-12), "{a} > {b}");
            }
        }
        previous = Some(eig.values);
    }
}

#[test]
fn eigensystem_invariants() {
    let g = DomainGrid::build(Domain::disk([0.0, 0.0], 1.0), 1.0 / 8.0).unwrap();
    let ops = assemble(&SpectralMeasure::isotropic(2, 0.4).unwrap(), &g).unwrap();
    let eig = eigenpairs(&ops, 20).unwrap();
    assert!(eig.orthonormality_defect() < 1e-8);
    assert!(eig.residuals().iter().all(|r| *r < 1e-8));
    // g = λ₁φ₁ gives back φ₁
    let phi = eig.vector(0);
    let g1: Vec<f64> = phi.iter().map(|v| eig.values[0] * v).collect();
    let u = DirichletSolver::new(&ops).unwrap().solve(&g1).unwrap();
    assert!(u.iter().zip(&phi).all(|(a, b)| (a - b).abs() < 1e-10));
}

#[test]
fn comparison_principle_smoke() {
    // s < 1/2: off-diagonal entries of K are not all nonpositive
    for s in [0.2, 0.35, 0.5, 0.8] {
        let g = DomainGrid::build(Domain::interval(-1.0, 1.0), 1.0 / 128.0).unwrap();
        let ops = assemble(&SpectralMeasure::isotropic(1, s).unwrap(), &g).unwrap();
        let solver = DirichletSolver::new(&ops).unwrap();
        for (lo, hi) in [(-0.2, 0.1), (0.7, 0.9), (-1.0, -0.95)] {
            let rhs = g.sample(|x| if x[0] > lo && x[0] < hi { 1.0 } else { 0.0 });
            let u = solver.solve(&rhs).unwrap();
            let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(u.iter().all(|v| *v >= -1e-8 * sup), "s = {s}, [{lo}, {hi}]");
        }
    }
}

#[test]
fn boundary_quadrature_divergence_theorem() {
    for domain in [Domain::interval(-0.5, 2.0), Domain::disk([0.3, -0.1], 0.8), Domain::rectangle([0.0, 0.0], [2.0, 1.0])] {
        let h = domain.diameter() / 64.0;
        let g = DomainGrid::build(domain, h).unwrap();
        let flux = g.boundary().integrate(|x, nu| x[0] * nu[0] + x[1] * nu[1]);
        let expected = domain.dim() as f64 * domain.volume();
        assert!((flux - expected).abs() <= 0.01 * expected, "{domain:?}: {flux} vs {expected}");
    }
}

#[test]
fn isotropic_weyl_constants() {
    // one dimension: μ₁ = μ₂ and the sandwich collapses onto (π/2)^{2s}
    let w = weyl_constant(&SymbolProfile::new(SpectralMeasure::isotropic(1, 0.5).unwrap()), 2.0, 0, 0).unwrap();
    assert!((w.lower - w.c0).abs() < 1e-12 && (w.upper - w.c0).abs() < 1e-12);
    assert!((w.c0 - PI / 2.0).abs() < 1e-12);
    // unit disk, s = 1/2: V_L = π and C₀ = 2π (π·π)^{-1/2} = 2; μ₂ is the total mass, so no collapse
    let w = weyl_constant(&SymbolProfile::new(SpectralMeasure::isotropic(2, 0.5).unwrap()), PI, 100_000, 5).unwrap();
    assert!((w.c0 - 2.0).abs() <= 3.0 * w.c0_sigma, "{w:?}");
    assert!(w.lower <= w.c0 && w.c0 <= w.upper);
}

#[test]
fn heat_coefficients_obey_bessel() {
    let g = DomainGrid::build(Domain::interval(-1.0, 1.0), 1.0 / 64.0).unwrap();
    let eig = eigenpairs(&assemble(&SpectralMeasure::isotropic(1, 0.7).unwrap(), &g).unwrap(), 30).unwrap();
    let u0 = g.sample(|x| (3.0 * x[0]).cos() + x[0]);
    let sol = project(&eig, &u0).unwrap();
    let norm = sol.initial_norm_sq.sqrt();
    assert!(sol.coefficient_energy() <= sol.initial_norm_sq * (1.0 + 1e-12));
    assert!(sol.coefficients.iter().all(|c| c.abs() <= norm));
}

#[test]
fn heat_kernel_is_positive_and_even() {
    let k = KernelProfile::new(1, 0.7, 1.3).unwrap();
    for t in [0.05, 1.0] {
        for x in [0.0, 0.3, 1.0, 4.0, 20.0] {
            let p = k.heat_kernel(x, t).unwrap();
            assert!(p > 0.0, "p({x}, {t}) = {p}");
            assert!((p - k.heat_kernel(-x, t).unwrap()).abs() < 1e-14);
        }
    }
}

/// Dirichlet solves on a long interval converge to the whole-line Riesz
/// potential up to a nearly constant correction, so differences are compared.
#[test]
fn dirichlet_solve_matches_riesz_potential() {
    let s = 0.3;
    let bump = |x: &[f64]| if x[0].abs() < 0.5 { (1.0 - 4.0 * x[0] * x[0]).powi(2) } else { 0.0 };
    let support = Domain::interval(-0.5, 0.5);
    let g = DomainGrid::build(Domain::interval(-16.0, 16.0), 1.0 / 32.0).unwrap();
    let ops = assemble(&SpectralMeasure::isotropic(1, s).unwrap(), &g).unwrap();
    let u = DirichletSolver::new(&ops).unwrap().solve(&g.sample(bump)).unwrap();
    let centre = g.find([512, 0]).unwrap();
    assert!(g.point(centre)[0].abs() < 1e-12);
    let v0 = riesz_potential(bump, &support, &[0.0], s).unwrap();
    let mut worst: f64 = 0.0;
    for offset in [-32i64, -16, -8, 8, 16, 24, 32] {
        let i = g.find([512 + offset, 0]).unwrap();
        let x = g.point(i)[0];
        let exact = riesz_potential(bump, &support, &[x], s).unwrap() - v0;
        let approx = u[i] - u[centre];
        worst = worst.max((approx - exact).abs() / exact.abs());
    }
    assert!(worst < 0.03, "relative difference {worst}");
}
