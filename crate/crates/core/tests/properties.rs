use std::f64::consts::{PI, TAU};

use fracheat::boundary::{holder_seminorm, pohozaev_residual, pohozaev_residual_about, quotient_profile, quotient_values};
use fracheat::domain::{Domain, DomainGrid};
use fracheat::heat::{project, tail_bound};
use fracheat::measure::{
    concavity_gap, power_concavity, second_difference_certificate, ArcSegment, SpectralMeasure, SymbolProfile,
};
use fracheat::operator::{assemble, indicator_load, DirichletSolver};
use fracheat::spectral::{bootstrap_exponents, bootstrap_exponents_exact, eigenpairs};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use proptest::prelude::*;

fn planar(s: f64, arcs: &[(f64, f64, f64)]) -> SpectralMeasure {
    let segs: Vec<ArcSegment> = arcs.iter().map(|&(from, width, weight)| ArcSegment { from, to: from + width, weight }).collect();
    SpectralMeasure::planar(s, &segs, 10.0, false).unwrap()
}

fn arcs() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.0..PI, 0.05..1.2f64, 0.2..2.0f64), 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symbol_is_homogeneous(s in 0.05..0.95f64, arcs in arcs(), phi in 0.0..TAU, r in 0.01..50.0f64, nu in 0.001..1000.0f64) {
        let p = SymbolProfile::new(planar(s, &arcs));
        let xi = [r * phi.cos(), r * phi.sin()];
        let scaled = p.symbol(&[nu * xi[0], nu * xi[1]]);
        prop_assert!((scaled - nu.powf(2.0 * s) * p.symbol(&xi)).abs() <= 1e-12 * scaled);
    }

    #[test]
    fn symbol_within_ellipticity_sandwich(s in 0.05..0.95f64, arcs in arcs(), phi in 0.0..TAU, r in 0.01..50.0f64) {
        let m = planar(s, &arcs);
        let (mu1, mu2) = m.ellipticity();
        let a = SymbolProfile::new(m).symbol(&[r * phi.cos(), r * phi.sin()]);
        let rs = r.powf(2.0 * s);
        prop_assert!(mu1 * rs <= a * (1.0 + 1e-8));
        prop_assert!(a <= mu2 * rs * (1.0 + 1e-8));
    }

    #[test]
    fn one_dimensional_symbol_is_exact(s in 0.05..0.95f64, w in 0.1..3.0f64, xi in -100.0..100.0f64) {
        let p = SymbolProfile::new(SpectralMeasure::one_dimensional(s, w, w, w, true).unwrap());
        let exact = 2.0 * w * xi.abs().powf(2.0 * s);
        prop_assert!((p.symbol(&[xi]) - exact).abs() <= 1e-13 * exact.max(1e-300));
    }

    #[test]
    fn concavity_claim(a in 0.0..1e3f64, frac in 0.0..=1.0f64, s in 0.001..0.999f64) {
        let b = a * frac;
        prop_assert!(power_concavity(a, b, s));
        prop_assert!(concavity_gap(a, b, s) >= -1e-12 * (a + b).powf(2.0 * s).max(1.0));
    }

    #[test]
    fn second_difference_bound(s in 0.05..0.95f64, arcs in arcs(), seed in any::<u64>()) {
        let p = SymbolProfile::new(planar(s, &arcs));
        let cert = second_difference_certificate(&p, 200, seed);
        prop_assert_eq!(cert.violations, 0);
    }

    #[test]
    fn inner_regions_are_nested(r1 in 0.0..0.9f64, r2 in 0.0..0.9f64, disk in any::<bool>()) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let domain = if disk { Domain::disk([0.1, -0.2], 1.0) } else { Domain::rectangle([0.0, 0.0], [2.0, 1.5]) };
        let g = DomainGrid::build(domain, 1.0 / 16.0).unwrap();
        let outer = g.inner_region(lo).unwrap();
        let inner = g.inner_region(hi).unwrap();
        prop_assert!(inner.iter().all(|i| outer.contains(i)));
        prop_assert!(inner.iter().all(|&i| g.delta()[i] >= hi));
        prop_assert_eq!(inner.len(), g.delta().iter().filter(|d| **d >= hi).count());
    }

    #[test]
    fn seminorm_monotone_under_nesting(r1 in 0.0..0.8f64, r2 in 0.0..0.8f64, beta in 0.1..1.0f64, k in 1.0..6.0f64) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let g = DomainGrid::build(Domain::interval(-1.0, 1.0), 1.0 / 64.0).unwrap();
        let f = g.sample(|x| (k * x[0]).sin() + (1.0 - x[0] * x[0]).sqrt());
        let big = holder_seminorm(&g, &f, &g.inner_region(lo).unwrap(), beta).unwrap().value;
        let small = holder_seminorm(&g, &f, &g.inner_region(hi).unwrap(), beta).unwrap().value;
        prop_assert!(small <= big);
    }

    #[test]
    fn quotient_scales_linearly(c in -10.0..10.0f64, s in 0.1..0.9f64) {
        let g = DomainGrid::build(Domain::interval(-1.0, 1.0), 1.0 / 64.0).unwrap();
        let u = g.sample(|x| (1.0 - x[0] * x[0]).powf(s) * (1.0 + 0.3 * x[0]));
        let cu: Vec<f64> = u.iter().map(|v| c * v).collect();
        let q = quotient_values(&u, &g, s);
        let cq = quotient_values(&cu, &g, s);
        prop_assert!(q.iter().zip(&cq).all(|(a, b)| (c * a - b).abs() <= 1e-12 * (1.0 + b.abs())));
        let t = quotient_profile(&u, &g, s).unwrap();
        let ct = quotient_profile(&cu, &g, s).unwrap();
        for (a, b) in t.trace.iter().zip(&ct.trace) {
            prop_assert!((c * a.value - b.value).abs() <= 1e-10 * (1.0 + b.value.abs()));
        }
    }

    #[test]
    fn bootstrap_exact_matches_float(n in 1u32..6, num in 1i64..40, den in 2i64..41) {
        prop_assume!(num < den);
        let s = num as f64 / den as f64;
        let exact = bootstrap_exponents_exact(n, BigRational::new(num.into(), den.into())).unwrap();
        let float = bootstrap_exponents(n, s).unwrap();
        prop_assert_eq!(&exact.p, &float.p);
        prop_assert_eq!(exact.w, float.w);
        prop_assert!([2, 3, exact.steps as u32 + 2, exact.steps as u32 + 3].contains(&exact.w));
        let ps: Vec<f64> = exact.p.iter().map(|p| p.to_f64().unwrap()).collect();
        prop_assert!(ps.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn tail_bound_decreases_in_t0(t0 in 0.005..2.0f64, factor in 1.01..4.0f64, w in 2u32..5, s in 0.2..0.9f64) {
        let a = tail_bound(PI / 2.0, 1, s, w, t0, 3).unwrap().value;
        let b = tail_bound(PI / 2.0, 1, s, w, t0 * factor, 3).unwrap().value;
        prop_assert!(a.is_finite() && b.is_finite());
        prop_assert!(b < a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn heat_semigroup(t1 in 0.0..1.0f64, t2 in 0.0..1.0f64, a in -0.9..0.0f64, b in 0.0..0.9f64) {
        let g = DomainGrid::build(Domain::interval(-1.0, 1.0), 1.0 / 32.0).unwrap();
        let ops = assemble(&SpectralMeasure::isotropic(1, 0.4).unwrap(), &g).unwrap();
        let eig = eigenpairs(&ops, g.len()).unwrap();
        let u0 = g.sample(|x| if x[0] > a && x[0] < b { 1.0 } else { 0.0 });
        let sol = project(&eig, &u0).unwrap();
        let direct = sol.evaluate(t1 + t2);
        let restarted = project(&eig, &sol.evaluate(t1)).unwrap().evaluate(t2);
        let scale = direct.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(direct.iter().zip(&restarted).all(|(x, y)| (x - y).abs() <= 1e-8 * scale));
        let norms = sol.l2_decay(&[0.0, t1, t1 + t2]);
        prop_assert!(norms[1] <= norms[0] && norms[2] <= norms[1]);
    }

    #[test]
    fn pohozaev_invariant_under_scaling(c in 0.01..100.0f64, s in 0.2..0.8f64) {
        let m = SpectralMeasure::isotropic(1, s).unwrap();
        let g = DomainGrid::build(Domain::interval(-1.0, 1.0), 1.0 / 64.0).unwrap();
        let ops = assemble(&m, &g).unwrap();
        let u = DirichletSolver::new(&ops).unwrap().solve_load(&indicator_load(&g, -1.0, 1.0)).unwrap();
        let lu = vec![1.0; g.len()];
        let r = pohozaev_residual(&m, &g, &u, &lu).unwrap();
        let cu: Vec<f64> = u.iter().map(|v| c * v).collect();
        let clu: Vec<f64> = lu.iter().map(|v| c * v).collect();
        let rc = pohozaev_residual(&m, &g, &cu, &clu).unwrap();
        prop_assert!((r.residual - rc.residual).abs() <= 1e-10 * (1.0 + r.residual));
        prop_assert!((rc.lhs - c * c * r.lhs).abs() <= 1e-10 * rc.lhs.abs());
    }

    #[test]
    fn pohozaev_translation_equivariance(shift in -3.0..3.0f64) {
        let m = SpectralMeasure::isotropic(1, 0.5).unwrap();
        let solve = |domain: Domain| {
            let g = DomainGrid::build(domain, 1.0 / 64.0).unwrap();
            let ops = assemble(&m, &g).unwrap();
            let (a, b) = match domain { Domain::Interval { a, b } => (a, b), _ => unreachable!() };
            let u = DirichletSolver::new(&ops).unwrap().solve_load(&indicator_load(&g, a, b)).unwrap();
            (g, u)
        };
        let (g0, u0) = solve(Domain::interval(-1.0, 1.0));
        let (g1, u1) = solve(Domain::interval(-1.0 + shift, 1.0 + shift));
        let ones = vec![1.0; g0.len()];
        let r0 = pohozaev_residual(&m, &g0, &u0, &ones).unwrap();
        let r1 = pohozaev_residual_about(&m, &g1, &u1, &ones, [shift, 0.0]).unwrap();
        prop_assert!((r0.lhs - r1.lhs).abs() < 1e-9);
        prop_assert!((r0.rhs - r1.rhs).abs() < 1e-9);
    }
}
