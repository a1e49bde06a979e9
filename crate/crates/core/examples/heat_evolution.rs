//! Heat flow from an indicator: L² decay, monitors and the series tail bound.

use fracheat::domain::{Domain, DomainGrid};
use fracheat::heat::{direct_tail_sum, select_k0, tail_bound, uniform_bound_audit, InitialData};
use fracheat::measure::{weyl_constant, SpectralMeasure, SymbolProfile};
use fracheat::operator::assemble;
use fracheat::spectral::{bootstrap_exponents, eigenpairs};

fn main() -> fracheat::Result<()> {
    let s = 0.5;
    let domain = Domain::interval(-1.0, 1.0);
    let measure = SpectralMeasure::isotropic(1, s)?;
    let grid = DomainGrid::build(domain, 2f64.powi(-8))?;
    let ops = assemble(&measure, &grid)?;
    let eig = eigenpairs(&ops, 120)?;
    let sol = InitialData::Indicator { a: -0.5, b: 0.5 }.project(&eig, &grid)?;

    let ts = [0.01, 0.1, 0.5, 1.0, 2.0, 4.0];
    for (t, norm) in ts.iter().zip(sol.l2_decay(&ts)) {
        println!("t = {t:<5} ||u(t)|| = {norm:.6e}  exp(-lambda_1 t) = {:.6e}", (-eig.values[0] * t).exp());
    }

    let w = bootstrap_exponents(1, s)?.w;
    let audit = uniform_bound_audit(&sol, &grid, 0.1, 0.05, w, 4)?;
    println!("monitors maximized at t0: {}, nonincreasing: {}", audit.maximized_at_t0, audit.nonincreasing);

    let c0 = weyl_constant(&SymbolProfile::new(measure), domain.volume(), 0, 0)?.c0;
    if let Some(k0) = select_k0(&eig.values, c0, 2.0 * s, 10) {
        for t0 in [0.01, 0.1, 1.0] {
            let bound = tail_bound(c0, 1, s, w, t0, k0)?;
            println!(
                "t0 = {t0}: tail bound {:.4e} >= direct sum {:.4e}",
                bound.value,
                direct_tail_sum(&eig.values, w, t0, k0)
            );
        }
    }
    Ok(())
}
