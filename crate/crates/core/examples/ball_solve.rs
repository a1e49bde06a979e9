//! Solves (-Δ)^{1/2} u = 1 on (-1, 1) and compares with sqrt(1 - x²).

use fracheat::boundary::quotient_profile;
use fracheat::domain::{Domain, DomainGrid};
use fracheat::measure::SpectralMeasure;
use fracheat::operator::{assemble, indicator_load, DirichletSolver};

fn main() -> fracheat::Result<()> {
    let measure = SpectralMeasure::isotropic(1, 0.5)?;
    for k in 6..=9 {
        let h = 2f64.powi(-k);
        let grid = DomainGrid::build(Domain::interval(-1.0, 1.0), h)?;
        let ops = assemble(&measure, &grid)?;
        let u = DirichletSolver::new(&ops)?.solve_load(&indicator_load(&grid, -1.0, 1.0))?;
        let exact = grid.sample(|x| (1.0 - x[0] * x[0]).sqrt());
        let diff: Vec<f64> = u.iter().zip(&exact).map(|(a, b)| a - b).collect();
        let err = grid.lp_norm(&diff, 2.0) / grid.lp_norm(&exact, 2.0);
        let trace = quotient_profile(&u, &grid, 0.5)?.trace;
        println!(
            "h = 2^-{k}: relative L2 error {err:.3e}, boundary traces {:.5} {:.5} (exact {:.5})",
            trace[0].value,
            trace[1].value,
            2f64.sqrt()
        );
    }
    Ok(())
}
