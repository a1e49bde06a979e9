//! Pohozaev residual and Hölder scans for the torsion function of (-1, 1).

use fracheat::boundary::{default_rho_ladder, hypothesis_scan, pohozaev_residual};
use fracheat::domain::{Domain, DomainGrid};
use fracheat::measure::SpectralMeasure;
use fracheat::operator::{assemble, indicator_load, DirichletSolver};

fn main() -> fracheat::Result<()> {
    let s = 0.5;
    let measure = SpectralMeasure::isotropic(1, s)?;
    for k in [8, 9, 10] {
        let grid = DomainGrid::build(Domain::interval(-1.0, 1.0), 2f64.powi(-k))?;
        let ops = assemble(&measure, &grid)?;
        let u = DirichletSolver::new(&ops)?.solve_load(&indicator_load(&grid, -1.0, 1.0))?;
        let lu = vec![1.0; grid.len()];
        let r = pohozaev_residual(&measure, &grid, &u, &lu)?;
        println!("h = 2^-{k}: lhs {:.6}  rhs {:.6}  residual {:.3e}", r.lhs, r.rhs, r.residual);

        if k == 10 {
            let rhos = default_rho_ladder(&grid);
            let (on_u, on_quotient) = hypothesis_scan(&u, &grid, s, s - 0.05, &[s, 1.0], &[s - 0.05], &rhos)?;
            for scan in on_u.iter().chain(&on_quotient) {
                println!(
                    "  {:?} beta = {:.2}: slope {:+.3} (expected {:+.3})",
                    scan.target, scan.beta, scan.slope, scan.expected_slope
                );
            }
        }
    }
    Ok(())
}
