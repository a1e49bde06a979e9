//! Eigenvalue asymptotics of the fractional Laplacian on (-1, 1).

use fracheat::domain::{Domain, DomainGrid};
use fracheat::measure::{weyl_constant, SpectralMeasure, SymbolProfile};
use fracheat::operator::assemble;
use fracheat::spectral::{eigenpairs, weyl_audit};

fn main() -> fracheat::Result<()> {
    let domain = Domain::interval(-1.0, 1.0);
    let grid = DomainGrid::build(domain, 2.0 / 513.0)?;
    for s in [0.3, 0.5, 0.7] {
        let measure = SpectralMeasure::isotropic(1, s)?;
        let ops = assemble(&measure, &grid)?;
        let eig = eigenpairs(&ops, 60)?;
        let weyl = weyl_constant(&SymbolProfile::new(measure), domain.volume(), 0, 0)?;
        let audit = weyl_audit(&eig, &weyl, (20, 50))?;
        println!(
            "s = {s}: lambda_1 = {:.6}, median lambda_k k^-2s = {:.6}, C0 = {:.6}, rel. error {:.2}%",
            eig.values[0],
            audit.median,
            weyl.c0,
            100.0 * audit.relative_error
        );
    }
    Ok(())
}
