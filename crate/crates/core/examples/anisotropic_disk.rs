//! Anisotropic operator on the unit disk: spectrum, Weyl constant and a
//! heat flow started from the second eigenfunction.

use std::f64::consts::PI;

use fracheat::domain::{Domain, DomainGrid};
use fracheat::heat::InitialData;
use fracheat::measure::{weyl_constant, ArcSegment, SpectralMeasure, SymbolProfile};
use fracheat::operator::assemble;
use fracheat::spectral::eigenpairs;

fn main() -> fracheat::Result<()> {
    let arcs = [ArcSegment { from: 0.2, to: 1.2, weight: 1.0 }];
    // strict = false symmetrizes the density under θ ↦ θ + π
    let measure = SpectralMeasure::planar(0.5, &arcs, 1.0, false)?;
    let (mu1, mu2) = measure.ellipticity();
    let domain = Domain::disk([0.0, 0.0], 1.0);
    let grid = DomainGrid::build(domain, 1.0 / 12.0)?;
    let ops = assemble(&measure, &grid)?;
    println!("{} nodes, symmetry defect {:.1e}, mu1 {mu1:.4}, mu2 {mu2:.4}", grid.len(), ops.symmetry_defect());

    let eig = eigenpairs(&ops, 40)?;
    let first: Vec<String> = eig.values[..6].iter().map(|l| format!("{l:.4}")).collect();
    println!("lowest eigenvalues: {}", first.join(" "));

    let weyl = weyl_constant(&SymbolProfile::new(measure), PI, 100_000, 11)?;
    let k = 30;
    println!(
        "lambda_{k} k^-1/2 = {:.4}; C0 = {:.4} +- {:.4}, sandwich [{:.4}, {:.4}]",
        eig.values[k - 1] / (k as f64).sqrt(),
        weyl.c0,
        weyl.c0_sigma,
        weyl.lower,
        weyl.upper
    );

    let sol = InitialData::Eigenmode { k: 2 }.project(&eig, &grid)?;
    let ts = [0.0, 0.5, 1.0];
    for (t, n) in ts.iter().zip(sol.l2_decay(&ts)) {
        println!("t = {t}: ||u|| = {n:.6}  expected {:.6}", (-eig.values[1] * t).exp());
    }
    Ok(())
}
