//! Symbol of an anisotropic planar measure, its ellipticity constants and
//! the second-difference certificate.

use std::f64::consts::{PI, TAU};

use fracheat::measure::{second_difference_certificate, ArcSegment, SpectralMeasure, SymbolProfile};

fn main() -> fracheat::Result<()> {
    // two antipodal sectors of half-width 0.4 around the horizontal axis
    let arcs = [
        ArcSegment { from: TAU - 0.4, to: TAU, weight: 1.0 },
        ArcSegment { from: 0.0, to: 0.4, weight: 1.0 },
        ArcSegment { from: PI - 0.4, to: PI + 0.4, weight: 1.0 },
    ];
    let measure = SpectralMeasure::planar(0.6, &arcs, 1.0, true)?;
    let (mu1, mu2) = measure.ellipticity();
    println!("mu1 = {mu1:.6}  mu2 = {mu2:.6}");

    let profile = SymbolProfile::new(measure);
    println!("{:>8} {:>12} {:>12} {:>12}", "angle", "A(xi)", "mu1|xi|^2s", "mu2|xi|^2s");
    for j in 0..=8 {
        let phi = PI / 2.0 * j as f64 / 8.0;
        let xi = [2.0 * phi.cos(), 2.0 * phi.sin()];
        let r = 2f64.powf(1.2);
        println!("{phi:>8.4} {:>12.6} {:>12.6} {:>12.6}", profile.symbol(&xi), mu1 * r, mu2 * r);
    }

    let cert = second_difference_certificate(&profile, 10_000, 7);
    println!(
        "second differences: {} trials, {} violations, max excess {:.3e}",
        cert.trials, cert.violations, cert.max_excess
    );
    Ok(())
}
