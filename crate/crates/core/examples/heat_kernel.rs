//! Heat kernel of the line, the fundamental solution and the Riesz potential.

use std::f64::consts::PI;

use fracheat::domain::Domain;
use fracheat::potential::{riesz_constant, riesz_potential, KernelProfile};

fn main() -> fracheat::Result<()> {
    let cauchy = KernelProfile::new(1, 0.5, 1.0)?;
    for (x, t) in [(0.0, 1.0), (0.5, 0.1), (2.0, 1.0)] {
        let p = cauchy.heat_kernel(x, t)?;
        println!("s = 1/2: p({x}, {t}) = {p:.12}  Cauchy {:.12}", t / (PI * (t * t + x * x)));
    }

    let k = KernelProfile::new(1, 0.75, 1.0)?;
    println!("s = 3/4: mass at t = 0.3 is {:.10}", k.heat_kernel_mass(0.3)?);

    let low = KernelProfile::new(1, 0.3, 1.0)?;
    let audit = low.fundamental_audit(&[0.25, 0.5, 1.0, 2.0])?;
    println!("s = 0.3: V(x)|x|^(1-2s) = {:.10}, closed form {:.10}", audit.c2, audit.closed_form);

    // Riesz potential of the unit disk at its centre: C ∫ |y|^{2s-2} dy
    let s = 0.5;
    let disk = Domain::disk([0.0, 0.0], 1.0);
    let v = riesz_potential(|_| 1.0, &disk, &[0.0, 0.0], s)?;
    let c = riesz_constant(2, s)?;
    println!("Riesz potential at the centre {v:.10}, expected {:.10}", c * 2.0 * PI / (2.0 * s));
    Ok(())
}
