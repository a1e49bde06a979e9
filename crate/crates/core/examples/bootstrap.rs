//! Integrability ladder and the exponent w for a few (n, s).

use fracheat::spectral::bootstrap_exponents;

fn main() -> fracheat::Result<()> {
    for (n, s) in [(1, 0.25), (1, 0.4), (1, 0.75), (2, 0.5), (3, 0.5), (3, 0.9), (4, 0.5)] {
        let plan = bootstrap_exponents(n, s)?;
        println!(
            "n = {n}, s = {s}: {:?}, p = [{}], steps {}, w = {}",
            plan.branch,
            plan.p_strings().join(", "),
            plan.steps,
            plan.w
        );
    }
    Ok(())
}
