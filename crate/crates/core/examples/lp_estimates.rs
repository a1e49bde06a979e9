//! Empirical L^p → L^q constants of the solution operator, with refinement.

use fracheat::domain::Domain;
use fracheat::measure::SpectralMeasure;
use fracheat::operator::OperatorOptions;
use fracheat::potential::{lp_refinement, test_family, LpCase};

fn main() -> fracheat::Result<()> {
    let s = 0.4;
    let domain = Domain::interval(-1.0, 1.0);
    let measure = SpectralMeasure::isotropic(1, s)?;
    let family = test_family(&domain, 12, 3);
    for (p, case) in [(1.1, LpCase::A), (1.25, LpCase::B), (2.0, LpCase::C)] {
        assert_eq!(LpCase::classify(1, s, p), case);
        let hs = [2.0 / 129.0, 2.0 / 257.0, 2.0 / 513.0];
        let r = lp_refinement(&measure, &domain, &hs, &family, case, p, OperatorOptions::default())?;
        println!("case {case:?}, p = {p}, q = {:?}", r.reports[0].qs);
        for rep in &r.reports {
            let c: Vec<String> = rep.constants.iter().map(|c| format!("{c:.5}")).collect();
            println!("  h = {:.5}: constants [{}]", rep.h, c.join(", "));
        }
        let worst = r.spread.iter().copied().fold(0.0, f64::max);
        println!("  spread {:.3}%, comparison defect {:.1e}", 100.0 * worst, r.reports[0].comparison_defect);
    }
    Ok(())
}
