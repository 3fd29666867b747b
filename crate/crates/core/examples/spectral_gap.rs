//! Hardy constant, the resulting Poincare lower bound and the exact spectral
//! gap of the OU chain as the grid is refined.

use upwind_jump::gap::gap_report;
use upwind_jump::model::split_drift;
use upwind_jump::scheme::build_rates;
use upwind_jump::stationary::stationary;
use upwind_jump::{Grid, Preset};

fn main() -> upwind_jump::Result<()> {
    let problem = Preset::Ou.problem();
    println!("{:>7} {:>12} {:>12} {:>12} {:>12}", "h", "B", "1/(8B)", "witness", "exact gap");
    for n in [61, 121, 241, 481] {
        let grid = Grid::new(&problem.domain, n)?;
        let rates = build_rates(&problem, &grid, &split_drift(&problem, &grid)?)?;
        let r = gap_report(&rates, &stationary(&rates)?)?;
        println!(
            "{:>7.4} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            r.h,
            r.b.unwrap_or(f64::NAN),
            r.kappa_lower,
            r.witness_max.unwrap_or(f64::NAN),
            r.exact_gap
        );
    }
    Ok(())
}
