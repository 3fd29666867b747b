//! Stationary law of the Ornstein-Uhlenbeck chain on [-6, 6] next to the
//! Gaussian density and the closed-form product for the node ratios.

use upwind_jump::model::{reference_stationary, split_drift};
use upwind_jump::scheme::build_rates;
use upwind_jump::stationary::stationary;
use upwind_jump::{Grid, Preset};

fn main() -> upwind_jump::Result<()> {
    let problem = Preset::Ou.problem();
    let grid = Grid::new(&problem.domain, 61)?;
    let rates = build_rates(&problem, &grid, &split_drift(&problem, &grid)?)?;
    let s = stationary(&rates)?;
    let reference = reference_stationary(&problem, &grid)?;
    let h = grid.h();
    let o = grid.origin();

    println!("{:>6} {:>14} {:>14} {:>14}", "x", "pi_h / h", "gaussian", "ratio check");
    let mut prod = 1.0;
    for j in o..grid.len() {
        if j > o {
            prod /= 1.0 + 2.0 * (j - o) as f64 * h * h;
        }
        if (j - o) % 5 == 0 {
            println!(
                "{:>6.2} {:>14.6e} {:>14.6e} {:>14.2e}",
                grid.node(j),
                s.pi[j] / h,
                reference[j],
                s.pi[j] / s.pi[o] / prod - 1.0
            );
        }
    }
    println!("detailed-balance residual: {:.2e}", s.db_residual);
    Ok(())
}
