//! First-order convergence of the stationary law under dyadic refinement.

use upwind_jump::diagnostics::{fit_order, l1};
use upwind_jump::model::{reference_stationary, split_drift};
use upwind_jump::scheme::build_rates;
use upwind_jump::stationary::stationary;
use upwind_jump::{Grid, Preset};

fn main() -> upwind_jump::Result<()> {
    for (preset, sizes) in [(Preset::Ou, [61, 121, 241, 481]), (Preset::TorusSin, [32, 64, 128, 256])] {
        let problem = preset.problem();
        let mut errs = Vec::new();
        for n in sizes {
            let grid = Grid::new(&problem.domain, n)?;
            let rates = build_rates(&problem, &grid, &split_drift(&problem, &grid)?)?;
            let s = stationary(&rates)?;
            let reference = reference_stationary(&problem, &grid)?;
            let h = grid.h();
            let diff: Vec<f64> = reference.values().iter().zip(s.density(h)).map(|(a, b)| a - b).collect();
            let e = l1(&diff, h);
            println!("{:>14} N = {n:>4}  h = {h:.4}  l1 error = {e:.4e}", preset.name());
            errs.push((h, e));
        }
        println!("{:>14} fitted order {:.3}", preset.name(), fit_order(&errs)?);
    }
    Ok(())
}
