//! Relaxation to equilibrium: chi-square distance F_h of a shifted Gaussian
//! under the OU chain, with the fitted decay rate against twice the gap.

use upwind_jump::diagnostics::{annotate_decay, restrict, Metrics};
use upwind_jump::evolve::{evolve_forward, EvolveConfig};
use upwind_jump::gap::exact_gap;
use upwind_jump::model::split_drift;
use upwind_jump::scheme::build_rates;
use upwind_jump::stationary::stationary;
use upwind_jump::{FieldVec, Grid, Preset};

fn main() -> upwind_jump::Result<()> {
    let problem = Preset::Ou.problem();
    let grid = Grid::new(&problem.domain, 121)?;
    let rates = build_rates(&problem, &grid, &split_drift(&problem, &grid)?)?;
    let s = stationary(&rates)?;

    let bump = restrict(|x| (-(x - 1.5) * (x - 1.5)).exp(), &grid)?;
    let p0 = FieldVec::probability(bump.values().iter().map(|v| v / bump.sum()).collect())?;
    let traj = evolve_forward(&rates, &p0, &EvolveConfig::series(15.0).with_uniform_snapshots(30))?;

    let mut records = traj
        .snapshots
        .iter()
        .map(|snap| Metrics::compute(&rates, s.values(), snap.t, snap.values.values(), None))
        .collect::<upwind_jump::Result<Vec<_>>>()?;
    let rate = annotate_decay(&mut records);
    for m in records.iter().step_by(5) {
        println!("t = {:>5.2}  F_h = {:.4e}  D_h = {:.4e}  KL = {:.4e}", m.t, m.f_h, m.d_h, m.relative_entropy);
    }
    println!("fitted decay rate {rate:.4}, twice the spectral gap {:.4}", 2.0 * exact_gap(&rates, &s)?);
    Ok(())
}
