//! Uniformization Monte Carlo on the torus_sin chain: particle histograms at
//! several times against the deterministic law and the stationary density.

use upwind_jump::diagnostics::tv_distance;
use upwind_jump::evolve::{uniformization_series, Direction};
use upwind_jump::model::split_drift;
use upwind_jump::montecarlo::{run_mc_times, McConfig};
use upwind_jump::scheme::build_rates;
use upwind_jump::stationary::stationary;
use upwind_jump::{FieldVec, Grid, Preset};

fn main() -> upwind_jump::Result<()> {
    let problem = Preset::TorusSin.problem();
    let grid = Grid::new(&problem.domain, 64)?;
    let rates = build_rates(&problem, &grid, &split_drift(&problem, &grid)?)?;
    let pi = stationary(&rates)?;
    let p0 = FieldVec::uniform_probability(64);
    let m: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100_000);

    let times = [1.0, 4.0, 10.0, 12.0];
    let runs = run_mc_times(&rates, &McConfig::new(12.0, m, 7, p0.clone()), &times)?;
    println!("lambda = {:.2}, M = {m}", runs[0].lambda);
    for res in &runs {
        let det = uniformization_series(&rates, &p0, res.t, None, 1e-12, Direction::Forward)?;
        println!(
            "t = {:>4}: TV(mc, det) = {:.3e}  TV(mc, pi) = {:.3e}  TV(det, pi) = {:.3e}",
            res.t,
            tv_distance(&res.p_tilde, det.values())?.half_sum_abs,
            tv_distance(&res.p_tilde, pi.values())?.half_sum_abs,
            tv_distance(det.values(), pi.values())?.half_sum_abs
        );
    }
    Ok(())
}
