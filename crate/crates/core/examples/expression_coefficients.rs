//! Coefficients given as text: a double-well drift with state-dependent noise.

use upwind_jump::exprparse::parse;
use upwind_jump::gap::gap_report;
use upwind_jump::model::{reference_stationary, split_drift};
use upwind_jump::scheme::build_rates;
use upwind_jump::stationary::stationary;
use upwind_jump::{Coefficient, Domain, Grid, Problem};

fn main() -> upwind_jump::Result<()> {
    let b = "x - x^3";
    let sigma = "0.8 + 0.2*tanh(x)";
    println!("b(x) = {}, sigma(x) = {}", parse(b).map_err(|e| upwind_jump::Error::Expression {
        key: "b".into(),
        source: e,
    })?, sigma);

    let problem = Problem::new(
        Coefficient::parse("b", b)?,
        Coefficient::parse("sigma", sigma)?,
        Domain::Line { x_min: -3.0, x_max: 3.0 },
    )?;
    let grid = Grid::new(&problem.domain, 121)?;
    let rates = build_rates(&problem, &grid, &split_drift(&problem, &grid)?)?;
    let s = stationary(&rates)?;
    let reference = reference_stationary(&problem, &grid)?;
    for j in (0..grid.len()).step_by(10) {
        println!("x = {:>5.2}  pi_h/h = {:.5}  reference = {:.5}", grid.node(j), s.pi[j] / grid.h(), reference[j]);
    }
    let g = gap_report(&rates, &s)?;
    println!("1/(8B) = {:.4e} <= gap = {:.4e}", g.kappa_lower, g.exact_gap);
    Ok(())
}
