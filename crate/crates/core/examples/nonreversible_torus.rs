//! A drift with nonzero mean on the circle: the stationary chain carries a
//! constant probability flux, and the time-reversed chain has the same
//! invariant law and the same total jump rates.

use std::f64::consts::PI;

use upwind_jump::model::split_drift;
use upwind_jump::scheme::{build_rates, flux};
use upwind_jump::stationary::{modified_rates, stationary};
use upwind_jump::{Coefficient, Domain, Grid, Problem};

fn main() -> upwind_jump::Result<()> {
    let problem = Problem::new(
        Coefficient::parse("coeff.b", "1 + 0.5*cos(x)")?,
        Coefficient::constant(1.0),
        Domain::Torus { length: 2.0 * PI },
    )?;
    let grid = Grid::new(&problem.domain, 64)?;
    let rates = build_rates(&problem, &grid, &split_drift(&problem, &grid)?)?;
    let s = stationary(&rates)?;
    let edges = flux(&rates, &s.pi)?;
    let (lo, hi) = edges.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    println!("flux J = {:.10e}, edge range [{lo:.10e}, {hi:.10e}]", s.flux);

    let reversed = modified_rates(&rates, &s)?;
    let sr = stationary(&reversed)?;
    let drift = sr.pi.values().iter().zip(s.pi.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("reversed chain: max |pi~ - pi| = {drift:.2e}, reversed flux = {:.4e}", sr.flux);
    for j in [0, 16, 32, 48] {
        println!(
            "node {j:>2}: alpha {:.3} beta {:.3} | reversed alpha {:.3} beta {:.3}",
            rates.alpha()[j],
            rates.beta()[j],
            reversed.alpha()[j],
            reversed.beta()[j]
        );
    }
    Ok(())
}
