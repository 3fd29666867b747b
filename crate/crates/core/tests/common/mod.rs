#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use upwind_jump::model::split_drift;
use upwind_jump::scheme::build_rates;
use upwind_jump::{Coefficient, Domain, FieldVec, Grid, Preset, Problem, Rates};

pub struct Case {
    pub label: String,
    pub problem: Problem,
    pub grid: Grid,
    pub rates: Rates,
}

pub fn case(label: impl Into<String>, problem: Problem, n: usize) -> Case {
    let grid = Grid::new(&problem.domain, n).unwrap();
    let rates = build_rates(&problem, &grid, &split_drift(&problem, &grid).unwrap()).unwrap();
    Case {
        label: label.into(),
        problem,
        grid,
        rates,
    }
}

pub fn preset_cases() -> Vec<Case> {
    Preset::ALL
        .iter()
        .map(|&p| case(p.name(), p.problem(), p.default_nodes()))
        .collect()
}

/// Smooth random drift and positive diffusion amplitude, alternating between
/// a confining line window and the `2 pi` torus.
pub fn random_problem(rng: &mut impl Rng, torus: bool) -> Problem {
    let s0 = rng.random_range(0.5..1.5);
    let c = rng.random_range(-0.3..0.3);
    if torus {
        let a0 = rng.random_range(-1.0..1.0);
        let a1 = rng.random_range(-1.5..1.5);
        let phi = rng.random_range(0.0..2.0 * PI);
        let drift = Coefficient::from_fn(format!("{a0} + {a1}*sin(x + {phi})"), move |x| a0 + a1 * (x + phi).sin())
            .with_derivative(move |x| a1 * (x + phi).cos());
        let sigma = Coefficient::from_fn(format!("{s0}*exp({c}*cos(x))"), move |x| s0 * (c * x.cos()).exp())
            .with_derivative(move |x| -s0 * c * x.sin() * (c * x.cos()).exp());
        Problem::new(drift, sigma, Domain::Torus { length: 2.0 * PI }).unwrap()
    } else {
        let w = rng.random_range(3.0..6.0);
        let k = rng.random_range(0.5..2.0);
        let m = rng.random_range(-1.0..1.0);
        let a = rng.random_range(-0.5..0.5);
        let om = rng.random_range(0.5..2.0);
        let drift = Coefficient::from_fn(format!("-{k}*(x - {m}) + {a}*sin({om}*x)"), move |x| {
            -k * (x - m) + a * (om * x).sin()
        })
        .with_derivative(move |x| -k + a * om * (om * x).cos());
        let sigma = Coefficient::from_fn(format!("{s0}*exp({c}*sin(x))"), move |x| s0 * (c * x.sin()).exp())
            .with_derivative(move |x| s0 * c * x.cos() * (c * x.sin()).exp());
        Problem::new(drift, sigma, Domain::Line { x_min: -w, x_max: w }).unwrap()
    }
}

pub fn random_cases(count: usize, seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let torus = i % 2 == 1;
            let p = random_problem(&mut rng, torus);
            let n = rng.random_range(20..100);
            let label = format!("random #{i} ({})", if torus { "torus" } else { "line" });
            case(label, p, n)
        })
        .collect()
}

pub fn random_probability(rng: &mut impl Rng, n: usize) -> FieldVec {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let s: f64 = v.iter().sum();
    FieldVec::probability(v.iter().map(|x| x / s).collect()).unwrap()
}

pub fn random_observable(rng: &mut impl Rng, n: usize) -> FieldVec {
    FieldVec::observable((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
