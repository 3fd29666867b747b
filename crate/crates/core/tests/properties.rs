mod common;

use proptest::prelude::*;
use upwind_jump::evolve::step_forward_euler;
use upwind_jump::exprparse::{parse, BinOp, Expr, Func};
use upwind_jump::gap::{hardy_b, hardy_functional, witness_scan, HardyInput};
use upwind_jump::model::split_drift;
use upwind_jump::scheme::{build_rates, uniformization_rate};
use upwind_jump::{Coefficient, Domain, Grid, Problem};

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..1000, 0u32..4).prop_map(|(m, e)| Expr::Num(m as f64 / 10f64.powi(e as i32))),
        Just(Expr::X),
        Just(Expr::Pi),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 40, 2, |inner| {
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow)
        ];
        let func = prop_oneof![
            Just(Func::Sin),
            Just(Func::Cos),
            Just(Func::Exp),
            Just(Func::Abs),
            Just(Func::Sqrt),
            Just(Func::Tanh)
        ];
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::Bin(o, Box::new(a), Box::new(b))),
            (func, inner).prop_map(|(f, a)| Expr::Call(f, Box::new(a))),
        ]
    })
}

fn same(a: Result<f64, impl std::fmt::Debug>, b: Result<f64, impl std::fmt::Debug>) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn printed_expressions_parse_back(e in expr(), x in -3.0f64..3.0) {
        let text = e.to_string();
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back, &e, "{}", text);
        prop_assert!(same(back.eval(x), e.eval(x)));
    }
}

proptest! {
    #[test]
    fn precedence_is_bit_exact(a in 0.1f64..10.0, b in 0.1f64..10.0, c in 0.1f64..10.0, d in 0.1f64..10.0, x in -2.0f64..2.0) {
        let e = parse(&format!("{a} - {b} / {c} * {d} + x")).unwrap();
        prop_assert_eq!(e.eval(x).unwrap().to_bits(), (a - b / c * d + x).to_bits());
        let e = parse(&format!("{a} * x - -{b} * {c}")).unwrap();
        prop_assert_eq!(e.eval(x).unwrap().to_bits(), (a * x - -b * c).to_bits());
        let e = parse("-x^2").unwrap();
        prop_assert_eq!(e.eval(x).unwrap().to_bits(), (-(x * x)).to_bits());
        let e = parse(&format!("{a} + {b} * {c} ^ 3")).unwrap();
        prop_assert_eq!(e.eval(x).unwrap().to_bits(), (a + b * (c * c * c)).to_bits());
        let e = parse(&format!("{a} / {b} / {c}")).unwrap();
        prop_assert_eq!(e.eval(x).unwrap().to_bits(), (a / b / c).to_bits());
    }
}

/// Drift and diffusion built from a few random Fourier-type terms.
fn coefficients() -> impl Strategy<Value = (f64, f64, f64, f64, f64, bool, usize)> {
    (
        -2.0f64..2.0,
        -2.0f64..2.0,
        0.2f64..2.0,
        0.3f64..1.5,
        -0.4f64..0.4,
        any::<bool>(),
        8usize..60,
    )
}

fn problem_from((a0, a1, k, s0, c, torus, _): (f64, f64, f64, f64, f64, bool, usize)) -> Problem {
    let drift = Coefficient::from_fn("random drift", move |x| a0 + a1 * (k * x).sin() - if torus { 0.0 } else { x })
        .with_derivative(move |x| a1 * k * (k * x).cos() - if torus { 0.0 } else { 1.0 });
    let sigma = Coefficient::from_fn("random sigma", move |x| s0 * (c * x.cos()).exp())
        .with_derivative(move |x| -s0 * c * x.sin() * (c * x.cos()).exp());
    let domain = if torus {
        Domain::Torus {
            length: 2.0 * std::f64::consts::PI,
        }
    } else {
        Domain::Line { x_min: -4.0, x_max: 4.0 }
    };
    Problem::new(drift, sigma, domain).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn rates_are_nonnegative_and_rows_sum_to_zero(params in coefficients()) {
        let n = params.6;
        let p = problem_from(params);
        let g = Grid::new(&p.domain, n).unwrap();
        let r = build_rates(&p, &g, &split_drift(&p, &g).unwrap()).unwrap();
        prop_assert!(r.alpha().iter().chain(r.beta()).all(|&v| v >= 0.0 && v.is_finite()));
        let gen = r.generator();
        for i in 0..n {
            prop_assert_eq!(gen.row_sum(i), 0.0);
        }
    }

    #[test]
    fn euler_step_keeps_mass_sign_and_contracts(params in coefficients(), seed in any::<u64>(), frac in 0.05f64..1.0) {
        use rand::SeedableRng;
        let n = params.6;
        let p = problem_from(params);
        let g = Grid::new(&p.domain, n).unwrap();
        let r = build_rates(&p, &g, &split_drift(&p, &g).unwrap()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = common::random_probability(&mut rng, n);
        let b = common::random_probability(&mut rng, n);
        let dt = frac / uniformization_rate(&r);
        let (a1, b1) = (step_forward_euler(&r, &a, dt).unwrap(), step_forward_euler(&r, &b, dt).unwrap());
        prop_assert!((a1.sum() - 1.0).abs() <= 1e-14);
        prop_assert!(a1.values().iter().all(|&v| v >= 0.0));
        let d0: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum();
        let d1: f64 = a1.values().iter().zip(b1.values()).map(|(x, y)| (x - y).abs()).sum();
        prop_assert!(d1 <= d0 + 1e-15);
    }

    #[test]
    fn hardy_constant_sandwich(
        theta in prop::collection::vec(0.0f64..1.0, 2..60),
        mu_seed in prop::collection::vec(0.05f64..2.0, 60),
        f_seed in prop::collection::vec(-1.0f64..1.0, 60),
        origin_frac in 0.0f64..=1.0,
    ) {
        let n = theta.len();
        let origin = ((n as f64) * origin_frac) as usize;
        let hi = HardyInput::new(theta, mu_seed[..n].to_vec(), origin).unwrap();
        let b = hardy_b(&hi);
        let w = witness_scan(&hi);
        prop_assert!(w.max >= b * (1.0 - 1e-12) && w.max <= b * (1.0 + 1e-12));
        prop_assert!(w.functional_max >= b * (1.0 - 1e-12) && w.functional_max <= 4.0 * b * (1.0 + 1e-12));
        let q = hardy_functional(&hi, &f_seed[..n]);
        prop_assert!(q <= 4.0 * b * (1.0 + 1e-12));
    }
}
