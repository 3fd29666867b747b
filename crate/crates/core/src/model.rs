//! The continuous problem: coefficients, domain, grid, drift splitting and
//! reference stationary densities.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exprparse::{self, EvalError, Expr};
use crate::field::{FieldKind, FieldVec};
use crate::quadrature::GaussLegendre;
use crate::scheme::Boundary;

type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Source {
    Expr(Expr),
    Func { label: String, f: Fn1 },
}

/// A scalar coefficient function of `x`, optionally carrying its exact derivative.
#[derive(Clone)]
pub struct Coefficient {
    source: Source,
    derivative: Option<Fn1>,
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficient")
            .field("source", &self.describe())
            .field("exact_derivative", &self.derivative.is_some())
            .finish()
    }
}

impl Coefficient {
    pub fn from_expr(expr: Expr) -> Self {
        Coefficient {
            source: Source::Expr(expr),
            derivative: None,
        }
    }

    /// Parses `source`; `key` names the config entry in error messages.
    pub fn parse(key: &str, source: &str) -> Result<Self> {
        let expr = exprparse::parse(source).map_err(|e| Error::Expression {
            key: key.to_string(),
            source: e,
        })?;
        Ok(Self::from_expr(expr))
    }

    pub fn from_fn(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient {
            source: Source::Func {
                label: label.into(),
                f: Arc::new(f),
            },
            derivative: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_expr(Expr::Num(c)).with_derivative(|_| 0.0)
    }

    /// Registers an exact derivative, replacing the finite-difference fallback.
    pub fn with_derivative(mut self, df: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(df));
        self
    }

    pub fn describe(&self) -> String {
        match &self.source {
            Source::Expr(e) => e.to_string(),
            Source::Func { label, .. } => label.clone(),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let v = match &self.source {
            Source::Expr(e) => e.eval(x).map_err(|source| Error::Evaluation { x, source })?,
            Source::Func { f, .. } => f(x),
        };
        if !v.is_finite() {
            return Err(Error::Evaluation {
                x,
                source: EvalError::NonFinite,
            });
        }
        Ok(v)
    }

    /// Exact derivative when registered, else a central difference with
    /// step `1e-6 * max(1, |x|)`.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        if let Some(df) = &self.derivative {
            let v = df(x);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    x,
                    source: EvalError::NonFinite,
                });
            }
            return Ok(v);
        }
        let step = 1e-6 * x.abs().max(1.0);
        Ok((self.eval(x + step)? - self.eval(x - step)?) / (2.0 * step))
    }
}

/// Named coefficient pairs that bypass expression parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Ornstein-Uhlenbeck: `b = -x`, `sigma = 1`.
    Ou,
    /// `b = cos(x) exp(sin x)`, `sigma = exp(sin(x)/2)` on the `2 pi` torus.
    TorusSin,
    /// `b = 0`, `sigma = sqrt(2)`: the symmetric random walk.
    PureDiffusion,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Ou, Preset::TorusSin, Preset::PureDiffusion];

    pub fn from_name(name: &str) -> Option<Preset> {
        match name {
            "ou" => Some(Preset::Ou),
            "torus_sin" => Some(Preset::TorusSin),
            "pure_diffusion" => Some(Preset::PureDiffusion),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Ou => "ou",
            Preset::TorusSin => "torus_sin",
            Preset::PureDiffusion => "pure_diffusion",
        }
    }

    pub fn drift(self) -> Coefficient {
        match self {
            Preset::Ou => Coefficient::from_fn("-x", |x| -x).with_derivative(|_| -1.0),
            Preset::TorusSin => Coefficient::from_fn("cos(x)*exp(sin(x))", |x| x.cos() * x.sin().exp())
                .with_derivative(|x| (x.cos() * x.cos() - x.sin()) * x.sin().exp()),
            Preset::PureDiffusion => Coefficient::constant(0.0),
        }
    }

    pub fn sigma(self) -> Coefficient {
        match self {
            Preset::Ou => Coefficient::constant(1.0),
            Preset::TorusSin => Coefficient::from_fn("exp(sin(x)/2)", |x| (0.5 * x.sin()).exp())
                .with_derivative(|x| 0.5 * x.cos() * (0.5 * x.sin()).exp()),
            Preset::PureDiffusion => Coefficient::constant(std::f64::consts::SQRT_2),
        }
    }

    pub fn default_domain(self) -> Domain {
        match self {
            Preset::Ou => Domain::Line {
                x_min: -6.0,
                x_max: 6.0,
            },
            Preset::TorusSin | Preset::PureDiffusion => Domain::Torus { length: 2.0 * PI },
        }
    }

    pub fn default_nodes(self) -> usize {
        match self {
            Preset::Ou => 121,
            Preset::TorusSin | Preset::PureDiffusion => 64,
        }
    }

    pub fn problem(self) -> Problem {
        Problem {
            drift: self.drift(),
            sigma: self.sigma(),
            domain: self.default_domain(),
            sigma_bounds: None,
        }
    }
}

/// Spatial domain: a truncation window of the real line, or a torus `R / L Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Line { x_min: f64, x_max: f64 },
    Torus { length: f64 },
}

impl Domain {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Domain::Line { x_min, x_max } => {
                if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
                    return Err(Error::Domain(format!("need x_min < x_max, got [{x_min}, {x_max}]")));
                }
            }
            Domain::Torus { length } => {
                if !(length.is_finite() && length > 0.0) {
                    return Err(Error::Domain(format!("torus length must be positive, got {length}")));
                }
            }
        }
        Ok(())
    }

    pub fn boundary(&self) -> Boundary {
        match self {
            Domain::Line { .. } => Boundary::Reflecting,
            Domain::Torus { .. } => Boundary::Periodic,
        }
    }
}

/// Drift, diffusion amplitude and domain of the Fokker-Planck equation
/// `d_t rho = -d_x(b rho) + 1/2 d_xx(sigma^2 rho)`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub drift: Coefficient,
    pub sigma: Coefficient,
    pub domain: Domain,
    /// Claimed `(S1, S2)` with `S1 <= sigma^2 <= S2`; checked on the grid.
    pub sigma_bounds: Option<(f64, f64)>,
}

impl Problem {
    pub fn new(drift: Coefficient, sigma: Coefficient, domain: Domain) -> Result<Self> {
        domain.validate()?;
        Ok(Problem {
            drift,
            sigma,
            domain,
            sigma_bounds: None,
        })
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        domain.validate()?;
        self.domain = domain;
        Ok(self)
    }

    pub fn with_sigma_bounds(mut self, s1: f64, s2: f64) -> Result<Self> {
        if !(s1 > 0.0 && s1 <= s2) {
            return Err(Error::Precondition(format!(
                "sigma bounds need 0 < S1 <= S2, got ({s1}, {s2})"
            )));
        }
        self.sigma_bounds = Some((s1, s2));
        Ok(self)
    }

    /// `s = b - sigma sigma'` at `x`.
    pub fn effective_drift(&self, x: f64) -> Result<f64> {
        Ok(self.drift.eval(x)? - self.sigma.eval(x)? * self.sigma.derivative(x)?)
    }

    pub fn diffusion(&self, x: f64) -> Result<f64> {
        let s = self.sigma.eval(x)?;
        Ok(s * s)
    }

    /// Samples `sigma^2` at every node and half node; returns the observed
    /// `(min, max)`. Fails if the minimum is not positive or the claimed
    /// bounds are violated.
    pub fn check_on(&self, grid: &Grid) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..grid.len() {
            for x in [grid.node(j), grid.node(j) + 0.5 * grid.h()] {
                let d = self.diffusion(x)?;
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        if lo <= 0.0 {
            return Err(Error::Precondition(format!(
                "sigma^2 must be bounded below by a positive constant, min on grid is {lo}"
            )));
        }
        if let Some((s1, s2)) = self.sigma_bounds {
            if lo < s1 || hi > s2 {
                return Err(Error::Precondition(format!(
                    "sigma^2 range [{lo}, {hi}] on the grid violates claimed bounds [{s1}, {s2}]"
                )));
            }
        }
        Ok((lo, hi))
    }
}

/// Uniform grid. On the line, `x_0 = x_min` and `x_{N-1} = x_max`; on the
/// torus `h = L/N` and `x_j = j h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    boundary: Boundary,
    h: f64,
    nodes: Vec<f64>,
    length: f64,
}

impl Grid {
    /// Line grid with `n` nodes. Node coordinates are computed symmetrically
    /// about the window centre so that symmetric windows give exactly
    /// mirrored nodes.
    pub fn line(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        Domain::Line { x_min, x_max }.validate()?;
        if n < 2 {
            return Err(Error::Domain(format!("line grid needs at least 2 nodes, got {n}")));
        }
        let intervals = (n - 1) as f64;
        let h = (x_max - x_min) / intervals;
        let mid = 0.5 * (x_min + x_max);
        let half_step = 0.5 * (x_max - x_min) / intervals;
        let mut nodes: Vec<f64> = (0..n)
            .map(|j| mid + (2 * j as i64 - (n as i64 - 1)) as f64 * half_step)
            .collect();
        nodes[0] = x_min;
        nodes[n - 1] = x_max;
        Ok(Grid {
            boundary: Boundary::Reflecting,
            h,
            nodes,
            length: x_max - x_min,
        })
    }

    pub fn torus(length: f64, n: usize) -> Result<Self> {
        Domain::Torus { length }.validate()?;
        if n < 3 {
            return Err(Error::Domain(format!("torus grid needs at least 3 nodes, got {n}")));
        }
        let h = length / n as f64;
        let nodes = (0..n).map(|j| j as f64 * h).collect();
        Ok(Grid {
            boundary: Boundary::Periodic,
            h,
            nodes,
            length,
        })
    }

    pub fn new(domain: &Domain, n: usize) -> Result<Self> {
        match *domain {
            Domain::Line { x_min, x_max } => Self::line(x_min, x_max, n),
            Domain::Torus { length } => Self::torus(length, n),
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Window width (line) or torus length.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Index of the node nearest `x = 0` (clamped into the window).
    pub fn origin(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => 0,
            Boundary::Reflecting => {
                let mut best = 0;
                for (j, x) in self.nodes.iter().enumerate() {
                    if x.abs() < self.nodes[best].abs() {
                        best = j;
                    }
                }
                best
            }
        }
    }

    /// Grid with `factor` times smaller spacing whose nodes contain these nodes.
    pub fn refined(&self, factor: usize) -> Result<Grid> {
        match self.boundary {
            Boundary::Reflecting => Grid::line(
                self.nodes[0],
                self.nodes[self.len() - 1],
                (self.len() - 1) * factor + 1,
            ),
            Boundary::Periodic => Grid::torus(self.length, self.len() * factor),
        }
    }
}

/// Upwind splitting `s = b - sigma sigma' = s_plus - s_minus` at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDrift {
    pub s: Vec<f64>,
    pub s_plus: Vec<f64>,
    pub s_minus: Vec<f64>,
}

pub fn split_drift(problem: &Problem, grid: &Grid) -> Result<SplitDrift> {
    let s: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| problem.effective_drift(x))
        .collect::<Result<_>>()?;
    let s_plus = s.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
    let s_minus = s.iter().map(|&v| if v < 0.0 { -v } else { 0.0 }).collect();
    Ok(SplitDrift { s, s_plus, s_minus })
}

/// Per-cell quadrature panels used by [`StationaryDensity`].
const PANELS_PER_CELL: usize = 2;

/// Stationary density of the continuous equation, by quadrature of the
/// first integral `1/2 (sigma^2 pi)' - b pi = const`.
///
/// With `v = sigma^2 pi` and `a = 2 b / sigma^2`, `v' = a v + c`. On the
/// line `c = 0` (no flux through infinity). On the torus, `c` is fixed by
/// periodicity of `v`.
#[derive(Debug, Clone)]
pub struct StationaryDensity {
    problem: Problem,
    grid: Grid,
    gl: GaussLegendre,
    /// `A(x_j) = int a` from the anchor to node `j` (torus: one extra entry for `x = L`).
    log_v: Vec<f64>,
    /// Torus only: `E(x_j) = int_0^{x_j} exp(-A)`.
    e_int: Vec<f64>,
    c: f64,
    shift: f64,
    norm: f64,
    anchor: usize,
}

impl StationaryDensity {
    pub fn solve(problem: &Problem, grid: &Grid) -> Result<Self> {
        problem.check_on(grid)?;
        let gl = GaussLegendre::new(8);
        let n = grid.len();
        let mut sd = StationaryDensity {
            problem: problem.clone(),
            grid: grid.clone(),
            gl,
            log_v: Vec::new(),
            e_int: Vec::new(),
            c: 0.0,
            shift: 0.0,
            norm: 1.0,
            anchor: grid.origin(),
        };
        match grid.boundary() {
            Boundary::Reflecting => {
                let o = sd.anchor;
                let mut a = vec![0.0; n];
                for j in o + 1..n {
                    a[j] = a[j - 1] + sd.int_a(grid.node(j - 1), grid.node(j))?;
                }
                for j in (0..o).rev() {
                    a[j] = a[j + 1] - sd.int_a(grid.node(j), grid.node(j + 1))?;
                }
                sd.shift = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                sd.log_v = a;
            }
            Boundary::Periodic => {
                let h = grid.h();
                let mut a = vec![0.0; n + 1];
                let mut e = vec![0.0; n + 1];
                for j in 0..n {
                    let (x0, x1) = (j as f64 * h, (j + 1) as f64 * h);
                    a[j + 1] = a[j] + sd.int_a(x0, x1)?;
                    e[j + 1] = e[j] + sd.int_exp_neg_a(a[j], x0, x1)?;
                }
                sd.c = ((-a[n]).exp() - 1.0) / e[n];
                sd.log_v = a;
                sd.e_int = e;
            }
        }
        let raw: Vec<f64> = (0..n).map(|j| sd.unnormalized_at_node(j)).collect::<Result<_>>()?;
        let h = grid.h();
        sd.norm = match grid.boundary() {
            Boundary::Reflecting => h * (raw.iter().sum::<f64>() - 0.5 * (raw[0] + raw[n - 1])),
            Boundary::Periodic => h * raw.iter().sum::<f64>(),
        };
        if !(sd.norm.is_finite() && sd.norm > 0.0) {
            return Err(Error::Numerical(format!(
                "reference density normalization failed (integral {})",
                sd.norm
            )));
        }
        if let Some(j) = raw.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Numerical(format!(
                "reference density not positive at node {j} (x = {})",
                grid.node(j)
            )));
        }
        Ok(sd)
    }

    fn a(&self, x: f64) -> Result<f64> {
        Ok(2.0 * self.problem.drift.eval(x)? / self.problem.diffusion(x)?)
    }

    fn int_a(&self, from: f64, to: f64) -> Result<f64> {
        self.gl.integrate(|x| self.a(x), from, to, PANELS_PER_CELL)
    }

    /// `int_{x0}^{x1} exp(-A(z)) dz` given `A(x0)`.
    fn int_exp_neg_a(&self, a0: f64, x0: f64, x1: f64) -> Result<f64> {
        self.gl.integrate(
            |z| Ok((-(a0 + self.int_a(x0, z)?)).exp()),
            x0,
            x1,
            PANELS_PER_CELL,
        )
    }

    fn unnormalized_at_node(&self, j: usize) -> Result<f64> {
        let x = self.grid.node(j);
        let v = match self.grid.boundary() {
            Boundary::Reflecting => (self.log_v[j] - self.shift).exp(),
            Boundary::Periodic => self.log_v[j].exp() * (1.0 + self.c * self.e_int[j]),
        };
        Ok(v / self.problem.diffusion(x)?)
    }

    /// Density at an arbitrary point (torus points are wrapped into `[0, L)`).
    pub fn eval(&self, x: f64) -> Result<f64> {
        let h = self.grid.h();
        let v = match self.grid.boundary() {
            Boundary::Reflecting => {
                let x0 = self.grid.node(0);
                let k = (((x - x0) / h).round().max(0.0) as usize).min(self.grid.len() - 1);
                let a = self.log_v[k] + self.int_a(self.grid.node(k), x)?;
                (a - self.shift).exp()
            }
            Boundary::Periodic => {
                let l = self.grid.length();
                let y = x.rem_euclid(l);
                let k = ((y / h).floor() as usize).min(self.grid.len() - 1);
                let xk = k as f64 * h;
                let a = self.log_v[k] + self.int_a(xk, y)?;
                let e = self.e_int[k] + self.int_exp_neg_a(self.log_v[k], xk, y)?;
                a.exp() * (1.0 + self.c * e)
            }
        };
        Ok(v / self.problem.diffusion(x)? / self.norm)
    }

    /// Samples `pi(x_j)` on the grid.
    pub fn on_grid(&self) -> Result<FieldVec> {
        let vals = (0..self.grid.len())
            .map(|j| Ok(self.unnormalized_at_node(j)? / self.norm))
            .collect::<Result<Vec<f64>>>()?;
        FieldVec::new(FieldKind::Density, vals)
    }

    /// Stationary probability flux `b pi - 1/2 (sigma^2 pi)'` (zero on the line).
    pub fn flux(&self) -> f64 {
        -0.5 * self.c / self.norm
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// Reference stationary density `pi(x_j)` of the continuous problem, normalized
/// so that its trapezoid integral over the grid is one.
pub fn reference_stationary(problem: &Problem, grid: &Grid) -> Result<FieldVec> {
    StationaryDensity::solve(problem, grid)?.on_grid()
}
