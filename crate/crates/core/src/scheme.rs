//! Upwind rates, the tridiagonal generator, and the forward/backward operators.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::field::{FieldKind, FieldVec};
use crate::model::{Grid, Problem, SplitDrift};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Truncated line with no-flux ends.
    Reflecting,
    /// Torus; indices wrap.
    Periodic,
}

/// Jump rates of the birth-death chain: `alpha[j]` is the rate `j -> j+1`,
/// `beta[j]` the rate `j -> j-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    boundary: Boundary,
    h: f64,
    origin: usize,
}

impl Rates {
    /// Validates nonnegativity and, on the line, that `alpha[N-1] == beta[0] == 0`.
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, boundary: Boundary, h: f64) -> Result<Self> {
        check_len(alpha.len(), beta.len())?;
        let n = alpha.len();
        let min_n = match boundary {
            Boundary::Reflecting => 2,
            Boundary::Periodic => 3,
        };
        if n < min_n {
            return Err(Error::Domain(format!("need at least {min_n} nodes, got {n}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Domain(format!("grid step must be positive, got {h}")));
        }
        for (j, (&a, &b)) in alpha.iter().zip(&beta).enumerate() {
            if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
                return Err(Error::Internal(format!(
                    "rates at node {j} must be finite and nonnegative: alpha = {a}, beta = {b}"
                )));
            }
        }
        if boundary == Boundary::Reflecting && (alpha[n - 1] != 0.0 || beta[0] != 0.0) {
            return Err(Error::Precondition(
                "reflecting ends need alpha[N-1] = beta[0] = 0".into(),
            ));
        }
        Ok(Rates {
            alpha,
            beta,
            boundary,
            h,
            origin: 0,
        })
    }

    /// Sets the anchor node (the node nearest `x = 0` on the line).
    pub fn with_origin(mut self, origin: usize) -> Result<Self> {
        if origin >= self.len() {
            return Err(Error::Precondition(format!(
                "origin {origin} outside grid of {} nodes",
                self.len()
            )));
        }
        self.origin = origin;
        Ok(self)
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Total jump rate `alpha[j] + beta[j]`.
    pub fn total(&self, j: usize) -> f64 {
        self.alpha[j] + self.beta[j]
    }

    /// Left neighbour of `j`, if any.
    pub fn left(&self, j: usize) -> Option<usize> {
        match (self.boundary, j) {
            (Boundary::Reflecting, 0) => None,
            (Boundary::Periodic, 0) => Some(self.len() - 1),
            _ => Some(j - 1),
        }
    }

    /// Right neighbour of `j`, if any.
    pub fn right(&self, j: usize) -> Option<usize> {
        let n = self.len();
        match self.boundary {
            Boundary::Reflecting if j + 1 == n => None,
            Boundary::Periodic if j + 1 == n => Some(0),
            _ => Some(j + 1),
        }
    }

    pub fn generator(&self) -> Generator<'_> {
        Generator { rates: self }
    }

    /// `out = L* p` on raw slices.
    pub fn forward_into(&self, p: &[f64], out: &mut [f64]) {
        let n = self.len();
        let (a, b) = (&self.alpha, &self.beta);
        for j in 0..n {
            let mut v = -(a[j] + b[j]) * p[j];
            if let Some(l) = self.left(j) {
                v += a[l] * p[l];
            }
            if let Some(r) = self.right(j) {
                v += b[r] * p[r];
            }
            out[j] = v;
        }
    }

    /// `out = L u` on raw slices.
    pub fn backward_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.len();
        let (a, b) = (&self.alpha, &self.beta);
        for j in 0..n {
            let mut v = 0.0;
            if let Some(l) = self.left(j) {
                v += b[j] * (u[l] - u[j]);
            }
            if let Some(r) = self.right(j) {
                v += a[j] * (u[r] - u[j]);
            }
            out[j] = v;
        }
    }
}

/// Assembles `alpha_j = s+(x_j)/h + sigma^2(x_j + h/2)/(2h^2)` and
/// `beta_j = s-(x_j)/h + sigma^2(x_j - h/2)/(2h^2)`, zeroing outward rates at
/// reflecting ends.
pub fn build_rates(problem: &Problem, grid: &Grid, split: &SplitDrift) -> Result<Rates> {
    let n = grid.len();
    check_len(n, split.s.len())?;
    problem.check_on(grid)?;
    let h = grid.h();
    let inv_2h2 = 1.0 / (2.0 * h * h);
    let mut alpha = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    for j in 0..n {
        let x = grid.node(j);
        alpha.push(split.s_plus[j] / h + problem.diffusion(x + 0.5 * h)? * inv_2h2);
        beta.push(split.s_minus[j] / h + problem.diffusion(x - 0.5 * h)? * inv_2h2);
    }
    if grid.boundary() == Boundary::Reflecting {
        alpha[n - 1] = 0.0;
        beta[0] = 0.0;
    }
    Rates::new(alpha, beta, grid.boundary(), h)?.with_origin(grid.origin())
}

/// Forward (Fokker-Planck) operator `L* p`.
pub fn apply_forward(r: &Rates, p: &FieldVec) -> Result<FieldVec> {
    check_len(r.len(), p.len())?;
    let mut out = vec![0.0; r.len()];
    r.forward_into(p.values(), &mut out);
    FieldVec::new(FieldKind::Density, out)
}

/// Backward (Kolmogorov) operator `L u`.
pub fn apply_backward(r: &Rates, u: &FieldVec) -> Result<FieldVec> {
    check_len(r.len(), u.len())?;
    let mut out = vec![0.0; r.len()];
    r.backward_into(u.values(), &mut out);
    FieldVec::new(FieldKind::Observable, out)
}

/// Edge fluxes `J_{j+1/2} = h alpha_j rho_j - h beta_{j+1} rho_{j+1}`.
///
/// On the line the result has `N + 1` entries: the outer edges at both ends
/// (always zero) followed by the interior edges in order, so entry `k` is the
/// flux through the left edge of node `k`. On the torus entry `j` is the
/// flux from node `j` to node `j+1 mod N`.
pub fn flux(r: &Rates, rho: &FieldVec) -> Result<Vec<f64>> {
    check_len(r.len(), rho.len())?;
    let n = r.len();
    let (a, b, h, p) = (r.alpha(), r.beta(), r.h(), rho.values());
    let edge = |j: usize, k: usize| h * a[j] * p[j] - h * b[k] * p[k];
    Ok(match r.boundary() {
        Boundary::Reflecting => {
            let mut out = Vec::with_capacity(n + 1);
            out.push(0.0);
            out.extend((0..n - 1).map(|j| edge(j, j + 1)));
            out.push(0.0);
            out
        }
        Boundary::Periodic => (0..n).map(|j| edge(j, (j + 1) % n)).collect(),
    })
}

/// `lambda* = max_j (alpha_j + beta_j)`.
pub fn uniformization_rate(r: &Rates) -> f64 {
    (0..r.len()).map(|j| r.total(j)).fold(0.0, f64::max)
}

/// Tridiagonal Q-matrix view of [`Rates`].
#[derive(Debug, Clone, Copy)]
pub struct Generator<'a> {
    rates: &'a Rates,
}

impl Generator<'_> {
    /// `Q(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let r = self.rates;
        let mut v = 0.0;
        if i == j {
            v -= r.total(i);
        }
        if r.left(i) == Some(j) {
            v += r.beta[i];
        }
        if r.right(i) == Some(j) {
            v += r.alpha[i];
        }
        v
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        let r = self.rates;
        let up = if r.right(i).is_some() { r.alpha[i] } else { 0.0 };
        let down = if r.left(i).is_some() { r.beta[i] } else { 0.0 };
        (up + down) - r.total(i)
    }

    /// Dense copy of Q; for tests and small oracles only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.rates.len();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }
}
