//! Exact stationary distribution of the jump chain.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{FieldKind, FieldVec};
use crate::model::Grid;
use crate::scheme::{flux, uniformization_rate, Boundary, Rates};

/// Relative tolerance for the torus flux-constancy check, measured against
/// the gross one-way flux `max_j h alpha_j pi_j`.
pub const FLUX_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct StationaryResult {
    /// `pi^h`, summing to one.
    pub pi: FieldVec,
    /// Mean edge flux `h(alpha_j pi_j - beta_{j+1} pi_{j+1})`; zero on the line.
    pub flux: f64,
    /// `max_j |alpha_j pi_j - beta_{j+1} pi_{j+1}|` over the edges.
    pub db_residual: f64,
    /// Standard deviation of the edge fluxes.
    pub flux_spread: f64,
    /// `max_j h alpha_j pi_j`, the scale against which flux spreads are judged.
    pub flux_scale: f64,
    pub boundary: Boundary,
}

impl StationaryResult {
    pub fn values(&self) -> &[f64] {
        self.pi.values()
    }

    /// `pi^h / h`, the density approximation.
    pub fn density(&self, h: f64) -> Vec<f64> {
        self.pi.values().iter().map(|p| p / h).collect()
    }

    /// `flux_spread / |flux|`, infinite when the mean flux vanishes.
    pub fn relative_flux_spread(&self) -> f64 {
        if self.flux == 0.0 {
            if self.flux_spread == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.flux_spread / self.flux.abs()
        }
    }
}

/// Product recursion `pi_{k} / pi_{k-1} = alpha_{k-1} / beta_k`, accumulated
/// in logs outward from the anchor node and normalized by log-sum-exp.
pub fn stationary_line(r: &Rates) -> Result<StationaryResult> {
    if r.boundary() != Boundary::Reflecting {
        return Err(Error::Precondition("stationary_line needs reflecting rates".into()));
    }
    let n = r.len();
    let (a, b) = (r.alpha(), r.beta());
    for k in 0..n - 1 {
        if a[k] <= 0.0 || b[k + 1] <= 0.0 {
            return Err(Error::Internal(format!(
                "chain is reducible across edge {k}: alpha = {}, beta = {}",
                a[k],
                b[k + 1]
            )));
        }
    }
    let o = r.origin();
    let mut log_pi = vec![0.0; n];
    for k in o + 1..n {
        log_pi[k] = log_pi[k - 1] + (a[k - 1].ln() - b[k].ln());
    }
    for k in (0..o).rev() {
        log_pi[k] = log_pi[k + 1] + (b[k + 1].ln() - a[k].ln());
    }
    let m = log_pi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut pi: Vec<f64> = log_pi.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= z);
    finish(r, pi)
}

/// Solves `Q^T pi = 0, sum pi = 1` with the last equation replaced by the
/// normalization row. The remaining system is tridiagonal in
/// `pi_0..pi_{N-2}` plus a border column for `pi_{N-1}`, so it is solved in
/// O(N) by one Thomas sweep.
pub fn stationary_torus(r: &Rates) -> Result<StationaryResult> {
    if r.boundary() != Boundary::Periodic {
        return Err(Error::Precondition("stationary_torus needs periodic rates".into()));
    }
    let n = r.len();
    let (a, b) = (r.alpha(), r.beta());
    let m = n - 1;
    // T y = -u pi_{N-1}, with T rows 0..N-2 of Q^T restricted to the first N-1 columns.
    let diag: Vec<f64> = (0..m).map(|j| -(a[j] + b[j])).collect();
    let lower: Vec<f64> = (0..m).map(|j| if j > 0 { a[j - 1] } else { 0.0 }).collect();
    let upper: Vec<f64> = (0..m).map(|j| if j + 1 < m { b[j + 1] } else { 0.0 }).collect();
    let mut u = vec![0.0; m];
    u[0] += a[n - 1];
    u[m - 1] += b[n - 1];
    let z = thomas(&lower, &diag, &upper, &u)?;
    let denom = 1.0 - z.iter().sum::<f64>();
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::Numerical(format!(
            "stationary system is singular beyond its one-dimensional kernel (pivot {denom})"
        )));
    }
    let last = 1.0 / denom;
    let mut pi: Vec<f64> = z.iter().map(|zj| -last * zj).collect();
    pi.push(last);
    let res = finish(r, pi)?;
    if res.flux_spread > FLUX_TOL * res.flux_scale {
        return Err(Error::Numerical(format!(
            "edge fluxes not constant: spread {} against scale {}",
            res.flux_spread, res.flux_scale
        )));
    }
    Ok(res)
}

/// Dispatches on the boundary type.
pub fn stationary(r: &Rates) -> Result<StationaryResult> {
    match r.boundary() {
        Boundary::Reflecting => stationary_line(r),
        Boundary::Periodic => stationary_torus(r),
    }
}

fn finish(r: &Rates, pi: Vec<f64>) -> Result<StationaryResult> {
    if let Some(j) = pi.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::Numerical(format!(
            "stationary distribution not positive at node {j}: {}",
            pi[j]
        )));
    }
    let pi = FieldVec::new(FieldKind::Stationary, pi)?;
    let h = r.h();
    let edges: Vec<f64> = match r.boundary() {
        Boundary::Reflecting => {
            let all = flux(r, &pi)?;
            all[1..all.len() - 1].to_vec()
        }
        Boundary::Periodic => flux(r, &pi)?,
    };
    let ne = edges.len() as f64;
    let mean = edges.iter().sum::<f64>() / ne;
    let spread = (edges.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / ne).sqrt();
    let db_residual = edges.iter().map(|e| (e / h).abs()).fold(0.0, f64::max);
    let p = pi.values();
    let flux_scale = (0..r.len()).map(|j| h * r.alpha()[j] * p[j]).fold(0.0, f64::max);

    let mut lp = vec![0.0; r.len()];
    r.forward_into(p, &mut lp);
    let resid = lp.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let pmax = p.iter().cloned().fold(0.0, f64::max);
    let bound = 1e-10 * uniformization_rate(r) * pmax;
    if resid > bound {
        return Err(Error::Internal(format!(
            "stationary residual {resid} exceeds {bound}"
        )));
    }
    let flux_mean = match r.boundary() {
        Boundary::Reflecting => 0.0,
        Boundary::Periodic => mean,
    };
    Ok(StationaryResult {
        pi,
        flux: flux_mean,
        db_residual,
        flux_spread: spread,
        flux_scale,
        boundary: r.boundary(),
    })
}

/// Thomas algorithm for `lower[j] x[j-1] + diag[j] x[j] + upper[j] x[j+1] = rhs[j]`.
pub(crate) fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut prev_c = 0.0;
    let mut prev_d = 0.0;
    for j in 0..n {
        let l = if j > 0 { lower[j] } else { 0.0 };
        let piv = diag[j] - l * prev_c;
        if piv == 0.0 || !piv.is_finite() {
            return Err(Error::Numerical(format!("zero pivot at row {j}")));
        }
        c[j] = upper[j] / piv;
        d[j] = (rhs[j] - l * prev_d) / piv;
        prev_c = c[j];
        prev_d = d[j];
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for j in (0..n - 1).rev() {
        x[j] = d[j] - c[j] * x[j + 1];
    }
    Ok(x)
}

/// Time-reversed chain `alpha~_j = beta_{j+1} pi_{j+1} / pi_j`,
/// `beta~_j = alpha_{j-1} pi_{j-1} / pi_j`.
///
/// Fails if the total rates `alpha + beta` are not preserved to `1e-10` relative.
pub fn modified_rates(r: &Rates, s: &StationaryResult) -> Result<Rates> {
    crate::error::check_len(r.len(), s.pi.len())?;
    let n = r.len();
    let (a, b, p) = (r.alpha(), r.beta(), s.pi.values());
    let mut at = vec![0.0; n];
    let mut bt = vec![0.0; n];
    for j in 0..n {
        if let Some(k) = r.right(j) {
            at[j] = b[k] * p[k] / p[j];
        }
        if let Some(k) = r.left(j) {
            bt[j] = a[k] * p[k] / p[j];
        }
        let (orig, new) = (a[j] + b[j], at[j] + bt[j]);
        if (orig - new).abs() > 1e-10 * orig {
            return Err(Error::Numerical(format!(
                "reversed rates change the total rate at node {j}: {orig} vs {new}"
            )));
        }
    }
    Rates::new(at, bt, r.boundary(), r.h())?.with_origin(r.origin())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComparisonReport {
    pub max: f64,
    pub min: f64,
    pub ratio: f64,
    pub nodes: usize,
}

/// `max / min` of `pi^h` over `|x| <= window` (line) or the whole torus.
pub fn comparison_check(s: &StationaryResult, grid: &Grid, window: f64) -> Result<ComparisonReport> {
    crate::error::check_len(grid.len(), s.pi.len())?;
    let vals: Vec<f64> = match grid.boundary() {
        Boundary::Periodic => s.pi.values().to_vec(),
        Boundary::Reflecting => grid
            .nodes()
            .iter()
            .zip(s.pi.values())
            .filter(|(x, _)| x.abs() <= window)
            .map(|(_, &p)| p)
            .collect(),
    };
    if vals.is_empty() {
        return Err(Error::Precondition(format!("no grid nodes inside |x| <= {window}")));
    }
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(ComparisonReport {
        max,
        min,
        ratio: max / min,
        nodes: vals.len(),
    })
}
