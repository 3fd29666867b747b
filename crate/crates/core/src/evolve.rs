//! Time integration of the forward and backward equations.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::field::FieldVec;
use crate::scheme::{uniformization_rate, Rates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Explicit Euler at `dt = safety / lambda*`.
    Euler,
    /// Truncated uniformization series; accurate to the series tolerance.
    UniformSeries,
}

impl Method {
    pub fn from_name(name: &str) -> Option<Method> {
        match name {
            "euler" => Some(Method::Euler),
            "uniform_series" | "series" => Some(Method::UniformSeries),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Euler => "euler",
            Method::UniformSeries => "uniform_series",
        }
    }
}

/// Forward (`dp/dt = L* p`) or backward (`du/dt = L u`) equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolveConfig {
    pub t_final: f64,
    /// Euler step as a fraction of `1/lambda*`.
    pub safety: f64,
    pub method: Method,
    /// Truncated Poisson mass allowed in the series.
    pub series_tol: f64,
    /// Extra output times in `[0, t_final]`; `t_final` is always recorded.
    pub snapshots: Vec<f64>,
    /// Manual Euler step, overriding `safety`.
    pub dt: Option<f64>,
    /// Uniformization rate for the series; defaults to `lambda*`.
    pub lambda: Option<f64>,
    /// Largest admissible series length.
    pub max_terms: usize,
}

impl EvolveConfig {
    pub fn new(t_final: f64) -> Self {
        EvolveConfig {
            t_final,
            safety: 0.9,
            method: Method::Euler,
            series_tol: 1e-12,
            snapshots: Vec::new(),
            dt: None,
            lambda: None,
            max_terms: 20_000_000,
        }
    }

    pub fn series(t_final: f64) -> Self {
        Self::new(t_final).with_method(Method::UniformSeries)
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_snapshots(mut self, times: impl IntoIterator<Item = f64>) -> Self {
        self.snapshots = times.into_iter().collect();
        self
    }

    /// `count + 1` equally spaced snapshots on `[0, t_final]`.
    pub fn with_uniform_snapshots(self, count: usize) -> Self {
        let t = self.t_final;
        self.with_snapshots((0..=count).map(move |k| t * k as f64 / count as f64))
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_safety(mut self, safety: f64) -> Self {
        self.safety = safety;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::config("evolve.T", format!("must be finite and >= 0, got {}", self.t_final)));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::config("evolve.safety", format!("must lie in (0, 1], got {}", self.safety)));
        }
        if !(self.series_tol > 0.0 && self.series_tol < 1.0) {
            return Err(Error::config("evolve.tol", format!("must lie in (0, 1), got {}", self.series_tol)));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::config("evolve.dt", format!("must be positive, got {dt}")));
            }
        }
        if let Some(&t) = self
            .snapshots
            .iter()
            .find(|&&t| !(t.is_finite() && t >= 0.0 && t <= self.t_final))
        {
            return Err(Error::config("evolve.snapshots", format!("time {t} outside [0, {}]", self.t_final)));
        }
        Ok(())
    }

    /// Sorted, deduplicated output times ending at `t_final`.
    pub fn output_times(&self) -> Vec<f64> {
        let mut ts = self.snapshots.clone();
        ts.push(self.t_final);
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    /// Euler step actually used for `r`, after the CFL check.
    pub fn euler_dt(&self, r: &Rates) -> Result<f64> {
        let ls = uniformization_rate(r);
        let dt = match self.dt {
            Some(dt) => dt,
            None if ls > 0.0 => self.safety / ls,
            None => self.t_final.max(1.0),
        };
        check_cfl(dt, ls)?;
        Ok(dt)
    }
}

fn check_cfl(dt: f64, lambda_star: f64) -> Result<()> {
    let product = dt * lambda_star;
    if product > 1.0 {
        return Err(Error::Cfl {
            dt,
            lambda_star,
            product,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub values: FieldVec,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub method: Method,
    /// Euler step size, or `None` for the series.
    pub dt: Option<f64>,
    /// Euler steps taken, or matrix-vector products for the series.
    pub work: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory always has a final snapshot")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }
}

/// One Euler step of the forward equation, written as the convex
/// combination `(1 - dt(a_j + b_j)) p_j + dt a_{j-1} p_{j-1} + dt b_{j+1} p_{j+1}`.
fn euler_forward_into(r: &Rates, dt: f64, p: &[f64], out: &mut [f64]) {
    let (a, b) = (r.alpha(), r.beta());
    for j in 0..r.len() {
        let mut v = (1.0 - dt * (a[j] + b[j])) * p[j];
        if let Some(l) = r.left(j) {
            v += dt * a[l] * p[l];
        }
        if let Some(k) = r.right(j) {
            v += dt * b[k] * p[k];
        }
        out[j] = v;
    }
}

/// One Euler step of the backward equation, in difference form so that
/// constants are reproduced exactly.
fn euler_backward_into(r: &Rates, dt: f64, u: &[f64], out: &mut [f64]) {
    let (a, b) = (r.alpha(), r.beta());
    for j in 0..r.len() {
        let mut d = 0.0;
        if let Some(l) = r.left(j) {
            d += b[j] * (u[l] - u[j]);
        }
        if let Some(k) = r.right(j) {
            d += a[j] * (u[k] - u[j]);
        }
        out[j] = u[j] + dt * d;
    }
}

fn euler_into(r: &Rates, dir: Direction, dt: f64, v: &[f64], out: &mut [f64]) {
    match dir {
        Direction::Forward => euler_forward_into(r, dt, v, out),
        Direction::Backward => euler_backward_into(r, dt, v, out),
    }
}

/// `p + dt L* p`; requires `dt lambda* <= 1`.
pub fn step_forward_euler(r: &Rates, p: &FieldVec, dt: f64) -> Result<FieldVec> {
    step_euler(r, p, dt, Direction::Forward)
}

/// `u + dt L u`; requires `dt lambda* <= 1`.
pub fn step_backward_euler(r: &Rates, u: &FieldVec, dt: f64) -> Result<FieldVec> {
    step_euler(r, u, dt, Direction::Backward)
}

fn step_euler(r: &Rates, v: &FieldVec, dt: f64, dir: Direction) -> Result<FieldVec> {
    check_len(r.len(), v.len())?;
    check_cfl(dt, uniformization_rate(r))?;
    let mut out = vec![0.0; r.len()];
    euler_into(r, dir, dt, v.values(), &mut out);
    Ok(FieldVec::from_parts(v.kind(), out))
}

/// Marches `v0` to every output time of `cfg`.
pub fn evolve(r: &Rates, v0: &FieldVec, cfg: &EvolveConfig, dir: Direction) -> Result<Trajectory> {
    check_len(r.len(), v0.len())?;
    cfg.validate()?;
    let kind = v0.kind();
    let times = cfg.output_times();
    let mut snapshots = Vec::with_capacity(times.len());
    let mut cur = v0.values().to_vec();
    let mut t = 0.0;
    let mut work = 0;
    let dt = match cfg.method {
        Method::Euler => {
            let dt = cfg.euler_dt(r)?;
            let mut next = vec![0.0; r.len()];
            for &target in &times {
                while t < target {
                    let rem = target - t;
                    let step = if rem <= dt * (1.0 + 1e-12) { rem } else { dt };
                    euler_into(r, dir, step, &cur, &mut next);
                    std::mem::swap(&mut cur, &mut next);
                    t = if step == rem { target } else { t + step };
                    work += 1;
                }
                snapshots.push(Snapshot {
                    t: target,
                    values: FieldVec::from_parts(kind, cur.clone()),
                });
            }
            Some(dt)
        }
        Method::UniformSeries => {
            let lambda = resolve_lambda(r, cfg.lambda)?;
            for &target in &times {
                if target > t {
                    let (v, n) = series_apply(r, &cur, target - t, lambda, cfg.series_tol, cfg.max_terms, dir)?;
                    cur = v;
                    work += n;
                    t = target;
                }
                snapshots.push(Snapshot {
                    t: target,
                    values: FieldVec::from_parts(kind, cur.clone()),
                });
            }
            None
        }
    };
    Ok(Trajectory {
        snapshots,
        method: cfg.method,
        dt,
        work,
    })
}

/// Forward equation from `p0`.
pub fn evolve_forward(r: &Rates, p0: &FieldVec, cfg: &EvolveConfig) -> Result<Trajectory> {
    evolve(r, p0, cfg, Direction::Forward)
}

/// Backward equation from `u0`, with a post-check of the maximum principle
/// `min u0 <= u(t) <= max u0`.
pub fn evolve_backward(r: &Rates, u0: &FieldVec, cfg: &EvolveConfig) -> Result<Trajectory> {
    let traj = evolve(r, u0, cfg, Direction::Backward)?;
    let lo = u0.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = u0.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-12 * lo.abs().max(hi.abs()).max(1e-300);
    for s in &traj.snapshots {
        if let Some(j) = s.values.values().iter().position(|&v| v < lo - slack || v > hi + slack) {
            return Err(Error::Internal(format!(
                "maximum principle violated at t = {}, node {j}: {} outside [{lo}, {hi}]",
                s.t,
                s.values[j]
            )));
        }
    }
    Ok(traj)
}

/// Row `p_T(i, .)` of the transition function.
pub fn green_function(r: &Rates, i: usize, t: f64, cfg: &EvolveConfig) -> Result<FieldVec> {
    let delta = FieldVec::delta(r.len(), i)?;
    let mut c = cfg.clone();
    c.t_final = t;
    c.snapshots.clear();
    let traj = evolve_forward(r, &delta, &c)?;
    Ok(traj.last().values.clone())
}

fn resolve_lambda(r: &Rates, lambda: Option<f64>) -> Result<f64> {
    let ls = uniformization_rate(r);
    match lambda {
        None => Ok(if ls > 0.0 { ls } else { 1.0 }),
        Some(l) if l >= ls && l > 0.0 => Ok(l),
        Some(l) => Err(Error::RateTooSmall {
            lambda: l,
            lambda_star: ls,
        }),
    }
}

/// Poisson(`mean`) probabilities on the index window `[first, first + w.len())`,
/// built outward from the mode and normalized over the window. Weights below
/// `cut` relative to the mode are dropped. The window extends at least to
/// `mean + 10 sqrt(mean) + 20`.
pub fn poisson_weights(mean: f64, cut: f64) -> (usize, Vec<f64>) {
    if mean <= 0.0 {
        return (0, vec![1.0]);
    }
    let mode = mean.floor() as usize;
    let mut left = Vec::new();
    let mut w = 1.0;
    let mut k = mode;
    while k > 0 {
        w *= k as f64 / mean;
        if w < cut {
            break;
        }
        left.push(w);
        k -= 1;
    }
    let first = mode - left.len();
    let min_last = (mean + 10.0 * mean.sqrt() + 20.0).ceil() as usize;
    let mut right = vec![1.0];
    let mut w = 1.0;
    let mut k = mode;
    loop {
        w *= mean / (k + 1) as f64;
        k += 1;
        if w < cut && k > min_last {
            break;
        }
        right.push(w);
    }
    left.reverse();
    left.extend(right);
    let total: f64 = left.iter().sum();
    left.iter_mut().for_each(|x| *x /= total);
    (first, left)
}

/// `e^{tL*} v` (forward) or `e^{tL} v` (backward) as the Poisson mixture
/// `sum_n w_n P^n v` with `P = I + Q / lambda`. Returns the result and the
/// number of `P` applications.
fn series_apply(
    r: &Rates,
    v0: &[f64],
    t: f64,
    lambda: f64,
    tol: f64,
    max_terms: usize,
    dir: Direction,
) -> Result<(Vec<f64>, usize)> {
    let mean = lambda * t;
    if mean == 0.0 {
        return Ok((v0.to_vec(), 0));
    }
    let required = (mean + 10.0 * mean.sqrt() + 20.0).ceil() as usize;
    if required > max_terms {
        return Err(Error::SeriesTooLong {
            required,
            limit: max_terms,
            lambda_t: mean,
        });
    }
    let (first, w) = poisson_weights(mean, tol * 1e-3);
    let last = first + w.len() - 1;
    if last > max_terms {
        return Err(Error::SeriesTooLong {
            required: last,
            limit: max_terms,
            lambda_t: mean,
        });
    }
    let step = 1.0 / lambda;
    let mut cur = v0.to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut acc = vec![0.0; cur.len()];
    for n in 0..=last {
        if n >= first {
            let wn = w[n - first];
            for (a, c) in acc.iter_mut().zip(&cur) {
                *a += wn * c;
            }
        }
        if n < last {
            euler_into(r, dir, step, &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
    }
    Ok((acc, last))
}

/// Uniformization series evaluation of `e^{tL*} p0` (or `e^{tL} u0`).
pub fn uniformization_series(
    r: &Rates,
    v0: &FieldVec,
    t: f64,
    lambda: Option<f64>,
    tol: f64,
    dir: Direction,
) -> Result<FieldVec> {
    check_len(r.len(), v0.len())?;
    let lambda = resolve_lambda(r, lambda)?;
    let (v, _) = series_apply(r, v0.values(), t, lambda, tol, usize::MAX, dir)?;
    Ok(FieldVec::from_parts(v0.kind(), v))
}
