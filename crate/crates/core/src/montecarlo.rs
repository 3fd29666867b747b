//! Uniformization Monte Carlo: each sample draws a Poisson number of jump
//! epochs and walks the embedded discrete chain `P = I + Q / lambda`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::field::{FieldKind, FieldVec};
use crate::scheme::{uniformization_rate, Rates};

#[derive(Debug, Clone)]
pub struct McConfig {
    pub t: f64,
    pub m: u64,
    /// Added to `max(alpha + beta)` to get the clock rate.
    pub lambda_pad: f64,
    pub seed: u64,
    pub p0: FieldVec,
    /// `l1` mass of the initial density; scales `rho_tilde`.
    pub mass: f64,
}

impl McConfig {
    pub fn new(t: f64, m: u64, seed: u64, p0: FieldVec) -> Self {
        McConfig {
            t,
            m,
            lambda_pad: 10.0,
            seed,
            p0,
            mass: 1.0,
        }
    }

    pub fn with_lambda_pad(mut self, pad: f64) -> Self {
        self.lambda_pad = pad;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(Error::config("mc.T", format!("must be finite and >= 0, got {}", self.t)));
        }
        if self.m == 0 {
            return Err(Error::config("mc.M", "must be at least 1"));
        }
        if !(self.lambda_pad.is_finite() && self.lambda_pad >= 0.0) {
            return Err(Error::config("mc.lambda_pad", format!("must be finite and >= 0, got {}", self.lambda_pad)));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::config("mc.mass", format!("must be positive, got {}", self.mass)));
        }
        if self.p0.kind() != FieldKind::Probability {
            return Err(Error::config("mc.p0", "initial law must be a probability vector"));
        }
        Ok(())
    }

    pub fn lambda(&self, r: &Rates) -> f64 {
        uniformization_rate(r) + self.lambda_pad
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct McResult {
    pub t: f64,
    pub counts: Vec<u64>,
    pub p_tilde: Vec<f64>,
    pub rho_tilde: Vec<f64>,
    /// `sqrt(p (1 - p) / M)` per node.
    pub stderr: Vec<f64>,
    #[serde(rename = "M")]
    pub m: u64,
    pub lambda: f64,
    pub seed: u64,
}

impl McResult {
    fn from_counts(t: f64, counts: Vec<u64>, cfg: &McConfig, lambda: f64, h: f64) -> Self {
        let m = cfg.m as f64;
        let p_tilde: Vec<f64> = counts.iter().map(|&c| c as f64 / m).collect();
        McResult {
            t,
            rho_tilde: p_tilde.iter().map(|p| cfg.mass * p / h).collect(),
            stderr: p_tilde.iter().map(|p| (p * (1.0 - p) / m).sqrt()).collect(),
            p_tilde,
            counts,
            m: cfg.m,
            lambda,
            seed: cfg.seed,
        }
    }

    /// `sqrt(sum p (1 - p) / M)`, the scale of the `l1` sampling error.
    pub fn sampling_band(&self) -> f64 {
        (self.p_tilde.iter().map(|p| p * (1.0 - p)).sum::<f64>() / self.m as f64).sqrt()
    }

    /// `sum sqrt(p (1 - p) / M)`, which bounds the expected `l1` sampling error.
    pub fn l1_band(&self) -> f64 {
        self.stderr.iter().sum()
    }
}

/// One row of the embedded chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddedRow {
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub p_left: f64,
    pub p_stay: f64,
    pub p_right: f64,
}

pub fn embedded_transition(r: &Rates, lambda: f64, j: usize) -> Result<EmbeddedRow> {
    let lambda_star = uniformization_rate(r);
    if lambda.is_nan() || lambda < lambda_star {
        return Err(Error::RateTooSmall { lambda, lambda_star });
    }
    if j >= r.len() {
        return Err(Error::Precondition(format!("node {j} outside a grid of {}", r.len())));
    }
    let p_left = r.beta()[j] / lambda;
    let p_right = r.alpha()[j] / lambda;
    Ok(EmbeddedRow {
        left: r.left(j),
        right: r.right(j),
        p_left,
        p_right,
        p_stay: 1.0 - (p_left + p_right),
    })
}

/// Exact Poisson draw; a nonpositive mean gives 0.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean.is_nan() || mean <= 0.0 {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(d) => d.sample(rng) as u64,
        Err(_) => 0,
    }
}

/// Flattened embedded chain for the hot loop.
struct Walker {
    down: Vec<f64>,
    moves: Vec<f64>,
    left: Vec<usize>,
    right: Vec<usize>,
    cdf0: Vec<f64>,
}

impl Walker {
    fn new(r: &Rates, lambda: f64, p0: &[f64]) -> Result<Self> {
        let n = r.len();
        let mut w = Walker {
            down: Vec::with_capacity(n),
            moves: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            cdf0: Vec::with_capacity(n),
        };
        for j in 0..n {
            let row = embedded_transition(r, lambda, j)?;
            w.down.push(row.p_left);
            w.moves.push(row.p_left + row.p_right);
            w.left.push(row.left.unwrap_or(j));
            w.right.push(row.right.unwrap_or(j));
        }
        let mut acc = 0.0;
        for &p in p0 {
            acc += p;
            w.cdf0.push(acc);
        }
        Ok(w)
    }

    fn initial(&self, rng: &mut ChaCha8Rng) -> usize {
        let u = rng.random::<f64>() * self.cdf0[self.cdf0.len() - 1];
        self.cdf0.partition_point(|&c| c <= u).min(self.cdf0.len() - 1)
    }

    fn walk(&self, mut j: usize, steps: u64, rng: &mut ChaCha8Rng) -> usize {
        for _ in 0..steps {
            let u = rng.random::<f64>();
            if u < self.down[j] {
                j = self.left[j];
            } else if u < self.moves[j] {
                j = self.right[j];
            }
        }
        j
    }
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn run_mc(r: &Rates, cfg: &McConfig) -> Result<McResult> {
    Ok(run_mc_times(r, cfg, &[cfg.t])?.remove(0))
}

/// One set of walks recorded at every time in `times` (nondecreasing).
/// Between recording times each walk takes an independent Poisson number of
/// steps, so the law at each time is that of a separate run to that time.
pub fn run_mc_times(r: &Rates, cfg: &McConfig, times: &[f64]) -> Result<Vec<McResult>> {
    cfg.validate()?;
    check_len(r.len(), cfg.p0.len())?;
    if times.is_empty() {
        return Err(Error::config("mc.T", "no recording times"));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("mc.T", "recording times must be finite, >= 0 and nondecreasing"));
    }
    let lambda = cfg.lambda(r);
    let walker = Walker::new(r, lambda, cfg.p0.values())?;
    let n = r.len();
    let k = times.len();
    let increments: Vec<f64> = times
        .iter()
        .scan(0.0, |prev, &t| {
            let d = lambda * (t - *prev);
            *prev = t;
            Some(d)
        })
        .collect();

    let counts = (0..cfg.m)
        .into_par_iter()
        .fold(
            || vec![0u64; n * k],
            |mut acc, i| {
                let mut rng = sample_rng(cfg.seed, i);
                let mut j = walker.initial(&mut rng);
                for (slot, &mean) in increments.iter().enumerate() {
                    let steps = sample_poisson(mean, &mut rng);
                    j = walker.walk(j, steps, &mut rng);
                    acc[slot * n + j] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; n * k],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let results: Vec<McResult> = times
        .iter()
        .enumerate()
        .map(|(slot, &t)| McResult::from_counts(t, counts[slot * n..(slot + 1) * n].to_vec(), cfg, lambda, r.h()))
        .collect();
    for res in &results {
        let total: u64 = res.counts.iter().sum();
        if total != cfg.m {
            return Err(Error::Internal(format!("histogram holds {total} samples, expected {}", cfg.m)));
        }
    }
    Ok(results)
}
