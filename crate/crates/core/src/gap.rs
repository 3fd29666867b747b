//! Discrete Hardy constants, Poincare lower bounds and exact spectral gaps.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::scheme::{Boundary, Rates};
use crate::stationary::StationaryResult;

/// Weights for the two-sided discrete Hardy inequality. Entry `i` of each
/// vector sits at signed index `k = i - origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct HardyInput {
    theta: Vec<f64>,
    mu: Vec<f64>,
    origin: usize,
}

impl HardyInput {
    pub fn new(theta: Vec<f64>, mu: Vec<f64>, origin: usize) -> Result<Self> {
        check_len(theta.len(), mu.len())?;
        if origin > theta.len() {
            return Err(Error::Precondition(format!(
                "origin {origin} beyond index range of length {}",
                theta.len()
            )));
        }
        if let Some(i) = theta.iter().position(|&t| !(t >= 0.0 && t.is_finite())) {
            return Err(Error::Precondition(format!("theta[{i}] = {} is not a finite nonnegative value", theta[i])));
        }
        if let Some(i) = mu.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::Precondition(format!("mu[{i}] = {} is not positive", mu[i])));
        }
        Ok(HardyInput { theta, mu, origin })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// `B = max( sup_{j>=0} (sum_{k=0}^{j} 1/mu_k) (sum_{k>=j} theta_k),
///           sup_{j<=-1} (sum_{k=j}^{-1} 1/mu_k) (sum_{k<=j} theta_k) )`,
/// in O(N) via prefix and suffix sums.
pub fn hardy_b(hi: &HardyInput) -> f64 {
    let (theta, mu, o, n) = (&hi.theta, &hi.mu, hi.origin, hi.len());
    let mut best: f64 = 0.0;

    let mut tail = vec![0.0; n + 1];
    for i in (o..n).rev() {
        tail[i] = tail[i + 1] + theta[i];
    }
    let mut gamma = 0.0;
    for i in o..n {
        gamma += 1.0 / mu[i];
        best = best.max(gamma * tail[i]);
    }

    let mut head = vec![0.0; o];
    let mut acc = 0.0;
    for i in 0..o {
        acc += theta[i];
        head[i] = acc;
    }
    let mut gamma = 0.0;
    for i in (0..o).rev() {
        gamma += 1.0 / mu[i];
        best = best.max(gamma * head[i]);
    }
    best
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WitnessScan {
    /// Largest product `(sum_{j>=M} theta)(sum_{k=0}^{M} 1/mu)` over both branches.
    pub max: f64,
    /// Signed index `M` at which it is attained.
    pub argmax: i64,
    /// Largest full Hardy quotient over the witness sequences `f = 1/mu` on `[0, M]` (or `[-M, -1]`).
    pub functional_max: f64,
}

/// Scans the indicator-type witnesses `f_i = 1/mu_i` on `[0, M]` and on `[-M, -1]`.
pub fn witness_scan(hi: &HardyInput) -> WitnessScan {
    let (theta, mu, o, n) = (&hi.theta, &hi.mu, hi.origin, hi.len());
    let mut best = WitnessScan {
        max: 0.0,
        argmax: 0,
        functional_max: 0.0,
    };
    let mut f = vec![0.0; n];
    for m in o..n {
        let inv: f64 = (o..=m).map(|k| 1.0 / mu[k]).sum();
        let mass: f64 = theta[m..].iter().sum();
        let q = inv * mass;
        if q > best.max {
            best.max = q;
            best.argmax = m as i64 - o as i64;
        }
        f.iter_mut().enumerate().for_each(|(i, v)| *v = if i >= o && i <= m { 1.0 / mu[i] } else { 0.0 });
        best.functional_max = best.functional_max.max(hardy_functional(hi, &f));
    }
    for m in (0..o).rev() {
        let inv: f64 = (m..o).map(|k| 1.0 / mu[k]).sum();
        let mass: f64 = theta[..=m].iter().sum();
        let q = inv * mass;
        if q > best.max {
            best.max = q;
            best.argmax = m as i64 - o as i64;
        }
        f.iter_mut().enumerate().for_each(|(i, v)| *v = if i >= m && i < o { 1.0 / mu[i] } else { 0.0 });
        best.functional_max = best.functional_max.max(hardy_functional(hi, &f));
    }
    best
}

/// The Hardy quotient
/// `max(sum_{j>=0} theta_j (sum_{k=0}^{j} f_k)^2, sum_{j<=-1} theta_j (sum_{k=j}^{-1} f_k)^2) / sum mu f^2`,
/// whose supremum over `f` is the constant `A` with `B <= A <= 4B`.
pub fn hardy_functional(hi: &HardyInput, f: &[f64]) -> f64 {
    let (theta, mu, o, n) = (&hi.theta, &hi.mu, hi.origin, hi.len());
    let norm: f64 = mu.iter().zip(f).map(|(m, v)| m * v * v).sum();
    if norm == 0.0 {
        return 0.0;
    }
    let mut right = 0.0;
    let mut partial = 0.0;
    for j in o..n {
        partial += f[j];
        right += theta[j] * partial * partial;
    }
    let mut left = 0.0;
    let mut partial = 0.0;
    for j in (0..o).rev() {
        partial += f[j];
        left += theta[j] * partial * partial;
    }
    right.max(left) / norm
}

/// Hardy weights of the Poincare lemma on the line: edges `i = 0..N-2` at
/// signed index `k = i - o`, `mu_k = alpha_{o+k} pi_{o+k}`, `theta_k =
/// pi_{o+k+1}` for `k >= 0` and `pi_{o+k}` for `k <= -1`.
pub fn line_hardy_input(r: &Rates, s: &StationaryResult) -> Result<HardyInput> {
    if r.boundary() != Boundary::Reflecting {
        return Err(Error::Precondition("line Hardy weights need reflecting rates".into()));
    }
    check_len(r.len(), s.pi.len())?;
    let (a, p, o) = (r.alpha(), s.values(), r.origin());
    let edges = r.len() - 1;
    let mu: Vec<f64> = (0..edges).map(|i| a[i] * p[i]).collect();
    let theta: Vec<f64> = (0..edges).map(|i| if i >= o { p[i + 1] } else { p[i] }).collect();
    HardyInput::new(theta, mu, o.min(edges))
}

/// `B` in the lemma's displayed form: `alpha` on the right branch and `beta`
/// on the left, indexed by nodes.
fn displayed_b(r: &Rates, p: &[f64]) -> f64 {
    let (a, b, o, n) = (r.alpha(), r.beta(), r.origin(), r.len());
    let mut best: f64 = 0.0;
    let mut tail = vec![0.0; n + 1];
    for k in (0..n).rev() {
        tail[k] = tail[k + 1] + p[k];
    }
    let mut gamma = 0.0;
    for j in o..n - 1 {
        gamma += 1.0 / (a[j] * p[j]);
        best = best.max(gamma * tail[j + 1]);
    }
    let mut gamma = 0.0;
    let mut head = 0.0;
    let heads: Vec<f64> = p
        .iter()
        .map(|v| {
            head += v;
            head
        })
        .collect();
    for j in (1..=o).rev() {
        gamma += 1.0 / (b[j] * p[j]);
        best = best.max(gamma * heads[j - 1]);
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct LineBound {
    #[serde(rename = "B")]
    pub b: f64,
    /// `1 / (8B)`.
    pub kappa_lower: f64,
    pub witness: WitnessScan,
    /// Relative difference between the two equivalent forms of `B`.
    pub form_discrepancy: f64,
}

/// Poincare lower bound `kappa >= 1/(8B)` on the line.
///
/// `B` is computed from the lemma's `theta`/`mu` weights and, independently,
/// from its displayed `alpha`/`beta` form. Disagreement beyond `1e-9`
/// relative is an error.
pub fn poincare_bound_line(r: &Rates, s: &StationaryResult) -> Result<LineBound> {
    let hi = line_hardy_input(r, s)?;
    let b = hardy_b(&hi);
    let b2 = displayed_b(r, s.values());
    let form_discrepancy = if b == 0.0 && b2 == 0.0 { 0.0 } else { (b - b2).abs() / b.max(b2) };
    if form_discrepancy > 1e-9 {
        return Err(Error::Internal(format!(
            "Hardy constant forms disagree: {b} vs {b2} (relative {form_discrepancy})"
        )));
    }
    Ok(LineBound {
        b,
        kappa_lower: if b > 0.0 { 1.0 / (8.0 * b) } else { f64::INFINITY },
        witness: witness_scan(&hi),
        form_discrepancy,
    })
}

/// Dirichlet-form weights on the torus, `w_j = (beta_{j+1} pi_{j+1} + alpha_j pi_j) / 2`
/// for the edge `(j, j+1 mod N)`.
pub fn torus_edge_weights(r: &Rates, pi: &[f64]) -> Vec<f64> {
    let (a, b, n) = (r.alpha(), r.beta(), r.len());
    (0..n)
        .map(|j| {
            let k = (j + 1) % n;
            0.5 * (b[k] * pi[k] + a[j] * pi[j])
        })
        .collect()
}

/// Spectral gap in `l2(pi^h)`.
///
/// On the line this is the second-smallest eigenvalue of the symmetric
/// tridiagonal matrix `-D^{1/2} Q D^{-1/2}` (`D = diag(pi)`), found by Sturm
/// bisection to `1e-12` relative. On the torus it is the gap of the
/// symmetrized Dirichlet form with weights [`torus_edge_weights`], via a dense
/// symmetric eigensolve.
pub fn exact_gap(r: &Rates, s: &StationaryResult) -> Result<f64> {
    check_len(r.len(), s.pi.len())?;
    let (a, b, n) = (r.alpha(), r.beta(), r.len());
    match r.boundary() {
        Boundary::Reflecting => {
            let diag: Vec<f64> = (0..n).map(|j| a[j] + b[j]).collect();
            let off: Vec<f64> = (0..n - 1).map(|j| (a[j] * b[j + 1]).sqrt()).collect();
            tridiagonal_eigenvalue(&diag, &off, 1, 1e-12)
        }
        Boundary::Periodic => {
            let p = s.values();
            let w = torus_edge_weights(r, p);
            let mut m = DMatrix::<f64>::zeros(n, n);
            for j in 0..n {
                let k = (j + 1) % n;
                let c = w[j] / (p[j] * p[k]).sqrt();
                m[(j, j)] += w[j] / p[j];
                m[(k, k)] += w[j] / p[k];
                m[(j, k)] -= c;
                m[(k, j)] -= c;
            }
            let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().cloned().collect();
            ev.sort_by(f64::total_cmp);
            Ok(ev[1])
        }
    }
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix
/// (Sturm sequence via the LDL^T pivots).
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let e2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
        q = diag[i] - x - if i > 0 { e2 / q } else { 0.0 };
        if q == 0.0 {
            q = -f64::EPSILON * (x.abs() + diag[i].abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (0-based) of a symmetric tridiagonal matrix by bisection.
pub fn tridiagonal_eigenvalue(diag: &[f64], off: &[f64], k: usize, rel_tol: f64) -> Result<f64> {
    let n = diag.len();
    if k >= n || off.len() + 1 != n {
        return Err(Error::Precondition(format!(
            "eigenvalue {k} of a {n}x{n} tridiagonal matrix with {} off-diagonals",
            off.len()
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let scale = lo.abs().max(hi.abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= rel_tol * mid.abs().max(f64::EPSILON * scale) {
            return Ok(mid);
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::Numerical("bisection for tridiagonal eigenvalue did not converge".into()))
}

/// Explicit torus Poincare constant
/// `kappa_1 = 1 / max_{1<=k<=N-1} sum_{j=k}^{N-1} 2 j pi_j / (beta_k pi_k + alpha_{k-1} pi_{k-1})`.
pub fn poincare_bound_torus(r: &Rates, s: &StationaryResult) -> Result<f64> {
    if r.boundary() != Boundary::Periodic {
        return Err(Error::Precondition("torus Poincare bound needs periodic rates".into()));
    }
    check_len(r.len(), s.pi.len())?;
    let (a, b, p, n) = (r.alpha(), r.beta(), s.values(), r.len());
    let mut tail = vec![0.0; n + 1];
    for j in (1..n).rev() {
        tail[j] = tail[j + 1] + 2.0 * j as f64 * p[j];
    }
    let worst = (1..n)
        .map(|k| tail[k] / (b[k] * p[k] + a[k - 1] * p[k - 1]))
        .fold(0.0, f64::max);
    Ok(1.0 / worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// `1/(8B)` on the line, `kappa_1` on the torus.
    pub kappa_lower: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_max: Option<f64>,
    pub exact_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub torus_kappa: Option<f64>,
    pub h: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

pub fn gap_report(r: &Rates, s: &StationaryResult) -> Result<GapReport> {
    let exact = exact_gap(r, s)?;
    Ok(match r.boundary() {
        Boundary::Reflecting => {
            let lb = poincare_bound_line(r, s)?;
            GapReport {
                b: Some(lb.b),
                kappa_lower: lb.kappa_lower,
                witness_max: Some(lb.witness.max),
                exact_gap: exact,
                torus_kappa: None,
                h: r.h(),
                n: r.len(),
            }
        }
        Boundary::Periodic => {
            let k1 = poincare_bound_torus(r, s)?;
            GapReport {
                b: None,
                kappa_lower: k1,
                witness_max: None,
                exact_gap: exact,
                torus_kappa: Some(k1),
                h: r.h(),
                n: r.len(),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{split_drift, Domain, Grid, Preset, Problem};
    use crate::scheme::build_rates;
    use crate::stationary::stationary;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn rates_for(p: &Problem, g: &Grid) -> Rates {
        build_rates(p, g, &split_drift(p, g).unwrap()).unwrap()
    }

    fn brute_b(hi: &HardyInput) -> f64 {
        let (t, m, o, n) = (hi.theta(), hi.mu(), hi.origin(), hi.len());
        let mut best: f64 = 0.0;
        for j in o..n {
            let g: f64 = (o..=j).map(|k| 1.0 / m[k]).sum();
            let s: f64 = (j..n).map(|k| t[k]).sum();
            best = best.max(g * s);
        }
        for j in 0..o {
            let g: f64 = (j..o).map(|k| 1.0 / m[k]).sum();
            let s: f64 = (0..=j).map(|k| t[k]).sum();
            best = best.max(g * s);
        }
        best
    }

    #[test]
    fn small_examples() {
        // mu = 1, theta = indicator of index 1: the j = 0 and j = 1 terms both give 1 * 1 and 2 * 1.
        let hi = HardyInput::new(vec![0.0, 1.0, 0.0], vec![1.0; 3], 0).unwrap();
        assert_eq!(hardy_b(&hi), 2.0);
        let hi = HardyInput::new(vec![0.0, 0.0, 1.0, 2.0], vec![1.0; 4], 2).unwrap();
        // Left branch carries no theta; right branch: j = 2 gives 1 * 3, j = 3 gives 2 * 2.
        assert_eq!(hardy_b(&hi), 4.0);
        let zero = HardyInput::new(vec![0.0; 5], vec![1.0; 5], 2).unwrap();
        assert_eq!(hardy_b(&zero), 0.0);
        assert!(HardyInput::new(vec![1.0], vec![0.0], 0).is_err());
    }

    #[test]
    fn matches_brute_force_and_witness() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = 50;
            let theta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let mu: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..2.0)).collect();
            let hi = HardyInput::new(theta, mu, rng.random_range(0..=n)).unwrap();
            let b = hardy_b(&hi);
            assert!((b - brute_b(&hi)).abs() <= 1e-12 * b);
            let w = witness_scan(&hi);
            assert!(w.max >= b * (1.0 - 1e-12) && w.max <= 4.0 * b);
            assert!(w.functional_max >= w.max * (1.0 - 1e-12) && w.functional_max <= 4.0 * b);
            for _ in 0..100 {
                let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                assert!(hardy_functional(&hi, &f) <= 4.0 * b);
            }
        }
    }

    #[test]
    fn concentrated_theta_witness_is_exact() {
        let mut theta = vec![0.0; 30];
        theta[27] = 0.3;
        let hi = HardyInput::new(theta, vec![0.5; 30], 10).unwrap();
        let w = witness_scan(&hi);
        assert_eq!(w.max, hardy_b(&hi));
        assert_eq!(w.argmax, 17);
    }

    #[test]
    fn two_state_gap() {
        let r = Rates::new(vec![0.7, 0.0], vec![0.0, 1.9], Boundary::Reflecting, 1.0).unwrap();
        let s = stationary(&r).unwrap();
        assert!((exact_gap(&r, &s).unwrap() - 2.6).abs() < 1e-11);
    }

    #[test]
    fn sturm_matches_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = 40;
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let e: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                d[i]
            } else if i + 1 == j {
                e[i]
            } else if j + 1 == i {
                e[j]
            } else {
                0.0
            }
        });
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        for k in [0, 1, 17, n - 1] {
            let v = tridiagonal_eigenvalue(&d, &e, k, 1e-13).unwrap();
            assert!((v - ev[k]).abs() < 1e-10 * ev[k].abs().max(1.0));
        }
    }

    #[test]
    fn ou_gap_and_bound() {
        let mut kappas = Vec::new();
        for n in [61, 121, 241] {
            let g = Grid::line(-6.0, 6.0, n).unwrap();
            let r = rates_for(&Preset::Ou.problem(), &g);
            let s = stationary(&r).unwrap();
            let rep = gap_report(&r, &s).unwrap();
            assert!(rep.kappa_lower <= rep.exact_gap);
            let lb = poincare_bound_line(&r, &s).unwrap();
            assert!(lb.form_discrepancy < 1e-12);
            kappas.push(rep.kappa_lower);
            if n == 241 {
                assert!((rep.exact_gap - 1.0).abs() < 0.05, "{}", rep.exact_gap);
            }
        }
        assert!(kappas.iter().all(|&k| k >= 0.5 * kappas[0]));
    }

    #[test]
    fn random_walk_bound_shrinks_with_window() {
        let mut prev = f64::INFINITY;
        for w in [2.0, 4.0, 8.0] {
            let p = Preset::PureDiffusion.problem().with_domain(Domain::Line { x_min: -w / 2.0, x_max: w / 2.0 }).unwrap();
            let g = Grid::line(-w / 2.0, w / 2.0, (20.0 * w) as usize + 1).unwrap();
            let r = rates_for(&p, &g);
            let s = stationary(&r).unwrap();
            let rep = gap_report(&r, &s).unwrap();
            // Discrete Neumann Laplacian on N nodes: (2/h^2)(1 - cos(pi/N)) ~ pi^2 sigma^2 / (2 W^2).
            let nn = g.len() as f64;
            let neumann = 2.0 / (g.h() * g.h()) * (1.0 - (PI / nn).cos());
            assert!((rep.exact_gap - neumann).abs() < 1e-9 * neumann);
            assert!((rep.exact_gap - PI * PI / (w * w)).abs() < 0.1 * rep.exact_gap);
            assert!(rep.kappa_lower < prev && rep.kappa_lower <= rep.exact_gap);
            prev = rep.kappa_lower;
        }
    }

    #[test]
    fn torus_kappa_cases() {
        let r = Rates::new(vec![1.0; 3], vec![1.0; 3], Boundary::Periodic, 1.0).unwrap();
        let s = stationary(&r).unwrap();
        assert!((poincare_bound_torus(&r, &s).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        let c = 2.5;
        let mut bracket = Vec::new();
        for n in [16usize, 32, 64] {
            let r = Rates::new(vec![c; n], vec![c; n], Boundary::Periodic, 1.0).unwrap();
            let s = stationary(&r).unwrap();
            let k = poincare_bound_torus(&r, &s).unwrap();
            assert!((k - 2.0 * c / (n * (n - 1)) as f64).abs() < 1e-12 * k);
            bracket.push(k * (n * n) as f64 / c);
            assert!(k <= exact_gap(&r, &s).unwrap());
        }
        assert!(bracket.iter().all(|&b| b > 2.0 && b < 2.2), "{bracket:?}");

        let g = Grid::torus(2.0 * PI, 64).unwrap();
        let r = rates_for(&Preset::TorusSin.problem(), &g);
        let s = stationary(&r).unwrap();
        let rep = gap_report(&r, &s).unwrap();
        assert!(rep.torus_kappa.unwrap() <= rep.exact_gap);
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json.get("torus_kappa").is_some() && json.get("B").is_none());
    }
}
