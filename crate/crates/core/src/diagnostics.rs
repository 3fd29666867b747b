//! Norms, functionals, error metrics and fits, plus the CSV/JSON writers
//! shared by the command-line experiments.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::field::{FieldKind, FieldVec};
use crate::gap::torus_edge_weights;
use crate::model::Grid;
use crate::scheme::{Boundary, Rates};

/// `h sum |v|`.
pub fn l1(v: &[f64], h: f64) -> f64 {
    h * v.iter().map(|x| x.abs()).sum::<f64>()
}

/// `sqrt(h sum v^2)`.
pub fn l2(v: &[f64], h: f64) -> f64 {
    (h * v.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

pub fn linf(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// `(sum w |v|^p)^{1/p}` without the grid factor; `p = inf` gives the max of `|v|`.
pub fn weighted_lp(v: &[f64], w: &[f64], p: f64) -> Result<f64> {
    check_len(v.len(), w.len())?;
    if p.is_infinite() {
        return Ok(linf(v));
    }
    if p.is_nan() || p < 1.0 {
        return Err(Error::Precondition(format!("l^p needs p >= 1, got {p}")));
    }
    Ok(v.iter().zip(w).map(|(x, wi)| wi * x.abs().powf(p)).sum::<f64>().powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// Grid norms with the `h` factor.
pub fn norms(v: &FieldVec, h: f64) -> Norms {
    Norms {
        l1: l1(v.values(), h),
        l2: l2(v.values(), h),
        linf: linf(v.values()),
    }
}

/// Total variation distance under both common conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvDistance {
    /// `sum |p - q|`.
    pub sum_abs: f64,
    /// `1/2 sum |p - q|`.
    pub half_sum_abs: f64,
}

pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<TvDistance> {
    check_len(p.len(), q.len())?;
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    Ok(TvDistance {
        sum_abs: s,
        half_sum_abs: 0.5 * s,
    })
}

/// `sum |v_{j+1} - v_j|`, including the wrap-around edge on the torus.
pub fn tv_seminorm(v: &[f64], boundary: Boundary) -> f64 {
    let n = v.len();
    let mut s: f64 = v.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    if boundary == Boundary::Periodic && n > 1 {
        s += (v[0] - v[n - 1]).abs();
    }
    s
}

/// Pointwise samples `f(x_j)` as a density.
pub fn restrict(f: impl Fn(f64) -> f64, grid: &Grid) -> Result<FieldVec> {
    FieldVec::new(FieldKind::Density, grid.nodes().iter().map(|&x| f(x)).collect())
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_order(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Precondition("order fit needs at least two points".into()));
    }
    if let Some(&(h, e)) = points.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0)) {
        return Err(Error::Precondition(format!("order fit needs positive (h, e), got ({h}, {e})")));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
    Ok(slope(&xy))
}

fn slope(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Exponential decay rate `-d log F / dt`, fitted over the samples with
/// `1e-12 F(0) <= F <= 0.5 F(0)`. Returns 0 when fewer than two samples fall
/// in that window.
pub fn fit_decay(series: &[(f64, f64)]) -> f64 {
    let Some(&(_, f0)) = series.first() else {
        return 0.0;
    };
    if f0.is_nan() || f0 <= 0.0 {
        return 0.0;
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(_, f)| *f >= 1e-12 * f0 && *f <= 0.5 * f0)
        .map(|&(t, f)| (t, f.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    -slope(&pts)
}

/// `q = p / pi`.
pub fn density_ratio(p: &[f64], pi: &[f64]) -> Result<Vec<f64>> {
    check_len(p.len(), pi.len())?;
    Ok(p.iter().zip(pi).map(|(a, b)| a / b).collect())
}

/// `F_h = 1/2 sum pi (q - sum pi q)^2` with `q = p / pi`.
pub fn chi2(p: &[f64], pi: &[f64]) -> Result<f64> {
    let q = density_ratio(p, pi)?;
    let mean: f64 = pi.iter().zip(&q).map(|(a, b)| a * b).sum();
    Ok(0.5 * pi.iter().zip(&q).map(|(w, v)| w * (v - mean) * (v - mean)).sum::<f64>())
}

/// Dissipation `D_h` of the ratio `q`: `sum alpha_j pi_j (q_{j+1} - q_j)^2`
/// on the line, the symmetrized cyclic form on the torus.
pub fn dissipation(r: &Rates, pi: &[f64], q: &[f64]) -> Result<f64> {
    check_len(r.len(), pi.len())?;
    check_len(r.len(), q.len())?;
    let n = r.len();
    Ok(match r.boundary() {
        Boundary::Reflecting => (0..n - 1)
            .map(|j| r.alpha()[j] * pi[j] * (q[j + 1] - q[j]).powi(2))
            .sum(),
        Boundary::Periodic => torus_edge_weights(r, pi)
            .iter()
            .enumerate()
            .map(|(j, w)| w * (q[(j + 1) % n] - q[j]).powi(2))
            .sum(),
    })
}

/// `sum p log(p / pi)`, with `0 log 0 = 0`.
pub fn relative_entropy(p: &[f64], pi: &[f64]) -> Result<f64> {
    check_len(p.len(), pi.len())?;
    Ok(p
        .iter()
        .zip(pi)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum::<f64>()
        .max(0.0))
}

/// `||q - 1||` in `l^p(pi)`.
pub fn ratio_error(p: &[f64], pi: &[f64], power: f64) -> Result<f64> {
    let q = density_ratio(p, pi)?;
    let d: Vec<f64> = q.iter().map(|v| v - 1.0).collect();
    weighted_lp(&d, pi, power)
}

/// Per-snapshot diagnostics of a forward solution.
#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    pub t: f64,
    pub mass: f64,
    pub positivity_min: f64,
    pub tv_seminorm: f64,
    /// `sum |p - p_ref|` (the `h`-weighted `l1` distance of the densities).
    pub l1_error: f64,
    pub l2_pi_error: f64,
    #[serde(rename = "F_h")]
    pub f_h: f64,
    #[serde(rename = "D_h")]
    pub d_h: f64,
    pub relative_entropy: f64,
    pub decay_rate: Option<f64>,
}

impl Metrics {
    /// Diagnostics of a probability vector `p` at time `t` against `pi`;
    /// `reference` defaults to `pi`. The TV seminorm is taken of the density `p/h`.
    pub fn compute(r: &Rates, pi: &[f64], t: f64, p: &[f64], reference: Option<&[f64]>) -> Result<Metrics> {
        check_len(r.len(), p.len())?;
        let reference = reference.unwrap_or(pi);
        check_len(p.len(), reference.len())?;
        let q = density_ratio(p, pi)?;
        let h = r.h();
        let rho: Vec<f64> = p.iter().map(|v| v / h).collect();
        Ok(Metrics {
            t,
            mass: p.iter().sum(),
            positivity_min: p.iter().cloned().fold(f64::INFINITY, f64::min),
            tv_seminorm: tv_seminorm(&rho, r.boundary()),
            l1_error: tv_distance(p, reference)?.sum_abs,
            l2_pi_error: ratio_error(p, pi, 2.0)?,
            f_h: chi2(p, pi)?,
            d_h: dissipation(r, pi, &q)?,
            relative_entropy: relative_entropy(p, pi)?,
            decay_rate: None,
        })
    }
}

/// Fills `decay_rate` on every record with the fit of `F_h` over the whole series.
pub fn annotate_decay(records: &mut [Metrics]) -> f64 {
    let series: Vec<(f64, f64)> = records.iter().map(|m| (m.t, m.f_h)).collect();
    let rate = fit_decay(&series);
    records.iter_mut().for_each(|m| m.decay_rate = Some(rate));
    rate
}

/// Real number with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comma-separated table with a header row; reals use [`fmt_real`].
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        check_len(self.header.len(), row.len())?;
        self.rows.push(row);
        Ok(())
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt_real(v)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_csv())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(format!("JSON encoding failed: {e}")))?;
    write_file(path, &(text + "\n"))
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn basic_norms() {
        let v = FieldVec::density(vec![1.0; 10]).unwrap();
        let n = norms(&v, 0.1);
        assert!((n.l1 - 1.0).abs() < 1e-15);
        assert!((n.l2 - 1.0).abs() < 1e-15);
        assert_eq!(n.linf, 1.0);
        assert_eq!(weighted_lp(&[3.0, -4.0], &[1.0, 1.0], 2.0).unwrap(), 5.0);
        assert_eq!(weighted_lp(&[3.0, -4.0], &[1.0, 1.0], f64::INFINITY).unwrap(), 4.0);
    }

    #[test]
    fn ratio_identities() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let mut p: Vec<f64> = (0..12).map(|_| rng.random_range(0.01..1.0)).collect();
            let mut pi: Vec<f64> = (0..12).map(|_| rng.random_range(0.01..1.0)).collect();
            let (sp, spi): (f64, f64) = (p.iter().sum(), pi.iter().sum());
            p.iter_mut().for_each(|v| *v /= sp);
            pi.iter_mut().for_each(|v| *v /= spi);
            let e1 = ratio_error(&p, &pi, 1.0).unwrap();
            let tv = tv_distance(&p, &pi).unwrap();
            assert!((e1 - tv.sum_abs).abs() < 1e-14);
            assert_eq!(tv.half_sum_abs * 2.0, tv.sum_abs);
            let e2 = ratio_error(&p, &pi, 2.0).unwrap();
            assert!(e1 <= e2 + 1e-15);
            let f = chi2(&p, &pi).unwrap();
            assert!((e2 * e2 - 2.0 * f).abs() < 1e-12 * e2 * e2);
            let kl = relative_entropy(&p, &pi).unwrap();
            assert!(tv.half_sum_abs.powi(2) <= 0.5 * kl + 1e-15);
        }
    }

    #[test]
    fn restriction() {
        let g = Grid::torus(2.0 * std::f64::consts::PI, 8).unwrap();
        let s = restrict(f64::sin, &g).unwrap();
        assert_eq!(s[3], g.node(3).sin());
        let c = restrict(|_| 2.0, &g).unwrap();
        assert!(c.values().iter().all(|&v| v == 2.0));
        // Gaussian mass from grid samples converges fast (trapezoid on a smooth, decayed integrand).
        let mut errs = Vec::new();
        for n in [13, 25, 49] {
            let g = Grid::line(-6.0, 6.0, n).unwrap();
            let v = restrict(|x| (-x * x).exp(), &g).unwrap();
            errs.push((l1(v.values(), g.h()) - std::f64::consts::PI.sqrt()).abs());
        }
        assert!(errs[0] < 1e-3 && errs[1] < 1e-10 && errs[2] < 1e-10, "{errs:?}");
    }

    #[test]
    fn fits() {
        let hs = [0.2, 0.1, 0.05, 0.025];
        let lin: Vec<(f64, f64)> = hs.iter().map(|&h| (h, h)).collect();
        assert!((fit_order(&lin).unwrap() - 1.0).abs() < 1e-12);
        let quad: Vec<(f64, f64)> = hs.iter().map(|&h| (h, 3.0 * h * h)).collect();
        assert!((fit_order(&quad).unwrap() - 2.0).abs() < 1e-12);
        let dec: Vec<(f64, f64)> = (0..50).map(|k| (0.1 * k as f64, (-0.3 * k as f64).exp())).collect();
        assert!((fit_decay(&dec) - 3.0).abs() < 1e-10);
        let flat: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 1.0)).collect();
        assert_eq!(fit_decay(&flat), 0.0);
        assert!(fit_order(&[(0.1, 0.0), (0.2, 1.0)]).is_err());
    }

    #[test]
    fn tv_seminorm_wraps_on_torus() {
        let v = [0.0, 1.0, 0.0, 2.0];
        assert_eq!(tv_seminorm(&v, Boundary::Reflecting), 4.0);
        assert_eq!(tv_seminorm(&v, Boundary::Periodic), 6.0);
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(["x", "y"]);
        t.push(vec![0.1, -2.0]).unwrap();
        assert!(t.push(vec![1.0]).is_err());
        assert_eq!(t.to_csv(), "x,y\n1.0000000000000001e-1,-2.0000000000000000e0\n");
    }
}
