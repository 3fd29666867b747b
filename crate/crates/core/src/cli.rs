//! Command-line front end: resolves a [`RunConfig`], runs one experiment and
//! writes its CSV/JSON artifacts plus a `manifest.json` echoing the config.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{parse_override, parse_text, InitialLaw, RunConfig};
use crate::diagnostics::{self, fit_order, tv_distance, write_json, Metrics, Table};
use crate::error::{Error, Result};
use crate::evolve::{evolve_forward, uniformization_series, Direction, EvolveConfig};
use crate::field::FieldVec;
use crate::gap::{gap_report, line_hardy_input, witness_scan};
use crate::model::{reference_stationary, split_drift, Grid, Preset, Problem};
use crate::montecarlo::{run_mc, run_mc_times, McConfig};
use crate::scheme::{apply_backward, apply_forward, build_rates, uniformization_rate, Rates};
use crate::stationary::{stationary, StationaryResult};

#[derive(Debug, Parser)]
#[command(name = "upwind", version, about = "Upwind jump-process schemes for 1-D Fokker-Planck equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Config file (`key = value` lines, optional `[section]` headers).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Monte Carlo seed (overrides mc.seed).
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Stationary distribution against the continuous reference.
    Stationary,
    /// Forward evolution with per-snapshot diagnostics.
    Evolve,
    /// Hardy constant, Poincare lower bound and exact spectral gap.
    Gap,
    /// Uniformization Monte Carlo against the deterministic law.
    Mc,
    /// Stationary error under grid refinement, with fitted orders.
    Order,
    /// Monte Carlo densities at several times next to the stationary density.
    Fig1,
    /// Quick internal consistency checks.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Stationary => "stationary",
            Command::Evolve => "evolve",
            Command::Gap => "gap",
            Command::Mc => "mc",
            Command::Order => "order",
            Command::Fig1 => "fig1",
            Command::Selftest => "selftest",
        }
    }

    fn default_preset(self) -> Preset {
        match self {
            Command::Fig1 => Preset::TorusSin,
            _ => Preset::Ou,
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Builds the resolved config from file, `--set`, `--out` and `--seed`.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut user = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
            parse_text(&text)?
        }
        None => BTreeMap::new(),
    };
    for s in &cli.set {
        let (k, v) = parse_override(s)?;
        user.insert(k, v);
    }
    if let Some(dir) = &cli.out {
        user.insert("output.dir".into(), dir.display().to_string());
    }
    if let Some(seed) = cli.seed {
        user.insert("mc.seed".into(), seed.to_string());
    }
    RunConfig::resolve(&user, cli.command.default_preset())
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let out = PathBuf::from(cfg.str("output.dir"));
    std::fs::create_dir_all(&out).map_err(|source| Error::Io {
        path: out.display().to_string(),
        source,
    })?;
    let outputs = match cli.command {
        Command::Stationary => cmd_stationary(&cfg, &out)?,
        Command::Evolve => cmd_evolve(&cfg, &out)?,
        Command::Gap => cmd_gap(&cfg, &out)?,
        Command::Mc => cmd_mc(&cfg, &out)?,
        Command::Order => cmd_order(&cfg, &out)?,
        Command::Fig1 => cmd_fig1(&cfg, &out)?,
        Command::Selftest => cmd_selftest(&cfg, &out)?,
    };
    write_manifest(&out, cli.command, &cfg, &outputs)
}

fn write_manifest(out: &Path, command: Command, cfg: &RunConfig, outputs: &[&str]) -> Result<()> {
    let manifest = json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.values(),
        "outputs": outputs,
    });
    write_json(&out.join("manifest.json"), &manifest)
}

/// Problem, grid and rates for the configured coefficients.
pub fn setup(cfg: &RunConfig) -> Result<(Problem, Grid, Rates)> {
    let problem = cfg.problem()?;
    let grid = cfg.grid()?;
    let rates = rates_on(&problem, &grid)?;
    Ok((problem, grid, rates))
}

fn rates_on(problem: &Problem, grid: &Grid) -> Result<Rates> {
    build_rates(problem, grid, &split_drift(problem, grid)?)
}

/// `h sum |pi(x_j) - pi^h_j / h|` and the matching max norm.
fn stationary_errors(reference: &[f64], s: &StationaryResult, h: f64) -> (f64, f64) {
    let dens = s.density(h);
    let diff: Vec<f64> = reference.iter().zip(&dens).map(|(a, b)| a - b).collect();
    (diagnostics::l1(&diff, h), diagnostics::linf(&diff))
}

pub fn cmd_stationary(cfg: &RunConfig, out: &Path) -> Result<Vec<&'static str>> {
    let (problem, grid, r) = setup(cfg)?;
    let s = stationary(&r)?;
    let reference = reference_stationary(&problem, &grid)?;
    let h = grid.h();
    let dens = s.density(h);
    let mut table = Table::new(["x", "pi_h_over_h", "pi_reference", "abs_error"]);
    for j in 0..grid.len() {
        table.push(vec![grid.node(j), dens[j], reference[j], (dens[j] - reference[j]).abs()])?;
    }
    table.write(&out.join("stationary.csv"))?;
    let (l1, linf) = stationary_errors(reference.values(), &s, h);
    let summary = json!({
        "N": grid.len(),
        "h": h,
        "lambda_star": uniformization_rate(&r),
        "l1_error": l1,
        "linf_error": linf,
        "flux": s.flux,
        "relative_flux_spread": s.relative_flux_spread(),
        "db_residual": s.db_residual,
    });
    write_json(&out.join("stationary.json"), &summary)?;
    println!("stationary: N = {}, l1 error = {l1:.3e}, linf error = {linf:.3e}, flux = {:.3e}", grid.len(), s.flux);
    Ok(vec!["stationary.csv", "stationary.json"])
}

/// Fine-grid node index of coarse node `j` for a grid refined by 2.
fn fine_index(j: usize) -> usize {
    2 * j
}

pub fn cmd_evolve(cfg: &RunConfig, out: &Path) -> Result<Vec<&'static str>> {
    let (problem, grid, r) = setup(cfg)?;
    let ecfg = cfg.evolve_config()?;
    let law = InitialLaw::parse("evolve.p0", cfg.str("evolve.p0"))?;
    let p0 = law.on("evolve.p0", &grid)?;
    let traj = evolve_forward(&r, &p0, &ecfg)?;
    let s = stationary(&r)?;

    let fine = grid.refined(2)?;
    let rf = rates_on(&problem, &fine)?;
    let fine_cfg = EvolveConfig::series(ecfg.t_final).with_snapshots(ecfg.output_times());
    let reference = evolve_forward(&rf, &law.on("evolve.p0", &fine)?, &fine_cfg)?;

    let h = grid.h();
    let mut records = Vec::new();
    for snap in &traj.snapshots {
        let fsnap = reference
            .snapshots
            .iter()
            .find(|f| f.t == snap.t)
            .ok_or_else(|| Error::Internal(format!("reference lacks snapshot t = {}", snap.t)))?;
        // Reference density at the coarse nodes, back to coarse probabilities.
        let ref_p: Vec<f64> = (0..grid.len()).map(|j| fsnap.values[fine_index(j)] / fine.h() * h).collect();
        records.push(Metrics::compute(&r, s.values(), snap.t, snap.values.values(), Some(&ref_p))?);
    }
    let rate = diagnostics::annotate_decay(&mut records);

    let mut table = Table::new([
        "t",
        "mass",
        "positivity_min",
        "tv_seminorm",
        "l1_error_vs_reference",
        "tv_to_stationary",
        "l2_pi_error",
        "F_h",
        "D_h",
        "relative_entropy",
    ]);
    for (m, snap) in records.iter().zip(&traj.snapshots) {
        let tv = tv_distance(snap.values.values(), s.values())?;
        table.push(vec![
            m.t,
            m.mass,
            m.positivity_min,
            m.tv_seminorm,
            m.l1_error,
            tv.sum_abs,
            m.l2_pi_error,
            m.f_h,
            m.d_h,
            m.relative_entropy,
        ])?;
    }
    table.write(&out.join("evolve.csv"))?;
    let summary = json!({
        "method": traj.method.name(),
        "dt": traj.dt,
        "work": traj.work,
        "N": grid.len(),
        "h": h,
        "reference_N": fine.len(),
        "decay_rate_F_h": rate,
        "snapshots": records,
    });
    write_json(&out.join("evolve.json"), &summary)?;
    let last = records.last().map(|m| m.l1_error).unwrap_or(0.0);
    println!(
        "evolve: {} snapshots via {}, final l1 error vs reference = {last:.3e}, F_h decay rate = {rate:.4}",
        records.len(),
        traj.method.name()
    );
    Ok(vec!["evolve.csv", "evolve.json"])
}

pub fn cmd_gap(cfg: &RunConfig, out: &Path) -> Result<Vec<&'static str>> {
    let (_, _, r) = setup(cfg)?;
    let s = stationary(&r)?;
    let report = gap_report(&r, &s)?;
    write_json(&out.join("gap.json"), &report)?;
    match report.b {
        Some(b) => println!(
            "gap: B = {b:.6e}, 1/(8B) = {:.6e}, exact gap = {:.6e}",
            report.kappa_lower, report.exact_gap
        ),
        None => println!(
            "gap: torus kappa = {:.6e}, exact symmetrized gap = {:.6e}",
            report.kappa_lower, report.exact_gap
        ),
    }
    Ok(vec!["gap.json"])
}

/// Deterministic law at `t` from `p0`, by the uniformization series.
fn deterministic_law(r: &Rates, p0: &FieldVec, t: f64) -> Result<FieldVec> {
    uniformization_series(r, p0, t, None, 1e-12, Direction::Forward)
}

pub fn cmd_mc(cfg: &RunConfig, out: &Path) -> Result<Vec<&'static str>> {
    let (_, grid, r) = setup(cfg)?;
    let mcfg = cfg.mc_config(&grid)?;
    let res = run_mc(&r, &mcfg)?;
    let det = deterministic_law(&r, &mcfg.p0, mcfg.t)?;
    let h = grid.h();
    let mut table = Table::new(["x", "rho_tilde", "rho_deterministic", "stderr_band"]);
    for j in 0..grid.len() {
        table.push(vec![grid.node(j), res.rho_tilde[j], mcfg.mass * det[j] / h, mcfg.mass * res.stderr[j] / h])?;
    }
    table.write(&out.join("mc.csv"))?;
    let tv = tv_distance(&res.p_tilde, det.values())?;
    let summary = json!({
        "seed": res.seed,
        "lambda": res.lambda,
        "M": res.m,
        "T": mcfg.t,
        "N": grid.len(),
        "tv_to_deterministic": tv,
        "sampling_band": res.sampling_band(),
        "l1_band": res.l1_band(),
        "counts": res.counts,
    });
    write_json(&out.join("mc.json"), &summary)?;
    println!(
        "mc: M = {}, lambda = {:.4}, sum|p~ - p| = {:.3e} (l1 band {:.3e})",
        res.m,
        res.lambda,
        tv.sum_abs,
        res.l1_band()
    );
    Ok(vec!["mc.csv", "mc.json"])
}

/// Node counts of the refinement sweep: `h` halves at every level.
pub fn sweep_nodes(torus: bool, n0: usize, levels: usize) -> Vec<usize> {
    (0..levels)
        .map(|k| if torus { n0 << k } else { ((n0 - 1) << k) + 1 })
        .collect()
}

pub fn cmd_order(cfg: &RunConfig, out: &Path) -> Result<Vec<&'static str>> {
    let problem = cfg.problem()?;
    let torus = cfg.str("domain.type") == "torus";
    let nodes = sweep_nodes(torus, cfg.usize("order.N0")?, cfg.usize("order.levels")?);
    let mut table = Table::new(["h", "N", "l1_error", "linf_error"]);
    let (mut l1s, mut linfs) = (Vec::new(), Vec::new());
    for &n in &nodes {
        let grid = Grid::new(&problem.domain, n)?;
        let r = rates_on(&problem, &grid)?;
        let s = stationary(&r)?;
        let reference = reference_stationary(&problem, &grid)?;
        let (l1, linf) = stationary_errors(reference.values(), &s, grid.h());
        table.push(vec![grid.h(), n as f64, l1, linf])?;
        l1s.push((grid.h(), l1));
        linfs.push((grid.h(), linf));
    }
    table.write(&out.join("order.csv"))?;
    let (o1, oinf) = (fit_order(&l1s)?, fit_order(&linfs)?);
    let summary = json!({ "nodes": nodes, "l1_order": o1, "linf_order": oinf });
    write_json(&out.join("order.json"), &summary)?;
    println!("order: l1 slope = {o1:.4}, linf slope = {oinf:.4} over N = {nodes:?}");
    Ok(vec!["order.csv", "order.json"])
}

pub fn cmd_fig1(cfg: &RunConfig, out: &Path) -> Result<Vec<&'static str>> {
    let (problem, grid, r) = setup(cfg)?;
    let times = cfg.list("fig1.times")?;
    if times.is_empty() {
        return Err(Error::config("fig1.times", "need at least one time"));
    }
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted != times {
        return Err(Error::config("fig1.times", "times must be nondecreasing"));
    }
    let mut mcfg: McConfig = cfg.mc_config(&grid)?;
    mcfg.m = cfg.u64("fig1.M")?;
    mcfg.t = *times.last().unwrap_or(&0.0);
    let results = run_mc_times(&r, &mcfg, &times)?;
    let pi_exact = reference_stationary(&problem, &grid)?;
    let s = stationary(&r)?;

    let mut header = vec!["x".to_string(), "pi_exact".to_string()];
    header.extend(times.iter().map(|t| format!("rho_t{t}")));
    let mut table = Table::new(header);
    for j in 0..grid.len() {
        let mut row = vec![grid.node(j), pi_exact[j]];
        row.extend(results.iter().map(|res| res.rho_tilde[j]));
        table.push(row)?;
    }
    table.write(&out.join("fig1.csv"))?;

    let mut per_time: Vec<Value> = Vec::new();
    for res in &results {
        let det = deterministic_law(&r, &mcfg.p0, res.t)?;
        per_time.push(json!({
            "t": res.t,
            "tv_mc_to_stationary": tv_distance(&res.p_tilde, s.values())?,
            "tv_deterministic_to_stationary": tv_distance(det.values(), s.values())?,
            "tv_mc_to_deterministic": tv_distance(&res.p_tilde, det.values())?,
            "sampling_band": res.sampling_band(),
            "l1_band": res.l1_band(),
        }));
    }
    let summary = json!({
        "N": grid.len(),
        "lambda": results[0].lambda,
        "M": mcfg.m,
        "seed": mcfg.seed,
        "times": per_time,
    });
    write_json(&out.join("fig1.json"), &summary)?;
    println!("fig1: N = {}, lambda = {:.4}, M = {}, times = {times:?}", grid.len(), results[0].lambda, mcfg.m);
    Ok(vec!["fig1.csv", "fig1.json"])
}

/// Outcome of one self-test check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

/// Small, fast versions of the structural checks.
pub fn selftest_checks() -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    let ou = Preset::Ou.problem();
    let g = Grid::new(&ou.domain, 121)?;
    let r = rates_on(&ou, &g)?;
    let s = stationary(&r)?;
    let o = r.origin();
    let h = g.h();
    let worst = (o..g.len() - 1)
        .map(|j| {
            let k = (j - o + 1) as f64;
            let want = 1.0 / (1.0 + 2.0 * k * h * h);
            (s.pi[j + 1] / s.pi[j] / want - 1.0).abs()
        })
        .fold(0.0, f64::max);
    checks.push(check("ou_closed_form", worst <= 1e-12, format!("max relative ratio error {worst:.2e}")));

    let ts = Preset::TorusSin.problem();
    let gt = Grid::new(&ts.domain, 64)?;
    let rt = rates_on(&ts, &gt)?;
    let gen = rt.generator();
    let rows = (0..gt.len()).map(|i| gen.row_sum(i).abs()).fold(0.0, f64::max);
    checks.push(check("generator_rows_sum_to_zero", rows == 0.0, format!("max |row sum| {rows:.2e}")));

    let p: Vec<f64> = (0..gt.len()).map(|j| 1.0 + (j as f64 * 0.37).sin().abs()).collect();
    let total: f64 = p.iter().sum();
    let p = FieldVec::probability(p.iter().map(|v| v / total).collect())?;
    let u = FieldVec::observable((0..gt.len()).map(|j| (j as f64 * 0.11).cos()).collect())?;
    let lhs: f64 = apply_forward(&rt, &p)?.values().iter().zip(u.values()).map(|(a, b)| a * b).sum();
    let rhs: f64 = p.values().iter().zip(apply_backward(&rt, &u)?.values()).map(|(a, b)| a * b).sum();
    let scale = lhs.abs().max(rhs.abs()).max(1e-300);
    checks.push(check(
        "forward_backward_duality",
        (lhs - rhs).abs() <= 1e-12 * scale.max(1.0),
        format!("<Q^T p, u> = {lhs:.6e}, <p, Q u> = {rhs:.6e}"),
    ));

    let p1 = deterministic_law(&rt, &p, 1.0)?;
    let mass_err = (p1.sum() - 1.0).abs();
    let min = p1.values().iter().cloned().fold(f64::INFINITY, f64::min);
    checks.push(check(
        "series_mass_and_positivity",
        mass_err <= 1e-12 && min >= 0.0,
        format!("|mass - 1| = {mass_err:.2e}, min = {min:.2e}"),
    ));

    let hi = line_hardy_input(&r, &s)?;
    let b = crate::gap::hardy_b(&hi);
    let w = witness_scan(&hi);
    checks.push(check(
        "hardy_sandwich",
        w.functional_max >= b * (1.0 - 1e-12) && w.functional_max <= 4.0 * b,
        format!("B = {b:.6e}, witness max = {:.6e}", w.functional_max),
    ));

    let g8 = Grid::new(&ts.domain, 8)?;
    let r8 = rates_on(&ts, &g8)?;
    let mc = McConfig::new(0.1, 2_000, 5, FieldVec::uniform_probability(8));
    let (a, bb) = (run_mc(&r8, &mc)?, run_mc(&r8, &mc)?);
    checks.push(check(
        "mc_seed_determinism",
        a.counts == bb.counts && a.counts.iter().sum::<u64>() == 2_000,
        format!("counts {:?}", a.counts),
    ));
    Ok(checks)
}

pub fn cmd_selftest(_cfg: &RunConfig, out: &Path) -> Result<Vec<&'static str>> {
    let checks = selftest_checks()?;
    for c in &checks {
        println!("[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    write_json(&out.join("selftest.json"), &checks)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    if !failed.is_empty() {
        return Err(Error::Internal(format!("self-test failed: {}", failed.join(", "))));
    }
    Ok(vec!["selftest.json"])
}
