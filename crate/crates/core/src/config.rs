//! Plain-text run configuration: `key = value` lines, optionally grouped under
//! `[section]` headers, with `#` comments. Every accepted key is listed in
//! [`KEYS`]; anything else is rejected by name.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::evolve::{EvolveConfig, Method};
use crate::field::FieldVec;
use crate::model::{Coefficient, Domain, Grid, Preset, Problem};
use crate::montecarlo::McConfig;

/// Accepted keys with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("domain.type", "line | torus"),
    ("domain.xmin", "left end of the line window"),
    ("domain.xmax", "right end of the line window"),
    ("domain.L", "torus length"),
    ("coeff.preset", "ou | torus_sin | pure_diffusion"),
    ("coeff.b", "drift expression in x (replaces the preset)"),
    ("coeff.sigma", "diffusion amplitude expression in x (default 1 with coeff.b)"),
    ("grid.N", "number of nodes"),
    ("evolve.T", "final time"),
    ("evolve.method", "euler | uniform_series"),
    ("evolve.dt", "manual Euler step, or auto"),
    ("evolve.safety", "Euler step as a fraction of 1/lambda*"),
    ("evolve.tol", "truncated Poisson mass of the series"),
    ("evolve.snapshots", "comma-separated output times"),
    ("evolve.p0", "initial law: uniform | delta:<x> | expression in x"),
    ("mc.T", "final time"),
    ("mc.M", "number of samples"),
    ("mc.lambda_pad", "added to max(alpha + beta) for the clock rate"),
    ("mc.seed", "64-bit seed"),
    ("mc.p0", "initial law, same forms as evolve.p0"),
    ("order.levels", "number of grids in the refinement sweep"),
    ("order.N0", "nodes on the coarsest grid"),
    ("fig1.M", "samples per recorded time"),
    ("fig1.times", "comma-separated recording times"),
    ("output.dir", "directory for CSV and JSON artifacts"),
];

/// Raw `key -> value` text from a config file.
pub fn parse_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let where_ = format!("line {}", i + 1);
        if let Some(inner) = line.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| Error::config(&where_, format!("malformed section header `{line}`")))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(&where_, format!("expected `key = value`, got `{line}`")))?;
        let k = k.trim();
        let key = if section.is_empty() || k.contains('.') {
            k.to_string()
        } else {
            format!("{section}.{k}")
        };
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::config(key, format!("set twice (again on {where_})")));
        }
    }
    Ok(out)
}

/// `key=value` from a `--set` flag.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::config(s, "override must look like key=value"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Fully resolved configuration: every key relevant to a run, defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Validates `user` keys and fills defaults. `default_preset` applies when
    /// neither a preset nor a drift expression is given.
    pub fn resolve(user: &BTreeMap<String, String>, default_preset: Preset) -> Result<RunConfig> {
        if let Some(k) = user.keys().find(|k| !KEYS.iter().any(|(name, _)| name == k)) {
            return Err(Error::config(k.as_str(), "unknown key"));
        }
        let mut v = user.clone();
        let get = |v: &BTreeMap<String, String>, k: &str| v.get(k).cloned();

        let custom = v.contains_key("coeff.b") || v.contains_key("coeff.sigma");
        let preset = if custom {
            if v.contains_key("coeff.preset") {
                return Err(Error::config("coeff.preset", "cannot be combined with coeff.b / coeff.sigma"));
            }
            if !v.contains_key("coeff.b") {
                return Err(Error::config("coeff.b", "required when coeff.sigma is given"));
            }
            v.entry("coeff.sigma".into()).or_insert_with(|| "1".into());
            None
        } else {
            let name = get(&v, "coeff.preset").unwrap_or_else(|| default_preset.name().to_string());
            let p = Preset::from_name(&name).ok_or_else(|| {
                Error::config("coeff.preset", format!("unknown preset `{name}` (expected ou, torus_sin or pure_diffusion)"))
            })?;
            v.insert("coeff.preset".into(), p.name().into());
            Some(p)
        };

        let default_domain = preset.map(Preset::default_domain).unwrap_or(Domain::Line { x_min: -6.0, x_max: 6.0 });
        let kind = match get(&v, "domain.type") {
            Some(t) if t == "line" || t == "torus" => t,
            Some(t) => return Err(Error::config("domain.type", format!("expected line or torus, got `{t}`"))),
            None => match default_domain {
                Domain::Line { .. } => "line".into(),
                Domain::Torus { .. } => "torus".into(),
            },
        };
        v.insert("domain.type".into(), kind.clone());
        let torus = kind == "torus";
        if torus {
            for k in ["domain.xmin", "domain.xmax"] {
                if v.contains_key(k) {
                    return Err(Error::config(k, "only valid with domain.type = line"));
                }
            }
            let l = match default_domain {
                Domain::Torus { length } => length,
                Domain::Line { .. } => 2.0 * PI,
            };
            v.entry("domain.L".into()).or_insert_with(|| l.to_string());
        } else {
            if v.contains_key("domain.L") {
                return Err(Error::config("domain.L", "only valid with domain.type = torus"));
            }
            let (a, b) = match default_domain {
                Domain::Line { x_min, x_max } => (x_min, x_max),
                Domain::Torus { .. } => (-6.0, 6.0),
            };
            v.entry("domain.xmin".into()).or_insert_with(|| a.to_string());
            v.entry("domain.xmax".into()).or_insert_with(|| b.to_string());
        }
        let nodes = match preset {
            Some(p) if matches!(p.default_domain(), Domain::Torus { .. }) == torus => p.default_nodes(),
            _ if torus => 64,
            _ => 121,
        };
        let defaults: [(&str, String); 17] = [
            ("grid.N", nodes.to_string()),
            ("evolve.T", "16".into()),
            ("evolve.method", "uniform_series".into()),
            ("evolve.dt", "auto".into()),
            ("evolve.safety", "0.9".into()),
            ("evolve.tol", "1e-12".into()),
            ("evolve.snapshots", String::new()),
            ("evolve.p0", "uniform".into()),
            ("mc.T", "1".into()),
            ("mc.M", "100000".into()),
            ("mc.lambda_pad", "10".into()),
            ("mc.seed", "0".into()),
            ("mc.p0", "uniform".into()),
            ("order.levels", "4".into()),
            ("order.N0", if torus { "32" } else { "61" }.into()),
            ("fig1.M", "1000000".into()),
            ("fig1.times", "1,4,10,12".into()),
        ];
        for (k, d) in defaults {
            v.entry(k.into()).or_insert(d);
        }
        if !user.contains_key("evolve.snapshots") {
            if let Ok(t) = v["evolve.T"].parse::<f64>() {
                let ts: Vec<String> = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0]
                    .iter()
                    .filter(|&&s| s < t)
                    .map(|s| s.to_string())
                    .collect();
                v.insert("evolve.snapshots".into(), ts.join(","));
            }
        }
        v.entry("output.dir".into()).or_insert_with(|| "out".into());

        let cfg = RunConfig { values: v };
        cfg.check()?;
        Ok(cfg)
    }

    /// Type-checks every key so that failures surface before any work starts.
    fn check(&self) -> Result<()> {
        self.problem()?;
        self.nodes()?;
        self.evolve_config()?;
        self.f64_at_least("mc.T", 0.0)?;
        self.u64("mc.M")?;
        self.f64_at_least("mc.lambda_pad", 0.0)?;
        self.u64("mc.seed")?;
        self.u64("fig1.M")?;
        self.list("fig1.times")?;
        if self.usize("order.levels")? < 2 {
            return Err(Error::config("order.levels", "need at least 2 grids to fit an order"));
        }
        if self.usize("order.N0")? < 3 {
            return Err(Error::config("order.N0", "need at least 3 nodes"));
        }
        for k in ["evolve.p0", "mc.p0"] {
            InitialLaw::parse(k, self.str(k))?;
        }
        Ok(())
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let s = self.str(key);
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::config(key, format!("expected a finite real, got `{s}`")))
    }

    fn f64_at_least(&self, key: &str, lo: f64) -> Result<f64> {
        let x = self.f64(key)?;
        if x < lo {
            return Err(Error::config(key, format!("must be >= {lo}, got {x}")));
        }
        Ok(x)
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        let s = self.str(key);
        s.parse::<u64>()
            .or_else(|_| {
                // Accept integral reals such as 1e6.
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.fract() == 0.0 && *x >= 0.0 && *x < 1.8e19)
                    .map(|x| x as u64)
                    .ok_or(())
            })
            .map_err(|_| Error::config(key, format!("expected a nonnegative integer, got `{s}`")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        Ok(self.u64(key)? as usize)
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        let s = self.str(key);
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite() && *x >= 0.0)
                    .ok_or_else(|| Error::config(key, format!("expected nonnegative reals separated by commas, got `{s}`")))
            })
            .collect()
    }

    pub fn preset(&self) -> Option<Preset> {
        Preset::from_name(self.str("coeff.preset"))
    }

    pub fn domain(&self) -> Result<Domain> {
        if self.str("domain.type") == "torus" {
            let length = self.f64("domain.L")?;
            if length <= 0.0 {
                return Err(Error::config("domain.L", format!("must be positive, got {length}")));
            }
            Ok(Domain::Torus { length })
        } else {
            let (x_min, x_max) = (self.f64("domain.xmin")?, self.f64("domain.xmax")?);
            if x_min >= x_max {
                return Err(Error::config("domain.xmax", format!("must exceed domain.xmin, got [{x_min}, {x_max}]")));
            }
            Ok(Domain::Line { x_min, x_max })
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        let domain = self.domain()?;
        match self.preset() {
            Some(p) => p.problem().with_domain(domain),
            None => Problem::new(
                Coefficient::parse("coeff.b", self.str("coeff.b"))?,
                Coefficient::parse("coeff.sigma", self.str("coeff.sigma"))?,
                domain,
            ),
        }
    }

    pub fn nodes(&self) -> Result<usize> {
        let n = self.usize("grid.N")?;
        if n < 3 {
            return Err(Error::config("grid.N", format!("need at least 3 nodes, got {n}")));
        }
        Ok(n)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(&self.domain()?, self.nodes()?)
    }

    pub fn evolve_config(&self) -> Result<EvolveConfig> {
        let method = Method::from_name(self.str("evolve.method")).ok_or_else(|| {
            Error::config("evolve.method", format!("expected euler or uniform_series, got `{}`", self.str("evolve.method")))
        })?;
        let mut cfg = EvolveConfig::new(self.f64("evolve.T")?)
            .with_method(method)
            .with_safety(self.f64("evolve.safety")?)
            .with_snapshots(self.list("evolve.snapshots")?);
        cfg.series_tol = self.f64("evolve.tol")?;
        if self.str("evolve.dt") != "auto" {
            cfg = cfg.with_dt(self.f64("evolve.dt")?);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Initial probability vector from `key` (`evolve.p0` or `mc.p0`).
    pub fn initial(&self, key: &str, grid: &Grid) -> Result<FieldVec> {
        InitialLaw::parse(key, self.str(key))?.on(key, grid)
    }

    pub fn mc_config(&self, grid: &Grid) -> Result<McConfig> {
        let mut cfg = McConfig::new(
            self.f64_at_least("mc.T", 0.0)?,
            self.u64("mc.M")?,
            self.u64("mc.seed")?,
            self.initial("mc.p0", grid)?,
        );
        cfg.lambda_pad = self.f64_at_least("mc.lambda_pad", 0.0)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Initial law as written in the config.
#[derive(Debug, Clone)]
pub enum InitialLaw {
    Uniform,
    /// All mass on the node nearest `x`.
    Delta(f64),
    /// Density samples `f(x_j)`, normalized to a probability vector.
    Density(Coefficient),
}

impl InitialLaw {
    pub fn parse(key: &str, s: &str) -> Result<InitialLaw> {
        if s == "uniform" {
            return Ok(InitialLaw::Uniform);
        }
        if let Some(x) = s.strip_prefix("delta:") {
            let x = x
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::config(key, format!("bad delta location in `{s}`")))?;
            return Ok(InitialLaw::Delta(x));
        }
        Ok(InitialLaw::Density(Coefficient::parse(key, s)?))
    }

    pub fn on(&self, key: &str, grid: &Grid) -> Result<FieldVec> {
        let n = grid.len();
        let values = match self {
            InitialLaw::Uniform => return Ok(FieldVec::uniform_probability(n)),
            InitialLaw::Delta(x) => {
                let j = (0..n)
                    .min_by(|&a, &b| (grid.node(a) - x).abs().total_cmp(&(grid.node(b) - x).abs()))
                    .unwrap_or(0);
                let mut v = vec![0.0; n];
                v[j] = 1.0;
                v
            }
            InitialLaw::Density(f) => {
                let raw = grid.nodes().iter().map(|&x| f.eval(x)).collect::<Result<Vec<f64>>>()?;
                if raw.iter().any(|v| *v < 0.0) {
                    return Err(Error::config(key, "initial density is negative somewhere on the grid"));
                }
                let total: f64 = raw.iter().sum();
                if total.is_nan() || total <= 0.0 {
                    return Err(Error::config(key, "initial density has no mass on the grid"));
                }
                raw.iter().map(|v| v / total).collect()
            }
        };
        FieldVec::probability(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<RunConfig> {
        RunConfig::resolve(&parse_text(text)?, Preset::Ou)
    }

    #[test]
    fn sections_and_flat_keys() {
        let m = parse_text("# run\n[coeff]\npreset = torus_sin\n[grid]\nN = 32 # nodes\nmc.M = 10\n").unwrap();
        assert_eq!(m["coeff.preset"], "torus_sin");
        assert_eq!(m["grid.N"], "32");
        assert_eq!(m["mc.M"], "10");
        assert!(parse_text("grid.N 3").is_err());
        assert!(parse_text("grid.N = 3\ngrid.N = 4").is_err());
    }

    #[test]
    fn defaults_follow_preset() {
        let c = resolve("").unwrap();
        assert_eq!(c.str("coeff.preset"), "ou");
        assert_eq!(c.grid().unwrap().len(), 121);
        assert!(matches!(c.domain().unwrap(), Domain::Line { x_min, x_max } if x_min == -6.0 && x_max == 6.0));
        let t = resolve("coeff.preset = torus_sin").unwrap();
        assert_eq!(t.str("domain.type"), "torus");
        assert_eq!(t.f64("domain.L").unwrap(), 2.0 * PI);
        assert_eq!(t.nodes().unwrap(), 64);
        let e = resolve("coeff.b = -2*x\ncoeff.sigma = 1 + 0*x").unwrap();
        assert!(e.preset().is_none());
        assert_eq!(e.problem().unwrap().drift.eval(1.5).unwrap(), -3.0);
    }

    #[test]
    fn errors_name_the_key() {
        let key_of = |r: Result<RunConfig>| match r {
            Err(Error::Config { key, .. }) => key,
            Err(Error::Expression { key, .. }) => key,
            other => panic!("{other:?}"),
        };
        assert_eq!(key_of(resolve("grid.nodes = 3")), "grid.nodes");
        assert_eq!(key_of(resolve("coeff.preset = heat")), "coeff.preset");
        assert_eq!(key_of(resolve("coeff.b = x +")), "coeff.b");
        assert_eq!(key_of(resolve("grid.N = two")), "grid.N");
        assert_eq!(key_of(resolve("evolve.method = rk4")), "evolve.method");
        assert_eq!(key_of(resolve("domain.L = 3")), "domain.L");
        assert_eq!(key_of(resolve("domain.xmin = 2\ndomain.xmax = 1")), "domain.xmax");
        assert_eq!(key_of(resolve("mc.p0 = delta:abc")), "mc.p0");
    }

    #[test]
    fn initial_laws() {
        let c = resolve("grid.N = 5\ndomain.xmin = -2\ndomain.xmax = 2\nevolve.p0 = delta:0.9\nmc.p0 = exp(-x^2)").unwrap();
        let g = c.grid().unwrap();
        assert_eq!(c.initial("evolve.p0", &g).unwrap().values(), &[0.0, 0.0, 0.0, 1.0, 0.0]);
        let p = c.initial("mc.p0", &g).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-15);
        assert!(p[2] > p[1] && p[1] == p[3]);
        assert_eq!(c.u64("mc.M").unwrap(), 100000);
        assert_eq!(resolve("fig1.M = 1e6").unwrap().u64("fig1.M").unwrap(), 1_000_000);
    }
}
