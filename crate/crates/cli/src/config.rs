//! Resolved run configuration and its flat `key=value` file format.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ctm_core::{ConfigRecord, CtmError, Sigmoid};

use crate::error::{CliError, CliResult};

/// Subcommand whose defaults seed a [`RunConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Simulate,
    Reduce,
    Bifurcate,
    Sweep,
    Branch,
    LtmCompare,
    Fig3,
    Fig5,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Simulate => "simulate",
            Profile::Reduce => "reduce",
            Profile::Bifurcate => "bifurcate",
            Profile::Sweep => "sweep",
            Profile::Branch => "branch",
            Profile::LtmCompare => "ltm-compare",
            Profile::Fig3 => "reproduce fig3",
            Profile::Fig5 => "reproduce fig5",
        }
    }
}

/// Every parameter any subcommand reads, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub total: usize,
    pub n: usize,
    pub eps: f64,
    pub u0: f64,
    pub kappa: f64,
    pub kappa_s: f64,
    pub v: f64,
    pub beta: f64,
    /// Agent receiving `beta`.
    pub agent: usize,
    /// Fixed gain; `None` means feedback.
    pub u: Option<f64>,
    pub sigmoid: Sigmoid,
    pub seed: u64,
    pub dt: f64,
    pub t_end: f64,
    pub out: PathBuf,
    pub n_min: usize,
    pub n_max: Option<usize>,
    pub u_min: f64,
    pub u_max: f64,
    pub u_steps: usize,
    pub edges: Option<PathBuf>,
    pub thresholds: Option<PathBuf>,
    pub seeds: Vec<usize>,
}

impl RunConfig {
    pub fn defaults(profile: Profile) -> Self {
        let base = Self {
            total: 11,
            n: 4,
            eps: 0.2,
            u0: 3.0,
            kappa: 10.0,
            kappa_s: 0.05,
            v: 1.0,
            beta: 0.0,
            agent: 0,
            u: None,
            sigmoid: Sigmoid::Tanh,
            seed: 7,
            dt: 0.01,
            t_end: 200.0,
            out: PathBuf::from("."),
            n_min: 2,
            n_max: None,
            u_min: 0.5,
            u_max: 3.0,
            u_steps: 101,
            edges: None,
            thresholds: None,
            seeds: Vec::new(),
        };
        match profile {
            Profile::Simulate | Profile::Reduce | Profile::Bifurcate | Profile::Branch => base,
            Profile::Fig5 => Self { beta: 1.0, ..base },
            Profile::Sweep | Profile::Fig3 => Self { total: 100, ..base },
            Profile::LtmCompare => Self { v: 200.0, dt: 0.002, t_end: 20.0, eps: 0.2, seeds: vec![0], ..base },
        }
    }

    pub const KEYS: [&'static str; 23] = [
        "N", "n", "eps", "u0", "kappa", "kappa_s", "v", "beta", "agent", "u", "sigmoid", "seed", "dt", "t_end",
        "out", "n_min", "n_max", "u_min", "u_max", "u_steps", "edges", "thresholds", "seeds",
    ];

    /// Sets one key from its text form. An empty value clears optional keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn p<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("bad value '{v}' for {key}"))
        }
        fn opt<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>, String> {
            if v.is_empty() {
                Ok(None)
            } else {
                p(key, v).map(Some)
            }
        }
        let v = value.trim();
        match key {
            "N" => self.total = p(key, v)?,
            "n" => self.n = p(key, v)?,
            "eps" => self.eps = p(key, v)?,
            "u0" => self.u0 = p(key, v)?,
            "kappa" => self.kappa = p(key, v)?,
            "kappa_s" => self.kappa_s = p(key, v)?,
            "v" => self.v = p(key, v)?,
            "beta" => self.beta = p(key, v)?,
            "agent" => self.agent = p(key, v)?,
            "u" => self.u = opt(key, v)?,
            "sigmoid" => self.sigmoid = v.parse().map_err(|e: CtmError| e.to_string())?,
            "seed" => self.seed = p(key, v)?,
            "dt" => self.dt = p(key, v)?,
            "t_end" => self.t_end = p(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "n_min" => self.n_min = p(key, v)?,
            "n_max" => self.n_max = opt(key, v)?,
            "u_min" => self.u_min = p(key, v)?,
            "u_max" => self.u_max = p(key, v)?,
            "u_steps" => self.u_steps = p(key, v)?,
            "edges" => self.edges = opt::<PathBuf>(key, v)?,
            "thresholds" => self.thresholds = opt::<PathBuf>(key, v)?,
            "seeds" => self.seeds = parse_list(v)?,
            _ => return Err(format!("unknown config key '{key}'")),
        }
        Ok(())
    }

    /// Applies a config file's contents on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", lineno + 1))?;
            self.set(k.trim(), v).map_err(|e| format!("line {}: {e}", lineno + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::ConfigFile { path: path.to_owned(), reason: e.to_string() })?;
        self.apply_text(&text)
            .map_err(|reason| CliError::ConfigFile { path: path.to_owned(), reason })
    }

    /// Every key in file order; values use shortest round-trip formatting.
    pub fn record(&self) -> ConfigRecord {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let seeds = self.seeds.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut rec = ConfigRecord::new();
        rec.set("N", self.total)
            .set("n", self.n)
            .set("eps", self.eps)
            .set("u0", self.u0)
            .set("kappa", self.kappa)
            .set("kappa_s", self.kappa_s)
            .set("v", self.v)
            .set("beta", self.beta)
            .set("agent", self.agent)
            .set("u", self.u.map(|u| u.to_string()).unwrap_or_default())
            .set("sigmoid", self.sigmoid.name())
            .set("seed", self.seed)
            .set("dt", self.dt)
            .set("t_end", self.t_end)
            .set("out", self.out.display())
            .set("n_min", self.n_min)
            .set("n_max", self.n_max.map(|n| n.to_string()).unwrap_or_default())
            .set("u_min", self.u_min)
            .set("u_max", self.u_max)
            .set("u_steps", self.u_steps)
            .set("edges", path(&self.edges))
            .set("thresholds", path(&self.thresholds))
            .set("seeds", seeds);
        rec
    }

    /// Config-file text; [`RunConfig::apply_text`] reads it back exactly.
    pub fn to_file_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.record().entries() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// Header record for output files: command name plus all keys.
    pub fn header(&self, profile: Profile) -> ConfigRecord {
        let mut rec = ConfigRecord::new().with("command", profile.name());
        rec.extend(&self.record());
        rec
    }

    /// Upper end of a sweep: the largest `n` with `N > 2n`.
    pub fn resolved_n_max(&self) -> usize {
        self.n_max.unwrap_or((self.total.saturating_sub(1)) / 2)
    }
}

/// Comma-separated list of agent indices.
pub fn parse_list(v: &str) -> Result<Vec<usize>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| format!("bad agent index '{s}'")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for p in [Profile::Simulate, Profile::Sweep, Profile::LtmCompare, Profile::Fig5] {
            let c = RunConfig::defaults(p);
            let mut back = RunConfig::defaults(Profile::Bifurcate);
            back.apply_text(&c.to_file_text()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn comments_and_errors() {
        let mut c = RunConfig::defaults(Profile::Simulate);
        c.apply_text("# hello\n\n N = 13 \nseeds=1, 2\n").unwrap();
        assert_eq!((c.total, c.seeds.clone()), (13, vec![1, 2]));
        assert!(c.apply_text("bogus=1").is_err());
        assert!(c.apply_text("N").is_err());
        assert!(c.apply_text("eps=abc").is_err());
    }
}
