use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Hyperparameters, McmcConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Contents of a run-configuration file (`key = value` per line).
///
/// Unset hyperparameters fall back to the simulation-study defaults; the
/// dataset-dependent ones (`delta`, `alpha_spike`) are resolved against a
/// [`Dataset`] by [`RunConfig::hyperparameters`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mcmc: McmcConfig,
    /// Explicit Dirichlet prior on τ; `None` means 1/G per cluster.
    pub delta: Option<Vec<f64>>,
    pub mu_a: f64,
    pub sigma2_a: f64,
    pub a_delta0: f64,
    pub b_delta0: f64,
    pub sigma2_delta1: f64,
    pub a_tilde: f64,
    pub b_tilde: f64,
    pub alpha_slab: f64,
    /// Spike concentration used for every level of variables without an override.
    pub alpha_spike: f64,
    pub alpha_spike_by_variable: BTreeMap<String, Vec<f64>>,
    pub a_p1: f64,
    pub b_p1: f64,
    pub a_p2: f64,
    pub b_p2: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mcmc: McmcConfig::default(),
            delta: None,
            mu_a: 0.0,
            sigma2_a: 100.0,
            a_delta0: 2.0,
            b_delta0: 1e-4,
            sigma2_delta1: 1000.0,
            a_tilde: 2.0,
            b_tilde: 1.0,
            alpha_slab: 1.0,
            alpha_spike: 10.0,
            alpha_spike_by_variable: BTreeMap::new(),
            a_p1: 1.0,
            b_p1: 2.0,
            a_p2: 1.0,
            b_p2: 2.0,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse().map_err(|_| Error::Config(format!("`{key}`: `{v}` is not a number")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|x| parse_f64(key, x.trim())).collect()
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| Error::Config(format!("`{key}`: `{v}` is not a non-negative integer")))
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "clusters" | "G" => self.mcmc.clusters = parse_usize(key, v)?,
            "iterations" | "T" => self.mcmc.iterations = parse_usize(key, v)?,
            "burn_in" | "B" => self.mcmc.burn_in = parse_usize(key, v)?,
            "thin" | "k" => self.mcmc.thin = parse_usize(key, v)?,
            "seed" => self.mcmc.seed = v.parse().map_err(|_| Error::Config(format!("bad seed `{v}`")))?,
            "parallel" => {
                self.mcmc.parallel = v.parse().map_err(|_| Error::Config(format!("`parallel`: `{v}` is not a bool")))?
            }
            "delta" => self.delta = Some(parse_list(key, v)?),
            "mu_a" => self.mu_a = parse_f64(key, v)?,
            "sigma2_a" => self.sigma2_a = parse_f64(key, v)?,
            "a_delta0" => self.a_delta0 = parse_f64(key, v)?,
            "b_delta0" => self.b_delta0 = parse_f64(key, v)?,
            "sigma2_delta1" => self.sigma2_delta1 = parse_f64(key, v)?,
            "a_tilde" => self.a_tilde = parse_f64(key, v)?,
            "b_tilde" => self.b_tilde = parse_f64(key, v)?,
            "alpha_slab" => self.alpha_slab = parse_f64(key, v)?,
            "alpha_spike" => self.alpha_spike = parse_f64(key, v)?,
            "a_p1" => self.a_p1 = parse_f64(key, v)?,
            "b_p1" => self.b_p1 = parse_f64(key, v)?,
            "a_p2" => self.a_p2 = parse_f64(key, v)?,
            "b_p2" => self.b_p2 = parse_f64(key, v)?,
            other => match other.strip_prefix("alpha_spike.") {
                Some(var) if !var.is_empty() => {
                    self.alpha_spike_by_variable.insert(var.to_string(), parse_list(key, v)?);
                }
                _ => return Err(Error::Config(format!("unknown key `{other}`"))),
            },
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_text(&self) -> String {
        let m = &self.mcmc;
        let mut s = String::new();
        let _ = writeln!(s, "clusters = {}", m.clusters);
        let _ = writeln!(s, "iterations = {}", m.iterations);
        let _ = writeln!(s, "burn_in = {}", m.burn_in);
        let _ = writeln!(s, "thin = {}", m.thin);
        let _ = writeln!(s, "seed = {}", m.seed);
        let _ = writeln!(s, "parallel = {}", m.parallel);
        if let Some(d) = &self.delta {
            let _ = writeln!(s, "delta = {}", join(d));
        }
        for (k, v) in [
            ("mu_a", self.mu_a),
            ("sigma2_a", self.sigma2_a),
            ("a_delta0", self.a_delta0),
            ("b_delta0", self.b_delta0),
            ("sigma2_delta1", self.sigma2_delta1),
            ("a_tilde", self.a_tilde),
            ("b_tilde", self.b_tilde),
            ("alpha_slab", self.alpha_slab),
            ("alpha_spike", self.alpha_spike),
            ("a_p1", self.a_p1),
            ("b_p1", self.b_p1),
            ("a_p2", self.a_p2),
            ("b_p2", self.b_p2),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        for (var, a) in &self.alpha_spike_by_variable {
            let _ = writeln!(s, "alpha_spike.{var} = {}", join(a));
        }
        s
    }

    pub fn hyperparameters(&self, ds: &Dataset) -> Result<Hyperparameters> {
        let g = self.mcmc.clusters;
        let delta = match &self.delta {
            Some(d) if d.len() == 1 => vec![d[0]; g],
            Some(d) => d.clone(),
            None => vec![1.0 / g as f64; g],
        };
        if delta.len() != g {
            return Err(Error::Config(format!("delta has {} entries for {g} clusters", delta.len())));
        }
        for var in self.alpha_spike_by_variable.keys() {
            let known = (0..ds.m() - ds.q()).any(|k| &ds.categorical_schema(k).name == var);
            if !known {
                return Err(Error::Config(format!("alpha_spike.{var}: no categorical variable `{var}`")));
            }
        }
        let alpha_spike = (0..ds.m() - ds.q())
            .map(|k| {
                let col = ds.categorical_schema(k);
                self.alpha_spike_by_variable
                    .get(&col.name)
                    .cloned()
                    .unwrap_or_else(|| vec![self.alpha_spike; col.levels.len()])
            })
            .collect();
        let hp = Hyperparameters {
            delta,
            mu_a: self.mu_a,
            sigma2_a: self.sigma2_a,
            a_delta0: self.a_delta0,
            b_delta0: self.b_delta0,
            sigma2_delta1: self.sigma2_delta1,
            a_tilde: self.a_tilde,
            b_tilde: self.b_tilde,
            alpha_slab: self.alpha_slab,
            alpha_spike,
            a_p1: self.a_p1,
            b_p1: self.b_p1,
            a_p2: self.a_p2,
            b_p2: self.b_p2,
        };
        hp.validate(ds)?;
        Ok(hp)
    }
}
