//! Flat key-value configuration.
//!
//! A config file is TOML read as a flat list of dotted keys, so
//! `sampling.edge_fraction = 0.3` and a `[sampling]` table with
//! `edge_fraction = 0.3` mean the same. `--set key=value` flags are applied
//! after the file.

use std::collections::BTreeMap;
use std::path::Path;

use wugs::sampling::WordFlagConfig;
use wugs::{seed, AnnealConfig, NoiseModel, SamplingConfig};

#[derive(Clone, Debug)]
pub struct Settings {
    pub seed: u64,
    pub sampling: SamplingConfig,
    pub anneal: AnnealConfig,
    pub noise: NoiseModel,
    pub flags: WordFlagConfig,
    pub change_k: usize,
    pub change_n: usize,
    pub allow_ad_hoc: bool,
    pub admin_tokens: Vec<String>,
    /// Annotator name to token.
    pub annotator_tokens: BTreeMap<String, String>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: 0,
            sampling: SamplingConfig::default(),
            anneal: AnnealConfig::default(),
            noise: NoiseModel::noise_free(0),
            flags: WordFlagConfig::default(),
            change_k: 2,
            change_n: 0,
            allow_ad_hoc: true,
            admin_tokens: Vec::new(),
            annotator_tokens: BTreeMap::new(),
        }
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn float(key: &str, v: &toml::Value) -> Result<f64, String> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(format!("`{key}` expects a number")),
    }
}

fn int(key: &str, v: &toml::Value) -> Result<u64, String> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(format!("`{key}` expects a non-negative integer")),
    }
}

fn boolean(key: &str, v: &toml::Value) -> Result<bool, String> {
    v.as_bool()
        .ok_or_else(|| format!("`{key}` expects true or false"))
}

fn string(key: &str, v: &toml::Value) -> Result<String, String> {
    v.as_str()
        .map(str::to_owned)
        .ok_or_else(|| format!("`{key}` expects a string"))
}

impl Settings {
    /// Defaults, then the file, then the `--set` overrides.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, String> {
        let mut s = Settings::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let table: toml::Table = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            let mut pairs = Vec::new();
            flatten("", &table, &mut pairs);
            for (k, v) in pairs {
                s.set(&k, &v)?;
            }
        }
        for o in overrides {
            let (k, raw) = o
                .split_once('=')
                .ok_or_else(|| format!("`--set {o}` is not key=value"))?;
            let k = k.trim();
            let v = format!("v = {}", raw.trim())
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.trim().to_owned()));
            s.set(k, &v)?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, v: &toml::Value) -> Result<(), String> {
        match key {
            "seed" => self.seed = int(key, v)?,
            "sampling.node_fraction_round1" => self.sampling.node_fraction_round1 = float(key, v)?,
            "sampling.edge_fraction" => self.sampling.edge_fraction = float(key, v)?,
            "sampling.corroboration_count" => self.sampling.corroboration_count = int(key, v)? as usize,
            "sampling.multi_annotation_fraction" => self.sampling.multi_annotation_fraction = float(key, v)?,
            "anneal.k_min" => {
                let hi = *self.anneal.max_clusters.end();
                self.anneal.max_clusters = int(key, v)? as usize..=hi;
            }
            "anneal.k_max" => {
                let lo = *self.anneal.max_clusters.start();
                self.anneal.max_clusters = lo..=int(key, v)? as usize;
            }
            "anneal.restarts_per_k" => self.anneal.restarts_per_k = int(key, v)? as usize,
            "anneal.heuristic_start" => self.anneal.heuristic_start = boolean(key, v)?,
            "anneal.initial_temperature" => self.anneal.initial_temperature = float(key, v)?,
            "anneal.cooling_factor" => self.anneal.cooling_factor = float(key, v)?,
            "anneal.max_iterations" => self.anneal.max_iterations = int(key, v)? as usize,
            "noise.p_deviate" => self.noise.p_deviate = float(key, v)?,
            "noise.p_zero" => self.noise.p_zero = float(key, v)?,
            "flags.max_zero_share" => self.flags.max_zero_share = float(key, v)?,
            "flags.max_pending_pairs" => self.flags.max_pending_pairs = Some(int(key, v)? as usize),
            "change.k" => self.change_k = int(key, v)? as usize,
            "change.n" => self.change_n = int(key, v)? as usize,
            "project.allow_ad_hoc" => self.allow_ad_hoc = boolean(key, v)?,
            "auth.admin" => self.admin_tokens.push(string(key, v)?),
            _ => match key.strip_prefix("auth.annotator.") {
                Some(name) if !name.is_empty() => {
                    self.annotator_tokens.insert(name.to_owned(), string(key, v)?);
                }
                _ => return Err(format!("unknown setting `{key}`")),
            },
        }
        Ok(())
    }

    /// Component seeds derived from the run seed.
    pub fn seeded(&self) -> (SamplingConfig, AnnealConfig, NoiseModel) {
        (
            self.sampling.clone().with_seed(seed::derive(self.seed, &[1])),
            self.anneal.clone().with_seed(seed::derive(self.seed, &[2])),
            NoiseModel {
                seed: seed::derive(self.seed, &[3]),
                ..self.noise.clone()
            },
        )
    }

    /// Every effective setting as text; tokens are masked.
    pub fn flat(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_owned(), v);
        };
        put("seed", self.seed.to_string());
        put(
            "sampling.node_fraction_round1",
            self.sampling.node_fraction_round1.to_string(),
        );
        put("sampling.edge_fraction", self.sampling.edge_fraction.to_string());
        put(
            "sampling.corroboration_count",
            self.sampling.corroboration_count.to_string(),
        );
        put(
            "sampling.multi_annotation_fraction",
            self.sampling.multi_annotation_fraction.to_string(),
        );
        put("anneal.k_min", self.anneal.max_clusters.start().to_string());
        put("anneal.k_max", self.anneal.max_clusters.end().to_string());
        put("anneal.restarts_per_k", self.anneal.restarts_per_k.to_string());
        put("anneal.heuristic_start", self.anneal.heuristic_start.to_string());
        put(
            "anneal.initial_temperature",
            self.anneal.initial_temperature.to_string(),
        );
        put("anneal.cooling_factor", self.anneal.cooling_factor.to_string());
        put("anneal.max_iterations", self.anneal.max_iterations.to_string());
        put("noise.p_deviate", self.noise.p_deviate.to_string());
        put("noise.p_zero", self.noise.p_zero.to_string());
        put("flags.max_zero_share", self.flags.max_zero_share.to_string());
        put(
            "flags.max_pending_pairs",
            self.flags
                .max_pending_pairs
                .map_or("none".into(), |v| v.to_string()),
        );
        put("change.k", self.change_k.to_string());
        put("change.n", self.change_n.to_string());
        put("project.allow_ad_hoc", self.allow_ad_hoc.to_string());
        for _ in &self.admin_tokens {
            put("auth.admin", "***".into());
        }
        for name in self.annotator_tokens.keys() {
            put(&format!("auth.annotator.{name}"), "***".into());
        }
        m
    }
}
