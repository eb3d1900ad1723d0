//! Plain-text experiment configuration.
//!
//! One `key = value` per line, `#` starts a comment, keys carry a dotted
//! section prefix and lists are bracketed and comma-separated:
//!
//! ```text
//! model.epsilon = 0.5
//! model.weights = [3, 1]
//! arrival.kind = uniform
//! experiment.policies = [dmra(20), maxmining, randmining]
//! experiment.seeds = [1, 2, 3]
//! sweep.k = [5, 10, 20, 40]
//! ```
//!
//! Omitted keys take the default model: four miners, CPU cap 60 at weight 3,
//! electricity cap 3 at weight 1, `ε = 0.5`, `V = 3`, `R = 3`, `M = 0`, linear
//! cost slope 0.45, uniform arrivals on `[50, 200]`, `K = 20`, 200 slots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dmra_core::{ArrivalSpec, PolicySpec, ResourceVector, SystemParams};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: `{key}`: {message}")]
    Type {
        line: usize,
        key: String,
        message: String,
    },
    /// `line` is 0 when the offending key was not set explicitly.
    #[error("line {line}: `{key}`: {message}")]
    Invalid {
        line: usize,
        key: String,
        message: String,
    },
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    pub arrival: ArrivalSpec,
    pub policies: Vec<PolicySpec>,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub k_sweep: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            arrival: ArrivalSpec::default(),
            policies: vec![
                PolicySpec::Dmra { k: 20.0 },
                PolicySpec::MaxMining,
                PolicySpec::RandMining,
            ],
            horizon: 200,
            seeds: vec![1],
            k_sweep: None,
            output_dir: None,
            workers: 1,
        }
    }
}

const KEYS: &[&str] = &[
    "model.n_miners",
    "model.n_resources",
    "model.weights",
    "model.epsilon",
    "model.block_size",
    "model.reward_fixed",
    "model.reward_fees",
    "model.theta_max",
    "model.cost_slope",
    "model.cost_intercept",
    "model.a_max",
    "model.s_max",
    "arrival.kind",
    "arrival.lo",
    "arrival.hi",
    "arrival.value",
    "arrival.p",
    "arrival.batch",
    "experiment.policies",
    "experiment.horizon",
    "experiment.seeds",
    "experiment.output_dir",
    "experiment.workers",
    "sweep.k",
];

struct Entry {
    line: usize,
    value: String,
}

struct Entries(BTreeMap<String, Entry>);

impl Entries {
    fn line(&self, key: &str) -> usize {
        self.0.get(key).map_or(0, |e| e.line)
    }

    fn type_err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Type {
            line: self.line(key),
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            line: self.line(key),
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|e| e.value.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| self.type_err(key, format!("expected {what}, got `{v}`")))
            })
            .transpose()
    }

    fn list<T: std::str::FromStr>(
        &self,
        key: &str,
        what: &str,
    ) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(raw) = self.raw(key) else {
            return Ok(None);
        };
        let items =
            split_list(raw).ok_or_else(|| self.type_err(key, "expected a bracketed list"))?;
        items
            .iter()
            .map(|item| {
                item.parse::<T>()
                    .map_err(|_| self.type_err(key, format!("expected {what}, got `{item}`")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

/// Splits `[a, f(b, c), d]` at top-level commas.
fn split_list(raw: &str) -> Option<Vec<String>> {
    let inner = raw.trim().strip_prefix('[')?.strip_suffix(']')?;
    let mut items = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    for ch in inner.chars() {
        match ch {
            '(' => {
                depth += 1;
                current.push(ch);
            }
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return None;
                }
                current.push(ch);
            }
            ',' if depth == 0 => items.push(std::mem::take(&mut current)),
            _ => current.push(ch),
        }
    }
    if depth != 0 {
        return None;
    }
    items.push(current);
    let items: Vec<String> = items.into_iter().map(|s| s.trim().to_string()).collect();
    if items.len() == 1 && items[0].is_empty() {
        return Some(Vec::new());
    }
    if items.iter().any(String::is_empty) {
        return None;
    }
    Some(items)
}

/// Parses `dmra(20)`, `dmra_varying(20)`, `maxmining`, `randmining`,
/// `static(30, 1.5)`.
pub fn parse_policy(text: &str) -> Result<PolicySpec, String> {
    let text = text.trim();
    let (name, args) = match text.find('(') {
        Some(open) => {
            let close = text
                .strip_suffix(')')
                .ok_or_else(|| format!("unbalanced parentheses in `{text}`"))?;
            (&text[..open], Some(&close[open + 1..]))
        }
        None => (text, None),
    };
    let numbers = |args: Option<&str>| -> Result<Vec<f64>, String> {
        let args = args.ok_or_else(|| format!("`{name}` needs arguments"))?;
        args.split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad number `{}` in `{text}`", a.trim()))
            })
            .collect()
    };
    let single = |args| -> Result<f64, String> {
        match numbers(args)?.as_slice() {
            [x] => Ok(*x),
            _ => Err(format!("`{name}` takes exactly one argument")),
        }
    };
    match name.trim().to_ascii_lowercase().as_str() {
        "dmra" => Ok(PolicySpec::Dmra { k: single(args)? }),
        "dmra_varying" => Ok(PolicySpec::DmraVaryingK { k0: single(args)? }),
        "maxmining" if args.is_none() => Ok(PolicySpec::MaxMining),
        "randmining" if args.is_none() => Ok(PolicySpec::RandMining),
        "static" => Ok(PolicySpec::Static {
            theta: ResourceVector::new(numbers(args)?),
        }),
        _ => Err(format!("unknown policy `{text}`")),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or(ConfigError::Syntax { line })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            let entry = Entry {
                line,
                value: value.to_string(),
            };
            if entries.insert(key.to_string(), entry).is_some() {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
        }
        Self::from_entries(&Entries(entries))
    }

    fn from_entries(e: &Entries) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let p = &mut cfg.params;

        if let Some(v) = e.list::<f64>("model.weights", "a number")? {
            p.weights = v;
        }
        if let Some(v) = e.list::<f64>("model.theta_max", "a number")? {
            p.theta_max = ResourceVector::new(v);
        }
        p.n_resources = e
            .parse("model.n_resources", "a positive integer")?
            .unwrap_or(p.weights.len());
        if let Some(v) = e.parse("model.n_miners", "a positive integer")? {
            p.n_miners = v;
        }
        if let Some(v) = e.parse("model.epsilon", "a number")? {
            p.epsilon = v;
        }
        if let Some(v) = e.parse("model.block_size", "a positive integer")? {
            p.block_size = v;
        }
        if let Some(v) = e.parse("model.reward_fixed", "a number")? {
            p.reward_fixed = v;
        }
        if let Some(v) = e.parse("model.reward_fees", "a number")? {
            p.reward_fees = v;
        }
        if let Some(v) = e.parse("model.cost_slope", "a number")? {
            p.cost_slope = v;
        }
        if let Some(v) = e.parse("model.cost_intercept", "a number")? {
            p.cost_intercept = v;
        }
        if let Some(v) = e.parse("model.a_max", "a positive integer")? {
            p.a_max = v;
        }
        if let Some(v) = e.parse("model.s_max", "a positive integer")? {
            p.s_max = v;
        }

        cfg.arrival = parse_arrival(e)?;

        if let Some(raw) = e.raw("experiment.policies") {
            let items = split_list(raw)
                .ok_or_else(|| e.type_err("experiment.policies", "expected a bracketed list"))?;
            cfg.policies = items
                .iter()
                .map(|item| parse_policy(item).map_err(|m| e.type_err("experiment.policies", m)))
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = e.parse("experiment.horizon", "a positive integer")? {
            cfg.horizon = v;
        }
        if let Some(v) = e.list("experiment.seeds", "a non-negative integer")? {
            cfg.seeds = v;
        }
        cfg.output_dir = e.raw("experiment.output_dir").map(PathBuf::from);
        if let Some(v) = e.parse("experiment.workers", "a positive integer")? {
            cfg.workers = v;
        }
        cfg.k_sweep = e.list("sweep.k", "a number")?;

        cfg.validate_with(e)?;
        Ok(cfg)
    }

    /// Re-checks every invariant; useful after command-line overrides.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_with(&Entries(BTreeMap::new()))
    }

    fn validate_with(&self, e: &Entries) -> Result<(), ConfigError> {
        if let Err(err) = self.params.validate() {
            let key = match &err {
                dmra_core::Error::InvalidParam { name, .. } => match *name {
                    "reward" => "model.reward_fixed".to_string(),
                    "cost" => "model.cost_slope".to_string(),
                    other => format!("model.{other}"),
                },
                dmra_core::Error::DimensionMismatch { .. } => "model.n_resources".to_string(),
                _ => "model".to_string(),
            };
            return Err(e.invalid(&key, err.to_string()));
        }
        if let Err(err) = self.arrival.validate(self.params.a_max) {
            let key = if self.arrival.upper_support() > self.params.a_max {
                "model.a_max"
            } else {
                "arrival.kind"
            };
            return Err(e.invalid(key, err.to_string()));
        }
        if self.policies.is_empty() {
            return Err(e.invalid("experiment.policies", "at least one policy is required"));
        }
        for policy in &self.policies {
            policy
                .validate(&self.params)
                .map_err(|err| e.invalid("experiment.policies", format!("{policy}: {err}")))?;
        }
        if self.horizon == 0 {
            return Err(e.invalid("experiment.horizon", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(e.invalid("experiment.seeds", "at least one seed is required"));
        }
        if self.workers == 0 {
            return Err(e.invalid("experiment.workers", "must be at least 1"));
        }
        if let Some(ks) = &self.k_sweep {
            if ks.is_empty() {
                return Err(e.invalid("sweep.k", "must not be empty"));
            }
            if ks.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
                return Err(e.invalid("sweep.k", "entries must be strictly positive"));
            }
            if ks.windows(2).any(|w| w[0] >= w[1]) {
                return Err(e.invalid("sweep.k", "entries must be strictly increasing"));
            }
        }
        Ok(())
    }

    /// Every result-affecting setting, defaults included, as a config file
    /// with keys in sorted order. Output location and worker count are not
    /// included.
    pub fn canonical(&self) -> String {
        let p = &self.params;
        let mut keys: BTreeMap<&str, String> = BTreeMap::new();
        keys.insert("model.n_miners", p.n_miners.to_string());
        keys.insert("model.n_resources", p.n_resources.to_string());
        keys.insert("model.weights", list(&p.weights));
        keys.insert("model.epsilon", p.epsilon.to_string());
        keys.insert("model.block_size", p.block_size.to_string());
        keys.insert("model.reward_fixed", p.reward_fixed.to_string());
        keys.insert("model.reward_fees", p.reward_fees.to_string());
        keys.insert("model.theta_max", list(p.theta_max.as_slice()));
        keys.insert("model.cost_slope", p.cost_slope.to_string());
        keys.insert("model.cost_intercept", p.cost_intercept.to_string());
        keys.insert("model.a_max", p.a_max.to_string());
        keys.insert("model.s_max", p.s_max.to_string());
        match &self.arrival {
            ArrivalSpec::UniformInt { lo, hi } => {
                keys.insert("arrival.kind", "uniform".into());
                keys.insert("arrival.lo", lo.to_string());
                keys.insert("arrival.hi", hi.to_string());
            }
            ArrivalSpec::Constant(v) => {
                keys.insert("arrival.kind", "constant".into());
                keys.insert("arrival.value", v.to_string());
            }
            ArrivalSpec::BernoulliBatch { p, batch } => {
                keys.insert("arrival.kind", "bernoulli_batch".into());
                keys.insert("arrival.p", p.to_string());
                keys.insert("arrival.batch", batch.to_string());
            }
        }
        let policies: Vec<String> = self.policies.iter().map(|p| p.to_string()).collect();
        keys.insert("experiment.policies", format!("[{}]", policies.join(", ")));
        keys.insert("experiment.horizon", self.horizon.to_string());
        keys.insert("experiment.seeds", list(&self.seeds));
        if let Some(ks) = &self.k_sweep {
            keys.insert("sweep.k", list(ks));
        }
        let mut out = String::new();
        for (k, v) in keys {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

fn list<T: ToString>(items: &[T]) -> String {
    let parts: Vec<String> = items.iter().map(ToString::to_string).collect();
    format!("[{}]", parts.join(", "))
}

fn parse_arrival(e: &Entries) -> Result<ArrivalSpec, ConfigError> {
    let kind = e
        .raw("arrival.kind")
        .unwrap_or("uniform")
        .to_ascii_lowercase();
    let allowed: &[&str] = match kind.as_str() {
        "uniform" => &["arrival.lo", "arrival.hi"],
        "constant" => &["arrival.value"],
        "bernoulli_batch" => &["arrival.p", "arrival.batch"],
        other => {
            return Err(e.type_err(
                "arrival.kind",
                format!("expected uniform, constant or bernoulli_batch, got `{other}`"),
            ))
        }
    };
    for key in [
        "arrival.lo",
        "arrival.hi",
        "arrival.value",
        "arrival.p",
        "arrival.batch",
    ] {
        if e.raw(key).is_some() && !allowed.contains(&key) {
            return Err(e.invalid(key, format!("not used by arrival kind `{kind}`")));
        }
    }
    Ok(match kind.as_str() {
        "uniform" => ArrivalSpec::UniformInt {
            lo: e
                .parse("arrival.lo", "a non-negative integer")?
                .unwrap_or(50),
            hi: e
                .parse("arrival.hi", "a non-negative integer")?
                .unwrap_or(200),
        },
        "constant" => ArrivalSpec::Constant(
            e.parse("arrival.value", "a non-negative integer")?
                .ok_or_else(|| e.invalid("arrival.value", "required for constant arrivals"))?,
        ),
        _ => ArrivalSpec::BernoulliBatch {
            p: e.parse("arrival.p", "a number")?
                .ok_or_else(|| e.invalid("arrival.p", "required for bernoulli_batch arrivals"))?,
            batch: e
                .parse("arrival.batch", "a non-negative integer")?
                .ok_or_else(|| {
                    e.invalid("arrival.batch", "required for bernoulli_batch arrivals")
                })?,
        },
    })
}
