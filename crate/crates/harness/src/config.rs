//! Line-oriented `key = value` experiment files.
//!
//! ```text
//! # clique scaling
//! family = clique
//! n = 32, 64, 128
//! alpha = 0, 1, 5
//! wake = single
//! seeds = 30
//! ```
//!
//! Lists are comma separated. `#` starts a comment. Unknown keys are errors.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use qwake_core::{MessageConvention, RunParams, SearchConfig};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given twice")]
    Duplicate(String),
    #[error("invalid value for `{key}`: {msg}")]
    Value { key: String, msg: String },
}

fn bad(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value { key: key.to_string(), msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Clique,
    Random(f64),
    Path,
    HiddenMatching,
}

impl Family {
    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Clique => f.write_str("clique"),
            Self::Random(p) => write!(f, "random({p})"),
            Self::Path => f.write_str("path"),
            Self::HiddenMatching => f.write_str("hidden-matching"),
        }
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clique" => Ok(Self::Clique),
            "path" => Ok(Self::Path),
            "hidden-matching" => Ok(Self::HiddenMatching),
            _ => {
                let p = s
                    .strip_prefix("random(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| format!("unknown family `{s}`"))?;
                let p: f64 = p.parse().map_err(|_| format!("bad edge probability `{p}`"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(format!("edge probability {p} outside [0, 1]"));
                }
                Ok(Self::Random(p))
            }
        }
    }
}

/// An advice budget, or `log` for `floor(log2 n)` of the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaSpec {
    Fixed(u32),
    Log2N,
}

impl AlphaSpec {
    pub fn resolve(self, n: usize) -> u32 {
        match self {
            Self::Fixed(a) => a,
            Self::Log2N => (n.max(1) as f64).log2().floor() as u32,
        }
    }
}

impl fmt::Display for AlphaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed(a) => write!(f, "{a}"),
            Self::Log2N => f.write_str("log"),
        }
    }
}

impl FromStr for AlphaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "log" {
            return Ok(Self::Log2N);
        }
        s.parse().map(Self::Fixed).map_err(|_| format!("bad advice budget `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WakeRule {
    Single,
    RandomK(usize),
    All,
}

impl fmt::Display for WakeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Single => f.write_str("single"),
            Self::RandomK(k) => write!(f, "random({k})"),
            Self::All => f.write_str("all"),
        }
    }
}

impl FromStr for WakeRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Self::Single),
            "all" => Ok(Self::All),
            _ => {
                let k = s
                    .strip_prefix("random(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| format!("unknown wake rule `{s}`"))?;
                match k.parse() {
                    Ok(k) if k > 0 => Ok(Self::RandomK(k)),
                    _ => Err(format!("bad wake count `{k}`")),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub families: Vec<Family>,
    pub n: Vec<usize>,
    pub alpha: Vec<AlphaSpec>,
    pub wake: WakeRule,
    pub seeds: u32,
    pub seed: u64,
    pub convention: MessageConvention,
    pub c_tau: f64,
    /// Confidence exponent of a single search.
    pub search_c: f64,
    /// Constant of the iterated-search budget.
    pub c_prime: f64,
    pub run_cap: f64,
    pub growth: f64,
    pub jobs: usize,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let search = SearchConfig::default();
        Self {
            families: vec![Family::Clique],
            n: vec![16],
            alpha: vec![AlphaSpec::Fixed(0)],
            wake: WakeRule::Single,
            seeds: 1,
            seed: 1,
            convention: MessageConvention::default(),
            c_tau: RunParams::default().c_tau,
            search_c: search.confidence,
            c_prime: search.iterated_constant,
            run_cap: search.run_cap,
            growth: search.growth,
            jobs: 1,
            output: PathBuf::from("sweep.csv"),
        }
    }
}

const KEYS: &[&str] = &[
    "family", "n", "alpha", "wake", "seeds", "seed", "convention", "c_tau", "search_c", "c_prime", "run_cap",
    "growth", "jobs", "output",
];

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| bad(key, e.to_string())))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(bad(key, "empty list"));
    }
    Ok(items)
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| bad(key, e.to_string()))
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: idx + 1, msg: "expected key = value".into() })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey(key.to_string()));
            }
            if seen.contains(&key) {
                return Err(ConfigError::Duplicate(key.to_string()));
            }
            seen.push(key);
            match key {
                "family" => cfg.families = list(key, value)?,
                "n" => cfg.n = list(key, value)?,
                "alpha" => cfg.alpha = list(key, value)?,
                "wake" => cfg.wake = scalar(key, value)?,
                "seeds" => cfg.seeds = scalar(key, value)?,
                "seed" => cfg.seed = scalar(key, value)?,
                "convention" => cfg.convention = scalar(key, value)?,
                "c_tau" => cfg.c_tau = scalar(key, value)?,
                "search_c" => cfg.search_c = scalar(key, value)?,
                "c_prime" => cfg.c_prime = scalar(key, value)?,
                "run_cap" => cfg.run_cap = scalar(key, value)?,
                "growth" => cfg.growth = scalar(key, value)?,
                "jobs" => cfg.jobs = scalar(key, value)?,
                "output" => cfg.output = PathBuf::from(value),
                _ => unreachable!(),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for &n in &self.n {
            if n < 2 {
                return Err(bad("n", format!("{n} is below 2")));
            }
            if self.families.contains(&Family::HiddenMatching) && n % 2 == 1 {
                return Err(bad("n", format!("hidden-matching needs an even number of centres, got {n}")));
            }
            if let WakeRule::RandomK(k) = self.wake {
                if k > n {
                    return Err(bad("wake", format!("{k} awake nodes exceed n = {n}")));
                }
            }
        }
        if self.seeds == 0 {
            return Err(bad("seeds", "need at least one seed"));
        }
        if self.jobs == 0 {
            return Err(bad("jobs", "need at least one worker"));
        }
        for (key, v) in [("c_tau", self.c_tau), ("search_c", self.search_c), ("c_prime", self.c_prime), ("run_cap", self.run_cap)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(key, format!("{v} is not positive")));
            }
        }
        if !(self.growth.is_finite() && self.growth > 1.0) {
            return Err(bad("growth", format!("{} must exceed 1", self.growth)));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("family", join(&self.families));
        put("n", join(&self.n));
        put("alpha", join(&self.alpha));
        put("wake", self.wake.to_string());
        put("seeds", self.seeds.to_string());
        put("seed", self.seed.to_string());
        put("convention", self.convention.name().to_string());
        put("c_tau", self.c_tau.to_string());
        put("search_c", self.search_c.to_string());
        put("c_prime", self.c_prime.to_string());
        put("run_cap", self.run_cap.to_string());
        put("growth", self.growth.to_string());
        put("jobs", self.jobs.to_string());
        put("output", self.output.display().to_string());
        s
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            run_cap: self.run_cap,
            growth: self.growth,
            confidence: self.search_c,
            iterated_constant: self.c_prime,
            convention: self.convention,
            ..SearchConfig::default()
        }
    }

    pub fn run_params(&self) -> RunParams {
        RunParams { search: self.search_config(), c_tau: self.c_tau, ..RunParams::default() }
    }
}
