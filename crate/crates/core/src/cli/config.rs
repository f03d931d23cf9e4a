use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::basis::BasisFamily;
use crate::synthgen::Scenario;

use super::CliError;

/// Keys accepted in a configuration file; flag names with `-` or `_`.
pub const KNOWN_KEYS: [&str; 15] = [
    "basis",
    "l",
    "l-range",
    "max-iter",
    "lattice",
    "replicates",
    "alpha",
    "seed",
    "model",
    "out",
    "plots",
    "scenario",
    "n",
    "m",
    "sigma",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Mle,
    Separation,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Mle => "mle",
            Model::Separation => "separation",
        }
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mle" => Ok(Model::Mle),
            "separation" => Ok(Model::Separation),
            other => Err(format!("unknown model '{other}' (expected mle or separation)")),
        }
    }
}

/// A single trend dimension or an inclusive range to select from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fixed(usize),
    Range(usize, usize),
}

impl Level {
    pub fn parse_range(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| format!("l-range '{s}' is not of the form A..B"))?;
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: usize = a.trim().parse().map_err(|_| format!("bad l-range start in '{s}'"))?;
        let b: usize = b.trim().parse().map_err(|_| format!("bad l-range end in '{s}'"))?;
        if a == 0 || a > b {
            return Err(format!("l-range '{s}' must satisfy 1 <= A <= B"));
        }
        Ok(Level::Range(a, b))
    }
}

/// Settings after merging the config file with command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub family: BasisFamily,
    /// `None` lets each command pick its default.
    pub level: Option<Level>,
    pub max_iter: usize,
    pub lattice: Option<usize>,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    pub model: Model,
    pub out: PathBuf,
    pub plots: bool,
    pub scenario: Scenario,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub sigma: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            family: BasisFamily::ShiftedLegendre,
            level: None,
            max_iter: 20,
            lattice: None,
            replicates: 500,
            alpha: 0.05,
            seed: 0,
            model: Model::Mle,
            out: PathBuf::from("trendwarp-out"),
            plots: false,
            scenario: Scenario::Fig1,
            n: None,
            m: None,
            sigma: None,
        }
    }
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected key = value", lineno + 1))
        })?;
        let key = normalize_key(key);
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!(
                "config line {}: unknown key '{}'",
                lineno + 1,
                key
            )));
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!("invalid value '{value}' for {key}"))),
    }
}

impl RunConfig {
    /// Later pairs override earlier ones; file pairs go first, flags after.
    /// A flag choosing `l` or `l-range` clears both from the file.
    pub fn resolve(file: &[(String, String)], flags: &[(String, String)]) -> Result<Self, CliError> {
        let flag_sets_level = flags.iter().any(|(k, _)| k == "l" || k == "l-range");
        let mut merged: BTreeMap<&str, &str> = BTreeMap::new();
        for (k, v) in file {
            if flag_sets_level && (k == "l" || k == "l-range") {
                continue;
            }
            merged.insert(k, v);
        }
        for (k, v) in flags {
            merged.insert(k, v);
        }
        if merged.contains_key("l") && merged.contains_key("l-range") {
            return Err(CliError::Usage("give either l or l-range, not both".into()));
        }

        let mut cfg = RunConfig::default();
        for (&key, &value) in &merged {
            match key {
                "basis" => {
                    cfg.family = value
                        .parse()
                        .map_err(|e: crate::error::Error| CliError::Usage(e.to_string()))?
                }
                "l" => cfg.level = Some(Level::Fixed(parse(key, value)?)),
                "l-range" => cfg.level = Some(Level::parse_range(value).map_err(CliError::Usage)?),
                "max-iter" => cfg.max_iter = parse(key, value)?,
                "lattice" => cfg.lattice = Some(parse(key, value)?),
                "replicates" => cfg.replicates = parse(key, value)?,
                "alpha" => cfg.alpha = parse(key, value)?,
                "seed" => cfg.seed = parse(key, value)?,
                "model" => cfg.model = value.parse().map_err(CliError::Usage)?,
                "out" => cfg.out = PathBuf::from(value),
                "plots" => cfg.plots = parse_bool(key, value)?,
                "scenario" => {
                    cfg.scenario = value
                        .parse()
                        .map_err(|e: crate::error::Error| CliError::Usage(e.to_string()))?
                }
                "n" => cfg.n = Some(parse(key, value)?),
                "m" => cfg.m = Some(parse(key, value)?),
                "sigma" => cfg.sigma = Some(parse(key, value)?),
                other => return Err(CliError::Usage(format!("unknown key '{other}'"))),
            }
        }
        if cfg.max_iter == 0 {
            return Err(CliError::Usage("max-iter must be positive".into()));
        }
        if let Some(Level::Fixed(0)) = cfg.level {
            return Err(CliError::Usage("l must be at least 1".into()));
        }
        Ok(cfg)
    }
}
