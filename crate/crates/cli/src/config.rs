//! Flat `key = value` run configuration.
//!
//! ```text
//! # market
//! mu0 = 0.06
//! sigma0 = 0.3
//! payoff = digital_call
//! spots = 8, 10, 12
//! contracts = 10, 1, -1
//! ```
//!
//! Lists are comma separated; an item `a:b:step` expands to `a, a + step, ...`
//! up to `b` inclusive.

use std::collections::HashSet;
use std::path::PathBuf;

use shockprice_core::{ModelParams, PayoffKind};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("cannot read config {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },
}

impl ConfigError {
    fn bad(key: &str, value: &str, reason: impl Into<String>) -> Self {
        ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.into(),
        }
    }
}

/// Expanded lists are capped to keep a typo from allocating without bound.
pub const MAX_LIST_LEN: usize = 100_000;

/// Parses a comma-separated list of finite numbers, expanding `a:b:step`.
pub fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err("empty list item".into());
        }
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [x] => out.push(parse_num(x)?),
            [a, b, step] => {
                let (a, b, step) = (parse_num(a)?, parse_num(b)?, parse_num(step)?);
                if step <= 0.0 || b < a {
                    return Err(format!("range `{item}` needs start <= end and a positive step"));
                }
                let count = ((b - a) / step + 1e-9).floor() + 1.0;
                if count > MAX_LIST_LEN as f64 {
                    return Err(format!("range `{item}` is too long"));
                }
                for k in 0..count as usize {
                    out.push(a + k as f64 * step);
                }
            }
            _ => return Err(format!("cannot parse list item `{item}`")),
        }
        if out.len() > MAX_LIST_LEN {
            return Err("list is too long".into());
        }
    }
    Ok(out)
}

fn parse_num(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{}` is not a number", s.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{}` is not finite", s.trim()))
    }
}

fn parse_count(key: &str, s: &str) -> Result<usize, ConfigError> {
    s.parse::<usize>()
        .map_err(|_| ConfigError::bad(key, s, "expected a nonnegative integer"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub payoff: PayoffKind,
    pub strike: f64,
    pub spots: Vec<f64>,
    /// Signed contract counts: positive buys, negative writes.
    pub contracts: Vec<f64>,
    /// Time steps of the finite-difference grid; `None` means 2000 per year.
    pub n_steps: Option<usize>,
    /// Half-width of the log-price domain in standard deviations.
    pub width_sd: f64,
    pub paths: usize,
    pub seed: u64,
    pub antithetic: bool,
    /// Calendar times of the `ttm` horizon sweep.
    pub times: Vec<f64>,
    /// Spot of the `ttm` horizon sweep.
    pub ttm_spot: f64,
    /// Calendar time of the `hedge` report.
    pub hedge_time: f64,
    /// Time-step counts of the `converge` ladder.
    pub ladder: Vec<usize>,
    /// Time steps of the PDE side of the Monte Carlo comparison.
    pub mc_steps: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ModelParams::default(),
            payoff: PayoffKind::VanillaCall,
            strike: 10.0,
            spots: vec![8.0, 10.0, 12.0],
            contracts: vec![10.0, 5.0, 1.0, -1.0, -5.0, -10.0],
            n_steps: None,
            width_sd: 6.0,
            paths: 1_000_000,
            seed: 2013,
            antithetic: false,
            times: vec![0.0, 0.25, 0.5, 0.75],
            ttm_spot: 10.0,
            hedge_time: 0.0,
            ladder: vec![500, 1000, 2000, 4000],
            mc_steps: 32000,
            out: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "mu0",
    "sigma0",
    "nu01",
    "nu10",
    "gamma",
    "T",
    "K",
    "payoff",
    "spots",
    "contracts",
    "nsteps",
    "width",
    "paths",
    "seed",
    "antithetic",
    "times",
    "ttm_spot",
    "hedge_time",
    "ladder",
    "mc_steps",
    "out",
];

impl RunConfig {
    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: body.to_string(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let num = || parse_num(value).map_err(|r| ConfigError::bad(key, value, r));
        let list = || parse_list(value).map_err(|r| ConfigError::bad(key, value, r));
        match key {
            "mu0" => self.params.mu0 = num()?,
            "sigma0" => self.params.sigma0 = num()?,
            "nu01" => self.params.nu01 = num()?,
            "nu10" => self.params.nu10 = num()?,
            "gamma" => self.params.gamma = num()?,
            "T" => self.params.maturity = num()?,
            "K" => self.strike = num()?,
            "payoff" => {
                self.payoff = value
                    .parse()
                    .map_err(|e: shockprice_core::Error| ConfigError::bad(key, value, e.to_string()))?
            }
            "spots" => self.spots = list()?,
            "contracts" => self.contracts = list()?,
            "nsteps" => self.n_steps = Some(parse_count(key, value)?),
            "width" => self.width_sd = num()?,
            "paths" => self.paths = parse_count(key, value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| ConfigError::bad(key, value, "expected an unsigned 64-bit integer"))?
            }
            "antithetic" => {
                self.antithetic = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(ConfigError::bad(key, value, "expected true or false")),
                }
            }
            "times" => self.times = list()?,
            "ttm_spot" => self.ttm_spot = num()?,
            "hedge_time" => self.hedge_time = num()?,
            "ladder" => {
                self.ladder = list()?
                    .into_iter()
                    .map(|v| {
                        if v >= 1.0 && v.fract() == 0.0 && v <= 1e7 {
                            Ok(v as usize)
                        } else {
                            Err(ConfigError::bad(key, value, "steps must be positive integers"))
                        }
                    })
                    .collect::<Result<_, _>>()?
            }
            "mc_steps" => self.mc_steps = parse_count(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line: 0,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Cross-key checks; runs after parsing and after command-line overrides.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.params;
        let checks: [(&str, f64, bool, &str); 8] = [
            ("sigma0", p.sigma0, p.sigma0 > 0.0, "must be positive"),
            ("nu01", p.nu01, p.nu01 >= 0.0, "must be nonnegative"),
            ("nu10", p.nu10, p.nu10 > 0.0, "must be positive"),
            ("gamma", p.gamma, p.gamma > 0.0, "must be positive"),
            ("T", p.maturity, p.maturity > 0.0, "must be positive"),
            ("K", self.strike, self.strike > 0.0, "must be positive"),
            ("width", self.width_sd, self.width_sd > 0.0, "must be positive"),
            ("ttm_spot", self.ttm_spot, self.ttm_spot > 0.0, "must be positive"),
        ];
        for (key, v, ok, reason) in checks {
            if !ok {
                return Err(ConfigError::bad(key, &v.to_string(), reason));
            }
        }
        if self.spots.is_empty() || self.spots.iter().any(|&s| s <= 0.0) {
            return Err(ConfigError::bad(
                "spots",
                &fmt_list(&self.spots),
                "spots must be positive",
            ));
        }
        if self.contracts.is_empty() || self.contracts.contains(&0.0) {
            return Err(ConfigError::bad(
                "contracts",
                &fmt_list(&self.contracts),
                "contract counts must be nonzero",
            ));
        }
        if self.n_steps == Some(0) {
            return Err(ConfigError::bad("nsteps", "0", "must be positive"));
        }
        if self.mc_steps == 0 {
            return Err(ConfigError::bad("mc_steps", "0", "must be positive"));
        }
        if self.times.iter().any(|&t| t < 0.0 || t >= p.maturity) {
            return Err(ConfigError::bad(
                "times",
                &fmt_list(&self.times),
                "times must lie in [0, T)",
            ));
        }
        if !(self.hedge_time >= 0.0 && self.hedge_time < p.maturity) {
            return Err(ConfigError::bad(
                "hedge_time",
                &self.hedge_time.to_string(),
                "must lie in [0, T)",
            ));
        }
        if self.ladder.is_empty() {
            return Err(ConfigError::bad("ladder", "", "needs at least one entry"));
        }
        Ok(())
    }
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
