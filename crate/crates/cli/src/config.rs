//! key=value configuration files with flag overrides.
//!
//! A config file holds one `key=value` pair per line; blank lines and
//! lines starting with `#` are ignored. Every key must belong to the
//! active subcommand's documented key set, unknown keys are rejected,
//! and missing required keys are reported together. Command-line flags
//! override file values. The fully resolved configuration is what the
//! run manifest records.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

pub struct Resolver {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
    missing: Vec<&'static str>,
}

impl Resolver {
    pub fn new(config: Option<&Path>, allowed: &[&str]) -> Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            let mut unknown = Vec::new();
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    anyhow!(
                        "{}:{}: expected key=value, got {:?}",
                        path.display(),
                        lineno + 1,
                        line
                    )
                })?;
                let key = key.trim().to_string();
                if !allowed.contains(&key.as_str()) {
                    unknown.push(format!("{} (line {})", key, lineno + 1));
                    continue;
                }
                file.insert(key, value.trim().to_string());
            }
            if !unknown.is_empty() {
                bail!(
                    "unknown configuration keys in {}: {}; allowed keys are {}",
                    path.display(),
                    unknown.join(", "),
                    allowed.join(", ")
                );
            }
        }
        Ok(Self {
            file,
            resolved: BTreeMap::new(),
            missing: Vec::new(),
        })
    }

    fn raw(&mut self, key: &'static str, flag: Option<String>) -> Option<String> {
        let value = flag.or_else(|| self.file.get(key).cloned());
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.clone());
        }
        value
    }

    /// Optional string value with a default.
    pub fn string_or(&mut self, key: &'static str, flag: Option<String>, default: &str) -> String {
        let v = self
            .raw(key, flag)
            .unwrap_or_else(|| default.to_string());
        self.resolved.insert(key.to_string(), v.clone());
        v
    }

    /// Required string value; absence is collected and reported later.
    pub fn string_required(&mut self, key: &'static str, flag: Option<String>) -> Option<String> {
        let v = self.raw(key, flag);
        if v.is_none() {
            self.missing.push(key);
        }
        v
    }

    /// Optional parsed value with a default.
    pub fn parse_or<T>(&mut self, key: &'static str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        if let Some(v) = flag {
            self.resolved.insert(key.to_string(), v.to_string());
            return Ok(v);
        }
        if let Some(raw) = self.file.get(key).cloned() {
            let v: T = raw
                .parse()
                .map_err(|e| anyhow!("config key {}: cannot parse {:?}: {}", key, raw, e))?;
            self.resolved.insert(key.to_string(), v.to_string());
            return Ok(v);
        }
        self.resolved.insert(key.to_string(), default.to_string());
        Ok(default)
    }

    /// Optional parsed value without a default; absent stays absent.
    pub fn parse_optional<T>(&mut self, key: &'static str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        if let Some(v) = flag {
            self.resolved.insert(key.to_string(), v.to_string());
            return Ok(Some(v));
        }
        if let Some(raw) = self.file.get(key).cloned() {
            let v: T = raw
                .parse()
                .map_err(|e| anyhow!("config key {}: cannot parse {:?}: {}", key, raw, e))?;
            self.resolved.insert(key.to_string(), v.to_string());
            return Ok(Some(v));
        }
        Ok(None)
    }

    /// Optional raw string without a default.
    pub fn raw_optional(&mut self, key: &'static str, flag: Option<String>) -> Option<String> {
        self.raw(key, flag)
    }

    /// Fails if any required key was missing, naming all of them;
    /// otherwise hands back the fully resolved configuration.
    pub fn finish(&mut self) -> Result<BTreeMap<String, String>> {
        if !self.missing.is_empty() {
            bail!(
                "missing required configuration: {} (set via flag or config file)",
                self.missing.join(", ")
            );
        }
        Ok(std::mem::take(&mut self.resolved))
    }
}

/// Parses a comma-separated list of positive integers ("24,20,16").
pub fn parse_usize_list(text: &str, what: &str) -> Result<Vec<usize>> {
    let out: Vec<usize> = text
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("cannot parse {} {:?} as comma-separated integers", what, text))?;
    if out.is_empty() || out.contains(&0) {
        bail!("{} must be positive integers, got {:?}", what, text);
    }
    Ok(out)
}

/// Parses a scale-prior spec: "improper" or "gamma:shape,rate".
pub fn parse_sigma_prior(text: &str) -> Result<tuckermc::SigmaPrior> {
    let t = text.trim().to_ascii_lowercase();
    if t == "improper" {
        return Ok(tuckermc::SigmaPrior::ImproperReciprocal);
    }
    if let Some(rest) = t.strip_prefix("gamma:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() == 2 {
            let shape: f64 = parts[0].trim().parse().context("gamma shape")?;
            let rate: f64 = parts[1].trim().parse().context("gamma rate")?;
            if shape > 0.0 && rate > 0.0 {
                return Ok(tuckermc::SigmaPrior::ProperGamma { shape, rate });
            }
        }
    }
    bail!(
        "scale prior must be \"improper\" or \"gamma:shape,rate\", got {:?}",
        text
    )
}
