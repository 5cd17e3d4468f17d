//! Flat `key = value` scenario files with command-line overrides.

use std::collections::BTreeMap;
use std::path::Path;

use mtqed::units::{Dims, Quantity, DIMENSIONLESS};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = split_pair(line)
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1)))?;
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(Config { entries })
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                Config::parse(&text)?
            }
            None => Config::default(),
        };
        for o in overrides {
            let (k, v) =
                split_pair(o).ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{o}`")))?;
            cfg.entries.insert(k.to_string(), v.to_string());
        }
        Ok(cfg)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Rejects keys outside `allowed`.
    pub fn restrict(&self, command: &str, allowed: &[&str]) -> Result<(), CliError> {
        for k in self.keys() {
            if !allowed.contains(&k) {
                return Err(CliError::Config(format!(
                    "unknown key `{k}` for `{command}` (allowed: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    /// Plain number in natural units; unit suffixes are refused.
    pub fn real(&self, key: &str, default: f64) -> Result<f64, CliError> {
        self.opt_real(key).map(|v| v.unwrap_or(default))
    }

    pub fn opt_real(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key).map(|v| plain_number(key, v)).transpose()
    }

    pub fn count(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => {
                let x = plain_number(key, v)?;
                if x >= 0.0 && x.fract() == 0.0 && x < 1e15 {
                    Ok(x as usize)
                } else {
                    Err(CliError::Config(format!(
                        "`{key}` must be a non-negative integer, got `{v}`"
                    )))
                }
            }
        }
    }

    pub fn choice<'a>(&'a self, key: &str, default: &'a str, options: &[&str]) -> Result<&'a str, CliError> {
        let v = self.get(key).unwrap_or(default);
        if options.contains(&v) {
            Ok(v)
        } else {
            Err(CliError::Config(format!(
                "`{key}` must be one of {}, got `{v}`",
                options.join("|")
            )))
        }
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.get(key)
            .map(|v| split_list(v).iter().map(|s| plain_number(key, s)).collect())
            .transpose()
    }

    /// SI quantity with a mandatory unit suffix unless `dims` is
    /// dimensionless.
    pub fn quantity(&self, key: &str, dims: Dims) -> Result<Option<Quantity>, CliError> {
        let Some(v) = self.get(key) else { return Ok(None) };
        let q = Quantity::parse(v).map_err(|e| CliError::Config(format!("`{key}`: {e}")))?;
        if dims != DIMENSIONLESS && v.trim().parse::<f64>().is_ok() {
            return Err(CliError::Config(format!(
                "`{key}` needs a unit suffix with dimensions {dims}, got `{v}`"
            )));
        }
        q.require(dims, key)
            .map(Some)
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    (!k.is_empty() && !v.is_empty()).then_some((k, v))
}

pub fn split_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn plain_number(key: &str, v: &str) -> Result<f64, CliError> {
    let v = v.trim();
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        Ok(_) => Err(CliError::Config(format!("`{key}` must be finite, got `{v}`"))),
        Err(_) if Quantity::parse(v).is_ok() => Err(CliError::Config(format!(
            "`{key}` is in natural units and takes a plain number, got `{v}`"
        ))),
        Err(_) => Err(CliError::Config(format!("`{key}` is not a number: `{v}`"))),
    }
}
