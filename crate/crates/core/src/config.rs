//! `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are
//! case-sensitive; a repeated key keeps its last value.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gbdt::GbdtParams;
use crate::nn::{NetSpec, TrainConfig};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", n + 1)));
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Config { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Rejects keys outside `known`, catching typos.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(Error::Config(format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        Ok(TrainConfig {
            batch_size: self.get_or("batch_size", d.batch_size)?,
            learning_rate: self.get_or("learning_rate", d.learning_rate)?,
            epochs: self.get_or("epochs", d.epochs)?,
            seed: self.get_or("seed", d.seed)?,
            validation_fraction: self.get_or("validation_fraction", d.validation_fraction)?,
        })
    }

    /// Default layout with optional `conv_width` / `deep_width` overrides.
    pub fn net_spec(&self) -> Result<NetSpec> {
        let spec = NetSpec::with_widths(self.get_or("conv_width", 8)?, self.get_or("deep_width", 16)?);
        spec.validate()?;
        Ok(spec)
    }

    pub fn gbdt_params(&self) -> Result<GbdtParams> {
        let d = GbdtParams::default();
        Ok(GbdtParams {
            rounds: self.get_or("rounds", d.rounds)?,
            shrinkage: self.get_or("shrinkage", d.shrinkage)?,
            max_depth: self.get_or("max_depth", d.max_depth)?,
            l2: self.get_or("l2", d.l2)?,
            min_child_hessian: self.get_or("min_child_hessian", d.min_child_hessian)?,
            min_child_samples: self.get_or("min_child_samples", d.min_child_samples)?,
            subsample: self.get_or("subsample", d.subsample)?,
            seed: self.get_or("seed", d.seed)?,
        })
    }
}

pub const TRAIN_CNN_KEYS: &[&str] = &[
    "batch_size",
    "learning_rate",
    "epochs",
    "seed",
    "validation_fraction",
    "conv_width",
    "deep_width",
];

pub const TRAIN_DT_KEYS: &[&str] = &[
    "rounds",
    "shrinkage",
    "max_depth",
    "l2",
    "min_child_hessian",
    "min_child_samples",
    "subsample",
    "seed",
    "per_cell_target",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let c = Config::parse("# comment\nepochs = 5\n\nlearning_rate=0.01\nepochs=7\n").unwrap();
        let t = c.train_config().unwrap();
        assert_eq!(t.epochs, 7);
        assert_eq!(t.learning_rate, 0.01);
        assert_eq!(t.batch_size, 128);
        assert!(c.check_keys(TRAIN_CNN_KEYS).is_ok());
        assert!(c.check_keys(&["epochs"]).is_err());
    }

    #[test]
    fn errors_are_reported() {
        assert!(Config::parse("novalue").is_err());
        assert!(Config::parse(" = 3").is_err());
        let c = Config::parse("epochs = many").unwrap();
        assert!(c.train_config().is_err());
        let c = Config::parse("conv_width = 0").unwrap();
        assert!(c.net_spec().is_err());
    }
}
