//! Flat `key = value` parameter files. Later sources override earlier ones.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::InvalidInput(format!("line {}: empty key", i + 1)));
            }
            p.set(k, v.trim());
        }
        Ok(p)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(normalize(key), value.into());
    }

    pub fn set_opt<T: ToString>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v.to_string());
        }
    }

    pub fn merge(&mut self, other: &Params) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => parse_value(key, s),
        }
    }

    pub fn get_list<T: FromStr>(&self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T: Clone,
    {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| parse_value(key, t))
                .collect(),
        }
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "yes" | "1" | "on") => Ok(true),
            Some("false" | "no" | "0" | "off") => Ok(false),
            Some(other) => Err(Error::InvalidInput(format!("{key}: expected a boolean, got '{other}'"))),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

fn parse_value<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::InvalidInput(format!("{key}: cannot parse '{s}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_overrides() {
        let mut p = Params::parse("# header\nkappa = 0.05 # inline\n\nz-list = 8, 27,64\n").unwrap();
        assert_eq!(p.get("kappa", 0.0).unwrap(), 0.05);
        assert_eq!(p.get_list::<f64>("z_list", &[]).unwrap(), vec![8.0, 27.0, 64.0]);
        let mut flags = Params::default();
        flags.set("kappa", "0.02");
        p.merge(&flags);
        assert_eq!(p.get("kappa", 0.0).unwrap(), 0.02);
        assert_eq!(p.get("missing", 3usize).unwrap(), 3);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Params::parse("no equals sign").is_err());
        assert!(Params::parse(" = 3").is_err());
        let p = Params::parse("h = abc\nflag = maybe").unwrap();
        assert!(p.get("h", 1.0).is_err());
        assert!(p.get_bool("flag", false).is_err());
    }
}
