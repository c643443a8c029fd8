//! Flat `section.key = value` configuration files.
//!
//! Lines are `key = value`; `#` starts a comment. Keys are dotted paths such
//! as `am.lr`. Lists are comma separated. Readers record every problem
//! (missing key, bad value, unknown key) and report them together.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{Display, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected `key = value`, found `{line}`"),
                });
            };
            let key = k.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("bad key `{key}`"),
                });
            }
            if entries.insert(key.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn set_list<T: Display>(&mut self, key: &str, values: &[T]) {
        let s: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        self.entries.insert(key.to_string(), s.join(", "));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Copies every entry of `other` over this map.
    pub fn merge(&mut self, other: &ConfigMap) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn reader(&self) -> Reader<'_> {
        Reader {
            map: self,
            used: BTreeSet::new(),
            errors: Vec::new(),
        }
    }

    /// FNV-1a hash of the canonical text.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_string().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

impl std::fmt::Display for ConfigMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        f.write_str(&s)
    }
}

/// Typed access that accumulates errors instead of stopping at the first.
pub struct Reader<'a> {
    map: &'a ConfigMap,
    used: BTreeSet<String>,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn raw(&mut self, key: &str) -> Option<&str> {
        self.used.insert(key.to_string());
        self.map.get(key)
    }

    pub fn has(&self, key: &str) -> bool {
        self.map.get(key).is_some()
    }

    /// Value at `key`, or `default` when absent.
    pub fn or<T: FromStr>(&mut self, key: &str, default: T) -> T
    where
        T::Err: Display,
    {
        match self.raw(key).map(str::to_string) {
            None => default,
            Some(v) => match v.parse() {
                Ok(x) => x,
                Err(e) => {
                    self.errors.push(format!("{key}: cannot parse `{v}` ({e})"));
                    default
                }
            },
        }
    }

    pub fn required<T: FromStr + Default>(&mut self, key: &str) -> T
    where
        T::Err: Display,
    {
        if !self.has(key) {
            self.used.insert(key.to_string());
            self.errors.push(format!("{key}: missing"));
            return T::default();
        }
        self.or(key, T::default())
    }

    pub fn list_or<T: FromStr + Clone>(&mut self, key: &str, default: &[T]) -> Vec<T>
    where
        T::Err: Display,
    {
        let Some(v) = self.raw(key).map(str::to_string) else {
            return default.to_vec();
        };
        if v.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::new();
        for item in v.split(',') {
            match item.trim().parse() {
                Ok(x) => out.push(x),
                Err(e) => {
                    self.errors.push(format!("{key}: cannot parse `{}` ({e})", item.trim()));
                    return default.to_vec();
                }
            }
        }
        out
    }

    pub fn error(&mut self, message: String) {
        self.errors.push(message);
    }

    /// Fails listing every recorded problem plus each key never read.
    pub fn finish(self) -> Result<()> {
        let mut errors = self.errors;
        for k in self.map.keys() {
            if !self.used.contains(k) {
                errors.push(format!("{k}: unknown key"));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }
}
