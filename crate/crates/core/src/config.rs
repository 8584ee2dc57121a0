//! Plain-text `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Keys are dotted paths such as `curve.1`, `bias.2.1` or `fair.u`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
    source: PathBuf,
}

impl KvConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::format(source, format!("line {}: expected `key = value`", no + 1))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::format(source, format!("line {}: empty key", no + 1)));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::format(source, format!("line {}: duplicate key `{k}`", no + 1)));
            }
        }
        Ok(Self {
            entries,
            source: source.to_path_buf(),
        })
    }

    pub fn source(&self) -> &Path {
        &self.source
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|_| {
                    Error::format(&self.source, format!("`{key}`: cannot parse `{v}`"))
                })
            })
            .transpose()
    }

    /// Comma-separated list value.
    pub fn parse_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>().map_err(|_| {
                            Error::format(&self.source, format!("`{key}`: cannot parse `{s}`"))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    /// Entries whose key starts with `prefix.`, with the prefix stripped.
    pub fn section<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.entries.iter().filter_map(move |(k, v)| {
            k.strip_prefix(prefix)
                .and_then(|rest| rest.strip_prefix('.'))
                .map(|rest| (rest, v.as_str()))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_lists_and_sections() {
        let cfg = KvConfig::parse(
            "# header\ncurve.1 = sqrt\ncurve.2 = log1p # trailing\n\nfair.u = 0, 0.5\nk=3\n",
            Path::new("t.cfg"),
        )
        .unwrap();
        assert_eq!(cfg.get("curve.2"), Some("log1p"));
        assert_eq!(cfg.parse_value::<usize>("k").unwrap(), Some(3));
        assert_eq!(cfg.parse_list::<f64>("fair.u").unwrap(), Some(vec![0.0, 0.5]));
        let sec: Vec<_> = cfg.section("curve").collect();
        assert_eq!(sec, vec![("1", "sqrt"), ("2", "log1p")]);
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(KvConfig::parse("a = 1\na = 2\n", Path::new("t")).is_err());
        assert!(KvConfig::parse("just words\n", Path::new("t")).is_err());
        let cfg = KvConfig::parse("k = x\n", Path::new("t")).unwrap();
        assert!(cfg.parse_value::<usize>("k").is_err());
    }
}
