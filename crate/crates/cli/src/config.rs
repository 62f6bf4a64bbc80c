//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored, `[section]` headers only group
//! keys visually, and every key may appear once. Values are read through a
//! [`Reader`] that remembers where each key came from, so every validation
//! error names the offending line and field. Keys an experiment never reads
//! are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub struct ConfigError {
    /// 0 when the value came from a default or the command line.
    pub line: usize,
    pub field: String,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "config line {}: {}: {}", self.line, self.field, self.reason)
        } else {
            write!(f, "{}: {}", self.field, self.reason)
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if body.starts_with('[') {
                if !body.ends_with(']') || body.len() < 3 {
                    return Err(ConfigError {
                        line,
                        field: body.to_string(),
                        reason: "malformed section header".into(),
                    });
                }
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ConfigError {
                    line,
                    field: body.to_string(),
                    reason: "expected key = value".into(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError {
                    line,
                    field: "(empty)".into(),
                    reason: "missing key".into(),
                });
            }
            if let Some(prev) = entries.get(key).map(|e: &Entry| e.line) {
                return Err(ConfigError {
                    line,
                    field: key.to_string(),
                    reason: format!("duplicate key, first set on line {prev}"),
                });
            }
            entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
        }
        Ok(RawConfig { entries })
    }

    pub fn reader(self) -> Reader {
        Reader {
            entries: self.entries,
            seen: BTreeMap::new(),
        }
    }
}

/// Typed access to a [`RawConfig`].
pub struct Reader {
    entries: BTreeMap<String, Entry>,
    seen: BTreeMap<String, usize>,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<Entry> {
        let e = self.entries.remove(key)?;
        self.seen.insert(key.to_string(), e.line);
        Some(e)
    }

    /// Line a key was read from, 0 if it was defaulted.
    pub fn line(&self, key: &str) -> usize {
        self.seen.get(key).copied().unwrap_or(0)
    }

    pub fn error(&self, field: &str, reason: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.line(field),
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    fn parse_one<T: FromStr>(key: &str, e: &Entry, what: &str) -> Result<T, ConfigError> {
        e.value.parse().map_err(|_| ConfigError {
            line: e.line,
            field: key.to_string(),
            reason: format!("expected {what}, got {:?}", e.value),
        })
    }

    pub fn opt_str(&mut self, key: &str) -> Option<String> {
        self.take(key).map(|e| e.value)
    }

    pub fn string(&mut self, key: &str, default: &str) -> String {
        self.opt_str(key).unwrap_or_else(|| default.to_string())
    }

    pub fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => {
                let v: f64 = Self::parse_one(key, &e, "a number")?;
                if !v.is_finite() {
                    return Err(self.error(key, format!("must be finite, got {v}")));
                }
                Ok(Some(v))
            }
        }
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    pub fn positive(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.f64(key, default)?;
        if v <= 0.0 {
            return Err(self.error(key, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    pub fn int<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(e) => Self::parse_one(key, &e, "a non-negative integer"),
        }
    }

    pub fn opt_int<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => Self::parse_one(key, &e, "a non-negative integer").map(Some),
        }
    }

    /// Comma-separated numbers.
    pub fn list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        let Some(e) = self.take(key) else {
            return Ok(default.to_vec());
        };
        let mut out = Vec::new();
        for part in e.value.split(',') {
            let v: f64 = part.trim().parse().map_err(|_| ConfigError {
                line: e.line,
                field: key.to_string(),
                reason: format!("expected comma-separated numbers, got {:?}", e.value),
            })?;
            if !v.is_finite() {
                return Err(self.error(key, format!("entries must be finite, got {v}")));
            }
            out.push(v);
        }
        Ok(out)
    }

    pub fn pair(&mut self, key: &str, default: (f64, f64)) -> Result<(f64, f64), ConfigError> {
        let v = self.list(key, &[default.0, default.1])?;
        if v.len() != 2 {
            return Err(self.error(key, format!("expected two numbers lo,hi, got {}", v.len())));
        }
        Ok((v[0], v[1]))
    }

    pub fn ascending(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        let v = self.list(key, default)?;
        if v.is_empty() || v.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(self.error(key, "must be a strictly ascending list"));
        }
        Ok(v)
    }

    /// `tol.<name>` overrides for the listed defaults, in the given order.
    pub fn tolerances(&mut self, defaults: &[(&str, f64)]) -> Result<Vec<(String, f64)>, ConfigError> {
        let mut out = Vec::with_capacity(defaults.len());
        for (name, d) in defaults {
            let key = format!("tol.{name}");
            let v = self.f64(&key, *d)?;
            if v <= 0.0 {
                return Err(self.error(&key, format!("must be positive, got {v}")));
            }
            out.push((name.to_string(), v));
        }
        Ok(out)
    }

    /// Fails on the first key nobody read.
    pub fn finish(self, experiment: &str) -> Result<(), ConfigError> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, e)) => {
                let reason = if key.starts_with("tol.") {
                    format!("unknown tolerance for {experiment}")
                } else {
                    format!("not a setting of {experiment}")
                };
                Err(ConfigError {
                    line: e.line,
                    field: key,
                    reason,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_lines() {
        let text = "# header\n[operator]\ngamma = 2  # inline\n\ngrid_n=513\nx1_range = 0.3, 0.9\n";
        let mut r = RawConfig::parse(text).unwrap().reader();
        assert_eq!(r.int::<u32>("gamma", 1).unwrap(), 2);
        assert_eq!(r.line("gamma"), 3);
        assert_eq!(r.int::<usize>("grid_n", 0).unwrap(), 513);
        assert_eq!(r.pair("x1_range", (0.0, 1.0)).unwrap(), (0.3, 0.9));
        assert_eq!(r.f64("absent", 1.5).unwrap(), 1.5);
        assert_eq!(r.line("absent"), 0);
        r.finish("spectrum").unwrap();
    }

    #[test]
    fn errors_carry_line_and_field() {
        let e = RawConfig::parse("a = 1\na = 2\n").unwrap_err();
        assert_eq!((e.line, e.field.as_str()), (2, "a"));
        assert_eq!(RawConfig::parse("\n\nnonsense\n").unwrap_err().line, 3);

        let mut r = RawConfig::parse("gamma = -1\n").unwrap().reader();
        let e = r.int::<u32>("gamma", 1).unwrap_err();
        assert_eq!(e.to_string(), "config line 1: gamma: expected a non-negative integer, got \"-1\"");

        let mut r = RawConfig::parse("t_list = 0.2, 0.1\ntypo = 3\n").unwrap().reader();
        assert_eq!(r.ascending("t_list", &[]).unwrap_err().line, 1);
        let e = r.finish("parabolic").unwrap_err();
        assert_eq!((e.line, e.field.as_str()), (2, "typo"));
    }
}
