//! Scenario files: `[section]` headers followed by `key = value` lines.
//! `#` and `;` start comments at the beginning of a line; `#` after
//! whitespace starts a trailing comment.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::expr::{parse_with_vars, Expr, Var};

pub const SECTIONS: &[&str] = &[
    "domain",
    "grid",
    "coefficients",
    "reaction",
    "disturbances",
    "boundary",
    "cascade",
    "backstepping",
    "check",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut current: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::config(format!("line {}: {msg}", lineno + 1));
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| at("unterminated section header".into()))?
                    .trim()
                    .to_ascii_lowercase();
                if !SECTIONS.contains(&name.as_str()) {
                    return Err(at(format!("unknown section [{name}]")));
                }
                cfg.sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected 'key = value', got '{line}'")))?;
            let section = current
                .as_ref()
                .ok_or_else(|| at("key outside of any section".into()))?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(at("empty key".into()));
            }
            let value = unquote(value.trim()).to_string();
            let table = cfg.sections.get_mut(section).expect("section exists");
            if table.insert(key.clone(), value).is_some() {
                return Err(at(format!("duplicate key '{key}' in [{section}]")));
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    /// Sets a value, creating the section if needed.
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.into());
    }

    pub fn keys(&self, section: &str) -> Vec<&str> {
        self.sections
            .get(section)
            .map(|t| t.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key)
            .ok_or_else(|| Error::config(format!("missing [{section}] {key}")))
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        self.get(section, key)
            .map_or(Ok(default), |v| parse_f64(section, key, v))
    }

    pub fn f64_opt(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.get(section, key).map(|v| parse_f64(section, key, v)).transpose()
    }

    pub fn require_f64(&self, section: &str, key: &str) -> Result<f64> {
        parse_f64(section, key, self.require(section, key)?)
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::config(format!("[{section}] {key}: expected an integer, got '{v}'"))),
        }
    }

    pub fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.get(section, key) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(Error::config(format!(
                "[{section}] {key}: expected true/false, got '{v}'"
            ))),
        }
    }

    /// Parses an expression entry, defaulting to `default` when absent.
    /// Parse errors keep their byte offset and name the entry.
    pub fn expr_or(&self, section: &str, key: &str, default: &str, vars: &[Var]) -> Result<Expr> {
        let text = self.get(section, key).unwrap_or(default);
        parse_with_vars(text, vars).map_err(|e| match e {
            Error::Parse { offset, message } => Error::Parse {
                offset,
                message: format!("[{section}] {key} = '{text}': {message}"),
            },
            other => other,
        })
    }

    pub fn expr_opt(&self, section: &str, key: &str, vars: &[Var]) -> Result<Option<Expr>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(_) => self.expr_or(section, key, "0", vars).map(Some),
        }
    }

    /// Serializes back to the file format, sections in canonical order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for name in SECTIONS {
            if let Some(table) = self.sections.get(*name) {
                out.push_str(&format!("[{name}]\n"));
                for (k, v) in table {
                    out.push_str(&format!("{k} = {v}\n"));
                }
                out.push('\n');
            }
        }
        out
    }
}

fn parse_f64(section: &str, key: &str, v: &str) -> Result<f64> {
    let parsed = match v {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => v.parse::<f64>(),
    };
    // Numeric entries may also be constant expressions such as `pi/2`.
    match parsed {
        Ok(x) => Ok(x),
        Err(_) => {
            let e = parse_with_vars(v, &[])
                .map_err(|_| Error::config(format!("[{section}] {key}: expected a number, got '{v}'")))?;
            e.as_constant()
                .ok_or_else(|| Error::config(format!("[{section}] {key}: not a constant: '{v}'")))
        }
    }
}

fn strip_comment(line: &str) -> &str {
    let trimmed = line.trim_start();
    if trimmed.starts_with('#') || trimmed.starts_with(';') {
        return "";
    }
    match line.find(" #").or_else(|| line.find("\t#")) {
        Some(i) => &line[..i],
        None => line,
    }
}

fn unquote(v: &str) -> &str {
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        &v[1..v.len() - 1]
    } else {
        v
    }
}
