//! Line-oriented key-value text used for configs, channel parameters and LUTs.
//!
//! ```text
//! # comment
//! master_seed = 7
//! [channel]
//! v_min = 1.4
//! [point pe=6000 t=15000]
//! v1 = 2.4626
//! ```
//!
//! A `[name k=v ...]` header opens a section; keys inside it are reported with
//! the section name so callers can flatten them to `name.key`.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct KvError {
    pub line: usize,
    pub message: String,
}

impl KvError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        KvError {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Section {
        name: String,
        attrs: Vec<(String, String)>,
        line: usize,
    },
    Pair {
        key: String,
        value: String,
        line: usize,
    },
}

pub fn parse(text: &str) -> Result<Vec<Item>, KvError> {
    let mut items = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let inner = rest
                .strip_suffix(']')
                .ok_or_else(|| KvError::new(line, "unterminated section header"))?;
            let mut parts = inner.split_whitespace();
            let name = parts
                .next()
                .ok_or_else(|| KvError::new(line, "empty section header"))?
                .to_string();
            let mut attrs = Vec::new();
            for part in parts {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| KvError::new(line, format!("malformed attribute `{part}`")))?;
                attrs.push((k.to_string(), v.to_string()));
            }
            items.push(Item::Section { name, attrs, line });
        } else {
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| KvError::new(line, format!("expected `key = value`, got `{content}`")))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(KvError::new(line, "missing key"));
            }
            let value = v.trim().trim_matches('"');
            items.push(Item::Pair {
                key: key.to_string(),
                value: value.to_string(),
                line,
            });
        }
    }
    Ok(items)
}

/// A flattened `(section.key, value, line)` entry.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Flattens a document into dotted keys; attributes on headers are rejected.
pub fn parse_flat(text: &str) -> Result<Vec<FlatEntry>, KvError> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    for item in parse(text)? {
        match item {
            Item::Section { name, attrs, line } => {
                if !attrs.is_empty() {
                    return Err(KvError::new(line, format!("section `{name}` takes no attributes")));
                }
                section = Some(name);
            }
            Item::Pair { key, value, line } => {
                let key = match &section {
                    Some(s) => format!("{s}.{key}"),
                    None => key,
                };
                if out.iter().any(|e: &FlatEntry| e.key == key) {
                    return Err(KvError::new(line, format!("duplicate key `{key}`")));
                }
                out.push(FlatEntry { key, value, line });
            }
        }
    }
    Ok(out)
}

pub fn parse_value<T: FromStr>(entry_key: &str, value: &str, line: usize) -> Result<T, KvError>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| KvError::new(line, format!("invalid value `{value}` for `{entry_key}`: {e}")))
}

pub fn parse_list<T: FromStr>(entry_key: &str, value: &str, line: usize) -> Result<Vec<T>, KvError>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(entry_key, s, line))
        .collect()
}

/// Rounds to nine significant digits; `Display` of the result is the
/// persisted decimal form and parses back to the identical `f64`.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}
