//! Shared plumbing for the line-oriented text formats.
//!
//! Every artifact file is a sequence of records, one per line: a tag word
//! followed by whitespace-separated fields. Blank lines and lines starting
//! with `#` are ignored. Report files use `key = value` lines instead.

use std::str::FromStr;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Record<'a> {
    pub line: usize,
    pub tag: &'a str,
    fields: Vec<&'a str>,
}

impl<'a> Record<'a> {
    pub fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line, message)
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn expect_len(&self, n: usize) -> Result<(), ParseError> {
        if self.fields.len() == n {
            Ok(())
        } else {
            Err(self.err(format!(
                "`{}` record takes {n} fields, found {}",
                self.tag,
                self.fields.len()
            )))
        }
    }

    pub fn field(&self, i: usize) -> Result<&'a str, ParseError> {
        self.fields
            .get(i)
            .copied()
            .ok_or_else(|| self.err(format!("`{}` record is missing field {}", self.tag, i + 1)))
    }

    pub fn parse<T: FromStr>(&self, i: usize) -> Result<T, ParseError> {
        let raw = self.field(i)?;
        raw.parse()
            .map_err(|_| self.err(format!("cannot parse `{raw}` in `{}` record", self.tag)))
    }

    pub fn parse_with<T>(
        &self,
        i: usize,
        f: impl FnOnce(&str) -> Option<T>,
    ) -> Result<T, ParseError> {
        let raw = self.field(i)?;
        f(raw).ok_or_else(|| self.err(format!("cannot parse `{raw}` in `{}` record", self.tag)))
    }

    /// Fields from `i` on, re-joined with single spaces.
    pub fn rest(&self, i: usize) -> String {
        self.fields.get(i..).map(|f| f.join(" ")).unwrap_or_default()
    }
}

pub fn records(text: &str) -> impl Iterator<Item = Record<'_>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return None;
        }
        let mut words = trimmed.split_ascii_whitespace();
        let tag = words.next()?;
        Some(Record {
            line: i + 1,
            tag,
            fields: words.collect(),
        })
    })
}

/// One `key = value` line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyValue<'a> {
    pub line: usize,
    pub key: &'a str,
    pub value: &'a str,
}

/// Splits `key = value` lines. Comments (`#` to end of line) and blank
/// lines are skipped; a non-blank line without `=` is an error.
pub fn key_values(text: &str) -> Result<Vec<KeyValue<'_>>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = match raw.find('#') {
            Some(cut) => &raw[..cut],
            None => raw,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ParseError::new(i + 1, format!("expected `key = value`, found `{content}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ParseError::new(i + 1, "empty key"));
        }
        out.push(KeyValue {
            line: i + 1,
            key,
            value: value.trim(),
        });
    }
    Ok(out)
}

pub fn fmt_hex(v: u64) -> String {
    format!("{v:016x}")
}

pub fn parse_hex(s: &str) -> Option<u64> {
    if s.is_empty() || s.len() > 16 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    u64::from_str_radix(s, 16).ok()
}

pub fn fmt_bool(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}
