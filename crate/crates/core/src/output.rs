// SPDX-License-Identifier: MIT OR Apache-2.0
//! Text output with fixed 17-significant-digit floats.
//!
//! Every float written to CSV or NDJSON goes through [`num`], so reruns with
//! the same inputs are byte-identical and values round-trip exactly.

use std::fmt::Write as _;

/// `{:.16e}`, or `null` for non-finite values.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

/// One NDJSON object, keys kept in insertion order.
#[derive(Debug, Default, Clone)]
pub struct Record {
    body: String,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(&mut self, key: &str) {
        if !self.body.is_empty() {
            self.body.push(',');
        }
        let _ = write!(self.body, "{}:", quote(key));
    }

    pub fn num(mut self, key: &str, x: f64) -> Self {
        self.key(key);
        self.body.push_str(&num(x));
        self
    }

    pub fn opt_num(self, key: &str, x: Option<f64>) -> Self {
        match x {
            Some(v) => self.num(key, v),
            None => self.null(key),
        }
    }

    pub fn int(mut self, key: &str, x: i64) -> Self {
        self.key(key);
        let _ = write!(self.body, "{x}");
        self
    }

    pub fn boolean(mut self, key: &str, x: bool) -> Self {
        self.key(key);
        self.body.push_str(if x { "true" } else { "false" });
        self
    }

    pub fn text(mut self, key: &str, s: &str) -> Self {
        self.key(key);
        self.body.push_str(&quote(s));
        self
    }

    pub fn opt_text(self, key: &str, s: Option<&str>) -> Self {
        match s {
            Some(v) => self.text(key, v),
            None => self.null(key),
        }
    }

    pub fn null(mut self, key: &str) -> Self {
        self.key(key);
        self.body.push_str("null");
        self
    }

    pub fn nums(mut self, key: &str, xs: &[f64]) -> Self {
        self.key(key);
        let parts: Vec<String> = xs.iter().map(|&x| num(x)).collect();
        let _ = write!(self.body, "[{}]", parts.join(","));
        self
    }

    /// Appends the fields of `other`.
    pub fn merge(mut self, other: &Record) -> Self {
        if !other.body.is_empty() {
            if !self.body.is_empty() {
                self.body.push(',');
            }
            self.body.push_str(&other.body);
        }
        self
    }

    pub fn line(&self) -> String {
        format!("{{{}}}", self.body)
    }
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Joins records into NDJSON text, one object per line.
pub fn ndjson(records: &[Record]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.line());
        out.push('\n');
    }
    out
}
