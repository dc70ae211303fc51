//! Named assertions and JSON reports.

use std::path::Path;

use serde::{Serialize, Serializer};

use crate::error::Result;

/// Serializes non-finite numbers as the strings `"inf"`, `"-inf"` and `"nan"`.
pub fn number<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn numbers<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    struct N(f64);
    impl Serialize for N {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            number(&self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&N(*x))?;
    }
    seq.end()
}

pub fn optional_number<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => number(x, s),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Relation {
    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Relation::Less => value < bound,
            Relation::AtMost => value <= bound,
            Relation::AtLeast => value >= bound,
        }
    }
}

/// A measured value compared against its bound.
#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    /// Coverage id of the property being checked.
    pub claim: String,
    #[serde(serialize_with = "number")]
    pub value: f64,
    #[serde(serialize_with = "number")]
    pub bound: f64,
    pub relation: Relation,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(
        name: impl Into<String>,
        claim: impl Into<String>,
        value: f64,
        relation: Relation,
        bound: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            claim: claim.into(),
            value,
            bound,
            relation,
            passed: relation.holds(value, bound),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub suite: String,
    pub cells: usize,
    pub seed: u64,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    /// Suite-specific measurements.
    pub data: serde_json::Value,
}

impl Report {
    pub fn new(suite: impl Into<String>, cells: usize, seed: u64) -> Self {
        Self {
            suite: suite.into(),
            cells,
            seed,
            passed: true,
            assertions: Vec::new(),
            data: serde_json::Value::Object(Default::default()),
        }
    }

    pub fn push(&mut self, a: Assertion) {
        self.passed &= a.passed;
        self.assertions.push(a);
    }

    pub fn extend(&mut self, items: impl IntoIterator<Item = Assertion>) {
        for a in items {
            self.push(a);
        }
    }

    pub fn attach<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        let v = serde_json::to_value(value).map_err(|e| crate::error::Error::Parse(e.to_string()))?;
        if let serde_json::Value::Object(map) = &mut self.data {
            map.insert(key.to_string(), v);
        }
        Ok(())
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| crate::error::Error::Parse(e.to_string()))
    }
}

/// Writes `bytes` next to `path` and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_bounds_serialize_as_strings() {
        let a = Assertion::new("x", "growth", 1.0, Relation::Less, f64::INFINITY, "");
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.contains("\"bound\":\"inf\""), "{json}");
        assert!(a.passed);
    }

    #[test]
    fn report_tracks_failures() {
        let mut r = Report::new("s", 10, 1);
        r.push(Assertion::new("ok", "c", 1.0, Relation::AtMost, 1.0, ""));
        assert!(r.passed);
        r.push(Assertion::new("bad", "c", 2.0, Relation::AtMost, 1.0, ""));
        assert!(!r.passed);
        assert_eq!(r.failures().next().unwrap().name, "bad");
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/report.json");
        write_atomic(&path, b"{}").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"{}");
        assert_eq!(std::fs::read_dir(dir.path().join("sub")).unwrap().count(), 1);
    }
}
