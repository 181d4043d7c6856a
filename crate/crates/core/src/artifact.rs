//! Flat-file model artifacts: an INI-style header followed by named CSV
//! tables.
//!
//! ```text
//! [artifact]
//! kind = onset-model
//! version = 1
//! bandwidth = 1.5,0.2
//!
//! [table samples]
//! date,m,r0,weight
//! 2019-07-04,1200,3.5,2
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ArtifactError {
    #[error("artifact line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("artifact is a `{found}`, expected `{expected}`")]
    WrongKind { expected: String, found: String },
    #[error("unsupported artifact version {0}")]
    Version(String),
    #[error("artifact is missing `{0}`")]
    Missing(String),
    #[error("bad value for `{key}`: {msg}")]
    BadValue { key: String, msg: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Column index by name.
    pub fn col(&self, name: &str) -> Result<usize, ArtifactError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| ArtifactError::Missing(format!("column {name}")))
    }

    /// Parses every value of a column.
    pub fn parse_col<T: std::str::FromStr>(&self, name: &str) -> Result<Vec<T>, ArtifactError> {
        let i = self.col(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[i].parse().map_err(|_| ArtifactError::BadValue {
                    key: name.to_string(),
                    msg: format!("`{}`", r[i]),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub kind: String,
    pub header: BTreeMap<String, String>,
    pub tables: BTreeMap<String, Table>,
}

impl Artifact {
    pub fn new(kind: &str) -> Self {
        Artifact {
            kind: kind.to_string(),
            header: BTreeMap::new(),
            tables: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.header.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Result<&str, ArtifactError> {
        self.header
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| ArtifactError::Missing(key.to_string()))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, ArtifactError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .parse()
            .map_err(|e: T::Err| ArtifactError::BadValue {
                key: key.to_string(),
                msg: e.to_string(),
            })
    }

    pub fn table(&self, name: &str) -> Result<&Table, ArtifactError> {
        self.tables
            .get(name)
            .ok_or_else(|| ArtifactError::Missing(format!("table {name}")))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "[artifact]").unwrap();
        writeln!(s, "kind = {}", self.kind).unwrap();
        writeln!(s, "version = {FORMAT_VERSION}").unwrap();
        for (k, v) in &self.header {
            writeln!(s, "{k} = {v}").unwrap();
        }
        for (name, t) in &self.tables {
            writeln!(s, "\n[table {name}]").unwrap();
            writeln!(s, "{}", t.columns.join(",")).unwrap();
            for r in &t.rows {
                writeln!(s, "{}", r.join(",")).unwrap();
            }
        }
        s
    }

    /// Parses artifact text and checks its kind.
    pub fn from_text(text: &str, expected_kind: &str) -> Result<Self, ArtifactError> {
        let mut header = BTreeMap::new();
        let mut tables: BTreeMap<String, Table> = BTreeMap::new();
        let mut current: Option<String> = None;
        let mut seen_artifact = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "[artifact]" {
                seen_artifact = true;
                current = None;
                continue;
            }
            if let Some(name) = line
                .strip_prefix("[table ")
                .and_then(|r| r.strip_suffix(']'))
            {
                tables.insert(name.to_string(), Table::default());
                current = Some(name.to_string());
                continue;
            }
            match &current {
                None => {
                    if !seen_artifact {
                        return Err(ArtifactError::Syntax {
                            line: lineno,
                            msg: "expected [artifact] header".into(),
                        });
                    }
                    let (k, v) = line.split_once('=').ok_or(ArtifactError::Syntax {
                        line: lineno,
                        msg: "expected key = value".into(),
                    })?;
                    header.insert(k.trim().to_string(), v.trim().to_string());
                }
                Some(name) => {
                    let t = tables.get_mut(name).unwrap();
                    let cells: Vec<String> =
                        line.split(',').map(|c| c.trim().to_string()).collect();
                    if t.columns.is_empty() {
                        t.columns = cells;
                    } else if cells.len() != t.columns.len() {
                        return Err(ArtifactError::Syntax {
                            line: lineno,
                            msg: format!("expected {} fields", t.columns.len()),
                        });
                    } else {
                        t.rows.push(cells);
                    }
                }
            }
        }
        let kind = header
            .remove("kind")
            .ok_or_else(|| ArtifactError::Missing("kind".into()))?;
        if kind != expected_kind {
            return Err(ArtifactError::WrongKind {
                expected: expected_kind.to_string(),
                found: kind,
            });
        }
        let version = header
            .remove("version")
            .ok_or_else(|| ArtifactError::Missing("version".into()))?;
        if version != FORMAT_VERSION.to_string() {
            return Err(ArtifactError::Version(version));
        }
        Ok(Artifact {
            kind,
            header,
            tables,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut a = Artifact::new("test-model");
        a.set("bandwidth", "1.5,0.25");
        let mut t = Table::new(&["x", "y"]);
        t.push(vec!["1".into(), "2.5".into()]);
        t.push(vec!["3".into(), "-4".into()]);
        a.tables.insert("points".into(), t);
        let back = Artifact::from_text(&a.to_text(), "test-model").unwrap();
        assert_eq!(back, a);
        assert_eq!(
            back.table("points").unwrap().parse_col::<f64>("y").unwrap(),
            vec![2.5, -4.0]
        );
    }

    #[test]
    fn wrong_kind() {
        let a = Artifact::new("onset-model");
        assert!(matches!(
            Artifact::from_text(&a.to_text(), "severity-model"),
            Err(ArtifactError::WrongKind { .. })
        ));
        assert!(Artifact::from_text("kind = x\n", "x").is_err());
    }
}
