//! Report container shared by the command-line front end.

use serde::{Deserialize, Serialize};

use crate::harness::{CheckKind, CheckRecord};

pub const SCHEMA_VERSION: u32 = 1;

pub const CONVENTION_NOTE: &str =
    "densities are taken against Lebesgue measure on C^n; metrics are squared norms g(v) = v^T G conj(v)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub schema: u32,
    pub version: String,
    pub command: String,
    pub domain: Option<String>,
    pub seed: Option<u64>,
    pub convention: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Number(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::Number(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Self::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Self::Text(v)
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Number(v) => write!(f, "{v:e}"),
            Self::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub meta: ReportMeta,
    pub records: Vec<CheckRecord>,
    pub tables: Vec<Table>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub decisive: usize,
    pub passed: usize,
    pub failed: usize,
    pub informational: usize,
}

impl Report {
    pub fn new(command: &str, domain: Option<String>, seed: Option<u64>) -> Self {
        Self {
            meta: ReportMeta {
                schema: SCHEMA_VERSION,
                version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                domain,
                seed,
                convention: CONVENTION_NOTE.to_string(),
            },
            records: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn summary(&self) -> Summary {
        let decisive = self.records.iter().filter(|r| r.kind == CheckKind::Decisive).count();
        let failed = self.records.iter().filter(|r| r.failed()).count();
        Summary {
            decisive,
            passed: decisive - failed,
            failed,
            informational: self.records.len() - decisive,
        }
    }

    /// Every decisive record passed.
    pub fn all_pass(&self) -> bool {
        self.summary().failed == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Side;

    #[test]
    fn summary_counts() {
        let mut r = Report::new("verify", None, Some(1));
        r.records.push(CheckRecord::inequality("a", "", Side::exact(1.0), Side::exact(2.0)));
        r.records.push(CheckRecord::inequality("b", "", Side::upper(1.0), Side::exact(2.0)));
        assert!(r.all_pass());
        r.records.push(CheckRecord::inequality("c", "", Side::exact(3.0), Side::exact(2.0)));
        assert_eq!(
            r.summary(),
            Summary {
                decisive: 2,
                passed: 1,
                failed: 1,
                informational: 1
            }
        );
        assert!(!r.all_pass());
    }
}
