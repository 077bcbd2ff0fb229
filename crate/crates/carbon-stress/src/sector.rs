//! Hierarchical industry codes and the input-criticality table.
//!
//! Codes follow the NACE layout: a section letter, a two-digit division and
//! up to two further one-digit levels, e.g. `G46.7.1`. The sentinel `Z`
//! marks firms with unknown classification. Matching is hierarchical: the
//! pattern `K` covers every code in section K, `D35.2` covers `D35.2.1`
//! through `D35.2.3`, and a full four-level code covers only itself.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel for firms without a known industry classification.
pub const UNKNOWN_SECTOR: &str = "Z";

/// A hierarchical industry code, stored in normalized form
/// (`<letter><division>.<group>.<class>`, truncated at any level).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SectorCode(String);

impl SectorCode {
    /// Parses and normalizes a code. Accepts `G46.7.1`, `g46.71`, `K`, `Z`.
    pub fn parse(raw: &str) -> Result<Self> {
        let s = raw.trim();
        if s.is_empty() {
            return Err(Error::Config("empty sector code".into()));
        }
        let mut chars = s.chars();
        let letter = chars.next().unwrap().to_ascii_uppercase();
        if !letter.is_ascii_alphabetic() {
            return Err(Error::Config(format!(
                "sector code must start with a section letter: {raw:?}"
            )));
        }
        let rest: String = chars.collect();
        let digits: Vec<char> = rest.chars().filter(|c| c.is_ascii_digit()).collect();
        if rest.chars().any(|c| !c.is_ascii_digit() && c != '.') {
            return Err(Error::Config(format!("invalid sector code: {raw:?}")));
        }
        if digits.len() > 4 {
            return Err(Error::Config(format!(
                "sector code has more than 4 digits: {raw:?}"
            )));
        }
        let mut out = String::new();
        out.push(letter);
        match digits.len() {
            0 => {}
            1 => {
                // A lone digit cannot form a two-digit division.
                return Err(Error::Config(format!(
                    "sector division must have two digits: {raw:?}"
                )));
            }
            _ => {
                out.push(digits[0]);
                out.push(digits[1]);
                for d in &digits[2..] {
                    out.push('.');
                    out.push(*d);
                }
            }
        }
        Ok(SectorCode(out))
    }

    /// The unknown-sector sentinel.
    pub fn unknown() -> Self {
        SectorCode(UNKNOWN_SECTOR.to_string())
    }

    /// Section letter (first character).
    pub fn section(&self) -> char {
        self.0.chars().next().unwrap()
    }

    /// True if `self` falls under `pattern` in the code hierarchy.
    pub fn is_within(&self, pattern: &SectorCode) -> bool {
        let code = self.0.as_str();
        let pat = pattern.0.as_str();
        if !code.starts_with(pat) {
            return false;
        }
        // The boundary after the pattern must be a level break: end of code,
        // a dot, or the division digits right after a bare section letter.
        let rest = &code[pat.len()..];
        rest.is_empty() || rest.starts_with('.') || pat.len() == 1
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SectorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Marks which (buyer sector, supplier sector) pairs are essential inputs.
/// Pairs absent from the table are non-essential.
#[derive(Debug, Clone, Default)]
pub struct CriticalityTable {
    essential: HashMap<(SectorCode, SectorCode), bool>,
}

impl CriticalityTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, buyer: SectorCode, supplier: SectorCode, essential: bool) {
        self.essential.insert((buyer, supplier), essential);
    }

    pub fn is_essential(&self, buyer: &SectorCode, supplier: &SectorCode) -> bool {
        self.essential
            .get(&(buyer.clone(), supplier.clone()))
            .copied()
            .unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.essential.len()
    }

    pub fn is_empty(&self) -> bool {
        self.essential.is_empty()
    }

    /// Iterates over all recorded (buyer, supplier, essential) entries in
    /// sorted order (deterministic file output).
    pub fn entries(&self) -> Vec<(&SectorCode, &SectorCode, bool)> {
        let mut rows: Vec<_> = self
            .essential
            .iter()
            .map(|((b, s), e)| (b, s, *e))
            .collect();
        rows.sort();
        rows
    }

    /// Reads `buyer_sector,supplier_sector,essential` with essential in {0,1}.
    pub fn load_csv(path: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_open_err(path, e))?;
        let mut table = CriticalityTable::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_row_err(path, &e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != 3 {
                return Err(Error::MalformedRow {
                    path: path.into(),
                    line,
                    message: format!("expected 3 fields, got {}", rec.len()),
                });
            }
            let buyer = SectorCode::parse(&rec[0]).map_err(|e| Error::MalformedRow {
                path: path.into(),
                line,
                message: e.to_string(),
            })?;
            let supplier = SectorCode::parse(&rec[1]).map_err(|e| Error::MalformedRow {
                path: path.into(),
                line,
                message: e.to_string(),
            })?;
            let essential = match rec[2].trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::MalformedRow {
                        path: path.into(),
                        line,
                        message: format!("essential must be 0 or 1, got {other:?}"),
                    })
                }
            };
            table.set(buyer, supplier, essential);
        }
        Ok(table)
    }

    /// Writes the table in the same CSV schema accepted by [`load_csv`](Self::load_csv).
    pub fn write_csv(&self, path: &str) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_open_err(path, e))?;
        wtr.write_record(["buyer_sector", "supplier_sector", "essential"])
            .map_err(|e| csv_row_err(path, &e))?;
        for (buyer, supplier, essential) in self.entries() {
            wtr.write_record([
                buyer.as_str(),
                supplier.as_str(),
                if essential { "1" } else { "0" },
            ])
            .map_err(|e| csv_row_err(path, &e))?;
        }
        wtr.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub(crate) fn csv_open_err(path: &str, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::MalformedRow {
            path: path.into(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

pub(crate) fn csv_row_err(path: &str, e: &csv::Error) -> Error {
    Error::MalformedRow {
        path: path.into(),
        line: e.position().map(|p| p.line()).unwrap_or(0),
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_normalizes() {
        assert_eq!(SectorCode::parse("G46.7.1").unwrap().as_str(), "G46.7.1");
        assert_eq!(SectorCode::parse("g46.71").unwrap().as_str(), "G46.7.1");
        assert_eq!(SectorCode::parse("D3521").unwrap().as_str(), "D35.2.1");
        assert_eq!(SectorCode::parse("K").unwrap().as_str(), "K");
        assert_eq!(SectorCode::parse("Z").unwrap().as_str(), "Z");
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(SectorCode::parse("").is_err());
        assert!(SectorCode::parse("4711").is_err());
        assert!(SectorCode::parse("G4").is_err());
        assert!(SectorCode::parse("G46.7.1.9").is_err());
    }

    #[test]
    fn hierarchy_matching() {
        let code = SectorCode::parse("G46.1.2").unwrap();
        assert!(code.is_within(&SectorCode::parse("G").unwrap()));
        assert!(code.is_within(&SectorCode::parse("G46").unwrap()));
        assert!(code.is_within(&SectorCode::parse("G46.1").unwrap()));
        assert!(code.is_within(&SectorCode::parse("G46.1.2").unwrap()));
        assert!(!code.is_within(&SectorCode::parse("G46.7").unwrap()));
        assert!(!code.is_within(&SectorCode::parse("K").unwrap()));
        // The pattern G46 must not cover a hypothetical G4-prefix collision.
        let other = SectorCode::parse("G47.3.0").unwrap();
        assert!(!other.is_within(&SectorCode::parse("G46").unwrap()));
    }

    #[test]
    fn missing_pairs_are_non_essential() {
        let mut t = CriticalityTable::new();
        let a = SectorCode::parse("C10.1.1").unwrap();
        let b = SectorCode::parse("D35.2.1").unwrap();
        t.set(a.clone(), b.clone(), true);
        assert!(t.is_essential(&a, &b));
        assert!(!t.is_essential(&b, &a));
    }
}
