//! Pmf CSV files: `# key: value` metadata lines, a header of species names
//! followed by `weight`, then one row per support point.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pmf::{LatticeState, SparsePmf};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PmfCsvError {
    #[error("missing header line")]
    MissingHeader,
    #[error("header must be species names followed by `weight`, got {0:?}")]
    BadHeader(Vec<String>),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("line {line}: state {state} appears twice")]
    Duplicate { line: u64, state: LatticeState },
    #[error("csv: {0}")]
    Csv(String),
}

/// A pmf read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PmfTable {
    pub species: Vec<String>,
    pub pmf: SparsePmf,
    pub metadata: BTreeMap<String, String>,
}

/// Sidecar JSON written next to every pmf file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfSidecar {
    pub version: String,
    pub config_hash: String,
    pub model_hash: String,
    pub time: f64,
    pub truncation_loss: f64,
    pub seed: Option<u64>,
    pub support_size: usize,
    pub total_mass: f64,
}

pub fn write_pmf_csv(pmf: &SparsePmf, species: &[String], metadata: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    let one_line = |s: &str| s.replace(['\n', '\r'], " ");
    for (k, v) in metadata {
        out.push_str(&format!("# {}: {}\n", one_line(k), one_line(v)));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = species.iter().map(String::as_str).collect();
    header.push("weight");
    w.write_record(&header).expect("in-memory write");
    for (x, weight) in pmf.iter() {
        let mut row: Vec<String> = x.coords().iter().map(i64::to_string).collect();
        row.push(format!("{weight:?}"));
        w.write_record(&row).expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input"));
    out
}

/// Parses [`write_pmf_csv`] output. Negative weights mark the pmf as signed.
pub fn read_pmf_csv(text: &str) -> Result<PmfTable, PmfCsvError> {
    let mut metadata = BTreeMap::new();
    for line in text.lines() {
        let Some(rest) = line.trim_start().strip_prefix('#') else {
            continue;
        };
        if let Some((k, v)) = rest.split_once(':') {
            metadata.insert(k.trim().to_owned(), v.trim().to_owned());
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(PmfCsvError::MissingHeader),
        Some(r) => r.map_err(|e| PmfCsvError::Csv(e.to_string()))?,
    };
    let header: Vec<String> = header.iter().map(str::to_owned).collect();
    let valid_header = header.len() >= 2
        && header.last().map(String::as_str) == Some("weight")
        && header[..header.len() - 1]
            .iter()
            .all(|s| !s.is_empty() && s != "weight" && !s.starts_with('#'));
    if !valid_header {
        return Err(PmfCsvError::BadHeader(header));
    }
    let dim = header.len() - 1;
    let mut entries: BTreeMap<LatticeState, f64> = BTreeMap::new();
    let mut signed = false;
    for rec in records {
        let rec = rec.map_err(|e| PmfCsvError::Csv(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row_err = |message: String| PmfCsvError::Row { line, message };
        if rec.len() != dim + 1 {
            return Err(row_err(format!("expected {} fields, found {}", dim + 1, rec.len())));
        }
        let coords = rec
            .iter()
            .take(dim)
            .map(|f| f.parse::<i64>().map_err(|_| row_err(format!("`{f}` is not an integer"))))
            .collect::<Result<Vec<_>, _>>()?;
        let wfield = &rec[dim];
        let weight: f64 = wfield
            .parse()
            .map_err(|_| row_err(format!("`{wfield}` is not a number")))?;
        if !weight.is_finite() {
            return Err(row_err(format!("weight `{wfield}` is not finite")));
        }
        signed |= weight < 0.0;
        let state = LatticeState::new(coords);
        if entries.insert(state.clone(), weight).is_some() {
            return Err(PmfCsvError::Duplicate { line, state });
        }
    }
    Ok(PmfTable {
        species: header[..dim].to_vec(),
        pmf: SparsePmf::from_entries(entries, signed),
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        vec!["A".into(), "B".into()]
    }

    #[test]
    fn round_trip() {
        let pmf = SparsePmf::from_entries(
            [
                (LatticeState::from([0, 3]), 0.1),
                (LatticeState::from([2, -1]), 0.30000000000000004),
                (LatticeState::from([5, 5]), 1e-300),
            ],
            false,
        );
        let meta = BTreeMap::from([
            ("config_hash".to_owned(), "abc123".to_owned()),
            ("version".to_owned(), "0.1.0".to_owned()),
        ]);
        let text = write_pmf_csv(&pmf, &names(), &meta);
        assert!(text.starts_with("# config_hash: abc123\n# version: 0.1.0\nA,B,weight\n"));
        let back = read_pmf_csv(&text).unwrap();
        assert_eq!(back.pmf, pmf);
        assert_eq!(back.species, names());
        assert_eq!(back.metadata, meta);
    }

    #[test]
    fn empty_pmf_has_header_only() {
        let text = write_pmf_csv(&SparsePmf::zero(false), &names(), &BTreeMap::new());
        assert_eq!(text, "A,B,weight\n");
        assert!(read_pmf_csv(&text).unwrap().pmf.is_empty());
    }

    #[test]
    fn signed_weights() {
        let t = read_pmf_csv("A,weight\n1,0.5\n2,-0.5\n").unwrap();
        assert!(t.pmf.is_signed());
    }

    #[test]
    fn errors() {
        assert_eq!(read_pmf_csv(""), Err(PmfCsvError::MissingHeader));
        assert!(matches!(read_pmf_csv("A,B\n1,2\n"), Err(PmfCsvError::BadHeader(_))));
        assert!(matches!(read_pmf_csv("weight\n1\n"), Err(PmfCsvError::BadHeader(_))));
        assert!(matches!(read_pmf_csv("\"#A\",weight\n1,1\n"), Err(PmfCsvError::BadHeader(_))));
        assert!(matches!(read_pmf_csv("A,weight\nx,0.5\n"), Err(PmfCsvError::Row { line: 2, .. })));
        assert!(matches!(read_pmf_csv("A,weight\n1,NaN\n"), Err(PmfCsvError::Row { .. })));
        assert!(matches!(read_pmf_csv("A,weight\n1,0.5,3\n"), Err(PmfCsvError::Row { .. })));
        assert!(matches!(
            read_pmf_csv("A,weight\n1,0.5\n1,0.5\n"),
            Err(PmfCsvError::Duplicate { line: 3, .. })
        ));
    }
}
