//! CSV readers and writers. Row numbers in diagnostics count data rows from
//! 1, header excluded.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use mpcr_core::model::{MpcrDataset, Slot, UnitRecord};
use mpcr_core::pairing::ClusterProfile;

use crate::CliError;

struct Table {
    name: String,
    columns: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn from_reader(name: &str, reader: impl Read, required: &[&str], optional: &[&str]) -> Result<Table, CliError> {
        let fail = |msg: String| CliError::Validation(format!("{name}: {msg}"));
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| fail(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        for want in required {
            if !columns.iter().any(|c| c == want) {
                return Err(fail(format!("missing column \"{want}\"")));
            }
        }
        let expected: Vec<&str> = required.iter().chain(optional).copied().collect();
        for (i, c) in columns.iter().enumerate() {
            if expected.get(i) != Some(&c.as_str()) {
                return Err(fail(format!(
                    "unexpected column \"{c}\"; expected header {}",
                    expected.join(",")
                )));
            }
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            rows.push(rec.map_err(|e| fail(format!("row {}: {e}", i + 1)))?);
        }
        Ok(Table {
            name: name.to_string(),
            columns,
            rows,
        })
    }

    fn has(&self, column: &str) -> bool {
        self.columns.iter().any(|c| c == column)
    }

    fn cell<'a>(&self, row: &'a csv::StringRecord, column: &str) -> &'a str {
        let i = self.columns.iter().position(|c| c == column).expect("known column");
        row.get(i).unwrap_or("")
    }

    fn error(&self, row: usize, column: &str, msg: impl std::fmt::Display) -> CliError {
        CliError::Validation(format!("{}: row {}, column \"{column}\": {msg}", self.name, row + 1))
    }

    fn parse<T: FromStr>(&self, row: usize, column: &str, what: &str) -> Result<T, CliError> {
        let raw = self.cell(&self.rows[row], column);
        raw.parse()
            .map_err(|_| self.error(row, column, format!("expected {what}, got {raw:?}")))
    }

    fn text(&self, row: usize, column: &str) -> Result<String, CliError> {
        let raw = self.cell(&self.rows[row], column);
        if raw.is_empty() {
            return Err(self.error(row, column, "empty value"));
        }
        Ok(raw.to_string())
    }

    fn slot(&self, row: usize) -> Result<Slot, CliError> {
        let n: i64 = self.parse(row, "cluster_slot", "1 or 2")?;
        Slot::from_number(n).ok_or_else(|| self.error(row, "cluster_slot", format!("expected 1 or 2, got {n}")))
    }

    fn finite(&self, row: usize, column: &str) -> Result<f64, CliError> {
        let x: f64 = self.parse(row, column, "a number")?;
        if !x.is_finite() {
            return Err(self.error(row, column, format!("expected a finite number, got {x}")));
        }
        Ok(x)
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Each `read_*` function opens a file; the matching `parse_*` function takes
/// its text, with `name` used in diagnostics.
macro_rules! from_path {
    ($read:ident, $parse:ident, $out:ty) => {
        pub fn $read(path: &Path) -> Result<$out, CliError> {
            $parse(&path.display().to_string(), &read_text(path)?)
        }
    };
}

from_path!(read_units_csv, parse_units_csv, Vec<UnitRecord>);
from_path!(read_assignments_csv, parse_assignments_csv, BTreeMap<String, i64>);
from_path!(read_clusters_csv, parse_clusters_csv, BTreeMap<(String, Slot), u64>);
from_path!(read_profiles_csv, parse_profiles_csv, Vec<ClusterProfile>);
from_path!(read_lost_csv, parse_lost_csv, Vec<(String, Slot)>);
from_path!(read_groups_csv, parse_groups_csv, BTreeMap<String, String>);

/// `pair_id,cluster_slot,outcome[,receipt]`.
pub fn parse_units_csv(name: &str, text: &str) -> Result<Vec<UnitRecord>, CliError> {
    let t = Table::from_reader(
        name,
        text.as_bytes(),
        &["pair_id", "cluster_slot", "outcome"],
        &["receipt"],
    )?;
    let with_receipt = t.has("receipt");
    let mut given = None;
    let mut units = Vec::with_capacity(t.rows.len());
    for i in 0..t.rows.len() {
        let receipt = if with_receipt && !t.cell(&t.rows[i], "receipt").is_empty() {
            let r: u8 = t.parse(i, "receipt", "0 or 1")?;
            if r > 1 {
                return Err(t.error(i, "receipt", format!("expected 0 or 1, got {r}")));
            }
            Some(r)
        } else {
            None
        };
        match given {
            None => given = Some(receipt.is_some()),
            Some(g) if g != receipt.is_some() => {
                return Err(CliError::Validation(format!(
                    "{}: partial receipts: row {} {} a receipt but row 1 {}",
                    t.name,
                    i + 1,
                    if receipt.is_some() { "has" } else { "lacks" },
                    if g { "has one" } else { "does not" }
                )))
            }
            _ => {}
        }
        units.push(UnitRecord {
            pair_id: t.text(i, "pair_id")?,
            slot: t.slot(i)?,
            outcome: t.finite(i, "outcome")?,
            receipt,
        });
    }
    if units.is_empty() {
        return Err(CliError::Validation(format!("{}: no data rows", t.name)));
    }
    Ok(units)
}

/// `pair_id,z`.
pub fn parse_assignments_csv(name: &str, text: &str) -> Result<BTreeMap<String, i64>, CliError> {
    let t = Table::from_reader(name, text.as_bytes(), &["pair_id", "z"], &[])?;
    let mut out = BTreeMap::new();
    for i in 0..t.rows.len() {
        let id = t.text(i, "pair_id")?;
        let z: i64 = t.parse(i, "z", "0 or 1")?;
        if out.insert(id.clone(), z).is_some() {
            return Err(t.error(i, "pair_id", format!("duplicate pair {id}")));
        }
    }
    Ok(out)
}

/// `pair_id,cluster_slot,population_size`.
pub fn parse_clusters_csv(name: &str, text: &str) -> Result<BTreeMap<(String, Slot), u64>, CliError> {
    let t = Table::from_reader(
        name,
        text.as_bytes(),
        &["pair_id", "cluster_slot", "population_size"],
        &[],
    )?;
    let mut out = BTreeMap::new();
    for i in 0..t.rows.len() {
        let key = (t.text(i, "pair_id")?, t.slot(i)?);
        let pop: u64 = t.parse(i, "population_size", "a nonnegative integer")?;
        if out.insert(key.clone(), pop).is_some() {
            return Err(t.error(i, "pair_id", format!("duplicate cluster {}, slot {}", key.0, key.1)));
        }
    }
    Ok(out)
}

/// `cluster_id,size[,cov_1..cov_p]`; the header fixes the arity.
pub fn parse_profiles_csv(name: &str, text: &str) -> Result<Vec<ClusterProfile>, CliError> {
    let arity = text
        .lines()
        .next()
        .map_or(0, |h| h.split(',').count().saturating_sub(2));
    let covs: Vec<String> = (1..=arity).map(|d| format!("cov_{d}")).collect();
    let cov_refs: Vec<&str> = covs.iter().map(String::as_str).collect();
    let t = Table::from_reader(name, text.as_bytes(), &["cluster_id", "size"], &cov_refs)?;
    let mut out = Vec::with_capacity(t.rows.len());
    for i in 0..t.rows.len() {
        out.push(ClusterProfile::new(
            t.text(i, "cluster_id")?,
            t.finite(i, "size")?,
            cov_refs.iter().map(|c| t.finite(i, c)).collect::<Result<_, _>>()?,
        ));
    }
    Ok(out)
}

/// `pair_id,cluster_slot` rows naming clusters lost after randomization.
pub fn parse_lost_csv(name: &str, text: &str) -> Result<Vec<(String, Slot)>, CliError> {
    let t = Table::from_reader(name, text.as_bytes(), &["pair_id", "cluster_slot"], &[])?;
    (0..t.rows.len())
        .map(|i| Ok((t.text(i, "pair_id")?, t.slot(i)?)))
        .collect()
}

/// `pair_id,group`.
pub fn parse_groups_csv(name: &str, text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let t = Table::from_reader(name, text.as_bytes(), &["pair_id", "group"], &[])?;
    let mut out = BTreeMap::new();
    for i in 0..t.rows.len() {
        let id = t.text(i, "pair_id")?;
        if out.insert(id.clone(), t.text(i, "group")?).is_some() {
            return Err(t.error(i, "pair_id", format!("duplicate pair {id}")));
        }
    }
    Ok(out)
}

fn csv_err(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("writing csv: {e}"))
}

/// Writes the units, assignment and population tables of a dataset.
pub fn write_dataset(
    ds: &MpcrDataset,
    units: impl Write,
    assignments: impl Write,
    clusters: Option<impl Write>,
) -> Result<(), CliError> {
    let mut u = csv::Writer::from_writer(units);
    let receipts = ds.has_receipts();
    let mut header = vec!["pair_id", "cluster_slot", "outcome"];
    if receipts {
        header.push("receipt");
    }
    u.write_record(&header).map_err(csv_err)?;
    let mut a = csv::Writer::from_writer(assignments);
    a.write_record(["pair_id", "z"]).map_err(csv_err)?;
    let mut c = clusters.map(csv::Writer::from_writer);
    if let Some(c) = c.as_mut() {
        c.write_record(["pair_id", "cluster_slot", "population_size"])
            .map_err(csv_err)?;
    }
    for p in ds.pairs() {
        a.write_record([p.pair_id.clone(), p.assignment().to_string()])
            .map_err(csv_err)?;
        for slot in [Slot::First, Slot::Second] {
            let cl = p.cluster(slot);
            for (i, y) in cl.outcomes().iter().enumerate() {
                let mut rec = vec![p.pair_id.clone(), slot.to_string(), y.to_string()];
                if let Some(r) = cl.receipts() {
                    rec.push((r[i] as u8).to_string());
                }
                u.write_record(&rec).map_err(csv_err)?;
            }
            if let (Some(c), Some(pop)) = (c.as_mut(), cl.population_size()) {
                c.write_record([p.pair_id.clone(), slot.to_string(), pop.to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    u.flush().map_err(csv_err)?;
    a.flush().map_err(csv_err)?;
    if let Some(mut c) = c {
        c.flush().map_err(csv_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units(text: &str) -> Result<Vec<UnitRecord>, CliError> {
        parse_units_csv("units.csv", text)
    }

    #[test]
    fn well_formed_units() {
        let u =
            units("pair_id,cluster_slot,outcome\n1,1,2\n1,1,4\n1,2,1\n1,2,3\n2,1,0\n2,1,2\n2,2,5\n2,2,7\n").unwrap();
        assert_eq!(u.len(), 8);
        assert_eq!((u[2].slot, u[2].outcome, u[2].receipt), (Slot::Second, 1.0, None));
    }

    #[test]
    fn diagnostics_name_row_and_column() {
        let e = units("pair_id,cluster_slot,outcome\n1,1,2\n1,1,4\n1,2,1\n1,2,3\n2,1,abc\n").unwrap_err();
        assert_eq!(
            e.to_string(),
            "units.csv: row 5, column \"outcome\": expected a number, got \"abc\""
        );
        let e = units("pair_id,cluster_slot\n1,1\n").unwrap_err();
        assert!(e.to_string().contains("missing column \"outcome\""));
        let e = units("pair_id,cluster_slot,outcome,extra\n1,1,2,0\n").unwrap_err();
        assert!(e.to_string().contains("unexpected column \"extra\""));
        let e = units("pair_id,cluster_slot,outcome\n1,3,2\n").unwrap_err();
        assert!(e.to_string().contains("row 1, column \"cluster_slot\""));
        let e = units("pair_id,cluster_slot,outcome,receipt\n1,1,2,2\n").unwrap_err();
        assert!(e.to_string().contains("column \"receipt\""));
    }

    #[test]
    fn partial_receipts() {
        let e = units("pair_id,cluster_slot,outcome,receipt\n1,1,2,1\n1,1,4,\n1,2,1,0\n1,2,3,\n").unwrap_err();
        assert!(e.to_string().contains("partial receipts"), "{e}");
        let none = units("pair_id,cluster_slot,outcome,receipt\n1,1,2,\n1,2,1,\n").unwrap();
        assert!(none.iter().all(|u| u.receipt.is_none()));
    }
}
