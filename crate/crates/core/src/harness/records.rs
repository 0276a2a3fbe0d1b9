use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 11] = [
    "kind",
    "n",
    "s",
    "phi",
    "field",
    "error_norm",
    "f_norm",
    "modulus",
    "bound",
    "ratio",
    "wall_time_ms",
];

/// One row of a convergence run.
///
/// A row whose computation failed keeps `NaN` in the quantities it could
/// not produce and carries the error text in `flag` (not written to CSV).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub kind: String,
    pub n: u32,
    pub s: u32,
    pub phi: String,
    pub field: String,
    pub error_norm: f64,
    pub f_norm: f64,
    pub modulus: f64,
    pub bound: f64,
    pub ratio: f64,
    pub wall_time_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl ConvergenceRecord {
    pub fn is_flagged(&self) -> bool {
        self.flag.is_some()
    }

    fn to_row(&self) -> [String; 11] {
        [
            self.kind.clone(),
            self.n.to_string(),
            self.s.to_string(),
            self.phi.clone(),
            self.field.clone(),
            fmt_real(self.error_norm),
            fmt_real(self.f_norm),
            fmt_real(self.modulus),
            fmt_real(self.bound),
            fmt_real(self.ratio),
            fmt_real(self.wall_time_ms),
        ]
    }

    fn from_row(row: &csv::StringRecord) -> Result<Self> {
        if row.len() != CSV_COLUMNS.len() {
            return Err(Error::Io(format!("expected 11 columns, got {}", row.len())));
        }
        let int = |i: usize| -> Result<u32> {
            row[i].parse().map_err(|_| Error::Io(format!("bad integer `{}` in column {}", &row[i], CSV_COLUMNS[i])))
        };
        let real = |i: usize| -> Result<f64> {
            row[i].parse().map_err(|_| Error::Io(format!("bad real `{}` in column {}", &row[i], CSV_COLUMNS[i])))
        };
        Ok(Self {
            kind: row[0].to_string(),
            n: int(1)?,
            s: int(2)?,
            phi: row[3].to_string(),
            field: row[4].to_string(),
            error_norm: real(5)?,
            f_norm: real(6)?,
            modulus: real(7)?,
            bound: real(8)?,
            ratio: real(9)?,
            wall_time_ms: real(10)?,
            flag: None,
        })
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn write_csv<W: Write>(out: W, records: &[ConvergenceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record(r.to_row())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, records: &[ConvergenceRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_csv(file, records)
}

pub fn csv_string(records: &[ConvergenceRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ConvergenceRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::Io(format!("unexpected CSV header: {header:?}")));
    }
    rdr.records().map(|row| ConvergenceRecord::from_row(&row?)).collect()
}

pub fn read_csv_file(path: &Path) -> Result<Vec<ConvergenceRecord>> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(error_norm: f64, ratio: f64) -> ConvergenceRecord {
        ConvergenceRecord {
            kind: "mkz".into(),
            n: 16,
            s: 0,
            phi: "power:p=2".into(),
            field: "quadratic".into(),
            error_norm,
            f_norm: 0.1,
            modulus: 1.0 / 3.0,
            bound: 0.339,
            ratio,
            wall_time_ms: 0.0,
            flag: None,
        }
    }

    #[test]
    fn header_is_exact() {
        let text = csv_string(&[record(1e-3, 0.5)]).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "kind,n,s,phi,field,error_norm,f_norm,modulus,bound,ratio,wall_time_ms"
        );
    }

    #[test]
    fn flagged_rows_survive_as_nan() {
        let text = csv_string(&[record(f64::NAN, f64::NAN)]).unwrap();
        let back = read_csv(text.as_bytes()).unwrap();
        assert!(back[0].error_norm.is_nan());
    }

    #[test]
    fn bad_header_rejected() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn rows_round_trip(e in 0.0f64..1e6, r in prop::num::f64::POSITIVE, n in 1u32..100000) {
            let mut rec = record(e, r);
            rec.n = n;
            let text = csv_string(&[rec.clone()]).unwrap();
            let back = read_csv(text.as_bytes()).unwrap();
            prop_assert_eq!(back, vec![rec]);
        }
    }
}
