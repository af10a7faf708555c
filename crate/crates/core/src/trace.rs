//! Diagnostic records and the versioned CSV table format they are written in.
//!
//! A table file starts with `# opk-schema: <name>/<version>`, followed by one
//! `# key=value` line per resolved parameter, the column header, and the rows.
//! Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::{to_f64, Real};

pub const KINETIC_SCHEMA: &str = "kinetic/1";
pub const MACRO_SCHEMA: &str = "macro/1";
pub const PARTICLE_SCHEMA: &str = "particle/1";

pub const KINETIC_COLUMNS: [&str; 5] = ["t", "mass", "mean", "variance", "residual"];
pub const MACRO_COLUMNS: [&str; 5] = ["t", "conserved", "entropy", "dissipation_rhs", "amplitude"];
pub const PARTICLE_COLUMNS: [&str; 3] = ["t", "mean", "variance"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KineticRecord<T> {
    pub t: T,
    pub mass: T,
    pub mean: T,
    pub variance: T,
    pub residual: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacroRecord<T> {
    pub t: T,
    pub conserved: T,
    pub entropy: T,
    pub dissipation_rhs: T,
    pub amplitude: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleRecord<T> {
    pub t: T,
    pub mean: T,
    pub variance: T,
    /// Per-bin `(ρ̂, φ̂)` in spatial runs; `φ̂` is NaN in empty bins.
    pub bins: Option<(Vec<T>, Vec<T>)>,
}

/// A parsed or to-be-written CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: String,
    pub params: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(schema: &str, columns: &[&str]) -> Self {
        Table {
            schema: schema.to_string(),
            params: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_params(mut self, params: Vec<(String, String)>) -> Self {
        self.params = params;
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match columns");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# opk-schema: {}", self.schema);
        for (k, v) in &self.params {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| Error::Io("empty table".into()))??;
        let schema = first
            .strip_prefix("# opk-schema: ")
            .ok_or_else(|| Error::Io("missing schema line".into()))?
            .trim()
            .to_string();
        let mut params = Vec::new();
        let mut columns = None;
        let mut rows = Vec::new();
        for line in lines {
            let line = line?;
            if let Some(rest) = line.strip_prefix("# ") {
                if columns.is_none() {
                    if let Some((k, v)) = rest.split_once('=') {
                        params.push((k.to_string(), v.to_string()));
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            match columns {
                None => columns = Some(line.split(',').map(str::to_string).collect::<Vec<_>>()),
                Some(ref cols) => {
                    let row = line
                        .split(',')
                        .map(|c| c.parse::<f64>().map_err(|e| Error::Io(format!("bad number '{c}': {e}"))))
                        .collect::<Result<Vec<f64>>>()?;
                    if row.len() != cols.len() {
                        return Err(Error::Io(format!("row has {} cells, header has {}", row.len(), cols.len())));
                    }
                    rows.push(row);
                }
            }
        }
        let columns = columns.ok_or_else(|| Error::Io("missing column header".into()))?;
        Ok(Table { schema, params, columns, rows })
    }
}

pub fn kinetic_table<T: Real>(records: &[KineticRecord<T>]) -> Table {
    let mut t = Table::new(KINETIC_SCHEMA, &KINETIC_COLUMNS);
    for r in records {
        t.push([r.t, r.mass, r.mean, r.variance, r.residual].iter().map(|&x| to_f64(x)).collect());
    }
    t
}

pub fn macro_table<T: Real>(records: &[MacroRecord<T>]) -> Table {
    let mut t = Table::new(MACRO_SCHEMA, &MACRO_COLUMNS);
    for r in records {
        t.push([r.t, r.conserved, r.entropy, r.dissipation_rhs, r.amplitude].iter().map(|&x| to_f64(x)).collect());
    }
    t
}

/// Particle trace; spatial runs append `rho_<k>` and `phi_<k>` columns per bin.
pub fn particle_table<T: Real>(records: &[ParticleRecord<T>]) -> Table {
    let bins = records.iter().find_map(|r| r.bins.as_ref().map(|b| b.0.len())).unwrap_or(0);
    let mut cols: Vec<String> = PARTICLE_COLUMNS.iter().map(|c| c.to_string()).collect();
    cols.extend((0..bins).map(|k| format!("rho_{k}")));
    cols.extend((0..bins).map(|k| format!("phi_{k}")));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(PARTICLE_SCHEMA, &col_refs);
    for r in records {
        let mut row = vec![to_f64(r.t), to_f64(r.mean), to_f64(r.variance)];
        match &r.bins {
            Some((rho, phi)) => {
                row.extend(rho.iter().map(|&x| to_f64(x)));
                row.extend(phi.iter().map(|&x| to_f64(x)));
            }
            None => row.extend(std::iter::repeat(f64::NAN).take(2 * bins)),
        }
        t.push(row);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = Table::new(KINETIC_SCHEMA, &KINETIC_COLUMNS)
            .with_params(vec![("gamma".into(), "0.05".into()), ("rate_mode".into(), "symmetric".into())]);
        t.push(vec![0.0, 1.0, 0.1 + 0.2, 1.0 / 3.0, f64::NAN]);
        t.push(vec![1e-300, 1.0, -2.5e10, std::f64::consts::PI, 0.0]);
        let text = t.to_csv();
        assert!(text.starts_with("# opk-schema: kinetic/1\n# gamma=0.05\n"));
        let back = Table::read(text.as_bytes()).unwrap();
        assert_eq!(back.schema, t.schema);
        assert_eq!(back.params, t.params);
        assert_eq!(back.columns, t.columns);
        assert_eq!(back.rows[1], t.rows[1]);
        assert_eq!(back.rows[0][2], 0.1 + 0.2);
        assert!(back.rows[0][4].is_nan());
    }

    #[test]
    fn missing_schema_is_rejected() {
        assert!(Table::read("t,mass\n0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn particle_columns_expand_with_bins() {
        let rec = ParticleRecord { t: 0.0, mean: 0.0, variance: 1.0, bins: Some((vec![1.0; 4], vec![0.5; 4])) };
        let t = particle_table(&[rec]);
        assert_eq!(t.columns.len(), 3 + 8);
        assert_eq!(t.columns[3], "rho_0");
        assert_eq!(t.columns[7], "phi_0");
    }
}
