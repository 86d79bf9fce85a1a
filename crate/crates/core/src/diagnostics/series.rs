//! Per-time diagnostics and their CSV form.
//!
//! CSV columns: `t, mass, density, F, sup_norm, tail_fraction`, then for every
//! scan `scale_i, max_mass_i, corner0_i` (and `corner1_i` in two dimensions).
//! Floats are written in shortest round-trip form, so reading a file back gives
//! bit-identical values.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub scale: f64,
    pub max_mass: f64,
    pub corner: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub mass: f64,
    pub density: f64,
    /// Accumulated `F(t)`; filled by [`accumulate_f`](super::accumulate_f).
    pub f: f64,
    pub sup_norm: f64,
    pub tail_fraction: f64,
    pub scans: Vec<ScanRecord>,
}

impl Record {
    pub fn new(t: f64, mass: f64, density: f64, sup_norm: f64, tail_fraction: f64) -> Self {
        Self {
            t,
            mass,
            density,
            f: 0.0,
            sup_norm,
            tail_fraction,
            scans: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    dim: usize,
    records: Vec<Record>,
}

impl TimeSeries {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            records: Vec::new(),
        }
    }

    pub fn from_records(dim: usize, records: Vec<Record>) -> Result<Self> {
        let mut ts = Self::new(dim);
        for r in records {
            ts.push(r)?;
        }
        Ok(ts)
    }

    /// Appends a record; times must be strictly increasing.
    pub fn push(&mut self, r: Record) -> Result<()> {
        if !r.t.is_finite() {
            return Err(Error::InvalidParameter(format!("record time {} is not finite", r.t)));
        }
        if let Some(last) = self.records.last() {
            if r.t <= last.t {
                return Err(Error::InvalidParameter(format!(
                    "record time {} does not exceed previous time {}",
                    r.t, last.t
                )));
            }
        }
        self.records.push(r);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn records_mut(&mut self) -> &mut [Record] {
        &mut self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let scans = self.records.first().map_or(0, |r| r.scans.len());
        let mut header = String::from("t,mass,density,F,sup_norm,tail_fraction");
        for i in 0..scans {
            header.push_str(&format!(",scale_{i},max_mass_{i},corner0_{i}"));
            if self.dim == 2 {
                header.push_str(&format!(",corner1_{i}"));
            }
        }
        writeln!(w, "{header}")?;
        for r in &self.records {
            if r.scans.len() != scans {
                return Err(Error::Format("records carry different numbers of scans".into()));
            }
            let mut line = format!(
                "{},{},{},{},{},{}",
                r.t, r.mass, r.density, r.f, r.sup_norm, r.tail_fraction
            );
            for s in &r.scans {
                line.push_str(&format!(",{},{},{}", s.scale, s.max_mass, s.corner[0]));
                if self.dim == 2 {
                    line.push_str(&format!(",{}", s.corner[1]));
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(dim: usize, r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty diagnostics CSV".into()))??;
        let columns = header.split(',').count();
        let per_scan = if dim == 2 { 4 } else { 3 };
        if columns < 6 || (columns - 6) % per_scan != 0 {
            return Err(Error::Format(format!("unexpected header '{header}'")));
        }
        let scans = (columns - 6) / per_scan;
        let mut ts = Self::new(dim);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != columns {
                return Err(Error::Format(format!(
                    "line {}: expected {columns} columns, found {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i].parse().map_err(|_| {
                    Error::Format(format!("line {}: bad number '{}'", lineno + 2, fields[i]))
                })
            };
            let idx = |i: usize| -> Result<usize> {
                fields[i].parse().map_err(|_| {
                    Error::Format(format!("line {}: bad index '{}'", lineno + 2, fields[i]))
                })
            };
            let mut rec = Record::new(num(0)?, num(1)?, num(2)?, num(4)?, num(5)?);
            rec.f = num(3)?;
            for s in 0..scans {
                let base = 6 + s * per_scan;
                let corner1 = if dim == 2 { idx(base + 3)? } else { 0 };
                rec.scans.push(ScanRecord {
                    scale: num(base)?,
                    max_mass: num(base + 1)?,
                    corner: [idx(base + 2)?, corner1],
                });
            }
            ts.push(rec)?;
        }
        Ok(ts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64) -> Record {
        let mut r = Record::new(t, 1.0, t * t, 2.0 + t, 1e-17 * t);
        r.f = 0.1 * t + 1.0 / 3.0;
        r
    }

    #[test]
    fn times_must_increase() {
        let mut ts = TimeSeries::new(1);
        ts.push(rec(0.0)).unwrap();
        assert!(ts.push(rec(0.0)).is_err());
        assert!(ts.push(rec(-1.0)).is_err());
        ts.push(rec(0.5)).unwrap();
        assert_eq!(ts.times(), vec![0.0, 0.5]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        for dim in [1, 2] {
            let mut records: Vec<Record> = (0..5).map(|i| rec(0.1 * i as f64 + 1e-3)).collect();
            for (i, r) in records.iter_mut().enumerate() {
                r.scans.push(ScanRecord {
                    scale: 0.7,
                    max_mass: 0.3 + i as f64 / 7.0,
                    corner: [i, if dim == 2 { 2 * i } else { 0 }],
                });
            }
            let ts = TimeSeries::from_records(dim, records).unwrap();
            let mut buf = Vec::new();
            ts.write_csv(&mut buf).unwrap();
            let back = TimeSeries::read_csv(dim, buf.as_slice()).unwrap();
            assert_eq!(back, ts);
        }
    }

    #[test]
    fn malformed_csv() {
        let text = "t,mass,density,F,sup_norm,tail_fraction\n0,1,2,3\n";
        assert!(matches!(
            TimeSeries::read_csv(1, text.as_bytes()),
            Err(Error::Format(m)) if m.contains("line 2")
        ));
        assert!(TimeSeries::read_csv(1, "".as_bytes()).is_err());
    }
}
