//! CSV encoding of simulation traces.
//!
//! One header row, then one row per sample. Column order:
//! `t, q1..qN, qdot1..qdotN, x, y, z, xdot, ydot, zdot, dx_norm, speed,
//! u_raw1..N, u_filtered1..N, d_hat1..N, kv1..N, fmus1..N`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::metrics::MotionSamples;
use crate::scalar::Real;
use crate::sim::SimTrace;

pub fn header(dof: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["q", "qdot"] {
        h.extend((1..=dof).map(|i| format!("{prefix}{i}")));
    }
    h.extend(["x", "y", "z", "xdot", "ydot", "zdot", "dx_norm", "speed"].map(String::from));
    for prefix in ["u_raw", "u_filtered", "d_hat", "kv", "fmus"] {
        h.extend((1..=dof).map(|i| format!("{prefix}{i}")));
    }
    h
}

pub fn write_trace_csv<T: Real, W: Write>(trace: &SimTrace<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Trace(e.to_string());
    w.write_record(header(trace.dof)).map_err(io)?;
    for r in &trace.records {
        let mut row: Vec<f64> = vec![r.t.f64()];
        row.extend(r.q.iter().map(|v| v.f64()));
        row.extend(r.qdot.iter().map(|v| v.f64()));
        row.extend(r.x.iter().map(|v| v.f64()));
        row.extend(r.xdot.iter().map(|v| v.f64()));
        row.push(r.dx_norm.f64());
        row.push(r.speed.f64());
        for v in [&r.u_raw, &r.u_filtered, &r.d_hat, &r.kv_diag, &r.fmus_diag] {
            row.extend(v.iter().map(|x| x.f64()));
        }
        w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// A trace read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn dof(&self) -> usize {
        // 1 + 7N + 8 columns.
        (self.columns.len() - 9) / 7
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn samples(&self) -> Result<MotionSamples> {
        let idx = |n: &str| {
            self.column(n)
                .ok_or_else(|| Error::Trace(format!("missing column '{n}'")))
        };
        let (t, x, y, z, speed) = (idx("t")?, idx("x")?, idx("y")?, idx("z")?, idx("speed")?);
        let mut s = MotionSamples::default();
        for r in &self.rows {
            s.t.push(r[t]);
            s.position.push([r[x], r[y], r[z]]);
            s.speed.push(r[speed]);
        }
        Ok(s)
    }
}

/// Parses a trace CSV. Errors name the offending row (1-based, header is
/// row 1).
pub fn read_trace_csv<R: Read>(input: R) -> Result<TraceTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let columns: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Trace(format!("row 1: {e}")))?
        .iter()
        .map(String::from)
        .collect();
    if columns.is_empty() || columns.iter().all(|c| c.is_empty()) {
        return Err(Error::Trace("empty trace file".into()));
    }
    if columns.len() < 16 || !(columns.len() - 9).is_multiple_of(7) {
        return Err(Error::Trace(format!(
            "row 1: unexpected column count {}",
            columns.len()
        )));
    }
    let dof = (columns.len() - 9) / 7;
    if columns != header(dof) {
        return Err(Error::Trace("row 1: header does not match the trace layout".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row_no = i + 2;
        let rec = rec.map_err(|e| Error::Trace(format!("row {row_no}: {e}")))?;
        if rec.len() != columns.len() {
            return Err(Error::Trace(format!(
                "row {row_no}: expected {} fields, found {}",
                columns.len(),
                rec.len()
            )));
        }
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Trace(format!("row {row_no}: {e}")))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Trace("trace has no data rows".into()));
    }
    Ok(TraceTable { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let h = header(2);
        assert_eq!(h.len(), 1 + 7 * 2 + 8);
        assert_eq!(&h[..5], &["t", "q1", "q2", "qdot1", "qdot2"]);
        assert_eq!(h.last().unwrap(), "fmus2");
    }

    #[test]
    fn rejects_empty_and_malformed() {
        assert!(read_trace_csv("".as_bytes()).is_err());
        let mut text = header(1).join(",");
        text.push('\n');
        assert!(read_trace_csv(text.as_bytes()).is_err());
        let row: Vec<String> = (0..16).map(|i| i.to_string()).collect();
        let mut bad = row.clone();
        bad[3] = "abc".into();
        let text = format!("{}\n{}\n{}\n", header(1).join(","), row.join(","), bad.join(","));
        let err = read_trace_csv(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
    }
}
