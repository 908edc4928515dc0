//! Sampled trajectories `t ↦ X(t)` with CSV and JSON encodings.
//!
//! CSV layout: header `t,x11,x12,…,xdd`, one row per time, entries row-major.
//! A flagged table starts with the comment line `# unsupported-hypothesis`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::piecewise::PiecewiseMatrixPolynomial;
use crate::system::TimeKind;

pub const UNSUPPORTED_MARKER: &str = "# unsupported-hypothesis";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct TrajectoryTable {
    kind: TimeKind,
    times: Vec<f64>,
    values: Vec<Matrix>,
    unsupported_hypothesis: bool,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    kind: TimeKind,
    times: Vec<f64>,
    values: Vec<Matrix>,
    #[serde(default)]
    unsupported_hypothesis: bool,
}

impl TryFrom<TableRepr> for TrajectoryTable {
    type Error = Error;

    fn try_from(r: TableRepr) -> Result<Self> {
        let mut t = Self::new(r.kind, r.times, r.values)?;
        t.unsupported_hypothesis = r.unsupported_hypothesis;
        Ok(t)
    }
}

impl From<TrajectoryTable> for TableRepr {
    fn from(t: TrajectoryTable) -> Self {
        Self {
            kind: t.kind,
            times: t.times,
            values: t.values,
            unsupported_hypothesis: t.unsupported_hypothesis,
        }
    }
}

impl TrajectoryTable {
    pub fn new(kind: TimeKind, times: Vec<f64>, values: Vec<Matrix>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Format(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::Format("trajectory table is empty".into()));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::Format(format!(
                "times must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if kind == TimeKind::Discrete {
            if let Some(t) = times.iter().find(|t| t.fract() != 0.0) {
                return Err(Error::Format(format!("discrete time {t} is not an integer")));
            }
        }
        let dim = values[0].dim();
        for v in &values {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.dim(),
                });
            }
        }
        Ok(Self {
            kind,
            times,
            values,
            unsupported_hypothesis: false,
        })
    }

    /// Samples `x` at `from, from + step, …`, ending exactly at `to`.
    pub fn sample(
        kind: TimeKind,
        x: &PiecewiseMatrixPolynomial,
        from: f64,
        to: f64,
        step: f64,
    ) -> Result<Self> {
        let times = sample_grid(from, to, step)?;
        let values = times.iter().map(|&t| x.eval(t)).collect();
        Self::new(kind, times, values)
    }

    pub fn kind(&self) -> TimeKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.values[0].dim()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn unsupported_hypothesis(&self) -> bool {
        self.unsupported_hypothesis
    }

    pub fn set_unsupported_hypothesis(&mut self, flag: bool) {
        self.unsupported_hypothesis = flag;
    }

    /// Value stored at exactly time `t`.
    pub fn at(&self, t: f64) -> Option<&Matrix> {
        self.times
            .binary_search_by(|x| x.total_cmp(&t))
            .ok()
            .map(|i| &self.values[i])
    }

    /// Largest entrywise difference over shared times.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.times != other.times {
            return Err(Error::Format("tables have different time grids".into()));
        }
        let mut worst = 0.0f64;
        for (a, b) in self.values.iter().zip(&other.values) {
            a.check_same_dim(b)?;
            worst = worst.max(a.max_abs_diff(b));
        }
        Ok(worst)
    }

    pub fn header(&self) -> Vec<String> {
        let d = self.dim();
        let mut h = vec!["t".to_string()];
        for i in 1..=d {
            for j in 1..=d {
                h.push(format!("x{i}{j}"));
            }
        }
        h
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if self.unsupported_hypothesis {
            writeln!(out, "{UNSUPPORTED_MARKER}").map_err(io_err)?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header()).map_err(csv_err)?;
        for (t, v) in self.times.iter().zip(&self.values) {
            let mut row = vec![t.to_string()];
            row.extend(v.as_slice().iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(kind: TimeKind, mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text).map_err(io_err)?;
        let flagged = text
            .lines()
            .next()
            .is_some_and(|l| l.trim() == UNSUPPORTED_MARKER);
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = r.headers().map_err(csv_err)?.clone();
        let cols = header.len();
        let d = (cols.saturating_sub(1) as f64).sqrt() as usize;
        if d == 0 || d * d + 1 != cols || &header[0] != "t" {
            return Err(Error::Format(format!(
                "line 1: header must be t,x11,…,xdd; got {cols} columns"
            )));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line());
            let parsed: std::result::Result<Vec<f64>, _> =
                rec.iter().map(str::parse::<f64>).collect();
            let row = parsed
                .map_err(|e| Error::Format(format!("line {line}: {e}")))?;
            if row.len() != cols {
                return Err(Error::Format(format!(
                    "line {line}: expected {cols} fields, got {}",
                    row.len()
                )));
            }
            times.push(row[0]);
            values.push(
                Matrix::from_row_major(d, row[1..].to_vec())
                    .map_err(|e| Error::Format(format!("line {line}: {e}")))?,
            );
        }
        let mut table = Self::new(kind, times, values)?;
        table.unsupported_hypothesis = flagged;
        Ok(table)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

/// `from, from + step, …, to`; the last point snaps to `to` when within
/// `1e−9·step` of it.
pub fn sample_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidConfig(format!("step must be positive, got {step}")));
    }
    if !(from.is_finite() && to.is_finite() && from <= to) {
        return Err(Error::InvalidConfig(format!(
            "sampling range [{from}, {to}] is invalid"
        )));
    }
    let span = (to - from) / step;
    let mut n = span.floor() as usize;
    if span - (n as f64) > 1.0 - 1e-9 {
        n += 1;
    }
    let mut times: Vec<f64> = (0..=n).map(|i| from + i as f64 * step).collect();
    let last = times.last_mut().expect("non-empty");
    if (to - *last).abs() <= 1e-9 * step {
        *last = to;
    } else {
        times.push(to);
    }
    Ok(times)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(match e.position() {
        Some(p) => format!("line {}: {e}", p.line()),
        None => e.to_string(),
    })
}

fn io_err(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}
