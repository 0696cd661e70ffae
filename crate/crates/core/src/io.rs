//! Trace CSV reading and writing, and plot-data tables.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::{PowerSeries, Sample};

pub const TRACE_HEADER: [&str; 3] = ["t", "rx1_dbm", "rx2_dbm"];

/// Formats a float with 17 significant digits, enough to round-trip.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn parse_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        msg: msg.into(),
    }
}

/// Reads paired traces from CSV text with header `t,rx1_dbm,rx2_dbm`.
pub fn read_traces(reader: impl Read, resolution: f64) -> Result<(PowerSeries, PowerSeries)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(parse_err(
            1,
            format!("expected header `{}`, found `{}`", TRACE_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, found {}", rec.len())));
        }
        let t: i64 = rec[0]
            .parse()
            .map_err(|_| parse_err(line, format!("time step `{}` is not an integer", &rec[0])))?;
        let field = |k: usize, name: &str| -> Result<f64> {
            let v: f64 = rec[k]
                .parse()
                .map_err(|_| parse_err(line, format!("{name} `{}` is not a number", &rec[k])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("{name} is not finite")));
            }
            Ok(v)
        };
        let x = field(1, "rx1_dbm")?;
        let y = field(2, "rx2_dbm")?;
        if let Some(prev) = xs.last().map(|s: &Sample| s.t) {
            if t <= prev {
                return Err(parse_err(line, format!("time step {t} does not increase (previous {prev})")));
            }
        }
        xs.push(Sample { t, dbm: x });
        ys.push(Sample { t, dbm: y });
    }
    if xs.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    Ok((PowerSeries::new(xs, resolution)?, PowerSeries::new(ys, resolution)?))
}

pub fn ingest(path: &Path, resolution: f64) -> Result<(PowerSeries, PowerSeries)> {
    let file = std::fs::File::open(path)?;
    read_traces(std::io::BufReader::new(file), resolution)
}

/// Writes paired traces sharing time steps.
pub fn write_traces(writer: impl Write, x: &PowerSeries, y: &PowerSeries) -> Result<()> {
    if x.len() != y.len() || x.samples().iter().zip(y.samples()).any(|(a, b)| a.t != b.t) {
        return Err(Error::domain("traces do not share time steps"));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER).map_err(csv_io)?;
    for (a, b) in x.samples().iter().zip(y.samples()) {
        w.write_record([a.t.to_string(), fmt_f64(a.dbm), fmt_f64(b.dbm)]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_traces(path: &Path, x: &PowerSeries, y: &PowerSeries) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_traces(std::io::BufWriter::new(file), x, y)
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// A named table of floats for one figure.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.columns).map_err(csv_io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|&v| fmt_f64(v))).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<dir>/<name>.csv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let file = std::fs::File::create(dir.join(format!("{}.csv", self.name)))?;
        self.write(std::io::BufWriter::new(file))
    }
}
