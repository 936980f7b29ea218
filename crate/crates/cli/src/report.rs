use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const CSV_HEADER: [&str; 8] = ["suite", "check", "anchor", "max_residual", "tolerance", "pass", "samples", "wall_time_ms"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("cannot infer a report format from {0:?}; use .json or .csv")]
    UnknownFormat(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self, ReportError> {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
            Some("json") => Ok(Format::Json),
            Some("csv") => Ok(Format::Csv),
            _ => Err(ReportError::UnknownFormat(path.display().to_string())),
        }
    }
}

/// One verified identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRecord {
    pub suite: String,
    pub check: String,
    pub anchor: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub samples: u64,
    pub wall_time_ms: u64,
}

impl CheckRecord {
    /// Builds a record with `pass` derived from the residual; non-finite residuals become `f64::MAX`.
    pub fn new(suite: &str, check: &str, anchor: &str, max_residual: f64, tolerance: f64, samples: u64) -> Self {
        let max_residual = if max_residual.is_finite() { max_residual } else { f64::MAX };
        Self {
            suite: suite.to_string(),
            check: check.to_string(),
            anchor: anchor.to_string(),
            max_residual,
            tolerance,
            pass: max_residual <= tolerance,
            samples,
            wall_time_ms: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    /// Named constants measured while verifying, e.g. the Yukawa ratio.
    pub calibration: BTreeMap<String, f64>,
    pub records: Vec<CheckRecord>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    /// Stable order for emission.
    pub fn sort(&mut self) {
        self.records.sort_by(|a, b| (&a.suite, &a.check).cmp(&(&b.suite, &b.check)));
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<(), ReportError> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self, ReportError> {
        Ok(serde_json::from_reader(r)?)
    }

    /// Records only; real columns carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ReportError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for r in &self.records {
            out.write_record([
                r.suite.clone(),
                r.check.clone(),
                r.anchor.clone(),
                format!("{:.16e}", r.max_residual),
                format!("{:.16e}", r.tolerance),
                r.pass.to_string(),
                r.samples.to_string(),
                r.wall_time_ms.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, ReportError> {
        let mut rd = csv::Reader::from_reader(r);
        if rd.headers()?.iter().ne(CSV_HEADER) {
            return Err(ReportError::Row { row: 0, message: "unexpected header".into() });
        }
        let mut records = Vec::new();
        for (k, row) in rd.records().enumerate() {
            let row = row?;
            let bad = |message: String| ReportError::Row { row: k + 1, message };
            let num = |i: usize| row[i].parse::<f64>().map_err(|e| bad(format!("{}: {e}", CSV_HEADER[i])));
            let int = |i: usize| row[i].parse::<u64>().map_err(|e| bad(format!("{}: {e}", CSV_HEADER[i])));
            records.push(CheckRecord {
                suite: row[0].to_string(),
                check: row[1].to_string(),
                anchor: row[2].to_string(),
                max_residual: num(3)?,
                tolerance: num(4)?,
                pass: row[5].parse().map_err(|e| bad(format!("pass: {e}")))?,
                samples: int(6)?,
                wall_time_ms: int(7)?,
            });
        }
        Ok(Self { calibration: BTreeMap::new(), records })
    }

    pub fn emit(&self, path: &Path) -> Result<(), ReportError> {
        let format = Format::from_path(path)?;
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        match format {
            Format::Json => self.write_json(file),
            Format::Csv => self.write_csv(file),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let format = Format::from_path(path)?;
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        match format {
            Format::Json => Self::read_json(file),
            Format::Csv => Self::read_csv(file),
        }
    }
}
