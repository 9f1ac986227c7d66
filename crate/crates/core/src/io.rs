//! File formats.
//!
//! Profile CSV: header `intensity,records[,breakdowns]`, one row per level,
//! intensities strictly ascending, records real and `>= 0`, breakdowns
//! integer and `>= 0`. Numbers are written in shortest round-trip form.
//!
//! Results CSV: one [`RunRecord`] per row, columns in struct field order,
//! fit-dependent columns empty for non-identifiable runs.

use std::io::{Read, Write};

use crate::capacity::IntensityLevel;
use crate::error::{Error, Result};
use crate::mle::CensoredHistogram;
use crate::study::RunRecord;
use crate::synthetic::{IntensityProfile, PseudoEmpiricalDataset};

/// Contents of a profile CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    pub intensity: Vec<f64>,
    pub records: Vec<f64>,
    pub breakdowns: Option<Vec<u64>>,
}

impl ProfileTable {
    pub fn from_profile(profile: &IntensityProfile) -> Self {
        Self {
            intensity: profile.levels().iter().map(|l| l.value()).collect(),
            records: profile.records().to_vec(),
            breakdowns: None,
        }
    }

    pub fn from_dataset(dataset: &PseudoEmpiricalDataset) -> Self {
        Self {
            breakdowns: Some(dataset.breakdowns.clone()),
            ..Self::from_profile(&dataset.profile)
        }
    }

    fn levels(&self) -> Result<Vec<IntensityLevel>> {
        self.intensity.iter().map(|&x| IntensityLevel::new(x)).collect()
    }

    pub fn profile(&self) -> Result<IntensityProfile> {
        IntensityProfile::new(self.levels()?, self.records.clone())
    }

    pub fn histogram(&self) -> Result<CensoredHistogram> {
        let b = self
            .breakdowns
            .clone()
            .ok_or_else(|| Error::domain("input has no breakdowns column"))?;
        CensoredHistogram::new(self.levels()?, self.records.clone(), b)
    }
}

fn parse_err(line: u64, column: Option<&str>, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        column: column.map(str::to_string),
        message: message.into(),
    }
}

pub fn read_profile_csv<R: Read>(reader: R) -> Result<ProfileTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(1, None, e.to_string()))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let with_breakdowns = match names.as_slice() {
        ["intensity", "records"] => false,
        ["intensity", "records", "breakdowns"] => true,
        _ => {
            return Err(parse_err(
                1,
                None,
                format!(
                    "expected header 'intensity,records[,breakdowns]', got '{}'",
                    names.join(",")
                ),
            ))
        }
    };

    let mut table = ProfileTable {
        intensity: vec![],
        records: vec![],
        breakdowns: with_breakdowns.then(Vec::new),
    };
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, None, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize, name: &str| -> Result<f64> {
            let raw = row.get(k).ok_or_else(|| parse_err(line, Some(name), "missing value"))?;
            raw.parse::<f64>()
                .map_err(|_| parse_err(line, Some(name), format!("'{raw}' is not a number")))
        };
        let intensity = field(0, "intensity")?;
        if !(intensity.is_finite() && intensity > 0.0) {
            return Err(parse_err(line, Some("intensity"), "must be a positive number"));
        }
        if let Some(&prev) = table.intensity.last() {
            if intensity <= prev {
                return Err(parse_err(
                    line,
                    Some("intensity"),
                    "intensities must be strictly ascending",
                ));
            }
        }
        let records = field(1, "records")?;
        if !(records.is_finite() && records >= 0.0) {
            return Err(parse_err(line, Some("records"), "must be a finite number >= 0"));
        }
        if let Some(bs) = table.breakdowns.as_mut() {
            let raw = row
                .get(2)
                .ok_or_else(|| parse_err(line, Some("breakdowns"), "missing value"))?;
            let b = raw.parse::<u64>().map_err(|_| {
                parse_err(
                    line,
                    Some("breakdowns"),
                    format!("'{raw}' is not a non-negative integer"),
                )
            })?;
            if b as f64 > records.ceil() {
                return Err(parse_err(line, Some("breakdowns"), "more breakdowns than records"));
            }
            bs.push(b);
        }
        table.intensity.push(intensity);
        table.records.push(records);
    }
    if table.intensity.is_empty() {
        return Err(parse_err(1, None, "no data rows"));
    }
    Ok(table)
}

pub fn write_profile_csv<W: Write>(writer: W, table: &ProfileTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    match &table.breakdowns {
        Some(bs) => {
            w.write_record(["intensity", "records", "breakdowns"])?;
            for ((i, r), b) in table.intensity.iter().zip(&table.records).zip(bs) {
                w.write_record([i.to_string(), r.to_string(), b.to_string()])?;
            }
        }
        None => {
            w.write_record(["intensity", "records"])?;
            for (i, r) in table.intensity.iter().zip(&table.records) {
                w.write_record([i.to_string(), r.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_results_csv<W: Write>(writer: W, runs: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in runs {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(reader: R) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<RunRecord>() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, None, e.to_string())
        })?;
        out.push(row);
    }
    Ok(out)
}
