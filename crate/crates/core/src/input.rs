//! Measurement and platform files, and the JSON measurement record.
//!
//! Measurement CSV header (fixed, in this order):
//! `app,problem,implementation,model,platform,kind,value,compiler,compiler_flags,input_size`.
//! Any further columns are kept as measurement metadata. A
//! `portability_class` column, when present, classifies the implementation.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    ArchClass, Catalog, Implementation, Measurement, MeasurementKind, Platform, PortabilityClass,
    ProblemSpec, PROVENANCE_KEYS,
};

pub const MEASUREMENT_HEADER: [&str; 10] = [
    "app",
    "problem",
    "implementation",
    "model",
    "platform",
    "kind",
    "value",
    "compiler",
    "compiler_flags",
    "input_size",
];

pub const PLATFORM_HEADER: [&str; 6] =
    ["id", "vendor", "arch_class", "peak_compute", "peak_mem_bw", "attainable_peak"];

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("bad header: expected {expected}, found {found}")]
    Header { expected: String, found: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// The wire form of a measurement, as posted to the service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementInput {
    pub app: String,
    pub problem: String,
    pub implementation: String,
    #[serde(default)]
    pub model: String,
    pub platform: String,
    pub kind: MeasurementKind,
    pub value: f64,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl MeasurementInput {
    pub fn to_measurement(&self) -> Measurement {
        Measurement {
            app: self.app.clone(),
            problem: self.problem.clone(),
            implementation: self.implementation.clone(),
            platform: self.platform.clone(),
            kind: self.kind,
            value: self.value,
            meta: self.meta.clone(),
        }
    }

    pub fn from_measurement(m: &Measurement, model: &str) -> Self {
        MeasurementInput {
            app: m.app.clone(),
            problem: m.problem.clone(),
            implementation: m.implementation.clone(),
            model: model.to_owned(),
            platform: m.platform.clone(),
            kind: m.kind,
            value: m.value,
            meta: m.meta.clone(),
        }
    }

    pub fn implementation(&self) -> Implementation {
        let class = self
            .meta
            .get("portability_class")
            .and_then(|c| c.parse::<PortabilityClass>().ok())
            .unwrap_or_default();
        Implementation {
            id: self.implementation.clone(),
            app: self.app.clone(),
            model: if self.model.is_empty() { self.implementation.clone() } else { self.model.clone() },
            portability_class: class,
        }
    }
}

/// A parsed measurement file: the rows plus a catalog inferred from them.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub rows: Vec<MeasurementInput>,
    /// File line of each row (the header is line 1).
    pub lines: Vec<u64>,
    pub catalog: Catalog,
}

impl Dataset {
    pub fn measurements(&self) -> Vec<Measurement> {
        self.rows.iter().map(MeasurementInput::to_measurement).collect()
    }

    /// Platform ids in order of first appearance.
    pub fn platform_order(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.platform) {
                out.push(r.platform.clone());
            }
        }
        out
    }

    /// Replaces inferred platforms with fully described ones.
    pub fn with_platforms(mut self, platforms: &[Platform]) -> Self {
        for p in platforms {
            self.catalog.add_platform(p.clone());
        }
        self
    }

    /// Extra measurements (for example reference runs) registered into the
    /// same catalog.
    pub fn merge_catalog(&mut self, other: &Dataset) {
        for p in other.catalog.platforms.values() {
            if self.catalog.platform(&p.id).is_none() {
                self.catalog.add_platform(p.clone());
            }
        }
        for i in &other.catalog.implementations {
            self.catalog.add_implementation(i.clone());
        }
        for p in &other.catalog.problems {
            self.catalog.add_problem(p.clone());
        }
    }
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), InputError> {
    let ok = found.len() >= expected.len()
        && found.iter().zip(expected).all(|(f, e)| f.trim() == *e);
    if ok {
        Ok(())
    } else {
        Err(InputError::Header {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        })
    }
}

fn row_err(record: &csv::StringRecord, message: impl Into<String>) -> InputError {
    InputError::Row { line: record.position().map_or(0, |p| p.line()), message: message.into() }
}

pub fn read_measurements<R: Read>(reader: R) -> Result<Dataset, InputError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    check_header(&header, &MEASUREMENT_HEADER)?;
    let mut ds = Dataset::default();
    for record in rdr.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("").to_owned();
        for (i, name) in MEASUREMENT_HEADER.iter().enumerate().take(7) {
            if field(i).is_empty() {
                return Err(row_err(&record, format!("empty {name}")));
            }
        }
        let kind: MeasurementKind =
            field(5).parse().map_err(|e: crate::model::ParseEnumError| row_err(&record, e.to_string()))?;
        let value: f64 = field(6)
            .parse()
            .map_err(|_| row_err(&record, format!("value {:?} is not a number", field(6))))?;
        let mut meta = BTreeMap::new();
        for (i, key) in PROVENANCE_KEYS.iter().enumerate() {
            let v = field(7 + i);
            if !v.is_empty() {
                meta.insert((*key).to_owned(), v);
            }
        }
        for (i, name) in header.iter().enumerate().skip(MEASUREMENT_HEADER.len()) {
            let v = field(i);
            if !v.is_empty() {
                meta.insert(name.trim().to_owned(), v);
            }
        }
        let row = MeasurementInput {
            app: field(0),
            problem: field(1),
            implementation: field(2),
            model: field(3),
            platform: field(4),
            kind,
            value,
            meta,
        };
        if ds.catalog.platform(&row.platform).is_none() {
            ds.catalog.add_platform(Platform::new(&row.platform, "", ArchClass::Other));
        }
        ds.catalog.add_implementation(row.implementation());
        ds.catalog.add_problem(ProblemSpec {
            app: row.app.clone(),
            problem: row.problem.clone(),
            input_size: row.meta.get("input_size").cloned(),
        });
        ds.lines.push(record.position().map_or(0, |p| p.line()));
        ds.rows.push(row);
    }
    Ok(ds)
}

pub fn read_measurements_file(path: &Path) -> Result<Dataset, InputError> {
    let file = std::fs::File::open(path)
        .map_err(|source| InputError::Io { path: path.display().to_string(), source })?;
    read_measurements(file)
}

fn optional_peak(record: &csv::StringRecord, i: usize) -> Result<Option<f64>, InputError> {
    match record.get(i).map(str::trim).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|_| row_err(record, format!("{} {s:?} is not a number", PLATFORM_HEADER[i]))),
    }
}

/// Platform file: `id,vendor,arch_class,peak_compute,peak_mem_bw,attainable_peak`,
/// peaks optional.
pub fn read_platforms<R: Read>(reader: R) -> Result<Vec<Platform>, InputError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(rdr.headers()?, &PLATFORM_HEADER)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let arch: ArchClass = record
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|e: crate::model::ParseEnumError| row_err(&record, e.to_string()))?;
        let platform = Platform {
            id: record.get(0).unwrap_or("").to_owned(),
            vendor: record.get(1).unwrap_or("").to_owned(),
            arch_class: arch,
            peak_compute: optional_peak(&record, 3)?,
            peak_mem_bw: optional_peak(&record, 4)?,
            attainable_peak: optional_peak(&record, 5)?,
        };
        platform.validate().map_err(|m| row_err(&record, m))?;
        out.push(platform);
    }
    Ok(out)
}

pub fn read_platforms_file(path: &Path) -> Result<Vec<Platform>, InputError> {
    let file = std::fs::File::open(path)
        .map_err(|source| InputError::Io { path: path.display().to_string(), source })?;
    read_platforms(file)
}
