//! File schemas written by the runner. Matrices are row-major lists of
//! `[re, im]` pairs. Every file parses back into its own type and re-emits
//! byte-identically.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::BudgetBreakdown;
use crate::protocol::MubState;
use crate::ratebudget::BudgetReport;
use crate::tomography::{Basis, BasisCounts, FidelityReport, ProcessFit, TomographyCounts};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub type ComplexRows = Vec<Vec<[f64; 2]>>;

pub fn complex_rows(m: &DMatrix<Complex64>) -> ComplexRows {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

/// One heralded event. The final state of atom B is flattened row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub input: String,
    pub event: u64,
    pub attempts: u64,
    pub bit: u8,
    pub correction: String,
    pub rho00_re: f64,
    pub rho00_im: f64,
    pub rho01_re: f64,
    pub rho01_im: f64,
    pub rho10_re: f64,
    pub rho10_im: f64,
    pub rho11_re: f64,
    pub rho11_im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub input: String,
    pub heralds: u64,
    pub mean_attempts: f64,
    /// Fraction of events that reported bit 0.
    pub bit0_fraction: f64,
    /// Fidelity of the event-averaged state of atom B with the input.
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateMatrix {
    pub input: String,
    pub rho: ComplexRows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeleportSummary {
    pub states: Vec<StateSummary>,
    pub f_bar: Option<f64>,
}

/// One scalar of a tomography run, for flat tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub quantity: String,
    pub input: String,
    pub value: f64,
    pub std_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyReport {
    pub fidelity: FidelityReport,
    pub process: ProcessFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessReport {
    pub fit: ProcessFit,
    /// Unconstrained estimate of the same data; may be non-positive.
    pub linear_inversion: ComplexRows,
}

/// One entry of `chi`, shaped for bar charts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiEntry {
    pub row: usize,
    pub col: usize,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetOutput {
    pub rate: BudgetReport,
    pub noise: BudgetBreakdown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCountsEntry {
    input: String,
    x: Option<BasisCounts>,
    y: Option<BasisCounts>,
    z: Option<BasisCounts>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCountsFile {
    counts: Vec<RawCountsEntry>,
}

/// Counts file: `{"counts": [{"input": "+x", "x": {"bright": 3, "dark": 69}, "y": ..., "z": ...}, ...]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CountsFile {
    pub counts: Vec<TomographyCounts>,
}

impl CountsFile {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawCountsFile = serde_json::from_str(text)?;
        let counts = raw
            .counts
            .into_iter()
            .map(|e| {
                let input: MubState = e.input.parse()?;
                let get = |b: Basis, c: Option<BasisCounts>| {
                    let c = c.ok_or_else(|| Error::MissingBasis { state: e.input.clone(), basis: b })?;
                    if c.shots() == 0 {
                        return Err(Error::ZeroShots { state: e.input.clone(), basis: b });
                    }
                    Ok(c)
                };
                Ok(TomographyCounts { input, x: get(Basis::X, e.x)?, y: get(Basis::Y, e.y)?, z: get(Basis::Z, e.z)? })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { counts })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let raw = RawCountsFile {
            counts: self
                .counts
                .iter()
                .map(|c| RawCountsEntry { input: c.input.to_string(), x: Some(c.x), y: Some(c.y), z: Some(c.z) })
                .collect(),
        };
        to_json(&raw)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn from_csv<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

/// Writes `rows` as `<stem>.json` or `<stem>.csv`; returns the file name.
pub fn write_table<T: Serialize>(dir: &Path, stem: &str, rows: &[T], format: Format) -> Result<String> {
    let (name, text) = match format {
        Format::Json => (format!("{stem}.json"), to_json(rows)?),
        Format::Csv => (format!("{stem}.csv"), to_csv(rows)?),
    };
    fs::write(dir.join(&name), text)?;
    Ok(name)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<String> {
    fs::write(dir.join(name), text)?;
    Ok(name.to_string())
}

pub fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<String> {
    fs::write(dir.join(name), to_json(value)?)?;
    Ok(name.to_string())
}
