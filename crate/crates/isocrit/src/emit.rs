//! CSV and JSON outputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use isocrit_core::census::CriticalCensus;
use isocrit_core::kac_rice::{TwoPointProfile, VarianceConstants};
use isocrit_core::spectral::format_multi_index;
use isocrit_core::KernelTable;
use serde::{Deserialize, Serialize};

use crate::sweep::{Constants, RepRow, ScaleSummary, SweepResult};
use crate::{io_err, Result};

pub const SWEEP_HEADER: [&str; 4] = ["scale", "rep", "count", "weighted"];

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

/// Incremental writer for sweep rows; the header is written on creation.
pub struct SweepWriter {
    inner: csv::Writer<BufWriter<File>>,
}

impl SweepWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
        inner.write_record(SWEEP_HEADER)?;
        inner.flush().map_err(io_err(path))?;
        Ok(SweepWriter { inner })
    }

    /// Appends rows and flushes them to disk.
    pub fn append(&mut self, rows: &[RepRow]) -> Result<()> {
        for r in rows {
            self.inner.serialize(r)?;
        }
        self.inner.flush().map_err(|source| crate::HarnessError::Io {
            path: "sweep csv".into(),
            source,
        })
    }
}

pub fn write_sweep_csv(path: &Path, rows: &[RepRow]) -> Result<()> {
    let mut w = SweepWriter::create(path)?;
    w.append(rows)
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<RepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<RepRow>, _>>()?)
}

/// The summary JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_echo: BTreeMap<String, String>,
    pub per_scale: Vec<ScaleSummary>,
    pub constants: Constants,
}

impl Summary {
    pub fn of(result: &SweepResult) -> Self {
        let mut config_echo = result.config.echo();
        config_echo.insert(
            "mode".into(),
            serde_json::to_value(result.kind)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
        );
        Summary {
            config_echo,
            per_scale: result.per_scale.clone(),
            constants: result.constants,
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(path))
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    write_json(path, summary)
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// One row per critical point: `rep,x1..xm,value,grad_norm,morse_index`.
pub fn write_census_csv<W: Write>(out: W, dim: usize, censuses: &[CriticalCensus]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["rep".to_string()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    header.extend(["value", "grad_norm", "morse_index"].map(String::from));
    w.write_record(&header)?;
    for (rep, c) in censuses.iter().enumerate() {
        for p in &c.points {
            let mut rec = vec![rep.to_string()];
            rec.extend(p.location.iter().map(|x| x.to_string()));
            rec.push(p.value.to_string());
            rec.push(p.grad_norm.to_string());
            rec.push(p.morse_index.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|source| crate::HarnessError::Io {
        path: "census csv".into(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointRow {
    pub r: f64,
    pub rho_hat: f64,
    pub rho_hat_se: f64,
    pub rho_tilde: f64,
    pub delta: f64,
    pub delta_se: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

pub fn two_point_rows(profile: &TwoPointProfile) -> Vec<TwoPointRow> {
    profile
        .rows
        .iter()
        .map(|r| TwoPointRow {
            r: r.r,
            rho_hat: r.rho_hat.value,
            rho_hat_se: r.rho_hat.stderr,
            rho_tilde: r.rho_tilde.value,
            delta: r.delta.value,
            delta_se: r.delta.stderr,
            t: r.decay,
        })
        .collect()
}

pub fn write_two_point_csv<W: Write>(out: W, profile: &TwoPointProfile) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in two_point_rows(profile) {
        w.serialize(row)?;
    }
    if profile.rows.is_empty() {
        w.write_record(["r", "rho_hat", "rho_hat_se", "rho_tilde", "delta", "delta_se", "T"])?;
    }
    w.flush().map_err(|source| crate::HarnessError::Io {
        path: "two-point csv".into(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZConstReport {
    pub m: usize,
    pub amplitude: String,
    pub c_m: f64,
    pub c_m_se: f64,
    pub z_m: f64,
    pub z_m_err: f64,
    pub v_m: f64,
    pub v_m_err: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub nodes: usize,
}

impl From<&VarianceConstants> for ZConstReport {
    fn from(v: &VarianceConstants) -> Self {
        ZConstReport {
            m: v.dim,
            amplitude: v.amplitude.to_string(),
            c_m: v.c_m.value,
            c_m_se: v.c_m.stderr,
            z_m: v.z_m.value,
            z_m_err: v.z_err(),
            v_m: v.v_m,
            v_m_err: v.v_err(),
            r_min: v.r_min,
            r_max: v.r_max,
            nodes: v.nodes,
        }
    }
}

/// Spectral moments and `C_m` for `isocrit constants`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub m: usize,
    pub amplitude: String,
    pub s_m: f64,
    pub d_m: f64,
    pub h_m: f64,
    pub abs_det: f64,
    pub abs_det_se: f64,
    pub c_m: f64,
    pub c_m_se: f64,
}

pub fn write_constants_csv<W: Write>(out: W, report: &ConstantsReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.serialize(report)?;
    w.flush().map_err(|source| crate::HarnessError::Io {
        path: "constants csv".into(),
        source,
    })
}

/// Long-format kernel table: `t,gamma,value`.
pub fn write_kernel_csv<W: Write>(out: W, tables: &[KernelTable]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "gamma", "value"])?;
    for table in tables {
        for (gamma, value) in table.entries() {
            w.write_record([table.t.to_string(), format_multi_index(&gamma), value.to_string()])?;
        }
    }
    w.flush().map_err(|source| crate::HarnessError::Io {
        path: "kernel csv".into(),
        source,
    })
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}
