//! Report serialization: CSV rows for plotting, JSON for machine reading.
//! Field order is fixed by the struct declarations, and wall-clock times stay
//! out of the JSON so identical configs reproduce byte-identical reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use visco_core::energy::EnergyReport;

use crate::config::OutputFormat;
use crate::error::{CliError, Result};
use crate::study::ConvergenceReport;

pub fn report_json(report: &ConvergenceReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::AssertFailed(format!("json serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn report_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("eps,sup_E_sobolev,sup_phi,wall_s,blown_up\n");
    for row in &report.rows {
        let fmt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| format!("{x}"));
        out.push_str(&format!(
            "{},{},{},{:.3},{}\n",
            row.eps,
            fmt(row.sup_e_sobolev),
            fmt(row.sup_phi),
            row.wall_s,
            row.blown_up
        ));
    }
    out
}

pub fn parse_report_json(text: &str) -> Result<ConvergenceReport> {
    serde_json::from_str(text).map_err(|e| CliError::Config {
        line: None,
        msg: format!("cannot parse report json: {e}"),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })
}

/// Write `report.csv` / `report.json` under `dir` per the format choice and
/// return the created paths.
pub fn write_convergence_report(
    report: &ConvergenceReport,
    dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        let path = dir.join("report.csv");
        write_file(&path, &report_csv(report))?;
        written.push(path);
    }
    if matches!(format, OutputFormat::Json | OutputFormat::Both) {
        let path = dir.join("report.json");
        write_file(&path, &report_json(report)?)?;
        written.push(path);
    }
    Ok(written)
}

/// Serializable view of a core [`EnergyReport`] plus its run context.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReportDto {
    pub version: String,
    pub eps: f64,
    pub mu: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub identity_residual_l1: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub k1: f64,
    pub k2: f64,
    pub times: Vec<f64>,
    pub e_eps: Vec<f64>,
    pub e_sobolev: Vec<f64>,
    pub phi: Vec<f64>,
    pub h_rm: Vec<f64>,
}

impl EnergyReportDto {
    pub fn new(report: &EnergyReport, eps: f64, mu: f64, lambda: f64, gamma: f64) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            eps,
            mu,
            lambda,
            gamma,
            identity_residual_l1: report.identity_residual_l1,
            c1: report.c1,
            c2: report.c2,
            c3: report.c3,
            k1: report.k1,
            k2: report.k2,
            times: report.times.clone(),
            e_eps: report.e_eps.clone(),
            e_sobolev: report.e_sobolev.clone(),
            phi: report.phi.clone(),
            h_rm: report.h_rm.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::AssertFailed(format!("json serialization failed: {e}")))?;
        s.push('\n');
        Ok(s)
    }
}

/// Time series of an [`EnergyReport`] as CSV.
pub fn energy_csv(report: &EnergyReport) -> String {
    let mut out = String::from("t,E_eps,E_sobolev,phi,H_rm\n");
    for j in 0..report.times.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            report.times[j], report.e_eps[j], report.e_sobolev[j], report.phi[j], report.h_rm[j]
        ));
    }
    out
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    write_file(path, contents)
}

pub fn write_bytes(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}
