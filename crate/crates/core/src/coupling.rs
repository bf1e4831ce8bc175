//! Rejection filter over independently drawn apo/holo pairs: a pair is kept
//! when its Cα structures are similar enough after superposition.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{aligned_rmsd, tm_score, GeometryError};
use crate::structures::{read_pdb, Structure};

#[derive(Debug, thiserror::Error)]
pub enum CouplingError {
    #[error("invalid criteria: {0}")]
    InvalidCriteria(String),
    #[error("apo has {0} residues, holo has {1}")]
    ResidueMismatch(usize, usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("manifest: {0}")]
    Manifest(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingCriteria {
    pub tm_min: f64,
    /// Exclusive upper bound (Å).
    pub rmsd_max: f64,
    pub min_residues: Option<usize>,
    pub max_residues: Option<usize>,
}

impl Default for CouplingCriteria {
    fn default() -> Self {
        CouplingCriteria {
            tm_min: 0.7,
            rmsd_max: 5.0,
            min_residues: None,
            max_residues: None,
        }
    }
}

impl CouplingCriteria {
    pub fn validate(&self) -> Result<(), CouplingError> {
        if !(self.tm_min > 0.0 && self.tm_min <= 1.0) {
            return Err(CouplingError::InvalidCriteria(format!("tm_min must lie in (0, 1], got {}", self.tm_min)));
        }
        if !(self.rmsd_max > 0.0) {
            return Err(CouplingError::InvalidCriteria(format!("rmsd_max must be positive, got {}", self.rmsd_max)));
        }
        if let (Some(lo), Some(hi)) = (self.min_residues, self.max_residues) {
            if lo > hi {
                return Err(CouplingError::InvalidCriteria(format!("min_residues {lo} exceeds max_residues {hi}")));
            }
        }
        Ok(())
    }

    /// Accept iff `tm >= tm_min`, `rmsd < rmsd_max` and the residue count
    /// satisfies any length bounds.
    pub fn accepts(&self, tm: f64, rmsd: f64, residues: usize) -> bool {
        tm >= self.tm_min
            && rmsd < self.rmsd_max
            && self.min_residues.is_none_or(|lo| residues >= lo)
            && self.max_residues.is_none_or(|hi| residues <= hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairDecision {
    pub tm: f64,
    pub rmsd: f64,
    pub residues: usize,
    pub accepted: bool,
}

/// Cα TM-score and superposed Cα RMSD of a residue-aligned pair, and the
/// resulting accept/reject decision.
pub fn evaluate_pair(apo: &Structure, holo: &Structure, criteria: &CouplingCriteria) -> Result<PairDecision, CouplingError> {
    let a = apo.ca_coords();
    let b = holo.ca_coords();
    if a.len() != b.len() {
        return Err(CouplingError::ResidueMismatch(a.len(), b.len()));
    }
    let tm = tm_score(&a, &b)?;
    let rmsd = aligned_rmsd(&a, &b)?;
    Ok(PairDecision {
        tm,
        rmsd,
        residues: a.len(),
        accepted: criteria.accepts(tm, rmsd, a.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub apo_path: String,
    pub holo_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub id: String,
    pub tm: Option<f64>,
    pub rmsd: Option<f64>,
    pub accepted: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CouplingOutcome {
    pub accepted: Vec<ManifestRow>,
    pub report: Vec<ReportRow>,
}

impl CouplingOutcome {
    pub fn acceptance_rate(&self) -> Option<f64> {
        if self.report.is_empty() {
            None
        } else {
            Some(self.accepted.len() as f64 / self.report.len() as f64)
        }
    }
}

pub fn read_manifest(text: &str) -> Result<Vec<ManifestRow>, CouplingError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    Ok(reader.deserialize().collect::<Result<Vec<ManifestRow>, _>>()?)
}

pub fn write_manifest(rows: &[ManifestRow]) -> Result<String, CouplingError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["id", "apo_path", "holo_path"])?;
    for row in rows {
        writer.write_record([&row.id, &row.apo_path, &row.holo_path])?;
    }
    Ok(String::from_utf8(writer.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("csv output is utf-8"))
}

pub fn write_report(rows: &[ReportRow]) -> Result<String, CouplingError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["id", "tm", "rmsd", "accepted", "error"])?;
    for row in rows {
        let num = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        writer.write_record([
            row.id.clone(),
            num(row.tm),
            num(row.rmsd),
            row.accepted.to_string(),
            row.error.clone().unwrap_or_default(),
        ])?;
    }
    Ok(String::from_utf8(writer.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("csv output is utf-8"))
}

fn load(base: &Path, path: &str) -> Result<Structure, String> {
    let full = base.join(path);
    let text = std::fs::read_to_string(&full).map_err(|e| format!("{}: {e}", full.display()))?;
    read_pdb(&text).map_err(|e| format!("{}: {e}", full.display()))
}

fn evaluate_row(row: &ManifestRow, base: &Path, criteria: &CouplingCriteria) -> ReportRow {
    let result = load(base, &row.apo_path)
        .and_then(|apo| load(base, &row.holo_path).map(|holo| (apo, holo)))
        .and_then(|(apo, holo)| evaluate_pair(&apo, &holo, criteria).map_err(|e| e.to_string()));
    match result {
        Ok(d) => ReportRow {
            id: row.id.clone(),
            tm: Some(d.tm),
            rmsd: Some(d.rmsd),
            accepted: d.accepted,
            error: None,
        },
        Err(message) => ReportRow {
            id: row.id.clone(),
            tm: None,
            rmsd: None,
            accepted: false,
            error: Some(message),
        },
    }
}

/// Evaluate manifest rows in parallel. Paths resolve against `base`. Rows
/// whose files cannot be read or compared are reported with an error and
/// rejected; report order follows input order.
pub fn filter_rows(rows: &[ManifestRow], base: &Path, criteria: &CouplingCriteria) -> Result<CouplingOutcome, CouplingError> {
    criteria.validate()?;
    let report: Vec<ReportRow> = rows.par_iter().map(|r| evaluate_row(r, base, criteria)).collect();
    let accepted = rows
        .iter()
        .zip(&report)
        .filter(|(_, r)| r.accepted)
        .map(|(m, _)| m.clone())
        .collect();
    let outcome = CouplingOutcome { accepted, report };
    match outcome.acceptance_rate() {
        Some(rate) => log::info!(
            "accepted {}/{} pairs ({:.1}%)",
            outcome.accepted.len(),
            outcome.report.len(),
            100.0 * rate
        ),
        None => log::info!("manifest has no rows"),
    }
    Ok(outcome)
}

/// Read a manifest file and filter its rows; paths are relative to the
/// manifest's directory.
pub fn filter_manifest(path: &Path, criteria: &CouplingCriteria) -> Result<CouplingOutcome, CouplingError> {
    let text = std::fs::read_to_string(path).map_err(|source| CouplingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let rows = read_manifest(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    filter_rows(&rows, base, criteria)
}
