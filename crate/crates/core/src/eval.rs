//! Pose and affinity metrics: symmetry-corrected ligand RMSD, success rate,
//! and correlation/error statistics, plus the CSV evaluation report.

use serde::Serialize;

use crate::geometry::{rmsd, GeometryError};
use crate::molgraph::{GraphError, MolGraph, DEFAULT_AUTOMORPHISM_CAP};
use crate::Vec3;

/// Default pose success threshold (Å, inclusive).
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("graph has {graph} atoms but {points} points were given")]
    AtomCount { graph: usize, points: usize },
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} predictions vs {1} truths")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 values, got {0}")]
    TooFew(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryRmsd {
    /// Minimum over graph automorphisms.
    pub rmsd: f64,
    /// Identity-labelled RMSD.
    pub plain: f64,
    /// Some fragment fell back to a partial or identity-only search.
    pub truncated: bool,
}

/// RMSD minimised over relabellings by each fragment's automorphisms, in the
/// given frame (no superposition).
pub fn symmetry_rmsd(graph: &MolGraph, predicted: &[Vec3], reference: &[Vec3]) -> Result<SymmetryRmsd, EvalError> {
    symmetry_rmsd_with_cap(graph, predicted, reference, DEFAULT_AUTOMORPHISM_CAP)
}

pub fn symmetry_rmsd_with_cap(
    graph: &MolGraph,
    predicted: &[Vec3],
    reference: &[Vec3],
    cap: usize,
) -> Result<SymmetryRmsd, EvalError> {
    let n = graph.atom_count();
    for len in [predicted.len(), reference.len()] {
        if len != n {
            return Err(EvalError::AtomCount { graph: n, points: len });
        }
    }
    let plain = rmsd(predicted, reference)?;
    let mut total = 0.0;
    let mut improved = false;
    let mut truncated = false;
    for f in 0..graph.fragment_count() {
        let identity_sq = |atoms: &[usize]| -> f64 {
            atoms.iter().map(|&i| (predicted[i] - reference[i]).norm_squared()).sum()
        };
        match graph.automorphisms(f, cap.max(1)) {
            Ok(auto) => {
                truncated |= auto.truncated;
                let best = auto
                    .perms
                    .iter()
                    .map(|perm| {
                        perm.iter()
                            .enumerate()
                            .map(|(i, &j)| (predicted[auto.atoms[j]] - reference[auto.atoms[i]]).norm_squared())
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                improved |= best < identity_sq(&auto.atoms);
                total += best;
            }
            Err(GraphError::FragmentTooLarge { .. }) | Err(GraphError::ZeroCap) => {
                truncated = true;
                total += identity_sq(&graph.fragment_atoms(f));
            }
            Err(GraphError::UnknownFragment(_)) => unreachable!("fragment index in range"),
        }
    }
    if truncated {
        log::warn!("automorphism search incomplete; symmetry RMSD may overestimate");
    }
    let corrected = if improved { (total / n as f64).sqrt().min(plain) } else { plain };
    Ok(SymmetryRmsd {
        rmsd: corrected,
        plain,
        truncated,
    })
}

/// Fraction of values `<= threshold`.
pub fn success_rate(rmsds: &[f64], threshold: f64) -> Result<f64, EvalError> {
    if rmsds.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(rmsds.iter().filter(|&&r| r <= threshold).count() as f64 / rmsds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffinityMetrics {
    /// `None` when either input is constant.
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub rmse: f64,
    pub mae: f64,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties given their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&midranks(x), &midranks(y))
}

pub fn affinity_metrics(predicted: &[f64], truth: &[f64]) -> Result<AffinityMetrics, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch(predicted.len(), truth.len()));
    }
    if predicted.len() < 2 {
        return Err(EvalError::TooFew(predicted.len()));
    }
    let n = predicted.len() as f64;
    let sq: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    let abs: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(AffinityMetrics {
        pearson: pearson(predicted, truth),
        spearman: spearman(predicted, truth),
        rmse: (sq / n).sqrt(),
        mae: abs / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub id: String,
    pub rmsd: f64,
    pub symmetry_rmsd: f64,
    pub success: bool,
    pub predicted_affinity: Option<f64>,
    pub true_affinity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalAggregate {
    pub count: usize,
    pub success_rate: f64,
    /// Metrics over rows with both affinities; `None` with fewer than two.
    pub affinity: Option<AffinityMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub threshold: f64,
    pub rows: Vec<EvalRow>,
    pub aggregate: EvalAggregate,
}

/// Per-complex evaluation input.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalInput {
    pub id: String,
    pub rmsd: SymmetryRmsd,
    pub predicted_affinity: Option<f64>,
    pub true_affinity: Option<f64>,
}

/// Success is judged on the symmetry-corrected RMSD.
pub fn build_report(inputs: Vec<EvalInput>, threshold: f64) -> Result<EvalReport, EvalError> {
    let rows: Vec<EvalRow> = inputs
        .into_iter()
        .map(|i| EvalRow {
            id: i.id,
            rmsd: i.rmsd.plain,
            symmetry_rmsd: i.rmsd.rmsd,
            success: i.rmsd.rmsd <= threshold,
            predicted_affinity: i.predicted_affinity,
            true_affinity: i.true_affinity,
        })
        .collect();
    let values: Vec<f64> = rows.iter().map(|r| r.symmetry_rmsd).collect();
    let rate = success_rate(&values, threshold)?;
    let (pred, truth): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| Some((r.predicted_affinity?, r.true_affinity?)))
        .unzip();
    let affinity = if pred.len() >= 2 { Some(affinity_metrics(&pred, &truth)?) } else { None };
    Ok(EvalReport {
        threshold,
        aggregate: EvalAggregate {
            count: rows.len(),
            success_rate: rate,
            affinity,
        },
        rows,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// CSV with one row per complex and a final `aggregate` row. Empty cells mark
/// missing or undefined values.
pub fn write_report_csv(report: &EvalReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "id",
        "rmsd",
        "symmetry_rmsd",
        "success",
        "predicted_affinity",
        "true_affinity",
        "success_rate",
        "pearson",
        "spearman",
        "rmse",
        "mae",
    ])?;
    for r in &report.rows {
        w.write_record([
            r.id.clone(),
            format!("{:.6}", r.rmsd),
            format!("{:.6}", r.symmetry_rmsd),
            r.success.to_string(),
            cell(r.predicted_affinity),
            cell(r.true_affinity),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    let a = &report.aggregate;
    let m = a.affinity;
    w.write_record([
        "aggregate".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        format!("{:.6}", a.success_rate),
        cell(m.and_then(|m| m.pearson)),
        cell(m.and_then(|m| m.spearman)),
        cell(m.map(|m| m.rmse)),
        cell(m.map(|m| m.mae)),
    ])?;
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}
