//! Precision, recall and F1 on the "single" class, overall and per subset,
//! and threshold sweeps over precomputed evidence.
//!
//! Metrics are percentages kept at full precision. A metric whose
//! denominator is zero is `None`, never 0 or 100.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{Evidence, PipelineError};
use crate::provider::{GroundingInstance, Subset};
use crate::reasoning::{Grounding, ReasoningConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("decision for unknown instance {0}")]
    UnknownInstance(String),
    #[error("more than one decision for instance {0}")]
    DuplicateDecision(String),
}

/// One verdict to score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance_id: String,
    pub s: Grounding,
}

impl Prediction {
    pub fn new(instance_id: impl Into<String>, s: Grounding) -> Self {
        Self {
            instance_id: instance_id.into(),
            s,
        }
    }
}

/// A prediction joined with its gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub predicted: Grounding,
    pub gold: Grounding,
    pub subset: Subset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub predicted_single: usize,
    pub actual_single: usize,
    pub correct_single: usize,
    pub total: usize,
}

impl Counts {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a PredictionRecord>) -> Self {
        let mut c = Counts::default();
        for r in records {
            c.add(r);
        }
        c
    }

    fn add(&mut self, r: &PredictionRecord) {
        let pred = r.predicted == Grounding::Single;
        let gold = r.gold == Grounding::Single;
        self.total += 1;
        self.predicted_single += usize::from(pred);
        self.actual_single += usize::from(gold);
        self.correct_single += usize::from(pred && gold);
    }
}

fn percentage(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// Share of predicted-single instances that are truly single.
pub fn precision(records: &[PredictionRecord]) -> Option<f64> {
    let c = Counts::from_records(records);
    percentage(c.correct_single, c.predicted_single)
}

/// Share of truly single instances predicted single.
pub fn recall(records: &[PredictionRecord]) -> Option<f64> {
    let c = Counts::from_records(records);
    percentage(c.correct_single, c.actual_single)
}

/// Harmonic mean of two percentages; `None` when they sum to zero.
pub fn f1(p: f64, r: f64) -> Option<f64> {
    (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl Metrics {
    pub fn from_counts(c: &Counts) -> Self {
        let precision = percentage(c.correct_single, c.predicted_single);
        let recall = percentage(c.correct_single, c.actual_single);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) => f1(p, r),
            _ => None,
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub counts: Counts,
    pub metrics: Metrics,
}

impl SubsetReport {
    pub fn from_counts(counts: Counts) -> Self {
        Self {
            counts,
            metrics: Metrics::from_counts(&counts),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: SubsetReport,
    /// Only subsets with at least one scored instance appear.
    pub subsets: BTreeMap<Subset, SubsetReport>,
    /// Decisions for instances without a gold label.
    pub unlabeled: usize,
    /// Labeled instances with no decision (e.g. the instance errored).
    pub missing: usize,
}

/// Join decisions with gold labels and score them.
pub fn evaluate(
    dataset: &[GroundingInstance],
    decisions: &[Prediction],
) -> Result<EvalReport, EvalError> {
    let by_id: BTreeMap<&str, &GroundingInstance> = dataset
        .iter()
        .map(|i| (i.instance_id.as_str(), i))
        .collect();
    let mut seen = BTreeSet::new();
    let mut records = Vec::with_capacity(decisions.len());
    let mut unlabeled = 0;
    for d in decisions {
        let inst = by_id
            .get(d.instance_id.as_str())
            .ok_or_else(|| EvalError::UnknownInstance(d.instance_id.clone()))?;
        if !seen.insert(d.instance_id.as_str()) {
            return Err(EvalError::DuplicateDecision(d.instance_id.clone()));
        }
        match inst.gold_label {
            Some(gold) => records.push(PredictionRecord {
                instance_id: d.instance_id.clone(),
                predicted: d.s,
                gold,
                subset: inst.subset,
            }),
            None => unlabeled += 1,
        }
    }
    let missing = dataset
        .iter()
        .filter(|i| i.gold_label.is_some() && !seen.contains(i.instance_id.as_str()))
        .count();
    Ok(report_from_records(&records, unlabeled, missing))
}

pub fn report_from_records(
    records: &[PredictionRecord],
    unlabeled: usize,
    missing: usize,
) -> EvalReport {
    let mut per: BTreeMap<Subset, Counts> = BTreeMap::new();
    for r in records {
        per.entry(r.subset).or_default().add(r);
    }
    EvalReport {
        overall: SubsetReport::from_counts(Counts::from_records(records)),
        subsets: per
            .into_iter()
            .map(|(s, c)| (s, SubsetReport::from_counts(c)))
            .collect(),
        unlabeled,
        missing,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("gathering evidence: {0}")]
    Evidence(PipelineError),
    #[error("cell tau_iou={tau_iou} tau_sem={tau_sem}: {source}")]
    Pipeline {
        tau_iou: f64,
        tau_sem: f64,
        source: PipelineError,
    },
    #[error("cell tau_iou={tau_iou} tau_sem={tau_sem}: {source}")]
    Evaluation {
        tau_iou: f64,
        tau_sem: f64,
        source: EvalError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau_iou: f64,
    pub tau_sem: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    /// tau_iou-major, each grid in the order given.
    pub rows: Vec<SweepRow>,
}

impl Sweep {
    /// Highest overall F1; the first such row on ties. Rows without an F1 never win.
    pub fn best(&self) -> Option<&SweepRow> {
        let mut best: Option<(&SweepRow, f64)> = None;
        for row in &self.rows {
            if let Some(f) = row.report.overall.metrics.f1 {
                if best.is_none_or(|(_, b)| f > b) {
                    best = Some((row, f));
                }
            }
        }
        best.map(|(r, _)| r)
    }
}

/// Validate both grids and list the cells in output order.
pub fn sweep_cells(
    tau_iou_grid: &[f64],
    tau_sem_grid: &[f64],
) -> Result<Vec<(f64, f64)>, SweepError> {
    if tau_iou_grid.is_empty() || tau_sem_grid.is_empty() {
        return Err(SweepError::InvalidGrid("grids must be non-empty"));
    }
    if tau_iou_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(SweepError::InvalidGrid("tau_iou values must lie in [0, 1]"));
    }
    if tau_sem_grid.iter().any(|t| !(-1.0..=1.0).contains(t)) {
        return Err(SweepError::InvalidGrid(
            "tau_sem values must lie in [-1, 1]",
        ));
    }
    Ok(tau_iou_grid
        .iter()
        .flat_map(|&i| tau_sem_grid.iter().map(move |&s| (i, s)))
        .collect())
}

/// Decide every instance at one grid cell and score the result.
pub fn evaluate_cell(
    dataset: &[GroundingInstance],
    evidence: &[Evidence],
    config: &ReasoningConfig,
    tau_iou: f64,
    tau_sem: f64,
) -> Result<SweepRow, SweepError> {
    let cfg = config.with_thresholds(tau_iou, tau_sem);
    let mut predictions = Vec::with_capacity(evidence.len());
    for ev in evidence {
        let d = ev.decide(&cfg).map_err(|source| SweepError::Pipeline {
            tau_iou,
            tau_sem,
            source,
        })?;
        predictions.push(Prediction::new(d.instance_id, d.decision.s));
    }
    let report = evaluate(dataset, &predictions).map_err(|source| SweepError::Evaluation {
        tau_iou,
        tau_sem,
        source,
    })?;
    Ok(SweepRow {
        tau_iou,
        tau_sem,
        report,
    })
}

/// Sequential sweep over evidence gathered once per instance.
pub fn sweep_thresholds(
    dataset: &[GroundingInstance],
    evidence: &[Evidence],
    tau_iou_grid: &[f64],
    tau_sem_grid: &[f64],
    config: &ReasoningConfig,
) -> Result<Sweep, SweepError> {
    let rows = sweep_cells(tau_iou_grid, tau_sem_grid)?
        .into_iter()
        .map(|(i, s)| evaluate_cell(dataset, evidence, config, i, s))
        .collect::<Result<_, _>>()?;
    Ok(Sweep { rows })
}
