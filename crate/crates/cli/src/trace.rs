//! Trace files: one JSON object per instance, in dataset order.
//!
//! A decided instance carries every field of the decision with flags as
//! 0/1 integers; an instance that failed carries `error` instead.

use std::path::Path;

use groundcheck_core::pipeline::{PipelineDecision, ProviderIds};
use groundcheck_core::{AnswerCandidate, Branch, Grounding, ReasoningConfig};
use serde::{Deserialize, Serialize};

use crate::jsonl::read_records;
use crate::LoadError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub instance_id: String,
    pub s: u8,
    pub c_v: Option<u8>,
    pub d_s: Option<u8>,
    pub all_numeric: bool,
    pub branch: Branch,
    pub min_iou: Option<f64>,
    pub max_sim: Option<f64>,
    pub iou_matrix: Vec<Vec<f64>>,
    pub sim_matrix: Vec<Vec<f64>>,
    pub kept_candidates: Vec<AnswerCandidate>,
    pub kept_indices: Vec<usize>,
    pub proposed: Vec<String>,
    pub visual_semantic_conflict: bool,
    pub providers: ProviderIds,
    pub config: ReasoningConfig,
    pub manifest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTrace {
    pub instance_id: String,
    pub error: String,
    pub manifest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraceRecord {
    Decision(Box<DecisionTrace>),
    Error(ErrorTrace),
}

impl TraceRecord {
    pub fn from_decision(d: PipelineDecision, config: &ReasoningConfig, manifest: &str) -> Self {
        let flag = |b: bool| u8::from(b);
        let c = d.decision;
        Self::Decision(Box::new(DecisionTrace {
            instance_id: d.instance_id,
            s: c.s.score(),
            c_v: c.c_v.map(flag),
            d_s: c.d_s.map(flag),
            all_numeric: c.all_numeric,
            branch: c.branch,
            min_iou: c.min_iou,
            max_sim: c.max_sim,
            iou_matrix: c.iou_matrix,
            sim_matrix: c.sim_matrix,
            kept_candidates: c.kept_candidates,
            kept_indices: c.kept_indices,
            proposed: c.proposed,
            visual_semantic_conflict: c.visual_semantic_conflict,
            providers: d.providers,
            config: config.clone(),
            manifest: manifest.to_string(),
        }))
    }

    pub fn error(instance_id: &str, error: String, manifest: &str) -> Self {
        Self::Error(ErrorTrace {
            instance_id: instance_id.to_string(),
            error,
            manifest: manifest.to_string(),
        })
    }

    pub fn instance_id(&self) -> &str {
        match self {
            Self::Decision(d) => &d.instance_id,
            Self::Error(e) => &e.instance_id,
        }
    }

    pub fn verdict(&self) -> Option<Grounding> {
        match self {
            Self::Decision(d) => Grounding::from_score(d.s),
            Self::Error(_) => None,
        }
    }
}

pub fn read_traces(path: &Path) -> Result<Vec<TraceRecord>, LoadError> {
    let records = read_records::<TraceRecord>(path)?;
    for (line, r) in &records {
        if let TraceRecord::Decision(d) = r {
            if d.s > 1 {
                return Err(LoadError::Invalid {
                    path: path.to_path_buf(),
                    line: *line,
                    message: format!("s must be 0 or 1, got {}", d.s),
                });
            }
        }
    }
    Ok(records.into_iter().map(|(_, r)| r).collect())
}
