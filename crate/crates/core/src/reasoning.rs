//! The staged consistency decision.
//!
//! 1. Filtration drops empty, junk and duplicate answers together with their
//!    masks and embeddings.
//! 2. Visual check: `C_V = [min_{i≠j} IoU(m_i, m_j) ≥ τ_iou]`.
//! 3. Semantic check: `D_S = [max_{i≠j} cos(e_i, e_j) < τ_sem]`.
//! 4. Verdict: all-numeric answers defer to `C_V`; otherwise `D_S = 1` means
//!    multiple groundings; otherwise defer to `C_V`.
//!
//! Fewer than two surviving answers cannot disagree and are judged single.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, BitMask, GeometryError};
use crate::semantics::{self, AnswerCandidate, Embedding, SemanticsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReasoningError {
    #[error("aligned inputs differ in length: {candidates} candidates, {masks} masks, {embeddings} embeddings")]
    Alignment {
        candidates: usize,
        masks: usize,
        embeddings: usize,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

/// Thresholds and policy knobs for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningConfig {
    /// Minimum pairwise mask IoU for visual agreement, inclusive.
    pub tau_iou: f64,
    /// Similarity below which every answer pair counts as a semantic disagreement.
    pub tau_sem: f64,
    /// Number of proposed answers consumed per question.
    pub k: usize,
    /// Normalized answers discarded during filtration.
    pub junk_list: BTreeSet<String>,
    /// Fall back to a hashed stand-in when an answer is missing from the embedding table.
    pub lenient_embeddings: bool,
}

impl Default for ReasoningConfig {
    fn default() -> Self {
        Self {
            tau_iou: 0.5,
            tau_sem: 0.7,
            k: 3,
            junk_list: semantics::default_junk_list(),
            lenient_embeddings: false,
        }
    }
}

impl ReasoningConfig {
    pub fn validate(&self) -> Result<(), ReasoningError> {
        if !(0.0..=1.0).contains(&self.tau_iou) {
            return Err(ReasoningError::InvalidConfig("tau_iou must lie in [0, 1]"));
        }
        if !(-1.0..=1.0).contains(&self.tau_sem) {
            return Err(ReasoningError::InvalidConfig("tau_sem must lie in [-1, 1]"));
        }
        if self.k == 0 {
            return Err(ReasoningError::InvalidConfig("k must be at least 1"));
        }
        Ok(())
    }

    pub fn with_thresholds(&self, tau_iou: f64, tau_sem: f64) -> Self {
        Self {
            tau_iou,
            tau_sem,
            ..self.clone()
        }
    }
}

/// Single (`s = 1`) or multiple (`s = 0`) groundings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grounding {
    Multiple,
    Single,
}

impl Grounding {
    pub fn from_score(s: u8) -> Option<Self> {
        match s {
            0 => Some(Self::Multiple),
            1 => Some(Self::Single),
            _ => None,
        }
    }

    pub fn score(self) -> u8 {
        match self {
            Self::Multiple => 0,
            Self::Single => 1,
        }
    }

    pub fn from_flag(single: bool) -> Self {
        if single {
            Self::Single
        } else {
            Self::Multiple
        }
    }
}

/// Which rule produced the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Numeric,
    SemanticDisagreement,
    VisualDefault,
    DegenerateSingle,
}

/// Verdict plus everything that went into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyDecision {
    pub s: Grounding,
    /// Visual agreement; absent with fewer than two surviving answers.
    pub c_v: Option<bool>,
    /// Semantic disagreement; absent with fewer than two surviving answers.
    pub d_s: Option<bool>,
    pub all_numeric: bool,
    pub branch: Branch,
    pub min_iou: Option<f64>,
    pub max_sim: Option<f64>,
    pub iou_matrix: Vec<Vec<f64>>,
    pub sim_matrix: Vec<Vec<f64>>,
    pub kept_candidates: Vec<AnswerCandidate>,
    /// Positions of `kept_candidates` in the proposed list.
    pub kept_indices: Vec<usize>,
    /// Raw answers as proposed, before filtration.
    pub proposed: Vec<String>,
    /// Masks agree but the answers mean different things. The semantic
    /// check wins on the verdict; the flag keeps the conflict visible.
    pub visual_semantic_conflict: bool,
}

impl ConsistencyDecision {
    /// Check the per-branch invariants. Used by tests and by trace readers.
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        let symmetric_unit = |m: &[Vec<f64>]| {
            m.iter().enumerate().all(|(i, row)| {
                row.len() == m.len() && row[i] == 1.0 && (0..m.len()).all(|j| row[j] == m[j][i])
            })
        };
        if !symmetric_unit(&self.iou_matrix) || !symmetric_unit(&self.sim_matrix) {
            return Err("pairwise matrices must be symmetric with unit diagonal");
        }
        if self.iou_matrix.len() != self.kept_candidates.len()
            || self.sim_matrix.len() != self.kept_candidates.len()
        {
            return Err("matrix size must match surviving candidates");
        }
        let ok = match self.branch {
            Branch::Numeric => {
                self.all_numeric && self.c_v.map(Grounding::from_flag) == Some(self.s)
            }
            Branch::SemanticDisagreement => self.d_s == Some(true) && self.s == Grounding::Multiple,
            Branch::VisualDefault => self.c_v.map(Grounding::from_flag) == Some(self.s),
            Branch::DegenerateSingle => {
                self.kept_candidates.len() <= 1 && self.s == Grounding::Single
            }
        };
        if ok {
            Ok(())
        } else {
            Err("branch invariant violated")
        }
    }
}

/// `t_i = Q + a_i`: question and answer joined by one space.
pub fn build_grounding_query(question: &str, answer: &str) -> Result<String, ReasoningError> {
    if question.is_empty() {
        return Err(ReasoningError::InvalidInput("empty question"));
    }
    let mut q = String::with_capacity(question.len() + answer.len() + 1);
    q.push_str(question);
    q.push(' ');
    q.push_str(answer);
    Ok(q)
}

/// The verdict rule on already-computed flags.
pub fn resolve(all_numeric: bool, c_v: bool, d_s: bool) -> (Grounding, Branch) {
    if all_numeric {
        (Grounding::from_flag(c_v), Branch::Numeric)
    } else if d_s {
        (Grounding::Multiple, Branch::SemanticDisagreement)
    } else {
        (Grounding::from_flag(c_v), Branch::VisualDefault)
    }
}

/// Filter, measure, and decide. `candidates`, `masks` and `embeddings` are
/// index-aligned; entries of filtered-out candidates never reach the
/// pairwise checks.
pub fn decide_consistency(
    candidates: &[AnswerCandidate],
    masks: &[BitMask],
    embeddings: &[Embedding],
    config: &ReasoningConfig,
) -> Result<ConsistencyDecision, ReasoningError> {
    config.validate()?;
    if candidates.len() != masks.len() || candidates.len() != embeddings.len() {
        return Err(ReasoningError::Alignment {
            candidates: candidates.len(),
            masks: masks.len(),
            embeddings: embeddings.len(),
        });
    }
    if let Some(first) = masks.first() {
        for m in &masks[1..] {
            if m.shape() != first.shape() {
                return Err(GeometryError::ShapeMismatch {
                    left: first.shape(),
                    right: m.shape(),
                }
                .into());
            }
        }
    }
    if let Some(first) = embeddings.first() {
        for e in &embeddings[1..] {
            if e.dimension() != first.dimension() {
                return Err(SemanticsError::ShapeMismatch {
                    left: first.dimension(),
                    right: e.dimension(),
                }
                .into());
            }
        }
    }

    let kept_indices = semantics::filter_indices(candidates, &config.junk_list);
    let kept_candidates: Vec<AnswerCandidate> = kept_indices
        .iter()
        .map(|&i| candidates[i].clone())
        .collect();
    let kept_masks: Vec<BitMask> = kept_indices.iter().map(|&i| masks[i].clone()).collect();
    let kept_embeddings: Vec<Embedding> = kept_indices
        .iter()
        .map(|&i| embeddings[i].clone())
        .collect();

    let iou_matrix = geometry::iou_matrix(&kept_masks)?;
    let sim_matrix = semantics::similarity_matrix(&kept_embeddings)?;
    let all_numeric = !kept_candidates.is_empty() && kept_candidates.iter().all(|c| c.is_numeric);
    let proposed = candidates.iter().map(|c| c.raw.clone()).collect();

    if kept_candidates.len() <= 1 {
        return Ok(ConsistencyDecision {
            s: Grounding::Single,
            c_v: None,
            d_s: None,
            all_numeric,
            branch: Branch::DegenerateSingle,
            min_iou: None,
            max_sim: None,
            iou_matrix,
            sim_matrix,
            kept_candidates,
            kept_indices,
            proposed,
            visual_semantic_conflict: false,
        });
    }

    let min_iou = geometry::min_off_diagonal(&iou_matrix).expect("two or more masks");
    let max_sim = semantics::max_off_diagonal(&sim_matrix).expect("two or more embeddings");
    let c_v = min_iou >= config.tau_iou;
    let d_s = semantics::semantic_disagreement(max_sim, config.tau_sem);
    let (s, branch) = resolve(all_numeric, c_v, d_s);

    Ok(ConsistencyDecision {
        s,
        c_v: Some(c_v),
        d_s: Some(d_s),
        all_numeric,
        branch,
        min_iou: Some(min_iou),
        max_sim: Some(max_sim),
        iou_matrix,
        sim_matrix,
        kept_candidates,
        kept_indices,
        proposed,
        visual_semantic_conflict: c_v && d_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::candidates_from;
    use alloc::vec;

    fn block(cols: core::ops::Range<usize>) -> BitMask {
        BitMask::from_fn(4, 4, |_, c| cols.contains(&c)).unwrap()
    }

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn grounding_query_examples() {
        assert_eq!(
            build_grounding_query("What is this?", "table").unwrap(),
            "What is this? table"
        );
        assert_eq!(
            build_grounding_query("What does this say?", "brand name").unwrap(),
            "What does this say? brand name"
        );
        assert!(matches!(
            build_grounding_query("", "cat"),
            Err(ReasoningError::InvalidInput(_))
        ));
    }

    #[test]
    fn numeric_answers_trust_masks() {
        let cfg = ReasoningConfig::default();
        let d = decide_consistency(
            &candidates_from(&["2", "two"]),
            &[block(0..2), block(0..2)],
            &[emb(&[1.0, 0.0]), emb(&[0.0, 1.0])],
            &cfg,
        )
        .unwrap();
        assert_eq!((d.s, d.branch), (Grounding::Single, Branch::Numeric));
        d.check_invariants().unwrap();

        let d = decide_consistency(
            &candidates_from(&["2", "3"]),
            &[block(0..2), block(2..4)],
            &[emb(&[1.0, 0.0]), emb(&[1.0, 0.0])],
            &cfg,
        )
        .unwrap();
        assert_eq!((d.s, d.branch), (Grounding::Multiple, Branch::Numeric));
        assert_eq!(d.min_iou, Some(0.0));
    }

    #[test]
    fn semantic_disagreement_overrides_masks() {
        let d = decide_consistency(
            &candidates_from(&["table", "headphone"]),
            &[block(0..2), block(0..2)],
            &[emb(&[1.0, 0.0]), emb(&[0.0, 1.0])],
            &ReasoningConfig::default(),
        )
        .unwrap();
        assert_eq!(
            (d.s, d.branch),
            (Grounding::Multiple, Branch::SemanticDisagreement)
        );
        assert!(d.visual_semantic_conflict);
        d.check_invariants().unwrap();
    }

    #[test]
    fn duplicates_collapse_to_degenerate_single() {
        let d = decide_consistency(
            &candidates_from(&["cat", "cat"]),
            &[block(0..2), block(2..4)],
            &[emb(&[1.0, 0.0]), emb(&[0.0, 1.0])],
            &ReasoningConfig::default(),
        )
        .unwrap();
        assert_eq!(
            (d.s, d.branch),
            (Grounding::Single, Branch::DegenerateSingle)
        );
        assert_eq!(d.kept_indices, vec![0]);
        assert_eq!(d.iou_matrix, vec![vec![1.0]]);
        assert_eq!((d.c_v, d.d_s), (None, None));
        d.check_invariants().unwrap();

        let d = decide_consistency(&[], &[], &[], &ReasoningConfig::default()).unwrap();
        assert_eq!(d.branch, Branch::DegenerateSingle);
        assert!(!d.all_numeric);
    }

    #[test]
    fn junk_masks_do_not_reach_visual_check() {
        let d = decide_consistency(
            &candidates_from(&["soup", "unanswerable", "tomato soup"]),
            &[block(0..2), block(2..4), block(0..2)],
            &[emb(&[1.0, 0.1]), emb(&[0.0, 1.0]), emb(&[1.0, 0.2])],
            &ReasoningConfig::default(),
        )
        .unwrap();
        assert_eq!(d.kept_indices, vec![0, 2]);
        assert_eq!((d.s, d.branch), (Grounding::Single, Branch::VisualDefault));
    }

    #[test]
    fn alignment_and_shape_errors() {
        let cfg = ReasoningConfig::default();
        let e = decide_consistency(&candidates_from(&["a", "b"]), &[block(0..1)], &[], &cfg);
        assert!(matches!(e, Err(ReasoningError::Alignment { .. })));
        let other = BitMask::zeros(2, 2).unwrap();
        let e = decide_consistency(
            &candidates_from(&["a", "b"]),
            &[block(0..1), other],
            &[emb(&[1.0]), emb(&[1.0])],
            &cfg,
        );
        assert!(matches!(
            e,
            Err(ReasoningError::Geometry(
                GeometryError::ShapeMismatch { .. }
            ))
        ));
    }

    #[test]
    fn config_bounds() {
        let mut cfg = ReasoningConfig::default();
        cfg.validate().unwrap();
        cfg.tau_iou = 1.1;
        assert!(cfg.validate().is_err());
        let cfg = ReasoningConfig {
            tau_sem: -1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ReasoningConfig {
            k: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
