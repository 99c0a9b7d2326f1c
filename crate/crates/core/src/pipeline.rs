//! Proposal → grounding → embedding → decision for one instance.
//!
//! Filtration runs right after proposal, so junk and duplicate answers are
//! never sent to the grounder or the embedder.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BitMask;
use crate::provider::{
    AnswerProposer, Embedder, Grounder, GroundingInstance, ProviderError, ProviderErrorKind,
};
use crate::reasoning::{
    build_grounding_query, decide_consistency, ConsistencyDecision, ReasoningConfig, ReasoningError,
};
use crate::semantics::{filter_indices, toy_embed, AnswerCandidate, Embedding};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("provider error: {0}")]
    Provider(#[from] ProviderError),
    #[error("instance {instance_id}: {source}")]
    Reasoning {
        instance_id: String,
        source: ReasoningError,
    },
}

impl PipelineError {
    pub fn instance_id(&self) -> &str {
        match self {
            Self::Provider(e) => &e.instance_id,
            Self::Reasoning { instance_id, .. } => instance_id,
        }
    }

    fn reasoning(instance: &GroundingInstance, source: ReasoningError) -> Self {
        Self::Reasoning {
            instance_id: instance.instance_id.clone(),
            source,
        }
    }
}

/// Which providers served a decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderIds {
    pub proposer: String,
    pub grounder: String,
    pub embedder: String,
}

/// Everything the decision needs for one instance, gathered once so that
/// threshold sweeps can re-decide without calling the providers again.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub instance_id: String,
    /// Raw answers as proposed (after truncation to `k`).
    pub proposed: Vec<String>,
    /// Positions in `proposed` that survived filtration.
    pub kept_indices: Vec<usize>,
    pub candidates: Vec<AnswerCandidate>,
    pub masks: Vec<BitMask>,
    pub embeddings: Vec<Embedding>,
    pub providers: ProviderIds,
}

/// Decision with the provider identities that produced its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineDecision {
    pub instance_id: String,
    pub decision: ConsistencyDecision,
    pub providers: ProviderIds,
}

fn embed_with_fallback(
    embedder: &dyn Embedder,
    instance_id: &str,
    normalized: &str,
    lenient: bool,
) -> Result<Embedding, ProviderError> {
    match embedder.embed(instance_id, normalized) {
        Err(e) if lenient && e.kind == ProviderErrorKind::NotFound => {
            let dim = embedder.dimension().ok_or_else(|| e.clone())?;
            toy_embed(normalized, dim)
                .map_err(|te| ProviderError::failed(embedder.id(), instance_id, te.to_string()))
        }
        other => other,
    }
}

pub fn gather_evidence(
    instance: &GroundingInstance,
    proposer: &dyn AnswerProposer,
    grounder: &dyn Grounder,
    embedder: &dyn Embedder,
    config: &ReasoningConfig,
) -> Result<Evidence, PipelineError> {
    config
        .validate()
        .map_err(|e| PipelineError::reasoning(instance, e))?;
    let mut proposed = proposer.propose(instance, config.k)?;
    proposed.truncate(config.k);

    let all: Vec<AnswerCandidate> = proposed
        .iter()
        .map(|a| AnswerCandidate::new(a.as_str()))
        .collect();
    let kept_indices = filter_indices(&all, &config.junk_list);

    let mut candidates = Vec::with_capacity(kept_indices.len());
    let mut masks = Vec::with_capacity(kept_indices.len());
    let mut embeddings = Vec::with_capacity(kept_indices.len());
    for &i in &kept_indices {
        let cand = all[i].clone();
        let query = build_grounding_query(&instance.question, &cand.raw)
            .map_err(|e| PipelineError::reasoning(instance, e))?;
        masks.push(grounder.ground(instance, i, &query)?);
        embeddings.push(embed_with_fallback(
            embedder,
            &instance.instance_id,
            &cand.normalized,
            config.lenient_embeddings,
        )?);
        candidates.push(cand);
    }

    Ok(Evidence {
        instance_id: instance.instance_id.clone(),
        proposed,
        kept_indices,
        candidates,
        masks,
        embeddings,
        providers: ProviderIds {
            proposer: proposer.id().to_string(),
            grounder: grounder.id().to_string(),
            embedder: embedder.id().to_string(),
        },
    })
}

impl Evidence {
    /// Decide on the gathered evidence. Indices in the trace refer to the
    /// proposed list.
    pub fn decide(&self, config: &ReasoningConfig) -> Result<PipelineDecision, PipelineError> {
        let mut decision =
            decide_consistency(&self.candidates, &self.masks, &self.embeddings, config).map_err(
                |source| PipelineError::Reasoning {
                    instance_id: self.instance_id.clone(),
                    source,
                },
            )?;
        decision.kept_indices = decision
            .kept_indices
            .iter()
            .map(|&i| self.kept_indices[i])
            .collect();
        decision.proposed = self.proposed.clone();
        Ok(PipelineDecision {
            instance_id: self.instance_id.clone(),
            decision,
            providers: self.providers.clone(),
        })
    }
}

/// Run the full chain for one instance.
pub fn run_pipeline(
    instance: &GroundingInstance,
    proposer: &dyn AnswerProposer,
    grounder: &dyn Grounder,
    embedder: &dyn Embedder,
    config: &ReasoningConfig,
) -> Result<PipelineDecision, PipelineError> {
    gather_evidence(instance, proposer, grounder, embedder, config)?.decide(config)
}
