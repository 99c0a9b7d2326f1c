//! Batch execution over a dataset, optionally on a worker pool. Results come
//! back in dataset order whatever the completion order.

use groundcheck_core::evaluation::{evaluate_cell, sweep_cells, Sweep, SweepError};
use groundcheck_core::pipeline::{gather_evidence, Evidence, PipelineDecision, PipelineError};
use groundcheck_core::provider::{AnswerProposer, Embedder, Grounder};
use groundcheck_core::{GroundingInstance, ReasoningConfig};
use rayon::prelude::*;

/// The three provider roles for one run.
#[derive(Clone, Copy)]
pub struct Providers<'a> {
    pub proposer: &'a (dyn AnswerProposer + Sync),
    pub grounder: &'a (dyn Grounder + Sync),
    pub embedder: &'a (dyn Embedder + Sync),
}

fn map_ordered<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

pub fn gather_all(
    instances: &[GroundingInstance],
    providers: Providers<'_>,
    config: &ReasoningConfig,
    jobs: usize,
) -> Vec<Result<Evidence, PipelineError>> {
    map_ordered(instances, jobs, |inst| {
        gather_evidence(
            inst,
            providers.proposer,
            providers.grounder,
            providers.embedder,
            config,
        )
    })
}

pub fn judge_all(
    instances: &[GroundingInstance],
    providers: Providers<'_>,
    config: &ReasoningConfig,
    jobs: usize,
) -> Vec<Result<PipelineDecision, PipelineError>> {
    map_ordered(instances, jobs, |inst| {
        gather_evidence(
            inst,
            providers.proposer,
            providers.grounder,
            providers.embedder,
            config,
        )
        .and_then(|ev| ev.decide(config))
    })
}

/// Threshold sweep with grid cells evaluated concurrently. Evidence must be
/// complete; rows are returned tau_iou-major.
pub fn sweep_parallel(
    dataset: &[GroundingInstance],
    evidence: &[Evidence],
    tau_iou_grid: &[f64],
    tau_sem_grid: &[f64],
    config: &ReasoningConfig,
    jobs: usize,
) -> Result<Sweep, SweepError> {
    let cells = sweep_cells(tau_iou_grid, tau_sem_grid)?;
    let rows = map_ordered(&cells, jobs, |&(i, s)| {
        evaluate_cell(dataset, evidence, config, i, s)
    });
    Ok(Sweep {
        rows: rows.into_iter().collect::<Result<_, _>>()?,
    })
}
