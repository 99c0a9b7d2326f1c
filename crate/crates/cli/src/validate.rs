//! Whole-bundle checks. Unlike the loaders, which stop at the first
//! problem, this collects every violation with its location.
//!
//! A bundle with zero violations runs through `judge` without per-instance
//! errors.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use groundcheck_core::provider::{FixtureRecord, MaskEntry};
use groundcheck_core::semantics::filter_indices;
use groundcheck_core::{AnswerCandidate, Embedding, GroundingInstance, ReasoningConfig};

use crate::dataset::check_instance;
use crate::embeddings::EmbeddingRecord;
use crate::fixtures::check_record;
use crate::jsonl::parse_lines;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Default)]
struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }
}

fn at(path: &Path, line: usize) -> String {
    format!("{}:{line}", path.display())
}

fn check_mask(entry: &MaskEntry, inst: &GroundingInstance) -> Result<(), String> {
    let expected = (inst.image_height, inst.image_width);
    if entry.shape() != expected {
        return Err(format!(
            "mask is {}x{}, image is {}x{}",
            entry.shape().0,
            entry.shape().1,
            expected.0,
            expected.1
        ));
    }
    entry.to_mask().map(|_| ()).map_err(|e| e.to_string())
}

pub fn validate_bundle(
    dataset: &Path,
    fixtures: &Path,
    embeddings: &Path,
    config: &ReasoningConfig,
) -> Vec<Violation> {
    let mut v = Collector::default();
    if let Err(e) = config.validate() {
        v.push("config", e.to_string());
    }

    let mut instances: BTreeMap<String, (usize, GroundingInstance)> = BTreeMap::new();
    let mut order = Vec::new();
    match parse_lines::<GroundingInstance>(dataset) {
        Err(e) => v.push(dataset.display().to_string(), e.to_string()),
        Ok(lines) => {
            for (line, r) in lines {
                match r {
                    Err(e) => v.push(at(dataset, line), format!("malformed record: {e}")),
                    Ok(inst) => {
                        if let Err(e) = check_instance(&inst) {
                            v.push(at(dataset, line), e);
                        }
                        if inst.question.is_empty() {
                            v.push(
                                at(dataset, line),
                                format!("instance {}: empty question", inst.instance_id),
                            );
                        }
                        if let Some((first, _)) = instances.get(&inst.instance_id) {
                            v.push(
                                at(dataset, line),
                                format!(
                                    "duplicate instance_id {:?} (first on line {first})",
                                    inst.instance_id
                                ),
                            );
                        } else {
                            order.push(inst.instance_id.clone());
                            instances.insert(inst.instance_id.clone(), (line, inst));
                        }
                    }
                }
            }
        }
    }

    let mut table: HashMap<String, Embedding> = HashMap::new();
    match parse_lines::<EmbeddingRecord>(embeddings) {
        Err(e) => v.push(embeddings.display().to_string(), e.to_string()),
        Ok(lines) => {
            let mut dimension: Option<(usize, usize)> = None;
            for (line, r) in lines {
                let rec = match r {
                    Err(e) => {
                        v.push(at(embeddings, line), format!("malformed record: {e}"));
                        continue;
                    }
                    Ok(rec) => rec,
                };
                let emb = match Embedding::new(rec.vector) {
                    Err(e) => {
                        v.push(at(embeddings, line), format!("{:?}: {e}", rec.text));
                        continue;
                    }
                    Ok(e) => e,
                };
                match dimension {
                    None => dimension = Some((emb.dimension(), line)),
                    Some((d, first)) if d != emb.dimension() => {
                        v.push(
                            at(embeddings, line),
                            format!(
                                "{:?}: dimension {} differs from {d} (line {first})",
                                rec.text,
                                emb.dimension()
                            ),
                        );
                        continue;
                    }
                    _ => {}
                }
                let key = groundcheck_core::semantics::normalize_answer(&rec.text);
                if table.insert(key.clone(), emb).is_some() {
                    v.push(at(embeddings, line), format!("duplicate entry for {key:?}"));
                }
            }
        }
    }

    let mut covered: HashMap<String, usize> = HashMap::new();
    match parse_lines::<FixtureRecord>(fixtures) {
        Err(e) => v.push(fixtures.display().to_string(), e.to_string()),
        Ok(lines) => {
            for (line, r) in lines {
                let rec = match r {
                    Err(e) => {
                        v.push(at(fixtures, line), format!("malformed record: {e}"));
                        continue;
                    }
                    Ok(rec) => rec,
                };
                if let Some(first) = covered.get(&rec.instance_id) {
                    v.push(
                        at(fixtures, line),
                        format!(
                            "duplicate fixture for {:?} (first on line {first})",
                            rec.instance_id
                        ),
                    );
                    continue;
                }
                covered.insert(rec.instance_id.clone(), line);
                if let Err(e) = check_record(&rec) {
                    v.push(at(fixtures, line), e);
                }
                let Some((_, inst)) = instances.get(&rec.instance_id) else {
                    v.push(
                        at(fixtures, line),
                        format!("instance {:?} is not in the dataset", rec.instance_id),
                    );
                    continue;
                };
                for (i, entry) in rec.masks.iter().enumerate() {
                    if let Err(e) = check_mask(entry, inst) {
                        v.push(
                            at(fixtures, line),
                            format!("instance {} candidate {i}: {e}", rec.instance_id),
                        );
                    }
                }
                if !config.lenient_embeddings {
                    let cands: Vec<AnswerCandidate> = rec
                        .candidates
                        .iter()
                        .take(config.k)
                        .map(|c| AnswerCandidate::new(c.as_str()))
                        .collect();
                    for i in filter_indices(&cands, &config.junk_list) {
                        if !table.contains_key(&cands[i].normalized) {
                            v.push(
                                at(fixtures, line),
                                format!(
                                    "instance {} candidate {i}: no embedding for {:?}",
                                    rec.instance_id, cands[i].normalized
                                ),
                            );
                        }
                    }
                }
            }
        }
    }

    if config.lenient_embeddings && table.is_empty() && !covered.is_empty() {
        v.push(
            embeddings.display().to_string(),
            "lenient fallback needs at least one vector to fix the dimension",
        );
    }

    for id in &order {
        if !covered.contains_key(id) {
            let (line, _) = &instances[id];
            v.push(
                at(dataset, *line),
                format!("instance {id:?} has no fixture record"),
            );
        }
    }
    v.0
}
