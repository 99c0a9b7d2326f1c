//! Interfaces to the three external models: answer proposal, answer
//! grounding and sentence embedding, plus in-memory implementations backed
//! by precomputed fixtures.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::geometry::{decode_rle, rasterize_polygon, BitMask, GeometryError, Polygon, RleMask};
use crate::reasoning::Grounding;
use crate::semantics::{normalize_answer, toy_embed, Embedding, SemanticsError};

/// Dataset split an instance belongs to.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Vqav2,
    Vizwiz,
    #[default]
    Other,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::Vqav2, Subset::Vizwiz, Subset::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Vqav2 => "vqav2",
            Self::Vizwiz => "vizwiz",
            Self::Other => "other",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One (image, question) pair to judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingInstance {
    pub instance_id: String,
    pub image_id: String,
    pub question: String,
    pub image_height: usize,
    pub image_width: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<Grounding>,
    #[serde(default)]
    pub subset: Subset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderErrorKind {
    /// The provider has no entry for the request.
    NotFound,
    /// Transport, decoding or schema failure.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderError {
    pub kind: ProviderErrorKind,
    pub provider: String,
    pub instance_id: String,
    pub message: String,
}

impl ProviderError {
    pub fn not_found(provider: &str, instance_id: &str, message: impl Into<String>) -> Self {
        Self {
            kind: ProviderErrorKind::NotFound,
            provider: provider.to_string(),
            instance_id: instance_id.to_string(),
            message: message.into(),
        }
    }

    pub fn failed(provider: &str, instance_id: &str, message: impl Into<String>) -> Self {
        Self {
            kind: ProviderErrorKind::Failed,
            provider: provider.to_string(),
            instance_id: instance_id.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ProviderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ProviderErrorKind::NotFound => "not found",
            ProviderErrorKind::Failed => "failed",
        };
        write!(
            f,
            "{} {kind} for instance {}: {}",
            self.provider, self.instance_id, self.message
        )
    }
}

impl core::error::Error for ProviderError {}

/// Produces candidate answers for a question.
pub trait AnswerProposer {
    fn id(&self) -> &str;
    /// At most `k` answers, in the proposer's ranking order.
    fn propose(&self, instance: &GroundingInstance, k: usize)
        -> Result<Vec<String>, ProviderError>;
}

/// Produces a segmentation mask for one answer.
pub trait Grounder {
    fn id(&self) -> &str;
    /// `answer_index` is the answer's position in the proposed list and
    /// `query` the composite question + answer text.
    fn ground(
        &self,
        instance: &GroundingInstance,
        answer_index: usize,
        query: &str,
    ) -> Result<BitMask, ProviderError>;
}

/// Produces a sentence embedding for a normalized answer.
pub trait Embedder {
    fn id(&self) -> &str;
    /// Embedding dimension, when known up front.
    fn dimension(&self) -> Option<usize>;
    fn embed(&self, instance_id: &str, normalized: &str) -> Result<Embedding, ProviderError>;
}

/// A stored mask, either as a polygon or as column-major RLE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaskEntry {
    Polygon {
        /// Kept unvalidated so a bad polygon fails its own instance, not the load.
        polygon: Vec<(f64, f64)>,
        height: usize,
        width: usize,
    },
    Rle {
        rle: RleMask,
    },
}

impl MaskEntry {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Self::Polygon { height, width, .. } => (*height, *width),
            Self::Rle { rle } => (rle.height, rle.width),
        }
    }

    pub fn to_mask(&self) -> Result<BitMask, GeometryError> {
        match self {
            Self::Polygon {
                polygon,
                height,
                width,
            } => rasterize_polygon(&Polygon::new(polygon.clone())?, *height, *width),
            Self::Rle { rle } => decode_rle(rle),
        }
    }
}

/// Stored answers and masks for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub instance_id: String,
    pub candidates: Vec<String>,
    pub masks: Vec<MaskEntry>,
}

/// Precomputed proposals and masks keyed by instance id.
#[derive(Debug, Clone, Default)]
pub struct FixtureStore {
    id: String,
    records: BTreeMap<String, FixtureRecord>,
}

impl FixtureStore {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            records: BTreeMap::new(),
        }
    }

    /// Returns the previous record when the id was already present.
    pub fn insert(&mut self, record: FixtureRecord) -> Option<FixtureRecord> {
        self.records.insert(record.instance_id.clone(), record)
    }

    pub fn get(&self, instance_id: &str) -> Option<&FixtureRecord> {
        self.records.get(instance_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn record(&self, instance_id: &str) -> Result<&FixtureRecord, ProviderError> {
        self.records
            .get(instance_id)
            .ok_or_else(|| ProviderError::not_found(&self.id, instance_id, "no fixture record"))
    }

    /// Stored answers truncated to `k`.
    pub fn fixture_propose(
        &self,
        instance_id: &str,
        k: usize,
    ) -> Result<Vec<String>, ProviderError> {
        let rec = self.record(instance_id)?;
        Ok(rec.candidates.iter().take(k).cloned().collect())
    }

    /// Decode the stored mask of answer `answer_index`.
    pub fn fixture_ground(
        &self,
        instance_id: &str,
        answer_index: usize,
    ) -> Result<BitMask, ProviderError> {
        let rec = self.record(instance_id)?;
        let entry = rec.masks.get(answer_index).ok_or_else(|| {
            ProviderError::not_found(
                &self.id,
                instance_id,
                format!(
                    "no mask for answer {answer_index} ({} stored)",
                    rec.masks.len()
                ),
            )
        })?;
        entry.to_mask().map_err(|e| {
            ProviderError::failed(&self.id, instance_id, format!("answer {answer_index}: {e}"))
        })
    }
}

impl AnswerProposer for FixtureStore {
    fn id(&self) -> &str {
        &self.id
    }

    fn propose(
        &self,
        instance: &GroundingInstance,
        k: usize,
    ) -> Result<Vec<String>, ProviderError> {
        self.fixture_propose(&instance.instance_id, k)
    }
}

impl Grounder for FixtureStore {
    fn id(&self) -> &str {
        &self.id
    }

    fn ground(
        &self,
        instance: &GroundingInstance,
        answer_index: usize,
        _query: &str,
    ) -> Result<BitMask, ProviderError> {
        let mask = self.fixture_ground(&instance.instance_id, answer_index)?;
        let expected = (instance.image_height, instance.image_width);
        if mask.shape() != expected {
            return Err(ProviderError::failed(
                &self.id,
                &instance.instance_id,
                format!(
                    "mask {answer_index} is {:?}, image is {expected:?}",
                    mask.shape()
                ),
            ));
        }
        Ok(mask)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableError {
    Dimension { expected: usize, got: usize },
    Duplicate(String),
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Dimension { expected, got } => {
                write!(f, "vector has dimension {got}, table has {expected}")
            }
            Self::Duplicate(t) => write!(f, "duplicate entry for {t:?}"),
        }
    }
}

impl core::error::Error for TableError {}

/// Embeddings keyed by normalized answer text, all of one dimension.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    id: String,
    dimension: Option<usize>,
    entries: BTreeMap<String, Embedding>,
}

impl EmbeddingTable {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            dimension: None,
            entries: BTreeMap::new(),
        }
    }

    /// Keys are normalized before insertion.
    pub fn insert(&mut self, text: &str, vector: Embedding) -> Result<(), TableError> {
        match self.dimension {
            Some(d) if d != vector.dimension() => {
                return Err(TableError::Dimension {
                    expected: d,
                    got: vector.dimension(),
                })
            }
            _ => self.dimension = Some(vector.dimension()),
        }
        let key = normalize_answer(text);
        if self.entries.contains_key(&key) {
            return Err(TableError::Duplicate(key));
        }
        self.entries.insert(key, vector);
        Ok(())
    }

    pub fn get(&self, normalized: &str) -> Option<&Embedding> {
        self.entries.get(normalized)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Embedder for EmbeddingTable {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    fn embed(&self, instance_id: &str, normalized: &str) -> Result<Embedding, ProviderError> {
        self.entries.get(normalized).cloned().ok_or_else(|| {
            ProviderError::not_found(
                &self.id,
                instance_id,
                format!("no embedding for {normalized:?}"),
            )
        })
    }
}

/// Hash-based embedder with no semantic content; see [`toy_embed`].
#[derive(Debug, Clone)]
pub struct ToyEmbedder {
    dimension: usize,
}

impl ToyEmbedder {
    pub fn new(dimension: usize) -> Result<Self, SemanticsError> {
        toy_embed("", dimension)?;
        Ok(Self { dimension })
    }
}

impl Embedder for ToyEmbedder {
    fn id(&self) -> &str {
        "toy"
    }

    fn dimension(&self) -> Option<usize> {
        Some(self.dimension)
    }

    fn embed(&self, instance_id: &str, normalized: &str) -> Result<Embedding, ProviderError> {
        toy_embed(normalized, self.dimension)
            .map_err(|e| ProviderError::failed("toy", instance_id, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn instance(id: &str) -> GroundingInstance {
        GroundingInstance {
            instance_id: id.into(),
            image_id: "img".into(),
            question: "What is this?".into(),
            image_height: 8,
            image_width: 8,
            gold_label: None,
            subset: Subset::Other,
        }
    }

    fn store() -> FixtureStore {
        let square = |x0: f64| MaskEntry::Polygon {
            polygon: vec![(x0, 0.0), (x0 + 4.0, 0.0), (x0 + 4.0, 4.0), (x0, 4.0)],
            height: 8,
            width: 8,
        };
        let mut s = FixtureStore::new("fixtures");
        s.insert(FixtureRecord {
            instance_id: "q1".into(),
            candidates: vec!["table".into(), "headphone".into(), "desk".into()],
            masks: vec![
                square(0.0),
                MaskEntry::Rle {
                    rle: RleMask {
                        height: 8,
                        width: 8,
                        counts: vec![36, 4, 4, 4, 4, 4, 4, 4],
                    },
                },
                square(4.0),
            ],
        });
        s
    }

    #[test]
    fn propose_truncates_to_k() {
        let s = store();
        assert_eq!(
            s.fixture_propose("q1", 3).unwrap(),
            ["table", "headphone", "desk"]
        );
        assert_eq!(s.fixture_propose("q1", 2).unwrap(), ["table", "headphone"]);
        let e = s.fixture_propose("nope", 3).unwrap_err();
        assert_eq!(e.kind, ProviderErrorKind::NotFound);
        assert_eq!(e.instance_id, "nope");
    }

    #[test]
    fn ground_decodes_both_forms() {
        let s = store();
        let poly = s.fixture_ground("q1", 0).unwrap();
        assert_eq!(poly, BitMask::from_fn(8, 8, |r, c| r < 4 && c < 4).unwrap());
        let rle = s.fixture_ground("q1", 1).unwrap();
        assert_eq!(
            rle,
            BitMask::from_fn(8, 8, |r, c| r >= 4 && c >= 4).unwrap()
        );
        assert_eq!(
            s.fixture_ground("q1", 5).unwrap_err().kind,
            ProviderErrorKind::NotFound
        );
        // repeated calls are identical
        assert_eq!(s.fixture_ground("q1", 1).unwrap(), rle);
    }

    #[test]
    fn ground_rejects_wrong_image_shape() {
        let s = store();
        let mut inst = instance("q1");
        inst.image_width = 9;
        assert_eq!(
            s.ground(&inst, 0, "").unwrap_err().kind,
            ProviderErrorKind::Failed
        );
        assert!(s.ground(&instance("q1"), 0, "").is_ok());
    }

    #[test]
    fn mask_entry_json_shapes() {
        let p: MaskEntry =
            serde_json::from_str(r#"{"polygon": [[0,0],[4,0],[4,4]], "height": 8, "width": 8}"#)
                .unwrap();
        assert_eq!(p.shape(), (8, 8));
        let r: MaskEntry =
            serde_json::from_str(r#"{"rle": {"counts": [0, 4], "height": 2, "width": 2}}"#)
                .unwrap();
        assert_eq!(r.to_mask().unwrap().count_ones(), 4);
    }

    #[test]
    fn embedding_table_rules() {
        let mut t = EmbeddingTable::new("table");
        t.insert("Cat", Embedding::new(vec![1.0, 0.0]).unwrap())
            .unwrap();
        assert!(t.get("cat").is_some());
        assert_eq!(
            t.insert("dog", Embedding::new(vec![1.0]).unwrap()),
            Err(TableError::Dimension {
                expected: 2,
                got: 1
            })
        );
        assert!(matches!(
            t.insert("CAT", Embedding::new(vec![0.0, 1.0]).unwrap()),
            Err(TableError::Duplicate(_))
        ));
        assert_eq!(
            t.embed("q", "bird").unwrap_err().kind,
            ProviderErrorKind::NotFound
        );
    }
}
