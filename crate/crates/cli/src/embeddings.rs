//! Embedding tables: one `{"text", "vector": [..]}` object per line, all
//! vectors of one dimension. Keys are normalized on load.

use std::path::Path;

use groundcheck_core::provider::EmbeddingTable;
use groundcheck_core::Embedding;
use serde::{Deserialize, Serialize};

use crate::jsonl::read_records;
use crate::LoadError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub text: String,
    pub vector: Vec<f64>,
}

pub fn load_embedding_table(path: &Path) -> Result<EmbeddingTable, LoadError> {
    let mut table = EmbeddingTable::new(format!("embeddings:{}", path.display()));
    for (line, rec) in read_records::<EmbeddingRecord>(path)? {
        let invalid = |message: String| LoadError::Invalid {
            path: path.to_path_buf(),
            line,
            message,
        };
        let e = Embedding::new(rec.vector).map_err(|e| invalid(format!("{:?}: {e}", rec.text)))?;
        table
            .insert(&rec.text, e)
            .map_err(|e| invalid(e.to_string()))?;
    }
    Ok(table)
}
