//! Fixture bundles: one `{"instance_id", "candidates": [..], "masks": [..]}`
//! object per line, masks in polygon or RLE form.
//!
//! Masks stay encoded until an instance asks for them, so one bad mask costs
//! its instance and not the whole run. Structural problems (bad JSON,
//! repeated ids, no candidates, candidate/mask count mismatch) fail the load.

use std::path::Path;

use groundcheck_core::provider::{FixtureRecord, FixtureStore};

use crate::jsonl::read_records;
use crate::LoadError;

pub fn check_record(rec: &FixtureRecord) -> Result<(), String> {
    if rec.candidates.is_empty() {
        return Err(format!("instance {}: no candidates", rec.instance_id));
    }
    if rec.candidates.len() != rec.masks.len() {
        return Err(format!(
            "instance {}: {} candidates but {} masks",
            rec.instance_id,
            rec.candidates.len(),
            rec.masks.len()
        ));
    }
    Ok(())
}

pub fn load_fixtures(path: &Path) -> Result<FixtureStore, LoadError> {
    let mut store = FixtureStore::new(format!("fixtures:{}", path.display()));
    for (line, rec) in read_records::<FixtureRecord>(path)? {
        check_record(&rec).map_err(|message| LoadError::Invalid {
            path: path.to_path_buf(),
            line,
            message,
        })?;
        let id = rec.instance_id.clone();
        if store.insert(rec).is_some() {
            return Err(LoadError::DuplicateId {
                path: path.to_path_buf(),
                line,
                id,
            });
        }
    }
    Ok(store)
}
