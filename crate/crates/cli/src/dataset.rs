//! Dataset files: one `{"instance_id", "image_id", "question", "image_height",
//! "image_width", "gold_label"?, "subset"?}` object per line.

use std::collections::HashSet;
use std::path::Path;

use groundcheck_core::GroundingInstance;

use crate::jsonl::read_records;
use crate::LoadError;

/// Instance-level checks shared by the loader and `validate`.
pub fn check_instance(inst: &GroundingInstance) -> Result<(), String> {
    if inst.image_height == 0 || inst.image_width == 0 {
        return Err(format!(
            "instance {}: image dimensions must be at least 1x1, got {}x{}",
            inst.instance_id, inst.image_height, inst.image_width
        ));
    }
    if inst.instance_id.is_empty() {
        return Err("empty instance_id".into());
    }
    Ok(())
}

/// Load all instances in file order. Any malformed line, invalid instance or
/// repeated id fails the whole load.
pub fn load_dataset(path: &Path) -> Result<Vec<GroundingInstance>, LoadError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, inst) in read_records::<GroundingInstance>(path)? {
        check_instance(&inst).map_err(|message| LoadError::Invalid {
            path: path.to_path_buf(),
            line,
            message,
        })?;
        if !seen.insert(inst.instance_id.clone()) {
            return Err(LoadError::DuplicateId {
                path: path.to_path_buf(),
                line,
                id: inst.instance_id,
            });
        }
        out.push(inst);
    }
    Ok(out)
}
