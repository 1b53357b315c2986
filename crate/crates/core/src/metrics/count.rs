use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::interactions::is_embedding;
use crate::model::{Model, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCounts {
    pub non_embedding: usize,
    pub with_embedding: usize,
}

/// Closed-form parameter counts for a model over fields with the given row
/// counts. Invalid specs (for example zero propagation layers) are errors.
pub fn count_params(spec: &ModelSpec, field_rows: &[usize]) -> Result<ParamCounts> {
    let net = spec.build()?;
    let non_embedding = net.param_count();
    let embedding: usize = field_rows.iter().sum::<usize>() * spec.dim();
    Ok(ParamCounts {
        non_embedding,
        with_embedding: non_embedding + embedding,
    })
}

/// Counts obtained by walking every tensor in the model's parameter store.
pub fn walk_params(model: &Model) -> ParamCounts {
    let non_embedding = model.params.count_where(|n| !is_embedding(n));
    ParamCounts {
        non_embedding,
        with_embedding: model.params.count_where(|_| true),
    }
}
