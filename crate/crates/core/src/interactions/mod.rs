//! Interaction learning functions, embeddings and the DAGFM student.

pub mod dagfm;
pub mod dagfm_plus;
pub mod embedding;
pub mod mlp;
pub mod phi;

pub use dagfm::{Dagfm, DagfmSpec, InteractionFn, PropagationTrace};
pub use dagfm_plus::{DagfmPlus, DagfmPlusSpec, MlpInput};
pub use embedding::{embedding_name, is_embedding, EmbeddingTable};
pub use mlp::{Mlp, MlpCache};
pub use phi::{outer_as_kernel, phi_basic_inner, phi_inner, phi_kernel, phi_outer};
