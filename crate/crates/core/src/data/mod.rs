//! CSV ingestion: vocabularies, instance encoding, deterministic splits and
//! mini-batching, plus the MovieLens converter and a planted-interaction
//! generator for controlled experiments.

mod batch;
pub mod movielens;
mod schema;
mod split;
pub mod synthetic;

pub use batch::{iterate_batches, Batch, Batches};
pub use schema::{
    build_vocab, build_vocab_from_reader, instances_to_csv, load_instances, load_instances_from_reader, FieldSchema,
    FieldVocab, Instance, LABEL_COLUMN,
};
pub use split::{parse_ratios, split_dataset, DatasetSplit, DEFAULT_RATIOS, DEFAULT_SPLIT_SEED};
