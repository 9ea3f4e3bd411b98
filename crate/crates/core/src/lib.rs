//! Synthetic task-oriented dialogue generation.
//!
//! A completion model is prompted with seed dialogues and a target user goal,
//! and every generated turn is verified and revised before it enters the
//! prompt again: beliefs are merged with an auxiliary predictor and filtered
//! against the utterance, dialog acts are checked by rules and the database.

pub mod backend;
pub mod config;
pub mod corpus;
pub mod database;
pub mod exemplar;
pub mod format;
pub mod goal;
pub mod model;
pub mod ontology;
pub mod prompt;
pub mod revision;
pub mod simulator;
pub mod stats;
pub mod text;
pub mod validate;

pub use config::{DecodeParams, GenConfig};
pub use corpus::{load_seed_corpus, save_corpus, LoadMode, SeedDataset};
pub use model::{
    accumulate_state, ActTriple, DbBucket, DbResult, DialogAct, Dialogue, DialogueState, SlotTriple, SlotValues,
    Source, Turn, TurnBelief, UserGoal,
};
pub use ontology::Ontology;
