//! Beam search under lexical constraints. Requirements are groups of
//! interchangeable words; a bitmask automaton tracks which groups a
//! hypothesis has covered and search keeps a separate beam per mask.

mod constraints;
mod diverse;
mod search;

pub use constraints::{fsa_advance, pick_constraints, ConstraintAutomaton, ConstraintGroup, ConstraintMode, ConstraintSpec};
pub use diverse::{diverse_decode, read_decodes, write_decodes, DecodeOutcome, DecodeRecord, ModelScorer};
pub use search::{constrained_beam_search, greedy_decode, Hypothesis, PrefixScorer, SearchConfig, SearchResult, StepScorer};
