//! Mining described, replayable macros from mobile UI interaction traces.
//!
//! The pipeline renders each trace screen as compact HTML, asks a language
//! model which tasks the screen supports, grounds the final action of each
//! task, merges traces into an interaction graph to shorten the action
//! sequences, and replays the result with fuzzy element matching.

pub mod dedup;
pub mod eval;
pub mod fixtures;
pub mod graph;
pub mod html;
pub mod llm;
pub mod macros;
pub mod pipeline;
pub mod replay;
pub mod sim;
pub mod trace;
