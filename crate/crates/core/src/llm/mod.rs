//! LLM-driven macro extraction.

pub mod backend;
pub mod chain;
pub mod parse;
pub mod prompt;

pub use backend::{fingerprint, BackendError, GenerationBackend, HttpBackend, HttpBackendConfig, ScriptedBackend};
pub use chain::{
    complete_candidate, discover_tasks, extract_candidates, find_parameters, ground_action,
    locate_parameter_element, ChainConfig, CompletionStats, DiscoveryStats, Extraction, GroundingResult,
    StepError, DEFAULT_RETRY_CAP,
};
