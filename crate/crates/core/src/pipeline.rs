//! End-to-end mining: traces in, optimized macros and a report out.
//!
//! Per app the stages run in a fixed order: task discovery, description
//! filtering, similarity grouping and sampling, grounding and parameter
//! finding, action filtering, graph construction and path optimization.
//! All randomness derives from one root seed, namespaced per stage and app.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dedup::{self, BagOfTokensEmbedder, Verdict};
use crate::graph::{build_graph, optimize, reduction_stats, DroppedCandidate, GraphError, ReductionStats};
use crate::llm::{complete_candidate, extract_candidates, BackendError, ChainConfig, CompletionStats, DiscoveryStats, GenerationBackend};
use crate::macros::{Macro, MacroCandidate};
use crate::replay::DEFAULT_MATCH_THRESHOLD;
use crate::trace::Trace;

pub const DEFAULT_DEDUP_THRESHOLD: f64 = 0.9;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no traces to mine")]
    NoTraces,
    #[error("{name} must be in (0, 1], got {value}")]
    Threshold { name: &'static str, value: f64 },
    #[error("retry cap must be at least 1")]
    ZeroRetryCap,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("candidate from {trace_id} refers to missing screen {screen}")]
    MissingScreen { trace_id: String, screen: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub dedup_threshold: f64,
    pub match_threshold: f64,
    pub retry_cap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dedup_threshold: DEFAULT_DEDUP_THRESHOLD,
            match_threshold: DEFAULT_MATCH_THRESHOLD,
            retry_cap: crate::llm::DEFAULT_RETRY_CAP,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        for (name, value) in [("dedup threshold", self.dedup_threshold), ("match threshold", self.match_threshold)] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(PipelineError::Threshold { name, value });
            }
        }
        if self.retry_cap == 0 {
            return Err(PipelineError::ZeroRetryCap);
        }
        Ok(())
    }
}

/// Stage seed: the first 8 bytes of SHA-256(root seed, namespace).
pub fn derive_seed(root: u64, namespace: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(namespace.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AppReport {
    pub app_id: String,
    pub traces: usize,
    pub discovery: DiscoveryStats,
    pub dropped_description: usize,
    pub groups: usize,
    pub completion: CompletionStats,
    pub dropped_actions: usize,
    pub dropped_optimize: Vec<DroppedCandidate>,
    pub macros: usize,
    pub reduction: Option<ReductionStats>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MiningReport {
    pub config: Option<PipelineConfig>,
    pub apps: Vec<AppReport>,
    pub candidates_discovered: usize,
    pub macros: usize,
    /// LLM calls with no parseable completion, over all chain calls that are
    /// checked for format.
    pub format_failure_rate: Option<f64>,
    pub reduction: Option<ReductionStats>,
}

#[derive(Debug, Clone, Default)]
pub struct MiningOutput {
    pub macros: Vec<Macro>,
    pub report: MiningReport,
}

/// Runs the whole pipeline over traces from one or more apps.
pub fn mine(traces: &[Trace], backend: &dyn GenerationBackend, cfg: &PipelineConfig) -> Result<MiningOutput, PipelineError> {
    if traces.is_empty() {
        return Err(PipelineError::NoTraces);
    }
    cfg.validate()?;
    let mut by_app: BTreeMap<&str, Vec<Trace>> = BTreeMap::new();
    for t in traces {
        by_app.entry(&t.app_id).or_default().push(t.clone());
    }
    let mut out = MiningOutput::default();
    let mut all_pre: Vec<MacroCandidate> = Vec::new();
    let (mut failures, mut calls) = (0usize, 0usize);
    for (app, app_traces) in by_app {
        let (macros, kept, report) = mine_app(app, &app_traces, backend, cfg)?;
        failures += report.discovery.discovery_failures
            + report.completion.grounding_failures
            + report.completion.parameter_parse_failures;
        calls += report.discovery.screens_processed
            + report.completion.attempted
            + (report.completion.attempted - report.completion.grounding_failures - report.completion.terminal);
        out.report.candidates_discovered += report.discovery.candidates_discovered;
        out.macros.extend(macros);
        all_pre.extend(kept);
        out.report.apps.push(report);
    }
    out.report.config = Some(*cfg);
    out.report.macros = out.macros.len();
    out.report.format_failure_rate = (calls > 0).then(|| failures as f64 / calls as f64);
    out.report.reduction = reduction_stats(&all_pre, &out.macros);
    Ok(out)
}

/// Returns the app's macros, the candidates they came from, and the report.
fn mine_app(
    app: &str,
    traces: &[Trace],
    backend: &dyn GenerationBackend,
    cfg: &PipelineConfig,
) -> Result<(Vec<Macro>, Vec<MacroCandidate>, AppReport), PipelineError> {
    let chain = ChainConfig { retry_cap: cfg.retry_cap };
    let mut report = AppReport { app_id: app.to_string(), traces: traces.len(), ..Default::default() };

    let extractions = traces
        .par_iter()
        .map(|t| extract_candidates(t, backend, &chain))
        .collect::<Result<Vec<_>, _>>()?;
    let mut candidates = Vec::new();
    for e in extractions {
        report.discovery.absorb(&e.stats);
        candidates.extend(e.candidates);
    }

    let before = candidates.len();
    candidates.retain(|c| dedup::filter_description(&c.description) == Verdict::Keep);
    report.dropped_description = before - candidates.len();

    let descriptions: Vec<String> = candidates.iter().map(|c| c.description.clone()).collect();
    let groups = dedup::group_by_similarity(&descriptions, &BagOfTokensEmbedder::default(), cfg.dedup_threshold);
    report.groups = groups.groups.len();
    let picked = dedup::sample_representatives(&groups, derive_seed(cfg.seed, &format!("sample/{app}")));
    let sampled: Vec<&MacroCandidate> = picked.iter().map(|&i| &candidates[i]).collect();

    let by_id: BTreeMap<&str, &Trace> = traces.iter().map(|t| (t.trace_id.as_str(), t)).collect();
    let completed = sampled
        .par_iter()
        .map(|c| {
            let screen = by_id
                .get(c.source.trace_id.as_str())
                .and_then(|t| t.screen(c.source.screen_index))
                .ok_or_else(|| PipelineError::MissingScreen {
                    trace_id: c.source.trace_id.clone(),
                    screen: c.source.screen_index,
                })?;
            Ok(complete_candidate(c, screen, backend, &chain)?)
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let mut kept = Vec::new();
    for (c, stats) in completed {
        report.completion.absorb(&stats);
        if let Some(c) = c {
            if dedup::filter_actions(&c) == Verdict::Keep {
                kept.push(c);
            } else {
                report.dropped_actions += 1;
            }
        }
    }

    let graph = build_graph(traces)?;
    let opt = optimize(&kept, &graph);
    report.dropped_optimize = opt.dropped;
    report.macros = opt.macros.len();
    report.reduction = reduction_stats(&kept, &opt.macros);
    Ok((opt.macros, kept, report))
}

fn slug(s: &str) -> String {
    let words = dedup::tokenize(s);
    let joined = words.join("-");
    if joined.is_empty() {
        "macro".to_string()
    } else {
        joined.chars().take(48).collect()
    }
}

/// Output file name for the `index`-th macro, stable across runs.
pub fn macro_file_name(index: usize, m: &Macro) -> String {
    format!("{}-{index:04}-{}.json", slug(&m.app_id), slug(&m.description))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_namespaced() {
        assert_eq!(derive_seed(1, "a"), derive_seed(1, "a"));
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let bad = PipelineConfig { dedup_threshold: 0.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(PipelineError::Threshold { .. })));
        let bad = PipelineConfig { match_threshold: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig { retry_cap: 0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(PipelineError::ZeroRetryCap)));
    }

    #[test]
    fn empty_input_is_an_error() {
        let b = crate::llm::ScriptedBackend::new();
        assert!(matches!(mine(&[], &b, &PipelineConfig::default()), Err(PipelineError::NoTraces)));
    }

    #[test]
    fn file_names() {
        let m = Macro { app_id: "com.cal".into(), description: "Create a reminder".into(), actions: vec![], parameters: vec![] };
        assert_eq!(macro_file_name(3, &m), "com-cal-0003-create-a-reminder.json");
    }
}
