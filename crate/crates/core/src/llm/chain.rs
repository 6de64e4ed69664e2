//! The extraction chain: task discovery, action grounding and parameter finding.
//!
//! Every step asks the backend for up to `retry_cap` ranked completions and
//! takes the first one that parses and only references ids present on the
//! screen.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::backend::{BackendError, GenerationBackend};
use super::{parse, prompt};
use crate::graph::last_target_node;
use crate::html::{to_html, HtmlScreen};
use crate::macros::{CandidateSource, MacroAction, MacroCandidate, Parameter};
use crate::trace::{Screen, Trace};

pub const DEFAULT_RETRY_CAP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Ranked completions requested per call.
    pub retry_cap: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { retry_cap: DEFAULT_RETRY_CAP }
    }
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{step}: no usable completion among {tried} candidates")]
    NoUsableCompletion { step: &'static str, tried: usize },
}

/// Outcome of action grounding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingResult {
    pub element_ids: Vec<usize>,
    /// The task can already be completed on the current screen.
    pub is_terminal: bool,
}

fn first_usable<T>(
    backend: &dyn GenerationBackend,
    prompt: &str,
    cfg: &ChainConfig,
    step: &'static str,
    mut accept: impl FnMut(&str) -> Option<T>,
) -> Result<T, StepError> {
    let completions = backend.generate(prompt, cfg.retry_cap)?;
    if completions.is_empty() {
        return Err(BackendError::Empty.into());
    }
    let tried = completions.len().min(cfg.retry_cap.max(1));
    completions
        .iter()
        .take(tried)
        .find_map(|c| accept(c))
        .ok_or(StepError::NoUsableCompletion { step, tried })
}

/// Candidate task descriptions for a screen.
pub fn discover_tasks(
    screen: &HtmlScreen,
    backend: &dyn GenerationBackend,
    cfg: &ChainConfig,
) -> Result<Vec<String>, StepError> {
    first_usable(backend, &prompt::discovery(screen), cfg, "task discovery", parse::task_list)
}

/// Element ids that complete `description` on this screen.
pub fn ground_action(
    screen: &HtmlScreen,
    description: &str,
    backend: &dyn GenerationBackend,
    cfg: &ChainConfig,
) -> Result<GroundingResult, StepError> {
    first_usable(
        backend,
        &prompt::grounding(screen, description),
        cfg,
        "action grounding",
        |c| match parse::grounding(c)? {
            parse::GroundingAnswer::Terminal => Some(GroundingResult { element_ids: Vec::new(), is_terminal: true }),
            parse::GroundingAnswer::Ids(ids) => ids
                .iter()
                .all(|&id| screen.contains(id))
                .then_some(GroundingResult { element_ids: ids, is_terminal: false }),
        },
    )
}

/// Parameter descriptions. `None` means no completion parsed; callers treat
/// that as "no parameters".
pub fn find_parameters(
    screen: &HtmlScreen,
    description: &str,
    grounded_ids: &[usize],
    backend: &dyn GenerationBackend,
    cfg: &ChainConfig,
) -> Result<Option<Vec<String>>, BackendError> {
    match first_usable(
        backend,
        &prompt::parameters(screen, description, grounded_ids),
        cfg,
        "parameter finding",
        parse::parameter_list,
    ) {
        Ok(items) => Ok(Some(items)),
        Err(StepError::NoUsableCompletion { .. }) => Ok(None),
        Err(StepError::Backend(e)) => Err(e),
    }
}

/// Element id where `parameter` is entered, if any.
pub fn locate_parameter_element(
    screen: &HtmlScreen,
    parameter: &str,
    backend: &dyn GenerationBackend,
    cfg: &ChainConfig,
) -> Result<Option<usize>, BackendError> {
    match first_usable(
        backend,
        &prompt::parameter_element(screen, parameter),
        cfg,
        "parameter element",
        |c| match parse::single_id(c)? {
            None => Some(None),
            Some(id) => screen.contains(id).then_some(Some(id)),
        },
    ) {
        Ok(id) => Ok(id),
        Err(StepError::NoUsableCompletion { .. }) => Ok(None),
        Err(StepError::Backend(e)) => Err(e),
    }
}

/// Counters for discovery over one or more traces.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryStats {
    pub screens_total: usize,
    pub screens_processed: usize,
    pub discovery_failures: usize,
    pub candidates_discovered: usize,
}

impl DiscoveryStats {
    pub fn absorb(&mut self, o: &DiscoveryStats) {
        self.screens_total += o.screens_total;
        self.screens_processed += o.screens_processed;
        self.discovery_failures += o.discovery_failures;
        self.candidates_discovered += o.candidates_discovered;
    }
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub candidates: Vec<MacroCandidate>,
    pub stats: DiscoveryStats,
}

/// Runs task discovery on every distinct screen of `trace` and pairs each
/// description with the trace prefix that reached the screen.
///
/// A screen whose HTML equals the previous screen's is skipped; its tasks
/// were already attributed to the earlier, shorter prefix.
pub fn extract_candidates(
    trace: &Trace,
    backend: &dyn GenerationBackend,
    cfg: &ChainConfig,
) -> Result<Extraction, BackendError> {
    let screens: Vec<(usize, &Screen)> = trace.screens().enumerate().collect();
    let mut unique: Vec<(usize, &Screen, HtmlScreen)> = Vec::new();
    let mut last_html: Option<String> = None;
    for (pos, screen) in &screens {
        let html = to_html(screen);
        if last_html.as_deref() == Some(html.html.as_str()) {
            continue;
        }
        last_html = Some(html.html.clone());
        if !html.is_empty() {
            unique.push((*pos, screen, html));
        }
    }

    let discovered: Vec<Result<Vec<String>, StepError>> = unique
        .par_iter()
        .map(|(_, _, html)| discover_tasks(html, backend, cfg))
        .collect();

    let mut out = Extraction {
        stats: DiscoveryStats {
            screens_total: screens.len(),
            screens_processed: unique.len(),
            ..Default::default()
        },
        ..Default::default()
    };
    for ((pos, screen, _), result) in unique.iter().zip(discovered) {
        let tasks = match result {
            Ok(t) => t,
            Err(StepError::NoUsableCompletion { .. }) => {
                out.stats.discovery_failures += 1;
                continue;
            }
            Err(StepError::Backend(e)) => return Err(e),
        };
        // steps before this screen
        let prefix: Vec<MacroAction> = (0..*pos)
            .map(|i| MacroAction::from_trace_step(trace, i).expect("validated trace step"))
            .collect();
        let target = last_target_node(trace, *pos);
        for (rank, description) in tasks.into_iter().enumerate() {
            out.candidates.push(MacroCandidate {
                description,
                trace_actions: prefix.clone(),
                predicted_final_action: None,
                parameters: Vec::new(),
                source: CandidateSource {
                    trace_id: trace.trace_id.clone(),
                    screen_index: screen.index,
                    rank,
                },
                target: target.clone(),
            });
        }
    }
    out.stats.candidates_discovered = out.candidates.len();
    Ok(out)
}

/// Counters for grounding and parameter finding.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionStats {
    pub attempted: usize,
    pub grounding_failures: usize,
    pub terminal: usize,
    pub parameter_parse_failures: usize,
    pub parameters_found: usize,
    pub parameters_dropped: usize,
}

impl CompletionStats {
    pub fn absorb(&mut self, o: &CompletionStats) {
        self.attempted += o.attempted;
        self.grounding_failures += o.grounding_failures;
        self.terminal += o.terminal;
        self.parameter_parse_failures += o.parameter_parse_failures;
        self.parameters_found += o.parameters_found;
        self.parameters_dropped += o.parameters_dropped;
    }
}

/// Grounds the final action of `candidate` on its source screen and finds
/// its parameters. Returns `None` when grounding yields no usable answer.
pub fn complete_candidate(
    candidate: &MacroCandidate,
    screen: &Screen,
    backend: &dyn GenerationBackend,
    cfg: &ChainConfig,
) -> Result<(Option<MacroCandidate>, CompletionStats), BackendError> {
    let mut stats = CompletionStats { attempted: 1, ..Default::default() };
    let html = to_html(screen);
    let grounding = match ground_action(&html, &candidate.description, backend, cfg) {
        Ok(g) => g,
        Err(StepError::NoUsableCompletion { .. }) => {
            stats.grounding_failures += 1;
            return Ok((None, stats));
        }
        Err(StepError::Backend(e)) => return Err(e),
    };
    let mut done = candidate.clone();
    if grounding.is_terminal {
        stats.terminal += 1;
        return Ok((Some(done), stats));
    }
    let first = grounding.element_ids[0];
    let path = html.path(first).expect("grounded ids are validated");
    let element = screen.element(path).expect("index map paths resolve");
    done.predicted_final_action = Some(MacroAction::click(element.descriptor(), Some(screen.index)));

    let params = match find_parameters(&html, &candidate.description, &grounding.element_ids, backend, cfg)? {
        Some(p) => p,
        None => {
            stats.parameter_parse_failures += 1;
            Vec::new()
        }
    };
    for description in params {
        match locate_parameter_element(&html, &description, backend, cfg)? {
            Some(id) => {
                let el = screen
                    .element(html.path(id).expect("validated id"))
                    .expect("index map paths resolve");
                done.parameters.push(Parameter {
                    description,
                    element: el.descriptor(),
                    element_id: id,
                });
                stats.parameters_found += 1;
            }
            None => stats.parameters_dropped += 1,
        }
    }
    Ok((Some(done), stats))
}
