use macromine::fixtures;
use macromine::html::to_html;
use macromine::llm::{
    complete_candidate, discover_tasks, extract_candidates, ground_action, prompt, BackendError, ChainConfig,
    ScriptedBackend, StepError,
};
use macromine::trace::Trace;

fn editor() -> macromine::html::HtmlScreen {
    to_html(&fixtures::reminder_edit())
}

#[test]
fn grounding_skips_out_of_range_and_malformed_answers() {
    let h = editor();
    let b = ScriptedBackend::new().with(&prompt::grounding(&h, "save it"), &["42", "the save button", "1, 9", "1"]);
    let g = ground_action(&h, "save it", &b, &ChainConfig::default()).unwrap();
    assert_eq!(g.element_ids, vec![1]);
    assert!(!g.is_terminal);
}

#[test]
fn grounding_gives_up_after_retry_cap() {
    let h = editor();
    let b = ScriptedBackend::new().with(&prompt::grounding(&h, "x"), &["99", "99", "1"]);
    let err = ground_action(&h, "x", &b, &ChainConfig { retry_cap: 2 }).unwrap_err();
    assert!(matches!(err, StepError::NoUsableCompletion { tried: 2, .. }));
    assert!(ground_action(&h, "x", &b, &ChainConfig { retry_cap: 3 }).is_ok());
}

#[test]
fn none_answers() {
    let h = editor();
    let b = ScriptedBackend::new()
        .with(&prompt::discovery(&h), &["None"])
        .with(&prompt::grounding(&h, "x"), &["None"]);
    assert!(discover_tasks(&h, &b, &ChainConfig::default()).unwrap().is_empty());
    assert!(ground_action(&h, "x", &b, &ChainConfig::default()).unwrap().is_terminal);
}

#[test]
fn unknown_prompts_surface_as_backend_errors() {
    let b = ScriptedBackend::new();
    let err = extract_candidates(&fixtures::reminder_trace(), &b, &ChainConfig::default()).unwrap_err();
    assert!(matches!(err, BackendError::UnknownPrompt { .. }));
}

#[test]
fn extraction_pairs_tasks_with_their_prefix() {
    let trace = fixtures::reminder_trace();
    let ex = extract_candidates(&trace, &fixtures::reminder_script(), &ChainConfig::default()).unwrap();
    // 9 screens, the three repeats of the first onboarding page are skipped
    assert_eq!(ex.stats.screens_total, 9);
    assert_eq!(ex.stats.screens_processed, 6);
    assert_eq!(ex.stats.discovery_failures, 0);
    let reminder: Vec<_> = ex.candidates.iter().filter(|c| c.source.screen_index == 8).collect();
    assert_eq!(reminder.len(), 5);
    assert!(reminder.iter().all(|c| c.trace_actions.len() == 8));
    assert_eq!(reminder[0].description, "create a reminder");
    assert_eq!(reminder[4].source.rank, 4);
    let onboarding: Vec<_> = ex.candidates.iter().filter(|c| c.source.screen_index == 0).collect();
    assert_eq!(onboarding.len(), 2);
    assert!(onboarding[0].trace_actions.is_empty());
    assert!(onboarding[0].target.is_none());
}

#[test]
fn completion_drops_unlocatable_parameters() {
    let trace: Trace = fixtures::reminder_trace();
    let h = editor();
    let b = ScriptedBackend::new()
        .with(&prompt::discovery(&h), &["send a note"])
        .with(&prompt::grounding(&h, "send a note"), &["1"])
        .with(&prompt::parameters(&h, "send a note", &[1]), &["- (title)\n- (colour)"])
        .with(&prompt::parameter_element(&h, "title"), &["2"])
        .with(&prompt::parameter_element(&h, "colour"), &["None"]);
    let screen = trace.final_screen.as_ref().unwrap();
    let cand = macromine::macros::MacroCandidate {
        description: "send a note".into(),
        trace_actions: vec![],
        predicted_final_action: None,
        parameters: vec![],
        source: macromine::macros::CandidateSource { trace_id: trace.trace_id.clone(), screen_index: 8, rank: 0 },
        target: None,
    };
    let (done, stats) = complete_candidate(&cand, screen, &b, &ChainConfig::default()).unwrap();
    let done = done.unwrap();
    assert_eq!(done.parameters.len(), 1);
    assert_eq!(done.parameters[0].element_id, 2);
    assert_eq!(stats.parameters_found, 1);
    assert_eq!(stats.parameters_dropped, 1);
    assert_eq!(done.predicted_final_action.unwrap().element.unwrap().text, "Save");
}

#[test]
fn grounding_failure_yields_no_candidate() {
    let trace = fixtures::reminder_trace();
    let h = editor();
    let b = ScriptedBackend::new().with(&prompt::grounding(&h, "x"), &["100", "not a number"]);
    let cand = macromine::macros::MacroCandidate {
        description: "x".into(),
        trace_actions: vec![],
        predicted_final_action: None,
        parameters: vec![],
        source: macromine::macros::CandidateSource { trace_id: trace.trace_id.clone(), screen_index: 8, rank: 0 },
        target: None,
    };
    let (done, stats) = complete_candidate(&cand, trace.final_screen.as_ref().unwrap(), &b, &ChainConfig::default()).unwrap();
    assert!(done.is_none());
    assert_eq!(stats.grounding_failures, 1);
}
