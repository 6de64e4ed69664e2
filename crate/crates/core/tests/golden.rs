use std::collections::BTreeMap;

use macromine::fixtures::{self, REMINDER_HTML};
use macromine::html::to_html;
use macromine::llm::{prompt, GenerationBackend};
use macromine::pipeline::{mine, PipelineConfig};
use macromine::replay::{replay, replay_with_parameters, StepOutcome, DEFAULT_MATCH_THRESHOLD};
use macromine::sim::SimulatedDevice;

fn editor() -> macromine::html::HtmlScreen {
    to_html(&fixtures::reminder_edit())
}

#[test]
fn discovery_prompt_is_verbatim() {
    let expected = format!(
        "Below is a simplified HTML code of a mobile app:\n{REMINDER_HTML}\nWhat can a user do with the prompt?\nThe user can: -"
    );
    assert_eq!(prompt::discovery(&editor()), expected);
}

#[test]
fn grounding_prompt_is_verbatim() {
    let expected = format!(
        "Below is a simplified HTML code of a mobile app:\n{REMINDER_HTML}\n\
         Which element id(s) should the user click on next to accomplish the task Create a reminder?\n\
         Respond with only the number(s), or \"None\" if the user can already complete the task on the current page."
    );
    assert_eq!(prompt::grounding(&editor(), "Create a reminder"), expected);
}

#[test]
fn parameter_prompts_are_verbatim() {
    let expected = format!(
        "Below is a simplified HTML code of a mobile app:\n{REMINDER_HTML}\n\
         The user is trying to complete the task create a reminder.\n\
         Other than clicking on the element with id 1, list the additional information the user needs to enter in the format of (- (info)). \
         Answer \"None\" if no additional information is needed."
    );
    assert_eq!(prompt::parameters(&editor(), "create a reminder", &[1]), expected);
    let expected = format!(
        "Below is a simplified HTML code of a mobile app:\n{REMINDER_HTML}\n\
         Where can the user enter the title? Answer with only the element id, or \"None\" if no element matches."
    );
    assert_eq!(prompt::parameter_element(&editor(), "title"), expected);
}

#[test]
fn scripted_completions_match_the_reference_outputs() {
    let b = fixtures::reminder_script();
    let tasks = &b.generate(&prompt::discovery(&editor()), 8).unwrap()[0];
    assert_eq!(
        tasks,
        "create a reminder\n- edit the reminder title\n- set the reminder time\n- set the reminder date\n- choose whether the reminder repeats"
    );
    assert_eq!(b.generate(&prompt::grounding(&editor(), "create a reminder"), 8).unwrap(), vec!["1"]);
    assert_eq!(
        b.generate(&prompt::parameters(&editor(), "create a reminder", &[1]), 8).unwrap(),
        vec!["- (title)\n- (date)"]
    );
    assert_eq!(b.generate(&prompt::parameter_element(&editor(), "title"), 8).unwrap(), vec!["2"]);
}

#[test]
fn mining_the_reminder_trace_yields_the_optimized_macro() {
    let out = mine(&[fixtures::reminder_trace()], &fixtures::reminder_script(), &PipelineConfig::default()).unwrap();
    let reminders: Vec<_> = out
        .macros
        .iter()
        .filter(|m| m.description.eq_ignore_ascii_case("create a reminder"))
        .collect();
    assert_eq!(reminders.len(), 1);
    assert_eq!(*reminders[0], fixtures::expected_reminder_macro());
    let params: Vec<(&str, usize)> =
        reminders[0].parameters.iter().map(|p| (p.description.as_str(), p.element_id)).collect();
    assert_eq!(params, vec![("title", 2), ("date", 5)]);

    let report = &out.report;
    assert_eq!(report.apps.len(), 1);
    let app = &report.apps[0];
    // the onboarding tasks are generic and filtered
    assert_eq!(app.dropped_description, 4);
    assert_eq!(app.macros, fixtures::REMINDER_TASKS.len());
    let red = report.reduction.unwrap();
    assert_eq!(red.mean_pre, 9.0);
    assert_eq!(red.mean_post, 5.0);
}

#[test]
fn optimized_macro_replays_cleanly() {
    let app = fixtures::calendar_app();
    let m = fixtures::expected_reminder_macro();
    let mut device = SimulatedDevice::new(&app);
    let values: BTreeMap<String, String> =
        [("title".to_string(), "buy milk".to_string()), ("date".to_string(), "Mon".to_string())].into();
    let r = replay_with_parameters(&m, &mut device, DEFAULT_MATCH_THRESHOLD, &values);
    assert!(r.succeeded(), "{r:?}");
    assert_eq!(r.steps_executed, 5);
    assert!(r.skipped_steps().is_empty());
    assert!(r.parameters.iter().all(|p| p.entered));
    assert_eq!(device.inputs.len(), 2);
    assert_eq!(device.inputs[0], ("reminder_edit".into(), "title_edit".into(), "buy milk".into()));
    assert_eq!(device.state(), "main");
}

#[test]
fn replay_skips_removed_onboarding() {
    let app = fixtures::calendar_app_without_onboarding();
    let m = fixtures::expected_reminder_macro();
    let r = replay(&m, &mut SimulatedDevice::new(&app), DEFAULT_MATCH_THRESHOLD);
    assert!(r.succeeded(), "{r:?}");
    assert_eq!(r.skipped_steps(), vec![0, 1]);
    assert_eq!(r.steps_executed, 3);
    assert!(matches!(r.steps[2].outcome, StepOutcome::Executed { .. }));
}

#[test]
fn broken_final_element_gets_stuck() {
    let app = fixtures::calendar_app();
    let mut m = fixtures::expected_reminder_macro();
    fixtures::break_final_element(&mut m);
    let r = replay(&m, &mut SimulatedDevice::new(&app), DEFAULT_MATCH_THRESHOLD);
    assert!(!r.succeeded());
    assert_eq!(r.outcome, macromine::replay::ReplayOutcome::Failure("stuck at step 4".into()));
    assert_eq!(r.steps_executed, 4);
}
