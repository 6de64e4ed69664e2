//! Macro replay with fuzzy element matching.
//!
//! Each step's stored element is matched against the live screen by Jaccard
//! similarity of text-attribute tokens. When a step cannot be matched, later
//! steps are tried in order and the replay jumps to the first one that
//! matches, so screens that were skipped or removed (onboarding, dialogs)
//! do not break the macro.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::macros::{Macro, MacroAction};
use crate::trace::{Action, ActionKind, Element, ElementDescriptor, ElementPath, Screen};

pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceError {
    #[error("the app has exited")]
    Exited,
    #[error("no element at {0}")]
    NoSuchElement(ElementPath),
    #[error("device failure: {0}")]
    Other(String),
}

/// A device (real or simulated) that macros are executed on.
pub trait DeviceBackend {
    /// Relaunches the app and returns its landing screen.
    fn reset(&mut self) -> Result<Screen, DeviceError>;
    fn current_screen(&self) -> Result<Screen, DeviceError>;
    /// Performs an action addressed to an element of the current screen.
    fn perform(&mut self, action: &Action) -> Result<(), DeviceError>;
}

/// |a ∩ b| / |a ∪ b|, with two empty sets counting as identical.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

fn push_tokens(out: &mut BTreeSet<String>, s: &str) {
    out.extend(
        s.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase),
    );
}

/// Tokens of the identity attributes. Package prefixes of resource ids
/// (`pkg:id/`) and of class names (`android.widget.`) are dropped.
pub fn descriptor_tokens(d: &ElementDescriptor) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    push_tokens(&mut out, d.resource_id.rsplit('/').next().unwrap_or(""));
    push_tokens(&mut out, &d.text);
    push_tokens(&mut out, &d.content_description);
    push_tokens(&mut out, d.class_name.rsplit('.').next().unwrap_or(""));
    out
}

pub fn element_tokens(element: &Element) -> BTreeSet<String> {
    descriptor_tokens(&element.descriptor())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementMatch {
    pub path: ElementPath,
    pub similarity: f64,
}

/// Most similar visible element at or above `threshold`; ties go to the
/// earliest element in pre-order.
pub fn match_element(screen: &Screen, target: &ElementDescriptor, threshold: f64) -> Option<ElementMatch> {
    let wanted = descriptor_tokens(target);
    let mut best: Option<ElementMatch> = None;
    for (path, el) in screen.visible_elements() {
        let sim = jaccard(&element_tokens(el), &wanted);
        if sim >= threshold && best.as_ref().is_none_or(|b| sim > b.similarity) {
            best = Some(ElementMatch { path, similarity: sim });
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepOutcome {
    Executed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matched: Option<ElementMatch>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matched_element: Option<ElementDescriptor>,
    },
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub intended: MacroAction,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub description: String,
    pub entered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", content = "reason", rename_all = "snake_case")]
pub enum ReplayOutcome {
    Success,
    Failure(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub description: String,
    pub total_steps: usize,
    pub steps: Vec<StepRecord>,
    pub parameters: Vec<ParameterEntry>,
    pub steps_executed: usize,
    pub outcome: ReplayOutcome,
}

impl ReplayReport {
    pub fn succeeded(&self) -> bool {
        self.outcome == ReplayOutcome::Success
    }

    pub fn skipped_steps(&self) -> Vec<usize> {
        self.steps
            .iter()
            .filter(|s| s.outcome == StepOutcome::Skipped)
            .map(|s| s.step)
            .collect()
    }

    /// Steps neither executed nor skipped.
    pub fn remaining_steps(&self) -> usize {
        self.total_steps - self.steps.len()
    }
}

fn device_action(step: &MacroAction, path: Option<ElementPath>) -> Action {
    Action {
        kind: step.kind,
        target: path,
        input_text: step.input_text.clone(),
        scroll_amount: step.scroll_amount,
    }
}

/// Matches step `i` on `screen`. Steps without an element always match.
fn match_step(screen: &Screen, step: &MacroAction, threshold: f64) -> Option<Option<ElementMatch>> {
    match &step.element {
        None => Some(None),
        Some(d) => match_element(screen, d, threshold).map(Some),
    }
}

pub fn replay(macro_: &Macro, device: &mut dyn DeviceBackend, threshold: f64) -> ReplayReport {
    replay_with_parameters(macro_, device, threshold, &BTreeMap::new())
}

/// Replays `macro_` from the landing screen. Parameter values keyed by
/// parameter description are typed into their elements right before the
/// final step.
pub fn replay_with_parameters(
    macro_: &Macro,
    device: &mut dyn DeviceBackend,
    threshold: f64,
    parameter_values: &BTreeMap<String, String>,
) -> ReplayReport {
    let n = macro_.actions.len();
    let mut report = ReplayReport {
        description: macro_.description.clone(),
        total_steps: n,
        steps: Vec::new(),
        parameters: Vec::new(),
        steps_executed: 0,
        outcome: ReplayOutcome::Failure("not started".into()),
    };
    if let Err(e) = device.reset() {
        report.outcome = ReplayOutcome::Failure(e.to_string());
        return report;
    }
    let mut params_entered = false;
    let mut i = 0;
    while i < n {
        let screen = match device.current_screen() {
            Ok(s) => s,
            Err(e) => {
                report.outcome = ReplayOutcome::Failure(format!("step {i}: {e}"));
                return report;
            }
        };
        let found = (i..n).find_map(|j| match_step(&screen, &macro_.actions[j], threshold).map(|m| (j, m)));
        let Some((j, matched)) = found else {
            report.outcome = ReplayOutcome::Failure(format!("stuck at step {i}"));
            return report;
        };
        for k in i..j {
            report.steps.push(StepRecord {
                step: k,
                intended: macro_.actions[k].clone(),
                outcome: StepOutcome::Skipped,
            });
        }
        if j == n - 1 && !params_entered && !macro_.parameters.is_empty() {
            params_entered = true;
            if let Err(e) = enter_parameters(macro_, device, &screen, threshold, parameter_values, &mut report) {
                report.outcome = ReplayOutcome::Failure(format!("parameter entry: {e}"));
                return report;
            }
        }
        let step = &macro_.actions[j];
        let path = matched.as_ref().map(|m| m.path.clone());
        let matched_element = path.as_ref().and_then(|p| screen.element(p)).map(Element::descriptor);
        if let Err(e) = device.perform(&device_action(step, path)) {
            report.outcome = ReplayOutcome::Failure(format!("step {j}: {e}"));
            return report;
        }
        report.steps.push(StepRecord {
            step: j,
            intended: step.clone(),
            outcome: StepOutcome::Executed { matched, matched_element },
        });
        report.steps_executed += 1;
        i = j + 1;
    }
    report.outcome = if n > 0 {
        ReplayOutcome::Success
    } else {
        ReplayOutcome::Failure("macro has no actions".into())
    };
    report
}

fn enter_parameters(
    macro_: &Macro,
    device: &mut dyn DeviceBackend,
    screen: &Screen,
    threshold: f64,
    values: &BTreeMap<String, String>,
    report: &mut ReplayReport,
) -> Result<(), DeviceError> {
    for p in &macro_.parameters {
        let Some(value) = values.get(&p.description) else {
            report.parameters.push(ParameterEntry { description: p.description.clone(), entered: false });
            continue;
        };
        let entered = match match_element(screen, &p.element, threshold) {
            Some(m) => {
                device.perform(&Action {
                    kind: ActionKind::Input,
                    target: Some(m.path),
                    input_text: Some(value.clone()),
                    scroll_amount: None,
                })?;
                true
            }
            None => false,
        };
        report.parameters.push(ParameterEntry { description: p.description.clone(), entered });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    /// Fraction of macros replayed successfully; absent for an empty batch.
    pub success_rate: Option<f64>,
    pub reports: Vec<ReplayReport>,
}

/// Replays each macro on a fresh device from `make_device`.
pub fn batch_replay<D, F>(macros: &[Macro], make_device: F, threshold: f64) -> BatchReport
where
    D: DeviceBackend,
    F: Fn(&Macro) -> D + Sync,
{
    let reports: Vec<ReplayReport> = macros
        .par_iter()
        .map(|m| {
            let mut device = make_device(m);
            replay(m, &mut device, threshold)
        })
        .collect();
    let success_rate = if reports.is_empty() {
        None
    } else {
        Some(reports.iter().filter(|r| r.succeeded()).count() as f64 / reports.len() as f64)
    };
    BatchReport { success_rate, reports }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Bounds;

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn jaccard_values() {
        assert_eq!(jaccard(&set(&["a", "b"]), &set(&["a", "b"])), 1.0);
        assert_eq!(jaccard(&set(&["a"]), &set(&["b"])), 0.0);
        assert_eq!(jaccard(&set(&["save", "button", "top"]), &set(&["save", "button", "bottom"])), 0.5);
        assert_eq!(jaccard(&set(&[]), &set(&[])), 1.0);
        assert_eq!(jaccard(&set(&["a"]), &set(&[])), 0.0);
    }

    #[test]
    fn tokens_from_attributes() {
        let el = Element::new("ImageButton", Bounds::default())
            .with_resource_id("fab_create")
            .with_content_description("Create new event");
        assert_eq!(element_tokens(&el), set(&["fab", "create", "new", "event", "imagebutton"]));
        assert!(element_tokens(&Element::default()).is_empty());
        let save = Element { text: "Save".into(), ..Default::default() };
        assert_eq!(element_tokens(&save), set(&["save"]));
        let pkg = Element::new("android.widget.Button", Bounds::default()).with_resource_id("com.app:id/ok_button");
        assert_eq!(element_tokens(&pkg), set(&["ok", "button"]));
    }

    fn screen_with(children: Vec<Element>) -> Screen {
        Screen::new(0, 1080, 1920, Element::new("FrameLayout", Bounds::new(0, 0, 1080, 1920)).with_children(children))
    }

    #[test]
    fn exact_match_scores_one() {
        let save = Element::new("Button", Bounds::new(0, 0, 10, 10)).with_resource_id("save").with_text("Save");
        let s = screen_with(vec![save.clone()]);
        let m = match_element(&s, &save.descriptor(), 0.5).unwrap();
        assert_eq!(m.path, ElementPath(vec![0]));
        assert_eq!(m.similarity, 1.0);
    }

    #[test]
    fn renamed_element_still_matches() {
        let stored = Element::new("Button", Bounds::default()).with_resource_id("save_button").with_text("Save");
        let live = Element::new("Button", Bounds::new(0, 0, 10, 10))
            .with_resource_id("save_button")
            .with_text("Save changes");
        let s = screen_with(vec![live]);
        // {save, button} vs {save, button, changes}
        let m = match_element(&s, &stored.descriptor(), 0.5).unwrap();
        assert!((m.similarity - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn below_threshold_is_absent() {
        let s = screen_with(vec![Element::new("Button", Bounds::new(0, 0, 10, 10)).with_text("Open")]);
        let d = ElementDescriptor { text: "Close".into(), class_name: "Switch".into(), ..Default::default() };
        assert!(match_element(&s, &d, 0.5).is_none());
    }

    #[test]
    fn hidden_elements_are_ignored() {
        let hidden = Element::new("Button", Bounds::new(0, 0, 10, 10)).with_text("Save").hidden();
        let s = screen_with(vec![hidden.clone()]);
        assert!(match_element(&s, &hidden.descriptor(), 0.5).is_none());
    }
}
