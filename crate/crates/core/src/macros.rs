//! Macro candidates and final macros.

use serde::{Deserialize, Serialize};

use crate::graph::NodeId;
use crate::trace::{ActionKind, ElementDescriptor, Trace};

/// A screen-independent action: the target is described by identity
/// attributes rather than a path, so it can be replayed on a different
/// rendering of the same screen.
///
/// Field order matters: the derived ordering is used to pick a canonical
/// sample action when graph nodes merge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MacroAction {
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<ElementDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scroll_amount: Option<i32>,
    /// Index of the trace screen the action was observed on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_screen: Option<usize>,
}

impl MacroAction {
    /// Converts the action of trace step `step`.
    pub fn from_trace_step(trace: &Trace, step: usize) -> Option<Self> {
        let s = trace.steps.get(step)?;
        let element = match &s.action.target {
            Some(path) => Some(s.screen.element(path)?.descriptor()),
            None => None,
        };
        Some(Self {
            kind: s.action.kind,
            element,
            input_text: s.action.input_text.clone(),
            scroll_amount: s.action.scroll_amount,
            source_screen: Some(s.screen.index),
        })
    }

    pub fn click(element: ElementDescriptor, source_screen: Option<usize>) -> Self {
        Self {
            kind: ActionKind::Click,
            element: Some(element),
            input_text: None,
            scroll_amount: None,
            source_screen,
        }
    }
}

/// Extra information a macro needs from the user, bound to the element on
/// the macro's final screen where it is entered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub description: String,
    pub element: ElementDescriptor,
    /// Id of the element in the serialized final screen.
    pub element_id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CandidateSource {
    pub trace_id: String,
    pub screen_index: usize,
    /// Position of the description in the discovery response.
    pub rank: usize,
}

/// A described task paired with the raw trace prefix that reached its screen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacroCandidate {
    pub description: String,
    pub trace_actions: Vec<MacroAction>,
    pub predicted_final_action: Option<MacroAction>,
    pub parameters: Vec<Parameter>,
    pub source: CandidateSource,
    /// Graph node of the last trace action that targets an element.
    pub target: Option<NodeId>,
}

impl MacroCandidate {
    /// Action count before path optimization, including the predicted final action.
    pub fn action_count(&self) -> usize {
        self.trace_actions.len() + usize::from(self.predicted_final_action.is_some())
    }

    /// Every action the candidate would perform, in order.
    pub fn all_actions(&self) -> impl Iterator<Item = &MacroAction> {
        self.trace_actions.iter().chain(self.predicted_final_action.iter())
    }
}

/// A mined, executable macro.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Macro {
    pub app_id: String,
    pub description: String,
    pub actions: Vec<MacroAction>,
    pub parameters: Vec<Parameter>,
}

impl Macro {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("macro serialization is infallible")
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }
}
