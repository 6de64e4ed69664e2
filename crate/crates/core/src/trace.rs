//! Traces, screens and view-hierarchy elements.
//!
//! A [`Trace`] is the chronological record of one app session: each step pairs
//! the screen the user (or crawler) saw with the action performed on it. Traces
//! are read from and written to JSON documents through [`TraceRecord`], which
//! keeps the on-disk shape separate from the validated in-memory form.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while ingesting or validating a trace document.
#[derive(Debug, Error)]
pub enum TraceError {
    #[error("malformed trace document: {0}")]
    Malformed(String),
    #[error("step {step}: action target {path} does not resolve to an element")]
    DanglingTarget { step: usize, path: ElementPath },
    #[error("step {step}: {kind} action requires a target element")]
    MissingTarget { step: usize, kind: ActionKind },
    #[error("step {step}: input action requires input_text")]
    MissingInputText { step: usize },
    #[error("screen indices must be strictly increasing (saw {prev} then {next})")]
    NonMonotonicIndex { prev: usize, next: usize },
    #[error("screen {index}: width and height must be positive")]
    EmptyScreen { index: usize },
    #[error("screen {index}: element {path} has inverted bounds")]
    InvalidBounds { index: usize, path: ElementPath },
}

/// Axis-aligned rectangle in screen pixels, serialized as `[left, top, right, bottom]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "[i32; 4]", into = "[i32; 4]")]
pub struct Bounds {
    pub left: i32,
    pub top: i32,
    pub right: i32,
    pub bottom: i32,
}

impl Bounds {
    pub const fn new(left: i32, top: i32, right: i32, bottom: i32) -> Self {
        Self { left, top, right, bottom }
    }

    pub fn is_well_formed(&self) -> bool {
        self.left <= self.right && self.top <= self.bottom
    }

    /// Center point, rounded toward the top-left.
    pub fn center(&self) -> (i32, i32) {
        (
            (self.left + self.right).div_euclid(2),
            (self.top + self.bottom).div_euclid(2),
        )
    }
}

impl From<[i32; 4]> for Bounds {
    fn from(v: [i32; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Bounds> for [i32; 4] {
    fn from(b: Bounds) -> Self {
        [b.left, b.top, b.right, b.bottom]
    }
}

fn default_true() -> bool {
    true
}

/// One node of a screen's view hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Element {
    #[serde(default)]
    pub resource_id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub content_description: String,
    #[serde(default)]
    pub class_name: String,
    #[serde(default)]
    pub semantic_class: String,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default)]
    pub clickable: bool,
    #[serde(default = "default_true")]
    pub visible: bool,
    #[serde(default)]
    pub children: Vec<Element>,
}

impl Element {
    pub fn new(class_name: impl Into<String>, bounds: Bounds) -> Self {
        Self {
            class_name: class_name.into(),
            bounds,
            visible: true,
            ..Default::default()
        }
    }

    pub fn with_resource_id(mut self, id: impl Into<String>) -> Self {
        self.resource_id = id.into();
        self
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = text.into();
        self
    }

    pub fn with_content_description(mut self, cd: impl Into<String>) -> Self {
        self.content_description = cd.into();
        self
    }

    pub fn with_semantic_class(mut self, class: impl Into<String>) -> Self {
        self.semantic_class = class.into();
        self
    }

    pub fn clickable(mut self) -> Self {
        self.clickable = true;
        self
    }

    pub fn hidden(mut self) -> Self {
        self.visible = false;
        self
    }

    pub fn with_children(mut self, children: Vec<Element>) -> Self {
        self.children = children;
        self
    }

    pub fn has_label(&self) -> bool {
        !self.text.is_empty() || !self.content_description.is_empty()
    }

    /// Key used by simulated apps to address this element: the resource id,
    /// else the text, else the content description.
    pub fn key(&self) -> &str {
        if !self.resource_id.is_empty() {
            &self.resource_id
        } else if !self.text.is_empty() {
            &self.text
        } else {
            &self.content_description
        }
    }

    pub fn descriptor(&self) -> ElementDescriptor {
        ElementDescriptor {
            resource_id: self.resource_id.clone(),
            text: self.text.clone(),
            content_description: self.content_description.clone(),
            class_name: self.class_name.clone(),
        }
    }

    /// Resolves a child path relative to this element.
    pub fn at(&self, path: &ElementPath) -> Option<&Element> {
        let mut node = self;
        for &i in path.as_slice() {
            node = node.children.get(i)?;
        }
        Some(node)
    }

    /// Depth-first pre-order walk yielding every element with its path.
    pub fn walk(&self) -> Vec<(ElementPath, &Element)> {
        let mut out = Vec::new();
        let mut stack = vec![(ElementPath::root(), self)];
        while let Some((path, el)) = stack.pop() {
            for (i, child) in el.children.iter().enumerate().rev() {
                stack.push((path.child(i), child));
            }
            out.push((path, el));
        }
        out
    }
}

/// Identity attributes of an element, detached from any particular screen.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct ElementDescriptor {
    #[serde(default)]
    pub resource_id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub content_description: String,
    #[serde(default)]
    pub class_name: String,
}

/// Path from a screen's root to an element: child indices, outermost first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementPath(pub Vec<usize>);

impl ElementPath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn child(&self, index: usize) -> Self {
        let mut v = self.0.clone();
        v.push(index);
        Self(v)
    }

    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(Self(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for ElementPath {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl fmt::Display for ElementPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Click,
    Scroll,
    Input,
    System,
}

impl ActionKind {
    pub fn needs_target(self) -> bool {
        !matches!(self, ActionKind::System)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ActionKind::Click => "click",
            ActionKind::Scroll => "scroll",
            ActionKind::Input => "input",
            ActionKind::System => "system",
        };
        f.write_str(s)
    }
}

/// An action on a concrete screen, addressing its target by element path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    #[serde(rename = "target_path", default, skip_serializing_if = "Option::is_none")]
    pub target: Option<ElementPath>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scroll_amount: Option<i32>,
}

impl Action {
    pub fn click(path: impl Into<ElementPath>) -> Self {
        Self {
            kind: ActionKind::Click,
            target: Some(path.into()),
            input_text: None,
            scroll_amount: None,
        }
    }

    pub fn scroll(path: impl Into<ElementPath>, amount: i32) -> Self {
        Self {
            kind: ActionKind::Scroll,
            target: Some(path.into()),
            input_text: None,
            scroll_amount: Some(amount),
        }
    }

    pub fn input(path: impl Into<ElementPath>, text: impl Into<String>) -> Self {
        Self {
            kind: ActionKind::Input,
            target: Some(path.into()),
            input_text: Some(text.into()),
            scroll_amount: None,
        }
    }

    pub fn system() -> Self {
        Self {
            kind: ActionKind::System,
            target: None,
            input_text: None,
            scroll_amount: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screen {
    #[serde(default)]
    pub index: usize,
    pub width: u32,
    pub height: u32,
    pub root: Element,
}

impl Screen {
    pub fn new(index: usize, width: u32, height: u32, root: Element) -> Self {
        Self { index, width, height, root }
    }

    pub fn element(&self, path: &ElementPath) -> Option<&Element> {
        self.root.at(path)
    }

    /// Pre-order list of elements that are visible along with all ancestors.
    pub fn visible_elements(&self) -> Vec<(ElementPath, &Element)> {
        let mut out = Vec::new();
        collect_visible(&self.root, ElementPath::root(), &mut out);
        out
    }

    /// Visible, clickable elements in pre-order.
    pub fn actionable_elements(&self) -> Vec<(ElementPath, &Element)> {
        self.visible_elements()
            .into_iter()
            .filter(|(_, e)| e.clickable)
            .collect()
    }

    /// Default scroll distance: half the screen height.
    pub fn default_scroll_amount(&self) -> i32 {
        (self.height / 2) as i32
    }

    fn validate(&self) -> Result<(), TraceError> {
        if self.width == 0 || self.height == 0 {
            return Err(TraceError::EmptyScreen { index: self.index });
        }
        for (path, el) in self.root.walk() {
            if !el.bounds.is_well_formed() {
                return Err(TraceError::InvalidBounds { index: self.index, path });
            }
        }
        Ok(())
    }
}

fn collect_visible<'a>(el: &'a Element, path: ElementPath, out: &mut Vec<(ElementPath, &'a Element)>) {
    if !el.visible {
        return;
    }
    out.push((path.clone(), el));
    for (i, child) in el.children.iter().enumerate() {
        collect_visible(child, path.child(i), out);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub screen: Screen,
    pub action: Action,
}

/// A validated interaction trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub trace_id: String,
    pub app_id: String,
    pub steps: Vec<Step>,
    pub final_screen: Option<Screen>,
}

impl Trace {
    /// All screens in order, including the trailing final screen.
    pub fn screens(&self) -> impl Iterator<Item = &Screen> {
        self.steps.iter().map(|s| &s.screen).chain(self.final_screen.iter())
    }

    /// Screen with the given trace index.
    pub fn screen(&self, index: usize) -> Option<&Screen> {
        self.screens().find(|s| s.index == index)
    }

    /// Element targeted by the action of step `step`, if any.
    pub fn action_element(&self, step: usize) -> Option<(&Screen, &ElementPath, &Element)> {
        let s = self.steps.get(step)?;
        let path = s.action.target.as_ref()?;
        let el = s.screen.element(path)?;
        Some((&s.screen, path, el))
    }
}

/// On-disk screen shape. `index` is optional and defaults to the position in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub width: u32,
    pub height: u32,
    pub root: Element,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub screen: ScreenRecord,
    pub action: Action,
}

/// On-disk trace document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub trace_id: String,
    pub app_id: String,
    pub steps: Vec<StepRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_screen: Option<ScreenRecord>,
}

impl From<&Screen> for ScreenRecord {
    fn from(s: &Screen) -> Self {
        Self {
            index: Some(s.index),
            width: s.width,
            height: s.height,
            root: s.root.clone(),
        }
    }
}

impl ScreenRecord {
    pub fn into_screen(self, default_index: usize) -> Screen {
        Screen {
            index: self.index.unwrap_or(default_index),
            width: self.width,
            height: self.height,
            root: self.root,
        }
    }
}

/// Validates a trace document and resolves every action target.
///
/// Scroll actions without an explicit amount get the screen's default
/// (half its height).
pub fn parse_trace(record: TraceRecord) -> Result<Trace, TraceError> {
    if record.app_id.is_empty() {
        return Err(TraceError::Malformed("app_id is empty".into()));
    }
    let mut steps = Vec::with_capacity(record.steps.len());
    let mut prev: Option<usize> = None;
    for (i, step) in record.steps.into_iter().enumerate() {
        let screen = step.screen.into_screen(i);
        check_order(&mut prev, screen.index)?;
        screen.validate()?;
        let mut action = step.action;
        validate_action(i, &screen, &mut action)?;
        steps.push(Step { screen, action });
    }
    let final_screen = match record.final_screen {
        Some(rec) => {
            let screen = rec.into_screen(steps.len());
            check_order(&mut prev, screen.index)?;
            screen.validate()?;
            Some(screen)
        }
        None => None,
    };
    Ok(Trace {
        trace_id: record.trace_id,
        app_id: record.app_id,
        steps,
        final_screen,
    })
}

fn check_order(prev: &mut Option<usize>, next: usize) -> Result<(), TraceError> {
    if let Some(p) = *prev {
        if next <= p {
            return Err(TraceError::NonMonotonicIndex { prev: p, next });
        }
    }
    *prev = Some(next);
    Ok(())
}

fn validate_action(step: usize, screen: &Screen, action: &mut Action) -> Result<(), TraceError> {
    match &action.target {
        Some(path) => {
            if screen.element(path).is_none() {
                return Err(TraceError::DanglingTarget { step, path: path.clone() });
            }
        }
        None if action.kind.needs_target() => {
            return Err(TraceError::MissingTarget { step, kind: action.kind });
        }
        None => {}
    }
    if action.kind == ActionKind::Input && action.input_text.is_none() {
        return Err(TraceError::MissingInputText { step });
    }
    if action.kind == ActionKind::Scroll && action.scroll_amount.is_none() {
        action.scroll_amount = Some(screen.default_scroll_amount());
    }
    Ok(())
}

/// Parses and validates a JSON trace document.
pub fn parse_trace_json(json: &str) -> Result<Trace, TraceError> {
    let record: TraceRecord =
        serde_json::from_str(json).map_err(|e| TraceError::Malformed(e.to_string()))?;
    parse_trace(record)
}

pub fn serialize_trace(trace: &Trace) -> TraceRecord {
    TraceRecord {
        trace_id: trace.trace_id.clone(),
        app_id: trace.app_id.clone(),
        steps: trace
            .steps
            .iter()
            .map(|s| StepRecord {
                screen: (&s.screen).into(),
                action: s.action.clone(),
            })
            .collect(),
        final_screen: trace.final_screen.as_ref().map(Into::into),
    }
}

pub fn trace_to_json(trace: &Trace) -> String {
    serde_json::to_string_pretty(&serialize_trace(trace)).expect("trace serialization is infallible")
}
