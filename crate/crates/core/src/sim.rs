//! Simulated apps: finite state machines of screens with element-keyed
//! transitions, standing in for a live device during replay and crawling.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::replay::{DeviceBackend, DeviceError};
use crate::trace::{Action, ActionKind, Screen, Step, Trace};

/// Reserved state meaning the app was left.
pub const EXIT: &str = "EXIT";

pub const DEFAULT_MAX_STEPS: usize = 30;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid app definition: {0}")]
    Malformed(String),
    #[error("initial state {0:?} is not defined")]
    UnknownInitial(String),
    #[error("transition {index}: state {state:?} is not defined")]
    UnknownState { index: usize, state: String },
    #[error("transition {index}: no element keyed {key:?} on state {state:?}")]
    UnknownElement { index: usize, state: String, key: String },
    #[error("transition {index}: duplicate key {key:?} on state {state:?}")]
    DuplicateTransition { index: usize, state: String, key: String },
    #[error("state {EXIT:?} is reserved")]
    ReservedState,
    #[error("max_steps must be positive")]
    ZeroSteps,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub element_key: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedApp {
    pub app_id: String,
    pub initial: String,
    pub states: BTreeMap<String, Screen>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
}

impl SimulatedApp {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.states.contains_key(EXIT) {
            return Err(SimError::ReservedState);
        }
        if !self.states.contains_key(&self.initial) {
            return Err(SimError::UnknownInitial(self.initial.clone()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (index, t) in self.transitions.iter().enumerate() {
            let Some(screen) = self.states.get(&t.from) else {
                return Err(SimError::UnknownState { index, state: t.from.clone() });
            };
            if t.to != EXIT && !self.states.contains_key(&t.to) {
                return Err(SimError::UnknownState { index, state: t.to.clone() });
            }
            if !screen.root.walk().iter().any(|(_, e)| e.key() == t.element_key) {
                return Err(SimError::UnknownElement {
                    index,
                    state: t.from.clone(),
                    key: t.element_key.clone(),
                });
            }
            if !seen.insert((&t.from, &t.element_key)) {
                return Err(SimError::DuplicateTransition {
                    index,
                    state: t.from.clone(),
                    key: t.element_key.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self, SimError> {
        let app: Self = serde_json::from_str(json).map_err(|e| SimError::Malformed(e.to_string()))?;
        app.validate()?;
        Ok(app)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Malformed(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("app serialization is infallible")
    }

    /// Next state after clicking the element keyed `key` in `state`; clicks
    /// without a transition stay put.
    pub fn next_state<'a>(&'a self, state: &'a str, key: &str) -> &'a str {
        self.transitions
            .iter()
            .find(|t| t.from == state && t.element_key == key)
            .map_or(state, |t| t.to.as_str())
    }
}

/// A device running a [`SimulatedApp`].
#[derive(Debug, Clone)]
pub struct SimulatedDevice<'a> {
    app: &'a SimulatedApp,
    state: String,
    /// (state, element key, text) for every input action performed.
    pub inputs: Vec<(String, String, String)>,
    pub history: Vec<Action>,
}

impl<'a> SimulatedDevice<'a> {
    pub fn new(app: &'a SimulatedApp) -> Self {
        Self { app, state: app.initial.clone(), inputs: Vec::new(), history: Vec::new() }
    }

    pub fn state(&self) -> &str {
        &self.state
    }

    pub fn has_exited(&self) -> bool {
        self.state == EXIT
    }
}

impl DeviceBackend for SimulatedDevice<'_> {
    fn reset(&mut self) -> Result<Screen, DeviceError> {
        self.state = self.app.initial.clone();
        self.inputs.clear();
        self.history.clear();
        self.current_screen()
    }

    fn current_screen(&self) -> Result<Screen, DeviceError> {
        self.app.states.get(&self.state).cloned().ok_or(DeviceError::Exited)
    }

    fn perform(&mut self, action: &Action) -> Result<(), DeviceError> {
        let screen = self.app.states.get(&self.state).ok_or(DeviceError::Exited)?;
        let element = match &action.target {
            Some(p) => Some(screen.element(p).ok_or_else(|| DeviceError::NoSuchElement(p.clone()))?),
            None => None,
        };
        match (action.kind, element) {
            (ActionKind::Click, Some(el)) => {
                self.state = self.app.next_state(&self.state, el.key()).to_string();
            }
            (ActionKind::Input, Some(el)) => {
                let text = action.input_text.clone().unwrap_or_default();
                self.inputs.push((self.state.clone(), el.key().to_string(), text));
            }
            (ActionKind::Click | ActionKind::Input, None) => {
                return Err(DeviceError::Other(format!("{} action without a target", action.kind)));
            }
            (ActionKind::Scroll | ActionKind::System, _) => {}
        }
        self.history.push(action.clone());
        Ok(())
    }
}

/// Random exploration from the initial state: each step clicks a uniformly
/// chosen actionable element. Stops after `max_steps` actions, on leaving
/// the app, or on a screen with nothing to click.
pub fn random_crawl(app: &SimulatedApp, max_steps: usize, seed: u64) -> Result<Trace, SimError> {
    if max_steps == 0 {
        return Err(SimError::ZeroSteps);
    }
    app.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = app.initial.as_str();
    let mut steps = Vec::new();
    let mut final_screen = None;
    while steps.len() < max_steps {
        let mut screen = app.states[state].clone();
        screen.index = steps.len();
        let actionable = screen.actionable_elements();
        if actionable.is_empty() {
            final_screen = Some(screen);
            break;
        }
        let (path, el) = &actionable[rng.gen_range(0..actionable.len())];
        let next = app.next_state(state, el.key());
        let action = Action::click(path.clone());
        steps.push(Step { screen: screen.clone(), action });
        if next == EXIT {
            break;
        }
        state = next;
        if steps.len() == max_steps {
            let mut last = app.states[state].clone();
            last.index = steps.len();
            final_screen = Some(last);
        }
    }
    Ok(Trace {
        trace_id: format!("{}-{seed:016x}", app.app_id),
        app_id: app.app_id.clone(),
        steps,
        final_screen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Bounds, Element};

    fn one_button_app(to: &str) -> SimulatedApp {
        let root = Element::new("FrameLayout", Bounds::new(0, 0, 100, 100)).with_children(vec![Element::new(
            "Button",
            Bounds::new(10, 10, 50, 50),
        )
        .with_resource_id("go")
        .clickable()]);
        SimulatedApp {
            app_id: "app".into(),
            initial: "s".into(),
            states: [("s".to_string(), Screen::new(0, 100, 100, root))].into(),
            transitions: vec![Transition { from: "s".into(), element_key: "go".into(), to: to.into() }],
        }
    }

    #[test]
    fn self_loop_runs_to_cap() {
        let t = random_crawl(&one_button_app("s"), 30, 1).unwrap();
        assert_eq!(t.steps.len(), 30);
        assert!(t.steps.iter().all(|s| s.action == t.steps[0].action));
        assert!(t.final_screen.is_some());
    }

    #[test]
    fn exit_ends_crawl() {
        let t = random_crawl(&one_button_app(EXIT), 30, 1).unwrap();
        assert_eq!(t.steps.len(), 1);
        assert!(t.final_screen.is_none());
    }

    #[test]
    fn crawl_output_is_a_valid_trace() {
        let t = random_crawl(&one_button_app("s"), 5, 9).unwrap();
        let again = crate::trace::parse_trace_json(&crate::trace::trace_to_json(&t)).unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(matches!(random_crawl(&one_button_app("s"), 0, 1), Err(SimError::ZeroSteps)));
    }

    #[test]
    fn validation_catches_bad_specs() {
        let mut app = one_button_app("s");
        app.initial = "nope".into();
        assert!(matches!(app.validate(), Err(SimError::UnknownInitial(_))));
        let mut app = one_button_app("missing");
        assert!(matches!(app.validate(), Err(SimError::UnknownState { .. })));
        app.transitions[0] = Transition { from: "s".into(), element_key: "ghost".into(), to: "s".into() };
        assert!(matches!(app.validate(), Err(SimError::UnknownElement { .. })));
    }

    #[test]
    fn device_follows_transitions_and_records_input() {
        let app = one_button_app(EXIT);
        let mut d = SimulatedDevice::new(&app);
        d.reset().unwrap();
        d.perform(&Action::input(vec![0], "hello")).unwrap();
        assert_eq!(d.inputs, vec![("s".into(), "go".into(), "hello".into())]);
        d.perform(&Action::scroll(vec![0], 10)).unwrap();
        assert_eq!(d.state(), "s");
        d.perform(&Action::click(vec![0])).unwrap();
        assert!(d.has_exited());
        assert!(matches!(d.current_screen(), Err(DeviceError::Exited)));
    }
}
