//! Built-in fixtures: a calendar app with onboarding, the recorded trace that
//! creates a reminder in it, the scripted completions for mining that trace,
//! and a suite of small generated apps for replay.

use std::collections::BTreeMap;

use crate::html::to_html;
use crate::llm::{prompt, ScriptedBackend};
use crate::macros::{Macro, MacroAction, Parameter};
use crate::sim::{SimulatedApp, Transition};
use crate::trace::{Action, Bounds, Element, ElementDescriptor, Screen, Step, Trace};

pub const CALENDAR_APP: &str = "com.example.calendar";
pub const WIDTH: u32 = 1080;
pub const HEIGHT: u32 = 1920;

fn root(children: Vec<Element>) -> Element {
    Element::new("FrameLayout", Bounds::new(0, 0, WIDTH as i32, HEIGHT as i32)).with_children(children)
}

fn screen(children: Vec<Element>) -> Screen {
    Screen::new(0, WIDTH, HEIGHT, root(children))
}

fn next_arrow() -> Element {
    Element::new("ImageButton", Bounds::new(880, 1700, 1040, 1860))
        .with_resource_id("next_arrow")
        .with_content_description("Next page")
        .with_semantic_class("arrow icon")
        .clickable()
}

fn got_it() -> Element {
    Element::new("Button", Bounds::new(400, 1700, 680, 1860))
        .with_resource_id("got_it_button")
        .with_text("Got it")
        .clickable()
}

fn label(text: &str, bounds: Bounds) -> Element {
    Element::new("TextView", bounds).with_text(text)
}

pub fn onboarding_1() -> Screen {
    screen(vec![
        Element::new("ScrollView", Bounds::new(0, 0, 1080, 1600))
            .with_resource_id("onboarding_scroll")
            .with_children(vec![
                Element::new("ImageView", Bounds::new(140, 200, 940, 1000))
                    .with_resource_id("illustration")
                    .with_content_description("Calendar illustration")
                    .clickable(),
                label("Welcome to Calendar", Bounds::new(140, 1100, 940, 1200)),
            ]),
        next_arrow(),
    ])
}

pub fn onboarding_2() -> Screen {
    screen(vec![label("Stay organized", Bounds::new(140, 1100, 940, 1200)), next_arrow(), got_it()])
}

pub fn onboarding_3() -> Screen {
    screen(vec![label("You are all set", Bounds::new(140, 1100, 940, 1200)), got_it()])
}

pub fn main_calendar() -> Screen {
    screen(vec![
        label("December 2020", Bounds::new(40, 40, 600, 140)),
        Element::new("Button", Bounds::new(700, 40, 1040, 140))
            .with_resource_id("today_button")
            .with_text("Today")
            .clickable(),
        Element::new("ImageButton", Bounds::new(880, 1700, 1040, 1860))
            .with_resource_id("fab")
            .with_content_description("Create new event")
            .clickable(),
    ])
}

pub fn add_menu() -> Screen {
    screen(vec![
        Element::new("Button", Bounds::new(600, 1400, 1040, 1500))
            .with_resource_id("speed_dial_goal")
            .with_text("Goal")
            .clickable(),
        Element::new("Button", Bounds::new(600, 1540, 1040, 1640))
            .with_resource_id("speed_dial_reminder")
            .with_text("Reminder")
            .clickable(),
    ])
}

/// The reminder editor whose HTML is the nine-element screen used in prompts.
pub fn reminder_edit() -> Screen {
    screen(vec![
        Element::new("ImageButton", Bounds::new(0, 0, 150, 150))
            .with_resource_id("cancel")
            .with_semantic_class("cancel image")
            .clickable(),
        Element::new("Button", Bounds::new(900, 20, 1060, 140))
            .with_resource_id("save")
            .with_semantic_class("save")
            .with_text("Save")
            .clickable(),
        Element::new("EditText", Bounds::new(40, 200, 1040, 320))
            .with_resource_id("title_edit")
            .with_semantic_class("title edit")
            .with_text("Remind me to")
            .clickable(),
        Element::new("TextView", Bounds::new(160, 360, 900, 440))
            .with_semantic_class("first line")
            .with_text("All day"),
        Element::new("ImageView", Bounds::new(40, 480, 120, 560))
            .with_resource_id("date_icon")
            .with_semantic_class("tile icon")
            .clickable(),
        Element::new("TextView", Bounds::new(160, 480, 700, 560))
            .with_resource_id("date_text")
            .with_semantic_class("first line")
            .with_text("Sun, Dec 13, 2020")
            .clickable(),
        Element::new("Button", Bounds::new(760, 480, 1040, 560))
            .with_resource_id("time_button")
            .with_text("8:00 AM")
            .with_content_description("Start time 8:00 AM")
            .clickable(),
        Element::new("TextView", Bounds::new(160, 600, 900, 670))
            .with_resource_id("repeat_text")
            .with_semantic_class("first line")
            .with_text("Does not repeat")
            .with_content_description("does not repeat")
            .clickable(),
        Element::new("ImageView", Bounds::new(40, 600, 120, 680))
            .with_resource_id("repeat_icon")
            .with_semantic_class("tile icon")
            .clickable(),
    ])
}

/// Expected rendering of [`reminder_edit`].
pub const REMINDER_HTML: &str = "<screen>
<img id=\"0\" class=\"cancel image\" pos=\"top left\"></img>
<button id=\"1\" class=\"save\" pos=\"top right\">save</button>
<input id=\"2\" class=\"title edit\" pos=\"top\">remind me to</input>
<p id=\"3\" class=\"first line\" pos=\"top\">all day</p>
<img id=\"4\" class=\"tile icon\" pos=\"top left\"></img>
<p id=\"5\" class=\"first line\" pos=\"top\">sun dec 13 2020</p>
<button id=\"6\" alt=\"start time 8 00 am\" pos=\"top right\">8 00 am</button>
<p id=\"7\" class=\"first line\" alt=\"does not repeat\" pos=\"top\">does not repeat</p>
<img id=\"8\" class=\"tile icon\" pos=\"top left\"></img>
</screen>";

fn calendar_app_with(initial: &str, onboarding: bool) -> SimulatedApp {
    let mut states: BTreeMap<String, Screen> = BTreeMap::new();
    let mut transitions = Vec::new();
    let mut t = |from: &str, key: &str, to: &str| {
        transitions.push(Transition { from: from.into(), element_key: key.into(), to: to.into() })
    };
    if onboarding {
        states.insert("onboarding_1".into(), onboarding_1());
        states.insert("onboarding_2".into(), onboarding_2());
        states.insert("onboarding_3".into(), onboarding_3());
        t("onboarding_1", "next_arrow", "onboarding_2");
        t("onboarding_2", "next_arrow", "onboarding_3");
        t("onboarding_2", "got_it_button", "main");
        t("onboarding_3", "got_it_button", "main");
    }
    states.insert("main".into(), main_calendar());
    states.insert("add_menu".into(), add_menu());
    states.insert("reminder_edit".into(), reminder_edit());
    t("main", "fab", "add_menu");
    t("add_menu", "speed_dial_reminder", "reminder_edit");
    t("add_menu", "speed_dial_goal", "main");
    t("reminder_edit", "save", "main");
    t("reminder_edit", "cancel", "main");
    SimulatedApp { app_id: CALENDAR_APP.into(), initial: initial.into(), states, transitions }
}

/// Calendar app landing on a three-page onboarding flow.
pub fn calendar_app() -> SimulatedApp {
    calendar_app_with("onboarding_1", true)
}

/// The same app after onboarding has been completed: it lands on the calendar.
pub fn calendar_app_without_onboarding() -> SimulatedApp {
    calendar_app_with("main", false)
}

fn indexed(mut s: Screen, index: usize) -> Screen {
    s.index = index;
    s
}

/// Recorded session that opens the reminder editor. Steps, in order: tap the
/// illustration, a system event, scroll the onboarding page, next, next,
/// "Got it", the add button, "Reminder". The final screen is the editor.
pub fn reminder_trace() -> Trace {
    let o1 = onboarding_1();
    let steps = vec![
        (o1.clone(), Action::click(vec![0, 0])),
        (o1.clone(), Action::system()),
        (o1.clone(), Action::scroll(vec![0], o1.default_scroll_amount())),
        (o1, Action::click(vec![1])),
        (onboarding_2(), Action::click(vec![1])),
        (onboarding_3(), Action::click(vec![1])),
        (main_calendar(), Action::click(vec![2])),
        (add_menu(), Action::click(vec![1])),
    ];
    let n = steps.len();
    Trace {
        trace_id: "calendar-reminder".into(),
        app_id: CALENDAR_APP.into(),
        steps: steps
            .into_iter()
            .enumerate()
            .map(|(i, (s, action))| Step { screen: indexed(s, i), action })
            .collect(),
        final_screen: Some(indexed(reminder_edit(), n)),
    }
}

/// Tasks the model lists for the reminder editor.
pub const REMINDER_TASKS: [&str; 5] = [
    "create a reminder",
    "edit the reminder title",
    "set the reminder time",
    "set the reminder date",
    "choose whether the reminder repeats",
];

/// Grounded element id per task in [`REMINDER_TASKS`].
pub const REMINDER_GROUNDING: [usize; 5] = [1, 2, 6, 5, 7];

/// Scripted completions for mining [`reminder_trace`].
pub fn reminder_script() -> ScriptedBackend {
    let mut b = ScriptedBackend::new();
    let onboarding = "tap next\n- tap the next button";
    b.insert(&prompt::discovery(&to_html(&onboarding_1())), vec![onboarding.into()]);
    b.insert(&prompt::discovery(&to_html(&onboarding_2())), vec![onboarding.into()]);
    for s in [onboarding_3(), main_calendar(), add_menu()] {
        b.insert(&prompt::discovery(&to_html(&s)), vec!["None".into()]);
    }
    let editor = to_html(&reminder_edit());
    b.insert(&prompt::discovery(&editor), vec![REMINDER_TASKS.join("\n- ")]);
    for (task, id) in REMINDER_TASKS.iter().zip(REMINDER_GROUNDING) {
        b.insert(&prompt::grounding(&editor, task), vec![id.to_string()]);
        let params = if *task == "create a reminder" { "- (title)\n- (date)" } else { "None" };
        b.insert(&prompt::parameters(&editor, task, &[id]), vec![params.into()]);
    }
    b.insert(&prompt::parameter_element(&editor, "title"), vec!["2".into()]);
    b.insert(&prompt::parameter_element(&editor, "date"), vec!["5".into()]);
    b
}

fn descriptor_at(screen: &Screen, path: &[usize]) -> ElementDescriptor {
    screen.element(&path.to_vec().into()).expect("fixture path").descriptor()
}

/// The optimized "create a reminder" macro: next, "Got it", add, "Reminder",
/// then save, with title and date parameters.
pub fn expected_reminder_macro() -> Macro {
    let trace = reminder_trace();
    let mut actions: Vec<MacroAction> = [3, 5, 6, 7]
        .iter()
        .map(|&i| MacroAction::from_trace_step(&trace, i).expect("fixture step"))
        .collect();
    let editor = indexed(reminder_edit(), 8);
    actions.push(MacroAction::click(descriptor_at(&editor, &[1]), Some(8)));
    Macro {
        app_id: CALENDAR_APP.into(),
        description: "create a reminder".into(),
        actions,
        parameters: vec![
            Parameter { description: "title".into(), element: descriptor_at(&editor, &[2]), element_id: 2 },
            Parameter { description: "date".into(), element: descriptor_at(&editor, &[5]), element_id: 5 },
        ],
    }
}

const WORDS: [&str; 12] = [
    "inbox", "compose", "album", "playlist", "profile", "basket", "checkout", "gallery", "notes", "timer", "forecast",
    "library",
];

/// A small generated app: a linear chain of `depth` screens, each with a
/// forward button and a decoy, ending in a confirmation screen. Returns the
/// app and the macro that walks the chain and presses the final button.
pub fn generated_app(k: usize, depth: usize) -> (SimulatedApp, Macro) {
    let app_id = format!("com.example.generated{k}");
    let word = |i: usize| WORDS[(k * 5 + i) % WORDS.len()];
    let mut states = BTreeMap::new();
    let mut transitions = Vec::new();
    let mut actions = Vec::new();
    for i in 0..depth {
        let id = format!("state_{i}");
        let fwd = format!("open_{}_{i}", word(i));
        let decoy = format!("help_{k}_{i}");
        let forward = Element::new("Button", Bounds::new(40, 400, 1040, 520))
            .with_resource_id(&fwd)
            .with_text(format!("Open {}", word(i)))
            .clickable();
        let s = screen(vec![
            label(&format!("Page {i} of {}", word(i)), Bounds::new(40, 40, 1040, 140)),
            forward.clone(),
            Element::new("Button", Bounds::new(40, 600, 1040, 720)).with_resource_id(&decoy).with_text("Help").clickable(),
        ]);
        let to = if i + 1 == depth { "done".to_string() } else { format!("state_{}", i + 1) };
        transitions.push(Transition { from: id.clone(), element_key: fwd, to });
        actions.push(MacroAction::click(forward.descriptor(), Some(i)));
        states.insert(id, s);
    }
    let finish = Element::new("Button", Bounds::new(700, 1700, 1040, 1840))
        .with_resource_id(format!("finish_{}", word(depth)))
        .with_text(format!("Finish {}", word(depth)))
        .clickable();
    states.insert("done".into(), screen(vec![finish.clone()]));
    transitions.push(Transition { from: "done".into(), element_key: finish.key().into(), to: crate::sim::EXIT.into() });
    actions.push(MacroAction::click(finish.descriptor(), Some(depth)));
    let description = format!("finish {}", word(depth));
    let app = SimulatedApp { app_id: app_id.clone(), initial: "state_0".into(), states, transitions };
    (app, Macro { app_id, description, actions, parameters: vec![] })
}

/// Replaces the final element of `m` with one that appears on no screen.
pub fn break_final_element(m: &mut Macro) {
    if let Some(last) = m.actions.last_mut() {
        last.element = Some(ElementDescriptor {
            resource_id: "zz_missing_widget".into(),
            text: "Nonexistent control".into(),
            content_description: String::new(),
            class_name: "Switch".into(),
        });
    }
}

/// Ten (app, macro) pairs: the calendar app with its reminder macro and nine
/// generated apps. The last `broken` macros have their final element replaced.
pub fn replay_suite(broken: usize) -> Vec<(SimulatedApp, Macro)> {
    let mut suite = vec![(calendar_app(), expected_reminder_macro())];
    suite.extend((1..10).map(|k| generated_app(k, 2 + k % 3)));
    let n = suite.len();
    for (_, m) in suite.iter_mut().skip(n.saturating_sub(broken)) {
        break_final_element(m);
    }
    suite
}
