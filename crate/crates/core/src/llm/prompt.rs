//! Prompt templates for the three extraction steps.

use crate::html::HtmlScreen;

const PREAMBLE: &str = "Below is a simplified HTML code of a mobile app:";

/// Task discovery. The trailing `-` primes a dash-separated list.
pub fn discovery(screen: &HtmlScreen) -> String {
    format!(
        "{PREAMBLE}\n{}\nWhat can a user do with the prompt?\nThe user can: -",
        screen.html
    )
}

/// Action grounding for a task description.
pub fn grounding(screen: &HtmlScreen, description: &str) -> String {
    format!(
        "{PREAMBLE}\n{}\nWhich element id(s) should the user click on next to accomplish the task {description}?\n\
         Respond with only the number(s), or \"None\" if the user can already complete the task on the current page.",
        screen.html
    )
}

/// Parameter discovery, given the grounded final-action ids.
pub fn parameters(screen: &HtmlScreen, description: &str, grounded_ids: &[usize]) -> String {
    let target = match grounded_ids {
        [one] => format!("the element with id {one}"),
        many => format!(
            "the elements with ids {}",
            many.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
        ),
    };
    format!(
        "{PREAMBLE}\n{}\nThe user is trying to complete the task {description}.\n\
         Other than clicking on {target}, list the additional information the user needs to enter in the format of (- (info)). \
         Answer \"None\" if no additional information is needed.",
        screen.html
    )
}

/// Element lookup for one parameter.
pub fn parameter_element(screen: &HtmlScreen, parameter: &str) -> String {
    format!(
        "{PREAMBLE}\n{}\nWhere can the user enter the {parameter}? Answer with only the element id, or \"None\" if no element matches.",
        screen.html
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn html() -> HtmlScreen {
        HtmlScreen {
            html: "<screen>\n<p id=\"0\" pos=\"top\">x</p>\n</screen>".into(),
            index_map: vec![Default::default()],
        }
    }

    #[test]
    fn parameter_prompt_lists_multiple_ids() {
        let p = parameters(&html(), "send a message", &[1, 4]);
        assert!(p.contains("Other than clicking on the elements with ids 1, 4, list"));
    }

    #[test]
    fn discovery_prompt_ends_primed() {
        assert!(discovery(&html()).ends_with("\nThe user can: -"));
    }
}
