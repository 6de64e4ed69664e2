//! Parsers for raw completions. Each returns `None` when the completion does
//! not follow the expected format.

fn is_none_literal(s: &str) -> bool {
    let t = s.trim().trim_end_matches('.').trim_matches('"');
    t.eq_ignore_ascii_case("none")
}

/// Dash-separated task list. The prompt ends with a primed `-`, so the first
/// item arrives without one.
///
/// `Some(vec![])` means the model answered "None".
pub fn task_list(completion: &str) -> Option<Vec<String>> {
    if is_none_literal(completion) {
        return Some(Vec::new());
    }
    let primed = format!("-{completion}");
    let items: Vec<String> = primed
        .lines()
        .filter_map(|line| {
            let line = line.trim();
            let item = line.strip_prefix('-').unwrap_or(line).trim();
            (!item.is_empty()).then(|| item.to_string())
        })
        .collect();
    if items.is_empty() {
        None
    } else {
        Some(items)
    }
}

/// Grounding answer: either "None" or one or more integer ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroundingAnswer {
    Terminal,
    Ids(Vec<usize>),
}

pub fn grounding(completion: &str) -> Option<GroundingAnswer> {
    if is_none_literal(completion) {
        return Some(GroundingAnswer::Terminal);
    }
    let body = completion.trim().trim_end_matches('.');
    let mut ids: Vec<usize> = Vec::new();
    for tok in body.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
        let id = tok.parse().ok()?;
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    if ids.is_empty() {
        None
    } else {
        Some(GroundingAnswer::Ids(ids))
    }
}

/// `- (info)` items. Parenthesised groups are taken when present, otherwise
/// one item per dash-led line.
pub fn parameter_list(completion: &str) -> Option<Vec<String>> {
    if is_none_literal(completion) {
        return Some(Vec::new());
    }
    let mut items = Vec::new();
    if completion.contains('(') {
        let mut rest = completion;
        while let Some(open) = rest.find('(') {
            let after = &rest[open + 1..];
            let close = after.find(')')?;
            let item = after[..close].trim();
            if !item.is_empty() {
                items.push(item.to_string());
            }
            rest = &after[close + 1..];
        }
    } else {
        for line in completion.lines() {
            let item = line.trim().trim_start_matches('-').trim();
            if !item.is_empty() {
                items.push(item.to_string());
            }
        }
    }
    if items.is_empty() {
        None
    } else {
        Some(items)
    }
}

/// Single element id, or `Some(None)` for "None".
pub fn single_id(completion: &str) -> Option<Option<usize>> {
    if is_none_literal(completion) {
        return Some(None);
    }
    completion.trim().trim_end_matches('.').parse().ok().map(Some)
}
