//! Simplified-HTML rendering of screens for prompting.
//!
//! Each retained element becomes one line such as
//! `<button id="1" class="save" pos="top right">save</button>`. Ids are
//! assigned in depth-first pre-order and mapped back to element paths.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{Bounds, Element, ElementPath, Screen};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HtmlError {
    #[error("bounds {0:?} do not intersect the {1}x{2} screen")]
    OffScreen(Bounds, u32, u32),
}

/// One of the nine cells of a 3x3 screen grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridPosition {
    TopLeft,
    Top,
    TopRight,
    Left,
    Center,
    Right,
    BottomLeft,
    Bottom,
    BottomRight,
}

impl GridPosition {
    pub const ALL: [GridPosition; 9] = [
        GridPosition::TopLeft,
        GridPosition::Top,
        GridPosition::TopRight,
        GridPosition::Left,
        GridPosition::Center,
        GridPosition::Right,
        GridPosition::BottomLeft,
        GridPosition::Bottom,
        GridPosition::BottomRight,
    ];

    fn from_cell(row: usize, col: usize) -> Self {
        Self::ALL[row * 3 + col]
    }

    pub fn label(self) -> &'static str {
        match self {
            GridPosition::TopLeft => "top left",
            GridPosition::Top => "top",
            GridPosition::TopRight => "top right",
            GridPosition::Left => "left",
            GridPosition::Center => "center",
            GridPosition::Right => "right",
            GridPosition::BottomLeft => "bottom left",
            GridPosition::Bottom => "bottom",
            GridPosition::BottomRight => "bottom right",
        }
    }
}

impl fmt::Display for GridPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn intersects(b: &Bounds, w: u32, h: u32) -> bool {
    let (w, h) = (w as i64, h as i64);
    let (l, t, r, bt) = (b.left as i64, b.top as i64, b.right as i64, b.bottom as i64);
    l.max(0) <= r.min(w) && t.max(0) <= bt.min(h) && l < w && t < h && r >= 0 && bt >= 0
}

// Cell along one axis; a center exactly on a boundary goes to the lower cell.
fn cell(coord: i64, extent: i64) -> usize {
    let c = coord.clamp(0, extent);
    if 3 * c <= extent {
        0
    } else if 3 * c <= 2 * extent {
        1
    } else {
        2
    }
}

/// Grid cell containing the center of `bounds`.
pub fn grid_position(bounds: &Bounds, screen_w: u32, screen_h: u32) -> Result<GridPosition, HtmlError> {
    if !intersects(bounds, screen_w, screen_h) {
        return Err(HtmlError::OffScreen(*bounds, screen_w, screen_h));
    }
    let (cx, cy) = bounds.center();
    Ok(GridPosition::from_cell(
        cell(cy as i64, screen_h as i64),
        cell(cx as i64, screen_w as i64),
    ))
}

/// Lowercases and replaces every non-alphanumeric run with a single space.
pub fn normalize_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// HTML tag for an element: keyword match on the semantic class, then on the
/// platform class name, falling back to `p`.
pub fn html_tag(element: &Element) -> &'static str {
    fn by_keyword(s: &str) -> Option<&'static str> {
        let s = s.to_lowercase();
        if ["edit", "input", "textfield", "text field", "search box"].iter().any(|k| s.contains(k)) {
            Some("input")
        } else if ["image", "icon", "img", "picture"].iter().any(|k| s.contains(k)) {
            Some("img")
        } else if ["button", "btn", "switch", "checkbox", "toggle"].iter().any(|k| s.contains(k)) {
            Some("button")
        } else {
            None
        }
    }
    by_keyword(&element.semantic_class)
        .or_else(|| by_keyword(&element.class_name))
        .unwrap_or("p")
}

/// A screen rendered as simplified HTML plus the id → element-path map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HtmlScreen {
    pub html: String,
    /// `index_map[id]` is the path of the element printed with that id.
    pub index_map: Vec<ElementPath>,
}

impl HtmlScreen {
    pub fn len(&self) -> usize {
        self.index_map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_map.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        id < self.index_map.len()
    }

    pub fn path(&self, id: usize) -> Option<&ElementPath> {
        self.index_map.get(id)
    }

    /// Id assigned to the element at `path`, if it was retained.
    pub fn id_of(&self, path: &ElementPath) -> Option<usize> {
        self.index_map.iter().position(|p| p == path)
    }
}

fn retained(el: &Element, screen: &Screen) -> bool {
    (el.clickable || el.has_label()) && intersects(&el.bounds, screen.width, screen.height)
}

fn render_line(id: usize, el: &Element, pos: GridPosition) -> String {
    let tag = html_tag(el);
    let mut line = format!("<{tag} id=\"{id}\"");
    let class = normalize_text(&el.semantic_class);
    if !class.is_empty() {
        line.push_str(&format!(" class=\"{class}\""));
    }
    if !el.content_description.is_empty() && el.content_description != el.text {
        let alt = normalize_text(&el.content_description);
        if !alt.is_empty() {
            line.push_str(&format!(" alt=\"{alt}\""));
        }
    }
    line.push_str(&format!(" pos=\"{pos}\">{}</{tag}>", normalize_text(&el.text)));
    line
}

/// Renders the visible elements that are clickable or carry text.
pub fn to_html(screen: &Screen) -> HtmlScreen {
    let mut lines = Vec::new();
    let mut index_map = Vec::new();
    for (path, el) in screen.visible_elements() {
        if !retained(el, screen) {
            continue;
        }
        let pos = grid_position(&el.bounds, screen.width, screen.height)
            .expect("retained elements intersect the screen");
        lines.push(render_line(index_map.len(), el, pos));
        index_map.push(path);
    }
    let html = if lines.is_empty() {
        "<screen></screen>".to_string()
    } else {
        format!("<screen>\n{}\n</screen>", lines.join("\n"))
    };
    HtmlScreen { html, index_map }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_center_and_corner() {
        let c = Bounds::new(500, 900, 580, 1020);
        assert_eq!(grid_position(&c, 1080, 1920).unwrap(), GridPosition::Center);
        let tl = Bounds::new(0, 0, 100, 100);
        assert_eq!(grid_position(&tl, 1080, 1920).unwrap().label(), "top left");
    }

    #[test]
    fn grid_boundary_goes_upper_left() {
        // center x = 360 is exactly the first vertical boundary
        let b = Bounds::new(320, 900, 400, 1020);
        assert_eq!(b.center(), (360, 960));
        assert_eq!(grid_position(&b, 1080, 1920).unwrap(), GridPosition::Left);
        // center y = 640 is exactly the first horizontal boundary
        let b = Bounds::new(500, 600, 580, 680);
        assert_eq!(grid_position(&b, 1080, 1920).unwrap(), GridPosition::Top);
    }

    #[test]
    fn grid_rejects_offscreen() {
        let b = Bounds::new(2000, 0, 2100, 50);
        assert!(grid_position(&b, 1080, 1920).is_err());
    }

    #[test]
    fn grid_partitions_every_pixel() {
        let (w, h) = (30u32, 21u32);
        let mut counts = [0usize; 9];
        for x in 0..w as i32 {
            for y in 0..h as i32 {
                let p = grid_position(&Bounds::new(x, y, x, y), w, h).unwrap();
                counts[GridPosition::ALL.iter().position(|g| *g == p).unwrap()] += 1;
            }
        }
        assert_eq!(counts.iter().sum::<usize>(), (w * h) as usize);
        assert!(counts.iter().all(|&c| c > 0));
    }

    #[test]
    fn normalize_strips_punctuation() {
        assert_eq!(normalize_text("8:00 AM"), "8 00 am");
        assert_eq!(normalize_text("Sun, Dec 13, 2020"), "sun dec 13 2020");
        assert_eq!(normalize_text("  "), "");
    }

    #[test]
    fn empty_screen_renders_degenerate_block() {
        let root = Element::new("FrameLayout", Bounds::new(0, 0, 100, 100));
        let html = to_html(&Screen::new(0, 100, 100, root));
        assert_eq!(html.html, "<screen></screen>");
        assert!(html.index_map.is_empty());
    }

    #[test]
    fn ids_follow_pre_order() {
        let root = Element::new("FrameLayout", Bounds::new(0, 0, 300, 300)).with_children(vec![
            Element::new("LinearLayout", Bounds::new(0, 0, 300, 100)).with_children(vec![
                Element::new("TextView", Bounds::new(0, 0, 100, 50)).with_text("A"),
                Element::new("Button", Bounds::new(100, 0, 200, 50)).clickable(),
            ]),
            Element::new("TextView", Bounds::new(0, 200, 100, 250)).with_text("C"),
            Element::new("TextView", Bounds::new(0, 250, 100, 300)).with_text("hidden").hidden(),
        ]);
        let html = to_html(&Screen::new(0, 300, 300, root));
        let paths: Vec<Vec<usize>> = html.index_map.iter().map(|p| p.0.clone()).collect();
        assert_eq!(paths, vec![vec![0, 0], vec![0, 1], vec![1]]);
        assert_eq!(
            html.html,
            "<screen>\n<p id=\"0\" pos=\"top left\">a</p>\n<button id=\"1\" pos=\"top\"></button>\n<p id=\"2\" pos=\"bottom left\">c</p>\n</screen>"
        );
    }

    #[test]
    fn tag_mapping_prefers_semantic_class() {
        let el = Element::new("android.widget.Button", Bounds::default()).with_semantic_class("cancel image");
        assert_eq!(html_tag(&el), "img");
        let el = Element::new("android.widget.Button", Bounds::default()).with_semantic_class("save");
        assert_eq!(html_tag(&el), "button");
        let el = Element::new("android.widget.TextView", Bounds::default()).with_semantic_class("first line");
        assert_eq!(html_tag(&el), "p");
        let el = Element::new("android.widget.EditText", Bounds::default());
        assert_eq!(html_tag(&el), "input");
    }

    #[test]
    fn alt_only_when_description_differs() {
        let el = Element::new("Button", Bounds::new(0, 0, 10, 10))
            .with_text("8:00 AM")
            .with_content_description("Start time 8:00 AM");
        assert_eq!(
            render_line(6, &el, GridPosition::TopRight),
            "<button id=\"6\" alt=\"start time 8 00 am\" pos=\"top right\">8 00 am</button>"
        );
        let same = Element::new("TextView", Bounds::new(0, 0, 10, 10)).with_text("x").with_content_description("x");
        assert!(!render_line(0, &same, GridPosition::Top).contains("alt="));
    }
}
