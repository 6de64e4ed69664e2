//! Per-app interaction graphs and action-path optimization.
//!
//! Nodes are actions (identified by the element they act on), edges are the
//! screens between them: an edge `u -> v` means the element of `v` was
//! available right after performing `u`. A synthetic root stands for the
//! app's landing state. Candidate action lists are replaced by the shortest
//! root path to their last action's node.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::macros::{CandidateSource, Macro, MacroAction, MacroCandidate};
use crate::trace::{Element, ElementPath, Screen, Trace};

const ROOT_KEY: &str = "#root";

/// Canonical node key built from `(resource_id, text, content_description,
/// class_name)` after text adoption. Fields are joined with `|`; `\` and `|`
/// inside fields are backslash-escaped, so distinct tuples never collide.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn root() -> Self {
        Self(ROOT_KEY.to_string())
    }

    pub fn from_parts(resource_id: &str, text: &str, content_description: &str, class_name: &str) -> Self {
        let parts = [resource_id, text, content_description, class_name];
        Self(parts.iter().map(|p| escape(p)).collect::<Vec<_>>().join("|"))
    }

    pub fn is_root(&self) -> bool {
        self.0 == ROOT_KEY
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c == '\\' || c == '|' {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

/// Text and content description an element is identified by.
///
/// Own values win; otherwise the pre-order, space-joined labels of all
/// descendants; otherwise the labels of the nearest labelled ancestor.
pub fn adopted_labels(screen: &Screen, path: &ElementPath) -> Option<(String, String)> {
    let el = screen.element(path)?;
    if el.has_label() {
        return Some((el.text.clone(), el.content_description.clone()));
    }
    let mut texts = Vec::new();
    let mut descs = Vec::new();
    for (p, d) in el.walk() {
        if p.as_slice().is_empty() {
            continue;
        }
        if !d.text.is_empty() {
            texts.push(d.text.as_str());
        }
        if !d.content_description.is_empty() {
            descs.push(d.content_description.as_str());
        }
    }
    if !texts.is_empty() || !descs.is_empty() {
        return Some((texts.join(" "), descs.join(" ")));
    }
    let mut cursor = path.parent();
    while let Some(p) = cursor {
        let anc = screen.element(&p)?;
        if anc.has_label() {
            return Some((anc.text.clone(), anc.content_description.clone()));
        }
        cursor = p.parent();
    }
    Some((String::new(), String::new()))
}

/// Node identity of the element at `path` on `screen`.
pub fn node_identity(screen: &Screen, path: &ElementPath) -> Option<NodeId> {
    let el: &Element = screen.element(path)?;
    let (text, desc) = adopted_labels(screen, path)?;
    Some(NodeId::from_parts(&el.resource_id, &text, &desc, &el.class_name))
}

/// Node identity of the element targeted by the last element-bearing action
/// among the first `steps` steps of `trace`.
pub fn last_target_node(trace: &Trace, steps: usize) -> Option<NodeId> {
    (0..steps.min(trace.steps.len())).rev().find_map(|i| {
        let (screen, path, _) = trace.action_element(i)?;
        node_identity(screen, path)
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Sample {
    // performed actions sort before merely observed ones
    observed_only: bool,
    action: MacroAction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub id: NodeId,
    sample: Option<Sample>,
    pub out_edges: BTreeSet<NodeId>,
}

impl GraphNode {
    fn new(id: NodeId) -> Self {
        Self { id, sample: None, out_edges: BTreeSet::new() }
    }

    /// Representative concrete action for replay. Performed actions are
    /// preferred over elements only seen on screen; ties go to the smallest
    /// action, which keeps merging independent of trace order.
    pub fn sample_action(&self) -> Option<&MacroAction> {
        self.sample.as_ref().map(|s| &s.action)
    }

    fn offer(&mut self, sample: Sample) {
        if self.sample.as_ref().is_none_or(|cur| sample < *cur) {
            self.sample = Some(sample);
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("traces from different apps cannot be merged ({0} vs {1})")]
    MixedApps(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionGraph {
    pub app_id: String,
    pub root: NodeId,
    nodes: BTreeMap<NodeId, GraphNode>,
}

impl InteractionGraph {
    pub fn new(app_id: impl Into<String>) -> Self {
        let root = NodeId::root();
        let mut nodes = BTreeMap::new();
        nodes.insert(root.clone(), GraphNode::new(root.clone()));
        Self { app_id: app_id.into(), root, nodes }
    }

    pub fn node(&self, id: &NodeId) -> Option<&GraphNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.values().map(|n| n.out_edges.len()).sum()
    }

    pub fn has_edge(&self, from: &NodeId, to: &NodeId) -> bool {
        self.nodes.get(from).is_some_and(|n| n.out_edges.contains(to))
    }

    pub fn edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> {
        self.nodes
            .values()
            .flat_map(|n| n.out_edges.iter().map(move |t| (&n.id, t)))
    }

    fn ensure(&mut self, id: &NodeId) -> &mut GraphNode {
        self.nodes
            .entry(id.clone())
            .or_insert_with(|| GraphNode::new(id.clone()))
    }

    /// Adds a node (if absent) and offers a sample action for it.
    pub fn add_node(&mut self, id: NodeId, action: MacroAction, performed: bool) {
        self.ensure(&id).offer(Sample { observed_only: !performed, action });
    }

    /// Adds `from -> to`, creating bare nodes as needed.
    pub fn add_edge(&mut self, from: &NodeId, to: &NodeId) {
        self.ensure(to);
        self.ensure(from).out_edges.insert(to.clone());
    }

    /// Unions `other` into `self`. Commutative and associative.
    pub fn merge(&mut self, other: InteractionGraph) -> Result<(), GraphError> {
        if self.app_id != other.app_id {
            return Err(GraphError::MixedApps(self.app_id.clone(), other.app_id));
        }
        for (id, node) in other.nodes {
            let mine = self.ensure(&id);
            mine.out_edges.extend(node.out_edges);
            if let Some(s) = node.sample {
                mine.offer(s);
            }
        }
        Ok(())
    }

    /// Partial graph of a single trace.
    pub fn from_trace(trace: &Trace) -> Self {
        let mut g = Self::new(trace.app_id.clone());
        let mut prev = g.root.clone();
        for (i, step) in trace.steps.iter().enumerate() {
            g.link_actionables(&prev, &step.screen);
            let Some(path) = &step.action.target else {
                // system actions have no element and leave the position unchanged
                continue;
            };
            let Some(id) = node_identity(&step.screen, path) else { continue };
            let action = MacroAction::from_trace_step(trace, i).expect("validated trace step");
            g.add_node(id.clone(), action, true);
            g.add_edge(&prev, &id);
            prev = id;
        }
        if let Some(screen) = &trace.final_screen {
            g.link_actionables(&prev, screen);
        }
        g
    }

    fn link_actionables(&mut self, prev: &NodeId, screen: &Screen) {
        for (path, el) in screen.actionable_elements() {
            let Some(id) = node_identity(screen, &path) else { continue };
            self.add_node(id.clone(), MacroAction::click(el.descriptor(), Some(screen.index)), false);
            self.add_edge(prev, &id);
        }
    }

    /// Shortest root path to `target` as node ids (root excluded).
    ///
    /// Among equally short paths, each node's predecessor is the smallest
    /// node id at the previous depth.
    pub fn shortest_node_path(&self, target: &NodeId) -> Option<Vec<NodeId>> {
        if !self.nodes.contains_key(target) {
            return None;
        }
        let mut dist: BTreeMap<&NodeId, usize> = BTreeMap::new();
        let mut queue = VecDeque::new();
        dist.insert(&self.root, 0);
        queue.push_back(&self.root);
        while let Some(u) = queue.pop_front() {
            let d = dist[u];
            for v in &self.nodes[u].out_edges {
                if !dist.contains_key(v) {
                    dist.insert(v, d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist.get(target)?;
        let mut path = vec![target.clone()];
        let mut cur = target;
        while cur != &self.root {
            let d = dist[cur];
            let parent = self
                .nodes
                .values()
                .filter(|n| dist.get(&n.id) == Some(&(d - 1)) && n.out_edges.contains(cur))
                .map(|n| &n.id)
                .min()
                .expect("BFS predecessor exists");
            if parent != &self.root {
                path.push(parent.clone());
            }
            cur = parent;
        }
        path.reverse();
        if target.is_root() {
            path.clear();
        }
        Some(path)
    }

    /// Renders the graph in DOT format, labelling nodes with their keys.
    pub fn to_dot(&self) -> String {
        let index: BTreeMap<&NodeId, usize> = self.nodes.keys().enumerate().map(|(i, k)| (k, i)).collect();
        let mut out = format!("digraph \"{}\" {{\n", dot_escape(&self.app_id));
        for (id, i) in &index {
            out.push_str(&format!("  n{i} [label=\"{}\"];\n", dot_escape(id.as_str())));
        }
        for (from, to) in self.edges() {
            out.push_str(&format!("  n{} -> n{};\n", index[from], index[to]));
        }
        out.push_str("}\n");
        out
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Merges all traces of one app into a single graph.
pub fn build_graph(traces: &[Trace]) -> Result<InteractionGraph, GraphError> {
    let Some(first) = traces.first() else {
        return Ok(InteractionGraph::new(""));
    };
    let mut g = InteractionGraph::new(first.app_id.clone());
    for t in traces {
        g.merge(InteractionGraph::from_trace(t))?;
    }
    Ok(g)
}

/// Sample actions along the shortest root path to `target`.
pub fn shortest_path(graph: &InteractionGraph, target: &NodeId) -> Option<Vec<MacroAction>> {
    let nodes = graph.shortest_node_path(target)?;
    nodes
        .iter()
        .map(|id| graph.node(id).and_then(|n| n.sample_action().cloned()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedCandidate {
    pub description: String,
    pub source: CandidateSource,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimizeOutput {
    pub macros: Vec<Macro>,
    pub dropped: Vec<DroppedCandidate>,
}

/// Replaces each candidate's trace prefix with the shortest root path to its
/// last action's node, followed by the predicted final action.
pub fn optimize(candidates: &[MacroCandidate], graph: &InteractionGraph) -> OptimizeOutput {
    let mut out = OptimizeOutput::default();
    for c in candidates {
        let mut actions = match &c.target {
            Some(target) => match shortest_path(graph, target) {
                Some(path) => path,
                None => {
                    out.dropped.push(DroppedCandidate {
                        description: c.description.clone(),
                        source: c.source.clone(),
                        reason: format!("target node {target} is unreachable from the root"),
                    });
                    continue;
                }
            },
            None => Vec::new(),
        };
        actions.extend(c.predicted_final_action.iter().cloned());
        if actions.is_empty() {
            out.dropped.push(DroppedCandidate {
                description: c.description.clone(),
                source: c.source.clone(),
                reason: "no actions".into(),
            });
            continue;
        }
        out.macros.push(Macro {
            app_id: graph.app_id.clone(),
            description: c.description.clone(),
            actions,
            parameters: c.parameters.clone(),
        });
    }
    out
}

/// Mean action counts before and after optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionStats {
    pub mean_pre: f64,
    pub mean_post: f64,
    pub percent_reduction: f64,
}

impl ReductionStats {
    pub fn from_means(mean_pre: f64, mean_post: f64) -> Option<Self> {
        if mean_pre.is_nan() || mean_pre <= 0.0 {
            return None;
        }
        Some(Self {
            mean_pre,
            mean_post,
            percent_reduction: 100.0 * (1.0 - mean_post / mean_pre),
        })
    }
}

pub fn reduction_stats(pre: &[MacroCandidate], post: &[Macro]) -> Option<ReductionStats> {
    if pre.is_empty() || post.is_empty() {
        return None;
    }
    let mean_pre = pre.iter().map(|c| c.action_count() as f64).sum::<f64>() / pre.len() as f64;
    let mean_post = post.iter().map(|m| m.actions.len() as f64).sum::<f64>() / post.len() as f64;
    ReductionStats::from_means(mean_pre, mean_post)
}
