//! Candidate filtering and near-duplicate grouping.
//!
//! Descriptions made only of generic UI words are dropped, the rest are
//! grouped incrementally by embedding cosine similarity, and one member of
//! each group is sampled. Candidates whose actions look like navigation away
//! from a task (back, cancel, ...) are dropped once their actions are final.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::macros::MacroCandidate;

const COMMON_PHRASES: &str = include_str!("../data/common_phrases.txt");
const NON_CONTENT_WORDS: &str = include_str!("../data/non_content_words.txt");
const ACTION_KEYWORDS: &str = include_str!("../data/action_keywords.txt");

fn word_list(data: &'static str) -> Vec<&'static str> {
    data.lines().filter(|l| !l.is_empty()).collect()
}

/// Generic words that do not make a description specific on their own.
pub fn common_phrases() -> Vec<&'static str> {
    word_list(COMMON_PHRASES)
}

/// Words removed before the generic-word check.
pub fn non_content_words() -> Vec<&'static str> {
    word_list(NON_CONTENT_WORDS)
}

/// Substrings marking an action as navigating back or away.
pub fn action_keywords() -> Vec<&'static str> {
    word_list(ACTION_KEYWORDS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Keep,
    Drop,
}

/// Lowercase alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn filter_description(description: &str) -> Verdict {
    let non_content = non_content_words();
    let common = common_phrases();
    let content: Vec<String> = tokenize(description)
        .into_iter()
        .filter(|t| !non_content.contains(&t.as_str()))
        .collect();
    if content.iter().all(|t| common.contains(&t.as_str())) {
        Verdict::Drop
    } else {
        Verdict::Keep
    }
}

pub fn filter_actions(candidate: &MacroCandidate) -> Verdict {
    let keywords = action_keywords();
    let hit = candidate.all_actions().filter_map(|a| a.element.as_ref()).any(|e| {
        [&e.text, &e.content_description, &e.resource_id]
            .iter()
            .map(|s| s.to_lowercase())
            .any(|s| keywords.iter().any(|k| s.contains(k)))
    });
    if hit {
        Verdict::Drop
    } else {
        Verdict::Keep
    }
}

/// Maps text to a fixed-length vector.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Vec<f64>;
    fn dimension(&self) -> usize;
}

/// Hashed bag-of-tokens counts, L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BagOfTokensEmbedder {
    pub dimension: usize,
}

impl Default for BagOfTokensEmbedder {
    fn default() -> Self {
        Self { dimension: 256 }
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Embedder for BagOfTokensEmbedder {
    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        for t in tokenize(text) {
            v[(fnv1a(&t) % self.dimension as u64) as usize] += 1.0;
        }
        normalize(&mut v);
        v
    }

    fn dimension(&self) -> usize {
        self.dimension
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    /// Index of the member that founded the group.
    pub representative: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityGroups {
    pub groups: Vec<Group>,
    pub threshold: f64,
}

/// Single pass in input order: each description joins the group whose
/// normalized centroid is most similar, if that similarity reaches
/// `threshold`; otherwise it starts a new group. Output depends on input order.
pub fn group_by_similarity(descriptions: &[String], embedder: &dyn Embedder, threshold: f64) -> SimilarityGroups {
    let mut groups: Vec<Group> = Vec::new();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    let mut centroids: Vec<Vec<f64>> = Vec::new();
    for (i, d) in descriptions.iter().enumerate() {
        let v = embedder.embed(d);
        let best = centroids
            .iter()
            .enumerate()
            .map(|(g, c)| (g, cosine(&v, c)))
            .fold(None::<(usize, f64)>, |best, (g, s)| match best {
                Some((_, bs)) if bs >= s => best,
                _ => Some((g, s)),
            });
        match best {
            Some((g, s)) if s >= threshold => {
                groups[g].members.push(i);
                sums[g].iter_mut().zip(&v).for_each(|(a, b)| *a += b);
                let mut c = sums[g].clone();
                normalize(&mut c);
                centroids[g] = c;
            }
            _ => {
                groups.push(Group { representative: i, members: vec![i] });
                sums.push(v.clone());
                centroids.push(v);
            }
        }
    }
    SimilarityGroups { groups, threshold }
}

/// One uniformly sampled member per group, in group order.
pub fn sample_representatives(groups: &SimilarityGroups, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups
        .groups
        .iter()
        .map(|g| g.members[rng.gen_range(0..g.members.len())])
        .collect()
}
