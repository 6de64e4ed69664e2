//! Description quality metrics and baselines.
//!
//! ROUGE-L F-measure (beta = 1) and METEOR restricted to exact unigram
//! matches (alpha 0.9, beta 3, gamma 0.5; no stemming or synonyms). Each trace
//! is scored by its best-matching extracted description.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::Trace;

pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_BETA: f64 = 3.0;
pub const METEOR_GAMMA: f64 = 0.5;
/// Longest hypothesis whose alignment is searched exhaustively.
pub const EXHAUSTIVE_ALIGNMENT_LIMIT: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("no evaluation pairs")]
    NoPairs,
    #[error("pair {0} has an empty ground truth")]
    EmptyGroundTruth(String),
    #[error("repeats must be at least 1")]
    ZeroRepeats,
    #[error("random reassignment needs at least two traces")]
    TooFewTraces,
    #[error("invalid evaluation input: {0}")]
    Malformed(String),
}

/// Lowercase tokens split on non-alphanumerics.
pub fn tokenize(text: &str) -> Vec<String> {
    crate::dedup::tokenize(text)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l_f(reference: &str, hypothesis: &str) -> f64 {
    let r = tokenize(reference);
    let h = tokenize(hypothesis);
    let lcs = lcs_len(&r, &h);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / h.len() as f64;
    let rec = lcs as f64 / r.len() as f64;
    2.0 * p * rec / (p + rec)
}

/// Size of the maximal exact alignment and the fewest chunks it can be split into.
fn align(r: &[String], h: &[String]) -> (usize, usize) {
    let mut need: HashMap<&str, usize> = HashMap::new();
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for t in r {
        *ref_counts.entry(t).or_default() += 1;
    }
    let mut hyp_counts: HashMap<&str, usize> = HashMap::new();
    for t in h {
        *hyp_counts.entry(t).or_default() += 1;
    }
    for (t, &c) in &hyp_counts {
        let m = c.min(*ref_counts.get(t).unwrap_or(&0));
        if m > 0 {
            need.insert(t, m);
        }
    }
    let m: usize = need.values().sum();
    if m == 0 {
        return (0, 0);
    }
    let chunks = if h.len() <= EXHAUSTIVE_ALIGNMENT_LIMIT && r.len() <= 128 {
        let mut search = ChunkSearch { r, h, memo: HashMap::new() };
        search.min_chunks(0, 0, None, &mut need)
    } else {
        greedy_chunks(r, h, &mut need)
    };
    (m, chunks)
}

struct ChunkSearch<'a> {
    r: &'a [String],
    h: &'a [String],
    memo: HashMap<(usize, u128, Option<usize>), usize>,
}

impl<'a> ChunkSearch<'a> {
    /// Fewest chunks for hyp[i..] given used ref positions and the ref
    /// position matched by hyp[i-1]. `need` holds matches still owed per token.
    fn min_chunks(&mut self, i: usize, used: u128, last: Option<usize>, need: &mut HashMap<&'a str, usize>) -> usize {
        if i == self.h.len() {
            return 0;
        }
        let key = (i, used, last);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let tok = self.h[i].as_str();
        let owed = need.get(tok).copied().unwrap_or(0);
        let later = self.h[i + 1..].iter().filter(|t| t.as_str() == tok).count();
        let mut best = usize::MAX;
        if owed <= later {
            best = self.min_chunks(i + 1, used, None, need);
        }
        if owed > 0 {
            need.insert(tok, owed - 1);
            for j in 0..self.r.len() {
                if self.r[j] == tok && used & (1u128 << j) == 0 {
                    let opens = usize::from(last.is_none_or(|l| l + 1 != j));
                    let rest = self.min_chunks(i + 1, used | (1u128 << j), Some(j), need);
                    best = best.min(opens + rest);
                }
            }
            need.insert(tok, owed);
        }
        self.memo.insert(key, best);
        best
    }
}

/// Left to right; extends the current chunk when possible, else takes the
/// earliest free reference occurrence.
fn greedy_chunks<'a>(r: &[String], h: &'a [String], need: &mut HashMap<&'a str, usize>) -> usize {
    let mut used = vec![false; r.len()];
    let mut last: Option<usize> = None;
    let mut chunks = 0;
    for t in h {
        let owed = need.get(t.as_str()).copied().unwrap_or(0);
        if owed == 0 {
            last = None;
            continue;
        }
        let next = last
            .map(|l| l + 1)
            .filter(|&j| j < r.len() && !used[j] && r[j] == *t)
            .or_else(|| (0..r.len()).find(|&j| !used[j] && r[j] == *t));
        match next {
            Some(j) => {
                if last.is_none_or(|l| l + 1 != j) {
                    chunks += 1;
                }
                used[j] = true;
                need.insert(t.as_str(), owed - 1);
                last = Some(j);
            }
            None => last = None,
        }
    }
    chunks
}

pub fn meteor_exact(reference: &str, hypothesis: &str) -> f64 {
    let r = tokenize(reference);
    let h = tokenize(hypothesis);
    let (m, chunks) = align(&r, &h);
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / h.len() as f64;
    let rec = m as f64 / r.len() as f64;
    let f_mean = p * rec / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * rec);
    let penalty = METEOR_GAMMA * (chunks as f64 / m as f64).powf(METEOR_BETA);
    f_mean * (1.0 - penalty)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    #[serde(default)]
    pub trace_id: String,
    pub ground_truth: String,
    #[serde(default)]
    pub extracted: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceScore {
    pub rouge_l: f64,
    pub meteor: f64,
    /// Index of the best extracted description per metric.
    pub best_rouge_index: Option<usize>,
    pub best_meteor_index: Option<usize>,
}

fn best_of(scores: impl Iterator<Item = f64>) -> (f64, Option<usize>) {
    scores.enumerate().fold((0.0, None), |(bs, bi), (i, s)| {
        if bi.is_none() || s > bs {
            (s, Some(i))
        } else {
            (bs, bi)
        }
    })
}

/// Independent maxima of each metric over the extracted descriptions.
pub fn trace_score(pair: &EvalPair) -> TraceScore {
    let (rouge_l, best_rouge_index) = best_of(pair.extracted.iter().map(|e| rouge_l_f(&pair.ground_truth, e)));
    let (meteor, best_meteor_index) = best_of(pair.extracted.iter().map(|e| meteor_exact(&pair.ground_truth, e)));
    TraceScore { rouge_l, meteor, best_rouge_index, best_meteor_index }
}

/// Every non-empty text and content description in the trace, first
/// occurrence order.
pub fn baseline_element_text(trace: &Trace) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for screen in trace.screens() {
        for (_, el) in screen.root.walk() {
            for s in [&el.text, &el.content_description] {
                if !s.is_empty() && !out.contains(s) {
                    out.push(s.clone());
                }
            }
        }
    }
    out
}

/// Gives every trace another trace's descriptions, never its own.
pub fn baseline_random_trace(
    extractions: &BTreeMap<String, Vec<String>>,
    seed: u64,
) -> Result<BTreeMap<String, Vec<String>>, EvalError> {
    let n = extractions.len();
    if n < 2 {
        return Err(EvalError::TooFewTraces);
    }
    let keys: Vec<&String> = extractions.keys().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(&mut rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            break;
        }
    }
    Ok(keys
        .iter()
        .zip(&perm)
        .map(|(k, &p)| ((*k).clone(), extractions[keys[p]].clone()))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub trace_id: String,
    #[serde(flatten)]
    pub score: TraceScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub repeats: usize,
    pub mean_rouge_l: f64,
    pub std_rouge_l: f64,
    pub mean_meteor: f64,
    pub std_meteor: f64,
    /// Per-repeat dataset means as (rouge_l, meteor).
    pub runs: Vec<(f64, f64)>,
    /// Per-pair scores of the first repeat.
    pub pairs: Vec<PairResult>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn validate(pairs: &[EvalPair]) -> Result<(), EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::NoPairs);
    }
    if let Some(p) = pairs.iter().find(|p| p.ground_truth.trim().is_empty()) {
        return Err(EvalError::EmptyGroundTruth(p.trace_id.clone()));
    }
    Ok(())
}

/// Scores the same pairs `repeats` times. With a deterministic extraction
/// source every repeat is identical and the deviation is zero.
pub fn dataset_eval(pairs: &[EvalPair], repeats: usize) -> Result<EvalResult, EvalError> {
    if repeats == 0 {
        return Err(EvalError::ZeroRepeats);
    }
    dataset_eval_with(repeats, |_| pairs.to_vec())
}

/// Scores `repeats` runs whose pairs come from `run(r)`; the standard
/// deviation is the population deviation across runs.
pub fn dataset_eval_with<F>(repeats: usize, mut run: F) -> Result<EvalResult, EvalError>
where
    F: FnMut(usize) -> Vec<EvalPair>,
{
    if repeats == 0 {
        return Err(EvalError::ZeroRepeats);
    }
    let mut runs = Vec::with_capacity(repeats);
    let mut first = Vec::new();
    for r in 0..repeats {
        let pairs = run(r);
        validate(&pairs)?;
        let scores: Vec<TraceScore> = pairs.iter().map(trace_score).collect();
        let n = scores.len() as f64;
        runs.push((
            scores.iter().map(|s| s.rouge_l).sum::<f64>() / n,
            scores.iter().map(|s| s.meteor).sum::<f64>() / n,
        ));
        if r == 0 {
            first = pairs
                .iter()
                .zip(scores)
                .map(|(p, score)| PairResult { trace_id: p.trace_id.clone(), score })
                .collect();
        }
    }
    let (mean_rouge_l, std_rouge_l) = mean_std(&runs.iter().map(|r| r.0).collect::<Vec<_>>());
    let (mean_meteor, std_meteor) = mean_std(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    Ok(EvalResult { repeats, mean_rouge_l, std_rouge_l, mean_meteor, std_meteor, runs, pairs: first })
}
