//! Legend label to cell matching.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::extraction::{templates, ExtractionError, Extractor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub label: String,
    /// `None` when the label matched no cell.
    pub cell: Option<String>,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    Fallback,
    Gateway,
}

const STOPWORDS: [&str; 9] = ["in", "with", "the", "and", "of", "a", "cell", "cells", "based"];

/// Case-folded tokens with hyphens and separators stripped and digits split
/// from letters, so "1M", "1 M" and "1-M" agree.
pub fn match_tokens(s: &str) -> Vec<String> {
    let mut spaced = String::new();
    let mut prev: Option<char> = None;
    for c in s.chars().flat_map(char::to_lowercase) {
        let c = match c {
            '₀'..='₉' => char::from_digit(c as u32 - '₀' as u32, 10).unwrap(),
            c if c.is_alphanumeric() || c == '.' => c,
            _ => ' ',
        };
        if let Some(p) = prev {
            let boundary = (p.is_ascii_digit() && c.is_alphabetic()) || (p.is_alphabetic() && c.is_ascii_digit());
            if boundary {
                spaced.push(' ');
            }
        }
        spaced.push(c);
        prev = Some(c);
    }
    let mut seen = BTreeSet::new();
    spaced
        .split_whitespace()
        .map(|t| t.trim_matches('.'))
        .filter(|t| !t.is_empty() && !STOPWORDS.contains(t))
        .filter(|t| seen.insert(t.to_string()))
        .map(str::to_string)
        .collect()
}

fn token_similarity(a: &str, b: &str) -> f64 {
    if a == b {
        return 1.0;
    }
    let numeric = |t: &str| t.chars().all(|c| c.is_ascii_digit() || c == '.');
    if numeric(a) || numeric(b) || a.chars().count() < 3 || b.chars().count() < 3 {
        return 0.0;
    }
    if a.starts_with(b) || b.starts_with(a) {
        return 0.9;
    }
    let jw = strsim::jaro_winkler(a, b);
    if jw >= 0.88 {
        jw
    } else {
        0.0
    }
}

/// Dice coefficient over tokens where near-identical tokens count
/// fractionally; token pairs are aligned greedily, best first.
pub fn soft_dice(a: &str, b: &str) -> f64 {
    let (ta, tb) = (match_tokens(a), match_tokens(b));
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, x) in ta.iter().enumerate() {
        for (j, y) in tb.iter().enumerate() {
            let s = token_similarity(x, y);
            if s > 0.0 {
                pairs.push((s, i, j));
            }
        }
    }
    pairs.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let (mut used_a, mut used_b) = (vec![false; ta.len()], vec![false; tb.len()]);
    let mut total = 0.0;
    for (s, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            total += s;
        }
    }
    2.0 * total / (ta.len() + tb.len()) as f64
}

/// Greedy one-to-one assignment by descending similarity; pairs below
/// `threshold` stay unmatched. Output follows the order of `labels`.
pub fn match_labels_fallback(cells: &[String], labels: &[String], threshold: f64) -> Vec<LabelAssignment> {
    let mut scored: Vec<(f64, usize, usize)> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        for (j, c) in cells.iter().enumerate() {
            scored.push((soft_dice(l, c), i, j));
        }
    }
    scored.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut out: Vec<LabelAssignment> =
        labels.iter().map(|l| LabelAssignment { label: l.clone(), cell: None, score: 0.0 }).collect();
    let mut cell_used = vec![false; cells.len()];
    for (s, i, j) in scored {
        if s < threshold {
            break;
        }
        if out[i].cell.is_none() && !cell_used[j] {
            out[i].cell = Some(cells[j].clone());
            out[i].score = s;
            cell_used[j] = true;
        }
    }
    for a in out.iter_mut().filter(|a| a.cell.is_none()) {
        a.score = cells.iter().map(|c| soft_dice(&a.label, c)).fold(0.0, f64::max);
    }
    out
}

/// Asks the model; answers naming unknown labels or cells, or reusing a
/// cell, are discarded so the result stays injective.
pub fn match_labels_gateway(
    extractor: &Extractor,
    subject: &str,
    cells: &[String],
    labels: &[String],
) -> Result<Vec<LabelAssignment>, ExtractionError> {
    let t = extractor.templates.get(templates::LABEL_MATCHING);
    let schema = templates::response_schema(&t.output_schema).expect("registered schema");
    let slots =
        [("labels".to_string(), labels.join(", ")), ("cells".to_string(), cells.join(", "))].into_iter().collect();
    let prompt = t.prompt(subject, &slots)?;
    let v = extractor.gateway.complete_structured(&prompt, &schema, extractor.retries)?.value;
    let mut out: Vec<LabelAssignment> =
        labels.iter().map(|l| LabelAssignment { label: l.clone(), cell: None, score: 0.0 }).collect();
    let mut used = BTreeSet::new();
    for a in v["assignments"].as_array().into_iter().flatten() {
        let (Some(label), Some(cell)) = (a["label"].as_str(), a.get("cell").and_then(Value::as_str)) else {
            continue;
        };
        let Some(slot) = out.iter_mut().find(|o| o.label == label && o.cell.is_none()) else {
            log::warn!("{subject}: model assigned unknown or repeated label {label:?}");
            continue;
        };
        if !cells.iter().any(|c| c == cell) || !used.insert(cell.to_string()) {
            log::warn!("{subject}: model assigned unknown or reused cell {cell:?}");
            continue;
        }
        slot.cell = Some(cell.to_string());
        slot.score = 1.0;
    }
    Ok(out)
}
