//! Evaluation formulas: surrogate fidelity, Pearson correlation, Jaccard
//! index, ROC-AUC, and the composite answer-similarity score.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::embedding::Embedder;
use crate::error::{Error, Result};
use crate::similarity::{cosine, map_cosine};
use crate::text::tokenize;

/// How well surrogate predictions `g` track observed responses `f`.
/// Undefined ratios (zero variance, too few samples) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    pub r2: Option<f64>,
    pub mean_l1: f64,
    pub mean_l2: f64,
    pub weighted_l1: f64,
    pub weighted_l2: f64,
    pub r2w: Option<f64>,
    pub adj_r2w: Option<f64>,
    pub mean_loss_lm: f64,
    /// Number of perturbation samples.
    pub n_p: usize,
    /// Number of predictors.
    pub n_s: usize,
}

/// Computes every fidelity metric.
///
/// * `r2 = 1 - Σ(f-g)² / Σ(f-f̄)²`
/// * `mean_l1`, `mean_l2`: mean absolute and squared residuals
/// * `weighted_l1`, `weighted_l2`: the same with each term scaled by its weight, divided by `n_p`
/// * `r2w = 1 - Σ(f-g)² / Σ(f-f̄_w)²` where `f̄_w` is the weight-averaged `f`
/// * `adj_r2w = 1 - (1 - r2w)(n_p - 1)/(n_p - n_s - 1)`, only when `n_p > n_s + 1`
/// * `mean_loss_lm = |mean(f) - mean(g)|`, taken as `|Σ(f-g)| / n_p`
pub fn fidelity(f: &[f64], g: &[f64], weights: &[f64], n_s: usize) -> Result<FidelityReport> {
    let n = f.len();
    if g.len() != n || weights.len() != n {
        return Err(Error::Shape(format!(
            "fidelity inputs differ in length: {} / {} / {}",
            n,
            g.len(),
            weights.len()
        )));
    }
    if n < 2 {
        return Err(Error::Shape("fidelity needs at least two samples".into()));
    }
    if f.iter().chain(g).chain(weights).any(|x| !x.is_finite()) {
        return Err(Error::Contract("non-finite fidelity input".into()));
    }
    if weights.iter().any(|&w| w <= 0.0) {
        return Err(Error::Contract("fidelity weights must be positive".into()));
    }
    let np = n as f64;
    let mean_f = f.iter().sum::<f64>() / np;
    let mean_fw = f.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / weights.iter().sum::<f64>();

    let mut sse = 0.0;
    let (mut l1, mut wl1, mut wl2) = (0.0, 0.0, 0.0);
    let (mut sst, mut sst_w) = (0.0, 0.0);
    for i in 0..n {
        let r = f[i] - g[i];
        sse += r * r;
        l1 += r.abs();
        wl1 += r.abs() * weights[i];
        wl2 += r * r * weights[i];
        sst += (f[i] - mean_f).powi(2);
        sst_w += (f[i] - mean_fw).powi(2);
    }
    let ratio = |den: f64| (den > 0.0).then(|| 1.0 - sse / den);
    let r2w = ratio(sst_w);
    let adj_r2w = match r2w {
        Some(r) if n > n_s + 1 => Some(1.0 - (1.0 - r) * (np - 1.0) / (np - n_s as f64 - 1.0)),
        _ => None,
    };
    Ok(FidelityReport {
        r2: ratio(sst),
        mean_l1: l1 / np,
        mean_l2: sse / np,
        weighted_l1: wl1 / np,
        weighted_l2: wl2 / np,
        r2w,
        adj_r2w,
        mean_loss_lm: f.iter().zip(g).map(|(a, b)| a - b).sum::<f64>().abs() / np,
        n_p: n,
        n_s,
    })
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape("pearson inputs differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::Shape("pearson needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with a zero-variance input".into()));
    }
    let prod = sxx * syy;
    let denom = if prod.is_finite() && prod >= f64::MIN_POSITIVE {
        prod.sqrt()
    } else {
        sxx.sqrt() * syy.sqrt()
    };
    Ok((sxy / denom).clamp(-1.0, 1.0))
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets counting as identical (1.0).
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Mann–Whitney counts: `(2·concordant + ties, 2·positives·negatives)`.
/// Their ratio is the AUC; both are exact integers.
pub fn roc_auc_counts(scores: &[f64], labels: &[bool]) -> Result<(u128, u128)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Contract("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count() as u128;
    let negatives = labels.len() as u128 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Undefined("AUC needs both positive and negative labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut numerator: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        numerator += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        i = j;
    }
    Ok((numerator, 2 * positives * negatives))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (num, den) = roc_auc_counts(scores, labels)?;
    Ok(num as f64 / den as f64)
}

/// Population standard deviation (divides by `n`). Exactly zero for fewer
/// than two values or when all values are identical.
pub fn population_std(values: &[f64]) -> f64 {
    if values.len() < 2 || values.iter().all(|v| *v == values[0]) {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityClass {
    VeryLow,
    Low,
    Medium,
    High,
}

/// `< 0.3` very low, `[0.3, 0.5)` low, `[0.5, 0.7)` medium, `>= 0.7` high.
pub fn classify(composite: f64) -> SimilarityClass {
    if composite < 0.3 {
        SimilarityClass::VeryLow
    } else if composite < 0.5 {
        SimilarityClass::Low
    } else if composite < 0.7 {
        SimilarityClass::Medium
    } else {
        SimilarityClass::High
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeSimilarityResult {
    pub semantic: f64,
    pub concept_overlap: f64,
    pub content: f64,
    pub composite: f64,
    pub classification: SimilarityClass,
}

const STOPWORDS: &[&str] = &[
    "about", "above", "after", "again", "against", "among", "because", "before", "being", "below",
    "between", "cannot", "could", "doing", "during", "every", "further", "having", "however",
    "itself", "might", "other", "ought", "should", "since", "their", "theirs", "there", "these",
    "those", "through", "under", "until", "where", "which", "while", "would", "yours", "yourself",
];

/// Lowercased tokens of five or more characters that are not stopwords.
pub fn key_concepts(text: &str) -> BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.len() >= 5 && !STOPWORDS.contains(&t.as_str()))
        .collect()
}

fn term_frequency_cosine(a: &[String], b: &[String]) -> f64 {
    fn count(tokens: &[String]) -> BTreeMap<&str, f64> {
        let mut tf: BTreeMap<&str, f64> = BTreeMap::new();
        for t in tokens {
            *tf.entry(t.as_str()).or_default() += 1.0;
        }
        tf
    }
    let (ta, tb) = (count(a), count(b));
    let dot: f64 = ta.iter().filter_map(|(k, x)| tb.get(k).map(|y| x * y)).sum();
    let norm = |tf: &BTreeMap<&str, f64>| tf.values().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(&ta), norm(&tb));
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

/// Equal-weight mean of mapped embedding cosine, key-concept Jaccard and
/// mapped term-frequency cosine. A text without tokens scores 0 everywhere.
pub fn composite_similarity(a: &str, b: &str, embedder: &Embedder) -> Result<CompositeSimilarityResult> {
    let (tokens_a, tokens_b) = (tokenize(a), tokenize(b));
    if tokens_a.is_empty() || tokens_b.is_empty() {
        return Ok(CompositeSimilarityResult {
            semantic: 0.0,
            concept_overlap: 0.0,
            content: 0.0,
            composite: 0.0,
            classification: SimilarityClass::VeryLow,
        });
    }
    let (ea, eb) = (embedder.embed_text(a)?, embedder.embed_text(b)?);
    let semantic = map_cosine(cosine(ea.values(), eb.values())?);
    let concept_overlap = jaccard(&key_concepts(a), &key_concepts(b));
    let content = map_cosine(term_frequency_cosine(&tokens_a, &tokens_b));
    let composite = (semantic + concept_overlap + content) / 3.0;
    Ok(CompositeSimilarityResult {
        semantic,
        concept_overlap,
        content,
        composite,
        classification: classify(composite),
    })
}
