use super::{KnowledgeGraph, Triple};
use crate::error::{Error, Result};
use crate::text::lower;

/// How a term is matched against the `"subject predicate object"` text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Case-insensitive substring ("diabet" matches "diabetic").
    #[default]
    Substring,
    /// Case-insensitive, bounded by non-alphanumeric bytes or the string ends.
    WholeWord,
}

/// Term-weighted relevance filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    core_terms: Vec<String>,
    secondary_terms: Vec<String>,
    pub core_weight: f64,
    pub secondary_weight: f64,
    pub min_score: f64,
    pub match_mode: MatchMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            core_terms: Vec::new(),
            secondary_terms: Vec::new(),
            core_weight: 2.0,
            secondary_weight: 1.0,
            min_score: 1.0,
            match_mode: MatchMode::Substring,
        }
    }
}

fn normalize_terms<I, S>(terms: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    terms
        .into_iter()
        .map(|t| lower(t.as_ref().trim()))
        .filter(|t| !t.is_empty())
        .collect()
}

impl FilterConfig {
    pub fn new<I, J, S, T>(core_terms: I, secondary_terms: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        Self {
            core_terms: normalize_terms(core_terms),
            secondary_terms: normalize_terms(secondary_terms),
            ..Self::default()
        }
    }

    pub fn with_weights(mut self, core: f64, secondary: f64) -> Result<Self> {
        if !(core >= 0.0 && secondary >= 0.0) {
            return Err(Error::Config("term weights must be non-negative".into()));
        }
        self.core_weight = core;
        self.secondary_weight = secondary;
        Ok(self)
    }

    pub fn with_min_score(mut self, min_score: f64) -> Self {
        self.min_score = min_score;
        self
    }

    pub fn with_match_mode(mut self, mode: MatchMode) -> Self {
        self.match_mode = mode;
        self
    }

    pub fn core_terms(&self) -> &[String] {
        &self.core_terms
    }

    pub fn secondary_terms(&self) -> &[String] {
        &self.secondary_terms
    }

    fn matches(&self, haystack: &str, term: &str) -> bool {
        match self.match_mode {
            MatchMode::Substring => haystack.contains(term),
            MatchMode::WholeWord => {
                let bytes = haystack.as_bytes();
                haystack.match_indices(term).any(|(start, _)| {
                    let end = start + term.len();
                    let left = start == 0 || !bytes[start - 1].is_ascii_alphanumeric();
                    let right = end == bytes.len() || !bytes[end].is_ascii_alphanumeric();
                    left && right
                })
            }
        }
    }
}

/// Weighted count of distinct configured terms found in the triple's text.
pub fn score_triple(triple: &Triple, cfg: &FilterConfig) -> f64 {
    let text = lower(&triple.sentence());
    let count = |terms: &[String]| terms.iter().filter(|t| cfg.matches(&text, t)).count() as f64;
    cfg.core_weight * count(&cfg.core_terms) + cfg.secondary_weight * count(&cfg.secondary_terms)
}

/// Keeps the triples scoring at least `cfg.min_score`, in order.
pub fn filter_graph(kg: &KnowledgeGraph, cfg: &FilterConfig) -> Result<KnowledgeGraph> {
    let kept: Vec<usize> = kg
        .triples()
        .iter()
        .filter(|t| score_triple(t, cfg) >= cfg.min_score)
        .map(|t| t.index)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyGraph(format!(
            "no triple reaches min_score {}",
            cfg.min_score
        )));
    }
    Ok(kg.subgraph(kept))
}
