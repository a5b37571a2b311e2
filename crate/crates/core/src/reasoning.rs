//! Reasoning aids: entity-linked triple chains for prompting, and the
//! rephrase, filter and aggregate answering scheme.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::{Embedder, EmbedderConfig, EmbeddingVector};
use crate::error::{Error, Result};
use crate::generator::{build_prompt, Answer, Generator, GeneratorConfig, REFUSAL};
use crate::kg::{KnowledgeGraph, Triple};
use crate::similarity::{cosine, map_cosine};
use crate::text::lower;

pub const SEED_VERBS: [&str; 4] = ["bind", "relate", "associate", "interact"];
pub const DEFAULT_MAX_DEPTH: usize = 4;
pub const PROMPT_INSTRUCTION: &str = "Answer using only the facts above.";

fn overlaps(span: (usize, usize), taken: &[(usize, usize)]) -> bool {
    taken.iter().any(|&(a, b)| span.0 < b && a < span.1)
}

/// Entities and relations mentioned in `question`.
///
/// Entities are matched case-insensitively, longest label first; a matched
/// span cannot be reused by a shorter label. They are returned in order of
/// first appearance in the graph (triple order, subject before object).
/// Relations are graph labels whose lowercased form, underscores read as
/// spaces, occurs in the question, followed by any seed verbs present.
pub fn extract_entities_relations(question: &str, kg: &KnowledgeGraph) -> (Vec<String>, Vec<String>) {
    let q = lower(question);
    let mut candidates: Vec<&str> = kg.entities().iter().map(|e| e.as_str()).collect();
    candidates.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));

    let mut taken: Vec<(usize, usize)> = Vec::new();
    let mut found: BTreeSet<&str> = BTreeSet::new();
    for label in candidates {
        let needle = lower(label);
        let mut from = 0;
        while let Some(pos) = q[from..].find(&needle) {
            let span = (from + pos, from + pos + needle.len());
            if !overlaps(span, &taken) {
                taken.push(span);
                found.insert(label);
                break;
            }
            from += pos + q[from + pos..].chars().next().map_or(1, char::len_utf8);
        }
    }

    let mut entities = Vec::with_capacity(found.len());
    for t in kg.triples() {
        for e in [t.subject.as_str(), t.object.as_str()] {
            if found.remove(e) {
                entities.push(e.to_owned());
            }
        }
    }

    let mut relations: Vec<String> = kg
        .relations()
        .iter()
        .filter(|r| q.contains(&lower(r.as_str()).replace('_', " ")))
        .map(|r| r.to_string())
        .collect();
    for verb in SEED_VERBS {
        if q.contains(verb) && !relations.iter().any(|r| r == verb) {
            relations.push(verb.to_owned());
        }
    }
    (entities, relations)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReasoningChain {
    #[serde(serialize_with = "serialize_triples")]
    pub triples: Vec<Triple>,
    /// One `subject → [predicate] → object` line per step.
    pub rendered_lines: Vec<String>,
}

fn serialize_triples<S: serde::Serializer>(triples: &[Triple], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(triples.len()))?;
    for t in triples {
        seq.serialize_element(&[t.subject.as_str(), t.predicate.as_str(), t.object.as_str()])?;
    }
    seq.end()
}

pub fn render_step(t: &Triple) -> String {
    format!("{} → [{}] → {}", t.subject, lower(t.predicate.as_str()).replace('_', " "), t.object)
}

impl ReasoningChain {
    fn new(triples: Vec<Triple>) -> Self {
        let rendered_lines = triples.iter().map(render_step).collect();
        Self {
            triples,
            rendered_lines,
        }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Checks that every step is a graph triple and consecutive steps share
    /// an entity.
    pub fn validate(&self, kg: &KnowledgeGraph) -> Result<()> {
        for t in &self.triples {
            if !kg.contains(t.subject.as_str(), t.predicate.as_str(), t.object.as_str()) {
                return Err(Error::Contract(format!("chain step {t} is not in the graph")));
            }
        }
        for pair in self.triples.windows(2) {
            if !(pair[1].touches(pair[0].subject.as_str()) || pair[1].touches(pair[0].object.as_str())) {
                return Err(Error::Contract(format!(
                    "chain steps {} and {} share no entity",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(())
    }
}

/// Grows a chain from the first extracted entity. Each step takes the
/// lowest-index unused triple at the chain tail whose far end is another
/// extracted entity not yet on the chain; failing that, the lowest-index
/// unused triple at the tail reaching a new entity.
pub fn generate_chain_of_thought(kg: &KnowledgeGraph, question: &str, max_depth: usize) -> ReasoningChain {
    let (entities, _) = extract_entities_relations(question, kg);
    let Some(start) = entities.first() else {
        return ReasoningChain::new(Vec::new());
    };
    let wanted: BTreeSet<&str> = entities.iter().map(String::as_str).collect();
    let mut visited: BTreeSet<&str> = BTreeSet::from([start.as_str()]);
    let mut used = vec![false; kg.len()];
    let mut tail = start.as_str();
    let mut steps = Vec::new();

    while steps.len() < max_depth {
        let candidates: Vec<(usize, &str)> = kg
            .triples()
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .filter_map(|(i, t)| t.other_end(tail).map(|e| (i, e.as_str())))
            .filter(|(_, e)| !visited.contains(e))
            .collect();
        let pick = candidates
            .iter()
            .find(|(_, e)| wanted.contains(e))
            .or_else(|| candidates.first());
        let Some(&(i, next)) = pick else { break };
        used[i] = true;
        visited.insert(next);
        steps.push(kg.triples()[i].clone());
        tail = next;
    }
    ReasoningChain::new(steps)
}

/// Numbered `Step i:` lines followed by the grounding instruction.
pub fn format_triples_for_prompt(chain: &ReasoningChain) -> String {
    let mut lines: Vec<String> = chain
        .rendered_lines
        .iter()
        .enumerate()
        .map(|(i, l)| format!("Step {}: {l}", i + 1))
        .collect();
    lines.push(PROMPT_INSTRUCTION.to_owned());
    lines.join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrePromptConfig {
    pub num_rephrases: usize,
    /// Matched case-insensitively as substrings.
    pub refusal_patterns: Vec<String>,
}

impl Default for PrePromptConfig {
    fn default() -> Self {
        Self {
            num_rephrases: 5,
            refusal_patterns: ["i do not know", "i don't know", "not enough information"]
                .map(String::from)
                .to_vec(),
        }
    }
}

impl PrePromptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_rephrases == 0 {
            return Err(Error::Config("num_rephrases must be positive".into()));
        }
        if self.refusal_patterns.is_empty() || self.refusal_patterns.iter().any(|p| p.trim().is_empty()) {
            return Err(Error::Config("refusal patterns must be non-empty".into()));
        }
        Ok(())
    }

    pub fn is_refusal(&self, text: &str) -> bool {
        let t = text.to_lowercase();
        t.trim().is_empty() || self.refusal_patterns.iter().any(|p| t.contains(&p.to_lowercase()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeptAnswer {
    pub variant: usize,
    pub question: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrePromptOutcome {
    pub final_answer: Answer,
    /// Variant index of the chosen answer, `None` when every variant refused.
    pub chosen_variant: Option<usize>,
    pub kept: Vec<KeptAnswer>,
    pub dropped: usize,
    pub variants: Vec<String>,
}

/// Index of the element with the highest mean mapped cosine to the others;
/// ties go to the lowest index.
pub fn medoid_index(embeddings: &[EmbeddingVector]) -> Result<Option<usize>> {
    let n = embeddings.len();
    if n <= 1 {
        return Ok((n == 1).then_some(0));
    }
    let mut best: Option<(usize, f64)> = None;
    for i in 0..n {
        let mut total = 0.0;
        for j in (0..n).filter(|&j| j != i) {
            total += map_cosine(cosine(embeddings[i].values(), embeddings[j].values())?);
        }
        let mean = total / (n - 1) as f64;
        if best.is_none_or(|(_, b)| mean > b) {
            best = Some((i, mean));
        }
    }
    Ok(best.map(|(i, _)| i))
}

pub fn preprompt_answer(
    question: &str,
    kg: &KnowledgeGraph,
    gen_cfg: &GeneratorConfig,
    emb_cfg: &EmbedderConfig,
    pp_cfg: &PrePromptConfig,
) -> Result<PrePromptOutcome> {
    let generator = gen_cfg.build()?;
    let embedder = Embedder::new(emb_cfg)?;
    preprompt_answer_with(question, kg, generator.as_ref(), &embedder, pp_cfg)
}

/// Answers `num_rephrases` rephrasings, drops refusals and returns the
/// medoid of the remaining answers.
pub fn preprompt_answer_with(
    question: &str,
    kg: &KnowledgeGraph,
    generator: &dyn Generator,
    embedder: &Embedder,
    pp_cfg: &PrePromptConfig,
) -> Result<PrePromptOutcome> {
    pp_cfg.validate()?;
    let variants = (0..pp_cfg.num_rephrases)
        .map(|v| generator.rephrase(question, v))
        .collect::<Result<Vec<_>>>()?;
    let answers = variants
        .par_iter()
        .map(|v| generator.generate(v, kg))
        .collect::<Result<Vec<_>>>()?;

    let mut kept = Vec::new();
    let mut kept_answers = Vec::new();
    for (variant, (q, a)) in variants.iter().zip(answers).enumerate() {
        if !pp_cfg.is_refusal(&a.text) {
            kept.push(KeptAnswer {
                variant,
                question: q.clone(),
                text: a.text.clone(),
            });
            kept_answers.push(a);
        }
    }
    let dropped = pp_cfg.num_rephrases - kept.len();

    let texts: Vec<&str> = kept.iter().map(|k| k.text.as_str()).collect();
    let embeddings = embedder.embed_batch(&texts)?;
    let (final_answer, chosen_variant) = match medoid_index(&embeddings)? {
        Some(i) => (kept_answers.swap_remove(i), Some(kept[i].variant)),
        None => (
            Answer {
                text: REFUSAL.to_owned(),
                generator_kind: generator.kind(),
                prompt_used: build_prompt(question, kg, None),
            },
            None,
        ),
    };
    Ok(PrePromptOutcome {
        final_answer,
        chosen_variant,
        kept,
        dropped,
        variants,
    })
}
