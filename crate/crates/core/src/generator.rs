//! Answer generation for a question over a graph.
//!
//! [`MockGenerator`] is a deterministic test double whose answers are a
//! transparent function of which triples are present, which makes attribution
//! ground truth computable. [`RemoteGenerator`] calls an OpenAI-style chat
//! completion endpoint with the linearized graph as context.

use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, Triple};
use crate::remote::{JsonClient, RetryPolicy};
use crate::text::{fnv1a64, lower, tokenize};

/// Canonical refusal text produced by the mock when nothing matches.
pub const REFUSAL: &str = "I do not know.";

/// Question tokens shorter than this never select a triple in the mock.
const MIN_MATCH_TOKEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    pub temperature: f64,
    pub model_id: Option<String>,
    pub endpoint: Option<String>,
    /// Seeds the mock's sampling stream at non-zero temperature.
    pub seed: u64,
    pub max_tokens: u32,
    pub timeout: Duration,
    pub max_in_flight: usize,
    pub preamble: Option<String>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            kind: GeneratorKind::Mock,
            temperature: 0.0,
            model_id: None,
            endpoint: None,
            seed: 0,
            max_tokens: 512,
            timeout: Duration::from_secs(30),
            max_in_flight: 4,
            preamble: None,
        }
    }
}

impl GeneratorConfig {
    pub fn mock(temperature: f64, seed: u64) -> Self {
        Self {
            temperature,
            seed,
            ..Self::default()
        }
    }

    pub fn remote(endpoint: impl Into<String>, model_id: impl Into<String>, temperature: f64) -> Self {
        Self {
            kind: GeneratorKind::Remote,
            endpoint: Some(endpoint.into()),
            model_id: Some(model_id.into()),
            temperature,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.temperature.is_finite() || !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::Config(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(Error::Config("max_tokens must be positive".into()));
        }
        if self.kind == GeneratorKind::Remote && (self.endpoint.is_none() || self.model_id.is_none()) {
            return Err(Error::Config(
                "remote generator requires an endpoint and a model id".into(),
            ));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn Generator>> {
        self.validate()?;
        Ok(match self.kind {
            GeneratorKind::Mock => Box::new(MockGenerator::from_config(self)),
            GeneratorKind::Remote => Box::new(RemoteGenerator::from_config(self)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Answer {
    pub text: String,
    pub generator_kind: GeneratorKind,
    /// Prompt sent (or, for the mock, the prompt that would have been sent).
    pub prompt_used: String,
}

pub trait Generator: Send + Sync {
    fn kind(&self) -> GeneratorKind;

    fn generate(&self, question: &str, kg: &KnowledgeGraph) -> Result<Answer>;

    /// Produces the `variant`-th rephrasing of `question`.
    fn rephrase(&self, question: &str, variant: usize) -> Result<String>;
}

/// Linearizes the graph as context: optional preamble, one
/// `subject -[predicate]-> object` line per triple, a blank line, then the
/// question. The blank separator is omitted when nothing precedes it.
pub fn build_prompt(question: &str, kg: &KnowledgeGraph, preamble: Option<&str>) -> String {
    let mut lines: Vec<String> = Vec::with_capacity(kg.len() + 3);
    if let Some(p) = preamble {
        lines.push(p.to_owned());
    }
    lines.extend(kg.triples().iter().map(Triple::to_string));
    if !lines.is_empty() {
        lines.push(String::new());
    }
    lines.push(format!("Question: {question}"));
    lines.join("\n")
}

pub fn generate(question: &str, kg: &KnowledgeGraph, cfg: &GeneratorConfig) -> Result<Answer> {
    cfg.build()?.generate(question, kg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockGenerator {
    temperature: f64,
    seed: u64,
    preamble: Option<String>,
}

const REPHRASE_TEMPLATES: [&str; 5] = [
    "Define {}.",
    "Explain {}.",
    "What is known about {}?",
    "Describe {}.",
    "Summarize the facts about {}.",
];

fn question_topic(question: &str) -> &str {
    let q = question.trim().trim_end_matches(['?', '.', '!']).trim();
    for lead in ["what is ", "what are ", "what's "] {
        if q.len() > lead.len() && q[..lead.len()].eq_ignore_ascii_case(lead) {
            return q[lead.len()..].trim();
        }
    }
    q
}

impl MockGenerator {
    pub fn new(temperature: f64, seed: u64) -> Self {
        Self {
            temperature,
            seed,
            preamble: None,
        }
    }

    fn from_config(cfg: &GeneratorConfig) -> Self {
        Self {
            temperature: cfg.temperature,
            seed: cfg.seed,
            preamble: cfg.preamble.clone(),
        }
    }

    /// Triples whose subject or object contains a question token of at least
    /// four characters, in index order.
    pub fn cited_triples<'a>(question: &str, kg: &'a KnowledgeGraph) -> Vec<&'a Triple> {
        let tokens: Vec<String> = tokenize(question)
            .into_iter()
            .filter(|t| t.len() >= MIN_MATCH_TOKEN)
            .collect();
        kg.triples()
            .iter()
            .filter(|t| {
                let (s, o) = (lower(t.subject.as_str()), lower(t.object.as_str()));
                tokens.iter().any(|tok| s.contains(tok.as_str()) || o.contains(tok.as_str()))
            })
            .collect()
    }

    fn sampling_stream(&self, question: &str) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.seed.to_le_bytes());
        seed[8..16].copy_from_slice(&fnv1a64(question.as_bytes()).to_le_bytes());
        seed[16..24].copy_from_slice(&self.temperature.to_bits().to_le_bytes());
        ChaCha8Rng::from_seed(seed)
    }
}

impl Generator for MockGenerator {
    fn kind(&self) -> GeneratorKind {
        GeneratorKind::Mock
    }

    fn generate(&self, question: &str, kg: &KnowledgeGraph) -> Result<Answer> {
        let mut cited = Self::cited_triples(question, kg);
        if self.temperature > 0.0 && !cited.is_empty() {
            let mut rng = self.sampling_stream(question);
            cited.shuffle(&mut rng);
            let keep = rng.random_range(1..=cited.len());
            cited.truncate(keep);
        }
        let text = if cited.is_empty() {
            REFUSAL.to_owned()
        } else {
            cited
                .iter()
                .map(|t| format!("{}.", t.sentence()))
                .collect::<Vec<_>>()
                .join(" ")
        };
        Ok(Answer {
            text,
            generator_kind: GeneratorKind::Mock,
            prompt_used: build_prompt(question, kg, self.preamble.as_deref()),
        })
    }

    fn rephrase(&self, question: &str, variant: usize) -> Result<String> {
        let template = REPHRASE_TEMPLATES[variant % REPHRASE_TEMPLATES.len()];
        let mut text = template.replace("{}", question_topic(question));
        let round = variant / REPHRASE_TEMPLATES.len();
        if round > 0 {
            text.push_str(&format!(" (variant {})", round + 1));
        }
        Ok(text)
    }
}

#[derive(Debug)]
pub struct RemoteGenerator {
    client: JsonClient,
    model: String,
    temperature: f64,
    max_tokens: u32,
    preamble: Option<String>,
}

impl RemoteGenerator {
    fn from_config(cfg: &GeneratorConfig) -> Self {
        Self {
            client: JsonClient::new(
                cfg.endpoint.as_deref().expect("validated"),
                cfg.timeout,
                cfg.max_in_flight,
                RetryPolicy::default(),
            ),
            model: cfg.model_id.clone().expect("validated"),
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            preamble: cfg.preamble.clone(),
        }
    }

    fn complete(&self, prompt: &str) -> Result<String> {
        let response = self
            .client
            .post(&chat_request(&self.model, self.temperature, self.max_tokens, prompt))?;
        let text = parse_chat_response(&response)?;
        if text.trim().is_empty() {
            log::warn!("remote generator returned an empty completion");
        }
        Ok(text)
    }
}

impl Generator for RemoteGenerator {
    fn kind(&self) -> GeneratorKind {
        GeneratorKind::Remote
    }

    fn generate(&self, question: &str, kg: &KnowledgeGraph) -> Result<Answer> {
        let prompt = build_prompt(question, kg, self.preamble.as_deref());
        let text = self.complete(&prompt)?;
        Ok(Answer {
            text,
            generator_kind: GeneratorKind::Remote,
            prompt_used: prompt,
        })
    }

    fn rephrase(&self, question: &str, variant: usize) -> Result<String> {
        let prompt = format!(
            "Rephrase the following question without changing its meaning. \
             This is rephrasing number {}; make it differ from the others. \
             Reply with the rephrased question only.\n\nQuestion: {question}",
            variant + 1
        );
        let text = self.complete(&prompt)?;
        Ok(if text.trim().is_empty() {
            question.to_owned()
        } else {
            text.trim().to_owned()
        })
    }
}

pub(crate) fn chat_request(model: &str, temperature: f64, max_tokens: u32, prompt: &str) -> Value {
    json!({
        "model": model,
        "temperature": temperature,
        "top_p": 1,
        "max_tokens": max_tokens,
        "messages": [{ "role": "user", "content": prompt }],
    })
}

pub(crate) fn parse_chat_response(response: &Value) -> Result<String> {
    let choice = response
        .get("choices")
        .and_then(Value::as_array)
        .and_then(|c| c.first())
        .ok_or_else(|| Error::Remote {
            message: "chat response has no choices".into(),
            retryable: false,
        })?;
    Ok(choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_owned())
}
