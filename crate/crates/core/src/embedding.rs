//! Text and graph embeddings.
//!
//! The deterministic embedder is a hashed bag of tokens: ASCII-lowercase,
//! split on every non-alphanumeric byte, bucket each token by
//! `FNV-1a-64(token) mod dim`, count, then L2-normalize. It is bit-exact and
//! order-insensitive. The remote embedder calls an OpenAI-style `/embeddings`
//! endpoint.

use std::sync::OnceLock;
use std::time::Duration;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;
use crate::remote::{JsonClient, RetryPolicy};
use crate::text::{fnv1a64, tokenize};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Contract("embedding has zero dimensions".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("embedding entry {i} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbedderKind {
    #[default]
    Deterministic,
    Remote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub dim: usize,
    pub endpoint: Option<String>,
    pub model_id: Option<String>,
    pub timeout: Duration,
    pub max_in_flight: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::Deterministic,
            dim: 256,
            endpoint: None,
            model_id: None,
            timeout: Duration::from_secs(30),
            max_in_flight: 4,
        }
    }
}

impl EmbedderConfig {
    pub fn deterministic(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn remote(endpoint: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            kind: EmbedderKind::Remote,
            endpoint: Some(endpoint.into()),
            model_id: Some(model_id.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            EmbedderKind::Deterministic if self.dim == 0 => {
                Err(Error::Config("embedding dimension must be positive".into()))
            }
            EmbedderKind::Remote if self.endpoint.is_none() || self.model_id.is_none() => Err(
                Error::Config("remote embedder requires an endpoint and a model id".into()),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug)]
enum Backend {
    Deterministic {
        dim: usize,
    },
    Remote {
        client: JsonClient,
        model: String,
        dim: OnceLock<usize>,
    },
}

/// Maps texts and graphs to vectors. Cheap to share across threads.
#[derive(Debug)]
pub struct Embedder {
    backend: Backend,
}

impl Embedder {
    pub fn new(cfg: &EmbedderConfig) -> Result<Self> {
        cfg.validate()?;
        let backend = match cfg.kind {
            EmbedderKind::Deterministic => Backend::Deterministic { dim: cfg.dim },
            EmbedderKind::Remote => Backend::Remote {
                client: JsonClient::new(
                    cfg.endpoint.as_deref().expect("validated"),
                    cfg.timeout,
                    cfg.max_in_flight,
                    RetryPolicy::default(),
                ),
                model: cfg.model_id.clone().expect("validated"),
                dim: OnceLock::new(),
            },
        };
        Ok(Self { backend })
    }

    pub fn deterministic(dim: usize) -> Self {
        Self {
            backend: Backend::Deterministic { dim: dim.max(1) },
        }
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        match &self.backend {
            Backend::Deterministic { dim } => Ok(hashed_bag_of_tokens(text, *dim)),
            Backend::Remote { .. } => {
                let mut out = self.embed_batch(&[text])?;
                Ok(out.pop().expect("one input, one output"))
            }
        }
    }

    /// Embeds several texts in one request for the remote backend.
    pub fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        match &self.backend {
            Backend::Deterministic { dim } => {
                Ok(texts.iter().map(|t| hashed_bag_of_tokens(t, *dim)).collect())
            }
            Backend::Remote { client, model, dim } => {
                let response = client.post(&embedding_request(model, texts))?;
                let vectors = parse_embedding_response(&response, texts.len())?;
                for v in &vectors {
                    let expected = *dim.get_or_init(|| v.dim());
                    if v.dim() != expected {
                        return Err(Error::Contract(format!(
                            "remote embedding dimension changed from {expected} to {}",
                            v.dim()
                        )));
                    }
                }
                Ok(vectors)
            }
        }
    }

    /// Embeds the graph's canonical text: one `"s p o"` line per triple.
    pub fn embed_graph(&self, kg: &KnowledgeGraph) -> Result<EmbeddingVector> {
        self.embed_text(&kg.canonical_text())
    }
}

pub fn embed_text(text: &str, cfg: &EmbedderConfig) -> Result<EmbeddingVector> {
    Embedder::new(cfg)?.embed_text(text)
}

pub fn embed_graph(kg: &KnowledgeGraph, cfg: &EmbedderConfig) -> Result<EmbeddingVector> {
    Embedder::new(cfg)?.embed_graph(kg)
}

fn hashed_bag_of_tokens(text: &str, dim: usize) -> EmbeddingVector {
    let mut values = vec![0.0; dim];
    for token in tokenize(text) {
        let bucket = (fnv1a64(token.as_bytes()) % dim as u64) as usize;
        values[bucket] += 1.0;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    EmbeddingVector { values }
}

pub(crate) fn embedding_request(model: &str, texts: &[&str]) -> Value {
    json!({ "model": model, "input": texts })
}

pub(crate) fn parse_embedding_response(response: &Value, expected: usize) -> Result<Vec<EmbeddingVector>> {
    let malformed = |what: &str| Error::Remote {
        message: format!("malformed embedding response: {what}"),
        retryable: false,
    };
    let data = response
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing data array"))?;
    if data.len() != expected {
        return Err(malformed("wrong number of embeddings"));
    }
    data.iter()
        .map(|item| {
            let values = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| malformed("missing embedding"))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| malformed("non-numeric entry")))
                .collect::<Result<Vec<_>>>()?;
            EmbeddingVector::new(values)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::remote::test_server;

    /// Independent FNV-1a 64 written out byte by byte.
    fn reference_fnv(s: &str) -> u64 {
        let mut h: u64 = 14695981039346656037;
        for b in s.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(1099511628211);
        }
        h
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let v = Embedder::deterministic(256).embed_text("").unwrap();
        assert_eq!(v, EmbeddingVector::zeros(256));
    }

    #[test]
    fn repeated_tokens_normalize_away() {
        let e = Embedder::deterministic(256);
        assert_eq!(e.embed_text("abc abc").unwrap(), e.embed_text("abc").unwrap());
        assert_eq!(
            e.embed_text("insulin binds glucose").unwrap(),
            e.embed_text("glucose, insulin: BINDS").unwrap()
        );
    }

    #[test]
    fn two_token_buckets() {
        let v = Embedder::deterministic(256).embed_text("insulin glucose").unwrap();
        let a = (reference_fnv("insulin") % 256) as usize;
        let b = (reference_fnv("glucose") % 256) as usize;
        assert_ne!(a, b);
        let expected = 1.0 / 2f64.sqrt();
        for (i, x) in v.values().iter().enumerate() {
            if i == a || i == b {
                assert_eq!(*x, expected);
            } else {
                assert_eq!(*x, 0.0);
            }
        }
        assert!((v.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn graph_embedding_uses_canonical_text() {
        let e = Embedder::deterministic(64);
        let kg = KnowledgeGraph::from_strs([("s", "p", "o")]).unwrap();
        assert_eq!(e.embed_graph(&kg).unwrap(), e.embed_text("s p o").unwrap());
        assert_eq!(
            e.embed_graph(&KnowledgeGraph::default()).unwrap(),
            EmbeddingVector::zeros(64)
        );
    }

    #[test]
    fn config_validation() {
        assert!(EmbedderConfig::deterministic(0).validate().is_err());
        let mut cfg = EmbedderConfig::remote("http://x", "m");
        cfg.model_id = None;
        assert!(cfg.validate().is_err());
        assert!(EmbeddingVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn remote_round_trip_and_dimension_drift() {
        let server = test_server::serve(vec![
            (200, r#"{"data":[{"embedding":[0.5,0.5,0.0]}]}"#.into()),
            (200, r#"{"data":[{"embedding":[1.0,0.0]}]}"#.into()),
        ]);
        let embedder = Embedder::new(&EmbedderConfig::remote(&server.url, "embed-small")).unwrap();
        let v = embedder.embed_text("hello").unwrap();
        assert_eq!(v.values(), &[0.5, 0.5, 0.0]);
        let err = embedder.embed_text("again").unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        let bodies = server.bodies.lock().unwrap();
        assert_eq!(bodies[0], serde_json::json!({"model": "embed-small", "input": ["hello"]}));
    }

    #[test]
    fn malformed_response() {
        let bad = serde_json::json!({"data": [{"embedding": ["x"]}]});
        assert!(parse_embedding_response(&bad, 1).is_err());
        assert!(parse_embedding_response(&serde_json::json!({}), 1).is_err());
    }
}
