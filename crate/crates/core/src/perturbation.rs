//! Triple-removal perturbations and the generate → embed → score loop.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::{Embedder, EmbedderConfig, EmbeddingVector};
use crate::error::{Error, Result};
use crate::generator::{Answer, Generator, GeneratorConfig};
use crate::kg::KnowledgeGraph;
use crate::similarity::{cosine, graph_kernel_weight, score_bundle, ScoreBundle, SimilarityConfig};

const MAX_INVALID_REDRAWS: usize = 64;
const MAX_DUPLICATE_REDRAWS: usize = 16;

/// Which triples a perturbed graph keeps (`true`) or drops (`false`).
/// Always drops at least one triple and keeps at least one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PerturbationMask {
    keep: Vec<bool>,
}

impl PerturbationMask {
    pub fn new(keep: Vec<bool>) -> Result<Self> {
        if !keep.iter().any(|&k| k) || keep.iter().all(|&k| k) {
            return Err(Error::Contract(
                "a mask must keep at least one triple and remove at least one".into(),
            ));
        }
        Ok(Self { keep })
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn removed(&self) -> impl Iterator<Item = usize> + '_ {
        self.keep.iter().enumerate().filter(|(_, k)| !**k).map(|(i, _)| i)
    }

    /// Fraction of triples removed.
    pub fn removed_fraction(&self) -> f64 {
        self.removed().count() as f64 / self.keep.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationConfig {
    pub num_samples: usize,
    pub removal_prob: f64,
    pub seed: u64,
    pub allow_duplicates: bool,
    /// Samples evaluated concurrently; 1 runs sequentially.
    pub workers: usize,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            num_samples: 20,
            removal_prob: 0.5,
            seed: 0,
            allow_duplicates: false,
            workers: 1,
        }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples == 0 {
            return Err(Error::Config("num_samples must be positive".into()));
        }
        if !(self.removal_prob > 0.0 && self.removal_prob < 1.0) {
            return Err(Error::Config("removal_prob must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

fn sample_stream(seed: u64, sample_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index as u64);
    rng
}

fn draw_mask(rng: &mut ChaCha8Rng, n: usize, removal_prob: f64) -> Vec<bool> {
    let mut keep = Vec::new();
    for _ in 0..MAX_INVALID_REDRAWS {
        keep = (0..n).map(|_| !rng.random_bool(removal_prob)).collect();
        let kept = keep.iter().filter(|&&k| k).count();
        if kept > 0 && kept < n {
            return keep;
        }
    }
    keep[0] = !keep[0];
    keep
}

/// Draws `cfg.num_samples` masks over `n_triples` triples. Sample `i` uses its
/// own ChaCha stream keyed by `(seed, i)`, so the list is reproducible and
/// independent of evaluation order.
pub fn sample_masks(n_triples: usize, cfg: &PerturbationConfig) -> Result<Vec<PerturbationMask>> {
    cfg.validate()?;
    if n_triples < 2 {
        return Err(Error::TooSmallGraph(format!(
            "need at least 2 triples to perturb, got {n_triples}"
        )));
    }
    let mut seen = HashSet::new();
    let mut masks = Vec::with_capacity(cfg.num_samples);
    for i in 0..cfg.num_samples {
        let mut rng = sample_stream(cfg.seed, i);
        let mut keep = draw_mask(&mut rng, n_triples, cfg.removal_prob);
        if !cfg.allow_duplicates {
            let mut tries = 0;
            while seen.contains(&keep) && tries < MAX_DUPLICATE_REDRAWS {
                keep = draw_mask(&mut rng, n_triples, cfg.removal_prob);
                tries += 1;
            }
            seen.insert(keep.clone());
        }
        masks.push(PerturbationMask { keep });
    }
    Ok(masks)
}

/// Removes the masked-out triples. The result is re-indexed; its
/// `source_indices` give each surviving triple's index in `kg`.
pub fn apply_mask(kg: &KnowledgeGraph, mask: &PerturbationMask) -> Result<KnowledgeGraph> {
    if mask.len() != kg.len() {
        return Err(Error::Shape(format!(
            "mask has {} bits for {} triples",
            mask.len(),
            kg.len()
        )));
    }
    if !mask.keep.iter().any(|&k| k) {
        return Err(Error::Contract("mask removes every triple".into()));
    }
    Ok(kg.subgraph(mask.keep.iter().enumerate().filter(|(_, k)| **k).map(|(i, _)| i)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationSample {
    pub index: usize,
    pub mask: PerturbationMask,
    #[serde(skip)]
    pub answer: Answer,
    /// Cosine between original and perturbed graph embeddings.
    pub graph_similarity: f64,
    pub text_scores: ScoreBundle,
    pub kernel_weight: f64,
}

#[derive(Debug, Clone)]
pub struct PerturbationRun {
    pub original_answer: Answer,
    pub original_text_embedding: EmbeddingVector,
    pub original_graph_embedding: EmbeddingVector,
    pub samples: Vec<PerturbationSample>,
    pub config: PerturbationConfig,
    pub similarity: SimilarityConfig,
}

fn contract(e: Error) -> Error {
    match e {
        Error::Shape(msg) => Error::Contract(msg),
        other => other,
    }
}

/// Builds generator and embedder from their configs and runs
/// [`run_perturbations_with`].
pub fn run_perturbations(
    kg: &KnowledgeGraph,
    question: &str,
    gen_cfg: &GeneratorConfig,
    emb_cfg: &EmbedderConfig,
    pert_cfg: &PerturbationConfig,
    sim_cfg: &SimilarityConfig,
) -> Result<PerturbationRun> {
    let generator = gen_cfg.build()?;
    let embedder = Embedder::new(emb_cfg)?;
    run_perturbations_with(kg, question, generator.as_ref(), &embedder, pert_cfg, sim_cfg)
}

pub fn run_perturbations_with(
    kg: &KnowledgeGraph,
    question: &str,
    generator: &dyn Generator,
    embedder: &Embedder,
    pert_cfg: &PerturbationConfig,
    sim_cfg: &SimilarityConfig,
) -> Result<PerturbationRun> {
    sim_cfg.validate()?;
    let masks = sample_masks(kg.len(), pert_cfg)?;

    let original_answer = generator.generate(question, kg)?;
    let original_text_embedding = embedder.embed_text(&original_answer.text)?;
    let original_graph_embedding = embedder.embed_graph(kg)?;

    let evaluate = |(index, mask): (usize, PerturbationMask)| -> Result<PerturbationSample> {
        let inner = || -> Result<PerturbationSample> {
            let perturbed = apply_mask(kg, &mask)?;
            let answer = generator.generate(question, &perturbed)?;
            let text_embedding = embedder.embed_text(&answer.text)?;
            let graph_embedding = embedder.embed_graph(&perturbed)?;
            let text_scores = score_bundle(
                original_text_embedding.values(),
                text_embedding.values(),
                sim_cfg,
            )
            .map_err(contract)?;
            let graph_similarity =
                cosine(original_graph_embedding.values(), graph_embedding.values()).map_err(contract)?;
            let kernel_weight = graph_kernel_weight(graph_similarity, sim_cfg)?;
            Ok(PerturbationSample {
                index,
                mask,
                answer,
                graph_similarity,
                text_scores,
                kernel_weight,
            })
        };
        inner().map_err(|source| Error::Sample {
            index,
            source: Box::new(source),
        })
    };

    let indexed: Vec<(usize, PerturbationMask)> = masks.into_iter().enumerate().collect();
    let results: Vec<Result<PerturbationSample>> = if pert_cfg.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(pert_cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| indexed.into_par_iter().map(evaluate).collect())
    } else {
        indexed.into_iter().map(evaluate).collect()
    };
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;

    Ok(PerturbationRun {
        original_answer,
        original_text_embedding,
        original_graph_embedding,
        samples,
        config: pert_cfg.clone(),
        similarity: sim_cfg.clone(),
    })
}
