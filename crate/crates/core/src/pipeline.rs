//! End-to-end attribution: perturb, generate, score, fit, attribute.

use std::time::{Duration, Instant};

use serde_json::{json, Value};

use crate::embedding::{Embedder, EmbedderConfig};
use crate::error::Result;
use crate::generator::{Generator, GeneratorConfig};
use crate::kg::KnowledgeGraph;
use crate::metrics::FidelityReport;
use crate::perturbation::{run_perturbations_with, PerturbationConfig, PerturbationRun};
use crate::similarity::SimilarityConfig;
use crate::surrogate::{attribute, build_design, fit, AttributionReport, DesignMatrix, SurrogateFit};

pub use crate::surrogate::{DesignMode, SurrogateMethod};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExplainConfig {
    pub generator: GeneratorConfig,
    pub embedder: EmbedderConfig,
    pub perturbation: PerturbationConfig,
    /// Also selects the regression target via `text_metric`.
    pub similarity: SimilarityConfig,
    pub surrogate: SurrogateMethod,
    pub design_mode: DesignMode,
}

impl ExplainConfig {
    pub fn mock(temperature: f64, seed: u64) -> Self {
        Self {
            generator: GeneratorConfig::mock(temperature, seed),
            perturbation: PerturbationConfig {
                seed,
                ..PerturbationConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.embedder.validate()?;
        self.perturbation.validate()?;
        self.similarity.validate()
    }

    /// A JSON snapshot of every setting that affects the output. Secrets are
    /// never part of the config, so the snapshot is safe to persist.
    pub fn snapshot(&self) -> Value {
        let g = &self.generator;
        let e = &self.embedder;
        json!({
            "generator": {
                "kind": g.kind,
                "temperature": g.temperature,
                "seed": g.seed,
                "model_id": g.model_id,
                "endpoint": g.endpoint,
                "max_tokens": g.max_tokens,
            },
            "embedder": {
                "kind": match e.kind {
                    crate::embedding::EmbedderKind::Deterministic => "deterministic",
                    crate::embedding::EmbedderKind::Remote => "remote",
                },
                "dim": e.dim,
                "model_id": e.model_id,
                "endpoint": e.endpoint,
            },
            "perturbation": self.perturbation,
            "similarity": self.similarity,
            "surrogate": self.surrogate,
            "design_mode": self.design_mode,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings {
    pub perturb_generate: Duration,
    pub fit: Duration,
    pub evaluate: Duration,
}

#[derive(Debug, Clone)]
pub struct Explanation {
    pub run: PerturbationRun,
    pub design: DesignMatrix,
    pub fit: SurrogateFit,
    pub report: AttributionReport,
    pub timings: StageTimings,
}

impl Explanation {
    pub fn fidelity(&self) -> &FidelityReport {
        &self.fit.fidelity
    }
}

pub fn explain(kg: &KnowledgeGraph, question: &str, cfg: &ExplainConfig) -> Result<Explanation> {
    cfg.validate()?;
    let generator = cfg.generator.build()?;
    let embedder = Embedder::new(&cfg.embedder)?;
    explain_with(kg, question, generator.as_ref(), &embedder, cfg)
}

/// Like [`explain`] but with caller-supplied backends; generator and
/// embedder settings in `cfg` are ignored.
pub fn explain_with(
    kg: &KnowledgeGraph,
    question: &str,
    generator: &dyn Generator,
    embedder: &Embedder,
    cfg: &ExplainConfig,
) -> Result<Explanation> {
    let start = Instant::now();
    let run = run_perturbations_with(kg, question, generator, embedder, &cfg.perturbation, &cfg.similarity)?;
    let perturbed = Instant::now();
    let design = build_design(&run, cfg.similarity.text_metric, cfg.design_mode)?;
    let fit = fit(&design, cfg.surrogate)?;
    let fitted = Instant::now();
    let report = attribute(&fit, kg)?;
    let done = Instant::now();
    Ok(Explanation {
        run,
        design,
        fit,
        report,
        timings: StageTimings {
            perturb_generate: perturbed - start,
            fit: fitted - perturbed,
            evaluate: done - fitted,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> KnowledgeGraph {
        KnowledgeGraph::from_strs([
            ("insulin", "regulates", "glucose"),
            ("aspirin", "treats", "headache"),
            ("water", "covers", "ocean floor"),
            ("granite", "forms", "mountains"),
        ])
        .unwrap()
    }

    #[test]
    fn cited_triple_ranks_first() {
        let kg = fixture();
        let ex = explain(&kg, "What does insulin do?", &ExplainConfig::mock(0.0, 3)).unwrap();
        assert_eq!(ex.report.ranking[0], 0);
        assert_eq!(ex.fit.coefficients.len(), 4);
        assert_eq!(ex.run.samples.len(), 20);
    }

    #[test]
    fn deterministic() {
        let kg = fixture();
        let cfg = ExplainConfig::mock(1.0, 9);
        let a = explain(&kg, "insulin and aspirin", &cfg).unwrap();
        let b = explain(&kg, "insulin and aspirin", &cfg).unwrap();
        assert_eq!(a.fit, b.fit);
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn snapshot_has_defaults() {
        let snap = ExplainConfig::default().snapshot();
        assert_eq!(snap["perturbation"]["num_samples"], 20);
        assert_eq!(snap["similarity"]["text_metric"], "inv_wd");
        assert_eq!(snap["surrogate"], "wls");
    }
}
