//! Evaluation runs built on the pipeline: stability, consistency, accuracy
//! and faithfulness.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::Embedder;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::kg::{Entity, KnowledgeGraph, QaItem, Relation};
use crate::metrics::{jaccard, pearson, population_std, roc_auc};
use crate::pipeline::{explain, explain_with, ExplainConfig};
use crate::similarity::cosine;
use crate::surrogate::AttributionReport;

/// Top-k size used when no ground truth is available.
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub injected: [String; 3],
    pub jaccard: f64,
    pub top_k: usize,
    pub original_nodes: Vec<String>,
    pub perturbed_nodes: Vec<String>,
}

/// Explains `kg` and `kg` plus `injected`, then compares their top-k node
/// sets.
pub fn stability_run(
    kg: &KnowledgeGraph,
    question: &str,
    injected: (&str, &str, &str),
    cfg: &ExplainConfig,
    top_k: usize,
) -> Result<StabilityReport> {
    let generator = cfg.generator.build()?;
    let embedder = Embedder::new(&cfg.embedder)?;
    stability_run_with(kg, question, injected, generator.as_ref(), &embedder, cfg, top_k)
}

pub fn stability_run_with(
    kg: &KnowledgeGraph,
    question: &str,
    injected: (&str, &str, &str),
    generator: &dyn Generator,
    embedder: &Embedder,
    cfg: &ExplainConfig,
    top_k: usize,
) -> Result<StabilityReport> {
    if top_k == 0 {
        return Err(Error::Config("top_k must be positive".into()));
    }
    let (s, p, o) = injected;
    let extended = kg.with_triple(Entity::new(s)?, Relation::new(p)?, Entity::new(o)?)?;
    let original = explain_with(kg, question, generator, embedder, cfg)?;
    let perturbed = explain_with(&extended, question, generator, embedder, cfg)?;
    let original_nodes = original.report.top_nodes(top_k);
    let perturbed_nodes = perturbed.report.top_nodes(top_k);
    let a: BTreeSet<&String> = original_nodes.iter().collect();
    let b: BTreeSet<&String> = perturbed_nodes.iter().collect();
    Ok(StabilityReport {
        injected: [s.trim().to_owned(), p.trim().to_owned(), o.trim().to_owned()],
        jaccard: jaccard(&a, &b),
        top_k,
        original_nodes,
        perturbed_nodes,
    })
}

/// Top-k for stability: the ground-truth size when known.
pub fn stability_top_k(item: Option<&QaItem>) -> usize {
    match item {
        Some(q) if !q.ground_truth_nodes.is_empty() => q.ground_truth_nodes.len(),
        _ => DEFAULT_TOP_K,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartConsistency {
    pub part_id: usize,
    /// Raw answers, one per run.
    pub answers: Vec<String>,
    /// Cosine of each run's answer embedding to the first run's.
    pub answer_cosines: Vec<f64>,
    pub answer_cosine_std: f64,
    /// Raw attribution vectors, one per run.
    pub scores: Vec<Vec<f64>>,
    /// Population standard deviation of each triple's score across runs.
    pub attribution_std: Vec<f64>,
    pub max_attribution_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub runs: usize,
    pub parts: Vec<PartConsistency>,
}

/// Repeats the pipeline `runs` times per part. Run `r` uses generator seed
/// `cfg.generator.seed + r`; the perturbation masks stay fixed so only the
/// generator's randomness shows up in the spread.
pub fn consistency(
    parts: &[KnowledgeGraph],
    question: &str,
    runs: usize,
    cfg: &ExplainConfig,
) -> Result<ConsistencyReport> {
    if runs < 2 {
        return Err(Error::Config("consistency needs at least two runs".into()));
    }
    cfg.validate()?;
    let embedder = Embedder::new(&cfg.embedder)?;
    let parts = parts
        .iter()
        .enumerate()
        .map(|(part_id, kg)| {
            let outcomes = (0..runs)
                .into_par_iter()
                .map(|r| {
                    let mut run_cfg = cfg.clone();
                    run_cfg.generator.seed = cfg.generator.seed.wrapping_add(r as u64);
                    let generator = run_cfg.generator.build()?;
                    let ex = explain_with(kg, question, generator.as_ref(), &embedder, &run_cfg)?;
                    Ok((ex.run.original_answer.text, ex.run.original_text_embedding, ex.fit.coefficients))
                })
                .collect::<Result<Vec<_>>>()?;

            let first = outcomes[0].1.values();
            let answer_cosines = outcomes
                .iter()
                .map(|(_, e, _)| cosine(first, e.values()))
                .collect::<Result<Vec<_>>>()?;
            let scores: Vec<Vec<f64>> = outcomes.iter().map(|(_, _, c)| c.clone()).collect();
            let attribution_std: Vec<f64> = (0..kg.len())
                .map(|k| population_std(&scores.iter().map(|s| s[k]).collect::<Vec<_>>()))
                .collect();
            Ok(PartConsistency {
                part_id,
                answers: outcomes.into_iter().map(|(a, _, _)| a).collect(),
                answer_cosine_std: population_std(&answer_cosines),
                answer_cosines,
                max_attribution_std: attribution_std.iter().copied().fold(0.0, f64::max),
                attribution_std,
                scores,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConsistencyReport { runs, parts })
}

/// Node-level ROC-AUC of attribution scores against ground-truth nodes.
pub fn node_auc(report: &AttributionReport, ground_truth: &[String]) -> Result<f64> {
    let truth: BTreeSet<&str> = ground_truth.iter().map(String::as_str).collect();
    let (scores, labels): (Vec<f64>, Vec<bool>) = report
        .node_scores
        .iter()
        .map(|(node, s)| (*s, truth.contains(node.as_str())))
        .unzip();
    roc_auc(&scores, &labels)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionAuc {
    pub question: String,
    /// `None` when the AUC is undefined for this question.
    pub auc: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperatureAccuracy {
    pub temperature: f64,
    pub per_question: Vec<QuestionAuc>,
    /// Mean over questions with a defined AUC.
    pub mean_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub temperatures: Vec<TemperatureAccuracy>,
}

/// Explains every QA item at every temperature and scores the node
/// attributions against the item's ground-truth nodes.
pub fn accuracy(
    kg: &KnowledgeGraph,
    items: &[QaItem],
    temperatures: &[f64],
    cfg: &ExplainConfig,
) -> Result<AccuracyReport> {
    let mut out = Vec::with_capacity(temperatures.len());
    for &t in temperatures {
        let mut t_cfg = cfg.clone();
        t_cfg.generator.temperature = t;
        let mut per_question = Vec::with_capacity(items.len());
        for item in items {
            let unknown = item.unknown_ground_truth(kg);
            if !unknown.is_empty() {
                log::warn!("ground-truth nodes {unknown:?} are not in the graph");
            }
            let ex = explain(kg, &item.question, &t_cfg)?;
            let (auc, note) = match node_auc(&ex.report, &item.ground_truth_nodes) {
                Ok(a) => (Some(a), None),
                Err(e @ Error::Undefined(_)) => (None, Some(e.to_string())),
                Err(e) => return Err(e),
            };
            per_question.push(QuestionAuc {
                question: item.question.clone(),
                auc,
                note,
            });
        }
        let defined: Vec<f64> = per_question.iter().filter_map(|q| q.auc).collect();
        let mean_auc = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        out.push(TemperatureAccuracy {
            temperature: t,
            per_question,
            mean_auc,
        });
    }
    Ok(AccuracyReport { temperatures: out })
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AccuracyRow {
    pub question_id: String,
    pub accuracy: f64,
}

/// Reads a `question_id,accuracy` CSV with a header row.
pub fn read_accuracy_csv(bytes: &[u8]) -> Result<Vec<AccuracyRow>> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize::<AccuracyRow>().enumerate() {
        let row = row.map_err(|e| {
            let offset = e.position().map(|p| p.byte() as usize).unwrap_or(0);
            Error::Parse {
                offset,
                message: format!("accuracy row {}: {e}", i + 1),
            }
        })?;
        if !row.accuracy.is_finite() {
            return Err(Error::field(format!("[{i}].accuracy"), "must be finite"));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaithfulnessReport {
    pub pairs: Vec<(String, f64, f64)>,
    /// `None` when either side has zero variance.
    pub pearson: Option<f64>,
    pub note: Option<String>,
}

/// Correlates per-question attribution quality with external accuracies.
/// A row's `question_id` matches a quality key exactly or as a zero-based
/// index into `quality`'s insertion order.
/// Questions whose quality is `None` are skipped. An undefined correlation is
/// reported as `pearson: None` with a note rather than an error.
pub fn faithfulness(quality: &[(String, Option<f64>)], accuracies: &[AccuracyRow]) -> Result<FaithfulnessReport> {
    let by_text: BTreeMap<&str, Option<f64>> = quality.iter().map(|(q, v)| (q.as_str(), *v)).collect();
    let mut pairs = Vec::new();
    for row in accuracies {
        let hit = by_text.get(row.question_id.as_str()).copied().or_else(|| {
            row.question_id
                .parse::<usize>()
                .ok()
                .and_then(|i| quality.get(i).map(|(_, v)| *v))
        });
        let hit = match hit {
            Some(None) => {
                log::warn!("attribution score for question {:?} is undefined", row.question_id);
                continue;
            }
            Some(Some(v)) => Some(v),
            None => None,
        };
        match hit {
            Some(q) => pairs.push((row.question_id.clone(), q, row.accuracy)),
            None => log::warn!("no attribution score for question {:?}", row.question_id),
        }
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let (pearson, note) = match pearson(&x, &y) {
        Ok(r) => (Some(r), None),
        Err(e @ (Error::Undefined(_) | Error::Shape(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    Ok(FaithfulnessReport { pairs, pearson, note })
}
