//! DOT, GraphML and JSON report writers plus the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;
use crate::metrics::FidelityReport;
use crate::pipeline::Explanation;
use crate::surrogate::{min_max, AttributionReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorScale {
    /// min -> 0, max -> 1.
    #[default]
    Sequential,
    /// 0 -> 0.5, largest magnitude -> 0 or 1.
    Diverging,
}

impl FromStr for ColorScale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(ColorScale::Sequential),
            "diverging" => Ok(ColorScale::Diverging),
            other => Err(Error::Config(format!("unknown color scale {other:?}"))),
        }
    }
}

impl ColorScale {
    /// Maps scores to [0, 1]; all-equal scores map to 0.5 in both modes.
    pub fn intensities(self, scores: &[f64]) -> Vec<f64> {
        match self {
            ColorScale::Sequential => min_max(scores),
            ColorScale::Diverging => {
                let peak = scores.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
                let equal = scores.windows(2).all(|w| w[0] == w[1]);
                if peak == 0.0 || equal {
                    return vec![0.5; scores.len()];
                }
                scores.iter().map(|s| 0.5 + 0.5 * s / peak).collect()
            }
        }
    }
}

fn channel(from: u8, to: u8, t: f64) -> u8 {
    let v = f64::from(from) + (f64::from(to) - f64::from(from)) * t.clamp(0.0, 1.0);
    (v + 0.5).floor() as u8
}

fn ramp(from: [u8; 3], to: [u8; 3], t: f64) -> String {
    format!(
        "#{:02X}{:02X}{:02X}",
        channel(from[0], to[0], t),
        channel(from[1], to[1], t),
        channel(from[2], to[2], t)
    )
}

/// White to red.
pub fn node_color(intensity: f64) -> String {
    ramp([0xFF, 0xFF, 0xFF], [0xFF, 0x00, 0x00], intensity)
}

/// Grey to blue.
pub fn edge_color(intensity: f64) -> String {
    ramp([0x80, 0x80, 0x80], [0x00, 0x00, 0xFF], intensity)
}

fn check(kg: &KnowledgeGraph, report: &AttributionReport) -> Result<()> {
    let nodes_match = report.node_scores.len() == kg.entities().len()
        && kg.entities().iter().all(|e| report.node_scores.contains_key(e.as_str()));
    if report.triple_scores.len() != kg.len() || !nodes_match {
        return Err(Error::Shape("attribution report does not match the graph".into()));
    }
    Ok(())
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn legend(name: &str, r: Option<(f64, f64)>) -> String {
    match r {
        Some((lo, hi)) => format!("// {name} score min={lo} max={hi}\n"),
        None => format!("// {name} score min=n/a max=n/a\n"),
    }
}

/// Undirected DOT document with filled nodes and colored edges.
pub fn export_dot(kg: &KnowledgeGraph, report: &AttributionReport, scale: ColorScale) -> Result<String> {
    check(kg, report)?;
    let node_values: Vec<f64> = report.node_scores.values().copied().collect();
    let node_int = scale.intensities(&node_values);
    let edge_int = scale.intensities(&report.triple_scores);

    let mut out = String::new();
    let _ = writeln!(out, "// attribution graph, {scale:?} scale");
    out.push_str(&legend("node", range(node_values.iter().copied())));
    out.push_str(&legend("edge", range(report.triple_scores.iter().copied())));
    if kg.is_empty() {
        out.push_str("graph G { }\n");
        return Ok(out);
    }
    out.push_str("graph G {\n  node [style=filled];\n");
    for ((id, score), t) in report.node_scores.iter().zip(&node_int) {
        let _ = writeln!(
            out,
            "  {} [fillcolor=\"{}\", score=\"{score}\", intensity=\"{t}\"];",
            dot_id(id),
            node_color(*t)
        );
    }
    for ((triple, score), t) in kg.triples().iter().zip(&report.triple_scores).zip(&edge_int) {
        let _ = writeln!(
            out,
            "  {} -- {} [label={}, color=\"{}\", score=\"{score}\", intensity=\"{t}\"];",
            dot_id(triple.subject.as_str()),
            dot_id(triple.object.as_str()),
            dot_id(triple.predicate.as_str()),
            edge_color(*t)
        );
    }
    out.push_str("}\n");
    Ok(out)
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// GraphML with `score` and `intensity` on every node and edge.
pub fn export_graphml(kg: &KnowledgeGraph, report: &AttributionReport) -> Result<String> {
    check(kg, report)?;
    let mut out = String::from(concat!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
        "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n",
        "  <key id=\"ns\" for=\"node\" attr.name=\"score\" attr.type=\"double\"/>\n",
        "  <key id=\"ni\" for=\"node\" attr.name=\"intensity\" attr.type=\"double\"/>\n",
        "  <key id=\"es\" for=\"edge\" attr.name=\"score\" attr.type=\"double\"/>\n",
        "  <key id=\"ei\" for=\"edge\" attr.name=\"intensity\" attr.type=\"double\"/>\n",
        "  <key id=\"er\" for=\"edge\" attr.name=\"relation\" attr.type=\"string\"/>\n",
        "  <graph id=\"G\" edgedefault=\"undirected\">\n",
    ));
    for (id, score) in &report.node_scores {
        let t = report.node_intensity.get(id).copied().unwrap_or(0.5);
        let _ = writeln!(
            out,
            "    <node id=\"{}\"><data key=\"ns\">{score}</data><data key=\"ni\">{t}</data></node>",
            xml_escape(id)
        );
    }
    for (i, t) in kg.triples().iter().enumerate() {
        let _ = writeln!(
            out,
            "    <edge id=\"e{i}\" source=\"{}\" target=\"{}\"><data key=\"es\">{}</data><data key=\"ei\">{}</data><data key=\"er\">{}</data></edge>",
            xml_escape(t.subject.as_str()),
            xml_escape(t.object.as_str()),
            report.triple_scores[i],
            report.edge_intensity[i],
            xml_escape(t.predicate.as_str())
        );
    }
    out.push_str("  </graph>\n</graphml>\n");
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

/// Config, seeds, version and per-stage wall times of one CLI run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: Value,
    pub seeds: BTreeMap<String, u64>,
    pub version: String,
    pub stages: Vec<StageTime>,
    pub total_seconds: f64,
    #[serde(skip)]
    started: Instant,
}

impl RunManifest {
    pub fn start(config: Value, seeds: BTreeMap<String, u64>) -> Self {
        Self {
            config,
            seeds,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            stages: Vec::new(),
            total_seconds: 0.0,
            started: Instant::now(),
        }
    }

    pub fn record(&mut self, stage: &str, elapsed: Duration) {
        self.stages.push(StageTime {
            stage: stage.to_owned(),
            seconds: elapsed.as_secs_f64(),
        });
    }

    /// Stamps the total wall time since [`RunManifest::start`].
    pub fn finish(&mut self) {
        self.total_seconds = self.started.elapsed().as_secs_f64();
    }

    /// The manifest without wall times, stable across identical runs.
    pub fn deterministic(&self) -> Value {
        json!({
            "config": self.config,
            "seeds": self.seeds,
            "version": self.version,
            "stages": self.stages.iter().map(|s| s.stage.as_str()).collect::<Vec<_>>(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self).map_err(|e| Error::Contract(e.to_string()))? + "\n")
    }

    pub fn timing_table(&self) -> String {
        let mut out = String::from("stage                seconds\n");
        for s in &self.stages {
            let _ = writeln!(out, "{:<20} {:>8.4}", s.stage, s.seconds);
        }
        let _ = writeln!(out, "{:<20} {:>8.4}", "total", self.total_seconds);
        out
    }
}

/// Named fidelity values as they appear under `metrics` in a report.
pub fn fidelity_metrics(f: &FidelityReport) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("r2".into(), json!(f.r2));
    m.insert("mean_l1".into(), json!(f.mean_l1));
    m.insert("mean_l2".into(), json!(f.mean_l2));
    m.insert("weighted_l1".into(), json!(f.weighted_l1));
    m.insert("weighted_l2".into(), json!(f.weighted_l2));
    m.insert("r2w".into(), json!(f.r2w));
    m.insert("adj_r2w".into(), json!(f.adj_r2w));
    m.insert("mean_loss_lm".into(), json!(f.mean_loss_lm));
    m.insert("n_p".into(), json!(f.n_p));
    m.insert("n_s".into(), json!(f.n_s));
    m
}

/// A JSON report assembled section by section. Keys serialize sorted, so
/// identical inputs give identical bytes.
#[derive(Debug, Clone, Default)]
pub struct Report {
    root: Map<String, Value>,
}

impl Report {
    pub fn new(manifest: &RunManifest) -> Self {
        let mut root = Map::new();
        root.insert("manifest".into(), manifest.deterministic());
        Self { root }
    }

    pub fn section(mut self, key: &str, value: impl Serialize) -> Result<Self> {
        let v = serde_json::to_value(value).map_err(|e| Error::Contract(e.to_string()))?;
        self.root.insert(key.to_owned(), v);
        Ok(self)
    }

    /// Adds a metric under `metrics`; `None` serializes as null.
    pub fn metric(mut self, key: &str, value: Option<f64>) -> Self {
        let metrics = self
            .root
            .entry("metrics")
            .or_insert_with(|| Value::Object(Map::new()));
        if let Value::Object(m) = metrics {
            m.insert(key.to_owned(), json!(value));
        }
        self
    }

    /// Ranked attributions, surrogate diagnostics, fidelity metrics and the
    /// per-sample responses of one explanation.
    pub fn explanation(self, kg: &KnowledgeGraph, question: &str, ex: &Explanation) -> Result<Self> {
        check(kg, &ex.report)?;
        let ranked: Vec<Value> = ex
            .report
            .ranking
            .iter()
            .enumerate()
            .map(|(rank, &i)| {
                let t = &kg.triples()[i];
                json!({
                    "rank": rank + 1,
                    "index": i,
                    "subject": t.subject.as_str(),
                    "predicate": t.predicate.as_str(),
                    "object": t.object.as_str(),
                    "score": ex.report.triple_scores[i],
                    "intensity": ex.report.edge_intensity[i],
                })
            })
            .collect();
        let nodes: Map<String, Value> = ex
            .report
            .node_scores
            .iter()
            .map(|(n, s)| (n.clone(), json!({ "score": s, "intensity": ex.report.node_intensity[n] })))
            .collect();
        let metric = ex.run.similarity.text_metric;
        let samples: Vec<Value> = ex
            .run
            .samples
            .iter()
            .map(|s| {
                json!({
                    "index": s.index,
                    "removed": s.mask.removed().collect::<Vec<_>>(),
                    "graph_similarity": s.graph_similarity,
                    "target": s.text_scores.target(metric),
                    "kernel_weight": s.kernel_weight,
                })
            })
            .collect();
        let mut metrics = fidelity_metrics(&ex.fit.fidelity);
        if let Some(Value::Object(existing)) = self.root.get("metrics") {
            metrics.extend(existing.clone());
        }
        let mut this = self
            .section("question", question)?
            .section("original_answer", &ex.run.original_answer.text)?
            .section("graph", json!({ "triples": kg.len(), "entities": kg.entities().len() }))?
            .section("attributions", json!({ "ranking": ranked, "nodes": nodes }))?
            .section(
                "surrogate",
                json!({
                    "method": ex.fit.method,
                    "intercept": ex.fit.intercept,
                    "diagnostics": ex.fit.diagnostics,
                    "constant_columns": ex.design.constant_columns(),
                }),
            )?
            .section("samples", samples)?;
        this.root.insert("metrics".into(), Value::Object(metrics));
        Ok(this)
    }

    pub fn value(&self) -> Value {
        Value::Object(self.root.clone())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(&self.root).map_err(|e| Error::Contract(e.to_string()))?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

/// Serializes a report; shorthand for [`Report::to_bytes`].
pub fn export_report(report: &Report) -> Result<Vec<u8>> {
    report.to_bytes()
}
