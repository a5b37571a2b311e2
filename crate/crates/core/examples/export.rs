// Write DOT, GraphML and a JSON report for one explanation.

use std::collections::BTreeMap;

use kgrag_explain::export::{export_dot, export_graphml, ColorScale, Report, RunManifest};
use kgrag_explain::prelude::*;

pub fn run() -> kgrag_explain::Result<()> {
    let kg = KnowledgeGraph::from_strs([
        ("insulin", "regulates", "glucose uptake in muscle"),
        ("hemoglobin", "carries", "oxygen"),
        ("liver", "stores", "glycogen"),
    ])?;
    let question = "What does insulin regulate?";
    let cfg = ExplainConfig::default();
    let ex = explain(&kg, question, &cfg)?;

    let dir = std::env::temp_dir().join("kgrag-explain-example");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("graph.dot"), export_dot(&kg, &ex.report, ColorScale::Diverging)?)?;
    std::fs::write(dir.join("graph.graphml"), export_graphml(&kg, &ex.report)?)?;

    let manifest = RunManifest::start(cfg.snapshot(), BTreeMap::from([("perturbation".to_owned(), 0)]));
    let report = Report::new(&manifest).explanation(&kg, question, &ex)?;
    std::fs::write(dir.join("report.json"), report.to_bytes()?)?;
    println!("wrote graph.dot, graph.graphml and report.json to {}", dir.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> kgrag_explain::Result<()> {
    run()
}
