// Explain with an OpenAI-compatible chat endpoint. Needs KGSMILE_ENDPOINT
// and KGSMILE_MODEL; KGSMILE_API_KEY is sent as a bearer token when set.

use kgrag_explain::generator::GeneratorConfig;
use kgrag_explain::prelude::*;

pub fn run() -> kgrag_explain::Result<()> {
    let (Ok(endpoint), Ok(model)) = (std::env::var("KGSMILE_ENDPOINT"), std::env::var("KGSMILE_MODEL")) else {
        println!("set KGSMILE_ENDPOINT and KGSMILE_MODEL to run against a live model");
        return Ok(());
    };
    let kg = KnowledgeGraph::from_strs([
        ("insulin", "regulates", "glucose uptake in muscle"),
        ("hemoglobin", "carries", "oxygen"),
    ])?;
    let cfg = ExplainConfig {
        generator: GeneratorConfig::remote(endpoint, model, 0.0),
        ..ExplainConfig::default()
    };
    let ex = explain(&kg, "What does insulin regulate?", &cfg)?;
    println!("answer: {}", ex.run.original_answer.text);
    println!("scores: {:?}", ex.report.triple_scores);
    Ok(())
}

#[allow(dead_code)]
fn main() -> kgrag_explain::Result<()> {
    run()
}
