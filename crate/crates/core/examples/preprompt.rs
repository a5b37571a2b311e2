// Rephrase a question, drop refusals and keep the medoid answer.

use kgrag_explain::embedding::EmbedderConfig;
use kgrag_explain::generator::GeneratorConfig;
use kgrag_explain::kg::KnowledgeGraph;
use kgrag_explain::reasoning::{preprompt_answer, PrePromptConfig};

pub fn run() -> kgrag_explain::Result<()> {
    let kg = KnowledgeGraph::from_strs([
        ("insulin", "regulates", "glucose uptake in muscle"),
        ("insulin", "produced_by", "pancreas"),
        ("hemoglobin", "carries", "oxygen"),
    ])?;
    let outcome = preprompt_answer(
        "What does insulin do?",
        &kg,
        &GeneratorConfig::mock(1.0, 3),
        &EmbedderConfig::default(),
        &PrePromptConfig::default(),
    )?;
    for v in &outcome.variants {
        println!("variant: {v}");
    }
    println!("kept {}, dropped {}", outcome.kept.len(), outcome.dropped);
    println!("chosen {:?}: {}", outcome.chosen_variant, outcome.final_answer.text);
    Ok(())
}

#[allow(dead_code)]
fn main() -> kgrag_explain::Result<()> {
    run()
}
