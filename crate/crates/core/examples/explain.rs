// Attribute a mock answer to the triples it came from.

use kgrag_explain::prelude::*;

pub fn run() -> kgrag_explain::Result<()> {
    let kg = KnowledgeGraph::from_strs([
        ("insulin", "regulates", "glucose uptake in muscle"),
        ("hemoglobin", "carries", "oxygen"),
        ("pepsin", "digests", "protein"),
        ("liver", "stores", "glycogen"),
        ("pancreas", "secretes", "glucagon"),
    ])?;
    let question = "What does insulin regulate?";
    let ex = explain(&kg, question, &ExplainConfig::default())?;

    println!("answer: {}", ex.run.original_answer.text);
    for &i in ex.report.ranking.iter().take(3) {
        println!("{:>10.6}  {}", ex.report.triple_scores[i], kg.triples()[i]);
    }
    println!("top nodes: {:?}", ex.report.top_nodes(2));
    println!("weighted r2: {:?}", ex.fidelity().r2w);
    Ok(())
}

#[allow(dead_code)]
fn main() -> kgrag_explain::Result<()> {
    run()
}
