// Walk an entity-linked chain and render it as prompt lines.

use kgrag_explain::kg::KnowledgeGraph;
use kgrag_explain::reasoning::{
    extract_entities_relations, format_triples_for_prompt, generate_chain_of_thought, DEFAULT_MAX_DEPTH,
};

pub fn run() -> kgrag_explain::Result<()> {
    let kg = KnowledgeGraph::from_strs([
        ("glucose binding", "expression_present", "Neurofibrillary tangles"),
        ("Neurofibrillary tangles", "associated_with", "Disease"),
        ("Disease", "associated_with", "calcium-release channel activity"),
        ("glucose binding", "expression_present", "pancreas"),
    ])?;
    let question = "How is glucose binding related to calcium-release channel activity?";

    let (entities, relations) = extract_entities_relations(question, &kg);
    println!("entities {entities:?}, relations {relations:?}");

    let chain = generate_chain_of_thought(&kg, question, DEFAULT_MAX_DEPTH);
    chain.validate(&kg)?;
    for line in &chain.rendered_lines {
        println!("{line}");
    }
    println!("---\n{}", format_triples_for_prompt(&chain));
    Ok(())
}

#[allow(dead_code)]
fn main() -> kgrag_explain::Result<()> {
    run()
}
