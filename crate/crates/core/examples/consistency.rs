// Repeat the pipeline across generator seeds at two temperatures.

use kgrag_explain::eval::consistency;
use kgrag_explain::prelude::*;

pub fn run() -> kgrag_explain::Result<()> {
    let kg = KnowledgeGraph::from_strs([
        ("insulin", "regulates", "glucose uptake in muscle"),
        ("insulin", "produced_by", "pancreas"),
        ("insulin", "binds", "insulin receptor"),
        ("liver", "stores", "glycogen"),
    ])?;
    for t in [0.0, 1.0] {
        let report = consistency(std::slice::from_ref(&kg), "What does insulin do?", 10, &ExplainConfig::mock(t, 0))?;
        let part = &report.parts[0];
        println!(
            "T={t}: answer cosine std {:.4}, max attribution std {:.4}",
            part.answer_cosine_std, part.max_attribution_std
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> kgrag_explain::Result<()> {
    run()
}
