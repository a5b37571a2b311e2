// Inject an unrelated triple and compare the top attributed nodes.

use kgrag_explain::eval::stability_run;
use kgrag_explain::prelude::*;

pub fn run() -> kgrag_explain::Result<()> {
    let kg = KnowledgeGraph::from_strs([
        ("insulin", "regulates", "glucose uptake in muscle"),
        ("hemoglobin", "carries", "oxygen"),
        ("pepsin", "digests", "protein"),
        ("liver", "stores", "glycogen"),
    ])?;
    let cfg = ExplainConfig::default();
    let question = "What does insulin regulate?";

    let unrelated = stability_run(&kg, question, ("comet", "orbits", "distant star"), &cfg, 2)?;
    println!("unrelated injection: jaccard {:.3}", unrelated.jaccard);

    let cited = ("insulin", "modulates", "numerous unrelated peripheral pathways");
    let r = stability_run(&kg, question, cited, &cfg, 2)?;
    println!("cited injection: jaccard {:.3}", r.jaccard);
    println!("  before {:?}", r.original_nodes);
    println!("  after  {:?}", r.perturbed_nodes);
    Ok(())
}

#[allow(dead_code)]
fn main() -> kgrag_explain::Result<()> {
    run()
}
