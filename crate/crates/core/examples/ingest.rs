// Parse a triples file, filter it by topic, keep the largest component and
// split it into index ranges.

use kgrag_explain::kg::{
    connected_components, filter_graph, parse_triples, partition, select_top_components, FilterConfig, InputFormat,
};

const TRIPLES: &str = r#"[
  {"subject": "insulin", "predicate": "regulates", "object": "glucose uptake in muscle"},
  {"subject": "insulin", "predicate": "produced_by", "object": "pancreas"},
  {"subject": "glucagon", "predicate": "raises", "object": "blood glucose"},
  {"subject": "pancreas", "predicate": "secretes", "object": "glucagon"},
  {"subject": "comet", "predicate": "orbits", "object": "distant star"},
  {"subject": "insulin", "predicate": "regulates", "object": "glucose uptake in muscle"}
]"#;

pub fn run() -> kgrag_explain::Result<()> {
    let kg = parse_triples(TRIPLES.as_bytes(), InputFormat::TriplesJson)?;
    println!("{} triples, {} duplicate dropped", kg.len(), kg.duplicates_dropped());

    let cfg = FilterConfig::new(["insulin", "glucose", "pancreas"], ["muscle"]);
    let topical = filter_graph(&kg, &cfg)?;
    println!("filter kept {} triples", topical.len());

    let components = connected_components(&kg);
    let main = select_top_components(&components, 1)?;
    println!("{} components, largest has {} triples", components.len(), main.len());

    for part in partition(&main, 2)? {
        println!("part {}: {:?}", part.part_id, part.range);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> kgrag_explain::Result<()> {
    run()
}
