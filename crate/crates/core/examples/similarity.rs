// Compare answer embeddings with every text metric and the kernel.

use kgrag_explain::embedding::Embedder;
use kgrag_explain::similarity::{cosine, inverse_wd, kernel_weight, score_bundle, wasserstein, SimilarityConfig, TextMetric};

pub fn run() -> kgrag_explain::Result<()> {
    let embedder = Embedder::deterministic(256);
    let a = embedder.embed_text("insulin regulates glucose uptake in muscle.")?;
    let b = embedder.embed_text("insulin regulates glucose uptake.")?;

    println!("cosine      {:.6}", cosine(a.values(), b.values())?);
    println!("wasserstein {:.6}", wasserstein(a.values(), b.values(), 1.0)?);
    println!("inv_wd      {:.6}", inverse_wd(a.values(), b.values(), 1.0)?);

    let cfg = SimilarityConfig::default();
    let bundle = score_bundle(a.values(), b.values(), &cfg)?;
    for metric in TextMetric::ALL {
        println!("{:<14} {:.6}", metric.name(), bundle.target(metric));
    }
    let c = cosine(a.values(), b.values())?;
    println!("kernel weight {:.6}", kernel_weight(c, &cfg)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> kgrag_explain::Result<()> {
    run()
}
