mod common;

use std::collections::{BTreeMap, BTreeSet};

use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use kgrag_explain::embedding::Embedder;
use kgrag_explain::export::{export_dot, export_graphml, node_color, ColorScale, Report, RunManifest};
use kgrag_explain::generator::{build_prompt, Generator, MockGenerator};
use kgrag_explain::kg::{
    connected_components, filter_graph, find_reasoning_paths, partition, score_triple, select_top_components,
    Entity, FilterConfig, KnowledgeGraph, RelationPath,
};
use kgrag_explain::perturbation::{apply_mask, run_perturbations, sample_masks, PerturbationConfig, PerturbationMask};
use kgrag_explain::pipeline::{explain, ExplainConfig};
use kgrag_explain::reasoning::{
    extract_entities_relations, format_triples_for_prompt, generate_chain_of_thought, PROMPT_INSTRUCTION,
};
use kgrag_explain::similarity::{cosine, SimilarityConfig, TextMetric};
use kgrag_explain::surrogate::{build_design, fit_bayesian_ridge, fit_wls, DesignMatrix, DesignMode};

fn random_graph(rng: &mut ChaCha8Rng, n: usize, entities: usize) -> KnowledgeGraph {
    let mut facts = BTreeSet::new();
    while facts.len() < n {
        let s = rng.random_range(0..entities);
        let o = rng.random_range(0..entities);
        if s != o {
            facts.insert((format!("e{s}"), format!("r{}", rng.random_range(0..3)), format!("e{o}")));
        }
    }
    KnowledgeGraph::from_strs(facts.iter().map(|(s, p, o)| (s.as_str(), p.as_str(), o.as_str()))).unwrap()
}

#[test]
fn entity_count_matches_line_scan() {
    let raw = std::fs::read_to_string(fixture_path("stability_kg.json")).unwrap();
    let mut names = BTreeSet::new();
    for line in raw.lines() {
        let line = line.trim();
        for key in ["\"subject\":", "\"object\":"] {
            if let Some(rest) = line.strip_prefix(key) {
                names.insert(rest.trim().trim_end_matches(',').trim_matches('"').to_owned());
            }
        }
    }
    let kg = graph("stability_kg.json");
    assert_eq!(kg.len(), 12);
    assert_eq!(kg.entities().len(), names.len());
}

#[test]
fn filter_matches_brute_force_scores() {
    let kg = KnowledgeGraph::from_strs([
        ("diabetic peripheral angiopathy", "associated_with", "chronic hyperglycemia"),
        ("insulin", "regulates", "glucose"),
        ("diabetes", "causes", "neuropathy"),
        ("liver", "stores", "glycogen"),
        ("insulin resistance", "precedes", "diabetes"),
    ])
    .unwrap();
    let cfg = FilterConfig::new(["diabetes"], ["hyperglycemia", "diabetic"])
        .with_weights(2.0, 1.0)
        .unwrap()
        .with_min_score(1.5);
    let expected = [2.0, 0.0, 2.0, 0.0, 2.0];
    for (t, want) in kg.triples().iter().zip(expected) {
        assert_eq!(score_triple(t, &cfg), want, "{t}");
    }
    let kept: Vec<String> = filter_graph(&kg, &cfg).unwrap().triples().iter().map(|t| t.to_string()).collect();
    let oracle: Vec<String> = kg
        .triples()
        .iter()
        .zip(expected)
        .filter(|(_, s)| *s >= 1.5)
        .map(|(t, _)| t.to_string())
        .collect();
    assert_eq!(kept, oracle);
}

/// Label propagation until nothing changes.
fn component_labels(kg: &KnowledgeGraph) -> BTreeMap<String, usize> {
    let mut label: BTreeMap<String, usize> = kg.entities().iter().enumerate().map(|(i, e)| (e.to_string(), i)).collect();
    loop {
        let mut changed = false;
        for t in kg.triples() {
            let (a, b) = (label[t.subject.as_str()], label[t.object.as_str()]);
            if a != b {
                let m = a.min(b);
                *label.get_mut(t.subject.as_str()).unwrap() = m;
                *label.get_mut(t.object.as_str()).unwrap() = m;
                changed = true;
            }
        }
        if !changed {
            return label;
        }
    }
}

#[test]
fn components_match_label_propagation() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for _ in 0..20 {
        let kg = random_graph(&mut rng, 30, 40);
        let labels = component_labels(&kg);
        let mut oracle: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for t in kg.triples() {
            oracle.entry(labels[t.subject.as_str()]).or_default().insert(t.index);
        }
        let got: BTreeSet<BTreeSet<usize>> = connected_components(&kg)
            .iter()
            .map(|c| c.source_indices().iter().copied().collect())
            .collect();
        assert_eq!(got, oracle.into_values().collect());
    }
}

#[test]
fn top_three_components_sum_sizes() {
    let kg = KnowledgeGraph::from_strs([
        ("a", "r", "b"),
        ("b", "r", "c"),
        ("c", "r", "d"),
        ("e", "r", "f"),
        ("f", "r", "g"),
        ("h", "r", "i"),
        ("j", "r", "k"),
        ("k", "r", "l"),
        ("l", "r", "m"),
        ("m", "r", "n"),
        ("o", "r", "p"),
    ])
    .unwrap();
    let comps = connected_components(&kg);
    assert_eq!(comps.len(), 5);
    let mut sizes: Vec<usize> = comps.iter().map(KnowledgeGraph::len).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let top = select_top_components(&comps, 3).unwrap();
    assert_eq!(top.len(), sizes[..3].iter().sum::<usize>());
}

#[test]
fn partition_matches_division() {
    for n in 1..40 {
        let kg = random_graph(&mut ChaCha8Rng::seed_from_u64(n as u64), n, 60);
        for parts in 1..=n {
            let ranges = partition(&kg, parts).unwrap();
            let sizes: Vec<usize> = ranges.iter().map(|r| r.range.len()).collect();
            let oracle: Vec<usize> = (0..parts).map(|i| if i < n % parts { n / parts + 1 } else { n / parts }).collect();
            assert_eq!(sizes, oracle);
        }
    }
    let kg = random_graph(&mut ChaCha8Rng::seed_from_u64(23), 23, 60);
    let sizes: Vec<usize> = partition(&kg, 10).unwrap().iter().map(|r| r.range.len()).collect();
    assert_eq!(sizes, [3, 3, 3, 2, 2, 2, 2, 2, 2, 2]);
}

#[test]
fn depth_two_paths_match_enumeration() {
    let kg = KnowledgeGraph::from_strs([
        ("a", "r1", "b"),
        ("a", "r1", "c"),
        ("d", "r1", "a"),
        ("b", "r2", "e"),
        ("c", "r2", "f"),
        ("e", "r2", "c"),
        ("d", "r2", "g"),
        ("b", "r1", "c"),
    ])
    .unwrap();
    let schema = RelationPath::from_labels(["r1", "r2"]).unwrap();
    let got = find_reasoning_paths(&kg, &Entity::new("a").unwrap(), &schema, 100).unwrap();
    let mut oracle = BTreeSet::new();
    for t1 in kg.triples() {
        for t2 in kg.triples() {
            if t1.predicate.as_str() != "r1" || t2.predicate.as_str() != "r2" {
                continue;
            }
            let Some(mid) = t1.other_end("a") else { continue };
            let Some(end) = t2.other_end(mid.as_str()) else { continue };
            if end.as_str() != "a" && end != mid {
                oracle.insert(vec!["a".to_owned(), mid.to_string(), end.to_string()]);
            }
        }
    }
    let got: BTreeSet<Vec<String>> =
        got.iter().map(|p| p.entities.iter().map(|e| e.to_string()).collect()).collect();
    assert_eq!(got, oracle);
    assert!(!got.is_empty());
}

#[test]
fn graph_embedding_drop_matches_text_recomputation() {
    let kg = graph("critical.json");
    let smaller = apply_mask(&kg, &PerturbationMask::new((0..10).map(|i| i != 3).collect()).unwrap()).unwrap();
    let e = Embedder::deterministic(256);
    let got = cosine(e.embed_graph(&kg).unwrap().values(), e.embed_graph(&smaller).unwrap().values()).unwrap();
    let lines: Vec<String> = kg.triples().iter().map(|t| format!("{} {} {}", t.subject, t.predicate, t.object)).collect();
    let kept: Vec<String> = lines.iter().enumerate().filter(|(i, _)| *i != 3).map(|(_, l)| l.clone()).collect();
    let a = e.embed_text(&lines.join("\n")).unwrap();
    let b = e.embed_text(&kept.join("\n")).unwrap();
    assert!(got < 1.0);
    assert_abs_diff_eq!(got, cosine_oracle(a.values(), b.values()), epsilon = 1e-12);
}

#[test]
fn prompt_lines_match_assembly() {
    let kg = KnowledgeGraph::from_strs([("a", "r", "b"), ("c", "s", "d"), ("e", "t", "f")]).unwrap();
    let prompt = build_prompt("Why?", &kg, None);
    let oracle = ["a -[r]-> b", "c -[s]-> d", "e -[t]-> f", "", "Question: Why?"].join("\n");
    assert_eq!(prompt, oracle);
    assert_eq!(prompt.lines().count(), 5);
}

#[test]
fn mock_answer_matches_substring_oracle() {
    let kg = graph("critical.json");
    for q in ["What does insulin regulate?", "Where is glycogen stored?", "Which tissue stores triglycerides?", "Hello?"] {
        let answer = MockGenerator::new(0.0, 0).generate(q, &kg).unwrap().text;
        let tokens: Vec<String> = q
            .split(|c: char| !c.is_ascii_alphanumeric())
            .filter(|t| t.len() >= 4)
            .map(str::to_lowercase)
            .collect();
        let cited: Vec<String> = kg
            .triples()
            .iter()
            .filter(|t| {
                let (s, o) = (t.subject.as_str().to_lowercase(), t.object.as_str().to_lowercase());
                tokens.iter().any(|tok| s.contains(tok) || o.contains(tok))
            })
            .map(|t| format!("{} {} {}.", t.subject, t.predicate, t.object))
            .collect();
        let oracle = if cited.is_empty() { "I do not know.".to_owned() } else { cited.join(" ") };
        assert_eq!(answer, oracle, "{q}");
    }
}

#[test]
fn removal_fraction_matches_binomial_mean() {
    let cfg = PerturbationConfig {
        num_samples: 1000,
        seed: 4,
        allow_duplicates: true,
        ..PerturbationConfig::default()
    };
    let masks = sample_masks(10, &cfg).unwrap();
    let mean = masks.iter().map(PerturbationMask::removed_fraction).sum::<f64>() / 1000.0;
    assert!((mean - 0.5).abs() <= 0.05, "{mean}");
}

#[test]
fn mask_filter_matches_list_oracle() {
    let kg = KnowledgeGraph::from_strs([
        ("a", "r", "b"),
        ("b", "r", "c"),
        ("c", "r", "d"),
        ("d", "r", "e"),
        ("e", "r", "f"),
        ("f", "r", "g"),
    ])
    .unwrap();
    let bits = [true, false, true, true, false, true];
    let got = apply_mask(&kg, &PerturbationMask::new(bits.to_vec()).unwrap()).unwrap();
    let oracle: Vec<String> = kg.triples().iter().zip(bits).filter(|(_, k)| *k).map(|(t, _)| t.to_string()).collect();
    assert_eq!(got.triples().iter().map(|t| t.to_string()).collect::<Vec<_>>(), oracle);
}

fn eight_triples() -> KnowledgeGraph {
    let kg = graph("critical.json");
    apply_mask(&kg, &PerturbationMask::new((0..10).map(|i| i < 8).collect()).unwrap()).unwrap()
}

#[test]
fn critical_removal_lowers_recomputed_cosine() {
    let kg = eight_triples();
    let cfg = ExplainConfig::mock(0.0, 12);
    let run = run_perturbations(&kg, CRITICAL_QUESTION, &cfg.generator, &cfg.embedder, &cfg.perturbation, &cfg.similarity)
        .unwrap();
    let generator = MockGenerator::new(0.0, 12);
    let embedder = Embedder::deterministic(256);
    let original = embedder.embed_text(&generator.generate(CRITICAL_QUESTION, &kg).unwrap().text).unwrap();
    let (mut kept, mut removed) = (Vec::new(), Vec::new());
    for s in &run.samples {
        let sub = apply_mask(&kg, &s.mask).unwrap();
        let answer = generator.generate(CRITICAL_QUESTION, &sub).unwrap().text;
        let c = cosine_oracle(original.values(), embedder.embed_text(&answer).unwrap().values());
        assert_abs_diff_eq!(c, s.text_scores.cosine, epsilon = 1e-12);
        if s.mask.keep()[CRITICAL_INDEX] { kept.push(c) } else { removed.push(c) }
    }
    assert!(!kept.is_empty() && !removed.is_empty());
    let worst_kept = kept.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(removed.iter().all(|r| *r < worst_kept));
}

#[test]
fn design_matches_mask_transcription() {
    let kg = eight_triples();
    let cfg = ExplainConfig::mock(0.0, 3);
    let run = run_perturbations(&kg, CRITICAL_QUESTION, &cfg.generator, &cfg.embedder, &cfg.perturbation, &cfg.similarity)
        .unwrap();
    let design = build_design(&run, TextMetric::InvWd, DesignMode::Standard).unwrap();
    assert_eq!((design.n_samples(), design.n_features()), (20, 8));
    for (row, s) in design.rows().iter().zip(&run.samples) {
        let oracle: Vec<f64> = s.mask.keep().iter().map(|k| if *k { 1.0 } else { 0.0 }).collect();
        assert_eq!(row, &oracle);
    }
    let y: Vec<f64> = run.samples.iter().map(|s| s.text_scores.inv_wd).collect();
    assert_eq!(design.targets(), &y[..]);
    let w: Vec<f64> = run.samples.iter().map(|s| s.kernel_weight).collect();
    assert_eq!(design.weights(), &w[..]);
}

#[test]
fn bayes_tracks_wls_on_planted_signal() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> =
        (0..60).map(|_| (0..6).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|r| 0.3 + 0.5 * r[0] - 0.2 * r[2]).collect();
    let w: Vec<f64> = (0..60).map(|_| rng.random_range(0.2..1.0)).collect();
    let design = DesignMatrix::new(rows, y, w).unwrap();
    let (wls, bayes) = (fit_wls(&design).unwrap(), fit_bayesian_ridge(&design).unwrap());
    for (a, b) in wls.coefficients.iter().zip(&bayes.coefficients) {
        assert!((a - b).abs() <= 1e-3, "{a} vs {b}");
    }
}

#[test]
fn node_scores_match_incidence_scan() {
    let kg = eight_triples();
    let ex = explain(&kg, CRITICAL_QUESTION, &ExplainConfig::mock(0.0, 2)).unwrap();
    assert_eq!(ex.report.ranking[0], CRITICAL_INDEX);
    for (node, score) in &ex.report.node_scores {
        let oracle = kg
            .triples()
            .iter()
            .filter(|t| t.subject.as_str() == node || t.object.as_str() == node)
            .map(|t| ex.fit.coefficients[t.index])
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(*score, oracle, "{node}");
    }
    let top = ex.report.node_intensity.values().copied().fold(f64::NEG_INFINITY, f64::max);
    for node in critical_truth() {
        assert_eq!(ex.report.node_intensity[&node], top);
    }
}

#[test]
fn wls_solves_weighted_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let rows: Vec<Vec<f64>> =
            (0..15).map(|_| (0..5).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect()).collect();
        let y: Vec<f64> = (0..15).map(|_| rng.random_range(0.0..1.0)).collect();
        let w: Vec<f64> = (0..15).map(|_| rng.random_range(0.1..1.0)).collect();
        let fit = fit_wls(&DesignMatrix::new(rows.clone(), y.clone(), w.clone()).unwrap()).unwrap();
        let beta: Vec<f64> = std::iter::once(fit.intercept).chain(fit.coefficients.iter().copied()).collect();
        for j in 0..6 {
            let residual: f64 = rows
                .iter()
                .zip(&y)
                .zip(&w)
                .map(|((r, yi), wi)| {
                    let x = |k: usize| if k == 0 { 1.0 } else { r[k - 1] };
                    let pred: f64 = (0..6).map(|k| beta[k] * x(k)).sum();
                    wi * x(j) * (yi - pred)
                })
                .sum();
            assert!(residual.abs() <= 1e-8, "{residual}");
        }
    }
}

#[test]
fn longest_match_agrees_with_substring_scan() {
    let kg = KnowledgeGraph::from_strs([
        ("insulin", "interacts_with", "insulin receptor"),
        ("insulin-like growth factor receptor binding", "expression_present", "liver"),
        ("liver", "stores", "glycogen"),
        ("glycogen synthase", "acts_on", "glycogen"),
    ])
    .unwrap();
    for q in [
        "Is insulin-like growth factor receptor binding relevant?",
        "Does insulin bind the insulin receptor?",
        "How does glycogen synthase relate to the liver and glycogen?",
        "Nothing to see",
    ] {
        let ql = q.to_lowercase();
        let labels: Vec<String> = kg.entities().iter().map(|e| e.to_string()).collect();
        let mut hits: Vec<(usize, usize, String)> = Vec::new();
        for i in 0..ql.len() {
            for j in i + 1..=ql.len() {
                if let Some(l) = labels.iter().find(|l| l.to_lowercase() == ql[i..j]) {
                    hits.push((i, j, l.clone()));
                }
            }
        }
        hits.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.2.cmp(&b.2)).then(a.0.cmp(&b.0)));
        let mut taken: Vec<(usize, usize)> = Vec::new();
        let mut oracle = BTreeSet::new();
        for (i, j, l) in hits {
            if oracle.contains(&l) || taken.iter().any(|&(a, b)| i < b && a < j) {
                continue;
            }
            taken.push((i, j));
            oracle.insert(l);
        }
        let (got, _) = extract_entities_relations(q, &kg);
        assert_eq!(got.into_iter().collect::<BTreeSet<_>>(), oracle, "{q}");
    }
}

/// Lexicographically smallest maximal chain under the step key
/// `(not wanted, triple index)`.
fn best_chain(kg: &KnowledgeGraph, start: &str, wanted: &BTreeSet<String>, depth: usize) -> Vec<usize> {
    fn walk(
        kg: &KnowledgeGraph,
        tail: &str,
        visited: &mut Vec<String>,
        chain: &mut Vec<usize>,
        wanted: &BTreeSet<String>,
        depth: usize,
        out: &mut Vec<Vec<(bool, usize)>>,
    ) {
        let mut extended = false;
        if chain.len() < depth {
            for t in kg.triples() {
                if chain.contains(&t.index) {
                    continue;
                }
                let Some(next) = t.other_end(tail) else { continue };
                if visited.iter().any(|v| v == next.as_str()) {
                    continue;
                }
                extended = true;
                visited.push(next.to_string());
                chain.push(t.index);
                walk(kg, next.as_str(), visited, chain, wanted, depth, out);
                chain.pop();
                visited.pop();
            }
        }
        if !extended {
            out.push(
                chain
                    .iter()
                    .map(|&i| {
                        let t = &kg.triples()[i];
                        let far = if visited.iter().position(|v| v == t.subject.as_str())
                            < visited.iter().position(|v| v == t.object.as_str())
                        {
                            &t.object
                        } else {
                            &t.subject
                        };
                        (!wanted.contains(far.as_str()), i)
                    })
                    .collect(),
            );
        }
    }
    let mut out = Vec::new();
    walk(kg, start, &mut vec![start.to_owned()], &mut Vec::new(), wanted, depth, &mut out);
    out.into_iter().min().unwrap_or_default().into_iter().map(|(_, i)| i).collect()
}

#[test]
fn chains_match_exhaustive_enumeration() {
    let branching = KnowledgeGraph::from_strs([
        ("alpha", "r", "beta"),
        ("alpha", "r", "gamma"),
        ("gamma", "s", "delta"),
        ("beta", "s", "epsilon"),
        ("delta", "t", "alpha"),
        ("epsilon", "t", "zeta"),
        ("gamma", "u", "zeta"),
    ])
    .unwrap();
    let questions = [
        "How is alpha linked to delta?",
        "Does alpha reach zeta?",
        "alpha and epsilon",
        "Start at gamma, end at beta",
    ];
    for kg in [branching, graph("chain.json")] {
        for q in questions.iter().copied().chain(["How does glucose binding relate to disease?"]) {
            let (entities, _) = extract_entities_relations(q, &kg);
            let chain = generate_chain_of_thought(&kg, q, 4);
            chain.validate(&kg).unwrap();
            let Some(start) = entities.first() else {
                assert!(chain.is_empty());
                continue;
            };
            let wanted: BTreeSet<String> = entities.iter().cloned().collect();
            let got: Vec<usize> = chain.triples.iter().map(|t| t.index).collect();
            assert_eq!(got, best_chain(&kg, start, &wanted, 4), "{q}");
        }
    }
}

#[test]
fn prompt_formatting_matches_assembly() {
    let kg = graph("chain.json");
    let chain = generate_chain_of_thought(&kg, "Link glucose binding to calcium-release channel activity", 4);
    assert_eq!(chain.len(), 3);
    let mut oracle = String::new();
    for (i, t) in chain.triples.iter().enumerate() {
        oracle += &format!("Step {}: {} → [{}] → {}\n", i + 1, t.subject, t.predicate.as_str().replace('_', " "), t.object);
    }
    oracle += PROMPT_INSTRUCTION;
    let text = format_triples_for_prompt(&chain);
    assert_eq!(text, oracle);
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn color_interpolation_matches_hand_rounding() {
    let channel = |t: f64| {
        let v = 255.0 + (0.0 - 255.0) * t;
        (v + 0.5).floor() as u8
    };
    for k in 0..=20 {
        let t = k as f64 / 20.0;
        let g = channel(t);
        assert_eq!(node_color(t), format!("#FF{g:02X}{g:02X}"), "{t}");
    }
    assert_eq!(node_color(0.5), "#FF8080");
}

fn critical_explanation() -> (KnowledgeGraph, kgrag_explain::pipeline::Explanation) {
    let kg = eight_triples();
    let ex = explain(&kg, CRITICAL_QUESTION, &ExplainConfig::mock(0.0, 1)).unwrap();
    (kg, ex)
}

#[test]
fn graphml_parses_with_expected_elements() {
    let (kg, ex) = critical_explanation();
    let text = export_graphml(&kg, &ex.report).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let edges: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("edge")).collect();
    let nodes: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("node")).collect();
    assert_eq!(edges.len(), 8);
    assert_eq!(nodes.len(), kg.entities().len());
    for (edge, t) in edges.iter().zip(kg.triples()) {
        assert_eq!(edge.attribute("source"), Some(t.subject.as_str()));
        assert_eq!(edge.attribute("target"), Some(t.object.as_str()));
        let score: f64 = edge
            .children()
            .find(|c| c.attribute("key") == Some("es"))
            .and_then(|c| c.text())
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(score, ex.report.triple_scores[t.index]);
    }
}

/// Statements of a flat undirected DOT graph: `(kind, ids, attributes)`.
fn parse_dot(text: &str) -> Vec<(String, Vec<String>, BTreeMap<String, String>)> {
    fn quoted(s: &str) -> (String, &str) {
        let mut out = String::new();
        let mut chars = s.strip_prefix('"').expect("quoted id").char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => out.push(chars.next().unwrap().1),
                '"' => return (out, &s[i + 2..]),
                c => out.push(c),
            }
        }
        panic!("unterminated string");
    }
    let body: Vec<&str> = text.lines().filter(|l| !l.trim_start().starts_with("//")).collect();
    let body = body.join("\n");
    let inner = body
        .trim()
        .strip_prefix("graph G {")
        .and_then(|b| b.strip_suffix('}'))
        .expect("graph G { ... }");
    let mut out = Vec::new();
    for stmt in inner.split(";\n").map(str::trim).filter(|s| !s.is_empty()) {
        let stmt = stmt.trim_end_matches(';');
        if let Some(rest) = stmt.strip_prefix("node ") {
            out.push(("default".into(), vec![], attrs(rest)));
            continue;
        }
        let (a, rest) = quoted(stmt);
        let rest = rest.trim_start();
        if let Some(rest) = rest.strip_prefix("-- ") {
            let (b, rest) = quoted(rest);
            out.push(("edge".into(), vec![a, b], attrs(rest.trim())));
        } else {
            out.push(("node".into(), vec![a], attrs(rest)));
        }
    }
    fn attrs(s: &str) -> BTreeMap<String, String> {
        let s = s.trim().strip_prefix('[').and_then(|s| s.strip_suffix(']')).expect("attribute list");
        let mut map = BTreeMap::new();
        let mut rest = s.trim();
        while !rest.is_empty() {
            let (key, after) = rest.split_once('=').expect("key=value");
            let (value, after) = if after.starts_with('"') {
                quoted(after)
            } else {
                let end = after.find(',').unwrap_or(after.len());
                (after[..end].to_owned(), &after[end..])
            };
            map.insert(key.trim().to_owned(), value);
            rest = after.trim_start_matches(',').trim();
        }
        map
    }
    out
}

#[test]
fn dot_parses_with_expected_statements() {
    let (kg, ex) = critical_explanation();
    let text = export_dot(&kg, &ex.report, ColorScale::Sequential).unwrap();
    let stmts = parse_dot(&text);
    let edges: Vec<_> = stmts.iter().filter(|s| s.0 == "edge").collect();
    let nodes: Vec<_> = stmts.iter().filter(|s| s.0 == "node").collect();
    assert_eq!(edges.len(), 8);
    assert_eq!(nodes.len(), kg.entities().len());
    for (e, t) in edges.iter().zip(kg.triples()) {
        assert_eq!(e.1, vec![t.subject.to_string(), t.object.to_string()]);
        assert_eq!(e.2["label"], t.predicate.as_str());
        assert_eq!(e.2["score"].parse::<f64>().unwrap(), ex.report.triple_scores[t.index]);
    }
    let quirky = KnowledgeGraph::from_strs([("say \"hi\"", "r", "back\\slash")]).unwrap();
    let ex = explain(&quirky, "say hi", &ExplainConfig::mock(0.0, 0));
    if let Ok(ex) = ex {
        let stmts = parse_dot(&export_dot(&quirky, &ex.report, ColorScale::Diverging).unwrap());
        assert!(stmts.iter().any(|s| s.1.contains(&"say \"hi\"".to_owned())));
    }
}

#[test]
fn report_parses_back_at_full_precision() {
    let (kg, ex) = critical_explanation();
    let manifest = RunManifest::start(serde_json::json!({"seed": 1}), BTreeMap::from([("perturbation".to_owned(), 1)]));
    let report = Report::new(&manifest).explanation(&kg, CRITICAL_QUESTION, &ex).unwrap();
    let bytes = report.to_bytes().unwrap();
    let parsed: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(parsed, report.value());
    let mut numbers = Vec::new();
    fn collect(v: &serde_json::Value, out: &mut Vec<f64>) {
        match v {
            serde_json::Value::Number(n) => out.push(n.as_f64().unwrap()),
            serde_json::Value::Array(a) => a.iter().for_each(|x| collect(x, out)),
            serde_json::Value::Object(o) => o.values().for_each(|x| collect(x, out)),
            _ => {}
        }
    }
    collect(&parsed, &mut numbers);
    for c in &ex.fit.coefficients {
        assert!(numbers.iter().any(|n| n.to_bits() == c.to_bits()), "{c} lost precision");
    }
}

#[test]
fn hybrid_composes_component_oracles() {
    let cfg = SimilarityConfig::default();
    let (u, v) = ([1.0, 0.0], [1.0, 1.0]);
    let wd = wasserstein_brute(&u, &v, 1.0);
    let expected = 0.5 * ((cosine_oracle(&u, &v) + 1.0) / 2.0) + 0.5 / (1.0 + wd);
    let got = kgrag_explain::similarity::hybrid(&u, &v, &cfg).unwrap();
    assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
}
