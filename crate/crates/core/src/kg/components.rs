use std::collections::HashMap;
use std::ops::Range;

use super::KnowledgeGraph;
use crate::error::{Error, Result};

/// A contiguous slice of triple indices assigned to one part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartRange {
    pub part_id: usize,
    pub range: Range<usize>,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so results do not depend on call order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Undirected connected components, largest first; equal sizes are ordered by
/// their smallest triple index. Each component keeps its parent-graph order.
pub fn connected_components(kg: &KnowledgeGraph) -> Vec<KnowledgeGraph> {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    for t in kg.triples() {
        for e in [t.subject.as_str(), t.object.as_str()] {
            let next = ids.len();
            ids.entry(e).or_insert(next);
        }
    }
    let mut sets = DisjointSet::new(ids.len());
    for t in kg.triples() {
        sets.union(ids[t.subject.as_str()], ids[t.object.as_str()]);
    }

    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for t in kg.triples() {
        let root = sets.find(ids[t.subject.as_str()]);
        groups.entry(root).or_default().push(t.index);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    groups.into_iter().map(|g| kg.subgraph(g)).collect()
}

/// Union of the first `k` components, in the order their triples had in the
/// graph the components were taken from.
pub fn select_top_components(components: &[KnowledgeGraph], k: usize) -> Result<KnowledgeGraph> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut picked: Vec<(usize, &super::Triple)> = components
        .iter()
        .take(k)
        .flat_map(|c| c.source_indices().iter().copied().zip(c.triples()))
        .collect();
    picked.sort_by_key(|(source, _)| *source);
    let mut graph = KnowledgeGraph::default();
    for (index, (source, triple)) in picked.into_iter().enumerate() {
        let mut triple = triple.clone();
        triple.index = index;
        graph.push(triple, source);
    }
    Ok(graph)
}

/// Splits `0..kg.len()` into `parts` contiguous ranges whose sizes differ by at
/// most one, the earlier parts taking the remainder.
pub fn partition(kg: &KnowledgeGraph, parts: usize) -> Result<Vec<PartRange>> {
    let n = kg.len();
    if parts == 0 {
        return Err(Error::Config("parts must be at least 1".into()));
    }
    if parts > n {
        return Err(Error::Config(format!(
            "cannot split {n} triple(s) into {parts} parts"
        )));
    }
    let (base, extra) = (n / parts, n % parts);
    let mut start = 0;
    Ok((0..parts)
        .map(|part_id| {
            let size = base + usize::from(part_id < extra);
            let range = start..start + size;
            start += size;
            PartRange { part_id, range }
        })
        .collect())
}
