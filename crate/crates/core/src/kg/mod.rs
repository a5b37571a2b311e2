//! Knowledge graphs of subject–predicate–object triples.
//!
//! A [`KnowledgeGraph`] is immutable once built. Every operation that narrows
//! or extends a graph returns a fresh graph with contiguous triple indices and
//! remembers, per triple, the index it had in the graph it was derived from.

mod components;
mod filter;
mod parse;
mod paths;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use components::{connected_components, partition, select_top_components, PartRange};
pub use filter::{filter_graph, score_triple, FilterConfig, MatchMode};
pub use parse::{parse_qa_items, parse_triples, InputFormat, QaItem};
pub use paths::{find_reasoning_paths, ReasoningPath, RelationPath};

macro_rules! label_type {
    ($name:ident, $what:literal) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            /// Trims surrounding whitespace; rejects labels that end up empty.
            pub fn new(label: impl AsRef<str>) -> Result<Self> {
                let trimmed = label.as_ref().trim();
                if trimmed.is_empty() {
                    return Err(Error::Contract(concat!($what, " label is empty").into()));
                }
                Ok(Self(trimmed.to_owned()))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;
            fn try_from(value: String) -> Result<Self> {
                Self::new(value)
            }
        }

        impl From<$name> for String {
            fn from(value: $name) -> String {
                value.0
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

label_type!(Entity, "entity");
label_type!(Relation, "relation");

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    pub subject: Entity,
    pub predicate: Relation,
    pub object: Entity,
    /// Position in the owning graph.
    pub index: usize,
}

impl Triple {
    pub fn key(&self) -> (&str, &str, &str) {
        (
            self.subject.as_str(),
            self.predicate.as_str(),
            self.object.as_str(),
        )
    }

    /// True when `entity` is the subject or the object.
    pub fn touches(&self, entity: &str) -> bool {
        self.subject.as_str() == entity || self.object.as_str() == entity
    }

    /// The endpoint across the edge from `entity`, if `entity` is an endpoint.
    pub fn other_end(&self, entity: &str) -> Option<&Entity> {
        if self.subject.as_str() == entity {
            Some(&self.object)
        } else if self.object.as_str() == entity {
            Some(&self.subject)
        } else {
            None
        }
    }

    /// `"subject predicate object"`, the canonical text form used for
    /// embedding and term scoring.
    pub fn sentence(&self) -> String {
        format!("{} {} {}", self.subject, self.predicate, self.object)
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -[{}]-> {}", self.subject, self.predicate, self.object)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TripleRecord<'a> {
    subject: &'a str,
    predicate: &'a str,
    object: &'a str,
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    triples: Vec<Triple>,
    entities: BTreeSet<Entity>,
    relations: BTreeSet<Relation>,
    source_indices: Vec<usize>,
    duplicates_dropped: usize,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.triples == other.triples
    }
}

impl Eq for KnowledgeGraph {}

impl KnowledgeGraph {
    /// Builds a graph from facts in source order. Repeated facts are dropped
    /// (first occurrence wins) and counted in [`duplicates_dropped`](Self::duplicates_dropped).
    pub fn from_facts<I>(facts: I) -> Self
    where
        I: IntoIterator<Item = (Entity, Relation, Entity)>,
    {
        let mut graph = Self::default();
        let mut seen = HashSet::new();
        for (subject, predicate, object) in facts {
            if !seen.insert((subject.clone(), predicate.clone(), object.clone())) {
                graph.duplicates_dropped += 1;
                continue;
            }
            let index = graph.triples.len();
            graph.push(
                Triple {
                    subject,
                    predicate,
                    object,
                    index,
                },
                index,
            );
        }
        if graph.duplicates_dropped > 0 {
            log::warn!("dropped {} duplicate triple(s)", graph.duplicates_dropped);
        }
        graph
    }

    /// Convenience constructor from string triples.
    pub fn from_strs<'a, I>(facts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    {
        let facts = facts
            .into_iter()
            .map(|(s, p, o)| Ok((Entity::new(s)?, Relation::new(p)?, Entity::new(o)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_facts(facts))
    }

    fn push(&mut self, triple: Triple, source: usize) {
        self.entities.insert(triple.subject.clone());
        self.entities.insert(triple.object.clone());
        self.relations.insert(triple.predicate.clone());
        self.triples.push(triple);
        self.source_indices.push(source);
    }

    /// New graph keeping the triples at `positions` (in the given order),
    /// re-indexed from zero.
    pub(crate) fn subgraph<I>(&self, positions: I) -> Self
    where
        I: IntoIterator<Item = usize>,
    {
        let mut graph = Self::default();
        for (index, pos) in positions.into_iter().enumerate() {
            let mut triple = self.triples[pos].clone();
            triple.index = index;
            graph.push(triple, pos);
        }
        graph
    }

    /// Returns a copy with one extra triple appended, or an error if an equal
    /// fact is already present.
    pub fn with_triple(&self, subject: Entity, predicate: Relation, object: Entity) -> Result<Self> {
        if self.contains(subject.as_str(), predicate.as_str(), object.as_str()) {
            return Err(Error::Contract(format!(
                "triple ({subject}, {predicate}, {object}) already present"
            )));
        }
        let mut graph = self.subgraph(0..self.len());
        let index = graph.len();
        graph.push(
            Triple {
                subject,
                predicate,
                object,
                index,
            },
            index,
        );
        Ok(graph)
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn entities(&self) -> &BTreeSet<Entity> {
        &self.entities
    }

    pub fn relations(&self) -> &BTreeSet<Relation> {
        &self.relations
    }

    /// For each triple, its index in the graph this one was derived from.
    pub fn source_indices(&self) -> &[usize] {
        &self.source_indices
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, subject: &str, predicate: &str, object: &str) -> bool {
        self.triples
            .iter()
            .any(|t| t.key() == (subject, predicate, object))
    }

    pub fn has_entity(&self, id: &str) -> bool {
        self.entities.contains(id)
    }

    /// Undirected adjacency: entity id → indices of incident triples, ascending.
    pub fn incidence(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for t in &self.triples {
            map.entry(t.subject.as_str()).or_default().push(t.index);
            if t.object != t.subject {
                map.entry(t.object.as_str()).or_default().push(t.index);
            }
        }
        map
    }

    /// Canonical text used for graph embeddings: one `"s p o"` line per triple.
    pub fn canonical_text(&self) -> String {
        self.triples
            .iter()
            .map(Triple::sentence)
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Serializes to the `triples-json` file format.
    pub fn to_triples_json(&self) -> String {
        let records: Vec<_> = self
            .triples
            .iter()
            .map(|t| TripleRecord {
                subject: t.subject.as_str(),
                predicate: t.predicate.as_str(),
                object: t.object.as_str(),
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("string records always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_trimmed_and_non_empty() {
        assert_eq!(Entity::new("  insulin ").unwrap().as_str(), "insulin");
        assert!(Entity::new(" \t").is_err());
        assert_ne!(Entity::new("Insulin").unwrap(), Entity::new("insulin").unwrap());
    }

    #[test]
    fn derived_sets_and_dedupe() {
        let kg = KnowledgeGraph::from_strs([
            ("a", "r", "b"),
            ("b", "s", "c"),
            ("a", "r", "b"),
        ])
        .unwrap();
        assert_eq!(kg.len(), 2);
        assert_eq!(kg.duplicates_dropped(), 1);
        assert_eq!(kg.entities().len(), 3);
        assert_eq!(kg.relations().len(), 2);
        assert_eq!(
            kg.triples().iter().map(|t| t.index).collect::<Vec<_>>(),
            vec![0, 1]
        );
    }

    #[test]
    fn with_triple_appends_and_rejects_existing() {
        let kg = KnowledgeGraph::from_strs([("a", "r", "b")]).unwrap();
        let bigger = kg
            .with_triple(
                Entity::new("c").unwrap(),
                Relation::new("r").unwrap(),
                Entity::new("d").unwrap(),
            )
            .unwrap();
        assert_eq!(bigger.len(), 2);
        assert_eq!(bigger.triples()[1].index, 1);
        assert!(kg
            .with_triple(
                Entity::new("a").unwrap(),
                Relation::new("r").unwrap(),
                Entity::new("b").unwrap()
            )
            .is_err());
    }
}
