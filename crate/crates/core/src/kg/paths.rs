use super::{Entity, KnowledgeGraph, Relation};
use crate::error::{Error, Result};

/// A non-empty sequence of relation labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationPath(Vec<Relation>);

impl RelationPath {
    pub fn new(relations: Vec<Relation>) -> Result<Self> {
        if relations.is_empty() {
            return Err(Error::Config("a relation path needs at least one relation".into()));
        }
        Ok(Self(relations))
    }

    pub fn from_labels<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::new(labels.into_iter().map(Relation::new).collect::<Result<_>>()?)
    }

    pub fn relations(&self) -> &[Relation] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// An instance of a relation path: `e0 -r1- e1 -r2- … -rl- el`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ReasoningPath {
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
}

impl ReasoningPath {
    /// Checks the length invariant and that every hop is a triple of `kg`,
    /// in either direction.
    pub fn validate(&self, kg: &KnowledgeGraph) -> Result<()> {
        if self.entities.len() != self.relations.len() + 1 {
            return Err(Error::Contract("path needs one more entity than relations".into()));
        }
        for (i, rel) in self.relations.iter().enumerate() {
            let (a, b) = (self.entities[i].as_str(), self.entities[i + 1].as_str());
            if !kg.contains(a, rel.as_str(), b) && !kg.contains(b, rel.as_str(), a) {
                return Err(Error::Contract(format!("hop {a} -[{rel}]- {b} is not in the graph")));
            }
        }
        Ok(())
    }
}

/// Enumerates simple paths from `start` whose edge labels follow `path`,
/// traversing triples in either direction. Results are sorted by their entity
/// sequence and truncated to `max_paths`.
pub fn find_reasoning_paths(
    kg: &KnowledgeGraph,
    start: &Entity,
    path: &RelationPath,
    max_paths: usize,
) -> Result<Vec<ReasoningPath>> {
    if !kg.has_entity(start.as_str()) {
        return Err(Error::UnknownEntity(start.to_string()));
    }
    let incidence = kg.incidence();
    let mut found = Vec::new();
    let mut stack = vec![start.clone()];
    extend(kg, &incidence, path.relations(), &mut stack, &mut found);
    found.sort();
    found.dedup();
    found.truncate(max_paths);
    Ok(found
        .into_iter()
        .map(|entities| ReasoningPath {
            entities,
            relations: path.relations().to_vec(),
        })
        .collect())
}

fn extend(
    kg: &KnowledgeGraph,
    incidence: &std::collections::BTreeMap<&str, Vec<usize>>,
    remaining: &[Relation],
    stack: &mut Vec<Entity>,
    found: &mut Vec<Vec<Entity>>,
) {
    let Some((rel, rest)) = remaining.split_first() else {
        found.push(stack.clone());
        return;
    };
    let tail = stack.last().expect("stack starts non-empty").clone();
    let Some(edges) = incidence.get(tail.as_str()) else {
        return;
    };
    for &i in edges {
        let t = &kg.triples()[i];
        if t.predicate != *rel {
            continue;
        }
        let Some(next) = t.other_end(tail.as_str()) else {
            continue;
        };
        if stack.contains(next) {
            continue;
        }
        stack.push(next.clone());
        extend(kg, incidence, rest, stack, found);
        stack.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supervises_then_works_on() {
        let kg = KnowledgeGraph::from_strs([
            ("Person 1", "Supervises", "Person 2"),
            ("Person 2", "Works on", "GraphRAG"),
        ])
        .unwrap();
        let z = RelationPath::from_labels(["Supervises", "Works on"]).unwrap();
        let paths = find_reasoning_paths(&kg, &Entity::new("Person 1").unwrap(), &z, 10).unwrap();
        assert_eq!(paths.len(), 1);
        let ids: Vec<_> = paths[0].entities.iter().map(Entity::as_str).collect();
        assert_eq!(ids, ["Person 1", "Person 2", "GraphRAG"]);
        paths[0].validate(&kg).unwrap();

        let missing = RelationPath::from_labels(["Funds"]).unwrap();
        assert!(find_reasoning_paths(&kg, &Entity::new("Person 1").unwrap(), &missing, 10)
            .unwrap()
            .is_empty());
        assert!(matches!(
            find_reasoning_paths(&kg, &Entity::new("Nobody").unwrap(), &z, 10),
            Err(Error::UnknownEntity(_))
        ));
    }

    #[test]
    fn undirected_and_truncated() {
        let kg = KnowledgeGraph::from_strs([("b", "r", "a"), ("c", "r", "a"), ("d", "r", "a")]).unwrap();
        let z = RelationPath::from_labels(["r"]).unwrap();
        let paths = find_reasoning_paths(&kg, &Entity::new("a").unwrap(), &z, 2).unwrap();
        let ends: Vec<_> = paths.iter().map(|p| p.entities[1].as_str()).collect();
        assert_eq!(ends, ["b", "c"]);
        assert!(RelationPath::new(vec![]).is_err());
    }
}
