use serde_json::Value;

use super::{Entity, KnowledgeGraph, Relation};
use crate::error::{Error, Result};

/// On-disk input formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    /// Array of `{"subject", "predicate", "object"}` records.
    TriplesJson,
    /// Array of `{"question", "answer"?, "ground_truth_nodes"?}` records.
    QaJson,
}

/// A question with its optional reference answer and the node ids an ideal
/// explanation should highlight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaItem {
    pub question: String,
    pub reference_answer: Option<String>,
    pub ground_truth_nodes: Vec<String>,
}

impl QaItem {
    pub fn new(question: impl Into<String>) -> Self {
        Self {
            question: question.into(),
            reference_answer: None,
            ground_truth_nodes: Vec::new(),
        }
    }

    /// Ground-truth ids that are not entities of `kg`. These are warnings,
    /// not errors: the item remains usable.
    pub fn unknown_ground_truth<'a>(&'a self, kg: &KnowledgeGraph) -> Vec<&'a str> {
        self.ground_truth_nodes
            .iter()
            .map(String::as_str)
            .filter(|id| !kg.has_entity(id))
            .collect()
    }
}

fn decode(bytes: &[u8]) -> Result<Vec<Value>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        offset: e.valid_up_to(),
        message: "input is not valid UTF-8".into(),
    })?;
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    match value {
        Value::Array(items) => Ok(items),
        _ => Err(Error::field("$", "expected a top-level array")),
    }
}

/// serde_json reports 1-based line and column; convert to a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn required_str<'a>(record: &'a Value, index: usize, field: &str) -> Result<&'a str> {
    match record.get(field) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(Error::field(format!("[{index}].{field}"), "expected a string")),
        None => Err(Error::field(format!("[{index}].{field}"), "missing required field")),
    }
}

fn optional_str<'a>(record: &'a Value, index: usize, field: &str) -> Result<Option<&'a str>> {
    match record.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(Error::field(format!("[{index}].{field}"), "expected a string")),
    }
}

fn label<'a, T>(make: impl FnOnce(&'a str) -> Result<T>, raw: &'a str, index: usize, field: &str) -> Result<T> {
    make(raw).map_err(|_| Error::field(format!("[{index}].{field}"), "empty after trimming"))
}

/// Parses a `triples-json` document into a graph. File order is preserved
/// (minus duplicates); unknown fields are ignored.
pub fn parse_triples(bytes: &[u8], format: InputFormat) -> Result<KnowledgeGraph> {
    if format == InputFormat::QaJson {
        return Err(Error::Config(
            "qa-json files carry questions, not triples; use parse_qa_items".into(),
        ));
    }
    let records = decode(bytes)?;
    if records.is_empty() {
        return Err(Error::EmptyGraph("the triple list is empty".into()));
    }
    let mut facts = Vec::with_capacity(records.len());
    for (index, record) in records.iter().enumerate() {
        if !record.is_object() {
            return Err(Error::field(format!("[{index}]"), "expected an object"));
        }
        let subject = label(Entity::new, required_str(record, index, "subject")?, index, "subject")?;
        let predicate = label(
            Relation::new,
            required_str(record, index, "predicate")?,
            index,
            "predicate",
        )?;
        let object = label(Entity::new, required_str(record, index, "object")?, index, "object")?;
        facts.push((subject, predicate, object));
    }
    Ok(KnowledgeGraph::from_facts(facts))
}

/// Parses a `qa-json` document.
pub fn parse_qa_items(bytes: &[u8]) -> Result<Vec<QaItem>> {
    let records = decode(bytes)?;
    records
        .iter()
        .enumerate()
        .map(|(index, record)| {
            if !record.is_object() {
                return Err(Error::field(format!("[{index}]"), "expected an object"));
            }
            let question = required_str(record, index, "question")?.to_owned();
            let reference_answer = optional_str(record, index, "answer")?.map(str::to_owned);
            let ground_truth_nodes = match record.get("ground_truth_nodes") {
                None | Some(Value::Null) => Vec::new(),
                Some(Value::Array(ids)) => ids
                    .iter()
                    .enumerate()
                    .map(|(j, id)| match id {
                        Value::String(s) => Ok(s.trim().to_owned()),
                        _ => Err(Error::field(
                            format!("[{index}].ground_truth_nodes[{j}]"),
                            "expected a string",
                        )),
                    })
                    .collect::<Result<_>>()?,
                Some(_) => {
                    return Err(Error::field(
                        format!("[{index}].ground_truth_nodes"),
                        "expected an array of strings",
                    ))
                }
            };
            Ok(QaItem {
                question,
                reference_answer,
                ground_truth_nodes,
            })
        })
        .collect()
}
