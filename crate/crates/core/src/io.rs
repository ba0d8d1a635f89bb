//! JSON documents for product lines, configurations, statecharts and traces.
//!
//! Parsing reports syntax and schema problems with a line and column,
//! rejects duplicate names and resolves dotted state paths (`Outer.Inner`)
//! to plain names. Validation is left to the validators. Serialization is
//! pretty-printed JSON in declaration order, so serializing a parsed
//! document again gives the same text.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binding::ImpMapping;
use crate::feature_model::{Configuration, FeatureModel};
use crate::model::{Atom, Index, State, StateChartStar};
use crate::strategy::RewriteTrace;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum IoError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("name `{name}` is declared more than once")]
    DuplicateName { name: String },
    #[error("{context} refers to unknown state `{name}`")]
    UnknownReference { name: String, context: String },
}

impl IoError {
    pub fn code(&self) -> &'static str {
        match self {
            IoError::Syntax { .. } => "E_SYNTAX",
            IoError::DuplicateName { .. } => "E_DUPLICATE_NAME",
            IoError::UnknownReference { .. } => "E_UNKNOWN_REFERENCE",
        }
    }
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        // serde_json appends " at line L column C"; keep only the cause.
        let message = message.split(" at line ").next().unwrap_or(&message).to_owned();
        IoError::Syntax { line: e.line(), column: e.column(), message }
    }
}

pub type Result<T> = std::result::Result<T, IoError>;

/// Feature model, statechart and implementation mapping in one file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductLineDocument {
    pub feature_model: FeatureModel,
    pub statechart: StateChartStar,
    #[serde(default)]
    pub imp: ImpMapping,
}

/// Either a full product line or a bare statechart (`{"root": ...}`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Document {
    ProductLine(ProductLineDocument),
    Statechart(StateChartStar),
}

fn to_text<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types always serialize");
    s.push('\n');
    s
}

pub fn parse_product_line(text: &str) -> Result<ProductLineDocument> {
    let mut doc: ProductLineDocument = serde_json::from_str(text)?;
    resolve_statechart(&mut doc.statechart)?;
    let idx = doc.statechart.index();
    for entry in doc.imp.entries.values_mut() {
        entry.elements = std::mem::take(&mut entry.elements)
            .into_iter()
            .map(|e| if e.contains('.') { resolve_path(&idx, &e).unwrap_or(e) } else { e })
            .collect();
    }
    Ok(doc)
}

pub fn serialize_product_line(fm: &FeatureModel, sc: &StateChartStar, imp: &ImpMapping) -> String {
    to_text(&ProductLineDocument { feature_model: fm.clone(), statechart: sc.clone(), imp: imp.clone() })
}

pub fn parse_statechart(text: &str) -> Result<StateChartStar> {
    let mut sc: StateChartStar = serde_json::from_str(text)?;
    resolve_statechart(&mut sc)?;
    Ok(sc)
}

pub fn serialize_statechart(sc: &StateChartStar) -> String {
    to_text(sc)
}

/// Parses either document kind, deciding by the top-level `root` key.
pub fn parse_document(text: &str) -> Result<Document> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("root").is_some() {
        parse_statechart(text).map(Document::Statechart)
    } else {
        parse_product_line(text).map(Document::ProductLine)
    }
}

pub fn parse_configuration(text: &str) -> Result<Configuration> {
    Ok(serde_json::from_str(text)?)
}

pub fn serialize_configuration(conf: &Configuration) -> String {
    to_text(conf)
}

pub fn parse_trace(text: &str) -> Result<RewriteTrace> {
    Ok(serde_json::from_str(text)?)
}

pub fn serialize_trace(trace: &RewriteTrace) -> String {
    to_text(trace)
}

/// Rejects duplicate names, then rewrites dotted paths in initials,
/// endpoints and `in` atoms to plain names and checks they exist.
fn resolve_statechart(sc: &mut StateChartStar) -> Result<()> {
    let mut seen = BTreeSet::new();
    let names = sc
        .states()
        .into_iter()
        .map(|s| s.name().clone())
        .chain(sc.transitions().into_iter().map(|(_, t)| t.name.clone()))
        .collect::<Vec<_>>();
    for name in names {
        if !seen.insert(name.clone()) {
            return Err(IoError::DuplicateName { name });
        }
    }

    let idx = sc.index();
    let resolve = |name: &str, context: String| -> Result<String> {
        if idx.contains(name) {
            return Ok(name.to_owned());
        }
        resolve_path(&idx, name).ok_or_else(|| IoError::UnknownReference { name: name.to_owned(), context })
    };

    let mut failure = None;
    sc.for_each_state_mut(|s| {
        if let State::Or { name, initial, transitions, .. } = s {
            if initial.contains('.') {
                match resolve(initial, format!("initial of `{name}`")) {
                    Ok(r) => *initial = r,
                    Err(e) => {
                        failure.get_or_insert(e);
                    }
                }
            }
            for t in transitions.iter_mut() {
                for (role, endpoint) in [("source", &mut t.source), ("target", &mut t.target)] {
                    match resolve(endpoint, format!("{role} of transition `{}`", t.name)) {
                        Ok(r) => *endpoint = r,
                        Err(e) => {
                            failure.get_or_insert(e);
                        }
                    }
                }
                for atom in t.cond.atoms.iter_mut() {
                    if let Atom::InState(x) = atom {
                        match resolve(x, format!("condition of transition `{}`", t.name)) {
                            Ok(r) => *x = r,
                            Err(e) => {
                                failure.get_or_insert(e);
                            }
                        }
                    }
                }
            }
        }
    });
    failure.map_or(Ok(()), Err)
}

/// Resolves `A.B.C` to `C` when `C` exists and its ancestors, nearest first,
/// are `B` then `A`.
pub fn resolve_path(idx: &Index, path: &str) -> Option<String> {
    let segments: Vec<&str> = path.split('.').collect();
    let (last, outer) = segments.split_last()?;
    if !idx.contains(last) {
        return None;
    }
    let ancestors = idx.ancestors(last);
    let matches = outer.iter().rev().zip(ancestors.iter()).all(|(seg, anc)| *seg == anc.as_str());
    (matches && outer.len() <= ancestors.len()).then(|| (*last).to_owned())
}
