//! Feature models, configurations and the kernel.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type FeatureName = String;

/// One relation pair `(parent, children)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub parent: FeatureName,
    pub children: BTreeSet<FeatureName>,
}

impl Relation {
    pub fn new<I, S>(parent: &str, children: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { parent: parent.to_owned(), children: children.into_iter().map(Into::into).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Mand,
    Opt,
    Alt,
    Or,
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationKind::Mand => "mand",
            RelationKind::Opt => "opt",
            RelationKind::Alt => "alt",
            RelationKind::Or => "or",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub funcs: BTreeSet<FeatureName>,
    pub root: FeatureName,
    #[serde(default)]
    pub mand: BTreeSet<Relation>,
    #[serde(default)]
    pub opt: BTreeSet<Relation>,
    #[serde(default)]
    pub alt: BTreeSet<Relation>,
    #[serde(default, rename = "or")]
    pub or_rel: BTreeSet<Relation>,
}

impl FeatureModel {
    pub fn new(root: &str) -> Self {
        Self {
            funcs: BTreeSet::from([root.to_owned()]),
            root: root.to_owned(),
            mand: BTreeSet::new(),
            opt: BTreeSet::new(),
            alt: BTreeSet::new(),
            or_rel: BTreeSet::new(),
        }
    }

    /// Adds a relation and registers all of its features.
    pub fn with(mut self, kind: RelationKind, parent: &str, children: &[&str]) -> Self {
        self.funcs.insert(parent.to_owned());
        self.funcs.extend(children.iter().map(|c| (*c).to_owned()));
        let rel = Relation::new(parent, children.iter().copied());
        self.relations_mut(kind).insert(rel);
        self
    }

    pub fn relations(&self, kind: RelationKind) -> &BTreeSet<Relation> {
        match kind {
            RelationKind::Mand => &self.mand,
            RelationKind::Opt => &self.opt,
            RelationKind::Alt => &self.alt,
            RelationKind::Or => &self.or_rel,
        }
    }

    fn relations_mut(&mut self, kind: RelationKind) -> &mut BTreeSet<Relation> {
        match kind {
            RelationKind::Mand => &mut self.mand,
            RelationKind::Opt => &mut self.opt,
            RelationKind::Alt => &mut self.alt,
            RelationKind::Or => &mut self.or_rel,
        }
    }

    pub fn all_relations(&self) -> impl Iterator<Item = (RelationKind, &Relation)> {
        [RelationKind::Mand, RelationKind::Opt, RelationKind::Alt, RelationKind::Or]
            .into_iter()
            .flat_map(move |k| self.relations(k).iter().map(move |r| (k, r)))
    }

    /// Parent of every non-root feature (first relation wins if the model is
    /// not a tree).
    pub fn parents(&self) -> BTreeMap<FeatureName, FeatureName> {
        let mut out = BTreeMap::new();
        for (_, r) in self.all_relations() {
            for c in &r.children {
                out.entry(c.clone()).or_insert_with(|| r.parent.clone());
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    pub selected: BTreeSet<FeatureName>,
    #[serde(default)]
    pub edges: BTreeSet<Relation>,
}

impl Configuration {
    /// Builds the configuration whose edges are the model's relations
    /// restricted to `selected` (one edge per relation with a selected parent
    /// and at least one selected child).
    pub fn from_selection(fm: &FeatureModel, selected: BTreeSet<FeatureName>) -> Self {
        let edges = fm
            .all_relations()
            .filter(|(_, r)| selected.contains(&r.parent))
            .filter_map(|(_, r)| {
                let kept: BTreeSet<_> = r.children.intersection(&selected).cloned().collect();
                (!kept.is_empty()).then(|| Relation { parent: r.parent.clone(), children: kept })
            })
            .collect();
        Self { selected, edges }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum FmViolation {
    #[error("root `{root}` is not in funcs")]
    RootNotInFuncs { root: String },
    #[error("{kind} relation of `{parent}` mentions unknown feature `{feature}`")]
    UnknownFeature { kind: RelationKind, parent: String, feature: String },
    #[error("{kind} relation of `{parent}` has an empty child set")]
    EmptyChildSet { kind: RelationKind, parent: String },
    #[error("{kind} relation of `{parent}` has {count} children; mand/opt pairs need #sf = 1")]
    SingletonRequired { kind: RelationKind, parent: String, count: usize },
    #[error("{kind} group of `{parent}` has {count} child; alternative/or groups need at least 2")]
    GroupTooSmall { kind: RelationKind, parent: String, count: usize },
    #[error("root `{root}` appears as a child")]
    RootIsChild { root: String },
    #[error("feature `{feature}` appears as a child in {count} relation pairs")]
    MultipleParents { feature: String, count: usize },
    #[error("feature `{feature}` has no parent")]
    Orphan { feature: String },
    #[error("feature `{feature}` is not reachable from the root")]
    Unreachable { feature: String },
}

/// Checks that the model is a tree with the required cardinalities.
pub fn validate_feature_model(fm: &FeatureModel) -> Vec<FmViolation> {
    let mut out = Vec::new();
    if !fm.funcs.contains(&fm.root) {
        out.push(FmViolation::RootNotInFuncs { root: fm.root.clone() });
    }

    let mut child_count: BTreeMap<&str, usize> = BTreeMap::new();
    let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (kind, r) in fm.all_relations() {
        for f in std::iter::once(&r.parent).chain(&r.children) {
            if !fm.funcs.contains(f) {
                out.push(FmViolation::UnknownFeature { kind, parent: r.parent.clone(), feature: f.clone() });
            }
        }
        let count = r.children.len();
        match kind {
            _ if count == 0 => out.push(FmViolation::EmptyChildSet { kind, parent: r.parent.clone() }),
            RelationKind::Mand | RelationKind::Opt if count != 1 => {
                out.push(FmViolation::SingletonRequired { kind, parent: r.parent.clone(), count })
            }
            RelationKind::Alt | RelationKind::Or if count < 2 => {
                out.push(FmViolation::GroupTooSmall { kind, parent: r.parent.clone(), count })
            }
            _ => {}
        }
        for c in &r.children {
            *child_count.entry(c).or_default() += 1;
            adjacency.entry(&r.parent).or_default().push(c);
        }
    }

    if child_count.contains_key(fm.root.as_str()) {
        out.push(FmViolation::RootIsChild { root: fm.root.clone() });
    }
    for (f, &count) in &child_count {
        if count > 1 {
            out.push(FmViolation::MultipleParents { feature: (*f).to_owned(), count });
        }
    }

    let mut reached = BTreeSet::new();
    let mut stack = vec![fm.root.as_str()];
    while let Some(f) = stack.pop() {
        if reached.insert(f) {
            stack.extend(adjacency.get(f).into_iter().flatten().copied());
        }
    }
    for f in fm.funcs.iter().filter(|f| **f != fm.root) {
        match child_count.get(f.as_str()) {
            None => out.push(FmViolation::Orphan { feature: f.clone() }),
            Some(1) if !reached.contains(f.as_str()) => out.push(FmViolation::Unreachable { feature: f.clone() }),
            _ => {}
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FeatureModelError {
    #[error("configuration references unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature model has {count} features; enumeration is capped at {cap}")]
    TooLarge { count: usize, cap: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum ConfigViolation {
    #[error("(1) root `{root}` is not selected")]
    RootNotSelected { root: String },
    #[error("edge of `{parent}` uses unselected feature `{feature}`")]
    EdgeOutsideSelection { parent: String, feature: String },
    #[error("edge of `{parent}` has an empty child set")]
    EmptyEdge { parent: String },
    #[error("edge ({parent}, {children:?}) is not a restriction of any model relation")]
    EdgeNotInModel { parent: String, children: BTreeSet<String> },
    #[error("selected feature `{feature}` is not connected to its parent by any edge")]
    NotConnected { feature: String },
    #[error("feature `{feature}` is the child of {count} edges")]
    MultipleParents { feature: String, count: usize },
    #[error("root `{root}` appears as a child of an edge")]
    RootIsChild { root: String },
    #[error("(2) mandatory edge ({parent}, {child}) is missing")]
    MissingMandatory { parent: String, child: String },
    #[error("(3) alternative group of `{parent}` needs exactly one edge with one child, found {edges} edge(s) selecting {selected}")]
    AlternativeViolated { parent: String, edges: usize, selected: usize },
    #[error("(4) or-group of `{parent}` needs at least one selected child")]
    OrGroupEmpty { parent: String },
}

/// Checks a configuration against a (valid) model.
pub fn validate_configuration(
    fm: &FeatureModel,
    conf: &Configuration,
) -> Result<Vec<ConfigViolation>, FeatureModelError> {
    let mentioned = conf.selected.iter().chain(conf.edges.iter().flat_map(|e| std::iter::once(&e.parent).chain(&e.children)));
    if let Some(unknown) = mentioned.into_iter().find(|f| !fm.funcs.contains(*f)) {
        return Err(FeatureModelError::UnknownFeature(unknown.clone()));
    }

    let mut out = Vec::new();
    let selected = &conf.selected;
    if !selected.contains(&fm.root) {
        out.push(ConfigViolation::RootNotSelected { root: fm.root.clone() });
    }

    let mut incoming: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &conf.edges {
        if e.children.is_empty() {
            out.push(ConfigViolation::EmptyEdge { parent: e.parent.clone() });
        }
        for f in std::iter::once(&e.parent).chain(&e.children) {
            if !selected.contains(f) {
                out.push(ConfigViolation::EdgeOutsideSelection { parent: e.parent.clone(), feature: f.clone() });
            }
        }
        let in_model = fm.all_relations().any(|(_, r)| r.parent == e.parent && e.children.is_subset(&r.children));
        if !in_model {
            out.push(ConfigViolation::EdgeNotInModel { parent: e.parent.clone(), children: e.children.clone() });
        }
        for c in &e.children {
            *incoming.entry(c).or_default() += 1;
        }
    }

    if incoming.contains_key(fm.root.as_str()) {
        out.push(ConfigViolation::RootIsChild { root: fm.root.clone() });
    }
    for f in selected.iter().filter(|f| **f != fm.root) {
        match incoming.get(f.as_str()).copied().unwrap_or(0) {
            0 => out.push(ConfigViolation::NotConnected { feature: f.clone() }),
            1 => {}
            count => out.push(ConfigViolation::MultipleParents { feature: f.clone(), count }),
        }
    }

    let edges_within = |r: &Relation| -> Vec<&Relation> {
        conf.edges.iter().filter(|e| e.parent == r.parent && !e.children.is_empty() && e.children.is_subset(&r.children)).collect()
    };
    for r in fm.mand.iter().filter(|r| selected.contains(&r.parent)) {
        if !conf.edges.contains(r) {
            let child = r.children.iter().next().cloned().unwrap_or_default();
            out.push(ConfigViolation::MissingMandatory { parent: r.parent.clone(), child });
        }
    }
    for r in fm.alt.iter().filter(|r| selected.contains(&r.parent)) {
        let edges = edges_within(r);
        let chosen: usize = edges.iter().map(|e| e.children.len()).sum();
        if edges.len() != 1 || chosen != 1 {
            out.push(ConfigViolation::AlternativeViolated { parent: r.parent.clone(), edges: edges.len(), selected: chosen });
        }
    }
    for r in fm.or_rel.iter().filter(|r| selected.contains(&r.parent)) {
        if edges_within(r).is_empty() {
            out.push(ConfigViolation::OrGroupEmpty { parent: r.parent.clone() });
        }
    }
    Ok(out)
}

/// Least set containing the root and closed under mandatory children.
pub fn kernel(fm: &FeatureModel) -> BTreeSet<FeatureName> {
    let mut n = BTreeSet::from([fm.root.clone()]);
    loop {
        let next: Vec<FeatureName> = fm
            .mand
            .iter()
            .filter(|r| n.contains(&r.parent))
            .flat_map(|r| r.children.iter())
            .filter(|c| !n.contains(*c))
            .cloned()
            .collect();
        if next.is_empty() {
            return n;
        }
        n.extend(next);
    }
}

/// Non-selected features: `funcs − selected`.
pub fn nsf(fm: &FeatureModel, conf: &Configuration) -> BTreeSet<FeatureName> {
    fm.funcs.difference(&conf.selected).cloned().collect()
}

pub const DEFAULT_ENUMERATION_CAP: usize = 16;

/// Every valid configuration, by exhaustive search over feature subsets.
pub fn enumerate_configurations(fm: &FeatureModel, cap: usize) -> Result<Vec<Configuration>, FeatureModelError> {
    let funcs: Vec<&FeatureName> = fm.funcs.iter().collect();
    if funcs.len() > cap {
        return Err(FeatureModelError::TooLarge { count: funcs.len(), cap });
    }
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << funcs.len()) {
        let selected = funcs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, f)| (*f).clone()).collect();
        let conf = Configuration::from_selection(fm, selected);
        if validate_configuration(fm, &conf)?.is_empty() {
            out.push(conf);
        }
    }
    Ok(out)
}
