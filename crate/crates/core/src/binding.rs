//! The implementation mapping between features and variant elements, and
//! the set of non-selected components it induces.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feature_model::{kernel, nsf, Configuration, FeatureModel, FeatureName};
use crate::model::{var_elem_set, StateChartStar};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpEntry {
    #[serde(default)]
    pub elements: BTreeSet<String>,
    /// Features whose elements are also part of this feature's implementation.
    #[serde(default)]
    pub includes: BTreeSet<FeatureName>,
}

/// Partial map from non-kernel features to the variant elements implementing
/// them.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImpMapping {
    pub entries: BTreeMap<FeatureName, ImpEntry>,
}

impl ImpMapping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, feature: &str, elements: &[&str]) -> Self {
        self.entries.entry(feature.to_owned()).or_default().elements.extend(elements.iter().map(|e| (*e).to_owned()));
        self
    }

    pub fn including(mut self, feature: &str, included: &[&str]) -> Self {
        self.entries.entry(feature.to_owned()).or_default().includes.extend(included.iter().map(|e| (*e).to_owned()));
        self
    }

    pub fn direct(&self, feature: &str) -> BTreeSet<String> {
        self.entries.get(feature).map(|e| e.elements.clone()).unwrap_or_default()
    }

    /// Elements of `feature` together with those of every feature it
    /// (transitively) includes.
    pub fn expanded(&self, feature: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut out = BTreeSet::new();
        let mut stack = vec![feature.to_owned()];
        while let Some(f) = stack.pop() {
            if !seen.insert(f.clone()) {
                continue;
            }
            if let Some(entry) = self.entries.get(&f) {
                out.extend(entry.elements.iter().cloned());
                stack.extend(entry.includes.iter().cloned());
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum ImpViolation {
    #[error("`{feature}` is a kernel feature; Imp is only defined outside the kernel")]
    KernelFeature { feature: String },
    #[error("`{feature}` is not a feature of the model")]
    UnknownFeature { feature: String },
    #[error("`{feature}` includes unknown feature `{included}`")]
    UnknownInclude { feature: String, included: String },
    #[error("`{feature}` maps to `{element}`, which is not an element of the statechart")]
    UnknownElement { feature: String, element: String },
    #[error("`{feature}` maps to `{element}`, which is not optional (not in VarElem)")]
    NotVariable { feature: String, element: String },
    #[error("`{feature}` maps to no elements")]
    EmptyEntry { feature: String },
}

pub fn validate_imp(fm: &FeatureModel, sc: &StateChartStar, imp: &ImpMapping) -> Vec<ImpViolation> {
    let kern = kernel(fm);
    let var = var_elem_set(sc);
    let existing: BTreeSet<&String> =
        sc.states().into_iter().map(|s| s.name()).chain(sc.transitions().into_iter().map(|(_, t)| &t.name)).collect();

    let mut out = Vec::new();
    for (feature, entry) in &imp.entries {
        if !fm.funcs.contains(feature) {
            out.push(ImpViolation::UnknownFeature { feature: feature.clone() });
        } else if kern.contains(feature) {
            out.push(ImpViolation::KernelFeature { feature: feature.clone() });
        }
        for included in entry.includes.iter().filter(|f| !fm.funcs.contains(*f)) {
            out.push(ImpViolation::UnknownInclude { feature: feature.clone(), included: included.clone() });
        }
        for element in &entry.elements {
            if !existing.contains(element) {
                out.push(ImpViolation::UnknownElement { feature: feature.clone(), element: element.clone() });
            } else if !var.contains(element) {
                out.push(ImpViolation::NotVariable { feature: feature.clone(), element: element.clone() });
            }
        }
        if imp.expanded(feature).is_empty() {
            out.push(ImpViolation::EmptyEntry { feature: feature.clone() });
        }
    }
    out
}

/// Non-selected components: variant elements implementing some non-selected
/// feature and not directly implementing any selected one.
pub fn nsc(fm: &FeatureModel, conf: &Configuration, sc: &StateChartStar, imp: &ImpMapping) -> BTreeSet<String> {
    let var = var_elem_set(sc);
    let candidates: BTreeSet<String> = nsf(fm, conf).iter().flat_map(|f| imp.expanded(f)).collect();
    let protected: BTreeSet<String> = conf.selected.iter().flat_map(|f| imp.direct(f)).collect();
    candidates.into_iter().filter(|x| var.contains(x) && !protected.contains(x)).collect()
}
