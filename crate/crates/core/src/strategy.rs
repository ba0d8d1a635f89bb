//! The four-layer instantiation strategy and the confluence harness built on
//! top of it.
//!
//! Layers run in a fixed order: initial-state repair and condition pruning,
//! state deletion, transition deletion, and finally clearing every optional
//! flag. Inside layers 2 and 3 the pending elements are visited in a schedule
//! order (ascending names unless overridden), which the confluence harness
//! permutes.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binding::{nsc, validate_imp, ImpMapping, ImpViolation};
use crate::feature_model::{
    validate_configuration, validate_feature_model, ConfigViolation, Configuration, FeatureModel, FeatureModelError,
    FmViolation,
};
use crate::model::{canonicalize, check_well_formed_star, State, StateChartStar, StateKind, Violation};
use crate::rewrite::{self, PendingSet, RewriteError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    PruneConditions,
    RepairInitial,
    DeleteSimpleState,
    DeleteOrState,
    DeleteAndState,
    DeleteTransition,
    FinalizeOptionals,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::PruneConditions => "prune_conditions",
            Rule::RepairInitial => "repair_initial",
            Rule::DeleteSimpleState => "delete_simple_state",
            Rule::DeleteOrState => "delete_or_state",
            Rule::DeleteAndState => "delete_and_state",
            Rule::DeleteTransition => "delete_transition",
            Rule::FinalizeOptionals => "finalize_optionals",
        }
    }

    fn for_state(kind: StateKind) -> Self {
        match kind {
            StateKind::Simple => Rule::DeleteSimpleState,
            StateKind::Or => Rule::DeleteOrState,
            StateKind::And => Rule::DeleteAndState,
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One rule application. `added` and `removed` list state and transition
/// names; `modified` lists elements changed in place.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub rule: Rule,
    pub subject: String,
    #[serde(default)]
    pub added: Vec<String>,
    #[serde(default)]
    pub removed: Vec<String>,
    #[serde(default)]
    pub modified: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteTrace {
    pub steps: Vec<TraceStep>,
}

impl RewriteTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rules(&self) -> Vec<(Rule, &str)> {
        self.steps.iter().map(|s| (s.rule, s.subject.as_str())).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instantiation {
    pub product: StateChartStar,
    pub trace: RewriteTrace,
    pub nsc: BTreeSet<String>,
}

/// Violations found by all four validators.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub feature_model: Vec<FmViolation>,
    pub statechart: Vec<Violation>,
    pub imp: Vec<ImpViolation>,
    pub configuration: Vec<ConfigViolation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.feature_model.is_empty() && self.statechart.is_empty() && self.imp.is_empty() && self.configuration.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        let fm = self.feature_model.iter().map(|v| format!("feature model: {v}"));
        let sc = self.statechart.iter().map(|v| format!("statechart: {v}"));
        let imp = self.imp.iter().map(|v| format!("imp: {v}"));
        let conf = self.configuration.iter().map(|v| format!("configuration: {v}"));
        fm.chain(sc).chain(imp).chain(conf).collect()
    }
}

/// Validates the product line itself (feature model, statechart, mapping).
pub fn validate_product_line(fm: &FeatureModel, sc: &StateChartStar, imp: &ImpMapping) -> ValidationReport {
    ValidationReport {
        feature_model: validate_feature_model(fm),
        statechart: check_well_formed_star(sc),
        imp: validate_imp(fm, sc, imp),
        configuration: Vec::new(),
    }
}

/// Validates the product line and a configuration of it.
pub fn validate_all(
    fm: &FeatureModel,
    conf: &Configuration,
    sc: &StateChartStar,
    imp: &ImpMapping,
) -> Result<ValidationReport, FeatureModelError> {
    let mut report = validate_product_line(fm, sc, imp);
    report.configuration = validate_configuration(fm, conf)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InstantiateError {
    #[error("invalid input:\n  {}", .0.messages().join("\n  "))]
    InvalidInput(ValidationReport),
    #[error(transparent)]
    Configuration(#[from] FeatureModelError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error("deleting states left composite `{state}` without enough children")]
    EmptyComposite { state: String },
    #[error("the product is not well formed:\n  {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n  "))]
    IllFormedResult(Vec<Violation>),
    #[error("rewriting took more than {budget} steps")]
    StepBudgetExceeded { budget: usize },
}

impl InstantiateError {
    /// Stable short code, also used to compare failing runs.
    pub fn code(&self) -> &'static str {
        match self {
            InstantiateError::InvalidInput(_) => "E_INVALID_INPUT",
            InstantiateError::Configuration(FeatureModelError::UnknownFeature { .. }) => "E_UNKNOWN_FEATURE",
            InstantiateError::Configuration(_) => "E_TOO_LARGE",
            InstantiateError::Rewrite(e) => match e {
                RewriteError::NoInitial(_) => "E_NO_INITIAL",
                RewriteError::IsInitial { .. } => "E_IS_INITIAL",
                RewriteError::NotOptional(_) => "E_NOT_OPTIONAL",
                RewriteError::OptionalCompose(_) => "E_OPTIONAL_COMPOSE",
                _ => "E_REWRITE",
            },
            InstantiateError::EmptyComposite { .. } => "E_EMPTY_COMPOSITE",
            InstantiateError::IllFormedResult(_) => "E_ILL_FORMED_RESULT",
            InstantiateError::StepBudgetExceeded { .. } => "E_STEP_BUDGET",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StrategyOptions {
    /// Visiting order for pending elements; elements not listed follow in
    /// ascending order.
    pub order: Option<Vec<String>>,
    /// Let pending transitions grant reachability and initial succession.
    pub paper_literal: bool,
    /// Overrides the default step budget from [`step_bound`].
    pub max_steps: Option<usize>,
}

/// Upper bound on trace length: one step per pending element, one repair per
/// Or-state, one per (pending state, condition mentioning it), one finalize.
pub fn step_bound(sc: &StateChartStar, pending: &BTreeSet<String>) -> usize {
    let or_states = sc.states().iter().filter(|s| s.kind() == StateKind::Or).count();
    let mentions: usize = pending.iter().map(|p| rewrite::conditions_mentioning(p, sc).len()).sum();
    pending.len() + or_states + mentions + 1
}

/// Validates, computes the non-selected components and runs the strategy in
/// ascending order.
pub fn instantiate(
    fm: &FeatureModel,
    conf: &Configuration,
    sc: &StateChartStar,
    imp: &ImpMapping,
) -> Result<Instantiation, InstantiateError> {
    instantiate_with(fm, conf, sc, imp, &StrategyOptions::default())
}

pub fn instantiate_with(
    fm: &FeatureModel,
    conf: &Configuration,
    sc: &StateChartStar,
    imp: &ImpMapping,
    options: &StrategyOptions,
) -> Result<Instantiation, InstantiateError> {
    let report = validate_all(fm, conf, sc, imp)?;
    if !report.is_clean() {
        return Err(InstantiateError::InvalidInput(report));
    }
    run_strategy(sc, &nsc(fm, conf, sc, imp), options)
}

fn schedule(pending: &BTreeSet<String>, order: Option<&Vec<String>>) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(pending.len());
    let mut seen = BTreeSet::new();
    for name in order.into_iter().flatten().chain(pending.iter()) {
        if pending.contains(name) && seen.insert(name.clone()) {
            out.push(name.clone());
        }
    }
    out
}

struct Runner {
    sc: StateChartStar,
    trace: RewriteTrace,
    budget: usize,
}

impl Runner {
    fn push(&mut self, step: TraceStep) -> Result<(), InstantiateError> {
        if self.trace.len() >= self.budget {
            return Err(InstantiateError::StepBudgetExceeded { budget: self.budget });
        }
        self.trace.steps.push(step);
        Ok(())
    }

    /// Replaces the machine and records the step with name-level differences.
    fn apply(&mut self, rule: Rule, subject: &str, next: StateChartStar, modified: Vec<String>) -> Result<(), InstantiateError> {
        let before = element_names(&self.sc);
        let after = element_names(&next);
        self.sc = next;
        self.push(TraceStep {
            rule,
            subject: subject.to_owned(),
            added: after.difference(&before).cloned().collect(),
            removed: before.difference(&after).cloned().collect(),
            modified,
        })
    }
}

fn element_names(sc: &StateChartStar) -> BTreeSet<String> {
    sc.states()
        .into_iter()
        .map(|s| s.name().clone())
        .chain(sc.transitions().into_iter().map(|(_, t)| t.name.clone()))
        .collect()
}

/// Runs the strategy on a machine with a given set of elements to delete.
pub fn run_strategy(
    sc: &StateChartStar,
    to_delete: &BTreeSet<String>,
    options: &StrategyOptions,
) -> Result<Instantiation, InstantiateError> {
    let order = schedule(to_delete, options.order.as_ref());
    let mut pending = PendingSet::new(order.iter().cloned()).paper_literal(options.paper_literal);
    let mut run = Runner {
        sc: sc.clone(),
        trace: RewriteTrace::default(),
        budget: options.max_steps.unwrap_or_else(|| step_bound(sc, to_delete)),
    };

    let original = sc.index();
    let pending_states: Vec<String> = order.iter().filter(|n| original.contains(n)).cloned().collect();
    let pending_transitions: Vec<String> = order.iter().filter(|n| !original.contains(n)).cloned().collect();

    // Layer 1: conditions first, then initial repair on surviving Or-states.
    for state in &pending_states {
        let touched = rewrite::conditions_mentioning(state, &run.sc);
        if !touched.is_empty() {
            let next = rewrite::prune_conditions(state, &run.sc);
            run.apply(Rule::PruneConditions, state, next, touched)?;
        }
    }
    let doomed = |s: &str| pending.contains(s) || original.ancestors(s).iter().any(|a| pending.contains(a));
    let or_states: Vec<String> = run
        .sc
        .states()
        .into_iter()
        .filter(|s| s.kind() == StateKind::Or && !doomed(s.name()))
        .map(|s| s.name().clone())
        .collect();
    for or_state in or_states {
        if !run.sc.state(&or_state).and_then(State::initial).is_some_and(|i| pending.contains(i)) {
            continue;
        }
        let mut visited = BTreeSet::new();
        let mut next = run.sc.clone();
        while let Some(initial) = next.state(&or_state).and_then(State::initial).filter(|i| pending.contains(i)).cloned() {
            if !visited.insert(initial) {
                return Err(RewriteError::NoInitial(or_state).into());
            }
            next = rewrite::repair_initial(&or_state, &next, &pending)?;
        }
        if !visited.is_empty() {
            run.apply(Rule::RepairInitial, &or_state, next, vec![or_state.clone()])?;
        }
    }

    // Layer 2: states. A state inside another pending state goes with it.
    let pending_set: BTreeSet<&String> = pending_states.iter().collect();
    for state in &pending_states {
        let rule = Rule::for_state(original.kind[state]);
        let absorbed = original.ancestors(state).iter().any(|a| pending_set.contains(a));
        if absorbed || run.sc.state(state).is_none() {
            pending.remove(state);
            run.push(TraceStep { rule, subject: state.clone(), added: vec![], removed: vec![], modified: vec![] })?;
            continue;
        }
        let next = match rule {
            Rule::DeleteSimpleState => rewrite::delete_simple_state(state, &run.sc, &pending)?,
            Rule::DeleteOrState => rewrite::delete_or_state(state, &run.sc, &pending)?,
            _ => rewrite::delete_and_state(state, &run.sc, &pending)?,
        };
        pending.remove(state);
        run.apply(rule, state, next, vec![])?;
    }
    if let Some(state) = first_degenerate(&run.sc) {
        return Err(InstantiateError::EmptyComposite { state });
    }

    // Layer 3: transitions (possibly already removed with their endpoints).
    for t in &pending_transitions {
        let next = rewrite::delete_transition(t, &run.sc);
        pending.remove(t);
        run.apply(Rule::DeleteTransition, t, next, vec![])?;
    }
    debug_assert!(pending.is_empty());

    // Layer 4.
    let (sop, top) = crate::model::var_elems(&run.sc);
    let flipped: Vec<String> = sop.into_iter().chain(top).collect();
    let root = run.sc.root.name().clone();
    let next = rewrite::finalize_optionals(&run.sc);
    run.apply(Rule::FinalizeOptionals, &root, next, flipped)?;

    let violations = check_well_formed_star(&run.sc);
    if !violations.is_empty() {
        return Err(InstantiateError::IllFormedResult(violations));
    }
    Ok(Instantiation { product: run.sc, trace: run.trace, nsc: to_delete.clone() })
}

fn first_degenerate(sc: &StateChartStar) -> Option<String> {
    sc.states().into_iter().find_map(|s| match s {
        State::Or { name, substates, .. } if substates.is_empty() => Some(name.clone()),
        State::And { name, regions, .. } if regions.len() < 2 => Some(name.clone()),
        _ => None,
    })
}

/// Result of one run, in the form compared across orders.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Product { statechart: StateChartStar },
    Error { code: String, message: String },
}

impl Outcome {
    fn of(result: Result<Instantiation, InstantiateError>) -> Self {
        match result {
            Ok(inst) => Outcome::Product { statechart: canonicalize(&inst.product) },
            Err(e) => Outcome::Error { code: e.code().to_owned(), message: e.to_string() },
        }
    }

    fn same_as(&self, other: &Outcome) -> bool {
        match (self, other) {
            (Outcome::Product { statechart: a }, Outcome::Product { statechart: b }) => a == b,
            (Outcome::Error { code: a, .. }, Outcome::Error { code: b, .. }) => a == b,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Divergence {
    pub first_order: Vec<String>,
    pub first: Outcome,
    pub second_order: Vec<String>,
    pub second: Outcome,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfluenceReport {
    pub trials: usize,
    pub confluent: bool,
    /// Longest trace among the successful runs.
    pub max_trace_len: usize,
    pub step_bound: usize,
    pub divergence: Option<Divergence>,
}

/// Runs the strategy once per order and compares canonical results with the
/// first run.
pub fn confluence_over_orders<I>(
    sc: &StateChartStar,
    to_delete: &BTreeSet<String>,
    orders: I,
    paper_literal: bool,
) -> ConfluenceReport
where
    I: IntoIterator<Item = Vec<String>>,
{
    let bound = step_bound(sc, to_delete);
    let mut report = ConfluenceReport { trials: 0, confluent: true, max_trace_len: 0, step_bound: bound, divergence: None };
    let mut reference: Option<(Vec<String>, Outcome)> = None;
    for order in orders {
        let options = StrategyOptions { order: Some(order.clone()), paper_literal, max_steps: None };
        let result = run_strategy(sc, to_delete, &options);
        if let Ok(inst) = &result {
            report.max_trace_len = report.max_trace_len.max(inst.trace.len());
        }
        let outcome = Outcome::of(result);
        report.trials += 1;
        match &reference {
            None => reference = Some((order, outcome)),
            Some((first_order, first)) => {
                if report.divergence.is_none() && !first.same_as(&outcome) {
                    report.confluent = false;
                    report.divergence = Some(Divergence {
                        first_order: first_order.clone(),
                        first: first.clone(),
                        second_order: order,
                        second: outcome,
                    });
                }
            }
        }
    }
    report
}

/// The ascending order followed by `trials - 1` seeded random permutations.
pub fn sampled_orders(to_delete: &BTreeSet<String>, trials: usize, seed: u64) -> Vec<Vec<String>> {
    let base: Vec<String> = to_delete.iter().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|i| {
            let mut order = base.clone();
            if i > 0 {
                order.shuffle(&mut rng);
            }
            order
        })
        .collect()
}

/// Every permutation of the elements to delete.
pub fn all_orders(to_delete: &BTreeSet<String>) -> impl Iterator<Item = Vec<String>> + '_ {
    use itertools::Itertools;
    let n = to_delete.len();
    to_delete.iter().cloned().permutations(n)
}

/// Validates the inputs and compares `trials` runs with seeded random
/// visiting orders.
pub fn check_confluence(
    fm: &FeatureModel,
    conf: &Configuration,
    sc: &StateChartStar,
    imp: &ImpMapping,
    trials: usize,
    seed: u64,
    paper_literal: bool,
) -> Result<ConfluenceReport, InstantiateError> {
    let to_delete = checked_nsc(fm, conf, sc, imp)?;
    Ok(confluence_over_orders(sc, &to_delete, sampled_orders(&to_delete, trials, seed), paper_literal))
}

/// Like [`check_confluence`] but over every permutation.
pub fn check_confluence_exhaustive(
    fm: &FeatureModel,
    conf: &Configuration,
    sc: &StateChartStar,
    imp: &ImpMapping,
    paper_literal: bool,
) -> Result<ConfluenceReport, InstantiateError> {
    let to_delete = checked_nsc(fm, conf, sc, imp)?;
    Ok(confluence_over_orders(sc, &to_delete, all_orders(&to_delete), paper_literal))
}

fn checked_nsc(
    fm: &FeatureModel,
    conf: &Configuration,
    sc: &StateChartStar,
    imp: &ImpMapping,
) -> Result<BTreeSet<String>, InstantiateError> {
    let report = validate_all(fm, conf, sc, imp)?;
    if !report.is_clean() {
        return Err(InstantiateError::InvalidInput(report));
    }
    Ok(nsc(fm, conf, sc, imp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{var_elems, Atom, Transition};

    fn t(name: &str, s: &str, d: &str, ev: &str) -> Transition {
        Transition::new(name, s, d, &[ev])
    }

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| (*s).to_owned()).collect()
    }

    fn chain() -> StateChartStar {
        StateChartStar::new(State::or(
            "Top",
            "A",
            vec![State::simple("A"), State::simple("E1").optional(), State::simple("E2").optional(), State::simple("B")],
            vec![t("tA", "A", "E1", "a"), t("t12", "E1", "E2", "m"), t("tB", "E2", "B", "b")],
        ))
    }

    #[test]
    fn empty_pending_only_finalizes() {
        let sc = chain();
        let out = run_strategy(&sc, &BTreeSet::new(), &StrategyOptions::default()).unwrap();
        assert_eq!(out.trace.rules(), vec![(Rule::FinalizeOptionals, "Top")]);
        assert_eq!(out.product, rewrite::finalize_optionals(&sc));
    }

    #[test]
    fn chain_composes_fully() {
        let out = run_strategy(&chain(), &set(&["E1", "E2"]), &StrategyOptions::default()).unwrap();
        let names: Vec<String> = out.product.transitions().into_iter().map(|(_, t)| t.name.clone()).collect();
        assert_eq!(names, vec!["comp(tA,t12,tB)"]);
        assert_eq!(var_elems(&out.product), (BTreeSet::new(), BTreeSet::new()));
        assert_eq!(out.trace.len(), 3);
    }

    #[test]
    fn both_orders_agree() {
        let report = confluence_over_orders(&chain(), &set(&["E1", "E2"]), all_orders(&set(&["E1", "E2"])), false);
        assert!(report.confluent);
        assert_eq!(report.trials, 2);
    }

    #[test]
    fn initial_is_repaired_before_deletion() {
        let sc = StateChartStar::new(State::or(
            "Top",
            "S1",
            vec![State::simple("S1").optional(), State::simple("S2")],
            vec![t("go", "S1", "S2", "e"), t("back", "S2", "S2", "f")],
        ));
        let out = run_strategy(&sc, &set(&["S1"]), &StrategyOptions::default()).unwrap();
        assert_eq!(out.product.root.initial().unwrap(), "S2");
        assert_eq!(
            out.trace.rules(),
            vec![
                (Rule::RepairInitial, "Top"),
                (Rule::DeleteSimpleState, "S1"),
                (Rule::FinalizeOptionals, "Top")
            ]
        );
    }

    #[test]
    fn missing_successor_is_an_error() {
        let sc = StateChartStar::new(State::or(
            "Top",
            "S1",
            vec![State::simple("S1").optional(), State::simple("S2")],
            vec![t("back", "S2", "S1", "f")],
        ));
        let err = run_strategy(&sc, &set(&["S1"]), &StrategyOptions::default()).unwrap_err();
        assert_eq!(err.code(), "E_NO_INITIAL");
    }

    #[test]
    fn emptied_or_state_is_an_error() {
        let inner = State::or("Box", "X", vec![State::simple("X").optional()], vec![]);
        let sc = StateChartStar::new(State::or("Top", "A", vec![State::simple("A"), inner], vec![]));
        let mut pending = set(&["X"]);
        // The initial X has no successor, so repair fails first.
        assert_eq!(run_strategy(&sc, &pending, &StrategyOptions::default()).unwrap_err().code(), "E_NO_INITIAL");

        let inner = State::or("Box", "Y", vec![State::simple("Y"), State::simple("X").optional()], vec![]);
        let and = State::and(
            "Par",
            vec![inner, State::or("R2", "Z", vec![State::simple("Z")], vec![]).optional()],
        );
        let sc = StateChartStar::new(State::or("Top", "A", vec![State::simple("A"), and], vec![]));
        pending = set(&["R2"]);
        assert_eq!(run_strategy(&sc, &pending, &StrategyOptions::default()).unwrap_err().code(), "E_EMPTY_COMPOSITE");
    }

    #[test]
    fn nested_pending_state_is_absorbed_in_any_order() {
        let inner = State::or(
            "Box",
            "P",
            vec![State::simple("P"), State::simple("Q").optional()],
            vec![t("pq", "P", "Q", "e").optional(), t("qp", "Q", "P", "e").optional()],
        )
        .optional();
        let sc = StateChartStar::new(State::or(
            "Top",
            "A",
            vec![State::simple("A"), inner, State::simple("B")],
            vec![t("in", "A", "P", "i"), t("out", "Box", "B", "o")],
        ));
        let pending = set(&["Box", "Q", "pq", "qp"]);
        let report = confluence_over_orders(&sc, &pending, all_orders(&pending), false);
        assert!(report.confluent, "{:?}", report.divergence);
        let out = run_strategy(&sc, &pending, &StrategyOptions::default()).unwrap();
        assert!(out.product.transition("comp(in,out)").is_some());
        assert_eq!(out.trace.len(), pending.len() + 1);
        assert!(out.trace.len() <= report.step_bound);
    }

    #[test]
    fn prune_step_precedes_deletions() {
        let sc = StateChartStar::new(State::or(
            "Top",
            "A",
            vec![State::simple("A"), State::simple("M").optional(), State::simple("B")],
            vec![t("ab", "A", "B", "e").with_cond(vec![Atom::InState("M".into()), Atom::Guard("g".into())])],
        ));
        let out = run_strategy(&sc, &set(&["M"]), &StrategyOptions::default()).unwrap();
        assert_eq!(out.trace.steps[0].rule, Rule::PruneConditions);
        assert_eq!(out.trace.steps[0].modified, vec!["ab"]);
        assert_eq!(out.trace.steps[1].rule, Rule::DeleteSimpleState);
        assert_eq!(out.product.transition("ab").unwrap().cond.atoms, vec![Atom::Guard("g".into())]);
    }

    #[test]
    fn budget_overflow_is_reported() {
        let options = StrategyOptions { max_steps: Some(1), ..Default::default() };
        let err = run_strategy(&chain(), &set(&["E1", "E2"]), &options).unwrap_err();
        assert_eq!(err, InstantiateError::StepBudgetExceeded { budget: 1 });
    }

    #[test]
    fn cross_region_composition_is_ill_formed() {
        // A deleted state outside an And-state links its two regions.
        let r1 = State::or("R1", "A", vec![State::simple("A")], vec![]);
        let r2 = State::or("R2", "B", vec![State::simple("B")], vec![]);
        let sc = StateChartStar::new(State::or(
            "Top",
            "Par",
            vec![State::and("Par", vec![r1, r2]), State::simple("D").optional()],
            vec![t("ad", "A", "D", "x"), t("db", "D", "B", "y")],
        ));
        let err = run_strategy(&sc, &set(&["D"]), &StrategyOptions::default()).unwrap_err();
        assert_eq!(err.code(), "E_ILL_FORMED_RESULT");
    }

    /// Leaving a pending composite through an outside pending state and
    /// coming back in: deleting the outside state first turns the detour
    /// into an internal edge of the composite, while deleting the composite
    /// first drops it.
    #[test]
    fn exit_and_reentry_through_pending_state_diverges() {
        let boxed = State::or("Box", "P", vec![State::simple("P"), State::simple("Q")], vec![]).optional();
        let sc = StateChartStar::new(State::or(
            "Top",
            "A",
            vec![State::simple("A"), boxed, State::simple("D").optional(), State::simple("B")],
            vec![t("in", "A", "P", "i"), t("pd", "P", "D", "x"), t("dq", "D", "Q", "y"), t("out", "Q", "B", "o")],
        ));
        let pending = set(&["Box", "D"]);
        let report = confluence_over_orders(&sc, &pending, all_orders(&pending), false);
        assert!(!report.confluent);
        let d = report.divergence.unwrap();
        assert_eq!(d.first_order, vec!["Box", "D"]);
        let has = |o: &Outcome| match o {
            Outcome::Product { statechart } => statechart.transition("comp(in,out)").is_some(),
            Outcome::Error { .. } => false,
        };
        assert!(!has(&d.first));
        assert!(has(&d.second));
    }

    #[test]
    fn paper_literal_composes_through_pending_transitions() {
        let boxed = State::or(
            "Box",
            "P",
            vec![State::simple("P"), State::simple("Q")],
            vec![t("pq", "P", "Q", "e").optional()],
        )
        .optional();
        let sc = StateChartStar::new(State::or(
            "Top",
            "A",
            vec![State::simple("A"), boxed, State::simple("B")],
            vec![t("in", "A", "P", "i"), t("out", "Q", "B", "o")],
        ));
        let pending = set(&["Box", "pq"]);
        let strict = run_strategy(&sc, &pending, &StrategyOptions::default()).unwrap();
        assert!(strict.product.transition("comp(in,out)").is_none());
        let literal = StrategyOptions { paper_literal: true, ..Default::default() };
        let out = run_strategy(&sc, &pending, &literal).unwrap();
        assert!(out.product.transition("comp(in,out)").is_some());
        assert!(confluence_over_orders(&sc, &pending, all_orders(&pending), true).confluent);
    }

    #[test]
    fn sampled_orders_are_reproducible() {
        let p = set(&["a", "b", "c", "d", "e"]);
        assert_eq!(sampled_orders(&p, 10, 3), sampled_orders(&p, 10, 3));
        assert_eq!(sampled_orders(&p, 10, 3)[0], vec!["a", "b", "c", "d", "e"]);
        assert_eq!(all_orders(&p).count(), 120);
    }

    #[test]
    fn schedule_appends_unlisted_elements() {
        let p = set(&["a", "b", "c"]);
        assert_eq!(schedule(&p, Some(&vec!["c".to_owned(), "zz".to_owned()])), vec!["c", "a", "b"]);
    }
}
