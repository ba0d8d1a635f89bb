//! Statecharts with optional elements.
//!
//! A [`StateChartStar`] is a hierarchical state machine whose states and
//! transitions each carry an [`Optionality`] flag. Transitions are stored
//! inside the Or-state that owns them: the lowest Or-state that strictly
//! contains both endpoints. Names are unique across the whole machine and
//! states and transitions share one namespace.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type StateName = String;
pub type TransitionName = String;
pub type EventName = String;
pub type ActionName = String;

const COMP_PREFIX: &str = "comp(";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optionality {
    Optional,
    #[default]
    NonOptional,
}

impl Optionality {
    pub fn is_optional(self) -> bool {
        self == Optionality::Optional
    }
}

/// History type of a transition's target. Stored, never interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum History {
    #[default]
    None,
    Shallow,
    Deep,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Atom {
    /// Opaque boolean expression, compared by exact text.
    #[serde(rename = "guard")]
    Guard(String),
    /// `in X`: satisfied while state `X` is active.
    #[serde(rename = "in")]
    InState(StateName),
}

/// Conjunction of atoms. The empty condition is `true`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Condition {
    pub atoms: Vec<Atom>,
}

impl Condition {
    pub fn truth() -> Self {
        Self::default()
    }

    pub fn new(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }

    pub fn is_true(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Conjunction by concatenation; associative by construction.
    pub fn and(&self, other: &Condition) -> Condition {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Condition { atoms }
    }

    pub fn in_states(&self) -> impl Iterator<Item = &StateName> {
        self.atoms.iter().filter_map(|a| match a {
            Atom::InState(s) => Some(s),
            Atom::Guard(_) => None,
        })
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, atom) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            match atom {
                Atom::Guard(g) => f.write_str(g)?,
                Atom::InState(s) => write!(f, "in {s}")?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub name: TransitionName,
    pub source: StateName,
    pub target: StateName,
    pub trigger: Vec<EventName>,
    #[serde(default)]
    pub cond: Condition,
    #[serde(default)]
    pub actions: Vec<ActionName>,
    #[serde(default)]
    pub history: History,
    #[serde(default)]
    pub opt: Optionality,
    /// Deleted states a composed transition passes through, in path order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub via: Vec<StateName>,
}

impl Transition {
    pub fn new(name: &str, source: &str, target: &str, trigger: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            source: source.to_owned(),
            target: target.to_owned(),
            trigger: trigger.iter().map(|e| (*e).to_owned()).collect(),
            cond: Condition::truth(),
            actions: Vec::new(),
            history: History::None,
            opt: Optionality::NonOptional,
            via: Vec::new(),
        }
    }

    pub fn optional(mut self) -> Self {
        self.opt = Optionality::Optional;
        self
    }

    pub fn with_cond(mut self, atoms: Vec<Atom>) -> Self {
        self.cond = Condition::new(atoms);
        self
    }

    pub fn with_actions(mut self, actions: &[&str]) -> Self {
        self.actions = actions.iter().map(|a| (*a).to_owned()).collect();
        self
    }

    pub fn with_history(mut self, history: History) -> Self {
        self.history = history;
        self
    }

    pub fn is_optional(&self) -> bool {
        self.opt.is_optional()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Simple,
    Or,
    And,
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateKind::Simple => "simple",
            StateKind::Or => "or",
            StateKind::And => "and",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum State {
    Simple {
        name: StateName,
        #[serde(default)]
        opt: Optionality,
    },
    Or {
        name: StateName,
        #[serde(default)]
        opt: Optionality,
        initial: StateName,
        substates: Vec<State>,
        #[serde(default)]
        transitions: Vec<Transition>,
    },
    And {
        name: StateName,
        #[serde(default)]
        opt: Optionality,
        regions: Vec<State>,
    },
}

impl State {
    pub fn simple(name: &str) -> Self {
        State::Simple { name: name.to_owned(), opt: Optionality::NonOptional }
    }

    pub fn or(name: &str, initial: &str, substates: Vec<State>, transitions: Vec<Transition>) -> Self {
        State::Or {
            name: name.to_owned(),
            opt: Optionality::NonOptional,
            initial: initial.to_owned(),
            substates,
            transitions,
        }
    }

    pub fn and(name: &str, regions: Vec<State>) -> Self {
        State::And { name: name.to_owned(), opt: Optionality::NonOptional, regions }
    }

    pub fn optional(mut self) -> Self {
        self.set_opt(Optionality::Optional);
        self
    }

    pub fn name(&self) -> &StateName {
        match self {
            State::Simple { name, .. } | State::Or { name, .. } | State::And { name, .. } => name,
        }
    }

    pub fn opt(&self) -> Optionality {
        match self {
            State::Simple { opt, .. } | State::Or { opt, .. } | State::And { opt, .. } => *opt,
        }
    }

    pub fn set_opt(&mut self, value: Optionality) {
        match self {
            State::Simple { opt, .. } | State::Or { opt, .. } | State::And { opt, .. } => *opt = value,
        }
    }

    pub fn kind(&self) -> StateKind {
        match self {
            State::Simple { .. } => StateKind::Simple,
            State::Or { .. } => StateKind::Or,
            State::And { .. } => StateKind::And,
        }
    }

    /// Substates of an Or-state or regions of an And-state.
    pub fn children(&self) -> &[State] {
        match self {
            State::Simple { .. } => &[],
            State::Or { substates, .. } => substates,
            State::And { regions, .. } => regions,
        }
    }

    pub fn children_mut(&mut self) -> Option<&mut Vec<State>> {
        match self {
            State::Simple { .. } => None,
            State::Or { substates, .. } => Some(substates),
            State::And { regions, .. } => Some(regions),
        }
    }

    pub fn transitions(&self) -> &[Transition] {
        match self {
            State::Or { transitions, .. } => transitions,
            _ => &[],
        }
    }

    pub fn initial(&self) -> Option<&StateName> {
        match self {
            State::Or { initial, .. } => Some(initial),
            _ => None,
        }
    }

    /// Pre-order walk over this state and all descendants.
    pub fn walk(&self) -> Vec<&State> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(s) = stack.pop() {
            out.push(s);
            for c in s.children().iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    fn walk_mut(&mut self, f: &mut dyn FnMut(&mut State)) {
        f(self);
        if let Some(children) = self.children_mut() {
            for c in children {
                c.walk_mut(f);
            }
        }
    }
}

/// A statechart with variabilities. The root is always an Or-state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateChartStar {
    pub root: State,
}

impl StateChartStar {
    pub fn new(root: State) -> Self {
        Self { root }
    }

    pub fn states(&self) -> Vec<&State> {
        self.root.walk()
    }

    pub fn state(&self, name: &str) -> Option<&State> {
        self.root.walk().into_iter().find(|s| s.name() == name)
    }

    pub fn state_mut(&mut self, name: &str) -> Option<&mut State> {
        fn find<'a>(s: &'a mut State, name: &str) -> Option<&'a mut State> {
            if s.name() == name {
                return Some(s);
            }
            for c in s.children_mut()?.iter_mut() {
                if let Some(found) = find(c, name) {
                    return Some(found);
                }
            }
            None
        }
        find(&mut self.root, name)
    }

    /// Every transition paired with the name of its owning Or-state.
    pub fn transitions(&self) -> Vec<(&StateName, &Transition)> {
        self.states()
            .into_iter()
            .flat_map(|s| s.transitions().iter().map(move |t| (s.name(), t)))
            .collect()
    }

    pub fn transition(&self, name: &str) -> Option<&Transition> {
        self.transitions().into_iter().map(|(_, t)| t).find(|t| t.name == name)
    }

    pub fn for_each_state_mut(&mut self, mut f: impl FnMut(&mut State)) {
        self.root.walk_mut(&mut f);
    }

    pub fn for_each_transition_mut(&mut self, mut f: impl FnMut(&mut Transition)) {
        self.root.walk_mut(&mut |s| {
            if let State::Or { transitions, .. } = s {
                transitions.iter_mut().for_each(&mut f);
            }
        });
    }

    /// Keeps only the transitions for which `keep` returns true; returns the
    /// names of the removed ones.
    pub fn retain_transitions(&mut self, mut keep: impl FnMut(&Transition) -> bool) -> Vec<TransitionName> {
        let mut removed = Vec::new();
        self.root.walk_mut(&mut |s| {
            if let State::Or { transitions, .. } = s {
                transitions.retain(|t| {
                    let k = keep(t);
                    if !k {
                        removed.push(t.name.clone());
                    }
                    k
                });
            }
        });
        removed
    }

    /// Detaches the named state (with its whole subtree) from its parent.
    pub fn remove_state(&mut self, name: &str) -> Option<State> {
        fn detach(s: &mut State, name: &str) -> Option<State> {
            let children = s.children_mut()?;
            if let Some(pos) = children.iter().position(|c| c.name() == name) {
                return Some(children.remove(pos));
            }
            children.iter_mut().find_map(|c| detach(c, name))
        }
        if self.root.name() == name {
            return None;
        }
        detach(&mut self.root, name)
    }

    /// Appends a transition to the named Or-state. Returns false if the owner
    /// is missing or not an Or-state.
    pub fn add_transition(&mut self, owner: &str, t: Transition) -> bool {
        match self.state_mut(owner) {
            Some(State::Or { transitions, .. }) => {
                transitions.push(t);
                true
            }
            _ => false,
        }
    }

    pub fn index(&self) -> Index {
        Index::build(self)
    }
}

/// Name-keyed view of a machine's hierarchy.
#[derive(Clone, Debug, Default)]
pub struct Index {
    pub kind: BTreeMap<StateName, StateKind>,
    pub parent: BTreeMap<StateName, StateName>,
    pub opt: BTreeMap<StateName, Optionality>,
    pub owner: BTreeMap<TransitionName, StateName>,
    pub root: StateName,
}

impl Index {
    fn build(sc: &StateChartStar) -> Self {
        let mut idx = Index { root: sc.root.name().clone(), ..Default::default() };
        for s in sc.states() {
            idx.kind.insert(s.name().clone(), s.kind());
            idx.opt.insert(s.name().clone(), s.opt());
            for c in s.children() {
                idx.parent.insert(c.name().clone(), s.name().clone());
            }
            for t in s.transitions() {
                idx.owner.insert(t.name.clone(), s.name().clone());
            }
        }
        idx
    }

    pub fn contains(&self, state: &str) -> bool {
        self.kind.contains_key(state)
    }

    /// Strict ancestors, nearest first.
    pub fn ancestors(&self, state: &str) -> Vec<StateName> {
        let mut out = Vec::new();
        let mut cur = state;
        while let Some(p) = self.parent.get(cur) {
            out.push(p.clone());
            cur = p;
        }
        out
    }

    /// True if `inner` is `outer` or lies below it.
    pub fn is_within(&self, inner: &str, outer: &str) -> bool {
        let mut cur = inner;
        loop {
            if cur == outer {
                return true;
            }
            match self.parent.get(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    /// The direct child of `ancestor` that is `state` or contains it.
    pub fn child_toward(&self, ancestor: &str, state: &str) -> Option<StateName> {
        let mut cur = state;
        loop {
            let p = self.parent.get(cur)?;
            if p == ancestor {
                return Some(cur.to_owned());
            }
            cur = p;
        }
    }

    /// Lowest state that is a strict ancestor of both `a` and `b`.
    pub fn lowest_common_ancestor(&self, a: &str, b: &str) -> Option<StateName> {
        if !self.contains(a) || !self.contains(b) {
            return None;
        }
        let theirs: BTreeSet<StateName> = self.ancestors(b).into_iter().collect();
        self.ancestors(a).into_iter().find(|x| theirs.contains(x))
    }

    /// The Or-state a transition between `a` and `b` belongs in: the lowest
    /// common ancestor, or the nearest Or-state above it when that ancestor is
    /// an And-state.
    pub fn placement_owner(&self, a: &str, b: &str) -> Option<StateName> {
        let lca = self.lowest_common_ancestor(a, b)?;
        if self.kind.get(&lca) == Some(&StateKind::Or) {
            return Some(lca);
        }
        self.ancestors(&lca).into_iter().find(|x| self.kind.get(x) == Some(&StateKind::Or))
    }

    pub fn descendants(&self, state: &str) -> BTreeSet<StateName> {
        self.kind.keys().filter(|s| s.as_str() != state && self.is_within(s, state)).cloned().collect()
    }
}

/// Splits a (possibly composed) transition name into its atomic parts.
pub fn comp_parts(name: &str) -> Vec<&str> {
    match name.strip_prefix(COMP_PREFIX).and_then(|rest| rest.strip_suffix(')')) {
        Some(inner) => inner.split(',').collect(),
        None => vec![name],
    }
}

/// Name of the composition of two transitions, flattened so that both
/// association orders produce the same string.
pub fn comp_name(first: &str, second: &str) -> TransitionName {
    let parts: Vec<&str> = comp_parts(first).into_iter().chain(comp_parts(second)).collect();
    format!("{COMP_PREFIX}{})", parts.join(","))
}

fn atomic_name_problem(name: &str) -> Option<&'static str> {
    if name.is_empty() {
        Some("empty name")
    } else if name.chars().any(char::is_whitespace) {
        Some("contains whitespace")
    } else if name.contains('.') {
        Some("contains '.' (reserved as a hierarchy separator)")
    } else if name.contains(['(', ')', ',']) {
        Some("contains '(', ')' or ','")
    } else {
        None
    }
}

pub fn check_atomic_name(name: &str) -> Result<(), String> {
    atomic_name_problem(name).map_or(Ok(()), |p| Err(p.to_owned()))
}

fn transition_name_problem(name: &str) -> Option<&'static str> {
    if let Some(inner) = name.strip_prefix(COMP_PREFIX).and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() < 2 {
            return Some("composed name needs at least two parts");
        }
        return parts.into_iter().find_map(atomic_name_problem);
    }
    atomic_name_problem(name)
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    #[error("{element}: invalid name ({reason})")]
    InvalidName { element: String, reason: String },
    #[error("state name `{name}` is used more than once")]
    DuplicateStateName { name: String },
    #[error("transition name `{name}` is used more than once")]
    DuplicateTransitionName { name: String },
    #[error("`{name}` names both a state and a transition")]
    NameClash { name: String },
    #[error("root `{name}` must be an Or-state")]
    RootNotOr { name: String },
    #[error("Or-state `{state}` has no substates")]
    EmptyOr { state: String },
    #[error("Or-state `{state}`: initial `{initial}` is not a direct substate")]
    InitialNotSubstate { state: String, initial: String },
    #[error("And-state `{state}` has {count} region(s), needs at least 2")]
    TooFewRegions { state: String, count: usize },
    #[error("And-state `{state}`: region `{region}` is not an Or-state")]
    RegionNotOr { state: String, region: String },
    #[error("transition `{transition}` has an empty trigger")]
    EmptyTrigger { transition: String },
    #[error("transition `{transition}`: {field} `{value}` is not a valid event/action name")]
    InvalidLabel { transition: String, field: String, value: String },
    #[error("transition `{transition}` refers to unknown state `{state}`")]
    UnknownEndpoint { transition: String, state: String },
    #[error("transition `{transition}` crosses the regions of And-state `{state}`")]
    CrossesRegions { transition: String, state: String },
    #[error("transition `{transition}` is owned by `{owner}` but belongs in {expected}")]
    MisplacedTransition { transition: String, owner: String, expected: String },
    #[error("transition `{transition}`: condition refers to unknown state `{state}`")]
    UnknownInState { transition: String, state: String },
}

/// Well-formedness check. Returns every violation found; empty means the
/// machine is well formed.
pub fn check_well_formed_star(sc: &StateChartStar) -> Vec<Violation> {
    let mut out = Vec::new();
    let states = sc.states();
    let idx = sc.index();

    if sc.root.kind() != StateKind::Or {
        out.push(Violation::RootNotOr { name: sc.root.name().clone() });
    }

    let mut seen_states = BTreeSet::new();
    let mut dup_states = BTreeSet::new();
    for s in &states {
        if let Some(reason) = atomic_name_problem(s.name()) {
            out.push(Violation::InvalidName { element: s.name().clone(), reason: reason.to_owned() });
        }
        if !seen_states.insert(s.name().clone()) {
            dup_states.insert(s.name().clone());
        }
    }
    out.extend(dup_states.into_iter().map(|name| Violation::DuplicateStateName { name }));

    for s in &states {
        match s {
            State::Simple { .. } => {}
            State::Or { name, initial, substates, .. } => {
                if substates.is_empty() {
                    out.push(Violation::EmptyOr { state: name.clone() });
                } else if !substates.iter().any(|c| c.name() == initial) {
                    out.push(Violation::InitialNotSubstate { state: name.clone(), initial: initial.clone() });
                }
            }
            State::And { name, regions, .. } => {
                if regions.len() < 2 {
                    out.push(Violation::TooFewRegions { state: name.clone(), count: regions.len() });
                }
                for r in regions.iter().filter(|r| r.kind() != StateKind::Or) {
                    out.push(Violation::RegionNotOr { state: name.clone(), region: r.name().clone() });
                }
            }
        }
    }

    let mut seen_transitions = BTreeSet::new();
    let mut dup_transitions = BTreeSet::new();
    for (owner, t) in sc.transitions() {
        if let Some(reason) = transition_name_problem(&t.name) {
            out.push(Violation::InvalidName { element: t.name.clone(), reason: reason.to_owned() });
        }
        if !seen_transitions.insert(t.name.clone()) {
            dup_transitions.insert(t.name.clone());
        }
        if seen_states.contains(&t.name) {
            out.push(Violation::NameClash { name: t.name.clone() });
        }
        if t.trigger.is_empty() {
            out.push(Violation::EmptyTrigger { transition: t.name.clone() });
        }
        for (field, values) in [("event", &t.trigger), ("action", &t.actions)] {
            for v in values.iter().filter(|v| v.is_empty() || v.chars().any(char::is_whitespace)) {
                out.push(Violation::InvalidLabel {
                    transition: t.name.clone(),
                    field: field.to_owned(),
                    value: v.clone(),
                });
            }
        }
        let mut endpoints_known = true;
        for endpoint in [&t.source, &t.target] {
            if !idx.contains(endpoint) {
                endpoints_known = false;
                out.push(Violation::UnknownEndpoint { transition: t.name.clone(), state: endpoint.clone() });
            }
        }
        if endpoints_known {
            match idx.lowest_common_ancestor(&t.source, &t.target) {
                Some(lca) if idx.kind[&lca] == StateKind::And => {
                    out.push(Violation::CrossesRegions { transition: t.name.clone(), state: lca });
                }
                Some(lca) if &lca != owner => out.push(Violation::MisplacedTransition {
                    transition: t.name.clone(),
                    owner: owner.clone(),
                    expected: format!("`{lca}`"),
                }),
                Some(_) => {}
                None => out.push(Violation::MisplacedTransition {
                    transition: t.name.clone(),
                    owner: owner.clone(),
                    expected: "no state (the root cannot be an endpoint)".to_owned(),
                }),
            }
        }
        for s in t.cond.in_states().filter(|s| !idx.contains(s)) {
            out.push(Violation::UnknownInState { transition: t.name.clone(), state: s.clone() });
        }
    }
    out.extend(dup_transitions.into_iter().map(|name| Violation::DuplicateTransitionName { name }));
    out
}

/// Names of optional states (SOp) and optional transitions (TOp).
pub fn var_elems(sc: &StateChartStar) -> (BTreeSet<StateName>, BTreeSet<TransitionName>) {
    let sop = sc.states().into_iter().filter(|s| s.opt().is_optional()).map(|s| s.name().clone()).collect();
    let top = sc
        .transitions()
        .into_iter()
        .filter(|(_, t)| t.is_optional())
        .map(|(_, t)| t.name.clone())
        .collect();
    (sop, top)
}

/// SOp ∪ TOp as one set.
pub fn var_elem_set(sc: &StateChartStar) -> BTreeSet<String> {
    let (sop, top) = var_elems(sc);
    sop.into_iter().chain(top).collect()
}

/// Sorted copy used for structural equality: substates, regions and
/// transitions ordered by name.
pub fn canonicalize(sc: &StateChartStar) -> StateChartStar {
    let mut out = sc.clone();
    out.for_each_state_mut(|s| {
        if let Some(children) = s.children_mut() {
            children.sort_by(|a, b| a.name().cmp(b.name()));
        }
        if let State::Or { transitions, .. } = s {
            transitions.sort_by(|a, b| a.name.cmp(&b.name));
        }
    });
    out
}
