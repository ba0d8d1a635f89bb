//! Rebuilding rules that remove variant elements from a statechart while
//! keeping it well formed.
//!
//! Every rule is a pure function from machine to machine. Deleting a state
//! removes it together with every transition touching it, and reconnects the
//! machine by composing each non-optional entry transition with each
//! non-optional exit transition it can lead to. Composed transitions record
//! the deleted states they pass through (`via`); two transitions whose paths
//! already share a deleted state are never composed, so the set of
//! compositions produced does not depend on the deletion order.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use itertools::Itertools;
use thiserror::Error;

use crate::model::{
    comp_name, Optionality, State, StateChartStar, StateKind, StateName, Transition, TransitionName,
};

/// Elements still scheduled for deletion.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PendingSet {
    remaining: BTreeSet<String>,
    literal: bool,
}

impl PendingSet {
    pub fn new<I, S>(elements: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { remaining: elements.into_iter().map(Into::into).collect(), literal: false }
    }

    /// Pending transitions keep granting reachability and initial-state
    /// succession until they are actually deleted.
    pub fn paper_literal(mut self, on: bool) -> Self {
        self.literal = on;
        self
    }

    pub fn is_literal(&self) -> bool {
        self.literal
    }

    pub fn contains(&self, name: &str) -> bool {
        self.remaining.contains(name)
    }

    pub fn remove(&mut self, name: &str) -> bool {
        self.remaining.remove(name)
    }

    pub fn is_empty(&self) -> bool {
        self.remaining.is_empty()
    }

    pub fn len(&self) -> usize {
        self.remaining.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &String> {
        self.remaining.iter()
    }

    fn blocks(&self, t: &Transition) -> bool {
        !self.literal && self.contains(&t.name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("no state named `{0}`")]
    UnknownState(String),
    #[error("`{0}` is not a simple state")]
    NotSimple(String),
    #[error("`{0}` is not an Or-state")]
    NotOr(String),
    #[error("`{0}` is not an And-state")]
    NotAnd(String),
    #[error("`{0}` is not optional")]
    NotOptional(String),
    #[error("`{0}` is not pending deletion")]
    NotPending(String),
    #[error("`{state}` is still the initial substate of `{parent}`")]
    IsInitial { state: String, parent: String },
    #[error("`{state}` is not a direct substate of `{of}`")]
    NotSubstate { state: String, of: String },
    #[error("And-state `{state}` has {expected} regions but the tuple has {got} coordinates")]
    BadTuple { state: String, expected: usize, got: usize },
    #[error("cannot compose optional transition `{0}`")]
    OptionalCompose(String),
    #[error("`{first}` ends in `{target}` but `{second}` starts elsewhere")]
    NotComposable { first: String, second: String, target: String },
    #[error("the initial substate of `{0}` is not pending deletion")]
    InitialNotPending(String),
    #[error("Or-state `{0}` has no successor of its deleted initial substate to become the new initial")]
    NoInitial(String),
}

pub type Result<T> = std::result::Result<T, RewriteError>;

/// Sequential composition of two non-optional transitions meeting at the
/// state being eliminated.
pub fn comp(t1: &Transition, t2: &Transition) -> Result<Transition> {
    for t in [t1, t2] {
        if t.is_optional() {
            return Err(RewriteError::OptionalCompose(t.name.clone()));
        }
    }
    if t1.target != t2.source {
        return Err(RewriteError::NotComposable {
            first: t1.name.clone(),
            second: t2.name.clone(),
            target: t1.target.clone(),
        });
    }
    let mut via = t1.via.clone();
    via.push(t1.target.clone());
    via.extend(t2.via.iter().cloned());
    Ok(Transition {
        name: comp_name(&t1.name, &t2.name),
        source: t1.source.clone(),
        target: t2.target.clone(),
        trigger: t1.trigger.iter().chain(&t2.trigger).cloned().collect(),
        cond: t1.cond.and(&t2.cond),
        actions: t1.actions.iter().chain(&t2.actions).cloned().collect(),
        history: t2.history,
        opt: Optionality::NonOptional,
        via,
    })
}

pub fn change_target(t: &Transition, state: &str) -> Transition {
    Transition { target: state.to_owned(), ..t.clone() }
}

pub fn change_source(t: &Transition, state: &str) -> Transition {
    Transition { source: state.to_owned(), ..t.clone() }
}

fn require_kind<'a>(sc: &'a StateChartStar, name: &str, kind: StateKind) -> Result<&'a State> {
    let st = sc.state(name).ok_or_else(|| RewriteError::UnknownState(name.to_owned()))?;
    if st.kind() != kind {
        return Err(match kind {
            StateKind::Simple => RewriteError::NotSimple(name.to_owned()),
            StateKind::Or => RewriteError::NotOr(name.to_owned()),
            StateKind::And => RewriteError::NotAnd(name.to_owned()),
        });
    }
    Ok(st)
}

fn check_deletable(sc: &StateChartStar, name: &str, kind: StateKind, pending: &PendingSet) -> Result<()> {
    let st = require_kind(sc, name, kind)?;
    if !st.opt().is_optional() {
        return Err(RewriteError::NotOptional(name.to_owned()));
    }
    if !pending.contains(name) {
        return Err(RewriteError::NotPending(name.to_owned()));
    }
    let idx = sc.index();
    if let Some(parent) = idx.parent.get(name) {
        if sc.state(parent).and_then(State::initial).map(String::as_str) == Some(name) {
            return Err(RewriteError::IsInitial { state: name.to_owned(), parent: parent.clone() });
        }
    }
    Ok(())
}

/// Non-optional, non-pending transitions entering and leaving the subtree
/// rooted at `state`, each sorted by name.
fn boundary(sc: &StateChartStar, state: &str, pending: &PendingSet) -> (Vec<Transition>, Vec<Transition>) {
    let idx = sc.index();
    let inside = |s: &str| idx.is_within(s, state);
    let mut entries = Vec::new();
    let mut exits = Vec::new();
    for (_, t) in sc.transitions() {
        if t.is_optional() || pending.contains(&t.name) {
            continue;
        }
        match (inside(&t.source), inside(&t.target)) {
            (false, true) => entries.push(t.clone()),
            (true, false) => exits.push(t.clone()),
            _ => {}
        }
    }
    entries.sort_by(|a, b| a.name.cmp(&b.name));
    exits.sort_by(|a, b| a.name.cmp(&b.name));
    (entries, exits)
}

/// Cross product of the non-optional entries and exits of a simple state.
/// Self-loops on the state are neither entries nor exits.
pub fn entry_exit_pairs(state: &str, sc: &StateChartStar, pending: &PendingSet) -> Result<Vec<(Transition, Transition)>> {
    require_kind(sc, state, StateKind::Simple)?;
    let (entries, exits) = boundary(sc, state, pending);
    Ok(entries.iter().flat_map(|e| exits.iter().map(move |x| (e.clone(), x.clone()))).collect())
}

/// Entry/exit pairs that get composed when `state` is deleted: all pairs for
/// a simple state, the reachability-filtered pairs for a composite one.
pub fn composable_pairs(state: &str, sc: &StateChartStar, pending: &PendingSet) -> Result<Vec<(Transition, Transition)>> {
    let st = sc.state(state).ok_or_else(|| RewriteError::UnknownState(state.to_owned()))?;
    match st.kind() {
        StateKind::Simple => entry_exit_pairs(state, sc, pending),
        StateKind::Or => or_pairs(state, sc, pending),
        StateKind::And => and_pairs(state, sc, pending),
    }
}

/// Removes `state` and everything it touches, then adds the compositions of
/// `pairs` (skipping pairs whose paths share a deleted state).
fn rebuild(sc: &StateChartStar, state: &str, pairs: Vec<(Transition, Transition)>) -> Result<StateChartStar> {
    let idx = sc.index();
    let mut inside = idx.descendants(state);
    inside.insert(state.to_owned());

    let mut out = sc.clone();
    out.remove_state(state);
    out.retain_transitions(|t| !inside.contains(&t.source) && !inside.contains(&t.target));

    let placement = out.index();
    let mut existing: BTreeSet<TransitionName> = out.transitions().into_iter().map(|(_, t)| t.name.clone()).collect();
    for (te, ts) in pairs {
        let shared = te.via.iter().any(|v| ts.via.contains(v));
        if shared {
            continue;
        }
        let composed = comp(&change_target(&te, state), &change_source(&ts, state))?;
        if !existing.insert(composed.name.clone()) {
            continue;
        }
        let owner = placement.placement_owner(&composed.source, &composed.target);
        debug_assert!(owner.is_some(), "no owner for {}", composed.name);
        if let Some(owner) = owner {
            out.add_transition(&owner, composed);
        }
    }
    Ok(out)
}

/// Deletes an optional simple state, composing its entries with its exits.
pub fn delete_simple_state(state: &str, sc: &StateChartStar, pending: &PendingSet) -> Result<StateChartStar> {
    check_deletable(sc, state, StateKind::Simple, pending)?;
    let pairs = entry_exit_pairs(state, sc, pending)?;
    rebuild(sc, state, pairs)
}

/// Substates of the Or-state `state` reachable from its substate `from`
/// through internal transitions (reflexive; pending transitions excluded).
pub fn reachable_or(state: &str, from: &str, sc: &StateChartStar, pending: &PendingSet) -> Result<BTreeSet<StateName>> {
    let st = require_kind(sc, state, StateKind::Or)?;
    if !st.children().iter().any(|c| c.name() == from) {
        return Err(RewriteError::NotSubstate { state: from.to_owned(), of: state.to_owned() });
    }
    let idx = sc.index();
    let mut edges: BTreeMap<StateName, BTreeSet<StateName>> = BTreeMap::new();
    for t in st.transitions().iter().filter(|t| !pending.blocks(t)) {
        if let (Some(a), Some(b)) = (idx.child_toward(state, &t.source), idx.child_toward(state, &t.target)) {
            edges.entry(a).or_default().insert(b);
        }
    }
    let mut seen = BTreeSet::from([from.to_owned()]);
    let mut queue = VecDeque::from([from.to_owned()]);
    while let Some(s) = queue.pop_front() {
        for next in edges.get(&s).into_iter().flatten() {
            if seen.insert(next.clone()) {
                queue.push_back(next.clone());
            }
        }
    }
    Ok(seen)
}

fn or_pairs(state: &str, sc: &StateChartStar, pending: &PendingSet) -> Result<Vec<(Transition, Transition)>> {
    let st = require_kind(sc, state, StateKind::Or)?;
    let initial = st.initial().cloned().unwrap_or_default();
    let idx = sc.index();
    let (entries, exits) = boundary(sc, state, pending);
    let mut pairs = Vec::new();
    let mut cache: BTreeMap<StateName, BTreeSet<StateName>> = BTreeMap::new();
    for te in &entries {
        let start = if te.target == state { initial.clone() } else { idx.child_toward(state, &te.target).unwrap_or_default() };
        if !cache.contains_key(&start) {
            let r = reachable_or(state, &start, sc, pending)?;
            cache.insert(start.clone(), r);
        }
        let reach = &cache[&start];
        for ts in &exits {
            let ok = ts.source == state || idx.child_toward(state, &ts.source).is_some_and(|c| reach.contains(&c));
            if ok {
                pairs.push((te.clone(), ts.clone()));
            }
        }
    }
    Ok(pairs)
}

/// Deletes an optional Or-state and its whole content. An entry is composed
/// with an exit when the exit's source substate is reachable from the entry's
/// target substate (an entry into the state itself starts at its initial).
pub fn delete_or_state(state: &str, sc: &StateChartStar, pending: &PendingSet) -> Result<StateChartStar> {
    check_deletable(sc, state, StateKind::Or, pending)?;
    let pairs = or_pairs(state, sc, pending)?;
    rebuild(sc, state, pairs)
}

#[derive(Clone, Debug)]
struct Move {
    from: StateName,
    to: StateName,
    label: Vec<String>,
    in_states: Vec<StateName>,
}

/// The orthogonal regions of an And-state, flattened to per-region moves
/// between region substates.
struct Product {
    regions: Vec<StateName>,
    initials: Vec<StateName>,
    moves: Vec<Vec<Move>>,
    labels: BTreeSet<Vec<String>>,
    idx: crate::model::Index,
}

impl Product {
    fn build(state: &str, sc: &StateChartStar, pending: &PendingSet) -> Result<Self> {
        let st = require_kind(sc, state, StateKind::And)?;
        let idx = sc.index();
        let mut p = Product { regions: Vec::new(), initials: Vec::new(), moves: Vec::new(), labels: BTreeSet::new(), idx };
        for region in st.children() {
            let mut moves = Vec::new();
            for t in region.transitions().iter().filter(|t| !pending.blocks(t)) {
                let from = p.idx.child_toward(region.name(), &t.source);
                let to = p.idx.child_toward(region.name(), &t.target);
                if let (Some(from), Some(to)) = (from, to) {
                    p.labels.insert(t.trigger.clone());
                    moves.push(Move { from, to, label: t.trigger.clone(), in_states: t.cond.in_states().cloned().collect() });
                }
            }
            p.regions.push(region.name().clone());
            p.initials.push(region.initial().cloned().unwrap_or_default());
            p.moves.push(moves);
        }
        Ok(p)
    }

    /// Region index and region substate that must be active for `x` to be
    /// active; `None` when `x` is not strictly inside one of the regions.
    fn locate(&self, x: &str) -> Option<(usize, StateName)> {
        self.regions.iter().enumerate().find_map(|(i, r)| {
            if x != r && self.idx.is_within(x, r) {
                self.idx.child_toward(r, x).map(|c| (i, c))
            } else {
                None
            }
        })
    }

    fn satisfied(&self, in_states: &[StateName], tuple: &[StateName]) -> bool {
        in_states.iter().all(|x| self.locate(x).is_none_or(|(i, c)| tuple[i] == c))
    }

    fn successors(&self, tuple: &[StateName]) -> Vec<Vec<StateName>> {
        let mut out = Vec::new();
        for label in &self.labels {
            let mut options: Vec<Vec<StateName>> = Vec::with_capacity(self.regions.len());
            let mut moved = false;
            for (i, moves) in self.moves.iter().enumerate() {
                let fired: Vec<StateName> = moves
                    .iter()
                    .filter(|m| m.from == tuple[i] && &m.label == label && self.satisfied(&m.in_states, tuple))
                    .map(|m| m.to.clone())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                if fired.is_empty() {
                    options.push(vec![tuple[i].clone()]);
                } else {
                    moved = true;
                    options.push(fired);
                }
            }
            if moved {
                out.extend(options.into_iter().multi_cartesian_product());
            }
        }
        out
    }

    fn reachable(&self, start: Vec<StateName>) -> BTreeSet<Vec<StateName>> {
        let mut seen = BTreeSet::from([start.clone()]);
        let mut queue = VecDeque::from([start]);
        while let Some(t) = queue.pop_front() {
            for next in self.successors(&t) {
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
        seen
    }
}

/// Tuples of region substates reachable from `start`. A step fires one
/// trigger: every region with an enabled transition on it moves, the others
/// stay put. `in X` atoms about states inside the And-state are evaluated on
/// the current tuple; guards and atoms about outside states are assumed true.
pub fn reachable_and(
    state: &str,
    start: &[StateName],
    sc: &StateChartStar,
    pending: &PendingSet,
) -> Result<BTreeSet<Vec<StateName>>> {
    let st = require_kind(sc, state, StateKind::And)?;
    let regions = st.children();
    if start.len() != regions.len() {
        return Err(RewriteError::BadTuple { state: state.to_owned(), expected: regions.len(), got: start.len() });
    }
    for (coord, region) in start.iter().zip(regions) {
        if !region.children().iter().any(|c| c.name() == coord) {
            return Err(RewriteError::NotSubstate { state: coord.clone(), of: region.name().clone() });
        }
    }
    Ok(Product::build(state, sc, pending)?.reachable(start.to_vec()))
}

fn and_pairs(state: &str, sc: &StateChartStar, pending: &PendingSet) -> Result<Vec<(Transition, Transition)>> {
    let product = Product::build(state, sc, pending)?;
    let (entries, exits) = boundary(sc, state, pending);
    let mut pairs = Vec::new();
    for te in &entries {
        let mut start = product.initials.clone();
        if let Some((i, c)) = product.locate(&te.target) {
            start[i] = c;
        }
        let reach = product.reachable(start);
        for ts in &exits {
            let exit_at = product.locate(&ts.source);
            let atoms: Vec<StateName> = ts.cond.in_states().cloned().collect();
            let ok = reach.iter().any(|tuple| {
                exit_at.as_ref().is_none_or(|(j, c)| &tuple[*j] == c) && product.satisfied(&atoms, tuple)
            });
            if ok {
                pairs.push((te.clone(), ts.clone()));
            }
        }
    }
    Ok(pairs)
}

/// Deletes an optional And-state. An entry composes with an exit when some
/// tuple holding the exit's source substate, and satisfying the exit's `in`
/// atoms, is reachable from the region initials with the entry's target
/// substituted into its region.
pub fn delete_and_state(state: &str, sc: &StateChartStar, pending: &PendingSet) -> Result<StateChartStar> {
    check_deletable(sc, state, StateKind::And, pending)?;
    let pairs = and_pairs(state, sc, pending)?;
    rebuild(sc, state, pairs)
}

/// Moves the initial of Or-state `state` off its pending initial substate,
/// to the target of the least-named transition leaving it. Successors that
/// are not pending are preferred.
pub fn repair_initial(state: &str, sc: &StateChartStar, pending: &PendingSet) -> Result<StateChartStar> {
    let st = require_kind(sc, state, StateKind::Or)?;
    let initial = st.initial().cloned().unwrap_or_default();
    if !pending.contains(&initial) {
        return Err(RewriteError::InitialNotPending(state.to_owned()));
    }
    let idx = sc.index();
    let mut candidates: Vec<(bool, &TransitionName, StateName)> = st
        .transitions()
        .iter()
        .filter(|t| !pending.blocks(t))
        .filter(|t| idx.child_toward(state, &t.source).as_ref() == Some(&initial))
        .filter_map(|t| idx.child_toward(state, &t.target).filter(|c| *c != initial).map(|c| (pending.contains(&c), &t.name, c)))
        .collect();
    candidates.sort();
    let (_, _, next) = candidates.into_iter().next().ok_or_else(|| RewriteError::NoInitial(state.to_owned()))?;

    let mut out = sc.clone();
    if let Some(State::Or { initial, .. }) = out.state_mut(state) {
        *initial = next;
    }
    Ok(out)
}

/// Transitions carrying an `in X` atom where X is `state` or lies below it.
pub fn conditions_mentioning(state: &str, sc: &StateChartStar) -> Vec<TransitionName> {
    let closure = closure_of(state, sc);
    sc.transitions()
        .into_iter()
        .filter(|(_, t)| t.cond.in_states().any(|s| closure.contains(s)))
        .map(|(_, t)| t.name.clone())
        .collect()
}

fn closure_of(state: &str, sc: &StateChartStar) -> BTreeSet<StateName> {
    sc.state(state).map(|s| s.walk().into_iter().map(|d| d.name().clone()).collect()).unwrap_or_default()
}

/// Drops every `in X` atom where X is `state` or one of its substates.
pub fn prune_conditions(state: &str, sc: &StateChartStar) -> StateChartStar {
    use crate::model::Atom;
    let closure = closure_of(state, sc);
    let mut out = sc.clone();
    out.for_each_transition_mut(|t| {
        t.cond.atoms.retain(|a| !matches!(a, Atom::InState(s) if closure.contains(s)));
    });
    out
}

/// Removes a transition; a no-op if it is already gone.
pub fn delete_transition(name: &str, sc: &StateChartStar) -> StateChartStar {
    let mut out = sc.clone();
    out.retain_transitions(|t| t.name != name);
    out
}

/// Marks every remaining state and transition non-optional and drops the
/// record of deleted states that composed transitions passed through.
pub fn finalize_optionals(sc: &StateChartStar) -> StateChartStar {
    let mut out = sc.clone();
    out.for_each_state_mut(|s| s.set_opt(Optionality::NonOptional));
    out.for_each_transition_mut(|t| {
        t.opt = Optionality::NonOptional;
        t.via.clear();
    });
    out
}
