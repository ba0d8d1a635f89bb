//! Seeded random product lines for property tests and fuzzing.
//!
//! Generated artifacts are valid by construction: the configuration is built
//! top-down from the feature model, every Or-state keeps a non-optional
//! substate, an optional initial always has a non-optional transition to a
//! non-optional sibling, and transitions only cross into composites that are
//! not optional themselves.

use std::collections::BTreeSet;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binding::ImpMapping;
use crate::feature_model::{kernel, Configuration, FeatureModel, RelationKind};
use crate::model::{Atom, History, Optionality, State, StateChartStar, StateKind, Transition};

const EVENTS: [&str; 4] = ["a", "b", "c", "d"];
const ACTIONS: [&str; 3] = ["x", "y", "z"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    /// Nesting depth of the statechart; 1 means a root with simple substates.
    pub max_depth: usize,
    pub max_substates: usize,
    pub max_features: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_depth: 3, max_substates: 4, max_features: 8 }
    }
}

impl Limits {
    pub fn new(max_depth: usize, max_substates: usize, max_features: usize) -> Self {
        Self { max_depth: max_depth.max(1), max_substates: max_substates.max(1), max_features: max_features.max(1) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductLine {
    pub fm: FeatureModel,
    pub conf: Configuration,
    pub sc: StateChartStar,
    pub imp: ImpMapping,
}

pub fn generate_random_product_line(seed: u64, limits: &Limits) -> ProductLine {
    let limits = Limits::new(limits.max_depth, limits.max_substates, limits.max_features);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fm = random_feature_model(&mut rng, limits.max_features);
    let conf = random_configuration(&mut rng, &fm);
    let sc = random_statechart(&mut rng, &limits);
    let imp = random_imp(&mut rng, &fm, &sc);
    ProductLine { fm, conf, sc, imp }
}

/// A random feature tree with `1..=max_features` features named `F0`, `F1`, ...
pub fn random_feature_model<R: Rng>(rng: &mut R, max_features: usize) -> FeatureModel {
    let total = rng.gen_range(1..=max_features.max(1));
    let mut fm = FeatureModel::new("F0");
    let mut names = vec!["F0".to_owned()];
    while names.len() < total {
        let parent = names.choose(rng).cloned().unwrap_or_default();
        let room = total - names.len();
        let kind = match rng.gen_range(0..4) {
            2 if room >= 2 => RelationKind::Alt,
            3 if room >= 2 => RelationKind::Or,
            0 => RelationKind::Mand,
            _ => RelationKind::Opt,
        };
        let count = match kind {
            RelationKind::Alt | RelationKind::Or => rng.gen_range(2..=room.min(3)),
            _ => 1,
        };
        let children: Vec<String> = (0..count).map(|i| format!("F{}", names.len() + i)).collect();
        let refs: Vec<&str> = children.iter().map(String::as_str).collect();
        fm = fm.with(kind, &parent, &refs);
        names.extend(children);
    }
    fm
}

/// A valid configuration chosen top-down: mandatory children always, optional
/// ones by coin flip, one child per alternative, a non-empty subset per
/// or-group.
pub fn random_configuration<R: Rng>(rng: &mut R, fm: &FeatureModel) -> Configuration {
    let mut selected = BTreeSet::from([fm.root.clone()]);
    let mut frontier = vec![fm.root.clone()];
    while let Some(parent) = frontier.pop() {
        for (kind, rel) in fm.all_relations().filter(|(_, r)| r.parent == parent) {
            let children: Vec<&String> = rel.children.iter().collect();
            let chosen: Vec<&String> = match kind {
                RelationKind::Mand => children,
                RelationKind::Opt => children.into_iter().filter(|_| rng.gen_bool(0.5)).collect(),
                RelationKind::Alt => children.choose(rng).into_iter().copied().collect(),
                RelationKind::Or => {
                    let k = rng.gen_range(1..=children.len());
                    children.choose_multiple(rng, k).copied().collect()
                }
            };
            for c in chosen {
                selected.insert(c.clone());
                frontier.push(c.clone());
            }
        }
    }
    Configuration::from_selection(fm, selected)
}

struct Names {
    states: usize,
    transitions: usize,
}

impl Names {
    fn state(&mut self) -> String {
        self.states += 1;
        format!("S{}", self.states)
    }

    fn transition(&mut self) -> String {
        self.transitions += 1;
        format!("t{}", self.transitions)
    }
}

/// A random well-formed statechart with root `S0`.
pub fn random_statechart<R: Rng>(rng: &mut R, limits: &Limits) -> StateChartStar {
    let mut names = Names { states: 0, transitions: 0 };
    let root = random_or(rng, limits, &mut names, "S0".to_owned(), 1);
    let mut sc = StateChartStar::new(root);
    let all: Vec<String> = sc.states().iter().map(|s| s.name().clone()).collect();
    sc.for_each_transition_mut(|t| {
        if rng.gen_bool(0.1) {
            if let Some(s) = all.choose(rng) {
                t.cond.atoms.push(Atom::InState(s.clone()));
            }
        }
    });
    sc
}

/// An Or-state at `depth` with random substates and internal transitions.
fn random_or<R: Rng>(rng: &mut R, limits: &Limits, names: &mut Names, name: String, depth: usize) -> State {
    let k = rng.gen_range(1..=limits.max_substates);
    let mut children: Vec<State> = (0..k).map(|_| random_child(rng, limits, names, depth)).collect();
    if k > 1 {
        for c in children.iter_mut() {
            if rng.gen_bool(0.35) {
                c.set_opt(Optionality::Optional);
            }
        }
        if children.iter().all(|c| c.opt().is_optional()) {
            let i = rng.gen_range(0..k);
            children[i].set_opt(Optionality::NonOptional);
        }
    }
    let initial = children.choose(rng).map(|c| c.name().clone()).unwrap_or_default();

    let mut transitions = Vec::new();
    let initial_optional = children.iter().any(|c| *c.name() == initial && c.opt().is_optional());
    if initial_optional {
        let fallback = children.iter().filter(|c| !c.opt().is_optional()).choose(rng).map(|c| c.name().clone());
        if let Some(to) = fallback {
            transitions.push(random_transition(rng, names, &initial, &to, false));
        }
    }
    for _ in 0..rng.gen_range(0..=2 * k) {
        if let Some(t) = random_internal(rng, names, &children) {
            transitions.push(t);
        }
    }
    State::Or { name, opt: Optionality::NonOptional, initial, substates: children, transitions }
}

fn random_child<R: Rng>(rng: &mut R, limits: &Limits, names: &mut Names, depth: usize) -> State {
    let name = names.state();
    if depth >= limits.max_depth || !rng.gen_bool(0.3) {
        return State::simple(&name);
    }
    if rng.gen_bool(0.7) {
        return random_or(rng, limits, names, name, depth + 1);
    }
    let n = rng.gen_range(2..=3);
    let mut regions = Vec::with_capacity(n);
    for _ in 0..n {
        let region = names.state();
        regions.push(random_or(rng, limits, names, region, depth + 1));
    }
    // Cross-region `in` conditions make the regions depend on each other.
    let coords: Vec<Vec<String>> = regions.iter().map(|r| r.children().iter().map(|c| c.name().clone()).collect()).collect();
    for (i, region) in regions.iter_mut().enumerate() {
        if let State::Or { transitions, .. } = region {
            for t in transitions.iter_mut() {
                if rng.gen_bool(0.3) {
                    let other = (i + rng.gen_range(1..n)) % n;
                    if let Some(s) = coords[other].choose(rng) {
                        t.cond.atoms.push(Atom::InState(s.clone()));
                    }
                }
            }
        }
    }
    State::And { name, opt: Optionality::NonOptional, regions }
}

fn random_transition<R: Rng>(rng: &mut R, names: &mut Names, source: &str, target: &str, may_be_optional: bool) -> Transition {
    let event = EVENTS.choose(rng).copied().unwrap_or("a");
    let actions: Vec<&str> = (0..rng.gen_range(0..=2)).filter_map(|_| ACTIONS.choose(rng).copied()).collect();
    let mut t = Transition::new(&names.transition(), source, target, &[event]).with_actions(&actions);
    if rng.gen_bool(0.2) {
        t.cond.atoms.push(Atom::Guard(format!("g{}", rng.gen_range(0..3))));
    }
    t.history = match rng.gen_range(0..10) {
        0 => History::Shallow,
        1 => History::Deep,
        _ => History::None,
    };
    if may_be_optional && rng.gen_bool(0.3) {
        t.opt = Optionality::Optional;
    }
    t
}

/// A sibling transition, or one entering/leaving a non-optional composite
/// sibling by one level.
fn random_internal<R: Rng>(rng: &mut R, names: &mut Names, children: &[State]) -> Option<Transition> {
    let pick = |rng: &mut R| children.choose(rng).map(|c| c.name().clone());
    let composites: Vec<&State> =
        children.iter().filter(|c| c.kind() != StateKind::Simple && !c.opt().is_optional()).collect();
    match rng.gen_range(0..6) {
        0 if !composites.is_empty() => {
            let into = composites.choose(rng)?;
            let target = deep_point(rng, into)?;
            let source = children.iter().filter(|c| c.name() != into.name()).choose(rng)?.name().clone();
            Some(random_transition(rng, names, &source, &target, true))
        }
        1 if composites.iter().any(|c| c.kind() == StateKind::Or) => {
            let from = composites.iter().filter(|c| c.kind() == StateKind::Or).choose(rng)?;
            let source = from.children().choose(rng)?.name().clone();
            let target = children.iter().filter(|c| c.name() != from.name()).choose(rng)?.name().clone();
            Some(random_transition(rng, names, &source, &target, true))
        }
        _ => {
            let (s, d) = (pick(rng)?, pick(rng)?);
            Some(random_transition(rng, names, &s, &d, true))
        }
    }
}

fn deep_point<R: Rng>(rng: &mut R, composite: &State) -> Option<String> {
    match composite.kind() {
        StateKind::Or => composite.children().choose(rng).map(|c| c.name().clone()),
        StateKind::And => composite.children().choose(rng)?.children().choose(rng).map(|c| c.name().clone()),
        StateKind::Simple => None,
    }
}

/// Maps every optional element to a random non-kernel feature (sometimes
/// two), with occasional inclusions between mapped features.
pub fn random_imp<R: Rng>(rng: &mut R, fm: &FeatureModel, sc: &StateChartStar) -> ImpMapping {
    let kern = kernel(fm);
    let features: Vec<&String> = fm.funcs.iter().filter(|f| !kern.contains(*f)).collect();
    let mut imp = ImpMapping::new();
    if features.is_empty() {
        return imp;
    }
    for element in crate::model::var_elem_set(sc) {
        let f = features.choose(rng).map(|f| f.as_str()).unwrap_or_default();
        imp = imp.with(f, &[&element]);
        if rng.gen_bool(0.2) {
            let g = features.choose(rng).map(|f| f.as_str()).unwrap_or_default();
            imp = imp.with(g, &[&element]);
        }
    }
    let mapped: Vec<String> = imp.entries.keys().cloned().collect();
    for f in &mapped {
        if mapped.len() > 1 && rng.gen_bool(0.15) {
            let g = mapped.iter().filter(|g| *g != f).choose(rng).cloned().unwrap_or_default();
            imp = imp.including(f, &[&g]);
        }
    }
    imp
}
