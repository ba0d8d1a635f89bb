//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scvar::feature_model::FeatureModel;
use scvar::model::{Atom, State, StateChartStar, Transition};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Feature models

/// Parent of every non-root feature, read off the relations.
fn parent_map(fm: &FeatureModel) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for r in fm.mand.iter().chain(&fm.opt).chain(&fm.alt).chain(&fm.or_rel) {
        for c in &r.children {
            out.insert(c.clone(), r.parent.clone());
        }
    }
    out
}

/// Whether a feature subset is a product of the tree model: it holds the
/// root, is closed under parents, and every selected parent satisfies its
/// mandatory, alternative and or groups.
pub fn subset_is_product(fm: &FeatureModel, s: &BTreeSet<String>) -> bool {
    if !s.contains(&fm.root) {
        return false;
    }
    let parents = parent_map(fm);
    if s.iter().any(|f| *f != fm.root && !parents.get(f).is_some_and(|p| s.contains(p))) {
        return false;
    }
    let count = |children: &BTreeSet<String>| children.iter().filter(|c| s.contains(*c)).count();
    fm.mand.iter().filter(|r| s.contains(&r.parent)).all(|r| count(&r.children) == r.children.len())
        && fm.alt.iter().filter(|r| s.contains(&r.parent)).all(|r| count(&r.children) == 1)
        && fm.or_rel.iter().filter(|r| s.contains(&r.parent)).all(|r| count(&r.children) >= 1)
}

pub fn all_subsets(fm: &FeatureModel) -> Vec<BTreeSet<String>> {
    let funcs: Vec<&String> = fm.funcs.iter().collect();
    (0u32..1 << funcs.len())
        .map(|mask| funcs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, f)| (*f).clone()).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Reachability by matrix closure

fn parents_of(sc: &StateChartStar) -> BTreeMap<String, String> {
    fn go(s: &State, out: &mut BTreeMap<String, String>) {
        for c in s.children() {
            out.insert(c.name().clone(), s.name().clone());
            go(c, out);
        }
    }
    let mut out = BTreeMap::new();
    go(&sc.root, &mut out);
    out
}

/// The direct child of `ancestor` on the way up from `state`, if any.
fn child_under(parents: &BTreeMap<String, String>, ancestor: &str, state: &str) -> Option<String> {
    let mut cur = state.to_owned();
    loop {
        let p = parents.get(&cur)?;
        if p == ancestor {
            return Some(cur);
        }
        cur = p.clone();
    }
}

/// Reflexive-transitive closure of a boolean adjacency matrix.
fn closure(mut m: Vec<Vec<bool>>) -> Vec<Vec<bool>> {
    let n = m.len();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = true;
    }
    for k in 0..n {
        let through = m[k].clone();
        for row in m.iter_mut().filter(|row| row[k]) {
            for (cell, &reach) in row.iter_mut().zip(&through) {
                *cell |= reach;
            }
        }
    }
    m
}

pub fn oracle_reachable_or(sc: &StateChartStar, state: &str, from: &str, excluded: &BTreeSet<String>) -> BTreeSet<String> {
    let st = sc.state(state).expect("Or-state exists");
    let parents = parents_of(sc);
    let children: Vec<String> = st.children().iter().map(|c| c.name().clone()).collect();
    let pos = |n: &str| children.iter().position(|c| c == n);
    let mut m = vec![vec![false; children.len()]; children.len()];
    for t in st.transitions().iter().filter(|t| !excluded.contains(&t.name)) {
        let a = child_under(&parents, state, &t.source).and_then(|c| pos(&c));
        let b = child_under(&parents, state, &t.target).and_then(|c| pos(&c));
        if let (Some(a), Some(b)) = (a, b) {
            m[a][b] = true;
        }
    }
    let m = closure(m);
    let i = pos(from).expect("start is a substate");
    children.iter().enumerate().filter(|(j, _)| m[i][*j]).map(|(_, c)| c.clone()).collect()
}

/// Every tuple of region substates, the step relation of one trigger at a
/// time (all enabled regions move, the rest stay), then the closure.
pub fn oracle_reachable_and(
    sc: &StateChartStar,
    state: &str,
    start: &[String],
    excluded: &BTreeSet<String>,
) -> BTreeSet<Vec<String>> {
    let st = sc.state(state).expect("And-state exists");
    let parents = parents_of(sc);
    let regions: Vec<&State> = st.children().iter().collect();
    let region_children: Vec<Vec<String>> =
        regions.iter().map(|r| r.children().iter().map(|c| c.name().clone()).collect()).collect();

    let mut space: Vec<Vec<String>> = vec![vec![]];
    for options in &region_children {
        space = space
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut t = prefix.clone();
                    t.push(o.clone());
                    t
                })
            })
            .collect();
    }
    let index: BTreeMap<Vec<String>, usize> = space.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();

    // (region, from, to, trigger, in-atoms)
    let mut moves = Vec::new();
    for (i, r) in regions.iter().enumerate() {
        for t in r.transitions().iter().filter(|t| !excluded.contains(&t.name)) {
            let from = child_under(&parents, r.name(), &t.source);
            let to = child_under(&parents, r.name(), &t.target);
            if let (Some(from), Some(to)) = (from, to) {
                let atoms: Vec<String> = t.cond.in_states().cloned().collect();
                moves.push((i, from, to, t.trigger.clone(), atoms));
            }
        }
    }
    let labels: BTreeSet<Vec<String>> = moves.iter().map(|m| m.3.clone()).collect();
    let holds = |atom: &str, tuple: &[String]| {
        regions.iter().enumerate().all(|(j, r)| {
            if atom == r.name().as_str() {
                return true;
            }
            match child_under(&parents, r.name(), atom) {
                Some(c) => tuple[j] == c,
                None => true,
            }
        })
    };

    let n = space.len();
    let mut m = vec![vec![false; n]; n];
    for (si, tuple) in space.iter().enumerate() {
        for label in &labels {
            let mut per_region: Vec<Vec<String>> = Vec::new();
            let mut any = false;
            for i in 0..regions.len() {
                let mut targets: Vec<String> = moves
                    .iter()
                    .filter(|(r, from, _, l, atoms)| {
                        *r == i && *from == tuple[i] && l == label && atoms.iter().all(|a| holds(a, tuple))
                    })
                    .map(|m| m.2.clone())
                    .collect();
                targets.sort();
                targets.dedup();
                if targets.is_empty() {
                    per_region.push(vec![tuple[i].clone()]);
                } else {
                    any = true;
                    per_region.push(targets);
                }
            }
            if !any {
                continue;
            }
            let mut succ: Vec<Vec<String>> = vec![vec![]];
            for options in &per_region {
                succ = succ
                    .into_iter()
                    .flat_map(|p| {
                        options.iter().map(move |o| {
                            let mut t = p.clone();
                            t.push(o.clone());
                            t
                        })
                    })
                    .collect();
            }
            for s in succ {
                m[si][index[&s]] = true;
            }
        }
    }
    let m = closure(m);
    let i = index[start];
    space.iter().enumerate().filter(|(j, _)| m[i][*j]).map(|(_, t)| t.clone()).collect()
}

// ---------------------------------------------------------------------------
// Composite generators

fn trigger<R: Rng>(rng: &mut R) -> Vec<&'static str> {
    let events = ["a", "b", "c"];
    if rng.gen_bool(0.15) {
        vec![events[rng.gen_range(0..3)], events[rng.gen_range(0..3)]]
    } else {
        vec![events[rng.gen_range(0..3)]]
    }
}

fn finish(mut t: Transition, rng: &mut impl Rng, optional: &mut Vec<String>) -> Transition {
    if rng.gen_bool(0.3) {
        t = t.optional();
        optional.push(t.name.clone());
    }
    t
}

/// An Or-state `C` with up to `max_subs` substates, some of them nested
/// Or-states so that transitions owned by `C` reach into them. Returns the
/// machine and the names of its optional transitions.
pub fn random_or_composite(seed: u64, max_subs: usize) -> (StateChartStar, Vec<String>) {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=max_subs);
    let mut subs = Vec::new();
    // Every state below C, with the direct child it sits in.
    let mut leaves: Vec<(String, String)> = Vec::new();
    let mut optional = Vec::new();
    let mut tid = 0;
    let mut next_t = |prefix: &str| {
        tid += 1;
        format!("{prefix}{tid}")
    };
    for i in 0..n {
        let name = format!("K{i}");
        if rng.gen_bool(0.3) {
            let inner: Vec<String> = (0..rng.gen_range(1..=2)).map(|j| format!("K{i}_{j}")).collect();
            let mut ts = Vec::new();
            if inner.len() == 2 && rng.gen_bool(0.5) {
                ts.push(Transition::new(&next_t("n"), &inner[0], &inner[1], &["a"]));
            }
            for s in &inner {
                leaves.push((s.clone(), name.clone()));
            }
            subs.push(State::or(&name, &inner[0], inner.iter().map(|s| State::simple(s)).collect(), ts));
        } else {
            subs.push(State::simple(&name));
        }
        leaves.push((name.clone(), name));
    }
    let mut ts = Vec::new();
    for _ in 0..rng.gen_range(0..=2 * n) {
        let (a, ca) = leaves.choose(&mut rng).unwrap().clone();
        let (b, cb) = leaves.choose(&mut rng).unwrap().clone();
        // Two states inside the same nested child belong to that child.
        if ca == cb && (a != ca || b != cb) {
            continue;
        }
        let t = Transition::new(&next_t("t"), &a, &b, &trigger(&mut rng));
        ts.push(finish(t, &mut rng, &mut optional));
    }
    let c = State::or("C", "K0", subs, ts);
    let sc = StateChartStar::new(State::or("Top", "C", vec![c, State::simple("Out")], vec![]));
    (sc, optional)
}

/// An And-state `A` with 2..=`max_regions` regions of up to `max_subs`
/// substates, with `in` atoms pointing at other regions, at the own region,
/// and outside the And-state.
pub fn random_and_composite(seed: u64, max_regions: usize, max_subs: usize) -> (StateChartStar, Vec<String>) {
    let mut rng = rng(seed);
    let r = rng.gen_range(2..=max_regions.max(2));
    let names: Vec<Vec<String>> =
        (0..r).map(|i| (0..rng.gen_range(1..=max_subs)).map(|j| format!("R{i}s{j}")).collect()).collect();
    let all: Vec<String> = names.iter().flatten().cloned().chain(["Out".to_owned(), "R0".to_owned()]).collect();
    let mut optional = Vec::new();
    let mut tid = 0;
    let mut regions = Vec::new();
    for (i, subs) in names.iter().enumerate() {
        let mut ts = Vec::new();
        for _ in 0..rng.gen_range(0..=2 * subs.len()) {
            tid += 1;
            let a = subs.choose(&mut rng).unwrap();
            let b = subs.choose(&mut rng).unwrap();
            let mut t = Transition::new(&format!("t{tid}"), a, b, &trigger(&mut rng));
            if rng.gen_bool(0.4) {
                t = t.with_cond(vec![Atom::InState(all.choose(&mut rng).unwrap().clone())]);
            }
            ts.push(finish(t, &mut rng, &mut optional));
        }
        regions.push(State::or(&format!("R{i}"), &subs[0], subs.iter().map(|s| State::simple(s)).collect(), ts));
    }
    let a = State::and("A", regions);
    let sc = StateChartStar::new(State::or("Top", "A", vec![a, State::simple("Out")], vec![]));
    (sc, optional)
}

/// A flat machine with two optional states `P1` and `P2` (each simple or a
/// small Or-state) and a chain `S0 -> P1 -> P2 -> Sk` plus random extra
/// transitions. The two states are what gets deleted.
pub fn random_two_pending(seed: u64) -> StateChartStar {
    let mut rng = rng(seed);
    let n = rng.gen_range(2..=4);
    let mut subs: Vec<State> = (0..n).map(|i| State::simple(&format!("S{i}"))).collect();
    let mut endpoints: Vec<String> = (0..n).map(|i| format!("S{i}")).collect();
    for p in ["P1", "P2"] {
        if rng.gen_bool(0.3) {
            let inner = [format!("{p}a"), format!("{p}b")];
            let ts = vec![Transition::new(&format!("{p}_in"), &inner[0], &inner[1], &["c"])];
            subs.push(State::or(p, &inner[0], inner.iter().map(|s| State::simple(s)).collect(), ts).optional());
        } else {
            subs.push(State::simple(p).optional());
        }
        endpoints.push(p.to_owned());
    }
    let guard = |rng: &mut ChaCha8Rng, g: &str| if rng.gen_bool(0.4) { vec![Atom::Guard(g.to_owned())] } else { vec![] };
    let acts = |rng: &mut ChaCha8Rng, a: &'static str| if rng.gen_bool(0.5) { vec![a] } else { vec![] };
    let last = format!("S{}", rng.gen_range(0..n));
    let chain = [("S0", "P1", "g1", "x"), ("P1", "P2", "g2", "y"), ("P2", last.as_str(), "g3", "z")];
    let mut ts = Vec::new();
    for (i, (a, b, g, act)) in chain.iter().enumerate() {
        let cond = guard(&mut rng, g);
        let actions = acts(&mut rng, act);
        ts.push(Transition::new(&format!("c{i}"), a, b, &trigger(&mut rng)).with_cond(cond).with_actions(&actions));
    }
    for k in 0..rng.gen_range(0..=5) {
        let a = endpoints.choose(&mut rng).unwrap();
        let b = endpoints.choose(&mut rng).unwrap();
        let cond = guard(&mut rng, "h");
        ts.push(Transition::new(&format!("e{k}"), a, b, &trigger(&mut rng)).with_cond(cond));
    }
    StateChartStar::new(State::or("Top", "S0", subs, ts))
}

// ---------------------------------------------------------------------------
// DOT subset parser

#[derive(Debug, Default)]
pub struct DotGraph {
    pub name: String,
    pub nodes: BTreeMap<String, BTreeMap<String, String>>,
    pub edges: Vec<(String, String, BTreeMap<String, String>)>,
    pub clusters: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Id(String),
    Arrow,
    Sym(char),
}

fn lex(text: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '{' | '}' | '[' | ']' | ';' | ',' | '=' => {
                chars.next();
                out.push(Tok::Sym(c));
            }
            '-' => {
                chars.next();
                if chars.next() != Some('>') {
                    return Err("`-` not followed by `>`".into());
                }
                out.push(Tok::Arrow);
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return Err("unterminated string".into()),
                        Some('"') => break,
                        Some('\\') => s.push(chars.next().ok_or("dangling escape")?),
                        Some(ch) => s.push(ch),
                    }
                }
                out.push(Tok::Id(s));
            }
            c if c.is_ascii_alphanumeric() || c == '_' || c == '.' => {
                let mut s = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_ascii_alphanumeric() || ch == '_' || ch == '.' {
                        s.push(ch);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Tok::Id(s));
            }
            other => return Err(format!("unexpected character `{other}`")),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    graph: DotGraph,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, c: char) -> Result<(), String> {
        match self.next() {
            Some(Tok::Sym(s)) if s == c => Ok(()),
            other => Err(format!("expected `{c}`, found {other:?}")),
        }
    }

    fn id(&mut self) -> Result<String, String> {
        match self.next() {
            Some(Tok::Id(s)) => Ok(s),
            other => Err(format!("expected identifier, found {other:?}")),
        }
    }

    fn attrs(&mut self) -> Result<BTreeMap<String, String>, String> {
        let mut out = BTreeMap::new();
        if self.peek() != Some(&Tok::Sym('[')) {
            return Ok(out);
        }
        self.next();
        while self.peek() != Some(&Tok::Sym(']')) {
            let k = self.id()?;
            self.expect('=')?;
            let v = self.id()?;
            out.insert(k, v);
            if matches!(self.peek(), Some(Tok::Sym(',' | ';'))) {
                self.next();
            }
        }
        self.next();
        Ok(out)
    }

    fn stmts(&mut self) -> Result<(), String> {
        loop {
            match self.peek() {
                Some(Tok::Sym('}')) => {
                    self.next();
                    return Ok(());
                }
                None => return Err("unbalanced braces".into()),
                Some(Tok::Sym(';')) => {
                    self.next();
                }
                Some(Tok::Id(kw)) if kw == "subgraph" => {
                    self.next();
                    let name = self.id()?;
                    self.expect('{')?;
                    self.graph.clusters.insert(name);
                    self.stmts()?;
                }
                Some(Tok::Id(kw)) if kw == "node" || kw == "edge" || kw == "graph" => {
                    self.next();
                    self.attrs()?;
                }
                Some(Tok::Id(_)) => {
                    let first = self.id()?;
                    match self.peek() {
                        Some(Tok::Sym('=')) => {
                            self.next();
                            self.id()?;
                        }
                        Some(Tok::Arrow) => {
                            self.next();
                            let second = self.id()?;
                            let a = self.attrs()?;
                            self.graph.edges.push((first, second, a));
                        }
                        _ => {
                            let a = self.attrs()?;
                            self.graph.nodes.insert(first, a);
                        }
                    }
                }
                Some(other) => return Err(format!("unexpected token {other:?}")),
            }
        }
    }
}

/// Parses the subset of DOT the exporter emits and checks that edges only
/// mention declared nodes and clusters.
pub fn parse_dot(text: &str) -> Result<DotGraph, String> {
    let mut p = Parser { toks: lex(text)?, pos: 0, graph: DotGraph::default() };
    match p.id()?.as_str() {
        "digraph" => {}
        other => return Err(format!("expected `digraph`, found `{other}`")),
    }
    p.graph.name = p.id()?;
    p.expect('{')?;
    p.stmts()?;
    if p.pos != p.toks.len() {
        return Err("trailing tokens after the graph".into());
    }
    for (a, b, attrs) in &p.graph.edges {
        for n in [a, b] {
            if !p.graph.nodes.contains_key(n) {
                return Err(format!("edge mentions undeclared node `{n}`"));
            }
        }
        for key in ["lhead", "ltail"] {
            if let Some(c) = attrs.get(key) {
                if !p.graph.clusters.contains(c) {
                    return Err(format!("{key} names unknown cluster `{c}`"));
                }
            }
        }
    }
    Ok(p.graph)
}
