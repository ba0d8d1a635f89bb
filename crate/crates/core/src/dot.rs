//! Graphviz export.
//!
//! The root Or-state is the graph itself, composite states become clusters
//! and simple states become nodes. Each cluster gets an invisible point node
//! so that transitions to or from a composite can be drawn with
//! `lhead`/`ltail`. Optional elements are dashed and initial substates have a
//! thicker outline. Children and transitions are emitted sorted by name.

use std::fmt::Write;

use crate::model::{Optionality, State, StateChartStar, Transition};

pub fn export_dot(sc: &StateChartStar) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(sc.root.name()));
    let _ = writeln!(out, "  compound=true;");
    let _ = writeln!(out, "  node [shape=box, style=rounded];");
    let initial = sc.root.initial().cloned();
    for child in sorted(sc.root.children()) {
        emit_state(&mut out, child, initial.as_deref() == Some(child.name().as_str()), 1);
    }
    let mut transitions: Vec<&Transition> = sc.transitions().into_iter().map(|(_, t)| t).collect();
    transitions.sort_by(|a, b| a.name.cmp(&b.name));
    for t in transitions {
        emit_transition(&mut out, sc, t);
    }
    out.push_str("}\n");
    out
}

/// The label of a transition: `e1::e2, cond / a1::a2`, omitting a true
/// condition and an empty action list.
pub fn transition_label(t: &Transition) -> String {
    let mut label = t.trigger.join("::");
    if !t.cond.is_true() {
        let _ = write!(label, ", {}", t.cond);
    }
    if !t.actions.is_empty() {
        let _ = write!(label, " / {}", t.actions.join("::"));
    }
    label
}

fn sorted(states: &[State]) -> Vec<&State> {
    let mut v: Vec<&State> = states.iter().collect();
    v.sort_by(|a, b| a.name().cmp(b.name()));
    v
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn anchor(name: &str) -> String {
    format!("{name}#anchor")
}

fn style(opt: Optionality, base: &str) -> String {
    match (opt.is_optional(), base.is_empty()) {
        (true, true) => "dashed".to_owned(),
        (true, false) => format!("{base},dashed"),
        (false, true) => "solid".to_owned(),
        (false, false) => base.to_owned(),
    }
}

fn emit_state(out: &mut String, state: &State, is_initial: bool, depth: usize) {
    let pad = "  ".repeat(depth);
    let pen = if is_initial { ", penwidth=2" } else { "" };
    let cluster_pen = if is_initial { " penwidth=2;" } else { "" };
    match state {
        State::Simple { name, opt } => {
            let _ = writeln!(out, "{pad}{} [label={}, style={}{pen}];", quote(name), quote(name), quote(&style(*opt, "rounded")));
        }
        State::Or { name, opt, initial, substates, .. } => {
            let _ = writeln!(out, "{pad}subgraph {} {{", quote(&format!("cluster_{name}")));
            let _ = writeln!(out, "{pad}  label={}; style={};{cluster_pen}", quote(name), quote(&style(*opt, "rounded")));
            let _ = writeln!(out, "{pad}  {} [shape=point, style=invis];", quote(&anchor(name)));
            for child in sorted(substates) {
                emit_state(out, child, child.name() == initial, depth + 1);
            }
            let _ = writeln!(out, "{pad}}}");
        }
        State::And { name, opt, regions } => {
            let _ = writeln!(out, "{pad}subgraph {} {{", quote(&format!("cluster_{name}")));
            let _ = writeln!(out, "{pad}  label={}; style={};{cluster_pen}", quote(name), quote(&style(*opt, "")));
            let _ = writeln!(out, "{pad}  {} [shape=point, style=invis];", quote(&anchor(name)));
            for region in sorted(regions) {
                emit_state(out, region, false, depth + 1);
            }
            let _ = writeln!(out, "{pad}}}");
        }
    }
}

fn emit_transition(out: &mut String, sc: &StateChartStar, t: &Transition) {
    let endpoint = |name: &str| -> (String, Option<String>) {
        match sc.state(name) {
            Some(State::Simple { .. }) | None => (quote(name), None),
            Some(_) => (quote(&anchor(name)), Some(quote(&format!("cluster_{name}")))),
        }
    };
    let (src, ltail) = endpoint(&t.source);
    let (dst, lhead) = endpoint(&t.target);
    let mut attrs = vec![format!("label={}", quote(&transition_label(t)))];
    if t.opt.is_optional() {
        attrs.push("style=dashed".to_owned());
    }
    if let Some(c) = ltail {
        attrs.push(format!("ltail={c}"));
    }
    if let Some(c) = lhead {
        attrs.push(format!("lhead={c}"));
    }
    let _ = writeln!(out, "  {src} -> {dst} [{}];", attrs.join(", "));
}
