mod common;

use scvar::generate::{generate_random_product_line, Limits};
use scvar::model::{var_elems, State};
use scvar::export_dot;

#[test]
fn mini_parser_rejects_broken_text() {
    assert!(common::parse_dot("digraph \"g\" {").is_err());
    assert!(common::parse_dot("digraph \"g\" { \"a\" -> \"b\"; }").is_err());
    assert!(common::parse_dot("graph \"g\" { }").is_err());
    assert!(common::parse_dot("digraph \"g\" { \"a\" [label=\"a\"]; }").is_ok());
}

#[test]
fn generated_machines_export_valid_dot() {
    for seed in 0..200 {
        let pl = generate_random_product_line(seed, &Limits::default());
        let dot = export_dot(&pl.sc);
        let graph = common::parse_dot(&dot).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{dot}"));

        let states = pl.sc.states();
        let simple = states.iter().filter(|s| matches!(s, State::Simple { .. })).count();
        let composite = states.len() - simple - 1;
        assert_eq!(graph.clusters.len(), composite, "seed {seed}");
        assert_eq!(graph.nodes.len(), simple + composite, "seed {seed}");
        assert_eq!(graph.edges.len(), pl.sc.transitions().len(), "seed {seed}");

        let (sop, top) = var_elems(&pl.sc);
        let dashed_edges = graph.edges.iter().filter(|(_, _, a)| a.get("style").map(String::as_str) == Some("dashed")).count();
        assert_eq!(dashed_edges, top.len(), "seed {seed}");
        for s in sop.iter().filter(|s| matches!(pl.sc.state(s), Some(State::Simple { .. }))) {
            assert!(graph.nodes[s]["style"].contains("dashed"), "seed {seed}: {s}");
        }
    }
}
