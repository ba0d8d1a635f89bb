//! End-to-end property checks over generated product lines.

use serde::Serialize;

use crate::binding::nsc;
use crate::generate::{generate_random_product_line, Limits, ProductLine};
use crate::io::{parse_configuration, parse_product_line, serialize_configuration, serialize_product_line};
use crate::model::{var_elems, StateChartStar};
use crate::strategy::{
    all_orders, confluence_over_orders, instantiate, sampled_orders, step_bound, validate_all,
};

/// Above this many pending elements the confluence check samples orders
/// instead of trying all of them.
pub const EXHAUSTIVE_LIMIT: usize = 5;
pub const SAMPLED_ORDERS: usize = 50;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FuzzFailure {
    pub seed: u64,
    pub problems: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FuzzReport {
    pub cases: usize,
    pub failures: Vec<FuzzFailure>,
}

impl FuzzReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Generates `count` lines from consecutive seeds and checks each one.
pub fn fuzz(seed: u64, count: usize, limits: &Limits) -> FuzzReport {
    let mut report = FuzzReport::default();
    for i in 0..count as u64 {
        let case_seed = seed.wrapping_add(i);
        let pl = generate_random_product_line(case_seed, limits);
        let problems = check_line(&pl, case_seed);
        report.cases += 1;
        if !problems.is_empty() {
            report.failures.push(FuzzFailure { seed: case_seed, problems });
        }
    }
    report
}

/// Validity, serialization round trip, output purity, step bound and
/// order independence of one product line. Returns the violated properties.
pub fn check_line(pl: &ProductLine, seed: u64) -> Vec<String> {
    let mut problems = Vec::new();
    match validate_all(&pl.fm, &pl.conf, &pl.sc, &pl.imp) {
        Ok(report) if report.is_clean() => {}
        Ok(report) => problems.extend(report.messages()),
        Err(e) => problems.push(e.to_string()),
    }

    let text = serialize_product_line(&pl.fm, &pl.sc, &pl.imp);
    match parse_product_line(&text) {
        Ok(doc) if (doc.feature_model == pl.fm && doc.statechart == pl.sc && doc.imp == pl.imp) => {
            if serialize_product_line(&doc.feature_model, &doc.statechart, &doc.imp) != text {
                problems.push("product line serialization is not canonical".into());
            }
        }
        Ok(_) => problems.push("product line round trip changed the artifacts".into()),
        Err(e) => problems.push(format!("product line round trip: {e}")),
    }
    match parse_configuration(&serialize_configuration(&pl.conf)) {
        Ok(conf) if conf == pl.conf => {}
        Ok(_) => problems.push("configuration round trip changed it".into()),
        Err(e) => problems.push(format!("configuration round trip: {e}")),
    }
    if !problems.is_empty() {
        return problems;
    }

    let to_delete = nsc(&pl.fm, &pl.conf, &pl.sc, &pl.imp);
    match instantiate(&pl.fm, &pl.conf, &pl.sc, &pl.imp) {
        Ok(inst) => {
            problems.extend(purity_problems(&inst.product, &to_delete));
            let bound = step_bound(&pl.sc, &to_delete);
            if inst.trace.len() > bound {
                problems.push(format!("trace has {} steps, bound is {bound}", inst.trace.len()));
            }
        }
        Err(e) => problems.push(format!("instantiation failed: {e}")),
    }

    let report = if to_delete.len() <= EXHAUSTIVE_LIMIT {
        confluence_over_orders(&pl.sc, &to_delete, all_orders(&to_delete), false)
    } else {
        confluence_over_orders(&pl.sc, &to_delete, sampled_orders(&to_delete, SAMPLED_ORDERS, seed), false)
    };
    if !report.confluent {
        problems.push(format!("orders diverge: {:?}", report.divergence.map(|d| (d.first_order, d.second_order))));
    }
    problems
}

/// Problems with a product: leftover optional flags or deleted names.
pub fn purity_problems(product: &StateChartStar, deleted: &std::collections::BTreeSet<String>) -> Vec<String> {
    let mut problems = Vec::new();
    let (sop, top) = var_elems(product);
    if !sop.is_empty() || !top.is_empty() {
        problems.push(format!("optional elements remain: {sop:?} {top:?}"));
    }
    let names: Vec<String> = product
        .states()
        .into_iter()
        .map(|s| s.name().clone())
        .chain(product.transitions().into_iter().map(|(_, t)| t.name.clone()))
        .collect();
    for name in names.iter().filter(|n| deleted.contains(*n)) {
        problems.push(format!("deleted element `{name}` is still present"));
    }
    problems
}
