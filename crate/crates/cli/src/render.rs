//! Text output for each command, as CSV or JSON.
//!
//! Exact scores are written as `p/q` strings in JSON; every other number
//! (and every number in CSV) is written with 12 significant digits so
//! outputs are byte-identical across platforms.

use clap::ValueEnum;
use jrank::jr::JrCheck;
use jrank::mallows::SimulationReport;
use jrank::solve::{Price, PriceReport, SelectionResult};
use jrank::{format_sig, Score};
use serde_json::{json, Value};

use crate::io::LoadedInstance;
use crate::report::RepresentationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

fn num(x: f64) -> Value {
    serde_json::from_str(&format_sig(x)).unwrap_or(Value::Null)
}

fn score_json(score: &Score) -> Value {
    match score {
        Score::Exact(r) => Value::String(format!("{}/{}", r.numer(), r.denom())),
        Score::Real(x) => num(*x),
    }
}

fn score_csv(score: &Score) -> String {
    format_sig(score.to_f64())
}

fn exact_csv(score: &Score) -> String {
    score
        .as_exact()
        .map(|r| format!("{}/{}", r.numer(), r.denom()))
        .unwrap_or_default()
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values serialize");
    s.push('\n');
    s
}

fn join(labels: &[String]) -> String {
    labels.join(";")
}

fn jr_status(result: &SelectionResult) -> &'static str {
    match result.committee.satisfies_jr {
        jrank::JrStatus::Satisfied => "true",
        jrank::JrStatus::Violated => "false",
        jrank::JrStatus::Unchecked => "unchecked",
    }
}

pub fn selection(result: &SelectionResult, loaded: &LoadedInstance, format: Format) -> String {
    let items = loaded.item_labels(&result.committee.items);
    let order = loaded.item_labels(&result.pick_order);
    match format {
        Format::Json => pretty(&json!({
            "rule": result.rule,
            "method": result.method.as_str(),
            "k": loaded.instance.k(),
            "items": items,
            "pick_order": order,
            "score": score_json(&result.committee.score),
            "satisfies_jr": jr_status(result),
            "justifying_prefix_size": result.justifying_prefix_size,
        })),
        Format::Csv => table(
            &[
                "rule",
                "method",
                "k",
                "items",
                "pick_order",
                "score",
                "score_exact",
                "satisfies_jr",
                "justifying_prefix_size",
            ],
            &[vec![
                result.rule.clone(),
                result.method.as_str().into(),
                loaded.instance.k().to_string(),
                join(&items),
                join(&order),
                score_csv(&result.committee.score),
                exact_csv(&result.committee.score),
                jr_status(result).into(),
                result.justifying_prefix_size.to_string(),
            ]],
        ),
    }
}

pub fn jr_check(
    items: &[usize],
    check: &JrCheck,
    loaded: &LoadedInstance,
    format: Format,
) -> String {
    let items = loaded.item_labels(items);
    let witness = check.witness().map(|w| {
        (
            loaded.items.label(w.item).to_string(),
            w.group
                .iter()
                .map(|&u| loaded.users.label(u).to_string())
                .collect::<Vec<_>>(),
        )
    });
    match format {
        Format::Json => pretty(&json!({
            "items": items,
            "pass": check.is_pass(),
            "witness": witness.map(|(item, group)| json!({ "item": item, "group": group })),
        })),
        Format::Csv => {
            let (item, group) = witness.unwrap_or_default();
            table(
                &["items", "pass", "witness_item", "witness_group"],
                &[vec![
                    join(&items),
                    check.is_pass().to_string(),
                    item,
                    join(&group),
                ]],
            )
        }
    }
}

fn price_csv(price: &Price) -> (String, String) {
    match price {
        Price::Defined(p) => (score_csv(p), exact_csv(p)),
        Price::Undefined => ("undefined".into(), String::new()),
    }
}

pub fn price(report: &PriceReport, loaded: &LoadedInstance, format: Format) -> String {
    let optimal = loaded.item_labels(&report.optimal.committee.items);
    let constrained = loaded.item_labels(&report.constrained.committee.items);
    match format {
        Format::Json => pretty(&json!({
            "rule": report.optimal.rule,
            "method": report.constrained.method.as_str(),
            "k": loaded.instance.k(),
            "score_opt": score_json(&report.score_opt),
            "score_constrained": score_json(&report.score_constrained),
            "price": match &report.price {
                Price::Defined(p) => score_json(p),
                Price::Undefined => Value::String("undefined".into()),
            },
            "exact": report.exact,
            "optimal_items": optimal,
            "constrained_items": constrained,
            "optimal_satisfies_jr": jr_status(&report.optimal),
            "justifying_prefix_size": report.constrained.justifying_prefix_size,
        })),
        Format::Csv => {
            let (p, p_exact) = price_csv(&report.price);
            table(
                &[
                    "rule",
                    "method",
                    "k",
                    "score_opt",
                    "score_constrained",
                    "price",
                    "price_exact",
                    "exact",
                    "optimal_items",
                    "constrained_items",
                    "optimal_satisfies_jr",
                    "justifying_prefix_size",
                ],
                &[vec![
                    report.optimal.rule.clone(),
                    report.constrained.method.as_str().into(),
                    loaded.instance.k().to_string(),
                    score_csv(&report.score_opt),
                    score_csv(&report.score_constrained),
                    p,
                    p_exact,
                    report.exact.to_string(),
                    join(&optimal),
                    join(&constrained),
                    jr_status(&report.optimal).into(),
                    report.constrained.justifying_prefix_size.to_string(),
                ]],
            )
        }
    }
}

pub fn representation(
    report: &RepresentationReport,
    loaded: &LoadedInstance,
    format: Format,
) -> String {
    let committee = loaded.item_labels(&report.committee);
    match format {
        Format::Json => pretty(&json!({
            "committee": committee,
            "rule": report.rule,
            "total_users": report.total_users,
            "unrepresented_count": report.unrepresented_count,
            "unrepresented_fraction": num(report.unrepresented_fraction()),
            "per_group": report.per_group.iter().map(|g| json!({
                "group": g.group,
                "size": g.size,
                "unrepresented_count": g.unrepresented_count,
                "unrepresented_fraction": num(g.unrepresented_fraction()),
            })).collect::<Vec<_>>(),
        })),
        Format::Csv => {
            let mut rows = vec![vec![
                "overall".to_string(),
                String::new(),
                report.total_users.to_string(),
                report.unrepresented_count.to_string(),
                format_sig(report.unrepresented_fraction()),
            ]];
            rows.extend(report.per_group.iter().map(|g| {
                vec![
                    "group".to_string(),
                    g.group.to_string(),
                    g.size.to_string(),
                    g.unrepresented_count.to_string(),
                    format_sig(g.unrepresented_fraction()),
                ]
            }));
            table(
                &[
                    "scope",
                    "group",
                    "users",
                    "unrepresented_count",
                    "unrepresented_fraction",
                ],
                &rows,
            )
        }
    }
}

pub fn simulation(report: &SimulationReport, format: Format) -> String {
    match format {
        Format::Csv => report.to_csv(),
        Format::Json => {
            let opt = |x: Option<f64>| x.map_or(Value::Null, num);
            pretty(&json!({
                "rule": report.rule,
                "config": {
                    "n": report.config.n,
                    "m": report.config.m,
                    "k": report.config.k,
                    "tau": report.config.tau,
                    "s": report.config.sims,
                    "delta": num(report.config.delta),
                    "seed": report.config.seed,
                },
                "points": report.points.iter().map(|p| json!({
                    "phi": num(p.phi),
                    "mean_price": opt(p.mean_price),
                    "max_price": opt(p.max_price),
                    "bound": p.bound.bound.finite().map_or(Value::String("unbounded".into()), num),
                    "q": p.bound.q,
                    "undefined_count": p.undefined_count,
                    "bound_violations": p.bound_violations,
                })).collect::<Vec<_>>(),
            }))
        }
    }
}
