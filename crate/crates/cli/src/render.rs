//! Human-readable output. Money and units get two decimals, times four.

use std::fmt::Write;

use settle_core::engine::{AlternateComparison, SimulationTrace};
use settle_core::model::{PerformanceKind, Scenario};
use settle_core::optimizer::{SolveReport, SolveStatus};
use settle_core::replicate::Replication;

fn snake<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn solve(s: &Scenario, r: &SolveReport) -> String {
    let mut out = String::new();
    writeln!(out, "t: {:.4}", r.t).unwrap();
    writeln!(out, "regime: {}", snake(&r.regime)).unwrap();
    writeln!(out, "status: {}", snake(&r.status)).unwrap();
    for (perf, row) in s.performances.iter().zip(&r.allocation.z) {
        let cells: Vec<String> = match perf.kind {
            // reimbursement is paid once, up front
            PerformanceKind::Money => vec![format!("{:.2}", row[0])],
            PerformanceKind::Units => row.iter().map(|v| format!("{v:.2}")).collect(),
        };
        writeln!(out, "z[{}]: {}", perf.id, cells.join(" ")).unwrap();
    }
    writeln!(out, "objective: {:.2}", r.allocation.objective).unwrap();
    let binding: Vec<String> = r
        .binding_constraints
        .iter()
        .map(|c| c.to_string())
        .collect();
    writeln!(
        out,
        "binding: {}",
        if binding.is_empty() {
            "none".into()
        } else {
            binding.join(" ")
        }
    )
    .unwrap();
    writeln!(out, "near_insolvent: {}", r.near_insolvent).unwrap();
    if r.status == SolveStatus::InfeasibleDemandRelaxed {
        writeln!(out, "demand_gap: {:.2}", r.demand_gap).unwrap();
    }
    if r.lexicographic_override {
        writeln!(out, "lexicographic_override: true").unwrap();
    }
    out
}

pub fn simulate(trace: &SimulationTrace, t_max: f64) -> String {
    let mut out = String::new();
    writeln!(out, "regime: {}", snake(&trace.regime)).unwrap();
    match &trace.settlement {
        Some(ev) => {
            writeln!(out, "settlement: {}", snake(&ev.rule)).unwrap();
            writeln!(out, "t_star: {:.4}", ev.t_star).unwrap();
            writeln!(out, "units: {:.2}", ev.units_settled).unwrap();
            writeln!(out, "money: {:.2}", ev.money_settled).unwrap();
            writeln!(out, "G: {:.2}", ev.buyer_value).unwrap();
        }
        None => writeln!(out, "no settlement up to t = {t_max:.4}").unwrap(),
    }
    out
}

pub fn replication(rep: &Replication) -> String {
    let mut out = String::new();
    let width = rep
        .checkpoints
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(0);
    for c in &rep.checkpoints {
        let verdict = match (c.informational, c.passed) {
            (true, _) => "INFO",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        let tolerance = if c.informational {
            "informational".to_string()
        } else {
            c.tolerance.to_string()
        };
        writeln!(
            out,
            "{verdict}  {:width$}  expected {:>14.4}  computed {:>14.4}  {tolerance}",
            c.name, c.expected, c.computed
        )
        .unwrap();
    }
    writeln!(
        out,
        "{}: {}",
        rep.figure,
        if rep.passed() { "pass" } else { "fail" }
    )
    .unwrap();
    out
}

pub fn compare(c: &AlternateComparison, settled: bool) -> String {
    let mut out = String::new();
    let at = if settled {
        "settlement"
    } else {
        "end of trace"
    };
    writeln!(out, "evaluated_at: {at}").unwrap();
    writeln!(out, "t: {:.4}", c.t).unwrap();
    writeln!(out, "G: {:.2}", c.buyer_value).unwrap();
    writeln!(out, "threshold: {:.2}", c.outcome.threshold).unwrap();
    writeln!(out, "margin: {:.2}", c.outcome.margin).unwrap();
    writeln!(out, "decision: {}", snake(&c.outcome.decision)).unwrap();
    match c.flip_time {
        Some(t) => writeln!(out, "flip_time: {t:.4}").unwrap(),
        None => writeln!(out, "flip_time: none").unwrap(),
    }
    out
}
