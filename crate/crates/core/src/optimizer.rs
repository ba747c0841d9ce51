//! Optimal allocation at a given mediation time.
//!
//! `optimize_at` goes through the simplex routine; `analytic_oracle`
//! evaluates the closed-form optima directly and is kept free of any LP
//! machinery so the two can be checked against each other.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{
    contract_value, near_insolvency, phasor_eval, regime, Allocation, PerformanceKind, Regime,
    Scenario, SimpleCase,
};
use crate::simplex::{simplex_solve, LinearProgram, LpSolution};

/// Label of a constraint family. Serialized as `demand`, `cap_<m>`,
/// `solvency_S` or `capacity_R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintLabel {
    Demand,
    /// Unit cap of the given 1-based installment.
    Cap(usize),
    Solvency,
    Capacity,
}

impl fmt::Display for ConstraintLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintLabel::Demand => f.write_str("demand"),
            ConstraintLabel::Cap(m) => write!(f, "cap_{m}"),
            ConstraintLabel::Solvency => f.write_str("solvency_S"),
            ConstraintLabel::Capacity => f.write_str("capacity_R"),
        }
    }
}

impl FromStr for ConstraintLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "demand" => Ok(ConstraintLabel::Demand),
            "solvency_S" => Ok(ConstraintLabel::Solvency),
            "capacity_R" => Ok(ConstraintLabel::Capacity),
            other => other
                .strip_prefix("cap_")
                .and_then(|m| m.parse().ok())
                .map(ConstraintLabel::Cap)
                .ok_or_else(|| format!("unknown constraint label `{other}`")),
        }
    }
}

impl Serialize for ConstraintLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ConstraintLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Real parts of the three perceived constraints at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintValues {
    pub demand: f64,
    pub solvency: f64,
    pub capacity: f64,
}

impl ConstraintValues {
    pub fn at(s: &Scenario, t: f64) -> Self {
        ConstraintValues {
            demand: phasor_eval(&s.buyer_demand, t),
            solvency: phasor_eval(&s.supplier_solvency, t),
            capacity: phasor_eval(&s.supplier_capacity, t),
        }
    }
}

/// A linear program over the decision cells of a scenario, plus the
/// bookkeeping needed to map the solution back.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltLp {
    pub lp: LinearProgram,
    /// Matrix cell `(performance, installment)` of each LP variable.
    pub cells: Vec<(usize, usize)>,
    pub row_labels: Vec<ConstraintLabel>,
    pub regime: Regime,
    pub t: f64,
    pub constraints: ConstraintValues,
}

impl BuiltLp {
    fn unit_indicator(&self, s: &Scenario) -> Vec<f64> {
        self.cells
            .iter()
            .map(|&(n, _)| match s.performances[n].kind {
                PerformanceKind::Units => 1.0,
                PerformanceKind::Money => 0.0,
            })
            .collect()
    }

    fn to_matrix(&self, s: &Scenario, x: &[f64]) -> Vec<Vec<f64>> {
        let mut z = s.zero_matrix();
        for (&(n, m), v) in self.cells.iter().zip(x) {
            z[n][m] = *v;
        }
        z
    }
}

/// Build the supply-side program at time `t`.
///
/// Demand is not a feasibility constraint. Under `ReimbursementPreferred`
/// it enters as an upper target on total units; under `UnitsPreferred` it is
/// left out and reported as a gap afterwards. Without an override the regime
/// is derived from the scenario, which requires the two-installment shape;
/// other shapes fall back to `UnitsPreferred`.
pub fn build_lp(s: &Scenario, t: f64, regime_override: Option<Regime>) -> Result<BuiltLp> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain {
            what: "time",
            value: t,
        });
    }
    s.validate()?;
    let regime = match regime_override {
        Some(r) => r,
        None => match regime(s) {
            Ok(r) => r,
            Err(Error::Shape(_)) => Regime::UnitsPreferred,
            Err(e) => return Err(e),
        },
    };
    let constraints = ConstraintValues::at(s, t);
    let discounts = s.installment_discounts()?;
    let cells = s.decision_cells();

    let objective = cells
        .iter()
        .map(|&(n, m)| s.performances[n].value_per_unit * discounts[m])
        .collect();
    let mut lp = LinearProgram::new(objective);
    let mut row_labels = Vec::new();
    let is_units = |n: usize| s.performances[n].kind == PerformanceKind::Units;

    for (m, cap) in s.unit_caps.iter().enumerate() {
        if let Some(cap) = cap {
            let row = cells
                .iter()
                .map(|&(n, mm)| if mm == m && is_units(n) { 1.0 } else { 0.0 })
                .collect();
            lp.push_le(row, *cap);
            row_labels.push(ConstraintLabel::Cap(m + 1));
        }
    }

    let solvency_row = cells
        .iter()
        .map(|&(n, _)| {
            if is_units(n) {
                s.performances[n].cost_per_unit
            } else {
                0.0
            }
        })
        .collect();
    lp.push_le(solvency_row, constraints.solvency);
    row_labels.push(ConstraintLabel::Solvency);

    let capacity_row = cells
        .iter()
        .map(|&(n, _)| {
            let p = &s.performances[n];
            match p.kind {
                PerformanceKind::Units => p.cost_per_unit - s.contract_unit_cost,
                PerformanceKind::Money => p.cost_per_unit,
            }
        })
        .collect();
    lp.push_le(capacity_row, constraints.capacity);
    row_labels.push(ConstraintLabel::Capacity);

    if regime == Regime::ReimbursementPreferred {
        let demand_row = cells
            .iter()
            .map(|&(n, _)| if is_units(n) { 1.0 } else { 0.0 })
            .collect();
        lp.push_le(demand_row, constraints.demand);
        row_labels.push(ConstraintLabel::Demand);
    }

    Ok(BuiltLp {
        lp,
        cells,
        row_labels,
        regime,
        t,
        constraints,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Supply-side optimum that also meets the buyer's demand.
    Optimal,
    /// Supply-side optimum that falls short of the demand by `demand_gap`.
    InfeasibleDemandRelaxed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub t: f64,
    pub regime: Regime,
    pub allocation: Allocation,
    pub status: SolveStatus,
    pub binding_constraints: Vec<ConstraintLabel>,
    /// Units short of the buyer's demand at `t`; zero when met.
    pub demand_gap: f64,
    pub near_insolvent: bool,
    pub constraints: ConstraintValues,
    /// Set when units were capped at the demand target although the plain
    /// single-objective program would have allocated more units.
    pub lexicographic_override: bool,
}

fn binding_rows(built: &BuiltLp, x: &[f64]) -> BTreeSet<ConstraintLabel> {
    built
        .lp
        .slacks(x)
        .iter()
        .zip(&built.lp.rhs)
        .zip(&built.row_labels)
        .filter(|((slack, b), _)| slack.abs() <= 1e-7 * b.abs().max(1.0))
        .map(|(_, label)| *label)
        .collect()
}

fn units_of(built: &BuiltLp, s: &Scenario, x: &[f64]) -> f64 {
    built
        .unit_indicator(s)
        .iter()
        .zip(x)
        .map(|(u, v)| u * v)
        .sum()
}

/// Optimal allocation at mediation time `t` for a two-installment scenario.
pub fn optimize_at(s: &Scenario, t: f64) -> Result<SolveReport> {
    SimpleCase::of(s)?;
    let regime = regime(s)?;
    let built = build_lp(s, t, Some(regime))?;

    let (solution, lexicographic_override) = match regime {
        Regime::UnitsPreferred => (simplex_solve(&built.lp)?, false),
        Regime::ReimbursementPreferred => {
            let indicator = built.unit_indicator(s);
            let mut stage1 = built.lp.clone();
            stage1.objective = indicator.clone();
            let target = simplex_solve(&stage1)?.objective;

            let mut stage2 = built.lp.clone();
            stage2.push_ge(indicator, target - 1e-9 * target.abs().max(1.0));
            let sol = simplex_solve(&stage2)?;

            let plain = build_lp(s, t, Some(Regime::UnitsPreferred))?;
            let plain_sol = simplex_solve(&plain.lp)?;
            let plain_units = units_of(&plain, s, &plain_sol.x);
            (sol, plain_units > target + 1e-7 * target.abs().max(1.0))
        }
    };

    report(s, &built, &solution, lexicographic_override)
}

fn report(
    s: &Scenario,
    built: &BuiltLp,
    solution: &LpSolution,
    lexicographic_override: bool,
) -> Result<SolveReport> {
    let z = built.to_matrix(s, &solution.x);
    let allocation = Allocation::evaluate(s, z)?;
    let units = allocation.total_units(s);
    let demand = built.constraints.demand;
    let tol = 1e-7 * demand.abs().max(1.0);
    let demand_gap = if demand - units > tol {
        demand - units
    } else {
        0.0
    };

    let mut binding = binding_rows(built, &solution.x);
    if (units - demand).abs() <= tol {
        binding.insert(ConstraintLabel::Demand);
    }

    Ok(SolveReport {
        t: built.t,
        regime: built.regime,
        status: if demand_gap > 0.0 {
            SolveStatus::InfeasibleDemandRelaxed
        } else {
            SolveStatus::Optimal
        },
        allocation,
        binding_constraints: binding.into_iter().collect(),
        demand_gap,
        near_insolvent: near_insolvency(s, built.t)?,
        constraints: built.constraints,
        lexicographic_override,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub allocation: Allocation,
    pub regime: Regime,
    /// Quantities that came out negative and were clamped to zero.
    pub clamped: Vec<ConstraintLabel>,
}

/// Closed-form optimum of the two-installment case, evaluated directly.
pub fn analytic_oracle(s: &Scenario, t: f64) -> Result<OracleSolution> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain {
            what: "time",
            value: t,
        });
    }
    let case = SimpleCase::of(s)?;
    let regime = regime(s)?;
    let demand = phasor_eval(&s.buyer_demand, t);
    let solvency = phasor_eval(&s.supplier_solvency, t);
    let capacity = phasor_eval(&s.supplier_capacity, t);
    let markup = case.unit_cost - s.contract_unit_cost;
    let first = case.first_cap;
    let mut clamped = Vec::new();

    let (second, reimbursement) = match regime {
        Regime::UnitsPreferred => {
            let mut second = (solvency - case.unit_cost * first) / case.unit_cost;
            if second < 0.0 {
                second = 0.0;
                clamped.push(ConstraintLabel::Solvency);
            }
            (second, capacity - markup * (first + second))
        }
        Regime::ReimbursementPreferred => {
            let mut second = demand - first;
            if second < 0.0 {
                second = 0.0;
                clamped.push(ConstraintLabel::Demand);
            }
            (second, capacity - markup * demand)
        }
    };
    let reimbursement = if reimbursement < 0.0 {
        clamped.push(ConstraintLabel::Capacity);
        0.0
    } else {
        reimbursement
    };

    let z = vec![vec![first, second], vec![reimbursement, 0.0]];
    let objective = contract_value(s, &z)?;
    Ok(OracleSolution {
        allocation: Allocation { z, objective },
        regime,
        clamped,
    })
}
