//! Time-stepped mediation: per-instant optimum scaled by the concession
//! factor, settlement detection with bisection refinement, and the
//! read-outs a mediator works from (value terms, peaks, alternate-supplier
//! comparisons).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    acceptance_check, contract_value, gompertz_factor, regime, AcceptanceOutcome,
    AlternateSupplierOffer, PerformanceKind, Regime, Scenario,
};
use crate::optimizer::{optimize_at, ConstraintValues};

/// Bisection stops once the bracket is narrower than this.
const BISECT_WIDTH: f64 = 1e-9;
const MAX_BISECT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettlementRule {
    /// Total unit offers cross the buyer's phasing-out demand.
    Crossing,
    /// Total unit offers reach the core demand after the supplier's
    /// constraints have fully phased out.
    CoreTarget,
}

impl SettlementRule {
    pub fn for_regime(regime: Regime) -> Self {
        match regime {
            Regime::UnitsPreferred => SettlementRule::Crossing,
            Regime::ReimbursementPreferred => SettlementRule::CoreTarget,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub t_max: f64,
    /// Number of grid points, including both ends.
    pub steps: usize,
    /// Derived from the regime when unset.
    pub settlement_rule: Option<SettlementRule>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            t_max: PI,
            steps: 400,
            settlement_rule: None,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::invariant(
                "simulation_t_max_positive",
                format!("t_max must be > 0, got {}", self.t_max),
            ));
        }
        if self.steps < 2 {
            return Err(Error::invariant(
                "simulation_steps_min",
                format!("steps must be >= 2, got {}", self.steps),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        let last = (self.steps - 1) as f64;
        (0..self.steps).map(move |i| self.t_max * i as f64 / last)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    /// Offers on the table, indexed `[performance][installment]`.
    pub offers: Vec<Vec<f64>>,
    pub constraints: ConstraintValues,
    /// Buyer value G of the offers.
    pub buyer_value: f64,
    pub gompertz: f64,
}

impl TracePoint {
    pub fn total_units(&self, s: &Scenario) -> f64 {
        self.offers
            .iter()
            .zip(&s.performances)
            .filter(|(_, p)| p.kind == PerformanceKind::Units)
            .flat_map(|(row, _)| row.iter())
            .sum()
    }

    /// Total money offered.
    pub fn total_money(&self, s: &Scenario) -> f64 {
        self.offers
            .iter()
            .zip(&s.performances)
            .filter(|(_, p)| p.kind == PerformanceKind::Money)
            .flat_map(|(row, _)| row.iter())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlementEvent {
    pub t_star: f64,
    pub units_settled: f64,
    pub money_settled: f64,
    pub buyer_value: f64,
    pub rule: SettlementRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub regime: Regime,
    pub rule: SettlementRule,
    pub points: Vec<TracePoint>,
    pub settlement: Option<SettlementEvent>,
}

/// Offers at a single instant: the constrained optimum scaled by the
/// concession factor.
pub fn evaluate_point(s: &Scenario, t: f64) -> Result<TracePoint> {
    let report = optimize_at(s, t)?;
    let gompertz = gompertz_factor(&s.gompertz, t);
    let offers: Vec<Vec<f64>> = report
        .allocation
        .z
        .iter()
        .map(|row| row.iter().map(|v| v * gompertz).collect())
        .collect();
    let buyer_value = contract_value(s, &offers)?;
    Ok(TracePoint {
        t,
        offers,
        constraints: report.constraints,
        buyer_value,
        gompertz,
    })
}

pub fn simulate(s: &Scenario, cfg: &SimulationConfig) -> Result<SimulationTrace> {
    s.validate()?;
    cfg.validate()?;
    let regime = regime(s)?;
    let rule = cfg
        .settlement_rule
        .unwrap_or_else(|| SettlementRule::for_regime(regime));
    let points = cfg
        .grid()
        .map(|t| evaluate_point(s, t))
        .collect::<Result<Vec<_>>>()?;
    let settlement = detect_settlement(&points, s, rule)?;
    Ok(SimulationTrace {
        regime,
        rule,
        points,
        settlement,
    })
}

/// Shrink `[lo, hi]` around the first point where `pred` turns true,
/// assuming `pred(lo)` is false and `pred(hi)` is true. Returns `hi`.
fn bisect_first_true(
    mut lo: f64,
    mut hi: f64,
    mut pred: impl FnMut(f64) -> Result<bool>,
) -> Result<f64> {
    for _ in 0..MAX_BISECT {
        if hi - lo <= BISECT_WIDTH {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn detect_settlement(
    points: &[TracePoint],
    s: &Scenario,
    rule: SettlementRule,
) -> Result<Option<SettlementEvent>> {
    let settled = |p: &TracePoint| -> bool {
        match rule {
            SettlementRule::Crossing => p.total_units(s) >= p.constraints.demand,
            SettlementRule::CoreTarget => {
                let stable = s
                    .supplier_solvency
                    .phase_out_time()
                    .max(s.supplier_capacity.phase_out_time());
                let core = s.buyer_demand.core;
                p.t >= stable && (p.total_units(s) - core).abs() <= 1e-6 * core.abs().max(1.0)
            }
        }
    };

    let Some(i) = points.iter().position(settled) else {
        return Ok(None);
    };
    let t_star = if i == 0 {
        points[0].t
    } else {
        bisect_first_true(points[i - 1].t, points[i].t, |t| {
            Ok(settled(&evaluate_point(s, t)?))
        })?
    };
    let at = evaluate_point(s, t_star)?;
    Ok(Some(SettlementEvent {
        t_star,
        units_settled: at.total_units(s),
        money_settled: at.total_money(s),
        buyer_value: at.buyer_value,
        rule,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTerm {
    pub performance: String,
    /// 1-based installment.
    pub installment: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueDecomposition {
    pub terms: Vec<ValueTerm>,
    pub total: f64,
}

/// Each additive term `V_n D(u_m) g_nm` of the buyer value, in
/// decision-cell order, plus their sum.
pub fn value_decomposition(s: &Scenario, point: &TracePoint) -> Result<ValueDecomposition> {
    let discounts = s.installment_discounts()?;
    let terms: Vec<ValueTerm> = s
        .decision_cells()
        .into_iter()
        .map(|(n, m)| {
            let p = &s.performances[n];
            ValueTerm {
                performance: p.id.clone(),
                installment: m + 1,
                value: p.value_per_unit * discounts[m] * point.offers[n][m],
            }
        })
        .collect();
    let total = terms.iter().map(|t| t.value).sum();
    Ok(ValueDecomposition { terms, total })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub t: f64,
    pub value: f64,
}

/// Maximum of offer `g[n][m]` over the trace. Ties keep the earliest grid
/// point; interior maxima are refined by bisecting on the sign of the
/// derivative between the neighbouring grid points.
pub fn peak_scan(s: &Scenario, trace: &SimulationTrace, n: usize, m: usize) -> Result<Peak> {
    let points = &trace.points;
    if points.is_empty() {
        return Err(Error::invariant(
            "trace_nonempty",
            "peak scan on an empty trace",
        ));
    }
    let (rows, cols) = s.dims();
    if n >= rows || m >= cols {
        return Err(Error::DimensionMismatch {
            rows,
            cols,
            found_rows: n + 1,
            found_cols: m + 1,
        });
    }
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.offers[n][m] > points[best].offers[n][m] {
            best = i;
        }
    }
    let grid_peak = Peak {
        t: points[best].t,
        value: points[best].offers[n][m],
    };
    if best == 0 || best + 1 == points.len() {
        return Ok(grid_peak);
    }

    let offer = |t: f64| -> Result<f64> { Ok(evaluate_point(s, t)?.offers[n][m]) };
    let (mut lo, mut hi) = (points[best - 1].t, points[best + 1].t);
    let h = 1e-7 * (hi - lo).max(1e-3);
    for _ in 0..MAX_BISECT {
        if hi - lo <= BISECT_WIDTH {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let slope = offer(mid + h)? - offer(mid - h)?;
        if slope > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let value = offer(t)?;
    Ok(if value >= grid_peak.value {
        Peak { t, value }
    } else {
        grid_peak
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlternateComparison {
    pub t: f64,
    pub buyer_value: f64,
    pub outcome: AcceptanceOutcome,
    /// Earliest time at which staying with the supplier beats the threshold.
    pub flip_time: Option<f64>,
}

pub fn compare_alternate(
    s: &Scenario,
    trace: &SimulationTrace,
    point: &TracePoint,
    offer: &AlternateSupplierOffer,
) -> Result<AlternateComparison> {
    offer.validate()?;
    let outcome = acceptance_check(point.buyer_value, offer, &s.discount)?;
    let threshold = outcome.threshold;
    let flip_time = match trace.points.iter().position(|p| p.buyer_value > threshold) {
        None => None,
        Some(0) => Some(trace.points[0].t),
        Some(i) => Some(bisect_first_true(
            trace.points[i - 1].t,
            trace.points[i].t,
            |t| Ok(evaluate_point(s, t)?.buyer_value > threshold),
        )?),
    };
    Ok(AlternateComparison {
        t: point.t,
        buyer_value: point.buyer_value,
        outcome,
        flip_time,
    })
}
