//! Domain types and the closed-form pieces of the settlement model: delay
//! discounting, phasor-modulated constraints, the Gompertz concession factor,
//! the buyer value functions and the two decision inequalities.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for constraint comparisons, in natural units.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerformanceKind {
    Units,
    Money,
}

/// One class of alternative performance the supplier can offer.
///
/// For `Units` the value and cost are per unit. For `Money` the value is the
/// buyer's value of one reimbursed dollar (a fraction below one) and the cost
/// is one dollar per dollar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceType {
    pub id: String,
    pub kind: PerformanceKind,
    pub value_per_unit: f64,
    pub cost_per_unit: f64,
}

impl PerformanceType {
    pub fn units(id: impl Into<String>, value_per_unit: f64, cost_per_unit: f64) -> Self {
        PerformanceType {
            id: id.into(),
            kind: PerformanceKind::Units,
            value_per_unit,
            cost_per_unit,
        }
    }

    pub fn money(id: impl Into<String>, value_per_dollar: f64) -> Self {
        PerformanceType {
            id: id.into(),
            kind: PerformanceKind::Money,
            value_per_unit: value_per_dollar,
            cost_per_unit: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        finite("value_per_unit", self.value_per_unit)?;
        finite("cost_per_unit", self.cost_per_unit)?;
        match self.kind {
            PerformanceKind::Money => {
                if !(0.0..1.0).contains(&self.value_per_unit) {
                    return Err(Error::invariant(
                        "money_value_fraction",
                        format!(
                            "money performance `{}` needs V_n in [0,1), got {}",
                            self.id, self.value_per_unit
                        ),
                    ));
                }
                if self.cost_per_unit < 0.0 {
                    return Err(Error::invariant(
                        "money_cost_nonnegative",
                        format!("money performance `{}` has negative cost", self.id),
                    ));
                }
            }
            PerformanceKind::Units => {
                if self.value_per_unit <= 0.0 {
                    return Err(Error::invariant(
                        "unit_value_positive",
                        format!(
                            "unit performance `{}` needs V_n > 0, got {}",
                            self.id, self.value_per_unit
                        ),
                    ));
                }
                if self.cost_per_unit <= 0.0 {
                    return Err(Error::invariant(
                        "unit_cost_positive",
                        format!(
                            "unit performance `{}` needs C_n > 0, got {}",
                            self.id, self.cost_per_unit
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A delivery moment. `index` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Installment {
    pub index: usize,
    pub delay: f64,
}

/// Something that maps a delivery delay to a multiplicative value factor.
pub trait Discount {
    fn factor(&self, delay: f64) -> Result<f64>;
}

/// Simple hyperbolic discount `1 / (1 + r u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountModel {
    pub rate: f64,
}

impl DiscountModel {
    pub fn new(rate: f64) -> Self {
        DiscountModel { rate }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rate.is_finite() || self.rate < 0.0 {
            return Err(Error::invariant(
                "discount_rate_nonnegative",
                format!("discount rate must be finite and >= 0, got {}", self.rate),
            ));
        }
        Ok(())
    }
}

impl Discount for DiscountModel {
    fn factor(&self, delay: f64) -> Result<f64> {
        discount(self, delay)
    }
}

pub fn discount(model: &DiscountModel, delay: f64) -> Result<f64> {
    if delay.is_nan() || delay < 0.0 {
        return Err(Error::Domain {
            what: "delay",
            value: delay,
        });
    }
    Ok(1.0 / (1.0 + model.rate * delay))
}

/// A perceived constraint whose real part relaxes from `core + modulation`
/// at `t = 0` to `core` once `phase_rate * t` reaches a quarter turn, and
/// stays there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasorConstraint {
    pub core: f64,
    pub modulation: f64,
    pub phase_rate: f64,
}

impl PhasorConstraint {
    pub fn new(core: f64, modulation: f64, phase_rate: f64) -> Self {
        PhasorConstraint {
            core,
            modulation,
            phase_rate,
        }
    }

    /// Constant constraint (no modulation).
    pub fn fixed(core: f64) -> Self {
        PhasorConstraint::new(core, 0.0, 1.0)
    }

    /// Time at which the modulation has fully phased out.
    pub fn phase_out_time(&self) -> f64 {
        FRAC_PI_2 / self.phase_rate
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        phasor_eval(self, t)
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        finite(name, self.core)?;
        finite(name, self.modulation)?;
        if !self.phase_rate.is_finite() || self.phase_rate <= 0.0 {
            return Err(Error::invariant(
                "phase_rate_positive",
                format!("{name}: phase rate must be > 0, got {}", self.phase_rate),
            ));
        }
        Ok(())
    }
}

/// Real part of `core + modulation * exp(i * rate * t)` on the first quarter
/// turn, `core` afterwards. Negative `t` is treated as `t = 0`.
pub fn phasor_eval(c: &PhasorConstraint, t: f64) -> f64 {
    let t = t.max(0.0);
    // compare in time so that `phase_out_time()` itself always lands on core
    if t >= c.phase_out_time() || c.phase_rate * t >= FRAC_PI_2 {
        c.core
    } else {
        c.core + c.modulation * (c.phase_rate * t).cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GompertzParams {
    /// Delay before concessions start.
    pub a: f64,
    /// Concession rate.
    pub b: f64,
}

impl GompertzParams {
    pub fn new(a: f64, b: f64) -> Self {
        GompertzParams { a, b }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::invariant(
                "gompertz_a_positive",
                format!("Gompertz a must be > 0, got {}", self.a),
            ));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::invariant(
                "gompertz_b_positive",
                format!("Gompertz b must be > 0, got {}", self.b),
            ));
        }
        Ok(())
    }
}

/// Fraction of the constrained optimum actually offered at mediation time `t`.
pub fn gompertz_factor(g: &GompertzParams, t: f64) -> f64 {
    (-g.a * (-g.b * t).exp()).exp()
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub performances: Vec<PerformanceType>,
    pub installments: Vec<Installment>,
    pub discount: DiscountModel,
    /// Buyer's minimum number of units, `N_min(t)`.
    pub buyer_demand: PhasorConstraint,
    /// Supplier's solvency during performance, `S(t)`.
    pub supplier_solvency: PhasorConstraint,
    /// Supplier's capacity to absorb cost after performance, `R(t)`.
    pub supplier_capacity: PhasorConstraint,
    /// Maximum alternative units per installment; `None` is unbounded.
    pub unit_caps: Vec<Option<f64>>,
    /// Contractual value of one undelivered unit to the buyer.
    pub contract_unit_value: f64,
    /// Supplier's cost of one contractual unit.
    pub contract_unit_cost: f64,
    pub gompertz: GompertzParams,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.performances.is_empty() {
            return Err(Error::invariant(
                "performances_nonempty",
                "at least one performance type is required",
            ));
        }
        let mut seen_money = false;
        for (i, p) in self.performances.iter().enumerate() {
            p.validate()?;
            if self.performances[..i].iter().any(|q| q.id == p.id) {
                return Err(Error::invariant(
                    "performance_ids_unique",
                    format!("duplicate performance id `{}`", p.id),
                ));
            }
            match p.kind {
                PerformanceKind::Money if seen_money => {
                    return Err(Error::invariant(
                        "single_money_performance",
                        "at most one money performance is supported",
                    ))
                }
                PerformanceKind::Money => seen_money = true,
                PerformanceKind::Units if seen_money => {
                    return Err(Error::invariant(
                        "unit_performances_first",
                        format!(
                            "unit performance `{}` listed after a money performance",
                            p.id
                        ),
                    ))
                }
                PerformanceKind::Units => {}
            }
        }

        if self.installments.is_empty() {
            return Err(Error::invariant(
                "installments_nonempty",
                "at least one installment is required",
            ));
        }
        let mut previous = 0.0;
        for (i, inst) in self.installments.iter().enumerate() {
            if inst.index != i + 1 {
                return Err(Error::invariant(
                    "installment_index_ordinal",
                    format!("installment at position {} has index {}", i + 1, inst.index),
                ));
            }
            if !inst.delay.is_finite() || inst.delay < 0.0 {
                return Err(Error::invariant(
                    "installment_delay_nonnegative",
                    format!("installment {} has delay {}", inst.index, inst.delay),
                ));
            }
            if inst.delay < previous {
                return Err(Error::invariant(
                    "installment_delays_ordered",
                    format!(
                        "installment {} delay {} is before the previous delay {}",
                        inst.index, inst.delay, previous
                    ),
                ));
            }
            previous = inst.delay;
        }

        if self.unit_caps.len() != self.installments.len() {
            return Err(Error::invariant(
                "unit_caps_per_installment",
                format!(
                    "{} unit caps for {} installments",
                    self.unit_caps.len(),
                    self.installments.len()
                ),
            ));
        }
        for (i, cap) in self.unit_caps.iter().enumerate() {
            if let Some(c) = cap {
                if !c.is_finite() || *c < 0.0 {
                    return Err(Error::invariant(
                        "unit_caps_nonnegative",
                        format!("cap of installment {} is {}", i + 1, c),
                    ));
                }
            }
        }

        self.discount.validate()?;
        self.buyer_demand.validate("buyer_demand")?;
        self.supplier_solvency.validate("supplier_solvency")?;
        self.supplier_capacity.validate("supplier_capacity")?;
        self.gompertz.validate()?;

        if !(self.contract_unit_value.is_finite() && self.contract_unit_value > 0.0) {
            return Err(Error::invariant(
                "contract_value_positive",
                format!("V_init must be > 0, got {}", self.contract_unit_value),
            ));
        }
        if !(self.contract_unit_cost.is_finite() && self.contract_unit_cost >= 0.0) {
            return Err(Error::invariant(
                "contract_cost_nonnegative",
                format!("C_init must be >= 0, got {}", self.contract_unit_cost),
            ));
        }
        Ok(())
    }

    /// Allocation matrix shape, `(performances, installments)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.performances.len(), self.installments.len())
    }

    /// The `(performance, installment)` cells that carry a decision variable.
    /// Unit performances may be scheduled in every installment; a money
    /// performance is paid in the first installment only.
    pub fn decision_cells(&self) -> Vec<(usize, usize)> {
        let (_, q) = self.dims();
        self.performances
            .iter()
            .enumerate()
            .flat_map(|(n, p)| {
                let cols = match p.kind {
                    PerformanceKind::Units => q,
                    PerformanceKind::Money => 1,
                };
                (0..cols).map(move |m| (n, m))
            })
            .collect()
    }

    pub fn zero_matrix(&self) -> Vec<Vec<f64>> {
        let (p, q) = self.dims();
        vec![vec![0.0; q]; p]
    }

    /// Discount factor for each installment delay.
    pub fn installment_discounts(&self) -> Result<Vec<f64>> {
        self.installments
            .iter()
            .map(|i| discount(&self.discount, i.delay))
            .collect()
    }
}

/// Decision matrix indexed `[performance][installment]` and its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub z: Vec<Vec<f64>>,
    pub objective: f64,
}

impl Allocation {
    pub fn evaluate(s: &Scenario, z: Vec<Vec<f64>>) -> Result<Self> {
        let objective = contract_value(s, &z)?;
        Ok(Allocation { z, objective })
    }

    /// Sum of all unit-type entries.
    pub fn total_units(&self, s: &Scenario) -> f64 {
        self.z
            .iter()
            .zip(&s.performances)
            .filter(|(_, p)| p.kind == PerformanceKind::Units)
            .flat_map(|(row, _)| row.iter())
            .sum()
    }
}

/// What the buyer could obtain elsewhere, with the litigation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlternateSupplierOffer {
    /// H: value of the alternate supplier's offer.
    pub alternate_value: f64,
    /// A: damages expected from litigation.
    pub expected_damages: f64,
    /// u_A: delay before damages are recovered.
    pub damages_delay: f64,
    /// w: litigation risk weight.
    pub litigation_risk: f64,
    /// nu: risk weight on the alternate supplier failing too.
    pub alternate_failure_risk: f64,
    /// B: cost of terminating the contract.
    pub termination_cost: f64,
}

impl AlternateSupplierOffer {
    pub fn validate(&self) -> Result<()> {
        finite("alternate_value", self.alternate_value)?;
        for (name, v) in [
            ("litigation_risk", self.litigation_risk),
            ("alternate_failure_risk", self.alternate_failure_risk),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invariant(
                    "risk_weight_unit_interval",
                    format!("{name} must lie in [0,1], got {v}"),
                ));
            }
        }
        for (name, v) in [
            ("expected_damages", self.expected_damages),
            ("termination_cost", self.termination_cost),
            ("damages_delay", self.damages_delay),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invariant(
                    "alternate_amounts_nonnegative",
                    format!("{name} must be >= 0, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invariant(
            "finite_values",
            format!("{name} must be finite, got {v}"),
        ))
    }
}

fn check_dims(s: &Scenario, z: &[Vec<f64>]) -> Result<()> {
    let (rows, cols) = s.dims();
    let found_cols = z.first().map_or(0, Vec::len);
    if z.len() != rows || z.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch {
            rows,
            cols,
            found_rows: z.len(),
            found_cols,
        });
    }
    Ok(())
}

fn weighted_sum(
    performances: &[PerformanceType],
    installments: &[Installment],
    disc: &impl Discount,
    z: &[Vec<f64>],
) -> Result<f64> {
    let factors = installments
        .iter()
        .map(|i| disc.factor(i.delay))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for (row, p) in z.iter().zip(performances) {
        for (zv, d) in row.iter().zip(&factors) {
            total += p.value_per_unit * d * zv;
        }
    }
    Ok(total)
}

/// Buyer value of an allocation, `sum V_n D(u_m) z_nm`.
pub fn contract_value(s: &Scenario, z: &[Vec<f64>]) -> Result<f64> {
    check_dims(s, z)?;
    weighted_sum(&s.performances, &s.installments, &s.discount, z)
}

/// Buyer value of the offers actually on the table at mediation time `t`.
pub fn offered_value(s: &Scenario, z: &[Vec<f64>], t: f64) -> Result<f64> {
    Ok(contract_value(s, z)? * gompertz_factor(&s.gompertz, t))
}

/// Value of an alternate supplier's offer, discounted at that supplier's own rate.
pub fn alternate_value(
    performances: &[PerformanceType],
    installments: &[Installment],
    discount_alt: &impl Discount,
    z: &[Vec<f64>],
) -> Result<f64> {
    let rows = performances.len();
    let cols = installments.len();
    if z.len() != rows || z.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch {
            rows,
            cols,
            found_rows: z.len(),
            found_cols: z.first().map_or(0, Vec::len),
        });
    }
    weighted_sum(performances, installments, discount_alt, z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    StayWithSupplier,
    PreferAlternate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceOutcome {
    pub decision: Decision,
    pub threshold: f64,
    /// `G - threshold`; positive means the settlement beats the alternative.
    pub margin: f64,
}

/// Compare the settlement value against the walk-away threshold
/// `nu H + w A D(u_A) - B`. Staying requires strict excess.
pub fn acceptance_check(
    buyer_value: f64,
    offer: &AlternateSupplierOffer,
    buyer_discount: &DiscountModel,
) -> Result<AcceptanceOutcome> {
    let threshold = offer.alternate_failure_risk * offer.alternate_value
        + offer.litigation_risk
            * offer.expected_damages
            * discount(buyer_discount, offer.damages_delay)?
        - offer.termination_cost;
    let decision = if buyer_value > threshold {
        Decision::StayWithSupplier
    } else {
        Decision::PreferAlternate
    };
    Ok(AcceptanceOutcome {
        decision,
        threshold,
        margin: buyer_value - threshold,
    })
}

/// The two-installment case: one unit performance delivered over two
/// installments plus a single reimbursement paid with the first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleCase {
    /// V_1.
    pub unit_value: f64,
    /// C_alt.
    pub unit_cost: f64,
    /// V_2.
    pub money_value: f64,
    pub first_delay: f64,
    pub second_delay: f64,
    /// N_max,1.
    pub first_cap: f64,
    pub second_cap: Option<f64>,
}

impl SimpleCase {
    pub fn of(s: &Scenario) -> Result<Self> {
        let [units, money] = s.performances.as_slice() else {
            return Err(Error::Shape(format!(
                "expected 2 performances (units, money), found {}",
                s.performances.len()
            )));
        };
        if units.kind != PerformanceKind::Units || money.kind != PerformanceKind::Money {
            return Err(Error::Shape(
                "expected a unit performance followed by a money performance".into(),
            ));
        }
        let [first, second] = s.installments.as_slice() else {
            return Err(Error::Shape(format!(
                "expected 2 installments, found {}",
                s.installments.len()
            )));
        };
        let Some(Some(first_cap)) = s.unit_caps.first().copied() else {
            return Err(Error::Shape(
                "first installment needs a finite unit cap".into(),
            ));
        };
        Ok(SimpleCase {
            unit_value: units.value_per_unit,
            unit_cost: units.cost_per_unit,
            money_value: money.value_per_unit,
            first_delay: first.delay,
            second_delay: second.delay,
            first_cap,
            second_cap: s.unit_caps.get(1).copied().flatten(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Delayed second-installment units are worth more than reimbursement.
    UnitsPreferred,
    /// Reimbursement beats delayed units once the minimum demand is met.
    ReimbursementPreferred,
}

/// Both sides of the regime inequality, `(units_side, reimbursement_side)`.
pub fn regime_sides(s: &Scenario) -> Result<(f64, f64)> {
    let case = SimpleCase::of(s)?;
    let units_side =
        (case.unit_value / s.contract_unit_value) * discount(&s.discount, case.second_delay)?;
    let reimbursement_side = case.money_value * discount(&s.discount, case.first_delay)?;
    Ok((units_side, reimbursement_side))
}

pub fn regime(s: &Scenario) -> Result<Regime> {
    let (units_side, reimbursement_side) = regime_sides(s)?;
    let scale = units_side
        .abs()
        .max(reimbursement_side.abs())
        .max(f64::MIN_POSITIVE);
    if (units_side - reimbursement_side).abs() <= 1e-12 * scale {
        Err(Error::RegimeTie {
            units_side,
            reimbursement_side,
        })
    } else if units_side > reimbursement_side {
        Ok(Regime::UnitsPreferred)
    } else {
        Ok(Regime::ReimbursementPreferred)
    }
}

/// Whether solvency at `t` is too low to fund enough alternative units to
/// cover the buyer's demand beyond the first-installment cap.
pub fn near_insolvency(s: &Scenario, t: f64) -> Result<bool> {
    let case = SimpleCase::of(s)?;
    let solvency = phasor_eval(&s.supplier_solvency, t);
    let demand = phasor_eval(&s.buyer_demand, t);
    let required =
        s.contract_unit_cost * case.first_cap + case.unit_cost * (demand - case.first_cap);
    Ok(solvency < required)
}
