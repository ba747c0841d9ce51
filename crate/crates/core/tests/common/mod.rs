#![allow(dead_code)]

use proptest::prelude::*;
use settle_core::model::{
    regime, DiscountModel, GompertzParams, Installment, PerformanceType, PhasorConstraint, Regime,
    Scenario,
};

/// A two-installment scenario where delayed units beat reimbursement, both
/// by the regime inequality and per dollar of post-performance capacity, and
/// where solvency and capacity always cover the closed-form optimum.
pub fn units_preferred_scenario() -> impl Strategy<Value = Scenario> {
    (
        (
            300.0..900.0f64,
            50.0..600.0f64,
            500.0..2000.0f64,
            0.8..1.2f64,
        ),
        (0.1..0.9f64, 0.0..0.5f64, 0.0..2.0f64, 0.05..2.0f64),
        (10.0..200.0f64, 1.02..3.0f64, 1.02..3.0f64),
        (
            1.02..2.0f64,
            1.02..2.0f64,
            0.5..3.0f64,
            0.5..3.0f64,
            0.5..3.0f64,
        ),
        (0.5..4.0f64, 1.0..40.0f64, 50.0..400.0f64, -0.3..0.3f64),
    )
        .prop_map(
            |(
                (c_init, markup, v_init, v1_ratio),
                (v2, r, u1, du),
                (cap1, s_a, s_b),
                (r_a, r_b, k, q_s, q_r),
                (a, b, n_core, n_mod_frac),
            )| {
                let c_alt = c_init + markup;
                let s_lo = c_alt * cap1;
                let (s_a, s_b) = (s_lo * s_a, s_lo * s_b);
                let r_lo = markup * s_a.max(s_b) / c_alt;
                let (r_a, r_b) = (r_lo * r_a, r_lo * r_b);
                Scenario {
                    performances: vec![
                        PerformanceType::units("units", v_init * v1_ratio, c_alt),
                        PerformanceType::money("money", v2),
                    ],
                    installments: vec![
                        Installment {
                            index: 1,
                            delay: u1,
                        },
                        Installment {
                            index: 2,
                            delay: u1 + du,
                        },
                    ],
                    discount: DiscountModel::new(r),
                    buyer_demand: PhasorConstraint::new(n_core, n_core * n_mod_frac, k),
                    supplier_solvency: PhasorConstraint::new(s_a, s_b - s_a, q_s),
                    supplier_capacity: PhasorConstraint::new(r_a, r_b - r_a, q_r),
                    unit_caps: vec![Some(cap1), None],
                    contract_unit_value: v_init,
                    contract_unit_cost: c_init,
                    gompertz: GompertzParams::new(a, b),
                }
            },
        )
        .prop_filter("units must dominate reimbursement", |s| {
            let d1 = 1.0 / (1.0 + s.discount.rate * s.installments[0].delay);
            let d2 = 1.0 / (1.0 + s.discount.rate * s.installments[1].delay);
            let v1 = s.performances[0].value_per_unit;
            let v2 = s.performances[1].value_per_unit;
            let markup = s.performances[0].cost_per_unit - s.contract_unit_cost;
            matches!(regime(s), Ok(Regime::UnitsPreferred))
                && (v1 / s.contract_unit_value) * d2 > 1.01 * v2 * d1
                && v1 * d2 > 1.01 * markup * v2 * d1
        })
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
