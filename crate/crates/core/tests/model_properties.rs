use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use settle_core::model::*;
use settle_core::presets::Preset;

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(1000)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn discount_is_decreasing_and_one_at_zero(r in 1e-4..5.0f64, u in 0.0..50.0f64, du in 1e-3..10.0f64) {
        let m = DiscountModel::new(r);
        prop_assert_eq!(discount(&m, 0.0).unwrap(), 1.0);
        let a = discount(&m, u).unwrap();
        let b = discount(&m, u + du).unwrap();
        prop_assert!(a > b);
        prop_assert!(b > 0.0 && a <= 1.0);
    }

    #[test]
    fn gompertz_is_increasing_and_bounded(a in 0.01..10.0f64, b in 0.01..50.0f64, t in 0.0..2.0f64, dt in 1e-3..1.0f64) {
        let g = GompertzParams::new(a, b);
        let f0 = gompertz_factor(&g, t);
        let f1 = gompertz_factor(&g, t + dt);
        prop_assert!(f1 > f0 || f1 == 1.0);
        // f64 rounds to exactly 1 once a*exp(-bt) drops below machine epsilon
        prop_assert!(f0 > 0.0 && (f0 < 1.0 || a * (-b * t).exp() < 1e-15));
        prop_assert!(gompertz_factor(&g, 1e6) == 1.0);
    }

    #[test]
    fn phasor_boundaries_and_monotone_relaxation(
        core in -1e6..1e6f64,
        modulation in -1e5..1e5f64,
        rate in 0.1..5.0f64,
        s1 in 0.0..1.0f64,
        s2 in 0.0..1.0f64,
        later in 0.0..10.0f64,
    ) {
        let c = PhasorConstraint::new(core, modulation, rate);
        let end = FRAC_PI_2 / rate;
        prop_assert_eq!(phasor_eval(&c, 0.0), core + modulation);
        prop_assert_eq!(phasor_eval(&c, end), core);
        prop_assert_eq!(phasor_eval(&c, end + later), core);
        // continuity just before phase-out
        let just_before = phasor_eval(&c, end * (1.0 - 1e-9));
        prop_assert!((just_before - core).abs() <= 1e-6 * modulation.abs().max(1.0));

        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let (vlo, vhi) = (phasor_eval(&c, lo * end), phasor_eval(&c, hi * end));
        if modulation > 0.0 {
            prop_assert!(vhi <= vlo);
        } else {
            prop_assert!(vhi >= vlo);
        }
    }

    #[test]
    fn contract_value_is_linear(
        z1 in proptest::collection::vec(0.0..1e3f64, 4),
        z2 in proptest::collection::vec(0.0..1e3f64, 4),
        alpha in 0.0..5.0f64,
        beta in 0.0..5.0f64,
    ) {
        let s = Preset::Fig2Red.scenario();
        let m = |v: &[f64]| vec![vec![v[0], v[1]], vec![v[2], v[3]]];
        let combo: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = contract_value(&s, &m(&combo)).unwrap();
        let rhs = alpha * contract_value(&s, &m(&z1)).unwrap() + beta * contract_value(&s, &m(&z2)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn offered_value_never_exceeds_contract_value(
        z in proptest::collection::vec(0.0..1e3f64, 4),
        t in 0.0..3.0f64,
    ) {
        let s = Preset::Fig2Red.scenario();
        let z = vec![vec![z[0], z[1]], vec![z[2], z[3]]];
        prop_assert!(offered_value(&s, &z, t).unwrap() <= contract_value(&s, &z).unwrap());
    }

    #[test]
    fn regime_depends_only_on_value_ratio(scale in 0.01..100.0f64, u2 in 1.1..8.0f64) {
        let mut s = Preset::Fig2Red.scenario();
        s.installments[1].delay = u2;
        let Ok(before) = regime(&s) else { return Ok(()) };
        s.performances[0].value_per_unit *= scale;
        s.contract_unit_value *= scale;
        prop_assert_eq!(regime(&s).unwrap(), before);
    }

    #[test]
    fn acceptance_margin_grows_with_termination_cost(
        g in 0.0..3e5f64,
        h in 0.0..3e5f64,
        b in 0.0..1e5f64,
        db in 1.0..1e5f64,
        w in 0.0..1.0f64,
        nu in 0.0..1.0f64,
    ) {
        let r = DiscountModel::new(0.2);
        let offer = AlternateSupplierOffer {
            alternate_value: h,
            expected_damages: 50_000.0,
            damages_delay: 3.0,
            litigation_risk: w,
            alternate_failure_risk: nu,
            termination_cost: b,
        };
        let m0 = acceptance_check(g, &offer, &r).unwrap().margin;
        let m1 = acceptance_check(g, &AlternateSupplierOffer { termination_cost: b + db, ..offer }, &r).unwrap().margin;
        prop_assert!((m1 - m0 - db).abs() <= 1e-6 * (m0.abs() + db).max(1.0));
    }
}
