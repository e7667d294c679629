mod common;

use common::*;
use novikov_core::novikov::{ExtRational, Novikov, Rational, RingClass};
use proptest::prelude::*;

fn min0(v: ExtRational) -> Rational {
    match v {
        ExtRational::Finite(r) if r.is_negative() => r,
        _ => Rational::zero(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn operations_keep_representation_invariants(a in arb_exact(), b in arb_exact(), e in arb_rational(-2, 6)) {
        for s in [a.add(&b), a.sub(&b), a.mul(&b), a.truncate(&e), a.neg()] {
            prop_assert!(well_formed(&s), "{s:?}");
        }
    }

    #[test]
    fn valuation_is_additive(a in arb_exact(), b in arb_exact()) {
        prop_assume!(!a.is_zero() && !b.is_zero());
        prop_assert_eq!(a.mul(&b).val(), a.val().plus(&b.val()));
    }

    #[test]
    fn valuation_is_ultrametric(a in arb_exact(), b in arb_exact()) {
        let s = a.add(&b);
        let lo = std::cmp::min(a.val(), b.val());
        prop_assert!(s.val() >= lo);
        if a.val() != b.val() {
            prop_assert_eq!(s.val(), lo);
        }
    }

    #[test]
    fn exact_ring_axioms(a in arb_exact(), b in arb_exact(), c in arb_exact()) {
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert_eq!(a.sub(&a), Novikov::zero());
        prop_assert_eq!(a.mul(&Novikov::one()), a.clone());
    }

    #[test]
    fn truncated_ring_axioms_hold_modulo_cutoff(
        a in arb_exact(), b in arb_exact(), c in arb_exact(),
        ea in arb_rational(0, 6), eb in arb_rational(0, 6), ec in arb_rational(0, 6),
    ) {
        let (a, b, c) = (a.truncate(&ea), b.truncate(&eb), c.truncate(&ec));
        prop_assert!(a.mul(&b).mul(&c).eq_mod(&a.mul(&b.mul(&c))));
        prop_assert!(a.mul(&b.add(&c)).eq_mod(&a.mul(&b).add(&a.mul(&c))));
        prop_assert!(a.mul(&b).eq_mod(&b.mul(&a)));
    }

    #[test]
    // energies are nonnegative; below zero a truncation can forget a whole operand
    fn product_of_truncations(a in arb_exact(), b in arb_exact(), e in arb_rational(0, 8)) {
        let e2 = &(&e - &min0(a.val())) - &min0(b.val());
        let lhs = a.mul(&b).truncate(&e);
        let rhs = a.truncate(&e2).mul(&b.truncate(&e2)).truncate(&e);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn inverse_times_self_is_one(a in arb_exact(), e in arb_rational(1, 5)) {
        prop_assume!(!a.is_zero());
        let v = a.val().finite().cloned().unwrap();
        let s = a.truncate(&(&v + &e));
        let inv = s.invert().unwrap();
        let prod = s.mul(&inv);
        prop_assert!(prod.eq_mod(&Novikov::one()), "{s:?} * {inv:?} = {prod:?}");
        // the product is known at least to energy e - |v| above the unit
        prop_assert!(prod.cutoff() >= &ExtRational::Finite(&e - &v.abs()));
    }

    #[test]
    fn inverse_is_an_involution(a in arb_exact(), e in arb_rational(1, 3)) {
        prop_assume!(!a.is_zero());
        let v = a.val().finite().cloned().unwrap();
        let s = a.truncate(&(&v + &e));
        let back = s.invert().unwrap().invert().unwrap();
        prop_assert!(back.eq_mod(&s), "{s:?} vs {back:?}");
        prop_assert_eq!(back.val(), s.val());
    }

    #[test]
    fn classify_matches_valuation(a in arb_exact()) {
        let k = a.classify();
        let zero = ExtRational::Finite(Rational::zero());
        prop_assert!(k.contains(&RingClass::Lambda));
        prop_assert_eq!(k.contains(&RingClass::Lambda0), a.val() >= zero);
        prop_assert_eq!(k.contains(&RingClass::LambdaPlus), a.val() > zero);
        prop_assert_eq!(k.contains(&RingClass::Lambda0Units), a.val() == zero);
        prop_assert_eq!(k.contains(&RingClass::LambdaUnits), !a.is_zero());
        if k.contains(&RingClass::Lambda0Units) {
            prop_assert!(k.contains(&RingClass::Lambda0));
        }
    }

    #[test]
    fn display_round_trips_through_the_parser(a in arb_exact()) {
        let text = a.to_string();
        let back = novikov_core::expr::parse_scalar(&text, &Default::default(), &Default::default()).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn serde_round_trip(a in arb_exact(), e in arb_rational(-2, 6), truncate in any::<bool>()) {
        let a = if truncate { a.truncate(&e) } else { a };
        let json = serde_json::to_string(&a).unwrap();
        prop_assert_eq!(serde_json::from_str::<Novikov>(&json).unwrap(), a);
    }
}
