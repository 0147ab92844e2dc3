use asymptote::selftest::{terms_agree, wirtinger_fd};
use asymptote::{rat, Expansion, LogMonomial, Order};
use num_complex::Complex64;
use proptest::prelude::*;

fn term() -> impl Strategy<Value = LogMonomial> {
    (0..=6i64, 0..=3i64, 0..=3u32, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(i, shift, ell, re, im)| {
        // j has the parity of i so that p - q is an integer
        let j = if i % 2 + 2 * shift > 6 { 5 } else { i % 2 + 2 * shift };
        LogMonomial::new(rat(i, 2), rat(j, 2), ell, Complex64::new(re, im)).unwrap()
    })
}

fn exact() -> impl Strategy<Value = Expansion> {
    prop::collection::vec(term(), 1..=12).prop_map(|terms| Expansion::from_terms(terms, Order::Infinite).unwrap())
}

fn truncated() -> impl Strategy<Value = Expansion> {
    (exact(), prop::option::of(1..=8i64)).prop_map(|(e, o)| match o {
        Some(k) => e.truncated(Order::Finite(rat(k, 2))),
        None => e,
    })
}

fn point() -> impl Strategy<Value = Complex64> {
    (0.05..0.5f64, 0.0..std::f64::consts::TAU).prop_map(|(r, th)| Complex64::from_polar(r, th))
}

fn close(a: Complex64, b: Complex64, scale: f64, rel: f64) -> bool {
    (a - b).norm() <= rel * scale.max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leibniz_rule(f in exact(), g in exact()) {
        let lhs = f.mul(&g).d_dt();
        let rhs = f.d_dt().mul(&g).add(&f.mul(&g.d_dt()));
        prop_assert!(terms_agree(&lhs, &rhs, 1e-12));
        let lhs = f.mul(&g).d_dtbar();
        let rhs = f.d_dtbar().mul(&g).add(&f.mul(&g.d_dtbar()));
        prop_assert!(terms_agree(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn mixed_partials_commute(f in truncated()) {
        prop_assert!(terms_agree(&f.d_dt().d_dtbar(), &f.d_dtbar().d_dt(), 1e-12));
    }

    #[test]
    fn conjugation_swaps_derivatives(f in truncated()) {
        prop_assert!(terms_agree(&f.d_dt().conj(), &f.conj().d_dtbar(), 1e-15));
        prop_assert_eq!(f.conj().conj(), f);
    }

    #[test]
    fn symbolic_derivatives_match_differences(f in exact(), t in point()) {
        let (fd_t, fd_tbar) = wirtinger_fd(&f, t, 1e-5 * t.norm()).unwrap();
        let scale = f.magnitude_at(t).unwrap() / t.norm();
        prop_assert!(close(f.d_dt().eval(t).unwrap(), fd_t, scale, 1e-5));
        prop_assert!(close(f.d_dtbar().eval(t).unwrap(), fd_tbar, scale, 1e-5));
    }

    #[test]
    fn evaluation_is_a_ring_map(f in exact(), g in exact(), t in point()) {
        let (a, b) = (f.eval(t).unwrap(), g.eval(t).unwrap());
        let scale = f.magnitude_at(t).unwrap() * g.magnitude_at(t).unwrap();
        prop_assert!(close(f.mul(&g).eval(t).unwrap(), a * b, scale, 1e-12));
        let scale = f.magnitude_at(t).unwrap() + g.magnitude_at(t).unwrap();
        prop_assert!(close(f.add(&g).eval(t).unwrap(), a + b, scale, 1e-12));
    }

    #[test]
    fn pullback_is_functorial(f in truncated(), a in 1..=4i64, b in 1..=4i64, t in point()) {
        let twice = f.pullback_power(a).unwrap().pullback_power(b).unwrap();
        prop_assert!(terms_agree(&twice, &f.pullback_power(a * b).unwrap(), 1e-14));
        let direct = f.pullback_power(a).unwrap().eval(t).unwrap();
        let composed = f.eval(t.powi(a as i32)).unwrap();
        prop_assert!(close(direct, composed, f.magnitude_at(t.powi(a as i32)).unwrap(), 1e-11));
    }

    #[test]
    fn pullback_commutes_with_products(f in exact(), g in exact(), nu in 1..=3i64) {
        let lhs = f.mul(&g).pullback_power(nu).unwrap();
        let rhs = f.pullback_power(nu).unwrap().mul(&g.pullback_power(nu).unwrap());
        prop_assert!(terms_agree(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn orders_follow_the_arithmetic_rules(f in truncated(), g in truncated()) {
        let sum = f.add(&g);
        prop_assert_eq!(sum.order(), f.order().min(g.order()));
        let product = f.mul(&g);
        let expected = match (f.weight(), g.weight()) {
            (Some(wf), Some(wg)) => f.order().shift(&wg).min(g.order().shift(&wf)),
            _ => f.order().clone().min(g.order().clone()),
        };
        prop_assert_eq!(product.order(), &expected);
        for e in [&sum, &product, &f.d_dt(), &f.d_dtbar()] {
            prop_assert!(e.iter().all(|(k, _)| e.order().admits(&k.weight())));
        }
    }

    #[test]
    fn json_round_trip_is_exact(f in truncated()) {
        let text = serde_json::to_string(&f).unwrap();
        let back: Expansion = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}
