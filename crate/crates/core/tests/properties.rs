use num_rational::BigRational;
use proptest::prelude::*;

use padic_wander::family::{classify, eval_f, eval_fprime, ParameterVector};
use padic_wander::padic::{
    adjoin_radical, newton_solve, random_with_valuation, AnalyticFn, FieldContext, PadicElement, Polynomial,
};
use padic_wander::rational::{int, rat};
use padic_wander::skeleton::{
    compute_n, lambda_log, make_generic, phi_inv_log, phi_log, s_log, varrho_log, LogRadius, RadiiConfig,
};
use padic_wander::synthesis::{build_word, check_inequalities, synthesize, StagePlan, Symbol};
use padic_wander::verify::CheckReport;

fn prime() -> impl Strategy<Value = u64> {
    prop_oneof![Just(2u64), Just(3), Just(5), Just(7)]
}

/// Rational log-radius in `[-3, q_J)`.
fn below_top(cfg: &RadiiConfig, num: i64, den: i64) -> LogRadius {
    let top = cfg.last().value().clone();
    let x = rat(num, den);
    LogRadius::from_rational(if x >= top { top - rat(1, den) } else { x })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn phi_strictly_increasing(p in prime(), a in -30i64..200, b in -30i64..200, den in 1i64..13) {
        let cfg = make_generic(p, 6, 2).unwrap();
        let (x, y) = (below_top(&cfg, a.min(b), den), below_top(&cfg, a.max(b), den));
        let (fx, fy) = (phi_log(&cfg, &x).unwrap(), phi_log(&cfg, &y).unwrap());
        prop_assert_eq!(x < y, fx < fy);
        prop_assert_eq!(x == y, fx == fy);
    }

    #[test]
    fn phi_inverse_round_trip(p in prime(), num in -300i64..900, den in 1i64..50) {
        let cfg = make_generic(p, 6, 2).unwrap();
        let x = below_top(&cfg, num, den);
        let y = phi_log(&cfg, &x).unwrap();
        prop_assert_eq!(phi_inv_log(&cfg, &y).unwrap(), x);
    }

    #[test]
    fn varrho_is_fixed_and_repelling(p in prime(), num in 1i64..100, den in 5i64..20) {
        let cfg = make_generic(p, 4, 2).unwrap();
        let rho = varrho_log(p);
        prop_assert_eq!(phi_log(&cfg, &rho).unwrap(), rho.clone());
        // Backward orbits stay strictly above log ρ.
        let x = LogRadius::from_rational(rho.value() + rat(num, den));
        let mut y = x;
        for _ in 0..12 {
            y = phi_inv_log(&cfg, &y).unwrap();
            prop_assert!(y > rho);
        }
    }

    #[test]
    fn skeleton_constants(p in prime(), j in 1usize..=6) {
        let cfg = make_generic(p, 6, 2).unwrap();
        prop_assert!(lambda_log(&cfg, j).unwrap() > LogRadius::zero());
        prop_assert!(&s_log(&cfg, j).unwrap() < cfg.q(j));
        prop_assert!(compute_n(&cfg, 6).unwrap() >= compute_n(&cfg, 1).unwrap());
    }

    #[test]
    fn synthesized_plans_are_valid_and_minimal(p in prime(), k in 1usize..=5, eps in -2i64..=3) {
        let cfg = make_generic(p, k + 1, 2).unwrap();
        let plan = synthesize(&cfg, &vec![LogRadius::integer(eps); k + 1], k).unwrap();
        prop_assert!(check_inequalities(&cfg, &plan).unwrap().iter().all(|m| m.holds()));
        for s in 1..=k {
            let word = build_word(&plan, s).unwrap();
            prop_assert_eq!(word.len() as u64, plan.big_n(s) + 1);
            prop_assert!(word.max_disk() <= cfg.horizon());
        }
        let violated = |m: Vec<u64>, l: Vec<u64>| {
            let alt = StagePlan::from_parts(m, plan.n.clone(), l, plan.e.clone()).unwrap();
            check_inequalities(&cfg, &alt).unwrap().iter().any(|x| !x.holds())
        };
        for i in 0..k {
            if plan.m[i] > 1 {
                let mut m = plan.m.clone();
                m[i] -= 1;
                prop_assert!(violated(m, plan.l.clone()), "m_{} not minimal", i + 1);
            }
            if plan.l[i] > 1 {
                let mut l = plan.l.clone();
                l[i] -= 1;
                prop_assert!(violated(plan.m.clone(), l), "ℓ_{} not minimal", i + 2);
            }
        }
    }

    #[test]
    fn ultrametric_and_multiplicative(p in prime(), a in -5i64..10, b in -5i64..10, seed in any::<u64>()) {
        let ctx = FieldContext::qp(p, 48).unwrap();
        let x = random_with_valuation(&ctx, &int(a), seed).unwrap();
        let y = random_with_valuation(&ctx, &int(b), seed ^ 1).unwrap();
        prop_assert_eq!(x.mul(&y).unwrap().valuation().unwrap(), int(a + b));
        let s = x.add(&y).unwrap();
        let lo = int(a.min(b));
        match s.valuation() {
            Ok(v) if a != b => prop_assert_eq!(v, lo),
            Ok(v) => prop_assert!(v >= lo),
            Err(_) => prop_assert!(a == b),
        }
    }

    #[test]
    fn ramified_valuations(p in prime(), d in 2u64..=3, k in -4i64..4, seed in any::<u64>()) {
        let base = FieldContext::qp(p, 40).unwrap();
        let (ext, pi) = adjoin_radical(&base, &PadicElement::from_i64(&base, p as i64), d).unwrap();
        let x = random_with_valuation(&base, &int(k), seed).unwrap();
        let xe = x.embed(&ext).unwrap();
        prop_assert_eq!(xe.project(&base).unwrap(), x);
        let y = xe.mul(&pi).unwrap();
        prop_assert_eq!(y.valuation().unwrap(), int(k) + rat(1, d as i64));
    }

    #[test]
    fn newton_postcondition(p in prime(), r in 1i64..50, t in 5i64..30) {
        // (x - r)(x - r - p) has the simple root r; start at r + p^2.
        let ctx = FieldContext::qp(p, 40).unwrap();
        let pp = p as i64;
        let f = Polynomial::from_i64(&ctx, &[r * (r + pp), -(2 * r + pp), 1]);
        let x0 = PadicElement::from_i64(&ctx, r + pp * pp);
        let root = newton_solve(&f, &x0, &int(t)).unwrap();
        // Evaluate at the returned digits; the root's own precision is the
        // Hensel distance v(F) - v(F'), which re-evaluation would charge again.
        let digits = PadicElement::from_rational(&ctx, &root.to_rational().unwrap()).unwrap();
        let lb = f.eval(&digits).unwrap().valuation_lower_bound();
        prop_assert!(lb.is_none_or(|v| v >= int(t)));
    }

    #[test]
    fn norm_law_on_a_and_b0(p in prime(), v in -11i64..=2, seed in any::<u64>()) {
        let cfg = make_generic(p, 6, 2).unwrap();
        let ctx = FieldContext::qp(p, 96).unwrap();
        let c = ParameterVector::random(&cfg, &ctx, seed % 16).unwrap();
        let z = random_with_valuation(&ctx, &int(v), seed).unwrap();
        let sym = classify(&c, &z).unwrap();
        prop_assume!(sym == Symbol::A || sym == Symbol::B(0));
        let f = eval_f(&c, &z).unwrap();
        let vf = f.value.valuation().unwrap();
        let pred = -phi_log(&cfg, &LogRadius::integer(-v)).unwrap().into_rational();
        prop_assert_eq!(&vf, &pred);
        prop_assert!(f.err_val.is_none_or(|e| e > vf));
        let fp = eval_fprime(&c, &z).unwrap().value.valuation_lower_bound().unwrap();
        if sym == Symbol::B(0) {
            prop_assert_eq!(fp, pred - int(v) + int(1));
        } else {
            prop_assert!(fp >= pred - int(v));
        }
    }

    #[test]
    fn report_merge_is_associative(t in proptest::collection::vec((0u64..5, 0u64..3, -4i64..2), 3)) {
        let rs: Vec<CheckReport> = t
            .iter()
            .map(|&(trials, failures, m)| CheckReport {
                trials,
                failures: failures.min(trials),
                certified: trials,
                worst_margin: Some(BigRational::from_integer(m.into())),
                ..CheckReport::empty("x", 0)
            })
            .collect();
        let left = rs[0].clone().merge(rs[1].clone()).merge(rs[2].clone());
        let right = rs[0].clone().merge(rs[1].clone().merge(rs[2].clone()));
        prop_assert_eq!(left, right);
    }
}
