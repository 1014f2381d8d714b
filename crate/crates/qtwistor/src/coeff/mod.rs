//! Exact coefficient field: rational functions in `s` (with `q = s^2`) over
//! the rationals, extended by the multiplicative parameters `r(a,b)`.

mod parse;
mod poly;
mod scalar;

pub use parse::parse_scalar;
pub use poly::SPoly;
pub use scalar::{scalar_arith, ArithOp, CoeffError, Frac, ParamAssignment, RMono, Scalar};

#[cfg(test)]
mod tests {
    use super::*;
    use num::bigint::BigInt;
    use num::rational::BigRational;
    use num::{One, Zero};
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn q_times_q_inverse_is_one() {
        let p = &Scalar::q() * &Scalar::q_pow(-1);
        assert!(p.is_one());
    }

    #[test]
    fn q_plus_minus_q_inverse_is_lambda() {
        let got = &Scalar::q() + &(-&Scalar::q_pow(-1));
        assert_eq!(got, Scalar::lambda());
    }

    #[test]
    fn one_over_q_plus_q_inverse() {
        // 1/(q + q^-1) = s^2/(s^4 + 1); cross-check by evaluation at s = 2.
        let d = &Scalar::q() + &Scalar::q_pow(-1);
        let got = Scalar::one().div(&d).unwrap();
        let expect = Scalar::from_frac(Frac::new(
            SPoly::s_pow(2),
            &SPoly::s_pow(4) + &SPoly::one(),
        ));
        assert_eq!(got, expect);
        let a = ParamAssignment::from_s(2, 1);
        assert_eq!(got.evaluate(&a).unwrap(), rat(4, 17));
    }

    #[test]
    fn division_errors() {
        assert_eq!(
            Scalar::one().div(&Scalar::zero()),
            Err(CoeffError::DivisionByZero)
        );
        let mixed = &Scalar::one() + &Scalar::r_param(0, 1);
        assert!(matches!(
            Scalar::one().div(&mixed),
            Err(CoeffError::NonInvertible(2))
        ));
    }

    #[test]
    fn conjugate_examples() {
        assert_eq!(Scalar::q().conjugate(), Scalar::q_pow(-1));
        assert_eq!(Scalar::lambda().conjugate(), -&Scalar::lambda());
        let x = &Scalar::r_param(0, 1) * &Scalar::q_pow(2);
        let y = &Scalar::r_param(0, 1).inv().unwrap() * &Scalar::q_pow(-2);
        assert_eq!(x.conjugate(), y);
    }

    #[test]
    fn evaluate_examples() {
        // lambda at s=2 (q=4) -> 4 - 1/4 = 15/4
        let a = ParamAssignment::from_s(2, 1);
        assert_eq!(Scalar::lambda().evaluate(&a).unwrap(), rat(15, 4));
        // 1/(q + q^-1) at s=1 (q=1) -> 1/2
        let d = &Scalar::q() + &Scalar::q_pow(-1);
        let inv = Scalar::one().div(&d).unwrap();
        assert_eq!(inv.evaluate(&ParamAssignment::from_s(1, 1)).unwrap(), rat(1, 2));
        // s at s=3/2 -> 3/2
        assert_eq!(
            Scalar::s_pow(1).evaluate(&ParamAssignment::from_s(3, 2)).unwrap(),
            rat(3, 2)
        );
    }

    #[test]
    fn evaluate_reports_vanishing_denominator() {
        // 1/(q - 1) blows up at s = 1
        let d = &Scalar::q() - &Scalar::one();
        let x = Scalar::one().div(&d).unwrap();
        assert!(matches!(
            x.evaluate(&ParamAssignment::from_s(1, 1)),
            Err(CoeffError::DenominatorVanishes(_))
        ));
    }

    #[test]
    fn missing_r_value_is_reported() {
        let x = Scalar::r_param(0, 1);
        assert_eq!(
            x.evaluate(&ParamAssignment::from_s(2, 1)),
            Err(CoeffError::MissingParameter(0, 1))
        );
        let ok = x
            .evaluate(&ParamAssignment::from_s(2, 1).with_r(0, 1, rat(2, 3)))
            .unwrap();
        assert_eq!(ok, rat(2, 3));
    }

    #[test]
    fn r_pair_inverse_encoding() {
        // r(b,a) is stored as exponent -1 on r(a,b), so r(ab)*r(ba) = 1.
        let ab = Scalar::r_param(0, 1);
        let ba = Scalar::r_param(1, 0);
        assert!((&ab * &ba).is_one());
        // r(a,a) = 1
        assert!(Scalar::r_param(2, 2).is_one());
    }

    #[test]
    fn display_matches_expected_shape() {
        let x = &Scalar::lambda() * &Scalar::r_param(0, 1).inv().unwrap();
        assert_eq!(x.to_string(), "(s^4-1)/s^2 * r(1,2)^-1");
    }

    #[test]
    fn parse_roundtrip_simple() {
        for s in [
            "(s^4-1)/s^2 * r(1,2)^-1",
            "s^2/(s^4+1)",
            "-3",
            "r(1,2)",
            "(2*s^2+1)/(3*s) + (s^4-1)/s^2 * r(2,3)^2",
        ] {
            let v: Scalar = s.parse().unwrap();
            let v2: Scalar = v.to_string().parse().unwrap();
            assert_eq!(v, v2, "roundtrip failed for {s}");
        }
    }

    // ---- randomized structure for property tests ----

    fn arb_frac() -> impl Strategy<Value = Scalar> {
        // small Laurent monomials and binomials in s
        (-3i64..=3, -2i64..=2, 1i64..=3).prop_map(|(k, c, d)| {
            let m = Scalar::s_pow(k);
            let t = &Scalar::rational(c, d) * &m;
            &t + &Scalar::one()
        })
    }

    fn arb_scalar() -> impl Strategy<Value = Scalar> {
        (arb_frac(), arb_frac(), -2i32..=2).prop_map(|(a, b, e)| {
            let mut r = Scalar::one();
            if e != 0 {
                let g = Scalar::r_param(0, 2);
                let g = if e < 0 { g.inv().unwrap() } else { g };
                for _ in 0..e.unsigned_abs() {
                    r = &r * &g;
                }
            }
            &a + &(&b * &r)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn field_laws(a in arb_scalar(), b in arb_scalar(), c in arb_scalar()) {
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&a + &(-&a), Scalar::zero());
            prop_assert_eq!(&a * &Scalar::one(), a.clone());
        }

        #[test]
        fn conjugate_is_involutive(a in arb_scalar()) {
            prop_assert_eq!(a.conjugate().conjugate(), a);
        }

        #[test]
        fn evaluate_is_ring_hom(a in arb_scalar(), b in arb_scalar()) {
            let at = ParamAssignment::from_s(3, 2).with_r(0, 2, rat(5, 7));
            let ea = a.evaluate(&at).unwrap();
            let eb = b.evaluate(&at).unwrap();
            prop_assert_eq!((&a + &b).evaluate(&at).unwrap(), &ea + &eb);
            prop_assert_eq!((&a * &b).evaluate(&at).unwrap(), &ea * &eb);
        }

        #[test]
        fn display_parse_roundtrip(a in arb_scalar()) {
            let parsed: Scalar = a.to_string().parse().unwrap();
            prop_assert_eq!(parsed, a);
        }
    }

    #[test]
    fn zero_and_one_sanity() {
        assert!(Scalar::zero().is_zero());
        assert!(Scalar::one().is_one());
        assert!(Scalar::zero().as_rational().unwrap().is_zero());
        assert!(Scalar::one().as_rational().unwrap().is_one());
        assert_eq!(Scalar::q().as_rational(), None);
    }

    #[test]
    fn scalar_arith_dispatch() {
        let q = Scalar::q();
        let qi = Scalar::q_pow(-1);
        assert!(scalar_arith(&q, &qi, ArithOp::Mul).unwrap().is_one());
        assert_eq!(
            scalar_arith(&q, &(-&qi), ArithOp::Add).unwrap(),
            Scalar::lambda()
        );
        assert!(scalar_arith(&q, &Scalar::zero(), ArithOp::Div).is_err());
    }
}
