//! Moduli algebra and instanton-potential verification: centrality, the
//! Laplacian, the gradient-square identity, harmonicity, the connection's
//! gauge algebra, anti-self-duality, and the twisted trace conditions.

use num::rational::BigRational;
use qtwistor::coeff::Scalar;
use qtwistor::harmonic::*;
use qtwistor::ncalg::{Family, MultiDeg, NcPoly};
use qtwistor::twistor::{inverse_power_coefficient, Mode, TwistorContext};

fn sym_ctx(count: usize) -> TwistorContext {
    moduli_context(Mode::Symbolic, count, true).expect("moduli context")
}

fn num_ctx(count: usize, n: i64, d: i64) -> TwistorContext {
    moduli_context(
        Mode::Numeric(BigRational::new(n.into(), d.into())),
        count,
        true,
    )
    .expect("moduli context")
}

#[test]
fn inverse_power_coefficients_locked() {
    // c1 = q^{-2}, c2 = (1+q^2)/q^4, c3 = q^{-2}+q^{-4}+q^{-6},
    // and the recursion c_{k-1} = q^2 c_k - 1
    assert_eq!(inverse_power_coefficient(1), Scalar::q_pow(-2));
    let c2 = inverse_power_coefficient(2);
    let expect = (&Scalar::one() + &Scalar::q_pow(2))
        .div(&Scalar::q_pow(2))
        .unwrap()
        .div(&Scalar::q_pow(2))
        .unwrap();
    assert_eq!(c2, expect);
    let c3 = inverse_power_coefficient(3);
    let rec = &(&Scalar::q_pow(2) * &c3) - &Scalar::one();
    assert_eq!(rec, c2);
}

#[test]
fn moduli_mixed_dimensions_classical() {
    let ctx = sym_ctx(1);
    // free modulus letters: 6 after the projection constraint;
    // mixed degree (z, b): 8 * 6 = 48
    let mut md = MultiDeg::new();
    md.insert(Family::Z, 1);
    md.insert(Family::B(0), 1);
    assert_eq!(ctx.alg.pbw_dimension(&md).unwrap(), 48);
    let mut md = MultiDeg::new();
    md.insert(Family::B(0), 1);
    assert_eq!(ctx.alg.pbw_dimension(&md).unwrap(), 6);
}

#[test]
fn moduli_parameter_counts() {
    let (free_after_linear, quadric_nontrivial) = moduli_parameter_count(Mode::Symbolic).unwrap();
    assert_eq!(free_after_linear, 6);
    assert!(quadric_nontrivial, "isotropy must cut one more parameter");
}

#[test]
fn centrality_suite() {
    let ctx = sym_ctx(1);
    for check in verify_centrality(&ctx).unwrap() {
        assert!(check.passed(), "failed: {}", check.name);
    }
}

#[test]
fn centrality_two_families() {
    let ctx = sym_ctx(2);
    for check in verify_centrality(&ctx).unwrap() {
        assert!(check.passed(), "failed: {}", check.name);
    }
}

#[test]
fn x_weight_uniform_on_words() {
    // X w = q^{2 * form degree(w)} w X for reduced words in z, dz, b
    let ctx = sym_ctx(1);
    let x = &ctx.moduli.as_ref().unwrap().x_def[0];
    let samples = [
        (ctx.z(0, 1).mul(&ctx.b_mod(0, 2, 3)), 0i64),
        (ctx.dz(1, 0), 1),
        (ctx.dz(0, 2).mul(&ctx.z(1, 1)), 1),
        (ctx.dz(0, 0).mul(&ctx.dz(1, 3)), 2),
    ];
    for (w, fd) in samples {
        let lhs = x.mul(&w);
        let rhs = w.mul(x).scale(&Scalar::q_pow(2 * fd));
        let resid = lhs.sub(&rhs);
        assert!(ctx.alg.is_zero(&resid).unwrap(), "weight failed at form degree {fd}");
    }
}

#[test]
fn laplacian_of_y_is_projector() {
    let ctx = sym_ctx(1);
    for c in 0..4 {
        for d in 0..4 {
            let y = ctx.y(c, d).unwrap();
            let lap = laplacian(&ctx, &y).unwrap();
            for bb in 0..4 {
                for a in 0..4 {
                    let expect = ctx.p4_minus.get(&[bb, a, d, c]);
                    let got = &lap[bb][a];
                    let resid = got.sub(&NcPoly::constant(expect));
                    assert!(
                        ctx.alg.is_zero(&resid).unwrap(),
                        "Laplacian of y mismatch at ({bb},{a};{c},{d})"
                    );
                }
            }
        }
    }
}

#[test]
fn laplacian_linear_and_zero_on_constants() {
    let ctx = sym_ctx(1);
    let lap = laplacian(&ctx, &NcPoly::one()).unwrap();
    assert!(lap.iter().flatten().all(NcPoly::is_zero));
    let y = ctx.y(0, 1).unwrap();
    let lap1 = laplacian(&ctx, &y).unwrap();
    let lap2 = laplacian(&ctx, &y.scale(&Scalar::lambda())).unwrap();
    for bb in 0..4 {
        for a in 0..4 {
            assert_eq!(lap2[bb][a], ctx.alg.normal_form(&lap1[bb][a].scale(&Scalar::lambda())).unwrap());
        }
    }
}

#[test]
fn gradient_identity_symbolic() {
    let ctx = sym_ctx(1);
    for check in verify_gradient_identity(&ctx).unwrap() {
        assert!(check.passed(), "failed: {}", check.name);
    }
}

#[test]
fn gradient_identity_numeric_samples() {
    for (n, d) in [(3, 2), (5, 3), (7, 4)] {
        let ctx = num_ctx(1, n, d);
        for check in verify_gradient_identity(&ctx).unwrap() {
            assert!(check.passed(), "failed at s={n}/{d}: {}", check.name);
        }
    }
}

#[test]
fn gradient_identity_breaks_without_isotropy() {
    let ctx = moduli_context(Mode::Symbolic, 1, false).unwrap();
    let checks = verify_gradient_identity(&ctx).unwrap();
    assert!(
        checks.iter().any(|c| !c.passed()),
        "dropping isotropy must break the gradient identity"
    );
}

#[test]
fn harmonicity_symbolic() {
    let ctx = sym_ctx(1);
    for check in verify_harmonic(&ctx).unwrap() {
        assert!(check.passed(), "failed: {}", check.name);
    }
}

#[test]
fn harmonicity_breaks_without_isotropy() {
    let ctx = moduli_context(Mode::Symbolic, 1, false).unwrap();
    let checks = verify_harmonic(&ctx).unwrap();
    assert!(checks.iter().any(|c| !c.passed()));
}

#[test]
fn y_b_exchange_is_derived() {
    let ctx = sym_ctx(1);
    let check = verify_y_b_exchange(&ctx).unwrap();
    assert!(check.passed(), "residual terms: {}", check.residual_terms);
}

#[test]
fn x_dz_weight_is_derived() {
    // with X expanded, X dz - q^2 dz X reduces to zero
    let ctx = sym_ctx(1);
    let x = &ctx.moduli.as_ref().unwrap().x_def[0];
    for al in 0..2 {
        for a in 0..4 {
            let dz = ctx.dz(al, a);
            let resid = x.mul(&dz).sub(&dz.mul(x).scale(&Scalar::q_pow(2)));
            assert!(ctx.alg.is_zero(&resid).unwrap());
        }
    }
}

#[test]
fn clearing_roundtrip() {
    let ctx = sym_ctx(1);
    // X^{-1} X - 1 clears to zero
    let p = ctx.x_inv(0, 1).mul(&ctx.moduli.as_ref().unwrap().x_def[0]).sub(&NcPoly::one());
    assert!(is_zero_cleared(&ctx, &p).unwrap());
    // X^{-1} alone does not clear to zero
    assert!(!is_zero_cleared(&ctx, &ctx.x_inv(0, 1)).unwrap());
}

#[test]
fn thooft_selfdual_p1_symbolic() {
    let ctx = sym_ctx(1);
    for check in verify_thooft_selfdual(&ctx).unwrap() {
        assert!(check.passed(), "failed: {} ({})", check.name, check.residual_terms);
    }
}

#[test]
fn thooft_gauge_algebra_p1() {
    let ctx = sym_ctx(1);
    let check = verify_thooft_gauge_algebra(&ctx).unwrap();
    assert!(check.passed(), "residual terms: {}", check.residual_terms);
}

#[test]
fn thooft_gauge_algebra_p1_numeric() {
    let ctx = num_ctx(1, 3, 2);
    let check = verify_thooft_gauge_algebra(&ctx).unwrap();
    assert!(check.passed());
}

#[test]
fn trace_conditions_p1() {
    let ctx = sym_ctx(1);
    for check in verify_trace_conditions(&ctx).unwrap() {
        assert!(check.passed(), "failed: {}", check.name);
    }
}

#[test]
fn qtrace_metric_shape() {
    // the derived metric is diagonal with ratio q^2
    let ctx = sym_ctx(1);
    let sol = build_thooft(&ctx).unwrap();
    let d = derive_qtrace_metric(&ctx, &sol).unwrap();
    assert!(d[0][1].is_zero());
    assert!(d[1][0].is_zero());
    assert!(!d[0][0].is_zero());
    let ratio = d[1][1].div(&d[0][0]).unwrap();
    assert_eq!(ratio, Scalar::q_pow(2));
}

#[test]
fn thooft_selfdual_p1_q_one() {
    let ctx = num_ctx(1, 1, 1);
    for check in verify_thooft_selfdual(&ctx).unwrap() {
        assert!(check.passed(), "failed: {}", check.name);
    }
}
