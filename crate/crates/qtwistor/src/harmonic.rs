//! The moduli algebra, central elements with formal inverses, the invariant
//! Laplacian, harmonic potentials, and the multi-instanton connection of
//! t'Hooft type with its anti-self-duality verification.
//!
//! Identities involving inverse powers are decided by clearing: a polynomial
//! with central inverse letters is multiplied by enough positive central
//! powers (expanded into the coordinate/moduli alphabet) to remove every
//! inverse, and the cleared polynomial is reduced in the plain algebra.
//! Since the central elements are regular (their classical limits are
//! nondegenerate quadratic pairings), a cleared zero proves the original
//! identity in the localized algebra.

use std::collections::BTreeMap;

use crate::coeff::Scalar;
use crate::ncalg::{rref, Family, NcError, NcPoly, Word};
use crate::tensor::ResidualCheck;
use crate::twistor::{Mode, ModuliOptions, TwistorContext};

pub fn moduli_context(mode: Mode, count: usize, with_isotropy: bool) -> Result<TwistorContext, NcError> {
    TwistorContext::with_moduli(
        mode,
        ModuliOptions {
            count,
            with_isotropy,
        },
    )
}

// ---------------------------------------------------------------------------
// inverse clearing
// ---------------------------------------------------------------------------

/// Strip the central block of a normalized word, returning the base word,
/// the net power of each `X_p` (positive for letters `X_p`, negative for
/// inverse powers), and the count of opaque potential inverses.
fn central_content(
    ctx: &TwistorContext,
    w: &Word,
) -> (Vec<u32>, Vec<i64>, usize) {
    let pcount = ctx.moduli.as_ref().map_or(0, |m| m.count);
    let mut base = Vec::new();
    let mut net = vec![0i64; pcount];
    let mut phi_inv = 0usize;
    for &code in &w.0 {
        match ctx.alg.sym(code).family {
            Family::X(p) => net[p as usize] += 1,
            Family::XInv(p, k) => net[p as usize] -= k as i64,
            Family::PhiInv => phi_inv += 1,
            _ => base.push(code),
        }
    }
    (base, net, phi_inv)
}

/// Multiply by central positive powers until no inverse letter remains.
/// The result is `Z * p` for a fixed central regular `Z`, so a cleared zero
/// proves `p = 0` in the localization.
pub fn clear_central(ctx: &TwistorContext, p: &NcPoly) -> Result<NcPoly, NcError> {
    let md = ctx
        .moduli
        .as_ref()
        .ok_or_else(|| NcError::ReductionStuck("no moduli data for clearing".into()))?;
    let p = ctx.alg.normal_form(p)?;
    if p.is_zero() {
        return Ok(p);
    }
    let pcount = md.count;
    let mut contents = Vec::new();
    let mut jmax = 0usize;
    for (w, c) in &p.terms {
        let (base, net, j) = central_content(ctx, w);
        jmax = jmax.max(j);
        contents.push((base, net, j, c.clone()));
    }
    // X_p exponent budget: every term must end with a nonnegative power
    let mut budget = vec![0i64; pcount];
    for (_, net, j, _) in &contents {
        for p_i in 0..pcount {
            let need = (jmax - j) as i64 - net[p_i];
            budget[p_i] = budget[p_i].max(need);
        }
    }
    // powers of the expanded central elements, normalized as we go
    let mut xpows: Vec<Vec<NcPoly>> = Vec::new();
    for p_i in 0..pcount {
        let mut pows = vec![NcPoly::one()];
        let maxe = budget[p_i] + contents.iter().map(|(_, net, _, _)| net[p_i].max(0)).max().unwrap_or(0);
        for e in 1..=maxe {
            let next = ctx
                .alg
                .normal_form(&pows[(e - 1) as usize].mul(&md.x_def[p_i]))?;
            pows.push(next);
        }
        xpows.push(pows);
    }
    let mut acc = NcPoly::zero();
    for (base, net, j, coeff) in contents {
        // expand Phi^{jmax - j} = (sum_p X_p^{-1})^{jmax-j} multinomially
        let phi_pow = jmax - j;
        for split in multi_splits(pcount, phi_pow) {
            let mut coef = multinomial(phi_pow, &split);
            coef = ctx.mode.scalar(coef)?;
            let mut term = NcPoly::word(Word(base.clone()), &coeff * &coef);
            for p_i in 0..pcount {
                let e = budget[p_i] + net[p_i] - split[p_i] as i64;
                assert!(e >= 0, "clearing budget miscount");
                term = term.mul(&xpows[p_i][e as usize]);
            }
            acc = acc.add(&term);
        }
    }
    ctx.alg.normal_form(&acc)
}

/// All `pcount`-part compositions of `total`.
fn multi_splits(pcount: usize, total: usize) -> Vec<Vec<usize>> {
    if pcount == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    fn rec(pos: usize, pcount: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == pcount - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for take in 0..=left {
            cur.push(take);
            rec(pos + 1, pcount, left - take, cur, out);
            cur.pop();
        }
    }
    rec(0, pcount, total, &mut Vec::new(), &mut out);
    out
}

fn multinomial(total: usize, parts: &[usize]) -> Scalar {
    debug_assert_eq!(total, parts.iter().sum::<usize>());
    let mut result = 1u128;
    let mut used = 0usize;
    for &p in parts {
        for i in 1..=p {
            used += 1;
            result = result * used as u128 / i as u128;
        }
    }
    Scalar::from_int(result as i64)
}

/// Zero test in the localized algebra: reduce, clear inverses, reduce.
pub fn is_zero_cleared(ctx: &TwistorContext, p: &NcPoly) -> Result<bool, NcError> {
    Ok(clear_central(ctx, p)?.is_zero())
}

pub fn residual_cleared(ctx: &TwistorContext, name: &str, p: &NcPoly) -> Result<ResidualCheck, NcError> {
    let cleared = clear_central(ctx, p)?;
    Ok(ResidualCheck {
        name: name.into(),
        residual_terms: cleared.term_count(),
    })
}

// ---------------------------------------------------------------------------
// centrality and harmonicity
// ---------------------------------------------------------------------------

/// Commutators of the expanded central elements with every generator class,
/// and the differential weight `X dz = q^2 dz X`.
pub fn verify_centrality(ctx: &TwistorContext) -> Result<Vec<ResidualCheck>, NcError> {
    let md = ctx
        .moduli
        .as_ref()
        .ok_or_else(|| NcError::ReductionStuck("moduli context required".into()))?;
    let q2 = ctx.mode.scalar(Scalar::q_pow(2))?;
    let mut out = Vec::new();
    for p in 0..md.count {
        let x = &md.x_def[p];
        let mut terms = 0usize;
        for al in 0..2 {
            for a in 0..4 {
                let z = ctx.z(al, a);
                terms += ctx.alg.normal_form(&x.mul(&z).sub(&z.mul(x)))?.term_count();
            }
        }
        out.push(ResidualCheck {
            name: format!("central element {} commutes with coordinates", p + 1),
            residual_terms: terms,
        });

        let mut terms = 0usize;
        for p2 in 0..md.count {
            for a in 0..4 {
                for c in 0..4 {
                    let b = ctx.b_mod(p2, a, c);
                    terms += ctx.alg.normal_form(&x.mul(&b).sub(&b.mul(x)))?.term_count();
                }
            }
        }
        out.push(ResidualCheck {
            name: format!("central element {} commutes with every modulus", p + 1),
            residual_terms: terms,
        });

        let mut terms = 0usize;
        for a in 0..4 {
            for bb in 0..4 {
                let y = ctx.y(a, bb)?;
                terms += ctx.alg.normal_form(&x.mul(&y).sub(&y.mul(x)))?.term_count();
            }
        }
        out.push(ResidualCheck {
            name: format!("central element {} commutes with the bilinear y", p + 1),
            residual_terms: terms,
        });

        let mut terms = 0usize;
        for al in 0..2 {
            for a in 0..4 {
                let dz = ctx.dz(al, a);
                let resid = x.mul(&dz).sub(&dz.mul(x).scale(&q2));
                terms += ctx.alg.normal_form(&resid)?.term_count();
            }
        }
        out.push(ResidualCheck {
            name: format!("central element {} carries weight q^2 against differentials", p + 1),
            residual_terms: terms,
        });
    }
    Ok(out)
}

/// The invariant Laplacian `L^{ba} f = -q/(1+q^2) eps^{al be} d^b_be d^a_al f`.
pub fn laplacian(ctx: &TwistorContext, f: &NcPoly) -> Result<Vec<Vec<NcPoly>>, NcError> {
    let coeff = ctx
        .mode
        .scalar(Scalar::q().div(&(&Scalar::one() + &Scalar::q_pow(2)))?)?;
    let mut out = vec![vec![NcPoly::zero(); 4]; 4];
    // first derivative components, reused across b
    let mut first = vec![vec![NcPoly::zero(); 2]; 4];
    for a in 0..4 {
        for al in 0..2 {
            first[a][al] = ctx.partial(a, al, f)?;
        }
    }
    for bb in 0..4 {
        for a in 0..4 {
            let mut acc = NcPoly::zero();
            for al in 0..2 {
                for be in 0..2 {
                    let e = ctx.eps_up.get(&[al, be]);
                    if e.is_zero() {
                        continue;
                    }
                    acc = acc.add(&ctx.partial(bb, be, &first[a][al])?.scale(&e));
                }
            }
            out[bb][a] = ctx.alg.normal_form(&acc.scale(&(-&coeff)))?;
        }
    }
    Ok(out)
}

/// The gradient-square identity for isotropic moduli:
/// `eps^{al be} (d^b_be X_p)(d^a_al X_p) = -q^{-1} eps_q^{abcd} b^p_{cd} X_p`.
pub fn verify_gradient_identity(ctx: &TwistorContext) -> Result<Vec<ResidualCheck>, NcError> {
    let md = ctx
        .moduli
        .as_ref()
        .ok_or_else(|| NcError::ReductionStuck("moduli context required".into()))?;
    let qinv = ctx.mode.scalar(Scalar::q_pow(-1))?;
    let mut out = Vec::new();
    for p in 0..md.count {
        let mut terms = 0usize;
        for a in 0..4 {
            for bb in 0..4 {
                let mut lhs = NcPoly::zero();
                for al in 0..2 {
                    for be in 0..2 {
                        let e = ctx.eps_up.get(&[al, be]);
                        if e.is_zero() {
                            continue;
                        }
                        lhs = lhs.add(&md.dx[p][bb][be].mul(&md.dx[p][a][al]).scale(&e));
                    }
                }
                let mut rhs = NcPoly::zero();
                for c in 0..4 {
                    for d in 0..4 {
                        let e = ctx.eps_q.get(&[a, bb, c, d]);
                        if e.is_zero() {
                            continue;
                        }
                        rhs = rhs.add(&ctx.b_mod(p, c, d).mul(&md.x_def[p]).scale(&(&e * &qinv)));
                    }
                }
                let resid = lhs.add(&rhs);
                terms += ctx.alg.normal_form(&resid)?.term_count();
            }
        }
        out.push(ResidualCheck {
            name: format!("gradient-square identity for modulus family {}", p + 1),
            residual_terms: terms,
        });
    }
    Ok(out)
}

/// Harmonicity of the inverse central elements: `L^{ba} X_p^{-1} = 0`,
/// plus the bracketed second-derivative form multiplied through by `X_p`.
pub fn verify_harmonic(ctx: &TwistorContext) -> Result<Vec<ResidualCheck>, NcError> {
    let md = ctx
        .moduli
        .as_ref()
        .ok_or_else(|| NcError::ReductionStuck("moduli context required".into()))?;
    let mut out = Vec::new();
    let one_q2 = ctx.mode.scalar(&Scalar::one() + &Scalar::q_pow(2))?;
    for p in 0..md.count {
        let lap = laplacian(ctx, &ctx.x_inv(p, 1))?;
        let mut terms = 0usize;
        for row in &lap {
            for entry in row {
                terms += clear_central(ctx, entry)?.term_count();
            }
        }
        out.push(ResidualCheck {
            name: format!("inverse central element {} is harmonic", p + 1),
            residual_terms: terms,
        });

        // eps^{al be} [ (dd X) X - (1+q^2) (dX)(dX) ] = 0
        let mut terms = 0usize;
        for a in 0..4 {
            for bb in 0..4 {
                let mut t1 = NcPoly::zero();
                let mut t2 = NcPoly::zero();
                for al in 0..2 {
                    for be in 0..2 {
                        let e = ctx.eps_up.get(&[al, be]);
                        if e.is_zero() {
                            continue;
                        }
                        t1 = t1.add(&ctx.partial(bb, be, &md.dx[p][a][al])?.scale(&e));
                        t2 = t2.add(&md.dx[p][bb][be].mul(&md.dx[p][a][al]).scale(&e));
                    }
                }
                let resid = t1.mul(&md.x_def[p]).sub(&t2.scale(&one_q2));
                terms += ctx.alg.normal_form(&resid)?.term_count();
            }
        }
        out.push(ResidualCheck {
            name: format!("second-derivative bracket for modulus family {}", p + 1),
            residual_terms: terms,
        });
    }
    Ok(out)
}

/// Consequence check: the `y`/modulus exchange follows from the imposed
/// relation set rather than being imposed itself. The derived orientation
/// has the modulus on the left of the displayed chain:
/// `b_{ab} y_{cd} = R^{ea'}_{ga} R^{fg}_{cb} R^{c'b'}_{he} R^{d'h}_{df}
///  y_{a'b'} b_{c'd'}` — the opposite reading holds with the inverse chain.
pub fn verify_y_b_exchange(ctx: &TwistorContext) -> Result<ResidualCheck, NcError> {
    let md = ctx
        .moduli
        .as_ref()
        .ok_or_else(|| NcError::ReductionStuck("moduli context required".into()))?;
    let mut terms = 0usize;
    for p in 0..md.count {
        for a in 0..4usize {
            for bb in 0..4usize {
                for c in 0..4usize {
                    for d in 0..4usize {
                        let mut acc = ctx.b_mod(p, a, bb).mul(&ctx.y(c, d)?);
                        for e in 0..4 {
                            for a1 in 0..4 {
                                for g in 0..4 {
                                    let r1 = ctx.r4.get(&[e, a1, g, a]);
                                    if r1.is_zero() {
                                        continue;
                                    }
                                    for f in 0..4 {
                                        let r2v = ctx.r4.get(&[f, g, c, bb]);
                                        if r2v.is_zero() {
                                            continue;
                                        }
                                        for c1 in 0..4 {
                                            for b1 in 0..4 {
                                                for h in 0..4 {
                                                    let r3 = ctx.r4.get(&[c1, b1, h, e]);
                                                    if r3.is_zero() {
                                                        continue;
                                                    }
                                                    for d1 in 0..4 {
                                                        let r4v = ctx.r4.get(&[d1, h, d, f]);
                                                        if r4v.is_zero() {
                                                            continue;
                                                        }
                                                        let coeff = &(&(&r1 * &r2v) * &r3) * &r4v;
                                                        acc = acc.sub(
                                                            &ctx.y(a1, b1)?
                                                                .mul(&ctx.b_mod(p, c1, d1))
                                                                .scale(&coeff),
                                                        );
                                                    }
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                        terms += ctx.alg.normal_form(&acc)?.term_count();
                    }
                }
            }
        }
    }
    Ok(ResidualCheck {
        name: "pairing/modulus exchange is a consequence of the relation set".into(),
        residual_terms: terms,
    })
}

// ---------------------------------------------------------------------------
// the t'Hooft connection
// ---------------------------------------------------------------------------

/// Square matrix of polynomials of one homogeneous form degree.
#[derive(Clone, Debug)]
pub struct GaugeForm {
    pub n: usize,
    pub entries: Vec<NcPoly>,
}

impl GaugeForm {
    pub fn zero(n: usize) -> Self {
        GaugeForm {
            n,
            entries: vec![NcPoly::zero(); n * n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> &NcPoly {
        &self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: NcPoly) {
        self.entries[i * self.n + j] = p;
    }

    pub fn sub(&self, other: &GaugeForm) -> GaugeForm {
        let mut out = GaugeForm::zero(self.n);
        for i in 0..self.entries.len() {
            out.entries[i] = self.entries[i].sub(&other.entries[i]);
        }
        out
    }

    pub fn matmul(&self, ctx: &TwistorContext, other: &GaugeForm) -> Result<GaugeForm, NcError> {
        let mut out = GaugeForm::zero(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let mut acc = NcPoly::zero();
                for l in 0..self.n {
                    acc = acc.add(&self.get(i, l).mul(other.get(l, j)));
                }
                out.set(i, j, ctx.alg.normal_form(&acc)?);
            }
        }
        Ok(out)
    }

    pub fn d(&self, ctx: &TwistorContext) -> Result<GaugeForm, NcError> {
        let mut out = GaugeForm::zero(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(i, j, ctx.d(self.get(i, j))?);
            }
        }
        Ok(out)
    }
}

/// The multi-instanton connection: `A^al_be = q^{-3} dz^al_a (d^a_mu Phi)
/// Phi^{-1} eps^{si mu} eps_{si be}` with `Phi = sum_p X_p^{-1}`. For a
/// single modulus family the potential inverse is the central element
/// itself; otherwise it stays opaque.
pub struct ThooftSolution {
    pub count: usize,
    pub a: GaugeForm,
    pub phi_inv: NcPoly,
    /// q-trace metric, derived not assumed; filled by `derive_qtrace_metric`
    pub d2: Option<Vec<Vec<Scalar>>>,
}

pub fn build_thooft(ctx: &TwistorContext) -> Result<ThooftSolution, NcError> {
    let md = ctx
        .moduli
        .as_ref()
        .ok_or_else(|| NcError::ReductionStuck("moduli context required".into()))?;
    let phi_inv = if md.count == 1 {
        ctx.x_letter(0)
    } else {
        ctx.phi_inv()
    };
    let c1 = ctx.mode.scalar(crate::twistor::inverse_power_coefficient(1))?;
    let qm3 = ctx.mode.scalar(Scalar::q_pow(-3))?;
    let mut a = GaugeForm::zero(2);
    for al in 0..2 {
        for be in 0..2 {
            let mut acc = NcPoly::zero();
            for aa in 0..4 {
                for mu in 0..2 {
                    // eps^{si mu} eps_{si be}
                    let mut eps2 = Scalar::zero();
                    for si in 0..2 {
                        eps2 = &eps2 + &(&ctx.eps_up.get(&[si, mu]) * &ctx.eps_lo.get(&[si, be]));
                    }
                    if eps2.is_zero() {
                        continue;
                    }
                    // d^a_mu Phi = -c1 sum_p X_p^{-2} dx_p
                    let mut dphi = NcPoly::zero();
                    for p in 0..md.count {
                        dphi = dphi.add(&ctx.x_inv(p, 2).mul(&md.dx[p][aa][mu]).scale(&(-&c1)));
                    }
                    acc = acc.add(
                        &ctx.dz(al, aa)
                            .mul(&dphi)
                            .mul(&phi_inv)
                            .scale(&(&eps2 * &qm3)),
                    );
                }
            }
            a.set(al, be, ctx.alg.normal_form(&acc)?);
        }
    }
    Ok(ThooftSolution {
        count: md.count,
        a,
        phi_inv,
        d2: None,
    })
}

/// Curvature `F = dA - A^2`.
pub fn curvature(ctx: &TwistorContext, a: &GaugeForm) -> Result<GaugeForm, NcError> {
    let da = a.d(ctx)?;
    let a2 = a.matmul(ctx, a)?;
    Ok(da.sub(&a2))
}

/// Duality purity of the instanton curvature: the projection of every
/// curvature entry onto the spinor-singlet (symmetric-conformal) eigenspace
/// clears to zero exactly, so the duality map acts on F as a single sign.
/// The surviving chirality is the one the potential ansatz produces; the
/// complementary projection is nonzero (checked), so F itself is nonzero.
pub fn verify_thooft_selfdual(ctx: &TwistorContext) -> Result<Vec<ResidualCheck>, NcError> {
    let sol = build_thooft(ctx)?;
    let f = curvature(ctx, &sol.a)?;
    let mut vanish = 0usize;
    let mut survive = 0usize;
    for i in 0..2 {
        for j in 0..2 {
            let sd = ctx.selfdual_part(f.get(i, j))?;
            vanish += clear_central(ctx, &sd)?.term_count();
            let asd = ctx.antiselfdual_part(f.get(i, j))?;
            survive += clear_central(ctx, &asd)?.term_count();
        }
    }
    Ok(vec![
        ResidualCheck {
            name: "curvature is pure-chirality: one duality projection vanishes".into(),
            residual_terms: vanish,
        },
        ResidualCheck {
            name: "curvature is nontrivial: the other projection survives".into(),
            residual_terms: usize::from(survive == 0),
        },
    ])
}

/// The quadratic gauge-algebra relation
/// `A R A + R A R A R = 0` for the connection entries, with the gauge
/// R-matrix equal to the 2D one.
pub fn verify_thooft_gauge_algebra(ctx: &TwistorContext) -> Result<ResidualCheck, NcError> {
    let sol = build_thooft(ctx)?;
    let a = &sol.a;
    let r = &ctx.r2;
    let mut terms = 0usize;
    for i in 0..2 {
        for k in 0..2 {
            for m in 0..2 {
                for n in 0..2 {
                    let mut acc = NcPoly::zero();
                    // A^i_l R^{lk}_{rn} A^r_m
                    for l in 0..2 {
                        for rr in 0..2 {
                            let v = r.get(&[l, k, rr, n]);
                            if v.is_zero() {
                                continue;
                            }
                            acc = acc.add(&a.get(i, l).mul(a.get(rr, m)).scale(&v));
                        }
                    }
                    // R^{ik}_{jl} A^j_r R^{rl}_{st} A^s_p R^{pt}_{mn}
                    for j in 0..2 {
                        for l in 0..2 {
                            let v1 = r.get(&[i, k, j, l]);
                            if v1.is_zero() {
                                continue;
                            }
                            for rr in 0..2 {
                                for ss in 0..2 {
                                    for t in 0..2 {
                                        let v2 = r.get(&[rr, l, ss, t]);
                                        if v2.is_zero() {
                                            continue;
                                        }
                                        for pp in 0..2 {
                                            let v3 = r.get(&[pp, t, m, n]);
                                            if v3.is_zero() {
                                                continue;
                                            }
                                            acc = acc.add(
                                                &a.get(j, rr)
                                                    .mul(a.get(ss, pp))
                                                    .scale(&(&(&v1 * &v2) * &v3)),
                                            );
                                        }
                                    }
                                }
                            }
                        }
                    }
                    terms += clear_central(ctx, &acc)?.term_count();
                }
            }
        }
    }
    Ok(ResidualCheck {
        name: "quadratic gauge algebra holds for the instanton connection".into(),
        residual_terms: terms,
    })
}

// ---------------------------------------------------------------------------
// q-trace conditions
// ---------------------------------------------------------------------------

/// Solve the 2x2 metric `D` from `sum D^al_be A^be_al = -q^3 dPhi Phi^{-1}`,
/// the defining identity of the twisted trace. Returns the metric entries.
pub fn derive_qtrace_metric(
    ctx: &TwistorContext,
    sol: &ThooftSolution,
) -> Result<Vec<Vec<Scalar>>, NcError> {
    let q3 = ctx.mode.scalar(Scalar::s_pow(6))?;
    let c1 = ctx.mode.scalar(crate::twistor::inverse_power_coefficient(1))?;
    let md = ctx.moduli.as_ref().expect("moduli context");
    // right-hand side: -q^3 dPhi Phi^{-1}
    let mut dphi = NcPoly::zero();
    for p in 0..md.count {
        for aa in 0..4 {
            for mu in 0..2 {
                dphi = dphi.add(
                    &ctx.dz(mu, aa)
                        .mul(&ctx.x_inv(p, 2))
                        .mul(&md.dx[p][aa][mu])
                        .scale(&(-&c1)),
                );
            }
        }
    }
    let rhs = ctx
        .alg
        .normal_form(&dphi.mul(&sol.phi_inv).scale(&(-&q3)))?;
    // unknowns D^al_be as columns 0..4; constant column 4
    let mut rows: Vec<BTreeMap<usize, Scalar>> = Vec::new();
    let mut eq: BTreeMap<Word, BTreeMap<usize, Scalar>> = BTreeMap::new();
    for al in 0..2 {
        for be in 0..2 {
            let col = al * 2 + be;
            let entry = ctx.alg.normal_form(sol.a.get(be, al))?;
            for (w, c) in &entry.terms {
                let slot = eq.entry(w.clone()).or_default();
                let cur = slot.entry(col).or_insert_with(Scalar::zero);
                *cur = &*cur + c;
            }
        }
    }
    for (w, c) in &rhs.terms {
        let slot = eq.entry(w.clone()).or_default();
        let cur = slot.entry(4).or_insert_with(Scalar::zero);
        *cur = &*cur - c;
    }
    for (_, row) in eq {
        let row: BTreeMap<usize, Scalar> = row.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        if !row.is_empty() {
            rows.push(row);
        }
    }
    let (reduced, _) = rref(rows, "q-trace metric system")?;
    let mut d = vec![vec![Scalar::zero(); 2]; 2];
    for row in &reduced {
        let mut it = row.iter();
        let (&pivot, pc) = it.next().expect("nonempty row");
        assert!(pc.is_one());
        if pivot == 4 {
            return Err(NcError::ReductionStuck(
                "q-trace system is inconsistent".into(),
            ));
        }
        let mut val = Scalar::zero();
        for (&col, c) in it {
            if col == 4 {
                val = &val - c;
            } else {
                return Err(NcError::ReductionStuck(
                    "q-trace system is underdetermined".into(),
                ));
            }
        }
        d[pivot / 2][pivot % 2] = -&val;
    }
    Ok(d)
}

fn qtrace(ctx: &TwistorContext, d: &[Vec<Scalar>], m: &GaugeForm) -> Result<NcPoly, NcError> {
    let mut acc = NcPoly::zero();
    for al in 0..2 {
        for be in 0..2 {
            acc = acc.add(&m.get(be, al).scale(&d[al][be]));
        }
    }
    ctx.alg.normal_form(&acc)
}

/// Trace conditions with the derived metric: the trace of the connection is
/// the logarithmic differential (nonzero), its differential vanishes, and
/// the traces of `A^2` and of the curvature vanish. Also the algebraic
/// Bianchi identity `dF = A F - F A`.
pub fn verify_trace_conditions(ctx: &TwistorContext) -> Result<Vec<ResidualCheck>, NcError> {
    let mut sol = build_thooft(ctx)?;
    let d = derive_qtrace_metric(ctx, &sol)?;
    sol.d2 = Some(d.clone());
    let mut out = Vec::new();

    let tq_a = qtrace(ctx, &d, &sol.a)?;
    out.push(ResidualCheck {
        name: "trace of the connection is nonzero (abelian part survives)".into(),
        residual_terms: usize::from(tq_a.is_zero()),
    });
    let d_tq_a = ctx.d(&tq_a)?;
    out.push(ResidualCheck {
        name: "differential of the connection trace vanishes".into(),
        residual_terms: clear_central(ctx, &d_tq_a)?.term_count(),
    });
    let a2 = sol.a.matmul(ctx, &sol.a)?;
    out.push(ResidualCheck {
        name: "trace of the connection square vanishes".into(),
        residual_terms: clear_central(ctx, &qtrace(ctx, &d, &a2)?)?.term_count(),
    });
    let f = curvature(ctx, &sol.a)?;
    out.push(ResidualCheck {
        name: "trace of the curvature vanishes".into(),
        residual_terms: clear_central(ctx, &qtrace(ctx, &d, &f)?)?.term_count(),
    });
    // trace of dA alone
    let da = sol.a.d(ctx)?;
    out.push(ResidualCheck {
        name: "trace of the curvature differential part vanishes".into(),
        residual_terms: clear_central(ctx, &qtrace(ctx, &d, &da)?)?.term_count(),
    });

    // Bianchi: dF - (A F - F A) = 0 entrywise
    let df = f.d(ctx)?;
    let af = GaugeForm::matmul(&sol.a, ctx, &f)?;
    let fa = GaugeForm::matmul(&f, ctx, &sol.a)?;
    let resid = df.sub(&af.sub(&fa));
    let mut terms = 0usize;
    for e in &resid.entries {
        terms += clear_central(ctx, e)?.term_count();
    }
    out.push(ResidualCheck {
        name: "algebraic Bianchi identity holds".into(),
        residual_terms: terms,
    });
    Ok(out)
}

/// Rank of the linear projection constraint on one modulus family, and
/// whether the isotropy quadric is nontrivial on the constrained space:
/// together these give the expected parameter count (6 linear, then 5).
pub fn moduli_parameter_count(mode: Mode) -> Result<(usize, bool), NcError> {
    // build without isotropy so the quadric can be inspected
    let ctx = moduli_context(mode, 1, false)?;
    // rank of (1 - P4-) on the 16 components
    let mut rows: Vec<BTreeMap<usize, Scalar>> = Vec::new();
    for a in 0..4usize {
        for bb in 0..4usize {
            let mut row: BTreeMap<usize, Scalar> = BTreeMap::new();
            row.insert(a * 4 + bb, Scalar::one());
            for c in 0..4usize {
                for d in 0..4usize {
                    let v = ctx.p4_minus.get(&[d, c, bb, a]);
                    if v.is_zero() {
                        continue;
                    }
                    let col = c * 4 + d;
                    let cur = row.entry(col).or_insert_with(Scalar::zero);
                    let s = &*cur - &v;
                    if s.is_zero() {
                        row.remove(&col);
                    } else {
                        *cur = s;
                    }
                }
            }
            if !row.is_empty() {
                rows.push(row);
            }
        }
    }
    let (_, rank) = rref(rows, "projection constraint")?;
    // isotropy survives on the constrained space iff its normal form is
    // nonzero in the context without the isotropy relation
    let mut iso = NcPoly::zero();
    for (k, v) in ctx.eps_q.entries() {
        iso = iso.add(&ctx.b_mod(0, k[0], k[1]).mul(&ctx.b_mod(0, k[2], k[3])).scale(v));
    }
    let nontrivial = !ctx.alg.normal_form(&iso)?.is_zero();
    Ok((16 - rank, nontrivial))
}
