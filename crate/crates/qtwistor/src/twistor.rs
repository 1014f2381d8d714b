//! The q-twistor differential calculus: coordinates `z^alpha_a`, their
//! differentials, partial derivatives, the invariant bilinear `y`, the
//! duality map on 2-forms, and the reality-structure checks at word level.
//!
//! The partial derivative is an operator, not a context generator: it is
//! commuted to the right through a word letter by letter and annihilates the
//! empty word. Central letters (the moduli pairings `X_p`, their formal
//! inverse powers, and the opaque potential inverse) have derived
//! pass-through rules fixed by requiring consistency with the inverse-pair
//! collapses; the coefficients `c_k` in `d(X^{-k}) = -c_k X^{-k-1} dX`
//! satisfy `c_{k-1} = q^2 c_k - 1` with `c_1 = q^{-2}`.

use num::rational::BigRational;

use crate::coeff::Scalar;
use crate::ncalg::{AlgebraContext, ContextBuilder, Family, GenSym, MultiDeg, NcError, NcPoly, Word};
use crate::tensor::{
    build_epsilon_q, build_glq_rmatrix, build_slq2_rmatrix, epsilon2_lower, epsilon2_upper,
    projectors, RParams, ResidualCheck, Tensor,
};

/// Symbolic `q` or an exact rational specialization of `s`.
#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    Symbolic,
    Numeric(BigRational),
}

impl Mode {
    fn specialize(&self, t: Tensor) -> Result<Tensor, NcError> {
        match self {
            Mode::Symbolic => Ok(t),
            Mode::Numeric(s) => Ok(t.eval_s(s)?),
        }
    }

    pub fn scalar(&self, x: Scalar) -> Result<Scalar, NcError> {
        match self {
            Mode::Symbolic => Ok(x),
            Mode::Numeric(s) => Ok(x.eval_s(s)?),
        }
    }
}

/// Moduli extension data: expanded central elements and their derivatives.
pub struct ModuliData {
    /// number of moduli families
    pub count: usize,
    /// whether the isotropy constraint was imposed (negative controls drop it)
    pub with_isotropy: bool,
    /// `X_p` expanded into the z/b alphabet, normalized
    pub x_def: Vec<NcPoly>,
    /// `dx[p][c][alpha]` = the partial derivative of `X_p`, normalized
    pub dx: Vec<Vec<Vec<NcPoly>>>,
}

/// Differential-calculus context: algebra plus the constant tensors.
pub struct TwistorContext {
    pub alg: AlgebraContext,
    pub mode: Mode,
    pub r2: Tensor,
    pub r4: Tensor,
    pub p2_plus: Tensor,
    pub p2_minus: Tensor,
    pub p4_plus: Tensor,
    pub p4_minus: Tensor,
    pub eps_up: Tensor,
    pub eps_lo: Tensor,
    pub eps_q: Tensor,
    pub moduli: Option<ModuliData>,
}

pub const XINV_POWER_CAP: u8 = 12;

/// Options for the moduli extension.
#[derive(Clone, Debug)]
pub struct ModuliOptions {
    pub count: usize,
    pub with_isotropy: bool,
}

impl TwistorContext {
    pub fn new(mode: Mode) -> Result<Self, NcError> {
        Self::build(mode, None)
    }

    pub fn with_moduli(mode: Mode, opts: ModuliOptions) -> Result<Self, NcError> {
        Self::build(mode, Some(opts))
    }

    fn build(mode: Mode, moduli: Option<ModuliOptions>) -> Result<Self, NcError> {
        // projectors are derived symbolically (the Hecke precondition is a
        // rational-function identity) and specialized afterwards
        let r2_sym = build_slq2_rmatrix();
        let r4_sym = build_glq_rmatrix(4, 1, &RParams::Ones);
        let (p2p_sym, p2m_sym) = projectors(&r2_sym).map_err(tensor_err)?;
        let (p4p_sym, p4m_sym) = projectors(&r4_sym).map_err(tensor_err)?;
        let r2 = mode.specialize(r2_sym)?;
        let r4 = mode.specialize(r4_sym)?;
        let (p2p, p2m) = (mode.specialize(p2p_sym)?, mode.specialize(p2m_sym)?);
        let (p4p, p4m) = (mode.specialize(p4p_sym)?, mode.specialize(p4m_sym)?);
        let eps_up = mode.specialize(epsilon2_upper())?;
        let eps_lo = mode.specialize(epsilon2_lower())?;
        let eps_q = mode.specialize(build_epsilon_q(&RParams::Ones).map_err(tensor_err)?)?;

        let mut b = ContextBuilder::new();
        // letter precedence: z < dz < X(p) < XInv(p,k) < PhiInv < b(p)
        for al in 0..2u8 {
            for a in 0..4u8 {
                b.add_gen(GenSym::new(Family::Z, &[al, a]));
            }
        }
        for al in 0..2u8 {
            for a in 0..4u8 {
                b.add_gen(GenSym::new(Family::Dz, &[al, a]));
            }
        }
        let pcount = moduli.as_ref().map_or(0, |m| m.count);
        for p in 0..pcount as u8 {
            b.add_gen(GenSym::new(Family::X(p), &[]));
        }
        for p in 0..pcount as u8 {
            for k in 1..=XINV_POWER_CAP {
                b.add_gen(GenSym::new(Family::XInv(p, k), &[]));
            }
        }
        if pcount > 0 {
            b.add_gen(GenSym::new(Family::PhiInv, &[]));
        }
        for p in 0..pcount as u8 {
            for a in 0..4u8 {
                for c in 0..4u8 {
                    b.add_gen(GenSym::new(Family::B(p), &[a, c]));
                }
            }
        }

        // coordinate exchange: R2^{ab}_{mn} z^m_a z^n_b = z^a_c z^b_d R4^{dc}_{ba}
        for al in 0..2 {
            for be in 0..2 {
                for a in 0..4 {
                    for bb in 0..4 {
                        let mut rel = NcPoly::zero();
                        for mu in 0..2 {
                            for nu in 0..2 {
                                let v = r2.get(&[al, be, mu, nu]);
                                if v.is_zero() {
                                    continue;
                                }
                                rel.add_term(
                                    word2(&b, Family::Z, &[mu as u8, a as u8], Family::Z, &[nu as u8, bb as u8])?,
                                    v,
                                );
                            }
                        }
                        for c in 0..4 {
                            for d in 0..4 {
                                let v = r4.get(&[d, c, bb, a]);
                                if v.is_zero() {
                                    continue;
                                }
                                rel.add_term(
                                    word2(&b, Family::Z, &[al as u8, c as u8], Family::Z, &[be as u8, d as u8])?,
                                    -&v,
                                );
                            }
                        }
                        b.relation(rel)?;
                    }
                }
            }
        }
        // coordinate-differential exchange: z dz = R2 dz z R4
        for al in 0..2 {
            for be in 0..2 {
                for a in 0..4 {
                    for bb in 0..4 {
                        let mut rel = NcPoly::zero();
                        rel.add_term(
                            word2(&b, Family::Z, &[al as u8, a as u8], Family::Dz, &[be as u8, bb as u8])?,
                            Scalar::one(),
                        );
                        for mu in 0..2 {
                            for nu in 0..2 {
                                let v2 = r2.get(&[al, be, mu, nu]);
                                if v2.is_zero() {
                                    continue;
                                }
                                for c in 0..4 {
                                    for d in 0..4 {
                                        let v4 = r4.get(&[d, c, bb, a]);
                                        if v4.is_zero() {
                                            continue;
                                        }
                                        rel.add_term(
                                            word2(
                                                &b,
                                                Family::Dz,
                                                &[mu as u8, c as u8],
                                                Family::Z,
                                                &[nu as u8, d as u8],
                                            )?,
                                            -&(&v2 * &v4),
                                        );
                                    }
                                }
                            }
                        }
                        b.relation(rel)?;
                    }
                }
            }
        }
        // differential-differential: dz dz = -R2 dz dz R4 (leading minus)
        for al in 0..2 {
            for be in 0..2 {
                for a in 0..4 {
                    for bb in 0..4 {
                        let mut rel = NcPoly::zero();
                        rel.add_term(
                            word2(&b, Family::Dz, &[al as u8, a as u8], Family::Dz, &[be as u8, bb as u8])?,
                            Scalar::one(),
                        );
                        for mu in 0..2 {
                            for nu in 0..2 {
                                let v2 = r2.get(&[al, be, mu, nu]);
                                if v2.is_zero() {
                                    continue;
                                }
                                for c in 0..4 {
                                    for d in 0..4 {
                                        let v4 = r4.get(&[d, c, bb, a]);
                                        if v4.is_zero() {
                                            continue;
                                        }
                                        rel.add_term(
                                            word2(
                                                &b,
                                                Family::Dz,
                                                &[mu as u8, c as u8],
                                                Family::Dz,
                                                &[nu as u8, d as u8],
                                            )?,
                                            &v2 * &v4,
                                        );
                                    }
                                }
                            }
                        }
                        b.relation(rel)?;
                    }
                }
            }
        }

        if let Some(opts) = &moduli {
            add_moduli_relations(&mut b, opts, &r4, &p4m, &eps_q)?;
        }

        let alg = b.compile()?;
        let mut ctx = TwistorContext {
            alg,
            mode,
            r2,
            r4,
            p2_plus: p2p,
            p2_minus: p2m,
            p4_plus: p4p,
            p4_minus: p4m,
            eps_up,
            eps_lo,
            eps_q,
            moduli: None,
        };
        if let Some(opts) = moduli {
            let mut x_def = Vec::new();
            let mut dx = Vec::new();
            for p in 0..opts.count {
                let xp = ctx.x_expanded(p)?;
                let mut per_c = Vec::new();
                for c in 0..4 {
                    let mut per_al = Vec::new();
                    for al in 0..2 {
                        per_al.push(ctx.partial(c, al, &xp)?);
                    }
                    per_c.push(per_al);
                }
                x_def.push(xp);
                dx.push(per_c);
            }
            ctx.moduli = Some(ModuliData {
                count: opts.count,
                with_isotropy: opts.with_isotropy,
                x_def,
                dx,
            });
        }
        Ok(ctx)
    }

    // ---- generator polynomials ----

    pub fn z(&self, al: usize, a: usize) -> NcPoly {
        self.alg
            .gen(Family::Z, &[al as u8, a as u8])
            .expect("z generator")
    }

    pub fn dz(&self, al: usize, a: usize) -> NcPoly {
        self.alg
            .gen(Family::Dz, &[al as u8, a as u8])
            .expect("dz generator")
    }

    pub fn b_mod(&self, p: usize, a: usize, c: usize) -> NcPoly {
        self.alg
            .gen(Family::B(p as u8), &[a as u8, c as u8])
            .expect("b generator")
    }

    pub fn x_letter(&self, p: usize) -> NcPoly {
        self.alg.gen(Family::X(p as u8), &[]).expect("X letter")
    }

    pub fn x_inv(&self, p: usize, k: u8) -> NcPoly {
        self.alg
            .gen(Family::XInv(p as u8, k), &[])
            .expect("X inverse letter")
    }

    pub fn phi_inv(&self) -> NcPoly {
        self.alg.gen(Family::PhiInv, &[]).expect("PhiInv letter")
    }

    fn zc(&self, al: usize, a: usize) -> u32 {
        self.alg
            .code(&GenSym::new(Family::Z, &[al as u8, a as u8]))
            .expect("z code")
    }

    fn dzc(&self, al: usize, a: usize) -> u32 {
        self.alg
            .code(&GenSym::new(Family::Dz, &[al as u8, a as u8]))
            .expect("dz code")
    }

    /// The invariant bilinear `y_{ab} = q^2/(1+q^2) eps_{al be} z^al_a z^be_b`.
    pub fn y(&self, a: usize, bb: usize) -> Result<NcPoly, NcError> {
        let mut acc = NcPoly::zero();
        for al in 0..2 {
            for be in 0..2 {
                let e = self.eps_lo.get(&[al, be]);
                if e.is_zero() {
                    continue;
                }
                acc = acc.add(&self.z(al, a).mul(&self.z(be, bb)).scale(&e));
            }
        }
        let q_sq = Scalar::q_pow(2);
        let denom = &Scalar::one() + &Scalar::q_pow(2);
        let c = self.mode.scalar(q_sq.div(&denom)?)?;
        self.alg.normal_form(&acc.scale(&c))
    }

    /// `X_p = eps_q^{abcd} y_{ab} b^p_{cd}` expanded into letters.
    pub fn x_expanded(&self, p: usize) -> Result<NcPoly, NcError> {
        let mut acc = NcPoly::zero();
        for (k, v) in self.eps_q.entries() {
            let (a, bb, c, d) = (k[0], k[1], k[2], k[3]);
            let y = self.y(a, bb)?;
            acc = acc.add(&y.mul(&self.b_mod(p, c, d)).scale(v));
        }
        self.alg.normal_form(&acc)
    }

    // ---- partial derivative ----

    /// Apply the partial derivative with conformal index `a`, spinor `alpha`.
    pub fn partial(&self, a: usize, alpha: usize, p: &NcPoly) -> Result<NcPoly, NcError> {
        let p = self.alg.normal_form(p)?;
        let mut acc = NcPoly::zero();
        for (w, c) in &p.terms {
            let all = self.partial_word(&w.0)?;
            acc = acc.add(&all[a][alpha].scale(c));
        }
        self.alg.normal_form(&acc)
    }

    /// All components of the derivative of one word at once; linear cost in
    /// the word length instead of branching over the recursion.
    fn partial_word(&self, w: &[u32]) -> Result<Vec<Vec<NcPoly>>, NcError> {
        if w.is_empty() {
            return Ok(vec![vec![NcPoly::zero(); 2]; 4]);
        }
        let head = *self.alg.sym(w[0]);
        let tail = &w[1..];
        let t = self.partial_word(tail)?;
        let tail_word = NcPoly::word(Word(tail.to_vec()), Scalar::one());
        let mut out = vec![vec![NcPoly::zero(); 2]; 4];
        match head.family {
            Family::Z => {
                let (beta, bb) = (head.idx[0] as usize, head.idx[1] as usize);
                out[bb][beta].add_term(Word(tail.to_vec()), Scalar::one());
                self.exchange_step(beta, bb, &t, &mut out, false)?;
            }
            Family::Dz => {
                let (beta, bb) = (head.idx[0] as usize, head.idx[1] as usize);
                self.exchange_step(beta, bb, &t, &mut out, true)?;
            }
            Family::B(_) => {
                // d/dz^c (b_{ab} w) = R^{ec}_{ga} R^{fg}_{hb} b_{ef} d/dz^h(w)
                let (a, bb) = (head.idx[0] as usize, head.idx[1] as usize);
                for e in 0..4 {
                    for f in 0..4 {
                        let bword = NcPoly::gen(
                            self.alg
                                .code(&GenSym::new(head.family, &[e as u8, f as u8]))?,
                        );
                        for g in 0..4 {
                            for c in 0..4 {
                                let r1 = self.r4.get(&[e, c, g, a]);
                                if r1.is_zero() {
                                    continue;
                                }
                                for h in 0..4 {
                                    let r2v = self.r4.get(&[f, g, h, bb]);
                                    if r2v.is_zero() {
                                        continue;
                                    }
                                    for al in 0..2 {
                                        if t[h][al].is_zero() {
                                            continue;
                                        }
                                        let add = bword.mul(&t[h][al]).scale(&(&r1 * &r2v));
                                        out[c][al] = out[c][al].add(&add);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Family::X(p) => {
                let md = self.moduli.as_ref().expect("moduli data");
                let q2 = self.mode.scalar(Scalar::q_pow(2))?;
                let letter = NcPoly::gen(w[0]);
                for c in 0..4 {
                    for al in 0..2 {
                        let direct = md.dx[p as usize][c][al].mul(&tail_word);
                        let pass = letter.mul(&t[c][al]).scale(&q2);
                        out[c][al] = direct.add(&pass);
                    }
                }
            }
            Family::XInv(p, k) => {
                let md = self.moduli.as_ref().expect("moduli data");
                let ck = self.mode.scalar(inverse_power_coefficient(k))?;
                let weight = self.mode.scalar(Scalar::q_pow(-2 * k as i64))?;
                let next = self.x_inv(p as usize, k + 1);
                let letter = NcPoly::gen(w[0]);
                for c in 0..4 {
                    for al in 0..2 {
                        let direct = next
                            .mul(&md.dx[p as usize][c][al])
                            .mul(&tail_word)
                            .scale(&(-&ck));
                        let pass = letter.mul(&t[c][al]).scale(&weight);
                        out[c][al] = direct.add(&pass);
                    }
                }
            }
            Family::PhiInv => {
                let md = self.moduli.as_ref().expect("moduli data");
                let q2 = self.mode.scalar(Scalar::q_pow(2))?;
                let c1 = self.mode.scalar(inverse_power_coefficient(1))?;
                let letter = NcPoly::gen(w[0]);
                // d(PhiInv) = -q^2 PhiInv^2 d(Phi),
                // d(Phi)[c][al] = -c_1 sum_p X_p^{-2} dx_p[c][al]
                for c in 0..4 {
                    for al in 0..2 {
                        let mut dphi = NcPoly::zero();
                        for p in 0..md.count {
                            dphi = dphi.add(
                                &self.x_inv(p, 2).mul(&md.dx[p][c][al]).scale(&(-&c1)),
                            );
                        }
                        let direct = letter
                            .mul(&letter)
                            .mul(&dphi)
                            .mul(&tail_word)
                            .scale(&(-&q2));
                        let pass = letter.mul(&t[c][al]).scale(&q2);
                        out[c][al] = direct.add(&pass);
                    }
                }
            }
            other => {
                return Err(NcError::ReductionStuck(format!(
                    "partial derivative has no rule for family {:?}",
                    other
                )))
            }
        }
        Ok(out)
    }

    /// Common exchange step for z and dz heads:
    /// `out[a][al] += R2^{be mu}_{al nu} R4^{da}_{cb} (letter nu,d) * t[c][mu]`.
    fn exchange_step(
        &self,
        beta: usize,
        bb: usize,
        t: &[Vec<NcPoly>],
        out: &mut [Vec<NcPoly>],
        differential: bool,
    ) -> Result<(), NcError> {
        for al in 0..2 {
            for mu in 0..2 {
                for nu in 0..2 {
                    let v2 = self.r2.get(&[beta, mu, al, nu]);
                    if v2.is_zero() {
                        continue;
                    }
                    for a in 0..4 {
                        for c in 0..4 {
                            for d in 0..4 {
                                let v4 = self.r4.get(&[d, a, c, bb]);
                                if v4.is_zero() {
                                    continue;
                                }
                                if t[c][mu].is_zero() {
                                    continue;
                                }
                                let code = if differential {
                                    self.dzc(nu, d)
                                } else {
                                    self.zc(nu, d)
                                };
                                let add = NcPoly::gen(code)
                                    .mul(&t[c][mu])
                                    .scale(&(&v2 * &v4));
                                out[a][al] = out[a][al].add(&add);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    // ---- exterior derivative ----

    /// Graded Leibniz derivative; nilpotent on the quotient.
    pub fn d(&self, p: &NcPoly) -> Result<NcPoly, NcError> {
        let p = self.alg.normal_form(p)?;
        let mut acc = NcPoly::zero();
        for (w, c) in &p.terms {
            let mut sign_deg = 0usize;
            for (i, &code) in w.0.iter().enumerate() {
                let letter_d = self.d_letter(code)?;
                if !letter_d.is_zero() {
                    let prefix = NcPoly::word(Word(w.0[..i].to_vec()), Scalar::one());
                    let suffix = NcPoly::word(Word(w.0[i + 1..].to_vec()), Scalar::one());
                    let sgn = if sign_deg % 2 == 0 {
                        Scalar::one()
                    } else {
                        Scalar::from_int(-1)
                    };
                    acc = acc.add(&prefix.mul(&letter_d).mul(&suffix).scale(&(&sgn * c)));
                }
                sign_deg += self.alg.sym(code).family.form_degree() as usize;
            }
        }
        self.alg.normal_form(&acc)
    }

    fn d_letter(&self, code: u32) -> Result<NcPoly, NcError> {
        let g = *self.alg.sym(code);
        Ok(match g.family {
            Family::Z => NcPoly::gen(self.dzc(g.idx[0] as usize, g.idx[1] as usize)),
            Family::Dz | Family::B(_) => NcPoly::zero(),
            Family::X(p) => {
                let md = self.moduli.as_ref().expect("moduli data");
                let mut acc = NcPoly::zero();
                for c in 0..4 {
                    for al in 0..2 {
                        acc = acc.add(
                            &NcPoly::gen(self.dzc(al, c)).mul(&md.dx[p as usize][c][al]),
                        );
                    }
                }
                acc
            }
            Family::XInv(p, k) => {
                let md = self.moduli.as_ref().expect("moduli data");
                let ck = self.mode.scalar(inverse_power_coefficient(k))?;
                let next = self.x_inv(p as usize, k + 1);
                let mut acc = NcPoly::zero();
                for c in 0..4 {
                    for al in 0..2 {
                        acc = acc.add(
                            &NcPoly::gen(self.dzc(al, c))
                                .mul(&next)
                                .mul(&md.dx[p as usize][c][al]),
                        );
                    }
                }
                acc.scale(&(-&ck))
            }
            Family::PhiInv => {
                let md = self.moduli.as_ref().expect("moduli data");
                let q2 = self.mode.scalar(Scalar::q_pow(2))?;
                let c1 = self.mode.scalar(inverse_power_coefficient(1))?;
                let letter = NcPoly::gen(code);
                let mut acc = NcPoly::zero();
                for c in 0..4 {
                    for al in 0..2 {
                        for p in 0..md.count {
                            acc = acc.add(
                                &NcPoly::gen(self.dzc(al, c))
                                    .mul(&letter)
                                    .mul(&letter)
                                    .mul(&self.x_inv(p, 2))
                                    .mul(&md.dx[p][c][al])
                                    .scale(&(&q2 * &c1)),
                            );
                        }
                    }
                }
                acc
            }
            other => {
                return Err(NcError::ReductionStuck(format!(
                    "exterior derivative has no rule for family {:?}",
                    other
                )))
            }
        })
    }

    // ---- duality on 2-forms ----

    /// Apply `P4+ - P4-` (or a single projector) on the conformal index pair
    /// of the adjacent differential pair of every word.
    fn map_dz_pair(&self, p: &NcPoly, op: &Tensor) -> Result<NcPoly, NcError> {
        let p = self.alg.normal_form(p)?;
        let mut acc = NcPoly::zero();
        for (w, coeff) in &p.terms {
            // locate the adjacent pair of form-degree-1 letters
            let mut pos = None;
            for i in 0..w.0.len().saturating_sub(1) {
                let f1 = self.alg.sym(w.0[i]).family;
                let f2 = self.alg.sym(w.0[i + 1]).family;
                if f1.form_degree() == 1 && f2.form_degree() == 1 {
                    pos = Some(i);
                    break;
                }
            }
            let Some(i) = pos else {
                return Err(NcError::ReductionStuck(
                    "word lacks an adjacent differential pair".into(),
                ));
            };
            let g1 = *self.alg.sym(w.0[i]);
            let g2 = *self.alg.sym(w.0[i + 1]);
            if g1.family != Family::Dz || g2.family != Family::Dz {
                return Err(NcError::ReductionStuck(
                    "duality expects twistor differentials".into(),
                ));
            }
            let (mu, c) = (g1.idx[0] as usize, g1.idx[1] as usize);
            let (nu, d) = (g2.idx[0] as usize, g2.idx[1] as usize);
            for a in 0..4 {
                for bb in 0..4 {
                    let v = op.get(&[d, c, bb, a]);
                    if v.is_zero() {
                        continue;
                    }
                    let mut nw = w.0.clone();
                    nw[i] = self.dzc(mu, a);
                    nw[i + 1] = self.dzc(nu, bb);
                    acc.add_term(Word(nw), &v * coeff);
                }
            }
        }
        self.alg.normal_form(&acc)
    }

    /// The duality involution on homogeneous 2-forms.
    pub fn dual_2form(&self, p: &NcPoly) -> Result<NcPoly, NcError> {
        let op = self.p4_plus.sub(&self.p4_minus);
        self.map_dz_pair(p, &op)
    }

    /// Anti-self-dual component: the conformal pair contracted with `P4-`.
    pub fn antiselfdual_part(&self, p: &NcPoly) -> Result<NcPoly, NcError> {
        self.map_dz_pair(p, &self.p4_minus)
    }

    /// Self-dual component: the conformal pair contracted with `P4+` (the
    /// eigenspace carrying the spinor-singlet invariant 2-form).
    pub fn selfdual_part(&self, p: &NcPoly) -> Result<NcPoly, NcError> {
        self.map_dz_pair(p, &self.p4_plus)
    }

    // ---- verification suites ----

    pub fn verify_dz_symmetry(&self) -> Result<Vec<ResidualCheck>, NcError> {
        let mut out = Vec::new();
        for (name, p2, p4, expect_zero) in [
            ("symmetric-spinor pair with self-dual conformal projection", &self.p2_plus, &self.p4_plus, true),
            ("antisymmetric-spinor pair with anti-self-dual projection", &self.p2_minus, &self.p4_minus, true),
            ("mixed projection spans the surviving 2-forms", &self.p2_plus, &self.p4_minus, false),
        ] {
            let mut terms = 0usize;
            for al in 0..2 {
                for be in 0..2 {
                    for a in 0..4 {
                        for bb in 0..4 {
                            let mut acc = NcPoly::zero();
                            for mu in 0..2 {
                                for nu in 0..2 {
                                    let v2 = p2.get(&[al, be, mu, nu]);
                                    if v2.is_zero() {
                                        continue;
                                    }
                                    for c in 0..4 {
                                        for d in 0..4 {
                                            let v4 = p4.get(&[d, c, bb, a]);
                                            if v4.is_zero() {
                                                continue;
                                            }
                                            acc = acc.add(
                                                &self.dz(mu, c).mul(&self.dz(nu, d)).scale(&(&v2 * &v4)),
                                            );
                                        }
                                    }
                                }
                            }
                            terms += self.alg.normal_form(&acc)?.term_count();
                        }
                    }
                }
            }
            let residual_terms = if expect_zero { terms } else { usize::from(terms == 0) };
            out.push(ResidualCheck {
                name: name.into(),
                residual_terms,
            });
        }
        Ok(out)
    }

    pub fn verify_y_relations(&self) -> Result<Vec<ResidualCheck>, NcError> {
        let mut out = Vec::new();
        // projection: y_{ab} = P4-^{dc}_{ba} y_{cd}
        let mut terms = 0usize;
        for a in 0..4 {
            for bb in 0..4 {
                let mut acc = self.y(a, bb)?;
                for c in 0..4 {
                    for d in 0..4 {
                        let v = self.p4_minus.get(&[d, c, bb, a]);
                        if v.is_zero() {
                            continue;
                        }
                        acc = acc.sub(&self.y(c, d)?.scale(&v));
                    }
                }
                terms += self.alg.normal_form(&acc)?.term_count();
            }
        }
        out.push(ResidualCheck {
            name: "bilinear y is anti-self-dual-projected".into(),
            residual_terms: terms,
        });

        // exchange with coordinates: y_{ab} z^al_c = q^{-1} R^{ed}_{ha} R^{fh}_{cb} z^al_d y_{ef}
        let qinv = self.mode.scalar(Scalar::q_pow(-1))?;
        let mut terms = 0usize;
        for a in 0..4 {
            for bb in 0..4 {
                for al in 0..2 {
                    for c in 0..4 {
                        let mut acc = self.y(a, bb)?.mul(&self.z(al, c));
                        for e in 0..4 {
                            for d in 0..4 {
                                for h in 0..4 {
                                    let r1 = self.r4.get(&[e, d, h, a]);
                                    if r1.is_zero() {
                                        continue;
                                    }
                                    for f in 0..4 {
                                        let r2v = self.r4.get(&[f, h, c, bb]);
                                        if r2v.is_zero() {
                                            continue;
                                        }
                                        acc = acc.sub(
                                            &self
                                                .z(al, d)
                                                .mul(&self.y(e, f)?)
                                                .scale(&(&(&qinv * &r1) * &r2v)),
                                        );
                                    }
                                }
                            }
                        }
                        terms += self.alg.normal_form(&acc)?.term_count();
                    }
                }
            }
        }
        out.push(ResidualCheck {
            name: "y exchanges with coordinates through the double R".into(),
            residual_terms: terms,
        });

        // isotropy: eps_q^{abcd} y_{ab} y_{cd} = 0
        let mut acc = NcPoly::zero();
        for (k, v) in self.eps_q.entries() {
            acc = acc.add(&self.y(k[0], k[1])?.mul(&self.y(k[2], k[3])?).scale(v));
        }
        out.push(ResidualCheck {
            name: "y is isotropic in the 6D pairing".into(),
            residual_terms: self.alg.normal_form(&acc)?.term_count(),
        });

        // exchange with differentials: y dz = q R R dz y
        let q1 = self.mode.scalar(Scalar::q_pow(1))?;
        let mut terms = 0usize;
        for a in 0..4 {
            for bb in 0..4 {
                for ga in 0..2 {
                    for c in 0..4 {
                        let mut acc = self.y(a, bb)?.mul(&self.dz(ga, c));
                        for e in 0..4 {
                            for h in 0..4 {
                                for g in 0..4 {
                                    let r1 = self.r4.get(&[e, h, g, a]);
                                    if r1.is_zero() {
                                        continue;
                                    }
                                    for f in 0..4 {
                                        let r2v = self.r4.get(&[f, g, c, bb]);
                                        if r2v.is_zero() {
                                            continue;
                                        }
                                        acc = acc.sub(
                                            &self
                                                .dz(ga, h)
                                                .mul(&self.y(e, f)?)
                                                .scale(&(&(&q1 * &r1) * &r2v)),
                                        );
                                    }
                                }
                            }
                        }
                        terms += self.alg.normal_form(&acc)?.term_count();
                    }
                }
            }
        }
        out.push(ResidualCheck {
            name: "y exchanges with differentials through the double R".into(),
            residual_terms: terms,
        });
        Ok(out)
    }

    /// The cubic identity: `eps_q^{abcd} z^be_b z^mu_c z^nu_d = 0` for every
    /// free index choice (32 components).
    pub fn verify_cubic_identity(&self) -> Result<ResidualCheck, NcError> {
        let mut terms = 0usize;
        for a in 0..4 {
            for be in 0..2 {
                for mu in 0..2 {
                    for nu in 0..2 {
                        let mut acc = NcPoly::zero();
                        for (k, v) in self.eps_q.entries() {
                            if k[0] != a {
                                continue;
                            }
                            acc = acc.add(
                                &self
                                    .z(be, k[1])
                                    .mul(&self.z(mu, k[2]))
                                    .mul(&self.z(nu, k[3]))
                                    .scale(v),
                            );
                        }
                        terms += self.alg.normal_form(&acc)?.term_count();
                    }
                }
            }
        }
        Ok(ResidualCheck {
            name: "cubic epsilon identity on twistor coordinates".into(),
            residual_terms: terms,
        })
    }

    /// Graded dimensions of the coordinate and differential components.
    pub fn pbw_z(&self, deg: usize) -> Result<usize, NcError> {
        let mut md = MultiDeg::new();
        md.insert(Family::Z, deg);
        self.alg.pbw_dimension(&md)
    }

    pub fn pbw_dz(&self, deg: usize) -> Result<usize, NcError> {
        let mut md = MultiDeg::new();
        md.insert(Family::Dz, deg);
        self.alg.pbw_dimension(&md)
    }

    /// Word-level reality checks: the involutions square to the identity and
    /// map the relation ideal into itself.
    pub fn verify_reality_words(&self) -> Result<Vec<ResidualCheck>, NcError> {
        let mut out = Vec::new();
        // pseudo-real: conj(z) = z, products reverse, scalars conjugate
        let conj = |p: &NcPoly| -> NcPoly {
            let mut acc = NcPoly::zero();
            for (w, c) in &p.terms {
                let mut rev = w.0.clone();
                rev.reverse();
                acc.add_term(Word(rev), c.conjugate());
            }
            acc
        };
        let mut terms = 0usize;
        let mut double_terms = 0usize;
        for rel in self.alg.relations() {
            // only coordinate relations: reversal keeps the z-z component
            if rel
                .terms
                .keys()
                .any(|w| w.0.iter().any(|&c| self.alg.sym(c).family != Family::Z))
            {
                continue;
            }
            let image = conj(rel);
            terms += self.alg.normal_form(&image)?.term_count();
            double_terms += conj(&image).sub(rel).term_count();
        }
        out.push(ResidualCheck {
            name: "product-reversal conjugation preserves the coordinate ideal".into(),
            residual_terms: terms,
        });
        out.push(ResidualCheck {
            name: "product-reversal conjugation is involutive".into(),
            residual_terms: double_terms,
        });

        // Euclidean: conj(z^al_a) = eps_{al be} z^be_b C^b_a, products reverse
        let c_mat = self.mode.specialize(crate::tensor::build_charge_conjugation())?;
        let conj_letter = |al: usize, a: usize| -> NcPoly {
            let mut acc = NcPoly::zero();
            for be in 0..2 {
                let e = self.eps_lo.get(&[al, be]);
                if e.is_zero() {
                    continue;
                }
                for bb in 0..4 {
                    let cv = c_mat.get(&[bb, a]);
                    if cv.is_zero() {
                        continue;
                    }
                    acc = acc.add(&self.z(be, bb).scale(&(&e * &cv)));
                }
            }
            acc
        };
        let conj_euc = |p: &NcPoly| -> NcPoly {
            let mut acc = NcPoly::zero();
            for (w, c) in &p.terms {
                let mut prod = NcPoly::constant(c.clone());
                for &code in w.0.iter().rev() {
                    let g = self.alg.sym(code);
                    prod = prod.mul(&conj_letter(g.idx[0] as usize, g.idx[1] as usize));
                }
                acc = acc.add(&prod);
            }
            acc
        };
        let mut dbl = 0usize;
        for al in 0..2 {
            for a in 0..4 {
                let z = self.z(al, a);
                let twice = conj_euc(&conj_euc(&z));
                dbl += twice.sub(&z).term_count();
            }
        }
        out.push(ResidualCheck {
            name: "Euclidean conjugation squares to the identity on letters".into(),
            residual_terms: dbl,
        });
        let mut ideal_terms = 0usize;
        for rel in self.alg.relations() {
            if rel
                .terms
                .keys()
                .any(|w| w.0.iter().any(|&c| self.alg.sym(c).family != Family::Z))
            {
                continue;
            }
            ideal_terms += self.alg.normal_form(&conj_euc(rel))?.term_count();
        }
        out.push(ResidualCheck {
            name: "Euclidean conjugation preserves the coordinate ideal".into(),
            residual_terms: ideal_terms,
        });
        Ok(out)
    }

    /// Mutual consistency of the derivative action: the derivative algebra
    /// has classical graded dimensions, differentiating a relation gives
    /// zero, and the two association orders agree.
    pub fn check_derivative_algebra(&self) -> Result<Vec<ResidualCheck>, NcError> {
        let mut out = Vec::new();

        // independent derivative-only context: R^{ab}_{cd} pd^c_al pd^d_be
        //   = pd^a_mu pd^b_nu R2^{nu mu}_{be al}
        let mut b = ContextBuilder::new();
        for al in 0..2u8 {
            for a in 0..4u8 {
                b.add_gen(GenSym::new(Family::Pd, &[a, al]));
            }
        }
        for a in 0..4 {
            for bb in 0..4 {
                for al in 0..2 {
                    for be in 0..2 {
                        let mut rel = NcPoly::zero();
                        for c in 0..4 {
                            for d in 0..4 {
                                let v = self.r4.get(&[a, bb, c, d]);
                                if v.is_zero() {
                                    continue;
                                }
                                rel.add_term(
                                    word2(&b, Family::Pd, &[c as u8, al as u8], Family::Pd, &[d as u8, be as u8])?,
                                    v,
                                );
                            }
                        }
                        for mu in 0..2 {
                            for nu in 0..2 {
                                let v = self.r2.get(&[nu, mu, be, al]);
                                if v.is_zero() {
                                    continue;
                                }
                                rel.add_term(
                                    word2(&b, Family::Pd, &[a as u8, mu as u8], Family::Pd, &[bb as u8, nu as u8])?,
                                    -&v,
                                );
                            }
                        }
                        b.relation(rel)?;
                    }
                }
            }
        }
        let pd_ctx = b.compile()?;
        let mut md = MultiDeg::new();
        md.insert(Family::Pd, 2);
        let d2 = pd_ctx.pbw_dimension(&md)?;
        out.push(ResidualCheck {
            name: "derivative algebra degree-2 dimension is classical (36)".into(),
            residual_terms: usize::from(d2 != 36),
        });

        // differentiating any coordinate relation yields zero
        let mut terms = 0usize;
        for rel in self.alg.relations() {
            if rel
                .terms
                .keys()
                .any(|w| w.0.iter().any(|&c| self.alg.sym(c).family != Family::Z))
            {
                continue;
            }
            for a in 0..4 {
                for al in 0..2 {
                    terms += self.partial(a, al, rel)?.term_count();
                }
            }
        }
        out.push(ResidualCheck {
            name: "derivative annihilates the coordinate relations".into(),
            residual_terms: terms,
        });

        // association consistency: derivative of a product word equals the
        // derivative of its normal form
        let mut assoc = 0usize;
        for (al, a, be, bb, ga, c) in [(0, 0, 0, 1, 1, 2), (1, 3, 0, 0, 0, 1)] {
            let w = self.z(al, a).mul(&self.z(be, bb)).mul(&self.z(ga, c));
            let nf = self.alg.normal_form(&w)?;
            for aa in 0..4 {
                for mu in 0..2 {
                    let d1 = self.partial(aa, mu, &w)?;
                    let d2 = self.partial(aa, mu, &nf)?;
                    assoc += d1.sub(&d2).term_count();
                }
            }
        }
        out.push(ResidualCheck {
            name: "derivative respects the relation quotient".into(),
            residual_terms: assoc,
        });
        Ok(out)
    }
}

/// `c_k` in the inverse-power derivative rule; `c_k = sum_{j=1..k} q^{-2j}`.
pub fn inverse_power_coefficient(k: u8) -> Scalar {
    let mut acc = Scalar::zero();
    for j in 1..=k as i64 {
        acc = &acc + &Scalar::q_pow(-2 * j);
    }
    acc
}

fn word2(
    b: &ContextBuilder,
    f1: Family,
    i1: &[u8],
    f2: Family,
    i2: &[u8],
) -> Result<Word, NcError> {
    let c1 = b.code(&GenSym::new(f1, i1))?;
    let c2 = b.code(&GenSym::new(f2, i2))?;
    Ok(Word(vec![c1, c2]))
}

fn tensor_err(e: crate::tensor::TensorError) -> NcError {
    NcError::ReductionStuck(format!("tensor-level failure: {e}"))
}

/// Moduli relations: projection constraint, isotropy, self- and cross-
/// exchange, coordinate and differential exchange, and the central-letter
/// rules for `X_p`, its inverse powers, and the opaque potential inverse.
fn add_moduli_relations(
    b: &mut ContextBuilder,
    opts: &ModuliOptions,
    r4: &Tensor,
    p4m: &Tensor,
    eps_q: &Tensor,
) -> Result<(), NcError> {
    let pc = opts.count as u8;
    // linear projection constraint: b_{ab} = P4-^{dc}_{ba} b_{cd}
    for p in 0..pc {
        for a in 0..4u8 {
            for bb in 0..4u8 {
                let mut rel = b.gen(Family::B(p), &[a, bb])?;
                for c in 0..4 {
                    for d in 0..4 {
                        let v = p4m.get(&[d, c, bb as usize, a as usize]);
                        if v.is_zero() {
                            continue;
                        }
                        rel = rel.sub(&b.gen(Family::B(p), &[c as u8, d as u8])?.scale(&v));
                    }
                }
                b.relation(rel)?;
            }
        }
    }
    // isotropy: eps_q^{abcd} b_{ab} b_{cd} = 0. The same-family exchange
    // below already enforces the quadric at generic q (the graded dimension
    // is 20 either way), so the negative control drops both together.
    if opts.with_isotropy {
        for p in 0..pc {
            let mut rel = NcPoly::zero();
            for (k, v) in eps_q.entries() {
                rel = rel.add(
                    &b.gen(Family::B(p), &[k[0] as u8, k[1] as u8])?
                        .mul(&b.gen(Family::B(p), &[k[2] as u8, k[3] as u8])?)
                        .scale(v),
                );
            }
            b.relation(rel)?;
        }
    }
    // moduli exchange:
    //   b^{ph}_{ab} b^p_{cd} = q^{-2} R^{ea'}_{ga} R^{fg}_{cb} R^{c'b'}_{he}
    //                          R^{d'h}_{df} b^p_{a'b'} b^{ph}_{c'd'}
    // for p <= ph; the displayed left factor carries the larger label (the
    // orientation under which the pairing elements X_p are central against
    // the other families — the opposite reading leaves commutators nonzero).
    for p in 0..pc {
        for p2 in p..pc {
            if !opts.with_isotropy && p == p2 {
                continue;
            }
            for a in 0..4usize {
                for bb in 0..4usize {
                    for c in 0..4usize {
                        for d in 0..4usize {
                            let mut rel = b
                                .gen(Family::B(p2), &[a as u8, bb as u8])?
                                .mul(&b.gen(Family::B(p), &[c as u8, d as u8])?);
                            for e in 0..4 {
                                for a1 in 0..4 {
                                    for g in 0..4 {
                                        let r1 = r4.get(&[e, a1, g, a]);
                                        if r1.is_zero() {
                                            continue;
                                        }
                                        for f in 0..4 {
                                            let r2v = r4.get(&[f, g, c, bb]);
                                            if r2v.is_zero() {
                                                continue;
                                            }
                                            for c1 in 0..4 {
                                                for b1 in 0..4 {
                                                    for h in 0..4 {
                                                        let r3 = r4.get(&[c1, b1, h, e]);
                                                        if r3.is_zero() {
                                                            continue;
                                                        }
                                                        for d1 in 0..4 {
                                                            let r4v = r4.get(&[d1, h, d, f]);
                                                            if r4v.is_zero() {
                                                                continue;
                                                            }
                                                            let coeff = &(&(&r1 * &r2v) * &r3)
                                                                * &(&r4v * &Scalar::q_pow(-2));
                                                            rel = rel.sub(
                                                                &b.gen(
                                                                    Family::B(p),
                                                                    &[a1 as u8, b1 as u8],
                                                                )?
                                                                .mul(&b.gen(
                                                                    Family::B(p2),
                                                                    &[c1 as u8, d1 as u8],
                                                                )?)
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
                            b.relation(rel)?;
                        }
                    }
                }
            }
        }
    }
    // coordinate exchange: b_{ab} z^ga_c = R^{eh}_{ga} R^{fg}_{cb} z^ga_h b_{ef}
    // and the identical-coefficient differential image
    for p in 0..pc {
        for a in 0..4usize {
            for bb in 0..4usize {
                for ga in 0..2usize {
                    for c in 0..4usize {
                        for differential in [false, true] {
                            let zf = if differential { Family::Dz } else { Family::Z };
                            let mut rel = b
                                .gen(Family::B(p), &[a as u8, bb as u8])?
                                .mul(&b.gen(zf, &[ga as u8, c as u8])?);
                            for e in 0..4 {
                                for h in 0..4 {
                                    for g in 0..4 {
                                        let r1 = r4.get(&[e, h, g, a]);
                                        if r1.is_zero() {
                                            continue;
                                        }
                                        for f in 0..4 {
                                            let r2v = r4.get(&[f, g, c, bb]);
                                            if r2v.is_zero() {
                                                continue;
                                            }
                                            rel = rel.sub(
                                                &b.gen(zf, &[ga as u8, h as u8])?
                                                    .mul(&b.gen(Family::B(p), &[e as u8, f as u8])?)
                                                    .scale(&(&r1 * &r2v)),
                                            );
                                        }
                                    }
                                }
                            }
                            b.relation(rel)?;
                        }
                    }
                }
            }
        }
    }
    // central letters: exchange weights and inverse-pair collapses
    add_central_letter_rules(b, pc)?;
    Ok(())
}

fn add_central_letter_rules(b: &mut ContextBuilder, pc: u8) -> Result<(), NcError> {
    let mut centrals: Vec<(GenSym, i64)> = Vec::new(); // (letter, dz weight exponent)
    for p in 0..pc {
        centrals.push((GenSym::new(Family::X(p), &[]), 2));
        for k in 1..=XINV_POWER_CAP {
            centrals.push((GenSym::new(Family::XInv(p, k), &[]), -2 * k as i64));
        }
    }
    centrals.push((GenSym::new(Family::PhiInv, &[]), 2));

    for (g, w) in &centrals {
        let letter = NcPoly::gen(b.code(g)?);
        // commutes with coordinates and with every modulus
        for al in 0..2u8 {
            for a in 0..4u8 {
                let z = b.gen(Family::Z, &[al, a])?;
                b.relation(letter.mul(&z).sub(&z.mul(&letter)))?;
                let dz = b.gen(Family::Dz, &[al, a])?;
                b.relation(letter.mul(&dz).sub(&dz.mul(&letter).scale(&Scalar::q_pow(*w))))?;
            }
        }
        for p in 0..pc {
            for a in 0..4u8 {
                for c in 0..4u8 {
                    let bm = b.gen(Family::B(p), &[a, c])?;
                    b.relation(bm.mul(&letter).sub(&letter.mul(&bm)))?;
                }
            }
        }
    }
    // central letters commute among themselves
    for i in 0..centrals.len() {
        for j in (i + 1)..centrals.len() {
            let gi = NcPoly::gen(b.code(&centrals[i].0)?);
            let gj = NcPoly::gen(b.code(&centrals[j].0)?);
            b.relation(gj.mul(&gi).sub(&gi.mul(&gj)))?;
        }
    }
    // inverse collapses: X_p X_p^{-k} = X_p^{-(k-1)}, X_p X_p^{-1} = 1,
    // and power merges X_p^{-j} X_p^{-k} = X_p^{-(j+k)}
    for p in 0..pc {
        let x = NcPoly::gen(b.code(&GenSym::new(Family::X(p), &[]))?);
        for k in 1..=XINV_POWER_CAP {
            let xk = NcPoly::gen(b.code(&GenSym::new(Family::XInv(p, k), &[]))?);
            let rhs = if k == 1 {
                NcPoly::one()
            } else {
                NcPoly::gen(b.code(&GenSym::new(Family::XInv(p, k - 1), &[]))?)
            };
            b.contraction(x.mul(&xk).sub(&rhs))?;
        }
        for j in 1..=XINV_POWER_CAP {
            for k in j..=XINV_POWER_CAP {
                if j + k <= XINV_POWER_CAP {
                    let xj = NcPoly::gen(b.code(&GenSym::new(Family::XInv(p, j), &[]))?);
                    let xk = NcPoly::gen(b.code(&GenSym::new(Family::XInv(p, k), &[]))?);
                    let xjk = NcPoly::gen(b.code(&GenSym::new(Family::XInv(p, j + k), &[]))?);
                    b.contraction(xj.mul(&xk).sub(&xjk))?;
                }
            }
        }
    }
    // the potential inverse: (sum_p X_p^{-1}) PhiInv = 1 = PhiInv (sum ...)
    let phi_inv = NcPoly::gen(b.code(&GenSym::new(Family::PhiInv, &[]))?);
    let mut phi = NcPoly::zero();
    for p in 0..pc {
        phi = phi.add(&NcPoly::gen(b.code(&GenSym::new(Family::XInv(p, 1), &[]))?));
    }
    b.contraction(phi.mul(&phi_inv).sub(&NcPoly::one()))?;
    Ok(())
}
