//! Sparse multi-index tensors over [`Scalar`], the constant tensors of the
//! quantum-group calculus (R-matrices, projectors, deformed epsilon symbols,
//! charge conjugation), and the matrix-level identity checks on them.
//!
//! Index conventions, used everywhere: a 4-index operator `T` on `V (x) V`
//! has dims `[n,n,n,n]` with axes `(upper1, upper2, lower1, lower2)`; the
//! upper pair is the row, the lower pair the column, and composition is
//! `(A B)^{ab}_{cd} = sum_{xy} A^{ab}_{xy} B^{xy}_{cd}`. All indices are
//! 0-based internally; textual dumps render them 1-based.

use num::rational::BigRational;
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;
use thiserror::Error;

use crate::coeff::{parse_scalar, CoeffError, ParamAssignment, Scalar};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum TensorError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Hecke relation violated ({0} residual terms); projectors undefined")]
    HeckeViolated(usize),
    #[error("deformed epsilon symbol inconsistent at permutation {0:?}")]
    InconsistentSymbol(Vec<usize>),
    #[error("dump parse error: {0}")]
    DumpParse(String),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
}

/// Choice of multiplicative parameters `r(a,b)` when building R-matrices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RParams {
    /// Standard matrix: every `r(a,b) = 1`.
    Ones,
    /// Fully symbolic `r(a,b)` generators.
    Symbolic,
    /// Explicit rational values for pairs `a < b`; missing pairs default to 1.
    Values(BTreeMap<(u8, u8), BigRational>),
}

impl RParams {
    /// The scalar `r(a,b)` with `r(b,a) = r(a,b)^{-1}` and `r(a,a) = 1`.
    pub fn scalar(&self, a: usize, b: usize) -> Scalar {
        if a == b {
            return Scalar::one();
        }
        match self {
            RParams::Ones => Scalar::one(),
            RParams::Symbolic => Scalar::r_param(a as u8, b as u8),
            RParams::Values(map) => {
                let (lo, hi) = (a.min(b), a.max(b));
                let v = map
                    .get(&(lo as u8, hi as u8))
                    .cloned()
                    .unwrap_or_else(|| BigRational::from_integer(1.into()));
                let x = Scalar::from_rat(v);
                if a < b {
                    x
                } else {
                    x.inv().expect("r values are nonzero")
                }
            }
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Tensor {
    dims: Vec<usize>,
    entries: BTreeMap<Vec<usize>, Scalar>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>) -> Self {
        Tensor {
            dims,
            entries: BTreeMap::new(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<usize>, &Scalar)> {
        self.entries.iter()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of r-monomial terms across all entries; a convenient
    /// residual size for reports.
    pub fn term_count(&self) -> usize {
        self.entries.values().map(Scalar::term_count).sum()
    }

    fn check_idx(&self, idx: &[usize]) {
        assert_eq!(idx.len(), self.dims.len(), "index arity mismatch");
        for (i, (&v, &d)) in idx.iter().zip(&self.dims).enumerate() {
            assert!(v < d, "index {i} out of range: {v} >= {d}");
        }
    }

    pub fn get(&self, idx: &[usize]) -> Scalar {
        self.check_idx(idx);
        self.entries.get(idx).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn set(&mut self, idx: &[usize], v: Scalar) {
        self.check_idx(idx);
        if v.is_zero() {
            self.entries.remove(idx);
        } else {
            self.entries.insert(idx.to_vec(), v);
        }
    }

    pub fn add_to(&mut self, idx: &[usize], v: &Scalar) {
        self.check_idx(idx);
        if v.is_zero() {
            return;
        }
        let cur = self.entries.entry(idx.to_vec()).or_insert_with(Scalar::zero);
        let sum = &*cur + v;
        if sum.is_zero() {
            self.entries.remove(idx);
        } else {
            *cur = sum;
        }
    }

    pub fn map_scalars(&self, f: impl Fn(&Scalar) -> Scalar) -> Tensor {
        let mut out = Tensor::new(self.dims.clone());
        for (k, v) in &self.entries {
            out.set(k, f(v));
        }
        out
    }

    /// Substitute a rational value for `s` in every entry.
    pub fn eval_s(&self, s: &BigRational) -> Result<Tensor, CoeffError> {
        let mut out = Tensor::new(self.dims.clone());
        for (k, v) in &self.entries {
            out.set(k, v.eval_s(s)?);
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Scalar) -> Tensor {
        self.map_scalars(|v| v * c)
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.dims, other.dims, "tensor shape mismatch");
        let mut out = self.clone();
        for (k, v) in &other.entries {
            out.add_to(k, v);
        }
        out
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.add(&other.scale(&Scalar::from_int(-1)))
    }

    /// General sparse contraction. `pairs` lists `(axis_in_self, axis_in_other)`
    /// to sum over; the result keeps self's free axes (in order) then other's.
    pub fn contract(&self, other: &Tensor, pairs: &[(usize, usize)]) -> Result<Tensor, TensorError> {
        for &(i, j) in pairs {
            if i >= self.rank() || j >= other.rank() || self.dims[i] != other.dims[j] {
                return Err(TensorError::DimensionMismatch(format!(
                    "contract axes ({i},{j}) on shapes {:?} and {:?}",
                    self.dims, other.dims
                )));
            }
        }
        let self_paired: Vec<usize> = pairs.iter().map(|&(i, _)| i).collect();
        let other_paired: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
        let self_free: Vec<usize> = (0..self.rank()).filter(|i| !self_paired.contains(i)).collect();
        let other_free: Vec<usize> =
            (0..other.rank()).filter(|j| !other_paired.contains(j)).collect();
        let mut out_dims: Vec<usize> = self_free.iter().map(|&i| self.dims[i]).collect();
        out_dims.extend(other_free.iter().map(|&j| other.dims[j]));
        let mut out = Tensor::new(out_dims);

        // bucket `other` entries by their paired-index key
        let mut buckets: HashMap<Vec<usize>, Vec<(Vec<usize>, &Scalar)>> = HashMap::new();
        for (k, v) in &other.entries {
            let key: Vec<usize> = other_paired.iter().map(|&j| k[j]).collect();
            let free: Vec<usize> = other_free.iter().map(|&j| k[j]).collect();
            buckets.entry(key).or_default().push((free, v));
        }
        for (k, v) in &self.entries {
            let key: Vec<usize> = self_paired.iter().map(|&i| k[i]).collect();
            let Some(matches) = buckets.get(&key) else {
                continue;
            };
            let free_self: Vec<usize> = self_free.iter().map(|&i| k[i]).collect();
            for (free_other, w) in matches {
                let mut idx = free_self.clone();
                idx.extend_from_slice(free_other);
                out.add_to(&idx, &(v * *w));
            }
        }
        Ok(out)
    }

    /// Identity operator on `V (x) V`: `delta^a_c delta^b_d`.
    pub fn identity_op(n: usize) -> Tensor {
        let mut t = Tensor::new(vec![n, n, n, n]);
        for a in 0..n {
            for b in 0..n {
                t.set(&[a, b, a, b], Scalar::one());
            }
        }
        t
    }

    /// Operator composition on `V (x) V` (see module docs for conventions).
    pub fn compose_op(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.contract(other, &[(2, 0), (3, 1)])
    }

    /// Trace of a 4-index operator: `sum_{ab} T^{ab}_{ab}`.
    pub fn trace_op(&self) -> Scalar {
        let mut acc = Scalar::zero();
        for (k, v) in &self.entries {
            if k[0] == k[2] && k[1] == k[3] {
                acc = &acc + v;
            }
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// constructors
// ---------------------------------------------------------------------------

/// Sign function with values in {-1, 0, 1}, as a q-exponent helper.
fn sign(d: i64) -> i64 {
    d.signum()
}

/// The multiparameter GL_q(N) R-matrix (or its inverse for `sign = -1`):
/// `(R^{+-1})^{ab}_{cd} = delta^a_c delta^b_d [q^{+-1} - q^{sgn(a-b)}] + r(ab) delta^a_d delta^b_c`.
pub fn build_glq_rmatrix(n: usize, sgn: i8, r: &RParams) -> Tensor {
    assert!(n >= 1);
    assert!(sgn == 1 || sgn == -1);
    let mut t = Tensor::new(vec![n, n, n, n]);
    for a in 0..n {
        for b in 0..n {
            let diag = &Scalar::q_pow(sgn as i64) - &Scalar::q_pow(sign(a as i64 - b as i64));
            t.add_to(&[a, b, a, b], &diag);
            t.add_to(&[a, b, b, a], &r.scalar(a, b));
        }
    }
    t
}

/// Deformed antisymmetric symbol with upper indices:
/// `eps^{01} = 1/sqrt(q)`, `eps^{10} = -sqrt(q)` (0-based).
pub fn epsilon2_upper() -> Tensor {
    let mut t = Tensor::new(vec![2, 2]);
    t.set(&[0, 1], Scalar::s_pow(-1));
    t.set(&[1, 0], -&Scalar::s_pow(1));
    t
}

/// Lower-index companion: `eps_{01} = -1/sqrt(q)`, `eps_{10} = sqrt(q)`.
pub fn epsilon2_lower() -> Tensor {
    epsilon2_upper().scale(&Scalar::from_int(-1))
}

/// The SL_q(2) R-matrix `q delta delta + eps^{ab} eps_{cd}`.
pub fn build_slq2_rmatrix() -> Tensor {
    let up = epsilon2_upper();
    let lo = epsilon2_lower();
    let mut t = Tensor::new(vec![2, 2, 2, 2]);
    for a in 0..2 {
        for b in 0..2 {
            t.add_to(&[a, b, a, b], &Scalar::q());
            for c in 0..2 {
                for d in 0..2 {
                    t.add_to(&[a, b, c, d], &(&up.get(&[a, b]) * &lo.get(&[c, d])));
               }
            }
        }
    }
    t
}

/// Charge conjugation for the Euclidean conformal structure: an epsilon
/// block pairing the two 2-component spinor halves of the 4D index (rows in
/// one half meet columns in the other). This placement satisfies C^2 = -I
/// and makes the standard R-matrix self-conjugate under the C-sandwich;
/// keeping both epsilon blocks on the diagonal does not.
pub fn build_charge_conjugation() -> Tensor {
    let up = epsilon2_upper();
    let mut t = Tensor::new(vec![4, 4]);
    for a in 0..2 {
        for b in 0..2 {
            t.set(&[a, 2 + b], up.get(&[a, b]));
            t.set(&[2 + a, b], up.get(&[a, b]));
        }
    }
    t
}

/// Deformed epsilon symbol for GL_q(4): supported on permutations of
/// (0,1,2,3), normalized by `eps_q^{0123} = 1`, with the neighbor-swap rule
/// `eps^{..ab..} = -q^{sgn(b-a)} r(ba) eps^{..ba..}` propagated by search.
/// Errors if two reduction paths disagree (cannot happen when r(ab)r(ba)=1).
pub fn build_epsilon_q(r: &RParams) -> Result<Tensor, TensorError> {
    let mut t = Tensor::new(vec![4, 4, 4, 4]);
    let start = vec![0usize, 1, 2, 3];
    let mut values: HashMap<Vec<usize>, Scalar> = HashMap::new();
    values.insert(start.clone(), Scalar::one());
    let mut queue = VecDeque::from([start]);
    while let Some(w) = queue.pop_front() {
        let val = values[&w].clone();
        for i in 0..3 {
            let (a, b) = (w[i], w[i + 1]);
            let mut w2 = w.clone();
            w2.swap(i, i + 1);
            // eps(w) = -q^{sgn(b-a)} r(b,a) eps(w2)  =>  solve for eps(w2)
            let coeff = &Scalar::q_pow(sign(b as i64 - a as i64)) * &r.scalar(b, a);
            let v2 = -&val.div(&coeff).expect("swap coefficient is a unit");
            match values.get(&w2) {
                Some(known) => {
                    if known != &v2 {
                        return Err(TensorError::InconsistentSymbol(w2));
                    }
                }
                None => {
                    values.insert(w2.clone(), v2);
                    queue.push_back(w2);
                }
            }
        }
    }
    for (k, v) in values {
        t.set(&k, v);
    }
    Ok(t)
}

/// The block R-matrix for the enlarged GL_q(N+2p) frame space, assembled
/// exactly as displayed (gauge block `R_N`, Hecke-type mixed blocks, and a
/// twistor block `delta^A_D delta^B_C R2^{ab}_{cd}`). Whether it satisfies
/// the Hecke relation for p >= 2 is a question for the checks, not assumed.
pub fn build_adhm_rmatrix(n: usize, p: usize) -> Tensor {
    assert!(n >= 1 && p >= 1);
    let m = n + 2 * p;
    let r_n = build_glq_rmatrix(n, 1, &RParams::Ones);
    let r2 = build_slq2_rmatrix();
    let lam = Scalar::lambda();
    // index split: gauge i < n; twistor index I >= n decodes as (A, alpha)
    let dec = |i: usize| -> Option<(usize, usize)> {
        (i >= n).then(|| ((i - n) / 2, (i - n) % 2))
    };
    let mut t = Tensor::new(vec![m, m, m, m]);
    for iu in 0..m {
        for ku in 0..m {
            for ml in 0..m {
                for nl in 0..m {
                    let v = match (dec(iu), dec(ku), dec(ml), dec(nl)) {
                        (None, None, None, None) => r_n.get(&[iu, ku, ml, nl]),
                        (Some((a, al)), None, Some((c, mu)), None) => {
                            if a == c && al == mu && ku == nl {
                                lam.clone()
                            } else {
                                Scalar::zero()
                            }
                        }
                        (Some((a, al)), None, None, Some((d, nu))) => {
                            if a == d && al == nu && ku == ml {
                                Scalar::one()
                            } else {
                                Scalar::zero()
                            }
                        }
                        (None, Some((b, be)), Some((c, mu)), None) => {
                            if iu == nl && b == c && be == mu {
                                Scalar::one()
                            } else {
                                Scalar::zero()
                            }
                        }
                        (Some((a, al)), Some((b, be)), Some((c, mu)), Some((d, nu))) => {
                            if a == d && b == c {
                                r2.get(&[al, be, mu, nu])
                            } else {
                                Scalar::zero()
                            }
                        }
                        _ => Scalar::zero(),
                    };
                    if !v.is_zero() {
                        t.set(&[iu, ku, ml, nl], v);
                    }
                }
            }
        }
    }
    t
}

// ---------------------------------------------------------------------------
// checks
// ---------------------------------------------------------------------------

fn lift12(r: &Tensor, n: usize) -> Tensor {
    let mut t = Tensor::new(vec![n; 6]);
    for (k, v) in r.entries() {
        for c in 0..n {
            t.set(&[k[0], k[1], c, k[2], k[3], c], v.clone());
        }
    }
    t
}

fn lift23(r: &Tensor, n: usize) -> Tensor {
    let mut t = Tensor::new(vec![n; 6]);
    for (k, v) in r.entries() {
        for a in 0..n {
            t.set(&[a, k[0], k[1], a, k[2], k[3]], v.clone());
        }
    }
    t
}

fn compose6(a: &Tensor, b: &Tensor) -> Tensor {
    a.contract(b, &[(3, 0), (4, 1), (5, 2)]).expect("shape checked")
}

/// Residual of the braid relation `R12 R23 R12 - R23 R12 R23` on `V^{(x)3}`.
pub fn check_yang_baxter(r: &Tensor) -> Result<Tensor, TensorError> {
    let n = op_dim(r)?;
    let a = lift12(r, n);
    let b = lift23(r, n);
    let lhs = compose6(&compose6(&a, &b), &a);
    let rhs = compose6(&compose6(&b, &a), &b);
    Ok(lhs.sub(&rhs))
}

/// Residual of the Hecke relation `R^2 - I - (q - q^{-1}) R`.
pub fn check_hecke(r: &Tensor) -> Result<Tensor, TensorError> {
    let n = op_dim(r)?;
    let rr = r.compose_op(r)?;
    Ok(rr
        .sub(&Tensor::identity_op(n))
        .sub(&r.scale(&Scalar::lambda())))
}

fn op_dim(r: &Tensor) -> Result<usize, TensorError> {
    let d = r.dims();
    if d.len() != 4 || d.iter().any(|&x| x != d[0]) {
        return Err(TensorError::DimensionMismatch(format!(
            "expected a 4-index operator with equal dims, got {:?}",
            d
        )));
    }
    Ok(d[0])
}

/// Spectral projectors of a Hecke R-matrix:
/// `P+ = (R + q^{-1} I)/(q + q^{-1})`, `P- = (q I - R)/(q + q^{-1})`.
pub fn projectors(r: &Tensor) -> Result<(Tensor, Tensor), TensorError> {
    let hecke = check_hecke(r)?;
    if !hecke.is_zero() {
        return Err(TensorError::HeckeViolated(hecke.term_count()));
    }
    let n = op_dim(r)?;
    let id = Tensor::identity_op(n);
    let denom = &Scalar::q() + &Scalar::q_pow(-1);
    let inv = denom.inv()?;
    let plus = r.add(&id.scale(&Scalar::q_pow(-1))).scale(&inv);
    let minus = id.scale(&Scalar::q()).sub(r).scale(&inv);
    Ok((plus, minus))
}

/// Residual of the epsilon/R compatibility identity for the standard (r = 1)
/// GL_q(4) R-matrix:
/// `eps_q^{abcd} R^{a'h}_{ea} R^{b'e}_{fb} R^{c'f}_{gc} R^{d'g}_{h'd}
///  - q delta^h_{h'} eps_q^{a'b'c'd'}`, a 6-index residual
/// on `(a', b', c', d', h, h')`.
pub fn check_epsilon_r_identity(r: &RParams) -> Result<Tensor, TensorError> {
    let eps = build_epsilon_q(r)?;
    let rm = build_glq_rmatrix(4, 1, r);
    // t1^{a' b c d h e} = eps^{abcd} R^{a'h}_{ea}
    let t1 = eps.contract(&rm, &[(0, 3)])?;
    // contract b with R^{b'e}_{fb}: pair t1 axis(b)=0 with rm axis 3, and e: t1 axis 4? careful:
    // t1 axes: (b, c, d, a', h, e). next: sum over b and e with R^{b'e}_{fb}
    let t2 = t1.contract(&rm, &[(0, 3), (5, 1)])?;
    // t2 axes: (c, d, a', h, b', f); contract c and f with R^{c'f}_{gc}
    let t3 = t2.contract(&rm, &[(0, 3), (5, 1)])?;
    // t3 axes: (d, a', h, b', c', g); contract d and g with R^{d'g}_{h'd}
    let t4 = t3.contract(&rm, &[(0, 3), (5, 1)])?;
    // t4 axes: (a', h, b', c', d', h')
    let mut lhs = Tensor::new(vec![4; 6]);
    for (k, v) in t4.entries() {
        // reorder to (a', b', c', d', h, h')
        lhs.add_to(&[k[0], k[2], k[3], k[4], k[1], k[5]], v);
    }
    let eps1 = build_epsilon_q(r)?;
    let mut rhs = Tensor::new(vec![4; 6]);
    for (k, v) in eps1.entries() {
        for h in 0..4 {
            rhs.add_to(&[k[0], k[1], k[2], k[3], h, h], &(v * &Scalar::q()));
        }
    }
    Ok(lhs.sub(&rhs))
}

/// One named residual from a reality-structure verification.
#[derive(Clone, Debug)]
pub struct ResidualCheck {
    pub name: String,
    pub residual_terms: usize,
}

impl ResidualCheck {
    pub fn passed(&self) -> bool {
        self.residual_terms == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RealityMode {
    /// |q| = 1, |r| = 1: conjugation is the formal involution `s -> 1/s`,
    /// `r -> r^{-1}`.
    PseudoEuclidean,
    /// real q: conjugation fixes scalars; the charge-conjugation matrix
    /// carries the structure.
    Euclidean,
}

/// Verifies the reality-structure identities. Pseudo-Euclidean mode checks
/// that conjugating the 4D and 2D R-matrices gives the transposed inverses;
/// Euclidean mode checks the epsilon/charge-conjugation properties.
pub fn check_reality(mode: RealityMode) -> Result<Vec<ResidualCheck>, TensorError> {
    let mut out = Vec::new();
    match mode {
        RealityMode::PseudoEuclidean => {
            // conj(R^{ab}_{cd}) = (R^{-1})^{ba}_{dc} for the multiparameter R
            let r = build_glq_rmatrix(4, 1, &RParams::Symbolic);
            let rinv = build_glq_rmatrix(4, -1, &RParams::Symbolic);
            let mut resid = Tensor::new(vec![4; 4]);
            for (k, v) in r.entries() {
                resid.add_to(k, &v.conjugate());
            }
            for (k, v) in rinv.entries() {
                resid.add_to(&[k[1], k[0], k[3], k[2]], &(-v));
            }
            out.push(ResidualCheck {
                name: "conjugated 4D R-matrix equals transposed inverse".into(),
                residual_terms: resid.term_count(),
            });

            let r2 = build_slq2_rmatrix();
            let r2inv = r2.sub(&Tensor::identity_op(2).scale(&Scalar::lambda()));
            let mut resid2 = Tensor::new(vec![2; 4]);
            for (k, v) in r2.entries() {
                resid2.add_to(k, &v.conjugate());
            }
            for (k, v) in r2inv.entries() {
                resid2.add_to(&[k[1], k[0], k[3], k[2]], &(-v));
            }
            out.push(ResidualCheck {
                name: "conjugated 2D R-matrix equals transposed inverse".into(),
                residual_terms: resid2.term_count(),
            });
        }
        RealityMode::Euclidean => {
            let c = build_charge_conjugation();
            // conj(C) = C holds identically for real q: entries are +-s^{+-1}
            // with real coefficients, so the content is C^2 = -I.
            let c2 = c.contract(&c, &[(1, 0)])?;
            let mut resid = c2.clone();
            for a in 0..4 {
                resid.add_to(&[a, a], &Scalar::one());
            }
            out.push(ResidualCheck {
                name: "charge conjugation squares to -I".into(),
                residual_terms: resid.term_count(),
            });

            // eps with upper indices equals minus eps with lower indices
            let resid_eps = epsilon2_upper().add(&epsilon2_lower());
            out.push(ResidualCheck {
                name: "epsilon upper = -epsilon lower (real q)".into(),
                residual_terms: resid_eps.term_count(),
            });

            // double conjugation pattern: -eps^{ab} eps_{bc} (C^2)^d_a = delta
            let prod = epsilon2_upper().contract(&epsilon2_lower(), &[(1, 0)])?;
            let mut resid_dc = Tensor::new(vec![2, 2]);
            for (k, v) in prod.entries() {
                // C^2 = -I, so -eps eps' C^2 = +eps eps'
                resid_dc.add_to(k, v);
            }
            for a in 0..2 {
                resid_dc.add_to(&[a, a], &(-&Scalar::one()));
            }
            out.push(ResidualCheck {
                name: "double conjugation is the identity".into(),
                residual_terms: resid_dc.term_count(),
            });

            // R^{dc}_{ba} = C^d_e C^c_f R^{fe}_{gh} C^g_a C^h_b for real q
            let r = build_glq_rmatrix(4, 1, &RParams::Ones);
            let sandwich = conjugate_r_by_c(&r, &c)?;
            let resid_r = r.sub(&sandwich);
            out.push(ResidualCheck {
                name: "R-matrix is self-conjugate under charge conjugation".into(),
                residual_terms: resid_r.term_count(),
            });
        }
    }
    Ok(out)
}

/// `T^{dc}_{ba} = C^d_e C^c_f R^{fe}_{gh} C^g_a C^h_b`.
fn conjugate_r_by_c(r: &Tensor, c: &Tensor) -> Result<Tensor, TensorError> {
    // step 1: sum over f: C^c_f R^{fe}_{gh} -> axes (c, e, g, h)
    let t1 = c.contract(r, &[(1, 0)])?;
    // step 2: sum over e: C^d_e t1^{c e g h} -> axes (d, c, g, h)
    let t2 = c.contract(&t1, &[(1, 1)])?;
    // t2 axes: (d, c, g, h); step 3: sum over g with C^g_a -> (d, c, h, a)
    let t3 = t2.contract(c, &[(2, 0)])?;
    // step 4: sum over h with C^h_b -> (d, c, a, b)
    let t4 = t3.contract(c, &[(2, 0)])?;
    // reorder to R-layout (d, c, b, a): T^{dc}_{ba}
    let mut out = Tensor::new(vec![4; 4]);
    for (k, v) in t4.entries() {
        out.add_to(&[k[0], k[1], k[3], k[2]], v);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// dumps
// ---------------------------------------------------------------------------

/// Line-oriented dump: one `i,j,... -> scalar` record per nonzero entry,
/// sorted, 1-based indices. Byte-stable for a fixed tensor.
pub fn write_dump(t: &Tensor) -> String {
    let mut s = String::new();
    for (k, v) in t.entries() {
        let idx: Vec<String> = k.iter().map(|&i| (i + 1).to_string()).collect();
        let _ = writeln!(s, "{} -> {}", idx.join(","), v);
    }
    s
}

/// JSON manifest accompanying a dump file.
pub fn manifest_json(name: &str, t: &Tensor, params: &str) -> String {
    format!(
        "{{\"name\":\"{}\",\"dims\":{:?},\"nonzeros\":{},\"params\":\"{}\"}}\n",
        name,
        t.dims(),
        t.nnz(),
        params
    )
}

/// Parses the dump format back; exact round-trip with [`write_dump`].
pub fn parse_dump(dims: Vec<usize>, body: &str) -> Result<Tensor, TensorError> {
    let mut t = Tensor::new(dims);
    for (lineno, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (idx_part, val_part) = line
            .split_once("->")
            .ok_or_else(|| TensorError::DumpParse(format!("line {}: missing ->", lineno + 1)))?;
        let mut idx = Vec::new();
        for tok in idx_part.trim().split(',') {
            let v: usize = tok
                .trim()
                .parse()
                .map_err(|_| TensorError::DumpParse(format!("line {}: bad index", lineno + 1)))?;
            if v == 0 {
                return Err(TensorError::DumpParse(format!(
                    "line {}: indices are 1-based",
                    lineno + 1
                )));
            }
            idx.push(v - 1);
        }
        let scalar = parse_scalar(val_part.trim())
            .map_err(|e| TensorError::DumpParse(format!("line {}: {}", lineno + 1, e)))?;
        t.set(&idx, scalar);
    }
    Ok(t)
}

/// Evaluate every entry at a full parameter assignment, returning the tensor
/// of exact rational values (still as scalars).
pub fn evaluate_tensor(t: &Tensor, a: &ParamAssignment) -> Result<Tensor, TensorError> {
    let mut out = Tensor::new(t.dims().to_vec());
    for (k, v) in t.entries() {
        out.set(k, Scalar::from_rat(v.evaluate(a)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::Scalar;

    fn q() -> Scalar {
        Scalar::q()
    }

    #[test]
    fn glq2_standard_entries() {
        let r = build_glq_rmatrix(2, 1, &RParams::Ones);
        assert_eq!(r.get(&[0, 0, 0, 0]), q());
        assert_eq!(r.get(&[0, 1, 0, 1]), Scalar::lambda());
        assert_eq!(r.get(&[0, 1, 1, 0]), Scalar::one());
        assert_eq!(r.get(&[1, 0, 0, 1]), Scalar::one());
        assert!(r.get(&[1, 0, 1, 0]).is_zero());
        assert_eq!(r.get(&[1, 1, 1, 1]), q());
    }

    #[test]
    fn glq_unitary_limit_is_permutation() {
        // q = 1, r = 1: R is the permutation matrix and R^2 = I
        let r = build_glq_rmatrix(3, 1, &RParams::Ones);
        let one = num::BigRational::from_integer(1.into());
        let r1 = r.eval_s(&one).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(r1.get(&[a, b, b, a]), Scalar::one());
            }
        }
        assert_eq!(r1.nnz(), 9);
        let sq = r1.compose_op(&r1).unwrap();
        assert!(sq.sub(&Tensor::identity_op(3)).is_zero());
    }

    #[test]
    fn glq_inverse_composes_to_identity() {
        for n in [2, 3] {
            let r = build_glq_rmatrix(n, 1, &RParams::Symbolic);
            let rinv = build_glq_rmatrix(n, -1, &RParams::Symbolic);
            let prod = r.compose_op(&rinv).unwrap();
            assert!(prod.sub(&Tensor::identity_op(n)).is_zero());
        }
    }

    #[test]
    fn slq2_matches_glq2_at_r_one() {
        let a = build_slq2_rmatrix();
        let b = build_glq_rmatrix(2, 1, &RParams::Ones);
        assert!(a.sub(&b).is_zero());
        // the q + (-sqrt q)(sqrt q) cancellation
        assert!(a.get(&[1, 0, 1, 0]).is_zero());
    }

    #[test]
    fn epsilon_contraction_is_plus_delta() {
        // sum_b eps^{ab} eps_{bc} = +delta^a_c with these conventions
        // (this is what makes double conjugation the identity).
        let t = epsilon2_upper()
            .contract(&epsilon2_lower(), &[(1, 0)])
            .unwrap();
        assert!(t.sub(&{
            let mut id = Tensor::new(vec![2, 2]);
            id.set(&[0, 0], Scalar::one());
            id.set(&[1, 1], Scalar::one());
            id
        })
        .is_zero());
    }

    #[test]
    fn yang_baxter_holds_symbolically() {
        for n in [2, 3, 4] {
            let r = build_glq_rmatrix(n, 1, &RParams::Symbolic);
            assert!(check_yang_baxter(&r).unwrap().is_zero(), "YBE failed at N={n}");
        }
    }

    #[test]
    fn yang_baxter_negative_control() {
        let mut r = build_glq_rmatrix(2, 1, &RParams::Ones);
        r.add_to(&[0, 0, 0, 0], &Scalar::one());
        assert!(!check_yang_baxter(&r).unwrap().is_zero());
    }

    #[test]
    fn hecke_holds_symbolically() {
        for n in [2, 3, 4] {
            let r = build_glq_rmatrix(n, 1, &RParams::Symbolic);
            assert!(check_hecke(&r).unwrap().is_zero(), "Hecke failed at N={n}");
        }
    }

    #[test]
    fn hecke_two_by_two_block() {
        // on basis {e_a e_b, e_b e_a} (a < b) the R action is
        // [[lambda, r(ab)], [r(ba), 0]] and squares to I + lambda M
        let r = build_glq_rmatrix(4, 1, &RParams::Symbolic);
        let (a, b) = (0usize, 2usize);
        let m = [
            [r.get(&[a, b, a, b]), r.get(&[a, b, b, a])],
            [r.get(&[b, a, a, b]), r.get(&[b, a, b, a])],
        ];
        assert_eq!(m[0][0], Scalar::lambda());
        assert!(m[1][1].is_zero());
        // m^2 == I + lambda m on the block
        let lam = Scalar::lambda();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Scalar::zero();
                for k in 0..2 {
                    acc = &acc + &(&m[i][k] * &m[k][j]);
                }
                let mut expect = &lam * &m[i][j];
                if i == j {
                    expect = &expect + &Scalar::one();
                }
                assert_eq!(acc, expect);
            }
        }
    }

    #[test]
    fn projector_properties() {
        for n in [2usize, 4] {
            let r = build_glq_rmatrix(n, 1, &RParams::Symbolic);
            let (p, m) = projectors(&r).unwrap();
            let id = Tensor::identity_op(n);
            assert!(p.add(&m).sub(&id).is_zero());
            assert!(p.compose_op(&p).unwrap().sub(&p).is_zero());
            assert!(m.compose_op(&m).unwrap().sub(&m).is_zero());
            assert!(p.compose_op(&m).unwrap().is_zero());
            // R = q P+ - q^{-1} P-
            let spectral = p.scale(&Scalar::q()).sub(&m.scale(&Scalar::q_pow(-1)));
            assert!(spectral.sub(&r).is_zero());
            // traces equal the classical symmetric/antisymmetric dimensions
            let np = n * (n + 1) / 2;
            let nm = n * (n - 1) / 2;
            assert_eq!(p.trace_op(), Scalar::from_int(np as i64));
            assert_eq!(m.trace_op(), Scalar::from_int(nm as i64));
        }
    }

    #[test]
    fn trace_of_r_spectral_form() {
        for n in [2usize, 3, 4] {
            let r = build_glq_rmatrix(n, 1, &RParams::Symbolic);
            let np = Scalar::from_int((n * (n + 1) / 2) as i64);
            let nm = Scalar::from_int((n * (n - 1) / 2) as i64);
            let expect = &(&Scalar::q() * &np) - &(&Scalar::q_pow(-1) * &nm);
            assert_eq!(r.trace_op(), expect);
        }
    }

    #[test]
    fn projectors_reject_non_hecke() {
        let mut r = build_glq_rmatrix(2, 1, &RParams::Ones);
        r.add_to(&[0, 0, 0, 0], &Scalar::one());
        assert!(matches!(projectors(&r), Err(TensorError::HeckeViolated(_))));
    }

    #[test]
    fn epsilon_q_normalization_and_swap() {
        let eps = build_epsilon_q(&RParams::Symbolic).unwrap();
        assert_eq!(eps.nnz(), 24);
        assert!(eps.get(&[0, 1, 2, 3]).is_one());
        // one swap: eps^{1023} = -q^{-1} r(0,1) * eps^{0123} (0-based)
        let expect = -&(&Scalar::q_pow(-1) * &Scalar::r_param(0, 1));
        assert_eq!(eps.get(&[1, 0, 2, 3]), expect);
        // double swap returns to start: verified by construction (BFS
        // consistency); spot-check the coefficient product is 1
        let c1 = &Scalar::q_pow(1) * &Scalar::r_param(1, 0);
        let c2 = &Scalar::q_pow(-1) * &Scalar::r_param(0, 1);
        assert!((&(-&c1) * &(-&c2)).is_one());
    }

    #[test]
    fn epsilon_r_identity_standard() {
        let resid = check_epsilon_r_identity(&RParams::Ones).unwrap();
        assert!(resid.is_zero());
    }

    #[test]
    fn epsilon_r_identity_q_one() {
        let resid = check_epsilon_r_identity(&RParams::Ones).unwrap();
        let one = num::BigRational::from_integer(1.into());
        assert!(resid.eval_s(&one).unwrap().is_zero());
    }

    #[test]
    fn epsilon_r_identity_generic_r_reported() {
        // with a nontrivial multiparameter the identity is only asserted for
        // the standard case; just record that the residual is computable
        let mut vals = BTreeMap::new();
        vals.insert((0u8, 1u8), num::BigRational::new(2.into(), 3.into()));
        let resid = check_epsilon_r_identity(&RParams::Values(vals)).unwrap();
        // expected nonzero in general; do not assert zero here
        let _ = resid.term_count();
    }

    #[test]
    fn reality_checks_pass() {
        for c in check_reality(RealityMode::PseudoEuclidean).unwrap() {
            assert!(c.passed(), "failed: {}", c.name);
        }
        for c in check_reality(RealityMode::Euclidean).unwrap() {
            assert!(c.passed(), "failed: {}", c.name);
        }
    }

    #[test]
    fn adhm_rmatrix_blocks() {
        let n = 2;
        let p = 1;
        let t = build_adhm_rmatrix(n, p);
        let rn = build_glq_rmatrix(n, 1, &RParams::Ones);
        // gauge block restriction
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        assert_eq!(t.get(&[a, b, c, d]), rn.get(&[a, b, c, d]));
                    }
                }
            }
        }
        // twistor block restriction = slq2 R on spinor labels
        let r2 = build_slq2_rmatrix();
        for al in 0..2 {
            for be in 0..2 {
                for mu in 0..2 {
                    for nu in 0..2 {
                        assert_eq!(
                            t.get(&[n + al, n + be, n + mu, n + nu]),
                            r2.get(&[al, be, mu, nu])
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn adhm_rmatrix_hecke_p1() {
        // for p = 1 the displayed block matrix is Hecke and braid-consistent
        let t = build_adhm_rmatrix(2, 1);
        assert!(check_hecke(&t).unwrap().is_zero());
        assert!(check_yang_baxter(&t).unwrap().is_zero());
        let t11 = build_adhm_rmatrix(1, 1);
        assert!(check_hecke(&t11).unwrap().is_zero());
    }

    #[test]
    fn adhm_rmatrix_hecke_p2_reported() {
        // as printed, the twistor block does not close the Hecke relation
        // once p >= 2; the suite reports this rather than silently fixing it
        let t = build_adhm_rmatrix(1, 2);
        let resid = check_hecke(&t).unwrap();
        assert!(!resid.is_zero());
    }

    #[test]
    fn dump_roundtrip_and_counts() {
        let r = build_glq_rmatrix(4, 1, &RParams::Symbolic);
        // 4 diagonal q entries + 6 lambda entries + 12 swap entries
        assert_eq!(r.nnz(), 22);
        let eps = build_epsilon_q(&RParams::Symbolic).unwrap();
        assert_eq!(eps.nnz(), 24);
        for t in [&r, &eps] {
            let body = write_dump(t);
            let back = parse_dump(t.dims().to_vec(), &body).unwrap();
            assert_eq!(&back, t);
            assert_eq!(write_dump(&back), body);
        }
    }

    #[test]
    fn contract_identity() {
        let id = Tensor::identity_op(4);
        let prod = id.compose_op(&id).unwrap();
        assert!(prod.sub(&id).is_zero());
    }

    #[test]
    fn contract_dimension_mismatch() {
        let a = Tensor::identity_op(2);
        let b = Tensor::identity_op(3);
        assert!(matches!(
            a.contract(&b, &[(2, 0)]),
            Err(TensorError::DimensionMismatch(_))
        ));
    }
}
