//! Free graded algebra over typed generator alphabets, relation ideals with
//! tensor coefficients, and normal-form reduction.
//!
//! The engine compiles each homogeneous graded component of the relation set
//! into oriented rewrite rules by exact row reduction over the scalar field:
//! the pivot (largest word in the monomial order) of each reduced row
//! rewrites to strictly smaller words, so reduction terminates. Degree-
//! lowering contraction relations (frame completeness `u ub = delta`,
//! inverse-pair collapses) go through the same compiler; they are the only
//! inhomogeneous rules admitted.
//!
//! Reduction by these rules is sound by construction: every rewrite replaces
//! a subword by an ideal-equal polynomial, so a zero normal form is a proof
//! of ideal membership. Completeness (confluence) is evidenced separately:
//! graded dimensions computed by the independent full-component row
//! reduction ([`AlgebraContext::pbw_dimension`]) match classical counts, and
//! every relation reduces to zero.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use thiserror::Error;

use crate::coeff::{parse_scalar, CoeffError, Scalar};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum NcError {
    #[error("relation is not homogeneous: {0}")]
    InhomogeneousRelation(String),
    #[error("word length {0} exceeds degree cap {1}")]
    DegreeCapExceeded(usize, usize),
    #[error("no invertible pivot available in component {0}; symbolic pivot degenerates")]
    NonInvertiblePivot(String),
    #[error("graded dimension undefined: context has contraction rules")]
    ContractionsPresent,
    #[error("unknown generator {0}")]
    UnknownGenerator(String),
    #[error("reduction stuck: {0}")]
    ReductionStuck(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
}

/// Generator families. Parameters: `B(p)`, `X(p)`, `XInv(p, k)` carry the
/// moduli label `p` (0-based) and inverse power `k >= 1`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Family {
    /// twistor coordinate `z^alpha_a`
    Z,
    /// its differential
    Dz,
    /// partial derivative symbol (operator algebra checks only)
    Pd,
    /// t'Hooft modulus `b^p_{ab}`
    B(u8),
    /// central element `X_p`
    X(u8),
    /// formal inverse power `X_p^{-k}`
    XInv(u8, u8),
    /// potential sum and its opaque inverse
    Phi,
    PhiInv,
    /// frame twistor `u^i_I` and its right inverse `ut^I_i`
    U,
    Ut,
    Du,
    Dut,
    /// linear twistor functions `v`, `vt` and their differentials
    V,
    Vt,
    Dv,
    Dvt,
    /// instanton moduli `bm^{aA}_I`, `bt^{aIA}`
    Bm,
    Bt,
    /// central moduli pairing matrix and its inverse
    G,
    Gi,
}

impl Family {
    pub fn arity(&self) -> usize {
        match self {
            Family::Z | Family::Dz | Family::Pd => 2,
            Family::B(_) => 2,
            Family::X(_) | Family::XInv(..) | Family::Phi | Family::PhiInv => 0,
            Family::U | Family::Ut | Family::Du | Family::Dut => 2,
            Family::V | Family::Vt | Family::Dv | Family::Dvt => 3,
            Family::Bm | Family::Bt => 3,
            Family::G | Family::Gi => 2,
        }
    }

    pub fn form_degree(&self) -> u8 {
        matches!(
            self,
            Family::Dz | Family::Du | Family::Dut | Family::Dv | Family::Dvt
        ) as u8
    }

    pub fn name(&self) -> String {
        match self {
            Family::Z => "z".into(),
            Family::Dz => "dz".into(),
            Family::Pd => "pd".into(),
            Family::B(p) => format!("b{}", p + 1),
            Family::X(p) => format!("X{}", p + 1),
            Family::XInv(p, k) => format!("Xi{}_{}", p + 1, k),
            Family::Phi => "Phi".into(),
            Family::PhiInv => "PhiI".into(),
            Family::U => "u".into(),
            Family::Ut => "ut".into(),
            Family::Du => "du".into(),
            Family::Dut => "dut".into(),
            Family::V => "v".into(),
            Family::Vt => "vt".into(),
            Family::Dv => "dv".into(),
            Family::Dvt => "dvt".into(),
            Family::Bm => "bm".into(),
            Family::Bt => "bt".into(),
            Family::G => "g".into(),
            Family::Gi => "gi".into(),
        }
    }
}

/// One typed generator: family plus up to three 0-based indices.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct GenSym {
    pub family: Family,
    pub idx: [u8; 3],
}

impl GenSym {
    pub fn new(family: Family, idx: &[u8]) -> Self {
        assert_eq!(idx.len(), family.arity(), "index arity mismatch for {:?}", family);
        let mut a = [0u8; 3];
        a[..idx.len()].copy_from_slice(idx);
        GenSym { family, idx: a }
    }

    pub fn indices(&self) -> &[u8] {
        &self.idx[..self.family.arity()]
    }
}

impl fmt::Display for GenSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family.name())?;
        let ix = self.indices();
        if !ix.is_empty() {
            let parts: Vec<String> = ix.iter().map(|&i| (i + 1).to_string()).collect();
            write!(f, "[{}]", parts.join(","))?;
        }
        Ok(())
    }
}

/// A word in generator codes. Ordered by length first, then lexicographically
/// by code; codes are assigned in registration order, so this is the graded
/// (length, letter-precedence) monomial order of the context.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Word(pub Vec<u32>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    fn splice(&self, pos: usize, len: usize, insert: &Word) -> Word {
        let mut v = Vec::with_capacity(self.0.len() - len + insert.0.len());
        v.extend_from_slice(&self.0[..pos]);
        v.extend_from_slice(&insert.0);
        v.extend_from_slice(&self.0[pos + len..]);
        Word(v)
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Finite linear combination of words with scalar coefficients.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct NcPoly {
    pub terms: BTreeMap<Word, Scalar>,
}

impl NcPoly {
    pub fn zero() -> Self {
        NcPoly::default()
    }

    pub fn constant(c: Scalar) -> Self {
        let mut p = NcPoly::zero();
        p.add_term(Word::empty(), c);
        p
    }

    pub fn one() -> Self {
        NcPoly::constant(Scalar::one())
    }

    pub fn gen(code: u32) -> Self {
        let mut p = NcPoly::zero();
        p.add_term(Word(vec![code]), Scalar::one());
        p
    }

    pub fn word(w: Word, c: Scalar) -> Self {
        let mut p = NcPoly::zero();
        p.add_term(w, c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn add_term(&mut self, w: Word, c: Scalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(w) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = &*e.get() + &c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &NcPoly) -> NcPoly {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &NcPoly) -> NcPoly {
        self.add(&other.scale(&Scalar::from_int(-1)))
    }

    pub fn scale(&self, c: &Scalar) -> NcPoly {
        if c.is_zero() {
            return NcPoly::zero();
        }
        let mut out = NcPoly::zero();
        for (w, v) in &self.terms {
            out.add_term(w.clone(), v * c);
        }
        out
    }

    /// Free product: concatenation without reduction.
    pub fn mul(&self, other: &NcPoly) -> NcPoly {
        let mut out = NcPoly::zero();
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                out.add_term(w1.concat(w2), c1 * c2);
            }
        }
        out
    }

    pub fn leading(&self) -> Option<(&Word, &Scalar)> {
        self.terms.iter().next_back()
    }

    /// Replace every letter matching `subst` by the given polynomial
    /// (free product, unreduced); letters mapping to `None` are kept.
    pub fn substitute(&self, subst: &dyn Fn(u32) -> Option<NcPoly>) -> NcPoly {
        let mut out = NcPoly::zero();
        for (w, c) in &self.terms {
            let mut acc = NcPoly::constant(c.clone());
            for &code in &w.0 {
                let factor = subst(code).unwrap_or_else(|| NcPoly::gen(code));
                acc = acc.mul(&factor);
            }
            out = out.add(&acc);
        }
        out
    }
}

/// Per-family letter counts of a word; the grading used for homogeneity.
pub type MultiDeg = BTreeMap<Family, usize>;

fn multideg(ctx_gens: &[GenSym], w: &Word) -> MultiDeg {
    let mut md = MultiDeg::new();
    for &c in &w.0 {
        *md.entry(ctx_gens[c as usize].family).or_insert(0) += 1;
    }
    md
}

/// Compiled algebra: generator roster, rewrite rules, and the raw relation
/// list kept for the independent graded-dimension computation.
pub struct AlgebraContext {
    gens: Vec<GenSym>,
    codes: HashMap<GenSym, u32>,
    by_family: HashMap<Family, Vec<u32>>,
    rules: HashMap<Vec<u32>, NcPoly>,
    max_lhs: usize,
    degree_cap: usize,
    relations: Vec<NcPoly>,
    contraction_families: Vec<Family>,
}

impl AlgebraContext {
    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    pub fn gens(&self) -> &[GenSym] {
        &self.gens
    }

    pub fn sym(&self, code: u32) -> &GenSym {
        &self.gens[code as usize]
    }

    pub fn code(&self, g: &GenSym) -> Result<u32, NcError> {
        self.codes
            .get(g)
            .copied()
            .ok_or_else(|| NcError::UnknownGenerator(g.to_string()))
    }

    pub fn gen(&self, family: Family, idx: &[u8]) -> Result<NcPoly, NcError> {
        Ok(NcPoly::gen(self.code(&GenSym::new(family, idx))?))
    }

    pub fn family_codes(&self, f: Family) -> &[u32] {
        self.by_family.get(&f).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn relations(&self) -> &[NcPoly] {
        &self.relations
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn form_degree(&self, w: &Word) -> usize {
        w.0.iter()
            .map(|&c| self.gens[c as usize].family.form_degree() as usize)
            .sum()
    }

    pub fn word_multideg(&self, w: &Word) -> MultiDeg {
        multideg(&self.gens, w)
    }

    fn find_rule(&self, w: &Word) -> Option<(usize, usize, &NcPoly)> {
        let n = w.len();
        for pos in 0..n {
            let maxl = self.max_lhs.min(n - pos);
            for l in (1..=maxl).rev() {
                if let Some(rhs) = self.rules.get(&w.0[pos..pos + l]) {
                    return Some((pos, l, rhs));
                }
            }
        }
        None
    }

    /// Canonical representative modulo the relation ideal. Zero output is a
    /// proof of ideal membership.
    pub fn normal_form(&self, p: &NcPoly) -> Result<NcPoly, NcError> {
        let mut done: BTreeMap<Word, Scalar> = BTreeMap::new();
        let mut work: BTreeMap<Word, Scalar> = p.terms.clone();
        for w in work.keys() {
            if w.len() > self.degree_cap {
                return Err(NcError::DegreeCapExceeded(w.len(), self.degree_cap));
            }
        }
        fn merge(map: &mut BTreeMap<Word, Scalar>, w: Word, c: Scalar) {
            if c.is_zero() {
                return;
            }
            match map.entry(w) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(c);
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let s = &*e.get() + &c;
                    if s.is_zero() {
                        e.remove();
                    } else {
                        *e.get_mut() = s;
                    }
                }
            }
        }
        while let Some((w, c)) = work.pop_last() {
            if c.is_zero() {
                continue;
            }
            match self.find_rule(&w) {
                None => merge(&mut done, w, c),
                Some((pos, len, rhs)) => {
                    let rhs = rhs.clone();
                    for (rw, rc) in &rhs.terms {
                        let nw = w.splice(pos, len, rw);
                        debug_assert!(nw < w, "rewrite must decrease the word order");
                        merge(&mut work, nw, &c * rc);
                    }
                }
            }
        }
        Ok(NcPoly { terms: done })
    }

    pub fn is_zero(&self, p: &NcPoly) -> Result<bool, NcError> {
        Ok(self.normal_form(p)?.is_zero())
    }

    /// Concatenate then reduce.
    pub fn multiply(&self, a: &NcPoly, b: &NcPoly) -> Result<NcPoly, NcError> {
        self.normal_form(&a.mul(b))
    }

    /// Dimension of a graded component of the quotient algebra, by exact row
    /// reduction of every `left * relation * right` embedding against the
    /// full word basis of the component. Independent of the rewrite rules.
    /// Defined only for gradings not touching contracted families.
    pub fn pbw_dimension(&self, md: &MultiDeg) -> Result<usize, NcError> {
        if md.keys().any(|f| self.contraction_families.contains(f)) {
            return Err(NcError::ContractionsPresent);
        }
        let total: usize = md.values().sum();
        if total > self.degree_cap {
            return Err(NcError::DegreeCapExceeded(total, self.degree_cap));
        }
        let words = self.enumerate_words(md);
        if words.is_empty() {
            return Ok(0);
        }
        let col_of: HashMap<Word, usize> = {
            // descending order: column 0 is the largest word
            let mut ws = words.clone();
            ws.sort();
            ws.reverse();
            ws.into_iter().enumerate().map(|(i, w)| (w, i)).collect()
        };
        let mut rows: Vec<BTreeMap<usize, Scalar>> = Vec::new();
        for rel in &self.relations {
            let Some((lead, _)) = rel.leading() else { continue };
            let rel_md = self.word_multideg(lead);
            // contraction relations are inhomogeneous and cannot contribute
            // to a single graded component
            if rel.terms.keys().any(|w| self.word_multideg(w) != rel_md) {
                continue;
            }
            let Some(rem) = sub_multideg(md, &rel_md) else {
                continue;
            };
            for (lmd, rmd) in split_multideg(&rem) {
                let lefts = self.enumerate_words(&lmd);
                let rights = self.enumerate_words(&rmd);
                for l in &lefts {
                    for r in &rights {
                        let mut row: BTreeMap<usize, Scalar> = BTreeMap::new();
                        for (w, c) in &rel.terms {
                            let full = l.concat(w).concat(r);
                            let col = col_of[&full];
                            let cur = row.entry(col).or_insert_with(Scalar::zero);
                            let s = &*cur + c;
                            if s.is_zero() {
                                row.remove(&col);
                            } else {
                                *cur = s;
                            }
                        }
                        if !row.is_empty() {
                            rows.push(row);
                        }
                    }
                }
            }
        }
        let (_, rank) = rref(rows, "graded component")?;
        Ok(words.len() - rank)
    }

    /// All words with the given per-family letter counts.
    pub fn enumerate_words(&self, md: &MultiDeg) -> Vec<Word> {
        let mut counts: Vec<(Family, usize)> =
            md.iter().filter(|(_, &c)| c > 0).map(|(&f, &c)| (f, c)).collect();
        let mut out = Vec::new();
        let mut cur = Vec::new();
        self.enum_rec(&mut counts, &mut cur, &mut out);
        out
    }

    fn enum_rec(&self, counts: &mut Vec<(Family, usize)>, cur: &mut Vec<u32>, out: &mut Vec<Word>) {
        if counts.iter().all(|&(_, c)| c == 0) {
            out.push(Word(cur.clone()));
            return;
        }
        for i in 0..counts.len() {
            if counts[i].1 == 0 {
                continue;
            }
            counts[i].1 -= 1;
            let fam = counts[i].0;
            let codes: Vec<u32> = self.family_codes(fam).to_vec();
            for code in codes {
                cur.push(code);
                self.enum_rec(counts, cur, out);
                cur.pop();
            }
            counts[i].1 += 1;
        }
    }
}

fn sub_multideg(md: &MultiDeg, sub: &MultiDeg) -> Option<MultiDeg> {
    let mut out = md.clone();
    for (f, &c) in sub {
        let slot = out.get_mut(f)?;
        if *slot < c {
            return None;
        }
        *slot -= c;
        if *slot == 0 {
            out.remove(f);
        }
    }
    Some(out)
}

/// All splittings of a multidegree into (left, right) parts.
fn split_multideg(md: &MultiDeg) -> Vec<(MultiDeg, MultiDeg)> {
    let items: Vec<(Family, usize)> = md.iter().map(|(&f, &c)| (f, c)).collect();
    let mut out = Vec::new();
    let mut choice = vec![0usize; items.len()];
    loop {
        let mut l = MultiDeg::new();
        let mut r = MultiDeg::new();
        for (i, &(f, c)) in items.iter().enumerate() {
            if choice[i] > 0 {
                l.insert(f, choice[i]);
            }
            if c - choice[i] > 0 {
                r.insert(f, c - choice[i]);
            }
        }
        out.push((l, r));
        // odometer
        let mut i = 0;
        loop {
            if i == items.len() {
                return out;
            }
            if choice[i] < items[i].1 {
                choice[i] += 1;
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

pub struct ContextBuilder {
    gens: Vec<GenSym>,
    codes: HashMap<GenSym, u32>,
    relations: Vec<NcPoly>,
    contractions: Vec<NcPoly>,
    degree_cap: usize,
}

impl Default for ContextBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl ContextBuilder {
    pub fn new() -> Self {
        ContextBuilder {
            gens: Vec::new(),
            codes: HashMap::new(),
            relations: Vec::new(),
            contractions: Vec::new(),
            degree_cap: 16,
        }
    }

    pub fn degree_cap(mut self, cap: usize) -> Self {
        self.degree_cap = cap;
        self
    }

    /// Register one generator. Registration order *is* the letter precedence
    /// of the monomial order; callers list families in the intended order.
    pub fn add_gen(&mut self, g: GenSym) -> u32 {
        if let Some(&c) = self.codes.get(&g) {
            return c;
        }
        let code = self.gens.len() as u32;
        self.gens.push(g);
        self.codes.insert(g, code);
        code
    }

    pub fn code(&self, g: &GenSym) -> Result<u32, NcError> {
        self.codes
            .get(g)
            .copied()
            .ok_or_else(|| NcError::UnknownGenerator(g.to_string()))
    }

    pub fn gen(&self, family: Family, idx: &[u8]) -> Result<NcPoly, NcError> {
        Ok(NcPoly::gen(self.code(&GenSym::new(family, idx))?))
    }

    /// Homogeneous relation: every word must share one multidegree and one
    /// form degree.
    pub fn relation(&mut self, p: NcPoly) -> Result<(), NcError> {
        if p.is_zero() {
            return Ok(());
        }
        let mut mds: Option<MultiDeg> = None;
        let mut fd: Option<usize> = None;
        for w in p.terms.keys() {
            let m = multideg(&self.gens, w);
            let d: usize = w
                .0
                .iter()
                .map(|&c| self.gens[c as usize].family.form_degree() as usize)
                .sum();
            if *mds.get_or_insert_with(|| m.clone()) != m || *fd.get_or_insert(d) != d {
                return Err(NcError::InhomogeneousRelation(format!(
                    "{} words of mixed grading",
                    p.term_count()
                )));
            }
        }
        self.relations.push(p);
        Ok(())
    }

    /// Degree-lowering rule (e.g. a frame contraction `u ub - delta` or an
    /// inverse-pair collapse). Form degree must still be uniform.
    pub fn contraction(&mut self, p: NcPoly) -> Result<(), NcError> {
        if p.is_zero() {
            return Ok(());
        }
        let mut fd: Option<usize> = None;
        for w in p.terms.keys() {
            let d: usize = w
                .0
                .iter()
                .map(|&c| self.gens[c as usize].family.form_degree() as usize)
                .sum();
            if *fd.get_or_insert(d) != d {
                return Err(NcError::InhomogeneousRelation(
                    "contraction with mixed form degree".into(),
                ));
            }
        }
        self.contractions.push(p);
        Ok(())
    }

    pub fn compile(self) -> Result<AlgebraContext, NcError> {
        let ContextBuilder {
            gens,
            codes,
            relations,
            contractions,
            degree_cap,
        } = self;
        let mut by_family: HashMap<Family, Vec<u32>> = HashMap::new();
        for (i, g) in gens.iter().enumerate() {
            by_family.entry(g.family).or_default().push(i as u32);
        }
        let mut contraction_families: Vec<Family> = contractions
            .iter()
            .flat_map(|p| p.terms.keys())
            .flat_map(|w| w.0.iter().map(|&c| gens[c as usize].family))
            .collect();
        contraction_families.sort();
        contraction_families.dedup();

        // phase 1: letter-level rules from linear relations
        let (linear, higher): (Vec<NcPoly>, Vec<NcPoly>) = relations
            .into_iter()
            .partition(|p| p.terms.keys().all(|w| w.len() <= 1));
        let mut rules: HashMap<Vec<u32>, NcPoly> = HashMap::new();
        if !linear.is_empty() {
            compile_bucket(&linear, &mut rules, "linear letters")?;
        }

        // phase 2: fold letter rules through the remaining relations, then
        // compile each connected graded component
        let letter_fold = |p: &NcPoly| -> NcPoly {
            p.substitute(&|c| rules.get(&vec![c][..]).cloned())
        };
        let mut folded: Vec<NcPoly> = Vec::new();
        for p in higher.iter().chain(contractions.iter()) {
            let q = letter_fold(p);
            if !q.is_zero() {
                folded.push(q);
            }
        }

        // group relations that share any multidegree of their words
        let mut groups: Vec<Vec<NcPoly>> = Vec::new();
        let mut group_keys: Vec<Vec<MultiDeg>> = Vec::new();
        for p in folded.iter() {
            let keys: Vec<MultiDeg> = {
                let mut ks: Vec<MultiDeg> = p
                    .terms
                    .keys()
                    .filter(|w| !w.is_empty())
                    .map(|w| multideg(&gens, w))
                    .collect();
                ks.sort();
                ks.dedup();
                ks
            };
            let mut target: Option<usize> = None;
            for (gi, gk) in group_keys.iter().enumerate() {
                if keys.iter().any(|k| gk.contains(k)) {
                    target = Some(gi);
                    break;
                }
            }
            match target {
                Some(gi) => {
                    groups[gi].push(p.clone());
                    for k in keys {
                        if !group_keys[gi].contains(&k) {
                            group_keys[gi].push(k);
                        }
                    }
                }
                None => {
                    groups.push(vec![p.clone()]);
                    group_keys.push(keys);
                }
            }
        }
        // merge groups that became connected transitively
        loop {
            let mut merged = false;
            'outer: for i in 0..groups.len() {
                for j in (i + 1)..groups.len() {
                    if group_keys[i].iter().any(|k| group_keys[j].contains(k)) {
                        let (gj, kj) = (groups.remove(j), group_keys.remove(j));
                        groups[i].extend(gj);
                        for k in kj {
                            if !group_keys[i].contains(&k) {
                                group_keys[i].push(k);
                            }
                        }
                        merged = true;
                        break 'outer;
                    }
                }
            }
            if !merged {
                break;
            }
        }
        for (gi, g) in groups.iter().enumerate() {
            compile_bucket(g, &mut rules, &format!("component {gi}"))?;
        }

        let max_lhs = rules.keys().map(Vec::len).max().unwrap_or(1);
        // keep the folded relations (plus letter rules as relations) for the
        // independent graded-dimension route
        let mut kept = linear;
        kept.extend(folded);
        Ok(AlgebraContext {
            gens,
            codes,
            by_family,
            rules,
            max_lhs,
            degree_cap,
            relations: kept,
            contraction_families,
        })
    }
}

/// Row-reduce a set of relations over their joint word support and emit one
/// rewrite rule per pivot: `largest word -> minus the rest`.
fn compile_bucket(
    rels: &[NcPoly],
    rules: &mut HashMap<Vec<u32>, NcPoly>,
    what: &str,
) -> Result<(), NcError> {
    let mut words: Vec<Word> = Vec::new();
    for p in rels {
        for w in p.terms.keys() {
            words.push(w.clone());
        }
    }
    words.sort();
    words.dedup();
    words.reverse(); // column 0 = largest word
    let col_of: HashMap<&Word, usize> = words.iter().enumerate().map(|(i, w)| (w, i)).collect();
    let rows: Vec<BTreeMap<usize, Scalar>> = rels
        .iter()
        .map(|p| {
            p.terms
                .iter()
                .map(|(w, c)| (col_of[w], c.clone()))
                .collect()
        })
        .collect();
    let (reduced, _) = rref(rows, what)?;
    for row in reduced {
        let mut it = row.into_iter();
        let Some((pivot_col, pivot_coeff)) = it.next() else {
            continue;
        };
        debug_assert!(pivot_coeff.is_one());
        let lhs = &words[pivot_col];
        if lhs.is_empty() {
            // a contradiction like 1 = 0 would surface here
            return Err(NcError::NonInvertiblePivot(format!(
                "{what}: constant relation in ideal"
            )));
        }
        let mut rhs = NcPoly::zero();
        for (col, c) in it {
            rhs.add_term(words[col].clone(), -&c);
        }
        rules.insert(lhs.0.clone(), rhs);
    }
    Ok(())
}

/// Exact reduced row echelon form over the scalar field. Columns are
/// processed in order (column 0 first); pivots must be invertible scalars.
/// Returns the reduced nonzero rows (each sorted, pivot first, coefficient 1)
/// and the rank.
pub fn rref(
    mut rows: Vec<BTreeMap<usize, Scalar>>,
    what: &str,
) -> Result<(Vec<BTreeMap<usize, Scalar>>, usize), NcError> {
    let mut done: Vec<BTreeMap<usize, Scalar>> = Vec::new();
    let ncols = rows
        .iter()
        .flat_map(|r| r.keys().copied())
        .max()
        .map_or(0, |m| m + 1);
    for col in 0..ncols {
        // pick an invertible pivot with the fewest terms
        let mut best: Option<(usize, usize)> = None;
        for (i, r) in rows.iter().enumerate() {
            if let Some(c) = r.get(&col) {
                if r.keys().next() == Some(&col) && c.inv().is_ok() {
                    let sz = r.len();
                    if best.map_or(true, |(_, bs)| sz < bs) {
                        best = Some((i, sz));
                    }
                }
            }
        }
        let Some((pi, _)) = best else {
            // no pivot in this column; check nobody is stuck with a
            // non-invertible leading entry here
            if rows
                .iter()
                .any(|r| r.keys().next() == Some(&col) && r[&col].inv().is_err())
            {
                return Err(NcError::NonInvertiblePivot(what.to_string()));
            }
            continue;
        };
        let mut pivot = rows.swap_remove(pi);
        let inv = pivot[&col].inv().expect("checked invertible");
        for v in pivot.values_mut() {
            *v = &*v * &inv;
        }
        let eliminate = |r: &mut BTreeMap<usize, Scalar>| {
            if let Some(f) = r.get(&col).cloned() {
                for (k, v) in &pivot {
                    let cur = r.entry(*k).or_insert_with(Scalar::zero);
                    let s = &*cur - &(&f * v);
                    if s.is_zero() {
                        r.remove(k);
                    } else {
                        *cur = s;
                    }
                }
            }
        };
        for r in rows.iter_mut() {
            eliminate(r);
        }
        for r in done.iter_mut() {
            eliminate(r);
        }
        done.push(pivot);
        rows.retain(|r| !r.is_empty());
        if rows.is_empty() {
            break;
        }
    }
    let rank = done.len();
    Ok((done, rank))
}

// ---------------------------------------------------------------------------
// textual format
// ---------------------------------------------------------------------------

impl AlgebraContext {
    /// Renders `coeff * sym[idx,..] sym[idx,..]` terms joined by ` + `;
    /// coefficients always parenthesized, indices 1-based.
    pub fn render_poly(&self, p: &NcPoly) -> String {
        if p.is_zero() {
            return "(0)".into();
        }
        let mut parts = Vec::new();
        for (w, c) in &p.terms {
            let mut t = format!("({})", c);
            for &code in &w.0 {
                t.push(' ');
                t.push_str(&self.sym(code).to_string());
            }
            parts.push(t);
        }
        parts.join(" + ")
    }

    pub fn parse_poly(&self, input: &str) -> Result<NcPoly, NcError> {
        let mut out = NcPoly::zero();
        for term in split_top_level(input) {
            let term = term.trim();
            if term.is_empty() {
                continue;
            }
            let (coeff_str, rest) = take_paren_group(term)
                .ok_or_else(|| NcError::Parse(format!("term must start with (coeff): {term}")))?;
            let coeff = parse_scalar(coeff_str).map_err(NcError::Coeff)?;
            let mut word = Vec::new();
            for tok in rest.split_whitespace() {
                word.push(self.parse_gen(tok)?);
            }
            out.add_term(Word(word), coeff);
        }
        Ok(out)
    }

    fn parse_gen(&self, tok: &str) -> Result<u32, NcError> {
        let (name, idx_part) = match tok.find('[') {
            Some(i) => {
                let close = tok
                    .rfind(']')
                    .ok_or_else(|| NcError::Parse(format!("missing ] in {tok}")))?;
                (&tok[..i], &tok[i + 1..close])
            }
            None => (tok, ""),
        };
        let family = parse_family(name).ok_or_else(|| NcError::Parse(format!("unknown family {name}")))?;
        let mut idx = Vec::new();
        if !idx_part.is_empty() {
            for p in idx_part.split(',') {
                let v: u8 = p
                    .trim()
                    .parse()
                    .map_err(|_| NcError::Parse(format!("bad index in {tok}")))?;
                if v == 0 {
                    return Err(NcError::Parse("indices are 1-based".into()));
                }
                idx.push(v - 1);
            }
        }
        self.code(&GenSym::new(family, &idx))
    }
}

fn parse_family(name: &str) -> Option<Family> {
    match name {
        "z" => Some(Family::Z),
        "dz" => Some(Family::Dz),
        "pd" => Some(Family::Pd),
        "Phi" => Some(Family::Phi),
        "PhiI" => Some(Family::PhiInv),
        "u" => Some(Family::U),
        "ut" => Some(Family::Ut),
        "du" => Some(Family::Du),
        "dut" => Some(Family::Dut),
        "v" => Some(Family::V),
        "vt" => Some(Family::Vt),
        "dv" => Some(Family::Dv),
        "dvt" => Some(Family::Dvt),
        "bm" => Some(Family::Bm),
        "bt" => Some(Family::Bt),
        "g" => Some(Family::G),
        "gi" => Some(Family::Gi),
        _ => {
            if let Some(rest) = name.strip_prefix("Xi") {
                let (p, k) = rest.split_once('_')?;
                return Some(Family::XInv(p.parse::<u8>().ok()? - 1, k.parse().ok()?));
            }
            if let Some(rest) = name.strip_prefix('X') {
                return Some(Family::X(rest.parse::<u8>().ok()? - 1));
            }
            if let Some(rest) = name.strip_prefix('b') {
                return Some(Family::B(rest.parse::<u8>().ok()? - 1));
            }
            None
        }
    }
}

/// Split on top-level ` + ` (outside parentheses).
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let bytes = s.as_bytes();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut i = 0usize;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => depth += 1,
            b')' => depth = depth.saturating_sub(1),
            b'+' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    parts.push(&s[start..]);
    parts
}

/// Take a leading balanced `(...)` group; returns (inner, rest).
fn take_paren_group(s: &str) -> Option<(&str, &str)> {
    let s = s.trim_start();
    if !s.starts_with('(') {
        return None;
    }
    let bytes = s.as_bytes();
    let mut depth = 0usize;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => {
                depth -= 1;
                if depth == 0 {
                    return Some((&s[1..i], &s[i + 1..]));
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::Scalar;

    /// Quantum plane: two letters x < y with y x = q x y.
    fn quantum_plane() -> AlgebraContext {
        let mut b = ContextBuilder::new();
        let x = b.add_gen(GenSym::new(Family::Z, &[0, 0]));
        let y = b.add_gen(GenSym::new(Family::Z, &[0, 1]));
        // y x - q x y = 0
        let mut rel = NcPoly::zero();
        rel.add_term(Word(vec![y, x]), Scalar::one());
        rel.add_term(Word(vec![x, y]), -&Scalar::q());
        b.relation(rel).unwrap();
        b.compile().unwrap()
    }

    #[test]
    fn quantum_plane_straightening() {
        let ctx = quantum_plane();
        let x = ctx.gen(Family::Z, &[0, 0]).unwrap();
        let y = ctx.gen(Family::Z, &[0, 1]).unwrap();
        let yx = y.mul(&x);
        let nf = ctx.normal_form(&yx).unwrap();
        let expect = x.mul(&y).scale(&Scalar::q());
        assert_eq!(nf, expect);
        // idempotent
        assert_eq!(ctx.normal_form(&nf).unwrap(), nf);
        // nf(p - nf(p)) == 0
        assert!(ctx.is_zero(&yx.sub(&nf)).unwrap());
    }

    #[test]
    fn quantum_plane_dimensions() {
        let ctx = quantum_plane();
        for d in 1..=4usize {
            let mut md = MultiDeg::new();
            md.insert(Family::Z, d);
            // commutative dimension of degree-d part in 2 variables
            assert_eq!(ctx.pbw_dimension(&md).unwrap(), d + 1);
        }
    }

    #[test]
    fn free_algebra_normal_form_is_identity() {
        let mut b = ContextBuilder::new();
        let x = b.add_gen(GenSym::new(Family::Z, &[0, 0]));
        let y = b.add_gen(GenSym::new(Family::Z, &[0, 1]));
        let ctx = b.compile().unwrap();
        let p = NcPoly::word(Word(vec![y, x, y]), Scalar::q());
        assert_eq!(ctx.normal_form(&p).unwrap(), p);
        let mut md = MultiDeg::new();
        md.insert(Family::Z, 2);
        assert_eq!(ctx.pbw_dimension(&md).unwrap(), 4);
    }

    #[test]
    fn inhomogeneous_relation_rejected() {
        let mut b = ContextBuilder::new();
        let x = b.add_gen(GenSym::new(Family::Z, &[0, 0]));
        let d = b.add_gen(GenSym::new(Family::Dz, &[0, 0]));
        let mut rel = NcPoly::zero();
        rel.add_term(Word(vec![x, d]), Scalar::one());
        rel.add_term(Word(vec![x, x]), Scalar::one());
        assert!(matches!(
            b.relation(rel),
            Err(NcError::InhomogeneousRelation(_))
        ));
    }

    #[test]
    fn contraction_collapses_pairs() {
        // letters a < ab with a ab = 1 (frame-style contraction)
        let mut b = ContextBuilder::new();
        let u = b.add_gen(GenSym::new(Family::U, &[0, 0]));
        let ut = b.add_gen(GenSym::new(Family::Ut, &[0, 0]));
        let mut rel = NcPoly::zero();
        rel.add_term(Word(vec![u, ut]), Scalar::one());
        rel.add_term(Word::empty(), -&Scalar::one());
        b.contraction(rel).unwrap();
        let ctx = b.compile().unwrap();
        let p = NcPoly::word(Word(vec![u, ut, u, ut]), Scalar::one());
        let nf = ctx.normal_form(&p).unwrap();
        assert_eq!(nf, NcPoly::one());
        // graded dimensions are undefined with contractions present
        let mut md = MultiDeg::new();
        md.insert(Family::U, 1);
        assert!(matches!(
            ctx.pbw_dimension(&md),
            Err(NcError::ContractionsPresent)
        ));
    }

    #[test]
    fn letter_rules_fold_into_relations() {
        // three letters; linear rule c = a + b; quadratic rule on b a
        let mut bld = ContextBuilder::new();
        let a = bld.add_gen(GenSym::new(Family::Z, &[0, 0]));
        let b = bld.add_gen(GenSym::new(Family::Z, &[0, 1]));
        let c = bld.add_gen(GenSym::new(Family::Z, &[0, 2]));
        let mut lin = NcPoly::zero();
        lin.add_term(Word(vec![c]), Scalar::one());
        lin.add_term(Word(vec![a]), -&Scalar::one());
        lin.add_term(Word(vec![b]), -&Scalar::one());
        bld.relation(lin).unwrap();
        let mut quad = NcPoly::zero();
        quad.add_term(Word(vec![b, a]), Scalar::one());
        quad.add_term(Word(vec![a, b]), -&Scalar::q());
        bld.relation(quad).unwrap();
        let ctx = bld.compile().unwrap();
        // c reduces to a + b
        let nf = ctx.normal_form(&NcPoly::gen(c)).unwrap();
        assert_eq!(nf.term_count(), 2);
        // c a reduces into the span of {a a, a b}
        let nf2 = ctx
            .normal_form(&NcPoly::word(Word(vec![c, a]), Scalar::one()))
            .unwrap();
        for w in nf2.terms.keys() {
            assert!(w.0.windows(2).all(|p| p[0] <= p[1]));
        }
    }

    #[test]
    fn degree_cap_enforced() {
        let ctx = quantum_plane();
        let x = ctx.code(&GenSym::new(Family::Z, &[0, 0])).unwrap();
        let long = NcPoly::word(Word(vec![x; 20]), Scalar::one());
        assert!(matches!(
            ctx.normal_form(&long),
            Err(NcError::DegreeCapExceeded(20, 16))
        ));
    }

    #[test]
    fn render_parse_roundtrip() {
        let ctx = quantum_plane();
        let x = ctx.gen(Family::Z, &[0, 0]).unwrap();
        let y = ctx.gen(Family::Z, &[0, 1]).unwrap();
        let p = x.mul(&y).scale(&Scalar::lambda()).add(&NcPoly::one());
        let s = ctx.render_poly(&p);
        let q = ctx.parse_poly(&s).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn substitute_expands_composites() {
        let ctx = quantum_plane();
        let xc = ctx.code(&GenSym::new(Family::Z, &[0, 0])).unwrap();
        let y = ctx.gen(Family::Z, &[0, 1]).unwrap();
        let p = NcPoly::word(Word(vec![xc, xc]), Scalar::one());
        // substitute x -> y + 1: (y+1)(y+1) = yy + 2y + 1
        let def = y.add(&NcPoly::one());
        let out = p.substitute(&|c| (c == xc).then(|| def.clone()));
        assert_eq!(out.term_count(), 3);
        let yc = ctx.code(&GenSym::new(Family::Z, &[0, 1])).unwrap();
        assert_eq!(
            out.terms.get(&Word(vec![yc])).unwrap(),
            &Scalar::from_int(2)
        );
        // substituting into the empty polynomial stays empty
        assert!(NcPoly::zero().substitute(&|_| Some(def.clone())).is_zero());
    }
}
