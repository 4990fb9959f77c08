//! Monomials, the lexicographic order, monomial distance, and sparse
//! multivariate polynomials.
//!
//! Variable precedence is the position in the [`VarTable`]: id 0 is the
//! highest-precedence variable. The lexicographic order compares exponents of
//! the highest-precedence variable first and the first difference decides;
//! total degree plays no role.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use thiserror::Error;

use crate::algebra::Ring;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("invalid variable name `{0}`")]
    InvalidName(String),
    #[error("unknown variable `{name}` at column {pos}")]
    UnknownVariable { name: String, pos: usize },
    #[error("parse error at column {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("the zero polynomial has no leading monomial")]
    ZeroPolynomial,
    #[error("no value assigned to variable `{0}`")]
    MissingAssignment(String),
    #[error("variable id {var} outside a table of {len} variables")]
    VarOutOfRange { var: usize, len: usize },
    #[error("operands live over different variable tables")]
    TableMismatch,
}

/// Structured position of an iterated-matrix-product variable x^{(matrix)}_{row,col}.
/// All indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MatrixLabel {
    pub matrix: usize,
    pub row: usize,
    pub col: usize,
}

/// Ordered variable names; the position of a name is its precedence rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarTable {
    names: Vec<String>,
    index: HashMap<String, usize>,
    layout: Option<(usize, usize)>,
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl VarTable {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, PolyError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if !valid_name(name) {
                return Err(PolyError::InvalidName(name.clone()));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(PolyError::DuplicateName(name.clone()));
            }
        }
        Ok(Self {
            names,
            index,
            layout: None,
        })
    }

    /// `x1 ≻ x2 ≻ ... ≻ x{count}`.
    pub fn indexed(prefix: &str, count: usize) -> Self {
        Self::new((1..=count).map(|i| format!("{prefix}{i}"))).expect("generated names are valid")
    }

    /// Variables of `d` generic `n × n` matrices, named `x{t}_{i}_{j}`, ordered
    /// by matrix first and row-major inside a matrix.
    pub fn matrices(n: usize, d: usize) -> Self {
        let mut names = Vec::with_capacity(n * n * d);
        for matrix in 1..=d {
            for row in 1..=n {
                for col in 1..=n {
                    names.push(format!("x{matrix}_{row}_{col}"));
                }
            }
        }
        let mut table = Self::new(names).expect("generated names are valid");
        table.layout = Some((n, d));
        table
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// `(n, d)` for tables built by [`VarTable::matrices`].
    pub fn matrix_layout(&self) -> Option<(usize, usize)> {
        self.layout
    }

    pub fn label(&self, id: usize) -> Option<MatrixLabel> {
        let (n, _) = self.layout?;
        Some(MatrixLabel {
            matrix: id / (n * n) + 1,
            row: (id / n) % n + 1,
            col: id % n + 1,
        })
    }

    /// Id of x^{(matrix)}_{row,col} in a table built by [`VarTable::matrices`].
    pub fn matrix_var(&self, matrix: usize, row: usize, col: usize) -> usize {
        let (n, _) = self.layout.expect("table carries a matrix layout");
        (matrix - 1) * n * n + (row - 1) * n + (col - 1)
    }

    pub fn check_monomial(&self, m: &Monomial) -> Result<(), PolyError> {
        match m.factors().last() {
            Some(&(v, _)) if v as usize >= self.len() => Err(PolyError::VarOutOfRange {
                var: v as usize,
                len: self.len(),
            }),
            _ => Ok(()),
        }
    }
}

/// A power product stored as `(variable id, exponent)` pairs with ascending
/// ids and no zero exponents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Monomial {
    factors: Vec<(u32, u32)>,
    degree: u32,
}

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn var(id: usize) -> Self {
        Self {
            factors: vec![(id as u32, 1)],
            degree: 1,
        }
    }

    /// Builds a monomial from arbitrary pairs, merging repeats and dropping
    /// zero exponents.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut map = BTreeMap::new();
        for (v, e) in pairs {
            *map.entry(v as u32).or_insert(0u32) += e;
        }
        let factors: Vec<(u32, u32)> = map.into_iter().filter(|&(_, e)| e > 0).collect();
        let degree = factors.iter().map(|&(_, e)| e).sum();
        Self { factors, degree }
    }

    /// Dense exponent vector, index = variable id.
    pub fn from_exponents(exps: &[u32]) -> Self {
        Self::from_pairs(exps.iter().enumerate().map(|(v, &e)| (v, e)))
    }

    /// Product of the given variables, each with multiplicity one per
    /// occurrence.
    pub fn from_vars(vars: impl IntoIterator<Item = usize>) -> Self {
        Self::from_pairs(vars.into_iter().map(|v| (v, 1)))
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[(u32, u32)] {
        &self.factors
    }

    pub fn exponent(&self, var: usize) -> u32 {
        match self.factors.binary_search_by_key(&(var as u32), |&(v, _)| v) {
            Ok(i) => self.factors[i].1,
            Err(_) => 0,
        }
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.factors.iter().map(|&(v, _)| v as usize)
    }

    /// Size of the multiset intersection: sum over variables of the smaller
    /// exponent.
    pub fn common_degree(&self, other: &Monomial) -> u32 {
        let (mut i, mut j, mut acc) = (0, 0, 0);
        while i < self.factors.len() && j < other.factors.len() {
            let (va, ea) = self.factors[i];
            let (vb, eb) = other.factors[j];
            match va.cmp(&vb) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    acc += ea.min(eb);
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.common_degree(other) == self.degree
    }

    /// `other / self` when `self` divides `other`.
    pub fn quotient_of(&self, other: &Monomial) -> Option<Monomial> {
        if !self.divides(other) {
            return None;
        }
        let factors: Vec<(u32, u32)> = other
            .factors
            .iter()
            .filter_map(|&(v, e)| {
                let rest = e - self.exponent(v as usize);
                (rest > 0).then_some((v, rest))
            })
            .collect();
        Some(Monomial {
            factors,
            degree: other.degree - self.degree,
        })
    }

    pub fn render(&self, vars: &VarTable) -> String {
        if self.is_one() {
            return "1".to_string();
        }
        self.factors
            .iter()
            .map(|&(v, e)| {
                if e == 1 {
                    vars.name(v as usize).to_string()
                } else {
                    format!("{}^{}", vars.name(v as usize), e)
                }
            })
            .collect::<Vec<_>>()
            .join("*")
    }
}

impl Mul<&Monomial> for &Monomial {
    type Output = Monomial;

    fn mul(self, rhs: &Monomial) -> Monomial {
        let mut factors = Vec::with_capacity(self.factors.len() + rhs.factors.len());
        let (mut i, mut j) = (0, 0);
        while i < self.factors.len() || j < rhs.factors.len() {
            match (self.factors.get(i), rhs.factors.get(j)) {
                (Some(&a), Some(&b)) if a.0 == b.0 => {
                    factors.push((a.0, a.1 + b.1));
                    i += 1;
                    j += 1;
                }
                (Some(&a), Some(&b)) if a.0 < b.0 => {
                    factors.push(a);
                    i += 1;
                }
                (Some(&a), None) => {
                    factors.push(a);
                    i += 1;
                }
                (_, Some(&b)) => {
                    factors.push(b);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        Monomial {
            factors,
            degree: self.degree + rhs.degree,
        }
    }
}

impl Ord for Monomial {
    /// Pure lexicographic order: lower variable id means higher precedence.
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (&self.factors, &other.factors);
        let mut i = 0;
        loop {
            match (a.get(i), b.get(i)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some(&(va, ea)), Some(&(vb, eb))) => {
                    if va != vb {
                        // the side holding the higher-precedence variable wins
                        return vb.cmp(&va);
                    }
                    if ea != eb {
                        return ea.cmp(&eb);
                    }
                }
            }
            i += 1;
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multiset distance: `min(|S1| - |S1 ∩ S2|, |S2| - |S1 ∩ S2|)`.
pub fn mono_distance(m1: &Monomial, m2: &Monomial) -> u32 {
    let common = m1.common_degree(m2);
    (m1.degree - common).min(m2.degree - common)
}

/// [`mono_distance`] with both monomials validated against a table.
pub fn mono_distance_in(vars: &VarTable, m1: &Monomial, m2: &Monomial) -> Result<u32, PolyError> {
    vars.check_monomial(m1)?;
    vars.check_monomial(m2)?;
    Ok(mono_distance(m1, m2))
}

/// Minimum pairwise distance of a family, `None` for fewer than two members.
pub fn min_pairwise_distance<'a>(family: impl IntoIterator<Item = &'a Monomial>) -> Option<u32> {
    let family: Vec<&Monomial> = family.into_iter().collect();
    let mut best = None;
    for i in 0..family.len() {
        for j in (i + 1)..family.len() {
            let d = mono_distance(family[i], family[j]);
            best = Some(best.map_or(d, |b: u32| b.min(d)));
        }
    }
    best
}

/// A finite map monomial → nonzero coefficient over a shared variable table.
#[derive(Clone)]
pub struct SparsePoly<R: Ring> {
    ring: R,
    vars: Arc<VarTable>,
    terms: BTreeMap<Monomial, R::Elem>,
}

impl<R: Ring> fmt::Debug for SparsePoly<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SparsePoly({self})")
    }
}

impl<R: Ring> PartialEq for SparsePoly<R> {
    fn eq(&self, other: &Self) -> bool {
        self.same_table(other) && self.terms == other.terms
    }
}

impl<R: Ring> SparsePoly<R> {
    pub fn zero(ring: R, vars: Arc<VarTable>) -> Self {
        Self {
            ring,
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(ring: R, vars: Arc<VarTable>, c: R::Elem) -> Self {
        Self::monomial(ring, vars, Monomial::one(), c)
    }

    pub fn var(ring: R, vars: Arc<VarTable>, id: usize) -> Self {
        let one = ring.one();
        Self::monomial(ring, vars, Monomial::var(id), one)
    }

    pub fn monomial(ring: R, vars: Arc<VarTable>, m: Monomial, c: R::Elem) -> Self {
        let mut p = Self::zero(ring, vars);
        p.add_term(m, c);
        p
    }

    pub fn from_terms(
        ring: R,
        vars: Arc<VarTable>,
        terms: impl IntoIterator<Item = (Monomial, R::Elem)>,
    ) -> Self {
        let mut p = Self::zero(ring, vars);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    /// Adds `c·m` in place, dropping the entry if it cancels.
    pub fn add_term(&mut self, m: Monomial, c: R::Elem) {
        if self.ring.is_zero(&c) {
            return;
        }
        debug_assert!(self.vars.check_monomial(&m).is_ok());
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                let sum = self.ring.add(slot.get(), &c);
                if self.ring.is_zero(&sum) {
                    slot.remove();
                } else {
                    *slot.get_mut() = sum;
                }
            }
        }
    }

    pub fn ring(&self) -> &R {
        &self.ring
    }

    pub fn vars(&self) -> &Arc<VarTable> {
        &self.vars
    }

    /// Terms in ascending lexicographic order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &R::Elem)> + ExactSizeIterator {
        self.terms.iter()
    }

    pub fn monomials(&self) -> impl DoubleEndedIterator<Item = &Monomial> + ExactSizeIterator {
        self.terms.keys()
    }

    pub fn coefficient(&self, m: &Monomial) -> Option<&R::Elem> {
        self.terms.get(m)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    pub fn same_table(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.vars, &other.vars) || *self.vars == *other.vars
    }

    fn assert_same_table(&self, other: &Self) {
        assert!(self.same_table(other), "{}", PolyError::TableMismatch);
    }

    /// Variables that occur in some term, ascending.
    pub fn support_vars(&self) -> Vec<usize> {
        let mut seen: Vec<usize> = self.terms.keys().flat_map(|m| m.support()).collect();
        seen.sort_unstable();
        seen.dedup();
        seen
    }

    pub fn leading_monomial(&self) -> Result<&Monomial, PolyError> {
        self.terms.keys().next_back().ok_or(PolyError::ZeroPolynomial)
    }

    pub fn leading_term(&self) -> Result<(&Monomial, &R::Elem), PolyError> {
        self.terms.iter().next_back().ok_or(PolyError::ZeroPolynomial)
    }

    pub fn scale(&self, c: &R::Elem) -> Self {
        Self::from_terms(
            self.ring.clone(),
            self.vars.clone(),
            self.terms.iter().map(|(m, a)| (m.clone(), self.ring.mul(a, c))),
        )
    }

    /// Multiplies every term by the monomial `m`.
    pub fn shift(&self, m: &Monomial) -> Self {
        Self {
            ring: self.ring.clone(),
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(t, c)| (t * m, c.clone())).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::constant(self.ring.clone(), self.vars.clone(), self.ring.one());
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Iterated partial derivative: one differentiation per unit of each
    /// exponent of `m`. Multipliers are falling factorials read in the ring,
    /// so they can vanish in small characteristic.
    pub fn derive(&self, m: &Monomial) -> Self {
        let mut out = Self::zero(self.ring.clone(), self.vars.clone());
        for (t, c) in &self.terms {
            let Some(rest) = m.quotient_of(t) else {
                continue;
            };
            let mut coeff = c.clone();
            for &(v, e) in m.factors() {
                let have = t.exponent(v as usize);
                for j in 0..e {
                    coeff = self.ring.mul(&coeff, &self.ring.from_u64((have - j) as u64));
                }
            }
            out.add_term(rest, coeff);
        }
        out
    }

    pub fn derive_var(&self, var: usize) -> Self {
        self.derive(&Monomial::var(var))
    }

    /// Substitutes the assigned variables and leaves the rest untouched.
    pub fn restrict(&self, assignment: &HashMap<usize, R::Elem>) -> Self {
        let mut out = Self::zero(self.ring.clone(), self.vars.clone());
        for (t, c) in &self.terms {
            let mut coeff = c.clone();
            let mut kept = Vec::with_capacity(t.factors().len());
            for &(v, e) in t.factors() {
                match assignment.get(&(v as usize)) {
                    Some(val) => {
                        for _ in 0..e {
                            coeff = self.ring.mul(&coeff, val);
                        }
                    }
                    None => kept.push((v as usize, e)),
                }
            }
            out.add_term(Monomial::from_pairs(kept), coeff);
        }
        out
    }

    pub fn evaluate(&self, point: &HashMap<usize, R::Elem>) -> Result<R::Elem, PolyError> {
        self.evaluate_with(|v| point.get(&v).cloned())
    }

    /// Evaluation at a dense point indexed by variable id.
    pub fn evaluate_dense(&self, point: &[R::Elem]) -> Result<R::Elem, PolyError> {
        self.evaluate_with(|v| point.get(v).cloned())
    }

    fn evaluate_with(&self, value: impl Fn(usize) -> Option<R::Elem>) -> Result<R::Elem, PolyError> {
        let ring = &self.ring;
        let mut acc = ring.zero();
        for (t, c) in &self.terms {
            let mut term = c.clone();
            for &(v, e) in t.factors() {
                let x = value(v as usize)
                    .ok_or_else(|| PolyError::MissingAssignment(self.vars.name(v as usize).to_string()))?;
                for _ in 0..e {
                    term = ring.mul(&term, &x);
                }
            }
            acc = ring.add(&acc, &term);
        }
        Ok(acc)
    }

    /// Re-reads every coefficient in another ring through an integer lift.
    pub fn map_ring<S: Ring>(&self, target: S, lift: impl Fn(&R::Elem) -> BigInt) -> SparsePoly<S> {
        SparsePoly::from_terms(
            target.clone(),
            self.vars.clone(),
            self.terms.iter().map(|(m, c)| (m.clone(), target.from_bigint(&lift(c)))),
        )
    }

    /// Parses the text format `3*x1^2*x2 + x3` against an existing table.
    pub fn parse(ring: R, vars: Arc<VarTable>, text: &str) -> Result<Self, PolyError> {
        let terms = parse::terms(text, &vars)?;
        let terms: Vec<(Monomial, R::Elem)> =
            terms.into_iter().map(|(c, m)| (m, ring.from_bigint(&c))).collect();
        Ok(Self::from_terms(ring, vars, terms))
    }
}

impl<R: Ring> fmt::Display for SparsePoly<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let one = self.ring.one();
        let rendered: Vec<String> = self
            .terms
            .iter()
            .rev()
            .map(|(m, c)| match (m.is_one(), *c == one) {
                (true, _) => self.ring.render(c),
                (false, true) => m.render(&self.vars),
                (false, false) => format!("{}*{}", self.ring.render(c), m.render(&self.vars)),
            })
            .collect();
        write!(f, "{}", rendered.join(" + "))
    }
}

impl<R: Ring> Add for &SparsePoly<R> {
    type Output = SparsePoly<R>;

    fn add(self, rhs: &SparsePoly<R>) -> SparsePoly<R> {
        self.assert_same_table(rhs);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl<R: Ring> Neg for &SparsePoly<R> {
    type Output = SparsePoly<R>;

    fn neg(self) -> SparsePoly<R> {
        SparsePoly {
            ring: self.ring.clone(),
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), self.ring.neg(c))).collect(),
        }
    }
}

impl<R: Ring> Sub for &SparsePoly<R> {
    type Output = SparsePoly<R>;

    fn sub(self, rhs: &SparsePoly<R>) -> SparsePoly<R> {
        self + &(-rhs)
    }
}

impl<R: Ring> Mul for &SparsePoly<R> {
    type Output = SparsePoly<R>;

    fn mul(self, rhs: &SparsePoly<R>) -> SparsePoly<R> {
        self.assert_same_table(rhs);
        let mut out = SparsePoly::zero(self.ring.clone(), self.vars.clone());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma * mb, self.ring.mul(ca, cb));
            }
        }
        out
    }
}

/// Parses a single power product such as `x1^2*x3` (no coefficient).
pub fn parse_monomial(text: &str, vars: &VarTable) -> Result<Monomial, PolyError> {
    let terms = parse::terms(text, vars)?;
    match terms.as_slice() {
        [(c, m)] if *c == BigInt::from(1) => Ok(m.clone()),
        _ => Err(PolyError::Parse {
            pos: 1,
            msg: "expected a single monomial without coefficient".into(),
        }),
    }
}

mod parse {
    use super::*;

    struct Cursor<'a> {
        chars: Vec<(usize, char)>,
        at: usize,
        vars: &'a VarTable,
        len: usize,
    }

    impl Cursor<'_> {
        fn peek(&self) -> Option<char> {
            self.chars.get(self.at).map(|&(_, c)| c)
        }

        // 1-based column of the next significant character
        fn pos(&self) -> usize {
            self.chars.get(self.at).map_or(self.len + 1, |&(p, _)| p + 1)
        }

        fn err(&self, msg: impl Into<String>) -> PolyError {
            PolyError::Parse {
                pos: self.pos(),
                msg: msg.into(),
            }
        }

        fn integer(&mut self) -> Result<BigInt, PolyError> {
            let start = self.at;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.at += 1;
            }
            if start == self.at {
                return Err(self.err("expected digits"));
            }
            let digits: String = self.chars[start..self.at].iter().map(|&(_, c)| c).collect();
            Ok(digits.parse().expect("ascii digits"))
        }

        fn factor(&mut self, pairs: &mut Vec<(usize, u32)>) -> Result<(), PolyError> {
            let pos = self.pos();
            let start = self.at;
            while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                self.at += 1;
            }
            if start == self.at {
                return Err(self.err("expected a variable name"));
            }
            let name: String = self.chars[start..self.at].iter().map(|&(_, c)| c).collect();
            let id = self
                .vars
                .id(&name)
                .ok_or(PolyError::UnknownVariable { name, pos })?;
            let mut exp = 1u32;
            if self.peek() == Some('^') {
                self.at += 1;
                let e = self.integer()?;
                exp = u32::try_from(e).map_err(|_| self.err("exponent too large"))?;
            }
            pairs.push((id, exp));
            Ok(())
        }

        fn term(&mut self) -> Result<(BigInt, Monomial), PolyError> {
            let mut coeff = BigInt::from(1);
            let mut pairs = Vec::new();
            let negative = self.peek() == Some('-');
            if negative {
                self.at += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                coeff = self.integer()?;
                if self.peek() == Some('*') {
                    self.at += 1;
                    self.factor(&mut pairs)?;
                }
            } else {
                self.factor(&mut pairs)?;
            }
            while self.peek() == Some('*') {
                self.at += 1;
                self.factor(&mut pairs)?;
            }
            if negative {
                coeff = -coeff;
            }
            Ok((coeff, Monomial::from_pairs(pairs)))
        }
    }

    pub(super) fn terms(text: &str, vars: &VarTable) -> Result<Vec<(BigInt, Monomial)>, PolyError> {
        let mut cur = Cursor {
            chars: text.char_indices().filter(|(_, c)| !c.is_whitespace()).collect(),
            at: 0,
            vars,
            len: text.chars().count(),
        };
        let mut out = vec![cur.term()?];
        while let Some(c) = cur.peek() {
            if c != '+' {
                return Err(cur.err(format!("unexpected `{c}`")));
            }
            cur.at += 1;
            out.push(cur.term()?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Integers, PrimeField};
    use proptest::prelude::*;

    fn table(n: usize) -> Arc<VarTable> {
        Arc::new(VarTable::indexed("x", n))
    }

    fn zp(text: &str, vars: &Arc<VarTable>) -> SparsePoly<Integers> {
        SparsePoly::parse(Integers, vars.clone(), text).unwrap()
    }

    #[test]
    fn distance_worked_example() {
        let v = table(6);
        let m1 = parse_monomial("x1^2*x2*x3^2*x4", &v).unwrap();
        let m2 = parse_monomial("x1*x2^2*x3*x5*x6", &v).unwrap();
        assert_eq!(mono_distance(&m1, &m2), 3);
        assert_eq!(mono_distance(&m1, &m1), 0);
        let a = parse_monomial("x1^3", &v).unwrap();
        let b = parse_monomial("x2^2", &v).unwrap();
        assert_eq!(mono_distance(&a, &b), 2);
    }

    #[test]
    fn distance_rejects_foreign_variables() {
        let small = VarTable::indexed("x", 2);
        let m = Monomial::var(5);
        assert_eq!(
            mono_distance_in(&small, &m, &Monomial::var(0)),
            Err(PolyError::VarOutOfRange { var: 5, len: 2 })
        );
    }

    #[test]
    fn lex_leading_monomials() {
        let v = table(3);
        assert_eq!(zp("x1 + x2", &v).leading_monomial().unwrap(), &Monomial::var(0));
        // pure lex ignores total degree
        assert_eq!(zp("x2^2 + x1", &v).leading_monomial().unwrap(), &Monomial::var(0));
        assert_eq!(
            zp("x1*x2 + x1*x3", &v).leading_monomial().unwrap(),
            &Monomial::from_vars([0, 1])
        );
        assert_eq!(
            SparsePoly::zero(Integers, v).leading_monomial(),
            Err(PolyError::ZeroPolynomial)
        );
    }

    #[test]
    fn derivative_examples() {
        let v = table(3);
        assert_eq!(zp("x1^2*x2", &v).derive_var(0), zp("2*x1*x2", &v));
        assert_eq!(zp("x1*x2 + x2*x3", &v).derive_var(1), zp("x1 + x3", &v));
        let gf2 = PrimeField::new(2).unwrap();
        let f = SparsePoly::parse(gf2, v.clone(), "x1^2").unwrap();
        assert!(f.derive_var(0).is_zero());
        let g = zp("x1^3*x2^2", &v);
        assert_eq!(g.derive(&Monomial::from_pairs([(0, 2), (1, 1)])), zp("12*x1*x2", &v));
        assert!(g.derive(&Monomial::var(2)).is_zero());
    }

    #[test]
    fn restriction_and_evaluation() {
        let v = table(3);
        let zero = HashMap::from([(0, BigInt::from(0))]);
        assert_eq!(zp("x1*x2 + x3", &v).restrict(&zero), zp("x3", &v));
        let ones = HashMap::from([(0, BigInt::from(1)), (1, BigInt::from(1))]);
        assert_eq!(zp("x1*x2", &v).restrict(&ones), zp("1", &v));

        let pt = HashMap::from([(0, BigInt::from(1)), (1, BigInt::from(1))]);
        assert_eq!(zp("x1 + x2", &v).evaluate(&pt).unwrap(), BigInt::from(2));
        let pt = HashMap::from([(0, BigInt::from(2)), (1, BigInt::from(3))]);
        assert_eq!(zp("x1*x2^2", &v).evaluate(&pt).unwrap(), BigInt::from(18));
        assert_eq!(
            zp("x1*x3", &v).evaluate(&pt),
            Err(PolyError::MissingAssignment("x3".into()))
        );
    }

    #[test]
    fn parser_round_trip_and_errors() {
        let v = table(3);
        let f = zp(" 3 * x1^2*x2+x3 + -2 + x3", &v);
        assert_eq!(f.to_string(), "3*x1^2*x2 + 2*x3 + -2");
        assert_eq!(zp(&f.to_string(), &v), f);
        assert_eq!(
            SparsePoly::parse(Integers, v.clone(), "x1 + y7"),
            Err(PolyError::UnknownVariable {
                name: "y7".into(),
                pos: 6
            })
        );
        assert!(matches!(
            SparsePoly::parse(Integers, v.clone(), "x1 + "),
            Err(PolyError::Parse { pos: 6, .. })
        ));
        assert!(matches!(
            SparsePoly::parse(Integers, v, "x1 ^ x2"),
            Err(PolyError::Parse { pos: 6, .. })
        ));
    }

    #[test]
    fn var_table_rules() {
        assert_eq!(
            VarTable::new(["a", "b", "a"]),
            Err(PolyError::DuplicateName("a".into()))
        );
        assert!(VarTable::new(["1x"]).is_err());
        let t = VarTable::matrices(3, 4);
        assert_eq!(t.len(), 36);
        let id = t.matrix_var(2, 3, 1);
        assert_eq!(t.name(id), "x2_3_1");
        assert_eq!(t.label(id), Some(MatrixLabel { matrix: 2, row: 3, col: 1 }));
    }

    fn arb_monomial(nvars: usize, max_exp: u32) -> impl Strategy<Value = Monomial> {
        proptest::collection::vec(0..=max_exp, nvars).prop_map(|e| Monomial::from_exponents(&e))
    }

    fn arb_poly(nvars: usize) -> impl Strategy<Value = Vec<(Vec<u32>, i64)>> {
        proptest::collection::vec((proptest::collection::vec(0u32..3, nvars), -5i64..6), 1..6)
    }

    fn build(vars: &Arc<VarTable>, terms: &[(Vec<u32>, i64)]) -> SparsePoly<PrimeField> {
        let f = PrimeField::default();
        SparsePoly::from_terms(
            f,
            vars.clone(),
            terms.iter().map(|(e, c)| (Monomial::from_exponents(e), f.from_i64(*c))),
        )
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_bounded(a in arb_monomial(5, 3), b in arb_monomial(5, 3)) {
            let d = mono_distance(&a, &b);
            prop_assert_eq!(d, mono_distance(&b, &a));
            prop_assert_eq!(mono_distance(&a, &a), 0);
            prop_assert!(d <= a.degree().max(b.degree()));
            if a.common_degree(&b) == 0 {
                prop_assert_eq!(d, a.degree().min(b.degree()));
            }
        }

        #[test]
        fn lex_order_is_total_and_multiplicative(a in arb_monomial(4, 3), b in arb_monomial(4, 3),
                                                 c in arb_monomial(4, 3)) {
            prop_assert_eq!(a.cmp(&b), b.cmp(&a).reverse());
            prop_assert_eq!(a.cmp(&b) == Ordering::Equal, a == b);
            prop_assert_eq!((&a * &c).cmp(&(&b * &c)), a.cmp(&b));
        }

        #[test]
        fn leading_monomial_is_multiplicative(f in arb_poly(4), g in arb_poly(4)) {
            let v = table(4);
            let (f, g) = (build(&v, &f), build(&v, &g));
            prop_assume!(!f.is_zero() && !g.is_zero());
            let fg = &f * &g;
            prop_assert_eq!(fg.leading_monomial().unwrap(),
                            &(f.leading_monomial().unwrap() * g.leading_monomial().unwrap()));
        }

        #[test]
        fn partial_derivatives_commute(f in arb_poly(4), a in 0usize..4, b in 0usize..4) {
            let v = table(4);
            let f = build(&v, &f);
            prop_assert_eq!(f.derive_var(a).derive_var(b), f.derive_var(b).derive_var(a));
            prop_assert_eq!(f.derive_var(a).derive_var(b),
                            f.derive(&Monomial::from_pairs([(a, 1), (b, 1)])));
        }

        #[test]
        fn restrict_then_evaluate(f in arb_poly(4), pt in proptest::collection::vec(-4i64..5, 4),
                                  mask in proptest::collection::vec(any::<bool>(), 4)) {
            let v = table(4);
            let f = build(&v, &f);
            let ring = *f.ring();
            let partial: HashMap<usize, u64> = (0..4).filter(|&i| mask[i])
                .map(|i| (i, ring.from_i64(pt[i]))).collect();
            let full: HashMap<usize, u64> = (0..4).map(|i| (i, ring.from_i64(pt[i]))).collect();
            prop_assert_eq!(f.restrict(&partial).evaluate(&full).unwrap(), f.evaluate(&full).unwrap());
        }

        #[test]
        fn text_format_round_trips(f in arb_poly(4)) {
            let v = table(4);
            let f = build(&v, &f).map_ring(Integers, |c| BigInt::from(*c));
            prop_assert_eq!(SparsePoly::parse(Integers, v.clone(), &f.to_string()).unwrap(), f);
        }
    }
}
