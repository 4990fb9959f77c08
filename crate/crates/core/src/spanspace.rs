//! Derivative spans, shifted derivative spans, and exact ranks.
//!
//! Columns of a coefficient matrix are monomials sorted in descending
//! lexicographic order, so the pivot of an echelon row sits on the leading
//! monomial of the polynomial that row represents.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;
use thiserror::Error;

use crate::algebra::{binomial_exact, PrimeField};
use crate::poly::{Monomial, SparsePoly, VarTable};

/// Default enumeration budget, in matrix cells.
pub const DEFAULT_BUDGET_CELLS: u64 = 20_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpanError {
    #[error("enumeration needs {needed} cells, budget is {budget}")]
    BudgetExceeded { needed: BigInt, budget: u64 },
    #[error("derivative order {k} exceeds degree {degree}")]
    OrderTooLarge { k: u32, degree: u32 },
}

fn check_budget(needed: BigInt, budget: u64) -> Result<(), SpanError> {
    if needed > BigInt::from(budget) {
        Err(SpanError::BudgetExceeded { needed, budget })
    } else {
        Ok(())
    }
}

/// Dense coefficient matrix over a prime field: one row per input polynomial,
/// one column per monomial of the union of supports (greatest first).
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMatrix {
    pub field: PrimeField,
    pub columns: Vec<Monomial>,
    pub rows: Vec<Vec<u64>>,
}

impl CoeffMatrix {
    pub fn from_polys(field: PrimeField, polys: &[SparsePoly<PrimeField>]) -> Self {
        let mut columns: Vec<Monomial> = polys
            .iter()
            .flat_map(|p| p.monomials().cloned())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        columns.sort_unstable_by(|a, b| b.cmp(a));
        let index: HashMap<&Monomial, usize> = columns.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let rows = polys
            .par_iter()
            .map(|p| {
                let mut row = vec![0u64; columns.len()];
                for (m, c) in p.terms() {
                    row[index[m]] = *c;
                }
                row
            })
            .collect();
        Self { field, columns, rows }
    }

    /// Raw matrix with anonymous columns.
    pub fn from_rows(field: PrimeField, rows: Vec<Vec<u64>>) -> Self {
        let width = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == width), "ragged matrix");
        Self {
            field,
            columns: (0..width).map(Monomial::var).collect(),
            rows,
        }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }
}

/// Rank over the prime field by fraction-free forward elimination; pivots are
/// taken column by column from the left.
pub fn rank_ff(m: &CoeffMatrix) -> usize {
    echelon_pivots(m.field, m.rows.clone()).len()
}

/// Fraction-free forward elimination in place. Returns `(row, column)` pivot
/// pairs; rows are rearranged so pivot rows come first in pivot order.
fn echelon_pivots(field: PrimeField, mut rows: Vec<Vec<u64>>) -> Vec<(usize, usize)> {
    let width = rows.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut next = 0;
    for col in 0..width {
        let Some(found) = (next..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(next, found);
        let (head, tail) = rows.split_at_mut(next + 1);
        let pivot_row = &head[next];
        let p = pivot_row[col];
        for row in tail.iter_mut() {
            let a = row[col];
            if a == 0 {
                continue;
            }
            // row <- p * row - a * pivot_row
            for c in col..width {
                let lhs = field.mul_elems(p, row[c]);
                let rhs = field.mul_elems(a, pivot_row[c]);
                row[c] = field.sub_elems(lhs, rhs);
            }
        }
        pivots.push((next, col));
        next += 1;
        if next == rows.len() {
            break;
        }
    }
    pivots
}

/// Rank of an integer matrix, exact over the rationals (Bareiss elimination).
pub fn rank_exact(rows: &[Vec<BigInt>]) -> usize {
    let mut a: Vec<Vec<BigInt>> = rows.to_vec();
    let width = a.first().map_or(0, Vec::len);
    let mut prev = BigInt::from(1);
    let mut rank = 0;
    for col in 0..width {
        if rank == a.len() {
            break;
        }
        let Some(found) = (rank..a.len()).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, found);
        let pivot = a[rank][col].clone();
        let (head, tail) = a.split_at_mut(rank + 1);
        let pivot_row = &head[rank];
        for row in tail.iter_mut() {
            let lead = row[col].clone();
            for c in (col + 1)..width {
                // Bareiss step; the division by the previous pivot is exact
                let v = (&pivot * &row[c] - &lead * &pivot_row[c]) / &prev;
                row[c] = v;
            }
            row[col] = BigInt::zero();
        }
        prev = pivot;
        rank += 1;
    }
    rank
}

/// Row-echelon basis of a span together with the leading monomials of its
/// members. Leading monomials are pairwise distinct and as many as the rank.
#[derive(Debug, Clone)]
pub struct SpanBasis {
    pub basis: Vec<SparsePoly<PrimeField>>,
    pub leading_monomials: Vec<Monomial>,
}

impl SpanBasis {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Reduced row-echelon basis of the span of `polys`.
    pub fn of(field: PrimeField, vars: Arc<VarTable>, polys: &[SparsePoly<PrimeField>]) -> Self {
        let m = CoeffMatrix::from_polys(field, polys);
        let width = m.width();
        let mut rows = m.rows;
        let mut pivots: Vec<usize> = Vec::new();
        let mut next = 0;
        for col in 0..width {
            let Some(found) = (next..rows.len()).find(|&r| rows[r][col] != 0) else {
                continue;
            };
            rows.swap(next, found);
            let inv = field.inv(rows[next][col]).expect("nonzero pivot");
            for c in col..width {
                rows[next][c] = field.mul_elems(rows[next][c], inv);
            }
            let pivot_row = rows[next].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                let a = row[col];
                if r == next || a == 0 {
                    continue;
                }
                for c in col..width {
                    row[c] = field.sub_elems(row[c], field.mul_elems(a, pivot_row[c]));
                }
            }
            pivots.push(col);
            next += 1;
            if next == rows.len() {
                break;
            }
        }
        let basis = rows
            .iter()
            .take(pivots.len())
            .map(|row| {
                SparsePoly::from_terms(
                    field,
                    vars.clone(),
                    row.iter()
                        .enumerate()
                        .filter(|(_, &c)| c != 0)
                        .map(|(i, &c)| (m.columns[i].clone(), c)),
                )
            })
            .collect();
        let leading_monomials = pivots.iter().map(|&c| m.columns[c].clone()).collect();
        Self {
            basis,
            leading_monomials,
        }
    }
}

/// All degree-`k` sub-monomials of `m`.
fn submonomials(m: &Monomial, k: u32, out: &mut HashSet<Monomial>) {
    fn rec(f: &[(u32, u32)], k: u32, acc: &mut Vec<(usize, u32)>, out: &mut HashSet<Monomial>) {
        if k == 0 {
            out.insert(Monomial::from_pairs(acc.iter().copied()));
            return;
        }
        let Some((&(v, e), rest)) = f.split_first() else {
            return;
        };
        let remaining: u32 = rest.iter().map(|&(_, e)| e).sum();
        for take in 0..=e.min(k) {
            if k - take > remaining {
                continue;
            }
            acc.push((v as usize, take));
            rec(rest, k - take, acc, out);
            acc.pop();
        }
    }
    rec(m.factors(), k, &mut Vec::new(), out);
}

/// Distinct nonzero order-`k` partial derivatives of `f`, sorted canonically.
///
/// Only derivative monomials dividing some term of `f` can give a nonzero
/// result, so those are the only ones enumerated.
pub fn order_k_derivatives(f: &SparsePoly<PrimeField>, k: u32) -> Vec<SparsePoly<PrimeField>> {
    let mut ops = HashSet::new();
    for m in f.monomials() {
        if m.degree() >= k {
            submonomials(m, k, &mut ops);
        }
    }
    let mut ops: Vec<Monomial> = ops.into_iter().collect();
    ops.sort_unstable();
    let mut derivs: Vec<SparsePoly<PrimeField>> = ops
        .par_iter()
        .map(|op| f.derive(op))
        .filter(|g| !g.is_zero())
        .collect();
    derivs.sort_by(canonical_cmp);
    derivs.dedup();
    derivs
}

fn canonical_cmp(a: &SparsePoly<PrimeField>, b: &SparsePoly<PrimeField>) -> std::cmp::Ordering {
    a.terms().rev().cmp(b.terms().rev())
}

/// Echelon basis of the span of all order-`k` derivatives of `f`.
pub fn derivative_span(f: &SparsePoly<PrimeField>, k: u32) -> Result<SpanBasis, SpanError> {
    let degree = f.degree().unwrap_or(0);
    if k > degree && !f.is_zero() {
        return Err(SpanError::OrderTooLarge { k, degree });
    }
    let derivs = order_k_derivatives(f, k);
    Ok(SpanBasis::of(*f.ring(), f.vars().clone(), &derivs))
}

/// Every monomial of degree at most `ell` over `nvars` variables, sorted.
pub fn monomials_up_to(nvars: usize, ell: u32) -> Vec<Monomial> {
    fn rec(var: usize, nvars: usize, left: u32, acc: &mut Vec<u32>, out: &mut Vec<Monomial>) {
        if var == nvars {
            out.push(Monomial::from_exponents(acc));
            return;
        }
        for e in 0..=left {
            acc[var] = e;
            rec(var + 1, nvars, left - e, acc, out);
        }
        acc[var] = 0;
    }
    let mut out = Vec::new();
    rec(0, nvars, ell, &mut vec![0; nvars], &mut out);
    out.sort_unstable();
    out
}

/// Exact dimension of the span of `x^i · ∂^j f` with `|i| <= ell`, `|j| = k`,
/// where shifts range over every variable of the table.
pub fn shifted_span_dimension(
    f: &SparsePoly<PrimeField>,
    k: u32,
    ell: u32,
    budget_cells: u64,
) -> Result<usize, SpanError> {
    let nvars = f.vars().len();
    let derivs = derivative_span(f, k)?;
    if derivs.rank() == 0 {
        return Ok(0);
    }
    let shifts = binomial_exact((nvars as u64) + ell as u64, nvars as u64);
    let nrows = &shifts * BigInt::from(derivs.rank());
    check_budget(nrows.clone(), budget_cells)?;
    // columns are bounded by monomials of degree <= ell + deg f
    let top = f.degree().unwrap_or(0) - k + ell;
    let ncols = binomial_exact(nvars as u64 + top as u64, nvars as u64);
    check_budget(nrows * ncols, budget_cells)?;

    let shifts = monomials_up_to(nvars, ell);
    let mut rows: Vec<SparsePoly<PrimeField>> = derivs
        .basis
        .par_iter()
        .flat_map_iter(|g| shifts.iter().map(move |s| g.shift(s)))
        .collect();
    rows.sort_by(canonical_cmp);
    Ok(rank_ff(&CoeffMatrix::from_polys(*f.ring(), &rows)))
}

/// Exact size of `{ x^i · m : |i| <= ell, m in lms }` over `nvars` variables.
pub fn lm_shift_count(
    lms: &[Monomial],
    ell: u32,
    nvars: usize,
    budget_cells: u64,
) -> Result<BigInt, SpanError> {
    if lms.is_empty() {
        return Ok(BigInt::zero());
    }
    let per = binomial_exact(nvars as u64 + ell as u64, nvars as u64);
    check_budget(&per * BigInt::from(lms.len()), budget_cells)?;
    let shifts = monomials_up_to(nvars, ell);
    let seen: HashSet<Monomial> = lms
        .iter()
        .flat_map(|m| shifts.iter().map(move |s| m * s))
        .collect();
    Ok(BigInt::from(seen.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::VarTable;
    use proptest::prelude::*;

    fn gf(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn poly(text: &str, n: usize) -> SparsePoly<PrimeField> {
        SparsePoly::parse(PrimeField::default(), Arc::new(VarTable::indexed("x", n)), text).unwrap()
    }

    /// Rank by the largest nonvanishing minor, straight from the definition.
    fn minor_rank(rows: &[Vec<u64>], f: PrimeField) -> usize {
        fn det(m: &[Vec<u64>], f: PrimeField) -> u64 {
            if m.len() == 1 {
                return m[0][0];
            }
            let mut acc = 0;
            for c in 0..m.len() {
                let minor: Vec<Vec<u64>> = m[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &v)| v).collect())
                    .collect();
                let term = f.mul_elems(m[0][c], det(&minor, f));
                acc = if c % 2 == 0 { f.add_elems(acc, term) } else { f.sub_elems(acc, term) };
            }
            acc
        }
        fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
            if k == 0 {
                return vec![vec![]];
            }
            if n < k {
                return vec![];
            }
            let mut out = subsets(n - 1, k);
            for mut s in subsets(n - 1, k - 1) {
                s.push(n - 1);
                out.push(s);
            }
            out
        }
        let (h, w) = (rows.len(), rows.first().map_or(0, Vec::len));
        for k in (1..=h.min(w)).rev() {
            for rs in subsets(h, k) {
                for cs in subsets(w, k) {
                    let sub: Vec<Vec<u64>> =
                        rs.iter().map(|&r| cs.iter().map(|&c| rows[r][c]).collect()).collect();
                    if det(&sub, f) != 0 {
                        return k;
                    }
                }
            }
        }
        0
    }

    #[test]
    fn rank_examples() {
        let f = gf(7);
        let id = CoeffMatrix::from_rows(f, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(rank_ff(&id), 3);
        assert_eq!(rank_ff(&CoeffMatrix::from_rows(f, vec![vec![0; 4]; 3])), 0);
        assert_eq!(rank_ff(&CoeffMatrix::from_rows(f, vec![vec![1, 2], vec![2, 4]])), 1);
        assert_eq!(rank_ff(&CoeffMatrix::from_rows(f, vec![])), 0);
    }

    #[test]
    fn exact_rank_examples() {
        let m = |rows: Vec<Vec<i64>>| -> Vec<Vec<BigInt>> {
            rows.into_iter().map(|r| r.into_iter().map(BigInt::from).collect()).collect()
        };
        assert_eq!(rank_exact(&m(vec![vec![1, 2], vec![2, 4]])), 1);
        assert_eq!(rank_exact(&m(vec![vec![0, 2, 1], vec![3, 0, 0], vec![3, 2, 1]])), 2);
        // singular mod 7 but not over the rationals
        assert_eq!(rank_exact(&m(vec![vec![7, 0], vec![0, 1]])), 2);
        let rows = vec![vec![7, 0], vec![0, 1]];
        assert_eq!(rank_ff(&CoeffMatrix::from_rows(gf(7), rows.into_iter().map(|r| r.into_iter().map(|v| v % 7).collect()).collect())), 1);
    }

    #[test]
    fn derivative_span_examples() {
        let d = derivative_span(&poly("x1*x2", 2), 1).unwrap();
        assert_eq!(d.rank(), 2);
        let mut lms = d.leading_monomials.clone();
        lms.sort();
        assert_eq!(lms, vec![Monomial::var(1), Monomial::var(0)]);
        assert_eq!(derivative_span(&poly("x1^2 + x2^2", 2), 1).unwrap().rank(), 2);
        assert_eq!(derivative_span(&poly("x1^2 + x2^2", 2), 2).unwrap().rank(), 1);
        assert!(matches!(
            derivative_span(&poly("x1", 2), 2),
            Err(SpanError::OrderTooLarge { .. })
        ));
    }

    #[test]
    fn shifted_dimension_examples() {
        assert_eq!(shifted_span_dimension(&poly("x1*x2", 2), 1, 1, DEFAULT_BUDGET_CELLS).unwrap(), 5);
        assert_eq!(shifted_span_dimension(&poly("x1", 1), 1, 0, DEFAULT_BUDGET_CELLS).unwrap(), 1);
        let f = poly("x1^3*x2 + 2*x2^2*x3 + x1*x3", 3);
        for k in 0..=3 {
            assert_eq!(
                shifted_span_dimension(&f, k, 0, DEFAULT_BUDGET_CELLS).unwrap(),
                derivative_span(&f, k).unwrap().rank()
            );
        }
    }

    #[test]
    fn shifted_dimension_budget_is_enforced() {
        let f = poly("x1*x2*x3*x4", 4);
        assert!(matches!(
            shifted_span_dimension(&f, 1, 6, 100),
            Err(SpanError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn lm_shift_count_examples() {
        let x1sq = Monomial::from_pairs([(0, 2)]);
        let x2sq = Monomial::from_pairs([(1, 2)]);
        let b = DEFAULT_BUDGET_CELLS;
        assert_eq!(lm_shift_count(&[x1sq.clone()], 2, 2, b).unwrap(), BigInt::from(6));
        assert_eq!(lm_shift_count(&[x1sq, x2sq], 2, 2, b).unwrap(), BigInt::from(11));
        assert_eq!(lm_shift_count(&[], 2, 2, b).unwrap(), BigInt::zero());
        assert!(lm_shift_count(&[Monomial::one()], 5, 5, 10).is_err());
    }

    #[test]
    fn monomial_enumeration_counts() {
        for n in 0..5 {
            for ell in 0..5u32 {
                let all = monomials_up_to(n, ell);
                assert_eq!(BigInt::from(all.len()), binomial_exact((n as u32 + ell) as u64, n as u64));
                assert_eq!(all.iter().collect::<HashSet<_>>().len(), all.len());
            }
        }
    }

    fn arb_poly() -> impl Strategy<Value = Vec<(Vec<u32>, u64)>> {
        proptest::collection::vec((proptest::collection::vec(0u32..3, 3), 1u64..50), 1..5)
    }

    fn build(terms: &[(Vec<u32>, u64)]) -> SparsePoly<PrimeField> {
        SparsePoly::from_terms(
            PrimeField::default(),
            Arc::new(VarTable::indexed("x", 3)),
            terms.iter().map(|(e, c)| (Monomial::from_exponents(e), *c)),
        )
    }

    fn rational_rank(rows: &[Vec<i64>]) -> usize {
        use num_rational::BigRational;
        let mut a: Vec<Vec<BigRational>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect())
            .collect();
        let w = a.first().map_or(0, Vec::len);
        let mut rank = 0;
        for c in 0..w {
            let Some(p) = (rank..a.len()).find(|&r| !a[r][c].is_zero()) else { continue };
            a.swap(rank, p);
            for r in 0..a.len() {
                if r != rank && !a[r][c].is_zero() {
                    let f = &a[r][c] / &a[rank][c];
                    for j in 0..w {
                        let v = &f * &a[rank][j];
                        a[r][j] -= v;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    proptest! {
        #[test]
        fn bareiss_matches_rational_gauss(rows in proptest::collection::vec(
            proptest::collection::vec(-3i64..4, 6), 1..=6)) {
            let big: Vec<Vec<BigInt>> = rows.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
            prop_assert_eq!(rank_exact(&big), rational_rank(&rows));
        }

        #[test]
        fn bareiss_on_low_rank_products(a in proptest::collection::vec(proptest::collection::vec(-3i64..4, 2), 2..=6),
                                        b in proptest::collection::vec(proptest::collection::vec(-3i64..4, 6), 2)) {
            let rows: Vec<Vec<i64>> = a.iter()
                .map(|r| (0..6).map(|j| r[0] * b[0][j] + r[1] * b[1][j]).collect())
                .collect();
            let big: Vec<Vec<BigInt>> = rows.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
            let r = rank_exact(&big);
            prop_assert!(r <= 2);
            prop_assert_eq!(r, rational_rank(&rows));
        }

        #[test]
        fn rank_matches_minor_oracle(rows in proptest::collection::vec(
            proptest::collection::vec(0u64..7, 1..=5), 1..=5)) {
            let w = rows[0].len();
            let rows: Vec<Vec<u64>> = rows.into_iter().map(|mut r| { r.resize(w, 0); r }).collect();
            let f = gf(7);
            prop_assert_eq!(rank_ff(&CoeffMatrix::from_rows(f, rows.clone())), minor_rank(&rows, f));
        }

        #[test]
        fn echelon_leading_monomials_distinct(terms in arb_poly(), k in 0u32..3) {
            let f = build(&terms);
            prop_assume!(f.degree().unwrap_or(0) >= k && !f.is_zero());
            let span = derivative_span(&f, k).unwrap();
            let distinct: HashSet<_> = span.leading_monomials.iter().collect();
            prop_assert_eq!(distinct.len(), span.rank());
            for (g, lm) in span.basis.iter().zip(&span.leading_monomials) {
                prop_assert_eq!(g.leading_monomial().unwrap(), lm);
            }
            // raw derivative matrix has the same rank as the basis
            let raw = order_k_derivatives(&f, k);
            prop_assert_eq!(rank_ff(&CoeffMatrix::from_polys(*f.ring(), &raw)), span.rank());
        }

        #[test]
        fn shifted_dimension_monotone_and_dominates_lm_count(terms in arb_poly(), k in 0u32..2) {
            let f = build(&terms);
            prop_assume!(f.degree().unwrap_or(0) >= k && !f.is_zero());
            let lms = derivative_span(&f, k).unwrap().leading_monomials;
            let mut prev = 0;
            for ell in 0..3 {
                let dim = shifted_span_dimension(&f, k, ell, DEFAULT_BUDGET_CELLS).unwrap();
                prop_assert!(dim >= prev);
                prev = dim;
                let count = lm_shift_count(&lms, ell, 3, DEFAULT_BUDGET_CELLS).unwrap();
                prop_assert!(BigInt::from(dim) >= count);
            }
        }
    }
}
