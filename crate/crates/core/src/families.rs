//! Explicit polynomial families.
//!
//! * The design polynomial `NW_{n,k}` over the `n × n` grid of variables
//!   `x{i}_{j}`: one monomial `x_{1,a(1)} ··· x_{n,a(n)}` per univariate `a` of
//!   degree `< k` over GF(n).
//! * The iterated matrix product `IMM_{n,d}`, the (1,1) entry of `d` generic
//!   `n × n` matrices.
//! * The restricted product used for the leading-monomial distance family,
//!   whose leading monomials are computed segment by segment with a dynamic
//!   program instead of expanding `IMM_{n,n}`.
//! * Depth-4 circuits `Σ Π Q_ij` and the shifted-derivative dimension bound
//!   for them.
//!
//! GF(n) elements are identified with `{1..n}` by `e ↦ e + 1`. Row `i` of a
//! design evaluates the univariate at the element `i - 1`.

use std::collections::HashSet;
use std::sync::Arc;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{binomial_or_zero, is_prime, largest_prime_in, Ring};
use crate::poly::{min_pairwise_distance, Monomial, SparsePoly, VarTable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FamilyError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("design degree bound k = {k} must satisfy 1 <= k <= n = {n}")]
    BadDesignDegree { n: u64, k: u64 },
    #[error("univariate of length {len} does not have degree < {k}")]
    BadUnivariate { len: usize, k: u64 },
    #[error("matrix product needs n >= 1 and d >= 2, got n = {n}, d = {d}")]
    BadProductShape { n: usize, d: usize },
    #[error("expansion needs {needed} cells, budget is {budget}")]
    BudgetExceeded { needed: BigInt, budget: u64 },
    #[error("spacing n/4k is not a positive integer for n = {n}, k = {k}")]
    SpacingNotIntegral { n: usize, k: usize },
    #[error("last chosen matrix {last} is not below n = {n}")]
    ChosenOutOfRange { last: usize, n: usize },
    #[error("no prime in [{lo}, {hi}]")]
    NoPrime { lo: u64, hi: u64 },
    #[error("2k = {points} evaluation points exceed the field size {p}")]
    TooFewPoints { points: usize, p: u64 },
    #[error("derivative by {operator} is not a single monomial with coefficient 1")]
    NotSingleMonomial { operator: String },
    #[error("derivative of the restricted product by S_a vanishes for a = {0:?}")]
    VanishingDerivative(Vec<u64>),
    #[error("derivative order k = {k} exceeds product fan-in D = {fan_in}")]
    OrderExceedsFanIn { k: u64, fan_in: u64 },
}

fn check_budget(needed: BigInt, budget: u64) -> Result<(), FamilyError> {
    if needed > BigInt::from(budget) {
        Err(FamilyError::BudgetExceeded { needed, budget })
    } else {
        Ok(())
    }
}

/// Evaluates `coeffs[0] + coeffs[1] z + ...` at `z` over GF(p).
pub fn eval_univariate(coeffs: &[u64], z: u64, p: u64) -> u64 {
    coeffs.iter().rev().fold(0, |acc, &c| (acc * z + c) % p)
}

/// All coefficient vectors of length `k` over GF(p), lexicographic.
pub fn univariates(p: u64, k: usize) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::with_capacity(k)];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..p).map(move |c| {
                    let mut v = prefix.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NwParams {
    pub n: u64,
    pub k: u64,
}

impl NwParams {
    pub fn new(n: u64, k: u64) -> Result<Self, FamilyError> {
        if !is_prime(n) {
            return Err(FamilyError::NotPrime(n));
        }
        if k == 0 || k > n {
            return Err(FamilyError::BadDesignDegree { n, k });
        }
        Ok(Self { n, k })
    }

    pub fn table(&self) -> VarTable {
        let n = self.n;
        VarTable::new((1..=n).flat_map(|i| (1..=n).map(move |j| format!("x{i}_{j}"))))
            .expect("generated names are valid")
    }

    /// Id of `x_{row,col}`, 1-based indices.
    pub fn var(&self, row: u64, col: u64) -> usize {
        ((row - 1) * self.n + (col - 1)) as usize
    }

    /// Column index `a(row) ∈ {1..n}` of the design row `row`.
    pub fn column(&self, a: &[u64], row: u64) -> u64 {
        eval_univariate(a, row - 1, self.n) + 1
    }

    pub fn monomial_of(&self, a: &[u64]) -> Monomial {
        Monomial::from_vars((1..=self.n).map(|i| self.var(i, self.column(a, i))))
    }

    fn check_univariate(&self, a: &[u64]) -> Result<(), FamilyError> {
        if a.len() as u64 > self.k || a.iter().any(|&c| c >= self.n) {
            return Err(FamilyError::BadUnivariate {
                len: a.len(),
                k: self.k,
            });
        }
        Ok(())
    }
}

/// The design polynomial with unit coefficients; exactly `n^k` monomials.
pub fn nw_poly<R: Ring>(p: NwParams, ring: R, budget_cells: u64) -> Result<SparsePoly<R>, FamilyError> {
    check_budget(BigInt::from(p.n).pow(p.k as u32) * p.n, budget_cells)?;
    let vars = Arc::new(p.table());
    let one = ring.one();
    Ok(SparsePoly::from_terms(
        ring,
        vars,
        univariates(p.n, p.k as usize)
            .into_iter()
            .map(|a| (p.monomial_of(&a), one.clone())),
    ))
}

/// Derivative of the design polynomial with respect to the first `k`
/// variables of the monomial of `a`; checked to be the lone monomial
/// `x_{k+1,a(k+1)} ··· x_{n,a(n)}` with coefficient one.
pub fn nw_prefix_derivative<R: Ring>(
    p: NwParams,
    nw: &SparsePoly<R>,
    a: &[u64],
) -> Result<Monomial, FamilyError> {
    p.check_univariate(a)?;
    let prefix = Monomial::from_vars((1..=p.k).map(|i| p.var(i, p.column(a, i))));
    let derivative = nw.derive(&prefix);
    let expected = Monomial::from_vars(((p.k + 1)..=p.n).map(|i| p.var(i, p.column(a, i))));
    match derivative.terms().collect::<Vec<_>>().as_slice() {
        [(m, c)] if **m == expected && **c == nw.ring().one() => Ok(expected),
        _ => Err(FamilyError::NotSingleMonomial {
            operator: prefix.render(nw.vars()),
        }),
    }
}

/// All prefix derivatives in lexicographic order of `a`.
pub fn nw_derivative_family<R: Ring>(
    p: NwParams,
    nw: &SparsePoly<R>,
) -> Result<Vec<(Vec<u64>, Monomial)>, FamilyError> {
    univariates(p.n, p.k as usize)
        .into_par_iter()
        .map(|a| nw_prefix_derivative(p, nw, &a).map(|m| (a, m)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ImmParams {
    pub n: usize,
    pub d: usize,
}

impl ImmParams {
    pub fn new(n: usize, d: usize) -> Result<Self, FamilyError> {
        if n == 0 || d < 2 {
            return Err(FamilyError::BadProductShape { n, d });
        }
        Ok(Self { n, d })
    }

    pub fn table(&self) -> VarTable {
        VarTable::matrices(self.n, self.d)
    }
}

/// Id of `x^{(matrix)}_{row,col}` for `n × n` matrices, independent of how
/// many matrices the table holds.
pub fn matrix_var(n: usize, matrix: usize, row: usize, col: usize) -> usize {
    (matrix - 1) * n * n + (row - 1) * n + (col - 1)
}

/// Expansion of the entry `(row, col)` of `X^{(first)} ··· X^{(last)}` over a
/// table built by [`VarTable::matrices`]; an empty range gives the identity.
pub fn matrix_segment_poly<R: Ring>(
    ring: R,
    vars: Arc<VarTable>,
    first: usize,
    last: usize,
    row: usize,
    col: usize,
) -> SparsePoly<R> {
    let (n, _) = vars.matrix_layout().expect("matrix table");
    if first > last {
        let c = if row == col { ring.one() } else { ring.zero() };
        return SparsePoly::constant(ring, vars, c);
    }
    // paths as (current row, variables so far)
    let mut paths: Vec<(usize, Vec<usize>)> = vec![(row, Vec::new())];
    for matrix in first..=last {
        let targets: Vec<usize> = if matrix == last { vec![col] } else { (1..=n).collect() };
        paths = paths
            .into_iter()
            .flat_map(|(r, used)| {
                targets.iter().map(move |&c| {
                    let mut u = used.clone();
                    u.push(matrix_var(n, matrix, r, c));
                    (c, u)
                })
            })
            .collect();
    }
    let one = ring.one();
    SparsePoly::from_terms(
        ring,
        vars,
        paths.into_iter().map(|(_, u)| (Monomial::from_vars(u), one.clone())),
    )
}

/// `IMM_{n,d}`: exactly `n^{d-1}` multilinear monomials.
pub fn imm_poly<R: Ring>(p: ImmParams, ring: R, budget_cells: u64) -> Result<SparsePoly<R>, FamilyError> {
    check_budget(BigInt::from(p.n).pow(p.d as u32 - 1) * p.d, budget_cells)?;
    let vars = Arc::new(p.table());
    Ok(matrix_segment_poly(ring, vars, 1, p.d, 1, 1))
}

/// Which variables of the generic matrices are fixed to zero.
pub trait ZeroPattern: Sync {
    fn is_zeroed(&self, matrix: usize, row: usize, col: usize) -> bool;
}

/// Nothing restricted.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unrestricted;

impl ZeroPattern for Unrestricted {
    fn is_zeroed(&self, _: usize, _: usize, _: usize) -> bool {
        false
    }
}

/// An explicit set of zeroed `(matrix, row, col)` positions.
impl ZeroPattern for HashSet<(usize, usize, usize)> {
    fn is_zeroed(&self, matrix: usize, row: usize, col: usize) -> bool {
        self.contains(&(matrix, row, col))
    }
}

/// The restriction of `IMM_{n,n}` behind the distance-`n/4` family.
///
/// `2k` matrices `c_r = (r+1) + (r-1)·n/4k` are chosen; the off-diagonal
/// entries of every matrix `q` with `c_{r-1} < q < c_r - 1` (some `2 <= r <= 2k`)
/// are zeroed. The matrices `c_r - 1`, the first matrix and the matrices after
/// `c_{2k}` stay unconstrained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RestrictionPlan {
    pub n: usize,
    pub k: usize,
    pub spacing: usize,
    pub chosen: Vec<usize>,
    pub frozen: Vec<usize>,
    pub unconstrained: Vec<usize>,
}

impl RestrictionPlan {
    pub fn new(n: usize, k: usize) -> Result<Self, FamilyError> {
        if k == 0 || n % (4 * k) != 0 || n / (4 * k) == 0 {
            return Err(FamilyError::SpacingNotIntegral { n, k });
        }
        let spacing = n / (4 * k);
        let chosen: Vec<usize> = (1..=2 * k).map(|r| (r + 1) + (r - 1) * spacing).collect();
        let last = *chosen.last().expect("k >= 1");
        if last >= n {
            return Err(FamilyError::ChosenOutOfRange { last, n });
        }
        let frozen: Vec<usize> = (1..=n)
            .filter(|&q| {
                (2..=2 * k).any(|r| r + (r - 2) * spacing < q && q + 1 < (r + 1) + (r - 1) * spacing)
            })
            .collect();
        let unconstrained = (1..=n)
            .filter(|q| !chosen.contains(q) && !frozen.contains(q))
            .collect();
        Ok(Self {
            n,
            k,
            spacing,
            chosen,
            frozen,
            unconstrained,
        })
    }
}

impl ZeroPattern for RestrictionPlan {
    fn is_zeroed(&self, matrix: usize, row: usize, col: usize) -> bool {
        row != col && self.frozen.binary_search(&matrix).is_ok()
    }
}

/// Leading monomial of the entry `(row, col)` of `X^{(first)} ··· X^{(last)}`
/// under a zero pattern, without expanding the product. `None` when every
/// path is cut.
///
/// Backward over the layers, each state keeps the lex-greatest monomial among
/// the surviving paths from that state to `col` at the end of the range.
pub fn lm_of_segment(
    n: usize,
    pattern: &impl ZeroPattern,
    first: usize,
    last: usize,
    row: usize,
    col: usize,
) -> Option<Monomial> {
    if first > last {
        return (row == col).then(Monomial::one);
    }
    let mut tails: Vec<Option<Monomial>> = (1..=n)
        .map(|r| (!pattern.is_zeroed(last, r, col)).then(|| Monomial::var(matrix_var(n, last, r, col))))
        .collect();
    for matrix in (first..last).rev() {
        tails = (1..=n)
            .map(|r| {
                (1..=n)
                    .filter(|&c| !pattern.is_zeroed(matrix, r, c))
                    .filter_map(|c| {
                        tails[c - 1]
                            .as_ref()
                            .map(|tail| &Monomial::var(matrix_var(n, matrix, r, c)) * tail)
                    })
                    .max()
            })
            .collect();
    }
    tails[row - 1].take()
}

/// One member of the restricted family: the univariate `a`, the variables of
/// `S_a`, and the leading monomial of `∂f/∂S_a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LmMember {
    pub a: Vec<u64>,
    pub s_vars: Vec<usize>,
    pub leading_monomial: Monomial,
}

#[derive(Debug, Clone)]
pub struct RestrictedLmFamily {
    pub plan: RestrictionPlan,
    pub p: u64,
    pub members: Vec<LmMember>,
}

impl RestrictedLmFamily {
    pub fn min_pairwise_distance(&self) -> Option<u32> {
        min_pairwise_distance(self.members.iter().map(|m| &m.leading_monomial))
    }

    /// Largest `|S_a ∩ S_b|` over distinct pairs.
    pub fn max_pairwise_overlap(&self) -> usize {
        let sets: Vec<HashSet<usize>> = self.members.iter().map(|m| m.s_vars.iter().copied().collect()).collect();
        let mut best = 0;
        for i in 0..sets.len() {
            for j in (i + 1)..sets.len() {
                best = best.max(sets[i].intersection(&sets[j]).count());
            }
        }
        best
    }
}

/// Leading monomials of `∂f/∂S_a` for every univariate `a` of degree `< k`
/// over GF(p), `p` the largest prime in `[n/2, n]`, `f` the restricted
/// `IMM_{n,n}`.
///
/// The derivative factors into independent segment entries between the chosen
/// matrices, so its leading monomial is the product of segment leading
/// monomials.
pub fn imm_restricted_lm_family(n: usize, k: usize) -> Result<RestrictedLmFamily, FamilyError> {
    let plan = RestrictionPlan::new(n, k)?;
    let lo = (n as u64).div_ceil(2);
    let p = largest_prime_in(lo, n as u64).ok_or(FamilyError::NoPrime { lo, hi: n as u64 })?;
    if 2 * k as u64 > p {
        return Err(FamilyError::TooFewPoints { points: 2 * k, p });
    }
    let members = univariates(p, k)
        .into_par_iter()
        .map(|a| restricted_member(&plan, p, a))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RestrictedLmFamily { plan, p, members })
}

/// Column `a(r) + 1` hit by the chosen matrix of row `r` (rows are 1-based).
fn design_column(a: &[u64], r: usize, p: u64) -> usize {
    eval_univariate(a, (r - 1) as u64, p) as usize + 1
}

fn restricted_member(plan: &RestrictionPlan, p: u64, a: Vec<u64>) -> Result<LmMember, FamilyError> {
    let n = plan.n;
    let cols: Vec<usize> = (1..=2 * plan.k).map(|r| design_column(&a, r, p)).collect();
    let s_vars: Vec<usize> = plan
        .chosen
        .iter()
        .zip(&cols)
        .enumerate()
        .map(|(r, (&m, &c))| matrix_var(n, m, r + 1, c))
        .collect();
    let mut lm = Monomial::one();
    // (first matrix, last matrix, entry row, entry col) of every segment
    let mut segments = Vec::with_capacity(2 * plan.k + 1);
    let mut from_matrix = 1;
    let mut from_row = 1;
    for (r, (&m, &c)) in plan.chosen.iter().zip(&cols).enumerate() {
        segments.push((from_matrix, m - 1, from_row, r + 1));
        from_matrix = m + 1;
        from_row = c;
    }
    segments.push((from_matrix, n, from_row, 1));
    for (first, last, row, col) in segments {
        let seg = lm_of_segment(n, plan, first, last, row, col)
            .ok_or_else(|| FamilyError::VanishingDerivative(a.clone()))?;
        lm = &lm * &seg;
    }
    Ok(LmMember {
        a,
        s_vars,
        leading_monomial: lm,
    })
}

/// `Σ_i Π_j Q_ij` with recorded parameters `s'` (terms), `D` (largest product
/// fan-in) and `t` (largest factor degree).
#[derive(Debug, Clone)]
pub struct Depth4Circuit<R: Ring> {
    vars: Arc<VarTable>,
    ring: R,
    terms: Vec<Vec<SparsePoly<R>>>,
}

impl<R: Ring> Depth4Circuit<R> {
    pub fn new(ring: R, vars: Arc<VarTable>, terms: Vec<Vec<SparsePoly<R>>>) -> Self {
        Self { vars, ring, terms }
    }

    pub fn terms(&self) -> &[Vec<SparsePoly<R>>] {
        &self.terms
    }

    pub fn top_fan_in(&self) -> usize {
        self.terms.len()
    }

    pub fn product_fan_in(&self) -> usize {
        self.terms.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn factor_degree(&self) -> u32 {
        self.terms.iter().flatten().filter_map(SparsePoly::degree).max().unwrap_or(0)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    /// Distributive expansion of all terms.
    pub fn expand(&self, budget_cells: u64) -> Result<SparsePoly<R>, FamilyError> {
        let needed: BigInt = self
            .terms
            .iter()
            .map(|t| t.iter().map(|q| BigInt::from(q.len())).product::<BigInt>())
            .sum();
        check_budget(needed, budget_cells)?;
        let one = SparsePoly::constant(self.ring.clone(), self.vars.clone(), self.ring.one());
        Ok(self.terms.iter().fold(
            SparsePoly::zero(self.ring.clone(), self.vars.clone()),
            |acc, term| &acc + &term.iter().fold(one.clone(), |p, q| &p * q),
        ))
    }

    pub fn evaluate_dense(&self, point: &[R::Elem]) -> Result<R::Elem, crate::poly::PolyError> {
        let mut acc = self.ring.zero();
        for term in &self.terms {
            let mut prod = self.ring.one();
            for q in term {
                prod = self.ring.mul(&prod, &q.evaluate_dense(point)?);
            }
            acc = self.ring.add(&acc, &prod);
        }
        Ok(acc)
    }
}

/// `s' · C(D+k, k) · C(N + ℓ + k(t-1), N)`.
pub fn depth4_upper_bound(
    top_fan_in: u64,
    fan_in: u64,
    k: u64,
    t: u64,
    nvars: u64,
    ell: u64,
) -> Result<BigInt, FamilyError> {
    if k > fan_in {
        return Err(FamilyError::OrderExceedsFanIn { k, fan_in });
    }
    let top = nvars as i64 + ell as i64 + k as i64 * (t as i64 - 1);
    Ok(BigInt::from(top_fan_in) * binomial_or_zero((fan_in + k) as i64, k) * binomial_or_zero(top, nvars))
}

/// Machine-readable family summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyReport {
    pub family: String,
    pub n: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<u64>,
    pub count: usize,
    pub min_pairwise_distance: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub required_distance: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub single_monomial_derivatives: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_set_overlap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prime: Option<u64>,
    pub pass: bool,
}
