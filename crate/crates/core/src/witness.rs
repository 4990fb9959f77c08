//! Hessians of the iterated matrix product and of the determinant, and an
//! explicit zero of `IMM_{n,d}` at which the Hessian has rank at least
//! `d(n − 1)`.
//!
//! Points are dense vectors indexed like [`VarTable::matrices`]: the variable
//! `x^{(t)}_{ij}` sits at `(t−1)n² + (i−1)n + (j−1)`.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{Integers, PrimeField};
use crate::families::matrix_var;
use crate::poly::{Monomial, SparsePoly, VarTable};
use crate::spanspace::{rank_exact, rank_ff, CoeffMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WitnessError {
    #[error("need n >= 2 and d >= 2, got n = {n}, d = {d}")]
    BadShape { n: usize, d: usize },
    #[error("point assigns {got} of {expected} variables")]
    IncompletePoint { expected: usize, got: usize },
    #[error("assignment x{t}_{i}_{j} outside the {n}x{n}, {d}-matrix layout")]
    AssignmentOutOfRange { t: usize, i: usize, j: usize, n: usize, d: usize },
    #[error("entry overflowed 64-bit integers")]
    Overflow,
    #[error("row 1 entries 2..n of the prefix product vanish at level {0}")]
    InvariantBroken(usize),
    #[error("Leibniz expansion of a {m}x{m} determinant exceeds the budget")]
    DeterminantTooLarge { m: usize },
    #[error("matrix must be square {m}x{m}")]
    NotSquare { m: usize },
}

type Mat = Vec<Vec<i64>>;

fn identity(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect()
}

fn mat_mul(a: &Mat, b: &Mat) -> Result<Mat, WitnessError> {
    let n = a.len();
    let mut out = vec![vec![0i64; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == 0 {
                continue;
            }
            for j in 0..n {
                let t = a[i][k].checked_mul(b[k][j]).ok_or(WitnessError::Overflow)?;
                out[i][j] = out[i][j].checked_add(t).ok_or(WitnessError::Overflow)?;
            }
        }
    }
    Ok(out)
}

/// Matrix `t` (1-based) of a dense point.
fn matrix_of(n: usize, point: &[i64], t: usize) -> Mat {
    let base = (t - 1) * n * n;
    (0..n).map(|i| point[base + i * n..base + (i + 1) * n].to_vec()).collect()
}

/// One step of the construction: the pivot row chosen for matrix `level`
/// and row 1 of the product of the matrices before it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessStep {
    pub level: usize,
    pub pivot: usize,
    pub s_values: Vec<i64>,
}

/// A total integer assignment to the variables of `IMM_{n,d}` with the log of
/// the construction that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessPoint {
    pub n: usize,
    pub d: usize,
    pub values: Vec<i64>,
    pub steps: Vec<WitnessStep>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Assignment {
    t: usize,
    i: usize,
    j: usize,
    value: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WitnessFile {
    n: usize,
    d: usize,
    assignments: Vec<Assignment>,
    #[serde(default)]
    steps: Vec<WitnessStep>,
}

impl Serialize for WitnessPoint {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let n = self.n;
        let assignments = self
            .values
            .iter()
            .enumerate()
            .map(|(id, &value)| Assignment {
                t: id / (n * n) + 1,
                i: (id / n) % n + 1,
                j: id % n + 1,
                value,
            })
            .collect();
        WitnessFile {
            n,
            d: self.d,
            assignments,
            steps: self.steps.clone(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for WitnessPoint {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let file = WitnessFile::deserialize(de)?;
        WitnessPoint::from_file(file).map_err(serde::de::Error::custom)
    }
}

impl WitnessPoint {
    fn from_file(file: WitnessFile) -> Result<Self, WitnessError> {
        let (n, d) = (file.n, file.d);
        if n < 2 || d < 2 {
            return Err(WitnessError::BadShape { n, d });
        }
        let expected = n * n * d;
        let mut values = vec![None; expected];
        for a in &file.assignments {
            if !(1..=d).contains(&a.t) || !(1..=n).contains(&a.i) || !(1..=n).contains(&a.j) {
                return Err(WitnessError::AssignmentOutOfRange { t: a.t, i: a.i, j: a.j, n, d });
            }
            values[matrix_var(n, a.t, a.i, a.j)] = Some(a.value);
        }
        let got = values.iter().filter(|v| v.is_some()).count();
        if got != expected {
            return Err(WitnessError::IncompletePoint { expected, got });
        }
        Ok(WitnessPoint {
            n,
            d,
            values: values.into_iter().map(Option::unwrap).collect(),
            steps: file.steps,
        })
    }

    pub fn value(&self, t: usize, i: usize, j: usize) -> i64 {
        self.values[matrix_var(self.n, t, i, j)]
    }

    fn set(&mut self, t: usize, i: usize, j: usize, v: i64) {
        let id = matrix_var(self.n, t, i, j);
        self.values[id] = v;
    }

    pub fn matrix(&self, t: usize) -> Vec<Vec<i64>> {
        matrix_of(self.n, &self.values, t)
    }
}

/// Row 1 of `X^{(1)} ··· X^{(upto)}`; `upto = 0` gives `e_1`.
fn prefix_row(n: usize, point: &[i64], upto: usize) -> Result<Vec<i64>, WitnessError> {
    let mut row = vec![0i64; n];
    row[0] = 1;
    for t in 1..=upto {
        let m = matrix_of(n, point, t);
        let mut next = vec![0i64; n];
        for (k, &rk) in row.iter().enumerate() {
            if rk == 0 {
                continue;
            }
            for j in 0..n {
                let v = rk.checked_mul(m[k][j]).ok_or(WitnessError::Overflow)?;
                next[j] = next[j].checked_add(v).ok_or(WitnessError::Overflow)?;
            }
        }
        row = next;
    }
    Ok(row)
}

/// The inductive construction.
///
/// Base (two matrices): row 1 of `X^{(1)}` is `(0, 1, …, 1)`, column 1 of
/// `X^{(2)}` is `e_1`. Extending from `level` to `level + 1` matrices: column
/// 1 of `X^{(level+1)}` becomes `e_1` with everything else zero, and the
/// columns `2..n` of `X^{(level)}` are filled with ones in the single row
/// `i* = min{ i >= 2 : s_i != 0 }`, `s` being row 1 of the product of the
/// first `level − 1` matrices. Column 1 of `X^{(level)}` is kept from the
/// previous stage.
pub fn construct_witness(n: usize, d: usize) -> Result<WitnessPoint, WitnessError> {
    if n < 2 || d < 2 {
        return Err(WitnessError::BadShape { n, d });
    }
    let mut w = WitnessPoint {
        n,
        d,
        values: vec![0; n * n * d],
        steps: Vec::with_capacity(d - 2),
    };
    for j in 2..=n {
        w.set(1, 1, j, 1);
    }
    w.set(2, 1, 1, 1);
    for level in 2..d {
        w.set(level + 1, 1, 1, 1);
        let s = prefix_row(n, &w.values, level - 1)?;
        let pivot = (2..=n).find(|&i| s[i - 1] != 0).ok_or(WitnessError::InvariantBroken(level))?;
        for i in 1..=n {
            for j in 2..=n {
                w.set(level, i, j, i64::from(i == pivot));
            }
        }
        w.steps.push(WitnessStep {
            level,
            pivot,
            s_values: s,
        });
    }
    Ok(w)
}

/// A square integer matrix with labelled rows and columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HessianMatrix {
    /// `(matrix, row, col)` per index, 1-based.
    pub labels: Vec<(usize, usize, usize)>,
    pub entries: Vec<Vec<i64>>,
}

impl HessianMatrix {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.dim();
        (0..n).all(|r| (0..r).all(|c| self.entries[r][c] == self.entries[c][r]))
    }

    /// Whether every diagonal block of side `block` vanishes.
    pub fn diagonal_blocks_zero(&self, block: usize) -> bool {
        (0..self.dim()).all(|r| {
            let start = r / block * block;
            (start..start + block).all(|c| self.entries[r][c] == 0)
        })
    }

    pub fn rank_mod(&self, field: PrimeField) -> usize {
        let rows = self
            .entries
            .iter()
            .map(|row| row.iter().map(|&v| field.reduce_i64(v)).collect())
            .collect();
        rank_ff(&CoeffMatrix::from_rows(field, rows))
    }

    pub fn rank_exact(&self) -> usize {
        let rows: Vec<Vec<BigInt>> = self.entries.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
        rank_exact(&rows)
    }

    /// Index pairs `(r, c)` with a nonzero entry.
    pub fn nonzero_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.dim();
        (0..n)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .filter(|&(r, c)| self.entries[r][c] != 0)
            .collect()
    }
}

/// Hessian of `IMM_{n,d}` at a dense point, from the closed form
/// `[X^{(1)}···X^{(s−1)}]_{1,i} · [X^{(s+1)}···X^{(t−1)}]_{j,k} · [X^{(t+1)}···X^{(d)}]_{l,1}`
/// for the block `s < t`, completed symmetrically.
pub fn imm_hessian_at(n: usize, d: usize, point: &[i64]) -> Result<HessianMatrix, WitnessError> {
    if n == 0 || d < 2 {
        return Err(WitnessError::BadShape { n, d });
    }
    let size = n * n * d;
    if point.len() != size {
        return Err(WitnessError::IncompletePoint {
            expected: size,
            got: point.len(),
        });
    }
    let mats: Vec<Mat> = (1..=d).map(|t| matrix_of(n, point, t)).collect();
    // prefix[s] = row 1 of X^(1)..X^(s), suffix[t] = column 1 of X^(t+1)..X^(d)
    let prefix: Vec<Vec<i64>> = (0..=d).map(|s| prefix_row(n, point, s)).collect::<Result<_, _>>()?;
    let mut suffix = vec![vec![0i64; n]; d + 1];
    suffix[d][0] = 1;
    for t in (1..d).rev() {
        let m = &mats[t];
        for i in 0..n {
            let mut acc = 0i64;
            for k in 0..n {
                acc = acc
                    .checked_add(m[i][k].checked_mul(suffix[t + 1][k]).ok_or(WitnessError::Overflow)?)
                    .ok_or(WitnessError::Overflow)?;
            }
            suffix[t][i] = acc;
        }
    }
    let pairs: Vec<(usize, usize)> = (1..=d).flat_map(|s| ((s + 1)..=d).map(move |t| (s, t))).collect();
    let blocks: Vec<(usize, usize, Mat)> = pairs
        .par_iter()
        .map(|&(s, t)| {
            let mut middle = identity(n);
            for q in (s + 1)..t {
                middle = mat_mul(&middle, &mats[q - 1])?;
            }
            let left = &prefix[s - 1];
            let right = &suffix[t];
            let mut block = vec![vec![0i64; n * n]; n * n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let lm = left[i].checked_mul(middle[j][k]).ok_or(WitnessError::Overflow)?;
                        for l in 0..n {
                            block[i * n + j][k * n + l] = lm.checked_mul(right[l]).ok_or(WitnessError::Overflow)?;
                        }
                    }
                }
            }
            Ok((s, t, block))
        })
        .collect::<Result<_, WitnessError>>()?;
    let mut entries = vec![vec![0i64; size]; size];
    let sq = n * n;
    for (s, t, block) in blocks {
        for (r, row) in block.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                entries[(s - 1) * sq + r][(t - 1) * sq + c] = v;
                entries[(t - 1) * sq + c][(s - 1) * sq + r] = v;
            }
        }
    }
    let labels = (0..size).map(|id| (id / sq + 1, (id / n) % n + 1, id % n + 1)).collect();
    Ok(HessianMatrix { labels, entries })
}

/// Outcome of checking a witness point; failures are data, not errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessReport {
    pub n: usize,
    pub d: usize,
    #[serde(serialize_with = "ser_display")]
    pub imm_value: BigInt,
    pub imm_zero: bool,
    pub required_rank: usize,
    pub prime: u64,
    pub rank_mod_p: Option<usize>,
    pub rank_exact: Option<usize>,
    pub rank_ok: bool,
    /// Prefix lengths `d'` at which row 1 entries `2..n` of
    /// `X^{(1)}···X^{(d'−1)}` all vanish.
    pub prefix_failures: Vec<usize>,
    pub prefix_ok: bool,
    pub error: Option<String>,
    pub pass: bool,
}

fn ser_display<S: serde::Serializer, T: std::fmt::Display>(v: &T, ser: S) -> Result<S::Ok, S::Error> {
    ser.collect_str(v)
}

/// `IMM_{n,d}` at the point by vector-matrix products in big integers.
pub fn imm_value(n: usize, d: usize, point: &[i64]) -> BigInt {
    let mut row: Vec<BigInt> = (0..n).map(|i| BigInt::from(i64::from(i == 0))).collect();
    for t in 1..=d {
        let m = matrix_of(n, point, t);
        row = (0..n)
            .map(|j| row.iter().enumerate().map(|(k, r)| r * m[k][j]).sum())
            .collect();
    }
    row.swap_remove(0)
}

/// Checks `IMM(w) = 0`, `rank Hess(w) >= d(n−1)` and the prefix invariant.
/// The rank is taken modulo `field` and, with `exact`, also over the
/// rationals; with both present the exact rank decides.
pub fn verify_witness(w: &WitnessPoint, field: PrimeField, exact: bool) -> WitnessReport {
    let (n, d) = (w.n, w.d);
    let imm_value = imm_value(n, d, &w.values);
    let imm_zero = imm_value.is_zero();
    let required_rank = d * (n - 1);
    let mut prefix_failures = Vec::new();
    let mut error = None;
    for level in 2..=d {
        // big integers: replayed points need not stay small
        let mut row: Vec<BigInt> = (0..n).map(|i| BigInt::from(i64::from(i == 0))).collect();
        for t in 1..level {
            let m = w.matrix(t);
            row = (0..n).map(|j| row.iter().enumerate().map(|(k, r)| r * m[k][j]).sum()).collect();
        }
        if row[1..].iter().all(Zero::is_zero) {
            prefix_failures.push(level);
        }
    }
    let (rank_mod_p, rank_exact) = match imm_hessian_at(n, d, &w.values) {
        Ok(h) => (Some(h.rank_mod(field)), exact.then(|| h.rank_exact())),
        Err(e) => {
            error = Some(e.to_string());
            (None, None)
        }
    };
    let rank_ok = rank_exact.or(rank_mod_p).is_some_and(|r| r >= required_rank);
    let prefix_ok = prefix_failures.is_empty();
    WitnessReport {
        n,
        d,
        imm_value,
        imm_zero,
        required_rank,
        prime: field.modulus(),
        rank_mod_p,
        rank_exact,
        rank_ok,
        prefix_failures,
        prefix_ok,
        pass: imm_zero && rank_ok && prefix_ok && error.is_none(),
        error,
    }
}

/// Largest matrix side whose Leibniz expansion is attempted.
pub const MAX_DET_SIDE: usize = 8;

/// `det` of a generic `m × m` matrix over variables `y{i}_{j}` as a sparse
/// polynomial, by the Leibniz formula.
pub fn determinant_poly(m: usize) -> Result<SparsePoly<Integers>, WitnessError> {
    if m > MAX_DET_SIDE {
        return Err(WitnessError::DeterminantTooLarge { m });
    }
    let vars = Arc::new(
        VarTable::new((1..=m).flat_map(|i| (1..=m).map(move |j| format!("y{i}_{j}")))).expect("generated names are valid"),
    );
    let mut perm: Vec<usize> = (0..m).collect();
    let mut terms = Vec::new();
    permutations(&mut perm, 0, &mut |p| {
        let inversions = (0..m).flat_map(|i| ((i + 1)..m).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
        let sign = if inversions % 2 == 0 { 1 } else { -1 };
        terms.push((Monomial::from_vars((0..m).map(|i| i * m + p[i])), BigInt::from(sign)));
    });
    Ok(SparsePoly::from_terms(Integers, vars, terms))
}

fn permutations(p: &mut Vec<usize>, at: usize, visit: &mut impl FnMut(&[usize])) {
    if at == p.len() {
        visit(p);
        return;
    }
    for i in at..p.len() {
        p.swap(at, i);
        permutations(p, at + 1, visit);
        p.swap(at, i);
    }
}

/// Hessian of `det` at the `m × m` integer matrix `y`, by differentiating the
/// Leibniz expansion twice and evaluating. Index `(i−1)m + (j−1)` is `y_{ij}`.
pub fn det_hessian_at(m: usize, y: &[Vec<i64>]) -> Result<HessianMatrix, WitnessError> {
    if y.len() != m || y.iter().any(|r| r.len() != m) {
        return Err(WitnessError::NotSquare { m });
    }
    let det = determinant_poly(m)?;
    let point: Vec<BigInt> = y.iter().flatten().map(|&v| BigInt::from(v)).collect();
    let size = m * m;
    let first: Vec<SparsePoly<Integers>> = (0..size).map(|v| det.derive_var(v)).collect();
    let entries = (0..size)
        .into_par_iter()
        .map(|a| {
            (0..size)
                .map(|b| {
                    let v = first[a].derive_var(b).evaluate_dense(&point).expect("dense point");
                    i64::try_from(v).map_err(|_| WitnessError::Overflow)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let labels = (0..size).map(|id| (1, id / m + 1, id % m + 1)).collect();
    Ok(HessianMatrix { labels, entries })
}

/// `diag(0, 1, …, 1)`.
pub fn singular_diagonal(m: usize) -> Vec<Vec<i64>> {
    (0..m).map(|i| (0..m).map(|j| i64::from(i == j && i > 0)).collect()).collect()
}

/// Whether an index pair of the `m × m` determinant Hessian has one of the
/// forms `(11, tt)`, `(t1, 1t)`, `(1t, t1)` for `t >= 2`, in either order.
pub fn is_singular_pattern_pair(m: usize, a: usize, b: usize) -> bool {
    let pos = |v: usize| (v / m + 1, v % m + 1);
    let matches = |(i, j): (usize, usize), (k, l): (usize, usize)| {
        let t = k.max(l).max(i).max(j);
        t >= 2
            && (((i, j) == (1, 1) && (k, l) == (t, t))
                || ((i, j) == (t, 1) && (k, l) == (1, t))
                || ((i, j) == (1, t) && (k, l) == (t, 1)))
    };
    matches(pos(a), pos(b)) || matches(pos(b), pos(a))
}

/// Rank comparison on the smallest instance: `IMM_{2,2}` equals
/// `det [[x11, −x12], [y21, y11]]` (`x`, `y` the two matrices), and at the
/// base witness point the Hessian rank of the product is at most the Hessian
/// rank of the determinant at the image matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ToyRankCheck {
    pub representation_matches: bool,
    pub imm_rank: usize,
    pub det_rank: usize,
    pub holds: bool,
}

pub fn toy_rank_inequality() -> Result<ToyRankCheck, WitnessError> {
    let n = 2;
    let vars = Arc::new(VarTable::matrices(n, 2));
    let imm = crate::families::matrix_segment_poly(Integers, vars.clone(), 1, 2, 1, 1);
    let v = |t, i, j| SparsePoly::var(Integers, vars.clone(), matrix_var(n, t, i, j));
    let entries = [[v(1, 1, 1), -&v(1, 1, 2)], [v(2, 2, 1), v(2, 1, 1)]];
    let det = &(&entries[0][0] * &entries[1][1]) - &(&entries[0][1] * &entries[1][0]);
    let w = construct_witness(n, 2)?;
    let image: Vec<Vec<i64>> = vec![
        vec![w.value(1, 1, 1), -w.value(1, 1, 2)],
        vec![w.value(2, 2, 1), w.value(2, 1, 1)],
    ];
    let imm_rank = imm_hessian_at(n, 2, &w.values)?.rank_exact();
    let det_rank = det_hessian_at(2, &image)?.rank_exact();
    Ok(ToyRankCheck {
        representation_matches: det == imm,
        imm_rank,
        det_rank,
        holds: det == imm && imm_rank <= det_rank,
    })
}
