//! Acceptance gate: ten criteria, each under its own time limit, one
//! PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

use std::collections::{HashMap, HashSet};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shiftrank_core::algebra::{ln_factorial_ratio_estimate, ln_factorial_ratio_exact, Integers, PrimeField};
use shiftrank_core::bounds::{evaluate_bounds, extension_lower_bound, shift_window, BoundConstants, BoundParams, FamilyShape};
use shiftrank_core::families::{
    imm_poly, imm_restricted_lm_family, lm_of_segment, matrix_segment_poly, matrix_var, nw_derivative_family, nw_poly,
    ImmParams, NwParams, Unrestricted, ZeroPattern,
};
use shiftrank_core::poly::{mono_distance, Monomial, VarTable};
use shiftrank_core::spanspace::{lm_shift_count, monomials_up_to, DEFAULT_BUDGET_CELLS};
use shiftrank_core::suites::{depth4_suite, extension_suite, lm_count_suite, Depth4Config, ExtensionConfig, LmCountConfig};
use shiftrank_core::witness::{
    construct_witness, det_hessian_at, imm_hessian_at, imm_value, is_singular_pattern_pair, singular_diagonal,
    verify_witness,
};

const BUDGET: u64 = DEFAULT_BUDGET_CELLS;

/// Lower bound asserted on `ln s' / (√n ln n)` over the sweep grid.
const GROWTH_FLOOR: f64 = 0.01;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Size of `{ x^i · m }` by scanning every monomial of bounded degree for a
/// family member dividing it with a quotient of degree at most `ell`.
fn union_by_divisor_scan(family: &[Monomial], nvars: usize, ell: u32) -> usize {
    let top = family.iter().map(Monomial::degree).max().unwrap_or(0) + ell;
    monomials_up_to(nvars, top)
        .iter()
        .filter(|w| family.iter().any(|m| m.divides(w) && w.degree() - m.degree() <= ell))
        .count()
}

fn extension_count() -> Check {
    let x = |e: &[u32]| Monomial::from_exponents(e);
    let worked = [x(&[2, 0]), x(&[0, 2])];
    let exact = lm_shift_count(&worked, 2, 2, BUDGET).map_err(|e| e.to_string())?;
    let bound = extension_lower_bound(2, 2, 2, 2);
    ensure(exact == BigInt::from(11) && bound == BigInt::from(8), || format!("worked instance gave {exact} vs {bound}"))?;
    ensure(union_by_divisor_scan(&worked, 2, 2) == 11, || "divisor scan disagrees on the worked instance".into())?;

    let report = extension_suite(120, 2024, ExtensionConfig::default(), BUDGET);
    for (i, c) in report.cases.iter().enumerate() {
        ensure(c.ok, || format!("case {i} failed: {c:?}"))?;
    }
    // recount every instance independently
    for (i, c) in report.cases.iter().enumerate() {
        let table = VarTable::indexed("x", c.nvars);
        let family: Vec<Monomial> = c
            .monomials
            .iter()
            .map(|t| shiftrank_core::poly::parse_monomial(t, &table).unwrap())
            .collect();
        let scanned = union_by_divisor_scan(&family, c.nvars, c.ell);
        ensure(BigInt::from(scanned) == c.exact, || format!("case {i}: scan {scanned} vs count {}", c.exact))?;
    }
    Ok(format!("{} instances, worked instance 11 >= 8", report.trials))
}

fn lm_count() -> Check {
    let report = lm_count_suite(60, 77, LmCountConfig::default(), PrimeField::default(), BUDGET);
    for (i, c) in report.cases.iter().enumerate() {
        ensure(c.ok, || format!("case {i} violated: {c:?}"))?;
    }
    Ok(format!("{} polynomials, 0 violations", report.trials))
}

fn depth4_domination() -> Check {
    let report = depth4_suite(110, 99, Depth4Config::default(), PrimeField::default(), BUDGET);
    for (i, c) in report.cases.iter().enumerate() {
        ensure(c.ok, || format!("case {i} violated: {c:?}"))?;
    }
    let tight = report.cases.iter().filter(|c| BigInt::from(c.dimension) == c.bound).count();
    Ok(format!("{} circuits, 0 violations, {tight} tight", report.trials))
}

fn design_family() -> Check {
    let field = PrimeField::default();
    for n in [3u64, 5, 7] {
        for k in [1u64, 2] {
            let p = NwParams::new(n, k).map_err(|e| e.to_string())?;
            let nw = nw_poly(p, field, BUDGET).map_err(|e| e.to_string())?;
            ensure(nw.len() as u64 == n.pow(k as u32), || format!("n={n} k={k}: {} monomials", nw.len()))?;
            let fam = nw_derivative_family(p, &nw).map_err(|e| format!("n={n} k={k}: {e}"))?;
            ensure(fam.len() as u64 == n.pow(k as u32), || format!("n={n} k={k}: {} derivatives", fam.len()))?;
            let required = n as i64 - 2 * k as i64;
            for (i, (a, ma)) in fam.iter().enumerate() {
                for (b, mb) in &fam[i + 1..] {
                    let d = mono_distance(ma, mb) as i64;
                    ensure(d >= required, || format!("n={n} k={k}: {a:?},{b:?} at {d} < {required}"))?;
                }
            }
        }
    }
    Ok("n in {3,5,7}, k in {1,2}".into())
}

struct Zeroed(HashSet<(usize, usize, usize)>);

impl ZeroPattern for Zeroed {
    fn is_zeroed(&self, m: usize, r: usize, c: usize) -> bool {
        self.0.contains(&(m, r, c))
    }
}

fn expanded_segment_lm(n: usize, zeros: &Zeroed, first: usize, last: usize, row: usize, col: usize) -> Option<Monomial> {
    let vars = Arc::new(VarTable::matrices(n, 3));
    let seg = matrix_segment_poly(Integers, vars, first, last, row, col);
    let assignment: HashMap<usize, BigInt> = zeros.0.iter().map(|&(m, r, c)| (matrix_var(n, m, r, c), BigInt::from(0))).collect();
    seg.restrict(&assignment).leading_monomial().ok().cloned()
}

fn restricted_family() -> Check {
    for (n, k, size) in [(8usize, 1usize, 7usize), (16, 2, 169)] {
        let fam = imm_restricted_lm_family(n, k).map_err(|e| e.to_string())?;
        ensure(fam.members.len() == size, || format!("n={n}: {} members", fam.members.len()))?;
        for (i, a) in fam.members.iter().enumerate() {
            let sa: HashSet<usize> = a.s_vars.iter().copied().collect();
            for b in &fam.members[i + 1..] {
                let shared = b.s_vars.iter().filter(|v| sa.contains(v)).count();
                ensure(shared < k, || format!("n={n}: {:?} and {:?} share {shared}", a.a, b.a))?;
                let d = mono_distance(&a.leading_monomial, &b.leading_monomial) as usize;
                ensure(d >= n / 4, || format!("n={n}: {:?} and {:?} at distance {d}", a.a, b.a))?;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut segments = 0;
    for n in 1..=3 {
        for trial in 0..8 {
            let zeros = Zeroed(if trial == 0 {
                HashSet::new()
            } else {
                (1..=3)
                    .flat_map(|m| (1..=n).flat_map(move |r| (1..=n).map(move |c| (m, r, c))))
                    .filter(|_| rng.gen_bool(0.35))
                    .collect()
            });
            for first in 1..=3 {
                for last in first..=3 {
                    for row in 1..=n {
                        for col in 1..=n {
                            let dp = lm_of_segment(n, &zeros, first, last, row, col);
                            let full = expanded_segment_lm(n, &zeros, first, last, row, col);
                            ensure(dp == full, || format!("n={n} {first}..{last} ({row},{col}): {dp:?} vs {full:?}"))?;
                            if trial == 0 {
                                ensure(dp == lm_of_segment(n, &Unrestricted, first, last, row, col), || "unrestricted mismatch".into())?;
                            }
                            segments += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("sizes 7 and 169, {segments} segments match expansion"))
}

fn witness_grid() -> Check {
    let field = PrimeField::default();
    let mut min_margin = usize::MAX;
    for n in 2..=8 {
        for d in 2..=8 {
            let w = construct_witness(n, d).map_err(|e| e.to_string())?;
            ensure(imm_value(n, d, &w.values) == BigInt::from(0), || format!("n={n} d={d}: nonzero value"))?;
            let exact = n <= 4 && d <= 4;
            let r = verify_witness(&w, field, exact);
            ensure(r.pass, || format!("n={n} d={d}: {r:?}"))?;
            let rank = r.rank_mod_p.unwrap();
            if let Some(q) = r.rank_exact {
                ensure(q == rank, || format!("n={n} d={d}: exact {q} vs mod p {rank}"))?;
            }
            if d == 2 {
                ensure(rank == 2 * n, || format!("n={n}: two-matrix rank {rank}"))?;
            }
            min_margin = min_margin.min(rank - d * (n - 1));
        }
    }
    Ok(format!("49 points, smallest rank surplus {min_margin}"))
}

fn hessian_closed_form() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut points = 0;
    for n in 1..=3 {
        for d in 2..=3 {
            let f = imm_poly(ImmParams::new(n, d).unwrap(), Integers, BUDGET).map_err(|e| e.to_string())?;
            let size = n * n * d;
            let second: Vec<Vec<_>> = (0..size).map(|a| (0..size).map(|b| f.derive_var(a).derive_var(b)).collect()).collect();
            for _ in 0..4 {
                let point: Vec<i64> = (0..size).map(|_| rng.gen_range(-5..=5)).collect();
                let big: Vec<BigInt> = point.iter().map(|&v| BigInt::from(v)).collect();
                let h = imm_hessian_at(n, d, &point).map_err(|e| e.to_string())?;
                for a in 0..size {
                    for b in 0..size {
                        let want = second[a][b].evaluate_dense(&big).unwrap();
                        ensure(BigInt::from(h.entries[a][b]) == want, || format!("n={n} d={d} entry ({a},{b})"))?;
                    }
                }
                points += 1;
            }
        }
    }
    Ok(format!("{points} random points, n,d <= 3"))
}

/// `sgn(k−i)·sgn(l−j)·(−1)^{i+j+k+l}` times the minor without rows `i,k`
/// and columns `j,l`.
fn cofactor_entry(y: &[Vec<i64>], a: usize, b: usize) -> i64 {
    fn det(a: &[Vec<i64>]) -> i64 {
        if a.is_empty() {
            return 1;
        }
        (0..a.len())
            .map(|c| {
                let minor: Vec<Vec<i64>> = a[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &v)| v).collect())
                    .collect();
                (if c % 2 == 0 { 1 } else { -1 }) * a[0][c] * det(&minor)
            })
            .sum()
    }
    let m = y.len();
    let (i, j, k, l) = (a / m, a % m, b / m, b % m);
    if i == k || j == l {
        return 0;
    }
    let minor: Vec<Vec<i64>> = (0..m)
        .filter(|&r| r != i && r != k)
        .map(|r| (0..m).filter(|&c| c != j && c != l).map(|c| y[r][c]).collect())
        .collect();
    let parity = if (i + j + k + l) % 2 == 0 { 1 } else { -1 };
    parity * (k as i64 - i as i64).signum() * (l as i64 - j as i64).signum() * det(&minor)
}

fn determinant_pattern() -> Check {
    let mut ranks = Vec::new();
    for m in 2..=7 {
        let y = singular_diagonal(m);
        let h = det_hessian_at(m, &y).map_err(|e| e.to_string())?;
        for a in 0..m * m {
            for b in 0..m * m {
                ensure(h.entries[a][b] == cofactor_entry(&y, a, b), || format!("m={m} entry ({a},{b}) differs from cofactor"))?;
            }
        }
        for (a, b) in h.nonzero_pairs() {
            ensure(is_singular_pattern_pair(m, a, b), || format!("m={m}: unexpected nonzero at ({a},{b})"))?;
        }
        let rank = h.rank_exact();
        ensure(rank <= 3 * m, || format!("m={m}: rank {rank} > {}", 3 * m))?;
        ranks.push(format!("{m}:{rank}"));
    }
    Ok(format!("ranks {}", ranks.join(" ")))
}

fn factorial_calibration() -> Check {
    let mut worst: f64 = 0.0;
    let mut points = 0usize;
    for a in [100u64, 1_000, 10_000, 100_000, 1_000_000] {
        let cap = ((a as f64).sqrt() / 4.0).floor() as u64;
        for f in 0..=cap {
            for g in 0..=cap {
                let exact = ln_factorial_ratio_exact(a, f, g).map_err(|e| e.to_string())?;
                let (estimate, budget) = ln_factorial_ratio_estimate(a, f, g).map_err(|e| e.to_string())?;
                let err = (exact - estimate).abs();
                ensure(err <= 3.0 * budget, || format!("a={a} f={f} g={g}: error {err} > 3*{budget}"))?;
                if budget > 0.0 {
                    worst = worst.max(err / budget);
                }
                points += 1;
            }
        }
    }
    Ok(format!("{points} points, worst error/budget {worst:.3}"))
}

fn bound_engine() -> Check {
    for (shape, base) in [(FamilyShape::Nw, BoundConstants::NW), (FamilyShape::Imm, BoundConstants::IMM)] {
        let mut c = base;
        c.c_prime = 1.0;
        let boundary = c.mu / (4.0 * c.c);
        for (eps, want) in [(boundary, false), (boundary * (1.0 - 1e-9), true), (boundary * (1.0 + 1e-9), false)] {
            c.eps = eps;
            let p = BoundParams::for_family(shape, 10_000, c).map_err(|e| e.to_string())?;
            let w = shift_window(&p);
            ensure(w.nonempty == want && evaluate_bounds(&p).feasible == want, || format!("{shape:?} eps={eps}: window {w:?}"))?;
        }
    }
    let mut ratios = Vec::new();
    for (shape, c) in [(FamilyShape::Nw, BoundConstants::NW), (FamilyShape::Imm, BoundConstants::IMM)] {
        let mut last = f64::NEG_INFINITY;
        let mut min_ratio = f64::INFINITY;
        for e in [2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0f64] {
            let n = 10f64.powf(e).round() as u64;
            let r = evaluate_bounds(&BoundParams::for_family(shape, n, c).map_err(|e| e.to_string())?);
            ensure(r.feasible, || format!("{shape:?} n={n} infeasible"))?;
            ensure(r.growth_ratio >= GROWTH_FLOOR, || format!("{shape:?} n={n}: ratio {}", r.growth_ratio))?;
            ensure(r.ln_sprime_bound > last, || format!("{shape:?} n={n}: bound not increasing"))?;
            last = r.ln_sprime_bound;
            min_ratio = min_ratio.min(r.growth_ratio);
        }
        ratios.push(format!("{shape:?} min ratio {min_ratio:.4}"));
    }
    Ok(format!("flip at mu/4c, {}", ratios.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Check); 10] = [
        ("extension count vs exact union", 10, extension_count),
        ("shifted dimension vs shifted leading monomials", 30, lm_count),
        ("depth-4 bound domination", 60, depth4_domination),
        ("design polynomial properties", 10, design_family),
        ("restricted product leading-monomial family", 60, restricted_family),
        ("witness grid", 120, witness_grid),
        ("closed-form product Hessian", 10, hessian_closed_form),
        ("determinant Hessian pattern", 30, determinant_pattern),
        ("factorial-ratio calibration", 5, factorial_calibration),
        ("bound-engine coherence", 5, bound_engine),
    ];
    let mut failures = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(*limit);
        let (tag, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {limit}s limit")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if tag == "FAIL" {
            failures += 1;
        }
        println!("{tag} [{:>2}] {name} ({:.2}s / {limit}s): {detail}", i + 1, elapsed.as_secs_f64());
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
