//! Seeded randomized checks of the counting inequalities.
//!
//! Instances are drawn sequentially from one ChaCha8 stream so a seed fixes
//! the whole suite; evaluation runs in parallel and is collected in draw
//! order. Every case carries enough text to be replayed by hand.

use std::sync::Arc;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::PrimeField;
use crate::bounds::verify_distance_lemma;
use crate::families::{depth4_upper_bound, Depth4Circuit};
use crate::poly::{mono_distance, Monomial, SparsePoly, VarTable};
use crate::spanspace::{derivative_span, lm_shift_count, shifted_span_dimension};

fn ser_display<S: serde::Serializer, T: std::fmt::Display>(v: &T, ser: S) -> Result<S::Ok, S::Error> {
    ser.collect_str(v)
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport<C> {
    pub suite: &'static str,
    /// `None` for a single hand-picked instance.
    pub seed: Option<u64>,
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
    pub cases: Vec<C>,
}

impl<C> SuiteReport<C> {
    fn new(suite: &'static str, seed: u64, cases: Vec<C>, ok: impl Fn(&C) -> bool) -> Self {
        let passed = cases.iter().filter(|c| ok(c)).count();
        SuiteReport {
            suite,
            seed: Some(seed),
            trials: cases.len(),
            passed,
            failed: cases.len() - passed,
            cases,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.failed == 0
    }
}

fn random_monomial(rng: &mut ChaCha8Rng, nvars: usize, max_degree: u32) -> Monomial {
    let degree = rng.gen_range(1..=max_degree);
    Monomial::from_vars((0..degree).map(|_| rng.gen_range(0..nvars)))
}

/// Ranges of the extension-count suite.
#[derive(Debug, Clone, Copy)]
pub struct ExtensionConfig {
    pub max_family: usize,
    pub max_vars: usize,
    pub max_shift: u32,
    pub max_distance: u32,
}

impl Default for ExtensionConfig {
    fn default() -> Self {
        ExtensionConfig {
            max_family: 6,
            max_vars: 6,
            max_shift: 6,
            max_distance: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtensionCase {
    pub nvars: usize,
    pub ell: u32,
    pub distance: u32,
    pub monomials: Vec<String>,
    #[serde(serialize_with = "ser_display")]
    pub exact: BigInt,
    #[serde(serialize_with = "ser_display")]
    pub bound: BigInt,
    pub ok: bool,
    pub error: Option<String>,
}

/// Draws families of monomials at pairwise distance at least a drawn `d` by
/// rejection and compares exact shift counts with the extension bound.
pub fn extension_suite(trials: usize, seed: u64, cfg: ExtensionConfig, budget_cells: u64) -> SuiteReport<ExtensionCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances: Vec<(usize, u32, u32, Vec<Monomial>)> = (0..trials)
        .map(|_| {
            let nvars = rng.gen_range(1..=cfg.max_vars);
            let ell = rng.gen_range(0..=cfg.max_shift);
            let distance = rng.gen_range(1..=cfg.max_distance);
            let want = rng.gen_range(1..=cfg.max_family);
            let mut family: Vec<Monomial> = Vec::with_capacity(want);
            for _ in 0..want * 50 {
                if family.len() == want {
                    break;
                }
                let m = random_monomial(&mut rng, nvars, distance + 2);
                if family.iter().all(|o| mono_distance(o, &m) >= distance) && m.degree() >= distance {
                    family.push(m);
                }
            }
            if family.is_empty() {
                family.push(Monomial::from_vars(vec![0; distance as usize]));
            }
            (nvars, ell, distance, family)
        })
        .collect();
    let cases = instances
        .into_par_iter()
        .map(|(nvars, ell, distance, family)| {
            let table = VarTable::indexed("x", nvars);
            let monomials = family.iter().map(|m| m.render(&table)).collect();
            match verify_distance_lemma(&family, nvars, ell, distance, budget_cells) {
                Ok(c) => ExtensionCase {
                    nvars,
                    ell,
                    distance,
                    monomials,
                    exact: c.exact,
                    bound: c.bound,
                    ok: c.ok,
                    error: None,
                },
                Err(e) => ExtensionCase {
                    nvars,
                    ell,
                    distance,
                    monomials,
                    exact: BigInt::from(0),
                    bound: BigInt::from(0),
                    ok: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    SuiteReport::new("extension", seed, cases, |c: &ExtensionCase| c.ok)
}

/// Ranges of the leading-monomial suite.
#[derive(Debug, Clone, Copy)]
pub struct LmCountConfig {
    pub max_vars: usize,
    pub max_degree: u32,
    pub max_order: u32,
    pub max_shift: u32,
    pub max_terms: usize,
}

impl Default for LmCountConfig {
    fn default() -> Self {
        LmCountConfig {
            max_vars: 4,
            max_degree: 4,
            max_order: 2,
            max_shift: 3,
            max_terms: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LmCountCase {
    pub nvars: usize,
    pub k: u32,
    pub ell: u32,
    pub poly: String,
    pub dimension: usize,
    #[serde(serialize_with = "ser_display")]
    pub lm_count: BigInt,
    pub ok: bool,
    pub error: Option<String>,
}

fn random_poly(rng: &mut ChaCha8Rng, field: PrimeField, vars: &Arc<VarTable>, max_degree: u32, max_terms: usize) -> SparsePoly<PrimeField> {
    let nvars = vars.len();
    let terms = rng.gen_range(1..=max_terms);
    let mut f = SparsePoly::zero(field, vars.clone());
    while f.is_zero() {
        for _ in 0..terms {
            let m = random_monomial(rng, nvars, max_degree);
            let c = rng.gen_range(1..field.modulus());
            f.add_term(m, c);
        }
    }
    f
}

/// Compares the shifted derivative dimension of `f` with the shifted count
/// of the leading monomials of its derivative span.
pub fn lm_count_check(f: &SparsePoly<PrimeField>, k: u32, ell: u32, budget_cells: u64) -> LmCountCase {
    let nvars = f.vars().len();
    let result = derivative_span(f, k).and_then(|basis| {
        let lms: Vec<Monomial> = basis.leading_monomials.iter().cloned().collect();
        let count = lm_shift_count(&lms, ell, nvars, budget_cells)?;
        let dim = shifted_span_dimension(f, k, ell, budget_cells)?;
        Ok((dim, count))
    });
    let poly = f.to_string();
    match result {
        Ok((dimension, lm_count)) => LmCountCase {
            nvars,
            k,
            ell,
            poly,
            ok: BigInt::from(dimension) >= lm_count,
            dimension,
            lm_count,
            error: None,
        },
        Err(e) => LmCountCase {
            nvars,
            k,
            ell,
            poly,
            dimension: 0,
            lm_count: BigInt::from(0),
            ok: false,
            error: Some(e.to_string()),
        },
    }
}

pub fn lm_count_suite(trials: usize, seed: u64, cfg: LmCountConfig, field: PrimeField, budget_cells: u64) -> SuiteReport<LmCountCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances: Vec<(SparsePoly<PrimeField>, u32, u32)> = (0..trials)
        .map(|_| {
            let nvars = rng.gen_range(1..=cfg.max_vars);
            let vars = Arc::new(VarTable::indexed("x", nvars));
            let f = random_poly(&mut rng, field, &vars, cfg.max_degree, cfg.max_terms);
            let k = rng.gen_range(0..=cfg.max_order.min(f.degree().unwrap_or(0)));
            let ell = rng.gen_range(0..=cfg.max_shift);
            (f, k, ell)
        })
        .collect();
    let cases = instances
        .into_par_iter()
        .map(|(f, k, ell)| lm_count_check(&f, k, ell, budget_cells))
        .collect();
    SuiteReport::new("lm-count", seed, cases, |c: &LmCountCase| c.ok)
}

/// Ranges of the depth-4 suite; `order` and `shift` pin `k` and `ℓ`.
#[derive(Debug, Clone, Copy)]
pub struct Depth4Config {
    pub max_top: usize,
    pub max_fan_in: usize,
    pub max_factor_degree: u32,
    pub max_vars: usize,
    pub max_order: u32,
    pub max_shift: u32,
    pub order: Option<u32>,
    pub shift: Option<u32>,
}

impl Default for Depth4Config {
    fn default() -> Self {
        Depth4Config {
            max_top: 3,
            max_fan_in: 3,
            max_factor_degree: 2,
            max_vars: 4,
            max_order: 2,
            max_shift: 3,
            order: None,
            shift: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Depth4Case {
    pub nvars: usize,
    pub top_fan_in: usize,
    pub fan_in: usize,
    pub factor_degree: u32,
    pub k: u32,
    pub ell: u32,
    /// Factors of each product, as polynomial text.
    pub circuit: Vec<Vec<String>>,
    pub dimension: usize,
    #[serde(serialize_with = "ser_display")]
    pub bound: BigInt,
    pub ok: bool,
    pub error: Option<String>,
}

/// Exact shifted dimension of the expanded circuit against the formula.
pub fn depth4_check(c: &Depth4Circuit<PrimeField>, factor_degree: u32, k: u32, ell: u32, budget_cells: u64) -> Depth4Case {
    let circuit: Vec<Vec<String>> = c.terms().iter().map(|t| t.iter().map(|q| q.to_string()).collect()).collect();
    let (nvars, top, fan_in) = (c.num_vars(), c.top_fan_in(), c.product_fan_in());
    let bound = depth4_upper_bound(top as u64, fan_in as u64, k as u64, factor_degree as u64, nvars as u64, ell as u64);
    let dim = c
        .expand(budget_cells)
        .map_err(|e| e.to_string())
        .and_then(|f| {
            if f.is_zero() || f.degree().unwrap_or(0) < k {
                Ok(0)
            } else {
                shifted_span_dimension(&f, k, ell, budget_cells).map_err(|e| e.to_string())
            }
        });
    let (dimension, bound, error) = match (dim, bound) {
        (Ok(d), Ok(b)) => (d, b, None),
        (Err(e), _) => (0, BigInt::from(0), Some(e)),
        (_, Err(e)) => (0, BigInt::from(0), Some(e.to_string())),
    };
    Depth4Case {
        nvars,
        top_fan_in: top,
        fan_in,
        factor_degree,
        k,
        ell,
        circuit,
        ok: error.is_none() && BigInt::from(dimension) <= bound,
        dimension,
        bound,
        error,
    }
}

pub fn depth4_suite(trials: usize, seed: u64, cfg: Depth4Config, field: PrimeField, budget_cells: u64) -> SuiteReport<Depth4Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances: Vec<(Depth4Circuit<PrimeField>, u32, u32, u32)> = (0..trials)
        .map(|_| {
            let nvars = rng.gen_range(1..=cfg.max_vars);
            let vars = Arc::new(VarTable::indexed("x", nvars));
            let top = rng.gen_range(1..=cfg.max_top);
            let fan_in = rng.gen_range(1..=cfg.max_fan_in);
            let t = rng.gen_range(1..=cfg.max_factor_degree);
            let terms = (0..top)
                .map(|_| (0..fan_in).map(|_| random_poly(&mut rng, field, &vars, t, 3)).collect())
                .collect();
            let k = cfg.order.unwrap_or_else(|| rng.gen_range(0..=cfg.max_order.min(fan_in as u32)));
            let ell = cfg.shift.unwrap_or_else(|| rng.gen_range(0..=cfg.max_shift));
            (Depth4Circuit::new(field, vars, terms), t, k, ell)
        })
        .collect();
    let cases = instances
        .into_par_iter()
        .map(|(c, t, k, ell)| depth4_check(&c, t, k, ell, budget_cells))
        .collect();
    SuiteReport::new("depth4", seed, cases, |c: &Depth4Case| c.ok)
}
