//! Counting bounds for shifted leading monomials and the size bound for
//! depth-4 circuits.
//!
//! `extension_lower_bound` is the inclusion-exclusion bound on the number of
//! distinct shifts of `s` pairwise-far monomials; `verify_distance_lemma`
//! checks it against exact enumeration. [`BoundParams`] carries one parameter
//! point of the size argument and [`BoundReport`] its evaluation.

use std::io::Write;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{binomial_exact, binomial_or_zero, largest_prime_in, ln_bigint};
use crate::poly::{mono_distance, Monomial};
use crate::spanspace::{lm_shift_count, SpanError};

/// Bit size up to which log-domain comparisons are double-checked exactly.
pub const EXACT_CHECK_BITS: u64 = 4096;

/// Regime guards read `x = o(y)` as `x <= y / GUARD_FACTOR`.
pub const GUARD_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("monomials {i} and {j} are at distance {distance} < {required}")]
    DistanceViolated {
        i: usize,
        j: usize,
        distance: u32,
        required: u32,
    },
    #[error(transparent)]
    Span(#[from] SpanError),
    #[error("invalid bound parameters: {0}")]
    InvalidParams(String),
    #[error("csv output failed: {0}")]
    Csv(String),
}

/// `s·C(N+ℓ, N) − s²·C(N+ℓ−d, N)`; may be negative.
pub fn extension_lower_bound(s: u64, nvars: u64, ell: u64, d: u64) -> BigInt {
    let s = BigInt::from(s);
    let total = binomial_exact(nvars + ell, nvars);
    let overlap = binomial_or_zero(nvars as i64 + ell as i64 - d as i64, nvars);
    &s * total - &s * &s * overlap
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DistanceLemmaCheck {
    pub s: usize,
    pub nvars: usize,
    pub ell: u32,
    pub distance: u32,
    #[serde(serialize_with = "ser_display")]
    pub exact: BigInt,
    #[serde(serialize_with = "ser_display")]
    pub bound: BigInt,
    pub ok: bool,
}

fn ser_display<S: serde::Serializer, T: std::fmt::Display>(v: &T, ser: S) -> Result<S::Ok, S::Error> {
    ser.collect_str(v)
}

/// Counts the shifts of `monomials` exactly and compares with the bound for
/// the required pairwise distance, which is checked first.
pub fn verify_distance_lemma(
    monomials: &[Monomial],
    nvars: usize,
    ell: u32,
    required: u32,
    budget_cells: u64,
) -> Result<DistanceLemmaCheck, BoundsError> {
    for i in 0..monomials.len() {
        for j in (i + 1)..monomials.len() {
            let distance = mono_distance(&monomials[i], &monomials[j]);
            if distance < required {
                return Err(BoundsError::DistanceViolated { i, j, distance, required });
            }
        }
    }
    let exact = lm_shift_count(monomials, ell, nvars, budget_cells)?;
    let bound = extension_lower_bound(monomials.len() as u64, nvars as u64, ell as u64, required as u64);
    Ok(DistanceLemmaCheck {
        s: monomials.len(),
        nvars,
        ell,
        distance: required,
        ok: exact >= bound,
        exact,
        bound,
    })
}

/// Which explicit family a parameter point describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyShape {
    /// `n²` variables, `n^k` prefix derivatives at distance `n − 2k`.
    Nw,
    /// The restricted product: `(n−2)n² + 2n` live variables, `p^k`
    /// derivatives at distance `n/4`.
    Imm,
}

impl FamilyShape {
    pub fn name(self) -> &'static str {
        match self {
            FamilyShape::Nw => "nw",
            FamilyShape::Imm => "imm",
        }
    }
}

/// The constants of the size argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    /// `s >= n^{δk}`.
    pub delta: f64,
    /// `d >= n/c`.
    pub c: f64,
    /// `D = c'√n`.
    pub c_prime: f64,
    /// `k = ε√n`.
    pub eps: f64,
    /// Share of `δ k ln n` the shift penalty may consume.
    pub mu: f64,
    /// The slack polynomial is `N^pexp`.
    pub pexp: u32,
}

impl BoundConstants {
    pub const NW: BoundConstants = BoundConstants {
        delta: 1.0,
        c: 2.0,
        c_prime: 0.075,
        eps: 0.05,
        mu: 0.5,
        pexp: 2,
    };

    pub const IMM: BoundConstants = BoundConstants {
        delta: 0.25,
        c: 4.0,
        c_prime: 0.03,
        eps: 0.02,
        mu: 0.5,
        pexp: 2,
    };

    pub fn validate(&self) -> Result<(), BoundsError> {
        let bad = |m: &str| Err(BoundsError::InvalidParams(m.to_string()));
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad("need 0 < eps < 1");
        }
        if self.c <= 1.0 {
            return bad("need c > 1");
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return bad("need 0 < mu < 1");
        }
        if self.delta <= 0.0 || self.c_prime <= 0.0 {
            return bad("need delta > 0 and c' > 0");
        }
        Ok(())
    }
}

/// One parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    pub family: FamilyShape,
    pub n: u64,
    /// Variable count `N`.
    pub nvars: u128,
    /// Derivative order.
    pub k: u64,
    /// Pairwise leading-monomial distance.
    pub d: u64,
    /// Family size.
    pub s: BigInt,
    /// Shift degree.
    pub ell: u128,
    /// Product fan-in `D` of the circuit being bounded.
    pub fan_in: u64,
    /// Degree bound `t` of the bottom factors.
    pub factor_degree: u64,
    pub constants: BoundConstants,
}

impl BoundParams {
    /// Instantiates a family at degree `n`: `k = max(1, round(ε√n))`,
    /// `D = max(k, round(c'√n))`, `t = round(√n)`, `ℓ = floor(ℓ_max)`.
    pub fn for_family(family: FamilyShape, n: u64, constants: BoundConstants) -> Result<Self, BoundsError> {
        constants.validate()?;
        if n < 4 {
            return Err(BoundsError::InvalidParams(format!("degree n = {n} too small")));
        }
        let rn = (n as f64).sqrt();
        let k = ((constants.eps * rn).round() as u64).max(1);
        let fan_in = ((constants.c_prime * rn).round() as u64).max(k);
        let factor_degree = (rn.round() as u64).max(1);
        let wide = n as u128;
        let (nvars, d, s) = match family {
            FamilyShape::Nw => (wide * wide, n.saturating_sub(2 * k), BigInt::from(n).pow(k as u32)),
            FamilyShape::Imm => {
                let p = largest_prime_in(n.div_ceil(2), n)
                    .ok_or_else(|| BoundsError::InvalidParams(format!("no prime in [n/2, n] for n = {n}")))?;
                ((wide - 2) * wide * wide + 2 * wide, n / 4, BigInt::from(p).pow(k as u32))
            }
        };
        if d == 0 {
            return Err(BoundsError::InvalidParams(format!("distance vanishes at n = {n}")));
        }
        let mut params = BoundParams {
            family,
            n,
            nvars,
            k,
            d,
            s,
            ell: 1,
            fan_in,
            factor_degree,
            constants,
        };
        params.ell = (shift_window(&params).max.floor() as u128).max(1);
        Ok(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftWindow {
    pub min: f64,
    pub max: f64,
    pub nonempty: bool,
}

/// `ℓ_min = N√n/(μδ ln n)`, `ℓ_max = N√n/(4cδε ln n)`; nonempty exactly when
/// `ε < μ/(4c)`.
pub fn shift_window(p: &BoundParams) -> ShiftWindow {
    let c = &p.constants;
    let rn = (p.n as f64).sqrt();
    let ln_n = (p.n as f64).ln();
    let scale = p.nvars as f64 * rn / (c.delta * ln_n);
    ShiftWindow {
        min: scale / c.mu,
        max: scale / (4.0 * c.c * c.eps),
        nonempty: c.eps < c.mu / (4.0 * c.c),
    }
}

/// Finite readings of the asymptotic side conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegimeGuards {
    /// `(kt − k)² <= ℓ/10`.
    pub shift_penalty: bool,
    /// `d² <= (N + ℓ)/10`.
    pub distance: bool,
}

/// `ln s + ln(1 − N^{−pexp}) − ln C(D+k, k) − (N/ℓ)(kt − k)`, in natural
/// log, together with the regime guards at this point.
pub fn sprime_lower_bound(p: &BoundParams, factor_degree: u64, fan_in: u64) -> (f64, RegimeGuards) {
    let k = p.k;
    let penalty_degree = (k * factor_degree).saturating_sub(k) as f64;
    let nvars = p.nvars as f64;
    let ell = p.ell as f64;
    let slack = (-nvars.powi(-(p.constants.pexp as i32))).ln_1p();
    let ln_binom = ln_bigint(&binomial_exact(fan_in + k, k));
    let value = ln_bigint(&p.s) + slack - ln_binom - nvars / ell * penalty_degree;
    let guards = RegimeGuards {
        shift_penalty: penalty_degree * penalty_degree <= ell / GUARD_FACTOR,
        distance: (p.d as f64).powi(2) <= (nvars + ell) / GUARD_FACTOR,
    };
    (value, guards)
}

/// Outcome of the slack inequality `s·(ℓ/(N+ℓ))^d <= N^{−pexp}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SlackCheck {
    /// `ℓ <= N d / (2 ln(s N^pexp))` and `N < ℓ`.
    pub applicable: bool,
    pub holds_log: bool,
    /// Exact integer comparison, when the operands are small enough.
    pub holds_exact: Option<bool>,
}

/// Checks the slack inequality in the log domain and, below
/// [`EXACT_CHECK_BITS`], by comparing `s·ℓ^d·N^pexp` with `(N+ℓ)^d`.
pub fn slack_check(s: &BigInt, nvars: u128, ell: u128, d: u64, pexp: u32) -> SlackCheck {
    let (nf, lf, df) = (nvars as f64, ell as f64, d as f64);
    let ln_s = ln_bigint(s);
    let threshold = nf * df / (2.0 * (ln_s + pexp as f64 * nf.ln()));
    let applicable = lf <= threshold && nvars < ell;
    let lhs = ln_s + df * (lf / (nf + lf)).ln();
    let holds_log = lhs <= -(pexp as f64) * nf.ln();
    let bits = |v: u128| 128 - v.leading_zeros() as u64;
    let est_bits = s.bits() + d * bits(nvars + ell) + pexp as u64 * bits(nvars);
    let holds_exact = (est_bits <= EXACT_CHECK_BITS).then(|| {
        let left = s * BigInt::from(ell).pow(d as u32) * BigInt::from(nvars).pow(pexp);
        left <= BigInt::from(nvars + ell).pow(d as u32)
    });
    SlackCheck {
        applicable,
        holds_log,
        holds_exact,
    }
}

/// Evaluation of one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub params: BoundParams,
    pub window: ShiftWindow,
    /// Window nonempty and `ε < min(c', μ/(4c))`.
    pub feasible: bool,
    /// The extension bound, when it fits in [`EXACT_CHECK_BITS`].
    pub exact_extension_bound: Option<BigInt>,
    pub ln_sprime_bound: f64,
    /// `ln_sprime_bound / (√n ln n)`.
    pub growth_ratio: f64,
    pub guards: RegimeGuards,
    pub slack: SlackCheck,
}

/// Upper estimate of `log2 C(a+b, b)` from `C(a+b, b) <= (e(a+b)/m)^m`,
/// `m = min(a, b)`.
fn binomial_bits_upper(a: u128, b: u128) -> f64 {
    let m = a.min(b) as f64;
    if m == 0.0 {
        return 0.0;
    }
    m * (std::f64::consts::E * (a + b) as f64 / m).log2()
}

pub fn evaluate_bounds(params: &BoundParams) -> BoundReport {
    let window = shift_window(params);
    let c = &params.constants;
    let feasible = window.nonempty && c.eps < c.c_prime;
    let (ln_sprime_bound, guards) = sprime_lower_bound(params, params.factor_degree, params.fan_in);
    let rn = (params.n as f64).sqrt();
    let small = u64::try_from(params.nvars + params.ell).is_ok()
        && 2.0 * params.s.bits() as f64 + binomial_bits_upper(params.nvars, params.ell) <= EXACT_CHECK_BITS as f64;
    let exact_extension_bound = small.then(|| {
        let (nvars, ell) = (params.nvars as u64, params.ell as u64);
        let s = &params.s;
        let top = nvars as i64 + ell as i64 - params.d as i64;
        s * binomial_exact(nvars + ell, nvars) - s * s * binomial_or_zero(top, nvars)
    });
    BoundReport {
        window,
        feasible,
        exact_extension_bound,
        ln_sprime_bound,
        growth_ratio: ln_sprime_bound / (rn * (params.n as f64).ln()),
        guards,
        slack: slack_check(&params.s, params.nvars, params.ell, params.d, c.pexp),
        params: params.clone(),
    }
}

/// Evaluates every point in parallel; output sorted by family then degree.
pub fn sweep(points: &[(FamilyShape, u64)], constants: impl Fn(FamilyShape) -> BoundConstants + Sync) -> Result<Vec<BoundReport>, BoundsError> {
    let mut reports = points
        .par_iter()
        .map(|&(family, n)| BoundParams::for_family(family, n, constants(family)).map(|p| evaluate_bounds(&p)))
        .collect::<Result<Vec<_>, _>>()?;
    reports.sort_by(|a, b| (a.params.family, a.params.n).cmp(&(b.params.family, b.params.n)));
    Ok(reports)
}

/// Column order of the sweep CSV.
pub const SWEEP_HEADER: [&str; 27] = [
    "family",
    "n",
    "N",
    "k",
    "d",
    "s",
    "ell",
    "D",
    "t",
    "delta",
    "c",
    "c_prime",
    "eps",
    "mu",
    "pexp",
    "ell_min",
    "ell_max",
    "window_nonempty",
    "feasible",
    "ln_sprime_bound",
    "growth_ratio",
    "guard_shift_penalty",
    "guard_distance",
    "slack_applicable",
    "slack_holds_log",
    "slack_holds_exact",
    "exact_extension_bound",
];

fn digits_or_ln(v: &BigInt) -> String {
    if v.bits() <= 256 {
        v.to_string()
    } else {
        format!("e^{:.6}", ln_bigint(v))
    }
}

/// Writes the header and one row per report; `s` is written as `e^<ln s>`
/// once it exceeds 256 bits.
pub fn write_sweep_csv<W: Write>(reports: &[BoundReport], out: W) -> Result<(), BoundsError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| BoundsError::Csv(e.to_string());
    w.write_record(SWEEP_HEADER).map_err(err)?;
    for r in reports {
        let p = &r.params;
        let c = &p.constants;
        let opt = |b: Option<bool>| b.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            p.family.name().to_string(),
            p.n.to_string(),
            p.nvars.to_string(),
            p.k.to_string(),
            p.d.to_string(),
            digits_or_ln(&p.s),
            p.ell.to_string(),
            p.fan_in.to_string(),
            p.factor_degree.to_string(),
            c.delta.to_string(),
            c.c.to_string(),
            c.c_prime.to_string(),
            c.eps.to_string(),
            c.mu.to_string(),
            c.pexp.to_string(),
            format!("{:.6e}", r.window.min),
            format!("{:.6e}", r.window.max),
            r.window.nonempty.to_string(),
            r.feasible.to_string(),
            format!("{:.6}", r.ln_sprime_bound),
            format!("{:.6}", r.growth_ratio),
            r.guards.shift_penalty.to_string(),
            r.guards.distance.to_string(),
            r.slack.applicable.to_string(),
            r.slack.holds_log.to_string(),
            opt(r.slack.holds_exact),
            r.exact_extension_bound.as_ref().map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| BoundsError::Csv(e.to_string()))
}

/// `ln C(a, b)` for a cross-check without big integers: sum of logs.
pub fn ln_binomial_float(a: u64, b: u64) -> f64 {
    let b = b.min(a - b);
    (0..b).map(|i| ((a - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Whether `s·C(N+ℓ−d, N) <= C(N+ℓ, N)/N^pexp`, the slack condition before
/// any estimate, by exact big-integer arithmetic.
pub fn slack_exact_binomial(s: &BigInt, nvars: u64, ell: u64, d: u64, pexp: u32) -> bool {
    let lhs = s * binomial_or_zero(nvars as i64 + ell as i64 - d as i64, nvars) * BigInt::from(nvars).pow(pexp);
    lhs <= binomial_exact(nvars + ell, nvars)
}
