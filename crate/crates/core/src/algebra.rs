//! Exact scalar arithmetic.
//!
//! Three coefficient domains implement [`Ring`]: word-sized prime fields,
//! arbitrary-precision integers and rationals. The module also carries exact
//! binomials, the logarithmic factorial-ratio estimate with its exact
//! counterpart, and the small amount of number theory the rest of the crate
//! needs (deterministic primality for `u64`, prime search in an interval).

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// The Mersenne prime 2^61 - 1, default modulus for rank computations.
pub const DEFAULT_PRIME: u64 = (1u64 << 61) - 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("lower factorial argument a - g is negative (a = {a}, g = {g})")]
    NegativeLowerIndex { a: u64, g: u64 },
    #[error("estimate needs f + g < a, got a = {a}, f = {f}, g = {g}")]
    RegimeViolation { a: u64, f: u64, g: u64 },
}

/// A commutative coefficient ring with an explicit context object.
///
/// The context carries runtime data such as a prime modulus; elements are
/// plain values that only make sense together with the context that made them.
pub trait Ring: Clone + fmt::Debug + PartialEq + Send + Sync {
    type Elem: Clone + fmt::Debug + PartialEq + Send + Sync;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn from_i64(&self, v: i64) -> Self::Elem;
    fn from_bigint(&self, v: &BigInt) -> Self::Elem;
    /// Text form used when printing polynomials.
    fn render(&self, a: &Self::Elem) -> String;

    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.add(a, &self.neg(b))
    }

    fn from_u64(&self, v: u64) -> Self::Elem {
        self.from_bigint(&BigInt::from(v))
    }
}

/// The prime field Z/pZ for a word-sized prime p.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    modulus: u64,
}

impl PrimeField {
    pub fn new(modulus: u64) -> Result<Self, AlgebraError> {
        if !is_prime(modulus) {
            return Err(AlgebraError::NotPrime(modulus));
        }
        Ok(Self { modulus })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    #[inline]
    pub fn reduce_i64(&self, v: i64) -> u64 {
        v.rem_euclid(self.modulus as i64) as u64
    }

    #[inline]
    pub fn add_elems(&self, a: u64, b: u64) -> u64 {
        let s = a as u128 + b as u128;
        (s % self.modulus as u128) as u64
    }

    #[inline]
    pub fn sub_elems(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            self.modulus - (b - a)
        }
    }

    #[inline]
    pub fn mul_elems(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.modulus as u128) as u64
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.modulus;
        base %= self.modulus;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul_elems(acc, base);
            }
            base = self.mul_elems(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: u64) -> Option<u64> {
        let a = a % self.modulus;
        if a == 0 {
            None
        } else {
            Some(self.pow(a, self.modulus - 2))
        }
    }
}

impl Default for PrimeField {
    fn default() -> Self {
        Self {
            modulus: DEFAULT_PRIME,
        }
    }
}

impl Ring for PrimeField {
    type Elem = u64;

    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1 % self.modulus
    }
    fn is_zero(&self, a: &u64) -> bool {
        *a == 0
    }
    fn add(&self, a: &u64, b: &u64) -> u64 {
        self.add_elems(*a, *b)
    }
    fn neg(&self, a: &u64) -> u64 {
        if *a == 0 {
            0
        } else {
            self.modulus - a
        }
    }
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        self.mul_elems(*a, *b)
    }
    fn from_i64(&self, v: i64) -> u64 {
        self.reduce_i64(v)
    }
    fn from_bigint(&self, v: &BigInt) -> u64 {
        let m = BigInt::from(self.modulus);
        let r = ((v % &m) + &m) % &m;
        r.to_u64().expect("residue fits in u64")
    }
    fn render(&self, a: &u64) -> String {
        a.to_string()
    }
}

/// The ring of integers, arbitrary precision.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Integers;

impl Ring for Integers {
    type Elem = BigInt;

    fn zero(&self) -> BigInt {
        BigInt::zero()
    }
    fn one(&self) -> BigInt {
        BigInt::one()
    }
    fn is_zero(&self, a: &BigInt) -> bool {
        a.is_zero()
    }
    fn add(&self, a: &BigInt, b: &BigInt) -> BigInt {
        a + b
    }
    fn neg(&self, a: &BigInt) -> BigInt {
        -a
    }
    fn mul(&self, a: &BigInt, b: &BigInt) -> BigInt {
        a * b
    }
    fn from_i64(&self, v: i64) -> BigInt {
        BigInt::from(v)
    }
    fn from_bigint(&self, v: &BigInt) -> BigInt {
        v.clone()
    }
    fn render(&self, a: &BigInt) -> String {
        a.to_string()
    }
}

/// The rationals; `BigRational` keeps every value in lowest terms with a
/// positive denominator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Rationals;

impl Ring for Rationals {
    type Elem = BigRational;

    fn zero(&self) -> BigRational {
        BigRational::zero()
    }
    fn one(&self) -> BigRational {
        BigRational::one()
    }
    fn is_zero(&self, a: &BigRational) -> bool {
        a.is_zero()
    }
    fn add(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a + b
    }
    fn neg(&self, a: &BigRational) -> BigRational {
        -a
    }
    fn mul(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a * b
    }
    fn from_i64(&self, v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_bigint(&self, v: &BigInt) -> BigRational {
        BigRational::from_integer(v.clone())
    }
    fn render(&self, a: &BigRational) -> String {
        if a.is_integer() {
            a.numer().to_string()
        } else {
            format!("({}/{})", a.numer(), a.denom())
        }
    }
}

/// Deterministic Miller-Rabin, exact for every `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    'witness: for a in SMALL {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Largest prime p with `lo <= p <= hi`.
pub fn largest_prime_in(lo: u64, hi: u64) -> Option<u64> {
    (lo..=hi).rev().find(|&p| is_prime(p))
}

/// Smallest prime `>= from`.
pub fn next_prime(from: u64) -> u64 {
    (from..).find(|&p| is_prime(p)).expect("primes are unbounded")
}

/// C(a, b), zero when `b > a`.
pub fn binomial_exact(a: u64, b: u64) -> BigInt {
    if b > a {
        return BigInt::zero();
    }
    let b = b.min(a - b);
    let mut acc = BigInt::one();
    for i in 0..b {
        // exact at every step: acc = C(a - b + i + 1, i + 1) after the division
        acc *= a - b + i + 1;
        acc /= i + 1;
    }
    acc
}

/// C(top, b) for a possibly negative top index; zero whenever `top < b`.
///
/// This is the reading the counting bounds need: C(N + l - d, N) vanishes when
/// `d > l`.
pub fn binomial_or_zero(top: i64, b: u64) -> BigInt {
    if top < 0 || (top as u64) < b {
        BigInt::zero()
    } else {
        binomial_exact(top as u64, b)
    }
}

/// Natural logarithm of a positive big integer.
pub fn ln_bigint(v: &BigInt) -> f64 {
    assert!(v.is_positive(), "ln of non-positive integer");
    let bits = v.bits();
    if bits <= 1000 {
        return v.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top: BigInt = v >> shift;
    top.to_f64().expect("64-bit head").ln() + shift as f64 * std::f64::consts::LN_2
}

/// ln((a+f)!/(a-g)!) by summing ln j for j in (a-g, a+f].
pub fn ln_factorial_ratio_exact(a: u64, f: u64, g: u64) -> Result<f64, AlgebraError> {
    if g > a {
        return Err(AlgebraError::NegativeLowerIndex { a, g });
    }
    Ok(((a - g + 1)..=(a + f)).map(|j| (j as f64).ln()).sum())
}

/// The first-order estimate `(f+g) ln a` together with its error budget
/// `(f+g)^2 / a`.
pub fn ln_factorial_ratio_estimate(a: u64, f: u64, g: u64) -> Result<(f64, f64), AlgebraError> {
    if f + g >= a {
        return Err(AlgebraError::RegimeViolation { a, f, g });
    }
    let fg = (f + g) as f64;
    let a = a as f64;
    Ok((fg * a.ln(), fg * fg / a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pascal(limit: usize) -> Vec<Vec<BigInt>> {
        let mut rows: Vec<Vec<BigInt>> = vec![vec![BigInt::one()]];
        for a in 1..=limit {
            let prev = &rows[a - 1];
            let mut row = vec![BigInt::one(); a + 1];
            for b in 1..a {
                row[b] = &prev[b - 1] + &prev[b];
            }
            rows.push(row);
        }
        rows
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial_exact(4, 2), BigInt::from(6));
        for a in 0..20 {
            assert_eq!(binomial_exact(a, 0), BigInt::one());
        }
        assert_eq!(binomial_exact(3, 5), BigInt::zero());
    }

    #[test]
    fn binomial_matches_pascal_triangle() {
        let tri = pascal(60);
        assert_eq!(binomial_exact(50, 25), tri[50][25]);
        for a in 0..=60u64 {
            for b in 0..=a {
                assert_eq!(binomial_exact(a, b), tri[a as usize][b as usize], "C({a},{b})");
            }
        }
    }

    #[test]
    fn binomial_pascal_rule() {
        for a in 1..=60u64 {
            for b in 1..=60u64 {
                assert_eq!(
                    binomial_exact(a, b),
                    binomial_exact(a - 1, b - 1) + binomial_exact(a - 1, b)
                );
            }
        }
    }

    #[test]
    fn binomial_negative_top_is_zero() {
        assert!(binomial_or_zero(-3, 2).is_zero());
        assert!(binomial_or_zero(3, 4).is_zero());
        assert_eq!(binomial_or_zero(4, 4), BigInt::one());
    }

    #[test]
    fn ln_ratio_exact_examples() {
        assert_eq!(ln_factorial_ratio_exact(100, 0, 0).unwrap(), 0.0);
        let direct: f64 = (996..=1005).map(|j| (j as f64).ln()).sum();
        assert!((ln_factorial_ratio_exact(1000, 5, 5).unwrap() - direct).abs() < 1e-12);
        // 12!/9! = 1320
        assert!((ln_factorial_ratio_exact(10, 2, 1).unwrap() - 1320f64.ln()).abs() < 1e-12);
        assert_eq!(
            ln_factorial_ratio_exact(3, 1, 4),
            Err(AlgebraError::NegativeLowerIndex { a: 3, g: 4 })
        );
    }

    #[test]
    fn ln_ratio_estimate_examples() {
        let (est, budget) = ln_factorial_ratio_estimate(1000, 5, 5).unwrap();
        assert!((est - 10.0 * 1000f64.ln()).abs() < 1e-12);
        assert!((est - 69.0776).abs() < 1e-4);
        assert!((budget - 0.1).abs() < 1e-15);
        assert_eq!(ln_factorial_ratio_estimate(17, 0, 0).unwrap(), (0.0, 0.0));
        let (est, budget) = ln_factorial_ratio_estimate(1_000_000, 10, 10).unwrap();
        assert!((est - 20.0 * 1e6f64.ln()).abs() < 1e-9);
        assert!((budget - 4e-4).abs() < 1e-15);
        assert!(matches!(
            ln_factorial_ratio_estimate(10, 5, 5),
            Err(AlgebraError::RegimeViolation { .. })
        ));
    }

    #[test]
    fn ln_bigint_large() {
        let v = binomial_exact(3000, 1500);
        let direct: f64 = (1501..=3000).map(|j| (j as f64).ln()).sum::<f64>()
            - (1..=1500).map(|j| (j as f64).ln()).sum::<f64>();
        assert!((ln_bigint(&v) - direct).abs() < 1e-8);
    }

    #[test]
    fn primality_and_prime_search() {
        let small: Vec<u64> = (0..50).filter(|&n| is_prime(n)).collect();
        assert_eq!(small, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]);
        assert!(is_prime(DEFAULT_PRIME));
        assert!(!is_prime(DEFAULT_PRIME - 2));
        // strong pseudoprime to several small bases
        assert!(!is_prime(3_215_031_751));
        assert_eq!(largest_prime_in(4, 8), Some(7));
        assert_eq!(largest_prime_in(8, 16), Some(13));
        assert_eq!(largest_prime_in(24, 28), None);
        assert_eq!(next_prime(14), 17);
        assert!(PrimeField::new(4).is_err());
    }

    #[test]
    fn rationals_stay_normalised() {
        let q = Rationals;
        let a = BigRational::new(BigInt::from(6), BigInt::from(-4));
        assert_eq!(a.denom(), &BigInt::from(2));
        assert_eq!(a.numer(), &BigInt::from(-3));
        assert_eq!(q.render(&q.mul(&a, &q.from_i64(2))), "-3");
    }

    proptest! {
        #[test]
        fn prime_field_axioms(a in any::<u64>(), b in any::<u64>(), c in any::<u64>(),
                              which in 0usize..3) {
            let f = [PrimeField::new(7).unwrap(), PrimeField::new(65_537).unwrap(), PrimeField::default()][which];
            let p = f.modulus();
            let (a, b, c) = (a % p, b % p, c % p);
            prop_assert_eq!(f.add(&f.add(&a, &b), &c), f.add(&a, &f.add(&b, &c)));
            prop_assert_eq!(f.mul(&f.mul(&a, &b), &c), f.mul(&a, &f.mul(&b, &c)));
            prop_assert_eq!(f.mul(&a, &f.add(&b, &c)), f.add(&f.mul(&a, &b), &f.mul(&a, &c)));
            prop_assert_eq!(f.add(&a, &f.neg(&a)), 0);
            if a != 0 {
                prop_assert_eq!(f.mul(&a, &f.inv(a).unwrap()), 1);
            }
        }

        #[test]
        fn prime_field_matches_bigint_reduction(v in any::<i64>()) {
            let f = PrimeField::default();
            prop_assert_eq!(f.from_i64(v), f.from_bigint(&BigInt::from(v)));
        }
    }
}
