//! Integer arithmetic shared by every other module: factorization, primality,
//! totient, and l-adic valuations of reduced fractions.
//!
//! Everything here is exact 64-bit arithmetic. Operations return an error
//! instead of wrapping on overflow.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ArithError {
    #[error("zero fraction")]
    ZeroFraction,
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
}

/// Canonical factorization of a positive integer: strictly increasing primes,
/// exponents >= 1. `factor(1)` is the empty list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factorization {
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    /// Multiply the factorization back out. Errors on 64-bit overflow.
    pub fn value(&self) -> Result<u64, ArithError> {
        let mut n: u64 = 1;
        for &(p, e) in &self.factors {
            for _ in 0..e {
                n = n.checked_mul(p).ok_or(ArithError::Overflow("value"))?;
            }
        }
        Ok(n)
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    /// Product of the exactly-dividing primes (N^sqf).
    pub fn squarefree_part(&self) -> u64 {
        self.factors
            .iter()
            .filter(|&&(_, e)| e == 1)
            .map(|&(p, _)| p)
            .product()
    }

    /// Product of the primes whose square divides the integer (N^square).
    pub fn squarefull_part(&self) -> u64 {
        self.factors
            .iter()
            .filter(|&&(_, e)| e >= 2)
            .map(|&(p, _)| p)
            .product()
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    gcd(a.unsigned_abs(), b.unsigned_abs()) as i64
}

/// Extended gcd: returns (g, x, y) with a*x + b*y = g = gcd(a, b), g >= 0.
pub fn xgcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut r0, mut r1) = (a, b);
    let (mut x0, mut x1) = (1i64, 0i64);
    let (mut y0, mut y1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (x0, x1) = (x1, x0 - q * x1);
        (y0, y1) = (y1, y0 - q * y1);
    }
    if r0 < 0 {
        (-r0, -x0, -y0)
    } else {
        (r0, x0, y0)
    }
}

pub fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn powmod(mut a: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut r: u64 = 1;
    a %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, a, m);
        }
        a = mulmod(a, a, m);
        e >>= 1;
    }
    r
}

/// Inverse of a mod m for gcd(a, m) = 1. Panics on non-invertible input.
pub fn invmod(a: u64, m: u64) -> u64 {
    let (g, x, _) = xgcd((a % m) as i64, m as i64);
    assert_eq!(g, 1, "invmod: {a} not invertible mod {m}");
    x.rem_euclid(m as i64) as u64
}

/// Deterministic Miller-Rabin, correct for all n < 2^64.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Brent's variant of Pollard rho. Input must be composite and odd.
fn pollard_rho(n: u64) -> u64 {
    debug_assert!(n > 3 && !is_prime(n) && n % 2 == 1);
    for c in 1..n {
        let f = |x: u64| (mulmod(x, x, n) + c) % n;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd(x.abs_diff(y), n);
        }
        if d != n {
            return d;
        }
    }
    unreachable!("pollard rho failed on composite {n}")
}

/// Factor n >= 1: trial division up to 10^6, then Miller-Rabin + Pollard rho
/// on what is left. Levels and scan primes stay far below the point where
/// this struggles.
pub fn factor(n: u64) -> Factorization {
    assert!(n >= 1, "factor: n must be positive");
    let mut fac: Vec<(u64, u32)> = Vec::new();
    let mut m = n;
    let mut push = |p: u64, e: u32, fac: &mut Vec<(u64, u32)>| {
        if e > 0 {
            fac.push((p, e));
        }
    };
    for p in std::iter::once(2u64).chain((3..=1_000_000).step_by(2)) {
        if p * p > m {
            break;
        }
        let mut e = 0;
        while m % p == 0 {
            m /= p;
            e += 1;
        }
        push(p, e, &mut fac);
    }
    // m is now 1, a prime, or a product of primes > 10^6
    let mut stack = vec![m];
    let mut big: Vec<u64> = Vec::new();
    while let Some(v) = stack.pop() {
        if v == 1 {
            continue;
        }
        if is_prime(v) {
            big.push(v);
        } else {
            let d = pollard_rho(v);
            stack.push(d);
            stack.push(v / d);
        }
    }
    big.sort_unstable();
    let mut i = 0;
    while i < big.len() {
        let p = big[i];
        let mut e = 0;
        while i < big.len() && big[i] == p {
            e += 1;
            i += 1;
        }
        push(p, e, &mut fac);
    }
    fac.sort_unstable_by_key(|&(p, _)| p);
    Factorization { factors: fac }
}

/// Euler's totient.
pub fn euler_phi(n: u64) -> u64 {
    assert!(n >= 1);
    let mut phi = n;
    for p in factor(n).primes() {
        phi = phi / p * (p - 1);
    }
    phi
}

/// l-adic valuation of a positive integer.
pub fn valuation(mut n: u64, l: u64) -> u32 {
    assert!(n > 0 && l >= 2);
    let mut v = 0;
    while n % l == 0 {
        n /= l;
        v += 1;
    }
    v
}

/// v_l of the numerator of num/den in lowest terms. num = 0 is an error
/// (the fraction has no well-defined numerator valuation).
pub fn numerator_valuation(num: u64, den: u64, l: u64) -> Result<u32, ArithError> {
    assert!(den >= 1 && l >= 2 && is_prime(l));
    if num == 0 {
        return Err(ArithError::ZeroFraction);
    }
    let g = gcd(num, den);
    Ok(valuation(num / g, l))
}

/// All primes up to and including `n`, by sieve.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut sieve = vec![true; n + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2;
    while i * i <= n {
        if sieve[i] {
            let mut j = i * i;
            while j <= n {
                sieve[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    sieve
        .iter()
        .enumerate()
        .filter(|&(_, &b)| b)
        .map(|(i, _)| i as u64)
        .collect()
}
