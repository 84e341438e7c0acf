//! The projective line P^1(Z/N): canonical representatives, enumeration, and
//! constant-time lookup from an arbitrary pair (c, d) to its class index.
//!
//! A class (c : d) with g = gcd(d, N) always has a representative of the form
//! (u, g) with g | N. Scaling by units congruent to 1 mod N/g is the remaining
//! ambiguity; the canonical representative takes the smallest such u. Lookup
//! goes through per-divisor index tables, so the hot path is a couple of table
//! reads and one multiplication mod N.

use crate::arith::{gcd, invmod, xgcd};

pub const P1_NONE: u32 = u32::MAX;

/// One point of P^1(Z/N) in canonical form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct P1Point {
    pub c: u32,
    pub d: u32,
}

#[derive(Debug, Clone)]
pub struct P1List {
    n: u32,
    magic: u64,
    points: Vec<P1Point>,
    divisors: Vec<u32>,
    div_idx_of_v: Vec<u8>,
    gcd_of_v: Vec<u32>,
    scale_of_v: Vec<u32>,
    idx_table: Vec<Vec<u32>>,
}

impl P1List {
    pub fn new(n: u32) -> P1List {
        assert!(n >= 1, "level must be positive");
        if n == 1 {
            return P1List {
                n,
                magic: 0,
                points: vec![P1Point { c: 0, d: 0 }],
                divisors: vec![1],
                div_idx_of_v: vec![0],
                gcd_of_v: vec![1],
                scale_of_v: vec![1],
                idx_table: vec![vec![0]],
            };
        }
        let n64 = n as u64;
        let divisors: Vec<u32> = {
            let mut d: Vec<u32> = (1..=n).filter(|&d| n % d == 0).collect();
            d.sort_unstable();
            d
        };
        assert!(divisors.len() < 256, "too many divisors");

        let mut gcd_of_v = vec![0u32; n as usize];
        let mut div_idx_of_v = vec![0u8; n as usize];
        let mut scale_of_v = vec![0u32; n as usize];
        for v in 0..n {
            let g = if v == 0 { n } else { gcd(v as u64, n64) as u32 };
            gcd_of_v[v as usize] = g;
            div_idx_of_v[v as usize] = divisors.iter().position(|&d| d == g).unwrap() as u8;
            // unit s with s = (v/g)^{-1} mod N/g
            let m = n / g;
            let s0 = if m == 1 {
                0
            } else {
                invmod((v / g) as u64 % m as u64, m as u64) as u32
            };
            let mut s = s0;
            loop {
                if s != 0 && gcd(s as u64, n64) == 1 {
                    break;
                }
                s += m;
            }
            scale_of_v[v as usize] = s % n;
        }

        // Enumerate classes per divisor, ascending; first-seen u is canonical.
        let mut points = Vec::new();
        let mut idx_table: Vec<Vec<u32>> = Vec::with_capacity(divisors.len());
        for &g in &divisors {
            let mut table = vec![P1_NONE; n as usize];
            let m = n / g;
            // multipliers t = 1 + i*m coprime to n, the stabilizer orbit
            let mults: Vec<u32> = (0..g)
                .map(|i| (1 + i as u64 * m as u64) % n64)
                .filter(|&t| gcd(t, n64) == 1)
                .map(|t| t as u32)
                .collect();
            let v = g % n; // divisor N is stored at v = 0
            for u in 0..n {
                if table[u as usize] != P1_NONE {
                    continue;
                }
                // valid point iff gcd(u, v, N) = gcd(u, g) = 1 (g divides N)
                if gcd(u as u64, g as u64) != 1 {
                    continue;
                }
                let idx = points.len() as u32;
                points.push(P1Point { c: u, d: v });
                for &t in &mults {
                    let ut = (u as u64 * t as u64 % n64) as u32;
                    table[ut as usize] = idx;
                }
            }
            idx_table.push(table);
        }

        P1List {
            n,
            magic: u64::MAX / n as u64,
            points,
            divisors,
            div_idx_of_v,
            gcd_of_v,
            scale_of_v,
            idx_table,
        }
    }

    /// x mod N without a hardware division (Barrett-style).
    #[inline(always)]
    pub fn reduce(&self, x: u64) -> u32 {
        if self.n == 1 {
            return 0;
        }
        let q = ((x as u128 * self.magic as u128) >> 64) as u64;
        let mut r = x - q * self.n as u64;
        while r >= self.n as u64 {
            r -= self.n as u64;
        }
        r as u32
    }

    pub fn level(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[P1Point] {
        &self.points
    }

    pub fn point(&self, idx: u32) -> P1Point {
        self.points[idx as usize]
    }

    /// Index of the class of (u : v) for u, v already reduced mod N.
    /// Returns `None` when gcd(u, v, N) > 1 (not a point of P^1).
    #[inline]
    pub fn lookup(&self, u: u32, v: u32) -> Option<u32> {
        if self.n == 1 {
            return Some(0);
        }
        debug_assert!(u < self.n && v < self.n);
        let vi = v as usize;
        let s = self.scale_of_v[vi];
        let u2 = self.reduce(u as u64 * s as u64) as usize;
        let idx = self.idx_table[self.div_idx_of_v[vi] as usize][u2];
        if idx == P1_NONE {
            None
        } else {
            Some(idx)
        }
    }

    /// Lookup for possibly-unreduced signed coordinates.
    #[inline]
    pub fn lookup_i64(&self, u: i64, v: i64) -> Option<u32> {
        let n = self.n as i64;
        self.lookup(u.rem_euclid(n) as u32, v.rem_euclid(n) as u32)
    }

    /// gcd(v, N) via table.
    #[inline]
    pub fn gcd_with_level(&self, v: u32) -> u32 {
        if self.n == 1 {
            1
        } else {
            self.gcd_of_v[v as usize]
        }
    }
}

/// Lift a P^1(Z/N) pair to a matrix [[a, b], [c0, d0]] in SL2(Z) with
/// (c0, d0) congruent to (c, d) mod N.
pub fn lift_to_sl2(c: u32, d: u32, n: u32) -> [i64; 4] {
    if n == 1 {
        return [1, 0, 0, 1];
    }
    let n = n as i64;
    let mut c0 = c as i64 % n;
    let mut d0 = d as i64 % n;
    if c0 == 0 && d0 == 0 {
        panic!("not a P1 point at level {n}");
    }
    if c0 == 0 {
        c0 = n;
    } else if d0 == 0 {
        d0 = n;
    }
    while crate::arith::gcd_i64(c0, d0) != 1 {
        d0 += n;
    }
    let (g, x, y) = xgcd(d0, c0);
    debug_assert_eq!(g, 1);
    // a*d0 - b*c0 = 1
    [x, -y, c0, d0]
}
