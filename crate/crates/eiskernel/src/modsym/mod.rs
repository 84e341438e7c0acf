//! Weight-2 modular symbols for Gamma_0(N) over F_l.
//!
//! The space is presented by Manin symbols: the free F_l-module on P^1(Z/N)
//! modulo the two-term relations x + x·sigma = 0 and the three-term relations
//! x + x·tau + x·tau^2 = 0, with sigma = [[0,-1],[1,0]] and
//! tau = [[0,-1],[1,-1]]. For l >= 5 this quotient computes H_1 of X_0(N)
//! relative to the cusps; the kernel of the boundary map to cusp classes is
//! H_1(X_0(N); F_l), of dimension 2·genus(N).

pub mod p1;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{factor, gcd, gcd_i64, invmod};
use crate::hecke::fp::{FpCtx, FpError, FpMatrix};
pub use p1::{lift_to_sl2, P1List, P1Point};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModSymError {
    #[error("residue characteristic too small")]
    SmallModulus,
    #[error("level divisible by l")]
    LevelDivisible,
    #[error("modulus {0} too large for dense F_l storage")]
    BigModulus(u16),
    #[error("level {0} too large")]
    LevelTooLarge(u64),
    #[error("modulus {0} is not prime")]
    NotPrime(u16),
    #[error("internal structure check failed: {0}")]
    Structure(String),
}

/// Index of Gamma_0(N) in SL_2(Z): mu(N) = N * prod_{p|N} (1 + 1/p).
pub fn index_mu(n: u64) -> u64 {
    let mut m = n;
    for p in factor(n).primes() {
        m = m / p * (p + 1);
    }
    m
}

/// Number of cusps of X_0(N): sum over d | N of phi(gcd(d, N/d)).
pub fn cusp_count(n: u64) -> u64 {
    (1..=n)
        .filter(|d| n % d == 0)
        .map(|d| crate::arith::euler_phi(gcd(d, n / d)))
        .sum()
}

fn nu2(n: u64) -> u64 {
    if n % 4 == 0 {
        return 0;
    }
    let mut v = 1;
    for p in factor(n).primes() {
        v *= match p % 4 {
            1 => 2,
            3 => 0,
            _ => 1, // p = 2
        };
    }
    v
}

fn nu3(n: u64) -> u64 {
    if n % 9 == 0 {
        return 0;
    }
    let mut v = 1;
    for p in factor(n).primes() {
        v *= match p % 3 {
            1 => 2,
            2 => 0,
            _ => 1, // p = 3
        };
    }
    v
}

/// Genus of X_0(N) by the standard formula.
pub fn genus(n: u64) -> u64 {
    let num = 12 + index_mu(n) - 3 * nu2(n) - 4 * nu3(n) - 6 * cusp_count(n);
    debug_assert_eq!(num % 12, 0);
    num / 12
}

/// A cusp a/b of X_0(N) in lowest terms; infinity is 1/0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cusp {
    pub a: i64,
    pub b: i64,
}

impl Cusp {
    pub fn infinity() -> Cusp {
        Cusp { a: 1, b: 0 }
    }

    pub fn new(a: i64, b: i64) -> Cusp {
        if b == 0 {
            return Cusp::infinity();
        }
        let (mut a, mut b) = (a, b);
        if b < 0 {
            a = -a;
            b = -b;
        }
        let g = gcd_i64(a, b);
        Cusp { a: a / g, b: b / g }
    }

    pub fn is_infinity(&self) -> bool {
        self.b == 0
    }
}

impl std::fmt::Display for Cusp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.b == 0 {
            write!(f, "oo")
        } else {
            write!(f, "{}/{}", self.a, self.b)
        }
    }
}

/// Gamma_0(N)-equivalence of cusps (Cremona's criterion): p1/q1 ~ p2/q2 iff
/// s1*q2 = s2*q1 mod gcd(q1*q2, N), where p_i * s_i = 1 mod q_i.
pub fn cusp_equivalent(x: &Cusp, y: &Cusp, n: u64) -> bool {
    fn s_of(c: &Cusp) -> i64 {
        if c.b == 0 {
            // normalized infinity is 1/0; the exact inverse of 1 is 1
            1
        } else if c.b == 1 {
            0
        } else {
            invmod(c.a.rem_euclid(c.b) as u64, c.b as u64) as i64
        }
    }
    let (s1, s2) = (s_of(x), s_of(y));
    let q1q2 = (x.b as i128 * y.b as i128).unsigned_abs();
    let g = gcd((q1q2 % n as u128) as u64, n);
    if g == 0 {
        return true; // n = 0 never happens; defensive
    }
    let diff = s1 as i128 * y.b as i128 - s2 as i128 * x.b as i128;
    diff.rem_euclid(g as i128) == 0
}

/// Reference from a P^1 point to its two-term-relation class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PgRef {
    /// sigma-fixed symbol, zero in the quotient.
    Zero,
    Class {
        pg: u32,
        neg: bool,
    },
}

/// Manin-symbol presentation of weight-2 modular symbols for Gamma_0(N)
/// over F_l, together with the boundary map and the cuspidal subspace.
#[derive(Debug, Clone)]
pub struct ModSymSpace {
    level: u64,
    modulus: u16,
    p1: P1List,
    pg_of: Vec<PgRef>,
    pregen_rep: Vec<u32>,
    gen_pg: Vec<u32>,
    gen_pairs: Vec<(u32, u32)>,
    gen_count: usize,
    proj: Vec<u8>,
    boundary: FpMatrix,
    cusp_reps: Vec<Cusp>,
    cusp_free: Vec<usize>,
    cusp_bound: Vec<usize>,
    cusp_f: FpMatrix,
}

/// Enumerate P^1(Z/N) with a constant-time lookup (spec operation).
pub fn build_p1(n: u64) -> P1List {
    assert!(n <= u32::MAX as u64);
    P1List::new(n as u32)
}

/// Build the full relation quotient, boundary map and cuspidal subspace.
pub fn build_space(n: u64, l: u16) -> Result<ModSymSpace, ModSymError> {
    if l < 5 {
        return Err(ModSymError::SmallModulus);
    }
    if l > 251 {
        return Err(ModSymError::BigModulus(l));
    }
    if !crate::arith::is_prime(l as u64) {
        return Err(ModSymError::NotPrime(l));
    }
    if n == 0 || n > 2_000_000 || index_mu(n) > 4_000_000 {
        return Err(ModSymError::LevelTooLarge(n));
    }
    if n % l as u64 == 0 {
        return Err(ModSymError::LevelDivisible);
    }

    let nn = n as u32;
    let p1 = P1List::new(nn);
    let mu = p1.len();
    let ctx = FpCtx::new(l);

    // Phase A: two-term relations pair the symbols up (or kill them).
    let sigma = |i: u32| -> u32 {
        let pt = p1.point(i);
        p1.lookup_i64(pt.d as i64, -(pt.c as i64))
            .expect("sigma preserves P1")
    };
    let tau = |i: u32| -> u32 {
        let pt = p1.point(i);
        p1.lookup_i64(pt.d as i64, -(pt.c as i64) - pt.d as i64)
            .expect("tau preserves P1")
    };

    let mut pg_of = vec![PgRef::Zero; mu];
    let mut seen = vec![false; mu];
    let mut pregen_rep: Vec<u32> = Vec::new();
    for i in 0..mu as u32 {
        if seen[i as usize] {
            continue;
        }
        let j = sigma(i);
        debug_assert_eq!(sigma(j), i);
        seen[i as usize] = true;
        seen[j as usize] = true;
        if j == i {
            pg_of[i as usize] = PgRef::Zero;
        } else {
            let pg = pregen_rep.len() as u32;
            pregen_rep.push(i);
            pg_of[i as usize] = PgRef::Class { pg, neg: false };
            pg_of[j as usize] = PgRef::Class { pg, neg: true };
        }
    }
    let pg_count = pregen_rep.len();

    // Phase B: three-term relations, reduced by sparse elimination with a
    // lowest-index-first pivot rule.
    let mut pivot_rows: HashMap<u32, Vec<(u32, u8)>> = HashMap::new();
    let mut is_pivot = vec![false; pg_count];
    let mut processed = vec![false; mu];
    for i in 0..mu as u32 {
        if processed[i as usize] {
            continue;
        }
        let t1 = tau(i);
        let t2 = tau(t1);
        let orbit: &[u32] = if t1 == i { &[i, i, i] } else { &[i, t1, t2] };
        for &x in orbit.iter().take(3) {
            processed[x as usize] = true;
        }
        let mut acc: HashMap<u32, u32> = HashMap::new();
        for &x in orbit {
            match pg_of[x as usize] {
                PgRef::Zero => {}
                PgRef::Class { pg, neg } => {
                    *acc.entry(pg).or_insert(0) += if neg { l as u32 - 1 } else { 1 };
                }
            }
        }
        let mut row: Vec<(u32, u8)> = acc
            .into_iter()
            .map(|(c, v)| (c, ctx.red32(v)))
            .filter(|&(_, v)| v != 0)
            .collect();
        row.sort_unstable_by_key(|&(c, _)| c);
        // reduce against current echelon
        loop {
            let Some(&(c0, a0)) = row.first() else { break };
            match pivot_rows.get(&c0) {
                Some(prow) => {
                    row = row_sub_scaled(&row, a0, prow, ctx);
                }
                None => {
                    if a0 != 1 {
                        let inv = ctx.inv(a0) as u32;
                        for e in row.iter_mut() {
                            e.1 = ctx.red(e.1 as u32 * inv);
                        }
                    }
                    is_pivot[c0 as usize] = true;
                    pivot_rows.insert(c0, row);
                    break;
                }
            }
        }
    }

    // Free columns become the generators of the quotient.
    let mut gen_pg: Vec<u32> = Vec::new();
    let mut gen_of_pg = vec![u32::MAX; pg_count];
    for pg in 0..pg_count {
        if !is_pivot[pg] {
            gen_of_pg[pg] = gen_pg.len() as u32;
            gen_pg.push(pg as u32);
        }
    }
    let gen_count = gen_pg.len();

    // Back-substitute to a dense projection row per pre-generator class.
    let mut proj = vec![0u8; pg_count * gen_count];
    let mut acc = vec![0u32; gen_count];
    for pg in (0..pg_count).rev() {
        if let Some(row) = pivot_rows.get(&(pg as u32)) {
            acc.fill(0);
            for &(col, coeff) in row.iter().skip(1) {
                debug_assert!(col as usize > pg);
                let src = &proj[col as usize * gen_count..(col as usize + 1) * gen_count];
                for (a, &s) in acc.iter_mut().zip(src) {
                    *a += coeff as u32 * s as u32;
                }
            }
            let dst = &mut proj[pg * gen_count..(pg + 1) * gen_count];
            for (d, &a) in dst.iter_mut().zip(&acc) {
                *d = ctx.neg(ctx.red32(a));
            }
        } else {
            proj[pg * gen_count + gen_of_pg[pg] as usize] = 1;
        }
    }
    drop(pivot_rows);

    let g = genus(n);
    let nu_inf = cusp_count(n);
    if gen_count as u64 != 2 * g + nu_inf - 1 {
        return Err(ModSymError::Structure(format!(
            "relation quotient has rank {gen_count}, expected 2g + nu_inf - 1 = {}",
            2 * g + nu_inf - 1
        )));
    }

    // Boundary map: generator g maps to [g·0] - [g·oo].
    let gen_pairs: Vec<(u32, u32)> = gen_pg
        .iter()
        .map(|&pg| {
            let pt = p1.point(pregen_rep[pg as usize]);
            (pt.c, pt.d)
        })
        .collect();
    let mut cusp_reps: Vec<Cusp> = Vec::new();
    let mut class_of = |c: Cusp, reps: &mut Vec<Cusp>| -> usize {
        if let Some(k) = reps.iter().position(|r| cusp_equivalent(r, &c, n)) {
            k
        } else {
            reps.push(c);
            reps.len() - 1
        }
    };
    let mut rows: Vec<Vec<(usize, bool)>> = Vec::with_capacity(gen_count);
    for &(c, d) in &gen_pairs {
        let [a, b, c0, d0] = lift_to_sl2(c, d, nn);
        let k0 = class_of(Cusp::new(b, d0), &mut cusp_reps);
        let k1 = class_of(Cusp::new(a, c0), &mut cusp_reps);
        rows.push(vec![(k0, false), (k1, true)]);
    }
    if gen_count > 0 && cusp_reps.len() as u64 != nu_inf {
        return Err(ModSymError::Structure(format!(
            "found {} cusp classes, expected {nu_inf}",
            cusp_reps.len()
        )));
    }
    let mut boundary = FpMatrix::zeros(l, gen_count, nu_inf as usize);
    for (i, row) in rows.iter().enumerate() {
        for &(k, negated) in row {
            let cur = boundary.get(i, k) as u32;
            let add = if negated { l as u32 - 1 } else { 1 };
            boundary.set(i, k, ctx.red(cur + add));
        }
    }

    // Cuspidal subspace: kernel of the boundary, in echelon structure.
    let (cusp_bound, cbasis) = boundary.transpose().kernel_basis_with_pivots();
    let dim = cbasis.cols();
    if dim as u64 != 2 * g {
        return Err(ModSymError::Structure(format!(
            "cuspidal dimension {dim}, expected 2g = {}",
            2 * g
        )));
    }
    let bound_set: std::collections::HashSet<usize> = cusp_bound.iter().copied().collect();
    let cusp_free: Vec<usize> = (0..gen_count).filter(|i| !bound_set.contains(i)).collect();
    let mut cusp_f = FpMatrix::zeros(l, cusp_bound.len(), dim);
    for (r, &bp) in cusp_bound.iter().enumerate() {
        for j in 0..dim {
            cusp_f.set(r, j, cbasis.get(bp, j));
        }
    }

    Ok(ModSymSpace {
        level: n,
        modulus: l,
        p1,
        pg_of,
        pregen_rep,
        gen_pg,
        gen_pairs,
        gen_count,
        proj,
        boundary,
        cusp_reps,
        cusp_free,
        cusp_bound,
        cusp_f,
    })
}

/// row - a0 * prow for sorted sparse rows; prow is normalized (leading 1).
fn row_sub_scaled(
    row: &[(u32, u8)],
    a0: u8,
    prow: &[(u32, u8)],
    ctx: FpCtx,
) -> Vec<(u32, u8)> {
    let mult = ctx.neg(a0) as u32;
    let mut out = Vec::with_capacity(row.len() + prow.len());
    let (mut i, mut j) = (0usize, 0usize);
    while i < row.len() || j < prow.len() {
        if j == prow.len() || (i < row.len() && row[i].0 < prow[j].0) {
            out.push(row[i]);
            i += 1;
        } else if i == row.len() || prow[j].0 < row[i].0 {
            let v = ctx.red(mult * prow[j].1 as u32);
            if v != 0 {
                out.push((prow[j].0, v));
            }
            j += 1;
        } else {
            let v = ctx.red(row[i].1 as u32 + mult * prow[j].1 as u32);
            if v != 0 {
                out.push((row[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

impl ModSymSpace {
    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn modulus(&self) -> u16 {
        self.modulus
    }

    pub fn p1(&self) -> &P1List {
        &self.p1
    }

    /// Dimension of the full relation quotient (2g + nu_inf - 1).
    pub fn gen_count(&self) -> usize {
        self.gen_count
    }

    /// Dimension of the cuspidal subspace (2g).
    pub fn cuspidal_dim(&self) -> usize {
        self.cusp_free.len()
    }

    /// The boundary map as a gen_count x cusp_class_count matrix
    /// (row i = boundary of generator i).
    pub fn boundary_map(&self) -> &FpMatrix {
        &self.boundary
    }

    pub fn cusp_representatives(&self) -> &[Cusp] {
        &self.cusp_reps
    }

    /// Materialize the cuspidal basis: gen_count x 2g, columns span
    /// ker(boundary), identity on the free coordinates.
    pub fn cuspidal_basis(&self) -> FpMatrix {
        let dim = self.cuspidal_dim();
        let mut c = FpMatrix::zeros(self.modulus, self.gen_count, dim);
        for (j, &fp) in self.cusp_free.iter().enumerate() {
            c.set(fp, j, 1);
        }
        for (r, &bp) in self.cusp_bound.iter().enumerate() {
            for j in 0..dim {
                c.set(bp, j, self.cusp_f.get(r, j));
            }
        }
        c
    }

    pub(crate) fn cusp_free_positions(&self) -> &[usize] {
        &self.cusp_free
    }

    pub(crate) fn cusp_bound_positions(&self) -> &[usize] {
        &self.cusp_bound
    }

    pub(crate) fn cusp_f_block(&self) -> &FpMatrix {
        &self.cusp_f
    }

    /// Lift a cuspidal-coordinate vector (length 2g) to quotient coordinates.
    pub(crate) fn lift_cusp_vec(&self, v: &[u8]) -> Vec<u8> {
        debug_assert_eq!(v.len(), self.cuspidal_dim());
        let mut out = vec![0u8; self.gen_count];
        for (j, &fp) in self.cusp_free.iter().enumerate() {
            out[fp] = v[j];
        }
        let bound_vals = self.cusp_f.mul_vec(v);
        for (r, &bp) in self.cusp_bound.iter().enumerate() {
            out[bp] = bound_vals[r];
        }
        out
    }

    /// Extract cuspidal coordinates of a quotient vector, verifying that it
    /// actually lies in the cuspidal subspace.
    pub(crate) fn extract_cusp_vec(&self, w: &[u8]) -> Result<Vec<u8>, FpError> {
        debug_assert_eq!(w.len(), self.gen_count);
        let v: Vec<u8> = self.cusp_free.iter().map(|&fp| w[fp]).collect();
        let bound_vals = self.cusp_f.mul_vec(&v);
        for (r, &bp) in self.cusp_bound.iter().enumerate() {
            if w[bp] != bound_vals[r] {
                return Err(FpError::NotCuspidalInvariant);
            }
        }
        Ok(v)
    }

    pub(crate) fn pg_ref(&self, p1_idx: u32) -> PgRef {
        self.pg_of[p1_idx as usize]
    }

    pub(crate) fn pregen_count(&self) -> usize {
        self.pregen_rep.len()
    }

    pub(crate) fn proj_row(&self, pg: u32) -> &[u8] {
        let gc = self.gen_count;
        &self.proj[pg as usize * gc..(pg as usize + 1) * gc]
    }

    /// Canonical (c, d) pair of generator i.
    pub(crate) fn gen_pair(&self, i: usize) -> (u32, u32) {
        self.gen_pairs[i]
    }

    /// Projection of an arbitrary P^1 class to quotient coordinates.
    pub fn class_projection(&self, p1_idx: u32) -> Vec<u8> {
        let ctx = FpCtx::new(self.modulus);
        match self.pg_of[p1_idx as usize] {
            PgRef::Zero => vec![0u8; self.gen_count],
            PgRef::Class { pg, neg } => {
                let row = self.proj_row(pg);
                if neg {
                    row.iter().map(|&x| ctx.neg(x)).collect()
                } else {
                    row.to_vec()
                }
            }
        }
    }
}
