//! Closed-form layer for rational Eisenstein primes m_l(s, t, u): symbolic
//! loci, maximality, predicted kernel dimensions, upper bounds, S_m, and the
//! cuspidal-divisor formulas.
//!
//! A locus assigns a Hecke eigenvalue eps(p) in {-1, 0, +1} to every prime
//! dividing N: squarefull primes are forced to 0, exact divisors get +1
//! always and additionally -1 when p = -1 mod l. The ideal generated by
//! (l, T_p - eps(p), I_0(N)) is maximal iff s + u >= 1 and s0 + t + u1 >= 1.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{factor, is_prime, valuation, Factorization};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LocusError {
    #[error("level divisible by l")]
    LevelDivisible,
    #[error("residue characteristic too small")]
    ResidueCharTooSmall,
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("level must exceed 1")]
    LevelTooSmall,
    #[error("ideal is the unit ideal")]
    UnitIdeal,
    #[error("invalid divisor")]
    InvalidDivisor,
    #[error("invalid eigenvalue assignment: {0}")]
    InvalidEpsilon(String),
}

/// The factored level with its per-prime classification under a fixed sign
/// assignment: P carries the eps = +1 exact primes (with residue mod l),
/// Q the eps = -1 exact primes, R the squarefull primes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelClass {
    pub l: u64,
    pub n: u64,
    pub p_plus: Vec<(u64, u64)>,
    pub q_minus: Vec<u64>,
    pub r_square: Vec<(u64, u32)>,
    pub s: u32,
    pub s0: u32,
    pub t: u32,
    pub u: u32,
    pub u0: u32,
    pub u1: u32,
}

/// A rational Eisenstein locus: the level class plus the eigenvalue map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EisensteinLocus {
    pub class: LevelClass,
    pub epsilon: BTreeMap<u64, i8>,
}

/// Outcome of the closed-form dimension prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictedDimension {
    Known { dim: u32 },
    Conjectural { dim: u32 },
    NotCovered,
}

impl std::fmt::Display for PredictedDimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PredictedDimension::Known { dim } => write!(f, "known({dim})"),
            PredictedDimension::Conjectural { dim } => write!(f, "conjectural({dim})"),
            PredictedDimension::NotCovered => write!(f, "not-covered"),
        }
    }
}

fn validate_level(n: u64, l: u64) -> Result<Factorization, LocusError> {
    if l < 5 {
        return Err(LocusError::ResidueCharTooSmall);
    }
    if !is_prime(l) {
        return Err(LocusError::NotPrime(l));
    }
    if n <= 1 {
        return Err(LocusError::LevelTooSmall);
    }
    if n % l == 0 {
        return Err(LocusError::LevelDivisible);
    }
    Ok(factor(n))
}

fn build_locus(
    fac: &Factorization,
    n: u64,
    l: u64,
    minus: &BTreeSet<u64>,
) -> EisensteinLocus {
    let mut p_plus = Vec::new();
    let mut q_minus = Vec::new();
    let mut r_square = Vec::new();
    let mut epsilon = BTreeMap::new();
    for &(p, e) in &fac.factors {
        if e >= 2 {
            r_square.push((p, e));
            epsilon.insert(p, 0i8);
        } else if minus.contains(&p) {
            q_minus.push(p);
            epsilon.insert(p, -1i8);
        } else {
            p_plus.push((p, p % l));
            epsilon.insert(p, 1i8);
        }
    }
    let s = p_plus.len() as u32;
    let s0 = p_plus.iter().filter(|&&(_, r)| r == 1).count() as u32;
    let t = q_minus.len() as u32;
    let u = r_square.len() as u32;
    let u0 = r_square.iter().filter(|&&(r, _)| r % l == 1).count() as u32;
    let u1 = u0 + r_square.iter().filter(|&&(r, _)| r % l == l - 1).count() as u32;
    EisensteinLocus {
        class: LevelClass {
            l,
            n,
            p_plus,
            q_minus,
            r_square,
            s,
            s0,
            t,
            u,
            u0,
            u1,
        },
        epsilon,
    }
}

/// One locus per admissible sign assignment: squarefull primes get eps = 0,
/// every exact prime gets eps = +1, and exact primes congruent to -1 mod l
/// additionally admit eps = -1 (2^c loci in total).
pub fn enumerate_loci(n: u64, l: u64) -> Result<Vec<EisensteinLocus>, LocusError> {
    let fac = validate_level(n, l)?;
    let capable: Vec<u64> = fac
        .factors
        .iter()
        .filter(|&&(p, e)| e == 1 && p % l == l - 1)
        .map(|&(p, _)| p)
        .collect();
    let mut out = Vec::with_capacity(1 << capable.len());
    for mask in 0u32..(1 << capable.len()) {
        let minus: BTreeSet<u64> = capable
            .iter()
            .enumerate()
            .filter(|&(i, _)| mask & (1 << i) != 0)
            .map(|(_, &p)| p)
            .collect();
        out.push(build_locus(&fac, n, l, &minus));
    }
    Ok(out)
}

/// Build the locus for an explicit eigenvalue map, validating admissibility.
pub fn locus_from_epsilon(
    n: u64,
    l: u64,
    eps: &BTreeMap<u64, i8>,
) -> Result<EisensteinLocus, LocusError> {
    let fac = validate_level(n, l)?;
    let mut minus = BTreeSet::new();
    for &(p, e) in &fac.factors {
        let Some(&sign) = eps.get(&p) else {
            return Err(LocusError::InvalidEpsilon(format!(
                "missing eigenvalue for prime {p}"
            )));
        };
        match (e >= 2, sign) {
            (true, 0) => {}
            (true, _) => {
                return Err(LocusError::InvalidEpsilon(format!(
                    "prime {p} is squarefull, eigenvalue must be 0"
                )))
            }
            (false, 1) => {}
            (false, -1) => {
                if p % l != l - 1 {
                    return Err(LocusError::InvalidEpsilon(format!(
                        "prime {p} is not -1 mod {l}, eigenvalue -1 not admissible"
                    )));
                }
                minus.insert(p);
            }
            (false, _) => {
                return Err(LocusError::InvalidEpsilon(format!(
                    "prime {p} divides the level exactly, eigenvalue must be +1 or -1"
                )))
            }
        }
    }
    if eps.len() != fac.factors.len() {
        return Err(LocusError::InvalidEpsilon(
            "eigenvalue map mentions primes not dividing the level".into(),
        ));
    }
    Ok(build_locus(&fac, n, l, &minus))
}

/// The maximality criterion: s + u >= 1 and s0 + t + u1 >= 1.
pub fn is_maximal(locus: &EisensteinLocus) -> bool {
    let c = &locus.class;
    c.s + c.u >= 1 && c.s0 + c.t + c.u1 >= 1
}

/// v_l of the numerator of
/// prod (p_i - 1) * prod (q_j^2 - 1) * prod r_k^{e(k)-2} (r_k^2 - 1) / 24.
/// Since l >= 5 is coprime to 24 this is the sum of the factor valuations.
pub fn index_numerator_valuation(locus: &EisensteinLocus) -> u32 {
    let c = &locus.class;
    let l = c.l;
    let mut v = 0u32;
    for &(p, _) in &c.p_plus {
        v += valuation(p - 1, l);
    }
    for &q in &c.q_minus {
        v += valuation(q - 1, l) + valuation(q + 1, l);
    }
    for &(r, e) in &c.r_square {
        v += (e - 2) * valuation(r, l) + valuation(r - 1, l) + valuation(r + 1, l);
    }
    v
}

/// S_m: squarefull primes congruent to +-1 mod l, exact primes with
/// T_p = p mod m (i.e. eps(p) = p mod l).
pub fn s_m_set(locus: &EisensteinLocus) -> BTreeSet<u64> {
    let c = &locus.class;
    let l = c.l;
    let mut out = BTreeSet::new();
    for &(p, _) in &c.p_plus {
        if p % l == 1 {
            out.insert(p);
        }
    }
    for &q in &c.q_minus {
        out.insert(q);
    }
    for &(r, _) in &c.r_square {
        if r % l == 1 || r % l == l - 1 {
            out.insert(r);
        }
    }
    out
}

/// #S(N) = number of primes dividing N congruent to +-1 mod l.
pub fn varpi(n: u64, l: u64) -> u32 {
    assert!(is_prime(l) && n % l != 0, "varpi needs gcd(N, l) = 1");
    factor(n)
        .primes()
        .filter(|&p| p % l == 1 || p % l == l - 1)
        .count() as u32
}

/// Dimension of the Shimura-subgroup m-torsion (Ling-Oesterle, l >= 5):
/// 0 unless eps(p) = p mod l for every p | N, else #{p | N : p = 1 mod l}.
pub fn shimura_kernel_dim(locus: &EisensteinLocus) -> u32 {
    let c = &locus.class;
    let l = c.l;
    for (&p, &e) in &locus.epsilon {
        let eps_mod = (e as i64).rem_euclid(l as i64) as u64;
        if eps_mod != p % l {
            return 0;
        }
    }
    locus.epsilon.keys().filter(|&&p| p % l == 1).count() as u32
}

/// Closed-form prediction for dim J_0(N)[m] on a maximal locus.
pub fn predicted_dimension(locus: &EisensteinLocus) -> Result<PredictedDimension, LocusError> {
    if !is_maximal(locus) {
        return Err(LocusError::UnitIdeal);
    }
    let c = &locus.class;
    if c.u == 0 {
        return Ok(PredictedDimension::NotCovered);
    }
    if c.s0 != c.s || c.u0 != c.u || c.t == 0 {
        Ok(PredictedDimension::Known {
            dim: 1 + c.s0 + c.t + c.u1,
        })
    } else {
        Ok(PredictedDimension::Conjectural {
            dim: 1 + c.s + c.t + c.u,
        })
    }
}

/// 1 + #S_m + shimura_kernel_dim, an upper bound for dim J_0(N)[m].
pub fn upper_bound(locus: &EisensteinLocus) -> u32 {
    1 + s_m_set(locus).len() as u32 + shimura_kernel_dim(locus)
}

/// v_l of the order of the cuspidal divisor C_{M,N}: the numerator of
/// h * prod_{p|M} (p-1) * prod_{p|N, p nmid M} (p^2-1) * prod_{p|N^sq} p^{e-2} / 24
/// with h in {1, 2} irrelevant for l >= 5.
pub fn cuspidal_divisor_order_valuation(m: u64, n: u64, l: u64) -> Result<u32, LocusError> {
    let fac = match validate_level(n, l) {
        Ok(f) => f,
        Err(LocusError::LevelTooSmall) => return Err(LocusError::InvalidDivisor),
        Err(e) => return Err(e),
    };
    let sqf = fac.squarefree_part();
    let nsq = fac.squarefull_part();
    if m == 0 || sqf % m != 0 || m * nsq == 1 {
        return Err(LocusError::InvalidDivisor);
    }
    let mut v = 0u32;
    for &(p, e) in &fac.factors {
        if m % p == 0 {
            v += valuation(p - 1, l);
        } else {
            v += valuation(p - 1, l) + valuation(p + 1, l);
        }
        if e >= 2 {
            v += (e - 2) * valuation(p, l);
        }
    }
    Ok(v)
}

/// Eigenvalue of T_q on the cuspidal divisor C_{M,N}.
pub fn cuspidal_hecke_eigenvalue(q: u64, m: u64, n: u64) -> i64 {
    assert!(is_prime(q), "q must be prime");
    let fac = factor(n);
    let sqf = fac.squarefree_part();
    assert!(m >= 1 && sqf % m == 0, "M must divide N^sqf");
    if n % q != 0 {
        (q + 1) as i64
    } else if n % (q * q) == 0 {
        0
    } else if m % q == 0 {
        1
    } else {
        q as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn locus(n: u64, l: u64, eps: &[(u64, i8)]) -> EisensteinLocus {
        let map: BTreeMap<u64, i8> = eps.iter().copied().collect();
        locus_from_epsilon(n, l, &map).unwrap()
    }

    #[test]
    fn enumerate_loci_examples() {
        let loci = enumerate_loci(44, 5).unwrap();
        assert_eq!(loci.len(), 1);
        assert_eq!(loci[0].epsilon[&2], 0);
        assert_eq!(loci[0].epsilon[&11], 1);

        let loci = enumerate_loci(209, 5).unwrap();
        assert_eq!(loci.len(), 2);
        assert!(loci.iter().all(|lo| lo.epsilon[&11] == 1));
        let signs: Vec<i8> = loci.iter().map(|lo| lo.epsilon[&19]).collect();
        assert!(signs.contains(&1) && signs.contains(&-1));

        let loci = enumerate_loci(4, 5).unwrap();
        assert_eq!(loci.len(), 1);
        assert_eq!(loci[0].epsilon[&2], 0);

        assert_eq!(enumerate_loci(25, 5).err(), Some(LocusError::LevelDivisible));
        assert_eq!(
            enumerate_loci(44, 3).err(),
            Some(LocusError::ResidueCharTooSmall)
        );
    }

    #[test]
    fn counts_are_consistent() {
        let lo = locus(836, 5, &[(2, 0), (11, 1), (19, -1)]);
        let c = &lo.class;
        assert_eq!((c.s, c.s0, c.t, c.u, c.u0, c.u1), (1, 1, 1, 1, 0, 0));

        let lo = locus(2299, 5, &[(11, 0), (19, -1)]);
        let c = &lo.class;
        assert_eq!((c.s, c.s0, c.t, c.u, c.u0, c.u1), (0, 0, 1, 1, 1, 1));
    }

    #[test]
    fn maximality_examples() {
        assert!(is_maximal(&locus(33, 5, &[(3, 1), (11, 1)])));
        assert!(is_maximal(&locus(44, 5, &[(2, 0), (11, 1)])));
        assert!(!is_maximal(&locus(4, 5, &[(2, 0)])));
    }

    #[test]
    fn index_numerator_examples() {
        assert_eq!(index_numerator_valuation(&locus(11, 5, &[(11, 1)])), 1);
        assert_eq!(
            index_numerator_valuation(&locus(44, 5, &[(2, 0), (11, 1)])),
            1
        );
        assert_eq!(index_numerator_valuation(&locus(7, 5, &[(7, 1)])), 0);
    }

    #[test]
    fn s_m_examples() {
        let set = s_m_set(&locus(44, 5, &[(2, 0), (11, 1)]));
        assert_eq!(set, BTreeSet::from([11]));
        let set = s_m_set(&locus(2299, 5, &[(11, 0), (19, -1)]));
        assert_eq!(set, BTreeSet::from([11, 19]));
        let set = s_m_set(&locus(76, 5, &[(2, 0), (19, -1)]));
        assert_eq!(set, BTreeSet::from([19]));
    }

    #[test]
    fn varpi_examples() {
        assert_eq!(varpi(44, 5), 1);
        assert_eq!(varpi(2299, 5), 2);
        assert_eq!(varpi(7, 5), 0);
    }

    #[test]
    fn shimura_examples() {
        assert_eq!(shimura_kernel_dim(&locus(209, 5, &[(11, 1), (19, -1)])), 1);
        assert_eq!(shimura_kernel_dim(&locus(44, 5, &[(2, 0), (11, 1)])), 0);
        assert_eq!(shimura_kernel_dim(&locus(11, 5, &[(11, 1)])), 1);
    }

    #[test]
    fn predicted_dimension_examples() {
        assert_eq!(
            predicted_dimension(&locus(44, 5, &[(2, 0), (11, 1)])).unwrap(),
            PredictedDimension::Known { dim: 2 }
        );
        assert_eq!(
            predicted_dimension(&locus(2299, 5, &[(11, 0), (19, -1)])).unwrap(),
            PredictedDimension::Conjectural { dim: 3 }
        );
        assert_eq!(
            predicted_dimension(&locus(836, 5, &[(2, 0), (11, 1), (19, -1)])).unwrap(),
            PredictedDimension::Known { dim: 3 }
        );
        assert_eq!(
            predicted_dimension(&locus(4, 5, &[(2, 0)])).err(),
            Some(LocusError::UnitIdeal)
        );
    }

    #[test]
    fn upper_bound_examples() {
        assert_eq!(upper_bound(&locus(44, 5, &[(2, 0), (11, 1)])), 2);
        assert_eq!(upper_bound(&locus(2299, 5, &[(11, 0), (19, -1)])), 3);
        assert_eq!(upper_bound(&locus(209, 5, &[(11, 1), (19, -1)])), 4);
    }

    #[test]
    fn cuspidal_divisor_examples() {
        assert_eq!(cuspidal_divisor_order_valuation(11, 11, 5).unwrap(), 1);
        assert_eq!(cuspidal_divisor_order_valuation(11, 44, 5).unwrap(), 1);
        assert_eq!(cuspidal_divisor_order_valuation(1, 4, 5).unwrap(), 0);
        assert_eq!(
            cuspidal_divisor_order_valuation(2, 44, 5).err(),
            Some(LocusError::InvalidDivisor)
        );
        // M * N^square = 1 is rejected
        assert_eq!(
            cuspidal_divisor_order_valuation(1, 11, 5).err(),
            Some(LocusError::InvalidDivisor)
        );
    }

    #[test]
    fn cuspidal_eigenvalue_table() {
        assert_eq!(cuspidal_hecke_eigenvalue(11, 11, 44), 1);
        assert_eq!(cuspidal_hecke_eigenvalue(2, 11, 44), 0);
        assert_eq!(cuspidal_hecke_eigenvalue(3, 11, 44), 4);
        assert_eq!(cuspidal_hecke_eigenvalue(19, 11, 209), 19);
    }

    #[test]
    fn maximality_equivalence_sweep() {
        // maximal iff s + u >= 1 and the index numerator has positive
        // valuation, for every locus at every admissible level
        for l in [5u64, 7, 11] {
            for n in 2..=400u64 {
                if n % l == 0 {
                    continue;
                }
                for lo in enumerate_loci(n, l).unwrap() {
                    let c = &lo.class;
                    let lhs = is_maximal(&lo);
                    let rhs = c.s + c.u >= 1 && index_numerator_valuation(&lo) >= 1;
                    assert_eq!(lhs, rhs, "N={n} l={l} eps={:?}", lo.epsilon);
                }
            }
        }
    }

    #[test]
    fn s_m_cardinality_and_bounds_sweep() {
        for l in [5u64, 7] {
            for n in 2..=400u64 {
                if n % l == 0 {
                    continue;
                }
                for lo in enumerate_loci(n, l).unwrap() {
                    let c = &lo.class;
                    assert_eq!(s_m_set(&lo).len() as u32, c.s0 + c.t + c.u1);
                    if is_maximal(&lo) {
                        assert!(upper_bound(&lo) >= 2);
                        if let PredictedDimension::Known { dim } =
                            predicted_dimension(&lo).unwrap()
                        {
                            assert!(dim <= upper_bound(&lo), "N={n} l={l}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cuspidal_divisor_detects_maximality() {
        // Remark 2.4: with M = prod p_i, the l-valuation of |C_{M,N}| is
        // positive iff the locus is maximal (whenever M N^sq != 1)
        for n in 2..=400u64 {
            if n % 5 == 0 {
                continue;
            }
            for lo in enumerate_loci(n, 5).unwrap() {
                let m: u64 = lo.class.p_plus.iter().map(|&(p, _)| p).product();
                let nsq: u64 = lo.class.r_square.iter().map(|&(r, _)| r).product();
                if m * nsq == 1 {
                    continue;
                }
                let v = cuspidal_divisor_order_valuation(m, n, 5).unwrap();
                assert_eq!(v >= 1, is_maximal(&lo), "N={n} M={m}");
            }
        }
    }

    #[test]
    fn locus_from_epsilon_validation() {
        let mut eps = BTreeMap::new();
        eps.insert(2u64, 1i8);
        eps.insert(11u64, 1i8);
        assert!(matches!(
            locus_from_epsilon(44, 5, &eps),
            Err(LocusError::InvalidEpsilon(_))
        ));
        let mut eps = BTreeMap::new();
        eps.insert(11u64, -1i8); // 11 = 1 mod 5, -1 inadmissible
        assert!(matches!(
            locus_from_epsilon(11, 5, &eps),
            Err(LocusError::InvalidEpsilon(_))
        ));
    }
}
