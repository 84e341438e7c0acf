//! Orchestration: assemble the generator set of m_l(s, t, u), compute
//! dim J_0(N)[m] as a stacked kernel on cuspidal homology, compare against
//! the closed-form layer, and run the conjecture scans.
//!
//! The generator set is T_p - eps(p) for p | N followed by T_p - p - 1 for
//! every prime p coprime to N up to the weight-2 Sturm bound ceil(mu(N)/6)
//! (p = l included). Kernels are refined operator by operator: full matrix
//! kernels while the running intersection is large, then the few surviving
//! basis vectors are pushed through the remaining operators directly, in a
//! parallel batch once the intersection stabilizes. Refinement stops early
//! at dimension zero.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{is_prime, primes_up_to};
use crate::cache::{CacheDir, CacheError};
use crate::eislocus::{
    enumerate_loci, is_maximal, locus_from_epsilon, predicted_dimension, upper_bound,
    EisensteinLocus, LocusError, PredictedDimension,
};
use crate::hecke::{self, FpError, FpMatrix, OpLabel};
use crate::modsym::{build_space, index_mu, ModSymError, ModSymSpace};
use crate::par;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error(transparent)]
    ModSym(#[from] ModSymError),
    #[error(transparent)]
    Locus(#[from] LocusError),
    #[error(transparent)]
    Fp(#[from] FpError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("locus is for level {0}, engine is at level {1}")]
    LevelMismatch(u64, u64),
}

/// Weight-2 Sturm bound ceil(mu(N)/6): T_n for n up to this bound generate
/// the Hecke action.
pub fn sturm_bound(n: u64) -> u64 {
    index_mu(n).div_ceil(6)
}

#[derive(Debug, Clone, Default)]
pub struct CalcOptions {
    /// Directory for the on-disk Hecke matrix cache (none = no persistence).
    pub cache_dir: Option<PathBuf>,
    /// Multiplier on the Sturm generator cutoff (1 = the bound itself);
    /// used by the Sturm-stability checks.
    pub generator_bound_multiplier: u64,
}

impl CalcOptions {
    pub fn with_cache(dir: impl Into<PathBuf>) -> CalcOptions {
        CalcOptions {
            cache_dir: Some(dir.into()),
            ..CalcOptions::default()
        }
    }

    fn bound_multiplier(&self) -> u64 {
        self.generator_bound_multiplier.max(1)
    }
}

/// One entry of the serialized eigenvalue map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocusEntry {
    pub p: u64,
    pub e: i8,
}

/// Operator descriptor recorded in a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorUsed {
    pub op: String,
    pub eig: u8,
}

/// Result of one kernel computation, with the closed-form cross-checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub schema: u32,
    pub n: u64,
    pub l: u64,
    pub locus: Vec<LocusEntry>,
    pub computed_dim: u32,
    pub predicted: PredictedDimension,
    pub upper_bound: u32,
    pub maximal_by_formula: bool,
    pub maximal_by_computation: bool,
    pub sturm_bound: u64,
    pub generators_used: Vec<GeneratorUsed>,
    pub elapsed_ms: u64,
}

impl KernelReport {
    pub fn locus_string(&self) -> String {
        self.locus
            .iter()
            .map(|e| {
                let sign = match e.e {
                    1 => "+1",
                    -1 => "-1",
                    _ => "0",
                };
                format!("{}:{}", e.p, sign)
            })
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn csv_header() -> &'static str {
        "n,l,locus,computed,predicted,bound"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.n,
            self.l,
            self.locus_string(),
            self.computed_dim,
            self.predicted,
            self.upper_bound
        )
    }
}

/// Per-level computation state: the modular symbol space plus materialized
/// cuspidal Hecke matrices, shared across the loci of one level.
pub struct LevelEngine {
    space: ModSymSpace,
    mats: HashMap<u64, FpMatrix>,
    cache: Option<CacheDir>,
    bound_multiplier: u64,
}

/// Above this running dimension operators are materialized as full matrices;
/// at or below it kernel vectors are pushed through the operators directly.
const MAT_THRESHOLD: usize = 48;
/// Once the intersection is this small, the remaining Sturm-range primes are
/// verified in one parallel batch pass.
const SMALL_K: usize = 8;

impl LevelEngine {
    pub fn new(n: u64, l: u64, opts: &CalcOptions) -> Result<LevelEngine, KernelError> {
        let space = build_space(n, l as u16)?;
        let cache = match &opts.cache_dir {
            Some(dir) => Some(CacheDir::new(dir)?),
            None => None,
        };
        Ok(LevelEngine {
            space,
            mats: HashMap::new(),
            cache,
            bound_multiplier: opts.bound_multiplier(),
        })
    }

    pub fn space(&self) -> &ModSymSpace {
        &self.space
    }

    fn cusp_matrix(&mut self, p: u64) -> Result<&FpMatrix, KernelError> {
        if !self.mats.contains_key(&p) {
            let n = self.space.level();
            let l = self.space.modulus();
            let dim = self.space.cuspidal_dim();
            let label = OpLabel::for_prime(p, n).to_string();
            let mut loaded = None;
            if let Some(c) = &self.cache {
                // a corrupt or mismatched entry is recomputed, not fatal
                if let Ok(Some(m)) = c.load_matrix(n, l, &label) {
                    if m.rows() == dim && m.cols() == dim {
                        loaded = Some(m);
                    }
                }
            }
            let m = match loaded {
                Some(m) => m,
                None => {
                    let m = hecke::prime_op_cuspidal(&self.space, p)?;
                    if let Some(c) = &self.cache {
                        let _ = c.store_matrix(n, l, &label, &m);
                    }
                    m
                }
            };
            self.mats.insert(p, m);
        }
        Ok(&self.mats[&p])
    }

    /// Generator list for a locus: (prime, eigenvalue mod l), level primes
    /// first (ascending), then primes coprime to N up to the cutoff.
    fn generators(&self, locus: &EisensteinLocus) -> Vec<(u64, u8)> {
        let n = self.space.level();
        let l = self.space.modulus() as u64;
        let cutoff = sturm_bound(n) * self.bound_multiplier;
        let mut gens: Vec<(u64, u8)> = locus
            .epsilon
            .iter()
            .map(|(&p, &e)| (p, (e as i64).rem_euclid(l as i64) as u8))
            .collect();
        for p in primes_up_to(cutoff) {
            if n % p != 0 {
                gens.push((p, ((p + 1) % l) as u8));
            }
        }
        gens
    }

    /// dim J_0(N)[m] for the given locus, with report metadata.
    pub fn kernel_dimension(
        &mut self,
        locus: &EisensteinLocus,
    ) -> Result<KernelReport, KernelError> {
        let n = self.space.level();
        let l = self.space.modulus() as u64;
        if locus.class.n != n || locus.class.l != l {
            return Err(KernelError::LevelMismatch(locus.class.n, n));
        }
        let start = Instant::now();
        let dim2g = self.space.cuspidal_dim();
        let gens = self.generators(locus);
        let mut used: Vec<GeneratorUsed> = Vec::new();
        let mut record = |p: u64, eig: u8, used: &mut Vec<GeneratorUsed>| {
            used.push(GeneratorUsed {
                op: OpLabel::for_prime(p, n).to_string(),
                eig,
            });
        };

        let mut basis: Option<FpMatrix> = None;
        let dim_of = |basis: &Option<FpMatrix>| basis.as_ref().map_or(dim2g, |b| b.cols());
        let mut i = 0usize;

        // Phase 1: full-matrix kernels while the intersection is large.
        while i < gens.len() && dim_of(&basis) > MAT_THRESHOLD {
            let (p, eig) = gens[i];
            let me = self.cusp_matrix(p)?.sub_scalar_identity(eig);
            basis = Some(match basis {
                None => me.kernel_basis(),
                Some(bk) => {
                    let residual = me.mul(&bk)?;
                    bk.mul(&residual.kernel_basis())?
                }
            });
            record(p, eig, &mut used);
            i += 1;
        }

        // Phase 2: sequential vector refinement while the kernel shrinks.
        while i < gens.len() && dim_of(&basis) > 0 {
            let (p, eig) = gens[i];
            let b = basis
                .take()
                .unwrap_or_else(|| FpMatrix::identity(l as u16, dim2g));
            let (next, shrank) = refine_with_vectors(&self.space, p, eig, b)?;
            basis = Some(next);
            record(p, eig, &mut used);
            i += 1;
            if !shrank || dim_of(&basis) <= SMALL_K {
                break;
            }
        }

        // Phase 3: one parallel batch over every remaining generator.
        if i < gens.len() && dim_of(&basis) > 0 {
            let b = basis
                .take()
                .unwrap_or_else(|| FpMatrix::identity(l as u16, dim2g));
            let vecs: Vec<Vec<u8>> = (0..b.cols()).map(|j| b.column(j)).collect();
            let space = &self.space;
            let remaining: Vec<(u64, u8)> = gens[i..].to_vec();
            let residuals: Vec<Result<Option<FpMatrix>, FpError>> =
                par::par_map(remaining.clone(), |(p, eig)| {
                    let y = residual_matrix(space, p, eig, &vecs)?;
                    Ok(if y.is_zero() { None } else { Some(y) })
                });
            let mut stack: Vec<FpMatrix> = Vec::new();
            for r in residuals {
                if let Some(y) = r? {
                    stack.push(y);
                }
            }
            let next = if stack.is_empty() {
                b
            } else {
                let refs: Vec<&FpMatrix> = stack.iter().collect();
                let (_, combos) = hecke::stacked_kernel(&refs)?;
                b.mul(&combos)?
            };
            basis = Some(next);
            for (p, eig) in remaining {
                record(p, eig, &mut used);
            }
        }

        let computed_dim = dim_of(&basis) as u32;
        let maximal_by_formula = is_maximal(locus);
        let predicted = if maximal_by_formula {
            predicted_dimension(locus)?
        } else {
            PredictedDimension::NotCovered
        };
        Ok(KernelReport {
            schema: 1,
            n,
            l,
            locus: locus
                .epsilon
                .iter()
                .map(|(&p, &e)| LocusEntry { p, e })
                .collect(),
            computed_dim,
            predicted,
            upper_bound: upper_bound(locus),
            maximal_by_formula,
            maximal_by_computation: computed_dim > 0,
            sturm_bound: sturm_bound(n),
            generators_used: used,
            elapsed_ms: start.elapsed().as_millis() as u64,
        })
    }
}

/// Residual (T_p - eig) applied to cuspidal vectors, as a 2g x k matrix.
fn residual_matrix(
    space: &ModSymSpace,
    p: u64,
    eig: u8,
    vecs: &[Vec<u8>],
) -> Result<FpMatrix, FpError> {
    let l = space.modulus();
    let dim = space.cuspidal_dim();
    let images = hecke::apply_prime_cuspidal(space, p, vecs)?;
    let mut y = FpMatrix::zeros(l, dim, vecs.len());
    let neg = if eig == 0 { 0 } else { l - eig as u16 } as u32;
    for (j, (img, v)) in images.iter().zip(vecs).enumerate() {
        for t in 0..dim {
            let val = (img[t] as u32 + neg * v[t] as u32) % l as u32;
            y.set(t, j, val as u8);
        }
    }
    Ok(y)
}

/// One vector-mode refinement step; returns (new basis, whether it shrank).
fn refine_with_vectors(
    space: &ModSymSpace,
    p: u64,
    eig: u8,
    basis: FpMatrix,
) -> Result<(FpMatrix, bool), KernelError> {
    let vecs: Vec<Vec<u8>> = (0..basis.cols()).map(|j| basis.column(j)).collect();
    let y = residual_matrix(space, p, eig, &vecs)?;
    if y.is_zero() {
        return Ok((basis, false));
    }
    let combos = y.kernel_basis();
    let shrank = combos.cols() < basis.cols();
    Ok((basis.mul(&combos)?, shrank))
}

/// One-shot dim J_0(N)[m] for an explicit locus.
pub fn kernel_dimension(
    n: u64,
    l: u64,
    locus: &EisensteinLocus,
    opts: &CalcOptions,
) -> Result<KernelReport, KernelError> {
    LevelEngine::new(n, l, opts)?.kernel_dimension(locus)
}

/// One report per locus of the level, in enumeration order.
pub fn verify_level(
    n: u64,
    l: u64,
    opts: &CalcOptions,
) -> Result<Vec<KernelReport>, KernelError> {
    let loci = enumerate_loci(n, l)?;
    let mut engine = LevelEngine::new(n, l, opts)?;
    loci.iter().map(|lo| engine.kernel_dimension(lo)).collect()
}

/// dim J_0(qr)[n] for n = (l, T_q + 1, T_r - 1, I_0(qr)) over the primes
/// r <= r_max with r = 1 mod l. Levels run in parallel.
pub fn scan_qr_conjecture(
    q: u64,
    l: u64,
    r_max: u64,
    opts: &CalcOptions,
) -> Result<Vec<(u64, u32)>, KernelError> {
    if !is_prime(q) || !is_prime(l) || l < 5 {
        return Err(KernelError::Hypothesis(format!(
            "q = {q} and l = {l} must be primes with l >= 5"
        )));
    }
    if q % l != l - 1 {
        return Err(KernelError::Hypothesis(format!(
            "q = {q} must be congruent to -1 mod {l}"
        )));
    }
    let rs: Vec<u64> = primes_up_to(r_max)
        .into_iter()
        .filter(|&r| r % l == 1)
        .collect();
    let results = par::par_map(rs, |r| -> Result<(u64, u32), KernelError> {
        let n = q * r;
        let eps = BTreeMap::from([(q, -1i8), (r, 1i8)]);
        let locus = locus_from_epsilon(n, l, &eps)?;
        let rep = kernel_dimension(n, l, &locus, opts)?;
        Ok((r, rep.computed_dim))
    });
    results.into_iter().collect()
}

/// dim J_0(qr^2)[m] for m = (l, T_q + 1, T_r, I_0(qr^2)) over the given r.
/// Conjecturally the constant value is 3.
pub fn scan_qr2(
    q: u64,
    l: u64,
    r_list: &[u64],
    opts: &CalcOptions,
) -> Result<Vec<(u64, u32)>, KernelError> {
    if !is_prime(q) || !is_prime(l) || l < 5 || q % l != l - 1 {
        return Err(KernelError::Hypothesis(format!(
            "q = {q} must be a prime congruent to -1 mod l = {l}"
        )));
    }
    for &r in r_list {
        if !is_prime(r) || r % l != 1 {
            return Err(KernelError::Hypothesis(format!(
                "r = {r} must be a prime congruent to 1 mod {l}"
            )));
        }
    }
    let results = par::par_map(r_list.to_vec(), |r| -> Result<(u64, u32), KernelError> {
        let n = q * r * r;
        let eps = BTreeMap::from([(q, -1i8), (r, 0i8)]);
        let locus = locus_from_epsilon(n, l, &eps)?;
        let rep = kernel_dimension(n, l, &locus, opts)?;
        Ok((r, rep.computed_dim))
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn locus(n: u64, l: u64, eps: &[(u64, i8)]) -> EisensteinLocus {
        let map: BTreeMap<u64, i8> = eps.iter().copied().collect();
        locus_from_epsilon(n, l, &map).unwrap()
    }

    #[test]
    fn sturm_bound_examples() {
        assert_eq!(sturm_bound(11), 2);
        assert_eq!(sturm_bound(44), 12);
        // mu(2299) = psi(11^2 * 19) = 132 * 20 = 2640
        assert_eq!(index_mu(2299), 2640);
        assert_eq!(sturm_bound(2299), 440);
    }

    #[test]
    fn question_1_1_level_44() {
        let rep = kernel_dimension(
            44,
            5,
            &locus(44, 5, &[(2, 0), (11, 1)]),
            &CalcOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.computed_dim, 2);
        assert_eq!(rep.predicted, PredictedDimension::Known { dim: 2 });
        assert!(rep.maximal_by_formula && rep.maximal_by_computation);
        assert_eq!(rep.upper_bound, 2);
        assert_eq!(rep.sturm_bound, 12);
    }

    #[test]
    fn level_209_mixed_signs() {
        let rep = kernel_dimension(
            209,
            5,
            &locus(209, 5, &[(11, 1), (19, -1)]),
            &CalcOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.computed_dim, 2);
    }

    #[test]
    fn level_779_dimension_three() {
        let rep = kernel_dimension(
            779,
            5,
            &locus(779, 5, &[(19, -1), (41, 1)]),
            &CalcOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.computed_dim, 3);
    }

    #[test]
    fn multiplicity_five_at_level_341() {
        // p = q = 1 mod 5 (11 * 31): the kernel has dimension 5
        let rep = kernel_dimension(
            341,
            5,
            &locus(341, 5, &[(11, 1), (31, 1)]),
            &CalcOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.computed_dim, 5);
        assert_eq!(rep.upper_bound, 5);
        assert_eq!(rep.predicted, PredictedDimension::NotCovered);
    }

    #[test]
    fn verify_level_examples() {
        let reps = verify_level(44, 5, &CalcOptions::default()).unwrap();
        assert_eq!(reps.len(), 1);
        assert_eq!(reps[0].computed_dim, 2);

        let reps = verify_level(4, 5, &CalcOptions::default()).unwrap();
        assert_eq!(reps.len(), 1);
        assert_eq!(reps[0].computed_dim, 0);
        assert!(!reps[0].maximal_by_formula && !reps[0].maximal_by_computation);
    }

    #[test]
    fn scan_qr_small_window() {
        let out = scan_qr_conjecture(19, 5, 45, &CalcOptions::default()).unwrap();
        assert_eq!(out, vec![(11, 2), (31, 2), (41, 3)]);
        assert!(scan_qr_conjecture(17, 5, 45, &CalcOptions::default()).is_err());
    }

    #[test]
    fn scan_qr2_degenerate() {
        let out = scan_qr2(19, 5, &[], &CalcOptions::default()).unwrap();
        assert!(out.is_empty());
        assert!(scan_qr2(19, 5, &[13], &CalcOptions::default()).is_err());
    }

    #[test]
    fn sturm_stability_on_sampled_levels() {
        for (n, l, eps) in [
            (44u64, 5u64, vec![(2u64, 0i8), (11, 1)]),
            (209, 5, vec![(11, 1), (19, -1)]),
        ] {
            let lo = locus(n, l, &eps);
            let d1 = kernel_dimension(n, l, &lo, &CalcOptions::default())
                .unwrap()
                .computed_dim;
            let opts2 = CalcOptions {
                generator_bound_multiplier: 2,
                ..CalcOptions::default()
            };
            let d2 = kernel_dimension(n, l, &lo, &opts2).unwrap().computed_dim;
            assert_eq!(d1, d2, "N={n}");
        }
    }

    #[test]
    fn report_json_roundtrip() {
        let rep = kernel_dimension(
            44,
            5,
            &locus(44, 5, &[(2, 0), (11, 1)]),
            &CalcOptions::default(),
        )
        .unwrap();
        let json = serde_json::to_string(&rep).unwrap();
        let back: KernelReport = serde_json::from_str(&json).unwrap();
        assert_eq!(rep, back);
        assert_eq!(rep.locus_string(), "2:0;11:+1");
        assert!(rep.to_csv_row().starts_with("44,5,2:0;11:+1,2,"));
    }

    #[test]
    fn both_loci_at_209_have_dimension_two() {
        // the eps(19) = +1 locus (not new: 19 = -1 mod 5 but T_19 = +1) still
        // pins dim = 2 between the lower bound and 1 + #S_m + 0
        let reps = verify_level(209, 5, &CalcOptions::default()).unwrap();
        assert_eq!(reps.len(), 2);
        let dims: Vec<u32> = reps.iter().map(|r| r.computed_dim).collect();
        assert!(dims.iter().all(|&d| d == 2), "{dims:?}");
    }

    #[test]
    fn disk_cache_is_written_and_reused() {
        // level 341 has 2g = 62 > the matrix threshold, so the first
        // operators are materialized and persisted
        let dir = tempfile::tempdir().unwrap();
        let opts = CalcOptions::with_cache(dir.path());
        let lo = locus(341, 5, &[(11, 1), (31, 1)]);
        let d1 = kernel_dimension(341, 5, &lo, &opts).unwrap().computed_dim;
        let cache = CacheDir::new(dir.path()).unwrap();
        let entries = cache.stats().unwrap().entries;
        assert!(entries > 0);
        let d2 = kernel_dimension(341, 5, &lo, &opts).unwrap().computed_dim;
        assert_eq!(d1, d2);
        assert_eq!(d1, 5);
        // no extra entries on the cached rerun
        assert_eq!(cache.stats().unwrap().entries, entries);
        let rep = cache.verify().unwrap();
        assert_eq!(rep.ok, rep.entries);
    }
}
