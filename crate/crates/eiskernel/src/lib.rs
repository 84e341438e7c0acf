//! Kernel dimensions of rational Eisenstein primes on Jacobians of modular
//! curves, computed through weight-2 modular symbols over small prime fields.
//!
//! The central quantity is dim J_0(N)[m] for a maximal ideal
//! m = (l, T_p - eps(p) for p | N, T_p - p - 1 for p coprime to N) of the
//! Hecke ring. The library realizes J_0(N)[l] as H_1(X_0(N); F_l) via the
//! Manin-symbol presentation, so the kernel is a stacked kernel of exact
//! matrices over F_l on the cuspidal subspace — no floating point anywhere.

pub mod arith;
pub mod cache;
pub mod eislocus;
pub mod hecke;
pub mod kernelcalc;
pub mod modsym;
pub mod par;

pub use hecke::{FpError, FpMatrix};
pub use kernelcalc::{sturm_bound, CalcOptions, KernelError, KernelReport, LevelEngine};
pub use modsym::{build_space, ModSymSpace};
