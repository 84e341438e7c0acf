//! Merel's family of Heilbronn matrices for the Hecke operator T_n:
//! all integer matrices [[a, b], [c, d]] with determinant n, a > b >= 0 and
//! d > c >= 0. Acting on Manin symbols on the right (dropping images that are
//! not coprime to the level) this family computes T_n for gcd(n, N) = 1.

/// Stream the family X_n in a fixed deterministic order.
pub fn merel_family(n: u64, mut emit: impl FnMut(u64, u64, u64, u64)) {
    assert!(n >= 1);
    for a in 1..=n {
        let q = n / a;
        if a * q == n {
            // determinant already n: bc = 0
            let d = q;
            for b in 0..a {
                emit(a, b, 0, d);
            }
            for c in 1..d {
                emit(a, 0, c, d);
            }
        }
        // bc = a*d - n > 0, with b < a and c < d; this forces a + d <= n + 1
        let dmax = (n + 1).saturating_sub(a);
        for d in (q + 1)..=dmax {
            let m = a * d - n;
            // c | m with m/a < c < d (so that b = m/c < a)
            let cmin = m / a + 1;
            for c in cmin..d {
                if m % c == 0 {
                    emit(a, m / c, c, d);
                }
            }
        }
    }
}

/// The family with entries reduced mod N, materialized.
pub fn merel_family_mod(n: u64, level: u32) -> Vec<[u32; 4]> {
    let nn = level as u64;
    let mut out = Vec::new();
    merel_family(n, |a, b, c, d| {
        out.push([
            (a % nn) as u32,
            (b % nn) as u32,
            (c % nn) as u32,
            (d % nn) as u32,
        ]);
    });
    out
}
