//! The sieve problem attached to one pair of smooth parts `(a, a_ℓ)`:
//! forbidden residue classes, the multiplicative weight `h`, the sum `H`,
//! the large-sieve bound `(N + Q²)/H`, and brute-force counts.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, gcd, shared_primes};
use crate::error::{Error, Result};

/// Largest range the brute-force oracles will scan.
pub const ORACLE_LIMIT: u64 = 10_000_000;

const CHUNK: u64 = 1 << 16;

/// Where a system came from: `n_v ≡ r (mod a·a_ℓ)`, `n_v ≤ x/v`, shift `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaContext {
    pub a: u64,
    pub a_ell: u64,
    pub w: i64,
    pub v: u64,
    pub r: u64,
    pub z: f64,
    pub x: f64,
}

/// Range `1..=n_len`, odd primes `primes`, and the forbidden classes per prime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaSystem {
    pub n_len: u64,
    pub primes: Vec<u64>,
    pub omega: BTreeMap<u64, Vec<u64>>,
    pub context: Option<OmegaContext>,
}

impl OmegaSystem {
    /// Number of forbidden classes at `p` (0 when `p` carries none).
    pub fn omega_len(&self, p: u64) -> usize {
        self.omega.get(&p).map_or(0, Vec::len)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::param("system", e.to_string()))
    }

    /// Shape checks that must hold before anything can be computed: every
    /// listed prime is an odd prime with residues reduced modulo it.
    pub fn validate_structure(&self) -> Result<()> {
        let mut prev = 0;
        for &p in &self.primes {
            if p < 3 || !crate::ntt::is_prime_u64(p) {
                return Err(Error::param("primes", format!("{p} is not an odd prime")));
            }
            if p <= prev {
                return Err(Error::param("primes", "must be strictly increasing"));
            }
            prev = p;
        }
        for (&p, classes) in &self.omega {
            if self.primes.binary_search(&p).is_err() {
                return Err(Error::param(
                    "omega",
                    format!("classes given for {p}, not in the prime set"),
                ));
            }
            if let Some(&c) = classes.iter().find(|&&c| c >= p) {
                return Err(Error::param(
                    "omega",
                    format!("class {c} is not reduced mod {p}"),
                ));
            }
        }
        Ok(())
    }

    /// Primes whose class list repeats a residue or covers every class.
    pub fn degenerate_primes(&self) -> Vec<u64> {
        self.omega
            .iter()
            .filter(|(&p, cs)| {
                let mut s = (*cs).clone();
                s.sort_unstable();
                s.dedup();
                s.len() != cs.len() || cs.len() as u64 >= p
            })
            .map(|(&p, _)| p)
            .collect()
    }
}

fn inv_mod(x: i128, m: i128) -> Option<i128> {
    let g = x.rem_euclid(m).extended_gcd(&m);
    (g.gcd == 1).then(|| g.x.rem_euclid(m))
}

/// The unique `0 <= r < a·a_ℓ` with `r ≡ 0 (mod a)` and `r ≡ −w (mod a_ℓ)`.
pub fn crt_residue(a: u64, a_ell: u64, w: i64) -> Result<u64> {
    if a == 0 || a_ell == 0 {
        return Err(Error::param("modulus", "moduli must be positive"));
    }
    if gcd(a, a_ell) != 1 {
        return Err(Error::NonCoprime { a, b: a_ell });
    }
    if a_ell == 1 {
        return Ok(0);
    }
    let m = a_ell as i128;
    let t = (-(w as i128)).rem_euclid(m) * inv_mod(a as i128, m).expect("coprime") % m;
    Ok((a as i128 * t) as u64)
}

/// The system for smooth parts `a`, `a_ℓ`, shift `w`, over `n_v ≤ x/v`, sieving
/// by the odd primes up to `z`.
pub fn build_omega(a: u64, a_ell: u64, w: i64, z: f64, x: f64, v: u64) -> Result<OmegaSystem> {
    if a == 0 || a_ell == 0 || v == 0 {
        return Err(Error::param("a, a_ell, v", "must be positive"));
    }
    if w == 0 {
        return Err(Error::param("w", "shift must be nonzero"));
    }
    if gcd(a, a_ell) != 1 {
        return Err(Error::NonCoprime { a, b: a_ell });
    }
    if gcd(a * a_ell, w.unsigned_abs()) != 1 {
        return Err(Error::NonCoprime {
            a: a * a_ell,
            b: w.unsigned_abs(),
        });
    }
    if let Some((p, _)) = factorize(a * a_ell)
        .into_iter()
        .find(|&(p, _)| p as f64 > z)
    {
        return Err(Error::Precondition(format!(
            "prime {p} of a·a_ell exceeds z = {z}"
        )));
    }
    let modulus = v as f64 * a as f64 * a_ell as f64;
    if !(modulus <= x) {
        return Err(Error::Precondition(format!(
            "v·a·a_ell = {modulus} exceeds x = {x}"
        )));
    }
    let r = crt_residue(a, a_ell, w)?;
    let n_len = (x / modulus).floor() as u64;

    let table = shared_primes(z.max(3.0) as u64);
    let primes: Vec<u64> = table.up_to(z).iter().copied().filter(|&p| p > 2).collect();
    let (ai, li, ri, wi) = (a as i128, a_ell as i128, r as i128, w as i128);
    let mut omega = BTreeMap::new();
    for &p in &primes {
        let pi = p as i128;
        let r1 = || (-(inv_mod(li, pi).expect("p ∤ a_ell")) * (ri / ai)).rem_euclid(pi) as u64;
        let r2 = || (-(inv_mod(ai, pi).expect("p ∤ a")) * ((ri + wi) / li)).rem_euclid(pi) as u64;
        let classes = if a.is_multiple_of(p) {
            vec![r1()]
        } else if a_ell.is_multiple_of(p) {
            vec![r2()]
        } else {
            let (c1, c2) = (r1(), r2());
            if c1 == c2 {
                vec![c1]
            } else {
                vec![c1.min(c2), c1.max(c2)]
            }
        };
        omega.insert(p, classes);
    }
    Ok(OmegaSystem {
        n_len,
        primes,
        omega,
        context: Some(OmegaContext {
            a,
            a_ell,
            w,
            v,
            r,
            z,
            x,
        }),
    })
}

fn h_prime(sys: &OmegaSystem, p: u64) -> Result<BigRational> {
    let w = sys.omega_len(p) as u64;
    if w >= p {
        return Err(Error::Precondition(format!(
            "ω({p}) = {w} is not below {p}"
        )));
    }
    Ok(BigRational::new(BigInt::from(w), BigInt::from(p - w)))
}

/// `h(q) = ∏_{p|q} ω(p)/(p − ω(p))` for square-free `q` supported on the prime set.
pub fn h_value(q: u64, sys: &OmegaSystem) -> Result<BigRational> {
    if q == 0 {
        return Err(Error::param("q", "must be positive"));
    }
    let mut out = BigRational::one();
    for (p, e) in factorize(q) {
        if e > 1 {
            return Err(Error::param("q", format!("{q} is not square-free")));
        }
        if sys.primes.binary_search(&p).is_err() {
            return Err(Error::param(
                "q",
                format!("prime {p} of {q} is outside the prime set"),
            ));
        }
        out *= h_prime(sys, p)?;
    }
    Ok(out)
}

/// `H = Σ h(q)` over square-free `q ≤ Q` composed of primes in the set.
pub fn big_h(q_max: f64, sys: &OmegaSystem) -> Result<BigRational> {
    let limit = if q_max >= 1.0 {
        q_max.floor() as u64
    } else {
        0
    };
    let hs: Vec<(u64, BigRational)> = sys
        .primes
        .iter()
        .filter(|&&p| p <= limit)
        .map(|&p| h_prime(sys, p).map(|h| (p, h)))
        .collect::<Result<_>>()?;
    let mut total = BigRational::zero();
    if limit == 0 {
        return Ok(total);
    }
    dfs(&hs, 0, 1, &BigRational::one(), limit, &mut total);
    Ok(total)
}

fn dfs(
    hs: &[(u64, BigRational)],
    start: usize,
    q: u64,
    h: &BigRational,
    limit: u64,
    total: &mut BigRational,
) {
    *total += h;
    for (i, (p, hp)) in hs.iter().enumerate().skip(start) {
        match q.checked_mul(*p) {
            Some(next) if next <= limit => {
                if hp.is_zero() {
                    continue;
                }
                dfs(hs, i + 1, next, &(h * hp), limit, total);
            }
            _ => break,
        }
    }
}

/// `(N + Q²)/H`.
pub fn ls_bound(sys: &OmegaSystem, q_max: f64) -> Result<f64> {
    if q_max < 1.0 {
        return Err(Error::param("Q", "must be at least 1"));
    }
    let h = big_h(q_max, sys)?;
    bound_from_h(sys.n_len, q_max, &h)
}

pub(crate) fn bound_from_h(n_len: u64, q_max: f64, h: &BigRational) -> Result<f64> {
    let hf = h.to_f64().unwrap_or(0.0);
    if !(hf > 0.0) {
        return Err(Error::Precondition("H must be positive".into()));
    }
    Ok((n_len as f64 + q_max * q_max) / hf)
}

/// Sum of `h(q)` over `q ≤ Q` dividing the part of `a·a_ℓ` supported on the
/// prime set; every such term also appears in `H`.
pub fn h_divisor_part(q_max: f64, sys: &OmegaSystem) -> Result<BigRational> {
    let ctx = sys
        .context
        .ok_or_else(|| Error::Precondition("system has no context".into()))?;
    let ps: Vec<u64> = factorize(ctx.a * ctx.a_ell)
        .into_iter()
        .map(|(p, _)| p)
        .filter(|p| sys.primes.binary_search(p).is_ok())
        .collect();
    let mut total = BigRational::zero();
    for mask in 0u32..(1 << ps.len()) {
        let q: u64 = (0..ps.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ps[i])
            .product();
        if q as f64 <= q_max {
            total += h_value(q, sys)?;
        }
    }
    Ok(total)
}

/// `H / ((φ(aa_ℓ)/aa_ℓ)(log z)²)`, the ratio against the expected order of `H`.
pub fn h_order_ratio(q_max: f64, sys: &OmegaSystem) -> Result<f64> {
    let ctx = sys
        .context
        .ok_or_else(|| Error::Precondition("system has no context".into()))?;
    let m = ctx.a * ctx.a_ell;
    let density = crate::arith::euler_phi(m) as f64 / m as f64;
    let lz = ctx.z.ln();
    Ok(big_h(q_max, sys)?.to_f64().unwrap_or(f64::NAN) / (density * lz * lz))
}

/// Count of `m ∈ 1..=N` avoiding every forbidden class, by marking.
pub fn sift_bruteforce(sys: &OmegaSystem) -> Result<u64> {
    if sys.n_len > ORACLE_LIMIT {
        return Err(Error::OracleRange {
            value: sys.n_len,
            limit: ORACLE_LIMIT,
        });
    }
    let n = sys.n_len;
    let chunks = n.div_ceil(CHUNK);
    Ok((0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK + 1;
            let hi = (lo + CHUNK - 1).min(n);
            let mut struck = vec![false; (hi - lo + 1) as usize];
            for (&p, classes) in &sys.omega {
                for &cls in classes {
                    let first = lo + (cls + p - lo % p) % p;
                    let mut m = first;
                    while m <= hi {
                        struck[(m - lo) as usize] = true;
                        m += p;
                    }
                }
            }
            struck.iter().filter(|&&s| !s).count() as u64
        })
        .sum())
}

/// Independent count over `n_v = r + m·a·a_ℓ`, `1 ≤ m ≤ N`, keeping those for
/// which neither `n_v / a` nor `(n_v + w)/a_ℓ` has an odd prime factor `≤ z`.
pub fn direct_scan(ctx: &OmegaContext, n_len: u64) -> Result<u64> {
    if n_len > ORACLE_LIMIT {
        return Err(Error::OracleRange {
            value: n_len,
            limit: ORACLE_LIMIT,
        });
    }
    let table = shared_primes(ctx.z.max(3.0) as u64);
    let odd: Vec<i128> = table
        .up_to(ctx.z)
        .iter()
        .filter(|&&p| p > 2)
        .map(|&p| p as i128)
        .collect();
    let (a, al, w) = (ctx.a as i128, ctx.a_ell as i128, ctx.w as i128);
    let step = a * al;
    let chunks = n_len.div_ceil(CHUNK);
    let counts: Vec<std::result::Result<u64, String>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK + 1;
            let hi = (lo + CHUNK - 1).min(n_len);
            let mut count = 0;
            for m in lo..=hi {
                let nv = ctx.r as i128 + m as i128 * step;
                if nv % a != 0 || (nv + w) % al != 0 {
                    return Err(format!("n_v = {nv} does not satisfy the congruences"));
                }
                let b = nv / a;
                let bl = (nv + w) / al;
                if odd.iter().all(|&p| b % p != 0 && bl % p != 0) {
                    count += 1;
                }
            }
            Ok(count)
        })
        .collect();
    let mut total = 0;
    for c in counts {
        total += c.map_err(Error::Precondition)?;
    }
    Ok(total)
}

/// One randomly drawn admissible system with its sieve level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomInstance {
    pub index: usize,
    pub system: OmegaSystem,
    pub q: f64,
}

/// Deterministic stream of admissible systems: `3 ≤ z ≤ 50`, `N ≤ 10⁵`, and
/// `Q` alternating between `N^{1/4}` and `N^{1/2}`.
pub fn random_systems(count: usize, seed: u64) -> Result<Vec<RandomInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = shared_primes(64);
    let mut out = Vec::with_capacity(count);
    for index in 0..count {
        let z = rng.random_range(3..=50u64) as f64;
        let ps = table.up_to(z);
        let a = random_smooth(&mut rng, ps, 1);
        let a_ell = random_smooth(&mut rng, ps, a);
        let w = loop {
            let w: i64 = rng.random_range(-60..=60);
            if w != 0 && gcd(a * a_ell, w.unsigned_abs()) == 1 {
                break w;
            }
        };
        let v = rng.random_range(1..=4u64);
        let n_len = rng.random_range(1..=100_000u64);
        let x = (n_len * v * a * a_ell) as f64;
        let system = build_omega(a, a_ell, w, z, x, v)?;
        let root = if index % 2 == 0 { 0.25 } else { 0.5 };
        let q = (system.n_len as f64).powf(root).max(1.0);
        out.push(RandomInstance { index, system, q });
    }
    Ok(out)
}

/// A smooth number built from at most two primes `≤ z` coprime to `avoid`.
fn random_smooth(rng: &mut ChaCha8Rng, primes: &[u64], avoid: u64) -> u64 {
    let mut out = 1;
    let factors = rng.random_range(0..=2);
    for _ in 0..factors {
        let p = primes[rng.random_range(0..primes.len())];
        if avoid.is_multiple_of(p) || out % p == 0 {
            continue;
        }
        let e = rng.random_range(1..=2);
        let pe = p.pow(e);
        if out * pe <= 500 {
            out *= pe;
        }
    }
    out
}

/// Outcome of checking one system end to end.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SieveCheck {
    pub n_len: u64,
    pub q: f64,
    pub h: f64,
    pub brute: u64,
    pub bound: f64,
    pub holds: bool,
    /// Count from [`direct_scan`], when the system has a context.
    pub direct: Option<u64>,
    /// The stored classes equal those rebuilt from the context.
    pub consistent: bool,
    pub degenerate_primes: Vec<u64>,
}

impl SieveCheck {
    /// Every checked property holds.
    pub fn all_hold(&self) -> bool {
        self.holds
            && self.consistent
            && self.degenerate_primes.is_empty()
            && self.direct.is_none_or(|d| d == self.brute)
    }
}

/// Brute count, bound, model equivalence and class consistency for one system.
///
/// The bound is computed from the class lists exactly as stored, so a
/// corrupted system can surface as a violated inequality.
pub fn check_system(sys: &OmegaSystem, q: f64) -> Result<SieveCheck> {
    sys.validate_structure()?;
    if q < 1.0 {
        return Err(Error::param("Q", "must be at least 1"));
    }
    let degenerate = sys.degenerate_primes();
    let brute = sift_bruteforce(sys)?;
    let (h, bound) = if degenerate.iter().any(|&p| sys.omega_len(p) as u64 >= p) {
        (f64::NAN, f64::NAN)
    } else {
        let h = big_h(q, sys)?;
        let b = bound_from_h(sys.n_len, q, &h)?;
        (h.to_f64().unwrap_or(f64::NAN), b)
    };
    let (direct, consistent) = match &sys.context {
        Some(ctx) => {
            let rebuilt = build_omega(ctx.a, ctx.a_ell, ctx.w, ctx.z, ctx.x, ctx.v);
            let consistent = rebuilt.is_ok_and(|r| {
                r.omega == sys.omega && r.primes == sys.primes && r.n_len == sys.n_len
            });
            (Some(direct_scan(ctx, sys.n_len)?), consistent)
        }
        None => (None, true),
    };
    Ok(SieveCheck {
        n_len: sys.n_len,
        q,
        h,
        brute,
        bound,
        holds: (brute as f64) <= bound,
        direct,
        consistent,
        degenerate_primes: degenerate,
    })
}
