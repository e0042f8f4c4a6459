//! Elementary multiplicative functions, the shared prime table, the
//! smooth/rough split `n = a·b` and the sieving parameters `(x, ε, s, z, y, Q)`.

use std::fs;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable naming a directory where prime tables are cached.
pub const PRIME_CACHE_ENV: &str = "SCSIEVE_PRIME_CACHE";

/// Primes up to `limit`, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
}

impl PrimeTable {
    /// Sieve of Eratosthenes over the odd numbers.
    pub fn new(limit: u64) -> Self {
        let mut primes = Vec::new();
        if limit >= 2 {
            primes.push(2);
        }
        if limit >= 3 {
            // index i <-> 2i + 3
            let len = ((limit - 3) / 2 + 1) as usize;
            let mut composite = vec![false; len];
            let mut i = 0usize;
            loop {
                let p = 2 * i as u64 + 3;
                if p * p > limit {
                    break;
                }
                if !composite[i] {
                    let mut j = ((p * p - 3) / 2) as usize;
                    while j < len {
                        composite[j] = true;
                        j += p as usize;
                    }
                }
                i += 1;
            }
            primes.extend(
                composite
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| !c)
                    .map(|(i, _)| 2 * i as u64 + 3),
            );
        }
        PrimeTable { limit, primes }
    }

    /// Builds the table, going through the on-disk cache when
    /// [`PRIME_CACHE_ENV`] names a directory.
    pub fn load_or_build(limit: u64) -> Self {
        let Some(dir) = std::env::var_os(PRIME_CACHE_ENV).map(PathBuf::from) else {
            return Self::new(limit);
        };
        let path = dir.join(format!("primes-{limit}.bin"));
        if let Ok(table) = Self::read_cache(&path, limit) {
            return table;
        }
        let table = Self::new(limit);
        // A failed cache write only costs a rebuild next time.
        let _ = fs::create_dir_all(&dir).and_then(|_| table.write_cache(&path));
        table
    }

    fn read_cache(path: &std::path::Path, limit: u64) -> std::io::Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() % 8 != 0 {
            return Err(std::io::Error::other("truncated prime cache"));
        }
        let primes: Vec<u64> = bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if primes.windows(2).any(|w| w[0] >= w[1]) || primes.last().is_some_and(|&p| p > limit) {
            return Err(std::io::Error::other("corrupt prime cache"));
        }
        Ok(PrimeTable { limit, primes })
    }

    fn write_cache(&self, path: &std::path::Path) -> std::io::Result<()> {
        let mut f = fs::File::create(path)?;
        for p in &self.primes {
            f.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// Primes `p <= bound` (a real bound, compared as `p as f64 <= bound`).
    pub fn up_to(&self, bound: f64) -> &[u64] {
        let end = self.primes.partition_point(|&p| (p as f64) <= bound);
        &self.primes[..end]
    }

    pub fn is_prime(&self, n: u64) -> bool {
        debug_assert!(n <= self.limit);
        self.primes.binary_search(&n).is_ok()
    }
}

static SHARED: Mutex<Option<Arc<PrimeTable>>> = Mutex::new(None);

/// Process-wide prime table covering at least `limit`. Grows geometrically.
pub fn shared_primes(limit: u64) -> Arc<PrimeTable> {
    let mut guard = SHARED.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(t) = guard.as_ref() {
        if t.limit() >= limit {
            return Arc::clone(t);
        }
    }
    let current = guard.as_ref().map_or(0, |t| t.limit());
    let target = limit.max(current.saturating_mul(2)).max(1 << 16);
    let table = Arc::new(PrimeTable::load_or_build(target));
    *guard = Some(Arc::clone(&table));
    table
}

/// Prime factorization by trial division, ascending primes.
pub fn factorize(n: u64) -> Vec<(u64, u32)> {
    assert!(n >= 1, "factorize needs n >= 1");
    let table = shared_primes(isqrt(n) + 1);
    let mut out = Vec::new();
    let mut rest = n;
    for &p in table.primes() {
        if p * p > rest {
            break;
        }
        if rest.is_multiple_of(p) {
            let mut e = 0;
            while rest.is_multiple_of(p) {
                rest /= p;
                e += 1;
            }
            out.push((p, e));
        }
    }
    if rest > 1 {
        out.push((rest, 1));
    }
    out
}

pub fn isqrt(n: u64) -> u64 {
    let mut r = ((n as f64).sqrt() as u64).min(u32::MAX as u64);
    while r * r > n {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|sq| sq <= n) {
        r += 1;
    }
    r
}

pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// `binomial(n, k)` in u128; saturates on overflow.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of ordered factorizations of `n` into `m` positive factors.
///
/// Multiplicative with `τ_m(p^α) = C(α + m − 1, m − 1)`; saturates at `u64::MAX`.
pub fn tau_m(n: u64, m: u32) -> u64 {
    assert!(n >= 1 && m >= 1, "tau_m needs n >= 1 and m >= 1");
    factorize(n)
        .into_iter()
        .map(|(_, e)| binomial(e as u64 + m as u64 - 1, m as u64 - 1))
        .fold(1u64, |acc, c| {
            acc.saturating_mul(u64::try_from(c).unwrap_or(u64::MAX))
        })
}

/// Divisor count.
pub fn tau(n: u64) -> u64 {
    tau_m(n, 2)
}

pub fn euler_phi(n: u64) -> u64 {
    factorize(n)
        .into_iter()
        .fold(n, |acc, (p, _)| acc / p * (p - 1))
}

/// Number of prime factors counted with multiplicity.
pub fn big_omega(n: u64) -> u32 {
    factorize(n).into_iter().map(|(_, e)| e).sum()
}

pub fn is_squarefree(n: u64) -> bool {
    factorize(n).into_iter().all(|(_, e)| e == 1)
}

/// The unique split `n = a·b` with every prime of `a` at most `z` and every
/// prime of `b` above `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothRoughFactorization {
    pub n: u64,
    pub z: f64,
    /// z-smooth part
    pub a: u64,
    /// z-rough part
    pub b: u64,
}

pub fn smooth_rough(n: u64, z: f64) -> SmoothRoughFactorization {
    assert!(n >= 1, "smooth_rough needs n >= 1");
    let a = factorize(n)
        .into_iter()
        .filter(|&(p, _)| (p as f64) <= z)
        .map(|(p, e)| p.pow(e))
        .product::<u64>();
    SmoothRoughFactorization { n, z, a, b: n / a }
}

/// z-smooth part of every integer in `0..=limit` (entry 0 is unused).
///
/// Sieves by prime powers; agrees with [`smooth_rough`] termwise.
pub fn smooth_part_sieve(limit: u64, z: f64) -> Vec<u64> {
    let mut parts = vec![1u64; limit as usize + 1];
    let bound = z.min(limit as f64);
    let table = shared_primes(bound.max(2.0) as u64);
    for &p in table.up_to(bound) {
        let mut pk = p;
        loop {
            for m in (pk..=limit).step_by(pk as usize) {
                parts[m as usize] *= p;
            }
            match pk.checked_mul(p) {
                Some(next) if next <= limit => pk = next,
                _ => break,
            }
        }
    }
    parts
}

/// The tuple `(x, ε, s, z, y, Q)` governing the sieve computations:
/// `s = ε log log x`, `z = x^{1/s}`, `y = x^ε`, `Q = x^{1/4}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SievingParameters {
    pub x: f64,
    pub epsilon: f64,
    pub s: f64,
    pub z: f64,
    pub y: f64,
    pub q: f64,
    /// Divisor-bound exponent `m` in `|λ_i(n)| <= τ_m(n)`; enters only the
    /// size threshold.
    pub m: u32,
    /// Set when `x < exp(exp(exp((4 + m⁴)/(2ε))))`, the range from which the
    /// asymptotic bound is claimed.
    pub below_paper_threshold: bool,
}

impl SievingParameters {
    /// `min(z, x)`: primes above `x` never divide an `n <= x`, so products
    /// over `p <= z` are truncated here when `z` exceeds `x`.
    pub fn z_effective(&self) -> f64 {
        self.z.min(self.x)
    }

    /// `2 <= z <= y <= x`, the ordering assumed in the asymptotic regime.
    pub fn ordering_holds(&self) -> bool {
        2.0 <= self.z && self.z <= self.y && self.y <= self.x
    }
}

/// Parameters for the holomorphic case `m = 2`.
pub fn make_params(x: f64, epsilon: f64) -> Result<SievingParameters> {
    make_params_with_m(x, epsilon, 2)
}

pub fn make_params_with_m(x: f64, epsilon: f64, m: u32) -> Result<SievingParameters> {
    if !(x.is_finite() && x >= 16.0) {
        return Err(Error::param("x", format!("need x >= 16, got {x}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param(
            "epsilon",
            format!("need 0 < ε < 1, got {epsilon}"),
        ));
    }
    if m == 0 {
        return Err(Error::param("m", "need m >= 1"));
    }
    let lx = x.ln();
    let s = epsilon * lx.ln();
    let z = (lx / s).exp();
    let y = x.powf(epsilon);
    let q = x.powf(0.25);
    // x >= e^{e^{e^c}}  <=>  ln ln ln x >= c, valid since ln ln x > 0 for x >= 16.
    let c = (4.0 + (m as f64).powi(4)) / (2.0 * epsilon);
    let below = lx.ln().ln() < c;
    Ok(SievingParameters {
        x,
        epsilon,
        s,
        z,
        y,
        q,
        m,
        below_paper_threshold: below,
    })
}
