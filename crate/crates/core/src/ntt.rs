//! Exact truncated products of integer series by number-theoretic transforms
//! over several 62-bit primes, recombined by the Chinese remainder theorem.
//!
//! The number of primes is chosen from a rigorous bit bound on the result
//! (`log2 len + bits(max|a|) + bits(max|b|) + sign`), so reconstruction is
//! exact. Arithmetic is Montgomery form throughout.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::Zero;

use crate::error::{Error, Result};

/// Largest transform length is `2^MAX_LOG`.
const MAX_LOG: u32 = 23;
const PRIME_COUNT: usize = 16;

#[derive(Debug, Clone, Copy)]
struct Montgomery {
    p: u64,
    /// `-p^{-1} mod 2^64`
    neg_inv: u64,
    /// `2^128 mod p`
    r2: u64,
}

impl Montgomery {
    fn new(p: u64) -> Self {
        debug_assert!(p % 2 == 1 && p < 1 << 62);
        let mut inv: u64 = 1;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(p.wrapping_mul(inv)));
        }
        let r = ((1u128 << 64) % p as u128) as u64;
        let r2 = ((r as u128 * r as u128) % p as u128) as u64;
        Montgomery {
            p,
            neg_inv: inv.wrapping_neg(),
            r2,
        }
    }

    #[inline(always)]
    fn reduce(&self, t: u128) -> u64 {
        let m = (t as u64).wrapping_mul(self.neg_inv);
        let u = ((t + m as u128 * self.p as u128) >> 64) as u64;
        if u >= self.p {
            u - self.p
        } else {
            u
        }
    }

    #[inline(always)]
    fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce(a as u128 * b as u128)
    }

    #[inline(always)]
    fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline(always)]
    fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    fn to_mont(&self, a: u64) -> u64 {
        self.mul(a % self.p, self.r2)
    }

    fn from_mont(&self, a: u64) -> u64 {
        self.reduce(a as u128)
    }

    fn pow(&self, base: u64, mut e: u64) -> u64 {
        let mut acc = self.to_mont(1);
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        acc
    }
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, p);
        }
        b = mul_mod(b, b, p);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller–Rabin for 64-bit integers.
pub(crate) fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &b in &BASES {
        if n.is_multiple_of(b) {
            return n == b;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'bases: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

fn prime_divisors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

#[derive(Debug, Clone)]
struct NttPrime {
    mont: Montgomery,
    /// primitive root of unity of order 2^MAX_LOG, Montgomery form
    root: u64,
}

fn ntt_primes() -> &'static [NttPrime] {
    static PRIMES: OnceLock<Vec<NttPrime>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let step = 1u64 << MAX_LOG;
        let mut c = ((1u64 << 62) - 1) / step;
        let mut out = Vec::with_capacity(PRIME_COUNT);
        while out.len() < PRIME_COUNT {
            let p = c * step + 1;
            c -= 1;
            if !is_prime_u64(p) {
                continue;
            }
            let factors = prime_divisors(p - 1);
            let g = (2..)
                .find(|&g| factors.iter().all(|&q| pow_mod(g, (p - 1) / q, p) != 1))
                .unwrap();
            let mont = Montgomery::new(p);
            let root = mont.pow(mont.to_mont(g), (p - 1) >> MAX_LOG);
            out.push(NttPrime { mont, root });
        }
        out
    })
}

/// In-place iterative radix-2 transform; `invert` gives the unscaled inverse.
fn ntt(a: &mut [u64], prime: &NttPrime, invert: bool) {
    let n = a.len();
    let m = &prime.mont;
    let log_n = n.trailing_zeros();
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j ^= bit;
        if i < j {
            a.swap(i, j);
        }
    }
    // root of order n
    let mut w_n = prime.root;
    for _ in log_n..MAX_LOG {
        w_n = m.mul(w_n, w_n);
    }
    if invert {
        w_n = m.pow(w_n, (1u64 << log_n) - 1);
    }
    // twiddles for the largest stage, reused by striding
    let half = n / 2;
    let mut tw = Vec::with_capacity(half.max(1));
    let mut cur = m.to_mont(1);
    for _ in 0..half.max(1) {
        tw.push(cur);
        cur = m.mul(cur, w_n);
    }
    let mut len = 2;
    while len <= n {
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let u = a[start + k];
                let v = m.mul(a[start + k + len / 2], tw[k * stride]);
                a[start + k] = m.add(u, v);
                a[start + k + len / 2] = m.sub(u, v);
            }
        }
        len <<= 1;
    }
}

fn residue(x: &BigInt, p: u64) -> u64 {
    let (sign, digits) = x.to_u64_digits();
    let mut r: u128 = 0;
    for &d in digits.iter().rev() {
        r = ((r << 64) | d as u128) % p as u128;
    }
    let r = r as u64;
    if sign == Sign::Minus && r != 0 {
        p - r
    } else {
        r
    }
}

fn max_bits(xs: &[BigInt]) -> u64 {
    xs.iter().map(|x| x.bits()).max().unwrap_or(0)
}

/// Truncated product `(a·b) mod q^{len}` over several transform primes.
pub(crate) fn mul_truncated(a: &[BigInt], b: &[BigInt], len: usize) -> Result<Vec<BigInt>> {
    if a.is_empty() || b.is_empty() || len == 0 {
        return Ok(vec![BigInt::zero(); len]);
    }
    let a = &a[..a.len().min(len)];
    let b = &b[..b.len().min(len)];
    let terms = a.len().min(b.len()) as u64;
    let bound_bits = 64 - terms.leading_zeros() as u64 + max_bits(a) + max_bits(b) + 2;
    let needed = bound_bits.div_ceil(61) as usize;
    let primes = ntt_primes();
    if needed > primes.len() {
        return Err(Error::CrtCapacity {
            needed,
            available: primes.len(),
        });
    }
    let full = a.len() + b.len() - 1;
    let size = full.next_power_of_two();
    if size.trailing_zeros() > MAX_LOG {
        return Err(Error::param(
            "len",
            format!("transform length {size} exceeds 2^{MAX_LOG}"),
        ));
    }
    let primes = &primes[..needed];

    let residues: Vec<Vec<u64>> = primes
        .iter()
        .map(|prime| {
            let m = &prime.mont;
            let mut fa = vec![0u64; size];
            for (slot, x) in fa.iter_mut().zip(a) {
                *slot = m.to_mont(residue(x, m.p));
            }
            ntt(&mut fa, prime, false);
            let same = std::ptr::eq(a, b);
            if same {
                for v in fa.iter_mut() {
                    *v = m.mul(*v, *v);
                }
            } else {
                let mut fb = vec![0u64; size];
                for (slot, x) in fb.iter_mut().zip(b) {
                    *slot = m.to_mont(residue(x, m.p));
                }
                ntt(&mut fb, prime, false);
                for (u, v) in fa.iter_mut().zip(&fb) {
                    *u = m.mul(*u, *v);
                }
            }
            ntt(&mut fa, prime, true);
            let inv_n = m.pow(m.to_mont(size as u64), m.p - 2);
            fa.truncate(len.min(full));
            fa.iter().map(|&v| m.from_mont(m.mul(v, inv_n))).collect()
        })
        .collect();

    let mut out = crt_combine(primes, &residues);
    out.resize(len, BigInt::zero());
    Ok(out)
}

/// Garner mixed-radix reconstruction into the symmetric range.
fn crt_combine(primes: &[NttPrime], residues: &[Vec<u64>]) -> Vec<BigInt> {
    let k = primes.len();
    let ps: Vec<u64> = primes.iter().map(|q| q.mont.p).collect();
    // inv[i][j] = p_j^{-1} mod p_i for j < i
    let inv: Vec<Vec<u64>> = (0..k)
        .map(|i| {
            (0..i)
                .map(|j| pow_mod(ps[j] % ps[i], ps[i] - 2, ps[i]))
                .collect()
        })
        .collect();
    let modulus: BigUint = ps.iter().map(|&p| BigUint::from(p)).product();
    let half = &modulus >> 1u32;
    let n = residues[0].len();
    let mut out = Vec::with_capacity(n);
    let mut digits = vec![0u64; k];
    for idx in 0..n {
        for i in 0..k {
            let p = ps[i];
            let mut x = residues[i][idx];
            for j in 0..i {
                let diff = (x + p - digits[j] % p) % p;
                x = mul_mod(diff, inv[i][j], p);
            }
            digits[i] = x;
        }
        let mut acc = BigUint::from(digits[k - 1]);
        for i in (0..k - 1).rev() {
            acc = acc * ps[i] + digits[i];
        }
        out.push(if acc > half {
            -BigInt::from(&modulus - acc)
        } else {
            BigInt::from(acc)
        });
    }
    out
}

/// Schoolbook truncated product; the reference route.
pub(crate) fn mul_schoolbook(a: &[BigInt], b: &[BigInt], len: usize) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); len];
    for (i, x) in a.iter().enumerate().take(len) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}
