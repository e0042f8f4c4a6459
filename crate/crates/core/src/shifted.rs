//! Shifted convolution sums `S_ℓ(x) = Σ_{n≤x} |λ₁(n)λ₂(n+ℓ)|`, their split by
//! the size of the smooth parts of `n` and `n+ℓ`, the prime product `M(x)`,
//! and an explicit large-sieve bound for the part with small smooth parts.

use std::collections::HashMap;
use std::sync::Arc;

use num_integer::Integer;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{gcd, make_params, shared_primes, smooth_part_sieve, tau, SievingParameters};
use crate::error::{Error, Result};
use crate::largesieve::{big_h, OmegaSystem};
use crate::numeric::CompensatedSum;
use crate::qexpansion::EigenForm;

const CHUNK: usize = 1 << 15;

/// Source of `|λ(n)|` for a multiplicative function.
pub trait MultiplicativeFn: Sync {
    fn name(&self) -> String;

    /// `|λ(n)|` for `0 <= n <= upto`; entry 0 is ignored.
    fn abs_table(&self, upto: u64) -> Result<Vec<f64>>;
}

/// `|λ_f(n)|` from a computed eigenform.
#[derive(Debug, Clone)]
pub struct EigenTable {
    weight: u32,
    abs: Arc<Vec<f64>>,
}

impl EigenTable {
    pub fn new(f: &EigenForm) -> Self {
        EigenTable {
            weight: f.weight(),
            abs: Arc::new(f.lambdas().iter().map(|x| x.abs()).collect()),
        }
    }

    pub fn cutoff(&self) -> u64 {
        self.abs.len() as u64 - 1
    }
}

impl MultiplicativeFn for EigenTable {
    fn name(&self) -> String {
        format!("|lambda_f|, weight {}", self.weight)
    }

    fn abs_table(&self, upto: u64) -> Result<Vec<f64>> {
        if upto > self.cutoff() {
            return Err(Error::OutOfRange {
                index: upto,
                cutoff: self.cutoff(),
            });
        }
        Ok(self.abs[..=upto as usize].to_vec())
    }
}

/// The `m`-fold divisor function.
#[derive(Debug, Clone, Copy)]
pub struct TauM(pub u32);

impl MultiplicativeFn for TauM {
    fn name(&self) -> String {
        format!("tau_{}", self.0)
    }

    fn abs_table(&self, upto: u64) -> Result<Vec<f64>> {
        if self.0 == 0 {
            return Err(Error::param("m", "need m >= 1"));
        }
        Ok(tau_m_table(upto, self.0)
            .into_iter()
            .map(|t| t as f64)
            .collect())
    }
}

/// `τ_m(n)` for `n <= upto` from a smallest-prime-factor sieve.
pub fn tau_m_table(upto: u64, m: u32) -> Vec<u64> {
    let n = upto as usize;
    let mut spf = vec![0u32; n + 1];
    for p in 2..=n {
        if spf[p] == 0 {
            for q in (p..=n).step_by(p) {
                if spf[q] == 0 {
                    spf[q] = p as u32;
                }
            }
        }
    }
    let mut out = vec![0u64; n + 1];
    if n >= 1 {
        out[1] = 1;
    }
    for i in 2..=n {
        let p = spf[i] as usize;
        let mut rest = i / p;
        let mut e = 1;
        while rest.is_multiple_of(p) {
            rest /= p;
            e += 1;
        }
        out[i] = out[rest] * crate::arith::binomial(e as u64 + m as u64 - 1, m as u64 - 1) as u64;
    }
    out
}

/// The constant function 1.
#[derive(Debug, Clone, Copy)]
pub struct One;

impl MultiplicativeFn for One {
    fn name(&self) -> String {
        "one".into()
    }

    fn abs_table(&self, upto: u64) -> Result<Vec<f64>> {
        Ok(vec![1.0; upto as usize + 1])
    }
}

/// An explicit table of values, taken in absolute value.
#[derive(Debug, Clone)]
pub struct ValueTable {
    pub label: String,
    pub values: Vec<f64>,
}

impl MultiplicativeFn for ValueTable {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn abs_table(&self, upto: u64) -> Result<Vec<f64>> {
        let cutoff = self.values.len() as u64 - 1;
        if upto > cutoff {
            return Err(Error::OutOfRange {
                index: upto,
                cutoff,
            });
        }
        Ok(self.values[..=upto as usize]
            .iter()
            .map(|x| x.abs())
            .collect())
    }
}

fn floor_x(x: f64) -> u64 {
    if x >= 1.0 {
        x.floor() as u64
    } else {
        0
    }
}

/// Index range `n` for the sum: `1 <= n <= x` and `n + ℓ >= 1`.
fn n_range(x: f64, ell: i64) -> (u64, u64) {
    let lo = if ell < 0 { 1 + ell.unsigned_abs() } else { 1 };
    (lo, floor_x(x))
}

/// Largest `n + ℓ` needed.
fn table_len(x: f64, ell: i64) -> u64 {
    (floor_x(x) as i64 + ell).max(floor_x(x) as i64).max(1) as u64
}

/// Deterministic chunked parallel sum of `term(n)` for `lo <= n <= hi`.
fn chunked_sum<F>(lo: u64, hi: u64, term: F) -> f64
where
    F: Fn(u64) -> f64 + Sync,
{
    if hi < lo {
        return 0.0;
    }
    let len = (hi - lo + 1) as usize;
    let parts: Vec<CompensatedSum> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let start = lo + (c * CHUNK) as u64;
            let end = (start + CHUNK as u64 - 1).min(hi);
            (start..=end).map(&term).sum()
        })
        .collect();
    let mut acc = CompensatedSum::new();
    for p in &parts {
        acc.merge(p);
    }
    acc.value()
}

/// `Σ_{n≤x} |λ₁(n)λ₂(n+ℓ)|`, skipping `n` with `n + ℓ < 1`.
pub fn s_ell_brute(
    f1: &dyn MultiplicativeFn,
    f2: &dyn MultiplicativeFn,
    x: f64,
    ell: i64,
) -> Result<f64> {
    check_shift(ell)?;
    let len = table_len(x, ell);
    let t1 = f1.abs_table(floor_x(x).max(1))?;
    let t2 = f2.abs_table(len)?;
    Ok(s_ell_tables(&t1, &t2, x, ell))
}

fn check_shift(ell: i64) -> Result<()> {
    if ell == 0 {
        return Err(Error::param("ell", "shift must be nonzero"));
    }
    Ok(())
}

fn s_ell_tables(t1: &[f64], t2: &[f64], x: f64, ell: i64) -> f64 {
    let (lo, hi) = n_range(x, ell);
    chunked_sum(lo, hi, |n| t1[n as usize] * t2[(n as i64 + ell) as usize])
}

/// The sum split by whether the smooth part of `n` or of `n + ℓ` exceeds `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionSums {
    pub s_total: f64,
    /// Terms with `a > y` plus terms with `a_ℓ > y` (overlap counted twice).
    pub s_big: f64,
    /// Terms with `a <= y` and `a_ℓ <= y`.
    pub s_small: f64,
    /// Terms with both `a > y` and `a_ℓ > y`.
    pub overlap: f64,
    /// `|s_small + s_big − overlap − s_total| / s_total` (0 for an empty sum).
    pub identity_residual: f64,
}

pub fn partition_sums(
    f1: &dyn MultiplicativeFn,
    f2: &dyn MultiplicativeFn,
    params: &SievingParameters,
    ell: i64,
) -> Result<PartitionSums> {
    check_shift(ell)?;
    let x = params.x;
    let len = table_len(x, ell);
    let t1 = f1.abs_table(floor_x(x).max(1))?;
    let t2 = f2.abs_table(len)?;
    Ok(partition_tables(
        &t1,
        &t2,
        params,
        ell,
        &smooth_part_sieve(len, params.z),
    ))
}

fn partition_tables(
    t1: &[f64],
    t2: &[f64],
    params: &SievingParameters,
    ell: i64,
    smooth: &[u64],
) -> PartitionSums {
    let (lo, hi) = n_range(params.x, ell);
    let y = params.y;
    let class = |n: u64| {
        let m = (n as i64 + ell) as usize;
        let big_a = smooth[n as usize] as f64 > y;
        let big_al = smooth[m] as f64 > y;
        (t1[n as usize] * t2[m], big_a, big_al)
    };
    let s_total = chunked_sum(lo, hi, |n| class(n).0);
    let s_big = chunked_sum(lo, hi, |n| {
        let (t, a, al) = class(n);
        t * (a as u8 + al as u8) as f64
    });
    let s_small = chunked_sum(lo, hi, |n| {
        let (t, a, al) = class(n);
        if !a && !al {
            t
        } else {
            0.0
        }
    });
    let overlap = chunked_sum(lo, hi, |n| {
        let (t, a, al) = class(n);
        if a && al {
            t
        } else {
            0.0
        }
    });
    let residual = if s_total > 0.0 {
        (s_small + s_big - overlap - s_total).abs() / s_total
    } else {
        (s_small + s_big - overlap).abs()
    };
    PartitionSums {
        s_total,
        s_big,
        s_small,
        overlap,
        identity_residual: residual,
    }
}

/// `(log x)^{−2} ∏_{p≤z} (1 + |λ₁(p)|/p)(1 + |λ₂(p)|/p)` with `z` capped at `x`.
pub fn m_of_x(
    f1: &dyn MultiplicativeFn,
    f2: &dyn MultiplicativeFn,
    params: &SievingParameters,
) -> Result<f64> {
    let zeff = params.z_effective();
    let top = floor_x(zeff).max(2);
    let t1 = f1.abs_table(top)?;
    let t2 = f2.abs_table(top)?;
    Ok(m_of_x_tables(&t1, &t2, params))
}

fn m_of_x_tables(t1: &[f64], t2: &[f64], params: &SievingParameters) -> f64 {
    let zeff = params.z_effective();
    let primes = shared_primes(floor_x(zeff).max(2));
    let log_prod: CompensatedSum = primes
        .up_to(zeff)
        .iter()
        .map(|&p| {
            let pf = p as f64;
            (t1[p as usize] / pf).ln_1p() + (t2[p as usize] / pf).ln_1p()
        })
        .sum();
    let lx = params.x.ln();
    (log_prod.value() - 2.0 * lx.ln()).exp()
}

/// Everything computed for one `(λ₁, λ₂, x, ε, ℓ)`.
#[derive(Debug, Clone, Serialize)]
pub struct ShiftedSumReport {
    pub x: f64,
    pub ell: i64,
    pub epsilon: f64,
    pub s_total: f64,
    pub s_big: f64,
    pub s_small: f64,
    pub overlap: f64,
    pub identity_residual: f64,
    pub m_of_x: f64,
    /// `x (log x)^ε M(x) τ(|ℓ|)`
    pub rhs: f64,
    pub ratio: f64,
    pub params: SievingParameters,
}

impl ShiftedSumReport {
    pub const CSV_HEADER: &'static str = "x,ell,epsilon,s_total,s_big,s_small,m_of_x,rhs,ratio";

    pub fn csv_row(&self) -> String {
        use crate::numeric::fmt_g;
        format!(
            "{},{},{},{},{},{},{},{},{}",
            fmt_g(self.x),
            self.ell,
            fmt_g(self.epsilon),
            fmt_g(self.s_total),
            fmt_g(self.s_big),
            fmt_g(self.s_small),
            fmt_g(self.m_of_x),
            fmt_g(self.rhs),
            fmt_g(self.ratio)
        )
    }
}

pub fn theorem2_report(
    f1: &dyn MultiplicativeFn,
    f2: &dyn MultiplicativeFn,
    x: f64,
    epsilon: f64,
    ell: i64,
) -> Result<ShiftedSumReport> {
    check_shift(ell)?;
    let params = make_params(x, epsilon)?;
    let len = table_len(x, ell);
    let t1 = f1.abs_table(floor_x(x))?;
    let t2 = f2.abs_table(len)?;
    let parts = partition_tables(&t1, &t2, &params, ell, &smooth_part_sieve(len, params.z));
    let m = m_of_x_tables(&t1, &t2, &params);
    let rhs = x * x.ln().powf(epsilon) * m * tau(ell.unsigned_abs()) as f64;
    Ok(ShiftedSumReport {
        x,
        ell,
        epsilon,
        s_total: parts.s_total,
        s_big: parts.s_big,
        s_small: parts.s_small,
        overlap: parts.overlap,
        identity_residual: parts.identity_residual,
        m_of_x: m,
        rhs,
        ratio: parts.s_total / rhs,
        params,
    })
}

/// The explicit sieve-side bound and how it was assembled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SieveSideBound {
    pub total: f64,
    /// The `(v, w)` with `v | ℓ`, `v > 0`, `w = ℓ/v` entering the outer sum.
    pub shift_pairs: Vec<(u64, i64)>,
    /// Number of `(v, a, a_ℓ)` triples with a nonempty range.
    pub terms: u64,
}

/// Upper bound for the part of the sum with both smooth parts `≤ y`.
///
/// Each `n` in that part has smooth parts `v·a` and `v·a_ℓ` with
/// `v = gcd` of the two smooth parts, `v | ℓ`, `gcd(a, a_ℓ) = gcd(a·a_ℓ, ℓ/v) = 1`.
/// For fixed `(v, a, a_ℓ)` the admissible `n/v` lie in one residue class
/// modulo `a·a_ℓ`, so their count is at most `(N + Q²)/H` for the sieve
/// problem of that triple, `N` being the exact length of the class range.
/// The rough cofactors `b`, `b_ℓ` contribute at most the largest
/// `|λ_i|` over rough integers below their size limit.
pub fn sieve_side_bound(
    f1: &dyn MultiplicativeFn,
    f2: &dyn MultiplicativeFn,
    params: &SievingParameters,
    ell: i64,
) -> Result<SieveSideBound> {
    check_shift(ell)?;
    let x_int = floor_x(params.x);
    let len = table_len(params.x, ell);
    let t1 = f1.abs_table(x_int.max(1))?;
    let t2 = f2.abs_table(len)?;
    let smooth = smooth_part_sieve(len, params.z);
    let rough_max = |t: &[f64]| {
        let mut out = vec![0.0f64; t.len()];
        for b in 1..t.len() {
            let here = if smooth[b] == 1 { t[b] } else { 0.0 };
            out[b] = out[b - 1].max(here);
        }
        out
    };
    let r1 = rough_max(&t1);
    let r2 = rough_max(&t2);

    let q = params.q;
    let z = params.z;
    let sieve_primes: Vec<u64> = shared_primes(q.max(3.0) as u64)
        .up_to(q.min(z))
        .iter()
        .copied()
        .filter(|&p| p > 2)
        .collect();
    if sieve_primes.len() > 63 {
        return Err(Error::Precondition(
            "too many sieving primes below Q for the H cache".into(),
        ));
    }
    let mut h_cache: HashMap<u64, f64> = HashMap::new();
    let mut h_for = |m: u64| -> Result<f64> {
        let mut mask = 0u64;
        for (i, &p) in sieve_primes.iter().enumerate() {
            if m.is_multiple_of(p) {
                mask |= 1 << i;
            }
        }
        if let Some(&h) = h_cache.get(&mask) {
            return Ok(h);
        }
        let sys = OmegaSystem {
            n_len: 0,
            primes: sieve_primes.clone(),
            omega: sieve_primes
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    (
                        p,
                        if mask >> i & 1 == 1 {
                            vec![0]
                        } else {
                            vec![0, 1]
                        },
                    )
                })
                .collect(),
            context: None,
        };
        let h = big_h(q, &sys)?.to_f64().unwrap_or(f64::NAN);
        h_cache.insert(mask, h);
        Ok(h)
    };

    let y = params.y;
    let y_int = if y >= 1.0 { y.floor() as u64 } else { 0 };
    let smooth_upto: Vec<u64> = (1..=y_int.min(len))
        .filter(|&d| smooth[d as usize] == d)
        .collect();

    let abs_ell = ell.unsigned_abs();
    let mut shift_pairs = Vec::new();
    let mut acc = CompensatedSum::new();
    let mut terms = 0u64;
    for v in (1..=abs_ell).filter(|v| abs_ell.is_multiple_of(*v)) {
        let w = ell / v as i64;
        shift_pairs.push((v, w));
        if smooth[(v as usize).min(smooth.len() - 1)] != v || v > x_int {
            continue;
        }
        // n_v ranges over [max(1, 1 − w), floor(x)/v]
        let nv_lo = 1i64.max(1 - w);
        let nv_hi = (x_int / v) as i64;
        if nv_hi < nv_lo {
            continue;
        }
        let cap = y / v as f64;
        for &a in smooth_upto.iter().take_while(|&&a| a as f64 <= cap) {
            if gcd(a, w.unsigned_abs()) != 1 {
                continue;
            }
            let va = (v * a) as usize;
            if va > x_int as usize {
                break;
            }
            let lam1 = t1[va];
            let b_max = (x_int / (v * a)) as usize;
            let rough1 = r1[b_max];
            if lam1 == 0.0 || rough1 == 0.0 {
                continue;
            }
            for &al in smooth_upto.iter().take_while(|&&al| al as f64 <= cap) {
                if gcd(a, al) != 1 || gcd(al, w.unsigned_abs()) != 1 {
                    continue;
                }
                let val = v * al;
                if val > len {
                    break;
                }
                let lam2 = t2[val as usize];
                let bl_max = (x_int as i64 + ell).max(0) as u64 / val;
                let rough2 = r2[bl_max as usize];
                if lam2 == 0.0 || rough2 == 0.0 {
                    continue;
                }
                let modulus = (a * al) as i64;
                let r = crate::largesieve::crt_residue(a, al, w)? as i64;
                let m_lo = Integer::div_ceil(&(nv_lo - r), &modulus);
                let m_hi = Integer::div_floor(&(nv_hi - r), &modulus);
                if m_hi < m_lo {
                    continue;
                }
                let n_eff = (m_hi - m_lo + 1) as f64;
                let h = h_for(a * al * w.unsigned_abs())?;
                acc.add(lam1 * lam2 * rough1 * rough2 * (n_eff + q * q) / h);
                terms += 1;
            }
        }
    }
    Ok(SieveSideBound {
        total: acc.value(),
        shift_pairs,
        terms,
    })
}
