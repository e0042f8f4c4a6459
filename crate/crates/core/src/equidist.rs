//! Symmetric-square and symmetric-fourth-power values, `M_k(f)`, the EMS
//! inequality chain, and the weighted shifted sums entering the mass
//! equidistribution bound.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{isqrt, shared_primes};
use crate::error::{Error, Result};
use crate::numeric::{fmt_g, CompensatedSum};
use crate::qexpansion::{lambda_prime_power, EigenForm};
use crate::specfun::{a_ell_y, c_y, w_support_window, BumpFunction, MellinWeight};

const PRIME_CHUNK: usize = 4096;

/// Slack on `|λ(p)| ≤ 2` absorbing the rounding of the normalized eigenvalue.
const UNITARY_SLACK: f64 = 1e-12;

/// `(1 − α²/p)(1 − 1/p)(1 − ᾱ²/p)` with `α + ᾱ = λ`, `|α| = 1`.
pub fn sym2_local_inverse(lambda: f64, p: f64) -> f64 {
    (1.0 - (lambda * lambda - 2.0) / p + 1.0 / (p * p)) * (1.0 - 1.0 / p)
}

/// `∏_{j=0}^{4} (1 − α^{4−2j}/p)`.
pub fn sym4_local_inverse(lambda: f64, p: f64) -> f64 {
    let cos2 = lambda * lambda / 2.0 - 1.0;
    let cos4 = 2.0 * cos2 * cos2 - 1.0;
    let pair = |c: f64| 1.0 - 2.0 * c / p + 1.0 / (p * p);
    (1.0 - 1.0 / p) * pair(cos2) * pair(cos4)
}

/// `λ(p)` for every prime `p ≤ cutoff`, rejecting non-unitary Satake pairs.
pub fn lambdas_at_primes(f: &EigenForm, cutoff: u64) -> Result<Vec<(u64, f64)>> {
    if cutoff > f.cutoff() as u64 {
        return Err(Error::OutOfRange {
            index: cutoff,
            cutoff: f.cutoff() as u64,
        });
    }
    let table = shared_primes(cutoff.max(2));
    table
        .up_to(cutoff as f64)
        .iter()
        .map(|&p| {
            let lambda = f.lambda(p as usize)?;
            if lambda.abs() > 2.0 + UNITARY_SLACK {
                return Err(Error::NonUnitary { p, lambda });
            }
            Ok((p, lambda))
        })
        .collect()
}

/// `−Σ log(local(λ(p), p))`, summed in fixed chunks and merged in order.
fn euler_log(pairs: &[(u64, f64)], local: fn(f64, f64) -> f64) -> f64 {
    let parts: Vec<CompensatedSum> = pairs
        .par_chunks(PRIME_CHUNK)
        .map(|chunk| chunk.iter().map(|&(p, l)| -local(l, p as f64).ln()).sum())
        .collect();
    let mut acc = CompensatedSum::new();
    for part in &parts {
        acc.merge(part);
    }
    acc.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymSquareValue {
    pub weight: u32,
    pub cutoff: u64,
    pub value: f64,
    /// Product over `p ≤ cutoff/2`.
    pub half_value: f64,
    /// `value − half_value`.
    pub gap: f64,
    pub relative_gap: f64,
}

fn truncated_product(
    weight: u32,
    pairs: &[(u64, f64)],
    cutoff: u64,
    local: fn(f64, f64) -> f64,
) -> SymSquareValue {
    let half = pairs.partition_point(|&(p, _)| p <= cutoff / 2);
    let value = euler_log(pairs, local).exp();
    let half_value = euler_log(&pairs[..half], local).exp();
    SymSquareValue {
        weight,
        cutoff,
        value,
        half_value,
        gap: value - half_value,
        relative_gap: (value - half_value).abs() / value,
    }
}

/// `L(1, sym² f)` truncated at primes `p ≤ cutoff`.
pub fn l1_sym2(f: &EigenForm, cutoff: u64) -> Result<SymSquareValue> {
    let pairs = lambdas_at_primes(f, cutoff)?;
    Ok(truncated_product(
        f.weight(),
        &pairs,
        cutoff,
        sym2_local_inverse,
    ))
}

/// `L(1, sym⁴ f)` truncated at primes `p ≤ cutoff`.
pub fn l1_sym4(f: &EigenForm, cutoff: u64) -> Result<SymSquareValue> {
    let pairs = lambdas_at_primes(f, cutoff)?;
    Ok(truncated_product(
        f.weight(),
        &pairs,
        cutoff,
        sym4_local_inverse,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MkValue {
    /// Stands in for `k` in the prime range and in `log k`.
    pub k_proxy: u64,
    pub l_sym2: f64,
    /// `∏_{p ≤ k} (1 + 2|λ(p)|/p)`.
    pub prime_product: f64,
    pub value: f64,
}

/// `M = ∏_{p≤k}(1 + 2|λ(p)|/p) / ((log k)² L)` from explicit pieces.
pub fn mk_from_parts(k_proxy: u64, l_sym2: f64, pairs: &[(u64, f64)]) -> Result<MkValue> {
    if k_proxy < 2 {
        return Err(Error::param("k_proxy", "need k >= 2"));
    }
    if !(l_sym2 > 0.0) {
        return Err(Error::param("l_sym2", "must be positive"));
    }
    let log_product: CompensatedSum = pairs
        .iter()
        .filter(|&&(p, _)| p <= k_proxy)
        .map(|&(p, l)| (2.0 * l.abs() / p as f64).ln_1p())
        .sum();
    let log_k = (k_proxy as f64).ln();
    let ln_value = log_product.value() - 2.0 * log_k.ln() - l_sym2.ln();
    Ok(MkValue {
        k_proxy,
        l_sym2,
        prime_product: log_product.value().exp(),
        value: ln_value.exp(),
    })
}

/// `M_k(f)` with the product over `p ≤ k_proxy` and `L(1, sym² f)` at `sym2_cutoff`.
pub fn mk(f: &EigenForm, k_proxy: u64, sym2_cutoff: u64) -> Result<MkValue> {
    let l = l1_sym2(f, sym2_cutoff)?;
    let pairs = lambdas_at_primes(f, k_proxy)?;
    mk_from_parts(k_proxy, l.value, &pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmsPrime {
    pub lambda: f64,
    /// `2|λ| − 2`
    pub lhs: f64,
    /// `(λ² − 1) − (λ² − 1)²/9`
    pub rhs: f64,
    pub holds: bool,
}

pub fn ems_prime_check(lambda: f64) -> Result<EmsPrime> {
    if !(lambda.abs() <= 2.0) {
        return Err(Error::param(
            "lambda",
            format!("need |lambda| <= 2, got {lambda}"),
        ));
    }
    let lhs = 2.0 * lambda.abs() - 2.0;
    let sq = lambda * lambda - 1.0;
    let rhs = sq - sq * sq / 9.0;
    Ok(EmsPrime {
        lambda,
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// [`ems_prime_check`] in exact rational arithmetic at `λ = num/den`.
pub fn ems_prime_check_exact(num: i64, den: i64) -> Result<(Ratio<i128>, Ratio<i128>, bool)> {
    if den <= 0 || num.unsigned_abs() > 2 * den as u64 {
        return Err(Error::param("lambda", "need den > 0 and |num/den| <= 2"));
    }
    let u = Ratio::new(num.unsigned_abs() as i128, den as i128);
    let one = Ratio::from_integer(1);
    let lhs = u * 2 - one * 2;
    let sq = u * u - one;
    let rhs = sq - sq * sq / 9;
    Ok((lhs, rhs, lhs <= rhs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmsSum {
    pub cutoff: u64,
    pub primes: u64,
    /// `Σ (2|λ(p)| − 2)/p`
    pub lhs: f64,
    /// `Σ λ(p²)/p − (1/9) Σ λ(p²)²/p`
    pub rhs: f64,
    pub holds: bool,
    /// Largest `|λ(p^j)_table − λ(p^j)_recursion|` over `j ∈ {2, 4}`, `p^j ≤` table cutoff.
    pub max_table_gap: f64,
    /// Primes at which `a(p²) = a(p)² − p^{k−1}` was checked exactly.
    pub exact_checks: u64,
    pub exact_failures: Vec<u64>,
}

pub fn ems_sum_check(f: &EigenForm, cutoff: u64) -> Result<EmsSum> {
    let pairs = lambdas_at_primes(f, cutoff)?;
    let mut lhs = CompensatedSum::new();
    let mut rhs = CompensatedSum::new();
    let table = f.cutoff() as u64;
    let mut max_table_gap: f64 = 0.0;
    for &(p, l) in &pairs {
        let pf = p as f64;
        let l2 = lambda_prime_power(l, 2);
        let l4 = lambda_prime_power(l, 4);
        lhs.add((2.0 * l.abs() - 2.0) / pf);
        rhs.add(l2 / pf);
        rhs.add(-(1.0 + l2 + l4) / (9.0 * pf));
        for (j, rec) in [(2u32, l2), (4, l4)] {
            if let Some(pj) = p.checked_pow(j).filter(|&q| q <= table) {
                max_table_gap = max_table_gap.max((f.lambda(pj as usize)? - rec).abs());
            }
        }
    }
    let limit = isqrt(table).min(cutoff);
    let k1 = f.weight() - 1;
    let mut exact_checks = 0;
    let mut exact_failures = Vec::new();
    for &(p, _) in pairs.iter().take_while(|&&(p, _)| p <= limit) {
        let ap = f.coeff(p as usize)?;
        let expected = ap * ap - BigInt::from(p).pow(k1);
        exact_checks += 1;
        if f.coeff((p * p) as usize)? != &expected {
            exact_failures.push(p);
        }
    }
    let (lhs, rhs) = (lhs.value(), rhs.value());
    Ok(EmsSum {
        cutoff,
        primes: pairs.len() as u64,
        lhs,
        rhs,
        holds: lhs <= rhs,
        max_table_gap,
        exact_checks,
        exact_failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftWindowSum {
    /// Range of `n` enumerated; every `n` outside it has `g = 0`.
    pub n_lo: u64,
    pub n_hi: u64,
    pub value: f64,
}

/// `Σ_n |λ(n)λ(n+ℓ)| g(Y(k−1)/(4π(n+ℓ/2)))` over the support window of `g`.
pub fn weighted_shift_sum(
    f: &EigenForm,
    ell: i64,
    y_cap: f64,
    k: u32,
    g: &BumpFunction,
) -> Result<ShiftWindowSum> {
    if ell == 0 {
        return Err(Error::param("ell", "must be nonzero"));
    }
    if !(y_cap >= 1.0) {
        return Err(Error::param("Y", "need Y >= 1"));
    }
    let (lo, hi) = w_support_window(ell, y_cap, k, g);
    let n_lo = lo.saturating_sub(1).max(1).max((1 - ell).max(1) as u64);
    let n_hi = hi + 1;
    if n_hi < n_lo {
        return Ok(ShiftWindowSum {
            n_lo,
            n_hi: n_lo - 1,
            value: 0.0,
        });
    }
    let top = (n_hi as i64 + ell.max(0)) as u64;
    if top > f.cutoff() as u64 {
        return Err(Error::OutOfRange {
            index: top,
            cutoff: f.cutoff() as u64,
        });
    }
    let lam = f.lambdas();
    let scale = y_cap * (k as f64 - 1.0) / (4.0 * PI);
    let value: CompensatedSum = (n_lo..=n_hi)
        .map(|n| {
            let m = (n as i64 + ell) as usize;
            let weight = g.value(scale / (n as f64 + ell as f64 / 2.0));
            (lam[n as usize] * lam[m]).abs() * weight
        })
        .sum();
    Ok(ShiftWindowSum {
        n_lo,
        n_hi,
        value: value.value(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem1Bound {
    pub ell: i64,
    pub y_cap: f64,
    pub k: u32,
    pub epsilon: f64,
    /// `|a_ℓ(1/Y)|`
    pub a_ell: f64,
    pub l_sym2: f64,
    pub shift_sum: f64,
    /// `shift_sum / (Yk)`
    pub shift_term: f64,
    /// `(Yk)^ε / k`
    pub tail_term: f64,
    /// `|a_ℓ| / L · (shift_term + tail_term)`, implied constant 1
    pub rhs: f64,
    pub c_y: f64,
    /// `c_Y · rhs`
    pub s_ell_bound: f64,
}

/// Assembles the bound from an explicit coefficient `a_ℓ(1/Y)` and normalizer `c_Y`.
#[allow(clippy::too_many_arguments)]
pub fn theorem1_bound_from_parts(
    f: &EigenForm,
    ell: i64,
    y_cap: f64,
    k: u32,
    epsilon: f64,
    a_ell: f64,
    c_y_value: f64,
    sym2_cutoff: u64,
    g: &BumpFunction,
) -> Result<Theorem1Bound> {
    let l = l1_sym2(f, sym2_cutoff)?.value;
    let shift_sum = weighted_shift_sum(f, ell, y_cap, k, g)?.value;
    let yk = y_cap * k as f64;
    let shift_term = shift_sum / yk;
    let tail_term = yk.powf(epsilon) / k as f64;
    let rhs = a_ell.abs() / l * (shift_term + tail_term);
    Ok(Theorem1Bound {
        ell,
        y_cap,
        k,
        epsilon,
        a_ell: a_ell.abs(),
        l_sym2: l,
        shift_sum,
        shift_term,
        tail_term,
        rhs,
        c_y: c_y_value,
        s_ell_bound: c_y_value * rhs,
    })
}

/// The bound with `a_ℓ(1/Y)` and `c_Y` computed from the incomplete Eisenstein weight `ψ`.
#[allow(clippy::too_many_arguments)]
pub fn theorem1_bound_assembly(
    f: &EigenForm,
    ell: i64,
    y_cap: f64,
    k: u32,
    epsilon: f64,
    psi: &dyn MellinWeight,
    sym2_cutoff: u64,
    g: &BumpFunction,
) -> Result<Theorem1Bound> {
    let a = a_ell_y(psi, ell, 1.0 / y_cap)?;
    theorem1_bound_from_parts(
        f,
        ell,
        y_cap,
        k,
        epsilon,
        a.value,
        c_y(psi, y_cap),
        sym2_cutoff,
        g,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corollary3Report {
    pub weight: u32,
    pub cutoff: u64,
    pub l_sym2: f64,
    pub gap: f64,
    pub m_k: f64,
    pub sqrt_m_k: f64,
    /// `max(1, 1/M_k)`
    pub y_star: f64,
    pub ems_lhs: f64,
    pub ems_rhs: f64,
    pub k_proxy: u64,
    pub l_sym4: f64,
    /// `((log k) L(1, sym²) L(1, sym⁴))^{−1/9}`
    pub conjectural_mk: f64,
    /// Always `"unavailable"`: the central-value factor is not computed.
    pub r_k: &'static str,
}

impl Corollary3Report {
    pub const CSV_HEADER: &'static str =
        "weight,cutoff,L_sym2,gap,M_k,sqrt(M_k),Y*,ems_lhs,ems_rhs,k_proxy,L_sym4,conj_M_k,R_k";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.weight,
            self.cutoff,
            fmt_g(self.l_sym2),
            fmt_g(self.gap),
            fmt_g(self.m_k),
            fmt_g(self.sqrt_m_k),
            fmt_g(self.y_star),
            fmt_g(self.ems_lhs),
            fmt_g(self.ems_rhs),
            self.k_proxy,
            fmt_g(self.l_sym4),
            fmt_g(self.conjectural_mk),
            self.r_k
        )
    }
}

/// `Y* = max(1, 1/M_k)`.
pub fn optimal_height(m_k: f64) -> f64 {
    if m_k >= 1.0 {
        1.0
    } else {
        1.0 / m_k
    }
}

/// `L(1, sym²)`, `L(1, sym⁴)` at `cutoff`; `M_k` and the EMS sums over `p ≤ k_proxy`.
pub fn corollary3_report(f: &EigenForm, cutoff: u64, k_proxy: u64) -> Result<Corollary3Report> {
    let l2 = l1_sym2(f, cutoff)?;
    let l4 = l1_sym4(f, cutoff)?;
    let m = mk_from_parts(k_proxy, l2.value, &lambdas_at_primes(f, k_proxy)?)?;
    let ems = ems_sum_check(f, k_proxy)?;
    let log_k = (k_proxy as f64).ln();
    Ok(Corollary3Report {
        weight: f.weight(),
        cutoff,
        l_sym2: l2.value,
        gap: l2.gap,
        m_k: m.value,
        sqrt_m_k: m.value.sqrt(),
        y_star: optimal_height(m.value),
        ems_lhs: ems.lhs,
        ems_rhs: ems.rhs,
        k_proxy,
        l_sym4: l4.value,
        conjectural_mk: (log_k * l2.value * l4.value).powf(-1.0 / 9.0),
        r_k: "unavailable",
    })
}
