//! Exact q-expansions of level-one modular forms and the normalized Hecke
//! eigenforms in the one-dimensional cusp spaces.

use std::io::Write;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::arith::{factorize, shared_primes};
use crate::error::{Error, Result};
use crate::ntt;
use crate::numeric::fmt_g;

/// Below this many coefficients the schoolbook product is faster than the transform.
const SCHOOLBOOK_CUTOFF: usize = 64;

/// Weights whose cusp space is one-dimensional.
pub const SUPPORTED_WEIGHTS: [u32; 6] = [12, 16, 18, 20, 22, 26];

/// Fourier coefficients `a(0..=cutoff)` of a level-one form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QExpansion {
    pub weight: u32,
    pub coeffs: Vec<BigInt>,
}

impl QExpansion {
    pub fn cutoff(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, n: usize) -> Result<&BigInt> {
        self.coeffs.get(n).ok_or(Error::OutOfRange {
            index: n as u64,
            cutoff: self.cutoff() as u64,
        })
    }

    /// Product truncated at the shorter of the two cutoffs.
    pub fn mul(&self, other: &QExpansion) -> Result<QExpansion> {
        let len = self.coeffs.len().min(other.coeffs.len());
        Ok(QExpansion {
            weight: self.weight + other.weight,
            coeffs: series_mul(&self.coeffs, &other.coeffs, len)?,
        })
    }
}

pub(crate) fn series_mul(a: &[BigInt], b: &[BigInt], len: usize) -> Result<Vec<BigInt>> {
    if len <= SCHOOLBOOK_CUTOFF {
        Ok(ntt::mul_schoolbook(a, b, len))
    } else {
        ntt::mul_truncated(a, b, len)
    }
}

/// `sigma_power[n] = Σ_{d|n} d^power` for `n <= cutoff`, by a divisor sieve.
fn divisor_power_sums(cutoff: usize, power: u32) -> Vec<u128> {
    let mut out = vec![0u128; cutoff + 1];
    for d in 1..=cutoff {
        let dp = (d as u128).pow(power);
        for m in (d..=cutoff).step_by(d) {
            out[m] += dp;
        }
    }
    out
}

fn validate_cutoff(cutoff: usize) -> Result<()> {
    if cutoff == 0 {
        return Err(Error::param("cutoff", "must be at least 1"));
    }
    Ok(())
}

/// Normalized Eisenstein series `E_k` for `k ∈ {4, 6, 8, 10, 14}`.
pub fn eisenstein_qexp(weight: u32, cutoff: usize) -> Result<QExpansion> {
    validate_cutoff(cutoff)?;
    match weight {
        4 => Ok(divisor_series(4, 240, 3, cutoff)),
        6 => Ok(divisor_series(6, -504, 5, cutoff)),
        8 => eisenstein_qexp(4, cutoff)?.mul(&eisenstein_qexp(4, cutoff)?),
        10 => eisenstein_qexp(4, cutoff)?.mul(&eisenstein_qexp(6, cutoff)?),
        14 => eisenstein_qexp(8, cutoff)?.mul(&eisenstein_qexp(6, cutoff)?),
        _ => Err(Error::UnsupportedWeight {
            weight,
            reason: "Eisenstein series are provided for weights 4, 6, 8, 10, 14",
        }),
    }
}

fn divisor_series(weight: u32, scale: i64, power: u32, cutoff: usize) -> QExpansion {
    let sigma = divisor_power_sums(cutoff, power);
    let mut coeffs = Vec::with_capacity(cutoff + 1);
    coeffs.push(BigInt::one());
    coeffs.extend(sigma[1..].iter().map(|&s| BigInt::from(s) * scale));
    QExpansion { weight, coeffs }
}

/// `q ∏ (1 − qⁿ)²⁴` by the power recurrence on Euler's pentagonal series,
/// checked against `(E4³ − E6²)/1728`.
pub fn delta_qexp(cutoff: usize) -> Result<QExpansion> {
    let eta = delta_eta_product(cutoff)?;
    let eis = delta_from_eisenstein(cutoff)?;
    if eta != eis {
        let n = (0..=cutoff)
            .find(|&n| eta.coeffs[n] != eis.coeffs[n])
            .unwrap_or(0);
        return Err(Error::Precondition(format!(
            "the two constructions of the discriminant disagree at n = {n}"
        )));
    }
    Ok(eta)
}

/// Eta-product route only.
pub fn delta_eta_product(cutoff: usize) -> Result<QExpansion> {
    validate_cutoff(cutoff)?;
    // ∏(1 − qⁿ) = Σ_j (−1)^j q^{j(3j−1)/2} over all integers j
    let len = cutoff; // Q has coefficients 0..cutoff-1, shifted by one
    let mut pent: Vec<(usize, i64)> = Vec::new();
    for j in 1i64.. {
        let e1 = (j * (3 * j - 1) / 2) as usize;
        if e1 >= len {
            break;
        }
        let sign = if j % 2 == 0 { 1 } else { -1 };
        pent.push((e1, sign));
        let e2 = (j * (3 * j + 1) / 2) as usize;
        if e2 < len {
            pent.push((e2, sign));
        }
    }
    pent.sort_unstable();
    let mut q = vec![BigInt::zero(); len];
    q[0] = BigInt::one();
    for n in 1..len {
        let mut acc = BigInt::zero();
        for &(k, sign) in &pent {
            if k > n {
                break;
            }
            let c = (25 * k as i64 - n as i64) * sign;
            if c != 0 {
                acc += &q[n - k] * c;
            }
        }
        let (quot, rem) = acc.div_rem(&BigInt::from(n));
        debug_assert!(rem.is_zero());
        q[n] = quot;
    }
    let mut coeffs = Vec::with_capacity(cutoff + 1);
    coeffs.push(BigInt::zero());
    coeffs.extend(q);
    Ok(QExpansion { weight: 12, coeffs })
}

/// Eisenstein route only: `(E4³ − E6²)/1728`.
pub fn delta_from_eisenstein(cutoff: usize) -> Result<QExpansion> {
    let e4 = eisenstein_qexp(4, cutoff)?;
    let e6 = eisenstein_qexp(6, cutoff)?;
    let e4sq = e4.mul(&e4)?;
    let e4cube = e4sq.mul(&e4)?;
    let e6sq = e6.mul(&e6)?;
    let d = BigInt::from(1728);
    let coeffs = e4cube
        .coeffs
        .iter()
        .zip(&e6sq.coeffs)
        .map(|(a, b)| {
            let (q, r) = (a - b).div_rem(&d);
            debug_assert!(r.is_zero());
            q
        })
        .collect();
    Ok(QExpansion { weight: 12, coeffs })
}

/// A normalized Hecke eigencuspform with its eigenvalue table.
#[derive(Debug, Clone)]
pub struct EigenForm {
    pub qexp: QExpansion,
    lambdas: Vec<f64>,
}

/// The normalized eigenform of the given weight up to `cutoff`.
pub fn eigenform(weight: u32, cutoff: usize) -> Result<EigenForm> {
    validate_cutoff(cutoff)?;
    let qexp = match weight {
        12 => delta_from_eisenstein(cutoff)?,
        16 | 18 | 20 | 22 | 26 => {
            let delta = delta_from_eisenstein(cutoff)?;
            delta.mul(&eisenstein_qexp(weight - 12, cutoff)?)?
        }
        24 => {
            return Err(Error::UnsupportedWeight {
                weight,
                reason: "the cusp space has dimension 2",
            })
        }
        _ => {
            return Err(Error::UnsupportedWeight {
                weight,
                reason: "supported weights are 12, 16, 18, 20, 22, 26",
            })
        }
    };
    EigenForm::from_qexp(qexp)
}

impl EigenForm {
    /// Wraps an expansion with `a(1) = 1`, computing normalized eigenvalues.
    pub fn from_qexp(qexp: QExpansion) -> Result<EigenForm> {
        if qexp.coeffs.len() < 2 || !qexp.coeffs[1].is_one() || !qexp.coeffs[0].is_zero() {
            return Err(Error::Precondition(
                "an eigenform needs a(0) = 0 and a(1) = 1".into(),
            ));
        }
        let half = (qexp.weight as f64 - 1.0) / 2.0;
        let mut lambdas = vec![0.0; qexp.coeffs.len()];
        for (n, (slot, a)) in lambdas.iter_mut().zip(&qexp.coeffs).enumerate().skip(1) {
            *slot = normalize(a, n as f64, half);
        }
        Ok(EigenForm { qexp, lambdas })
    }

    pub fn weight(&self) -> u32 {
        self.qexp.weight
    }

    pub fn cutoff(&self) -> usize {
        self.qexp.cutoff()
    }

    pub fn coeff(&self, n: usize) -> Result<&BigInt> {
        self.qexp.coeff(n)
    }

    /// `a(n) n^{−(k−1)/2}`.
    pub fn lambda(&self, n: usize) -> Result<f64> {
        if n == 0 || n > self.cutoff() {
            return Err(Error::OutOfRange {
                index: n as u64,
                cutoff: self.cutoff() as u64,
            });
        }
        Ok(self.lambdas[n])
    }

    /// Eigenvalues indexed by `n`; entry 0 is unused and set to 0.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// CSV rows `n,a_f(n),lambda(n)` for `1 <= n <= limit`.
    pub fn write_csv<W: Write>(&self, mut out: W, limit: usize) -> Result<()> {
        if limit > self.cutoff() {
            return Err(Error::OutOfRange {
                index: limit as u64,
                cutoff: self.cutoff() as u64,
            });
        }
        writeln!(out, "n,a_f(n),lambda(n)")?;
        for n in 1..=limit {
            writeln!(
                out,
                "{},{},{}",
                n,
                self.qexp.coeffs[n],
                fmt_g(self.lambdas[n])
            )?;
        }
        Ok(())
    }
}

/// `a / n^{half}` through the logarithm of `|a|`, taken from its leading 64 bits.
fn normalize(a: &BigInt, n: f64, half: f64) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    let bits = a.bits();
    let shift = bits.saturating_sub(64);
    let top = (a.abs() >> shift).to_u64().expect("fits in 64 bits");
    let ln_abs = (top as f64).ln() + shift as f64 * std::f64::consts::LN_2;
    let mag = (ln_abs - half * n.ln()).exp();
    if a.sign() == Sign::Minus {
        -mag
    } else {
        mag
    }
}

/// A single failed identity found by [`hecke_verify`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum HeckeViolation {
    Multiplicativity { m: u64, n: u64 },
    PrimePower { p: u64, j: u32 },
    Deligne { p: u64, lambda: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct HeckeReport {
    pub weight: u32,
    pub cutoff: usize,
    pub pairs_checked: u64,
    pub prime_powers_checked: u64,
    pub primes_checked: u64,
    /// Largest `|λ(p)|` seen; the Deligne margin is `2 − max_abs_lambda_p`.
    pub max_abs_lambda_p: f64,
    pub violations: Vec<HeckeViolation>,
}

impl HeckeReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Exact checks of multiplicativity, the prime-power recursion and the
/// Deligne bound, over every index up to the cutoff.
pub fn hecke_verify(f: &EigenForm) -> HeckeReport {
    let a = &f.qexp.coeffs;
    let cutoff = f.cutoff();
    let k1 = f.weight() - 1;
    let mut violations = Vec::new();

    let mut pairs = 0u64;
    for m in 2..=cutoff {
        if m * 2 > cutoff {
            break;
        }
        for n in (m + 1)..=(cutoff / m) {
            if m.gcd(&n) != 1 {
                continue;
            }
            pairs += 1;
            if a[m * n] != &a[m] * &a[n] {
                violations.push(HeckeViolation::Multiplicativity {
                    m: m as u64,
                    n: n as u64,
                });
            }
        }
    }

    let primes = shared_primes(cutoff as u64);
    let mut powers = 0u64;
    let mut max_abs = 0.0f64;
    let mut prime_count = 0u64;
    for &p in primes.up_to(cutoff as f64) {
        let pu = p as usize;
        prime_count += 1;
        let pk = BigInt::from(p).pow(k1);
        // a(p)² ≤ 4 p^{k−1}
        if &a[pu] * &a[pu] > &pk * 4u32 {
            violations.push(HeckeViolation::Deligne {
                p,
                lambda: f.lambdas[pu],
            });
        }
        max_abs = max_abs.max(f.lambdas[pu].abs());

        let mut prev = BigInt::one(); // a(p^{j−1})
        let mut cur_idx = pu; // p^j
        let mut j = 1u32;
        while let Some(next_idx) = cur_idx.checked_mul(pu).filter(|&i| i <= cutoff) {
            powers += 1;
            let lhs = &a[pu] * &a[cur_idx];
            let rhs = &a[next_idx] + &pk * &prev;
            if lhs != rhs {
                violations.push(HeckeViolation::PrimePower { p, j });
            }
            prev = a[cur_idx].clone();
            cur_idx = next_idx;
            j += 1;
        }
    }

    HeckeReport {
        weight: f.weight(),
        cutoff,
        pairs_checked: pairs,
        prime_powers_checked: powers,
        primes_checked: prime_count,
        max_abs_lambda_p: max_abs,
        violations,
    }
}

/// Hecke eigenvalue at a prime power `p^j` from `λ(p)` alone, using
/// `λ(p^{j+1}) = λ(p)λ(p^j) − λ(p^{j−1})`.
pub fn lambda_prime_power(lambda_p: f64, j: u32) -> f64 {
    let (mut prev, mut cur) = (1.0, lambda_p);
    if j == 0 {
        return 1.0;
    }
    for _ in 1..j {
        let next = lambda_p * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Eigenvalue at arbitrary `n` generated multiplicatively from `λ(p)`.
pub fn lambda_from_primes(f: &EigenForm, n: u64) -> Result<f64> {
    let mut out = 1.0;
    for (p, e) in factorize(n) {
        out *= lambda_prime_power(f.lambda(p as usize)?, e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn big(xs: &[i64]) -> Vec<BigInt> {
        xs.iter().map(|&x| BigInt::from(x)).collect()
    }

    /// Naive divisor-sum oracle.
    fn sigma_naive(n: u64, k: u32) -> i128 {
        (1..=n)
            .filter(|d| n.is_multiple_of(*d))
            .map(|d| (d as i128).pow(k))
            .sum()
    }

    #[test]
    fn eisenstein_small() {
        assert_eq!(eisenstein_qexp(4, 2).unwrap().coeffs, big(&[1, 240, 2160]));
        assert_eq!(eisenstein_qexp(6, 1).unwrap().coeffs, big(&[1, -504]));
        assert_eq!(eisenstein_qexp(8, 1).unwrap().coeffs, big(&[1, 480]));
        let e4 = eisenstein_qexp(4, 300).unwrap();
        assert_eq!(eisenstein_qexp(8, 300).unwrap(), e4.mul(&e4).unwrap());
        for n in 1..=60u64 {
            assert_eq!(e4.coeffs[n as usize], BigInt::from(240 * sigma_naive(n, 3)));
        }
        // E8 = 1 + 480 Σ σ7(n) qⁿ is an independent identity
        let e8 = eisenstein_qexp(8, 300).unwrap();
        for n in 1..=300u64 {
            assert_eq!(e8.coeffs[n as usize], BigInt::from(480 * sigma_naive(n, 7)));
        }
        // E10 = 1 − 264 Σ σ9(n) qⁿ
        let e10 = eisenstein_qexp(10, 100).unwrap();
        for n in 1..=100u64 {
            assert_eq!(
                e10.coeffs[n as usize],
                BigInt::from(-264 * sigma_naive(n, 9))
            );
        }
    }

    #[test]
    fn unsupported_eisenstein() {
        assert!(matches!(
            eisenstein_qexp(12, 5),
            Err(Error::UnsupportedWeight { weight: 12, .. })
        ));
        assert!(eisenstein_qexp(4, 0).is_err());
    }

    #[test]
    fn delta_small() {
        let d = delta_qexp(10).unwrap();
        // q∏(1−qⁿ)²⁴ expanded independently by truncated repeated multiplication
        let mut prod = vec![BigInt::zero(); 10];
        prod[0] = BigInt::one();
        for n in 1..10 {
            for _ in 0..24 {
                for i in (n..10).rev() {
                    let t = prod[i - n].clone();
                    prod[i] -= t;
                }
            }
        }
        assert_eq!(&d.coeffs[1..], &prod[..]);
        assert_eq!(d.coeffs[1], BigInt::one());
        assert_eq!(d.coeffs[2], BigInt::from(-24));
        assert_eq!(d.coeffs[3], BigInt::from(252));
        assert_eq!(d.coeffs[6], &d.coeffs[2] * &d.coeffs[3]);
        assert_eq!(delta_qexp(1).unwrap().coeffs, big(&[0, 1]));
    }

    #[test]
    fn delta_constructions_agree() {
        assert_eq!(
            delta_eta_product(3000).unwrap(),
            delta_from_eisenstein(3000).unwrap()
        );
    }

    #[test]
    fn eigenform_products() {
        let f16 = eigenform(16, 2).unwrap();
        assert_eq!(f16.qexp.coeffs[2], BigInt::from(216));
        // Δ·E14 at n = 2: −24 + a_{E14}(1) with E14 = E8·E6 = 1 + (480−504)q + …
        let f26 = eigenform(26, 2).unwrap();
        assert_eq!(f26.qexp.coeffs[2], BigInt::from(-48));
        assert!(matches!(
            eigenform(24, 10),
            Err(Error::UnsupportedWeight { weight: 24, .. })
        ));
        assert!(eigenform(14, 10).is_err());
    }

    #[test]
    fn lambda_values() {
        let d = eigenform(12, 10).unwrap();
        assert_eq!(d.lambda(1).unwrap(), 1.0);
        let l2 = d.lambda(2).unwrap();
        assert!((l2 - (-24.0 / 2f64.powf(5.5))).abs() < 1e-15);
        assert!((l2 + 0.530330).abs() < 1e-6);
        let l6 = d.lambda(6).unwrap();
        assert!((l6 - l2 * d.lambda(3).unwrap()).abs() < 1e-14);
        assert!(matches!(d.lambda(11), Err(Error::OutOfRange { .. })));
        assert!(d.lambda(0).is_err());
    }

    #[test]
    fn lambda_agrees_with_exact_rational() {
        for &k in &SUPPORTED_WEIGHTS {
            let f = eigenform(k, 1000).unwrap();
            for n in 1..=1000usize {
                // λ² = a² / n^{k−1} exactly, then one square root
                let a = &f.qexp.coeffs[n];
                let sq = BigRational::new(a * a, BigInt::from(n).pow(k - 1));
                let exact = sq.to_f64().unwrap().sqrt() * if a.is_negative() { -1.0 } else { 1.0 };
                let got = f.lambda(n).unwrap();
                assert!(
                    (got - exact).abs() <= 1e-12 * exact.abs().max(1e-300),
                    "k={k} n={n} got={got} exact={exact}"
                );
            }
        }
    }

    #[test]
    fn hecke_small_examples() {
        let d = eigenform(12, 1000).unwrap();
        let rep = hecke_verify(&d);
        assert!(rep.is_clean(), "{:?}", rep.violations);
        assert!(rep.max_abs_lambda_p <= 2.0);
        let a = &d.qexp.coeffs;
        assert_eq!(&a[2] * &a[2], &a[4] + BigInt::from(2048) * &a[1]);
        assert_eq!(a[4], BigInt::from(-1472));
    }

    #[test]
    fn hecke_detects_corruption() {
        let mut d = eigenform(12, 50).unwrap().qexp;
        d.coeffs[12] += 1;
        let f = EigenForm::from_qexp(d).unwrap();
        let rep = hecke_verify(&f);
        assert!(rep
            .violations
            .contains(&HeckeViolation::Multiplicativity { m: 3, n: 4 }));
    }

    #[test]
    fn prime_power_recursion() {
        let d = eigenform(12, 100).unwrap();
        for &p in &[2usize, 3, 5, 7] {
            let lp = d.lambda(p).unwrap();
            let mut pj = p;
            let mut j = 1;
            while pj <= 100 {
                assert!((lambda_prime_power(lp, j) - d.lambda(pj).unwrap()).abs() < 1e-12);
                pj *= p;
                j += 1;
            }
        }
        assert!((lambda_from_primes(&d, 60).unwrap() - d.lambda(60).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn csv_dump() {
        let d = eigenform(12, 10).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf, 3).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "n,a_f(n),lambda(n)\n1,1,1\n2,-24,-0.530330085889911\n3,252,0.598733612492945\n"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn series_product_routes_agree(
            a in prop::collection::vec(-1_000_000i64..1_000_000, 1..300),
            b in prop::collection::vec(any::<i64>(), 1..300),
        ) {
            let a = big(&a);
            let b = big(&b);
            let len = a.len().min(b.len());
            prop_assert_eq!(series_mul(&a, &b, len).unwrap(), ntt::mul_schoolbook(&a, &b, len));
        }

        #[test]
        fn multiplicative_on_coprime(m in 1usize..60, n in 1usize..60) {
            prop_assume!(m.gcd(&n) == 1);
            let f = eigenform(20, 3600).unwrap();
            prop_assert_eq!(&f.qexp.coeffs[m * n], &(&f.qexp.coeffs[m] * &f.qexp.coeffs[n]));
        }
    }
}
