//! Special functions: complex Γ and ζ, the completed zeta `θ`, the scattering
//! function `φ` and the Eisenstein coefficients `φ_ℓ`, K-Bessel functions of
//! imaginary order, Fourier coefficients of incomplete Eisenstein series,
//! the bump weight `g` with its Mellin transform, the weight `W_{n,ℓ}(Y)`,
//! and the Stirling check of `Γ(s+k−1)/Γ(k−1)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::arith::tau;
use crate::error::{Error, Result};
use crate::numeric::{gl_panel, CompensatedSum};

type C = Complex64;

const POLE_EPS: f64 = 1e-8;

/// Largest `|t|` accepted by the Bessel routines.
pub const MAX_ORDER: f64 = 50.0;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `B_2, B_4, …, B_20`.
const BERNOULLI: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174_611.0 / 330.0,
];

fn near_nonpositive_integer(z: C) -> bool {
    z.re < 0.5 && (z.re - z.re.round()).hypot(z.im) < POLE_EPS
}

/// `log Γ(z)` (some branch; exact modulo `2πi`).
pub fn ln_gamma(z: C) -> Result<C> {
    if near_nonpositive_integer(z) {
        return Err(Error::PoleProximity(format!("{z} (Gamma)")));
    }
    Ok(ln_gamma_unchecked(z))
}

fn ln_gamma_unchecked(z: C) -> C {
    if z.re < 0.5 {
        // reflection
        let s = (z * PI).sin();
        return C::new(PI.ln(), 0.0) - s.ln() - ln_gamma_unchecked(C::new(1.0, 0.0) - z);
    }
    let z = z - 1.0;
    let mut x = C::new(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

pub fn gamma(z: C) -> Result<C> {
    Ok(ln_gamma(z)?.exp())
}

/// Real `log Γ(x)` for `x > 0`.
pub fn ln_gamma_real(x: f64) -> f64 {
    ln_gamma_unchecked(C::new(x, 0.0)).re
}

/// Riemann zeta by Euler–Maclaurin with ten Bernoulli corrections.
pub fn zeta(s: C) -> Result<C> {
    if (s - 1.0).norm() < POLE_EPS {
        return Err(Error::PoleProximity(format!("{s} (zeta)")));
    }
    let n = 20 + s.norm().ceil() as usize;
    let mut acc = C::new(0.0, 0.0);
    for k in 1..n {
        acc += (-s * (k as f64).ln()).exp();
    }
    let nf = n as f64;
    let ln_n = nf.ln();
    let n_pow = (-s * ln_n).exp();
    acc += n_pow * nf / (s - 1.0) + n_pow * 0.5;
    // (s)_{2j−1} N^{−s−2j+1} B_{2j}/(2j)!
    let mut rising = s; // s(s+1)…(s+2j−2)
    let mut fact = 2.0; // (2j)!
    let mut npow = n_pow / nf;
    for (j, &b) in BERNOULLI.iter().enumerate() {
        acc += rising * npow * (b / fact);
        let j2 = 2.0 * (j + 1) as f64;
        rising *= (s + (j2 - 1.0)) * (s + j2);
        fact *= (j2 + 1.0) * (j2 + 2.0);
        npow /= nf * nf;
    }
    Ok(acc)
}

/// `θ(s) = π^{−s} Γ(s) ζ(2s)`.
pub fn theta_s(s: C) -> Result<C> {
    if (s - 0.5).norm() < POLE_EPS {
        return Err(Error::PoleProximity(format!("{s} (theta)")));
    }
    let lg = ln_gamma(s)?;
    Ok((lg - s * PI.ln()).exp() * zeta(2.0 * s)?)
}

/// `φ(s) = θ(1−s)/θ(s)`.
pub fn varphi_s(s: C) -> Result<C> {
    let one = C::new(1.0, 0.0);
    Ok(theta_s(one - s)? / theta_s(s)?)
}

/// `φ_ℓ(s) = (2/θ(s)) Σ_{ab=ℓ} (a/b)^{s−1/2}`.
pub fn varphi_ell(ell: u64, s: C) -> Result<C> {
    if ell == 0 {
        return Err(Error::param("ell", "must be positive"));
    }
    Ok(2.0 * divisor_twist(ell, s - 0.5) / theta_s(s)?)
}

/// `Σ_{ab=ℓ} (a/b)^{u}`.
fn divisor_twist(ell: u64, u: C) -> C {
    let mut acc = C::new(0.0, 0.0);
    for a in (1..=ell).filter(|a| ell.is_multiple_of(*a)) {
        let b = ell / a;
        acc += (u * (a as f64 / b as f64).ln()).exp();
    }
    acc
}

/// `(s−1)φ(s)` at `s = 1 + 10^{−j}`, which tends to the residue `3/π`.
pub fn residue_probe(j: i32) -> Result<f64> {
    let h = 10f64.powi(-j);
    let s = C::new(1.0 + h, 0.0);
    Ok((varphi_s(s)? * h).re)
}

// ---------------------------------------------------------------------------
// K-Bessel of imaginary order

fn check_bessel_args(t: f64, w: f64) -> Result<()> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::param("w", format!("need w > 0, got {w}")));
    }
    if !(t.abs() <= MAX_ORDER) {
        return Err(Error::param(
            "t",
            format!("need |t| <= {MAX_ORDER}, got {t}"),
        ));
    }
    Ok(())
}

/// `∫₀^∞ (1+v²)^{−1/2−it} cos(wv) dv`: panels up to `V`, then the
/// integration-by-parts asymptotic series for the tail.
fn oscillatory_integral(t: f64, w: f64) -> C {
    let a = C::new(0.5, t);
    let f = |v: f64| {
        let l = (v * v).ln_1p();
        C::from_polar((-0.5 * l).exp(), -t * l)
    };
    let v_end = (1.0f64).max((52.0 + 8.0 * t.abs()) / w);
    let mut acc = C::new(0.0, 0.0);
    let mut v = 0.0;
    while v < v_end {
        let freq = if v <= 2.0 {
            w + t.abs()
        } else {
            w + 2.0 * t.abs() * v / (1.0 + v * v)
        };
        let h = (PI / (2.0 * freq)).min(1.0);
        let b = (v + h).min(v_end);
        acc += gl_panel(v, b, |u| f(u) * (w * u).cos());
        v = b;
    }
    acc + oscillatory_tail(a, w, v_end)
}

/// `∫_V^∞ (1+v²)^{−a} cos(wv) dv` from derivatives `f^{(j)}(V) = P_j(V)(1+V²)^{−a−j}`.
fn oscillatory_tail(a: C, w: f64, v: f64) -> C {
    let q = 1.0 + v * v;
    let (sn, cs) = (w * v).sin_cos();
    // P_j as coefficient vectors in v
    let mut poly: Vec<C> = vec![C::new(1.0, 0.0)];
    let mut derivs: Vec<C> = Vec::new();
    let base = (-a * q.ln()).exp();
    let mut qpow = base;
    let mut tail = C::new(0.0, 0.0);
    let mut last = f64::INFINITY;
    for j in 0..60usize {
        let pv = poly
            .iter()
            .rev()
            .fold(C::new(0.0, 0.0), |acc, &c| acc * v + c);
        derivs.push(pv * qpow);
        // contribution of f^{(j)}: −f^{(2m)} sin/w^{2m+1} or −f^{(2m+1)} cos/w^{2m+2}, sign (−1)^m
        let m = j / 2;
        let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
        let trig = if j % 2 == 0 { sn } else { cs };
        let term = derivs[j] * (sign * trig / w.powi(j as i32 + 1));
        let mag = derivs[j].norm() / w.powi(j as i32 + 1);
        if mag > last && j > 2 {
            break;
        }
        tail += term;
        last = mag;
        if mag < 1e-18 {
            break;
        }
        // P_{j+1} = (1+v²)P_j' − 2(a+j) v P_j
        let deg = poly.len();
        let mut next = vec![C::new(0.0, 0.0); deg + 1];
        for (i, &c) in poly.iter().enumerate() {
            if i >= 1 {
                let d = c * i as f64;
                next[i - 1] += d;
                next[i + 1] += d;
            }
            next[i + 1] -= 2.0 * (a + j as f64) * c;
        }
        poly = next;
        qpow /= q;
    }
    tail
}

/// `K_{it}(w)/Γ(1/2+it) = π^{−1/2}(w/2)^{−it} ∫₀^∞ (1+v²)^{−1/2−it} cos(wv) dv`.
pub fn k_over_gamma(t: f64, w: f64) -> Result<C> {
    check_bessel_args(t, w)?;
    let phase = C::from_polar(PI.sqrt().recip(), -t * (w / 2.0).ln());
    Ok(phase * oscillatory_integral(t, w))
}

/// `K_{it}(w)` for real `t`, `w > 0`, from the oscillatory integral.
pub fn bessel_k_it(t: f64, w: f64) -> Result<f64> {
    let ratio = k_over_gamma(t, w)?;
    Ok((gamma(C::new(0.5, t))? * ratio).re)
}

/// `K_{it}(w) = ∫₀^∞ e^{−w cosh u} cos(tu) du`, a second quadrature.
///
/// Absolute accuracy is relative to `K₀(w)`, so for large `|t|`, where
/// `K_{it}(w)` is exponentially small, prefer [`bessel_k_it`].
pub fn bessel_k_it_cosh(t: f64, w: f64) -> Result<f64> {
    check_bessel_args(t, w)?;
    let u_end = (1.0 + 60.0 / w).acosh();
    let h = (0.25f64).min(PI / (2.0 * t.abs().max(1e-300)));
    let mut acc = CompensatedSum::new();
    let mut u = 0.0;
    while u < u_end {
        let b = (u + h).min(u_end);
        acc.add(gl_panel(b.min(u), b, |x: f64| {
            (-w * x.cosh()).exp() * (t * x).cos()
        }));
        u = b;
    }
    Ok(acc.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesselBoundCheck {
    pub t: f64,
    pub w: f64,
    pub a: u32,
    pub epsilon: f64,
    pub value: f64,
    /// `|K_{it}(w)| / [|Γ(1/2+it)| ((1+|t|)/w)^A (1+(1+|t|)/w)^ε]`
    pub ratio: f64,
    pub holds: bool,
}

/// Empirical constant for [`bessel_bound_check`], the grid maximum rounded up.
pub const BESSEL_BOUND_CONSTANT: f64 = 2.0;

pub fn bessel_bound_check(t: f64, w: f64, a: u32, epsilon: f64) -> Result<BesselBoundCheck> {
    let kg = k_over_gamma(t, w)?;
    let g = gamma(C::new(0.5, t))?;
    let value = (g * kg).re;
    let u = (1.0 + t.abs()) / w;
    let ratio = (value / g.norm()).abs() / (u.powi(a as i32) * (1.0 + u).powf(epsilon));
    Ok(BesselBoundCheck {
        t,
        w,
        a,
        epsilon,
        value,
        ratio,
        holds: ratio <= BESSEL_BOUND_CONSTANT,
    })
}

// ---------------------------------------------------------------------------
// Test weights and Mellin transforms

/// A nonnegative weight `ψ` on `(0, ∞)` with its Mellin transform
/// `Ψ(s) = ∫₀^∞ ψ(y) y^{s−1} dy`.
pub trait MellinWeight: Sync {
    fn eval(&self, y: f64) -> f64;

    fn mellin(&self, s: C) -> C;

    /// An upper bound for `∫_{t0}^∞ |Ψ(σ+it)| (1+2t) dt`, if one is available.
    fn mellin_tail_bound(&self, sigma: f64, t0: f64) -> Option<f64>;
}

/// `g(t) = exp(1 − 1/(1 − x²))` with `x` the affine image of `t` in `(−1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BumpFunction {
    pub lo: f64,
    pub hi: f64,
}

impl Default for BumpFunction {
    fn default() -> Self {
        BumpFunction::canonical()
    }
}

impl BumpFunction {
    /// Support `[1, 2]`, peak `g(3/2) = 1`.
    pub fn canonical() -> Self {
        BumpFunction { lo: 1.0, hi: 2.0 }
    }

    fn local(&self, t: f64) -> Option<f64> {
        if t <= self.lo || t >= self.hi {
            return None;
        }
        Some((2.0 * t - self.lo - self.hi) / (self.hi - self.lo))
    }

    pub fn value(&self, t: f64) -> f64 {
        self.ln_value(t).exp()
    }

    /// `log g(t)`, `−∞` outside the support.
    pub fn ln_value(&self, t: f64) -> f64 {
        match self.local(t) {
            Some(x) => 1.0 - 1.0 / (1.0 - x * x),
            None => f64::NEG_INFINITY,
        }
    }

    /// `g''(t)`.
    pub fn second_derivative(&self, t: f64) -> f64 {
        let Some(x) = self.local(t) else { return 0.0 };
        let q = 1.0 - x * x;
        let h1 = -2.0 * x / (q * q);
        let h2 = -2.0 / (q * q) - 8.0 * x * x / (q * q * q);
        let scale = 2.0 / (self.hi - self.lo);
        self.value(t) * (h1 * h1 + h2) * scale * scale
    }

    /// `g'''(t)`, by a central difference of [`Self::second_derivative`].
    pub fn third_derivative(&self, t: f64) -> f64 {
        let h = 1e-6 * (self.hi - self.lo);
        (self.second_derivative(t + h) - self.second_derivative(t - h)) / (2.0 * h)
    }

    /// `∫ |g'''(y)| y^{σ+2} dy`.
    fn third_derivative_moment(&self, sigma: f64) -> f64 {
        let panels = 400;
        let h = (self.hi - self.lo) / panels as f64;
        (0..panels)
            .map(|i| {
                let a = self.lo + i as f64 * h;
                gl_panel(a, a + h, |y| {
                    self.third_derivative(y).abs() * y.powf(sigma + 2.0)
                })
            })
            .sum()
    }
}

/// Mellin transform of a bump by composite Gauss–Legendre quadrature in `log y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MellinTransform {
    pub bump: BumpFunction,
    /// Minimum panel count; more are added for oscillatory arguments.
    pub panels: usize,
}

impl Default for MellinTransform {
    fn default() -> Self {
        MellinTransform {
            bump: BumpFunction::canonical(),
            panels: 32,
        }
    }
}

impl MellinTransform {
    pub fn eval(&self, s: C) -> C {
        let (u0, u1) = (self.bump.lo.ln(), self.bump.hi.ln());
        let n = self
            .panels
            .max(((u1 - u0) * s.im.abs()).ceil() as usize * 2);
        let h = (u1 - u0) / n as f64;
        let mut acc = C::new(0.0, 0.0);
        for i in 0..n {
            let a = u0 + i as f64 * h;
            acc += gl_panel(a, a + h, |u| (s * u).exp() * self.bump.value(u.exp()));
        }
        acc
    }
}

impl MellinWeight for MellinTransform {
    fn eval(&self, y: f64) -> f64 {
        self.bump.value(y)
    }

    fn mellin(&self, s: C) -> C {
        self.eval(s)
    }

    /// Three integrations by parts: `|Ψ(σ+it)| ≤ ∫|g'''| y^{σ+2} / |t|³`.
    fn mellin_tail_bound(&self, sigma: f64, t0: f64) -> Option<f64> {
        if t0 <= 0.0 {
            return None;
        }
        let c = self.bump.third_derivative_moment(sigma);
        Some(c * (1.0 / (2.0 * t0 * t0) + 2.0 / t0))
    }
}

/// `ψ(y) = exp(−(log y − center)²/(2 width²))`, with
/// `Ψ(s) = width √(2π) exp(center·s + width² s²/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogNormalWeight {
    pub center: f64,
    pub width: f64,
}

impl Default for LogNormalWeight {
    fn default() -> Self {
        LogNormalWeight {
            center: 0.0,
            width: 0.5,
        }
    }
}

impl MellinWeight for LogNormalWeight {
    fn eval(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let d = y.ln() - self.center;
        (-d * d / (2.0 * self.width * self.width)).exp()
    }

    fn mellin(&self, s: C) -> C {
        let c = self.width * (2.0 * PI).sqrt();
        (s * self.center + s * s * (self.width * self.width / 2.0)).exp() * c
    }

    fn mellin_tail_bound(&self, sigma: f64, t0: f64) -> Option<f64> {
        // |Ψ(σ+it)| = K e^{−c t²}, c = width²/2; ∫ e^{−ct²}(1+2t) ≤ e^{−c t0²}(1/(2c t0) + 1/c)
        if t0 <= 0.0 {
            return None;
        }
        let c = self.width * self.width / 2.0;
        let k = self.width * (2.0 * PI).sqrt() * (sigma * self.center + c * sigma * sigma).exp();
        Some(k * (-c * t0 * t0).exp() * (1.0 / (2.0 * c * t0) + 1.0 / c))
    }
}

// ---------------------------------------------------------------------------
// Fourier coefficients of incomplete Eisenstein series

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AEllValue {
    /// The coefficient is real for a real weight `ψ`.
    pub value: f64,
    /// Truncation point of the `t`-integral.
    pub t_max: f64,
    /// Bound on the discarded tail.
    pub tail_bound: f64,
}

/// Target for the discarded part of the spectral integral.
pub const A_ELL_TAIL_TOLERANCE: f64 = 1e-10;

/// `ℓ`-th Fourier coefficient at height `y` of `Σ_{Γ∞\Γ} ψ(Im γz)`:
/// `(y/π)^{1/2} ∫ π^{it} Ψ(−1/2−it) / (Γ(1/2+it) ζ(1+2it)) Σ_{ab=|ℓ|}(a/b)^{it} K_{it}(2π|ℓ|y) dt`.
pub fn a_ell_y(weight: &dyn MellinWeight, ell: i64, y: f64) -> Result<AEllValue> {
    if ell == 0 {
        return Err(Error::param("ell", "must be nonzero"));
    }
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::param("y", "must be positive"));
    }
    let l = ell.unsigned_abs();
    let w = 2.0 * PI * l as f64 * y;
    let prefactor = (y / PI).sqrt();

    // |K/Γ| ≤ π^{−1/2} (1+2|t|)/w by one integration by parts of the cosine integral.
    let tail = |t0: f64| -> Result<Option<f64>> {
        let Some(psi_tail) = weight.mellin_tail_bound(-0.5, t0) else {
            return Ok(None);
        };
        let mut inv_zeta: f64 = 0.0;
        let mut t = t0;
        while t <= 2.0 * t0 + 10.0 {
            inv_zeta = inv_zeta.max(zeta(C::new(1.0, 2.0 * t))?.norm().recip());
            t += 0.25;
        }
        Ok(Some(
            2.0 * prefactor * tau(l) as f64 * PI.sqrt().recip() / w * 2.0 * inv_zeta * psi_tail,
        ))
    };
    let mut t_max = 1.0;
    let bound = loop {
        match tail(t_max)? {
            Some(b) if b < A_ELL_TAIL_TOLERANCE => break b,
            _ if t_max >= MAX_ORDER => {
                return Err(Error::TailBoundUnattainable {
                    bound: tail(MAX_ORDER)?.unwrap_or(f64::INFINITY),
                    tolerance: A_ELL_TAIL_TOLERANCE,
                    max_t: MAX_ORDER,
                })
            }
            _ => t_max = (t_max + 0.5).min(MAX_ORDER),
        }
    };

    let integrand = |t: f64| -> Result<C> {
        let s = C::new(-0.5, -t);
        let num =
            C::from_polar(1.0, t * PI.ln()) * weight.mellin(s) * divisor_twist(l, C::new(0.0, t));
        Ok(num / zeta(C::new(1.0, 2.0 * t))? * k_over_gamma(t, w)?)
    };
    // integrand(−t) is the conjugate of integrand(t)
    let panels = (t_max / 0.5).ceil() as usize;
    let h = t_max / panels as f64;
    let mut acc = CompensatedSum::new();
    for i in 0..panels {
        let a = i as f64 * h;
        let mut err = None;
        let v: C = gl_panel(a, a + h, |t| match integrand(t) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                C::new(0.0, 0.0)
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        acc.add(v.re);
    }
    Ok(AEllValue {
        value: 2.0 * prefactor * acc.value(),
        t_max,
        tail_bound: bound,
    })
}

/// `|a_ℓ(y)| / [τ(|ℓ|) √y (1/(|ℓ|y))^A (1 + 1/(|ℓ|y))^ε]`.
pub fn a_ell_decay_ratio(value: f64, ell: i64, y: f64, a: u32, epsilon: f64) -> f64 {
    let l = ell.unsigned_abs();
    let u = 1.0 / (l as f64 * y);
    value.abs() / (tau(l) as f64 * y.sqrt() * u.powi(a as i32) * (1.0 + u).powf(epsilon))
}

// ---------------------------------------------------------------------------
// The weight W_{n,ℓ}(Y)

fn check_w_args(n: u64, ell: i64, y_cap: f64, k: u32) -> Result<()> {
    if n == 0 || (n as i64) + ell < 1 {
        return Err(Error::param("n", "need n >= 1 and n + ell >= 1"));
    }
    if !(y_cap >= 1.0) {
        return Err(Error::param("Y", "need Y >= 1"));
    }
    if k < 12 || k % 2 == 1 {
        return Err(Error::param("k", "need an even weight k >= 12"));
    }
    Ok(())
}

/// `(√(n(n+ℓ))/(n+ℓ/2))^{k−1}`, exactly 1 at `ℓ = 0`.
pub fn w_prefactor(n: u64, ell: i64, k: u32) -> f64 {
    let r = ell as f64 / (2.0 * n as f64 + ell as f64);
    ((k as f64 - 1.0) / 2.0 * (-r * r).ln_1p()).exp()
}

/// `log W_{n,ℓ}(Y)` with `panels` Gauss–Legendre panels on the support.
pub fn ln_w_weight_panels(
    n: u64,
    ell: i64,
    y_cap: f64,
    k: u32,
    g: &BumpFunction,
    panels: usize,
) -> Result<f64> {
    check_w_args(n, ell, y_cap, k)?;
    let beta = 4.0 * PI * (n as f64 + ell as f64 / 2.0) / y_cap;
    let km = k as f64;
    // β^{k−1}/Γ(k−1) ∫ g(t) t^{k−2} e^{−βt} dt, evaluated around the largest node
    let log_node = |t: f64| g.ln_value(t) + (km - 2.0) * t.ln() - beta * t;
    let h = (g.hi - g.lo) / panels as f64;
    let rule = crate::numeric::gauss_legendre_20();
    let mut nodes = Vec::with_capacity(panels * rule.len());
    for i in 0..panels {
        let a = g.lo + i as f64 * h;
        for &(x, wt) in rule {
            let t = a + 0.5 * h * (x + 1.0);
            nodes.push((log_node(t), wt * 0.5 * h));
        }
    }
    let max = nodes.iter().map(|n| n.0).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let scaled: CompensatedSum = nodes.iter().map(|&(l, wt)| wt * (l - max).exp()).sum();
    let ln_pref = (km - 1.0) / 2.0 * {
        let r = ell as f64 / (2.0 * n as f64 + ell as f64);
        (-r * r).ln_1p()
    };
    let out =
        ln_pref + (km - 1.0) * beta.ln() - ln_gamma_real(km - 1.0) + max + scaled.value().ln();
    if out.is_nan() {
        return Err(Error::Underflow(format!(
            "W({n},{ell},{y_cap},{k}) is not finite"
        )));
    }
    Ok(out)
}

/// Default panel count for [`w_weight`].
pub const W_PANELS: usize = 64;

/// `W_{n,ℓ}(Y) = (n(n+ℓ))^{(k−1)/2}(4π)^{k−1}/Γ(k−1) ∫₀^∞ g(Yy) y^{k−2} e^{−4π(n+ℓ/2)y} dy`.
pub fn w_weight(n: u64, ell: i64, y_cap: f64, k: u32, g: &BumpFunction) -> Result<f64> {
    Ok(ln_w_weight_panels(n, ell, y_cap, k, g, W_PANELS)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WMainTerm {
    pub prefactor: f64,
    /// `prefactor · g(Y(k−1)/(4π(n+ℓ/2)))`
    pub main: f64,
    /// `k^ε (Y/(n+ℓ/2))^{1+ε}`
    pub envelope: f64,
}

/// Exponent `ε` used in the error envelope of the main-term comparison.
pub const W_ENVELOPE_EPSILON: f64 = 0.01;

/// Constant `C` in `|W − main| ≤ C · envelope`.
pub const W_ENVELOPE_CONSTANT: f64 = 5.0;

pub fn w_main_term(
    n: u64,
    ell: i64,
    y_cap: f64,
    k: u32,
    g: &BumpFunction,
    epsilon: f64,
) -> Result<WMainTerm> {
    check_w_args(n, ell, y_cap, k)?;
    let center = n as f64 + ell as f64 / 2.0;
    let prefactor = w_prefactor(n, ell, k);
    Ok(WMainTerm {
        prefactor,
        main: prefactor * g.value(y_cap * (k as f64 - 1.0) / (4.0 * PI * center)),
        envelope: (k as f64).powf(epsilon) * (y_cap / center).powf(1.0 + epsilon),
    })
}

/// `n` for which `Y(k−1)/(4π(n+ℓ/2))` lies in the support `[lo, hi]` of `g`.
pub fn w_support_window(ell: i64, y_cap: f64, k: u32, g: &BumpFunction) -> (u64, u64) {
    let c = y_cap * (k as f64 - 1.0) / (4.0 * PI);
    let lo = (c / g.hi - ell as f64 / 2.0)
        .ceil()
        .max(1.0)
        .max(1.0 - ell as f64);
    let hi = (c / g.lo - ell as f64 / 2.0).floor();
    (lo as u64, hi.max(0.0) as u64)
}

// ---------------------------------------------------------------------------
// Stirling ratio

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaRatioCheck {
    pub k: u32,
    pub s: (f64, f64),
    /// `|Γ(s+k−1)/(Γ(k−1)(k−1)^s) − 1|`
    pub error: f64,
    /// `error · k/(|s|+1)²`
    pub normalized: f64,
}

/// Ceiling on [`GammaRatioCheck::normalized`].
pub const GAMMA_RATIO_CONSTANT: f64 = 3.0;

fn log1p_c(z: C) -> C {
    let re = 0.5 * (2.0 * z.re + z.norm_sqr()).ln_1p();
    C::new(re, z.im.atan2(1.0 + z.re))
}

fn expm1_c(z: C) -> C {
    let (s, c) = z.im.sin_cos();
    let half = (z.im / 2.0).sin();
    C::new(z.re.exp_m1() * c - 2.0 * half * half, z.re.exp() * s)
}

pub fn gamma_ratio_check(k: u32, s: C) -> Result<GammaRatioCheck> {
    if k < 12 {
        return Err(Error::param("k", "need k >= 12"));
    }
    let z = k as f64 - 1.0;
    let error = if s.im == 0.0 && s.re >= 0.0 && s.re.fract() == 0.0 && s.re <= 64.0 {
        // (k−1)(k)…(k+s−2)/(k−1)^s − 1
        let mut prod = 1.0;
        for j in 0..s.re as u32 {
            prod *= (z + j as f64) / z;
        }
        (prod - 1.0).abs()
    } else {
        if (s + z).re <= 0.0 {
            return Err(Error::param("s", "need Re(s) > 1 − k"));
        }
        // log Γ(z+s) − log Γ(z) − s log z by the Stirling series
        let zs = s + z;
        let mut log_ratio = (zs - 0.5) * log1p_c(s / z) - s;
        for (j, &b) in BERNOULLI.iter().take(8).enumerate() {
            let m = 2 * (j + 1);
            let c = b / (m as f64 * (m as f64 - 1.0));
            log_ratio += c * (zs.powi(1 - m as i32) - C::new(z, 0.0).powi(1 - m as i32));
        }
        expm1_c(log_ratio).norm()
    };
    Ok(GammaRatioCheck {
        k,
        s: (s.re, s.im),
        error,
        normalized: error * k as f64 / (s.norm() + 1.0).powi(2),
    })
}

/// `c_Y = (3/π) Ψ(−1) Y`, where `Ψ(−1) = ∫ ψ(y) y^{−2} dy` is the inner product of
/// the incomplete Eisenstein series built from `ψ` with the constant function.
pub fn c_y(weight: &dyn MellinWeight, y_cap: f64) -> f64 {
    3.0 / PI * weight.mellin(C::new(-1.0, 0.0)).re * y_cap
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn gamma_known_values() {
        assert!((gamma(c(0.5, 0.0)).unwrap().re - PI.sqrt()).abs() < 1e-14);
        assert!((gamma(c(5.0, 0.0)).unwrap().re - 24.0).abs() < 1e-12);
        assert!((gamma(c(-0.5, 0.0)).unwrap().re + 2.0 * PI.sqrt()).abs() < 1e-13);
        // |Γ(1/2+it)|² = π / cosh(πt)
        for t in [0.3, 1.0, 5.0, 20.0] {
            let g = gamma(c(0.5, t)).unwrap().norm_sqr();
            assert!((g / (PI / (PI * t).cosh()) - 1.0).abs() < 1e-12, "t={t}");
        }
        assert!(matches!(gamma(c(-2.0, 1e-9)), Err(Error::PoleProximity(_))));
        assert!((ln_gamma_real(101.0) - 363.739_375_555_563_5).abs() < 1e-10);
    }

    #[test]
    fn zeta_known_values() {
        assert!((zeta(c(2.0, 0.0)).unwrap().re - PI * PI / 6.0).abs() < 1e-14);
        assert!((zeta(c(4.0, 0.0)).unwrap().re - PI.powi(4) / 90.0).abs() < 1e-14);
        assert!((zeta(c(0.0, 0.0)).unwrap().re + 0.5).abs() < 1e-14);
        assert!((zeta(c(-1.0, 0.0)).unwrap().re + 1.0 / 12.0).abs() < 1e-14);
        // first nontrivial zero
        assert!(zeta(c(0.5, 14.134_725_141_734_693)).unwrap().norm() < 1e-12);
        assert!(matches!(zeta(c(1.0, 0.0)), Err(Error::PoleProximity(_))));
    }

    #[test]
    fn theta_and_phi() {
        let th = theta_s(c(2.0, 0.0)).unwrap();
        assert!((th.re - PI * PI / 90.0).abs() < 1e-14);
        for t in [0.5, 1.0, 5.0, 13.0] {
            let p = varphi_s(c(0.5, t)).unwrap();
            assert!((p.norm() - 1.0).abs() < 1e-10, "t={t}");
        }
        let s = c(0.8, 2.0);
        assert!((varphi_ell(1, s).unwrap() - 2.0 / theta_s(s).unwrap()).norm() < 1e-15);
        assert!(theta_s(c(0.5, 0.0)).is_err());
        assert!(varphi_s(c(1.0, 0.0)).is_err());
    }

    #[test]
    fn residue_limit() {
        let target = 3.0 / PI;
        let errs: Vec<f64> = (3..=6)
            .map(|j| (residue_probe(j).unwrap() - target).abs())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]));
        assert!(errs[3] < 1e-6);
    }

    #[test]
    fn bessel_symmetry_and_routes() {
        for &(t, w) in &[(0.0, 1.0), (1.0, 1.0), (2.5, 0.3), (4.0, 3.0), (0.5, 10.0)] {
            let a = bessel_k_it(t, w).unwrap();
            let b = bessel_k_it(-t, w).unwrap();
            let c2 = bessel_k_it_cosh(t, w).unwrap();
            assert!((a - b).abs() < 1e-14, "({t},{w})");
            assert!((a - c2).abs() < 1e-10, "({t},{w}): {a} vs {c2}");
        }
        assert!(bessel_k_it(0.0, 0.0).is_err());
        assert!(bessel_k_it(51.0, 1.0).is_err());
    }

    #[test]
    fn bessel_large_order_is_real() {
        for &(t, w) in &[(20.0, 1.0), (50.0, 0.5), (50.0, 30.0)] {
            let kg = k_over_gamma(t, w).unwrap();
            let g = gamma(c(0.5, t)).unwrap();
            let k = g * kg;
            assert!(k.im.abs() <= 1e-8 * k.norm().max(g.norm()), "({t},{w}) {k}");
        }
    }

    #[test]
    fn bessel_bound_grid() {
        for t in [0.0, 1.0, 5.0] {
            for w in [0.1, 1.0, 10.0] {
                for a in [0, 2] {
                    let chk = bessel_bound_check(t, w, a, 0.1).unwrap();
                    assert!(chk.ratio.is_finite());
                    assert!(chk.holds, "{chk:?}");
                }
            }
        }
        // K_0 at w = 0.1 and w = 1
        assert!((bessel_k_it(0.0, 0.1).unwrap() - 2.427_069_024_702_017).abs() < 1e-12);
        assert!((bessel_k_it(0.0, 1.0).unwrap() - 0.421_024_438_240_708_3).abs() < 1e-13);
    }

    #[test]
    fn bump_and_mellin() {
        let g = BumpFunction::canonical();
        assert_eq!(g.value(1.5), 1.0);
        assert_eq!(g.value(1.0), 0.0);
        assert_eq!(g.value(2.5), 0.0);
        assert!(g.value(1.01) > 0.0 && g.value(1.01) < 1e-10);
        let h = 1e-4;
        for t in [1.2, 1.5, 1.77] {
            let fd = (g.value(t + h) - 2.0 * g.value(t) + g.value(t - h)) / (h * h);
            assert!((fd - g.second_derivative(t)).abs() < 1e-5 * (1.0 + fd.abs()));
        }
        let m = MellinTransform::default();
        for sigma in [-3.0, -1.0, 0.0, 1.0, 4.0] {
            assert!(m.eval(c(sigma, 0.0)).re > 0.0);
        }
        // G(1) = ∫ g
        let direct: f64 = (0..100)
            .map(|i| {
                let a = 1.0 + i as f64 / 100.0;
                gl_panel(a, a + 0.01, |y| g.value(y))
            })
            .sum();
        assert!((m.eval(c(1.0, 0.0)).re - direct).abs() < 1e-13);
        // |G(σ+it)| |t|³ ≤ ∫|g'''| y^{σ+2}, recovered from the tail bound at t0 = 1
        let moment = m.mellin_tail_bound(-0.5, 1.0).unwrap() / 2.5;
        for t in [5.0, 10.0, 20.0, 40.0, 80.0] {
            let scaled = m.eval(c(-0.5, t)).norm() * f64::powi(t, 3);
            assert!(scaled <= moment, "t={t}: {scaled} > {moment}");
        }
    }

    #[test]
    fn lognormal_mellin_closed_form() {
        let psi = LogNormalWeight::default();
        for s in [c(-0.5, 0.0), c(-0.5, 3.0), c(1.0, -2.0)] {
            let (u0, u1) = (-8.0, 8.0);
            let n = 400;
            let h = (u1 - u0) / n as f64;
            let q: C = (0..n)
                .map(|i| {
                    let a = u0 + i as f64 * h;
                    gl_panel(a, a + h, |u| (s * u).exp() * psi.eval(u.exp()))
                })
                .sum();
            assert!((q - psi.mellin(s)).norm() < 1e-12, "{s}");
        }
    }

    #[test]
    fn a_ell_basic() {
        let psi = LogNormalWeight::default();
        let a = a_ell_y(&psi, 1, 0.1).unwrap();
        let b = a_ell_y(&psi, -1, 0.1).unwrap();
        assert_eq!(a.value, b.value);
        assert!(a.tail_bound < A_ELL_TAIL_TOLERANCE);
        assert!(a.t_max < MAX_ORDER);
        for (ell, y) in [(1i64, 10.0), (2, 5.0), (6, 2.0)] {
            let v = a_ell_y(&psi, ell, y).unwrap();
            assert!(v.value.abs() < 1e-6 * y.sqrt(), "{ell} {y}");
        }
        let bump = MellinTransform::default();
        assert!(matches!(
            a_ell_y(&bump, 1, 0.1),
            Err(Error::TailBoundUnattainable { .. })
        ));
    }

    #[test]
    fn w_prefactor_exact_at_zero_shift() {
        for k in [12, 50, 500] {
            for n in [1, 7, 1000] {
                assert_eq!(w_prefactor(n, 0, k), 1.0);
            }
        }
        let g = BumpFunction::canonical();
        let m = w_main_term(10, 0, 1.0, 100, &g, 0.1).unwrap();
        assert_eq!(m.prefactor, 1.0);
    }

    #[test]
    fn w_weight_resolution_and_pin() {
        let g = BumpFunction::canonical();
        for &(n, ell, y, k) in &[
            (8u64, 1i64, 10.0, 100u32),
            (3, 0, 1.0, 50),
            (200, 2, 10.0, 500),
            (1, 0, 1.0, 12),
        ] {
            let a = ln_w_weight_panels(n, ell, y, k, &g, 64).unwrap();
            let b = ln_w_weight_panels(n, ell, y, k, &g, 128).unwrap();
            assert!((a - b).abs() < 1e-8, "({n},{ell},{y},{k}) {a} {b}");
        }
        // high-precision reference value computed independently
        let w = w_weight(8, 1, 10.0, 100, &g).unwrap();
        assert!((w / 3.212_302_580_321_994e-36 - 1.0).abs() < 1e-8, "{w}");
        let main = w_main_term(8, 1, 10.0, 100, &g, 0.1).unwrap();
        assert_eq!(main.main, 0.0);
        // peak of g at Y(k−1)/(4πn) = 3/2
        let n = 10u64;
        let kk = 12u32;
        let y = 4.0 * PI * n as f64 * 1.5 / (kk as f64 - 1.0);
        let mm = w_main_term(n, 0, y.max(1.0), kk, &g, 0.1).unwrap();
        assert!((mm.main - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w_far_outside_support() {
        let g = BumpFunction::canonical();
        let w = w_weight(100_000, 1, 1.0, 50, &g).unwrap();
        let m = w_main_term(100_000, 1, 1.0, 50, &g, 0.1).unwrap();
        assert!(w < 1e-10 && m.main < 1e-10);
        assert!(w >= 0.0);
    }

    #[test]
    fn gamma_ratio_exact_and_grid() {
        for k in [12u32, 100, 10_000] {
            assert_eq!(gamma_ratio_check(k, c(0.0, 0.0)).unwrap().error, 0.0);
            assert_eq!(gamma_ratio_check(k, c(1.0, 0.0)).unwrap().error, 0.0);
        }
        let r = gamma_ratio_check(10_000, c(1.0, 1.0)).unwrap();
        assert!(r.normalized < 3.0);
        // s = 2: k/(k−1) − 1 = 1/(k−1) through both routes
        let exact = gamma_ratio_check(1000, c(2.0, 0.0)).unwrap().error;
        assert!((exact - 1.0 / 999.0).abs() < 1e-15);
        let stirling = gamma_ratio_check(1000, c(2.0, 1e-300)).unwrap().error;
        assert!((stirling - exact).abs() < 1e-13);
        // against direct Lanczos at moderate k
        let s = c(0.5, 3.0);
        let direct =
            (ln_gamma(s + 49.0).unwrap() - ln_gamma(c(49.0, 0.0)).unwrap() - s * 49f64.ln()).exp()
                - 1.0;
        assert!((gamma_ratio_check(50, s).unwrap().error - direct.norm()).abs() < 1e-11);
    }

    #[test]
    fn c_y_positive() {
        let m = MellinTransform::default();
        assert!(c_y(&m, 10.0) > 0.0);
        assert!((c_y(&m, 10.0) / c_y(&m, 1.0) - 10.0).abs() < 1e-12);
    }
}
