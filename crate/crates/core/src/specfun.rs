//! Modified Bessel functions of order 0 and 1 and the Green function of
//! `-Δ + λ` in the plane.
//!
//! `K₀`, `K₁` use the ascending series for `x ≤ 2` and Steed's continued
//! fraction (Temme's CF2) above. `I₀`, `I₁` use the ascending series up to
//! `x = 50` and the Hankel asymptotic expansion beyond.

use std::f64::consts::PI;

use thiserror::Error;

/// Euler–Mascheroni constant, 20 significant digits.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Split point between the ascending series and the continued fraction.
const K_SERIES_LIMIT: f64 = 2.0;
/// Split point between the ascending series and the asymptotic expansion.
const I_SERIES_LIMIT: f64 = 50.0;
/// K-kind values below this are reported as exactly zero.
const K_UNDERFLOW: f64 = 1e-300;

const MAX_TERMS: usize = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecfunError {
    #[error("argument {arg} outside the domain of {function}")]
    Domain { function: &'static str, arg: f64 },
    #[error("unsupported Bessel order {0}; only 0 and 1 are implemented")]
    Order(u32),
}

/// Which modified Bessel function a [`BesselValue`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselKind {
    /// `I_ν`, regular at the origin.
    First,
    /// `K_ν`, the Macdonald function.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselValue {
    pub order: u32,
    pub kind: BesselKind,
    pub argument: f64,
    pub value: f64,
}

impl BesselValue {
    pub fn evaluate(kind: BesselKind, order: u32, argument: f64) -> Result<Self, SpecfunError> {
        let value = match kind {
            BesselKind::First => bessel_i(order, argument)?,
            BesselKind::Second => bessel_k(order, argument)?,
        };
        Ok(Self {
            order,
            kind,
            argument,
            value,
        })
    }
}

/// Modified Bessel function of the second kind `K_order(x)`, `order ∈ {0, 1}`.
pub fn bessel_k(order: u32, x: f64) -> Result<f64, SpecfunError> {
    if order > 1 {
        return Err(SpecfunError::Order(order));
    }
    if !(x > 0.0) {
        return Err(SpecfunError::Domain {
            function: "bessel_k",
            arg: x,
        });
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let (k0, k1) = k01(x);
    let v = if order == 0 { k0 } else { k1 };
    Ok(if v < K_UNDERFLOW { 0.0 } else { v })
}

/// Modified Bessel function of the first kind `I_order(x)`, `order ∈ {0, 1}`.
pub fn bessel_i(order: u32, x: f64) -> Result<f64, SpecfunError> {
    if order > 1 {
        return Err(SpecfunError::Order(order));
    }
    if !(x >= 0.0) {
        return Err(SpecfunError::Domain {
            function: "bessel_i",
            arg: x,
        });
    }
    let (i0, i1) = i01(x);
    Ok(if order == 0 { i0 } else { i1 })
}

/// `(I₀(x), I₁(x))` for `x ≥ 0`.
pub(crate) fn i01(x: f64) -> (f64, f64) {
    if x <= I_SERIES_LIMIT {
        i01_series(x)
    } else {
        i01_asymptotic(x)
    }
}

/// `(K₀(x), K₁(x))` for `x > 0`, without the underflow clamp.
pub(crate) fn k01(x: f64) -> (f64, f64) {
    if x <= K_SERIES_LIMIT {
        k01_series(x)
    } else {
        k01_steed(x)
    }
}

fn i01_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    // term_k = q^k / (k!)^2 and q^k / (k! (k+1)!)
    let mut t0 = 1.0;
    let mut t1 = 1.0;
    let mut s0 = 1.0;
    let mut s1 = 1.0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        t0 *= q / (kf * kf);
        t1 *= q / (kf * (kf + 1.0));
        s0 += t0;
        s1 += t1;
        if t0 <= s0 * 1e-17 && t1 <= s1 * 1e-17 {
            break;
        }
    }
    (s0, 0.5 * x * s1)
}

fn i01_asymptotic(x: f64) -> (f64, f64) {
    // I_ν(x) ~ e^x / sqrt(2πx) Σ (-1)^k a_k(ν) / x^k
    let series = |nu: f64| {
        let m = 4.0 * nu * nu;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            let kf = k as f64;
            let next = -term * (m - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
            if next.abs() >= term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    };
    let pre = x.exp() / (2.0 * PI * x).sqrt();
    (pre * series(0.0), pre * series(1.0))
}

fn k01_series(x: f64) -> (f64, f64) {
    let (i0, i1) = i01_series(x);
    let q = 0.25 * x * x;
    let ln_half = (0.5 * x).ln();

    // K0: Σ_{k≥1} H_k q^k / (k!)^2
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut s0 = 0.0;
    // K1: Σ_{k≥0} (ψ(k+1) + ψ(k+2)) q^k / (k! (k+1)!)
    let mut term1 = 1.0;
    let mut s1 = 2.0 * (-EULER_GAMMA) + 1.0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        harmonic += 1.0 / kf;
        term *= q / (kf * kf);
        s0 += harmonic * term;
        term1 *= q / (kf * (kf + 1.0));
        let psi_sum = 2.0 * (harmonic - EULER_GAMMA) + 1.0 / (kf + 1.0);
        s1 += psi_sum * term1;
        if term * harmonic < 1e-18 * s0.abs().max(1e-300) && term1 < 1e-18 {
            break;
        }
    }
    let k0 = -(ln_half + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + ln_half * i1 - 0.25 * x * s1;
    (k0, k1)
}

fn k01_steed(x: f64) -> (f64, f64) {
    // order μ = 0; a1 = 1/4 - μ^2
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_TERMS {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

fn check_positive(function: &'static str, arg: f64) -> Result<(), SpecfunError> {
    if arg > 0.0 && arg.is_finite() {
        Ok(())
    } else {
        Err(SpecfunError::Domain { function, arg })
    }
}

/// `β(λ) = (γ + log(√λ / 2)) / (2π)`, the constant term of `G_λ` at the origin.
pub fn beta(lambda: f64) -> Result<f64, SpecfunError> {
    check_positive("beta", lambda)?;
    Ok((EULER_GAMMA + (0.5 * lambda.sqrt()).ln()) / (2.0 * PI))
}

/// Green function `G_λ(r) = K₀(√λ r) / (2π)`.
pub fn green(lambda: f64, r: f64) -> Result<f64, SpecfunError> {
    check_positive("green", lambda)?;
    check_positive("green", r)?;
    Ok(bessel_k(0, lambda.sqrt() * r)? / (2.0 * PI))
}

/// Radial derivative `G_λ'(r) = -√λ K₁(√λ r) / (2π)`.
pub fn green_derivative(lambda: f64, r: f64) -> Result<f64, SpecfunError> {
    check_positive("green_derivative", lambda)?;
    check_positive("green_derivative", r)?;
    let s = lambda.sqrt();
    Ok(-s * bessel_k(1, s * r)? / (2.0 * PI))
}

/// `G_λ(r) + log(r)/(2π) + β(λ)`, which vanishes like `O(r² log r)` at the origin.
pub fn green_defect(lambda: f64, r: f64) -> Result<f64, SpecfunError> {
    let g = green(lambda, r)?;
    Ok(g + r.ln() / (2.0 * PI) + beta(lambda)?)
}

/// `F_λ(r) = I₀(√λ r)`, the fundamental solution regular at the origin.
pub fn regular_solution(lambda: f64, r: f64) -> Result<f64, SpecfunError> {
    check_positive("regular_solution", lambda)?;
    bessel_i(0, lambda.sqrt() * r)
}

/// `F_λ'(r) = √λ I₁(√λ r)`.
pub fn regular_solution_derivative(lambda: f64, r: f64) -> Result<f64, SpecfunError> {
    check_positive("regular_solution_derivative", lambda)?;
    let s = lambda.sqrt();
    Ok(s * bessel_i(1, s * r)?)
}
