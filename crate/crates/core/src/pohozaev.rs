//! Pohožaev coefficients `a, b, c, C`, the function `J[u]`, the comparison
//! function `X` and numerical checks of `J′ = C u²`.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::model::{GridProfile, Params};
use crate::ode::ratio_derivative;

/// Number of Taylor coefficients carried by [`Jet`].
pub const JET_LEN: usize = 5;

/// Truncated Taylor expansion `Σ c_k t^k` about a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet(pub [f64; JET_LEN]);

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; JET_LEN];
        c[0] = v;
        Jet(c)
    }
    /// The identity function expanded about `x`.
    pub fn variable(x: f64) -> Self {
        let mut c = [0.0; JET_LEN];
        c[0] = x;
        c[1] = 1.0;
        Jet(c)
    }
    pub fn value(&self) -> f64 {
        self.0[0]
    }
    /// `k`-th derivative at the expansion point.
    pub fn derivative_value(&self, k: usize) -> f64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.0[k] * fact
    }
    /// Derivative as a jet (the top coefficient is lost).
    pub fn d(&self) -> Self {
        let mut c = [0.0; JET_LEN];
        for k in 0..JET_LEN - 1 {
            c[k] = (k + 1) as f64 * self.0[k + 1];
        }
        Jet(c)
    }
    pub fn exp(&self) -> Self {
        let a = &self.0;
        let mut e = [0.0; JET_LEN];
        e[0] = a[0].exp();
        for k in 1..JET_LEN {
            e[k] = (1..=k).map(|j| j as f64 * a[j] * e[k - j]).sum::<f64>() / k as f64;
        }
        Jet(e)
    }
    pub fn ln(&self) -> Self {
        let a = &self.0;
        let mut l = [0.0; JET_LEN];
        l[0] = a[0].ln();
        for k in 1..JET_LEN {
            let s: f64 = (1..k).map(|j| j as f64 * l[j] * a[k - j]).sum();
            l[k] = (a[k] - s / k as f64) / a[0];
        }
        Jet(l)
    }
    /// `self^s` for a positive base.
    pub fn powf(&self, s: f64) -> Self {
        (self.ln() * s).exp()
    }
    pub fn recip(&self) -> Self {
        Jet::constant(1.0) / *self
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut c = self.0;
        c.iter_mut().zip(o.0).for_each(|(a, b)| *a += b);
        Jet(c)
    }
}
impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}
impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet(self.0.map(|v| -v))
    }
}
impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut c = [0.0; JET_LEN];
        for i in 0..JET_LEN {
            for j in 0..JET_LEN - i {
                c[i + j] += self.0[i] * o.0[j];
            }
        }
        Jet(c)
    }
}
impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        Jet(self.0.map(|v| v * s))
    }
}
impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, s: f64) -> Jet {
        let mut c = self.0;
        c[0] += s;
        Jet(c)
    }
}
impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let mut c = [0.0; JET_LEN];
        for k in 0..JET_LEN {
            let s: f64 = (0..k).map(|j| c[j] * o.0[k - j]).sum();
            c[k] = (self.0[k] - s) / o.0[0];
        }
        Jet(c)
    }
}

/// Coefficients `g`, `h` of the generalized equation as local jets.
pub trait JetWeights {
    /// Needs to be exact to first order.
    fn g(&self, r: f64) -> Jet;
    /// Needs to be exact to third order.
    fn h(&self, r: f64) -> Jet;
}

/// Values of the coefficient functions at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientValues {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    #[serde(rename = "C")]
    pub cc: f64,
    pub g: f64,
    pub h: f64,
}

/// The coefficient functions for `−u″ − (d−1)u′/r + g u − h uᵖ = 0`.
pub struct PohozaevCoefficients<'a> {
    pub q: f64,
    pub p: f64,
    pub lambda: f64,
    pub d: f64,
    weights: Option<&'a dyn JetWeights>,
}

impl<'a> PohozaevCoefficients<'a> {
    /// Closed forms for `d = 2`, `g = λ`, `h = 1`.
    pub fn unperturbed(params: &Params) -> Self {
        let p = params.p();
        Self {
            q: 2.0 * (p + 1.0) / (p + 3.0),
            p,
            lambda: params.lambda(),
            d: 2.0,
            weights: None,
        }
    }

    /// General coefficients, differentiated through jets.
    pub fn generalized(params: &Params, weights: &'a dyn JetWeights, d: f64) -> Self {
        Self {
            weights: Some(weights),
            d,
            ..Self::unperturbed(params)
        }
    }

    pub fn at(&self, r: f64) -> CoefficientValues {
        match self.weights {
            None => {
                let q = self.q;
                let l = self.lambda;
                CoefficientValues {
                    a: r.powf(q),
                    b: (1.0 - q / 2.0) * r.powf(q - 1.0),
                    c: 0.5 * (2.0 - q).powi(2) * r.powf(q - 2.0),
                    cc: -0.25 * (2.0 - q).powi(3) * r.powf(q - 3.0) - (q - 1.0) * l * r.powf(q - 1.0),
                    g: l,
                    h: 1.0,
                }
            }
            Some(w) => {
                let (p, d) = (self.p, self.d);
                let x = Jet::variable(r);
                let (g, h) = (w.g(r), w.h(r));
                let a = x.powf((d - 1.0) * 2.0 * (p + 1.0) / (p + 3.0)) * h.powf(-2.0 / (p + 3.0));
                let b = a * x.recip() * (d - 1.0) - a.d() * 0.5;
                let c = b * x.recip() * (d - 1.0) - b.d();
                let cc = b * g + (c - a * g).d() * 0.5;
                CoefficientValues {
                    a: a.value(),
                    b: b.value(),
                    c: c.value(),
                    cc: cc.value(),
                    g: g.value(),
                    h: h.value(),
                }
            }
        }
    }
}

/// `J` from point values of `u`, `u′`.
pub fn j_value(k: &CoefficientValues, p: f64, u: f64, du: f64) -> f64 {
    0.5 * k.a * du * du
        + k.b * du * u
        + 0.5 * (k.c - k.a * k.g) * u * u
        + k.a * k.h * u.abs().powf(p + 1.0) / (p + 1.0)
}

/// `J[u](r)` for a profile.
pub fn j(profile: &GridProfile, coeffs: &PohozaevCoefficients, r: f64) -> f64 {
    let (u, du) = profile.eval(r);
    j_value(&coeffs.at(r), coeffs.p, u, du)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PohozaevTrace {
    pub radii: Vec<f64>,
    pub j: Vec<f64>,
    pub cu2: Vec<f64>,
    /// `|dJ/dr − C u²|` by centered differences.
    pub residual: Vec<f64>,
    /// `max residual · r / max |J|` style normalization: see [`verify_identity`].
    pub max_normalized_residual: f64,
    pub min_j: f64,
    pub eta: f64,
}

/// Default relative half-width of the centered difference for `dJ/dr`.
pub const DEFAULT_ETA: f64 = 2e-3;

/// Checks `J′ = C u²` at `radii` with step `η r`. The reported maximum is
/// `max |dJ/dr − C u²|·r` over `max |J|`, a scale-free measure since `J`
/// behaves like a power of `r` near the origin.
pub fn verify_identity(
    profile: &GridProfile,
    coeffs: &PohozaevCoefficients,
    radii: &[f64],
    eta: f64,
) -> PohozaevTrace {
    let mut jv = Vec::with_capacity(radii.len());
    let mut cu2 = Vec::with_capacity(radii.len());
    let mut residual = Vec::with_capacity(radii.len());
    let mut worst = 0.0f64;
    for &r in radii {
        let h = eta * r;
        let dj = (j(profile, coeffs, r + h) - j(profile, coeffs, r - h)) / (2.0 * h);
        let (u, _) = profile.eval(r);
        let c = coeffs.at(r).cc * u * u;
        jv.push(j(profile, coeffs, r));
        cu2.push(c);
        residual.push((dj - c).abs());
        worst = worst.max((dj - c).abs() * r);
    }
    let jmax = jv.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let min_j = jv.iter().copied().fold(f64::INFINITY, f64::min);
    PohozaevTrace {
        radii: radii.to_vec(),
        j: jv,
        cu2,
        residual,
        max_normalized_residual: if jmax > 0.0 { worst / jmax } else { worst },
        min_j,
        eta,
    }
}

/// `X = w² J[u] − J[v]` with `w = v/u`, from the definition.
pub fn x_definition(u: &GridProfile, v: &GridProfile, coeffs: &PohozaevCoefficients, r: f64) -> f64 {
    let (uu, _) = u.eval(r);
    let (vv, _) = v.eval(r);
    let w = vv / uu;
    w * w * j(u, coeffs, r) - j(v, coeffs, r)
}

/// `X` from the expanded form with `w′` from the integral representation.
pub fn x_formula(u: &GridProfile, v: &GridProfile, coeffs: &PohozaevCoefficients, r: f64) -> f64 {
    let p = coeffs.p;
    let k = coeffs.at(r);
    let (uu, du) = u.eval(r);
    let (vv, dv) = v.eval(r);
    let w = vv / uu;
    let dw = ratio_derivative(u, v, p, r);
    -0.5 * k.a * (du * vv + uu * dv) * dw - k.b * uu * vv * dw
        + k.a / (p + 1.0) * uu.abs().powf(p - 1.0) * vv * vv * (1.0 - w.abs().powf(p - 1.0))
}

/// Disagreement of the two expressions of `X` at `r`, relative to the
/// largest of `|X|`, `w²|J[u]|` and `|J[v]|`. Near the origin `X` is a small
/// difference of the two `J` terms, so measuring against `|X|` alone would
/// only report the cancellation error of the definition.
pub fn x_selfcheck(u: &GridProfile, v: &GridProfile, coeffs: &PohozaevCoefficients, r: f64) -> f64 {
    let (uu, _) = u.eval(r);
    let (vv, _) = v.eval(r);
    let w = vv / uu;
    let ju = w * w * j(u, coeffs, r);
    let jv = j(v, coeffs, r);
    let a = ju - jv;
    let b = x_formula(u, v, coeffs, r);
    let scale = a.abs().max(b.abs()).max(ju.abs()).max(jv.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Relative mismatch between a centered difference of `X` and `2 w w′ J[u]`.
pub fn x_derivative_check(
    u: &GridProfile,
    v: &GridProfile,
    coeffs: &PohozaevCoefficients,
    r: f64,
    eta: f64,
) -> f64 {
    let h = eta * r;
    let dx = (x_definition(u, v, coeffs, r + h) - x_definition(u, v, coeffs, r - h)) / (2.0 * h);
    let (uu, _) = u.eval(r);
    let (vv, _) = v.eval(r);
    let expected = 2.0 * (vv / uu) * ratio_derivative(u, v, coeffs.p, r) * j(u, coeffs, r);
    (dx - expected).abs() / expected.abs().max(dx.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;
    use crate::numerics::geomspace;
    use crate::shooting::{shot_profile, solve, ShootingConfig};
    use proptest::prelude::*;

    struct Free(f64);
    impl JetWeights for Free {
        fn g(&self, _r: f64) -> Jet {
            Jet::constant(self.0)
        }
        fn h(&self, _r: f64) -> Jet {
            Jet::constant(1.0)
        }
    }

    #[test]
    fn jet_arithmetic_matches_calculus() {
        let x = Jet::variable(0.7);
        let f = (x * x + 1.0).ln() / x.exp() + x.powf(1.5);
        // Oracle derivatives of ln(1+x²)e^{-x} + x^{3/2} by central differences.
        let g = |t: f64| (t * t + 1.0).ln() * (-t).exp() + t.powf(1.5);
        let h = 1e-3;
        let d1 = (g(0.7 + h) - g(0.7 - h)) / (2.0 * h);
        let d2 = (g(0.7 + h) - 2.0 * g(0.7) + g(0.7 - h)) / (h * h);
        assert!((f.value() - g(0.7)).abs() < 1e-15);
        assert!((f.derivative_value(1) - d1).abs() < 1e-6);
        assert!((f.derivative_value(2) - d2).abs() < 1e-5);
        let e = x.exp();
        for k in 0..JET_LEN {
            assert!((e.derivative_value(k) - 0.7f64.exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn closed_forms_for_cubic() {
        let params = validate(3.0, 2.0, 0.0).unwrap();
        let k = PohozaevCoefficients::unperturbed(&params);
        assert!((k.q - 4.0 / 3.0).abs() < 1e-15);
        let v = k.at(1.0);
        assert_eq!(v.a, 1.0);
        // C(1) = bλ + (c − aλ)′/2 with a = r^{4/3}: −(1/4)(2/3)³ − (1/3)·2.
        assert!((v.cc + 20.0 / 27.0).abs() < 1e-14, "{}", v.cc);
        let r = 2.5f64;
        assert!((k.at(r).a - r.powf(4.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn generalized_reduces_to_closed_form() {
        for p in [1.5, 2.0, 3.0, 5.0] {
            let params = validate(p, 2.0, 0.0).unwrap();
            let free = Free(2.0);
            let closed = PohozaevCoefficients::unperturbed(&params);
            let gen = PohozaevCoefficients::generalized(&params, &free, 2.0);
            for r in [1e-3, 0.1, 1.0, 7.0] {
                let (x, y) = (closed.at(r), gen.at(r));
                for (s, t) in [(x.a, y.a), (x.b, y.b), (x.c, y.c), (x.cc, y.cc)] {
                    assert!((s - t).abs() <= 1e-12 * s.abs().max(1e-300), "p={p} r={r} {s} {t}");
                }
            }
        }
    }

    #[test]
    fn c_negative_on_log_grid() {
        for p in [1.5, 2.0, 3.0, 5.0] {
            let params = validate(p, 2.0, 0.0).unwrap();
            let k = PohozaevCoefficients::unperturbed(&params);
            for r in geomspace(1e-6, 1e3, 400) {
                assert!(k.at(r).cc < 0.0, "p={p} r={r}");
            }
        }
    }

    #[test]
    fn zero_profile_has_zero_j() {
        let params = validate(3.0, 2.0, 0.0).unwrap();
        let r = geomspace(1e-3, 5.0, 50);
        let n = r.len();
        let prof = GridProfile::new(r, vec![0.0; n], vec![0.0; n], 0.0).unwrap();
        let k = PohozaevCoefficients::unperturbed(&params);
        assert_eq!(j(&prof, &k, 1.0), 0.0);
    }

    #[test]
    fn identity_on_ground_state_and_gaussian_control() {
        let params = validate(3.0, 2.0, 0.0).unwrap();
        let res = solve(&params, &ShootingConfig::default()).unwrap();
        let k = PohozaevCoefficients::unperturbed(&params);
        let radii = geomspace(1e-3, 10.0, 200);
        let tr = verify_identity(&res.profile, &k, &radii, DEFAULT_ETA);
        assert!(tr.max_normalized_residual <= 1e-5, "{}", tr.max_normalized_residual);
        assert!(tr.min_j > 0.0);
        let half = verify_identity(&res.profile, &k, &radii, DEFAULT_ETA / 2.0);
        let ratio = tr.max_normalized_residual / half.max_normalized_residual;
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");

        let r = geomspace(1e-3, 10.0, 2000);
        let u: Vec<f64> = r.iter().map(|x| (-x * x).exp()).collect();
        let du: Vec<f64> = r.iter().map(|x| -2.0 * x * (-x * x).exp()).collect();
        let gauss = GridProfile::new(r, u, du, 0.0).unwrap();
        let bad = verify_identity(&gauss, &k, &geomspace(0.05, 3.0, 100), DEFAULT_ETA);
        assert!(bad.max_normalized_residual > 1e-2, "{}", bad.max_normalized_residual);
    }

    #[test]
    fn halved_cubic_term_breaks_identity() {
        // Same residual as verify_identity, with −(2−q)³/2 in place of −(2−q)³/4.
        let params = validate(3.0, 2.0, 0.0).unwrap();
        let res = solve(&params, &ShootingConfig::default()).unwrap();
        let k = PohozaevCoefficients::unperturbed(&params);
        let q = k.q;
        let radii = geomspace(1e-3, 10.0, 200);
        let mut worst = 0.0f64;
        let mut jmax = 0.0f64;
        for &r in &radii {
            let h = DEFAULT_ETA * r;
            let dj = (j(&res.profile, &k, r + h) - j(&res.profile, &k, r - h)) / (2.0 * h);
            let (u, _) = res.profile.eval(r);
            let alt = -0.5 * (2.0 - q).powi(3) * r.powf(q - 3.0) - (q - 1.0) * 2.0 * r.powf(q - 1.0);
            worst = worst.max((dj - alt * u * u).abs() * r);
            jmax = jmax.max(j(&res.profile, &k, r).abs());
        }
        assert!(worst / jmax > 1e-2, "{}", worst / jmax);
    }

    #[test]
    fn x_forms_agree_and_vanish_on_diagonal() {
        let params = validate(3.0, 2.0, 0.0).unwrap();
        let cfg = ShootingConfig::default();
        let (u, _) = shot_profile(&params, 3.0, &cfg).unwrap();
        let (v, _) = shot_profile(&params, 3.3, &cfg).unwrap();
        let k = PohozaevCoefficients::unperturbed(&params);
        assert_eq!(x_definition(&u, &u, &k, 0.5), 0.0);
        for r in [1e-3, 0.01, 0.1, 0.5, 1.0, 1.4] {
            assert!(x_selfcheck(&u, &v, &k, r) < 1e-8, "r={r} {}", x_selfcheck(&u, &v, &k, r));
        }
        for r in [0.05, 0.3, 1.0] {
            let e = x_derivative_check(&u, &v, &k, r, DEFAULT_ETA);
            assert!(e < 1e-4, "r={r} {e}");
        }
        assert!(x_definition(&u, &v, &k, 1e-4).abs() < x_definition(&u, &v, &k, 0.1).abs());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn q_in_unit_interval(p in 1.0001f64..50.0) {
            let params = validate(p, 3.0, 0.0).unwrap();
            let q = PohozaevCoefficients::unperturbed(&params).q;
            prop_assert!(q > 1.0 && q < 2.0);
        }

        #[test]
        fn c_negative_random(p in 1.01f64..9.0, r in 1e-6f64..1e3, l in 1.3f64..50.0) {
            let params = validate(p, l, 0.0).unwrap();
            prop_assert!(PohozaevCoefficients::unperturbed(&params).at(r).cc < 0.0);
        }
    }
}
