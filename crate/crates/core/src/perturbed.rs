//! Localized perturbation of the linear coefficient: the bump `χ`, the
//! perturbed fundamental solution with its constants `c₁, c₂, k`, and checks
//! that the ground state still solves the perturbed equation.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

use crate::model::{functionals, FormWeights, Functionals, GridProfile, ModelError, Params};
use crate::numerics::gauss_legendre;
use crate::ode::{dopri5, CoefficientField, FnSystem, OdeError, Tolerances, Trajectory};
use crate::pohozaev::{Jet, JetWeights, PohozaevCoefficients};
use crate::shooting::ode_residuals;
use crate::specfun::{self, SpecfunError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbedError {
    #[error("BadEpsilon: need a finite eps >= 0, got {0}")]
    BadEpsilon(f64),
    #[error("DecompositionFailure: {0}")]
    DecompositionFailure(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Special(#[from] SpecfunError),
}

/// Support of the bump.
pub const CHI_SUPPORT: (f64, f64) = (1.0, 3.0);

/// `exp(1 − 1/(1 − (r−2)²))` on `|r − 2| < 1`, zero elsewhere.
pub fn chi(r: f64) -> f64 {
    let s = r - 2.0;
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// Taylor jet of [`chi`] at `r`.
pub fn chi_jet(r: f64) -> Jet {
    let s = r - 2.0;
    if s.abs() >= 1.0 {
        return Jet::constant(0.0);
    }
    let x = Jet::variable(r) + (-2.0);
    let inner = (x * x * -1.0 + 1.0).recip();
    (inner * -1.0 + 1.0).exp()
}

/// Ground state together with the perturbation size.
#[derive(Debug, Clone)]
pub struct PerturbedSetup {
    params: Params,
    eps: f64,
    ground: Arc<GridProfile>,
}

impl PerturbedSetup {
    pub fn new(params: Params, eps: f64, ground: GridProfile) -> Result<Self, PerturbedError> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(PerturbedError::BadEpsilon(eps));
        }
        Ok(Self {
            params,
            eps,
            ground: Arc::new(ground),
        })
    }
    pub fn with_eps(&self, eps: f64) -> Result<Self, PerturbedError> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(PerturbedError::BadEpsilon(eps));
        }
        Ok(Self { eps, ..self.clone() })
    }
    pub fn params(&self) -> &Params {
        &self.params
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn ground(&self) -> &GridProfile {
        &self.ground
    }
    fn u_pow(&self, r: f64) -> f64 {
        self.ground.eval(r).0.abs().powf(self.params.p() - 1.0)
    }
    /// `λ + ε χ u^{p−1}`.
    pub fn g_eps(&self, r: f64) -> f64 {
        let c = chi(r);
        if c == 0.0 {
            return self.params.lambda();
        }
        self.params.lambda() + self.eps * c * self.u_pow(r)
    }
    /// `1 + ε χ`.
    pub fn h_eps(&self, r: f64) -> f64 {
        1.0 + self.eps * chi(r)
    }
    pub fn field(&self) -> CoefficientField {
        let (a, b) = (self.clone(), self.clone());
        CoefficientField::new(move |r| a.g_eps(r), move |r| b.h_eps(r))
    }
}

impl JetWeights for PerturbedSetup {
    fn g(&self, r: f64) -> Jet {
        let c = chi_jet(r);
        let lambda = self.params.lambda();
        if c.value() == 0.0 {
            return Jet::constant(lambda);
        }
        let p = self.params.p();
        let (u, du) = self.ground.eval(r);
        let d2u = -du / r + lambda * u - u.abs().powf(p - 1.0) * u;
        let uj = Jet([u, du, 0.5 * d2u, 0.0, 0.0]);
        c * uj.powf(p - 1.0) * self.eps + lambda
    }
    fn h(&self, r: f64) -> Jet {
        chi_jet(r) * self.eps + 1.0
    }
}

/// Perturbed fundamental solution `G̃/c₁` and its constants.
#[derive(Debug, Clone)]
pub struct PerturbedGreen {
    pub c1: f64,
    pub c2: f64,
    pub k: f64,
    lambda: f64,
    /// `G̃` integrated from `r = 3` down to `r_lo`.
    traj: Trajectory,
}

impl PerturbedGreen {
    pub fn r_lo(&self) -> f64 {
        self.traj.t_end()
    }
    /// `(G̃, G̃′)`: `G_λ` on `[3, ∞)`, the integrated solution on `[r_lo, 3]`
    /// and `c₁G_λ + c₂F_λ` below `r_lo`.
    pub fn tilde(&self, r: f64) -> (f64, f64) {
        let l = self.lambda;
        if r >= CHI_SUPPORT.1 {
            (
                specfun::green(l, r).unwrap_or(0.0),
                specfun::green_derivative(l, r).unwrap_or(0.0),
            )
        } else if r >= self.r_lo() {
            let y = self.traj.eval(r);
            (y[0], y[1])
        } else {
            let g = specfun::green(l, r).unwrap_or(f64::NAN);
            let dg = specfun::green_derivative(l, r).unwrap_or(f64::NAN);
            let f = specfun::regular_solution(l, r).unwrap_or(f64::NAN);
            let df = specfun::regular_solution_derivative(l, r).unwrap_or(f64::NAN);
            (self.c1 * g + self.c2 * f, self.c1 * dg + self.c2 * df)
        }
    }
    /// `(G_{λ,ε}, G′_{λ,ε}) = (G̃, G̃′)/c₁`.
    pub fn value(&self, r: f64) -> (f64, f64) {
        let (a, b) = self.tilde(r);
        (a / self.c1, b / self.c1)
    }
}

/// Default inner end of the backward integration.
pub const GREEN_R_LO: f64 = 1e-5;

/// Solves `−G̃″ − G̃′/r + g_ε G̃ = 0` backward from `r = 3` with `G_λ` data,
/// then forms `c₁, c₂` from the variation-of-parameters integrals over `[1, 3]`.
pub fn green_perturbed(setup: &PerturbedSetup, r_lo: f64) -> Result<PerturbedGreen, PerturbedError> {
    let l = setup.params.lambda();
    let r3 = CHI_SUPPORT.1;
    let y0 = [specfun::green(l, r3)?, specfun::green_derivative(l, r3)?];
    let sys = FnSystem {
        dim: 2,
        f: |r: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[1] / r + setup.g_eps(r) * y[0];
        },
    };
    let traj = dopri5(&sys, r3, &y0, r_lo, &Tolerances::new(1e-13, 1e-15), &[])?;
    let f = |s: f64| setup.eps * chi(s) * setup.u_pow(s) * traj.eval(s)[0];
    let (a, b) = CHI_SUPPORT;
    let c1 = 1.0 + 2.0 * PI * gauss_legendre(|s| s * specfun::regular_solution(l, s).unwrap_or(f64::NAN) * f(s), a, b, 200);
    let c2 = -2.0 * PI * gauss_legendre(|s| s * specfun::green(l, s).unwrap_or(f64::NAN) * f(s), a, b, 200);
    if !(c1.is_finite() && c2.is_finite()) {
        return Err(PerturbedError::Ode(OdeError::NonFinite { t: a }));
    }
    Ok(PerturbedGreen {
        c1,
        c2,
        k: -c2 / c1,
        lambda: l,
        traj,
    })
}

/// Numerical properties of the perturbed Green function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreenChecks {
    /// `max |G̃ − G_λ| / G_λ` on sampled `[3, r_max]`, with `G̃` integrated
    /// inward through the perturbed equation from `r_max`.
    pub tilde_outer_match: f64,
    /// `G_{λ,ε}/G_λ` on `[3, ∞)`, which is `1/c₁`.
    pub outer_ratio: f64,
    /// `max |G_{λ,ε} − (c₂/c₁)F_λ − G_λ| / G_λ` on `[r_lo, 1]` from the integrated solution.
    pub inner_match: f64,
    /// `G_λ − G_{λ,ε}` at `1e-3` and `1e-4`, and its extrapolation to `r = 0`.
    pub origin_differences: [f64; 2],
    pub k_extrapolated: f64,
    /// `(c₁, c₂)` fitted from `G̃` at `r = 0.1` and `r = 0.9`.
    pub fitted: [f64; 2],
    pub fitted_relative_error: f64,
    pub positive_decreasing: bool,
}

pub fn check_green(setup: &PerturbedSetup, green: &PerturbedGreen, r_max: f64) -> Result<GreenChecks, PerturbedError> {
    let l = green.lambda;
    let g = |r: f64| specfun::green(l, r);
    let f = |r: f64| specfun::regular_solution(l, r);

    // On [3, r_max] the perturbed equation is the free one; integrating it
    // inward from G_λ data at r_max must stay on G_λ (the stable direction).
    let r3 = CHI_SUPPORT.1;
    let sys = FnSystem {
        dim: 2,
        f: |r: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[1] / r + setup.g_eps(r) * y[0];
        },
    };
    let start = [g(r_max)?, specfun::green_derivative(l, r_max)?];
    let inward = dopri5(&sys, r_max, &start, r3, &Tolerances::new(1e-13, 1e-300), &[])?;
    let mut tilde_outer_match = 0.0f64;
    let samples = 200;
    for i in 0..=samples {
        let r = r3 + (r_max - r3) * i as f64 / samples as f64;
        let gr = g(r)?;
        tilde_outer_match = tilde_outer_match.max((inward.eval(r)[0] - gr).abs() / gr);
    }
    let outer_ratio = green.value(r3 + 1.0).0 / g(r3 + 1.0)?;

    let mut inner_match = 0.0f64;
    let (la, lb) = (green.r_lo().ln(), 0.0);
    for i in 0..=samples {
        let r = (la + (lb - la) * i as f64 / samples as f64).exp();
        let (v, _) = green.value(r);
        let gr = g(r)?;
        inner_match = inner_match.max((v - green.c2 / green.c1 * f(r)? - gr).abs() / gr);
    }

    let d = |r: f64| -> Result<f64, PerturbedError> { Ok(g(r)? - green.value(r).0) };
    let (ra, rb) = (1e-3, 1e-4);
    let (da, db) = (d(ra)?, d(rb)?);
    // The difference is even and smooth, so extrapolate in r².
    let k_extrapolated = (db * ra * ra - da * rb * rb) / (ra * ra - rb * rb);

    let (r1, r2) = (0.1, 0.9);
    let (a11, a12, a21, a22) = (g(r1)?, f(r1)?, g(r2)?, f(r2)?);
    let (b1, b2) = (green.tilde(r1).0, green.tilde(r2).0);
    let det = a11 * a22 - a12 * a21;
    let fitted = [(b1 * a22 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det];
    let fitted_relative_error =
        ((fitted[0] - green.c1) / green.c1).abs().max(((fitted[1] - green.c2) / green.c2).abs());

    let nodes: Vec<f64> = (0..=400)
        .map(|i| (green.r_lo().ln() + (r3.ln() - green.r_lo().ln()) * i as f64 / 400.0).exp())
        .collect();
    let positive_decreasing = nodes
        .iter()
        .all(|&r| green.tilde(r).0 > 0.0 && green.tilde(r).1 < 0.0)
        && nodes.windows(2).all(|w| green.tilde(w[1]).0 < green.tilde(w[0]).0);

    Ok(GreenChecks {
        tilde_outer_match,
        outer_ratio,
        inner_match,
        origin_differences: [da, db],
        k_extrapolated,
        fitted,
        fitted_relative_error: if green.c2 == 0.0 {
            (fitted[0] - green.c1).abs().max(fitted[1].abs())
        } else {
            fitted_relative_error
        },
        positive_decreasing,
    })
}

/// Residual of `profile` in the perturbed equation, normalized like the
/// unperturbed one (largest interior value over `max λu`).
pub fn residual_of_ground_state(setup: &PerturbedSetup, profile: &GridProfile) -> f64 {
    let res = ode_residuals(profile, &setup.field(), setup.params.p());
    let n = res.len();
    let scale = profile
        .u()
        .iter()
        .fold(0.0f64, |a, &b| a.max(setup.params.lambda() * b.abs()));
    res[1..n - 1].iter().fold(0.0f64, |a, &b| a.max(b)) / scale
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignScan {
    pub eps: f64,
    pub radii: Vec<f64>,
    pub c_eps: Vec<f64>,
    pub c_unperturbed: Vec<f64>,
    pub negative: usize,
    pub positive: usize,
}

impl SignScan {
    pub fn single_sign(&self) -> bool {
        self.negative == 0 || self.positive == 0
    }
    /// `-1`, `+1`, or `0` for a mixed pattern.
    pub fn sign(&self) -> i32 {
        match (self.negative, self.positive) {
            (_, 0) => -1,
            (0, _) => 1,
            _ => 0,
        }
    }
}

/// Generalized Pohožaev coefficient `C_ε` on `radii`.
pub fn perturbed_sign_scan(setup: &PerturbedSetup, radii: &[f64]) -> SignScan {
    let pert = PohozaevCoefficients::generalized(&setup.params, setup, 2.0);
    let free = PohozaevCoefficients::unperturbed(&setup.params);
    let c_eps: Vec<f64> = radii.iter().map(|&r| pert.at(r).cc).collect();
    SignScan {
        eps: setup.eps,
        radii: radii.to_vec(),
        c_unperturbed: radii.iter().map(|&r| free.at(r).cc).collect(),
        negative: c_eps.iter().filter(|&&c| c < 0.0).count(),
        positive: c_eps.iter().filter(|&&c| c > 0.0).count(),
        c_eps,
    }
}

/// Halves `ε` from the setup's value until the scan shows a single sign.
pub fn downscan(setup: &PerturbedSetup, radii: &[f64], max_halvings: usize) -> Result<(PerturbedSetup, SignScan), PerturbedError> {
    let mut s = setup.clone();
    for _ in 0..=max_halvings {
        let scan = perturbed_sign_scan(&s, radii);
        if scan.single_sign() {
            return Ok((s, scan));
        }
        s = s.with_eps(s.eps / 2.0)?;
    }
    let scan = perturbed_sign_scan(&s, radii);
    Ok((s, scan))
}

/// Form weights `g_ε`, `h_ε`, `G_{λ,ε}` with coupling shift `k`.
pub struct PerturbedWeights<'a> {
    pub setup: &'a PerturbedSetup,
    pub green: &'a PerturbedGreen,
}

impl FormWeights for PerturbedWeights<'_> {
    fn g(&self, r: f64) -> f64 {
        self.setup.g_eps(r)
    }
    fn h(&self, r: f64) -> f64 {
        self.setup.h_eps(r)
    }
    fn singular(&self, r: f64) -> (f64, f64) {
        self.green.value(r)
    }
    fn coupling_shift(&self) -> f64 {
        self.green.k
    }
}

/// Largest accepted mismatch of the `−1/(2π)` log coefficients of `G_λ`
/// and `G_{λ,ε}` at the profile's first node.
pub const STRENGTH_TOLERANCE: f64 = 1e-6;

/// Functionals of `profile` in the perturbed form, with `u = f + y G_{λ,ε}`.
pub fn perturbed_quadratic_form(
    profile: &GridProfile,
    setup: &PerturbedSetup,
    green: &PerturbedGreen,
) -> Result<Functionals, PerturbedError> {
    let r0 = profile.r_min();
    let free = r0 * specfun::green_derivative(setup.params.lambda(), r0)?;
    let pert = r0 * green.value(r0).1;
    if !((pert - free).abs() <= STRENGTH_TOLERANCE * free.abs()) {
        return Err(PerturbedError::DecompositionFailure(format!(
            "log coefficients disagree at r = {r0}: {free} vs {pert}"
        )));
    }
    let w = PerturbedWeights { setup, green };
    Ok(functionals(profile, &setup.params, Some(&w))?)
}
