//! Problem parameters, sampled radial profiles and the action/Nehari
//! functionals built on the decomposition `u = f + y·G`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::numerics::{corrected_trapezoid, derivative, gauss_legendre, QuinticHermite};
use crate::specfun::{self, SpecfunError, EULER_GAMMA};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("SubcriticalLambda: lambda = {lambda} does not exceed |e_alpha| = {bound}")]
    SubcriticalLambda { lambda: f64, bound: f64 },
    #[error("BadExponent: p = {p} must exceed 1")]
    BadExponent { p: f64 },
    #[error("NonFinite: parameter {name} is not finite")]
    NonFinite { name: &'static str },
    #[error("BadProfile: {0}")]
    BadProfile(String),
    #[error("TailTruncation: |u(r_max)| = {value} exceeds {tolerance}")]
    TailTruncation { value: f64, tolerance: f64 },
    #[error("DegenerateProfile: {0}")]
    DegenerateProfile(&'static str),
    #[error(transparent)]
    Special(#[from] SpecfunError),
}

/// The unique negative eigenvalue of the point-interaction Laplacian.
pub fn negative_eigenvalue(alpha: f64) -> f64 {
    -4.0 * (-4.0 * PI * alpha - 2.0 * EULER_GAMMA).exp()
}

/// `(γ + ln(√λ/2)) / 2π`.
pub fn beta(lambda: f64) -> Result<f64, ModelError> {
    Ok(specfun::beta(lambda)?)
}

/// Validated problem triple with cached derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    p: f64,
    lambda: f64,
    alpha: f64,
    e_alpha: f64,
    beta: f64,
}

impl Params {
    pub fn new(p: f64, lambda: f64, alpha: f64) -> Result<Self, ModelError> {
        for (name, v) in [("p", p), ("lambda", lambda), ("alpha", alpha)] {
            if !v.is_finite() {
                return Err(ModelError::NonFinite { name });
            }
        }
        if p <= 1.0 {
            return Err(ModelError::BadExponent { p });
        }
        let e_alpha = negative_eigenvalue(alpha);
        if lambda <= e_alpha.abs() {
            return Err(ModelError::SubcriticalLambda {
                lambda,
                bound: e_alpha.abs(),
            });
        }
        Ok(Self {
            p,
            lambda,
            alpha,
            e_alpha,
            beta: beta(lambda)?,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn e_alpha(&self) -> f64 {
        self.e_alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    /// `α + β(λ)`, strictly positive for valid parameters.
    pub fn coupling(&self) -> f64 {
        self.alpha + self.beta
    }
    /// `(p − 1) / (2(p + 1))`.
    pub fn c_p(&self) -> f64 {
        (self.p - 1.0) / (2.0 * (self.p + 1.0))
    }
    /// The constant equilibrium `λ^{1/(p−1)}`.
    pub fn equilibrium(&self) -> f64 {
        self.lambda.powf(1.0 / (self.p - 1.0))
    }
}

/// Checks `(p, λ, α)` and caches `e_α`, `β(λ)`.
pub fn validate(p: f64, lambda: f64, alpha: f64) -> Result<Params, ModelError> {
    Params::new(p, lambda, alpha)
}

/// Linear far field `u ≈ A·K₀(κ r)` beyond the last grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub amplitude: f64,
    pub rate: f64,
}

/// A radial profile sampled on a strictly increasing grid, interpolated
/// by quintic Hermite pieces. Below `r[0]` the log asymptote with strength
/// `y_u` is used; above `r_max` the optional tail.
#[derive(Debug, Clone)]
pub struct GridProfile {
    r: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    y_u: f64,
    tail: Option<Tail>,
    interp: QuinticHermite,
}

impl GridProfile {
    /// Builds a profile; nodal second derivatives come from differencing `du`.
    pub fn new(r: Vec<f64>, u: Vec<f64>, du: Vec<f64>, y_u: f64) -> Result<Self, ModelError> {
        Self::check(&r, &u, &du)?;
        let d2u = derivative(&r, &du);
        Self::with_second_derivative(r, u, du, d2u, y_u)
    }

    /// Builds a profile with known nodal second derivatives.
    pub fn with_second_derivative(
        r: Vec<f64>,
        u: Vec<f64>,
        du: Vec<f64>,
        d2u: Vec<f64>,
        y_u: f64,
    ) -> Result<Self, ModelError> {
        Self::check(&r, &u, &du)?;
        if d2u.len() != r.len() {
            return Err(ModelError::BadProfile("length mismatch".into()));
        }
        let interp = QuinticHermite::new(r.clone(), u.clone(), du.clone(), d2u);
        Ok(Self {
            r,
            u,
            du,
            y_u,
            tail: None,
            interp,
        })
    }

    fn check(r: &[f64], u: &[f64], du: &[f64]) -> Result<(), ModelError> {
        if r.len() < 5 {
            return Err(ModelError::BadProfile("need at least five grid points".into()));
        }
        if u.len() != r.len() || du.len() != r.len() {
            return Err(ModelError::BadProfile("length mismatch".into()));
        }
        if !(r[0] > 0.0) || r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ModelError::BadProfile("grid must be positive and strictly increasing".into()));
        }
        if u.iter().chain(du).any(|v| !v.is_finite()) {
            return Err(ModelError::BadProfile("non-finite samples".into()));
        }
        Ok(())
    }

    pub fn with_tail(mut self, tail: Tail) -> Self {
        self.tail = Some(tail);
        self
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }
    pub fn u(&self) -> &[f64] {
        &self.u
    }
    pub fn du(&self) -> &[f64] {
        &self.du
    }
    pub fn y_u(&self) -> f64 {
        self.y_u
    }
    pub fn tail(&self) -> Option<Tail> {
        self.tail
    }
    pub fn r_min(&self) -> f64 {
        self.r[0]
    }
    pub fn r_max(&self) -> f64 {
        *self.r.last().unwrap()
    }
    pub fn len(&self) -> usize {
        self.r.len()
    }
    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// `(u, u′)` at any `r > 0`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let r0 = self.r[0];
        if r < r0 {
            let k = self.y_u / (2.0 * PI);
            return (self.u[0] - k * (r / r0).ln(), self.du[0] * r0 / r);
        }
        let rm = self.r_max();
        if r > rm {
            return match self.tail {
                Some(t) => tail_eval(t, r),
                None => (0.0, 0.0),
            };
        }
        self.interp.eval(r)
    }

    /// The same profile multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        let mul = |v: &[f64]| v.iter().map(|x| t * x).collect::<Vec<_>>();
        let d2u = derivative(&self.r, &self.du);
        let mut out = Self::with_second_derivative(
            self.r.clone(),
            mul(&self.u),
            mul(&self.du),
            mul(&d2u),
            t * self.y_u,
        )
        .expect("scaling preserves validity");
        out.tail = self.tail.map(|tl| Tail {
            amplitude: t * tl.amplitude,
            rate: tl.rate,
        });
        out
    }

    /// Whether `u > 0` on the grid and `u` is nonincreasing (up to `slack`).
    pub fn is_positive_decreasing(&self, slack: f64) -> bool {
        self.u.iter().all(|&v| v > 0.0) && self.u.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

fn tail_eval(t: Tail, r: f64) -> (f64, f64) {
    let x = t.rate * r;
    let k0 = specfun::bessel_k(0, x).unwrap_or(0.0);
    let k1 = specfun::bessel_k(1, x).unwrap_or(0.0);
    (t.amplitude * k0, -t.amplitude * t.rate * k1)
}

/// Coefficients of a (possibly perturbed) quadratic form
/// `∫(|∇f|² + g f²) + (α + β + k)y²` with `u = f + y·G`.
pub trait FormWeights {
    /// Linear coefficient `g(r)`.
    fn g(&self, r: f64) -> f64;
    /// Nonlinearity weight `h(r)`.
    fn h(&self, r: f64) -> f64;
    /// The singular function `G` and its derivative.
    fn singular(&self, r: f64) -> (f64, f64);
    /// Shift `k` added to the coupling `α + β(λ)`.
    fn coupling_shift(&self) -> f64 {
        0.0
    }
}

/// The unperturbed weights `g = λ`, `h = 1`, `G = G_λ`.
#[derive(Debug, Clone, Copy)]
pub struct FreeWeights {
    pub lambda: f64,
}

impl FormWeights for FreeWeights {
    fn g(&self, _r: f64) -> f64 {
        self.lambda
    }
    fn h(&self, _r: f64) -> f64 {
        1.0
    }
    fn singular(&self, r: f64) -> (f64, f64) {
        (
            specfun::green(self.lambda, r).unwrap_or(0.0),
            specfun::green_derivative(self.lambda, r).unwrap_or(0.0),
        )
    }
}

/// `f = u − y_u·G` and `f′` on the profile grid (no singular strength left).
pub fn decompose(profile: &GridProfile, weights: &dyn FormWeights) -> Result<GridProfile, ModelError> {
    let y = profile.y_u();
    let (mut f, mut df) = (Vec::with_capacity(profile.len()), Vec::with_capacity(profile.len()));
    for ((&r, &u), &du) in profile.r().iter().zip(profile.u()).zip(profile.du()) {
        let (g, dg) = weights.singular(r);
        f.push(u - y * g);
        df.push(du - y * dg);
    }
    GridProfile::new(profile.r().to_vec(), f, df, 0.0)
}

/// Regular part of `profile` against `G_λ`.
pub fn regular_part(profile: &GridProfile, params: &Params) -> Result<GridProfile, ModelError> {
    decompose(
        profile,
        &FreeWeights {
            lambda: params.lambda(),
        },
    )
}

/// Planar quadratic form, power term, action and Nehari value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "Npw")]
    pub npw: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub c_p: f64,
}

/// Largest `|u(r_max)|` accepted before the truncated tail matters.
pub const TAIL_TOLERANCE: f64 = 1e-8;

/// Evaluates the functionals with the free weights unless `weights` is given.
pub fn functionals(
    profile: &GridProfile,
    params: &Params,
    weights: Option<&dyn FormWeights>,
) -> Result<Functionals, ModelError> {
    let free = FreeWeights {
        lambda: params.lambda(),
    };
    let w: &dyn FormWeights = weights.unwrap_or(&free);
    let last = *profile.u().last().unwrap();
    if last.abs() > TAIL_TOLERANCE {
        return Err(ModelError::TailTruncation {
            value: last.abs(),
            tolerance: TAIL_TOLERANCE,
        });
    }
    let p = params.p();
    let r = profile.r();
    let f = decompose(profile, w)?;

    let quad: Vec<f64> = r
        .iter()
        .zip(f.u().iter().zip(f.du()))
        .map(|(&ri, (&fi, &dfi))| (dfi * dfi + w.g(ri) * fi * fi) * ri)
        .collect();
    let power: Vec<f64> = r
        .iter()
        .zip(profile.u())
        .map(|(&ri, &ui)| w.h(ri) * ui.abs().powf(p + 1.0) * ri)
        .collect();

    // Pieces on [0, r0]: f is smooth there, u follows the log asymptote.
    let r0 = r[0];
    let (f0, df0) = (f.u()[0], f.du()[0]);
    let quad_origin = w.g(r0) * f0 * f0 * r0 * r0 / 2.0 + df0 * df0 * r0 * r0 / 4.0;
    let (u0, y) = (profile.u()[0], profile.y_u());
    let power_origin = w.h(r0)
        * r0
        * r0
        * gauss_legendre(
            |t| (u0 + y * t / (2.0 * PI)).abs().powf(p + 1.0) * (-2.0 * t).exp(),
            0.0,
            60.0,
            240,
        );

    let q = 2.0 * PI * (corrected_trapezoid(r, &quad) + quad_origin)
        + (params.coupling() + w.coupling_shift()) * y * y;
    let npw = 2.0 * PI * (corrected_trapezoid(r, &power) + power_origin);
    Ok(Functionals {
        q,
        npw,
        s: q / 2.0 - npw / (p + 1.0),
        k: q - npw,
        c_p: params.c_p(),
    })
}

/// `σ = (Q/Npw)^{1/(p−1)}`, the factor placing `σu` on the Nehari set.
pub fn nehari_rescale(
    profile: &GridProfile,
    params: &Params,
    weights: Option<&dyn FormWeights>,
) -> Result<f64, ModelError> {
    let fl = functionals(profile, params, weights)?;
    if fl.npw <= 0.0 {
        return Err(ModelError::DegenerateProfile("power term vanishes"));
    }
    if fl.q <= 0.0 {
        return Err(ModelError::DegenerateProfile("quadratic form is not positive"));
    }
    Ok((fl.q / fl.npw).powf(1.0 / (params.p() - 1.0)))
}
