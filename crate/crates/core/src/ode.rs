//! Radial ODE machinery: an adaptive Dormand–Prince 5(4) integrator with
//! dense output and event location, the Picard bootstrap that carries the
//! log-singular data off the origin, and a few trajectory diagnostics.

use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

use crate::model::{GridProfile, ModelError, Params};
use crate::numerics::{derivative, gauss_legendre};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("StepUnderflow: step size collapsed at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("NonFinite: state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("MaxSteps: step budget exhausted at t = {t}")]
    MaxSteps { t: f64 },
    #[error("NoConvergence: Picard iteration stalled after {iterations} sweeps (r0 = {r0})")]
    NoConvergence { iterations: usize, r0: f64 },
    #[error("NoDecay: {0}")]
    NoDecay(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A first-order system `y′ = F(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

/// Adapter turning a closure into an [`OdeSystem`].
pub struct FnSystem<F: Fn(f64, &[f64], &mut [f64])> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.f)(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 2_000_000,
        }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }
}

/// A scalar event function; it fires where it first becomes `≤ 0`.
pub type EventFn<'a> = &'a dyn Fn(f64, &[f64]) -> f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Reached,
    Event { index: usize, t: f64 },
}

/// Accepted steps with their dense-output coefficients.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    t: Vec<f64>,
    h: Vec<f64>,
    y: Vec<f64>,
    cont: Vec<f64>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn t_start(&self) -> f64 {
        self.t[0]
    }
    pub fn t_end(&self) -> f64 {
        *self.t.last().unwrap()
    }
    pub fn steps(&self) -> usize {
        self.t.len() - 1
    }
    /// Node times (step boundaries).
    pub fn nodes(&self) -> &[f64] {
        &self.t
    }
    pub fn final_state(&self) -> Vec<f64> {
        self.node_state(self.t.len() - 1)
    }
    pub fn node_state(&self, k: usize) -> Vec<f64> {
        self.y[k * self.dim..(k + 1) * self.dim].to_vec()
    }

    /// Dense-output state at `t` (clamped to the integrated range).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let n = self.t.len();
        if n == 1 {
            return self.node_state(0);
        }
        let forward = self.t[1] > self.t[0];
        let key = |v: f64| if forward { v } else { -v };
        let tk = key(t).clamp(key(self.t[0]), key(self.t[n - 1]));
        let mut i = self.t.partition_point(|&s| key(s) <= tk);
        i = i.clamp(1, n - 1) - 1;
        let tc = if forward { tk } else { -tk };
        let theta = ((tc - self.t[i]) / self.h[i]).clamp(0.0, 1.0);
        dense_eval(&self.cont[i * 5 * self.dim..(i + 1) * 5 * self.dim], self.dim, theta)
    }
}

fn dense_eval(c: &[f64], dim: usize, th: f64) -> Vec<f64> {
    let th1 = 1.0 - th;
    (0..dim)
        .map(|j| {
            let r = |m: usize| c[m * dim + j];
            r(0) + th * (r(1) + th1 * (r(2) + th * (r(3) + th1 * r(4))))
        })
        .collect()
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `sys` from `(t0, y0)` to `t_end` (either direction).
/// Stops early at the first event that becomes `≤ 0`, located by
/// bisection on the dense output.
pub fn dopri5(
    sys: &dyn OdeSystem,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    tol: &Tolerances,
    events: &[EventFn],
) -> Result<Trajectory, OdeError> {
    let n = sys.dim();
    assert_eq!(y0.len(), n);
    let mut traj = Trajectory {
        dim: n,
        t: vec![t0],
        h: Vec::new(),
        y: y0.to_vec(),
        cont: Vec::new(),
        termination: Termination::Reached,
    };
    for (index, ev) in events.iter().enumerate() {
        if ev(t0, y0) <= 0.0 {
            traj.termination = Termination::Event { index, t: t0 };
            return Ok(traj);
        }
    }
    if t_end == t0 {
        return Ok(traj);
    }
    let dir = (t_end - t0).signum();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    sys.rhs(t, &y, &mut k1);
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut ys = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut h = dir * initial_step(sys, t, &y, &k1, tol, (t_end - t0).abs());
    let mut facold: f64 = 1e-4;
    let mut steps = 0usize;
    let mut rejected_last = false;

    loop {
        if steps >= tol.max_steps {
            return Err(OdeError::MaxSteps { t });
        }
        steps += 1;
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        if h.abs() <= 1e-14 * t.abs().max(1e-300) {
            return Err(OdeError::StepUnderflow { t, h });
        }
        for i in 0..n {
            ys[i] = y[i] + h * A21 * k1[i];
        }
        sys.rhs(t + C2 * h, &ys, &mut k2);
        for i in 0..n {
            ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(t + C3 * h, &ys, &mut k3);
        for i in 0..n {
            ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(t + C4 * h, &ys, &mut k4);
        for i in 0..n {
            ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(t + C5 * h, &ys, &mut k5);
        for i in 0..n {
            ys[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(t + h, &ys, &mut k6);
        for i in 0..n {
            ynew[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.rhs(t + h, &ynew, &mut k7);

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
            if h.abs() < 1e-10 * t.abs().max(1.0) {
                return Err(OdeError::NonFinite { t });
            }
            h *= 0.2;
            rejected_last = true;
            continue;
        }

        // PI step-size control (Hairer's constants).
        let fac11 = err.powf(0.17);
        if err <= 1.0 {
            let mut fac = fac11 / facold.powf(0.04);
            fac = (fac / 0.9).clamp(0.1, 5.0);
            let mut hnew = h / fac;
            if rejected_last {
                hnew = dir * hnew.abs().min(h.abs());
            }
            facold = err.max(1e-4);

            let mut cont = vec![0.0; 5 * n];
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                cont[i] = y[i];
                cont[n + i] = ydiff;
                cont[2 * n + i] = bspl;
                cont[3 * n + i] = ydiff - h * k7[i] - bspl;
                cont[4 * n + i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                        + D7 * k7[i]);
            }
            let tnew = t + h;

            let mut hit: Option<(usize, f64)> = None;
            for (index, ev) in events.iter().enumerate() {
                if ev(tnew, &ynew) <= 0.0 {
                    let te = locate_event(ev, &cont, n, t, h);
                    if hit.is_none_or(|(_, tb)| (te - tb) * dir < 0.0) {
                        hit = Some((index, te));
                    }
                }
            }
            if let Some((index, te)) = hit {
                // The last step keeps its polynomial but ends at the event.
                let ye = dense_eval(&cont, n, (te - t) / h);
                traj.cont.extend_from_slice(&cont);
                traj.h.push(h);
                traj.t.push(te);
                traj.y.extend_from_slice(&ye);
                traj.termination = Termination::Event { index, t: te };
                return Ok(traj);
            }

            traj.cont.extend_from_slice(&cont);
            traj.h.push(h);
            traj.t.push(tnew);
            traj.y.extend_from_slice(&ynew);
            t = tnew;
            y.copy_from_slice(&ynew);
            k1.copy_from_slice(&k7);
            if (t - t_end) * dir >= 0.0 {
                return Ok(traj);
            }
            h = hnew;
            rejected_last = false;
        } else {
            h /= (fac11 / 0.9).min(5.0);
            rejected_last = true;
        }
    }
}

fn locate_event(ev: EventFn, cont: &[f64], n: usize, t: f64, h: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let target = 1e-12 / h.abs().max(1e-300);
    while (hi - lo) > target && hi - lo > 4.0 * f64::EPSILON {
        let mid = 0.5 * (lo + hi);
        let ym = dense_eval(cont, n, mid);
        if ev(t + mid * h, &ym) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    t + hi * h
}

fn initial_step(
    sys: &dyn OdeSystem,
    t: f64,
    y: &[f64],
    f0: &[f64],
    tol: &Tolerances,
    span: f64,
) -> f64 {
    let n = y.len();
    let sc: Vec<f64> = y.iter().map(|v| tol.atol + tol.rtol * v.abs()).collect();
    let norm = |v: &[f64]| {
        (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let (d0, d1) = (norm(y), norm(f0));
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(t + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span).max(1e-12 * t.abs().max(1.0))
}

/// `(r, u, u′)` at a radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeState {
    pub r: f64,
    pub u: f64,
    pub du: f64,
}

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Coefficients `g(r)` and `h(r)` of `−u″ − u′/r + g u − h |u|^{p−1}u = 0`.
#[derive(Clone)]
pub struct CoefficientField {
    g: Scalar,
    h: Scalar,
}

impl std::fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("CoefficientField")
    }
}

impl CoefficientField {
    pub fn new(
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            g: Arc::new(g),
            h: Arc::new(h),
        }
    }
    /// `g = λ`, `h = 1`.
    pub fn unperturbed(lambda: f64) -> Self {
        Self::new(move |_| lambda, |_| 1.0)
    }
    /// `g = λ`, `h = 0`: the linear Helmholtz operator.
    pub fn linear(lambda: f64) -> Self {
        Self::new(move |_| lambda, |_| 0.0)
    }
    pub fn g(&self, r: f64) -> f64 {
        (self.g)(r)
    }
    pub fn h(&self, r: f64) -> f64 {
        (self.h)(r)
    }
}

/// The radial equation as a first-order system in `(u, u′)`.
pub struct RadialOde<'a> {
    pub field: &'a CoefficientField,
    pub p: f64,
}

impl OdeSystem for RadialOde<'_> {
    fn dim(&self) -> usize {
        2
    }
    fn rhs(&self, r: f64, y: &[f64], dy: &mut [f64]) {
        let u = y[0];
        let nl = self.field.h(r) * u.abs().powf(self.p - 1.0) * u;
        dy[0] = y[1];
        dy[1] = -y[1] / r + self.field.g(r) * u - nl;
    }
}

/// Integrates the radial equation from `start` to `r_end`.
pub fn integrate(
    field: &CoefficientField,
    p: f64,
    start: OdeState,
    r_end: f64,
    events: &[EventFn],
    tol: &Tolerances,
) -> Result<Trajectory, OdeError> {
    let sys = RadialOde { field, p };
    dopri5(&sys, start.r, &[start.u, start.du], r_end, tol, events)
}

/// Solution of the integral equation on `(0, r_end]`, sampled in `x = ln r`.
#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    /// `r·u′(r)`.
    pub v: Vec<f64>,
    pub iterations: usize,
}

impl PicardSolution {
    pub fn state_at_end(&self) -> OdeState {
        let k = self.x.len() - 1;
        let r = self.x[k].exp();
        OdeState {
            r,
            u: self.u[k],
            du: self.v[k] / r,
        }
    }
}

/// Log-span below `r_end` covered by the Picard grid.
const PICARD_SPAN: f64 = 60.0;
/// Picard grid spacing in `ln r`.
const PICARD_DX: f64 = 0.005;
const PICARD_MAX_ITER: usize = 50;

/// Picard iteration for
/// `u(r) = y(−ln r/2π + α) + ∫₀^r s F(s) ln(r/s) ds`, `F = λu − |u|^{p−1}u`,
/// with `r u′ = −y/2π + ∫₀^r s F ds`. Integrals are cumulative
/// end-corrected trapezoid sums in `x = ln s`.
pub fn picard(params: &Params, y: f64, r_end: f64) -> Result<PicardSolution, OdeError> {
    let x_end = r_end.ln();
    let m = (PICARD_SPAN / PICARD_DX).round() as usize;
    let x: Vec<f64> = (0..=m)
        .map(|i| x_end - PICARD_SPAN + i as f64 * PICARD_DX)
        .collect();
    let (lambda, p, alpha) = (params.lambda(), params.p(), params.alpha());
    let k = y / (2.0 * PI);
    let lead: Vec<f64> = x.iter().map(|&xi| y * (-xi / (2.0 * PI) + alpha)).collect();
    let mut u = lead.clone();
    let mut v = vec![-k; x.len()];
    let scale = u.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    for it in 1..=PICARD_MAX_ITER {
        let integrand: Vec<f64> = x
            .iter()
            .zip(&u)
            .map(|(&xi, &ui)| (2.0 * xi).exp() * (lambda * ui - ui.abs().powf(p - 1.0) * ui))
            .collect();
        let weighted: Vec<f64> = x.iter().zip(&integrand).map(|(a, b)| a * b).collect();
        let a = cumulative(&x, &integrand);
        let b = cumulative(&x, &weighted);
        let mut diff = 0.0f64;
        for i in 0..x.len() {
            let un = lead[i] + x[i] * a[i] - b[i];
            diff = diff.max((un - u[i]).abs());
            u[i] = un;
            v[i] = -k + a[i];
        }
        if !diff.is_finite() {
            break;
        }
        if diff < 1e-13 * scale {
            return Ok(PicardSolution {
                x,
                u,
                v,
                iterations: it,
            });
        }
    }
    Err(OdeError::NoConvergence {
        iterations: PICARD_MAX_ITER,
        r0: r_end,
    })
}

/// Cumulative `∫_{x₀}^{x_i} f` with cubic end corrections.
fn cumulative(x: &[f64], f: &[f64]) -> Vec<f64> {
    let df = derivative(x, f);
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..x.len() - 1 {
        let h = x[i + 1] - x[i];
        acc += 0.5 * h * (f[i] + f[i + 1]) + h * h / 12.0 * (df[i] - df[i + 1]);
        out.push(acc);
    }
    out
}

/// Converged `(u(r0), u′(r0))` for strength `y`.
pub fn bootstrap(params: &Params, y: f64, r0: f64) -> Result<OdeState, OdeError> {
    Ok(picard(params, y, r0)?.state_at_end())
}

/// Fitted bound `|u| + |u′| ≈ C e^{−εr}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecayFit {
    pub epsilon: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
}

/// Log-linear regression of `ln(|u| + |u′|)` on `[r_max/2, r_max]`.
pub fn exp_decay_check(r: &[f64], u: &[f64], du: &[f64]) -> Result<DecayFit, OdeError> {
    let r_max = *r.last().ok_or_else(|| OdeError::NoDecay("empty trajectory".into()))?;
    if r_max < 10.0 {
        return Err(OdeError::NoDecay(format!("trajectory ends at r = {r_max} < 10")));
    }
    let pts: Vec<(f64, f64)> = r
        .iter()
        .zip(u.iter().zip(du))
        .filter(|(&ri, _)| ri >= 0.5 * r_max)
        .map(|(&ri, (a, b))| (ri, a.abs() + b.abs()))
        .filter(|&(_, m)| m > 0.0)
        .map(|(ri, m)| (ri, m.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(OdeError::NoDecay("too few nonzero samples".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - icpt - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let epsilon = -slope;
    // A rate below 1e-6 is indistinguishable from a flat trajectory.
    if !(epsilon > 1e-6) || !(residual < 0.1) {
        return Err(OdeError::NoDecay(format!(
            "fit rate {epsilon}, log residual {residual}"
        )));
    }
    Ok(DecayFit {
        epsilon,
        c: icpt.exp(),
        residual,
    })
}

/// `(v/u)′(r) = −(1/(r u²)) ∫₀^r s ((v/u)^{p−1} − 1) uᵖ v ds`,
/// integrated in `ln s` with the log asymptote below the grid.
pub fn ratio_derivative(u: &GridProfile, v: &GridProfile, p: f64, r: f64) -> f64 {
    let integrand = |x: f64| {
        let s = x.exp();
        let (a, _) = u.eval(s);
        let (b, _) = v.eval(s);
        s * s * a * b * (b.abs().powf(p - 1.0) - a.abs().powf(p - 1.0))
    };
    let x0 = u.r_min().min(v.r_min()).ln();
    let xr = r.ln();
    let mut total = gauss_legendre(integrand, x0 - 40.0, x0.min(xr), 80);
    if xr > x0 {
        let pieces = ((xr - x0) / 0.02).ceil().max(1.0) as usize;
        total += gauss_legendre(integrand, x0, xr, pieces);
    }
    let (ur, _) = u.eval(r);
    -total / (r * ur * ur)
}
