//! Shooting on the singularity strength `y`: classification of trial
//! trajectories, bracketing and bisection, and assembly of the final
//! ground-state profile.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::model::{GridProfile, ModelError, Params, Tail};
use crate::numerics::{derivative, geomspace, linspace};
use crate::ode::{
    bootstrap, exp_decay_check, integrate, picard, CoefficientField, DecayFit, OdeError,
    OdeState, Termination, Tolerances, Trajectory,
};
use crate::specfun;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShootingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("NoBracket: no change of shot class for y in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("NonUnique: bisections from different seeds gave {a} and {b}")]
    NonUnique { a: f64, b: f64 },
    #[error("Splice: {0}")]
    Splice(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShotKind {
    Crossing,
    Growing,
    Decaying,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotClass {
    pub kind: ShotKind,
    pub event_radius: Option<f64>,
    /// Set when an undetermined shot was retried and then counted as growing.
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingConfig {
    /// Bootstrap handoff radius.
    pub r0: f64,
    /// Requested bracket width on `y`.
    pub tol_y: f64,
    /// Outer radius; `None` means `max(20, 12/√λ)`.
    pub r_stop: Option<f64>,
    /// Growing threshold: a shot is growing once `u′ ≥ 0` with `u ≥ u_cap`.
    pub u_cap: f64,
    pub tol: Tolerances,
    /// Initial trial strength for bracketing.
    pub seed: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            r0: 1e-4,
            tol_y: 1e-10,
            r_stop: None,
            u_cap: 0.0,
            tol: Tolerances::new(1e-12, 1e-14),
            seed: 1.0,
        }
    }
}

impl ShootingConfig {
    pub fn r_stop(&self, params: &Params) -> f64 {
        self.r_stop
            .unwrap_or_else(|| 20.0f64.max(12.0 / params.lambda().sqrt()))
    }
}

fn shot(
    params: &Params,
    y: f64,
    r_end: f64,
    r0: f64,
    u_cap: f64,
    tol: &Tolerances,
) -> Result<Trajectory, OdeError> {
    let field = CoefficientField::unperturbed(params.lambda());
    let start = bootstrap(params, y, r0)?;
    let crossing = |_r: f64, s: &[f64]| s[0];
    let growing = |_r: f64, s: &[f64]| (-s[1]).max(u_cap - s[0]);
    integrate(&field, params.p(), start, r_end, &[&crossing, &growing], tol)
}

fn classify_with(
    params: &Params,
    y: f64,
    r_stop: f64,
    r0: f64,
    u_cap: f64,
    tol: &Tolerances,
) -> ShotClass {
    let undetermined = ShotClass {
        kind: ShotKind::Undetermined,
        event_radius: None,
        flagged: false,
    };
    let Ok(tr) = shot(params, y, r_stop, r0, u_cap, tol) else {
        return undetermined;
    };
    match tr.termination {
        Termination::Event { index: 0, t } => ShotClass {
            kind: ShotKind::Crossing,
            event_radius: Some(t),
            flagged: false,
        },
        Termination::Event { t, .. } => ShotClass {
            kind: ShotKind::Growing,
            event_radius: Some(t),
            flagged: false,
        },
        Termination::Reached => {
            let r = linspace(0.5 * r_stop, r_stop, 201);
            let (u, du): (Vec<f64>, Vec<f64>) = r
                .iter()
                .map(|&x| {
                    let s = tr.eval(x);
                    (s[0], s[1])
                })
                .unzip();
            if exp_decay_check(&r, &u, &du).is_ok() {
                ShotClass {
                    kind: ShotKind::Decaying,
                    event_radius: None,
                    flagged: false,
                }
            } else {
                undetermined
            }
        }
    }
}

/// Classifies the shot with strength `y` using the default configuration.
pub fn classify(params: &Params, y: f64, r_stop: f64) -> ShotClass {
    let cfg = ShootingConfig::default();
    classify_with(params, y, r_stop, cfg.r0, cfg.u_cap, &cfg.tol)
}

/// Classification used during bisection: undetermined shots are retried
/// with tighter settings, then counted as growing and flagged.
fn classify_for_bisection(params: &Params, y: f64, cfg: &ShootingConfig) -> ShotClass {
    let r_stop = cfg.r_stop(params);
    let c = classify_with(params, y, r_stop, cfg.r0, cfg.u_cap, &cfg.tol);
    if c.kind != ShotKind::Undetermined {
        return c;
    }
    let tight = Tolerances::new(cfg.tol.rtol * 0.1, cfg.tol.atol * 0.1);
    let c = classify_with(params, y, r_stop, cfg.r0 * 0.1, cfg.u_cap, &tight);
    if c.kind != ShotKind::Undetermined {
        return c;
    }
    ShotClass {
        kind: ShotKind::Growing,
        event_radius: None,
        flagged: true,
    }
}

/// Outcome of one bracketing-plus-bisection run.
#[derive(Debug, Clone)]
struct Bisection {
    lo: f64,
    hi: f64,
    lo_kind: ShotKind,
    hi_kind: ShotKind,
    history: Vec<(f64, ShotKind)>,
    flagged: bool,
}

const Y_MIN: f64 = 1e-8;
const Y_MAX: f64 = 1e8;

fn bisect(params: &Params, cfg: &ShootingConfig, seed: f64) -> Result<Bisection, ShootingError> {
    let mut history = Vec::new();
    let mut flagged = false;
    let mut run = |y: f64, history: &mut Vec<(f64, ShotKind)>| {
        let c = classify_for_bisection(params, y, cfg);
        flagged |= c.flagged;
        history.push((y, c.kind));
        c.kind
    };
    let k0 = run(seed, &mut history);
    let (mut lo, mut hi, mut lo_kind, mut hi_kind);
    if k0 == ShotKind::Decaying {
        return Ok(Bisection {
            lo: seed,
            hi: seed,
            lo_kind: k0,
            hi_kind: k0,
            history,
            flagged,
        });
    }
    // Expand by factors of two in both directions until the class changes.
    let mut up = seed;
    let mut down = seed;
    loop {
        let can_up = up * 2.0 <= Y_MAX;
        let can_down = down / 2.0 >= Y_MIN;
        if !can_up && !can_down {
            return Err(ShootingError::NoBracket { lo: Y_MIN, hi: Y_MAX });
        }
        if can_up {
            let y = up * 2.0;
            let k = run(y, &mut history);
            if k != k0 {
                (lo, hi, lo_kind, hi_kind) = (up, y, k0, k);
                break;
            }
            up = y;
        }
        if can_down {
            let y = down / 2.0;
            let k = run(y, &mut history);
            if k != k0 {
                (lo, hi, lo_kind, hi_kind) = (y, down, k, k0);
                break;
            }
            down = y;
        }
    }
    if lo_kind == ShotKind::Decaying || hi_kind == ShotKind::Decaying {
        let y = if lo_kind == ShotKind::Decaying { lo } else { hi };
        return Ok(Bisection {
            lo: y,
            hi: y,
            lo_kind,
            hi_kind,
            history,
            flagged,
        });
    }
    // Bisect to machine resolution (well below `tol_y`).
    loop {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        let k = run(mid, &mut history);
        if k == ShotKind::Decaying {
            lo = mid;
            hi = mid;
            lo_kind = k;
            hi_kind = k;
            break;
        }
        if k == lo_kind {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Bisection {
        lo,
        hi,
        lo_kind,
        hi_kind,
        history,
        flagged,
    })
}

/// Relative distance from `y*` below which classification is dominated by
/// rounding in the bootstrap and integrator.
pub const CLASS_RESOLUTION: f64 = 1e-12;

/// Whether classes along increasing `y` change at most once (a `Decaying`
/// shot may sit at the switch). Shots closer to `y_star` than
/// [`CLASS_RESOLUTION`] are ignored.
pub fn is_monotone(history: &[(f64, ShotKind)], y_star: f64) -> bool {
    let mut h: Vec<_> = history
        .iter()
        .filter(|(y, k)| {
            *k != ShotKind::Decaying && (y - y_star).abs() > CLASS_RESOLUTION * y_star
        })
        .copied()
        .collect();
    h.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    h.windows(2).filter(|w| w[0].1 != w[1].1).count() <= 1
}

#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub y_star: f64,
    pub profile: GridProfile,
    /// Width of the final bracket. Bisection continues past `tol_y` down to
    /// machine resolution so the profile can be trusted further out.
    pub bracket_width: f64,
    pub bracket: (f64, f64),
    /// Shot class on the low and high end of the bracket.
    pub orientation: (ShotKind, ShotKind),
    /// `(level, y*)`: level `k` uses handoff radius `r0·10^{-k}`.
    pub refinement_history: Vec<(usize, f64)>,
    pub bisection_history: Vec<(f64, ShotKind)>,
    pub monotone: bool,
    pub flagged: bool,
    pub decay: Option<DecayFit>,
    /// Radius where the outer (backward) solution takes over.
    pub splice_radius: f64,
    /// Relative slope mismatch at the splice.
    pub splice_mismatch: f64,
}

/// Number of geometric grid points per unit of `ln r`.
const GEOM_PER_LOG: f64 = 50.0;
/// Uniform spacing beyond `r = 1`.
const UNIFORM_H: f64 = 0.005;
/// Radius up to which samples come from the Picard representation.
const PICARD_RADIUS: f64 = 0.05;
/// Relative separation of the bracket shots that limits the inner solution.
const TRUST_SEPARATION: f64 = 1e-8;

/// Geometric grid from `r0` to 1 and uniform spacing up to `r_stop`.
/// The geometric part has spacing exactly `1/GEOM_PER_LOG` in `ln r`.
pub fn profile_grid(r0: f64, r_stop: f64) -> Vec<f64> {
    let mut r = vec![r0];
    let x0 = r0.ln();
    for k in 1.. {
        let v = (x0 + k as f64 / GEOM_PER_LOG).exp();
        if v >= 1.0 - 0.5 * UNIFORM_H {
            break;
        }
        r.push(v);
    }
    let n_uni = ((r_stop - 1.0) / UNIFORM_H).round() as usize + 1;
    r.extend(linspace(1.0, r_stop, n_uni.max(2)));
    r
}

/// Full shooting solve: bracket, bisect, check uniqueness and handoff
/// stability, then assemble the profile.
pub fn solve(params: &Params, cfg: &ShootingConfig) -> Result<ShootingResult, ShootingError> {
    let main = bisect(params, cfg, cfg.seed)?;
    let y_star = 0.5 * (main.lo + main.hi);

    // A different seed must land on the same strength.
    let alt = bisect(params, cfg, cfg.seed * 7.3)?;
    let y_alt = 0.5 * (alt.lo + alt.hi);
    if (y_alt - y_star).abs() > 2.0 * cfg.tol_y {
        return Err(ShootingError::NonUnique {
            a: y_star,
            b: y_alt,
        });
    }
    // Handoff refinement.
    let fine_cfg = ShootingConfig {
        r0: cfg.r0 * 0.1,
        seed: y_star,
        ..*cfg
    };
    let fine = bisect(params, &fine_cfg, y_star)?;
    let refinement_history = vec![(0, y_star), (1, 0.5 * (fine.lo + fine.hi))];

    let (profile, splice_radius, splice_mismatch) = build_profile(params, cfg, &main)?;
    let decay = exp_decay_check(profile.r(), profile.u(), profile.du()).ok();
    let mut history = main.history.clone();
    history.extend(alt.history.iter().copied());
    Ok(ShootingResult {
        y_star,
        profile,
        bracket_width: main.hi - main.lo,
        bracket: (main.lo, main.hi),
        orientation: (main.lo_kind, main.hi_kind),
        refinement_history,
        monotone: is_monotone(&history, y_star),
        bisection_history: history,
        flagged: main.flagged || alt.flagged,
        decay,
        splice_radius,
        splice_mismatch,
    })
}

fn build_profile(
    params: &Params,
    cfg: &ShootingConfig,
    b: &Bisection,
) -> Result<(GridProfile, f64, f64), ShootingError> {
    let (lambda, p) = (params.lambda(), params.p());
    let r_stop = cfg.r_stop(params);
    let mut grid = profile_grid(cfg.r0, r_stop);
    let y = 0.5 * (b.lo + b.hi);
    let field = CoefficientField::unperturbed(lambda);
    let tol = cfg.tol;

    // Inner region from the Picard representation.
    let n_pic = grid.iter().take_while(|&&r| r <= PICARD_RADIUS).count().max(5);
    let r_pic = grid[n_pic - 1];
    let pic = picard(params, y, r_pic)?;
    let m = pic.x.len() - 1;
    let stride = ((grid[1] / grid[0]).ln() / (pic.x[1] - pic.x[0])).round() as usize;
    let mut u = vec![0.0; grid.len()];
    let mut du = vec![0.0; grid.len()];
    for k in 0..n_pic {
        let back = (n_pic - 1 - k) * stride;
        let (x, uk, vk) = (pic.x[m - back], pic.u[m - back], pic.v[m - back]);
        let rk = x.exp();
        debug_assert!((rk - grid[k]).abs() <= 1e-9 * grid[k]);
        // Use the Picard abscissa itself so r·u′ reproduces v to rounding.
        grid[k] = rk;
        u[k] = uk;
        du[k] = vk / rk;
    }

    // Middle region: forward shots from the Picard endpoint.
    let forward = |ys: f64| -> Result<Trajectory, ShootingError> {
        let st = if ys == y {
            pic.state_at_end()
        } else {
            picard(params, ys, r_pic)?.state_at_end()
        };
        let crossing = |_r: f64, s: &[f64]| s[0];
        let growing = |_r: f64, s: &[f64]| (-s[1]).max(cfg.u_cap - s[0]);
        Ok(integrate(&field, p, st, r_stop, &[&crossing, &growing], &tol)?)
    };
    let mid = forward(y)?;
    let (lo, hi) = if b.lo < b.hi {
        (forward(b.lo)?, forward(b.hi)?)
    } else {
        (mid.clone(), mid.clone())
    };
    let reach = mid.t_end().min(lo.t_end()).min(hi.t_end());
    let mut splice = n_pic;
    for (k, &r) in grid.iter().enumerate().skip(n_pic) {
        if r >= reach {
            break;
        }
        let um = mid.eval(r)[0];
        let sep = (lo.eval(r)[0] - hi.eval(r)[0]).abs();
        if um <= 0.0 || sep > TRUST_SEPARATION * um.abs() {
            break;
        }
        splice = k;
    }
    if splice <= n_pic {
        return Err(ShootingError::Splice("inner solution not trustworthy past the Picard region".into()));
    }
    for k in n_pic..=splice {
        let s = mid.eval(grid[k]);
        u[k] = s[0];
        du[k] = s[1];
    }
    let r_s = grid[splice];
    let (u_s, du_s) = (u[splice], du[splice]);

    // Outer region: backward integration of the decaying solution from
    // r_stop, amplitude fixed by matching u at the splice (secant).
    let sl = lambda.sqrt();
    let k0 = |r: f64| specfun::bessel_k(0, sl * r).unwrap_or(0.0);
    let k1 = |r: f64| specfun::bessel_k(1, sl * r).unwrap_or(0.0);
    let back_tol = Tolerances::new(tol.rtol, 1e-300);
    let outer = |a: f64| -> Result<Trajectory, ShootingError> {
        let st = OdeState {
            r: r_stop,
            u: a * k0(r_stop),
            du: -a * sl * k1(r_stop),
        };
        Ok(integrate(&field, p, st, r_s, &[], &back_tol)?)
    };
    let mismatch = |tr: &Trajectory| tr.final_state()[0] - u_s;
    let mut a0 = u_s / k0(r_s);
    let mut t0 = outer(a0)?;
    let mut f0 = mismatch(&t0);
    let mut a1 = a0 * (1.0 + 1e-3);
    let mut t1 = outer(a1)?;
    let mut f1 = mismatch(&t1);
    for _ in 0..50 {
        if f1.abs() <= 1e-15 * u_s.abs() || f1 == f0 {
            break;
        }
        let a2 = a1 - f1 * (a1 - a0) / (f1 - f0);
        (a0, f0) = (a1, f1);
        t0 = t1;
        a1 = a2;
        t1 = outer(a1)?;
        f1 = mismatch(&t1);
    }
    let _ = t0;
    if !(f1.abs() <= 1e-12 * u_s.abs()) {
        return Err(ShootingError::Splice(format!("amplitude matching failed, residual {f1}")));
    }
    let splice_mismatch = (t1.final_state()[1] - du_s).abs() / du_s.abs().max(1e-300);
    for k in splice + 1..grid.len() {
        let s = t1.eval(grid[k]);
        u[k] = s[0];
        du[k] = s[1];
    }

    let d2u: Vec<f64> = grid
        .iter()
        .zip(u.iter().zip(&du))
        .map(|(&r, (&a, &b))| -b / r + lambda * a - a.abs().powf(p - 1.0) * a)
        .collect();
    let profile = GridProfile::with_second_derivative(grid, u, du, d2u, y)?.with_tail(Tail {
        amplitude: a1,
        rate: sl,
    });
    Ok((profile, r_s, splice_mismatch))
}

/// Pointwise residual `|−(r u′)′/r + g u − h|u|^{p−1}u|` on the grid, with
/// `(r u′)′` from fourth-order differences of the samples.
pub fn ode_residuals(profile: &GridProfile, field: &CoefficientField, p: f64) -> Vec<f64> {
    let r = profile.r();
    let flux: Vec<f64> = r.iter().zip(profile.du()).map(|(a, b)| a * b).collect();
    let dflux = derivative(r, &flux);
    r.iter()
        .zip(profile.u())
        .zip(&dflux)
        .map(|((&ri, &ui), &df)| {
            (-df / ri + field.g(ri) * ui - field.h(ri) * ui.abs().powf(p - 1.0) * ui).abs()
        })
        .collect()
}

/// Largest interior residual normalized by `max(λu)`.
pub fn ode_residual(profile: &GridProfile, params: &Params) -> f64 {
    let field = CoefficientField::unperturbed(params.lambda());
    let res = ode_residuals(profile, &field, params.p());
    let n = res.len();
    let scale = profile
        .u()
        .iter()
        .fold(0.0f64, |a, &b| a.max(params.lambda() * b.abs()));
    res[1..n - 1].iter().fold(0.0f64, |a, &b| a.max(b)) / scale
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderingReport {
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Indices `i` where `ratio[i+1] ≥ ratio[i]`.
    pub violations: Vec<usize>,
    /// End of the common positivity interval used for sampling.
    pub common_radius: f64,
}

impl OrderingReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A shot integrated up to its first event, sampled onto a profile grid.
pub fn shot_profile(
    params: &Params,
    y: f64,
    cfg: &ShootingConfig,
) -> Result<(GridProfile, ShotClass), ShootingError> {
    let r_stop = cfg.r_stop(params);
    let tr = shot(params, y, r_stop, cfg.r0, cfg.u_cap, &cfg.tol)?;
    let class = match tr.termination {
        Termination::Event { index: 0, t } => ShotClass {
            kind: ShotKind::Crossing,
            event_radius: Some(t),
            flagged: false,
        },
        Termination::Event { t, .. } => ShotClass {
            kind: ShotKind::Growing,
            event_radius: Some(t),
            flagged: false,
        },
        Termination::Reached => ShotClass {
            kind: ShotKind::Undetermined,
            event_radius: None,
            flagged: false,
        },
    };
    let r_end = tr.t_end();
    let mut grid: Vec<f64> = profile_grid(cfg.r0, r_stop)
        .into_iter()
        .filter(|&r| r < r_end)
        .collect();
    if grid.last().is_some_and(|&r| r_end - r > 1e-9) {
        grid.push(r_end);
    }
    let field = CoefficientField::unperturbed(params.lambda());
    let p = params.p();
    let mut u = Vec::with_capacity(grid.len());
    let mut du = Vec::with_capacity(grid.len());
    let mut d2u = Vec::with_capacity(grid.len());
    for &r in &grid {
        let s = tr.eval(r);
        u.push(s[0]);
        du.push(s[1]);
        d2u.push(-s[1] / r + field.g(r) * s[0] - s[0].abs().powf(p - 1.0) * s[0]);
    }
    Ok((GridProfile::with_second_derivative(grid, u, du, d2u, y)?, class))
}

/// Samples `u_{y2}/u_{y1}` at 100 log-spaced radii of the common positivity
/// interval and records where it fails to decrease.
pub fn ordering_check(
    params: &Params,
    y1: f64,
    y2: f64,
    cfg: &ShootingConfig,
) -> Result<OrderingReport, ShootingError> {
    let (a, ca) = shot_profile(params, y1, cfg)?;
    let (b, cb) = shot_profile(params, y2, cfg)?;
    let end = |c: ShotClass, prof: &GridProfile| match c.kind {
        ShotKind::Crossing => c.event_radius.unwrap(),
        _ => prof.r_max(),
    };
    let common = end(ca, &a).min(end(cb, &b));
    let radii = geomspace(cfg.r0, 0.95 * common, 100);
    let ratios: Vec<f64> = radii.iter().map(|&r| b.eval(r).0 / a.eval(r).0).collect();
    let violations = ratios
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] >= w[0])
        .map(|(i, _)| i)
        .collect();
    Ok(OrderingReport {
        radii,
        ratios,
        violations,
        common_radius: common,
    })
}

/// Near-origin consistency `|u(r0) − y(−ln r0/2π + α)|`.
pub fn origin_defect(profile: &GridProfile, params: &Params) -> f64 {
    let r0 = profile.r_min();
    (profile.u()[0] - profile.y_u() * (-r0.ln() / (2.0 * PI) + params.alpha())).abs()
}
