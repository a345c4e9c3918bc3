//! Radial sectors of the linearized operators `L±`, their low spectrum on a
//! finite box, and the `ξ` identity for sector solutions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{GridProfile, Params};
use crate::numerics::gauss_legendre;
use crate::ode::{dopri5, FnSystem, OdeError, Tolerances, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinopsError {
    #[error("BadGrid: {0}")]
    BadGrid(String),
    #[error("ConvergenceFailure: {0}")]
    ConvergenceFailure(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Angular sector `j` with circle-Laplacian eigenvalue `μ_j`.
/// Harmonics are ordered `1, cos θ, sin θ, cos 2θ, sin 2θ, …`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub j: usize,
    pub mu: f64,
}

impl Sector {
    pub fn new(j: usize) -> Self {
        let k = j.div_ceil(2) as f64;
        Self { j, mu: k * k }
    }
}

/// `L⁺` carries `p u^{p−1}`, `L⁻` carries `u^{p−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tag {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Tag {
    pub fn kappa(self, p: f64) -> f64 {
        match self {
            Tag::Plus => p,
            Tag::Minus => 1.0,
        }
    }
}

impl std::str::FromStr for Tag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "+" | "plus" => Ok(Tag::Plus),
            "-" | "minus" => Ok(Tag::Minus),
            _ => Err(format!("unknown operator tag '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    /// Number of intervals.
    pub n: usize,
}

impl GridSpec {
    /// Geometric nodes up to `r = 1`, uniform beyond, with the split chosen
    /// so the spacing is roughly continuous across `r = 1`.
    pub fn nodes(&self) -> Result<Vec<f64>, LinopsError> {
        let GridSpec { r_min, r_max, n } = *self;
        if !(r_min > 0.0 && r_max > r_min && r_min.is_finite() && r_max.is_finite()) {
            return Err(LinopsError::BadGrid(format!("need 0 < r_min < r_max, got [{r_min}, {r_max}]")));
        }
        if n < 8 {
            return Err(LinopsError::BadGrid(format!("need at least 8 intervals, got {n}")));
        }
        if r_max <= 1.0 || r_min >= 1.0 {
            let (la, lb) = (r_min.ln(), r_max.ln());
            return Ok((0..=n).map(|i| (la + (lb - la) * i as f64 / n as f64).exp()).collect());
        }
        let l1 = -r_min.ln();
        let l2 = r_max - 1.0;
        let n1 = ((n as f64 * l1 / (l1 + l2)).round() as usize).clamp(2, n - 2);
        let n2 = n - n1;
        let mut r: Vec<f64> = (0..n1).map(|i| (r_min.ln() * (1.0 - i as f64 / n1 as f64)).exp()).collect();
        r.extend((0..=n2).map(|i| 1.0 + l2 * i as f64 / n2 as f64));
        r[0] = r_min;
        r[n] = r_max;
        Ok(r)
    }
}

/// Boundary treatment at `r_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inner {
    Dirichlet,
    /// `r w′ = ρ w`.
    Robin(f64),
}

/// Robin coefficient encoding `w ≈ c(−ln r/2π + α)` at `r_min`.
pub fn robin_rho(alpha: f64, r_min: f64) -> f64 {
    1.0 / (r_min.ln() - 2.0 * std::f64::consts::PI * alpha)
}

/// Robin coefficient that also carries the potential on `[0, r_min]`.
///
/// Integrating `(s w′)′ = s V w` from the origin with `w ≈ c L(s)`,
/// `L = −ln s/2π + α`, gives `r w′ = c(−1/2π + I)` and `w = c(L + J)` with
/// `I = ∫₀ʳ s V L ds` and `J = ∫₀ʳ s V L ln(r/s) ds`. Dropping `I` and `J`
/// leaves [`robin_rho`], whose error `O(r² ln³ r)` for a log-squared
/// potential is visible in the spectrum at moderate `r_min`.
pub fn robin_rho_with(alpha: f64, r_min: f64, potential: &dyn Fn(f64) -> f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let l = |s: f64| -s.ln() / two_pi + alpha;
    // s = r e^{−t}, ds = s dt
    let kernel = |t: f64| {
        let s = r_min * (-t).exp();
        s * s * potential(s) * l(s)
    };
    let i = gauss_legendre(kernel, 0.0, 60.0, 240);
    let j = gauss_legendre(|t| t * kernel(t), 0.0, 60.0, 240);
    (-1.0 / two_pi + i) / (l(r_min) + j)
}

/// `w − r w′ (ln r − 2πα)` at `r`.
pub fn robin_functional(alpha: f64, r: f64, w: f64, dw: f64) -> f64 {
    w - r * dw * (r.ln() - 2.0 * std::f64::consts::PI * alpha)
}

/// Symmetric tridiagonal form `M^{-1/2} A M^{-1/2}` of the pencil on the
/// unknown nodes.
#[derive(Debug, Clone)]
pub struct Problem {
    /// All grid nodes, including eliminated Dirichlet ones.
    pub nodes: Vec<f64>,
    /// Index of the first unknown node.
    pub first: usize,
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    /// `√m_i` for each unknown.
    pub sqrt_mass: Vec<f64>,
}

impl Problem {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }
    /// Radii of the unknowns.
    pub fn radii(&self) -> &[f64] {
        &self.nodes[self.first..self.first + self.dim()]
    }
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * v[i + 1];
                }
                s
            })
            .collect()
    }
    /// Mass-weighted image of nodal samples, in the symmetric coordinates.
    pub fn weighted(&self, samples: &[f64]) -> Vec<f64> {
        samples.iter().zip(&self.sqrt_mass).map(|(a, b)| a * b).collect()
    }
}

/// Finite-volume pencil for `−(r w′)′/r + V w` with weight `r dr`,
/// Dirichlet at `r_max`. The flux across each edge uses `1/ln(r_{i+1}/r_i)`,
/// exact for `ln r`; `μ/r²` is integrated exactly over each dual cell.
pub fn assemble_with(
    grid: &GridSpec,
    mu: f64,
    inner: Inner,
    potential: &dyn Fn(f64) -> f64,
) -> Result<Problem, LinopsError> {
    let r = grid.nodes()?;
    let n = r.len() - 1;
    let flux: Vec<f64> = r.windows(2).map(|w| 1.0 / (w[1] / w[0]).ln()).collect();
    let mid: Vec<f64> = r.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
    let first = match inner {
        Inner::Dirichlet => 1,
        Inner::Robin(_) => 0,
    };
    let mut diag = Vec::with_capacity(n - first);
    let mut mass = Vec::with_capacity(n - first);
    for i in first..n {
        let lo = if i == 0 { r[0] } else { mid[i - 1] };
        let hi = mid[i];
        let m = 0.5 * (hi * hi - lo * lo);
        let mut d = flux[i] + if i > 0 { flux[i - 1] } else { 0.0 };
        if let (0, Inner::Robin(rho)) = (i, inner) {
            d += rho;
        }
        d += mu * (hi / lo).ln() + m * potential(r[i]);
        diag.push(d);
        mass.push(m);
    }
    let sqrt_mass: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    let diag: Vec<f64> = diag.iter().zip(&mass).map(|(d, m)| d / m).collect();
    let off: Vec<f64> = (first..n - 1)
        .map(|i| -flux[i] / (sqrt_mass[i - first] * sqrt_mass[i + 1 - first]))
        .collect();
    if diag.iter().chain(&off).any(|v| !v.is_finite()) {
        return Err(LinopsError::BadGrid("non-finite matrix entry".into()));
    }
    Ok(Problem {
        nodes: r,
        first,
        diag,
        off,
        sqrt_mass,
    })
}

/// The sector problem for `L±` around a profile. Sector 0 takes the
/// point-interaction Robin condition, the others Dirichlet.
pub fn assemble(
    params: &Params,
    profile: &GridProfile,
    sector: Sector,
    tag: Tag,
    grid: &GridSpec,
) -> Result<Problem, LinopsError> {
    let (p, lambda) = (params.p(), params.lambda());
    let kappa = tag.kappa(p);
    let v = |s: f64| lambda - kappa * profile.eval(s).0.abs().powf(p - 1.0);
    let inner = if sector.j == 0 {
        // Below r_min the profile follows its log asymptote.
        let (y, alpha) = (profile.y_u(), params.alpha());
        let v0 = |s: f64| {
            let u = y * (-s.ln() / (2.0 * std::f64::consts::PI) + alpha);
            lambda - kappa * u.abs().powf(p - 1.0)
        };
        Inner::Robin(robin_rho_with(alpha, grid.r_min, &v0))
    } else {
        Inner::Dirichlet
    };
    assemble_with(grid, sector.mu, inner, &v)
}

/// Number of eigenvalues of the tridiagonal matrix below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let e2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
        q = diag[i] - x - if i > 0 { e2 / q } else { 0.0 };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Eigenvalue number `m` (0-based, ascending) by bisection in `[lo, hi]`.
fn bisect_eigenvalue(diag: &[f64], off: &[f64], m: usize, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > m {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T − s I) x = b` by Gaussian elimination with partial pivoting.
fn shifted_solve(diag: &[f64], off: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    // Rows as (sub, main, sup, sup2) after pivoting.
    let mut a: Vec<[f64; 4]> = (0..n)
        .map(|i| {
            [
                if i > 0 { off[i - 1] } else { 0.0 },
                diag[i] - s,
                if i + 1 < n { off[i] } else { 0.0 },
                0.0,
            ]
        })
        .collect();
    let mut x = b.to_vec();
    let tiny = f64::EPSILON * diag.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    // Row i holds coefficients for columns i, i+1, i+2 in slots 1..=3 once reduced.
    for i in 0..n.saturating_sub(1) {
        let (cur, next) = (a[i], a[i + 1]);
        if next[0].abs() > cur[1].abs() {
            // Swap rows i and i+1.
            a[i] = [0.0, next[0], next[1], next[2]];
            a[i + 1] = [cur[1], cur[2], cur[3], 0.0];
            x.swap(i, i + 1);
        }
        let piv = if a[i][1] == 0.0 { tiny } else { a[i][1] };
        a[i][1] = piv;
        let f = a[i + 1][0] / piv;
        a[i + 1][0] = 0.0;
        a[i + 1][1] -= f * a[i][2];
        a[i + 1][2] -= f * a[i][3];
        x[i + 1] -= f * x[i];
    }
    if a[n - 1][1] == 0.0 {
        a[n - 1][1] = tiny;
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        if i + 1 < n {
            s -= a[i][2] * x[i + 1];
        }
        if i + 2 < n {
            s -= a[i][3] * x[i + 2];
        }
        x[i] = s / a[i][1];
    }
    x
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Largest eigenpair residual accepted, relative to the vector norm.
pub const RESIDUAL_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Eigenpair {
    pub theta: f64,
    /// Unit vector in the symmetric coordinates.
    pub vector: Vec<f64>,
    /// `‖A w − θ M w‖ / ‖w‖` for the nodal eigenfunction `w`.
    pub residual: f64,
}

impl Eigenpair {
    /// Nodal values of the eigenfunction `w = M^{-1/2} v`.
    pub fn samples(&self, problem: &Problem) -> Vec<f64> {
        self.vector.iter().zip(&problem.sqrt_mass).map(|(v, m)| v / m).collect()
    }
}

/// With `w = M^{-1/2} v`: `A w − θ M w = M^{1/2}(T v − θ v)`.
fn pencil_residual(problem: &Problem, tv: &[f64], v: &[f64], theta: f64) -> f64 {
    let m = &problem.sqrt_mass;
    let num: f64 = (0..v.len()).map(|i| (m[i] * (tv[i] - theta * v[i])).powi(2)).sum();
    let den: f64 = (0..v.len()).map(|i| (v[i] / m[i]).powi(2)).sum();
    (num / den).sqrt()
}

/// The `k` eigenpairs of smallest magnitude.
pub fn smallest_eigenvalues(problem: &Problem, k: usize) -> Result<Vec<Eigenpair>, LinopsError> {
    let (d, e) = (&problem.diag, &problem.off);
    let n = d.len();
    let k = k.min(n);
    let gersh = (0..n)
        .map(|i| {
            d[i].abs() + if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 }
        })
        .fold(0.0f64, f64::max);
    let mut w = 1.0f64;
    let (lo_idx, hi_idx) = loop {
        let (a, b) = (sturm_count(d, e, -w), sturm_count(d, e, w));
        if b - a >= k || w > gersh {
            break (a, b);
        }
        w *= 2.0;
    };
    let w = w.min(gersh * 1.01 + 1.0);
    let mut thetas: Vec<f64> = (lo_idx..hi_idx).map(|m| bisect_eigenvalue(d, e, m, -w, w)).collect();
    thetas.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    thetas.truncate(k);

    let mut out = Vec::with_capacity(k);
    for &theta in &thetas {
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
        normalize(&mut v);
        let mut best: Option<Eigenpair> = None;
        for _ in 0..6 {
            let mut x = shifted_solve(d, e, theta, &v);
            normalize(&mut x);
            v = x;
            // Rayleigh quotient refines θ beyond bisection accuracy.
            let tv = problem.apply(&v);
            let rq: f64 = tv.iter().zip(&v).map(|(a, b)| a * b).sum();
            let res = pencil_residual(problem, &tv, &v, rq);
            if best.as_ref().is_none_or(|b| res < b.residual) {
                best = Some(Eigenpair {
                    theta: rq,
                    vector: v.clone(),
                    residual: res,
                });
            }
            if res <= RESIDUAL_LIMIT * 1e-2 {
                break;
            }
        }
        let pair = best.expect("at least one iteration");
        if pair.residual > RESIDUAL_LIMIT {
            return Err(LinopsError::ConvergenceFailure(format!(
                "eigenpair near {theta} has residual {:.3e}",
                pair.residual
            )));
        }
        out.push(pair);
    }
    out.sort_by(|a, b| a.theta.abs().total_cmp(&b.theta.abs()));
    Ok(out)
}

/// Normalized weighted overlap `|⟨v, M^{1/2}s⟩| / ‖M^{1/2}s‖` of a unit
/// eigenvector with nodal samples `s`.
pub fn overlap(problem: &Problem, pair: &Eigenpair, samples: &[f64]) -> f64 {
    let s = problem.weighted(samples);
    let ns = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    pair.vector.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>().abs() / ns
}

/// Overlap above which an eigenvector counts as a known kernel direction.
pub const KERNEL_OVERLAP: f64 = 0.99;

/// Smallest `|θ|` among pairs not aligned with any known kernel function.
pub fn kernel_gap(problem: &Problem, pairs: &[Eigenpair], known: &[Vec<f64>]) -> Option<f64> {
    pairs
        .iter()
        .filter(|p| known.iter().all(|k| overlap(problem, p, k) <= KERNEL_OVERLAP))
        .map(|p| p.theta.abs())
        .min_by(f64::total_cmp)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridLevel {
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub max_residual: f64,
    pub kernel_gap: Option<f64>,
    pub negative_count: usize,
    /// Eigenvalue nearest 0 and its overlap with the profile.
    pub nearest: f64,
    pub nearest_overlap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub sector: Sector,
    pub tag: Tag,
    pub r_min: f64,
    pub r_max: f64,
    pub levels: Vec<GridLevel>,
    /// Relative change of the kernel gap between the two finest levels.
    pub gap_variation: Option<f64>,
}

impl SpectralReport {
    pub fn finest(&self) -> &GridLevel {
        self.levels.last().expect("at least one level")
    }
}

/// One grid level of a sector spectrum.
pub fn spectrum_level(
    params: &Params,
    profile: &GridProfile,
    sector: Sector,
    tag: Tag,
    grid: &GridSpec,
    k: usize,
) -> Result<GridLevel, LinopsError> {
    let problem = assemble(params, profile, sector, tag, grid)?;
    let pairs = smallest_eigenvalues(&problem, k)?;
    let u: Vec<f64> = problem.radii().iter().map(|&r| profile.eval(r).0).collect();
    // u spans ker L⁻ in sector 0; L⁺ has no known kernel.
    let known = if tag == Tag::Minus && sector.j == 0 { vec![u.clone()] } else { vec![] };
    let negative_count = sturm_count(&problem.diag, &problem.off, 0.0);
    let nearest = &pairs[0];
    Ok(GridLevel {
        n: grid.n,
        eigenvalues: pairs.iter().map(|p| p.theta).collect(),
        max_residual: pairs.iter().map(|p| p.residual).fold(0.0, f64::max),
        kernel_gap: kernel_gap(&problem, &pairs, &known),
        negative_count,
        nearest: nearest.theta,
        nearest_overlap: overlap(&problem, nearest, &u),
    })
}

/// Spectra at each interval count in `ns` (ascending).
pub fn spectral_report(
    params: &Params,
    profile: &GridProfile,
    sector: Sector,
    tag: Tag,
    grid: &GridSpec,
    ns: &[usize],
    k: usize,
) -> Result<SpectralReport, LinopsError> {
    let levels = ns
        .iter()
        .map(|&n| spectrum_level(params, profile, sector, tag, &GridSpec { n, ..*grid }, k))
        .collect::<Result<Vec<_>, _>>()?;
    let gap_variation = match levels.as_slice() {
        [.., a, b] => match (a.kernel_gap, b.kernel_gap) {
            (Some(x), Some(y)) => Some((y - x).abs() / x.abs().max(y.abs())),
            _ => None,
        },
        _ => None,
    };
    Ok(SpectralReport {
        sector,
        tag,
        r_min: grid.r_min,
        r_max: grid.r_max,
        levels,
        gap_variation,
    })
}

/// `ξ = r(u″ w − u′ w′)` with `u″` taken from the profile equation.
pub fn xi(params: &Params, u: &GridProfile, r: f64, w: f64, dw: f64) -> f64 {
    let (uu, du) = u.eval(r);
    let d2u = -du / r + params.lambda() * uu - uu.abs().powf(params.p() - 1.0) * uu;
    r * (d2u * w - du * dw)
}

/// Integrates `w″ + w′/r − (μ/r² + λ − p u^{p−1}) w = 0` from `(s, w0, dw0)` to `t`.
pub fn sector_solution(
    params: &Params,
    u: &GridProfile,
    mu: f64,
    s: f64,
    t: f64,
    w0: f64,
    dw0: f64,
) -> Result<Trajectory, LinopsError> {
    let (p, lambda) = (params.p(), params.lambda());
    let sys = FnSystem {
        dim: 2,
        f: |r: f64, y: &[f64], dy: &mut [f64]| {
            let v = mu / (r * r) + lambda - p * u.eval(r).0.abs().powf(p - 1.0);
            dy[0] = y[1];
            dy[1] = -y[1] / r + v * y[0];
        },
    };
    Ok(dopri5(&sys, s, &[w0, dw0], t, &Tolerances::new(1e-12, 1e-14), &[])?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiCheck {
    pub mu: f64,
    pub xi_s: f64,
    pub xi_t: f64,
    pub integral: f64,
    /// `|ξ(t) − ξ(s) − ∫(1−μ)u′w/r|` over the largest of the three terms.
    pub residual: f64,
}

/// Checks `ξ(t) − ξ(s) = ∫ₛᵗ (1−μ) u′ w / r dr` along a sector solution
/// started from `(w, w′) = (1, 0.3)` at `s`.
pub fn verify_xi_identity(params: &Params, u: &GridProfile, mu: f64, s: f64, t: f64) -> Result<XiCheck, LinopsError> {
    let traj = sector_solution(params, u, mu, s, t, 1.0, 0.3)?;
    let ys = traj.eval(s);
    let yt = traj.eval(t);
    let xi_s = xi(params, u, s, ys[0], ys[1]);
    let xi_t = xi(params, u, t, yt[0], yt[1]);
    let integral = if s == t {
        0.0
    } else {
        (1.0 - mu) * gauss_legendre(|r| u.eval(r).1 * traj.eval(r)[0] / r, s, t, 200)
    };
    let scale = xi_s.abs().max(xi_t.abs()).max(integral.abs()).max(f64::MIN_POSITIVE);
    Ok(XiCheck {
        mu,
        xi_s,
        xi_t,
        integral,
        residual: (xi_t - xi_s - integral).abs() / scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;
    use crate::shooting::{solve, ShootingConfig};
    use crate::specfun::{beta, green, green_derivative};
    use std::sync::OnceLock;

    fn ground() -> &'static (Params, GridProfile) {
        static G: OnceLock<(Params, GridProfile)> = OnceLock::new();
        G.get_or_init(|| {
            let params = validate(3.0, 2.0, 0.0).unwrap();
            let res = solve(&params, &ShootingConfig::default()).unwrap();
            (params, res.profile)
        })
    }

    #[test]
    fn sector_mu_values() {
        let mus: Vec<f64> = (0..7).map(|j| Sector::new(j).mu).collect();
        assert_eq!(mus, vec![0.0, 1.0, 1.0, 4.0, 4.0, 9.0, 9.0]);
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec { r_min: 0.0, r_max: 1.0, n: 100 }.nodes().is_err());
        assert!(GridSpec { r_min: 1e-4, r_max: 20.0, n: 4 }.nodes().is_err());
        let r = GridSpec { r_min: 1e-4, r_max: 20.0, n: 500 }.nodes().unwrap();
        assert_eq!(r.len(), 501);
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        assert_eq!((r[0], r[500]), (1e-4, 20.0));
    }

    #[test]
    fn tridiagonal_solver_on_known_spectrum() {
        // Discrete Dirichlet Laplacian: 2 − 2cos(kπ/(n+1)).
        let n = 50;
        let prob = Problem {
            nodes: (0..n + 2).map(|i| i as f64).collect(),
            first: 1,
            diag: vec![2.0; n],
            off: vec![-1.0; n - 1],
            sqrt_mass: vec![1.0; n],
        };
        let pairs = smallest_eigenvalues(&prob, 3).unwrap();
        for (k, p) in pairs.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((p.theta - exact).abs() < 1e-13);
            assert!(p.residual < 1e-12);
        }
    }

    #[test]
    fn free_operator_is_bounded_below_by_lambda() {
        let grid = GridSpec { r_min: 1e-3, r_max: 15.0, n: 400 };
        let prob = assemble_with(&grid, 0.0, Inner::Dirichlet, &|_| 2.0).unwrap();
        let pairs = smallest_eigenvalues(&prob, 5).unwrap();
        assert!(pairs.iter().all(|p| p.theta >= 2.0), "{:?}", pairs.iter().map(|p| p.theta).collect::<Vec<_>>());
    }

    #[test]
    fn pencil_is_symmetric_by_construction() {
        let (params, prof) = ground();
        let grid = GridSpec { r_min: 1e-4, r_max: 20.0, n: 300 };
        let prob = assemble(params, prof, Sector::new(0), Tag::Plus, &grid).unwrap();
        assert_eq!(prob.off.len() + 1, prob.dim());
        assert_eq!(prob.dim(), 300);
        let prob1 = assemble(params, prof, Sector::new(1), Tag::Plus, &grid).unwrap();
        assert_eq!(prob1.dim(), 299);
    }

    #[test]
    fn robin_functional_limit() {
        // w = f + cG_λ with f = f0 + r²: the functional tends to f0 − c(α + β).
        let (lambda, alpha, c) = (2.0, 0.3, 1.7);
        let b = beta(lambda).unwrap();
        for (f0, expect_zero) in [(c * (alpha + b), true), (c * (alpha + b) + 0.5, false)] {
            let at = |r: f64| {
                let w = f0 + r * r + c * green(lambda, r).unwrap();
                let dw = 2.0 * r + c * green_derivative(lambda, r).unwrap();
                robin_functional(alpha, r, w, dw)
            };
            let (a, z) = (at(1e-3).abs(), at(1e-6).abs());
            if expect_zero {
                assert!(z < a && z < 1e-9, "{a} {z}");
            } else {
                assert!((z - 0.5).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn corrected_robin_matches_profile_log_derivative() {
        let plain = robin_rho(0.3, 1e-4);
        assert!((robin_rho_with(0.3, 1e-4, &|_| 0.0) - plain).abs() < 1e-14 * plain.abs());
        // u itself solves the sector-0 L⁻ equation, so r u′/u at r is the
        // exact Robin coefficient.
        let (params, prof) = ground();
        let (p, l, y) = (params.p(), params.lambda(), prof.y_u());
        let v0 = |s: f64| {
            let u = y * (-s.ln() / (2.0 * std::f64::consts::PI) + params.alpha());
            l - u.abs().powf(p - 1.0)
        };
        let r = 1e-3;
        let (u, du) = prof.eval(r);
        let exact = r * du / u;
        let leading = (robin_rho(params.alpha(), r) - exact).abs() / exact.abs();
        let corrected = (robin_rho_with(params.alpha(), r, &v0) - exact).abs() / exact.abs();
        assert!(corrected < 1e-7 && corrected < 1e-3 * leading, "{leading:e} {corrected:e}");
    }

    #[test]
    fn minus_kernel_eigenvalue_converges_at_second_order() {
        let (params, prof) = ground();
        let near = |n| {
            let grid = GridSpec { r_min: 1e-3, r_max: prof.r_max(), n };
            spectrum_level(params, prof, Sector::new(0), Tag::Minus, &grid, 2).unwrap().nearest
        };
        let (a, b) = (near(1000), near(2000));
        assert!(b > 0.0 && (a / b - 4.0).abs() < 0.3, "{a:e} {b:e}");
    }

    #[test]
    fn minus_sector_zero_has_profile_kernel() {
        let (params, prof) = ground();
        let grid = GridSpec { r_min: 1e-4, r_max: prof.r_max(), n: 1000 };
        let lvl = spectrum_level(params, prof, Sector::new(0), Tag::Minus, &grid, 4).unwrap();
        assert!(lvl.nearest.abs() < 5e-3, "{}", lvl.nearest);
        assert!(lvl.nearest_overlap > 0.999, "{}", lvl.nearest_overlap);
        assert_eq!(lvl.negative_count, 0);
        assert!(lvl.kernel_gap.unwrap() > 0.1);
    }

    #[test]
    fn xi_identity_and_constancy() {
        let (params, prof) = ground();
        for mu in [0.0, 1.0, 4.0] {
            let chk = verify_xi_identity(params, prof, mu, 0.5, 5.0).unwrap();
            assert!(chk.residual < 1e-6, "mu={mu} {chk:?}");
            if mu == 1.0 {
                assert_eq!(chk.integral, 0.0);
                assert!((chk.xi_t - chk.xi_s).abs() <= 1e-8 * chk.xi_s.abs().max(chk.xi_t.abs()));
            }
        }
        assert_eq!(xi(params, prof, 1.0, 0.0, 0.0), 0.0);
        let near = verify_xi_identity(params, prof, 4.0, 1.0, 1.0).unwrap();
        assert_eq!(near.xi_t - near.xi_s, 0.0);
        // w = u′ solves the μ = 1 equation, for which ξ vanishes identically.
        for r in [0.3, 1.0, 3.0] {
            let (uu, du) = prof.eval(r);
            let d2u = -du / r + params.lambda() * uu - uu.powi(3);
            assert!(xi(params, prof, r, du, d2u).abs() < 1e-12);
        }
    }
}
