//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.
//!
//! One item cannot be met: the triple (p, λ, α) = (5, 3, −0.25) lies below
//! the threshold |e_α| ≈ 29.2, so no positive solution exists and the solver
//! rejects it. That item is evaluated as stated and reported as FAIL; the
//! test asserts it fails for that reason and that nothing else fails.

use std::f64::consts::PI;

use pointground::linops::{spectral_report, verify_xi_identity, GridSpec, Sector, Tag};
use pointground::model::{functionals, negative_eigenvalue, validate, GridProfile, Params};
use pointground::numerics::geomspace;
use pointground::perturbed::{check_green, green_perturbed, residual_of_ground_state, PerturbedSetup, GREEN_R_LO};
use pointground::pohozaev::{j, verify_identity, x_selfcheck, PohozaevCoefficients, DEFAULT_ETA};
use pointground::shooting::{ode_residual, ordering_check, shot_profile, solve, ShootingConfig, ShootingResult};
use pointground::specfun::{self, EULER_GAMMA};
use pointground::Error;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

fn report(n: usize, o: &Outcome) {
    println!("criterion {n:>2}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

/// Independent shooting: classical RK4 in `t = ln r` on `(u, r u′)` from
/// `r = 1e-7`, where the log asymptote is accurate to far below 1e-9.
fn rk4_y_star(p: f64, lambda: f64, alpha: f64) -> f64 {
    // +1 when the shot crosses zero (too strong), −1 when it turns up.
    let classify = |y: f64| -> i32 {
        let h = 1e-3;
        let (t0, t1) = ((1e-7f64).ln(), 20f64.ln());
        let mut t = t0;
        let mut s = [y * (-t / (2.0 * PI) + alpha), -y / (2.0 * PI)];
        let f = |t: f64, s: [f64; 2]| {
            let r2 = (2.0 * t).exp();
            [s[1], r2 * (lambda * s[0] - s[0].abs().powf(p - 1.0) * s[0])]
        };
        while t < t1 {
            let k1 = f(t, s);
            let k2 = f(t + h / 2.0, [s[0] + h / 2.0 * k1[0], s[1] + h / 2.0 * k1[1]]);
            let k3 = f(t + h / 2.0, [s[0] + h / 2.0 * k2[0], s[1] + h / 2.0 * k2[1]]);
            let k4 = f(t + h, [s[0] + h * k3[0], s[1] + h * k3[1]]);
            for i in 0..2 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += h;
            if s[0] < 0.0 {
                return 1;
            }
            if s[1] > 0.0 {
                return -1;
            }
        }
        0
    };
    let (mut lo, mut hi) = (1e-2, 1e-2);
    while classify(hi) != 1 {
        hi *= 2.0;
    }
    while classify(lo) != -1 {
        lo /= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if classify(mid) == 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn solve_default(params: &Params) -> Result<ShootingResult, Error> {
    Ok(solve(params, &ShootingConfig::default())?)
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    for alpha in [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0] {
        let e = negative_eigenvalue(alpha);
        let b = pointground::model::beta(e.abs()).unwrap();
        worst = worst.max((alpha + b).abs());
    }
    Outcome::new(worst <= 1e-12, format!("max |α + β(|e_α|)| = {worst:.3e} (limit 1e-12)"))
}

fn criterion_2() -> Outcome {
    let r = 1e-4;
    let mut worst = 0.0f64;
    let mut beta_err = 0.0f64;
    for lambda in [1.0, 2.0, 4.0] {
        let b = specfun::beta(lambda).unwrap();
        // β(λ) = (ln(√λ/2) + γ)/2π, written out independently.
        beta_err = beta_err.max((b - ((lambda.sqrt() / 2.0).ln() + EULER_GAMMA) / (2.0 * PI)).abs());
        let g = specfun::green(lambda, r).unwrap();
        worst = worst.max((g + r.ln() / (2.0 * PI) + b).abs());
    }
    Outcome::new(
        worst <= 1e-6 && beta_err <= 1e-14,
        format!("max |G + ln r/2π + β| = {worst:.3e} at r = 1e-4 (limit 1e-6); β formula error {beta_err:.1e}"),
    )
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    for x in geomspace(1e-3, 20.0, 50) {
        let w = specfun::bessel_i(0, x).unwrap() * specfun::bessel_k(1, x).unwrap()
            + specfun::bessel_i(1, x).unwrap() * specfun::bessel_k(0, x).unwrap();
        worst = worst.max((w - 1.0 / x).abs());
    }
    Outcome::new(worst <= 1e-9, format!("max |I0K1 + I1K0 − 1/x| = {worst:.3e} (limit 1e-9)"))
}

/// Per-triple result of the shooting criterion.
struct SolveCheck {
    triple: (f64, f64, f64),
    error: Option<Error>,
    pass: bool,
    detail: String,
}

fn check_solve(triple: (f64, f64, f64)) -> SolveCheck {
    let (p, l, a) = triple;
    let run = || -> Result<(bool, String), Error> {
        let params = validate(p, l, a)?;
        let res = solve_default(&params)?;
        let prof = &res.profile;
        let resid = ode_residual(prof, &params);
        let y_fine = res.refinement_history.last().map(|x| x.1).unwrap_or(f64::NAN);
        let refine = (y_fine - res.y_star).abs() / res.y_star;
        let oracle = rk4_y_star(p, l, a);
        let vs_oracle = (res.y_star - oracle).abs() / oracle;
        let shape = prof.is_positive_decreasing(0.0);
        let pass = res.bracket_width <= 1e-10 && shape && resid <= 1e-6 && refine <= 1e-6 && vs_oracle <= 1e-6;
        Ok((
            pass,
            format!(
                "y* = {:.12}, oracle {:.12} (rel {:.1e}), bracket {:.1e}, residual {:.1e}, r0 refinement {:.1e}, positive/decreasing {}",
                res.y_star, oracle, vs_oracle, res.bracket_width, resid, refine, shape
            ),
        ))
    };
    match run() {
        Ok((pass, detail)) => SolveCheck {
            triple,
            error: None,
            pass,
            detail,
        },
        Err(e) => SolveCheck {
            triple,
            detail: e.to_string(),
            error: Some(e),
            pass: false,
        },
    }
}

fn criterion_5(params: &Params, prof: &GridProfile) -> Outcome {
    let f = functionals(prof, params, None).unwrap();
    let nehari = (f.q - f.npw).abs() / f.npw;
    let action = (f.s - f.c_p * f.npw).abs() / f.s;
    Outcome::new(
        nehari <= 1e-4 && action <= 1e-4,
        format!("|Q − Npw|/Npw = {nehari:.2e}, |S − c_p Npw|/S = {action:.2e} (limit 1e-4)"),
    )
}

fn interior_radii(prof: &GridProfile, eta: f64) -> Vec<f64> {
    prof.r()
        .iter()
        .copied()
        .filter(|&r| r * (1.0 - eta) >= prof.r_min() && r * (1.0 + eta) <= prof.r_max())
        .collect()
}

fn criterion_6(params: &Params, prof: &GridProfile) -> Outcome {
    let k = PohozaevCoefficients::unperturbed(params);
    let radii = interior_radii(prof, DEFAULT_ETA);
    let tr = verify_identity(prof, &k, &radii, DEFAULT_ETA);
    let half = verify_identity(prof, &k, &radii, DEFAULT_ETA / 2.0);
    let ratio = tr.max_normalized_residual / half.max_normalized_residual;
    let all_j = prof.r().iter().map(|&r| j(prof, &k, r)).fold(f64::INFINITY, f64::min);
    let j_end = j(prof, &k, prof.r_max()).abs();
    let pass = tr.max_normalized_residual <= 1e-5 && (3.0..=5.0).contains(&ratio) && all_j > 0.0 && j_end <= 1e-8;
    Outcome::new(
        pass,
        format!(
            "residual {:.2e} (limit 1e-5), halving ratio {ratio:.3}, min J {all_j:.2e}, |J(r_max)| {j_end:.1e}",
            tr.max_normalized_residual
        ),
    )
}

fn criterion_7(params: &Params, res: &ShootingResult) -> Outcome {
    let cfg = ShootingConfig::default();
    let y = res.y_star * (1.0 - 1e-3);
    let ord = ordering_check(params, y, 1.1 * y, &cfg).unwrap();
    let prof = &res.profile;
    let (v, _) = shot_profile(params, 1.1 * res.y_star, &cfg).unwrap();
    let k = PohozaevCoefficients::unperturbed(params);
    let worst_x = interior_radii(prof, DEFAULT_ETA)
        .into_iter()
        .filter(|&r| r < v.r_max() && v.eval(r).0 > 0.0)
        .map(|r| x_selfcheck(prof, &v, &k, r))
        .fold(0.0f64, f64::max);
    Outcome::new(
        ord.strictly_decreasing() && ord.radii.len() == 100 && worst_x <= 1e-8,
        format!(
            "ratio decreasing at {} radii ({} violations), X two forms {worst_x:.2e} (limit 1e-8)",
            ord.radii.len(),
            ord.violations.len()
        ),
    )
}

fn criterion_8(params: &Params, prof: &GridProfile) -> Outcome {
    let mut worst = 0.0f64;
    let mut boundary = f64::NAN;
    for mu in [0.0, 1.0, 4.0] {
        let c = verify_xi_identity(params, prof, mu, 0.5, 5.0).unwrap();
        worst = worst.max(c.residual);
        if mu == 1.0 {
            boundary = (c.xi_t - c.xi_s).abs() / c.xi_s.abs().max(c.xi_t.abs());
        }
    }
    Outcome::new(
        worst <= 1e-6 && boundary <= 1e-8,
        format!("max normalized residual {worst:.2e} (limit 1e-6), μ = 1 boundary mismatch {boundary:.2e} (limit 1e-8)"),
    )
}

fn criterion_9(params: &Params, prof: &GridProfile) -> Outcome {
    let grid = GridSpec {
        r_min: 1e-4,
        r_max: prof.r_max(),
        n: 500,
    };
    let ns = [500, 1000, 2000];
    let mut ok = true;
    let mut parts = Vec::new();
    for j in [0, 1, 3] {
        let rep = spectral_report(params, prof, Sector::new(j), Tag::Plus, &grid, &ns, 4).unwrap();
        let gaps: Vec<f64> = rep.levels.iter().map(|l| l.kernel_gap.unwrap_or(0.0)).collect();
        let var = rep.gap_variation.unwrap_or(f64::INFINITY);
        ok &= gaps.iter().all(|&g| g > 0.0) && var < 0.25;
        parts.push(format!("L+ μ={} gaps {:.4}/{:.4}/{:.4} var {:.1e}", rep.sector.mu, gaps[0], gaps[1], gaps[2], var));
    }
    let rep = spectral_report(params, prof, Sector::new(0), Tag::Minus, &grid, &ns, 4).unwrap();
    let near: Vec<f64> = rep.levels.iter().map(|l| l.nearest.abs()).collect();
    let fin = rep.finest();
    ok &= fin.nearest.abs() <= 5e-4 && fin.nearest_overlap >= 0.999;
    let shrink = [near[0] / near[1], near[1] / near[2]];
    // Second order: each halving of the mesh divides the eigenvalue by about 4.
    ok &= shrink.iter().all(|&s| s > 3.0);
    parts.push(format!(
        "L- nearest {:.3e}/{:.3e}/{:.3e} (limit 5e-4, ratios {:.2}/{:.2}), overlap {:.9}",
        near[0], near[1], near[2], shrink[0], shrink[1], fin.nearest_overlap
    ));
    Outcome::new(ok, parts.join("; "))
}

fn criterion_10(params: &Params, prof: &GridProfile) -> Outcome {
    let setup = PerturbedSetup::new(*params, 1e-2, prof.clone()).unwrap();
    let g = green_perturbed(&setup, GREEN_R_LO).unwrap();
    let chk = check_green(&setup, &g, prof.r_max()).unwrap();
    let k_err = (chk.k_extrapolated - g.k).abs() / g.k;
    let res_gap = (residual_of_ground_state(&setup, prof) - ode_residual(prof, params)).abs();
    let pass = g.c1 > 1.0 && g.c2 < 0.0 && g.k > 0.0 && chk.tilde_outer_match <= 1e-10 && k_err <= 1e-4 && res_gap <= 1e-12;
    Outcome::new(
        pass,
        format!(
            "c1 = {:.9}, c2 = {:.3e}, k = {:.3e}; outer match {:.1e} (limit 1e-10, G_λ,ε/G_λ = {:.7}); origin limit rel {:.1e}; residual gap {:.1e}",
            g.c1, g.c2, g.k, chk.tilde_outer_match, chk.outer_ratio, k_err, res_gap
        ),
    )
}

fn criterion_11(params: &Params) -> Outcome {
    let r = geomspace(1e-3, 10.0, 2000);
    let u: Vec<f64> = r.iter().map(|&x| (-x * x).exp()).collect();
    let du: Vec<f64> = r.iter().map(|&x| -2.0 * x * (-x * x).exp()).collect();
    let gauss = GridProfile::new(r, u, du, 0.0).unwrap();
    let k = PohozaevCoefficients::unperturbed(params);
    let bad = verify_identity(&gauss, &k, &geomspace(0.05, 3.0, 100), DEFAULT_ETA);
    Outcome::new(
        bad.max_normalized_residual > 1e-2,
        format!("Gaussian residual {:.3e} (must exceed 1e-2)", bad.max_normalized_residual),
    )
}

#[test]
fn acceptance() {
    let mut failures = Vec::new();
    let mut record = |n: usize, o: Outcome| {
        report(n, &o);
        if !o.pass {
            failures.push(n);
        }
    };

    record(1, criterion_1());
    record(2, criterion_2());
    record(3, criterion_3());

    let solves: Vec<SolveCheck> = [(3.0, 2.0, 0.0), (2.0, 2.0, 0.5), (5.0, 3.0, -0.25)]
        .into_iter()
        .map(check_solve)
        .collect();
    for s in &solves {
        println!(
            "    (p, λ, α) = {:?}: {} | {}",
            s.triple,
            if s.pass { "ok" } else { "failed" },
            s.detail
        );
    }
    let c4 = solves.iter().all(|s| s.pass);
    record(
        4,
        Outcome::new(
            c4,
            format!("{} of {} triples solved to specification", solves.iter().filter(|s| s.pass).count(), solves.len()),
        ),
    );
    // The only admissible failure: the subcritical triple is rejected.
    for s in &solves {
        if s.triple == (5.0, 3.0, -0.25) {
            assert_eq!(s.error.as_ref().map(|e| e.kind()), Some("SubcriticalLambda"));
        } else {
            assert!(s.pass, "{:?}: {}", s.triple, s.detail);
        }
    }

    let mut c5 = Vec::new();
    for triple in [(3.0, 2.0, 0.0), (2.0, 2.0, 0.5)] {
        let params = validate(triple.0, triple.1, triple.2).unwrap();
        let res = solve_default(&params).unwrap();
        c5.push(criterion_5(&params, &res.profile));
    }
    record(
        5,
        Outcome::new(
            c5.iter().all(|o| o.pass),
            c5.iter().map(|o| o.detail.as_str()).collect::<Vec<_>>().join("; "),
        ),
    );

    let params = validate(3.0, 2.0, 0.0).unwrap();
    let res = solve_default(&params).unwrap();
    let prof = &res.profile;
    record(6, criterion_6(&params, prof));
    record(7, criterion_7(&params, &res));
    record(8, criterion_8(&params, prof));
    record(9, criterion_9(&params, prof));
    record(10, criterion_10(&params, prof));
    record(11, criterion_11(&params));

    assert_eq!(failures, vec![4], "unexpected failing criteria");
}
