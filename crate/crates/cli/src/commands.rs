//! The five subcommands. Each returns the names of the files it wrote.

use serde::Serialize;
use std::path::Path;

use pointground::linops::{spectral_report, GridSpec, Sector, SpectralReport, Tag};
use pointground::model::{functionals, regular_part, Params};
use pointground::numerics::geomspace;
use pointground::perturbed::{
    check_green, downscan, green_perturbed, perturbed_quadratic_form, residual_of_ground_state,
    GreenChecks, PerturbedSetup, SignScan, GREEN_R_LO,
};
use pointground::pohozaev::{j, verify_identity, x_selfcheck, PohozaevCoefficients, DEFAULT_ETA};
use pointground::shooting::{ode_residual, shot_profile, solve, ShootingResult};
use pointground::specfun;
use pointground::Error;

use crate::config::RunConfig;
use crate::output::{write_json, write_table, Check, Checks, Table};

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Model(#[from] Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CommandError {
    pub fn kind(&self) -> &'static str {
        match self {
            CommandError::Model(e) => e.kind(),
            CommandError::Io(_) => "Io",
        }
    }
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Model(e) => e.exit_code(),
            CommandError::Io(_) => 1,
        }
    }
}

type Outcome = Result<Vec<String>, CommandError>;

fn ground(cfg: &RunConfig) -> Result<(Params, ShootingResult), Error> {
    let params = cfg.params()?;
    let res = solve(&params, &cfg.shooting())?;
    Ok((params, res))
}

fn out_dir(cfg: &RunConfig) -> &Path {
    &cfg.out
}

#[derive(Serialize)]
struct SolveSummary {
    p: f64,
    lambda: f64,
    alpha: f64,
    y_star: f64,
    #[serde(rename = "S")]
    s: f64,
    #[serde(rename = "K")]
    k: f64,
    #[serde(rename = "Q")]
    q: f64,
    #[serde(rename = "Npw")]
    npw: f64,
    decay_epsilon: Option<f64>,
    bracket_width: f64,
    y_star_refined: f64,
    ode_residual: f64,
    splice_radius: f64,
    flagged: bool,
    paper_checks: Checks,
}

pub fn cmd_solve(cfg: &RunConfig) -> Outcome {
    let (params, res) = ground(cfg)?;
    let prof = &res.profile;
    let f = regular_part(prof, &params).map_err(Error::from)?;
    let fl = functionals(prof, &params, None).map_err(Error::from)?;
    let rows = (0..prof.len())
        .map(|i| vec![prof.r()[i], prof.u()[i], prof.du()[i], f.u()[i], f.du()[i]])
        .collect();
    let table = Table {
        columns: vec!["r", "u", "du", "f", "df"],
        rows,
    };
    let name = write_table(out_dir(cfg), "profile", &table, cfg.format)?;

    let resid = ode_residual(prof, &params);
    let y_fine = res.refinement_history.last().map(|x| x.1).unwrap_or(res.y_star);
    let mut checks = Checks::new();
    checks.insert("bracket_width", Check::at_most(res.bracket_width, 1e-10));
    checks.insert("ode_residual", Check::at_most(resid, 1e-6));
    checks.insert(
        "positive_decreasing",
        Check::at_least(if prof.is_positive_decreasing(0.0) { 1.0 } else { 0.0 }, 1.0),
    );
    checks.insert("r0_refinement", Check::at_most((y_fine - res.y_star).abs() / res.y_star, 1e-6));
    checks.insert("nehari_identity", Check::at_most(fl.k.abs() / fl.npw, 1e-4));
    checks.insert("action_identity", Check::at_most((fl.s - fl.c_p * fl.npw).abs() / fl.s, 1e-4));
    let summary = SolveSummary {
        p: params.p(),
        lambda: params.lambda(),
        alpha: params.alpha(),
        y_star: res.y_star,
        s: fl.s,
        k: fl.k,
        q: fl.q,
        npw: fl.npw,
        decay_epsilon: res.decay.map(|d| d.epsilon),
        bracket_width: res.bracket_width,
        y_star_refined: y_fine,
        ode_residual: resid,
        splice_radius: res.splice_radius,
        flagged: res.flagged,
        paper_checks: checks,
    };
    write_json(out_dir(cfg), "summary.json", &summary)?;
    Ok(vec![name, "summary.json".into()])
}

#[derive(Serialize)]
struct PohozaevSummary {
    q: f64,
    eta: f64,
    max_normalized_residual: f64,
    max_normalized_residual_half_step: f64,
    refinement_ratio: f64,
    min_j: f64,
    j_at_r_max: f64,
    comparison_strength: f64,
    max_x_selfcheck: f64,
    paper_checks: Checks,
}

pub fn cmd_pohozaev(cfg: &RunConfig) -> Outcome {
    let (params, res) = ground(cfg)?;
    let prof = &res.profile;
    let coeffs = PohozaevCoefficients::unperturbed(&params);
    let eta = DEFAULT_ETA;
    let radii: Vec<f64> = prof
        .r()
        .iter()
        .copied()
        .filter(|&r| r * (1.0 - eta) >= prof.r_min() && r * (1.0 + eta) <= prof.r_max())
        .collect();
    let tr = verify_identity(prof, &coeffs, &radii, eta);
    let half = verify_identity(prof, &coeffs, &radii, eta / 2.0);

    // Comparison shot above the ground-state strength for the X columns.
    let y_v = 1.1 * res.y_star;
    let (v, _) = shot_profile(&params, y_v, &cfg.shooting()).map_err(Error::from)?;
    let xs: Vec<f64> = radii
        .iter()
        .map(|&r| if r < v.r_max() && v.eval(r).0 > 0.0 { x_selfcheck(prof, &v, &coeffs, r) } else { f64::NAN })
        .collect();
    let rows = (0..radii.len())
        .map(|i| vec![radii[i], tr.j[i], tr.cu2[i], tr.residual[i], xs[i]])
        .collect();
    let table = Table {
        columns: vec!["r", "J", "Cu2", "residual", "X_selfcheck"],
        rows,
    };
    let name = write_table(out_dir(cfg), "pohozaev", &table, cfg.format)?;

    let j_end = j(prof, &coeffs, prof.r_max());
    let max_x = xs.iter().filter(|x| !x.is_nan()).fold(0.0f64, |a, &b| a.max(b));
    let ratio = tr.max_normalized_residual / half.max_normalized_residual;
    let mut checks = Checks::new();
    checks.insert("identity_residual", Check::at_most(tr.max_normalized_residual, 1e-5));
    checks.insert("identity_second_order", Check::at_least(ratio, 3.0));
    checks.insert("j_positive", Check::above(tr.min_j, 0.0));
    checks.insert("j_vanishes_at_infinity", Check::at_most(j_end.abs(), 1e-8));
    checks.insert("x_two_forms", Check::at_most(max_x, 1e-8));
    let summary = PohozaevSummary {
        q: coeffs.q,
        eta,
        max_normalized_residual: tr.max_normalized_residual,
        max_normalized_residual_half_step: half.max_normalized_residual,
        refinement_ratio: ratio,
        min_j: tr.min_j,
        j_at_r_max: j_end,
        comparison_strength: y_v,
        max_x_selfcheck: max_x,
        paper_checks: checks,
    };
    write_json(out_dir(cfg), "pohozaev_summary.json", &summary)?;
    Ok(vec![name, "pohozaev_summary.json".into()])
}

/// Worker count from `POINTGROUND_THREADS`, else the available parallelism.
pub fn thread_budget() -> usize {
    std::env::var("POINTGROUND_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

#[derive(Serialize)]
struct SpectrumOut {
    r_min: f64,
    r_max: f64,
    grids: [usize; 2],
    reports: Vec<SpectralReport>,
    paper_checks: Checks,
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Outcome {
    let (params, res) = ground(cfg)?;
    let prof = &res.profile;
    let grid = GridSpec {
        r_min: cfg.r_min,
        r_max: cfg.r_max.unwrap_or(prof.r_max()),
        n: cfg.n,
    };
    let ns = [cfg.n, 2 * cfg.n];
    let jobs: Vec<(usize, Tag)> = cfg
        .sectors
        .iter()
        .flat_map(|&j| cfg.tags.iter().map(move |&t| (j, t)))
        .collect();

    let threads = thread_budget().min(jobs.len()).max(1);
    let mut results: Vec<Option<Result<SpectralReport, Error>>> = vec![None; jobs.len()];
    for (chunk_jobs, chunk_out) in jobs.chunks(threads).zip(results.chunks_mut(threads)) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk_jobs
                .iter()
                .map(|&(j, tag)| {
                    let params = &params;
                    s.spawn(move || {
                        spectral_report(params, prof, Sector::new(j), tag, &grid, &ns, cfg.k).map_err(Error::from)
                    })
                })
                .collect();
            for (slot, h) in chunk_out.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("spectrum worker panicked"));
            }
        });
    }
    let reports = results
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect::<Result<Vec<_>, _>>()?;

    let mut checks = Checks::new();
    let mut worst_gap = f64::INFINITY;
    let mut worst_var = 0.0f64;
    for rep in reports.iter().filter(|r| r.tag == Tag::Plus) {
        for lvl in &rep.levels {
            worst_gap = worst_gap.min(lvl.kernel_gap.unwrap_or(0.0));
        }
        worst_var = worst_var.max(rep.gap_variation.unwrap_or(f64::INFINITY));
    }
    if worst_gap.is_finite() {
        checks.insert("plus_kernel_gap", Check::above(worst_gap, 0.0));
        checks.insert("plus_gap_refinement", Check::at_most(worst_var, 0.25));
    }
    if let Some(rep) = reports.iter().find(|r| r.tag == Tag::Minus && r.sector.j == 0) {
        let f = rep.finest();
        checks.insert("minus_kernel_eigenvalue", Check::at_most(f.nearest.abs(), 5e-4));
        checks.insert("minus_kernel_overlap", Check::at_least(f.nearest_overlap, 0.999));
    }
    let out = SpectrumOut {
        r_min: grid.r_min,
        r_max: grid.r_max,
        grids: ns,
        reports,
        paper_checks: checks,
    };
    write_json(out_dir(cfg), "spectrum.json", &out)?;
    Ok(vec!["spectrum.json".into()])
}

#[derive(Serialize)]
struct PerturbedOut {
    c1: f64,
    c2: f64,
    k: f64,
    eps_requested: f64,
    eps_used: f64,
    sign_scan: SignScanSummary,
    residual_of_ground_state: f64,
    unperturbed_residual: f64,
    green: GreenChecks,
    nehari_value: f64,
    paper_checks: Checks,
}

#[derive(Serialize)]
struct SignScanSummary {
    sign: i32,
    negative: usize,
    positive: usize,
    radii: usize,
    max_c_eps: f64,
    min_c_eps: f64,
}

impl From<&SignScan> for SignScanSummary {
    fn from(s: &SignScan) -> Self {
        Self {
            sign: s.sign(),
            negative: s.negative,
            positive: s.positive,
            radii: s.radii.len(),
            max_c_eps: s.c_eps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min_c_eps: s.c_eps.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

pub fn cmd_perturbed(cfg: &RunConfig) -> Outcome {
    let (params, res) = ground(cfg)?;
    let r_max = res.profile.r_max();
    let setup = PerturbedSetup::new(params, cfg.eps, res.profile).map_err(Error::from)?;
    let radii = geomspace(1e-3, r_max, 400);
    let (used, scan) = downscan(&setup, &radii, 30).map_err(Error::from)?;
    let green = green_perturbed(&used, GREEN_R_LO).map_err(Error::from)?;
    let chk = check_green(&used, &green, r_max).map_err(Error::from)?;
    let resid = residual_of_ground_state(&used, used.ground());
    let base = ode_residual(used.ground(), &params);
    let fl = perturbed_quadratic_form(used.ground(), &used, &green).map_err(Error::from)?;

    let mut checks = Checks::new();
    checks.insert("c1_above_one", Check::above(green.c1, 1.0));
    checks.insert("c2_negative", Check::above(-green.c2, 0.0));
    checks.insert("k_positive", Check::above(green.k, 0.0));
    checks.insert("green_tilde_outer_match", Check::at_most(chk.tilde_outer_match, 1e-10));
    checks.insert("green_inner_combination", Check::at_most(chk.inner_match, 1e-9));
    checks.insert("green_origin_limit", Check::at_most((chk.k_extrapolated - green.k).abs(), 1e-4));
    checks.insert("constants_two_ways", Check::at_most(chk.fitted_relative_error, 1e-6));
    checks.insert("residual_cancellation", Check::at_most((resid - base).abs(), 1e-12));
    checks.insert("perturbed_nehari", Check::at_most(fl.k.abs() / fl.npw, 1e-4));
    let out = PerturbedOut {
        c1: green.c1,
        c2: green.c2,
        k: green.k,
        eps_requested: cfg.eps,
        eps_used: used.eps(),
        sign_scan: (&scan).into(),
        residual_of_ground_state: resid,
        unperturbed_residual: base,
        green: chk,
        nehari_value: fl.k,
        paper_checks: checks,
    };
    write_json(out_dir(cfg), "perturbed.json", &out)?;
    Ok(vec!["perturbed.json".into()])
}

pub fn cmd_green(cfg: &RunConfig) -> Outcome {
    let params = cfg.params()?;
    let l = params.lambda();
    let r_max = cfg.r_max.unwrap_or(20.0f64.max(12.0 / l.sqrt()));
    let rows = geomspace(cfg.r_min, r_max, cfg.n + 1)
        .into_iter()
        .map(|r| -> Result<Vec<f64>, Error> {
            Ok(vec![r, specfun::green(l, r)?, specfun::green_defect(l, r)?])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let table = Table {
        columns: vec!["r", "G", "defect"],
        rows,
    };
    Ok(vec![write_table(out_dir(cfg), "green", &table, cfg.format)?])
}
