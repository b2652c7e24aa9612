//! The three front-end commands. Each writes a self-describing run
//! directory (config copy, CSV tables, `summary.txt`, `manifest.json`) and
//! returns its checks; the binary only parses flags and maps outcomes to
//! exit codes.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::json;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geometry::ConvexPair;
use crate::heat::{heat_extension, semigroup_invariant_checks};
use crate::io::{all_pass, Check, RunDir, Table};
use crate::perturbation::{assemble_perturbation, rectangle_grid, PerturbationResult};
use crate::pipeline::{barrel_sweep, limit_comparison, p0_field, p0_report, relative_spread, strictly_decreasing, LimitGrid};
use crate::potentials::{calibrate_g_corridor, check_q_heat_gap, make_g, make_q, wing_grid, FlowSpec};
use crate::spectral::{ball_radial_eigenvalue, ground_eigenpair, space_time_hotspot_ratio};
use crate::stochastic::{check_barrier, default_probes, feynman_kac_check, reflected_bm_variance, simulate_hitting, McConfig};
use crate::wings::{build_wing_pair, wing_base_grid, wing_eigen_study, WingRow};

/// Grids coarser than this solve but carry a warning.
pub const MIN_CELLS: usize = 8;

pub const PRESETS: &[&str] = &["rectangle", "perturbed", "wing"];

#[derive(Debug, Clone)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        all_pass(&self.checks)
    }
}

/// Sizes the global rayon pool; `0` keeps the default. Only the first call
/// in a process takes effect.
pub fn install_workers(workers: usize) {
    if workers > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn perturbation(cfg: &Config, nx: usize, ny: usize) -> Result<PerturbationResult> {
    assemble_perturbation(Arc::new(make_q(cfg.delta)?), &rectangle_grid(nx, ny)?, 1.0)
}

fn flow() -> Result<FlowSpec> {
    make_g(calibrate_g_corridor()?)
}

/// The pair named by `cfg.preset` on an `nx x ny` base grid.
pub fn preset_pair(cfg: &Config) -> Result<ConvexPair> {
    match cfg.preset.as_str() {
        "rectangle" => Ok(ConvexPair::zero(rectangle_grid(cfg.nx, cfg.ny)?)),
        "perturbed" => {
            let pr = perturbation(cfg, cfg.nx, cfg.ny)?;
            pr.scaled_pair(cfg.eps, &pr.grid)
        }
        "wing" => {
            let (m, l) = cfg.wing_pairs()[0];
            let pr = perturbation(cfg, cfg.nx, cfg.ny)?;
            let grid = wing_base_grid(&pr.grid, m, l)?;
            Ok(build_wing_pair(&pr, &flow()?, &grid, cfg.eps, m, l)?.pair)
        }
        other => Err(Error::Config(format!("unknown preset {other:?}; expected one of {}", PRESETS.join(", ")))),
    }
}

fn grid_warnings(cfg: &Config) -> Vec<String> {
    if cfg.nx < MIN_CELLS || cfg.ny < MIN_CELLS {
        vec![format!("grid {}x{} is below {MIN_CELLS} cells per axis; eigenvalues are coarse", cfg.nx, cfg.ny)]
    } else {
        Vec::new()
    }
}

/// Ground eigenpair of the preset pair.
pub fn cmd_eig(cfg: &Config, out: &Path) -> Result<Outcome> {
    let warnings = grid_warnings(cfg);
    let pair = preset_pair(cfg)?;
    let e = ground_eigenpair(&pair, cfg.tol)?;
    let mut dir = RunDir::create(out)?;
    dir.write_text("config.txt", &cfg.to_text())?;
    let mut t = Table::new(&["x", "y", "phi", "weight"]);
    for k in 0..e.grid.len() {
        let (x, y) = e.grid.point(k);
        t.push(vec![x, y, e.phi1[k], e.weights[k]])?;
    }
    dir.write_table("eigenpair.csv", &t)?;
    let checks = vec![
        Check::new("spectral gap", e.gap_ok, format!("lambda1 = {:.12}, lambda2 = {:.12}", e.lambda1, e.lambda2)),
        Check::new("residual", e.residual <= cfg.tol.max(1e-8), format!("{:.3e}", e.residual)),
    ];
    dir.write_summary(&checks)?;
    dir.write_manifest("eig", cfg, json!({ "preset": cfg.preset, "eigen": e, "warnings": warnings }))?;
    Ok(Outcome { checks, warnings })
}

fn wing_rows(cfg: &Config, pr: &PerturbationResult, flow: &FlowSpec) -> Result<Vec<WingRow>> {
    let rows: Vec<Vec<WingRow>> =
        cfg.wing_pairs().par_iter().map(|&ml| wing_eigen_study(pr, flow, cfg.eps, &[ml], cfg.tol).map(|s| s.rows)).collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Full chain from the profile `q` to the limit-level comparison, plus the
/// optional barrel sweep.
pub fn cmd_pipeline(cfg: &Config, out: &Path) -> Result<Outcome> {
    let mut warnings = grid_warnings(cfg);
    let mut dir = RunDir::create(out)?;
    dir.write_text("config.txt", &cfg.to_text())?;
    let mut checks = Vec::new();
    let mut results = serde_json::Map::new();

    let q = make_q(cfg.delta)?;
    let gap = check_q_heat_gap(&|y| q.value(y), cfg.nt.max(64), cfg.ny.max(64))?;
    checks.push(Check::new("q heat gap", gap.positive(), format!("min_t H(0,t) - H(1,t) = {:.6e} at t = {:.4}", gap.min_gap, gap.argmin_t)));

    let flow = flow()?;
    results.insert("flow_amplitude".into(), json!(flow.amplitude));

    // wings
    let pr_w = perturbation(cfg, cfg.nx, cfg.wing_ny)?;
    let rows = wing_rows(cfg, &pr_w, &flow)?;
    let mut t = Table::new(&["m", "l", "lambda", "err_core", "err_transport", "pde_defect"]);
    for r in &rows {
        t.push(vec![r.m, r.l, r.lambda, r.err_core, r.err_transport, r.pde_defect])?;
    }
    dir.write_table("wings.csv", &t)?;
    if rows.len() >= 2 {
        let core: Vec<f64> = rows.iter().map(|r| r.err_core).collect();
        let tr: Vec<f64> = rows.iter().map(|r| r.err_transport).collect();
        checks.push(Check::new(
            "wing errors decrease",
            strictly_decreasing(&core) && strictly_decreasing(&tr),
            format!("core {}, transport {}", sci(&core), sci(&tr)),
        ));
        let scaled: Vec<f64> = rows.iter().map(|r| r.l * r.pde_defect).collect();
        let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), v| (a.min(*v), b.max(*v)));
        checks.push(Check::new("transport defect ~ 1/l", hi <= 2.0 * lo, format!("l * defect = {}", sci(&scaled))));
    }

    // heat extension of the wing eigenfunctions
    let mut ht = Table::new(&["m", "l", "lambda", "ratio_max", "max", "boundary_max"]);
    for &(m, l) in &cfg.wing_pairs() {
        let grid = wing_base_grid(&pr_w.grid, m, l)?;
        let wp = build_wing_pair(&pr_w, &flow, &grid, cfg.eps, m, l)?;
        let e = ground_eigenpair(&wp.pair, cfg.tol)?;
        if !e.gap_ok {
            return Err(Error::NoSpectralGap { relative_gap: e.relative_gap() });
        }
        // the Peclet-refined grid is only needed for the eigensolve; the
        // monotone Crank-Nicolson substep scales with hx^2, so the flow runs
        // on the unrefined wing grid
        let hg = wing_grid(&pr_w.grid, m)?;
        let r = e.grid.rect;
        let phi: Vec<f64> = (0..hg.len())
            .map(|k| {
                let (x, y) = hg.point(k);
                e.value_at(x.clamp(r.x_min, r.x_max), y)
            })
            .collect::<Result<_>>()?;
        let h = heat_extension(&phi, e.lambda1, &hg, cfg.nt.max(64))?;
        let r = space_time_hotspot_ratio(&h)?;
        ht.push(vec![wp.m, l, e.lambda1, r.ratio_max, r.max, r.boundary_max])?;
    }
    dir.write_table("heat_extension.csv", &ht)?;

    // limit level
    let pr = perturbation(cfg, cfg.nx, cfg.ny)?;
    let lg = LimitGrid::new(cfg.flow_nx, cfg.flow_ny, cfg.nt)?;
    let p0 = p0_field(&pr, &flow, &lg)?;
    let p0r = p0_report(&pr, &flow, &lg)?;
    checks.push(Check::new("p0 first sub-inequality", p0r.first_margin > 0.0, format!("min p0(0,y,t) - p0(1,y,t) = {:.6e}", p0r.first_margin)));
    checks.push(Check::new("p0 second sub-inequality", p0r.second_margin > 0.0, format!("min p0(0,0,t) - p0(0,+-1,t) = {:.6e}", p0r.second_margin)));
    results.insert("p0".into(), json!(p0r));
    let eps_list: Vec<f64> = if cfg.eps > 0.0 { vec![cfg.eps, cfg.eps / 2.0] } else { vec![0.0] };
    let mut lt = Table::new(&["eps", "lambda", "hw_max", "hw_boundary_max", "margin", "c", "core_excess", "p_eps_distance"]);
    let mut reports = Vec::new();
    for &eps in &eps_list {
        let r = limit_comparison(&pr, &flow, eps, &lg, &p0, cfg.tol)?;
        lt.push(vec![eps, r.lambda, r.hw_max.value, r.hw_boundary_max.value, r.margin, r.c, r.core_excess, r.p_eps_distance])?;
        reports.push(r);
    }
    dir.write_table("limits.csv", &lt)?;
    let ratio = reports[0].hw_max.value / reports[0].hw_boundary_max.value;
    if cfg.eps == 0.0 {
        checks.push(Check::note("interior max ratio", format!("eps = 0 is the unperturbed rectangle; ratio = {ratio:.12}")));
    } else {
        checks.push(Check::new("interior max ratio > 1", ratio > 1.0, format!("max_Rw h^w / max_Dw h^w = {ratio:.12}, at {:?}", reports[0].hw_max)));
        let cs: Vec<f64> = reports.iter().map(|r| r.c).collect();
        checks.push(Check::new("margin c > 0 and stable", cs.iter().all(|c| *c > 0.0) && relative_spread(&cs) <= 0.3, format!("c = {}", sci(&cs))));
        let excess = reports.iter().map(|r| r.core_excess / r.eps).fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::new("core excess o(eps)", excess < 1e-3, format!("max (max_Dc h^c - max_Dw h^w) / eps = {excess:.3e}")));
    }
    results.insert("limits".into(), json!(reports));

    // barrels
    if !cfg.d_list.is_empty() {
        let sp = perturbation(cfg, cfg.slice_n, cfg.slice_n)?;
        let pair = sp.scaled_pair(cfg.eps, &sp.grid)?;
        let rows = barrel_sweep(&pair, &cfg.d_list, cfg.slice_nt, cfg.tol)?;
        let mut bt = Table::new(&["d", "lambda_d", "lambda", "lambda_gap", "psi_error", "t_variation", "ratio_max"]);
        for r in &rows {
            bt.push(vec![r.d as f64, r.lambda_d, r.lambda, r.lambda_gap, r.psi_error, r.t_variation, r.ratio_max])?;
        }
        dir.write_table("barrel.csv", &bt)?;
        if rows.len() >= 2 {
            let gaps: Vec<f64> = rows.iter().map(|r| r.lambda_gap).collect();
            checks.push(Check::new("barrel eigenvalues converge", strictly_decreasing(&gaps), format!("|lambda_d - lambda| = {}", sci(&gaps))));
        }
        results.insert("barrel".into(), json!(rows));
    }
    if cfg.eps == 0.0 {
        warnings.push("eps = 0: degenerate run on the unperturbed rectangle".into());
    }

    dir.write_summary(&checks)?;
    dir.write_manifest("pipeline", cfg, json!({ "results": results, "wings": rows, "warnings": warnings }))?;
    Ok(Outcome { checks, warnings })
}

/// Dimensions for the barrier scan and the hitting-time moment.
pub const BARRIER_DIMS: [u32; 2] = [64, 256];
pub const HITTING_DIM: u32 = 64;
pub const HITTING_STARTS: [f64; 3] = [0.25, 0.5, 1.0];
pub const FK_DIM: u32 = 16;

/// Semigroup invariants, barrier inequalities, Monte Carlo estimates and
/// ball eigenvalues.
pub fn cmd_verify(cfg: &Config, out: &Path) -> Result<Outcome> {
    let mut dir = RunDir::create(out)?;
    dir.write_text("config.txt", &cfg.to_text())?;
    let mut checks = Vec::new();
    let mut results = serde_json::Map::new();

    let pr = perturbation(cfg, cfg.slice_n, cfg.slice_n)?;
    let pair = pr.scaled_pair(cfg.eps, &pr.grid)?;

    // semigroup
    let fine_pr = perturbation(cfg, 2 * cfg.slice_n, 2 * cfg.slice_n)?;
    let fine = fine_pr.scaled_pair(cfg.eps, &fine_pr.grid)?;
    let sg: Vec<_> = [&pair, &fine].iter().map(|p| semigroup_invariant_checks(p, 0.5, 32, 4, cfg.seed)).collect::<Result<_>>()?;
    let drift = sg.iter().map(|r| r.mass_drift).fold(0.0, f64::max);
    let excess = sg.iter().map(|r| r.max_principle_excess).fold(f64::NEG_INFINITY, f64::max);
    let modulus = sg.iter().map(|r| r.modulus_excess()).fold(f64::NEG_INFINITY, f64::max);
    let ultra: Vec<f64> = sg.iter().map(|r| r.ultracontractivity).collect();
    checks.push(Check::new("mass conservation", drift <= 1e-10, format!("{drift:.3e}")));
    checks.push(Check::new("weak maximum principle", excess <= 1e-12, format!("{excess:.3e}")));
    checks.push(Check::new("ultracontractivity stable", relative_spread(&ultra) <= 0.1, sci(&ultra)));
    checks.push(Check::new("modulus non-increase", modulus <= 1e-9, format!("{modulus:.3e}")));
    results.insert("semigroup".into(), json!(sg));

    // barrier
    let mut bt = Table::new(&["d", "caloric_residual", "boundary_margin", "initial_margin", "tau_margin", "t8_exponent"]);
    for d in BARRIER_DIMS {
        let b = check_barrier(d, 400, 400)?;
        bt.push(vec![d as f64, b.caloric_residual, b.boundary_margin, b.initial_margin, b.tau_margin, b.t8_exponent])?;
        checks.push(Check::new(
            &format!("barrier d={d}"),
            b.holds,
            format!(
                "boundary {:.4e}, initial {:.4e}, tau {:.2e}, t8 {:.4e}, caloric {:.2e}",
                b.boundary_margin, b.initial_margin, b.tau_margin, b.t8_exponent, b.caloric_residual
            ),
        ));
    }
    dir.write_table("barrier.csv", &bt)?;

    // hitting moment with lambda_d from the slice solver
    let slice = barrel_sweep(&pair, &[HITTING_DIM], cfg.slice_nt, cfg.tol)?[0];
    let mc = McConfig::new(cfg.seed, cfg.paths, cfg.dt, HITTING_DIM, slice.lambda_d)?;
    let mut ht = Table::new(&["t0", "moment", "stderr", "bound", "moment_lambda", "mean_hit", "guard_touches"]);
    for t0 in HITTING_STARTS {
        let h = simulate_hitting(&mc, t0)?;
        ht.push(vec![t0, h.moment.mean, h.moment.stderr, h.bound, h.moment_lambda.mean, h.hit_time.mean, h.guard_touches as f64])?;
        checks.push(Check::new(
            &format!("hitting moment t0={t0}"),
            h.holds && h.supermartingale_ok,
            format!("E exp(2 lambda s*) = {:.6} +- {:.1e} vs {:.2}", h.moment.mean, h.moment.stderr, h.bound),
        ));
    }
    dir.write_table("hitting.csv", &ht)?;

    // reflected Brownian motion
    let rect = pair.grid.rect;
    let mut vt = Table::new(&["t", "variance", "stderr", "bound"]);
    for t in [0.1, 0.5, 2.0] {
        let v = reflected_bm_variance(&rect, (0.3, 0.2), t, &McConfig::new(cfg.seed, cfg.paths, 1e-3, 2, 0.0)?)?;
        vt.push(vec![t, v.variance.mean, v.variance.stderr, v.bound])?;
        checks.push(Check::new(
            &format!("reflected variance t={t}"),
            v.holds,
            format!("{:.5} +- {:.1e} vs {:.2}", v.variance.mean, v.variance.stderr, v.bound),
        ));
    }
    dir.write_table("reflected_variance.csv", &vt)?;

    // Feynman-Kac
    let fk = feynman_kac_check(&pair, FK_DIM, (cfg.slice_n, cfg.slice_n, cfg.slice_nt), cfg.seed, cfg.paths, cfg.dt, &default_probes(), cfg.tol)?;
    let mut ft = Table::new(&["x", "y", "t", "psi", "estimate", "stderr", "grid_error"]);
    for (p, g) in fk.report.probes.iter().zip(&fk.grid_error) {
        ft.push(vec![p.x, p.y, p.t, p.psi, p.estimate.mean, p.estimate.stderr, *g])?;
    }
    dir.write_table("feynman_kac.csv", &ft)?;
    checks.push(Check::new(&format!("Feynman-Kac d={FK_DIM}"), fk.holds, format!("max error / budget = {:.3}", fk.worst_ratio)));

    // balls
    let mut bl = Table::new(&["d", "lambda", "scaled"]);
    let (mut ok, mut scaled_ok) = (true, true);
    for d in 1..=10u32 {
        let lam = ball_radial_eigenvalue(d, 2000);
        let r = 5.0 * (d as f64).sqrt() / 8.0;
        let scaled = lam / (r * r);
        bl.push(vec![d as f64, lam, scaled])?;
        ok &= lam >= d as f64;
        scaled_ok &= scaled >= 2.56 * (1.0 - 1e-2);
    }
    dir.write_table("ball.csv", &bl)?;
    checks.push(Check::new("ball eigenvalue >= d", ok, "d = 1..10".into()));
    checks.push(Check::new("scaled ball eigenvalue >= 2.56", scaled_ok, "radius 5 sqrt(d) / 8".into()));

    dir.write_summary(&checks)?;
    dir.write_manifest("verify", cfg, json!({ "results": results, "fk": fk, "slice_lambda_d": slice.lambda_d }))?;
    Ok(Outcome { checks, warnings: Vec::new() })
}
