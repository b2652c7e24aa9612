//! Limit-level comparison chain: the wing limit `h^w` of the perturbed
//! rectangle's eigenfunction, the core limit `h^c`, the rescaled limit `p_0`
//! of the first-order correction, and the inequalities between their maxima
//! on `R^w = [0, 1] x [-1, 1] x [0, 1]` and its boundary part `D^w`.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use crate::error::{Error, Result};
use crate::geometry::{BarrelSpec, ConvexPair};
use crate::heat::{core_limit, heat_1d, p0_limit, rescaled_wing, wing_limit, SpaceTimeField, HEAT_SCALE};
use crate::perturbation::PerturbationResult;
use crate::potentials::FlowSpec;
use crate::spectral::{ground_eigenpair, slice_eigenpair, EigenResult};
use crate::transport::{transport_extend, TransportField};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LimitGrid {
    /// Cells of the flow grid on `[0, 1] x [-1, 1]`; `ny` must be even.
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    /// Half-width and x cells of the core-limit domain.
    pub core_x_max: f64,
    pub core_nx: usize,
}

impl LimitGrid {
    pub fn new(nx: usize, ny: usize, nt: usize) -> Result<Self> {
        if nx < 2 || ny < 2 || !ny.is_multiple_of(2) || nt < 64 {
            return Err(Error::InvalidParameter(format!("limit grid needs nx >= 2, even ny >= 2, nt >= 64; got {nx} x {ny}, nt = {nt}")));
        }
        Ok(LimitGrid { nx, ny, nt, core_x_max: 4.0, core_nx: 64 })
    }
}

/// Position of a space-time maximum.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Location {
    pub value: f64,
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

fn locate(f: &SpaceTimeField, keep: impl Fn(usize, usize, usize) -> bool) -> Location {
    let (value, (i, j, k)) = f.max_where(keep).expect("nonempty field");
    Location { value, x: f.xs[i], y: f.ys[j], t: f.times[k] }
}

/// `D^w`: `x = 1`, `y = +-1` or `t = 0`.
fn wing_boundary(f: &SpaceTimeField) -> impl Fn(usize, usize, usize) -> bool {
    let (nx, ny) = (f.xs.len() - 1, f.ys.len() - 1);
    move |i, j, k| k == 0 || i == nx || j == 0 || j == ny
}

/// `D^c`: `t = 0` or `y = +-1`.
fn core_boundary(f: &SpaceTimeField) -> impl Fn(usize, usize, usize) -> bool {
    let ny = f.ys.len() - 1;
    move |_, j, k| k == 0 || j == 0 || j == ny
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LimitReport {
    pub eps: f64,
    pub lambda: f64,
    pub gap_ok: bool,
    pub hw_max: Location,
    pub hw_boundary_max: Location,
    /// `max_{R^w} h^w - max_{D^w} h^w`.
    pub margin: f64,
    /// `margin / eps`.
    pub c: f64,
    pub hw_min: f64,
    pub hc_boundary_max: Location,
    /// `max_{D^c} h^c - max_{D^w} h^w`; should be `o(eps)`.
    pub core_excess: f64,
    /// `sup |p_eps - p_0|` on `R^w`.
    pub p_eps_distance: f64,
}

/// The transported trace `Ex_g f(pi/2, .)` on the flow grid.
pub fn transported_trace(flow: &FlowSpec, trace: &dyn Fn(f64) -> f64, lg: &LimitGrid) -> Result<TransportField> {
    transport_extend(flow, trace, lg.nx, lg.ny)
}

fn eigen_trace(e: &EigenResult) -> impl Fn(f64) -> f64 + '_ {
    move |y| e.value_at(FRAC_PI_2, y).expect("y in [-1, 1]")
}

/// `h^w`, `h^c` and `p_eps` for `(R, eps V_q)`.
pub fn limit_comparison(pr: &PerturbationResult, flow: &FlowSpec, eps: f64, lg: &LimitGrid, p0: &SpaceTimeField, tol: f64) -> Result<LimitReport> {
    let e = ground_eigenpair(&pr.scaled_pair(eps, &pr.grid)?, tol)?;
    if !e.gap_ok {
        return Err(Error::NoSpectralGap { relative_gap: e.relative_gap() });
    }
    let ex = transported_trace(flow, &eigen_trace(&e), lg)?;
    let hw = wing_limit(&ex.values, &ex.grid, e.lambda1, lg.nt)?;
    let hw_max = locate(&hw, |_, _, _| true);
    let hw_boundary_max = locate(&hw, wing_boundary(&hw));
    let hc = core_limit(&e.phi1, &e.grid, e.lambda1, lg.core_x_max, lg.core_nx, lg.nt)?;
    let hc_boundary_max = locate(&hc, core_boundary(&hc));
    let p_eps_distance = if eps > 0.0 { rescaled_wing(&hw, eps, SQRT_2).sup_distance(p0) } else { f64::NAN };
    let margin = hw_max.value - hw_boundary_max.value;
    Ok(LimitReport {
        eps,
        lambda: e.lambda1,
        gap_ok: e.gap_ok,
        hw_max,
        hw_boundary_max,
        margin,
        c: if eps > 0.0 { margin / eps } else { f64::NAN },
        hw_min: hw.min(),
        hc_boundary_max,
        core_excess: hc_boundary_max.value - hw_boundary_max.value,
        p_eps_distance,
    })
}

/// The two sub-inequalities on `p_0` for `t in [1/2, 1]`, in units of the
/// profile `q` (the normalized `beta` times `M`, shifted by a constant).
#[derive(Debug, Clone, serde::Serialize)]
pub struct P0Report {
    /// `min_{y, t} p_0(0, y, t) - p_0(1, y, t)`.
    pub first_margin: f64,
    /// `min_t p_0(0, 0, t) - p_0(0, +-1, t)`.
    pub second_margin: f64,
    /// `sup |p_0(0, ., .) - H_q - offset|` with the offset fixed at `(0, 0)`.
    pub heat_match: f64,
    /// Largest upward step of `Ex beta` in `x`; nonpositive when it is nonincreasing.
    pub monotone_excess: f64,
}

/// `p_0` on the flow grid in normalized units.
pub fn p0_field(pr: &PerturbationResult, flow: &FlowSpec, lg: &LimitGrid) -> Result<SpaceTimeField> {
    let ex = transported_trace(flow, &|y| pr.beta_at(FRAC_PI_2, y), lg)?;
    p0_limit(&ex.values, &ex.grid, lg.nt)
}

pub fn p0_report(pr: &PerturbationResult, flow: &FlowSpec, lg: &LimitGrid) -> Result<P0Report> {
    let reference = pr.beta_at(FRAC_PI_2, 0.0);
    let ex = transported_trace(flow, &|y| pr.m * (pr.beta_at(FRAC_PI_2, y) - reference), lg)?;
    let g = ex.grid;
    let mut monotone_excess = f64::NEG_INFINITY;
    for i in 0..g.nx {
        for j in 0..=g.ny {
            monotone_excess = monotone_excess.max(ex.values[g.index(i + 1, j)] - ex.values[g.index(i, j)]);
        }
    }
    let p = p0_limit(&ex.values, &g, lg.nt)?;
    let (nx, ny) = (g.nx, g.ny);
    let late: Vec<usize> = (0..p.times.len()).filter(|&k| p.times[k] >= 0.5 - 1e-12).collect();
    let mut first_margin = f64::INFINITY;
    let mut second_margin = f64::INFINITY;
    for &k in &late {
        for j in 0..=ny {
            first_margin = first_margin.min(p.at(k, 0, j) - p.at(k, nx, j));
        }
        let top = p.at(k, 0, ny / 2);
        second_margin = second_margin.min(top - p.at(k, 0, 0)).min(top - p.at(k, 0, ny));
    }
    let profile = pr.profile.clone();
    let hq = heat_1d(&|y| profile.jet(y)[0], ny, lg.nt, HEAT_SCALE)?;
    let offset = p.at(0, 0, ny / 2) - hq.at(0, 0, ny / 2);
    let mut heat_match: f64 = 0.0;
    for k in 0..p.times.len() {
        for j in 0..=ny {
            heat_match = heat_match.max((p.at(k, 0, j) - hq.at(k, 0, j) - offset).abs());
        }
    }
    Ok(P0Report { first_margin, second_margin, heat_match, monotone_excess })
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct BarrelRow {
    pub d: u32,
    pub lambda_d: f64,
    /// Eigenvalue of the base pair on the same `(x, y)` grid.
    pub lambda: f64,
    pub lambda_gap: f64,
    /// `sup |psi_d(., 0) - phi|` after matching signs.
    pub psi_error: f64,
    pub t_variation: f64,
    pub ratio_max: f64,
    pub gap_ok: bool,
}

/// Slice eigenpairs of the barrels over `pair` for each `d`, compared with
/// the ground state of the pair on the same `nx x ny` grid.
pub fn barrel_sweep(pair: &ConvexPair, ds: &[u32], nt: usize, tol: f64) -> Result<Vec<BarrelRow>> {
    use rayon::prelude::*;
    let base = ground_eigenpair(pair, tol)?;
    let g = pair.grid;
    ds.par_iter()
        .map(|&d| {
            let s = slice_eigenpair(&BarrelSpec::new(pair, d)?, (g.nx, g.ny, nt), tol)?;
            let level = s.level(0);
            let dot: f64 = level.iter().zip(&base.phi1).map(|(a, b)| a * b).sum();
            let sign = if dot < 0.0 { -1.0 } else { 1.0 };
            let psi_error = level.iter().zip(&base.phi1).map(|(a, b)| (sign * a - b).abs()).fold(0.0, f64::max);
            Ok(BarrelRow {
                d,
                lambda_d: s.lambda_d,
                lambda: base.lambda1,
                lambda_gap: (s.lambda_d - base.lambda1).abs(),
                psi_error,
                t_variation: s.t_variation(),
                ratio_max: s.hotspot.ratio_max,
                gap_ok: s.gap_ok,
            })
        })
        .collect()
}

/// True when `values` strictly decrease.
pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

/// Largest relative deviation of `values` from their mean.
pub fn relative_spread(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).abs() / mean.abs()).fold(0.0, f64::max)
}
