//! Extended pairs `(R_m, V_{l,m})` built from the perturbed rectangle and
//! the transport flow, and the limits of their ground states as the wings
//! grow long and steep.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::geometry::{ConvexPair, Grid2};
use crate::perturbation::{rectangle_grid, PerturbationResult};
use crate::potentials::{make_wing_potential, FlowSpec, WingPotential, WingRamp};
use crate::spectral::{assemble_weighted_laplacian, ground_eigenpair, EigenResult};
use crate::transport::flow_endpoint;

/// Largest cell Peclet number `l m hx / 2` on the wings. Above it the
/// scheme locks the solution to the upwind node and the `1/l` transport
/// defect is lost.
pub const MAX_PECLET: f64 = 1.0;

/// Base grid refined in `x` so that the wings of `(m, l)` stay below [`MAX_PECLET`].
pub fn wing_base_grid(base: &Grid2, m: f64, l: f64) -> Result<Grid2> {
    let k = (0.5 * l * m * base.hx() / MAX_PECLET).ceil().max(1.0) as usize;
    rectangle_grid(base.nx * k, base.ny)
}

/// Wing extension of `(R, eps V_q)` on `R_m` with steepness `l`, over `grid`.
pub fn build_wing_pair(pr: &PerturbationResult, flow: &FlowSpec, grid: &Grid2, eps: f64, m: f64, l: f64) -> Result<WingPotential> {
    if m < 2.0 {
        return Err(Error::InvalidParameter(format!("wing length m = {m} must be at least 2")));
    }
    let base = pr.scaled_pair(eps, grid)?;
    make_wing_potential(&base, flow, m, l)
}

/// `sup |v_m . grad psi|` over interior wing nodes, where
/// `psi(x', y) = phi(m x' + pi/2, y)`. The eigen equation gives
/// `v_m . grad psi = (psi_yy + psi_x'x' / m^2 + lambda psi) / l`.
pub fn transport_pde_residual(phi: &EigenResult, ramp: &WingRamp) -> f64 {
    let g = &phi.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut worst: f64 = 0.0;
    for i in 1..g.nx {
        let x = g.x(i);
        if x <= FRAC_PI_2 {
            continue;
        }
        let xw = (x - FRAC_PI_2) / ramp.m;
        for j in 1..g.ny {
            let f = |a: usize, b: usize| phi.phi1[g.index(a, b)];
            let psi_x = ramp.m * (f(i + 1, j) - f(i - 1, j)) / (2.0 * hx);
            let psi_y = (f(i, j + 1) - f(i, j - 1)) / (2.0 * hy);
            let (v1, v2) = ramp.field(xw, g.y(j));
            worst = worst.max((v1 * psi_x + v2 * psi_y).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct WingRow {
    /// Wing length after snapping to the grid.
    pub m: f64,
    pub l: f64,
    pub c: f64,
    pub hx: f64,
    pub lambda: f64,
    /// Base eigenvalue on the same `x` spacing.
    pub lambda_base: f64,
    pub gap_ok: bool,
    /// `sup_R |phi_{m,l} - phi_{R, eps V_q}|`.
    pub err_core: f64,
    /// `sup |T_m - Ex_g phi_{R, eps V_q}|` on `[0, 1] x [-1, 1]`.
    pub err_transport: f64,
    pub pde_defect: f64,
    /// `mu(R_m \ R)`.
    pub wing_mass: f64,
    /// Rayleigh quotient of the `x`-clamped base eigenfunction.
    pub rayleigh_bound: f64,
    /// `sup |phi(x, y) + phi(-x, y)|`.
    pub antisymmetry: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct WingStudy {
    pub eps: f64,
    pub lambda_base: f64,
    pub rows: Vec<WingRow>,
}

impl WingStudy {
    /// True when `err_core` and `err_transport` strictly decrease along the rows.
    pub fn errors_decrease(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].err_core < w[0].err_core && w[1].err_transport < w[0].err_transport)
    }

    /// `l * pde_defect` along the rows; stable when the defect scales like `1/l`.
    pub fn scaled_defects(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.l * r.pde_defect).collect()
    }
}

fn clamped_rayleigh(pair: &ConvexPair, base: &EigenResult) -> Result<f64> {
    let op = assemble_weighted_laplacian(pair);
    let g = &pair.grid;
    let mut f: Vec<f64> = (0..g.len())
        .map(|k| {
            let (x, y) = g.point(k);
            base.value_at(x.clamp(-FRAC_PI_2, FRAC_PI_2), y)
        })
        .collect::<Result<_>>()?;
    op.project_constants(&mut f);
    Ok(op.rayleigh(&f))
}

/// Solves the wing pairs for each `(m, l)` and compares with the base
/// eigenfunction on `R` and with its transport along the flow on the wings.
/// Each row runs on [`wing_base_grid`], with the base pair solved on the
/// same `x` spacing.
pub fn wing_eigen_study(pr: &PerturbationResult, flow: &FlowSpec, eps: f64, ml: &[(f64, f64)], tol: f64) -> Result<WingStudy> {
    let base = ground_eigenpair(&pr.scaled_pair(eps, &pr.grid)?, tol)?;
    if !base.gap_ok {
        return Err(Error::NoSpectralGap { relative_gap: base.relative_gap() });
    }
    let mut rows = Vec::with_capacity(ml.len());
    for &(m, l) in ml {
        let grid = wing_base_grid(&pr.grid, m, l)?;
        let base = ground_eigenpair(&pr.scaled_pair(eps, &grid)?, tol)?;
        let wp = build_wing_pair(pr, flow, &grid, eps, m, l)?;
        let e = ground_eigenpair(&wp.pair, tol)?;
        if !e.gap_ok || !base.gap_ok {
            return Err(Error::NoSpectralGap { relative_gap: e.relative_gap().min(base.relative_gap()) });
        }
        let g = &wp.pair.grid;
        let mut err_core: f64 = 0.0;
        let mut err_transport: f64 = 0.0;
        let mut wing_mass = 0.0;
        let mut antisymmetry: f64 = 0.0;
        for k in 0..g.len() {
            let (i, j) = g.coords(k);
            let (x, y) = g.point(k);
            let v = e.phi1[k];
            antisymmetry = antisymmetry.max((v + e.phi1[g.index(g.nx - i, j)]).abs());
            if x.abs() <= FRAC_PI_2 + 1e-12 {
                err_core = err_core.max((v - base.value_at(x.clamp(-FRAC_PI_2, FRAC_PI_2), y)?).abs());
            } else {
                wing_mass += e.weights[k];
            }
            if x >= FRAC_PI_2 - 1e-12 {
                let xw = ((x - FRAC_PI_2) / wp.m).clamp(0.0, 1.0);
                let target = base.value_at(FRAC_PI_2, flow_endpoint(flow, xw, y)?)?;
                err_transport = err_transport.max((v - target).abs());
            }
        }
        rows.push(WingRow {
            m: wp.m,
            l,
            c: wp.c,
            hx: g.hx(),
            lambda: e.lambda1,
            lambda_base: base.lambda1,
            gap_ok: e.gap_ok,
            err_core,
            err_transport,
            pde_defect: transport_pde_residual(&e, &wp.ramp()),
            wing_mass,
            rayleigh_bound: clamped_rayleigh(&wp.pair, &base)?,
            antisymmetry,
        });
    }
    Ok(WingStudy { eps, lambda_base: base.lambda1, rows })
}
