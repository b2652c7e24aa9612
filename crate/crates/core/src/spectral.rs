//! Finite-volume discretization of the drift Laplacian `-Delta + grad V . grad`
//! with Neumann conditions, its ground eigenpairs, the radial slice problem
//! over a barrel, and the Neumann spectrum of balls.

use crate::error::{Error, Result};
use crate::geometry::{normalized_exp, BarrelSpec, ConvexPair, Grid2};
use crate::linalg::eigen::{smallest_nonzero, EigenOptions, Method, WeightedOperator};
use crate::linalg::sparse::{Csr, FormBuilder, LogFormBuilder};

/// Relative gap below which the ground eigenvalue is reported as degenerate.
pub const GAP_THRESHOLD: f64 = 1e-6;
/// Threshold on `|int phi x_1 dmu|` above which the sign convention applies.
pub const SIGN_THRESHOLD: f64 = 1e-8;

/// Log-space assembly of the finite-volume form with conductance
/// `exp(-(V_i + V_j)/2) * cross-section / spacing` and node masses
/// `exp(-V_i) * cell weight`.
pub fn weighted_form(grid: &Grid2, v: &[f64]) -> (LogFormBuilder, Vec<f64>) {
    let mut form = LogFormBuilder::new(grid.len());
    let (hx, hy) = (grid.hx(), grid.hy());
    for i in 0..=grid.nx {
        for j in 0..=grid.ny {
            let k = grid.index(i, j);
            if i < grid.nx {
                let k2 = grid.index(i + 1, j);
                form.edge(k, k2, -0.5 * (v[k] + v[k2]), grid.y_weight(j) / hx);
            }
            if j < grid.ny {
                let k2 = grid.index(i, j + 1);
                form.edge(k, k2, -0.5 * (v[k] + v[k2]), grid.x_weight(i) / hy);
            }
        }
    }
    let cells = grid.cell_weights();
    let log_mass = cells.iter().zip(v).map(|(c, v)| c.ln() - v).collect();
    (form, log_mass)
}

/// The row-scaled operator `L = W^{-1} A` of a pair, self-adjoint in the
/// node-mass inner product, with `L 1 = 0`.
pub fn assemble_weighted_laplacian(pair: &ConvexPair) -> WeightedOperator {
    let (form, log_mass) = weighted_form(&pair.grid, &pair.potential);
    WeightedOperator::from_log_form(&form, &log_mass)
}

/// Symmetric stiffness `A` and node masses `w` for moderate potentials,
/// with the potential shifted by its minimum so that masses are at most one
/// cell weight.
#[derive(Debug, Clone)]
pub struct Stiffness {
    pub a: Csr,
    pub w: Vec<f64>,
}

pub fn fv_stiffness(grid: &Grid2, v: &[f64]) -> Stiffness {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let lo = if lo.is_finite() { lo } else { 0.0 };
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut fb = FormBuilder::new(grid.len());
    for i in 0..=grid.nx {
        for j in 0..=grid.ny {
            let k = grid.index(i, j);
            if i < grid.nx {
                let k2 = grid.index(i + 1, j);
                fb.edge(k, k2, (lo - 0.5 * (v[k] + v[k2])).exp() * grid.y_weight(j) / hx);
            }
            if j < grid.ny {
                let k2 = grid.index(i, j + 1);
                fb.edge(k, k2, (lo - 0.5 * (v[k] + v[k2])).exp() * grid.x_weight(i) / hy);
            }
        }
    }
    let w = grid.cell_weights().iter().zip(v).map(|(c, v)| c * (lo - v).exp()).collect();
    Stiffness { a: fb.stiffness(), w }
}

/// Ground nonzero eigenpair of a pair, normalized in `L^2(mu)`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EigenResult {
    pub lambda1: f64,
    pub lambda2: f64,
    #[serde(skip)]
    pub phi1: Vec<f64>,
    pub gap_ok: bool,
    pub sign_fixed: bool,
    pub residual: f64,
    pub sign_integral: f64,
    pub iterations: usize,
    pub method: Method,
    #[serde(skip)]
    pub grid: Grid2,
    /// Probability weights of the nodes under `mu`.
    #[serde(skip)]
    pub weights: Vec<f64>,
}

impl EigenResult {
    pub fn relative_gap(&self) -> f64 {
        (self.lambda2 - self.lambda1) / self.lambda1.abs().max(f64::MIN_POSITIVE)
    }

    pub fn value_at(&self, x: f64, y: f64) -> Result<f64> {
        self.grid.interpolate(&self.phi1, x, y)
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.phi1).map(|(w, f)| w * f).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.weights.iter().zip(&self.phi1).map(|(w, f)| w * f * f).sum()
    }
}

/// Mean-zero, unit `L^2(p)` normalization and the `int f x dp > 0` sign
/// convention; returns `(sign_fixed, sign_integral)`.
fn normalize(f: &mut [f64], p: &[f64], xs: impl Iterator<Item = f64>) -> (bool, f64) {
    let mean: f64 = p.iter().zip(f.iter()).map(|(w, v)| w * v).sum();
    for v in f.iter_mut() {
        *v -= mean;
    }
    let nrm = p.iter().zip(f.iter()).map(|(w, v)| w * v * v).sum::<f64>().sqrt();
    for v in f.iter_mut() {
        *v /= nrm;
    }
    let s: f64 = p.iter().zip(f.iter()).zip(xs).map(|((w, v), x)| w * v * x).sum();
    if s.abs() > SIGN_THRESHOLD {
        if s < 0.0 {
            for v in f.iter_mut() {
                *v = -*v;
            }
        }
        (true, s.abs())
    } else {
        (false, s)
    }
}

pub fn default_eigen_options(tol: f64) -> EigenOptions {
    EigenOptions { count: 2, tol, ..Default::default() }
}

/// The two smallest nonzero eigenvalues of the pair and the normalized
/// ground eigenfunction.
pub fn ground_eigenpair(pair: &ConvexPair, tol: f64) -> Result<EigenResult> {
    ground_eigenpair_with(pair, &default_eigen_options(tol))
}

pub fn ground_eigenpair_with(pair: &ConvexPair, opts: &EigenOptions) -> Result<EigenResult> {
    let op = assemble_weighted_laplacian(pair);
    let res = smallest_nonzero(&op, &EigenOptions { count: opts.count.max(2), ..*opts })?;
    if res.values.len() < 2 {
        return Err(Error::Singular("grid too small for two nonzero eigenvalues".into()));
    }
    let total: f64 = op.w.iter().sum();
    let weights: Vec<f64> = op.w.iter().map(|w| w / total).collect();
    let mut phi1 = res.vectors[0].clone();
    let grid = pair.grid;
    let (sign_fixed, sign_integral) = normalize(&mut phi1, &weights, (0..grid.len()).map(|k| grid.point(k).0));
    let (lambda1, lambda2) = (res.values[0], res.values[1]);
    let gap_ok = (lambda2 - lambda1) / lambda1.abs().max(f64::MIN_POSITIVE) >= GAP_THRESHOLD;
    Ok(EigenResult {
        lambda1,
        lambda2,
        phi1,
        gap_ok,
        sign_fixed,
        residual: res.residuals[0],
        sign_integral,
        iterations: res.iterations,
        method: res.method,
        grid,
        weights,
    })
}

/// `max / max_boundary` and `min / min_boundary` of a field, with the
/// location of the global maximum.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct HotspotRatio {
    pub ratio_max: f64,
    pub ratio_min: f64,
    pub argmax: usize,
    pub max: f64,
    pub boundary_max: f64,
}

pub fn hotspot_ratio(field: &[f64], boundary: &[bool]) -> Result<HotspotRatio> {
    if field.len() != boundary.len() {
        return Err(Error::InvalidParameter("field and mask lengths differ".into()));
    }
    if !boundary.iter().any(|b| *b) {
        return Err(Error::InvalidParameter("empty boundary mask".into()));
    }
    let (mut max, mut argmax, mut min) = (f64::NEG_INFINITY, 0, f64::INFINITY);
    let (mut bmax, mut bmin) = (f64::NEG_INFINITY, f64::INFINITY);
    for (k, (&v, &b)) in field.iter().zip(boundary).enumerate() {
        if v > max {
            max = v;
            argmax = k;
        }
        min = min.min(v);
        if b {
            bmax = bmax.max(v);
            bmin = bmin.min(v);
        }
    }
    Ok(HotspotRatio { ratio_max: max / bmax, ratio_min: min / bmin, argmax, max, boundary_max: bmax })
}

/// Hot-spot ratio of a space-time field against its parabolic boundary.
pub fn space_time_hotspot_ratio(field: &crate::heat::SpaceTimeField) -> Result<HotspotRatio> {
    let keep = field.parabolic_boundary();
    let ny = field.ys.len();
    let mut values = Vec::new();
    let mut mask = Vec::new();
    for (k, u) in field.values.iter().enumerate() {
        for (idx, &v) in u.iter().enumerate() {
            values.push(v);
            mask.push(keep(idx / ny, idx % ny, k));
        }
    }
    hotspot_ratio(&values, &mask)
}

/// Eigenpair of the radial slice problem over a barrel, sampled on
/// `(x, y, t)` nodes with `t = 1 - (rho / rho_d(x))^2`.
#[derive(Debug, Clone)]
pub struct SliceEigenResult {
    pub d: u32,
    pub lambda_d: f64,
    pub lambda2: f64,
    pub gap_ok: bool,
    pub residual: f64,
    pub grid: Grid2,
    /// Nodes in `t`, `ts[0] = 0` on the barrel boundary, graded as `(k/n)^2`.
    pub ts: Vec<f64>,
    /// `psi[(i * (ny + 1) + j) * ts.len() + k]`.
    pub psi: Vec<f64>,
    pub weights: Vec<f64>,
    /// Ratio of the global maximum to the maximum over `t = 0` and `boundary(Omega) x [0, 1]`.
    pub hotspot: HotspotRatio,
}

impl SliceEigenResult {
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        self.grid.index(i, j) * self.ts.len() + k
    }

    /// `psi(., t_k)` as a field on the base grid.
    pub fn level(&self, k: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|n| self.psi[n * self.ts.len() + k]).collect()
    }

    /// `psi(x, y, t)`, bilinear on the base grid and linear in `t` between levels.
    pub fn value_at(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("slice time {t} outside [0, 1]")));
        }
        let k = self.ts.partition_point(|&s| s <= t).clamp(1, self.ts.len() - 1) - 1;
        let w = (t - self.ts[k]) / (self.ts[k + 1] - self.ts[k]);
        let lo = self.grid.interpolate(&self.level(k), x, y)?;
        let hi = self.grid.interpolate(&self.level(k + 1), x, y)?;
        Ok((1.0 - w) * lo + w * hi)
    }

    /// `sup |psi(x, t) - psi(x, 0)|`.
    pub fn t_variation(&self) -> f64 {
        let nt = self.ts.len();
        self.psi.chunks(nt).flat_map(|c| c.iter().map(move |v| (v - c[0]).abs())).fold(0.0, f64::max)
    }
}

/// Log of `int_lo^hi r^p dr` for `0 <= lo < hi`.
fn log_power_integral(p: f64, hi: f64, lo: f64) -> f64 {
    (p + 1.0) * hi.ln() + (-((p + 1.0) * (lo / hi).ln()).exp_m1()).ln() - (p + 1.0).ln()
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Radial slice eigenproblem over the barrel of `spec` on an `nx x ny` base
/// grid with `nt` graded cells in `t`.
///
/// The fiber coordinate is `r = rho / rho_d(x)` in `[0, 1]`, so the weight
/// becomes `(1 - V/d)^(d+1) r^d` and the gradient picks up the cross term
/// `-r (grad log rho_d) d_r`.
pub fn slice_eigenpair(spec: &BarrelSpec, grid3: (usize, usize, usize), tol: f64) -> Result<SliceEigenResult> {
    let (nx, ny, nt) = grid3;
    if nt < 2 {
        return Err(Error::InvalidParameter("slice needs at least two cells in t".into()));
    }
    let grid = Grid2::new(spec.pair.grid.rect, nx, ny)?;
    let d = spec.d as f64;
    let sd = d.sqrt();
    let v: Vec<f64> = (0..grid.len()).map(|k| grid.point(k)).map(|(x, y)| spec.pair.value_at(x, y)).collect::<Result<_>>()?;
    let radius: Vec<f64> = v.iter().map(|&v| 0.5 * (sd - v / sd)).collect();
    let log_x: Vec<f64> = v.iter().map(|&v| (d + 1.0) * (-v / d).ln_1p()).collect();
    let ts: Vec<f64> = (0..=nt).map(|k| (k as f64 / nt as f64).powi(2)).collect();
    let rs: Vec<f64> = ts.iter().map(|t| (1.0 - t).max(0.0).sqrt()).collect();
    let log_i = |p: f64| -> Vec<f64> { (0..nt).map(|k| log_power_integral(d + p, rs[k], rs[k + 1])).collect() };
    let (i0, i1, i2) = (log_i(0.0), log_i(1.0), log_i(2.0));
    // lumped mass int r^d phi_k over the hat function of node k; halving the
    // interval integral instead puts O(d) too much mass on the axis node
    let hat = |k: usize| -> (f64, f64) {
        let (b, a) = (rs[k], rs[k + 1]);
        let ratio = (i0[k] - i1[k]).exp();
        let log_len = (b - a).ln();
        ((i1[k] + (-a * ratio).ln_1p() - log_len), (i1[k] + (b * ratio - 1.0).ln() - log_len))
    };
    let log_m: Vec<f64> = (0..=nt)
        .map(|k| match k {
            0 => hat(0).0,
            k if k == nt => hat(nt - 1).1,
            k => log_add(hat(k - 1).1, hat(k).0),
        })
        .collect();

    let m = nt + 1;
    let idx = |i: usize, j: usize, k: usize| grid.index(i, j) * m + k;
    let n = grid.len() * m;
    let (hx, hy) = (grid.hx(), grid.hy());
    // d_x log rho_d and d_y log rho_d by differences of V
    let grad_log_r = |i: usize, j: usize| -> (f64, f64) {
        let c = grid.index(i, j);
        let (il, ir) = (i.saturating_sub(1), (i + 1).min(grid.nx));
        let (jl, jr) = (j.saturating_sub(1), (j + 1).min(grid.ny));
        let vx = (v[grid.index(ir, j)] - v[grid.index(il, j)]) / ((ir - il) as f64 * hx);
        let vy = (v[grid.index(i, jr)] - v[grid.index(i, jl)]) / ((jr - jl) as f64 * hy);
        let s = -1.0 / (2.0 * sd * radius[c]);
        (s * vx, s * vy)
    };

    let mut form = LogFormBuilder::new(n);
    let mut log_mass = vec![0.0; n];
    for i in 0..=grid.nx {
        for j in 0..=grid.ny {
            let c = grid.index(i, j);
            let cell = grid.cell_weight(i, j);
            let (ax, ay) = grad_log_r(i, j);
            let a2 = ax * ax + ay * ay;
            for k in 0..=nt {
                log_mass[idx(i, j, k)] = cell.ln() + log_x[c] + log_m[k];
                if i < grid.nx {
                    let c2 = grid.index(i + 1, j);
                    form.edge(idx(i, j, k), idx(i + 1, j, k), 0.5 * (log_x[c] + log_x[c2]) + log_m[k], grid.y_weight(j) / hx);
                }
                if j < grid.ny {
                    form.edge(idx(i, j, k), idx(i, j + 1, k), log_x[c] + log_m[k], grid.x_weight(i) / hy);
                }
                if k < nt {
                    let dr = rs[k] - rs[k + 1];
                    let radial = i0[k] - 2.0 * radius[c].ln();
                    let lc = if a2 > 0.0 { log_add(radial, a2.ln() + i2[k]) } else { radial };
                    form.edge(idx(i, j, k), idx(i, j, k + 1), log_x[c] + lc, cell / (dr * dr));
                }
            }
        }
    }
    // cross terms -2 int X r^{d+1} u_r (a . grad u) on (x, r) and (y, r) quads
    for i in 0..=grid.nx {
        for j in 0..=grid.ny {
            for k in 0..nt {
                let dr = rs[k] - rs[k + 1];
                if i < grid.nx {
                    let (c, c2) = (grid.index(i, j), grid.index(i + 1, j));
                    let ax = -(v[c2] - v[c]) / hx / (sd * (radius[c] + radius[c2]));
                    if ax != 0.0 {
                        let lc = 0.5 * (log_x[c] + log_x[c2]) + i1[k];
                        let coef = -2.0 * ax * grid.y_weight(j) / (4.0 * dr);
                        for kk in [k, k + 1] {
                            for ii in [i, i + 1] {
                                form.cross(idx(i + 1, j, kk), idx(i, j, kk), idx(ii, j, k), idx(ii, j, k + 1), lc, coef);
                            }
                        }
                    }
                }
                if j < grid.ny {
                    let (c, c2) = (grid.index(i, j), grid.index(i, j + 1));
                    let ay = -(v[c2] - v[c]) / hy / (sd * (radius[c] + radius[c2]));
                    if ay != 0.0 {
                        let lc = 0.5 * (log_x[c] + log_x[c2]) + i1[k];
                        let coef = -2.0 * ay * grid.x_weight(i) / (4.0 * dr);
                        for kk in [k, k + 1] {
                            for jj in [j, j + 1] {
                                form.cross(idx(i, j + 1, kk), idx(i, j, kk), idx(i, jj, k), idx(i, jj, k + 1), lc, coef);
                            }
                        }
                    }
                }
            }
        }
    }

    let op = WeightedOperator::from_log_form(&form, &log_mass);
    let res = smallest_nonzero(&op, &default_eigen_options(tol))?;
    if res.values.len() < 2 {
        return Err(Error::Singular("slice grid too small for two nonzero eigenvalues".into()));
    }
    let weights = normalized_exp(&log_mass);
    let mut psi = res.vectors[0].clone();
    normalize(&mut psi, &weights, (0..n).map(|q| grid.point(q / m).0));
    let mask: Vec<bool> = (0..n)
        .map(|q| {
            let (i, j) = grid.coords(q / m);
            q % m == 0 || grid.is_boundary(i, j)
        })
        .collect();
    let hotspot = hotspot_ratio(&psi, &mask)?;
    let (lambda_d, lambda2) = (res.values[0], res.values[1]);
    Ok(SliceEigenResult {
        d: spec.d,
        lambda_d,
        lambda2,
        gap_ok: (lambda2 - lambda_d) / lambda_d >= GAP_THRESHOLD,
        residual: res.residuals[0],
        grid,
        ts,
        psi,
        weights,
        hotspot,
    })
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let b2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { b2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (from zero) of a symmetric tridiagonal matrix by bisection.
pub fn tridiagonal_eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..diag.len() {
        let r = (if i > 0 { off[i - 1].abs() } else { 0.0 }) + (if i < off.len() { off[i].abs() } else { 0.0 });
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvalue of `-(rho^d u')' / rho^d + l (l + d - 1) u / rho^2` on `[0, 1]`
/// with a Neumann end, cell centred with `n` cells; `index` counts from the
/// bottom of the spectrum.
pub fn radial_mode(d: u32, l: u32, n: usize, index: usize) -> f64 {
    let h = 1.0 / n as f64;
    let df = d as f64;
    let mass: Vec<f64> = (0..n).map(|k| (((k + 1) as f64 * h).powf(df + 1.0) - (k as f64 * h).powf(df + 1.0)) / (df + 1.0)).collect();
    let cond: Vec<f64> = (1..n).map(|k| (k as f64 * h).powf(df) / h).collect();
    let pot = (l * (l + d.max(1) - 1)) as f64;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for k in 0..n {
        let rc = (k as f64 + 0.5) * h;
        let mut a = pot / (rc * rc) * mass[k];
        if k > 0 {
            a += cond[k - 1];
        }
        if k + 1 < n {
            a += cond[k];
        }
        diag[k] = a / mass[k];
        if k + 1 < n {
            off[k] = -cond[k] / (mass[k] * mass[k + 1]).sqrt();
        }
    }
    tridiagonal_eigenvalue(&diag, &off, index)
}

/// First nonzero Neumann eigenvalue of the unit ball in `R^{d+1}`: the smaller
/// of the first nonconstant radial mode and the first `l = 1` mode. For
/// `d = 0` only the radial problem on `[0, 1]` is solved.
pub fn ball_radial_eigenvalue(d: u32, n: usize) -> f64 {
    let radial = radial_mode(d, 0, n, 1);
    if d == 0 {
        radial
    } else {
        radial.min(radial_mode(d, 1, n, 0))
    }
}
