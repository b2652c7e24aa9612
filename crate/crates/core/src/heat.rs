//! Crank-Nicolson Neumann heat flows: the heat extension, one-dimensional
//! profile flows, the wing, core and rescaled limits, and checks on the
//! semigroup generated by the drift Laplacian.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{ConvexPair, Grid2, Rect};
use crate::linalg::banded::BandCholesky;
use crate::linalg::sparse::Csr;
use crate::spectral::{fv_stiffness, Stiffness};

/// Time scaling of every flow in the construction: `u_t = (1/8) u_yy`.
pub const HEAT_SCALE: f64 = 0.125;

/// A scalar field on a tensor grid sampled at `times`. A one-dimensional
/// field in `y` has `xs == [0.0]`.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub times: Vec<f64>,
    /// `values[k][i * ys.len() + j]` at time `times[k]`.
    pub values: Vec<Vec<f64>>,
    pub lambda: f64,
    pub scheme: &'static str,
}

impl SpaceTimeField {
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ys.len() + j
    }

    pub fn at(&self, k: usize, i: usize, j: usize) -> f64 {
        self.values[k][self.index(i, j)]
    }

    pub fn nt(&self) -> usize {
        self.times.len() - 1
    }

    /// Maximum over `(i, j, k)` passing the filter, with its location.
    pub fn max_where<F: Fn(usize, usize, usize) -> bool>(&self, keep: F) -> Option<(f64, (usize, usize, usize))> {
        let ny = self.ys.len();
        let mut best: Option<(f64, (usize, usize, usize))> = None;
        for (k, u) in self.values.iter().enumerate() {
            for (idx, &v) in u.iter().enumerate() {
                let (i, j) = (idx / ny, idx % ny);
                if keep(i, j, k) && best.is_none_or(|b| v > b.0) {
                    best = Some((v, (i, j, k)));
                }
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.values.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().flatten().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `sup |self - other|` over matching nodes and times.
    pub fn sup_distance(&self, other: &SpaceTimeField) -> f64 {
        self.values.iter().flatten().zip(other.values.iter().flatten()).fold(0.0, |a, (u, v)| a.max((u - v).abs()))
    }

    /// Parabolic boundary mask: spatial boundary nodes at every time plus every node at `t = 0`.
    pub fn parabolic_boundary(&self) -> impl Fn(usize, usize, usize) -> bool {
        let (nx, ny) = (self.xs.len() - 1, self.ys.len() - 1);
        move |i, j, k| k == 0 || j == 0 || j == ny || ((i == 0 || i == nx) && nx > 0)
    }
}

/// Crank-Nicolson evolution of `w u_t = -scale A u` over `[0, t_end]` with
/// `nt` output steps, substepped so that `dt <= w_i / (scale A_ii)` at every
/// node, which keeps the explicit half nonnegative.
pub fn crank_nicolson(a: &Csr, w: &[f64], u0: &[f64], scale: f64, nt: usize, t_end: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if nt == 0 {
        return Err(Error::InvalidParameter("time grid needs at least one step".into()));
    }
    let diag = a.diagonal();
    let dt_max = diag.iter().zip(w).filter(|(d, _)| **d > 0.0).map(|(d, w)| w / (scale * d)).fold(f64::INFINITY, f64::min);
    let dt_out = t_end / nt as f64;
    let sub = if dt_max.is_finite() { (dt_out / dt_max).ceil().max(1.0) as usize } else { 1 };
    let dt = dt_out / sub as f64;
    let c = 0.5 * dt * scale;
    let mut implicit = Vec::new();
    for i in 0..a.n {
        for (j, v) in a.row(i) {
            implicit.push((i, j, c * v));
        }
        implicit.push((i, i, w[i]));
    }
    let lhs = BandCholesky::factor(&Csr::from_triplets(a.n, &implicit))?;
    let mut u = u0.to_vec();
    let mut au = vec![0.0; a.n];
    let mut times = vec![0.0];
    let mut out = vec![u.clone()];
    for k in 1..=nt {
        for _ in 0..sub {
            a.mul_vec_into(&u, &mut au);
            for i in 0..a.n {
                u[i] = w[i] * u[i] - c * au[i];
            }
            lhs.solve_in_place(&mut u);
        }
        times.push(k as f64 * dt_out);
        out.push(u.clone());
    }
    Ok((times, out))
}

fn line_stiffness(n: usize, h: f64) -> Stiffness {
    let grid = Grid2::new(Rect { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: n as f64 * h }, 1, n).expect("positive cells");
    let st = fv_stiffness(&grid, &vec![0.0; grid.len()]);
    // keep the i = 0 column only
    let m = n + 1;
    let mut t = Vec::new();
    for i in 0..m {
        for (j, v) in st.a.row(i) {
            if j < m && j != i {
                t.push((i, j, v));
                t.push((i, i, -v));
            }
        }
    }
    let w = (0..m).map(|j| grid.cell_weight(0, j)).collect();
    Stiffness { a: Csr::from_triplets(m, &t), w }
}

/// Unforced 1/8-scaled (or `scale`-scaled) Neumann flow of nodal data on a
/// uniform grid of `[y0, y0 + n h]`, returned at `nt + 1` times in `[0, 1]`.
pub fn flow_1d(u0: &[f64], h: f64, nt: usize, scale: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let st = line_stiffness(u0.len() - 1, h);
    crank_nicolson(&st.a, &st.w, u0, scale, nt, 1.0)
}

/// `H_t = scale H_yy` on `[-1, 1]` with Neumann ends and initial data `f`.
pub fn heat_1d(f: &dyn Fn(f64) -> f64, ny: usize, nt: usize, scale: f64) -> Result<SpaceTimeField> {
    let ys: Vec<f64> = (0..=ny).map(|j| -1.0 + 2.0 * j as f64 / ny as f64).collect();
    let u0: Vec<f64> = ys.iter().map(|&y| f(y)).collect();
    let (times, values) = flow_1d(&u0, 2.0 / ny as f64, nt, scale)?;
    Ok(SpaceTimeField { xs: vec![0.0], ys, times, values, lambda: 0.0, scheme: "crank-nicolson-1d" })
}

fn apply_forcing(values: &mut [Vec<f64>], times: &[f64], lambda: f64) {
    for (u, t) in values.iter_mut().zip(times) {
        let f = (lambda * t * HEAT_SCALE).exp();
        for v in u.iter_mut() {
            *v *= f;
        }
    }
}

/// Heat extension: `u_t = (1/8)(Delta u + lambda u)` on the grid with
/// Neumann sides and `u(., 0) = phi`, computed as `exp(lambda t / 8)` times
/// the unforced flow.
pub fn heat_extension(phi: &[f64], lambda: f64, grid: &Grid2, nt: usize) -> Result<SpaceTimeField> {
    if nt < 64 {
        return Err(Error::InvalidParameter(format!("heat extension needs nt >= 64, got {nt}")));
    }
    if lambda * HEAT_SCALE / nt as f64 > 0.5 {
        return Err(Error::StepSize(format!("lambda dt / 8 = {} exceeds 1/2", lambda * HEAT_SCALE / nt as f64)));
    }
    let st = fv_stiffness(grid, &vec![0.0; grid.len()]);
    let (times, mut values) = crank_nicolson(&st.a, &st.w, phi, HEAT_SCALE, nt, 1.0)?;
    apply_forcing(&mut values, &times, lambda);
    Ok(SpaceTimeField { xs: grid.xs(), ys: grid.ys(), times, values, lambda, scheme: "crank-nicolson-2d" })
}

/// Independent forced 1D flows in `y`, one per x-column of `init` on `grid`.
fn columnwise(init: &[f64], grid: &Grid2, lambda: f64, nt: usize) -> Result<SpaceTimeField> {
    let m = grid.ny + 1;
    let mut values = vec![vec![0.0; grid.len()]; nt + 1];
    let mut times = Vec::new();
    let st = line_stiffness(grid.ny, grid.hy());
    for i in 0..=grid.nx {
        let col = &init[i * m..(i + 1) * m];
        let (t, vs) = crank_nicolson(&st.a, &st.w, col, HEAT_SCALE, nt, 1.0)?;
        for (k, v) in vs.into_iter().enumerate() {
            values[k][i * m..(i + 1) * m].copy_from_slice(&v);
        }
        times = t;
    }
    apply_forcing(&mut values, &times, lambda);
    Ok(SpaceTimeField { xs: grid.xs(), ys: grid.ys(), times, values, lambda, scheme: "crank-nicolson-columns" })
}

/// Wing limit `h^w`: per x-slice forced Neumann flow in `y` of the
/// transported trace on `[0, 1] x [-1, 1]`.
pub fn wing_limit(trace: &[f64], grid: &Grid2, lambda: f64, nt: usize) -> Result<SpaceTimeField> {
    columnwise(trace, grid, lambda, nt)
}

/// Rescaled limit `p_0`: the unforced per-slice flow of the transported `beta`.
pub fn p0_limit(beta_trace: &[f64], grid: &Grid2, nt: usize) -> Result<SpaceTimeField> {
    columnwise(beta_trace, grid, 0.0, nt)
}

/// `p_eps = (h^w exp(-lambda t / 8) - base) / eps`.
pub fn rescaled_wing(hw: &SpaceTimeField, eps: f64, base: f64) -> SpaceTimeField {
    let mut out = hw.clone();
    for (u, t) in out.values.iter_mut().zip(&hw.times) {
        let f = (-hw.lambda * t * HEAT_SCALE).exp();
        for v in u.iter_mut() {
            *v = (*v * f - base) / eps;
        }
    }
    out.lambda = 0.0;
    out
}

/// Core limit `h^c` on `[-x_max, x_max] x [-1, 1]` from the eigenfunction
/// `phi` on `R`, extended by clamping `x` into `[-pi/2, pi/2]`.
pub fn core_limit(phi: &[f64], phi_grid: &Grid2, lambda: f64, x_max: f64, nx: usize, nt: usize) -> Result<SpaceTimeField> {
    if x_max < 4.0 {
        return Err(Error::InvalidParameter(format!("core limit needs x_max >= 4, got {x_max}")));
    }
    let grid = Grid2::new(Rect::new(-x_max, x_max, -1.0, 1.0)?, nx, phi_grid.ny)?;
    let r = phi_grid.rect;
    let init: Result<Vec<f64>> = (0..grid.len())
        .map(|k| {
            let (x, y) = grid.point(k);
            phi_grid.interpolate(phi, x.clamp(r.x_min, r.x_max), y)
        })
        .collect();
    let st = fv_stiffness(&grid, &vec![0.0; grid.len()]);
    let (times, mut values) = crank_nicolson(&st.a, &st.w, &init?, HEAT_SCALE, nt, 1.0)?;
    apply_forcing(&mut values, &times, lambda);
    Ok(SpaceTimeField { xs: grid.xs(), ys: grid.ys(), times, values, lambda, scheme: "crank-nicolson-2d" })
}

/// Crank-Nicolson discretization of `exp(-t L)` for the drift Laplacian of a pair.
#[derive(Debug, Clone)]
pub struct DriftSemigroup {
    pub grid: Grid2,
    pub st: Stiffness,
}

impl DriftSemigroup {
    pub fn new(pair: &ConvexPair) -> Self {
        Self { grid: pair.grid, st: fv_stiffness(&pair.grid, &pair.potential) }
    }

    pub fn apply(&self, f: &[f64], t: f64, nt: usize) -> Result<Vec<f64>> {
        let (_, mut vs) = crank_nicolson(&self.st.a, &self.st.w, f, 1.0, nt, t)?;
        Ok(vs.pop().expect("nonempty"))
    }

    pub fn mass(&self, f: &[f64]) -> f64 {
        self.st.w.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        let total: f64 = self.st.w.iter().sum();
        (self.st.w.iter().zip(f).map(|(w, v)| w * v * v).sum::<f64>() / total).sqrt()
    }

    /// `sup_x ||k_t(x, .)||_{L^2(mu)}` over probe nodes, the `L^2(mu) -> L^inf`
    /// norm of the discrete semigroup, via `k_{2t}(x, x)`.
    pub fn ultracontractivity(&self, t: f64, nt: usize, probes: &[usize]) -> Result<f64> {
        let total: f64 = self.st.w.iter().sum();
        let mut best: f64 = 0.0;
        for &p in probes {
            let mut e = vec![0.0; self.grid.len()];
            e[p] = 1.0;
            let u = self.apply(&e, 2.0 * t, 2 * nt)?;
            best = best.max((u[p] * total / self.st.w[p]).sqrt());
        }
        Ok(best)
    }
}

/// Largest `|f_a - f_b|` over node pairs at Euclidean distance at most `delta`.
pub fn modulus_of_continuity(grid: &Grid2, f: &[f64], delta: f64) -> f64 {
    let (hx, hy) = (grid.hx(), grid.hy());
    let ri = (delta / hx).floor() as isize;
    let rj = (delta / hy).floor() as isize;
    let mut best: f64 = 0.0;
    for i in 0..=grid.nx as isize {
        for j in 0..=grid.ny as isize {
            let a = f[grid.index(i as usize, j as usize)];
            for di in 0..=ri {
                for dj in -rj..=rj {
                    if di == 0 && dj <= 0 {
                        continue;
                    }
                    let (ii, jj) = (i + di, j + dj);
                    if ii > grid.nx as isize || jj < 0 || jj > grid.ny as isize {
                        continue;
                    }
                    let d2 = (di as f64 * hx).powi(2) + (dj as f64 * hy).powi(2);
                    if d2 <= delta * delta * (1.0 + 1e-12) {
                        best = best.max((a - f[grid.index(ii as usize, jj as usize)]).abs());
                    }
                }
            }
        }
    }
    best
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ModulusRow {
    pub delta: f64,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SemigroupReport {
    /// Largest relative change of `sum w f` over all trials.
    pub mass_drift: f64,
    /// Largest excursion of `P_t f` outside `[min f, max f]`.
    pub max_principle_excess: f64,
    /// `L^2(mu) -> L^inf` norm of `P_t`.
    pub ultracontractivity: f64,
    /// Largest `||P_t f||_inf / ||f||_{L^2(mu)}` seen over the trials.
    pub worst_trial_ratio: f64,
    /// Worst increase of the modulus of continuity, per scale.
    pub modulus: Vec<ModulusRow>,
}

impl SemigroupReport {
    pub fn modulus_excess(&self) -> f64 {
        self.modulus.iter().fold(f64::NEG_INFINITY, |a, r| a.max(r.after - r.before))
    }
}

/// Random smooth trial fields: low cosine modes with seeded coefficients,
/// followed by the Lipschitz ramp `x + y/2`.
pub fn trial_fields(grid: &Grid2, trials: usize, seed: u64) -> Vec<Vec<f64>> {
    let r = grid.rect;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..trials {
        let coef: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        out.push(grid.sample(|x, y| {
            let (u, v) = ((x - r.x_min) / r.width(), (y - r.y_min) / r.height());
            let mut s = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    s += coef[4 * a + b] * (std::f64::consts::PI * a as f64 * u).cos() * (std::f64::consts::PI * b as f64 * v).cos();
                }
            }
            s
        }));
    }
    out.push(grid.sample(|x, y| x + 0.5 * y));
    out
}

/// Mass conservation, weak maximum principle, ultracontractivity and
/// modulus non-increase for `P_t` on a pair.
pub fn semigroup_invariant_checks(pair: &ConvexPair, t: f64, nt: usize, trials: usize, seed: u64) -> Result<SemigroupReport> {
    let sg = DriftSemigroup::new(pair);
    let g = pair.grid;
    let probes = [g.index(0, 0), g.index(g.nx, g.ny), g.index(g.nx / 2, g.ny / 2), g.index(0, g.ny / 2), g.index(g.nx / 2, 0)];
    let ultra = sg.ultracontractivity(t, nt, &probes)?;
    let deltas = [2.0, 4.0, 8.0].map(|k| k * g.hx().max(g.hy()));
    let mut modulus: Vec<ModulusRow> = deltas.iter().map(|&delta| ModulusRow { delta, before: 0.0, after: f64::NEG_INFINITY }).collect();
    let (mut mass_drift, mut excess, mut worst_ratio) = (0.0_f64, f64::NEG_INFINITY, 0.0_f64);
    for f in trial_fields(&g, trials, seed) {
        let u = sg.apply(&f, t, nt)?;
        let (m0, m1) = (sg.mass(&f), sg.mass(&u));
        let scale = sg.st.w.iter().zip(&f).map(|(w, v)| w * v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        mass_drift = mass_drift.max((m1 - m0).abs() / scale);
        let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        for v in &u {
            excess = excess.max(v - hi).max(lo - v);
        }
        let sup = u.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        worst_ratio = worst_ratio.max(sup / sg.l2_norm(&f));
        for row in modulus.iter_mut() {
            let (b, a) = (modulus_of_continuity(&g, &f, row.delta), modulus_of_continuity(&g, &u, row.delta));
            if a - b > row.after - row.before {
                row.before = b;
                row.after = a;
            }
        }
    }
    Ok(SemigroupReport { mass_drift, max_principle_excess: excess, ultracontractivity: ultra, worst_trial_ratio: worst_ratio, modulus })
}
