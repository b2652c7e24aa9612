//! First-order perturbation of the rectangle's ground state `sqrt(2) sin x`
//! by a convex potential whose first-order correction `beta` has a
//! prescribed boundary trace `q(y)` on `x = pi/2`, up to a constant.
//!
//! With `phi_0 = sqrt(2) sin x` and `lambda_0 = 1` the first-order equation
//! is `(-Delta - 1) beta = mu phi_0 - sqrt(2) cos x d_x V`. The potential is
//! `V = V_0 + M (x^2 + y^2) / 2` where `V_0` absorbs the `q` part and the
//! quadratic part produces `sqrt(2) M s1(x)` and `mu = M mu1`.
//!
//! All downstream fields are reported in units of `M`: `V_q = V / M` and
//! `beta = (beta_0 + sqrt(2) M s1 + a sin x) / M`, so that the eigenvalue of
//! `(R, eps V_q)` is `1 + eps mu1 + O(eps^2)`.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{relative_convexity_tol, ConvexPair, Grid2, Rect};
use crate::linalg::banded::BandLu;
use crate::linalg::eigen::Method;
use crate::linalg::sparse::Csr;
use crate::potentials::{certify_convexity, gauss_legendre, ProfileQ};
use crate::spectral::ground_eigenpair;

/// Even profile in `y` with four derivatives, `[q, q', q'', q''', q'''']`.
pub trait Profile: Send + Sync {
    fn jet(&self, y: f64) -> [f64; 5];
}

impl Profile for ProfileQ {
    fn jet(&self, y: f64) -> [f64; 5] {
        self.derivatives(y)
    }
}

/// `amplitude * cos(k pi y)`, Neumann at `y = +-1` for integer `k`.
#[derive(Debug, Clone, Copy)]
pub struct CosineProfile {
    pub k: f64,
    pub amplitude: f64,
}

impl Profile for CosineProfile {
    fn jet(&self, y: f64) -> [f64; 5] {
        let w = self.k * PI;
        let (s, c) = (w * y).sin_cos();
        let a = self.amplitude;
        [a * c, -a * w * s, -a * w * w * c, a * w.powi(3) * s, a * w.powi(4) * c]
    }
}

/// Largest `|q'|, |q'''|` at `y = +-1` accepted as Neumann.
const NEUMANN_TOL: f64 = 1e-8;

/// `beta_0 = sin x q - sin x cos^2 x q'' / 2`.
///
/// Odd in `x`, `beta_0(pi/2, y) = q(y)` and `d_x beta_0 = 0` at `x = +-pi/2`.
pub fn beta0_value(x: f64, q: &[f64; 5]) -> f64 {
    let (s, c) = x.sin_cos();
    s * q[0] - 0.5 * s * c * c * q[2]
}

/// `(-Delta - 1) beta_0 = sin x cos^2 x (q''''/2 - 4 q'')`.
pub fn beta0_defect(x: f64, q: &[f64; 5]) -> f64 {
    let (s, c) = x.sin_cos();
    s * c * c * (0.5 * q[4] - 4.0 * q[2])
}

/// Closed form `V_0 = -sin^2 x (q''''/4 - 2 q'') / sqrt(2)`, zero on `x = 0`.
pub fn v0_closed_form(x: f64, q: &[f64; 5]) -> f64 {
    let s = x.sin();
    -s * s * (0.25 * q[4] - 2.0 * q[2]) / SQRT_2
}

fn check_neumann(q: &dyn Profile) -> Result<()> {
    for y in [-1.0, 1.0] {
        let j = q.jet(y);
        let scale = j.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        if j[1].abs() > NEUMANN_TOL * scale || j[3].abs() > NEUMANN_TOL * scale {
            return Err(Error::InvalidParameter(format!("profile is not Neumann at y = {y}: q' = {}, q''' = {}", j[1], j[3])));
        }
    }
    Ok(())
}

pub fn build_beta0(q: &dyn Profile, grid: &Grid2) -> Result<Vec<f64>> {
    check_neumann(q)?;
    let jets: Vec<[f64; 5]> = grid.ys().iter().map(|&y| q.jet(y)).collect();
    Ok((0..grid.len())
        .map(|k| {
            let (i, j) = grid.coords(k);
            beta0_value(grid.x(i), &jets[j])
        })
        .collect())
}

/// `V_0` on the grid by dividing `-(-Delta - 1) beta_0 / sqrt(2)` by `cos x`
/// and integrating in `x` from `x = 0` with the trapezoid rule. The edge
/// values of the quotient come from one-sided cubic extrapolation.
pub fn build_v0(q: &dyn Profile, grid: &Grid2) -> Result<Vec<f64>> {
    check_neumann(q)?;
    let r = grid.rect;
    if !grid.nx.is_multiple_of(2) || grid.nx < 8 || (r.x_min + FRAC_PI_2).abs() > 1e-12 || (r.x_max - FRAC_PI_2).abs() > 1e-12 {
        return Err(Error::InvalidParameter("V_0 needs an even x grid of at least 8 cells on [-pi/2, pi/2]".into()));
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let h = grid.hx();
    let mid = nx / 2;
    let mut v0 = vec![0.0; grid.len()];
    let mut slope = vec![0.0; nx + 1];
    for j in 0..=ny {
        let jet = q.jet(grid.y(j));
        for (i, s) in slope.iter_mut().enumerate().take(nx).skip(1) {
            let x = grid.x(i);
            *s = -beta0_defect(x, &jet) / (SQRT_2 * x.cos());
        }
        slope[0] = 4.0 * slope[1] - 6.0 * slope[2] + 4.0 * slope[3] - slope[4];
        slope[nx] = 4.0 * slope[nx - 1] - 6.0 * slope[nx - 2] + 4.0 * slope[nx - 3] - slope[nx - 4];
        for i in mid + 1..=nx {
            v0[grid.index(i, j)] = v0[grid.index(i - 1, j)] + 0.5 * h * (slope[i] + slope[i - 1]);
        }
        for i in (0..mid).rev() {
            v0[grid.index(i, j)] = v0[grid.index(i + 1, j)] - 0.5 * h * (slope[i] + slope[i + 1]);
        }
    }
    Ok(v0)
}

/// `mu1 = int x cos x sin x / int sin^2 x` over `[-pi/2, pi/2]` by composite quadrature.
pub fn mu1_quadrature(cells: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..cells {
        let a = -FRAC_PI_2 + PI * k as f64 / cells as f64;
        let b = a + PI / cells as f64;
        num += gauss_legendre(|x| x * x.cos() * x.sin(), a, b);
        den += gauss_legendre(|x| x.sin().powi(2), a, b);
    }
    num / den
}

#[derive(Debug, Clone)]
pub struct S1Solution {
    pub xs: Vec<f64>,
    pub s1: Vec<f64>,
    pub mu1: f64,
    /// `sup |(d_xx + 1) s1 + mu1 sin x - x cos x|` with the discrete second difference.
    pub residual: f64,
    /// `<s1, sin x>` in the trapezoid inner product.
    pub orthogonality: f64,
}

impl S1Solution {
    pub fn value_at(&self, x: f64) -> f64 {
        let h = self.xs[1] - self.xs[0];
        let n = self.xs.len() - 1;
        let u = ((x - self.xs[0]) / h).clamp(0.0, n as f64);
        let i = (u.floor() as usize).min(n - 1);
        let t = u - i as f64;
        (1.0 - t) * self.s1[i] + t * self.s1[i + 1]
    }

    pub fn edge_value(&self) -> f64 {
        *self.s1.last().expect("nonempty")
    }
}

/// Solves `s'' + s = x cos x - mu1 sin x` on `[-pi/2, pi/2]` with Neumann
/// ends and `s` orthogonal to `sin x`, on `n` cells.
pub fn solve_s1_mu1(n: usize) -> Result<S1Solution> {
    if n < 16 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("s1 needs an even cell count of at least 16, got {n}")));
    }
    let mu1 = mu1_quadrature(64);
    let h = PI / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| -FRAC_PI_2 + i as f64 * h).collect();
    let w: Vec<f64> = (0..=n).map(|i| if i == 0 || i == n { 0.5 * h } else { h }).collect();
    let sines: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
    let sin_norm: f64 = w.iter().zip(&sines).map(|(w, s)| w * s * s).sum();
    let project = |f: &mut [f64]| {
        let c: f64 = w.iter().zip(f.iter()).zip(&sines).map(|((w, f), s)| w * f * s).sum::<f64>() / sin_norm;
        for (f, s) in f.iter_mut().zip(&sines) {
            *f -= c * s;
        }
    };
    // (A - W) s = -W P f, with A the Neumann stiffness and f = x cos x - mu1 sin x
    let mut f: Vec<f64> = xs.iter().map(|&x| x * x.cos() - mu1 * x.sin()).collect();
    project(&mut f);
    let mut t = Vec::with_capacity(3 * (n + 1));
    for i in 0..=n {
        let mut diag = -w[i];
        if i > 0 {
            t.push((i, i - 1, -1.0 / h));
            diag += 1.0 / h;
        }
        if i < n {
            t.push((i, i + 1, -1.0 / h));
            diag += 1.0 / h;
        }
        t.push((i, i, diag));
    }
    let lu = BandLu::factor(&Csr::from_triplets(n + 1, &t))?;
    let rhs: Vec<f64> = f.iter().zip(&w).map(|(f, w)| -f * w).collect();
    let mut s1 = lu.solve(&rhs);
    project(&mut s1);
    // oddness is exact in the continuum; symmetrize away round-off
    for i in 0..=n / 2 {
        let a = 0.5 * (s1[i] - s1[n - i]);
        s1[i] = a;
        s1[n - i] = -a;
    }
    let mut residual: f64 = 0.0;
    for i in 1..n {
        let d2 = (s1[i + 1] - 2.0 * s1[i] + s1[i - 1]) / (h * h);
        residual = residual.max((d2 + s1[i] + mu1 * sines[i] - xs[i] * xs[i].cos()).abs());
    }
    let orthogonality = w.iter().zip(&s1).zip(&sines).map(|((w, s), t)| w * s * t).sum();
    Ok(S1Solution { xs, s1, mu1, residual, orthogonality })
}

#[derive(Debug, Clone)]
pub struct PerturbationResult {
    pub grid: Grid2,
    /// `beta / M` at the nodes.
    pub beta: Vec<f64>,
    /// `V / M - max(V / M)` at the nodes.
    pub v_q: Vec<f64>,
    pub m: f64,
    pub mu1: f64,
    pub s1: S1Solution,
    /// `beta(pi/2, y) - q(y)` in unnormalized units.
    pub c_q: f64,
    /// Coefficient of `sin x` in unnormalized `beta` fixing the `L^2(mu_eps)` normalization.
    pub a: f64,
    /// Constant subtracted from `V / M`.
    pub v_shift: f64,
    pub profile: Arc<dyn Profile>,
}

impl std::fmt::Debug for dyn Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Profile")
    }
}

const MAX_M: f64 = 1e40;

/// Builds `beta` and `V_q` on `grid`, doubling `M` from `m_init` until the
/// convexity certificate passes for `V_0 + M (x^2 + y^2) / 2`.
pub fn assemble_perturbation(profile: Arc<dyn Profile>, grid: &Grid2, m_init: f64) -> Result<PerturbationResult> {
    if !(m_init > 0.0) {
        return Err(Error::InvalidParameter(format!("M_init = {m_init} must be positive")));
    }
    let beta0 = build_beta0(profile.as_ref(), grid)?;
    let v0 = build_v0(profile.as_ref(), grid)?;
    let s1 = solve_s1_mu1(grid.nx)?;
    let quad = grid.sample(|x, y| 0.5 * (x * x + y * y));
    let mut m = m_init;
    loop {
        let v: Vec<f64> = v0.iter().zip(&quad).map(|(a, b)| a + m * b).collect();
        let tol = relative_convexity_tol(&v, 1e-8);
        if certify_convexity(grid, &v, tol).passed {
            break;
        }
        m *= 2.0;
        if m > MAX_M {
            return Err(Error::Calibration(format!("no convexifying M up to {MAX_M:e}")));
        }
    }
    // normalized potential and the sin x coefficient from first-order L^2(mu_eps) normalization
    let v_hat: Vec<f64> = v0.iter().zip(&quad).map(|(a, b)| a / m + b).collect();
    let p: Vec<f64> = {
        let c = grid.cell_weights();
        let total: f64 = c.iter().sum();
        c.into_iter().map(|c| c / total).collect()
    };
    let xs_sin: Vec<f64> = (0..grid.len()).map(|k| grid.point(k).0.sin()).collect();
    let vbar: f64 = p.iter().zip(&v_hat).map(|(p, v)| p * v).sum();
    let sin2: f64 = p.iter().zip(&xs_sin).map(|(p, s)| p * s * s).sum();
    let k_hat: f64 = p.iter().zip(&xs_sin).zip(&v_hat).map(|((p, s), v)| p * s * s * (v - vbar)).sum();
    let b_hat: f64 = p.iter().zip(&xs_sin).zip(&beta0).map(|((p, s), b)| p * s * b).sum::<f64>() / m;
    // 2 <phi_0, beta> = <phi_0^2, V - Vbar> with phi_0 = sqrt(2) sin x
    let a_hat = (k_hat - SQRT_2 * b_hat) / (SQRT_2 * sin2);
    let beta: Vec<f64> = (0..grid.len())
        .map(|k| {
            let x = grid.point(k).0;
            beta0[k] / m + SQRT_2 * s1.value_at(x) + a_hat * xs_sin[k]
        })
        .collect();
    let top = v_hat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let v_q = v_hat.iter().map(|v| v - top).collect();
    Ok(PerturbationResult { grid: *grid, beta, v_q, m, mu1: s1.mu1, c_q: m * (SQRT_2 * s1.edge_value() + a_hat), a: m * a_hat, v_shift: top, s1, profile })
}

impl PerturbationResult {
    /// Closed-form `V_q` at an arbitrary point.
    pub fn v_q_at(&self, x: f64, y: f64) -> f64 {
        v0_closed_form(x, &self.profile.jet(y)) / self.m + 0.5 * (x * x + y * y) - self.v_shift
    }

    /// `beta / M` at an arbitrary point.
    pub fn beta_at(&self, x: f64, y: f64) -> f64 {
        beta0_value(x, &self.profile.jet(y)) / self.m + SQRT_2 * self.s1.value_at(x) + self.a / self.m * x.sin()
    }

    /// `(R, eps V_q)` on `grid` with the closed form attached.
    pub fn scaled_pair(&self, eps: f64, grid: &Grid2) -> Result<ConvexPair> {
        let me = self.clone();
        let f = move |x: f64, y: f64| eps * me.v_q_at(x, y);
        let values = if grid == &self.grid { self.v_q.iter().map(|v| eps * v).collect() } else { grid.sample(&f) };
        let mut pair = ConvexPair::uncertified(*grid, values)?;
        pair.convexity_tol = relative_convexity_tol(&pair.potential, 1e-8);
        pair.closed_form = Some(Arc::new(f));
        Ok(pair)
    }

    /// Largest deviation of `beta(pi/2, y) - q(y)` from `C_q`, unnormalized.
    pub fn trace_defect(&self) -> f64 {
        let g = &self.grid;
        (0..=g.ny).map(|j| (self.m * self.beta[g.index(g.nx, j)] - self.profile.jet(g.y(j))[0] - self.c_q).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct FirstOrderRow {
    pub eps: f64,
    pub lambda: f64,
    /// `sup |phi_eps - phi_0 - eps beta|`.
    pub r: f64,
    pub r_over_eps: f64,
    /// `lambda - 1 - eps mu1`.
    pub lambda_defect: f64,
    pub gap_ok: bool,
    pub method: Method,
}

/// Compares the eigenpairs of `(R, eps V_q)` with the first-order expansion.
pub fn verify_first_order(pr: &PerturbationResult, eps_list: &[f64], tol: f64) -> Result<Vec<FirstOrderRow>> {
    let base = ground_eigenpair(&ConvexPair::zero(pr.grid), tol)?;
    eps_list
        .iter()
        .map(|&eps| {
            let e = if eps == 0.0 { base.clone() } else { ground_eigenpair(&pr.scaled_pair(eps, &pr.grid)?, tol)? };
            if !e.gap_ok {
                return Err(Error::NoSpectralGap { relative_gap: e.relative_gap() });
            }
            let r = (0..pr.grid.len()).map(|k| (e.phi1[k] - base.phi1[k] - eps * pr.beta[k]).abs()).fold(0.0, f64::max);
            Ok(FirstOrderRow {
                eps,
                lambda: e.lambda1,
                r,
                r_over_eps: if eps > 0.0 { r / eps } else { 0.0 },
                lambda_defect: e.lambda1 - base.lambda1 - eps * pr.mu1,
                gap_ok: e.gap_ok,
                method: e.method,
            })
        })
        .collect()
}

/// The canonical rectangle grid used by the perturbation.
pub fn rectangle_grid(nx: usize, ny: usize) -> Result<Grid2> {
    Grid2::new(Rect::canonical(), nx, ny)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::make_q;

    /// `s1 = x^2 sin x / 4 + x cos x / 2 + c sin x` with `c` fixing orthogonality to `sin x`.
    fn s1_closed_form(x: f64) -> f64 {
        let c = -(PI * PI / 48.0 + 0.375);
        0.25 * x * x * x.sin() + 0.5 * x * x.cos() + c * x.sin()
    }

    #[test]
    fn mu1_is_one_half() {
        assert!((mu1_quadrature(64) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn s1_matches_closed_form_at_second_order() {
        let err = |n: usize| {
            let s = solve_s1_mu1(n).unwrap();
            assert!(s.orthogonality.abs() < 1e-12);
            assert!(s.s1.iter().zip(s.s1.iter().rev()).all(|(a, b)| a == &-b));
            s.xs.iter().zip(&s.s1).map(|(&x, &v)| (v - s1_closed_form(x)).abs()).fold(0.0, f64::max)
        };
        let (a, b) = (err(256), err(512));
        assert!(a < 1e-4 && a / b > 3.5 && a / b < 4.5, "{a} {b}");
        let r = |n: usize| solve_s1_mu1(n).unwrap().residual;
        assert!(r(256) < 1e-3 && r(256) / r(512) > 3.5);
    }

    #[test]
    fn s1_is_neumann_in_closed_form() {
        let h = 1e-6;
        for x in [-FRAC_PI_2, FRAC_PI_2] {
            let d = (s1_closed_form(x + h) - s1_closed_form(x - h)) / (2.0 * h);
            assert!(d.abs() < 1e-8);
        }
    }

    #[test]
    fn beta0_traces_and_parity() {
        let q = CosineProfile { k: 1.0, amplitude: 0.7 };
        let grid = rectangle_grid(32, 16).unwrap();
        let b = build_beta0(&q, &grid).unwrap();
        for j in 0..=grid.ny {
            let y = grid.y(j);
            assert!((b[grid.index(grid.nx, j)] - q.jet(y)[0]).abs() < 1e-14);
            for i in 0..=grid.nx {
                assert!((b[grid.index(i, j)] + b[grid.index(grid.nx - i, j)]).abs() < 1e-14);
                assert!((b[grid.index(i, j)] - b[grid.index(i, grid.ny - j)]).abs() < 1e-14);
            }
        }
        let flat = build_beta0(&CosineProfile { k: 0.0, amplitude: 1.0 }, &grid).unwrap();
        for k in 0..grid.len() {
            assert!((flat[k] - grid.point(k).0.sin()).abs() < 1e-15);
        }
        assert!(build_beta0(&CosineProfile { k: 0.5, amplitude: 1.0 }, &grid).is_err());
    }

    #[test]
    fn beta0_defect_matches_finite_differences() {
        let q = CosineProfile { k: 1.0, amplitude: 1.0 };
        let f = |x: f64, y: f64| beta0_value(x, &q.jet(y));
        let h = 1e-3;
        for &(x, y) in &[(0.3, 0.2), (1.2, -0.7), (-1.5, 0.9), (FRAC_PI_2, 0.4)] {
            let lap = (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4.0 * f(x, y)) / (h * h);
            let fd = -lap - f(x, y);
            assert!((fd - beta0_defect(x, &q.jet(y))).abs() < 1e-4, "({x}, {y})");
            // Neumann in x at the edge
            let e = (f(FRAC_PI_2 + h, y) - f(FRAC_PI_2 - h, y)) / (2.0 * h);
            assert!(e.abs() < 1e-9);
        }
    }

    #[test]
    fn v0_matches_closed_form_at_second_order() {
        let q = make_q(1.0 / 8.0).unwrap();
        let err = |n: usize| {
            let grid = rectangle_grid(n, 64).unwrap();
            let v = build_v0(&q, &grid).unwrap();
            let scale = v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            (0..grid.len()).map(|k| (v[k] - v0_closed_form(grid.point(k).0, &q.jet(grid.point(k).1))).abs()).fold(0.0, f64::max) / scale
        };
        let (a, b) = (err(64), err(128));
        assert!(a < 1e-3 && a / b > 3.0, "{a} {b}");
        let grid = rectangle_grid(64, 64).unwrap();
        let v = build_v0(&q, &grid).unwrap();
        let scale = v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        for k in 0..grid.len() {
            let (i, j) = grid.coords(k);
            assert!((v[k] - v[grid.index(grid.nx - i, j)]).abs() < 1e-8 * scale);
        }
        let flat = build_v0(&CosineProfile { k: 0.0, amplitude: 1.0 }, &grid).unwrap();
        assert!(flat.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn v0_solves_the_linearized_equation() {
        // -Delta beta_0 + d_x V_0 d_x phi_0 - beta_0 = 0 with phi_0 = sqrt(2) sin x
        let q = CosineProfile { k: 1.0, amplitude: 1.0 };
        let h = 1e-4;
        for &(x, y) in &[(0.4, 0.1), (1.1, -0.5), (1.5, 0.8)] {
            let j = q.jet(y);
            let dv = (v0_closed_form(x + h, &j) - v0_closed_form(x - h, &j)) / (2.0 * h);
            let res = beta0_defect(x, &j) + dv * SQRT_2 * x.cos();
            assert!(res.abs() < 1e-6, "{res}");
        }
    }

    #[test]
    fn assembly_invariants_on_cosine_profile() {
        let grid = rectangle_grid(64, 32).unwrap();
        let pr = assemble_perturbation(Arc::new(CosineProfile { k: 1.0, amplitude: 0.5 }), &grid, 1.0).unwrap();
        assert!(pr.v_q.iter().all(|v| *v <= 0.0));
        assert!(pr.trace_defect() < 1e-6 * pr.m.max(1.0));
        let g = &pr.grid;
        for k in 0..g.len() {
            let (i, j) = g.coords(k);
            assert!((pr.beta[k] + pr.beta[g.index(g.nx - i, j)]).abs() < 1e-10);
            assert!((pr.beta[k] - pr.beta[g.index(i, g.ny - j)]).abs() < 1e-10);
            assert!((pr.v_q[k] - pr.v_q[g.index(g.nx - i, j)]).abs() < 1e-10);
        }
        let flat = assemble_perturbation(Arc::new(CosineProfile { k: 0.0, amplitude: 1.0 }), &grid, 1.0).unwrap();
        assert_eq!(flat.m, 1.0);
    }

    #[test]
    fn first_order_expansion_on_a_small_grid() {
        let grid = rectangle_grid(48, 24).unwrap();
        let pr = assemble_perturbation(Arc::new(CosineProfile { k: 1.0, amplitude: 0.5 }), &grid, 1.0).unwrap();
        let rows = verify_first_order(&pr, &[0.0, 0.1, 0.05, 0.025], 1e-11).unwrap();
        assert_eq!(rows[0].r, 0.0);
        for w in rows[1..].windows(2) {
            let ratio = w[1].r / w[0].r;
            assert!((0.15..=0.4).contains(&ratio), "ratio {ratio}");
        }
        for row in &rows[1..] {
            assert!(row.lambda_defect.abs() < 2.0 * row.eps * row.eps, "{row:?}");
        }
    }
}
