//! The profile `q`, the wing shaping function `g`, convexified wing
//! potentials and the discrete convexity certificate.

use std::f64::consts::FRAC_PI_2;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::geometry::{relative_convexity_tol, ConvexPair, Grid2, Rect};

/// `int_{-1}^{1} exp(-1/(1-u^2)) du`.
pub const MOLLIFIER_MASS: f64 = 0.443_993_816_168_079_4;

const GL_NODES: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_WEIGHTS: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// 8-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in GL_NODES.iter().zip(&GL_WEIGHTS) {
        s += w * (f(c - h * x) + f(c + h * x));
    }
    s * h
}

/// Mollifier `exp(-1/(1-u^2))` and its first three derivatives.
pub fn mollifier_derivatives(u: f64) -> [f64; 4] {
    let a = 1.0 - u * u;
    if a <= 1e-3 {
        return [0.0; 4];
    }
    let phi = (-1.0 / a).exp();
    let g1 = -2.0 * u / (a * a);
    let g2 = -2.0 / (a * a) - 8.0 * u * u / (a * a * a);
    let g3 = -24.0 * u / (a * a * a) - 48.0 * u * u * u / (a * a * a * a);
    [phi, g1 * phi, (g2 + g1 * g1) * phi, (g3 + 3.0 * g1 * g2 + g1 * g1 * g1) * phi]
}

const STEP_CELLS: usize = 2048;

fn step_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 1.0 / STEP_CELLS as f64;
        let mut cum = vec![0.0; STEP_CELLS + 1];
        for k in 0..STEP_CELLS {
            let (a, b) = (2.0 * k as f64 * h - 1.0, 2.0 * (k + 1) as f64 * h - 1.0);
            cum[k + 1] = cum[k] + gauss_legendre(|u| mollifier_derivatives(u)[0], a, b);
        }
        let total = cum[STEP_CELLS];
        cum.iter().map(|c| c / total).collect()
    })
}

/// Smooth step: `0` for `s <= 0`, `1` for `s >= 1`, `S(1-s) = 1 - S(s)`,
/// built from the normalized mollifier integral.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    if s > 0.5 {
        return 1.0 - smooth_step(1.0 - s);
    }
    // quintic Hermite interpolation of the tabulated integral
    let table = step_table();
    let h = 1.0 / STEP_CELLS as f64;
    let u = s / h;
    let k = (u.floor() as usize).min(STEP_CELLS - 1);
    let t = u - k as f64;
    let (s0, s1) = (k as f64 * h, (k + 1) as f64 * h);
    let d0 = smooth_step_derivatives(s0);
    let d1 = smooth_step_derivatives(s1);
    let (t2, t3) = (t * t, t * t * t);
    let (t4, t5) = (t3 * t, t3 * t2);
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 0.5 * t3 - t4 + 0.5 * t5;
    h0 * table[k] + h1 * h * d0[1] + h2 * h * h * d0[2] + h3 * table[k + 1] + h4 * h * d1[1] + h5 * h * h * d1[2]
}

/// `[S, S', S'', S''', S'''']` at `s`.
pub fn smooth_step_derivatives(s: f64) -> [f64; 5] {
    if s <= 0.0 {
        return [0.0; 5];
    }
    if s >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0, 0.0];
    }
    let m = mollifier_derivatives(2.0 * s - 1.0);
    let c = 1.0 / MOLLIFIER_MASS;
    [f64::NAN, 2.0 * c * m[0], 4.0 * c * m[1], 8.0 * c * m[2], 16.0 * c * m[3]]
}

fn step_with_derivatives(s: f64) -> [f64; 5] {
    let mut d = smooth_step_derivatives(s);
    d[0] = smooth_step(s);
    d
}

/// Even bump with `b = 1` on `|x| <= 1/3`, `b = 0` on `|x| >= 2/3` and
/// `b(x) = 1 - b(1 - x)` on `[0, 1]`. Returns `b` and four derivatives.
pub fn bump_derivatives(x: f64) -> [f64; 5] {
    let s = step_with_derivatives(3.0 * x.abs() - 1.0);
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let mut out = [1.0 - s[0], 0.0, 0.0, 0.0, 0.0];
    let mut f = 1.0;
    for k in 1..5 {
        f *= 3.0 * sign;
        out[k] = -f * s[k];
    }
    out
}

/// The profile `q_delta(y) = 2 b(y) - 1 + b((|y| - 1) / delta)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ProfileQ {
    pub delta: f64,
}

pub fn make_q(delta: f64) -> Result<ProfileQ> {
    if !(delta > 0.0 && delta <= 0.125) {
        return Err(Error::InvalidParameter(format!("profile width delta = {delta} must lie in (0, 1/8]")));
    }
    Ok(ProfileQ { delta })
}

impl ProfileQ {
    pub fn value(&self, y: f64) -> f64 {
        self.derivatives(y)[0]
    }

    /// `[q, q', q'', q''', q'''']` at `y`.
    pub fn derivatives(&self, y: f64) -> [f64; 5] {
        let a = y.abs();
        let inner = bump_derivatives(a);
        // edge term b((1 - |y|) / delta), differentiated in |y|
        let edge = bump_derivatives((1.0 - a) / self.delta);
        let mut out = [0.0; 5];
        let mut f = 1.0;
        for k in 0..5 {
            out[k] = 2.0 * inner[k] + f * edge[k];
            f *= -1.0 / self.delta;
        }
        out[0] -= 1.0;
        if y < 0.0 {
            out[1] = -out[1];
            out[3] = -out[3];
        }
        out
    }

    pub fn sample(&self, ys: &[f64]) -> Vec<f64> {
        ys.iter().map(|&y| self.value(y)).collect()
    }
}

/// Outcome of the heat-gap test for a profile.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct HeatGap {
    /// `min_t H(0, t) - H(1, t)` under the 1/8-scaled flow.
    pub min_gap: f64,
    pub argmin_t: f64,
    /// The same minimum under the unscaled flow `H_t = H_yy` on `t in [0, 1]`.
    pub min_gap_unscaled: f64,
}

impl HeatGap {
    pub fn positive(&self) -> bool {
        self.min_gap > 0.0
    }
}

/// Runs the Neumann heat flow of `q` on `[-1, 1]` and reports the smallest
/// value of `H(0, t) - H(1, t)`.
pub fn check_q_heat_gap(q: &dyn Fn(f64) -> f64, nt: usize, ny: usize) -> Result<HeatGap> {
    if nt < 64 || ny < 64 {
        return Err(Error::InvalidParameter(format!("heat gap needs nt, ny >= 64, got {nt}, {ny}")));
    }
    let gap = |scale: f64| -> Result<(f64, f64)> {
        let h = crate::heat::heat_1d(q, ny, nt, scale)?;
        let mid = ny / 2;
        let mut best = (f64::INFINITY, 0.0);
        for (k, u) in h.values.iter().enumerate() {
            let g = u[mid] - u[ny];
            if g < best.0 {
                best = (g, h.times[k]);
            }
        }
        Ok(best)
    };
    let (min_gap, argmin_t) = gap(0.125)?;
    let (min_gap_unscaled, _) = gap(1.0)?;
    Ok(HeatGap { min_gap, argmin_t, min_gap_unscaled })
}

/// `g(x, y) = M b(x) g0(y)` with the ramp `b(x) = S(2x - 1)` and
/// `g0(y) = (|y| - 2/3)_+^3`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FlowSpec {
    pub amplitude: f64,
}

pub const FLOW_CORE: f64 = 2.0 / 3.0;
pub const FLOW_CORRIDOR: (f64, f64) = (2.0 / 3.0, 0.75);

pub fn make_g(amplitude: f64) -> Result<FlowSpec> {
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(Error::InvalidParameter(format!("flow amplitude {amplitude} must be finite and nonnegative")));
    }
    Ok(FlowSpec { amplitude })
}

/// Second-order jet of a function of two variables.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl FlowSpec {
    pub fn ramp(x: f64) -> [f64; 3] {
        let s = step_with_derivatives(2.0 * x - 1.0);
        [s[0], 2.0 * s[1], 4.0 * s[2]]
    }

    pub fn profile(y: f64) -> [f64; 3] {
        let e = y.abs() - FLOW_CORE;
        if e <= 0.0 {
            return [0.0; 3];
        }
        let sign = y.signum();
        [e * e * e, 3.0 * e * e * sign, 6.0 * e]
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.amplitude * Self::ramp(x)[0] * Self::profile(y)[0]
    }

    /// `d g / d y`, the slope of the transport field `(1, g_y)`.
    pub fn dy(&self, x: f64, y: f64) -> f64 {
        let e = y.abs() - FLOW_CORE;
        if e <= 0.0 || x <= 0.5 || self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * smooth_step(2.0 * x - 1.0) * 3.0 * e * e * y.signum()
    }

    pub fn jet(&self, x: f64, y: f64) -> Jet2 {
        let r = Self::ramp(x);
        let p = Self::profile(y);
        let m = self.amplitude;
        Jet2 { v: m * r[0] * p[0], x: m * r[1] * p[0], y: m * r[0] * p[1], xx: m * r[2] * p[0], xy: m * r[1] * p[1], yy: m * r[0] * p[2] }
    }
}

/// Largest `|F(1, y)|` over starters with `|y| >= 2/3`, together with the
/// smallest, for a flow amplitude.
pub fn corridor_extent(spec: &FlowSpec, samples: usize) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for k in 0..samples {
        let y = -1.0 + 2.0 * k as f64 / (samples - 1) as f64;
        if y.abs() < FLOW_CORE {
            continue;
        }
        let e = crate::transport::flow_endpoint(spec, 1.0, y)?.abs();
        lo = lo.min(e);
        hi = hi.max(e);
    }
    Ok((lo, hi))
}

const CORRIDOR_SAMPLES: usize = 101;
const MAX_FLOW_AMPLITUDE: f64 = 1e6;

/// Smallest amplitude (doubling sweep from 1, then bisection to 1% relative)
/// whose backward flow maps every sampled starter with `|y| >= 2/3` into the
/// corridor `[2/3, 3/4]`.
pub fn calibrate_g_corridor() -> Result<f64> {
    let passes = |m: f64| -> Result<bool> {
        let (lo, hi) = corridor_extent(&FlowSpec { amplitude: m }, CORRIDOR_SAMPLES)?;
        Ok(lo >= FLOW_CORRIDOR.0 - 1e-12 && hi <= FLOW_CORRIDOR.1)
    };
    if passes(0.0)? {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while !passes(hi)? {
        hi *= 2.0;
        if hi > MAX_FLOW_AMPLITUDE {
            return Err(Error::Calibration(format!("no flow amplitude up to {MAX_FLOW_AMPLITUDE} reaches the corridor")));
        }
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    while hi - lo > 0.01 * hi {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Result of the discrete convexity certificate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Certificate {
    pub passed: bool,
    /// Most negative Hessian eigenvalue found, or the smallest one if none is negative.
    pub worst_defect: f64,
    pub worst_node: (usize, usize),
}

/// Lattice directions of the wide convexity stencil.
const STENCIL: [(isize, isize); 8] = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (2, -1), (1, 2), (1, -2)];

/// Smallest directional curvature `(f(p + v) + f(p - v) - 2 f(p)) / |v|^2`
/// over the lattice directions in [`STENCIL`] at every node where the
/// stencil fits; passes iff all are `>= -tol`.
///
/// Convex functions pass exactly, including across kinks of `max` and the
/// onset of `x_+^4`, where the central 2x2 Hessian reports spurious
/// negative eigenvalues.
pub fn certify_convexity(grid: &Grid2, values: &[f64], tol: f64) -> Certificate {
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut worst = f64::INFINITY;
    let mut node = (0, 0);
    for i in 0..=grid.nx {
        for j in 0..=grid.ny {
            let c = values[grid.index(i, j)];
            for &(di, dj) in &STENCIL {
                let (ip, jp) = (i as isize + di, j as isize + dj);
                let (im, jm) = (i as isize - di, j as isize - dj);
                let fits = |a: isize, b: isize| a >= 0 && b >= 0 && a <= grid.nx as isize && b <= grid.ny as isize;
                if !fits(ip, jp) || !fits(im, jm) {
                    continue;
                }
                let plus = values[grid.index(ip as usize, jp as usize)];
                let minus = values[grid.index(im as usize, jm as usize)];
                let len2 = (di as f64 * hx).powi(2) + (dj as f64 * hy).powi(2);
                let curv = (plus + minus - 2.0 * c) / len2;
                if curv < worst {
                    worst = curv;
                    node = (i, j);
                }
            }
        }
    }
    if !worst.is_finite() {
        worst = 0.0;
    }
    Certificate { passed: worst >= -tol, worst_defect: worst, worst_node: node }
}

/// Smallest eigenvalue of the central-difference Hessian over interior nodes.
pub fn hessian_min_eigenvalue(grid: &Grid2, values: &[f64]) -> (f64, (usize, usize)) {
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut worst = f64::INFINITY;
    let mut node = (0, 0);
    for i in 1..grid.nx {
        for j in 1..grid.ny {
            let v = |a: usize, b: usize| values[grid.index(a, b)];
            let c = v(i, j);
            let a = (v(i + 1, j) - 2.0 * c + v(i - 1, j)) / (hx * hx);
            let d = (v(i, j + 1) - 2.0 * c + v(i, j - 1)) / (hy * hy);
            let b = (v(i + 1, j + 1) - v(i + 1, j - 1) - v(i - 1, j + 1) + v(i - 1, j - 1)) / (4.0 * hx * hy);
            let low = 0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt();
            if low < worst {
                worst = low;
                node = (i, j);
            }
        }
    }
    (worst, node)
}

/// Potential on the extended rectangle `R_m`: the base potential inside,
/// joined to a steep convex ramp built from the shaping function on the wings.
#[derive(Debug, Clone)]
pub struct WingPotential {
    pub pair: ConvexPair,
    pub flow: FlowSpec,
    pub m: f64,
    pub l: f64,
    pub c: f64,
    /// `sup |V|` of the base potential.
    pub base_sup: f64,
}

/// Wing ramp `h_{l,m}(x', y)` in wing coordinates `x' = (|x| - pi/2) / m`.
#[derive(Debug, Clone, Copy)]
pub struct WingRamp {
    pub flow: FlowSpec,
    pub m: f64,
    pub l: f64,
    pub c: f64,
    pub base_sup: f64,
}

impl WingRamp {
    /// `g_m = g + C m^{-1} x_+^4 (2 + y^2)` with its jet in `(x', y)`.
    pub fn g_m(&self, xw: f64, y: f64) -> Jet2 {
        let mut j = if xw > 0.0 { self.flow.jet(xw, y) } else { Jet2::default() };
        if xw > 0.0 {
            let k = self.c / self.m;
            let (x2, x3) = (xw * xw, xw * xw * xw);
            let p = 2.0 + y * y;
            j.v += k * x2 * x2 * p;
            j.x += 4.0 * k * x3 * p;
            j.y += 2.0 * k * x2 * x2 * y;
            j.xx += 12.0 * k * x2 * p;
            j.xy += 8.0 * k * x3 * y;
            j.yy += 2.0 * k * x2 * x2;
        }
        j
    }

    /// `h = l (g_m + m x'^2 / 2 + m^2 x') + ||V||`. The offset sits outside
    /// the factor `l`, so `h > V` only within `2 ||V|| / (l m)` of the seam.
    pub fn value(&self, xw: f64, y: f64) -> f64 {
        let g = if xw > 0.0 { self.g_m(xw, y).v } else { 0.0 };
        self.l * (g + 0.5 * self.m * xw * xw + self.m * self.m * xw) + self.base_sup
    }

    /// Rescaled transport field `v_m = (1 + x'/m + m^{-2} d_x g_m, d_y g_m)`.
    pub fn field(&self, xw: f64, y: f64) -> (f64, f64) {
        let j = self.g_m(xw, y);
        (1.0 + xw / self.m + j.x / (self.m * self.m), j.y)
    }

    /// Gradient of the ramp in physical coordinates at `x > pi/2`.
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let xw = (x.abs() - FRAC_PI_2) / self.m;
        let (a, b) = self.field(xw, y);
        (self.l * self.m * a * x.signum(), self.l * b)
    }
}

impl WingPotential {
    pub fn ramp(&self) -> WingRamp {
        WingRamp { flow: self.flow, m: self.m, l: self.l, c: self.c, base_sup: self.base_sup }
    }

    pub fn value_at(&self, x: f64, y: f64) -> Result<f64> {
        self.pair.value_at(x, y)
    }
}

fn wing_value(base: &ConvexPair, ramp: &WingRamp, x: f64, y: f64) -> f64 {
    let xw = (x.abs() - FRAC_PI_2) / ramp.m;
    let h = ramp.value(xw, y);
    if x.abs() <= FRAC_PI_2 {
        let xc = x.clamp(-FRAC_PI_2, FRAC_PI_2);
        let v = base.value_at(xc, y).unwrap_or(f64::NEG_INFINITY);
        v.max(h)
    } else {
        h
    }
}

/// Grid on `R_m` with the base x spacing and nodes on `x = +-pi/2`. The wing
/// length is snapped to a whole number of cells, so the returned grid spans
/// `R_{m'}` with `|m' - m| <= hx / 2`.
pub fn wing_grid(base: &Grid2, m: f64) -> Result<Grid2> {
    let hx = base.hx();
    if (base.rect.x_min + FRAC_PI_2).abs() > 1e-12 || (base.rect.x_max - FRAC_PI_2).abs() > 1e-12 {
        return Err(Error::InvalidParameter("wings attach to a base grid on [-pi/2, pi/2]".into()));
    }
    let nw = ((m / hx).round() as usize).max(1);
    Grid2::new(Rect::with_wings(nw as f64 * hx)?, base.nx + 2 * nw, base.ny)
}

/// Nodes on `|x| = pi/2` straddle the seam, where the ramp climbs by
/// `l ||V||` across a layer much thinner than a cell. The operator uses
/// `-log` of the dual-cell average of `exp(-V_{l,m})` there; the convexity
/// certificate runs on the point samples.
fn seam_value(base: &ConvexPair, ramp: &WingRamp, x: f64, y: f64, hx: f64) -> f64 {
    const PIECES: usize = 32;
    let reference = wing_value(base, ramp, x.signum() * (FRAC_PI_2 - 0.5 * hx), y);
    let a = x.abs() - 0.5 * hx;
    let piece = hx / PIECES as f64;
    let mean: f64 = (0..PIECES)
        .map(|k| {
            let lo = a + k as f64 * piece;
            gauss_legendre(|s| (reference - wing_value(base, ramp, s, y)).exp(), lo, lo + piece)
        })
        .sum::<f64>()
        / hx;
    reference - mean.ln()
}

const MIN_C_EXP: i32 = -20;
const MAX_C_EXP: i32 = 40;

/// Builds `V_{l,m}` on `R_m` and certifies it, choosing `C` as the smallest
/// power of two in `[2^-20, 2^40]` that makes the certificate pass.
pub fn make_wing_potential(base: &ConvexPair, flow: &FlowSpec, m: f64, l: f64) -> Result<WingPotential> {
    if !(m > 0.0) || !(l >= 1.0) {
        return Err(Error::InvalidParameter(format!("wing needs m > 0 and l >= 1, got m = {m}, l = {l}")));
    }
    let grid = wing_grid(&base.grid, m)?;
    let m = grid.rect.x_max - FRAC_PI_2;
    let hx = grid.hx();
    let base_sup = base.sup_norm();
    let mut last = None;
    for e in MIN_C_EXP..=MAX_C_EXP {
        let ramp = WingRamp { flow: *flow, m, l, c: (e as f64).exp2(), base_sup };
        let values = grid.sample(|x, y| wing_value(base, &ramp, x, y));
        let tol = relative_convexity_tol(&values, 1e-8);
        let cert = certify_convexity(&grid, &values, tol);
        if cert.passed {
            let values =
                grid.sample(|x, y| if (x.abs() - FRAC_PI_2).abs() < 1e-9 * hx { seam_value(base, &ramp, x, y, hx) } else { wing_value(base, &ramp, x, y) });
            let mut pair = ConvexPair::uncertified(grid, values)?;
            pair.convexity_tol = tol;
            let b = base.clone();
            pair.closed_form = Some(Arc::new(move |x, y| wing_value(&b, &ramp, x, y)));
            return Ok(WingPotential { pair, flow: *flow, m, l, c: ramp.c, base_sup });
        }
        last = Some(cert);
    }
    let cert = last.expect("at least one constant tried");
    Err(Error::Convexity { worst: cert.worst_defect, i: cert.worst_node.0, j: cert.worst_node.1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mollifier_mass_matches_quadrature() {
        let n = 400;
        let total: f64 = (0..n)
            .map(|k| {
                let a = -1.0 + 2.0 * k as f64 / n as f64;
                gauss_legendre(|u| mollifier_derivatives(u)[0], a, a + 2.0 / n as f64)
            })
            .sum();
        assert!((total - MOLLIFIER_MASS).abs() < 1e-15);
    }

    #[test]
    fn mollifier_derivatives_match_differences() {
        let h = 1e-5;
        for &u in &[-0.8, -0.3, 0.0, 0.2, 0.65, 0.9] {
            let d = mollifier_derivatives(u);
            for k in 1..4 {
                let fd = (mollifier_derivatives(u + h)[k - 1] - mollifier_derivatives(u - h)[k - 1]) / (2.0 * h);
                assert!((fd - d[k]).abs() < 1e-6 * (1.0 + d[k].abs()), "order {k} at {u}");
            }
        }
    }

    #[test]
    fn smooth_step_interpolant_matches_quadrature() {
        let cells = 256;
        for k in 1..50 {
            let s = k as f64 / 50.0 - 0.0037;
            let top = 2.0 * s - 1.0;
            let direct: f64 = (0..cells)
                .map(|c| {
                    let a = -1.0 + (top + 1.0) * c as f64 / cells as f64;
                    gauss_legendre(|u| mollifier_derivatives(u)[0], a, a + (top + 1.0) / cells as f64)
                })
                .sum();
            assert!((smooth_step(s) - direct / MOLLIFIER_MASS).abs() < 1e-9, "s = {s}");
        }
        assert_eq!(smooth_step(0.5), 0.5);
        assert!((smooth_step(0.3) + smooth_step(0.7) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn q_examples() {
        let q = make_q(1.0 / 16.0).unwrap();
        assert_eq!(q.value(0.0), 1.0);
        assert_eq!(q.value(0.7), -1.0);
        assert_eq!(q.value(-0.7), -1.0);
        assert_eq!(q.value(1.0), 0.0);
        assert_eq!(q.derivatives(1.0)[1], 0.0);
        assert!(make_q(0.2).is_err());
        assert!(make_q(0.0).is_err());
    }

    #[test]
    fn q_invariants_on_fine_grid() {
        for &delta in &[1.0 / 8.0, 1.0 / 16.0] {
            let q = make_q(delta).unwrap();
            let n = 1024;
            let ys: Vec<f64> = (0..=n).map(|k| -1.0 + 2.0 * k as f64 / n as f64).collect();
            let v = q.sample(&ys);
            for (k, &y) in ys.iter().enumerate() {
                assert_eq!(v[k], v[n - k]);
                assert!((-1.0..=1.0).contains(&v[k]));
                if y.abs() <= 1.0 / 3.0 {
                    assert_eq!(v[k], 1.0);
                }
                if (2.0 / 3.0..=0.75).contains(&y.abs()) {
                    assert_eq!(v[k], -1.0);
                }
                if y >= 0.75 && k < n {
                    assert!(v[k + 1] >= v[k] - 1e-12);
                }
            }
        }
    }

    #[test]
    fn q_derivatives_match_differences() {
        let q = make_q(1.0 / 8.0).unwrap();
        let h = 1e-6;
        for &y in &[-0.95, -0.5, 0.45, 0.55, 0.9, 0.97] {
            let d = q.derivatives(y);
            for k in 1..5 {
                let fd = (q.derivatives(y + h)[k - 1] - q.derivatives(y - h)[k - 1]) / (2.0 * h);
                let scale = 1.0 + d[k].abs() + d[k - 1].abs();
                assert!((fd - d[k]).abs() < 1e-4 * scale, "order {k} at {y}: {fd} vs {}", d[k]);
            }
        }
    }

    #[test]
    fn heat_gap_examples() {
        let q = make_q(1.0 / 16.0).unwrap();
        let gap = check_q_heat_gap(&|y| q.value(y), 128, 128).unwrap();
        assert!(gap.positive(), "{gap:?}");
        let flat = check_q_heat_gap(&|_| 0.25, 64, 64).unwrap();
        assert!(!flat.positive() && flat.min_gap.abs() < 1e-14);
        let neg = check_q_heat_gap(&|y| -q.value(y), 128, 128).unwrap();
        assert!(!neg.positive());
    }

    #[test]
    fn flow_spec_shape() {
        let g = make_g(12.0).unwrap();
        for k in 0..=20 {
            let y = -1.0 + 0.1 * k as f64;
            assert_eq!(g.value(0.25, y), 0.0);
            assert_eq!(g.value(0.9, y), g.value(0.9, -y));
        }
        for k in 0..=20 {
            let x = 0.05 * k as f64;
            assert_eq!(g.value(x, 0.5), 0.0);
            assert!(g.dy(x, 0.9) >= 0.0);
        }
        let h = 1e-5;
        let j = g.jet(0.8, 0.9);
        assert!(((g.value(0.8 + h, 0.9) - g.value(0.8 - h, 0.9)) / (2.0 * h) - j.x).abs() < 1e-6);
        assert!(((g.value(0.8, 0.9 + h) - g.value(0.8, 0.9 - h)) / (2.0 * h) - j.y).abs() < 1e-6);
        assert!((g.dy(0.8, 0.9) - j.y).abs() < 1e-9);
    }

    #[test]
    fn certificate_examples() {
        let grid = Grid2::new(Rect::canonical(), 16, 16).unwrap();
        let bowl = grid.sample(|x, y| x * x + y * y);
        let c = certify_convexity(&grid, &bowl, 1e-12);
        assert!(c.passed && c.worst_defect > 0.0);
        let cap = grid.sample(|x, _| -x * x);
        let c = certify_convexity(&grid, &cap, 1e-12);
        assert!(!c.passed && (c.worst_defect + 2.0).abs() < 1e-9);
        let saddle = grid.sample(|x, y| x * x - 0.1 * y * y);
        assert!(!certify_convexity(&grid, &saddle, 1e-12).passed);
    }

    #[test]
    fn certificate_accepts_convex_kinks() {
        let grid = Grid2::new(Rect::canonical(), 24, 12).unwrap();
        let kinked = grid.sample(|x, y| (0.3 * y * y).max(2.0 * x - 1.0) + (x - 0.5).max(0.0).powi(4) * (2.0 + y * y));
        assert!(certify_convexity(&grid, &kinked, 0.0).passed);
        // the central Hessian stencil reports a spurious defect on the same field
        assert!(hessian_min_eigenvalue(&grid, &kinked).0 < 0.0);
    }

    #[test]
    fn flat_wing_is_certified_ramp() {
        let base = ConvexPair::zero(Grid2::new(Rect::canonical(), 32, 8).unwrap());
        let w = make_wing_potential(&base, &make_g(0.0).unwrap(), 2.0, 4.0).unwrap();
        let g = &w.pair.grid;
        assert!((w.m - 2.0).abs() <= 0.5 * g.hx() && (g.hx() - base.grid.hx()).abs() < 1e-14);
        for i in 0..=g.nx {
            for j in 0..=g.ny {
                let (x, y) = (g.x(i), g.y(j));
                let v = w.pair.potential[g.index(i, j)];
                if (x.abs() - FRAC_PI_2).abs() < 1e-9 {
                    // dual-cell average of a zero floor and a steep ramp
                    assert!(v > 0.0 && v < (2.0f64).ln() + 1e-9, "{v}");
                    continue;
                }
                let xw = (x.abs() - FRAC_PI_2) / w.m;
                let ramp = 4.0 * (0.5 * w.m * xw * xw + w.m * w.m * xw) + if xw > 0.0 { 4.0 * w.c / w.m * xw.powi(4) * (2.0 + y * y) } else { 0.0 };
                let expect = if x.abs() <= FRAC_PI_2 { ramp.max(0.0) } else { ramp };
                assert!((v - expect).abs() < 1e-12 * (1.0 + expect.abs()));
            }
        }
    }

    #[test]
    fn wing_potential_symmetry_and_gradient() {
        let base = ConvexPair::from_fn(Grid2::new(Rect::canonical(), 32, 16).unwrap(), |x, y| 0.05 * (x * x + y * y) - 0.2, 1e-10).unwrap();
        let w = make_wing_potential(&base, &make_g(12.0).unwrap(), 2.0, 4.0).unwrap();
        let g = &w.pair.grid;
        for i in 0..=g.nx {
            for j in 0..=g.ny {
                let v = w.pair.potential[g.index(i, j)];
                assert!((v - w.pair.potential[g.index(g.nx - i, j)]).abs() < 1e-9 * (1.0 + v.abs()));
                assert!((v - w.pair.potential[g.index(i, g.ny - j)]).abs() < 1e-9 * (1.0 + v.abs()));
                let (x, y) = (g.x(i), g.y(j));
                if x.abs() <= FRAC_PI_2 {
                    assert!(v >= base.value_at(x.clamp(-FRAC_PI_2, FRAC_PI_2), y).unwrap() - 1e-12);
                }
            }
        }
        let ramp = w.ramp();
        let f = w.pair.closed_form.clone().unwrap();
        let h = 1e-5;
        for &(x, y) in &[(2.9, 0.8), (3.3, -0.9), (4.0, 0.3)] {
            let (gx, gy) = ramp.gradient(x, y);
            let fx = (f(x + h, y) - f(x - h, y)) / (2.0 * h);
            let fy = (f(x, y + h) - f(x, y - h)) / (2.0 * h);
            assert!((fx - gx).abs() < 1e-5 * gx.abs().max(1.0));
            assert!((fy - gy).abs() < 1e-5 * gy.abs().max(1.0));
        }
    }

    #[test]
    fn wing_matches_base_outside_a_thin_seam_strip() {
        let base = ConvexPair::from_fn(Grid2::new(Rect::canonical(), 32, 8).unwrap(), |x, y| 0.05 * (x * x + y * y) - 0.2, 1e-10).unwrap();
        let flow = make_g(12.0).unwrap();
        for &l in &[4.0, 40.0, 400.0] {
            let w = make_wing_potential(&base, &flow, 2.0, l).unwrap();
            let f = w.pair.closed_form.clone().unwrap();
            let width =
                (0..20000).map(|k| k as f64 * 1e-5).find(|&d| (f(FRAC_PI_2 - d, 0.7) - base.value_at(FRAC_PI_2 - d, 0.7).unwrap()).abs() < 1e-14).unwrap();
            let bound = 2.0 * base.sup_norm() / (l * w.m);
            assert!(width > 0.0 && width <= bound + 1e-5, "l = {l}: {width} vs {bound}");
        }
    }

    #[test]
    fn wing_minimum_grows_with_steepness() {
        let base = ConvexPair::from_fn(Grid2::new(Rect::canonical(), 32, 8).unwrap(), |x, y| 0.05 * (x * x + y * y), 1e-10).unwrap().shifted_nonpositive();
        let flow = make_g(12.0).unwrap();
        let mut last = f64::NEG_INFINITY;
        for &l in &[1.0, 10.0, 100.0] {
            let w = make_wing_potential(&base, &flow, 2.0, l).unwrap();
            let g = &w.pair.grid;
            let min = (0..g.len()).filter(|&k| g.point(k).0.abs() > FRAC_PI_2).map(|k| w.pair.potential[k]).fold(f64::INFINITY, f64::min);
            assert!(min > last);
            last = min;
        }
    }

    proptest! {
        #[test]
        fn smooth_step_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(smooth_step(lo) <= smooth_step(hi) + 1e-15);
        }

        #[test]
        fn g_convex_in_y(x in 0.0f64..1.0, y in -1.0f64..1.0) {
            let g = make_g(12.0).unwrap();
            prop_assert!(g.jet(x, y).yy >= 0.0);
            prop_assert_eq!(g.value(x, y), g.value(x, -y));
        }
    }
}
