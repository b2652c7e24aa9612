//! Monte Carlo checks of the probabilistic estimates: the hitting time of
//! the radial gap process, the Feynman-Kac representation of slice
//! eigenfunctions, the variance of reflected Brownian motion, and the
//! explicit barrier used for the uniform bound.
//!
//! Path `i` draws from its own ChaCha stream seeded with `seed ^ i`, and
//! every average is a pairwise sum over paths in index order, so results do
//! not depend on the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BarrelSpec, ConvexPair, Rect};
use crate::spectral::{slice_eigenpair, SliceEigenResult};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct McConfig {
    pub seed: u64,
    pub paths: usize,
    pub dt: f64,
    pub d: u32,
    pub lambda_d: f64,
}

impl McConfig {
    pub fn new(seed: u64, paths: usize, dt: f64, d: u32, lambda_d: f64) -> Result<Self> {
        if paths < 2 || !(dt > 0.0) || d == 0 || !lambda_d.is_finite() {
            return Err(Error::InvalidParameter(format!("Monte Carlo config needs paths >= 2, dt > 0, d >= 1; got {paths}, {dt}, {d}")));
        }
        Ok(McConfig { seed, paths, dt, d, lambda_d })
    }
}

fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index as u64)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Sum in a fixed binary tree, independent of how the values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = pairwise_sum(xs) / n;
        let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1.0).max(1.0);
        Estimate { mean, stderr: (var / n).sqrt(), samples: xs.len() }
    }
}

/// Checkpoints per unit of the noiseless hitting time `t0 / 8` in the supermartingale scan.
const CHECKPOINTS: usize = 8;

#[derive(Debug, Clone, serde::Serialize)]
pub struct HittingReport {
    pub t0: f64,
    /// `E[exp(2 lambda_d s*)]`.
    pub moment: Estimate,
    /// `E[exp(lambda_d s*)]`.
    pub moment_lambda: Estimate,
    pub hit_time: Estimate,
    pub bound: f64,
    /// Paths that reached the reflecting cap `H = 1 - 1/sqrt(d)`, including
    /// every path when `t0` lies above it.
    pub guard_touches: usize,
    /// `(s, E[Y_s])` for `Y_s = (1 + H) exp(2 lambda_d s)` stopped at `s*`.
    pub supermartingale: Vec<(f64, Estimate)>,
    pub supermartingale_ok: bool,
    pub holds: bool,
}

struct HitPath {
    s_star: f64,
    ys: Vec<f64>,
    guard: bool,
}

fn hitting_path(cfg: &McConfig, t0: f64, noise: f64, index: usize, every: usize, checkpoints: usize) -> Result<HitPath> {
    let d = cfg.d as f64;
    let drift = -8.0 * (1.0 + 1.0 / d);
    let cap = 1.0 - 1.0 / d.sqrt();
    let two_l = 2.0 * cfg.lambda_d;
    let sq = cfg.dt.sqrt();
    let max_steps = ((20.0 * t0 / 8.0 + 1.0) / cfg.dt).ceil() as usize;
    let mut rng = path_rng(cfg.seed, index);
    let mut ys = Vec::with_capacity(checkpoints + 1);
    // the diffusion 1/(d(1-H)) is singular at H = 1, so starts above the cap begin on it
    let (mut h, mut guard) = if t0 > cap { (cap, true) } else { (t0, false) };
    ys.push(1.0 + h);
    for n in 0..max_steps {
        let s = n as f64 * cfg.dt;
        let sigma = noise / (d * (1.0 - h));
        let mut next = h + drift * cfg.dt + sigma * sq * normal(&mut rng);
        if next > cap {
            next = 2.0 * cap - next;
            guard = true;
        }
        if next <= 0.0 {
            let s_star = s + cfg.dt * h / (h - next);
            let stopped = (two_l * s_star).exp();
            ys.resize(checkpoints + 1, stopped);
            return Ok(HitPath { s_star, ys, guard });
        }
        h = next;
        if (n + 1) % every == 0 && ys.len() <= checkpoints {
            ys.push((1.0 + h) * (two_l * (s + cfg.dt)).exp());
        }
    }
    Err(Error::NoConvergence { iterations: max_steps, residual: h })
}

fn hitting_with_noise(cfg: &McConfig, t0: f64, noise: f64) -> Result<HittingReport> {
    if !(t0 > 0.0 && t0 <= 1.0) {
        return Err(Error::InvalidParameter(format!("hitting start t0 = {t0} outside (0, 1]")));
    }
    let d = cfg.d as f64;
    if 2.0 * cfg.lambda_d > 8.0 * (1.0 + 1.0 / d) {
        return Err(Error::InvalidParameter(format!("2 lambda_d = {} exceeds the drift 8(1 + 1/d)", 2.0 * cfg.lambda_d)));
    }
    let every = ((t0 / 8.0 / CHECKPOINTS as f64) / cfg.dt).round().max(1.0) as usize;
    let checkpoints = 2 * CHECKPOINTS;
    let paths: Vec<HitPath> = (0..cfg.paths).into_par_iter().map(|i| hitting_path(cfg, t0, noise, i, every, checkpoints)).collect::<Result<_>>()?;
    let s: Vec<f64> = paths.iter().map(|p| p.s_star).collect();
    let e2: Vec<f64> = s.iter().map(|s| (2.0 * cfg.lambda_d * s).exp()).collect();
    let e1: Vec<f64> = s.iter().map(|s| (cfg.lambda_d * s).exp()).collect();
    let supermartingale: Vec<(f64, Estimate)> = (0..=checkpoints)
        .map(|k| {
            let col: Vec<f64> = paths.iter().map(|p| p.ys[k]).collect();
            (k as f64 * every as f64 * cfg.dt, Estimate::from_samples(&col))
        })
        .collect();
    let supermartingale_ok = supermartingale.windows(2).all(|w| {
        let (a, b) = (w[0].1, w[1].1);
        b.mean <= a.mean + 3.0 * (a.stderr * a.stderr + b.stderr * b.stderr).sqrt()
    });
    let moment = Estimate::from_samples(&e2);
    let bound = 1.0 + t0;
    Ok(HittingReport {
        t0,
        moment,
        moment_lambda: Estimate::from_samples(&e1),
        hit_time: Estimate::from_samples(&s),
        bound,
        guard_touches: paths.iter().filter(|p| p.guard).count(),
        supermartingale,
        supermartingale_ok,
        holds: moment.mean <= bound + 3.0 * moment.stderr,
    })
}

/// Euler-Maruyama paths of `dH = -8(1 + 1/d) ds + dB / (d (1 - H))` from
/// `H = t0` to the first zero, with the crossing time interpolated linearly.
pub fn simulate_hitting(cfg: &McConfig, t0: f64) -> Result<HittingReport> {
    hitting_with_noise(cfg, t0, 1.0)
}

/// Reflects `x` into `[lo, hi]`.
fn fold(mut x: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    x = (x - lo).rem_euclid(2.0 * w);
    lo + if x > w { 2.0 * w - x } else { x }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct VarianceReport {
    /// `E |X_t - x0|^2`.
    pub variance: Estimate,
    /// `dim * t`.
    pub bound: f64,
    pub holds: bool,
}

/// Standard Brownian motion in `rect` from `x0`, reflected at the faces.
pub fn reflected_bm_variance(rect: &Rect, x0: (f64, f64), t: f64, cfg: &McConfig) -> Result<VarianceReport> {
    if !rect.contains(x0.0, x0.1) || t < 0.0 {
        return Err(Error::InvalidParameter(format!("reflected motion needs x0 in the rectangle and t >= 0, got {x0:?}, {t}")));
    }
    let steps = (t / cfg.dt).ceil() as usize;
    let h = if steps > 0 { t / steps as f64 } else { 0.0 };
    let sq = h.sqrt();
    let samples: Vec<f64> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            let (mut x, mut y) = x0;
            for _ in 0..steps {
                x = fold(x + sq * normal(&mut rng), rect.x_min, rect.x_max);
                y = fold(y + sq * normal(&mut rng), rect.y_min, rect.y_max);
            }
            (x - x0.0).powi(2) + (y - x0.1).powi(2)
        })
        .collect();
    let variance = Estimate::from_samples(&samples);
    let bound = 2.0 * t;
    Ok(VarianceReport { variance, bound, holds: variance.mean <= bound + 3.0 * variance.stderr })
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct FkProbe {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub psi: f64,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FkReport {
    pub probes: Vec<FkProbe>,
    /// `sup |estimate - psi|`.
    pub sup_error: f64,
    pub max_stderr: f64,
}

/// Probe set: five points along `y = 0.3` times five depths `t`.
pub fn default_probes() -> Vec<(f64, f64, f64)> {
    let xs = [-1.2, -0.6, 0.0, 0.6, 1.2];
    let ts = [0.1, 0.3, 0.5, 0.7, 0.9];
    xs.iter().flat_map(|&x| ts.iter().map(move |&t| (x, 0.3, t))).collect()
}

fn fk_path(spec: &BarrelSpec, slice: &SliceEigenResult, cfg: &McConfig, start: (f64, f64, f64), index: usize) -> Result<f64> {
    let rect = spec.pair.grid.rect;
    let chi = ChiSquared::new(cfg.d as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let sq = (2.0 * cfg.dt).sqrt();
    let (mut x, mut y, t) = start;
    let mut rho = (1.0 - t).sqrt() * spec.barrel_radius(x, y)?;
    let mut gap = rho - spec.barrel_radius(x, y)?;
    let mut rng = path_rng(cfg.seed, index);
    let max_steps = (50.0 / cfg.dt) as usize;
    for n in 0..max_steps {
        let (nx, ny) = (fold(x + sq * normal(&mut rng), rect.x_min, rect.x_max), fold(y + sq * normal(&mut rng), rect.y_min, rect.y_max));
        let radial = rho + sq * normal(&mut rng);
        let nrho = (radial * radial + 2.0 * cfg.dt * chi.sample(&mut rng)).sqrt();
        let ngap = nrho - spec.barrel_radius(nx, ny)?;
        if ngap >= 0.0 {
            let theta = if gap < 0.0 { gap / (gap - ngap) } else { 0.0 };
            let s = (n as f64 + theta) * cfg.dt;
            let (ex, ey) = (x + theta * (nx - x), y + theta * (ny - y));
            return Ok((cfg.lambda_d * s).exp() * slice.value_at(ex.clamp(rect.x_min, rect.x_max), ey.clamp(rect.y_min, rect.y_max), 0.0)?);
        }
        (x, y, rho, gap) = (nx, ny, nrho, ngap);
    }
    Err(Error::NoConvergence { iterations: max_steps, residual: gap })
}

/// Compares `psi(x, t)` from the slice solver with
/// `E[exp(lambda_d tau) psi(X_tau, 0)]`, where `X` is reflected Brownian
/// motion in `Omega` with generator `Delta`, the fiber radius is the exact
/// radius of a `(d+1)`-dimensional Brownian motion, and `tau` is its exit
/// time from the barrel.
pub fn feynman_kac_consistency(spec: &BarrelSpec, slice: &SliceEigenResult, cfg: &McConfig, probes: &[(f64, f64, f64)]) -> Result<FkReport> {
    if spec.d != slice.d || cfg.d != slice.d {
        return Err(Error::InvalidParameter(format!("dimension mismatch: barrel {}, slice {}, config {}", spec.d, slice.d, cfg.d)));
    }
    let mut rows = Vec::with_capacity(probes.len());
    for (p, &start) in probes.iter().enumerate() {
        let base = p * cfg.paths;
        let samples: Vec<f64> = (0..cfg.paths).into_par_iter().map(|i| fk_path(spec, slice, cfg, start, base + i)).collect::<Result<_>>()?;
        let (x, y, t) = start;
        rows.push(FkProbe { x, y, t, psi: slice.value_at(x, y, t)?, estimate: Estimate::from_samples(&samples) });
    }
    Ok(FkReport {
        sup_error: rows.iter().map(|r| (r.estimate.mean - r.psi).abs()).fold(0.0, f64::max),
        max_stderr: rows.iter().map(|r| r.estimate.stderr).fold(0.0, f64::max),
        probes: rows,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FkCheck {
    pub d: u32,
    pub lambda_d: f64,
    pub report: FkReport,
    /// `|psi_fine - psi_coarse|` at each probe, the coarse slice having half the cells per axis.
    pub grid_error: Vec<f64>,
    /// `max |estimate - psi| / (5 (stderr + grid_error))` over the probes.
    pub worst_ratio: f64,
    pub holds: bool,
}

/// Feynman-Kac consistency of the slice eigenfunction of `pair` at
/// dimension `d`, with a per-probe budget of five times the Monte Carlo
/// standard error plus the slice discretization error.
#[allow(clippy::too_many_arguments)]
pub fn feynman_kac_check(
    pair: &ConvexPair,
    d: u32,
    grid3: (usize, usize, usize),
    seed: u64,
    paths: usize,
    dt: f64,
    probes: &[(f64, f64, f64)],
    tol: f64,
) -> Result<FkCheck> {
    let spec = BarrelSpec::new(pair, d)?;
    let fine = slice_eigenpair(&spec, grid3, tol)?;
    let coarse = slice_eigenpair(&spec, ((grid3.0 / 2).max(2), (grid3.1 / 2).max(2), (grid3.2 / 2).max(2)), tol)?;
    let cfg = McConfig::new(seed, paths, dt, d, fine.lambda_d)?;
    let report = feynman_kac_consistency(&spec, &fine, &cfg, probes)?;
    // slice eigenfunctions carry an arbitrary sign per solve
    let (mut same, mut flip) = (0.0_f64, 0.0_f64);
    let pairs: Vec<(f64, f64)> = probes.iter().map(|&(x, y, t)| Ok((fine.value_at(x, y, t)?, coarse.value_at(x, y, t)?))).collect::<Result<_>>()?;
    for (f, c) in &pairs {
        same = same.max((f - c).abs());
        flip = flip.max((f + c).abs());
    }
    let sign = if flip < same { -1.0 } else { 1.0 };
    let grid_error: Vec<f64> = pairs.iter().map(|(f, c)| (f - sign * c).abs()).collect();
    let worst_ratio = report.probes.iter().zip(&grid_error).map(|(p, g)| (p.estimate.mean - p.psi).abs() / (5.0 * (p.estimate.stderr + g))).fold(0.0, f64::max);
    Ok(FkCheck { d, lambda_d: fine.lambda_d, report, grid_error, worst_ratio, holds: worst_ratio <= 1.0 })
}

/// Constant in front of the drift term `10 |w|^2 / d` of the barrier.
pub const BARRIER_QUADRATIC: f64 = 10.0;
/// Growth rate of the barrier in `t`.
pub const BARRIER_LINEAR: f64 = 20.0;

/// Barrier `b(w, t) = a t + c |w|^2 / d + exp(d/8) (2 / (2 + 4t))^(d/2) exp(-|w|^2 / (2 + 4t))`
/// with the additive constant dropped, as a function of `r = |w|`.
#[derive(Debug, Clone, Copy)]
pub struct Barrier {
    pub d: f64,
    pub linear: f64,
    pub quadratic: f64,
}

impl Barrier {
    pub fn new(d: u32) -> Self {
        Barrier { d: d as f64, linear: BARRIER_LINEAR, quadratic: BARRIER_QUADRATIC }
    }

    fn log_gauss(&self, r: f64, t: f64) -> f64 {
        let s = 2.0 + 4.0 * t;
        self.d / 8.0 + 0.5 * self.d * (2.0 / s).ln() - r * r / s
    }

    pub fn value(&self, r: f64, t: f64) -> f64 {
        self.linear * t + self.quadratic * r * r / self.d + self.log_gauss(r, t).exp()
    }

    /// `w . grad_w b / (2 |w|^2) = c/d - G / (2 + 4t)`.
    pub fn radial_sign(&self, r: f64, t: f64) -> f64 {
        self.quadratic / self.d - self.log_gauss(r, t).exp() / (2.0 + 4.0 * t)
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct BarrierReport {
    pub d: u32,
    /// `sup |b_t - (b_rr + (d-1)/r b_r)| / (1 + |b_t|)` by differences on the scan grid.
    pub caloric_residual: f64,
    /// `min_t 2 r^2 (c/d - G/(2+4t))` at `r = sqrt(d)/2`, with its `t`.
    pub boundary_margin: f64,
    pub boundary_argmin_t: f64,
    /// `min_r log b(r, 0) - (sqrt(d)/2 - r)^2 / 4` on `[0, sqrt(d)/2]`.
    pub initial_margin: f64,
    /// `min_tau (1 - tau^2)/2 - (tau - 1)^2 / 4` on `[0, 1]`.
    pub tau_margin: f64,
    /// `(1/8 - log sqrt 17) d`, the log of the Gaussian coefficient at `t = 8`.
    pub t8_exponent: f64,
    pub holds: bool,
}

/// Scans the barrier conditions on an `nr x nt` grid of `|w|` in
/// `[0, sqrt(d)/2 + 1]` and `t` in `[0, 8]`.
pub fn check_barrier(d: u32, nr: usize, nt: usize) -> Result<BarrierReport> {
    check_barrier_with(&Barrier::new(d), nr, nt)
}

pub fn check_barrier_with(b: &Barrier, nr: usize, nt: usize) -> Result<BarrierReport> {
    if b.d < 16.0 || nr < 4 || nt < 4 {
        return Err(Error::InvalidParameter(format!("barrier scan needs d >= 16 and a 4 x 4 grid, got d = {}", b.d)));
    }
    let d = b.d;
    let edge = d.sqrt() / 2.0;
    let r_max = edge + 1.0;
    let (hr, ht) = (r_max / nr as f64, 8.0 / nt as f64);
    let (dr, dt) = (1e-4 * r_max, 1e-5);
    let mut caloric_residual: f64 = 0.0;
    for i in 1..nr {
        for k in 1..nt {
            let (r, t) = (i as f64 * hr, k as f64 * ht);
            let bt = (b.value(r, t + dt) - b.value(r, t - dt)) / (2.0 * dt);
            let br = (b.value(r + dr, t) - b.value(r - dr, t)) / (2.0 * dr);
            let brr = (b.value(r + dr, t) - 2.0 * b.value(r, t) + b.value(r - dr, t)) / (dr * dr);
            let lap = brr + (d - 1.0) / r * br;
            caloric_residual = caloric_residual.max((bt - lap).abs() / (1.0 + bt.abs()));
        }
    }
    let (mut boundary_margin, mut boundary_argmin_t) = (f64::INFINITY, 0.0);
    for k in 0..=nt {
        let t = k as f64 * ht;
        let m = 2.0 * edge * edge * b.radial_sign(edge, t);
        if m < boundary_margin {
            (boundary_margin, boundary_argmin_t) = (m, t);
        }
    }
    let initial_margin = (0..=nr)
        .map(|i| {
            let r = edge * i as f64 / nr as f64;
            b.value(r, 0.0).ln() - 0.25 * (edge - r).powi(2)
        })
        .fold(f64::INFINITY, f64::min);
    let tau_margin = (0..=nr)
        .map(|i| {
            let tau = i as f64 / nr as f64;
            0.5 * (1.0 - tau * tau) - 0.25 * (tau - 1.0).powi(2)
        })
        .fold(f64::INFINITY, f64::min);
    let t8_exponent = (0.125 - 17f64.sqrt().ln()) * d;
    Ok(BarrierReport {
        d: d as u32,
        caloric_residual,
        boundary_margin,
        boundary_argmin_t,
        initial_margin,
        tau_margin,
        t8_exponent,
        holds: boundary_margin > 0.0 && initial_margin > 0.0 && tau_margin >= 0.0 && t8_exponent <= 0.0 && caloric_residual < 1e-4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConvexPair, Grid2};
    use crate::spectral::slice_eigenpair;

    #[test]
    fn noiseless_hitting_is_deterministic_drift() {
        let cfg = McConfig::new(7, 16, 1e-4, 64, 1.0).unwrap();
        let r = hitting_with_noise(&cfg, 0.5, 0.0).unwrap();
        let s = 0.5 / (8.0 * (1.0 + 1.0 / 64.0));
        assert!((r.hit_time.mean - s).abs() < 1e-12 && r.hit_time.stderr < 1e-12);
        assert!((r.moment.mean - (2.0 * s).exp()).abs() < 1e-12);
        assert!(r.holds && r.supermartingale_ok);
        let tiny = hitting_with_noise(&cfg, 1e-6, 0.0).unwrap();
        assert!((tiny.moment.mean - 1.0).abs() < 1e-5);
    }

    #[test]
    fn hitting_is_reproducible_and_bounded() {
        let cfg = McConfig::new(11, 4000, 1e-4, 64, 1.0).unwrap();
        let a = simulate_hitting(&cfg, 0.5).unwrap();
        let b = simulate_hitting(&cfg, 0.5).unwrap();
        assert_eq!(a.moment, b.moment);
        assert!(a.holds && a.supermartingale_ok, "{a:?}");
        assert_eq!(a.guard_touches, 0);
        assert!(simulate_hitting(&cfg, 1.5).is_err());
        let top = simulate_hitting(&McConfig::new(11, 500, 1e-4, 64, 1.0).unwrap(), 1.0).unwrap();
        assert_eq!(top.guard_touches, 500);
        let s = 0.875 / (8.0 * (1.0 + 1.0 / 64.0));
        assert!((top.hit_time.mean - s).abs() < 0.05 * s && top.holds, "{top:?}");
        let steep = McConfig::new(11, 10, 1e-4, 64, 5.0).unwrap();
        assert!(simulate_hitting(&steep, 0.5).is_err());
    }

    #[test]
    fn stderr_halves_with_four_times_the_paths() {
        let rect = Rect::canonical();
        let small = reflected_bm_variance(&rect, (0.0, 0.0), 0.2, &McConfig::new(3, 2000, 1e-3, 1, 0.0).unwrap()).unwrap();
        let large = reflected_bm_variance(&rect, (0.0, 0.0), 0.2, &McConfig::new(3, 8000, 1e-3, 1, 0.0).unwrap()).unwrap();
        let ratio = small.variance.stderr / large.variance.stderr;
        assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn reflected_variance_examples() {
        let cfg = McConfig::new(5, 20000, 1e-3, 1, 0.0).unwrap();
        let free = reflected_bm_variance(&Rect::new(-50.0, 50.0, -50.0, 50.0).unwrap(), (0.0, 0.0), 0.1, &cfg).unwrap();
        assert!((free.variance.mean - 0.2).abs() < 4.0 * free.variance.stderr, "{free:?}");
        let narrow = reflected_bm_variance(&Rect::new(-0.1, 0.1, -0.1, 0.1).unwrap(), (0.0, 0.0), 0.1, &cfg).unwrap();
        assert!(narrow.holds && narrow.variance.mean < 0.05);
        let zero = reflected_bm_variance(&Rect::canonical(), (0.3, 0.1), 0.0, &cfg).unwrap();
        assert_eq!(zero.variance.mean, 0.0);
        assert_eq!(fold(1.3, 0.0, 1.0), 0.7);
        assert!((fold(-2.2, -1.0, 1.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn cylinder_feynman_kac_matches_slice() {
        let grid = Grid2::new(Rect::canonical(), 24, 8).unwrap();
        let spec = BarrelSpec::new(&ConvexPair::zero(grid), 16).unwrap();
        let slice = slice_eigenpair(&spec, (24, 8, 8), 1e-10).unwrap();
        let cfg = McConfig::new(9, 1500, 4e-4, 16, slice.lambda_d).unwrap();
        let probes = [(0.9, 0.0, 0.5), (-0.4, 0.5, 0.9), (1.4, -0.8, 1.0)];
        let r = feynman_kac_consistency(&spec, &slice, &cfg, &probes).unwrap();
        for p in &r.probes {
            assert!((p.estimate.mean - p.psi).abs() < 5.0 * p.estimate.stderr + 2e-2, "{p:?}");
        }
    }

    #[test]
    fn barrier_pieces() {
        let r = check_barrier(64, 200, 200).unwrap();
        assert!(r.caloric_residual < 1e-4, "{r:?}");
        assert!(r.initial_margin > 0.0 && r.tau_margin >= 0.0 && r.tau_margin < 1e-12);
        assert!((r.t8_exponent - (0.125 - 17f64.sqrt().ln()) * 64.0).abs() < 1e-12 && r.t8_exponent < 0.0);
        // at t = 0 and |w| = sqrt(d)/2 the Gaussian term equals 1, so the sign is 2 r^2 (10/d - 1/2) = 5 - d/4
        assert!((r.boundary_margin - (5.0 - 16.0)).abs() < 1e-9 && r.boundary_argmin_t == 0.0);
        assert!(!r.holds);
        let tampered = Barrier { linear: 0.2, ..Barrier::new(64) };
        assert!(check_barrier_with(&tampered, 50, 50).unwrap().caloric_residual > 1e-2);
        assert!(check_barrier(8, 10, 10).is_err());
    }
}
