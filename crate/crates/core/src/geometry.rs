//! Rectangles, uniform tensor grids, convex pairs and barrel geometry.
//!
//! Nodes of a [`Grid2`] are numbered with `y` as the fast index, so the
//! flat index of node `(i, j)` is `i * (ny + 1) + j`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::potentials::certify_convexity;

const EDGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let ok = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !ok || x_min >= x_max || y_min >= y_max {
            return Err(Error::InvalidParameter(format!("degenerate rectangle [{x_min}, {x_max}] x [{y_min}, {y_max}]")));
        }
        Ok(Self { x_min, x_max, y_min, y_max })
    }

    /// `[-pi/2, pi/2] x [-1, 1]`.
    pub fn canonical() -> Self {
        Self { x_min: -FRAC_PI_2, x_max: FRAC_PI_2, y_min: -1.0, y_max: 1.0 }
    }

    /// The canonical rectangle with wings of length `m` attached in `x`.
    pub fn with_wings(m: f64) -> Result<Self> {
        if !(m >= 0.0) {
            return Err(Error::InvalidParameter(format!("wing length {m} must be nonnegative")));
        }
        Rect::new(-FRAC_PI_2 - m, FRAC_PI_2 + m, -1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let sx = EDGE_SLACK * self.width().max(1.0);
        let sy = EDGE_SLACK * self.height().max(1.0);
        x >= self.x_min - sx && x <= self.x_max + sx && y >= self.y_min - sy && y <= self.y_max + sy
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2 {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2 {
    pub fn new(rect: Rect, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter(format!("grid needs positive cell counts, got {nx}x{ny}")));
        }
        Ok(Self { rect, nx, ny })
    }

    pub fn hx(&self) -> f64 {
        self.rect.width() / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.rect.height() / self.ny as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx {
            self.rect.x_max
        } else {
            self.rect.x_min + i as f64 * self.hx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny {
            self.rect.y_max
        } else {
            self.rect.y_min + j as f64 * self.hy()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..=self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..=self.ny).map(|j| self.y(j)).collect()
    }

    pub fn len(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx && j <= self.ny);
        i * (self.ny + 1) + j
    }

    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k / (self.ny + 1), k % (self.ny + 1))
    }

    pub fn point(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.coords(k);
        (self.x(i), self.y(j))
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.len())
            .map(|k| {
                let (i, j) = self.coords(k);
                self.is_boundary(i, j)
            })
            .collect()
    }

    /// Trapezoid weight of a node along one axis.
    pub fn x_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx {
            0.5 * self.hx()
        } else {
            self.hx()
        }
    }

    pub fn y_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny {
            0.5 * self.hy()
        } else {
            self.hy()
        }
    }

    pub fn cell_weight(&self, i: usize, j: usize) -> f64 {
        self.x_weight(i) * self.y_weight(j)
    }

    pub fn cell_weights(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (i, j) = self.coords(k);
                self.cell_weight(i, j)
            })
            .collect()
    }

    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (x, y) = self.point(k);
                f(x, y)
            })
            .collect()
    }

    /// Bilinear interpolation of nodal values.
    pub fn interpolate(&self, values: &[f64], x: f64, y: f64) -> Result<f64> {
        if !self.rect.contains(x, y) {
            return Err(Error::Domain { x, y });
        }
        let (i, tx) = locate(x, self.rect.x_min, self.hx(), self.nx);
        let (j, ty) = locate(y, self.rect.y_min, self.hy(), self.ny);
        let v00 = values[self.index(i, j)];
        let v10 = values[self.index(i + 1, j)];
        let v01 = values[self.index(i, j + 1)];
        let v11 = values[self.index(i + 1, j + 1)];
        Ok((1.0 - tx) * ((1.0 - ty) * v00 + ty * v01) + tx * ((1.0 - ty) * v10 + ty * v11))
    }
}

/// Cell index and fractional offset of `s` on a uniform axis with `n` cells.
pub(crate) fn locate(s: f64, s0: f64, h: f64, n: usize) -> (usize, f64) {
    let u = ((s - s0) / h).clamp(0.0, n as f64);
    let i = (u.floor() as usize).min(n - 1);
    (i, u - i as f64)
}

pub type ClosedForm = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A rectangle with a convex potential sampled on its nodes.
#[derive(Clone)]
pub struct ConvexPair {
    pub grid: Grid2,
    pub potential: Vec<f64>,
    pub closed_form: Option<ClosedForm>,
    pub convexity_tol: f64,
    /// Constant subtracted from the potential by [`ConvexPair::shifted_nonpositive`].
    pub shift: f64,
}

impl fmt::Debug for ConvexPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexPair")
            .field("grid", &self.grid)
            .field("convexity_tol", &self.convexity_tol)
            .field("shift", &self.shift)
            .field("closed_form", &self.closed_form.is_some())
            .finish()
    }
}

/// Default certificate tolerance, relative to the field magnitude.
pub fn relative_convexity_tol(values: &[f64], rel: f64) -> f64 {
    let scale = values.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    rel * scale
}

impl ConvexPair {
    /// Builds a certified pair. Fails if the potential is not finite or the
    /// discrete Hessian certificate fails.
    pub fn new(grid: Grid2, potential: Vec<f64>, convexity_tol: f64) -> Result<Self> {
        let pair = Self::uncertified(grid, potential)?;
        let pair = Self { convexity_tol, ..pair };
        if grid.nx >= 2 && grid.ny >= 2 {
            let cert = certify_convexity(&grid, &pair.potential, convexity_tol);
            if !cert.passed {
                return Err(Error::Convexity { worst: cert.worst_defect, i: cert.worst_node.0, j: cert.worst_node.1 });
            }
        }
        Ok(pair)
    }

    /// Builds a pair without the convexity certificate, for potentials that
    /// are convex by construction or used only for verification.
    pub fn uncertified(grid: Grid2, potential: Vec<f64>) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::InvalidParameter(format!("potential has {} values for {} nodes", potential.len(), grid.len())));
        }
        if let Some(k) = potential.iter().position(|v| !v.is_finite()) {
            let (x, y) = grid.point(k);
            return Err(Error::InvalidParameter(format!("potential not finite at ({x}, {y})")));
        }
        Ok(Self { grid, potential, closed_form: None, convexity_tol: 0.0, shift: 0.0 })
    }

    pub fn from_fn<F>(grid: Grid2, f: F, convexity_tol: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let values = grid.sample(&f);
        let mut pair = Self::new(grid, values, convexity_tol)?;
        pair.closed_form = Some(Arc::new(f));
        Ok(pair)
    }

    pub fn zero(grid: Grid2) -> Self {
        let mut pair = Self::uncertified(grid, vec![0.0; grid.len()]).expect("zero potential is valid");
        pair.closed_form = Some(Arc::new(|_, _| 0.0));
        pair
    }

    pub fn max_potential(&self) -> f64 {
        self.potential.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_potential(&self) -> f64 {
        self.potential.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.potential.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Potential at an arbitrary point, preferring the closed form.
    pub fn value_at(&self, x: f64, y: f64) -> Result<f64> {
        if !self.grid.rect.contains(x, y) {
            return Err(Error::Domain { x, y });
        }
        match &self.closed_form {
            Some(f) => Ok(f(x, y) - self.shift),
            None => self.grid.interpolate(&self.potential, x, y),
        }
    }

    /// Log of the unnormalized node masses `exp(-V) * cell weight`.
    pub fn log_masses(&self) -> Vec<f64> {
        let cells = self.grid.cell_weights();
        self.potential.iter().zip(&cells).map(|(v, c)| c.ln() - v).collect()
    }

    /// `Z = sum exp(-V) * cell weight`.
    pub fn normalizer(&self) -> f64 {
        let cells = self.grid.cell_weights();
        self.potential.iter().zip(&cells).map(|(v, c)| (-v).exp() * c).sum()
    }

    /// Probability weights of the nodes under `exp(-V)`, computed in log space.
    pub fn probability_weights(&self) -> Vec<f64> {
        normalized_exp(&self.log_masses())
    }

    /// Copy with the potential shifted so that its maximum is zero.
    pub fn shifted_nonpositive(&self) -> Self {
        let s = self.max_potential();
        let mut out = self.clone();
        for v in &mut out.potential {
            *v -= s;
        }
        out.shift = self.shift + s;
        out
    }
}

/// `exp(l_i) / sum_j exp(l_j)` without overflow.
pub fn normalized_exp(logs: &[f64]) -> Vec<f64> {
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// A convex pair viewed as the base of a barrel of radial dimension `d`.
#[derive(Debug, Clone)]
pub struct BarrelSpec {
    pub pair: ConvexPair,
    pub d: u32,
}

impl BarrelSpec {
    /// Shifts the potential to `max V = 0` and checks `d >= 2 max|V|`.
    pub fn new(pair: &ConvexPair, d: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("barrel dimension must be positive".into()));
        }
        let pair = pair.shifted_nonpositive();
        let sup = pair.sup_norm();
        if (d as f64) < 2.0 * sup {
            return Err(Error::InvalidParameter(format!("dimension {d} below twice the potential sup norm {sup}")));
        }
        Ok(Self { pair, d })
    }

    pub fn shift(&self) -> f64 {
        self.pair.shift
    }

    /// Ball radius of the fiber over `(x, y)`.
    pub fn barrel_radius(&self, x: f64, y: f64) -> Result<f64> {
        let v = self.pair.value_at(x, y)?;
        Ok(radius_for_potential(v, self.d))
    }

    pub fn slice_potential(&self, r: f64) -> Result<f64> {
        slice_potential(self.d, r)
    }
}

/// `(sqrt(d) - V / sqrt(d)) / 2`.
pub fn radius_for_potential(v: f64, d: u32) -> f64 {
    let sd = (d as f64).sqrt();
    0.5 * (sd - v / sd)
}

/// Fiber volume over a point with potential `v` relative to the ball of
/// radius `sqrt(d)/2`, i.e. `(1 - v/d)^(d+1)`.
pub fn slice_volume_ratio(v: f64, d: u32) -> Result<f64> {
    let df = d as f64;
    if d == 0 || df < 2.0 * v.abs() {
        return Err(Error::InvalidParameter(format!("need d >= 2|V|, got d = {d}, V = {v}")));
    }
    Ok(((df + 1.0) * (-v / df).ln_1p()).exp())
}

/// `-sqrt(d) log(1 - 2 r / sqrt(d))`, defined for `0 <= r < sqrt(d)/2`.
pub fn slice_potential(d: u32, r: f64) -> Result<f64> {
    let sd = (d as f64).sqrt();
    if d == 0 || r < 0.0 || r >= 0.5 * sd || !r.is_finite() {
        return Err(Error::Singular(format!("slice potential undefined at r = {r} for d = {d}")));
    }
    Ok(-sd * (-2.0 * r / sd).ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn canonical_grid(n: usize) -> Grid2 {
        Grid2::new(Rect::canonical(), n, n).unwrap()
    }

    #[test]
    fn barrel_radius_examples() {
        let g = canonical_grid(8);
        let spec = BarrelSpec::new(&ConvexPair::zero(g), 4).unwrap();
        assert_eq!(spec.barrel_radius(0.3, -0.2).unwrap(), 1.0);
        assert_eq!(radius_for_potential(-2.0, 16), 2.25);
        let spec1 = BarrelSpec::new(&ConvexPair::zero(g), 1).unwrap();
        assert_eq!(spec1.barrel_radius(0.0, 0.0).unwrap(), 0.5);
        assert!(matches!(spec.barrel_radius(3.0, 0.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn barrel_spec_shifts_to_nonpositive() {
        let g = canonical_grid(8);
        let pair = ConvexPair::from_fn(g, |x, y| x * x + y * y + 3.0, 1e-9).unwrap();
        let spec = BarrelSpec::new(&pair, 16).unwrap();
        assert!(spec.pair.max_potential().abs() < 1e-15);
        assert!((spec.shift() - (std::f64::consts::PI.powi(2) / 4.0 + 4.0)).abs() < 1e-12);
        assert!(spec.barrel_radius(0.0, 0.0).unwrap() > 2.0);
        assert!(BarrelSpec::new(&pair, 2).is_err());
    }

    #[test]
    fn slice_volume_ratio_examples() {
        assert_eq!(slice_volume_ratio(0.0, 7).unwrap(), 1.0);
        // 1.1^11 by repeated multiplication
        let expected = (0..11).fold(1.0, |a, _| a * 1.1);
        assert!((slice_volume_ratio(-1.0, 10).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 2.853_116_706_110_003).abs() < 1e-12);
        let mut last = f64::INFINITY;
        for d in [10, 100, 1000, 10000] {
            let err = (slice_volume_ratio(-1.0, d).unwrap() - std::f64::consts::E).abs();
            assert!(err * (d as f64) < 2.0, "error {err} at d = {d} is not O(1/d)");
            assert!(err < last);
            last = err;
        }
        assert!(slice_volume_ratio(3.0, 4).is_err());
    }

    #[test]
    fn slice_volume_ratio_correction_is_order_one_over_d() {
        for v in [-2.0, -1.5, -1.0, -0.5] {
            let scaled: Vec<f64> = [16, 64, 256].iter().map(|&d| (slice_volume_ratio(v, d).unwrap() * f64::exp(v) - 1.0) * d as f64).collect();
            // the limit of d * (ratio e^V - 1) is -V - V^2 / 2
            let limit = -v - v * v / 2.0;
            for w in scaled.windows(2) {
                assert!((w[1] - limit).abs() <= (w[0] - limit).abs());
            }
            assert!(scaled.iter().all(|s| s.abs() < 5.0));
        }
    }

    #[test]
    fn slice_potential_examples() {
        assert_eq!(slice_potential(9, 0.0).unwrap(), 0.0);
        assert!((slice_potential(4, 0.5).unwrap() - 2.0 * std::f64::consts::LN_2).abs() < 1e-14);
        assert!((slice_potential(4, 0.5).unwrap() - 1.38629).abs() < 1e-5);
        assert!(matches!(slice_potential(4, 1.0), Err(Error::Singular(_))));
        assert!(slice_potential(4, 1.5).is_err());
    }

    #[test]
    fn slice_potential_tends_to_linear() {
        // remainder of -s log(1 - 2r/s) - 2r is 2 r^2 / s + O(r^3 / s^2)
        for r in [0.1, 0.5, 1.0] {
            for d in [64u32, 256, 1024, 4096] {
                let sd = (d as f64).sqrt();
                let gap = slice_potential(d, r).unwrap() - 2.0 * r;
                assert!(gap >= 0.0);
                assert!(gap <= 4.0 * r * r / sd, "r = {r}, d = {d}, gap = {gap}");
            }
        }
    }

    #[test]
    fn grid_indexing_and_weights() {
        let g = Grid2::new(Rect::new(0.0, 2.0, 0.0, 1.0).unwrap(), 4, 2).unwrap();
        assert_eq!(g.len(), 15);
        for k in 0..g.len() {
            let (i, j) = g.coords(k);
            assert_eq!(g.index(i, j), k);
        }
        let total: f64 = g.cell_weights().iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        assert_eq!(g.boundary_mask().iter().filter(|b| !**b).count(), 3);
        assert!(Grid2::new(Rect::canonical(), 0, 3).is_err());
        assert!(Rect::new(1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn wings_extend_canonical_rect() {
        let r = Rect::with_wings(3.0).unwrap();
        assert!((r.width() - (std::f64::consts::PI + 6.0)).abs() < 1e-14);
        assert_eq!(r.y_min, -1.0);
    }

    #[test]
    fn pair_rejects_concave_and_nonfinite() {
        let g = canonical_grid(10);
        assert!(matches!(ConvexPair::from_fn(g, |x, _| -x * x, 1e-9), Err(Error::Convexity { .. })));
        let mut v = vec![0.0; g.len()];
        v[3] = f64::NAN;
        assert!(ConvexPair::new(g, v, 1e-9).is_err());
        let pair = ConvexPair::zero(g);
        assert!((pair.normalizer() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn radius_at_least_half_sqrt_d(v in -4.0f64..=0.0, d in 8u32..400) {
            let r = radius_for_potential(v, d);
            let base = 0.5 * (d as f64).sqrt();
            prop_assert!(r >= base);
            prop_assert_eq!(r == base, v == 0.0);
        }

        #[test]
        fn slice_potential_dominates_linear(r in 0.0f64..1.9, d in 16u32..1000) {
            prop_assert!(slice_potential(d, r).unwrap() >= 2.0 * r - 1e-15);
        }

        #[test]
        fn bilinear_reproduces_affine(a in -3.0f64..3.0, b in -3.0f64..3.0, x in -1.5f64..1.5, y in -1.0f64..1.0) {
            let g = canonical_grid(7);
            let vals = g.sample(|x, y| a * x + b * y + 1.0);
            let v = g.interpolate(&vals, x, y).unwrap();
            prop_assert!((v - (a * x + b * y + 1.0)).abs() < 1e-12);
        }
    }
}
