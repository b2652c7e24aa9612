//! Smallest nonzero eigenpairs of operators `L = W^{-1} A` that are
//! self-adjoint in the weighted inner product `<f, g>_W = sum w f g` and
//! annihilate constants.

use nalgebra::{DMatrix, SymmetricEigen};

use super::banded::{lu_footprint, BandLu};
use super::sparse::{Csr, LogFormBuilder};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct WeightedOperator {
    /// Row scaled operator; rows sum to zero.
    pub l: Csr,
    /// Node masses scaled so that the largest equals one.
    pub w: Vec<f64>,
}

impl WeightedOperator {
    pub fn from_log_form(form: &LogFormBuilder, log_mass: &[f64]) -> Self {
        let top = log_mass.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w = log_mass.iter().map(|m| (m - top).exp()).collect();
        Self { l: form.row_scaled(log_mass), w }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.w.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }

    pub fn mean(&self, a: &[f64]) -> f64 {
        let total: f64 = self.w.iter().sum();
        self.inner(a, &vec![1.0; a.len()]) / total
    }

    pub fn project_constants(&self, a: &mut [f64]) {
        let c = self.mean(a);
        for v in a.iter_mut() {
            *v -= c;
        }
    }

    pub fn apply(&self, a: &[f64]) -> Vec<f64> {
        self.l.mul_vec(a)
    }

    pub fn rayleigh(&self, a: &[f64]) -> f64 {
        self.inner(a, &self.apply(a)) / self.inner(a, a)
    }

    /// `||L a - lambda a||_W / ||a||_W`.
    pub fn residual(&self, a: &[f64], lambda: f64) -> f64 {
        let la = self.apply(a);
        let r: Vec<f64> = la.iter().zip(a).map(|(u, v)| u - lambda * v).collect();
        self.norm(&r) / self.norm(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Method {
    ShiftInvertLanczos,
    Lobpcg,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub count: usize,
    pub tol: f64,
    pub shift: f64,
    pub max_iter: usize,
    /// Factorizations above this many bytes fall back to LOBPCG.
    pub memory_cap: usize,
    pub force: Option<Method>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { count: 2, tol: 1e-8, shift: 1e-2, max_iter: 400, memory_cap: 1 << 31, force: None }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub method: Method,
}

/// Deterministic start vector seeded by node index.
pub fn seeded_vector(n: usize, salt: u64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let mut z = (i as u64).wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x9E37_79B9_7F4A_7C15);
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

pub fn smallest_nonzero(op: &WeightedOperator, opts: &EigenOptions) -> Result<Eigenpairs> {
    if opts.count == 0 {
        return Err(Error::InvalidParameter("eigenpair count must be positive".into()));
    }
    let method = match opts.force {
        Some(m) => m,
        None if lu_footprint(&op.l) > opts.memory_cap => Method::Lobpcg,
        None => Method::ShiftInvertLanczos,
    };
    match method {
        Method::ShiftInvertLanczos => lanczos(op, opts),
        Method::Lobpcg => lobpcg(op, opts),
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (u, v) in y.iter_mut().zip(x) {
        *u += a * v;
    }
}

fn scale(x: &mut [f64], a: f64) {
    for v in x.iter_mut() {
        *v *= a;
    }
}

fn finish(op: &WeightedOperator, mut vectors: Vec<Vec<f64>>, iterations: usize, method: Method) -> Eigenpairs {
    let mut pairs: Vec<(f64, Vec<f64>)> = vectors
        .drain(..)
        .map(|mut v| {
            op.project_constants(&mut v);
            let nrm = op.norm(&v);
            scale(&mut v, 1.0 / nrm);
            (op.rayleigh(&v), v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let residuals = pairs.iter().map(|(l, v)| op.residual(v, *l)).collect();
    let (values, vectors) = pairs.into_iter().unzip();
    Eigenpairs { values, vectors, residuals, iterations, method }
}

/// Residual attainable in double precision for an operator of this size.
fn roundoff_floor(op: &WeightedOperator) -> f64 {
    256.0 * f64::EPSILON * op.l.norm_inf()
}

fn lanczos(op: &WeightedOperator, opts: &EigenOptions) -> Result<Eigenpairs> {
    let n = op.len();
    let roundoff = roundoff_floor(op);
    let shifted = op.l.add_identity(opts.shift);
    let lu = BandLu::factor(&shifted)?;
    let max_steps = opts.max_iter.min(n.saturating_sub(1)).max(1);

    let mut q0 = seeded_vector(n, 1);
    op.project_constants(&mut q0);
    let nrm = op.norm(&q0);
    if !(nrm > 0.0) {
        return Err(Error::Singular("start vector has zero weighted norm".into()));
    }
    scale(&mut q0, 1.0 / nrm);
    let mut basis = vec![q0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut best_residual = f64::INFINITY;

    for step in 0..max_steps {
        let mut z = basis[step].clone();
        lu.solve_in_place(&mut z);
        op.project_constants(&mut z);
        let mut a = 0.0;
        for _ in 0..2 {
            for (i, qi) in basis.iter().enumerate() {
                let h = op.inner(qi, &z);
                if i == step {
                    a += h;
                }
                axpy(&mut z, -h, qi);
            }
        }
        alpha.push(a);
        let b = op.norm(&z);
        let m = alpha.len();
        let exhausted = !(b > 1e-13 * a.abs().max(f64::MIN_POSITIVE)) || m == max_steps;
        let check = exhausted || (m >= opts.count + 2 && m.is_multiple_of(5));
        if check {
            let ritz = ritz_vectors(&alpha, &beta, &basis, opts.count);
            let pairs = finish(op, ritz, m, Method::ShiftInvertLanczos);
            let worst = pairs.residuals.iter().cloned().fold(0.0, f64::max);
            best_residual = best_residual.min(worst);
            if worst <= opts.tol.max(roundoff) || (exhausted && pairs.values.len() < opts.count) {
                return Ok(pairs);
            }
            if exhausted {
                break;
            }
        }
        beta.push(b);
        scale(&mut z, 1.0 / b);
        basis.push(z);
    }
    Err(Error::NoConvergence { iterations: alpha.len(), residual: best_residual })
}

fn ritz_vectors(alpha: &[f64], beta: &[f64], basis: &[Vec<f64>], count: usize) -> Vec<Vec<f64>> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order
        .into_iter()
        .take(count.min(m))
        .filter(|&c| eig.eigenvalues[c] > 0.0)
        .map(|c| {
            let mut x = vec![0.0; basis[0].len()];
            for (i, qi) in basis.iter().enumerate().take(m) {
                axpy(&mut x, eig.eigenvectors[(i, c)], qi);
            }
            x
        })
        .collect()
}

/// W-orthonormalizes `vs` in place, dropping numerically dependent columns.
fn orthonormalize(op: &WeightedOperator, vs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for mut v in vs {
        op.project_constants(&mut v);
        let start = op.norm(&v);
        if !(start > 0.0) {
            continue;
        }
        for _ in 0..2 {
            for u in &out {
                let h = op.inner(u, &v);
                axpy(&mut v, -h, u);
            }
        }
        let nrm = op.norm(&v);
        if nrm > 1e-10 * start {
            scale(&mut v, 1.0 / nrm);
            out.push(v);
        }
    }
    out
}

fn lobpcg(op: &WeightedOperator, opts: &EigenOptions) -> Result<Eigenpairs> {
    let n = op.len();
    let roundoff = roundoff_floor(op);
    let k = opts.count.min(n.saturating_sub(1));
    let precond: Vec<f64> = op.l.diagonal().iter().map(|d| 1.0 / (d + opts.shift)).collect();
    let mut x = orthonormalize(op, (0..k).map(|s| seeded_vector(n, s as u64 + 1)).collect());
    let mut p: Vec<Vec<f64>> = Vec::new();
    let mut worst = f64::INFINITY;
    for it in 0..opts.max_iter.max(1) * 10 {
        let lambdas: Vec<f64> = x.iter().map(|v| op.rayleigh(v)).collect();
        let mut residual_dirs = Vec::with_capacity(k);
        worst = 0.0;
        for (v, &lam) in x.iter().zip(&lambdas) {
            let lv = op.apply(v);
            let r: Vec<f64> = lv.iter().zip(v).map(|(a, b)| a - lam * b).collect();
            worst = f64::max(worst, op.norm(&r));
            residual_dirs.push(r.iter().zip(&precond).map(|(a, b)| a * b).collect::<Vec<f64>>());
        }
        if worst <= opts.tol.max(roundoff) {
            return Ok(finish(op, x, it, Method::Lobpcg));
        }
        let nx = x.len();
        let mut span = x.clone();
        span.extend(residual_dirs);
        span.extend(p.iter().cloned());
        let s = orthonormalize(op, span);
        let m = s.len();
        let ls: Vec<Vec<f64>> = s.iter().map(|v| op.apply(v)).collect();
        let mut h = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v = 0.5 * (op.inner(&s[i], &ls[j]) + op.inner(&s[j], &ls[i]));
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut new_x = Vec::with_capacity(k);
        let mut new_p = Vec::with_capacity(k);
        for &c in order.iter().take(k) {
            let mut xv = vec![0.0; n];
            let mut pv = vec![0.0; n];
            for (i, si) in s.iter().enumerate() {
                let coef = eig.eigenvectors[(i, c)];
                axpy(&mut xv, coef, si);
                if i >= nx.min(m) {
                    axpy(&mut pv, coef, si);
                }
            }
            new_x.push(xv);
            new_p.push(pv);
        }
        x = orthonormalize(op, new_x);
        p = new_p;
        if x.len() < k {
            x = orthonormalize(op, x.into_iter().chain((0..k).map(|s| seeded_vector(n, 100 + s as u64))).collect());
            x.truncate(k);
            p.clear();
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iter * 10, residual: worst })
}
