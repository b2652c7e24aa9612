//! Band factorizations for grid operators ordered with one short axis.

use super::sparse::Csr;
use crate::error::{Error, Result};

/// Cholesky factor `L L^T` of a symmetric positive definite band matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    // row i holds columns i-bw ..= i at offsets 0 ..= bw
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &Csr) -> Result<Self> {
        let n = a.n;
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[i * w + (j + bw - i)] = v;
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = data[i * w + (j + bw - i)];
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in k0..j {
                    s -= data[ri + k] * data[rj + k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::Factorization { row: i, pivot: s });
                    }
                    data[i * w + bw] = s.sqrt();
                } else {
                    data[i * w + (j + bw - i)] = s / data[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, data })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let base = i * w + bw - i;
            let mut s = x[i];
            for j in j0..i {
                s -= self.data[base + j] * x[j];
            }
            x[i] = s / self.data[i * w + bw];
        }
        for i in (0..n).rev() {
            x[i] /= self.data[i * w + bw];
            let xi = x[i];
            let j0 = i.saturating_sub(bw);
            let base = i * w + bw - i;
            for j in j0..i {
                x[j] -= self.data[base + j] * xi;
            }
        }
    }
}

/// LU factorization without pivoting of a band matrix with equal lower and
/// upper bandwidth. Intended for row diagonally dominant matrices.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    bw: usize,
    // row i holds columns i-bw ..= i+bw at offsets 0 ..= 2bw
    data: Vec<f64>,
}

impl BandLu {
    pub fn factor(a: &Csr) -> Result<Self> {
        let n = a.n;
        let bw = a.bandwidth();
        let w = 2 * bw + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in a.row(i) {
                data[i * w + (j + bw - i)] = v;
            }
        }
        for k in 0..n {
            let pivot = data[k * w + bw];
            if !(pivot.abs() > 0.0) || !pivot.is_finite() {
                return Err(Error::Factorization { row: k, pivot });
            }
            let iend = (k + bw).min(n - 1);
            let jend = (k + bw).min(n - 1);
            let rk = k * w + bw - k;
            for i in k + 1..=iend {
                let ri = i * w + bw - i;
                let l = data[ri + k] / pivot;
                data[ri + k] = l;
                if l != 0.0 {
                    for j in k + 1..=jend {
                        data[ri + j] -= l * data[rk + j];
                    }
                }
            }
        }
        Ok(Self { n, bw, data })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, 2 * self.bw + 1);
        for i in 0..n {
            let ri = i * w + bw - i;
            let mut s = x[i];
            for j in i.saturating_sub(bw)..i {
                s -= self.data[ri + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let ri = i * w + bw - i;
            let mut s = x[i];
            for j in i + 1..=(i + bw).min(n - 1) {
                s -= self.data[ri + j] * x[j];
            }
            x[i] = s / self.data[ri + i];
        }
    }
}

/// Bytes needed to factor `a` with [`BandLu`].
pub fn lu_footprint(a: &Csr) -> usize {
    a.n * (2 * a.bandwidth() + 1) * std::mem::size_of::<f64>()
}
